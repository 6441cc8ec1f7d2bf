//! The nine acceptance checks. Each returns a one-line summary on success
//! and the first violation on failure.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use mdkk::domain::{AtomRecord, Decomposition, SimBox, Vec3};
use mdkk::driver::{bench_saturation, parse_script, rises_to_plateau, saturation_size, serialize_script, BenchOptions, BenchRow, Session, StyleRegistry};
use mdkk::error::Error;
use mdkk::lattice::{assign_velocities, fcc_atoms, fcc_box, random_gas};
use mdkk::md::{ForceField, MdConfig, System};
use mdkk::memspace::{LayoutPolicy, Space, Strategy};
use mdkk::neighbor::{ListSettings, ListStyle, NeighborList};
use mdkk::pair::{ExecMode, LjKernel, PairConfig, PairParams};
use mdkk::qeq::{build_matrix, cg_solve, cg_solve_fused, scan_offsets_64, OverCsr, QeqParams, QeqSpecies, QeqSystem};
use mdkk::snap::SnapKnobs;
use mdkk::torsion::{compute_torsion, compute_torsion_direct, divergence_metric, enumerate_quads, BondParams, BondTable, QuadTable};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{brute_bonds, brute_quads, dense_matvec, dense_solve, lj_brute, qeq_dense, replay_dual, DualOp};
use super::*;

pub type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn lj_field(shift: bool) -> Box<dyn ForceField> {
    let k = LjKernel::uniform(PairParams::new(1.0, 1.0, 2.5).unwrap());
    Box::new(if shift { k.shifted() } else { k })
}

// 1. LJ against the brute-force oracle

pub fn lj_oracle() -> Outcome {
    let t = Instant::now();
    let mut worst_e = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut configs = 0;
    for n in [100, 500, 2000] {
        for c in 0..20u64 {
            // N = 100 only fits the cutoff plus skin twice at dilute densities
            let densities = if n == 100 { [0.45, 0.5, 0.55] } else { [0.5, 0.8442, 1.0] };
            let density = densities[c as usize % 3];
            let (sim_box, atoms) = random_gas(n, density, 0.8, 1000 * n as u64 + c).unwrap();
            let (e_ref, f_ref) = lj_brute(&sim_box, &atoms, 1.0, 1.0, 2.5, false);
            let (e, f) = system_eval(sim_box, &atoms, lj_field(false), MdConfig::default());
            ensure!(close(e, e_ref, 1e-12, 1e-10), "N={n} config {c}: energy {e} vs oracle {e_ref}");
            worst_e = worst_e.max((e - e_ref).abs() / e_ref.abs());
            for (i, (a, b)) in f.iter().zip(&f_ref).enumerate() {
                for k in 0..3 {
                    ensure!(close(a[k], b[k], 1e-12, 1e-10), "N={n} config {c}: force {i}.{k} {} vs oracle {}", a[k], b[k]);
                    worst_f = worst_f.max((a[k] - b[k]).abs());
                }
            }
            configs += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!("{configs} configurations, worst energy rel {worst_e:.1e}, worst force abs {worst_f:.1e}, {secs:.1} s"))
}

// 2. every list/threading/scatter/rank configuration agrees

pub fn config_matrix() -> Vec<MdConfig> {
    let mut out = Vec::new();
    for style in [ListStyle::Full, ListStyle::Half] {
        for newton in [true, false] {
            for mode in [ExecMode::AtomParallel, ExecMode::NeighborParallel] {
                for strategy in [Strategy::Serial, Strategy::duplicate(4), Strategy::Atomic] {
                    for n_ranks in [1, 2, 4] {
                        let pair = PairConfig { mode, strategy, space: Space::Host };
                        out.push(MdConfig { skin: 0.3, style, newton, pair, n_ranks });
                    }
                }
            }
        }
    }
    out
}

pub fn configuration_equivalence() -> Outcome {
    let t = Instant::now();
    let (sim_box, atoms) = random_gas(500, 0.8442, 0.8, 2024).unwrap();
    let configs = config_matrix();
    let (e0, f0) = system_eval(sim_box, &atoms, lj_field(false), configs[0]);
    let mut worst_e = 0.0f64;
    let mut worst_f = 0.0f64;
    for c in &configs {
        let (e, f) = system_eval(sim_box, &atoms, lj_field(false), *c);
        ensure!(close(e, e0, 1e-12, 0.0), "{c:?}: energy {e} vs {e0}");
        worst_e = worst_e.max((e - e0).abs() / e0.abs());
        worst_f = worst_f.max(max_diff(&f, &f0));
    }
    ensure!(worst_f <= 1e-10, "forces differ by {worst_f:.2e}");
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 120.0, "took {secs:.1} s");
    Ok(format!("{} configurations, worst energy rel {worst_e:.1e}, worst force abs {worst_f:.1e}, {secs:.1} s", configs.len()))
}

// 3. NVE energy conservation

pub fn nve_conservation() -> Outcome {
    let t = Instant::now();
    let cells = [5, 5, 5];
    let sim_box = fcc_box(0.8442, cells).unwrap();
    let mut atoms = fcc_atoms(0.8442, cells, 0, 0);
    assign_velocities(&mut atoms, &[1.0], 1.44, 87287);
    let mut sys = System::new(sim_box, &atoms, vec![1.0], lj_field(true), MdConfig::default()).unwrap();
    let log = sys.run(1000, 0.005, 10).map_err(|e| e.to_string())?;
    let e0 = log[0].etotal;
    let peak = log.iter().map(|r| ((r.etotal - e0) / e0).abs()).fold(0.0, f64::max);
    let drift = ((log.last().unwrap().etotal - e0) / e0).abs();
    let secs = t.elapsed().as_secs_f64();
    ensure!(sys.n_atoms() == 500 && log.last().unwrap().step == 1000, "wrong system or step count");
    ensure!(drift < 1e-4, "|dE/E0| = {drift:.2e} after 1000 steps");
    ensure!(secs < 10.0, "took {secs:.1} s");
    Ok(format!("|dE/E0| {drift:.1e} after 1000 steps (largest excursion at 10-step samples {peak:.1e}), {} rebuilds, {secs:.1} s", sys.rebuilds()))
}

// 4. QEq

pub fn qeq_params() -> QeqParams {
    let mut p = QeqParams::new(
        vec![QeqSpecies { chi: 1.0, eta: 40.0, gamma: 0.8 }, QeqSpecies { chi: 2.5, eta: 45.0, gamma: 0.6 }],
        3.0,
    );
    p.tol = 1e-10;
    p.max_iter = 1000;
    p
}

pub fn two_species_gas(n: usize, seed: u64) -> (SimBox, Vec<AtomRecord>) {
    let (sim_box, mut atoms) = random_gas(n, 0.5, 0.8, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for a in &mut atoms {
        a.species = rng.gen_range(0..2);
    }
    (sim_box, atoms)
}

/// Matrix assembled through the neighbor-list path on one rank.
pub fn qeq_matrix(sim_box: SimBox, atoms: &[AtomRecord], params: &QeqParams) -> (OverCsr, Vec<f64>) {
    let mut d = Decomposition::new(sim_box, 1, atoms, params.cutoff).unwrap();
    let s = &mut d.stores_mut()[0];
    assert_eq!(s.global_ids[..s.n_local()], atoms.iter().map(|a| a.id).collect::<Vec<_>>());
    let list = NeighborList::build(s, &sim_box, ListSettings::new(params.cutoff, 0.0, ListStyle::Full, false)).unwrap();
    let h = build_matrix(s, &list, params).unwrap();
    let chi = atoms.iter().map(|a| params.species[a.species as usize].chi).collect();
    (h, chi)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

pub fn qeq() -> Outcome {
    let t = Instant::now();
    let params = qeq_params();
    let mut worst_h = 0.0f64;
    let mut worst_mv = 0.0f64;
    let mut worst_q = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut cases = 0;
    for (k, n) in [120usize, 200, 300].into_iter().enumerate() {
        for seed in 0..4u64 {
            let (sim_box, atoms) = two_species_gas(n, 100 * k as u64 + seed);
            let (h, chi) = qeq_matrix(sim_box, &atoms, &params);
            let dense = qeq_dense(&sim_box, &atoms, &params);
            let built = h.to_dense();
            for (a, b) in built.iter().zip(&dense) {
                ensure!((a - b).abs() <= 1e-13 * b.abs().max(1.0), "N={n}: matrix entry {a} vs dense {b}");
                worst_h = worst_h.max((a - b).abs());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = dense_matvec(&dense, &x);
            let scale: Vec<f64> = (0..n).map(|i| (0..n).map(|j| (dense[i * n + j] * x[j]).abs()).sum()).collect();
            let y = h.spmv(&x).unwrap();
            for lanes in [1, 3, 8] {
                ensure!(h.spmv_row_split(&x, lanes).unwrap().iter().zip(&y).all(|(a, b)| (a - b).abs() <= 1e-13 * b.abs().max(1.0)), "row split {lanes}");
            }
            let (f1, f2) = h.spmv_fused(&x, &x2).unwrap();
            ensure!(bits(&f1) == bits(&y) && bits(&f2) == bits(&h.spmv(&x2).unwrap()), "fused product is not bit-identical");
            for i in 0..n {
                ensure!((y[i] - want[i]).abs() <= 1e-13 * scale[i].max(1.0), "N={n}: spmv row {i} {} vs {}", y[i], want[i]);
                worst_mv = worst_mv.max((y[i] - want[i]).abs() / scale[i].max(1.0));
            }

            // fused dual solve against two independent solves
            let b1: Vec<f64> = chi.iter().map(|c| -c).collect();
            let b2 = vec![-1.0; n];
            let (s, tt) = cg_solve_fused(&h, &b1, &b2, params.tol, params.max_iter, true).unwrap();
            let s_ref = cg_solve(&h, &b1, params.tol, params.max_iter, true).unwrap();
            let t_ref = cg_solve(&h, &b2, params.tol, params.max_iter, true).unwrap();
            for (fused, reference) in [(&s, &s_ref), (&tt, &t_ref)] {
                ensure!(fused.iterations == reference.iterations, "iteration counts differ");
                ensure!(bits(&fused.residuals) == bits(&reference.residuals), "residual histories differ");
                ensure!(fused.iterates.len() == reference.iterates.len(), "iterate counts differ");
                for (a, b) in fused.iterates.iter().zip(&reference.iterates) {
                    ensure!(bits(a) == bits(b), "iterates differ");
                }
            }

            let mut sys = QeqSystem::new(h.clone(), chi.clone());
            sys.tol = params.tol;
            sys.max_iter = params.max_iter;
            let sol = sys.solve().map_err(|e| e.to_string())?;
            let total: f64 = sol.charges.iter().sum();
            ensure!(total.abs() <= 1e-10, "N={n}: total charge {total:e}");
            worst_sum = worst_sum.max(total.abs());
            let s_d = dense_solve(&dense, &b1);
            let t_d = dense_solve(&dense, &b2);
            let mu = s_d.iter().sum::<f64>() / t_d.iter().sum::<f64>();
            for (i, q) in sol.charges.iter().enumerate() {
                let qd = s_d[i] - mu * t_d[i];
                ensure!((q - qd).abs() <= 1e-8, "N={n}: charge {i} {q} vs dense {qd}");
                worst_q = worst_q.max((q - qd).abs());
            }
            cases += 1;
        }
    }
    scan_past_u32()?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!(
        "{cases} systems: matrix {worst_h:.1e}, spmv {worst_mv:.1e}, fused CG bit-identical, |sum q| {worst_sum:.1e}, charges vs dense {worst_q:.1e}, 64-bit scan ok, {secs:.1} s"
    ))
}

/// Offsets of capacities summing far past 2³¹ and 2³², checked against a
/// serial 64-bit running sum. Only the offsets are materialized.
pub fn scan_past_u32() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let caps: Vec<u32> = (0..1_000_003).map(|_| rng.gen_range(4000..6000)).collect();
    let off = scan_offsets_64(&caps);
    ensure!(off.len() == caps.len() + 1 && off[0] == 0, "offset length");
    let mut acc = 0u64;
    for (i, &c) in caps.iter().enumerate() {
        ensure!(off[i] == acc, "offset {i}: {} vs {acc}", off[i]);
        acc += c as u64;
    }
    ensure!(off[caps.len()] == acc && acc > u32::MAX as u64, "total {acc}");
    let huge = [u32::MAX; 3];
    ensure!(scan_offsets_64(&huge) == vec![0, u32::MAX as u64, 2 * u32::MAX as u64, 3 * u32::MAX as u64], "max-capacity rows");
    Ok(())
}

// 5. quad pre-processing and torsion forces

pub fn bond_params() -> BondParams {
    BondParams { r_bond: 1.6, r0: 1.2, p: 2.0, bo_min: 0.01 }
}

pub const BO_THRESHOLD: f64 = 0.01;

pub fn bonded_system(n: usize, seed: u64) -> (SimBox, Vec<AtomRecord>) {
    random_gas(n, 0.6, 0.9, seed).unwrap()
}

pub fn quad_set(q: &QuadTable) -> BTreeSet<[u32; 4]> {
    q.quads.iter().copied().collect()
}

/// Every quad of pivot `i` sits in the span of `i`.
pub fn spans_are_contiguous(q: &QuadTable) -> bool {
    let n = q.per_atom_start.len() - 1;
    q.total == q.quads.len() && q.per_atom_start[n] == q.total && (0..n).all(|i| q.of_atom(i).iter().all(|x| x[0] as usize == i))
}

pub fn positions(atoms: &[AtomRecord]) -> Vec<Vec3> {
    atoms.iter().map(|a| a.position).collect()
}

/// Quads that contain atom `i`; their energy has the same gradient with
/// respect to `x_i` as the total.
pub fn quads_touching(quads: &QuadTable, i: usize) -> QuadTable {
    let local: Vec<[u32; 4]> = quads.quads.iter().copied().filter(|q| q.contains(&(i as u32))).collect();
    QuadTable { total: local.len(), per_atom_start: vec![0, local.len()], quads: local }
}

/// Largest `|fd - F| / max|F|` over all coordinates of the first `limit` atoms,
/// with the quad table held fixed. Differences are taken over the terms
/// touching the displaced atom to keep rounding well below the tolerance.
pub fn torsion_fd_error(quads: &QuadTable, sim_box: &SimBox, x: &[Vec3], k_t: f64, limit: usize) -> f64 {
    let h = 1e-6;
    let f = compute_torsion(quads, sim_box, x, k_t, Strategy::Serial).forces;
    let scale = max_abs(&f).max(1e-300);
    let mut worst = 0.0f64;
    for i in 0..x.len().min(limit) {
        let local = quads_touching(quads, i);
        for k in 0..3 {
            let mut p = x.to_vec();
            p[i][k] += h;
            let ep = compute_torsion(&local, sim_box, &p, k_t, Strategy::Serial).energy;
            p[i][k] -= 2.0 * h;
            let em = compute_torsion(&local, sim_box, &p, k_t, Strategy::Serial).energy;
            worst = worst.max((-(ep - em) / (2.0 * h) - f[i][k]).abs() / scale);
        }
    }
    worst
}

pub fn torsion() -> Outcome {
    let t = Instant::now();
    let params = bond_params();
    let mut total_quads = 0;
    let mut worst_par = 0.0f64;
    let mut worst_fd = 0.0f64;
    let mut metric = 0.0f64;
    for s in 0..20u64 {
        let n = 50 + 8 * s as usize;
        let (sim_box, atoms) = bonded_system(n, 500 + s);
        let bonds = BondTable::from_atoms(&sim_box, &atoms, &params).map_err(|e| e.to_string())?;
        let quads = enumerate_quads(&bonds, BO_THRESHOLD);
        let expect = brute_quads(&brute_bonds(&sim_box, &atoms, &params), BO_THRESHOLD);
        ensure!(quad_set(&quads) == expect, "system {s}: {} quads vs {} by brute force", quads.total, expect.len());
        ensure!(quads.total == expect.len(), "system {s}: duplicate quads");
        ensure!(spans_are_contiguous(&quads), "system {s}: spans not contiguous");
        total_quads += quads.total;
        metric = metric.max(divergence_metric(&bonds, &quads));

        let x = positions(&atoms);
        let reference = compute_torsion_direct(&bonds, &sim_box, &x, 1.0, BO_THRESHOLD);
        for strategy in [Strategy::Serial, Strategy::Atomic, Strategy::duplicate(4)] {
            let r = compute_torsion(&quads, &sim_box, &x, 1.0, strategy);
            ensure!(close(r.energy, reference.energy, 1e-12, 1e-12), "system {s} {strategy:?}: energy {} vs {}", r.energy, reference.energy);
            let d = max_diff(&r.forces, &reference.forces);
            ensure!(d <= 1e-10, "system {s} {strategy:?}: forces differ by {d:e}");
            worst_par = worst_par.max(d);
        }
        if s % 4 == 0 {
            let e = torsion_fd_error(&quads, &sim_box, &x, 1.0, 40);
            ensure!(e <= 1e-6, "system {s}: finite differences off by {e:e} relative");
            worst_fd = worst_fd.max(e);
        }
    }
    ensure!(total_quads > 0, "no quads generated");
    let (inv_e, inv_set) = torsion_invariance()?;
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 30.0, "took {secs:.1} s");
    Ok(format!(
        "{total_quads} quads in 20 systems, parallel vs serial {worst_par:.1e}, fd {worst_fd:.1e}, invariance {inv_e:.1e} ({inv_set} quads), max surviving fraction {metric:.3}, {secs:.1} s"
    ))
}

/// Energy change under rigid translation and rotation of a bonded cluster,
/// plus a check that the quad set itself is unchanged.
pub fn torsion_invariance() -> Result<(f64, usize), String> {
    let params = bond_params();
    let (sim_box, atoms) = cluster(80, 2.8, 0.9, 77);
    let energy_and_set = |atoms: &[AtomRecord]| {
        let bonds = BondTable::from_atoms(&sim_box, atoms, &params).unwrap();
        let quads = enumerate_quads(&bonds, BO_THRESHOLD);
        (compute_torsion(&quads, &sim_box, &positions(atoms), 1.0, Strategy::Serial).energy, quad_set(&quads))
    };
    let (e0, set0) = energy_and_set(&atoms);
    ensure!(!set0.is_empty(), "cluster has no quads");
    let mut worst = 0.0f64;
    let shifted: Vec<AtomRecord> = atoms.iter().map(|a| AtomRecord { position: [a.position[0] + 1.3, a.position[1] - 0.7, a.position[2] + 2.1], ..*a }).collect();
    let mut variants = vec![shifted];
    for seed in 0..3 {
        variants.push(rotate_about(&atoms, &rotation(seed), [12.0; 3]));
    }
    for v in &variants {
        let (e, set) = energy_and_set(v);
        ensure!(set == set0, "quad set changed under a rigid motion");
        ensure!((e - e0).abs() <= 1e-10, "energy {e} vs {e0}");
        worst = worst.max((e - e0).abs());
    }
    Ok((worst, set0.len()))
}

// 6. SNAP

pub fn snap() -> Outcome {
    let t = Instant::now();
    let mut fd = Vec::new();
    for (jmax, n, radius, seed) in [(1.0, 50, 2.6, 21), (2.0, 40, 2.4, 22), (4.0, 24, 2.0, 23)] {
        let (sim_box, atoms) = cluster(n, radius, 0.75, seed);
        let snap = snap_for(jmax, 2.0, seed + 10, SnapKnobs::default());
        let e = snap_fd_error(&snap, sim_box, &atoms, &(0..n).collect::<Vec<_>>());
        ensure!(e <= 1e-6, "jmax {jmax}: finite differences off by {e:e} relative");
        fd.push(e);
    }

    let (sim_box, atoms) = cluster(30, 2.2, 0.75, 41);
    let snap = snap_for(2.0, 2.0, 42, SnapKnobs::default());
    let base = snap_eval(&snap, sim_box, &atoms, 1);
    let mut worst_rot = 0.0f64;
    for seed in 0..3 {
        let e = snap_eval(&snap, sim_box, &rotate_about(&atoms, &rotation(seed), [12.0; 3]), 1);
        worst_rot = worst_rot.max((e.energy - base.energy).abs());
        for (x, y) in base.descriptors.iter().flatten().zip(e.descriptors.iter().flatten()) {
            worst_rot = worst_rot.max((x - y).abs());
        }
    }
    ensure!(worst_rot <= 1e-8, "rotation changes E or B by {worst_rot:e}");

    let (gas_box, gas) = random_gas(40, 0.5, 0.8, 9).unwrap();
    let mut worst_net = 0.0f64;
    for ranks in [1, 2, 4] {
        let e = snap_eval(&snap_for(2.0, 1.8, 35, SnapKnobs::default()), gas_box, &gas, ranks);
        worst_net = net(&e.forces).iter().fold(worst_net, |m, x| m.max(x.abs()));
    }
    ensure!(worst_net <= 1e-10, "net force {worst_net:e}");

    let mut worst_fused = 0.0f64;
    for jmax in [1.0, 2.0, 4.0] {
        let a = snap_eval(&snap_for(jmax, 1.8, 62, SnapKnobs::default()), gas_box, &gas, 1);
        let b = snap_eval(&snap_for(jmax, 1.8, 62, SnapKnobs { fused: false, ..SnapKnobs::default() }), gas_box, &gas, 1);
        let d = max_diff(&a.forces, &b.forces) / max_abs(&a.forces).max(1.0);
        ensure!(d <= 1e-12, "jmax {jmax}: fused and unfused forces differ by {d:e}");
        worst_fused = worst_fused.max(d);
    }

    let reference = snap_eval(&snap_for(2.0, 1.8, 72, SnapKnobs::default()), gas_box, &gas, 1);
    let scale = max_abs(&reference.forces).max(1.0);
    let mut worst_knob = 0.0f64;
    let mut combos = 0;
    for batch_u in [1, 2, 4] {
        for batch_y in [1, 2, 8] {
            for tile_v in [4, 16, 32] {
                for space in [Space::Host, Space::Device] {
                    let knobs = SnapKnobs { batch_u, batch_y, tile_v, space, fused: true };
                    let e = snap_eval(&snap_for(2.0, 1.8, 72, knobs), gas_box, &gas, 1);
                    let mut d = (e.energy - reference.energy).abs() / reference.energy.abs().max(1.0);
                    d = d.max(max_diff(&e.forces, &reference.forces) / scale);
                    for (x, y) in e.descriptors.iter().flatten().zip(reference.descriptors.iter().flatten()) {
                        d = d.max((x - y).abs() / y.abs().max(1.0));
                    }
                    ensure!(d <= 1e-12, "{knobs:?} changes results by {d:e}");
                    worst_knob = worst_knob.max(d);
                    combos += 1;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    ensure!(secs < 120.0, "took {secs:.1} s");
    Ok(format!(
        "fd (jmax 1/2/4) {:.1e}/{:.1e}/{:.1e}, rotation {worst_rot:.1e}, net force {worst_net:.1e}, fused {worst_fused:.1e}, {combos} knob settings {worst_knob:.1e}, {secs:.1} s",
        fd[0], fd[1], fd[2]
    ))
}

// 7. dual-space protocol

pub fn random_layout(rank: usize, rng: &mut ChaCha8Rng) -> LayoutPolicy {
    let mut order: Vec<usize> = (0..rank).collect();
    order.shuffle(rng);
    LayoutPolicy::new(order).unwrap()
}

pub fn random_dual_case(rng: &mut ChaCha8Rng) -> (Vec<usize>, LayoutPolicy, LayoutPolicy, Vec<DualOp>) {
    let rank = rng.gen_range(1..=3);
    let shape: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..=5)).collect();
    let host = random_layout(rank, rng);
    let device = random_layout(rank, rng);
    let n_ops = rng.gen_range(1..=40);
    let ops = (0..n_ops)
        .map(|_| {
            let s = if rng.gen_bool(0.5) { Space::Host } else { Space::Device };
            let k = rng.gen_range(0..1000);
            let v = if rng.gen_bool(0.9) { rng.gen_range(-1e6..1e6f64).to_bits() } else { rng.gen() };
            match rng.gen_range(0..6) {
                0 => DualOp::Set(s, k, v),
                1 => DualOp::ViewWrite(s, k, v),
                2 => DualOp::Modify(s),
                3 => DualOp::Sync(s),
                4 => DualOp::Read(s, k),
                _ => DualOp::ReadAll(s),
            }
        })
        .collect();
    (shape, host, device, ops)
}

pub fn dual_space_protocol() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ops_total = 0;
    for case in 0..10_000 {
        let (shape, host, device, ops) = random_dual_case(&mut rng);
        ops_total += ops.len();
        replay_dual(&shape, host, device, &ops).map_err(|e| format!("sequence {case} (shape {shape:?}): {e}"))?;
    }
    Ok(format!("10000 sequences, {ops_total} operations, {:.1} s", t.elapsed().as_secs_f64()))
}

// 8. saturation curves

pub const SATURATION_SIZES: [usize; 4] = [1_000, 10_000, 100_000, 1_000_000];

pub fn format_rows(rows: &[BenchRow]) -> String {
    rows.iter().map(|r| format!("{}:{:.3e}", r.n_atoms, r.atom_steps_per_second)).collect::<Vec<_>>().join(" ")
}

pub fn saturation() -> Outcome {
    let t = Instant::now();
    let registry = StyleRegistry::with_builtin();
    let lj_opts = BenchOptions { steps: 20, ..BenchOptions::default() };
    let snap_opts = BenchOptions { steps: 10, ..BenchOptions::default() };
    let lj = bench_saturation(&registry, "lj/cut", &SATURATION_SIZES, 2, &lj_opts).map_err(|e| e.to_string())?;
    let snap = bench_saturation(&registry, "snap", &SATURATION_SIZES, 1, &snap_opts).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let detail = format!("lj [{}] snap [{}]", format_rows(&lj), format_rows(&snap));
    ensure!(rises_to_plateau(&lj, 0.10), "lj curve drops below the 10% band: {detail}");
    ensure!(rises_to_plateau(&snap, 0.10), "snap curve drops below the 10% band: {detail}");
    let n_lj = saturation_size(&lj, 0.9).unwrap();
    let n_snap = saturation_size(&snap, 0.9).unwrap();
    ensure!(n_snap < n_lj, "snap reaches 90% at N={n_snap}, lj at N={n_lj}: {detail}");
    ensure!(secs < 600.0, "took {secs:.0} s");
    Ok(format!("90% of plateau at N={n_snap} (snap) < N={n_lj} (lj); {detail}; {secs:.0} s"))
}

// 9. parser and registry

fn dummy(_: &mdkk::driver::StyleInput) -> mdkk::Result<Box<dyn ForceField>> {
    Err(Error::InvalidParameter("dummy".into()))
}

/// Expected resolution of `requested` given what is registered.
///
/// A bare name prefers its suffixed variant, then itself. An explicitly
/// suffixed name resolves only to itself.
pub fn expected_resolution(base: &str, explicit: bool, suffix: Option<&str>, has_base: bool, has_variant: bool) -> Option<String> {
    let variant = format!("{base}/opt");
    if explicit {
        return has_variant.then_some(variant);
    }
    if suffix == Some("opt") && has_variant {
        return Some(variant);
    }
    has_base.then(|| base.to_string())
}

pub fn suffix_truth_table() -> Result<usize, String> {
    let mut rows = 0;
    for base in ["lj/cut", "eam"] {
        for has_base in [false, true] {
            for has_variant in [false, true] {
                for suffix in [None, Some("opt"), Some("kk")] {
                    for explicit in [false, true] {
                        let mut r = StyleRegistry::empty();
                        if has_base {
                            r.register(base, dummy);
                        }
                        if has_variant {
                            r.register(&format!("{base}/opt"), dummy);
                        }
                        r.register("unrelated", dummy);
                        r.global_suffix = suffix.map(str::to_string);
                        let name = if explicit { format!("{base}/opt") } else { base.to_string() };
                        let want = expected_resolution(base, explicit, suffix, has_base, has_variant);
                        let got = r.resolve_name(&name);
                        match (&got, &want) {
                            (Ok(g), Some(w)) if g == w => {}
                            (Err(Error::UnknownStyle { name: n, .. }), None) if *n == name => {}
                            _ => {
                                return Err(format!(
                                    "{name} (suffix {suffix:?}, base {has_base}, variant {has_variant}): got {got:?}, want {want:?}"
                                ))
                            }
                        }
                        rows += 1;
                    }
                }
            }
        }
    }
    let builtin = StyleRegistry::with_builtin();
    ensure!(builtin.resolve_name("lj/cut").unwrap() != builtin.resolve_name("lj/cut/opt").unwrap(), "lj/cut and lj/cut/opt collapse");
    Ok(rows)
}

pub fn script_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scripts")
}

pub fn bundled_scripts() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(script_dir()).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "in")).collect();
    v.sort();
    v
}

fn parse_error_line(text: &str) -> Option<(usize, String)> {
    match parse_script(text) {
        Err(Error::Parse { line, message }) => Some((line, message)),
        _ => None,
    }
}

/// Malformed scripts and what their errors must mention.
pub fn parser_error_cases() -> Result<usize, String> {
    let cases: &[(&str, usize, &str)] = &[
        ("pear_style lj/cut 2.5", 1, "pair_style"),
        ("units lj\n\nrun", 3, "run takes 1"),
        ("timestep 0.005 0.01", 1, "timestep takes 1"),
        ("timestep fast", 1, "must be a number"),
        ("create_box 4 four 4", 1, "must be a number"),
        ("mass 1", 1, "mass takes 2"),
        ("boundary p p", 1, "boundary takes 3"),
        ("units lj\nvelocity all create &\n  1.0", 2, "velocity takes 4"),
        ("frobnicate", 1, "unknown command 'frobnicate'"),
    ];
    for (text, line, needle) in cases {
        let (l, msg) = parse_error_line(text).ok_or_else(|| format!("{text:?} parsed"))?;
        ensure!(l == *line && msg.contains(needle), "{text:?}: line {l} '{msg}', want line {line} containing '{needle}'");
    }
    ensure!(parse_script("").map_err(|e| e.to_string())?.is_empty(), "empty script has commands");
    ensure!(parse_script("# only a comment\n\n   \n").map_err(|e| e.to_string())?.is_empty(), "comment-only script has commands");

    let runtime: &[(&str, &str)] = &[
        ("pair_style eam", "eam"),
        ("run 10", "create_box"),
        ("units lj\nlattice fcc 0.8442\ncreate_box 3 3 3\ncreate_atoms 1\nmass 1 1.0\npair_style lj/cut 2.5\npair_coeff * * 1.0\nrun 1", "pair_coeff"),
    ];
    for (text, needle) in runtime {
        let mut s = Session::new(Vec::new(), script_dir());
        match s.execute_str(text) {
            Err(e) => ensure!(e.to_string().contains(needle), "{text:?}: '{e}' does not mention '{needle}'"),
            Ok(()) => return Err(format!("{text:?} ran without error")),
        }
    }
    Ok(cases.len() + runtime.len() + 2)
}

pub fn round_trip() -> Result<usize, String> {
    let scripts = bundled_scripts();
    ensure!(!scripts.is_empty(), "no bundled scripts");
    for p in &scripts {
        let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
        let a = parse_script(&text).map_err(|e| format!("{}: {e}", p.display()))?;
        let out = serialize_script(&a);
        let b = parse_script(&out).map_err(|e| format!("{}: reparse: {e}", p.display()))?;
        ensure!(a.tokens() == b.tokens(), "{}: token streams differ", p.display());
        ensure!(serialize_script(&b) == out, "{}: serialization not stable", p.display());
    }
    Ok(scripts.len())
}

pub fn parser_registry() -> Outcome {
    let rows = suffix_truth_table()?;
    let errors = parser_error_cases()?;
    let scripts = round_trip()?;
    Ok(format!("{rows} truth-table rows, {errors} error cases, {scripts} scripts round-tripped"))
}
