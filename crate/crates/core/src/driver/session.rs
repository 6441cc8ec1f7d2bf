//! Script execution state.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bench::{bench_saturation, write_csv, BenchOptions};
use super::registry::{StyleInput, StyleRegistry};
use super::script::{parse_script, Command, Script};
use crate::domain::geometry::norm2;
use crate::domain::{minimum_image, AtomRecord, Decomposition, SimBox};
use crate::error::{Error, Result};
use crate::lattice::{assign_velocities, fcc_atoms, fcc_constant};
use crate::md::{MdConfig, System, Thermo};
use crate::memspace::{Space, Strategy};
use crate::neighbor::{ListSettings, ListStyle, NeighborList};
use crate::pair::ExecMode;
use crate::qeq::{QeqParams, QeqSolution, QeqSpecies, QeqSystem};
use crate::snap::SnapKnobs;
use crate::torsion::{divergence_metric, enumerate_quads, BondTable, TorsionParams, TorsionTerm};

#[derive(Clone, Debug)]
struct PairSetup {
    style: String,
    args: Vec<String>,
    coeffs: Vec<Vec<String>>,
}

pub struct Session<W: Write> {
    pub registry: StyleRegistry,
    out: W,
    base_dir: PathBuf,
    periodic: [bool; 3],
    lattice_density: Option<f64>,
    cells: [usize; 3],
    sim_box: Option<SimBox>,
    atoms: Vec<AtomRecord>,
    masses: Vec<Option<f64>>,
    pair: Option<PairSetup>,
    shift: bool,
    qeq: Option<QeqParams>,
    torsion: Option<TorsionParams>,
    dt: f64,
    thermo_every: u64,
    md: MdConfig,
    knobs: SnapKnobs,
    system: Option<System>,
    /// Every thermo row produced so far.
    pub log: Vec<Thermo>,
    /// Charges from the most recent QEq solve, in id order.
    pub charges: Vec<f64>,
}

impl<W: Write> Session<W> {
    pub fn new(out: W, base_dir: impl Into<PathBuf>) -> Self {
        Session {
            registry: StyleRegistry::with_builtin(),
            out,
            base_dir: base_dir.into(),
            periodic: [true; 3],
            lattice_density: None,
            cells: [0; 3],
            sim_box: None,
            atoms: Vec::new(),
            masses: Vec::new(),
            pair: None,
            shift: false,
            qeq: None,
            torsion: None,
            dt: 0.005,
            thermo_every: 0,
            md: MdConfig::default(),
            knobs: SnapKnobs::default(),
            system: None,
            log: Vec::new(),
            charges: Vec::new(),
        }
    }

    pub fn run_file(out: W, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Script(format!("cannot read {}: {e}", path.display())))?;
        let script = parse_script(&text)?;
        let mut s = Session::new(out, path.parent().unwrap_or(Path::new(".")));
        s.execute(&script)?;
        Ok(s)
    }

    pub fn execute(&mut self, script: &Script) -> Result<()> {
        script.commands.iter().try_for_each(|c| self.execute_command(c))
    }

    pub fn execute_str(&mut self, text: &str) -> Result<()> {
        self.execute(&parse_script(text)?)
    }

    pub fn into_output(self) -> W {
        self.out
    }

    pub fn md_config(&self) -> &MdConfig {
        &self.md
    }

    pub fn timestep(&self) -> f64 {
        self.dt
    }

    pub fn sim_box(&self) -> Option<&SimBox> {
        self.sim_box.as_ref()
    }

    pub fn system_mut(&mut self) -> Option<&mut System> {
        self.system.as_mut()
    }

    /// Current atoms in id order.
    pub fn atoms(&mut self) -> Vec<AtomRecord> {
        match self.system.as_mut() {
            Some(s) => s.atoms(),
            None => self.atoms.clone(),
        }
    }

    /// Resolved style name of the current pair style.
    pub fn pair_style(&self) -> Option<&str> {
        self.pair.as_ref().map(|p| p.style.as_str())
    }

    pub fn execute_command(&mut self, cmd: &Command) -> Result<()> {
        self.dispatch(cmd).map_err(|e| match e {
            e @ Error::Parse { .. } => e,
            other => Error::Script(format!("line {} ({}): {other}", cmd.line, cmd.name)),
        })
    }

    /// Takes the atoms back out of a live system so settings can change.
    fn detach(&mut self) {
        if let Some(mut s) = self.system.take() {
            self.atoms = s.atoms();
        }
    }

    fn dispatch(&mut self, cmd: &Command) -> Result<()> {
        let a = |k: usize| cmd.args[k].as_str();
        match cmd.name.as_str() {
            "units" => {
                if a(0) != "lj" {
                    return Err(cmd.error(format!("only lj units are supported, got '{}'", a(0))));
                }
            }
            "boundary" => {
                self.detach();
                for k in 0..3 {
                    self.periodic[k] = match a(k) {
                        "p" => true,
                        "f" => false,
                        other => return Err(cmd.error(format!("boundary must be p or f, got '{other}'"))),
                    };
                }
                if let Some(b) = self.sim_box {
                    self.sim_box = Some(SimBox::new(b.lengths(), self.periodic)?);
                }
            }
            "lattice" => {
                if a(0) != "fcc" {
                    return Err(cmd.error(format!("only fcc lattices are supported, got '{}'", a(0))));
                }
                let d = cmd.num(1)?;
                if !(d > 0.0) {
                    return Err(cmd.error("density must be positive"));
                }
                self.lattice_density = Some(d);
            }
            "create_box" => {
                let d = self.lattice_density.ok_or_else(|| cmd.error("lattice must be defined first"))?;
                let cells = [cmd.uint(0)? as usize, cmd.uint(1)? as usize, cmd.uint(2)? as usize];
                if cells.contains(&0) {
                    return Err(cmd.error("cell counts must be positive"));
                }
                let n_species = if cmd.args.len() > 3 { cmd.uint(3)? as usize } else { 1 };
                if n_species == 0 {
                    return Err(cmd.error("need at least one species"));
                }
                let a0 = fcc_constant(d);
                self.system = None;
                self.sim_box = Some(SimBox::new([a0 * cells[0] as f64, a0 * cells[1] as f64, a0 * cells[2] as f64], self.periodic)?);
                self.cells = cells;
                self.atoms.clear();
                self.masses = vec![None; n_species];
            }
            "create_atoms" => self.create_atoms(cmd)?,
            "mass" => {
                self.detach();
                let t = self.species_arg(cmd, 0)?;
                let m = cmd.num(1)?;
                if !(m > 0.0) {
                    return Err(cmd.error("mass must be positive"));
                }
                self.masses[t] = Some(m);
            }
            "velocity" => {
                if a(0) != "all" || a(1) != "create" {
                    return Err(cmd.error("expected 'velocity all create <T> <seed>'"));
                }
                self.detach();
                let masses = self.masses_checked()?;
                let t = cmd.num(2)?;
                if !(t >= 0.0) {
                    return Err(cmd.error("temperature must be non-negative"));
                }
                assign_velocities(&mut self.atoms, &masses, t, cmd.uint(3)?);
            }
            "pair_style" => {
                self.detach();
                let resolved = self.registry.resolve_name(a(0))?;
                self.pair = Some(PairSetup { style: resolved, args: cmd.args[1..].to_vec(), coeffs: Vec::new() });
            }
            "pair_coeff" => {
                self.detach();
                let p = self.pair.as_mut().ok_or_else(|| cmd.error("pair_style must come first"))?;
                p.coeffs.push(cmd.args.clone());
            }
            "pair_modify" => {
                if a(0) != "shift" {
                    return Err(cmd.error(format!("unknown keyword '{}'", a(0))));
                }
                self.detach();
                self.shift = yes_no(cmd, a(1))?;
            }
            "neighbor" => {
                let skin = cmd.num(0)?;
                if !(skin >= 0.0) {
                    return Err(cmd.error("skin must be non-negative"));
                }
                if cmd.args.len() > 1 && a(1) != "bin" {
                    return Err(cmd.error(format!("only bin neighbor lists exist, got '{}'", a(1))));
                }
                self.detach();
                self.md.skin = skin;
            }
            "package" => self.package(cmd)?,
            "qeq" => self.qeq_command(cmd)?,
            "torsion" => self.torsion_command(cmd)?,
            "suffix" => {
                self.registry.global_suffix = if a(0) == "off" { None } else { Some(a(0).to_string()) };
            }
            "timestep" => {
                let dt = cmd.num(0)?;
                if !(dt > 0.0) {
                    return Err(cmd.error("timestep must be positive"));
                }
                self.dt = dt;
            }
            "thermo" => self.thermo_every = cmd.uint(0)?,
            "run" => self.run(cmd.uint(0)?)?,
            "bench" => self.bench(cmd)?,
            other => return Err(cmd.error(format!("no handler for '{other}'"))),
        }
        Ok(())
    }

    fn species_arg(&self, cmd: &Command, k: usize) -> Result<usize> {
        let t = cmd.uint(k)? as usize;
        if t == 0 || t > self.masses.len() {
            return Err(cmd.error(format!("species {t} outside 1..={} (create_box first)", self.masses.len())));
        }
        Ok(t - 1)
    }

    fn masses_checked(&self) -> Result<Vec<f64>> {
        self.masses
            .iter()
            .enumerate()
            .map(|(k, m)| m.ok_or_else(|| Error::InvalidParameter(format!("mass of species {} not set", k + 1))))
            .collect()
    }

    fn create_atoms(&mut self, cmd: &Command) -> Result<()> {
        let sim_box = self.sim_box.ok_or_else(|| cmd.error("create_box must come first"))?;
        self.detach();
        let species = self.species_arg(cmd, 0)? as u32;
        let next_id = self.atoms.iter().map(|a| a.id + 1).max().unwrap_or(0);
        match cmd.args.get(1).map(String::as_str) {
            None => {
                let d = self.lattice_density.ok_or_else(|| cmd.error("lattice must be defined first"))?;
                self.atoms.extend(fcc_atoms(d, self.cells, species, next_id));
            }
            Some("random") => {
                if cmd.args.len() < 4 {
                    return Err(cmd.error("expected 'create_atoms <type> random <n> <seed> [min_distance]'"));
                }
                let n = cmd.uint(2)? as usize;
                let seed = cmd.uint(3)?;
                let dmin = if cmd.args.len() > 4 { cmd.num(4)? } else { 0.8 };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let l = sim_box.lengths();
                let mut attempts = 0usize;
                let target = self.atoms.len() + n;
                while self.atoms.len() < target {
                    attempts += 1;
                    if attempts > 1000 * n + 1000 {
                        return Err(cmd.error(format!("could not place {n} atoms at minimum distance {dmin}")));
                    }
                    let x = [rng.gen::<f64>() * l[0], rng.gen::<f64>() * l[1], rng.gen::<f64>() * l[2]];
                    let clear = self.atoms.iter().all(|y| {
                        let d = [x[0] - y.position[0], x[1] - y.position[1], x[2] - y.position[2]];
                        norm2(minimum_image(d, &sim_box)) >= dmin * dmin
                    });
                    if clear {
                        let id = next_id + (self.atoms.len() + n - target) as u64;
                        self.atoms.push(AtomRecord { id, species, position: x, velocity: [0.0; 3] });
                    }
                }
            }
            Some(other) => return Err(cmd.error(format!("unknown create_atoms mode '{other}'"))),
        }
        Ok(())
    }

    fn package(&mut self, cmd: &Command) -> Result<()> {
        if cmd.args.len() % 2 != 0 {
            return Err(cmd.error("expected keyword/value pairs"));
        }
        self.detach();
        for kv in cmd.args.chunks(2) {
            let (k, v) = (kv[0].as_str(), kv[1].as_str());
            let pos = |v: &str| -> Result<usize> {
                match v.parse::<usize>() {
                    Ok(n) if n > 0 => Ok(n),
                    _ => Err(cmd.error(format!("{k} needs a positive integer, got '{v}'"))),
                }
            };
            match k {
                "neigh" => {
                    self.md.style = match v {
                        "full" => ListStyle::Full,
                        "half" => ListStyle::Half,
                        _ => return Err(cmd.error(format!("neigh must be full or half, got '{v}'"))),
                    }
                }
                "newton" => self.md.newton = on_off(cmd, v)?,
                "mode" => {
                    self.md.pair.mode = match v {
                        "atom" => ExecMode::AtomParallel,
                        "neighbor" => ExecMode::NeighborParallel,
                        _ => return Err(cmd.error(format!("mode must be atom or neighbor, got '{v}'"))),
                    }
                }
                "strategy" => {
                    let s = match v.split_once('/') {
                        None if v == "serial" => Strategy::Serial,
                        None if v == "atomic" => Strategy::Atomic,
                        None if v == "duplicate" => Strategy::duplicate(rayon::current_num_threads()),
                        Some(("duplicate", n)) => Strategy::duplicate(pos(n)?),
                        _ => return Err(cmd.error(format!("strategy must be serial, duplicate[/N] or atomic, got '{v}'"))),
                    };
                    self.md.pair.strategy = s;
                }
                "ranks" => self.md.n_ranks = pos(v)?,
                "layout" => {
                    let space = match v {
                        "host" => Space::Host,
                        "device" => Space::Device,
                        _ => return Err(cmd.error(format!("layout must be host or device, got '{v}'"))),
                    };
                    self.md.pair.space = space;
                    self.knobs.space = space;
                }
                "batch_u" => self.knobs.batch_u = pos(v)?,
                "batch_y" => self.knobs.batch_y = pos(v)?,
                "tile_v" => self.knobs.tile_v = pos(v)?,
                "fused" => self.knobs.fused = yes_no(cmd, v)?,
                _ => return Err(cmd.error(format!("unknown package keyword '{k}'"))),
            }
        }
        Ok(())
    }

    fn qeq_command(&mut self, cmd: &Command) -> Result<()> {
        self.detach();
        match cmd.args[0].as_str() {
            "off" => self.qeq = None,
            "on" => {
                let rest = cmd.args.len() - 1;
                if rest < 6 || (rest - 3) % 3 != 0 {
                    return Err(cmd.error("expected 'qeq on <cutoff> <tol> <max_iter> <chi> <eta> <gamma> [<chi> <eta> <gamma> ...]'"));
                }
                let species = (4..cmd.args.len())
                    .step_by(3)
                    .map(|k| Ok(QeqSpecies { chi: cmd.num(k)?, eta: cmd.num(k + 1)?, gamma: cmd.num(k + 2)? }))
                    .collect::<Result<Vec<_>>>()?;
                let mut p = QeqParams::new(species, cmd.num(1)?);
                p.tol = cmd.num(2)?;
                p.max_iter = cmd.uint(3)? as usize;
                if !(p.cutoff > 0.0 && p.tol > 0.0) {
                    return Err(cmd.error("cutoff and tolerance must be positive"));
                }
                self.qeq = Some(p);
            }
            other => return Err(cmd.error(format!("expected on or off, got '{other}'"))),
        }
        Ok(())
    }

    fn torsion_command(&mut self, cmd: &Command) -> Result<()> {
        self.detach();
        match cmd.args[0].as_str() {
            "off" => self.torsion = None,
            "on" => {
                if (cmd.args.len() - 1) % 2 != 0 {
                    return Err(cmd.error("expected keyword/value pairs after 'on'"));
                }
                let mut p = TorsionParams::default();
                for k in (1..cmd.args.len()).step_by(2) {
                    let v = cmd.num(k + 1)?;
                    match cmd.args[k].as_str() {
                        "k_t" => p.k_t = v,
                        "k_b" => p.k_b = v,
                        "r_bond" => p.bond.r_bond = v,
                        "r0" => p.bond.r0 = v,
                        "p" => p.bond.p = v,
                        "bo_min" => p.bond.bo_min = v,
                        "threshold" => p.bo_threshold = v,
                        other => return Err(cmd.error(format!("unknown torsion keyword '{other}'"))),
                    }
                }
                self.torsion = Some(p);
            }
            other => return Err(cmd.error(format!("expected on or off, got '{other}'"))),
        }
        Ok(())
    }

    fn build_system(&mut self) -> Result<()> {
        if self.system.is_some() {
            return Ok(());
        }
        let sim_box = self.sim_box.ok_or_else(|| Error::InvalidParameter("no simulation box; use create_box".into()))?;
        if self.atoms.is_empty() {
            return Err(Error::InvalidParameter("no atoms; use create_atoms".into()));
        }
        let pair = self.pair.as_ref().ok_or_else(|| Error::InvalidParameter("no pair_style defined".into()))?;
        let input = StyleInput {
            args: pair.args.clone(),
            coeffs: pair.coeffs.clone(),
            n_species: self.masses.len(),
            shift: self.shift,
            knobs: self.knobs,
            base_dir: self.base_dir.clone(),
        };
        let field = self.registry.create(&pair.style, &input)?;
        let mut sys = System::new(sim_box, &self.atoms, self.masses_checked()?, field, self.md)?;
        if let Some(p) = self.torsion {
            sys.add_extra(Box::new(TorsionTerm::new(p, self.md.pair.strategy)))?;
        }
        self.system = Some(sys);
        Ok(())
    }

    fn run(&mut self, n_steps: u64) -> Result<()> {
        self.build_system()?;
        self.report_setup()?;
        let (dt, every) = (self.dt, self.thermo_every);
        let sys = self.system.as_mut().expect("built");
        let rows = sys.run(n_steps, dt, every)?;
        writeln!(self.out, "{:>10} {:>18} {:>18} {:>18} {:>12}", "Step", "PotEng", "KinEng", "TotEng", "Temp")?;
        for t in &rows {
            writeln!(self.out, "{}", format_thermo(t))?;
        }
        let rebuilds = sys.rebuilds();
        writeln!(self.out, "Run of {n_steps} steps done, {rebuilds} neighbor rebuilds total")?;
        self.log.extend(rows);
        if self.qeq.is_some() {
            self.report_qeq()?;
        }
        Ok(())
    }

    fn report_setup(&mut self) -> Result<()> {
        let sys = self.system.as_mut().expect("built");
        let n = sys.n_atoms();
        let name = sys.field().name().to_string();
        let ranks = sys.config().n_ranks;
        writeln!(self.out, "Pair style {name}, {n} atoms, {ranks} rank(s)")?;
        if let Some(p) = self.torsion {
            let sim_box = self.sim_box.expect("box");
            let atoms = self.system.as_mut().expect("built").atoms();
            let bonds = BondTable::from_atoms(&sim_box, &atoms, &p.bond)?;
            let quads = enumerate_quads(&bonds, p.bo_threshold);
            writeln!(
                self.out,
                "Torsion: {} bonds, {} quads kept of {} candidates ({:.2}%)",
                bonds.total_bonds() / 2,
                quads.total,
                bonds.candidate_quads(),
                100.0 * divergence_metric(&bonds, &quads)
            )?;
        }
        Ok(())
    }

    fn report_qeq(&mut self) -> Result<()> {
        let params = self.qeq.clone().expect("qeq on");
        let sim_box = self.sim_box.expect("box");
        let atoms = self.atoms();
        let sol = solve_qeq(&sim_box, &atoms, &params)?;
        let total: f64 = sol.charges.iter().sum();
        let (lo, hi) = sol.charges.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &q| (l.min(q), h.max(q)));
        writeln!(
            self.out,
            "QEq: {}/{} CG iterations, total charge {total:.3e}, charges in [{lo:.6}, {hi:.6}]",
            sol.s.iterations, sol.t.iterations
        )?;
        self.charges = sol.charges;
        Ok(())
    }

    fn bench(&mut self, cmd: &Command) -> Result<()> {
        let potential = cmd.args[0].clone();
        let mut sizes = vec![1000, 4000, 16000];
        let mut reps = 3;
        let mut out_file = None;
        if (cmd.args.len() - 1) % 2 != 0 {
            return Err(cmd.error("expected keyword/value pairs after the potential"));
        }
        for kv in cmd.args[1..].chunks(2) {
            match kv[0].as_str() {
                "sizes" => sizes = parse_sizes(&kv[1]).map_err(|e| cmd.error(e.to_string()))?,
                "reps" => reps = kv[1].parse().map_err(|_| cmd.error(format!("bad reps '{}'", kv[1])))?,
                "out" => out_file = Some(self.base_dir.join(&kv[1])),
                other => return Err(cmd.error(format!("unknown bench keyword '{other}'"))),
            }
        }
        let opts = BenchOptions { md: self.md, knobs: self.knobs, dt: self.dt, ..BenchOptions::default() };
        let rows = bench_saturation(&self.registry, &potential, &sizes, reps, &opts)?;
        write_csv(&rows, &mut self.out)?;
        if let Some(path) = out_file {
            write_csv(&rows, std::fs::File::create(&path)?)?;
        }
        Ok(())
    }
}

/// `a,b,c` into ascending positive sizes.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    let sizes = s
        .split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::InvalidParameter(format!("bad size '{t}'"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no sizes given".into()));
    }
    Ok(sizes)
}

pub fn format_thermo(t: &Thermo) -> String {
    format!("{:>10} {:>18.10} {:>18.10} {:>18.10} {:>12.6}", t.step, t.pe, t.ke, t.etotal, t.temperature)
}

/// Charges of `atoms` (id order) on one rank.
pub fn solve_qeq(sim_box: &SimBox, atoms: &[AtomRecord], params: &QeqParams) -> Result<QeqSolution> {
    let mut d = Decomposition::new(*sim_box, 1, atoms, params.cutoff)?;
    let store = &mut d.stores_mut()[0];
    let list = NeighborList::build(store, sim_box, ListSettings::new(params.cutoff, 0.0, ListStyle::Full, true))?;
    let mut sys = QeqSystem::from_store(store, &list, params)?;
    let mut sol = sys.solve()?;
    // Reorder from store order to id order.
    let ids = &store.global_ids[..store.n_local()];
    let mut q = vec![0.0; ids.len()];
    let index: std::collections::HashMap<u64, usize> = atoms.iter().enumerate().map(|(k, a)| (a.id, k)).collect();
    for (row, id) in ids.iter().enumerate() {
        q[index[id]] = sol.charges[row];
    }
    sol.charges = q;
    Ok(sol)
}

fn yes_no(cmd: &Command, v: &str) -> Result<bool> {
    match v {
        "yes" => Ok(true),
        "no" => Ok(false),
        _ => Err(cmd.error(format!("expected yes or no, got '{v}'"))),
    }
}

fn on_off(cmd: &Command, v: &str) -> Result<bool> {
    match v {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(cmd.error(format!("expected on or off, got '{v}'"))),
    }
}
