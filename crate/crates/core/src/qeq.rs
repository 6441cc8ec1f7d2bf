//! Charge equilibration: over-allocated CSR assembly, sparse products and a
//! fused pair of conjugate-gradient solves.

use rayon::prelude::*;

use crate::domain::geometry::{norm2, sub};
use crate::domain::AtomStore;
use crate::error::{Error, Result};
use crate::neighbor::{ListStyle, NeighborList};

/// Block length of the fixed reduction tree used by [`dot`] and the scan.
pub const REDUCTION_BLOCK: usize = 4096;

/// Exclusive prefix sum of row capacities in 64-bit arithmetic.
///
/// The result has `capacities.len() + 1` entries; the last one is the total.
pub fn scan_offsets_64(capacities: &[u32]) -> Vec<u64> {
    let block_sums: Vec<u64> = capacities.par_chunks(REDUCTION_BLOCK).map(|c| c.iter().map(|&x| x as u64).sum()).collect();
    let mut starts = Vec::with_capacity(block_sums.len());
    let mut acc = 0u64;
    for s in &block_sums {
        starts.push(acc);
        acc += s;
    }
    let mut offsets = vec![0u64; capacities.len() + 1];
    offsets[..capacities.len()].par_chunks_mut(REDUCTION_BLOCK).zip(capacities.par_chunks(REDUCTION_BLOCK)).zip(starts).for_each(
        |((out, caps), start)| {
            let mut run = start;
            for (o, &c) in out.iter_mut().zip(caps) {
                *o = run;
                run += c as u64;
            }
        },
    );
    offsets[capacities.len()] = acc;
    offsets
}

/// Deterministic dot product: fixed blocks summed left to right.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> =
        a.par_chunks(REDUCTION_BLOCK).zip(b.par_chunks(REDUCTION_BLOCK)).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum()).collect();
    partial.iter().sum()
}

/// CSR matrix whose rows are sized to a capacity; only the first
/// `row_nnz[r]` slots of row `r` are meaningful.
#[derive(Clone, Debug, PartialEq)]
pub struct OverCsr {
    n_rows: usize,
    n_cols: usize,
    pub values: Vec<f64>,
    pub columns: Vec<u32>,
    pub row_offsets: Vec<u64>,
    pub row_nnz: Vec<u32>,
}

impl OverCsr {
    /// Empty matrix with the given per-row capacities.
    pub fn with_capacities(n_cols: usize, capacities: &[u32]) -> Self {
        let row_offsets = scan_offsets_64(capacities);
        let total = *row_offsets.last().unwrap() as usize;
        OverCsr {
            n_rows: capacities.len(),
            n_cols,
            values: vec![0.0; total],
            columns: vec![0; total],
            row_offsets,
            row_nnz: vec![0; capacities.len()],
        }
    }

    /// Builds from per-row `(column, value)` lists, reserving `slack` extra slots per row.
    pub fn from_rows(n_cols: usize, rows: &[Vec<(u32, f64)>], slack: u32) -> Result<Self> {
        let caps: Vec<u32> = rows.iter().map(|r| r.len() as u32 + slack).collect();
        let mut m = Self::with_capacities(n_cols, &caps);
        for (r, row) in rows.iter().enumerate() {
            let base = m.row_offsets[r] as usize;
            for (k, &(c, v)) in row.iter().enumerate() {
                if c as usize >= n_cols {
                    return Err(Error::IndexOutOfBounds { index: vec![r, c as usize], shape: vec![m.n_rows, n_cols] });
                }
                m.columns[base + k] = c;
                m.values[base + k] = v;
            }
            m.row_nnz[r] = row.len() as u32;
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn capacity(&self, r: usize) -> usize {
        (self.row_offsets[r + 1] - self.row_offsets[r]) as usize
    }

    /// Meaningful columns and values of row `r`.
    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let lo = self.row_offsets[r] as usize;
        let hi = lo + self.row_nnz[r] as usize;
        (&self.columns[lo..hi], &self.values[lo..hi])
    }

    pub fn nnz(&self) -> usize {
        self.row_nnz.iter().map(|&n| n as usize).sum()
    }

    /// Dense row-major reconstruction (duplicates summed).
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows * self.n_cols];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                d[r * self.n_cols + c as usize] += v;
            }
        }
        d
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch { expected: self.n_cols, got: x.len() });
        }
        Ok(())
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(r);
        let mut s = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            s += v * x[c as usize];
        }
        s
    }

    /// `y = H x`, parallel over rows.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok((0..self.n_rows).into_par_iter().map(|r| self.row_dot(r, x)).collect())
    }

    /// Two products sharing one pass over the matrix; each result is
    /// bit-identical to [`OverCsr::spmv`].
    pub fn spmv_fused(&self, x1: &[f64], x2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_len(x1)?;
        self.check_len(x2)?;
        Ok((0..self.n_rows)
            .into_par_iter()
            .map(|r| {
                let (cols, vals) = self.row(r);
                let (mut s1, mut s2) = (0.0, 0.0);
                for (&c, &v) in cols.iter().zip(vals) {
                    s1 += v * x1[c as usize];
                    s2 += v * x2[c as usize];
                }
                (s1, s2)
            })
            .unzip())
    }

    /// `y = H x` with each row split into `lanes` contiguous segments whose
    /// partial sums are combined afterwards.
    pub fn spmv_row_split(&self, x: &[f64], lanes: usize) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let lanes = lanes.max(1);
        Ok((0..self.n_rows)
            .into_par_iter()
            .map(|r| {
                let (cols, vals) = self.row(r);
                let seg = cols.len().div_ceil(lanes).max(1);
                let partial: Vec<f64> = cols
                    .par_chunks(seg)
                    .zip(vals.par_chunks(seg))
                    .map(|(c, v)| c.iter().zip(v).map(|(&c, &v)| v * x[c as usize]).sum::<f64>())
                    .collect();
                partial.iter().sum()
            })
            .collect())
    }

    /// Errors unless every diagonal strictly exceeds its row's absolute off-diagonal sum.
    pub fn check_diagonal_dominance(&self) -> Result<()> {
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let mut diagonal = 0.0;
            let mut off_diagonal = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if c as usize == r {
                    diagonal += v;
                } else {
                    off_diagonal += v.abs();
                }
            }
            if !(diagonal > off_diagonal) {
                return Err(Error::NotDiagonallyDominant { row: r, diagonal, off_diagonal });
            }
        }
        Ok(())
    }
}

/// Per-species QEq parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QeqSpecies {
    /// Electronegativity.
    pub chi: f64,
    /// Self-interaction (diagonal).
    pub eta: f64,
    /// Shielding parameter.
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QeqParams {
    pub species: Vec<QeqSpecies>,
    pub cutoff: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub net_charge: f64,
}

impl QeqParams {
    pub fn new(species: Vec<QeqSpecies>, cutoff: f64) -> Self {
        QeqParams { species, cutoff, tol: 1e-6, max_iter: 500, net_charge: 0.0 }
    }
}

/// Shielded Coulomb interaction `1 / (r³ + γ⁻³)^{1/3}`.
#[inline]
pub fn shielded_coulomb(r: f64, gamma: f64) -> f64 {
    1.0 / (r * r * r + gamma.powi(-3)).cbrt()
}

/// Assembles the QEq matrix from a full neighbor list of a single-rank store.
///
/// Row capacity is the list count plus the diagonal, so entries beyond the
/// QEq cutoff leave slack rather than overflowing.
pub fn build_matrix(store: &mut AtomStore, list: &NeighborList, params: &QeqParams) -> Result<OverCsr> {
    if list.style() != ListStyle::Full {
        return Err(Error::InvalidParameter("QEq matrix assembly needs a full neighbor list".into()));
    }
    if store.ghosts.iter().any(|g| g.owner_rank != store.rank) {
        return Err(Error::RequiresSingleRank("qeq"));
    }
    if let Some(&s) = store.species.iter().find(|&&s| s as usize >= params.species.len()) {
        return Err(Error::InvalidParameter(format!("no QEq parameters for species {s}")));
    }
    let n = store.n_local();
    let positions = store.positions_host();
    let caps: Vec<u32> = list.counts().iter().map(|&c| c + 1).collect();
    let mut m = OverCsr::with_capacities(n, &caps);
    let rc2 = params.cutoff * params.cutoff;
    let mut rows: Vec<(&mut [u32], &mut [f64], &mut u32)> = Vec::with_capacity(n);
    {
        let mut cols: &mut [u32] = &mut m.columns;
        let mut vals: &mut [f64] = &mut m.values;
        for (r, nnz) in m.row_nnz.iter_mut().enumerate() {
            let cap = (m.row_offsets[r + 1] - m.row_offsets[r]) as usize;
            let (c, rest_c) = std::mem::take(&mut cols).split_at_mut(cap);
            let (v, rest_v) = std::mem::take(&mut vals).split_at_mut(cap);
            cols = rest_c;
            vals = rest_v;
            rows.push((c, v, nnz));
        }
    }
    let sp = &params.species;
    rows.into_par_iter().enumerate().for_each(|(i, (cols, vals, nnz))| {
        let si = sp[store.species[i] as usize];
        cols[0] = i as u32;
        vals[0] = si.eta;
        let mut k = 1;
        for &j in list.neighbors(i) {
            let j = j as usize;
            let r2 = norm2(sub(positions[j], positions[i]));
            if r2 >= rc2 {
                continue;
            }
            let sj = sp[store.species[j] as usize];
            cols[k] = store.owner_index(j) as u32;
            vals[k] = shielded_coulomb(r2.sqrt(), (si.gamma * sj.gamma).sqrt());
            k += 1;
        }
        *nnz = k as u32;
    });
    Ok(m)
}

/// Outcome of one conjugate-gradient solve.
#[derive(Clone, Debug, PartialEq)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `‖r‖/‖b‖` before each iteration and at exit.
    pub residuals: Vec<f64>,
    /// Iterates after each update, when recording was requested.
    pub iterates: Vec<Vec<f64>>,
}

struct CgState {
    x: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    rr: f64,
    b_norm: f64,
    iterations: usize,
    residuals: Vec<f64>,
    iterates: Vec<Vec<f64>>,
    done: bool,
}

impl CgState {
    fn new(b: &[f64]) -> Self {
        let rr = dot(b, b);
        let b_norm = rr.sqrt();
        CgState {
            x: vec![0.0; b.len()],
            r: b.to_vec(),
            p: b.to_vec(),
            rr,
            b_norm,
            iterations: 0,
            residuals: Vec::new(),
            iterates: Vec::new(),
            done: false,
        }
    }

    fn relative(&self) -> f64 {
        if self.b_norm == 0.0 {
            0.0
        } else {
            self.rr.sqrt() / self.b_norm
        }
    }

    /// Records the residual and marks convergence; true if still active.
    fn check(&mut self, tol: f64) -> bool {
        let rel = self.relative();
        self.residuals.push(rel);
        if rel <= tol {
            self.done = true;
        }
        !self.done
    }

    fn update(&mut self, ap: &[f64], record: bool) {
        let alpha = self.rr / dot(&self.p, ap);
        self.x.par_iter_mut().zip(&self.p).for_each(|(x, p)| *x += alpha * p);
        self.r.par_iter_mut().zip(ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&self.r, &self.r);
        let beta = rr_new / self.rr;
        self.p.par_iter_mut().zip(&self.r).for_each(|(p, r)| *p = r + beta * *p);
        self.rr = rr_new;
        self.iterations += 1;
        if record {
            self.iterates.push(self.x.clone());
        }
    }

    fn finish(self) -> CgResult {
        CgResult { x: self.x, iterations: self.iterations, residuals: self.residuals, iterates: self.iterates }
    }
}

/// Conjugate gradient from a zero initial guess to `‖r‖ ≤ tol·‖b‖`.
pub fn cg_solve(h: &OverCsr, b: &[f64], tol: f64, max_iter: usize, record: bool) -> Result<CgResult> {
    h.check_len(b)?;
    let mut s = CgState::new(b);
    while s.check(tol) {
        if s.iterations >= max_iter {
            return Err(Error::NotConverged { iterations: s.iterations, residuals: vec![s.relative()] });
        }
        let ap = h.spmv(&s.p)?;
        s.update(&ap, record);
    }
    Ok(s.finish())
}

/// Two conjugate-gradient solves sharing each matrix pass.
///
/// Each system keeps its own scalars and freezes once converged, so both
/// trajectories equal independent [`cg_solve`] runs bit for bit.
pub fn cg_solve_fused(h: &OverCsr, b1: &[f64], b2: &[f64], tol: f64, max_iter: usize, record: bool) -> Result<(CgResult, CgResult)> {
    h.check_len(b1)?;
    h.check_len(b2)?;
    let mut s1 = CgState::new(b1);
    let mut s2 = CgState::new(b2);
    let mut a1 = s1.check(tol);
    let mut a2 = s2.check(tol);
    while a1 || a2 {
        if (a1 && s1.iterations >= max_iter) || (a2 && s2.iterations >= max_iter) {
            return Err(Error::NotConverged { iterations: s1.iterations.max(s2.iterations), residuals: vec![s1.relative(), s2.relative()] });
        }
        match (a1, a2) {
            (true, true) => {
                let (ap1, ap2) = h.spmv_fused(&s1.p, &s2.p)?;
                s1.update(&ap1, record);
                s2.update(&ap2, record);
            }
            (true, false) => s1.update(&h.spmv(&s1.p)?, record),
            _ => s2.update(&h.spmv(&s2.p)?, record),
        }
        if a1 {
            a1 = s1.check(tol);
        }
        if a2 {
            a2 = s2.check(tol);
        }
    }
    Ok((s1.finish(), s2.finish()))
}

/// Matrix, electronegativities and solver settings of one QEq problem.
#[derive(Clone, Debug)]
pub struct QeqSystem {
    pub h: OverCsr,
    pub chi: Vec<f64>,
    pub q: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub net_charge: f64,
}

#[derive(Clone, Debug)]
pub struct QeqSolution {
    pub charges: Vec<f64>,
    pub s: CgResult,
    pub t: CgResult,
}

impl QeqSystem {
    pub fn new(h: OverCsr, chi: Vec<f64>) -> Self {
        let n = chi.len();
        QeqSystem { h, chi, q: vec![0.0; n], tol: 1e-6, max_iter: 500, net_charge: 0.0 }
    }

    /// Builds the system for the owned atoms of a single-rank store.
    pub fn from_store(store: &mut AtomStore, list: &NeighborList, params: &QeqParams) -> Result<Self> {
        let h = build_matrix(store, list, params)?;
        let chi = store.species[..store.n_local()].iter().map(|&s| params.species[s as usize].chi).collect();
        Ok(QeqSystem { h, chi, q: vec![0.0; store.n_local()], tol: params.tol, max_iter: params.max_iter, net_charge: params.net_charge })
    }

    /// Solves `H s = -χ` and `H t = -1`, then sets `q = s - ((Σs - Q)/Σt) t`.
    pub fn solve(&mut self) -> Result<QeqSolution> {
        if self.chi.len() != self.h.n_rows() {
            return Err(Error::DimensionMismatch { expected: self.h.n_rows(), got: self.chi.len() });
        }
        self.h.check_diagonal_dominance()?;
        let b1: Vec<f64> = self.chi.iter().map(|c| -c).collect();
        let b2 = vec![-1.0; self.chi.len()];
        let (s, t) = cg_solve_fused(&self.h, &b1, &b2, self.tol, self.max_iter, false)?;
        let sum_s: f64 = s.x.iter().sum();
        let sum_t: f64 = t.x.iter().sum();
        let mu = if sum_t == 0.0 { 0.0 } else { (sum_s - self.net_charge) / sum_t };
        self.q = s.x.iter().zip(&t.x).map(|(si, ti)| si - mu * ti).collect();
        Ok(QeqSolution { charges: self.q.clone(), s, t })
    }
}
