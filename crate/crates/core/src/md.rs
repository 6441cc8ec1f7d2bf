//! Multi-rank force evaluation and velocity-Verlet integration.

use crate::domain::{AtomRecord, Decomposition, SimBox, Vec3};
use crate::error::{Error, Result};
use crate::lattice::{kinetic_energy, temperature};
use crate::memspace::Space;
use crate::neighbor::{ListSettings, ListStyle, NeighborList};
use crate::pair::{compute_pair, LjKernel, PairConfig, PairKernel};

/// A potential that evaluates forces for one rank from its neighbor list.
pub trait ForceField: Send + Sync {
    fn name(&self) -> &str;
    fn cutoff(&self) -> f64;
    /// List style actually needed when `requested` is configured.
    fn list_style(&self, requested: ListStyle) -> ListStyle {
        requested
    }
    /// Energy, forces on all rows, virial.
    fn compute(&self, store: &mut crate::domain::AtomStore, list: &mut NeighborList, config: &PairConfig) -> Result<(f64, Vec<Vec3>, [f64; 6])>;
}

impl ForceField for LjKernel {
    fn name(&self) -> &str {
        "lj/cut"
    }

    fn cutoff(&self) -> f64 {
        PairKernel::cutoff(self)
    }

    fn compute(&self, store: &mut crate::domain::AtomStore, list: &mut NeighborList, config: &PairConfig) -> Result<(f64, Vec<Vec3>, [f64; 6])> {
        let r = compute_pair(self, store, list, *config)?;
        Ok((r.energy, r.forces, r.virial))
    }
}

impl ForceField for crate::pair::LjOptKernel {
    fn name(&self) -> &str {
        "lj/cut/opt"
    }

    fn cutoff(&self) -> f64 {
        PairKernel::cutoff(self)
    }

    fn compute(&self, store: &mut crate::domain::AtomStore, list: &mut NeighborList, config: &PairConfig) -> Result<(f64, Vec<Vec3>, [f64; 6])> {
        let r = compute_pair(self, store, list, *config)?;
        Ok((r.energy, r.forces, r.virial))
    }
}

/// A bonded or otherwise global term evaluated on the gathered system.
pub trait ExtraTerm: Send + Sync {
    fn name(&self) -> &str;
    /// Energy and per-atom forces in id order.
    fn compute(&mut self, sim_box: &SimBox, atoms: &[AtomRecord]) -> Result<(f64, Vec<Vec3>)>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdConfig {
    pub skin: f64,
    pub style: ListStyle,
    pub newton: bool,
    pub pair: PairConfig,
    pub n_ranks: usize,
}

impl Default for MdConfig {
    fn default() -> Self {
        MdConfig { skin: 0.3, style: ListStyle::Half, newton: true, pair: PairConfig::default(), n_ranks: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thermo {
    pub step: u64,
    pub pe: f64,
    pub ke: f64,
    pub etotal: f64,
    pub temperature: f64,
}

pub struct System {
    decomp: Decomposition,
    masses: Vec<f64>,
    field: Box<dyn ForceField>,
    extras: Vec<Box<dyn ExtraTerm>>,
    config: MdConfig,
    lists: Vec<NeighborList>,
    pe: f64,
    virial: [f64; 6],
    step: u64,
    rebuilds: usize,
}

impl System {
    pub fn new(sim_box: SimBox, atoms: &[AtomRecord], masses: Vec<f64>, field: Box<dyn ForceField>, config: MdConfig) -> Result<Self> {
        if let Some(a) = atoms.iter().find(|a| a.species as usize >= masses.len()) {
            return Err(Error::InvalidParameter(format!("atom {} has species {} without a mass", a.id, a.species)));
        }
        let reach = field.cutoff() + config.skin;
        let decomp = Decomposition::new(sim_box, config.n_ranks, atoms, reach)?;
        let mut s = System {
            decomp,
            masses,
            field,
            extras: Vec::new(),
            config,
            lists: Vec::new(),
            pe: 0.0,
            virial: [0.0; 6],
            step: 0,
            rebuilds: 0,
        };
        s.build_lists()?;
        s.compute_forces()?;
        Ok(s)
    }

    pub fn add_extra(&mut self, term: Box<dyn ExtraTerm>) -> Result<()> {
        self.extras.push(term);
        self.compute_forces().map(|_| ())
    }

    fn list_settings(&self) -> ListSettings {
        ListSettings::new(self.field.cutoff(), self.config.skin, self.field.list_style(self.config.style), self.config.newton)
    }

    fn build_lists(&mut self) -> Result<()> {
        let settings = self.list_settings();
        let sim_box = *self.decomp.sim_box();
        let previous: Vec<usize> = self.lists.iter().map(NeighborList::max_neighbors).collect();
        self.lists = self
            .decomp
            .stores_mut()
            .iter_mut()
            .enumerate()
            .map(|(r, s)| NeighborList::build_with_capacity(s, &sim_box, settings, previous.get(r).copied()))
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Recomputes energy and forces for the current positions.
    pub fn compute_forces(&mut self) -> Result<f64> {
        let mut pe = 0.0;
        let mut virial = [0.0; 6];
        let pair = self.config.pair;
        for (store, list) in self.decomp.stores_mut().iter_mut().zip(self.lists.iter_mut()) {
            let (e, f, w) = self.field.compute(store, list, &pair)?;
            store.set_forces(&f)?;
            pe += e;
            for d in 0..6 {
                virial[d] += w[d];
            }
        }
        self.decomp.reverse_comm();
        if !self.extras.is_empty() {
            let atoms = self.decomp.gather();
            let sim_box = *self.decomp.sim_box();
            let mut extra_f = vec![[0.0; 3]; atoms.len()];
            for term in &mut self.extras {
                let (e, f) = term.compute(&sim_box, &atoms)?;
                pe += e;
                for (a, b) in extra_f.iter_mut().zip(&f) {
                    for d in 0..3 {
                        a[d] += b[d];
                    }
                }
            }
            let index: std::collections::HashMap<u64, usize> = atoms.iter().enumerate().map(|(k, a)| (a.id, k)).collect();
            for s in self.decomp.stores_mut() {
                let n = s.n_local();
                let ids = s.global_ids.clone();
                let mut f = s.forces.view_mut(Space::Host)?;
                for i in 0..n {
                    let g = extra_f[index[&ids[i]]];
                    let c = f.vec3(i);
                    f.set_vec3(i, [c[0] + g[0], c[1] + g[1], c[2] + g[2]]);
                }
            }
        }
        if !pe.is_finite() {
            return Err(Error::NonFinite { quantity: "potential energy", step: self.step });
        }
        self.pe = pe;
        self.virial = virial;
        Ok(pe)
    }

    fn kick(&mut self, dt: f64) -> Result<()> {
        for s in self.decomp.stores_mut() {
            let n = s.n_local();
            s.forces.sync(Space::Host);
            s.velocities.sync(Space::Host);
            let f = s.forces.view(Space::Host)?;
            let mut v = s.velocities.view_mut(Space::Host)?;
            for i in 0..n {
                let inv_m = 1.0 / self.masses[s.species[i] as usize];
                let fi = f.vec3(i);
                if !(fi[0].is_finite() && fi[1].is_finite() && fi[2].is_finite()) {
                    return Err(Error::NonFinite { quantity: "force", step: self.step });
                }
                let vi = v.vec3(i);
                v.set_vec3(i, [vi[0] + 0.5 * dt * fi[0] * inv_m, vi[1] + 0.5 * dt * fi[1] * inv_m, vi[2] + 0.5 * dt * fi[2] * inv_m]);
            }
        }
        Ok(())
    }

    fn drift(&mut self, dt: f64) -> Result<()> {
        for s in self.decomp.stores_mut() {
            let n = s.n_local();
            s.velocities.sync(Space::Host);
            s.positions.sync(Space::Host);
            let v = s.velocities.view(Space::Host)?;
            let mut x = s.positions.view_mut(Space::Host)?;
            for i in 0..n {
                let vi = v.vec3(i);
                let xi = x.vec3(i);
                x.set_vec3(i, [xi[0] + dt * vi[0], xi[1] + dt * vi[1], xi[2] + dt * vi[2]]);
            }
        }
        Ok(())
    }

    /// One velocity-Verlet step.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        self.kick(dt)?;
        self.drift(dt)?;
        let stale = self.decomp.stores_mut().iter_mut().zip(&self.lists).any(|(s, l)| l.needs_rebuild(s));
        if stale {
            self.decomp.redistribute()?;
            self.build_lists()?;
            self.rebuilds += 1;
        } else {
            self.decomp.forward_comm();
        }
        self.step += 1;
        self.compute_forces()?;
        self.kick(dt)
    }

    /// Runs `n_steps`, returning thermo rows at step 0 of the run and every
    /// `thermo_every` steps (plus the final step).
    pub fn run(&mut self, n_steps: u64, dt: f64, thermo_every: u64) -> Result<Vec<Thermo>> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("timestep must be positive, got {dt}")));
        }
        let start = self.step;
        let mut log = vec![self.thermo()];
        for k in 1..=n_steps {
            self.step(dt)?;
            if (thermo_every > 0 && k % thermo_every == 0) || k == n_steps {
                log.push(self.thermo());
            }
        }
        debug_assert_eq!(self.step, start + n_steps);
        Ok(log)
    }

    pub fn thermo(&mut self) -> Thermo {
        let atoms = self.decomp.gather();
        let ke = kinetic_energy(&atoms, &self.masses);
        Thermo { step: self.step, pe: self.pe, ke, etotal: self.pe + ke, temperature: temperature(ke, atoms.len()) }
    }

    pub fn potential_energy(&self) -> f64 {
        self.pe
    }

    pub fn virial(&self) -> [f64; 6] {
        self.virial
    }

    /// Instantaneous pressure from kinetic energy and virial.
    pub fn pressure(&mut self) -> f64 {
        let atoms = self.decomp.gather();
        let ke = kinetic_energy(&atoms, &self.masses);
        let vol = self.decomp.sim_box().volume();
        (2.0 * ke + self.virial[0] + self.virial[1] + self.virial[2]) / (3.0 * vol)
    }

    pub fn atoms(&mut self) -> Vec<AtomRecord> {
        self.decomp.gather()
    }

    pub fn forces(&mut self) -> Vec<(u64, Vec3)> {
        self.decomp.gather_forces()
    }

    pub fn n_atoms(&self) -> usize {
        self.decomp.n_atoms()
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    pub fn config(&self) -> &MdConfig {
        &self.config
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomp
    }

    pub fn lists(&self) -> &[NeighborList] {
        &self.lists
    }

    pub fn field(&self) -> &dyn ForceField {
        self.field.as_ref()
    }
}
