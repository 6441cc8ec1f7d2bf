//! Style names mapped to factories, with global-suffix dispatch.

use std::collections::BTreeMap;
use std::path::PathBuf;

use super::script::near_matches;
use crate::error::{Error, Result};
use crate::md::ForceField;
use crate::pair::{LjKernel, LjOptKernel, PairParams};
use crate::snap::{Snap, SnapKnobs, SnapParams};

/// Everything a pair factory may read.
#[derive(Clone, Debug)]
pub struct StyleInput {
    /// Arguments after the style name in `pair_style`.
    pub args: Vec<String>,
    /// Arguments of every `pair_coeff` command, in order.
    pub coeffs: Vec<Vec<String>>,
    pub n_species: usize,
    pub shift: bool,
    pub knobs: SnapKnobs,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl StyleInput {
    pub fn new(args: &[&str], coeffs: &[&[&str]], n_species: usize) -> Self {
        StyleInput {
            args: args.iter().map(|s| s.to_string()).collect(),
            coeffs: coeffs.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect(),
            n_species,
            shift: false,
            knobs: SnapKnobs::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

pub type StyleFactory = fn(&StyleInput) -> Result<Box<dyn ForceField>>;

#[derive(Clone)]
pub struct StyleRegistry {
    factories: BTreeMap<String, StyleFactory>,
    pub global_suffix: Option<String>,
}

impl Default for StyleRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}

impl StyleRegistry {
    pub fn empty() -> Self {
        StyleRegistry { factories: BTreeMap::new(), global_suffix: None }
    }

    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register("lj/cut", lj_cut);
        r.register("lj/cut/opt", lj_cut_opt);
        r.register("snap", snap);
        r
    }

    pub fn register(&mut self, name: &str, factory: StyleFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    /// Name that `name` dispatches to under the current global suffix.
    ///
    /// With a suffix set, `name/suffix` is preferred when registered;
    /// otherwise `name` itself is used. A name already ending in the
    /// suffix is not suffixed twice.
    pub fn resolve_name(&self, name: &str) -> Result<String> {
        if let Some(sfx) = self.global_suffix.as_deref() {
            if !name.ends_with(&format!("/{sfx}")) {
                let candidate = format!("{name}/{sfx}");
                if self.contains(&candidate) {
                    return Ok(candidate);
                }
            }
        }
        if self.contains(name) {
            return Ok(name.to_string());
        }
        Err(Error::UnknownStyle { name: name.to_string(), near: near_matches(name, self.names()) })
    }

    pub fn resolve(&self, name: &str) -> Result<(String, StyleFactory)> {
        let resolved = self.resolve_name(name)?;
        let f = self.factories[&resolved];
        Ok((resolved, f))
    }

    pub fn create(&self, name: &str, input: &StyleInput) -> Result<Box<dyn ForceField>> {
        let (_, f) = self.resolve(name)?;
        f(input)
    }
}

fn number(s: &str, what: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::InvalidParameter(format!("{what}: expected a number, got '{s}'")))
}

/// Species selector: `*` or a 1-based index.
fn species_range(s: &str, n: usize) -> Result<std::ops::Range<usize>> {
    if s == "*" {
        return Ok(0..n);
    }
    let k: usize = s.parse().map_err(|_| Error::InvalidParameter(format!("bad species '{s}'")))?;
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("species {k} outside 1..={n}")));
    }
    Ok(k - 1..k)
}

fn lj_kernel(input: &StyleInput) -> Result<LjKernel> {
    let global_rc = number(input.args.first().ok_or_else(|| Error::InvalidParameter("lj/cut needs a cutoff".into()))?, "lj/cut cutoff")?;
    if input.args.len() > 1 {
        return Err(Error::InvalidParameter("lj/cut takes one argument".into()));
    }
    let n = input.n_species.max(1);
    let mut set: Vec<Option<PairParams>> = vec![None; n * n];
    for c in &input.coeffs {
        if c.len() < 4 || c.len() > 5 {
            return Err(Error::InvalidParameter("pair_coeff for lj/cut: i j epsilon sigma [cutoff]".into()));
        }
        let eps = number(&c[2], "epsilon")?;
        let sigma = number(&c[3], "sigma")?;
        let rc = c.get(4).map(|s| number(s, "cutoff")).transpose()?.unwrap_or(global_rc);
        let p = PairParams::new(eps, sigma, rc)?;
        for a in species_range(&c[0], n)? {
            for b in species_range(&c[1], n)? {
                set[a * n + b] = Some(p);
                set[b * n + a] = Some(p);
            }
        }
    }
    let mut kernel = LjKernel::with_species(n, PairParams::new(1.0, 1.0, global_rc)?);
    for a in 0..n {
        for b in a..n {
            let p = match (set[a * n + b], set[a * n + a], set[b * n + b]) {
                (Some(p), _, _) => p,
                // Geometric mixing from the like pairs.
                (None, Some(pa), Some(pb)) => PairParams::new((pa.epsilon * pb.epsilon).sqrt(), (pa.sigma * pb.sigma).sqrt(), global_rc)?,
                _ => return Err(Error::InvalidParameter(format!("pair_coeff missing for species {} {}", a + 1, b + 1))),
            };
            kernel.set(a, b, p)?;
        }
    }
    Ok(if input.shift { kernel.shifted() } else { kernel })
}

fn lj_cut(input: &StyleInput) -> Result<Box<dyn ForceField>> {
    Ok(Box::new(lj_kernel(input)?))
}

fn lj_cut_opt(input: &StyleInput) -> Result<Box<dyn ForceField>> {
    Ok(Box::new(LjOptKernel::new(&lj_kernel(input)?)))
}

fn snap(input: &StyleInput) -> Result<Box<dyn ForceField>> {
    let rc = number(input.args.first().ok_or_else(|| Error::InvalidParameter("snap needs a cutoff".into()))?, "snap cutoff")?;
    let coeff = match input.coeffs.as_slice() {
        [c] if c.len() == 3 && c[0] == "*" && c[1] == "*" => &c[2],
        _ => return Err(Error::InvalidParameter("snap needs exactly one 'pair_coeff * * <file>'".into())),
    };
    let path = input.base_dir.join(coeff);
    let params = SnapParams::read_coefficients(&path, rc).map_err(|e| match e {
        Error::Io(io) => Error::InvalidParameter(format!("cannot read {}: {io}", path.display())),
        other => other,
    })?;
    Ok(Box::new(Snap::new(params, input.knobs)?))
}
