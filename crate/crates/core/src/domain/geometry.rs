use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Orthorhombic simulation box with origin at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimBox {
    lengths: Vec3,
    periodic: [bool; 3],
}

impl SimBox {
    pub fn new(lengths: Vec3, periodic: [bool; 3]) -> Result<Self> {
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidBox(format!("edge lengths must be positive, got {lengths:?}")));
        }
        Ok(SimBox { lengths, periodic })
    }

    pub fn periodic_cube(length: f64) -> Result<Self> {
        Self::new([length; 3], [true; 3])
    }

    pub fn lengths(&self) -> Vec3 {
        self.lengths
    }

    pub fn periodic(&self) -> [bool; 3] {
        self.periodic
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Shortest edge among the periodic axes, if any.
    pub fn min_periodic_length(&self) -> Option<f64> {
        (0..3).filter(|&d| self.periodic[d]).map(|d| self.lengths[d]).reduce(f64::min)
    }

    /// Maps a position back into `[0, L)` along periodic axes.
    pub fn wrap(&self, x: Vec3) -> Vec3 {
        let mut out = x;
        for d in 0..3 {
            if self.periodic[d] {
                let l = self.lengths[d];
                out[d] = x[d] - l * (x[d] / l).floor();
                if out[d] >= l {
                    out[d] -= l;
                }
            }
        }
        out
    }

    /// Position of `x` shifted by `image` box lengths.
    #[inline]
    pub fn image_position(&self, x: Vec3, image: [i8; 3]) -> Vec3 {
        [
            x[0] + f64::from(image[0]) * self.lengths[0],
            x[1] + f64::from(image[1]) * self.lengths[1],
            x[2] + f64::from(image[2]) * self.lengths[2],
        ]
    }
}

/// Nearest periodic image of a displacement; periodic components land in `[-L/2, L/2)`.
pub fn minimum_image(dr: Vec3, sim_box: &SimBox) -> Vec3 {
    let mut out = dr;
    for d in 0..3 {
        if sim_box.periodic[d] {
            let l = sim_box.lengths[d];
            out[d] = dr[d] - l * (dr[d] / l + 0.5).floor();
        }
    }
    out
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm2(a: Vec3) -> f64 {
    dot(a, a)
}
