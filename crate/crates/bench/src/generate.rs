//! Deterministic body distributions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use fmm_core::Bodies;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Distribution {
    /// Uniform in the unit cube.
    CubeUniform,
    /// Uniform on the sphere of radius 1/2 centred in the unit cube.
    SphereSurface,
    /// Cell centres of the smallest `k^3 >= n` grid on the unit cube, x fastest.
    Lattice,
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::CubeUniform => "cube_uniform",
            Distribution::SphereSurface => "sphere_surface",
            Distribution::Lattice => "lattice",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" | "cube_uniform" => Ok(Distribution::CubeUniform),
            "sphere" | "sphere_surface" => Ok(Distribution::SphereSurface),
            "lattice" => Ok(Distribution::Lattice),
            _ => Err(BenchError::Usage(format!(
                "unknown distribution `{s}` (cube, sphere, lattice)"
            ))),
        }
    }
}

/// `n` bodies drawn from `ChaCha8Rng::seed_from_u64(seed)`. Charges are
/// uniform in `(0, 1/n]` for every distribution, so the total stays O(1).
pub fn generate(dist: Distribution, n: usize, seed: u64) -> Result<Bodies> {
    if n == 0 {
        return Err(BenchError::Usage("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let position: Vec<[f64; 3]> = match dist {
        Distribution::CubeUniform => (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect(),
        Distribution::SphereSurface => (0..n)
            .map(|_| {
                let z: f64 = rng.gen_range(-1.0..=1.0);
                let phi = rng.gen_range(0.0..2.0 * PI);
                let s = (1.0 - z * z).max(0.0).sqrt();
                [
                    0.5 + 0.5 * s * phi.cos(),
                    0.5 + 0.5 * s * phi.sin(),
                    0.5 + 0.5 * z,
                ]
            })
            .collect(),
        Distribution::Lattice => {
            let mut k = 1;
            while k * k * k < n {
                k += 1;
            }
            let h = 1.0 / k as f64;
            (0..n)
                .map(|i| [i % k, (i / k) % k, i / (k * k)].map(|c| (c as f64 + 0.5) * h))
                .collect()
        }
    };
    let charge = (0..n)
        .map(|_| (1.0 - rng.gen::<f64>()) / n as f64)
        .collect();
    Ok(Bodies::new(position, charge)?)
}
