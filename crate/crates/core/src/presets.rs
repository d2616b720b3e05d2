//! Initial-data scenarios.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{clamp_initial_data, mollify, DistributionField, PhaseGrid, SimulationParams};
use crate::haldane::{wu_equilibrium, EquilibriumSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// x-uniform Wu equilibrium.
    Wu { mu: f64, temperature: f64 },
    /// Two Gaussians centred at `(+-separation/2, 0)` with standard deviation
    /// `width` and peak `peak / alpha`, x-uniform.
    Bimodal { peak: f64, separation: f64, width: f64 },
    /// Wu equilibrium modulated in x: `g(v) (1 + amplitude cos 2 pi x)`.
    Wave {
        mu: f64,
        temperature: f64,
        amplitude: f64,
    },
}

impl Preset {
    pub const NAMES: [&'static str; 3] = ["wu", "bimodal", "wave"];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Wu { .. } => "wu",
            Preset::Bimodal { .. } => "bimodal",
            Preset::Wave { .. } => "wave",
        }
    }

    /// The named preset with its default parameters.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "wu" => Some(Preset::Wu {
                mu: 0.0,
                temperature: 1.0,
            }),
            "bimodal" => Some(Preset::Bimodal {
                peak: 1.0,
                separation: 2.4,
                width: 0.6,
            }),
            "wave" => Some(Preset::Wave {
                mu: 0.0,
                temperature: 1.0,
                amplitude: 0.3,
            }),
            _ => None,
        }
    }

    /// Unclamped initial data on the grid.
    pub fn sample(&self, alpha: f64, grid: &PhaseGrid) -> Result<DistributionField> {
        Ok(match *self {
            Preset::Wu { mu, temperature } => {
                wu_equilibrium(&EquilibriumSpec::new(mu, temperature, alpha)?, grid)
            }
            Preset::Bimodal {
                peak,
                separation,
                width,
            } => {
                let c = 0.5 * separation;
                let s2 = 2.0 * width * width;
                DistributionField::from_velocity_fn(grid, |v| {
                    let a = (-((v[0] - c).powi(2) + v[1] * v[1]) / s2).exp();
                    let b = (-((v[0] + c).powi(2) + v[1] * v[1]) / s2).exp();
                    peak / alpha * (a + b)
                })
            }
            Preset::Wave {
                mu,
                temperature,
                amplitude,
            } => {
                let spec = EquilibriumSpec::new(mu, temperature, alpha)?;
                DistributionField::from_fn(grid, |x, v| {
                    spec.occupation(v) * (1.0 + amplitude * (2.0 * PI * x).cos())
                })
            }
        })
    }
}

/// Builds clamped initial data: preset, optional multiplicative jitter
/// `1 + jitter U(-1, 1)` from a seeded stream, optional mollification, clamp.
pub fn initial_data(
    preset: &Preset,
    params: &SimulationParams,
    grid: &PhaseGrid,
    jitter: f64,
    seed: u64,
    smooth: bool,
) -> Result<DistributionField> {
    if !(0.0..1.0).contains(&jitter) {
        return Err(Error::domain("initial_data", format!("jitter = {jitter} outside [0, 1)")));
    }
    let mut f = preset.sample(params.alpha, grid)?;
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in f.values.iter_mut() {
            *v *= 1.0 + jitter * rng.gen_range(-1.0..1.0);
        }
    }
    if smooth {
        f = mollify(&f, grid);
    }
    clamp_initial_data(&f, params, grid)
}
