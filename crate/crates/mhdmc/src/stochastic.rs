//! Random data model: distributions, counter-based deterministic seeding and
//! the three experiment presets.

use crate::mesh::{Mesh, MeshError};
use crate::physics::{PhysParams, State};
use crate::proj;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StochError {
    #[error("unknown experiment preset `{0}` (expected sine, kh or ot)")]
    UnknownPreset(String),
    #[error("projected initial density is not positive: min {min:e}")]
    NonpositiveDensity { min: f64 },
    #[error("mesh error: {0}")]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RandomVariableSpec {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, std: f64 },
    Degenerate { value: f64 },
}

impl RandomVariableSpec {
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        match *self {
            RandomVariableSpec::Uniform { lo, hi } => rng.gen_range(lo..hi),
            RandomVariableSpec::Gaussian { mean, std } => {
                let n = rand_distr::Normal::new(mean, std).expect("std must be finite and >= 0");
                rng.sample(n)
            }
            RandomVariableSpec::Degenerate { value } => value,
        }
    }
}

/// Identifies one sample: outer repetition and inner index under a master
/// seed. The mapping to RNG streams is injective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SampleId {
    pub master_seed: u64,
    pub rep: u32,
    pub index: u32,
}

impl SampleId {
    fn rng(&self) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update(self.rep.to_le_bytes());
        hasher.update(self.index.to_le_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetKind {
    Sine,
    Kh,
    Ot,
}

/// A randomized experiment: domain, physics, final time, the two scalar
/// random amplitudes and the preset-specific initial data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub kind: PresetKind,
    pub bounds: (f64, f64, f64, f64),
    pub t_final: f64,
    pub y1: RandomVariableSpec,
    pub y2: RandomVariableSpec,
    pub mu: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

pub fn make_experiment(name: &str) -> Result<ExperimentSpec, StochError> {
    let gamma = 5.0 / 3.0;
    match name {
        "sine" => Ok(ExperimentSpec {
            name: name.into(),
            kind: PresetKind::Sine,
            bounds: (-1.0, 1.0, -1.0, 1.0),
            t_final: 0.6,
            y1: RandomVariableSpec::Uniform { lo: -0.1, hi: 0.1 },
            y2: RandomVariableSpec::Uniform { lo: -0.1, hi: 0.1 },
            mu: 0.01,
            lambda: 0.0,
            zeta: 0.01,
            gamma,
            a: 1.0,
            b: 0.0,
        }),
        "kh" => Ok(ExperimentSpec {
            name: name.into(),
            kind: PresetKind::Kh,
            bounds: (0.0, 2.0, -0.5, 0.5),
            t_final: 2.2,
            y1: RandomVariableSpec::Uniform { lo: -0.05, hi: 0.05 },
            y2: RandomVariableSpec::Uniform { lo: -0.05, hi: 0.05 },
            mu: 0.001,
            lambda: 0.0,
            zeta: 0.001,
            gamma,
            a: 1.0,
            b: 0.0,
        }),
        "ot" => Ok(ExperimentSpec {
            name: name.into(),
            kind: PresetKind::Ot,
            bounds: (0.0, 2.0 * PI, 0.0, 2.0 * PI),
            t_final: 3.0,
            y1: RandomVariableSpec::Gaussian { mean: 0.0, std: 0.1 },
            y2: RandomVariableSpec::Gaussian { mean: 0.0, std: 0.1 },
            mu: 0.01,
            lambda: 0.0,
            zeta: 0.01,
            gamma,
            a: 1.0,
            b: 0.0,
        }),
        other => Err(StochError::UnknownPreset(other.into())),
    }
}

impl ExperimentSpec {
    /// Deterministic draw of the two amplitudes for a sample id.
    pub fn draw(&self, id: SampleId) -> (f64, f64) {
        let mut rng = id.rng();
        let y1 = self.y1.sample(&mut rng);
        let y2 = self.y2.sample(&mut rng);
        (y1, y2)
    }

    /// Degenerate draw for deterministic runs.
    pub fn zero_draw(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    /// Mesh with `nx` cells across direction 1; direction 2 matches the
    /// domain aspect ratio so cells are square.
    pub fn mesh(&self, nx: usize) -> Result<Mesh, MeshError> {
        let (x1a, x1b, x2a, x2b) = self.bounds;
        let h = (x1b - x1a) / nx as f64;
        let nx2 = ((x2b - x2a) / h).round() as usize;
        Mesh::new(nx, nx2, self.bounds)
    }

    /// Physical parameters for a concrete draw; the wall data depend on Y2.
    pub fn phys(&self, y: (f64, f64)) -> PhysParams {
        let (b_minus, b_plus) = match self.kind {
            PresetKind::Sine => (-(1.0 + y.1), 1.0 + y.1),
            PresetKind::Kh => (0.1 - y.1, 0.1 + y.1),
            PresetKind::Ot => (0.0, y.1),
        };
        PhysParams {
            mu: self.mu,
            lambda: self.lambda,
            zeta: self.zeta,
            gamma: self.gamma,
            a: self.a,
            b: self.b,
            g: (0.0, 0.0),
            b_minus,
            b_plus,
        }
    }

    /// Projects the analytic initial data for a draw: cell means for density
    /// and velocity, the divergence-free line-average projection for B.
    pub fn realize_initial_state(&self, y: (f64, f64), mesh: &Mesh) -> Result<State, StochError> {
        let (y1, y2) = y;
        let gamma = self.gamma;
        let (rho, u, b) = match self.kind {
            PresetKind::Sine => (
                proj::project_cell_mean(mesh, |x1, x2| 2.0 + (2.0 * PI * (x1 + x2)).cos()),
                proj::project_cell_mean_vec(mesh, |_, _| 0.0, move |_, x2| {
                    y1 * (2.0 * PI * x2).sin()
                }),
                proj::project_line_avg(
                    mesh,
                    move |_, x2| x2 + y2 * (PI * x2 / 2.0).sin(),
                    |_, _| 0.0,
                ),
            ),
            PresetKind::Kh => (
                proj::project_cell_mean(mesh, |_, _| gamma),
                proj::project_cell_mean_vec(
                    mesh,
                    move |x1, x2| {
                        -0.1 * (2.0 * PI * x1).cos() * (2.0 * PI * x2).sin()
                            + y1 * (2.0 * PI * x2).sin()
                    },
                    |x1, x2| 0.1 * (2.0 * PI * x1).sin() * (1.0 + (2.0 * PI * x2).cos()),
                ),
                proj::project_line_avg(mesh, move |_, x2| 0.1 + y2 * (PI * x2).sin(), |_, _| 0.0),
            ),
            PresetKind::Ot => (
                proj::project_cell_mean(mesh, |_, _| gamma * gamma),
                proj::project_cell_mean_vec(mesh, move |_, x2| (-1.0 + y1) * x2.sin(), |_, _| 0.0),
                proj::project_line_avg(
                    mesh,
                    move |_, x2| -x2.sin() + y2 * (x2 / 4.0).sin(),
                    |x1, _| (2.0 * x1).sin(),
                ),
            ),
        };
        let min = rho.min();
        if !(min > 0.0) {
            return Err(StochError::NonpositiveDensity { min });
        }
        Ok(State { rho, u, b: b.field })
    }
}
