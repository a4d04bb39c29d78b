//! Constitutive laws, energy functionals and the wall extension field.

use crate::field::{ScalarField, VecField};
use crate::mesh::Mesh;
use crate::proj::ProjectedB;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhysError {
    #[error("invalid physical parameters: {0}")]
    Invalid(String),
}

/// Physical parameters: p(rho) = a rho^gamma + b rho, viscosities mu/lambda
/// (momentum coefficient nu = lambda + mu), resistivity zeta, gravity g and
/// tangential wall magnetic data b_minus/b_plus (B1 values at the lower and
/// upper wall).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysParams {
    pub mu: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub g: (f64, f64),
    pub b_minus: f64,
    pub b_plus: f64,
}

impl PhysParams {
    pub fn nu(&self) -> f64 {
        self.lambda + self.mu
    }

    pub fn validate(&self) -> Result<(), PhysError> {
        if self.mu <= 0.0 {
            return Err(PhysError::Invalid(format!("mu = {} must be > 0", self.mu)));
        }
        if self.zeta <= 0.0 {
            return Err(PhysError::Invalid(format!("zeta = {} must be > 0", self.zeta)));
        }
        if self.gamma <= 1.0 {
            return Err(PhysError::Invalid(format!("gamma = {} must be > 1", self.gamma)));
        }
        if self.a <= 0.0 || self.b < 0.0 {
            return Err(PhysError::Invalid(format!("need a > 0, b >= 0, got a={}, b={}", self.a, self.b)));
        }
        if self.lambda + 2.0 * self.mu / 3.0 < 0.0 {
            return Err(PhysError::Invalid("lambda + 2 mu / 3 < 0".into()));
        }
        Ok(())
    }

    /// Barotropic pressure a rho^gamma + b rho.
    pub fn pressure(&self, rho: f64) -> f64 {
        debug_assert!(rho >= 0.0);
        self.a * rho.powf(self.gamma) + self.b * rho
    }

    /// Pressure potential P with P'(rho) rho - P(rho) = p(rho):
    /// a rho^gamma / (gamma - 1) + b rho ln rho.
    pub fn pressure_potential(&self, rho: f64) -> f64 {
        debug_assert!(rho >= 0.0);
        let power = self.a * rho.powf(self.gamma) / (self.gamma - 1.0);
        if self.b == 0.0 || rho == 0.0 {
            power
        } else {
            power + self.b * rho * rho.ln()
        }
    }

    pub fn pressure_potential_d(&self, rho: f64) -> f64 {
        debug_assert!(rho > 0.0);
        let power = self.a * self.gamma * rho.powf(self.gamma - 1.0) / (self.gamma - 1.0);
        if self.b == 0.0 {
            power
        } else {
            power + self.b * (rho.ln() + 1.0)
        }
    }

    /// Bregman remainder P(y) - P(x) - P'(x)(y - x); the exact realization of
    /// the mean-value terms P''(xi) (y-x)^2 / 2 in the dissipation bookkeeping.
    pub fn potential_bregman(&self, y: f64, x: f64) -> f64 {
        self.pressure_potential(y) - self.pressure_potential(x)
            - self.pressure_potential_d(x) * (y - x)
    }
}

/// Discrete state: density, velocity, magnetic field (cell fields).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub rho: ScalarField,
    pub u: VecField,
    pub b: VecField,
}

impl State {
    pub fn zeros(mesh: &Mesh) -> Self {
        State {
            rho: ScalarField::zeros(mesh),
            u: VecField::zeros(mesh),
            b: VecField::zeros(mesh),
        }
    }
}

/// The affine solenoidal extension of the wall data: B_B = (beta(x2), 0) with
/// beta matching b_minus/b_plus at the walls. Its line-average projection is
/// exact (averages of an affine function), hence discretely divergence-free.
pub fn wall_extension_field(mesh: &Mesh, phys: &PhysParams) -> ProjectedB {
    let (x2a, x2b) = (mesh.x2a, mesh.x2b);
    let (bm, bp) = (phys.b_minus, phys.b_plus);
    let beta = move |y: f64| bm + (bp - bm) * (y - x2a) / (x2b - x2a);
    crate::proj::project_line_avg(mesh, move |_, y| beta(y), |_, _| 0.0)
}

/// Total energy sum |K| (rho |u|^2 / 2 + P(rho) + |B - Bref|^2 / 2).
pub fn total_energy(mesh: &Mesh, s: &State, bref: &VecField, phys: &PhysParams) -> f64 {
    let n = mesh.ncells();
    let mut terms = Vec::with_capacity(n);
    for k in 0..n {
        let rho = s.rho.data[k];
        assert!(rho > 0.0, "total energy needs positive density");
        let u2 = s.u.c1.data[k].powi(2) + s.u.c2.data[k].powi(2);
        let db1 = s.b.c1.data[k] - bref.c1.data[k];
        let db2 = s.b.c2.data[k] - bref.c2.data[k];
        terms.push(0.5 * rho * u2 + phys.pressure_potential(rho) + 0.5 * (db1 * db1 + db2 * db2));
    }
    mesh.cell_area() * crate::field::pairwise_sum(&terms)
}

/// Relative energy: Bregman distance of the total-energy density between a
/// numerical state and a reference state.
pub fn relative_energy(mesh: &Mesh, s: &State, r: &State, phys: &PhysParams) -> f64 {
    let n = mesh.ncells();
    let mut terms = Vec::with_capacity(n);
    for k in 0..n {
        let rho = s.rho.data[k];
        let rho_r = r.rho.data[k];
        assert!(rho_r > 0.0, "relative energy needs positive reference density");
        let du1 = s.u.c1.data[k] - r.u.c1.data[k];
        let du2 = s.u.c2.data[k] - r.u.c2.data[k];
        let db1 = s.b.c1.data[k] - r.b.c1.data[k];
        let db2 = s.b.c2.data[k] - r.b.c2.data[k];
        terms.push(
            0.5 * rho * (du1 * du1 + du2 * du2)
                + phys.potential_bregman(rho, rho_r)
                + 0.5 * (db1 * db1 + db2 * db2),
        );
    }
    mesh.cell_area() * crate::field::pairwise_sum(&terms)
}
