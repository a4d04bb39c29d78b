//! Implicit backward Euler finite volume stepper.
//!
//! One step solves the coupled density/momentum/induction system with the
//! diffusive upwind flux. The nonlinear system is handled by Picard splitting:
//! (1) density with frozen transporting velocity, (2) momentum with frozen new
//! density, frozen transport and Lorentz fields, (3) induction with frozen new
//! velocity. Each subproblem is linear and solved matrix free.

use crate::field::{FaceField, ScalarField, VecField, WallBc};
use crate::linsolve::{self, LinError};
use crate::mesh::Mesh;
use crate::ops;
use crate::physics::{PhysParams, State};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("picard iteration stalled: increment {increment:e} after {iters} sweeps")]
    PicardDiverged { iters: usize, increment: f64 },
    #[error("linear solve failed: {0}")]
    LinearSolveFailed(#[from] LinError),
    #[error("density lost positivity, min {min:e}")]
    PositivityLost { min: f64 },
    #[error("time step underflow after {halvings} halvings at t = {t}")]
    StepFailed { t: f64, halvings: usize },
}

/// Numerical parameters of the stepper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumParams {
    /// exponent of the artificial diffusion h^eps in the mass flux, > -1
    pub eps_flux: f64,
    /// nominal time step as a fraction of h
    pub dt_factor: f64,
    /// joint relative increment tolerance of the Picard loop
    pub picard_tol: f64,
    pub picard_max: usize,
    /// relative residual tolerance of the linear sub-solves
    pub lin_tol: f64,
    pub lin_max: usize,
    /// solve the sub-systems by probing plus dense LU (small grids only)
    pub dense_direct: bool,
}

impl Default for NumParams {
    fn default() -> Self {
        NumParams {
            eps_flux: 0.0,
            dt_factor: 0.1,
            picard_tol: 1e-9,
            picard_max: 50,
            lin_tol: 1e-13,
            lin_max: 4000,
            dense_direct: false,
        }
    }
}

impl NumParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.eps_flux <= -1.0 {
            return Err(format!("eps_flux = {} must be > -1", self.eps_flux));
        }
        if self.dt_factor <= 0.0 {
            return Err("dt_factor must be > 0".into());
        }
        if self.picard_tol <= 0.0 || self.lin_tol <= 0.0 {
            return Err("tolerances must be > 0".into());
        }
        Ok(())
    }
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub picard_iters: usize,
    pub increment: f64,
    pub lin_iters: usize,
    pub mass_before: f64,
    pub mass_after: f64,
    pub min_density: f64,
    pub div_b_max: f64,
    pub energy: f64,
    pub energy_residual: f64,
    pub halvings: usize,
}

/// Divergence of the diffusive upwind flux of a cell quantity `r`, transported
/// by the face velocities. Exterior faces carry no flux; direction 1 wraps.
pub fn flux_div(
    mesh: &Mesh,
    r: &ScalarField,
    uf1: &FaceField,
    uf2: &FaceField,
    h_eps: f64,
) -> ScalarField {
    let (nx1, nx2, h) = (mesh.nx1, mesh.nx2, mesh.h);
    let mut out = ScalarField::zeros(mesh);
    for j in 0..nx2 {
        for i in 0..nx1 {
            let us = uf1.get(i, j);
            let kin = mesh.idx(i, j);
            let kout = mesh.idx((i + 1) % nx1, j);
            let f = ops::diffusive_flux(r.data[kin], r.data[kout], us, h_eps);
            out.data[kin] += f;
            out.data[kout] -= f;
        }
    }
    for j in 1..nx2 {
        for i in 0..nx1 {
            let us = uf2.get(i, j);
            let kin = mesh.idx(i, j - 1);
            let kout = mesh.idx(i, j);
            let f = ops::diffusive_flux(r.data[kin], r.data[kout], us, h_eps);
            out.data[kin] += f;
            out.data[kout] -= f;
        }
    }
    let inv_h = 1.0 / h;
    out.data.iter_mut().for_each(|v| *v *= inv_h);
    out
}

fn field_from(mesh: &Mesh, x: &[f64]) -> ScalarField {
    ScalarField { nx1: mesh.nx1, nx2: mesh.nx2, data: x.to_vec() }
}

fn solve_sub<F>(
    op: &F,
    rhs: &[f64],
    x: &mut [f64],
    mesh: &Mesh,
    ncomp: usize,
    num: &NumParams,
) -> Result<usize, LinError>
where
    F: Fn(&[f64], &mut [f64]),
{
    if num.dense_direct {
        linsolve::solve_dense(op, rhs, x)?;
        Ok(1)
    } else {
        let diag = linsolve::stencil_diagonal(op, mesh.nx1, mesh.nx2, ncomp);
        let rep = linsolve::bicgstab(op, rhs, x, &diag, num.lin_tol, num.lin_max)?;
        Ok(rep.iters)
    }
}

/// Tangential boundary offset of curl_vec at zero field: the affine part of
/// the mirror trace rule for B1, nonzero only in the wall rows.
fn curl_affine_part(mesh: &Mesh, phys: &PhysParams) -> ScalarField {
    let mut a = ScalarField::zeros(mesh);
    for i in 0..mesh.nx1 {
        a.set(i, 0, phys.b_minus / mesh.h);
        a.set(i, mesh.nx2 - 1, -phys.b_plus / mesh.h);
    }
    a
}

/// One Picard sweep: sequential density, momentum, induction solves with the
/// frozen fields described at module level. Returns the new iterate and the
/// total linear iteration count.
pub fn picard_sweep(
    mesh: &Mesh,
    iterate: &State,
    prev: &State,
    dt: f64,
    phys: &PhysParams,
    num: &NumParams,
) -> Result<(State, usize), SchemeError> {
    let n = mesh.ncells();
    let h_eps = mesh.h.powf(num.eps_flux);
    let (uf1, uf2) = ops::face_velocities(mesh, &iterate.u);
    let mut lin_iters = 0;
    let odd = WallBc::odd();
    let even = WallBc::even();

    // density
    let rho_new = {
        let op = |x: &[f64], y: &mut [f64]| {
            let r = field_from(mesh, x);
            let fd = flux_div(mesh, &r, &uf1, &uf2, h_eps);
            for k in 0..n {
                y[k] = x[k] / dt + fd.data[k];
            }
        };
        let rhs: Vec<f64> = prev.rho.data.iter().map(|&r| r / dt).collect();
        let mut x = iterate.rho.data.clone();
        lin_iters += solve_sub(&op, &rhs, &mut x, mesh, 1, num)?;
        let f = field_from(mesh, &x);
        let min = f.min();
        if !(min > 0.0) || !min.is_finite() {
            return Err(SchemeError::PositivityLost { min });
        }
        f
    };

    // momentum
    let u_new = {
        let op = |x: &[f64], y: &mut [f64]| {
            let u = VecField {
                c1: field_from(mesh, &x[..n]),
                c2: field_from(mesh, &x[n..]),
            };
            let div_u = ops::div_cells(mesh, &u, &odd);
            let grad_div = ops::grad_cells(mesh, &div_u, &even);
            for (c, comp) in [&u.c1, &u.c2].into_iter().enumerate() {
                let mut w = comp.clone();
                for k in 0..n {
                    w.data[k] *= rho_new.data[k];
                }
                let conv = flux_div(mesh, &w, &uf1, &uf2, h_eps);
                let lap = ops::laplace_cells(mesh, comp, &odd);
                let gd = if c == 0 { &grad_div.c1 } else { &grad_div.c2 };
                for k in 0..n {
                    y[c * n + k] = rho_new.data[k] * comp.data[k] / dt + conv.data[k]
                        - phys.mu * lap.data[k]
                        - phys.nu() * gd.data[k];
                }
            }
        };
        let p = ScalarField {
            nx1: mesh.nx1,
            nx2: mesh.nx2,
            data: rho_new.data.iter().map(|&r| phys.pressure(r)).collect(),
        };
        let grad_p = ops::grad_cells(mesh, &p, &even);
        let b_bc = WallBc::mirror(phys.b_minus, phys.b_plus);
        let s = ops::curl_vec(mesh, &iterate.b, &b_bc);
        let mut rhs = vec![0.0; 2 * n];
        for k in 0..n {
            rhs[k] = prev.rho.data[k] * prev.u.c1.data[k] / dt - grad_p.c1.data[k]
                - s.data[k] * iterate.b.c2.data[k]
                + rho_new.data[k] * phys.g.0;
            rhs[n + k] = prev.rho.data[k] * prev.u.c2.data[k] / dt - grad_p.c2.data[k]
                + s.data[k] * iterate.b.c1.data[k]
                + rho_new.data[k] * phys.g.1;
        }
        let mut x = vec![0.0; 2 * n];
        x[..n].copy_from_slice(&iterate.u.c1.data);
        x[n..].copy_from_slice(&iterate.u.c2.data);
        lin_iters += solve_sub(&op, &rhs, &mut x, mesh, 2, num)?;
        VecField {
            c1: field_from(mesh, &x[..n]),
            c2: field_from(mesh, &x[n..]),
        }
    };

    // induction
    let b_new = {
        let op = |x: &[f64], y: &mut [f64]| {
            let b = VecField {
                c1: field_from(mesh, &x[..n]),
                c2: field_from(mesh, &x[n..]),
            };
            let mut f = ops::curl_vec(mesh, &b, &odd);
            for k in 0..n {
                f.data[k] = u_new.c1.data[k] * b.c2.data[k]
                    - u_new.c2.data[k] * b.c1.data[k]
                    - phys.zeta * f.data[k];
            }
            let cf = ops::curl_scal(mesh, &f, &even);
            for k in 0..n {
                y[k] = x[k] / dt - cf.c1.data[k];
                y[n + k] = x[n + k] / dt - cf.c2.data[k];
            }
        };
        let mut aff = curl_affine_part(mesh, phys);
        aff.data.iter_mut().for_each(|v| *v *= -phys.zeta);
        let cf_aff = ops::curl_scal(mesh, &aff, &even);
        let mut rhs = vec![0.0; 2 * n];
        for k in 0..n {
            rhs[k] = prev.b.c1.data[k] / dt + cf_aff.c1.data[k];
            rhs[n + k] = prev.b.c2.data[k] / dt + cf_aff.c2.data[k];
        }
        let mut x = vec![0.0; 2 * n];
        x[..n].copy_from_slice(&iterate.b.c1.data);
        x[n..].copy_from_slice(&iterate.b.c2.data);
        lin_iters += solve_sub(&op, &rhs, &mut x, mesh, 2, num)?;
        VecField {
            c1: field_from(mesh, &x[..n]),
            c2: field_from(mesh, &x[n..]),
        }
    };

    Ok((State { rho: rho_new, u: u_new, b: b_new }, lin_iters))
}

fn joint_increment(mesh: &Mesh, new: &State, old: &State) -> f64 {
    let area = mesh.cell_area();
    let mut num = 0.0;
    let mut den = 0.0;
    let comps = [
        (&new.rho, &old.rho),
        (&new.u.c1, &old.u.c1),
        (&new.u.c2, &old.u.c2),
        (&new.b.c1, &old.b.c1),
        (&new.b.c2, &old.b.c2),
    ];
    for (a, b) in comps {
        for k in 0..a.data.len() {
            num += (a.data[k] - b.data[k]).powi(2);
            den += a.data[k].powi(2);
        }
    }
    (area * num).sqrt() / ((area * den).sqrt() + 1e-300)
}

/// One accepted backward Euler step of size `dt`. Iterates Picard sweeps to
/// the joint relative increment tolerance.
pub fn advance(
    mesh: &Mesh,
    prev: &State,
    t: f64,
    dt: f64,
    phys: &PhysParams,
    num: &NumParams,
) -> Result<(State, StepReport), SchemeError> {
    let mut iterate = prev.clone();
    let mut lin_total = 0;
    let mut increment = f64::INFINITY;
    let mut iters = 0;
    for m in 1..=num.picard_max {
        let (next, li) = picard_sweep(mesh, &iterate, prev, dt, phys, num)?;
        lin_total += li;
        increment = joint_increment(mesh, &next, &iterate);
        iterate = next;
        iters = m;
        if increment <= num.picard_tol {
            break;
        }
        if m == num.picard_max {
            return Err(SchemeError::PicardDiverged { iters: m, increment });
        }
    }
    let bref = crate::physics::wall_extension_field(mesh, phys);
    let bal = crate::diag::energy_residual(mesh, prev, &iterate, dt, phys, num);
    let report = StepReport {
        t: t + dt,
        dt,
        picard_iters: iters,
        increment,
        lin_iters: lin_total,
        mass_before: prev.rho.integral(mesh),
        mass_after: iterate.rho.integral(mesh),
        min_density: iterate.rho.min(),
        div_b_max: ops::div_cells(mesh, &iterate.b, &WallBc::even()).max_abs(),
        energy: crate::physics::total_energy(mesh, &iterate, &bref.field, phys),
        energy_residual: bal.residual,
        halvings: 0,
    };
    Ok((iterate, report))
}

/// Full time integration to `t_final`. The nominal step is dt_factor * h.
/// On a Picard failure the step is halved (up to three times); after five
/// clean steps the step is doubled back toward the nominal value. The
/// observer sees every accepted step.
pub fn run(
    mesh: &Mesh,
    initial: &State,
    phys: &PhysParams,
    num: &NumParams,
    t_final: f64,
    mut observer: impl FnMut(usize, f64, &State, &StepReport),
) -> Result<(State, Vec<StepReport>), SchemeError> {
    let nominal = num.dt_factor * mesh.h;
    let mut state = initial.clone();
    let mut t = 0.0;
    let mut dt_cur = nominal;
    let mut clean = 0usize;
    let mut reports = Vec::new();
    let mut step = 0usize;
    while t < t_final - 1e-12 * t_final.max(1.0) {
        let dt = dt_cur.min(t_final - t);
        let mut halvings = 0usize;
        let mut dt_try = dt;
        let (next, mut report) = loop {
            match advance(mesh, &state, t, dt_try, phys, num) {
                Ok(out) => break out,
                Err(SchemeError::PicardDiverged { .. })
                | Err(SchemeError::PositivityLost { .. })
                    if halvings < 3 =>
                {
                    halvings += 1;
                    dt_try *= 0.5;
                    clean = 0;
                }
                Err(SchemeError::PicardDiverged { .. })
                | Err(SchemeError::PositivityLost { .. }) => {
                    return Err(SchemeError::StepFailed { t, halvings });
                }
                Err(e) => return Err(e),
            }
        };
        if halvings > 0 {
            dt_cur = dt_try;
        }
        report.halvings = halvings;
        t += dt_try;
        step += 1;
        clean += 1;
        if clean >= 5 && dt_cur < nominal {
            dt_cur = (2.0 * dt_cur).min(nominal);
            clean = 0;
        }
        observer(step, t, &next, &report);
        reports.push(report);
        state = next;
    }
    Ok((state, reports))
}
