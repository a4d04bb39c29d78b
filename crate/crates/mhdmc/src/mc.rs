//! Monte Carlo harness: terminal-time observables, ensemble statistics,
//! reference builds and the E1/E2 error studies.

use crate::diag;
use crate::field::{pairwise_sum, FaceField, ScalarField, VecField, WallBc};
use crate::mesh::Mesh;
use crate::ops::{self, FaceGrad};
use crate::physics::State;
use crate::scheme::{self, NumParams, SchemeError};
use crate::stochastic::{ExperimentSpec, SampleId, StochError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Reference samples live in their own repetition namespace so study samples
/// never alias them.
pub const REFERENCE_REP: u32 = u32::MAX;

#[derive(Debug, Error)]
pub enum McError {
    #[error("sample (rep {rep}, index {index}) failed: {source}")]
    Sample {
        rep: u32,
        index: u32,
        source: SchemeError,
    },
    #[error("experiment error: {0}")]
    Stoch(#[from] StochError),
    #[error("mesh error: {0}")]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("reference grid {have} does not refine the study grid {want}")]
    NotNested { have: usize, want: usize },
}

/// Terminal-time fields entering the error estimators.
#[derive(Debug, Clone)]
pub struct Observables {
    pub rho: ScalarField,
    pub momentum: VecField,
    pub b: VecField,
    pub u: VecField,
    pub grad_u: FaceGrad,
    pub curl_b: ScalarField,
}

impl Observables {
    pub fn from_state(mesh: &Mesh, state: &State, b_minus: f64, b_plus: f64) -> Self {
        let odd = WallBc::odd();
        let mut momentum = state.u.clone();
        for k in 0..mesh.ncells() {
            momentum.c1.data[k] *= state.rho.data[k];
            momentum.c2.data[k] *= state.rho.data[k];
        }
        Observables {
            rho: state.rho.clone(),
            momentum,
            b: state.b.clone(),
            u: state.u.clone(),
            grad_u: ops::grad_faces_vec(mesh, &state.u, &odd, &odd),
            curl_b: ops::curl_vec(mesh, &state.b, &WallBc::mirror(b_minus, b_plus)),
        }
    }

    fn parts(&self) -> [&[f64]; 12] {
        [
            &self.rho.data,
            &self.momentum.c1.data,
            &self.momentum.c2.data,
            &self.b.c1.data,
            &self.b.c2.data,
            &self.u.c1.data,
            &self.u.c2.data,
            &self.grad_u.d[0][0].data,
            &self.grad_u.d[0][1].data,
            &self.grad_u.d[1][0].data,
            &self.grad_u.d[1][1].data,
            &self.curl_b.data,
        ]
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in self.parts() {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn fill_from_flat(&mut self, flat: &[f64]) {
        fn take(dst: &mut [f64], flat: &[f64], off: &mut usize) {
            let n = dst.len();
            dst.copy_from_slice(&flat[*off..*off + n]);
            *off += n;
        }
        let mut off = 0;
        take(&mut self.rho.data, flat, &mut off);
        take(&mut self.momentum.c1.data, flat, &mut off);
        take(&mut self.momentum.c2.data, flat, &mut off);
        take(&mut self.b.c1.data, flat, &mut off);
        take(&mut self.b.c2.data, flat, &mut off);
        take(&mut self.u.c1.data, flat, &mut off);
        take(&mut self.u.c2.data, flat, &mut off);
        for i in 0..2 {
            for d in 0..2 {
                take(&mut self.grad_u.d[i][d].data, flat, &mut off);
            }
        }
        take(&mut self.curl_b.data, flat, &mut off);
        assert_eq!(off, flat.len());
    }
}

/// Slot-ordered pairwise mean of a set of observables; the reduction order is
/// fixed by the sample index, so results do not depend on thread count.
pub fn ensemble_mean(samples: &[Observables]) -> Observables {
    assert!(!samples.is_empty());
    let mut out = samples[0].clone();
    let flats: Vec<Vec<f64>> = samples.iter().map(|s| s.flatten()).collect();
    let n = flats[0].len();
    let inv = 1.0 / samples.len() as f64;
    let mut mean = vec![0.0; n];
    let mut vals = vec![0.0; samples.len()];
    for k in 0..n {
        for (j, f) in flats.iter().enumerate() {
            vals[j] = f[k];
        }
        mean[k] = pairwise_sum(&vals) * inv;
    }
    out.fill_from_flat(&mean);
    out
}

/// Pointwise mean absolute deviation about a given center field.
pub fn ensemble_mad(samples: &[Observables], center: &Observables) -> Observables {
    assert!(!samples.is_empty());
    let mut out = samples[0].clone();
    let flats: Vec<Vec<f64>> = samples.iter().map(|s| s.flatten()).collect();
    let c = center.flatten();
    let n = c.len();
    let inv = 1.0 / samples.len() as f64;
    let mut mad = vec![0.0; n];
    let mut vals = vec![0.0; samples.len()];
    for k in 0..n {
        for (j, f) in flats.iter().enumerate() {
            vals[j] = (f[k] - c[k]).abs();
        }
        mad[k] = pairwise_sum(&vals) * inv;
    }
    out.fill_from_flat(&mad);
    out
}

pub fn restrict_observables(fine: &Mesh, coarse: &Mesh, o: &Observables) -> Observables {
    Observables {
        rho: diag::restrict_cell(fine, coarse, &o.rho),
        momentum: diag::restrict_vec(fine, coarse, &o.momentum),
        b: diag::restrict_vec(fine, coarse, &o.b),
        u: diag::restrict_vec(fine, coarse, &o.u),
        grad_u: diag::restrict_face_grad(fine, coarse, &o.grad_u),
        curl_b: diag::restrict_cell(fine, coarse, &o.curl_b),
    }
}

/// Energy-space norms of the difference of two observable sets: L^gamma for
/// the density, L^{2 gamma/(gamma+1)} for the momentum, L^2 elsewhere with
/// the dual-cell norm for the velocity gradient.
pub fn observable_diff_norms(mesh: &Mesh, a: &Observables, b: &Observables, gamma: f64) -> [f64; 6] {
    let ds = |x: &ScalarField, y: &ScalarField| ScalarField {
        nx1: x.nx1,
        nx2: x.nx2,
        data: x.data.iter().zip(&y.data).map(|(p, q)| p - q).collect(),
    };
    let dv = |x: &VecField, y: &VecField| VecField {
        c1: ds(&x.c1, &y.c1),
        c2: ds(&x.c2, &y.c2),
    };
    let pm = 2.0 * gamma / (gamma + 1.0);
    let mut gsq = 0.0;
    for i in 0..2 {
        for d in 0..2 {
            let diff = FaceField {
                dir: a.grad_u.d[i][d].dir,
                nx1: a.grad_u.d[i][d].nx1,
                nx2: a.grad_u.d[i][d].nx2,
                data: a.grad_u.d[i][d]
                    .data
                    .iter()
                    .zip(&b.grad_u.d[i][d].data)
                    .map(|(p, q)| p - q)
                    .collect(),
            };
            gsq += diff.dual_l2_sq(mesh);
        }
    }
    [
        ds(&a.rho, &b.rho).lp_norm(mesh, gamma),
        dv(&a.momentum, &b.momentum).lp_norm(mesh, pm),
        dv(&a.b, &b.b).lp_norm(mesh, 2.0),
        dv(&a.u, &b.u).lp_norm(mesh, 2.0),
        gsq.sqrt(),
        ds(&a.curl_b, &b.curl_b).lp_norm(mesh, 2.0),
    ]
}

fn run_sample(
    spec: &ExperimentSpec,
    mesh: &Mesh,
    id: SampleId,
    num: &NumParams,
    t_final: f64,
) -> Result<Observables, McError> {
    let wrap = |source: SchemeError| McError::Sample {
        rep: id.rep,
        index: id.index,
        source,
    };
    let y = spec.draw(id);
    let phys = spec.phys(y);
    let init = spec.realize_initial_state(y, mesh)?;
    let (state, _) =
        scheme::run(mesh, &init, &phys, num, t_final, |_, _, _, _| {}).map_err(wrap)?;
    Ok(Observables::from_state(mesh, &state, phys.b_minus, phys.b_plus))
}

/// Runs `ids` to the experiment's final time in parallel; the output order
/// matches the input order regardless of scheduling.
pub fn run_ensemble(
    spec: &ExperimentSpec,
    mesh: &Mesh,
    ids: &[SampleId],
    num: &NumParams,
) -> Result<Vec<Observables>, McError> {
    ids.par_iter()
        .map(|&id| run_sample(spec, mesh, id, num, spec.t_final))
        .collect()
}

/// Mean and mean-absolute-deviation reference statistics on the fine grid.
#[derive(Debug, Clone)]
pub struct Reference {
    pub nx: usize,
    pub m_ref: usize,
    pub master_seed: u64,
    pub mean: Observables,
    pub dev: Observables,
}

pub fn build_reference(
    spec: &ExperimentSpec,
    nx_ref: usize,
    m_ref: usize,
    master_seed: u64,
    num: &NumParams,
) -> Result<Reference, McError> {
    assert!(m_ref >= 1);
    let mesh = spec.mesh(nx_ref)?;
    let ids: Vec<SampleId> = (0..m_ref as u32)
        .map(|index| SampleId {
            master_seed,
            rep: REFERENCE_REP,
            index,
        })
        .collect();
    let samples = run_ensemble(spec, &mesh, &ids, num)?;
    let mean = ensemble_mean(&samples);
    let dev = ensemble_mad(&samples, &mean);
    Ok(Reference {
        nx: nx_ref,
        m_ref,
        master_seed,
        mean,
        dev,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StatErrorRow {
    pub n: usize,
    pub e1: [f64; 6],
    pub e2: [f64; 6],
}

/// E1/E2 statistical errors at a fixed grid for each sample count in
/// `n_list`, averaged over `l` repetitions. Sample draws are nested across
/// the entries of `n_list` (index n is the same sample in every prefix).
pub fn statistical_error_study(
    spec: &ExperimentSpec,
    nx: usize,
    n_list: &[usize],
    l: usize,
    reference: &Reference,
    num: &NumParams,
) -> Result<Vec<StatErrorRow>, McError> {
    let mesh = spec.mesh(nx)?;
    let ref_mesh = spec.mesh(reference.nx)?;
    if mesh.nesting_factor(&ref_mesh).is_none() {
        return Err(McError::NotNested {
            have: reference.nx,
            want: nx,
        });
    }
    let ref_mean = restrict_observables(&ref_mesh, &mesh, &reference.mean);
    let ref_dev = restrict_observables(&ref_mesh, &mesh, &reference.dev);
    let n_max = *n_list.iter().max().expect("n_list must not be empty");
    let mut acc1 = vec![[0.0f64; 6]; n_list.len()];
    let mut acc2 = vec![[0.0f64; 6]; n_list.len()];
    for rep in 0..l as u32 {
        let ids: Vec<SampleId> = (0..n_max as u32)
            .map(|index| SampleId {
                master_seed: reference.master_seed,
                rep,
                index,
            })
            .collect();
        let samples = run_ensemble(spec, &mesh, &ids, num)?;
        for (row, &n) in n_list.iter().enumerate() {
            let mean = ensemble_mean(&samples[..n]);
            let mad = ensemble_mad(&samples[..n], &mean);
            let e1 = observable_diff_norms(&mesh, &mean, &ref_mean, spec.gamma);
            let e2 = observable_diff_norms(&mesh, &mad, &ref_dev, spec.gamma);
            for c in 0..6 {
                acc1[row][c] += e1[c];
                acc2[row][c] += e2[c];
            }
        }
    }
    Ok(n_list
        .iter()
        .enumerate()
        .map(|(row, &n)| {
            let mut e1 = acc1[row];
            let mut e2 = acc2[row];
            for c in 0..6 {
                e1[c] /= l as f64;
                e2[c] /= l as f64;
            }
            StatErrorRow { n, e1, e2 }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct TotalErrorRow {
    pub nx: usize,
    pub h: f64,
    pub n: usize,
    pub e1: [f64; 6],
    pub e2: [f64; 6],
}

/// Coupled (h, N) schedule: one row per schedule point, L repetitions each.
pub fn total_error_study(
    spec: &ExperimentSpec,
    schedule: &[(usize, usize)],
    l: usize,
    reference: &Reference,
    num: &NumParams,
) -> Result<Vec<TotalErrorRow>, McError> {
    let mut rows = Vec::new();
    for &(nx, n) in schedule {
        let res = statistical_error_study(spec, nx, &[n], l, reference, num)?;
        let mesh = spec.mesh(nx)?;
        rows.push(TotalErrorRow {
            nx,
            h: mesh.h,
            n,
            e1: res[0].e1,
            e2: res[0].e2,
        });
    }
    Ok(rows)
}

/// Least-squares slope of ln(y) against ln(x).
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub observables: [&'static str; 6],
    pub e1_slopes: [f64; 6],
    pub e2_slopes: [f64; 6],
}

pub fn rate_report(rows: &[StatErrorRow]) -> RateReport {
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let mut e1_slopes = [0.0; 6];
    let mut e2_slopes = [0.0; 6];
    for c in 0..6 {
        let y1: Vec<f64> = rows.iter().map(|r| r.e1[c]).collect();
        let y2: Vec<f64> = rows.iter().map(|r| r.e2[c]).collect();
        e1_slopes[c] = fit_loglog_slope(&ns, &y1);
        e2_slopes[c] = fit_loglog_slope(&ns, &y2);
    }
    RateReport {
        observables: diag::OBSERVABLE_NAMES,
        e1_slopes,
        e2_slopes,
    }
}
