//! Projections of analytic data onto the discrete spaces: cell means,
//! face/dual-cell means, and the line-average magnetic projection whose
//! image is discretely divergence-free.

use crate::field::{FaceField, ScalarField, VecField};
use crate::mesh::Mesh;

// 5-point Gauss-Legendre rule on [-1, 1]
const GL_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_W: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Mean of f over the interval [a, b].
fn line_mean(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W) {
        s += w * f(mid + half * x);
    }
    0.5 * s
}

/// Mean of f over the rectangle [a1, b1] x [a2, b2].
fn rect_mean(a1: f64, b1: f64, a2: f64, b2: f64, f: &impl Fn(f64, f64) -> f64) -> f64 {
    let m1 = 0.5 * (a1 + b1);
    let h1 = 0.5 * (b1 - a1);
    let m2 = 0.5 * (a2 + b2);
    let h2 = 0.5 * (b2 - a2);
    let mut s = 0.0;
    for (x, wx) in GL_X.iter().zip(GL_W) {
        for (y, wy) in GL_X.iter().zip(GL_W) {
            s += wx * wy * f(m1 + h1 * x, m2 + h2 * y);
        }
    }
    0.25 * s
}

/// Pi_Q: cell means of an analytic scalar field.
pub fn project_cell_mean(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> ScalarField {
    let h = 0.5 * mesh.h;
    ScalarField::from_fn(mesh, |i, j| {
        let (xc, yc) = mesh.cell_center(i, j);
        rect_mean(xc - h, xc + h, yc - h, yc + h, &f)
    })
}

pub fn project_cell_mean_vec(
    mesh: &Mesh,
    f1: impl Fn(f64, f64) -> f64,
    f2: impl Fn(f64, f64) -> f64,
) -> VecField {
    VecField {
        c1: project_cell_mean(mesh, f1),
        c2: project_cell_mean(mesh, f2),
    }
}

/// Image of the divergence-free projection Pi_B: the projected cell field
/// plus the ghost-row line averages of the wall-normal component, which are
/// what make the discrete divergence vanish on the boundary rows.
#[derive(Debug, Clone)]
pub struct ProjectedB {
    pub field: VecField,
    pub b2_ghost_bottom: Vec<f64>,
    pub b2_ghost_top: Vec<f64>,
}

/// Pi_B: component i is averaged over the length-2h segment through the cell
/// center orthogonal to e_i. Near-wall segments of the first component extend
/// past the wall and evaluate the analytic expression there; the ghost rows
/// of the second component are averaged one cell spacing beyond each wall.
pub fn project_line_avg(
    mesh: &Mesh,
    b1: impl Fn(f64, f64) -> f64,
    b2: impl Fn(f64, f64) -> f64,
) -> ProjectedB {
    let h = mesh.h;
    // composite two-panel Gauss over the 2h segment, split at the midpoint
    let seg = |a: f64, b: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        let mid = 0.5 * (a + b);
        0.5 * (line_mean(a, mid, f) + line_mean(mid, b, f))
    };
    let c1 = ScalarField::from_fn(mesh, |i, j| {
        let (xc, yc) = mesh.cell_center(i, j);
        seg(yc - h, yc + h, &|y| b1(xc, y))
    });
    let row2 = |yc: f64| -> Vec<f64> {
        (0..mesh.nx1)
            .map(|i| {
                let xc = mesh.x1a + (i as f64 + 0.5) * h;
                seg(xc - h, xc + h, &|x| b2(x, yc))
            })
            .collect()
    };
    let mut c2 = ScalarField::zeros(mesh);
    for j in 0..mesh.nx2 {
        let yc = mesh.x2a + (j as f64 + 0.5) * h;
        let row = row2(yc);
        for (i, v) in row.into_iter().enumerate() {
            c2.set(i, j, v);
        }
    }
    ProjectedB {
        field: VecField { c1, c2 },
        b2_ghost_bottom: row2(mesh.x2a - 0.5 * h),
        b2_ghost_top: row2(mesh.x2b + 0.5 * h),
    }
}

impl ProjectedB {
    /// Discrete divergence of the projected field, wall traces taken from the
    /// analytic ghost rows (this is the quantity the projection lemma
    /// annihilates).
    pub fn div(&self, mesh: &Mesh) -> ScalarField {
        use crate::field::{GhostSpec, WallBc};
        let bc2 = WallBc {
            bottom: GhostSpec::Rows(&self.b2_ghost_bottom),
            top: GhostSpec::Rows(&self.b2_ghost_top),
        };
        crate::ops::div_cells(mesh, &self.field, &bc2)
    }
}

/// Pi_E: face means of an analytic scalar field for one face family.
pub fn project_face_mean(mesh: &Mesh, f: impl Fn(f64, f64) -> f64, dir: u8) -> FaceField {
    let h = mesh.h;
    let mut out = FaceField::zeros(mesh, dir);
    match dir {
        1 => {
            for j in 0..mesh.nx2 {
                let y0 = mesh.x2a + j as f64 * h;
                for i in 0..mesh.nx1 {
                    let x = mesh.x1a + (i as f64 + 1.0) * h;
                    out.set(i, j, line_mean(y0, y0 + h, |y| f(x, y)));
                }
            }
        }
        2 => {
            for j in 0..=mesh.nx2 {
                let y = mesh.x2a + j as f64 * h;
                for i in 0..mesh.nx1 {
                    let x0 = mesh.x1a + i as f64 * h;
                    out.set(i, j, line_mean(x0, x0 + h, |x| f(x, y)));
                }
            }
        }
        _ => panic!("direction must be 1 or 2"),
    }
    out
}

/// Pi_W: dual-cell means (wall dual cells are half cells inside the domain).
pub fn project_dual_mean(mesh: &Mesh, f: impl Fn(f64, f64) -> f64, dir: u8) -> FaceField {
    let h = mesh.h;
    let mut out = FaceField::zeros(mesh, dir);
    match dir {
        1 => {
            for j in 0..mesh.nx2 {
                let y0 = mesh.x2a + j as f64 * h;
                for i in 0..mesh.nx1 {
                    let x = mesh.x1a + (i as f64 + 1.0) * h;
                    out.set(i, j, rect_mean(x - 0.5 * h, x + 0.5 * h, y0, y0 + h, &f));
                }
            }
        }
        2 => {
            for j in 0..=mesh.nx2 {
                let y = mesh.x2a + j as f64 * h;
                let (ylo, yhi) = (
                    (y - 0.5 * h).max(mesh.x2a),
                    (y + 0.5 * h).min(mesh.x2b),
                );
                for i in 0..mesh.nx1 {
                    let x0 = mesh.x1a + i as f64 * h;
                    out.set(i, j, rect_mean(x0, x0 + h, ylo, yhi, &f));
                }
            }
        }
        _ => panic!("direction must be 1 or 2"),
    }
    out
}
