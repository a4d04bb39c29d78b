//! Discrete differential operators on the uniform grid.
//!
//! All cell-centered operators (gradient, divergence, curl, Laplacian) are
//! face-average stencils; on the uniform grid they reduce to central
//! differences over 2h (Laplacian: 5-point over h^2) with ghost values
//! supplied by the wall rules. Face-centered gradients are jumps over h on
//! the dual grid. The diffusive upwind flux lives here as well.

use crate::field::{FaceField, ScalarField, VecField, WallBc};
use crate::mesh::Mesh;

/// Up[r, u] at a face: upwind value times face velocity, ties (u = 0) take
/// the inflow-side value r_in.
#[inline]
pub fn upwind(r_in: f64, r_out: f64, u_sigma: f64) -> f64 {
    if u_sigma >= 0.0 {
        r_in * u_sigma
    } else {
        r_out * u_sigma
    }
}

/// Diffusive upwind flux F_h^eps = Up[r, u] - h^eps [[r]].
#[inline]
pub fn diffusive_flux(r_in: f64, r_out: f64, u_sigma: f64, h_eps: f64) -> f64 {
    upwind(r_in, r_out, u_sigma) - h_eps * (r_out - r_in)
}

/// Face-normal velocities <u>.n on both face families. Exterior (wall) faces
/// get exactly zero (the impermeability condition <u> = 0).
pub fn face_velocities(mesh: &Mesh, u: &VecField) -> (FaceField, FaceField) {
    let mut f1 = FaceField::zeros(mesh, 1);
    let mut f2 = FaceField::zeros(mesh, 2);
    for j in 0..mesh.nx2 {
        for i in 0..mesh.nx1 {
            let ip = if i + 1 == mesh.nx1 { 0 } else { i + 1 };
            f1.set(i, j, 0.5 * (u.c1.get(i, j) + u.c1.get(ip, j)));
        }
    }
    for j in 1..mesh.nx2 {
        for i in 0..mesh.nx1 {
            f2.set(i, j, 0.5 * (u.c2.get(i, j - 1) + u.c2.get(i, j)));
        }
    }
    (f1, f2)
}

/// Face gradient [[f]]/h in direction `dir` (the operator onto the dual grid).
/// Orientation: jump = out - in with the normal along +e_dir, so wall rows of
/// the direction-2 family use the ghost value as the outside trace at the top
/// and the inside trace at the bottom.
pub fn grad_faces(mesh: &Mesh, f: &ScalarField, bc: &WallBc, dir: u8) -> FaceField {
    let h = mesh.h;
    let mut out = FaceField::zeros(mesh, dir);
    match dir {
        1 => {
            for j in 0..mesh.nx2 {
                for i in 0..mesh.nx1 {
                    let ip = if i + 1 == mesh.nx1 { 0 } else { i + 1 };
                    out.set(i, j, (f.get(ip, j) - f.get(i, j)) / h);
                }
            }
        }
        2 => {
            for j in 0..=mesh.nx2 {
                for i in 0..mesh.nx1 {
                    let lo = f.at(i as isize, j as isize - 1, bc);
                    let hi = f.at(i as isize, j as isize, bc);
                    out.set(i, j, (hi - lo) / h);
                }
            }
        }
        _ => panic!("direction must be 1 or 2"),
    }
    out
}

/// Cell gradient via face averages; central over 2h with ghosts.
pub fn grad_cells(mesh: &Mesh, f: &ScalarField, bc: &WallBc) -> VecField {
    let h2 = 2.0 * mesh.h;
    let mut g = VecField::zeros(mesh);
    for j in 0..mesh.nx2 {
        let js = j as isize;
        for i in 0..mesh.nx1 {
            let is = i as isize;
            g.c1.set(i, j, (f.at(is + 1, js, bc) - f.at(is - 1, js, bc)) / h2);
            g.c2.set(i, j, (f.at(is, js + 1, bc) - f.at(is, js - 1, bc)) / h2);
        }
    }
    g
}

/// Cell divergence via face averages. Only the wall rule of the normal
/// component (c2) matters; the jump-free rule `WallBc::even()` realizes
/// n.[[B]] = 0, `WallBc::odd()` realizes <v>.n = 0.
pub fn div_cells(mesh: &Mesh, v: &VecField, bc2: &WallBc) -> ScalarField {
    let h2 = 2.0 * mesh.h;
    let mut d = ScalarField::zeros(mesh);
    for j in 0..mesh.nx2 {
        let js = j as isize;
        for i in 0..mesh.nx1 {
            let is = i as isize;
            let t1 = (v.c1.at(is + 1, js, &WallBc::even()) - v.c1.at(is - 1, js, &WallBc::even())) / h2;
            let t2 = (v.c2.at(is, js + 1, bc2) - v.c2.at(is, js - 1, bc2)) / h2;
            d.set(i, j, t1 + t2);
        }
    }
    d
}

/// Scalar curl of a vector field in 2D: curl v = d1 v2 - d2 v1.
/// `bc1` supplies the wall traces of the tangential component v1.
pub fn curl_vec(mesh: &Mesh, v: &VecField, bc1: &WallBc) -> ScalarField {
    let h2 = 2.0 * mesh.h;
    let mut c = ScalarField::zeros(mesh);
    for j in 0..mesh.nx2 {
        let js = j as isize;
        for i in 0..mesh.nx1 {
            let is = i as isize;
            let d1v2 = (v.c2.at(is + 1, js, &WallBc::even()) - v.c2.at(is - 1, js, &WallBc::even())) / h2;
            let d2v1 = (v.c1.at(is, js + 1, bc1) - v.c1.at(is, js - 1, bc1)) / h2;
            c.set(i, j, d1v2 - d2v1);
        }
    }
    c
}

/// Vector curl of a scalar field in 2D: curl s = (d2 s, -d1 s).
pub fn curl_scal(mesh: &Mesh, s: &ScalarField, bc: &WallBc) -> VecField {
    let h2 = 2.0 * mesh.h;
    let mut v = VecField::zeros(mesh);
    for j in 0..mesh.nx2 {
        let js = j as isize;
        for i in 0..mesh.nx1 {
            let is = i as isize;
            v.c1.set(i, j, (s.at(is, js + 1, bc) - s.at(is, js - 1, bc)) / h2);
            v.c2.set(i, j, -(s.at(is + 1, js, bc) - s.at(is - 1, js, bc)) / h2);
        }
    }
    v
}

/// Cell Laplacian: sum of face jumps over h^2 (5-point stencil with ghosts).
pub fn laplace_cells(mesh: &Mesh, f: &ScalarField, bc: &WallBc) -> ScalarField {
    let hh = mesh.h * mesh.h;
    let mut l = ScalarField::zeros(mesh);
    for j in 0..mesh.nx2 {
        let js = j as isize;
        for i in 0..mesh.nx1 {
            let is = i as isize;
            let c = f.get(i, j);
            let s = f.at(is + 1, js, bc) + f.at(is - 1, js, bc) + f.at(is, js + 1, bc)
                + f.at(is, js - 1, bc)
                - 4.0 * c;
            l.set(i, j, s / hh);
        }
    }
    l
}

/// Full face gradient of a vector field: [[u_c]]/h per direction and
/// component; its dual L2 norm is the discrete H1 seminorm in the energy
/// balance.
#[derive(Debug, Clone)]
pub struct FaceGrad {
    pub d: [[FaceField; 2]; 2], // d[dir-1][comp-1]
}

pub fn grad_faces_vec(mesh: &Mesh, u: &VecField, bc1: &WallBc, bc2: &WallBc) -> FaceGrad {
    FaceGrad {
        d: [
            [grad_faces(mesh, &u.c1, bc1, 1), grad_faces(mesh, &u.c2, bc2, 1)],
            [grad_faces(mesh, &u.c1, bc1, 2), grad_faces(mesh, &u.c2, bc2, 2)],
        ],
    }
}

impl FaceGrad {
    pub fn dual_l2_sq(&self, mesh: &Mesh) -> f64 {
        self.d.iter().flatten().map(|f| f.dual_l2_sq(mesh)).sum()
    }
}

/// Integral of the pointwise dot product of two vector cell fields.
pub fn dot_integral(mesh: &Mesh, a: &VecField, b: &VecField) -> f64 {
    let terms: Vec<f64> = a
        .c1
        .data
        .iter()
        .zip(&b.c1.data)
        .zip(a.c2.data.iter().zip(&b.c2.data))
        .map(|((a1, b1), (a2, b2))| a1 * b1 + a2 * b2)
        .collect();
    mesh.cell_area() * crate::field::pairwise_sum(&terms)
}

/// Integral of the product of two scalar cell fields.
pub fn mul_integral(mesh: &Mesh, a: &ScalarField, b: &ScalarField) -> f64 {
    let terms: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    mesh.cell_area() * crate::field::pairwise_sum(&terms)
}
