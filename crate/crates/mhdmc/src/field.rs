//! Piecewise-constant cell and face fields with wall ghost rules.
//!
//! A `ScalarField` holds one value per cell. Values in the fictitious ghost
//! rows beyond the x2 walls are never stored; they are produced on demand
//! from a `GhostSpec`:
//! - `Odd`: ghost = -inner (zero face average, e.g. velocity components)
//! - `Even`: ghost = inner (zero face jump, e.g. pressure, div u)
//! - `Mirror(b)`: ghost = 2b - inner (prescribed face average b, e.g. the
//!   tangential magnetic component with wall data)
//! - `Rows`: explicit ghost rows (used by the projection tests where the
//!   ghost value is a line average of an analytic extension)

use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy)]
pub enum GhostSpec<'a> {
    Odd,
    Even,
    Mirror(f64),
    Rows(&'a [f64]),
}

/// Ghost rules at the two walls for one scalar component.
#[derive(Debug, Clone, Copy)]
pub struct WallBc<'a> {
    pub bottom: GhostSpec<'a>,
    pub top: GhostSpec<'a>,
}

impl<'a> WallBc<'a> {
    pub fn both(spec: GhostSpec<'a>) -> Self {
        WallBc { bottom: spec, top: spec }
    }
    pub fn odd() -> WallBc<'static> {
        WallBc { bottom: GhostSpec::Odd, top: GhostSpec::Odd }
    }
    pub fn even() -> WallBc<'static> {
        WallBc { bottom: GhostSpec::Even, top: GhostSpec::Even }
    }
    pub fn mirror(b_bottom: f64, b_top: f64) -> WallBc<'static> {
        WallBc { bottom: GhostSpec::Mirror(b_bottom), top: GhostSpec::Mirror(b_top) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub nx1: usize,
    pub nx2: usize,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(mesh: &Mesh) -> Self {
        ScalarField { nx1: mesh.nx1, nx2: mesh.nx2, data: vec![0.0; mesh.ncells()] }
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        ScalarField { nx1: mesh.nx1, nx2: mesh.nx2, data: vec![c; mesh.ncells()] }
    }

    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(mesh.ncells());
        for j in 0..mesh.nx2 {
            for i in 0..mesh.nx1 {
                data.push(f(i, j));
            }
        }
        ScalarField { nx1: mesh.nx1, nx2: mesh.nx2, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx1 + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx1 + i] = v;
    }

    /// Value at (i, j) with periodic wrap in i and ghost rules in j.
    /// Only j = -1 and j = nx2 are meaningful outside the range.
    pub fn at(&self, i: isize, j: isize, bc: &WallBc) -> f64 {
        let n1 = self.nx1 as isize;
        let i = (((i % n1) + n1) % n1) as usize;
        if j < 0 {
            debug_assert_eq!(j, -1);
            match bc.bottom {
                GhostSpec::Odd => -self.get(i, 0),
                GhostSpec::Even => self.get(i, 0),
                GhostSpec::Mirror(b) => 2.0 * b - self.get(i, 0),
                GhostSpec::Rows(r) => r[i],
            }
        } else if j >= self.nx2 as isize {
            debug_assert_eq!(j, self.nx2 as isize);
            let jt = self.nx2 - 1;
            match bc.top {
                GhostSpec::Odd => -self.get(i, jt),
                GhostSpec::Even => self.get(i, jt),
                GhostSpec::Mirror(b) => 2.0 * b - self.get(i, jt),
                GhostSpec::Rows(r) => r[i],
            }
        } else {
            self.get(i, j as usize)
        }
    }

    /// Integral over the domain: sum of |K| * value, pairwise.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        mesh.cell_area() * pairwise_sum(&self.data)
    }

    /// Discrete L^p norm (sum |K| |f|^p)^(1/p).
    pub fn lp_norm(&self, mesh: &Mesh, p: f64) -> f64 {
        assert!(p >= 1.0, "L^p norm needs p >= 1");
        let powers: Vec<f64> = self.data.iter().map(|v| v.abs().powf(p)).collect();
        (mesh.cell_area() * pairwise_sum(&powers)).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }
}

/// Two-component vector cell field.
#[derive(Debug, Clone, PartialEq)]
pub struct VecField {
    pub c1: ScalarField,
    pub c2: ScalarField,
}

impl VecField {
    pub fn zeros(mesh: &Mesh) -> Self {
        VecField { c1: ScalarField::zeros(mesh), c2: ScalarField::zeros(mesh) }
    }

    pub fn lp_norm(&self, mesh: &Mesh, p: f64) -> f64 {
        assert!(p >= 1.0);
        let powers: Vec<f64> = self
            .c1
            .data
            .iter()
            .zip(&self.c2.data)
            .map(|(a, b)| (a * a + b * b).sqrt().powf(p))
            .collect();
        (mesh.cell_area() * pairwise_sum(&powers)).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.c1
            .data
            .iter()
            .zip(&self.c2.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a * a + b * b).sqrt()))
    }
}

/// Values on the faces of one direction. Direction 1 faces are indexed by
/// (i, j) with the face between cells (i, j) and (i+1 mod nx1, j); direction 2
/// faces by (i, j) with the face between (i, j-1) and (i, j), j = 0..=nx2.
/// The global face normal points along +e_dir, so jump = out - in in that
/// orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub dir: u8,
    pub nx1: usize,
    pub nx2: usize,
    pub data: Vec<f64>,
}

impl FaceField {
    pub fn zeros(mesh: &Mesh, dir: u8) -> Self {
        let n = match dir {
            1 => mesh.nfaces1(),
            2 => mesh.nfaces2(),
            _ => panic!("direction must be 1 or 2"),
        };
        FaceField { dir, nx1: mesh.nx1, nx2: mesh.nx2, data: vec![0.0; n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx1 + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx1 + i] = v;
    }

    /// Dual-cell measure |D_sigma| of face (i, j): h^2 for interior faces,
    /// h^2/2 for the wall faces.
    #[inline]
    pub fn dual_measure(&self, mesh: &Mesh, j: usize) -> f64 {
        let full = mesh.h * mesh.h;
        if self.dir == 2 && (j == 0 || j == self.nx2) {
            0.5 * full
        } else {
            full
        }
    }

    /// sum over faces of |D_sigma| * value^2 (one term of the dual L2 norm).
    pub fn dual_l2_sq(&self, mesh: &Mesh) -> f64 {
        let mut terms = Vec::with_capacity(self.data.len());
        let rows = if self.dir == 1 { self.nx2 } else { self.nx2 + 1 };
        for j in 0..rows {
            let w = self.dual_measure(mesh, j);
            for i in 0..self.nx1 {
                let v = self.get(i, j);
                terms.push(w * v * v);
            }
        }
        pairwise_sum(&terms)
    }
}

/// Pairwise (cascade) summation: deterministic and accurate independent of
/// thread count, used by every reduction in the crate.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Mesh;

    fn mesh4() -> Mesh {
        Mesh::new(4, 4, (-1.0, 1.0, -1.0, 1.0)).unwrap()
    }

    #[test]
    fn ghost_rules() {
        let m = mesh4();
        let mut f = ScalarField::zeros(&m);
        f.set(1, 0, 3.0);
        f.set(1, 3, 0.9);
        // odd mirror: average over the wall face is zero
        assert_eq!(f.at(1, -1, &WallBc::odd()), -3.0);
        // even: zero jump
        assert_eq!(f.at(1, -1, &WallBc::even()), 3.0);
        // prescribed average 1.1 with inner 0.9 gives ghost 1.3
        let bc = WallBc::mirror(0.0, 1.1);
        assert!((f.at(1, 4, &bc) - 1.3).abs() < 1e-15);
        // explicit rows
        let rows = vec![7.0; 4];
        let bc = WallBc { bottom: GhostSpec::Rows(&rows), top: GhostSpec::Even };
        assert_eq!(f.at(1, -1, &bc), 7.0);
        // periodic wrap in i
        assert_eq!(f.at(-3, 0, &WallBc::even()), 3.0);
    }

    #[test]
    fn lp_norms() {
        let m = mesh4();
        // constant c on [-1,1]^2: L2 norm = 2|c|
        let f = ScalarField::constant(&m, -1.5);
        assert!((f.lp_norm(&m, 2.0) - 3.0).abs() < 1e-14);
        assert_eq!(ScalarField::zeros(&m).lp_norm(&m, 2.0), 0.0);
        // single-cell indicator, p = 1: h^2
        let mut g = ScalarField::zeros(&m);
        g.set(2, 2, 1.0);
        assert!((g.lp_norm(&m, 1.0) - m.cell_area()).abs() < 1e-15);
    }

    #[test]
    #[should_panic]
    fn lp_norm_rejects_small_p() {
        let m = mesh4();
        ScalarField::zeros(&m).lp_norm(&m, 0.5);
    }

    #[test]
    fn dual_cells_tile_domain() {
        let m = mesh4();
        for dir in [1u8, 2u8] {
            let f = FaceField::zeros(&m, dir);
            let rows = if dir == 1 { m.nx2 } else { m.nx2 + 1 };
            let total: f64 = (0..rows)
                .map(|j| f.dual_measure(&m, j) * m.nx1 as f64)
                .sum();
            assert!((total - m.domain_area()).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-10);
    }
}
