//! Uniform structured 2D mesh over Q = [x1a,x1b]_periodic x [x2a,x2b].
//!
//! Cells are squares of side h, stored row-major (x1 fastest). The x1
//! direction wraps periodically; the x2 direction has walls at x2a and x2b.
//! Faces are grouped by normal direction: direction-1 faces are all interior
//! (including the periodic wrap), direction-2 faces include the two exterior
//! wall layers.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cell counts must be at least 4, got {0}x{1}")]
    TooCoarse(usize, usize),
    #[error("non-square cells: h1={0}, h2={1}")]
    NonSquare(f64, f64),
    #[error("empty domain bounds")]
    EmptyBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx1: usize,
    pub nx2: usize,
    pub h: f64,
    pub x1a: f64,
    pub x1b: f64,
    pub x2a: f64,
    pub x2b: f64,
}

impl Mesh {
    pub fn new(nx1: usize, nx2: usize, bounds: (f64, f64, f64, f64)) -> Result<Mesh, MeshError> {
        let (x1a, x1b, x2a, x2b) = bounds;
        if nx1 < 4 || nx2 < 4 {
            return Err(MeshError::TooCoarse(nx1, nx2));
        }
        if x1b <= x1a || x2b <= x2a {
            return Err(MeshError::EmptyBounds);
        }
        let h1 = (x1b - x1a) / nx1 as f64;
        let h2 = (x2b - x2a) / nx2 as f64;
        if (h1 - h2).abs() > 1e-12 * h1.max(h2) {
            return Err(MeshError::NonSquare(h1, h2));
        }
        Ok(Mesh { nx1, nx2, h: h1, x1a, x1b, x2a, x2b })
    }

    #[inline]
    pub fn ncells(&self) -> usize {
        self.nx1 * self.nx2
    }

    /// Linear index of cell (i, j); i wraps periodically, j must be in range.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx1 && j < self.nx2);
        j * self.nx1 + i
    }

    /// Periodic wrap in x1 for possibly out-of-range signed index.
    #[inline]
    pub fn wrap1(&self, i: isize) -> usize {
        let n = self.nx1 as isize;
        (((i % n) + n) % n) as usize
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x1a + (i as f64 + 0.5) * self.h,
            self.x2a + (j as f64 + 0.5) * self.h,
        )
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn domain_area(&self) -> f64 {
        (self.x1b - self.x1a) * (self.x2b - self.x2a)
    }

    /// Number of direction-1 faces (all interior, includes the wrap column).
    pub fn nfaces1(&self) -> usize {
        self.nx1 * self.nx2
    }

    /// Number of direction-2 faces (j = 0 and j = nx2 are exterior).
    pub fn nfaces2(&self) -> usize {
        self.nx1 * (self.nx2 + 1)
    }

    /// True if the direction-2 face row j is one of the two wall layers.
    #[inline]
    pub fn is_wall_row(&self, j: usize) -> bool {
        j == 0 || j == self.nx2
    }

    /// Checks that `fine` refines `self` by an integer power of two.
    pub fn nesting_factor(&self, fine: &Mesh) -> Option<usize> {
        if (self.x1a, self.x1b, self.x2a, self.x2b) != (fine.x1a, fine.x1b, fine.x2a, fine.x2b) {
            return None;
        }
        if fine.nx1 % self.nx1 != 0 {
            return None;
        }
        let r = fine.nx1 / self.nx1;
        if r.is_power_of_two() && fine.nx2 == self.nx2 * r {
            Some(r)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_small_grid() {
        // 4x4 periodic-strip grid on [-1,1]^2
        let m = Mesh::new(4, 4, (-1.0, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(m.h, 0.5);
        assert_eq!(m.ncells(), 16);
        assert_eq!(m.nfaces1(), 16); // includes wrap faces
        assert_eq!(m.nfaces2(), 20); // 12 interior + 8 exterior
        assert!(m.is_wall_row(0) && m.is_wall_row(4) && !m.is_wall_row(2));
    }

    #[test]
    fn dyadic_grid_spacing() {
        let m = Mesh::new(64, 64, (-1.0, 1.0, -1.0, 1.0)).unwrap();
        assert!((m.h - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn rectangular_domain_square_cells() {
        // [0,2] x [-0.5,0.5] needs nx1 = 2 nx2
        let m = Mesh::new(32, 16, (0.0, 2.0, -0.5, 0.5)).unwrap();
        assert!((m.h - 1.0 / 16.0).abs() < 1e-15);
        assert!(Mesh::new(16, 16, (0.0, 2.0, -0.5, 0.5)).is_err());
    }

    #[test]
    fn cell_tiling_is_exact() {
        let m = Mesh::new(48, 24, (0.0, 2.0, -0.5, 0.5)).unwrap();
        let total = m.cell_area() * m.ncells() as f64;
        assert!((total - m.domain_area()).abs() <= 1e-12 * m.domain_area());
    }

    #[test]
    fn wrap_and_centers() {
        let m = Mesh::new(4, 4, (-1.0, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(m.wrap1(-1), 3);
        assert_eq!(m.wrap1(4), 0);
        let (x, y) = m.cell_center(0, 0);
        assert!((x + 0.75).abs() < 1e-15 && (y + 0.75).abs() < 1e-15);
    }

    #[test]
    fn nesting() {
        let c = Mesh::new(16, 16, (-1.0, 1.0, -1.0, 1.0)).unwrap();
        let f = Mesh::new(64, 64, (-1.0, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(c.nesting_factor(&f), Some(4));
        let g = Mesh::new(48, 48, (-1.0, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(c.nesting_factor(&g), None);
    }
}
