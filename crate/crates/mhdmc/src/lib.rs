//! Finite volume solver for the 2D viscous compressible MHD equations on a
//! periodic-strip domain (periodic in x1, impermeable walls in x2), with an
//! implicit structure-preserving upwind scheme and a Monte Carlo harness for
//! random initial/boundary data.
//!
//! Module layout:
//! - [`mesh`]: uniform structured grid, face/dual-cell topology
//! - [`field`]: cell and face fields, wall ghost rules, reductions
//! - [`ops`]: discrete differential operators and the diffusive upwind flux
//! - [`proj`]: cell-mean, face-mean and line-average (divergence-free) projections
//! - [`physics`]: pressure law, energy functionals, wall extension field
//! - [`linsolve`]: matrix-free BiCGStab and a dense direct path for small grids
//! - [`scheme`]: the implicit backward-Euler step with Picard splitting
//! - [`diag`]: mass/energy/divergence diagnostics and error norms
//! - [`stochastic`]: experiment presets and deterministic seed splitting
//! - [`mc`]: ensembles, reference statistics, E1/E2 error estimators
//! - [`io`]: CSV, VTK legacy and binary snapshot output

pub mod diag;
pub mod field;
pub mod io;
pub mod linsolve;
pub mod mc;
pub mod mesh;
pub mod ops;
pub mod physics;
pub mod proj;
pub mod scheme;
pub mod stochastic;
