//! Desk-scale simulator for coupled magnetoelasticity on the unit square.
//!
//! A magnetized elastic body is described by a nodal displacement field and
//! a nodal magnetization angle on a uniform triangulation. The crate builds
//! two loaded energy functionals over these fields: a finite-strain one,
//! parametrized by a loading scale that couples the spontaneous magnetic
//! stretch to the deformation through a multiplicative split, and its
//! small-strain limit, quadratic in the strain for frozen magnetization.
//! Both include exchange energy, the stray-field energy of the magnetization
//! pushed forward to the deformed placement, body-force work, and applied
//! field (Zeeman) work.
//!
//! The main experiment minimizes both functionals across a descending ladder
//! of loading scales and reports how the finite-strain minima and minimizers
//! approach the small-strain ones. Supporting probes audit the stored-energy
//! model's structural hypotheses and sample the rigidity inequality that
//! backs the linearization.
//!
//! Module map:
//!
//! * [`tensor`]: closed-form 2x2 kernels (polar factors, rotation distance,
//!   matrix exponential).
//! * [`energy`]: the stored-energy density, its gradient, the spontaneous
//!   strain, and the effective elasticity tensor.
//! * [`fields`]: grids, nodal states, boundary data, and pullback formulas.
//! * [`demag`]: truncated stray-field solve on a padded box.
//! * [`loads`]: body-force and applied-field catalog.
//! * [`functional`]: assembly of both loaded functionals with exact
//!   gradients over the free degrees of freedom.
//! * [`solver`]: limited-memory BFGS with backtracking.
//! * [`harness`]: the scale sweep, recovery diagnostics, rigidity probe,
//!   and hypothesis audit.
//! * [`config`]: JSON run configuration.

pub mod config;
pub mod demag;
pub mod energy;
pub mod fields;
pub mod functional;
pub mod harness;
pub mod loads;
pub mod solver;
pub mod tensor;
