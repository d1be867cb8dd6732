//! Kinetic Monte Carlo and semi-analytic models of evaporative cooling for
//! reactive polar molecules in two- and three-dimensional traps.
//!
//! The crate is organised bottom-up:
//!
//! - [`special`]: gamma functions and quadrature rules
//! - [`units`]: physical constants and unit helpers
//! - [`scattering`]: angular laws, energy-dependent cross sections, κ formulas
//! - [`ensemble`]: traps, particle ensembles, equilibrium sampling, estimators
//! - [`mc_engine`]: the particle simulation and its experiments
//! - [`tb_kinetics`]: truncated-Boltzmann rate equations
//! - [`multiband`]: band-resolved two-body loss master equation

// `!(x > 0.0)` is used on purpose: NaN has to fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ensemble;
pub mod mc_engine;
pub mod multiband;
pub mod scattering;
pub mod special;
pub mod tb_kinetics;
pub mod units;

pub use ensemble::{Dim, MacroState, ParticleEnsemble, TrapPotential};
pub use scattering::{AngularLaw, CrossSectionTable, ReactiveModel};
