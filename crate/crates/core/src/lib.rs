//! One-dimensional fractional visco-elasto-plasticity with memory-dependent damage.
//!
//! - [`fracops`]: L1 kernels for Caputo derivatives.
//! - [`energy`]: discrete fractional free energy and the damage energy release
//!   rate, by a direct Hankel quadratic form or an FFT convolution.
//! - [`plasticity`]: the fractional return mapping with Lemaitre-type damage.
//! - [`driver`]: strain programs, trajectories, convergence and timing harnesses.

// negated comparisons below are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod driver;
pub mod energy;
pub mod error;
pub mod fracops;
pub mod plasticity;

pub use driver::{
    benchmark_complexity, convergence_order, relative_error, simulate, simulate_with, ConvergenceRow, LoadProgram,
    RunReport, RunStatus, SimulationJob, TimingTable,
};
pub use energy::{
    damage_energy_release, free_energy_direct, free_energy_fft, hankel_weights, psi_quadratic_exact, EnergyMode,
    FreeEnergy, HankelWeights, StrainIncrements,
};
pub use error::{Error, Result};
pub use fracops::{caputo_l1, caputo_trial, l1_weights, FractionalOrder, L1Kernel, L1Weights, TimeGrid};
pub use plasticity::{MaterialParams, ReturnMapping, StateHistory, StepKind};
