//! Lieb-Robinson bounds for quantum spin lattices, and the exact
//! diagonalization machinery used to test them against real signal
//! propagation in tip-perturbed Heisenberg chains.
//!
//! Units throughout: energies in meV, times in ps, fields in tesla. Formulas
//! that are naturally written with ħ = 1 are evaluated at t/ħ.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod series;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
pub use lattice::{
    boundary, enumerate_paths, path_count_bound, validate_path, Lattice, Path, PathCount,
    PathGraph,
};
pub use linalg::{c64, CsrMatrix, Spectrum};
pub use model::{assemble_hamiltonian, InteractionTerm, SpinSystem, TermKind, TipParameters, Vec3};
pub use spin::{
    dimension_cap, embed, operator_norm, spin_matrices, Axis, HilbertSpace, LocalOperator, Spin,
    SpinMatrices,
};
pub use units::HBAR_MEV_PS;
pub use bounds::{
    arrival_time, interaction_norm_xi, limit_speed, new_bound_1d, new_bound_pathsum, old_bound,
    optimize_xi, tilde_bound, BoundCurve, BoundKind, BoundSpec, OldBound, OneDBound, PathSumBound,
    PathSumOptions, TildeBound, TildeConvBound, XiOptimum,
};
pub use series::{linspace, Arrival, TimeSeries};
pub use dynamics::{
    commutator_norm_series, estimate_velocity, evolve_observable, gibbs_state, signal_arrival,
    Evolution, EvolutionMethod, ThermalState, VelocityFit,
};
