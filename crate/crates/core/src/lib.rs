//! Two-particle scattering at time boundaries of multi-band SSH chains.
//!
//! The crate builds chain Hamiltonians, prepares one- and two-particle wave
//! packets, integrates them through a time-dependent coupling profile and
//! measures band-resolved momentum entanglement of the outcome.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod diag;
pub mod entangle;
pub mod error;
pub mod evolve;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod protocol;
pub mod schedule;
pub mod states;

pub use diag::Warning;
pub use error::{Error, Result};
pub use lattice::{
    build_real_space_hamiltonian, solve_bands, solve_bloch, BandTable, Boundary, ChainHamiltonian, CouplingSnapshot,
    LatticeSpec,
};
pub use schedule::{DriveProfile, HoppingMode, NoiseRecord, NoiseSpec, NoiseStream, OnsiteMode};
pub use states::{
    gaussian_orbital, pair_state, plane_wave_orbital, to_band_amplitudes, BandAmplitudes, PairForm, SingleParticleWave,
    Statistics, TwoParticleWave,
};
pub use analytic::{
    bell_condition, scatter_coefficients, scattering_angles, scattering_probabilities, BellCondition, EntropyMap,
    MapAxes, MapRequest, ScatterCoefficients,
};
pub use entangle::{fidelity, project_band_pair, trial_statistics, ProjectionResult, ProjectionSummary, TrialStatistics};
pub use evolve::{EvolutionConfig, LossSpec, NoiseRun, Snapshot};
pub use protocol::{
    run_decoherence, run_decoherence_dense, run_noise_sweep, run_scatter, DecoherenceCurve, NoiseSweep, PairSetup,
    ScatterOutcome, ScatterRecord, ScatterRun, SweepCell,
};
