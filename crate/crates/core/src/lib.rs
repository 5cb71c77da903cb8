//! Simulation toolkit for post-selected weak amplification with a single
//! photon and a mechanical-oscillator pointer.
//!
//! One photon enters a Mach–Zehnder interferometer whose arm A contains an
//! optomechanical cavity. The mirror (the pointer) evolves under
//! `H/ħω_m = c†c − κ n̂_A (c + c†)`; detecting the photon at a chosen output
//! port conditions the mirror. The crate builds the mirror states, evolves
//! them with closed-form branch unitaries (cross-checked against brute-force
//! exponentiation of the Hamiltonian), conditions on the post-selection and
//! scans for the largest conditioned displacement.
//!
//! All positions are in units of the zero-point fluctuation σ.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod pointer;
pub mod protocol;

pub use analysis::{
    amplification_scan, kerr_contrast, limit_table, unconditioned_trajectory, KerrContrast, ScanGrid, ScanOptions,
    ScanRecord, ScanReport,
};
pub use dynamics::{branch_unitary, full_hamiltonian, oracle_evolve, CouplingParams, JointState};
pub use error::{Error, Result};
pub use hilbert::{expectation, expm_oracle, DensOp, Dim, Ket, LinOp, State, C64, TAIL_TOL};
pub use pointer::{dimensionless_from_physical, make_pointer, pointer_spread, PhysicalParams, PointerSpec};
pub use protocol::{
    condition, first_order_prediction, kraus_operator, weak_value, ConditionedResult, ConditioningKernel, PathState,
    PostSelection,
};
