//! Quantum dynamics of a delta-kicked particle in a 1D box driven by the
//! PT-symmetric potential ε cos(2πx/μ) + iγ sin(2πx/μ).
//!
//! The wave function is expanded in the box eigenmodes and advanced one
//! period at a time by the exact map A(t+T) = V·D·A(t). The Floquet matrix
//! V·D is diagonalized for complex quasienergies, whose imaginary parts
//! signal broken PT symmetry.

pub mod cli;
pub mod csv;
pub mod eigen;
pub mod error;
pub mod floquet;
pub mod kick;
pub mod model;
pub mod propagator;
pub mod quadrature;

pub use error::{Error, Result};
pub use kick::{build_kick_matrix, kick_exponent, KickMatrix, KickOptions, Route};
pub use model::{box_energy, box_wavefunction, make_initial_state, InitialState, QuantumState, SystemParams};
pub use floquet::{build_floquet_matrix, detect_pt_breaking, floquet_spectrum, scan_vs_gamma, scan_vs_k, FloquetSpectrum, ScanResult};
pub use propagator::{evolve, kinetic_energy, norm, step, total_energy, TimeSeries};
