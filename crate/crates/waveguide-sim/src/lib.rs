//! Dynamics of two two-level atoms coupled to the TM modes of a rectangular
//! waveguide, restricted to the single-excitation sector.
//!
//! Three engines cover the same scenarios at different levels of
//! approximation:
//!
//! * [`retarded`] integrates the delay differential equations for the atomic
//!   amplitudes, keeping the finite photon travel time between the atoms.
//! * [`lindblad`] integrates the Born-Markov master equation with collective
//!   decay and coherent exchange, valid when retardation is negligible.
//! * [`oracle`] integrates the Schroedinger equation on an explicitly
//!   discretized mode continuum; it is slower and approximation-free apart
//!   from the discretization, which makes it the reference the other two are
//!   judged against.
//!
//! [`modes`] holds the waveguide geometry (cutoffs, dispersion, transverse
//! profiles, coupling and decay rates), [`scenario`] turns a JSON-friendly
//! [`scenario::Config`] into engine inputs and runs them on a shared time
//! grid, [`output`] serializes finished runs to CSV plus a summary document,
//! [`analysis`] supplies extremum search and dark-state algebra, and
//! [`acceptance`] packages the release checklist used by `wgsim check`.
//!
//! Units: hbar = c = 1, the wide side of the cross section sets the length
//! scale, and all rates are angular frequencies in those units.

pub mod acceptance;
pub mod analysis;
pub mod error;
pub mod lindblad;
pub mod modes;
pub mod oracle;
pub mod output;
pub mod retarded;
pub mod scenario;

pub use error::{Error, Result};
