//! Numerical core for studying dynamical equilibration in quantum chaotic
//! systems: Henon-Heiles wave-packet dynamics, ripple-billiard eigenstates,
//! the ergodic inequality, Husimi sections, the classical mirror dynamics and
//! intensity-fluctuation statistics.
//!
//! Units: m = 1/2 and hbar = 1 throughout, so `H = p^2 + V`.

pub mod billiard;
pub mod classical;
pub mod eigensolver;
pub mod equilibration;
pub mod error;
pub mod fft;
pub mod fields;
pub mod fluctuations;
pub mod husimi;
pub mod levels;
pub mod linalg;
pub mod models;
pub mod propagation;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
