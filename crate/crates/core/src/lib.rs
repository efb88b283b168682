//! Wave-optics Monte-Carlo simulation of entangled OAM photon pairs sent
//! through atmospheric turbulence, with adaptive-optics correction derived
//! from a co-propagating Gaussian beacon.
//!
//! The pipeline, per turbulence realization:
//!
//! 1. draw Kolmogorov phase screens ([`turbulence`]),
//! 2. propagate `LG_{0,±l0}` and the beacon through them ([`propagation`]),
//! 3. clip at the receiver aperture and apply the AO correction ([`ao`]),
//! 4. project onto the `±l0` subspace ([`quantum`]).
//!
//! Ensembles are reduced to the averaged two-qubit state, its concurrence,
//! trace and crosstalk error rate, with error bars from [`stats`].
//! [`experiment`] runs whole parameter sweeps deterministically in parallel.

pub mod ao;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod io;
pub mod modes;
pub mod propagation;
pub mod quantum;
pub mod stats;
pub mod turbulence;
pub mod validation;

pub use ao::{AoCorrection, CorrectionKind};
pub use error::{Error, Result};
pub use experiment::{LinkConfig, Profile, StreamId, SweepResultRow};
pub use grid::{make_grid, GridSpec};
pub use modes::{ComplexField, ModeIndex};
pub use propagation::{ChannelRealization, ScreenPlacement};
pub use quantum::{DensityMatrix4, QuantumMetrics, RealizationAmplitudes};
pub use stats::BlochDecomposition;
pub use turbulence::{PhaseScreen, TurbulenceParams};
