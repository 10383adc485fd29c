//! Impulsive rotational alignment of thermal ensembles of linear molecules
//! and their isotopic mixtures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod library;
pub mod output;
pub mod rotor;

pub use config::{parse_config, RunConfig};
pub use control::{Objective, SelectivityReport, TwoPulseSetup};
pub use dynamics::{Kick, PulseSequence, Rotor, WavepacketState};
pub use ensemble::{AlignmentTrace, SignalTrace, ThermalEnsemble};
pub use error::{Error, Result};
pub use library::MoleculeLibrary;
pub use rotor::IsotopologueSpec;
