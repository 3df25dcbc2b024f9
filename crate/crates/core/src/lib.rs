//! 5G NR radio-access simulation for a remaining-useful-life (RUL) control
//! loop, with the RUL evaluation metrics and the end-to-end feasibility check.
//!
//! - [`phy`]: numerology, resource grid and PDU geometry
//! - [`channel`]: Gilbert-Elliot burst-error channel
//! - [`mac`]: per-T_SRP control pattern, dynamic grants and HARQ
//! - [`sim`]: discrete-event replications and campaigns
//! - [`rul`]: fault labeling, cost/advance metrics, threshold calibration
//! - [`e2e`]: RTT composition, architecture presets, feasibility verdicts
//! - [`export`]: CSV/JSON emitters

pub mod channel;
pub mod e2e;
pub mod error;
pub mod export;
pub mod mac;
pub mod phy;
pub mod rng;
pub mod rul;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
