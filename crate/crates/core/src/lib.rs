//! System-level simulation of an LTE network serving a mix of terrestrial
//! and aerial UEs.
//!
//! The crate is organised bottom-up:
//!
//! - [`deploy`]: hexagonal multi-site layout, sector antennas and UE drops.
//! - [`channel`]: height-dependent LOS probability, pathloss and shadowing.
//! - [`power`]: open-loop uplink power control with per-class parameters.
//! - [`sysim`]: Monte-Carlo snapshot engine for uplink IoT/SINR and downlink
//!   geometry, plus campaign aggregation.
//! - [`meas`]: measurement-event engine (A3/A4/A5, multi-cell triggering,
//!   height-based reporting).
//! - [`mobility`]: flight paths and a simplified handover / RLF model.
//! - [`uas`]: flight-path signaling and aerial-UE identification.

pub mod channel;
pub mod deploy;
pub mod error;
pub mod geometry;
pub mod meas;
pub mod mobility;
pub mod power;
pub mod rng;
pub mod sysim;
pub mod uas;
pub mod units;

pub use channel::{AerialChannel, ChannelModel, LinkMatrix, LinkState};
pub use error::ConfigError;
pub use deploy::{Cell, Drop, ScenarioConfig, ScenarioKind, UeKind, UEntity};
pub use geometry::{Point2, Point3};
pub use meas::{MeasConfig, MeasEngine, MeasReport};
pub use mobility::{FlightPath, HandoverConfig, MobilityStats};
pub use power::PowerControlConfig;
pub use sysim::{MetricsCdf, SnapshotResult};

/// Identifier of a sector cell within a layout.
pub type CellId = u32;
/// Identifier of a UE within a drop.
pub type UeId = u32;
