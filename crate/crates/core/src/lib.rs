//! Leader-follower vehicle simulator with estimation, safe control and
//! data-injection detection.

// NaN-rejecting range checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod detection_prior;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod fusion_mab;
pub mod harness;
pub mod mathkit;
pub mod sensing;

pub use dynamics::{LeaderProfile, PlantParams, PlantState};
pub use error::{Error, Result};
pub use mathkit::{Mat, RngStream};
pub use sensing::{AttackPlan, Injection, InjectionMode, ReadingFrame, SensorBank, SensorKind};
