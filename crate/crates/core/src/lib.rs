//! Scale-invariant attention laboratory.
//!
//! - [`schedule`]: the distance-dependent logit transform.
//! - [`moments`]: closed-form expectations the transform is built to satisfy.
//! - [`mclab`]: Monte Carlo estimates of range totals, negentropy and entropy.
//! - [`attention`]: a dense causal attention engine with RoPE variants and
//!   logit modifiers.
//! - [`experiments`]: report generation for the studies exposed by the CLI.

pub mod attention;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod mclab;
pub mod moments;
pub mod rng;
pub mod schedule;
pub mod tensorfile;

pub use error::{Error, Result};
pub use schedule::{resolve_params, schedule_at, transform_logit, ScheduleParams, SchedulePoint};
