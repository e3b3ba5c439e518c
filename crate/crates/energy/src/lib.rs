//! Energy accounting on top of cumulative hardware counters.
//!
//! Providers hand out [`EnergySample`]s, one counter per power domain.
//! [`energy_delta`] turns two samples into consumed energy, correcting for a
//! single counter wraparound per domain, and [`compensate`] subtracts the
//! static power measured by [`calibrate_static`].

mod accounting;
mod calibrate;
mod mock;
mod powercap;
mod sample;

use std::time::Duration;

pub use accounting::{compensate, energy_delta, wrap_horizon_s, CompensationError, EnergyDelta, Measurement};
pub use calibrate::{calibrate, calibrate_static, Calibration, DEFAULT_CALIBRATION};
pub use mock::{MockProvider, DEFAULT_MAX_RANGE_UJ};
pub use powercap::{PowercapProvider, DEFAULT_POWERCAP_ROOT, POWERCAP_ROOT_ENV};
pub use sample::{DomainReading, EnergySample};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("provider has no energy domains")]
    NoDomains,
    #[error("cannot read counter for domain `{domain}` at {path}: {message}")]
    Unreadable { domain: String, path: String, message: String },
    #[error("domain `{domain}` reports {energy_uj} µJ, above its range of {max_range_uj} µJ")]
    AboveRange { domain: String, energy_uj: u64, max_range_uj: u64 },
    #[error("samples cover different domains: {before:?} vs {after:?}")]
    DomainMismatch { before: Vec<String>, after: Vec<String> },
    #[error("second sample ({after} µs) is older than the first ({before} µs)")]
    TimeReversed { before: u64, after: u64 },
    #[error("mock script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("mock script has no sample left")]
    ScriptExhausted,
    #[error("{0}")]
    Precondition(String),
}

/// Source of energy counter snapshots.
pub trait EnergyProvider {
    fn read_counters(&mut self) -> Result<EnergySample, EnergyError>;

    /// Lets `duration` pass without load. Mock providers take time from
    /// their script instead and return at once.
    fn idle(&mut self, duration: Duration);

    /// True for providers backed by real counters.
    fn is_hardware(&self) -> bool;
}

/// Snapshot of every domain of `provider`.
pub fn read_counters(provider: &mut dyn EnergyProvider) -> Result<EnergySample, EnergyError> {
    provider.read_counters()
}
