use std::time::Duration;

use num_traits::Float;

use crate::{energy_delta, EnergyDelta, EnergyError, EnergyProvider, EnergySample};

/// Idle interval used when none is given.
pub const DEFAULT_CALIBRATION: Duration = Duration::from_secs(5);

/// Result of an idle measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<F> {
    pub p_static_w: F,
    pub delta: EnergyDelta,
    /// Last sample read, useful for the domains' counter ranges.
    pub sample: EnergySample,
}

/// Static power in watts: energy over an idle interval divided by the time
/// the samples say elapsed. Hardware providers need at least one second.
pub fn calibrate_static<F: Float>(provider: &mut dyn EnergyProvider, duration: Duration) -> Result<F, EnergyError> {
    calibrate(provider, duration).map(|c| c.p_static_w)
}

/// Like [`calibrate_static`], keeping the raw delta and final sample.
pub fn calibrate<F: Float>(
    provider: &mut dyn EnergyProvider,
    duration: Duration,
) -> Result<Calibration<F>, EnergyError> {
    if duration.is_zero() {
        return Err(EnergyError::Precondition("calibration duration must be positive".into()));
    }
    if provider.is_hardware() && duration < Duration::from_secs(1) {
        return Err(EnergyError::Precondition(format!("calibration on hardware needs at least 1 s, got {duration:?}")));
    }
    let before = provider.read_counters()?;
    provider.idle(duration);
    let after = provider.read_counters()?;
    let delta = energy_delta(&before, &after)?;
    if delta.elapsed_us == 0 {
        return Err(EnergyError::Precondition("calibration samples share a timestamp".into()));
    }
    Ok(Calibration { p_static_w: delta.joules::<F>() / delta.seconds::<F>(), delta, sample: after })
}
