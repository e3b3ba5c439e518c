use std::fmt::{Debug, Display};

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{EnergyError, EnergySample};

/// Energy consumed between two samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyDelta {
    /// Per-domain consumption in µJ, in the order of the first sample.
    pub per_domain: Vec<(String, u64)>,
    pub total_uj: u64,
    pub elapsed_us: u64,
}

impl EnergyDelta {
    pub fn joules<F: Float>(&self) -> F {
        F::from(self.total_uj).expect("u64 fits a float") / F::from(1e6).expect("constant")
    }

    pub fn seconds<F: Float>(&self) -> F {
        F::from(self.elapsed_us).expect("u64 fits a float") / F::from(1e6).expect("constant")
    }
}

/// Consumption per domain and in total, assuming each counter wrapped at
/// most once: `a - b` when `a >= b`, else `(max_range - b) + a`.
pub fn energy_delta(before: &EnergySample, after: &EnergySample) -> Result<EnergyDelta, EnergyError> {
    if after.timestamp_us < before.timestamp_us {
        return Err(EnergyError::TimeReversed { before: before.timestamp_us, after: after.timestamp_us });
    }
    let mut b_names = before.domain_names();
    let mut a_names = after.domain_names();
    b_names.sort();
    a_names.sort();
    if b_names != a_names {
        return Err(EnergyError::DomainMismatch { before: b_names, after: a_names });
    }
    let mut per_domain = Vec::with_capacity(before.domains.len());
    let mut total_uj = 0u64;
    for b in &before.domains {
        let a = after.domain(&b.domain).expect("same domain set");
        let d = if a.energy_uj >= b.energy_uj {
            a.energy_uj - b.energy_uj
        } else {
            b.max_range_uj.saturating_sub(b.energy_uj) + a.energy_uj
        };
        per_domain.push((b.domain.clone(), d));
        total_uj += d;
    }
    Ok(EnergyDelta { per_domain, total_uj, elapsed_us: after.timestamp_us - before.timestamp_us })
}

/// Longest interval, in seconds, over which no counter of `sample` can wrap
/// twice at a draw of `p_max_w` watts. Longer intervals can under-count.
pub fn wrap_horizon_s(sample: &EnergySample, p_max_w: f64) -> f64 {
    let range = sample.domains.iter().map(|d| d.max_range_uj).min().unwrap_or(0);
    range as f64 / 1e6 / p_max_w
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum CompensationError<F: Debug + Display> {
    /// Static power times runtime exceeds the measured energy.
    #[error("compensated energy is negative ({0} J): static power exceeds the measured average")]
    Anomaly(F),
    #[error("execution time must be positive, got {0} s")]
    NonPositiveTime(F),
    #[error("static power must not be negative, got {0} W")]
    NegativeStaticPower(F),
}

/// `e_total - p_static * t_exec`. A negative result is reported as
/// [`CompensationError::Anomaly`], never clamped.
pub fn compensate<F: Float + Debug + Display>(e_total: F, p_static: F, t_exec: F) -> Result<F, CompensationError<F>> {
    if t_exec.is_nan() || t_exec <= F::zero() {
        return Err(CompensationError::NonPositiveTime(t_exec));
    }
    if p_static.is_nan() || p_static < F::zero() {
        return Err(CompensationError::NegativeStaticPower(p_static));
    }
    let e = e_total - p_static * t_exec;
    if e < F::zero() {
        Err(CompensationError::Anomaly(e))
    } else {
        Ok(e)
    }
}

/// One measured execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement<F> {
    pub t_exec_s: F,
    pub e_total_j: F,
    pub p_static_w: F,
    /// `e_total_j - p_static_w * t_exec_s`; negative values mark an anomaly.
    pub e_compensated_j: F,
    /// `e_total_j / t_exec_s`.
    pub p_avg_w: F,
}

impl<F: Float + Debug + Display> Measurement<F> {
    /// Derives the compensated energy and average power. Only the
    /// preconditions of [`compensate`] are errors; an anomalous result is
    /// kept and can be queried with [`Measurement::is_anomalous`].
    pub fn new(t_exec_s: F, e_total_j: F, p_static_w: F) -> Result<Self, CompensationError<F>> {
        let e_compensated_j = match compensate(e_total_j, p_static_w, t_exec_s) {
            Ok(e) | Err(CompensationError::Anomaly(e)) => e,
            Err(other) => return Err(other),
        };
        Ok(Measurement { t_exec_s, e_total_j, p_static_w, e_compensated_j, p_avg_w: e_total_j / t_exec_s })
    }

    pub fn is_anomalous(&self) -> bool {
        self.e_compensated_j < F::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DomainReading;

    fn sample(ts: u64, counters: &[(&str, u64)]) -> EnergySample {
        let domains = counters
            .iter()
            .map(|(d, e)| DomainReading { domain: d.to_string(), energy_uj: *e, max_range_uj: 262_143 })
            .collect();
        EnergySample::new(domains, ts).unwrap()
    }

    #[test]
    fn delta_examples() {
        let d = energy_delta(&sample(0, &[("0", 100)]), &sample(1, &[("0", 400)])).unwrap();
        assert_eq!(d.total_uj, 300);
        assert_eq!(d.joules::<f64>(), 3.0e-4);
        let d = energy_delta(&sample(0, &[("0", 262_000)]), &sample(1, &[("0", 100)])).unwrap();
        assert_eq!(d.total_uj, 243);
        let d = energy_delta(&sample(0, &[("0", 100), ("1", 262_000)]), &sample(1, &[("1", 100), ("0", 400)])).unwrap();
        assert_eq!(d.per_domain, vec![("0".to_string(), 300), ("1".to_string(), 243)]);
        assert_eq!(d.total_uj, 543);
    }

    #[test]
    fn delta_preconditions() {
        let a = sample(5, &[("0", 1)]);
        assert!(matches!(energy_delta(&a, &sample(4, &[("0", 1)])), Err(EnergyError::TimeReversed { .. })));
        assert!(matches!(energy_delta(&a, &sample(6, &[("1", 1)])), Err(EnergyError::DomainMismatch { .. })));
    }

    #[test]
    fn compensation_examples() {
        assert_eq!(compensate(100.0, 20.0, 2.0), Ok(60.0));
        assert_eq!(compensate(7.5, 0.0, 3.0), Ok(7.5));
        assert_eq!(compensate(10.0, 20.0, 1.0), Err(CompensationError::Anomaly(-10.0)));
        assert!(matches!(compensate(1.0, 1.0, 0.0), Err(CompensationError::NonPositiveTime(_))));
        let m = Measurement::new(1.0f32, 10.0, 20.0).unwrap();
        assert!(m.is_anomalous());
        assert_eq!(m.p_avg_w, 10.0);
    }
}
