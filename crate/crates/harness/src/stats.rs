use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanError {
    #[error("geometric mean of an empty list")]
    Empty,
    #[error("geometric mean needs positive values, got {0}")]
    NonPositive(f64),
}

/// `exp(mean(ln v))`. Identical values come back unchanged rather than
/// through the rounding of `ln` and `exp`.
pub fn geometric_mean<F: Float>(values: &[F]) -> Result<F, MeanError> {
    if values.is_empty() {
        return Err(MeanError::Empty);
    }
    if let Some(v) = values.iter().find(|v| **v <= F::zero() || !v.is_finite()) {
        return Err(MeanError::NonPositive(v.to_f64().unwrap_or(f64::NAN)));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok(values[0]);
    }
    let n = F::from(values.len()).expect("length fits a float");
    let log_sum = values.iter().fold(F::zero(), |acc, v| acc + v.ln());
    Ok((log_sum / n).exp())
}
