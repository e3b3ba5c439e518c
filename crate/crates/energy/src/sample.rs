use serde::{Deserialize, Serialize};

use crate::EnergyError;

/// One domain's cumulative counter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainReading {
    pub domain: String,
    pub energy_uj: u64,
    pub max_range_uj: u64,
}

/// Snapshot of every domain at one instant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergySample {
    pub domains: Vec<DomainReading>,
    /// Monotonic clock, microseconds.
    pub timestamp_us: u64,
}

impl EnergySample {
    /// Checks that there is at least one domain and that no counter exceeds
    /// its range.
    pub fn new(domains: Vec<DomainReading>, timestamp_us: u64) -> Result<Self, EnergyError> {
        if domains.is_empty() {
            return Err(EnergyError::NoDomains);
        }
        if let Some(d) = domains.iter().find(|d| d.energy_uj > d.max_range_uj) {
            return Err(EnergyError::AboveRange {
                domain: d.domain.clone(),
                energy_uj: d.energy_uj,
                max_range_uj: d.max_range_uj,
            });
        }
        Ok(EnergySample { domains, timestamp_us })
    }

    pub fn domain(&self, name: &str) -> Option<&DomainReading> {
        self.domains.iter().find(|d| d.domain == name)
    }

    pub fn domain_names(&self) -> Vec<String> {
        self.domains.iter().map(|d| d.domain.clone()).collect()
    }
}
