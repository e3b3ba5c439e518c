use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::time::Duration;

use crate::{DomainReading, EnergyError, EnergyProvider, EnergySample};

/// Range assumed for domains whose script gives none (a common package
/// domain value).
pub const DEFAULT_MAX_RANGE_UJ: u64 = 262_143_328_850;

/// Replays a script of counter readings.
///
/// Each non-empty line is either a reading `timestamp_us domain counter_uj`
/// or a range declaration `range domain max_uj`; fields are separated by
/// whitespace or commas and `#` starts a comment. Readings with the same
/// timestamp form one sample, returned in timestamp order, one per call to
/// `read_counters`.
#[derive(Debug, Clone)]
pub struct MockProvider {
    samples: VecDeque<EnergySample>,
}

fn parse_u64(field: &str, line: usize, what: &str) -> Result<u64, EnergyError> {
    field
        .parse()
        .map_err(|_| EnergyError::Script { line, message: format!("{what} `{field}` is not a non-negative integer") })
}

impl MockProvider {
    pub fn from_samples(samples: Vec<EnergySample>) -> Result<Self, EnergyError> {
        if samples.iter().any(|s| s.domains.is_empty()) || samples.is_empty() {
            return Err(EnergyError::NoDomains);
        }
        Ok(MockProvider { samples: samples.into() })
    }

    pub fn parse(script: &str) -> Result<Self, EnergyError> {
        let mut ranges: BTreeMap<String, u64> = BTreeMap::new();
        let mut readings: BTreeMap<u64, Vec<(String, u64)>> = BTreeMap::new();
        for (i, raw) in script.lines().enumerate() {
            let line = i + 1;
            let text = raw.split('#').next().unwrap_or("");
            let fields: Vec<&str> =
                text.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            match fields.as_slice() {
                [] => {}
                ["range", domain, max] => {
                    ranges.insert(domain.to_string(), parse_u64(max, line, "range")?);
                }
                [ts, domain, value] => {
                    let ts = parse_u64(ts, line, "timestamp")?;
                    let value = parse_u64(value, line, "counter")?;
                    let group = readings.entry(ts).or_default();
                    if group.iter().any(|(d, _)| d == domain) {
                        return Err(EnergyError::Script {
                            line,
                            message: format!("domain `{domain}` repeated at {ts} µs"),
                        });
                    }
                    group.push((domain.to_string(), value));
                }
                _ => {
                    return Err(EnergyError::Script {
                        line,
                        message: "expected `timestamp_us domain counter_uj` or `range domain max_uj`".into(),
                    })
                }
            }
        }
        let samples = readings
            .into_iter()
            .map(|(ts, group)| {
                let domains = group
                    .into_iter()
                    .map(|(domain, energy_uj)| {
                        let max_range_uj = ranges.get(&domain).copied().unwrap_or(DEFAULT_MAX_RANGE_UJ);
                        DomainReading { domain, energy_uj, max_range_uj }
                    })
                    .collect();
                EnergySample::new(domains, ts)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_samples(samples)
    }

    pub fn from_file(path: &Path) -> Result<Self, EnergyError> {
        let text = std::fs::read_to_string(path).map_err(|e| EnergyError::Unreadable {
            domain: "mock".into(),
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Samples left to hand out.
    pub fn remaining(&self) -> usize {
        self.samples.len()
    }
}

impl EnergyProvider for MockProvider {
    fn read_counters(&mut self) -> Result<EnergySample, EnergyError> {
        self.samples.pop_front().ok_or(EnergyError::ScriptExhausted)
    }

    fn idle(&mut self, _duration: Duration) {}

    fn is_hardware(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_timestamp() {
        let mut m = MockProvider::parse("range 0 1000\n# start\n0 0 10\n0, 1, 20\n5 1 30\n5 0 15\n").unwrap();
        let a = m.read_counters().unwrap();
        assert_eq!(a.timestamp_us, 0);
        assert_eq!(a.domain("0").unwrap().max_range_uj, 1000);
        assert_eq!(a.domain("1").unwrap().max_range_uj, DEFAULT_MAX_RANGE_UJ);
        assert_eq!(m.read_counters().unwrap().domain("0").unwrap().energy_uj, 15);
        assert!(matches!(m.read_counters(), Err(EnergyError::ScriptExhausted)));
    }

    #[test]
    fn bad_lines_name_their_number() {
        match MockProvider::parse("0 0 1\n1 0 x\n") {
            Err(EnergyError::Script { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(MockProvider::parse("# nothing\n"), Err(EnergyError::NoDomains)));
        assert!(matches!(MockProvider::parse("range 0 5\n0 0 6\n"), Err(EnergyError::AboveRange { .. })));
    }
}
