use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::{DomainReading, EnergyError, EnergyProvider, EnergySample};

/// Environment variable overriding the powercap root directory.
pub const POWERCAP_ROOT_ENV: &str = "LOOPWATT_POWERCAP_ROOT";
pub const DEFAULT_POWERCAP_ROOT: &str = "/sys/class/powercap";

/// Reads `intel-rapl:<k>/energy_uj` and `max_energy_range_uj` below a
/// powercap root. Only top-level zones are used; subzones such as
/// `intel-rapl:0:0` are already included in their parent.
#[derive(Debug)]
pub struct PowercapProvider {
    root: PathBuf,
    zones: Vec<(String, PathBuf)>,
    epoch: Instant,
}

fn zone_number(name: &str) -> Option<u32> {
    name.strip_prefix("intel-rapl:")?.parse().ok()
}

fn read_uj(domain: &str, path: &Path) -> Result<u64, EnergyError> {
    let unreadable = |message: String| EnergyError::Unreadable {
        domain: domain.to_owned(),
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| unreadable(e.to_string()))?;
    text.trim().parse().map_err(|_| unreadable(format!("`{}` is not an integer", text.trim())))
}

impl PowercapProvider {
    /// Discovers the zones below `root`. No zones is an error.
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, EnergyError> {
        let root = root.into();
        let entries = fs::read_dir(&root).map_err(|e| EnergyError::Unreadable {
            domain: "*".into(),
            path: root.display().to_string(),
            message: e.to_string(),
        })?;
        let mut zones: Vec<(u32, String, PathBuf)> = entries
            .filter_map(Result::ok)
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                zone_number(&name).map(|k| (k, name, e.path()))
            })
            .collect();
        zones.sort();
        if zones.is_empty() {
            return Err(EnergyError::NoDomains);
        }
        Ok(PowercapProvider {
            root,
            zones: zones.into_iter().map(|(_, name, path)| (name, path)).collect(),
            epoch: Instant::now(),
        })
    }

    /// Uses `$LOOPWATT_POWERCAP_ROOT`, or the system powercap directory.
    pub fn from_env() -> Result<Self, EnergyError> {
        let root =
            std::env::var_os(POWERCAP_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| DEFAULT_POWERCAP_ROOT.into());
        Self::new(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn domains(&self) -> Vec<String> {
        self.zones.iter().map(|(n, _)| n.clone()).collect()
    }
}

impl EnergyProvider for PowercapProvider {
    fn read_counters(&mut self) -> Result<EnergySample, EnergyError> {
        let mut domains = Vec::with_capacity(self.zones.len());
        for (name, dir) in &self.zones {
            let energy_uj = read_uj(name, &dir.join("energy_uj"))?;
            let max_range_uj = read_uj(name, &dir.join("max_energy_range_uj"))?;
            domains.push(DomainReading { domain: name.clone(), energy_uj, max_range_uj });
        }
        let timestamp_us = self.epoch.elapsed().as_micros() as u64;
        EnergySample::new(domains, timestamp_us)
    }

    fn idle(&mut self, duration: Duration) {
        std::thread::sleep(duration);
    }

    fn is_hardware(&self) -> bool {
        true
    }
}
