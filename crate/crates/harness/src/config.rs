use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Compile command used when a configuration gives none. `{compiler}`,
/// `{opt}`, `{src}`, `{out}`, `{threads}` and `{schedule}` are substituted
/// per whitespace-separated word.
pub const DEFAULT_COMPILE_TEMPLATE: &str = "{compiler} -{opt} -fopenmp {src} -o {out}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaitPolicy {
    Active,
    Passive,
    /// Leave `OMP_WAIT_POLICY` unset.
    Default,
}

impl WaitPolicy {
    pub fn name(self) -> &'static str {
        match self {
            WaitPolicy::Active => "active",
            WaitPolicy::Passive => "passive",
            WaitPolicy::Default => "default",
        }
    }

    /// Value for `OMP_WAIT_POLICY`, if any.
    pub fn env_value(self) -> Option<&'static str> {
        match self {
            WaitPolicy::Active => Some("ACTIVE"),
            WaitPolicy::Passive => Some("PASSIVE"),
            WaitPolicy::Default => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Static,
    Dynamic,
    Unset,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Static => "static",
            Schedule::Dynamic => "dynamic",
            Schedule::Unset => "unset",
        }
    }
}

fn default_compiler() -> String {
    "cc".into()
}

fn default_template() -> String {
    DEFAULT_COMPILE_TEMPLATE.into()
}

fn default_opt() -> String {
    "O3".into()
}

fn default_threads() -> u32 {
    1
}

fn default_wait_policy() -> WaitPolicy {
    WaitPolicy::Default
}

fn default_schedule() -> Schedule {
    Schedule::Unset
}

fn default_reps() -> u32 {
    3
}

/// One cell of a benchmark matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub program: String,
    pub source: String,
    #[serde(default = "default_compiler")]
    pub compiler: String,
    #[serde(default = "default_template")]
    pub compile_template: String,
    #[serde(default = "default_opt")]
    pub opt_level: String,
    #[serde(default = "default_threads")]
    pub threads: u32,
    #[serde(default = "default_wait_policy")]
    pub wait_policy: WaitPolicy,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    #[serde(default = "default_reps")]
    pub reps: u32,
    #[serde(default)]
    pub seed: u64,
}

/// Field names accepted in matrix files and selectors.
pub const CONFIG_FIELDS: [&str; 10] = [
    "program",
    "source",
    "compiler",
    "compile_template",
    "opt_level",
    "threads",
    "wait_policy",
    "schedule",
    "reps",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("repetitions must be between 3 and 10, got {0}")]
    Reps(u32),
    #[error("thread count must be at least 1")]
    Threads,
    #[error("`{0}` must not be empty")]
    Empty(&'static str),
    #[error("unknown configuration field `{0}`")]
    UnknownField(String),
    #[error("bad selector `{0}`: expected key=value pairs separated by commas")]
    BadSelector(String),
}

impl RunConfig {
    pub fn new(program: impl Into<String>, source: impl Into<String>) -> Self {
        RunConfig {
            program: program.into(),
            source: source.into(),
            compiler: default_compiler(),
            compile_template: default_template(),
            opt_level: default_opt(),
            threads: default_threads(),
            wait_policy: default_wait_policy(),
            schedule: default_schedule(),
            reps: default_reps(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(3..=10).contains(&self.reps) {
            return Err(ConfigError::Reps(self.reps));
        }
        if self.threads < 1 {
            return Err(ConfigError::Threads);
        }
        for (name, v) in [("program", &self.program), ("compiler", &self.compiler), ("opt_level", &self.opt_level)] {
            if v.is_empty() {
                return Err(ConfigError::Empty(name));
            }
        }
        Ok(())
    }

    /// Text form of a field, as compared by selectors.
    pub fn field(&self, key: &str) -> Option<String> {
        Some(match key {
            "program" => self.program.clone(),
            "source" => self.source.clone(),
            "compiler" => self.compiler.clone(),
            "compile_template" => self.compile_template.clone(),
            "opt_level" => self.opt_level.clone(),
            "threads" => self.threads.to_string(),
            "wait_policy" => self.wait_policy.name().into(),
            "schedule" => self.schedule.name().into(),
            "reps" => self.reps.to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }
}

/// Exact-match conjunction such as `compiler=gcc,threads=4`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    pub terms: Vec<(String, String)>,
}

impl Selector {
    pub fn matches(&self, config: &RunConfig) -> bool {
        self.terms.iter().all(|(k, v)| config.field(k).as_deref() == Some(v.as_str()))
    }
}

impl FromStr for Selector {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let mut terms = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| ConfigError::BadSelector(s.to_owned()))?;
            let k = k.trim();
            if !CONFIG_FIELDS.contains(&k) {
                return Err(ConfigError::UnknownField(k.to_owned()));
            }
            terms.push((k.to_owned(), v.trim().to_owned()));
        }
        if terms.is_empty() {
            return Err(ConfigError::BadSelector(s.to_owned()));
        }
        Ok(Selector { terms })
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reps_outside_protocol_are_rejected() {
        let mut c = RunConfig::new("mm", "mm.c");
        assert!(c.validate().is_ok());
        c.reps = 2;
        assert_eq!(c.validate(), Err(ConfigError::Reps(2)));
        c.reps = 11;
        assert_eq!(c.validate(), Err(ConfigError::Reps(11)));
    }

    #[test]
    fn selector_matches_text_fields() {
        let sel: Selector = "compiler=gcc, threads=4".parse().unwrap();
        let mut c = RunConfig::new("mm", "mm.c");
        c.compiler = "gcc".into();
        c.threads = 4;
        assert!(sel.matches(&c));
        c.threads = 2;
        assert!(!sel.matches(&c));
        assert_eq!(sel.to_string(), "compiler=gcc,threads=4");
        assert!("cores=4".parse::<Selector>().is_err());
        assert!("threads".parse::<Selector>().is_err());
    }
}
