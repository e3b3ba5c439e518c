use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use loopwatt_energy::{energy_delta, EnergyProvider};
use serde::Deserialize;

use crate::config::{RunConfig, Selector};

/// Prefix of the line a runtime kernel prints with its own measurement.
pub const MEASUREMENT_PREFIX: &str = "LOOPWATT_MEASUREMENT ";

/// Raw time and energy of one repetition, before compensation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRun {
    pub t_s: f64,
    pub e_j: f64,
    pub domains_uj: Vec<(String, u64)>,
}

/// Runs benchmark configurations. Errors are diagnostics text that ends up
/// in a failed record.
pub trait Executor {
    fn name(&self) -> &'static str;

    /// Builds what the configuration needs, once before its repetitions.
    fn prepare(&mut self, config: &RunConfig) -> Result<(), String>;

    fn run(&mut self, config: &RunConfig, rep: u32, provider: &mut dyn EnergyProvider) -> Result<RawRun, String>;
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct StubRule {
    /// Selector text, or `*` for any configuration.
    #[serde(rename = "match")]
    pattern: String,
    #[serde(default)]
    t_s: Vec<f64>,
    #[serde(default)]
    e_j: Vec<f64>,
    #[serde(default)]
    fail: Option<String>,
}

/// Returns scripted measurements without running anything.
///
/// The script is a JSON array of rules `{"match": "threads=4", "t_s": [..],
/// "e_j": [..]}` or `{"match": "*", "fail": "message"}`; the first rule whose
/// selector matches a configuration applies and repetition `k` uses entry
/// `k mod len`. Without a script every configuration gets a small synthetic
/// model of the thread count, wait policy and repetition.
#[derive(Debug, Clone, Default)]
pub struct StubExecutor {
    rules: Vec<(Option<Selector>, StubRule)>,
}

impl StubExecutor {
    pub fn synthetic() -> Self {
        StubExecutor::default()
    }

    pub fn from_script(text: &str) -> Result<Self, String> {
        let rules: Vec<StubRule> = serde_json::from_str(text).map_err(|e| format!("stub script: {e}"))?;
        let mut out = Vec::with_capacity(rules.len());
        for r in rules {
            let sel = if r.pattern.trim() == "*" {
                None
            } else {
                Some(r.pattern.parse::<Selector>().map_err(|e| format!("stub script: {e}"))?)
            };
            if r.fail.is_none() && (r.t_s.is_empty() || r.e_j.is_empty()) {
                return Err(format!("stub script: rule `{}` needs t_s and e_j values or a fail message", r.pattern));
            }
            out.push((sel, r));
        }
        Ok(StubExecutor { rules: out })
    }

    fn rule(&self, config: &RunConfig) -> Option<&StubRule> {
        self.rules.iter().find(|(sel, _)| sel.as_ref().is_none_or(|s| s.matches(config))).map(|(_, r)| r)
    }
}

impl Executor for StubExecutor {
    fn name(&self) -> &'static str {
        "stub"
    }

    fn prepare(&mut self, config: &RunConfig) -> Result<(), String> {
        if self.rules.is_empty() {
            return Ok(());
        }
        match self.rule(config) {
            None => Err(format!("no stub rule matches program `{}`", config.program)),
            Some(StubRule { fail: Some(msg), .. }) => Err(msg.clone()),
            Some(_) => Ok(()),
        }
    }

    fn run(&mut self, config: &RunConfig, rep: u32, _provider: &mut dyn EnergyProvider) -> Result<RawRun, String> {
        let (t_s, e_j) = match self.rule(config) {
            Some(r) => {
                let k = rep as usize;
                (r.t_s[k % r.t_s.len()], r.e_j[k % r.e_j.len()])
            }
            None => {
                let threads = f64::from(config.threads);
                let t = 0.5 + (1.0 + 0.1 * f64::from(rep)) / threads;
                // Actively waiting threads keep drawing power.
                let spin = if config.wait_policy == crate::config::WaitPolicy::Active { 5.0 * threads } else { 0.0 };
                (t, t * (30.0 + 10.0 * threads + spin))
            }
        };
        Ok(RawRun { t_s, e_j, domains_uj: Vec::new() })
    }
}

/// Compiles each configuration's source with its template and runs the
/// binary once per repetition.
///
/// Children get the parent environment without any `OMP_*` variable, plus
/// `OMP_NUM_THREADS` and, unless the policy is `default`, `OMP_WAIT_POLICY`.
/// The harness's own environment is never modified. A kernel that prints a
/// `LOOPWATT_MEASUREMENT {"t_s":..,"e_j":..}` line is trusted for its
/// numbers; otherwise the run is timed and metered from outside.
pub struct ShellExecutor {
    workdir: tempfile::TempDir,
    binary: Option<PathBuf>,
    parent_env: Vec<(OsString, OsString)>,
}

impl ShellExecutor {
    pub fn new() -> std::io::Result<Self> {
        Self::with_parent_env(std::env::vars_os().collect())
    }

    /// Uses `parent_env` in place of the process environment.
    pub fn with_parent_env(parent_env: Vec<(OsString, OsString)>) -> std::io::Result<Self> {
        Ok(ShellExecutor { workdir: tempfile::tempdir()?, binary: None, parent_env })
    }

    fn base_env(&self) -> Vec<(OsString, OsString)> {
        self.parent_env.iter().filter(|(k, _)| !k.to_string_lossy().starts_with("OMP_")).cloned().collect()
    }

    /// Complete environment of a benchmark process.
    pub fn child_env(&self, config: &RunConfig) -> Vec<(OsString, OsString)> {
        let mut env = self.base_env();
        env.push(("OMP_NUM_THREADS".into(), config.threads.to_string().into()));
        if let Some(p) = config.wait_policy.env_value() {
            env.push(("OMP_WAIT_POLICY".into(), p.into()));
        }
        env
    }

    /// The compile command as argument words.
    pub fn compile_command(config: &RunConfig, out: &Path) -> Vec<String> {
        let threads = config.threads.to_string();
        let out = out.display().to_string();
        config
            .compile_template
            .split_whitespace()
            .map(|w| {
                w.replace("{compiler}", &config.compiler)
                    .replace("{opt}", &config.opt_level)
                    .replace("{src}", &config.source)
                    .replace("{out}", &out)
                    .replace("{threads}", &threads)
                    .replace("{schedule}", config.schedule.name())
            })
            .collect()
    }
}

fn parse_measurement(stdout: &str) -> Option<(f64, f64)> {
    let line = stdout.lines().rev().find_map(|l| l.strip_prefix(MEASUREMENT_PREFIX))?;
    let v: serde_json::Value = serde_json::from_str(line.trim()).ok()?;
    Some((v.get("t_s")?.as_f64()?, v.get("e_j")?.as_f64()?))
}

fn tail(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let lines: Vec<&str> = text.lines().collect();
    lines[lines.len().saturating_sub(20)..].join("\n")
}

impl Executor for ShellExecutor {
    fn name(&self) -> &'static str {
        "shell"
    }

    fn prepare(&mut self, config: &RunConfig) -> Result<(), String> {
        self.binary = None;
        if !Path::new(&config.source).exists() {
            return Err(format!("source `{}` does not exist", config.source));
        }
        let out = self.workdir.path().join("kernel");
        let words = Self::compile_command(config, &out);
        let Some((program, args)) = words.split_first() else {
            return Err("empty compile template".into());
        };
        let output = Command::new(program)
            .args(args)
            .env_clear()
            .envs(self.base_env())
            .output()
            .map_err(|e| format!("cannot start `{program}`: {e}"))?;
        if !output.status.success() {
            return Err(format!("compile failed ({}): {}\n{}", output.status, words.join(" "), tail(&output.stderr)));
        }
        self.binary = Some(out);
        Ok(())
    }

    fn run(&mut self, config: &RunConfig, _rep: u32, provider: &mut dyn EnergyProvider) -> Result<RawRun, String> {
        let binary = self.binary.as_ref().ok_or("run before a successful prepare")?;
        let before = provider.read_counters();
        let start = Instant::now();
        let output = Command::new(binary)
            .env_clear()
            .envs(self.child_env(config))
            .output()
            .map_err(|e| format!("cannot start kernel: {e}"))?;
        let wall_s = start.elapsed().as_secs_f64();
        let after = provider.read_counters();
        if !output.status.success() {
            return Err(format!("kernel exited with {}\n{}", output.status, tail(&output.stderr)));
        }
        if let Some((t_s, e_j)) = parse_measurement(&String::from_utf8_lossy(&output.stdout)) {
            return Ok(RawRun { t_s, e_j, domains_uj: Vec::new() });
        }
        let (before, after) = match (before, after) {
            (Ok(b), Ok(a)) => (b, a),
            (Err(e), _) | (_, Err(e)) => {
                return Err(format!("kernel printed no measurement and the provider failed: {e}"))
            }
        };
        let delta = energy_delta(&before, &after).map_err(|e| e.to_string())?;
        Ok(RawRun { t_s: wall_s, e_j: delta.joules(), domains_uj: delta.per_domain })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measurement_line_is_found() {
        let out = "hello\nLOOPWATT_MEASUREMENT {\"t_s\":1.5,\"e_j\":20.25}\n";
        assert_eq!(parse_measurement(out), Some((1.5, 20.25)));
        assert_eq!(parse_measurement("nothing here"), None);
    }

    #[test]
    fn template_words_are_substituted() {
        let mut c = RunConfig::new("mm", "dir with space/mm.c");
        c.compiler = "gcc".into();
        let words = ShellExecutor::compile_command(&c, Path::new("/tmp/k"));
        assert_eq!(words, ["gcc", "-O3", "-fopenmp", "dir with space/mm.c", "-o", "/tmp/k"]);
    }

    #[test]
    fn first_matching_stub_rule_wins() {
        let script = r#"[{"match": "threads=2", "t_s": [1], "e_j": [5]}, {"match": "*", "t_s": [2], "e_j": [9]}]"#;
        let mut stub = StubExecutor::from_script(script).unwrap();
        let mut c = RunConfig::new("mm", "mm.c");
        let mut provider = loopwatt_energy::MockProvider::parse("0 0 0\n").unwrap();
        assert_eq!(stub.run(&c, 0, &mut provider).unwrap().e_j, 9.0);
        c.threads = 2;
        assert_eq!(stub.run(&c, 0, &mut provider).unwrap().e_j, 5.0);
    }
}
