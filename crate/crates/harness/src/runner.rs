use std::time::Duration;

use loopwatt_energy::{calibrate, wrap_horizon_s, EnergyError, EnergyProvider, Measurement};

use crate::config::RunConfig;
use crate::executor::Executor;
use crate::results::{Metadata, RawSeries, ResultSet, RunRecord, Status, SCHEMA_VERSION};
use crate::stats::geometric_mean;

/// Calibration state shared by every run of a session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Session {
    pub p_static_w: f64,
    pub wrap_horizon_s: Option<f64>,
}

fn failed(config: &RunConfig, session: &Session, raw: RawSeries, message: String) -> RunRecord {
    RunRecord {
        config: config.clone(),
        status: Status::Failed,
        t_s: None,
        p_w: None,
        e_j: None,
        p_static_w: session.p_static_w,
        raw,
        diagnostics: Some(message),
        warnings: Vec::new(),
    }
}

/// Runs every repetition of `config`, compensates each with the session's
/// static power and aggregates by geometric mean. Problems become the
/// record's status; nothing here aborts a matrix.
pub fn execute(
    config: &RunConfig,
    session: &Session,
    provider: &mut dyn EnergyProvider,
    executor: &mut dyn Executor,
) -> RunRecord {
    if let Err(e) = config.validate() {
        return failed(config, session, RawSeries::default(), e.to_string());
    }
    if let Err(msg) = executor.prepare(config) {
        return failed(config, session, RawSeries::default(), msg);
    }
    let mut raw = RawSeries::default();
    let mut anomalous = Vec::new();
    for rep in 0..config.reps {
        let run = match executor.run(config, rep, provider) {
            Ok(run) => run,
            Err(msg) => return failed(config, session, raw, format!("repetition {rep}: {msg}")),
        };
        let m = match Measurement::new(run.t_s, run.e_j, session.p_static_w) {
            Ok(m) => m,
            Err(e) => return failed(config, session, raw, format!("repetition {rep}: {e}")),
        };
        if m.is_anomalous() {
            anomalous.push(rep);
        }
        raw.t_s.push(m.t_exec_s);
        raw.e_total_j.push(m.e_total_j);
        raw.e_compensated_j.push(m.e_compensated_j);
        raw.p_avg_w.push(m.p_avg_w);
        if !run.domains_uj.is_empty() {
            raw.domains_uj.push(run.domains_uj);
        }
    }
    let mut warnings = Vec::new();
    if let Some(h) = session.wrap_horizon_s {
        if raw.t_s.iter().any(|&t| t > h) {
            warnings.push(format!("a repetition ran longer than the {h} s counter wrap horizon"));
        }
    }
    let mut record = RunRecord {
        config: config.clone(),
        status: Status::Anomaly,
        t_s: None,
        p_w: None,
        e_j: None,
        p_static_w: session.p_static_w,
        raw,
        diagnostics: None,
        warnings,
    };
    if !anomalous.is_empty() {
        record.diagnostics = Some(format!("negative compensated energy in repetitions {anomalous:?}"));
        return record;
    }
    // Zero compensated energy has no geometric mean either.
    match (geometric_mean(&record.raw.t_s), geometric_mean(&record.raw.e_compensated_j)) {
        (Ok(t), Ok(e)) => {
            record.status = Status::Ok;
            record.t_s = Some(t);
            record.e_j = Some(e);
            record.p_w = Some(e / t);
        }
        (Err(err), _) | (_, Err(err)) => record.diagnostics = Some(err.to_string()),
    }
    record
}

/// One record per configuration, in order, run strictly one after another.
pub fn run_matrix(
    configs: &[RunConfig],
    session: &Session,
    provider: &mut dyn EnergyProvider,
    executor: &mut dyn Executor,
) -> Vec<RunRecord> {
    configs.iter().map(|c| execute(c, session, provider, executor)).collect()
}

/// Everything a results file records besides the runs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub calibration: Duration,
    pub machine: String,
    pub provider: String,
    pub timestamp: u64,
    /// Peak power used to derive the wrap horizon, if known.
    pub p_max_w: Option<f64>,
}

/// Calibrates static power, then runs the matrix.
pub fn bench(
    configs: &[RunConfig],
    provider: &mut dyn EnergyProvider,
    executor: &mut dyn Executor,
    options: &BenchOptions,
) -> Result<ResultSet, EnergyError> {
    let cal = calibrate::<f64>(provider, options.calibration)?;
    let session =
        Session { p_static_w: cal.p_static_w, wrap_horizon_s: options.p_max_w.map(|p| wrap_horizon_s(&cal.sample, p)) };
    let records = run_matrix(configs, &session, provider, executor);
    Ok(ResultSet {
        schema_version: SCHEMA_VERSION,
        metadata: Metadata {
            machine: options.machine.clone(),
            provider: options.provider.clone(),
            executor: executor.name().to_owned(),
            calibration_s: options.calibration.as_secs_f64(),
            p_static_w: session.p_static_w,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: options.timestamp,
            wrap_horizon_s: session.wrap_horizon_s,
        },
        records,
    })
}
