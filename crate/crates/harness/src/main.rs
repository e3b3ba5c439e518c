use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use loopwatt::config::Selector;
use loopwatt::{bench, emit_report, expand_matrix, parse_matrix, BenchOptions, Executor, ReportFormat, ResultSet};
use loopwatt::{ShellExecutor, StubExecutor};
use loopwatt_core::kernelgen::{emit_runtime_kernel, generate, KernelSpec};
use loopwatt_core::oracle::{check_equivalence, dump_trace, random_inputs, trace, InputSpec, Verdict, DEFAULT_SEED};
use loopwatt_core::transforms::apply_directives;
use loopwatt_core::{emit_source, parse_program, Program};
use loopwatt_energy::{calibrate, EnergyProvider, MockProvider, PowercapProvider};

/// Loop transformation, equivalence checking and energy benchmarking.
#[derive(Parser)]
#[command(name = "loopwatt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    Mock,
    Hardware,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExecutorKind {
    Stub,
    Shell,
}

#[derive(Subcommand)]
enum Command {
    /// Apply every directive in a program and print the result.
    Transform {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare two programs on random inputs; exit 1 below the required verdict.
    Verify {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 8)]
        inputs: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Fix an integer parameter, `name=value`.
        #[arg(long = "set", value_name = "NAME=VALUE")]
        set: Vec<String>,
        /// Weakest acceptable verdict.
        #[arg(long, default_value = "equal-within", value_parser = parse_verdict)]
        require: Verdict,
    },
    /// Generate a benchmark kernel, e.g. `gen matmul-naive n=8 element=float`.
    Gen {
        kind: String,
        /// Kernel parameters as `name=value`.
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Measure static power.
    Calibrate {
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        #[arg(long, value_enum, default_value_t = ProviderKind::Hardware)]
        provider: ProviderKind,
        #[arg(long)]
        mock_script: Option<PathBuf>,
    },
    /// Run a configuration matrix and write a results file.
    Bench {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ProviderKind::Hardware)]
        provider: ProviderKind,
        #[arg(long, value_enum, default_value_t = ExecutorKind::Shell)]
        executor: ExecutorKind,
        #[arg(long)]
        mock_script: Option<PathBuf>,
        #[arg(long)]
        stub_script: Option<PathBuf>,
        /// Static power calibration length in seconds.
        #[arg(long, default_value_t = 5.0)]
        calibration_s: f64,
        /// Peak package power, used to warn about counter wraps.
        #[arg(long)]
        p_max_w: Option<f64>,
        /// Timestamp recorded in the metadata; defaults to now on hardware and 0 with the mock provider.
        #[arg(long)]
        timestamp: Option<u64>,
        #[arg(long)]
        machine: Option<String>,
    },
    /// Tabulate a results file.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "table-markdown")]
        format: ReportFormat,
        /// `key=value,...` selecting exactly one record.
        #[arg(long)]
        baseline: Option<Selector>,
    },
    /// Print the statement-instance trace of a program on one random input.
    Trace {
        input: PathBuf,
        #[arg(long = "set", value_name = "NAME=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// 20 W over five seconds.
const DEFAULT_MOCK_SCRIPT: &str = "0 intel-rapl:0 0\n5000000 intel-rapl:0 100000000\n";

fn parse_verdict(s: &str) -> Result<Verdict, String> {
    Verdict::from_name(s).ok_or_else(|| format!("unknown verdict `{s}`"))
}

fn read_program(path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_program(&text).map_err(|e| anyhow!("{}:{e}", path.display()))
}

fn write_output(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn input_spec(set: &[String], seed: u64) -> Result<InputSpec> {
    let mut spec = InputSpec::default().seeded(seed);
    for s in set {
        let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("`{s}` is not name=value"))?;
        let v: i64 = v.trim().parse().with_context(|| format!("value of `{k}`"))?;
        spec = spec.with(k.trim(), v);
    }
    Ok(spec)
}

fn kernel_spec(kind: &str, params: &[String]) -> Result<KernelSpec> {
    let mut obj = serde_json::Map::new();
    obj.insert("kind".into(), kind.into());
    match kind {
        "matmul-naive" | "matmul-reordered" => {
            obj.insert("element".into(), "float".into());
        }
        "par-constructs" => {
            obj.insert("seed".into(), 0.into());
        }
        _ => {}
    }
    for p in params {
        let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("`{p}` is not name=value"))?;
        let value = match v.parse::<i64>() {
            Ok(n) => n.into(),
            Err(_) => v.into(),
        };
        obj.insert(k.to_ascii_lowercase(), value);
    }
    let spec: KernelSpec =
        serde_json::from_value(obj.into()).map_err(|e| anyhow!("bad kernel parameters for `{kind}`: {e}"))?;
    spec.validate()?;
    Ok(spec)
}

fn provider(kind: ProviderKind, script: Option<&Path>) -> Result<Box<dyn EnergyProvider>> {
    Ok(match (kind, script) {
        (ProviderKind::Hardware, Some(_)) => bail!("--mock-script needs --provider mock"),
        (ProviderKind::Hardware, None) => Box::new(PowercapProvider::from_env()?),
        (ProviderKind::Mock, Some(p)) => Box::new(MockProvider::from_file(p)?),
        (ProviderKind::Mock, None) => Box::new(MockProvider::parse(DEFAULT_MOCK_SCRIPT)?),
    })
}

fn seconds(s: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(s).map_err(|e| anyhow!("invalid duration {s}: {e}"))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Transform { input, output } => {
            let program = read_program(&input)?;
            let out = apply_directives(&program)?;
            write_output(output.as_deref(), &emit_source(&out))?;
        }
        Command::Verify { a, b, inputs, tol, seed, set, require } => {
            let (p, q) = (read_program(&a)?, read_program(&b)?);
            let stores = random_inputs::<f64>(&p, &input_spec(&set, seed)?, inputs)?;
            let report = check_equivalence(&p, &q, &stores, tol)?;
            println!("{report}");
            if report.verdict < require {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Gen { kind, params, output } => {
            let spec = kernel_spec(&kind, &params)?;
            let text = match spec {
                KernelSpec::ParConstructs { .. } | KernelSpec::Inactivity { .. } => emit_runtime_kernel(&spec)?,
                _ => emit_source(&generate(&spec)?),
            };
            write_output(output.as_deref(), &text)?;
        }
        Command::Calibrate { duration, provider: kind, mock_script } => {
            let mut p = provider(kind, mock_script.as_deref())?;
            let cal = calibrate::<f64>(p.as_mut(), seconds(duration)?)?;
            println!("p_static_w {}", cal.p_static_w);
            for (domain, uj) in &cal.delta.per_domain {
                println!("{domain} {uj} uJ");
            }
        }
        Command::Bench {
            matrix,
            out,
            provider: kind,
            executor,
            mock_script,
            stub_script,
            calibration_s,
            p_max_w,
            timestamp,
            machine,
        } => {
            let text = fs::read_to_string(&matrix).with_context(|| format!("reading {}", matrix.display()))?;
            let configs = expand_matrix(&parse_matrix(&text)?)?;
            let mut p = provider(kind, mock_script.as_deref())?;
            let mut exec: Box<dyn Executor> = match (executor, stub_script) {
                (ExecutorKind::Stub, None) => Box::new(StubExecutor::synthetic()),
                (ExecutorKind::Stub, Some(path)) => {
                    let script = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    Box::new(StubExecutor::from_script(&script).map_err(|e| anyhow!(e))?)
                }
                (ExecutorKind::Shell, None) => Box::new(ShellExecutor::new()?),
                (ExecutorKind::Shell, Some(_)) => bail!("--stub-script needs --executor stub"),
            };
            let mock = kind == ProviderKind::Mock;
            let options = BenchOptions {
                calibration: seconds(calibration_s)?,
                machine: machine.unwrap_or_else(|| if mock { "mock".into() } else { hostname() }),
                provider: if mock { "mock" } else { "powercap" }.into(),
                timestamp: timestamp.unwrap_or_else(|| if mock { 0 } else { now() }),
                p_max_w,
            };
            let results = bench(&configs, p.as_mut(), exec.as_mut(), &options)?;
            fs::write(&out, results.to_json()).with_context(|| format!("writing {}", out.display()))?;
            for r in &results.records {
                if let Some(d) = &r.diagnostics {
                    eprintln!("{}: {:?}: {d}", r.config.program, r.status);
                }
            }
        }
        Command::Report { input, format, baseline } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let results = ResultSet::from_json(&text)?;
            print!("{}", emit_report(&results, format, baseline.as_ref())?);
        }
        Command::Trace { input, set, seed } => {
            let program = read_program(&input)?;
            let store = random_inputs::<f64>(&program, &input_spec(&set, seed)?, 1)?.remove(0);
            print!("{}", dump_trace(&trace(&program, &store)?));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn hostname() -> String {
    fs::read_to_string("/etc/hostname").map(|s| s.trim().to_owned()).unwrap_or_else(|_| "unknown".into())
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// The error and its causes, skipping causes the message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
