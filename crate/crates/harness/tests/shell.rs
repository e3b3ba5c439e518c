use std::ffi::OsString;
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::process::Command;

use loopwatt::runner::{execute, Session};
use loopwatt::{Executor, RunConfig, ShellExecutor, Status, WaitPolicy};
use loopwatt_core::kernelgen::{emit_runtime_kernel, Construct, KernelSpec};
use loopwatt_energy::MockProvider;

/// A "source" that the copy template turns into the benchmark binary. It
/// dumps its environment and reports a fixed measurement.
fn script_source(dir: &Path) -> String {
    let path = dir.join("kernel.sh");
    let dump = dir.join("env.txt");
    let text =
        format!("#!/bin/sh\nenv > '{}'\necho 'LOOPWATT_MEASUREMENT {{\"t_s\":2.0,\"e_j\":50.0}}'\n", dump.display());
    fs::write(&path, text).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path.display().to_string()
}

fn config(dir: &Path, policy: WaitPolicy) -> RunConfig {
    RunConfig {
        compile_template: "cp {src} {out}".into(),
        threads: 4,
        wait_policy: policy,
        ..RunConfig::new("env", script_source(dir))
    }
}

fn parent_env() -> Vec<(OsString, OsString)> {
    let mut env: Vec<(OsString, OsString)> = std::env::vars_os().filter(|(k, _)| k == "PATH").collect();
    env.push(("OMP_SCHEDULE".into(), "guided".into()));
    env.push(("OMP_WAIT_POLICY".into(), "ACTIVE".into()));
    env.push(("KEEP_ME".into(), "1".into()));
    env
}

fn provider() -> MockProvider {
    MockProvider::parse("0 intel-rapl:0 0\n").unwrap()
}

fn dumped(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("env.txt")).unwrap().lines().map(String::from).collect()
}

#[test]
fn child_sees_only_the_configured_openmp_variables() {
    let dir = tempfile::tempdir().unwrap();
    let mut exec = ShellExecutor::with_parent_env(parent_env()).unwrap();
    let session = Session { p_static_w: 5.0, wrap_horizon_s: None };

    let r = execute(&config(dir.path(), WaitPolicy::Passive), &session, &mut provider(), &mut exec);
    assert_eq!(r.status, Status::Ok, "{:?}", r.diagnostics);
    assert_eq!((r.t_s, r.e_j), (Some(2.0), Some(40.0)));
    let env = dumped(dir.path());
    let omp: Vec<&String> = env.iter().filter(|l| l.starts_with("OMP_")).collect();
    assert_eq!(omp.len(), 2, "{omp:?}");
    assert!(env.contains(&"OMP_NUM_THREADS=4".to_owned()));
    assert!(env.contains(&"OMP_WAIT_POLICY=PASSIVE".to_owned()));
    assert!(env.contains(&"KEEP_ME=1".to_owned()));

    execute(&config(dir.path(), WaitPolicy::Default), &session, &mut provider(), &mut exec);
    let env = dumped(dir.path());
    assert!(!env.iter().any(|l| l.starts_with("OMP_WAIT_POLICY")), "{env:?}");
    assert!(env.contains(&"OMP_NUM_THREADS=4".to_owned()));
}

#[test]
fn harness_environment_is_untouched() {
    let before: Vec<_> = std::env::vars_os().collect();
    let dir = tempfile::tempdir().unwrap();
    let mut exec = ShellExecutor::new().unwrap();
    exec.prepare(&config(dir.path(), WaitPolicy::Active)).unwrap();
    exec.run(&config(dir.path(), WaitPolicy::Active), 0, &mut provider()).unwrap();
    assert_eq!(before, std::env::vars_os().collect::<Vec<_>>());
}

#[test]
fn compile_failure_is_a_failed_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path(), WaitPolicy::Default);
    c.compile_template = "false {src}".into();
    let mut exec = ShellExecutor::with_parent_env(parent_env()).unwrap();
    let r = execute(&c, &Session { p_static_w: 0.0, wrap_horizon_s: None }, &mut provider(), &mut exec);
    assert_eq!(r.status, Status::Failed);
    assert!(r.diagnostics.unwrap().contains("compile failed"));

    let missing = RunConfig::new("x", dir.path().join("nope.c").display().to_string());
    let r = execute(&missing, &Session { p_static_w: 0.0, wrap_horizon_s: None }, &mut provider(), &mut exec);
    assert_eq!(r.status, Status::Failed);
}

#[test]
fn nonzero_exit_is_a_failed_record() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("bad.sh");
    fs::write(&src, "#!/bin/sh\necho boom >&2\nexit 1\n").unwrap();
    fs::set_permissions(&src, fs::Permissions::from_mode(0o755)).unwrap();
    let c = RunConfig { compile_template: "cp {src} {out}".into(), ..RunConfig::new("bad", src.display().to_string()) };
    let mut exec = ShellExecutor::with_parent_env(parent_env()).unwrap();
    let r = execute(&c, &Session { p_static_w: 0.0, wrap_horizon_s: None }, &mut provider(), &mut exec);
    assert_eq!(r.status, Status::Failed);
    assert!(r.diagnostics.unwrap().contains("boom"));
}

/// Compiles and runs a generated runtime kernel when a C compiler with
/// OpenMP is available.
#[test]
fn generated_runtime_kernel_runs() {
    let cc_works = Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success());
    if !cc_works {
        eprintln!("skipped: no C compiler");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let spec = KernelSpec::ParConstructs {
        iterations: 2,
        num_tasks: 8,
        max_task_size_us: 50,
        num_threads: 2,
        construct: Construct::Taskloop,
        seed: 3,
    };
    let src = dir.path().join("par.c");
    fs::write(&src, emit_runtime_kernel(&spec).unwrap()).unwrap();
    let c = RunConfig { threads: 2, ..RunConfig::new("par", src.display().to_string()) };
    let mut exec = ShellExecutor::new().unwrap();
    exec.prepare(&c).unwrap();
    let run = exec.run(&c, 0, &mut provider()).unwrap();
    assert!(run.t_s > 0.0 && run.t_s < 10.0, "{run:?}");
}
