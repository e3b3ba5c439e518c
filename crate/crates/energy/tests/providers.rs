use std::fs;
use std::time::Duration;

use loopwatt_energy::*;

fn zone(root: &std::path::Path, name: &str, energy: u64, max: u64) {
    let dir = root.join(name);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("energy_uj"), format!("{energy}\n")).unwrap();
    fs::write(dir.join("max_energy_range_uj"), format!("{max}\n")).unwrap();
}

#[test]
fn powercap_reads_top_level_zones() {
    let root = tempfile::tempdir().unwrap();
    zone(root.path(), "intel-rapl:1", 500, 1000);
    zone(root.path(), "intel-rapl:0", 1234, 262_143);
    zone(root.path(), "intel-rapl:0:0", 7, 262_143);
    fs::create_dir_all(root.path().join("dtpm")).unwrap();
    let mut p = PowercapProvider::new(root.path()).unwrap();
    assert_eq!(p.domains(), ["intel-rapl:0", "intel-rapl:1"]);
    let s = read_counters(&mut p).unwrap();
    assert_eq!(s.domain("intel-rapl:0").unwrap().energy_uj, 1234);
    assert_eq!(s.domain("intel-rapl:1").unwrap().max_range_uj, 1000);
}

#[test]
fn powercap_errors_name_the_domain() {
    let root = tempfile::tempdir().unwrap();
    assert!(matches!(PowercapProvider::new(root.path()), Err(EnergyError::NoDomains)));
    zone(root.path(), "intel-rapl:0", 1, 10);
    let mut p = PowercapProvider::new(root.path()).unwrap();
    fs::remove_file(root.path().join("intel-rapl:0/energy_uj")).unwrap();
    match p.read_counters() {
        Err(EnergyError::Unreadable { domain, path, .. }) => {
            assert_eq!(domain, "intel-rapl:0");
            assert!(path.ends_with("energy_uj"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn mock_reports_scripted_value() {
    let mut m = MockProvider::parse("0 package 1234\n").unwrap();
    assert_eq!(m.read_counters().unwrap().domains[0].energy_uj, 1234);
}

#[test]
fn constant_power_calibrates_exactly() {
    // 50 W for 5 s is 250 J.
    let mut m = MockProvider::parse("0 0 1000000\n5000000 0 251000000\n").unwrap();
    let w: f64 = calibrate_static(&mut m, DEFAULT_CALIBRATION).unwrap();
    assert_eq!(w, 50.0);
}

#[test]
fn wrap_inside_calibration_interval() {
    // Expected consumption by the wrap rule, computed before running:
    // (max - before) + after = (1_000_000 - 900_000) + 50_000 = 150_000 µJ
    // over 3 s, i.e. 0.05 W.
    let script = "range 0 1000000\n0 0 900000\n3000000 0 50000\n";
    let expected = ((1_000_000u64 - 900_000) + 50_000) as f64 / 1e6 / 3.0;
    let mut m = MockProvider::parse(script).unwrap();
    let w: f64 = calibrate_static(&mut m, Duration::from_secs(3)).unwrap();
    assert_eq!(w, expected);
}

#[test]
fn zero_duration_is_rejected() {
    let mut m = MockProvider::parse("0 0 1\n1 0 2\n").unwrap();
    assert!(matches!(calibrate_static::<f64>(&mut m, Duration::ZERO), Err(EnergyError::Precondition(_))));
}

#[test]
fn hardware_needs_a_full_second() {
    let root = tempfile::tempdir().unwrap();
    zone(root.path(), "intel-rapl:0", 1, 10);
    let mut p = PowercapProvider::new(root.path()).unwrap();
    assert!(matches!(calibrate_static::<f64>(&mut p, Duration::from_millis(10)), Err(EnergyError::Precondition(_))));
}
