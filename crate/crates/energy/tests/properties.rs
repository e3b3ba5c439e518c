use loopwatt_energy::*;
use proptest::prelude::*;

fn reading() -> impl Strategy<Value = (u64, u64, u64)> {
    (1u64..=u64::MAX / 4).prop_flat_map(|max| (Just(max), 0..=max, 0..=max))
}

fn sample(ts: u64, domains: &[(u64, u64)]) -> EnergySample {
    let readings = domains
        .iter()
        .enumerate()
        .map(|(k, &(e, max))| DomainReading { domain: format!("intel-rapl:{k}"), energy_uj: e, max_range_uj: max })
        .collect();
    EnergySample::new(readings, ts).unwrap()
}

proptest! {
    #[test]
    fn delta_is_bounded(domains in prop::collection::vec(reading(), 1..4), dt in 0u64..1_000_000) {
        let before = sample(10, &domains.iter().map(|&(m, b, _)| (b, m)).collect::<Vec<_>>());
        let after = sample(10 + dt, &domains.iter().map(|&(m, _, a)| (a, m)).collect::<Vec<_>>());
        let d = energy_delta(&before, &after).unwrap();
        let ranges: u64 = domains.iter().map(|&(m, _, _)| m).sum();
        prop_assert!(d.total_uj <= ranges);
        prop_assert_eq!(d.elapsed_us, dt);
    }

    #[test]
    fn delta_of_a_sample_with_itself_is_zero(domains in prop::collection::vec(reading(), 1..4)) {
        let s = sample(3, &domains.iter().map(|&(m, b, _)| (b, m)).collect::<Vec<_>>());
        prop_assert_eq!(energy_delta(&s, &s).unwrap().total_uj, 0);
    }

    #[test]
    fn compensation_is_linear(e in 0.0f64..1e4, k in 1.0f64..4.0, p in 0.0f64..100.0, t in 0.01f64..100.0) {
        // Scaling energy and time together scales the result.
        if let (Ok(a), Ok(b)) = (compensate(e, p, t), compensate(k * e, p, k * t)) {
            prop_assert!((b - k * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
        // Linear in energy alone with unit slope.
        if let (Ok(a), Ok(b)) = (compensate(e, p, t), compensate(e + 1.0, p, t)) {
            prop_assert!((b - a - 1.0).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn mock_replays_deterministically(values in prop::collection::vec(0u64..1_000_000, 2..8)) {
        let script: String = values.iter().enumerate().map(|(i, v)| format!("{} 0 {}\n", i * 1000, v)).collect();
        let mut a = MockProvider::parse(&script).unwrap();
        let mut b = MockProvider::parse(&script).unwrap();
        for _ in 0..values.len() {
            prop_assert_eq!(a.read_counters().unwrap(), b.read_counters().unwrap());
        }
    }
}
