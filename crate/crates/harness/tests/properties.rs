use loopwatt::{expand_matrix, geometric_mean, parse_matrix};
use proptest::prelude::*;

proptest! {
    #[test]
    fn geomean_lies_between_extremes(values in prop::collection::vec(1e-6f64..1e6, 1..=10)) {
        let g = geometric_mean(&values).unwrap();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(0.0, f64::max);
        prop_assert!(g >= lo * (1.0 - 1e-12) && g <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn geomean_is_the_nth_root_of_the_product(values in prop::collection::vec(0.1f64..10.0, 1..=10)) {
        let g = geometric_mean(&values).unwrap();
        let root = values.iter().product::<f64>().powf(1.0 / values.len() as f64);
        prop_assert!((g - root).abs() <= 1e-12 * root);
    }

    #[test]
    fn geomean_of_identical_values(v in 1e-9f64..1e9, n in 1usize..=10) {
        prop_assert_eq!(geometric_mean(&vec![v; n]).unwrap(), v);
    }

    #[test]
    fn matrix_expands_to_the_full_product(threads in prop::collection::vec(1u32..64, 1..4), reps in prop::collection::vec(3u32..=10, 1..4)) {
        let text = serde_json::json!({"program": "p", "source": "p.c", "threads": threads, "reps": reps}).to_string();
        let m = parse_matrix(&text).unwrap();
        let configs = expand_matrix(&m).unwrap();
        prop_assert_eq!(configs.len(), threads.len() * reps.len());
        prop_assert_eq!(&configs, &expand_matrix(&parse_matrix(&text).unwrap()).unwrap());
        // `reps` sorts before `threads`, so it is the outer axis.
        prop_assert_eq!(configs[0].reps, reps[0]);
        prop_assert_eq!(configs[1 % configs.len()].threads, threads[1 % threads.len()]);
    }
}

#[test]
fn geomean_rejects_nonpositive_values() {
    assert!(geometric_mean::<f64>(&[]).is_err());
    assert!(geometric_mean(&[1.0, 0.0]).is_err());
    assert!(geometric_mean(&[1.0, -2.0]).is_err());
}
