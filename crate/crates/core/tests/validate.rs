use loopwatt_core::randprog::random_program;
use loopwatt_core::validate;
use loopwatt_core::validate::loop_nest_depth;
use proptest::prelude::*;

proptest! {
    #[test]
    fn validation_is_idempotent(seed in any::<u64>()) {
        let p = random_program(seed);
        prop_assert_eq!(validate(&p), validate(&p));
    }

    #[test]
    fn every_loop_has_depth_at_least_one(seed in any::<u64>()) {
        let p = random_program(seed);
        for (_, l) in p.loops() {
            prop_assert!(loop_nest_depth(l) >= 1);
        }
    }

    #[test]
    fn directives_reference_existing_sites(seed in any::<u64>()) {
        let p = random_program(seed);
        let sites: Vec<_> = p.loops().into_iter().map(|(s, _)| s).collect();
        for site in p.directives.keys() {
            prop_assert!(sites.contains(site));
        }
    }
}

#[test]
fn dangling_directive_is_reported() {
    let p = random_program(1).with_directive(loopwatt_core::LoopSite(999), loopwatt_core::Directive::unroll_full());
    let report = validate(&p);
    assert!(!report.is_ok());
    assert!(report.to_string().contains("non-existent loop site"));
}
