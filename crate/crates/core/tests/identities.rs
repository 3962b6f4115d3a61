use greenmono_core::identity_checker::*;

#[test]
fn full_suite_passes_on_the_three_charts() {
    let rep = run_suite(&CheckSuiteConfig::default()).unwrap();
    assert!(rep.pass(), "{}", rep.summary_table());
    assert!(rep.max_rel_residual() < 1e-4);
    assert!(rep.converged_fraction >= 0.9);
    assert_eq!(rep.summary.len(), IdentityId::ALL.len());
    for id in IdentityId::ALL {
        assert!(rep.summary.iter().any(|s| s.identity_id == id && s.tuples > 0), "{id}");
    }
    assert_eq!(rep.cross_path.len(), 4);
    assert!(rep.cross_path.iter().all(|c| c.pass && c.comparisons > 0));
    let charts: std::collections::BTreeSet<&str> = rep.rows.iter().map(|r| r.chart.as_str()).collect();
    assert_eq!(charts.len(), 3);
}

#[test]
fn reports_are_reproducible_from_the_seed() {
    let config = CheckSuiteConfig { points_per_chart: 3, ..CheckSuiteConfig::default() };
    let a = run_suite(&config).unwrap().to_csv(&["seed".into()]);
    let b = run_suite(&config).unwrap().to_csv(&["seed".into()]);
    assert_eq!(a, b);
    let other = CheckSuiteConfig { seed: config.seed + 1, ..config };
    assert_ne!(a, run_suite(&other).unwrap().to_csv(&["seed".into()]));
}
