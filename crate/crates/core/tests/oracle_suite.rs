use qmzi_core::oracle::{
    golden_file, golden_to_string, run_suite, summarize, GridConfig, Quantity,
};

#[test]
fn default_grid_passes_and_is_reproducible() {
    let grid = GridConfig::default();
    let start = std::time::Instant::now();
    let verdicts = run_suite(&grid).unwrap();
    eprintln!(
        "{} verdicts in {:.1} s",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    for s in summarize(&verdicts) {
        eprintln!(
            "{:<20} {:>6} cases, worst {:.3e} ({})",
            s.quantity, s.cases, s.worst_relative_error, s.worst_case
        );
    }
    let failed: Vec<_> = verdicts
        .iter()
        .filter(|v| !v.passed)
        .map(|v| {
            format!(
                "{} a={} o={} rel={:e} {:?}",
                v.case.name, v.analytic_value, v.oracle_value, v.relative_error, v.reason
            )
        })
        .collect();
    assert!(failed.is_empty(), "{failed:#?}");
    for q in [
        Quantity::Qfi,
        Quantity::JxVar,
        Quantity::JzStats,
        Quantity::DetectionDphi,
        Quantity::StateFidelity,
    ] {
        assert!(verdicts.iter().any(|v| v.case.quantity == q));
    }
    let again = run_suite(&grid).unwrap();
    assert_eq!(
        golden_to_string(&golden_file(&verdicts)).unwrap(),
        golden_to_string(&golden_file(&again)).unwrap()
    );
}
