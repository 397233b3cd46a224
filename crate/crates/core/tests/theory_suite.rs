use neutral_core::theory::{
    dcl_edge_suite, lp_constant_closed_form, lp_constant_edge, verify_grid, EdgeCase, LossName, TheoryGrid,
};

#[test]
fn default_grid_passes_and_contains_reference_cells() {
    let reports = verify_grid(&TheoryGrid::default()).unwrap();
    assert!(reports.iter().all(|r| r.passed()), "{:?}", reports.iter().find(|r| !r.passed()));
    let identity_k2 = reports
        .iter()
        .find(|r| r.loss_name == LossName::Dcl && r.edge_case == EdgeCase::Identity && r.k == 2)
        .unwrap();
    assert!((identity_k2.numeric_value - 1.386).abs() < 1e-3);
    let counter = reports
        .iter()
        .find(|r| r.edge_case == EdgeCase::Counterexample && r.tau == 1.0)
        .unwrap();
    assert!((counter.numeric_value - 0.627).abs() < 1e-3);
}

#[test]
fn identity_value_is_k_log_k() {
    for k in [2, 3, 4, 12] {
        let suite = dcl_edge_suite(k, 1.0, 0.1, 0).unwrap();
        let id = suite.iter().find(|r| r.edge_case == EdgeCase::Identity).unwrap();
        assert!((id.numeric_value - k as f64 * (k as f64).ln()).abs() < 1e-8);
    }
}

#[test]
fn prediction_loss_vanishes_at_large_c() {
    let r = lp_constant_edge(12, 20.0).unwrap();
    assert!(r.passed());
    assert!(r.numeric_value < 3e-7);
    let want = 12.0 * (11.0 * (-20.0f64).exp()).ln_1p();
    assert!((lp_constant_closed_form(12, 20.0) - want).abs() < 1e-15);
}

#[test]
fn constant_views_keep_a_gradient() {
    for k in [2, 3, 4, 12] {
        for c in [1.0, 5.0, 20.0] {
            let suite = dcl_edge_suite(k, c, 0.1, 7).unwrap();
            let r = suite.iter().find(|r| r.edge_case == EdgeCase::Constant).unwrap();
            assert!(r.gradient_norm > 1e-6, "K={k} C={c}");
        }
    }
}
