//! Cross-checks between independent solution methods on shipped fixtures.

use tvc_core::app::fixture;
use tvc_core::euler::euler_report;
use tvc_core::scenario::PathSpec;
use tvc_core::solver::{brute_force_solve, grid_values, newton_euler_solve};

#[test]
fn brute_force_residual_shrinks_as_the_grid_refines() {
    let l = fixture("household.json").unwrap().load().unwrap();
    let Some(PathSpec::Solve(d)) = &l.scenario.path else { panic!("solve fixture") };
    let spec = l.solve_spec(d).unwrap();
    let obj = l.objective.as_ref();
    let newton = newton_euler_solve(obj, &spec, &l.space).unwrap();
    // Nested grids: each halves the spacing of the previous one. A coarse
    // grid can land near the optimum by chance, so the residual is only
    // required to trend down, not to fall at every step.
    let mut residuals = Vec::new();
    for points in [11, 21, 41, 81] {
        let grid = vec![grid_values(1.0, 2.0, points); spec.free_variables()];
        let brute = brute_force_solve(obj, &spec, &l.space, &grid).unwrap();
        let residual = euler_report(obj, &brute.path, &l.space, l.scenario.boundary, None).unwrap().max_abs;
        assert!(brute.value <= newton.report.value + 1e-12);
        residuals.push(residual);
    }
    for w in residuals.windows(2) {
        assert!(w[1] <= w[0], "{residuals:?}");
    }
    assert!(residuals[3] < residuals[0] / 5.0, "{residuals:?}");
}

#[test]
fn expression_fixtures_load_cleanly_and_run() {
    for name in ["dsl-quadratic.json", "dsl-log.json"] {
        let l = fixture(name).unwrap().load().unwrap();
        assert!(l.warnings.is_empty(), "{name}: {:?}", l.warnings);
        let path = l.build_path().unwrap().path;
        let (s, _) = tvc_core::app::tvc_section(&l, &path).unwrap();
        let dec = &s.results["decomposition"];
        assert!(dec["discrepancy"].as_f64().unwrap() <= 1e-6, "{name}: {dec}");
    }
}
