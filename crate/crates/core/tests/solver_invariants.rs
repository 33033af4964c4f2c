use inflap_core::*;
use proptest::prelude::*;

fn cfg(tol: f64) -> SolverConfig {
    SolverConfig { tolerance: tol, max_sweeps: 20_000, ..SolverConfig::default() }
}

fn tilted(seed: u64) -> BoundaryData {
    BoundaryData::random_fourier(seed, 4).plus(&BoundaryData::affine([4.0, 2.0], 0.0))
}

#[test]
fn nested_solve_matches_direct_solve() {
    let grid = build_grid(65, 1.0).unwrap();
    let stencil = build_stencil(2).unwrap();
    let bd = tilted(11);
    let c = cfg(1e-10);
    let plain = solve(&grid, &stencil, &RhsModel::zero(), &bd, OperatorKind::Direct, &c).unwrap();
    let nested = solve_nested(&grid, &stencil, &RhsModel::zero(), &bd, OperatorKind::Direct, &c).unwrap();
    assert!(plain.converged && nested.converged);
    assert_eq!(nested.grid(), &grid);
    let diff = plain
        .field
        .values()
        .iter()
        .zip(nested.field.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "diff {diff}");
    assert!(nested.sweeps_used <= plain.sweeps_used, "{} > {}", nested.sweeps_used, plain.sweeps_used);
}

#[test]
fn deadcore_solution_is_nonnegative_with_a_core() {
    let grid = build_grid(65, 2.0).unwrap();
    let stencil = build_stencil(2).unwrap();
    let model = RhsModel::dead_core(1.0, 1.0).unwrap();
    let out = solve(&grid, &stencil, &model, &BoundaryData::constant(1.0), OperatorKind::Direct, &cfg(1e-9)).unwrap();
    assert!(out.converged);
    assert!(out.field.values().iter().all(|&v| (-1e-9..=1.0).contains(&v)));
    let h = grid.spacing();
    assert!(out.field.at(grid.origin()) < 0.25 * h * h, "{}", out.field.at(grid.origin()));
}

#[test]
fn operator_field_vanishes_on_affine_data() {
    let grid = build_grid(33, 1.0).unwrap();
    let stencil = build_stencil(3).unwrap();
    let f = ScalarField::from_fn(grid, FieldRole::Solution, |x| 0.4 * x[0] - 1.3 * x[1] + 0.25).unwrap();
    let lap = operator_field(&f, &stencil, OperatorKind::Direct).unwrap();
    assert!(lap.values().iter().all(|v| v.abs() < 1e-9));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn harmonic_solutions_obey_max_principle(seed in any::<u64>()) {
        let grid = build_grid(33, 1.0).unwrap();
        let stencil = build_stencil(2).unwrap();
        let out = solve(&grid, &stencil, &RhsModel::zero(), &tilted(seed), OperatorKind::Direct, &cfg(1e-9)).unwrap();
        prop_assert!(out.converged);
        prop_assert!(max_principle_check(&out));
    }

    #[test]
    fn ordered_traces_give_ordered_solutions(seed in any::<u64>(), lift in 0.01f64..0.5) {
        let grid = build_grid(33, 1.0).unwrap();
        let stencil = build_stencil(2).unwrap();
        let lo = tilted(seed);
        let hi = lo.plus(&BoundaryData::constant(lift));
        let u = solve(&grid, &stencil, &RhsModel::zero(), &lo, OperatorKind::Direct, &cfg(1e-9)).unwrap();
        let v = solve(&grid, &stencil, &RhsModel::zero(), &hi, OperatorKind::Direct, &cfg(1e-9)).unwrap();
        prop_assert!(comparison_check(&u, &v).unwrap());
        prop_assert!(!comparison_check(&v, &u).unwrap());
    }

    #[test]
    fn lipschitz_bound_of_affine_traces(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let grid = build_grid(33, 1.0).unwrap();
        let stencil = build_stencil(2).unwrap();
        let out = solve(&grid, &stencil, &RhsModel::zero(), &BoundaryData::affine([a, b], 0.0), OperatorKind::Direct, &cfg(1e-11)).unwrap();
        let lip = lipschitz_certificate(&out, &stencil);
        prop_assert!(lip <= a.hypot(b) + 1e-8, "{lip} vs {}", a.hypot(b));
    }
}
