//! Closed-form reference fields and refinement studies.

use crate::error::{Error, Result};
use crate::grid::{build_grid, FieldRole, ScalarField, StencilSet};
use crate::models::RhsModel;
use crate::ops::{operator_field, OperatorKind};
use crate::solver::{solve, BoundaryData, SolverConfig};

/// Tolerance on `Σ a_i^3 = 0` for Aronsson coefficients.
pub const ARONSSON_BALANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleField {
    /// `a_1 |x_1|^{4/3} + a_2 |x_2|^{4/3}` with `a_1^3 + a_2^3 = 0`.
    Aronsson { a: [f64; 2] },
    /// `K |x - center|^σ`.
    RadialMonomial { k: f64, sigma: f64, center: [f64; 2] },
    /// `p · x + c`.
    Affine { p: [f64; 2], c: f64 },
    /// `|x - center|`.
    Cone { center: [f64; 2] },
}

impl OracleField {
    pub fn aronsson(a: [f64; 2]) -> Result<Self> {
        let balance = a[0].powi(3) + a[1].powi(3);
        if !(balance.abs() <= ARONSSON_BALANCE_TOL) || !a.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!(
                "Aronsson coefficients {a:?} violate a1^3 + a2^3 = 0"
            )));
        }
        Ok(OracleField::Aronsson { a })
    }

    /// The sign-balanced instance `|x_1|^{4/3} - |x_2|^{4/3}`.
    pub fn aronsson_default() -> Self {
        OracleField::Aronsson { a: [1.0, -1.0] }
    }

    pub fn radial_monomial(k: f64, sigma: f64, center: [f64; 2]) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite() && sigma > 1.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "radial monomial needs K >= 0 and sigma > 1, got K={k} sigma={sigma}"
            )));
        }
        Ok(OracleField::RadialMonomial { k, sigma, center })
    }

    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        match *self {
            OracleField::Aronsson { a } => {
                a[0] * x[0].abs().powf(4.0 / 3.0) + a[1] * x[1].abs().powf(4.0 / 3.0)
            }
            OracleField::RadialMonomial { k, sigma, center } => {
                k * (x[0] - center[0]).hypot(x[1] - center[1]).powf(sigma)
            }
            OracleField::Affine { p, c } => p[0] * x[0] + p[1] * x[1] + c,
            OracleField::Cone { center } => (x[0] - center[0]).hypot(x[1] - center[1]),
        }
    }

    /// Distance from `x` to the set where the oracle is not `C^2`
    /// (coordinate axes for Aronsson, the centre for radial fields).
    pub fn singular_distance(&self, x: [f64; 2]) -> f64 {
        match *self {
            OracleField::Aronsson { .. } => x[0].abs().min(x[1].abs()),
            OracleField::RadialMonomial { center, .. } | OracleField::Cone { center } => {
                (x[0] - center[0]).hypot(x[1] - center[1])
            }
            OracleField::Affine { .. } => f64::INFINITY,
        }
    }

    /// `|Du(x)|`.
    pub fn gradient_norm(&self, x: [f64; 2]) -> f64 {
        match *self {
            OracleField::Aronsson { a } => {
                let d = |c: f64, t: f64| c * (4.0 / 3.0) * t.abs().cbrt() * t.signum();
                d(a[0], x[0]).hypot(d(a[1], x[1]))
            }
            OracleField::RadialMonomial { k, sigma, center } => {
                k * sigma * (x[0] - center[0]).hypot(x[1] - center[1]).powf(sigma - 1.0)
            }
            OracleField::Affine { p, .. } => p[0].hypot(p[1]),
            OracleField::Cone { .. } => 1.0,
        }
    }

    /// Boundary trace equal to the oracle itself.
    pub fn boundary(&self) -> BoundaryData {
        let oracle = *self;
        BoundaryData::new(format!("oracle:{oracle:?}"), move |x| oracle.evaluate(x))
    }

    pub fn sample(&self, grid: &crate::grid::Grid2D) -> ScalarField {
        let values = (0..grid.node_count())
            .map(|k| self.evaluate(grid.point_flat(k)))
            .collect();
        ScalarField::new(*grid, values, FieldRole::Oracle)
            .expect("oracle fields are finite on the square")
    }
}

pub fn sample(oracle: &OracleField, grid: &crate::grid::Grid2D) -> ScalarField {
    oracle.sample(grid)
}

/// Exact `Δ∞u` of the oracle at `x`, off its singular set.
pub fn analytic_inf_laplacian(oracle: &OracleField, x: [f64; 2]) -> Result<f64> {
    if oracle.singular_distance(x) == 0.0 {
        return Err(Error::SingularPoint(format!("{x:?} lies on the singular set of {oracle:?}")));
    }
    Ok(match *oracle {
        OracleField::RadialMonomial { k, sigma, center } => {
            let r = (x[0] - center[0]).hypot(x[1] - center[1]);
            k.powi(3) * sigma.powi(3) * (sigma - 1.0) * r.powf(3.0 * sigma - 4.0)
        }
        OracleField::Aronsson { .. } | OracleField::Affine { .. } | OracleField::Cone { .. } => 0.0,
    })
}

/// Exact value of the chosen operator form: `Δ∞u / |Du|^γ`.
pub fn analytic_operator(oracle: &OracleField, x: [f64; 2], kind: OperatorKind) -> Result<f64> {
    let direct = analytic_inf_laplacian(oracle, x)?;
    let gamma = kind.gamma();
    if gamma == 0.0 || direct == 0.0 {
        return Ok(direct);
    }
    let g = oracle.gradient_norm(x);
    if g == 0.0 {
        return Err(Error::SingularPoint(format!("vanishing gradient at {x:?}")));
    }
    Ok(direct / g.powf(gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementRow {
    pub n_per_side: usize,
    pub h: f64,
    /// Sup over sampled nodes of `|discrete operator(oracle) - analytic value|`.
    pub sup_residual: f64,
    /// Sup error of the solve against the oracle, when a solve was requested.
    pub sup_error: Option<f64>,
    /// Smallest distance to the singular set among sampled nodes.
    pub min_sampled_distance: f64,
    pub sampled_nodes: usize,
    pub sweeps_used: Option<usize>,
    pub stencil_width: usize,
}

/// Consistency (and optionally convergence) table over a sequence of grids
/// on `[-half_width, half_width]^2`.
///
/// `stencils` holds either one stencil for every grid or one per grid; at a
/// fixed width the directional bias of the scheme does not vanish with `h`,
/// so convergence studies widen the stencil along with the grid.
///
/// Nodes within `2 W h` of the oracle's singular set are skipped. With
/// `solver` set, each grid is also solved with the oracle as Dirichlet data
/// and the sup error of the solution is recorded.
pub fn refinement_study(
    oracle: &OracleField,
    model: &RhsModel,
    grids: &[usize],
    half_width: f64,
    stencils: &[StencilSet],
    kind: OperatorKind,
    solver: Option<&SolverConfig>,
) -> Result<Vec<RefinementRow>> {
    if grids.len() < 3 {
        return Err(Error::invalid(format!(
            "refinement study needs at least 3 grids, got {}",
            grids.len()
        )));
    }
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid sizes must strictly increase (h strictly decreasing)"));
    }
    if stencils.len() != 1 && stencils.len() != grids.len() {
        return Err(Error::invalid(format!(
            "expected 1 or {} stencils, got {}",
            grids.len(),
            stencils.len()
        )));
    }
    let mut rows = Vec::with_capacity(grids.len());
    for (idx, &n) in grids.iter().enumerate() {
        let stencil = &stencils[idx.min(stencils.len() - 1)];
        let grid = build_grid(n, half_width)?;
        let h = grid.spacing();
        let collar = 2.0 * stencil.width() as f64 * h;
        let field = oracle.sample(&grid);
        let op = operator_field(&field, stencil, kind)?;

        let solved = match solver {
            Some(cfg) => Some(solve(&grid, stencil, model, &oracle.boundary(), kind, cfg)?),
            None => None,
        };

        let mut sup_residual: f64 = 0.0;
        let mut sup_error: f64 = 0.0;
        let mut min_dist = f64::INFINITY;
        let mut sampled = 0;
        for flat in grid.supported_nodes(stencil.width()) {
            let x = grid.point_flat(flat);
            let dist = oracle.singular_distance(x);
            if dist <= collar {
                continue;
            }
            sampled += 1;
            min_dist = min_dist.min(dist);
            let exact = analytic_operator(oracle, x, kind)?;
            sup_residual = sup_residual.max((op.values()[flat] - exact).abs());
            if let Some(out) = &solved {
                sup_error = sup_error.max((out.field.values()[flat] - field.values()[flat]).abs());
            }
        }
        rows.push(RefinementRow {
            n_per_side: n,
            h,
            sup_residual,
            sup_error: solved.as_ref().map(|_| sup_error),
            min_sampled_distance: min_dist,
            sampled_nodes: sampled,
            sweeps_used: solved.as_ref().map(|o| o.sweeps_used),
            stencil_width: stencil.width(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_stencil;
    use crate::models::RhsModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_examples() {
        let a = OracleField::aronsson_default();
        assert_eq!(a.evaluate([1.0, 1.0]), 0.0);
        let r = OracleField::radial_monomial(1.0, 4.0 / 3.0, [0.0, 0.0]).unwrap();
        assert!((r.evaluate([0.3, 0.4]) - 0.5f64.powf(4.0 / 3.0)).abs() < 1e-15);
        let l = OracleField::Affine { p: [2.0, 0.0], c: 1.0 };
        assert_eq!(l.evaluate([0.5, 0.3]), 2.0);
        let g = build_grid(17, 1.0).unwrap();
        let f = sample(&a, &g);
        assert_eq!(f.at(g.origin()), 0.0);
        assert_eq!(f.role(), FieldRole::Oracle);
    }

    #[test]
    fn aronsson_balance_is_enforced() {
        assert!(OracleField::aronsson([1.0, -1.0]).is_ok());
        assert!(OracleField::aronsson([2.0, -2.0]).is_ok());
        assert!(OracleField::aronsson([1.0, -0.9]).is_err());
        assert!(OracleField::radial_monomial(1.0, 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn analytic_examples() {
        let r = OracleField::radial_monomial(1.0, 2.0, [0.0, 0.0]).unwrap();
        assert!((analytic_inf_laplacian(&r, [0.5, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(
            analytic_inf_laplacian(&r, [0.0, 0.0]),
            Err(Error::SingularPoint(_))
        ));
        let a = OracleField::aronsson_default();
        assert_eq!(analytic_inf_laplacian(&a, [0.3, -0.7]).unwrap(), 0.0);
        assert!(analytic_inf_laplacian(&a, [0.0, 0.7]).is_err());
    }

    #[test]
    fn radial_oracle_matches_deadcore_rhs() {
        let (sigma, k) = crate::models::deadcore_radial_constant(1.0, 1.0, 0.0).unwrap();
        let r = OracleField::radial_monomial(k, sigma, [0.0, 0.0]).unwrap();
        let model = RhsModel::dead_core(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rad: f64 = rng.gen_range(0.01..2.0);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = [rad * th.cos(), rad * th.sin()];
            let lhs = analytic_inf_laplacian(&r, x).unwrap();
            let rhs = model.evaluate(x, r.evaluate(x), r.gradient_norm(x));
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs(), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn aronsson_gradient_vanishes_at_origin() {
        let a = OracleField::aronsson_default();
        assert_eq!(a.gradient_norm([0.0, 0.0]), 0.0);
        let x = [0.3, 0.2];
        let eps = 1e-6;
        let fd = |dx: f64, dy: f64| {
            (a.evaluate([x[0] + dx, x[1] + dy]) - a.evaluate([x[0] - dx, x[1] - dy])) / (2.0 * eps)
        };
        let g = fd(eps, 0.0).hypot(fd(0.0, eps));
        assert!((g - a.gradient_norm(x)).abs() < 1e-8);
    }

    #[test]
    fn affine_refinement_is_exact() {
        let s = build_stencil(2).unwrap();
        let oracle = OracleField::Affine { p: [0.7, -0.4], c: 0.1 };
        let rows = refinement_study(
            &oracle,
            &RhsModel::zero(),
            &[17, 33, 65],
            1.0,
            std::slice::from_ref(&s),
            OperatorKind::Direct,
            None,
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.sup_residual <= 1e-10 && r.sup_error.is_none()));
    }

    #[test]
    fn refinement_rejects_short_or_unordered_lists() {
        let s = build_stencil(1).unwrap();
        let o = OracleField::aronsson_default();
        let run = |g: &[usize]| {
            refinement_study(&o, &RhsModel::zero(), g, 1.0, std::slice::from_ref(&s), OperatorKind::Direct, None)
        };
        assert!(run(&[17, 33]).is_err());
        assert!(run(&[33, 17, 65]).is_err());
        let two = [build_stencil(1).unwrap(), build_stencil(2).unwrap()];
        assert!(refinement_study(&o, &RhsModel::zero(), &[17, 33, 65], 1.0, &two, OperatorKind::Direct, None).is_err());
    }

    #[test]
    fn collar_is_respected() {
        for w in 1..=3 {
            let s = build_stencil(w).unwrap();
            let o = OracleField::aronsson_default();
            let rows = refinement_study(
                &o,
                &RhsModel::zero(),
                &[33, 65, 129],
                1.0,
                std::slice::from_ref(&s),
                OperatorKind::Direct,
                None,
            )
            .unwrap();
            for r in rows {
                assert!(r.min_sampled_distance > 2.0 * w as f64 * r.h);
                assert!(r.sampled_nodes > 0);
            }
        }
    }
}
