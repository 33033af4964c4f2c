//! Post-processing of discrete solutions: critical and branching sets,
//! dyadic sup-norm decay with power-law fits, non-degeneracy on shells,
//! reflection constants and flatness quantities.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ball_nodes, shell_nodes, Grid2D, Node, ScalarField, StencilSet};
use crate::models::{nondegeneracy_constant, RhsModel};
use crate::ops::{central_gradient, chord_gradient};

/// Nodes where `|u| <= τ_u` and `g_h <= τ_g`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSet {
    pub nodes: Vec<usize>,
    pub tau_u: f64,
    pub tau_g: f64,
}

/// Default thresholds `(10 h^2, 2 h^{1/3})`.
pub fn default_critical_thresholds(grid: &Grid2D) -> (f64, f64) {
    let h = grid.spacing();
    (10.0 * h * h, 2.0 * h.cbrt())
}

/// Thresholded critical set over nodes with full stencil support.
pub fn detect_critical_set(
    field: &ScalarField,
    stencil: &StencilSet,
    tau_u: f64,
    tau_g: f64,
) -> Result<CriticalSet> {
    if !(tau_u > 0.0 && tau_g > 0.0) {
        return Err(Error::invalid(format!(
            "critical-set thresholds must be positive, got ({tau_u}, {tau_g})"
        )));
    }
    let grid = field.grid();
    let st = stencil.bind(grid);
    let u = field.values();
    let nodes = grid
        .supported_nodes(stencil.width())
        .filter(|&k| u[k].abs() <= tau_u && chord_gradient(u, k, &st) <= tau_g)
        .collect();
    Ok(CriticalSet { nodes, tau_u, tau_g })
}

/// Nodes with `|u| <= τ_u` seeing both signs within distance `ρ_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingSet {
    pub nodes: Vec<usize>,
    pub tau_u: f64,
    pub rho_b: f64,
}

impl BranchingSet {
    pub fn contains(&self, flat: usize) -> bool {
        self.nodes.binary_search(&flat).is_ok()
    }
}

pub fn detect_branching_set(field: &ScalarField, tau_u: f64, rho_b: f64) -> Result<BranchingSet> {
    if !(tau_u > 0.0 && rho_b > 0.0) {
        return Err(Error::invalid(format!(
            "branching thresholds must be positive, got ({tau_u}, {rho_b})"
        )));
    }
    let grid = field.grid();
    let u = field.values();
    let n = grid.n_per_side();
    let reach = (rho_b / grid.spacing()).floor() as usize;
    let nodes = (0..grid.node_count())
        .into_par_iter()
        .filter(|&k| {
            if u[k].abs() > tau_u {
                return false;
            }
            let c = grid.node(k);
            let (mut pos, mut neg) = (false, false);
            for j in c.j.saturating_sub(reach)..=(c.j + reach).min(n - 1) {
                for i in c.i.saturating_sub(reach)..=(c.i + reach).min(n - 1) {
                    let other = Node::new(i, j);
                    if grid.distance(c, other) > rho_b {
                        continue;
                    }
                    let v = u[grid.flat(other)];
                    pos |= v > 0.0;
                    neg |= v < 0.0;
                }
            }
            pos && neg
        })
        .collect();
    Ok(BranchingSet { nodes, tau_u, rho_b })
}

/// Ordinary least squares of `log s` against `log r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Minimum number of points accepted by [`fit_exponent`].
pub const MIN_FIT_POINTS: usize = 4;

/// Fit `s ≈ e^intercept · r^slope` over pairs with `s > 0` and, when given,
/// `window.0 <= r <= window.1`.
pub fn fit_exponent(pairs: &[(f64, f64)], window: Option<(f64, f64)>) -> Result<PowerFit> {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(r, s)| *r > 0.0 && *s > 0.0 && r.is_finite() && s.is_finite())
        .filter(|(r, _)| window.is_none_or(|(lo, hi)| *r >= lo && *r <= hi))
        .map(|(r, s)| (r.ln(), s.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points, need at least {MIN_FIT_POINTS}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all radii coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Minimum `R²` for a passing decay verdict.
pub const MIN_R_SQUARED: f64 = 0.98;

#[derive(Debug, Clone, PartialEq)]
pub struct DecaySettings {
    pub k_max: usize,
    /// Largest radius; `None` means `L/2`.
    pub r0: Option<f64>,
    /// Radii where `sup|u|` is at most `noise_factor * solver_tolerance` are
    /// excluded from the fit.
    pub solver_tolerance: f64,
    pub noise_factor: f64,
    /// Radii below `min_radius_cells * h` are excluded from the fit.
    pub min_radius_cells: f64,
    pub alpha_pred: Option<f64>,
    pub tol_alpha: f64,
}

impl Default for DecaySettings {
    fn default() -> Self {
        DecaySettings {
            k_max: 8,
            r0: None,
            solver_tolerance: 1e-9,
            noise_factor: 10.0,
            min_radius_cells: 4.0,
            alpha_pred: None,
            tol_alpha: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayReport {
    pub center: Node,
    pub center_point: [f64; 2],
    /// Strictly decreasing `r_k = r_0 2^{-k}`.
    pub radii: Vec<f64>,
    pub sup_abs: Vec<f64>,
    pub sup_pos: Vec<f64>,
    pub sup_neg: Vec<f64>,
    /// Indices into `radii` used by the fit.
    pub window: Vec<usize>,
    pub fit: PowerFit,
    pub alpha_pred: Option<f64>,
    pub tol_alpha: f64,
    pub verdict: bool,
}

impl DecayReport {
    pub fn alpha_fit(&self) -> f64 {
        self.fit.slope
    }
}

/// Dyadic radii `r_0 2^{-k}`, `k = 0..=k_max`.
pub fn dyadic_radii(r0: f64, k_max: usize) -> Vec<f64> {
    (0..=k_max).map(|k| r0 * 0.5f64.powi(k as i32)).collect()
}

/// `(sup|u|, sup u_+, sup u_-)` over `B_r(center)`.
pub fn ball_sups(field: &ScalarField, center: Node, r: f64) -> Result<(f64, f64, f64)> {
    let ball = ball_nodes(field.grid(), center, r)?;
    let u = field.values();
    Ok(ball.nodes.iter().fold((0.0f64, 0.0f64, 0.0f64), |acc, &k| {
        let v = u[k];
        (acc.0.max(v.abs()), acc.1.max(v.max(0.0)), acc.2.max((-v).max(0.0)))
    }))
}

pub fn measure_decay(field: &ScalarField, center: Node, settings: &DecaySettings) -> Result<DecayReport> {
    let grid = field.grid();
    let r0 = settings.r0.unwrap_or(grid.half_width() / 2.0);
    if settings.r0.is_none() && r0 >= grid.distance_to_edge(center) {
        return Err(Error::domain(format!(
            "B_(L/2) around {:?} leaves the domain",
            grid.point(center)
        )));
    }
    let radii = dyadic_radii(r0, settings.k_max);
    let mut sup_abs = Vec::with_capacity(radii.len());
    let mut sup_pos = Vec::with_capacity(radii.len());
    let mut sup_neg = Vec::with_capacity(radii.len());
    for &r in &radii {
        let (a, p, n) = ball_sups(field, center, r)?;
        sup_abs.push(a);
        sup_pos.push(p);
        sup_neg.push(n);
    }
    let floor = settings.noise_factor * settings.solver_tolerance;
    let min_r = settings.min_radius_cells * grid.spacing();
    let window: Vec<usize> = (0..radii.len())
        .filter(|&k| radii[k] >= min_r && sup_abs[k] > floor)
        .collect();
    let pairs: Vec<(f64, f64)> = window.iter().map(|&k| (radii[k], sup_abs[k])).collect();
    let fit = fit_exponent(&pairs, None)?;
    let verdict = fit.r_squared >= MIN_R_SQUARED
        && settings
            .alpha_pred
            .is_none_or(|a| (fit.slope - a).abs() <= settings.tol_alpha);
    Ok(DecayReport {
        center,
        center_point: grid.point(center),
        radii,
        sup_abs,
        sup_pos,
        sup_neg,
        window,
        fit,
        alpha_pred: settings.alpha_pred,
        tol_alpha: settings.tol_alpha,
        verdict,
    })
}

/// [`measure_decay`] for several centers in parallel, in input order.
pub fn measure_decay_many(
    field: &ScalarField,
    centers: &[Node],
    settings: &DecaySettings,
) -> Vec<Result<DecayReport>> {
    centers
        .par_iter()
        .map(|&c| measure_decay(field, c, settings))
        .collect()
}

/// Critical node (thresholds `tau_u`, `tau_g`) on the edge of the set: some
/// lattice neighbour at unit distance lies outside it. Among those whose ball
/// of radius `radius` fits inside the domain, returns the one closest to the
/// origin (lowest index on ties).
pub fn auto_critical_center(
    field: &ScalarField,
    stencil: &StencilSet,
    tau_u: f64,
    tau_g: f64,
    radius: f64,
) -> Result<Node> {
    let grid = field.grid();
    let crit = detect_critical_set(field, stencil, tau_u, tau_g)?;
    let n = grid.n_per_side();
    let mut inside = vec![false; n * n];
    for &k in &crit.nodes {
        inside[k] = true;
    }
    let candidates = crit.nodes.iter().copied().filter(|&k| {
        let Node { i, j } = grid.node(k);
        [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)]
            .into_iter()
            .any(|(a, b)| a < n && b < n && !inside[grid.flat(Node::new(a, b))])
    });
    closest_fitting(grid, candidates, radius).ok_or_else(|| {
        Error::InsufficientData("no node on the edge of the critical set admits the analysis ball".into())
    })
}

/// Branching node closest to the origin whose ball of radius `radius` fits.
pub fn auto_branching_center(set: &BranchingSet, grid: &Grid2D, radius: f64) -> Result<Node> {
    closest_fitting(grid, set.nodes.iter().copied(), radius)
        .ok_or_else(|| Error::InsufficientData("no branching node admits the analysis ball".into()))
}

fn closest_fitting(grid: &Grid2D, nodes: impl Iterator<Item = usize>, radius: f64) -> Option<Node> {
    let origin = grid.origin();
    let mut best: Option<(f64, usize)> = None;
    for k in nodes {
        let node = grid.node(k);
        if radius >= grid.distance_to_edge(node) {
            continue;
        }
        let d = grid.distance(origin, node);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, k));
        }
    }
    best.map(|(_, k)| grid.node(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondegeneracyRow {
    pub r: f64,
    /// `sup_{shell} (u - u(x_0))`.
    pub shell_sup: f64,
    pub lower_bound: f64,
    /// `inf_{shell} G / r^σ`.
    pub theta_r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NondegeneracyReport {
    pub center: Node,
    pub rows: Vec<NondegeneracyRow>,
    pub theta: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub k_nd: f64,
    pub factor: f64,
    /// `false` when `G / r^σ` is not bounded below by a positive `θ`.
    pub hypothesis_holds: bool,
    pub verdict: bool,
}

/// Shell-wise lower growth check `sup_{shell_r}(u - u(x_0)) >= c K_nd r^α`
/// with `α = (σ + 4)/3`. `θ` defaults to the smallest shell estimate
/// `inf_{shell_r} G / r^σ`; a caller-supplied `θ` larger than that estimate
/// is reported as a failed hypothesis.
pub fn check_nondegeneracy(
    field: &ScalarField,
    stencil: &StencilSet,
    center: Node,
    model: &RhsModel,
    theta: Option<f64>,
    sigma: f64,
    radii: &[f64],
    factor: f64,
) -> Result<NondegeneracyReport> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if radii.is_empty() {
        return Err(Error::InsufficientData("no radii to test".into()));
    }
    let grid = field.grid();
    let st = stencil.bind(grid);
    let u = field.values();
    let u0 = field.at(center);
    let alpha = (sigma + 4.0) / 3.0;

    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        let shell = shell_nodes(grid, center, r)?;
        let mut sup = f64::NEG_INFINITY;
        let mut inf_g = f64::INFINITY;
        for &k in &shell.nodes {
            sup = sup.max(u[k] - u0);
            let g = central_gradient(u, k, &st);
            inf_g = inf_g.min(model.evaluate(grid.point_flat(k), u[k], g));
        }
        rows.push(NondegeneracyRow {
            r,
            shell_sup: sup,
            lower_bound: 0.0,
            theta_r: inf_g / r.powf(sigma),
        });
    }
    let estimate = rows.iter().map(|row| row.theta_r).fold(f64::INFINITY, f64::min);
    let theta = theta.unwrap_or(estimate);
    let hypothesis_holds = theta > 0.0 && estimate >= theta;
    if !hypothesis_holds {
        return Ok(NondegeneracyReport {
            center,
            rows,
            theta,
            sigma,
            alpha,
            k_nd: 0.0,
            factor,
            hypothesis_holds,
            verdict: false,
        });
    }
    let k_nd = nondegeneracy_constant(theta, alpha)?;
    for row in &mut rows {
        row.lower_bound = factor * k_nd * row.r.powf(alpha);
    }
    let verdict = rows.iter().all(|row| row.shell_sup >= row.lower_bound);
    Ok(NondegeneracyReport {
        center,
        rows,
        theta,
        sigma,
        alpha,
        k_nd,
        factor,
        hypothesis_holds,
        verdict,
    })
}

/// Smallest `C` with `s(0) <= C r_0^α` and, for every `k`,
/// `s(k+1) <= max{C r_{k+1}^α, 2^{-α} s(k)}`.
pub fn flip_constant(s: &[f64], radii: &[f64], alpha: f64) -> Result<f64> {
    check_sequence(s, radii)?;
    let shrink = 0.5f64.powf(alpha);
    let mut c = s[0] / radii[0].powf(alpha);
    for k in 0..s.len() - 1 {
        if s[k + 1] > shrink * s[k] {
            c = c.max(s[k + 1] / radii[k + 1].powf(alpha));
        }
    }
    Ok(c)
}

/// Same constant as [`flip_constant`], found by testing every candidate
/// `s(k)/r_k^α` against all inequalities.
pub fn flip_constant_scan(s: &[f64], radii: &[f64], alpha: f64) -> Result<f64> {
    check_sequence(s, radii)?;
    let shrink = 0.5f64.powf(alpha);
    let holds = |c: f64| {
        s[0] / radii[0].powf(alpha) <= c
            && (0..s.len() - 1).all(|k| s[k + 1] / radii[k + 1].powf(alpha) <= c || s[k + 1] <= shrink * s[k])
    };
    let mut candidates: Vec<f64> = s
        .iter()
        .zip(radii)
        .map(|(v, r)| v / r.powf(alpha))
        .chain(std::iter::once(0.0))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates
        .into_iter()
        .find(|&c| holds(c))
        .ok_or_else(|| Error::NumericalFailure("no candidate satisfies the flip inequalities".into()))
}

fn check_sequence(s: &[f64], radii: &[f64]) -> Result<()> {
    if s.len() != radii.len() || s.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need matching sequences of length >= 2, got {} and {}",
            s.len(),
            radii.len()
        )));
    }
    if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::invalid("sequences must be finite, s >= 0 and r > 0"));
    }
    Ok(())
}

/// Verdict threshold: `C̃_1 <= REFLECTION_RATIO * C_0`.
pub const REFLECTION_RATIO: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionReport {
    pub center: Node,
    pub alpha: f64,
    pub radii: Vec<f64>,
    pub s_minus: Vec<f64>,
    pub s_plus: Vec<f64>,
    pub s: Vec<f64>,
    pub c0: f64,
    /// `s_-(k) <= C_0 r_k^α` for all `k`.
    pub hypothesis_holds: bool,
    pub c1_tilde: f64,
    pub fit_minus: Option<PowerFit>,
    pub fit_plus: Option<PowerFit>,
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSettings {
    pub r0: f64,
    pub k_max: usize,
    pub alpha: f64,
    /// `None` means the smallest admissible `max_k s_-(k)/r_k^α`.
    pub c0: Option<f64>,
    pub noise_floor: f64,
}

pub fn reflection_check(
    field: &ScalarField,
    branching: &BranchingSet,
    center: Node,
    settings: &ReflectionSettings,
) -> Result<ReflectionReport> {
    let grid = field.grid();
    if !branching.contains(grid.flat(center)) {
        return Err(Error::invalid(format!(
            "{:?} is not a branching point",
            grid.point(center)
        )));
    }
    let alpha = settings.alpha;
    let radii = dyadic_radii(settings.r0, settings.k_max);
    let (mut s, mut s_plus, mut s_minus) = (Vec::new(), Vec::new(), Vec::new());
    for &r in &radii {
        let (a, p, n) = ball_sups(field, center, r)?;
        s.push(a);
        s_plus.push(p);
        s_minus.push(n);
    }
    let auto_c0 = s_minus
        .iter()
        .zip(&radii)
        .map(|(v, r)| v / r.powf(alpha))
        .fold(0.0, f64::max);
    let c0 = settings.c0.unwrap_or(auto_c0);
    let hypothesis_holds = auto_c0 <= c0;
    let c1_tilde = flip_constant(&s, &radii, alpha)?;

    let min_r = 4.0 * grid.spacing();
    let fit = |seq: &[f64]| {
        let pairs: Vec<(f64, f64)> = radii
            .iter()
            .zip(seq)
            .filter(|(r, v)| **r >= min_r && **v > settings.noise_floor)
            .map(|(r, v)| (*r, *v))
            .collect();
        fit_exponent(&pairs, None).ok()
    };
    let fit_minus = fit(&s_minus);
    let fit_plus = fit(&s_plus);
    let verdict = hypothesis_holds && c1_tilde.is_finite() && c1_tilde <= REFLECTION_RATIO * c0;
    Ok(ReflectionReport {
        center,
        alpha,
        radii,
        s_minus,
        s_plus,
        s,
        c0,
        hypothesis_holds,
        c1_tilde,
        fit_minus,
        fit_plus,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flatness {
    pub inf: f64,
    pub neg_density: f64,
    /// `sup |u|` over the disc of radius `L/2`.
    pub sup_half: f64,
    pub inf_small: bool,
    pub density_small: bool,
}

/// Flatness quantities over the whole lattice; `eps` only sets the two
/// smallness flags.
pub fn flatness_diagnostic(field: &ScalarField, eps: f64) -> Flatness {
    let grid = field.grid();
    let u = field.values();
    let half = grid.half_width() / 2.0;
    let inf = u.iter().copied().fold(f64::INFINITY, f64::min);
    let neg = u.iter().filter(|v| **v < 0.0).count();
    let neg_density = neg as f64 / u.len() as f64;
    let sup_half = (0..u.len())
        .filter(|&k| {
            let p = grid.point_flat(k);
            p[0].hypot(p[1]) <= half
        })
        .map(|k| u[k].abs())
        .fold(0.0, f64::max);
    Flatness {
        inf,
        neg_density,
        sup_half,
        inf_small: inf >= -eps,
        density_small: neg_density <= eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, build_stencil, FieldRole};
    use crate::models::WeightSpec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn power_field(grid: Grid2D, p: f64) -> ScalarField {
        ScalarField::from_fn(grid, FieldRole::Oracle, |x| x[0].hypot(x[1]).powf(p)).unwrap()
    }

    #[test]
    fn critical_set_of_aronsson_contains_origin() {
        let g = build_grid(65, 1.0).unwrap();
        let s = build_stencil(1).unwrap();
        let f = ScalarField::from_fn(g, FieldRole::Oracle, |x| x[0].abs().powf(4.0 / 3.0) - x[1].abs().powf(4.0 / 3.0)).unwrap();
        let (tu, tg) = default_critical_thresholds(&g);
        let set = detect_critical_set(&f, &s, tu, tg).unwrap();
        assert!(set.nodes.contains(&g.flat(g.origin())));
    }

    #[test]
    fn critical_set_of_sloped_affine_is_empty() {
        let g = build_grid(33, 1.0).unwrap();
        let s = build_stencil(2).unwrap();
        let f = ScalarField::from_fn(g, FieldRole::Oracle, |x| 0.5 * x[0] - x[1]).unwrap();
        let (tu, tg) = default_critical_thresholds(&g);
        assert!(detect_critical_set(&f, &s, tu, tg).unwrap().nodes.is_empty());
        assert!(detect_critical_set(&f, &s, 0.0, tg).is_err());
    }

    #[test]
    fn auto_center_sits_on_core_edge() {
        let g = build_grid(65, 1.0).unwrap();
        let s = build_stencil(2).unwrap();
        let h = g.spacing();
        let f = ScalarField::from_fn(g, FieldRole::Oracle, |x| (x[0].hypot(x[1]) - 0.3).max(0.0).powi(2)).unwrap();
        let c = auto_critical_center(&f, &s, 0.25 * h * h, 1.0, 0.5).unwrap();
        let r = g.distance(g.origin(), c);
        assert!(r <= 0.3 && r > 0.3 - h, "r = {r}");
        assert!(auto_critical_center(&f, &s, 0.25 * h * h, 1.0, 0.9).is_err());
    }

    #[test]
    fn branching_set_of_odd_field() {
        let g = build_grid(33, 1.0).unwrap();
        let f = ScalarField::from_fn(g, FieldRole::Oracle, |x| x[0]).unwrap();
        let set = detect_branching_set(&f, 1e-12, 2.0 * g.spacing()).unwrap();
        assert!(set.contains(g.flat(g.origin())));
        assert!(set.nodes.iter().all(|&k| g.point_flat(k)[0] == 0.0));
        assert_eq!(set.nodes.len(), 33);
    }

    #[test]
    fn fit_examples() {
        let exact: Vec<(f64, f64)> = (0..6).map(|k| {
            let r = 0.5f64.powi(k);
            (r, r * r)
        }).collect();
        let f = fit_exponent(&exact, None).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let scaled: Vec<(f64, f64)> = (0..6).map(|k| {
            let r = 0.5f64.powi(k);
            (r, 3.0 * r.powf(1.5))
        }).collect();
        let f = fit_exponent(&scaled, None).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(matches!(fit_exponent(&exact[..3], None), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_exponent(&exact, Some((0.2, 1.0))), Err(Error::InsufficientData(_))));
    }

    fn ols_oracle(x: &[f64], y: &[f64]) -> f64 {
        // slope from the normal equations with raw sums
        let n = x.len() as f64;
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn fit_with_seeded_noise_matches_ols_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pairs: Vec<(f64, f64)> = (0..8)
            .map(|k| {
                let r = 0.5f64.powi(k);
                (r, r.powf(4.0 / 3.0) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            })
            .collect();
        let f = fit_exponent(&pairs, None).unwrap();
        let lx: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
        assert!((f.slope - ols_oracle(&lx, &ly)).abs() < 1e-10);
        assert!((f.slope - 4.0 / 3.0).abs() < 0.05);
    }

    #[test]
    fn decay_of_exact_powers() {
        let g = build_grid(257, 1.0).unwrap();
        for p in [2.0, 4.0 / 3.0] {
            let settings = DecaySettings { k_max: 5, alpha_pred: Some(p), ..Default::default() };
            let rep = measure_decay(&power_field(g, p), g.origin(), &settings).unwrap();
            assert!((rep.alpha_fit() - p).abs() < 1e-6, "p={p} fit={}", rep.alpha_fit());
            assert!(rep.verdict);
            assert!(rep.radii.windows(2).all(|w| w[1] < w[0]));
            assert!(rep.window.iter().all(|&k| rep.radii[k] >= 4.0 * g.spacing()));
        }
    }

    #[test]
    fn decay_needs_four_radii() {
        let g = build_grid(33, 1.0).unwrap();
        let settings = DecaySettings { k_max: 6, ..Default::default() };
        assert!(matches!(
            measure_decay(&power_field(g, 2.0), g.origin(), &settings),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn nondegeneracy_on_radial_oracle() {
        let g = build_grid(129, 1.0).unwrap();
        let s = build_stencil(2).unwrap();
        let f = power_field(g, 2.0);
        let model = RhsModel::dead_core(8.0, 1.0).unwrap();
        let radii = dyadic_radii(0.5, 4);
        let rep = check_nondegeneracy(&f, &s, g.origin(), &model, None, 2.0, &radii, 0.5).unwrap();
        assert!(rep.hypothesis_holds);
        assert!(rep.verdict);
        for row in &rep.rows {
            assert!(row.shell_sup >= 2.0 * row.lower_bound * 0.99);
        }
    }

    #[test]
    fn nondegeneracy_hypothesis_failure() {
        let g = build_grid(65, 1.0).unwrap();
        let s = build_stencil(1).unwrap();
        let f = ScalarField::zeros(g, FieldRole::Solution);
        let model = RhsModel::dead_core(1.0, 1.0).unwrap();
        let rep = check_nondegeneracy(&f, &s, g.origin(), &model, Some(1.0), 2.0, &[0.25, 0.125], 0.5).unwrap();
        assert!(!rep.hypothesis_holds);
        assert!(!rep.verdict);
    }

    #[test]
    fn obstacle_constant_forcing_gives_unit_theta() {
        let g = build_grid(65, 1.0).unwrap();
        let s = build_stencil(1).unwrap();
        let model = RhsModel::obstacle(WeightSpec::Constant(1.0), 1.0).unwrap();
        let f = power_field(g, 4.0 / 3.0);
        let rep = check_nondegeneracy(&f, &s, g.origin(), &model, None, 0.0, &[0.25, 0.125], 0.5).unwrap();
        assert_eq!(rep.theta, 1.0);
        assert!((rep.alpha - 4.0 / 3.0).abs() < 1e-15);
        assert!(rep.verdict);
    }

    #[test]
    fn flip_synthetic_sequences() {
        let alpha = 2.0;
        let radii = dyadic_radii(1.0, 8);
        let s: Vec<f64> = (0..=8).map(|k| 0.5f64.powf(alpha * k as f64)).collect();
        assert_eq!(flip_constant(&s, &radii, alpha).unwrap(), 1.0);
        let s: Vec<f64> = (0..=8).map(|k| k as f64 * 0.5f64.powf(alpha * k as f64)).collect();
        let c = flip_constant(&s, &radii, alpha).unwrap();
        assert!((c - 8.0).abs() < 1e-12);
        assert_eq!(c, flip_constant_scan(&s, &radii, alpha).unwrap());
    }

    #[test]
    fn reflection_rejects_non_branching_center() {
        let g = build_grid(65, 1.0).unwrap();
        let f = ScalarField::from_fn(g, FieldRole::Oracle, |x| x[0]).unwrap();
        let set = detect_branching_set(&f, 1e-12, 2.0 * g.spacing()).unwrap();
        let settings = ReflectionSettings { r0: 0.25, k_max: 3, alpha: 1.0, c0: None, noise_floor: 0.0 };
        assert!(reflection_check(&f, &set, Node::new(40, 32), &settings).is_err());
        let rep = reflection_check(&f, &set, g.origin(), &settings).unwrap();
        assert!(rep.hypothesis_holds);
        assert!(rep.verdict);
        assert!((rep.c1_tilde - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flatness_examples() {
        let g = build_grid(129, 1.0).unwrap();
        let zero = ScalarField::zeros(g, FieldRole::Solution);
        let d = flatness_diagnostic(&zero, 0.1);
        assert_eq!((d.inf, d.neg_density, d.sup_half), (0.0, 0.0, 0.0));
        let mut vals = vec![0.0; g.node_count()];
        vals[100] = -1.0;
        let spike = ScalarField::new(g, vals, FieldRole::Solution).unwrap();
        assert_eq!(flatness_diagnostic(&spike, 0.1).neg_density, 1.0 / (129.0 * 129.0));
    }

    proptest! {
        #[test]
        fn fit_recovers_power_families(sigma in prop::sample::select(vec![1.1, 4.0 / 3.0, 2.0, 3.0]), c in 0.1f64..10.0) {
            let pairs: Vec<(f64, f64)> = (0..7).map(|k| {
                let r = 0.7 * 0.5f64.powi(k);
                (r, c * r.powf(sigma))
            }).collect();
            let f = fit_exponent(&pairs, None).unwrap();
            prop_assert!((f.slope - sigma).abs() < 1e-9);
        }

        #[test]
        fn critical_set_monotone_in_thresholds(seed in any::<u64>(), tu in 1e-3f64..0.1, tg in 1e-2f64..1.0) {
            let g = build_grid(17, 1.0).unwrap();
            let s = build_stencil(1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-0.05..0.05)).collect();
            let f = ScalarField::new(g, vals, FieldRole::Solution).unwrap();
            let small = detect_critical_set(&f, &s, tu, tg).unwrap();
            let big = detect_critical_set(&f, &s, 2.0 * tu, 2.0 * tg).unwrap();
            prop_assert!(small.nodes.iter().all(|k| big.nodes.contains(k)));
        }

        #[test]
        fn flip_closed_form_matches_scan(seq in prop::collection::vec(0.0f64..1.0, 2..10), alpha in 1.0f64..3.0) {
            let radii = dyadic_radii(0.5, seq.len() - 1);
            let a = flip_constant(&seq, &radii, alpha).unwrap();
            let b = flip_constant_scan(&seq, &radii, alpha).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn decay_sups_non_increasing(seed in any::<u64>()) {
            let g = build_grid(65, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vals: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = ScalarField::new(g, vals, FieldRole::Solution).unwrap();
            let settings = DecaySettings { k_max: 3, noise_factor: 0.0, min_radius_cells: 0.0, ..Default::default() };
            let rep = measure_decay(&f, g.origin(), &settings).unwrap();
            prop_assert!(rep.sup_abs.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
