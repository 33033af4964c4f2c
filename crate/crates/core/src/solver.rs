//! Nonlinear Gauss–Seidel relaxation for `Δ∞u = G(x, u, Du)` with Dirichlet
//! data, including the zero-obstacle complementarity variant.
//!
//! Nodes without full stencil support form a Dirichlet band of width `W`
//! around the square and carry the boundary trace. Each sweep first freezes
//! the discrete gradient `g_h` and then replaces every interior value by the
//! root `u*` of `L^N u(x) = G(x, u*, g_h) / max(g_h^{2-γ}, ε_g)` with
//! neighbours frozen, optionally damped.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{BoundStencil, FieldRole, Grid2D, Node, ScalarField, StencilSet};
use crate::models::{RhsModel, USplit};
use crate::ops::{central_gradient, local_solve_kernel, residual_field, LocalPairs, OperatorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    /// Row-major in-place sweep, single-threaded.
    Lexicographic,
    /// Multi-colour sweep: `(W+1)^2` colour classes, each updated in
    /// parallel. No two nodes of one class are stencil neighbours, so the
    /// result does not depend on the number of workers.
    RedBlack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityLag {
    /// The discrete gradient in `G` and in the scaling `g_h^{2-γ}` is taken
    /// from the previous iterate once per sweep; the `u`-dependence of `G`
    /// is solved for at each node.
    FrozenSweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop when the sup-norm of one sweep's update is at most this.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Floor `ε_g` for `g_h^{2-γ}` in the local solve; `None` means `h^2`.
    pub grad_floor: Option<f64>,
    /// Initial damping `ω ∈ (0, 1]`.
    pub damping: f64,
    pub sweep_order: SweepOrder,
    pub nonlinearity_lag: NonlinearityLag,
    pub deterministic: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-9,
            max_sweeps: 200_000,
            grad_floor: None,
            damping: 1.0,
            sweep_order: SweepOrder::Lexicographic,
            nonlinearity_lag: NonlinearityLag::FrozenSweep,
            deterministic: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::invalid("max_sweeps must be >= 1"));
        }
        if let Some(eps) = self.grad_floor {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(Error::invalid(format!("grad_floor must be >= 0, got {eps}")));
            }
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// Smallest damping the automatic safeguard will reach.
pub const MIN_DAMPING: f64 = 1.0 / 16.0;
/// Consecutive increases of the update norm that trigger halving `ω`.
pub const OSCILLATION_WINDOW: usize = 10;
/// Consecutive non-increasing sweeps after which a halved `ω` is doubled
/// again, up to the configured damping.
pub const RECOVERY_WINDOW: usize = 50;

/// Closed-form Dirichlet trace.
#[derive(Clone)]
pub struct BoundaryData {
    tag: String,
    trace: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData").field("tag", &self.tag).finish()
    }
}

impl BoundaryData {
    pub fn new(tag: impl Into<String>, trace: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        BoundaryData {
            tag: tag.into(),
            trace: Arc::new(trace),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_| c)
    }

    pub fn affine(p: [f64; 2], c: f64) -> Self {
        Self::new(format!("affine({p:?}, {c})"), move |x| p[0] * x[0] + p[1] * x[1] + c)
    }

    /// `g(x) = x_1`, odd under `x_1 -> -x_1`.
    pub fn odd_linear() -> Self {
        Self::new("custom_odd", |x| x[0])
    }

    /// `g(x) = (x_1 - shift)_+`: nonnegative, vanishing on part of the boundary.
    pub fn ramp(shift: f64) -> Self {
        Self::new(format!("ramp({shift})"), move |x| (x[0] - shift).max(0.0))
    }

    /// Seeded random trigonometric trace in the polar angle,
    /// `Σ_{k<=modes} (a_k cos kθ + b_k sin kθ) / k^2`, continuous on the square's boundary.
    pub fn random_fourier(seed: u64, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64)> = (0..modes)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let offset: f64 = rng.gen_range(-0.5..0.5);
        Self::new(format!("random_fourier(seed={seed}, modes={modes})"), move |x| {
            let th = x[1].atan2(x[0]);
            offset
                + coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &(a, b))| {
                        let kk = (k + 1) as f64;
                        (a * (kk * th).cos() + b * (kk * th).sin()) / (kk * kk)
                    })
                    .sum::<f64>()
        })
    }

    /// Pointwise `g + other`.
    pub fn plus(&self, other: &BoundaryData) -> Self {
        let (a, b) = (self.trace.clone(), other.trace.clone());
        Self::new(format!("{} + {}", self.tag, other.tag), move |x| a(x) + b(x))
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        (self.trace)(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub field: ScalarField,
    pub sweeps_used: usize,
    pub final_update_norm: f64,
    pub final_residual_sup: f64,
    pub converged: bool,
    pub tolerance: f64,
    /// Damping in force at the end (after any automatic halving).
    pub final_damping: f64,
    pub stencil_width: usize,
}

impl SolveOutcome {
    pub fn grid(&self) -> &Grid2D {
        self.field.grid()
    }

    /// True for nodes carrying Dirichlet data.
    pub fn is_boundary(&self, flat: usize) -> bool {
        !self.grid().has_support(self.grid().node(flat), self.stencil_width)
    }
}

/// Transfinite (Coons) blend of the trace along the four edges, clamped to
/// the range of the data on the Dirichlet band.
fn initial_guess(grid: &Grid2D, width: usize, boundary: &BoundaryData) -> Result<Vec<f64>> {
    let n = grid.n_per_side();
    let l = grid.half_width();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut u = vec![0.0; grid.node_count()];
    for flat in 0..grid.node_count() {
        if !grid.has_support(grid.node(flat), width) {
            let v = boundary.evaluate(grid.point_flat(flat));
            if !v.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "boundary trace '{}' is not finite at {:?}",
                    boundary.tag(),
                    grid.point_flat(flat)
                )));
            }
            lo = lo.min(v);
            hi = hi.max(v);
            u[flat] = v;
        }
    }
    let g = |x: f64, y: f64| boundary.evaluate([x, y]);
    let (c00, c10, c01, c11) = (g(-l, -l), g(l, -l), g(-l, l), g(l, l));
    for flat in grid.supported_nodes(width) {
        let node = grid.node(flat);
        let [x, y] = grid.point(node);
        let s = node.i as f64 / (n - 1) as f64;
        let t = node.j as f64 / (n - 1) as f64;
        let blend = (1.0 - s) * g(-l, y) + s * g(l, y) + (1.0 - t) * g(x, -l) + t * g(x, l)
            - ((1.0 - s) * (1.0 - t) * c00 + s * (1.0 - t) * c10 + (1.0 - s) * t * c01 + s * t * c11);
        u[flat] = blend.clamp(lo, hi);
    }
    Ok(u)
}

struct SweepContext<'a> {
    grid: &'a Grid2D,
    st: BoundStencil,
    model: &'a RhsModel,
    gradient_power: f64,
    grad_floor: f64,
    interior: Vec<usize>,
    colors: Vec<Vec<usize>>,
    obstacle: bool,
}

/// Per-node data frozen for one sweep: discrete gradient, the scaling
/// `1 / max(g^{2-γ}, ε_g)` and the `u`-dependence of `G`.
#[derive(Clone, Copy)]
struct Frozen {
    grad: f64,
    scale: f64,
    split: USplit,
}

impl Default for Frozen {
    fn default() -> Self {
        Frozen {
            grad: 0.0,
            scale: 0.0,
            split: USplit::Fixed(0.0),
        }
    }
}

impl SweepContext<'_> {
    fn new<'a>(
        grid: &'a Grid2D,
        stencil: &StencilSet,
        model: &'a RhsModel,
        kind: OperatorKind,
        config: &SolverConfig,
    ) -> SweepContext<'a> {
        SweepContext {
            grid,
            st: stencil.bind(grid),
            model,
            gradient_power: kind.gradient_power(),
            grad_floor: config.grad_floor.unwrap_or(grid.spacing().powi(2)),
            interior: Vec::new(),
            colors: Vec::new(),
            obstacle: model.is_obstacle(),
        }
    }

    #[inline]
    fn frozen_at(&self, u: &[f64], flat: usize) -> Frozen {
        if self.model.is_zero() {
            return Frozen::default();
        }
        let grad = central_gradient(u, flat, &self.st);
        Frozen {
            grad,
            scale: 1.0 / grad.powf(self.gradient_power).max(self.grad_floor),
            split: self.model.split(self.grid.point_flat(flat), grad),
        }
    }

    fn freeze(&self, u: &[f64], frozen: &mut [Frozen]) {
        if self.model.is_zero() {
            return;
        }
        let vals: Vec<Frozen> = self.interior.par_iter().map(|&k| self.frozen_at(u, k)).collect();
        for (&k, v) in self.interior.iter().zip(vals) {
            frozen[k] = v;
        }
    }

    #[inline]
    fn relaxed(&self, u: &[f64], flat: usize, fz: Frozen, omega: f64) -> f64 {
        let old = u[flat];
        let star = match fz.split {
            USplit::Fixed(c) => local_solve_kernel(u, flat, &self.st, c * fz.scale),
            USplit::Power { c, .. } if c == 0.0 => local_solve_kernel(u, flat, &self.st, 0.0),
            USplit::Power { .. } => {
                LocalPairs::new(u, flat, &self.st).solve_implicit(old, |v| fz.split.eval(v) * fz.scale)
            }
            USplit::Other => {
                let x = self.grid.point_flat(flat);
                LocalPairs::new(u, flat, &self.st)
                    .solve_implicit(old, |v| self.model.evaluate(x, v, fz.grad) * fz.scale)
            }
        };
        let new = old + omega * (star - old);
        if self.obstacle {
            new.max(0.0)
        } else {
            new
        }
    }

    fn sweep_lexicographic(&self, u: &mut [f64], rhs: &[Frozen], omega: f64) -> f64 {
        let mut norm: f64 = 0.0;
        for &k in &self.interior {
            let new = self.relaxed(u, k, rhs[k], omega);
            norm = norm.max((new - u[k]).abs());
            u[k] = new;
        }
        norm
    }

    fn sweep_colored(&self, u: &mut [f64], rhs: &[Frozen], omega: f64) -> f64 {
        let mut norm: f64 = 0.0;
        for class in &self.colors {
            let snapshot: &[f64] = u;
            let updates: Vec<f64> = class
                .par_iter()
                .map(|&k| self.relaxed(snapshot, k, rhs[k], omega))
                .collect();
            for (&k, new) in class.iter().zip(updates) {
                norm = norm.max((new - u[k]).abs());
                u[k] = new;
            }
        }
        norm
    }
}

fn check_inputs(stencil: &StencilSet, grid: &Grid2D) -> Result<()> {
    if grid.n_per_side() <= 2 * stencil.width() + 1 {
        return Err(Error::invalid(format!(
            "grid with {} nodes per side has no interior for a width-{} stencil",
            grid.n_per_side(),
            stencil.width()
        )));
    }
    Ok(())
}

/// Relaxed value `u(x) + ω (u* - u(x))` at one node, with the nonlinearity
/// evaluated from the current field.
pub fn local_update(
    field: &ScalarField,
    stencil: &StencilSet,
    node: Node,
    model: &RhsModel,
    kind: OperatorKind,
    config: &SolverConfig,
) -> Result<f64> {
    config.validate()?;
    kind.validate()?;
    let grid = field.grid();
    if node.i >= grid.n_per_side() || node.j >= grid.n_per_side() || !grid.has_support(node, stencil.width()) {
        return Err(Error::domain(format!("{node:?} is not an interior node")));
    }
    let ctx = SweepContext::new(grid, stencil, model, kind, config);
    let flat = grid.flat(node);
    let rhs = ctx.frozen_at(field.values(), flat);
    Ok(ctx.relaxed(field.values(), flat, rhs, config.damping))
}

pub fn solve(
    grid: &Grid2D,
    stencil: &StencilSet,
    model: &RhsModel,
    boundary: &BoundaryData,
    kind: OperatorKind,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let u = initial_guess(grid, stencil.width(), boundary)?;
    solve_from(grid, stencil, model, u, kind, config)
}

/// As [`solve`], starting from a caller-supplied iterate whose Dirichlet band
/// already carries the boundary data.
pub fn solve_from(
    grid: &Grid2D,
    stencil: &StencilSet,
    model: &RhsModel,
    initial: Vec<f64>,
    kind: OperatorKind,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    config.validate()?;
    kind.validate()?;
    check_inputs(stencil, grid)?;
    if initial.len() != grid.node_count() {
        return Err(Error::invalid("initial iterate does not match the grid"));
    }
    let width = stencil.width();
    let interior: Vec<usize> = grid.supported_nodes(width).collect();
    let colors = match config.sweep_order {
        SweepOrder::Lexicographic => Vec::new(),
        SweepOrder::RedBlack => {
            let m = width + 1;
            let mut classes = vec![Vec::new(); m * m];
            for &k in &interior {
                let node = grid.node(k);
                classes[(node.i % m) + m * (node.j % m)].push(k);
            }
            classes
        }
    };
    let mut ctx = SweepContext::new(grid, stencil, model, kind, config);
    ctx.interior = interior;
    ctx.colors = colors;

    let mut u = initial;
    if ctx.obstacle {
        for &k in &ctx.interior {
            u[k] = u[k].max(0.0);
        }
    }
    let mut rhs = vec![Frozen::default(); grid.node_count()];
    let mut omega = config.damping;
    let mut rising = 0;
    let mut falling = 0;
    let mut previous = f64::INFINITY;
    let mut norm = f64::INFINITY;
    let mut sweeps = 0;
    let mut converged = false;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        ctx.freeze(&u, &mut rhs);
        norm = match config.sweep_order {
            SweepOrder::Lexicographic => ctx.sweep_lexicographic(&mut u, &rhs, omega),
            SweepOrder::RedBlack => ctx.sweep_colored(&mut u, &rhs, omega),
        };
        if !norm.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "non-finite update after {sweeps} sweeps"
            )));
        }
        if norm <= config.tolerance {
            converged = true;
            break;
        }
        if norm > previous {
            rising += 1;
            falling = 0;
        } else {
            rising = 0;
            falling += 1;
        }
        if rising >= OSCILLATION_WINDOW {
            omega = (omega * 0.5).max(MIN_DAMPING);
            rising = 0;
        }
        if falling >= RECOVERY_WINDOW && omega < config.damping {
            omega = (omega * 2.0).min(config.damping);
            falling = 0;
        }
        previous = norm;
    }

    let field = ScalarField::new(*grid, u, FieldRole::Solution)?;
    let residual = residual_field(&field, stencil, model, kind)?;
    Ok(SolveOutcome {
        final_residual_sup: residual.sup_norm(),
        field,
        sweeps_used: sweeps,
        final_update_norm: norm,
        converged,
        tolerance: config.tolerance,
        final_damping: omega,
        stencil_width: width,
    })
}

/// Coarsest grid used by [`solve_nested`].
pub const NESTED_MIN_NODES: usize = 33;

/// [`solve`] preceded by solves on successively halved grids (down to
/// [`NESTED_MIN_NODES`] per side), each prolonged bilinearly as the next
/// initial iterate. Only the finest solve is reported; `sweeps_used` counts
/// its sweeps.
pub fn solve_nested(
    grid: &Grid2D,
    stencil: &StencilSet,
    model: &RhsModel,
    boundary: &BoundaryData,
    kind: OperatorKind,
    config: &SolverConfig,
) -> Result<SolveOutcome> {
    let mut sizes = vec![grid.n_per_side()];
    while let Some(&n) = sizes.last() {
        let coarse = (n - 1) / 2 + 1;
        if (n - 1) % 2 != 0 || coarse < NESTED_MIN_NODES || coarse <= 4 * stencil.width() + 1 {
            break;
        }
        sizes.push(coarse);
    }
    sizes.reverse();
    let mut previous: Option<(Grid2D, Vec<f64>)> = None;
    for &n in &sizes {
        let level = Grid2D::new(n, grid.half_width())?;
        let mut u = initial_guess(&level, stencil.width(), boundary)?;
        if let Some((coarse, values)) = &previous {
            let nc = coarse.n_per_side();
            for flat in level.supported_nodes(stencil.width()) {
                let node = level.node(flat);
                let (ci, cj) = (node.i / 2, node.j / 2);
                let (ti, tj) = (node.i % 2, node.j % 2);
                let at = |i: usize, j: usize| values[j.min(nc - 1) * nc + i.min(nc - 1)];
                u[flat] = 0.25
                    * (at(ci, cj) + at(ci + ti, cj) + at(ci, cj + tj) + at(ci + ti, cj + tj));
            }
        }
        if n == grid.n_per_side() {
            return solve_from(grid, stencil, model, u, kind, config);
        }
        let out = solve_from(&level, stencil, model, u, kind, config)?;
        previous = Some((level, out.field.into_values()));
    }
    unreachable!("the finest level is always solved")
}

/// Discrete comparison: `u <= v + 2 (tol_u + tol_v)` at every node.
pub fn comparison_check(u: &SolveOutcome, v: &SolveOutcome) -> Result<bool> {
    if u.grid() != v.grid() || u.stencil_width != v.stencil_width {
        return Err(Error::invalid("comparison needs solutions on the same grid and stencil"));
    }
    if !(u.converged && v.converged) {
        return Err(Error::invalid("comparison needs converged solutions"));
    }
    let slack = 2.0 * (u.tolerance + v.tolerance);
    Ok(u
        .field
        .values()
        .iter()
        .zip(v.field.values())
        .all(|(a, b)| *a <= *b + slack))
}

/// Interior extremes bounded by boundary extremes, up to `2 * tolerance`.
pub fn max_principle_check(u: &SolveOutcome) -> bool {
    let slack = 2.0 * u.tolerance;
    let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut imin, mut imax) = (f64::INFINITY, f64::NEG_INFINITY);
    for (k, &val) in u.field.values().iter().enumerate() {
        if u.is_boundary(k) {
            bmin = bmin.min(val);
            bmax = bmax.max(val);
        } else {
            imin = imin.min(val);
            imax = imax.max(val);
        }
    }
    imax <= bmax + slack && imin >= bmin - slack
}

/// Discrete Lipschitz seminorm over stencil-neighbour pairs inside the
/// half-square `|x|_∞ <= L/2`.
pub fn lipschitz_certificate(u: &SolveOutcome, stencil: &StencilSet) -> f64 {
    let grid = u.grid();
    let half = grid.half_width() / 2.0;
    let inside = |p: [f64; 2]| p[0].abs() <= half && p[1].abs() <= half;
    let st = stencil.bind(grid);
    let vals = u.field.values();
    let n = grid.n_per_side() as isize;
    let mut best: f64 = 0.0;
    for flat in 0..grid.node_count() {
        if !inside(grid.point_flat(flat)) {
            continue;
        }
        let node = grid.node(flat);
        for (k, d) in stencil.directions().iter().enumerate() {
            let (i, j) = (node.i as isize + d.p as isize, node.j as isize + d.q as isize);
            if i < 0 || j < 0 || i >= n || j >= n {
                continue;
            }
            let other = st.neighbor(flat, k);
            if inside(grid.point_flat(other)) {
                best = best.max((vals[other] - vals[flat]).abs() / st.arms[k]);
            }
        }
    }
    best
}
