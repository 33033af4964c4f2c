//! Discrete infinity-Laplacians on wide stencils.
//!
//! For a node `x` with neighbours `u_k = u(x + h (p_k, q_k))` at arm lengths
//! `d_k`, write `a_k = (u_k - u(x)) / d_k` for the one-sided slopes. The
//! normalized operator is
//!
//! ```text
//! L^N u(x) = max_j min_k  2 / (d_j + d_k) * (a_j + a_k)
//! ```
//!
//! Each pair term is a second difference along the (possibly bent) chord
//! through `x_j`, `x`, `x_k`. The max-min is non-decreasing in every neighbour
//! value, positively 1-homogeneous, unchanged by constants, and exact on
//! quadratics `|x|^2` and on affine fields. Its zero set is that of the
//! classical steepest-ascent/steepest-descent chord scheme.
//!
//! The reported gradient magnitude is the chord between the steepest-ascent
//! node `x_+` and steepest-descent node `x_-`:
//! `g_h = (u(x_+) - u(x_-)) / (d_+ + d_-)`.
//! Its node selection jumps with the data, so inside the equation the scaling
//! uses the largest central difference `g_c = max_k |u(x + d_k e_k) - u(x - d_k e_k)| / 2 d_k`,
//! which is continuous. The direct operator is `g_c^2 L^N`, the γ-family
//! member `g_c^{2-γ} L^N`; both gradients agree on affine fields.
//!
//! Because every pair term is monotone in its two neighbour values, the
//! max-min only needs the largest and smallest neighbour value inside each
//! arm-length class, so evaluation is linear in the stencil size.

use crate::error::{Error, Result};
use crate::grid::{BoundStencil, FieldRole, Node, ScalarField, StencilSet};
use crate::models::RhsModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// `⟨D²u Du, Du⟩`.
    Direct,
    /// `Δ∞u / |Du|²`.
    Normalized,
    /// `|Du|^{-γ} Δ∞u`, `γ ∈ [0, 2]`.
    GammaFamily(f64),
}

impl OperatorKind {
    pub fn gamma_family(gamma: f64) -> Result<Self> {
        if (0.0..=2.0).contains(&gamma) {
            Ok(OperatorKind::GammaFamily(gamma))
        } else {
            Err(Error::invalid(format!("operator gamma must lie in [0, 2], got {gamma}")))
        }
    }

    /// The homogeneity shift `γ`: 0 for the direct form, 2 for the normalized one.
    pub fn gamma(&self) -> f64 {
        match *self {
            OperatorKind::Direct => 0.0,
            OperatorKind::Normalized => 2.0,
            OperatorKind::GammaFamily(g) => g,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let OperatorKind::GammaFamily(g) = *self {
            OperatorKind::gamma_family(g)?;
        }
        Ok(())
    }

    /// Power of `g_h` multiplying `L^N`.
    #[inline]
    pub(crate) fn gradient_power(&self) -> f64 {
        2.0 - self.gamma()
    }
}

/// Neighbour values of one node, in stencil direction order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStencilSample {
    pub center: f64,
    /// `u(x + d_k e_k)` per direction.
    pub values: Vec<f64>,
    /// Physical arm length per direction.
    pub arms: Vec<f64>,
    /// Direction of steepest ascent (lowest index on ties).
    pub argmax: usize,
    /// Direction of steepest descent (lowest index on ties).
    pub argmin: usize,
}

impl LocalStencilSample {
    pub fn slope(&self, k: usize) -> f64 {
        (self.values[k] - self.center) / self.arms[k]
    }

    pub fn gradient(&self) -> f64 {
        (self.values[self.argmax] - self.values[self.argmin])
            / (self.arms[self.argmax] + self.arms[self.argmin])
    }
}

fn check_node(field: &ScalarField, stencil: &StencilSet, node: Node) -> Result<usize> {
    let grid = field.grid();
    if node.i >= grid.n_per_side() || node.j >= grid.n_per_side() {
        return Err(Error::domain(format!("{node:?} is not a grid node")));
    }
    if !grid.has_support(node, stencil.width()) {
        return Err(Error::domain(format!(
            "{node:?} lacks full support for a width-{} stencil",
            stencil.width()
        )));
    }
    Ok(grid.flat(node))
}

/// Steepest-ascent and steepest-descent directions.
#[inline]
pub(crate) fn extremal_directions(u: &[f64], flat: usize, st: &BoundStencil) -> (usize, usize) {
    let u0 = u[flat];
    let mut kmax = 0;
    let mut kmin = 0;
    let mut smax = f64::NEG_INFINITY;
    let mut smin = f64::INFINITY;
    for (k, (&off, &d)) in st.offsets.iter().zip(&st.arms).enumerate() {
        let s = (u[(flat as isize + off) as usize] - u0) / d;
        if s > smax {
            smax = s;
            kmax = k;
        }
        if s < smin {
            smin = s;
            kmin = k;
        }
    }
    (kmax, kmin)
}

#[inline]
pub(crate) fn chord_gradient(u: &[f64], flat: usize, st: &BoundStencil) -> f64 {
    let (kp, km) = extremal_directions(u, flat, st);
    (u[st.neighbor(flat, kp)] - u[st.neighbor(flat, km)]) / (st.arms[kp] + st.arms[km])
}

/// Largest central difference `|u(x + d e) - u(x - d e)| / 2d` over stencil
/// directions. Continuous in the neighbour values, unlike [`chord_gradient`].
#[inline]
pub(crate) fn central_gradient(u: &[f64], flat: usize, st: &BoundStencil) -> f64 {
    let half = st.offsets.len() / 2;
    let mut best: f64 = 0.0;
    for k in 0..half {
        let diff = u[st.neighbor(flat, k)] - u[st.neighbor(flat, k + half)];
        best = best.max(diff.abs() / (2.0 * st.arms[k]));
    }
    best
}

/// Largest and smallest neighbour value in each arm-length class.
#[inline]
fn class_extremes(u: &[f64], flat: usize, st: &BoundStencil, out: &mut [(f64, f64, f64)]) {
    for (slot, (d, members)) in out.iter_mut().zip(&st.classes) {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for &k in members {
            let v = u[st.neighbor(flat, k)];
            hi = hi.max(v);
            lo = lo.min(v);
        }
        *slot = (*d, hi, lo);
    }
}

const MAX_CLASSES: usize = 8;

#[inline]
pub(crate) fn normalized_kernel(u: &[f64], flat: usize, st: &BoundStencil) -> f64 {
    let mut ext = [(0.0, 0.0, 0.0); MAX_CLASSES];
    let ext = &mut ext[..st.classes.len()];
    class_extremes(u, flat, st, ext);
    let u0 = u[flat];
    let mut best = f64::NEG_INFINITY;
    for &(da, hi, _) in ext.iter() {
        let up = (hi - u0) / da;
        let mut worst = f64::INFINITY;
        for &(db, _, lo) in ext.iter() {
            worst = worst.min(2.0 / (da + db) * (up + (lo - u0) / db));
        }
        best = best.max(worst);
    }
    best
}

/// Root `u*` of `L^N u(x) = rhs` in the centre value with neighbours frozen.
///
/// Every pair term is affine and strictly decreasing in the centre value, with
/// root `r_jk = (u_j d_k + u_k d_j) / (d_j + d_k) - rhs d_j d_k / 2`, so the
/// max-min equation is solved exactly by `max_j min_k r_jk`.
#[inline]
pub(crate) fn local_solve_kernel(u: &[f64], flat: usize, st: &BoundStencil, rhs: f64) -> f64 {
    let mut ext = [(0.0, 0.0, 0.0); MAX_CLASSES];
    let ext = &mut ext[..st.classes.len()];
    class_extremes(u, flat, st, ext);
    let mut best = f64::NEG_INFINITY;
    for &(da, hi, _) in ext.iter() {
        let mut worst = f64::INFINITY;
        for &(db, _, lo) in ext.iter() {
            let r = lo + (hi - lo) * (db / (da + db)) - rhs * (da * db * 0.5);
            worst = worst.min(r);
        }
        best = best.max(worst);
    }
    best
}

/// Pair table of the local solve: `S(r) = max_a min_b (c_ab - r e_ab)` is
/// the root of `L^N u(x) = r` in the centre value.
pub(crate) struct LocalPairs {
    c: [f64; MAX_CLASSES * MAX_CLASSES],
    e: [f64; MAX_CLASSES * MAX_CLASSES],
    classes: usize,
}

impl LocalPairs {
    #[inline]
    pub(crate) fn new(u: &[f64], flat: usize, st: &BoundStencil) -> Self {
        let mut ext = [(0.0, 0.0, 0.0); MAX_CLASSES];
        let nc = st.classes.len();
        class_extremes(u, flat, st, &mut ext[..nc]);
        let mut out = LocalPairs {
            c: [0.0; MAX_CLASSES * MAX_CLASSES],
            e: [0.0; MAX_CLASSES * MAX_CLASSES],
            classes: nc,
        };
        for (a, &(da, hi, _)) in ext[..nc].iter().enumerate() {
            for (b, &(db, _, lo)) in ext[..nc].iter().enumerate() {
                out.c[a * nc + b] = lo + (hi - lo) * (db / (da + db));
                out.e[a * nc + b] = da * db * 0.5;
            }
        }
        out
    }

    #[inline]
    pub(crate) fn solve(&self, r: f64) -> f64 {
        let nc = self.classes;
        let mut best = f64::NEG_INFINITY;
        for a in 0..nc {
            let mut worst = f64::INFINITY;
            for b in a * nc..(a + 1) * nc {
                worst = worst.min(self.c[b] - r * self.e[b]);
            }
            best = best.max(worst);
        }
        best
    }

    /// Root of `v = S(rhs(v))`, bracketed from `start` and refined by
    /// Illinois regula falsi. For nondecreasing `rhs` the defect
    /// `v - S(rhs(v))` has slope at least 1, so `|defect|` bounds the
    /// distance to the root.
    pub(crate) fn solve_implicit(&self, start: f64, rhs: impl Fn(f64) -> f64) -> f64 {
        let phi = |v: f64| v - self.solve(rhs(v));
        let done = |v: f64, f: f64| f == 0.0 || f.abs() <= 4.0 * f64::EPSILON * (1.0 + v.abs());

        let (mut a, mut fa) = (start, phi(start));
        if done(a, fa) || !fa.is_finite() {
            return a;
        }
        let mut step = -fa;
        let (mut b, mut fb) = (a + step, phi(a + step));
        let mut expansions = 0;
        while fb.signum() == fa.signum() {
            if done(b, fb) || expansions == 60 || !fb.is_finite() {
                return b;
            }
            a = b;
            fa = fb;
            step *= 2.0;
            b = a + step;
            fb = phi(b);
            expansions += 1;
        }
        let mut side = 0i8;
        for _ in 0..100 {
            if done(b, fb) {
                return b;
            }
            let c = (a * fb - b * fa) / (fb - fa);
            let fc = phi(c);
            if done(c, fc) || (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + c.abs()) {
                return c;
            }
            if fc.signum() == fb.signum() {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            }
        }
        (a * fb - b * fa) / (fb - fa)
    }
}

#[inline]
pub(crate) fn operator_kernel(u: &[f64], flat: usize, st: &BoundStencil, kind: OperatorKind) -> f64 {
    let ln = normalized_kernel(u, flat, st);
    match kind {
        OperatorKind::Normalized => ln,
        _ => central_gradient(u, flat, st).powf(kind.gradient_power()) * ln,
    }
}

pub fn sample_stencil(
    field: &ScalarField,
    stencil: &StencilSet,
    node: Node,
) -> Result<LocalStencilSample> {
    let flat = check_node(field, stencil, node)?;
    let st = stencil.bind(field.grid());
    let u = field.values();
    let (argmax, argmin) = extremal_directions(u, flat, &st);
    Ok(LocalStencilSample {
        center: u[flat],
        values: (0..stencil.len()).map(|k| u[st.neighbor(flat, k)]).collect(),
        arms: st.arms.clone(),
        argmax,
        argmin,
    })
}

/// Discrete gradient magnitude `g_h(x) >= 0`.
pub fn grad_magnitude(field: &ScalarField, stencil: &StencilSet, node: Node) -> Result<f64> {
    let flat = check_node(field, stencil, node)?;
    Ok(chord_gradient(field.values(), flat, &stencil.bind(field.grid())))
}

pub fn normalized_inf_laplacian(
    field: &ScalarField,
    stencil: &StencilSet,
    node: Node,
) -> Result<f64> {
    let flat = check_node(field, stencil, node)?;
    Ok(normalized_kernel(field.values(), flat, &stencil.bind(field.grid())))
}

pub fn inf_laplacian(
    field: &ScalarField,
    stencil: &StencilSet,
    node: Node,
    kind: OperatorKind,
) -> Result<f64> {
    kind.validate()?;
    let flat = check_node(field, stencil, node)?;
    Ok(operator_kernel(field.values(), flat, &stencil.bind(field.grid()), kind))
}

/// Operator applied at every supported node; other nodes are 0.
pub fn operator_field(
    field: &ScalarField,
    stencil: &StencilSet,
    kind: OperatorKind,
) -> Result<ScalarField> {
    kind.validate()?;
    let grid = *field.grid();
    let st = stencil.bind(&grid);
    let u = field.values();
    let mut out = vec![0.0; grid.node_count()];
    for flat in grid.supported_nodes(stencil.width()) {
        out[flat] = operator_kernel(u, flat, &st, kind);
    }
    ScalarField::new(grid, out, FieldRole::Residual)
}

/// Pointwise defect `Δ_h u - G(x, u, g_c)` at supported nodes, 0 elsewhere.
///
/// For the obstacle model the defect is that of the complementarity system:
/// `Δ_h u - f` where `u > 0`, and the violation `max(Δ_h u - f, 0)` on the
/// contact set.
pub fn residual_field(
    field: &ScalarField,
    stencil: &StencilSet,
    model: &RhsModel,
    kind: OperatorKind,
) -> Result<ScalarField> {
    kind.validate()?;
    let grid = *field.grid();
    let st = stencil.bind(&grid);
    let u = field.values();
    let mut out = vec![0.0; grid.node_count()];
    for flat in grid.supported_nodes(stencil.width()) {
        let g = central_gradient(u, flat, &st);
        let ln = normalized_kernel(u, flat, &st);
        let op = match kind {
            OperatorKind::Normalized => ln,
            _ => g.powf(kind.gradient_power()) * ln,
        };
        let defect = op - model.evaluate(grid.point_flat(flat), u[flat], g);
        out[flat] = if model.is_obstacle() && u[flat] <= 0.0 {
            defect.max(0.0)
        } else {
            defect
        };
    }
    ScalarField::new(grid, out, FieldRole::Residual)
}
