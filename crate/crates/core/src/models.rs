//! Right-hand sides `G(x, u, |Du|)` and the closed-form growth exponents
//! attached to each family.
//!
//! Models are validated once at construction; evaluation never checks
//! parameters again.

use crate::error::{Error, Result};

/// A closed set made of finitely many points and axis-aligned segments.
#[derive(Debug, Clone, PartialEq)]
pub enum SetElement {
    Point([f64; 2]),
    /// Segment between two points sharing one coordinate.
    Segment([f64; 2], [f64; 2]),
}

impl SetElement {
    fn distance(&self, x: [f64; 2]) -> f64 {
        match *self {
            SetElement::Point(p) => (x[0] - p[0]).hypot(x[1] - p[1]),
            SetElement::Segment(a, b) => {
                let cx = x[0].clamp(a[0].min(b[0]), a[0].max(b[0]));
                let cy = x[1].clamp(a[1].min(b[1]), a[1].max(b[1]));
                (x[0] - cx).hypot(x[1] - cy)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |p: [f64; 2]| p[0].is_finite() && p[1].is_finite();
        match *self {
            SetElement::Point(p) if finite(p) => Ok(()),
            SetElement::Segment(a, b) if finite(a) && finite(b) && (a[0] == b[0] || a[1] == b[1]) => {
                Ok(())
            }
            _ => Err(Error::invalid(format!(
                "set element {self:?} must be a finite point or an axis-aligned segment"
            ))),
        }
    }
}

pub fn distance_to_set(set: &[SetElement], x: [f64; 2]) -> f64 {
    set.iter().map(|e| e.distance(x)).fold(f64::INFINITY, f64::min)
}

/// Weight function `f(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Constant(f64),
    /// `c * |x|^beta`.
    PowerOfRadius { c: f64, beta: f64 },
    /// `c * dist(x, F)^beta`.
    DistToSet {
        c: f64,
        beta: f64,
        set: Vec<SetElement>,
    },
}

impl WeightSpec {
    pub fn evaluate(&self, x: [f64; 2]) -> f64 {
        match self {
            WeightSpec::Constant(c) => *c,
            WeightSpec::PowerOfRadius { c, beta } => c * x[0].hypot(x[1]).powf(*beta),
            WeightSpec::DistToSet { c, beta, set } => c * distance_to_set(set, x).powf(*beta),
        }
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            WeightSpec::Constant(c) => *c,
            WeightSpec::PowerOfRadius { c, .. } | WeightSpec::DistToSet { c, .. } => *c,
        }
    }

    /// Vanishing order `beta` of the weight (0 for constants).
    pub fn beta(&self) -> f64 {
        match self {
            WeightSpec::Constant(_) => 0.0,
            WeightSpec::PowerOfRadius { beta, .. } | WeightSpec::DistToSet { beta, .. } => *beta,
        }
    }

    fn validate(&self) -> Result<()> {
        let c = self.amplitude();
        let beta = self.beta();
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::invalid(format!("weight amplitude must be >= 0, got {c}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!("weight exponent must be >= 0, got {beta}")));
        }
        if let WeightSpec::DistToSet { set, .. } = self {
            if set.is_empty() {
                return Err(Error::invalid("distance weight needs a non-empty set"));
            }
            set.iter().try_for_each(SetElement::validate)?;
        }
        Ok(())
    }
}

/// One summand `c * dist(x, F)^beta * u_+^m * min{1, |p|^kappa}` of a Hénon-type sum.
#[derive(Debug, Clone, PartialEq)]
pub struct HenonTerm {
    pub c: f64,
    pub beta: f64,
    pub m: f64,
    pub kappa: f64,
    pub set: Vec<SetElement>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RhsKind {
    Zero,
    /// `f(x) |u|^m min{1, |p|^kappa}`.
    General { m: f64, kappa: f64, weight: WeightSpec },
    /// `lambda * (u_+)^gamma`.
    DeadCore { lambda: f64, gamma: f64 },
    HenonSum(Vec<HenonTerm>),
    /// Zero-obstacle problem with forcing `f >= m0 > 0`.
    Obstacle { f: WeightSpec, m0: f64 },
}

/// A validated right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct RhsModel {
    kind: RhsKind,
}

impl RhsModel {
    pub fn zero() -> Self {
        RhsModel { kind: RhsKind::Zero }
    }

    pub fn general(m: f64, kappa: f64, weight: WeightSpec) -> Result<Self> {
        let params = ExponentParams::new(m, kappa);
        if !admissible(&params) {
            return Err(Error::invalid(format!(
                "(m, kappa) = ({m}, {kappa}) is outside the admissible exponent set"
            )));
        }
        weight.validate()?;
        Ok(RhsModel {
            kind: RhsKind::General { m, kappa, weight },
        })
    }

    /// Constant forcing `G ≡ c`.
    pub fn constant(c: f64) -> Result<Self> {
        Self::general(0.0, 0.0, WeightSpec::Constant(c))
    }

    pub fn dead_core(lambda: f64, gamma: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
        }
        if !(0.0..3.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 3), got {gamma}")));
        }
        Ok(RhsModel {
            kind: RhsKind::DeadCore { lambda, gamma },
        })
    }

    pub fn henon_sum(terms: Vec<HenonTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("Hénon sum needs at least one term"));
        }
        for t in &terms {
            if !(t.m >= 0.0 && t.kappa >= 0.0 && t.m + t.kappa < 3.0) {
                return Err(Error::invalid(format!(
                    "Hénon term needs 0 <= m + kappa < 3, got m={} kappa={}",
                    t.m, t.kappa
                )));
            }
            if !(t.beta > 0.0 && t.beta.is_finite()) {
                return Err(Error::invalid(format!("Hénon term needs beta > 0, got {}", t.beta)));
            }
            if !(t.c >= 0.0 && t.c.is_finite()) {
                return Err(Error::invalid(format!("Hénon term needs c >= 0, got {}", t.c)));
            }
            if t.set.is_empty() {
                return Err(Error::invalid("Hénon term needs a non-empty set"));
            }
            t.set.iter().try_for_each(SetElement::validate)?;
        }
        Ok(RhsModel {
            kind: RhsKind::HenonSum(terms),
        })
    }

    /// Forcing must be a constant `f >= m0 > 0`; the other weight forms all
    /// vanish somewhere on the square.
    pub fn obstacle(f: WeightSpec, m0: f64) -> Result<Self> {
        f.validate()?;
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(Error::invalid(format!("obstacle forcing needs m0 > 0, got {m0}")));
        }
        if let WeightSpec::Constant(c) = f {
            if c < m0 {
                return Err(Error::invalid(format!(
                    "obstacle forcing {c} is below its lower bound {m0}"
                )));
            }
        } else {
            return Err(Error::invalid(
                "obstacle forcing must be bounded below by m0 > 0; only constant forcing qualifies",
            ));
        }
        Ok(RhsModel {
            kind: RhsKind::Obstacle { f, m0 },
        })
    }

    pub fn kind(&self) -> &RhsKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, RhsKind::Zero)
    }

    pub fn is_obstacle(&self) -> bool {
        matches!(self.kind, RhsKind::Obstacle { .. })
    }

    /// Growth exponent predicted at critical points for this family.
    pub fn predicted_exponent(&self) -> Result<f64> {
        match &self.kind {
            RhsKind::Zero | RhsKind::Obstacle { .. } => {
                alpha_exponent(&ExponentParams::new(0.0, 0.0))
            }
            RhsKind::General { m, kappa, weight } => {
                weighted_exponent(&ExponentParams::new(*m, *kappa).with_beta(weight.beta()))
            }
            RhsKind::DeadCore { gamma, .. } => alpha_exponent(&ExponentParams::new(*gamma, 0.0)),
            RhsKind::HenonSum(terms) => henon_min_exponent(
                &terms
                    .iter()
                    .map(|t| ExponentParams::new(t.m, t.kappa).with_beta(t.beta))
                    .collect::<Vec<_>>(),
                &[],
            ),
        }
    }

    /// `G(x, u, p)` with `p = |Du|`.
    #[inline]
    pub fn evaluate(&self, x: [f64; 2], u: f64, p: f64) -> f64 {
        match &self.kind {
            RhsKind::Zero => 0.0,
            RhsKind::General { m, kappa, weight } => {
                weight.evaluate(x) * u.abs().powf(*m) * p.powf(*kappa).min(1.0)
            }
            RhsKind::DeadCore { lambda, gamma } => lambda * u.max(0.0).powf(*gamma),
            RhsKind::HenonSum(terms) => terms
                .iter()
                .map(|t| {
                    t.c * distance_to_set(&t.set, x).powf(t.beta)
                        * u.max(0.0).powf(t.m)
                        * p.powf(t.kappa).min(1.0)
                })
                .sum(),
            RhsKind::Obstacle { f, .. } => f.evaluate(x),
        }
    }
}

/// `u`-dependence of `G` at a fixed point and gradient, used by the local
/// solver to avoid re-evaluating weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum USplit {
    /// `G` does not depend on `u`.
    Fixed(f64),
    /// `G = c * |u|^m`, or `c * u_+^m` when `positive`.
    Power { c: f64, m: f64, positive: bool },
    /// Several powers; evaluate through [`RhsModel::evaluate`].
    Other,
}

#[inline]
pub(crate) fn fast_pow(v: f64, m: f64) -> f64 {
    if m == 1.0 {
        v
    } else if m == 2.0 {
        v * v
    } else if m == 0.0 {
        1.0
    } else {
        v.powf(m)
    }
}

impl USplit {
    #[inline]
    pub(crate) fn eval(&self, u: f64) -> f64 {
        match *self {
            USplit::Fixed(c) => c,
            USplit::Power { c, m, positive } => {
                let base = if positive { u.max(0.0) } else { u.abs() };
                if c == 0.0 {
                    0.0
                } else {
                    c * fast_pow(base, m)
                }
            }
            USplit::Other => f64::NAN,
        }
    }
}

impl RhsModel {
    #[inline]
    pub(crate) fn split(&self, x: [f64; 2], p: f64) -> USplit {
        let damp = |kappa: f64| if kappa == 0.0 { 1.0 } else { p.powf(kappa).min(1.0) };
        match &self.kind {
            RhsKind::Zero => USplit::Fixed(0.0),
            RhsKind::Obstacle { f, .. } => USplit::Fixed(f.evaluate(x)),
            RhsKind::General { m, kappa, weight } => USplit::Power {
                c: weight.evaluate(x) * damp(*kappa),
                m: *m,
                positive: false,
            },
            RhsKind::DeadCore { lambda, gamma } => USplit::Power {
                c: *lambda,
                m: *gamma,
                positive: true,
            },
            RhsKind::HenonSum(terms) if terms.len() == 1 => {
                let t = &terms[0];
                USplit::Power {
                    c: t.c * distance_to_set(&t.set, x).powf(t.beta) * damp(t.kappa),
                    m: t.m,
                    positive: true,
                }
            }
            RhsKind::HenonSum(_) => USplit::Other,
        }
    }
}

pub fn evaluate_rhs(model: &RhsModel, x: [f64; 2], u: f64, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::invalid(format!("gradient magnitude must be >= 0, got {p}")));
    }
    Ok(model.evaluate(x, u, p))
}

/// Exponent inputs `(m, kappa)` with optional weight order `beta` and
/// operator homogeneity shift `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentParams {
    pub m: f64,
    pub kappa: f64,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
}

impl ExponentParams {
    pub fn new(m: f64, kappa: f64) -> Self {
        ExponentParams {
            m,
            kappa,
            beta: None,
            gamma: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    fn effective_kappa(&self) -> f64 {
        self.kappa + self.gamma.unwrap_or(0.0)
    }

    fn require_admissible(&self) -> Result<()> {
        if admissible(self) {
            Ok(())
        } else {
            Err(Error::invalid(format!("inadmissible exponent parameters {self:?}")))
        }
    }
}

/// Membership in `{(m, kappa) in [0,3) x [0,4) : m < 3 - kappa}`, with
/// `kappa + gamma` in place of `kappa` when `gamma` is set.
pub fn admissible(params: &ExponentParams) -> bool {
    let k = params.effective_kappa();
    let gamma_ok = params.gamma.is_none_or(|g| (0.0..=2.0).contains(&g));
    gamma_ok
        && params.kappa >= 0.0
        && (0.0..3.0).contains(&params.m)
        && (0.0..4.0).contains(&k)
        && params.m < 3.0 - k
}

/// `(4 - kappa) / (3 - (m + kappa))`.
pub fn alpha_exponent(params: &ExponentParams) -> Result<f64> {
    params.require_admissible()?;
    let k = params.effective_kappa();
    Ok((4.0 - k) / (3.0 - (params.m + k)))
}

/// `(4 - kappa + beta) / (3 - (m + kappa))`.
pub fn weighted_exponent(params: &ExponentParams) -> Result<f64> {
    params.require_admissible()?;
    let beta = params.beta.unwrap_or(0.0);
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    let k = params.effective_kappa();
    Ok((4.0 - k + beta) / (3.0 - (params.m + k)))
}

/// Minimum over terms of `(4 + beta_i - kappa_i) / (3 - (m_i + kappa_i))`
/// and over noise orders of `(4 + sigma_i) / 3`.
pub fn henon_min_exponent(terms: &[ExponentParams], sigmas: &[f64]) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::invalid("exponent minimum needs at least one term"));
    }
    let mut best = f64::INFINITY;
    for t in terms {
        if !(t.m >= 0.0 && t.kappa >= 0.0 && t.m + t.kappa < 3.0) {
            return Err(Error::invalid(format!("inadmissible Hénon term {t:?}")));
        }
        let beta = t.beta.unwrap_or(0.0);
        if !(beta >= 0.0) {
            return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
        }
        best = best.min((4.0 + beta - t.kappa) / (3.0 - (t.m + t.kappa)));
    }
    for &s in sigmas {
        if !(s >= 0.0) {
            return Err(Error::invalid(format!("noise order must be >= 0, got {s}")));
        }
        best = best.min((4.0 + s) / 3.0);
    }
    Ok(best)
}

/// Upper end `(1 + m) / (3 - (m + kappa))` of the Hölder-gradient exponent range.
pub fn alpha_hat_cap(params: &ExponentParams) -> Result<f64> {
    params.require_admissible()?;
    let k = params.effective_kappa();
    Ok((1.0 + params.m) / (3.0 - (params.m + k)))
}

/// Lower-bound constant `(theta / (alpha^3 (alpha - 1)))^(1/3)` for growth away
/// from an interior point.
pub fn nondegeneracy_constant(theta: f64, alpha: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::invalid(format!("theta must be > 0, got {theta}")));
    }
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be > 1, got {alpha}")));
    }
    Ok((theta / (alpha.powi(3) * (alpha - 1.0))).cbrt())
}

/// Radial profile `K r^sigma` solving `Δ∞u = λ r^{α_w} u_+^γ` exactly.
pub fn deadcore_radial_constant(lambda: f64, gamma: f64, weight_power: f64) -> Result<(f64, f64)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    if !(0.0..3.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma must lie in [0, 3), got {gamma}")));
    }
    if !(weight_power >= 0.0 && weight_power.is_finite()) {
        return Err(Error::invalid(format!("weight power must be >= 0, got {weight_power}")));
    }
    let sigma = (4.0 + weight_power) / (3.0 - gamma);
    let k = (lambda * (3.0 - gamma).powi(4)
        / ((4.0 + weight_power).powi(3) * (1.0 + weight_power + gamma)))
        .powf(1.0 / (3.0 - gamma));
    Ok((sigma, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn admissibility_examples() {
        assert!(admissible(&ExponentParams::new(2.5, 0.4)));
        assert!(!admissible(&ExponentParams::new(2.5, 0.5)));
        assert!(!admissible(&ExponentParams::new(0.0, 3.9)));
        assert!(!admissible(&ExponentParams::new(-0.1, 0.0)));
        assert!(admissible(&ExponentParams::new(0.5, 0.5).with_gamma(1.0)));
        assert!(!admissible(&ExponentParams::new(1.0, 0.5).with_gamma(1.5)));
    }

    #[test]
    fn alpha_examples() {
        let a = |m, k| alpha_exponent(&ExponentParams::new(m, k)).unwrap();
        assert!(rel(a(0.0, 0.0), 4.0 / 3.0) < 1e-12);
        assert!(rel(a(1.0, 0.0), 2.0) < 1e-12);
        assert!(rel(a(1.0, 1.0), 3.0) < 1e-12);
        assert!(alpha_exponent(&ExponentParams::new(2.5, 0.5)).is_err());
        // gamma-homogeneous variant
        let g = alpha_exponent(&ExponentParams::new(0.0, 0.0).with_gamma(2.0)).unwrap();
        assert!(rel(g, 2.0) < 1e-12);
    }

    #[test]
    fn weighted_and_cap_examples() {
        let w = |m, k, b| weighted_exponent(&ExponentParams::new(m, k).with_beta(b)).unwrap();
        assert!(rel(w(0.0, 0.0, 0.0), 4.0 / 3.0) < 1e-12);
        assert!(rel(w(0.0, 0.0, 2.0), 2.0) < 1e-12);
        assert!(rel(w(1.0, 0.0, 0.5), 4.5 / 2.0) < 1e-12);
        let c = |m, k| alpha_hat_cap(&ExponentParams::new(m, k)).unwrap();
        assert!(rel(c(0.0, 0.0), 1.0 / 3.0) < 1e-12);
        assert!(rel(c(1.0, 0.0), 1.0) < 1e-12);
        assert!(rel(c(0.0, 2.0), 1.0) < 1e-12);
    }

    #[test]
    fn henon_examples() {
        let t = |b, k, m| ExponentParams::new(m, k).with_beta(b);
        let v = henon_min_exponent(&[t(0.0, 0.0, 0.0)], &[]).unwrap();
        assert!(rel(v, 4.0 / 3.0) < 1e-12);
        let v = henon_min_exponent(&[t(1.0, 0.0, 0.0), t(0.0, 0.0, 1.0)], &[]).unwrap();
        assert!(rel(v, 5.0 / 3.0) < 1e-12);
        let v = henon_min_exponent(&[t(3.0, 0.0, 0.0)], &[0.0]).unwrap();
        assert!(rel(v, 4.0 / 3.0) < 1e-12);
        assert!(henon_min_exponent(&[], &[]).is_err());
    }

    #[test]
    fn rhs_examples() {
        let dc = RhsModel::dead_core(1.0, 1.0).unwrap();
        assert_eq!(evaluate_rhs(&dc, [0.0, 0.0], -0.5, 1.0).unwrap(), 0.0);
        let g = RhsModel::general(1.0, 1.0, WeightSpec::Constant(1.0)).unwrap();
        assert_eq!(evaluate_rhs(&g, [0.0, 0.0], 0.5, 2.0).unwrap(), 0.5);
        let g = RhsModel::general(0.0, 2.0, WeightSpec::Constant(1.0)).unwrap();
        assert_eq!(evaluate_rhs(&g, [0.0, 0.0], 7.0, 0.5).unwrap(), 0.25);
        assert!(evaluate_rhs(&g, [0.0, 0.0], 7.0, -1.0).is_err());
        let one = RhsModel::constant(1.0).unwrap();
        assert_eq!(one.evaluate([0.3, 0.1], 0.0, 0.0), 1.0);
    }

    #[test]
    fn model_validation() {
        assert!(RhsModel::dead_core(1.0, 3.0).is_err());
        assert!(RhsModel::dead_core(0.0, 1.0).is_err());
        assert!(RhsModel::general(2.5, 0.5, WeightSpec::Constant(1.0)).is_err());
        assert!(RhsModel::general(0.0, 0.0, WeightSpec::Constant(-1.0)).is_err());
        assert!(RhsModel::obstacle(WeightSpec::Constant(1.0), 0.5).is_ok());
        assert!(RhsModel::obstacle(WeightSpec::Constant(0.1), 0.5).is_err());
        let seg = SetElement::Segment([0.0, 0.0], [1.0, 1.0]);
        assert!(RhsModel::general(
            0.0,
            0.0,
            WeightSpec::DistToSet { c: 1.0, beta: 1.0, set: vec![seg] }
        )
        .is_err());
    }

    #[test]
    fn distance_weights() {
        let set = vec![
            SetElement::Point([0.5, 0.5]),
            SetElement::Segment([-1.0, 0.0], [0.0, 0.0]),
        ];
        assert_eq!(distance_to_set(&set, [-0.5, 0.25]), 0.25);
        assert_eq!(distance_to_set(&set, [0.5, 0.75]), 0.25);
        assert!((distance_to_set(&set, [0.3, 0.4]) - 0.05f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nondegeneracy_examples() {
        assert!(rel(nondegeneracy_constant(1.0, 2.0).unwrap(), 0.5) < 1e-12);
        let a: f64 = 1.7;
        assert!(rel(nondegeneracy_constant(a.powi(3) * (a - 1.0), a).unwrap(), 1.0) < 1e-12);
        assert!(rel(nondegeneracy_constant(1.0, 4.0 / 3.0).unwrap(), (81.0f64 / 64.0).cbrt()) < 1e-12);
        assert!(nondegeneracy_constant(1.0, 1.0).is_err());
    }

    #[test]
    fn deadcore_constant_examples() {
        let (s, k) = deadcore_radial_constant(1.0, 1.0, 0.0).unwrap();
        assert!(rel(s, 2.0) < 1e-12 && rel(k, (1.0f64 / 8.0).sqrt()) < 1e-12);
        let (s, k) = deadcore_radial_constant(1.0, 0.0, 0.0).unwrap();
        assert!(rel(s, 4.0 / 3.0) < 1e-12 && rel(k, (81.0f64 / 64.0).cbrt()) < 1e-12);
        let (s, k) = deadcore_radial_constant(8.0, 1.0, 0.0).unwrap();
        assert!(rel(s, 2.0) < 1e-12 && rel(k, 1.0) < 1e-12);
        assert!(deadcore_radial_constant(1.0, 3.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn alpha_scaling_identity(m in 0.0f64..2.99, t in 0.0f64..1.0) {
            let kappa = t * (3.0 - m) * 0.999;
            let p = ExponentParams::new(m, kappa);
            let a = alpha_exponent(&p).unwrap();
            prop_assert!(a > 1.0);
            prop_assert!((a * (3.0 - (m + kappa)) + kappa - 4.0).abs() < 1e-9);
            let cap = alpha_hat_cap(&p).unwrap();
            prop_assert!(rel(cap, a - 1.0) < 1e-12);
        }

        #[test]
        fn deadcore_constant_balances(lambda in 0.01f64..50.0, gamma in 0.0f64..2.9, aw in 0.0f64..3.0) {
            let (s, k) = deadcore_radial_constant(lambda, gamma, aw).unwrap();
            let lhs = k.powi(3) * s.powi(3) * (s - 1.0);
            let rhs = lambda * k.powf(gamma);
            prop_assert!(rel(lhs, rhs) < 1e-12);
        }

        #[test]
        fn absorption_is_monotone(u in 0.0f64..10.0, du in 0.0f64..10.0, p in 0.0f64..5.0,
                                  lambda in 0.1f64..10.0, gamma in 0.0f64..2.9) {
            let dc = RhsModel::dead_core(lambda, gamma).unwrap();
            prop_assert!(dc.evaluate([0.1, 0.2], u + du, p) >= dc.evaluate([0.1, 0.2], u, p));
            let hs = RhsModel::henon_sum(vec![HenonTerm {
                c: 2.0, beta: 1.0, m: gamma.min(2.0), kappa: 0.5,
                set: vec![SetElement::Point([0.0, 0.0])],
            }]).unwrap();
            prop_assert!(hs.evaluate([0.1, 0.2], u + du, p) >= hs.evaluate([0.1, 0.2], u, p));
        }

        #[test]
        fn split_agrees_with_evaluate(u in -3.0f64..3.0, p in 0.0f64..4.0, x in -1.0f64..1.0, y in -1.0f64..1.0,
                                      m in 0.0f64..2.0, kappa in 0.0f64..0.9) {
            let models = [
                RhsModel::zero(),
                RhsModel::general(m, kappa, WeightSpec::PowerOfRadius { c: 1.5, beta: 0.5 }).unwrap(),
                RhsModel::dead_core(2.0, m).unwrap(),
                RhsModel::obstacle(WeightSpec::Constant(1.0), 1.0).unwrap(),
                RhsModel::henon_sum(vec![HenonTerm {
                    c: 0.7, beta: 1.0, m, kappa,
                    set: vec![SetElement::Point([0.2, -0.1])],
                }]).unwrap(),
            ];
            for model in &models {
                let direct = model.evaluate([x, y], u, p);
                let split = model.split([x, y], p).eval(u);
                prop_assert!((direct - split).abs() <= 1e-12 * direct.abs().max(1.0), "{model:?}: {direct} vs {split}");
            }
        }
    }
}
