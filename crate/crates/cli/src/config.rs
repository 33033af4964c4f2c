//! Flat `section.key = value` experiment configs.
//!
//! One assignment per line; `#` starts a comment. Every key is validated as
//! it is read, and errors carry the line number and key. [`ExperimentConfig::serialize`]
//! emits every key in canonical order, so parsing its output reproduces the
//! same config.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use inflap_core::{
    build_grid, build_stencil, BoundaryData, HenonTerm, NonlinearityLag, OperatorKind, OracleField, RhsKind,
    RhsModel, SetElement, SolverConfig, SweepOrder, WeightSpec,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}, key `{key}`: {message}")]
    Key { line: usize, key: String, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    Decay,
    Nondegeneracy,
    Reflection,
    Refinement,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Decay => "decay",
            Check::Nondegeneracy => "nondegeneracy",
            Check::Reflection => "reflection",
            Check::Refinement => "refinement",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Centers {
    Origin,
    AutoCritical,
    AutoBranching,
    Points(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundarySpec {
    Affine { p: [f64; 2], c: f64 },
    Aronsson { a: [f64; 2] },
    Constant(f64),
    CustomOdd,
    Ramp { shift: f64 },
    RandomFourier { seed: u64, modes: usize },
}

impl BoundarySpec {
    pub fn data(&self) -> BoundaryData {
        match *self {
            BoundarySpec::Affine { p, c } => BoundaryData::affine(p, c),
            BoundarySpec::Aronsson { a } => OracleField::Aronsson { a }.boundary(),
            BoundarySpec::Constant(v) => BoundaryData::constant(v),
            BoundarySpec::CustomOdd => BoundaryData::odd_linear(),
            BoundarySpec::Ramp { shift } => BoundaryData::ramp(shift),
            BoundarySpec::RandomFourier { seed, modes } => BoundaryData::random_fourier(seed, modes),
        }
    }

    /// Closed-form solution of the homogeneous problem with this trace, if known.
    pub fn oracle(&self) -> Option<OracleField> {
        match *self {
            BoundarySpec::Affine { p, c } => Some(OracleField::Affine { p, c }),
            BoundarySpec::Aronsson { a } => Some(OracleField::Aronsson { a }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub n: Vec<usize>,
    pub half_width: f64,
    /// One width for all grids or one per grid.
    pub stencil_width: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisBlock {
    pub checks: Vec<Check>,
    pub centers: Centers,
    pub k_max: usize,
    pub r0: Option<f64>,
    pub tol_alpha: f64,
    pub alpha_pred: Option<f64>,
    pub theta: Option<f64>,
    pub sigma: f64,
    pub nd_factor: f64,
    /// `τ_u = tau_u_scale · h²`.
    pub tau_u_scale: f64,
    /// `τ_g = tau_g_scale · h^{1/3}`.
    pub tau_g_scale: f64,
    /// Branching radius `ρ_b = rho_b_scale · h`.
    pub rho_b_scale: f64,
    pub c0: Option<f64>,
    /// Largest allowed gap between the fitted exponents of `s⁻` and `s⁺`.
    pub slope_gap: f64,
    /// Smallest accepted error ratio coarsest/finest in a refinement study.
    pub min_reduction: f64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock {
            checks: Vec::new(),
            centers: Centers::Origin,
            k_max: 4,
            r0: None,
            tol_alpha: 0.15,
            alpha_pred: None,
            theta: None,
            sigma: 0.0,
            nd_factor: 0.5,
            tau_u_scale: 10.0,
            tau_g_scale: 2.0,
            rho_b_scale: 2.0,
            c0: None,
            slope_gap: 0.2,
            min_reduction: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
    Field,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Field => "field",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub seed: u64,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { directory: None, formats: vec![Format::Csv, Format::Json], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub grid: GridBlock,
    pub model: RhsModel,
    pub operator: OperatorKind,
    pub boundary: BoundarySpec,
    pub solver: SolverConfig,
    pub analysis: AnalysisBlock,
    pub output: OutputBlock,
}

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let key = key.trim().to_string();
            if !key.contains('.') || key.split('.').any(str::is_empty) {
                return Err(ConfigError::Key { line, key, message: "keys have the form section.key".into() });
            }
            if let Some((first, _)) = map.get(&key) {
                return Err(ConfigError::Key { line, key, message: format!("duplicate key (first set on line {first})") });
            }
            map.insert(key, (line, value.trim().to_string()));
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        let mut rest: Vec<_> = self.map.into_iter().collect();
        rest.sort_by_key(|(_, (line, _))| *line);
        match rest.into_iter().next() {
            Some((key, (line, _))) => Err(ConfigError::Key { line, key, message: "unknown key".into() }),
            None => Ok(()),
        }
    }
}

fn key_err(line: usize, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Key { line, key: key.to_string(), message: message.into() }
}

/// Reads one optional key with `parse`, which gets the raw value.
fn opt<T>(
    e: &mut Entries,
    key: &str,
    parse: impl FnOnce(&str) -> Result<T, String>,
) -> Result<Option<(usize, T)>, ConfigError> {
    match e.take(key) {
        Some((line, raw)) => parse(&raw).map(|v| Some((line, v))).map_err(|m| key_err(line, key, m)),
        None => Ok(None),
    }
}

fn req<T>(e: &mut Entries, key: &str, parse: impl FnOnce(&str) -> Result<T, String>) -> Result<(usize, T), ConfigError> {
    opt(e, key, parse)?.ok_or_else(|| ConfigError::Missing(key.to_string()))
}

fn float(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got `{s}`"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn nonneg(s: &str) -> Result<f64, String> {
    let v = float(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn integer<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn words(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|w| !w.is_empty())
}

fn floats(s: &str) -> Result<Vec<f64>, String> {
    words(s).map(float).collect()
}

fn pair(s: &str) -> Result<[f64; 2], String> {
    match floats(s)?.as_slice() {
        &[a, b] => Ok([a, b]),
        other => Err(format!("expected two numbers, got {}", other.len())),
    }
}

fn set_elements(s: &str) -> Result<Vec<SetElement>, String> {
    s.split('|')
        .map(|part| {
            let mut it = words(part);
            let kind = it.next().ok_or("empty set element")?;
            let nums: Vec<f64> = it.map(float).collect::<Result<_, _>>()?;
            match (kind, nums.as_slice()) {
                ("point", &[x, y]) => Ok(SetElement::Point([x, y])),
                ("segment", &[x1, y1, x2, y2]) => Ok(SetElement::Segment([x1, y1], [x2, y2])),
                _ => Err(format!("expected `point x y` or `segment x1 y1 x2 y2`, got `{}`", part.trim())),
            }
        })
        .collect()
}

/// `constant c`, `radius c beta`, or `distance c beta @ <set>`.
fn weight(s: &str) -> Result<WeightSpec, String> {
    let (head, set) = match s.split_once('@') {
        Some((h, t)) => (h, Some(t)),
        None => (s, None),
    };
    let mut it = words(head);
    let kind = it.next().ok_or("empty weight")?;
    let nums: Vec<f64> = it.map(float).collect::<Result<_, _>>()?;
    match (kind, nums.as_slice(), set) {
        ("constant", &[c], None) => Ok(WeightSpec::Constant(c)),
        ("radius", &[c, beta], None) => Ok(WeightSpec::PowerOfRadius { c, beta }),
        ("distance", &[c, beta], Some(set)) => Ok(WeightSpec::DistToSet { c, beta, set: set_elements(set)? }),
        _ => Err(format!(
            "expected `constant c`, `radius c beta` or `distance c beta @ <set>`, got `{}`",
            s.trim()
        )),
    }
}

/// `c beta m kappa @ <set>` terms separated by `;`.
fn henon_terms(s: &str) -> Result<Vec<HenonTerm>, String> {
    s.split(';')
        .map(|t| {
            let (head, set) = t.split_once('@').ok_or("each term needs `@ <set>`")?;
            match floats(head)?.as_slice() {
                &[c, beta, m, kappa] => Ok(HenonTerm { c, beta, m, kappa, set: set_elements(set)? }),
                _ => Err(format!("expected `c beta m kappa @ <set>`, got `{}`", t.trim())),
            }
        })
        .collect()
}

fn operator(s: &str) -> Result<OperatorKind, String> {
    let mut it = words(s);
    match (it.next(), it.next(), it.next()) {
        (Some("direct"), None, _) => Ok(OperatorKind::Direct),
        (Some("normalized"), None, _) => Ok(OperatorKind::Normalized),
        (Some("gamma"), Some(g), None) => OperatorKind::gamma_family(float(g)?).map_err(|e| e.to_string()),
        _ => Err(format!("expected direct, normalized or `gamma g`, got `{s}`")),
    }
}

fn centers(s: &str) -> Result<Centers, String> {
    match s {
        "origin" => Ok(Centers::Origin),
        "auto_critical" => Ok(Centers::AutoCritical),
        "auto_branching" => Ok(Centers::AutoBranching),
        _ => s
            .split(';')
            .map(pair)
            .collect::<Result<Vec<_>, _>>()
            .map(Centers::Points)
            .map_err(|m| format!("expected origin, auto_critical, auto_branching or `x y; x y`: {m}")),
    }
}

fn checks(s: &str) -> Result<Vec<Check>, String> {
    if s == "none" {
        return Ok(Vec::new());
    }
    let mut out: Vec<Check> = words(s)
        .map(|w| match w {
            "decay" => Ok(Check::Decay),
            "nondegeneracy" => Ok(Check::Nondegeneracy),
            "reflection" => Ok(Check::Reflection),
            "refinement" => Ok(Check::Refinement),
            _ => Err(format!("unknown check `{w}`")),
        })
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn formats(s: &str) -> Result<Vec<Format>, String> {
    let mut out: Vec<Format> = words(s)
        .map(|w| match w {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "field" => Ok(Format::Field),
            _ => Err(format!("unknown format `{w}`")),
        })
        .collect::<Result<_, _>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

fn grid_size(s: &str) -> Result<Vec<usize>, String> {
    let ns: Vec<usize> = words(s).map(integer).collect::<Result<_, _>>()?;
    if ns.is_empty() {
        return Err("expected at least one grid size".into());
    }
    for &n in &ns {
        if n % 2 == 0 {
            return Err(format!("grid size must be odd so the origin is a node, got {n}"));
        }
        if n < 5 {
            return Err(format!("grid size must be at least 5, got {n}"));
        }
    }
    Ok(ns)
}

fn parse_model(e: &mut Entries) -> Result<RhsModel, ConfigError> {
    let (line, kind) = req(e, "model.kind", |s| Ok(s.to_string()))?;
    let built = match kind.as_str() {
        "zero" => Ok(RhsModel::zero()),
        "general" => {
            let (_, m) = req(e, "model.m", nonneg)?;
            let (_, kappa) = req(e, "model.kappa", nonneg)?;
            let (_, w) = req(e, "model.weight", weight)?;
            RhsModel::general(m, kappa, w)
        }
        "dead_core" => {
            let (_, lambda) = req(e, "model.lambda", positive)?;
            let (_, gamma) = req(e, "model.gamma", |s| {
                let g = float(s)?;
                if (0.0..3.0).contains(&g) {
                    Ok(g)
                } else {
                    Err(format!("gamma must lie in [0, 3), got {g}"))
                }
            })?;
            RhsModel::dead_core(lambda, gamma)
        }
        "henon" => {
            let (_, terms) = req(e, "model.terms", henon_terms)?;
            RhsModel::henon_sum(terms)
        }
        "obstacle" => {
            let (_, f) = req(e, "model.f", weight)?;
            let (_, m0) = req(e, "model.m0", positive)?;
            RhsModel::obstacle(f, m0)
        }
        other => {
            return Err(key_err(
                line,
                "model.kind",
                format!("unknown model `{other}` (zero, general, dead_core, henon, obstacle)"),
            ))
        }
    };
    built.map_err(|err| key_err(line, "model.kind", err.to_string()))
}

fn parse_boundary(e: &mut Entries, default_seed: u64) -> Result<BoundarySpec, ConfigError> {
    let (line, kind) = req(e, "boundary.kind", |s| Ok(s.to_string()))?;
    Ok(match kind.as_str() {
        "affine" => {
            let (_, p) = req(e, "boundary.p", pair)?;
            let c = opt(e, "boundary.c", float)?.map_or(0.0, |(_, v)| v);
            BoundarySpec::Affine { p, c }
        }
        "aronsson" => {
            let (l, a) = opt(e, "boundary.a", pair)?.unwrap_or((line, [1.0, -1.0]));
            OracleField::aronsson(a).map_err(|err| key_err(l, "boundary.a", err.to_string()))?;
            BoundarySpec::Aronsson { a }
        }
        "constant" => BoundarySpec::Constant(req(e, "boundary.value", float)?.1),
        "custom_odd" => BoundarySpec::CustomOdd,
        "ramp" => BoundarySpec::Ramp { shift: opt(e, "boundary.shift", float)?.map_or(0.0, |(_, v)| v) },
        "random_fourier" => {
            let seed = opt(e, "boundary.seed", integer)?.map_or(default_seed, |(_, v)| v);
            let (l, modes) = req(e, "boundary.modes", integer::<usize>)?;
            if modes == 0 {
                return Err(key_err(l, "boundary.modes", "need at least one mode"));
            }
            BoundarySpec::RandomFourier { seed, modes }
        }
        other => {
            return Err(key_err(
                line,
                "boundary.kind",
                format!("unknown boundary `{other}` (affine, aronsson, constant, custom_odd, ramp, random_fourier)"),
            ))
        }
    })
}

fn parse_solver(e: &mut Entries) -> Result<SolverConfig, ConfigError> {
    let mut cfg = SolverConfig::default();
    if let Some((_, v)) = opt(e, "solver.tolerance", positive)? {
        cfg.tolerance = v;
    }
    if let Some((_, v)) = opt(e, "solver.max_sweeps", |s| match integer(s)? {
        0 => Err("must be >= 1".to_string()),
        n => Ok(n),
    })? {
        cfg.max_sweeps = v;
    }
    if let Some((_, v)) = opt(e, "solver.grad_floor", positive)? {
        cfg.grad_floor = Some(v);
    }
    if let Some((_, v)) = opt(e, "solver.damping", |s| {
        let v = float(s)?;
        if v > 0.0 && v <= 1.0 {
            Ok(v)
        } else {
            Err(format!("damping must lie in (0, 1], got {v}"))
        }
    })? {
        cfg.damping = v;
    }
    if let Some((_, v)) = opt(e, "solver.sweep_order", |s| match s {
        "lexicographic" => Ok(SweepOrder::Lexicographic),
        "red_black" => Ok(SweepOrder::RedBlack),
        _ => Err(format!("expected lexicographic or red_black, got `{s}`")),
    })? {
        cfg.sweep_order = v;
    }
    if let Some((_, v)) = opt(e, "solver.nonlinearity_lag", |s| match s {
        "frozen_sweep" => Ok(NonlinearityLag::FrozenSweep),
        _ => Err(format!("expected frozen_sweep, got `{s}`")),
    })? {
        cfg.nonlinearity_lag = v;
    }
    if let Some((_, v)) = opt(e, "solver.deterministic", boolean)? {
        cfg.deterministic = v;
    }
    Ok(cfg)
}

fn parse_analysis(e: &mut Entries) -> Result<AnalysisBlock, ConfigError> {
    let mut a = AnalysisBlock::default();
    macro_rules! set {
        ($key:literal, $parse:expr, $field:expr) => {
            if let Some((_, v)) = opt(e, $key, $parse)? {
                $field = v;
            }
        };
    }
    set!("analysis.checks", checks, a.checks);
    set!("analysis.centers", centers, a.centers);
    set!("analysis.k_max", integer, a.k_max);
    set!("analysis.r0", |s| positive(s).map(Some), a.r0);
    set!("analysis.tol_alpha", positive, a.tol_alpha);
    set!("analysis.alpha_pred", |s| positive(s).map(Some), a.alpha_pred);
    set!("analysis.theta", |s| positive(s).map(Some), a.theta);
    set!("analysis.sigma", nonneg, a.sigma);
    set!("analysis.nd_factor", positive, a.nd_factor);
    set!("analysis.tau_u_scale", positive, a.tau_u_scale);
    set!("analysis.tau_g_scale", positive, a.tau_g_scale);
    set!("analysis.rho_b_scale", positive, a.rho_b_scale);
    set!("analysis.c0", |s| positive(s).map(Some), a.c0);
    set!("analysis.slope_gap", positive, a.slope_gap);
    set!("analysis.min_reduction", positive, a.min_reduction);
    Ok(a)
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut e = Entries::parse(text)?;
    let name = opt(&mut e, "experiment.name", |s| Ok(s.to_string()))?.map_or_else(|| "experiment".to_string(), |(_, v)| v);

    let (n_line, n) = req(&mut e, "grid.n", grid_size)?;
    let (_, half_width) = opt(&mut e, "grid.half_width", positive)?.unwrap_or((0, 1.0));
    let (w_line, stencil_width) =
        opt(&mut e, "grid.stencil_width", |s| words(s).map(integer).collect::<Result<Vec<usize>, _>>())?
            .unwrap_or((0, vec![2]));
    if stencil_width.is_empty() || (stencil_width.len() != 1 && stencil_width.len() != n.len()) {
        return Err(key_err(w_line, "grid.stencil_width", "give one width or one per grid size"));
    }
    for &w in &stencil_width {
        build_stencil(w).map_err(|err| key_err(w_line, "grid.stencil_width", err.to_string()))?;
    }
    for &size in &n {
        build_grid(size, half_width).map_err(|err| key_err(n_line, "grid.n", err.to_string()))?;
    }

    let model = parse_model(&mut e)?;
    let operator = opt(&mut e, "model.operator", operator)?.map_or(OperatorKind::Direct, |(_, v)| v);

    let output_seed = opt(&mut e, "output.seed", integer)?;
    let seed = output_seed.map_or(0, |(_, v)| v);
    let boundary = parse_boundary(&mut e, seed)?;
    let solver = parse_solver(&mut e)?;
    let analysis = parse_analysis(&mut e)?;

    let mut output = OutputBlock { seed, ..OutputBlock::default() };
    if let Some((_, dir)) = opt(&mut e, "output.directory", |s| Ok(PathBuf::from(s)))? {
        output.directory = Some(dir);
    }
    if let Some((_, f)) = opt(&mut e, "output.formats", formats)? {
        output.formats = f;
    }
    e.finish()?;

    let cfg = ExperimentConfig { name, grid: GridBlock { n, half_width, stencil_width }, model, operator, boundary, solver, analysis, output };
    cfg.check_consistency(n_line)?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn check_consistency(&self, n_line: usize) -> Result<(), ConfigError> {
        let refinement = self.analysis.checks.contains(&Check::Refinement);
        if refinement {
            if self.grid.n.len() < 3 {
                return Err(key_err(n_line, "grid.n", "a refinement study needs at least 3 grid sizes"));
            }
            if self.grid.n.windows(2).any(|w| w[1] <= w[0]) {
                return Err(key_err(n_line, "grid.n", "grid sizes must strictly increase"));
            }
            if self.boundary.oracle().is_none() || !self.model.is_zero() {
                return Err(ConfigError::Syntax {
                    line: 0,
                    message: "refinement needs model.kind = zero and an affine or aronsson boundary".into(),
                });
            }
            if self.analysis.checks.len() > 1 {
                return Err(ConfigError::Syntax { line: 0, message: "refinement cannot be combined with other checks".into() });
            }
        } else if self.grid.n.len() != 1 {
            return Err(key_err(n_line, "grid.n", "several grid sizes are only allowed with the refinement check"));
        }
        if self.analysis.checks.contains(&Check::Reflection)
            && !matches!(self.analysis.centers, Centers::AutoBranching | Centers::Points(_))
        {
            return Err(ConfigError::Syntax {
                line: 0,
                message: "reflection needs analysis.centers = auto_branching or explicit points".into(),
            });
        }
        Ok(())
    }

    /// Canonical text form; `parse_config(cfg.serialize())` returns `cfg`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "experiment.name = {}", self.name);
        let _ = writeln!(s, "grid.n = {}", join(&self.grid.n));
        let _ = writeln!(s, "grid.half_width = {:?}", self.grid.half_width);
        let _ = writeln!(s, "grid.stencil_width = {}", join(&self.grid.stencil_width));
        match self.model.kind() {
            RhsKind::Zero => {
                let _ = writeln!(s, "model.kind = zero");
            }
            RhsKind::General { m, kappa, weight } => {
                let _ = writeln!(s, "model.kind = general\nmodel.m = {m:?}\nmodel.kappa = {kappa:?}");
                let _ = writeln!(s, "model.weight = {}", weight_text(weight));
            }
            RhsKind::DeadCore { lambda, gamma } => {
                let _ = writeln!(s, "model.kind = dead_core\nmodel.lambda = {lambda:?}\nmodel.gamma = {gamma:?}");
            }
            RhsKind::HenonSum(terms) => {
                let t: Vec<String> = terms
                    .iter()
                    .map(|t| format!("{:?} {:?} {:?} {:?} @ {}", t.c, t.beta, t.m, t.kappa, set_text(&t.set)))
                    .collect();
                let _ = writeln!(s, "model.kind = henon\nmodel.terms = {}", t.join("; "));
            }
            RhsKind::Obstacle { f, m0 } => {
                let _ = writeln!(s, "model.kind = obstacle\nmodel.f = {}\nmodel.m0 = {m0:?}", weight_text(f));
            }
        }
        let op = match self.operator {
            OperatorKind::Direct => "direct".to_string(),
            OperatorKind::Normalized => "normalized".to_string(),
            OperatorKind::GammaFamily(g) => format!("gamma {g:?}"),
        };
        let _ = writeln!(s, "model.operator = {op}");
        match &self.boundary {
            BoundarySpec::Affine { p, c } => {
                let _ = writeln!(s, "boundary.kind = affine\nboundary.p = {:?} {:?}\nboundary.c = {c:?}", p[0], p[1]);
            }
            BoundarySpec::Aronsson { a } => {
                let _ = writeln!(s, "boundary.kind = aronsson\nboundary.a = {:?} {:?}", a[0], a[1]);
            }
            BoundarySpec::Constant(v) => {
                let _ = writeln!(s, "boundary.kind = constant\nboundary.value = {v:?}");
            }
            BoundarySpec::CustomOdd => {
                let _ = writeln!(s, "boundary.kind = custom_odd");
            }
            BoundarySpec::Ramp { shift } => {
                let _ = writeln!(s, "boundary.kind = ramp\nboundary.shift = {shift:?}");
            }
            BoundarySpec::RandomFourier { seed, modes } => {
                let _ = writeln!(s, "boundary.kind = random_fourier\nboundary.seed = {seed}\nboundary.modes = {modes}");
            }
        }
        let sv = &self.solver;
        let _ = writeln!(s, "solver.tolerance = {:?}", sv.tolerance);
        let _ = writeln!(s, "solver.max_sweeps = {}", sv.max_sweeps);
        if let Some(g) = sv.grad_floor {
            let _ = writeln!(s, "solver.grad_floor = {g:?}");
        }
        let _ = writeln!(s, "solver.damping = {:?}", sv.damping);
        let order = match sv.sweep_order {
            SweepOrder::Lexicographic => "lexicographic",
            SweepOrder::RedBlack => "red_black",
        };
        let _ = writeln!(s, "solver.sweep_order = {order}");
        let _ = writeln!(s, "solver.nonlinearity_lag = frozen_sweep");
        let _ = writeln!(s, "solver.deterministic = {}", sv.deterministic);
        let a = &self.analysis;
        let checks: Vec<&str> = a.checks.iter().map(|c| c.name()).collect();
        let _ = writeln!(s, "analysis.checks = {}", if checks.is_empty() { "none".to_string() } else { checks.join(", ") });
        let centers = match &a.centers {
            Centers::Origin => "origin".to_string(),
            Centers::AutoCritical => "auto_critical".to_string(),
            Centers::AutoBranching => "auto_branching".to_string(),
            Centers::Points(p) => p.iter().map(|p| format!("{:?} {:?}", p[0], p[1])).collect::<Vec<_>>().join("; "),
        };
        let _ = writeln!(s, "analysis.centers = {centers}");
        let _ = writeln!(s, "analysis.k_max = {}", a.k_max);
        let optional = [("r0", a.r0), ("alpha_pred", a.alpha_pred), ("theta", a.theta), ("c0", a.c0)];
        for (key, v) in optional {
            if let Some(v) = v {
                let _ = writeln!(s, "analysis.{key} = {v:?}");
            }
        }
        for (key, v) in [
            ("tol_alpha", a.tol_alpha),
            ("sigma", a.sigma),
            ("nd_factor", a.nd_factor),
            ("tau_u_scale", a.tau_u_scale),
            ("tau_g_scale", a.tau_g_scale),
            ("rho_b_scale", a.rho_b_scale),
            ("slope_gap", a.slope_gap),
            ("min_reduction", a.min_reduction),
        ] {
            let _ = writeln!(s, "analysis.{key} = {v:?}");
        }
        if let Some(dir) = &self.output.directory {
            let _ = writeln!(s, "output.directory = {}", dir.display());
        }
        let f: Vec<&str> = self.output.formats.iter().map(|f| f.name()).collect();
        let _ = writeln!(s, "output.formats = {}", f.join(", "));
        let _ = writeln!(s, "output.seed = {}", self.output.seed);
        s
    }
}

fn set_text(set: &[SetElement]) -> String {
    set.iter()
        .map(|e| match e {
            SetElement::Point(p) => format!("point {:?} {:?}", p[0], p[1]),
            SetElement::Segment(a, b) => format!("segment {:?} {:?} {:?} {:?}", a[0], a[1], b[0], b[1]),
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn weight_text(w: &WeightSpec) -> String {
    match w {
        WeightSpec::Constant(c) => format!("constant {c:?}"),
        WeightSpec::PowerOfRadius { c, beta } => format!("radius {c:?} {beta:?}"),
        WeightSpec::DistToSet { c, beta, set } => format!("distance {c:?} {beta:?} @ {}", set_text(set)),
    }
}
