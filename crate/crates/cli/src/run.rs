//! Build, solve, analyze, emit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use inflap_core::{
    auto_branching_center, auto_critical_center, build_grid, build_stencil, check_nondegeneracy, detect_branching_set,
    dyadic_radii, measure_decay_many, reflection_check, refinement_study, solve, BranchingSet, DecayReport,
    DecaySettings, Grid2D, Node, NondegeneracyReport, ReflectionReport, ReflectionSettings, RefinementRow,
    ScalarField, StencilSet,
};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Centers, Check, ConfigError, ExperimentConfig};
use crate::report::{emit_reports, json_float};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] inflap_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    VerdictFailed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::VerdictFailed => 2,
            Status::Error => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::VerdictFailed => "verdict_failed",
            Status::Error => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSummary {
    pub n_per_side: usize,
    pub h: f64,
    pub stencil_width: usize,
    pub sweeps_used: usize,
    pub converged: bool,
    pub final_update_norm: f64,
    pub final_residual_sup: f64,
}

/// Everything computed by one run.
#[derive(Debug, Clone, Default)]
pub struct Results {
    pub grid: Option<Grid2D>,
    pub field: Option<ScalarField>,
    pub solve: Option<SolveSummary>,
    pub refinement: Vec<RefinementRow>,
    pub centers: Vec<[f64; 2]>,
    pub alpha_pred: Option<f64>,
    pub decay: Vec<DecayReport>,
    pub nondegeneracy: Vec<NondegeneracyReport>,
    pub reflection: Vec<ReflectionReport>,
    verdicts: BTreeMap<Check, bool>,
}

impl Results {
    /// `None` when the check was not requested.
    pub fn verdict(&self, check: Check) -> Option<bool> {
        self.verdicts.get(&check).copied()
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub results: Option<Results>,
    pub failure: Option<String>,
    /// Report files, excluding the manifest.
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.serialize().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

struct Phases(Vec<(&'static str, f64)>);

impl Phases {
    fn time<T>(&mut self, name: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0.push((name, start.elapsed().as_secs_f64()));
        out
    }
}

/// Writes `manifest.json` into `dir`.
pub fn write_manifest(
    dir: &Path,
    hash: Option<&str>,
    status: Status,
    failure: Option<&str>,
    phases: &[(&str, f64)],
    files: &[PathBuf],
) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut m = Map::new();
    m.insert("config_hash".into(), hash.map_or(Value::Null, |h| Value::String(h.into())));
    m.insert("tool_version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    m.insert("status".into(), Value::String(status.name().into()));
    m.insert("exit_code".into(), Value::from(status.exit_code()));
    m.insert("failure_reason".into(), failure.map_or(Value::Null, |f| Value::String(f.into())));
    m.insert(
        "phases".into(),
        Value::Array(
            phases
                .iter()
                .map(|(name, secs)| {
                    let mut p = Map::new();
                    p.insert("name".into(), Value::String((*name).into()));
                    p.insert("seconds".into(), json_float(*secs));
                    Value::Object(p)
                })
                .collect(),
        ),
    );
    m.insert(
        "files".into(),
        Value::Array(
            files
                .iter()
                .map(|f| Value::String(f.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())))
                .collect(),
        ),
    );
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&Value::Object(m)).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// Runs one experiment and writes its reports and manifest into `out_dir`.
/// The manifest is written whatever the outcome.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> RunOutcome {
    let mut phases = Phases(Vec::new());
    let computed = execute(cfg, &mut phases);
    let (status, results, failure, files) = match computed {
        Ok(res) => match phases.time("emit", || emit_reports(cfg, &res, out_dir)) {
            Ok(files) => {
                let status = if res.all_pass() { Status::Pass } else { Status::VerdictFailed };
                let failure = (status == Status::VerdictFailed).then(|| {
                    let failed: Vec<&str> = res.verdicts.iter().filter(|(_, &v)| !v).map(|(c, _)| c.name()).collect();
                    format!("verdict failed: {}", failed.join(", "))
                });
                (status, Some(res), failure, files)
            }
            Err(err) => (Status::Error, Some(res), Some(RunError::from(err).to_string()), Vec::new()),
        },
        Err(err) => (Status::Error, None, Some(err.to_string()), Vec::new()),
    };
    let hash = config_hash(cfg);
    let (status, failure, manifest) =
        match write_manifest(out_dir, Some(&hash), status, failure.as_deref(), &phases.0, &files) {
            Ok(path) => (status, failure, path),
            Err(err) => (Status::Error, Some(format!("cannot write manifest: {err}")), out_dir.join("manifest.json")),
        };
    RunOutcome { status, results, failure, files, manifest }
}

fn execute(cfg: &ExperimentConfig, phases: &mut Phases) -> Result<Results, RunError> {
    let mut res = Results::default();
    let checks = &cfg.analysis.checks;
    let stencils = phases.time("build", || {
        cfg.grid.stencil_width.iter().map(|&w| build_stencil(w)).collect::<inflap_core::Result<Vec<_>>>()
    })?;

    if checks.contains(&Check::Refinement) {
        let oracle = cfg.boundary.oracle().expect("validated at parse time");
        let rows = phases.time("solve", || {
            refinement_study(
                &oracle,
                &cfg.model,
                &cfg.grid.n,
                cfg.grid.half_width,
                &stencils,
                cfg.operator,
                Some(&cfg.solver),
            )
        })?;
        let errors: Vec<f64> = rows.iter().filter_map(|r| r.sup_error).collect();
        let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
        let reduction = errors.first().zip(errors.last()).map_or(0.0, |(a, b)| a / b);
        res.verdicts.insert(Check::Refinement, decreasing && reduction >= cfg.analysis.min_reduction);
        res.refinement = rows;
        return Ok(res);
    }

    let grid = build_grid(cfg.grid.n[0], cfg.grid.half_width)?;
    let stencil = &stencils[0];
    let out = phases.time("solve", || solve(&grid, stencil, &cfg.model, &cfg.boundary.data(), cfg.operator, &cfg.solver))?;
    res.grid = Some(grid);
    res.solve = Some(SolveSummary {
        n_per_side: grid.n_per_side(),
        h: grid.spacing(),
        stencil_width: stencil.width(),
        sweeps_used: out.sweeps_used,
        converged: out.converged,
        final_update_norm: out.final_update_norm,
        final_residual_sup: out.final_residual_sup,
    });
    let field = out.field;
    res.alpha_pred = cfg.analysis.alpha_pred.or_else(|| cfg.model.predicted_exponent().ok());

    if !checks.is_empty() {
        phases.time("analyze", || analyze(cfg, &grid, stencil, &field, &mut res))?;
    }
    res.field = Some(field);
    Ok(res)
}

fn analyze(
    cfg: &ExperimentConfig,
    grid: &Grid2D,
    stencil: &StencilSet,
    field: &ScalarField,
    res: &mut Results,
) -> Result<(), RunError> {
    let a = &cfg.analysis;
    let h = grid.spacing();
    let r0 = a.r0.unwrap_or(grid.half_width() / 2.0);
    let tau_u = a.tau_u_scale * h * h;
    let tau_g = a.tau_g_scale * h.cbrt();
    let needs_branching = a.checks.contains(&Check::Reflection) || a.centers == Centers::AutoBranching;
    let branching: Option<BranchingSet> =
        if needs_branching { Some(detect_branching_set(field, tau_u, a.rho_b_scale * h)?) } else { None };

    let centers: Vec<Node> = match &a.centers {
        Centers::Origin => vec![grid.origin()],
        Centers::AutoCritical => vec![auto_critical_center(field, stencil, tau_u, tau_g, r0)?],
        Centers::AutoBranching => vec![auto_branching_center(branching.as_ref().expect("computed above"), grid, r0)?],
        Centers::Points(points) => points
            .iter()
            .map(|&p| {
                grid.nearest_node(p).ok_or_else(|| {
                    inflap_core::Error::OutOfDomain(format!("center {p:?} lies outside the grid"))
                })
            })
            .collect::<Result<_, _>>()?,
    };
    res.centers = centers.iter().map(|&c| grid.point(c)).collect();

    if a.checks.contains(&Check::Decay) {
        let settings = DecaySettings {
            k_max: a.k_max,
            r0: Some(r0),
            solver_tolerance: cfg.solver.tolerance,
            alpha_pred: res.alpha_pred,
            tol_alpha: a.tol_alpha,
            ..DecaySettings::default()
        };
        res.decay = measure_decay_many(field, &centers, &settings).into_iter().collect::<Result<_, _>>()?;
        res.verdicts.insert(Check::Decay, res.decay.iter().all(|r| r.verdict));
    }

    if a.checks.contains(&Check::Nondegeneracy) {
        let floor = DecaySettings::default().min_radius_cells * h;
        let radii: Vec<f64> = dyadic_radii(r0, a.k_max).into_iter().filter(|&r| r >= floor).collect();
        res.nondegeneracy = centers
            .iter()
            .map(|&c| check_nondegeneracy(field, stencil, c, &cfg.model, a.theta, a.sigma, &radii, a.nd_factor))
            .collect::<Result<_, _>>()?;
        res.verdicts.insert(Check::Nondegeneracy, res.nondegeneracy.iter().all(|r| r.verdict));
    }

    if a.checks.contains(&Check::Reflection) {
        let alpha = res.alpha_pred.ok_or_else(|| {
            inflap_core::Error::InvalidParameter("reflection needs analysis.alpha_pred for this model".into())
        })?;
        let settings = ReflectionSettings {
            r0,
            k_max: a.k_max,
            alpha,
            c0: a.c0,
            noise_floor: DecaySettings::default().noise_factor * cfg.solver.tolerance,
        };
        let set = branching.as_ref().expect("computed above");
        res.reflection = centers
            .iter()
            .map(|&c| reflection_check(field, set, c, &settings))
            .collect::<Result<_, _>>()?;
        let pass = res.reflection.iter().all(|r| {
            let close = match (r.fit_minus, r.fit_plus) {
                (Some(m), Some(p)) => (m.slope - p.slope).abs() <= a.slope_gap,
                _ => false,
            };
            r.verdict && close
        });
        res.verdicts.insert(Check::Reflection, pass);
    }
    Ok(())
}
