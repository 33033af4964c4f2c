//! CSV and JSON emission. Floats are written with 17 significant digits.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use inflap_core::{DecayReport, NondegeneracyReport, ReflectionReport, RefinementRow, ScalarField};
use serde_json::{Map, Number, Value};

use crate::config::{Check, ExperimentConfig, Format};
use crate::run::{Results, SolveSummary};

/// `x` in scientific notation with 17 significant digits; empty if not finite.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

/// JSON number with the same digits as [`fmt_float`]; `null` if not finite.
pub fn json_float(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_float(x)).expect("formatted float is a JSON number"))
    } else {
        Value::Null
    }
}

fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_float)
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String], files: &mut Vec<PathBuf>) -> io::Result<()> {
    let mut text = String::with_capacity(64 * (rows.len() + 1));
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text)?;
    files.push(path);
    Ok(())
}

fn join(cells: &[String]) -> String {
    cells.join(",")
}

fn decay_rows(reports: &[DecayReport]) -> Vec<String> {
    let mut rows = Vec::new();
    for rep in reports {
        for (k, &r) in rep.radii.iter().enumerate() {
            rows.push(join(&[
                fmt_float(rep.center_point[0]),
                fmt_float(rep.center_point[1]),
                k.to_string(),
                fmt_float(r),
                fmt_float(rep.sup_abs[k]),
                fmt_float(rep.sup_pos[k]),
                fmt_float(rep.sup_neg[k]),
            ]));
        }
    }
    rows
}

fn residual_rows(solve: Option<&SolveSummary>, refinement: &[RefinementRow]) -> Vec<String> {
    let opt = |x: Option<f64>| x.map_or_else(String::new, fmt_float);
    let mut rows: Vec<String> = refinement
        .iter()
        .map(|row| {
            join(&[
                row.n_per_side.to_string(),
                fmt_float(row.h),
                row.stencil_width.to_string(),
                row.sweeps_used.map_or_else(String::new, |s| s.to_string()),
                String::new(),
                String::new(),
                String::new(),
                fmt_float(row.sup_residual),
                opt(row.sup_error),
            ])
        })
        .collect();
    if let Some(s) = solve {
        rows.push(join(&[
            s.n_per_side.to_string(),
            fmt_float(s.h),
            s.stencil_width.to_string(),
            s.sweeps_used.to_string(),
            s.converged.to_string(),
            fmt_float(s.final_update_norm),
            fmt_float(s.final_residual_sup),
            String::new(),
            String::new(),
        ]));
    }
    rows
}

fn field_rows(field: &ScalarField) -> Vec<String> {
    let grid = field.grid();
    field
        .values()
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let x = grid.point_flat(k);
            join(&[fmt_float(x[0]), fmt_float(x[1]), fmt_float(v)])
        })
        .collect()
}

fn nondegeneracy_rows(reports: &[NondegeneracyReport], grid_point: impl Fn(&NondegeneracyReport) -> [f64; 2]) -> Vec<String> {
    let mut rows = Vec::new();
    for rep in reports {
        let c = grid_point(rep);
        for row in &rep.rows {
            rows.push(join(&[
                fmt_float(c[0]),
                fmt_float(c[1]),
                fmt_float(row.r),
                fmt_float(row.shell_sup),
                fmt_float(row.lower_bound),
                fmt_float(row.theta_r),
            ]));
        }
    }
    rows
}

fn reflection_rows(reports: &[ReflectionReport], grid_point: impl Fn(&ReflectionReport) -> [f64; 2]) -> Vec<String> {
    let mut rows = Vec::new();
    for rep in reports {
        let c = grid_point(rep);
        for (k, &r) in rep.radii.iter().enumerate() {
            rows.push(join(&[
                fmt_float(c[0]),
                fmt_float(c[1]),
                k.to_string(),
                fmt_float(r),
                fmt_float(rep.s_minus[k]),
                fmt_float(rep.s_plus[k]),
                fmt_float(rep.s[k]),
            ]));
        }
    }
    rows
}

/// The run summary; contains no timings, so reruns reproduce it byte for byte.
pub fn summary_json(cfg: &ExperimentConfig, res: &Results) -> Value {
    let mut m = Map::new();
    let first = res.decay.first();
    m.insert("experiment".into(), Value::String(cfg.name.clone()));
    m.insert("alpha_fit".into(), json_opt(first.map(|r| r.fit.slope)));
    m.insert("alpha_pred".into(), json_opt(res.alpha_pred));
    m.insert("r_squared".into(), json_opt(first.map(|r| r.fit.r_squared)));

    let mut verdicts = Map::new();
    for check in [Check::Decay, Check::Nondegeneracy, Check::Reflection, Check::Refinement] {
        let v = res.verdict(check).map_or(Value::Null, Value::Bool);
        verdicts.insert(check.name().into(), v);
    }
    m.insert("verdicts".into(), Value::Object(verdicts));

    let solve = res.solve.as_ref();
    m.insert("sweeps_used".into(), solve.map_or(Value::Null, |s| Value::from(s.sweeps_used)));
    m.insert("final_residual_sup".into(), json_opt(solve.map(|s| s.final_residual_sup)));
    m.insert("converged".into(), solve.map_or(Value::Null, |s| Value::Bool(s.converged)));
    m.insert(
        "centers".into(),
        Value::Array(res.centers.iter().map(|c| Value::Array(vec![json_float(c[0]), json_float(c[1])])).collect()),
    );
    m.insert(
        "decay".into(),
        Value::Array(
            res.decay
                .iter()
                .map(|r| {
                    let mut o = Map::new();
                    o.insert("alpha_fit".into(), json_float(r.fit.slope));
                    o.insert("r_squared".into(), json_float(r.fit.r_squared));
                    o.insert("points".into(), Value::from(r.fit.points));
                    o.insert("verdict".into(), Value::Bool(r.verdict));
                    Value::Object(o)
                })
                .collect(),
        ),
    );
    m.insert(
        "nondegeneracy".into(),
        Value::Array(
            res.nondegeneracy
                .iter()
                .map(|r| {
                    let mut o = Map::new();
                    o.insert("theta".into(), json_float(r.theta));
                    o.insert("sigma".into(), json_float(r.sigma));
                    o.insert("alpha".into(), json_float(r.alpha));
                    o.insert("k_nd".into(), json_float(r.k_nd));
                    o.insert("hypothesis_holds".into(), Value::Bool(r.hypothesis_holds));
                    o.insert("verdict".into(), Value::Bool(r.verdict));
                    Value::Object(o)
                })
                .collect(),
        ),
    );
    m.insert(
        "reflection".into(),
        Value::Array(
            res.reflection
                .iter()
                .map(|r| {
                    let mut o = Map::new();
                    o.insert("alpha".into(), json_float(r.alpha));
                    o.insert("c0".into(), json_float(r.c0));
                    o.insert("c1_tilde".into(), json_float(r.c1_tilde));
                    o.insert("hypothesis_holds".into(), Value::Bool(r.hypothesis_holds));
                    o.insert("slope_minus".into(), json_opt(r.fit_minus.map(|f| f.slope)));
                    o.insert("slope_plus".into(), json_opt(r.fit_plus.map(|f| f.slope)));
                    o.insert("verdict".into(), Value::Bool(r.verdict));
                    Value::Object(o)
                })
                .collect(),
        ),
    );
    m.insert(
        "refinement".into(),
        Value::Array(
            res.refinement
                .iter()
                .map(|row| {
                    let mut o = Map::new();
                    o.insert("n".into(), Value::from(row.n_per_side));
                    o.insert("stencil_width".into(), Value::from(row.stencil_width));
                    o.insert("sup_error".into(), json_opt(row.sup_error));
                    o.insert("sup_residual".into(), json_float(row.sup_residual));
                    Value::Object(o)
                })
                .collect(),
        ),
    );
    Value::Object(m)
}

/// Writes the report files requested by the config; returns the paths written.
pub fn emit_reports(cfg: &ExperimentConfig, res: &Results, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let formats = &cfg.output.formats;
    let point = |node| res.grid.map_or([0.0, 0.0], |g| g.point(node));
    if formats.contains(&Format::Csv) {
        if !res.decay.is_empty() {
            write_csv(dir, "decay.csv", "center_x,center_y,k,r,sup_abs,sup_pos,sup_neg", &decay_rows(&res.decay), &mut files)?;
        }
        if res.solve.is_some() || !res.refinement.is_empty() {
            write_csv(
                dir,
                "residual.csv",
                "n,h,stencil_width,sweeps_used,converged,final_update_norm,final_residual_sup,consistency_sup,sup_error",
                &residual_rows(res.solve.as_ref(), &res.refinement),
                &mut files,
            )?;
        }
        if !res.nondegeneracy.is_empty() {
            write_csv(
                dir,
                "nondegeneracy.csv",
                "center_x,center_y,r,shell_sup,lower_bound,theta_r",
                &nondegeneracy_rows(&res.nondegeneracy, |r| point(r.center)),
                &mut files,
            )?;
        }
        if !res.reflection.is_empty() {
            write_csv(
                dir,
                "reflection.csv",
                "center_x,center_y,k,r,s_minus,s_plus,s",
                &reflection_rows(&res.reflection, |r| point(r.center)),
                &mut files,
            )?;
        }
    }
    if formats.contains(&Format::Field) {
        if let Some(field) = &res.field {
            write_csv(dir, "field.csv", "x,y,u", &field_rows(field), &mut files)?;
        }
    }
    if formats.contains(&Format::Json) {
        let path = dir.join("summary.json");
        let mut text = serde_json::to_string_pretty(&summary_json(cfg, res)).expect("summary serializes");
        text.push('\n');
        fs::write(&path, text)?;
        files.push(path);
    }
    Ok(files)
}
