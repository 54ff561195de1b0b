//! Branch CSV, solution-snapshot CSV, bound reports and SVG diagrams.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reloaded
//! snapshots reproduce the in-memory values bit for bit.

use anyhow::{bail, Context, Result};
use quadgrad::bounds::BoundReport;
use quadgrad::calculus::GridFunction;
use quadgrad::continuation::{Branch, TerminationReason};
use quadgrad::mesh::Grid;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

pub const BRANCH_HEADER: &str =
    "parameter_kind,parameter_value,arclength,sup_norm,max_u,min_u,probe_value,fold_flag,residual";

pub fn termination_name(t: TerminationReason) -> &'static str {
    match t {
        TerminationReason::RangeExhausted => "range-exhausted",
        TerminationReason::NormCap => "norm-cap",
        TerminationReason::StepFailure => "step-failure",
        TerminationReason::MaxPoints => "max-points",
    }
}

pub fn branch_csv(branch: &Branch<f64>) -> String {
    let mut out = String::new();
    out.push_str(BRANCH_HEADER);
    out.push('\n');
    let fold_rows: Vec<usize> = branch.folds.iter().map(|f| f.index).collect();
    for (k, pt) in branch.points.iter().enumerate() {
        let fold_flag = usize::from(fold_rows.contains(&k));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            branch.parameter_kind.as_str(),
            pt.parameter,
            pt.arclength,
            pt.sup_norm,
            pt.max_u,
            pt.min_u,
            pt.probe_value,
            fold_flag,
            pt.residual
        )
        .expect("string write");
    }
    out
}

/// one row per accepted point: index, parameter, then every node value
pub fn solutions_csv(branch: &Branch<f64>) -> String {
    let mut out = String::new();
    let nodes = branch
        .points
        .first()
        .map(|p| p.solution.values().len())
        .unwrap_or(0);
    out.push_str("index,parameter");
    for i in 0..nodes {
        write!(out, ",u{i}").expect("string write");
    }
    out.push('\n');
    for (k, pt) in branch.points.iter().enumerate() {
        write!(out, "{},{}", k, pt.parameter).expect("string write");
        for v in pt.solution.values() {
            write!(out, ",{v}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// parses a solutions CSV back into (parameter, grid function) rows
pub fn load_solutions(
    text: &str,
    grid: &Arc<Grid<f64>>,
) -> Result<Vec<(f64, GridFunction<f64>)>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty solutions file")?;
    if !header.starts_with("index,parameter") {
        bail!("unexpected solutions header: {header}");
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let _idx = fields.next();
        let parameter: f64 = fields
            .next()
            .with_context(|| format!("line {}: missing parameter", lineno + 2))?
            .parse()
            .with_context(|| format!("line {}: bad parameter", lineno + 2))?;
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("line {}: bad node value", lineno + 2))?;
        if values.len() != grid.node_count() {
            bail!(
                "line {}: {} node values for a grid with {} nodes",
                lineno + 2,
                values.len(),
                grid.node_count()
            );
        }
        out.push((parameter, GridFunction::new(grid.clone(), values)?));
    }
    Ok(out)
}

pub fn bounds_csv(lower: &BoundReport<f64>, upper: Option<&BoundReport<f64>>) -> String {
    let mut out = String::new();
    out.push_str("report,window_lo,window_hi,sup_coarse,sup_fine,stability_ratio,covered\n");
    writeln!(
        out,
        "lower,{},{},{},{},{},{}",
        lower.window.0,
        lower.window.1,
        lower.sup_coarse,
        lower.sup_fine,
        lower.stability_ratio,
        lower.window_covered
    )
    .expect("string write");
    if let Some(up) = upper {
        writeln!(
            out,
            "upper,{},{},{},{},{},{}",
            up.window.0, up.window.1, up.sup_coarse, up.sup_fine, up.stability_ratio, up.window_covered
        )
        .expect("string write");
    }
    out.push_str("parameter,norm\n");
    for (t, v) in &lower.table {
        writeln!(out, "{t},{v}").expect("string write");
    }
    out
}

/// Minimal SVG 1.1 diagram: the branch projected onto (parameter, probe) and
/// (parameter, max_u) polylines with axes and fold markers.
pub fn branch_svg(branch: &Branch<f64>) -> String {
    let w = 640.0f64;
    let h = 480.0f64;
    let margin = 50.0f64;
    let pts = &branch.points;
    let (mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in pts {
        tmin = tmin.min(p.parameter);
        tmax = tmax.max(p.parameter);
        for v in [p.probe_value, p.max_u] {
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    if !tmin.is_finite() || tmax - tmin < 1e-12 {
        tmax = tmin + 1.0;
    }
    if !vmin.is_finite() || vmax - vmin < 1e-12 {
        vmax = vmin + 1.0;
    }
    let sx = |t: f64| margin + (t - tmin) / (tmax - tmin) * (w - 2.0 * margin);
    let sy = |v: f64| h - margin - (v - vmin) / (vmax - vmin) * (h - 2.0 * margin);
    let poly = |get: &dyn Fn(&quadgrad::continuation::BranchPoint<f64>) -> f64| -> String {
        pts.iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.parameter), sy(get(p))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    // axes
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{y}\" x2=\"{x}\" y2=\"{y}\" stroke=\"black\"/>\n",
        m = margin,
        x = w - margin,
        y = h - margin
    ));
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{y}\" stroke=\"black\"/>\n",
        m = margin,
        y = h - margin
    ));
    // zero-level of the vertical axis if it is inside the range
    if vmin < 0.0 && vmax > 0.0 {
        svg.push_str(&format!(
            "  <line x1=\"{m}\" y1=\"{y:.2}\" x2=\"{x}\" y2=\"{y:.2}\" stroke=\"lightgray\"/>\n",
            m = margin,
            x = w - margin,
            y = sy(0.0)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.0}\" y=\"{:.0}\" font-size=\"12\">{}</text>\n",
        w / 2.0 - 20.0,
        h - 12.0,
        branch.parameter_kind.as_str()
    ));
    svg.push_str(&format!(
        "  <text x=\"8\" y=\"{:.0}\" font-size=\"12\" transform=\"rotate(-90 14 {:.0})\">u(x0), max u</text>\n",
        h / 2.0,
        h / 2.0
    ));
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
        poly(&|p| p.probe_value)
    ));
    svg.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"firebrick\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n",
        poly(&|p| p.max_u)
    ));
    for f in &branch.folds {
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"none\" stroke=\"black\"/>\n",
            sx(f.parameter),
            sy(pts[f.index].probe_value)
        ));
    }
    for (t, label) in [(tmin, format!("{tmin:.3}")), (tmax, format!("{tmax:.3}"))] {
        svg.push_str(&format!(
            "  <text x=\"{:.0}\" y=\"{:.0}\" font-size=\"10\">{}</text>\n",
            sx(t) - 10.0,
            h - margin + 16.0,
            label
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
