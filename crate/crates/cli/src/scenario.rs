//! Scenario orchestration: branch and homotopy runs with their artifact set
//! (branch CSV, solution snapshots, bound reports, verification log, SVG).

use crate::config::Config;
use crate::output;
use anyhow::{anyhow, bail, Context, Result};
use quadgrad::bounds::verify_lower_bound;
use quadgrad::calculus::{ExtremalSide, GridFunction};
use quadgrad::continuation::{
    build_ctilde, detect_fold, homotopy_in_k, trace_branch, Branch, FoldDetection, TraceCaps,
};
use quadgrad::eigen::principal_eigenpair;
use quadgrad::fixedpoint::solve_full;
use quadgrad::operators::{residual_p, residual_scale, OperatorSpec, ProblemSpec};
use std::fmt::Write as _;
use std::path::Path;

fn caps_from(cfg: &Config, tol: f64, probe: usize) -> TraceCaps<f64> {
    let b = cfg.branch.as_ref();
    TraceCaps {
        tol,
        ds_min: 1e-9,
        ds_max: b.map_or(0.25, |b| b.ds_max),
        norm_cap: b.map_or(1e3, |b| b.norm_cap),
        max_points: b.map_or(3000, |b| b.max_points),
        probe: Some(probe),
    }
}

/// re-verifies every accepted point against a freshly computed residual
fn reverify(branch: &Branch<f64>, problem: &ProblemSpec<f64>, tol: f64) -> Result<(f64, f64)> {
    let mut worst = 0.0f64;
    let mut worst_allowed = 0.0f64;
    for pt in &branch.points {
        // lambda-family points re-evaluate at their own parameter
        let p = problem.with_lambda(pt.parameter);
        let r = residual_p(&pt.solution, &p).interior_max_norm();
        let scale = residual_scale(&pt.solution, &p);
        let allowed = tol.max(64.0 * f64::EPSILON * scale);
        if r > allowed {
            bail!(
                "branch point at parameter {} re-verified with residual {r:.3e} above {allowed:.3e}",
                pt.parameter
            );
        }
        if r > worst {
            worst = r;
            worst_allowed = allowed;
        }
    }
    Ok((worst, worst_allowed))
}

pub fn run_branch(cfg: &Config, out_dir: &Path, tol_override: Option<f64>) -> Result<()> {
    let bc = cfg
        .branch
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [branch] section"))?
        .clone();
    let built = cfg.build_problem(tol_override)?;
    let caps = caps_from(cfg, built.tol, built.probe);
    let p0 = built.problem.with_lambda(bc.from);
    let start = solve_full(&p0, &GridFunction::zeros(built.grid.clone()), built.tol);
    if !start.converged {
        bail!(
            "no solution at the range start (residual {:.3e} after {} iterations)",
            start.residual_norm,
            start.outer_iterations
        );
    }
    let branch = trace_branch(&built.problem, (bc.from, bc.to), bc.ds, &caps, &start.solution)?;

    // refinement pair for the lower-bound report
    let mut log = String::new();
    writeln!(log, "scenario: {}", cfg.name.as_deref().unwrap_or("unnamed")).ok();
    writeln!(log, "points: {}", branch.points.len()).ok();
    writeln!(
        log,
        "termination: {}",
        output::termination_name(branch.termination)
    )
    .ok();
    match detect_fold(&branch) {
        FoldDetection::Present(folds) => {
            for f in &folds {
                writeln!(
                    log,
                    "fold: parameter {} bracket [{}, {}]",
                    f.parameter, f.bracket.0, f.bracket.1
                )
                .ok();
            }
        }
        FoldDetection::Absent => {
            writeln!(log, "fold: absent").ok();
        }
    }
    let (worst, allowed) = reverify(&branch, &built.problem, built.tol)?;
    writeln!(log, "reverified residual: worst {worst:.3e} (allowed {allowed:.3e})").ok();
    // observed continuum case: an unbounded sheet hits the norm cap, a
    // branch covering the whole window exhausts the range
    match branch.termination {
        quadgrad::continuation::TerminationReason::NormCap => {
            let last = branch.points.last().expect("nonempty branch");
            writeln!(
                log,
                "branch case: unbounded sheet (norm cap {} reached at parameter {})",
                caps.norm_cap, last.parameter
            )
            .ok();
        }
        quadgrad::continuation::TerminationReason::RangeExhausted => {
            writeln!(log, "branch case: parameter range fully covered").ok();
        }
        other => {
            writeln!(log, "branch case: inconclusive ({})", output::termination_name(other)).ok();
        }
    }
    // support of the weight enters the uniform bounds; record it per run
    let c_support = built
        .grid
        .interior()
        .iter()
        .filter(|&&i| built.problem.c.get(i) > 0.0)
        .count();
    writeln!(
        log,
        "support of c: {c_support} of {} interior nodes",
        built.grid.interior().len()
    )
    .ok();

    let coarse_branch = {
        let mut coarse_cfg = cfg.clone();
        coarse_cfg.grid.n = (cfg.grid.n / 2).max(4);
        let coarse = coarse_cfg.build_problem(tol_override)?;
        let pc = coarse.problem.with_lambda(bc.from);
        let s = solve_full(&pc, &GridFunction::zeros(coarse.grid.clone()), coarse.tol);
        if s.converged {
            trace_branch(&coarse.problem, (bc.from, bc.to), bc.ds, &caps, &s.solution).ok()
        } else {
            None
        }
    };
    let window_hi = bc.from.max(bc.to);
    if let Some(cb) = &coarse_branch {
        let lower = verify_lower_bound(cb, &branch, window_hi.max(1e-9))?;
        writeln!(
            log,
            "lower bound: sup ||u^-|| coarse {} fine {} stability {:.3e} covered {}",
            lower.sup_coarse, lower.sup_fine, lower.stability_ratio, lower.window_covered
        )
        .ok();
        let upper = cfg
            .bounds
            .as_ref()
            .map(|bw| quadgrad::bounds::verify_upper_bound(cb, &branch, bw.lambda1, bw.lambda2))
            .transpose()?;
        if let Some(up) = &upper {
            writeln!(
                log,
                "upper bound on [{}, {}]: sup {} stability {:.3e} covered {}",
                up.window.0, up.window.1, up.sup_fine, up.stability_ratio, up.window_covered
            )
            .ok();
        }
        output::write_file(out_dir, "bounds.csv", &output::bounds_csv(&lower, upper.as_ref()))?;
    }

    output::write_file(out_dir, "branch.csv", &output::branch_csv(&branch))?;
    output::write_file(out_dir, "solutions.csv", &output::solutions_csv(&branch))?;
    output::write_file(out_dir, "branch.svg", &output::branch_svg(&branch))?;

    // reload the snapshots and re-verify each row's residual
    let text = std::fs::read_to_string(out_dir.join("solutions.csv"))?;
    let rows = output::load_solutions(&text, &built.grid)?;
    let mut reload_worst = 0.0f64;
    for (t, u) in &rows {
        let p = built.problem.with_lambda(*t);
        let r = residual_p(u, &p).interior_max_norm();
        let allowed = built.tol.max(64.0 * f64::EPSILON * residual_scale(u, &p));
        if r > allowed {
            bail!("reloaded snapshot at parameter {t} has residual {r:.3e} above {allowed:.3e}");
        }
        reload_worst = reload_worst.max(r);
    }
    writeln!(log, "reloaded {} snapshots: worst residual {reload_worst:.3e}", rows.len()).ok();
    output::write_file(out_dir, "verify.log", &log)?;
    println!(
        "branch: {} points, termination {}, artifacts in {}",
        branch.points.len(),
        output::termination_name(branch.termination),
        out_dir.display()
    );
    Ok(())
}

/// minimal extremal operator matching the configured ellipticity and drift
fn minus_operator(cfg: &Config, built: &crate::config::BuiltProblem) -> Result<OperatorSpec<f64>> {
    let e = *built.problem.op.ellipticity();
    let mut op = OperatorSpec::pucci(ExtremalSide::Minus, e);
    if let Some(b) = &cfg.operator.b {
        let bf = b.evaluate(&built.grid)?;
        if bf.values().iter().any(|v| *v != 0.0) {
            op = op.with_drift_bound(bf)?;
        }
    }
    Ok(op)
}

pub fn run_homotopy(cfg: &Config, out_dir: &Path, tol_override: Option<f64>) -> Result<()> {
    let hc = cfg
        .homotopy
        .as_ref()
        .ok_or_else(|| anyhow!("config has no [homotopy] section"))?
        .clone();
    let built = cfg.build_problem(tol_override)?;
    if !(hc.lambda > 0.0) {
        bail!("homotopy.lambda must be positive");
    }
    let p = built.problem.with_lambda(hc.lambda);
    let op_minus = minus_operator(cfg, &built)?;
    let eigen = principal_eigenpair(&op_minus, &p.c, &built.grid, built.tol.max(1e-9))
        .context("eigenpair for the homotopy weight")?;
    let m = p.matrix.mu1() / p.op.ellipticity().hi;
    // the empirical lower-bound constant, inflated by a factor of two
    let ctilde = build_ctilde(&p.c, &p.h, hc.lambda2, 2.0 * hc.c0, &eigen, m)?;
    let start = solve_full(&p, &GridFunction::zeros(built.grid.clone()), built.tol);
    if !start.converged {
        bail!("no solution at k = 0 (residual {:.3e})", start.residual_norm);
    }
    let caps = TraceCaps {
        tol: built.tol,
        ds_min: 1e-9,
        ds_max: 0.1,
        norm_cap: cfg.branch.as_ref().map_or(1e3, |b| b.norm_cap),
        max_points: 3000,
        probe: Some(built.probe),
    };
    let branch = homotopy_in_k(&p, &ctilde, (0.0, 1.0), hc.ds, &caps, &start.solution)?;
    let mut log = String::new();
    writeln!(log, "homotopy at lambda = {}", hc.lambda).ok();
    writeln!(log, "lambda1 = {}", eigen.lambda1).ok();
    writeln!(log, "points: {}", branch.points.len()).ok();
    writeln!(
        log,
        "termination: {}",
        output::termination_name(branch.termination)
    )
    .ok();
    match detect_fold(&branch) {
        FoldDetection::Present(folds) => {
            for f in &folds {
                writeln!(
                    log,
                    "fold: k* = {} bracket [{}, {}]",
                    f.parameter, f.bracket.0, f.bracket.1
                )
                .ok();
            }
        }
        FoldDetection::Absent => {
            writeln!(log, "fold: absent").ok();
        }
    }
    let kmax = branch
        .points
        .iter()
        .map(|pt| pt.parameter)
        .fold(f64::NEG_INFINITY, f64::max);
    writeln!(log, "max accepted k: {kmax}").ok();

    output::write_file(out_dir, "branch.csv", &output::branch_csv(&branch))?;
    output::write_file(out_dir, "solutions.csv", &output::solutions_csv(&branch))?;
    output::write_file(out_dir, "branch.svg", &output::branch_svg(&branch))?;
    output::write_file(out_dir, "verify.log", &log)?;
    println!(
        "homotopy: {} points, termination {}, max k {kmax:.4}, artifacts in {}",
        branch.points.len(),
        output::termination_name(branch.termination),
        out_dir.display()
    );
    Ok(())
}
