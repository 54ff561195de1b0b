//! Pseudo-arclength continuation of the solution branch in lambda, fold
//! detection, the k-homotopy on the augmented problem and its weight.

use crate::assemble::{assemble, Indexing, Rhs};
use crate::calculus::GridFunction;
use crate::dirichlet::SolveReport;
use crate::eigen::EigenPair;
use crate::error::{Error, Result};
use crate::fixedpoint::{solve_full, solve_full_with_extra};
use crate::operators::{residual_p, ProblemSpec};
use crate::real::{max_abs, real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Lambda,
    K,
}

impl ParamKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParamKind::Lambda => "lambda",
            ParamKind::K => "k",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BranchPoint<T> {
    pub parameter: T,
    pub solution: GridFunction<T>,
    pub sup_norm: T,
    pub max_u: T,
    pub min_u: T,
    pub probe_value: T,
    pub arclength: T,
    /// sign of the parameter component of the incoming tangent
    pub tangent_sign: i8,
    pub residual: T,
    /// largest residual-term magnitude at this point; eps * scale bounds the
    /// achievable residual from below
    pub residual_scale: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    RangeExhausted,
    NormCap,
    StepFailure,
    MaxPoints,
}

#[derive(Debug, Clone, Copy)]
pub struct Fold<T> {
    pub parameter: T,
    pub bracket: (T, T),
    /// index of the accepted point nearest the fold
    pub index: usize,
}

#[derive(Debug, Clone)]
pub struct Branch<T> {
    pub parameter_kind: ParamKind,
    pub points: Vec<BranchPoint<T>>,
    pub folds: Vec<Fold<T>>,
    pub termination: TerminationReason,
}

#[derive(Debug, Clone, Copy)]
pub struct TraceCaps<T> {
    pub tol: T,
    pub ds_min: T,
    pub ds_max: T,
    pub norm_cap: T,
    pub max_points: usize,
    /// probe node for the recorded point values; domain centroid by default
    pub probe: Option<usize>,
}

impl<T: Real> Default for TraceCaps<T> {
    fn default() -> Self {
        TraceCaps {
            tol: real(1e-10),
            ds_min: real(1e-7),
            ds_max: real(0.5),
            norm_cap: real(1e3),
            max_points: 4000,
            probe: None,
        }
    }
}

enum FamilyKind<'a, T> {
    Lambda,
    K { ctilde: &'a GridFunction<T> },
}

struct Family<'a, T: Real> {
    base: &'a ProblemSpec<T>,
    kind: FamilyKind<'a, T>,
}

impl<'a, T: Real> Family<'a, T> {
    fn param_kind(&self) -> ParamKind {
        match self.kind {
            FamilyKind::Lambda => ParamKind::Lambda,
            FamilyKind::K { .. } => ParamKind::K,
        }
    }

    fn problem_at(&self, t: T) -> (ProblemSpec<T>, Option<GridFunction<T>>) {
        match &self.kind {
            FamilyKind::Lambda => (self.base.with_lambda(t), None),
            FamilyKind::K { ctilde } => {
                let extra = (*ctilde).map(|v| v * t);
                (self.base.clone(), Some(extra))
            }
        }
    }

    /// derivative of the interior residual with respect to the parameter
    fn dres_dparam(&self, u: &GridFunction<T>) -> Vec<T> {
        match &self.kind {
            FamilyKind::Lambda => self
                .base
                .grid
                .interior()
                .iter()
                .map(|&i| self.base.c.get(i) * u.get(i))
                .collect(),
            FamilyKind::K { ctilde } => self
                .base
                .grid
                .interior()
                .iter()
                .map(|&i| ctilde.get(i))
                .collect(),
        }
    }

    fn solve_at(&self, t: T, seed: &GridFunction<T>, tol: T) -> SolveReport<T> {
        let (p, extra) = self.problem_at(t);
        match extra {
            Some(x) => solve_full_with_extra(&p, &x, seed, tol),
            None => solve_full(&p, seed, tol),
        }
    }

    fn residual_norm(&self, u: &GridFunction<T>, t: T) -> (T, T) {
        let (p, extra) = self.problem_at(t);
        let mut r = residual_p(u, &p);
        let mut scale = crate::operators::residual_scale(u, &p);
        if let Some(x) = extra {
            for &i in p.grid.interior() {
                r.set(i, r.get(i) + x.get(i));
                scale = scale.max(x.get(i).abs());
            }
        }
        (r.interior_max_norm(), scale)
    }
}

/// scaled inner product on (delta_u, delta_t): mean-square in u plus the
/// parameter component, keeping the arclength grid-size independent
fn dot_scaled<T: Real>(du: &[T], dt: T, eu: &[T], et: T) -> T {
    let n = real::<T>(du.len() as f64);
    let s: T = du.iter().zip(eu).map(|(&a, &b)| a * b).sum();
    s / n + dt * et
}

struct Corrected<T> {
    u: GridFunction<T>,
    t: T,
    iterations: usize,
}

/// bordered Newton on [residual; arclength constraint]
fn correct<T: Real>(
    family: &Family<'_, T>,
    indexing: &Indexing<T>,
    u_pred: &GridFunction<T>,
    t_pred: T,
    tau_u: &[T],
    tau_t: T,
    anchor_u: &GridFunction<T>,
    anchor_t: T,
    ds: T,
    tol: T,
) -> Option<Corrected<T>> {
    let grid = &family.base.grid;
    let interior = grid.interior();
    let mut u = u_pred.clone();
    let mut t = t_pred;
    for iter in 0..15 {
        let (p, extra) = family.problem_at(t);
        let rhs = Rhs::Full {
            problem: &p,
            extra: extra.as_ref(),
        };
        let asm = assemble(indexing, &p.op, &u, &rhs);
        let rnorm = max_abs(&asm.residual);
        if !rnorm.is_finite() {
            return None;
        }
        let target = tol.max(real::<T>(32.0 * f64::EPSILON) * asm.scale);
        // arclength constraint value
        let du: Vec<T> = interior
            .iter()
            .map(|&i| u.get(i) - anchor_u.get(i))
            .collect();
        let cs = dot_scaled(&du, t - anchor_t, tau_u, tau_t) - ds;
        if rnorm <= target && cs.abs() <= target.max(real(1e-12)) * (T::one() + ds.abs()) {
            return Some(Corrected {
                u,
                t,
                iterations: iter,
            });
        }
        let jac = asm.jacobian.clone();
        let lu = jac.clone().factor().ok()?;
        let dparam = family.dres_dparam(&u);
        // block elimination for [J g; tau] [du; dt] = -[res; cs], followed by
        // iterative refinement: the frozen Jacobian is nearly singular along
        // flat stretches of the branch and plain elimination loses digits
        let mut du = vec![T::zero(); interior.len()];
        let mut dt = T::zero();
        let mut r1: Vec<T> = asm.residual.iter().map(|&r| -r).collect();
        let mut r2 = -cs;
        for _refine in 0..3 {
            let a = lu.solve(&r1);
            let neg_dp: Vec<T> = dparam.iter().map(|&v| -v).collect();
            let b = lu.solve(&neg_dp);
            let denom = tau_t + dot_scaled(&b, T::zero(), tau_u, T::zero());
            if denom.abs() < real(1e-14) {
                return None;
            }
            let ddt = (r2 - dot_scaled(&a, T::zero(), tau_u, T::zero())) / denom;
            let dd: Vec<T> = a.iter().zip(&b).map(|(&x, &y)| x + ddt * y).collect();
            for (k, v) in dd.iter().enumerate() {
                du[k] = du[k] + *v;
            }
            dt = dt + ddt;
            // bordered residual for the refinement pass
            let jdu = jac.matvec(&du);
            for (k, v) in r1.iter_mut().enumerate() {
                *v = -asm.residual[k] - jdu[k] - dparam[k] * dt;
            }
            r2 = -cs - dot_scaled(&du, T::zero(), tau_u, T::zero()) - tau_t * dt;
        }
        for (k, &i) in interior.iter().enumerate() {
            u.set(i, u.get(i) + du[k]);
        }
        t = t + dt;
        if !t.is_finite() || u.interior_max_norm() > real(1e8) {
            return None;
        }
    }
    None
}

fn make_point<T: Real>(
    family: &Family<'_, T>,
    u: GridFunction<T>,
    t: T,
    arclength: T,
    tangent_sign: i8,
    probe: usize,
) -> BranchPoint<T> {
    // independent residual pass over the accepted solution
    let (residual, residual_scale) = family.residual_norm(&u, t);
    BranchPoint {
        parameter: t,
        sup_norm: u.max_norm(),
        max_u: u.max_value(),
        min_u: u.min_value(),
        probe_value: u.get(probe),
        arclength,
        tangent_sign,
        residual,
        residual_scale,
        solution: u,
    }
}

fn trace<T: Real>(
    family: &Family<'_, T>,
    range: (T, T),
    ds0: T,
    caps: &TraceCaps<T>,
    initial: &GridFunction<T>,
) -> Result<Branch<T>> {
    let grid = family.base.grid.clone();
    let indexing = Indexing::new(grid.clone());
    let probe = caps.probe.unwrap_or_else(|| grid.centroid_node());
    let (t_start, t_end) = range;
    let dir = if t_end >= t_start { T::one() } else { -T::one() };
    let interior = grid.interior();

    let start = family.solve_at(t_start, initial, caps.tol);
    if !start.converged {
        return Err(Error::Solver(format!(
            "no converged solution at the range start (residual {})",
            start.residual_norm
        )));
    }
    let mut points = vec![make_point(
        family,
        start.solution,
        t_start,
        T::zero(),
        dir.to_f64().map(|v| if v >= 0.0 { 1 } else { -1 }).unwrap_or(1),
        probe,
    )];

    // first step: natural continuation
    let mut ds = ds0;
    loop {
        let t1 = t_start + dir * ds;
        let rep = family.solve_at(t1, &points[0].solution, caps.tol);
        if rep.converged {
            let du: Vec<T> = interior
                .iter()
                .map(|&i| rep.solution.get(i) - points[0].solution.get(i))
                .collect();
            let s1 = dot_scaled(&du, t1 - t_start, &du, t1 - t_start).sqrt();
            points.push(make_point(
                family,
                rep.solution,
                t1,
                s1,
                if dir > T::zero() { 1 } else { -1 },
                probe,
            ));
            break;
        }
        ds = ds / real(2.0);
        if ds < caps.ds_min {
            return Ok(Branch {
                parameter_kind: family.param_kind(),
                points,
                folds: Vec::new(),
                termination: TerminationReason::StepFailure,
            });
        }
    }

    let mut folds: Vec<Fold<T>> = Vec::new();
    let termination;
    'outer: loop {
        if points.len() >= caps.max_points {
            termination = TerminationReason::MaxPoints;
            break;
        }
        let k = points.len() - 1;
        let (prev, last) = (&points[k - 1], &points[k]);
        // secant tangent in the scaled metric
        let mut tau_u: Vec<T> = interior
            .iter()
            .map(|&i| last.solution.get(i) - prev.solution.get(i))
            .collect();
        let mut tau_t = last.parameter - prev.parameter;
        let norm = dot_scaled(&tau_u, tau_t, &tau_u, tau_t).sqrt();
        if !(norm > T::zero()) {
            termination = TerminationReason::StepFailure;
            break;
        }
        for v in &mut tau_u {
            *v = *v / norm;
        }
        tau_t = tau_t / norm;

        let mut accepted: Option<(Corrected<T>, T)> = None;
        let mut step = ds;
        while step >= caps.ds_min {
            // predictor
            let mut u_pred = last.solution.clone();
            for (j, &i) in interior.iter().enumerate() {
                u_pred.set(i, u_pred.get(i) + step * tau_u[j]);
            }
            let t_pred = last.parameter + step * tau_t;
            if let Some(c) = correct(
                family,
                &indexing,
                &u_pred,
                t_pred,
                &tau_u,
                tau_t,
                &last.solution,
                last.parameter,
                step,
                caps.tol,
            ) {
                accepted = Some((c, step));
                break;
            }
            step = step / real(2.0);
        }
        let Some((cor, used)) = accepted else {
            termination = TerminationReason::StepFailure;
            break;
        };

        // range clamp: land exactly on the boundary parameter, then stop
        let lo = t_start.min(t_end);
        let hi = t_start.max(t_end);
        if cor.t > hi || cor.t < lo {
            let t_edge = if cor.t > hi { hi } else { lo };
            let rep = family.solve_at(t_edge, &points[k].solution, caps.tol);
            if rep.converged {
                let sign = if t_edge >= points[k].parameter { 1 } else { -1 };
                let s = points[k].arclength + used;
                points.push(make_point(family, rep.solution, t_edge, s, sign, probe));
            }
            termination = TerminationReason::RangeExhausted;
            break 'outer;
        }

        let s = points[k].arclength + used;
        let sign = if cor.t > points[k].parameter {
            1
        } else if cor.t < points[k].parameter {
            -1
        } else {
            points[k].tangent_sign
        };
        points.push(make_point(family, cor.u, cor.t, s, sign, probe));
        let idx = points.len() - 1;

        // fold bookkeeping from the last three points
        if points[idx].tangent_sign != points[idx - 1].tangent_sign {
            if let Some(f) = fold_from_triple(&points[idx - 2..=idx], idx - 1) {
                folds.push(f);
            }
        }

        if points[idx].sup_norm > caps.norm_cap {
            termination = TerminationReason::NormCap;
            break;
        }

        // step adaptation
        if cor.iterations <= 4 {
            ds = (used * real(1.4)).min(caps.ds_max);
        } else if cor.iterations >= 9 {
            ds = (used * real(0.6)).max(caps.ds_min);
        } else {
            ds = used;
        }
    }

    Ok(Branch {
        parameter_kind: family.param_kind(),
        points,
        folds,
        termination,
    })
}

/// quadratic fit of parameter against arclength through three points
fn fold_from_triple<T: Real>(pts: &[BranchPoint<T>], center_index: usize) -> Option<Fold<T>> {
    if pts.len() != 3 {
        return None;
    }
    let (s0, s1, s2) = (pts[0].arclength, pts[1].arclength, pts[2].arclength);
    let (t0, t1, t2) = (pts[0].parameter, pts[1].parameter, pts[2].parameter);
    // Lagrange second-difference coefficients
    let d01 = (t1 - t0) / (s1 - s0);
    let d12 = (t2 - t1) / (s2 - s1);
    let curv = (d12 - d01) / (s2 - s0);
    if curv == T::zero() {
        return None;
    }
    // vertex of t(s)
    let sv = (s0 + s1) / real::<T>(2.0) - d01 / (real::<T>(2.0) * curv);
    let tv = t0 + d01 * (sv - s0) + curv * (sv - s0) * (sv - s1);
    // the best sampled parameter on the fold side
    let ext = if curv < T::zero() {
        t0.max(t1).max(t2)
    } else {
        t0.min(t1).min(t2)
    };
    let gap = (tv - ext).abs();
    let bracket = if curv < T::zero() {
        (ext, tv + gap)
    } else {
        (tv - gap, ext)
    };
    Some(Fold {
        parameter: tv,
        bracket,
        index: center_index,
    })
}

/// Traces the solution branch of the lambda-family over a parameter range.
/// `initial` must solve the problem at `range.0` (it is polished first).
pub fn trace_branch<T: Real>(
    p0: &ProblemSpec<T>,
    range: (T, T),
    ds: T,
    caps: &TraceCaps<T>,
    initial: &GridFunction<T>,
) -> Result<Branch<T>> {
    if !(ds > T::zero()) {
        return Err(Error::Config("arclength step must be positive".into()));
    }
    let family = Family {
        base: p0,
        kind: FamilyKind::Lambda,
    };
    trace(&family, range, ds, caps, initial)
}

/// Branch in the homotopy weight k of the auxiliary problem with forcing
/// h + k ctilde, at fixed lambda.
pub fn homotopy_in_k<T: Real>(
    p: &ProblemSpec<T>,
    ctilde: &GridFunction<T>,
    k_range: (T, T),
    ds: T,
    caps: &TraceCaps<T>,
    initial: &GridFunction<T>,
) -> Result<Branch<T>> {
    if k_range.0 < T::zero() || k_range.1 > T::one() || k_range.0 > k_range.1 {
        return Err(Error::Config(
            "homotopy range must sit inside [0, 1]".into(),
        ));
    }
    if !(p.lambda > T::zero()) {
        return Err(Error::Config("homotopy requires lambda > 0".into()));
    }
    let family = Family {
        base: p,
        kind: FamilyKind::K { ctilde },
    };
    trace(&family, k_range, ds, caps, initial)
}

/// Newton polish of the lambda-family at one parameter value.
pub fn solve_at_lambda<T: Real>(
    p: &ProblemSpec<T>,
    lambda: T,
    seed: &GridFunction<T>,
    tol: T,
) -> SolveReport<T> {
    solve_full(&p.with_lambda(lambda), seed, tol)
}

/// Newton polish of the k-family at one homotopy weight.
pub fn solve_at_k<T: Real>(
    p: &ProblemSpec<T>,
    ctilde: &GridFunction<T>,
    k: T,
    seed: &GridFunction<T>,
    tol: T,
) -> SolveReport<T> {
    let extra = ctilde.map(|v| v * k);
    solve_full_with_extra(p, &extra, seed, tol)
}

#[derive(Debug, Clone)]
pub enum FoldDetection<T> {
    Present(Vec<Fold<T>>),
    Absent,
}

/// Re-derives fold estimates from the accepted points of a branch.
pub fn detect_fold<T: Real>(branch: &Branch<T>) -> FoldDetection<T> {
    let pts = &branch.points;
    let mut folds = Vec::new();
    for i in 2..pts.len() {
        let prev = pts[i - 1].parameter - pts[i - 2].parameter;
        let next = pts[i].parameter - pts[i - 1].parameter;
        if prev * next < T::zero() {
            if let Some(f) = fold_from_triple(&pts[i - 2..=i], i - 1) {
                folds.push(f);
            }
        }
    }
    if folds.is_empty() {
        FoldDetection::Absent
    } else {
        FoldDetection::Present(folds)
    }
}

/// The homotopy weight of the auxiliary problem:
/// ctilde = (lambda1/m) c + h^- + Lambda2 C0 c.
pub fn build_ctilde<T: Real>(
    c: &GridFunction<T>,
    h: &GridFunction<T>,
    lambda2: T,
    c0: T,
    eigen: &EigenPair<T>,
    m: T,
) -> Result<GridFunction<T>> {
    if !(lambda2 > T::zero()) {
        return Err(Error::Config("Lambda2 must be positive".into()));
    }
    if c0 < T::zero() {
        return Err(Error::Config("C0 must be nonnegative".into()));
    }
    if !(m > T::zero()) {
        return Err(Error::Config("m must be positive".into()));
    }
    let a = eigen.lambda1 / m;
    Ok(c.zip_with(h, |cv, hv| {
        a * cv + (-hv).max(T::zero()) + lambda2 * c0 * cv
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_grid;
    use crate::operators::{MatrixField, OperatorSpec};
    use std::sync::Arc;

    fn synthetic_branch(lambda_bar: f64) -> Branch<f64> {
        let g = Arc::new(build_interval_grid(0.0, 1.0, 4).unwrap());
        let mut points = Vec::new();
        let n = 21;
        for k in 0..n {
            let s = -1.0 + 2.0 * (k as f64) / ((n - 1) as f64);
            let t = lambda_bar - s * s;
            points.push(BranchPoint {
                parameter: t,
                solution: GridFunction::zeros(g.clone()),
                sup_norm: 0.0,
                max_u: 0.0,
                min_u: 0.0,
                probe_value: 0.0,
                arclength: k as f64,
                tangent_sign: if s < 0.0 { 1 } else { -1 },
                residual: 0.0,
                residual_scale: 1.0,
            });
        }
        Branch {
            parameter_kind: ParamKind::Lambda,
            points,
            folds: Vec::new(),
            termination: TerminationReason::RangeExhausted,
        }
    }

    #[test]
    fn detect_fold_on_synthetic_parabola() {
        let branch = synthetic_branch(0.75);
        match detect_fold(&branch) {
            FoldDetection::Present(folds) => {
                assert_eq!(folds.len(), 1);
                let f = folds[0];
                assert!(
                    (f.parameter - 0.75).abs() <= (f.bracket.1 - f.bracket.0).abs() + 1e-12,
                    "estimate {} bracket {:?}",
                    f.parameter,
                    f.bracket
                );
                assert!((f.parameter - 0.75).abs() < 1e-10);
            }
            FoldDetection::Absent => panic!("fold not detected"),
        }
    }

    #[test]
    fn detect_fold_absent_on_monotone_branch() {
        let g = Arc::new(build_interval_grid(0.0, 1.0, 4).unwrap());
        let mut points = Vec::new();
        for k in 0..10 {
            points.push(BranchPoint {
                parameter: k as f64 * 0.1,
                solution: GridFunction::zeros(g.clone()),
                sup_norm: 0.0,
                max_u: 0.0,
                min_u: 0.0,
                probe_value: 0.0,
                arclength: k as f64,
                tangent_sign: 1,
                residual: 0.0,
                residual_scale: 1.0,
            });
        }
        let branch = Branch {
            parameter_kind: ParamKind::Lambda,
            points,
            folds: Vec::new(),
            termination: TerminationReason::RangeExhausted,
        };
        assert!(matches!(detect_fold(&branch), FoldDetection::Absent));
    }

    #[test]
    fn coercive_window_traces_without_folds() {
        let g = Arc::new(build_interval_grid(0.0f64, 1.0, 48).unwrap());
        let p = ProblemSpec::new(
            g.clone(),
            OperatorSpec::laplacian(1, g.node_count()),
            MatrixField::scalar(1.0).unwrap(),
            GridFunction::constant(g.clone(), 1.0),
            GridFunction::constant(g.clone(), 1.0),
            -1.0,
        )
        .unwrap();
        let caps = TraceCaps {
            tol: 1e-10,
            ..TraceCaps::default()
        };
        let u_start = solve_full(&p, &GridFunction::zeros(g.clone()), 1e-10).solution;
        let branch = trace_branch(&p, (-1.0, -0.1), 0.05, &caps, &u_start).unwrap();
        assert_eq!(branch.termination, TerminationReason::RangeExhausted);
        assert!(matches!(detect_fold(&branch), FoldDetection::Absent));
        // every accepted point satisfies the residual tolerance
        for pt in &branch.points {
            assert!(pt.residual <= 1e-9, "residual {}", pt.residual);
        }
        // multi-seed agreement at an intermediate parameter: uniqueness proxy
        let target = -0.5;
        let near = branch
            .points
            .iter()
            .min_by(|a, b| {
                (a.parameter - target)
                    .abs()
                    .partial_cmp(&(b.parameter - target).abs())
                    .unwrap()
            })
            .unwrap();
        let polished = solve_at_lambda(&p, target, &near.solution, 1e-11);
        assert!(polished.converged);
        let from_zero = solve_at_lambda(&p, target, &GridFunction::zeros(g.clone()), 1e-11);
        assert!(from_zero.converged);
        let gap = polished
            .solution
            .zip_with(&from_zero.solution, |a, b| (a - b).abs())
            .max_norm();
        assert!(gap < 1e-8, "distinct solutions in the coercive window: {gap}");
    }

    #[test]
    fn build_ctilde_formula() {
        let g = Arc::new(build_interval_grid(0.0f64, 1.0, 8).unwrap());
        let c = GridFunction::constant(g.clone(), 1.0);
        let h = GridFunction::zeros(g.clone());
        let eigen = EigenPair {
            lambda1: 2.0,
            phi1: GridFunction::zeros(g.clone()),
            residual: 0.0,
        };
        // lambda1/m = 2, Lambda2 C0 = 3
        let ct = build_ctilde(&c, &h, 1.5, 2.0, &eigen, 1.0).unwrap();
        for &i in g.interior() {
            assert!((ct.get(i) - 5.0).abs() < 1e-14);
        }
        // c = 0 region keeps only h^-
        let c2 = GridFunction::from_fn(g.clone(), |x, _| if x < 0.5 { 0.0 } else { 1.0 });
        let h2 = GridFunction::constant(g.clone(), -0.25);
        let ct2 = build_ctilde(&c2, &h2, 1.0, 0.0, &eigen, 1.0).unwrap();
        for &i in g.interior() {
            let x = g.coords(i)[0];
            let expected = if x < 0.5 { 0.25 } else { 2.0 + 0.25 };
            assert!((ct2.get(i) - expected).abs() < 1e-14);
        }
        for v in ct2.values() {
            assert!(*v >= 0.0);
        }
    }
}
