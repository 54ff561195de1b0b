//! Numerical verification of the uniform a priori bounds, the ABP margin
//! check and the transformed lower-bound problem.

use crate::calculus::{gradient_centered, ExtremalSide, GridFunction};
use crate::continuation::Branch;
use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::operators::{extremal_l, OperatorSpec, ProblemSpec};
use crate::real::{real, Real};
use std::sync::Arc;

/// Empirical supremum of a norm over a parameter window, at two resolutions.
#[derive(Debug, Clone)]
pub struct BoundReport<T> {
    pub window: (T, T),
    pub sup_coarse: T,
    pub sup_fine: T,
    /// |coarse - fine| / max(fine, eps)
    pub stability_ratio: T,
    /// (parameter, norm) table from the coarse branch
    pub table: Vec<(T, T)>,
    /// false when the branch does not cover the requested window
    pub window_covered: bool,
}

fn window_sup<T: Real>(
    branch: &Branch<T>,
    window: (T, T),
    norm: impl Fn(&GridFunction<T>) -> T,
) -> (T, Vec<(T, T)>, bool) {
    let mut sup = T::zero();
    let mut table = Vec::new();
    let mut lo_seen = T::infinity();
    let mut hi_seen = T::neg_infinity();
    for pt in &branch.points {
        lo_seen = lo_seen.min(pt.parameter);
        hi_seen = hi_seen.max(pt.parameter);
        if pt.parameter >= window.0 && pt.parameter <= window.1 {
            let v = norm(&pt.solution);
            sup = sup.max(v);
            table.push((pt.parameter, v));
        }
    }
    let eps = real::<T>(1e-9);
    let covered = lo_seen <= window.0 + eps && hi_seen >= window.1 - eps;
    (sup, table, covered)
}

fn stability<T: Real>(a: T, b: T) -> T {
    (a - b).abs() / b.max(real(1e-14))
}

/// sup of ||u^-|| over accepted branch points with parameter in [0, Lambda2],
/// compared across a refinement pair.
pub fn verify_lower_bound<T: Real>(
    coarse: &Branch<T>,
    fine: &Branch<T>,
    lambda2: T,
) -> Result<BoundReport<T>> {
    if !(lambda2 > T::zero()) {
        return Err(Error::Config("Lambda2 must be positive".into()));
    }
    let window = (T::zero(), lambda2);
    let neg = |u: &GridFunction<T>| u.negative_part().max_norm();
    let (sc, table, cov_c) = window_sup(coarse, window, neg);
    let (sf, _, cov_f) = window_sup(fine, window, neg);
    Ok(BoundReport {
        window,
        sup_coarse: sc,
        sup_fine: sf,
        stability_ratio: stability(sc, sf),
        table,
        window_covered: cov_c && cov_f,
    })
}

/// sup of ||u|| over accepted branch points with parameter in
/// [Lambda1, Lambda2], compared across a refinement pair.
pub fn verify_upper_bound<T: Real>(
    coarse: &Branch<T>,
    fine: &Branch<T>,
    lambda1: T,
    lambda2: T,
) -> Result<BoundReport<T>> {
    if !(T::zero() < lambda1 && lambda1 <= lambda2) {
        return Err(Error::Config("need 0 < Lambda1 <= Lambda2".into()));
    }
    let window = (lambda1, lambda2);
    let full = |u: &GridFunction<T>| u.max_norm();
    let (sc, table, cov_c) = window_sup(coarse, window, full);
    let (sf, _, cov_f) = window_sup(fine, window, full);
    Ok(BoundReport {
        window,
        sup_coarse: sc,
        sup_fine: sf,
        stability_ratio: stability(sc, sf),
        table,
        window_covered: cov_c && cov_f,
    })
}

/// Margin data of the maximum-principle estimate for a subsolution of
/// L+[u] + mu |Du|^2 >= f.
#[derive(Debug, Clone)]
pub struct AbpReport<T> {
    /// max over interior minus max over boundary
    pub margin: T,
    /// discrete L^p norm of f^- with p = 2 dim + 1
    pub f_minus_norm: T,
    /// margin exceeded constant * norm
    pub flagged: bool,
}

/// Checks the subsolution gate and reports the interior-vs-boundary max
/// margin against the norm of the negative forcing.
pub fn abp_check<T: Real>(
    u: &GridFunction<T>,
    f: &GridFunction<T>,
    op: &OperatorSpec<T>,
    mu: T,
    grid: &Arc<Grid<T>>,
    constant: T,
    tol: T,
) -> Result<AbpReport<T>> {
    // gate: L+[u] + mu |Du|^2 >= f - tol on interior
    let lp = extremal_l(u, ExtremalSide::Plus, op.ellipticity(), op.drift_bound());
    let grad = gradient_centered(u);
    for &i in grid.interior() {
        let g2 = grad[i][0] * grad[i][0] + grad[i][1] * grad[i][1];
        let lhs = lp.get(i) + mu * g2;
        if lhs < f.get(i) - tol {
            return Err(Error::Precondition(format!(
                "u fails the subsolution gate at node {i}: {lhs} < {}",
                f.get(i)
            )));
        }
    }
    let mut max_int = T::neg_infinity();
    for &i in grid.interior() {
        max_int = max_int.max(u.get(i));
    }
    let mut max_bdry = T::neg_infinity();
    for &b in grid.boundary() {
        max_bdry = max_bdry.max(u.get(b));
    }
    let margin = max_int - max_bdry;
    let p = real::<T>((2 * grid.dim() + 1) as f64);
    let f_minus_norm = f.negative_part().lp_norm(p);
    Ok(AbpReport {
        margin,
        f_minus_norm,
        flagged: margin > constant * f_minus_norm + tol,
    })
}

/// Residual data of the transformed lower-bound problem.
#[derive(Debug, Clone)]
pub struct QLambdaReport<T> {
    /// w = (1 - e^{-m u^-}) / m
    pub w: GridFunction<T>,
    /// inequality residual; expected nonpositive up to discretization
    pub residual: GridFunction<T>,
    pub max_residual: T,
    /// nodes where w reached 1/m within 1e-12 (blow-up indicator)
    pub saturated: Vec<usize>,
}

/// Transforms the negative part of a supersolution and evaluates the residual
/// of the coercive inequality it must satisfy.
pub fn q_lambda_residual<T: Real>(u: &GridFunction<T>, p: &ProblemSpec<T>) -> Result<QLambdaReport<T>> {
    let grid = &p.grid;
    let m = p.matrix.mu1() / p.op.ellipticity().hi;
    let neg = u.negative_part();
    let w = neg.map(|v| (T::one() - (-m * v).exp()) / m);
    let cap = T::one() / m;
    let mut saturated = Vec::new();
    for &i in grid.interior() {
        let wi = w.get(i);
        if wi < -real::<T>(1e-14) || wi > cap {
            return Err(Error::Domain(format!(
                "transformed variable escaped [0, 1/m) at node {i}: {wi}"
            )));
        }
        if cap - wi < real::<T>(1e-12) {
            saturated.push(i);
        }
    }
    let h_minus = p.h.negative_part();
    // L1+[w] = L+[w] - m h^- w
    let lw = extremal_l(&w, ExtremalSide::Plus, p.op.ellipticity(), p.op.drift_bound());
    let mut residual = GridFunction::zeros(grid.clone());
    let mut max_res = T::neg_infinity();
    for &i in grid.interior() {
        let l1 = lw.get(i) - m * h_minus.get(i) * w.get(i);
        let arg = T::one() - m * w.get(i);
        let forcing = h_minus.get(i)
            + p.lambda / m * p.c.get(i) * arg.ln().abs() * arg;
        let r = -l1 - forcing;
        residual.set(i, r);
        max_res = max_res.max(r);
    }
    Ok(QLambdaReport {
        w,
        residual,
        max_residual: max_res,
        saturated,
    })
}
