//! Principal weighted eigenpair of the minimal extremal operator and the
//! proportionality (simplicity) check.

use crate::calculus::GridFunction;
use crate::dirichlet::solve_dirichlet;
use crate::error::{Error, Result};
use crate::mesh::Grid;
use crate::operators::{apply_f, OperatorKind, OperatorSpec};
use crate::real::{real, Real};
use std::sync::Arc;

/// Principal eigenpair: (L^- + lambda1 c)[phi1] = 0, phi1 > 0 inside, zero on
/// the boundary, normalized to unit max.
#[derive(Debug, Clone)]
pub struct EigenPair<T> {
    pub lambda1: T,
    pub phi1: GridFunction<T>,
    pub residual: T,
}

/// Nonlinear inverse power iteration: repeatedly solve -L^-[psi] = c phi and
/// renormalize; the eigenvalue estimate is the max-ratio of consecutive
/// iterates.
pub fn principal_eigenpair<T: Real>(
    op: &OperatorSpec<T>,
    c: &GridFunction<T>,
    grid: &Arc<Grid<T>>,
    tol: T,
) -> Result<EigenPair<T>> {
    if op.kind() != OperatorKind::PucciMinus && op.kind() != OperatorKind::Linear {
        return Err(Error::Validation(
            "principal eigenpair expects the minimal extremal form".into(),
        ));
    }
    let mut positive = false;
    for &i in grid.interior() {
        let v = c.get(i);
        if v < T::zero() {
            return Err(Error::Precondition(format!(
                "weight c must be nonnegative, got {v} at node {i}"
            )));
        }
        if v > T::zero() {
            positive = true;
        }
    }
    if !positive {
        return Err(Error::Precondition("weight c vanishes identically".into()));
    }

    // positive seed shaped by the distance to the boundary
    let mut phi = GridFunction::zeros(grid.clone());
    for &i in grid.interior() {
        phi.set(i, grid.distance_to_boundary(i));
    }
    let norm = phi.interior_max_norm();
    phi = phi.map(|v| v / norm);

    // inner solves cannot beat the rounding floor of the residual evaluation,
    // which scales like eps / h^2
    let hmin = grid.spacing()[0];
    let floor = real::<T>(50.0 * f64::EPSILON) / (hmin * hmin);
    let inner_tol = (tol * real::<T>(1e-2)).max(floor);
    let mut history: Vec<T> = Vec::new();
    for _iter in 0..400 {
        let f = phi.zip_with(c, |p, w| p * w);
        let rep = solve_dirichlet(op, &f, grid, inner_tol)?;
        if !rep.converged {
            return Err(Error::Solver(format!(
                "inverse-iteration Dirichlet solve stalled at residual {}",
                rep.residual_norm
            )));
        }
        let psi = rep.solution;
        let peak = psi.interior_max_norm();
        if !(peak > T::zero()) {
            return Err(Error::Solver("inverse iteration collapsed to zero".into()));
        }
        let lambda = T::one() / peak;
        history.push(lambda);
        phi = psi.map(|v| v / peak);
        // residual of the eigen equation with the same discrete operator
        let lphi = apply_f(op, &phi);
        let mut res = T::zero();
        for &i in grid.interior() {
            res = res.max((lphi.get(i) + lambda * c.get(i) * phi.get(i)).abs());
        }
        if res <= tol {
            for &i in grid.interior() {
                if !(phi.get(i) > T::zero()) {
                    return Err(Error::Solver(format!(
                        "eigenfunction not strictly positive at node {i}"
                    )));
                }
            }
            return Ok(EigenPair {
                lambda1: lambda,
                phi1: phi,
                residual: res,
            });
        }
    }
    let tail: Vec<String> = history
        .iter()
        .rev()
        .take(6)
        .map(|v| format!("{v:.6e}"))
        .collect();
    Err(Error::Solver(format!(
        "inverse power iteration did not reach tol={tol}; Rayleigh history tail: {}",
        tail.join(", ")
    )))
}

/// Outcome of the proportionality check between an eigen-type supersolution
/// and subsolution pair.
#[derive(Debug, Clone, Copy)]
pub struct ProportionalityReport<T> {
    pub t: T,
    pub deviation: T,
}

/// Verifies the sub/supersolution sign gates of the eigen system and returns
/// the best positive scaling t with its uniform deviation ||u - t v||.
pub fn simplicity_check<T: Real>(
    op: &OperatorSpec<T>,
    u: &GridFunction<T>,
    v: &GridFunction<T>,
    c: &GridFunction<T>,
    grid: &Arc<Grid<T>>,
    tol: T,
) -> Result<ProportionalityReport<T>> {
    let gate = tol.max(real::<T>(1e-10));
    let lu = apply_f(op, u);
    let lv = apply_f(op, v);
    let mut v_positive_somewhere = false;
    for &i in grid.interior() {
        if lu.get(i) + c.get(i) * u.get(i) > gate {
            return Err(Error::Precondition(format!(
                "u fails the supersolution system at node {i}"
            )));
        }
        if !(u.get(i) > T::zero()) {
            return Err(Error::Precondition(format!(
                "u must be positive inside, node {i}"
            )));
        }
        if lv.get(i) + c.get(i) * v.get(i) < -gate {
            return Err(Error::Precondition(format!(
                "v fails the subsolution system at node {i}"
            )));
        }
        if v.get(i) > T::zero() {
            v_positive_somewhere = true;
        }
    }
    for &b in grid.boundary() {
        if v.get(b) > gate {
            return Err(Error::Precondition(format!(
                "v must be nonpositive on the boundary, node {b}"
            )));
        }
    }
    if !v_positive_somewhere {
        return Err(Error::Precondition(
            "v must be positive somewhere inside".into(),
        ));
    }
    // golden-section on the convex map t -> ||u - t v||_inf
    let deviation = |t: T| -> T {
        let mut d = T::zero();
        for &i in grid.interior() {
            d = d.max((u.get(i) - t * v.get(i)).abs());
        }
        d
    };
    let mut lo = T::zero();
    let mut hi = {
        let mut m = T::zero();
        for &i in grid.interior() {
            if v.get(i) > real::<T>(1e-14) {
                m = m.max(u.get(i) / v.get(i));
            }
        }
        m * real::<T>(2.0) + T::one()
    };
    let golden = real::<T>(0.618_033_988_749_894_9);
    for _ in 0..200 {
        let d = hi - lo;
        let a = hi - golden * d;
        let b = lo + golden * d;
        if deviation(a) <= deviation(b) {
            hi = b;
        } else {
            lo = a;
        }
        if hi - lo < real::<T>(1e-14) * (T::one() + hi.abs()) {
            break;
        }
    }
    let t = (lo + hi) / real::<T>(2.0);
    Ok(ProportionalityReport {
        t,
        deviation: deviation(t),
    })
}
