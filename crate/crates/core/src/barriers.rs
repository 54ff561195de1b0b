//! Radial power barriers for the strong maximum principle with logarithmic
//! absorption, and the discrete SMP/Hopf classifications.

use crate::calculus::{ExtremalSide, GridFunction};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::mesh::Grid;
use crate::operators::{extremal_l, pucci_minus, Ellipticity};
use crate::real::{real, Real};
use std::sync::Arc;

/// Coefficient bundle for the annulus barrier construction: the operator
/// M^-(D^2 v) - gamma |Dv| - d v must dominate the absorption a v |ln v|.
#[derive(Debug, Clone, Copy)]
pub struct BarrierProblem<T> {
    /// outer radius of the annulus [R/2, R]
    pub radius: T,
    pub ellipticity: Ellipticity<T>,
    /// drift bound
    pub gamma: T,
    /// zero-order bound
    pub d: T,
    /// absorption coefficient of a s |ln s|
    pub a: T,
    /// barrier value on the inner sphere; clamped below 1/e
    pub mu: T,
    /// max of the absorption on [0, 1]
    pub m0: T,
    /// space dimension
    pub dim: usize,
}

/// s |ln s| is increasing exactly on (0, 1/e)
fn log_cap<T: Real>() -> T {
    real::<T>(1.0 / std::f64::consts::E)
}

/// continuous extension of the absorption with f(0) = 0
pub fn log_absorption<T: Real>(a: T, s: T) -> T {
    if s <= T::zero() {
        T::zero()
    } else {
        a * s * s.ln().abs()
    }
}

/// max of a s |ln s| over [0, 1], attained at s = 1/e
pub fn log_absorption_max<T: Real>(a: T) -> T {
    a / real::<T>(std::f64::consts::E)
}

/// Smallest integer exponent alpha >= 2 making the radial barrier a strict
/// subsolution: (1/R^2) { alpha [lo (alpha+1) - (n-1) hi - 2 gamma R] - d R^2 }
/// must exceed C0 alpha with
/// C0 = a (|ln mu| + 2 |ln R| + |ln 2| + |ln(R/2)|) + m0.
///
/// The Hessian eigenvalue phi'/r of the decreasing barrier is negative, so
/// the minimal Pucci operator weighs it by -hi, and r >= R/2 bounds 1/r by
/// 2/R in the drift term; both signs are what the pointwise margin check
/// below actually needs.
pub fn vazquez_alpha<T: Real>(pr: &BarrierProblem<T>) -> Result<u32> {
    if !(pr.radius > T::zero()) {
        return Err(Error::Domain("barrier radius must be positive".into()));
    }
    let mu = clamp_mu(pr.mu)?;
    let r = pr.radius;
    let c0 = pr.a
        * (mu.ln().abs()
            + real::<T>(2.0) * r.ln().abs()
            + real::<T>(std::f64::consts::LN_2)
            + (r / real::<T>(2.0)).ln().abs())
        + pr.m0;
    let lo = pr.ellipticity.lo;
    let hi = pr.ellipticity.hi;
    let n1 = real::<T>((pr.dim - 1) as f64);
    let two = real::<T>(2.0);
    let mut alpha = 2u32;
    while alpha <= 1_000_000 {
        let af = real::<T>(alpha as f64);
        let lhs = (af * (lo * (af + T::one()) - n1 * hi - two * pr.gamma * r) - pr.d * r * r)
            / (r * r);
        if lhs > c0 * af {
            return Ok(alpha);
        }
        alpha += 1;
    }
    Err(Error::Infeasible(
        "no admissible barrier exponent below 1e6".into(),
    ))
}

/// The built barrier v(r) = eps (r^{-alpha} - R^{-alpha}) on [R/2, R].
#[derive(Debug, Clone, Copy)]
pub struct Barrier<T> {
    pub problem: BarrierProblem<T>,
    pub alpha: u32,
    pub eps: T,
}

fn clamp_mu<T: Real>(mu: T) -> Result<T> {
    if !(mu > T::zero() && mu < T::one()) {
        return Err(Error::Domain(format!(
            "barrier inner value must sit in (0, 1), got {mu}"
        )));
    }
    let cap = log_cap::<T>() * real::<T>(1.0 - 1e-9);
    Ok(mu.min(cap))
}

pub fn build_barrier<T: Real>(pr: &BarrierProblem<T>) -> Result<Barrier<T>> {
    let alpha = vazquez_alpha(pr)?;
    let mu = clamp_mu(pr.mu)?;
    let r = pr.radius;
    let af = real::<T>(alpha as f64);
    let eps = mu / ((r / real::<T>(2.0)).powf(-af) - r.powf(-af));
    let mut problem = *pr;
    problem.mu = mu;
    Ok(Barrier {
        problem,
        alpha,
        eps,
    })
}

impl<T: Real> Barrier<T> {
    pub fn value(&self, r: T) -> T {
        let af = real::<T>(self.alpha as f64);
        self.eps * (r.powf(-af) - self.problem.radius.powf(-af))
    }

    pub fn phi_prime(&self, r: T) -> T {
        let af = real::<T>(self.alpha as f64);
        -af * self.eps * r.powf(-af - T::one())
    }

    pub fn phi_second(&self, r: T) -> T {
        let af = real::<T>(self.alpha as f64);
        af * (af + T::one()) * self.eps * r.powf(-af - real::<T>(2.0))
    }

    /// M^-(D^2 v) - gamma |Dv| - d v at radius r, through the radial spectrum.
    pub fn operator_value(&self, r: T) -> Result<T> {
        let spec = crate::calculus::radial_hessian_spectrum(
            self.phi_prime(r),
            self.phi_second(r),
            r,
            self.problem.dim,
        )?;
        let m = SymMatrix::diagonal(&spec);
        Ok(pucci_minus(&m, &self.problem.ellipticity)
            - self.problem.gamma * self.phi_prime(r).abs()
            - self.problem.d * self.value(r))
    }

    /// Strict subsolution margin: operator value minus absorption; positive on
    /// the whole annulus for an admissible exponent.
    pub fn subsolution_margin(&self, r: T) -> Result<T> {
        Ok(self.operator_value(r)? - log_absorption(self.problem.a, self.value(r)))
    }

    /// Margins sampled on `nodes` radii across the annulus (at least 8).
    pub fn annulus_margins(&self, nodes: usize) -> Result<Vec<(T, T)>> {
        if nodes < 8 {
            return Err(Error::Config(format!(
                "annulus needs at least 8 sample nodes, got {nodes}"
            )));
        }
        let r = self.problem.radius;
        let half = r / real::<T>(2.0);
        let step = (r - half) / real::<T>((nodes - 1) as f64);
        (0..nodes)
            .map(|k| {
                let rk = half + step * real::<T>(k as f64);
                Ok((rk, self.subsolution_margin(rk)?))
            })
            .collect()
    }

    /// Barrier values masked onto a planar grid around a center.
    pub fn on_grid(&self, grid: &Arc<Grid<T>>, center: [T; 2]) -> GridFunction<T> {
        let r_out = self.problem.radius;
        let r_in = r_out / real::<T>(2.0);
        GridFunction::from_fn(grid.clone(), |x, y| {
            let dx = x - center[0];
            let dy = y - center[1];
            let r = (dx * dx + dy * dy).sqrt();
            if r >= r_out {
                T::zero()
            } else if r <= r_in {
                self.problem.mu
            } else {
                self.value(r)
            }
        })
    }
}

/// Classification of a nonnegative supersolution by the strong maximum
/// principle: identically zero or strictly positive; anything else flags a
/// defect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmpClass {
    IdenticallyZero,
    StrictlyPositive,
    Violation { node: usize },
}

/// Coefficients of the absorption operator used by the SMP gate.
#[derive(Debug, Clone, Copy)]
pub struct SmpOperator<T> {
    pub ellipticity: Ellipticity<T>,
    pub gamma: T,
    pub d: T,
    pub a: T,
}

/// Gates that u is a nonnegative discrete supersolution of
/// M^-(D^2 u) - gamma |Du| - d u <= a u |ln u| and classifies it.
pub fn smp_classify<T: Real>(
    u: &GridFunction<T>,
    op: &SmpOperator<T>,
    grid: &Arc<Grid<T>>,
    tol: T,
) -> Result<SmpClass> {
    for &i in grid.interior().iter().chain(grid.boundary()) {
        if u.get(i) < -tol {
            return Err(Error::Precondition(format!(
                "u must be nonnegative, found {} at node {i}",
                u.get(i)
            )));
        }
    }
    let b = GridFunction::constant(grid.clone(), op.gamma);
    let lm = extremal_l(u, ExtremalSide::Minus, &op.ellipticity, Some(&b));
    for &i in grid.interior() {
        let lhs = lm.get(i) - op.d * u.get(i);
        let rhs = log_absorption(op.a, u.get(i));
        if lhs > rhs + tol {
            return Err(Error::Precondition(format!(
                "u fails the supersolution gate at node {i}: {lhs} > {rhs}"
            )));
        }
    }
    let max_u = u.interior_max_norm();
    if max_u <= real::<T>(10.0) * tol {
        return Ok(SmpClass::IdenticallyZero);
    }
    for &i in grid.interior() {
        if u.get(i) <= tol {
            return Ok(SmpClass::Violation { node: i });
        }
    }
    Ok(SmpClass::StrictlyPositive)
}

/// Minimum inward difference quotient over the boundary for a nonnegative u
/// vanishing there.
pub fn hopf_margin<T: Real>(u: &GridFunction<T>, grid: &Arc<Grid<T>>) -> T {
    let mut margin = T::infinity();
    for &b in grid.boundary() {
        if let Some((nb, step)) = grid.inward_neighbor(b) {
            margin = margin.min((u.get(nb) - u.get(b)) / step);
        }
    }
    margin
}
