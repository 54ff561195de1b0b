//! Exponential changes of variable and the exact semilinear reduction.
//!
//! The v-change u -> (e^{mu}-1)/m and w-change u -> (1-e^{-mu})/m absorb the
//! quadratic gradient term; the extremal operators of the transformed
//! variables are sandwiched between shifted extremal operators of u.

use crate::calculus::{gradient_centered, hessian_centered, ExtremalSide, GridFunction};
use crate::error::{Error, Result};
use crate::operators::{pucci_minus, pucci_plus, Ellipticity, OperatorKind, ProblemSpec};
use crate::real::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeDirection {
    /// v = (e^{mu} - 1)/m, increasing and convex in u
    VChange,
    /// w = (1 - e^{-mu})/m, increasing with range (-inf, 1/m)
    WChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpChange<T> {
    pub m: T,
    pub direction: ChangeDirection,
}

/// |m u| beyond this saturates e^{mu} in double precision.
const OVERFLOW_GUARD: f64 = 700.0;

impl<T: Real> ExpChange<T> {
    pub fn v_change(m: T) -> Result<Self> {
        if !(m > T::zero()) {
            return Err(Error::Validation(format!("exponential change needs m > 0, got {m}")));
        }
        Ok(ExpChange {
            m,
            direction: ChangeDirection::VChange,
        })
    }

    pub fn w_change(m: T) -> Result<Self> {
        if !(m > T::zero()) {
            return Err(Error::Validation(format!("exponential change needs m > 0, got {m}")));
        }
        Ok(ExpChange {
            m,
            direction: ChangeDirection::WChange,
        })
    }

    /// Canonical slow rate mu1 / hi used by the lower-bound arguments.
    pub fn rate_lower(mu1: T, e: &Ellipticity<T>) -> T {
        mu1 / e.hi
    }

    /// Canonical fast rate mu2 / lo used by the comparison arguments.
    pub fn rate_upper(mu2: T, e: &Ellipticity<T>) -> T {
        mu2 / e.lo
    }
}

/// Pointwise forward transform; rejects inputs that would overflow.
pub fn forward<T: Real>(u: &GridFunction<T>, change: &ExpChange<T>) -> Result<GridFunction<T>> {
    let m = change.m;
    let guard = real::<T>(OVERFLOW_GUARD);
    let mut out = GridFunction::zeros(u.grid().clone());
    for idx in 0..u.values().len() {
        let mu = m * u.get(idx);
        if mu.abs() > guard {
            return Err(Error::Overflow {
                node: idx,
                magnitude: mu.abs().to_f64().unwrap_or(f64::INFINITY),
            });
        }
        let v = match change.direction {
            ChangeDirection::VChange => (mu.exp() - T::one()) / m,
            ChangeDirection::WChange => (T::one() - (-mu).exp()) / m,
        };
        out.set(idx, v);
    }
    Ok(out)
}

/// Analytic inverse; errors name the first node outside the admissible range.
pub fn inverse<T: Real>(t: &GridFunction<T>, change: &ExpChange<T>) -> Result<GridFunction<T>> {
    let m = change.m;
    let mut out = GridFunction::zeros(t.grid().clone());
    for idx in 0..t.values().len() {
        let ti = t.get(idx);
        let u = match change.direction {
            ChangeDirection::VChange => {
                let arg = T::one() + m * ti;
                if !(arg > T::zero()) {
                    return Err(Error::Domain(format!(
                        "inverse v-change needs 1 + m t > 0; violated at node {idx} (t = {ti})"
                    )));
                }
                arg.ln() / m
            }
            ChangeDirection::WChange => {
                let arg = T::one() - m * ti;
                if !(arg > T::zero()) {
                    return Err(Error::Domain(format!(
                        "inverse w-change needs 1 - m t > 0; violated at node {idx} (t = {ti})"
                    )));
                }
                -arg.ln() / m
            }
        };
        out.set(idx, u);
    }
    Ok(out)
}

/// Worst pointwise violation of the two-sided extremal-operator sandwich.
#[derive(Debug, Clone, Copy)]
pub struct SandwichReport<T> {
    pub max_violation: T,
    pub worst_node: usize,
}

/// Checks, at every interior node and for both extremal operators, that the
/// transformed Hessian term sits between the shifted operators of u.
pub fn sandwich_check<T: Real>(
    u: &GridFunction<T>,
    change: &ExpChange<T>,
    e: &Ellipticity<T>,
) -> Result<SandwichReport<T>> {
    let grid = u.grid().clone();
    let m = change.m;
    let t = forward(u, change)?;
    let hess_u = hessian_centered(u);
    let hess_t = hessian_centered(&t);
    let grad_u = gradient_centered(u);
    let mut report = SandwichReport {
        max_violation: T::zero(),
        worst_node: *grid.interior().first().expect("interior nonempty"),
    };
    for &i in grid.interior() {
        let g2 = {
            let g = grad_u[i];
            g[0] * g[0] + g[1] * g[1]
        };
        let denom = match change.direction {
            ChangeDirection::VChange => T::one() + m * t.get(i),
            ChangeDirection::WChange => T::one() - m * t.get(i),
        };
        for side in [ExtremalSide::Plus, ExtremalSide::Minus] {
            let pucci = |x: &crate::linalg::SymMatrix<T>| match side {
                ExtremalSide::Plus => pucci_plus(x, e),
                ExtremalSide::Minus => pucci_minus(x, e),
            };
            let base = pucci(&hess_u[i]);
            let mid = pucci(&hess_t[i]) / denom;
            let (lower, upper) = match change.direction {
                ChangeDirection::VChange => (base + m * e.lo * g2, base + m * e.hi * g2),
                ChangeDirection::WChange => (base - m * e.hi * g2, base - m * e.lo * g2),
            };
            let violation = (lower - mid).max(mid - upper).max(T::zero());
            if violation > report.max_violation {
                report.max_violation = violation;
                report.worst_node = i;
            }
        }
    }
    Ok(report)
}

/// Exact reduction of the quadratic-growth problem to a semilinear one:
/// alpha Dv + (drift) + (lambda/m) c (1+mv) ln(1+mv) + h (1+mv) = 0.
#[derive(Debug, Clone)]
pub struct SemilinearReduction<T> {
    /// diffusion scale of the reduced Laplacian
    pub diffusion: T,
    /// rate of the eliminated exponential change
    pub m: T,
    /// drift bound field for Pucci kinds (term +/- b |Dv|)
    pub drift_bound: Option<GridFunction<T>>,
    /// side of the |Dv| term when the operator is extremal
    pub drift_side: Option<ExtremalSide>,
    /// per-node drift vector for linear operators (term beta . Dv)
    pub drift_vec: Option<Vec<[T; 2]>>,
    pub c: GridFunction<T>,
    pub h: GridFunction<T>,
    pub lambda: T,
}

impl<T: Real> SemilinearReduction<T> {
    /// Zero-order part of the reduced equation at one node.
    pub fn rhs_at(&self, idx: usize, v: T) -> T {
        let m = self.m;
        let arg = T::one() + m * v;
        self.lambda / m * self.c.get(idx) * arg * arg.ln() + self.h.get(idx) * arg
    }

    /// d/dv of `rhs_at`, used by Newton on the reduced problem.
    pub fn rhs_derivative_at(&self, idx: usize, v: T) -> T {
        let m = self.m;
        let arg = T::one() + m * v;
        self.lambda * self.c.get(idx) * (arg.ln() + T::one()) + self.h.get(idx) * m
    }

    /// Maps a solution of the reduced problem back to u.
    pub fn invert(&self, v: &GridFunction<T>) -> Result<GridFunction<T>> {
        inverse(v, &ExpChange::v_change(self.m)?)
    }
}

/// Builds the exact reduction when M = mu I is constant and the operator is a
/// constant-coefficient isotropic linear operator or an extremal operator with
/// collapsed ellipticity.
pub fn semilinear_reduction<T: Real>(p: &ProblemSpec<T>) -> Result<SemilinearReduction<T>> {
    let mu = p.matrix.constant_scalar().ok_or_else(|| {
        Error::UnsupportedReduction("matrix field must be a constant scalar multiple of I".into())
    })?;
    let e = p.op.ellipticity();
    let dim = p.grid.dim();
    match p.op.kind() {
        OperatorKind::Linear => {
            let member = &p.op.groups()[0][0];
            let a0 = member.coef_at(p.grid.interior()[0]).clone();
            // isotropy: a = alpha I at every node
            let alpha = a0.get(0, 0);
            for &i in p.grid.interior() {
                let a = member.coef_at(i);
                for r in 0..dim {
                    for c in 0..dim {
                        let want = if r == c { alpha } else { T::zero() };
                        if (a.get(r, c) - want).abs() > real::<T>(1e-13) {
                            return Err(Error::UnsupportedReduction(
                                "linear coefficient must be a constant isotropic matrix".into(),
                            ));
                        }
                    }
                }
            }
            if member.zeta_at(p.grid.interior()[0]) != T::zero() {
                return Err(Error::UnsupportedReduction(
                    "zero-order member terms are not reduced".into(),
                ));
            }
            let drift_vec = p
                .grid
                .interior()
                .iter()
                .map(|&i| member.drift_at(i).unwrap_or([T::zero(); 2]))
                .collect::<Vec<_>>();
            let any_drift = drift_vec
                .iter()
                .any(|d| d[0] != T::zero() || d[1] != T::zero());
            let full_drift = if any_drift {
                let mut all = vec![[T::zero(); 2]; p.grid.node_count()];
                for (k, &i) in p.grid.interior().iter().enumerate() {
                    all[i] = drift_vec[k];
                }
                Some(all)
            } else {
                None
            };
            Ok(SemilinearReduction {
                diffusion: alpha,
                m: mu / alpha,
                drift_bound: None,
                drift_side: None,
                drift_vec: full_drift,
                c: p.c.clone(),
                h: p.h.clone(),
                lambda: p.lambda,
            })
        }
        OperatorKind::PucciPlus | OperatorKind::PucciMinus => {
            if e.lo != e.hi {
                return Err(Error::UnsupportedReduction(
                    "extremal operator reduces exactly only when lo = hi".into(),
                ));
            }
            let side = if p.op.kind() == OperatorKind::PucciPlus {
                ExtremalSide::Plus
            } else {
                ExtremalSide::Minus
            };
            Ok(SemilinearReduction {
                diffusion: e.lo,
                m: mu / e.lo,
                drift_bound: p.op.drift_bound().cloned(),
                drift_side: Some(side),
                drift_vec: None,
                c: p.c.clone(),
                h: p.h.clone(),
                lambda: p.lambda,
            })
        }
        _ => Err(Error::UnsupportedReduction(
            "only linear and extremal operators admit the exact reduction".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_grid;
    use crate::operators::{MatrixField, OperatorSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<crate::mesh::Grid<f64>> {
        Arc::new(build_interval_grid(0.0, 1.0, n).unwrap())
    }

    #[test]
    fn forward_fixed_points_and_values() {
        let g = grid(8);
        let zero = GridFunction::zeros(g.clone());
        for change in [
            ExpChange::v_change(1.0).unwrap(),
            ExpChange::w_change(0.5).unwrap(),
        ] {
            let t = forward(&zero, &change).unwrap();
            assert_eq!(t.max_norm(), 0.0);
        }
        let u = GridFunction::constant(g.clone(), std::f64::consts::LN_2);
        let v = forward(&u, &ExpChange::v_change(1.0).unwrap()).unwrap();
        for &i in g.interior() {
            assert!((v.get(i) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn forward_guards_overflow() {
        let g = grid(8);
        let u = GridFunction::constant(g.clone(), 800.0);
        match forward(&u, &ExpChange::v_change(1.0).unwrap()) {
            Err(Error::Overflow { .. }) => {}
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn derivative_identity_dv_eq_one_plus_mv_du() {
        let g = grid(64);
        let pi = std::f64::consts::PI;
        let u = GridFunction::from_fn(g.clone(), |x, _| 0.7 * (pi * x).sin() + 0.2 * x);
        let change = ExpChange::v_change(0.8).unwrap();
        let v = forward(&u, &change).unwrap();
        let du = gradient_centered(&u);
        let dv = gradient_centered(&v);
        let h = g.spacing()[0];
        for &i in g.interior() {
            let expected = (1.0 + change.m * v.get(i)) * du[i][0];
            assert!(
                (dv[i][0] - expected).abs() < 10.0 * h * h,
                "node {i}: {} vs {expected}",
                dv[i][0]
            );
        }
    }

    #[test]
    fn inverse_round_trip_on_random_fields() {
        let g = grid(32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..50 {
            let amp: f64 = rng.gen_range(0.1..2.0);
            let freq: f64 = rng.gen_range(1.0..4.0);
            let u = GridFunction::from_fn(g.clone(), |x, _| amp * (freq * x).sin());
            let change = if k % 2 == 0 {
                ExpChange::v_change(rng.gen_range(0.2..2.0)).unwrap()
            } else {
                ExpChange::w_change(rng.gen_range(0.2..2.0)).unwrap()
            };
            let t = forward(&u, &change).unwrap();
            let back = inverse(&t, &change).unwrap();
            let err = back
                .zip_with(&u, |a, b| (a - b).abs())
                .max_norm();
            assert!(err < 1e-12, "round trip error {err}");
        }
    }

    #[test]
    fn inverse_rejects_range_boundary() {
        let g = grid(8);
        let change = ExpChange::w_change(2.0).unwrap();
        // t = 1/m exactly at one node
        let mut t = GridFunction::zeros(g.clone());
        t.set(3, 0.5);
        match inverse(&t, &change) {
            Err(Error::Domain(msg)) => assert!(msg.contains("node 3"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn sandwich_zero_for_constants() {
        let g = grid(16);
        let u = GridFunction::constant(g.clone(), 0.4);
        let e = Ellipticity::new(1.0, 2.0).unwrap();
        let r = sandwich_check(&u, &ExpChange::v_change(1.0).unwrap(), &e).unwrap();
        assert!(r.max_violation < 1e-13);
    }

    #[test]
    fn sandwich_violation_decays_second_order() {
        let pi = std::f64::consts::PI;
        let e = Ellipticity::new(1.0, 2.0).unwrap();
        let change = ExpChange::v_change(1.0).unwrap();
        let viol: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&n| {
                let g = grid(n);
                let u = GridFunction::from_fn(g, |x, _| (pi * x).sin());
                sandwich_check(&u, &change, &e).unwrap().max_violation
            })
            .collect();
        if viol[0] < 1e-13 {
            return; // nothing to measure
        }
        let order = (viol[0] / viol[2]).log2() / 2.0;
        assert!(order > 1.8, "violation order {order}, values {viol:?}");
    }

    #[test]
    fn sandwich_collapses_for_isotropic_ellipticity() {
        let pi = std::f64::consts::PI;
        let g = grid(64);
        let u = GridFunction::from_fn(g.clone(), |x, _| 0.5 * (pi * x).sin());
        let e = Ellipticity::new(1.5, 1.5).unwrap();
        let change = ExpChange::w_change(0.7).unwrap();
        let m = change.m;
        let w = forward(&u, &change).unwrap();
        let hess_u = hessian_centered(&u);
        let hess_w = hessian_centered(&w);
        let grad = gradient_centered(&u);
        let h = g.spacing()[0];
        for &i in g.interior() {
            let g2 = grad[i][0] * grad[i][0];
            let mid = pucci_plus(&hess_w[i], &e) / (1.0 - m * w.get(i));
            let bound = pucci_plus(&hess_u[i], &e) - m * 1.5 * g2;
            assert!((mid - bound).abs() < 40.0 * h * h, "{} vs {bound}", mid);
        }
    }

    #[test]
    fn forward_preserves_order_and_sign_sets() {
        let g = grid(24);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(0.0..1.0);
            let u = GridFunction::from_fn(g.clone(), |x, _| a * (3.0 * x).sin());
            let bigger = u.map(|v| v + b);
            let change = ExpChange::w_change(1.3).unwrap();
            let tu = forward(&u, &change).unwrap();
            let tb = forward(&bigger, &change).unwrap();
            for i in 0..tu.values().len() {
                assert!(tu.get(i) <= tb.get(i) + 1e-15);
                assert_eq!(u.get(i) > 0.0, tu.get(i) > 0.0);
                assert_eq!(u.get(i) == 0.0, tu.get(i) == 0.0);
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use std::sync::Arc;

        proptest! {
            #[test]
            fn round_trip_and_order_preserved(
                amp in 0.05f64..2.0,
                freq in 0.5f64..5.0,
                shift in 0.0f64..1.0,
                m in 0.1f64..2.0,
                w_side in proptest::bool::ANY,
            ) {
                let g = Arc::new(crate::mesh::build_interval_grid(0.0f64, 1.0, 16).unwrap());
                let u = GridFunction::from_fn(g.clone(), |x, _| amp * (freq * x).sin());
                let bigger = u.map(|v| v + shift);
                let change = if w_side {
                    ExpChange::w_change(m).unwrap()
                } else {
                    ExpChange::v_change(m).unwrap()
                };
                let tu = forward(&u, &change).unwrap();
                let tb = forward(&bigger, &change).unwrap();
                for i in 0..tu.values().len() {
                    prop_assert!(tu.get(i) <= tb.get(i) + 1e-14);
                    prop_assert_eq!(u.get(i) > 0.0, tu.get(i) > 0.0);
                }
                let back = inverse(&tu, &change).unwrap();
                let err = back.zip_with(&u, |a, b| (a - b).abs()).max_norm();
                prop_assert!(err < 1e-11, "round trip error {}", err);
            }
        }
    }

    #[test]
    fn reduction_requires_constant_scalar_matrix() {
        let g = grid(12);
        let nodes = g.node_count();
        let p = ProblemSpec::new(
            g.clone(),
            OperatorSpec::laplacian(1, nodes),
            MatrixField::scalar_field(vec![1.0; nodes], 0.5, 1.5).unwrap(),
            GridFunction::constant(g.clone(), 1.0),
            GridFunction::zeros(g.clone()),
            1.0,
        )
        .unwrap();
        match semilinear_reduction(&p) {
            Err(Error::UnsupportedReduction(_)) => {}
            other => panic!("expected unsupported reduction, got {other:?}"),
        }
    }

    #[test]
    fn reduction_rhs_values() {
        let g = grid(12);
        let p = ProblemSpec::new(
            g.clone(),
            OperatorSpec::laplacian(1, g.node_count()),
            MatrixField::scalar(1.0).unwrap(),
            GridFunction::constant(g.clone(), 1.0),
            GridFunction::zeros(g.clone()),
            1.0,
        )
        .unwrap();
        let red = semilinear_reduction(&p).unwrap();
        assert!((red.m - 1.0).abs() < 1e-15);
        // at 1 + m v = e with lambda = m = c = 1 the c-term contributes e
        let v = std::f64::consts::E - 1.0;
        assert!((red.rhs_at(1, v) - std::f64::consts::E).abs() < 1e-12);
        // lambda = 0, h = 0 means the reduced right-hand side vanishes at v = 0
        let mut p0 = p.clone();
        p0.lambda = 0.0;
        let red0 = semilinear_reduction(&p0).unwrap();
        assert_eq!(red0.rhs_at(1, 0.0), 0.0);
    }
}
