//! Independent reference paths: the explicit radial solution family, discrete
//! manufactured forcings, and a standalone semilinear cross-solver with its
//! own discretization and an amplitude-parameterized fold locator.

use crate::calculus::{ExtremalSide, GridFunction};
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::mesh::{build_interval_grid, Grid, GridShape};
use crate::operators::{apply_f, ProblemSpec};
use crate::real::{max_abs, real, Real};
use crate::transforms::SemilinearReduction;
use std::sync::Arc;

/// The explicit radial family u_k(x) = ln((|x|^{2-n} - k)/(1-k)) on the unit
/// ball, vanishing on |x| = 1.
pub fn radial_family<T: Real>(k: T, n: usize, x: &[T]) -> Result<T> {
    if n <= 2 {
        return Err(Error::Domain("radial family needs dimension n > 2".into()));
    }
    if !(k >= T::zero() && k < T::one()) {
        return Err(Error::Domain(format!("k must lie in [0, 1), got {k}")));
    }
    let rho = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if rho == T::zero() {
        return Err(Error::Domain("radial family is singular at the origin".into()));
    }
    if rho > T::one() + real::<T>(1e-12) {
        return Err(Error::Domain(format!("point with |x| = {rho} outside the unit ball")));
    }
    let power = rho.powf(real::<T>(2.0 - n as f64));
    Ok(((power - k) / (T::one() - k)).ln())
}

/// Max discrete residual of the Laplacian-plus-squared-gradient identity for
/// the radial family, on a 1D radial grid over [r_lo, r_hi].
pub fn radial_family_residual<T: Real>(
    k: T,
    n: usize,
    r_lo: T,
    r_hi: T,
    nodes: usize,
) -> Result<T> {
    let grid = Arc::new(build_interval_grid(r_lo, r_hi, nodes)?);
    let mut u = GridFunction::zeros(grid.clone());
    for idx in 0..grid.node_count() {
        let r = grid.coords(idx)[0];
        u.set(idx, radial_family(k, n, &[r])?);
    }
    let h = grid.spacing()[0];
    let n1 = real::<T>((n - 1) as f64);
    let mut worst = T::zero();
    for &i in grid.interior() {
        let r = grid.coords(i)[0];
        let up = u.get(i + 1);
        let um = u.get(i - 1);
        let u0 = u.get(i);
        let second = (up - u0 - u0 + um) / (h * h);
        let first = (up - um) / (h + h);
        let laplacian = second + n1 / r * first;
        worst = worst.max((laplacian + first * first).abs());
    }
    Ok(worst)
}

/// Discrete manufactured forcing: h := -(F_h[u*] + lambda c u* + <M Du*, Du*>)
/// so the full residual of u* vanishes identically on the interior.
pub fn manufactured<T: Real>(u_exact: &GridFunction<T>, p: &ProblemSpec<T>) -> GridFunction<T> {
    let grid = &p.grid;
    let fu = apply_f(&p.op, u_exact);
    let mut h = GridFunction::zeros(grid.clone());
    for &i in grid.interior() {
        let g = crate::calculus::quadratic_gradient(u_exact, i, p.quad_scheme);
        let quad = p.matrix.quadratic_form(i, g, grid.dim());
        h.set(
            i,
            -(fu.get(i) + p.lambda * p.c.get(i) * u_exact.get(i) + quad),
        );
    }
    h
}

/// piecewise-linear sampling of a 1D grid function at an arbitrary abscissa
fn interp1d<T: Real>(gf: &GridFunction<T>, x: T) -> T {
    let grid = gf.grid();
    let (a, b) = match grid.shape() {
        GridShape::Interval { a, b } => (a, b),
        _ => unreachable!("semilinear oracle runs on interval grids"),
    };
    let h = grid.spacing()[0];
    let n = grid.subdivisions();
    let pos = ((x - a) / h).max(T::zero());
    let cell = pos
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(n - 1);
    let x0 = a + h * real::<T>(cell as f64);
    let w = ((x - x0) / h).max(T::zero()).min(T::one());
    let _ = b;
    gf.get(cell) * (T::one() - w) + gf.get(cell + 1) * w
}

/// Standalone discretization of the reduced semilinear problem on its own
/// (finer) grid: centered differences and damped Newton, independent of the
/// primary operator kernels.
struct FineProblem<T> {
    grid: Arc<Grid<T>>,
    c: Vec<T>,
    h: Vec<T>,
    drift: Vec<T>,
    drift_bound: Vec<T>,
    drift_side: Option<ExtremalSide>,
    diffusion: T,
    m: T,
}

impl<T: Real> FineProblem<T> {
    fn build(red: &SemilinearReduction<T>, fine: &Arc<Grid<T>>) -> Result<Self> {
        if fine.dim() != 1 {
            return Err(Error::UnsupportedReduction(
                "the semilinear oracle is one-dimensional".into(),
            ));
        }
        let nodes = fine.node_count();
        let mut c = Vec::with_capacity(nodes);
        let mut h = Vec::with_capacity(nodes);
        let mut drift = vec![T::zero(); nodes];
        let mut drift_bound = vec![T::zero(); nodes];
        for idx in 0..nodes {
            let x = fine.coords(idx)[0];
            c.push(interp1d(&red.c, x));
            h.push(interp1d(&red.h, x));
            if let Some(b) = &red.drift_bound {
                drift_bound[idx] = interp1d(b, x);
            }
        }
        if let Some(dv) = &red.drift_vec {
            // sample the x-component of the coarse drift onto the fine grid
            let coarse = red.c.grid().clone();
            let mut coarse_drift = GridFunction::zeros(coarse);
            for (i, d) in dv.iter().enumerate() {
                coarse_drift.set(i, d[0]);
            }
            for idx in 0..nodes {
                drift[idx] = interp1d(&coarse_drift, fine.coords(idx)[0]);
            }
        }
        Ok(FineProblem {
            grid: fine.clone(),
            c,
            h,
            drift,
            drift_bound,
            drift_side: red.drift_side,
            diffusion: red.diffusion,
            m: red.m,
        })
    }

    fn zero_order(&self, idx: usize, v: T, lambda: T) -> T {
        let arg = T::one() + self.m * v;
        lambda / self.m * self.c[idx] * arg * arg.ln() + self.h[idx] * arg
    }

    fn zero_order_dv(&self, idx: usize, v: T, lambda: T) -> T {
        let arg = T::one() + self.m * v;
        lambda * self.c[idx] * (arg.ln() + T::one()) + self.h[idx] * self.m
    }

    fn zero_order_dlambda(&self, idx: usize, v: T) -> T {
        let arg = T::one() + self.m * v;
        self.c[idx] / self.m * arg * arg.ln()
    }

    fn residual(&self, v: &[T], lambda: T) -> Vec<T> {
        let grid = &self.grid;
        let h = grid.spacing()[0];
        grid.interior()
            .iter()
            .map(|&i| {
                let second = (v[i + 1] - v[i] - v[i] + v[i - 1]) / (h * h);
                let first = (v[i + 1] - v[i - 1]) / (h + h);
                let mut r = self.diffusion * second + self.drift[i] * first
                    + self.zero_order(i, v[i], lambda);
                if let Some(side) = self.drift_side {
                    let sgn = match side {
                        ExtremalSide::Plus => T::one(),
                        ExtremalSide::Minus => -T::one(),
                    };
                    r = r + sgn * self.drift_bound[i] * first.abs();
                }
                r
            })
            .collect()
    }

    fn jacobian(&self, v: &[T], lambda: T) -> BandMatrix<T> {
        let grid = &self.grid;
        let h = grid.spacing()[0];
        let interior = grid.interior();
        let n = interior.len();
        let mut jac = BandMatrix::zeros(n, 1, 1);
        let inv_h2 = T::one() / (h * h);
        let inv_2h = T::one() / (h + h);
        for (row, &i) in interior.iter().enumerate() {
            let first = (v[i + 1] - v[i - 1]) * inv_2h;
            let mut off = self.drift[i] * inv_2h;
            if let Some(side) = self.drift_side {
                let sgn = match side {
                    ExtremalSide::Plus => T::one(),
                    ExtremalSide::Minus => -T::one(),
                };
                let slope_sign = if first >= T::zero() { T::one() } else { -T::one() };
                off = off + sgn * self.drift_bound[i] * slope_sign * inv_2h;
            }
            if row > 0 {
                jac.add_to(row, row - 1, self.diffusion * inv_h2 - off);
            }
            if row + 1 < n {
                jac.add_to(row, row + 1, self.diffusion * inv_h2 + off);
            }
            jac.add_to(
                row,
                row,
                -(self.diffusion + self.diffusion) * inv_h2
                    + self.zero_order_dv(i, v[i], lambda),
            );
        }
        jac
    }

    /// damped Newton keeping 1 + m v positive
    fn newton(&self, seed: &[T], lambda: T, tol: T, max_iter: usize) -> Result<Vec<T>> {
        let grid = &self.grid;
        let interior = grid.interior();
        let mut v = seed.to_vec();
        for &b in grid.boundary() {
            v[b] = T::zero();
        }
        for _ in 0..max_iter {
            let res = self.residual(&v, lambda);
            let rnorm = max_abs(&res);
            if !rnorm.is_finite() {
                return Err(Error::Solver("semilinear oracle residual overflow".into()));
            }
            if rnorm <= tol {
                return Ok(v);
            }
            let lu = self
                .jacobian(&v, lambda)
                .factor()
                .map_err(|e| Error::Solver(format!("oracle jacobian: {e}")))?;
            let neg: Vec<T> = res.iter().map(|&r| -r).collect();
            let delta = lu.solve(&neg);
            let mut step = T::one();
            let floor = real::<T>(1e-12) - T::one();
            let mut moved = false;
            while step >= real::<T>(2.0).powi(-24) {
                let mut trial = v.clone();
                for (k, &i) in interior.iter().enumerate() {
                    trial[i] = v[i] + step * delta[k];
                }
                let admissible = interior
                    .iter()
                    .all(|&i| self.m * trial[i] > floor);
                if admissible {
                    let tres = self.residual(&trial, lambda);
                    let tnorm = max_abs(&tres);
                    if tnorm.is_finite() && tnorm < rnorm {
                        v = trial;
                        moved = true;
                        break;
                    }
                }
                step = step / real::<T>(2.0);
            }
            if !moved {
                return Err(Error::Solver(
                    "semilinear oracle Newton stalled without progress".into(),
                ));
            }
        }
        Err(Error::Solver("semilinear oracle Newton budget exhausted".into()))
    }
}

/// Solves the reduced semilinear problem on the supplied (finer) grid and
/// returns the transformed variable v.
pub fn semilinear_solve<T: Real>(
    red: &SemilinearReduction<T>,
    fine: &Arc<Grid<T>>,
    tol: T,
) -> Result<GridFunction<T>> {
    let prob = FineProblem::build(red, fine)?;
    let seed = vec![T::zero(); fine.node_count()];
    let v = prob.newton(&seed, red.lambda, tol, 200)?;
    GridFunction::new(fine.clone(), v)
}

/// Fold estimate with a bracketing interval.
#[derive(Debug, Clone, Copy)]
pub struct FoldEstimate<T> {
    pub parameter: T,
    pub bracket: (T, T),
}

/// Locates the fold of the reduced problem by amplitude parameterization:
/// solve (v, lambda) with the midpoint value pinned to s, sweep s upward and
/// maximize lambda(s). Returns `None` when no interior maximum appears.
pub fn semilinear_fold<T: Real>(
    red: &SemilinearReduction<T>,
    fine: &Arc<Grid<T>>,
    tol: T,
) -> Result<Option<FoldEstimate<T>>> {
    let prob = FineProblem::build(red, fine)?;
    let mid = fine.centroid_node();
    let interior = fine.interior();
    let mid_row = interior
        .iter()
        .position(|&i| i == mid)
        .ok_or_else(|| Error::Solver("probe node is not interior".into()))?;

    // bordered Newton: residual rows plus the pin v[mid] = s, lambda free
    let solve_pinned = |seed_v: &[T], seed_lambda: T, s: T| -> Result<(Vec<T>, T)> {
        let mut v = seed_v.to_vec();
        for &b in fine.boundary() {
            v[b] = T::zero();
        }
        let mut lambda = seed_lambda;
        for _ in 0..80 {
            let res = prob.residual(&v, lambda);
            let pin = v[mid] - s;
            let rnorm = max_abs(&res).max(pin.abs());
            if rnorm <= tol {
                return Ok((v, lambda));
            }
            if !rnorm.is_finite() {
                return Err(Error::Solver("pinned solve overflow".into()));
            }
            let lu = prob
                .jacobian(&v, lambda)
                .factor()
                .map_err(|e| Error::Solver(format!("pinned jacobian: {e}")))?;
            let neg: Vec<T> = res.iter().map(|&r| -r).collect();
            let a = lu.solve(&neg);
            let dl: Vec<T> = interior
                .iter()
                .map(|&i| -prob.zero_order_dlambda(i, v[i]))
                .collect();
            let b = lu.solve(&dl);
            if b[mid_row].abs() < real::<T>(1e-14) {
                return Err(Error::Solver("pinned solve lost the border pivot".into()));
            }
            let dlambda = (-pin - a[mid_row]) / b[mid_row];
            for (k, &i) in interior.iter().enumerate() {
                v[i] = v[i] + a[k] + dlambda * b[k];
            }
            lambda = lambda + dlambda;
            if !lambda.is_finite() {
                return Err(Error::Solver("pinned solve diverged in lambda".into()));
            }
        }
        Err(Error::Solver("pinned solve budget exhausted".into()))
    };

    // start from the lambda = 0 solution
    let mut red0 = red.clone();
    red0.lambda = T::zero();
    let v0 = semilinear_solve(&red0, fine, tol)?;
    let s0 = v0.get(mid);
    if s0.abs() < real::<T>(1e-12) {
        return Err(Error::Solver("flat start: amplitude sweep undefined".into()));
    }
    let dir = if s0 > T::zero() { T::one() } else { -T::one() };

    let mut samples: Vec<(T, T)> = Vec::new(); // (s, lambda)
    let mut v_seed = v0.values().to_vec();
    let mut lam_seed = T::zero();
    let mut s = s0.abs();
    let mut stall = 0usize;
    for _ in 0..200 {
        let (v, lam) = match solve_pinned(&v_seed, lam_seed, dir * s) {
            Ok(r) => r,
            Err(_) => {
                stall += 1;
                if stall > 3 {
                    break;
                }
                s = s * real::<T>(1.05);
                continue;
            }
        };
        stall = 0;
        samples.push((s, lam));
        v_seed = v;
        lam_seed = lam;
        // stop once lambda has clearly dropped from its peak
        let peak = samples
            .iter()
            .map(|&(_, l)| l)
            .fold(T::neg_infinity(), |a, b| a.max(b));
        if samples.len() > 6 && lam < peak * real::<T>(0.6) {
            break;
        }
        if samples.len() > 6 && lam < T::zero() {
            break;
        }
        s = s * real::<T>(1.12) + real::<T>(1e-3);
    }
    if samples.len() < 5 {
        return Err(Error::Solver("amplitude sweep produced too few samples".into()));
    }
    let peak_idx = (0..samples.len())
        .max_by(|&a, &b| samples[a].1.partial_cmp(&samples[b].1).unwrap())
        .unwrap();
    if peak_idx == 0 || peak_idx + 1 == samples.len() {
        // monotone lambda(s): no interior maximum in range
        return Ok(None);
    }
    // golden refinement of lambda(s) around the peak
    let mut lo = samples[peak_idx - 1].0;
    let mut hi = samples[peak_idx + 1].0;
    let mut best = samples[peak_idx];
    let golden = real::<T>(0.618_033_988_749_894_9);
    let mut eval_seed = (v_seed.clone(), best.1);
    for _ in 0..40 {
        let d = hi - lo;
        if d.abs() < real::<T>(1e-10) * (T::one() + hi.abs()) {
            break;
        }
        let sa = hi - golden * d;
        let sb = lo + golden * d;
        let la = solve_pinned(&eval_seed.0, eval_seed.1, dir * sa);
        let lb = solve_pinned(&eval_seed.0, eval_seed.1, dir * sb);
        match (la, lb) {
            (Ok((va, la)), Ok((vb, lb))) => {
                if la >= lb {
                    hi = sb;
                    if la > best.1 {
                        best = (sa, la);
                        eval_seed = (va, la);
                    }
                } else {
                    lo = sa;
                    if lb > best.1 {
                        best = (sb, lb);
                        eval_seed = (vb, lb);
                    }
                }
            }
            _ => break,
        }
    }
    // bracket from the neighbors of the refined peak
    let flank = solve_pinned(&eval_seed.0, eval_seed.1, dir * (best.0 + (hi - lo)))
        .map(|(_, l)| l)
        .unwrap_or(best.1);
    let gap = (best.1 - flank).abs().max(real::<T>(1e-9));
    Ok(Some(FoldEstimate {
        parameter: best.1,
        bracket: (best.1 - gap, best.1 + gap),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_grid;
    use crate::operators::{MatrixField, OperatorSpec};
    use crate::transforms::semilinear_reduction;

    #[test]
    fn radial_family_reference_values() {
        assert!(radial_family(0.0f64, 3, &[1.0, 0.0, 0.0]).unwrap().abs() < 1e-14);
        let v = radial_family(0.0, 3, &[0.5, 0.0, 0.0]).unwrap();
        assert!((v - 2.0f64.ln()).abs() < 1e-14);
        assert!(radial_family(0.0, 3, &[0.0, 0.0, 0.0]).is_err());
        assert!(radial_family(0.0, 2, &[0.5]).is_err());
        assert!(radial_family(-0.1, 3, &[0.5]).is_err());
    }

    #[test]
    fn radial_family_monotonicity() {
        // decreasing in |x|, increasing in k
        let mut prev = f64::INFINITY;
        for i in 1..=10 {
            let r = 0.1 + 0.09 * i as f64;
            let v = radial_family(0.3, 3, &[r]).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let lo = radial_family(0.0, 3, &[0.5]).unwrap();
        let hi = radial_family(0.6, 3, &[0.5]).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn radial_family_residual_second_order() {
        for k in [0.0f64, 0.3, 0.6] {
            let r1 = radial_family_residual(k, 3, 0.1, 1.0, 256).unwrap();
            let r2 = radial_family_residual(k, 3, 0.1, 1.0, 512).unwrap();
            let r3 = radial_family_residual(k, 3, 0.1, 1.0, 1024).unwrap();
            let order = (r1 / r3).log2() / 2.0;
            assert!(order > 1.8, "k={k}: order {order} ({r1}, {r2}, {r3})");
        }
    }

    #[test]
    fn manufactured_forcing_matches_hand_formula() {
        let pi = std::f64::consts::PI;
        let g = Arc::new(build_interval_grid(0.0, 1.0, 128).unwrap());
        let p = ProblemSpec::new(
            g.clone(),
            OperatorSpec::laplacian(1, g.node_count()),
            MatrixField::scalar(1.0).unwrap(),
            GridFunction::constant(g.clone(), 1.0),
            GridFunction::zeros(g.clone()),
            0.0,
        )
        .unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| (pi * x).sin());
        let h = manufactured(&u, &p);
        let hcell = g.spacing()[0];
        for &i in g.interior() {
            let x = g.coords(i)[0];
            let expected = pi * pi * (pi * x).sin() - pi * pi * (pi * x).cos().powi(2);
            assert!(
                (h.get(i) - expected).abs() < 80.0 * hcell * hcell,
                "node {i}"
            );
        }
        // the discrete residual vanishes identically by construction
        let mut pm = p.clone();
        pm.h = h;
        let r = crate::operators::residual_p(&u, &pm);
        assert!(r.interior_max_norm() < 1e-12);
        // u == 0 gives h == 0
        let z = GridFunction::zeros(g.clone());
        assert_eq!(manufactured(&z, &p).max_norm(), 0.0);
    }

    #[test]
    fn semilinear_solver_trivial_case() {
        let g = Arc::new(build_interval_grid(0.0, 1.0, 32).unwrap());
        let p = ProblemSpec::new(
            g.clone(),
            OperatorSpec::laplacian(1, g.node_count()),
            MatrixField::scalar(1.0).unwrap(),
            GridFunction::constant(g.clone(), 1.0),
            GridFunction::zeros(g.clone()),
            0.0,
        )
        .unwrap();
        let red = semilinear_reduction(&p).unwrap();
        let fine = Arc::new(build_interval_grid(0.0, 1.0, 128).unwrap());
        let v = semilinear_solve(&red, &fine, 1e-12).unwrap();
        assert!(v.max_norm() < 1e-12);
        let u = red.invert(&v).unwrap();
        assert!(u.max_norm() < 1e-12);
    }

    #[test]
    fn cross_solver_agreement_on_model_problem() {
        // -u'' = lambda u + (u')^2 + 1 at lambda = 0.1, lower solution
        let g = Arc::new(build_interval_grid(0.0f64, 1.0, 128).unwrap());
        let p = ProblemSpec::new(
            g.clone(),
            OperatorSpec::laplacian(1, g.node_count()),
            MatrixField::scalar(1.0).unwrap(),
            GridFunction::constant(g.clone(), 1.0),
            GridFunction::constant(g.clone(), 1.0),
            0.1,
        )
        .unwrap();
        let primary = crate::fixedpoint::solve_full(
            &p,
            &GridFunction::zeros(g.clone()),
            1e-12,
        );
        assert!(primary.converged);
        let red = semilinear_reduction(&p).unwrap();
        let fine = Arc::new(build_interval_grid(0.0, 1.0, 1024).unwrap());
        let v = semilinear_solve(&red, &fine, 1e-10).unwrap();
        let u_ref = red.invert(&v).unwrap();
        // compare on the coarse nodes; both are second order so the gap is
        // dominated by the coarse error
        let mut worst: f64 = 0.0;
        for &i in g.interior() {
            let fine_idx = 8 * i;
            worst = worst.max((primary.solution.get(i) - u_ref.get(fine_idx)).abs());
        }
        let h = g.spacing()[0];
        assert!(worst < 10.0 * h * h, "cross-solver gap {worst}");
    }
}
