//! Machine-checkable property suites and the independent oracles they rely
//! on. The CLI `verify` subcommand and the acceptance tests both run these.

use crate::barriers::{build_barrier, log_absorption_max, BarrierProblem};
use crate::bounds::q_lambda_residual;
use crate::calculus::GridFunction;
use crate::eigen::principal_eigenpair;
use crate::error::Result;
use crate::fixedpoint::solve_full;
use crate::linalg::SymMatrix;
use crate::mesh::{build_interval_grid, Grid};
use crate::operators::{
    pucci_minus, pucci_plus, Ellipticity, MatrixField, OperatorSpec, ProblemSpec,
};
use crate::real::{real, Real};
use crate::transforms::{sandwich_check, semilinear_reduction, ExpChange};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const SUITES: &[&str] = &[
    "operators",
    "transforms",
    "barriers",
    "bounds",
    "eigen",
    "oracle",
];

/// empirical convergence order from a sequence of errors at h, h/2, h/4, ...
pub fn empirical_order<T: Real>(errors: &[T]) -> T {
    assert!(errors.len() >= 2);
    let first = errors[0];
    let last = errors[errors.len() - 1];
    let halvings = real::<T>((errors.len() - 1) as f64);
    if last <= real::<T>(1e-15) {
        return real::<T>(10.0);
    }
    (first / last).log2() / halvings
}

/// random symmetric matrix with entries in [-scale, scale]
pub fn random_symmetric<T: Real>(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix<T> {
    let mut m = SymMatrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            m.set(i, j, real::<T>(rng.gen_range(-scale..scale)));
        }
    }
    m
}

/// smooth random seed vanishing on the boundary: a few sine modes
pub fn random_smooth_seed<T: Real>(
    grid: &Arc<Grid<T>>,
    rng: &mut ChaCha8Rng,
    amplitude: f64,
) -> GridFunction<T> {
    let a1: f64 = rng.gen_range(-1.0..1.0);
    let a2: f64 = rng.gen_range(-1.0..1.0);
    let a3: f64 = rng.gen_range(-1.0..1.0);
    let pi = std::f64::consts::PI;
    GridFunction::from_fn(grid.clone(), |x, y| {
        let (xf, yf) = (x.to_f64().unwrap_or(0.0), y.to_f64().unwrap_or(0.0));
        let sx = (pi * xf).sin();
        let v = amplitude
            * (a1 * sx + a2 * (2.0 * pi * xf).sin() + a3 * sx * sx)
            * if yf == 0.0 { 1.0 } else { (pi * yf).sin() };
        real::<T>(v)
    })
}

/// one orthonormal-frame objective evaluation: extremal tr(A X) over the
/// diagonal box in that frame
fn frame_value<T: Real>(x: &SymMatrix<T>, frame: &[Vec<T>], e: &Ellipticity<T>, plus: bool) -> T {
    let mut total = T::zero();
    for q in frame {
        let xq = x.apply(q);
        let quad: T = xq.iter().zip(q).map(|(&a, &b)| a * b).sum();
        let w = if (quad >= T::zero()) == plus { e.hi } else { e.lo };
        total = total + w * quad;
    }
    total
}

fn rotation2<T: Real>(theta: T) -> Vec<Vec<T>> {
    vec![
        vec![theta.cos(), theta.sin()],
        vec![-theta.sin(), theta.cos()],
    ]
}

/// random orthonormal 3-frame by Gram-Schmidt on Gaussian samples
fn random_frame3<T: Real>(rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    loop {
        let mut vs: Vec<Vec<T>> = (0..3)
            .map(|_| {
                (0..3)
                    .map(|_| real::<T>(rng.gen_range(-1.0f64..1.0)))
                    .collect()
            })
            .collect();
        let mut ok = true;
        for i in 0..3 {
            for j in 0..i {
                let d: T = vs[i]
                    .iter()
                    .zip(&vs[j])
                    .map(|(&a, &b)| a * b)
                    .sum();
                for k in 0..3 {
                    let vjk = vs[j][k];
                    vs[i][k] = vs[i][k] - d * vjk;
                }
            }
            let norm: T = vs[i].iter().map(|&a| a * a).sum::<T>().sqrt();
            if norm < real::<T>(1e-6) {
                ok = false;
                break;
            }
            for k in 0..3 {
                vs[i][k] = vs[i][k] / norm;
            }
        }
        if ok {
            return vs;
        }
    }
}

fn rotate_frame_in_plane<T: Real>(frame: &[Vec<T>], p: usize, q: usize, theta: T) -> Vec<Vec<T>> {
    let mut out = frame.to_vec();
    let (c, s) = (theta.cos(), theta.sin());
    for k in 0..frame[0].len() {
        out[p][k] = c * frame[p][k] + s * frame[q][k];
        out[q][k] = -s * frame[p][k] + c * frame[q][k];
    }
    out
}

/// Brute-force extremization of tr(A X) over the admissible coefficient set:
/// dense frame sampling followed by derivative-free golden refinement. Fully
/// independent of the eigenvalue formula.
pub fn pucci_bruteforce<T: Real>(
    x: &SymMatrix<T>,
    e: &Ellipticity<T>,
    plus: bool,
    rng: &mut ChaCha8Rng,
) -> T {
    let better = |a: T, b: T| if plus { a > b } else { a < b };
    let golden = real::<T>(0.618_033_988_749_894_9);
    match x.order() {
        1 => frame_value(x, &[vec![T::one()]], e, plus),
        2 => {
            // dense angle scan plus golden refinement of the best slot
            let samples = 720;
            let half_pi = real::<T>(std::f64::consts::FRAC_PI_2);
            let step = half_pi / real::<T>(samples as f64);
            let mut best = (T::zero(), frame_value(x, &rotation2(T::zero()), e, plus));
            for k in 1..samples {
                let th = step * real::<T>(k as f64);
                let v = frame_value(x, &rotation2(th), e, plus);
                if better(v, best.1) {
                    best = (th, v);
                }
            }
            let (mut lo, mut hi) = (best.0 - step, best.0 + step);
            for _ in 0..60 {
                let d = hi - lo;
                let a = hi - golden * d;
                let b = lo + golden * d;
                let va = frame_value(x, &rotation2(a), e, plus);
                let vb = frame_value(x, &rotation2(b), e, plus);
                if better(va, vb) {
                    hi = b;
                    if better(va, best.1) {
                        best = (a, va);
                    }
                } else {
                    lo = a;
                    if better(vb, best.1) {
                        best = (b, vb);
                    }
                }
            }
            best.1
        }
        3 => {
            let mut best_frame = random_frame3::<T>(rng);
            let mut best = frame_value(x, &best_frame, e, plus);
            for _ in 0..600 {
                let f = random_frame3::<T>(rng);
                let v = frame_value(x, &f, e, plus);
                if better(v, best) {
                    best = v;
                    best_frame = f;
                }
            }
            // cyclic golden refinement over the three rotation planes
            for sweep in 0..14 {
                let width = real::<T>(0.55f64.powi(sweep) * 0.8 + 1e-7);
                for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
                    let (mut lo, mut hi) = (-width, width);
                    for _ in 0..40 {
                        let d = hi - lo;
                        let a = hi - golden * d;
                        let b = lo + golden * d;
                        let va = frame_value(x, &rotate_frame_in_plane(&best_frame, p, q, a), e, plus);
                        let vb = frame_value(x, &rotate_frame_in_plane(&best_frame, p, q, b), e, plus);
                        if better(va, vb) {
                            hi = b;
                        } else {
                            lo = a;
                        }
                    }
                    let th = (lo + hi) / real::<T>(2.0);
                    let cand = rotate_frame_in_plane(&best_frame, p, q, th);
                    let v = frame_value(x, &cand, e, plus);
                    if better(v, best) {
                        best = v;
                        best_frame = cand;
                    }
                }
            }
            best
        }
        _ => unreachable!("brute-force oracle supports orders 1..3"),
    }
}

fn check<T: std::fmt::Display>(name: &str, passed: bool, detail: T) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail: detail.to_string(),
    }
}

fn operators_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e = Ellipticity::new(1.0, 2.5).unwrap();
    let mut worst: f64 = 0.0;
    let mut count_ok = 0usize;
    let total = 60;
    for k in 0..total {
        let n = if k % 2 == 0 { 2 } else { 3 };
        let x = random_symmetric::<f64>(&mut rng, n, 2.0);
        let bf_plus = pucci_bruteforce(&x, &e, true, &mut rng);
        let bf_minus = pucci_bruteforce(&x, &e, false, &mut rng);
        let gap = (pucci_plus(&x, &e) - bf_plus)
            .abs()
            .max((pucci_minus(&x, &e) - bf_minus).abs());
        worst = worst.max(gap);
        if gap <= 1e-6 {
            count_ok += 1;
        }
    }
    let mut checks = vec![check(
        "pucci brute-force corpus",
        count_ok == total,
        format!("{count_ok}/{total} matched, worst gap {worst:.3e}"),
    )];
    let mut dual_worst: f64 = 0.0;
    for _ in 0..100 {
        let x = random_symmetric::<f64>(&mut rng, 3, 2.0);
        dual_worst = dual_worst.max((pucci_minus(&x, &e) + pucci_plus(&x.neg(), &e)).abs());
    }
    checks.push(check(
        "pucci duality",
        dual_worst < 1e-10,
        format!("worst duality gap {dual_worst:.3e}"),
    ));
    SuiteReport {
        suite: "operators".into(),
        seed,
        checks,
    }
}

fn transforms_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Arc::new(build_interval_grid(0.0f64, 1.0, 32).unwrap());
    let mut worst_rt: f64 = 0.0;
    for k in 0..50 {
        let u = random_smooth_seed(&grid, &mut rng, 1.5);
        let change = if k % 2 == 0 {
            ExpChange::v_change(0.8).unwrap()
        } else {
            ExpChange::w_change(1.2).unwrap()
        };
        let t = crate::transforms::forward(&u, &change).unwrap();
        let back = crate::transforms::inverse(&t, &change).unwrap();
        worst_rt = worst_rt.max(back.zip_with(&u, |a, b| (a - b).abs()).max_norm());
    }
    let mut checks = vec![check(
        "round trip",
        worst_rt < 1e-12,
        format!("worst error {worst_rt:.3e}"),
    )];
    // sandwich decay order on a fixed smooth profile
    let e = Ellipticity::new(1.0, 2.0).unwrap();
    let change = ExpChange::v_change(1.0).unwrap();
    let viol: Vec<f64> = [32usize, 64, 128]
        .iter()
        .map(|&n| {
            let g = Arc::new(build_interval_grid(0.0, 1.0, n).unwrap());
            let u = GridFunction::from_fn(g, |x, _| (std::f64::consts::PI * x).sin());
            sandwich_check(&u, &change, &e).unwrap().max_violation
        })
        .collect();
    let order = empirical_order(&viol);
    checks.push(check(
        "sandwich violation order",
        order >= 1.8,
        format!("order {order:.2} from {viol:?}"),
    ));
    SuiteReport {
        suite: "transforms".into(),
        seed,
        checks,
    }
}

fn barriers_suite(seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    let mut all_ok = true;
    let mut worst_margin = f64::INFINITY;
    let mut max_alpha = 0u32;
    for radius in [0.5, 1.0] {
        for gamma in [0.0, 1.0] {
            for d in [0.0, 1.0] {
                for a in [0.5, 2.0] {
                    let pr = BarrierProblem {
                        radius,
                        ellipticity: Ellipticity::new(1.0, 2.0).unwrap(),
                        gamma,
                        d,
                        a,
                        mu: 0.2,
                        m0: log_absorption_max(a),
                        dim: 2,
                    };
                    match build_barrier(&pr) {
                        Ok(b) => {
                            max_alpha = max_alpha.max(b.alpha);
                            for (_, m) in b.annulus_margins(64).unwrap() {
                                worst_margin = worst_margin.min(m);
                                if m <= 0.0 {
                                    all_ok = false;
                                }
                            }
                        }
                        Err(_) => all_ok = false,
                    }
                }
            }
        }
    }
    checks.push(check(
        "barrier corpus strict subsolution",
        all_ok && worst_margin > 0.0,
        format!("worst margin {worst_margin:.3e}, max alpha {max_alpha}"),
    ));
    SuiteReport {
        suite: "barriers".into(),
        seed,
        checks,
    }
}

fn bounds_suite(seed: u64) -> SuiteReport {
    let grid = Arc::new(build_interval_grid(0.0f64, 1.0, 96).unwrap());
    let p = ProblemSpec::new(
        grid.clone(),
        OperatorSpec::laplacian(1, grid.node_count()),
        MatrixField::scalar(1.0).unwrap(),
        GridFunction::constant(grid.clone(), 1.0),
        GridFunction::constant(grid.clone(), -1.0),
        0.5,
    )
    .unwrap();
    let u = solve_full(&p, &GridFunction::zeros(grid.clone()), 1e-11).solution;
    let rep = q_lambda_residual(&u, &p).unwrap();
    let h = grid.spacing()[0];
    let checks = vec![
        check(
            "transformed inequality residual",
            rep.max_residual <= 50.0 * h * h,
            format!("max residual {:.3e}", rep.max_residual),
        ),
        check(
            "transformed variable range",
            rep.saturated.is_empty() && rep.w.max_norm() < 1.0 / p.matrix.mu1(),
            format!("max w {:.3e}", rep.w.max_norm()),
        ),
    ];
    SuiteReport {
        suite: "bounds".into(),
        seed,
        checks,
    }
}

fn eigen_suite(seed: u64) -> SuiteReport {
    let grid = Arc::new(build_interval_grid(0.0f64, 1.0, 256).unwrap());
    let e = Ellipticity::new(1.0, 1.0).unwrap();
    let op = OperatorSpec::pucci(crate::calculus::ExtremalSide::Minus, e);
    let c = GridFunction::constant(grid.clone(), 1.0);
    let pair = principal_eigenpair(&op, &c, &grid, 1e-9).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    let c2 = GridFunction::constant(grid.clone(), 2.0);
    let pair2 = principal_eigenpair(&op, &c2, &grid, 1e-9).unwrap();
    let checks = vec![
        check(
            "eigenvalue near pi^2",
            (pair.lambda1 - pi2).abs() < 1e-3,
            format!("lambda1 {:.9}", pair.lambda1),
        ),
        check(
            "eigenfunction interior positivity",
            grid.interior().iter().all(|&i| pair.phi1.get(i) > 0.0),
            "min > 0".to_string(),
        ),
        check(
            "weight homogeneity",
            (pair2.lambda1 - pair.lambda1 / 2.0).abs() < 1e-7,
            format!("{} vs {}", pair2.lambda1, pair.lambda1 / 2.0),
        ),
    ];
    SuiteReport {
        suite: "eigen".into(),
        seed,
        checks,
    }
}

fn oracle_suite(seed: u64) -> SuiteReport {
    let mut checks = Vec::new();
    for k in [0.0, 0.3, 0.6] {
        let errs: Vec<f64> = [256usize, 512, 1024]
            .iter()
            .map(|&n| crate::oracle::radial_family_residual(k, 3, 0.1, 1.0, n).unwrap())
            .collect();
        let order = empirical_order(&errs);
        checks.push(check(
            &format!("radial family residual order (k={k})"),
            order >= 1.8,
            format!("order {order:.2}"),
        ));
    }
    // cross-solver on the model problem
    let grid = Arc::new(build_interval_grid(0.0f64, 1.0, 128).unwrap());
    let p = ProblemSpec::new(
        grid.clone(),
        OperatorSpec::laplacian(1, grid.node_count()),
        MatrixField::scalar(1.0).unwrap(),
        GridFunction::constant(grid.clone(), 1.0),
        GridFunction::constant(grid.clone(), 1.0),
        0.1,
    )
    .unwrap();
    let primary = solve_full(&p, &GridFunction::zeros(grid.clone()), 1e-12);
    let red = semilinear_reduction(&p).unwrap();
    let fine = Arc::new(build_interval_grid(0.0, 1.0, 1024).unwrap());
    let v = crate::oracle::semilinear_solve(&red, &fine, 1e-10).unwrap();
    let u_ref = red.invert(&v).unwrap();
    let mut worst: f64 = 0.0;
    for &i in grid.interior() {
        worst = worst.max((primary.solution.get(i) - u_ref.get(8 * i)).abs());
    }
    let h = grid.spacing()[0];
    checks.push(check(
        "cross-solver agreement",
        primary.converged && worst < 10.0 * h * h,
        format!("gap {worst:.3e}"),
    ));
    SuiteReport {
        suite: "oracle".into(),
        seed,
        checks,
    }
}

/// Runs one named suite, or all of them.
pub fn run_suites(name: &str, seed: u64) -> Result<Vec<SuiteReport>> {
    let run_one = |n: &str| -> SuiteReport {
        match n {
            "operators" => operators_suite(seed),
            "transforms" => transforms_suite(seed),
            "barriers" => barriers_suite(seed),
            "bounds" => bounds_suite(seed),
            "eigen" => eigen_suite(seed),
            "oracle" => oracle_suite(seed),
            _ => unreachable!(),
        }
    };
    match name {
        "all" => Ok(SUITES.iter().map(|s| run_one(s)).collect()),
        n if SUITES.contains(&n) => Ok(vec![run_one(n)]),
        other => Err(crate::error::Error::Config(format!(
            "unknown suite '{other}'; expected one of {SUITES:?} or 'all'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bruteforce_matches_formula_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let e = Ellipticity::new(0.7, 2.2).unwrap();
        for k in 0..20 {
            let n = if k % 2 == 0 { 2 } else { 3 };
            let x = random_symmetric::<f64>(&mut rng, n, 2.0);
            let bf = pucci_bruteforce(&x, &e, true, &mut rng);
            let exact = pucci_plus(&x, &e);
            assert!(
                (bf - exact).abs() < 1e-6,
                "n={n}: brute {bf} vs formula {exact}"
            );
        }
    }

    #[test]
    fn all_suites_pass() {
        for rep in run_suites("all", 7).unwrap() {
            for c in &rep.checks {
                assert!(c.passed, "suite {} check '{}': {}", rep.suite, c.name, c.detail);
            }
        }
    }

    #[test]
    fn unknown_suite_rejected() {
        assert!(run_suites("nope", 1).is_err());
    }

    #[test]
    fn empirical_order_basics() {
        let o = empirical_order(&[4.0f64, 1.0, 0.25]);
        assert!((o - 2.0).abs() < 1e-12);
    }
}
