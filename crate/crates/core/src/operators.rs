//! Pucci extremal operators, linear/HJB/Isaacs families and the full problem
//! residual.

use std::sync::Arc;

use crate::calculus::{hessian_centered, upwind_abs_gradient, ExtremalSide, GridFunction, QuadScheme};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::mesh::Grid;
use crate::real::Real;

/// Ellipticity constants 0 < lo <= hi bounding the admissible coefficient
/// matrices lo*I <= A <= hi*I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipticity<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Real> Ellipticity<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo > T::zero() && lo <= hi) {
            return Err(Error::Validation(format!(
                "ellipticity needs 0 < lo <= hi, got lo={lo}, hi={hi}"
            )));
        }
        Ok(Ellipticity { lo, hi })
    }

    pub fn isotropic(v: T) -> Result<Self> {
        Self::new(v, v)
    }
}

/// sup of tr(AX) over lo*I <= A <= hi*I: hi on the positive eigenvalues, lo on
/// the negative ones.
pub fn pucci_plus<T: Real>(x: &SymMatrix<T>, e: &Ellipticity<T>) -> T {
    x.eigenvalues()
        .into_iter()
        .map(|ev| if ev >= T::zero() { e.hi * ev } else { e.lo * ev })
        .sum()
}

/// inf of tr(AX) over the same set; equals -pucci_plus(-X).
pub fn pucci_minus<T: Real>(x: &SymMatrix<T>, e: &Ellipticity<T>) -> T {
    x.eigenvalues()
        .into_iter()
        .map(|ev| if ev >= T::zero() { e.lo * ev } else { e.hi * ev })
        .sum()
}

/// Wide-stencil evaluation of the Pucci operators in the plane: extremize the
/// two-direction curvature sum over a finite set of orthogonal integer frames.
/// Robustness variant; the default path diagonalizes the centered Hessian.
pub fn pucci_wide_stencil<T: Real>(
    u: &GridFunction<T>,
    idx: usize,
    e: &Ellipticity<T>,
    side: ExtremalSide,
) -> Option<T> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return None;
    }
    let h = grid.spacing()[0];
    let frames: [([i32; 2], [i32; 2]); 4] = [
        ([1, 0], [0, 1]),
        ([1, 1], [1, -1]),
        ([2, 1], [-1, 2]),
        ([1, 2], [-2, 1]),
    ];
    let second = |d: [i32; 2]| -> Option<T> {
        let p = grid.neighbor(idx, d[0], d[1])?;
        let m = grid.neighbor(idx, -d[0], -d[1])?;
        let len2 = crate::real::real::<T>((d[0] * d[0] + d[1] * d[1]) as f64);
        Some((u.get(p) - u.get(idx) - u.get(idx) + u.get(m)) / (h * h * len2))
    };
    let weigh = |c: T| match side {
        ExtremalSide::Plus => {
            if c >= T::zero() {
                e.hi * c
            } else {
                e.lo * c
            }
        }
        ExtremalSide::Minus => {
            if c >= T::zero() {
                e.lo * c
            } else {
                e.hi * c
            }
        }
    };
    let mut best: Option<T> = None;
    for (d1, d2) in frames {
        let (Some(c1), Some(c2)) = (second(d1), second(d2)) else {
            continue;
        };
        let v = weigh(c1) + weigh(c2);
        best = Some(match (best, side) {
            (None, _) => v,
            (Some(b), ExtremalSide::Plus) => b.max(v),
            (Some(b), ExtremalSide::Minus) => b.min(v),
        });
    }
    best
}

/// One linear member tr(a D^2 u) + beta . Du + zeta u of an HJB/Isaacs family.
#[derive(Debug, Clone)]
pub struct OperatorMember<T> {
    /// second-order coefficient; constant or per node
    a: MemberCoef<T>,
    /// optional drift vector per node
    drift: Option<Vec<[T; 2]>>,
    /// optional zero-order coefficient per node (<= 0 keeps the member proper)
    zeta: Option<Vec<T>>,
}

#[derive(Debug, Clone)]
enum MemberCoef<T> {
    Constant(SymMatrix<T>),
    PerNode(Vec<SymMatrix<T>>),
}

impl<T: Real> OperatorMember<T> {
    pub fn constant_coef(a: SymMatrix<T>) -> Self {
        OperatorMember {
            a: MemberCoef::Constant(a),
            drift: None,
            zeta: None,
        }
    }

    pub fn per_node_coef(a: Vec<SymMatrix<T>>) -> Self {
        OperatorMember {
            a: MemberCoef::PerNode(a),
            drift: None,
            zeta: None,
        }
    }

    pub fn isotropic(dim: usize, scale: T) -> Self {
        Self::constant_coef(SymMatrix::identity(dim).scale(scale))
    }

    pub fn with_drift(mut self, drift: Vec<[T; 2]>) -> Self {
        self.drift = Some(drift);
        self
    }

    pub fn with_zero_order(mut self, zeta: Vec<T>) -> Self {
        self.zeta = Some(zeta);
        self
    }

    pub fn coef_at(&self, idx: usize) -> &SymMatrix<T> {
        match &self.a {
            MemberCoef::Constant(m) => m,
            MemberCoef::PerNode(v) => &v[idx],
        }
    }

    pub fn drift_at(&self, idx: usize) -> Option<[T; 2]> {
        self.drift.as_ref().map(|d| d[idx])
    }

    pub fn zeta_at(&self, idx: usize) -> T {
        self.zeta.as_ref().map(|z| z[idx]).unwrap_or(T::zero())
    }

    fn check_ellipticity(&self, e: &Ellipticity<T>, nodes: usize) -> Result<()> {
        let tol = crate::real::real::<T>(1e-10);
        let check_one = |m: &SymMatrix<T>| -> Result<()> {
            for ev in m.eigenvalues() {
                if ev < e.lo - tol || ev > e.hi + tol {
                    return Err(Error::Validation(format!(
                        "member coefficient eigenvalue {ev} outside [{}, {}]",
                        e.lo, e.hi
                    )));
                }
            }
            Ok(())
        };
        match &self.a {
            MemberCoef::Constant(m) => check_one(m),
            MemberCoef::PerNode(v) => {
                if v.len() != nodes {
                    return Err(Error::Validation(
                        "per-node coefficient length mismatch".into(),
                    ));
                }
                v.iter().try_for_each(check_one)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    PucciPlus,
    PucciMinus,
    Linear,
    HjbSup,
    Isaacs,
}

/// The fully nonlinear operator F: kind, ellipticity bounds, member families
/// and the drift/zero-order bound fields of the structure condition.
#[derive(Debug, Clone)]
pub struct OperatorSpec<T> {
    kind: OperatorKind,
    ellipticity: Ellipticity<T>,
    /// sup over groups of inf within each group (trivial for linear/HJB)
    groups: Vec<Vec<OperatorMember<T>>>,
    /// drift bound b(x) >= 0; the |Du| coefficient of the extremal operators
    b: Option<GridFunction<T>>,
    /// proper zero-order bound d(x) >= 0; adds -d(x) u to the Pucci kinds
    d: Option<GridFunction<T>>,
}

impl<T: Real> OperatorSpec<T> {
    pub fn pucci(side: ExtremalSide, ellipticity: Ellipticity<T>) -> Self {
        OperatorSpec {
            kind: match side {
                ExtremalSide::Plus => OperatorKind::PucciPlus,
                ExtremalSide::Minus => OperatorKind::PucciMinus,
            },
            ellipticity,
            groups: Vec::new(),
            b: None,
            d: None,
        }
    }

    pub fn linear(ellipticity: Ellipticity<T>, member: OperatorMember<T>, nodes: usize) -> Result<Self> {
        member.check_ellipticity(&ellipticity, nodes)?;
        Ok(OperatorSpec {
            kind: OperatorKind::Linear,
            ellipticity,
            groups: vec![vec![member]],
            b: None,
            d: None,
        })
    }

    pub fn hjb_sup(
        ellipticity: Ellipticity<T>,
        members: Vec<OperatorMember<T>>,
        nodes: usize,
    ) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Validation("HJB family must be non-empty".into()));
        }
        for m in &members {
            m.check_ellipticity(&ellipticity, nodes)?;
        }
        Ok(OperatorSpec {
            kind: OperatorKind::HjbSup,
            ellipticity,
            groups: members.into_iter().map(|m| vec![m]).collect(),
        b: None,
            d: None,
        })
    }

    pub fn isaacs(
        ellipticity: Ellipticity<T>,
        groups: Vec<Vec<OperatorMember<T>>>,
        nodes: usize,
    ) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Validation(
                "Isaacs family needs non-empty groups".into(),
            ));
        }
        for g in &groups {
            for m in g {
                m.check_ellipticity(&ellipticity, nodes)?;
            }
        }
        Ok(OperatorSpec {
            kind: OperatorKind::Isaacs,
            ellipticity,
            groups,
            b: None,
            d: None,
        })
    }

    /// Laplacian shorthand: linear with a = I.
    pub fn laplacian(dim: usize, nodes: usize) -> Self {
        let e = Ellipticity::isotropic(T::one()).expect("unit ellipticity");
        Self::linear(e, OperatorMember::isotropic(dim, T::one()), nodes)
            .expect("identity coefficient is admissible")
    }

    pub fn with_drift_bound(mut self, b: GridFunction<T>) -> Result<Self> {
        if b.values().iter().any(|&v| v < T::zero()) {
            return Err(Error::Validation("drift bound b must be nonnegative".into()));
        }
        self.b = Some(b);
        Ok(self)
    }

    pub fn with_zero_order_bound(mut self, d: GridFunction<T>) -> Result<Self> {
        if d.values().iter().any(|&v| v < T::zero()) {
            return Err(Error::Validation("zero-order bound d must be nonnegative".into()));
        }
        self.d = Some(d);
        Ok(self)
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn ellipticity(&self) -> &Ellipticity<T> {
        &self.ellipticity
    }

    pub(crate) fn groups(&self) -> &[Vec<OperatorMember<T>>] {
        &self.groups
    }

    pub fn drift_bound(&self) -> Option<&GridFunction<T>> {
        self.b.as_ref()
    }

    pub fn zero_order_bound(&self) -> Option<&GridFunction<T>> {
        self.d.as_ref()
    }

    /// Evaluates one linear member on the discrete Hessian/gradient data.
    pub(crate) fn member_value(
        &self,
        member: &OperatorMember<T>,
        u: &GridFunction<T>,
        hess: &SymMatrix<T>,
        idx: usize,
    ) -> T {
        let grid = u.grid();
        let h = grid.spacing();
        let mut v = member.coef_at(idx).frobenius_product(hess);
        if let Some(beta) = member.drift_at(idx) {
            for axis in 0..grid.dim() {
                let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
                let bk = beta[axis];
                if bk == T::zero() {
                    continue;
                }
                let fwd = grid.neighbor(idx, di, dj).expect("interior stencil");
                let bwd = grid.neighbor(idx, -di, -dj).expect("interior stencil");
                // upwind: positive drift looks forward, negative looks backward
                let slope = if bk > T::zero() {
                    (u.get(fwd) - u.get(idx)) / h[axis]
                } else {
                    (u.get(idx) - u.get(bwd)) / h[axis]
                };
                v = v + bk * slope;
            }
        }
        v + member.zeta_at(idx) * u.get(idx)
    }

    /// F applied to the discrete data of u at one interior node.
    pub fn value_at(&self, u: &GridFunction<T>, hess: &SymMatrix<T>, idx: usize) -> T {
        let mut v = match self.kind {
            OperatorKind::PucciPlus => pucci_plus(hess, &self.ellipticity),
            OperatorKind::PucciMinus => pucci_minus(hess, &self.ellipticity),
            OperatorKind::Linear => self.member_value(&self.groups[0][0], u, hess, idx),
            OperatorKind::HjbSup | OperatorKind::Isaacs => {
                let mut best = T::neg_infinity();
                for g in &self.groups {
                    let mut worst = T::infinity();
                    for m in g {
                        worst = worst.min(self.member_value(m, u, hess, idx));
                    }
                    best = best.max(worst);
                }
                best
            }
        };
        match self.kind {
            OperatorKind::PucciPlus => {
                if let Some(b) = &self.b {
                    v = v + b.get(idx) * upwind_abs_gradient(u, idx, ExtremalSide::Plus);
                }
            }
            OperatorKind::PucciMinus => {
                if let Some(b) = &self.b {
                    v = v - b.get(idx) * upwind_abs_gradient(u, idx, ExtremalSide::Minus);
                }
            }
            _ => {}
        }
        if let Some(d) = &self.d {
            v = v - d.get(idx) * u.get(idx);
        }
        v
    }
}

/// F applied on all interior nodes; boundary and exterior entries are zero.
pub fn apply_f<T: Real>(spec: &OperatorSpec<T>, u: &GridFunction<T>) -> GridFunction<T> {
    let grid = u.grid().clone();
    let hess = hessian_centered(u);
    let mut out = GridFunction::zeros(grid.clone());
    for &i in grid.interior() {
        out.set(i, spec.value_at(u, &hess[i], i));
    }
    out
}

/// The extremal operators L±[u] = M±(D^2 u) ± b(x)|Du| on interior nodes.
pub fn extremal_l<T: Real>(
    u: &GridFunction<T>,
    side: ExtremalSide,
    ellipticity: &Ellipticity<T>,
    b: Option<&GridFunction<T>>,
) -> GridFunction<T> {
    let grid = u.grid().clone();
    let hess = hessian_centered(u);
    let mut out = GridFunction::zeros(grid.clone());
    for &i in grid.interior() {
        let m = match side {
            ExtremalSide::Plus => pucci_plus(&hess[i], ellipticity),
            ExtremalSide::Minus => pucci_minus(&hess[i], ellipticity),
        };
        let drift = match b {
            Some(bf) => {
                let g = upwind_abs_gradient(u, i, side);
                match side {
                    ExtremalSide::Plus => bf.get(i) * g,
                    ExtremalSide::Minus => -bf.get(i) * g,
                }
            }
            None => T::zero(),
        };
        out.set(i, m + drift);
    }
    out
}

/// Matrix coefficient of the quadratic gradient term, with the nondegeneracy
/// bounds mu1 I <= M(x) <= mu2 I.
#[derive(Debug, Clone)]
pub struct MatrixField<T> {
    mu1: T,
    mu2: T,
    data: MatrixData<T>,
}

#[derive(Debug, Clone)]
enum MatrixData<T> {
    ScalarConstant(T),
    ScalarField(Vec<T>),
    Full(Vec<SymMatrix<T>>),
}

impl<T: Real> MatrixField<T> {
    /// M = mu * I everywhere.
    pub fn scalar(mu: T) -> Result<Self> {
        if !(mu > T::zero()) {
            return Err(Error::Validation(format!("scalar matrix field needs mu > 0, got {mu}")));
        }
        Ok(MatrixField {
            mu1: mu,
            mu2: mu,
            data: MatrixData::ScalarConstant(mu),
        })
    }

    /// M(x) = m(x) * I with stated bounds.
    pub fn scalar_field(m: Vec<T>, mu1: T, mu2: T) -> Result<Self> {
        if !(T::zero() < mu1 && mu1 <= mu2) {
            return Err(Error::Validation("need 0 < mu1 <= mu2".into()));
        }
        let tol = crate::real::real::<T>(1e-12);
        for &v in &m {
            if v < mu1 - tol || v > mu2 + tol {
                return Err(Error::Validation(format!(
                    "scalar field value {v} violates [{mu1}, {mu2}]"
                )));
            }
        }
        Ok(MatrixField {
            mu1,
            mu2,
            data: MatrixData::ScalarField(m),
        })
    }

    /// Per-node matrices with bounds checked through eigenvalues.
    pub fn full(ms: Vec<SymMatrix<T>>, mu1: T, mu2: T) -> Result<Self> {
        if !(T::zero() < mu1 && mu1 <= mu2) {
            return Err(Error::Validation("need 0 < mu1 <= mu2".into()));
        }
        let tol = crate::real::real::<T>(1e-10);
        for m in &ms {
            for ev in m.eigenvalues() {
                if ev < mu1 - tol || ev > mu2 + tol {
                    return Err(Error::Validation(format!(
                        "matrix field eigenvalue {ev} violates [{mu1}, {mu2}]"
                    )));
                }
            }
        }
        Ok(MatrixField {
            mu1,
            mu2,
            data: MatrixData::Full(ms),
        })
    }

    pub fn mu1(&self) -> T {
        self.mu1
    }

    pub fn mu2(&self) -> T {
        self.mu2
    }

    /// True when M = mu I with a constant scalar mu.
    pub fn constant_scalar(&self) -> Option<T> {
        match self.data {
            MatrixData::ScalarConstant(mu) => Some(mu),
            _ => None,
        }
    }

    /// <M(x) p, p>
    pub fn quadratic_form(&self, idx: usize, p: [T; 2], dim: usize) -> T {
        match &self.data {
            MatrixData::ScalarConstant(mu) => *mu * (p[0] * p[0] + p[1] * p[1]),
            MatrixData::ScalarField(m) => m[idx] * (p[0] * p[0] + p[1] * p[1]),
            MatrixData::Full(ms) => {
                let m = &ms[idx];
                let v = &p[..dim];
                let mv = m.apply(v);
                mv.iter().zip(v).map(|(&a, &b)| a * b).sum()
            }
        }
    }

    /// M(x) p
    pub fn apply(&self, idx: usize, p: [T; 2], dim: usize) -> [T; 2] {
        match &self.data {
            MatrixData::ScalarConstant(mu) => [*mu * p[0], *mu * p[1]],
            MatrixData::ScalarField(m) => [m[idx] * p[0], m[idx] * p[1]],
            MatrixData::Full(ms) => {
                let mv = ms[idx].apply(&p[..dim]);
                let mut out = [T::zero(); 2];
                for (k, v) in mv.iter().enumerate() {
                    out[k] = *v;
                }
                out
            }
        }
    }
}

/// Full coefficient bundle of the parametrized Dirichlet problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec<T> {
    pub grid: Arc<Grid<T>>,
    pub op: OperatorSpec<T>,
    pub matrix: MatrixField<T>,
    pub c: GridFunction<T>,
    pub h: GridFunction<T>,
    pub lambda: T,
    /// gradient discretization inside the quadratic term
    pub quad_scheme: QuadScheme,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(
        grid: Arc<Grid<T>>,
        op: OperatorSpec<T>,
        matrix: MatrixField<T>,
        c: GridFunction<T>,
        h: GridFunction<T>,
        lambda: T,
    ) -> Result<Self> {
        let mut positive_somewhere = false;
        for &i in grid.interior().iter().chain(grid.boundary()) {
            let v = c.get(i);
            if v < T::zero() {
                return Err(Error::Validation(format!(
                    "weight c must be nonnegative, found {v} at node {i}"
                )));
            }
            if v > T::zero() {
                positive_somewhere = true;
            }
        }
        if !positive_somewhere {
            return Err(Error::Validation("weight c must be positive somewhere".into()));
        }
        Ok(ProblemSpec {
            grid,
            op,
            matrix,
            c,
            h,
            lambda,
            quad_scheme: QuadScheme::Centered,
        })
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        let mut p = self.clone();
        p.lambda = lambda;
        p
    }

    pub fn with_quad_scheme(mut self, scheme: QuadScheme) -> Self {
        self.quad_scheme = scheme;
        self
    }
}

/// Residual of the full problem: F_h[u] + lambda c u + <M Du, Du> + h on the
/// interior, u itself on the boundary (homogeneous Dirichlet data).
/// Largest magnitude among the terms summed by the residual; `eps * scale`
/// bounds the achievable residual of any solve from below.
pub fn residual_scale<T: Real>(u: &GridFunction<T>, p: &ProblemSpec<T>) -> T {
    let grid = u.grid().clone();
    let hess = hessian_centered(u);
    let dim = grid.dim();
    let mut scale = T::one();
    for &i in grid.interior() {
        let fv = p.op.value_at(u, &hess[i], i);
        let g = crate::calculus::quadratic_gradient(u, i, p.quad_scheme);
        let quad = p.matrix.quadratic_form(i, g, dim);
        scale = scale
            .max(fv.abs())
            .max(quad.abs())
            .max((p.lambda * p.c.get(i) * u.get(i)).abs())
            .max(p.h.get(i).abs());
    }
    scale
}

pub fn residual_p<T: Real>(u: &GridFunction<T>, p: &ProblemSpec<T>) -> GridFunction<T> {
    let grid = u.grid().clone();
    let mut out = GridFunction::zeros(grid.clone());
    let hess = hessian_centered(u);
    let dim = grid.dim();
    for &i in grid.interior() {
        let fv = p.op.value_at(u, &hess[i], i);
        let g = crate::calculus::quadratic_gradient(u, i, p.quad_scheme);
        let quad = p.matrix.quadratic_form(i, g, dim);
        out.set(
            i,
            fv + p.lambda * p.c.get(i) * u.get(i) + quad + p.h.get(i),
        );
    }
    for &b in grid.boundary() {
        out.set(b, u.get(b));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_grid;
    use crate::real::real;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ell(lo: f64, hi: f64) -> Ellipticity<f64> {
        Ellipticity::new(lo, hi).unwrap()
    }

    fn random_sym(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> SymMatrix<f64> {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, rng.gen_range(-scale..scale));
            }
        }
        m
    }

    #[test]
    fn pucci_on_reference_matrices() {
        let e = ell(1.0, 2.0);
        assert_eq!(pucci_plus(&SymMatrix::zeros(2), &e), 0.0);
        let id = SymMatrix::<f64>::identity(2);
        assert!((pucci_plus(&id, &e) - 4.0).abs() < 1e-12);
        let d = SymMatrix::diagonal(&[2.0, -3.0]);
        assert!((pucci_plus(&d, &e) - 1.0).abs() < 1e-12);
        assert!((pucci_minus(&d, &e) + 4.0).abs() < 1e-12);
    }

    #[test]
    fn pucci_duality_and_ordering() {
        let e = ell(0.5, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let n = if rng.gen_bool(0.5) { 2 } else { 3 };
            let x = random_sym(&mut rng, n, 2.0);
            let plus = pucci_plus(&x, &e);
            let minus = pucci_minus(&x, &e);
            assert!((minus + pucci_plus(&x.neg(), &e)).abs() < 1e-10);
            assert!(plus >= minus - 1e-12);
        }
    }

    #[test]
    fn pucci_subadditivity() {
        let e = ell(1.0, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = random_sym(&mut rng, 3, 1.5);
            let y = random_sym(&mut rng, 3, 1.5);
            let sum = x.add(&y);
            let px = pucci_plus(&x, &e);
            let py = pucci_plus(&y, &e);
            let pmy = pucci_minus(&y, &e);
            let ps = pucci_plus(&sum, &e);
            assert!(ps <= px + py + 1e-9);
            assert!(px + pmy <= ps + 1e-9);
        }
    }

    #[test]
    fn extremal_l_degenerate_interval_is_second_difference() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 16).unwrap());
        let u = GridFunction::from_fn(grid.clone(), |x, _| x * x * x);
        let e = ell(1.0, 1.0);
        let l = extremal_l(&u, ExtremalSide::Minus, &e, None);
        let h = grid.spacing()[0];
        for &i in grid.interior() {
            let xp = u.get(i + 1);
            let xm = u.get(i - 1);
            let second = (xp - 2.0 * u.get(i) + xm) / (h * h);
            assert!((l.get(i) - second).abs() < 1e-10);
        }
        let c = GridFunction::constant(grid.clone(), 4.0);
        let lc = extremal_l(&c, ExtremalSide::Plus, &e, None);
        for &i in grid.interior() {
            assert!(lc.get(i).abs() < 1e-12);
        }
    }

    #[test]
    fn extremal_l_plus_with_drift_on_parabola() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 16).unwrap());
        let u = GridFunction::from_fn(grid.clone(), |x, _| x * x);
        let e = ell(1.0, 2.0);
        let b = GridFunction::constant(grid.clone(), 1.0);
        let l = extremal_l(&u, ExtremalSide::Plus, &e, Some(&b));
        let h = grid.spacing()[0];
        for &i in grid.interior() {
            let x = grid.coords(i)[0];
            // second difference of x^2 is exactly 2; upwinded |Du| = 2x + h here
            let expected = 2.0 * 2.0 + (2.0 * x + h).max(-2.0 * x + h).max(0.0);
            assert!((l.get(i) - expected).abs() < 1e-10);
            assert!((l.get(i) - (4.0 + 2.0 * x)).abs() < 2.0 * h);
        }
    }

    #[test]
    fn apply_f_zero_at_origin_and_hjb_sup() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 12).unwrap());
        let nodes = grid.node_count();
        let e = ell(1.0, 2.0);
        let members = vec![
            OperatorMember::isotropic(1, 1.0),
            OperatorMember::isotropic(1, 2.0),
        ];
        let spec = OperatorSpec::hjb_sup(e, members, nodes).unwrap();
        let zero = GridFunction::zeros(grid.clone());
        let fz = apply_f(&spec, &zero);
        for &i in grid.interior() {
            assert_eq!(fz.get(i), 0.0);
        }
        let u = GridFunction::from_fn(grid.clone(), |x, _| x * x);
        let fu = apply_f(&spec, &u);
        for &i in grid.interior() {
            // sup(1 * 2, 2 * 2) = pucci_plus(2) with these constants
            assert!((fu.get(i) - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn apply_f_rejects_bad_family() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 8).unwrap());
        let e = ell(1.0, 2.0);
        let bad = OperatorMember::isotropic(1, 5.0);
        assert!(OperatorSpec::hjb_sup(e, vec![bad], grid.node_count()).is_err());
        assert!(OperatorSpec::hjb_sup(e, Vec::new(), grid.node_count()).is_err());
    }

    #[test]
    fn structure_condition_sandwich_on_random_pairs() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 24).unwrap());
        let nodes = grid.node_count();
        let e = ell(1.0, 2.0);
        let b = GridFunction::constant(grid.clone(), 0.5);
        let drift: Vec<[f64; 2]> = (0..nodes).map(|_| [0.5, 0.0]).collect();
        let members = vec![
            OperatorMember::isotropic(1, 1.0).with_drift(drift.clone()),
            OperatorMember::isotropic(1, 2.0),
        ];
        let spec = OperatorSpec::hjb_sup(e, members, nodes).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = grid.spacing()[0];
        for _ in 0..50 {
            let (a1, a2, a3): (f64, f64, f64) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let (b1, b2): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let pi = std::f64::consts::PI;
            let u = GridFunction::from_fn(grid.clone(), |x, _| {
                a1 * (pi * x).sin() + a2 * (2.0 * pi * x).sin() + a3 * x * (1.0 - x)
            });
            let v = GridFunction::from_fn(grid.clone(), |x, _| {
                b1 * (pi * x).sin() + b2 * x * x * (1.0 - x)
            });
            let fu = apply_f(&spec, &u);
            let fv = apply_f(&spec, &v);
            let diff = u.zip_with(&v, |a, b| a - b);
            let lp = extremal_l(&diff, ExtremalSide::Plus, &e, Some(&b));
            let lm = extremal_l(&diff, ExtremalSide::Minus, &e, Some(&b));
            let d2 = crate::calculus::hessian_centered(&diff);
            for &i in grid.interior() {
                let gap = fu.get(i) - fv.get(i);
                let slack = 2.0 * 0.5 * h * d2[i].get(0, 0).abs() + 1e-9;
                assert!(gap <= lp.get(i) + slack, "upper sandwich violated: {gap} vs {}", lp.get(i));
                assert!(gap >= lm.get(i) - slack, "lower sandwich violated");
            }
        }
    }

    #[test]
    fn matrix_field_bounds_enforced() {
        assert!(MatrixField::scalar(0.0).is_err());
        assert!(MatrixField::scalar_field(vec![1.0, 3.0], 1.0, 2.0).is_err());
        let ms = vec![SymMatrix::sym2(1.0, 0.0, 2.0); 4];
        assert!(MatrixField::full(ms.clone(), 1.0, 2.0).is_ok());
        assert!(MatrixField::full(ms, 1.5, 2.0).is_err());
    }

    #[test]
    fn residual_zero_for_trivial_problem() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 10).unwrap());
        let spec = OperatorSpec::laplacian(1, grid.node_count());
        let p = ProblemSpec::new(
            grid.clone(),
            spec,
            MatrixField::scalar(1.0).unwrap(),
            GridFunction::constant(grid.clone(), 1.0),
            GridFunction::zeros(grid.clone()),
            0.7,
        )
        .unwrap();
        let zero = GridFunction::zeros(grid.clone());
        let r = residual_p(&zero, &p);
        assert_eq!(r.max_norm(), 0.0);
    }

    #[test]
    fn residual_second_order_on_manufactured_problem() {
        let pi = std::f64::consts::PI;
        let errs: Vec<f64> = [16usize, 32, 64]
            .iter()
            .map(|&n| {
                let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, n).unwrap());
                let lambda = 0.3;
                // forcing chosen so u*(x) = sin(pi x) solves the continuum problem
                let h = GridFunction::from_fn(grid.clone(), |x, _| {
                    pi * pi * (pi * x).sin()
                        - lambda * (pi * x).sin()
                        - pi * pi * (pi * x).cos().powi(2)
                });
                let p = ProblemSpec::new(
                    grid.clone(),
                    OperatorSpec::laplacian(1, grid.node_count()),
                    MatrixField::scalar(1.0).unwrap(),
                    GridFunction::constant(grid.clone(), 1.0),
                    h,
                    lambda,
                )
                .unwrap();
                let u = GridFunction::from_fn(grid.clone(), |x, _| (pi * x).sin());
                residual_p(&u, &p).interior_max_norm()
            })
            .collect();
        let order = ((errs[0] / errs[2]).log2()) / 2.0;
        assert!(order > 1.8, "residual order {order}, errors {errs:?}");
    }

    #[test]
    fn residual_linear_in_lambda_and_h() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0f64, 1.0, 12).unwrap());
        let c = GridFunction::from_fn(grid.clone(), |x, _| 1.0 + x);
        let h = GridFunction::from_fn(grid.clone(), |x, _| (3.0 * x).cos());
        let base = ProblemSpec::new(
            grid.clone(),
            OperatorSpec::laplacian(1, grid.node_count()),
            MatrixField::scalar(2.0).unwrap(),
            c.clone(),
            h,
            0.0,
        )
        .unwrap();
        let u = GridFunction::from_fn(grid.clone(), |x, _| x * (1.0 - x) * (2.0 + x));
        let r0 = residual_p(&u, &base);
        let lam = 1.7;
        let r1 = residual_p(&u, &base.with_lambda(lam));
        for &i in grid.interior() {
            let expected = r0.get(i) + lam * c.get(i) * u.get(i);
            assert!((r1.get(i) - expected).abs() < 1e-12);
        }
        // shifting h shifts the residual identically
        let mut shifted = base.clone();
        shifted.h = base.h.map(|v| v + 0.25);
        let rs = residual_p(&u, &shifted);
        for &i in grid.interior() {
            assert!((rs.get(i) - r0.get(i) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn wide_stencil_matches_eigen_path_on_aligned_quadratic() {
        use crate::mesh::{build_planar_grid, GridShape};
        let grid = std::sync::Arc::new(
            build_planar_grid(
                GridShape::Rectangle {
                    x0: -1.0,
                    x1: 1.0,
                    y0: -1.0,
                    y1: 1.0,
                },
                16,
            )
            .unwrap(),
        );
        let e = ell(1.0, 3.0);
        // Hessian diag(2, -4) in the axis frame
        let u = GridFunction::from_fn(grid.clone(), |x, y| x * x - 2.0 * y * y);
        let hess = hessian_centered(&u);
        for &i in grid.interior() {
            let (ix, iy) = grid.tensor_indices(i);
            if ix < 2 || iy < 2 || ix > 14 || iy > 14 {
                continue;
            }
            let wide = pucci_wide_stencil(&u, i, &e, ExtremalSide::Plus).unwrap();
            let eig = pucci_plus(&hess[i], &e);
            assert!((wide - eig).abs() < 1e-9, "wide {wide} vs eigen {eig}");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn sym3(entries: [f64; 6]) -> SymMatrix<f64> {
            let mut m = SymMatrix::zeros(3);
            let mut it = entries.iter();
            for i in 0..3 {
                for j in i..3 {
                    m.set(i, j, *it.next().unwrap());
                }
            }
            m
        }

        proptest! {
            #[test]
            fn pucci_duality_holds(entries in proptest::array::uniform6(-5.0f64..5.0)) {
                let e = ell(0.5, 2.0);
                let x = sym3(entries);
                let lhs = pucci_minus(&x, &e);
                let rhs = -pucci_plus(&x.neg(), &e);
                prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
                prop_assert!(pucci_plus(&x, &e) >= lhs - 1e-10);
            }

            #[test]
            fn pucci_subadditive(a in proptest::array::uniform6(-3.0f64..3.0),
                                 b in proptest::array::uniform6(-3.0f64..3.0)) {
                let e = ell(1.0, 3.0);
                let x = sym3(a);
                let y = sym3(b);
                let sum = x.add(&y);
                let slack = 1e-8;
                prop_assert!(pucci_plus(&sum, &e) <= pucci_plus(&x, &e) + pucci_plus(&y, &e) + slack);
                prop_assert!(pucci_plus(&x, &e) + pucci_minus(&y, &e) <= pucci_plus(&sum, &e) + slack);
            }
        }
    }

    #[test]
    fn problem_spec_rejects_signed_weight() {
        let grid = std::sync::Arc::new(build_interval_grid(0.0, 1.0, 8).unwrap());
        let c = GridFunction::from_fn(grid.clone(), |x, _| x - 0.5);
        let r = ProblemSpec::new(
            grid.clone(),
            OperatorSpec::laplacian(1, grid.node_count()),
            MatrixField::scalar(1.0).unwrap(),
            c,
            GridFunction::zeros(grid.clone()),
            real::<f64>(1.0),
        );
        assert!(r.is_err());
    }
}
