//! Grid functions and centered/upwinded difference calculus.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::mesh::Grid;
use crate::real::{real, Real};

/// Real values on the nodes of a grid; the discrete stand-in for u, v, w,
/// coefficients and barriers alike.
#[derive(Debug, Clone)]
pub struct GridFunction<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Domain(format!(
                "value vector length {} does not match node count {}",
                values.len(),
                grid.node_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("grid function carries non-finite values".into()));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let n = grid.node_count();
        GridFunction {
            grid,
            values: vec![T::zero(); n],
        }
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Self {
        let n = grid.node_count();
        GridFunction {
            grid,
            values: vec![c; n],
        }
    }

    pub fn from_fn(grid: Arc<Grid<T>>, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.node_count())
            .map(|i| {
                let [x, y] = grid.coords(i);
                f(x, y)
            })
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> T {
        self.values[idx]
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: T) {
        self.values[idx] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// max |u| over interior and boundary nodes
    pub fn max_norm(&self) -> T {
        let mut m = T::zero();
        for &i in self.grid.interior().iter().chain(self.grid.boundary()) {
            m = m.max(self.values[i].abs());
        }
        m
    }

    /// max |u| over interior nodes only
    pub fn interior_max_norm(&self) -> T {
        let mut m = T::zero();
        for &i in self.grid.interior() {
            m = m.max(self.values[i].abs());
        }
        m
    }

    pub fn max_value(&self) -> T {
        let mut m = T::neg_infinity();
        for &i in self.grid.interior().iter().chain(self.grid.boundary()) {
            m = m.max(self.values[i]);
        }
        m
    }

    pub fn min_value(&self) -> T {
        let mut m = T::infinity();
        for &i in self.grid.interior().iter().chain(self.grid.boundary()) {
            m = m.min(self.values[i]);
        }
        m
    }

    pub fn positive_part(&self) -> Self {
        self.map(|v| v.max(T::zero()))
    }

    pub fn negative_part(&self) -> Self {
        self.map(|v| (-v).max(T::zero()))
    }

    /// Discrete L^p norm with quadrature weight h^dim over domain nodes.
    pub fn lp_norm(&self, p: T) -> T {
        let h = self.grid.spacing();
        let weight = if self.grid.dim() == 1 {
            h[0]
        } else {
            h[0] * h[1]
        };
        let sum: T = self
            .grid
            .interior()
            .iter()
            .chain(self.grid.boundary())
            .map(|&i| self.values[i].abs().powf(p))
            .sum();
        (sum * weight).powf(T::one() / p)
    }
}

/// Centered gradient per axis; meaningful on interior nodes, zero elsewhere.
pub fn gradient_centered<T: Real>(u: &GridFunction<T>) -> Vec<[T; 2]> {
    let grid = u.grid();
    let h = grid.spacing();
    let mut out = vec![[T::zero(); 2]; grid.node_count()];
    for &i in grid.interior() {
        let xp = grid.neighbor(i, 1, 0).expect("interior stencil");
        let xm = grid.neighbor(i, -1, 0).expect("interior stencil");
        out[i][0] = (u.get(xp) - u.get(xm)) / (h[0] + h[0]);
        if grid.dim() == 2 {
            let yp = grid.neighbor(i, 0, 1).expect("interior stencil");
            let ym = grid.neighbor(i, 0, -1).expect("interior stencil");
            out[i][1] = (u.get(yp) - u.get(ym)) / (h[1] + h[1]);
        }
    }
    out
}

/// Centered Hessian per interior node; cross term by the four-point average.
pub fn hessian_centered<T: Real>(u: &GridFunction<T>) -> Vec<SymMatrix<T>> {
    let grid = u.grid();
    let h = grid.spacing();
    let dim = grid.dim();
    let mut out = vec![SymMatrix::zeros(dim); grid.node_count()];
    for &i in grid.interior() {
        let xp = grid.neighbor(i, 1, 0).expect("interior stencil");
        let xm = grid.neighbor(i, -1, 0).expect("interior stencil");
        let uxx = (u.get(xp) - u.get(i) - u.get(i) + u.get(xm)) / (h[0] * h[0]);
        if dim == 1 {
            let mut m = SymMatrix::zeros(1);
            m.set(0, 0, uxx);
            out[i] = m;
        } else {
            let yp = grid.neighbor(i, 0, 1).expect("interior stencil");
            let ym = grid.neighbor(i, 0, -1).expect("interior stencil");
            let uyy = (u.get(yp) - u.get(i) - u.get(i) + u.get(ym)) / (h[1] * h[1]);
            let pp = grid.neighbor(i, 1, 1).expect("interior stencil");
            let mm = grid.neighbor(i, -1, -1).expect("interior stencil");
            let pm = grid.neighbor(i, 1, -1).expect("interior stencil");
            let mp = grid.neighbor(i, -1, 1).expect("interior stencil");
            let uxy = (u.get(pp) + u.get(mm) - u.get(pm) - u.get(mp))
                / (real::<T>(4.0) * h[0] * h[1]);
            out[i] = SymMatrix::sym2(uxx, uxy, uyy);
        }
    }
    out
}

/// Hessian spectrum of a radial function: phi'/r with multiplicity n-1, plus
/// phi''.
pub fn radial_hessian_spectrum<T: Real>(
    phi_prime: T,
    phi_second: T,
    r: T,
    n: usize,
) -> Result<Vec<T>> {
    if !(r > T::zero()) {
        return Err(Error::Domain(format!("radial spectrum needs r > 0, got {r}")));
    }
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let mut spec = vec![phi_prime / r; n - 1];
    spec.push(phi_second);
    Ok(spec)
}

/// Which extremal operator a monotone upwind term feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremalSide {
    Plus,
    Minus,
}

/// Discretization of the gradient inside the quadratic term.
///
/// Centered differences are second order; the monotone variant takes
/// max(d+, d-, 0) per axis, which keeps the scheme comparison-compatible on
/// under-resolved profiles at the cost of one order of accuracy. Branch
/// tracing deep into the blow-up sheet needs the monotone form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadScheme {
    #[default]
    Centered,
    MonotoneUpwind,
}

/// Per-axis gradient feeding the quadratic term under the chosen scheme.
/// The monotone form returns nonnegative magnitudes (diagonal matrix fields
/// only see the squares, so the sign loss is harmless there).
pub fn quadratic_gradient<T: Real>(
    u: &GridFunction<T>,
    idx: usize,
    scheme: QuadScheme,
) -> [T; 2] {
    let grid = u.grid();
    let h = grid.spacing();
    let mut out = [T::zero(); 2];
    for axis in 0..grid.dim() {
        let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
        let plus = grid.neighbor(idx, di, dj).expect("interior stencil");
        let minus = grid.neighbor(idx, -di, -dj).expect("interior stencil");
        out[axis] = match scheme {
            QuadScheme::Centered => (u.get(plus) - u.get(minus)) / (h[axis] + h[axis]),
            QuadScheme::MonotoneUpwind => {
                let dplus = (u.get(plus) - u.get(idx)) / h[axis];
                let dminus = (u.get(minus) - u.get(idx)) / h[axis];
                dplus.max(dminus).max(T::zero())
            }
        };
    }
    out
}

/// Monotone one-sided |Du| at an interior node.
///
/// Each axis contributes `max(d+, d-, 0)` (plus side) or `min(d+, d-, 0)`
/// (minus side) of the differences away from the node; the result is the
/// Euclidean magnitude of those contributions, so the drift term `±b * |Du|`
/// keeps nonnegative off-diagonal coupling.
pub fn upwind_abs_gradient<T: Real>(u: &GridFunction<T>, idx: usize, side: ExtremalSide) -> T {
    let grid = u.grid();
    let h = grid.spacing();
    let dim = grid.dim();
    let mut sq = T::zero();
    for axis in 0..dim {
        let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
        let plus = grid.neighbor(idx, di, dj).expect("interior stencil");
        let minus = grid.neighbor(idx, -di, -dj).expect("interior stencil");
        let dplus = (u.get(plus) - u.get(idx)) / h[axis];
        let dminus = (u.get(minus) - u.get(idx)) / h[axis];
        let m = match side {
            ExtremalSide::Plus => dplus.max(dminus).max(T::zero()),
            ExtremalSide::Minus => dplus.min(dminus).min(T::zero()),
        };
        sq = sq + m * m;
    }
    sq.sqrt()
}
