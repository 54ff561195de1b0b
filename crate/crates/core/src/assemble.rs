//! Residual and banded-Jacobian assembly for the discretized problems.
//!
//! Unknowns are the interior node values; boundary values are pinned to the
//! homogeneous Dirichlet data. The Jacobian rows linearize the active member
//! of the operator family (the semismooth/policy linearization), the upwinded
//! drift branches, and, for full problems, the quadratic gradient term.

use crate::calculus::{hessian_centered, ExtremalSide, GridFunction, QuadScheme};
use crate::linalg::{BandMatrix, SymMatrix};
use crate::mesh::Grid;
use crate::operators::{OperatorKind, OperatorSpec, ProblemSpec};
use crate::real::Real;
use std::sync::Arc;

/// What sits next to F_h[u] in the equation G(u) = 0.
pub(crate) enum Rhs<'a, T> {
    /// G = F_h[u] + f with a frozen forcing
    Fixed(&'a GridFunction<T>),
    /// G = F_h[u] + lambda c u + <M Du, Du> + h (+ optional fixed extra)
    Full {
        problem: &'a ProblemSpec<T>,
        extra: Option<&'a GridFunction<T>>,
    },
}

pub(crate) struct Assembled<T> {
    /// residual per interior unknown
    pub residual: Vec<T>,
    pub jacobian: BandMatrix<T>,
    /// hash of the active policy per interior unknown
    pub policy: Vec<u64>,
    /// largest term magnitude entering any residual row; the achievable
    /// residual is bounded below by roughly eps * scale
    pub scale: T,
}

pub(crate) struct Indexing<T> {
    pub grid: Arc<Grid<T>>,
    /// node -> unknown index (usize::MAX for non-interior)
    pub to_unknown: Vec<usize>,
    pub bandwidth: usize,
}

impl<T: Real> Indexing<T> {
    pub fn new(grid: Arc<Grid<T>>) -> Self {
        let mut to_unknown = vec![usize::MAX; grid.node_count()];
        for (k, &i) in grid.interior().iter().enumerate() {
            to_unknown[i] = k;
        }
        let bandwidth = if grid.dim() == 1 {
            1
        } else {
            grid.subdivisions() + 2
        };
        Indexing {
            grid,
            to_unknown,
            bandwidth,
        }
    }

    pub fn unknowns(&self) -> usize {
        self.grid.interior().len()
    }
}

/// Active linearization of F at one node: tr(A D^2 .) + drift + zeta.
struct ActiveRow<T> {
    a: SymMatrix<T>,
    drift: Option<[T; 2]>,
    zeta: T,
    policy: u64,
}

fn active_row<T: Real>(
    spec: &OperatorSpec<T>,
    u: &GridFunction<T>,
    hess: &SymMatrix<T>,
    idx: usize,
) -> ActiveRow<T> {
    match spec.kind() {
        OperatorKind::Linear => {
            let m = &spec.groups()[0][0];
            ActiveRow {
                a: m.coef_at(idx).clone(),
                drift: m.drift_at(idx),
                zeta: m.zeta_at(idx),
                policy: 0,
            }
        }
        OperatorKind::HjbSup | OperatorKind::Isaacs => {
            let mut best: Option<(T, usize, usize)> = None;
            for (gi, g) in spec.groups().iter().enumerate() {
                let mut worst: Option<(T, usize)> = None;
                for (mi, m) in g.iter().enumerate() {
                    let v = spec.member_value(m, u, hess, idx);
                    if worst.is_none_or(|(wv, _)| v < wv) {
                        worst = Some((v, mi));
                    }
                }
                let (wv, wm) = worst.expect("non-empty group");
                if best.is_none_or(|(bv, _, _)| wv > bv) {
                    best = Some((wv, gi, wm));
                }
            }
            let (_, gi, mi) = best.expect("non-empty family");
            let m = &spec.groups()[gi][mi];
            ActiveRow {
                a: m.coef_at(idx).clone(),
                drift: m.drift_at(idx),
                zeta: m.zeta_at(idx),
                policy: (gi as u64) << 16 | mi as u64,
            }
        }
        OperatorKind::PucciPlus | OperatorKind::PucciMinus => {
            let e = spec.ellipticity();
            let (eigs, vecs) = hess.eigen_decomposition();
            let dim = hess.order();
            let mut a = SymMatrix::zeros(dim);
            let mut policy = 0u64;
            for (k, (&ev, v)) in eigs.iter().zip(&vecs).enumerate() {
                let plus_side = spec.kind() == OperatorKind::PucciPlus;
                let w = if (ev >= T::zero()) == plus_side {
                    e.hi
                } else {
                    e.lo
                };
                if ev >= T::zero() {
                    policy |= 1 << k;
                }
                for r in 0..dim {
                    for c in r..dim {
                        a.set(r, c, a.get(r, c) + w * v[r] * v[c]);
                    }
                }
            }
            ActiveRow {
                a,
                drift: None,
                zeta: T::zero(),
                policy,
            }
        }
    }
}

pub(crate) fn assemble<T: Real>(
    indexing: &Indexing<T>,
    spec: &OperatorSpec<T>,
    u: &GridFunction<T>,
    rhs: &Rhs<'_, T>,
) -> Assembled<T> {
    let grid = &indexing.grid;
    let n = indexing.unknowns();
    let h = grid.spacing();
    let dim = grid.dim();
    let hess = hessian_centered(u);
    let mut jac = BandMatrix::zeros(n, indexing.bandwidth, indexing.bandwidth);
    let mut res = vec![T::zero(); n];
    let mut policy = vec![0u64; n];
    let mut scale = T::one();

    for (row, &i) in grid.interior().iter().enumerate() {
        // residual: F value
        let mut r = spec.value_at(u, &hess[i], i);
        scale = scale.max(r.abs());
        let active = active_row(spec, u, &hess[i], i);
        policy[row] = active.policy;

        let add = |node: usize, w: T, jac: &mut BandMatrix<T>| {
            let col = indexing.to_unknown[node];
            if col != usize::MAX {
                jac.add_to(row, col, w);
            }
        };

        // second-order part tr(A D^2 .)
        {
            let axx = active.a.get(0, 0);
            let inv_h2 = T::one() / (h[0] * h[0]);
            let xp = grid.neighbor(i, 1, 0).expect("stencil");
            let xm = grid.neighbor(i, -1, 0).expect("stencil");
            add(xp, axx * inv_h2, &mut jac);
            add(xm, axx * inv_h2, &mut jac);
            add(i, -(axx + axx) * inv_h2, &mut jac);
            if dim == 2 {
                let ayy = active.a.get(1, 1);
                let inv_k2 = T::one() / (h[1] * h[1]);
                let yp = grid.neighbor(i, 0, 1).expect("stencil");
                let ym = grid.neighbor(i, 0, -1).expect("stencil");
                add(yp, ayy * inv_k2, &mut jac);
                add(ym, ayy * inv_k2, &mut jac);
                add(i, -(ayy + ayy) * inv_k2, &mut jac);
                let axy = active.a.get(0, 1);
                if axy != T::zero() {
                    let w = (axy + axy) / (crate::real::real::<T>(4.0) * h[0] * h[1]);
                    add(grid.neighbor(i, 1, 1).expect("stencil"), w, &mut jac);
                    add(grid.neighbor(i, -1, -1).expect("stencil"), w, &mut jac);
                    add(grid.neighbor(i, 1, -1).expect("stencil"), -w, &mut jac);
                    add(grid.neighbor(i, -1, 1).expect("stencil"), -w, &mut jac);
                }
            }
        }

        // member drift, upwinded by drift sign
        if let Some(beta) = active.drift {
            for axis in 0..dim {
                let bk = beta[axis];
                if bk == T::zero() {
                    continue;
                }
                let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
                let fwd = grid.neighbor(i, di, dj).expect("stencil");
                let bwd = grid.neighbor(i, -di, -dj).expect("stencil");
                let inv_h = T::one() / h[axis];
                if bk > T::zero() {
                    add(fwd, bk * inv_h, &mut jac);
                    add(i, -bk * inv_h, &mut jac);
                } else {
                    add(i, bk * inv_h, &mut jac);
                    add(bwd, -bk * inv_h, &mut jac);
                }
            }
        }

        // |Du| term of the extremal kinds
        if matches!(
            spec.kind(),
            OperatorKind::PucciPlus | OperatorKind::PucciMinus
        ) {
            if let Some(bf) = spec.drift_bound() {
                let b = bf.get(i);
                if b != T::zero() {
                    let side = if spec.kind() == OperatorKind::PucciPlus {
                        ExtremalSide::Plus
                    } else {
                        ExtremalSide::Minus
                    };
                    // recompute branch data per axis
                    let mut m = [T::zero(); 2];
                    let mut branch = [0u8; 2]; // 0: inactive, 1: forward, 2: backward
                    for axis in 0..dim {
                        let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
                        let fwd = grid.neighbor(i, di, dj).expect("stencil");
                        let bwd = grid.neighbor(i, -di, -dj).expect("stencil");
                        let dplus = (u.get(fwd) - u.get(i)) / h[axis];
                        let dminus = (u.get(bwd) - u.get(i)) / h[axis];
                        match side {
                            ExtremalSide::Plus => {
                                let mk = dplus.max(dminus).max(T::zero());
                                m[axis] = mk;
                                branch[axis] = if mk == T::zero() {
                                    0
                                } else if dplus >= dminus {
                                    1
                                } else {
                                    2
                                };
                            }
                            ExtremalSide::Minus => {
                                let mk = dplus.min(dminus).min(T::zero());
                                m[axis] = mk;
                                branch[axis] = if mk == T::zero() {
                                    0
                                } else if dplus <= dminus {
                                    1
                                } else {
                                    2
                                };
                            }
                        }
                    }
                    let norm = (m[0] * m[0] + m[1] * m[1]).sqrt();
                    if norm > T::zero() {
                        let sign = match side {
                            ExtremalSide::Plus => T::one(),
                            ExtremalSide::Minus => -T::one(),
                        };
                        for axis in 0..dim {
                            if branch[axis] == 0 {
                                continue;
                            }
                            let coef = sign * b * m[axis] / norm;
                            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
                            let inv_h = T::one() / h[axis];
                            let nb = if branch[axis] == 1 {
                                grid.neighbor(i, di, dj).expect("stencil")
                            } else {
                                grid.neighbor(i, -di, -dj).expect("stencil")
                            };
                            add(nb, coef * inv_h, &mut jac);
                            add(i, -coef * inv_h, &mut jac);
                            policy[row] |= (branch[axis] as u64) << (8 + 2 * axis);
                        }
                    }
                }
            }
        }

        // zero-order parts
        let mut diag_zero = active.zeta;
        if let Some(d) = spec.zero_order_bound() {
            diag_zero = diag_zero - d.get(i);
        }
        if diag_zero != T::zero() {
            add(i, diag_zero, &mut jac);
        }

        // right-hand side
        match rhs {
            Rhs::Fixed(f) => {
                r = r + f.get(i);
                scale = scale.max(f.get(i).abs());
            }
            Rhs::Full { problem, extra } => {
                let p = problem;
                let g = crate::calculus::quadratic_gradient(u, i, p.quad_scheme);
                let quad = p.matrix.quadratic_form(i, g, dim);
                r = r + p.lambda * p.c.get(i) * u.get(i) + quad + p.h.get(i);
                scale = scale
                    .max(quad.abs())
                    .max((p.lambda * p.c.get(i) * u.get(i)).abs())
                    .max(p.h.get(i).abs());
                if let Some(x) = extra {
                    r = r + x.get(i);
                    scale = scale.max(x.get(i).abs());
                }
                // d/du of lambda c u
                add(i, p.lambda * p.c.get(i), &mut jac);
                // d/du of <M Du, Du> through the chosen gradient stencil
                let q = p.matrix.apply(i, g, dim);
                for axis in 0..dim {
                    if q[axis] == T::zero() {
                        continue;
                    }
                    let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
                    let fwd = grid.neighbor(i, di, dj).expect("stencil");
                    let bwd = grid.neighbor(i, -di, -dj).expect("stencil");
                    match p.quad_scheme {
                        QuadScheme::Centered => {
                            let w = q[axis] / h[axis];
                            add(fwd, w, &mut jac);
                            add(bwd, -w, &mut jac);
                        }
                        QuadScheme::MonotoneUpwind => {
                            // derivative through the active one-sided branch
                            let dplus = (u.get(fwd) - u.get(i)) / h[axis];
                            let dminus = (u.get(bwd) - u.get(i)) / h[axis];
                            let m = dplus.max(dminus).max(T::zero());
                            if m > T::zero() {
                                let w = (q[axis] + q[axis]) / h[axis];
                                if dplus >= dminus {
                                    add(fwd, w, &mut jac);
                                } else {
                                    add(bwd, w, &mut jac);
                                }
                                add(i, -w, &mut jac);
                            }
                        }
                    }
                }
            }
        }
        res[row] = r;
    }

    Assembled {
        residual: res,
        jacobian: jac,
        policy,
        scale,
    }
}
