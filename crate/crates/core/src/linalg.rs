//! Small dense symmetric eigensolves and a banded LU with partial pivoting.
//!
//! The discretized Jacobians are banded (tridiagonal in 1D, bandwidth ~n in
//! 2D) and the pointwise Hessians are 1x1..3x3 symmetric matrices, so these
//! two kernels cover all linear algebra in the crate.

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense symmetric matrix of small order (pointwise Hessians, test inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    a: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            a: vec![T::zero(); n * n],
        }
    }

    pub fn from_rows(n: usize, rows: &[T]) -> Result<Self> {
        if rows.len() != n * n {
            return Err(Error::Domain(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                rows.len()
            )));
        }
        let m = SymMatrix {
            n,
            a: rows.to_vec(),
        };
        for i in 0..n {
            for j in (i + 1)..n {
                if (m.get(i, j) - m.get(j, i)).abs()
                    > crate::real::real::<T>(1e-12) * (T::one() + m.get(i, j).abs())
                {
                    return Err(Error::Domain("matrix is not symmetric".into()));
                }
            }
        }
        Ok(m)
    }

    pub fn diagonal(d: &[T]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    /// 2x2 shorthand used by the planar Hessian assembly.
    pub fn sym2(xx: T, xy: T, yy: T) -> Self {
        SymMatrix {
            n: 2,
            a: vec![xx, xy, xy, yy],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
        self.a[j * self.n + i] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: T) -> Self {
        SymMatrix {
            n: self.n,
            a: self.a.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        SymMatrix {
            n: self.n,
            a: self
                .a
                .iter()
                .zip(&other.a)
                .map(|(&x, &y)| x + y)
                .collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    /// tr(A B) for symmetric A, B of equal order.
    pub fn frobenius_product(&self, other: &Self) -> T {
        assert_eq!(self.n, other.n);
        self.a
            .iter()
            .zip(&other.a)
            .map(|(&x, &y)| x * y)
            .sum()
    }

    /// A v for a small vector.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Eigenvalues by cyclic Jacobi rotations, sorted ascending.
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        if n == 1 {
            return vec![self.a[0]];
        }
        let mut a = self.clone();
        let eps = crate::real::real::<T>(1e-30);
        for _sweep in 0..60 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a.get(p, q) * a.get(p, q);
                }
            }
            let scale: T = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
            if off <= eps * (scale + T::one()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (crate::real::two::<T>() * apq);
                    let t = if theta >= T::zero() {
                        T::one() / (theta + (T::one() + theta * theta).sqrt())
                    } else {
                        -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    // rotate rows/columns p and q
                    for k in 0..n {
                        if k != p && k != q {
                            let akp = a.get(k, p);
                            let akq = a.get(k, q);
                            a.set(k, p, c * akp - s * akq);
                            a.set(k, q, s * akp + c * akq);
                        }
                    }
                    a.set(p, p, app - t * apq);
                    a.set(q, q, aqq + t * apq);
                    a.set(p, q, T::zero());
                }
            }
        }
        let mut eigs: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
        eigs.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
        eigs
    }

    /// Eigenvalues and an orthonormal set of eigenvectors (columns), ascending.
    pub fn eigen_decomposition(&self) -> (Vec<T>, Vec<Vec<T>>) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let eps = crate::real::real::<T>(1e-30);
        for _sweep in 0..60 {
            let mut off = T::zero();
            for p in 0..n {
                for q in (p + 1)..n {
                    off = off + a.get(p, q) * a.get(p, q);
                }
            }
            let scale: T = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
            if off <= eps * (scale + T::one()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == T::zero() {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (crate::real::two::<T>() * apq);
                    let t = if theta >= T::zero() {
                        T::one() / (theta + (T::one() + theta * theta).sqrt())
                    } else {
                        -T::one() / (-theta + (T::one() + theta * theta).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        if k != p && k != q {
                            let akp = a.get(k, p);
                            let akq = a.get(k, q);
                            a.set(k, p, c * akp - s * akq);
                            a.set(k, q, s * akp + c * akq);
                        }
                    }
                    a.set(p, p, app - t * apq);
                    a.set(q, q, aqq + t * apq);
                    a.set(p, q, T::zero());
                    // accumulate rotations; v is not symmetric, update raw storage
                    for k in 0..n {
                        let vkp = v.a[k * n + p];
                        let vkq = v.a[k * n + q];
                        v.a[k * n + p] = c * vkp - s * vkq;
                        v.a[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        let diag: Vec<T> = (0..n).map(|i| a.get(i, i)).collect();
        order.sort_by(|&x, &y| diag[x].partial_cmp(&diag[y]).expect("finite"));
        let eigs = order.iter().map(|&i| diag[i]).collect();
        let vecs = order
            .iter()
            .map(|&col| (0..n).map(|row| v.a[row * n + col]).collect())
            .collect();
        (eigs, vecs)
    }
}

/// Banded matrix in LAPACK-style column storage with room for pivot fill.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    /// column-major, ldab = 2*kl + ku + 1
    ab: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ab: vec![T::zero(); ldab * n],
        }
    }

    #[inline]
    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // row offset within column j
        let r = self.kl + self.ku + i - j;
        r + j * self.ldab()
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i + self.ku >= j && j + self.kl >= i
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let k = self.idx(i, j);
        self.ab[k] = self.ab[k] + v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            T::zero()
        }
    }

    /// y = A x against the original (unfactored) band.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                y[i] = y[i] + self.get(i, j) * x[j];
            }
        }
        y
    }

    /// In-place LU with partial pivoting (unblocked banded factorization).
    pub fn factor(mut self) -> Result<BandLu<T>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let ldab = self.ldab();
        let diag = kl + ku; // row offset of the diagonal within a column
        let mut ipiv = vec![0usize; n];
        let ab = &mut self.ab;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot among rows j..j+km (offsets diag..diag+km in column j)
            let mut jp = 0usize;
            let mut best = ab[diag + j * ldab].abs();
            for k in 1..=km {
                let v = ab[diag + k + j * ldab].abs();
                if v > best {
                    best = v;
                    jp = k;
                }
            }
            ipiv[j] = j + jp;
            if best == T::zero() {
                return Err(Error::Solver(format!(
                    "banded LU: exactly singular at column {j}"
                )));
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let r1 = diag + j - c;
                    let r2 = diag + j + jp - c;
                    ab.swap(r1 + c * ldab, r2 + c * ldab);
                }
            }
            if km > 0 {
                let piv = ab[diag + j * ldab];
                for k in 1..=km {
                    let e = ab[diag + k + j * ldab] / piv;
                    ab[diag + k + j * ldab] = e;
                }
                for c in (j + 1)..=ju {
                    let upper = ab[diag + j - c + c * ldab];
                    if upper != T::zero() {
                        for k in 1..=km {
                            let l = ab[diag + k + j * ldab];
                            let t = diag + j + k - c + c * ldab;
                            ab[t] = ab[t] - l * upper;
                        }
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ab: self.ab,
            ipiv,
        })
    }
}

/// Factorized band; solves share the factorization.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<T>,
    ipiv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        assert_eq!(rhs.len(), self.n);
        let mut b = rhs.to_vec();
        let ldab = 2 * self.kl + self.ku + 1;
        let diag = self.kl + self.ku;
        // forward: P and L
        for j in 0..self.n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = self.kl.min(self.n - 1 - j);
            for k in 1..=km {
                let l = self.ab[diag + k + j * ldab];
                b[j + k] = b[j + k] - l * b[j];
            }
        }
        // backward: U with effective upper bandwidth ku + kl
        let kup = self.ku + self.kl;
        for j in (0..self.n).rev() {
            b[j] = b[j] / self.ab[diag + j * ldab];
            let lo = j.saturating_sub(kup);
            for i in lo..j {
                let u = self.ab[diag + i - j + j * ldab];
                b[i] = b[i] - u * b[j];
            }
        }
        b
    }
}
