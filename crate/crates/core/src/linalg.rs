//! Small linear-algebra kernels: banded LU, CSR BiCGSTAB, dense pivoted solve.

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Banded matrix in LAPACK-style column storage with room for pivoting fill-in.
///
/// Logical bandwidths are `kl` below and `ku` above the diagonal; partial
/// pivoting can widen the upper band to `ku + kl`.
pub struct Banded<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<T>,
}

impl<T: Real> Banded<T> {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            ldab,
            ab: vec![T::zero(); ldab * n],
        }
    }

    pub fn reset(&mut self) {
        self.ab.fill(T::zero());
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "entry outside band");
        self.kl + self.ku + i - j + j * self.ldab
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.ab[s] = self.ab[s] + v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    /// Solves A x = b in place with partial pivoting. Consumes the factorization.
    pub fn solve(&mut self, b: &mut [T]) -> Result<()> {
        assert_eq!(b.len(), self.n);
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let ab = &mut self.ab;
        let mut mult = vec![T::zero(); kl.max(1)];

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut piv = 0usize;
            let mut pmax = ab[kv + j * ldab].abs();
            for p in 1..=km {
                let v = ab[kv + p + j * ldab].abs();
                if v > pmax {
                    pmax = v;
                    piv = p;
                }
            }
            if pmax == T::zero() {
                return Err(Error::LinearSolve(format!("singular pivot at column {j}")));
            }
            let ju = (j + kv).min(n - 1);
            if piv != 0 {
                let jp = j + piv;
                for col in j..=ju {
                    let r1 = kv + j - col + col * ldab;
                    let r2 = kv + jp - col + col * ldab;
                    ab.swap(r1, r2);
                }
                b.swap(j, jp);
            }
            if km > 0 {
                let pivval = ab[kv + j * ldab];
                for (p, m) in mult.iter_mut().enumerate().take(km).skip(0) {
                    *m = ab[kv + p + 1 + j * ldab] / pivval;
                }
                for col in (j + 1)..=ju {
                    let f = ab[kv + j - col + col * ldab];
                    if f != T::zero() {
                        for p in 0..km {
                            let s = kv + (j + p + 1) - col + col * ldab;
                            ab[s] = ab[s] - mult[p] * f;
                        }
                    }
                }
                let bj = b[j];
                for p in 0..km {
                    b[j + p + 1] = b[j + p + 1] - mult[p] * bj;
                }
            }
        }

        for j in (0..n).rev() {
            let x = b[j] / ab[kv + j * ldab];
            b[j] = x;
            let lm = kv.min(j);
            for p in 1..=lm {
                b[j - p] = b[j - p] - ab[kv - p + j * ldab] * x;
            }
        }
        Ok(())
    }
}

/// Compressed sparse row matrix built from per-row triplets in index order.
pub struct Csr<T> {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Csr<T> {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        Csr {
            n,
            indptr,
            indices: Vec::with_capacity(nnz),
            data: Vec::with_capacity(nnz),
        }
    }

    pub fn clear(&mut self) {
        self.indptr.clear();
        self.indptr.push(0);
        self.indices.clear();
        self.data.clear();
    }

    /// Appends one row given (column, value) pairs; rows must be pushed in order.
    pub fn push_row(&mut self, entries: &[(usize, T)]) {
        for &(c, v) in entries {
            self.indices.push(c);
            self.data.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for i in 0..self.n {
            let mut acc = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc = acc + self.data[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self, out: &mut [T]) {
        for i in 0..self.n {
            let mut d = T::zero();
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[k] == i {
                    d = self.data[k];
                }
            }
            out[i] = d;
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for i in 0..a.len() {
        s = s + a[i] * b[i];
    }
    s
}

fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB. Returns the iteration count.
///
/// Convergence is on the 2-norm of the residual against `tol_abs`.
pub fn bicgstab<T: Real>(a: &Csr<T>, b: &[T], x: &mut [T], tol_abs: T, max_iter: usize) -> Result<usize> {
    let n = a.n;
    let mut diag = vec![T::zero(); n];
    a.diagonal(&mut diag);
    let eps = lit::<T>(1e-300);
    let mut inv_diag = vec![T::one(); n];
    for i in 0..n {
        let d = diag[i].abs();
        if d > eps {
            inv_diag[i] = T::one() / diag[i];
        }
    }

    let mut r = vec![T::zero(); n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm2(&r) <= tol_abs {
        return Ok(0);
    }
    let rhat = r.clone();
    let mut rho = T::one();
    let mut alpha = T::one();
    let mut omega = T::one();
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut phat = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut shat = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];

    for it in 1..=max_iter {
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() < eps {
            return Err(Error::LinearSolve("bicgstab breakdown (rho)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        for i in 0..n {
            phat[i] = inv_diag[i] * p[i];
        }
        a.matvec(&phat, &mut v);
        let denom = dot(&rhat, &v);
        if denom.abs() < eps {
            return Err(Error::LinearSolve("bicgstab breakdown (rhat.v)".into()));
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) <= tol_abs {
            for i in 0..n {
                x[i] = x[i] + alpha * phat[i];
            }
            return Ok(it);
        }
        for i in 0..n {
            shat[i] = inv_diag[i] * s[i];
        }
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt.abs() < eps {
            return Err(Error::LinearSolve("bicgstab breakdown (t.t)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] = x[i] + alpha * phat[i] + omega * shat[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol_abs {
            return Ok(it);
        }
        rho = rho_new;
    }
    Err(Error::LinearSolve(format!(
        "bicgstab did not converge in {max_iter} iterations"
    )))
}

/// Dense Gaussian elimination with partial pivoting for small systems.
pub fn solve_dense<T: Real>(a: &mut [T], n: usize, b: &mut [T]) -> Result<()> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    for k in 0..n {
        let mut piv = k;
        let mut pmax = a[k * n + k].abs();
        for i in (k + 1)..n {
            let v = a[i * n + k].abs();
            if v > pmax {
                pmax = v;
                piv = i;
            }
        }
        if pmax == T::zero() {
            return Err(Error::LinearSolve(format!("singular dense pivot at {k}")));
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let pv = a[k * n + k];
        for i in (k + 1)..n {
            let m = a[i * n + k] / pv;
            if m != T::zero() {
                for j in k..n {
                    a[i * n + j] = a[i * n + j] - m * a[k * n + j];
                }
                b[i] = b[i] - m * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in (k + 1)..n {
            acc = acc - a[k * n + j] * b[j];
        }
        b[k] = acc / a[k * n + k];
    }
    Ok(())
}
