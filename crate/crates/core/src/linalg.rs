//! Dense real-symmetric eigensolver and small numerical helpers.
//!
//! The solver is the classical Householder tridiagonalisation followed by
//! the implicit QL iteration. Transformations are stored transposed so
//! every inner loop runs over contiguous memory.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn from_row_major(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "data length must be n*n");
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n).map(|i| dot(self.row(i), v)).collect()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Eigen-decomposition of a real symmetric matrix.
///
/// `vectors[k]` is the normalised eigenvector of `values[k]`; values ascend.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Option<Vec<Vec<T>>>,
}

impl<T: Real> SymmetricEigen<T> {
    /// Full decomposition of a dense symmetric matrix (lower triangle is read).
    pub fn new(a: &SquareMatrix<T>) -> Result<Self> {
        Self::compute(a, true)
    }

    pub fn values_only(a: &SquareMatrix<T>) -> Result<Self> {
        Self::compute(a, false)
    }

    fn compute(a: &SquareMatrix<T>, want_vectors: bool) -> Result<Self> {
        let n = a.dim();
        if n == 0 {
            return Ok(Self { values: vec![], vectors: want_vectors.then(Vec::new) });
        }
        // u holds the transpose of the working matrix; a is symmetric so the
        // initial copy needs no transposition.
        let mut u = a.data.clone();
        for i in 0..n {
            for j in 0..i {
                u[j * n + i] = u[i * n + j];
            }
        }
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        householder(&mut u, n, &mut d, &mut e, want_vectors);
        if want_vectors {
            implicit_ql(&mut d, &mut e, Some(&mut u), n)?;
        } else {
            implicit_ql(&mut d, &mut e, None, n)?;
        }
        Ok(sort_pairs(d, want_vectors.then_some(u), n))
    }

    /// Decomposition of a symmetric tridiagonal matrix with diagonal `diag`
    /// and sub-diagonal `off` (`off.len() == diag.len() - 1`).
    pub fn tridiagonal(diag: &[T], off: &[T], want_vectors: bool) -> Result<Self> {
        let n = diag.len();
        assert!(n == 0 || off.len() + 1 == n, "off-diagonal length must be n-1");
        let mut d = diag.to_vec();
        // implicit_ql expects e[i] = T(i, i-1) with e[0] unused
        let mut e = vec![T::zero(); n];
        if n > 0 {
            e[1..].copy_from_slice(off);
        }
        let mut u = if want_vectors {
            let mut m = vec![T::zero(); n * n];
            for i in 0..n {
                m[i * n + i] = T::one();
            }
            Some(m)
        } else {
            None
        };
        implicit_ql(&mut d, &mut e, u.as_deref_mut(), n)?;
        Ok(sort_pairs(d, u, n))
    }
}

fn sort_pairs<T: Real>(d: Vec<T>, u: Option<Vec<T>>, n: usize) -> SymmetricEigen<T> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = u.map(|u| order.iter().map(|&i| u[i * n..(i + 1) * n].to_vec()).collect());
    SymmetricEigen { values, vectors }
}

/// Householder reduction to tridiagonal form. `u` is the transposed working
/// matrix; on exit (with `accumulate`) row `j` of `u` is column `j` of the
/// orthogonal transformation.
fn householder<T: Real>(u: &mut [T], n: usize, d: &mut [T], e: &mut [T], accumulate: bool) {
    // V[k][j] == u[j * n + k]
    let idx = |k: usize, j: usize| j * n + k;
    for j in 0..n {
        d[j] = u[idx(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = u[idx(i - 1, j)];
                u[idx(i, j)] = T::zero();
                u[idx(j, i)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                u[idx(j, i)] = f;
                let col = &u[j * n..j * n + n];
                g = e[j] + col[j] * f;
                for k in j + 1..i {
                    g += col[k] * d[k];
                    e[k] += col[k] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = &mut u[j * n..j * n + n];
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                col[i] = T::zero();
            }
        }
        d[i] = h;
    }

    if !accumulate {
        for j in 0..n {
            d[j] = u[idx(j, j)];
        }
        e[0] = T::zero();
        return;
    }

    for i in 0..n - 1 {
        u[idx(n - 1, i)] = u[idx(i, i)];
        u[idx(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = u[idx(k, i + 1)] / h;
            }
            for j in 0..=i {
                let (head, tail) = u.split_at_mut((i + 1) * n);
                let vi1 = &tail[..n];
                let vj = &mut head[j * n..j * n + n];
                let g = dot(&vi1[..=i], &vj[..=i]);
                for k in 0..=i {
                    vj[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            u[idx(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = u[idx(n - 1, j)];
        u[idx(n - 1, j)] = T::zero();
    }
    u[idx(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL iteration on the tridiagonal pair `(d, e)` where `e[i]`
/// couples `i - 1` and `i`. Rotations are applied to rows of `u`.
fn implicit_ql<T: Real>(d: &mut [T], e: &mut [T], mut u: Option<&mut [T]>, n: usize) -> Result<()> {
    const MAX_SWEEPS: usize = 60;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::c(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::NoConvergence { index: l });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(u) = u.as_deref_mut() {
                        let (head, tail) = u.split_at_mut((i + 1) * n);
                        let vi = &mut head[i * n..];
                        let vi1 = &mut tail[..n];
                        for k in 0..n {
                            let hk = vi1[k];
                            vi1[k] = s * vi[k] + c * hk;
                            vi[k] = c * vi[k] - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

pub fn fit_line<T: Real>(xs: &[T], ys: &[T]) -> Option<LineFit<T>> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = T::from_usize(n)?;
    let mx = xs.iter().copied().sum::<T>() / nf;
    let my = ys.iter().copied().sum::<T>() / nf;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == T::zero() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == T::zero() {
        T::one()
    } else {
        let mut ss_res = T::zero();
        for (&x, &y) in xs.iter().zip(ys) {
            let r = y - (slope * x + intercept);
            ss_res += r * r;
        }
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    };
    Some(LineFit { slope, intercept, r_squared })
}

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / T::c(2.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Cyclic Jacobi rotations: slow, independent reference.
    fn jacobi_eigenvalues(a: &SquareMatrix<f64>) -> Vec<f64> {
        let n = a.dim();
        let mut m = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += m.get(p, q).powi(2);
                }
            }
            if off < 1e-28 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = m.get(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m.get(k, p);
                        let mkq = m.get(k, q);
                        m.set(k, p, c * mkp - s * mkq);
                        m.set(k, q, s * mkp + c * mkq);
                    }
                    for k in 0..n {
                        let mpk = m.get(p, k);
                        let mqk = m.get(q, k);
                        m.set(p, k, c * mpk - s * mqk);
                        m.set(q, k, s * mpk + c * mqk);
                    }
                }
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| m.get(i, i)).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    fn symmetric_from(n: usize, entries: &[f64]) -> SquareMatrix<f64> {
        let mut a = SquareMatrix::zeros(n);
        let mut it = entries.iter().cycle();
        for i in 0..n {
            for j in 0..=i {
                let v = *it.next().unwrap();
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        a
    }

    #[test]
    fn two_by_two() {
        let a = SquareMatrix::from_row_major(2, vec![2.0_f64, 1.0, 1.0, 2.0]);
        let eig = SymmetricEigen::new(&a).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_matrix_is_sorted() {
        let a = SquareMatrix::from_row_major(3, vec![3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0]);
        let eig = SymmetricEigen::new(&a).unwrap();
        assert_eq!(eig.values, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn values_only_matches_full() {
        let entries: Vec<f64> = (0..400).map(|k| ((k * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let a = symmetric_from(25, &entries);
        let full = SymmetricEigen::new(&a).unwrap();
        let vals = SymmetricEigen::values_only(&a).unwrap();
        for (x, y) in full.values.iter().zip(&vals.values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [0.3, -1.2, 0.7, 2.0, 0.1];
        let off = [0.5, -0.25, 1.0, 0.4];
        let mut a = SquareMatrix::zeros(5);
        for i in 0..5 {
            a.set(i, i, diag[i]);
        }
        for i in 0..4 {
            a.set(i + 1, i, off[i]);
            a.set(i, i + 1, off[i]);
        }
        let t = SymmetricEigen::tridiagonal(&diag, &off, true).unwrap();
        let jac = jacobi_eigenvalues(&a);
        for (x, y) in t.values.iter().zip(&jac) {
            assert!((x - y).abs() < 1e-12);
        }
        for (k, v) in t.vectors.unwrap().iter().enumerate() {
            let av = a.mul_vec(v);
            for i in 0..5 {
                assert!((av[i] - t.values[k] * v[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_precision_works() {
        let a = SquareMatrix::from_row_major(2, vec![2.0_f32, 1.0, 1.0, 2.0]);
        let eig = SymmetricEigen::new(&a).unwrap();
        assert!((eig.values[1] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0_f64, 1.0, 2.0, 3.0];
        let ys = [1.0, -1.0, -3.0, -5.0];
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn eigenpairs_have_small_residuals(n in 1usize..18, entries in prop::collection::vec(-2.0f64..2.0, 200)) {
            let a = symmetric_from(n, &entries);
            let eig = SymmetricEigen::new(&a).unwrap();
            let vecs = eig.vectors.as_ref().unwrap();
            let scale = a.norm().max(1.0);
            for (k, v) in vecs.iter().enumerate() {
                let av = a.mul_vec(v);
                let res: f64 = av.iter().zip(v).map(|(x, y)| (x - eig.values[k] * y).powi(2)).sum::<f64>().sqrt();
                prop_assert!(res <= 1e-12 * scale);
                for w in &vecs[..k] {
                    prop_assert!(dot(v, w).abs() < 1e-12);
                }
                prop_assert!((dot(v, v) - 1.0).abs() < 1e-12);
            }
            let jac = jacobi_eigenvalues(&a);
            for (x, y) in eig.values.iter().zip(&jac) {
                prop_assert!((x - y).abs() < 1e-10 * scale);
            }
        }
    }
}
