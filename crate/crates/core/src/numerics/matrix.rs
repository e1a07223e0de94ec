//! Dense complex matrices in row-major order with the few factorizations the
//! rest of the crate needs: Hermitian Cholesky solves, a cyclic Jacobi
//! eigendecomposition for Hermitian matrices, and a spectral (pseudo-)inverse.

use num_complex::Complex64;

use super::NumericsError;

/// Relative pivot floor below which a Cholesky pivot is treated as not
/// positive definite.
const PIVOT_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn hermitian_transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn matmul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matmul dimension mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..rhs.cols {
                    *out.at_mut(i, j) += a * rhs.at(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..self.cols {
                    acc += self.at(i, j) * v[j];
                }
                acc
            })
            .collect()
    }

    pub fn add_assign_mat(&mut self, rhs: &CMat) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    pub fn add_scaled_mat(&mut self, rhs: &CMat, s: f64) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b * s;
        }
    }

    /// `self += s * u * u^H`
    pub fn add_outer_scaled(&mut self, u: &[Complex64], s: f64) {
        assert_eq!(self.rows, u.len());
        assert_eq!(self.cols, u.len());
        for i in 0..self.rows {
            let ui = u[i] * s;
            for j in 0..self.cols {
                *self.at_mut(i, j) += ui * u[j].conj();
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.data.iter_mut() {
            *a *= s;
        }
    }

    /// `a^H * self * b`
    pub fn quad(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let mb = self.mul_vec(b);
        hdot(a, &mb)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.frobenius_norm().max(f64::MIN_POSITIVE);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if (self.at(i, j) - self.at(j, i).conj()).norm() > rel_tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// Hermitian inner product `a^H b`.
pub fn hdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x.conj() * y)
        .sum()
}

/// Squared Euclidean norm.
pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Lower Cholesky factor `L` of a Hermitian positive-definite matrix,
/// `A = L L^H`. Fails with `NotPositiveDefinite` when a pivot drops below
/// `1e-14` times the largest diagonal entry.
pub fn cholesky(a: &CMat) -> Result<CMat, NumericsError> {
    assert_eq!(a.rows(), a.cols(), "cholesky needs a square matrix");
    let n = a.rows();
    let max_diag = (0..n)
        .map(|i| a.at(i, i).re)
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = a.at(j, j).re;
        for k in 0..j {
            d -= l.at(j, k).norm_sqr();
        }
        if d <= PIVOT_REL_TOL * max_diag {
            return Err(NumericsError::NotPositiveDefinite { row: j, pivot: d });
        }
        let ljj = d.sqrt();
        *l.at_mut(j, j) = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = a.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k).conj();
            }
            *l.at_mut(i, j) = s / ljj;
        }
    }
    Ok(l)
}

fn solve_with_factor(l: &CMat, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.rows();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            let lk = l.at(i, k) * y[k];
            y[i] -= lk;
        }
        y[i] /= l.at(i, i).re;
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lk = l.at(k, i).conj() * y[k];
            y[i] -= lk;
        }
        y[i] /= l.at(i, i).re;
    }
    y
}

/// Solves `A X = B` for Hermitian positive-definite `A` via Cholesky.
pub fn hermitian_solve(a: &CMat, b: &CMat) -> Result<CMat, NumericsError> {
    if a.rows() != b.rows() {
        return Err(NumericsError::DimensionMismatch(format!(
            "A is {}x{} but B has {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    let l = cholesky(a)?;
    let n = a.rows();
    let mut x = CMat::zeros(n, b.cols());
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..b.cols() {
        for i in 0..n {
            col[i] = b.at(i, j);
        }
        let sol = solve_with_factor(&l, &col);
        for i in 0..n {
            *x.at_mut(i, j) = sol[i];
        }
    }
    Ok(x)
}

/// Solves `A x = b` for a single right-hand side.
pub fn hermitian_solve_vec(a: &CMat, b: &[Complex64]) -> Result<Vec<Complex64>, NumericsError> {
    if a.rows() != b.len() {
        return Err(NumericsError::DimensionMismatch(format!(
            "A is {}x{} but b has {} entries",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let l = cholesky(a)?;
    Ok(solve_with_factor(&l, b))
}

/// Eigendecomposition of a Hermitian matrix: `A = V diag(values) V^H` with
/// real eigenvalues in ascending order and orthonormal columns in `vectors`.
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

/// Cyclic Jacobi iteration. Intended for the small Hermitian matrices used
/// throughout this crate; cost is O(n^3) per sweep with ~10 sweeps.
pub fn eigh(a: &CMat) -> Eigh {
    assert_eq!(a.rows(), a.cols(), "eigh needs a square matrix");
    debug_assert!(a.is_hermitian(1e-10), "eigh input must be Hermitian");
    let n = a.rows();
    let mut m = a.clone();
    let mut v = CMat::identity(n);
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.at(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at(p, q);
                let mag = apq.norm();
                if mag <= 1e-300 {
                    continue;
                }
                let phase = apq / mag;
                let app = m.at(p, p).re;
                let aqq = m.at(q, q).re;
                let tau = (aqq - app) / (2.0 * mag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let su = phase * s; // G[p][q]
                let suc = phase.conj() * s; // -G[q][p]

                // columns p, q of M (apply G on the right)
                for i in 0..n {
                    let mip = m.at(i, p);
                    let miq = m.at(i, q);
                    *m.at_mut(i, p) = mip * c - miq * suc;
                    *m.at_mut(i, q) = mip * su + miq * c;
                }
                // rows p, q of M (apply G^H on the left)
                for j in 0..n {
                    let mpj = m.at(p, j);
                    let mqj = m.at(q, j);
                    *m.at_mut(p, j) = mpj * c - mqj * su;
                    *m.at_mut(q, j) = mpj * suc + mqj * c;
                }
                // force the rotated pair to exact Hermitian form
                let dpq = m.at(p, q);
                let dqp = m.at(q, p);
                let avg = (dpq + dqp.conj()) * 0.5;
                *m.at_mut(p, q) = avg;
                *m.at_mut(q, p) = avg.conj();
                *m.at_mut(p, p) = Complex64::new(m.at(p, p).re, 0.0);
                *m.at_mut(q, q) = Complex64::new(m.at(q, q).re, 0.0);

                // accumulate eigenvectors
                for i in 0..n {
                    let vip = v.at(i, p);
                    let viq = v.at(i, q);
                    *v.at_mut(i, p) = vip * c - viq * suc;
                    *v.at_mut(i, q) = vip * su + viq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.at(i, i).re.partial_cmp(&m.at(j, j).re).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.at(i, i).re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| v.at(i, order[j]));
    Eigh { values, vectors }
}

/// Spectral inverse of a Hermitian PSD matrix. Uses the plain inverse when
/// the matrix is well conditioned and a pseudo-inverse (eigenvalues below
/// `1e-12` of the largest are zeroed) when the condition number exceeds
/// `1e12` or an eigenvalue is non-positive.
pub struct SpectralInverse {
    vectors: CMat,
    inverted: Vec<f64>,
    pub pseudo: bool,
}

impl SpectralInverse {
    pub fn new(a: &CMat) -> SpectralInverse {
        let eig = eigh(a);
        let lambda_max = eig.values.iter().cloned().fold(0.0f64, f64::max);
        let lambda_min = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let pseudo = lambda_max <= 0.0 || lambda_min <= 0.0 || lambda_max / lambda_min > 1e12;
        let cut = 1e-12 * lambda_max.max(f64::MIN_POSITIVE);
        let inverted = eig
            .values
            .iter()
            .map(|&lam| {
                if pseudo {
                    if lam > cut {
                        1.0 / lam
                    } else {
                        0.0
                    }
                } else {
                    1.0 / lam
                }
            })
            .collect();
        SpectralInverse {
            vectors: eig.vectors,
            inverted,
            pseudo,
        }
    }

    /// `v^H A^+ v` (real and non-negative for PSD input).
    pub fn quad(&self, v: &[Complex64]) -> f64 {
        let n = self.vectors.rows();
        let mut acc = 0.0;
        for j in 0..n {
            let mut proj = Complex64::new(0.0, 0.0);
            for i in 0..n {
                proj += self.vectors.at(i, j).conj() * v[i];
            }
            acc += self.inverted[j] * proj.norm_sqr();
        }
        acc
    }
}
