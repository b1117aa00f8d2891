//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};

use crate::scalar::{lit, Real};

pub type CVector<T> = DVector<Complex<T>>;
pub type CMatrix<T> = DMatrix<Complex<T>>;

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

#[inline]
pub fn creal<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}

/// `exp(j theta)`
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Relative rank tolerance used by the orthogonalizations.
pub fn rank_tolerance<T: Real>() -> T {
    let eps = T::default_epsilon() * lit(100.0);
    let floor: T = lit(1e-10);
    if eps > floor {
        eps
    } else {
        floor
    }
}

/// `Re{x^H A x}`
pub fn quad_form<T: Real>(a: &CMatrix<T>, x: &CVector<T>) -> T {
    x.dotc(&(a * x)).re
}

/// `u u^H`
pub fn outer<T: Real>(u: &CVector<T>) -> CMatrix<T> {
    u * u.adjoint()
}

/// Orthogonal projector onto the complement of a column span.
#[derive(Debug, Clone)]
pub struct OrthProjector<T: Real> {
    pub matrix: CMatrix<T>,
    /// Numerical rank of the nulled column set.
    pub rank: usize,
    /// Set when the nulled columns were rank deficient.
    pub degraded: bool,
}

/// Orthonormal basis for the column span of `cols`, with rank revealed by SVD
/// at `rank_tolerance() * sigma_max`.
pub fn column_basis<T: Real>(cols: &CMatrix<T>) -> CMatrix<T> {
    let n = cols.nrows();
    if cols.ncols() == 0 {
        return CMatrix::zeros(n, 0);
    }
    let svd = SVD::new(cols.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd
        .singular_values
        .iter()
        .fold(T::zero(), |m, &s| if s > m { s } else { m });
    if smax <= T::zero() {
        return CMatrix::zeros(n, 0);
    }
    let tol = rank_tolerance::<T>() * smax;
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol)
        .map(|(i, _)| i)
        .collect();
    let mut basis = CMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        basis.set_column(j, &u.column(i));
    }
    basis
}

/// `I - U_r U_r^H` for the numerically independent part of `cols` (N x c).
pub fn complement_projector<T: Real>(n: usize, cols: &CMatrix<T>) -> OrthProjector<T> {
    let basis = column_basis(cols);
    let rank = basis.ncols();
    let matrix = CMatrix::<T>::identity(n, n) - &basis * basis.adjoint();
    OrthProjector {
        matrix,
        rank,
        degraded: rank < cols.ncols(),
    }
}

/// Stacks column vectors into a matrix.
pub fn hstack<T: Real>(n: usize, cols: &[CVector<T>]) -> CMatrix<T> {
    let mut m = CMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Concatenates vectors end to end.
pub fn vstack<T: Real>(parts: &[CVector<T>]) -> CVector<T> {
    let len = parts.iter().map(|p| p.len()).sum();
    let mut out = CVector::zeros(len);
    let mut at = 0;
    for p in parts {
        out.rows_mut(at, p.len()).copy_from(p);
        at += p.len();
    }
    out
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag<T: Real>(blocks: &[CMatrix<T>]) -> CMatrix<T> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut m = CMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        m.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    m
}

/// Kronecker product `A (x) B`.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// Column-wise Kronecker (Khatri-Rao) product. Both inputs need equal column counts.
pub fn khatri_rao<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    assert_eq!(a.ncols(), b.ncols(), "Khatri-Rao needs matching column counts");
    let (ra, rb) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(ra * rb, a.ncols());
    for j in 0..a.ncols() {
        for i in 0..ra {
            let s = a[(i, j)];
            for k in 0..rb {
                out[(i * rb + k, j)] = s * b[(k, j)];
            }
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec_of<T: Real>(m: &CMatrix<T>) -> CVector<T> {
    CVector::from_column_slice(m.as_slice())
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
pub fn hermitian_eigen_desc<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(m.nrows(), order.len());
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// 2-norm condition number from singular values; infinite when singular.
pub fn condition_number<T: Real>(m: &CMatrix<T>) -> T {
    let sv = m.clone().singular_values();
    let (mut lo, mut hi) = (T::max_value().unwrap(), T::zero());
    for &s in sv.iter() {
        if s < lo {
            lo = s;
        }
        if s > hi {
            hi = s;
        }
    }
    if lo <= T::zero() {
        T::max_value().unwrap()
    } else {
        hi / lo
    }
}

/// Frobenius norm.
pub fn fro<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// `(||Q^2 - Q||_F, ||Q - Q^H||_F)`
pub fn projector_defects<T: Real>(q: &CMatrix<T>) -> (T, T) {
    (fro(&(q * q - q)), fro(&(q - q.adjoint())))
}

/// Hermitian PSD form kept in factored form `X = F F^H`, so `x^H X x` is
/// evaluated as `||F^H x||^2` without cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct GramForm<T: Real> {
    pub factor: CMatrix<T>,
}

impl<T: Real> GramForm<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            factor: CMatrix::zeros(dim, 0),
        }
    }

    /// `sum_j v_j v_j^H * scale`; zero vectors are skipped.
    pub fn from_vectors(vectors: &[CVector<T>], dim: usize, scale: T) -> Self {
        let s = creal(scale.sqrt());
        let kept: Vec<CVector<T>> = vectors
            .iter()
            .filter(|v| v.norm_squared() > T::zero())
            .map(|v| v * s)
            .collect();
        Self {
            factor: hstack(dim, &kept),
        }
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// `x^H X x`
    pub fn eval(&self, x: &CVector<T>) -> T {
        if self.factor.ncols() == 0 {
            return T::zero();
        }
        (self.factor.adjoint() * x).norm_squared()
    }

    pub fn matrix(&self) -> CMatrix<T> {
        &self.factor * self.factor.adjoint()
    }

    /// `Q^H X Q`
    pub fn sandwich(&self, q: &CMatrix<T>) -> Self {
        Self {
            factor: q.adjoint() * &self.factor,
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            factor: &self.factor * creal(s.sqrt()),
        }
    }
}

/// Real symmetric embedding of a Hermitian matrix acting on `[Re x; Im x]`.
pub fn real_embedding<T: Real>(a: &CMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
            out[(n + i, n + j)] = z.re;
        }
    }
    out
}

/// `[Re x; Im x]`
pub fn real_stack<T: Real>(x: &CVector<T>) -> DVector<T> {
    let n = x.len();
    DVector::from_fn(2 * n, |i, _| if i < n { x[i].re } else { x[i - n].im })
}

/// Inverse of [`real_stack`].
pub fn complex_unstack<T: Real>(x: &[T]) -> CVector<T> {
    let n = x.len() / 2;
    CVector::from_fn(n, |i, _| cplx(x[i], x[n + i]))
}
