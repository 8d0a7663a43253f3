//! Dense complex linear algebra: Cholesky whitening, Hermitian and general
//! pencil eigendecompositions, smallest singular values.
//!
//! Matrices are stored column-major (the layout of the backing `faer::Mat`).
//! All routines are pure functions of their arguments.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use faer::linalg::triangular_solve;
use faer::{Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

pub use faer::c64;

/// Dense complex matrix, column-major.
///
/// Entries are finite and the row count is positive. A zero column count is
/// permitted so that empty bases (a rank-zero projection) have a
/// representation.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    inner: Mat<c64>,
}

impl DenseMatrix {
    /// Wraps a faer matrix after checking the construction invariants.
    pub fn new(mat: Mat<c64>) -> Result<Self> {
        if mat.nrows() == 0 {
            return Err(Error::InvalidParameter("matrix must have at least one row".into()));
        }
        for j in 0..mat.ncols() {
            for i in 0..mat.nrows() {
                let z = mat[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self { inner: mat })
    }

    /// Unchecked construction for matrices produced by the kernels themselves.
    pub(crate) fn from_mat(mat: Mat<c64>) -> Self {
        Self { inner: mat }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> c64) -> Result<Self> {
        Self::new(Mat::from_fn(rows, cols, f))
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[c64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "row-major entry list",
                expected: rows * cols,
                found: entries.len(),
            });
        }
        Self::from_fn(rows, cols, |i, j| entries[i * cols + j])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { c64::new(diag[i], 0.0) } else { c64::ZERO })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_mat(Mat::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_mat(Mat::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> c64 {
        self.inner[(row, col)]
    }

    pub fn as_mat(&self) -> MatRef<'_, c64> {
        self.inner.as_ref()
    }

    pub fn into_mat(self) -> Mat<c64> {
        self.inner
    }

    pub fn column(&self, j: usize) -> Vec<c64> {
        (0..self.rows()).map(|i| self.inner[(i, j)]).collect()
    }

    /// Entries listed row by row.
    pub fn to_row_major(&self) -> Vec<c64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_mat(self.inner.adjoint().to_owned())
    }

    pub fn scale(&self, s: c64) -> Self {
        Self::from_mat(Mat::from_fn(self.rows(), self.cols(), |i, j| self.inner[(i, j)] * s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm_l2()
    }

    /// Relative Hermitian defect `‖A − Aᴴ‖_F / ‖A‖_F` (absolute when `A = 0`).
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += (self.inner[(i, j)] - self.inner[(j, i)].conj()).norm_sqr();
            }
        }
        let norm = self.frobenius_norm();
        if norm > 0.0 {
            acc.sqrt() / norm
        } else {
            acc.sqrt()
        }
    }

    /// Selects columns by index.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        Self::from_mat(Mat::from_fn(self.rows(), columns.len(), |i, k| self.inner[(i, columns[k])]))
    }

    /// Returns `(A + Aᴴ)/2`.
    pub(crate) fn hermitian_part(&self) -> Self {
        let n = self.rows();
        Self::from_mat(Mat::from_fn(n, n, |i, j| (self.inner[(i, j)] + self.inner[(j, i)].conj()) * 0.5))
    }

    pub(crate) fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.cols()).all(|j| {
                (0..self.rows()).all(|i| {
                    let expected = if i == j { c64::ONE } else { c64::ZERO };
                    self.inner[(i, j)] == expected
                })
            })
    }
}

impl<'a> Mul<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product dimension mismatch");
        DenseMatrix::from_mat(&self.inner * &rhs.inner)
    }
}

impl<'a> Add<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows(), self.cols()), (rhs.rows(), rhs.cols()));
        DenseMatrix::from_mat(&self.inner + &rhs.inner)
    }
}

impl<'a> Sub<&'a DenseMatrix> for &'a DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &'a DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows(), self.cols()), (rhs.rows(), rhs.cols()));
        DenseMatrix::from_mat(&self.inner - &rhs.inner)
    }
}

/// Eigenvalues with eigenvector columns and per-pair residuals
/// `‖Av − zBv‖ / ‖v‖_B`.
#[derive(Clone, Debug)]
pub struct EigenPairs {
    values: Vec<c64>,
    vectors: DenseMatrix,
    residual_norms: Vec<f64>,
}

impl EigenPairs {
    pub fn values(&self) -> &[c64] {
        &self.values
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn residual_norms(&self) -> &[f64] {
        &self.residual_norms
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_norms.iter().copied().fold(0.0, f64::max)
    }

    /// Real parts of the eigenvalues.
    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }
}

/// Cholesky factor `B = L Lᴴ` of a Hermitian positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Mat<c64>,
    identity: bool,
}

impl Cholesky {
    pub fn factor(b: &DenseMatrix) -> Result<Self> {
        if !b.is_square() {
            return Err(Error::DimensionMismatch {
                context: "cholesky (columns)",
                expected: b.rows(),
                found: b.cols(),
            });
        }
        if b.is_identity() {
            return Ok(Self {
                lower: Mat::identity(b.rows(), b.rows()),
                identity: true,
            });
        }
        match b.as_mat().llt(Side::Lower) {
            Ok(llt) => Ok(Self {
                lower: llt.L().to_owned(),
                identity: false,
            }),
            Err(faer::linalg::solvers::LltError::NonPositivePivot { index }) => {
                Err(Error::NotPositiveDefinite { pivot: index })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> DenseMatrix {
        DenseMatrix::from_mat(self.lower.clone())
    }

    /// Solves `L X = rhs` in place.
    fn solve_lower(&self, rhs: &mut Mat<c64>) {
        if !self.identity {
            triangular_solve::solve_lower_triangular_in_place(self.lower.as_ref(), rhs.as_mut(), Par::Seq);
        }
    }

    /// Solves `Lᴴ X = rhs` in place.
    fn solve_upper_adjoint(&self, rhs: &mut Mat<c64>) {
        if !self.identity {
            triangular_solve::solve_upper_triangular_in_place(self.lower.adjoint(), rhs.as_mut(), Par::Seq);
        }
    }

    /// `L⁻¹ A L⁻ᴴ`.
    pub fn whiten(&self, a: &DenseMatrix) -> DenseMatrix {
        if self.identity {
            return a.clone();
        }
        let mut x = a.as_mat().to_owned();
        self.solve_lower(&mut x);
        let mut y = x.adjoint().to_owned();
        self.solve_lower(&mut y);
        DenseMatrix::from_mat(y.adjoint().to_owned())
    }

    /// `L⁻ᴴ Y`: maps whitened coordinates back to pencil coordinates.
    pub fn unwhiten(&self, y: &DenseMatrix) -> DenseMatrix {
        let mut x = y.as_mat().to_owned();
        self.solve_upper_adjoint(&mut x);
        DenseMatrix::from_mat(x)
    }
}

fn check_pencil(a: &DenseMatrix, b: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "pencil matrix A (columns)",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    if b.rows() != a.rows() || b.cols() != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "pencil matrix B",
            expected: a.rows(),
            found: b.rows().max(b.cols()),
        });
    }
    Ok(())
}

const HERMITIAN_INPUT_TOL: f64 = 1e-10;

fn check_hermitian(m: &DenseMatrix) -> Result<()> {
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_INPUT_TOL {
        return Err(Error::NotHermitian { defect });
    }
    Ok(())
}

/// Lexicographic order on (real part, imaginary part).
pub fn cmp_re_im(x: &c64, y: &c64) -> Ordering {
    x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im))
}

fn residuals(a: &DenseMatrix, b: &DenseMatrix, values: &[c64], vectors: &DenseMatrix) -> Vec<f64> {
    let av = &a.inner * &vectors.inner;
    let bv = &b.inner * &vectors.inner;
    (0..values.len())
        .map(|k| {
            let mut num = 0.0;
            let mut bnorm = c64::ZERO;
            for i in 0..a.rows() {
                num += (av[(i, k)] - values[k] * bv[(i, k)]).norm_sqr();
                bnorm += vectors.inner[(i, k)].conj() * bv[(i, k)];
            }
            let denom = bnorm.re.max(0.0).sqrt();
            if denom > 0.0 {
                num.sqrt() / denom
            } else {
                num.sqrt()
            }
        })
        .collect()
}

/// Solves `A v = λ B v` for Hermitian `A` and Hermitian positive-definite `B`.
///
/// Eigenvalues are real and ascending, eigenvectors are B-orthonormal.
pub fn hermitian_generalized_eig(a: &DenseMatrix, b: &DenseMatrix) -> Result<EigenPairs> {
    check_pencil(a, b)?;
    check_hermitian(a)?;
    check_hermitian(b)?;
    let chol = Cholesky::factor(b)?;
    let c = chol.whiten(a).hermitian_part();
    let evd = c
        .as_mat()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence {
            operation: "hermitian eigensolver",
            dim: a.rows(),
        })?;
    let s = evd.S().column_vector();
    let values: Vec<c64> = (0..a.rows()).map(|k| c64::new(s[k].re, 0.0)).collect();
    let vectors = chol.unwhiten(&DenseMatrix::from_mat(evd.U().to_owned()));
    let residual_norms = residuals(a, b, &values, &vectors);
    Ok(EigenPairs {
        values,
        vectors,
        residual_norms,
    })
}

/// Eigenvalues only of the Hermitian pencil, ascending.
pub fn hermitian_generalized_eigenvalues(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    check_pencil(a, b)?;
    check_hermitian(a)?;
    check_hermitian(b)?;
    let chol = Cholesky::factor(b)?;
    let c = chol.whiten(a).hermitian_part();
    let mut values = c
        .as_mat()
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| Error::NoConvergence {
            operation: "hermitian eigensolver",
            dim: a.rows(),
        })?;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Solves the (possibly non-Hermitian) pencil `A v = z B v` with `B`
/// Hermitian positive-definite, via the standard problem `L⁻¹ A L⁻ᴴ`.
///
/// Eigenvalues are ordered by real part, then imaginary part; eigenvectors
/// have unit B-norm.
pub fn general_pencil_eig(a: &DenseMatrix, b: &DenseMatrix) -> Result<EigenPairs> {
    check_pencil(a, b)?;
    check_hermitian(b)?;
    let n = a.rows();
    let chol = Cholesky::factor(b)?;
    let c = chol.whiten(a);
    let evd = c.as_mat().eigen().map_err(|_| Error::NoConvergence {
        operation: "general eigensolver",
        dim: n,
    })?;
    let s = evd.S().column_vector();
    let raw_values: Vec<c64> = (0..n).map(|k| s[k]).collect();
    let raw_vectors = chol.unwhiten(&DenseMatrix::from_mat(evd.U().to_owned()));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cmp_re_im(&raw_values[i], &raw_values[j]));
    let values: Vec<c64> = order.iter().map(|&k| raw_values[k]).collect();

    let bv = &b.inner * &raw_vectors.inner;
    let vectors = Mat::from_fn(n, n, |i, k| {
        let col = order[k];
        let mut norm = c64::ZERO;
        for r in 0..n {
            norm += raw_vectors.inner[(r, col)].conj() * bv[(r, col)];
        }
        let norm = norm.re.max(f64::MIN_POSITIVE).sqrt();
        raw_vectors.inner[(i, col)] / norm
    });
    let vectors = DenseMatrix::from_mat(vectors);
    let residual_norms = residuals(a, b, &values, &vectors);
    Ok(EigenPairs {
        values,
        vectors,
        residual_norms,
    })
}

/// Eigenvalues only of the general pencil, ordered by (real, imaginary).
pub fn general_pencil_eigenvalues(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<c64>> {
    check_pencil(a, b)?;
    check_hermitian(b)?;
    let chol = Cholesky::factor(b)?;
    let c = chol.whiten(a);
    let mut values = c.as_mat().eigenvalues().map_err(|_| Error::NoConvergence {
        operation: "general eigensolver",
        dim: a.rows(),
    })?;
    values.sort_by(cmp_re_im);
    Ok(values)
}

/// Smallest singular value of an arbitrary (possibly rectangular) matrix.
pub fn smallest_singular_value(a: &DenseMatrix) -> Result<f64> {
    if a.cols() == 0 {
        return Ok(0.0);
    }
    let sv = a.as_mat().singular_values().map_err(|_| Error::NoConvergence {
        operation: "singular value decomposition",
        dim: a.rows().max(a.cols()),
    })?;
    Ok(sv.last().copied().unwrap_or(0.0).max(0.0))
}

/// Largest singular value (operator 2-norm).
pub fn largest_singular_value(a: &DenseMatrix) -> Result<f64> {
    if a.cols() == 0 {
        return Ok(0.0);
    }
    let sv = a.as_mat().singular_values().map_err(|_| Error::NoConvergence {
        operation: "singular value decomposition",
        dim: a.rows().max(a.cols()),
    })?;
    Ok(sv.first().copied().unwrap_or(0.0))
}

/// `xᴴ M y`.
pub fn inner_product(m: &DenseMatrix, x: &[c64], y: &[c64]) -> c64 {
    let n = m.rows();
    let mut acc = c64::ZERO;
    for j in 0..n {
        if y[j] == c64::ZERO {
            continue;
        }
        let mut row = c64::ZERO;
        for i in 0..n {
            row += x[i].conj() * m.inner[(i, j)];
        }
        acc += row * y[j];
    }
    acc
}

/// `M x`.
pub fn mat_vec(m: &DenseMatrix, x: &[c64]) -> Vec<c64> {
    let mut out = vec![c64::ZERO; m.rows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == c64::ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m.inner[(i, j)] * xj;
        }
    }
    out
}

/// Modified Gram–Schmidt in the inner product `⟨x, y⟩ = yᴴ M x`, with one
/// re-orthogonalization pass. Fails if a column loses more than
/// `drop_tol` of its norm (numerical dependence).
pub fn orthonormalize(columns: &DenseMatrix, m: &DenseMatrix, drop_tol: f64) -> Result<DenseMatrix> {
    let n = columns.rows();
    let k = columns.cols();
    let mut basis: Vec<Vec<c64>> = Vec::with_capacity(k);
    let mut m_basis: Vec<Vec<c64>> = Vec::with_capacity(k);
    for j in 0..k {
        let mut v = columns.column(j);
        let original = inner_product(m, &v, &v).re.max(0.0).sqrt();
        for _pass in 0..2 {
            for (q, mq) in basis.iter().zip(&m_basis) {
                // coefficient ⟨v, q⟩ = qᴴ M v = (M q)ᴴ v
                let coeff: c64 = mq.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= coeff * qi;
                }
            }
        }
        let mv = mat_vec(m, &v);
        let norm = v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum::<c64>().re.max(0.0).sqrt();
        if original == 0.0 || norm <= drop_tol * original {
            return Err(Error::RankDeficient { column: j });
        }
        let inv = 1.0 / norm;
        v.iter_mut().for_each(|x| *x *= inv);
        basis.push(v);
        m_basis.push(mv.into_iter().map(|x| x * inv).collect());
    }
    Ok(DenseMatrix::from_mat(Mat::from_fn(n, k, |i, j| basis[j][i])))
}
