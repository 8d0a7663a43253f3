//! Stage one: Galerkin spectra `σ(T, Lₙ)` and `σ(T+A, Lₙ)`, the regularity
//! probe `σₙ(z)`, and spectral-window selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, Cholesky, DenseMatrix, EigenPairs};
use crate::problems::{FormMatrices, SpaceId};

/// Imaginary parts allowed on a Hermitian spectrum.
pub const HERMITIAN_IMAG_TOL: f64 = 1e-12;

/// Orthonormality defect above which selected vectors are re-orthonormalized.
pub const REORTHONORMALIZE_TOL: f64 = 1e-10;

/// Eigenpairs of a pencil on a labelled trial space.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pairs: EigenPairs,
    space: SpaceId,
    hermitian: bool,
}

impl Spectrum {
    pub(crate) fn new(pairs: EigenPairs, space: SpaceId, hermitian: bool) -> Self {
        Self {
            pairs,
            space,
            hermitian,
        }
    }

    pub fn pairs(&self) -> &EigenPairs {
        &self.pairs
    }

    pub fn values(&self) -> &[c64] {
        self.pairs.values()
    }

    pub fn space(&self) -> &SpaceId {
        &self.space
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Real interval `Δ = [a, b]`.
///
/// With `gamma` set the window is read in shifted-resolvent coordinates:
/// a Galerkin eigenvalue `λ` of `T` is selected when `1/(λ − γ) ∈ [a, b]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl SpectralWindow {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        Self::checked(a, b, None)
    }

    /// Window for inverse mode, given in coordinates of `(T − γ)⁻¹`.
    pub fn inverse(a: f64, b: f64, gamma: f64) -> Result<Self> {
        Self::checked(a, b, Some(gamma))
    }

    fn checked(a: f64, b: f64, gamma: Option<f64>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter(format!("window needs a < b, got [{a}, {b}]")));
        }
        if gamma.is_some_and(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter("gamma must be finite".into()));
        }
        Ok(Self { a, b, gamma })
    }

    /// Coordinate in which the window is expressed: `λ`, or `1/(λ − γ)`.
    pub fn coordinate(&self, lambda: f64) -> f64 {
        match self.gamma {
            Some(g) => 1.0 / (lambda - g),
            None => lambda,
        }
    }

    /// Closed-interval membership, endpoints included.
    pub fn contains(&self, lambda: f64) -> bool {
        let x = self.coordinate(lambda);
        self.a <= x && x <= self.b
    }

    pub fn is_inverse(&self) -> bool {
        self.gamma.is_some()
    }
}

/// `σ(T, Lₙ)`: the Hermitian pencil `(T̂, M)`.
pub fn spectrum_of_t(fm: &FormMatrices) -> Result<Spectrum> {
    let pairs = linalg::hermitian_generalized_eig(fm.t_hat(), fm.mass())?;
    Ok(Spectrum::new(pairs, fm.space().clone(), true))
}

/// Eigenvalues of `(T̂, M)` only, ascending.
pub fn eigenvalues_of_t(fm: &FormMatrices) -> Result<Vec<f64>> {
    linalg::hermitian_generalized_eigenvalues(fm.t_hat(), fm.mass())
}

/// `σ(T + A, Lₙ)`: the pencil `(T̂ + Â, M)`.
pub fn spectrum_of_t_plus_a(fm: &FormMatrices) -> Result<Spectrum> {
    let a_hat = fm.a_hat().ok_or(Error::MissingPerturbation)?;
    let pairs = linalg::general_pencil_eig(&(fm.t_hat() + a_hat), fm.mass())?;
    Ok(Spectrum::new(pairs, fm.space().clone(), false))
}

/// `σₙ(z)`: smallest singular value of `L⁻¹(T̂ + Â − zM)L⁻ᴴ`, `M = LLᴴ`.
///
/// This is the reciprocal of the norm of the compressed resolvent, and zero
/// exactly at pencil eigenvalues. Without `Â` the unperturbed pencil is used.
pub fn sigma_n(fm: &FormMatrices, z: c64) -> Result<f64> {
    let chol = Cholesky::factor(fm.mass())?;
    let mut op = fm.t_hat().clone();
    if let Some(a) = fm.a_hat() {
        op = &op + a;
    }
    let whitened = chol.whiten(&op);
    let n = fm.dim();
    let shifted = DenseMatrix::from_fn(n, n, |i, j| {
        let v = whitened.get(i, j);
        if i == j {
            v - z
        } else {
            v
        }
    })?;
    linalg::smallest_singular_value(&shifted)
}

/// Eigenpairs of a Hermitian spectrum lying in a window.
#[derive(Clone, Debug)]
pub struct WindowSelection {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// M-orthonormal coefficient vectors, one column per selected pair.
    pub vectors: DenseMatrix,
    pub reorthonormalized: bool,
}

impl WindowSelection {
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    /// Selected values in window coordinates.
    pub fn window_values(&self, window: &SpectralWindow) -> Vec<f64> {
        self.values.iter().map(|&v| window.coordinate(v)).collect()
    }
}

/// Orthonormality defect `‖VᴴMV − I‖_F`.
pub fn orthonormality_defect(vectors: &DenseMatrix, mass: &DenseMatrix) -> f64 {
    let k = vectors.cols();
    if k == 0 {
        return 0.0;
    }
    let gram = &(&vectors.adjoint() * mass) * vectors;
    (&gram - &DenseMatrix::identity(k)).frobenius_norm()
}

/// Selects the eigenpairs of a Hermitian spectrum inside `window`.
///
/// An empty selection is a valid result. In inverse mode `γ` must lie below
/// every Galerkin eigenvalue.
pub fn select_window(spec: &Spectrum, mass: &DenseMatrix, window: &SpectralWindow) -> Result<WindowSelection> {
    if !spec.is_hermitian() {
        return Err(Error::InvalidParameter(
            "window selection needs a Hermitian spectrum".into(),
        ));
    }
    let values = spec.pairs().real_values();
    if let Some(gamma) = window.gamma {
        if values.first().is_some_and(|&min| gamma >= min) {
            return Err(Error::ShiftNotBelowSpectrum { gamma });
        }
    }
    let indices: Vec<usize> = (0..values.len()).filter(|&k| window.contains(values[k])).collect();
    let mut vectors = spec.pairs().vectors().select_columns(&indices);
    let mut reorthonormalized = false;
    if orthonormality_defect(&vectors, mass) > REORTHONORMALIZE_TOL {
        vectors = linalg::orthonormalize(&vectors, mass, 1e-8)?;
        reorthonormalized = true;
    }
    Ok(WindowSelection {
        values: indices.iter().map(|&k| values[k]).collect(),
        indices,
        vectors,
        reorthonormalized,
    })
}
