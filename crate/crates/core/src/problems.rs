//! Form-matrix generators for concrete operators.
//!
//! * `FourierRankOne`: `Tφ = a(x)φ + 10⟨φ,ψ₀⟩ψ₀` on `L²(−π,π)` with the
//!   piecewise linear symbol `a(x) = −2π − x` on `(−π,0]`, `2π − x` on
//!   `(0,π]`, discretized on `span{ψ_k : |k| ≤ n}` with the orthonormal
//!   Fourier basis `ψ_k = e^{−ikx}/√(2π)`. Level `n` is the half-width.
//! * `BlockFem`: the block operator `[[−d²/dx², −d/dx], [d/dx, 2]]` on
//!   `L²(0,1) ⊕ L²(0,1)`, Dirichlet conditions in the first component only,
//!   discretized with P1 elements on a uniform mesh. Level `N` is the number
//!   of elements (`h = 1/N`).
//! * `SyntheticDense`: `T̂ = Uᴴ Λ U` with a seeded unitary `U`; level `d`
//!   restricts to the first `d` coordinates.

use std::f64::consts::PI;

use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, Cholesky, DenseMatrix};

/// Relative Hermitian tolerance enforced on every form matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Label of a trial space: the problem family and its nesting index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceId {
    pub label: String,
    pub level: usize,
}

impl SpaceId {
    pub fn new(label: impl Into<String>, level: usize) -> Self {
        Self {
            label: label.into(),
            level,
        }
    }
}

impl std::fmt::Display for SpaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.label, self.level)
    }
}

/// Matrices of the forms restricted to a trial space: `t̂_ij = t(φ_j, φ_i)`,
/// `m_ij = ⟨φ_j, φ_i⟩` and optionally `â_ij = ⟨Aφ_j, φ_i⟩`.
#[derive(Clone, Debug)]
pub struct FormMatrices {
    t_hat: DenseMatrix,
    mass: DenseMatrix,
    a_hat: Option<DenseMatrix>,
    space: SpaceId,
}

impl FormMatrices {
    /// Validates dimensions, Hermiticity of `t_hat` and `mass`, and
    /// positive-definiteness of `mass`.
    pub fn new(
        t_hat: DenseMatrix,
        mass: DenseMatrix,
        a_hat: Option<DenseMatrix>,
        space: SpaceId,
    ) -> Result<Self> {
        let n = t_hat.rows();
        for (context, m) in [("t_hat", &t_hat), ("mass", &mass)]
            .into_iter()
            .chain(a_hat.iter().map(|a| ("a_hat", a)))
        {
            if m.rows() != n || m.cols() != n {
                return Err(Error::DimensionMismatch {
                    context,
                    expected: n,
                    found: if m.rows() != n { m.rows() } else { m.cols() },
                });
            }
        }
        let defect = t_hat.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let defect = mass.hermitian_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Cholesky::factor(&mass)?;
        Ok(Self {
            t_hat,
            mass,
            a_hat,
            space,
        })
    }

    pub fn dim(&self) -> usize {
        self.t_hat.rows()
    }

    pub fn t_hat(&self) -> &DenseMatrix {
        &self.t_hat
    }

    pub fn mass(&self) -> &DenseMatrix {
        &self.mass
    }

    pub fn a_hat(&self) -> Option<&DenseMatrix> {
        self.a_hat.as_ref()
    }

    pub fn space(&self) -> &SpaceId {
        &self.space
    }

    /// Returns a copy carrying the perturbation block `â`.
    pub fn with_perturbation(&self, a_hat: DenseMatrix) -> Result<Self> {
        Self::new(self.t_hat.clone(), self.mass.clone(), Some(a_hat), self.space.clone())
    }

    /// Spectral condition number of the mass matrix.
    pub fn mass_condition_number(&self) -> Result<f64> {
        let vals = linalg::hermitian_generalized_eigenvalues(&self.mass, &DenseMatrix::identity(self.dim()))?;
        Ok(vals[vals.len() - 1] / vals[0])
    }

    /// Forms on the span of the first `k` basis functions.
    pub fn leading(&self, k: usize, space: SpaceId) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::InvalidParameter(format!(
                "leading block size {k} outside 1..={}",
                self.dim()
            )));
        }
        let block = |m: &DenseMatrix| DenseMatrix::from_fn(k, k, |i, j| m.get(i, j));
        let a_hat = self.a_hat.as_ref().map(block).transpose()?;
        Self::new(block(&self.t_hat)?, block(&self.mass)?, a_hat, space)
    }

    /// Restricts the forms to the span of the columns of `basis`
    /// (`Bᴴ T̂ B`, `Bᴴ M B`, `Bᴴ Â B`).
    pub fn restrict(&self, basis: &DenseMatrix, space: SpaceId) -> Result<Self> {
        if basis.rows() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "restriction basis",
                expected: self.dim(),
                found: basis.rows(),
            });
        }
        let bh = basis.adjoint();
        let sandwich = |m: &DenseMatrix| (&(&bh * m) * basis).hermitian_part();
        let a_hat = self.a_hat.as_ref().map(|a| &(&bh * a) * basis);
        Self::new(sandwich(&self.t_hat), sandwich(&self.mass), a_hat, space)
    }
}

/// Problem families with their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    FourierRankOne,
    BlockFem,
    SyntheticDense { eigenvalues: Vec<f64>, seed: u64 },
}

impl ProblemSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemSpec::FourierRankOne => "fourier_rank_one",
            ProblemSpec::BlockFem => "block_fem",
            ProblemSpec::SyntheticDense { .. } => "synthetic_dense",
        }
    }

    /// Dimension of the trial space at `level`.
    pub fn dim(&self, level: usize) -> usize {
        match self {
            ProblemSpec::FourierRankOne => 2 * level + 1,
            ProblemSpec::BlockFem => 2 * level,
            ProblemSpec::SyntheticDense { .. } => level,
        }
    }

    pub fn validate_level(&self, level: usize) -> Result<()> {
        match self {
            ProblemSpec::FourierRankOne if level < 1 => {
                Err(Error::InvalidParameter("Fourier half-width must be at least 1".into()))
            }
            ProblemSpec::BlockFem if level < 2 => {
                Err(Error::InvalidParameter("FEM mesh needs at least 2 elements".into()))
            }
            ProblemSpec::SyntheticDense { eigenvalues, .. } => {
                if eigenvalues.is_empty() || eigenvalues.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "synthetic eigenvalues must be a non-empty list of finite reals".into(),
                    ));
                }
                if level < 1 || level > eigenvalues.len() {
                    return Err(Error::InvalidParameter(format!(
                        "synthetic level {level} outside 1..={}",
                        eigenvalues.len()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Largest meaningful level for the synthetic family (its full dimension).
    pub fn full_level(&self) -> Option<usize> {
        match self {
            ProblemSpec::SyntheticDense { eigenvalues, .. } => Some(eigenvalues.len()),
            _ => None,
        }
    }
}

/// Assembles the form matrices of `problem` on the trial space at `level`.
pub fn assemble(problem: &ProblemSpec, level: usize) -> Result<FormMatrices> {
    problem.validate_level(level)?;
    let space = SpaceId::new(problem.label(), level);
    let (t_hat, mass) = match problem {
        ProblemSpec::FourierRankOne => (fourier_t_hat(level), DenseMatrix::identity(2 * level + 1)),
        ProblemSpec::BlockFem => fem_matrices(level),
        ProblemSpec::SyntheticDense { eigenvalues, seed } => {
            let full = synthetic_full_matrix(eigenvalues, *seed)?;
            let idx: Vec<usize> = (0..level).collect();
            let t = DenseMatrix::from_mat(Mat::from_fn(level, level, |i, j| full.get(idx[i], idx[j])));
            (t.hermitian_part(), DenseMatrix::identity(level))
        }
    };
    FormMatrices::new(t_hat, mass, None, space)
}

/// `(1/2π) ∫_{−π}^{π} a(x) e^{imx} dx` for the piecewise linear symbol.
///
/// The linear part `−x` contributes `i(−1)^m/m`; the jump part `∓2π`
/// contributes `4i/m` for odd `m` and nothing for even `m`.
pub fn fourier_symbol_coefficient(m: i64) -> c64 {
    if m == 0 {
        return c64::ZERO;
    }
    let mf = m as f64;
    if m % 2 == 0 {
        c64::new(0.0, 1.0 / mf)
    } else {
        c64::new(0.0, 3.0 / mf)
    }
}

/// Strength of the rank-one term `10⟨φ,ψ₀⟩ψ₀`.
pub const FOURIER_RANK_ONE_WEIGHT: f64 = 10.0;

fn fourier_t_hat(n: usize) -> DenseMatrix {
    let dim = 2 * n + 1;
    let zero = n;
    DenseMatrix::from_mat(Mat::from_fn(dim, dim, |l, k| {
        let mut entry = fourier_symbol_coefficient(l as i64 - k as i64);
        if l == zero && k == zero {
            entry += c64::new(FOURIER_RANK_ONE_WEIGHT, 0.0);
        }
        entry
    }))
}

/// Local P1 element matrices on an element of width `h`.
pub(crate) struct P1Element {
    pub stiffness: [[f64; 2]; 2],
    pub mass: [[f64; 2]; 2],
    /// `coupling[b][a] = ∫ φ_a φ_b'` (trial value `a`, test derivative `b`).
    pub coupling: [[f64; 2]; 2],
}

impl P1Element {
    pub(crate) fn new(h: f64) -> Self {
        Self {
            stiffness: [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]],
            mass: [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]],
            coupling: [[-0.5, -0.5], [0.5, 0.5]],
        }
    }
}

/// Degree-of-freedom layout of the block FEM space: the first component
/// uses interior nodes `1..N`, the second all nodes `0..=N`.
#[derive(Clone, Copy, Debug)]
pub struct FemLayout {
    pub elements: usize,
}

impl FemLayout {
    pub fn first(&self, node: usize) -> Option<usize> {
        (node >= 1 && node < self.elements).then(|| node - 1)
    }

    pub fn second(&self, node: usize) -> usize {
        self.elements - 1 + node
    }

    pub fn dim(&self) -> usize {
        2 * self.elements
    }
}

fn fem_matrices(elements: usize) -> (DenseMatrix, DenseMatrix) {
    let layout = FemLayout { elements };
    let dim = layout.dim();
    let h = 1.0 / elements as f64;
    let el = P1Element::new(h);
    let mut t = Mat::<c64>::zeros(dim, dim);
    let mut m = Mat::<c64>::zeros(dim, dim);
    let add = |mat: &mut Mat<c64>, i: usize, j: usize, v: f64| mat[(i, j)] += c64::new(v, 0.0);
    for e in 0..elements {
        let nodes = [e, e + 1];
        for a in 0..2 {
            for b in 0..2 {
                // first component: ⟨u₁′, v₁′⟩ and mass
                if let (Some(i), Some(j)) = (layout.first(nodes[b]), layout.first(nodes[a])) {
                    add(&mut t, i, j, el.stiffness[b][a]);
                    add(&mut m, i, j, el.mass[b][a]);
                }
                // second component: 2⟨u₂, v₂⟩ and mass
                let (i2, j2) = (layout.second(nodes[b]), layout.second(nodes[a]));
                add(&mut t, i2, j2, 2.0 * el.mass[b][a]);
                add(&mut m, i2, j2, el.mass[b][a]);
                // coupling: ⟨u₂, v₁′⟩ and its adjoint ⟨u₁′, v₂⟩
                if let Some(i) = layout.first(nodes[b]) {
                    let j = layout.second(nodes[a]);
                    add(&mut t, i, j, el.coupling[b][a]);
                    add(&mut t, j, i, el.coupling[b][a]);
                }
            }
        }
    }
    (DenseMatrix::from_mat(t), DenseMatrix::from_mat(m))
}

/// Seeded Haar-like unitary: Gram–Schmidt on a complex Gaussian matrix.
pub fn seeded_unitary(dim: usize, seed: u64) -> Result<DenseMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DenseMatrix::from_mat(Mat::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        c64::new(re, im)
    }));
    linalg::orthonormalize(&raw, &DenseMatrix::identity(dim), 1e-8)
}

/// Full synthetic matrix `Uᴴ Λ U`.
fn synthetic_full_matrix(eigenvalues: &[f64], seed: u64) -> Result<DenseMatrix> {
    let n = eigenvalues.len();
    let u = seeded_unitary(n, seed)?;
    let lambda_u = DenseMatrix::from_mat(Mat::from_fn(n, n, |i, j| u.get(i, j) * eigenvalues[i]));
    Ok((&u.adjoint() * &lambda_u).hermitian_part())
}

/// Exact eigenvectors of the full synthetic matrix: column `j` belongs to
/// `eigenvalues[j]`.
pub fn synthetic_eigenbasis(problem: &ProblemSpec) -> Result<DenseMatrix> {
    match problem {
        ProblemSpec::SyntheticDense { eigenvalues, seed } => {
            Ok(seeded_unitary(eigenvalues.len(), *seed)?.adjoint())
        }
        _ => Err(Error::InvalidParameter(
            "exact eigenbasis is only available for synthetic problems".into(),
        )),
    }
}

/// Pair of nested trial spaces with the coefficient embedding `coarse → fine`.
#[derive(Clone, Debug)]
pub struct NestedSpaces {
    pub coarse_level: usize,
    pub fine_level: usize,
    pub embedding: DenseMatrix,
}

impl NestedSpaces {
    pub fn coarse_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn fine_dim(&self) -> usize {
        self.embedding.rows()
    }

    /// Fine-space coefficients of coarse coefficient vectors (columns).
    pub fn lift(&self, coarse: &DenseMatrix) -> DenseMatrix {
        &self.embedding * coarse
    }
}

/// Embedding of the coarse trial space into the fine one.
pub fn embed(problem: &ProblemSpec, coarse: usize, fine: usize) -> Result<NestedSpaces> {
    problem.validate_level(coarse)?;
    problem.validate_level(fine)?;
    let embedding = match problem {
        ProblemSpec::FourierRankOne | ProblemSpec::SyntheticDense { .. } => {
            if coarse > fine {
                return Err(Error::NotNested(format!(
                    "coarse level {coarse} exceeds fine level {fine}"
                )));
            }
            let offset = match problem {
                ProblemSpec::FourierRankOne => fine - coarse,
                _ => 0,
            };
            let (cd, fd) = (problem.dim(coarse), problem.dim(fine));
            DenseMatrix::from_mat(Mat::from_fn(fd, cd, |i, j| {
                if i == j + offset {
                    c64::ONE
                } else {
                    c64::ZERO
                }
            }))
        }
        ProblemSpec::BlockFem => {
            if fine % coarse != 0 {
                return Err(Error::NotNested(format!(
                    "fine mesh with {fine} elements does not refine the mesh with {coarse} elements"
                )));
            }
            let ratio = fine / coarse;
            let (cl, fl) = (FemLayout { elements: coarse }, FemLayout { elements: fine });
            let mut e = Mat::<c64>::zeros(fl.dim(), cl.dim());
            let hat = |c: usize, f: usize| {
                let dist = (f as f64 - (c * ratio) as f64).abs();
                (1.0 - dist / ratio as f64).max(0.0)
            };
            for c in 0..=coarse {
                let lo = (c * ratio).saturating_sub(ratio);
                let hi = (c * ratio + ratio).min(fine);
                for f in lo..=hi {
                    let w = hat(c, f);
                    if w == 0.0 {
                        continue;
                    }
                    if let (Some(j), Some(i)) = (cl.first(c), fl.first(f)) {
                        e[(i, j)] = c64::new(w, 0.0);
                    }
                    e[(fl.second(f), cl.second(c))] = c64::new(w, 0.0);
                }
            }
            DenseMatrix::from_mat(e)
        }
    };
    Ok(NestedSpaces {
        coarse_level: coarse,
        fine_level: fine,
        embedding,
    })
}

/// Cross-space form matrices between two block FEM meshes of any sizes.
///
/// Returns `(X_M, X_T)` with rows indexed by the fine basis (test) and
/// columns by the coarse basis (trial): `X_M[i][j] = ⟨ψ_j, φ_i⟩` and
/// `X_T[i][j] = t(ψ_j, φ_i)`. Integrals run over the merged breakpoints of
/// both meshes, where every integrand is a polynomial of degree at most two,
/// so Simpson's rule is exact.
pub fn fem_cross_forms(coarse: usize, fine: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let problem = ProblemSpec::BlockFem;
    problem.validate_level(coarse)?;
    problem.validate_level(fine)?;
    let (cl, fl) = (FemLayout { elements: coarse }, FemLayout { elements: fine });
    let mut mass = Mat::<c64>::zeros(fl.dim(), cl.dim());
    let mut form = Mat::<c64>::zeros(fl.dim(), cl.dim());
    // breakpoints in units of 1/(coarse·fine)
    let units = (coarse * fine) as f64;
    let mut pts: Vec<usize> = (0..=coarse)
        .map(|k| k * fine)
        .chain((0..=fine).map(|l| l * coarse))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    let (hc, hf) = (1.0 / coarse as f64, 1.0 / fine as f64);
    for w in pts.windows(2) {
        let (x0, x1) = (w[0] as f64 / units, w[1] as f64 / units);
        let len = x1 - x0;
        let ec = (w[0] + w[1]) / (2 * fine);
        let ef = (w[0] + w[1]) / (2 * coarse);
        let nodes = [x0, 0.5 * (x0 + x1), x1];
        let weights = [len / 6.0, 4.0 * len / 6.0, len / 6.0];
        let hat = |left: f64, h: f64, side: usize, x: f64| {
            if side == 0 {
                (left + h - x) / h
            } else {
                (x - left) / h
            }
        };
        let slope = |h: f64, side: usize| if side == 0 { -1.0 / h } else { 1.0 / h };
        for sc in 0..2 {
            for sf in 0..2 {
                let (cnode, fnode) = (ec + sc, ef + sf);
                let (xc, xf) = (ec as f64 * hc, ef as f64 * hf);
                let (dc, df) = (slope(hc, sc), slope(hf, sf));
                let mut pp = 0.0;
                let mut int_c = 0.0;
                let mut int_f = 0.0;
                for (x, wt) in nodes.iter().zip(weights) {
                    let (vc, vf) = (hat(xc, hc, sc, *x), hat(xf, hf, sf, *x));
                    pp += wt * vc * vf;
                    int_c += wt * vc;
                    int_f += wt * vf;
                }
                let add = |mat: &mut Mat<c64>, i: usize, j: usize, v: f64| mat[(i, j)] += c64::new(v, 0.0);
                if let (Some(i), Some(j)) = (fl.first(fnode), cl.first(cnode)) {
                    add(&mut form, i, j, len * dc * df);
                    add(&mut mass, i, j, pp);
                }
                let (i2, j2) = (fl.second(fnode), cl.second(cnode));
                add(&mut form, i2, j2, 2.0 * pp);
                add(&mut mass, i2, j2, pp);
                if let Some(i) = fl.first(fnode) {
                    add(&mut form, i, j2, df * int_c);
                }
                if let Some(j) = cl.first(cnode) {
                    add(&mut form, i2, j, dc * int_f);
                }
            }
        }
    }
    Ok((DenseMatrix::from_mat(mass), DenseMatrix::from_mat(form)))
}

/// Known discrete spectrum of a problem and its essential spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceSpectrum {
    /// `(eigenvalue, multiplicity)`, ascending.
    pub discrete: Vec<(f64, usize)>,
    /// Closed intervals (degenerate for points).
    pub essential: Vec<(f64, f64)>,
}

/// Eigenvalues of the Fourier problem (8 significant digits).
pub const FOURIER_LAMBDA_1: f64 = -1.64834270;
pub const FOURIER_LAMBDA_2: f64 = 11.97518502;

/// `λ_k^± = (2 + k²π² ± √((k²π² + 2)² − 4k²π²)) / 2` for the block operator.
pub fn block_fem_eigenvalue(k: usize, upper: bool) -> f64 {
    let kp2 = (k as f64 * PI).powi(2);
    let root = ((kp2 + 2.0).powi(2) - 4.0 * kp2).sqrt();
    if upper {
        (2.0 + kp2 + root) / 2.0
    } else {
        // stable form of the smaller root: λ⁻ λ⁺ = k²π²
        2.0 * kp2 / (2.0 + kp2 + root)
    }
}

/// Number of `λ_k^±` pairs listed for the block problem.
pub const BLOCK_FEM_REFERENCE_PAIRS: usize = 10;

pub fn reference_spectrum(problem: &ProblemSpec) -> ReferenceSpectrum {
    match problem {
        ProblemSpec::FourierRankOne => ReferenceSpectrum {
            discrete: vec![(FOURIER_LAMBDA_1, 1), (FOURIER_LAMBDA_2, 1)],
            essential: vec![(-2.0 * PI, -PI), (PI, 2.0 * PI)],
        },
        ProblemSpec::BlockFem => {
            let mut discrete: Vec<(f64, usize)> = (1..=BLOCK_FEM_REFERENCE_PAIRS)
                .flat_map(|k| [(block_fem_eigenvalue(k, false), 1), (block_fem_eigenvalue(k, true), 1)])
                .collect();
            discrete.push((2.0, 1));
            discrete.sort_by(|a, b| a.0.total_cmp(&b.0));
            ReferenceSpectrum {
                discrete,
                essential: vec![(1.0, 1.0)],
            }
        }
        ProblemSpec::SyntheticDense { eigenvalues, .. } => {
            let mut sorted = eigenvalues.clone();
            sorted.sort_by(f64::total_cmp);
            let mut discrete: Vec<(f64, usize)> = Vec::new();
            for v in sorted {
                match discrete.last_mut() {
                    Some((last, mult)) if *last == v => *mult += 1,
                    _ => discrete.push((v, 1)),
                }
            }
            ReferenceSpectrum {
                discrete,
                essential: Vec::new(),
            }
        }
    }
}
