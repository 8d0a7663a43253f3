//! Stage two: the dissipative perturbation `T + iQ`.
//!
//! `Q` is the H-orthogonal projection onto stage-one eigenvectors lifted into
//! a finer trial space. Eigenvalues of `T + iQ` near `λ + i` identify genuine
//! eigenvalues `λ` of `T`; real-axis artefacts of stage one (spectral
//! pollution) have no such partner.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::galerkin::Spectrum;
use crate::linalg::{self, c64, Cholesky, DenseMatrix};
use crate::problems::{embed, fem_cross_forms, FormMatrices, NestedSpaces, ProblemSpec};

/// Slack on the numerical range `Im z ∈ [0, 1]` of `T + iQ`.
pub const NUMERICAL_RANGE_TOL: f64 = 1e-8;

/// Default split between eigenvalues near `λ + i` and real-axis artefacts.
pub const DEFAULT_IM_THRESHOLD: f64 = 0.5;

/// Upper bound on the automatically chosen cluster radius.
pub const MAX_DEFAULT_RADIUS: f64 = 0.45;

/// Relative drop in norm at which lifted vectors count as dependent.
const DEPENDENCE_TOL: f64 = 1e-8;

/// Orthogonal projection `Q` onto the span of stage-one eigenvectors `u_k`,
/// compressed to a fine trial space.
///
/// Stored through its action on the fine basis: `W[i][k] = ⟨u_k, φ_i⟩`,
/// `V[i][k] = t(u_k, φ_i)` and the small Gram matrix `t(u_l, u_k)`. The
/// `u_k` are orthonormal in H, so `G = W Wᴴ` with `G_ij = ⟨Qφ_j, φ_i⟩`.
#[derive(Clone, Debug)]
pub struct ProjectionQ {
    coeffs: Option<DenseMatrix>,
    mass_images: DenseMatrix,
    form_images: DenseMatrix,
    form_gram: DenseMatrix,
    gram_block: DenseMatrix,
}

impl ProjectionQ {
    fn assemble(
        coeffs: Option<DenseMatrix>,
        mass_images: DenseMatrix,
        form_images: DenseMatrix,
        form_gram: DenseMatrix,
    ) -> Self {
        let gram_block = (&mass_images * &mass_images.adjoint()).hermitian_part();
        Self {
            coeffs,
            mass_images,
            form_images,
            form_gram: form_gram.hermitian_part(),
            gram_block,
        }
    }

    /// Builds `Q` from fine-space coefficient columns, re-orthonormalized in
    /// the `M` inner product.
    pub fn from_coefficients(columns: &DenseMatrix, fine: &FormMatrices) -> Result<Self> {
        if columns.rows() != fine.dim() {
            return Err(Error::DimensionMismatch {
                context: "projection coefficients",
                expected: fine.dim(),
                found: columns.rows(),
            });
        }
        if columns.cols() == 0 {
            return Ok(Self::zero(fine.dim()));
        }
        let coeffs = linalg::orthonormalize(columns, fine.mass(), DEPENDENCE_TOL)?;
        let w = fine.mass() * &coeffs;
        let v = fine.t_hat() * &coeffs;
        let gram = &coeffs.adjoint() * &v;
        Ok(Self::assemble(Some(coeffs), w, v, gram))
    }

    /// Builds `Q` from coarse coefficient columns through cross-space form
    /// matrices (`fine × coarse`), for trial spaces that are not nested.
    pub fn from_cross_forms(
        coarse_vectors: &DenseMatrix,
        coarse: &FormMatrices,
        cross_mass: &DenseMatrix,
        cross_form: &DenseMatrix,
    ) -> Result<Self> {
        if coarse_vectors.rows() != coarse.dim() || cross_mass.cols() != coarse.dim() {
            return Err(Error::DimensionMismatch {
                context: "coarse eigenvectors",
                expected: coarse.dim(),
                found: coarse_vectors.rows(),
            });
        }
        if cross_form.rows() != cross_mass.rows() || cross_form.cols() != cross_mass.cols() {
            return Err(Error::DimensionMismatch {
                context: "cross-space form matrices",
                expected: cross_mass.rows(),
                found: cross_form.rows(),
            });
        }
        if coarse_vectors.cols() == 0 {
            return Ok(Self::zero(cross_mass.rows()));
        }
        let u = linalg::orthonormalize(coarse_vectors, coarse.mass(), DEPENDENCE_TOL)?;
        let gram = &(&u.adjoint() * coarse.t_hat()) * &u;
        Ok(Self::assemble(None, cross_mass * &u, cross_form * &u, gram))
    }

    /// The zero projection on an `n`-dimensional space.
    pub fn zero(n: usize) -> Self {
        Self {
            coeffs: Some(DenseMatrix::zeros(n, 0)),
            mass_images: DenseMatrix::zeros(n, 0),
            form_images: DenseMatrix::zeros(n, 0),
            form_gram: DenseMatrix::zeros(1, 0),
            gram_block: DenseMatrix::zeros(n, n),
        }
    }

    /// Fine-space coefficients of the `u_k`, when they lie in the fine space.
    pub fn coeffs(&self) -> Option<&DenseMatrix> {
        self.coeffs.as_ref()
    }

    pub fn gram_block(&self) -> &DenseMatrix {
        &self.gram_block
    }

    /// `⟨u_k, φ_i⟩` for every fine basis function.
    pub fn mass_images(&self) -> &DenseMatrix {
        &self.mass_images
    }

    pub fn rank(&self) -> usize {
        self.mass_images.cols()
    }

    pub fn dim(&self) -> usize {
        self.mass_images.rows()
    }
}

/// Lifts M-orthonormal coarse eigenvectors into the fine space and builds `Q`.
pub fn build_projection(
    coarse_vectors: &DenseMatrix,
    nesting: &NestedSpaces,
    fine: &FormMatrices,
) -> Result<ProjectionQ> {
    if coarse_vectors.rows() != nesting.coarse_dim() {
        return Err(Error::DimensionMismatch {
            context: "coarse eigenvectors",
            expected: nesting.coarse_dim(),
            found: coarse_vectors.rows(),
        });
    }
    if nesting.fine_dim() != fine.dim() {
        return Err(Error::DimensionMismatch {
            context: "fine space",
            expected: nesting.fine_dim(),
            found: fine.dim(),
        });
    }
    if coarse_vectors.cols() == 0 {
        return Ok(ProjectionQ::zero(fine.dim()));
    }
    ProjectionQ::from_coefficients(&nesting.lift(coarse_vectors), fine)
}

/// Builds `Q` for any pair of levels of `problem`: through the embedding when
/// the spaces are nested, otherwise through cross-space forms (block FEM).
pub fn project_between(
    problem: &ProblemSpec,
    coarse: &FormMatrices,
    coarse_vectors: &DenseMatrix,
    fine: &FormMatrices,
) -> Result<ProjectionQ> {
    let (cl, fl) = (coarse.space().level, fine.space().level);
    match embed(problem, cl, fl) {
        Ok(nesting) => build_projection(coarse_vectors, &nesting, fine),
        Err(Error::NotNested(_)) if matches!(problem, ProblemSpec::BlockFem) => {
            let (xm, xt) = fem_cross_forms(cl, fl)?;
            ProjectionQ::from_cross_forms(coarse_vectors, coarse, &xm, &xt)
        }
        Err(e) => Err(e),
    }
}

fn check_projection_dims(fine: &FormMatrices, q: &ProjectionQ) -> Result<()> {
    if q.dim() != fine.dim() {
        return Err(Error::DimensionMismatch {
            context: "projection Q",
            expected: fine.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

fn dissipative_matrix(fine: &FormMatrices, q: &ProjectionQ) -> DenseMatrix {
    fine.t_hat() + &q.gram_block().scale(c64::new(0.0, 1.0))
}

/// `σ(T + iQ, Lₙ)`: eigenpairs of `(T̂ + iG, M)`.
pub fn dissipative_spectrum(fine: &FormMatrices, q: &ProjectionQ) -> Result<Spectrum> {
    check_projection_dims(fine, q)?;
    let pairs = linalg::general_pencil_eig(&dissipative_matrix(fine, q), fine.mass())?;
    Ok(Spectrum::new(pairs, fine.space().clone(), false))
}

/// Eigenvalues only of `(T̂ + iG, M)`.
pub fn dissipative_eigenvalues(fine: &FormMatrices, q: &ProjectionQ) -> Result<Vec<c64>> {
    check_projection_dims(fine, q)?;
    linalg::general_pencil_eigenvalues(&dissipative_matrix(fine, q), fine.mass())
}

/// Result of the inverse-mode pencil.
///
/// `resolvent` holds the values `w ∈ σ((T − γ)⁻¹ + iQ, L̂ₙ)`; the eigenvalues
/// `z` of the form problem `(t − γ)(x,y) − iz Σ … − z⟨x,y⟩ = 0` are `1/w`.
#[derive(Clone, Debug)]
pub struct InverseSpectrum {
    pub resolvent: Spectrum,
    pub gamma: f64,
}

impl InverseSpectrum {
    /// The `z`-values of the form problem (`∞` where `w = 0`).
    pub fn z_values(&self) -> Vec<c64> {
        self.resolvent
            .values()
            .iter()
            .map(|w| {
                if w.norm() == 0.0 {
                    c64::new(f64::INFINITY, 0.0)
                } else {
                    c64::ONE / w
                }
            })
            .collect()
    }

    pub fn w_values(&self) -> &[c64] {
        self.resolvent.values()
    }
}

/// Builds `A₁ = T̂ − γM` and `R = Σ_j v_j v_jᴴ / d_j` with `v_j = (t − γ)(u_j, ·)`
/// and `d_j = (t − γ)[u_j]`, the `u_j` taken `(t − γ)`-orthogonal within
/// their span.
fn inverse_pencil(fine: &FormMatrices, q: &ProjectionQ, gamma: f64) -> Result<(DenseMatrix, DenseMatrix)> {
    check_projection_dims(fine, q)?;
    let shift = c64::new(gamma, 0.0);
    let shifted = fine.t_hat() - &fine.mass().scale(shift);
    match Cholesky::factor(&shifted) {
        Ok(_) => {}
        Err(Error::NotPositiveDefinite { .. }) => return Err(Error::ShiftNotBelowSpectrum { gamma }),
        Err(e) => return Err(e),
    }
    let n = fine.dim();
    let r = if q.rank() == 0 {
        DenseMatrix::zeros(n, n)
    } else {
        // (t − γ)(u_l, u_k) = Uᴴ T̂ U − γ I, diagonalized to orthogonalize the u_j
        let k = q.rank();
        let d = &q.form_gram - &DenseMatrix::identity(k).scale(shift);
        let eig = linalg::hermitian_generalized_eig(&d, &DenseMatrix::identity(k))?;
        let weights = eig.real_values();
        if weights.first().is_some_and(|&w| w <= 0.0) {
            return Err(Error::ShiftNotBelowSpectrum { gamma });
        }
        let v = &(&q.form_images - &q.mass_images.scale(shift)) * eig.vectors();
        let scaled = DenseMatrix::from_fn(n, k, |i, j| v.get(i, j) / weights[j].sqrt())?;
        (&scaled * &scaled.adjoint()).hermitian_part()
    };
    let b = fine.mass() + &r.scale(c64::new(0.0, 1.0));
    Ok((shifted, b))
}

/// Inverse-mode stage two: solves `A₁x = z(M + iR)x` through the equivalent
/// pencil `(M + iR)x = w A₁x`, `w = 1/z`, whose right-hand matrix is
/// Hermitian positive-definite.
pub fn inverse_dissipative_spectrum(fine: &FormMatrices, q: &ProjectionQ, gamma: f64) -> Result<InverseSpectrum> {
    let (a1, b) = inverse_pencil(fine, q, gamma)?;
    let pairs = linalg::general_pencil_eig(&b, &a1)?;
    Ok(InverseSpectrum {
        resolvent: Spectrum::new(pairs, fine.space().clone(), false),
        gamma,
    })
}

/// `w`-values only of the inverse-mode pencil.
pub fn inverse_dissipative_eigenvalues(fine: &FormMatrices, q: &ProjectionQ, gamma: f64) -> Result<Vec<c64>> {
    let (a1, b) = inverse_pencil(fine, q, gamma)?;
    linalg::general_pencil_eigenvalues(&b, &a1)
}

/// Closed real interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.lo - tol <= x && x <= self.hi + tol
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Encloses an eigenvalue of `T` from an eigenvalue `z` of `T + iQ`.
///
/// Without a window the enclosure is `Re z ± √(Im z (1 − Im z))`. When
/// `(a, b)` is declared to contain exactly one eigenvalue of `T`, the
/// sharper interval `(Re z − p/(b − Re z), Re z + p/(Re z − a))`,
/// `p = Im z (1 − Im z)`, is returned whenever it fits inside `(a, b)`.
pub fn localize(z: c64, window: Option<(f64, f64)>) -> Result<Interval> {
    if !(z.im >= -NUMERICAL_RANGE_TOL && z.im <= 1.0 + NUMERICAL_RANGE_TOL) {
        return Err(Error::OutsideNumericalRange { im: z.im });
    }
    let im = z.im.clamp(0.0, 1.0);
    let p = im * (1.0 - im);
    if let Some((a, b)) = window {
        if a < z.re && z.re < b {
            let lo = z.re - p / (b - z.re);
            let hi = z.re + p / (z.re - a);
            if a < lo && hi < b {
                return Ok(Interval { lo, hi });
            }
        }
    }
    let r = p.sqrt();
    Ok(Interval {
        lo: z.re - r,
        hi: z.re + r,
    })
}

/// Clustering parameters.
#[derive(Clone, Copy, Debug)]
pub struct ClusterOptions {
    /// Disk radius around each `λ + i`; `None` picks half the minimal target
    /// separation, capped at [`MAX_DEFAULT_RADIUS`].
    pub radius: Option<f64>,
    pub im_threshold: f64,
    /// Optional `(a, b)` holding exactly one eigenvalue, for the sharper
    /// localization interval.
    pub window: Option<(f64, f64)>,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            radius: None,
            im_threshold: DEFAULT_IM_THRESHOLD,
            window: None,
        }
    }
}

/// Eigenvalues of `T + iQ` grouped around one target `λ + i`, or a single
/// unexpected non-real eigenvalue (`target = None`).
#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    #[serde(serialize_with = "ser_opt_complex")]
    pub target: Option<c64>,
    pub members: Vec<usize>,
    pub multiplicity: usize,
    /// Arithmetic mean of the members.
    #[serde(serialize_with = "ser_opt_complex")]
    pub mean: Option<c64>,
    pub localization: Option<Interval>,
}

fn ser_opt_complex<S: serde::Serializer>(z: &Option<c64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match z {
        Some(z) => [z.re, z.im].serialize(s),
        None => s.serialize_none(),
    }
}

/// Partition of a dissipative spectrum into target clusters and the rest.
#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub clusters: Vec<Cluster>,
    /// Indices with `Im z` below the threshold.
    pub unassigned: Vec<usize>,
    /// Subset of `unassigned` with `0 < Im z`: suspected pollution echoes.
    pub echoes: Vec<usize>,
    pub radius: f64,
    pub im_threshold: f64,
}

impl ClusterReport {
    /// Clusters attached to a target.
    pub fn targeted(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| c.target.is_some())
    }

    /// Clusters holding a non-real eigenvalue far from every target.
    pub fn unexpected(&self) -> impl Iterator<Item = &Cluster> {
        self.clusters.iter().filter(|c| c.target.is_none())
    }

    pub fn cluster_for(&self, target: f64) -> Option<&Cluster> {
        self.clusters
            .iter()
            .find(|c| c.target.is_some_and(|t| t.re == target))
    }
}

/// Default radius for a target set.
pub fn default_radius(targets: &[f64]) -> f64 {
    let mut sorted = targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    (0.5 * min_gap).min(MAX_DEFAULT_RADIUS)
}

/// Stage-one window values with near-duplicates (within `tol`) merged.
pub fn merge_targets(values: &[f64], tol: f64) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in sorted {
        if out.last().is_none_or(|&y| x - y > tol) {
            out.push(x);
        }
    }
    out
}

/// Groups eigenvalues with `Im z ≥ im_threshold` around the targets `λ + i`.
pub fn cluster(values: &[c64], targets: &[f64], options: &ClusterOptions) -> Result<ClusterReport> {
    let radius = options.radius.unwrap_or_else(|| default_radius(targets));
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter(format!("cluster radius must be positive, got {radius}")));
    }
    for (i, &t) in targets.iter().enumerate() {
        for &s in &targets[i + 1..] {
            if (t - s).abs() < 2.0 * radius {
                return Err(Error::OverlappingTargets {
                    first: t.min(s),
                    second: t.max(s),
                    radius,
                });
            }
        }
    }
    let mut clusters: Vec<Cluster> = targets
        .iter()
        .map(|&t| Cluster {
            target: Some(c64::new(t, 1.0)),
            members: Vec::new(),
            multiplicity: 0,
            mean: None,
            localization: None,
        })
        .collect();
    let mut unexpected = Vec::new();
    let mut unassigned = Vec::new();
    let mut echoes = Vec::new();
    for (idx, z) in values.iter().enumerate() {
        if z.im < options.im_threshold {
            unassigned.push(idx);
            if z.im > NUMERICAL_RANGE_TOL {
                echoes.push(idx);
            }
            continue;
        }
        let nearest = targets
            .iter()
            .enumerate()
            .map(|(k, &t)| (k, (z - c64::new(t, 1.0)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match nearest {
            Some((k, d)) if d <= radius => clusters[k].members.push(idx),
            _ => unexpected.push(idx),
        }
    }
    for c in clusters.iter_mut() {
        c.multiplicity = c.members.len();
        if c.multiplicity > 0 {
            let mean = c.members.iter().map(|&i| values[i]).sum::<c64>() / c.multiplicity as f64;
            c.mean = Some(mean);
            c.localization = Some(localize(mean, options.window)?);
        }
    }
    for idx in unexpected {
        let z = values[idx];
        clusters.push(Cluster {
            target: None,
            members: vec![idx],
            multiplicity: 1,
            mean: Some(z),
            localization: Some(localize(z, options.window)?),
        });
    }
    Ok(ClusterReport {
        clusters,
        unassigned,
        echoes,
        radius,
        im_threshold: options.im_threshold,
    })
}

/// Classification of one stage-one eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Genuine { estimate: f64, interval: Interval },
    Polluted,
}

impl Verdict {
    pub fn is_genuine(&self) -> bool {
        matches!(self, Verdict::Genuine { .. })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PollutionEntry {
    pub value: f64,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// Absolute slack used when matching stage-one values to enclosures.
pub const DEFAULT_MATCH_TOL: f64 = 1e-8;

/// Matches stage-one window eigenvalues against the dissipative clusters.
///
/// A stage-one value is genuine when it falls inside the localization
/// interval of a non-empty target cluster (widened by `match_tol`); each
/// cluster accounts for at most `multiplicity` stage-one values, nearest
/// first. Everything else, including values explained only by unexpected
/// non-real eigenvalues, is flagged as pollution.
pub fn pollution_report(stage_one: &[f64], report: &ClusterReport, match_tol: f64) -> Vec<PollutionEntry> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ci, c) in report.clusters.iter().enumerate() {
        let (Some(_), Some(mean), Some(interval)) = (c.target, c.mean, c.localization) else {
            continue;
        };
        for (si, &mu) in stage_one.iter().enumerate() {
            if interval.contains(mu, match_tol) {
                candidates.push(((mu - mean.re).abs(), ci, si));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut capacity: Vec<usize> = report.clusters.iter().map(|c| c.multiplicity).collect();
    let mut verdicts: Vec<Verdict> = vec![Verdict::Polluted; stage_one.len()];
    for (_, ci, si) in candidates {
        if capacity[ci] == 0 || verdicts[si].is_genuine() {
            continue;
        }
        capacity[ci] -= 1;
        let c = &report.clusters[ci];
        verdicts[si] = Verdict::Genuine {
            estimate: c.mean.map(|m| m.re).unwrap_or(stage_one[si]),
            interval: c.localization.expect("cluster with members has a localization"),
        };
    }
    stage_one
        .iter()
        .zip(verdicts)
        .map(|(&value, verdict)| PollutionEntry { value, verdict })
        .collect()
}

/// Pencil eigenvalues of `(G, M)`; `{0, 1}` up to rounding for a projection.
pub fn projection_pencil_eigenvalues(q: &ProjectionQ, mass: &DenseMatrix) -> Result<Vec<f64>> {
    linalg::hermitian_generalized_eigenvalues(q.gram_block(), mass)
}

/// Exact projection onto given eigenvector columns (synthetic problems).
pub fn exact_projection(eigenvectors: &DenseMatrix, columns: &[usize], fine: &FormMatrices) -> Result<ProjectionQ> {
    ProjectionQ::from_coefficients(&eigenvectors.select_columns(columns), fine)
}

/// How stage two treats the operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `σ(T + iQ, Lₙ)`.
    #[default]
    Direct,
    /// `σ((T − γ)⁻¹ + iQ, L̂ₙ)` through the form pencil; needs `γ`.
    Inverse,
}

/// Options of a two-stage run.
#[derive(Clone, Copy, Debug)]
pub struct TwoStageOptions {
    pub mode: Mode,
    pub cluster: ClusterOptions,
    /// Compute eigenvectors of stage two and report residuals.
    pub residuals: bool,
    /// Stage-one values closer than this become one target.
    pub merge_tol: f64,
}

impl Default for TwoStageOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Direct,
            cluster: ClusterOptions::default(),
            residuals: false,
            merge_tol: 1e-9,
        }
    }
}

/// Output of a two-stage run. Stage-two values are in window coordinates:
/// `z` in direct mode, `w = 1/z` in inverse mode.
#[derive(Clone, Debug, Serialize)]
pub struct TwoStageResult {
    pub coarse_level: usize,
    pub fine_level: usize,
    /// All of `σ(T, L_coarse)`, ascending.
    pub stage_one: Vec<f64>,
    /// Selected stage-one values in window coordinates.
    pub window_values: Vec<f64>,
    pub rank: usize,
    #[serde(skip)]
    pub stage_two: Vec<c64>,
    pub residuals: Option<Vec<f64>>,
    pub clusters: ClusterReport,
    pub pollution: Vec<PollutionEntry>,
}

/// Runs stage one on the coarse level and stage two on the fine level of a
/// built-in problem.
pub fn two_stage(
    problem: &ProblemSpec,
    window: &crate::galerkin::SpectralWindow,
    coarse_level: usize,
    fine_level: usize,
    options: &TwoStageOptions,
) -> Result<TwoStageResult> {
    let coarse = crate::problems::assemble(problem, coarse_level)?;
    let fine = crate::problems::assemble(problem, fine_level)?;
    two_stage_on(&coarse, &fine, window, options, |c, v, f| project_between(problem, c, v, f))
}

/// Two-stage run on given coarse and fine forms; `project` builds `Q` on
/// the fine space from M-orthonormal coarse eigenvectors.
pub fn two_stage_on<F>(
    coarse: &FormMatrices,
    fine: &FormMatrices,
    window: &crate::galerkin::SpectralWindow,
    options: &TwoStageOptions,
    project: F,
) -> Result<TwoStageResult>
where
    F: FnOnce(&FormMatrices, &DenseMatrix, &FormMatrices) -> Result<ProjectionQ>,
{
    use crate::galerkin::{select_window, spectrum_of_t};
    let gamma = match (options.mode, window.gamma) {
        (Mode::Inverse, Some(g)) => Some(g),
        (Mode::Inverse, None) => {
            return Err(Error::InvalidParameter("inverse mode needs gamma".into()));
        }
        (Mode::Direct, Some(_)) => {
            return Err(Error::InvalidParameter("gamma is only meaningful in inverse mode".into()));
        }
        (Mode::Direct, None) => None,
    };
    let spec = spectrum_of_t(coarse)?;
    let sel = select_window(&spec, coarse.mass(), window)?;
    let q = project(coarse, &sel.vectors, fine)?;
    let (stage_two, residuals) = match (gamma, options.residuals) {
        (None, false) => (dissipative_eigenvalues(fine, &q)?, None),
        (None, true) => {
            let s = dissipative_spectrum(fine, &q)?;
            (s.values().to_vec(), Some(s.pairs().residual_norms().to_vec()))
        }
        (Some(g), false) => (inverse_dissipative_eigenvalues(fine, &q, g)?, None),
        (Some(g), true) => {
            let s = inverse_dissipative_spectrum(fine, &q, g)?;
            (s.w_values().to_vec(), Some(s.resolvent.pairs().residual_norms().to_vec()))
        }
    };
    let window_values = sel.window_values(window);
    let targets = merge_targets(&window_values, options.merge_tol);
    let clusters = cluster(&stage_two, &targets, &options.cluster)?;
    let pollution = pollution_report(&window_values, &clusters, DEFAULT_MATCH_TOL);
    Ok(TwoStageResult {
        coarse_level: coarse.space().level,
        fine_level: fine.space().level,
        stage_one: spec.pairs().real_values(),
        window_values,
        rank: q.rank(),
        stage_two,
        residuals,
        clusters,
        pollution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::spectrum_of_t;
    use crate::problems::{assemble, SpaceId};

    fn diag_forms(diag: &[f64]) -> FormMatrices {
        FormMatrices::new(
            DenseMatrix::from_real_diagonal(diag).unwrap(),
            DenseMatrix::identity(diag.len()),
            None,
            SpaceId::new("diag", diag.len()),
        )
        .unwrap()
    }

    fn unit(n: usize, k: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 1, |i, _| if i == k { c64::ONE } else { c64::ZERO }).unwrap()
    }

    #[test]
    fn single_vector_projection_gram_block() {
        let q = ProjectionQ::from_coefficients(&unit(3, 0), &diag_forms(&[1.0, 2.0, 3.0])).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((q.gram_block().get(i, j) - c64::new(expected, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn two_vectors_give_idempotent_pencil() {
        let m = DenseMatrix::from_real_diagonal(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let cols = DenseMatrix::from_fn(4, 2, |i, j| c64::new((i + 2 * j) as f64 + 0.5, (i * j) as f64)).unwrap();
        let fm = FormMatrices::new(m.clone(), m.clone(), None, SpaceId::new("weighted", 4)).unwrap();
        let q = ProjectionQ::from_coefficients(&cols, &fm).unwrap();
        let mut eig = projection_pencil_eigenvalues(&q, &m).unwrap();
        eig.sort_by(f64::total_cmp);
        let expected = [0.0, 0.0, 1.0, 1.0];
        for (a, b) in eig.iter().zip(expected) {
            assert!((a - b).abs() < 1e-8, "{eig:?}");
        }
    }

    #[test]
    fn rank_zero_projection_leaves_spectrum_unchanged() {
        let fm = diag_forms(&[-1.0, 0.5, 3.0]);
        let spec = dissipative_spectrum(&fm, &ProjectionQ::zero(3)).unwrap();
        let t = spectrum_of_t(&fm).unwrap();
        for (a, b) in spec.values().iter().zip(t.values()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn exact_projection_lifts_window_eigenvalues() {
        let fm = diag_forms(&[-2.0, 0.3, 0.7, 4.0]);
        let q = exact_projection(&DenseMatrix::identity(4), &[1, 2], &fm).unwrap();
        let vals = dissipative_eigenvalues(&fm, &q).unwrap();
        let expected = [c64::new(-2.0, 0.0), c64::new(0.3, 1.0), c64::new(0.7, 1.0), c64::new(4.0, 0.0)];
        for (a, b) in vals.iter().zip(expected) {
            assert!((a - b).norm() < 1e-12, "{vals:?}");
        }
    }

    #[test]
    fn inverse_mode_without_projection_gives_resolvent_values() {
        let fm = diag_forms(&[1.0, 2.0, 4.0]);
        let inv = inverse_dissipative_spectrum(&fm, &ProjectionQ::zero(3), 0.0).unwrap();
        let mut w: Vec<f64> = inv.w_values().iter().map(|w| w.re).collect();
        w.sort_by(f64::total_cmp);
        for (a, b) in w.iter().zip([0.25, 0.5, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut z: Vec<f64> = inv.z_values().iter().map(|z| z.re).collect();
        z.sort_by(f64::total_cmp);
        for (a, b) in z.iter().zip([1.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_mode_exact_projection() {
        let gamma = -0.5;
        let fm = diag_forms(&[1.0, 2.0, 4.0]);
        let q = exact_projection(&DenseMatrix::identity(3), &[1], &fm).unwrap();
        let w = inverse_dissipative_eigenvalues(&fm, &q, gamma).unwrap();
        let target = c64::new(1.0 / (2.0 - gamma), 1.0);
        assert!(w.iter().any(|x| (x - target).norm() < 1e-12), "{w:?}");
    }

    #[test]
    fn inverse_mode_rejects_bad_shift() {
        let fm = diag_forms(&[1.0, 2.0]);
        assert!(matches!(
            inverse_dissipative_eigenvalues(&fm, &ProjectionQ::zero(2), 1.5),
            Err(Error::ShiftNotBelowSpectrum { .. })
        ));
    }

    #[test]
    fn localize_cases() {
        let i = localize(c64::new(2.0, 1.0), None).unwrap();
        assert_eq!((i.lo, i.hi), (2.0, 2.0));
        let i = localize(c64::new(2.0, 0.5), None).unwrap();
        assert!((i.width() - 1.0).abs() < 1e-15);
        assert!(matches!(
            localize(c64::new(0.0, 1.5), None),
            Err(Error::OutsideNumericalRange { .. })
        ));
    }

    #[test]
    fn localize_refined_interval() {
        // p = 0.09: (0.3 − 0.09/0.7, 0.3 + 0.09/0.3)
        let i = localize(c64::new(0.3, 0.9), Some((0.0, 1.0))).unwrap();
        let lo = 0.3 - 0.9 * 0.1 / (1.0 - 0.3);
        assert!((i.lo - lo).abs() < 1e-15);
        assert!((i.lo - 0.171_428_571_428_571_4).abs() < 1e-12);
        assert!((i.hi - 0.6).abs() < 1e-12);
        // refined interval leaving (a, b) falls back to the default radius
        let i = localize(c64::new(0.05, 0.5), Some((0.0, 1.0))).unwrap();
        assert!((i.width() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cluster_single_target() {
        let report = cluster(&[c64::new(3.0, 1.0), c64::new(7.0, 0.0)], &[3.0], &ClusterOptions::default()).unwrap();
        let c = report.cluster_for(3.0).unwrap();
        assert_eq!(c.multiplicity, 1);
        assert_eq!(c.mean, Some(c64::new(3.0, 1.0)));
        assert_eq!(report.unassigned, vec![1]);
        assert!(report.echoes.is_empty());
    }

    #[test]
    fn cluster_flags_unexpected_and_echoes() {
        let vals = [c64::new(0.0, 0.98), c64::new(5.0, 0.9), c64::new(1.0, 0.2), c64::new(2.0, 0.0)];
        let report = cluster(&vals, &[0.0], &ClusterOptions::default()).unwrap();
        assert_eq!(report.targeted().next().unwrap().members, vec![0]);
        assert_eq!(report.unexpected().count(), 1);
        assert_eq!(report.unassigned, vec![2, 3]);
        assert_eq!(report.echoes, vec![2]);
        let total: usize = report.clusters.iter().map(|c| c.members.len()).sum::<usize>() + report.unassigned.len();
        assert_eq!(total, vals.len());
    }

    #[test]
    fn overlapping_targets_rejected() {
        let opts = ClusterOptions {
            radius: Some(0.3),
            ..ClusterOptions::default()
        };
        assert!(matches!(
            cluster(&[], &[0.0, 0.5], &opts),
            Err(Error::OverlappingTargets { .. })
        ));
    }

    #[test]
    fn default_radius_rule() {
        assert_eq!(default_radius(&[0.0]), MAX_DEFAULT_RADIUS);
        assert!((default_radius(&[0.0, 0.4, 2.0]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn pollution_of_empty_selection_is_empty() {
        let report = cluster(&[c64::new(1.0, 0.0)], &[], &ClusterOptions::default()).unwrap();
        assert!(pollution_report(&[], &report, DEFAULT_MATCH_TOL).is_empty());
    }

    #[test]
    fn cross_forms_agree_with_nested_projection() {
        let p = ProblemSpec::BlockFem;
        let coarse = assemble(&p, 4).unwrap();
        let fine = assemble(&p, 8).unwrap();
        let spec = spectrum_of_t(&coarse).unwrap();
        let vecs = spec.pairs().vectors().select_columns(&[0, 3]);
        let nested = project_between(&p, &coarse, &vecs, &fine).unwrap();
        let (xm, xt) = fem_cross_forms(4, 8).unwrap();
        let cross = ProjectionQ::from_cross_forms(&vecs, &coarse, &xm, &xt).unwrap();
        assert!((nested.gram_block() - cross.gram_block()).frobenius_norm() < 1e-12);
        let a = inverse_dissipative_eigenvalues(&fine, &nested, -1.0).unwrap();
        let b = inverse_dissipative_eigenvalues(&fine, &cross, -1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn non_nested_fem_keeps_constant_second_component() {
        let p = ProblemSpec::BlockFem;
        let coarse = assemble(&p, 5).unwrap();
        let fine = assemble(&p, 12).unwrap();
        let spec = spectrum_of_t(&coarse).unwrap();
        let sel = crate::galerkin::select_window(
            &spec,
            coarse.mass(),
            &crate::galerkin::SpectralWindow::inverse(0.45, 0.55, 0.0).unwrap(),
        )
        .unwrap();
        let q = project_between(&p, &coarse, &sel.vectors, &fine).unwrap();
        assert!(q.coeffs().is_none());
        let w = inverse_dissipative_eigenvalues(&fine, &q, 0.0).unwrap();
        assert!(w.iter().any(|x| (x - c64::new(0.5, 1.0)).norm() < 1e-10), "{w:?}");
    }

    #[test]
    fn fourier_coarse_window_has_rank_four() {
        use std::f64::consts::PI;
        let p = ProblemSpec::FourierRankOne;
        let coarse = assemble(&p, 25).unwrap();
        let fine = assemble(&p, 50).unwrap();
        let spec = spectrum_of_t(&coarse).unwrap();
        let sel = crate::galerkin::select_window(
            &spec,
            coarse.mass(),
            &crate::galerkin::SpectralWindow::new(-PI, PI).unwrap(),
        )
        .unwrap();
        let q = build_projection(&sel.vectors, &embed(&p, 25, 50).unwrap(), &fine).unwrap();
        assert_eq!(q.rank(), 4);
    }
}
