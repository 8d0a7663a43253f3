//! Verification toolkit: subspace gaps, projection defects, rate fits and
//! the experiment tables built on top of them.

use serde::Serialize;

use crate::dissipative::{
    cluster, inverse_dissipative_eigenvalues, merge_targets, project_between, ClusterOptions, ProjectionQ,
};
use crate::error::{Error, Result};
use crate::galerkin::{eigenvalues_of_t, select_window, spectrum_of_t, SpectralWindow};
use crate::linalg::{self, c64, Cholesky, DenseMatrix};
use crate::problems::{assemble, block_fem_eigenvalue, FormMatrices, ProblemSpec};

const GAP_DEPENDENCE_TOL: f64 = 1e-10;

/// `δ(U, V) = sup_{u ∈ U, ‖u‖ = 1} dist(u, V)` in the inner product `⟨x, y⟩ = yᴴ M x`.
pub fn subspace_gap(u: &DenseMatrix, v: &DenseMatrix, inner: &DenseMatrix) -> Result<f64> {
    if u.rows() != inner.rows() || v.rows() != inner.rows() {
        return Err(Error::DimensionMismatch {
            context: "subspace gap",
            expected: inner.rows(),
            found: if u.rows() != inner.rows() { u.rows() } else { v.rows() },
        });
    }
    if u.cols() == 0 {
        return Ok(0.0);
    }
    let uo = linalg::orthonormalize(u, inner, GAP_DEPENDENCE_TOL)?;
    if v.cols() == 0 {
        return Ok(1.0);
    }
    let vo = linalg::orthonormalize(v, inner, GAP_DEPENDENCE_TOL)?;
    let coeff = &(&vo.adjoint() * inner) * &uo;
    let w = &uo - &(&vo * &coeff);
    let gram = (&(&w.adjoint() * inner) * &w).hermitian_part();
    let top = linalg::hermitian_generalized_eigenvalues(&gram, &DenseMatrix::identity(gram.rows()))?
        .last()
        .copied()
        .unwrap_or(0.0);
    Ok(top.max(0.0).sqrt().min(1.0))
}

/// `δ̂(U, V) = max(δ(U, V), δ(V, U))`.
pub fn symmetric_gap(u: &DenseMatrix, v: &DenseMatrix, inner: &DenseMatrix) -> Result<f64> {
    Ok(subspace_gap(u, v, inner)?.max(subspace_gap(v, u, inner)?))
}

/// Inner product matrix of the form norm: `T̂ − (m − 1)M` with `m` the
/// lower bound of `(T̂, M)`.
pub fn form_inner_product(fm: &FormMatrices) -> Result<DenseMatrix> {
    let lower = eigenvalues_of_t(fm)?.first().copied().unwrap_or(0.0);
    Ok((fm.t_hat() - &fm.mass().scale(c64::new(lower - 1.0, 0.0))).hermitian_part())
}

/// `ε = ‖(I − Q)E‖` for an exact spectral basis `E` (columns), in the `M` norm.
///
/// Evaluated as the largest singular value of `Lᴴ(E₀ − C CᴴM E₀)` where
/// `M = LLᴴ`, `E₀` is `E` made M-orthonormal and `C` the coefficients of `Q`.
pub fn projection_defect(q: &ProjectionQ, exact: &DenseMatrix, mass: &DenseMatrix) -> Result<f64> {
    let c = q.coeffs().ok_or_else(|| {
        Error::InvalidParameter("projection defect needs fine-space coefficients of Q".into())
    })?;
    if exact.cols() == 0 {
        return Ok(0.0);
    }
    let e0 = linalg::orthonormalize(exact, mass, GAP_DEPENDENCE_TOL)?;
    let residual = if c.cols() == 0 {
        e0
    } else {
        let coeff = &(&c.adjoint() * mass) * &e0;
        &e0 - &(c * &coeff)
    };
    let l = Cholesky::factor(mass)?.lower();
    linalg::largest_singular_value(&(&l.adjoint() * &residual))
}

/// Least-squares fit of `log(error) = slope · log(level) + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub levels: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub const MIN_FIT_POINTS: usize = 4;

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least {MIN_FIT_POINTS} points, got {}",
            points.len()
        )));
    }
    if let Some(&(l, e)) = points.iter().find(|(l, e)| !(*l > 0.0 && *e > 0.0 && l.is_finite() && e.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs positive finite data, got ({l}, {e})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs at least two distinct levels".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(RateFit {
        levels: points.to_vec(),
        slope,
        intercept,
        r_squared,
    })
}

/// Distance from `target` to the nearest point of a set.
pub fn distance_to_set(target: c64, set: &[c64]) -> f64 {
    set.iter().map(|z| (z - target).norm()).fold(f64::INFINITY, f64::min)
}

/// Distance from a real `target` to a set of reals.
pub fn distance_to_real_set(target: f64, set: &[f64]) -> f64 {
    set.iter().map(|x| (x - target).abs()).fold(f64::INFINITY, f64::min)
}

/// One row of the `(λ₁⁺)⁻¹` comparison for the block FEM problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventComparisonRow {
    /// Coarse mesh elements (`h = 1/elements`).
    pub elements: usize,
    pub fine_elements: usize,
    /// `dist((λ₁⁺)⁻¹, σ(T⁻¹, L_{h/2}))`.
    pub galerkin: f64,
    /// `dist((λ₁⁺)⁻¹ + i, σ(T⁻¹ + iQ_h, L_{h/2}))`.
    pub dissipative: f64,
}

/// Window isolating `(λ₁⁺)⁻¹` in resolvent coordinates (`γ = 0`).
pub const RESOLVENT_WINDOW: (f64, f64) = (0.05, 0.2);

/// Computes one row of the `(λ₁⁺)⁻¹` comparison: coarse mesh `h`, fine `h/2`.
pub fn resolvent_comparison_row(elements: usize) -> Result<ResolventComparisonRow> {
    let problem = ProblemSpec::BlockFem;
    let fine_elements = 2 * elements;
    let target = 1.0 / block_fem_eigenvalue(1, true);
    let coarse = assemble(&problem, elements)?;
    let fine = assemble(&problem, fine_elements)?;
    let fine_values: Vec<f64> = eigenvalues_of_t(&fine)?.iter().map(|l| 1.0 / l).collect();
    let window = SpectralWindow::inverse(RESOLVENT_WINDOW.0, RESOLVENT_WINDOW.1, 0.0)?;
    let sel = select_window(&spectrum_of_t(&coarse)?, coarse.mass(), &window)?;
    let q = project_between(&problem, &coarse, &sel.vectors, &fine)?;
    let w = inverse_dissipative_eigenvalues(&fine, &q, 0.0)?;
    Ok(ResolventComparisonRow {
        elements,
        fine_elements,
        galerkin: distance_to_real_set(target, &fine_values),
        dissipative: distance_to_set(c64::new(target, 1.0), &w),
    })
}

/// One sample of the Fourier rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierRatePoint {
    pub coarse: usize,
    pub fine: usize,
    /// Distance from `λ₁ + i` to the nearest member of its cluster.
    pub cluster_distance: f64,
    /// Mean of that cluster.
    pub cluster_mean: Option<[f64; 2]>,
    /// Distance from `λ₂` to `σ(T, L_fine)`.
    pub galerkin_distance: f64,
}

/// Fourier sweep at half-widths `(coarse, fine)` with window `(−π, π)`.
pub fn fourier_rate_point(coarse_half: usize, fine_half: usize, lambda_1: f64, lambda_2: f64) -> Result<FourierRatePoint> {
    use std::f64::consts::PI;
    let problem = ProblemSpec::FourierRankOne;
    let coarse = assemble(&problem, coarse_half)?;
    let fine = assemble(&problem, fine_half)?;
    let window = SpectralWindow::new(-PI, PI)?;
    let sel = select_window(&spectrum_of_t(&coarse)?, coarse.mass(), &window)?;
    let q = project_between(&problem, &coarse, &sel.vectors, &fine)?;
    let values = crate::dissipative::dissipative_eigenvalues(&fine, &q)?;
    let targets = merge_targets(&sel.values, 1e-9);
    let report = cluster(&values, &targets, &ClusterOptions::default())?;
    let near = targets
        .iter()
        .copied()
        .min_by(|a, b| (a - lambda_1).abs().total_cmp(&(b - lambda_1).abs()));
    let member_values: Vec<c64> = near
        .and_then(|t| report.cluster_for(t))
        .map(|c| c.members.iter().map(|&i| values[i]).collect())
        .unwrap_or_default();
    let mean = near.and_then(|t| report.cluster_for(t)).and_then(|c| c.mean);
    let ev = eigenvalues_of_t(&fine)?;
    Ok(FourierRatePoint {
        coarse: coarse_half,
        fine: fine_half,
        cluster_distance: distance_to_set(c64::new(lambda_1, 1.0), &member_values),
        cluster_mean: mean.map(|m| [m.re, m.im]),
        galerkin_distance: distance_to_real_set(lambda_2, &ev),
    })
}
