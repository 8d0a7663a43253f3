//! Independent brute-force oracles shared by the integration tests.
//!
//! Nothing here calls into the eigensolvers of the library.

#![allow(dead_code)]

use std::f64::consts::PI;

use galerkin_core::linalg::{c64, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> c64 {
    c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, n, |_, _| random_complex(rng)).unwrap()
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let a = random_matrix(rng, n);
    DenseMatrix::from_fn(n, n, |i, j| (a.get(i, j) + a.get(j, i).conj()) * 0.5).unwrap()
}

/// `XᴴX + shift·I`, well conditioned for moderate shifts.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DenseMatrix {
    let x = random_matrix(rng, n);
    let g = &x.adjoint() * &x;
    DenseMatrix::from_fn(n, n, |i, j| {
        let v = (g.get(i, j) + g.get(j, i).conj()) * 0.5;
        if i == j {
            v + shift
        } else {
            v
        }
    })
    .unwrap()
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<c64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

/// LU with partial pivoting on a row-major copy. Returns `None` when a
/// pivot is exactly zero.
pub struct Lu {
    lu: Vec<Vec<c64>>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(mut a: Vec<Vec<c64>>) -> Option<Self> {
        let n = a.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let p = (k..n).max_by(|&x, &y| a[x][k].norm().total_cmp(&a[y][k].norm()))?;
            if a[p][k].norm() == 0.0 {
                return None;
            }
            if p != k {
                a.swap(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                a[i][k] = f;
                for j in k + 1..n {
                    let u = a[k][j];
                    a[i][j] -= f * u;
                }
            }
        }
        Some(Self { lu: a, perm, sign })
    }

    pub fn det(&self) -> c64 {
        let mut d = c64::new(self.sign, 0.0);
        for (i, row) in self.lu.iter().enumerate() {
            d *= row[i];
        }
        d
    }

    pub fn solve(&self, b: &[c64]) -> Vec<c64> {
        let n = self.lu.len();
        let mut y: Vec<c64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[i][j];
                let yj = y[j];
                y[i] -= l * yj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[i][j];
                let yj = y[j];
                y[i] -= u * yj;
            }
            y[i] /= self.lu[i][i];
        }
        y
    }
}

fn shifted(a: &[Vec<c64>], b: &[Vec<c64>], z: c64) -> Vec<Vec<c64>> {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(&x, &y)| x - z * y).collect())
        .collect()
}

/// `det(A − zB)`.
pub fn pencil_det(a: &[Vec<c64>], b: &[Vec<c64>], z: c64) -> c64 {
    Lu::new(shifted(a, b, z)).map_or(c64::ZERO, |lu| lu.det())
}

/// Coefficients (ascending) of `p(z) = det(A − zB)` by interpolation at
/// scaled roots of unity.
pub fn characteristic_polynomial(a: &[Vec<c64>], b: &[Vec<c64>], scale: f64) -> Vec<c64> {
    let n = a.len();
    let k = n + 1;
    let nodes: Vec<c64> = (0..k)
        .map(|j| c64::from_polar(scale, 2.0 * PI * j as f64 / k as f64))
        .collect();
    let values: Vec<c64> = nodes.iter().map(|&z| pencil_det(a, b, z)).collect();
    (0..k)
        .map(|m| {
            let s: c64 = (0..k)
                .map(|j| values[j] * c64::from_polar(1.0, -2.0 * PI * (j * m) as f64 / k as f64))
                .sum();
            s / (k as f64 * scale.powi(m as i32))
        })
        .collect()
}

fn horner(coeffs: &[c64], z: c64) -> (c64, c64) {
    let mut p = c64::ZERO;
    let mut dp = c64::ZERO;
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of a polynomial (ascending coefficients) by Aberth iteration.
pub fn aberth_roots(coeffs: &[c64]) -> Vec<c64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && c.last().unwrap().norm() == 0.0 {
        c.pop();
    }
    let deg = c.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg].norm();
    let bound = 1.0 + c[..deg].iter().map(|x| x.norm() / lead).fold(0.0, f64::max);
    let mut z: Vec<c64> = (0..deg)
        .map(|j| c64::from_polar(0.5 * bound, 2.0 * PI * (j as f64 + 0.25) / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = horner(&c, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: c64 = (0..deg).filter(|&j| j != i).map(|j| c64::ONE / (z[i] - z[j])).sum();
            let step = ratio / (c64::ONE - ratio * sum);
            z[i] -= step;
            moved = moved.max(step.norm() / z[i].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Newton polish on `det(A − zB)` using `d/dz log det = −tr((A − zB)⁻¹ B)`.
pub fn polish(a: &[Vec<c64>], b: &[Vec<c64>], mut z: c64) -> c64 {
    let n = a.len();
    for _ in 0..20 {
        let Some(lu) = Lu::new(shifted(a, b, z)) else {
            return z;
        };
        let mut tr = c64::ZERO;
        for j in 0..n {
            let col: Vec<c64> = (0..n).map(|i| b[i][j]).collect();
            tr += lu.solve(&col)[j];
        }
        if !(tr.norm() > 0.0 && tr.norm().is_finite()) {
            return z;
        }
        let step = c64::ONE / tr;
        z += step;
        if step.norm() <= 1e-15 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Eigenvalues of the regular pencil `(A, B)` from the roots of its
/// characteristic polynomial.
pub fn pencil_eigenvalues(a: &DenseMatrix, b: &DenseMatrix) -> Vec<c64> {
    let (ra, rb) = (to_rows(a), to_rows(b));
    let scale = 1.0 + a.frobenius_norm() / b.frobenius_norm().max(1e-300);
    let roots = aberth_roots(&characteristic_polynomial(&ra, &rb, scale));
    roots.into_iter().map(|z| polish(&ra, &rb, z)).collect()
}

/// Greedy nearest matching of two multisets; returns the worst distance
/// relative to `max(1, |z|)`, or infinity on a size mismatch.
pub fn multiset_distance(x: &[c64], y: &[c64]) -> f64 {
    if x.len() != y.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; y.len()];
    let mut worst = 0.0f64;
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in x.iter().enumerate() {
        for (j, b) in y.iter().enumerate() {
            pairs.push(((a - b).norm() / a.norm().max(1.0), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut done = vec![false; x.len()];
    for (d, i, j) in pairs {
        if done[i] || used[j] {
            continue;
        }
        done[i] = true;
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Adaptive Simpson quadrature of a complex integrand.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> c64, a: f64, b: f64, tol: f64) -> c64 {
    fn simpson(f: &dyn Fn(f64) -> c64, a: f64, b: f64) -> (c64, c64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((f(a) + fm * 4.0 + f(b)) * ((b - a) / 6.0), fm)
    }
    fn recurse(f: &dyn Fn(f64) -> c64, a: f64, b: f64, whole: c64, tol: f64, depth: u32) -> c64 {
        let m = 0.5 * (a + b);
        let (left, _) = simpson(f, a, m);
        let (right, _) = simpson(f, m, b);
        let delta = left + right - whole;
        // forced splits keep oscillatory integrands from aliasing
        if depth == 0 || (depth <= 34 && delta.norm() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, left, 0.5 * tol, depth - 1) + recurse(f, m, b, right, 0.5 * tol, depth - 1)
    }
    let (whole, _) = simpson(f, a, b);
    recurse(f, a, b, whole, tol, 40)
}

/// The piecewise-linear symbol `a(x)`: `−2π − x` on `(−π, 0)`, `2π − x` on `(0, π)`.
pub fn symbol(x: f64) -> f64 {
    if x < 0.0 {
        -2.0 * PI - x
    } else {
        2.0 * PI - x
    }
}

/// `(1/2π) ∫ a(x) e^{imx} dx` by quadrature on each linear piece.
pub fn fourier_coefficient_quadrature(m: i64) -> c64 {
    let f = |x: f64| c64::from_polar(symbol(x) / (2.0 * PI), m as f64 * x);
    let piece = |a: f64, b: f64| {
        let g = |x: f64| if x == 0.0 { f(if a < 0.0 { -1e-300 } else { 1e-300 }) } else { f(x) };
        adaptive_simpson(&g, a, b, 1e-13)
    };
    piece(-PI, 0.0) + piece(0.0, PI)
}

/// Two-point Gauss rule on `[a, b]`.
pub fn gauss2(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let g = r / 3f64.sqrt();
    r * (f(m - g) + f(m + g))
}

/// P1 hat function of `node` on the uniform mesh with `n` elements.
pub fn hat(n: usize, node: usize, x: f64) -> f64 {
    let h = 1.0 / n as f64;
    (1.0 - (x - node as f64 * h).abs() / h).max(0.0)
}

pub fn hat_derivative(n: usize, node: usize, x: f64) -> f64 {
    let h = 1.0 / n as f64;
    let d = x - node as f64 * h;
    if d.abs() >= h {
        0.0
    } else if d < 0.0 {
        1.0 / h
    } else {
        -1.0 / h
    }
}

/// Element-wise Gauss assembly of `∫ f(φ_i, φ_j)` over the mesh.
pub fn fem_integral(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / n as f64;
    (0..n).map(|e| gauss2(&f, e as f64 * h, (e + 1) as f64 * h)).sum()
}

/// Largest distance from a unit vector of `span U` to `span V` (`M = I`),
/// maximized over random samples of the unit sphere of `span U`.
pub fn sampled_gap(u: &DenseMatrix, v: &DenseMatrix, samples: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = u.rows();
    let q = gram_schmidt(v);
    let qu = gram_schmidt(u);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let coef: Vec<c64> = (0..qu.len())
            .map(|_| {
                let (a, b): (f64, f64) = (rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal));
                c64::new(a, b)
            })
            .collect();
        let mut x = vec![c64::ZERO; n];
        for (c, col) in coef.iter().zip(&qu) {
            for i in 0..n {
                x[i] += c * col[i];
            }
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|e| *e /= nx);
        let mut r = x.clone();
        for col in &q {
            let p: c64 = col.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
            for i in 0..n {
                r[i] -= p * col[i];
            }
        }
        best = best.max(norm(&r));
    }
    best
}

pub fn norm(x: &[c64]) -> f64 {
    x.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean Gram–Schmidt (twice) on the columns.
pub fn gram_schmidt(m: &DenseMatrix) -> Vec<Vec<c64>> {
    let mut out: Vec<Vec<c64>> = Vec::new();
    for j in 0..m.cols() {
        let mut x = m.column(j);
        for _ in 0..2 {
            for q in &out {
                let p: c64 = q.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
                for i in 0..x.len() {
                    x[i] -= p * q[i];
                }
            }
        }
        let nx = norm(&x);
        if nx > 1e-12 {
            out.push(x.into_iter().map(|e| e / nx).collect());
        }
    }
    out
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
