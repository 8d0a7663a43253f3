mod common;

use common::*;
use galerkin_core::galerkin::eigenvalues_of_t;
use galerkin_core::linalg::{c64, DenseMatrix};
use galerkin_core::problems::{
    assemble, block_fem_eigenvalue, embed, fem_cross_forms, fourier_symbol_coefficient, reference_spectrum,
    FemLayout, ProblemSpec, FOURIER_LAMBDA_1, FOURIER_LAMBDA_2,
};
use galerkin_core::Error;

#[test]
fn fourier_entries_match_quadrature() {
    for m in -12i64..=12 {
        let oracle = fourier_coefficient_quadrature(m);
        assert!((fourier_symbol_coefficient(m) - oracle).norm() < 1e-10, "m = {m}");
    }
    assert!(fourier_coefficient_quadrature(0).norm() < 1e-10);
    let fm = assemble(&ProblemSpec::FourierRankOne, 3).unwrap();
    for l in 0..7 {
        for k in 0..7 {
            let mut want = fourier_coefficient_quadrature(l as i64 - k as i64);
            if l == 3 && k == 3 {
                want += c64::new(10.0, 0.0);
            }
            assert!((fm.t_hat().get(l, k) - want).norm() < 1e-10);
        }
    }
    assert!((fm.mass() - &DenseMatrix::identity(7)).frobenius_norm() == 0.0);
}

#[test]
fn fem_matrices_match_gauss_assembly() {
    let n = 6;
    let fm = assemble(&ProblemSpec::BlockFem, n).unwrap();
    let layout = FemLayout { elements: n };
    let h = 1.0 / n as f64;
    for p in 1..n {
        for q in 1..n {
            let (i, j) = (layout.first(p).unwrap(), layout.first(q).unwrap());
            let mass = fem_integral(n, |x| hat(n, p, x) * hat(n, q, x));
            let stiff = fem_integral(n, |x| hat_derivative(n, p, x) * hat_derivative(n, q, x));
            assert!((fm.mass().get(i, j).re - mass).abs() < 1e-13);
            assert!((fm.t_hat().get(i, j).re - stiff).abs() < 1e-12);
            let tri = match p.abs_diff(q) {
                0 => 4.0 * h / 6.0,
                1 => h / 6.0,
                _ => 0.0,
            };
            assert!((fm.mass().get(i, j).re - tri).abs() < 1e-14);
        }
    }
    for p in 0..=n {
        for q in 0..=n {
            let (i, j) = (layout.second(p), layout.second(q));
            let mass = fem_integral(n, |x| hat(n, p, x) * hat(n, q, x));
            assert!((fm.mass().get(i, j).re - mass).abs() < 1e-13);
            assert!((fm.t_hat().get(i, j).re - 2.0 * mass).abs() < 1e-13);
        }
    }
    // coupling t(u₂ = φ_q, v₁ = φ_p) = ⟨φ_q, φ_p′⟩
    for p in 1..n {
        for q in 0..=n {
            let (i, j) = (layout.first(p).unwrap(), layout.second(q));
            let want = fem_integral(n, |x| hat(n, q, x) * hat_derivative(n, p, x));
            assert!((fm.t_hat().get(i, j).re - want).abs() < 1e-13);
            assert!((fm.t_hat().get(j, i).re - want).abs() < 1e-13);
        }
    }
}

#[test]
fn fourier_embedding_is_a_selection() {
    let e = embed(&ProblemSpec::FourierRankOne, 1, 2).unwrap();
    assert_eq!((e.fine_dim(), e.coarse_dim()), (5, 3));
    for i in 0..5 {
        for j in 0..3 {
            let want = if i == j + 1 { 1.0 } else { 0.0 };
            assert_eq!(e.embedding.get(i, j), c64::new(want, 0.0));
        }
    }
}

#[test]
fn fem_embedding_interpolates_hats() {
    let e = embed(&ProblemSpec::BlockFem, 2, 4).unwrap();
    let (cl, fl) = (FemLayout { elements: 2 }, FemLayout { elements: 4 });
    let col = cl.first(1).unwrap();
    let weights: Vec<f64> = (1..4).map(|f| e.embedding.get(fl.first(f).unwrap(), col).re).collect();
    assert_eq!(weights, vec![0.5, 1.0, 0.5]);
    let col = cl.second(0);
    let weights: Vec<f64> = (0..=4).map(|f| e.embedding.get(fl.second(f), col).re).collect();
    assert_eq!(weights, vec![1.0, 0.5, 0.0, 0.0, 0.0]);
}

#[test]
fn nested_forms_restrict_exactly() {
    for (problem, c, f) in [(ProblemSpec::BlockFem, 4, 8), (ProblemSpec::FourierRankOne, 3, 7)] {
        let coarse = assemble(&problem, c).unwrap();
        let fine = assemble(&problem, f).unwrap();
        let e = embed(&problem, c, f).unwrap().embedding;
        let t = &(&e.adjoint() * fine.t_hat()) * &e;
        let m = &(&e.adjoint() * fine.mass()) * &e;
        assert!((&t - coarse.t_hat()).frobenius_norm() < 1e-12);
        assert!((&m - coarse.mass()).frobenius_norm() < 1e-14);
    }
}

#[test]
fn non_nested_meshes_are_rejected_by_embed() {
    assert!(matches!(embed(&ProblemSpec::BlockFem, 49, 576), Err(Error::NotNested(_))));
    assert!(matches!(embed(&ProblemSpec::FourierRankOne, 5, 3), Err(Error::NotNested(_))));
}

#[test]
fn cross_forms_agree_with_direct_quadrature() {
    let (c, f) = (3, 5);
    let (xm, xt) = fem_cross_forms(c, f).unwrap();
    let (cl, fl) = (FemLayout { elements: c }, FemLayout { elements: f });
    // fine on the common refinement of both meshes
    let q = 60;
    for pf in 0..=f {
        for pc in 0..=c {
            let m2 = fem_integral(q, |x| hat(f, pf, x) * hat(c, pc, x));
            let t2 = 2.0 * m2;
            assert!((xm.get(fl.second(pf), cl.second(pc)).re - m2).abs() < 1e-13);
            assert!((xt.get(fl.second(pf), cl.second(pc)).re - t2).abs() < 1e-13);
        }
    }
    for pf in 1..f {
        for pc in 1..c {
            let (i, j) = (fl.first(pf).unwrap(), cl.first(pc).unwrap());
            let m1 = fem_integral(q, |x| hat(f, pf, x) * hat(c, pc, x));
            let t1 = fem_integral(q, |x| hat_derivative(f, pf, x) * hat_derivative(c, pc, x));
            assert!((xm.get(i, j).re - m1).abs() < 1e-13);
            assert!((xt.get(i, j).re - t1).abs() < 1e-12);
        }
    }
}

#[test]
fn reference_spectra() {
    let r = reference_spectrum(&ProblemSpec::FourierRankOne);
    assert_eq!(r.discrete, vec![(FOURIER_LAMBDA_1, 1), (FOURIER_LAMBDA_2, 1)]);
    assert!((block_fem_eigenvalue(1, false) - 0.8997).abs() < 1e-4);
    assert!((block_fem_eigenvalue(1, true) - 10.9699).abs() < 1e-4);
    let r = reference_spectrum(&ProblemSpec::BlockFem);
    assert!(r.discrete.iter().any(|&(v, _)| (v - 10.969906246987076).abs() < 1e-12));
}

#[test]
fn synthetic_spectrum_with_multiplicity() {
    let p = ProblemSpec::SyntheticDense {
        eigenvalues: vec![0.0, 1.0, 1.0, 5.0],
        seed: 17,
    };
    let v = eigenvalues_of_t(&assemble(&p, 4).unwrap()).unwrap();
    for (got, want) in v.iter().zip([0.0, 1.0, 1.0, 5.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn fem_galerkin_eigenvalue_converges_from_above() {
    let target = block_fem_eigenvalue(1, false);
    let mut prev = f64::INFINITY;
    for n in [8, 16, 32] {
        let ev = eigenvalues_of_t(&assemble(&ProblemSpec::BlockFem, n).unwrap()).unwrap();
        let d = distance_to_nearest(&ev, target);
        assert!(d < prev);
        prev = d;
    }
    assert!(prev < 1e-3);
}

fn distance_to_nearest(values: &[f64], target: f64) -> f64 {
    values.iter().map(|v| (v - target).abs()).fold(f64::INFINITY, f64::min)
}

#[test]
fn invalid_levels() {
    assert!(assemble(&ProblemSpec::FourierRankOne, 0).is_err());
    assert!(assemble(&ProblemSpec::BlockFem, 1).is_err());
    let p = ProblemSpec::SyntheticDense {
        eigenvalues: vec![1.0],
        seed: 0,
    };
    assert!(assemble(&p, 2).is_err());
}
