use gmkit::numerics::{
    det, dot, finite_diff_grad, grad_linear, grad_logabsdet, grad_norm, grad_quadratic, gram_schmidt, inverse, matrix_sqrt_psd, newton_step, norm,
    power_method, sym_eigen, whitening_matrix, Lu, Matrix, NumericError,
};
use gmkit::samplers::SeededRng;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn square(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| Matrix::from_row_major(n, n, v).unwrap())
}

fn symmetric(n: usize) -> impl Strategy<Value = Matrix> {
    square(n).prop_map(|a| a.add(&a.transpose()).unwrap().scale(0.5))
}

fn psd(n: usize) -> impl Strategy<Value = Matrix> {
    square(n).prop_map(|a| a.matmul(&a.transpose()).unwrap())
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = norm(b).max(1.0);
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #[test]
    fn eigen_reconstructs_and_matches_nalgebra(c in symmetric(5)) {
        let e = sym_eigen(&c).unwrap();
        prop_assert!(e.reconstruct().max_abs_diff(&c) < 1e-8);
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let gram = e.vectors.transpose().matmul(&e.vectors).unwrap();
        prop_assert!(gram.max_abs_diff(&Matrix::identity(5)) < 1e-9);
        let mut oracle: Vec<f64> = to_na(&c).symmetric_eigenvalues().iter().copied().collect();
        oracle.sort_by(|a, b| b.total_cmp(a));
        prop_assert!(rel_close(&e.values, &oracle, 1e-9));
        prop_assert!((c.trace() - e.values.iter().sum::<f64>()).abs() < 1e-7);
        prop_assert!((det(&c).unwrap() - e.values.iter().product::<f64>()).abs() < 1e-7 * det(&c).unwrap().abs().max(1.0));
        for j in 0..5 {
            let col = e.vectors.col(j);
            let big = col.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            prop_assert!(big > 0.0);
        }
    }

    #[test]
    fn determinant_and_inverse_match_nalgebra(a in square(4)) {
        let d = det(&a).unwrap();
        let oracle = to_na(&a).determinant();
        prop_assert!((d - oracle).abs() < 1e-9 * oracle.abs().max(1.0));
        prop_assume!(oracle.abs() > 1e-3);
        let inv = inverse(&a).unwrap();
        prop_assert!(a.matmul(&inv).unwrap().max_abs_diff(&Matrix::identity(4)) < 1e-8);
        let na_inv = to_na(&a).try_inverse().unwrap();
        let ours = to_na(&inv);
        prop_assert!((ours - na_inv).abs().max() < 1e-6 * inv.max_abs().max(1.0));
    }

    #[test]
    fn lu_solution_satisfies_the_system(a in square(4), b in proptest::collection::vec(-3.0f64..3.0, 4)) {
        let lu = Lu::new(&a).unwrap();
        prop_assume!(!lu.is_singular() && det(&a).unwrap().abs() > 1e-3);
        let x = lu.solve(&b).unwrap();
        prop_assert!(rel_close(&a.matvec(&x).unwrap(), &b, 1e-8));
    }

    #[test]
    fn power_method_finds_the_top_pair(c in psd(4), w0 in proptest::collection::vec(0.1f64..1.0, 4)) {
        let e = sym_eigen(&c).unwrap();
        prop_assume!(e.values[0] - e.values[1] > 0.2 * e.values[0].max(1e-3));
        let (w, lambda) = power_method(&c, &w0, 100_000, 1e-12).unwrap();
        prop_assert!((lambda - e.values[0]).abs() < 1e-6 * e.values[0].max(1.0));
        let top = e.vectors.col(0);
        prop_assert!((dot(&w, &top).abs() - 1.0).abs() < 1e-6);
        let cw = c.matvec(&w).unwrap();
        let resid: Vec<f64> = cw.iter().zip(&w).map(|(a, b)| a - lambda * b).collect();
        prop_assert!(norm(&resid) < 1e-6 * e.values[0].max(1.0));
    }

    #[test]
    fn square_root_and_whitener(c in psd(4)) {
        let m = matrix_sqrt_psd(&c).unwrap();
        prop_assert!(m.matmul(&m).unwrap().max_abs_diff(&c) < 1e-8 * c.max_abs().max(1.0));
        prop_assume!(sym_eigen(&c).unwrap().values[3] > 1e-2);
        let v = whitening_matrix(&c).unwrap();
        let white = v.matmul(&c).unwrap().matmul(&v.transpose()).unwrap();
        prop_assert!(white.max_abs_diff(&Matrix::identity(4)) < 1e-8);
    }

    #[test]
    fn gram_schmidt_is_orthogonal_and_spans(vs in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..6)) {
        let gs = gram_schmidt(&vs, 1e-9).unwrap();
        let basis: Vec<&Vec<f64>> = gs.independent().collect();
        for i in 0..basis.len() {
            for j in 0..i {
                prop_assert!(dot(basis[i], basis[j]).abs() <= 1e-9 * norm(basis[i]) * norm(basis[j]));
            }
        }
        // each input is its own projection onto the retained basis
        for v in &vs {
            let mut r = v.clone();
            for u in &basis {
                let c = dot(u, v) / dot(u, u);
                for (ri, ui) in r.iter_mut().zip(u.iter()) {
                    *ri -= c * ui;
                }
            }
            prop_assert!(norm(&r) < 1e-8 * norm(v).max(1.0));
        }
    }

    #[test]
    fn gradient_kernels_match_finite_differences(a in square(3), w in proptest::collection::vec(-2.0f64..2.0, 3), lin in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let h = 1e-5;
        let close = |g: &[f64], fd: &[f64]| rel_close(g, fd, 1e-5);
        prop_assert!(close(&grad_linear(&lin), &finite_diff_grad(|x| dot(&lin, x), &w, h)));
        let quad = |x: &[f64]| dot(x, &a.matvec(x).unwrap());
        prop_assert!(close(&grad_quadratic(&a, &w).unwrap(), &finite_diff_grad(quad, &w, h)));
        prop_assume!(norm(&w) > 0.1);
        prop_assert!(close(&grad_norm(&w).unwrap(), &finite_diff_grad(norm, &w, h)));
        let d = det(&a).unwrap();
        prop_assume!(d.abs() > 0.1);
        let flat = |x: &[f64]| det(&Matrix::from_row_major(3, 3, x.to_vec()).unwrap()).unwrap().abs().ln();
        let fd = finite_diff_grad(flat, a.as_slice(), h);
        prop_assert!(close(grad_logabsdet(&a).unwrap().as_slice(), &fd));
    }

    #[test]
    fn newton_step_lands_on_the_quadratic_minimum(g in square(3), b in proptest::collection::vec(-3.0f64..3.0, 3), w0 in proptest::collection::vec(-3.0f64..3.0, 3)) {
        // f(w) = ½wᵀHw − bᵀw with H = GGᵀ + I
        let h = g.matmul(&g.transpose()).unwrap().add(&Matrix::identity(3)).unwrap();
        let grad: Vec<f64> = h.matvec(&w0).unwrap().iter().zip(&b).map(|(x, y)| x - y).collect();
        let p = newton_step(&grad, &h).unwrap();
        let w: Vec<f64> = w0.iter().zip(&p).map(|(a, b)| a - b).collect();
        prop_assert!(rel_close(&h.matvec(&w).unwrap(), &b, 1e-9));
    }
}

#[test]
fn gram_schmidt_examples() {
    let gs = gram_schmidt(&[vec![1.0, 0.0], vec![1.0, 1.0]], 1e-9).unwrap();
    assert_eq!(gs.basis, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let gs = gram_schmidt(&[vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]], 1e-9).unwrap();
    assert_eq!(gs.dependent, vec![false, true]);
    let ortho = vec![vec![1.0, 1.0, 0.0], vec![1.0, -1.0, 0.0], vec![0.0, 0.0, 2.0]];
    assert_eq!(gram_schmidt(&ortho, 1e-9).unwrap().basis, ortho);
    let gs = gram_schmidt(&[vec![0.0, 0.0], vec![3.0, 4.0]], 1e-9).unwrap();
    assert_eq!(gs.dependent, vec![true, false]);
    assert_eq!(gs.basis[1], vec![3.0, 4.0]);
}

#[test]
fn power_method_examples() {
    let c = Matrix::diag(&[3.0, 1.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (w, lambda) = power_method(&c, &[s, s], 1000, 1e-12).unwrap();
    assert!((lambda - 3.0).abs() < 1e-9 && (w[0].abs() - 1.0).abs() < 1e-9);
    let tie = Matrix::diag(&[-2.0, 2.0]);
    assert!(matches!(power_method(&tie, &[s, s], 50, 1e-12), Err(NumericError::NoConvergence { .. })));
    assert!(matches!(power_method(&c, &[0.0, 0.0], 10, 1e-12), Err(NumericError::ZeroVector)));
}

#[test]
fn identity_edge_cases() {
    let i = Matrix::identity(3);
    let e = sym_eigen(&i).unwrap();
    assert_eq!(e.values, vec![1.0; 3]);
    assert!(matrix_sqrt_psd(&i).unwrap().max_abs_diff(&i) < 1e-15);
    assert!(whitening_matrix(&i).unwrap().max_abs_diff(&i) < 1e-15);
    assert!(grad_logabsdet(&i).unwrap().max_abs_diff(&i) < 1e-15);
    assert_eq!(newton_step(&[0.0; 3], &i).unwrap(), vec![0.0; 3]);
    assert_eq!(newton_step(&[1.0, -2.0, 3.0], &i).unwrap(), vec![1.0, -2.0, 3.0]);
    let indefinite = Matrix::diag(&[1.0, -1.0]);
    assert!(matches!(newton_step(&[1.0, 1.0], &indefinite), Err(NumericError::NotPositiveDefinite)));
    let asym = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
    assert!(matches!(sym_eigen(&asym), Err(NumericError::NotSymmetric)));
    assert!(matches!(matrix_sqrt_psd(&indefinite), Err(NumericError::NegativeEigenvalue { .. })));
    assert!(matches!(grad_norm(&[0.0, 0.0]), Err(NumericError::ZeroVector)));
    assert!(rel_close(&finite_diff_grad(norm, &[3.0, 4.0], 1e-5), &[0.6, 0.8], 1e-6));
    let sym = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
    let w = [0.7, -1.1];
    assert_eq!(grad_quadratic(&sym, &w).unwrap(), sym.scale(2.0).matvec(&w).unwrap());
}

#[test]
fn whitened_mixing_is_orthonormal() {
    let a = Matrix::from_rows(&[vec![2.0, 0.5, -0.3], vec![0.1, 1.0, 0.8], vec![-0.7, 0.2, 1.5]]).unwrap();
    let mut rng = SeededRng::new(31);
    let n = 1_000_000;
    let root3 = 3f64.sqrt();
    let mut cov = Matrix::zeros(3, 3);
    for _ in 0..n {
        // independent unit-variance uniform sources
        let s: Vec<f64> = (0..3).map(|_| root3 * (2.0 * rng.uniform() - 1.0)).collect();
        let x = a.matvec(&s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += x[i] * x[j];
            }
        }
    }
    let cov = cov.scale(1.0 / n as f64);
    let exact = a.matmul(&a.transpose()).unwrap();
    let v_exact = whitening_matrix(&exact).unwrap();
    let at = v_exact.matmul(&a).unwrap();
    assert!(at.matmul(&at.transpose()).unwrap().max_abs_diff(&Matrix::identity(3)) < 1e-6);
    let v = whitening_matrix(&cov).unwrap();
    let at = v.matmul(&a).unwrap();
    assert!(at.matmul(&at.transpose()).unwrap().max_abs_diff(&Matrix::identity(3)) < 1e-2);
}
