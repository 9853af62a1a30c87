//! Dense `f64` tensors with reverse-mode differentiation for the handful of
//! ops the attention variants need, and a finite-difference checker.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{
    analytic_gradients, analytic_gradients_weighted, compare_gradients, finite_difference_check,
    finite_difference_check_weighted, numeric_gradients, numeric_gradients_weighted, relative_error, ElementError,
    GradCheckReport, NamedParam,
};
pub use graph::{pooled_len, Gradients, Graph, Var};
pub use tensor::{Mask, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid shape {0:?}: every dimension must be positive")]
    InvalidShape(Vec<usize>),
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("rows have different lengths")]
    RaggedRows,
    #[error("expected a 2-D tensor, got shape {0:?}")]
    NotMatrix(Vec<usize>),
    #[error("expected a scalar output, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("softmax row {row} has no allowed position")]
    FullyMaskedRow { row: usize },
    #[error("pooling requires kernel >= 1 and stride >= 1 (got kernel={kernel}, stride={stride})")]
    InvalidPooling { kernel: usize, stride: usize },
    #[error("row index {row} out of range for {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("scatter must write every output row exactly once (row {row})")]
    RowCoverage { row: usize },
    #[error("finite-difference step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("non-finite value while differentiating parameter `{param}` (element {element})")]
    NonFinite { param: String, element: usize },
}

/// Matrix product of two plain tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    let mut g = Graph::new();
    let (va, vb) = (g.constant(a.clone()), g.constant(b.clone()));
    let out = g.matmul(va, vb)?;
    Ok(g.value(out).clone())
}

pub fn masked_softmax(scores: &Tensor, mask: &Mask) -> Result<Tensor, NumericsError> {
    let mut g = Graph::new();
    let s = g.constant(scores.clone());
    let out = g.masked_softmax(s, mask)?;
    Ok(g.value(out).clone())
}

pub fn avg_pool_rows(x: &Tensor, kernel: usize, stride: usize) -> Result<Tensor, NumericsError> {
    let mut g = Graph::new();
    let v = g.constant(x.clone());
    let out = g.avg_pool_rows(v, kernel, stride)?;
    Ok(g.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor {
        Tensor::matrix(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let i = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let b = Tensor::from_rows(&[[3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(matmul(&i, &b).unwrap().data(), b.data());
        let a = Tensor::from_rows(&[[1.0, 2.0]]).unwrap();
        let c = Tensor::from_rows(&[[3.0], [4.0]]).unwrap();
        let out = matmul(&a, &c).unwrap();
        assert_eq!(out.shape(), &[1, 1]);
        assert_eq!(out.data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(vec![2, 3]).unwrap();
        let b = Tensor::zeros(vec![2, 3]).unwrap();
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, NumericsError::ShapeMismatch { .. }));
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random(&mut rng, 3, 3);
        let b = random(&mut rng, 3, 3);
        let params = [NamedParam::new("a", a), NamedParam::new("b", b)];
        let report = finite_difference_check(
            |g, v| {
                let p = g.matmul(v[0], v[1])?;
                Ok(g.sum(p))
            },
            &params,
            1e-6,
            1e-6,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn softmax_uniform_and_degenerate() {
        let s = Tensor::matrix(1, 4, vec![0.3; 4]).unwrap();
        let p = masked_softmax(&s, &Mask::ones(1, 4)).unwrap();
        assert!(p.data().iter().all(|&x| x == 0.25));

        let s = Tensor::matrix(2, 3, vec![5.0, -1.0, 2.0, 0.1, 0.2, 0.3]).unwrap();
        let mut m = Mask::zeros(2, 3);
        m.set(0, 1, true);
        m.set(1, 2, true);
        let p = masked_softmax(&s, &m).unwrap();
        assert_eq!(p.data(), &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn softmax_fully_masked_row_is_an_error() {
        let s = Tensor::zeros(vec![2, 2]).unwrap();
        let mut m = Mask::ones(2, 2);
        m.set(1, 0, false);
        m.set(1, 1, false);
        assert_eq!(
            masked_softmax(&s, &m).unwrap_err(),
            NumericsError::FullyMaskedRow { row: 1 }
        );
    }

    #[test]
    fn softmax_rows_sum_to_one_and_gradient_checks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = random(&mut rng, 5, 5);
        let mut mask = Mask::ones(5, 5);
        for i in 0..5 {
            for j in 0..5 {
                mask.set(i, j, i == j || rng.gen_bool(0.6));
            }
        }
        let p = masked_softmax(&s, &mask).unwrap();
        for i in 0..5 {
            let total: f64 = p.row(i).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for j in 0..5 {
                if !mask.get(i, j) {
                    assert_eq!(p.get(i, j), 0.0);
                }
            }
        }
        let w: Vec<f64> = (0..25).map(|_| rng.gen_range(0.5..1.5)).collect();
        let report = finite_difference_check(
            |g, v| {
                let p = g.masked_softmax(v[0], &mask)?;
                g.weighted_sum(p, &w)
            },
            &[NamedParam::new("scores", s)],
            1e-6,
            1e-5,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn pooling_identity_and_hand_cases() {
        let x = Tensor::matrix(4, 1, vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        assert_eq!(avg_pool_rows(&x, 1, 1).unwrap(), x);
        assert_eq!(avg_pool_rows(&x, 2, 2).unwrap().data(), &[3.0, 7.0]);

        let x = Tensor::matrix(5, 2, (0..10).map(f64::from).collect()).unwrap();
        let p = avg_pool_rows(&x, 2, 2).unwrap();
        assert_eq!(p.shape(), &[3, 2]);
        // loop reference
        let mut expected = Vec::new();
        for w in 0..3 {
            let rows: Vec<usize> = (w * 2..(w * 2 + 2).min(5)).collect();
            for c in 0..2 {
                expected.push(rows.iter().map(|&r| x.get(r, c)).sum::<f64>() / rows.len() as f64);
            }
        }
        assert_eq!(p.data(), expected.as_slice());
        assert_eq!(p.row(2), x.row(4));
    }

    #[test]
    fn pooling_rejects_zero_kernel() {
        let x = Tensor::zeros(vec![3, 1]).unwrap();
        assert!(matches!(
            avg_pool_rows(&x, 0, 1),
            Err(NumericsError::InvalidPooling { .. })
        ));
    }

    #[test]
    fn sum_of_squares_closed_form() {
        let x = Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap();
        let params = [NamedParam::new("x", x.clone())];
        let f = |g: &mut Graph, v: &[Var]| {
            let t = g.transpose(v[0])?;
            g.matmul(t, v[0])
        };
        let analytic = analytic_gradients(&f, &params).unwrap();
        assert_eq!(analytic[0], vec![2.0, 4.0, 6.0]);
        let report = finite_difference_check(f, &params, 1e-6, 1e-8).unwrap();
        assert!(report.max_relative_error < 1e-8, "{report:?}");
    }

    #[test]
    fn corrupted_gradient_fails_the_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = [
            NamedParam::new("a", random(&mut rng, 3, 2)),
            NamedParam::new("b", random(&mut rng, 2, 3)),
        ];
        let f = |g: &mut Graph, v: &[Var]| {
            let p = g.matmul(v[0], v[1])?;
            let s = g.softmax(p)?;
            let w: Vec<f64> = (0..9).map(|i| 1.0 + i as f64 / 10.0).collect();
            g.weighted_sum(s, &w)
        };
        let mut analytic = analytic_gradients(&f, &params).unwrap();
        let numeric = numeric_gradients(&f, &params, 1e-6).unwrap();
        assert!(compare_gradients(&params, &analytic, &numeric, 1e-5).passed);
        analytic.iter_mut().flatten().for_each(|x| *x *= 1.01);
        let report = compare_gradients(&params, &analytic, &numeric, 1e-5);
        assert!(!report.passed);
        assert!(report.max_relative_error > 5e-3);
    }

    #[test]
    fn non_finite_function_names_parameter() {
        let x = Tensor::matrix(1, 1, vec![f64::MAX]).unwrap();
        let err = finite_difference_check(
            |g, v| Ok(g.scale(v[0], 10.0)),
            &[NamedParam::new("huge", x)],
            1e-6,
            1e-5,
        )
        .unwrap_err();
        assert!(matches!(err, NumericsError::NonFinite { ref param, .. } if param == "huge"));
    }

    #[test]
    fn scatter_requires_exact_coverage() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(vec![2, 1]).unwrap());
        assert!(g.scatter_rows(3, vec![(a, vec![0, 1])]).is_err());
        assert!(g.scatter_rows(2, vec![(a, vec![0, 0])]).is_err());
        assert!(g.scatter_rows(2, vec![(a, vec![1, 0])]).is_ok());
    }
}
