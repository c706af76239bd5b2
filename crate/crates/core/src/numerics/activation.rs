use super::DenseMatrix;

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(logits: &DenseMatrix) -> DenseMatrix {
    let mut out = logits.clone();
    let cols = out.cols();
    if cols == 0 {
        return out;
    }
    for row in out.as_mut_slice().chunks_mut(cols) {
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub fn relu(x: &DenseMatrix) -> DenseMatrix {
    x.map(|v| v.max(0.0))
}

/// Multiplies `grad` by the ReLU derivative evaluated at the pre-activation.
pub fn relu_backward(grad: &DenseMatrix, pre_activation: &DenseMatrix) -> DenseMatrix {
    grad.zip_with(pre_activation, |g, z| if z > 0.0 { g } else { 0.0 })
        .expect("relu_backward shapes")
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&DenseMatrix::from_vec(2, 2, vec![0.0, 0.0, 1000.0, 1000.0]).unwrap());
        assert_eq!(s.as_slice(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn relu_example() {
        let r = relu(&DenseMatrix::from_vec(1, 3, vec![-1.0, 0.0, 2.0]).unwrap());
        assert_eq!(r.as_slice(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn softmax_rows_are_distributions(vals in prop::collection::vec(-500.0f64..500.0, 1..40), cols in 1usize..5) {
            let rows = vals.len() / cols;
            prop_assume!(rows > 0);
            let m = DenseMatrix::from_vec(rows, cols, vals[..rows * cols].to_vec()).unwrap();
            let s = softmax_rows(&m);
            for r in 0..rows {
                let row = s.row(r);
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            }
        }
    }
}
