//! Class-weighted cross entropy over a labelled subset of rows.

use crate::label::{Class, ClassWeights};

use super::{softmax_rows, DenseMatrix, NumericsError};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    /// Number of masked rows whose true-class probability hit the floor.
    pub clamped: usize,
}

/// `(1/|mask|) Σ w_y · (−ln p_y)` over rows with `Some` target.
pub fn weighted_cross_entropy(
    probs: &DenseMatrix,
    targets: &[Option<Class>],
    weights: ClassWeights,
) -> Result<CrossEntropy, NumericsError> {
    check(probs, targets)?;
    let count = targets.iter().flatten().count();
    if count == 0 {
        return Err(NumericsError::EmptyMask);
    }
    let mut total = 0.0;
    let mut clamped = 0;
    for (i, t) in targets.iter().enumerate() {
        let Some(class) = t else { continue };
        let mut p = probs.get(i, class.index());
        if p < PROB_FLOOR {
            p = PROB_FLOOR;
            clamped += 1;
        }
        total += weights.of(*class) * -p.ln();
    }
    if clamped > 0 {
        log::warn!("cross entropy clamped {clamped} probabilities at {PROB_FLOOR}");
    }
    Ok(CrossEntropy { loss: total / count as f64, clamped })
}

/// Loss and its gradient with respect to the pre-softmax logits:
/// `w_y (p − e_y) / |mask|` on masked rows, zero elsewhere.
pub fn weighted_cross_entropy_with_logits(
    logits: &DenseMatrix,
    targets: &[Option<Class>],
    weights: ClassWeights,
) -> Result<(CrossEntropy, DenseMatrix), NumericsError> {
    let probs = softmax_rows(logits);
    let ce = weighted_cross_entropy(&probs, targets, weights)?;
    let count = targets.iter().flatten().count() as f64;
    let mut grad = DenseMatrix::zeros(probs.rows(), probs.cols());
    for (i, t) in targets.iter().enumerate() {
        let Some(class) = t else { continue };
        let w = weights.of(*class) / count;
        let row = grad.row_mut(i);
        for (c, g) in row.iter_mut().enumerate() {
            let onehot = if c == class.index() { 1.0 } else { 0.0 };
            *g = w * (probs.get(i, c) - onehot);
        }
    }
    Ok((ce, grad))
}

fn check(probs: &DenseMatrix, targets: &[Option<Class>]) -> Result<(), NumericsError> {
    if probs.cols() != 2 || probs.rows() != targets.len() {
        return Err(NumericsError::Shape(format!(
            "cross entropy: {}x{} probabilities for {} targets",
            probs.rows(),
            probs.cols(),
            targets.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use proptest::prelude::*;

    #[test]
    fn single_illicit_half() {
        let p = DenseMatrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        let ce = weighted_cross_entropy(&p, &[Some(Class::Illicit)], ClassWeights::ILLICIT_HEAVY).unwrap();
        assert!((ce.loss - 0.7 * 2f64.ln()).abs() < 1e-15);
        assert!((ce.loss - 0.48520).abs() < 1e-5);
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let p = DenseMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let ce = weighted_cross_entropy(&p, &[Some(Class::Licit), Some(Class::Illicit)], ClassWeights::ILLICIT_HEAVY)
            .unwrap();
        assert_eq!(ce.loss, 0.0);
        assert_eq!(ce.clamped, 0);
    }

    #[test]
    fn zero_probability_is_clamped() {
        let p = DenseMatrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let ce = weighted_cross_entropy(&p, &[Some(Class::Illicit)], ClassWeights::UNIFORM).unwrap();
        assert_eq!(ce.clamped, 1);
        assert!((ce.loss - -PROB_FLOOR.ln()).abs() < 1e-12);
    }

    #[test]
    fn unknown_rows_are_ignored_and_empty_mask_fails() {
        let p = DenseMatrix::from_vec(2, 2, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        let a = weighted_cross_entropy(&p, &[None, Some(Class::Illicit)], ClassWeights::UNIFORM).unwrap();
        assert!((a.loss - -(0.8f64).ln()).abs() < 1e-15);
        assert!(matches!(
            weighted_cross_entropy(&p, &[None, None], ClassWeights::UNIFORM),
            Err(NumericsError::EmptyMask)
        ));
    }

    #[test]
    fn uniform_weights_match_plain_cross_entropy() {
        let mut rng = RngStream::new(21);
        let n = 50;
        let logits = DenseMatrix::glorot(n, 2, &mut rng).scale(5.0);
        let probs = softmax_rows(&logits);
        let targets: Vec<Option<Class>> = (0..n)
            .map(|_| match rng.below(3) {
                0 => None,
                1 => Some(Class::Licit),
                _ => Some(Class::Illicit),
            })
            .collect();
        // plain mean negative log-likelihood, written out directly
        let mut sum = 0.0;
        let mut cnt = 0.0;
        for (i, t) in targets.iter().enumerate() {
            if let Some(c) = t {
                let col = if *c == Class::Illicit { 1 } else { 0 };
                sum -= probs.get(i, col).ln();
                cnt += 1.0;
            }
        }
        let ce = weighted_cross_entropy(&probs, &targets, ClassWeights::UNIFORM).unwrap();
        assert!((ce.loss - sum / cnt).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn monotone_in_true_class_probability(a in 0.001f64..0.999, b in 0.001f64..0.999) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let loss = |p: f64| {
                let m = DenseMatrix::from_vec(1, 2, vec![1.0 - p, p]).unwrap();
                weighted_cross_entropy(&m, &[Some(Class::Illicit)], ClassWeights::ILLICIT_HEAVY).unwrap().loss
            };
            prop_assert!(loss(hi) < loss(lo));
        }
    }
}
