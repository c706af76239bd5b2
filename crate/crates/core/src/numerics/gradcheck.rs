//! Central finite-difference verification of hand-derived gradients.

use super::{DenseMatrix, RngStream};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Tensors with more entries than this are checked on a random subsample.
    pub max_coords_per_tensor: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { h: 1e-5, max_coords_per_tensor: 256, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(tensor, flat index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

/// Compares `analytic` against `(L(θ+h) − L(θ−h)) / 2h` coordinate by
/// coordinate. Relative error uses `max(|a|, |b|, 1e-8)` as denominator.
pub fn grad_check(
    loss: impl Fn(&[DenseMatrix]) -> f64,
    params: &[DenseMatrix],
    analytic: &[DenseMatrix],
    config: GradCheckConfig,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "one gradient per parameter tensor");
    let mut rng = RngStream::with_stream(config.seed, 0x67c4);
    let mut probe: Vec<DenseMatrix> = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, checked: 0 };
    for (t, p) in params.iter().enumerate() {
        assert_eq!(p.shape(), analytic[t].shape(), "gradient shape for tensor {t}");
        let len = p.as_slice().len();
        let coords: Vec<usize> = if len <= config.max_coords_per_tensor {
            (0..len).collect()
        } else {
            rng.sample_indices(len, config.max_coords_per_tensor)
        };
        for k in coords {
            let base = p.as_slice()[k];
            probe[t].as_mut_slice()[k] = base + config.h;
            let up = loss(&probe);
            probe[t].as_mut_slice()[k] = base - config.h;
            let down = loss(&probe);
            probe[t].as_mut_slice()[k] = base;
            let numeric = (up - down) / (2.0 * config.h);
            let exact = analytic[t].as_slice()[k];
            let denom = numeric.abs().max(exact.abs()).max(1e-8);
            let rel = (numeric - exact).abs() / denom;
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((t, k));
            }
        }
    }
    report
}
