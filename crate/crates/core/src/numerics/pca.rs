//! Deterministic principal-component projection.
//!
//! The covariance matrix is formed explicitly (feature counts here are in
//! the low hundreds) and its leading eigenvectors are found by power
//! iteration with deflation, started from a fixed-seed vector. Each axis is
//! oriented so that its largest-magnitude loading is positive, which makes
//! the output a pure function of the input matrix.

use super::{dense::dot, DenseMatrix, NumericsError, RngStream};

const START_SEED: u64 = 0x0c0f_fee5;
const MAX_ITERS: usize = 200_000;
const TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaFit {
    pub mean: Vec<f64>,
    /// Unit axes, one per component, each of length `cols`.
    pub axes: Vec<Vec<f64>>,
    /// Variance captured by each axis (sample variance, `n − 1`).
    pub variances: Vec<f64>,
}

impl PcaFit {
    pub fn transform(&self, x: &DenseMatrix) -> Result<DenseMatrix, NumericsError> {
        if x.cols() != self.mean.len() {
            return Err(NumericsError::Shape(format!(
                "pca transform: {} columns, fitted on {}",
                x.cols(),
                self.mean.len()
            )));
        }
        let mut out = DenseMatrix::zeros(x.rows(), self.axes.len());
        let mut centered = vec![0.0; x.cols()];
        for r in 0..x.rows() {
            for ((c, v), m) in centered.iter_mut().zip(x.row(r)).zip(&self.mean) {
                *c = v - m;
            }
            for (k, axis) in self.axes.iter().enumerate() {
                out.set(r, k, dot(&centered, axis));
            }
        }
        Ok(out)
    }
}

pub fn pca_fit(x: &DenseMatrix, dims: usize) -> Result<PcaFit, NumericsError> {
    let (n, f) = x.shape();
    if n < dims || f < dims || dims == 0 {
        return Err(NumericsError::Shape(format!(
            "pca: cannot extract {dims} components from a {n}x{f} matrix"
        )));
    }
    let mean: Vec<f64> = x.column_sums().as_slice().iter().map(|s| s / n as f64).collect();
    let mut cov = DenseMatrix::zeros(f, f);
    let mut centered = vec![0.0; f];
    for r in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(x.row(r)).zip(&mean) {
            *c = v - m;
        }
        for i in 0..f {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            for (o, cj) in cov.row_mut(i).iter_mut().zip(&centered) {
                *o += ci * cj;
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let cov = cov.scale(1.0 / denom);
    let trace: f64 = (0..f).map(|i| cov.get(i, i)).sum();

    let mut rng = RngStream::new(START_SEED);
    let mut deflated = cov;
    let mut axes = Vec::with_capacity(dims);
    let mut variances = Vec::with_capacity(dims);
    for _ in 0..dims {
        let (axis, lambda) = if trace > 0.0 {
            leading_eigenpair(&deflated, &mut rng, trace)
        } else {
            (vec![0.0; f], 0.0)
        };
        if lambda > 0.0 {
            for i in 0..f {
                for j in 0..f {
                    let v = deflated.get(i, j) - lambda * axis[i] * axis[j];
                    deflated.set(i, j, v);
                }
            }
        }
        axes.push(axis);
        variances.push(lambda);
    }
    Ok(PcaFit { mean, axes, variances })
}

/// Centres `x` and projects it onto its top `dims` principal axes.
/// Zero-variance input yields all-zero coordinates.
pub fn pca_project(x: &DenseMatrix, dims: usize) -> Result<DenseMatrix, NumericsError> {
    pca_fit(x, dims)?.transform(x)
}

fn leading_eigenpair(m: &DenseMatrix, rng: &mut RngStream, trace: f64) -> (Vec<f64>, f64) {
    let f = m.rows();
    let mut v: Vec<f64> = (0..f).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    normalize(&mut v);
    for _ in 0..MAX_ITERS {
        let mut w: Vec<f64> = (0..f).map(|i| dot(m.row(i), &v)).collect();
        let norm = normalize(&mut w);
        // negligible remaining spectrum: the component carries no variance
        if norm <= trace * 1e-13 {
            return (vec![0.0; f], 0.0);
        }
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if delta < TOL {
            break;
        }
    }
    // Rayleigh quotient is more accurate than the last norm
    let mv: Vec<f64> = (0..f).map(|i| dot(m.row(i), &v)).collect();
    let lambda = dot(&v, &mv).max(0.0);
    orient(&mut v);
    (v, lambda)
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn orient(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
