//! Evolving GCN: the two layer weight matrices are the hidden state of a
//! matrix GRU that steps once per time slice.
//!
//! For layer `l` with weight shape `r × c`, step `t` computes
//!
//! * scores `y = H p / ‖p‖` over the layer input `H` (X for layer 0,
//!   `relu(ÂXW0_t)` for layer 1) and keeps the top `k = c` rows, ties by
//!   lower index; slices with fewer than `k` nodes pad with zero columns,
//! * the summary `S = (H_sel ∘ tanh(y_sel))ᵀ`, an `r × c` matrix,
//! * `W_t = GRU(S, W_{t-1})` with gates
//!   `Z = σ(Wz S + Uz W + Bz)`, `R = σ(Wr S + Ur W + Br)`,
//!   `W̃ = tanh(Wh S + Uh (R ∘ W) + Bh)`, `W_t = (1 − Z) ∘ W + Z ∘ W̃`.
//!
//! The GCN of step `t` then runs with `W0_t`, `W1_t`. The loss sums the
//! weighted cross entropy over every labelled training node (normalized by
//! their total count) and gradients flow back through all steps.
//! Prediction continues the recurrence from the state reached at the end
//! of training, so test steps must be presented in order.

use serde::{Deserialize, Serialize};

use crate::label::{Class, ClassWeights};
use crate::numerics::{
    relu, relu_backward, sigmoid, softmax_rows, weighted_cross_entropy_with_logits, DenseMatrix, RngStream,
    SparseMatrix,
};

use super::gcn::check_classes;
use super::{
    adam_train, check_positive, expect_params, DataView, Hyperparameters, ModelArtifact, ModelError, ModelFamily,
    ModelParams, Prediction, ARTIFACT_FORMAT_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub class_weights: ClassWeights,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self { hidden: 100, epochs: 1000, lr: 0.001, class_weights: ClassWeights::default() }
    }
}

/// Gate parameters for an `r × c` hidden state: `W*`, `U*` are `r × r`,
/// `B*` are `r × c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub wz: DenseMatrix,
    pub uz: DenseMatrix,
    pub bz: DenseMatrix,
    pub wr: DenseMatrix,
    pub ur: DenseMatrix,
    pub br: DenseMatrix,
    pub wh: DenseMatrix,
    pub uh: DenseMatrix,
    pub bh: DenseMatrix,
}

impl GruParams {
    const COUNT: usize = 9;

    pub fn new(rows: usize, cols: usize, rng: &mut RngStream) -> Self {
        let mut sq = || DenseMatrix::glorot(rows, rows, rng);
        let (wz, uz, wr, ur, wh, uh) = (sq(), sq(), sq(), sq(), sq(), sq());
        let b = DenseMatrix::zeros(rows, cols);
        Self { wz, uz, bz: b.clone(), wr, ur, br: b.clone(), wh, uh, bh: b }
    }

    fn to_vec(&self) -> Vec<DenseMatrix> {
        [&self.wz, &self.uz, &self.bz, &self.wr, &self.ur, &self.br, &self.wh, &self.uh, &self.bh]
            .into_iter()
            .cloned()
            .collect()
    }

    fn from_slice(t: &[DenseMatrix]) -> Self {
        Self {
            wz: t[0].clone(),
            uz: t[1].clone(),
            bz: t[2].clone(),
            wr: t[3].clone(),
            ur: t[4].clone(),
            br: t[5].clone(),
            wh: t[6].clone(),
            uh: t[7].clone(),
            bh: t[8].clone(),
        }
    }
}

/// Values kept from a GRU step for the backward pass.
#[derive(Clone, Debug)]
pub struct GruCache {
    s: DenseMatrix,
    h: DenseMatrix,
    z: DenseMatrix,
    r: DenseMatrix,
    rh: DenseMatrix,
    candidate: DenseMatrix,
}

fn affine(w: &DenseMatrix, s: &DenseMatrix, u: &DenseMatrix, h: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix, ModelError> {
    let mut a = w.matmul(s)?;
    a.add_assign(&u.matmul(h)?)?;
    a.add_assign(b)?;
    Ok(a)
}

/// One GRU step on matrix state `h` with input `s`.
pub fn gru_forward(g: &GruParams, s: &DenseMatrix, h: &DenseMatrix) -> Result<(DenseMatrix, GruCache), ModelError> {
    let z = affine(&g.wz, s, &g.uz, h, &g.bz)?.map(sigmoid);
    let r = affine(&g.wr, s, &g.ur, h, &g.br)?.map(sigmoid);
    let rh = r.hadamard(h)?;
    let candidate = affine(&g.wh, s, &g.uh, &rh, &g.bh)?.map(f64::tanh);
    let next = h.zip_with(&z, |hv, zv| (1.0 - zv) * hv)?.add(&z.hadamard(&candidate)?)?;
    Ok((next, GruCache { s: s.clone(), h: h.clone(), z, r, rh, candidate }))
}

/// Gradients of a GRU step given the gradient of its output:
/// `(parameter grads, dS, dH)`.
pub fn gru_backward(
    g: &GruParams,
    c: &GruCache,
    d_next: &DenseMatrix,
) -> Result<(GruParams, DenseMatrix, DenseMatrix), ModelError> {
    let dz = d_next.hadamard(&c.candidate.sub(&c.h)?)?;
    let daz = dz.zip_with(&c.z, |d, z| d * z * (1.0 - z))?;
    let dcand = d_next.hadamard(&c.z)?;
    let dah = dcand.zip_with(&c.candidate, |d, t| d * (1.0 - t * t))?;
    let drh = g.uh.t_matmul(&dah)?;
    let dr = drh.hadamard(&c.h)?;
    let dar = dr.zip_with(&c.r, |d, r| d * r * (1.0 - r))?;

    let grads = GruParams {
        wz: daz.matmul_t(&c.s)?,
        uz: daz.matmul_t(&c.h)?,
        bz: daz.clone(),
        wr: dar.matmul_t(&c.s)?,
        ur: dar.matmul_t(&c.h)?,
        br: dar.clone(),
        wh: dah.matmul_t(&c.s)?,
        uh: dah.matmul_t(&c.rh)?,
        bh: dah.clone(),
    };
    let mut ds = g.wz.t_matmul(&daz)?;
    ds.add_assign(&g.wr.t_matmul(&dar)?)?;
    ds.add_assign(&g.wh.t_matmul(&dah)?)?;
    let mut dh = d_next.zip_with(&c.z, |d, z| d * (1.0 - z))?;
    dh.add_assign(&drh.hadamard(&c.r)?)?;
    dh.add_assign(&g.uz.t_matmul(&daz)?)?;
    dh.add_assign(&g.ur.t_matmul(&dar)?)?;
    Ok((grads, ds, dh))
}

struct Summary {
    selected: Vec<usize>,
    tanh_y: Vec<f64>,
    p_hat: Vec<f64>,
    p_norm: f64,
    s: DenseMatrix,
}

/// Top-`k` summary of the rows of `x` (`N × r`) scored by `p` (`r × 1`).
fn summarize(x: &DenseMatrix, p: &DenseMatrix, k: usize) -> Summary {
    let p_norm = p.frobenius_sq().sqrt().max(f64::MIN_POSITIVE);
    let p_hat: Vec<f64> = p.as_slice().iter().map(|v| v / p_norm).collect();
    let scores: Vec<f64> = (0..x.rows()).map(|i| crate::numerics::dot(x.row(i), &p_hat)).collect();
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    let tanh_y: Vec<f64> = order.iter().map(|&i| scores[i].tanh()).collect();
    let mut s = DenseMatrix::zeros(x.cols(), k);
    for (j, (&i, &t)) in order.iter().zip(&tanh_y).enumerate() {
        for (f, &v) in x.row(i).iter().enumerate() {
            s.set(f, j, v * t);
        }
    }
    Summary { selected: order, tanh_y, p_hat, p_norm, s }
}

/// Adds the input gradient into `dx` (when given) and returns `dp`.
fn summarize_backward(x: &DenseMatrix, sum: &Summary, ds: &DenseMatrix, mut dx: Option<&mut DenseMatrix>) -> DenseMatrix {
    let r = x.cols();
    let mut dp_hat = vec![0.0; r];
    for (j, (&i, &t)) in sum.selected.iter().zip(&sum.tanh_y).enumerate() {
        let row = x.row(i);
        let dm: Vec<f64> = (0..r).map(|f| ds.get(f, j)).collect();
        let dy = crate::numerics::dot(&dm, row) * (1.0 - t * t);
        if let Some(dx) = dx.as_deref_mut() {
            let out = dx.row_mut(i);
            for f in 0..r {
                out[f] += dm[f] * t + dy * sum.p_hat[f];
            }
        }
        for f in 0..r {
            dp_hat[f] += dy * row[f];
        }
    }
    let proj = crate::numerics::dot(&dp_hat, &sum.p_hat);
    let dp = dp_hat.iter().zip(&sum.p_hat).map(|(d, ph)| (d - ph * proj) / sum.p_norm).collect();
    DenseMatrix::from_vec(r, 1, dp).expect("finite gradient")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveLayer {
    /// Hidden state before the first step.
    pub init: DenseMatrix,
    /// Scoring vector, `r × 1`.
    pub p: DenseMatrix,
    pub gru: GruParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveParams {
    pub layers: Vec<EvolveLayer>,
    /// Layer weights after the last training step; prediction resumes here.
    pub final_state: Vec<DenseMatrix>,
}

const PER_LAYER: usize = 2 + GruParams::COUNT;

impl EvolveParams {
    pub fn new(features: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let layers: Vec<EvolveLayer> = [(features, hidden), (hidden, 2)]
            .into_iter()
            .map(|(r, c)| EvolveLayer {
                init: DenseMatrix::glorot(r, c, rng),
                p: DenseMatrix::glorot(r, 1, rng),
                gru: GruParams::new(r, c, rng),
            })
            .collect();
        let final_state = layers.iter().map(|l| l.init.clone()).collect();
        Self { layers, final_state }
    }

    /// `[init, p, Wz, Uz, Bz, Wr, Ur, Br, Wh, Uh, Bh]` per layer.
    pub fn tensors(&self) -> Vec<DenseMatrix> {
        self.layers
            .iter()
            .flat_map(|l| {
                let mut t = vec![l.init.clone(), l.p.clone()];
                t.extend(l.gru.to_vec());
                t
            })
            .collect()
    }

    pub fn from_tensors(t: &[DenseMatrix]) -> Self {
        let layers: Vec<EvolveLayer> = t
            .chunks(PER_LAYER)
            .map(|c| EvolveLayer { init: c[0].clone(), p: c[1].clone(), gru: GruParams::from_slice(&c[2..]) })
            .collect();
        let final_state = layers.iter().map(|l| l.init.clone()).collect();
        Self { layers, final_state }
    }
}

/// One non-empty time slice prepared for the recurrence.
pub struct StepInput {
    pub a: SparseMatrix,
    pub x: DenseMatrix,
    pub ax: DenseMatrix,
    pub targets: Vec<Option<Class>>,
}

impl StepInput {
    pub fn new(a: SparseMatrix, x: DenseMatrix, targets: Vec<Option<Class>>) -> Result<Self, ModelError> {
        let ax = a.spmm(&x)?;
        Ok(Self { a, x, ax, targets })
    }
}

struct StepCache {
    sum0: Summary,
    gru0: GruCache,
    w0: DenseMatrix,
    z1: DenseMatrix,
    h1: DenseMatrix,
    sum1: Summary,
    gru1: GruCache,
    w1: DenseMatrix,
    ah1: DenseMatrix,
    z2: DenseMatrix,
}

fn step_forward(
    layers: &[(&DenseMatrix, &GruParams)],
    state: &[DenseMatrix],
    step: &StepInput,
) -> Result<StepCache, ModelError> {
    let (p0, g0) = layers[0];
    let (p1, g1) = layers[1];
    let sum0 = summarize(&step.x, p0, state[0].cols());
    let (w0, gru0) = gru_forward(g0, &sum0.s, &state[0])?;
    let z1 = step.ax.matmul(&w0)?;
    let h1 = relu(&z1);
    let sum1 = summarize(&h1, p1, state[1].cols());
    let (w1, gru1) = gru_forward(g1, &sum1.s, &state[1])?;
    let ah1 = step.a.spmm(&h1)?;
    let z2 = ah1.matmul(&w1)?;
    Ok(StepCache { sum0, gru0, w0, z1, h1, sum1, gru1, w1, ah1, z2 })
}

fn unpack(params: &[DenseMatrix]) -> (Vec<DenseMatrix>, Vec<DenseMatrix>, Vec<GruParams>) {
    let chunks: Vec<&[DenseMatrix]> = params.chunks(PER_LAYER).collect();
    let init = chunks.iter().map(|c| c[0].clone()).collect();
    let p = chunks.iter().map(|c| c[1].clone()).collect();
    let gru = chunks.iter().map(|c| GruParams::from_slice(&c[2..])).collect();
    (init, p, gru)
}

/// Runs the recurrence from `state` over `steps`, returning per-step
/// logits and the state after the last step.
fn run(
    p: &[DenseMatrix],
    gru: &[GruParams],
    mut state: Vec<DenseMatrix>,
    steps: &[StepInput],
) -> Result<(Vec<DenseMatrix>, Vec<DenseMatrix>), ModelError> {
    let layers = [(&p[0], &gru[0]), (&p[1], &gru[1])];
    let mut logits = Vec::with_capacity(steps.len());
    for step in steps {
        let c = step_forward(&layers, &state, step)?;
        logits.push(c.z2);
        state = vec![c.w0, c.w1];
    }
    Ok((logits, state))
}

/// Loss over all steps and gradients for the flat tensor list of
/// [`EvolveParams::tensors`]. Every `a` must be symmetric.
pub fn evolve_loss_and_grad(
    params: &[DenseMatrix],
    steps: &[StepInput],
    weights: ClassWeights,
) -> Result<(f64, Vec<DenseMatrix>), ModelError> {
    let (init, p, gru) = unpack(params);
    let layers = [(&p[0], &gru[0]), (&p[1], &gru[1])];
    let total: usize = steps.iter().map(|s| s.targets.iter().flatten().count()).sum();
    if total == 0 {
        return Err(ModelError::EmptyMask);
    }
    let mut caches = Vec::with_capacity(steps.len());
    let mut state = init.clone();
    for step in steps {
        let c = step_forward(&layers, &state, step)?;
        state = vec![c.w0.clone(), c.w1.clone()];
        caches.push(c);
    }

    let mut loss = 0.0;
    let zeros = |m: &DenseMatrix| DenseMatrix::zeros(m.rows(), m.cols());
    let mut grads: Vec<DenseMatrix> = params.iter().map(zeros).collect();
    let mut carry = vec![zeros(&init[0]), zeros(&init[1])];
    for (step, c) in steps.iter().zip(&caches).rev() {
        let m = step.targets.iter().flatten().count();
        let g2 = if m == 0 {
            zeros(&c.z2)
        } else {
            let (ce, g) = weighted_cross_entropy_with_logits(&c.z2, &step.targets, weights)?;
            let share = m as f64 / total as f64;
            loss += ce.loss * share;
            g.scale(share)
        };

        let mut dw1 = c.ah1.t_matmul(&g2)?;
        dw1.add_assign(&carry[1])?;
        let mut dh1 = step.a.spmm(&g2.matmul_t(&c.w1)?)?;
        let (gg1, ds1, dprev1) = gru_backward(&gru[1], &c.gru1, &dw1)?;
        let dp1 = summarize_backward(&c.h1, &c.sum1, &ds1, Some(&mut dh1));
        let dz1 = relu_backward(&dh1, &c.z1);
        let mut dw0 = step.ax.t_matmul(&dz1)?;
        dw0.add_assign(&carry[0])?;
        let (gg0, ds0, dprev0) = gru_backward(&gru[0], &c.gru0, &dw0)?;
        let dp0 = summarize_backward(&step.x, &c.sum0, &ds0, None);

        for (layer, (dp, gg)) in [(dp0, gg0), (dp1, gg1)].into_iter().enumerate() {
            let base = layer * PER_LAYER;
            grads[base + 1].add_assign(&dp)?;
            for (k, g) in gg.to_vec().iter().enumerate() {
                grads[base + 2 + k].add_assign(g)?;
            }
        }
        carry = vec![dprev0, dprev1];
    }
    grads[0].add_assign(&carry[0])?;
    grads[PER_LAYER].add_assign(&carry[1])?;
    Ok((loss, grads))
}

pub struct EvolveFamily;

fn step_inputs(view: &DataView<'_>) -> Result<(Vec<Vec<usize>>, Vec<StepInput>), ModelError> {
    let mut nodes = Vec::new();
    let mut inputs = Vec::new();
    for t in view.steps() {
        let n = view.step_nodes(t);
        if n.is_empty() {
            continue;
        }
        let x = view.features_of(n)?;
        let a = view.adjacency(n)?;
        let targets = view.labels_of(n)?;
        inputs.push(StepInput::new(a, x, targets)?);
        nodes.push(n.to_vec());
    }
    Ok((nodes, inputs))
}

impl ModelFamily for EvolveFamily {
    fn name(&self) -> &'static str {
        "evolvegcn"
    }

    fn display_name(&self) -> &'static str {
        "EvolveGCN"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["evolve-gcn", "evolve"]
    }

    fn uses_graph(&self) -> bool {
        true
    }

    fn default_hyperparameters(&self) -> Hyperparameters {
        Hyperparameters::Evolve(EvolveConfig::default())
    }

    fn fit(&self, view: &DataView<'_>, hp: &Hyperparameters, seed: u64) -> Result<ModelArtifact, ModelError> {
        let Hyperparameters::Evolve(cfg) = hp else {
            return Err(ModelError::Config(format!("{} hyperparameters given to evolvegcn", hp.kind())));
        };
        check_positive("learning rate", cfg.lr)?;
        if cfg.hidden == 0 {
            return Err(ModelError::Config("embedding width must be positive".into()));
        }
        let (_, steps) = step_inputs(view)?;
        let all: Vec<Option<Class>> = steps.iter().flat_map(|s| s.targets.iter().copied()).collect();
        check_classes(&all)?;
        let mut rng = RngStream::new(seed).derive(0x50);
        let mut params = EvolveParams::new(view.feature_count(), cfg.hidden, &mut rng).tensors();
        let trace =
            adam_train(&mut params, cfg.epochs, cfg.lr, |p| evolve_loss_and_grad(p, &steps, cfg.class_weights))?;
        let mut trained = EvolveParams::from_tensors(&params);
        let (init, p, gru) = unpack(&params);
        trained.final_state = run(&p, &gru, init, &steps)?.1;
        Ok(ModelArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            family: self.name().to_string(),
            hyperparameters: hp.clone(),
            seed,
            feature_count: view.feature_count(),
            trained_through: view.last_step(),
            loss_trace: trace,
            params: ModelParams::Evolve(trained),
        })
    }

    fn predict(&self, artifact: &ModelArtifact, view: &DataView<'_>) -> Result<Prediction, ModelError> {
        let e = expect_params(artifact, self.name(), |p| match p {
            ModelParams::Evolve(e) => Some(e),
            _ => None,
        })?;
        let mut nodes = Vec::new();
        let mut inputs = Vec::new();
        for t in view.steps() {
            let n = view.step_nodes(t);
            if n.is_empty() {
                continue;
            }
            let x = view.features_of(n)?;
            let a = view.adjacency(n)?;
            inputs.push(StepInput::new(a, x, Vec::new())?);
            nodes.extend_from_slice(n);
        }
        let (_, p, gru) = unpack(&e.tensors());
        let (logits, _) = run(&p, &gru, e.final_state.clone(), &inputs)?;
        let mut probs = DenseMatrix::zeros(nodes.len(), 2);
        let mut row = 0;
        for z in logits {
            let s = softmax_rows(&z);
            for i in 0..s.rows() {
                probs.row_mut(row).copy_from_slice(s.row(i));
                row += 1;
            }
        }
        Ok(Prediction { nodes, probs })
    }
}
