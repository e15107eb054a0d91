use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::AdamState;
use super::arch::{NetArchitecture, ParamLayout};
use crate::error::{Error, Result};
use crate::features::{CovVector, FeatureVector, COV_LEN, FEATURE_LEN};

pub const INIT_SLOPE: f64 = 0.25;

/// Batches are processed in slices of this many samples so activations of
/// one layer stay cache-resident.
const CHUNK_ROWS: usize = 256;

/// Element-wise PReLU: `x` where `x > 0`, otherwise `slope * x`.
pub fn prelu(x: &[f64], slopes: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), slopes.len(), "prelu needs one slope per input");
    x.iter()
        .zip(slopes)
        .map(|(&x, &s)| if x > 0.0 { x } else { s * x })
        .collect()
}

/// Network parameters plus the optimizer state that travels with them.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    arch: NetArchitecture,
    layout: ParamLayout,
    params: Vec<f64>,
    pub(crate) adam: AdamState,
}

/// Reusable activation buffers for batched passes.
#[derive(Debug, Default)]
pub struct Workspace {
    batch: usize,
    pre: Vec<Vec<f64>>,
    nodes: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
}

impl Workspace {
    fn prepare(&mut self, arch: &NetArchitecture, batch: usize) {
        if self.batch == batch && self.nodes.len() == arch.widths.len() {
            return;
        }
        self.batch = batch;
        let n = arch.widths.len();
        for bufs in [&mut self.nodes, &mut self.grads, &mut self.pre] {
            bufs.resize_with(n, Vec::new);
        }
        self.pre.truncate(n - 1);
        // Shrinking keeps capacity, so smaller trailing chunks reuse memory.
        for (k, &w) in arch.widths.iter().enumerate() {
            self.nodes[k].resize(w * batch, 0.0);
            self.grads[k].resize(w * batch, 0.0);
            if k > 0 {
                self.pre[k - 1].resize(w * batch, 0.0);
            }
        }
    }
}

/// Loss of one batch: `half_sq` is the mean over samples of
/// `1/2 ||y_hat - y||^2` (the differentiated objective), `mse` the mean
/// squared error per output entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLoss {
    pub half_sq: f64,
    pub mse: f64,
}

/// `c (m x n) = beta c + a (m x k) b (k x n)`, with explicit element strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    let max_index = |rows: usize, cols: usize, rs: isize, cs: isize| {
        (rows.saturating_sub(1) as isize * rs + cols.saturating_sub(1) as isize * cs) as usize
    };
    assert!(m == 0 || k == 0 || max_index(m, k, rsa, csa) < a.len());
    assert!(k == 0 || n == 0 || max_index(k, n, rsb, csb) < b.len());
    assert!(m * n <= c.len());
    // SAFETY: the asserts above bound every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

impl Network {
    /// Fresh network: weights uniform in `±1/sqrt(fan_in)`, zero biases and
    /// every PReLU slope at 0.25.
    pub fn init(arch: &NetArchitecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for slots in &layout.layers {
            let bound = 1.0 / (slots.fan_in as f64).sqrt();
            for w in &mut params[slots.weight.clone()] {
                *w = rng.random_range(-bound..bound);
            }
            if let Some(r) = &slots.slope {
                params[r.clone()].fill(INIT_SLOPE);
            }
        }
        for r in &layout.shortcuts {
            params[r.clone()].fill(INIT_SLOPE);
        }
        Ok(Self::from_parts(arch.clone(), params, AdamState::new(layout.total))
            .expect("fresh parameters match their layout"))
    }

    pub fn from_parts(arch: NetArchitecture, params: Vec<f64>, adam: AdamState) -> Result<Self> {
        arch.validate()?;
        let layout = arch.layout();
        if params.len() != layout.total || adam.len() != layout.total {
            return Err(Error::shape(format!(
                "architecture needs {} parameters, got {} (optimizer state {})",
                layout.total,
                params.len(),
                adam.len()
            )));
        }
        Ok(Self {
            arch,
            layout,
            params,
            adam,
        })
    }

    pub fn arch(&self) -> &NetArchitecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.adam
    }

    /// Applies one Adam update with learning rate `lr`.
    pub fn adam_step(&mut self, grads: &[f64], lr: f64) {
        self.adam.step(&mut self.params, grads, lr);
    }

    /// Single-sample inference.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.arch.input_width() {
            return Err(Error::shape(format!(
                "network expects {} inputs, got {}",
                self.arch.input_width(),
                input.len()
            )));
        }
        let p = &self.params;
        let mut nodes: Vec<Vec<f64>> = Vec::with_capacity(self.arch.widths.len());
        nodes.push(input.to_vec());
        for (k, slots) in self.layout.layers.iter().enumerate() {
            let prev = &nodes[k];
            let w = &p[slots.weight.clone()];
            let b = &p[slots.bias.clone()];
            let mut out: Vec<f64> = (0..slots.fan_out)
                .map(|j| b[j] + dot(&w[j * slots.fan_in..(j + 1) * slots.fan_in], prev))
                .collect();
            if let Some(r) = &slots.slope {
                for (x, &s) in out.iter_mut().zip(&p[r.clone()]) {
                    if *x <= 0.0 {
                        *x *= s;
                    }
                }
            }
            for (s, &(from, to)) in self.arch.shortcuts.iter().enumerate() {
                if to == k + 1 {
                    let slopes = &p[self.layout.shortcuts[s].clone()];
                    for ((x, &src), &sl) in out.iter_mut().zip(&nodes[from]).zip(slopes) {
                        *x += if src > 0.0 { src } else { sl * src };
                    }
                }
            }
            nodes.push(out);
        }
        Ok(nodes.pop().expect("at least one layer"))
    }

    /// Feature vector to covariance codec, for the standard 72 -> 6 layout.
    pub fn predict(&self, v: &FeatureVector) -> Result<CovVector> {
        if self.arch.input_width() != FEATURE_LEN || self.arch.output_width() != COV_LEN {
            return Err(Error::shape("network is not a 72 -> 6 precoder"));
        }
        let out = self.forward(&v.0)?;
        let mut q = [0.0; COV_LEN];
        q.copy_from_slice(&out);
        Ok(CovVector(q))
    }

    /// Batched inference on row-major `batch x input_width` inputs. Output
    /// rows match [`Network::forward`] up to rounding.
    pub fn forward_many(&self, inputs: &[f64], ws: &mut Workspace) -> Result<Vec<f64>> {
        let (n_in, n_out) = (self.arch.input_width(), self.arch.output_width());
        if inputs.len() % n_in != 0 {
            return Err(Error::shape(format!("{} inputs is not a multiple of {n_in}", inputs.len())));
        }
        let layers = self.arch.num_layers();
        let mut out = Vec::with_capacity(inputs.len() / n_in * n_out);
        for x in inputs.chunks(CHUNK_ROWS * n_in) {
            self.forward_batch(x, x.len() / n_in, ws);
            out.extend_from_slice(&ws.nodes[layers]);
        }
        Ok(out)
    }

    /// [`Network::predict`] for many feature vectors at once.
    pub fn predict_many(&self, features: &[FeatureVector], ws: &mut Workspace) -> Result<Vec<CovVector>> {
        if self.arch.input_width() != FEATURE_LEN || self.arch.output_width() != COV_LEN {
            return Err(Error::shape("network is not a 72 -> 6 precoder"));
        }
        let inputs: Vec<f64> = features.iter().flat_map(|v| v.0).collect();
        let out = self.forward_many(&inputs, ws)?;
        Ok(out
            .chunks_exact(COV_LEN)
            .map(|q| CovVector(q.try_into().expect("COV_LEN chunk")))
            .collect())
    }

    fn forward_batch(&self, inputs: &[f64], batch: usize, ws: &mut Workspace) {
        ws.prepare(&self.arch, batch);
        let p = &self.params;
        ws.nodes[0].copy_from_slice(inputs);
        for (k, slots) in self.layout.layers.iter().enumerate() {
            let (fan_in, fan_out) = (slots.fan_in, slots.fan_out);
            let (before, after) = ws.nodes.split_at_mut(k + 1);
            let prev = &before[k];
            let pre = &mut ws.pre[k];
            let w = &p[slots.weight.clone()];
            let bias = &p[slots.bias.clone()];
            for row in pre.chunks_exact_mut(fan_out) {
                row.copy_from_slice(bias);
            }
            // pre (batch x out) += prev (batch x in) * W^T (in x out)
            gemm(
                batch,
                fan_in,
                fan_out,
                prev,
                (fan_in as isize, 1),
                w,
                (1, fan_in as isize),
                1.0,
                pre,
            );
            let out = &mut after[0];
            match &slots.slope {
                Some(r) => {
                    let slopes = &p[r.clone()];
                    for (orow, zrow) in out.chunks_exact_mut(fan_out).zip(pre.chunks_exact(fan_out)) {
                        for ((o, &z), &s) in orow.iter_mut().zip(zrow).zip(slopes) {
                            *o = z.max(0.0) + s * z.min(0.0);
                        }
                    }
                }
                None => out.copy_from_slice(pre),
            }
            for (s, &(from, to)) in self.arch.shortcuts.iter().enumerate() {
                if to == k + 1 {
                    let slopes = &p[self.layout.shortcuts[s].clone()];
                    let src = &before[from];
                    for (orow, srow) in out.chunks_exact_mut(fan_out).zip(src.chunks_exact(fan_out)) {
                        for ((o, &x), &sl) in orow.iter_mut().zip(srow).zip(slopes) {
                            *o += x.max(0.0) + sl * x.min(0.0);
                        }
                    }
                }
            }
        }
    }

    /// Batched forward and backward pass of the mean per-sample objective
    /// `1/2 ||f(x) - y||^2`. `inputs` and `targets` are row-major
    /// `batch x width`; `grad` is overwritten with the gradient in
    /// parameter-layout order.
    pub fn loss_and_grad(
        &self,
        inputs: &[f64],
        targets: &[f64],
        batch: usize,
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> Result<BatchLoss> {
        let (n_in, n_out) = (self.arch.input_width(), self.arch.output_width());
        if batch == 0 || inputs.len() != batch * n_in || targets.len() != batch * n_out {
            return Err(Error::shape(format!(
                "batch of {batch} needs {} inputs and {} targets, got {} and {}",
                batch * n_in,
                batch * n_out,
                inputs.len(),
                targets.len()
            )));
        }
        if grad.len() != self.layout.total {
            return Err(Error::shape("gradient buffer does not match parameter count"));
        }
        let scale = 1.0 / batch as f64;
        grad.fill(0.0);
        let mut sq = 0.0;
        for (x, y) in inputs.chunks(CHUNK_ROWS * n_in).zip(targets.chunks(CHUNK_ROWS * n_out)) {
            sq += self.accumulate_chunk(x, y, x.len() / n_in, scale, grad, ws);
        }
        Ok(BatchLoss {
            half_sq: 0.5 * sq * scale,
            mse: sq / (batch * n_out) as f64,
        })
    }

    /// Forward and backward pass over `rows` samples, adding
    /// `scale`-weighted gradients into `grad`. Returns the summed squared
    /// residual.
    fn accumulate_chunk(
        &self,
        inputs: &[f64],
        targets: &[f64],
        rows: usize,
        scale: f64,
        grad: &mut [f64],
        ws: &mut Workspace,
    ) -> f64 {
        let batch = rows;
        self.forward_batch(inputs, batch, ws);

        let layers = self.arch.num_layers();
        let mut sq = 0.0;
        for d in &mut ws.grads {
            d.fill(0.0);
        }
        for ((d, &y_hat), &y) in ws.grads[layers].iter_mut().zip(&ws.nodes[layers]).zip(targets) {
            let r = y_hat - y;
            sq += r * r;
            *d = r * scale;
        }
        let p = &self.params;

        for k in (0..layers).rev() {
            let slots = &self.layout.layers[k];
            let (fan_in, fan_out) = (slots.fan_in, slots.fan_out);
            let (lower, upper) = ws.grads.split_at_mut(k + 1);
            let g_out = &mut upper[0];

            for (s, &(from, to)) in self.arch.shortcuts.iter().enumerate() {
                if to != k + 1 {
                    continue;
                }
                let range = self.layout.shortcuts[s].clone();
                let slopes = &p[range.clone()];
                let src = &ws.nodes[from];
                let g_src = &mut lower[from];
                let g_slope = &mut grad[range];
                for ((grow, srow), dst) in g_out
                    .chunks_exact(fan_out)
                    .zip(src.chunks_exact(fan_out))
                    .zip(g_src.chunks_exact_mut(fan_out))
                {
                    let lanes = dst.iter_mut().zip(g_slope.iter_mut()).zip(grow.iter().zip(srow)).zip(slopes);
                    for (((d, gs), (&g, &x)), &sl) in lanes {
                        *d += if x > 0.0 { g } else { sl * g };
                        *gs += x.min(0.0) * g;
                    }
                }
            }

            // g_out becomes the gradient w.r.t. the pre-activation.
            if let Some(r) = &slots.slope {
                let slopes = &p[r.clone()];
                let g_slope = &mut grad[r.clone()];
                for (grow, zrow) in g_out.chunks_exact_mut(fan_out).zip(ws.pre[k].chunks_exact(fan_out)) {
                    for (((g, gs), &z), &sl) in grow.iter_mut().zip(g_slope.iter_mut()).zip(zrow).zip(slopes) {
                        *gs += z.min(0.0) * *g;
                        *g *= if z > 0.0 { 1.0 } else { sl };
                    }
                }
            }
            let g_pre = &*g_out;

            let g_bias = &mut grad[slots.bias.clone()];
            for row in g_pre.chunks_exact(fan_out) {
                for (gb, &g) in g_bias.iter_mut().zip(row) {
                    *gb += g;
                }
            }
            // dW (out x in) = g_pre^T (out x batch) * a_prev (batch x in)
            gemm(
                fan_out,
                batch,
                fan_in,
                g_pre,
                (1, fan_out as isize),
                &ws.nodes[k],
                (fan_in as isize, 1),
                1.0,
                &mut grad[slots.weight.clone()],
            );
            if k > 0 {
                // d a_prev (batch x in) += g_pre (batch x out) * W (out x in)
                gemm(
                    batch,
                    fan_out,
                    fan_in,
                    g_pre,
                    (fan_out as isize, 1),
                    &p[slots.weight.clone()],
                    (fan_in as isize, 1),
                    1.0,
                    &mut lower[k],
                );
            }
        }
        sq
    }

    /// Gradient of `1/2 ||f(v) - target||^2` for a single sample.
    pub fn backward(&self, input: &[f64], target: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.layout.total];
        let mut ws = Workspace::default();
        self.loss_and_grad(input, target, 1, &mut grad, &mut ws)?;
        Ok(grad)
    }
}
