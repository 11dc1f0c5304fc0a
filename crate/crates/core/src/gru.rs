//! Gated recurrent unit with exact backpropagation through time.
//!
//! Gate blocks are stacked in the order reset, update, candidate. The reset
//! gate multiplies the recurrent candidate term after the matrix product, and
//! input and recurrent paths carry separate biases, giving `3h(n + h + 2)`
//! parameters per cell.
//!
//! Sequences are row-major `L × dim` slices.

use std::collections::hash_map::DefaultHasher;
use std::hash::Hasher;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub n: usize,
    pub h: usize,
    /// `3h × n`, row-major.
    pub w_input: Vec<f64>,
    /// `3h × h`, row-major.
    pub w_recurrent: Vec<f64>,
    pub bias_input: Vec<f64>,
    pub bias_recurrent: Vec<f64>,
}

/// Gradients share the parameter layout.
pub type GruGrads = GruParams;

pub fn param_count(n: usize, h: usize) -> usize {
    3 * h * (n + h + 2)
}

/// Multiply-accumulates per time step for the two matrix-vector products.
pub fn macs_per_step(n: usize, h: usize) -> usize {
    3 * h * (n + h)
}

impl GruParams {
    pub fn zeros(n: usize, h: usize) -> Result<Self> {
        if n == 0 || h == 0 {
            return Err(Error::InvalidDims { n, h });
        }
        Ok(Self {
            n,
            h,
            w_input: vec![0.0; 3 * h * n],
            w_recurrent: vec![0.0; 3 * h * h],
            bias_input: vec![0.0; 3 * h],
            bias_recurrent: vec![0.0; 3 * h],
        })
    }

    pub fn num_params(&self) -> usize {
        self.w_input.len()
            + self.w_recurrent.len()
            + self.bias_input.len()
            + self.bias_recurrent.len()
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            &self.w_input,
            &self.w_recurrent,
            &self.bias_input,
            &self.bias_recurrent,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.w_input,
            &mut self.w_recurrent,
            &mut self.bias_input,
            &mut self.bias_recurrent,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors().into_iter().flatten()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors_mut().into_iter().flat_map(|t| t.iter_mut())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n == other.n
            && self.h == other.h
            && self
                .tensors()
                .iter()
                .zip(other.tensors())
                .all(|(a, b)| a.len() == b.len())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    fn fingerprint(&self) -> u64 {
        let mut hs = DefaultHasher::new();
        hs.write_usize(self.n);
        hs.write_usize(self.h);
        for v in self.iter() {
            hs.write_u64(v.to_bits());
        }
        hs.finish()
    }

    /// Element-wise `self += k * other`.
    pub fn add_scaled(&mut self, other: &Self, k: f64) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += k * b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.iter_mut() {
            *a *= k;
        }
    }
}

/// Uniform `U(-1/√h, 1/√h)` initialization, deterministic in `(n, h, seed)`.
pub fn init_gru(n: usize, h: usize, seed: u64) -> Result<GruParams> {
    let mut p = GruParams::zeros(n, h)?;
    let bound = 1.0 / (h as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in p.iter_mut() {
        *v = dist.sample(&mut rng);
    }
    Ok(p)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out = W[rows] · v` for a row-major block of `W` with `cols` columns.
#[inline]
fn matvec_block(w: &[f64], cols: usize, row0: usize, rows: usize, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let r = &w[(row0 + i) * cols..(row0 + i + 1) * cols];
        *o = r.iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

/// Activations saved by [`gru_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    fingerprint: u64,
    n: usize,
    h: usize,
    len: usize,
    x: Vec<f64>,
    /// `(L + 1) × h`; row 0 is the initial state.
    states: Vec<f64>,
    reset: Vec<f64>,
    update: Vec<f64>,
    cand: Vec<f64>,
    /// `W_hc·h + b_hc` before the reset gate is applied.
    rec_cand: Vec<f64>,
}

impl GruCache {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Hidden states `L × h` (excluding the initial state).
    pub fn hidden(&self) -> &[f64] {
        &self.states[self.h..]
    }

    pub fn last_state(&self) -> &[f64] {
        &self.states[self.len * self.h..]
    }
}

pub fn gru_forward(
    p: &GruParams,
    x_seq: &[f64],
    h0: Option<&[f64]>,
) -> Result<(Vec<f64>, GruCache)> {
    let (n, h) = (p.n, p.h);
    if !x_seq.len().is_multiple_of(n) {
        return Err(Error::ShapeMismatch {
            expected: (x_seq.len() / n, n),
            actual: (x_seq.len(), 1),
        });
    }
    if let Some(h0) = h0 {
        if h0.len() != h {
            return Err(Error::ShapeMismatch {
                expected: (1, h),
                actual: (1, h0.len()),
            });
        }
    }
    let len = x_seq.len() / n;
    let mut states = vec![0.0; (len + 1) * h];
    if let Some(h0) = h0 {
        states[..h].copy_from_slice(h0);
    }
    let mut reset = vec![0.0; len * h];
    let mut update = vec![0.0; len * h];
    let mut cand = vec![0.0; len * h];
    let mut rec_cand = vec![0.0; len * h];

    let mut gi = vec![0.0; 3 * h];
    let mut gh = vec![0.0; 3 * h];
    for t in 0..len {
        let x = &x_seq[t * n..(t + 1) * n];
        let (prev_rows, next_rows) = states.split_at_mut((t + 1) * h);
        let hp = &prev_rows[t * h..];
        let hn = &mut next_rows[..h];
        matvec_block(&p.w_input, n, 0, 3 * h, x, &mut gi);
        matvec_block(&p.w_recurrent, h, 0, 3 * h, hp, &mut gh);
        for j in 0..h {
            let r = sigmoid(gi[j] + p.bias_input[j] + gh[j] + p.bias_recurrent[j]);
            let z = sigmoid(gi[h + j] + p.bias_input[h + j] + gh[h + j] + p.bias_recurrent[h + j]);
            let hc = gh[2 * h + j] + p.bias_recurrent[2 * h + j];
            let c = (gi[2 * h + j] + p.bias_input[2 * h + j] + r * hc).tanh();
            hn[j] = (1.0 - z) * c + z * hp[j];
            reset[t * h + j] = r;
            update[t * h + j] = z;
            cand[t * h + j] = c;
            rec_cand[t * h + j] = hc;
        }
    }
    let cache = GruCache {
        fingerprint: p.fingerprint(),
        n,
        h,
        len,
        x: x_seq.to_vec(),
        states,
        reset,
        update,
        cand,
        rec_cand,
    };
    Ok((cache.hidden().to_vec(), cache))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadConfig {
    /// Softplus sharpness.
    pub beta: f64,
    /// Clip the output to at most 1.
    pub clamp: bool,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            beta: 10.0,
            clamp: true,
        }
    }
}

const SOFTPLUS_LINEAR: f64 = 30.0;

/// Softplus output and its derivative with respect to the input.
#[inline]
pub fn softplus(x: f64, cfg: &HeadConfig) -> (f64, f64) {
    let bx = cfg.beta * x;
    let (y, dy) = if bx > SOFTPLUS_LINEAR {
        (x, 1.0)
    } else {
        (bx.exp().ln_1p() / cfg.beta, sigmoid(bx))
    };
    if cfg.clamp && y > 1.0 {
        (1.0, 0.0)
    } else {
        (y, dy)
    }
}

pub fn softplus_head(h_seq: &[f64], cfg: &HeadConfig) -> Vec<f64> {
    h_seq.iter().map(|&x| softplus(x, cfg).0).collect()
}

pub fn mse_loss(est: &[f64], target: &[f64]) -> Result<f64> {
    if est.len() != target.len() {
        return Err(Error::LengthMismatch(est.len(), target.len()));
    }
    if est.is_empty() {
        return Err(Error::EmptyInput("loss sequence"));
    }
    Ok(est
        .iter()
        .zip(target)
        .map(|(e, t)| (t - e) * (t - e))
        .sum::<f64>()
        / est.len() as f64)
}

/// Gradient of `mse_loss(softplus_head(h), target)` averaged over all `L·h`
/// outputs of the cached sequence.
pub fn gru_backward(
    p: &GruParams,
    cache: &GruCache,
    head: &HeadConfig,
    target: &[f64],
) -> Result<GruGrads> {
    let norm = (cache.len * cache.h) as f64;
    let mut grads = GruParams::zeros(p.n, p.h)?;
    backward_into(p, cache, head, target, 1.0 / norm, &mut grads)?;
    Ok(grads)
}

/// Accumulates `scale · ∂(Σ squared error)/∂θ` into `grads` and returns the
/// summed squared error. Gradient does not flow into the initial state.
pub fn backward_into(
    p: &GruParams,
    cache: &GruCache,
    head: &HeadConfig,
    target: &[f64],
    scale: f64,
    grads: &mut GruGrads,
) -> Result<f64> {
    if cache.fingerprint != p.fingerprint() || cache.n != p.n || cache.h != p.h {
        return Err(Error::StaleCache);
    }
    if !grads.same_shape(p) {
        return Err(Error::ShapeMismatch {
            expected: (3 * p.h, p.n),
            actual: (grads.w_input.len() / grads.n.max(1), grads.n),
        });
    }
    let (n, h, len) = (p.n, p.h, cache.len);
    if target.len() != len * h {
        return Err(Error::LengthMismatch(target.len(), len * h));
    }

    let mut sse = 0.0;
    let mut dh_next = vec![0.0; h];
    let mut da = vec![0.0; 3 * h]; // input-side pre-activation grads [r, z, c]
    let mut dg = vec![0.0; 3 * h]; // recurrent-side grads [r, z, hc]
    for t in (0..len).rev() {
        let x = &cache.x[t * n..(t + 1) * n];
        let hp = &cache.states[t * h..(t + 1) * h];
        let ht = &cache.states[(t + 1) * h..(t + 2) * h];
        for j in 0..h {
            let (y, dy) = softplus(ht[j], head);
            let err = y - target[t * h + j];
            sse += err * err;
            let dh = 2.0 * err * dy * scale + dh_next[j];

            let i = t * h + j;
            let (r, z, c, hc) = (
                cache.reset[i],
                cache.update[i],
                cache.cand[i],
                cache.rec_cand[i],
            );
            let dz = dh * (hp[j] - c);
            let dc = dh * (1.0 - z);
            let dac = dc * (1.0 - c * c);
            let daz = dz * z * (1.0 - z);
            let dar = dac * hc * r * (1.0 - r);
            da[j] = dar;
            da[h + j] = daz;
            da[2 * h + j] = dac;
            dg[j] = dar;
            dg[h + j] = daz;
            dg[2 * h + j] = dac * r;
            dh_next[j] = dh * z;
        }
        for row in 0..3 * h {
            let a = da[row];
            let wrow = &mut grads.w_input[row * n..(row + 1) * n];
            for (g, xv) in wrow.iter_mut().zip(x) {
                *g += a * xv;
            }
            grads.bias_input[row] += a;
            let b = dg[row];
            let wrow = &mut grads.w_recurrent[row * h..(row + 1) * h];
            for (g, hv) in wrow.iter_mut().zip(hp) {
                *g += b * hv;
            }
            grads.bias_recurrent[row] += b;
            let wr = &p.w_recurrent[row * h..(row + 1) * h];
            for (d, w) in dh_next.iter_mut().zip(wr) {
                *d += b * w;
            }
        }
    }
    Ok(sse)
}

/// Adam with bias correction. Weight decay is added to the gradient before
/// the moment updates (coupled L2).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GruParams,
    pub v: GruParams,
    pub step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamState {
    pub fn new(like: &GruParams, lr: f64, weight_decay: f64) -> Self {
        let zero = GruParams::zeros(like.n, like.h).expect("valid params");
        Self {
            m: zero.clone(),
            v: zero,
            step_count: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

pub fn adam_step(p: &mut GruParams, grads: &GruGrads, s: &mut AdamState) -> Result<()> {
    if !p.same_shape(grads) || !p.same_shape(&s.m) {
        return Err(Error::ShapeMismatch {
            expected: (p.h, p.n),
            actual: (grads.h, grads.n),
        });
    }
    s.step_count += 1;
    let t = s.step_count as i32;
    let bc1 = 1.0 - s.beta1.powi(t);
    let bc2 = 1.0 - s.beta2.powi(t);
    let (b1, b2, lr, eps, wd) = (s.beta1, s.beta2, s.lr, s.eps, s.weight_decay);
    let params = p.iter_mut();
    let moments = s.m.iter_mut().zip(s.v.iter_mut());
    for ((w, g), (m, v)) in params.zip(grads.iter()).zip(moments) {
        let g = g + wd * *w;
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let mh = *m / bc1;
        let vh = *v / bc2;
        *w -= lr * mh / (vh.sqrt() + eps);
    }
    Ok(())
}
