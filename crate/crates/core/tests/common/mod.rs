//! Independent GRU reference and finite-difference oracle shared by the
//! gradient check and the acceptance suite.

#![allow(dead_code)]

use binspp::gru::{gru_backward, gru_forward, init_gru, GruParams, HeadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Reference loss: textbook GRU written with explicit indexing.
pub fn reference_loss(
    p: &GruParams,
    x: &[Vec<f64>],
    target: &[Vec<f64>],
    head: &HeadConfig,
) -> f64 {
    let (n, h) = (p.n, p.h);
    let wi = |g: usize, j: usize, i: usize| p.w_input[(g * h + j) * n + i];
    let wh = |g: usize, j: usize, i: usize| p.w_recurrent[(g * h + j) * h + i];
    let bi = |g: usize, j: usize| p.bias_input[g * h + j];
    let bh = |g: usize, j: usize| p.bias_recurrent[g * h + j];
    let mut state = vec![0.0; h];
    let mut total = 0.0;
    for (xt, tt) in x.iter().zip(target) {
        let mut next = vec![0.0; h];
        for j in 0..h {
            let dot_x = |g: usize| (0..n).map(|i| wi(g, j, i) * xt[i]).sum::<f64>();
            let dot_h = |g: usize| (0..h).map(|i| wh(g, j, i) * state[i]).sum::<f64>();
            let r = sig(dot_x(0) + bi(0, j) + dot_h(0) + bh(0, j));
            let z = sig(dot_x(1) + bi(1, j) + dot_h(1) + bh(1, j));
            let c = (dot_x(2) + bi(2, j) + r * (dot_h(2) + bh(2, j))).tanh();
            next[j] = (1.0 - z) * c + z * state[j];
        }
        state = next;
        for j in 0..h {
            let mut y = (1.0 + (head.beta * state[j]).exp()).ln() / head.beta;
            if head.clamp {
                y = y.min(1.0);
            }
            total += (tt[j] - y).powi(2);
        }
    }
    total / (x.len() * h) as f64
}

pub fn finite_difference(
    p: &GruParams,
    x: &[Vec<f64>],
    t: &[Vec<f64>],
    head: &HeadConfig,
    step: f64,
) -> GruParams {
    let mut g = GruParams::zeros(p.n, p.h).unwrap();
    let count = p.num_params();
    for idx in 0..count {
        let mut plus = p.clone();
        let mut minus = p.clone();
        *plus.iter_mut().nth(idx).unwrap() += step;
        *minus.iter_mut().nth(idx).unwrap() -= step;
        let d =
            (reference_loss(&plus, x, t, head) - reference_loss(&minus, x, t, head)) / (2.0 * step);
        *g.iter_mut().nth(idx).unwrap() = d;
    }
    g
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// ||a - b|| / max(||a||, ||b||) over the whole parameter vector. Central
/// differences at step 1e-6 carry ~1e-11 of absolute rounding noise, which
/// swamps elementwise ratios on entries of order 1e-7.
pub fn rel_err(a: &GruParams, b: &GruParams) -> f64 {
    let diff = norm(a.iter().zip(b.iter()).map(|(x, y)| x - y));
    diff / norm(a.iter().copied())
        .max(norm(b.iter().copied()))
        .max(f64::MIN_POSITIVE)
}

pub struct Case {
    pub params: GruParams,
    pub x: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
}

pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    let h = rng.gen_range(1..=3);
    let len = rng.gen_range(1..=5);
    let mut params = init_gru(n, h, seed ^ 0xabc).unwrap();
    params.scale(1.5);
    let x = (0..len)
        .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let target = (0..len)
        .map(|_| (0..h).map(|_| rng.gen_range(0.0..1.0)).collect())
        .collect();
    Case { params, x, target }
}

pub fn max_gradient_error(c: &Case, head: &HeadConfig) -> f64 {
    let flat_x: Vec<f64> = c.x.concat();
    let flat_t: Vec<f64> = c.target.concat();
    let (_, cache) = gru_forward(&c.params, &flat_x, None).unwrap();
    let analytic = gru_backward(&c.params, &cache, head, &flat_t).unwrap();
    let numeric = finite_difference(&c.params, &c.x, &c.target, head, 1e-6);
    rel_err(&analytic, &numeric)
}
