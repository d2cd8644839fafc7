//! Single LSTM cell, gates ordered input, forget, output, candidate.

use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{concat, sigmoid, tanh, Tensor};

/// Values kept from the forward pass for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct LstmCache {
    /// `[x; h_prev]`
    pub input: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub g: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Returns `(h, c)` for input `x` and previous state.
pub(crate) fn forward(
    weight: &Tensor,
    bias: &Tensor,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let hidden = h_prev.len();
    let input = concat(&[x, h_prev]);
    let z = weight.affine(&input, bias);
    let mut i = vec![0.0; hidden];
    let mut f = vec![0.0; hidden];
    let mut o = vec![0.0; hidden];
    let mut g = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut tanh_c = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    for k in 0..hidden {
        i[k] = sigmoid(z[k]);
        f[k] = sigmoid(z[hidden + k]);
        o[k] = sigmoid(z[2 * hidden + k]);
        g[k] = tanh(z[3 * hidden + k]);
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        tanh_c[k] = tanh(c[k]);
        h[k] = o[k] * tanh_c[k];
    }
    let cache = LstmCache {
        input,
        c_prev: c_prev.to_vec(),
        i,
        f,
        o,
        g,
        tanh_c,
    };
    (h, c, cache)
}

/// Cheaper forward pass for decoding: no cache.
pub(crate) fn step(weight: &Tensor, bias: &Tensor, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hidden = h_prev.len();
    let input = concat(&[x, h_prev]);
    let z = weight.affine(&input, bias);
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    for k in 0..hidden {
        let i = sigmoid(z[k]);
        let f = sigmoid(z[hidden + k]);
        let o = sigmoid(z[2 * hidden + k]);
        let g = tanh(z[3 * hidden + k]);
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * tanh(c[k]);
    }
    (h, c)
}

/// Backpropagates `dh`, `dc` through one step. Accumulates weight gradients and
/// returns `(d[x; h_prev], dc_prev)`.
pub(crate) fn backward(
    weight: &Tensor,
    cache: &LstmCache,
    dh: &[f64],
    dc: &[f64],
    dweight: &mut Tensor,
    dbias: &mut Tensor,
) -> (Vec<f64>, Vec<f64>) {
    let hidden = dh.len();
    let mut dz = vec![0.0; 4 * hidden];
    let mut dc_prev = vec![0.0; hidden];
    for k in 0..hidden {
        let (i, f, o, g, tc) = (cache.i[k], cache.f[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
        let dct = dc[k] + dh[k] * o * (1.0 - tc * tc);
        dz[k] = dct * g * i * (1.0 - i);
        dz[hidden + k] = dct * cache.c_prev[k] * f * (1.0 - f);
        dz[2 * hidden + k] = dh[k] * tc * o * (1.0 - o);
        dz[3 * hidden + k] = dct * i * (1.0 - g * g);
        dc_prev[k] = dct * f;
    }
    dweight.outer_acc(&dz, &cache.input);
    dbias.add_assign(&dz);
    let mut dinput = vec![0.0; cache.input.len()];
    weight.matvec_t_acc(&dz, &mut dinput);
    (dinput, dc_prev)
}
