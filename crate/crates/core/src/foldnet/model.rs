//! Forward and reverse passes of the folding autoencoder.
//!
//! Encoder: shared per-point perceptron, two graph layers (max over each
//! point and its k nearest neighbors, then linear + ReLU), global max-pool,
//! then a two-layer head to the codeword. Decoder: two 3-layer folds, the
//! first over (grid point ⊕ codeword), the second over (fold-1 point ⊕
//! codeword). Max-pools route gradients to the first maximal entry.

use rayon::prelude::*;

use super::chamfer::chamfer_grad_b;
use super::params::{Gradients, NetworkParams};
use super::Scalar;
use crate::error::{Error, Result};
use crate::spatial::KdTree;

/// Flat `n × k` neighbor table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhoods {
    pub k: usize,
    pub indices: Vec<usize>,
}

impl Neighborhoods {
    pub fn row(&self, i: usize) -> &[usize] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> usize {
        self.indices.len().checked_div(self.k).unwrap_or(0)
    }
}

/// The `k` nearest other points of every point, closest first, ties to the
/// lower index.
pub fn knn_indices<T: Scalar>(points: &[[T; 3]], k: usize) -> Result<Neighborhoods> {
    let n = points.len();
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} needs more than {n} points"
        )));
    }
    let pts: Vec<[f64; 3]> = points
        .iter()
        .map(|p| p.map(|v| v.to_f64().unwrap_or(f64::NAN)))
        .collect();
    let mut indices = Vec::with_capacity(n * k);
    if n <= 128 {
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
        for (i, p) in pts.iter().enumerate() {
            cand.clear();
            cand.extend(pts.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, q)| {
                let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                (d, j)
            }));
            cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand[..k].sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            indices.extend(cand[..k].iter().map(|c| c.1));
        }
    } else {
        let tree = KdTree::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            let row = tree.knn(p, k + 1);
            indices.extend(row.iter().map(|r| r.0).filter(|&j| j != i).take(k));
        }
    }
    Ok(Neighborhoods { k, indices })
}

/// Folding grid: `side²` points evenly spaced over [−0.3, 0.3]², row-major in y.
pub fn folding_grid<T: Scalar>(side: usize) -> Vec<[T; 2]> {
    let coord = |i: usize| {
        if side == 1 {
            0.0
        } else {
            -0.3 + 0.6 * i as f64 / (side - 1) as f64
        }
    };
    let mut g = Vec::with_capacity(side * side);
    for iy in 0..side {
        for ix in 0..side {
            g.push([
                T::from(coord(ix)).unwrap_or_else(T::zero),
                T::from(coord(iy)).unwrap_or_else(T::zero),
            ]);
        }
    }
    g
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s = s + *x * *y;
    }
    s
}

#[inline]
fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// `y = x Wᵀ + b` for `n` rows, optionally rectified.
fn linear<T: Scalar>(x: &[T], n: usize, w: &[T], b: &[T], relu: bool) -> Vec<T> {
    let out = b.len();
    let fan_in = w.len() / out;
    let mut y = vec![T::zero(); n * out];
    for r in 0..n {
        let xr = &x[r * fan_in..(r + 1) * fan_in];
        let yr = &mut y[r * out..(r + 1) * out];
        for o in 0..out {
            let v = dot(xr, &w[o * fan_in..(o + 1) * fan_in]) + b[o];
            yr[o] = if relu && v < T::zero() { T::zero() } else { v };
        }
    }
    y
}

/// Backward of [`linear`] given the gradient at its pre-activation.
/// Accumulates into `gw`, `gb`; returns the input gradient when asked.
fn linear_backward<T: Scalar>(
    dpre: &[T],
    x: &[T],
    n: usize,
    w: &[T],
    gw: &mut [T],
    gb: &mut [T],
    want_dx: bool,
) -> Option<Vec<T>> {
    let out = gb.len();
    let fan_in = w.len() / out;
    let mut dx = want_dx.then(|| vec![T::zero(); n * fan_in]);
    for r in 0..n {
        let xr = &x[r * fan_in..(r + 1) * fan_in];
        let dr = &dpre[r * out..(r + 1) * out];
        for o in 0..out {
            let g = dr[o];
            if g == T::zero() {
                continue;
            }
            gb[o] = gb[o] + g;
            axpy(&mut gw[o * fan_in..(o + 1) * fan_in], g, xr);
            if let Some(dx) = dx.as_mut() {
                axpy(&mut dx[r * fan_in..(r + 1) * fan_in], g, &w[o * fan_in..(o + 1) * fan_in]);
            }
        }
    }
    dx
}

/// Zeroes gradient entries where the rectified output was clipped.
fn relu_mask<T: Scalar>(grad: &mut [T], out: &[T]) {
    for (g, &y) in grad.iter_mut().zip(out) {
        if y <= T::zero() {
            *g = T::zero();
        }
    }
}

fn check_finite<T: Scalar>(values: &[T], layer: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("layer {layer}")))
    }
}

/// Max over each point and its neighbors, channel by channel.
fn graph_pool<T: Scalar>(h: &[T], c: usize, nb: &Neighborhoods) -> (Vec<T>, Vec<u32>) {
    let n = h.len() / c;
    let mut out = h.to_vec();
    let mut arg: Vec<u32> = (0..n).flat_map(|i| std::iter::repeat_n(i as u32, c)).collect();
    for i in 0..n {
        for &j in nb.row(i) {
            let src = &h[j * c..(j + 1) * c];
            let dst = &mut out[i * c..(i + 1) * c];
            let a = &mut arg[i * c..(i + 1) * c];
            for ch in 0..c {
                if src[ch] > dst[ch] {
                    dst[ch] = src[ch];
                    a[ch] = j as u32;
                }
            }
        }
    }
    (out, arg)
}

fn scatter_pool<T: Scalar>(dpool: &[T], arg: &[u32], c: usize) -> Vec<T> {
    let mut dh = vec![T::zero(); dpool.len()];
    for (idx, (&g, &src)) in dpool.iter().zip(arg).enumerate() {
        let ch = idx % c;
        let t = src as usize * c + ch;
        dh[t] = dh[t] + g;
    }
    dh
}

struct EncoderTape<T> {
    n: usize,
    /// Input then each perceptron output.
    mlp: Vec<Vec<T>>,
    pool: [Vec<T>; 2],
    pool_arg: [Vec<u32>; 2],
    graph: [Vec<T>; 2],
    global: Vec<T>,
    global_arg: Vec<u32>,
    head: Vec<T>,
    code: Vec<T>,
}

fn encoder_forward<T: Scalar>(
    p: &NetworkParams<T>,
    cloud: &[[T; 3]],
    nb: &Neighborhoods,
) -> Result<EncoderTape<T>> {
    let ix = p.arch.index();
    let names = p.arch.layers();
    let n = cloud.len();
    if n == 0 {
        return Err(Error::Empty("point cloud"));
    }
    if nb.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "neighbor table has {} rows for {n} points",
            nb.rows()
        )));
    }
    let mut mlp = vec![cloud.iter().flatten().copied().collect::<Vec<T>>()];
    check_finite(&mlp[0], "input")?;
    for &l in &ix.mlp {
        let y = linear(mlp.last().unwrap(), n, p.weight(l), p.bias(l), true);
        check_finite(&y, &names[l].name)?;
        mlp.push(y);
    }
    let mut h = mlp.last().unwrap().clone();
    let mut pool = [Vec::new(), Vec::new()];
    let mut pool_arg = [Vec::new(), Vec::new()];
    let mut graph = [Vec::new(), Vec::new()];
    for g in 0..2 {
        let l = ix.graph[g];
        let c = names[l].fan_in;
        let (pooled, arg) = graph_pool(&h, c, nb);
        let y = linear(&pooled, n, p.weight(l), p.bias(l), true);
        check_finite(&y, &names[l].name)?;
        pool[g] = pooled;
        pool_arg[g] = arg;
        graph[g] = y.clone();
        h = y;
    }
    let c = names[ix.graph[1]].fan_out;
    let mut global = h[..c].to_vec();
    let mut global_arg = vec![0u32; c];
    for i in 1..n {
        for ch in 0..c {
            let v = h[i * c + ch];
            if v > global[ch] {
                global[ch] = v;
                global_arg[ch] = i as u32;
            }
        }
    }
    let head = linear(&global, 1, p.weight(ix.head), p.bias(ix.head), true);
    check_finite(&head, &names[ix.head].name)?;
    let code = linear(&head, 1, p.weight(ix.bottleneck), p.bias(ix.bottleneck), false);
    check_finite(&code, &names[ix.bottleneck].name)?;
    Ok(EncoderTape {
        n,
        mlp,
        pool,
        pool_arg,
        graph,
        global,
        global_arg,
        head,
        code,
    })
}

fn encoder_backward<T: Scalar>(
    p: &NetworkParams<T>,
    tape: &EncoderTape<T>,
    dcode: &[T],
    g: &mut Gradients<T>,
) {
    let ix = p.arch.index();
    let n = tape.n;
    let (gw, gb) = layer_grads(g, ix.bottleneck);
    let mut dhead = linear_backward(dcode, &tape.head, 1, p.weight(ix.bottleneck), gw, gb, true).unwrap();
    relu_mask(&mut dhead, &tape.head);
    let (gw, gb) = layer_grads(g, ix.head);
    let dglobal = linear_backward(&dhead, &tape.global, 1, p.weight(ix.head), gw, gb, true).unwrap();

    let c2 = tape.global.len();
    let mut dh = vec![T::zero(); n * c2];
    for (ch, (&d, &src)) in dglobal.iter().zip(&tape.global_arg).enumerate() {
        dh[src as usize * c2 + ch] = dh[src as usize * c2 + ch] + d;
    }
    for gi in (0..2).rev() {
        let l = ix.graph[gi];
        relu_mask(&mut dh, &tape.graph[gi]);
        let c_in = p.arch.layers()[l].fan_in;
        let (gw, gb) = layer_grads(g, l);
        let dpool = linear_backward(&dh, &tape.pool[gi], n, p.weight(l), gw, gb, true).unwrap();
        dh = scatter_pool(&dpool, &tape.pool_arg[gi], c_in);
    }
    for (li, &l) in ix.mlp.iter().enumerate().rev() {
        relu_mask(&mut dh, &tape.mlp[li + 1]);
        let (gw, gb) = layer_grads(g, l);
        match linear_backward(&dh, &tape.mlp[li], n, p.weight(l), gw, gb, li > 0) {
            Some(d) => dh = d,
            None => break,
        }
    }
}

fn layer_grads<T>(g: &mut Gradients<T>, layer: usize) -> (&mut [T], &mut [T]) {
    let (w, b) = g.tensors.split_at_mut(2 * layer + 1);
    (&mut w[2 * layer].data, &mut b[0].data)
}

struct FoldTape<T> {
    /// Per-point coordinates fed alongside the codeword.
    input: Vec<T>,
    h1: Vec<T>,
    h2: Vec<T>,
    out: Vec<T>,
}

/// One fold: `[x_j ⊕ code] → relu → relu → 3`. The first layer is split so the
/// codeword product is computed once.
fn fold_forward<T: Scalar>(
    p: &NetworkParams<T>,
    layers: [usize; 3],
    input: Vec<T>,
    width: usize,
    code: &[T],
    names: &[super::params::LayerSpec],
) -> Result<FoldTape<T>> {
    let m = input.len() / width;
    let w0 = p.weight(layers[0]);
    let b0 = p.bias(layers[0]);
    let hidden = b0.len();
    let fan_in = width + code.len();
    let base: Vec<T> = (0..hidden)
        .map(|o| dot(&w0[o * fan_in + width..(o + 1) * fan_in], code) + b0[o])
        .collect();
    let mut h1 = vec![T::zero(); m * hidden];
    for j in 0..m {
        let x = &input[j * width..(j + 1) * width];
        for o in 0..hidden {
            let row = &w0[o * fan_in..o * fan_in + width];
            let v = dot(row, x) + base[o];
            h1[j * hidden + o] = if v < T::zero() { T::zero() } else { v };
        }
    }
    check_finite(&h1, &names[layers[0]].name)?;
    let h2 = linear(&h1, m, p.weight(layers[1]), p.bias(layers[1]), true);
    check_finite(&h2, &names[layers[1]].name)?;
    let out = linear(&h2, m, p.weight(layers[2]), p.bias(layers[2]), false);
    check_finite(&out, &names[layers[2]].name)?;
    Ok(FoldTape { input, h1, h2, out })
}

/// Returns the gradient of the per-point input; accumulates the codeword
/// gradient into `dcode`.
fn fold_backward<T: Scalar>(
    p: &NetworkParams<T>,
    layers: [usize; 3],
    tape: &FoldTape<T>,
    width: usize,
    code: &[T],
    dout: &[T],
    dcode: &mut [T],
    g: &mut Gradients<T>,
    want_dinput: bool,
) -> Option<Vec<T>> {
    let m = tape.out.len() / 3;
    let (gw, gb) = layer_grads(g, layers[2]);
    let mut dh2 = linear_backward(dout, &tape.h2, m, p.weight(layers[2]), gw, gb, true).unwrap();
    relu_mask(&mut dh2, &tape.h2);
    let (gw, gb) = layer_grads(g, layers[1]);
    let mut dh1 = linear_backward(&dh2, &tape.h1, m, p.weight(layers[1]), gw, gb, true).unwrap();
    relu_mask(&mut dh1, &tape.h1);

    let w0 = p.weight(layers[0]);
    let hidden = p.bias(layers[0]).len();
    let fan_in = width + code.len();
    let (gw, gb) = layer_grads(g, layers[0]);
    let mut dsum = vec![T::zero(); hidden];
    let mut dinput = want_dinput.then(|| vec![T::zero(); m * width]);
    for j in 0..m {
        let x = &tape.input[j * width..(j + 1) * width];
        let d = &dh1[j * hidden..(j + 1) * hidden];
        for o in 0..hidden {
            let go = d[o];
            if go == T::zero() {
                continue;
            }
            dsum[o] = dsum[o] + go;
            axpy(&mut gw[o * fan_in..o * fan_in + width], go, x);
            if let Some(di) = dinput.as_mut() {
                axpy(&mut di[j * width..(j + 1) * width], go, &w0[o * fan_in..o * fan_in + width]);
            }
        }
    }
    for o in 0..hidden {
        let go = dsum[o];
        if go == T::zero() {
            continue;
        }
        gb[o] = gb[o] + go;
        axpy(&mut gw[o * fan_in + width..(o + 1) * fan_in], go, code);
        axpy(dcode, go, &w0[o * fan_in + width..(o + 1) * fan_in]);
    }
    dinput
}

struct DecoderTape<T> {
    fold1: FoldTape<T>,
    fold2: FoldTape<T>,
}

fn decoder_forward<T: Scalar>(p: &NetworkParams<T>, code: &[T]) -> Result<DecoderTape<T>> {
    if code.len() != p.arch.codeword_dim {
        return Err(Error::DimensionMismatch(format!(
            "codeword has {} entries, model expects {}",
            code.len(),
            p.arch.codeword_dim
        )));
    }
    let ix = p.arch.index();
    let names = p.arch.layers();
    let grid: Vec<T> = folding_grid::<T>(p.arch.grid_side).into_iter().flatten().collect();
    let fold1 = fold_forward(p, ix.fold1, grid, 2, code, &names)?;
    let fold2 = fold_forward(p, ix.fold2, fold1.out.clone(), 3, code, &names)?;
    Ok(DecoderTape { fold1, fold2 })
}

fn as_points<T: Scalar>(flat: &[T]) -> Vec<[T; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Codeword of one cloud.
pub fn encode<T: Scalar>(params: &NetworkParams<T>, cloud: &[[T; 3]]) -> Result<Vec<T>> {
    let nb = knn_indices(cloud, params.arch.k_neighbors)?;
    encode_with(params, cloud, &nb)
}

pub fn encode_with<T: Scalar>(
    params: &NetworkParams<T>,
    cloud: &[[T; 3]],
    nb: &Neighborhoods,
) -> Result<Vec<T>> {
    Ok(encoder_forward(params, cloud, nb)?.code)
}

/// Folds the grid into `grid_side²` points.
pub fn decode<T: Scalar>(params: &NetworkParams<T>, code: &[T]) -> Result<Vec<[T; 3]>> {
    Ok(as_points(&decoder_forward(params, code)?.fold2.out))
}

pub fn reconstruct<T: Scalar>(params: &NetworkParams<T>, cloud: &[[T; 3]]) -> Result<Vec<[T; 3]>> {
    decode(params, &encode(params, cloud)?)
}

/// Chamfer loss of one cloud against its reconstruction, with gradients.
pub fn sample_loss_and_gradients<T: Scalar>(
    params: &NetworkParams<T>,
    cloud: &[[T; 3]],
    nb: &Neighborhoods,
) -> Result<(T, Gradients<T>)> {
    let enc = encoder_forward(params, cloud, nb)?;
    let dec = decoder_forward(params, &enc.code)?;
    let recon = as_points(&dec.fold2.out);
    let (loss, grad) = chamfer_grad_b(cloud, &recon)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("chamfer loss".into()));
    }
    let ix = params.arch.index();
    let mut g = params.zeros_like();
    let dout: Vec<T> = grad.into_iter().flatten().collect();
    let mut dcode = vec![T::zero(); enc.code.len()];
    let dfold1 = fold_backward(params, ix.fold2, &dec.fold2, 3, &enc.code, &dout, &mut dcode, &mut g, true)
        .unwrap();
    fold_backward(params, ix.fold1, &dec.fold1, 2, &enc.code, &dfold1, &mut dcode, &mut g, false);
    encoder_backward(params, &enc, &dcode, &mut g);
    Ok((loss, g))
}

/// Mean chamfer loss over the batch and its gradient. Items are processed
/// in parallel and summed in batch order, so the result does not depend on
/// the thread count.
pub fn loss_and_gradients<T: Scalar>(
    params: &NetworkParams<T>,
    batch: &[(&[[T; 3]], &Neighborhoods)],
) -> Result<(T, Gradients<T>)> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let n = batch[0].0.len();
    if batch.iter().any(|(c, _)| c.len() != n) {
        return Err(Error::DimensionMismatch(
            "clouds in a batch must have equal point counts".into(),
        ));
    }
    let parts: Vec<(T, Gradients<T>)> = batch
        .par_iter()
        .map(|(c, nb)| sample_loss_and_gradients(params, c, nb))
        .collect::<Result<_>>()?;
    let scale = T::one() / T::from(batch.len()).unwrap_or_else(T::one);
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().unwrap();
    for (l, g) in iter {
        loss = loss + l;
        grads.add_scaled(&g, T::one());
    }
    grads.scale(scale);
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("batch loss".into()));
    }
    Ok((loss, grads))
}

/// Mean batch loss without gradients.
pub fn batch_loss<T: Scalar>(params: &NetworkParams<T>, batch: &[(&[[T; 3]], &Neighborhoods)]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let losses: Vec<T> = batch
        .par_iter()
        .map(|(c, nb)| {
            let code = encode_with(params, c, nb)?;
            super::chamfer::chamfer(c, &decode(params, &code)?)
        })
        .collect::<Result<_>>()?;
    let sum = losses.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(sum / T::from(batch.len()).unwrap_or_else(T::one))
}
