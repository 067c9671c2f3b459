//! Forward and backward kernels on planar `(c, h, w)` buffers.
//!
//! Convolution weights are laid out `[out][in][ky][kx]`; dense weights
//! `[out][in]`, both row-major.

use super::spec::Shape;

/// Same-padded stride-1 convolution, optional ReLU.
pub fn conv_forward(input: &[f32], in_shape: Shape, weight: &[f32], bias: &[f32], kernel: usize, relu: bool) -> Vec<f32> {
    let [ci, h, w] = in_shape;
    let co = bias.len();
    let pad = kernel / 2;
    let plane = h * w;
    let mut out = vec![0.0f32; co * plane];
    for o in 0..co {
        let dst = &mut out[o * plane..(o + 1) * plane];
        dst.iter_mut().for_each(|v| *v = bias[o]);
        for i in 0..ci {
            let src = &input[i * plane..(i + 1) * plane];
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let wv = weight[((o * ci + i) * kernel + ky) * kernel + kx];
                    // output x ranges where the tap stays inside the image
                    let x_lo = pad.saturating_sub(kx);
                    let x_hi = (w + pad).saturating_sub(kx).min(w);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < pad || sy - pad >= h {
                            continue;
                        }
                        let srow = &src[(sy - pad) * w..(sy - pad + 1) * w];
                        let drow = &mut dst[y * w..(y + 1) * w];
                        let sx0 = x_lo + kx - pad;
                        for (d, s) in drow[x_lo..x_hi].iter_mut().zip(&srow[sx0..sx0 + (x_hi - x_lo)]) {
                            *d += wv * s;
                        }
                    }
                }
            }
        }
        if relu {
            dst.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    out
}

/// Backward pass of [`conv_forward`]. `output` is the forward result and
/// `grad_out` the gradient with respect to it. Accumulates into
/// `grad_w`/`grad_b`; returns the input gradient when `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    input: &[f32],
    in_shape: Shape,
    weight: &[f32],
    kernel: usize,
    relu: bool,
    output: &[f32],
    grad_out: &[f32],
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    want_input: bool,
) -> Option<Vec<f32>> {
    let [ci, h, w] = in_shape;
    let co = grad_b.len();
    let pad = kernel / 2;
    let plane = h * w;
    let g: Vec<f32> = if relu {
        grad_out
            .iter()
            .zip(output)
            .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
            .collect()
    } else {
        grad_out.to_vec()
    };
    let mut grad_in = want_input.then(|| vec![0.0f32; ci * plane]);
    for o in 0..co {
        let go = &g[o * plane..(o + 1) * plane];
        grad_b[o] += go.iter().sum::<f32>();
        for i in 0..ci {
            let src = &input[i * plane..(i + 1) * plane];
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let widx = ((o * ci + i) * kernel + ky) * kernel + kx;
                    let wv = weight[widx];
                    let x_lo = pad.saturating_sub(kx);
                    let x_hi = (w + pad).saturating_sub(kx).min(w);
                    if x_lo >= x_hi {
                        continue;
                    }
                    let sx0 = x_lo + kx - pad;
                    let n = x_hi - x_lo;
                    let mut acc = 0.0f32;
                    for y in 0..h {
                        let sy = y + ky;
                        if sy < pad || sy - pad >= h {
                            continue;
                        }
                        let row = (sy - pad) * w;
                        let grow = &go[y * w + x_lo..y * w + x_hi];
                        let srow = &src[row + sx0..row + sx0 + n];
                        acc += grow.iter().zip(srow).map(|(a, b)| a * b).sum::<f32>();
                        if let Some(gi) = grad_in.as_mut() {
                            let dst = &mut gi[i * plane + row + sx0..i * plane + row + sx0 + n];
                            for (d, gv) in dst.iter_mut().zip(grow) {
                                *d += wv * gv;
                            }
                        }
                    }
                    grad_w[widx] += acc;
                }
            }
        }
    }
    grad_in
}

pub fn maxpool_forward(input: &[f32], in_shape: Shape, size: usize) -> Vec<f32> {
    let [c, h, w] = in_shape;
    let (oh, ow) = (h / size, w / size);
    let mut out = vec![f32::NEG_INFINITY; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..size {
                    for dx in 0..size {
                        m = m.max(input[(ch * h + oy * size + dy) * w + ox * size + dx]);
                    }
                }
                out[(ch * oh + oy) * ow + ox] = m;
            }
        }
    }
    out
}

/// Routes each output gradient to the first maximal input in its window.
pub fn maxpool_backward(input: &[f32], in_shape: Shape, size: usize, grad_out: &[f32]) -> Vec<f32> {
    let [c, h, w] = in_shape;
    let (oh, ow) = (h / size, w / size);
    let mut grad_in = vec![0.0f32; c * h * w];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = (ch * h + oy * size) * w + ox * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let idx = (ch * h + oy * size + dy) * w + ox * size + dx;
                        if input[idx] > input[best] {
                            best = idx;
                        }
                    }
                }
                grad_in[best] += grad_out[(ch * oh + oy) * ow + ox];
            }
        }
    }
    grad_in
}

pub fn dense_forward(input: &[f32], weight: &[f32], bias: &[f32], relu: bool) -> Vec<f32> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &weight[o * n_in..(o + 1) * n_in];
            let v = b + row.iter().zip(input).map(|(a, x)| a * x).sum::<f32>();
            if relu {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn dense_backward(
    input: &[f32],
    weight: &[f32],
    relu: bool,
    output: &[f32],
    grad_out: &[f32],
    grad_w: &mut [f32],
    grad_b: &mut [f32],
    want_input: bool,
) -> Option<Vec<f32>> {
    let n_in = input.len();
    let mut grad_in = want_input.then(|| vec![0.0f32; n_in]);
    for (o, (&g, &y)) in grad_out.iter().zip(output).enumerate() {
        let g = if relu && y <= 0.0 { 0.0 } else { g };
        if g == 0.0 {
            continue;
        }
        grad_b[o] += g;
        let gw = &mut grad_w[o * n_in..(o + 1) * n_in];
        for (d, x) in gw.iter_mut().zip(input) {
            *d += g * x;
        }
        if let Some(gi) = grad_in.as_mut() {
            let row = &weight[o * n_in..(o + 1) * n_in];
            for (d, wv) in gi.iter_mut().zip(row) {
                *d += g * wv;
            }
        }
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct definition of same-padded convolution.
    fn conv_naive(input: &[f32], s: Shape, weight: &[f32], bias: &[f32], k: usize) -> Vec<f32> {
        let [ci, h, w] = s;
        let p = k as isize / 2;
        let mut out = vec![0.0; bias.len() * h * w];
        for o in 0..bias.len() {
            for y in 0..h as isize {
                for x in 0..w as isize {
                    let mut acc = bias[o] as f64;
                    for i in 0..ci {
                        for ky in 0..k as isize {
                            for kx in 0..k as isize {
                                let (sy, sx) = (y + ky - p, x + kx - p);
                                if sy >= 0 && sx >= 0 && sy < h as isize && sx < w as isize {
                                    acc += weight[((o * ci + i) * k + ky as usize) * k + kx as usize] as f64
                                        * input[(i * h + sy as usize) * w + sx as usize] as f64;
                                }
                            }
                        }
                    }
                    out[(o * h + y as usize) * w + x as usize] = acc as f32;
                }
            }
        }
        out
    }

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn conv_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (k, s) in [(3, [2, 5, 7]), (1, [3, 4, 4]), (5, [1, 6, 3])] {
            let input = rand_vec(&mut rng, s[0] * s[1] * s[2]);
            let weight = rand_vec(&mut rng, 4 * s[0] * k * k);
            let bias = rand_vec(&mut rng, 4);
            let fast = conv_forward(&input, s, &weight, &bias, k, false);
            let slow = conv_naive(&input, s, &weight, &bias, k);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = [2, 4, 5];
        let input: Vec<f32> = rand_vec(&mut rng, 40);
        let weight = rand_vec(&mut rng, 3 * 2 * 9);
        let bias = rand_vec(&mut rng, 3);
        let probe = rand_vec(&mut rng, 3 * 20);
        // scalar objective: probe . relu(conv(x))
        let objective = |inp: &[f32], wt: &[f32]| -> f64 {
            conv_forward(inp, s, wt, &bias, 3, true)
                .iter()
                .zip(&probe)
                .map(|(a, b)| (*a as f64) * (*b as f64))
                .sum()
        };
        let out = conv_forward(&input, s, &weight, &bias, 3, true);
        let mut gw = vec![0.0; weight.len()];
        let mut gb = vec![0.0; 3];
        let gi = conv_backward(&input, s, &weight, 3, true, &out, &probe, &mut gw, &mut gb, true).unwrap();
        let h = 1e-3f32;
        for idx in [0usize, 7, 23, 39] {
            let mut p = input.clone();
            p[idx] += h;
            let mut m = input.clone();
            m[idx] -= h;
            let fd = (objective(&p, &weight) - objective(&m, &weight)) / (2.0 * h as f64);
            assert!((fd - gi[idx] as f64).abs() < 2e-3, "input {idx}: {fd} vs {}", gi[idx]);
        }
        for idx in [0usize, 13, 40, 53] {
            let mut p = weight.clone();
            p[idx] += h;
            let mut m = weight.clone();
            m[idx] -= h;
            let fd = (objective(&input, &p) - objective(&input, &m)) / (2.0 * h as f64);
            assert!((fd - gw[idx] as f64).abs() < 2e-3, "weight {idx}: {fd} vs {}", gw[idx]);
        }
    }

    #[test]
    fn maxpool_routes_to_argmax() {
        let input = vec![1.0, 2.0, 5.0, 3.0, 4.0, 0.0, 1.0, 1.0, 9.0, 8.0, 7.0, 6.0, 1.0, 1.0, 1.0, 1.0];
        let s = [1, 4, 4];
        assert_eq!(maxpool_forward(&input, s, 2), vec![4.0, 5.0, 9.0, 7.0]);
        let g = maxpool_backward(&input, s, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(g[4], 1.0);
        assert_eq!(g[2], 2.0);
        assert_eq!(g[8], 3.0);
        assert_eq!(g[10], 4.0);
        assert_eq!(g.iter().sum::<f32>(), 10.0);
    }

    #[test]
    fn dense_backward_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_vec(&mut rng, 6);
        let w = rand_vec(&mut rng, 24);
        let b = rand_vec(&mut rng, 4);
        let y = dense_forward(&x, &w, &b, false);
        let g = vec![1.0, 0.0, 0.0, 0.0];
        let mut gw = vec![0.0; 24];
        let mut gb = vec![0.0; 4];
        let gi = dense_backward(&x, &w, false, &y, &g, &mut gw, &mut gb, true).unwrap();
        assert_eq!(gi, w[0..6].to_vec());
        assert_eq!(&gw[0..6], &x[..]);
        assert_eq!(gb, g);
    }
}
