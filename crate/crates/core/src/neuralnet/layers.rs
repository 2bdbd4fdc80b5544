//! Forward and backward kernels for the layers of the U-Net.
//!
//! Everything here works on whole batches. Per-sample work is spread over
//! rayon workers, but reductions across the batch always run in sample
//! order, so results do not depend on the number of threads.

use rayon::prelude::*;

use super::{Scalar, Tensor4};

/// Unrolls `k x k` zero-padded neighbourhoods of one `c x h x w` sample
/// into a `(c*k*k) x (h*w)` matrix.
fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, k: usize, col: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let dst = &mut col[row * hw..(row + 1) * hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                for y in 0..h {
                    let out_row = &mut dst[y * w..(y + 1) * w];
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize || x0 >= x1 {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    out_row[..x0].fill(T::zero());
                    out_row[x1..].fill(T::zero());
                    let s0 = (x0 as isize + dx) as usize;
                    out_row[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-adds columns back onto the image.
fn col2im<T: Scalar>(col: &[T], c: usize, h: usize, w: usize, k: usize, x: &mut [T]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    x.fill(T::zero());
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (ci * k + ky) * k + kx;
                let src = &col[row * hw..(row + 1) * hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                let x0 = (-dx).max(0) as usize;
                let x1 = (w as isize - dx).min(w as isize).max(0) as usize;
                if x0 >= x1 {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + dy;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let s0 = (x0 as isize + dx) as usize;
                    let dst = &mut plane[sy as usize * w + s0..sy as usize * w + s0 + (x1 - x0)];
                    for (d, &v) in dst.iter_mut().zip(&src[y * w + x0..y * w + x1]) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Stride-1 "same" convolution with an odd `k x k` kernel.
/// `weight` is `cout x cin x k x k`.
pub fn conv_forward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &[T],
    bias: Option<&[T]>,
    cout: usize,
    k: usize,
) -> Tensor4<T> {
    let (cin, h, w) = (x.c, x.h, x.w);
    let hw = h * w;
    debug_assert_eq!(weight.len(), cout * cin * k * k);
    let mut out = Tensor4::zeros(x.n, cout, h, w);
    out.data
        .par_chunks_mut(cout * hw)
        .enumerate()
        .for_each(|(i, out_s)| {
            let xs = x.sample(i);
            if k == 1 {
                T::gemm(cout, cin, hw, T::one(), weight, false, xs, false, T::zero(), out_s);
            } else {
                let mut col = vec![T::zero(); cin * k * k * hw];
                im2col(xs, cin, h, w, k, &mut col);
                T::gemm(cout, cin * k * k, hw, T::one(), weight, false, &col, false, T::zero(), out_s);
            }
            if let Some(b) = bias {
                for (plane, &bv) in out_s.chunks_exact_mut(hw).zip(b) {
                    plane.iter_mut().for_each(|v| *v += bv);
                }
            }
        });
    out
}

pub struct ConvGrads<T> {
    pub input: Option<Tensor4<T>>,
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
}

pub fn conv_backward<T: Scalar>(
    x: &Tensor4<T>,
    weight: &[T],
    grad_out: &Tensor4<T>,
    k: usize,
    has_bias: bool,
    need_input_grad: bool,
) -> ConvGrads<T> {
    let (cin, h, w) = (x.c, x.h, x.w);
    let cout = grad_out.c;
    let hw = h * w;
    let kk = cin * k * k;

    let per_sample = |i: usize, dx_s: Option<&mut [T]>| -> Vec<T> {
        let xs = x.sample(i);
        let gs = grad_out.sample(i);
        let mut dw = vec![T::zero(); cout * kk];
        if k == 1 {
            T::gemm(cout, hw, cin, T::one(), gs, false, xs, true, T::zero(), &mut dw);
            if let Some(dx_s) = dx_s {
                T::gemm(cin, cout, hw, T::one(), weight, true, gs, false, T::zero(), dx_s);
            }
        } else {
            let mut col = vec![T::zero(); kk * hw];
            im2col(xs, cin, h, w, k, &mut col);
            T::gemm(cout, hw, kk, T::one(), gs, false, &col, true, T::zero(), &mut dw);
            if let Some(dx_s) = dx_s {
                T::gemm(kk, cout, hw, T::one(), weight, true, gs, false, T::zero(), &mut col);
                col2im(&col, cin, h, w, k, dx_s);
            }
        }
        dw
    };

    let (input, per_sample_dw): (Option<Tensor4<T>>, Vec<Vec<T>>) = if need_input_grad {
        let mut dx = Tensor4::zeros(x.n, cin, h, w);
        let dws = dx
            .data
            .par_chunks_mut(cin * hw)
            .enumerate()
            .map(|(i, dx_s)| per_sample(i, Some(dx_s)))
            .collect();
        (Some(dx), dws)
    } else {
        ((None), (0..x.n).into_par_iter().map(|i| per_sample(i, None)).collect())
    };

    let mut weight_grad = vec![T::zero(); cout * kk];
    for dw in &per_sample_dw {
        for (a, &b) in weight_grad.iter_mut().zip(dw) {
            *a += b;
        }
    }
    let bias = has_bias.then(|| {
        let mut db = vec![T::zero(); cout];
        for i in 0..grad_out.n {
            for (co, d) in db.iter_mut().enumerate() {
                *d += grad_out.plane(i, co).iter().copied().sum::<T>();
            }
        }
        db
    });
    ConvGrads {
        input,
        weight: weight_grad,
        bias,
    }
}

#[inline]
fn elu<T: Scalar>(z: T, alpha: T) -> T {
    if z > T::zero() {
        z
    } else {
        alpha * z.exp_m1()
    }
}

/// Saved state of a training-mode batch-norm + ELU unit.
pub struct BnEluCache<T> {
    pub x_hat: Tensor4<T>,
    pub inv_std: Vec<T>,
    pub out: Tensor4<T>,
}

pub struct BnBatchStats<T> {
    pub mean: Vec<T>,
    /// Unbiased batch variance, for the running estimate.
    pub var_unbiased: Vec<T>,
}

fn channel_values<T: Scalar>(x: &Tensor4<T>, c: usize) -> impl Iterator<Item = T> + '_ {
    (0..x.n).flat_map(move |i| x.plane(i, c).iter().copied())
}

/// Batch normalization with batch statistics followed by ELU.
pub fn bn_elu_forward_train<T: Scalar>(
    x: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    eps: T,
    alpha: T,
) -> (BnEluCache<T>, BnBatchStats<T>) {
    let m = x.n * x.plane_len();
    let mut mean = vec![T::zero(); x.c];
    let mut var = vec![T::zero(); x.c];
    let mut var_unbiased = vec![T::zero(); x.c];
    let mut inv_std = vec![T::zero(); x.c];
    for c in 0..x.c {
        let mu = channel_values(x, c).map(|v| v.to_f64_lossy()).sum::<f64>() / m as f64;
        let ss = channel_values(x, c)
            .map(|v| {
                let d = v.to_f64_lossy() - mu;
                d * d
            })
            .sum::<f64>();
        mean[c] = T::lit(mu);
        var[c] = T::lit(ss / m as f64);
        var_unbiased[c] = T::lit(if m > 1 { ss / (m - 1) as f64 } else { 0.0 });
        inv_std[c] = T::one() / (var[c] + eps).sqrt();
    }
    let mut x_hat = Tensor4::zeros(x.n, x.c, x.h, x.w);
    let mut out = Tensor4::zeros(x.n, x.c, x.h, x.w);
    let hw = x.plane_len();
    for (p, ((src, xh), o)) in x
        .data
        .chunks_exact(hw)
        .zip(x_hat.data.chunks_exact_mut(hw))
        .zip(out.data.chunks_exact_mut(hw))
        .enumerate()
    {
        let c = p % x.c;
        for ((&v, xh), o) in src.iter().zip(xh.iter_mut()).zip(o.iter_mut()) {
            *xh = (v - mean[c]) * inv_std[c];
            *o = elu(gamma[c] * *xh + beta[c], alpha);
        }
    }
    (
        BnEluCache { x_hat, inv_std, out },
        BnBatchStats { mean, var_unbiased },
    )
}

pub fn bn_elu_forward_inference<T: Scalar>(
    x: &Tensor4<T>,
    gamma: &[T],
    beta: &[T],
    running_mean: &[T],
    running_var: &[T],
    eps: T,
    alpha: T,
) -> Tensor4<T> {
    let mut out = x.clone();
    let hw = x.plane_len();
    for (p, plane) in out.data.chunks_exact_mut(hw).enumerate() {
        let c = p % x.c;
        let scale = gamma[c] / (running_var[c] + eps).sqrt();
        let shift = beta[c] - running_mean[c] * scale;
        plane.iter_mut().for_each(|v| *v = elu(*v * scale + shift, alpha));
    }
    out
}

pub struct BnGrads<T> {
    pub input: Tensor4<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

pub fn bn_elu_backward<T: Scalar>(
    cache: &BnEluCache<T>,
    gamma: &[T],
    grad_out: &Tensor4<T>,
    alpha: T,
) -> BnGrads<T> {
    let (n, c, hw) = (grad_out.n, grad_out.c, grad_out.plane_len());
    let m = T::from_usize(n * hw).expect("count fits");
    // Through the ELU: d/dz = 1 for z > 0, else alpha * e^z = out + alpha.
    let mut dz = grad_out.clone();
    for (d, &o) in dz.data.iter_mut().zip(&cache.out.data) {
        if o <= T::zero() {
            *d *= o + alpha;
        }
    }
    let mut dgamma = vec![T::zero(); c];
    let mut dbeta = vec![T::zero(); c];
    for (p, (g, xh)) in dz
        .data
        .chunks_exact(hw)
        .zip(cache.x_hat.data.chunks_exact(hw))
        .enumerate()
    {
        let ch = p % c;
        for (&g, &xh) in g.iter().zip(xh) {
            dgamma[ch] += g * xh;
            dbeta[ch] += g;
        }
    }
    let mut dx = dz;
    for (p, (g, xh)) in dx
        .data
        .chunks_exact_mut(hw)
        .zip(cache.x_hat.data.chunks_exact(hw))
        .enumerate()
    {
        let ch = p % c;
        let k = gamma[ch] * cache.inv_std[ch] / m;
        for (g, &xh) in g.iter_mut().zip(xh) {
            *g = k * (m * *g - dbeta[ch] - xh * dgamma[ch]);
        }
    }
    BnGrads {
        input: dx,
        gamma: dgamma,
        beta: dbeta,
    }
}

/// 2x2 max pooling; returns the pooled tensor and the winning offset
/// (0..4, row-major inside the window) of every output cell.
pub fn maxpool_forward<T: Scalar>(x: &Tensor4<T>) -> (Tensor4<T>, Vec<u8>) {
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut out = Tensor4::zeros(x.n, x.c, oh, ow);
    let mut arg = vec![0u8; out.data.len()];
    for (p, src) in x.data.chunks_exact(x.plane_len()).enumerate() {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = 2 * oy * x.w + 2 * ox;
                let cand = [src[base], src[base + 1], src[base + x.w], src[base + x.w + 1]];
                let mut best = 0;
                for (j, &v) in cand.iter().enumerate().skip(1) {
                    if v > cand[best] {
                        best = j;
                    }
                }
                let o = p * oh * ow + oy * ow + ox;
                out.data[o] = cand[best];
                arg[o] = best as u8;
            }
        }
    }
    (out, arg)
}

pub fn maxpool_backward<T: Scalar>(grad_out: &Tensor4<T>, arg: &[u8]) -> Tensor4<T> {
    let (h, w) = (grad_out.h * 2, grad_out.w * 2);
    let mut dx = Tensor4::zeros(grad_out.n, grad_out.c, h, w);
    let (oh, ow) = (grad_out.h, grad_out.w);
    for (p, g) in grad_out.data.chunks_exact(oh * ow).enumerate() {
        let dst = &mut dx.data[p * h * w..(p + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let o = oy * ow + ox;
                let a = arg[p * oh * ow + o] as usize;
                dst[(2 * oy + a / 2) * w + 2 * ox + a % 2] = g[o];
            }
        }
    }
    dx
}

/// Nearest-neighbour x2 upsampling.
pub fn upsample_forward<T: Scalar>(x: &Tensor4<T>) -> Tensor4<T> {
    let (h, w) = (x.h * 2, x.w * 2);
    let mut out = Tensor4::zeros(x.n, x.c, h, w);
    for (src, dst) in x.data.chunks_exact(x.plane_len()).zip(out.data.chunks_exact_mut(h * w)) {
        for y in 0..h {
            let s = &src[(y / 2) * x.w..(y / 2 + 1) * x.w];
            for (xx, d) in dst[y * w..(y + 1) * w].iter_mut().enumerate() {
                *d = s[xx / 2];
            }
        }
    }
    out
}

pub fn upsample_backward<T: Scalar>(grad_out: &Tensor4<T>) -> Tensor4<T> {
    let (h, w) = (grad_out.h / 2, grad_out.w / 2);
    let mut dx = Tensor4::zeros(grad_out.n, grad_out.c, h, w);
    for (src, dst) in grad_out
        .data
        .chunks_exact(grad_out.plane_len())
        .zip(dx.data.chunks_exact_mut(h * w))
    {
        for y in 0..grad_out.h {
            for x in 0..grad_out.w {
                dst[(y / 2) * w + x / 2] += src[y * grad_out.w + x];
            }
        }
    }
    dx
}

/// Channel concatenation `[a, b]`.
pub fn concat_channels<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> Tensor4<T> {
    debug_assert_eq!((a.n, a.h, a.w), (b.n, b.h, b.w));
    let mut data = Vec::with_capacity(a.data.len() + b.data.len());
    for i in 0..a.n {
        data.extend_from_slice(a.sample(i));
        data.extend_from_slice(b.sample(i));
    }
    Tensor4 {
        n: a.n,
        c: a.c + b.c,
        h: a.h,
        w: a.w,
        data,
    }
}

pub fn split_channels<T: Scalar>(g: &Tensor4<T>, first: usize) -> (Tensor4<T>, Tensor4<T>) {
    let hw = g.plane_len();
    let mut a = Tensor4::zeros(g.n, first, g.h, g.w);
    let mut b = Tensor4::zeros(g.n, g.c - first, g.h, g.w);
    for i in 0..g.n {
        let s = g.sample(i);
        a.data[i * first * hw..(i + 1) * first * hw].copy_from_slice(&s[..first * hw]);
        let rest = (g.c - first) * hw;
        b.data[i * rest..(i + 1) * rest].copy_from_slice(&s[first * hw..]);
    }
    (a, b)
}

pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}
