//! Forward/backward kernels on flat row-major buffers.
//!
//! Layout convention: a feature map of C channels over T frames is a flat
//! slice of length C*T with channel rows contiguous, so inner loops run over
//! time and vectorize.

use crate::numerics::real::Real;

/// Output length of a strided convolution that keeps symmetric same-padding.
pub fn conv_out_len(t_in: usize, stride: usize) -> usize {
    t_in.div_ceil(stride)
}

/// 1-D convolution, symmetric zero padding of (k-1)/2 on each side.
///
/// `x`: C_in*T, `w`: C_out*C_in*K, `b`: C_out. Returns C_out*T_out with
/// T_out = ceil(T/stride); out[o,t] = b[o] + sum_{i,k} w[o,i,k] * x[i, stride*t + k - (K-1)/2].
pub fn conv1d_forward<R: Real>(
    x: &[R],
    w: &[R],
    b: &[R],
    c_in: usize,
    c_out: usize,
    k: usize,
    t_in: usize,
    stride: usize,
) -> Vec<R> {
    let pad = (k - 1) / 2;
    let t_out = conv_out_len(t_in, stride);
    let mut out = vec![R::ZERO; c_out * t_out];
    for o in 0..c_out {
        let orow = &mut out[o * t_out..(o + 1) * t_out];
        orow.iter_mut().for_each(|v| *v = b[o]);
        for i in 0..c_in {
            let xrow = &x[i * t_in..(i + 1) * t_in];
            for kk in 0..k {
                let wv = w[(o * c_in + i) * k + kk];
                let shift = kk as isize - pad as isize;
                if stride == 1 {
                    // valid t where t + shift in [0, t_in)
                    let t0 = (-shift).max(0) as usize;
                    let t1 = ((t_in as isize - shift).min(t_out as isize)).max(0) as usize;
                    for t in t0..t1 {
                        orow[t] += wv * xrow[(t as isize + shift) as usize];
                    }
                } else {
                    for (t, ov) in orow.iter_mut().enumerate() {
                        let src = (stride * t) as isize + shift;
                        if src >= 0 && (src as usize) < t_in {
                            *ov += wv * xrow[src as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Backward of [`conv1d_forward`]. Adds into the provided gradient buffers;
/// pass `None` for inputs whose gradient is not needed.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward<R: Real>(
    g: &[R],
    x: &[R],
    w: &[R],
    c_in: usize,
    c_out: usize,
    k: usize,
    t_in: usize,
    stride: usize,
    mut dx: Option<&mut [R]>,
    mut dw: Option<&mut [R]>,
    db: Option<&mut [R]>,
) {
    let pad = (k - 1) / 2;
    let t_out = conv_out_len(t_in, stride);
    if let Some(db) = db {
        for o in 0..c_out {
            let grow = &g[o * t_out..(o + 1) * t_out];
            let mut acc = R::ZERO;
            for v in grow {
                acc += *v;
            }
            db[o] += acc;
        }
    }
    for o in 0..c_out {
        let grow = &g[o * t_out..(o + 1) * t_out];
        for i in 0..c_in {
            let xrow = &x[i * t_in..(i + 1) * t_in];
            for kk in 0..k {
                let shift = kk as isize - pad as isize;
                let wv = w[(o * c_in + i) * k + kk];
                if stride == 1 {
                    let t0 = (-shift).max(0) as usize;
                    let t1 = ((t_in as isize - shift).min(t_out as isize)).max(0) as usize;
                    if let Some(dw) = dw.as_deref_mut() {
                        let mut acc = R::ZERO;
                        for t in t0..t1 {
                            acc += grow[t] * xrow[(t as isize + shift) as usize];
                        }
                        dw[(o * c_in + i) * k + kk] += acc;
                    }
                    if let Some(dx) = dx.as_deref_mut() {
                        let dxrow = &mut dx[i * t_in..(i + 1) * t_in];
                        for t in t0..t1 {
                            dxrow[(t as isize + shift) as usize] += wv * grow[t];
                        }
                    }
                } else {
                    for (t, gv) in grow.iter().enumerate() {
                        let src = (stride * t) as isize + shift;
                        if src >= 0 && (src as usize) < t_in {
                            if let Some(dw) = dw.as_deref_mut() {
                                dw[(o * c_in + i) * k + kk] += *gv * xrow[src as usize];
                            }
                            if let Some(dx) = dx.as_deref_mut() {
                                dx[i * t_in + src as usize] += wv * *gv;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Per-group statistics cached by the group-norm forward pass.
#[derive(Clone, Debug)]
pub struct GroupNormCache<R: Real> {
    pub mean: Vec<R>,
    pub inv_std: Vec<R>,
}

/// Number of normalization groups for a channel count: C when C < 8,
/// otherwise the largest divisor of C that is at most 8.
pub fn group_count(channels: usize) -> usize {
    if channels < 8 {
        return channels.max(1);
    }
    (1..=8).rev().find(|g| channels % g == 0).unwrap_or(1)
}

/// Group normalization with per-channel affine parameters.
///
/// Statistics are taken over (channels-in-group x T); eps stabilizes the
/// variance. Returns the output and the cache needed for backward.
pub fn group_norm_forward<R: Real>(
    x: &[R],
    gamma: &[R],
    beta: &[R],
    channels: usize,
    t: usize,
    groups: usize,
    eps: f64,
) -> (Vec<R>, GroupNormCache<R>) {
    debug_assert_eq!(channels % groups, 0);
    let per = channels / groups;
    let m = per * t;
    let mut out = vec![R::ZERO; channels * t];
    let mut mean = vec![R::ZERO; groups];
    let mut inv_std = vec![R::ZERO; groups];
    for g in 0..groups {
        let base = g * per * t;
        let xs = &x[base..base + m];
        let mut s = R::ZERO;
        for v in xs {
            s += *v;
        }
        let mu = s / R::of(m as f64);
        let mut var = R::ZERO;
        for v in xs {
            let d = *v - mu;
            var += d * d;
        }
        var /= R::of(m as f64);
        let r = R::ONE / (var + R::of(eps)).sqrt();
        mean[g] = mu;
        inv_std[g] = r;
        for c in 0..per {
            let ch = g * per + c;
            let xrow = &x[ch * t..(ch + 1) * t];
            let orow = &mut out[ch * t..(ch + 1) * t];
            let ga = gamma[ch];
            let be = beta[ch];
            for (o, v) in orow.iter_mut().zip(xrow) {
                *o = ga * ((*v - mu) * r) + be;
            }
        }
    }
    (out, GroupNormCache { mean, inv_std })
}

/// Backward of [`group_norm_forward`]; adds into the provided buffers.
#[allow(clippy::too_many_arguments)]
pub fn group_norm_backward<R: Real>(
    g: &[R],
    x: &[R],
    gamma: &[R],
    cache: &GroupNormCache<R>,
    channels: usize,
    t: usize,
    groups: usize,
    mut dx: Option<&mut [R]>,
    mut dgamma: Option<&mut [R]>,
    mut dbeta: Option<&mut [R]>,
) {
    let per = channels / groups;
    let m = per * t;
    for gi in 0..groups {
        let mu = cache.mean[gi];
        let r = cache.inv_std[gi];
        // dgamma/dbeta and the two reductions needed for dx.
        let mut sum_dxhat = R::ZERO;
        let mut sum_dxhat_xhat = R::ZERO;
        for c in 0..per {
            let ch = gi * per + c;
            let xrow = &x[ch * t..(ch + 1) * t];
            let grow = &g[ch * t..(ch + 1) * t];
            let ga = gamma[ch];
            let mut dg = R::ZERO;
            let mut db = R::ZERO;
            for (gv, xv) in grow.iter().zip(xrow) {
                let xhat = (*xv - mu) * r;
                dg += *gv * xhat;
                db += *gv;
                let dxhat = *gv * ga;
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat;
            }
            if let Some(dgamma) = dgamma.as_deref_mut() {
                dgamma[ch] += dg;
            }
            if let Some(dbeta) = dbeta.as_deref_mut() {
                dbeta[ch] += db;
            }
        }
        if let Some(dx) = dx.as_deref_mut() {
            let mean_dxhat = sum_dxhat / R::of(m as f64);
            let mean_dxhat_xhat = sum_dxhat_xhat / R::of(m as f64);
            for c in 0..per {
                let ch = gi * per + c;
                let xrow = &x[ch * t..(ch + 1) * t];
                let grow = &g[ch * t..(ch + 1) * t];
                let dxrow = &mut dx[ch * t..(ch + 1) * t];
                let ga = gamma[ch];
                for ((dv, gv), xv) in dxrow.iter_mut().zip(grow).zip(xrow) {
                    let xhat = (*xv - mu) * r;
                    let dxhat = *gv * ga;
                    *dv += r * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                }
            }
        }
    }
}

/// Sigmoid-weighted linear unit: x * sigmoid(x).
pub fn silu_forward<R: Real>(x: &[R]) -> Vec<R> {
    x.iter()
        .map(|&v| {
            let s = R::ONE / (R::ONE + (-v).exp());
            v * s
        })
        .collect()
}

/// d/dx [x*sigmoid(x)] = sigmoid(x) * (1 + x * (1 - sigmoid(x))).
pub fn silu_backward<R: Real>(g: &[R], x: &[R], dx: &mut [R]) {
    for ((d, gv), xv) in dx.iter_mut().zip(g).zip(x) {
        let s = R::ONE / (R::ONE + (-*xv).exp());
        *d += *gv * s * (R::ONE + *xv * (R::ONE - s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_count_rule() {
        assert_eq!(group_count(4), 4);
        assert_eq!(group_count(7), 7);
        assert_eq!(group_count(8), 8);
        assert_eq!(group_count(12), 6);
        assert_eq!(group_count(16), 8);
        assert_eq!(group_count(64), 8);
    }

    #[test]
    fn conv_identity_kernel() {
        let x = vec![1.0f64, 2.0, 3.0];
        let out = conv1d_forward(&x, &[1.0], &[0.0], 1, 1, 1, 3, 1);
        assert_eq!(out, x);
    }

    #[test]
    fn conv_two_output_channels() {
        let x = vec![1.0f64, 2.0, 3.0];
        let w = vec![1.0, 2.0]; // two 1x1x1 kernels
        let out = conv1d_forward(&x, &w, &[0.0, 0.0], 1, 2, 1, 3, 1);
        assert_eq!(out, vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn conv_stride_two_length() {
        let x = vec![0.0f64; 2 * 8];
        let w = vec![0.0; 3 * 2 * 3];
        let out = conv1d_forward(&x, &w, &[0.0; 3], 2, 3, 3, 8, 2);
        assert_eq!(out.len(), 3 * 4);
    }
}
