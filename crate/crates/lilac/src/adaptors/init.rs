//! Identity and zero convolution initializers.
//!
//! A zero convolution contributes nothing at initialization and grows during
//! training; an identity convolution makes a wrapped block behave exactly
//! like the unwrapped block until training moves it.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;

/// Square convolution initialized to the exact identity map: biases 0 and
/// W[o,i,k] = 1 iff k is the center tap and i == o, else 0. K must be odd.
pub fn identity_conv<R: Real>(channels: usize, k: usize) -> Result<(Tensor<R>, Tensor<R>)> {
    if k % 2 == 0 {
        return Err(Error::Config(format!("identity conv kernel width {k} must be odd")));
    }
    let center = (k - 1) / 2;
    let mut w = vec![R::ZERO; channels * channels * k];
    for c in 0..channels {
        w[(c * channels + c) * k + center] = R::ONE;
    }
    Ok((Tensor::from_vec(&[channels, channels, k], w)?, Tensor::zeros(&[channels])))
}

/// Convolution with every weight and bias exactly zero; its output vanishes
/// for any input while gradients still flow on the backward pass.
pub fn zero_conv<R: Real>(in_channels: usize, out_channels: usize, k: usize) -> Result<(Tensor<R>, Tensor<R>)> {
    if k % 2 == 0 {
        return Err(Error::Config(format!("zero conv kernel width {k} must be odd")));
    }
    Ok((Tensor::zeros(&[out_channels, in_channels, k]), Tensor::zeros(&[out_channels])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kernels::conv1d_forward;
    use crate::numerics::rng::RngKey;

    #[test]
    fn identity_k1_is_identity_matrix() {
        let (w, b) = identity_conv::<f64>(3, 1).unwrap();
        assert_eq!(w.shape(), &[3, 3, 1]);
        let expect = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(w.data(), &expect);
        assert_eq!(b.data(), &[0.0; 3]);
    }

    #[test]
    fn identity_k3_center_tap_only() {
        let (w, _) = identity_conv::<f64>(2, 3).unwrap();
        // W[o,i,k]: center tap (k=1) carries the Kronecker delta.
        for o in 0..2 {
            for i in 0..2 {
                for k in 0..3 {
                    let v = w.data()[(o * 2 + i) * 3 + k];
                    let expect = if k == 1 && i == o { 1.0 } else { 0.0 };
                    assert_eq!(v, expect);
                }
            }
        }
    }

    #[test]
    fn identity_conv_maps_any_input_to_itself() {
        let mut stream = RngKey::root(12).stream();
        for &(c, k, t) in &[(1usize, 1usize, 5usize), (4, 3, 9), (7, 5, 12)] {
            let (w, b) = identity_conv::<f64>(c, k).unwrap();
            let x = Tensor::randn(&[c, t], 1.5, &mut stream);
            let y = conv1d_forward(x.data(), w.data(), b.data(), c, c, k, t, 1);
            assert_eq!(y.as_slice(), x.data());
        }
    }

    #[test]
    fn even_kernel_is_config_error() {
        assert!(identity_conv::<f32>(2, 2).is_err());
        assert!(zero_conv::<f32>(2, 3, 4).is_err());
    }

    #[test]
    fn zero_conv_output_is_exactly_zero() {
        let mut stream = RngKey::root(13).stream();
        let (w, b) = zero_conv::<f32>(12, 16, 1).unwrap();
        assert_eq!(w.numel() + b.numel(), 12 * 16 + 16); // 208 parameters
        let x = Tensor::randn(&[12, 6], 2.0, &mut stream);
        let y = conv1d_forward(x.data(), w.data(), b.data(), 12, 16, 1, 6, 1);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_conv_still_receives_gradient() {
        // d loss/d w is generally nonzero even when w = 0.
        use crate::numerics::gradcheck::grad_check;
        use crate::numerics::tensor::ParamStore;
        let mut stream = RngKey::root(14).stream();
        let x = Tensor::<f64>::randn(&[2, 4], 1.0, &mut stream);
        let mut ps = ParamStore::new();
        let (w, b) = zero_conv::<f64>(2, 3, 1).unwrap();
        let wr = ps.register("w", w).unwrap();
        let br = ps.register("b", b).unwrap();
        let report = grad_check(&mut ps, 1e-5, |store, tape| {
            let xv = tape.constant(&x);
            let wv = tape.param(store, wr);
            let bv = tape.param(store, br);
            let y = tape.conv1d(xv, wv, bv, 1)?;
            let sq = tape.mul(y, y)?;
            Ok(tape.sum_all(sq))
        })
        .unwrap();
        assert!(report.max_rel_err <= 1e-6, "rel err {}", report.max_rel_err);

        // And the analytic gradient itself is nonzero for the bias path:
        // loss = sum(y^2) has zero grad at y = 0, so use sum(y) instead.
        let mut tape = crate::numerics::tape::Tape::new();
        tape.mark_trainable(ps.tag());
        let xv = tape.constant(&x);
        let wv = tape.param(&ps, wr);
        let bv = tape.param(&ps, br);
        let y = tape.conv1d(xv, wv, bv, 1).unwrap();
        let loss = tape.sum_all(y);
        let grads = tape.backward(loss).unwrap();
        let gw = grads.get(wr).unwrap();
        assert!(gw.iter().any(|&v| v != 0.0), "zero conv weight grad should be nonzero");
    }
}
