//! Deterministic probability-flow sampling: the rho-spaced sigma schedule and
//! second-order Heun integration.

use crate::error::{Error, Result};
use crate::numerics::rng::RngKey;
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;

/// Descending noise schedule: sigma_i = (max^(1/rho) + i/(n-1)*(min^(1/rho) - max^(1/rho)))^rho.
pub fn karras_sigmas(n: usize, sigma_min: f64, sigma_max: f64, rho: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("schedule needs n >= 2, got {n}")));
    }
    if !(sigma_min > 0.0 && sigma_min < sigma_max) {
        return Err(Error::Config(format!(
            "need 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]"
        )));
    }
    let lo = sigma_min.powf(1.0 / rho);
    let hi = sigma_max.powf(1.0 / rho);
    Ok((0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            (hi + f * (lo - hi)).powf(rho)
        })
        .collect())
}

/// Sampler knobs; `steps = 1` degenerates to a single Euler step from sigma_max.
#[derive(Clone, Copy, Debug)]
pub struct SamplerConfig {
    pub steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { steps: 30, sigma_min: 0.01, sigma_max: 10.0, rho: 7.0 }
    }
}

/// Integrates dx/dsigma = (x - D(x; sigma))/sigma from sigma_max to 0 with
/// Heun's method (plain Euler on the final step to sigma = 0). Deterministic
/// given the key: the only randomness is the initial noise draw.
pub fn heun_sample<R, D>(
    mut denoise: D,
    channels: usize,
    t: usize,
    cfg: SamplerConfig,
    key: RngKey,
) -> Result<Tensor<R>>
where
    R: Real,
    D: FnMut(&Tensor<R>, f64) -> Result<Tensor<R>>,
{
    if cfg.steps < 1 {
        return Err(Error::Config("sampler needs steps >= 1".into()));
    }
    let sigmas = if cfg.steps == 1 {
        vec![cfg.sigma_max]
    } else {
        karras_sigmas(cfg.steps, cfg.sigma_min, cfg.sigma_max, cfg.rho)?
    };
    let mut stream = key.stream();
    let mut x = Tensor::<R>::randn(&[channels, t], cfg.sigma_max, &mut stream);

    for i in 0..sigmas.len() {
        let s = sigmas[i];
        let s_next = if i + 1 < sigmas.len() { sigmas[i + 1] } else { 0.0 };
        let d0 = denoise(&x, s)?;
        let h = R::of(s_next - s);
        // slope = (x - D)/s
        let slope: Vec<R> = x
            .data()
            .iter()
            .zip(d0.data())
            .map(|(xv, dv)| (*xv - *dv) / R::of(s))
            .collect();
        if s_next == 0.0 {
            let out: Vec<R> =
                x.data().iter().zip(&slope).map(|(xv, sl)| *xv + h * *sl).collect();
            x = Tensor::from_vec(x.shape(), out)?;
        } else {
            let x_pred: Vec<R> =
                x.data().iter().zip(&slope).map(|(xv, sl)| *xv + h * *sl).collect();
            let x_pred = Tensor::from_vec(x.shape(), x_pred)?;
            let d1 = denoise(&x_pred, s_next)?;
            let out: Vec<R> = x
                .data()
                .iter()
                .zip(&slope)
                .zip(x_pred.data().iter().zip(d1.data()))
                .map(|((xv, sl), (xp, dv))| {
                    let slope2 = (*xp - *dv) / R::of(s_next);
                    *xv + h * R::of(0.5) * (*sl + slope2)
                })
                .collect();
            x = Tensor::from_vec(x.shape(), out)?;
        }
    }
    if !x.all_finite() {
        return Err(Error::Train("sampler produced non-finite values".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_and_monotone() {
        let s = karras_sigmas(10, 0.01, 10.0, 7.0).unwrap();
        assert!((s[0] - 10.0).abs() < 1e-12);
        assert!((s[9] - 0.01).abs() < 1e-12);
        for w in s.windows(2) {
            assert!(w[1] < w[0], "not strictly decreasing: {w:?}");
        }
    }

    #[test]
    fn schedule_middle_value_matches_formula() {
        let s = karras_sigmas(3, 0.01, 10.0, 7.0).unwrap();
        let hi = 10.0f64.powf(1.0 / 7.0);
        let lo = 0.01f64.powf(1.0 / 7.0);
        let expect = (hi + 0.5 * (lo - hi)).powf(7.0);
        assert!((s[1] - expect).abs() < 1e-12);
    }

    #[test]
    fn schedule_rejects_bad_inputs() {
        assert!(karras_sigmas(1, 0.01, 10.0, 7.0).is_err());
        assert!(karras_sigmas(5, 0.0, 10.0, 7.0).is_err());
        assert!(karras_sigmas(5, 10.0, 1.0, 7.0).is_err());
    }

    #[test]
    fn oracle_denoiser_converges_to_target() {
        // D(x; sigma) = target for all sigma: the flow contracts onto target.
        let target: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37).sin()).collect();
        let tt = Tensor::from_vec(&[3, 8], target.clone()).unwrap();
        let cfg = SamplerConfig { steps: 10, ..Default::default() };
        let out = heun_sample(
            |_x: &Tensor<f64>, _s| Ok(tt.clone()),
            3,
            8,
            cfg,
            RngKey::root(21),
        )
        .unwrap();
        for (o, t) in out.data().iter().zip(&target) {
            assert!((o - t).abs() < 1e-3, "{o} vs {t}");
        }
    }

    #[test]
    fn single_step_equals_euler_from_sigma_max() {
        // With one step, x_out = x0 + (0 - smax) * (x0 - D)/smax = D(x0; smax).
        let target = Tensor::from_vec(&[1, 4], vec![0.3, -0.1, 0.7, 0.0]).unwrap();
        let cfg = SamplerConfig { steps: 1, ..Default::default() };
        let key = RngKey::root(4);
        let out =
            heun_sample(|_x: &Tensor<f64>, _s| Ok(target.clone()), 1, 4, cfg, key).unwrap();
        for (o, t) in out.data().iter().zip(target.data()) {
            assert!((o - t).abs() < 1e-12);
        }
    }

    #[test]
    fn same_key_same_output() {
        let tt = Tensor::from_vec(&[2, 4], vec![0.5; 8]).unwrap();
        let cfg = SamplerConfig { steps: 5, ..Default::default() };
        let run = || {
            heun_sample(|_x: &Tensor<f32>, _s| Ok(tt.clone()), 2, 4, cfg, RngKey::root(77))
                .unwrap()
        };
        assert_eq!(run().data(), run().data());
    }
}
