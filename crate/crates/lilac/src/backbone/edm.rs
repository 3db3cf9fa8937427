//! Sigma-parameterized preconditioning of the denoiser.
//!
//! D(x; sigma) = c_skip*x + c_out*NN(c_in*x, c_noise, ...) with the standard
//! constants c_skip = sd^2/(s^2+sd^2), c_out = s*sd/sqrt(s^2+sd^2),
//! c_in = 1/sqrt(s^2+sd^2), c_noise = ln(s)/4, and training loss weight
//! lambda(s) = (s^2+sd^2)/(s*sd)^2 = 1/c_out^2.

use crate::error::{Error, Result};

pub const SIGMA_DATA: f64 = 0.5;

#[derive(Clone, Copy, Debug)]
pub struct EdmPrecond {
    pub sigma_data: f64,
}

impl Default for EdmPrecond {
    fn default() -> Self {
        EdmPrecond { sigma_data: SIGMA_DATA }
    }
}

impl EdmPrecond {
    pub fn check_sigma(sigma: f64) -> Result<()> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma {sigma} must be positive and finite")));
        }
        Ok(())
    }

    pub fn c_skip(&self, sigma: f64) -> f64 {
        let sd2 = self.sigma_data * self.sigma_data;
        sd2 / (sigma * sigma + sd2)
    }

    pub fn c_out(&self, sigma: f64) -> f64 {
        sigma * self.sigma_data / (sigma * sigma + self.sigma_data * self.sigma_data).sqrt()
    }

    pub fn c_in(&self, sigma: f64) -> f64 {
        1.0 / (sigma * sigma + self.sigma_data * self.sigma_data).sqrt()
    }

    pub fn c_noise(&self, sigma: f64) -> f64 {
        sigma.ln() / 4.0
    }

    pub fn loss_weight(&self, sigma: f64) -> f64 {
        let s2 = sigma * sigma;
        let sd2 = self.sigma_data * self.sigma_data;
        (s2 + sd2) / (s2 * sd2)
    }
}
