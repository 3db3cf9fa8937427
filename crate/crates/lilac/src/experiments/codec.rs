//! Invertible synthetic latent codec: a fixed orthonormal mixing of
//! [chroma rows; style one-hot x envelope; texture noise] into the latent
//! channels. Exactly decodable, so adherence can be measured without an
//! audio decoder. Internals run in f64 regardless of the training precision.

use crate::error::{Error, Result};
use crate::numerics::rng::RngKey;
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;

use super::data::{style_envelope, SyntheticSample};

pub struct LatentCodec {
    /// C x C orthonormal mixing matrix, row-major.
    q: Vec<f64>,
    pub channels: usize,
    pub num_styles: usize,
    pub texture_sigma: f64,
}

impl LatentCodec {
    /// Fixed by seed. Requires channels >= 12 + num_styles; any remaining
    /// rows carry zero-mean texture noise of amplitude `texture_sigma`.
    pub fn new(channels: usize, num_styles: usize, texture_sigma: f64, seed: u64) -> Result<Self> {
        if channels < 12 + num_styles {
            return Err(Error::Config(format!(
                "codec layout overflow: {channels} channels < 12 + {num_styles} styles"
            )));
        }
        let mut stream = RngKey::root(seed).child(20).stream();
        // Random Gaussian matrix, orthonormalized row-by-row (modified
        // Gram-Schmidt, f64).
        let mut q = vec![0.0f64; channels * channels];
        for v in q.iter_mut() {
            *v = stream.normal();
        }
        for i in 0..channels {
            for j in 0..i {
                let mut dot = 0.0;
                for k in 0..channels {
                    dot += q[i * channels + k] * q[j * channels + k];
                }
                for k in 0..channels {
                    q[i * channels + k] -= dot * q[j * channels + k];
                }
            }
            let norm: f64 =
                (0..channels).map(|k| q[i * channels + k] * q[i * channels + k]).sum::<f64>().sqrt();
            if norm < 1e-9 {
                return Err(Error::Config("degenerate mixing matrix draw".into()));
            }
            for k in 0..channels {
                q[i * channels + k] /= norm;
            }
        }
        Ok(LatentCodec { q, channels, num_styles, texture_sigma })
    }

    pub fn texture_rows(&self) -> usize {
        self.channels - 12 - self.num_styles
    }

    /// Max |(Q^T Q - I)| entry; the orthonormality defect.
    pub fn orthonormality_defect(&self) -> f64 {
        let c = self.channels;
        let mut worst = 0.0f64;
        for i in 0..c {
            for j in 0..c {
                let mut dot = 0.0;
                for k in 0..c {
                    dot += self.q[k * c + i] * self.q[k * c + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    fn mix_columns<R: Real>(&self, features: &[f64], frames: usize) -> Tensor<R> {
        let c = self.channels;
        let mut out = vec![R::ZERO; c * frames];
        for row in 0..c {
            for t in 0..frames {
                let mut acc = 0.0;
                for k in 0..c {
                    acc += self.q[row * c + k] * features[k * frames + t];
                }
                out[row * frames + t] = R::of(acc);
            }
        }
        Tensor::from_vec(&[c, frames], out).expect("latent shape is consistent")
    }

    /// z_t = Q [note_roll_t; onehot(style)*env(style, t); texture_t].
    pub fn encode_latent<R: Real>(&self, sample: &SyntheticSample<R>) -> Result<Tensor<R>> {
        let frames = sample.note_roll.shape()[1];
        if sample.style_id >= self.num_styles {
            return Err(Error::Config(format!(
                "style id {} does not fit codec with {} styles",
                sample.style_id, self.num_styles
            )));
        }
        let c = self.channels;
        let mut features = vec![0.0f64; c * frames];
        for ch in 0..12 {
            for t in 0..frames {
                features[ch * frames + t] = sample.note_roll.data()[ch * frames + t].to_f64();
            }
        }
        let srow = 12 + sample.style_id;
        for t in 0..frames {
            features[srow * frames + t] = style_envelope(sample.style_id, t);
        }
        if self.texture_sigma > 0.0 {
            let mut tex = sample.texture_key.stream();
            for row in (12 + self.num_styles)..c {
                for t in 0..frames {
                    features[row * frames + t] = self.texture_sigma * tex.normal();
                }
            }
        }
        Ok(self.mix_columns(&features, frames))
    }

    /// Context latent: the accompaniment roll in the chroma rows, everything
    /// else zero.
    pub fn encode_context<R: Real>(&self, context_roll: &Tensor<R>) -> Result<Tensor<R>> {
        let shape = context_roll.shape();
        if shape.len() != 2 || shape[0] != 12 {
            return Err(Error::Dimension(format!("context roll shape {shape:?}, expected [12, T]")));
        }
        let frames = shape[1];
        let mut features = vec![0.0f64; self.channels * frames];
        for ch in 0..12 {
            for t in 0..frames {
                features[ch * frames + t] = context_roll.data()[ch * frames + t].to_f64();
            }
        }
        Ok(self.mix_columns(&features, frames))
    }

    /// f_hat = Q^T z: chroma rows clamped to [0, 1], style rows raw.
    pub fn decode_probe<R: Real>(&self, z: &Tensor<R>) -> Result<DecodedProbe> {
        let shape = z.shape();
        if shape.len() != 2 || shape[0] != self.channels {
            return Err(Error::Dimension(format!(
                "latent shape {shape:?}, expected [{}, T]",
                self.channels
            )));
        }
        let frames = shape[1];
        let c = self.channels;
        let mut chroma = vec![0.0f64; 12 * frames];
        let mut style_scores = vec![0.0f64; self.num_styles * frames];
        for row in 0..(12 + self.num_styles) {
            for t in 0..frames {
                let mut acc = 0.0;
                for k in 0..c {
                    // Q^T[row, k] = Q[k, row]
                    acc += self.q[k * c + row] * z.data()[k * frames + t].to_f64();
                }
                if row < 12 {
                    chroma[row * frames + t] = acc.clamp(0.0, 1.0);
                } else {
                    style_scores[(row - 12) * frames + t] = acc;
                }
            }
        }
        Ok(DecodedProbe { chroma, style_scores, frames, num_styles: self.num_styles })
    }
}

/// Decoded latent content: chroma estimate and per-style scores over time.
#[derive(Clone, Debug)]
pub struct DecodedProbe {
    pub chroma: Vec<f64>,        // 12 x frames, clamped to [0, 1]
    pub style_scores: Vec<f64>,  // num_styles x frames
    pub frames: usize,
    pub num_styles: usize,
}

impl DecodedProbe {
    /// Cosine similarity between the one-hot of `target_style` and the
    /// time-mean of the decoded style scores (0 when degenerate).
    pub fn style_cosine(&self, target_style: usize) -> f64 {
        let mut mean = vec![0.0f64; self.num_styles];
        for s in 0..self.num_styles {
            for t in 0..self.frames {
                mean[s] += self.style_scores[s * self.frames + t];
            }
            mean[s] /= self.frames as f64;
        }
        let norm: f64 = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 || target_style >= self.num_styles {
            return 0.0;
        }
        mean[target_style] / norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::data::{generate_dataset, DataConfig};

    fn codec() -> LatentCodec {
        LatentCodec::new(16, 3, 0.05, 7).unwrap()
    }

    #[test]
    fn layout_overflow_is_config_error() {
        assert!(LatentCodec::new(14, 3, 0.0, 1).is_err());
        assert!(LatentCodec::new(15, 3, 0.0, 1).is_ok());
    }

    #[test]
    fn q_is_orthonormal() {
        assert!(codec().orthonormality_defect() < 1e-12);
    }

    #[test]
    fn round_trip_recovers_chroma_and_style() {
        let cfg = DataConfig { t_latent: 16, ..Default::default() };
        let samples = generate_dataset::<f32>(&cfg, 8, 5).unwrap();
        let cd = codec();
        for s in &samples {
            let z = cd.encode_latent(&s).unwrap();
            let probe = cd.decode_probe(&z).unwrap();
            for i in 0..12 * 16 {
                let orig = s.note_roll.data()[i] as f64;
                assert!((probe.chroma[i] - orig).abs() < 1e-6, "chroma {i}");
            }
            // style argmax recovered exactly
            let cos = probe.style_cosine(s.style_id);
            assert!(cos > 0.99, "style cosine {cos}");
            let mut means = vec![0.0; 3];
            for st in 0..3 {
                for t in 0..16 {
                    means[st] += probe.style_scores[st * 16 + t];
                }
            }
            let argmax =
                means.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            assert_eq!(argmax, s.style_id);
        }
    }

    #[test]
    fn zero_roll_zero_texture_norm_equals_envelope() {
        // With an all-zero roll and no texture, ||z_t|| = env(style, t) by
        // orthonormality.
        let cfg = DataConfig { t_latent: 8, texture_sigma: 0.0, ..Default::default() };
        let mut samples = generate_dataset::<f64>(&cfg, 1, 6).unwrap();
        let s = &mut samples[0];
        for v in s.note_roll.data_mut() {
            *v = 0.0;
        }
        let cd = LatentCodec::new(16, 3, 0.0, 7).unwrap();
        let z = cd.encode_latent(s).unwrap();
        for t in 0..8 {
            let norm: f64 =
                (0..16).map(|c| z.data()[c * 8 + t].powi(2)).sum::<f64>().sqrt();
            let env = style_envelope(s.style_id, t);
            assert!((norm - env).abs() < 1e-9, "t {t}: {norm} vs {env}");
        }
    }

    #[test]
    fn style_difference_lives_in_style_subspace() {
        let cfg = DataConfig { t_latent: 8, texture_sigma: 0.0, ..Default::default() };
        let base = generate_dataset::<f64>(&cfg, 1, 8).unwrap().remove(0);
        let mut other = base.clone();
        other.style_id = (base.style_id + 1) % 3;
        let cd = LatentCodec::new(16, 3, 0.0, 7).unwrap();
        let za = cd.encode_latent(&base).unwrap();
        let zb = cd.encode_latent(&other).unwrap();
        let pa = cd.decode_probe(&za).unwrap();
        let pb = cd.decode_probe(&zb).unwrap();
        // chroma rows identical, style rows different
        for i in 0..12 * 8 {
            assert!((pa.chroma[i] - pb.chroma[i]).abs() < 1e-9);
        }
        assert!(pa
            .style_scores
            .iter()
            .zip(&pb.style_scores)
            .any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn latent_noise_barely_moves_decoded_chroma() {
        let cfg = DataConfig { t_latent: 16, ..Default::default() };
        let s = generate_dataset::<f64>(&cfg, 1, 9).unwrap().remove(0);
        let cd = codec();
        let z = cd.encode_latent(&s).unwrap();
        let mut stream = RngKey::root(77).stream();
        let mut worst_rms = 0.0f64;
        for _ in 0..20 {
            let noisy: Vec<f64> =
                z.data().iter().map(|v| v + 0.01 * stream.normal()).collect();
            let zn = Tensor::from_vec(z.shape(), noisy).unwrap();
            let probe = cd.decode_probe(&zn).unwrap();
            let base = cd.decode_probe(&z).unwrap();
            let mut acc = 0.0;
            for i in 0..probe.chroma.len() {
                let d = probe.chroma[i] - base.chroma[i];
                acc += d * d;
            }
            worst_rms = worst_rms.max((acc / probe.chroma.len() as f64).sqrt());
        }
        assert!(worst_rms < 0.02, "rms {worst_rms}");
    }

    #[test]
    fn zero_latent_decodes_to_zero() {
        let cd = codec();
        let z = Tensor::<f64>::zeros(&[16, 4]);
        let probe = cd.decode_probe(&z).unwrap();
        assert!(probe.chroma.iter().all(|&v| v == 0.0));
        assert!(probe.style_scores.iter().all(|&v| v == 0.0));
        assert_eq!(probe.style_cosine(0), 0.0);
    }
}
