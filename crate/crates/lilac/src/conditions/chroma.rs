//! Chromagrams: 12 x T maps of pitch-class energy, per-frame normalized.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;

pub const PITCH_CLASSES: usize = 12;

/// Pitch-class energy over time. Channel index is the pitch class with C = 0
/// and A = 9 (A4 = 440 Hz reference); values are in [0, 1] with each frame's
/// maximum at 1 (all-zero frames stay zero).
#[derive(Clone, Debug, PartialEq)]
pub struct Chromagram<R: Real> {
    values: Vec<R>, // 12 x frames, row-major
    frames: usize,
    frame_rate_hz: f64,
}

impl<R: Real> Chromagram<R> {
    pub fn from_values(values: Vec<R>, frames: usize, frame_rate_hz: f64) -> Result<Self> {
        if values.len() != PITCH_CLASSES * frames {
            return Err(Error::Dimension(format!(
                "chromagram wants {} values for {frames} frames, got {}",
                PITCH_CLASSES * frames,
                values.len()
            )));
        }
        for v in &values {
            if !(*v >= R::ZERO && *v <= R::ONE) {
                return Err(Error::Contract(format!("chromagram value {v} outside [0, 1]")));
            }
        }
        Ok(Chromagram { values, frames, frame_rate_hz })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn at(&self, class: usize, frame: usize) -> R {
        self.values[class * self.frames + frame]
    }

    pub fn to_tensor(&self) -> Tensor<R> {
        Tensor::from_vec(&[PITCH_CLASSES, self.frames], self.values.clone())
            .expect("chromagram shape is consistent")
    }
}

/// Scales every frame so its maximum becomes 1; all-zero frames stay zero.
fn normalize_frames<R: Real>(values: &mut [R], frames: usize) {
    for f in 0..frames {
        let mut maxv = R::ZERO;
        for c in 0..PITCH_CLASSES {
            maxv = maxv.max(values[c * frames + f]);
        }
        if maxv > R::ZERO {
            for c in 0..PITCH_CLASSES {
                values[c * frames + f] /= maxv;
            }
        }
    }
}

/// Nearest pitch class of a frequency: round(12*log2(f/440) + 69) mod 12.
pub fn pitch_class_of(freq_hz: f64) -> usize {
    let midi = 12.0 * (freq_hz / 440.0).log2() + 69.0;
    (midi.round() as i64).rem_euclid(12) as usize
}

/// Chromagram of a mono waveform via a Hann-windowed magnitude STFT.
///
/// Frame t covers samples [t*hop, t*hop + frame_size), zero-padded past the
/// signal end; bin energies (squared magnitudes) are summed per pitch class
/// and each frame is normalized to maximum 1.
pub fn chromagram_from_audio<R: Real>(
    samples: &[f64],
    sample_rate: f64,
    frame_size: usize,
    hop: usize,
) -> Result<Chromagram<R>> {
    if samples.is_empty() {
        return Err(Error::Contract("chromagram of empty waveform".into()));
    }
    if sample_rate <= 0.0 {
        return Err(Error::Contract(format!("sample rate {sample_rate} must be positive")));
    }
    if frame_size < 2 || hop == 0 {
        return Err(Error::Config(format!("bad stft config: frame_size {frame_size}, hop {hop}")));
    }
    let frames = samples.len().div_ceil(hop);
    let window: Vec<f64> = (0..frame_size)
        .map(|i| {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / frame_size as f64).cos())
        })
        .collect();

    // Pitch class per usable bin (skip DC; stop below Nyquist and 25 Hz).
    let bin_class: Vec<Option<usize>> = (0..frame_size / 2 + 1)
        .map(|j| {
            let f = j as f64 * sample_rate / frame_size as f64;
            if f >= 25.0 && f < sample_rate / 2.0 {
                Some(pitch_class_of(f))
            } else {
                None
            }
        })
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(frame_size);
    let mut values = vec![R::ZERO; PITCH_CLASSES * frames];
    let mut buf = vec![Complex::new(0.0, 0.0); frame_size];
    for frame in 0..frames {
        let start = frame * hop;
        for i in 0..frame_size {
            let s = samples.get(start + i).copied().unwrap_or(0.0);
            buf[i] = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        let mut energy = [0.0f64; PITCH_CLASSES];
        for (j, class) in bin_class.iter().enumerate() {
            if let Some(c) = class {
                energy[*c] += buf[j].norm_sqr();
            }
        }
        for c in 0..PITCH_CLASSES {
            values[c * frames + frame] = R::of(energy[c]);
        }
    }
    normalize_frames(&mut values, frames);
    // Guard against rounding pushing a normalized maximum above one.
    for v in values.iter_mut() {
        *v = (*v).min(R::ONE);
    }
    Chromagram::from_values(values, frames, sample_rate / hop as f64)
}

/// Chromagram straight from a 12 x T note roll in [0, 1] (values outside the
/// range are a contract error); applies the per-frame normalization rule and
/// inherits the latent frame rate.
pub fn chroma_from_noteroll<R: Real>(
    roll: &[R],
    frames: usize,
    frame_rate_hz: f64,
) -> Result<Chromagram<R>> {
    if roll.len() != PITCH_CLASSES * frames {
        return Err(Error::Dimension(format!(
            "note roll wants {} values, got {}",
            PITCH_CLASSES * frames,
            roll.len()
        )));
    }
    for v in roll {
        if !(*v >= R::ZERO && *v <= R::ONE) {
            return Err(Error::Contract(format!("note roll value {v} outside [0, 1]")));
        }
    }
    let mut values = roll.to_vec();
    normalize_frames(&mut values, frames);
    Chromagram::from_values(values, frames, frame_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, sr: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / sr).sin()).collect()
    }

    #[test]
    fn a440_peaks_at_class_nine() {
        let sr = 22050.0;
        let wave = sine(440.0, sr, 8192);
        let ch = chromagram_from_audio::<f64>(&wave, sr, 2048, 1024).unwrap();
        for f in 0..ch.frames().min(4) {
            let col: Vec<f64> = (0..12).map(|c| ch.at(c, f)).collect();
            let max_class = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(max_class, 9, "frame {f}: {col:?}");
            assert_eq!(col[9], 1.0);
        }
    }

    #[test]
    fn silence_is_all_zero() {
        let wave = vec![0.0; 4096];
        let ch = chromagram_from_audio::<f64>(&wave, 22050.0, 2048, 1024).unwrap();
        assert!(ch.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_waveform_is_contract_error() {
        assert!(matches!(
            chromagram_from_audio::<f64>(&[], 22050.0, 2048, 1024),
            Err(Error::Contract(_))
        ));
    }

    /// Independent oracle: naive DFT chromagram with identical conventions.
    fn naive_chroma(samples: &[f64], sr: f64, frame_size: usize, hop: usize) -> Vec<f64> {
        let frames = samples.len().div_ceil(hop);
        let mut out = vec![0.0; 12 * frames];
        for frame in 0..frames {
            let start = frame * hop;
            let mut energy = [0.0f64; 12];
            for j in 0..frame_size / 2 + 1 {
                let f = j as f64 * sr / frame_size as f64;
                if !(25.0..sr / 2.0).contains(&f) {
                    continue;
                }
                let mut re = 0.0;
                let mut im = 0.0;
                for i in 0..frame_size {
                    let s = samples.get(start + i).copied().unwrap_or(0.0);
                    let w = 0.5
                        * (1.0
                            - (2.0 * std::f64::consts::PI * i as f64 / frame_size as f64).cos());
                    let ang = -2.0 * std::f64::consts::PI * (j * i) as f64 / frame_size as f64;
                    re += s * w * ang.cos();
                    im += s * w * ang.sin();
                }
                energy[pitch_class_of(f)] += re * re + im * im;
            }
            let maxe = energy.iter().cloned().fold(0.0, f64::max);
            for c in 0..12 {
                out[c * frames + frame] = if maxe > 0.0 { energy[c] / maxe } else { 0.0 };
            }
        }
        out
    }

    #[test]
    fn c4_g4_mixture_matches_dft_oracle_and_dominance() {
        let sr = 8192.0;
        let n = 3072;
        let c4 = sine(261.6256, sr, n);
        let g4 = sine(391.9954, sr, n);
        let mix: Vec<f64> = c4.iter().zip(&g4).map(|(a, b)| 0.5 * (a + b)).collect();
        let frame_size = 1024;
        let hop = 1024;
        let ch = chromagram_from_audio::<f64>(&mix, sr, frame_size, hop).unwrap();
        let oracle = naive_chroma(&mix, sr, frame_size, hop);
        for (i, (got, want)) in ch.values().iter().zip(&oracle).enumerate() {
            assert!((got - want).abs() < 1e-6, "entry {i}: {got} vs {want}");
        }
        // classes 0 (C) and 7 (G) dominate; everything else small
        for f in 0..ch.frames() {
            let col: Vec<f64> = (0..12).map(|c| ch.at(c, f)).collect();
            let max = col.iter().cloned().fold(0.0, f64::max);
            assert!(col[0].max(col[7]) == max);
            for (c, v) in col.iter().enumerate() {
                if c != 0 && c != 7 {
                    assert!(*v <= 0.2 * max, "class {c} = {v} too strong in {col:?}");
                }
            }
        }
    }

    #[test]
    fn noteroll_paths() {
        // one-hot roll passes through unchanged
        let mut roll = vec![0.0f64; 12 * 3];
        roll[2 * 3 + 1] = 1.0;
        let ch = chroma_from_noteroll(&roll, 3, 11.7).unwrap();
        assert_eq!(ch.values(), roll.as_slice());
        // all-zero stays zero
        let z = chroma_from_noteroll(&vec![0.0f64; 24], 2, 11.7).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        // frame max 0.5 renormalizes to 1
        let mut half = vec![0.0f64; 12];
        half[5] = 0.5;
        let ch = chroma_from_noteroll(&half, 1, 11.7).unwrap();
        assert_eq!(ch.at(5, 0), 1.0);
        // out-of-range is a contract error
        let bad = vec![1.5f64; 12];
        assert!(chroma_from_noteroll(&bad, 1, 11.7).is_err());
    }
}
