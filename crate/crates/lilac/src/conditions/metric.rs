//! Adherence metric: mean squared error between chromagrams.

use crate::error::{Error, Result};
use crate::numerics::Real;

use super::chroma::Chromagram;

/// Mean over all 12*T entries of squared differences. Resample first if the
/// frame counts differ; mismatched shapes are a contract error.
pub fn cmse<R: Real>(a: &Chromagram<R>, b: &Chromagram<R>) -> Result<f64> {
    if a.frames() != b.frames() {
        return Err(Error::Contract(format!(
            "cmse: {} vs {} frames (resample first)",
            a.frames(),
            b.frames()
        )));
    }
    let n = a.values().len();
    let mut acc = 0.0f64;
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = x.to_f64() - y.to_f64();
        acc += d * d;
    }
    Ok(acc / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngKey;

    fn chroma(vals: Vec<f64>, frames: usize) -> Chromagram<f64> {
        Chromagram::from_values(vals, frames, 11.7).unwrap()
    }

    #[test]
    fn identical_is_zero_and_extremes_are_one() {
        let a = chroma(vec![0.5; 12 * 3], 3);
        assert_eq!(cmse(&a, &a).unwrap(), 0.0);
        let ones = chroma(vec![1.0; 12 * 2], 2);
        let zeros = chroma(vec![0.0; 12 * 2], 2);
        assert_eq!(cmse(&ones, &zeros).unwrap(), 1.0);
    }

    #[test]
    fn random_pair_matches_scalar_loop_oracle() {
        let mut stream = RngKey::root(42).stream();
        let frames = 7;
        let av: Vec<f64> = (0..12 * frames).map(|_| stream.uniform()).collect();
        let bv: Vec<f64> = (0..12 * frames).map(|_| stream.uniform()).collect();
        let a = chroma(av.clone(), frames);
        let b = chroma(bv.clone(), frames);
        // scalar accumulation oracle
        let mut acc = 0.0;
        let mut count = 0usize;
        for c in 0..12 {
            for f in 0..frames {
                let d = av[c * frames + f] - bv[c * frames + f];
                acc += d * d;
                count += 1;
            }
        }
        let oracle = acc / count as f64;
        assert!((cmse(&a, &b).unwrap() - oracle).abs() <= 1e-9);
    }

    #[test]
    fn symmetric_nonnegative_bounded() {
        let mut stream = RngKey::root(43).stream();
        for _ in 0..20 {
            let frames = 1 + stream.below(6);
            let av: Vec<f64> = (0..12 * frames).map(|_| stream.uniform()).collect();
            let bv: Vec<f64> = (0..12 * frames).map(|_| stream.uniform()).collect();
            let a = chroma(av, frames);
            let b = chroma(bv, frames);
            let ab = cmse(&a, &b).unwrap();
            let ba = cmse(&b, &a).unwrap();
            assert_eq!(ab, ba);
            assert!(ab >= 0.0 && ab <= 1.0);
        }
    }

    #[test]
    fn shape_mismatch_is_contract_error() {
        let a = chroma(vec![0.0; 12 * 2], 2);
        let b = chroma(vec![0.0; 12 * 3], 3);
        assert!(matches!(cmse(&a, &b), Err(Error::Contract(_))));
    }
}
