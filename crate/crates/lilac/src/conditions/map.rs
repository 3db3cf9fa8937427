//! Condition maps: the 12 x T feature maps fed to adaptor branches, their
//! resampling to the latent frame rate, thresholding, and CSV form.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use crate::numerics::Real;

use super::chroma::{Chromagram, PITCH_CLASSES};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionKind {
    Chroma,
    ChromaThresholded,
    Chord,
}

impl ConditionKind {
    pub fn label(&self) -> &'static str {
        match self {
            ConditionKind::Chroma => "chroma",
            ConditionKind::ChromaThresholded => "thresh",
            ConditionKind::Chord => "chord",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "chroma" => Ok(ConditionKind::Chroma),
            "thresh" => Ok(ConditionKind::ChromaThresholded),
            "chord" => Ok(ConditionKind::Chord),
            other => Err(Error::Config(format!(
                "unknown condition kind {other:?} (expected chroma|thresh|chord)"
            ))),
        }
    }
}

/// Time-aligned control feature map, always 12 channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionMap<R: Real> {
    kind: ConditionKind,
    values: Vec<R>, // 12 x frames
    frames: usize,
}

impl<R: Real> ConditionMap<R> {
    pub fn new(kind: ConditionKind, values: Vec<R>, frames: usize) -> Result<Self> {
        if values.len() != PITCH_CLASSES * frames {
            return Err(Error::Dimension(format!(
                "condition map wants {} values, got {}",
                PITCH_CLASSES * frames,
                values.len()
            )));
        }
        let m = ConditionMap { kind, values, frames };
        m.check_values()?;
        Ok(m)
    }

    fn check_values(&self) -> Result<()> {
        let ok = match self.kind {
            ConditionKind::Chroma => self.values.iter().all(|v| *v >= R::ZERO && *v <= R::ONE),
            ConditionKind::ChromaThresholded => {
                self.values.iter().all(|v| *v == R::ZERO || *v == R::ONE)
            }
            ConditionKind::Chord => self
                .values
                .iter()
                .all(|v| *v == R::ZERO || *v == R::ONE || *v == R::of(2.0)),
        };
        if !ok {
            return Err(Error::Contract(format!(
                "condition values violate the {} constraint",
                self.kind.label()
            )));
        }
        Ok(())
    }

    pub fn from_chromagram(ch: &Chromagram<R>) -> Self {
        ConditionMap {
            kind: ConditionKind::Chroma,
            values: ch.values().to_vec(),
            frames: ch.frames(),
        }
    }

    pub fn kind(&self) -> ConditionKind {
        self.kind
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn to_tensor(&self) -> Tensor<R> {
        Tensor::from_vec(&[PITCH_CLASSES, self.frames], self.values.clone())
            .expect("map shape is consistent")
    }

    /// Window-average resampling to `target_frames`: each target frame takes
    /// the exact average of its fractional source span, then the kind's value
    /// constraint is re-applied (clamp for chroma; snap to the nearest legal
    /// value for chord/thresholded maps).
    pub fn resample(&self, target_frames: usize) -> Result<ConditionMap<R>> {
        if target_frames == 0 {
            return Err(Error::Contract("resample to zero frames".into()));
        }
        if target_frames == self.frames {
            return Ok(self.clone());
        }
        let src = self.frames as f64;
        let dst = target_frames as f64;
        let mut values = vec![R::ZERO; PITCH_CLASSES * target_frames];
        for c in 0..PITCH_CLASSES {
            let row = &self.values[c * self.frames..(c + 1) * self.frames];
            for j in 0..target_frames {
                let lo = j as f64 * src / dst;
                let hi = (j + 1) as f64 * src / dst;
                let mut acc = 0.0;
                let mut i = lo.floor() as usize;
                while (i as f64) < hi && i < self.frames {
                    let seg_lo = lo.max(i as f64);
                    let seg_hi = hi.min((i + 1) as f64);
                    if seg_hi > seg_lo {
                        acc += row[i].to_f64() * (seg_hi - seg_lo);
                    }
                    i += 1;
                }
                values[c * target_frames + j] = R::of(acc / (hi - lo));
            }
        }
        match self.kind {
            ConditionKind::Chroma => {
                for v in values.iter_mut() {
                    *v = (*v).max(R::ZERO).min(R::ONE);
                }
            }
            ConditionKind::ChromaThresholded => {
                for v in values.iter_mut() {
                    *v = if v.to_f64() >= 0.5 { R::ONE } else { R::ZERO };
                }
            }
            ConditionKind::Chord => {
                for v in values.iter_mut() {
                    let r = v.to_f64().clamp(0.0, 2.0).round();
                    *v = R::of(r);
                }
            }
        }
        ConditionMap::new(self.kind, values, target_frames)
    }
}

/// 1 where the chromagram is at least `theta` (inclusive), else 0.
pub fn threshold_chroma<R: Real>(ch: &Chromagram<R>, theta: f64) -> Result<ConditionMap<R>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Contract(format!("threshold {theta} outside (0, 1]")));
    }
    let th = R::of(theta);
    let values = ch.values().iter().map(|v| if *v >= th { R::ONE } else { R::ZERO }).collect();
    ConditionMap::new(ConditionKind::ChromaThresholded, values, ch.frames())
}

/// Writes the CSV form: optional `# kind=.. rate=..` header, then one row per
/// frame with 12 comma-separated values.
pub fn write_condition_csv<R: Real>(
    path: &Path,
    map: &ConditionMap<R>,
    rate_hz: Option<f64>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    match rate_hz {
        Some(r) => writeln!(out, "# kind={} rate={}", map.kind().label(), r)?,
        None => writeln!(out, "# kind={}", map.kind().label())?,
    }
    for f in 0..map.frames() {
        let row: Vec<String> =
            (0..PITCH_CLASSES).map(|c| format!("{}", map.values()[c * map.frames() + f])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads the CSV form; a missing header defaults the kind to chroma.
pub fn read_condition_csv<R: Real>(path: &Path) -> Result<(ConditionMap<R>, Option<f64>)> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut kind = ConditionKind::Chroma;
    let mut rate = None;
    let mut rows: Vec<Vec<R>> = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            for tok in rest.split_whitespace() {
                if let Some(k) = tok.strip_prefix("kind=") {
                    kind = ConditionKind::parse(k)?;
                } else if let Some(r) = tok.strip_prefix("rate=") {
                    rate = Some(r.parse::<f64>().map_err(|_| {
                        Error::Format(format!("bad rate in condition csv: {r:?}"))
                    })?);
                }
            }
            continue;
        }
        let row: Vec<R> = trimmed
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map(R::of)
                    .map_err(|_| Error::Format(format!("bad value in condition csv: {v:?}")))
            })
            .collect::<Result<_>>()?;
        if row.len() != PITCH_CLASSES {
            return Err(Error::Format(format!(
                "condition csv row has {} values, expected {PITCH_CLASSES}",
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Format("condition csv has no data rows".into()));
    }
    let frames = rows.len();
    let mut values = vec![R::ZERO; PITCH_CLASSES * frames];
    for (f, row) in rows.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            values[c * frames + f] = *v;
        }
    }
    Ok((ConditionMap::new(kind, values, frames)?, rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::chroma::chroma_from_noteroll;

    fn chroma_map(vals: &[f64], frames: usize) -> ConditionMap<f64> {
        ConditionMap::new(ConditionKind::Chroma, vals.to_vec(), frames).unwrap()
    }

    #[test]
    fn resample_identity_and_constant() {
        let m = chroma_map(&[0.25; 12 * 4], 4);
        let same = m.resample(4).unwrap();
        assert_eq!(same.values(), m.values());
        let down = m.resample(2).unwrap();
        assert!(down.values().iter().all(|&v| (v - 0.25).abs() < 1e-12));
        let up = m.resample(8).unwrap();
        assert!(up.values().iter().all(|&v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn resample_halving_window_average() {
        // per channel [0,0,1,1] -> [0,1]
        let mut vals = vec![0.0; 12 * 4];
        for c in 0..12 {
            vals[c * 4 + 2] = 1.0;
            vals[c * 4 + 3] = 1.0;
        }
        let m = chroma_map(&vals, 4);
        let r = m.resample(2).unwrap();
        for c in 0..12 {
            assert_eq!(r.values()[c * 2], 0.0);
            assert_eq!(r.values()[c * 2 + 1], 1.0);
        }
    }

    #[test]
    fn resample_preserves_global_mean() {
        let vals: Vec<f64> = (0..12 * 10).map(|i| ((i * 37 % 100) as f64) / 100.0).collect();
        let m = chroma_map(&vals, 10);
        let mean_in: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        for &target in &[3usize, 5, 7, 20] {
            let r = m.resample(target).unwrap();
            let mean_out: f64 = r.values().iter().sum::<f64>() / r.values().len() as f64;
            assert!((mean_in - mean_out).abs() < 1e-12, "target {target}");
        }
    }

    #[test]
    fn chord_resample_snaps_to_legal_values() {
        let mut vals = vec![0.0; 12 * 4];
        // channel 0: [2,2,0,0] -> downsample to 2 -> [2, 0]
        vals[0] = 2.0;
        vals[1] = 2.0;
        let m = ConditionMap::new(ConditionKind::Chord, vals, 4).unwrap();
        let r = m.resample(2).unwrap();
        assert_eq!(r.values()[0], 2.0);
        assert_eq!(r.values()[1], 0.0);
        assert!(r.values().iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
    }

    #[test]
    fn threshold_boundary_inclusive() {
        let mut roll = vec![0.0f64; 12 * 1];
        roll[0] = 0.95;
        roll[1] = 0.90;
        roll[2] = 0.899;
        roll[3] = 1.0; // normalization anchor
        let ch = chroma_from_noteroll(&roll, 1, 11.7).unwrap();
        let th = threshold_chroma(&ch, 0.9).unwrap();
        assert_eq!(th.values()[0], 1.0); // 0.95 -> 1
        assert_eq!(th.values()[1], 1.0); // 0.90 -> 1 (inclusive)
        assert_eq!(th.values()[2], 0.0);
        assert_eq!(th.values()[4], 0.0); // 0.0 -> 0
        assert!(threshold_chroma(&ch, 0.0).is_err());
        assert!(threshold_chroma(&ch, 1.5).is_err());
    }

    #[test]
    fn threshold_is_idempotent() {
        let roll: Vec<f64> = (0..12 * 6).map(|i| ((i * 13 % 7) as f64) / 6.0).collect();
        let roll: Vec<f64> = roll.iter().map(|v| v.min(1.0)).collect();
        let ch = chroma_from_noteroll(&roll, 6, 11.7).unwrap();
        let once = threshold_chroma(&ch, 0.9).unwrap();
        // Thresholding the thresholded map (as a chromagram) changes nothing.
        let as_ch =
            crate::conditions::chroma::Chromagram::from_values(once.values().to_vec(), 6, 11.7)
                .unwrap();
        let twice = threshold_chroma(&as_ch, 0.9).unwrap();
        assert_eq!(once.values(), twice.values());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cond.csv");
        let vals: Vec<f64> = (0..12 * 5).map(|i| ((i % 4) as f64) / 4.0).collect();
        let m = chroma_map(&vals, 5);
        write_condition_csv(&path, &m, Some(11.7)).unwrap();
        let (back, rate) = read_condition_csv::<f64>(&path).unwrap();
        assert_eq!(back.kind(), ConditionKind::Chroma);
        assert_eq!(back.frames(), 5);
        assert_eq!(back.values(), m.values());
        assert_eq!(rate, Some(11.7));
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2,3\n").unwrap();
        assert!(matches!(read_condition_csv::<f64>(&path), Err(Error::Format(_))));
    }
}
