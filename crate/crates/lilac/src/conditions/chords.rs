//! Chord sequences and their 12-channel frame encoding: chord tones get 1,
//! the root gets 2, everything else 0; a no-chord frame is all zeros.

use crate::error::{Error, Result};
use crate::numerics::Real;

use super::map::{ConditionKind, ConditionMap};

/// One chord span starting at `start_frame` and lasting until the next event.
/// `root` is a pitch class (C = 0) or `None` for no chord.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChordEvent {
    pub start_frame: usize,
    pub root: Option<usize>,
    pub tones: Vec<usize>,
}

/// Sorted, non-overlapping chord events covering [0, frames).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChordSequence {
    pub events: Vec<ChordEvent>,
}

impl ChordSequence {
    pub fn validate(&self, frames: usize) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::Contract("chord sequence has no events".into()));
        }
        if self.events[0].start_frame != 0 {
            return Err(Error::Contract("chord events must start at frame 0".into()));
        }
        for pair in self.events.windows(2) {
            if pair[1].start_frame <= pair[0].start_frame {
                return Err(Error::Contract("chord events must be strictly sorted".into()));
            }
        }
        if self.events.last().map(|e| e.start_frame >= frames).unwrap_or(false) {
            return Err(Error::Contract("chord event starts past the end".into()));
        }
        for e in &self.events {
            if let Some(r) = e.root {
                if r >= 12 {
                    return Err(Error::Contract(format!("root pitch class {r} out of range")));
                }
            }
            for &t in &e.tones {
                if t >= 12 {
                    return Err(Error::Contract(format!("chord tone {t} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Pitch-class set sounding at a frame.
    pub fn tones_at(&self, frame: usize) -> &[usize] {
        let idx = match self.events.iter().rposition(|e| e.start_frame <= frame) {
            Some(i) => i,
            None => 0,
        };
        &self.events[idx].tones
    }

    /// Transposes every event by `k` semitones (pitch classes rotate).
    pub fn transposed(&self, k: usize) -> ChordSequence {
        ChordSequence {
            events: self
                .events
                .iter()
                .map(|e| ChordEvent {
                    start_frame: e.start_frame,
                    root: e.root.map(|r| (r + k) % 12),
                    tones: e.tones.iter().map(|t| (t + k) % 12).collect(),
                })
                .collect(),
        }
    }
}

/// Major/minor triad helper: degrees (0, 4, 7) or (0, 3, 7) above the root.
pub fn triad(root: usize, minor: bool) -> ChordEvent {
    let third = if minor { 3 } else { 4 };
    ChordEvent {
        start_frame: 0,
        root: Some(root % 12),
        tones: vec![root % 12, (root + third) % 12, (root + 7) % 12],
    }
}

/// Frame-wise chord map: per frame the root gets 2, other chord tones 1,
/// remaining classes 0; no-chord frames are all-zero columns.
pub fn encode_chords<R: Real>(seq: &ChordSequence, frames: usize) -> Result<ConditionMap<R>> {
    seq.validate(frames)?;
    let mut values = vec![R::ZERO; 12 * frames];
    for (i, e) in seq.events.iter().enumerate() {
        let end = seq.events.get(i + 1).map(|n| n.start_frame).unwrap_or(frames);
        for f in e.start_frame..end {
            for &t in &e.tones {
                values[t * frames + f] = R::ONE;
            }
            if let Some(r) = e.root {
                values[r * frames + f] = R::of(2.0);
            }
        }
    }
    ConditionMap::new(ConditionKind::Chord, values, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column<R: Real>(map: &ConditionMap<R>, frame: usize) -> Vec<f64> {
        (0..12).map(|c| map.values()[c * map.frames() + frame].to_f64()).collect()
    }

    #[test]
    fn c_major_column() {
        let seq = ChordSequence { events: vec![triad(0, false)] };
        let m = encode_chords::<f64>(&seq, 2).unwrap();
        assert_eq!(column(&m, 0), vec![2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn a_minor_column() {
        let seq = ChordSequence { events: vec![triad(9, true)] };
        let m = encode_chords::<f64>(&seq, 1).unwrap();
        assert_eq!(column(&m, 0), vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn no_chord_is_all_zero() {
        let seq = ChordSequence {
            events: vec![ChordEvent { start_frame: 0, root: None, tones: vec![] }],
        };
        let m = encode_chords::<f64>(&seq, 3).unwrap();
        assert!(m.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uncovered_frames_or_bad_events_error() {
        let seq = ChordSequence {
            events: vec![ChordEvent { start_frame: 2, root: Some(0), tones: vec![0] }],
        };
        assert!(encode_chords::<f64>(&seq, 4).is_err());
        let seq = ChordSequence { events: vec![] };
        assert!(encode_chords::<f64>(&seq, 4).is_err());
    }

    #[test]
    fn transposition_rotates_encoding() {
        let seq = ChordSequence { events: vec![triad(0, false)] };
        let base = encode_chords::<f64>(&seq, 1).unwrap();
        for k in 0..12 {
            let rotated = encode_chords::<f64>(&seq.transposed(k), 1).unwrap();
            for c in 0..12 {
                assert_eq!(rotated.values()[(c + k) % 12], base.values()[c], "k={k} c={c}");
            }
        }
    }

    #[test]
    fn exactly_one_root_per_chord_frame() {
        let seq = ChordSequence {
            events: vec![
                ChordEvent { start_frame: 0, ..triad(3, true) },
                ChordEvent { start_frame: 2, ..triad(8, false) },
            ],
        };
        let m = encode_chords::<f64>(&seq, 4).unwrap();
        for f in 0..4 {
            let col = column(&m, f);
            assert_eq!(col.iter().filter(|&&v| v == 2.0).count(), 1);
            assert!(col.iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
        }
    }
}
