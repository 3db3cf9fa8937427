//! Condition signals and the adherence metric: chromagrams, chord encodings,
//! thresholding, frame-rate resampling, cMSE, and the condition CSV format.

pub mod chroma;
pub mod chords;
pub mod map;
pub mod metric;

pub use chroma::{chroma_from_noteroll, chromagram_from_audio, pitch_class_of, Chromagram, PITCH_CLASSES};
pub use chords::{encode_chords, triad, ChordEvent, ChordSequence};
pub use map::{read_condition_csv, threshold_chroma, write_condition_csv, ConditionKind, ConditionMap};
pub use metric::cmse;
