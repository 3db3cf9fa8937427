//! Evaluation harnesses: condition adherence, conflictive conditioning, and
//! the parameter census report.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::adaptors::{variant_census, AdaptorBranch, AdaptorVariant};
use crate::backbone::{Backbone, StyleCond};
use crate::conditions::{
    chroma_from_noteroll, cmse, encode_chords, threshold_chroma, Chromagram, ConditionKind,
    ConditionMap,
};
use crate::error::{Error, Result};
use crate::numerics::rng::RngKey;
use crate::numerics::Real;
use crate::trainer::TrainItem;

use super::codec::LatentCodec;
use super::configfile::EvalConfig;
use super::data::SyntheticSample;
use super::sampling::{sample, GenConditions};

/// One report line. Settings: aligned / misaligned / none.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub variant: String,
    pub params: usize,
    pub setting: String,
    pub cmse: f64,
    pub cs: f64,
}

/// Report plus the provenance recorded in its header.
#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub seed: u64,
    pub config_digest: String,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = format!("# seed={} config_digest={}\n", self.seed, self.config_digest);
        out.push_str("variant,params,setting,cmse,cs\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.variant, r.params, r.setting, r.cmse, r.cs));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn row(&self, variant: &str, setting: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.variant == variant && r.setting == setting)
    }
}

/// Condition map of a sample under the given kind.
pub fn condition_map_for<R: Real>(
    sample: &SyntheticSample<R>,
    kind: ConditionKind,
) -> Result<ConditionMap<R>> {
    let frames = sample.note_roll.shape()[1];
    let chroma = || {
        chroma_from_noteroll(
            sample.note_roll.data(),
            frames,
            11.7,
        )
    };
    match kind {
        ConditionKind::Chroma => Ok(ConditionMap::from_chromagram(&chroma()?)),
        ConditionKind::ChromaThresholded => threshold_chroma(&chroma()?, 0.9),
        ConditionKind::Chord => encode_chords(&sample.chord_truth, frames),
    }
}

/// Encodes samples into training items; `kind` controls the condition map
/// (None for bare-backbone training).
pub fn to_train_items<R: Real>(
    samples: &[SyntheticSample<R>],
    codec: &LatentCodec,
    kind: Option<ConditionKind>,
) -> Result<Vec<TrainItem<R>>> {
    samples
        .iter()
        .map(|s| {
            Ok(TrainItem {
                latent: codec.encode_latent(s)?,
                style: s.style_id,
                context: codec.encode_context(&s.context_roll)?,
                condition: match kind {
                    Some(k) => Some(condition_map_for(s, k)?.to_tensor()),
                    None => None,
                },
            })
        })
        .collect()
}

/// Harness sanity floor: cMSE between a sample's condition chromagram and the
/// decode of its own latent (no generation). Near zero by codec invertibility.
pub fn decode_floor<R: Real>(codec: &LatentCodec, sample: &SyntheticSample<R>) -> Result<f64> {
    let frames = sample.note_roll.shape()[1];
    let z = codec.encode_latent(sample)?;
    let probe = codec.decode_probe(&z)?;
    let decoded = Chromagram::<f64>::from_values(probe.chroma.clone(), frames, 11.7)?;
    cmse(&target_chromagram(sample)?, &decoded)
}

struct Outcome {
    cmse: f64,
    cs: f64,
}

/// Generates one latent under the given conditions and scores it against the
/// (f64) target chromagram and target style.
#[allow(clippy::too_many_arguments)]
fn score_generation<R: Real>(
    backbone: &Backbone<R>,
    branch: Option<&AdaptorBranch<R>>,
    conds: GenConditions<'_, R>,
    t: usize,
    eval: &EvalConfig,
    key: RngKey,
    codec: &LatentCodec,
    cmse_target: &Chromagram<f64>,
    cs_target_style: usize,
) -> Result<Outcome> {
    let z = sample(backbone, branch, conds, t, eval.sampler(), eval.cfg_weight, key)?;
    let probe = codec.decode_probe(&z)?;
    let decoded = Chromagram::from_values(probe.chroma.clone(), t, 11.7)?;
    Ok(Outcome { cmse: cmse(cmse_target, &decoded)?, cs: probe.style_cosine(cs_target_style) })
}

fn target_chromagram<R: Real>(sample: &SyntheticSample<R>) -> Result<Chromagram<f64>> {
    let frames = sample.note_roll.shape()[1];
    let vals: Vec<f64> = sample.note_roll.data().iter().map(|v| v.to_f64()).collect();
    chroma_from_noteroll(&vals, frames, 11.7)
}

fn mean_rows(outcomes: Vec<Outcome>) -> (f64, f64) {
    let n = outcomes.len() as f64;
    let mut mc = 0.0;
    let mut ms = 0.0;
    for o in &outcomes {
        mc += o.cmse;
        ms += o.cs;
    }
    (mc / n, ms / n)
}

/// Adherence evaluation: each branch is conditioned on the test sample's own
/// condition map and style; the baseline row generates fully unconditioned.
pub fn eval_adherence<R: Real>(
    backbone: &Backbone<R>,
    branches: &[(String, &AdaptorBranch<R>, ConditionKind)],
    testset: &[SyntheticSample<R>],
    codec: &LatentCodec,
    eval: &EvalConfig,
    config_digest: &str,
    seed: u64,
) -> Result<EvalReport> {
    if testset.is_empty() {
        return Err(Error::Contract("adherence evaluation needs test samples".into()));
    }
    let t = testset[0].note_roll.shape()[1];
    let key = RngKey::root(seed).child(30);
    let mut report =
        EvalReport { seed, config_digest: config_digest.to_string(), rows: Vec::new() };

    // Unconditioned baseline.
    let outcomes: Result<Vec<Outcome>> = testset
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            score_generation(
                backbone,
                None,
                GenConditions::unconditioned(),
                t,
                eval,
                key.child(0).child(i as u64),
                codec,
                &target_chromagram(s)?,
                s.style_id,
            )
        })
        .collect();
    let (mc, ms) = mean_rows(outcomes?);
    report.rows.push(EvalRow {
        variant: "unconditioned".into(),
        params: backbone.total_params(),
        setting: "none".into(),
        cmse: mc,
        cs: ms,
    });

    for (row_idx, (label, branch, kind)) in branches.iter().enumerate() {
        let outcomes: Result<Vec<Outcome>> = testset
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let c = condition_map_for(s, *kind)?.to_tensor();
                score_generation(
                    backbone,
                    Some(branch),
                    GenConditions {
                        style: StyleCond::Style(s.style_id),
                        context: None,
                        condition: Some(&c),
                    },
                    t,
                    eval,
                    key.child(1 + row_idx as u64).child(i as u64),
                    codec,
                    &target_chromagram(s)?,
                    s.style_id,
                )
            })
            .collect();
        let (mc, ms) = mean_rows(outcomes?);
        report.rows.push(EvalRow {
            variant: label.clone(),
            params: branch.total_params(),
            setting: "aligned".into(),
            cmse: mc,
            cs: ms,
        });
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConflictSetting {
    Aligned,
    Misaligned,
    None,
}

impl ConflictSetting {
    pub fn label(&self) -> &'static str {
        match self {
            ConflictSetting::Aligned => "aligned",
            ConflictSetting::Misaligned => "misaligned",
            ConflictSetting::None => "none",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "aligned" => Ok(ConflictSetting::Aligned),
            "misaligned" => Ok(ConflictSetting::Misaligned),
            "none" => Ok(ConflictSetting::None),
            other => Err(Error::Config(format!(
                "unknown setting {other:?} (expected aligned|misaligned|none)"
            ))),
        }
    }
}

/// Conflict evaluation for one setting. The condition map always comes from
/// sample i; the style embedding comes from i (aligned), from the rotation
/// partner i+1 (misaligned; a derangement for n >= 2), or is dropped (none).
/// The style cosine is measured against the embedding source in the aligned
/// and misaligned settings and against the condition source in the none
/// setting; cMSE is always against the condition source's chromagram.
#[allow(clippy::too_many_arguments)]
pub fn eval_conflict<R: Real>(
    backbone: &Backbone<R>,
    branch: Option<(&str, &AdaptorBranch<R>, ConditionKind)>,
    testset: &[SyntheticSample<R>],
    codec: &LatentCodec,
    eval: &EvalConfig,
    setting: ConflictSetting,
    config_digest: &str,
    seed: u64,
) -> Result<EvalReport> {
    if testset.len() < 2 {
        return Err(Error::Contract("conflict evaluation needs at least 2 samples".into()));
    }
    let t = testset[0].note_roll.shape()[1];
    let n = testset.len();
    let key = RngKey::root(seed).child(31).child(match setting {
        ConflictSetting::Aligned => 0,
        ConflictSetting::Misaligned => 1,
        ConflictSetting::None => 2,
    });
    let outcomes: Result<Vec<Outcome>> = testset
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let partner = (i + 1) % n; // rotation derangement
            debug_assert_ne!(partner, i);
            let (style, cs_target) = match setting {
                ConflictSetting::Aligned => (StyleCond::Style(s.style_id), s.style_id),
                ConflictSetting::Misaligned => {
                    (StyleCond::Style(testset[partner].style_id), testset[partner].style_id)
                }
                ConflictSetting::None => (StyleCond::Null, s.style_id),
            };
            let c_tensor = match &branch {
                Some((_, _, kind)) => Some(condition_map_for(s, *kind)?.to_tensor()),
                None => None,
            };
            score_generation(
                backbone,
                branch.as_ref().map(|(_, b, _)| *b),
                GenConditions { style, context: None, condition: c_tensor.as_ref() },
                t,
                eval,
                key.child(i as u64),
                codec,
                &target_chromagram(s)?,
                cs_target,
            )
        })
        .collect();
    let (mc, ms) = mean_rows(outcomes?);
    let (variant, params) = match &branch {
        Some((label, b, _)) => (label.to_string(), b.total_params()),
        None => ("unconditioned".to_string(), backbone.total_params()),
    };
    Ok(EvalReport {
        seed,
        config_digest: config_digest.to_string(),
        rows: vec![EvalRow { variant, params, setting: setting.label().into(), cmse: mc, cs: ms }],
    })
}

/// Census CSV: per-component counts, totals, and the size ratio to the
/// clone-branch baseline, for each requested variant.
pub fn report_params<R: Real>(
    backbone: &Backbone<R>,
    variants: &[AdaptorVariant],
    cond_channels: usize,
    config_digest: &str,
) -> Result<String> {
    let mut out = format!("# config_digest={config_digest}\n");
    out.push_str("variant,component,count\n");
    for v in variants {
        let (census, ratio) = variant_census(backbone, *v, cond_channels)?;
        let label = v.label();
        for (component, count) in &census.components {
            out.push_str(&format!("{label},{component},{count}\n"));
        }
        out.push_str(&format!("{label},total,{}\n", census.total));
        out.push_str(&format!("{label},ratio_vs_controlnet,{ratio}\n"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::data::{generate_dataset, DataConfig};

    #[test]
    fn decode_floor_is_tiny() {
        let cfg = DataConfig { t_latent: 16, ..Default::default() };
        let samples = generate_dataset::<f32>(&cfg, 5, 3).unwrap();
        let codec = LatentCodec::new(16, 3, 0.05, 7).unwrap();
        for s in &samples {
            let floor = decode_floor(&codec, s).unwrap();
            assert!(floor <= 1e-6, "floor {floor}");
        }
    }

    #[test]
    fn condition_maps_match_kinds() {
        let cfg = DataConfig { t_latent: 8, ..Default::default() };
        let s = &generate_dataset::<f64>(&cfg, 1, 5).unwrap()[0];
        let ch = condition_map_for(s, ConditionKind::Chroma).unwrap();
        assert_eq!(ch.kind(), ConditionKind::Chroma);
        let th = condition_map_for(s, ConditionKind::ChromaThresholded).unwrap();
        assert!(th.values().iter().all(|&v| v == 0.0 || v == 1.0));
        let cd = condition_map_for(s, ConditionKind::Chord).unwrap();
        assert!(cd.values().iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
    }

    #[test]
    fn report_csv_schema() {
        let report = EvalReport {
            seed: 42,
            config_digest: "abc".into(),
            rows: vec![EvalRow {
                variant: "h".into(),
                params: 100,
                setting: "aligned".into(),
                cmse: 0.5,
                cs: 0.25,
            }],
        };
        let text = report.to_csv_string();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# seed=42 config_digest=abc");
        assert_eq!(lines.next().unwrap(), "variant,params,setting,cmse,cs");
        assert_eq!(lines.next().unwrap(), "h,100,aligned,0.5,0.25");
    }

    #[test]
    fn conflict_needs_two_samples() {
        let cfg = DataConfig { t_latent: 8, ..Default::default() };
        let samples = generate_dataset::<f32>(&cfg, 1, 5).unwrap();
        let codec = LatentCodec::new(16, 3, 0.05, 7).unwrap();
        let backbone = Backbone::<f32>::new(crate::backbone::BackboneConfig::default(), 1).unwrap();
        let err = eval_conflict(
            &backbone,
            None,
            &samples,
            &codec,
            &EvalConfig::default(),
            ConflictSetting::Misaligned,
            "d",
            1,
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
