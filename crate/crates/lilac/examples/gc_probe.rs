use lilac::adaptors::AdaptorVariant;
use lilac::conditions::ConditionKind;
use lilac::experiments::*;
use lilac::trainer::{train_adaptor, train_backbone};

fn main() {
    let t0 = std::time::Instant::now();
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1e-3);

    let mut cfg = ExperimentConfig::default();
    cfg.train.base_lr = lr;
    cfg.eval.samples = 40;
    cfg.validate().unwrap();
    let seed = 42;

    let total = cfg.data.n_samples + cfg.eval.samples;
    let mut all = generate_dataset::<f32>(&cfg.data, total, seed).unwrap();
    let test = all.split_off(cfg.data.n_samples);
    let codec = LatentCodec::new(16, 3, cfg.data.texture_sigma, seed).unwrap();

    let items = to_train_items(&all, &codec, None).unwrap();
    let (backbone, log) = train_backbone(&cfg.backbone, &cfg.train, &items, seed).unwrap();
    println!("[{:?}] backbone: loss {:.4} -> {:.4}", t0.elapsed(), log.mean_loss_first(100), log.mean_loss_last(100));

    let chroma_items = to_train_items(&all, &codec, Some(ConditionKind::Chroma)).unwrap();
    let (h, hlog) = train_adaptor(&backbone, AdaptorVariant::h(), 12, &cfg.train, &chroma_items, seed + 1).unwrap();
    println!("[{:?}] H adaptor: loss {:.4} -> {:.4}", t0.elapsed(), hlog.mean_loss_first(100), hlog.mean_loss_last(100));

    let entries = vec![("h".to_string(), &h, ConditionKind::Chroma)];
    let report = eval_adherence(&backbone, &entries, &test, &codec, &cfg.eval, "pilot", seed).unwrap();
    print!("{}", report.to_csv_string());

    for setting in [ConflictSetting::Aligned, ConflictSetting::Misaligned, ConflictSetting::None] {
        let r = eval_conflict(&backbone, Some(("h", &h, ConditionKind::Chroma)), &test, &codec, &cfg.eval, setting, "pilot", seed).unwrap();
        print!("{}", r.to_csv_string());
        let rb = eval_conflict(&backbone, None, &test, &codec, &cfg.eval, setting, "pilot", seed).unwrap();
        print!("baseline: {}", rb.to_csv_string());
    }
    println!("total {:?}", t0.elapsed());
}
