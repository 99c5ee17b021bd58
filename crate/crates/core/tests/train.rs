use std::fs;

use mlsm_core::data::{DatasetManifest, DatasetSpec, PairedSample, Split};
use mlsm_core::nn::NamedTensor;
use mlsm_core::train::*;
use mlsm_core::Error;
use proptest::prelude::*;

fn corpus(n: usize, size: usize, seed: u64) -> Vec<PairedSample> {
    let spec = DatasetSpec { seed, width: size, height: size, train: n, val: 0, test: 0 };
    DatasetManifest::plan(&spec).synthesize(Split::Train).unwrap()
}

/// 2 epochs over 8 samples with 16-pixel crops at tiny widths.
fn smoke() -> TrainConfig {
    TrainConfig { base_channels: 4, crop: 16, batch: 4, epochs_vae: 2, epochs_mapping: 2, ..TrainConfig::desk() }
}

fn one_tensor(name: &str) -> Checkpoint {
    Checkpoint {
        version: VERSION_PLAIN,
        stage: "test".into(),
        step: 7,
        config: "k=3\n".into(),
        records: vec![NamedTensor { name: name.into(), dims: vec![2, 2], data: vec![1.0, -2.5, 3.25, 0.0] }],
    }
}

#[test]
fn checkpoint_size_arithmetic() {
    let c = one_tensor("w");
    let text = "stage=test\nstep=7\nk=3\n".len();
    assert_eq!(c.to_bytes().len(), 4 + 4 + 4 + (4 + 1 + 4 + 8 + 1 + 16) + (4 + text));
    let v2 = Checkpoint { version: VERSION_CHECKSUMMED, ..c };
    assert_eq!(v2.to_bytes().len(), 4 + 4 + 4 + (4 + 1 + 4 + 8 + 1 + 16) + (4 + text) + 32);
}

#[test]
fn checkpoint_save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for version in [VERSION_PLAIN, VERSION_CHECKSUMMED] {
        let c = Checkpoint { version, ..one_tensor("enc0.stem.conv.weight") };
        let path = dir.path().join(format!("v{}.ckpt", version));
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), fs::read(&path).unwrap());
        assert!(!dir.path().join(format!("v{}.ckpt.tmp", version)).exists());
    }
}

#[test]
fn payload_corruption() {
    let plain = one_tensor("w").to_bytes();
    // payload starts after header (12) + name len, name, rank, dims, dtype (4+1+4+8+1)
    let payload = 12 + 18;
    for element in 0..4 {
        let mut bytes = plain.clone();
        bytes[payload + 4 * element + 1] ^= 0x40;
        let got = Checkpoint::from_bytes(&bytes, "corrupt").unwrap();
        let (a, b) = (&got.records[0].data, &one_tensor("w").records[0].data);
        let differing: Vec<usize> = (0..4).filter(|&i| a[i].to_bits() != b[i].to_bits()).collect();
        assert_eq!(differing, vec![element]);
    }
    let mut sealed = Checkpoint { version: VERSION_CHECKSUMMED, ..one_tensor("w") }.to_bytes();
    sealed[payload + 2] ^= 1;
    assert!(matches!(Checkpoint::from_bytes(&sealed, "sealed"), Err(Error::Parse { .. })));
}

#[test]
fn malformed_checkpoints_name_the_failure() {
    let good = one_tensor("weights").to_bytes();
    let mut bad_magic = good.clone();
    bad_magic[0] = b'X';
    assert!(format!("{}", Checkpoint::from_bytes(&bad_magic, "f").unwrap_err()).contains("magic"));
    let mut bad_version = good.clone();
    bad_version[4] = 9;
    assert!(format!("{}", Checkpoint::from_bytes(&bad_version, "f").unwrap_err()).contains("version 9"));
    let truncated = &good[..good.len() - 30];
    let msg = format!("{}", Checkpoint::from_bytes(truncated, "f").unwrap_err());
    assert!(msg.contains("record 0 'weights'") && msg.contains("truncated"), "{}", msg);
}

#[test]
fn stage1_smoke_run() {
    let samples = corpus(8, 32, 5);
    let cfg = smoke();
    let dir = tempfile::tempdir().unwrap();
    let s = train_stage1(&cfg, &samples, Some(dir.path())).unwrap();
    assert_eq!(s.steps, 4);
    for (log, file) in [(&s.dark_log, "stage1_dark.csv"), (&s.normal_log, "stage1_normal.csv")] {
        let text = fs::read_to_string(dir.path().join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), "step,lr,total,l1,perceptual,gan,kl0,kl1,kl2");
        assert_eq!(text.lines().count() - 1, s.steps);
        assert_eq!(log.rows.len(), s.steps);
        for (_, row) in &log.rows {
            let parts: f64 = row[2..].iter().sum();
            assert!((row[1] - parts).abs() < 1e-6, "total {} vs components {}", row[1], parts);
            assert!(row[5..].iter().all(|kl| kl.is_finite() && *kl >= 0.0));
        }
        assert_eq!(log.rows[0].1[0], cfg.lr);
    }
    for stage in ["vae-dark", "vae-normal", "disc-dark", "disc-normal"] {
        let (ckpt, echoed) = open_checkpoint(dir.path(), stage).unwrap();
        assert_eq!(echoed, cfg);
        assert_eq!(ckpt.step, 4);
        assert!(ckpt.records.iter().any(|r| r.name.starts_with("adam/m/")));
    }
}

#[test]
fn short_training_reduces_reconstruction_error() {
    let samples = corpus(8, 32, 5);
    let cfg = TrainConfig { base_channels: 8, epochs_vae: 10, ..smoke() };
    let s = train_stage1(&cfg, &samples, None).unwrap();
    for d in 0..2 {
        assert!(s.final_l1[d] < s.initial_l1[d], "domain {}: {} -> {}", d, s.initial_l1[d], s.final_l1[d]);
    }
}

#[test]
fn stage1_is_deterministic() {
    let samples = corpus(8, 32, 6);
    let cfg = TrainConfig { epochs_vae: 1, ..smoke() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train_stage1(&cfg, &samples, Some(a.path())).unwrap();
    train_stage1(&cfg, &samples, Some(b.path())).unwrap();
    for f in [
        "stage1_dark.csv",
        "stage1_normal.csv",
        "vae_dark.ckpt",
        "vae_normal.ckpt",
        "disc_dark.ckpt",
        "disc_normal.ckpt",
    ] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{}", f);
    }
}

#[test]
fn exploding_updates_abort_numerically() {
    let samples = corpus(8, 32, 7);
    let cfg = TrainConfig { lr: 1e30, clip_norm: 1e30, ..smoke() };
    assert!(matches!(train_stage1(&cfg, &samples, None), Err(Error::Numerical(_))));
}

#[test]
fn stage2_freezes_vaes_and_logs_levels() {
    let samples = corpus(8, 32, 8);
    let cfg = smoke();
    let dir = tempfile::tempdir().unwrap();
    let s1 = train_stage1(&cfg, &samples, Some(dir.path())).unwrap();
    let (dark, normal) = load_vaes(dir.path(), &cfg).unwrap();
    assert_eq!(dark.params.digest(), s1.dark.vae.params.digest());
    let out = dir.path().join("mapping");
    let s2 = train_stage2(&cfg, &samples, &dark, &normal, Some(&out)).unwrap();
    assert_eq!(s2.vae_digest_before, s2.vae_digest_after);
    assert_eq!(s2.vae_digest_after[1], s1.normal.vae.params.digest());
    let text = fs::read_to_string(out.join("stage2.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,lr,total,lat0,lat1,lat2,perceptual,gan");
    assert_eq!(text.lines().count() - 1, s2.steps);
    for (_, row) in &s2.log.rows {
        assert!((row[1] - row[2..].iter().sum::<f64>()).abs() < 1e-6);
    }
    let models = TrainedModels::load(dir.path(), &out).unwrap();
    assert_eq!(models.mapping.params.digest(), s2.mapping.params.digest());
}

#[test]
fn inactive_levels_keep_a_latent_baseline() {
    let samples = corpus(8, 32, 9);
    let cfg = TrainConfig { epochs_mapping: 1, ..smoke() }.with_top_levels(1).unwrap();
    let s1 = train_stage1(&TrainConfig { epochs_vae: 1, ..cfg.clone() }, &samples, None).unwrap();
    let s2 = train_stage2(&cfg, &samples, &s1.dark.vae, &s1.normal.vae, None).unwrap();
    assert!(!s2.mapping.is_active(0) && !s2.mapping.is_active(1));
    let lat0 = s2.log.column("lat0").unwrap();
    assert!(lat0.iter().all(|&v| v > 0.0));
}

#[test]
fn stage2_rejects_mismatched_checkpoints() {
    let samples = corpus(8, 32, 10);
    let cfg = TrainConfig { epochs_vae: 1, ..smoke() };
    let dir = tempfile::tempdir().unwrap();
    train_stage1(&cfg, &samples, Some(dir.path())).unwrap();
    let wider = TrainConfig { base_channels: 8, ..cfg.clone() };
    assert!(matches!(load_vaes(dir.path(), &wider), Err(Error::Usage(_))));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(load_vaes(empty.path(), &cfg), Err(Error::Usage(_))));
    let (dark, normal) = load_vaes(dir.path(), &cfg).unwrap();
    assert!(matches!(train_stage2(&wider, &samples, &dark, &normal, None), Err(Error::Usage(_))));
}

#[test]
fn ablation_covers_every_level_count() {
    let samples = corpus(8, 32, 11);
    let cfg = TrainConfig { epochs_vae: 1, epochs_mapping: 1, ..smoke() };
    let s1 = train_stage1(&cfg, &samples, None).unwrap();
    let rows = ablate_levels(&cfg, &samples, &samples[..2], &s1.dark.vae, &s1.normal.vae, 2, None).unwrap();
    let keys: Vec<(u64, usize)> = rows.iter().map(|r| (r.rep, r.levels)).collect();
    assert_eq!(keys, vec![(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3)]);
    assert!(rows.iter().all(|r| r.enhanced.mean_psnr.is_finite() && r.enhanced.count == 2));
    assert_eq!(full_beats_single(&rows, 3).1, 2);
}

proptest! {
    #[test]
    fn schedule_is_nonincreasing_and_ends_at_zero(horizon in 1usize..10_000, a in 0usize..20_000, b in 0usize..20_000) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(lr_at(hi, 2e-4, horizon) <= lr_at(lo, 2e-4, horizon));
        prop_assert_eq!(lr_at(horizon, 2e-4, horizon), 0.0);
    }

    #[test]
    fn checkpoint_round_trip(names in prop::collection::vec("[a-z./]{1,12}", 1..4), seed in 0u32..1000) {
        let records = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let dims = vec![i + 1, 2];
                let data = (0..2 * (i + 1)).map(|j| (seed as f32) * 0.37 - j as f32).collect();
                NamedTensor { name: n.clone(), dims, data }
            })
            .collect();
        let c = Checkpoint { version: VERSION_CHECKSUMMED, stage: "p".into(), step: seed as u64, config: String::new(), records };
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes, "p").unwrap();
        prop_assert_eq!(back.to_bytes(), bytes);
    }
}
