use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mlsm_core::codec::compress;
use mlsm_core::data::{generate_dataset, load_split, DatasetSpec, Split, MANIFEST_FILE};
use mlsm_core::gradcheck::{full_suite, GRADCHECK_TOLERANCE};
use mlsm_core::mapping::enhance_image;
use mlsm_core::metrics::{evaluate_pair, summarize, MetricReport};
use mlsm_core::ppm::{load_ppm, save_ppm};
use mlsm_core::train::{
    ablate_levels, evaluate_enhancement, full_beats_single, latent_image_gap, load_vaes, open_checkpoint,
    summarize_evals, train_stage1, train_stage2, LossLog, TrainConfig, TrainedModels,
};
use mlsm_core::{Error, Result};

use crate::report::{dat, io, write, RunReport};
use crate::{
    AblateArgs, Cli, Command, CompressArgs, EnhanceArgs, EvaluateArgs, SynthArgs, TrainMappingArgs, TrainVaeArgs,
};

pub fn run(cli: &Cli) -> Result<u8> {
    let start = Instant::now();
    let (name, mut report, code) = match &cli.command {
        Command::SynthData(a) => ("synth-data", synth(cli, a)?, 0),
        Command::Compress(a) => ("compress", compress_cmd(cli, a)?, 0),
        Command::TrainVae(a) => ("train-vae", train_vae(cli, a)?, 0),
        Command::TrainMapping(a) => ("train-mapping", train_mapping(cli, a)?, 0),
        Command::Enhance(a) => ("enhance", enhance(cli, a)?, 0),
        Command::Evaluate(a) => ("evaluate", evaluate(cli, a)?, 0),
        Command::Gradcheck => gradcheck(cli)?,
        Command::AblateLevels(a) => ("ablate-levels", ablate(cli, a)?, 0),
    };
    report.command = name.into();
    if !cli.shared.deterministic {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    if let Some(out) = &cli.shared.out {
        report.write(out)?;
    }
    Ok(code)
}

fn required_out(cli: &Cli, command: &str) -> Result<PathBuf> {
    cli.shared.out.clone().ok_or_else(|| Error::Usage(format!("{} needs --out DIR", command)))
}

fn manifest_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(MANIFEST_FILE)
    } else {
        p.to_path_buf()
    }
}

/// `--config` file (or `base`), then `--seed`.
fn config(cli: &Cli, base: Option<TrainConfig>) -> Result<TrainConfig> {
    let mut cfg = match &cli.shared.config {
        Some(p) => TrainConfig::load(p)?,
        None => base.unwrap_or_default(),
    };
    if let Some(s) = cli.shared.seed {
        cfg.reseed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn new_report(cli: &Cli, cfg: Option<&TrainConfig>) -> RunReport {
    let mut r = RunReport::new("", cli.shared.deterministic);
    if let Some(c) = cfg {
        r.config_text(&c.to_text());
        r.seeds.insert("init".into(), c.seed_init);
        r.seeds.insert("data".into(), c.seed_data);
        r.seeds.insert("noise".into(), c.seed_noise);
    }
    r
}

fn metric_values(prefix: &str, m: &MetricReport, out: &mut Vec<(String, f64)>) {
    out.push((format!("{}psnr", prefix), m.psnr));
    out.push((format!("{}ssim", prefix), m.ssim));
    out.push((format!("{}psnr_b", prefix), m.psnr_b));
}

fn push_row(report: &mut RunReport, id: impl Into<String>, values: &[(String, f64)]) {
    let v: Vec<(&str, f64)> = values.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    report.row(id, &v);
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<RunReport> {
    let out = required_out(cli, "synth-data")?;
    let spec = DatasetSpec {
        seed: cli.shared.seed.unwrap_or(0),
        width: a.width,
        height: a.height,
        train: a.train,
        val: a.val,
        test: a.test,
    };
    let manifest = generate_dataset(&out, &spec)?;
    let mut report = new_report(cli, None);
    report.seeds.insert("data".into(), spec.seed);
    report.config_text(&format!(
        "width={}\nheight={}\ntrain={}\nval={}\ntest={}",
        a.width, a.height, a.train, a.val, a.test
    ));
    for r in &manifest.records {
        let p = &r.params;
        report.row(
            r.normal.display().to_string(),
            &[("gamma", p.gamma), ("exposure", p.exposure), ("noise_sigma", p.noise_sigma), ("qf", p.qf as f64)],
        );
    }
    report.mean("records", manifest.records.len() as f64);
    println!("wrote {} pairs to {}", manifest.records.len(), out.display());
    Ok(report)
}

fn compress_cmd(cli: &Cli, a: &CompressArgs) -> Result<RunReport> {
    let img = load_ppm(&a.input)?;
    let out = compress(&img, a.qf)?;
    save_ppm(&out, &a.output)?;
    let m = evaluate_pair(&out, &img)?;
    let mut report = new_report(cli, None);
    report.config_text(&format!("qf={}", a.qf));
    report.row(a.output.display().to_string(), &[("psnr", m.psnr), ("ssim", m.ssim), ("psnr_b", m.psnr_b)]);
    report.mean("psnr", m.psnr);
    report.mean("ssim", m.ssim);
    report.mean("psnr_b", m.psnr_b);
    println!("{}: psnr {:.3} dB, ssim {:.4}, psnr-b {:.3} dB", a.output.display(), m.psnr, m.ssim, m.psnr_b);
    Ok(report)
}

fn log_dat(log: &LossLog) -> String {
    let mut header = vec!["step"];
    header.extend(log.columns.iter().map(|s| s.as_str()));
    let rows: Vec<Vec<f64>> =
        log.rows.iter().map(|(s, v)| std::iter::once(*s as f64).chain(v.iter().copied()).collect()).collect();
    dat(&header, &rows)
}

fn train_vae(cli: &Cli, a: &TrainVaeArgs) -> Result<RunReport> {
    let out = required_out(cli, "train-vae")?;
    let cfg = config(cli, None)?;
    let samples = load_split(manifest_path(&a.data), Split::Train)?;
    let s = train_stage1(&cfg, &samples, Some(&out))?;
    write(&out.join("stage1_dark.dat"), &log_dat(&s.dark_log))?;
    write(&out.join("stage1_normal.dat"), &log_dat(&s.normal_log))?;
    let mut report = new_report(cli, Some(&cfg));
    for (d, name) in ["dark", "normal"].iter().enumerate() {
        report.row(
            *name,
            &[("initial_l1", s.initial_l1[d]), ("final_l1", s.final_l1[d]), ("ratio", s.final_l1[d] / s.initial_l1[d])],
        );
        println!("{} VAE: reconstruction L1 {:.4} -> {:.4}", name, s.initial_l1[d], s.final_l1[d]);
    }
    report.mean("steps", s.steps as f64);
    report.mean("min_kl", s.min_kl);
    Ok(report)
}

/// The explicit `--config`, else the config echoed in the Stage-1 checkpoint.
fn config_from_vae(cli: &Cli, vae: &Path) -> Result<TrainConfig> {
    let base = if cli.shared.config.is_none() { Some(open_checkpoint(vae, "vae-dark")?.1) } else { None };
    config(cli, base)
}

fn train_mapping(cli: &Cli, a: &TrainMappingArgs) -> Result<RunReport> {
    let out = required_out(cli, "train-mapping")?;
    let mut cfg = config_from_vae(cli, &a.vae)?;
    if let Some(n) = a.levels {
        cfg = cfg.with_top_levels(n)?;
    }
    let manifest = manifest_path(&a.data);
    let train = load_split(&manifest, Split::Train)?;
    let test = load_split(&manifest, Split::Test)?;
    let (dark, normal) = load_vaes(&a.vae, &cfg)?;
    let s = train_stage2(&cfg, &train, &dark, &normal, Some(&out))?;
    write(&out.join("stage2.dat"), &log_dat(&s.log))?;
    let mut report = new_report(cli, Some(&cfg));
    let rows = evaluate_enhancement(&dark, &normal, &s.mapping, &test)?;
    for (i, r) in rows.iter().enumerate() {
        let mut v = Vec::new();
        metric_values("baseline_", &r.baseline, &mut v);
        metric_values("", &r.enhanced, &mut v);
        v.push(("luma".into(), r.luma_enhanced));
        v.push(("luma_ref".into(), r.luma_reference));
        push_row(&mut report, format!("test{:03}", i), &v);
    }
    let (base, enh) = summarize_evals(&rows);
    report.mean("baseline_psnr", base.mean_psnr);
    report.mean("baseline_ssim", base.mean_ssim);
    report.mean("baseline_psnr_b", base.mean_psnr_b);
    report.mean("psnr", enh.mean_psnr);
    report.mean("ssim", enh.mean_ssim);
    report.mean("psnr_b", enh.mean_psnr_b);
    report.mean("steps", s.steps as f64);
    report.config.insert("vae_digest_dark".into(), s.vae_digest_after[0].clone());
    report.config.insert("vae_digest_normal".into(), s.vae_digest_after[1].clone());
    println!(
        "held-out PSNR {:.3} -> {:.3} dB, SSIM {:.4} -> {:.4}",
        base.mean_psnr, enh.mean_psnr, base.mean_ssim, enh.mean_ssim
    );
    Ok(report)
}

fn ppm_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
        .collect();
    files.sort();
    Ok(files)
}

fn enhance(cli: &Cli, a: &EnhanceArgs) -> Result<RunReport> {
    let mut models = TrainedModels::load(&a.vae, a.mapping.as_deref().unwrap_or(&a.vae))?;
    if let Some(n) = a.levels {
        models.mapping.restrict_to_top(n)?;
    }
    let pairs: Vec<(PathBuf, PathBuf)> = if a.input.is_dir() {
        fs::create_dir_all(&a.output).map_err(|e| io(&a.output, e))?;
        ppm_files(&a.input)?
            .into_iter()
            .map(|p| (p.clone(), a.output.join(p.file_name().expect("listed file"))))
            .collect()
    } else {
        vec![(a.input.clone(), a.output.clone())]
    };
    let mut report = new_report(cli, Some(&models.config));
    for (src, dst) in &pairs {
        let img = load_ppm(src)?;
        let out = enhance_image(&img, &models.dark, &models.normal, &models.mapping)?;
        save_ppm(&out, dst)?;
        report.row(dst.display().to_string(), &[("luma_in", img.mean_unit()), ("luma_out", out.mean_unit())]);
    }
    report.mean("images", pairs.len() as f64);
    println!("enhanced {} image(s)", pairs.len());
    Ok(report)
}

fn evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<RunReport> {
    let mut report = new_report(cli, None);
    let mut metrics = Vec::new();
    for test in ppm_files(&a.test)? {
        let name = test.file_name().expect("listed file");
        let reference = a.reference.join(name);
        if !reference.exists() {
            return Err(Error::Mismatch(format!(
                "no reference for {} in {}",
                name.to_string_lossy(),
                a.reference.display()
            )));
        }
        let m = evaluate_pair(&load_ppm(&test)?, &load_ppm(&reference)?)?;
        report.row(name.to_string_lossy(), &[("psnr", m.psnr), ("ssim", m.ssim), ("psnr_b", m.psnr_b)]);
        metrics.push(m);
    }
    if metrics.is_empty() {
        return Err(Error::Usage(format!("no .ppm files in {}", a.test.display())));
    }
    let s = summarize(&metrics);
    report.mean("psnr", s.mean_psnr);
    report.mean("ssim", s.mean_ssim);
    report.mean("psnr_b", s.mean_psnr_b);
    report.mean("infinite_psnr", s.infinite_psnr as f64);
    println!(
        "{} image(s): PSNR {:.3} dB, SSIM {:.4}, PSNR-B {:.3} dB",
        s.count, s.mean_psnr, s.mean_ssim, s.mean_psnr_b
    );
    if let (Some(vae), Some(data)) = (&a.vae, &a.data) {
        let cfg = config_from_vae(cli, vae)?;
        let (dark, _) = load_vaes(vae, &cfg)?;
        let samples = load_split(manifest_path(data), Split::Test)?;
        let gap = latent_image_gap(&dark, &samples)?;
        report.mean("image_mse", gap.image_mse);
        report.mean("latent_mse", gap.latent_mse);
        report.mean("latent_image_ratio", gap.ratio());
        for (i, v) in gap.per_level.iter().enumerate() {
            report.mean(&format!("latent_mse_level{}", i), *v);
        }
        if let Some(out) = &cli.shared.out {
            fs::create_dir_all(out).map_err(|e| io(out, e))?;
            let rows: Vec<Vec<f64>> =
                gap.per_level.iter().enumerate().map(|(i, v)| vec![i as f64, *v, gap.image_mse]).collect();
            write(&out.join("latent_gap.dat"), &dat(&["level", "latent_mse", "image_mse"], &rows))?;
        }
        println!("image MSE {:.3e}, latent MSE {:.3e}, ratio {:.2}", gap.image_mse, gap.latent_mse, gap.ratio());
    }
    Ok(report)
}

fn gradcheck(cli: &Cli) -> Result<(&'static str, RunReport, u8)> {
    let rows = full_suite()?;
    let mut report = new_report(cli, None);
    println!("{:<28} {:>8} {:>12}", "check", "probes", "max rel err");
    let mut worst: f64 = 0.0;
    for r in &rows {
        println!("{:<28} {:>8} {:>12.3e}", r.name, r.checked, r.max_rel_err);
        report.row(r.name.clone(), &[("probes", r.checked as f64), ("max_rel_err", r.max_rel_err)]);
        worst = worst.max(r.max_rel_err);
    }
    report.mean("max_rel_err", worst);
    report.mean("tolerance", GRADCHECK_TOLERANCE);
    let pass = worst < GRADCHECK_TOLERANCE;
    println!("max relative error {:.3e} ({})", worst, if pass { "pass" } else { "FAIL" });
    Ok(("gradcheck", report, if pass { 0 } else { 3 }))
}

fn ablate(cli: &Cli, a: &AblateArgs) -> Result<RunReport> {
    let out = required_out(cli, "ablate-levels")?;
    let cfg = config_from_vae(cli, &a.vae)?;
    let manifest = manifest_path(&a.data);
    let train = load_split(&manifest, Split::Train)?;
    let test = load_split(&manifest, Split::Test)?;
    let (dark, normal) = load_vaes(&a.vae, &cfg)?;
    let rows = ablate_levels(&cfg, &train, &test, &dark, &normal, a.reps, Some(&out))?;
    let mut report = new_report(cli, Some(&cfg));
    println!("{:>4} {:>7} {:>9} {:>8} {:>9}", "rep", "levels", "PSNR", "SSIM", "PSNR-B");
    for r in &rows {
        let e = &r.enhanced;
        println!("{:>4} {:>7} {:>9.3} {:>8.4} {:>9.3}", r.rep, r.levels, e.mean_psnr, e.mean_ssim, e.mean_psnr_b);
        report.row(
            format!("rep{}-levels{}", r.rep, r.levels),
            &[
                ("rep", r.rep as f64),
                ("levels", r.levels as f64),
                ("psnr", e.mean_psnr),
                ("ssim", e.mean_ssim),
                ("psnr_b", e.mean_psnr_b),
                ("baseline_psnr", r.baseline.mean_psnr),
            ],
        );
    }
    let mut table = Vec::new();
    for levels in 1..=cfg.k {
        let sel: Vec<_> = rows.iter().filter(|r| r.levels == levels).collect();
        let mean = |f: &dyn Fn(&mlsm_core::metrics::CorpusSummary) -> f64| {
            sel.iter().map(|r| f(&r.enhanced)).sum::<f64>() / sel.len() as f64
        };
        let (p, s, b) = (mean(&|c| c.mean_psnr), mean(&|c| c.mean_ssim), mean(&|c| c.mean_psnr_b));
        report.mean(&format!("psnr_levels{}", levels), p);
        report.mean(&format!("ssim_levels{}", levels), s);
        report.mean(&format!("psnr_b_levels{}", levels), b);
        table.push(vec![levels as f64, p, s, b]);
    }
    let (wins, reps) = full_beats_single(&rows, cfg.k);
    report.mean("full_beats_single", wins as f64);
    report.mean("reps", reps as f64);
    write(&out.join("ablation.dat"), &dat(&["levels", "psnr", "ssim", "psnr_b"], &table))?;
    println!("all-level PSNR >= single-level PSNR in {}/{} repetitions", wins, reps);
    Ok(report)
}
