//! Subcommand implementations behind the `jepa-fer` binary. Everything
//! here is a thin orchestration layer over the library modules, returning
//! [`Error`]s that the binary maps onto exit codes (1 config, 2 data,
//! 3 numeric).

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    cross_evaluate, evaluate_fold, pca2, pooled_clip_embeddings, uar, war, write_confusion_avg_csv,
    write_confusion_csv, write_confusion_svg, write_metrics_json, write_pca_csv, ConfusionMatrix,
    EvalSettings, FoldMetrics, HarmonizationMode, LabelSet, MetricsReport, Voting,
};
use crate::jepa::{pretrain_run, JepaModel};
use crate::probe::{train_probe, AttentiveProbe, Pooling};
use crate::tensor::{gradcheck, gradcheck_report, PrimitiveCheck, Tensor};
use crate::video::{gen_synthetic, make_folds, verify_folds, FoldPlan, Manifest, VideoRecord};
use crate::vit::VideoEncoder;
use std::path::Path;

/// Which voting strategies a command should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VotingChoice {
    Mv,
    Pbv,
    Both,
}

impl VotingChoice {
    pub fn strategies(&self) -> Vec<Voting> {
        match self {
            VotingChoice::Mv => vec![Voting::Mv],
            VotingChoice::Pbv => vec![Voting::Pbv],
            VotingChoice::Both => vec![Voting::Mv, Voting::Pbv],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Drop,
    Merge,
    Both,
}

impl ModeChoice {
    pub fn modes(&self) -> Vec<HarmonizationMode> {
        match self {
            ModeChoice::Drop => vec![HarmonizationMode::DropOnly],
            ModeChoice::Merge => vec![HarmonizationMode::MergeCalmNeutral],
            ModeChoice::Both => vec![
                HarmonizationMode::DropOnly,
                HarmonizationMode::MergeCalmNeutral,
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaChoice {
    Attentive,
    Average,
    Both,
}

fn require_dir(path: &Path, what: &str) -> Result<()> {
    if !path.is_dir() {
        return Err(Error::io(
            path.display().to_string(),
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{what} directory does not exist"),
            ),
        ));
    }
    Ok(())
}

pub fn load_config(config: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn manifest_at(data_dir: &Path) -> Result<Manifest> {
    Manifest::load(&data_dir.join("manifest.csv"))
}

/// `gen-synth`: write a synthetic dataset plus its manifest.
pub fn cmd_gen_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    require_dir(out, "output")?;
    let manifest = gen_synthetic(&cfg.synth()?, out)?;
    cfg.save(&out.join("config.toml"))?;
    println!(
        "wrote {} videos ({} subjects, {} labels) and {}",
        manifest.records.len(),
        manifest.subjects().len(),
        manifest.labels().len(),
        out.join("manifest.csv").display()
    );
    Ok(())
}

/// `pretrain`: run the self-supervised loop, emit loss log + checkpoints.
pub fn cmd_pretrain(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    require_dir(out, "output")?;
    let manifest = manifest_at(data)?;
    let arch = cfg.arch();
    let model = JepaModel::<f32>::new(&arch, cfg.seed)?;
    let stats = pretrain_run(&model, &manifest, &cfg.augment(), &cfg.pretrain(), Some(out))?;
    cfg.save(&out.join("config.toml"))?;
    let n = stats.losses.len();
    println!(
        "pretrained {} steps: first loss {:.5}, last loss {:.5}",
        n, stats.losses[0], stats.losses[n - 1]
    );
    println!("checkpoint: {}", out.join("checkpoint.vjfc").display());
    println!("frozen encoder: {}", out.join("encoder.vjfc").display());
    Ok(())
}

fn load_encoder(cfg: &RunConfig, path: &Path) -> Result<VideoEncoder<f32>> {
    let ck = Checkpoint::load(path)?;
    VideoEncoder::from_checkpoint(&cfg.arch(), &ck)
}

fn plan_for(cfg: &RunConfig, manifest: &Manifest) -> Result<FoldPlan> {
    make_folds(manifest, cfg.folds, cfg.fold_source()?)
}

/// `train-probe`: one probe per fold (or a single `--fold`), frozen encoder.
pub fn cmd_train_probe(
    cfg: &RunConfig,
    data: &Path,
    encoder_path: &Path,
    out: &Path,
    fold: Option<usize>,
) -> Result<()> {
    require_dir(out, "output")?;
    let manifest = manifest_at(data)?;
    let labels = LabelSet::for_manifest(&manifest)?;
    let encoder = load_encoder(cfg, encoder_path)?;
    let plan = plan_for(cfg, &manifest)?;
    verify_folds(&plan, &manifest)?;
    plan.save(&out.join("folds.json"))?;

    let folds: Vec<usize> = match fold {
        Some(f) if f >= plan.k => {
            return Err(Error::config(format!("--fold {f} out of range for k={}", plan.k)))
        }
        Some(f) => vec![f],
        None => (0..plan.k).collect(),
    };
    for f in folds {
        let outcome = train_probe(
            &encoder,
            &manifest,
            &labels,
            &plan,
            f,
            &cfg.augment(),
            &cfg.probe(),
        )?;
        outcome
            .probe
            .to_checkpoint()
            .save(&out.join(format!("probe_fold{f}.vjfc")))?;
        outcome.history.save(&out.join(format!("history_fold{f}.csv")))?;
        println!(
            "fold {f}: final train war {:.3}",
            outcome.history.final_train_war().unwrap_or(0.0)
        );
    }
    let mut resolved = cfg.clone();
    resolved.dataset = manifest.dataset()?.as_str().to_string();
    resolved.save(&out.join("config.toml"))?;
    Ok(())
}

fn load_probe(
    cfg: &RunConfig,
    probes: &Path,
    fold: usize,
    n_classes: usize,
) -> Result<AttentiveProbe<f32>> {
    let path = probes.join(format!("probe_fold{fold}.vjfc"));
    let ck = Checkpoint::load(&path)?;
    AttentiveProbe::from_checkpoint(cfg.embed_dim, cfg.heads, n_classes, &ck)
}

fn emit_report_files(
    report: &MetricsReport,
    summed: &ConfusionMatrix,
    per_fold: &[ConfusionMatrix],
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    write_metrics_json(report, &dir.join("metrics.json"))?;
    write_confusion_csv(summed, &dir.join("confusion.csv"))?;
    write_confusion_avg_csv(per_fold, &dir.join("confusion_avg.csv"))?;
    let title = format!(
        "{} {} {}",
        report.dataset,
        report.voting,
        report.mode.as_deref().unwrap_or("")
    );
    write_confusion_svg(summed, title.trim(), &dir.join("confusion.svg"))
}

/// `eval`: same-dataset whole-video evaluation across folds.
#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    cfg: &RunConfig,
    data: &Path,
    encoder_path: &Path,
    probes: &Path,
    out: &Path,
    voting: VotingChoice,
    fold: Option<usize>,
    pca: Option<PcaChoice>,
) -> Result<()> {
    require_dir(out, "output")?;
    let manifest = manifest_at(data)?;
    let labels = LabelSet::for_manifest(&manifest)?;
    let encoder = load_encoder(cfg, encoder_path)?;
    let plan = FoldPlan::load(&probes.join("folds.json"))?;
    let settings = EvalSettings {
        aug: cfg.augment(),
        clip_stride: cfg.eval_clip_stride,
    };

    let folds: Vec<usize> = match fold {
        Some(f) if f >= plan.k => {
            return Err(Error::config(format!("--fold {f} out of range for k={}", plan.k)))
        }
        Some(f) => vec![f],
        None => (0..plan.k).collect(),
    };

    let mut outcomes = Vec::new();
    for &f in &folds {
        let probe = load_probe(cfg, probes, f, labels.len())?;
        outcomes.push(evaluate_fold(&encoder, &probe, &manifest, &labels, &plan, f, &settings)?);
    }

    for strategy in voting.strategies() {
        let mut fold_metrics = Vec::new();
        let mut summed = ConfusionMatrix::new(labels.names().to_vec());
        let mut per_fold = Vec::new();
        for o in &outcomes {
            let cm = o.matrix(strategy);
            let (u, w) = o.metrics(strategy)?;
            fold_metrics.push(FoldMetrics { uar: u, war: w });
            summed.merge(cm)?;
            per_fold.push(cm.clone());
        }
        let report = MetricsReport::from_folds(
            manifest.dataset()?.as_str().to_string(),
            strategy.as_str().to_string(),
            None,
            labels.names().to_vec(),
            fold_metrics,
            0,
        );
        emit_report_files(&report, &summed, &per_fold, &out.join(strategy.as_str()))?;
        println!(
            "{}: mean uar {:.4}, mean war {:.4} over {} folds",
            strategy.as_str(),
            report.mean_uar,
            report.mean_war,
            report.folds.len()
        );
    }

    if let Some(choice) = pca {
        let pca_fold = fold.unwrap_or(0);
        let probe = load_probe(cfg, probes, pca_fold, labels.len())?;
        let held = plan.validation_subjects(pca_fold)?;
        let records: Vec<&VideoRecord> = manifest
            .records
            .iter()
            .filter(|r| held.contains(r.subject_id.as_str()))
            .collect();
        let poolings: Vec<(Pooling, &str)> = match choice {
            PcaChoice::Attentive => vec![(Pooling::Attentive, "attentive")],
            PcaChoice::Average => vec![(Pooling::Average, "average")],
            PcaChoice::Both => vec![(Pooling::Attentive, "attentive"), (Pooling::Average, "average")],
        };
        for (pooling, name) in poolings {
            let (embeddings, labels_out) =
                pooled_clip_embeddings(&encoder, &probe, &manifest, &records, pooling, &settings)?;
            let embeddings: Vec<Vec<f64>> = embeddings
                .into_iter()
                .map(|e| e.into_iter().map(f64::from).collect())
                .collect();
            let (coords, _) = pca2(&embeddings)?;
            write_pca_csv(&coords, &labels_out, &out.join(format!("pca_{name}.csv")))?;
        }
    }

    cfg.save(&out.join("config.toml"))?;
    Ok(())
}

/// `cross-eval`: probes trained on one dataset, evaluated on the other.
#[allow(clippy::too_many_arguments)]
pub fn cmd_cross_eval(
    cfg: &RunConfig,
    data: &Path,
    encoder_path: &Path,
    probes: &Path,
    out: &Path,
    mode: ModeChoice,
    voting: VotingChoice,
) -> Result<()> {
    require_dir(out, "output")?;
    let eval_manifest = manifest_at(data)?;
    let encoder = load_encoder(cfg, encoder_path)?;
    let plan = FoldPlan::load(&probes.join("folds.json"))?;
    let probes_cfg = RunConfig::load(&probes.join("config.toml"))?;
    let train_tag = probes_cfg.dataset_tag()?;
    let train_labels = LabelSet::for_dataset(train_tag).ok_or_else(|| {
        Error::protocol("cross-dataset evaluation needs probes trained on a lab-style label set")
    })?;

    let probe_models: Vec<AttentiveProbe<f32>> = (0..plan.k)
        .map(|f| load_probe(cfg, probes, f, train_labels.len()))
        .collect::<Result<Vec<_>>>()?;
    let settings = EvalSettings {
        aug: cfg.augment(),
        clip_stride: cfg.eval_clip_stride,
    };

    for strategy in voting.strategies() {
        for m in mode.modes() {
            let outcome = cross_evaluate(
                &encoder,
                &probe_models,
                &eval_manifest,
                &train_labels,
                m,
                strategy,
                &settings,
            )?;
            let mut fold_metrics = Vec::new();
            let mut summed = ConfusionMatrix::new(crate::eval::harmonized_classes());
            let mut per_fold = Vec::new();
            let mut dropped = 0usize;
            for h in &outcome.per_probe {
                fold_metrics.push(FoldMetrics {
                    uar: uar(&h.cm)?.value,
                    war: war(&h.cm)?,
                });
                summed.merge(&h.cm)?;
                per_fold.push(h.cm.clone());
                dropped += h.dropped;
            }
            let report = MetricsReport::from_folds(
                eval_manifest.dataset()?.as_str().to_string(),
                strategy.as_str().to_string(),
                Some(m.as_str().to_string()),
                crate::eval::harmonized_classes(),
                fold_metrics,
                dropped,
            );
            let dir = if voting.strategies().len() > 1 {
                out.join(format!("{}_{}", m.as_str(), strategy.as_str()))
            } else {
                out.join(m.as_str())
            };
            emit_report_files(&report, &summed, &per_fold, &dir)?;
            println!(
                "{} {}: mean uar {:.4}, mean war {:.4}, dropped {}",
                m.as_str(),
                strategy.as_str(),
                report.mean_uar,
                report.mean_war,
                report.dropped
            );
        }
    }
    cfg.save(&out.join("config.toml"))?;
    Ok(())
}

/// The 2-block-encoder + probe composite finite-difference check used by
/// `gradcheck` and the acceptance suite.
pub fn composite_gradcheck(h: f64) -> Result<PrimitiveCheck> {
    use crate::vit::{ArchConfig, TubeletConfig};
    let arch = ArchConfig {
        clip_frames: 4,
        frame_h: 8,
        frame_w: 8,
        tubelet: TubeletConfig {
            patch_t: 2,
            patch_h: 4,
            patch_w: 4,
            embed_dim: 12,
        },
        depth: 2,
        heads: 2,
        mlp_ratio: 2,
        predictor_dim: 6,
        predictor_depth: 1,
        predictor_heads: 2,
    };
    let encoder = VideoEncoder::<f64>::random(&arch, 5, true)?;
    let probe = AttentiveProbe::<f64>::new(12, 2, 3, 6)?;
    let clip = {
        let n = 4 * 8 * 8 * 3;
        crate::video::FloatClip {
            frames: 4,
            height: 8,
            width: 8,
            data: (0..n).map(|i| ((i * 31 % 97) as f32 - 48.0) / 48.0).collect(),
        }
    };
    let mut params: Vec<Tensor<f64>> =
        encoder.named_params().into_iter().map(|(_, t)| t).collect();
    params.extend(probe.params());
    let max_rel_err = gradcheck(
        move |_| {
            let features = encoder.encode_clip(&clip)?;
            probe.classify(&features)?.reshape(&[3])?.cross_entropy(1)
        },
        &params,
        h,
    )?;
    Ok(PrimitiveCheck {
        name: "encoder2+probe composite",
        max_rel_err,
        tolerance: 1e-4,
        seeds: 1,
    })
}

/// `gradcheck`: finite-difference table over every primitive plus the
/// composite; numeric failure when any row fails.
pub fn cmd_gradcheck(seeds: u64) -> Result<()> {
    let mut report = gradcheck_report(seeds, 1e-5, 1e-4)?;
    report.checks.push(composite_gradcheck(1e-5)?);
    println!("{:<28} {:>12} {:>10} {:>6}", "primitive", "max rel err", "tolerance", "");
    let mut all_ok = true;
    for c in &report.checks {
        let status = if c.passed() { "pass" } else { "FAIL" };
        all_ok &= c.passed();
        println!(
            "{:<28} {:>12.3e} {:>10.0e} {:>6}",
            c.name, c.max_rel_err, c.tolerance, status
        );
    }
    if !all_ok {
        return Err(Error::Numeric("gradient check failed".into()));
    }
    Ok(())
}

/// `splits-verify`: report a fold plan, optionally against a manifest.
pub fn cmd_splits_verify(plan_path: Option<&Path>, manifest_path: Option<&Path>) -> Result<()> {
    let plan = match plan_path {
        Some(p) => FoldPlan::load(p)?,
        None => FoldPlan::cremad_table(),
    };
    let sizes: Vec<String> = plan.fold_sizes().iter().map(|s| s.to_string()).collect();
    println!("fold sizes: {}", sizes.join("/"));
    match manifest_path {
        Some(mp) => {
            let manifest = Manifest::load(mp)?;
            let report = verify_folds(&plan, &manifest)?;
            println!("{report}");
            println!("verification: pass");
        }
        None => {
            // structural checks only: disjointness over the plan itself
            let mut seen = std::collections::BTreeSet::new();
            for fold in &plan.folds {
                for s in fold {
                    if !seen.insert(s.clone()) {
                        return Err(Error::protocol(format!(
                            "subject {s} appears in more than one fold"
                        )));
                    }
                }
            }
            println!("{} subjects across {} folds, pairwise disjoint", seen.len(), plan.k);
        }
    }
    Ok(())
}
