//! End-to-end subcommand tests against the built binary: artifact layout,
//! exit codes, and rerun determinism on a deliberately tiny configuration.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jepa-fer"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output, what: &str) {
    assert!(
        out.status.success(),
        "{what} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// A configuration small enough to run the whole pipeline in seconds.
fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "seed = 3\n\
         embed_dim = 16\n\
         depth = 1\n\
         heads = 2\n\
         mlp_ratio = 2\n\
         predictor_dim = 8\n\
         predictor_depth = 1\n\
         predictor_heads = 2\n\
         frame_h = 32\n\
         frame_w = 32\n\
         synth_subjects = 5\n\
         synth_videos_per = 1\n\
         synth_min_frames = 61\n\
         synth_max_frames = 66\n\
         mask_block_h = 1\n\
         mask_block_w = 1\n\
         pretrain_steps = 4\n\
         pretrain_batch = 1\n\
         probe_epochs = 1\n\
         probe_clips_per_video = 2\n",
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn full_pipeline_via_binary() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path());
    let data = root.path().join("data");
    let pretrain = root.path().join("pretrain");
    let probes = root.path().join("probes");
    let eval = root.path().join("eval");
    for d in [&data, &pretrain, &probes, &eval] {
        std::fs::create_dir(d).unwrap();
    }
    let data_s = data.display().to_string();
    let pre_s = pretrain.display().to_string();
    let probes_s = probes.display().to_string();
    let eval_s = eval.display().to_string();
    let encoder = pretrain.join("encoder.vjfc").display().to_string();

    let out = run(&["gen-synth", "--out", &data_s, "--config", &cfg]);
    assert_ok(&out, "gen-synth");
    assert!(data.join("manifest.csv").exists());
    assert!(data.join("config.toml").exists(), "resolved config must be written");

    let out = run(&["pretrain", "--data", &data_s, "--out", &pre_s, "--config", &cfg]);
    assert_ok(&out, "pretrain");
    for f in ["loss_log.csv", "checkpoint.vjfc", "encoder.vjfc", "config.toml"] {
        assert!(pretrain.join(f).exists(), "missing {f}");
    }

    let out = run(&[
        "train-probe", "--data", &data_s, "--encoder", &encoder, "--out", &probes_s,
        "--config", &cfg, "--fold", "0",
    ]);
    assert_ok(&out, "train-probe");
    assert!(probes.join("probe_fold0.vjfc").exists());
    assert!(probes.join("history_fold0.csv").exists());
    assert!(probes.join("folds.json").exists());

    let out = run(&[
        "eval", "--data", &data_s, "--encoder", &encoder, "--probes", &probes_s,
        "--out", &eval_s, "--config", &cfg, "--fold", "0", "--voting", "both",
        "--pca", "both",
    ]);
    assert_ok(&out, "eval");
    for v in ["mv", "pbv"] {
        for f in ["metrics.json", "confusion.csv", "confusion_avg.csv", "confusion.svg"] {
            assert!(eval.join(v).join(f).exists(), "missing {v}/{f}");
        }
    }
    assert!(eval.join("pca_attentive.csv").exists());
    assert!(eval.join("pca_average.csv").exists());

    // metrics.json carries the declared schema
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("pbv/metrics.json")).unwrap())
            .unwrap();
    for key in ["dataset", "voting", "classes", "folds", "mean_uar", "mean_war", "std_war", "dropped"] {
        assert!(metrics.get(key).is_some(), "metrics.json missing '{key}'");
    }
    assert_eq!(metrics["voting"], "pbv");
}

#[test]
fn rerun_is_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_config(root.path());
    let mk = |name: &str| {
        let d = root.path().join(name);
        std::fs::create_dir(&d).unwrap();
        d
    };
    let (d1, d2) = (mk("a"), mk("b"));
    for d in [&d1, &d2] {
        let out = run(&["gen-synth", "--out", &d.display().to_string(), "--config", &cfg]);
        assert_ok(&out, "gen-synth");
        let p = d.join("pre");
        std::fs::create_dir(&p).unwrap();
        let out = run(&[
            "pretrain", "--data", &d.display().to_string(), "--out", &p.display().to_string(),
            "--config", &cfg,
        ]);
        assert_ok(&out, "pretrain");
    }
    let a = std::fs::read(d1.join("pre/checkpoint.vjfc")).unwrap();
    let b = std::fs::read(d2.join("pre/checkpoint.vjfc")).unwrap();
    assert_eq!(a, b, "same config + seed must give identical checkpoints");
    let a = std::fs::read(d1.join("manifest.csv")).unwrap();
    let b = std::fs::read(d2.join("manifest.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exit_codes_match_error_classes() {
    // 2: data error (missing output directory, no partial files)
    let out = run(&["gen-synth", "--out", "/nonexistent/path/xyz"]);
    assert_eq!(out.status.code(), Some(2));

    // 1: config error (unknown key)
    let root = tempfile::tempdir().unwrap();
    let bad = root.path().join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = run(&[
        "gen-synth", "--out", &root.path().display().to_string(),
        "--config", &bad.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));

    // 0: success
    let out = run(&["splits-verify"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn splits_verify_builtin_plan() {
    let out = run(&["splits-verify"]);
    assert_ok(&out, "splits-verify");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("19/18/18/18/18"), "stdout: {stdout}");
    assert!(stdout.contains("91 subjects"));
}

#[test]
fn splits_verify_catches_duplicate_subject() {
    let root = tempfile::tempdir().unwrap();
    let plan = root.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{"k":2,"source":{"generated":{"seed":1}},"folds":[["a","b"],["b","c"]]}"#,
    )
    .unwrap();
    let manifest = root.path().join("manifest.csv");
    std::fs::write(
        &manifest,
        "id,path,subject_id,label,dataset,duration_frames\n\
         v0,v0.rvt,a,c0,SYNTH,61\nv1,v1.rvt,b,c1,SYNTH,61\nv2,v2.rvt,c,c0,SYNTH,61\n",
    )
    .unwrap();
    let out = run(&[
        "splits-verify", "--plan", &plan.display().to_string(),
        "--manifest", &manifest.display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('b'));
}

#[test]
fn gradcheck_subcommand_passes_quickly() {
    let out = run(&["gradcheck", "--seeds", "2"]);
    assert_ok(&out, "gradcheck");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("matmul"));
    assert!(stdout.contains("composite"));
    assert!(!stdout.contains("FAIL"));
}
