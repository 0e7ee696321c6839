use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{GrayImage, Luma};
use tvgan::cli::{RunManifest, RunStatus, SUMMARY_HEADER};
use tvgan::data::{load_image_file, normalize};
use tvgan::trainer::TRACE_CSV_HEADER;

fn tvgan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvgan"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("TVGAN_RUNS_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const TINY: &[&str] = &[
    "--desk",
    "--synthetic-count",
    "48",
    "--batch-size",
    "8",
    "--base-width",
    "4",
    "--latent-dim",
    "8",
];

fn train_tiny(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["train", "--name", name];
    args.extend_from_slice(TINY);
    if !extra.contains(&"--epochs") {
        args.extend_from_slice(&["--epochs", "1"]);
    }
    args.extend_from_slice(extra);
    ok(&tvgan(dir, &args));
    dir.join("runs").join(name)
}

#[test]
fn train_writes_a_complete_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train_tiny(tmp.path(), "r", &["--epochs", "3", "--checkpoint-every", "2"]);
    let manifest = RunManifest::read(&run).unwrap();
    assert_eq!(manifest.run.status, RunStatus::Complete);
    assert_eq!(manifest.layout.checkpoints.len(), 3);
    assert_eq!(manifest.layout.grids.len(), 3);
    for rel in manifest.layout.checkpoints.iter().chain(&manifest.layout.grids) {
        assert!(run.join(rel).is_file(), "{rel}");
    }
    for epoch in [0, 2, 3] {
        assert!(run.join(format!("grids/epoch_{epoch:04}.png")).is_file());
    }
    let grid = image::open(run.join("grids/epoch_0000.png")).unwrap();
    assert_eq!((grid.width(), grid.height()), (4 * 34 + 2, 4 * 34 + 2));
    let trace = std::fs::read_to_string(run.join("loss_trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), TRACE_CSV_HEADER);
    assert_eq!(trace.lines().count(), 1 + 3 * 6);
    assert!(!manifest.run.version.is_empty());
    assert_eq!(manifest.run.dataset_size, 48);
    let manifests = std::fs::read_dir(&run)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("manifest"))
        .count();
    assert_eq!(manifests, 1);
}

#[test]
fn rerun_gives_identical_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let a = train_tiny(tmp.path(), "a", &[]);
    let b = train_tiny(tmp.path(), "b", &[]);
    assert_eq!(
        std::fs::read(a.join("loss_trace.csv")).unwrap(),
        std::fs::read(b.join("loss_trace.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(a.join("checkpoints/epoch_0001.tvgn")).unwrap(),
        std::fs::read(b.join("checkpoints/epoch_0001.tvgn")).unwrap()
    );
}

#[test]
fn resume_continues_the_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let full = train_tiny(tmp.path(), "full", &["--epochs", "2"]);
    let part = train_tiny(tmp.path(), "part", &[]);
    let ckpt = part.join("checkpoints/epoch_0001.tvgn");
    let mut args = vec!["train", "--name", "part", "--resume", ckpt.to_str().unwrap()];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--epochs", "2"]);
    ok(&tvgan(tmp.path(), &args));
    assert_eq!(
        std::fs::read(full.join("loss_trace.csv")).unwrap(),
        std::fs::read(part.join("loss_trace.csv")).unwrap()
    );
    assert_eq!(
        std::fs::read(full.join("checkpoints/epoch_0002.tvgn")).unwrap(),
        std::fs::read(part.join("checkpoints/epoch_0002.tvgn")).unwrap()
    );
    let mut mismatched = args.clone();
    mismatched.extend_from_slice(&["--learning-rate", "0.001"]);
    assert_eq!(tvgan(tmp.path(), &mismatched).status.code(), Some(2));
    mismatched.push("--allow-config-mismatch");
    ok(&tvgan(tmp.path(), &mismatched));
}

#[test]
fn default_config_is_echoed_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("few");
    std::fs::create_dir(&data).unwrap();
    for i in 0..3 {
        GrayImage::from_pixel(128, 128, Luma([i * 40])).save(data.join(format!("{i}.png"))).unwrap();
    }
    let out = tvgan(tmp.path(), &["train", "--name", "d", "--data-dir", "few"]);
    assert_eq!(out.status.code(), Some(1));
    let manifest = RunManifest::read(&tmp.path().join("runs/d")).unwrap();
    assert_eq!(manifest.run.status, RunStatus::Failed);
    let c = &manifest.config;
    assert_eq!((c.epochs, c.batch_size, c.workers, c.latent_dim), (100, 40, 4, 100));
    assert_eq!(c.learning_rate, 0.0002);
    let text = std::fs::read_to_string(tmp.path().join("runs/d/manifest.toml")).unwrap();
    for line in ["epochs = 100", "batch_size = 40", "learning_rate = 0.0002", "latent_dim = 100"] {
        assert!(text.contains(line), "{line}");
    }
}

#[test]
fn config_errors_exit_with_usage_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tvgan(tmp.path(), &["train", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bogus") && err.contains("batch_size") && err.contains("lambda_tv"));
    std::fs::write(tmp.path().join("c.toml"), "epochs = 2\nnot_a_key = 3\n").unwrap();
    let out = tvgan(tmp.path(), &["train", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not_a_key"));
    assert_eq!(tvgan(tmp.path(), &["train", "--image-size", "48"]).status.code(), Some(2));
    assert_eq!(tvgan(tmp.path(), &["train", "--config", "missing.toml"]).status.code(), Some(2));
    assert_eq!(tvgan(tmp.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(tvgan(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn config_file_and_overrides_layer() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("c.toml"),
        "epochs = 1\nimage_size = 32\nbase_width = 4\nlatent_dim = 8\nbatch_size = 8\nsynthetic_count = 24\nworkers = 0\nseed = 9\n\n[synthetic]\nclass_seed = 3\n",
    )
    .unwrap();
    ok(&tvgan(
        tmp.path(),
        &["train", "--config", "c.toml", "--name", "x", "--set", "seed=5", "--lambda-tv", "0.25"],
    ));
    let m = RunManifest::read(&tmp.path().join("runs/x")).unwrap();
    assert_eq!((m.config.seed, m.config.lambda_tv, m.config.synthetic.class_seed), (5, 0.25, 3));
}

#[test]
fn runs_dir_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--name", "env", "--epochs", "1"];
    args.extend_from_slice(TINY);
    let out = Command::new(env!("CARGO_BIN_EXE_tvgan"))
        .args(&args)
        .current_dir(tmp.path())
        .env("TVGAN_RUNS_DIR", "elsewhere")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    ok(&out);
    assert!(tmp.path().join("elsewhere/env/manifest.toml").is_file());
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn sample_grids_follow_the_layout_rule() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train_tiny(tmp.path(), "s", &[]);
    let ckpt = run.join("checkpoints/epoch_0001.tvgn");
    let ckpt = ckpt.to_str().unwrap();
    for (count, cols, rows) in [("8", 4, 2), ("16", 4, 4), ("5", 3, 2)] {
        ok(&tvgan(tmp.path(), &["sample", "--checkpoint", ckpt, "--count", count, "--out", count]));
        let png = image::open(tmp.path().join(format!("{count}.png"))).unwrap();
        assert_eq!((png.width(), png.height()), (cols * 34 + 2, rows * 34 + 2));
        let npy = std::fs::read(tmp.path().join(format!("{count}.npy"))).unwrap();
        assert!(npy.starts_with(b"\x93NUMPY"));
        assert!(String::from_utf8_lossy(&npy[..128]).contains(&format!("'shape': ({count}, 1, 32, 32)")));
    }
    ok(&tvgan(tmp.path(), &["sample", "--checkpoint", ckpt, "--count", "8", "--out", "again"]));
    assert_eq!(
        std::fs::read(tmp.path().join("8.png")).unwrap(),
        std::fs::read(tmp.path().join("again.png")).unwrap()
    );
    assert_eq!(
        std::fs::read(tmp.path().join("8.npy")).unwrap(),
        std::fs::read(tmp.path().join("again.npy")).unwrap()
    );
    assert_eq!(tvgan(tmp.path(), &["sample", "--checkpoint", "nope.tvgn"]).status.code(), Some(2));
    std::fs::write(tmp.path().join("junk.tvgn"), b"TVGN junk").unwrap();
    assert_eq!(tvgan(tmp.path(), &["sample", "--checkpoint", "junk.tvgn"]).status.code(), Some(1));
}

fn fid_of(stdout: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("fid: "))
        .expect("fid line")
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn evaluate_fid_reports_and_separates_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (dir, seed, start) in [("a", "1", "0"), ("b", "2", "0")] {
        ok(&tvgan(d, &["synth", "--out", dir, "--count", "1000", "--size", "32", "--class-seed", seed, "--start", start]));
    }
    let same = ok(&tvgan(d, &["evaluate-fid", "--real", "a", "--generated", "a", "--image-size", "32", "--out", "same.csv"]));
    assert!(fid_of(&same).abs() <= 1e-8);
    assert!(same.contains("embedder: random-conv"));
    assert!(same.contains("real: 1000 images"));
    let csv = std::fs::read_to_string(d.join("same.csv")).unwrap();
    assert!(csv.starts_with("model,fid\na,"));

    let mut args = vec!["train", "--name", "classA", "--set", "synthetic.class_seed=1"];
    args.extend_from_slice(&["--desk", "--epochs", "5"]);
    ok(&tvgan(d, &args));
    let ckpt = "runs/classA/checkpoints/epoch_0005.tvgn";
    let fa = fid_of(&ok(&tvgan(d, &["evaluate-fid", "--real", "a", "--generated", ckpt, "--count", "1000", "--real-stats", "a.tvfs"])));
    let fb = fid_of(&ok(&tvgan(d, &["evaluate-fid", "--real", "b", "--generated", ckpt, "--count", "1000"])));
    assert!(d.join("a.tvfs").is_file());
    let cached = fid_of(&ok(&tvgan(d, &["evaluate-fid", "--real", "a", "--generated", ckpt, "--count", "1000", "--real-stats", "a.tvfs"])));
    assert_eq!(cached, fa);
    assert!(fa < fb, "class A checkpoint: FID vs A {fa}, vs B {fb}");
    assert!(d.join("runs/fid_report.csv").is_file());

    assert_eq!(tvgan(d, &["evaluate-fid", "--real", "a", "--generated", "missing.tvgn"]).status.code(), Some(2));
    assert_eq!(tvgan(d, &["evaluate-fid", "--real", "nowhere", "--generated", "a"]).status.code(), Some(2));
}

/// Double-loop TV over in-bounds neighbor pairs.
fn brute_tv(g: &ndarray::Array2<f64>) -> f64 {
    let (h, w) = g.dim();
    let mut t = 0.0;
    for i in 0..h {
        for j in 0..w {
            if i + 1 < h {
                t += (g[[i + 1, j]] - g[[i, j]]).abs();
            }
            if j + 1 < w {
                t += (g[[i, j + 1]] - g[[i, j]]).abs();
            }
        }
    }
    t
}

#[test]
fn compute_tv_reports_per_image() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    GrayImage::from_pixel(9, 9, Luma([94])).save(d.join("flat.png")).unwrap();
    GrayImage::from_fn(2, 2, |x, _| Luma([if x == 1 { 255 } else { 0 }])).save(d.join("two.png")).unwrap();
    let flat = ok(&tvgan(d, &["compute-tv", "flat.png"]));
    assert_eq!(flat, "file,tv\nflat.png,0\n");
    let two = ok(&tvgan(d, &["compute-tv", "two.png", "--scale", "unit"]));
    assert_eq!(two, "file,tv\ntwo.png,2\n");
    assert_eq!(ok(&tvgan(d, &["compute-tv", "two.png", "--scale", "raw"])), "file,tv\ntwo.png,510\n");

    ok(&tvgan(d, &["synth", "--out", "set", "--count", "6", "--size", "32"]));
    ok(&tvgan(d, &["compute-tv", "set", "--out", "tv.csv"]));
    let csv = std::fs::read_to_string(d.join("tv.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let (name, value) = row.split_once(',').unwrap();
        let gray = load_image_file(&d.join("set").join(name)).unwrap().mapv(normalize);
        let want = brute_tv(&gray);
        let got: f64 = value.parse().unwrap();
        assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{name}: {got} vs {want}");
    }
    assert_eq!(tvgan(d, &["compute-tv", "absent"]).status.code(), Some(2));
}

#[test]
fn ablate_lambda_writes_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["ablate-lambda", "--lambdas", "0,1e-4", "--seeds", "0,1,2", "--samples", "16", "--name", "ab"];
    args.extend_from_slice(TINY);
    args.extend_from_slice(&["--epochs", "1"]);
    let stdout = ok(&tvgan(tmp.path(), &args));
    assert!(stdout.starts_with(SUMMARY_HEADER));
    let root = tmp.path().join("runs/ab");
    let summary = std::fs::read_to_string(root.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0,3,") && rows[2].starts_with("0.0001,3,"));
    assert_eq!(std::fs::read_to_string(root.join("runs.csv")).unwrap().lines().count(), 7);
    for lambda in ["0", "0.0001"] {
        for seed in 0..3 {
            let m = RunManifest::read(&root.join(format!("lambda_{lambda}_seed_{seed}"))).unwrap();
            assert_eq!(m.config.seed, seed);
        }
    }

    let mut single = vec![
        "ablate-lambda", "--lambdas", "0", "--seeds", "4", "--samples", "16", "--name", "one", "--parallel", "2", "--epochs", "1",
    ];
    single.extend_from_slice(TINY);
    ok(&tvgan(tmp.path(), &single));
    let summary = std::fs::read_to_string(tmp.path().join("runs/one/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().contains(",1,"));

    let bad = tvgan(tmp.path(), &["ablate-lambda", "--lambdas", "0,x", "--desk"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn default_width_one_epoch_run() {
    let tmp = tempfile::tempdir().unwrap();
    let started = std::time::Instant::now();
    ok(&tvgan(
        tmp.path(),
        &["train", "--epochs", "1", "--image-size", "32", "--synthetic", "--workers", "0", "--name", "p"],
    ));
    let elapsed = started.elapsed();
    eprintln!("--epochs 1 --image-size 32 --synthetic: {elapsed:?}");
    assert!(elapsed.as_secs() < 300);
    let m = RunManifest::read(&tmp.path().join("runs/p")).unwrap();
    assert_eq!((m.config.base_width, m.config.batch_size), (64, 40));
    assert_eq!(
        std::fs::read_to_string(tmp.path().join("runs/p/loss_trace.csv")).unwrap().lines().count(),
        1 + 50
    );
}
