use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{s, Array4};

use crate::data::{hex, list_images, load_directory, load_image_file, normalize, synth_palm_lines_range, DatasetSpec, DataSource, SynthClassParams};
use crate::fid::{frechet_distance, gaussian_stats, GaussianStats};
use crate::trainer::{Checkpoint, TrainConfig};
use crate::tv::tv_value;

use super::ablate::{parse_list, run_ablation, AblationPlan};
use super::output::{write_grid, write_npy};
use super::run::{train_run, RunOptions};
use super::{AblateArgs, CliError, CliResult, ConfigArgs, FidArgs, SampleArgs, SynthArgs, TrainArgs, TvArgs, TvScale};

fn require_exists(path: &Path, what: &str) -> CliResult {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!("{what} {} does not exist", path.display())))
    }
}

/// Builds the effective config: base (defaults, desk preset or file),
/// then `--set` pairs, then typed flags.
pub fn resolve_config(args: &ConfigArgs) -> CliResult<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => {
            require_exists(path, "config file")?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            TrainConfig::from_toml_str(&text)?
        }
        None if args.desk => TrainConfig::desk_scale(),
        None => TrainConfig::default(),
    };
    for pair in &args.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        config.apply_override(key.trim(), value.trim())?;
    }
    macro_rules! flag {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field { config.$field = v; })*
        };
    }
    flag!(
        epochs,
        batch_size,
        workers,
        learning_rate,
        adam_beta1,
        adam_beta2,
        latent_dim,
        lambda_tv,
        image_size,
        base_width,
        seed,
        checkpoint_every,
        synthetic_count
    );
    if let Some(dir) = &args.data_dir {
        config.data_dir = Some(dir.clone());
    }
    if args.synthetic {
        config.data_dir = None;
    }
    config.validate()?;
    if let Some(dir) = &config.data_dir {
        require_exists(dir, "data directory")?;
    }
    Ok(config)
}

pub fn train(args: &TrainArgs, root: &Path) -> CliResult {
    let config = resolve_config(&args.config)?;
    if let Some(ckpt) = &args.resume {
        require_exists(ckpt, "checkpoint")?;
    }
    let run_dir = match (&args.out, &args.name) {
        (Some(out), _) => out.clone(),
        (None, Some(name)) => root.join(name),
        (None, None) => root.join(format!("train-{}-s{}", &hex(&config.fingerprint())[..8], config.seed)),
    };
    let loading = Instant::now();
    let dataset = config.dataset_spec().load()?;
    let outcome = train_run(
        &config,
        &dataset,
        RunOptions {
            run_dir: Some(&run_dir),
            resume: args.resume.as_deref(),
            allow_config_mismatch: args.allow_config_mismatch,
            load_seconds: loading.elapsed().as_secs_f64(),
        },
    )?;
    let last = outcome.trace.records().last();
    println!("run directory: {}", run_dir.display());
    println!("epochs: {}, iterations: {}", outcome.checkpoint.epoch, outcome.checkpoint.iteration);
    if let Some(r) = last {
        println!(
            "final losses: d_loss {:.4}, g_adv {:.4}, g_tv {:.4}, g_total {:.4}",
            r.losses.d_loss, r.losses.g_adv, r.losses.g_tv, r.losses.g_total
        );
    }
    Ok(())
}

pub fn sample(args: &SampleArgs, root: &Path) -> CliResult {
    require_exists(&args.checkpoint, "checkpoint")?;
    if args.count == 0 {
        return Err(CliError::usage("--count must be positive"));
    }
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let batch = checkpoint.sample(args.count, args.seed)?;
    let stem = args
        .out
        .clone()
        .unwrap_or_else(|| root.join("samples").join(format!("sample_s{}_n{}", args.seed, args.count)));
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(crate::Error::from)?;
    }
    let png = stem.with_extension("png");
    let npy = stem.with_extension("npy");
    write_grid(batch.view(), &png)?;
    write_npy(batch.view(), &npy)?;
    println!("{}", png.display());
    println!("{}", npy.display());
    Ok(())
}

fn load_dir_images(dir: &Path, size: usize) -> CliResult<Array4<f32>> {
    let spec = DatasetSpec {
        source: DataSource::Directory(dir.to_path_buf()),
        image_size: size,
        shuffle_seed: 0,
        workers: 0,
    };
    Ok(load_directory(dir, &spec)?.images().clone())
}

fn fid_on(real: &GaussianStats, generated: &Array4<f32>, embedder: &dyn crate::fid::Embedder) -> CliResult<f64> {
    let stats = gaussian_stats(embedder.embed(generated.view())?.view())?;
    Ok(frechet_distance(real, &stats)?)
}

pub fn evaluate_fid(args: &FidArgs, root: &Path) -> CliResult {
    require_exists(&args.real, "real image directory")?;
    require_exists(&args.generated, "generated source")?;
    let checkpoint = if args.generated.is_file() {
        Some(Checkpoint::load(&args.generated)?)
    } else {
        None
    };
    let size = args
        .image_size
        .or(checkpoint.as_ref().map(|c| c.config.image_size))
        .unwrap_or(64);
    let embedder = args.embedder.build(args.embedder_seed);

    let cached = match &args.real_stats {
        Some(path) if path.exists() => Some(GaussianStats::load(path)?),
        _ => None,
    };
    let real_stats = match cached {
        Some(stats) => {
            if stats.dim() != embedder.dim() {
                return Err(CliError::usage(format!(
                    "cached statistics have dimension {}, embedder {} has {}",
                    stats.dim(),
                    embedder.name(),
                    embedder.dim()
                )));
            }
            stats
        }
        None => {
            let real = load_dir_images(&args.real, size)?;
            let stats = gaussian_stats(embedder.embed(real.view())?.view())?;
            if let Some(path) = &args.real_stats {
                stats.save(path)?;
            }
            stats
        }
    };

    let generated = match &checkpoint {
        Some(c) => {
            let count = args.count.unwrap_or(real_stats.sample_count());
            if count < 2 {
                return Err(CliError::usage("--count must be at least 2"));
            }
            c.sample(count, args.seed)?
        }
        None => {
            let mut images = load_dir_images(&args.generated, size)?;
            if let Some(count) = args.count {
                let keep = count.min(images.len_of(ndarray::Axis(0)));
                images = images.slice(s![..keep, .., .., ..]).to_owned();
            }
            images
        }
    };
    let n = generated.len_of(ndarray::Axis(0));
    let score = fid_on(&real_stats, &generated, embedder.as_ref())?;
    let model = args.model_name.clone().unwrap_or_else(|| {
        args.generated
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });

    println!("fid: {score:.6}");
    println!("real: {} images ({})", real_stats.sample_count(), args.real.display());
    println!("generated: {n} images ({})", args.generated.display());
    println!("embedder: {} (d = {}, seed {})", embedder.name(), embedder.dim(), args.embedder_seed);
    for m in [n / 4, n / 2] {
        if m >= 2 {
            let sub = generated.slice(s![..m, .., .., ..]).to_owned();
            println!("fid with {m} generated: {:.6}", fid_on(&real_stats, &sub, embedder.as_ref())?);
        }
    }

    let out = args.out.clone().unwrap_or_else(|| root.join("fid_report.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(crate::Error::from)?;
    }
    std::fs::write(&out, format!("model,fid\n{model},{score:.6}\n")).map_err(crate::Error::from)?;
    Ok(())
}

pub fn compute_tv(args: &TvArgs) -> CliResult {
    require_exists(&args.path, "input")?;
    let files: Vec<PathBuf> = if args.path.is_dir() {
        list_images(&args.path)?
    } else {
        vec![args.path.clone()]
    };
    if files.is_empty() {
        return Err(crate::Error::Data(format!("no images in {}", args.path.display())).into());
    }
    let mut csv = String::from("file,tv\n");
    for file in &files {
        let gray = load_image_file(file)?;
        let scaled = match args.scale {
            TvScale::Normalized => gray.mapv(normalize),
            TvScale::Unit => gray / 255.0,
            TvScale::Raw => gray,
        };
        let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = writeln!(csv, "{name},{}", tv_value(scaled.view())?);
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(crate::Error::from)?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn ablate(args: &AblateArgs, root: &Path) -> CliResult {
    let base = resolve_config(&args.config)?;
    let plan = AblationPlan {
        base,
        lambdas: parse_list(&args.lambdas, "lambda")?,
        seeds: parse_list(&args.seeds, "seed")?,
        samples: args.samples,
        parallel: args.parallel,
        embedder: args.embedder,
        embedder_seed: 0,
    };
    let out = match (&args.out, &args.name) {
        (Some(out), _) => out.clone(),
        (None, Some(name)) => root.join(name),
        (None, None) => root.join("ablate-lambda"),
    };
    let report = run_ablation(&plan, Some(&out))?;
    print!("{}", report.summary_csv());
    println!("report: {}", out.join("summary.csv").display());
    Ok(())
}

pub fn synth(args: &SynthArgs) -> CliResult {
    let mut params = SynthClassParams::default().with_class_seed(args.class_seed);
    if let Some(lines) = args.line_count {
        params = params.with_line_count(lines);
    }
    if args.count == 0 {
        return Err(CliError::usage("--count must be positive"));
    }
    let images = synth_palm_lines_range(args.start, args.count, args.size, &params)?;
    std::fs::create_dir_all(&args.out).map_err(crate::Error::from)?;
    for (i, img) in images.outer_iter().enumerate() {
        let pixels = img.index_axis(ndarray::Axis(0), 0);
        let mut gray = image::GrayImage::new(args.size as u32, args.size as u32);
        for ((y, x), &v) in pixels.indexed_iter() {
            gray.put_pixel(x as u32, y as u32, image::Luma([crate::data::denormalize(f64::from(v)).round() as u8]));
        }
        gray.save(args.out.join(format!("synth_{:05}.png", args.start + i)))
            .map_err(crate::Error::from)?;
    }
    println!("wrote {} images to {}", args.count, args.out.display());
    Ok(())
}
