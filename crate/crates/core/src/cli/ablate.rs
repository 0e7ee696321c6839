use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::fid::{fid, EmbedderKind};
use crate::seed::{derive_seed, TAG_EVAL_SAMPLES};
use crate::trainer::{LossTrace, TrainConfig};
use crate::tv::{batch_tv, Reduction};
use crate::{Error, Result};

use super::run::{train_run, RunOptions};

pub const SUMMARY_HEADER: &str = "lambda,runs,tv_mean,tv_std,fid_mean,fid_std";
pub const RUNS_HEADER: &str = "lambda,seed,sample_tv,fid,first_epoch_g_adv,last_epoch_g_adv";

/// One training run per `(λ, seed)`, each scored by sample TV and FID.
#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub base: TrainConfig,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Generated samples per run used for TV and FID.
    pub samples: usize,
    pub parallel: usize,
    pub embedder: EmbedderKind,
    pub embedder_seed: u64,
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub lambda: f64,
    pub seed: u64,
    pub sample_tv: f64,
    pub fid: f64,
    pub trace: LossTrace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub lambda: f64,
    pub runs: usize,
    pub tv_mean: f64,
    pub tv_std: f64,
    pub fid_mean: f64,
    pub fid_std: f64,
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub runs: Vec<AblationRun>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Parses a comma-separated list such as `0,1e-4`.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    let items: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("invalid {what} value {s:?}"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("empty {what} list")));
    }
    Ok(items)
}

impl AblationReport {
    pub fn summary(&self) -> Vec<AblationRow> {
        let mut lambdas: Vec<f64> = Vec::new();
        for r in &self.runs {
            if !lambdas.iter().any(|l| l.to_bits() == r.lambda.to_bits()) {
                lambdas.push(r.lambda);
            }
        }
        lambdas
            .into_iter()
            .map(|lambda| {
                let group: Vec<&AblationRun> = self.runs.iter().filter(|r| r.lambda.to_bits() == lambda.to_bits()).collect();
                let tvs: Vec<f64> = group.iter().map(|r| r.sample_tv).collect();
                let fids: Vec<f64> = group.iter().map(|r| r.fid).collect();
                let (tv_mean, tv_std) = mean_std(&tvs);
                let (fid_mean, fid_std) = mean_std(&fids);
                AblationRow {
                    lambda,
                    runs: group.len(),
                    tv_mean,
                    tv_std,
                    fid_mean,
                    fid_std,
                }
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = format!("{SUMMARY_HEADER}\n");
        for r in self.summary() {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.lambda, r.runs, r.tv_mean, r.tv_std, r.fid_mean, r.fid_std
            );
        }
        out
    }

    pub fn runs_csv(&self) -> String {
        let mut out = format!("{RUNS_HEADER}\n");
        for r in &self.runs {
            let last = r.trace.records().last().map(|x| x.epoch).unwrap_or(1);
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                r.lambda,
                r.seed,
                r.sample_tv,
                r.fid,
                r.trace.mean_g_adv(1).unwrap_or(f64::NAN),
                r.trace.mean_g_adv(last).unwrap_or(f64::NAN)
            );
        }
        out
    }
}

pub fn run_dir_name(lambda: f64, seed: u64) -> String {
    format!("lambda_{lambda}_seed_{seed}")
}

fn one_run(plan: &AblationPlan, lambda: f64, seed: u64, out: Option<&Path>) -> Result<AblationRun> {
    let mut config = plan.base.clone();
    config.lambda_tv = lambda;
    config.seed = seed;
    config.validate()?;
    let loading = Instant::now();
    let dataset = config.dataset_spec().load()?;
    let dir: Option<PathBuf> = out.map(|o| o.join(run_dir_name(lambda, seed)));
    let outcome = train_run(
        &config,
        &dataset,
        RunOptions {
            run_dir: dir.as_deref(),
            load_seconds: loading.elapsed().as_secs_f64(),
            ..RunOptions::default()
        },
    )?;
    let samples = outcome
        .checkpoint
        .sample(plan.samples, derive_seed(seed, TAG_EVAL_SAMPLES, 0))?;
    let sample_tv = batch_tv(samples.view(), Reduction::Mean)?;
    let embedder = plan.embedder.build(plan.embedder_seed);
    let score = fid(dataset.images().view(), samples.view(), embedder.as_ref())?;
    log::info!("λ = {lambda}, seed {seed}: sample TV {sample_tv:.3}, FID {score:.4}");
    Ok(AblationRun {
        lambda,
        seed,
        sample_tv,
        fid: score,
        trace: outcome.trace,
    })
}

/// Runs every `(λ, seed)` pair with at most `plan.parallel` concurrent
/// runs. With `out`, each run gets its own run directory and the summary
/// and per-run CSVs are written there.
pub fn run_ablation(plan: &AblationPlan, out: Option<&Path>) -> Result<AblationReport> {
    if plan.lambdas.is_empty() || plan.seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one λ and one seed".into()));
    }
    if plan.samples < 2 {
        return Err(Error::Config("ablation needs at least 2 samples per run".into()));
    }
    if let Some(&bad) = plan.lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::Config(format!("λ must be a nonnegative number, got {bad}")));
    }
    let jobs: Vec<(f64, u64)> = plan
        .lambdas
        .iter()
        .flat_map(|&l| plan.seeds.iter().map(move |&s| (l, s)))
        .collect();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<AblationRun>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = plan.parallel.clamp(1, jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(lambda, seed)) = jobs.get(i) else { break };
                let r = one_run(plan, lambda, seed, out);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let runs = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;
    let report = AblationReport { runs };
    if let Some(dir) = out {
        std::fs::write(dir.join("summary.csv"), report.summary_csv())?;
        std::fs::write(dir.join("runs.csv"), report.runs_csv())?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("0, 1e-4", "λ").unwrap(), vec![0.0, 1e-4]);
        assert!(parse_list::<u64>("1,x", "seed").is_err());
        assert!(parse_list::<u64>("", "seed").is_err());
    }
}
