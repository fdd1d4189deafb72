//! Experiment drivers. Each experiment is a pure function of (config,
//! master seed) producing a ResultTable; `execute` adds the artifact
//! plumbing around it (output directory, CSV, plots, manifest).
//!
//! Randomness discipline: every random draw comes from a counter-derived
//! substream id with the layout role(8) | index(24) | trial(32). Roles are
//! experiment-local (primary trials, secondary passes, bootstrap), `index`
//! enumerates grid positions or repeats, `trial` the Monte Carlo trial.
//! Trials are merged by indexed collect, so results never depend on the
//! thread count or scheduling.

pub mod decorrelation;
pub mod exponents;
pub mod moment_bound;
pub mod one_point;
pub mod short_distance;
pub mod spacelike;
pub mod stationary;

use std::path::Path;

use rayon::prelude::*;

use png_core::sampling::{substream, RngStream};

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::manifest::{unix_now, Manifest};
use crate::plot::write_table_plots;
use crate::table::{sha256_hex, ResultTable};
use crate::thresholds::{BOOTSTRAP_RESAMPLES, THRESHOLDS_VERSION};

/// Substream roles shared across experiments; see the module doc.
pub(crate) const ROLE_PRIMARY: u8 = 0;
pub(crate) const ROLE_SECONDARY: u8 = 1;
pub(crate) const ROLE_SCALE: u8 = 2;
pub(crate) const ROLE_BOOTSTRAP: u8 = 8;

pub(crate) fn stream_for(seed: u64, role: u8, index: u32, trial: u32) -> RngStream {
    debug_assert!(index < (1 << 24));
    let id = ((role as u64) << 56) | ((index as u64) << 32) | trial as u64;
    substream(seed, id)
}

/// Runs `f` for trials 0..n in parallel, preserving trial order in the
/// output regardless of scheduling.
pub(crate) fn par_trials<T: Send>(
    n: u32,
    f: impl Fn(u32) -> LabResult<T> + Sync + Send,
) -> LabResult<Vec<T>> {
    (0..n).into_par_iter().map(f).collect()
}

pub(crate) fn checked_trials(cfg: &Config, key: &str, min: i64) -> LabResult<u32> {
    let n = cfg.int(key);
    if n < min || n > u32::MAX as i64 {
        return Err(LabError::config(format!(
            "{key} = {n} outside [{min}, 2^32)"
        )));
    }
    Ok(n as u32)
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 samples.
pub(crate) fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    png_core::stats::quantile_sorted(&sorted, 0.5)
}

/// Pearson correlation with a seeded bootstrap CI; `tag` keeps distinct
/// bootstrap draws of one run on distinct substreams.
pub(crate) fn pearson_ci(
    seed: u64,
    tag: u32,
    pairs: &[(f64, f64)],
) -> LabResult<(f64, f64, f64)> {
    let mut rng = stream_for(seed, ROLE_BOOTSTRAP, tag, 0).rng();
    let (r, (lo, hi)) = png_core::stats::pearson(pairs, BOOTSTRAP_RESAMPLES, &mut rng)?;
    Ok((r, lo, hi))
}

/// Ascending, strictly positive, strictly increasing grid check.
pub(crate) fn checked_grid(name: &str, grid: &[f64]) -> LabResult<Vec<f64>> {
    if grid.is_empty() {
        return Err(LabError::config(format!("{name} is empty")));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(LabError::config(format!(
                "{name} must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    if grid[0] <= 0.0 {
        return Err(LabError::config(format!(
            "{name} entries must be positive, got {}",
            grid[0]
        )));
    }
    Ok(grid.to_vec())
}

pub fn dispatch(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    match cfg.experiment() {
        "one-point" => one_point::run(cfg, seed),
        "exponents" => exponents::run(cfg, seed),
        "slow-decorrelation" => decorrelation::run(cfg, seed),
        "spacelike" => spacelike::run(cfg, seed),
        "stationary" => stationary::run(cfg, seed),
        "moment-bound" => moment_bound::run(cfg, seed),
        "short-distance" => short_distance::run(cfg, seed),
        other => Err(LabError::config(format!("unknown experiment {other:?}"))),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunContext {
    pub seed: u64,
    /// 0 uses the global rayon default.
    pub threads: usize,
    pub svg: bool,
}

/// Runs the experiment and writes results.csv, manifest.json, and optional
/// plots into `out_dir` (created if missing). Returns the finished table.
pub fn execute(cfg: &Config, ctx: &RunContext, out_dir: &Path) -> LabResult<ResultTable> {
    let started = unix_now();
    let table = if ctx.threads == 0 {
        dispatch(cfg, ctx.seed)?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.threads)
            .build()
            .map_err(|e| LabError::runtime(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(cfg, ctx.seed))?
    };

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("results.csv");
    let csv_bytes = table.csv_bytes();
    std::fs::write(&csv_path, &csv_bytes)?;

    let mut outputs = std::collections::BTreeMap::new();
    outputs.insert("results.csv".to_string(), sha256_hex(&csv_bytes));
    if ctx.svg {
        for file in write_table_plots(&table, out_dir)? {
            let bytes = std::fs::read(out_dir.join(&file))?;
            outputs.insert(file, sha256_hex(&bytes));
        }
    }

    let manifest = Manifest {
        experiment: cfg.experiment().to_string(),
        master_seed: ctx.seed,
        threads: ctx.threads,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        thresholds_version: THRESHOLDS_VERSION.to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        config: cfg.echo().clone(),
        outputs,
    };
    manifest.write(&out_dir.join("manifest.json"))?;
    Ok(table)
}
