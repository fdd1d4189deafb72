//! Stationary increment checks. Two statements are exercised:
//!
//! 1. The increment h(0, T+L) - h(0, T) has the same law as h(0, L) from a
//!    fresh stationary start. Tested as a two-sample KS comparison between a
//!    coupled sample (both heights from one realization) and an independent
//!    sample, repeated over independent seed blocks so finite-sample p-value
//!    jitter is visible in the output.
//! 2. h(0, L) - 2L grows like L^{1/3} in spread while the mean rate
//!    h(0, L)/(2L) stays at 1. Tested over L_grid with a log-log slope fit.
//!
//! The table is long-format: `row_kind` 0 carries one KS repeat per row
//! (key = repeat, a = statistic, b = p, c = sample size), kind 1 one lag per
//! row (key = L, a = sd of the centered height, b = mean rate, c = trials),
//! kind 2 the slope fit (a = slope, b/c = bootstrap CI bounds).

use png_core::dynamics::simulate_stationary;
use png_core::geometry::SpaceTimePoint;
use png_core::stats::{fit_exponent_bootstrap, ks_two_sample, EmpiricalDistribution};

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};
use crate::thresholds::BOOTSTRAP_RESAMPLES;

use super::{
    checked_grid, checked_trials, mean, par_trials, sd, stream_for, ROLE_PRIMARY, ROLE_SCALE,
    ROLE_SECONDARY,
};

pub const ROW_KS: i64 = 0;
pub const ROW_SCALE: i64 = 1;
pub const ROW_FIT: i64 = 2;

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let t_ref = cfg.real("T");
    if !(t_ref > 0.0) {
        return Err(LabError::config(format!("T must be positive, got {t_ref}")));
    }
    let ks_lag = cfg.real("ks_L");
    if !(ks_lag >= 0.0) {
        return Err(LabError::config(format!(
            "ks_L must be >= 0, got {ks_lag}"
        )));
    }
    let trials = checked_trials(cfg, "trials", 2)?;
    let scale_trials = checked_trials(cfg, "scale_trials", 2)?;
    let repeats = cfg.int("repeats");
    if !(1..=1000).contains(&repeats) {
        return Err(LabError::config(format!(
            "repeats must be in [1, 1000], got {repeats}"
        )));
    }
    let l_grid = checked_grid("L_grid", cfg.real_list("L_grid"))?;
    if l_grid.len() < 3 {
        return Err(LabError::config(
            "L_grid needs at least 3 lags for the slope fit".to_string(),
        ));
    }

    let mut table = ResultTable::new(
        "stationary",
        &["row_kind", "key", "value_a", "value_b", "value_c"],
    );

    // Increment-law rows. The coupled pass reads both heights from one
    // realization; the independent pass starts fresh at lag ks_L.
    let both = [
        SpaceTimePoint::new(0.0, t_ref),
        SpaceTimePoint::new(0.0, t_ref + ks_lag),
    ];
    let lag_only = [SpaceTimePoint::new(0.0, ks_lag)];
    for rep in 0..repeats as u32 {
        let diffs: Vec<f64> = par_trials(trials, |trial| {
            let stream = stream_for(seed, ROLE_PRIMARY, rep, trial);
            let h = simulate_stationary(t_ref + ks_lag, &both, &stream)?;
            Ok((h[1] - h[0]) as f64)
        })?;
        let fresh: Vec<f64> = par_trials(trials, |trial| {
            let stream = stream_for(seed, ROLE_SECONDARY, rep, trial);
            let h = simulate_stationary(ks_lag, &lag_only, &stream)?;
            Ok(h[0] as f64)
        })?;
        let (stat, p) = ks_two_sample(
            &EmpiricalDistribution::new(diffs)?,
            &EmpiricalDistribution::new(fresh)?,
        )?;
        table.push(vec![
            Value::Int(ROW_KS),
            Value::Real(rep as f64),
            Value::Real(stat),
            Value::Real(p),
            Value::Int(trials as i64),
        ])?;
    }

    // Scaling rows: centered height at each lag from fresh starts.
    let mut per_scale: Vec<(f64, Vec<f64>)> = Vec::with_capacity(l_grid.len());
    for (l_idx, &lag) in l_grid.iter().enumerate() {
        let query = [SpaceTimePoint::new(0.0, lag)];
        let heights: Vec<f64> = par_trials(scale_trials, |trial| {
            let stream = stream_for(seed, ROLE_SCALE, l_idx as u32, trial);
            let h = simulate_stationary(lag, &query, &stream)?;
            Ok(h[0] as f64)
        })?;
        let centered: Vec<f64> = heights.iter().map(|h| h - 2.0 * lag).collect();
        table.push(vec![
            Value::Int(ROW_SCALE),
            Value::Real(lag),
            Value::Real(sd(&centered)),
            Value::Real(mean(&heights) / (2.0 * lag)),
            Value::Int(scale_trials as i64),
        ])?;
        per_scale.push((lag, centered));
    }

    let mut rng = stream_for(seed, super::ROLE_BOOTSTRAP, 0, 0).rng();
    let fit = fit_exponent_bootstrap(&per_scale, sd, BOOTSTRAP_RESAMPLES, &mut rng)?;
    table.push(vec![
        Value::Int(ROW_FIT),
        Value::Real(0.0),
        Value::Real(fit.slope),
        Value::Real(fit.ci95.0),
        Value::Real(fit.ci95.1),
    ])?;
    Ok(table)
}
