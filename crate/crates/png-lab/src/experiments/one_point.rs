//! Empirical distribution of the droplet height h(0, T) against the
//! determinantal CDF from the kernel module, level by level.

use png_core::geometry::SpaceTimePoint;
use png_core::dynamics::simulate_droplet;
use png_core::kernels::gap_cdf;

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};

use super::{checked_trials, par_trials, stream_for, ROLE_PRIMARY};

/// The determinant cross-check stays well conditioned and fast up to here.
const T_MAX: f64 = 16.0;

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let geometry = cfg.text("geometry");
    if geometry != "droplet" {
        return Err(LabError::config(format!(
            "one-point comparison needs geometry = droplet (the level CDF \
             oracle is the droplet gap determinant), got {geometry:?}"
        )));
    }
    let t_ref = cfg.real("T");
    if !(0.0..=T_MAX).contains(&t_ref) {
        return Err(LabError::config(format!(
            "T = {t_ref} outside [0, {T_MAX}]"
        )));
    }
    let trials = checked_trials(cfg, "trials", 1)?;

    let heights = par_trials(trials, |trial| {
        let stream = stream_for(seed, ROLE_PRIMARY, 0, trial);
        let h = simulate_droplet(t_ref, &[SpaceTimePoint::new(0.0, t_ref)], &stream)?;
        Ok(h[0])
    })?;

    let h_min = *heights.iter().min().expect("trials >= 1");
    let h_max = *heights.iter().max().expect("trials >= 1");
    // Two levels of margin so the table shows the oracle tails flattening
    // out around everything that was observed.
    let lo = (h_min - 2).max(-1);
    let hi = h_max + 2;

    let oracle: Vec<(i64, f64)> = if t_ref == 0.0 {
        (lo..=hi).map(|n| (n, if n >= 0 { 1.0 } else { 0.0 })).collect()
    } else {
        gap_cdf(t_ref, lo, hi)?
    };

    let n = trials as f64;
    let mut table = ResultTable::new(
        "one_point",
        &["level", "count", "cdf_mc", "cdf_oracle", "se_oracle", "z"],
    );
    let mut cum = 0usize;
    for (level, cdf_oracle) in oracle {
        let count = heights.iter().filter(|&&h| h == level).count();
        cum += count;
        let cdf_mc = cum as f64 / n;
        // The determinant can land a hair outside [0, 1] on the margin
        // levels; clamp so the variance term stays real.
        let p = cdf_oracle.clamp(0.0, 1.0);
        let se = (p * (1.0 - p) / n).sqrt();
        let z = if se > 0.0 { (cdf_mc - cdf_oracle) / se } else { 0.0 };
        table.push(vec![
            Value::Int(level),
            Value::Int(count as i64),
            Value::Real(cdf_mc),
            Value::Real(cdf_oracle),
            Value::Real(se),
            Value::Real(z),
        ])?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, RawConfig, ONE_POINT};

    fn cfg(text: &str) -> Config {
        validate(&RawConfig::parse(text).unwrap(), &ONE_POINT).unwrap()
    }

    #[test]
    fn zero_time_height_is_identically_zero() {
        let table = run(&cfg("T = 0\ntrials = 200\n"), 7).unwrap();
        let levels = table.column("level").unwrap();
        let counts = table.column("count").unwrap();
        for (l, c) in levels.iter().zip(&counts) {
            if *l == 0.0 {
                assert_eq!(*c, 200.0);
            } else {
                assert_eq!(*c, 0.0);
            }
        }
        let cdf = table.column("cdf_mc").unwrap();
        assert_eq!(*cdf.last().unwrap(), 1.0);
    }

    #[test]
    fn rejects_wrong_geometry_and_large_t() {
        let raw = RawConfig::parse("geometry = flat\nT = 4\ntrials = 10\n").unwrap();
        let c = validate(&raw, &ONE_POINT).unwrap();
        assert!(run(&c, 0).is_err());
        assert!(run(&cfg("T = 17\ntrials = 10\n"), 0).is_err());
    }

    #[test]
    fn small_run_tracks_oracle_loosely() {
        // T = 4, 3000 trials: crude 5-sigma guard that the level convention
        // and the determinant agree with the sampler.
        let table = run(&cfg("T = 4\ntrials = 3000\n"), 11).unwrap();
        let z = table.column("z").unwrap();
        let oracle = table.column("cdf_oracle").unwrap();
        for (zi, f) in z.iter().zip(&oracle) {
            if *f > 0.05 && *f < 0.95 {
                assert!(zi.abs() < 5.0, "z = {zi} at cdf {f}");
            }
        }
    }
}
