//! Height-fluctuation and maximizer-wandering exponents for the droplet,
//! plus the cylinder-crossing frequency of the long maximizer.
//!
//! Per scale T: sd of h(0, T) over strip-truncated clouds (fluctuation
//! exponent), median |x| of the O -> (0, T) maximizer at time T/2
//! (transversal exponent), and the frequency with which the O -> (0, T+T^tau)
//! maximizer leaves the cylinder of half-width T^nu around the vertical
//! segment between those two times. Maximizers are not unique; the crossing
//! event is evaluated on the leftmost and the rightmost one and both
//! frequencies are reported, which need not bound the any-maximizer event.

use png_core::geometry::{percolation_to_png, png_to_percolation, PercolationPoint, SpaceTimePoint};
use png_core::lpp::{
    crosses_cylinder, extreme_maximizers, longest_chain, truncate_to_strip, ChainCounter,
    CylinderSpec, LppResult,
};
use png_core::sampling::{sample_region, Region};
use png_core::stats::fit_exponent_bootstrap;

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};
use crate::thresholds::BOOTSTRAP_RESAMPLES;

use super::{
    checked_grid, checked_trials, median, par_trials, sd, stream_for, ROLE_BOOTSTRAP,
    ROLE_PRIMARY, ROLE_SECONDARY,
};

/// |x| of the path at time t_mid, walking the maximizer with the source and
/// target as virtual endpoints. Times strictly increase along a chain, so a
/// single linear interpolation between the bracketing points suffices.
fn mid_deviation(path: &LppResult, source: SpaceTimePoint, target: SpaceTimePoint) -> f64 {
    let t_mid = 0.5 * (source.t + target.t);
    let mut prev = source;
    let mut next = target;
    for q in &path.maximizer {
        let p = percolation_to_png(*q);
        if p.t <= t_mid {
            prev = p;
        } else {
            next = p;
            break;
        }
    }
    if next.t == prev.t {
        return next.x.abs();
    }
    let s = (t_mid - prev.t) / (next.t - prev.t);
    (prev.x + s * (next.x - prev.x)).abs()
}

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let geometry = cfg.text("geometry");
    if geometry != "droplet" {
        return Err(LabError::config(format!(
            "exponent fits are defined on the droplet cone, got {geometry:?}"
        )));
    }
    let t_grid = checked_grid("T_grid", cfg.real_list("T_grid"))?;
    let span = t_grid.last().unwrap() / t_grid[0];
    if span < 8.0 - 1e-9 {
        return Err(LabError::config(format!(
            "T_grid must span at least three octaves, got x{span:.2}"
        )));
    }
    let trials = checked_trials(cfg, "trials", 2)?;
    let trans_trials = checked_trials(cfg, "transversal_trials", 2)?;
    let tau = cfg.real("tau");
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(LabError::config(format!("tau = {tau} outside (0, 1]")));
    }
    let strip_c = cfg.real("strip_c");
    let strip_eps = cfg.real("strip_eps");
    if strip_c <= 0.0 || strip_eps < 0.0 {
        return Err(LabError::config(format!(
            "strip_c = {strip_c}, strip_eps = {strip_eps}: need strip_c > 0, strip_eps >= 0"
        )));
    }

    let origin = PercolationPoint::new(0.0, 0.0);
    let mut fluct_per_scale: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut trans_per_scale: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut crossing_freqs: Vec<(f64, f64)> = Vec::new();
    let mut dropped_fracs: Vec<f64> = Vec::new();

    for (t_idx, &t_ref) in t_grid.iter().enumerate() {
        let target = PercolationPoint::new(t_ref, t_ref);

        let fluct: Vec<(f64, f64)> = par_trials(trials, |trial| {
            let stream = stream_for(seed, ROLE_PRIMARY, t_idx as u32, trial);
            let cloud = sample_region(&Region::DropletCone { t_ref }, 1.0, &stream)?;
            let total = cloud.points.len();
            let (kept, dropped) = truncate_to_strip(&cloud.points, target, strip_c, strip_eps);
            let mut counter = ChainCounter::point_to_point(origin, target);
            for p in kept {
                counter.offer(p);
            }
            let frac = if total > 0 {
                dropped as f64 / total as f64
            } else {
                0.0
            };
            Ok((counter.length() as f64, frac))
        })?;
        let heights: Vec<f64> = fluct.iter().map(|f| f.0).collect();
        dropped_fracs.push(fluct.iter().map(|f| f.1).sum::<f64>() / trials as f64);

        let t_far = t_ref + t_ref.powf(tau);
        let far = PercolationPoint::new(t_far, t_far);
        let apex = SpaceTimePoint::new(0.0, t_ref);
        let apex_far = SpaceTimePoint::new(0.0, t_far);
        let cyl = CylinderSpec::for_scale(apex, apex_far, t_ref, tau);
        let trans: Vec<(f64, bool, bool)> = par_trials(trans_trials, |trial| {
            let stream = stream_for(seed, ROLE_SECONDARY, t_idx as u32, trial);
            let region = Region::rect(0.0, t_far, 0.0, t_far);
            let cloud = sample_region(&region, 1.0, &stream)?;
            let near_path = longest_chain(&cloud, origin, png_to_percolation(apex))?;
            let dev = mid_deviation(&near_path, SpaceTimePoint::new(0.0, 0.0), apex);
            let (far_left, far_right) = extreme_maximizers(&cloud, origin, far)?;
            Ok((
                dev,
                crosses_cylinder(&far_left, &cyl),
                crosses_cylinder(&far_right, &cyl),
            ))
        })?;
        let devs: Vec<f64> = trans.iter().map(|t| t.0).collect();
        let crossed_l = trans.iter().filter(|t| t.1).count();
        let crossed_r = trans.iter().filter(|t| t.2).count();
        crossing_freqs.push((
            crossed_l as f64 / trans_trials as f64,
            crossed_r as f64 / trans_trials as f64,
        ));

        fluct_per_scale.push((t_ref, heights));
        trans_per_scale.push((t_ref, devs));
    }

    let mut rng = stream_for(seed, ROLE_BOOTSTRAP, 0, 0).rng();
    let fluct_fit = fit_exponent_bootstrap(&fluct_per_scale, sd, BOOTSTRAP_RESAMPLES, &mut rng)?;
    let mut rng = stream_for(seed, ROLE_BOOTSTRAP, 1, 0).rng();
    let trans_fit = fit_exponent_bootstrap(&trans_per_scale, median, BOOTSTRAP_RESAMPLES, &mut rng)?;

    let mut table = ResultTable::new(
        "exponents",
        &[
            "T",
            "n_fluct",
            "sd",
            "dropped_frac",
            "n_trans",
            "median_dev",
            "crossing_freq_left",
            "crossing_freq_right",
            "fluct_slope",
            "fluct_ci_lo",
            "fluct_ci_hi",
            "trans_slope",
            "trans_ci_lo",
            "trans_ci_hi",
        ],
    );
    for (idx, &t_ref) in t_grid.iter().enumerate() {
        table.push(vec![
            Value::Real(t_ref),
            Value::Int(trials as i64),
            Value::Real(sd(&fluct_per_scale[idx].1)),
            Value::Real(dropped_fracs[idx]),
            Value::Int(trans_trials as i64),
            Value::Real(median(&trans_per_scale[idx].1)),
            Value::Real(crossing_freqs[idx].0),
            Value::Real(crossing_freqs[idx].1),
            Value::Real(fluct_fit.slope),
            Value::Real(fluct_fit.ci95.0),
            Value::Real(fluct_fit.ci95.1),
            Value::Real(trans_fit.slope),
            Value::Real(trans_fit.ci95.0),
            Value::Real(trans_fit.ci95.1),
        ])?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use png_core::stats::fit_exponent;

    #[test]
    fn synthetic_cube_root_data_recovers_slope_exactly() {
        let points: Vec<(f64, f64)> = [64.0f64, 128.0, 256.0, 512.0]
            .iter()
            .map(|&t| (t, 1.7 * t.powf(1.0 / 3.0)))
            .collect();
        let fit = fit_exponent(&points).unwrap();
        assert!((fit.slope - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mid_deviation_interpolates_straight_paths_to_zero() {
        let src = SpaceTimePoint::new(0.0, 0.0);
        let dst = SpaceTimePoint::new(0.0, 10.0);
        // Empty maximizer: straight line between the endpoints.
        let path = LppResult {
            length: 0,
            maximizer: vec![],
            target: png_to_percolation(dst),
        };
        assert_eq!(mid_deviation(&path, src, dst), 0.0);

        // One point off-axis at exactly the midpoint time.
        let q = png_to_percolation(SpaceTimePoint::new(1.5, 5.0));
        let path = LppResult {
            length: 1,
            maximizer: vec![q],
            target: png_to_percolation(dst),
        };
        assert!((mid_deviation(&path, src, dst) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_narrow_grids_and_bad_tau() {
        use crate::config::{validate, RawConfig, EXPONENTS};
        let c = |s: &str| validate(&RawConfig::parse(s).unwrap(), &EXPONENTS).unwrap();
        assert!(run(&c("T_grid = 16, 32\ntrials = 5\n"), 0).is_err());
        assert!(run(&c("T_grid = 16, 32, 128\ntau = 1.5\ntrials = 5\n"), 0).is_err());
        assert!(run(&c("T_grid = 16, 32, 128\nstrip_c = 0\ntrials = 5\n"), 0).is_err());
    }
}
