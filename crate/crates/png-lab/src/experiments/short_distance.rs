//! Point counts in the short-distance cell between two consecutive sample
//! points of the constant-height hyperbola. Consecutive means separated by
//! T^{-2/3} on the rescaled transversal axis; the cell is the percolation
//!-frame rectangle spanned by the two hyperbola points, and its area is
//! close to 1 independent of T. Every tail probability P(count >= k) is
//! compared against the exact Poisson law with the cell's exact area as
//! mean, so the table doubles as a check that the cell really is unit-area.

use png_core::geometry::{hyperbola_point, png_to_percolation};
use png_core::sampling::{sample_region, Region};

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};

use super::{checked_trials, par_trials, stream_for, ROLE_PRIMARY};

fn ln_factorial(k: usize) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Exact Poisson tail P(N >= k), summed forward from the k-th term so small
/// tails keep full relative precision.
pub(crate) fn poisson_tail(lambda: f64, k: usize) -> f64 {
    if lambda <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let log_first = -lambda + k as f64 * lambda.ln() - ln_factorial(k);
    let mut term = log_first.exp();
    let mut sum = 0.0;
    let mut n = k;
    while term > sum * 1e-17 + 1e-300 {
        sum += term;
        n += 1;
        term *= lambda / n as f64;
    }
    sum.min(1.0)
}

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let t_ref = cfg.real("T");
    if !(t_ref > 0.0) {
        return Err(LabError::config(format!("T must be positive, got {t_ref}")));
    }
    let trials = checked_trials(cfg, "trials", 1)?;
    let u_base = cfg.real("u_base");
    let spacing = cfg.real("spacing_scale");
    if !(spacing >= 0.0) {
        return Err(LabError::config(format!(
            "spacing_scale must be >= 0, got {spacing}"
        )));
    }

    let du = spacing * t_ref.powf(-2.0 / 3.0);
    let scale = t_ref.powf(-1.0 / 3.0);
    let a = png_to_percolation(hyperbola_point(t_ref, u_base * scale)?.point);
    let b = png_to_percolation(hyperbola_point(t_ref, (u_base + du) * scale)?.point);
    let cell = Region::rect(a.u.min(b.u), a.u.max(b.u), a.v.min(b.v), a.v.max(b.v));
    let area = cell.area();

    let counts: Vec<usize> = par_trials(trials, |trial| {
        let stream = stream_for(seed, ROLE_PRIMARY, 0, trial);
        Ok(sample_region(&cell, 1.0, &stream)?.points.len())
    })?;

    let k_star = t_ref.powf(1.0 / 6.0).ceil() as usize;
    let observed_max = counts.iter().copied().max().unwrap_or(0);
    let k_max = k_star.max(observed_max + 1);

    let mut table = ResultTable::new(
        "short_distance",
        &["k", "p_ge_emp", "p_ge_oracle", "se", "z", "area"],
    );
    let n = trials as f64;
    for k in 0..=k_max {
        let emp = counts.iter().filter(|&&c| c >= k).count() as f64 / n;
        let oracle = poisson_tail(area, k);
        let se = (oracle * (1.0 - oracle) / n).sqrt();
        let z = if se > 0.0 { (emp - oracle) / se } else { 0.0 };
        table.push(vec![
            Value::Int(k as i64),
            Value::Real(emp),
            Value::Real(oracle),
            Value::Real(se),
            Value::Real(z),
            Value::Real(area),
        ])?;
    }
    Ok(table)
}
