//! Fourth-moment regularity of the smoothed line-ensemble statistic along
//! the constant-height hyperbola. For each pair u_i < u_j on the rescaled
//! grid the table reports the Monte Carlo fourth moment of
//! eta(u_i) - eta(u_j) and its ratio to du^2 + du T^{-2/3}; boundedness of
//! the ratio across pairs (no blow-up as du shrinks toward the grid floor)
//! is the check. The grid floor itself, spacing >= T^{-2/3}, is enforced at
//! config time.

use png_core::dynamics::{
    default_depth, eta_smoothed, evolve_multilayer_snapshots, sample_droplet_events, SmoothedStep,
};
use png_core::geometry::hyperbola_point;

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};

use super::{checked_trials, mean, par_trials, stream_for, ROLE_PRIMARY};

fn validated_grid(t_ref: f64, grid: &[f64]) -> LabResult<()> {
    if grid.len() < 2 {
        return Err(LabError::config(
            "u_grid needs at least two points to form a pair".to_string(),
        ));
    }
    let floor = t_ref.powf(-2.0 / 3.0) - 1e-12;
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(LabError::config(format!(
                "u_grid must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        if w[1] - w[0] < floor {
            return Err(LabError::config(format!(
                "u_grid spacing {} is below the resolution floor T^(-2/3) = {}",
                w[1] - w[0],
                t_ref.powf(-2.0 / 3.0)
            )));
        }
    }
    for &u in grid {
        if !(u.abs() <= 1.0) {
            return Err(LabError::config(format!("u = {u} outside [-1, 1]")));
        }
    }
    Ok(())
}

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let t_ref = cfg.real("T");
    if !(t_ref > 0.0) {
        return Err(LabError::config(format!("T must be positive, got {t_ref}")));
    }
    let u_grid = cfg.real_list("u_grid");
    validated_grid(t_ref, &u_grid)?;
    let m = cfg.real("M");
    if !(m > 0.0) {
        return Err(LabError::config(format!(
            "smoothing half-width M must be positive, got {m}"
        )));
    }
    let depth_raw = cfg.int("depth");
    if depth_raw < 0 {
        return Err(LabError::config(format!(
            "depth must be >= 0 (0 picks the default), got {depth_raw}"
        )));
    }
    let depth = if depth_raw == 0 {
        default_depth(t_ref, m)
    } else {
        depth_raw as usize
    };
    let trials = checked_trials(cfg, "trials", 2)?;

    // Snapshot times: one per grid point, on the hyperbola through (0, T).
    let times: Vec<f64> = u_grid
        .iter()
        .map(|&u| Ok(hyperbola_point(t_ref, u * t_ref.powf(-1.0 / 3.0))?.point.t))
        .collect::<LabResult<_>>()?;
    let mut times_sorted = times.clone();
    times_sorted.sort_by(|a, b| a.total_cmp(b));
    times_sorted.dedup();
    let t_max = *times_sorted.last().unwrap();
    let window = (-(t_max + 5.0), t_max + 5.0);
    let step = SmoothedStep::new(m);

    let etas: Vec<Vec<f64>> = par_trials(trials, |trial| {
        let stream = stream_for(seed, ROLE_PRIMARY, 0, trial);
        let events = sample_droplet_events(t_max, &stream);
        let (states, _) =
            evolve_multilayer_snapshots(&events, &times_sorted, depth, window, false)?;
        let mut out = Vec::with_capacity(u_grid.len());
        for (&u, &t_u) in u_grid.iter().zip(&times) {
            let idx = times_sorted
                .binary_search_by(|a| a.total_cmp(&t_u))
                .expect("snapshot time was scheduled");
            out.push(eta_smoothed(&states[idx], u, &step, t_ref)?);
        }
        Ok(out)
    })?;

    let mut table = ResultTable::new(
        "moment_bound",
        &["u_i", "u_j", "du", "m4", "ratio", "n"],
    );
    let scale_term = t_ref.powf(-2.0 / 3.0);
    for i in 0..u_grid.len() {
        for j in (i + 1)..u_grid.len() {
            let du = u_grid[j] - u_grid[i];
            let fourths: Vec<f64> = etas
                .iter()
                .map(|e| {
                    let d = e[i] - e[j];
                    d * d * d * d
                })
                .collect();
            let m4 = mean(&fourths);
            table.push(vec![
                Value::Real(u_grid[i]),
                Value::Real(u_grid[j]),
                Value::Real(du),
                Value::Real(m4),
                Value::Real(m4 / (du * du + du * scale_term)),
                Value::Int(trials as i64),
            ])?;
        }
    }
    Ok(table)
}
