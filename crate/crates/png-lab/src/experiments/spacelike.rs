//! Height correlations along locally linear observation paths through
//! (xi T, T) on the droplet. A path with slope pi' visits
//! x(u) = xi T + u T^{2/3}, t(u) = T + pi' u T^{2/3}; the statistic that
//! governs decorrelation is the effective separation u_eff = u (1 - xi pi'),
//! the transversal component relative to the characteristic ray. The grid is
//! given in u_eff units so rows with different pi' are directly comparable.

use png_core::geometry::{rescale_height, LimitShape, PathKind, PathSpec, RescaleSpec, SpaceTimePoint};
use png_core::dynamics::simulate_droplet;

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};

use super::{checked_grid, checked_trials, par_trials, pearson_ci, stream_for, ROLE_PRIMARY};

fn columns() -> &'static [&'static str] {
    &["pi_prime", "u_eff", "u_path", "corr", "ci_lo", "ci_hi", "n"]
}

/// Core protocol, shared by `run` and the trivial-separation unit test.
/// `u_grid` holds effective separations; all points of all paths are read
/// from one droplet cloud per trial.
fn run_protocol(
    xi: f64,
    pi_primes: &[f64],
    u_grid: &[f64],
    t_ref: f64,
    trials: u32,
    seed: u64,
) -> LabResult<ResultTable> {
    let reference = SpaceTimePoint::new(xi * t_ref, t_ref);
    let mut queries = vec![reference];
    let mut u_paths = Vec::new();
    for &pi_prime in pi_primes {
        let path = PathSpec::new(xi, pi_prime, PathKind::General)?;
        for &u_eff in u_grid {
            let u_path = u_eff / (1.0 - xi * pi_prime);
            let p = path.point_at(t_ref, u_path);
            if p.x.abs() > p.t {
                return Err(LabError::config(format!(
                    "path point ({}, {}) for pi_prime = {pi_prime}, u_eff = {u_eff} \
                     lies outside the droplet cone",
                    p.x, p.t
                )));
            }
            u_paths.push(u_path);
            queries.push(p);
        }
    }
    let t_end = queries.iter().fold(0.0f64, |m, q| m.max(q.t));

    let heights: Vec<Vec<i64>> = par_trials(trials, |trial| {
        let stream = stream_for(seed, ROLE_PRIMARY, 0, trial);
        Ok(simulate_droplet(t_end, &queries, &stream)?)
    })?;

    let spec = RescaleSpec::new(LimitShape::Droplet, t_ref, xi)?;
    let rescaled: Vec<Vec<f64>> = heights
        .iter()
        .map(|hs| {
            hs.iter()
                .zip(&queries)
                .map(|(&h, &q)| rescale_height(h, q, &spec))
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let mut table = ResultTable::new("spacelike", columns());
    for (pi_idx, &pi_prime) in pi_primes.iter().enumerate() {
        for (u_idx, &u_eff) in u_grid.iter().enumerate() {
            let flat_idx = pi_idx * u_grid.len() + u_idx;
            let pairs: Vec<(f64, f64)> = rescaled
                .iter()
                .map(|r| (r[0], r[flat_idx + 1]))
                .collect();
            let (corr, lo, hi) = pearson_ci(seed, flat_idx as u32, &pairs)?;
            table.push(vec![
                Value::Real(pi_prime),
                Value::Real(u_eff),
                Value::Real(u_paths[flat_idx]),
                Value::Real(corr),
                Value::Real(lo),
                Value::Real(hi),
                Value::Int(trials as i64),
            ])?;
        }
    }
    Ok(table)
}

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let xi = cfg.real("xi");
    if xi == 0.0 {
        return Err(LabError::config(
            "xi = 0 has a vertical characteristic; the effective-separation \
             comparison needs xi != 0"
                .to_string(),
        ));
    }
    if !(xi.abs() < 1.0) {
        return Err(LabError::config(format!("|xi| must be < 1, got {xi}")));
    }
    let pi_primes = cfg.real_list("pi_prime_list");
    if pi_primes.is_empty() {
        return Err(LabError::config("pi_prime_list is empty".to_string()));
    }
    for &p in pi_primes {
        if p == 1.0 / xi {
            return Err(LabError::config(format!(
                "pi_prime = {p} equals 1/xi: characteristic direction excluded"
            )));
        }
    }
    let u_grid = checked_grid("u_grid", cfg.real_list("u_grid"))?;
    let t_ref = cfg.real("T");
    if !(t_ref > 0.0) {
        return Err(LabError::config(format!("T must be positive, got {t_ref}")));
    }
    let trials = checked_trials(cfg, "trials", 10)?;
    run_protocol(xi, &pi_primes, &u_grid, t_ref, trials, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, RawConfig, SPACELIKE};

    #[test]
    fn zero_separation_recovers_correlation_one() {
        // u_eff = 0 puts the path point on top of the reference; shared noise
        // then forces correlation exactly 1 with a degenerate interval.
        let table = run_protocol(0.5, &[0.0, 0.5], &[0.0], 24.0, 40, 7).unwrap();
        for row in 0..2 {
            let corr = table.column("corr").unwrap()[row];
            let lo = table.column("ci_lo").unwrap()[row];
            let hi = table.column("ci_hi").unwrap()[row];
            assert_eq!(corr, 1.0, "row {row}");
            assert_eq!(lo, 1.0);
            assert_eq!(hi, 1.0);
            assert_eq!(table.column("u_path").unwrap()[row], 0.0);
        }
    }

    #[test]
    fn characteristic_slope_is_rejected_by_name() {
        let raw = RawConfig::parse(
            "xi = 0.5\npi_prime_list = 0, 2.0\nu_grid = 1, 2\nT = 64\ntrials = 100\n",
        )
        .unwrap();
        let cfg = validate(&raw, &SPACELIKE).unwrap();
        let err = run(&cfg, 0).unwrap_err();
        assert!(err.to_string().contains("characteristic direction excluded"));
    }

    #[test]
    fn rejects_zero_xi_and_cone_violations() {
        let check = |s: &str| {
            let raw = RawConfig::parse(s).unwrap();
            run(&validate(&raw, &SPACELIKE).unwrap(), 0)
        };
        assert!(check("xi = 0\npi_prime_list = 0\nu_grid = 1\nT = 64\ntrials = 100\n").is_err());
        // Huge separation at tiny T walks out of the cone.
        assert!(check("xi = 0.9\npi_prime_list = 0\nu_grid = 8\nT = 4\ntrials = 100\n").is_err());
    }

    #[test]
    fn effective_separation_controls_the_offset() {
        // pi' = 0 keeps u_path = u_eff; pi' = 1 with xi = 0.5 doubles it.
        let table = run_protocol(0.5, &[0.0, 1.0], &[0.5], 16.0, 20, 3).unwrap();
        let u_path = table.column("u_path").unwrap();
        assert!((u_path[0] - 0.5).abs() < 1e-12);
        assert!((u_path[1] - 1.0).abs() < 1e-12);
    }
}
