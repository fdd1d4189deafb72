//! Height decorrelation along and off the characteristic direction: per
//! scale T the heights at A = (xi T, T) and a later point B are sampled from
//! one shared noise realization per trial, and the table reports their
//! correlation (rescaled fluctuations), the spread of the difference, and
//! how often the difference stays below T^beta after removing the
//! limit-shape shift.
//!
//! Optional second endpoints ride in the same trials: `u_offset_alt`
//! displaces B sideways by u_offset_alt * T^{2/3} (off-characteristic
//! comparison), `control_tau` adds the same protocol at another tau (the
//! tau = 1 control in the droplet runs).

use png_core::dynamics::{simulate_droplet, simulate_flat, simulate_stationary};
use png_core::geometry::{LimitShape, RescaleSpec, SpaceTimePoint};
use png_core::sampling::RngStream;

use crate::config::Config;
use crate::error::{LabError, LabResult};
use crate::table::{ResultTable, Value};

use super::{checked_grid, checked_trials, mean, par_trials, pearson_ci, sd, stream_for, ROLE_PRIMARY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Geometry {
    Droplet,
    Flat,
    Stationary,
}

impl Geometry {
    pub(crate) fn parse(name: &str) -> LabResult<Self> {
        match name {
            "droplet" => Ok(Geometry::Droplet),
            "flat" => Ok(Geometry::Flat),
            "stationary" => Ok(Geometry::Stationary),
            other => Err(LabError::config(format!(
                "geometry must be droplet, flat, or stationary, got {other:?}"
            ))),
        }
    }

    pub(crate) fn shape(self) -> LimitShape {
        match self {
            Geometry::Droplet => LimitShape::Droplet,
            Geometry::Flat => LimitShape::Flat,
            Geometry::Stationary => LimitShape::Stationary,
        }
    }

    pub(crate) fn heights(
        self,
        t_end: f64,
        queries: &[SpaceTimePoint],
        stream: &RngStream,
    ) -> LabResult<Vec<i64>> {
        Ok(match self {
            Geometry::Droplet => simulate_droplet(t_end, queries, stream)?,
            Geometry::Flat => simulate_flat(t_end, queries, stream)?,
            Geometry::Stationary => simulate_stationary(t_end, queries, stream)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Characteristic,
    FixedX,
    Path,
}

fn parse_direction(name: &str) -> LabResult<Direction> {
    match name {
        "characteristic" => Ok(Direction::Characteristic),
        "fixed_x" => Ok(Direction::FixedX),
        "path" => Ok(Direction::Path),
        other => Err(LabError::config(format!(
            "direction must be characteristic, fixed_x, or path, got {other:?}"
        ))),
    }
}

/// The later endpoint for one (T, tau) cell.
fn endpoint(
    geometry: Geometry,
    direction: Direction,
    xi: f64,
    t_ref: f64,
    tau: f64,
    pi_prime: f64,
    u_offset: f64,
) -> SpaceTimePoint {
    let t_b = t_ref + t_ref.powf(tau);
    match direction {
        Direction::Characteristic => match geometry {
            // The droplet characteristic through (xi T, T) is the ray x = xi t;
            // the flat and stationary ones are vertical.
            Geometry::Droplet => SpaceTimePoint::new(xi * t_b, t_b),
            _ => SpaceTimePoint::new(xi * t_ref, t_b),
        },
        Direction::FixedX => SpaceTimePoint::new(xi * t_ref, t_b),
        Direction::Path => {
            let d = u_offset * t_ref.powf(2.0 / 3.0);
            SpaceTimePoint::new(xi * t_ref + d, t_b + pi_prime * d)
        }
    }
}

struct PairStats {
    corr: f64,
    ci: (f64, f64),
    sd_diff: f64,
    mean_diff: f64,
    shift_pred: f64,
    p_within: f64,
}

/// Correlation and difference statistics for heights at two points sampled
/// from shared noise. `heights` holds per-trial (h_a, h_b).
fn pair_stats(
    heights: &[(i64, i64)],
    a: SpaceTimePoint,
    b: SpaceTimePoint,
    spec: &RescaleSpec,
    threshold: f64,
    seed: u64,
    tag: u32,
) -> LabResult<PairStats> {
    let mut pairs = Vec::with_capacity(heights.len());
    let mut diffs = Vec::with_capacity(heights.len());
    let center_a = a.t * spec.shape.value(a.x / a.t);
    let center_b = b.t * spec.shape.value(b.x / b.t);
    let shift_pred = center_b - center_a;
    let mut within = 0usize;
    for &(ha, hb) in heights {
        let ra = png_core::geometry::rescale_height(ha, a, spec)?;
        let rb = png_core::geometry::rescale_height(hb, b, spec)?;
        pairs.push((ra, rb));
        let raw = (hb - ha) as f64;
        diffs.push(raw - shift_pred);
        if (raw - shift_pred).abs() <= threshold {
            within += 1;
        }
    }
    let (corr, lo, hi) = if diffs.iter().all(|d| *d == diffs[0]) && a == b {
        // Coincident points: identical columns, correlation 1 by definition;
        // the bootstrap would reject the degenerate resamples.
        (1.0, 1.0, 1.0)
    } else {
        pearson_ci(seed, tag, &pairs)?
    };
    Ok(PairStats {
        corr,
        ci: (lo, hi),
        sd_diff: sd(&diffs),
        mean_diff: mean(&diffs) + shift_pred,
        shift_pred,
        p_within: within as f64 / heights.len() as f64,
    })
}

struct Protocol {
    geometry: Geometry,
    xi: f64,
    tau: f64,
    beta: f64,
    direction: Direction,
    pi_prime: f64,
    u_offset: f64,
    u_offset_alt: f64,
    control_tau: f64,
}

impl Protocol {
    fn from_config(cfg: &Config) -> LabResult<Self> {
        let geometry = Geometry::parse(cfg.text("geometry"))?;
        let xi = cfg.real("xi");
        if geometry == Geometry::Droplet && !(xi.abs() < 1.0) {
            return Err(LabError::config(format!(
                "droplet runs need |xi| < 1, got {xi}"
            )));
        }
        let tau = cfg.real("tau");
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(LabError::config(format!("tau = {tau} outside (0, 1]")));
        }
        let control_tau = cfg.real("control_tau");
        if control_tau != 0.0 && !(control_tau > 0.0 && control_tau <= 1.0) {
            return Err(LabError::config(format!(
                "control_tau = {control_tau} outside (0, 1] (0 disables the control)"
            )));
        }
        let direction = parse_direction(cfg.text("direction"))?;
        if direction == Direction::FixedX && geometry == Geometry::Droplet && xi == 0.0 {
            return Err(LabError::config(
                "direction = fixed_x with xi = 0 on the droplet is the characteristic \
                 ray itself; use direction = characteristic or a nonzero xi"
                    .to_string(),
            ));
        }
        Ok(Self {
            geometry,
            xi,
            tau,
            beta: cfg.real("beta"),
            direction,
            pi_prime: cfg.real("pi_prime"),
            u_offset: cfg.real("u_offset"),
            u_offset_alt: cfg.real("u_offset_alt"),
            control_tau,
        })
    }

    /// Query points for scale T: [A, B, B_alt?, B_ctrl?].
    fn points(&self, t_ref: f64) -> Vec<SpaceTimePoint> {
        let a = SpaceTimePoint::new(self.xi * t_ref, t_ref);
        let b = endpoint(
            self.geometry,
            self.direction,
            self.xi,
            t_ref,
            self.tau,
            self.pi_prime,
            self.u_offset,
        );
        let mut points = vec![a, b];
        if self.u_offset_alt != 0.0 {
            let d = self.u_offset_alt * t_ref.powf(2.0 / 3.0);
            points.push(SpaceTimePoint::new(b.x + d, b.t));
        }
        if self.control_tau > 0.0 {
            points.push(endpoint(
                self.geometry,
                self.direction,
                self.xi,
                t_ref,
                self.control_tau,
                self.pi_prime,
                self.u_offset,
            ));
        }
        points
    }
}

pub fn run(cfg: &Config, seed: u64) -> LabResult<ResultTable> {
    let protocol = Protocol::from_config(cfg)?;
    let t_grid = checked_grid("T_grid", cfg.real_list("T_grid"))?;
    let trials = checked_trials(cfg, "trials", 100)?;

    // Fail early on any query outside the droplet cone.
    if protocol.geometry == Geometry::Droplet {
        for &t_ref in &t_grid {
            for p in protocol.points(t_ref) {
                if p.x.abs() > p.t {
                    return Err(LabError::config(format!(
                        "query ({}, {}) lies outside the droplet cone",
                        p.x, p.t
                    )));
                }
            }
        }
    }

    let has_alt = protocol.u_offset_alt != 0.0;
    let has_ctrl = protocol.control_tau > 0.0;
    let mut columns = vec![
        "T",
        "n",
        "corr",
        "ci_lo",
        "ci_hi",
        "sd_diff",
        "sd_diff_scaled",
        "mean_diff",
        "shift_pred",
        "p_within",
    ];
    if has_alt {
        columns.extend_from_slice(&["corr_alt", "alt_ci_lo", "alt_ci_hi"]);
    }
    if has_ctrl {
        columns.extend_from_slice(&["corr_ctrl", "ctrl_ci_lo", "ctrl_ci_hi"]);
    }
    let mut table = ResultTable::new("slow_decorrelation", &columns);

    for (t_idx, &t_ref) in t_grid.iter().enumerate() {
        let points = protocol.points(t_ref);
        let t_end = points.iter().fold(0.0f64, |m, p| m.max(p.t));
        let geometry = protocol.geometry;
        let all: Vec<Vec<i64>> = par_trials(trials, |trial| {
            let stream = stream_for(seed, ROLE_PRIMARY, t_idx as u32, trial);
            geometry.heights(t_end, &points, &stream)
        })?;

        let spec = RescaleSpec::new(protocol.geometry.shape(), t_ref, protocol.xi)?;
        let threshold = t_ref.powf(protocol.beta);
        let take = |i: usize, j: usize| -> Vec<(i64, i64)> {
            all.iter().map(|hs| (hs[i], hs[j])).collect()
        };
        let main = pair_stats(
            &take(0, 1),
            points[0],
            points[1],
            &spec,
            threshold,
            seed,
            t_idx as u32 * 4,
        )?;
        let mut row = vec![
            Value::Real(t_ref),
            Value::Int(trials as i64),
            Value::Real(main.corr),
            Value::Real(main.ci.0),
            Value::Real(main.ci.1),
            Value::Real(main.sd_diff),
            Value::Real(main.sd_diff / t_ref.powf(1.0 / 3.0)),
            Value::Real(main.mean_diff),
            Value::Real(main.shift_pred),
            Value::Real(main.p_within),
        ];
        let mut extra_idx = 2;
        if has_alt {
            let alt = pair_stats(
                &take(0, extra_idx),
                points[0],
                points[extra_idx],
                &spec,
                threshold,
                seed,
                t_idx as u32 * 4 + 1,
            )?;
            row.extend_from_slice(&[
                Value::Real(alt.corr),
                Value::Real(alt.ci.0),
                Value::Real(alt.ci.1),
            ]);
            extra_idx += 1;
        }
        if has_ctrl {
            let ctrl = pair_stats(
                &take(0, extra_idx),
                points[0],
                points[extra_idx],
                &spec,
                threshold,
                seed,
                t_idx as u32 * 4 + 2,
            )?;
            row.extend_from_slice(&[
                Value::Real(ctrl.corr),
                Value::Real(ctrl.ci.0),
                Value::Real(ctrl.ci.1),
            ]);
        }
        table.push(row)?;
    }
    Ok(table)
}
