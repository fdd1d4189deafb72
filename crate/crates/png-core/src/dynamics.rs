//! Event-driven surface dynamics: droplet, flat, and stationary growth, the
//! multilayer (non-intersecting line) extension, and readouts of the line
//! point process and its smoothed functionals.
//!
//! Steps are stored by their intercepts: an up-step born at (x0, t0) sits at
//! x0 - (t - t0) and keeps intercept a = x0 + t0; a down-step sits at
//! x0 + (t - t0) with intercept b = x0 - t0. Two same-kind steps never swap,
//! and an up-step meets a down-step only as its right neighbor, so the alive
//! order is stable and collisions happen only between adjacent (down, up)
//! pairs: each removal/insertion refreshes candidate events in a heap.

use crate::geometry::{
    hyperbola_point, percolation_to_png, GeometryError, PercolationPoint, SpaceTimePoint,
};
use crate::lpp::ChainCounter;
use crate::sampling::{sweep_region, Region, RngStream, SamplingError};
use rand::Rng;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("event at x = {x} outside window ({:?})", window)]
    EventOutsideWindow { x: f64, window: (f64, f64) },
    #[error("event at t = {t} outside [{t_start}, {t_end}]")]
    EventOutsideTimeRange { t: f64, t_start: f64, t_end: f64 },
    #[error("events out of order: ({t0}, {x0}) then ({t1}, {x1})")]
    EventsOutOfOrder { t0: f64, x0: f64, t1: f64, x1: f64 },
    #[error("query (x = {x}, t = {t}) outside the droplet cone or time range")]
    QueryOutsideCone { x: f64, t: f64 },
    #[error("query time {t} outside [0, {t_end}]")]
    QueryOutsideTimeRange { t: f64, t_end: f64 },
    #[error("window half-width {got} below the light-cone requirement {needed}")]
    WindowTooSmall { needed: f64, got: f64 },
    #[error("lowest simulated line at height {lowest} is inside the transition zone (needs < {threshold})")]
    InsufficientDepth { lowest: i64, threshold: f64 },
    #[error("state is at time {state} but the location requires {wanted}")]
    StateTimeMismatch { state: f64, wanted: f64 },
    #[error("multilayer depth must be >= 1, got {0}")]
    BadDepth(usize),
    #[error("lines touch or cross at time {time} between levels {upper} and {lower}")]
    OrderingViolated { time: f64, upper: i32, lower: i32 },
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Snapshot of a single surface at a fixed time: height steps inside a
/// window. Scanning left to right applies +1 at up-step positions (the jump
/// takes effect at the position) and -1 at down-step positions (effective
/// strictly after the position), so a single nucleation's plateau is closed
/// on both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct StepConfiguration {
    pub time: f64,
    pub up_steps: Vec<f64>,
    pub down_steps: Vec<f64>,
    pub left_height: i64,
    pub window: (f64, f64),
}

impl StepConfiguration {
    /// Flat surface at the given height.
    pub fn flat(height: i64, window: (f64, f64), time: f64) -> Self {
        Self {
            time,
            up_steps: Vec::new(),
            down_steps: Vec::new(),
            left_height: height,
            window,
        }
    }

    /// Height at x: left_height + #{up <= x} - #{down < x}.
    pub fn height_at(&self, x: f64) -> i64 {
        let ups = self.up_steps.partition_point(|&p| p <= x) as i64;
        let downs = self.down_steps.partition_point(|&p| p < x) as i64;
        self.left_height + ups - downs
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        for seq in [&self.up_steps, &self.down_steps] {
            for w in seq.windows(2) {
                debug_assert!(w[0] <= w[1], "step positions must be sorted");
            }
            for &p in seq.iter() {
                if !(p > self.window.0 && p < self.window.1) {
                    return Err(DynamicsError::EventOutsideWindow {
                        x: p,
                        window: self.window,
                    });
                }
            }
        }
        Ok(())
    }
}

/// A nucleation: a seed plateau of width zero born at (x, t). Level 0 events
/// come from the Poisson input; level l < 0 events are emitted by collisions
/// at level l + 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NucleationEvent {
    pub x: f64,
    pub t: f64,
    pub level: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Up,
    Down,
}

// Steps remember their birth point; positions are x0 -/+ (now - t0) so the
// two halves of one nucleation can never swap sides under rounding (the
// intercept form (x0 + t0) - now rounds the halves independently and can
// invert a fresh pair by one ulp, opening a spurious dip).
#[derive(Debug, Clone, Copy)]
struct StepRec {
    x0: f64,
    t0: f64,
    kind: Kind,
    alive: bool,
}

impl StepRec {
    #[inline]
    fn intercept(&self) -> f64 {
        match self.kind {
            Kind::Up => self.x0 + self.t0,
            Kind::Down => self.x0 - self.t0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    t: f64,
    x: f64,
    down: u32,
    up: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    // Reversed so the BinaryHeap pops the earliest (t, x) first; ids break
    // exact ties deterministically.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.x.total_cmp(&self.x))
            .then_with(|| other.down.cmp(&self.down))
            .then_with(|| other.up.cmp(&self.up))
    }
}

struct Engine {
    now: f64,
    base_height: i64,
    steps: Vec<StepRec>,
    order: Vec<u32>,
    idx_of: Vec<u32>,
    heap: BinaryHeap<Candidate>,
    collisions: Vec<(f64, f64)>,
}

const DEAD: u32 = u32::MAX;

impl Engine {
    fn from_config(cfg: &StepConfiguration) -> Self {
        let mut steps = Vec::with_capacity(cfg.up_steps.len() + cfg.down_steps.len());
        let mut order = Vec::with_capacity(steps.capacity());
        // Merge by position; an up and a down at the same position stand for
        // a zero-width plateau, up on the left.
        let (mut i, mut j) = (0usize, 0usize);
        while i < cfg.up_steps.len() || j < cfg.down_steps.len() {
            let take_up = match (cfg.up_steps.get(i), cfg.down_steps.get(j)) {
                (Some(&u), Some(&d)) => u <= d,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!(),
            };
            let id = steps.len() as u32;
            if take_up {
                steps.push(StepRec {
                    x0: cfg.up_steps[i],
                    t0: cfg.time,
                    kind: Kind::Up,
                    alive: true,
                });
                i += 1;
            } else {
                steps.push(StepRec {
                    x0: cfg.down_steps[j],
                    t0: cfg.time,
                    kind: Kind::Down,
                    alive: true,
                });
                j += 1;
            }
            order.push(id);
        }
        let idx_of = (0..order.len() as u32).collect();
        let mut engine = Self {
            now: cfg.time,
            base_height: cfg.left_height,
            steps,
            order,
            idx_of,
            heap: BinaryHeap::new(),
            collisions: Vec::new(),
        };
        for i in 0..engine.order.len().saturating_sub(1) {
            engine.push_candidate(i);
        }
        engine
    }

    #[inline]
    fn position(&self, id: u32) -> f64 {
        let s = &self.steps[id as usize];
        let d = self.now - s.t0;
        match s.kind {
            Kind::Up => s.x0 - d,
            Kind::Down => s.x0 + d,
        }
    }

    /// Queue a collision candidate if order[i], order[i+1] is a (down, up)
    /// pair.
    fn push_candidate(&mut self, i: usize) {
        if i + 1 >= self.order.len() {
            return;
        }
        let (d_id, u_id) = (self.order[i], self.order[i + 1]);
        let (d, u) = (&self.steps[d_id as usize], &self.steps[u_id as usize]);
        if d.kind == Kind::Down && u.kind == Kind::Up {
            let t = ((u.intercept() - d.intercept()) / 2.0).max(self.now);
            let x = (u.intercept() + d.intercept()) / 2.0;
            self.heap.push(Candidate {
                t,
                x,
                down: d_id,
                up: u_id,
            });
        }
    }

    /// Process all collisions with time <= t, then move the clock to t.
    fn advance(&mut self, t: f64) {
        while let Some(&c) = self.heap.peek() {
            if c.t > t {
                break;
            }
            self.heap.pop();
            let (d, u) = (c.down as usize, c.up as usize);
            if !self.steps[d].alive || !self.steps[u].alive {
                continue;
            }
            let di = self.idx_of[d] as usize;
            if di + 1 >= self.order.len() || self.order[di + 1] != c.up {
                continue; // stale adjacency; a fresher candidate exists
            }
            self.steps[d].alive = false;
            self.steps[u].alive = false;
            self.idx_of[d] = DEAD;
            self.idx_of[u] = DEAD;
            self.order.drain(di..di + 2);
            for k in di..self.order.len() {
                self.idx_of[self.order[k] as usize] = k as u32;
            }
            self.collisions.push((c.t, c.x));
            if di > 0 {
                self.push_candidate(di - 1);
            }
        }
        debug_assert!(t >= self.now);
        self.now = t;
    }

    /// Insert a nucleation pair at x at the current time. A nucleation on an
    /// existing step's exact position sits on the closed side of that step's
    /// plateau, so the pair lands after co-located up-steps and before
    /// co-located down-steps; co-located steps are always ordered
    /// [ups..., downs...] (a (down, up) order only occurs as a collision,
    /// which the queue resolves before any insertion at that time).
    fn insert_pair(&mut self, x: f64) {
        let idx = {
            let mut lo = 0usize;
            let mut hi = self.order.len();
            while lo < hi {
                let mid = (lo + hi) / 2;
                let id = self.order[mid];
                let pos = self.position(id);
                let before = pos < x
                    || (pos == x && self.steps[id as usize].kind == Kind::Up);
                if before {
                    lo = mid + 1;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let up_id = self.steps.len() as u32;
        self.steps.push(StepRec {
            x0: x,
            t0: self.now,
            kind: Kind::Up,
            alive: true,
        });
        let down_id = self.steps.len() as u32;
        self.steps.push(StepRec {
            x0: x,
            t0: self.now,
            kind: Kind::Down,
            alive: true,
        });
        self.order.splice(idx..idx, [up_id, down_id]);
        self.idx_of.push(0);
        self.idx_of.push(0);
        for k in idx..self.order.len() {
            self.idx_of[self.order[k] as usize] = k as u32;
        }
        if idx > 0 {
            self.push_candidate(idx - 1);
        }
        self.push_candidate(idx + 1);
    }

    fn height_at(&self, x: f64) -> i64 {
        let mut h = self.base_height;
        for &id in &self.order {
            let pos = self.position(id);
            if pos > x {
                break;
            }
            match self.steps[id as usize].kind {
                Kind::Up => h += 1,
                Kind::Down => {
                    if pos < x {
                        h -= 1;
                    }
                }
            }
        }
        h
    }

    /// Snapshot inside the window. Steps at or left of the edge fold into
    /// left_height; steps at or right of the right edge are dropped (they
    /// cannot affect in-window heights).
    fn snapshot(&self, window: (f64, f64)) -> StepConfiguration {
        let mut left = self.base_height;
        let mut ups = Vec::new();
        let mut downs = Vec::new();
        for &id in &self.order {
            let pos = self.position(id);
            let kind = self.steps[id as usize].kind;
            if pos <= window.0 {
                match kind {
                    Kind::Up => left += 1,
                    Kind::Down => left -= 1,
                }
            } else if pos < window.1 {
                match kind {
                    Kind::Up => ups.push(pos),
                    Kind::Down => downs.push(pos),
                }
            }
        }
        StepConfiguration {
            time: self.now,
            up_steps: ups,
            down_steps: downs,
            left_height: left,
            window,
        }
    }

    fn alive_counts(&self) -> (usize, usize) {
        let mut up = 0;
        let mut down = 0;
        for &id in &self.order {
            match self.steps[id as usize].kind {
                Kind::Up => up += 1,
                Kind::Down => down += 1,
            }
        }
        (up, down)
    }
}

/// A surface mid-evolution: the engine plus the not-yet-applied nucleations.
/// Collisions strictly before a nucleation's time are processed first; at
/// equal times collisions win (the nucleation lands on the merged surface).
pub struct SurfaceRun {
    engine: Engine,
    events: Vec<NucleationEvent>,
    next: usize,
    t_end: f64,
    window: (f64, f64),
}

impl SurfaceRun {
    pub fn new(
        initial: &StepConfiguration,
        events: &[NucleationEvent],
        t_end: f64,
    ) -> Result<Self, DynamicsError> {
        initial.validate()?;
        let window = initial.window;
        let mut prev: Option<(f64, f64)> = None;
        for e in events {
            if !(e.x > window.0 && e.x < window.1) {
                return Err(DynamicsError::EventOutsideWindow { x: e.x, window });
            }
            if !(e.t >= initial.time && e.t <= t_end) {
                return Err(DynamicsError::EventOutsideTimeRange {
                    t: e.t,
                    t_start: initial.time,
                    t_end,
                });
            }
            if let Some((pt, px)) = prev {
                if (e.t, e.x) < (pt, px) {
                    return Err(DynamicsError::EventsOutOfOrder {
                        t0: pt,
                        x0: px,
                        t1: e.t,
                        x1: e.x,
                    });
                }
            }
            prev = Some((e.t, e.x));
        }
        Ok(Self {
            engine: Engine::from_config(initial),
            events: events.to_vec(),
            next: 0,
            t_end,
            window,
        })
    }

    /// Applies all dynamics up to and including time t.
    pub fn advance_to(&mut self, t: f64) {
        debug_assert!(t >= self.engine.now && t <= self.t_end);
        while self.next < self.events.len() && self.events[self.next].t <= t {
            let e = self.events[self.next];
            self.next += 1;
            self.engine.advance(e.t);
            self.engine.insert_pair(e.x);
        }
        self.engine.advance(t);
    }

    pub fn time(&self) -> f64 {
        self.engine.now
    }

    pub fn height_at(&self, x: f64) -> i64 {
        self.engine.height_at(x)
    }

    pub fn snapshot(&self) -> StepConfiguration {
        self.engine.snapshot(self.window)
    }

    /// Collisions recorded so far, in processing order: time-ascending with
    /// simultaneous ones left to right.
    pub fn collisions(&self) -> &[(f64, f64)] {
        &self.engine.collisions
    }

    pub fn alive_counts(&self) -> (usize, usize) {
        self.engine.alive_counts()
    }
}

/// Runs the deterministic event dynamics from `initial` through `events`
/// (sorted by (t, x)) and returns the surface at t_end.
pub fn evolve_surface(
    initial: &StepConfiguration,
    events: &[NucleationEvent],
    t_end: f64,
) -> Result<StepConfiguration, DynamicsError> {
    let mut run = SurfaceRun::new(initial, events, t_end)?;
    run.advance_to(t_end);
    Ok(run.snapshot())
}

/// Heights at space-time queries under the event dynamics. Queries may be in
/// any order; events at a query's exact time are applied first.
pub fn surface_heights(
    initial: &StepConfiguration,
    events: &[NucleationEvent],
    queries: &[SpaceTimePoint],
    t_end: f64,
) -> Result<Vec<i64>, DynamicsError> {
    for q in queries {
        if !(q.t >= initial.time && q.t <= t_end) {
            return Err(DynamicsError::QueryOutsideTimeRange {
                t: q.t,
                t_end,
            });
        }
    }
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a].t.total_cmp(&queries[b].t));
    let mut run = SurfaceRun::new(initial, events, t_end)?;
    let mut out = vec![0i64; queries.len()];
    for qi in order {
        run.advance_to(queries[qi].t);
        out[qi] = run.height_at(queries[qi].x);
    }
    Ok(out)
}

fn percolation_targets(queries: &[SpaceTimePoint]) -> Vec<PercolationPoint> {
    queries
        .iter()
        .map(|q| crate::geometry::png_to_percolation(*q))
        .collect()
}

/// Droplet heights h(x, t) = longest chain to (x + t, t - x) on one shared
/// intensity-1 cloud per trial (the default backend; the event-driven route
/// is [`simulate_droplet_dynamics`] and agrees pathwise).
pub fn simulate_droplet(
    t_ref: f64,
    queries: &[SpaceTimePoint],
    stream: &RngStream,
) -> Result<Vec<i64>, DynamicsError> {
    for q in queries {
        if !(q.t >= 0.0 && q.t <= t_ref && q.x.abs() <= q.t) {
            return Err(DynamicsError::QueryOutsideCone { x: q.x, t: q.t });
        }
    }
    let targets = percolation_targets(queries);
    let u_max = targets.iter().fold(0.0f64, |m, p| m.max(p.u));
    let v_max = targets.iter().fold(0.0f64, |m, p| m.max(p.v));
    let origin = PercolationPoint::new(0.0, 0.0);
    let mut counters: Vec<ChainCounter> = targets
        .iter()
        .map(|&t| ChainCounter::point_to_point(origin, t))
        .collect();
    if u_max > 0.0 && v_max > 0.0 {
        let sweep = sweep_region(
            &Region::rect(0.0, u_max, 0.0, v_max),
            1.0,
            stream,
        )?;
        for p in sweep {
            for c in &mut counters {
                c.offer(p);
            }
        }
    }
    Ok(counters.iter().map(|c| c.length() as i64).collect())
}

/// Event-driven twin of [`simulate_droplet`]: identical stream, identical
/// cloud, heights from the surface dynamics.
pub fn simulate_droplet_dynamics(
    t_ref: f64,
    queries: &[SpaceTimePoint],
    stream: &RngStream,
) -> Result<Vec<i64>, DynamicsError> {
    for q in queries {
        if !(q.t >= 0.0 && q.t <= t_ref && q.x.abs() <= q.t) {
            return Err(DynamicsError::QueryOutsideCone { x: q.x, t: q.t });
        }
    }
    let targets = percolation_targets(queries);
    let u_max = targets.iter().fold(0.0f64, |m, p| m.max(p.u));
    let v_max = targets.iter().fold(0.0f64, |m, p| m.max(p.v));
    let mut events: Vec<NucleationEvent> = Vec::new();
    if u_max > 0.0 && v_max > 0.0 {
        let sweep = sweep_region(
            &Region::rect(0.0, u_max, 0.0, v_max),
            1.0,
            stream,
        )?;
        for p in sweep {
            let st = percolation_to_png(p);
            events.push(NucleationEvent {
                x: st.x,
                t: st.t,
                level: 0,
            });
        }
    }
    events.sort_by(|a, b| (a.t, a.x).partial_cmp(&(b.t, b.x)).unwrap());
    let t_max = (u_max + v_max) / 2.0;
    let half = t_max + 5.0;
    let initial = StepConfiguration::flat(0, (-half, half), 0.0);
    surface_heights(&initial, &events, queries, t_max.max(t_ref))
}

/// Flat-start heights via line-to-point chains from {u + v = 0}, one shared
/// cloud per trial covering the union of the queries' backward cones.
pub fn simulate_flat(
    _t_ref: f64,
    queries: &[SpaceTimePoint],
    stream: &RngStream,
) -> Result<Vec<i64>, DynamicsError> {
    let targets = percolation_targets(queries);
    let u_max = targets.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.u));
    let v_max = targets.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.v));
    let mut counters: Vec<ChainCounter> =
        targets.iter().map(|&t| ChainCounter::line_to_point(t)).collect();
    if !targets.is_empty() && u_max + v_max > 0.0 {
        let region = Region::HalfPlaneLineToPoint {
            target: PercolationPoint::new(u_max, v_max),
        };
        for p in sweep_region(&region, 1.0, stream)? {
            for c in &mut counters {
                c.offer(p);
            }
        }
    }
    Ok(counters.iter().map(|c| c.length() as i64).collect())
}

/// One stationary-growth sample: initial up/down steps on [-x_half, x_half]
/// (independent density-1 processes, reference height h(0) = 0) and the bulk
/// nucleation cloud restricted to the queries' bounding backward cone (points
/// outside it cannot influence any query). Draw order is documented and
/// fixed: up steps, then down steps, then bulk.
struct StationarySample {
    up0: Vec<f64>,
    down0: Vec<f64>,
    /// Sorted by u.
    bulk: Vec<PercolationPoint>,
}

fn poisson_line(x_half: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x = -x_half;
    loop {
        let g: f64 = rng.random();
        x += -(1.0 - g).ln();
        if x > x_half {
            return out;
        }
        out.push(x);
    }
}

impl StationarySample {
    fn draw(
        x_half: f64,
        bound: PercolationPoint,
        stream: &RngStream,
    ) -> Result<Self, DynamicsError> {
        let mut rng = stream.rng();
        let up0 = poisson_line(x_half, &mut rng);
        let down0 = poisson_line(x_half, &mut rng);
        let mut bulk = Vec::new();
        if bound.u + bound.v > 0.0 {
            // Reuse the triangle sweep with the already-advanced rng state:
            // rebuild a sweep manually to keep the single-stream draw order.
            let rho = 1.0f64;
            let mut cum = 0.0f64;
            loop {
                let g: f64 = rng.random();
                cum += -(1.0 - g).ln();
                let u = -bound.v + (2.0 * cum / rho).sqrt();
                if u > bound.u {
                    break;
                }
                let v = -u + rng.random::<f64>() * (bound.v + u);
                bulk.push(PercolationPoint::new(u, v));
            }
        }
        Ok(Self { up0, down0, bulk })
    }

    /// h0(y) with the normalization h0(0) = 0.
    #[cfg(test)]
    fn initial_height(&self, y: f64) -> i64 {
        let raw = |z: f64| {
            self.up0.partition_point(|&p| p <= z) as i64
                - self.down0.partition_point(|&p| p < z) as i64
        };
        raw(y) - raw(0.0)
    }
}

/// Sparse-table range-max over the plateaus of a step function.
struct PlateauMax {
    breakpoints: Vec<f64>,
    rows: Vec<Vec<i32>>,
}

impl PlateauMax {
    /// up/down: sorted step positions; base: height left of everything.
    fn build(up: &[f64], down: &[f64], base: i32) -> Self {
        let mut breakpoints = Vec::with_capacity(up.len() + down.len());
        let mut deltas = Vec::with_capacity(up.len() + down.len());
        let (mut i, mut j) = (0usize, 0usize);
        while i < up.len() || j < down.len() {
            let take_up = match (up.get(i), down.get(j)) {
                (Some(&u), Some(&d)) => u <= d,
                (Some(_), None) => true,
                _ => false,
            };
            if take_up {
                breakpoints.push(up[i]);
                deltas.push(1i32);
                i += 1;
            } else {
                breakpoints.push(down[j]);
                deltas.push(-1i32);
                j += 1;
            }
        }
        let mut values = Vec::with_capacity(deltas.len() + 1);
        let mut h = base;
        values.push(h);
        for d in deltas {
            h += d;
            values.push(h);
        }
        let n = values.len();
        let levels = usize::BITS as usize - n.leading_zeros() as usize;
        let mut rows = vec![values];
        for k in 1..levels {
            let prev = &rows[k - 1];
            let half = 1usize << (k - 1);
            let len = n + 1 - (1usize << k);
            let mut row = Vec::with_capacity(len);
            for s in 0..len {
                row.push(prev[s].max(prev[s + half]));
            }
            rows.push(row);
        }
        Self { breakpoints, rows }
    }

    /// Index of the plateau containing y: value index in rows[0].
    fn plateau_index(&self, y: f64) -> usize {
        // Plateau k covers [breakpoints[k-1], breakpoints[k]) for up-steps;
        // the <= / < conventions differ per kind, but up-steps jump AT their
        // position and down-steps after it, which is exactly partition by
        // "position <= y" for ups and "position < y" for downs. Using <= for
        // all breakpoints misclassifies only y sitting exactly on a
        // down-step, where the plateau to the left has the LARGER value, so
        // range maxima over closed intervals are unaffected.
        self.breakpoints.partition_point(|&b| b <= y)
    }

    /// max of the step function over the closed interval [l, r].
    fn range_max(&self, l: f64, r: f64) -> i32 {
        debug_assert!(l <= r);
        let a = self.plateau_index(l);
        let b = self.plateau_index(r);
        let len = b - a + 1;
        let k = (u32::BITS - 1 - (len as u32).leading_zeros()) as usize;
        let row = &self.rows[k];
        row[a].max(row[b + 1 - (1usize << k)])
    }
}

/// Prefix-max Fenwick tree over bucket indices, u16 payload (0 = empty).
struct PrefixMaxTree {
    tree: Vec<u16>,
}

impl PrefixMaxTree {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn update(&mut self, mut i: usize, value: u16) {
        i += 1;
        while i < self.tree.len() {
            if self.tree[i] < value {
                self.tree[i] = value;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Max over bucket indices 0..=i; 0 when empty.
    fn query(&self, i: usize) -> u16 {
        let mut i = (i + 1).min(self.tree.len() - 1);
        let mut best = 0;
        while i > 0 {
            best = best.max(self.tree[i]);
            i -= i & i.wrapping_neg();
        }
        best
    }
}

const STATIONARY_MARGIN: f64 = 10.0;
/// Offset making Fenwick payloads strictly positive (heights can dip below 0).
const HEIGHT_OFFSET: i64 = 4096;

/// Variational evaluation: h(x, t) = max over starting points y in the
/// backward cone of h0(y) plus the best chain of bulk nucleations, computed
/// with a range-max table for h0 and a prefix-max sweep over the bulk cloud.
fn stationary_heights_variational(
    sample: &StationarySample,
    queries: &[SpaceTimePoint],
) -> Vec<i64> {
    // The table works on raw heights with base 0 left of the window; the
    // h0(0) = 0 normalization subtracts raw0 from every term uniformly.
    let raw0 = sample.up0.partition_point(|&p| p <= 0.0) as i32
        - sample.down0.partition_point(|&p| p < 0.0) as i32;
    let plateau = PlateauMax::build(&sample.up0, &sample.down0, 0);

    let targets: Vec<PercolationPoint> = queries
        .iter()
        .map(|q| crate::geometry::png_to_percolation(*q))
        .collect();

    // Bucketized exact prefix-max over v: Fenwick across buckets, chained
    // entries within a bucket (expected O(1) each).
    let n = sample.bulk.len();
    let v_lo = targets
        .iter()
        .map(|t| -t.u)
        .fold(f64::INFINITY, f64::min)
        .min(
            sample
                .bulk
                .iter()
                .map(|p| p.v)
                .fold(f64::INFINITY, f64::min),
        );
    let v_hi = targets
        .iter()
        .map(|t| t.v)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(
            sample
                .bulk
                .iter()
                .map(|p| p.v)
                .fold(f64::NEG_INFINITY, f64::max),
        );
    let buckets = n.max(16);
    let scale = if v_hi > v_lo {
        buckets as f64 / (v_hi - v_lo)
    } else {
        0.0
    };
    let bucket_of = |v: f64| -> usize {
        (((v - v_lo) * scale) as usize).min(buckets - 1)
    };
    let mut fenwick = PrefixMaxTree::new(buckets);
    let mut head = vec![u32::MAX; buckets];
    let mut entries: Vec<(f64, u16, u32)> = Vec::with_capacity(n);

    let prefix_query = |fenwick: &PrefixMaxTree,
                        head: &[u32],
                        entries: &[(f64, u16, u32)],
                        v: f64| -> u16 {
        let b = bucket_of(v);
        let mut best = if b > 0 { fenwick.query(b - 1) } else { 0 };
        let mut e = head[b];
        while e != u32::MAX {
            let (ev, val, next) = entries[e as usize];
            if ev <= v {
                best = best.max(val);
            }
            e = next;
        }
        best
    };

    // Process queries in u order interleaved with the u-sorted bulk sweep.
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a].u.total_cmp(&targets[b].u));
    let mut out = vec![0i64; targets.len()];
    let mut pi = 0usize;
    for qi in order {
        let t = targets[qi];
        while pi < n && sample.bulk[pi].u <= t.u {
            let p = sample.bulk[pi];
            pi += 1;
            let w = plateau.range_max(-p.v, p.u) as i64 - raw0 as i64;
            let pref = prefix_query(&fenwick, &head, &entries, p.v);
            let prev_best = if pref == 0 {
                i64::MIN
            } else {
                pref as i64 - HEIGHT_OFFSET
            };
            let v_val = 1 + w.max(prev_best);
            let shifted = v_val + HEIGHT_OFFSET;
            assert!(shifted > 0 && shifted <= u16::MAX as i64);
            let stored = shifted as u16;
            let b = bucket_of(p.v);
            entries.push((p.v, stored, head[b]));
            head[b] = (entries.len() - 1) as u32;
            fenwick.update(b, stored);
        }
        let boundary = plateau.range_max(-t.v, t.u) as i64 - raw0 as i64;
        let pref = prefix_query(&fenwick, &head, &entries, t.v);
        let chained = if pref == 0 {
            i64::MIN
        } else {
            pref as i64 - HEIGHT_OFFSET
        };
        out[qi] = boundary.max(chained);
    }
    out
}

fn stationary_window(t_end: f64, queries: &[SpaceTimePoint]) -> f64 {
    let max_abs_x = queries.iter().fold(0.0f64, |m, q| m.max(q.x.abs()));
    t_end + max_abs_x + STATIONARY_MARGIN
}

fn validate_stationary_queries(
    t_end: f64,
    queries: &[SpaceTimePoint],
) -> Result<(), DynamicsError> {
    for q in queries {
        if !(q.t >= 0.0 && q.t <= t_end) {
            return Err(DynamicsError::QueryOutsideTimeRange { t: q.t, t_end });
        }
    }
    Ok(())
}

/// Stationary-growth heights with h(0, 0) = 0: initial up/down steps are two
/// independent density-1 Poisson processes on [-X, X] with
/// X = t_end + max|x| + 10, bulk nucleations have space-time intensity 2.
/// Default backend is the variational formula; it agrees pathwise with
/// [`simulate_stationary_dynamics`] on the same stream.
pub fn simulate_stationary(
    t_end: f64,
    queries: &[SpaceTimePoint],
    stream: &RngStream,
) -> Result<Vec<i64>, DynamicsError> {
    simulate_stationary_in_window(t_end, queries, stream, stationary_window(t_end, queries))
}

/// As [`simulate_stationary`] with an explicit window half-width; errors when
/// a query's backward light cone could touch the sampled boundary.
pub fn simulate_stationary_in_window(
    t_end: f64,
    queries: &[SpaceTimePoint],
    stream: &RngStream,
    x_half: f64,
) -> Result<Vec<i64>, DynamicsError> {
    validate_stationary_queries(t_end, queries)?;
    let needed = stationary_window(t_end, queries);
    if x_half < needed {
        return Err(DynamicsError::WindowTooSmall {
            needed,
            got: x_half,
        });
    }
    let bound = bounding_target(queries);
    let sample = StationarySample::draw(x_half, bound, stream)?;
    Ok(stationary_heights_variational(&sample, queries))
}

fn bounding_target(queries: &[SpaceTimePoint]) -> PercolationPoint {
    let u = queries
        .iter()
        .fold(f64::NEG_INFINITY, |m, q| m.max(q.x + q.t));
    let v = queries
        .iter()
        .fold(f64::NEG_INFINITY, |m, q| m.max(q.t - q.x));
    PercolationPoint::new(u, v)
}

/// Event-driven twin of [`simulate_stationary`]: consumes the identical
/// sample (same stream, same draws) and runs the surface dynamics.
pub fn simulate_stationary_dynamics(
    t_end: f64,
    queries: &[SpaceTimePoint],
    stream: &RngStream,
) -> Result<Vec<i64>, DynamicsError> {
    validate_stationary_queries(t_end, queries)?;
    let x_half = stationary_window(t_end, queries);
    let bound = bounding_target(queries);
    let sample = StationarySample::draw(x_half, bound, stream)?;

    let window = (-2.0 * x_half - 1.0, 2.0 * x_half + 1.0);
    let raw0 = sample.up0.partition_point(|&p| p <= 0.0) as i64
        - sample.down0.partition_point(|&p| p < 0.0) as i64;
    let initial = StepConfiguration {
        time: 0.0,
        up_steps: sample.up0.clone(),
        down_steps: sample.down0.clone(),
        left_height: -raw0,
        window,
    };
    let mut events: Vec<NucleationEvent> = sample
        .bulk
        .iter()
        .map(|&p| {
            let st = percolation_to_png(p);
            NucleationEvent {
                x: st.x,
                t: st.t,
                level: 0,
            }
        })
        .collect();
    events.sort_by(|a, b| (a.t, a.x).partial_cmp(&(b.t, b.x)).unwrap());
    let t_max = events.iter().fold(t_end, |m, e| m.max(e.t));
    surface_heights(&initial, &events, queries, t_max)
}

/// The stack of non-intersecting lines: layers[i] is level -i.
#[derive(Debug, Clone)]
pub struct MultilayerState {
    pub time: f64,
    pub layers: Vec<StepConfiguration>,
}

impl MultilayerState {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn level(&self, l: i32) -> &StepConfiguration {
        &self.layers[(-l) as usize]
    }
}

/// Per-level event bookkeeping of a multilayer run.
#[derive(Debug, Clone, Default)]
pub struct MultilayerLog {
    /// nucleations[i]: number of nucleations applied at level -i.
    pub nucleations: Vec<usize>,
    /// collisions[i]: number of collisions recorded at level -i.
    pub collisions: Vec<usize>,
}

/// Default depth covering the smoothed-step support with slack:
/// ceil(4 T^{1/3}) + M ceil(T^{1/3}).
pub fn default_depth(t_ref: f64, m: f64) -> usize {
    let c = t_ref.powf(1.0 / 3.0).ceil();
    (4.0 * t_ref.powf(1.0 / 3.0)).ceil() as usize + (m * c) as usize
}

fn multilayer_run(
    events0: &[NucleationEvent],
    snapshot_times: &[f64],
    depth: usize,
    window: (f64, f64),
    check_ordering: bool,
) -> Result<(Vec<MultilayerState>, MultilayerLog), DynamicsError> {
    if depth == 0 {
        return Err(DynamicsError::BadDepth(depth));
    }
    let mut times = snapshot_times.to_vec();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let t_end = times.last().copied().unwrap_or(0.0);

    let mut log = MultilayerLog::default();
    // snapshots[s][i]: level -i at times[s].
    let mut snapshots: Vec<Vec<StepConfiguration>> = vec![Vec::new(); times.len()];
    let mut events: Vec<NucleationEvent> = events0.to_vec();
    let mut all_events: Vec<Vec<NucleationEvent>> = Vec::new();
    for i in 0..=depth {
        let initial = StepConfiguration::flat(-(i as i64), window, 0.0);
        let mut run = SurfaceRun::new(&initial, &events, t_end)?;
        for (s, &t) in times.iter().enumerate() {
            run.advance_to(t);
            snapshots[s].push(run.snapshot());
        }
        run.advance_to(t_end);
        log.nucleations.push(events.len());
        log.collisions.push(run.collisions().len());
        all_events.push(std::mem::take(&mut events));
        events = run
            .collisions()
            .iter()
            .map(|&(t, x)| NucleationEvent {
                x,
                t,
                level: -(i as i32) - 1,
            })
            .collect();
    }

    if check_ordering {
        verify_ordering(&all_events, t_end, window)?;
    }

    let states = snapshots
        .into_iter()
        .zip(&times)
        .map(|(layers, &time)| MultilayerState { time, layers })
        .collect();
    Ok((states, log))
}

/// Evolves the line stack driven by level-0 nucleations to t_end.
/// `check_ordering` replays the run and verifies strict line ordering at
/// every event time (used by validation suites; the dynamics itself
/// guarantees it by construction).
pub fn evolve_multilayer(
    events0: &[NucleationEvent],
    t_end: f64,
    depth: usize,
    window: (f64, f64),
    check_ordering: bool,
) -> Result<(MultilayerState, MultilayerLog), DynamicsError> {
    let (mut states, log) = multilayer_run(events0, &[t_end], depth, window, check_ordering)?;
    Ok((states.pop().unwrap(), log))
}

/// Multilayer states at several times in one pass (times need not be sorted;
/// returned states follow the sorted order).
pub fn evolve_multilayer_snapshots(
    events0: &[NucleationEvent],
    times: &[f64],
    depth: usize,
    window: (f64, f64),
    check_ordering: bool,
) -> Result<(Vec<MultilayerState>, MultilayerLog), DynamicsError> {
    multilayer_run(events0, times, depth, window, check_ordering)
}

/// min over x of (h_upper(x) - h_lower(x)) for two snapshots at equal time.
fn min_height_gap(upper: &StepConfiguration, lower: &StepConfiguration) -> i64 {
    #[derive(Clone, Copy)]
    struct Ev {
        pos: f64,
        delta: i64,
        at_pos: bool, // applies at the position (ups) vs after it (downs)
        upper: bool,
    }
    let mut evs: Vec<Ev> = Vec::new();
    for (cfg, is_upper) in [(upper, true), (lower, false)] {
        for &p in &cfg.up_steps {
            evs.push(Ev {
                pos: p,
                delta: 1,
                at_pos: true,
                upper: is_upper,
            });
        }
        for &p in &cfg.down_steps {
            evs.push(Ev {
                pos: p,
                delta: -1,
                at_pos: false,
                upper: is_upper,
            });
        }
    }
    evs.sort_by(|a, b| a.pos.total_cmp(&b.pos).then(b.at_pos.cmp(&a.at_pos)));
    let mut gap = upper.left_height - lower.left_height;
    let mut min_gap = gap;
    let mut i = 0;
    while i < evs.len() {
        let pos = evs[i].pos;
        // Apply all at-pos events (ups) at this position, then check the
        // point value, then apply the after-pos events (downs).
        while i < evs.len() && evs[i].pos == pos && evs[i].at_pos {
            gap += if evs[i].upper { evs[i].delta } else { -evs[i].delta };
            i += 1;
        }
        min_gap = min_gap.min(gap);
        while i < evs.len() && evs[i].pos == pos {
            gap += if evs[i].upper { evs[i].delta } else { -evs[i].delta };
            i += 1;
        }
        min_gap = min_gap.min(gap);
    }
    min_gap
}

/// Replays all levels jointly and checks h_{l+1}(x) > h_l(x) for every x at
/// every event time of either level.
fn verify_ordering(
    all_events: &[Vec<NucleationEvent>],
    t_end: f64,
    window: (f64, f64),
) -> Result<(), DynamicsError> {
    for i in 0..all_events.len() - 1 {
        let upper_events = &all_events[i];
        let lower_events = &all_events[i + 1];
        let mut check_times: Vec<f64> = upper_events
            .iter()
            .chain(lower_events.iter())
            .map(|e| e.t)
            .collect();
        check_times.push(t_end);
        check_times.sort_by(|a, b| a.total_cmp(b));
        check_times.dedup();

        let up_init = StepConfiguration::flat(-(i as i64), window, 0.0);
        let lo_init = StepConfiguration::flat(-(i as i64) - 1, window, 0.0);
        let mut up_run = SurfaceRun::new(&up_init, upper_events, t_end)?;
        let mut lo_run = SurfaceRun::new(&lo_init, lower_events, t_end)?;
        for &t in &check_times {
            up_run.advance_to(t);
            lo_run.advance_to(t);
            if min_height_gap(&up_run.snapshot(), &lo_run.snapshot()) < 1 {
                return Err(DynamicsError::OrderingViolated {
                    time: t,
                    upper: -(i as i32),
                    lower: -(i as i32) - 1,
                });
            }
        }
    }
    Ok(())
}

/// Occupation readout at one location: the set of line heights there.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaSample {
    pub location: SpaceTimePoint,
    /// Heights of all simulated lines, descending; pairwise distinct.
    pub occupied_levels: Vec<i64>,
}

/// Occupied levels at each location of a state (locations must sit at the
/// state's time).
pub fn eta_readout(
    state: &MultilayerState,
    locations: &[SpaceTimePoint],
) -> Result<Vec<EtaSample>, DynamicsError> {
    let mut out = Vec::with_capacity(locations.len());
    for &loc in locations {
        if loc.t != state.time {
            return Err(DynamicsError::StateTimeMismatch {
                state: state.time,
                wanted: loc.t,
            });
        }
        let occupied: Vec<i64> = state.layers.iter().map(|l| l.height_at(loc.x)).collect();
        debug_assert!(occupied.windows(2).all(|w| w[0] > w[1]), "lines must stay ordered");
        out.push(EtaSample {
            location: loc,
            occupied_levels: occupied,
        });
    }
    Ok(out)
}

/// Smooth monotone 0-to-1 step with exact saturation outside [-M, M]:
/// f(x) = N(x) / (N(x) + N(-x)), N(x) = exp(-1/(x+M)).
#[derive(Debug, Clone)]
pub struct SmoothedStep {
    pub m: f64,
    derivative_bound: f64,
}

impl SmoothedStep {
    pub fn new(m: f64) -> Self {
        assert!(m > 0.0, "smoothing half-width must be positive");
        let mut step = Self {
            m,
            derivative_bound: 0.0,
        };
        // Dense scan for sup |f'|; f' is smooth and vanishes at the edges.
        let n = 200_000;
        let mut best = 0.0f64;
        for i in 1..n {
            let x = -m + 2.0 * m * i as f64 / n as f64;
            best = best.max(step.derivative(x));
        }
        step.derivative_bound = best;
        step
    }

    pub fn f(&self, x: f64) -> f64 {
        if x <= -self.m {
            0.0
        } else if x >= self.m {
            1.0
        } else {
            let a = (-1.0 / (x + self.m)).exp();
            let b = (-1.0 / (self.m - x)).exp();
            a / (a + b)
        }
    }

    /// f'(x), analytic on (-M, M), zero outside.
    pub fn derivative(&self, x: f64) -> f64 {
        if x.abs() >= self.m {
            return 0.0;
        }
        let a = (-1.0 / (x + self.m)).exp();
        let b = (-1.0 / (self.m - x)).exp();
        let da = a / ((x + self.m) * (x + self.m));
        let db = b / ((self.m - x) * (self.m - x));
        (da * b + a * db) / ((a + b) * (a + b))
    }

    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    /// The scale-T version f_T(j) = f((j - 2T) / T^{1/3}).
    pub fn f_scaled(&self, j: f64, t_ref: f64) -> f64 {
        self.f((j - 2.0 * t_ref) / t_ref.powf(1.0 / 3.0))
    }
}

/// Sum of f_T over occupied levels at the hyperbola point with angle
/// u T^{-1/3}; the state must be evolved to that point's time and deep
/// enough that the lowest line is strictly below the transition zone.
pub fn eta_smoothed(
    state: &MultilayerState,
    u: f64,
    step: &SmoothedStep,
    t_ref: f64,
) -> Result<f64, DynamicsError> {
    let hp = hyperbola_point(t_ref, u * t_ref.powf(-1.0 / 3.0))?;
    let loc = hp.point;
    if (state.time - loc.t).abs() > 1e-9 * (1.0 + loc.t.abs()) {
        return Err(DynamicsError::StateTimeMismatch {
            state: state.time,
            wanted: loc.t,
        });
    }
    let mut sum = 0.0;
    let mut lowest = i64::MAX;
    for layer in &state.layers {
        let h = layer.height_at(loc.x);
        lowest = lowest.min(h);
        sum += step.f_scaled(h as f64, t_ref);
    }
    let threshold = 2.0 * t_ref - step.m * t_ref.powf(1.0 / 3.0);
    if lowest as f64 > threshold {
        return Err(DynamicsError::InsufficientDepth { lowest, threshold });
    }
    Ok(sum)
}

/// Weighted occupation sum with an arbitrary level weight (low-level helper
/// behind [`eta_smoothed`]).
pub fn eta_weighted(
    state: &MultilayerState,
    x: f64,
    weight: impl Fn(i64) -> f64,
) -> f64 {
    state
        .layers
        .iter()
        .map(|l| weight(l.height_at(x)))
        .sum()
}

/// Droplet nucleation events (|x| <= t <= t_max, space-time intensity 2)
/// sampled directly in time order via a quadratic-measure sweep: the k-th
/// arrival time is sqrt(cum/2) where cum accumulates unit-rate exponentials
/// over the cone measure, and x is then uniform on [-t, t].
pub fn sample_droplet_events(
    t_max: f64,
    stream: &RngStream,
) -> Vec<NucleationEvent> {
    let mut rng = stream.rng();
    let mut out = Vec::new();
    if t_max <= 0.0 {
        return out;
    }
    let mut cum = 0.0f64;
    loop {
        let g: f64 = rng.random();
        cum += -(1.0 - g).ln();
        // Cumulative cone measure is 2 t^2 (intensity 2 over width 2t).
        let t = (cum / 2.0).sqrt();
        if t > t_max {
            return out;
        }
        let x = (2.0 * rng.random::<f64>() - 1.0) * t;
        out.push(NucleationEvent { x, t, level: 0 });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::png_to_percolation;
    use crate::sampling::{sample_region, substream};
    use crate::stats::{ks_two_sample, EmpiricalDistribution};
    use proptest::prelude::*;

    fn pt(x: f64, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(x, t)
    }

    fn flat0(half: f64) -> StepConfiguration {
        StepConfiguration::flat(0, (-half, half), 0.0)
    }

    #[test]
    fn single_nucleation_plateau_is_closed() {
        let ev = [NucleationEvent {
            x: 1.0,
            t: 2.0,
            level: 0,
        }];
        let cfg = evolve_surface(&flat0(20.0), &ev, 5.0).unwrap();
        assert_eq!(cfg.up_steps, vec![-2.0]);
        assert_eq!(cfg.down_steps, vec![4.0]);
        assert_eq!(cfg.left_height, 0);
        assert_eq!(cfg.height_at(-2.0), 1);
        assert_eq!(cfg.height_at(4.0), 1);
        assert_eq!(cfg.height_at(-2.0 - 1e-12), 0);
        assert_eq!(cfg.height_at(4.0 + 1e-12), 0);
        assert_eq!(cfg.height_at(1.0), 1);

        // At the nucleation instant the plateau is the single point x0.
        let h = surface_heights(
            &flat0(20.0),
            &ev,
            &[pt(1.0, 2.0), pt(1.0 + 1e-9, 2.0), pt(1.0, 1.999_999)],
            5.0,
        )
        .unwrap();
        assert_eq!(h, vec![1, 0, 0]);
    }

    #[test]
    fn two_nucleations_collide_and_merge() {
        let evs = [
            NucleationEvent {
                x: -1.0,
                t: 1.0,
                level: 0,
            },
            NucleationEvent {
                x: 1.0,
                t: 1.0,
                level: 0,
            },
        ];
        let mut run = SurfaceRun::new(&flat0(30.0), &evs, 3.0).unwrap();
        run.advance_to(3.0);
        assert_eq!(run.collisions(), &[(2.0, 0.0)]);
        let cfg = run.snapshot();
        assert_eq!(cfg.up_steps, vec![-3.0]);
        assert_eq!(cfg.down_steps, vec![3.0]);
        assert_eq!(cfg.height_at(0.0), 1);
    }

    #[test]
    fn multilayer_cascade_from_two_nucleations() {
        let evs = [
            NucleationEvent {
                x: -1.0,
                t: 1.0,
                level: 0,
            },
            NucleationEvent {
                x: 1.0,
                t: 1.0,
                level: 0,
            },
        ];
        let (state, log) = evolve_multilayer(&evs, 3.0, 3, (-30.0, 30.0), true).unwrap();
        assert_eq!(log.nucleations, vec![2, 1, 0, 0]);
        assert_eq!(log.collisions, vec![1, 0, 0, 0]);
        // Level -1 nucleated at (0, 2); by t = 3 its plateau is [-1, 1] at
        // height 0 on a background of -1.
        let lvl1 = state.level(-1);
        assert_eq!(lvl1.height_at(0.0), 0);
        assert_eq!(lvl1.height_at(1.0), 0);
        assert_eq!(lvl1.height_at(-1.0), 0);
        assert_eq!(lvl1.height_at(1.5), -1);
        assert_eq!(state.level(-2).height_at(0.0), -2);
    }

    #[test]
    fn zero_width_plateau_in_initial_config() {
        let cfg0 = StepConfiguration {
            time: 0.0,
            up_steps: vec![1.0],
            down_steps: vec![1.0],
            left_height: 0,
            window: (-10.0, 10.0),
        };
        assert_eq!(cfg0.height_at(1.0), 1);
        let cfg = evolve_surface(&cfg0, &[], 2.0).unwrap();
        assert_eq!(cfg.up_steps, vec![-1.0]);
        assert_eq!(cfg.down_steps, vec![3.0]);
        assert_eq!(cfg.height_at(0.0), 1);
    }

    #[test]
    fn evolve_surface_input_validation() {
        let bad_window = evolve_surface(
            &flat0(5.0),
            &[NucleationEvent {
                x: 7.0,
                t: 1.0,
                level: 0,
            }],
            2.0,
        );
        assert!(matches!(
            bad_window,
            Err(DynamicsError::EventOutsideWindow { .. })
        ));

        let bad_time = evolve_surface(
            &flat0(5.0),
            &[NucleationEvent {
                x: 0.0,
                t: 3.0,
                level: 0,
            }],
            2.0,
        );
        assert!(matches!(
            bad_time,
            Err(DynamicsError::EventOutsideTimeRange { .. })
        ));

        let unsorted = evolve_surface(
            &flat0(5.0),
            &[
                NucleationEvent {
                    x: 0.0,
                    t: 1.0,
                    level: 0,
                },
                NucleationEvent {
                    x: 0.0,
                    t: 0.5,
                    level: 0,
                },
            ],
            2.0,
        );
        assert!(matches!(
            unsorted,
            Err(DynamicsError::EventsOutOfOrder { .. })
        ));
    }

    #[test]
    fn droplet_queries_validated() {
        let s = substream(1, 0);
        assert_eq!(simulate_droplet(4.0, &[pt(0.0, 0.0)], &s).unwrap(), vec![0]);
        assert!(matches!(
            simulate_droplet(4.0, &[pt(0.5, 0.2)], &s),
            Err(DynamicsError::QueryOutsideCone { .. })
        ));
        assert!(matches!(
            simulate_droplet(4.0, &[pt(0.0, 5.0)], &s),
            Err(DynamicsError::QueryOutsideCone { .. })
        ));
    }

    #[test]
    fn droplet_dynamics_matches_lpp_backend() {
        let t_ref = 6.0;
        let mut queries = Vec::new();
        for &t in &[1.5, 3.0, 4.5, 6.0] {
            for &f in &[-0.8, -0.3, 0.0, 0.4, 0.9] {
                queries.push(pt(f * t, t));
            }
        }
        for seed in 0..50 {
            let s = substream(42, seed);
            let a = simulate_droplet(t_ref, &queries, &s).unwrap();
            let b = simulate_droplet_dynamics(t_ref, &queries, &s).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn droplet_growth_rate_at_t64() {
        let t_ref = 64.0;
        let q = [pt(0.0, t_ref)];
        let mut sum = 0.0;
        let n = 1000;
        for trial in 0..n {
            let s = substream(7001, trial);
            sum += simulate_droplet(t_ref, &q, &s).unwrap()[0] as f64;
        }
        let mean = sum / n as f64 / t_ref;
        assert!(
            (1.87..1.905).contains(&mean),
            "mean h(0,T)/T = {mean} outside the expected band"
        );
    }

    #[test]
    fn flat_dominates_droplet_on_shared_cloud() {
        for seed in 0..20 {
            let s = substream(300, seed);
            let target = PercolationPoint::new(12.0, 12.0);
            let cloud = sample_region(
                &Region::HalfPlaneLineToPoint { target },
                1.0,
                &s,
            )
            .unwrap();
            let mut from_line = ChainCounter::line_to_point(target);
            let mut from_origin =
                ChainCounter::point_to_point(PercolationPoint::new(0.0, 0.0), target);
            for &p in &cloud.points {
                from_line.offer(p);
                from_origin.offer(p);
            }
            assert!(from_line.length() >= from_origin.length());
        }
    }

    #[test]
    fn flat_growth_rate_at_t64() {
        let t_ref = 64.0;
        let q = [pt(0.0, t_ref)];
        let mut sum = 0.0;
        let n = 1000;
        for trial in 0..n {
            let s = substream(7002, trial);
            sum += simulate_flat(t_ref, &q, &s).unwrap()[0] as f64;
        }
        let mean = sum / n as f64 / t_ref;
        assert!(
            (1.925..1.955).contains(&mean),
            "flat mean h(0,T)/T = {mean} outside the expected band"
        );
    }

    #[test]
    fn flat_dynamics_matches_line_to_point() {
        let t_ref = 6.0;
        let queries = [pt(0.0, 6.0), pt(2.0, 5.0), pt(-1.0, 3.0)];
        for seed in 0..50 {
            let s = substream(301, seed);
            let lpp = simulate_flat(t_ref, &queries, &s).unwrap();

            // Same stream, same region, fed through the event dynamics.
            let targets: Vec<PercolationPoint> =
                queries.iter().map(|&q| png_to_percolation(q)).collect();
            let u_max = targets.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.u));
            let v_max = targets.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.v));
            let cloud = sample_region(
                &Region::HalfPlaneLineToPoint {
                    target: PercolationPoint::new(u_max, v_max),
                },
                1.0,
                &s,
            )
            .unwrap();
            let mut events: Vec<NucleationEvent> = cloud
                .points
                .iter()
                .map(|&p| {
                    let st = percolation_to_png(p);
                    NucleationEvent {
                        x: st.x,
                        t: st.t,
                        level: 0,
                    }
                })
                .collect();
            events.sort_by(|a, b| (a.t, a.x).partial_cmp(&(b.t, b.x)).unwrap());
            let t_max = events.iter().fold(t_ref, |m, e| m.max(e.t));
            let half = t_max + u_max.abs() + v_max.abs() + 5.0;
            let dyn_h = surface_heights(&flat0(half), &events, &queries, t_max).unwrap();
            assert_eq!(lpp, dyn_h, "seed {seed}");
        }
    }

    #[test]
    fn stationary_variational_equals_dynamics() {
        let queries = [
            pt(0.0, 8.0),
            pt(2.0, 5.0),
            pt(-3.0, 8.0),
            pt(0.0, 0.0),
            pt(1.5, 0.0),
            pt(-4.0, 2.5),
        ];
        for seed in 0..40 {
            let s = substream(555, seed);
            let a = simulate_stationary(8.0, &queries, &s).unwrap();
            let b = simulate_stationary_dynamics(8.0, &queries, &s).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn stationary_pins_origin_and_flat_increments() {
        let n = 2000;
        let mut inc_sum = 0.0;
        for trial in 0..n {
            let s = substream(556, trial);
            let h = simulate_stationary(1.0, &[pt(0.0, 0.0), pt(5.0, 0.0)], &s).unwrap();
            assert_eq!(h[0], 0, "h(0,0) must be 0");
            inc_sum += h[1] as f64;
        }
        let mean = inc_sum / n as f64;
        assert!(
            mean.abs() < 0.25,
            "initial increments should be centered, got mean {mean}"
        );
    }

    #[test]
    fn stationary_growth_rate() {
        let l = 32.0;
        let n = 2000;
        let mut sum = 0.0;
        for trial in 0..n {
            let s = substream(557, trial);
            sum += simulate_stationary(l, &[pt(0.0, l)], &s).unwrap()[0] as f64;
        }
        let ratio = sum / n as f64 / (2.0 * l);
        assert!(
            (ratio - 1.0).abs() < 0.01,
            "stationary rate should be 2, got mean/2L = {ratio}"
        );
    }

    #[test]
    fn stationary_increments_are_time_stationary() {
        let l = 16.0;
        let t0 = 48.0;
        let n = 1500;
        let mut late = Vec::with_capacity(n);
        let mut fresh = Vec::with_capacity(n);
        for trial in 0..n {
            let s = substream(558, trial as u64);
            let h = simulate_stationary(t0 + l, &[pt(0.0, t0), pt(0.0, t0 + l)], &s).unwrap();
            late.push((h[1] - h[0]) as f64);
            let s2 = substream(559, trial as u64);
            fresh.push(simulate_stationary(l, &[pt(0.0, l)], &s2).unwrap()[0] as f64);
        }
        let a = EmpiricalDistribution::new(late).unwrap();
        let b = EmpiricalDistribution::new(fresh).unwrap();
        let (d, p_value) = ks_two_sample(&a, &b).unwrap();
        assert!(
            p_value > 0.005,
            "increment law drifted: D = {d}, p = {p_value}"
        );
    }

    #[test]
    fn stationary_window_check() {
        let r = simulate_stationary_in_window(10.0, &[pt(3.0, 10.0)], &substream(1, 1), 20.0);
        assert!(matches!(r, Err(DynamicsError::WindowTooSmall { .. })));
    }

    #[test]
    fn multilayer_top_layer_is_the_single_layer_surface() {
        for seed in 0..30 {
            let s = substream(600, seed);
            let events = sample_droplet_events(8.0, &s);
            let window = (-15.0, 15.0);
            let single = evolve_surface(
                &StepConfiguration::flat(0, window, 0.0),
                &events,
                8.0,
            )
            .unwrap();
            let (state, log) = evolve_multilayer(&events, 8.0, 4, window, false).unwrap();
            assert_eq!(state.layers[0], single, "seed {seed}");
            for i in 0..4 {
                assert_eq!(log.nucleations[i + 1], log.collisions[i]);
            }
        }
    }

    #[test]
    fn multilayer_ordering_verified_on_droplet_runs() {
        for seed in 0..20 {
            let s = substream(601, seed);
            let events = sample_droplet_events(8.0, &s);
            let r = evolve_multilayer(&events, 8.0, 3, (-15.0, 15.0), true);
            assert!(r.is_ok(), "seed {seed}: {:?}", r.err());
        }
    }

    #[test]
    fn multilayer_conserves_step_pairs() {
        let s = substream(602, 0);
        let events = sample_droplet_events(6.0, &s);
        let (state, _) = evolve_multilayer(&events, 6.0, 3, (-12.0, 12.0), false).unwrap();
        for layer in &state.layers {
            assert_eq!(layer.up_steps.len(), layer.down_steps.len());
        }
    }

    #[test]
    fn eta_readout_levels_are_distinct_and_ordered() {
        let evs = [
            NucleationEvent {
                x: -1.0,
                t: 1.0,
                level: 0,
            },
            NucleationEvent {
                x: 1.0,
                t: 1.0,
                level: 0,
            },
        ];
        let (state, _) = evolve_multilayer(&evs, 3.0, 3, (-30.0, 30.0), false).unwrap();
        let samples = eta_readout(&state, &[pt(0.0, 3.0), pt(2.5, 3.0)]).unwrap();
        assert_eq!(samples[0].occupied_levels, vec![1, 0, -2, -3]);
        assert_eq!(samples[1].occupied_levels, vec![1, -1, -2, -3]);
        assert!(matches!(
            eta_readout(&state, &[pt(0.0, 2.0)]),
            Err(DynamicsError::StateTimeMismatch { .. })
        ));
    }

    #[test]
    fn smoothed_step_shape() {
        let f = SmoothedStep::new(2.0);
        assert_eq!(f.f(-2.0), 0.0);
        assert_eq!(f.f(2.0), 1.0);
        assert_eq!(f.f(-5.0), 0.0);
        assert_eq!(f.f(7.0), 1.0);
        assert!((f.f(0.0) - 0.5).abs() < 1e-15);
        let mut prev = -1.0;
        for i in 0..=400 {
            let x = -2.5 + 5.0 * i as f64 / 400.0;
            let y = f.f(x);
            assert!(y >= prev, "f must be monotone");
            assert!((0.0..=1.0).contains(&y));
            prev = y;
        }
        // The derivative peaks off-center, near |x| = 1.6 for M = 2.
        let b = f.derivative_bound();
        assert!(b > f.derivative(1.6) - 1e-9);
        assert!((0.5..0.6).contains(&b), "sup |f'| = {b}");
        // Scale-T version: midpoint at 2T, saturation at 2T + M T^{1/3}.
        let t_ref = 27.0;
        assert!((f.f_scaled(54.0, t_ref) - 0.5).abs() < 1e-15);
        assert_eq!(f.f_scaled(54.0 + 2.0 * 3.0, t_ref), 1.0);
        assert_eq!(f.f_scaled(54.0 - 2.0 * 3.0, t_ref), 0.0);
    }

    #[test]
    fn eta_smoothed_counts_transition_lines() {
        // Tiny scale: only the top line sits in the transition zone.
        let t_ref = 0.1;
        let (state, _) =
            evolve_multilayer(&[], t_ref, 2, (-5.0, 5.0), false).unwrap();
        let f = SmoothedStep::new(2.0);
        let v = eta_smoothed(&state, 0.0, &f, t_ref).unwrap();
        assert!((0.40..0.48).contains(&v), "got {v}");

        // All-ones weight counts every simulated line.
        assert_eq!(eta_weighted(&state, 0.0, |_| 1.0), 3.0);
    }

    #[test]
    fn eta_smoothed_rejects_shallow_stacks() {
        // A wide transition zone reaches below the deepest simulated line:
        // with t_ref = 0.01 and M = 20 the zone bottom sits near -4.3 while
        // a depth-1 stack only reaches -1.
        let t_ref = 0.01;
        let wide = SmoothedStep::new(20.0);
        let (state, _) = evolve_multilayer(&[], t_ref, 1, (-5.0, 5.0), false).unwrap();
        assert!(matches!(
            eta_smoothed(&state, 0.0, &wide, t_ref),
            Err(DynamicsError::InsufficientDepth { .. })
        ));

        // A realistic stack at the default depth passes the check.
        let t_big = 8.0;
        let s = substream(603, 5);
        let events = sample_droplet_events(t_big, &s);
        let f = SmoothedStep::new(2.0);
        let depth = default_depth(t_big, 2.0);
        let hp = hyperbola_point(t_big, 0.0).unwrap();
        let (deep, _) =
            evolve_multilayer(&events, hp.point.t, depth, (-20.0, 20.0), false).unwrap();
        let v = eta_smoothed(&deep, 0.0, &f, t_big).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn eta_smoothed_time_mismatch() {
        let (state, _) = evolve_multilayer(&[], 1.0, 2, (-5.0, 5.0), false).unwrap();
        let f = SmoothedStep::new(2.0);
        assert!(matches!(
            eta_smoothed(&state, 0.0, &f, 8.0),
            Err(DynamicsError::StateTimeMismatch { .. })
        ));
    }

    #[test]
    fn droplet_event_sampler_law() {
        let t_max = 3.0;
        let mut counts = Vec::new();
        let mut scaled_times = Vec::new();
        for trial in 0..3000u64 {
            let s = substream(604, trial);
            let evs = sample_droplet_events(t_max, &s);
            counts.push(evs.len() as f64);
            for w in evs.windows(2) {
                assert!(w[0].t <= w[1].t, "events must be time-sorted");
            }
            for e in &evs {
                assert!(e.x.abs() <= e.t && e.t <= t_max);
                if trial < 200 {
                    scaled_times.push((e.t / t_max).powi(2));
                }
            }
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let expect = 2.0 * t_max * t_max;
        let se = (expect / counts.len() as f64).sqrt();
        assert!(
            (mean - expect).abs() < 5.0 * se,
            "count mean {mean} vs {expect}"
        );
        // (t/T)^2 is uniform under the cone measure.
        scaled_times.sort_by(|a, b| a.total_cmp(b));
        let n = scaled_times.len() as f64;
        let mut d = 0.0f64;
        for (i, &v) in scaled_times.iter().enumerate() {
            d = d.max((v - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - v).abs());
        }
        assert!(d * n.sqrt() < 2.2, "time law KS statistic too large: {d}");
    }

    #[test]
    fn stationary_sample_initial_height_normalized() {
        let s = substream(605, 3);
        let sample =
            StationarySample::draw(20.0, PercolationPoint::new(10.0, 10.0), &s).unwrap();
        assert_eq!(sample.initial_height(0.0), 0);
        // Reference height counts ups at or left of y, downs strictly left.
        if let Some(&p) = sample.up0.first() {
            assert_eq!(
                sample.initial_height(p) - sample.initial_height(p - 1e-9),
                1
            );
        }
    }

    proptest! {
        // The event dynamics reproduces last-passage values for arbitrary
        // small clouds, not just Poisson ones.
        #[test]
        fn dynamics_equals_lpp_on_random_clouds(
            raw in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0), 0..40),
            q in prop::collection::vec((0.0f64..8.0, 0.0f64..8.0), 1..6),
        ) {
            let mut events: Vec<NucleationEvent> = raw
                .iter()
                .map(|&(u, v)| {
                    let st = percolation_to_png(PercolationPoint::new(u, v));
                    NucleationEvent { x: st.x, t: st.t, level: 0 }
                })
                .collect();
            events.sort_by(|a, b| (a.t, a.x).partial_cmp(&(b.t, b.x)).unwrap());
            let queries: Vec<SpaceTimePoint> = q
                .iter()
                .map(|&(u, v)| percolation_to_png(PercolationPoint::new(u, v)))
                .collect();
            let heights = surface_heights(
                &StepConfiguration::flat(0, (-20.0, 20.0), 0.0),
                &events,
                &queries,
                8.0,
            )
            .unwrap();
            let mut sorted = raw.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (qi, &(u, v)) in q.iter().enumerate() {
                let mut counter = ChainCounter::point_to_point(
                    PercolationPoint::new(0.0, 0.0),
                    PercolationPoint::new(u, v),
                );
                for &(pu, pv) in &sorted {
                    counter.offer(PercolationPoint::new(pu, pv));
                }
                prop_assert_eq!(heights[qi], counter.length() as i64);
            }
        }

        // Pair conservation and reproducibility of the evolved surface.
        #[test]
        fn droplet_evolution_is_deterministic(seed in 0u64..500) {
            let s = substream(606, seed);
            let events = sample_droplet_events(5.0, &s);
            let cfg1 = evolve_surface(&StepConfiguration::flat(0, (-11.0, 11.0), 0.0), &events, 5.0).unwrap();
            let cfg2 = evolve_surface(&StepConfiguration::flat(0, (-11.0, 11.0), 0.0), &events, 5.0).unwrap();
            prop_assert_eq!(&cfg1, &cfg2);
            prop_assert_eq!(cfg1.up_steps.len(), cfg1.down_steps.len());
        }
    }
}
