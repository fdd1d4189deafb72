//! Coordinate frames, limit shapes, characteristics, and the rescalings that
//! connect surface space-time to the percolation picture and to fluctuation
//! coordinates.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("xi = {0} must lie strictly inside (-1, 1)")]
    XiOutOfRange(f64),
    #[error("theta = {0} must lie strictly inside (-pi/4, pi/4)")]
    ThetaOutOfRange(f64),
    #[error("time t = {0} must be positive")]
    NonpositiveTime(f64),
    #[error("path slope pi' = {pi_prime} rejected: {reason}")]
    BadPathSlope { pi_prime: f64, reason: &'static str },
}

/// A point (x, t) of growth space-time; t >= 0 in simulations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: f64, t: f64) -> Self {
        Self { x, t }
    }
}

/// A point in the rotated percolation frame. Points of the droplet cone land
/// in the quadrant u >= 0, v >= 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolationPoint {
    pub u: f64,
    pub v: f64,
}

impl PercolationPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Weak componentwise order: chains of the percolation picture are
    /// sequences increasing in this order.
    pub fn dominates(&self, other: &PercolationPoint) -> bool {
        self.u >= other.u && self.v >= other.v
    }
}

/// (u, v) = (x + t, t - x). Composes the quarter-turn with the sqrt(2) zoom,
/// so intensity-2 space-time measure becomes intensity 1 (Jacobian 2): no
/// extra 1/sqrt(2) anywhere downstream.
pub fn png_to_percolation(p: SpaceTimePoint) -> PercolationPoint {
    PercolationPoint::new(p.x + p.t, p.t - p.x)
}

/// Inverse of [`png_to_percolation`].
pub fn percolation_to_png(q: PercolationPoint) -> SpaceTimePoint {
    SpaceTimePoint::new((q.u - q.v) / 2.0, (q.u + q.v) / 2.0)
}

/// Macroscopic growth profile per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitShape {
    Droplet,
    Flat,
    Stationary,
}

impl LimitShape {
    /// h_ma at slope parameter xi: the droplet gives 2 sqrt(1 - xi^2) inside
    /// the cone and 0 outside; flat and stationary growth have constant rate 2.
    pub fn value(self, xi: f64) -> f64 {
        match self {
            LimitShape::Droplet => {
                let s = 1.0 - xi * xi;
                if s > 0.0 {
                    2.0 * s.sqrt()
                } else {
                    0.0
                }
            }
            LimitShape::Flat | LimitShape::Stationary => 2.0,
        }
    }

    /// d/dxi of the droplet profile; the macroscopic surface slope feeding
    /// [`kinematics`]. Flat and stationary surfaces have slope 0.
    pub fn slope(self, xi: f64) -> f64 {
        match self {
            LimitShape::Droplet => {
                let s = 1.0 - xi * xi;
                if s > 0.0 {
                    -2.0 * xi / s.sqrt()
                } else {
                    0.0
                }
            }
            LimitShape::Flat | LimitShape::Stationary => 0.0,
        }
    }
}

/// Local growth kinematics at surface slope u: effective velocity and the
/// characteristic velocity dx/dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicSpec {
    pub surface_slope: f64,
    pub v_eff: f64,
    pub a: f64,
}

/// v_eff = sqrt(4 + u^2), a = -u / sqrt(4 + u^2). a is odd in the slope and
/// |a| < 1 for every finite slope.
pub fn kinematics(surface_slope: f64) -> CharacteristicSpec {
    let v_eff = (4.0 + surface_slope * surface_slope).sqrt();
    CharacteristicSpec {
        surface_slope,
        v_eff,
        a: -surface_slope / v_eff,
    }
}

/// Fluctuation rescaling constants at reference time T and position parameter
/// xi: heights are divided by kappa_v T^{1/3}, transversal distances by
/// kappa_h T^{2/3}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaleSpec {
    pub t_ref: f64,
    pub xi: f64,
    pub kappa_v: f64,
    pub kappa_h: f64,
    pub shape: LimitShape,
}

impl RescaleSpec {
    /// Droplet: kappa_v = (1-xi^2)^{1/6}, kappa_h = (1-xi^2)^{5/6}. Flat:
    /// 2^{1/3} and 2^{2/3}. Stationary correlations are scale-free here, so
    /// both constants are set to 1 by convention.
    pub fn new(shape: LimitShape, t_ref: f64, xi: f64) -> Result<Self, GeometryError> {
        if t_ref <= 0.0 {
            return Err(GeometryError::NonpositiveTime(t_ref));
        }
        let (kappa_v, kappa_h) = match shape {
            LimitShape::Droplet => {
                if !(xi.abs() < 1.0) {
                    return Err(GeometryError::XiOutOfRange(xi));
                }
                let s = 1.0 - xi * xi;
                (s.powf(1.0 / 6.0), s.powf(5.0 / 6.0))
            }
            LimitShape::Flat => (2f64.powf(1.0 / 3.0), 2f64.powf(2.0 / 3.0)),
            LimitShape::Stationary => (1.0, 1.0),
        };
        Ok(Self {
            t_ref,
            xi,
            kappa_v,
            kappa_h,
            shape,
        })
    }
}

/// (h - t * h_ma(x/t)) / t^{1/3} for t > 0: height fluctuation in KPZ units.
pub fn rescale_height(h: i64, p: SpaceTimePoint, spec: &RescaleSpec) -> Result<f64, GeometryError> {
    if p.t <= 0.0 {
        return Err(GeometryError::NonpositiveTime(p.t));
    }
    let center = p.t * spec.shape.value(p.x / p.t);
    Ok((h as f64 - center) / p.t.powf(1.0 / 3.0))
}

/// Fluctuation coordinates (u, v) at scale T mapped back to space-time:
/// x = u T^{2/3}, t = T (1 + v). Requires v > -1.
pub fn scaled_coords(t_ref: f64, u: f64, v: f64) -> SpaceTimePoint {
    debug_assert!(v > -1.0, "scaled time offset v = {v} must exceed -1");
    SpaceTimePoint::new(u * t_ref.powf(2.0 / 3.0), t_ref * (1.0 + v))
}

/// The Lorentz-like shear fixing the Poisson measure: maps (x, t) to
/// (x - t xi, t - xi x) / sqrt(1 - xi^2). Determinant 1; in percolation
/// coordinates it is diagonal, u -> u sqrt((1-xi)/(1+xi)) and v -> v / that,
/// so chain order is preserved.
pub fn xi_map(p: SpaceTimePoint, xi: f64) -> Result<SpaceTimePoint, GeometryError> {
    if !(xi.abs() < 1.0) {
        return Err(GeometryError::XiOutOfRange(xi));
    }
    let norm = (1.0 - xi * xi).sqrt();
    Ok(SpaceTimePoint::new(
        (p.x - p.t * xi) / norm,
        (p.t - xi * p.x) / norm,
    ))
}

/// A point of the fixed-height hyperbola t^2 - x^2 = T^2 at polar angle
/// theta, |theta| < pi/4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolaPoint {
    pub t_ref: f64,
    pub theta: f64,
    pub point: SpaceTimePoint,
}

/// Polar parametrization r(theta) = T / sqrt(cos 2theta) of t^2 - x^2 = T^2:
/// x = r sin(theta), t = r cos(theta). The macroscopic height along the curve
/// is the constant 2T, and in percolation coordinates u v = T^2 exactly.
pub fn hyperbola_point(t_ref: f64, theta: f64) -> Result<HyperbolaPoint, GeometryError> {
    if t_ref <= 0.0 {
        return Err(GeometryError::NonpositiveTime(t_ref));
    }
    let c = (2.0 * theta).cos();
    if !(theta.abs() < std::f64::consts::FRAC_PI_4) || c <= 0.0 {
        return Err(GeometryError::ThetaOutOfRange(theta));
    }
    let r = t_ref / c.sqrt();
    Ok(HyperbolaPoint {
        t_ref,
        theta,
        point: SpaceTimePoint::new(r * theta.sin(), r * theta.cos()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    SpaceLike,
    General,
}

/// A smooth observation path t = T pi(x/T) through (xi T, T), described by
/// its slope at xi. Space-like paths need |pi'| <= 1; general paths must
/// avoid the characteristic direction pi' = 1/xi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub xi: f64,
    pub pi_at_xi: f64,
    pub pi_prime: f64,
    pub kind: PathKind,
}

impl PathSpec {
    pub fn new(xi: f64, pi_prime: f64, kind: PathKind) -> Result<Self, GeometryError> {
        if !(xi.abs() < 1.0) {
            return Err(GeometryError::XiOutOfRange(xi));
        }
        match kind {
            PathKind::SpaceLike => {
                if !(pi_prime.abs() <= 1.0) {
                    return Err(GeometryError::BadPathSlope {
                        pi_prime,
                        reason: "space-like paths require |pi'| <= 1",
                    });
                }
            }
            PathKind::General => {
                if xi != 0.0 && pi_prime == 1.0 / xi {
                    return Err(GeometryError::BadPathSlope {
                        pi_prime,
                        reason: "path is tangent to the characteristic direction",
                    });
                }
            }
        }
        Ok(Self {
            xi,
            pi_at_xi: 1.0,
            pi_prime,
            kind,
        })
    }

    /// The path point at transversal offset u on the T^{2/3} scale:
    /// x = xi T + u T^{2/3}, t = T + pi' u T^{2/3} (the path is taken locally
    /// linear on the fluctuation scale).
    pub fn point_at(&self, t_ref: f64, u: f64) -> SpaceTimePoint {
        let dx = u * t_ref.powf(2.0 / 3.0);
        SpaceTimePoint::new(self.xi * t_ref + dx, t_ref + self.pi_prime * dx)
    }
}
