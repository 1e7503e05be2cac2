//! Angles-only measurements referenced to the Moon direction, and the range
//! and exclusion/occlusion visibility constraints.

use nalgebra::{Matrix2, RowVector6, SMatrix, Vector2, Vector3};
#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constants::{arcsec_to_rad, CanonicalConstants, PrimaryBody};
use crate::error::{Error, Result};
use crate::state::StateVector;

/// Low-fidelity angular noise, arcseconds.
pub const LOW_FIDELITY_ARCSEC: f64 = 192.0118;
/// High-fidelity angular noise, arcseconds.
pub const HIGH_FIDELITY_ARCSEC: f64 = 26.7518;
/// Maximum sensing distance, km.
pub const MAX_RANGE_KM: f64 = 500_000.0;
/// Individual sensor cadence, TU.
pub const INDIVIDUAL_CADENCE_TU: f64 = 0.02;

/// Projections shorter than this make an angle undefined.
pub const MIN_PROJECTION: f64 = 1e-12;
/// `sin(angle)` below which the arccos derivative is treated as singular.
pub const SINGULAR_SIN: f64 = 1e-12;

pub type MeasurementJacobian = SMatrix<f64, 2, 6>;

/// Observer-centred vectors to the reference point (Moon) and to the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeGeometry {
    pub gamma: Vector3<f64>,
    pub rho: Vector3<f64>,
}

/// Azimuth/elevation pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Angles {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Angles {
    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.azimuth, self.elevation)
    }

    pub fn get(&self, i: usize) -> f64 {
        if i == 0 {
            self.azimuth
        } else {
            self.elevation
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Fidelity {
    Low,
    High,
}

impl Fidelity {
    pub fn sigma_arcsec(self) -> f64 {
        match self {
            Fidelity::Low => LOW_FIDELITY_ARCSEC,
            Fidelity::High => HIGH_FIDELITY_ARCSEC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensorSpec {
    /// Per-angle noise standard deviation, radians.
    pub sigma_angle: f64,
    /// Maximum range, DU.
    pub max_range: f64,
    /// Individual cadence, TU.
    pub individual_cadence: f64,
}

impl SensorSpec {
    pub fn with_fidelity(fidelity: Fidelity, c: &CanonicalConstants) -> Self {
        Self {
            sigma_angle: arcsec_to_rad(fidelity.sigma_arcsec()),
            max_range: c.km_to_du(MAX_RANGE_KM),
            individual_cadence: INDIVIDUAL_CADENCE_TU,
        }
    }

    /// Measurement noise covariance for one observer.
    pub fn r_block(&self) -> Matrix2<f64> {
        Matrix2::identity() * (self.sigma_angle * self.sigma_angle)
    }
}

pub fn relative_geometry(observer: &StateVector, target: &StateVector, mu: f64) -> RelativeGeometry {
    let obs = observer.position();
    RelativeGeometry { gamma: Vector3::new(1.0 - mu, 0.0, 0.0) - obs, rho: target.position() - obs }
}

/// Cosine of the angle between the `(0, axis)` projections, with the
/// projection norms.
fn projected_cosine(g: &Vector3<f64>, r: &Vector3<f64>, axis: usize) -> Result<(f64, f64, f64)> {
    let gn = (g[0] * g[0] + g[axis] * g[axis]).sqrt();
    let rn = (r[0] * r[0] + r[axis] * r[axis]).sqrt();
    if gn < MIN_PROJECTION || rn < MIN_PROJECTION {
        return Err(Error::DegenerateGeometry(if axis == 1 { "zero xy-projection" } else { "zero xz-projection" }));
    }
    let cos = ((g[0] * r[0] + g[axis] * r[axis]) / (gn * rn)).clamp(-1.0, 1.0);
    Ok((cos, gn, rn))
}

/// Azimuth from the xy-projections and elevation from the xz-projections of
/// gamma and rho, both in `[0, pi]`.
pub fn measure(geom: &RelativeGeometry) -> Result<Angles> {
    let (ca, _, _) = projected_cosine(&geom.gamma, &geom.rho, 1)?;
    let (ce, _, _) = projected_cosine(&geom.gamma, &geom.rho, 2)?;
    Ok(Angles { azimuth: ca.acos(), elevation: ce.acos() })
}

/// Gradient of one projected angle with respect to target position, or
/// `None` when `sin(angle) < min_sin`.
fn angle_row(geom: &RelativeGeometry, axis: usize, min_sin: f64) -> Result<Option<RowVector6<f64>>> {
    let (g, r) = (&geom.gamma, &geom.rho);
    let (cos, gn, rn) = projected_cosine(g, r, axis)?;
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    if sin < min_sin {
        return Ok(None);
    }
    let rn2 = rn * rn;
    let dc_dx = g[0] / (gn * rn) - cos * r[0] / rn2;
    let dc_da = g[axis] / (gn * rn) - cos * r[axis] / rn2;
    let mut row = RowVector6::zeros();
    row[0] = -dc_dx / sin;
    row[axis] = -dc_da / sin;
    Ok(Some(row))
}

/// Per-angle Jacobian rows; an angle within `min_sin` of 0 or pi yields `None`.
pub fn jacobian_rows(geom: &RelativeGeometry, min_sin: f64) -> Result<[Option<RowVector6<f64>>; 2]> {
    Ok([angle_row(geom, 1, min_sin)?, angle_row(geom, 2, min_sin)?])
}

/// Jacobian of `(azimuth, elevation)` with respect to the target state. The
/// velocity columns are zero.
pub fn measurement_jacobian(geom: &RelativeGeometry) -> Result<MeasurementJacobian> {
    let [az, el] = jacobian_rows(geom, SINGULAR_SIN)?;
    match (az, el) {
        (Some(a), Some(e)) => {
            let mut h = MeasurementJacobian::zeros();
            h.set_row(0, &a);
            h.set_row(1, &e);
            Ok(h)
        }
        _ => Err(Error::SingularDerivative),
    }
}

/// Tangent half-angle of a sphere of `radius` seen from `distance`, in the
/// arctangent form.
pub fn tangent_half_angle(distance: f64, radius: f64) -> f64 {
    let num = radius / distance * (distance * distance - radius * radius).sqrt();
    let den = distance - radius * radius / distance;
    num.atan2(den)
}

/// Angle between body and target directions (`theta`) and the body's
/// apparent half-angle (`omega`), as seen by the observer.
pub fn exclusion_angles(observer: &StateVector, target: &StateVector, body: &PrimaryBody) -> Result<(f64, f64)> {
    let gamma = body.center - observer.position();
    let rho = target.position() - observer.position();
    let gn = gamma.norm();
    let rn = rho.norm();
    if gn <= body.radius {
        return Err(Error::InsideBody);
    }
    if rn < MIN_PROJECTION {
        return Err(Error::DegenerateGeometry("observer and target coincide"));
    }
    let theta = (gamma.dot(&rho) / (gn * rn)).clamp(-1.0, 1.0).acos();
    Ok((theta, tangent_half_angle(gn, body.radius)))
}

/// Range and exclusion/occlusion test. Degenerate geometry reports not visible.
pub fn visibility(observer: &StateVector, target: &StateVector, sensor: &SensorSpec, bodies: &[PrimaryBody]) -> bool {
    let range = (target.position() - observer.position()).norm();
    if !(range <= sensor.max_range) {
        return false;
    }
    bodies.iter().all(|body| match exclusion_angles(observer, target, body) {
        Ok((theta, omega)) => theta >= omega,
        Err(_) => false,
    })
}

/// Ideal angles plus independent Gaussian noise of `sigma_angle`, clamped to `[0, pi]`.
pub fn synthesize_measurement<R: Rng + ?Sized>(
    geom: &RelativeGeometry,
    sensor: &SensorSpec,
    rng: &mut R,
) -> Result<Angles> {
    let ideal = measure(geom)?;
    let na: f64 = StandardNormal.sample(rng);
    let ne: f64 = StandardNormal.sample(rng);
    let pi = core::f64::consts::PI;
    Ok(Angles {
        azimuth: (ideal.azimuth + sensor.sigma_angle * na).clamp(0.0, pi),
        elevation: (ideal.elevation + sensor.sigma_angle * ne).clamp(0.0, pi),
    })
}
