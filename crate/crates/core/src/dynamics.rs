//! Synodic-frame CR3BP equations of motion.

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;

use crate::constants::CanonicalConstants;
use crate::error::{Error, Result};
use crate::state::StateVector;

/// States closer than this to either primary center are rejected.
pub const SINGULARITY_RADIUS: f64 = 1e-6;

/// First-order dynamics with a state Jacobian, as consumed by the filter.
pub trait Dynamics {
    fn derivative(&self, s: &Vector6<f64>) -> Result<Vector6<f64>>;
    fn jacobian(&self, s: &Vector6<f64>) -> Result<Matrix6<f64>>;
}

/// Earth–Moon circular restricted three-body dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cr3bp {
    pub constants: CanonicalConstants,
}

impl Cr3bp {
    pub fn new(constants: CanonicalConstants) -> Self {
        Self { constants }
    }
}

impl Dynamics for Cr3bp {
    fn derivative(&self, s: &Vector6<f64>) -> Result<Vector6<f64>> {
        eom(&StateVector(*s), &self.constants)
    }

    fn jacobian(&self, s: &Vector6<f64>) -> Result<Matrix6<f64>> {
        eom_jacobian(&StateVector(*s), &self.constants)
    }
}

/// Distances to the two primaries, guarded against the singularities.
pub fn primary_distances(s: &StateVector, c: &CanonicalConstants) -> Result<(f64, f64)> {
    let (x, y, z) = (s[0], s[1], s[2]);
    let yz2 = y * y + z * z;
    let r1 = ((x + c.mu).powi(2) + yz2).sqrt();
    let r2 = ((x - 1.0 + c.mu).powi(2) + yz2).sqrt();
    if !(r1 >= SINGULARITY_RADIUS && r2 >= SINGULARITY_RADIUS) {
        return Err(Error::SingularState { r1, r2 });
    }
    Ok((r1, r2))
}

pub fn pseudo_potential(s: &StateVector, c: &CanonicalConstants) -> Result<f64> {
    let (r1, r2) = primary_distances(s, c)?;
    Ok(0.5 * (s[0] * s[0] + s[1] * s[1]) + (1.0 - c.mu) / r1 + c.mu / r2)
}

/// Gradient of the pseudo-potential.
pub fn potential_gradient(s: &StateVector, c: &CanonicalConstants) -> Result<Vector3<f64>> {
    let (r1, r2) = primary_distances(s, c)?;
    let mu = c.mu;
    let (x, y, z) = (s[0], s[1], s[2]);
    let k1 = (1.0 - mu) / (r1 * r1 * r1);
    let k2 = mu / (r2 * r2 * r2);
    Ok(Vector3::new(x - k1 * (x + mu) - k2 * (x - 1.0 + mu), y - k1 * y - k2 * y, -k1 * z - k2 * z))
}

/// Hessian of the pseudo-potential.
pub fn potential_hessian(s: &StateVector, c: &CanonicalConstants) -> Result<Matrix3<f64>> {
    let (r1, r2) = primary_distances(s, c)?;
    let mu = c.mu;
    let d1 = Vector3::new(s[0] + mu, s[1], s[2]);
    let d2 = Vector3::new(s[0] - 1.0 + mu, s[1], s[2]);
    let r1_3 = r1 * r1 * r1;
    let r2_3 = r2 * r2 * r2;
    let k1 = (1.0 - mu) / r1_3;
    let k2 = mu / r2_3;
    let m1 = 3.0 * (1.0 - mu) / (r1_3 * r1 * r1);
    let m2 = 3.0 * mu / (r2_3 * r2 * r2);
    let mut h = d1 * d1.transpose() * m1 + d2 * d2.transpose() * m2;
    for i in 0..3 {
        h[(i, i)] -= k1 + k2;
    }
    h[(0, 0)] += 1.0;
    h[(1, 1)] += 1.0;
    Ok(h)
}

/// Time derivative of the state: velocity followed by the rotating-frame acceleration.
pub fn eom(s: &StateVector, c: &CanonicalConstants) -> Result<Vector6<f64>> {
    let g = potential_gradient(s, c)?;
    let (vx, vy, vz) = (s[3], s[4], s[5]);
    Ok(Vector6::new(vx, vy, vz, 2.0 * vy + g.x, -2.0 * vx + g.y, g.z))
}

/// Jacobian of [`eom`] with respect to the state.
pub fn eom_jacobian(s: &StateVector, c: &CanonicalConstants) -> Result<Matrix6<f64>> {
    let hess = potential_hessian(s, c)?;
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
    a.fixed_view_mut::<3, 3>(3, 0).copy_from(&hess);
    a[(3, 4)] = 2.0;
    a[(4, 3)] = -2.0;
    Ok(a)
}

/// Jacobi constant `2U - v^2`.
pub fn jacobi_constant(s: &StateVector, c: &CanonicalConstants) -> Result<f64> {
    let u = pseudo_potential(s, c)?;
    Ok(2.0 * u - s.velocity().norm_squared())
}
