use core::ops::{Index, IndexMut};

use nalgebra::{Vector3, Vector6};

/// Nondimensional synodic-frame position (DU) and velocity (DU/TU).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateVector(pub Vector6<f64>);

impl StateVector {
    pub fn new(x: f64, y: f64, z: f64, vx: f64, vy: f64, vz: f64) -> Self {
        StateVector(Vector6::new(x, y, z, vx, vy, vz))
    }

    pub fn from_parts(pos: Vector3<f64>, vel: Vector3<f64>) -> Self {
        Self::new(pos.x, pos.y, pos.z, vel.x, vel.y, vel.z)
    }

    pub fn from_slice(v: &[f64; 6]) -> Self {
        StateVector(Vector6::from_column_slice(v))
    }

    pub fn position(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.0.fixed_rows::<3>(3).into_owned()
    }

    pub fn as_array(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        out.copy_from_slice(self.0.as_slice());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl From<Vector6<f64>> for StateVector {
    fn from(v: Vector6<f64>) -> Self {
        StateVector(v)
    }
}

impl From<StateVector> for Vector6<f64> {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

impl Index<usize> for StateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for StateVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}
