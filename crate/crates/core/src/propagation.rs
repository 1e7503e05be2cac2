//! State propagation under CR3BP dynamics.

use alloc::vec::Vec;

use nalgebra::{Matrix6, SVector, Vector6};
#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;

use crate::constants::CanonicalConstants;
use crate::dynamics::{eom, eom_jacobian, Cr3bp};
use crate::error::{Error, Result};
use crate::integrator::{integrate_dense, integrate_final, single_step, IntegratorConfig, Stepper, Trajectory};
use crate::state::StateVector;

/// Residual |x| accepted for a located yz-plane crossing (DU).
pub const PLANE_TOLERANCE: f64 = 1e-10;

/// Time direction for event searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

/// CR3BP dynamics paired with integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Propagator {
    pub dynamics: Cr3bp,
    pub cfg: IntegratorConfig,
}

/// Dense trajectory sampler over an integrated span.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory(pub Trajectory<6>);

impl StateTrajectory {
    pub fn state_at(&self, t: f64) -> Option<StateVector> {
        self.0.state_at(t).map(StateVector)
    }

    pub fn final_state(&self) -> StateVector {
        StateVector(self.0.final_state())
    }

    pub fn t_start(&self) -> f64 {
        self.0.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.0.t_end()
    }

    /// Accepted-step states, including both endpoints.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, StateVector)> + '_ {
        self.0.knots().iter().map(|k| (k.t, StateVector(k.y)))
    }
}

impl Propagator {
    pub fn new(constants: CanonicalConstants, cfg: IntegratorConfig) -> Self {
        Self { dynamics: Cr3bp::new(constants), cfg }
    }

    pub fn constants(&self) -> &CanonicalConstants {
        &self.dynamics.constants
    }

    fn rhs(&self) -> impl Fn(f64, &Vector6<f64>) -> Result<Vector6<f64>> + '_ {
        move |_t, y| eom(&StateVector(*y), &self.dynamics.constants)
    }

    fn check_input(s0: &StateVector, t0: f64, t1: f64) -> Result<()> {
        if !s0.is_finite() {
            return Err(Error::NonFinite { t: t0 });
        }
        if !(t0.is_finite() && t1.is_finite()) {
            return Err(Error::invalid("propagation span must be finite"));
        }
        Ok(())
    }

    /// Integrates over `[t_start, t_end]` (either direction) with dense output.
    pub fn propagate(&self, s0: &StateVector, t_start: f64, t_end: f64) -> Result<StateTrajectory> {
        Self::check_input(s0, t_start, t_end)?;
        integrate_dense(&self.rhs(), t_start, s0.0, t_end, &self.cfg).map(StateTrajectory)
    }

    /// State after a signed time offset `dt`.
    pub fn state_after(&self, s0: &StateVector, dt: f64) -> Result<StateVector> {
        Self::check_input(s0, 0.0, dt)?;
        integrate_final(&self.rhs(), 0.0, s0.0, dt, &self.cfg).map(StateVector)
    }

    /// States at each of `times` (monotone, measured from the epoch of `s0` at
    /// t = 0), each reached exactly by the step controller.
    pub fn states_at(&self, s0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        let Some(&last) = times.last() else {
            return Ok(Vec::new());
        };
        Self::check_input(s0, 0.0, last)?;
        let rhs = self.rhs();
        let mut out = Vec::with_capacity(times.len());
        let mut stepper: Option<Stepper<'_, _, 6>> = None;
        for &t in times {
            if t == 0.0 {
                out.push(*s0);
                continue;
            }
            let st = match stepper.as_mut() {
                Some(st) => st,
                None => stepper.insert(Stepper::new(&rhs, 0.0, s0.0, t, self.cfg)?),
            };
            st.advance_to(t)?;
            out.push(StateVector(*st.state()));
        }
        Ok(out)
    }

    /// State and state transition matrix after a signed offset `dt`.
    pub fn state_and_stm(&self, s0: &StateVector, dt: f64) -> Result<(StateVector, Matrix6<f64>)> {
        Self::check_input(s0, 0.0, dt)?;
        let c = self.dynamics.constants;
        let rhs = move |_t: f64, y: &SVector<f64, 42>| -> Result<SVector<f64, 42>> {
            let s = StateVector(y.fixed_rows::<6>(0).into_owned());
            let phi = Matrix6::from_column_slice(&y.as_slice()[6..]);
            let d = eom(&s, &c)?;
            let dphi = eom_jacobian(&s, &c)? * phi;
            let mut out = SVector::<f64, 42>::zeros();
            out.fixed_rows_mut::<6>(0).copy_from(&d);
            out.as_mut_slice()[6..].copy_from_slice(dphi.as_slice());
            Ok(out)
        };
        let mut y0 = SVector::<f64, 42>::zeros();
        y0.fixed_rows_mut::<6>(0).copy_from(&s0.0);
        y0.as_mut_slice()[6..].copy_from_slice(Matrix6::<f64>::identity().as_slice());
        let y = integrate_final(&rhs, 0.0, y0, dt, &self.cfg)?;
        Ok((StateVector(y.fixed_rows::<6>(0).into_owned()), Matrix6::from_column_slice(&y.as_slice()[6..])))
    }

    /// Integrates until the trajectory meets the plane x = 0, searching at
    /// most `horizon` TU in `direction`. Returns the crossing state and the
    /// signed crossing time.
    pub fn to_plane_crossing(
        &self,
        s0: &StateVector,
        direction: Direction,
        horizon: f64,
    ) -> Result<(StateVector, f64)> {
        if s0[0].abs() < PLANE_TOLERANCE {
            return Ok((*s0, 0.0));
        }
        let t_limit = direction.sign() * horizon;
        Self::check_input(s0, 0.0, t_limit)?;
        let rhs = self.rhs();
        let mut stepper = Stepper::new(&rhs, 0.0, s0.0, t_limit, self.cfg)?;
        while stepper.time() != t_limit {
            let start = stepper.step_bounded(t_limit)?;
            let x_end = stepper.state()[0];
            if x_end == 0.0 {
                return Ok((StateVector(*stepper.state()), stepper.time()));
            }
            if start.y[0].signum() == x_end.signum() {
                continue;
            }
            // Bisect on the sub-step length inside the accepted step.
            let x_start = start.y[0];
            let (mut lo, mut hi) = (0.0, stepper.time() - start.t);
            let mut best = (*stepper.state(), hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let y = single_step(&rhs, &start, mid)?;
                if y[0].abs() < best.0[0].abs() {
                    best = (y, mid);
                }
                if y[0] == 0.0 || (hi - lo).abs() <= f64::EPSILON * start.t.abs().max(1.0) {
                    break;
                }
                if y[0].signum() == x_start.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok((StateVector(best.0), start.t + best.1));
        }
        Err(Error::NoCrossing { horizon })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_duration_returns_input() {
        let p = Propagator::default();
        let s = StateVector::new(0.9, 0.1, 0.0, 0.0, 0.2, 0.0);
        assert_eq!(p.state_after(&s, 0.0).unwrap(), s);
        let tr = p.propagate(&s, 0.0, 0.0).unwrap();
        assert_eq!(tr.final_state(), s);
    }

    #[test]
    fn seed_on_plane_returns_immediately() {
        let p = Propagator::default();
        let s = StateVector::new(0.0, -0.28642, 0.0374, 1.93948, -0.26854, -0.32641);
        let (c, t) = p.to_plane_crossing(&s, Direction::Backward, 5.0).unwrap();
        assert_eq!(c, s);
        assert_eq!(t, 0.0);
    }

    #[test]
    fn grid_states_match_direct_propagation() {
        let p = Propagator::default();
        let s = StateVector::new(0.98893, -0.02245, 0.0, 0.71085, 0.03489, 0.0);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.05).collect();
        let grid = p.states_at(&s, &times).unwrap();
        assert_eq!(grid[0], s);
        let direct = p.state_after(&s, 0.5).unwrap();
        assert!(grid[10].max_abs_diff(&direct) < 1e-9);
    }

    #[test]
    fn no_crossing_error() {
        let p = Propagator::default();
        // Stays on the Moon side for a short horizon.
        let s = StateVector::new(0.98893, -0.02245, 0.0, 0.71085, 0.03489, 0.0);
        assert!(matches!(p.to_plane_crossing(&s, Direction::Backward, 0.1), Err(Error::NoCrossing { .. })));
    }
}
