//! Embedded Dormand–Prince 5(4) integrator with PI step-size control.
//!
//! Steps are error-controlled on the fifth-order solution with a mixed
//! absolute/relative RMS norm. Accepted steps can be recorded as knots of a
//! cubic Hermite dense output.

use alloc::vec::Vec;

use nalgebra::SVector;
#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;

use crate::error::{Error, Result};

/// Right-hand side of `dy/dt = f(t, y)`.
pub trait OdeSystem<const D: usize> {
    fn rhs(&self, t: f64, y: &SVector<f64, D>) -> Result<SVector<f64, D>>;
}

impl<F, const D: usize> OdeSystem<D> for F
where
    F: Fn(f64, &SVector<f64, D>) -> Result<SVector<f64, D>>,
{
    fn rhs(&self, t: f64, y: &SVector<f64, D>) -> Result<SVector<f64, D>> {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    /// Dormand–Prince 4(5) pair, propagating the fifth-order solution.
    #[default]
    DormandPrince45,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Largest allowed step magnitude (TU).
    pub max_step: f64,
    /// Smallest step magnitude before the integrator gives up (TU).
    pub min_step: f64,
    /// Upper bound on accepted plus rejected steps for one call.
    pub max_steps: usize,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-14,
            max_steps: 5_000_000,
            method: Method::DormandPrince45,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self { abs_tol, rel_tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::invalid("integrator tolerances must be positive"));
        }
        if !(self.max_step > 0.0) || !(self.min_step >= 0.0) {
            return Err(Error::invalid("integrator step bounds must be positive"));
        }
        Ok(())
    }
}

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI controller (Hairer–Wanner).
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;

/// One Dormand–Prince step of size `h` from `(t, y)` with `k1 = f(t, y)`.
/// Returns the fifth-order state, its derivative and the embedded error vector.
fn dormand_prince_step<S: OdeSystem<D>, const D: usize>(
    sys: &S,
    t: f64,
    y: &SVector<f64, D>,
    k1: &SVector<f64, D>,
    h: f64,
) -> Result<(SVector<f64, D>, SVector<f64, D>, SVector<f64, D>)> {
    let k2 = sys.rhs(t + C2 * h, &(y + k1 * (h * A21)))?;
    let k3 = sys.rhs(t + C3 * h, &(y + (k1 * A31 + k2 * A32) * h))?;
    let k4 = sys.rhs(t + C4 * h, &(y + (k1 * A41 + k2 * A42 + k3 * A43) * h))?;
    let k5 = sys.rhs(t + C5 * h, &(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h))?;
    let k6 = sys.rhs(t + h, &(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h))?;
    let y_new = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
    let k7 = sys.rhs(t + h, &y_new)?;
    let e = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
    Ok((y_new, k7, e))
}

/// Fifth-order state after one uncontrolled step of `h` from `knot`.
/// Used to refine events inside an already accepted step.
pub fn single_step<S: OdeSystem<D>, const D: usize>(sys: &S, knot: &Knot<D>, h: f64) -> Result<SVector<f64, D>> {
    if h == 0.0 {
        return Ok(knot.y);
    }
    dormand_prince_step(sys, knot.t, &knot.y, &knot.dydt, h).map(|(y, _, _)| y)
}

/// One accepted integration step with endpoint derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot<const D: usize> {
    pub t: f64,
    pub y: SVector<f64, D>,
    pub dydt: SVector<f64, D>,
}

/// Single-step result of a trial.
struct Trial<const D: usize> {
    y: SVector<f64, D>,
    f: SVector<f64, D>,
    err: f64,
}

/// Stateful integrator that can be advanced to successive target times.
pub struct Stepper<'a, S, const D: usize> {
    sys: &'a S,
    cfg: IntegratorConfig,
    t: f64,
    y: SVector<f64, D>,
    f: SVector<f64, D>,
    /// Signed proposal for the next step.
    h: f64,
    fac_old: f64,
    steps: usize,
}

impl<'a, S: OdeSystem<D>, const D: usize> Stepper<'a, S, D> {
    /// Prepares integration from `(t0, y0)` in the direction of `t_toward`.
    pub fn new(sys: &'a S, t0: f64, y0: SVector<f64, D>, t_toward: f64, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let f = sys.rhs(t0, &y0)?;
        let mut stepper = Stepper { sys, cfg, t: t0, y: y0, f, h: 0.0, fac_old: 1e-4, steps: 0 };
        let dir = if t_toward >= t0 { 1.0 } else { -1.0 };
        stepper.h = dir * stepper.initial_step(dir)?;
        Ok(stepper)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &SVector<f64, D> {
        &self.y
    }

    pub fn derivative(&self) -> &SVector<f64, D> {
        &self.f
    }

    pub fn knot(&self) -> Knot<D> {
        Knot { t: self.t, y: self.y, dydt: self.f }
    }

    /// Accepted plus rejected steps taken so far.
    pub fn step_count(&self) -> usize {
        self.steps
    }

    fn scale(&self, i: usize, y_new: &SVector<f64, D>) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * self.y[i].abs().max(y_new[i].abs())
    }

    fn rms_scaled(&self, v: &SVector<f64, D>) -> f64 {
        let sum: f64 = (0..D)
            .map(|i| {
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * self.y[i].abs();
                (v[i] / sc).powi(2)
            })
            .sum();
        (sum / D as f64).sqrt()
    }

    fn initial_step(&self, dir: f64) -> Result<f64> {
        let hmax = self.cfg.max_step;
        let d0 = self.rms_scaled(&self.y);
        let d1 = self.rms_scaled(&self.f);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(hmax);
        let y1 = self.y + self.f * (dir * h0);
        let f1 = self.sys.rhs(self.t + dir * h0, &y1)?;
        let d2 = self.rms_scaled(&(f1 - self.f)) / h0;
        let der12 = d1.max(d2);
        let h1 = if der12 <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 5.0) };
        Ok((100.0 * h0).min(h1).min(hmax))
    }

    fn trial(&self, h: f64) -> Result<Trial<D>> {
        let (y_new, k7, e) = dormand_prince_step(self.sys, self.t, &self.y, &self.f, h)?;
        let err = (0..D).map(|i| (e[i] / self.scale(i, &y_new)).abs()).fold(0.0, f64::max);
        if !err.is_finite() || !y_new.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { t: self.t + h });
        }
        Ok(Trial { y: y_new, f: k7, err })
    }

    fn min_step(&self) -> f64 {
        self.cfg.min_step.max(16.0 * f64::EPSILON * self.t.abs())
    }

    /// Takes one accepted step without passing `t_limit`. Returns the knot
    /// at the start of the step; the stepper then sits at its end.
    pub fn step_bounded(&mut self, t_limit: f64) -> Result<Knot<D>> {
        let dir = if self.h >= 0.0 { 1.0 } else { -1.0 };
        let start = self.knot();
        let mut rejected = false;
        loop {
            if self.steps >= self.cfg.max_steps {
                return Err(Error::TooManySteps { max_steps: self.cfg.max_steps, t_target: t_limit });
            }
            self.steps += 1;
            let proposal = self.h.abs().min(self.cfg.max_step);
            let remaining = (t_limit - self.t) * dir;
            let landing = proposal >= remaining;
            let h = if landing { t_limit - self.t } else { dir * proposal };
            if h.abs() < self.min_step() && !(landing && remaining > 0.0) {
                return Err(Error::StepSizeUnderflow { t: self.t, h });
            }
            match self.trial(h) {
                Ok(tr) if tr.err <= 1.0 => {
                    let fac11 = tr.err.powf(EXPO1);
                    let fac = (fac11 / self.fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                    let mut h_next = h.abs() / fac;
                    if rejected {
                        h_next = h_next.min(h.abs());
                    }
                    if landing {
                        h_next = h_next.max(proposal);
                    }
                    self.fac_old = tr.err.max(1e-4);
                    self.h = dir * h_next;
                    self.t = if landing { t_limit } else { self.t + h };
                    self.y = tr.y;
                    self.f = tr.f;
                    return Ok(start);
                }
                Ok(tr) => {
                    let fac11 = tr.err.powf(EXPO1);
                    self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
                    rejected = true;
                }
                Err(e @ (Error::SingularState { .. } | Error::NonFinite { .. })) => {
                    // A trial stage strayed into a singularity; retry smaller.
                    self.h = h * 0.25;
                    rejected = true;
                    if self.h.abs() < self.min_step() {
                        return Err(e);
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Advances exactly to `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let dir = if self.h >= 0.0 { 1.0 } else { -1.0 };
        if (t_target - self.t) * dir < 0.0 {
            return Err(Error::invalid("advance_to target lies behind the stepper"));
        }
        while self.t != t_target {
            self.step_bounded(t_target)?;
        }
        Ok(())
    }
}

/// Integrates from `t0` to `t1`, returning only the final state.
pub fn integrate_final<S: OdeSystem<D>, const D: usize>(
    sys: &S,
    t0: f64,
    y0: SVector<f64, D>,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<SVector<f64, D>> {
    if t0 == t1 {
        return Ok(y0);
    }
    let mut stepper = Stepper::new(sys, t0, y0, t1, *cfg)?;
    stepper.advance_to(t1)?;
    Ok(*stepper.state())
}

/// Integrates from `t0` to `t1`, keeping every accepted step for dense output.
pub fn integrate_dense<S: OdeSystem<D>, const D: usize>(
    sys: &S,
    t0: f64,
    y0: SVector<f64, D>,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory<D>> {
    if t0 == t1 {
        let dydt = sys.rhs(t0, &y0)?;
        return Ok(Trajectory { knots: alloc::vec![Knot { t: t0, y: y0, dydt }] });
    }
    let mut stepper = Stepper::new(sys, t0, y0, t1, *cfg)?;
    let mut knots = Vec::new();
    while stepper.time() != t1 {
        knots.push(stepper.step_bounded(t1)?);
    }
    knots.push(stepper.knot());
    Ok(Trajectory { knots })
}

/// Piecewise cubic Hermite interpolant through accepted steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const D: usize> {
    knots: Vec<Knot<D>>,
}

impl<const D: usize> Trajectory<D> {
    pub fn knots(&self) -> &[Knot<D>] {
        &self.knots
    }

    pub fn t_start(&self) -> f64 {
        self.knots[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.knots[self.knots.len() - 1].t
    }

    pub fn final_state(&self) -> SVector<f64, D> {
        self.knots[self.knots.len() - 1].y
    }

    /// State at `t`, or `None` outside the integrated span. Knots are
    /// returned exactly.
    pub fn state_at(&self, t: f64) -> Option<SVector<f64, D>> {
        let (lo, hi) = if self.t_start() <= self.t_end() {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        if !(t >= lo && t <= hi) {
            return None;
        }
        let forward = self.t_end() >= self.t_start();
        // First knot index whose time is at or past t along the direction of travel.
        let idx = self.knots.partition_point(|k| if forward { k.t < t } else { k.t > t });
        if idx < self.knots.len() && self.knots[idx].t == t {
            return Some(self.knots[idx].y);
        }
        let (a, b) = (&self.knots[idx - 1], &self.knots[idx]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Some(a.y * h00 + a.dydt * (h10 * h) + b.y * h01 + b.dydt * (h11 * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    fn oscillator(_t: f64, y: &Vector2<f64>) -> Result<Vector2<f64>> {
        Ok(Vector2::new(y[1], -y[0]))
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let cfg = IntegratorConfig::default();
        let y0 = Vector2::new(1.0, 0.0);
        let t1 = 10.0;
        let y = integrate_final(&oscillator, 0.0, y0, t1, &cfg).unwrap();
        assert!((y[0] - t1.cos()).abs() < 1e-10);
        assert!((y[1] + t1.sin()).abs() < 1e-10);
    }

    #[test]
    fn zero_span_is_identity() {
        let y0 = Vector2::new(0.3, -0.2);
        let cfg = IntegratorConfig::default();
        assert_eq!(integrate_final(&oscillator, 1.0, y0, 1.0, &cfg).unwrap(), y0);
        let traj = integrate_dense(&oscillator, 1.0, y0, 1.0, &cfg).unwrap();
        assert_eq!(traj.state_at(1.0).unwrap(), y0);
    }

    #[test]
    fn backward_integration_and_dense_output() {
        let cfg = IntegratorConfig::with_tolerances(1e-11, 1e-11);
        let y0 = Vector2::new(1.0, 0.0);
        let traj = integrate_dense(&oscillator, 0.0, y0, -3.0, &cfg).unwrap();
        assert_eq!(traj.t_end(), -3.0);
        for &t in &[-0.1, -1.234, -2.9, -3.0] {
            let y = traj.state_at(t).unwrap();
            assert!((y[0] - t.cos()).abs() < 1e-6, "t={t}");
        }
        assert!(traj.state_at(0.5).is_none());
    }

    #[test]
    fn advance_lands_exactly_on_targets() {
        let cfg = IntegratorConfig::default();
        let mut st = Stepper::new(&oscillator, 0.0, Vector2::new(1.0, 0.0), 1.0, cfg).unwrap();
        for k in 1..=50 {
            let t = k as f64 * 0.02;
            st.advance_to(t).unwrap();
            assert_eq!(st.time(), t);
            assert!((st.state()[0] - t.cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn invalid_tolerances_rejected() {
        let cfg = IntegratorConfig::with_tolerances(0.0, 1e-9);
        assert!(integrate_final(&oscillator, 0.0, Vector2::new(1.0, 0.0), 1.0, &cfg).is_err());
    }
}
