//! Extended Kalman filter: SNC process noise, joint state/Riccati
//! prediction, stacked multi-observer angle corrections and the track loop.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SVector, SymmetricEigen, Vector6};
#[allow(unused_imports)] // float methods come from std when testing
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constants::PrimaryBody;
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::integrator::{integrate_final, IntegratorConfig};
use crate::measurement::{
    jacobian_rows, measure, relative_geometry, synthesize_measurement, visibility, Angles, SensorSpec,
};
use crate::propagation::Propagator;
use crate::seeding::{derive_seed, rng_from, stream};
use crate::state::StateVector;
use crate::tasking::TaskingSchedule;

/// Floor applied to each diagonal of the initial covariance.
pub const P0_FLOOR: f64 = 1e-16;
/// Eigenvalues below `-PSD_TOLERANCE` indicate a genuinely indefinite matrix.
pub const PSD_TOLERANCE: f64 = 1e-12;
/// `sin(angle)` below which a predicted angle row is left out of a correction.
pub const ROW_GATE_SIN: f64 = 1e-6;
/// Default unmodeled-acceleration standard deviation, DU/TU^2.
pub const DEFAULT_SIGMA_DYN: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub x_hat: StateVector,
    pub p: Matrix6<f64>,
    pub epoch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma_dyn: f64,
    pub dt: f64,
    pub q: Matrix6<f64>,
    /// Multiplier on the initial-estimate perturbation standard deviations.
    pub init_perturbation_scale: f64,
}

impl NoiseModel {
    pub fn new(sigma_dyn: f64, dt: f64) -> Result<Self> {
        Ok(Self { sigma_dyn, dt, q: build_snc_q(sigma_dyn, dt)?, init_perturbation_scale: 1.0 })
    }

    pub fn with_init_scale(mut self, scale: f64) -> Self {
        self.init_perturbation_scale = scale;
        self
    }
}

/// `Gamma * sigma^2 I * Gamma^T` with `Gamma = [dt^2/2 I; dt I]`.
pub fn build_snc_q(sigma_dyn: f64, dt: f64) -> Result<Matrix6<f64>> {
    if !(sigma_dyn.is_finite() && sigma_dyn >= 0.0) {
        return Err(Error::invalid("sigma_dyn must be non-negative"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let s2 = sigma_dyn * sigma_dyn;
    let half = dt * dt / 2.0;
    let i3 = Matrix3::<f64>::identity();
    let mut q = Matrix6::zeros();
    q.fixed_view_mut::<3, 3>(0, 0).copy_from(&(i3 * (half * half * s2)));
    q.fixed_view_mut::<3, 3>(0, 3).copy_from(&(i3 * (half * dt * s2)));
    q.fixed_view_mut::<3, 3>(3, 0).copy_from(&(i3 * (half * dt * s2)));
    q.fixed_view_mut::<3, 3>(3, 3).copy_from(&(i3 * (dt * dt * s2)));
    Ok(q)
}

/// Perturbs the truth by Gaussian draws with variance `scale^2 * Q_ii` and
/// sets `P0 = diag(e e^T)` with a floor.
pub fn init_estimate<R: Rng + ?Sized>(truth: &StateVector, noise: &NoiseModel, rng: &mut R) -> FilterState {
    let mut x = *truth;
    for i in 0..6 {
        let z: f64 = StandardNormal.sample(rng);
        x[i] += noise.init_perturbation_scale * noise.q[(i, i)].sqrt() * z;
    }
    let e = x.0 - truth.0;
    let p = Matrix6::from_diagonal(&e.map(|v| (v * v).max(P0_FLOOR)));
    FilterState { x_hat: x, p, epoch: 0.0 }
}

/// `(P + P^T) / 2`.
pub fn symmetrize(p: &Matrix6<f64>) -> Matrix6<f64> {
    (p + p.transpose()) * 0.5
}

/// Symmetrizes and clamps negative eigenvalues to zero when present.
pub fn symmetrize_psd(p: &Matrix6<f64>) -> Matrix6<f64> {
    let s = symmetrize(p);
    let eig = SymmetricEigen::new(s);
    if eig.eigenvalues.min() >= 0.0 {
        return s;
    }
    let d = Matrix6::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0)));
    symmetrize(&(eig.eigenvectors * d * eig.eigenvectors.transpose()))
}

/// Integrates the estimate and `P' = AP + PA^T + Q` jointly over `dt`. The
/// covariance is integrated in units of its largest diagonal so the error
/// control sees it at unit scale.
pub fn predict<D: Dynamics>(
    fs: &FilterState,
    dt: f64,
    q: &Matrix6<f64>,
    dynamics: &D,
    cfg: &IntegratorConfig,
) -> Result<FilterState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("prediction interval must be positive"));
    }
    let scale = fs.p.diagonal().amax().max(P0_FLOOR);
    let q_scaled = q / scale;
    let rhs = |_t: f64, y: &SVector<f64, 42>| -> Result<SVector<f64, 42>> {
        let x: Vector6<f64> = y.fixed_rows::<6>(0).into_owned();
        let p = Matrix6::from_column_slice(&y.as_slice()[6..]);
        let a = dynamics.jacobian(&x)?;
        let dp = a * p + p * a.transpose() + q_scaled;
        let mut out = SVector::<f64, 42>::zeros();
        out.fixed_rows_mut::<6>(0).copy_from(&dynamics.derivative(&x)?);
        out.as_mut_slice()[6..].copy_from_slice(dp.as_slice());
        Ok(out)
    };
    let mut y0 = SVector::<f64, 42>::zeros();
    y0.fixed_rows_mut::<6>(0).copy_from(&fs.x_hat.0);
    y0.as_mut_slice()[6..].copy_from_slice((fs.p / scale).as_slice());
    let y = integrate_final(&rhs, fs.epoch, y0, fs.epoch + dt, cfg)?;
    let p = Matrix6::from_column_slice(&y.as_slice()[6..]) * scale;
    Ok(FilterState { x_hat: StateVector(y.fixed_rows::<6>(0).into_owned()), p: symmetrize(&p), epoch: fs.epoch + dt })
}

/// A tasked observer at the measurement epoch and its measurement, if the
/// target was visible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskedObservation {
    pub observer: StateVector,
    pub measurement: Option<Angles>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub state: FilterState,
    /// Number of stacked measurement rows (two per fully usable observer).
    pub rows: usize,
    /// Measurement minus prediction for each stacked row, radians.
    pub innovations: Vec<f64>,
}

impl Correction {
    pub fn applied(&self) -> bool {
        self.rows > 0
    }
}

/// Stacked angle update over every tasked observer with a measurement. Angle
/// rows whose predicted value sits within `ROW_GATE_SIN` of 0 or pi are left
/// out. With no usable rows the a priori state is returned unchanged.
pub fn correct(fs: &FilterState, tasked: &[TaskedObservation], sigma_angle: f64, mu: f64) -> Result<Correction> {
    let mut h_rows: Vec<[f64; 6]> = Vec::new();
    let mut innovations = Vec::new();
    for obs in tasked {
        let Some(m) = obs.measurement else { continue };
        let geom = relative_geometry(&obs.observer, &fs.x_hat, mu);
        let Ok(pred) = measure(&geom) else { continue };
        let Ok(rows) = jacobian_rows(&geom, ROW_GATE_SIN) else { continue };
        for (i, row) in rows.iter().enumerate() {
            if let Some(r) = row {
                let mut a = [0.0; 6];
                a.copy_from_slice(r.as_slice());
                h_rows.push(a);
                innovations.push(m.get(i) - pred.get(i));
            }
        }
    }
    if h_rows.is_empty() {
        return Ok(Correction { state: *fs, rows: 0, innovations });
    }
    let m = h_rows.len();
    let h = DMatrix::from_fn(m, 6, |i, j| h_rows[i][j]);
    let p = DMatrix::from_column_slice(6, 6, fs.p.as_slice());
    let hp = &h * &p;
    let mut s = &hp * h.transpose();
    for i in 0..m {
        s[(i, i)] += sigma_angle * sigma_angle;
    }
    let Some(chol) = s.clone().cholesky() else {
        // Eigenvalue ratio; a rank-deficient S (e.g. more rows than the
        // three position directions with negligible R) reports infinity.
        let eig = s.symmetric_eigenvalues();
        let lo = eig.iter().fold(f64::INFINITY, |a, v| a.min(*v));
        let condition = if lo > 0.0 { eig.amax() / lo } else { f64::INFINITY };
        return Err(Error::SingularInnovation { condition });
    };
    // K = P H^T S^-1 = (S^-1 H P)^T.
    let k = chol.solve(&hp).transpose();
    let nu = DVector::from_vec(innovations.clone());
    let dx = &k * nu;
    let ikh = DMatrix::<f64>::identity(6, 6) - &k * &h;
    let p_post = ikh * p;
    let mut x = fs.x_hat;
    for i in 0..6 {
        x[i] += dx[i];
    }
    let p_post = Matrix6::from_column_slice(p_post.as_slice());
    if !x.is_finite() || p_post.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: fs.epoch });
    }
    Ok(Correction {
        state: FilterState { x_hat: x, p: symmetrize_psd(&p_post), epoch: fs.epoch },
        rows: m,
        innovations,
    })
}

/// Joseph-form covariance update, used as a numerical cross-check.
pub fn joseph_update(p: &Matrix6<f64>, h: &DMatrix<f64>, r: &DMatrix<f64>) -> Option<Matrix6<f64>> {
    let pd = DMatrix::from_column_slice(6, 6, p.as_slice());
    let s = h * &pd * h.transpose() + r;
    let k = s.cholesky()?.solve(&(h * &pd)).transpose();
    let ikh = DMatrix::<f64>::identity(6, 6) - &k * h;
    let out = &ikh * pd * ikh.transpose() + &k * r * k.transpose();
    Some(Matrix6::from_column_slice(out.as_slice()))
}

/// One epoch of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub t: f64,
    pub truth: StateVector,
    pub estimate: StateVector,
    /// Posterior covariance.
    pub p: Matrix6<f64>,
    /// Bit `i` set when observer `i` was tasked and could see the target.
    pub visible_mask: u64,
    pub corrected: bool,
    /// Largest absolute innovation of the correction, radians.
    pub max_innovation: f64,
}

impl EpochRecord {
    pub fn p_diag(&self) -> [f64; 6] {
        core::array::from_fn(|i| self.p[(i, i)])
    }

    pub fn visible_count(&self) -> u32 {
        self.visible_mask.count_ones()
    }

    pub fn observer_visible(&self, i: usize) -> bool {
        i < 64 && self.visible_mask & (1 << i) != 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord {
    pub epochs: Vec<EpochRecord>,
    /// First failure; the epochs before it are kept.
    pub error: Option<Error>,
}

impl TrackRecord {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }
}

/// Everything a track needs besides the target and observers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSetup {
    pub schedule: TaskingSchedule,
    pub noise: NoiseModel,
    pub sensor: SensorSpec,
    pub propagator: Propagator,
}

impl TrackSetup {
    pub fn bodies(&self) -> [PrimaryBody; 2] {
        self.propagator.constants().primaries()
    }
}

/// Filters one target over the schedule's epoch grid. The truth follows the
/// unperturbed dynamics; measurements come from the truth and are gated on
/// truth visibility. All randomness comes from streams derived from `seed`.
pub fn run_track(truth_ic: &StateVector, observers: &[StateVector], setup: &TrackSetup, seed: u64) -> TrackRecord {
    let mut record = TrackRecord { epochs: Vec::new(), error: None };
    if let Err(e) = check_track_inputs(observers, setup) {
        record.error = Some(e);
        return record;
    }
    let times = setup.schedule.epochs();
    let prop = &setup.propagator;
    let truth = match prop.states_at(truth_ic, &times) {
        Ok(v) => v,
        Err(e) => {
            record.error = Some(e);
            return record;
        }
    };
    let observer_states: Result<Vec<Vec<StateVector>>> = observers.iter().map(|o| prop.states_at(o, &times)).collect();
    let observer_states = match observer_states {
        Ok(v) => v,
        Err(e) => {
            record.error = Some(e);
            return record;
        }
    };
    let mut rng = rng_from(derive_seed(seed, &[stream::FILTER]));
    let mut fs = init_estimate(truth_ic, &setup.noise, &mut rng);
    let bodies = setup.bodies();
    let mu = prop.constants().mu;
    record.epochs.reserve(times.len());
    for (k, &t) in times.iter().enumerate() {
        let prior = match predict(&fs, t - fs.epoch, &setup.noise.q, &prop.dynamics, &prop.cfg) {
            Ok(p) => p,
            Err(e) => {
                record.error = Some(e);
                return record;
            }
        };
        let mut mask = 0u64;
        let mut tasked = Vec::new();
        for i in setup.schedule.tasked(k + 1) {
            let obs = observer_states[i][k];
            let mut measurement = None;
            if visibility(&obs, &truth[k], &setup.sensor, &bodies) {
                let geom = relative_geometry(&obs, &truth[k], mu);
                if let Ok(m) = synthesize_measurement(&geom, &setup.sensor, &mut rng) {
                    measurement = Some(m);
                    mask |= 1 << i;
                }
            }
            tasked.push(TaskedObservation { observer: obs, measurement });
        }
        let post = match correct(&prior, &tasked, setup.sensor.sigma_angle, mu) {
            Ok(c) => c,
            Err(e) => {
                record.error = Some(e);
                return record;
            }
        };
        fs = post.state;
        record.epochs.push(EpochRecord {
            t,
            truth: truth[k],
            estimate: fs.x_hat,
            p: fs.p,
            visible_mask: mask,
            corrected: post.applied(),
            max_innovation: post.innovations.iter().fold(0.0, |a, v| a.max(v.abs())),
        });
    }
    record
}

fn check_track_inputs(observers: &[StateVector], setup: &TrackSetup) -> Result<()> {
    if observers.is_empty() {
        return Err(Error::invalid("constellation is empty"));
    }
    if observers.len() != setup.schedule.n_observers {
        return Err(Error::invalid("observer count does not match the schedule"));
    }
    if observers.len() > 64 {
        return Err(Error::invalid("at most 64 observers are supported"));
    }
    if setup.schedule.epoch_count() == 0 {
        return Err(Error::EmptyTrack);
    }
    Ok(())
}
