use alloc::boxed::Box;
use alloc::string::String;

use crate::catalog::OrbitFamily;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("state too close to a primary (r1 = {r1:e} DU, r2 = {r2:e} DU)")]
    SingularState { r1: f64, r2: f64 },
    #[error("non-finite state component encountered at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("integrator exceeded {max_steps} steps before reaching t = {t_target}")]
    TooManySteps { max_steps: usize, t_target: f64 },
    #[error("no x = 0 crossing within a horizon of {horizon} TU")]
    NoCrossing { horizon: f64 },
    #[error("degenerate measurement geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("measurement Jacobian is singular (angle at 0 or pi)")]
    SingularDerivative,
    #[error("observer lies inside the occluding body")]
    InsideBody,
    #[error("innovation covariance is numerically singular (condition estimate {condition:e})")]
    SingularInnovation { condition: f64 },
    #[error("track has no epochs")]
    EmptyTrack,
    #[error("orbit family {0} has no members")]
    EmptyFamily(OrbitFamily),
    #[error("orbit {0} has no period")]
    MissingPeriod(String),
    #[error("infeasible placement: {slots} slots for {observers} observers")]
    Infeasible { slots: usize, observers: usize },
    #[error("exhaustive search needs {count} evaluations, above the cap of {cap}")]
    ExhaustiveCapExceeded { count: u128, cap: u128 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("orbit {id}: {source}")]
    Orbit { id: String, source: Box<Error> },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn for_orbit(self, id: &str) -> Self {
        Error::Orbit { id: id.into(), source: Box::new(self) }
    }
}
