//! Error classification for process exit codes.

use cislunar_core::Error as CoreError;

/// Bad input: unreadable or malformed files, invalid settings.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

fn core_code(e: &CoreError) -> i32 {
    match e {
        CoreError::Infeasible { .. } | CoreError::ExhaustiveCapExceeded { .. } | CoreError::EmptyFamily(_) => {
            EXIT_INFEASIBLE
        }
        CoreError::InvalidParameter(_) | CoreError::MissingPeriod(_) => EXIT_CONFIG,
        CoreError::Orbit { source, .. } => core_code(source),
        _ => EXIT_NUMERICAL,
    }
}

/// Exit code for an error chain: the first recognizable cause decides.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return core_code(e);
        }
        if cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<toml::de::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<clap::Error>()
        {
            return EXIT_CONFIG;
        }
    }
    EXIT_NUMERICAL
}
