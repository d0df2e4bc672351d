use nyqscale_core::Error as CoreError;
use thiserror::Error;

pub const EXIT_STABLE: i32 = 0;
pub const EXIT_UNSTABLE: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Input(Vec<String>),

    #[error("configuration: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Config(_) | CliError::Output { .. } => EXIT_INPUT,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

/// Malformed models are input errors; numerical trouble leaves the verdict open.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidInput(_)
        | CoreError::Improper(_)
        | CoreError::DegenerateModel(_)
        | CoreError::AlgebraicNode(_)
        | CoreError::Disconnected(_)
        | CoreError::Normalization(_)
        | CoreError::Reduction(_)
        | CoreError::UnstableTurbineModel { .. }
        | CoreError::ModelMatching(_)
        | CoreError::IntegratorConfig(_)
        | CoreError::Realization(_) => EXIT_INPUT,
        CoreError::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_INCONCLUSIVE,
    }
}
