use std::fmt;

use ugc_core::archive::ArchiveError;
use ugc_core::data::DataError;
use ugc_core::gpr::GprError;
use ugc_core::joints::JointModelError;
use ugc_core::mechanics::MechanicsError;

pub const EXIT_COMPUTATION: u8 = 1;
pub const EXIT_INPUT: u8 = 2;

/// A failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn computation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPUTATION,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<GprError> for CliError {
    fn from(e: GprError) -> Self {
        match e {
            GprError::DimensionMismatch { .. } | GprError::UnsupportedDimension(_) => {
                Self::input(e.to_string())
            }
            _ => Self::computation(e.to_string()),
        }
    }
}

impl From<JointModelError> for CliError {
    fn from(e: JointModelError) -> Self {
        use JointModelError::*;
        match e {
            NoPublishedModel(_)
            | OutOfValidatedRange { .. }
            | MissingThickness
            | UnexpectedThickness(_)
            | InsufficientData { .. }
            | FamilyMismatch { .. } => Self::input(e.to_string()),
            IllConditioned | NoReturnModel => Self::computation(e.to_string()),
            Gpr(g) => g.into(),
        }
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<MechanicsError> for CliError {
    fn from(e: MechanicsError) -> Self {
        match e {
            MechanicsError::InvalidSpec(v) => Self::input(
                v.iter()
                    .map(|s| format!("spec: {s}"))
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            MechanicsError::ModelFamilyMismatch { .. } => Self::input(e.to_string()),
            MechanicsError::JointModel(j) => j.into(),
            _ => Self::computation(e.to_string()),
        }
    }
}
