use std::fmt;
use std::path::Path;

use balance_core::config::ConfigError;
use balance_core::control::ControlError;
use balance_core::ingest::IngestError;
use balance_core::phase::PhaseError;
use balance_core::plant::PlantError;
use balance_core::zones::ZoneError;

/// Process exit status per failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Config = 2,
    Data = 3,
    Runtime = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    /// `module::Variant` of the underlying error.
    pub name: String,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, name: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            exit,
            name: name.into(),
            message: message.into(),
        }
    }

    pub fn io(exit: Exit, path: &Path, err: std::io::Error) -> Self {
        Self::new(exit, "io", format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.message)
    }
}

/// Variant name from the derived `Debug` output.
fn variant<E: fmt::Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    dbg.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

fn named<E: fmt::Debug + fmt::Display>(exit: Exit, module: &str, e: &E) -> CliError {
    CliError::new(exit, format!("{module}::{}", variant(e)), e.to_string())
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        named(Exit::Config, "config", &e)
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        let exit = match e {
            IngestError::CutoffOutOfRange { .. } | IngestError::UnsupportedOrder(_) => Exit::Config,
            _ => Exit::Data,
        };
        named(exit, "ingest", &e)
    }
}

impl From<PhaseError> for CliError {
    fn from(e: PhaseError) -> Self {
        match e {
            PhaseError::Ingest(inner) => inner.into(),
            PhaseError::InvalidTolerance(_) | PhaseError::InvalidLogisticParams { .. } => named(Exit::Config, "phase", &e),
            _ => named(Exit::Data, "phase", &e),
        }
    }
}

impl From<ZoneError> for CliError {
    fn from(e: ZoneError) -> Self {
        let exit = match e {
            ZoneError::EmptySeries => Exit::Data,
            ZoneError::InvalidBounds(_) => Exit::Config,
        };
        named(exit, "zones", &e)
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        let exit = match &e {
            ControlError::Phase(inner) => return inner.clone().into(),
            ControlError::NoUltimateGain { .. } | ControlError::NoDecayMeasurement { .. } => Exit::Runtime,
            ControlError::NoRuleFires(_) | ControlError::InvalidDistance(_) => Exit::Data,
            _ => Exit::Config,
        };
        named(exit, "control", &e)
    }
}

impl From<PlantError> for CliError {
    fn from(e: PlantError) -> Self {
        let exit = match &e {
            PlantError::Control(inner) => return inner.clone().into(),
            PlantError::Fall { .. } => Exit::Runtime,
            PlantError::TraceFormat { .. } => Exit::Data,
            PlantError::InvalidParams(_) | PlantError::InvalidScenario(_) => Exit::Config,
        };
        named(exit, "plant", &e)
    }
}
