use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use strata::attribution::AttributionError;
use strata::eval::{EmbedError, EvalError};
use strata::probe::ProbeError;
use strata::sae::SaeError;
use strata::store::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Config,
    Data,
    Numerical,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Numerical => 4,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<String>,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
            path: None,
            issues: Vec::new(),
        }
    }

    pub fn config(issues: Vec<String>) -> Self {
        Self {
            kind: Kind::Config,
            message: format!("{} configuration problem(s)", issues.len()),
            path: None,
            issues,
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(Kind::Data, message)
    }

    pub fn at(mut self, path: impl Into<PathBuf>) -> Self {
        self.path.get_or_insert(path.into());
        self
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::data(format!("i/o error at {}: {e}", path.display())).at(path)
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

fn with_path(kind: Kind, message: String, path: Option<&Path>) -> CliError {
    let mut e = CliError::new(kind, message);
    e.path = path.map(Path::to_path_buf);
    e
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        let path = match &e {
            StoreError::Corrupt { path, .. } | StoreError::Io { path, .. } | StoreError::Parquet { path, .. } => Some(path.as_path()),
            _ => None,
        };
        with_path(Kind::Data, e.to_string(), path)
    }
}

impl From<SaeError> for CliError {
    fn from(e: SaeError) -> Self {
        match e {
            SaeError::Config(issues) => CliError::config(issues.iter().map(|i| crate::config::rekey(i)).collect()),
            SaeError::Store(s) => s.into(),
            SaeError::NonFinite { .. } | SaeError::ZeroScale => CliError::new(Kind::Numerical, e.to_string()),
            SaeError::Checkpoint { ref path, .. } | SaeError::Io { ref path, .. } => {
                with_path(Kind::Data, e.to_string(), Some(path))
            }
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Config(issues) => CliError::config(issues),
            EvalError::Store(s) => s.into(),
            EvalError::Format { ref path, .. } | EvalError::Io { ref path, .. } => with_path(Kind::Data, e.to_string(), Some(path)),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Config(issues) => CliError::config(issues.iter().map(|i| crate::config::rekey(i)).collect()),
            ProbeError::NonFinite { .. } => CliError::new(Kind::Numerical, e.to_string()),
            ProbeError::Eval(inner) => inner.into(),
            ProbeError::Store(inner) => inner.into(),
            ProbeError::Format { ref path, .. } | ProbeError::Io { ref path, .. } => with_path(Kind::Data, e.to_string(), Some(path)),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<AttributionError> for CliError {
    fn from(e: AttributionError) -> Self {
        match e {
            AttributionError::Sae(inner) => inner.into(),
            AttributionError::Store(inner) => inner.into(),
            AttributionError::Format { ref path, .. } | AttributionError::Io { ref path, .. } => {
                with_path(Kind::Data, e.to_string(), Some(path))
            }
            other => CliError::data(other.to_string()),
        }
    }
}
