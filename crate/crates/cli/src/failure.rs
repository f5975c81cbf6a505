use std::fmt;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const CONFIG: u8 = 2;
pub const DATA: u8 = 3;
pub const NON_CONVERGENCE: u8 = 4;
const OTHER: u8 = 1;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            code: CONFIG,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: DATA,
            message: message.into(),
        }
    }

    pub fn non_convergence(message: impl Into<String>) -> Self {
        Failure {
            code: NON_CONVERGENCE,
            message: message.into(),
        }
    }

    /// Prefix the message with where it happened, keeping the code.
    pub fn context(self, place: &str) -> Self {
        Failure {
            code: self.code,
            message: format!("{place}: {}", self.message),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<fedgw::Error> for Failure {
    fn from(e: fedgw::Error) -> Self {
        use fedgw::Error::*;
        let code = match e {
            Load { .. } | Format { .. } | Io(_) | Precondition(_) | Stratification(_) | Partition(_) | SizeCap { .. } => DATA,
            Parameter(_) | Domain(_) => CONFIG,
            Shape(_) | Numeric(_) | Aggregation(_) => OTHER,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: OTHER,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: OTHER,
            message: e.to_string(),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;
