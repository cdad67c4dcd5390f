use std::fmt;

use nsvh::NsvhError;
use serde_json::{json, Value};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Error reported on stderr as a JSON object; `code` becomes the exit status.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
            details: None,
        }
    }

    pub fn io(context: &str, err: impl fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            kind: "io",
            message: format!("{context}: {err}"),
            details: None,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "error": {
                "kind": self.kind,
                "message": self.message,
                "exit_code": self.code,
            }
        });
        if let Some(d) = &self.details {
            v["error"]["details"] = d.clone();
        }
        v
    }
}

impl From<NsvhError> for CliError {
    fn from(e: NsvhError) -> Self {
        let message = e.to_string();
        let (code, kind, details) = match &e {
            NsvhError::InvalidParameter { name, .. } => {
                (EXIT_USAGE, "invalid_parameter", Some(json!({ "name": name })))
            }
            NsvhError::Domain(_) => (EXIT_USAGE, "domain", None),
            NsvhError::UnsupportedLambda(l) => (EXIT_USAGE, "unsupported_lambda", Some(json!({ "lambda": l }))),
            NsvhError::InsufficientData(_) => (EXIT_USAGE, "insufficient_data", None),
            NsvhError::InvalidGrid(_) => (EXIT_USAGE, "invalid_grid", None),
            NsvhError::DegenerateCorrelation(r) => {
                (EXIT_NUMERICAL, "degenerate_correlation", Some(json!({ "rho": r })))
            }
            NsvhError::ZeroVolOfVol => (EXIT_NUMERICAL, "zero_vol_of_vol", None),
            NsvhError::NoSolution(_) => (EXIT_NUMERICAL, "no_solution", None),
            NsvhError::ZeroVariance(_) => (EXIT_NUMERICAL, "zero_variance", None),
            NsvhError::InfeasibleMoments {
                min_exkurt,
                boundary_s_var,
                boundary_rho,
                ..
            } => (
                EXIT_NUMERICAL,
                "infeasible_moments",
                Some(json!({
                    "min_exkurt": min_exkurt,
                    "boundary_s_var": boundary_s_var,
                    "boundary_rho": boundary_rho,
                })),
            ),
        };
        Self {
            code,
            kind,
            message,
            details,
        }
    }
}
