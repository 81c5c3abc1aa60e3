use std::path::PathBuf;

use thiserror::Error;

use crate::curve::CurveError;
use crate::domain::Violation;
use crate::lp::{LpError, LpStatus};

#[derive(Debug, Error)]
pub enum EmsError {
    #[error("invalid configuration: {}", join(.0))]
    Validation(Vec<Violation>),
    #[error("config: {0}")]
    Config(String),
    #[error(
        "interval {interval}: non-deferrable work {work} exceeds processing capacity {capacity}"
    )]
    InfeasibleWorkload {
        interval: usize,
        work: f64,
        capacity: f64,
    },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("horizon starting at interval {start}: LP {status} ({detail})")]
    HorizonSolve {
        start: usize,
        status: LpStatus,
        detail: String,
    },
    #[error("interval {interval}: cannot repair dispatch: {detail}")]
    Unrepairable { interval: usize, detail: String },
    #[error("horizon {horizon}: deferrable work short by {shortfall} at its deadline")]
    DeadlineMissed { horizon: usize, shortfall: f64 },
    #[error("dispatch violates schedule invariants: {}", join(.0))]
    InfeasibleDispatch(Vec<Violation>),
    #[error("forecast: {0}")]
    Forecast(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("unsupported format `{0}`; supported formats: csv, json")]
    UnknownFormat(String),
    #[error("unknown synthetic profile `{0}`; expected one of: windy, diurnal-solar, flat")]
    UnknownProfile(String),
    #[error("comparison needs a no-colocation baseline report")]
    MissingBaseline,
}

impl EmsError {
    /// Errors raised while optimizing or dispatching, as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            EmsError::Lp(_)
                | EmsError::HorizonSolve { .. }
                | EmsError::Unrepairable { .. }
                | EmsError::DeadlineMissed { .. }
                | EmsError::InfeasibleDispatch(_)
        )
    }
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = EmsError> = std::result::Result<T, E>;
