use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({constraint})")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error(
        "tail bound {tail:e} exceeds tolerance {tolerance:e} at the maximum cutoff {max_cutoff}"
    )]
    Cutoff {
        tail: f64,
        tolerance: f64,
        max_cutoff: usize,
    },

    #[error(
        "Z derivative of order {order} at y1 = {y1}: series ln-value {series} disagrees with \
         recurrence ln-value {recurrence}"
    )]
    Precision {
        order: usize,
        y1: f64,
        series: f64,
        recurrence: f64,
    },

    #[error("ancilla outcome {outcome} has zero probability")]
    DegenerateEvent { outcome: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("golden file: {0}")]
    Golden(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(name: &'static str, value: f64, constraint: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        constraint,
    }
}
