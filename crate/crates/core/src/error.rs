use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid mixing matrix: {0}")]
    Mixing(String),

    #[error("invalid delay model: {0}")]
    Delay(String),

    #[error("cannot schedule event at t={event_time} before current time t={now}")]
    ScheduleInPast { event_time: f64, now: f64 },

    #[error(
        "agent {agent} diverged at update {update}: iterate norm {norm:e} (alpha={alpha}, beta={beta:?})"
    )]
    Divergence {
        agent: usize,
        update: u64,
        norm: f64,
        alpha: f64,
        beta: Option<f64>,
    },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error("audit: {0}")]
    Audit(String),

    #[error("config: {0}")]
    Config(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
