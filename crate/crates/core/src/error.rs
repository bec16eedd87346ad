use std::fmt;

use thiserror::Error;

/// Where a non-finite value was first seen.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowUp {
    /// First offending grid index.
    pub index: usize,
    /// Simulation time, when known.
    pub t: Option<f64>,
    /// Runge-Kutta stage (1..=4), when raised inside a step.
    pub stage: Option<usize>,
}

impl fmt::Display for BlowUp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite value at grid index {}", self.index)?;
        if let Some(t) = self.t {
            write!(f, " at t={t}")?;
        }
        if let Some(stage) = self.stage {
            write!(f, " (stage {stage})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("blow-up: {0}")]
    BlowUp(BlowUp),

    #[error("spectrum is not conjugate-symmetric at signed index {index} (defect {defect:e})")]
    Symmetry { index: i64, defect: f64 },

    #[error("symbol is not finite at wavenumber {k}")]
    Symbol { k: f64 },

    #[error("direct DFT refused for N={n} (limit {limit})")]
    OracleTooLarge { n: usize, limit: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An estimate hypothesis failed; the message names the violated inequality.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A simulation needed by a study did not reach its end time.
    #[error("run failed: {0}")]
    Run(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn blow_up(index: usize) -> Self {
        Error::BlowUp(BlowUp {
            index,
            t: None,
            stage: None,
        })
    }

    /// Attach time and stage context to a blow-up error; other errors pass through.
    pub fn with_time(self, t: f64, stage: Option<usize>) -> Self {
        match self {
            Error::BlowUp(mut b) => {
                b.t = Some(t);
                if stage.is_some() {
                    b.stage = stage;
                }
                Error::BlowUp(b)
            }
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
