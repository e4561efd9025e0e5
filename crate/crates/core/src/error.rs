use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("delay grid is empty")]
    EmptyGrid,

    #[error("grid `{0}` must be strictly increasing")]
    NonIncreasingGrid(&'static str),

    #[error("trials_per_point must be positive")]
    ZeroTrials,

    #[error("baseline window: {0}")]
    BaselineWindow(String),

    #[error("unusable normalization: baseline is zero")]
    ZeroBaseline,

    #[error("scan has not been normalized (no baseline estimate)")]
    NotNormalized,

    #[error("sample rate {rate} Hz violates the Nyquist margin (need > {required} Hz)")]
    Nyquist { rate: f64, required: f64 },

    #[error("degenerate segmentation: {0}")]
    Segmentation(String),

    #[error("no dominant spectral peak: {0}")]
    NoDominantPeak(String),

    #[error("nothing to fit: {0}")]
    NothingToFit(String),

    #[error("{points} data points cannot constrain {params} free parameters")]
    TooFewPoints { points: usize, params: usize },

    #[error("all coincidence counts are zero")]
    AllZeroCounts,

    #[error("fit did not converge: {0}")]
    NoConvergence(String),

    #[error("relative error undefined: mean of {0} and {1} is zero")]
    DegenerateMean(f64, f64),

    #[error("at least 3 settings are required, got {0}")]
    TooFewSettings(usize),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of a numerical procedure on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoDominantPeak(_)
                | Error::NothingToFit(_)
                | Error::NoConvergence(_)
                | Error::DegenerateMean(..)
        )
    }
}
