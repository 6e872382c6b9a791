use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("AP {ap}: {candidates} candidate UE groups exceeds the enumeration limit of {limit}")]
    TooManyCandidates {
        ap: usize,
        candidates: u128,
        limit: u128,
    },

    #[error("AP {ap}: no zero-forcing direction exists for UE {ue} (null space is empty)")]
    RankDeficient { ap: usize, ue: usize },

    #[error("AP {ap}: allocated {allocated} bits against a budget of {budget}")]
    BudgetMismatch {
        ap: usize,
        allocated: f64,
        budget: f64,
    },

    #[error("drop {drop}: {source}")]
    Drop {
        drop: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to parse configuration: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
