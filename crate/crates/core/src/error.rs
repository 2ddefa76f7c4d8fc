use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("user {user} routes through link {link}, but the network has {links} links")]
    LinkOutOfRange { user: usize, link: usize, links: usize },

    #[error("user {user} lists link {link} more than once")]
    DuplicateLink { user: usize, link: usize },

    #[error("user index {index} out of range for {users} users")]
    UserOutOfRange { index: usize, users: usize },

    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("single-link solver called on a network with {links} links")]
    NotSingleLink { links: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("population {index}: {source}")]
    Population {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
