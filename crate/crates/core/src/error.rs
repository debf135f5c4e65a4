use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("structurally infeasible: {0}")]
    Infeasible(String),

    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("mesh is not grid-addressable: {0}")]
    NotGridAddressable(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_level(self, level: usize) -> Self {
        Error::Level {
            level,
            source: Box::new(self),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
