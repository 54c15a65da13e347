use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid symbol {0:?}: strings must contain only '0' and '1'")]
    InvalidSymbol(char),

    #[error("grammar id {0} is not a Tomita grammar (expected 1..=7)")]
    InvalidGrammar(u8),

    #[error("invalid automaton: {0}")]
    InvalidDfa(String),

    #[error("no {} strings of length {length}", if *.accepted { "accepted" } else { "rejected" })]
    EmptyLanguageSlice { length: usize, accepted: bool },

    #[error("training loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("K = {k} exceeds the number of distinct points ({distinct})")]
    KTooLarge { k: usize, distinct: usize },

    #[error("silhouette and k-means extraction need at least two clusters (got K = {k})")]
    NeedTwoClusters { k: usize },

    #[error("no activation traces to extract from")]
    EmptyTraceSet,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Maps a textual symbol onto its alphabet index.
#[inline]
pub fn symbol_index(c: u8) -> Result<usize> {
    match c {
        b'0' => Ok(0),
        b'1' => Ok(1),
        other => Err(Error::InvalidSymbol(other as char)),
    }
}

/// Checks that `s` only contains the binary alphabet.
pub fn validate_binary(s: &str) -> Result<()> {
    s.bytes().try_for_each(|b| symbol_index(b).map(|_| ()))
}
