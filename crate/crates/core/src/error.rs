// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },

    #[error("line {line}: unparseable date `{value}` (expected YYYY-MM or YYYY-MM-DD)")]
    BadDate { line: usize, value: String },

    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },

    #[error("corpus contains no documents")]
    EmptyCorpus,

    #[error("empty topic phrase")]
    EmptyPhrase,

    #[error("requested {requested} topics but only {available} candidates have positive prevalence")]
    InsufficientTopics { requested: usize, available: usize },

    #[error("topic `{0}` does not occur in any document")]
    AbsentTopic(String),

    #[error("corpus span of {actual} months is too short: {required} months required")]
    SpanTooShort { required: u32, actual: u32 },

    #[error("window {center} ±{half_width} lies outside the corpus span {first}..{last}")]
    WindowOutsideSpan {
        center: String,
        half_width: u32,
        first: String,
        last: String,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {required} observations, got {actual}")]
    TooFewObservations { required: usize, actual: usize },

    #[error("need at least {required} nodes, got {actual}")]
    TooFewNodes { required: usize, actual: usize },

    #[error("network has no edges")]
    NoEdges,

    #[error("no reachable node pairs")]
    NoReachablePairs,

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("partition covers {partition} nodes but the network has {network}")]
    NodeSetMismatch { partition: usize, network: usize },

    #[error("identical deviances: every paired difference is zero")]
    IdenticalDeviances,

    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("null standard deviation is zero at window {0}")]
    ZeroNullSd(String),

    #[error("null model precondition: {0}")]
    NullPrecondition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Broad failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Usage(_) | Error::InvalidParameter(_) => ErrorKind::Usage,
            Error::Io { .. }
            | Error::Schema { .. }
            | Error::MissingField { .. }
            | Error::BadDate { .. }
            | Error::DuplicateId { .. }
            | Error::EmptyCorpus
            | Error::EmptyPhrase
            | Error::InsufficientTopics { .. }
            | Error::AbsentTopic(_)
            | Error::SpanTooShort { .. }
            | Error::WindowOutsideSpan { .. }
            | Error::InvalidNetwork(_)
            | Error::NodeSetMismatch { .. }
            | Error::LengthMismatch { .. }
            | Error::Json(_)
            | Error::Csv(_) => ErrorKind::Data,
            Error::UndefinedCorrelation(_)
            | Error::TooFewObservations { .. }
            | Error::TooFewNodes { .. }
            | Error::NoEdges
            | Error::NoReachablePairs
            | Error::IdenticalDeviances
            | Error::ZeroVariance(_)
            | Error::ZeroNullSd(_)
            | Error::NullPrecondition(_) => ErrorKind::Numeric,
            Error::Context { source, .. } => source.kind(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| e.context(context()))
    }
}
