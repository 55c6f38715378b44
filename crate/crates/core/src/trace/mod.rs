//! MovieLens ingestion, provider library assignment, request routing and a
//! synthetic Zipf trace generator.

mod dump;
pub mod genre;
mod movielens;
mod partition;
mod synth;

use std::path::Path;

use thiserror::Error;

pub use dump::{write_routed, write_trace};
pub use genre::{genre_features, genre_index, GENRES, GENRE_COUNT};
pub use movielens::{
    load_movies, load_ratings, parse_movies, parse_ratings, MovieRecord, RatingEvent, TraceWindow,
};
pub use partition::{partition_libraries, route_requests, CpAssignment, RoutedRequest};
pub use synth::{synth_trace, synth_trace_with, SynthOptions};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown genre `{token}`")]
    UnknownGenre { line: usize, token: String },
    #[error("catalog has {available} movies, {needed} needed")]
    Sizing { needed: usize, available: usize },
    #[error("synthetic trace: {0}")]
    Synth(String),
}

impl TraceError {
    pub(crate) fn parse(line: usize, message: impl std::fmt::Display) -> Self {
        TraceError::Parse {
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        TraceError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
