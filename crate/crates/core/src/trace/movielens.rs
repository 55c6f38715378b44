use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::genre::genre_features;
use super::TraceError;
use crate::caching::FeatureVector;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovieRecord {
    pub movie_id: u32,
    pub title: String,
    pub features: FeatureVector,
}

/// One rating, counted as one content request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingEvent {
    pub user_id: u32,
    pub movie_id: u32,
    pub timestamp: u64,
}

/// Requests with timestamps in `[start, end)`, in time order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceWindow {
    pub start: u64,
    pub end: u64,
    pub events: Vec<RatingEvent>,
}

impl TraceWindow {
    pub fn new(start: u64, end: u64) -> Self {
        TraceWindow {
            start,
            end,
            events: Vec::new(),
        }
    }

    pub fn unbounded() -> Self {
        Self::new(0, u64::MAX)
    }

    pub fn contains(&self, timestamp: u64) -> bool {
        self.start <= timestamp && timestamp < self.end
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Chronological split: the first `fraction` of events and the rest.
    pub fn split(&self, fraction: f64) -> (&[RatingEvent], &[RatingEvent]) {
        let cut = ((self.events.len() as f64) * fraction).floor() as usize;
        self.events.split_at(cut.min(self.events.len()))
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), TraceError> {
    let headers = rdr.headers().map_err(|e| TraceError::parse(1, e))?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found.len() < expected.len() || found[..expected.len()] != *expected {
        return Err(TraceError::Parse {
            line: 1,
            message: format!("header {:?}, expected {:?}", found, expected),
        });
    }
    Ok(())
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn field<'a>(record: &'a csv::StringRecord, i: usize, name: &str) -> Result<&'a str, TraceError> {
    record
        .get(i)
        .map(str::trim)
        .ok_or_else(|| TraceError::parse(line_of(record), format!("missing field {name}")))
}

fn number<T: std::str::FromStr>(
    record: &csv::StringRecord,
    i: usize,
    name: &str,
) -> Result<T, TraceError> {
    let raw = field(record, i, name)?;
    raw.parse().map_err(|_| {
        TraceError::parse(
            line_of(record),
            format!("{name} `{raw}` is not a valid number"),
        )
    })
}

/// Reads `movieId,title,genres` rows.
pub fn parse_movies<R: Read>(input: R) -> Result<Vec<MovieRecord>, TraceError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["movieId", "title", "genres"])?;
    let mut movies = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                return Err(TraceError::parse(line, e));
            }
        }
        let line = line_of(&record);
        if record.len() != 3 {
            return Err(TraceError::parse(
                line,
                format!("expected 3 fields, found {}", record.len()),
            ));
        }
        let features = genre_features(field(&record, 2, "genres")?)
            .map_err(|token| TraceError::UnknownGenre { line, token })?;
        movies.push(MovieRecord {
            movie_id: number(&record, 0, "movieId")?,
            title: record[1].to_string(),
            features,
        });
    }
    Ok(movies)
}

/// Reads `userId,movieId,rating,timestamp` rows, keeping events inside
/// `[start, end)`, sorted by timestamp (stable on ties).
pub fn parse_ratings<R: Read>(input: R, start: u64, end: u64) -> Result<TraceWindow, TraceError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["userId", "movieId", "rating", "timestamp"])?;
    let mut window = TraceWindow::new(start, end);
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                return Err(TraceError::parse(line, e));
            }
        }
        let line = line_of(&record);
        if record.len() != 4 {
            return Err(TraceError::parse(
                line,
                format!("expected 4 fields, found {}", record.len()),
            ));
        }
        let _rating: f64 = number(&record, 2, "rating")?;
        let event = RatingEvent {
            user_id: number(&record, 0, "userId")?,
            movie_id: number(&record, 1, "movieId")?,
            timestamp: number(&record, 3, "timestamp")?,
        };
        if window.contains(event.timestamp) {
            window.events.push(event);
        }
    }
    window.events.sort_by_key(|e| e.timestamp);
    Ok(window)
}

pub fn load_movies(path: &Path) -> Result<Vec<MovieRecord>, TraceError> {
    let file = File::open(path).map_err(|e| TraceError::io(path, e))?;
    parse_movies(std::io::BufReader::new(file))
}

pub fn load_ratings(path: &Path, start: u64, end: u64) -> Result<TraceWindow, TraceError> {
    let file = File::open(path).map_err(|e| TraceError::io(path, e))?;
    parse_ratings(std::io::BufReader::new(file), start, end)
}
