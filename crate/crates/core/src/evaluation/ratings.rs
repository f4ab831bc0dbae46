//! The ratings CSV: a fixed header, then one rating per row. The listening
//! service only ever appends to it.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use super::{check_score, EvalError, RatingRecord};

pub const RATINGS_HEADER: [&str; 6] = ["rater_id", "sample_id", "category", "model_id", "score", "timestamp"];

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EvalError + '_ {
    move |source| EvalError::Io { path: path.to_path_buf(), source }
}

/// Parses and validates ratings. Line numbers in errors are 1-based file
/// lines, so the header is line 1.
pub fn parse_ratings(reader: impl Read) -> Result<Vec<RatingRecord>, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(|e| EvalError::Parse { line: 1, message: e.to_string() })?,
    };
    if header.iter().ne(RATINGS_HEADER) {
        return Err(EvalError::Parse { line: 1, message: format!("header must be `{}`", RATINGS_HEADER.join(",")) });
    }
    let mut out = Vec::new();
    let mut first_seen: HashMap<(String, String, String), usize> = HashMap::new();
    for row in rows {
        let row = row.map_err(|e| EvalError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| EvalError::Parse { line, message };
        if row.len() != RATINGS_HEADER.len() {
            return Err(parse_err(format!("expected {} fields, found {}", RATINGS_HEADER.len(), row.len())));
        }
        for (i, name) in [(0, "rater_id"), (1, "sample_id"), (2, "category"), (3, "model_id")] {
            if row[i].is_empty() {
                return Err(parse_err(format!("empty {name}")));
            }
        }
        let score: i64 = row[4].trim().parse().map_err(|_| parse_err(format!("score `{}` is not an integer", &row[4])))?;
        let score = check_score(score).map_err(|_| EvalError::ScoreOutOfRange { score, line: Some(line) })?;
        let timestamp = row[5].trim().parse().map_err(|_| parse_err(format!("bad timestamp `{}`", &row[5])))?;
        let rec = RatingRecord {
            rater_id: row[0].to_string(),
            sample_id: row[1].to_string(),
            category: row[2].to_string(),
            model_id: row[3].to_string(),
            score,
            timestamp,
        };
        let key = (rec.rater_id.clone(), rec.sample_id.clone(), rec.model_id.clone());
        if let Some(&first_line) = first_seen.get(&key) {
            return Err(EvalError::DuplicateRating {
                rater_id: rec.rater_id,
                sample_id: rec.sample_id,
                model_id: rec.model_id,
                line,
                first_line,
            });
        }
        first_seen.insert(key, line);
        out.push(rec);
    }
    Ok(out)
}

pub fn ingest_ratings(path: impl AsRef<Path>) -> Result<Vec<RatingRecord>, EvalError> {
    let path = path.as_ref();
    parse_ratings(File::open(path).map_err(io_err(path))?)
}

fn row(r: &RatingRecord) -> [String; 6] {
    [
        r.rater_id.clone(),
        r.sample_id.clone(),
        r.category.clone(),
        r.model_id.clone(),
        r.score.to_string(),
        r.timestamp.to_string(),
    ]
}

/// Header plus one row per rating.
pub fn write_ratings(ratings: &[RatingRecord], writer: impl Write) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RATINGS_HEADER)?;
    for r in ratings {
        w.write_record(row(r))?;
    }
    w.flush()
}

pub fn export_ratings(ratings: &[RatingRecord], path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    write_ratings(ratings, file).map_err(io_err(path))
}

/// Appends ratings to a CSV file, each one flushed and synced before
/// [`append`](Self::append) returns.
#[derive(Debug)]
pub struct RatingsWriter {
    file: File,
    path: PathBuf,
}

impl RatingsWriter {
    /// Opens `path` for appending, writing the header if the file is new or
    /// empty.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        if file.metadata().map_err(io_err(path))?.len() == 0 {
            let mut buf = Vec::new();
            write_ratings(&[], &mut buf).map_err(io_err(path))?;
            file.write_all(&buf).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
        }
        Ok(Self { file, path: path.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, rating: &RatingRecord) -> Result<(), EvalError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(row(rating)).map_err(|e| io_err(&self.path)(e.into()))?;
        let bytes = w.into_inner().map_err(|e| io_err(&self.path)(e.into_error()))?;
        self.file.write_all(&bytes).map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}
