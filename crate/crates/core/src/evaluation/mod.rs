//! Mean opinion scores.
//!
//! Ratings are integers on a 1 to 5 scale. A [`MosReport`] carries two
//! overall figures because they differ whenever categories have unequal
//! rating counts: the unweighted mean of the per-category means, and the
//! plain mean over every rating.

mod compare;
mod ratings;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{compare_models, Comparison};
pub use ratings::{export_ratings, ingest_ratings, parse_ratings, write_ratings, RatingsWriter, RATINGS_HEADER};

pub const MIN_SCORE: i64 = 1;
pub const MAX_SCORE: i64 = 5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no scores to average")]
    EmptyScores,
    #[error("{}score {score} outside {MIN_SCORE}..={MAX_SCORE}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    ScoreOutOfRange { score: i64, line: Option<usize> },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: rater `{rater_id}` already rated `{sample_id}` for model `{model_id}` on line {first_line}")]
    DuplicateRating { rater_id: String, sample_id: String, model_id: String, line: usize, first_line: usize },
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub sample_id: String,
    pub category: String,
    pub model_id: String,
    pub score: u8,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RatingRecord {
    /// One rating per rater, sample and model.
    pub fn key(&self) -> (&str, &str, &str) {
        (&self.rater_id, &self.sample_id, &self.model_id)
    }
}

pub fn check_score(score: i64) -> Result<u8, EvalError> {
    if (MIN_SCORE..=MAX_SCORE).contains(&score) {
        Ok(score as u8)
    } else {
        Err(EvalError::ScoreOutOfRange { score, line: None })
    }
}

/// Arithmetic mean of the scores.
pub fn mos(scores: &[i64]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let mut sum = 0i64;
    for &s in scores {
        check_score(s)?;
        sum += s;
    }
    Ok(sum as f64 / scores.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryMos {
    pub mean: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosReport {
    pub model_id: String,
    pub per_category: BTreeMap<String, CategoryMos>,
    /// Unweighted mean of the per-category means.
    pub overall_mean_of_categories: f64,
    /// Mean over all ratings.
    pub overall_mean_of_ratings: f64,
}

/// Report over the ratings of `model_id`; ratings for other models are
/// ignored. Fails with [`EvalError::EmptyScores`] if there are none.
pub fn category_report(ratings: &[RatingRecord], model_id: &str) -> Result<MosReport, EvalError> {
    let mut by_cat: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    let mut all = Vec::new();
    for r in ratings.iter().filter(|r| r.model_id == model_id) {
        by_cat.entry(&r.category).or_default().push(r.score as i64);
        all.push(r.score as i64);
    }
    let overall_mean_of_ratings = mos(&all)?;
    let mut per_category = BTreeMap::new();
    for (cat, scores) in by_cat {
        per_category.insert(cat.to_string(), CategoryMos { mean: mos(&scores)?, n: scores.len() });
    }
    let overall_mean_of_categories = per_category.values().map(|c| c.mean).sum::<f64>() / per_category.len() as f64;
    Ok(MosReport { model_id: model_id.to_string(), per_category, overall_mean_of_categories, overall_mean_of_ratings })
}

/// Model ids in order of first appearance.
pub fn model_ids(ratings: &[RatingRecord]) -> Vec<String> {
    let mut ids: Vec<String> = Vec::new();
    for r in ratings {
        if !ids.contains(&r.model_id) {
            ids.push(r.model_id.clone());
        }
    }
    ids
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rating(cat: &str, score: u8) -> RatingRecord {
        RatingRecord {
            rater_id: "r".into(),
            sample_id: format!("{cat}{score}"),
            category: cat.into(),
            model_id: "m".into(),
            score,
            timestamp: 0,
        }
    }

    #[test]
    fn mos_examples() {
        assert_eq!(mos(&[5; 12]).unwrap(), 5.0);
        assert_eq!(mos(&[4, 5]).unwrap(), 4.5);
        assert!(matches!(mos(&[]), Err(EvalError::EmptyScores)));
        assert!(matches!(mos(&[3, 6]), Err(EvalError::ScoreOutOfRange { score: 6, line: None })));
        assert!(matches!(mos(&[0]), Err(EvalError::ScoreOutOfRange { score: 0, .. })));
    }

    #[test]
    fn single_rating_report() {
        let r = category_report(&[rating("news", 3)], "m").unwrap();
        assert_eq!(r.per_category["news"], CategoryMos { mean: 3.0, n: 1 });
        assert_eq!((r.overall_mean_of_categories, r.overall_mean_of_ratings), (3.0, 3.0));
        assert!(matches!(category_report(&[rating("news", 3)], "other"), Err(EvalError::EmptyScores)));
    }

    #[test]
    fn overalls_differ_with_unequal_counts() {
        let ratings = [rating("a", 5), rating("b", 3), rating("b", 4)];
        let r = category_report(&ratings, "m").unwrap();
        assert_eq!(r.overall_mean_of_categories, (5.0 + 3.5) / 2.0);
        assert_eq!(r.overall_mean_of_ratings, 4.0);
    }
}
