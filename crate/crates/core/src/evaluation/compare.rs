use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use super::MosReport;

/// Category × model matrix of means. Columns follow the input order and
/// rows are sorted by category name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub models: Vec<String>,
    pub categories: Vec<String>,
    /// `cells[row][column]`, `None` where a model has no ratings in that
    /// category.
    pub cells: Vec<Vec<Option<f64>>>,
    pub overall_mean_of_categories: Vec<f64>,
    pub overall_mean_of_ratings: Vec<f64>,
}

pub fn compare_models(reports: &[MosReport]) -> Comparison {
    let categories: Vec<String> =
        reports.iter().flat_map(|r| r.per_category.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let cells = categories
        .iter()
        .map(|c| reports.iter().map(|r| r.per_category.get(c).map(|m| m.mean)).collect())
        .collect();
    Comparison {
        models: reports.iter().map(|r| r.model_id.clone()).collect(),
        categories,
        cells,
        overall_mean_of_categories: reports.iter().map(|r| r.overall_mean_of_categories).collect(),
        overall_mean_of_ratings: reports.iter().map(|r| r.overall_mean_of_ratings).collect(),
    }
}

impl Comparison {
    /// Tab-separated table with `decimals` places; missing cells print `-`.
    pub fn render(&self, decimals: usize) -> String {
        let mut out = String::from("category");
        for m in &self.models {
            out.push('\t');
            out.push_str(m);
        }
        out.push('\n');
        let fmt = |v: f64| format!("{v:.decimals$}");
        for (cat, row) in self.categories.iter().zip(&self.cells) {
            out.push_str(cat);
            for cell in row {
                let _ = write!(out, "\t{}", cell.map(fmt).unwrap_or_else(|| "-".into()));
            }
            out.push('\n');
        }
        for (label, values) in [
            ("overall (mean of categories)", &self.overall_mean_of_categories),
            ("overall (mean of ratings)", &self.overall_mean_of_ratings),
        ] {
            out.push_str(label);
            for &v in values {
                let _ = write!(out, "\t{}", fmt(v));
            }
            out.push('\n');
        }
        out
    }
}
