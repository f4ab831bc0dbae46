use std::collections::HashMap;
use std::path::{Path, PathBuf};

use kwglow::evaluation::{category_report, compare_models, ingest_ratings, model_ids, MosReport};
use serde_json::json;

use super::write_file;
use crate::fail::{CmdResult, Failure};

fn render_report(r: &MosReport) -> String {
    let mut out = format!("model {}\ncategory\tmean\tn\n", r.model_id);
    for (cat, c) in &r.per_category {
        out.push_str(&format!("{cat}\t{:.2}\t{}\n", c.mean, c.n));
    }
    out.push_str(&format!("overall (mean of categories)\t{:.2}\n", r.overall_mean_of_categories));
    out.push_str(&format!("overall (mean of ratings)\t{:.2}\n", r.overall_mean_of_ratings));
    out
}

pub fn mos(ratings: &Path, compare: &[PathBuf], json_path: Option<&Path>) -> CmdResult {
    let files: Vec<&Path> = std::iter::once(ratings).chain(compare.iter().map(PathBuf::as_path)).collect();
    let mut reports: Vec<(&Path, MosReport)> = Vec::new();
    for path in &files {
        let records = ingest_ratings(path)?;
        if records.is_empty() {
            return Err(Failure::Data(format!("{}: no ratings", path.display())));
        }
        for model in model_ids(&records) {
            reports.push((path, category_report(&records, &model)?));
        }
    }
    // The same model id in two files gets the file name appended.
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (_, r) in &reports {
        *seen.entry(r.model_id.clone()).or_default() += 1;
    }
    for (path, r) in &mut reports {
        if seen[&r.model_id] > 1 {
            let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
            r.model_id = format!("{} ({name})", r.model_id);
        }
    }
    let reports: Vec<MosReport> = reports.into_iter().map(|(_, r)| r).collect();

    for (i, r) in reports.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", render_report(r));
    }
    let comparison = (reports.len() > 1).then(|| compare_models(&reports));
    if let Some(table) = &comparison {
        println!();
        print!("{}", table.render(2));
    }
    if let Some(path) = json_path {
        let value = json!({ "reports": reports, "comparison": comparison });
        write_file(path, serde_json::to_string_pretty(&value).expect("reports serialise"))?;
    }
    Ok(())
}
