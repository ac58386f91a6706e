//! Held-out evaluation of cross-validation folds.

use std::collections::HashMap;
use std::path::Path;

use super::metrics::{compute_metrics, summarize_folds, MeanStd, MetricsReport};
use super::predict::{predict_clips, ClipPrediction};
use super::report::VerdictRow;
use super::vote::vote_all;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::pose::{Clip, TaskMode};

/// Video verdicts, clip predictions and metrics for one held-out fold.
#[derive(Debug, Clone)]
pub struct FoldEvaluation {
    pub fold: usize,
    pub rows: Vec<VerdictRow>,
    pub predictions: Vec<ClipPrediction>,
    pub report: MetricsReport,
}

/// Predicts, votes and scores the clips of one fold's validation videos.
pub fn evaluate_fold(model: &Model, clips: &[&Clip], fold: usize, mode: TaskMode) -> Result<FoldEvaluation> {
    let mut truth: HashMap<&str, usize> = HashMap::new();
    for c in clips {
        let class = mode
            .class_of(c.label)
            .ok_or_else(|| Error::Validation(format!("clip {} has label {} outside the task", c.id(), c.label)))?;
        truth.insert(c.video_id.as_str(), class);
    }
    let predictions = predict_clips(model, clips)?;
    let verdicts = vote_all(&predictions)?;
    let rows: Vec<VerdictRow> = verdicts
        .into_iter()
        .map(|v| VerdictRow {
            true_class: truth.get(v.video_id.as_str()).copied(),
            verdict: v,
        })
        .collect();
    let preds: Vec<usize> = rows.iter().map(|r| r.verdict.voted_class).collect();
    let truths: Vec<usize> = rows.iter().filter_map(|r| r.true_class).collect();
    let report = compute_metrics(&preds, &truths, mode);
    Ok(FoldEvaluation {
        fold,
        rows,
        predictions,
        report,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn cell_ms(v: Option<MeanStd>, std: bool) -> String {
    v.map_or_else(String::new, |m| if std { m.std } else { m.mean }.to_string())
}

/// One row per fold followed by `mean` and `std` rows (population std).
pub fn write_fold_metrics(path: &Path, evals: &[FoldEvaluation]) -> Result<()> {
    let reports: Vec<MetricsReport> = evals.iter().map(|e| e.report.clone()).collect();
    let summary = summarize_folds(&reports);
    crate::io::write_csv_atomic(path, |w| {
        w.write_record(["fold", "ac", "se", "sp", "f1"])?;
        for e in evals {
            let r = &e.report;
            w.write_record([e.fold.to_string(), cell(r.ac), cell(r.se), cell(r.sp), cell(r.f1)])?;
        }
        for (name, std) in [("mean", false), ("std", true)] {
            w.write_record([
                name.to_string(),
                cell_ms(summary.ac, std),
                cell_ms(summary.se, std),
                cell_ms(summary.sp, std),
                cell_ms(summary.f1, std),
            ])?;
        }
        Ok(())
    })
}

/// One-vs-rest metrics per fold and class.
pub fn write_class_metrics(path: &Path, evals: &[FoldEvaluation]) -> Result<()> {
    crate::io::write_csv_atomic(path, |w| {
        w.write_record(["fold", "class", "support", "se", "sp", "f1"])?;
        for e in evals {
            for c in &e.report.per_class {
                w.write_record([
                    e.fold.to_string(),
                    c.class.clone(),
                    c.support.to_string(),
                    cell(c.se),
                    cell(c.sp),
                    cell(c.f1),
                ])?;
            }
        }
        Ok(())
    })
}
