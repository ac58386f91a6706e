//! Balanced accuracy, sensitivity, specificity and F1.
//!
//! Binary (class 1 positive): SE = TP/(TP+FN), SP = TN/(TN+FP),
//! AC = (SE+SP)/2, F1 = 2TP/(2TP+FP+FN). Multiclass: each class one-vs-rest,
//! macro averages over the classes present in the ground truth, and AC is
//! the mean per-class recall.

use serde::Serialize;

use crate::pose::TaskMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// One-vs-rest counts for `class`.
    pub fn one_vs_rest(preds: &[usize], truths: &[usize], class: usize) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in preds.iter().zip(truths) {
            match (p == class, t == class) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn f1(&self) -> Option<f64> {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: usize,
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub mode: TaskMode,
    pub ac: Option<f64>,
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub f1: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn compute_metrics(preds: &[usize], truths: &[usize], mode: TaskMode) -> MetricsReport {
    assert_eq!(preds.len(), truths.len(), "predictions and truths must align");
    let names = mode.class_names();
    let per_class: Vec<ClassMetrics> = (0..names.len())
        .map(|c| {
            let conf = Confusion::one_vs_rest(preds, truths, c);
            let support = conf.tp + conf.fn_;
            let defined = support > 0;
            ClassMetrics {
                class: names[c].to_string(),
                support,
                se: conf.sensitivity(),
                sp: conf.specificity(),
                f1: if defined { conf.f1() } else { None },
            }
        })
        .collect();

    match mode {
        TaskMode::Binary => {
            let conf = Confusion::one_vs_rest(preds, truths, 1);
            let (se, sp) = (conf.sensitivity(), conf.specificity());
            if se.is_none() || sp.is_none() {
                log::warn!("binary metrics: a class is absent from the ground truth");
            }
            MetricsReport {
                mode,
                ac: mean([se, sp].into_iter()),
                se,
                sp,
                f1: conf.f1(),
                per_class,
            }
        }
        TaskMode::Multiclass => {
            let present: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
            if present.len() < per_class.len() {
                log::warn!(
                    "classes absent from the ground truth are excluded from macro averages: {}",
                    per_class
                        .iter()
                        .filter(|c| c.support == 0)
                        .map(|c| c.class.as_str())
                        .collect::<Vec<_>>()
                        .join(",")
                );
            }
            let se = mean(present.iter().map(|c| c.se));
            MetricsReport {
                mode,
                ac: se,
                se,
                sp: mean(present.iter().map(|c| c.sp)),
                f1: mean(present.iter().map(|c| c.f1)),
                per_class,
            }
        }
    }
}

/// Mean and population standard deviation of one metric across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> Option<MeanStd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(MeanStd { mean, std: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub ac: Option<MeanStd>,
    pub se: Option<MeanStd>,
    pub sp: Option<MeanStd>,
    pub f1: Option<MeanStd>,
}

pub fn summarize_folds(reports: &[MetricsReport]) -> FoldSummary {
    let pick = |f: fn(&MetricsReport) -> Option<f64>| {
        let v: Vec<f64> = reports.iter().filter_map(f).collect();
        mean_std(&v)
    };
    FoldSummary {
        ac: pick(|r| r.ac),
        se: pick(|r| r.se),
        sp: pick(|r| r.sp),
        f1: pick(|r| r.f1),
    }
}
