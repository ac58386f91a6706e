//! Clip prediction, video voting, metrics and attention reporting.

mod folds;
mod metrics;
mod predict;
mod report;
mod vote;

pub use folds::{evaluate_fold, write_class_metrics, write_fold_metrics, FoldEvaluation};
pub use metrics::{compute_metrics, mean_std, summarize_folds, ClassMetrics, Confusion, FoldSummary, MeanStd, MetricsReport};
pub use predict::{predict_clip, predict_clips, ClipPrediction};
pub use report::{
    frame_trace_svg, joint_attention, joint_bar_svg, joint_table, read_frame_traces, read_verdicts,
    write_attention_report, write_frame_traces, write_verdicts, VerdictRow,
};
pub use vote::{vote_all, vote_video, VideoVerdict};
