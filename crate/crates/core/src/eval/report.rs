//! Verdict files and attention reports (text tables plus SVG plots).

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::predict::ClipPrediction;
use super::vote::VideoVerdict;
use crate::error::{Error, Result};
use crate::model::{mean_weights, JointWeights};
use crate::pose::{NODE_COUNT, NODE_NAMES};

/// A verdict together with its ground truth, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub verdict: VideoVerdict,
    pub true_class: Option<usize>,
}

pub fn write_verdicts(path: &Path, rows: &[VerdictRow], class_names: &[&str]) -> Result<()> {
    crate::io::write_csv_atomic(path, |w| {
        let mut header: Vec<String> = ["video_id", "true_label", "voted_label", "clip_count"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..class_names.len()).map(|c| format!("p_class_{c}")));
        header.extend((1..=NODE_COUNT).map(|j| format!("att_j{j}")));
        w.write_record(&header)?;
        for r in rows {
            let v = &r.verdict;
            let mut rec = vec![
                v.video_id.clone(),
                r.true_class.map_or(String::new(), |c| class_names[c].to_string()),
                class_names[v.voted_class].to_string(),
                v.clip_count.to_string(),
            ];
            rec.extend(v.mean_probs.iter().map(f64::to_string));
            rec.extend(v.attention.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn read_verdicts(path: &Path, class_names: &[&str]) -> Result<Vec<VerdictRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let class_of = |name: &str| {
        class_names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::Validation(format!("{}: unknown class {name:?}", path.display())))
    };
    let k = class_names.len();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 4 + k + NODE_COUNT {
            return Err(Error::Validation(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                4 + k + NODE_COUNT,
                rec.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Validation(format!("{}: bad number {:?}", path.display(), &rec[i])))
        };
        let mut attention = [0.0; NODE_COUNT];
        for (j, a) in attention.iter_mut().enumerate() {
            *a = num(4 + k + j)?;
        }
        rows.push(VerdictRow {
            true_class: if rec[1].is_empty() { None } else { Some(class_of(&rec[1])?) },
            verdict: VideoVerdict {
                video_id: rec[0].to_string(),
                voted_class: class_of(&rec[2])?,
                clip_count: rec[3]
                    .parse()
                    .map_err(|_| Error::Validation(format!("{}: bad clip_count", path.display())))?,
                mean_probs: (0..k).map(|c| num(4 + c)).collect::<Result<_>>()?,
                attention,
            },
        });
    }
    Ok(rows)
}

pub fn write_frame_traces(path: &Path, preds: &[ClipPrediction]) -> Result<()> {
    crate::io::write_csv_atomic(path, |w| {
        let mut header = vec!["video_id".to_string(), "clip_id".into(), "frame".into()];
        header.extend((1..=NODE_COUNT).map(|j| format!("att_j{j}")));
        w.write_record(&header)?;
        for p in preds {
            for (t, weights) in p.frame_attention.iter().enumerate() {
                let mut rec = vec![p.video_id.clone(), p.clip_id.clone(), t.to_string()];
                rec.extend(weights.iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        Ok(())
    })
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    video_id: String,
    #[allow(dead_code)]
    clip_id: String,
    #[allow(dead_code)]
    frame: usize,
    att_j1: f64,
    att_j2: f64,
    att_j3: f64,
    att_j4: f64,
    att_j5: f64,
    att_j6: f64,
    att_j7: f64,
}

/// Per-video concatenated frame weights, in file order.
pub fn read_frame_traces(path: &Path) -> Result<Vec<(String, Vec<JointWeights>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<(String, Vec<JointWeights>)> = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<TraceRow>() {
        let r = row?;
        let w = [r.att_j1, r.att_j2, r.att_j3, r.att_j4, r.att_j5, r.att_j6, r.att_j7];
        match out.last_mut() {
            Some((v, series)) if *v == r.video_id => series.push(w),
            _ => out.push((r.video_id, vec![w])),
        }
    }
    Ok(out)
}

/// Mean joint attention over all verdicts (renormalized).
pub fn joint_attention(verdicts: &[VideoVerdict]) -> JointWeights {
    let all: Vec<JointWeights> = verdicts.iter().map(|v| v.attention).collect();
    mean_weights(&all)
}

pub fn joint_table(weights: &JointWeights) -> String {
    let mut s = String::from("joint,name,mean_attention\n");
    for (j, w) in weights.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", j + 1, NODE_NAMES[j], w);
    }
    s
}

const COLORS: [&str; NODE_COUNT] = [
    "#d62728", "#ff7f0e", "#bcbd22", "#7f7f7f", "#17becf", "#1f77b4", "#9467bd",
];

/// Bar chart of mean attention per joint.
pub fn joint_bar_svg(weights: &JointWeights, title: &str) -> String {
    let (w, h, pad) = (560.0, 320.0, 40.0);
    let max = weights.iter().copied().fold(1e-12, f64::max);
    let bar = (w - 2.0 * pad) / NODE_COUNT as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{pad}\" y=\"20\" font-size=\"14\">{}</text>\n",
        escape(title)
    );
    for (j, &v) in weights.iter().enumerate() {
        let bh = (h - 2.5 * pad) * v / max;
        let x = pad + j as f64 * bar + 4.0;
        let y = h - pad - bh;
        let _ = writeln!(
            s,
            "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{bh:.1}\" fill=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.3}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            bar - 8.0,
            COLORS[j],
            x + (bar - 8.0) / 2.0,
            y - 4.0,
            v,
            x + (bar - 8.0) / 2.0,
            h - pad + 14.0,
            NODE_NAMES[j]
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per joint across frames.
pub fn frame_trace_svg(series: &[JointWeights], title: &str) -> String {
    let (w, h, pad) = (720.0, 340.0, 40.0);
    let n = series.len().max(2) as f64;
    let max = series.iter().flatten().copied().fold(1e-12, f64::max);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{pad}\" y=\"20\" font-size=\"14\">{}</text>\n",
        escape(title)
    );
    for j in 0..NODE_COUNT {
        let points: Vec<String> = series
            .iter()
            .enumerate()
            .map(|(t, wts)| {
                let x = pad + (w - 2.0 * pad - 90.0) * t as f64 / (n - 1.0);
                let y = h - pad - (h - 2.0 * pad) * wts[j] / max;
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" fill=\"{}\">{}</text>",
            COLORS[j],
            points.join(" "),
            w - pad - 80.0,
            pad + 14.0 * j as f64,
            COLORS[j],
            NODE_NAMES[j]
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the joint table and bar chart, plus a trace table and plot for each selected video.
pub fn write_attention_report(
    dir: &Path,
    verdicts: &[VideoVerdict],
    traces: &[(String, Vec<JointWeights>)],
) -> Result<JointWeights> {
    let weights = joint_attention(verdicts);
    crate::io::write_atomic(&dir.join("joint_attention.csv"), joint_table(&weights).as_bytes())?;
    crate::io::write_atomic(
        &dir.join("joint_attention.svg"),
        joint_bar_svg(&weights, "Mean attention per joint").as_bytes(),
    )?;
    for (video, series) in traces {
        let safe: String = video
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect();
        let mut table = String::from("frame");
        for name in NODE_NAMES {
            table.push(',');
            table.push_str(name);
        }
        table.push('\n');
        for (t, wts) in series.iter().enumerate() {
            let _ = write!(table, "{t}");
            for v in wts {
                let _ = write!(table, ",{v}");
            }
            table.push('\n');
        }
        crate::io::write_atomic(&dir.join(format!("frames_{safe}.csv")), table.as_bytes())?;
        crate::io::write_atomic(
            &dir.join(format!("frames_{safe}.svg")),
            frame_trace_svg(series, &format!("Per-frame attention: {video}")).as_bytes(),
        )?;
    }
    Ok(weights)
}
