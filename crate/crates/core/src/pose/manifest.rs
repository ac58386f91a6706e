//! Dataset manifest: `video_id,participant_id,label,task_id,path`.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{parse_keypoint_path, segment_clips, Clip, NormalizeOptions};
use crate::error::{Error, Result};

/// Diagnosis label of a source video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    PT,
    ET,
    FT,
    DT,
    NoTremor,
    Other,
}

impl Label {
    pub const ALL: [Label; 6] = [
        Label::PT,
        Label::ET,
        Label::FT,
        Label::DT,
        Label::NoTremor,
        Label::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::PT => "PT",
            Label::ET => "ET",
            Label::FT => "FT",
            Label::DT => "DT",
            Label::NoTremor => "NoTremor",
            Label::Other => "Other",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Label::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Validation(format!("unknown label {s:?}")))
    }
}

/// Classification task: PT against everything else, or the five tremor classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskMode {
    Binary,
    Multiclass,
}

impl TaskMode {
    pub fn num_classes(self) -> usize {
        self.class_names().len()
    }

    /// Binary class 1 is the positive (PT) class.
    pub fn class_names(self) -> &'static [&'static str] {
        match self {
            TaskMode::Binary => &["nonPT", "PT"],
            TaskMode::Multiclass => &["PT", "ET", "FT", "DT", "NoTremor"],
        }
    }

    pub fn class_of(self, label: Label) -> Option<usize> {
        match (self, label) {
            (_, Label::Other) => None,
            (TaskMode::Binary, Label::PT) => Some(1),
            (TaskMode::Binary, _) => Some(0),
            (TaskMode::Multiclass, l) => Some(match l {
                Label::PT => 0,
                Label::ET => 1,
                Label::FT => 2,
                Label::DT => 3,
                _ => 4,
            }),
        }
    }

    pub fn class_index(self, name: &str) -> Option<usize> {
        self.class_names().iter().position(|n| *n == name)
    }
}

impl FromStr for TaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "binary" => Ok(TaskMode::Binary),
            "multiclass" => Ok(TaskMode::Multiclass),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskMode::Binary => "binary",
            TaskMode::Multiclass => "multiclass",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub video_id: String,
    pub participant_id: String,
    pub label: Label,
    pub task_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    /// Directory that relative record paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    video_id: String,
    participant_id: String,
    label: String,
    #[serde(default)]
    task_id: String,
    path: PathBuf,
}

impl DatasetManifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let m = DatasetManifest {
            records,
            base_dir: PathBuf::new(),
        };
        m.check_unique()?;
        Ok(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_csv_str(&text)?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut records = Vec::new();
        for row in reader.deserialize::<RawRecord>() {
            let raw = row?;
            records.push(ManifestRecord {
                label: raw.label.parse()?,
                video_id: raw.video_id,
                participant_id: raw.participant_id,
                task_id: raw.task_id,
                path: raw.path,
            });
        }
        Self::new(records)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, |w| {
            w.write_record(["video_id", "participant_id", "label", "task_id", "path"])?;
            for r in &self.records {
                w.write_record([
                    r.video_id.as_str(),
                    r.participant_id.as_str(),
                    r.label.as_str(),
                    r.task_id.as_str(),
                    &r.path.to_string_lossy(),
                ])?;
            }
            Ok(())
        })
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        if record.path.is_absolute() {
            record.path.clone()
        } else {
            self.base_dir.join(&record.path)
        }
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.video_id.as_str()) {
                return Err(Error::Validation(format!("duplicate video_id {:?}", r.video_id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FilterRules {
    pub mode: TaskMode,
    /// Task ids recorded only for a minor subset of participants.
    pub drop_tasks: Vec<String>,
}

impl FilterRules {
    pub fn new(mode: TaskMode) -> Self {
        FilterRules {
            mode,
            drop_tasks: Vec::new(),
        }
    }
}

/// A manifest record that survived filtering, with its class id under the task mode.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredRecord {
    pub record: ManifestRecord,
    pub class: usize,
}

/// Drops `Other` and dropped-task videos and assigns class ids.
pub fn filter_manifest(manifest: &DatasetManifest, rules: &FilterRules) -> Vec<FilteredRecord> {
    manifest
        .records
        .iter()
        .filter(|r| !rules.drop_tasks.contains(&r.task_id))
        .filter_map(|r| {
            rules.mode.class_of(r.label).map(|class| FilteredRecord {
                record: r.clone(),
                class,
            })
        })
        .collect()
}

/// Parses, normalizes and clips every retained video, in manifest order.
pub fn ingest_manifest(
    manifest: &DatasetManifest,
    rules: &FilterRules,
    clip_len: usize,
    opts: NormalizeOptions,
) -> Result<Vec<Clip>> {
    let kept = filter_manifest(manifest, rules);
    let per_video: Vec<Result<Vec<Clip>>> = kept
        .par_iter()
        .map(|f| {
            let mut seq = parse_keypoint_path(&manifest.resolve(&f.record))?;
            seq.video_id = f.record.video_id.clone();
            let clips = segment_clips(&seq, clip_len, f.record.label, &f.record.participant_id, opts);
            if clips.is_empty() {
                log::warn!("video {} yields no clips of length {clip_len}", f.record.video_id);
            }
            Ok(clips)
        })
        .collect();
    let mut clips = Vec::new();
    for v in per_video {
        clips.extend(v?);
    }
    Ok(clips)
}
