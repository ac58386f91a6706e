//! Stratified, grouped k-fold partitioning of videos.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One video as seen by the fold planner.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldItem {
    pub video_id: String,
    pub class: usize,
    /// Grouping key: the video id itself, or the participant id.
    pub group: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    /// Validation video ids per fold, sorted.
    pub folds: Vec<Vec<String>>,
    /// Set when some class had fewer groups than folds.
    pub stratified: bool,
}

impl FoldPlan {
    pub fn fold_of(&self, video_id: &str) -> Option<usize> {
        self.folds
            .iter()
            .position(|f| f.binary_search_by(|v| v.as_str().cmp(video_id)).is_ok())
    }

    pub fn validation(&self, fold: usize) -> &[String] {
        &self.folds[fold]
    }

    pub fn training(&self, fold: usize) -> Vec<String> {
        let mut ids: Vec<String> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, ids)| ids.iter().cloned())
            .collect();
        ids.sort();
        ids
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        crate::io::write_csv_atomic(path, |w| {
            w.write_record(["video_id", "fold"])?;
            for (f, ids) in self.folds.iter().enumerate() {
                for id in ids {
                    w.write_record([id.as_str(), &f.to_string()])?;
                }
            }
            Ok(())
        })
    }

    /// Reads a plan written by [`FoldPlan::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut folds: Vec<Vec<String>> = Vec::new();
        for rec in csv::Reader::from_reader(text.as_bytes()).records() {
            let rec = rec?;
            let (Some(id), Some(fold)) = (rec.get(0), rec.get(1)) else {
                return Err(Error::Validation(format!("{}: expected video_id,fold rows", path.display())));
            };
            let fold: usize = fold
                .trim()
                .parse()
                .map_err(|_| Error::Validation(format!("{}: bad fold index {fold:?}", path.display())))?;
            if folds.len() <= fold {
                folds.resize(fold + 1, Vec::new());
            }
            folds[fold].push(id.to_string());
        }
        for f in &mut folds {
            f.sort();
        }
        Ok(FoldPlan {
            k: folds.len(),
            folds,
            stratified: true,
        })
    }
}

/// Partitions groups into `k` folds, dealing each class's shuffled groups
/// round-robin so folds stay label-balanced. Falls back to grouped-only
/// dealing (with a warning) when a class has fewer than `k` groups.
pub fn make_folds(items: &[FoldItem], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k={k}: need at least two folds")));
    }
    // group -> (videos, class votes)
    let mut groups: BTreeMap<&str, (Vec<&str>, BTreeMap<usize, usize>)> = BTreeMap::new();
    for item in items {
        let entry = groups.entry(item.group.as_str()).or_default();
        entry.0.push(&item.video_id);
        *entry.1.entry(item.class).or_default() += 1;
    }
    if groups.len() < k {
        return Err(Error::Config(format!(
            "{} groups cannot fill {k} folds",
            groups.len()
        )));
    }

    let mut by_class: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (group, (_, votes)) in &groups {
        let class = votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(c, _)| *c)
            .expect("group has a video");
        by_class.entry(class).or_default().push(group);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stratified = by_class.values().all(|g| g.len() >= k);
    let order: Vec<&str> = if stratified {
        by_class
            .into_values()
            .flat_map(|mut g| {
                g.shuffle(&mut rng);
                g
            })
            .collect()
    } else {
        log::warn!("a class has fewer than {k} groups; folds are grouped but not stratified");
        let mut all: Vec<&str> = groups.keys().copied().collect();
        all.shuffle(&mut rng);
        all
    };

    let mut folds = vec![Vec::new(); k];
    for (n, group) in order.into_iter().enumerate() {
        folds[n % k].extend(groups[group].0.iter().map(|v| v.to_string()));
    }
    for f in folds.iter_mut() {
        f.sort();
    }
    Ok(FoldPlan {
        k,
        folds,
        stratified,
    })
}
