//! Property tests for the public invariants of ingestion, folds, metrics,
//! voting and the loss.

use std::collections::HashSet;

use proptest::prelude::*;
use spapnet::eval::{compute_metrics, vote_all, ClipPrediction};
use spapnet::model::{normalize_weights, softmax};
use spapnet::pose::{coco, normalize_frame, segment_clips, Keypoint, Label, NormalizeOptions, PoseSequence, RawFrame, TaskMode, COCO_JOINTS};
use spapnet::train::{focal_loss_grad, make_folds, FoldItem, FoldPlan};

fn joint() -> impl Strategy<Value = Keypoint> {
    (0.0f64..2000.0, 0.0f64..2000.0, 0.0f64..1.0).prop_map(|(x, y, c)| Keypoint::new(x, y, c))
}

fn frame(index: usize) -> impl Strategy<Value = RawFrame> {
    proptest::collection::vec(joint(), COCO_JOINTS).prop_map(move |js| {
        let mut joints = [Keypoint::UNDETECTED; COCO_JOINTS];
        joints.copy_from_slice(&js);
        RawFrame { frame_index: index, joints }
    })
}

fn valid_frame(index: usize) -> RawFrame {
    let mut joints = [Keypoint::new(10.0, 10.0, 0.9); COCO_JOINTS];
    joints[coco::R_WRIST] = Keypoint::new(3.0 + index as f64, 4.0, 0.8);
    RawFrame { frame_index: index, joints }
}

proptest! {
    #[test]
    fn anchors_are_centered(f in frame(0)) {
        if let Some(n) = normalize_frame(&f, NormalizeOptions::default()) {
            let anchors = [coco::NECK, coco::R_HIP, coco::L_HIP].map(|i| f.joints[i]);
            let cx = anchors.iter().map(|k| k.x - n.origin.0).sum::<f64>() / 3.0;
            let cy = anchors.iter().map(|k| k.y - n.origin.1).sum::<f64>() / 3.0;
            prop_assert!(cx.abs() <= 1e-9 && cy.abs() <= 1e-9);
            prop_assert!((n.nodes[3][0] - (f.joints[coco::NECK].x - n.origin.0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn translation_invariance(f in frame(0), dx in -1e4f64..1e4, dy in -1e4f64..1e4) {
        let opts = NormalizeOptions::default();
        let (a, b) = (normalize_frame(&f, opts), normalize_frame(&f.translated(dx, dy), opts));
        prop_assert_eq!(a.is_some(), b.is_some());
        if let (Some(a), Some(b)) = (a, b) {
            for (ra, rb) in a.nodes.iter().zip(&b.nodes) {
                for (x, y) in ra.iter().zip(rb) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
        }
    }

    /// Frames are valid unless marked invalid; gaps skip frame indices.
    #[test]
    fn clip_count_is_sum_of_run_quotients(
        pattern in proptest::collection::vec((1usize..60, any::<bool>()), 1..12),
        clip_len in 1usize..40,
    ) {
        let mut frames = Vec::new();
        let mut runs = Vec::new();
        let mut index = 0;
        let mut current = 0;
        for &(len, gap) in &pattern {
            // A gap (skipped index) or an invalid frame ends the current run.
            if gap {
                index += 1;
            } else {
                let mut bad = valid_frame(index);
                bad.joints[coco::R_HIP] = Keypoint::UNDETECTED;
                frames.push(bad);
                index += 1;
            }
            runs.push(current);
            current = 0;
            for _ in 0..len {
                frames.push(valid_frame(index));
                index += 1;
                current += 1;
            }
        }
        runs.push(current);
        let seq = PoseSequence { video_id: "v".into(), fps: None, frames };
        let clips = segment_clips(&seq, clip_len, Label::PT, "p", NormalizeOptions::default());
        let expected: usize = runs.iter().map(|r| r / clip_len).sum();
        prop_assert_eq!(clips.len(), expected);
        let mut seen = HashSet::new();
        for c in &clips {
            prop_assert_eq!(c.data.len(), clip_len * 21);
            prop_assert_eq!(c.label, Label::PT);
            for t in 0..clip_len {
                // The wrist x encodes the frame index, so overlaps would repeat a value.
                let wrist_x = c.frame(t)[0];
                prop_assert!(seen.insert(wrist_x.to_bits()), "frame reused");
            }
        }
    }

    #[test]
    fn folds_partition_the_videos(
        classes in proptest::collection::vec(0usize..3, 2..40),
        k in 2usize..6,
        seed in any::<u64>(),
        by_participant in any::<bool>(),
    ) {
        prop_assume!(classes.len() >= k);
        let items: Vec<FoldItem> = classes
            .iter()
            .enumerate()
            .map(|(i, &class)| FoldItem {
                video_id: format!("v{i:03}"),
                class,
                group: if by_participant { format!("p{}", i / 2) } else { format!("v{i:03}") },
            })
            .collect();
        let groups: HashSet<&str> = items.iter().map(|i| i.group.as_str()).collect();
        prop_assume!(groups.len() >= k);
        let plan = make_folds(&items, k, seed).unwrap();
        let mut all: Vec<&String> = plan.folds.iter().flatten().collect();
        let n = all.len();
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(n, items.len());
        for it in &items {
            let fold = plan.fold_of(&it.video_id).unwrap();
            for other in items.iter().filter(|o| o.group == it.group) {
                prop_assert_eq!(plan.fold_of(&other.video_id), Some(fold));
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("folds.csv");
        plan.write(&path).unwrap();
        let back = FoldPlan::read(&path).unwrap();
        prop_assert_eq!(back.folds, plan.folds);
    }

    /// Replicating each class's instances changes prevalence but not recalls.
    #[test]
    fn balanced_accuracy_ignores_prevalence(
        pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..20),
        reps in proptest::collection::vec(1usize..4, 5),
        binary in any::<bool>(),
    ) {
        let (mode, fold) = if binary { (TaskMode::Binary, 2) } else { (TaskMode::Multiclass, 5) };
        let (p, t): (Vec<usize>, Vec<usize>) = pairs.iter().map(|&(p, t)| (p % fold, t % fold)).unzip();
        let mut p2 = Vec::new();
        let mut t2 = Vec::new();
        for (&pi, &ti) in p.iter().zip(&t) {
            for _ in 0..reps[ti] {
                p2.push(pi);
                t2.push(ti);
            }
        }
        let a = compute_metrics(&p, &t, mode).ac;
        let b = compute_metrics(&p2, &t2, mode).ac;
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn verdict_attention_is_a_distribution(
        clips in proptest::collection::vec((0usize..3, proptest::collection::vec(0.0f64..5.0, 7), -3.0f64..3.0), 1..12),
    ) {
        let preds: Vec<ClipPrediction> = clips
            .iter()
            .enumerate()
            .map(|(i, (video, scores, logit))| {
                ClipPrediction::from_logits(&format!("c{i}"), &format!("v{video}"), &[0.0, *logit], vec![], normalize_weights(scores))
            })
            .collect();
        for v in vote_all(&preds).unwrap() {
            prop_assert!(v.attention.iter().all(|&w| w >= 0.0));
            prop_assert!((v.attention.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            prop_assert!(v.voted_class < 2);
        }
    }

    #[test]
    fn gamma_zero_gradient_is_cross_entropy_gradient(
        logits in proptest::collection::vec(-8.0f64..8.0, 2..6),
        y in 0usize..6,
        weight in 0.1f64..3.0,
    ) {
        let y = y % logits.len();
        let alpha = vec![weight; logits.len()];
        let (_, grad) = focal_loss_grad(&logits, y, 0.0, &alpha);
        let p = softmax(&logits);
        for (k, g) in grad.iter().enumerate() {
            let ce = weight * (p[k] - (k == y) as u8 as f64);
            prop_assert!((g - ce).abs() <= 1e-12, "class {k}: {g} vs {ce}");
        }
    }
}
