//! Helpers shared by the integration tests: finite-difference gradient
//! checks on micro inputs and the synthetic cross-validation experiment.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spapnet::graph::{build_graph, SqueezeRatios, SqueezeSchedule};
use spapnet::model::{
    block_backward, block_forward, pcsf_backward, pcsf_forward, pcsf_node_mean, pcsf_node_mean_backward,
    squeeze_rows, squeeze_rows_backward, BlockParams, BlockSettings, LcnParams, Mode, Model, ModelConfig,
    ModelParams, PcsfParams, RunningStats,
};
use spapnet::train::{batch_focal_loss, focal_loss, focal_loss_grad};

pub const FD_EPS: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
/// Magnitude below which errors are measured absolutely rather than
/// relatively. Central-difference round-off is about 1e-10 here, so exactly
/// zero gradients (biases feeding batch norm) would otherwise read as large
/// relative errors.
pub const GRAD_FLOOR: f64 = 1e-5;

pub fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR)
}

pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_error(a, n))
        .fold(0.0, f64::max)
}

/// Central differences of `loss` with respect to `count` scalar slots of
/// `state`; `poke(state, k, delta)` adds `delta` to slot `k`.
pub fn numeric_gradient<S: Clone>(
    state: &S,
    count: usize,
    poke: impl Fn(&mut S, usize, f64),
    loss: impl Fn(&S) -> f64,
) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let mut plus = state.clone();
            poke(&mut plus, k, FD_EPS);
            let mut minus = state.clone();
            poke(&mut minus, k, -FD_EPS);
            (loss(&plus) - loss(&minus)) / (2.0 * FD_EPS)
        })
        .collect()
}

fn poke_slices(slices: Vec<&mut [f64]>, mut k: usize, delta: f64) {
    for s in slices {
        if k < s.len() {
            s[k] += delta;
            return;
        }
        k -= s.len();
    }
    panic!("slot out of range");
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn random_nodes(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Array2<f64>> {
    (0..7).map(|_| random_matrix(rng, rows, cols)).collect()
}

fn dot(a: &[Array2<f64>], b: &[Array2<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y).sum()).sum()
}

fn flat(mats: &[Array2<f64>]) -> Vec<f64> {
    mats.iter().flat_map(|m| m.iter().copied()).collect()
}

fn lcn_slices(p: &mut LcnParams) -> Vec<&mut [f64]> {
    let mut out: Vec<&mut [f64]> = Vec::new();
    for row in p.weights.iter_mut() {
        for w in row.iter_mut() {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
    }
    for b in p.bias.iter_mut() {
        out.push(b.as_slice_mut().expect("standard layout"));
    }
    out
}

fn lcn_flat(p: &LcnParams) -> Vec<f64> {
    let mut out: Vec<f64> = p.weights.iter().flatten().flat_map(|w| w.iter().copied()).collect();
    out.extend(p.bias.iter().flat_map(|b: &Array1<f64>| b.iter().copied()));
    out
}

fn nodes_slices(x: &mut [Array2<f64>]) -> Vec<&mut [f64]> {
    x.iter_mut().map(|m| m.as_slice_mut().expect("standard layout")).collect()
}

/// Locally connected layer: weights, biases and inputs.
pub fn check_lcn() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let agg = build_graph().aggregation();
    let params = LcnParams::init(&agg, 3, 5, &mut rng);
    let x = random_nodes(&mut rng, 2, 3);
    let r = random_nodes(&mut rng, 2, 5);
    let loss = |p: &LcnParams, x: &[Array2<f64>]| dot(&p.forward(&agg, x, "lcn").unwrap(), &r);
    let (g, dx) = params.backward(&agg, &x, &r);

    let count = lcn_flat(&params).len();
    let num_p = numeric_gradient(&params, count, |p, k, d| poke_slices(lcn_slices(p), k, d), |p| loss(p, &x));
    let num_x = numeric_gradient(&x, 7 * 2 * 3, |x, k, d| poke_slices(nodes_slices(x), k, d), |x| loss(&params, x));
    max_rel_error(&lcn_flat(&g), &num_p).max(max_rel_error(&flat(&dx), &num_x))
}

/// Contiguous-group mean squeeze, including uneven group sizes.
pub fn check_squeeze() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for (c_in, c_out) in [(8, 7), (8, 3), (7, 2), (8, 1), (5, 5)] {
        let x = random_matrix(&mut rng, 2, c_in);
        let r = random_matrix(&mut rng, 2, c_out);
        let loss = |x: &Array2<f64>| (squeeze_rows(x.view(), c_out).unwrap() * &r).sum();
        let analytic = squeeze_rows_backward(r.view(), c_in);
        let num = numeric_gradient(&x, 2 * c_in, |x, k, d| x.as_slice_mut().unwrap()[k] += d, loss);
        worst = worst.max(max_rel_error(&analytic.iter().copied().collect::<Vec<_>>(), &num));
    }
    worst
}

fn pcsf_slices(p: &mut PcsfParams) -> Vec<&mut [f64]> {
    p.wm.iter_mut().map(|w| w.as_slice_mut().unwrap()).collect()
}

/// Squeeze-fuse-project block, per-row and node-averaged forms.
pub fn check_pcsf() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let ratios = SqueezeRatios { b: 0.9, d: 0.125 };
    let schedule = SqueezeSchedule::new(&build_graph(), 8, ratios).unwrap();
    let params = PcsfParams::init(&schedule, 6, &mut rng);
    let h = random_nodes(&mut rng, 2, 8);
    let r = random_nodes(&mut rng, 2, 6);
    let r_mean = random_matrix(&mut rng, 2, 6);

    let per_row = |p: &PcsfParams, h: &[Array2<f64>]| dot(&pcsf_forward(h, p, &schedule).unwrap(), &r);
    let pooled = |p: &PcsfParams, h: &[Array2<f64>]| (pcsf_node_mean(h, p, &schedule).unwrap() * &r_mean).sum();

    let count: usize = params.wm.iter().map(|w| w.len()).sum();
    let mut worst = 0.0f64;
    let (g, dh) = pcsf_backward(&h, &params, &schedule, &r).unwrap();
    let (gm, dhm) = pcsf_node_mean_backward(&h, &params, &schedule, &r_mean).unwrap();
    for (g, dh, loss) in [
        (g, dh, &per_row as &dyn Fn(&PcsfParams, &[Array2<f64>]) -> f64),
        (gm, dhm, &pooled),
    ] {
        let num_p = numeric_gradient(&params, count, |p, k, d| poke_slices(pcsf_slices(p), k, d), |p| loss(p, &h));
        let num_h = numeric_gradient(&h, 7 * 2 * 8, |x, k, d| poke_slices(nodes_slices(x), k, d), |x| loss(&params, x));
        worst = worst
            .max(max_rel_error(&flat(&g.wm), &num_p))
            .max(max_rel_error(&flat(&dh), &num_h));
    }
    worst
}

/// Focal loss with respect to logits over several focusing strengths.
pub fn check_focal() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for gamma in [0.0, 0.5, 1.0, 2.0, 3.5] {
        for classes in [2usize, 5] {
            let logits: Vec<f64> = (0..classes).map(|_| rng.random_range(-3.0..3.0)).collect();
            let alpha: Vec<f64> = (0..classes).map(|_| rng.random_range(0.2..2.0)).collect();
            let y = rng.random_range(0..classes);
            let (_, analytic) = focal_loss_grad(&logits, y, gamma, &alpha);
            let num = numeric_gradient(&logits, classes, |l, k, d| l[k] += d, |l| focal_loss(l, y, gamma, &alpha));
            worst = worst.max(max_rel_error(&analytic, &num));
        }
    }
    worst
}

fn micro_settings() -> BlockSettings {
    BlockSettings {
        leaky_slope: 0.2,
        dropout_rate: 0.2,
        bn_eps: 1e-5,
    }
}

/// One training-mode block (LCN, batch norm, activation, fixed dropout mask).
pub fn check_block() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let agg = build_graph().aggregation();
    let params = BlockParams::init(&agg, 3, 4, &mut rng);
    let running = RunningStats::new(7, 4);
    let x = random_nodes(&mut rng, 6, 3);
    let r = random_nodes(&mut rng, 6, 4);
    let forward = |p: &BlockParams, x: &[Array2<f64>]| {
        let mut drop = ChaCha8Rng::seed_from_u64(99);
        block_forward(x, p, &running, &agg, micro_settings(), Mode::Train(&mut drop), "block")
            .unwrap()
    };
    let loss = |p: &BlockParams, x: &[Array2<f64>]| dot(&forward(p, x).0, &r);
    let (_, cache) = forward(&params, &x);
    let (g, dx) = block_backward(&x, &params, cache.as_ref().unwrap(), &agg, micro_settings(), &r);

    let mut analytic = lcn_flat(&g.lcn);
    analytic.extend(g.bn.gamma.iter().chain(g.bn.beta.iter()).copied());
    let num_p = numeric_gradient(&params, analytic.len(), |p, k, d| poke_slices(block_slices(p), k, d), |p| loss(p, &x));
    let num_x = numeric_gradient(&x, 7 * 6 * 3, |x, k, d| poke_slices(nodes_slices(x), k, d), |x| loss(&params, x));
    max_rel_error(&analytic, &num_p).max(max_rel_error(&flat(&dx), &num_x))
}

fn block_slices(p: &mut BlockParams) -> Vec<&mut [f64]> {
    let mut s = lcn_slices(&mut p.lcn);
    s.push(p.bn.gamma.as_slice_mut().unwrap());
    s.push(p.bn.beta.as_slice_mut().unwrap());
    s
}

pub fn micro_config() -> ModelConfig {
    ModelConfig {
        block_channels: vec![4, 8],
        pcsf_out_channels: 8,
        clip_len: 2,
        ..ModelConfig::default()
    }
}

fn flat_params(p: &ModelParams) -> Vec<f64> {
    p.tensors().into_iter().flat_map(|(_, _, d)| d.iter().copied()).collect()
}

/// The composed network under the focal loss, training mode, fixed dropout seed.
pub fn check_model() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let model = Model::new(micro_config(), 3).unwrap();
    let clips: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..2 * 7 * 3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = clips.iter().map(Vec::as_slice).collect();
    let labels = [0usize, 1, 1];
    let alpha = [1.5, 0.75];
    let forward = |m: &Model| {
        let mut drop = ChaCha8Rng::seed_from_u64(42);
        m.forward_train(&refs, &mut drop).unwrap()
    };
    let loss = |m: &Model| batch_focal_loss(&forward(m).0, &labels, 2.0, &alpha).0;

    let (logits, cache) = forward(&model);
    let (_, d_logits) = batch_focal_loss(&logits, &labels, 2.0, &alpha);
    let grads = model.backward(&cache, &d_logits).unwrap();
    let analytic = flat_params(&grads);
    let numeric = numeric_gradient(
        &model,
        analytic.len(),
        |m, k, d| poke_slices(m.params.tensors_mut(), k, d),
        loss,
    );
    max_rel_error(&analytic, &numeric)
}

/// Every component check, by name.
pub fn gradient_suite() -> Vec<(&'static str, f64)> {
    vec![
        ("lcn", check_lcn()),
        ("channel_squeeze", check_squeeze()),
        ("pcsf", check_pcsf()),
        ("focal_loss", check_focal()),
        ("block", check_block()),
        ("model", check_model()),
    ]
}

/// Frames per synthetic video in the end-to-end experiment (one clip each).
pub const SYNTH_FRAMES: usize = 150;
pub const SYNTH_VIDEOS_PER_CLASS: usize = 20;
pub const SYNTH_EPOCHS: usize = 100;

/// Outputs of one synthetic binary cross-validation run.
pub struct Experiment {
    pub evals: Vec<spapnet::eval::FoldEvaluation>,
    /// Affected arm of every synthetic video, keyed by video id.
    pub sides: std::collections::HashMap<String, spapnet::synth::Side>,
    pub metrics_csv: Vec<u8>,
    pub verdicts_csv: Vec<u8>,
    pub histories_csv: Vec<Vec<u8>>,
    pub elapsed: std::time::Duration,
}

/// Generates the PT vs NoTremor dataset on disk, ingests it, cross-validates
/// the default binary configuration, and evaluates every held-out fold.
pub fn synthetic_experiment(seed: u64) -> Experiment {
    use spapnet::eval::{evaluate_fold, write_fold_metrics, write_verdicts};
    use spapnet::pose::{ingest_manifest, Clip, DatasetManifest, FilterRules, Label, NormalizeOptions, TaskMode};
    use spapnet::synth::SynthDataset;
    use spapnet::train::{cross_validate, plan_folds, write_history, TrainConfig};

    let start = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let mut ds = SynthDataset::new(vec![Label::PT, Label::NoTremor], SYNTH_VIDEOS_PER_CLASS, seed);
    ds.duration_frames = SYNTH_FRAMES;
    ds.write(&data).unwrap();
    let sides = ds
        .video_params()
        .into_iter()
        .map(|(id, p)| (id, p.affected_side))
        .collect();

    let mut config = TrainConfig::for_mode(TaskMode::Binary);
    config.max_epochs = SYNTH_EPOCHS;
    config.seed = seed;
    let manifest = DatasetManifest::read(&data.join("manifest.csv")).unwrap();
    let clips = ingest_manifest(&manifest, &FilterRules::new(config.mode), config.model.clip_len, NormalizeOptions::default()).unwrap();
    let plan = plan_folds(&clips, &config).unwrap();
    let results = cross_validate(&clips, &plan, &config).unwrap();

    let evals: Vec<_> = results
        .iter()
        .map(|r| {
            let held_out: Vec<&Clip> = clips.iter().filter(|c| plan.fold_of(&c.video_id) == Some(r.fold)).collect();
            evaluate_fold(&r.model, &held_out, r.fold, config.mode).unwrap()
        })
        .collect();
    let elapsed = start.elapsed();

    let out = dir.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    write_fold_metrics(&out.join("metrics.csv"), &evals).unwrap();
    let rows: Vec<_> = evals.iter().flat_map(|e| e.rows.iter().cloned()).collect();
    write_verdicts(&out.join("verdicts.csv"), &rows, config.mode.class_names()).unwrap();
    let histories_csv = results
        .iter()
        .map(|r| {
            let p = out.join(format!("history_{}.csv", r.fold));
            write_history(&p, &r.history).unwrap();
            std::fs::read(p).unwrap()
        })
        .collect();
    Experiment {
        evals,
        sides,
        metrics_csv: std::fs::read(out.join("metrics.csv")).unwrap(),
        verdicts_csv: std::fs::read(out.join("verdicts.csv")).unwrap(),
        histories_csv,
        elapsed,
    }
}
