use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use ndarray::Axis;
use serde::Serialize;
use serde_json::json;
use vsg_core::eval::{
    cohens_kappa, evaluate_scene_graph, evaluate_trajectories, serve_judge, BridgeJudge, Judge, LexiconJudge,
};
use vsg_core::io::{
    mask_video_to_string, parse_json, parse_mask_video, parse_scene_graph, read_text, registry_to_string,
    to_pretty_json, write_text,
};
use vsg_core::model::{canonical_order, canonicalize_ids};
use vsg_core::resampler::{grad_check_strided, init_params, random_features, resample};
use vsg_core::suite::suite_scene;
use vsg_core::synth::{generate_scene, propose_video, NoiseSpec, OraclePropagator, SceneSpec};
use vsg_core::tokens::arrange_video;
use vsg_core::tracker::{mask_coverage, track_video};
use vsg_core::{MaskVideo, ObjectId, Registry};

use crate::settings::Settings;
use crate::{CliError, EvalArgs, JudgeServeArgs, KappaArgs, OutArgs, ProposeArgs, SimulateArgs, TokensArgs, TrackArgs};

type CliResult = Result<(), CliError>;

fn emit(out: &OutArgs, text: &str) -> CliResult {
    match &out.out {
        Some(path) => write_text(path, text)?,
        None => io::stdout().write_all(text.as_bytes()).map_err(vsg_core::Error::from)?,
    }
    Ok(())
}

fn load_video(path: &Path) -> Result<MaskVideo, CliError> {
    Ok(parse_mask_video(&read_text(path)?)?)
}

fn load_spec(path: &Path) -> Result<SceneSpec, CliError> {
    let spec: SceneSpec = parse_json(&read_text(path)?)?;
    spec.validate()?;
    Ok(spec)
}

fn is_stochastic(noise: &NoiseSpec) -> bool {
    noise.drop_prob > 0.0 || noise.split_prob > 0.0 || noise.duplicate_prob > 0.0 || noise.jitter_px > 0
}

pub fn simulate(args: &SimulateArgs, settings: &Settings) -> CliResult {
    let spec = match (&args.spec, args.suite_index) {
        (Some(path), _) => load_spec(path)?,
        (None, Some(index)) => suite_scene(index, &settings.tracker)?,
        (None, None) => return Err(CliError::Config("simulate needs --spec or --suite-index".into())),
    };
    let scene = generate_scene(&spec)?;
    let mut registry = Registry::new();
    for t in &scene.trajectories {
        if let Some(mask) = t.mask_at(t.entry_frame) {
            registry.register(t.object_id, t.entry_frame, mask.clone())?;
        }
    }
    let dir = &args.out_dir;
    write_text(&dir.join("scene_spec.json"), &to_pretty_json(&spec))?;
    write_text(&dir.join("gt_masks.json"), &mask_video_to_string(&scene.video))?;
    write_text(&dir.join("gt_registry.json"), &registry_to_string(&registry, spec.width, spec.height))?;
    Ok(())
}

pub fn propose(args: &ProposeArgs, settings: &Settings) -> CliResult {
    let video = load_video(&args.masks)?;
    let mut noise = settings.noise;
    if is_stochastic(&noise) {
        noise.seed = settings.require_seed("propose with noise")?;
    }
    let proposals = propose_video(&video, &noise)?;
    emit(&args.out, &mask_video_to_string(&proposals))
}

#[derive(Serialize)]
struct TrackReport {
    tracker: vsg_core::tracker::TrackerConfig,
    objects_discovered: usize,
    /// Objects surviving the post-filter.
    objects_kept: usize,
    /// Tracker id to output id.
    id_map: BTreeMap<ObjectId, ObjectId>,
    online_coverage: f64,
    offline_coverage: f64,
    breakpoints: Vec<vsg_core::tracker::BreakpointReport>,
}

pub fn track(args: &TrackArgs, settings: &Settings) -> CliResult {
    let proposals = load_video(&args.proposals)?;
    let spec = load_spec(&args.spec)?;
    if (proposals.width, proposals.height, proposals.n_frames) != (spec.width, spec.height, spec.n_frames) {
        return Err(vsg_core::Error::InvalidDimensions(format!(
            "proposals are {}x{}x{} but the scene is {}x{}x{}",
            proposals.width, proposals.height, proposals.n_frames, spec.width, spec.height, spec.n_frames
        ))
        .into());
    }
    let mut propagator = OraclePropagator::from_spec(&spec, None)?;
    let out = track_video(&proposals, &mut propagator, &settings.tracker)?;

    // offline output keeps every object; the post-filter may drop or erode some
    let id_map = canonical_order(&out.offline)
        .into_iter()
        .enumerate()
        .map(|(rank, i)| (out.offline[i].object_id, rank as ObjectId + 1))
        .collect();
    let (w, h, n) = (spec.width, spec.height, spec.n_frames);
    let trajectories = canonicalize_ids(&out.offline);
    let video = MaskVideo::from_trajectories(&trajectories, w, h, spec.fps, n)?;
    let filtered = canonicalize_ids(&out.filtered);
    let filtered_video = MaskVideo::from_trajectories(&filtered, w, h, spec.fps, n)?;
    let report = TrackReport {
        tracker: settings.tracker,
        objects_discovered: out.online.registry.len(),
        objects_kept: filtered.len(),
        id_map,
        online_coverage: mask_coverage(&out.online.tracked.to_trajectories(), w, h, n)?,
        offline_coverage: mask_coverage(&out.offline, w, h, n)?,
        breakpoints: out.online.breakpoints.clone(),
    };
    let dir = &args.out_dir;
    write_text(&dir.join("trajectories.json"), &mask_video_to_string(&video))?;
    write_text(&dir.join("filtered_trajectories.json"), &mask_video_to_string(&filtered_video))?;
    write_text(&dir.join("registry.json"), &registry_to_string(&out.online.registry, w, h))?;
    write_text(&dir.join("track_report.json"), &to_pretty_json(&report))?;
    Ok(())
}

pub fn tokens(args: &TokensArgs, settings: &Settings) -> CliResult {
    let video = load_video(&args.masks)?;
    let grid = settings.grid.for_video(&video);
    let t = settings.tokens;
    let arranged = arrange_video(&video, &grid, t.tau_eff, t.window_seconds)?;
    let windows: BTreeMap<ObjectId, Vec<usize>> = arranged
        .windows
        .iter()
        .map(|(&id, w)| (id, w.keys().copied().collect()))
        .collect();
    let dump = json!({
        "grid": grid,
        "tau_eff": t.tau_eff,
        "window_seconds": t.window_seconds,
        "selections": arranged.selections,
        "windows": windows,
        "stream": arranged.stream,
    });
    emit(&args.out, &to_pretty_json(&dump))
}

pub fn resample_check(out: &OutArgs, settings: &Settings) -> CliResult {
    let seed = settings.require_seed("resample-check")?;
    let dims = settings.resampler;
    let params = init_params(seed, dims)?;
    let x = random_features(seed.wrapping_add(1), 16, dims.d_in);
    let z = resample(&x, &params)?;

    let n = x.nrows();
    let reversed: Vec<usize> = (0..n).rev().collect();
    let rotated: Vec<usize> = (0..n).map(|i| (i + 5) % n).collect();
    let mut permutation_max_dev = 0.0f64;
    for order in [reversed, rotated] {
        let zp = resample(&x.select(Axis(0), &order), &params)?;
        permutation_max_dev = (&zp - &z).iter().fold(permutation_max_dev, |m, d| m.max(d.abs()));
    }
    let mut shapes = BTreeMap::new();
    for n_tokens in [1usize, 2, 7, 64, 512] {
        let zn = resample(&random_features(seed ^ n_tokens as u64, n_tokens, dims.d_in), &params)?;
        shapes.insert(n_tokens, [zn.nrows(), zn.ncols()]);
    }
    let small = random_features(seed.wrapping_add(2), 5, dims.d_in);
    let grad = grad_check_strided(&params, &small, 1e-5, 1)?;
    let report = json!({
        "dims": dims,
        "seed": seed,
        "n_params": params.n_scalars(),
        "output_shapes": shapes,
        "permutation_max_dev": permutation_max_dev,
        "grad_check": grad,
    });
    emit(out, &to_pretty_json(&report))
}

fn build_judge(selector: &str) -> Result<Box<dyn Judge>, CliError> {
    if selector == "builtin" {
        return Ok(Box::new(LexiconJudge::builtin()));
    }
    if let Some(path) = selector.strip_prefix("lexicon:") {
        return Ok(Box::new(LexiconJudge::from_path(Path::new(path))?));
    }
    if let Some(endpoint) = selector.strip_prefix("bridge:") {
        return Ok(Box::new(BridgeJudge::from_endpoint(endpoint)?));
    }
    Err(CliError::Config(format!(
        "judge must be builtin, lexicon:<path> or bridge:<endpoint>, got {selector:?}"
    )))
}

pub fn eval(args: &EvalArgs, settings: &Settings) -> CliResult {
    let cfg = settings.eval;
    let text = if args.against_gt {
        let pred = load_video(&args.pred)?;
        let gt = load_video(&args.gt)?;
        let report = evaluate_trajectories(&pred.to_trajectories(), &gt.to_trajectories(), cfg.mask_iou_thresh)?;
        to_pretty_json(&json!({"config": cfg, "tracking": report}))
    } else {
        let judge = build_judge(&args.judge)?;
        let pred = parse_scene_graph(&read_text(&args.pred)?)?;
        let gt = parse_scene_graph(&read_text(&args.gt)?)?;
        to_pretty_json(&evaluate_scene_graph(&pred, &gt, judge.as_ref(), &cfg)?)
    };
    emit(&args.out, &text)
}

pub fn kappa(args: &KappaArgs) -> CliResult {
    let a: Vec<String> = parse_json(&read_text(&args.a)?)?;
    let b: Vec<String> = parse_json(&read_text(&args.b)?)?;
    let kappa = cohens_kappa(&a, &b)?;
    emit(&args.out, &to_pretty_json(&json!({"n": a.len(), "kappa": kappa})))
}

pub fn judge_serve(args: &JudgeServeArgs) -> CliResult {
    let judge = match &args.lexicon {
        Some(path) => LexiconJudge::from_path(path)?,
        None => LexiconJudge::builtin(),
    };
    serve_judge(&judge, io::stdin().lock(), io::stdout().lock())?;
    Ok(())
}
