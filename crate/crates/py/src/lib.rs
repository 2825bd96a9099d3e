//! Python bindings. Masks are a native class; structured inputs and outputs
//! (scene specs, mask files, scene graphs, reports) cross as JSON text in
//! the same formats the CLI reads and writes.

use ndarray::Array2;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vsg_core::eval::{self, EvalConfig, LexiconJudge, ObjectMode};
use vsg_core::io::{
    mask_video_to_string, parse_json, parse_mask_video, parse_scene_graph, registry_to_string, to_pretty_json,
};
use vsg_core::mask_ops;
use vsg_core::model::canonicalize_ids;
use vsg_core::proposal;
use vsg_core::resampler::{init_params, resample as run_resampler, ResamplerDims};
use vsg_core::synth::{generate_scene, propose_video, NoiseSpec, OraclePropagator, SceneSpec};
use vsg_core::tokens::{arrange_video, TokenGridSpec};
use vsg_core::tracker::{track_video, TrackerConfig};
use vsg_core::{BinaryMask, MaskVideo};

create_exception!(vsgkit, VsgError, PyException, "Raised for any toolkit failure; the message starts with its kind.");

fn to_py(e: vsg_core::Error) -> PyErr {
    VsgError::new_err(format!("{}: {e}", e.kind()))
}

trait OrPyErr<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPyErr<T> for vsg_core::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

/// Binary mask stored as canonical row-major runs.
#[pyclass(name = "Mask", module = "vsgkit", eq, frozen, skip_from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyMask(BinaryMask);

#[pymethods]
impl PyMask {
    #[staticmethod]
    fn from_bits(bits: Vec<bool>, width: usize, height: usize) -> PyResult<Self> {
        BinaryMask::from_bits(&bits, width, height).map(PyMask).py_err()
    }

    #[staticmethod]
    fn from_runs(width: usize, height: usize, runs: Vec<u32>) -> PyResult<Self> {
        BinaryMask::from_runs(width, height, runs).map(PyMask).py_err()
    }

    #[getter]
    fn width(&self) -> usize {
        self.0.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.0.height()
    }

    #[getter]
    fn runs(&self) -> Vec<u32> {
        self.0.runs().to_vec()
    }

    #[getter]
    fn area(&self) -> usize {
        self.0.count_ones()
    }

    fn to_bits(&self) -> Vec<bool> {
        self.0.to_bits()
    }

    fn __repr__(&self) -> String {
        format!("Mask({}x{}, area={})", self.0.width(), self.0.height(), self.0.count_ones())
    }
}

fn unwrap_masks(masks: &[PyRef<'_, PyMask>]) -> Vec<BinaryMask> {
    masks.iter().map(|m| m.0.clone()).collect()
}

#[pyfunction]
fn iou(a: &PyMask, b: &PyMask) -> PyResult<f64> {
    mask_ops::iou(&a.0, &b.0).py_err()
}

/// |a ∧ b| / |a|.
#[pyfunction]
fn asym_overlap(a: &PyMask, b: &PyMask) -> PyResult<f64> {
    mask_ops::asym_overlap(&a.0, &b.0).py_err()
}

#[pyfunction]
fn union(masks: Vec<PyRef<'_, PyMask>>) -> PyResult<Option<PyMask>> {
    Ok(mask_ops::union(&unwrap_masks(&masks)).py_err()?.map(PyMask))
}

#[pyfunction]
fn intersect(a: &PyMask, b: &PyMask) -> PyResult<PyMask> {
    mask_ops::intersect(&a.0, &b.0).map(PyMask).py_err()
}

/// Per-cell coverage fractions, rows of columns, with zero padding at the edges.
#[pyfunction]
fn pooled_coverage(mask: &PyMask, cell: usize) -> PyResult<Vec<Vec<f64>>> {
    let grid = mask_ops::pooled_coverage(&mask.0, cell).py_err()?;
    Ok((0..grid.rows).map(|r| (0..grid.cols).map(|c| grid.get(r, c)).collect()).collect())
}

#[pyfunction]
fn morph_cleanup(mask: &PyMask, min_area: usize, radius: usize) -> PyMask {
    PyMask(mask_ops::morph_cleanup(&mask.0, min_area, radius))
}

/// Indices of the proposals kept, in admission order.
#[pyfunction]
fn filter_proposals(masks: Vec<PyRef<'_, PyMask>>, overlap_thresh: f64) -> PyResult<Vec<usize>> {
    proposal::filter_proposals(&unwrap_masks(&masks), overlap_thresh).py_err()
}

/// Render a scene spec (JSON) into a mask file.
#[pyfunction]
fn simulate(spec_json: &str) -> PyResult<String> {
    let spec: SceneSpec = parse_json(spec_json).py_err()?;
    spec.validate().py_err()?;
    Ok(mask_video_to_string(&generate_scene(&spec).py_err()?.video))
}

/// Scene `index` of the tracker benchmark as spec JSON.
#[pyfunction]
#[pyo3(signature = (index, min_area = 20, morph_radius = 1))]
fn suite_scene(index: u64, min_area: usize, morph_radius: usize) -> PyResult<String> {
    let cfg = TrackerConfig {
        min_area,
        morph_radius,
        ..TrackerConfig::default()
    };
    Ok(to_pretty_json(&vsg_core::suite::suite_scene(index, &cfg).py_err()?))
}

#[pyfunction]
#[pyo3(signature = (masks, noise_json = None))]
fn propose(masks: &str, noise_json: Option<&str>) -> PyResult<String> {
    let video = parse_mask_video(masks).py_err()?;
    let noise: NoiseSpec = match noise_json {
        Some(text) => parse_json(text).py_err()?,
        None => NoiseSpec::default(),
    };
    noise.validate().py_err()?;
    Ok(mask_video_to_string(&propose_video(&video, &noise).py_err()?))
}

/// Track proposals with the oracle propagator of `spec_json`. Returns mask
/// files for the offline and post-filtered trajectories plus the registry.
#[pyfunction]
#[pyo3(signature = (proposals, spec_json, tracker_json = None))]
fn track<'py>(
    py: Python<'py>,
    proposals: &str,
    spec_json: &str,
    tracker_json: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let video = parse_mask_video(proposals).py_err()?;
    let spec: SceneSpec = parse_json(spec_json).py_err()?;
    spec.validate().py_err()?;
    let cfg: TrackerConfig = match tracker_json {
        Some(text) => parse_json(text).py_err()?,
        None => TrackerConfig::default(),
    };
    cfg.validate().py_err()?;
    let mut propagator = OraclePropagator::from_spec(&spec, None).py_err()?;
    let out = track_video(&video, &mut propagator, &cfg).py_err()?;
    let (w, h, n) = (spec.width, spec.height, spec.n_frames);
    let as_file = |t: &[vsg_core::Trajectory]| -> PyResult<String> {
        Ok(mask_video_to_string(&MaskVideo::from_trajectories(&canonicalize_ids(t), w, h, spec.fps, n).py_err()?))
    };
    let result = PyDict::new(py);
    result.set_item("trajectories", as_file(&out.offline)?)?;
    result.set_item("filtered", as_file(&out.filtered)?)?;
    result.set_item("registry", registry_to_string(&out.online.registry, w, h))?;
    Ok(result)
}

/// Token selections, windows and the arranged stream as JSON.
#[pyfunction]
#[pyo3(signature = (masks, frames_per_token = 2, patch_merge = 2, patch_px = 2, tau_eff = 0.5, window_seconds = 4.0))]
fn arrange_tokens(
    masks: &str,
    frames_per_token: usize,
    patch_merge: usize,
    patch_px: usize,
    tau_eff: f64,
    window_seconds: f64,
) -> PyResult<String> {
    let video = parse_mask_video(masks).py_err()?;
    let grid = TokenGridSpec {
        frames_per_token,
        patch_merge,
        patch_px,
        width: video.width,
        height: video.height,
        n_frames: video.n_frames,
        fps: video.fps,
    };
    let arranged = arrange_video(&video, &grid, tau_eff, window_seconds).py_err()?;
    let dump = serde_json::json!({
        "selections": arranged.selections,
        "stream": arranged.stream,
    });
    Ok(to_pretty_json(&dump))
}

/// Run a freshly initialised resampler over `features` (one row per token).
#[pyfunction]
#[pyo3(signature = (features, seed, depth = 1, n_queries = 4, d_latent = 8, d_out = 8, d_hidden = 8))]
fn resample(
    features: Vec<Vec<f64>>,
    seed: u64,
    depth: usize,
    n_queries: usize,
    d_latent: usize,
    d_out: usize,
    d_hidden: usize,
) -> PyResult<Vec<Vec<f64>>> {
    let d_in = features.first().map_or(0, Vec::len);
    if features.iter().any(|row| row.len() != d_in) {
        return Err(to_py(vsg_core::Error::InvalidDimensions("ragged feature rows".into())));
    }
    let x = Array2::from_shape_vec((features.len(), d_in), features.concat())
        .map_err(|e| to_py(vsg_core::Error::InvalidDimensions(e.to_string())))?;
    let dims = ResamplerDims {
        depth,
        n_queries,
        d_latent,
        d_in,
        d_out,
        d_hidden,
    };
    let z = run_resampler(&x, &init_params(seed, dims).py_err()?).py_err()?;
    Ok(z.rows().into_iter().map(|r| r.to_vec()).collect())
}

/// Score two scene graphs (JSON) and return the match report as JSON.
#[pyfunction]
#[pyo3(signature = (pred, gt, lexicon_path = None, temporal_iou = 0.5, object_mode = "strict", strict_includes_synonym = false))]
fn evaluate_scene_graph(
    pred: &str,
    gt: &str,
    lexicon_path: Option<&str>,
    temporal_iou: f64,
    object_mode: &str,
    strict_includes_synonym: bool,
) -> PyResult<String> {
    let judge = match lexicon_path {
        Some(p) => LexiconJudge::from_path(std::path::Path::new(p)).py_err()?,
        None => LexiconJudge::builtin(),
    };
    let object_mode = match object_mode {
        "strict" => ObjectMode::Strict,
        "lenient" => ObjectMode::Lenient,
        other => {
            return Err(to_py(vsg_core::Error::InvalidParam(format!(
                "object_mode must be strict or lenient, got {other:?}"
            ))))
        }
    };
    let cfg = EvalConfig {
        temporal_iou_thresh: temporal_iou,
        object_mode,
        strict_includes_synonym,
        ..EvalConfig::default()
    };
    cfg.validate().py_err()?;
    let pred = parse_scene_graph(pred).py_err()?;
    let gt = parse_scene_graph(gt).py_err()?;
    Ok(to_pretty_json(&eval::evaluate_scene_graph(&pred, &gt, &judge, &cfg).py_err()?))
}

/// Average recall of predicted against ground-truth mask files.
#[pyfunction]
#[pyo3(signature = (pred, gt, mask_iou_thresh = 0.5))]
fn average_recall(pred: &str, gt: &str, mask_iou_thresh: f64) -> PyResult<f64> {
    let pred = parse_mask_video(pred).py_err()?.to_trajectories();
    let gt = parse_mask_video(gt).py_err()?.to_trajectories();
    eval::average_recall(&pred, &gt, mask_iou_thresh).py_err()
}

/// Maximum-score one-to-one assignment: (row, col) pairs and their total.
#[pyfunction]
fn hungarian(scores: Vec<Vec<f64>>) -> PyResult<(Vec<(usize, usize)>, f64)> {
    let a = eval::hungarian_match(&scores).py_err()?;
    Ok((a.pairs, a.total))
}

#[pyfunction]
fn cohens_kappa(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    eval::cohens_kappa(&a, &b).py_err()
}

#[pymodule]
fn vsgkit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VsgError", m.py().get_type::<VsgError>())?;
    m.add_class::<PyMask>()?;
    m.add_function(wrap_pyfunction!(iou, m)?)?;
    m.add_function(wrap_pyfunction!(asym_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(union, m)?)?;
    m.add_function(wrap_pyfunction!(intersect, m)?)?;
    m.add_function(wrap_pyfunction!(pooled_coverage, m)?)?;
    m.add_function(wrap_pyfunction!(morph_cleanup, m)?)?;
    m.add_function(wrap_pyfunction!(filter_proposals, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(suite_scene, m)?)?;
    m.add_function(wrap_pyfunction!(propose, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(arrange_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_scene_graph, m)?)?;
    m.add_function(wrap_pyfunction!(average_recall, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_kappa, m)?)?;
    Ok(())
}
