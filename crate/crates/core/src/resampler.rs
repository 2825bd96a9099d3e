//! Desk-scale perceiver resampler: learnable latent queries cross-attend
//! over a variable-length token set and emit a fixed-size summary. Double
//! precision throughout, with an analytic backward pass for gradient checks.

use std::collections::BTreeMap;

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ObjectId;

const RMS_EPS: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-5;
const REL_ERR_FLOOR: f64 = 1e-8;
/// Timestamp channel value of the global block, which has no window time.
pub const GLOBAL_BLOCK_TIMESTAMP: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplerDims {
    pub depth: usize,
    pub n_queries: usize,
    pub d_latent: usize,
    pub d_in: usize,
    pub d_out: usize,
    /// MLP intermediate width is `4 * d_hidden`.
    pub d_hidden: usize,
}

impl Default for ResamplerDims {
    fn default() -> Self {
        ResamplerDims {
            depth: 3,
            n_queries: 32,
            d_latent: 2048,
            d_in: 2048,
            d_out: 2048,
            d_hidden: 2048,
        }
    }
}

impl ResamplerDims {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("depth", self.depth),
            ("n_queries", self.n_queries),
            ("d_latent", self.d_latent),
            ("d_in", self.d_in),
            ("d_out", self.d_out),
            ("d_hidden", self.d_hidden),
        ];
        match all.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(Error::InvalidParam(format!("{name} must be positive"))),
            None => Ok(()),
        }
    }

    pub fn d_mlp(&self) -> usize {
        4 * self.d_hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub latent_gain: Array1<f64>,
    pub input_gain: Array1<f64>,
    pub w_query: Array2<f64>,
    pub w_key: Array2<f64>,
    pub w_value: Array2<f64>,
    pub w_attn_out: Array2<f64>,
    pub post_gain: Array1<f64>,
    pub w_mlp_in: Array2<f64>,
    pub w_mlp_out: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResamplerParams {
    pub dims: ResamplerDims,
    pub latents: Array2<f64>,
    pub layers: Vec<LayerParams>,
    pub w_final: Array2<f64>,
}

/// One object's (or window's) token feature vectors, one row per token in
/// stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatures {
    pub object_id: ObjectId,
    pub vectors: Array2<f64>,
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    // uniform on [-a, a] has stddev a / sqrt(3)
    let a = (3.0 / fan_in as f64).sqrt();
    let dist = Uniform::new_inclusive(-a, a);
    Array2::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

pub fn init_params(seed: u64, dims: ResamplerDims) -> Result<ResamplerParams> {
    dims.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dl, di, dm) = (dims.d_latent, dims.d_in, dims.d_mlp());
    let latents = uniform_matrix(&mut rng, dims.n_queries, dl, dl);
    let layers = (0..dims.depth)
        .map(|_| LayerParams {
            latent_gain: Array1::ones(dl),
            input_gain: Array1::ones(di),
            w_query: uniform_matrix(&mut rng, dl, dl, dl),
            w_key: uniform_matrix(&mut rng, di, dl, di),
            w_value: uniform_matrix(&mut rng, di, dl, di),
            w_attn_out: uniform_matrix(&mut rng, dl, dl, dl),
            post_gain: Array1::ones(dl),
            w_mlp_in: uniform_matrix(&mut rng, dl, dm, dl),
            w_mlp_out: uniform_matrix(&mut rng, dm, dl, dm),
        })
        .collect();
    let w_final = uniform_matrix(&mut rng, dl, dims.d_out, dl);
    Ok(ResamplerParams {
        dims,
        latents,
        layers,
        w_final,
    })
}

fn rms_forward(x: &Array2<f64>, gain: &Array1<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = x.ncols() as f64;
    let r = x.map_axis(Axis(1), |row| (row.dot(&row) / n + RMS_EPS).sqrt());
    let mut y = x.clone();
    for (mut row, &ri) in y.rows_mut().into_iter().zip(&r) {
        Zip::from(&mut row).and(gain).for_each(|v, &g| *v = g * *v / ri);
    }
    (y, r)
}

/// Returns `(dx, dgain)`.
fn rms_backward(x: &Array2<f64>, r: &Array1<f64>, gain: &Array1<f64>, dy: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let n = x.ncols() as f64;
    let mut dx = Array2::zeros(x.raw_dim());
    let mut dgain = Array1::zeros(gain.len());
    for i in 0..x.nrows() {
        let (xr, dyr, ri) = (x.row(i), dy.row(i), r[i]);
        let gdy = &dyr * gain;
        let proj = gdy.dot(&xr);
        dgain += &(&dyr * &xr / ri);
        let mut dxr = dx.row_mut(i);
        Zip::from(&mut dxr)
            .and(&gdy)
            .and(&xr)
            .for_each(|d, &g, &xv| *d = g / ri - xv * proj / (n * ri * ri * ri));
    }
    (dx, dgain)
}

fn softmax_rows(s: &mut Array2<f64>) {
    for mut row in s.rows_mut() {
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - mx).exp());
        let total = row.sum();
        row.mapv_inplace(|v| v / total);
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn silu(v: f64) -> f64 {
    v * sigmoid(v)
}

fn silu_grad(v: f64) -> f64 {
    let sg = sigmoid(v);
    sg * (1.0 + v * (1.0 - sg))
}

struct LayerCache {
    lat_in: Array2<f64>,
    lat_rms: Array1<f64>,
    lat_norm: Array2<f64>,
    in_rms: Array1<f64>,
    in_norm: Array2<f64>,
    query: Array2<f64>,
    key: Array2<f64>,
    value: Array2<f64>,
    attn: Array2<f64>,
    attended: Array2<f64>,
    resid: Array2<f64>,
    post_rms: Array1<f64>,
    post_norm: Array2<f64>,
    mlp_pre: Array2<f64>,
    mlp_act: Array2<f64>,
}

fn check_input(x: &Array2<f64>, dims: &ResamplerDims) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyInput("resampler input has no tokens".into()));
    }
    if x.ncols() != dims.d_in {
        return Err(Error::InvalidDimensions(format!(
            "token features have width {}, expected {}",
            x.ncols(),
            dims.d_in
        )));
    }
    Ok(())
}

fn forward_cached(x: &Array2<f64>, p: &ResamplerParams) -> Result<(Array2<f64>, Vec<LayerCache>, Array2<f64>)> {
    check_input(x, &p.dims)?;
    let scale = 1.0 / (p.dims.d_latent as f64).sqrt();
    let mut lat = p.latents.clone();
    let mut caches = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let (lat_norm, lat_rms) = rms_forward(&lat, &layer.latent_gain);
        let (in_norm, in_rms) = rms_forward(x, &layer.input_gain);
        let query = lat_norm.dot(&layer.w_query);
        let key = in_norm.dot(&layer.w_key);
        let value = in_norm.dot(&layer.w_value);
        let mut attn = query.dot(&key.t()) * scale;
        softmax_rows(&mut attn);
        let attended = attn.dot(&value);
        let resid = &lat + &attended.dot(&layer.w_attn_out);
        let (post_norm, post_rms) = rms_forward(&resid, &layer.post_gain);
        let mlp_pre = post_norm.dot(&layer.w_mlp_in);
        let mlp_act = mlp_pre.mapv(silu);
        let next = &resid + &mlp_act.dot(&layer.w_mlp_out);
        caches.push(LayerCache {
            lat_in: lat,
            lat_rms,
            lat_norm,
            in_rms,
            in_norm,
            query,
            key,
            value,
            attn,
            attended,
            resid,
            post_rms,
            post_norm,
            mlp_pre,
            mlp_act,
        });
        lat = next;
    }
    let z = lat.dot(&p.w_final);
    Ok((z, caches, lat))
}

/// `Z = f(X, L)`: an `n_queries × d_out` summary of the token set.
pub fn resample(x: &Array2<f64>, params: &ResamplerParams) -> Result<Array2<f64>> {
    forward_cached(x, params).map(|(z, _, _)| z)
}

/// Gradients of `loss` w.r.t. every parameter, given `dZ`. Shapes mirror
/// the parameters.
pub fn backward(x: &Array2<f64>, params: &ResamplerParams, dz: &Array2<f64>) -> Result<ResamplerParams> {
    let (z, caches, lat_final) = forward_cached(x, params)?;
    if dz.dim() != z.dim() {
        return Err(Error::InvalidDimensions("output gradient shape mismatch".into()));
    }
    let scale = 1.0 / (params.dims.d_latent as f64).sqrt();
    let mut grads = params.clone();
    grads.w_final = lat_final.t().dot(dz);
    let mut d_lat = dz.dot(&params.w_final.t());

    for (li, (layer, c)) in params.layers.iter().zip(&caches).enumerate().rev() {
        let g = &mut grads.layers[li];
        // MLP branch
        g.w_mlp_out = c.mlp_act.t().dot(&d_lat);
        let mut d_pre = d_lat.dot(&layer.w_mlp_out.t());
        Zip::from(&mut d_pre).and(&c.mlp_pre).for_each(|d, &h| *d *= silu_grad(h));
        g.w_mlp_in = c.post_norm.t().dot(&d_pre);
        let d_post = d_pre.dot(&layer.w_mlp_in.t());
        let (d_resid_norm, d_post_gain) = rms_backward(&c.resid, &c.post_rms, &layer.post_gain, &d_post);
        g.post_gain = d_post_gain;
        let d_resid = &d_lat + &d_resid_norm;

        // attention branch
        g.w_attn_out = c.attended.t().dot(&d_resid);
        let d_attended = d_resid.dot(&layer.w_attn_out.t());
        let d_attn = d_attended.dot(&c.value.t());
        let d_value = c.attn.t().dot(&d_attended);
        let mut d_scores = &c.attn * &d_attn;
        let row_dot = d_scores.sum_axis(Axis(1));
        for (mut row, (&rd, arow)) in d_scores.rows_mut().into_iter().zip(row_dot.iter().zip(c.attn.rows())) {
            Zip::from(&mut row).and(&arow).for_each(|d, &a| *d -= a * rd);
        }
        d_scores *= scale;
        let d_query = d_scores.dot(&c.key);
        let d_key = d_scores.t().dot(&c.query);
        g.w_query = c.lat_norm.t().dot(&d_query);
        g.w_key = c.in_norm.t().dot(&d_key);
        g.w_value = c.in_norm.t().dot(&d_value);
        let d_in_norm = d_key.dot(&layer.w_key.t()) + d_value.dot(&layer.w_value.t());
        let (_, d_input_gain) = rms_backward(x, &c.in_rms, &layer.input_gain, &d_in_norm);
        g.input_gain = d_input_gain;
        let d_lat_norm = d_query.dot(&layer.w_query.t());
        let (d_lat_in, d_lat_gain) = rms_backward(&c.lat_in, &c.lat_rms, &layer.latent_gain, &d_lat_norm);
        g.latent_gain = d_lat_gain;
        d_lat = &d_resid + &d_lat_in;
    }
    grads.latents = d_lat;
    Ok(grads)
}

pub fn sum_sq_loss(z: &Array2<f64>) -> f64 {
    z.iter().map(|v| v * v).sum()
}

impl ResamplerParams {
    /// Named tensors in a fixed order: `(name, shape, row-major values)`.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
            a.as_slice().expect("parameters are kept in standard layout")
        }
        let mut out = vec![(
            "latents".to_string(),
            self.latents.shape().to_vec(),
            flat(&self.latents),
        )];
        for (i, l) in self.layers.iter().enumerate() {
            let entries: [(&str, Vec<usize>, &[f64]); 9] = [
                ("latent_gain", l.latent_gain.shape().to_vec(), flat(&l.latent_gain)),
                ("input_gain", l.input_gain.shape().to_vec(), flat(&l.input_gain)),
                ("w_query", l.w_query.shape().to_vec(), flat(&l.w_query)),
                ("w_key", l.w_key.shape().to_vec(), flat(&l.w_key)),
                ("w_value", l.w_value.shape().to_vec(), flat(&l.w_value)),
                ("w_attn_out", l.w_attn_out.shape().to_vec(), flat(&l.w_attn_out)),
                ("post_gain", l.post_gain.shape().to_vec(), flat(&l.post_gain)),
                ("w_mlp_in", l.w_mlp_in.shape().to_vec(), flat(&l.w_mlp_in)),
                ("w_mlp_out", l.w_mlp_out.shape().to_vec(), flat(&l.w_mlp_out)),
            ];
            out.extend(entries.into_iter().map(|(n, s, v)| (format!("layers.{i}.{n}"), s, v)));
        }
        out.push(("w_final".into(), self.w_final.shape().to_vec(), flat(&self.w_final)));
        out
    }

    /// Mutable flat views in the same order as [`ResamplerParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        fn flat<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
            a.as_slice_mut().expect("parameters are kept in standard layout")
        }
        let mut out = vec![flat(&mut self.latents)];
        for l in &mut self.layers {
            out.push(flat(&mut l.latent_gain));
            out.push(flat(&mut l.input_gain));
            out.push(flat(&mut l.w_query));
            out.push(flat(&mut l.w_key));
            out.push(flat(&mut l.w_value));
            out.push(flat(&mut l.w_attn_out));
            out.push(flat(&mut l.post_gain));
            out.push(flat(&mut l.w_mlp_in));
            out.push(flat(&mut l.w_mlp_out));
        }
        out.push(flat(&mut self.w_final));
        out
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, _, v)| v.len()).sum()
    }

    pub fn manifest(&self) -> ParamManifest {
        ParamManifest {
            dims: self.dims,
            tensors: self
                .tensors()
                .into_iter()
                .map(|(name, shape, values)| ManifestTensor {
                    name,
                    shape,
                    values: values.to_vec(),
                })
                .collect(),
        }
    }

    pub fn from_manifest(manifest: &ParamManifest) -> Result<Self> {
        let mut params = init_params(0, manifest.dims)?;
        let expected: Vec<(String, Vec<usize>)> =
            params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
        if expected.len() != manifest.tensors.len() {
            return Err(Error::InvalidInput(format!(
                "manifest has {} tensors, expected {}",
                manifest.tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&manifest.tensors) {
            if *name != t.name || *shape != t.shape || t.values.len() != shape.iter().product::<usize>() {
                return Err(Error::InvalidInput(format!("manifest tensor {} does not match {name}", t.name)));
            }
        }
        for (dst, t) in params.tensors_mut().into_iter().zip(&manifest.tensors) {
            dst.copy_from_slice(&t.values);
        }
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamManifest {
    pub dims: ResamplerDims,
    pub tensors: Vec<ManifestTensor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: usize,
    pub worst_index: usize,
    pub n_checked: usize,
}

/// Analytic gradient of `sum(Z²)` against central differences, over every
/// scalar parameter. `stride > 1` checks every `stride`-th scalar of each
/// tensor (always including its first).
pub fn grad_check_strided(params: &ResamplerParams, x: &Array2<f64>, step: f64, stride: usize) -> Result<GradCheckReport> {
    if !(step > 0.0) || stride == 0 {
        return Err(Error::InvalidParam("step and stride must be positive".into()));
    }
    let z = resample(x, params)?;
    let analytic = backward(x, params, &(&z * 2.0))?;
    let analytic_flat: Vec<Vec<f64>> = analytic.tensors().into_iter().map(|(_, _, v)| v.to_vec()).collect();

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: 0,
        worst_index: 0,
        n_checked: 0,
    };
    for (ti, grad) in analytic_flat.iter().enumerate() {
        for k in (0..grad.len()).step_by(stride) {
            let orig = params.tensors()[ti].2[k];
            probe.tensors_mut()[ti][k] = orig + step;
            let plus = sum_sq_loss(&resample(x, &probe)?);
            probe.tensors_mut()[ti][k] = orig - step;
            let minus = sum_sq_loss(&resample(x, &probe)?);
            probe.tensors_mut()[ti][k] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let a = grad[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
            report.n_checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = ti;
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}

pub fn grad_check(params: &ResamplerParams, x: &Array2<f64>) -> Result<f64> {
    grad_check_strided(params, x, DEFAULT_FD_STEP, 1).map(|r| r.max_rel_error)
}

/// Stacked summaries of one object: the global block first, then one block
/// per occupied window in temporal order. Column 0 carries the window start
/// time in seconds ([`GLOBAL_BLOCK_TIMESTAMP`] for the global block).
#[derive(Debug, Clone, PartialEq)]
pub struct DualSummary {
    pub object_id: ObjectId,
    /// `(window index, first row)`; the global block starts at row 0.
    pub blocks: Vec<(Option<usize>, usize)>,
    pub stacked: Array2<f64>,
}

pub fn dual_resample(
    object: &TokenFeatures,
    windows: &BTreeMap<usize, Array2<f64>>,
    window_seconds: f64,
    params_global: &ResamplerParams,
    params_window: &ResamplerParams,
) -> Result<DualSummary> {
    if object.vectors.nrows() == 0 {
        return Err(Error::EmptyInput(format!("object {} has no tokens", object.object_id)));
    }
    if params_global.dims.d_out != params_window.dims.d_out {
        return Err(Error::InvalidParam("global and window resamplers disagree on d_out".into()));
    }
    let mut parts = vec![(None, GLOBAL_BLOCK_TIMESTAMP, resample(&object.vectors, params_global)?)];
    for (&w, tokens) in windows {
        if tokens.nrows() == 0 {
            continue;
        }
        parts.push((Some(w), w as f64 * window_seconds, resample(tokens, params_window)?));
    }
    let d_out = params_global.dims.d_out;
    let total_rows: usize = parts.iter().map(|(_, _, z)| z.nrows()).sum();
    let mut stacked = Array2::zeros((total_rows, d_out + 1));
    let mut blocks = Vec::with_capacity(parts.len());
    let mut row = 0;
    for (w, stamp, z) in parts {
        let rows = z.nrows();
        stacked.slice_mut(s![row..row + rows, 0]).fill(stamp);
        stacked.slice_mut(s![row..row + rows, 1..]).assign(&z);
        blocks.push((w, row));
        row += rows;
    }
    Ok(DualSummary {
        object_id: object.object_id,
        blocks,
        stacked,
    })
}

/// Deterministic synthetic token features for tests and the CLI check.
pub fn random_features(seed: u64, n_tokens: usize, d_in: usize) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    Array2::from_shape_fn((n_tokens, d_in), |_| dist.sample(&mut rng))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ResamplerDims {
        ResamplerDims {
            depth: 1,
            n_queries: 2,
            d_latent: 4,
            d_in: 4,
            d_out: 4,
            d_hidden: 4,
        }
    }

    #[test]
    fn init_is_seed_deterministic() {
        assert_eq!(init_params(3, tiny()).unwrap(), init_params(3, tiny()).unwrap());
        assert_ne!(init_params(3, tiny()).unwrap(), init_params(4, tiny()).unwrap());
    }

    #[test]
    fn init_spread_matches_fan_in() {
        let dims = ResamplerDims {
            d_latent: 128,
            d_in: 64,
            ..tiny()
        };
        let p = init_params(11, dims).unwrap();
        // w_query is 128x128: 16k samples at fan-in 128
        let w = &p.layers[0].w_query;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let target = 1.0 / 128f64.sqrt();
        assert!((sd - target).abs() < 0.2 * target, "sd {sd} target {target}");
        assert!(p.layers[0].post_gain.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn repeated_token_is_count_invariant() {
        let p = init_params(1, tiny()).unwrap();
        let one = random_features(2, 1, 4);
        let z1 = resample(&one, &p).unwrap();
        for n in [2, 5, 40] {
            let rep = Array2::from_shape_fn((n, 4), |(_, j)| one[[0, j]]);
            let zn = resample(&rep, &p).unwrap();
            assert!((&zn - &z1).iter().all(|d| d.abs() < 1e-12));
        }
    }

    #[test]
    fn output_shape_ignores_token_count() {
        let p = init_params(1, tiny()).unwrap();
        for n in [1, 7, 100] {
            assert_eq!(resample(&random_features(n as u64, n, 4), &p).unwrap().dim(), (2, 4));
        }
    }

    #[test]
    fn empty_and_misshaped_inputs() {
        let p = init_params(1, tiny()).unwrap();
        assert!(matches!(resample(&Array2::zeros((0, 4)), &p), Err(Error::EmptyInput(_))));
        assert!(matches!(resample(&Array2::zeros((3, 5)), &p), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn gradient_check_tiny() {
        let p = init_params(5, tiny()).unwrap();
        let x = random_features(6, 5, 4);
        let err = grad_check(&p, &x).unwrap();
        assert!(err < 1e-4, "max rel error {err}");
    }

    #[test]
    fn zero_input_forces_zero_key_value_grads() {
        let p = init_params(5, tiny()).unwrap();
        let x = Array2::zeros((3, 4));
        let z = resample(&x, &p).unwrap();
        let g = backward(&x, &p, &(&z * 2.0)).unwrap();
        let l = &g.layers[0];
        assert!(l.w_key.iter().chain(&l.w_value).chain(&l.input_gain).all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_check_depth_three_scaled_down() {
        let dims = ResamplerDims {
            depth: 3,
            n_queries: 4,
            d_latent: 32,
            d_in: 32,
            d_out: 32,
            d_hidden: 32,
        };
        let p = init_params(9, dims).unwrap();
        let x = random_features(10, 6, 32);
        let report = grad_check_strided(&p, &x, DEFAULT_FD_STEP, 97).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn dual_blocks_follow_windows() {
        let p = init_params(1, tiny()).unwrap();
        let obj = TokenFeatures {
            object_id: 3,
            vectors: random_features(1, 6, 4),
        };
        let windows = BTreeMap::from([
            (2, random_features(2, 2, 4)),
            (0, random_features(3, 2, 4)),
            (1, random_features(4, 2, 4)),
        ]);
        let d = dual_resample(&obj, &windows, 4.0, &p, &p).unwrap();
        assert_eq!(d.blocks, vec![(None, 0), (Some(0), 2), (Some(1), 4), (Some(2), 6)]);
        assert_eq!(d.stacked.dim(), (8, 5));
        assert_eq!(d.stacked[[6, 0]], 8.0);
        assert_eq!(d.stacked[[0, 0]], GLOBAL_BLOCK_TIMESTAMP);
    }

    #[test]
    fn single_window_matches_global_with_shared_params() {
        let p = init_params(1, tiny()).unwrap();
        let x = random_features(1, 6, 4);
        let obj = TokenFeatures { object_id: 1, vectors: x.clone() };
        let d = dual_resample(&obj, &BTreeMap::from([(0, x)]), 4.0, &p, &p).unwrap();
        assert_eq!(d.stacked.slice(s![0..2, 1..]), d.stacked.slice(s![2..4, 1..]));
    }

    #[test]
    fn manifest_round_trip() {
        let p = init_params(8, tiny()).unwrap();
        let m = p.manifest();
        assert_eq!(m.tensors[0].name, "latents");
        assert_eq!(ResamplerParams::from_manifest(&m).unwrap(), p);
        let mut bad = m.clone();
        bad.tensors[1].values.pop();
        assert!(ResamplerParams::from_manifest(&bad).is_err());
    }
}
