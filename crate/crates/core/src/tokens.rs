//! Trajectory-aligned token selection, temporal windows, and the delimited
//! per-object token stream.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask_ops::pooled_coverage;
use crate::model::{BinaryMask, MaskVideo, ObjectId};

pub const DEFAULT_TAU_EFF: f64 = 0.5;
pub const DEFAULT_WINDOW_SECONDS: f64 = 4.0;

/// Geometry of the visual token lattice: each token merges
/// `frames_per_token` frames and a `patch_merge × patch_merge` block of
/// `patch_px`-pixel patches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenGridSpec {
    pub frames_per_token: usize,
    pub patch_merge: usize,
    pub patch_px: usize,
    pub width: usize,
    pub height: usize,
    pub n_frames: usize,
    pub fps: f64,
}

impl TokenGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frames_per_token == 0 || self.patch_merge == 0 || self.patch_px == 0 {
            return Err(Error::InvalidParam(
                "frames_per_token, patch_merge and patch_px must be at least 1".into(),
            ));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParam("frame dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Pixel side of one token's spatial footprint.
    pub fn cell(&self) -> usize {
        self.patch_merge * self.patch_px
    }

    /// `(temporal groups, rows, cols)` of the lattice.
    pub fn shape(&self) -> (usize, usize, usize) {
        let c = self.cell();
        (
            self.n_frames.div_ceil(self.frames_per_token),
            self.height.div_ceil(c),
            self.width.div_ceil(c),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenIndex {
    pub t_g: usize,
    pub h_m: usize,
    pub w_m: usize,
}

/// The tokens assigned to one object, sorted by `(t_g, h_m, w_m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSelection {
    pub object_id: ObjectId,
    pub indices: Vec<TokenIndex>,
}

impl TokenSelection {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum StreamElement {
    TrajStart,
    TrajEnd,
    ObjectIdMark(ObjectId),
    VisToken(TokenIndex),
    TimestampMark(f64),
    GlobalSummarySlot,
    WindowSummarySlot(usize),
}

/// Per-token coverage of one object's masks, max-pooled over the frames each
/// token merges. Frames without a mask contribute zero.
pub fn coverage_scores(masks: &BTreeMap<usize, BinaryMask>, spec: &TokenGridSpec) -> Result<Array3<f64>> {
    spec.validate()?;
    let (nt, nh, nw) = spec.shape();
    let mut scores = Array3::<f64>::zeros((nt, nh, nw));
    for (&frame, mask) in masks.range(..spec.n_frames) {
        if mask.dims() != (spec.width, spec.height) {
            return Err(Error::InvalidDimensions(format!(
                "mask {}x{} on a {}x{} grid spec",
                mask.width(),
                mask.height(),
                spec.width,
                spec.height
            )));
        }
        let grid = pooled_coverage(mask, spec.cell())?;
        let t_g = frame / spec.frames_per_token;
        for r in 0..nh {
            for c in 0..nw {
                let s = &mut scores[[t_g, r, c]];
                *s = s.max(grid.get(r, c));
            }
        }
    }
    Ok(scores)
}

/// Tokens whose coverage reaches `tau_eff`.
pub fn select_tokens(object_id: ObjectId, scores: &Array3<f64>, tau_eff: f64) -> TokenSelection {
    let indices = scores
        .indexed_iter()
        .filter(|(_, &s)| s >= tau_eff)
        .map(|((t_g, h_m, w_m), _)| TokenIndex { t_g, h_m, w_m })
        .collect();
    TokenSelection { object_id, indices }
}

/// Window a token group belongs to, anchored at its first frame.
pub fn window_of(t_g: usize, spec: &TokenGridSpec, window_seconds: f64) -> usize {
    let start_seconds = (t_g * spec.frames_per_token) as f64 / spec.fps;
    // guards against 3.9999… from inexact fps
    ((start_seconds / window_seconds) + 1e-9).floor() as usize
}

/// Split a selection into disjoint temporal windows of `window_seconds`.
pub fn partition_windows(
    selection: &TokenSelection,
    spec: &TokenGridSpec,
    window_seconds: f64,
) -> Result<BTreeMap<usize, TokenSelection>> {
    if !(spec.fps > 0.0) {
        return Err(Error::InvalidParam(format!("fps must be positive, got {}", spec.fps)));
    }
    if !(window_seconds > 0.0) {
        return Err(Error::InvalidParam(format!(
            "window length must be positive, got {window_seconds}"
        )));
    }
    let mut windows: BTreeMap<usize, TokenSelection> = BTreeMap::new();
    for &idx in &selection.indices {
        windows
            .entry(window_of(idx.t_g, spec, window_seconds))
            .or_insert_with(|| TokenSelection {
                object_id: selection.object_id,
                indices: Vec::new(),
            })
            .indices
            .push(idx);
    }
    Ok(windows)
}

fn check_unique(selections: &[TokenSelection]) -> Result<()> {
    let mut ids = BTreeSet::new();
    for s in selections {
        if !ids.insert(s.object_id) {
            return Err(Error::InvalidInput(format!("object {} appears twice", s.object_id)));
        }
    }
    Ok(())
}

fn by_id(selections: &[TokenSelection]) -> Vec<&TokenSelection> {
    let mut sorted: Vec<&TokenSelection> = selections.iter().filter(|s| !s.is_empty()).collect();
    sorted.sort_by_key(|s| s.object_id);
    sorted
}

/// Summary-slot layout consumed by the dual resampler. Per object, in
/// ascending id: start, id mark, global slot, then a timestamp and a slot
/// for each occupied window, then end. Objects with no tokens are omitted.
pub fn arrange_stream(
    selections: &[TokenSelection],
    windows: &BTreeMap<ObjectId, BTreeMap<usize, TokenSelection>>,
    window_seconds: f64,
) -> Result<Vec<StreamElement>> {
    check_unique(selections)?;
    let mut out = Vec::new();
    for sel in by_id(selections) {
        out.push(StreamElement::TrajStart);
        out.push(StreamElement::ObjectIdMark(sel.object_id));
        out.push(StreamElement::GlobalSummarySlot);
        if let Some(ws) = windows.get(&sel.object_id) {
            for (&w, sub) in ws {
                if sub.is_empty() {
                    continue;
                }
                out.push(StreamElement::TimestampMark(w as f64 * window_seconds));
                out.push(StreamElement::WindowSummarySlot(w));
            }
        }
        out.push(StreamElement::TrajEnd);
    }
    Ok(out)
}

/// The raw delimited stream before resampling: every selected visual token
/// of each object in temporal order, bracketed by start/end markers.
pub fn arrange_raw_stream(selections: &[TokenSelection]) -> Result<Vec<StreamElement>> {
    check_unique(selections)?;
    let mut out = Vec::new();
    for sel in by_id(selections) {
        out.push(StreamElement::TrajStart);
        out.push(StreamElement::ObjectIdMark(sel.object_id));
        out.extend(sel.indices.iter().copied().map(StreamElement::VisToken));
        out.push(StreamElement::TrajEnd);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct VideoTokens {
    pub selections: Vec<TokenSelection>,
    pub windows: BTreeMap<ObjectId, BTreeMap<usize, TokenSelection>>,
    pub stream: Vec<StreamElement>,
}

/// Select, window and arrange tokens for every object of a mask video.
pub fn arrange_video(
    video: &MaskVideo,
    spec: &TokenGridSpec,
    tau_eff: f64,
    window_seconds: f64,
) -> Result<VideoTokens> {
    let mut selections = Vec::new();
    let mut windows = BTreeMap::new();
    for traj in video.to_trajectories() {
        let scores = coverage_scores(&traj.masks, spec)?;
        let sel = select_tokens(traj.object_id, &scores, tau_eff);
        windows.insert(traj.object_id, partition_windows(&sel, spec, window_seconds)?);
        selections.push(sel);
    }
    let stream = arrange_stream(&selections, &windows, window_seconds)?;
    Ok(VideoTokens {
        selections,
        windows,
        stream,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(g: usize, n_frames: usize, w: usize, h: usize) -> TokenGridSpec {
        TokenGridSpec {
            frames_per_token: g,
            patch_merge: 2,
            patch_px: 2,
            width: w,
            height: h,
            n_frames,
            fps: 1.0,
        }
    }

    #[test]
    fn full_masks_score_one() {
        let s = spec(2, 5, 8, 8);
        let masks: BTreeMap<_, _> = (0..5).map(|f| (f, BinaryMask::full(8, 8).unwrap())).collect();
        let scores = coverage_scores(&masks, &s).unwrap();
        assert_eq!(scores.dim(), (3, 2, 2));
        assert!(scores.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn temporal_max_picks_second_frame() {
        // one 4x4 cell; the mask covers half the cell only in frame 1 of group 0
        let s = spec(2, 2, 4, 4);
        let half = BinaryMask::from_fn(4, 4, |_, y| y < 2).unwrap();
        let scores = coverage_scores(&BTreeMap::from([(1, half)]), &s).unwrap();
        assert_eq!(scores[[0, 0, 0]], 0.5);
    }

    #[test]
    fn threshold_is_inclusive() {
        let scores = Array3::from_shape_vec((1, 1, 3), vec![0.49, 0.5, 0.51]).unwrap();
        let sel = select_tokens(1, &scores, 0.5);
        let ws: Vec<_> = sel.indices.iter().map(|i| i.w_m).collect();
        assert_eq!(ws, vec![1, 2]);
        assert_eq!(select_tokens(1, &scores, 0.0).len(), 3);
    }

    #[test]
    fn windows_at_one_fps() {
        let s = spec(1, 12, 4, 4);
        let sel = TokenSelection {
            object_id: 1,
            indices: (0..8).map(|t| TokenIndex { t_g: t, h_m: 0, w_m: 0 }).collect(),
        };
        let w = partition_windows(&sel, &s, 4.0).unwrap();
        let frames = |k: usize| w[&k].indices.iter().map(|i| i.t_g).collect::<Vec<_>>();
        assert_eq!(frames(0), vec![0, 1, 2, 3]);
        assert_eq!(frames(1), vec![4, 5, 6, 7]);

        let late = TokenSelection {
            object_id: 1,
            indices: vec![TokenIndex { t_g: 5, h_m: 0, w_m: 0 }, TokenIndex { t_g: 6, h_m: 0, w_m: 0 }],
        };
        let w = partition_windows(&late, &s, 4.0).unwrap();
        assert_eq!(w.keys().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn straddling_group_uses_start_frame() {
        // g = 3 at 1 fps: group 1 spans frames 3..5 and starts in window 0
        let s = spec(3, 9, 4, 4);
        assert_eq!(window_of(1, &s, 4.0), 0);
        assert_eq!(window_of(2, &s, 4.0), 1);
    }

    #[test]
    fn bad_window_params() {
        let mut s = spec(1, 4, 4, 4);
        let sel = TokenSelection { object_id: 1, indices: vec![] };
        assert!(partition_windows(&sel, &s, 0.0).is_err());
        s.fps = 0.0;
        assert!(partition_windows(&sel, &s, 4.0).is_err());
    }

    fn one_token(id: ObjectId, t_g: usize) -> TokenSelection {
        TokenSelection {
            object_id: id,
            indices: vec![TokenIndex { t_g, h_m: 0, w_m: 0 }],
        }
    }

    #[test]
    fn single_window_layout() {
        let sel = one_token(1, 0);
        let windows = BTreeMap::from([(1, BTreeMap::from([(0, sel.clone())]))]);
        let stream = arrange_stream(&[sel], &windows, 4.0).unwrap();
        use StreamElement::*;
        assert_eq!(
            stream,
            vec![TrajStart, ObjectIdMark(1), GlobalSummarySlot, TimestampMark(0.0), WindowSummarySlot(0), TrajEnd]
        );
    }

    #[test]
    fn absent_window_is_skipped() {
        let sel = TokenSelection {
            object_id: 2,
            indices: vec![TokenIndex { t_g: 0, h_m: 0, w_m: 0 }, TokenIndex { t_g: 9, h_m: 0, w_m: 0 }],
        };
        let s = spec(1, 12, 4, 4);
        let windows = BTreeMap::from([(2, partition_windows(&sel, &s, 4.0).unwrap())]);
        let stream = arrange_stream(&[sel], &windows, 4.0).unwrap();
        let slots: Vec<_> = stream
            .iter()
            .filter_map(|e| match e {
                StreamElement::WindowSummarySlot(w) => Some(*w),
                _ => None,
            })
            .collect();
        assert_eq!(slots, vec![0, 2]);
        assert!(stream.contains(&StreamElement::TimestampMark(8.0)));
    }

    #[test]
    fn empty_and_duplicate_inputs() {
        assert!(arrange_stream(&[], &BTreeMap::new(), 4.0).unwrap().is_empty());
        assert!(arrange_stream(&[one_token(1, 0), one_token(1, 1)], &BTreeMap::new(), 4.0).is_err());
    }

    #[test]
    fn raw_stream_orders_objects_by_id() {
        let stream = arrange_raw_stream(&[one_token(5, 1), one_token(2, 0)]).unwrap();
        assert_eq!(stream[1], StreamElement::ObjectIdMark(2));
        assert_eq!(stream[5], StreamElement::ObjectIdMark(5));
        assert_eq!(stream.len(), 8);
    }
}
