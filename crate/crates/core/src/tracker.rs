//! Two-pass panoptic tracking over a pluggable mask propagator.
//!
//! The online pass propagates frame-0 proposals forward, watches how much of
//! the untracked region is explained by fresh proposals, and registers new
//! objects at breakpoints. The offline pass resets the propagator and replays
//! the whole video once, seeding every registered object at its entry frame.
//! A post-filter then removes near-duplicate tracks and cleans the masks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask_ops::{self, area, asym_overlap, complement, intersect, union_or_empty};
use crate::model::{BinaryMask, MaskVideo, ObjectId, Registry, Trajectory};
use crate::proposal::{filter_proposals_detailed, FilterConfig, DEFAULT_OVERLAP_THRESH};

/// Stand-in for a video mask predictor.
///
/// Implementations must be deterministic and must never return ids that
/// were not registered with them.
pub trait Propagator {
    /// Seed an object with its mask at `frame`.
    fn register(&mut self, id: ObjectId, frame: usize, mask: &BinaryMask) -> Result<()>;

    /// Produce a mask at `to` for every object in `latest` (their masks at
    /// `from`). A missing or empty mask means the object is lost at `to`.
    fn propagate(
        &mut self,
        latest: &BTreeMap<ObjectId, BinaryMask>,
        from: usize,
        to: usize,
    ) -> Result<BTreeMap<ObjectId, BinaryMask>>;

    /// Forget every registered object.
    fn reset(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub tau_detection: f64,
    pub tau_match: f64,
    pub check_interval: usize,
    pub dedup_iou: f64,
    pub dedup_covis_fraction: f64,
    pub min_area: usize,
    pub morph_radius: usize,
    pub proposal_overlap_thresh: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            tau_detection: 0.1,
            tau_match: 0.5,
            check_interval: 1,
            dedup_iou: 0.8,
            dedup_covis_fraction: 0.8,
            min_area: 200,
            morph_radius: 1,
            proposal_overlap_thresh: DEFAULT_OVERLAP_THRESH,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let fractions = [
            ("tau_detection", self.tau_detection),
            ("tau_match", self.tau_match),
            ("dedup_iou", self.dedup_iou),
            ("dedup_covis_fraction", self.dedup_covis_fraction),
            ("proposal_overlap_thresh", self.proposal_overlap_thresh),
        ];
        for (name, v) in fractions {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParam(format!("{name} must be in (0, 1], got {v}")));
            }
        }
        if self.check_interval == 0 {
            return Err(Error::InvalidParam("check_interval must be at least 1".into()));
        }
        Ok(())
    }

    fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            overlap_thresh: self.proposal_overlap_thresh,
            fallback_sweep: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BreakpointReport {
    pub frame: usize,
    pub untracked_area: usize,
    pub overlap_area: usize,
    pub ratio: f64,
    pub triggered: bool,
}

/// Measure how much of the untracked region is explained by proposals.
pub fn frame_coverage_state(
    frame: usize,
    tracked: &[BinaryMask],
    proposals: &[BinaryMask],
    tau_detection: f64,
    width: usize,
    height: usize,
) -> Result<BreakpointReport> {
    let covered = union_or_empty(tracked, width, height)?;
    let untracked = complement(&covered);
    let detected = union_or_empty(proposals, width, height)?;
    let overlap = intersect(&untracked, &detected)?;
    let untracked_area = area(&untracked);
    let overlap_area = area(&overlap);
    let ratio = if untracked_area == 0 {
        0.0
    } else {
        overlap_area as f64 / untracked_area as f64
    };
    Ok(BreakpointReport {
        frame,
        untracked_area,
        overlap_area,
        ratio,
        triggered: untracked_area > 0 && ratio >= tau_detection,
    })
}

/// Match a new mask against tracked masks by asymmetric overlap. Returns the
/// best-covering id when its overlap reaches `tau_match`, otherwise
/// `(next_id, true)`. Ties go to the smallest id.
pub fn assign_identity(
    new_mask: &BinaryMask,
    tracked: &BTreeMap<ObjectId, BinaryMask>,
    tau_match: f64,
    next_id: ObjectId,
) -> Result<(ObjectId, bool)> {
    if new_mask.is_empty() {
        return Err(Error::EmptyMask("identity assignment of an empty mask"));
    }
    let mut best: Option<(ObjectId, f64)> = None;
    for (&id, mask) in tracked {
        let r = asym_overlap(new_mask, mask)?;
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((id, r));
        }
    }
    Ok(match best {
        Some((id, r)) if r >= tau_match => (id, false),
        _ => (next_id, true),
    })
}

#[derive(Debug, Clone)]
pub struct OnlineResult {
    /// Masks tracked during the first pass.
    pub tracked: MaskVideo,
    pub registry: Registry,
    pub breakpoints: Vec<BreakpointReport>,
}

fn filtered_frame(proposals: &MaskVideo, frame: usize, cfg: &TrackerConfig) -> Result<Vec<BinaryMask>> {
    let masks = proposals.frame_masks(frame);
    let outcome = filter_proposals_detailed(&masks, &cfg.filter_config())?;
    Ok(outcome.selected().into_iter().map(|i| masks[i].clone()).collect())
}

fn advance<P: Propagator + ?Sized>(
    propagator: &mut P,
    latest: &BTreeMap<ObjectId, BinaryMask>,
    frame: usize,
    width: usize,
    height: usize,
) -> Result<BTreeMap<ObjectId, BinaryMask>> {
    let wrap = |reason: String| Error::Propagation { frame, reason };
    let out = propagator
        .propagate(latest, frame - 1, frame)
        .map_err(|e| wrap(e.to_string()))?;
    if let Some(id) = out.keys().find(|id| !latest.contains_key(id)) {
        return Err(wrap(format!("propagator returned unregistered object {id}")));
    }
    let mut next = BTreeMap::new();
    for &id in latest.keys() {
        let mask = match out.get(&id) {
            Some(m) if m.dims() != (width, height) => {
                return Err(wrap(format!("object {id} mask has wrong dimensions")));
            }
            Some(m) => m.clone(),
            None => BinaryMask::empty(width, height)?,
        };
        next.insert(id, mask);
    }
    Ok(next)
}

/// First pass: discover objects and record their entries.
pub fn online_track<P: Propagator + ?Sized>(
    proposals: &MaskVideo,
    propagator: &mut P,
    cfg: &TrackerConfig,
) -> Result<OnlineResult> {
    cfg.validate()?;
    let (w, h) = (proposals.width, proposals.height);
    let mut tracked = MaskVideo::new(w, h, proposals.fps, proposals.n_frames);
    let mut registry = Registry::new();
    let mut breakpoints = Vec::new();
    // current mask of every registered object (possibly empty)
    let mut latest: BTreeMap<ObjectId, BinaryMask> = BTreeMap::new();
    // last non-empty mask of every registered object, for re-matching lost ones
    let mut memory: BTreeMap<ObjectId, BinaryMask> = BTreeMap::new();
    propagator.reset();

    for t in 0..proposals.n_frames {
        if t > 0 && !latest.is_empty() {
            latest = advance(propagator, &latest, t, w, h)?;
            for (&id, m) in &latest {
                if !m.is_empty() {
                    memory.insert(id, m.clone());
                    tracked.insert(t, id, m.clone())?;
                }
            }
        }

        let candidates = filtered_frame(proposals, t, cfg)?;
        if t == 0 {
            for mask in candidates {
                let id = registry.max_id().unwrap_or(0) + 1;
                registry.register(id, t, mask.clone())?;
                propagator.register(id, t, &mask)?;
                tracked.insert(t, id, mask.clone())?;
                memory.insert(id, mask.clone());
                latest.insert(id, mask);
            }
            continue;
        }
        if t % cfg.check_interval != 0 {
            continue;
        }

        let visible: Vec<BinaryMask> = latest.values().filter(|m| !m.is_empty()).cloned().collect();
        let report = frame_coverage_state(t, &visible, &candidates, cfg.tau_detection, w, h)?;
        breakpoints.push(report);
        if !report.triggered {
            continue;
        }

        let untracked = complement(&union_or_empty(&visible, w, h)?);
        for mask in candidates {
            if mask.is_empty() || asym_overlap(&mask, &untracked)? < cfg.tau_detection {
                continue;
            }
            let next_id = registry.max_id().unwrap_or(0) + 1;
            let (id, is_new) = assign_identity(&mask, &memory, cfg.tau_match, next_id)?;
            if !is_new {
                continue;
            }
            registry.register(id, t, mask.clone())?;
            propagator.register(id, t, &mask)?;
            tracked.insert(t, id, mask.clone())?;
            memory.insert(id, mask.clone());
            latest.insert(id, mask);
        }
    }
    Ok(OnlineResult {
        tracked,
        registry,
        breakpoints,
    })
}

/// Second pass: reset, seed every object at its entry frame, and propagate
/// once through the whole video.
pub fn offline_track<P: Propagator + ?Sized>(
    registry: &Registry,
    propagator: &mut P,
    n_frames: usize,
) -> Result<Vec<Trajectory>> {
    let mut seen = BTreeSet::new();
    for e in registry.entries() {
        if !seen.insert(e.object_id) {
            return Err(Error::InvalidInput(format!("duplicate registry id {}", e.object_id)));
        }
        if e.entry_frame >= n_frames {
            return Err(Error::InvalidInput(format!(
                "object {} enters at frame {} of a {n_frames}-frame video",
                e.object_id, e.entry_frame
            )));
        }
    }
    let Some(first) = registry.entries().first() else {
        return Ok(Vec::new());
    };
    let (w, h) = first.mask.dims();

    propagator.reset();
    let mut latest: BTreeMap<ObjectId, BinaryMask> = BTreeMap::new();
    let mut masks: BTreeMap<ObjectId, BTreeMap<usize, BinaryMask>> = BTreeMap::new();
    for t in 0..n_frames {
        if t > 0 && !latest.is_empty() {
            latest = advance(propagator, &latest, t, w, h)?;
        }
        for e in registry.entries().iter().filter(|e| e.entry_frame == t) {
            propagator.register(e.object_id, t, &e.mask)?;
            latest.insert(e.object_id, e.mask.clone());
        }
        for (&id, m) in &latest {
            if !m.is_empty() {
                masks.entry(id).or_default().insert(t, m.clone());
            }
        }
    }
    masks
        .into_iter()
        .map(|(id, m)| Trajectory::new(id, m))
        .collect()
}

fn is_duplicate(a: &Trajectory, b: &Trajectory, cfg: &TrackerConfig) -> Result<bool> {
    let mut covisible = 0usize;
    let mut agreeing = 0usize;
    for (frame, ma) in &a.masks {
        if let Some(mb) = b.masks.get(frame) {
            covisible += 1;
            if mask_ops::iou(ma, mb)? >= cfg.dedup_iou {
                agreeing += 1;
            }
        }
    }
    Ok(covisible > 0 && agreeing as f64 >= cfg.dedup_covis_fraction * covisible as f64)
}

/// Drop near-duplicate tracks (keeping the one present in more frames, or
/// the smaller id on ties), then clean every remaining mask.
pub fn postfilter(trajectories: &[Trajectory], cfg: &TrackerConfig) -> Result<Vec<Trajectory>> {
    let mut sorted: Vec<&Trajectory> = trajectories.iter().collect();
    sorted.sort_by_key(|t| t.object_id);
    let mut dropped = BTreeSet::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (a, b) = (sorted[i], sorted[j]);
            if dropped.contains(&a.object_id) || dropped.contains(&b.object_id) {
                continue;
            }
            if is_duplicate(a, b, cfg)? {
                let loser = if b.present_frames() > a.present_frames() { a } else { b };
                dropped.insert(loser.object_id);
            }
        }
    }

    let mut out = Vec::new();
    for t in sorted.into_iter().filter(|t| !dropped.contains(&t.object_id)) {
        let masks: BTreeMap<usize, BinaryMask> = t
            .masks
            .iter()
            .map(|(&f, m)| (f, mask_ops::morph_cleanup(m, cfg.min_area, cfg.morph_radius)))
            .filter(|(_, m)| !m.is_empty())
            .collect();
        if !masks.is_empty() {
            out.push(Trajectory::new(t.object_id, masks)?);
        }
    }
    Ok(out)
}

/// Mean over frames of the fraction of the frame covered by any trajectory.
pub fn mask_coverage(trajectories: &[Trajectory], width: usize, height: usize, n_frames: usize) -> Result<f64> {
    if n_frames == 0 {
        return Ok(0.0);
    }
    let frame_px = (width * height) as f64;
    let mut total = 0.0;
    for t in 0..n_frames {
        let masks: Vec<BinaryMask> = trajectories
            .iter()
            .filter_map(|tr| tr.masks.get(&t).cloned())
            .collect();
        total += area(&union_or_empty(&masks, width, height)?) as f64 / frame_px;
    }
    Ok(total / n_frames as f64)
}

#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub online: OnlineResult,
    pub offline: Vec<Trajectory>,
    pub filtered: Vec<Trajectory>,
}

/// Online pass, offline replay and post-filter in sequence.
pub fn track_video<P: Propagator + ?Sized>(
    proposals: &MaskVideo,
    propagator: &mut P,
    cfg: &TrackerConfig,
) -> Result<TrackOutput> {
    let online = online_track(proposals, propagator, cfg)?;
    let offline = offline_track(&online.registry, propagator, proposals.n_frames)?;
    let filtered = postfilter(&offline, cfg)?;
    Ok(TrackOutput {
        online,
        offline,
        filtered,
    })
}
