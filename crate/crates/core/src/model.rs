//! Canonical domain types: run-length-encoded binary masks, mask videos,
//! trajectories, the online registry, and scene graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Object identifiers are positive integers. Relation endpoints use
/// [`CAMERA_ID`] for the observer, so they are carried as `i64`.
pub type ObjectId = u32;

/// Reserved relation endpoint for the camera / observer.
pub const CAMERA_ID: i64 = -1;

const UNCERTAIN_SUFFIX: &str = "(uncertain)";

/// A binary mask stored as row-major runs, alternating zero/one counts and
/// starting with the zero-run count.
///
/// Runs are always canonical: no interior zero-length run, a leading zero only
/// when the first pixel is set, and a non-empty trailing run. Two masks with the
/// same pixel set therefore have identical runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    runs: Vec<u32>,
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!(
            "mask dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Encode a row-major bit sequence into canonical runs.
pub fn rle_encode(pixels: &[bool], width: usize, height: usize) -> Result<BinaryMask> {
    check_dims(width, height)?;
    if pixels.len() != width * height {
        return Err(Error::InvalidDimensions(format!(
            "expected {} pixels for {width}x{height}, got {}",
            width * height,
            pixels.len()
        )));
    }
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &p in pixels {
        if p == current {
            count += 1;
        } else {
            runs.push(count);
            current = p;
            count = 1;
        }
    }
    runs.push(count);
    Ok(BinaryMask {
        width,
        height,
        runs,
    })
}

/// Decode a mask back into its row-major bit sequence.
pub fn rle_decode(mask: &BinaryMask) -> Result<Vec<bool>> {
    let total: u64 = mask.runs.iter().map(|&r| r as u64).sum();
    if total != (mask.width * mask.height) as u64 {
        return Err(Error::CorruptMask(format!(
            "run sum {total} != {}x{}",
            mask.width, mask.height
        )));
    }
    Ok(mask.to_bits())
}

impl BinaryMask {
    /// Build a mask from stored runs, checking the run sum and canonical form.
    pub fn from_runs(width: usize, height: usize, runs: Vec<u32>) -> Result<Self> {
        check_dims(width, height)?;
        let total: u64 = runs.iter().map(|&r| r as u64).sum();
        if total != (width * height) as u64 {
            return Err(Error::CorruptMask(format!(
                "run sum {total} != {width}x{height}"
            )));
        }
        if runs.is_empty() {
            return Err(Error::CorruptMask("no runs".into()));
        }
        for (i, &r) in runs.iter().enumerate() {
            if r == 0 && !(i == 0 && runs.len() > 1) {
                return Err(Error::CorruptMask(format!(
                    "zero-length run at position {i} is not canonical"
                )));
            }
        }
        Ok(BinaryMask {
            width,
            height,
            runs,
        })
    }

    pub fn from_bits(pixels: &[bool], width: usize, height: usize) -> Result<Self> {
        rle_encode(pixels, width, height)
    }

    /// Rasterize a predicate over `(x, y)`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        check_dims(width, height)?;
        let bits: Vec<bool> = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        rle_encode(&bits, width, height)
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(BinaryMask {
            width,
            height,
            runs: vec![(width * height) as u32],
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(BinaryMask {
            width,
            height,
            runs: vec![0, (width * height) as u32],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.width * self.height);
        for (i, &r) in self.runs.iter().enumerate() {
            bits.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
        }
        bits
    }

    /// Number of set pixels, computed from the runs.
    pub fn count_ones(&self) -> usize {
        self.runs.iter().skip(1).step_by(2).map(|&r| r as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.count_ones() == 0
    }

    /// Row-major index of the first set pixel.
    pub fn first_set_index(&self) -> Option<usize> {
        if self.runs.len() < 2 {
            None
        } else {
            Some(self.runs[0] as usize)
        }
    }
}

impl fmt::Display for BinaryMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits = self.to_bits();
        for row in bits.chunks(self.width) {
            for &b in row {
                f.write_str(if b { "#" } else { "." })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Per-frame object masks of a whole video.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskVideo {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub n_frames: usize,
    pub frames: BTreeMap<usize, BTreeMap<ObjectId, BinaryMask>>,
}

impl MaskVideo {
    pub fn new(width: usize, height: usize, fps: f64, n_frames: usize) -> Self {
        MaskVideo {
            width,
            height,
            fps,
            n_frames,
            frames: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, frame: usize, id: ObjectId, mask: BinaryMask) -> Result<()> {
        if mask.dims() != (self.width, self.height) {
            return Err(Error::InvalidDimensions(format!(
                "mask {}x{} in a {}x{} video",
                mask.width, mask.height, self.width, self.height
            )));
        }
        if id == 0 {
            return Err(Error::InvalidInput("object ids must be positive".into()));
        }
        self.frames.entry(frame).or_default().insert(id, mask);
        Ok(())
    }

    pub fn frame(&self, frame: usize) -> impl Iterator<Item = (ObjectId, &BinaryMask)> {
        self.frames
            .get(&frame)
            .into_iter()
            .flat_map(|m| m.iter().map(|(&id, mask)| (id, mask)))
    }

    /// Masks of `frame` in ascending object-id order.
    pub fn frame_masks(&self, frame: usize) -> Vec<BinaryMask> {
        self.frame(frame).map(|(_, m)| m.clone()).collect()
    }

    pub fn from_trajectories(
        trajectories: &[Trajectory],
        width: usize,
        height: usize,
        fps: f64,
        n_frames: usize,
    ) -> Result<Self> {
        let mut video = MaskVideo::new(width, height, fps, n_frames);
        for t in trajectories {
            for (&frame, mask) in &t.masks {
                video.insert(frame, t.object_id, mask.clone())?;
            }
        }
        Ok(video)
    }

    /// Regroup masks by object. Trajectories come back in ascending id order.
    pub fn to_trajectories(&self) -> Vec<Trajectory> {
        let mut by_id: BTreeMap<ObjectId, BTreeMap<usize, BinaryMask>> = BTreeMap::new();
        for (&frame, objects) in &self.frames {
            for (&id, mask) in objects {
                by_id.entry(id).or_default().insert(frame, mask.clone());
            }
        }
        by_id
            .into_iter()
            .filter_map(|(id, masks)| Trajectory::new(id, masks).ok())
            .collect()
    }
}

/// An object's identity and its masks over time. Frames may be missing
/// (occlusion); `entry_frame` is always the first frame with a mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub object_id: ObjectId,
    pub entry_frame: usize,
    pub masks: BTreeMap<usize, BinaryMask>,
}

impl Trajectory {
    pub fn new(object_id: ObjectId, masks: BTreeMap<usize, BinaryMask>) -> Result<Self> {
        let entry_frame = *masks
            .keys()
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("trajectory {object_id} has no masks")))?;
        Ok(Trajectory {
            object_id,
            entry_frame,
            masks,
        })
    }

    pub fn mask_at(&self, frame: usize) -> Option<&BinaryMask> {
        self.masks.get(&frame)
    }

    pub fn present_frames(&self) -> usize {
        self.masks.len()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.masks.values().next().map(BinaryMask::dims)
    }
}

/// Indices of `trajectories` ordered by first appearance: entry frame, then
/// the row-major index of the first set pixel of the entry mask, then id.
pub fn canonical_order(trajectories: &[Trajectory]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    order.sort_by_key(|&i| {
        let t = &trajectories[i];
        let first = t
            .masks
            .get(&t.entry_frame)
            .and_then(BinaryMask::first_set_index)
            .unwrap_or(usize::MAX);
        (t.entry_frame, first, t.object_id)
    });
    order
}

/// Renumber trajectories 1..n in [`canonical_order`].
pub fn canonicalize_ids(trajectories: &[Trajectory]) -> Vec<Trajectory> {
    canonical_order(trajectories)
        .into_iter()
        .enumerate()
        .map(|(rank, i)| Trajectory {
            object_id: rank as ObjectId + 1,
            ..trajectories[i].clone()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub object_id: ObjectId,
    pub entry_frame: usize,
    pub mask: BinaryMask,
}

/// First appearance of every object discovered by the online pass, in
/// registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    entries: Vec<RegistryEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, object_id: ObjectId, entry_frame: usize, mask: BinaryMask) -> Result<()> {
        if self.contains(object_id) {
            return Err(Error::InvalidInput(format!(
                "object {object_id} is already registered"
            )));
        }
        self.entries.push(RegistryEntry {
            object_id,
            entry_frame,
            mask,
        });
        Ok(())
    }

    pub fn contains(&self, object_id: ObjectId) -> bool {
        self.entries.iter().any(|e| e.object_id == object_id)
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_id(&self) -> Option<ObjectId> {
        self.entries.iter().map(|e| e.object_id).max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneObject {
    pub object_id: ObjectId,
    pub label: String,
    pub uncertain: bool,
    pub attributes: Vec<String>,
}

impl SceneObject {
    /// Build an object from a raw parsed label, moving a trailing
    /// `(uncertain)` marker into the flag.
    pub fn from_raw_label(object_id: ObjectId, raw: &str, attributes: Vec<String>) -> Self {
        let (label, uncertain) = split_uncertain(raw);
        SceneObject {
            object_id,
            label,
            uncertain,
            attributes,
        }
    }
}

/// Strip a trailing `(uncertain)` tag (case-insensitive) from a label.
pub fn split_uncertain(raw: &str) -> (String, bool) {
    let trimmed = raw.trim();
    let lower = trimmed.to_ascii_lowercase();
    if lower.ends_with(UNCERTAIN_SUFFIX) {
        let cut = trimmed.len() - UNCERTAIN_SUFFIX.len();
        (trimmed[..cut].trim_end().to_string(), true)
    } else {
        (trimmed.to_string(), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationCategory {
    Spatial,
    Functional,
    Stateful,
    Motion,
    Social,
    Attentional,
    EventLevel,
}

/// Inclusive frame interval.
pub type Span = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub subject_id: i64,
    pub predicate: String,
    pub object_id: i64,
    pub spans: Vec<Span>,
    pub category: RelationCategory,
}

/// Sort spans and merge any that overlap or touch.
pub fn merge_spans(spans: &[Span]) -> Vec<Span> {
    let mut sorted: Vec<Span> = spans.iter().map(|&(s, e)| (s.min(e), s.max(e))).collect();
    sorted.sort_unstable();
    let mut out: Vec<Span> = Vec::with_capacity(sorted.len());
    for (s, e) in sorted {
        match out.last_mut() {
            Some(last) if s <= last.1.saturating_add(1) => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

impl Relation {
    pub fn key(&self) -> (i64, &str, i64) {
        (self.subject_id, self.predicate.as_str(), self.object_id)
    }

    pub fn with_merged_spans(mut self) -> Self {
        self.spans = merge_spans(&self.spans);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub n_frames: usize,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub video: VideoMeta,
    pub objects: Vec<SceneObject>,
    pub relations: Vec<Relation>,
}

impl SceneGraph {
    pub fn object(&self, id: i64) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.object_id as i64 == id)
    }

    /// Merge relations sharing (subject, predicate, object, category) and
    /// their overlapping or touching spans.
    pub fn normalized(&self) -> SceneGraph {
        let mut merged: BTreeMap<(i64, String, i64, RelationCategory), Vec<Span>> = BTreeMap::new();
        let mut order = Vec::new();
        for r in &self.relations {
            let key = (r.subject_id, r.predicate.clone(), r.object_id, r.category);
            if !merged.contains_key(&key) {
                order.push(key.clone());
            }
            merged.entry(key).or_default().extend(r.spans.iter().copied());
        }
        let relations = order
            .into_iter()
            .map(|key| {
                let spans = merge_spans(&merged[&key]);
                Relation {
                    subject_id: key.0,
                    predicate: key.1,
                    object_id: key.2,
                    spans,
                    category: key.3,
                }
            })
            .collect();
        SceneGraph {
            video: self.video,
            objects: self.objects.clone(),
            relations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn relation_field(r: &Relation) -> String {
    format!(
        "relationships[({}, {:?}, {})]",
        r.subject_id, r.predicate, r.object_id
    )
}

/// Check every scene-graph invariant. Violations are named by content rather
/// than list position, and returned sorted, so the result does not depend on
/// relation order.
pub fn validate_scene_graph(g: &SceneGraph) -> Vec<Violation> {
    let mut out = BTreeSet::new();
    let mut push = |field: String, rule: &str| {
        out.insert(Violation {
            field,
            rule: rule.to_string(),
        });
    };

    let mut ids = BTreeSet::new();
    for o in &g.objects {
        let field = format!("objects[id={}]", o.object_id);
        if o.object_id == 0 {
            push(field.clone(), "non-positive object id");
        }
        if !ids.insert(o.object_id) {
            push(field.clone(), "duplicate object id");
        }
        if o.label.trim().is_empty() {
            push(field.clone(), "empty label");
        }
    }

    let mut seen: BTreeMap<(i64, &str, i64), Vec<Span>> = BTreeMap::new();
    for r in &g.relations {
        let field = relation_field(r);
        if r.subject_id == r.object_id {
            push(field.clone(), "self-relation");
        }
        for endpoint in [r.subject_id, r.object_id] {
            if endpoint != CAMERA_ID && (endpoint <= 0 || !ids.contains(&(endpoint as ObjectId))) {
                push(field.clone(), "unknown endpoint");
            }
        }
        if r.object_id == CAMERA_ID {
            push(field.clone(), "camera as relation object");
        }
        if r.predicate.trim().is_empty() {
            push(field.clone(), "empty predicate");
        }
        if r.spans.is_empty() {
            push(field.clone(), "no spans");
        }
        for &(s, e) in &r.spans {
            if s > e {
                push(field.clone(), "span start after end");
            }
            if g.video.n_frames > 0 && e as usize >= g.video.n_frames {
                push(field.clone(), "span beyond video");
            }
        }
        for w in r.spans.windows(2) {
            if w[1].0 < w[0].0 {
                push(field.clone(), "unsorted spans");
            } else if w[1].0 <= w[0].1 {
                push(field.clone(), "overlapping spans");
            }
        }
        let prior = seen.entry(r.key()).or_default();
        let overlaps_prior = r.spans.iter().any(|&(s, e)| {
            prior.iter().any(|&(ps, pe)| s <= pe && ps <= e)
        });
        if overlaps_prior {
            push(field.clone(), "duplicate relation with overlapping spans");
        }
        prior.extend(r.spans.iter().copied());
    }
    out.into_iter().collect()
}
