//! Deterministic toy videos with ground-truth instance masks, a noisy
//! proposal generator, and an oracle propagator.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask_ops::{self, bbox_of, dilate, erode};
use crate::model::{canonical_order, BinaryMask, MaskVideo, ObjectId, Trajectory};
use crate::tracker::Propagator;

/// Objects whose visible area falls below this fraction of their full area
/// count as absent in that frame.
pub const VISIBILITY_FLOOR: f64 = 0.05;

/// Registration masks whose best IoU with any ground-truth object is below
/// this are tracked as static ghosts.
pub const GHOST_IOU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Rectangle { width: usize, height: usize },
    Disk { radius: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub kind: ShapeKind,
    /// Top-left corner of the shape's bounding box at its entry frame.
    pub origin: (i64, i64),
    /// Pixels per frame.
    #[serde(default)]
    pub velocity: (i64, i64),
    pub entry_frame: usize,
    /// Exclusive.
    pub exit_frame: usize,
    #[serde(default)]
    pub occluder: bool,
}

impl ShapeSpec {
    fn extent(&self) -> (i64, i64) {
        match self.kind {
            ShapeKind::Rectangle { width, height } => (width as i64, height as i64),
            ShapeKind::Disk { radius } => (2 * radius as i64 + 1, 2 * radius as i64 + 1),
        }
    }

    fn contains(&self, frame: usize, x: i64, y: i64) -> bool {
        let dt = frame as i64 - self.entry_frame as i64;
        let ox = self.origin.0 + self.velocity.0 * dt;
        let oy = self.origin.1 + self.velocity.1 * dt;
        match self.kind {
            ShapeKind::Rectangle { width, height } => {
                x >= ox && x < ox + width as i64 && y >= oy && y < oy + height as i64
            }
            ShapeKind::Disk { radius } => {
                let r = radius as i64;
                let (dx, dy) = (x - ox - r, y - oy - r);
                dx * dx + dy * dy <= r * r
            }
        }
    }

    /// Pixel count of the shape ignoring the frame boundary.
    pub fn full_area(&self) -> usize {
        match self.kind {
            ShapeKind::Rectangle { width, height } => width * height,
            ShapeKind::Disk { radius } => {
                let r = radius as i64;
                (-r..=r)
                    .flat_map(|dy| (-r..=r).map(move |dx| dx * dx + dy * dy))
                    .filter(|&d| d <= r * r)
                    .count()
            }
        }
    }

    pub fn is_present(&self, frame: usize) -> bool {
        frame >= self.entry_frame && frame < self.exit_frame
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default)]
    pub seed: u64,
    pub n_frames: usize,
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub shapes: Vec<ShapeSpec>,
}

fn default_fps() -> f64 {
    1.0
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.n_frames == 0 {
            return Err(Error::InvalidSpec("frame size and length must be positive".into()));
        }
        if !(self.fps > 0.0) {
            return Err(Error::InvalidSpec(format!("fps must be positive, got {}", self.fps)));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if s.entry_frame >= s.exit_frame || s.exit_frame > self.n_frames {
                return Err(Error::InvalidSpec(format!(
                    "shape {i}: need entry < exit <= n_frames, got {}..{} of {}",
                    s.entry_frame, s.exit_frame, self.n_frames
                )));
            }
            let (ew, eh) = s.extent();
            if ew <= 0 || eh <= 0 {
                return Err(Error::InvalidSpec(format!("shape {i} has zero size")));
            }
            let (ox, oy) = s.origin;
            if ox < 0 || oy < 0 || ox + ew > self.width as i64 || oy + eh > self.height as i64 {
                return Err(Error::InvalidSpec(format!(
                    "shape {i} does not fit the {}x{} frame at its entry",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedScene {
    /// Visible masks per object, ids in order of first appearance.
    pub trajectories: Vec<Trajectory>,
    pub video: MaskVideo,
    /// Object id assigned to each shape of the spec, if it was ever visible.
    pub shape_ids: Vec<Option<ObjectId>>,
}

/// Rasterize every frame in painter's order: non-occluders first, then
/// occluders, each group in list order; later shapes win pixels.
pub fn generate_scene(spec: &SceneSpec) -> Result<GeneratedScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut paint_order: Vec<usize> = (0..spec.shapes.len()).collect();
    paint_order.sort_by_key(|&i| (spec.shapes[i].occluder, i));
    let full_areas: Vec<usize> = spec.shapes.iter().map(ShapeSpec::full_area).collect();

    let mut per_shape: Vec<BTreeMap<usize, BinaryMask>> = vec![BTreeMap::new(); spec.shapes.len()];
    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    for t in 0..spec.n_frames {
        owner.iter_mut().for_each(|o| *o = None);
        for &i in &paint_order {
            let s = &spec.shapes[i];
            if !s.is_present(t) {
                continue;
            }
            for y in 0..h {
                for x in 0..w {
                    if s.contains(t, x as i64, y as i64) {
                        owner[y * w + x] = Some(i);
                    }
                }
            }
        }
        for (i, s) in spec.shapes.iter().enumerate() {
            if !s.is_present(t) {
                continue;
            }
            let bits: Vec<bool> = owner.iter().map(|&o| o == Some(i)).collect();
            let visible = bits.iter().filter(|&&b| b).count();
            if visible > 0 && visible as f64 >= VISIBILITY_FLOOR * full_areas[i] as f64 {
                per_shape[i].insert(t, BinaryMask::from_bits(&bits, w, h)?);
            }
        }
    }

    // provisional ids are shape index + 1; canonical ids follow first appearance
    let provisional: Vec<Trajectory> = per_shape
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(i, m)| Trajectory::new(i as ObjectId + 1, m))
        .collect::<Result<_>>()?;
    let mut shape_ids = vec![None; spec.shapes.len()];
    let mut canonical = Vec::with_capacity(provisional.len());
    for (rank, i) in canonical_order(&provisional).into_iter().enumerate() {
        let id = rank as ObjectId + 1;
        shape_ids[provisional[i].object_id as usize - 1] = Some(id);
        canonical.push(Trajectory {
            object_id: id,
            ..provisional[i].clone()
        });
    }
    let video = MaskVideo::from_trajectories(&canonical, w, h, spec.fps, spec.n_frames)?;
    Ok(GeneratedScene {
        trajectories: canonical,
        video,
        shape_ids,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub drop_prob: f64,
    pub split_prob: f64,
    pub duplicate_prob: f64,
    pub jitter_px: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            drop_prob: 0.0,
            split_prob: 0.0,
            duplicate_prob: 0.0,
            jitter_px: 0,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("drop_prob", self.drop_prob),
            ("split_prob", self.split_prob),
            ("duplicate_prob", self.duplicate_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidSpec(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ a) ^ b))
}

fn jitter(mask: &BinaryMask, px: usize, rng: &mut ChaCha8Rng) -> BinaryMask {
    if px == 0 {
        return mask.clone();
    }
    if rng.gen_bool(0.5) {
        dilate(mask, px)
    } else {
        erode(mask, px)
    }
}

/// Split a mask into the rows above and below the middle of its bounding box.
pub fn split_rows(mask: &BinaryMask) -> Vec<BinaryMask> {
    let Some((_, y1, _, y2)) = bbox_of(mask) else {
        return Vec::new();
    };
    let mid = y1 + (y2 - y1 + 1).div_ceil(2);
    let w = mask.width();
    let bits = mask.to_bits();
    [true, false]
        .into_iter()
        .map(|top| {
            let half: Vec<bool> = bits
                .iter()
                .enumerate()
                .map(|(i, &b)| b && ((i / w < mid) == top))
                .collect();
            BinaryMask::from_bits(&half, w, mask.height()).expect("dims already valid")
        })
        .filter(|m| !m.is_empty())
        .collect()
}

/// Corrupt ground-truth masks the way an automatic proposer does: drop some,
/// fragment some into row halves, duplicate some, and jitter boundaries.
/// Deterministic in `(noise.seed, frame)` and the order of `gt`.
pub fn noisy_proposals(gt: &[BinaryMask], noise: &NoiseSpec, frame: usize) -> Vec<BinaryMask> {
    let mut rng = stream_rng(noise.seed, frame as u64, 0x70726f70);
    let mut out = Vec::new();
    for mask in gt {
        let drop = rng.gen::<f64>() < noise.drop_prob;
        let split = rng.gen::<f64>() < noise.split_prob;
        let dup = rng.gen::<f64>() < noise.duplicate_prob;
        if drop || mask.is_empty() {
            continue;
        }
        let pieces = if split { split_rows(mask) } else { vec![mask.clone()] };
        for piece in pieces {
            for _ in 0..(1 + dup as usize) {
                let j = jitter(&piece, noise.jitter_px, &mut rng);
                if !j.is_empty() {
                    out.push(j);
                }
            }
        }
    }
    out
}

/// Noisy proposals for every frame of a video, in the mask-file layout
/// (object ids are 1-based proposal indices within each frame).
pub fn propose_video(video: &MaskVideo, noise: &NoiseSpec) -> Result<MaskVideo> {
    noise.validate()?;
    let mut out = MaskVideo::new(video.width, video.height, video.fps, video.n_frames);
    for t in 0..video.n_frames {
        let props = noisy_proposals(&video.frame_masks(t), noise, t);
        for (i, m) in props.into_iter().enumerate() {
            out.insert(t, i as ObjectId + 1, m)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Binding {
    Truth(ObjectId),
    Ghost(BinaryMask),
}

/// Propagator that looks up ground truth. Each registered object is bound to
/// the ground-truth trajectory its registration mask overlaps best.
#[derive(Debug, Clone)]
pub struct OraclePropagator {
    truth: BTreeMap<ObjectId, Trajectory>,
    width: usize,
    height: usize,
    degradation: Option<NoiseSpec>,
    bindings: BTreeMap<ObjectId, Binding>,
}

impl OraclePropagator {
    pub fn new(scene: &GeneratedScene, degradation: Option<NoiseSpec>) -> Self {
        OraclePropagator {
            truth: scene.trajectories.iter().map(|t| (t.object_id, t.clone())).collect(),
            width: scene.video.width,
            height: scene.video.height,
            degradation,
            bindings: BTreeMap::new(),
        }
    }

    pub fn from_spec(spec: &SceneSpec, degradation: Option<NoiseSpec>) -> Result<Self> {
        Ok(Self::new(&generate_scene(spec)?, degradation))
    }

    /// Ground-truth id an object is bound to, or `None` for ghosts.
    pub fn binding(&self, id: ObjectId) -> Option<ObjectId> {
        match self.bindings.get(&id)? {
            Binding::Truth(g) => Some(*g),
            Binding::Ghost(_) => None,
        }
    }

    fn degrade(&self, id: ObjectId, frame: usize, mask: BinaryMask) -> BinaryMask {
        let Some(noise) = &self.degradation else {
            return mask;
        };
        let mut rng = stream_rng(noise.seed, frame as u64, id as u64);
        if rng.gen::<f64>() < noise.drop_prob {
            return BinaryMask::empty(self.width, self.height).expect("dims already valid");
        }
        jitter(&mask, noise.jitter_px, &mut rng)
    }
}

impl Propagator for OraclePropagator {
    fn register(&mut self, id: ObjectId, frame: usize, mask: &BinaryMask) -> Result<()> {
        let mut best: Option<(ObjectId, f64)> = None;
        for (&gid, traj) in &self.truth {
            if let Some(gt) = traj.mask_at(frame) {
                let score = mask_ops::iou(mask, gt)?;
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((gid, score));
                }
            }
        }
        let binding = match best {
            Some((gid, score)) if score >= GHOST_IOU => Binding::Truth(gid),
            _ => Binding::Ghost(mask.clone()),
        };
        self.bindings.insert(id, binding);
        Ok(())
    }

    fn propagate(
        &mut self,
        latest: &BTreeMap<ObjectId, BinaryMask>,
        _from: usize,
        to: usize,
    ) -> Result<BTreeMap<ObjectId, BinaryMask>> {
        let mut out = BTreeMap::new();
        for &id in latest.keys() {
            let mask = match self.bindings.get(&id) {
                Some(Binding::Truth(gid)) => match self.truth[gid].mask_at(to) {
                    Some(m) => m.clone(),
                    None => BinaryMask::empty(self.width, self.height)?,
                },
                Some(Binding::Ghost(m)) => m.clone(),
                None => {
                    return Err(Error::InvalidInput(format!("object {id} was never registered")));
                }
            };
            out.insert(id, self.degrade(id, to, mask));
        }
        Ok(out)
    }

    fn reset(&mut self) {
        self.bindings.clear();
    }
}

/// Knobs for [`random_scene`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSceneParams {
    pub n_frames: usize,
    pub width: usize,
    pub height: usize,
    pub n_shapes: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub max_speed: i64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        RandomSceneParams {
            n_frames: 12,
            width: 48,
            height: 48,
            n_shapes: 4,
            min_size: 12,
            max_size: 20,
            max_speed: 2,
        }
    }
}

/// A random but valid scene: shapes of random kind and size enter at random
/// frames fully inside the frame and drift with small integer velocities.
pub fn random_scene(seed: u64, p: &RandomSceneParams) -> SceneSpec {
    let mut rng = stream_rng(seed, 0x7363656e65, 0);
    let shapes = (0..p.n_shapes)
        .map(|_| {
            let kind = if rng.gen_bool(0.5) {
                ShapeKind::Rectangle {
                    width: rng.gen_range(p.min_size..=p.max_size),
                    height: rng.gen_range(p.min_size..=p.max_size),
                }
            } else {
                ShapeKind::Disk {
                    radius: rng.gen_range(p.min_size / 2..=p.max_size / 2),
                }
            };
            let spec = ShapeSpec {
                kind,
                origin: (0, 0),
                velocity: (0, 0),
                entry_frame: 0,
                exit_frame: 1,
                occluder: false,
            };
            let (ew, eh) = spec.extent();
            let entry_frame = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..p.n_frames - 1) };
            ShapeSpec {
                origin: (
                    rng.gen_range(0..=(p.width as i64 - ew)),
                    rng.gen_range(0..=(p.height as i64 - eh)),
                ),
                velocity: (
                    rng.gen_range(-p.max_speed..=p.max_speed),
                    rng.gen_range(-p.max_speed..=p.max_speed),
                ),
                entry_frame,
                exit_frame: rng.gen_range(entry_frame + 1..=p.n_frames),
                occluder: rng.gen_bool(0.25),
                ..spec
            }
        })
        .collect();
    SceneSpec {
        seed,
        n_frames: p.n_frames,
        width: p.width,
        height: p.height,
        fps: 1.0,
        shapes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_shape(w: usize, h: usize, origin: (i64, i64), velocity: (i64, i64), span: (usize, usize)) -> ShapeSpec {
        ShapeSpec {
            kind: ShapeKind::Rectangle { width: w, height: h },
            origin,
            velocity,
            entry_frame: span.0,
            exit_frame: span.1,
            occluder: false,
        }
    }

    fn scene(shapes: Vec<ShapeSpec>, n_frames: usize) -> SceneSpec {
        SceneSpec {
            seed: 0,
            n_frames,
            width: 32,
            height: 24,
            fps: 1.0,
            shapes,
        }
    }

    #[test]
    fn static_rectangle() {
        let g = generate_scene(&scene(vec![rect_shape(10, 10, (3, 4), (0, 0), (0, 5))], 5)).unwrap();
        assert_eq!(g.trajectories.len(), 1);
        let t = &g.trajectories[0];
        assert_eq!(t.masks.len(), 5);
        assert!(t.masks.values().all(|m| m == &t.masks[&0] && m.count_ones() == 100));
    }

    #[test]
    fn moving_rectangle_shifts_bbox() {
        let g = generate_scene(&scene(vec![rect_shape(6, 4, (0, 2), (2, 0), (0, 6))], 6)).unwrap();
        let t = &g.trajectories[0];
        for f in 0..6 {
            let (x1, y1, x2, y2) = bbox_of(&t.masks[&f]).unwrap();
            assert_eq!((x1, y1, x2, y2), (2 * f, 2, 2 * f + 5, 5));
        }
    }

    #[test]
    fn out_of_frame_shape_is_rejected() {
        let s = scene(vec![rect_shape(10, 10, (25, 0), (0, 0), (0, 2))], 2);
        assert!(matches!(generate_scene(&s), Err(Error::InvalidSpec(_))));
        let s = scene(vec![rect_shape(4, 4, (0, 0), (0, 0), (2, 2))], 3);
        assert!(matches!(generate_scene(&s), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn identity_noise_is_identity() {
        let gt = vec![
            BinaryMask::from_fn(16, 16, |x, y| x < 4 && y < 4).unwrap(),
            BinaryMask::from_fn(16, 16, |x, y| x > 8 && y > 8).unwrap(),
        ];
        assert_eq!(noisy_proposals(&gt, &NoiseSpec::default(), 3), gt);
        let all_drop = NoiseSpec {
            drop_prob: 1.0,
            ..NoiseSpec::default()
        };
        assert!(noisy_proposals(&gt, &all_drop, 3).is_empty());
    }

    #[test]
    fn split_halves_reassemble() {
        let sq = BinaryMask::from_fn(16, 16, |x, y| (3..13).contains(&x) && (2..12).contains(&y)).unwrap();
        let noise = NoiseSpec {
            split_prob: 1.0,
            ..NoiseSpec::default()
        };
        let halves = noisy_proposals(&[sq.clone()], &noise, 0);
        assert_eq!(halves.len(), 2);
        assert!(halves.iter().all(|h| h.count_ones() == 50));
        assert_eq!(bbox_of(&halves[0]), Some((3, 2, 12, 6)));
        assert_eq!(mask_ops::union(&halves).unwrap().unwrap(), sq);
    }

    #[test]
    fn exited_object_propagates_empty() {
        let spec = scene(vec![rect_shape(8, 8, (1, 1), (0, 0), (0, 3))], 5);
        let g = generate_scene(&spec).unwrap();
        let mut p = OraclePropagator::new(&g, None);
        let m0 = g.trajectories[0].masks[&0].clone();
        p.register(1, 0, &m0).unwrap();
        let latest = BTreeMap::from([(1, m0.clone())]);
        assert_eq!(p.propagate(&latest, 0, 1).unwrap()[&1], m0);
        assert!(p.propagate(&latest, 2, 3).unwrap()[&1].is_empty());
    }

    #[test]
    fn unmatched_registration_becomes_ghost() {
        let spec = scene(vec![rect_shape(4, 4, (0, 0), (1, 0), (0, 4))], 4);
        let g = generate_scene(&spec).unwrap();
        let mut p = OraclePropagator::new(&g, None);
        let stray = BinaryMask::from_fn(32, 24, |x, y| x > 28 && y > 20).unwrap();
        p.register(7, 1, &stray).unwrap();
        assert_eq!(p.binding(7), None);
        let out = p.propagate(&BTreeMap::from([(7, stray.clone())]), 1, 3).unwrap();
        assert_eq!(out[&7], stray);
    }

    #[test]
    fn unregistered_object_is_an_error() {
        let g = generate_scene(&scene(vec![rect_shape(4, 4, (0, 0), (0, 0), (0, 2))], 2)).unwrap();
        let mut p = OraclePropagator::new(&g, None);
        let m = BinaryMask::empty(32, 24).unwrap();
        assert!(p.propagate(&BTreeMap::from([(1, m)]), 0, 1).is_err());
    }

    #[test]
    fn random_scenes_are_valid_and_deterministic() {
        for seed in 0..50 {
            let a = random_scene(seed, &RandomSceneParams::default());
            a.validate().unwrap();
            assert_eq!(a, random_scene(seed, &RandomSceneParams::default()));
        }
    }
}
