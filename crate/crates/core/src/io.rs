//! File formats: scene graphs, mask videos, registries, parameter
//! manifests. All are JSON; writers are deterministic byte-for-byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    split_uncertain, BinaryMask, MaskVideo, ObjectId, Registry, Relation, RelationCategory, SceneGraph,
    SceneObject, Span, VideoMeta,
};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    id: ObjectId,
    label: String,
    #[serde(default)]
    uncertain: bool,
    #[serde(default)]
    attributes: Vec<String>,
}

/// Relations are positional arrays; the four-element form omits the
/// category and is read as spatial.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RelationRecord {
    Full(i64, String, i64, Vec<Span>, RelationCategory),
    NoCategory(i64, String, i64, Vec<Span>),
}

#[derive(Serialize, Deserialize)]
struct SceneGraphFile {
    video: VideoMeta,
    objects: Vec<ObjectRecord>,
    relationships: Vec<RelationRecord>,
}

pub fn parse_scene_graph(text: &str) -> Result<SceneGraph> {
    let file: SceneGraphFile = parse_json(text)?;
    let objects = file
        .objects
        .into_iter()
        .map(|o| {
            let (label, tagged) = split_uncertain(&o.label);
            SceneObject {
                object_id: o.id,
                label,
                uncertain: o.uncertain || tagged,
                attributes: o.attributes,
            }
        })
        .collect();
    let relations = file
        .relationships
        .into_iter()
        .map(|r| {
            let (subject_id, predicate, object_id, spans, category) = match r {
                RelationRecord::Full(s, p, o, sp, c) => (s, p, o, sp, c),
                RelationRecord::NoCategory(s, p, o, sp) => (s, p, o, sp, RelationCategory::Spatial),
            };
            Relation {
                subject_id,
                predicate,
                object_id,
                spans,
                category,
            }
        })
        .collect();
    Ok(SceneGraph {
        video: file.video,
        objects,
        relations,
    })
}

pub fn scene_graph_to_string(graph: &SceneGraph) -> String {
    let file = SceneGraphFile {
        video: graph.video,
        objects: graph
            .objects
            .iter()
            .map(|o| ObjectRecord {
                id: o.object_id,
                label: o.label.clone(),
                uncertain: o.uncertain,
                attributes: o.attributes.clone(),
            })
            .collect(),
        relationships: graph
            .relations
            .iter()
            .map(|r| {
                RelationRecord::Full(r.subject_id, r.predicate.clone(), r.object_id, r.spans.clone(), r.category)
            })
            .collect(),
    };
    to_pretty_json(&file)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskHeader {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub n_frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub frame: usize,
    pub object_id: ObjectId,
    pub rle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub header: MaskHeader,
    pub entries: Vec<MaskEntry>,
}

impl MaskFile {
    pub fn from_video(video: &MaskVideo) -> Self {
        let entries = video
            .frames
            .iter()
            .flat_map(|(&frame, masks)| {
                masks.iter().map(move |(&object_id, m)| MaskEntry {
                    frame,
                    object_id,
                    rle: m.runs().to_vec(),
                })
            })
            .collect();
        MaskFile {
            header: MaskHeader {
                width: video.width,
                height: video.height,
                fps: video.fps,
                n_frames: video.n_frames,
            },
            entries,
        }
    }

    /// Validates every entry: canonical runs, frame in range, ids positive
    /// and unique per frame.
    pub fn to_video(&self) -> Result<MaskVideo> {
        let h = &self.header;
        if h.width == 0 || h.height == 0 {
            return Err(Error::InvalidDimensions("mask file header has a zero dimension".into()));
        }
        if !(h.fps > 0.0) {
            return Err(Error::InvalidInput(format!("mask file fps must be positive, got {}", h.fps)));
        }
        let mut video = MaskVideo::new(h.width, h.height, h.fps, h.n_frames);
        for (i, e) in self.entries.iter().enumerate() {
            if e.frame >= h.n_frames {
                return Err(Error::InvalidInput(format!(
                    "entry {i}: frame {} outside {} frames",
                    e.frame, h.n_frames
                )));
            }
            if video.frames.get(&e.frame).is_some_and(|f| f.contains_key(&e.object_id)) {
                return Err(Error::InvalidInput(format!(
                    "entry {i}: object {} repeated in frame {}",
                    e.object_id, e.frame
                )));
            }
            let mask = BinaryMask::from_runs(h.width, h.height, e.rle.clone())
                .map_err(|err| Error::CorruptMask(format!("entry {i}: {err}")))?;
            video.insert(e.frame, e.object_id, mask)?;
        }
        Ok(video)
    }
}

fn entry_lines<T: Serialize>(items: &[T]) -> String {
    let lines: Vec<String> = items
        .iter()
        .map(|e| serde_json::to_string(e).expect("entries serialize"))
        .collect();
    if lines.is_empty() {
        String::new()
    } else {
        format!("\n{}\n", lines.join(",\n"))
    }
}

/// One entry per line so fixtures diff cleanly.
pub fn mask_video_to_string(video: &MaskVideo) -> String {
    let file = MaskFile::from_video(video);
    format!(
        "{{\"header\":{},\"entries\":[{}]}}\n",
        serde_json::to_string(&file.header).expect("header serializes"),
        entry_lines(&file.entries)
    )
}

pub fn parse_mask_video(text: &str) -> Result<MaskVideo> {
    parse_json::<MaskFile>(text)?.to_video()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegistryRecord {
    id: ObjectId,
    entry_frame: usize,
    rle: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RegistryFile {
    width: usize,
    height: usize,
    entries: Vec<RegistryRecord>,
}

pub fn registry_to_string(registry: &Registry, width: usize, height: usize) -> String {
    let records: Vec<RegistryRecord> = registry
        .entries()
        .iter()
        .map(|e| RegistryRecord {
            id: e.object_id,
            entry_frame: e.entry_frame,
            rle: e.mask.runs().to_vec(),
        })
        .collect();
    format!("{{\"width\":{width},\"height\":{height},\"entries\":[{}]}}\n", entry_lines(&records))
}

pub fn parse_registry(text: &str) -> Result<Registry> {
    let file: RegistryFile = parse_json(text)?;
    let mut registry = Registry::new();
    for (i, r) in file.entries.into_iter().enumerate() {
        let mask = BinaryMask::from_runs(file.width, file.height, r.rle)
            .map_err(|err| Error::CorruptMask(format!("registry entry {i}: {err}")))?;
        registry.register(r.id, r.entry_frame, mask)?;
    }
    Ok(registry)
}

/// Object id → label map, for callers that only need labels.
pub fn label_map(graph: &SceneGraph) -> BTreeMap<i64, String> {
    graph
        .objects
        .iter()
        .map(|o| (i64::from(o.object_id), o.label.clone()))
        .collect()
}
