//! Brute-force reference implementations working on raw pixel vectors.

use std::collections::BTreeMap;

use rand::Rng;
use vsg_core::model::{BinaryMask, Relation, RelationCategory};

/// Random bits with a random fill rate, so both sparse and dense masks
/// come up.
pub fn random_bits(rng: &mut impl Rng, width: usize, height: usize) -> Vec<bool> {
    let p: f64 = rng.gen_range(0.0..=1.0);
    (0..width * height).map(|_| rng.gen_bool(p)).collect()
}

/// Random axis-aligned blobs, which look more like segmentation output.
pub fn random_blobs(rng: &mut impl Rng, width: usize, height: usize, n: usize) -> Vec<bool> {
    let mut bits = vec![false; width * height];
    for _ in 0..n {
        let (x0, y0) = (rng.gen_range(0..width), rng.gen_range(0..height));
        let (x1, y1) = (rng.gen_range(x0..width), rng.gen_range(y0..height));
        for y in y0..=y1 {
            for x in x0..=x1 {
                bits[y * width + x] = true;
            }
        }
    }
    bits
}

pub fn mask(bits: &[bool], width: usize, height: usize) -> BinaryMask {
    BinaryMask::from_bits(bits, width, height).unwrap()
}

pub fn count(bits: &[bool]) -> usize {
    bits.iter().filter(|&&b| b).count()
}

/// Expected coverage of cell (r, c): set pixels inside the cell over the
/// full cell area, cells reaching past the border included.
pub fn cell_coverage(bits: &[bool], width: usize, height: usize, cell: usize, r: usize, c: usize) -> f64 {
    let mut hits = 0usize;
    for y in r * cell..(r + 1) * cell {
        for x in c * cell..(c + 1) * cell {
            if x < width && y < height && bits[y * width + x] {
                hits += 1;
            }
        }
    }
    hits as f64 / (cell * cell) as f64
}

/// Maximum assignment total over all partial injections of the smaller
/// side into the larger.
pub fn brute_force_assignment(scores: &[Vec<f64>]) -> f64 {
    let n = scores.len();
    let m = scores.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return 0.0;
    }
    fn go(scores: &[Vec<f64>], row: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
        let (rows, cols) = if transpose {
            (scores[0].len(), scores.len())
        } else {
            (scores.len(), scores[0].len())
        };
        if row == rows {
            return 0.0;
        }
        let mut best = f64::NEG_INFINITY;
        for c in 0..cols {
            if used[c] {
                continue;
            }
            used[c] = true;
            let s = if transpose { scores[c][row] } else { scores[row][c] };
            best = best.max(s + go(scores, row + 1, used, transpose));
            used[c] = false;
        }
        best
    }
    let transpose = n > m;
    let cols = if transpose { n } else { m };
    go(scores, 0, &mut vec![false; cols], transpose)
}

const PREDICATES: [&str; 6] = ["holding", "grasping", "near", "next to", "looking at", "watching"];
const LABELS: [&str; 8] = ["person", "human", "dog", "animal", "cup", "mug", "chair", "table"];

pub fn random_labels(rng: &mut impl Rng, n: i64) -> BTreeMap<i64, String> {
    (1..=n)
        .map(|i| (i, LABELS[rng.gen_range(0..LABELS.len())].to_string()))
        .collect()
}

pub fn random_relations(rng: &mut impl Rng, n_objects: i64, n: usize) -> Vec<Relation> {
    (0..n)
        .map(|_| {
            let s = rng.gen_range(1..=n_objects);
            let mut o = rng.gen_range(1..=n_objects);
            if o == s {
                o = if s == n_objects { 1 } else { s + 1 };
            }
            let start = rng.gen_range(0..20u32);
            let end = rng.gen_range(start..24);
            Relation {
                subject_id: s,
                predicate: PREDICATES[rng.gen_range(0..PREDICATES.len())].to_string(),
                object_id: o,
                spans: vec![(start, end)],
                category: RelationCategory::Spatial,
            }
        })
        .collect()
}
