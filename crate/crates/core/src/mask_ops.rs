//! Pixel-set algebra over [`BinaryMask`].

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::BinaryMask;

/// Per-cell coverage fractions of a mask under square average pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl CoverageGrid {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

fn same_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::InvalidDimensions(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn zip_bits(a: &BinaryMask, b: &BinaryMask, op: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
    same_dims(a, b)?;
    let bits: Vec<bool> = a
        .to_bits()
        .into_iter()
        .zip(b.to_bits())
        .map(|(x, y)| op(x, y))
        .collect();
    BinaryMask::from_bits(&bits, a.width(), a.height())
}

pub fn area(m: &BinaryMask) -> usize {
    m.count_ones()
}

/// Pixel-wise OR of all masks. An empty list yields `None` because there are
/// no dimensions to build a mask from; use [`union_or_empty`] when the
/// dimensions are known.
pub fn union(masks: &[BinaryMask]) -> Result<Option<BinaryMask>> {
    let Some(first) = masks.first() else {
        return Ok(None);
    };
    let mut acc = first.to_bits();
    for m in &masks[1..] {
        same_dims(first, m)?;
        for (a, b) in acc.iter_mut().zip(m.to_bits()) {
            *a |= b;
        }
    }
    BinaryMask::from_bits(&acc, first.width(), first.height()).map(Some)
}

pub fn union_or_empty(masks: &[BinaryMask], width: usize, height: usize) -> Result<BinaryMask> {
    match union(masks)? {
        Some(m) if m.dims() == (width, height) => Ok(m),
        Some(m) => Err(Error::InvalidDimensions(format!(
            "union is {}x{}, expected {width}x{height}",
            m.width(),
            m.height()
        ))),
        None => BinaryMask::empty(width, height),
    }
}

pub fn intersect(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_bits(a, b, |x, y| x && y)
}

pub fn complement(m: &BinaryMask) -> BinaryMask {
    let bits: Vec<bool> = m.to_bits().into_iter().map(|b| !b).collect();
    BinaryMask::from_bits(&bits, m.width(), m.height()).expect("dims already valid")
}

fn overlap_counts(a: &BinaryMask, b: &BinaryMask) -> Result<(usize, usize)> {
    same_dims(a, b)?;
    let (mut inter, mut uni) = (0, 0);
    for (x, y) in a.to_bits().into_iter().zip(b.to_bits()) {
        inter += (x && y) as usize;
        uni += (x || y) as usize;
    }
    Ok((inter, uni))
}

/// Number of pixels set in both masks.
pub fn intersection_area(a: &BinaryMask, b: &BinaryMask) -> Result<usize> {
    overlap_counts(a, b).map(|(i, _)| i)
}

/// Intersection over union; two empty masks give 0.
pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, uni) = overlap_counts(a, b)?;
    Ok(if uni == 0 { 0.0 } else { inter as f64 / uni as f64 })
}

/// Fraction of `new_mask` covered by `tracked_mask`.
pub fn asym_overlap(new_mask: &BinaryMask, tracked_mask: &BinaryMask) -> Result<f64> {
    let (inter, _) = overlap_counts(new_mask, tracked_mask)?;
    let a = area(new_mask);
    if a == 0 {
        return Err(Error::EmptyMask("asymmetric overlap of an empty mask"));
    }
    Ok(inter as f64 / a as f64)
}

/// Average-pool the mask over square `cell`-pixel footprints. Dimensions that
/// are not a multiple of `cell` are zero-padded on the right and bottom.
pub fn pooled_coverage(m: &BinaryMask, cell: usize) -> Result<CoverageGrid> {
    if cell == 0 {
        return Err(Error::InvalidParam("pooling cell must be positive".into()));
    }
    let (w, h) = m.dims();
    let rows = h.div_ceil(cell);
    let cols = w.div_ceil(cell);
    let mut counts = vec![0u32; rows * cols];
    for (i, b) in m.to_bits().into_iter().enumerate() {
        if b {
            let (x, y) = (i % w, i / w);
            counts[(y / cell) * cols + x / cell] += 1;
        }
    }
    let denom = (cell * cell) as f64;
    Ok(CoverageGrid {
        rows,
        cols,
        values: counts.into_iter().map(|c| c as f64 / denom).collect(),
    })
}

/// Tight bounding box `(x1, y1, x2, y2)` over set pixels, inclusive.
pub fn bbox_of(m: &BinaryMask) -> Option<(usize, usize, usize, usize)> {
    let w = m.width();
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    for (i, b) in m.to_bits().into_iter().enumerate() {
        if !b {
            continue;
        }
        let (x, y) = (i % w, i / w);
        bbox = Some(match bbox {
            None => (x, y, x, y),
            Some((x1, y1, x2, y2)) => (x1.min(x), y1.min(y), x2.max(x), y2.max(y)),
        });
    }
    bbox
}

// Square-window morphology. Windows are clipped to the frame, so the border
// neither erodes nor dilates anything by itself.
fn window_op(bits: &[bool], w: usize, h: usize, radius: usize, want: bool) -> Vec<bool> {
    let mut out = vec![!want; w * h];
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
            let hit = (y0..=y1).any(|yy| (x0..=x1).any(|xx| bits[yy * w + xx] == want));
            out[y * w + x] = if hit { want } else { !want };
        }
    }
    out
}

fn dilate_bits(bits: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    window_op(bits, w, h, radius, true)
}

fn erode_bits(bits: &[bool], w: usize, h: usize, radius: usize) -> Vec<bool> {
    window_op(bits, w, h, radius, false)
}

pub fn dilate(m: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_bits(&dilate_bits(&m.to_bits(), w, h, radius), w, h).expect("dims already valid")
}

pub fn erode(m: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = m.dims();
    BinaryMask::from_bits(&erode_bits(&m.to_bits(), w, h, radius), w, h).expect("dims already valid")
}

/// 4-connected components as lists of pixel indices, in raster order of their
/// first pixel.
pub fn connected_components(m: &BinaryMask) -> Vec<Vec<usize>> {
    let (w, h) = m.dims();
    let bits = m.to_bits();
    let mut seen = vec![false; w * h];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !bits[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        comps.push(comp);
    }
    comps
}

/// Open, then close, with a `(2r+1)²` square; then drop 4-connected
/// components smaller than `min_area`.
pub fn morph_cleanup(m: &BinaryMask, min_area: usize, radius: usize) -> BinaryMask {
    let (w, h) = m.dims();
    let mut bits = m.to_bits();
    if radius > 0 {
        bits = dilate_bits(&erode_bits(&bits, w, h, radius), w, h, radius);
        bits = erode_bits(&dilate_bits(&bits, w, h, radius), w, h, radius);
    }
    let cleaned = BinaryMask::from_bits(&bits, w, h).expect("dims already valid");
    if min_area <= 1 {
        return cleaned;
    }
    let mut keep = vec![false; w * h];
    for comp in connected_components(&cleaned) {
        if comp.len() >= min_area {
            for i in comp {
                keep[i] = true;
            }
        }
    }
    BinaryMask::from_bits(&keep, w, h).expect("dims already valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1).unwrap()
    }

    #[test]
    fn areas() {
        assert_eq!(area(&BinaryMask::empty(4, 4).unwrap()), 0);
        assert_eq!(area(&BinaryMask::full(4, 4).unwrap()), 16);
    }

    #[test]
    fn union_identities() {
        let m = rect(6, 5, 1, 1, 3, 2);
        assert_eq!(union(&[m.clone()]).unwrap().unwrap(), m);
        assert_eq!(
            union(&[m.clone(), complement(&m)]).unwrap().unwrap(),
            BinaryMask::full(6, 5).unwrap()
        );
        assert_eq!(union_or_empty(&[], 6, 5).unwrap(), BinaryMask::empty(6, 5).unwrap());
    }

    #[test]
    fn union_rejects_mixed_dims() {
        let a = BinaryMask::empty(4, 4).unwrap();
        let b = BinaryMask::empty(4, 5).unwrap();
        assert!(matches!(union(&[a, b]), Err(Error::InvalidDimensions(_))));
    }

    #[test]
    fn intersect_identities() {
        let a = rect(6, 6, 0, 0, 2, 2);
        let b = rect(6, 6, 3, 3, 5, 5);
        assert_eq!(intersect(&a, &a).unwrap(), a);
        assert!(intersect(&a, &b).unwrap().is_empty());
    }

    #[test]
    fn iou_cases() {
        let a = rect(4, 4, 0, 0, 1, 1);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &rect(4, 4, 2, 2, 3, 3)).unwrap(), 0.0);
        let e = BinaryMask::empty(4, 4).unwrap();
        assert_eq!(iou(&e, &e).unwrap(), 0.0);
        // one shared pixel, three in the union
        let p = BinaryMask::from_bits(&[true, true, false, false], 2, 2).unwrap();
        let q = BinaryMask::from_bits(&[true, false, true, false], 2, 2).unwrap();
        assert!((iou(&p, &q).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn asym_overlap_cases() {
        let big = rect(8, 8, 0, 0, 7, 7);
        let small = rect(8, 8, 2, 2, 3, 3);
        assert_eq!(asym_overlap(&small, &big).unwrap(), 1.0);
        assert_eq!(asym_overlap(&small, &rect(8, 8, 5, 5, 6, 6)).unwrap(), 0.0);
        // 8-px new mask, 4 covered
        let new = rect(8, 8, 0, 0, 3, 1);
        let tracked = rect(8, 8, 0, 0, 1, 1);
        assert_eq!(asym_overlap(&new, &tracked).unwrap(), 0.5);
        let e = BinaryMask::empty(8, 8).unwrap();
        assert!(matches!(asym_overlap(&e, &big), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn pooled_coverage_trivial() {
        let g = pooled_coverage(&BinaryMask::full(8, 8).unwrap(), 4).unwrap();
        assert_eq!((g.rows, g.cols), (2, 2));
        assert!(g.values.iter().all(|&v| v == 1.0));
        let g = pooled_coverage(&BinaryMask::empty(8, 8).unwrap(), 4).unwrap();
        assert!(g.values.iter().all(|&v| v == 0.0));
        assert!(matches!(
            pooled_coverage(&BinaryMask::empty(8, 8).unwrap(), 0),
            Err(Error::InvalidParam(_))
        ));
    }

    #[test]
    fn pooled_coverage_pads_border_cells() {
        let g = pooled_coverage(&BinaryMask::full(6, 5).unwrap(), 4).unwrap();
        assert_eq!((g.rows, g.cols), (2, 2));
        assert_eq!(g.values, vec![1.0, 8.0 / 16.0, 4.0 / 16.0, 2.0 / 16.0]);
    }

    #[test]
    fn bbox_cases() {
        let m = BinaryMask::from_fn(8, 8, |x, y| x == 3 && y == 5).unwrap();
        assert_eq!(bbox_of(&m), Some((3, 5, 3, 5)));
        assert_eq!(bbox_of(&BinaryMask::empty(8, 8).unwrap()), None);
    }

    #[test]
    fn speck_is_removed() {
        let m = BinaryMask::from_fn(20, 20, |x, y| x == 4 && y == 4).unwrap();
        assert!(morph_cleanup(&m, 200, 1).is_empty());
        assert!(morph_cleanup(&m, 200, 0).is_empty());
    }

    #[test]
    fn radius_zero_keeps_large_square() {
        let m = rect(20, 20, 2, 2, 17, 17);
        assert_eq!(morph_cleanup(&m, 200, 0), m);
        assert_eq!(morph_cleanup(&m, 0, 1), m);
    }

    #[test]
    fn closing_fills_pinhole() {
        let holed = BinaryMask::from_fn(7, 7, |x, y| !(x == 3 && y == 3)).unwrap();
        assert_eq!(morph_cleanup(&holed, 0, 1), BinaryMask::full(7, 7).unwrap());
    }

    #[test]
    fn components_use_four_connectivity() {
        // diagonal neighbours are separate components
        let m = BinaryMask::from_bits(&[true, false, false, true], 2, 2).unwrap();
        assert_eq!(connected_components(&m).len(), 2);
    }
}
