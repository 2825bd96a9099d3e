//! Chance-corrected agreement between two raters.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Cohen's kappa over paired categorical labels. When chance agreement is
/// total, kappa is 1 for perfect observed agreement and 0 otherwise.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "rater sequences differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("kappa needs at least one paired label".into()));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;

    let mut marginals: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    for x in a {
        marginals.entry(x).or_default().0 += 1;
    }
    for y in b {
        marginals.entry(y).or_default().1 += 1;
    }
    let p_e: f64 = marginals
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(if p_o == 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_raters() {
        assert_eq!(cohens_kappa(&["x", "y", "x"], &["x", "y", "x"]).unwrap(), 1.0);
    }

    #[test]
    fn chance_level_agreement() {
        assert_eq!(cohens_kappa(&["x", "x", "y", "y"], &["x", "y", "x", "y"]).unwrap(), 0.0);
    }

    #[test]
    fn single_category() {
        assert_eq!(cohens_kappa(&[1, 1], &[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_partial() {
        // p_o = 3/4; marginals a: x 3 y 1, b: x 2 y 2; p_e = 3/8 + 1/8 = 1/2
        let k = cohens_kappa(&["x", "x", "x", "y"], &["x", "x", "y", "y"]).unwrap();
        assert!((k - 0.5).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert!(matches!(cohens_kappa(&[1], &[1, 2]), Err(Error::InvalidInput(_))));
        assert!(cohens_kappa::<u8>(&[], &[]).is_err());
    }
}
