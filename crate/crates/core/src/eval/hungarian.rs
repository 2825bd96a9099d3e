//! Maximum-weight rectangular assignment (Kuhn–Munkres with potentials).

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs.iter().find(|(r, _)| *r == row).map(|&(_, c)| c)
    }
}

/// Minimum-cost assignment of every row to a distinct column; needs
/// `rows <= cols`. Returns the column of each row.
fn min_cost_rows(cost: &[Vec<f64>], n: usize, m: usize) -> Vec<usize> {
    // 1-based with a virtual column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            col_of_row[owner[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// One-to-one assignment of rows to columns maximizing the summed score.
/// With `n != m`, `min(n, m)` pairs are returned and the rest stay unmatched.
pub fn hungarian_match(scores: &[Vec<f64>]) -> Result<Assignment> {
    let n = scores.len();
    let m = scores.first().map_or(0, Vec::len);
    if scores.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidInput("score matrix rows differ in length".into()));
    }
    if scores.iter().flatten().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("score matrix has non-finite entries".into()));
    }
    if n == 0 || m == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            total: 0.0,
        });
    }
    let transpose = n > m;
    let (rows, cols) = if transpose { (m, n) } else { (n, m) };
    let cost: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            (0..cols)
                .map(|c| -(if transpose { scores[c][r] } else { scores[r][c] }))
                .collect()
        })
        .collect();
    let assigned = min_cost_rows(&cost, rows, cols);
    let mut pairs: Vec<(usize, usize)> = assigned
        .into_iter()
        .enumerate()
        .map(|(r, c)| if transpose { (c, r) } else { (r, c) })
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(r, c)| scores[r][c]).sum();
    Ok(Assignment { pairs, total })
}
