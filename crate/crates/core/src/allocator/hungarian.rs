use crate::error::{Error, Result};

/// A matching between rows and columns of a weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// `(row, col)` pairs sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

/// Maximum-weight matching of a `rows × cols` matrix of nonnegative weights
/// given as row slices. Rectangular inputs are handled as if padded with
/// zero-weight dummy rows or columns; dummy pairs never appear in the result.
///
/// Shortest augmenting path with vertex potentials, `O(n² m)`. Ties are
/// broken towards the lowest column index.
pub fn hungarian_max_weight(weights: &[Vec<f64>]) -> Result<MatchResult> {
    let rows = weights.len();
    if rows == 0 {
        return Ok(MatchResult {
            pairs: Vec::new(),
            total_weight: 0.0,
        });
    }
    let cols = weights[0].len();
    if weights.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidArgument("ragged weight matrix".into()));
    }
    if weights.iter().flatten().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if cols == 0 {
        return Ok(MatchResult {
            pairs: Vec::new(),
            total_weight: 0.0,
        });
    }

    // Solve with the smaller side as rows.
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        if transposed {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    // 1-based arrays; index 0 is the virtual root column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| if transposed { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) })
        .collect();
    pairs.sort_unstable();
    let total_weight = pairs.iter().map(|&(r, c)| weights[r][c]).sum();
    Ok(MatchResult { pairs, total_weight })
}
