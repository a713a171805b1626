use crate::error::{invalid, Error, Result};
use crate::measures::Ensemble;

/// Largest ensemble size accepted for exact assignment in `d ≥ 2`.
pub const MAX_ASSIGNMENT_SIZE: usize = 512;

/// Wasserstein-2 distance between two equal-size empirical measures.
///
/// In one dimension the monotone (sorted) coupling is optimal. In higher
/// dimensions the optimal coupling between uniform measures of equal size is
/// a permutation, found by exact assignment on squared distances.
pub fn wasserstein2(a: &Ensemble, b: &Ensemble) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(invalid(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    if a.len() != b.len() {
        return Err(Error::Unsupported(format!(
            "ensembles of different sizes ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if a.dim() == 1 {
        let mut xs = a.as_flat().to_vec();
        let mut ys = b.as_flat().to_vec();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let sum: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - y) * (x - y)).sum();
        return Ok((sum / n as f64).sqrt());
    }
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(Error::Unsupported(format!(
            "exact assignment is limited to {MAX_ASSIGNMENT_SIZE} particles, got {n}"
        )));
    }
    let cost: Vec<f64> = a
        .particles()
        .flat_map(|p| {
            b.particles().map(move |q| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
        })
        .collect();
    let (_, total) = optimal_assignment(&cost, n);
    Ok((total.max(0.0) / n as f64).sqrt())
}

/// Minimum-cost perfect matching on an `n × n` row-major cost matrix via
/// shortest augmenting paths with potentials (`O(n³)`).
///
/// Returns `col_of_row` and the matched cost summed from the original
/// entries.
pub fn optimal_assignment(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n × n");
    let c = |i: usize, j: usize| cost[(i - 1) * n + (j - 1)];
    // 1-based with column 0 as the virtual source
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    let total = col_of_row.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (col_of_row, total)
}
