//! Dense min-cost perfect assignment (Hungarian method with potentials).

/// Minimum-cost assignment of rows to columns of an `m × m` matrix in
/// row-major order. `None` entries are forbidden. Returns the cost and the
/// column assigned to each row, or `None` when no perfect assignment avoids
/// the forbidden entries.
pub fn min_cost_assignment(cost: &[Option<f64>], m: usize) -> Option<(f64, Vec<usize>)> {
    assert_eq!(cost.len(), m * m, "cost matrix must be square");
    if m == 0 {
        return Some((0.0, Vec::new()));
    }
    let max_abs = cost.iter().flatten().fold(0.0f64, |a, &c| a.max(c.abs()));
    // large enough that any assignment using a forbidden cell costs more
    // than every allowed one
    let forbidden = (max_abs + 1.0) * (m as f64 + 1.0) * 4.0;
    let at = |i: usize, j: usize| cost[i * m + j].unwrap_or(forbidden);

    // 1-based arrays, column 0 is a sentinel
    let mut u = vec![0.0f64; m + 1];
    let mut w = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=m {
        owner[0] = row;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - w[j];
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
                    w[j] -= delta;
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
    let mut col_of = vec![0usize; m];
    for j in 1..=m {
        col_of[owner[j] - 1] = j - 1;
    }
    let mut total = 0.0;
    for (i, &j) in col_of.iter().enumerate() {
        total += cost[i * m + j]?;
    }
    Some((total, col_of))
}
