//! Optimal assignment (Hungarian algorithm, O(n³)) on dense weight matrices.

/// Returns, for each row, the column assigned to it so that the total weight
/// is maximal. Rectangular input is padded with zero-weight dummies; rows
/// matched to a dummy column get `None`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let max_w = weights
        .iter()
        .flatten()
        .copied()
        .fold(0.0_f64, f64::max);
    // Minimisation form on a square matrix: cost = max_w - weight, dummies cost max_w.
    let cost = |i: usize, j: usize| -> f64 {
        let w = weights.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
        max_w - w
    };

    // Potentials u (rows) and v (cols), 1-indexed with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
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
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = col_owner[j];
        if i >= 1 && i <= rows && j <= weights[i - 1].len() {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total(w: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(i, j)| j.map(|j| w[i][j])).sum()
    }

    #[test]
    fn square() {
        let w = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0], vec![3.0, 6.0, 9.0]];
        let a = max_weight_assignment(&w);
        assert_eq!(total(&w, &a), 14.0);
    }

    #[test]
    fn rectangular() {
        let wide = vec![vec![0.1, 0.9, 0.3]];
        assert_eq!(max_weight_assignment(&wide), [Some(1)]);
        let tall = vec![vec![0.2], vec![0.8], vec![0.5]];
        let a = max_weight_assignment(&tall);
        assert_eq!(a.iter().filter(|x| x.is_some()).count(), 1);
        assert_eq!(a[1], Some(0));
    }

    #[test]
    fn empty() {
        assert!(max_weight_assignment(&[]).is_empty());
    }
}
