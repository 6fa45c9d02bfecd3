//! Maximum-weight one-to-one matching between predicted clusters and truth classes.

use super::seg::ContingencyMatrix;

/// Predicted cluster → truth class. `None` means the cluster scores as an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mapping(Vec<Option<usize>>);

impl Mapping {
    pub fn new(pred_to_truth: Vec<Option<usize>>) -> Self {
        Self(pred_to_truth)
    }

    /// Identity on `n` clusters.
    pub fn identity(n: usize) -> Self {
        Self((0..n).map(Some).collect())
    }

    pub fn get(&self, pred: usize) -> Option<usize> {
        self.0.get(pred).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.0
    }

    /// Matched pairs in predicted order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(p, g)| g.map(|g| (p, g)))
            .collect()
    }
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting path
/// with potentials, `O(n³)`). Returns the column of each row.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
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
            for j in 0..=n {
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
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Best total weight of a matching between the given rows and columns.
fn best_value(weights: &[Vec<i64>], rows: &[usize], cols: &[usize]) -> i64 {
    let n = rows.len().max(cols.len());
    if rows.is_empty() || cols.is_empty() {
        return 0;
    }
    let top = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| weights[r][c]))
        .max()
        .unwrap_or(0);
    // padded cells have weight 0
    let cost: Vec<Vec<i64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (rows.get(i), cols.get(j)) {
                    (Some(&r), Some(&c)) => top - weights[r][c],
                    _ => top,
                })
                .collect()
        })
        .collect();
    min_cost_assignment(&cost)
        .iter()
        .enumerate()
        .map(|(i, &j)| match (rows.get(i), cols.get(j)) {
            (Some(&r), Some(&c)) => weights[r][c],
            _ => 0,
        })
        .sum()
}

/// Maximum-weight matching that fully matches the smaller side.
///
/// Among optimal matchings the one whose pair list, sorted by predicted id, is
/// lexicographically smallest is returned, so ties go to the lowest
/// `(pred, truth)` pairs.
pub fn hungarian(counts: &ContingencyMatrix) -> Mapping {
    let (n_pred, n_truth) = (counts.n_pred(), counts.n_truth());
    let weights: Vec<Vec<i64>> = (0..n_pred)
        .map(|p| (0..n_truth).map(|g| counts.get(p, g) as i64).collect())
        .collect();
    let all_rows: Vec<usize> = (0..n_pred).collect();
    let mut cols: Vec<usize> = (0..n_truth).collect();
    let total = best_value(&weights, &all_rows, &cols);
    let target = n_pred.min(n_truth);

    let mut mapping = vec![None; n_pred];
    let mut fixed = 0i64;
    let mut matched = 0usize;
    for p in 0..n_pred {
        let rows_left: Vec<usize> = (p + 1..n_pred).collect();
        let need = target - matched;
        let mut chosen = None;
        for (idx, &g) in cols.iter().enumerate() {
            let mut rest = cols.clone();
            rest.remove(idx);
            if 1 + rows_left.len().min(rest.len()) < need {
                continue;
            }
            if fixed + weights[p][g] + best_value(&weights, &rows_left, &rest) == total {
                chosen = Some((idx, g));
                break;
            }
        }
        if let Some((idx, g)) = chosen {
            mapping[p] = Some(g);
            fixed += weights[p][g];
            matched += 1;
            cols.remove(idx);
        }
        if matched == target {
            break;
        }
    }
    Mapping(mapping)
}
