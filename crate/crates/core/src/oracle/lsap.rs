//! Exact linear sum assignment over integer weights.

use num_traits::{PrimInt, Signed};

/// Maximum-weight assignment of every row to a distinct column
/// (`rows <= cols`), via shortest augmenting paths with dual potentials,
/// `O(rows^2 * cols)`. Returns the column of each row.
///
/// Weights must stay well below `T::max_value() / 4` in magnitude.
pub fn max_weight_assignment<T: PrimInt + Signed>(weights: &[Vec<T>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let m = weights[0].len();
    assert!(weights.iter().all(|r| r.len() == m), "ragged weight matrix");
    assert!(n <= m, "more rows ({n}) than columns ({m})");

    let inf = T::max_value() / (T::one() + T::one() + T::one() + T::one());
    // 1-based rows/cols; column 0 is the virtual root of each search
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
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
                    u[row_of[j]] = u[row_of[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of = vec![0usize; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Like [`max_weight_assignment`], but among optimal assignments returns the
/// lexicographically smallest column vector. Ties are resolved by scaling
/// weights by `cols^rows` and subtracting the assignment's base-`cols`
/// rank; returns `None` if that perturbation would overflow `T`.
pub fn max_weight_assignment_lex<T: PrimInt + Signed>(weights: &[Vec<T>]) -> Option<Vec<usize>> {
    let n = weights.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let m = weights[0].len();
    let base = T::from(m)?;
    let scale = (0..n).try_fold(T::one(), |acc, _| acc.checked_mul(&base))?;
    let mut perturbed = Vec::with_capacity(n);
    for (i, row) in weights.iter().enumerate() {
        let place = (0..n - 1 - i).try_fold(T::one(), |acc, _| acc.checked_mul(&base))?;
        let r = row
            .iter()
            .enumerate()
            .map(|(j, &w)| w.checked_mul(&scale)?.checked_sub(&T::from(j)?.checked_mul(&place)?))
            .collect::<Option<Vec<T>>>()?;
        perturbed.push(r);
    }
    let limit = T::max_value() / T::from(16)?;
    let peak = perturbed.iter().flatten().map(|x| x.abs()).max().unwrap_or(T::zero());
    if peak > limit / T::from(n.max(1))? {
        return None;
    }
    Some(max_weight_assignment(&perturbed))
}
