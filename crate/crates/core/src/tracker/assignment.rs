//! Linear assignment (Hungarian / shortest augmenting path) with a
//! lexicographic tie-break among optimal solutions.

/// Dense row-major cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    /// Sum of the assigned entries, accumulated in pair order.
    pub fn total(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// Minimum-cost assignment of size `min(rows, cols)`, returned as
/// `(row, col)` pairs sorted by row. Among equal-cost optima the
/// lexicographically smallest pair list is returned.
///
/// Panics if any entry is not finite.
pub fn hungarian(cost: &CostMatrix) -> Vec<(usize, usize)> {
    assert!(
        cost.data.iter().all(|v| v.is_finite()),
        "cost matrix entries must be finite"
    );
    let (n, m) = (cost.rows, cost.cols);
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let k = n.max(m);
    // zero-cost dummy rows/columns make the problem square
    let square = |r: usize, c: usize| if r < n && c < m { cost.get(r, c) } else { 0.0 };
    let max_abs = cost.data.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let eps = 1e-12 * max_abs * k as f64;

    let all_rows: Vec<usize> = (0..k).collect();
    let all_cols: Vec<usize> = (0..k).collect();
    let (mut assign, optimum) = solve_subset(&square, &all_rows, &all_cols);

    let mut used = vec![false; k];
    let mut fixed_cost = 0.0;
    for row in 0..n {
        let current = assign[row];
        let candidates: Vec<usize> = (0..m)
            .filter(|&c| !used[c] && (current >= m || c < current))
            .collect();
        for c in candidates {
            let rest_rows: Vec<usize> = (row + 1..k).collect();
            let rest_cols: Vec<usize> = (0..k).filter(|&j| !used[j] && j != c).collect();
            let (rest, rest_cost) = solve_subset(&square, &rest_rows, &rest_cols);
            if fixed_cost + square(row, c) + rest_cost <= optimum + eps {
                assign[row] = c;
                for (i, &r) in rest_rows.iter().enumerate() {
                    assign[r] = rest[i];
                }
                break;
            }
        }
        used[assign[row]] = true;
        fixed_cost += square(row, assign[row]);
    }

    (0..n)
        .filter(|&r| assign[r] < m)
        .map(|r| (r, assign[r]))
        .collect()
}

/// Optimal assignment of `rows` onto `cols` (equal lengths) in the square
/// problem; returns the column for each listed row, by position in `rows`
/// for sub-problems and by row index when `rows` is `0..k`.
fn solve_subset<F: Fn(usize, usize) -> f64>(
    square: &F,
    rows: &[usize],
    cols: &[usize],
) -> (Vec<usize>, f64) {
    let size = rows.len();
    debug_assert_eq!(size, cols.len());
    if size == 0 {
        return (Vec::new(), 0.0);
    }
    let local = solve_square(size, |i, j| square(rows[i], cols[j]));
    let assigned: Vec<usize> = local.iter().map(|&j| cols[j]).collect();
    let total = rows
        .iter()
        .zip(&assigned)
        .map(|(&r, &c)| square(r, c))
        .sum();
    (assigned, total)
}

/// O(n³) shortest augmenting path with row/column potentials. Returns the
/// column assigned to each row.
fn solve_square<F: Fn(usize, usize) -> f64>(n: usize, a: F) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    // index 0 is the virtual source; rows and columns are 1-based below
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert_ne!(j1, NONE);
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
    let mut out = vec![0; n];
    for j in 1..=n {
        out[row_of_col[j] - 1] = j - 1;
    }
    out
}
