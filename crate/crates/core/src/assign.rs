//! Minimum-cost matching of small sets.

/// Upper bound on exhaustively enumerated injections before falling back to
/// greedy matching.
const EXHAUSTIVE_LIMIT: usize = 50_000;

fn injection_count(rows: usize, cols: usize) -> usize {
    (0..rows).fold(1usize, |acc, i| acc.saturating_mul(cols - i))
}

/// Injective map rows → columns minimising the summed cost. `cost[i][j]` is
/// the cost of pairing row i with column j; requires rows ≤ columns.
///
/// Exhaustive for small problems, greedy (cheapest remaining pair first)
/// beyond [`EXHAUSTIVE_LIMIT`] candidates. Ties resolve to the
/// lexicographically first assignment.
pub fn min_cost_injection(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(rows <= cols, "more rows ({rows}) than columns ({cols})");
    if injection_count(rows, cols) <= EXHAUSTIVE_LIMIT {
        exhaustive(cost, cols)
    } else {
        greedy(cost, cols)
    }
}

fn exhaustive(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    fn recurse(
        cost: &[Vec<f64>],
        row: usize,
        used: &mut [bool],
        current: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if row == cost.len() {
            if acc < best.0 {
                *best = (acc, current.clone());
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                current.push(j);
                recurse(cost, row + 1, used, current, acc + cost[row][j], best);
                current.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, (0..cost.len()).collect());
    recurse(
        cost,
        0,
        &mut vec![false; cols],
        &mut Vec::new(),
        0.0,
        &mut best,
    );
    best.1
}

fn greedy(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    let mut pairs: Vec<(usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .collect();
    pairs.sort_by(|a, b| cost[a.0][a.1].total_cmp(&cost[b.0][b.1]).then(a.cmp(b)));
    let mut out = vec![usize::MAX; rows];
    let mut col_used = vec![false; cols];
    for (i, j) in pairs {
        if out[i] == usize::MAX && !col_used[j] {
            out[i] = j;
            col_used[j] = true;
        }
    }
    out
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn recurse(n: usize, used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                recurse(n, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    recurse(n, &mut vec![false; n], &mut Vec::new(), &mut out);
    out
}
