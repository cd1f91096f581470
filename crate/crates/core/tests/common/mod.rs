#![allow(clippy::needless_range_loop)]

//! Reference solvers that share no code with the library.

#![allow(dead_code)]

use relaynav::{Position, Scenario};

const EPS: f64 = 1e-11;

/// Dense tableau simplex for `max c.x` s.t. `A x <= b`, `x >= 0`, with
/// `b >= 0` so the slack basis is feasible. Bland's rule, no cycling.
pub fn simplex_max(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let m = a.len();
    let n = c.len();
    let w = n + m + 1;
    let mut tab = vec![vec![0.0; w]; m + 1];
    for i in 0..m {
        assert!(b[i] >= 0.0);
        tab[i][..n].copy_from_slice(&a[i]);
        tab[i][n + i] = 1.0;
        tab[i][w - 1] = b[i];
    }
    for j in 0..n {
        tab[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    while let Some(col) = (0..n + m).find(|&j| tab[m][j] < -EPS) {
        let mut row = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[i][col] > EPS {
                let ratio = tab[i][w - 1] / tab[i][col];
                let better = match row {
                    None => true,
                    Some(r) => ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r]),
                };
                if better {
                    best = ratio;
                    row = Some(i);
                }
            }
        }
        let r = row.expect("bounded LP");
        let piv = tab[r][col];
        for v in tab[r].iter_mut() {
            *v /= piv;
        }
        for i in 0..=m {
            if i != r && tab[i][col] != 0.0 {
                let f = tab[i][col];
                for j in 0..w {
                    tab[i][j] -= f * tab[r][j];
                }
            }
        }
        basis[r] = col;
    }
    tab[m][w - 1]
}

pub fn cap(p: Position, q: Position) -> f64 {
    let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
    (-d2).exp()
}

/// Optimal utility of the flow LP, assembled row by row from the model
/// definition for `d0 = 1`, `D = 2` and all-to-all commodities.
pub fn brute_force_phi(s: &Scenario, w: &[f64]) -> f64 {
    let pos: Vec<Position> = s.positions().collect();
    let n = pos.len();
    let k = s.num_task();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut nv = 0;
    let mut r = vec![vec![vec![usize::MAX; k]; n]; n];
    for &(i, j) in &pairs {
        for c in 0..k {
            r[i][j][c] = nv;
            nv += 1;
        }
    }
    let mut a = vec![vec![usize::MAX; k]; k];
    for c in 0..k {
        for src in (0..k).filter(|&x| x != c) {
            a[c][src] = nv;
            nv += 1;
        }
    }
    let t: Vec<usize> = (0..k).map(|c| nv + c).collect();
    nv += k;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut push = |coef: Vec<(usize, f64)>, b: f64| {
        let mut row = vec![0.0; nv];
        for (v, x) in coef {
            row[v] += x;
        }
        rows.push(row);
        rhs.push(b);
    };
    for c in 0..k {
        for src in (0..k).filter(|&x| x != c) {
            push(vec![(t[c], 1.0), (a[c][src], -1.0)], 0.0);
            let mut coef = vec![(a[c][src], 1.0)];
            for j in (0..n).filter(|&j| j != src) {
                coef.push((r[src][j][c], -1.0));
                coef.push((r[j][src][c], 1.0));
            }
            push(coef, 0.0);
        }
        for m in k..n {
            let mut coef = Vec::new();
            for j in (0..n).filter(|&j| j != m) {
                coef.push((r[m][j][c], 1.0));
                coef.push((r[j][m][c], -1.0));
            }
            let neg = coef.iter().map(|&(v, x)| (v, -x)).collect();
            push(coef, 0.0);
            push(neg, 0.0);
        }
    }
    for &(i, j) in &pairs {
        push(
            (0..k).map(|c| (r[i][j][c], 1.0)).collect(),
            cap(pos[i], pos[j]),
        );
        for c in 0..k {
            push(vec![(r[i][j][c], 1.0)], 1.0);
        }
    }
    let mut obj = vec![0.0; nv];
    for c in 0..k {
        obj[t[c]] = w[c];
    }
    simplex_max(&rows, &rhs, &obj)
}

/// Edmonds-Karp on a dense capacity matrix.
pub fn max_flow(cap: &[Vec<f64>], s: usize, t: usize) -> f64 {
    let n = cap.len();
    let mut res: Vec<Vec<f64>> = cap.to_vec();
    let mut total = 0.0;
    loop {
        let mut prev = vec![usize::MAX; n];
        prev[s] = s;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if prev[v] == usize::MAX && res[u][v] > 1e-15 {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if prev[t] == usize::MAX {
            return total;
        }
        let mut push = f64::INFINITY;
        let mut v = t;
        while v != s {
            push = push.min(res[prev[v]][v]);
            v = prev[v];
        }
        let mut v = t;
        while v != s {
            res[prev[v]][v] -= push;
            res[v][prev[v]] += push;
            v = prev[v];
        }
        total += push;
    }
}

pub fn capacity_matrix(s: &Scenario) -> Vec<Vec<f64>> {
    let pos: Vec<Position> = s.positions().collect();
    let n = pos.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 0.0 } else { cap(pos[i], pos[j]) })
                .collect()
        })
        .collect()
}
