//! Direct formula evaluation over a dense grid, sharing no code with the library.

pub type Grid = [Vec<Option<f64>>];

pub fn mean(grid: &Grid, u: usize) -> f64 {
    let vals: Vec<f64> = grid[u].iter().flatten().copied().collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

pub fn corated(grid: &Grid, a: usize, b: usize) -> Vec<usize> {
    (0..grid[a].len())
        .filter(|&i| grid[a][i].is_some() && grid[b][i].is_some())
        .collect()
}

pub fn union(grid: &Grid, a: usize, b: usize) -> usize {
    (0..grid[a].len())
        .filter(|&i| grid[a][i].is_some() || grid[b][i].is_some())
        .count()
}

pub fn pcc(grid: &Grid, a: usize, b: usize) -> f64 {
    let items = corated(grid, a, b);
    if items.len() < 2 {
        return 0.0;
    }
    let ma = mean(grid, a);
    let mb = mean(grid, b);
    let mut num = 0.0;
    let mut da2 = 0.0;
    let mut db2 = 0.0;
    for &i in &items {
        let da = grid[a][i].unwrap() - ma;
        let db = grid[b][i].unwrap() - mb;
        num += da * db;
        da2 += da * da;
        db2 += db * db;
    }
    if da2 == 0.0 || db2 == 0.0 {
        return 0.0;
    }
    num / (da2.sqrt() * db2.sqrt())
}

pub fn wpcc(grid: &Grid, a: usize, b: usize, t: usize) -> f64 {
    let n = corated(grid, a, b).len();
    if n < t {
        (n as f64 / t as f64) * pcc(grid, a, b)
    } else {
        pcc(grid, a, b)
    }
}

pub fn spcc(grid: &Grid, a: usize, b: usize) -> f64 {
    let n = corated(grid, a, b).len() as f64;
    1.0 / (1.0 + (-n / 2.0).exp()) * pcc(grid, a, b)
}

pub fn jaccard(grid: &Grid, a: usize, b: usize) -> f64 {
    let u = union(grid, a, b);
    if u == 0 {
        0.0
    } else {
        corated(grid, a, b).len() as f64 / u as f64
    }
}

/// Branch-by-branch multi-level score from a PCC value and co-rated count.
pub fn multilevel_branch(s: f64, n: usize, t: [usize; 4], x: [f64; 4], y: f64) -> f64 {
    if n >= t[0] && s >= y {
        s + x[0]
    } else if n < t[0] && n >= t[1] && s >= y {
        s + x[1]
    } else if n < t[1] && n >= t[2] && s >= y {
        s + x[2]
    } else if n < t[2] && n >= t[3] && s >= y {
        s + x[3]
    } else {
        0.0
    }
}

pub fn multilevel(grid: &Grid, a: usize, b: usize, t: [usize; 4], x: [f64; 4], y: f64) -> f64 {
    multilevel_branch(pcc(grid, a, b), corated(grid, a, b).len(), t, x, y)
}

pub fn hybrid(grid: &Grid, a: usize, b: usize, t: [usize; 4], x: [f64; 4], y: f64) -> f64 {
    let s = pcc(grid, a, b);
    let n = corated(grid, a, b).len();
    if n >= t[3] && s >= y {
        multilevel_branch(s, n, t, x, y)
    } else {
        s
    }
}

/// Mean-centred prediction over the given neighbours, clamped to `[lo, hi]`.
pub fn predict(grid: &Grid, target: usize, hood: &[(usize, f64)], item: usize, lo: f64, hi: f64) -> (f64, bool) {
    let mut num = 0.0;
    let mut den = 0.0;
    for &(n, s) in hood {
        if let Some(r) = grid[n][item] {
            num += s * (r - mean(grid, n));
            den += s.abs();
        }
    }
    let raw = if den > 0.0 { mean(grid, target) + num / den } else { mean(grid, target) };
    (raw.max(lo).min(hi), den == 0.0)
}
