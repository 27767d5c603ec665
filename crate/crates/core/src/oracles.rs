//! Independent brute-force reference implementations ("oracles"). These share
//! no code with their production counterparts; the derive run freezes their
//! outputs into `data/derived_constants.json` and the test suite checks the
//! production code against them.

use crate::chain::{FiniteChain, StateFunction};
use crate::graph_space::BipMultiGraph;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

/// Counts n x n matrices with all line sums d and entries <= max_mult by a
/// transfer-style recursion over rows: columns are grouped by remaining
/// budget, so the memo key is the multiset of budgets, not the full vector.
pub fn count_line_sum_matrices(n: usize, d: usize, max_mult: usize) -> u64 {
    let mut memo: HashMap<(usize, Vec<u16>), u128> = HashMap::new();
    // cnt[b] = number of columns with remaining budget b.
    let mut cnt = vec![0u16; d + 1];
    cnt[d] = n as u16;
    let total = count_rows(n, d, max_mult, &cnt, &mut memo);
    u64::try_from(total).expect("count fits in u64 at oracle scale")
}

fn count_rows(
    rows_left: usize,
    d: usize,
    max_mult: usize,
    cnt: &[u16],
    memo: &mut HashMap<(usize, Vec<u16>), u128>,
) -> u128 {
    if rows_left == 0 {
        return if cnt.iter().skip(1).all(|&c| c == 0) { 1 } else { 0 };
    }
    let key = (rows_left, cnt.to_vec());
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let mut acc = 0u128;
    let mut new_cnt = cnt.to_vec();
    fill_row(d, max_mult, d, cnt, &mut new_cnt, 1, &mut |ways, next| {
        acc += ways * count_rows(rows_left - 1, d, max_mult, next, memo);
    });
    memo.insert(key, acc);
    acc
}

/// Distributes `units` row entries over the budget classes `b >= class_b`,
/// calling back with the multiplicity-weighted way count and the resulting
/// budget multiset. `class_b` scans d..=1; class 0 columns take entry 0.
fn fill_row(
    class_b: usize,
    max_mult: usize,
    units: usize,
    cnt: &[u16],
    new_cnt: &mut Vec<u16>,
    ways: u128,
    emit: &mut dyn FnMut(u128, &[u16]),
) {
    if class_b == 0 {
        if units == 0 {
            emit(ways, new_cnt);
        }
        return;
    }
    let c = cnt[class_b] as usize;
    // Choose entry values for the c identical columns of this class.
    distribute(c, class_b.min(max_mult), units, &mut vec![0usize; 0], &mut |m, used| {
        // m[e] columns of this class receive entry e.
        let w = ways * multiset_ways(c, m);
        let mut next = new_cnt.clone();
        for (e, &me) in m.iter().enumerate() {
            if me > 0 {
                next[class_b] -= me as u16;
                next[class_b - e] += me as u16;
            }
        }
        fill_row(class_b - 1, max_mult, units - used, cnt, &mut next, w, emit);
    });
}

/// Enumerates (m_0..m_emax) with sum m = c and sum e*m_e <= units.
fn distribute(
    c: usize,
    emax: usize,
    units: usize,
    prefix: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[usize], usize),
) {
    fn rec(
        e: usize,
        emax: usize,
        cols_left: usize,
        units_left: usize,
        prefix: &mut Vec<usize>,
        emit: &mut dyn FnMut(&[usize], usize),
    ) {
        if e > emax {
            if cols_left == 0 {
                let used: usize = prefix.iter().enumerate().map(|(i, &m)| i * m).sum();
                emit(prefix, used);
            }
            return;
        }
        let cap = if e == 0 { cols_left } else { (units_left / e).min(cols_left) };
        for m in 0..=cap {
            prefix.push(m);
            rec(e + 1, emax, cols_left - m, units_left - e * m, prefix, emit);
            prefix.pop();
        }
    }
    rec(0, emax, c, units, prefix, emit);
}

/// Multinomial coefficient: ways to assign entries to identical columns.
fn multiset_ways(c: usize, m: &[usize]) -> u128 {
    let mut left = c;
    let mut acc: u128 = 1;
    for &me in m {
        acc *= binomial(left, me);
        left -= me;
    }
    acc
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Entropy via the variational form inf_{t>0} E[f log f - f log t - f + t],
/// minimized by grid scan plus golden-section refinement.
pub fn entropy_inf_form<F: Scalar>(chain: &FiniteChain, f: &StateFunction<F>, t_grid: &[f64]) -> f64 {
    let pi = chain.pi_f();
    let vals: Vec<f64> = f
        .values()
        .iter()
        .map(|v| v.to_f64().expect("scalar fits f64"))
        .collect();
    let phi = |t: f64| -> f64 {
        pi.iter()
            .zip(&vals)
            .map(|(&p, &v)| p * (v * v.ln() - v * t.ln() - v + t))
            .sum()
    };
    let mut grid: Vec<f64> = t_grid.iter().copied().filter(|t| *t > 0.0).collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(grid.len() >= 2, "t grid must bracket the mean");
    let best = (0..grid.len())
        .min_by(|&a, &b| phi(grid[a]).partial_cmp(&phi(grid[b])).unwrap())
        .unwrap();
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let g = (5.0_f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if phi(a) < phi(b) {
            hi = b;
        } else {
            lo = a;
        }
        if hi - lo < 1e-14 * hi.max(1.0) {
            break;
        }
    }
    phi(0.5 * (lo + hi))
}

/// Result of the telescoping worst-case search.
#[derive(Clone, Debug)]
pub struct TelescopeSearch {
    /// max over sequences of (lhs/rhs) / (1 + (T-1)^2 log r).
    pub max_normalized: f64,
    pub arg_t: usize,
    pub arg_r: f64,
    pub arg_seq: Vec<f64>,
}

/// Telescoping ratio (f_T - f_0) log(f_T/f_0) over the per-step sum, for an
/// admissible sequence (consecutive ratios within [1/r, r]).
pub fn telescope_factor(seq: &[f64]) -> Option<f64> {
    let t = seq.len() - 1;
    if t == 0 {
        return Some(1.0);
    }
    let lhs = (seq[t] - seq[0]) * (seq[t] / seq[0]).ln();
    let rhs: f64 = (1..=t)
        .map(|k| (seq[k] - seq[k - 1]) * (seq[k] / seq[k - 1]).ln())
        .sum();
    if rhs <= 0.0 {
        None
    } else {
        Some(lhs / rhs)
    }
}

/// Searches for the worst normalized telescoping factor over random
/// admissible sequences, geometric and two-level extremal shapes, and a
/// hill-climbing refinement of the best candidate per (T, r).
pub fn telescope_worst_case_search(t_max: usize, rs: &[f64], trials: usize, seed: u64) -> TelescopeSearch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = TelescopeSearch {
        max_normalized: 1.0,
        arg_t: 1,
        arg_r: rs.first().copied().unwrap_or(2.0),
        arg_seq: vec![1.0, 1.0],
    };
    for &r in rs {
        for t in 1..=t_max {
            let norm = 1.0 + ((t as f64 - 1.0).powi(2)) * r.ln();
            let consider = |seq: &[f64], best: &mut TelescopeSearch| {
                if let Some(f) = telescope_factor(seq) {
                    let nf = f / norm;
                    if nf > best.max_normalized {
                        best.max_normalized = nf;
                        best.arg_t = t;
                        best.arg_r = r;
                        best.arg_seq = seq.to_vec();
                    }
                }
            };
            // Extremal shapes.
            let geometric: Vec<f64> = (0..=t).map(|k| r.powi(k as i32)).collect();
            consider(&geometric, &mut best);
            let down_up: Vec<f64> = (0..=t)
                .map(|k| if k % 2 == 0 { 1.0 } else { r } as f64)
                .collect();
            consider(&down_up, &mut best);
            // Random admissible log-walks.
            let mut local_best: Vec<f64> = geometric.clone();
            let mut local_val = telescope_factor(&local_best).unwrap_or(0.0);
            for _ in 0..trials / (t_max * rs.len()).max(1) {
                let mut seq = vec![1.0];
                for _ in 0..t {
                    let step: f64 = rng.gen_range(-1.0..1.0) * r.ln();
                    seq.push(seq.last().unwrap() * step.exp());
                }
                consider(&seq, &mut best);
                if let Some(f) = telescope_factor(&seq) {
                    if f > local_val {
                        local_val = f;
                        local_best = seq;
                    }
                }
            }
            // Hill-climb the best local candidate in log space.
            let mut seq = local_best;
            let mut cur = telescope_factor(&seq).unwrap_or(0.0);
            let mut scale = 0.25;
            for _ in 0..400 {
                let k = 1 + rng.gen_range(0..t.max(1)) % t.max(1);
                let old = seq[k];
                let bump = (rng.gen_range(-1.0..1.0) * scale * r.ln()).exp();
                let cand = old * bump;
                // Keep consecutive ratios admissible.
                let lo = (seq[k - 1] / r).max(if k < t { seq[k + 1] / r } else { 0.0 });
                let hi = (seq[k - 1] * r).min(if k < t { seq[k + 1] * r } else { f64::INFINITY });
                let cand = cand.clamp(lo, hi);
                seq[k] = cand;
                match telescope_factor(&seq) {
                    Some(f) if f > cur => cur = f,
                    _ => seq[k] = old,
                }
                scale *= 0.995;
            }
            consider(&seq, &mut best);
        }
    }
    best
}

/// Brute-force switch-adjacency test from the multiplicity difference alone:
/// adjacent iff G2 - G1 has exactly four nonzero entries, values +-1, forming
/// a rectangle with -1 on one diagonal and +1 on the other.
pub fn adjacent_by_difference(g1: &BipMultiGraph, g2: &BipMultiGraph) -> bool {
    assert_eq!(g1.n(), g2.n());
    let n = g1.n();
    let mut minus = Vec::new();
    let mut plus = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let delta = g2.get(i, j) as i32 - g1.get(i, j) as i32;
            match delta {
                0 => {}
                -1 => minus.push((i, j)),
                1 => plus.push((i, j)),
                _ => return false,
            }
        }
    }
    if minus.len() != 2 || plus.len() != 2 {
        return false;
    }
    let (a, b) = (minus[0], minus[1]);
    let (c, e) = (plus[0], plus[1]);
    a.0 != b.0
        && a.1 != b.1
        && ((c == (a.0, b.1) && e == (b.0, a.1)) || (c == (b.0, a.1) && e == (a.0, b.1)))
}

/// Dense TV-to-stationarity curve oracle: for each grid time and each start,
/// evaluates e^{tQ} from scratch as a Poisson mixture of powers of the
/// uniformized kernel (independent of the production incremental evolution).
pub fn tv_curve_oracle(chain: &FiniteChain, times: &[f64]) -> Vec<f64> {
    let n = chain.n();
    let lambda = (0..n)
        .map(|i| chain.row_f(i).iter().map(|&(_, q)| q).sum::<f64>())
        .fold(0.0_f64, f64::max);
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let mut worst: f64 = 0.0;
        for start in 0..n {
            let mut mix = vec![0.0; n];
            let mut v = vec![0.0; n];
            v[start] = 1.0;
            if lambda == 0.0 || t == 0.0 {
                mix = v.clone();
            } else {
                let weights = crate::chain::poisson_weights(t * lambda);
                for (k, &w) in weights.iter().enumerate() {
                    if k > 0 {
                        // v <- v P with P = I + Q/lambda.
                        let mut next = vec![0.0; n];
                        for i in 0..n {
                            let mut off = 0.0;
                            for &(j, q) in chain.row_f(i) {
                                next[j as usize] += v[i] * q / lambda;
                                off += q / lambda;
                            }
                            next[i] += v[i] * (1.0 - off);
                        }
                        v = next;
                    }
                    for (m, &x) in mix.iter_mut().zip(&v) {
                        *m += w * x;
                    }
                }
            }
            let tv = 0.5
                * mix
                    .iter()
                    .zip(chain.pi_f())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            worst = worst.max(tv);
        }
        out.push(worst);
    }
    out
}

/// Brute-force perfect-pair checker working from raw multiplicity scans:
/// recovers the switching from the difference rectangle, then re-derives the
/// two separation bullets (switching vertices not incident to multiedges, nor
/// adjacent to multiedge-incident vertices) on both graphs. Returns None when
/// the graphs are not switch-adjacent or the category condition (same number
/// of non-incident doubles, k >= 1, no heavier multiedges) fails structurally.
pub fn perfect_pair_oracle(g1: &BipMultiGraph, g2: &BipMultiGraph) -> Option<bool> {
    if !adjacent_by_difference(g1, g2) {
        return None;
    }
    let n = g1.n();
    // Recover the switching rectangle: the two cells losing a unit.
    let mut minus = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if (g2.get(i, j) as i32 - g1.get(i, j) as i32) == -1 {
                minus.push((i, j));
            }
        }
    }
    let rows = [minus[0].0, minus[1].0];
    let cols = [minus[0].1, minus[1].1];

    let doubles_of = |g: &BipMultiGraph| -> Option<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                match g.get(i, j) {
                    0 | 1 => {}
                    2 => out.push((i, j)),
                    _ => return None,
                }
            }
        }
        for a in 0..out.len() {
            for b in a + 1..out.len() {
                if out[a].0 == out[b].0 || out[a].1 == out[b].1 {
                    return None;
                }
            }
        }
        Some(out)
    };
    let d1 = doubles_of(g1)?;
    let d2 = doubles_of(g2)?;
    if d1.is_empty() || d1.len() != d2.len() {
        return Some(false);
    }
    for g in [g1, g2] {
        let doubles = doubles_of(g).unwrap();
        for &(di, dj) in &doubles {
            if rows.contains(&di) || cols.contains(&dj) {
                return Some(false);
            }
        }
        // Second bullet: neighborhoods of the switching vertices must avoid
        // all multiedge-incident vertices.
        for &x in &rows {
            for y in 0..n {
                if g.get(x, y) >= 1 && doubles.iter().any(|&(_, dj)| dj == y) {
                    return Some(false);
                }
            }
        }
        for &y in &cols {
            for x in 0..n {
                if g.get(x, y) >= 1 && doubles.iter().any(|&(di, _)| di == x) {
                    return Some(false);
                }
            }
        }
    }
    Some(true)
}

/// Independent s-neighborhood membership test: a simple graph g belongs to
/// the s-neighborhood of gp iff some sequence of switchings, each destroying
/// one double of gp with fresh rows/columns per the simple-path rules,
/// reaches g. Tries every switching order (brute force, no sharing with the
/// production recursive enumerator).
pub fn sn_contains_oracle(gp: &BipMultiGraph, g: &BipMultiGraph) -> bool {
    if !g.is_simple() {
        return false;
    }
    let n = gp.n();
    let mut doubles = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if gp.get(i, j) == 2 {
                doubles.push((i, j));
            }
        }
    }
    if doubles.is_empty() {
        return gp == g;
    }
    // Work backwards from g is hard; go forward over all choice vectors.
    fn walk(
        cur: &BipMultiGraph,
        orig: &BipMultiGraph,
        doubles: &[(usize, usize)],
        step: usize,
        used_i: &mut Vec<usize>,
        used_j: &mut Vec<usize>,
        target: &BipMultiGraph,
    ) -> bool {
        if step == doubles.len() {
            return cur == target;
        }
        let n = cur.n();
        let (di, dj) = doubles[step];
        for i2 in 0..n {
            if doubles.iter().any(|&(a, _)| a == i2) || used_i.contains(&i2) {
                continue;
            }
            for j2 in 0..n {
                if doubles.iter().any(|&(_, b)| b == j2) || used_j.contains(&j2) {
                    continue;
                }
                if orig.get(i2, dj) != 0 || orig.get(di, j2) != 0 || orig.get(i2, j2) == 0 {
                    continue;
                }
                let (i, ii, j, jj) = if di < i2 { (di, i2, dj, j2) } else { (i2, di, j2, dj) };
                let s = crate::graph_space::Switching {
                    i: i as u8,
                    i2: ii as u8,
                    j: j as u8,
                    j2: jj as u8,
                };
                if !cur.can_apply(&s) {
                    continue;
                }
                let next = cur.apply_switching(&s);
                used_i.push(i2);
                used_j.push(j2);
                let hit = walk(&next, orig, doubles, step + 1, used_i, used_j, target);
                used_i.pop();
                used_j.pop();
                if hit {
                    return true;
                }
            }
        }
        false
    }
    walk(gp, gp, &doubles, 0, &mut Vec::new(), &mut Vec::new(), g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_chain, entropy};
    use crate::rat;

    #[test]
    fn tiny_counts() {
        assert_eq!(count_line_sum_matrices(2, 1, 1), 2);
        assert_eq!(count_line_sum_matrices(4, 2, 1), 90);
        assert_eq!(count_line_sum_matrices(5, 2, 1), 2040);
    }

    #[test]
    fn multigraph_counts_match_enumerator() {
        for n in [4, 5] {
            let by_oracle = count_line_sum_matrices(n, 2, 2);
            let by_enum = crate::graph_space::enumerate_multi(n, 2, 1_000_000)
                .unwrap()
                .len() as u64;
            assert_eq!(by_oracle, by_enum);
        }
    }

    #[test]
    fn inf_form_matches_entropy() {
        let c = build_chain(
            vec!["a".into(), "b".into()],
            vec![rat(1, 2), rat(1, 2)],
            vec![(0, 1, rat(1, 1)), (1, 0, rat(1, 1))],
        )
        .unwrap();
        let f = StateFunction::new(vec![0.3, 2.7]).unwrap();
        let grid: Vec<f64> = (1..100).map(|k| k as f64 * 0.05).collect();
        let by_inf = entropy_inf_form(&c, &f, &grid);
        let by_def = entropy(&c, &f).unwrap();
        assert!((by_inf - by_def).abs() < 1e-9, "{by_inf} vs {by_def}");
    }

    #[test]
    fn telescope_trivial_and_geometric() {
        assert_eq!(telescope_factor(&[1.0, 5.0]), Some(1.0));
        // Geometric 1, r, r^2, r^3: factor T = 3.
        let r: f64 = 2.0;
        let seq: Vec<f64> = (0..=3).map(|k| r.powi(k)).collect();
        let f = telescope_factor(&seq).unwrap();
        assert!((f - 3.0).abs() < 1e-12);
    }

    #[test]
    fn telescope_search_finds_at_least_geometric() {
        let s = telescope_worst_case_search(4, &[2.0], 2000, 42);
        // T=2 geometric normalized factor: 2 / (1 + ln 2).
        assert!(s.max_normalized >= 2.0 / (1.0 + 2.0_f64.ln()) - 1e-12);
        assert!(s.max_normalized < 3.0);
    }

    #[test]
    fn adjacency_difference_sanity() {
        let g = crate::graph_space::circulant(4, 2);
        for (_, g2) in g.neighbors_switch(false) {
            assert!(adjacent_by_difference(&g, &g2));
        }
        assert!(!adjacent_by_difference(&g, &g));
    }
}
