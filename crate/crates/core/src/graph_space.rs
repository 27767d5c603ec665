//! Bipartite d-regular (multi)graph spaces: exhaustive enumeration, the
//! configuration-model measure, category partitioning and switchings.

use crate::Rat;
use num_bigint::BigInt;
use num_traits::One;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("state space larger than the configured cap ({0} > {1})")]
    SpaceTooLarge(u64, u64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Default enumeration cap (number of graphs).
pub const DEFAULT_CAP: u64 = 1_000_000;

/// An n x n nonnegative-integer biadjacency matrix with all line sums d.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BipMultiGraph {
    n: u8,
    d: u8,
    mult: Vec<u8>,
}

/// A switching <i,i',j,j'>: destroys one copy each of (i,j) and (i',j'),
/// creates (i,j') and (i',j). Canonical form has i < i' (and j != j').
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Switching {
    pub i: u8,
    pub i2: u8,
    pub j: u8,
    pub j2: u8,
}

impl Switching {
    /// The switching that undoes this one.
    pub fn reverse(&self) -> Switching {
        Switching { i: self.i, i2: self.i2, j: self.j2, j2: self.j }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CategoryLabel {
    /// Exactly k pairwise non-incident multiplicity-2 edges, nothing heavier.
    Cat(u32),
    Unstructured,
}

impl BipMultiGraph {
    pub fn new(n: usize, d: usize, mult: Vec<u8>) -> Result<Self, SpaceError> {
        if n == 0 || n > 127 || d == 0 || mult.len() != n * n {
            return Err(SpaceError::InvalidParams("bad dimensions".into()));
        }
        for i in 0..n {
            let rs: u32 = (0..n).map(|j| mult[i * n + j] as u32).sum();
            if rs != d as u32 {
                return Err(SpaceError::InvalidParams(format!("row {i} sums to {rs}, not {d}")));
            }
        }
        for j in 0..n {
            let cs: u32 = (0..n).map(|i| mult[i * n + j] as u32).sum();
            if cs != d as u32 {
                return Err(SpaceError::InvalidParams(format!("column {j} sums to {cs}, not {d}")));
            }
        }
        Ok(Self { n: n as u8, d: d as u8, mult })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }
    pub fn d(&self) -> usize {
        self.d as usize
    }
    pub fn mult(&self) -> &[u8] {
        &self.mult
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.mult[i * self.n as usize + j]
    }

    pub fn is_simple(&self) -> bool {
        self.mult.iter().all(|&m| m <= 1)
    }

    /// Canonical state key: row-major multiplicities.
    pub fn key_string(&self) -> String {
        if self.d < 10 {
            self.mult.iter().map(|m| (b'0' + m) as char).collect()
        } else {
            self.mult
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
    }

    /// Compact key: row-major digits in base d+1. Requires (d+1)^(n^2) < 2^64.
    pub fn key_u64(&self) -> u64 {
        debug_assert!(key_u64_fits(self.n as usize, self.d as usize));
        let base = self.d as u64 + 1;
        self.mult.iter().fold(0u64, |acc, &m| acc * base + m as u64)
    }

    /// Whether the four slots of `s` admit a valid switching on this graph.
    pub fn can_apply(&self, s: &Switching) -> bool {
        s.i != s.i2
            && s.j != s.j2
            && self.get(s.i as usize, s.j as usize) >= 1
            && self.get(s.i2 as usize, s.j2 as usize) >= 1
    }

    /// Applies a switching (caller must ensure `can_apply`); line sums are
    /// preserved by construction.
    pub fn apply_switching(&self, s: &Switching) -> BipMultiGraph {
        debug_assert!(self.can_apply(s));
        let n = self.n as usize;
        let mut mult = self.mult.clone();
        mult[s.i as usize * n + s.j as usize] -= 1;
        mult[s.i2 as usize * n + s.j2 as usize] -= 1;
        mult[s.i as usize * n + s.j2 as usize] += 1;
        mult[s.i2 as usize * n + s.j as usize] += 1;
        BipMultiGraph { n: self.n, d: self.d, mult }
    }

    /// In-place switching application on a scratch multiplicity buffer.
    pub fn apply_switching_into(&self, s: &Switching, out: &mut Vec<u8>) {
        out.clear();
        out.extend_from_slice(&self.mult);
        apply_switching_buf(out, self.n as usize, s);
    }

    /// All canonical switchings (i < i', j != j') applicable to this graph,
    /// each together with the resulting graph. With `simple_only`, keeps only
    /// results without multiple edges (the simple switch chain's N(G)).
    ///
    /// Each distinct neighbor graph appears exactly once: the move's net
    /// effect (-1 at (i,j),(i',j'), +1 at (i,j'),(i',j)) pins the canonical
    /// switching.
    pub fn neighbors_switch(&self, simple_only: bool) -> Vec<(Switching, BipMultiGraph)> {
        let mut out = Vec::new();
        self.for_each_switching(simple_only, |s, g| out.push((s, g)));
        out
    }

    /// Visitor over canonical switchings; avoids allocation of the full list.
    pub fn for_each_switching<FN: FnMut(Switching, BipMultiGraph)>(&self, simple_only: bool, mut f: FN) {
        let n = self.n as usize;
        for i in 0..n {
            for i2 in (i + 1)..n {
                for j in 0..n {
                    if self.get(i, j) == 0 {
                        continue;
                    }
                    for j2 in 0..n {
                        if j2 == j || self.get(i2, j2) == 0 {
                            continue;
                        }
                        if simple_only && (self.get(i, j2) >= 1 || self.get(i2, j) >= 1) {
                            continue;
                        }
                        let s = Switching { i: i as u8, i2: i2 as u8, j: j as u8, j2: j2 as u8 };
                        f(s, self.apply_switching(&s));
                    }
                }
            }
        }
    }

    /// Positions (i,j) with multiplicity exactly 2.
    pub fn double_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n as usize;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.get(i, j) == 2 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub fn apply_switching_buf(mult: &mut [u8], n: usize, s: &Switching) {
    mult[s.i as usize * n + s.j as usize] -= 1;
    mult[s.i2 as usize * n + s.j2 as usize] -= 1;
    mult[s.i as usize * n + s.j2 as usize] += 1;
    mult[s.i2 as usize * n + s.j as usize] += 1;
}

pub fn key_u64_fits(n: usize, d: usize) -> bool {
    let mut acc: u128 = 1;
    for _ in 0..n * n {
        acc = acc.saturating_mul(d as u128 + 1);
        if acc > u64::MAX as u128 {
            return false;
        }
    }
    true
}

/// Key of a raw multiplicity buffer in base d+1.
#[inline]
pub fn buf_key_u64(mult: &[u8], d: usize) -> u64 {
    let base = d as u64 + 1;
    mult.iter().fold(0u64, |acc, &m| acc * base + m as u64)
}

fn check_params(n: usize, d: usize) -> Result<(), SpaceError> {
    if d < 2 || 2 * d > n {
        return Err(SpaceError::InvalidParams(format!(
            "need 2 <= d <= n/2, got n={n}, d={d}"
        )));
    }
    Ok(())
}

/// All simple bipartite d-regular graphs on [n] + [n], canonical
/// (row-major lexicographic) order.
pub fn enumerate_simple(n: usize, d: usize, cap: u64) -> Result<Vec<BipMultiGraph>, SpaceError> {
    enumerate(n, d, 1, cap)
}

/// All bipartite d-regular multigraphs on [n] + [n], canonical order.
pub fn enumerate_multi(n: usize, d: usize, cap: u64) -> Result<Vec<BipMultiGraph>, SpaceError> {
    enumerate(n, d, d, cap)
}

fn enumerate(n: usize, d: usize, max_entry: usize, cap: u64) -> Result<Vec<BipMultiGraph>, SpaceError> {
    check_params(n, d)?;
    let mut out = Vec::new();
    let mut count = 0u64;
    let hit_cap = stream_line_sum_matrices(n, d, max_entry, &mut |mult| {
        count += 1;
        if count > cap {
            return false;
        }
        out.push(BipMultiGraph { n: n as u8, d: d as u8, mult: mult.to_vec() });
        true
    });
    if hit_cap {
        return Err(SpaceError::SpaceTooLarge(count, cap));
    }
    Ok(out)
}

/// Streams the simple space without materializing it; the visitor returns
/// false to abort.
pub fn for_each_simple(
    n: usize,
    d: usize,
    visit: &mut dyn FnMut(&[u8]) -> bool,
) -> Result<(), SpaceError> {
    check_params(n, d)?;
    stream_line_sum_matrices(n, d, 1, visit);
    Ok(())
}

/// Streams the multigraph space without materializing it.
pub fn for_each_multi(
    n: usize,
    d: usize,
    visit: &mut dyn FnMut(&[u8]) -> bool,
) -> Result<(), SpaceError> {
    check_params(n, d)?;
    stream_line_sum_matrices(n, d, d, visit);
    Ok(())
}

/// Number of simple graphs, without materializing the space.
pub fn count_simple(n: usize, d: usize) -> Result<u64, SpaceError> {
    check_params(n, d)?;
    let mut count = 0u64;
    stream_line_sum_matrices(n, d, 1, &mut |_| {
        count += 1;
        true
    });
    Ok(count)
}

/// Row-by-row backtracking over digit rows with column-budget pruning.
/// Visits matrices in row-major lexicographic order; returns true if the
/// visitor aborted.
fn stream_line_sum_matrices(
    n: usize,
    d: usize,
    max_entry: usize,
    visit: &mut dyn FnMut(&[u8]) -> bool,
) -> bool {
    let mut mult = vec![0u8; n * n];
    let mut budget = vec![d as u8; n];
    rec_rows(n, d, max_entry, 0, &mut mult, &mut budget, visit)
}

fn rec_rows(
    n: usize,
    d: usize,
    max_entry: usize,
    row: usize,
    mult: &mut [u8],
    budget: &mut [u8],
    visit: &mut dyn FnMut(&[u8]) -> bool,
) -> bool {
    if row == n {
        return !visit(mult);
    }
    // A column's remaining budget must still fit in the remaining rows.
    let rows_left = n - row;
    let per_row_max = max_entry.min(d) as u32;
    if budget.iter().any(|&b| (b as u32) > per_row_max * rows_left as u32) {
        return false;
    }
    rec_cells(n, d, max_entry, row, 0, d, mult, budget, visit)
}

#[allow(clippy::too_many_arguments)]
fn rec_cells(
    n: usize,
    d: usize,
    max_entry: usize,
    row: usize,
    col: usize,
    rem: usize,
    mult: &mut [u8],
    budget: &mut [u8],
    visit: &mut dyn FnMut(&[u8]) -> bool,
) -> bool {
    if col == n {
        if rem != 0 {
            return false;
        }
        return rec_rows(n, d, max_entry, row + 1, mult, budget, visit);
    }
    // Suffix capacity check: can the remaining cells still absorb `rem`?
    let here = max_entry.min(budget[col] as usize);
    let cap_after: usize = (col + 1..n)
        .map(|c| max_entry.min(budget[c] as usize))
        .sum();
    if here + cap_after < rem {
        return false;
    }
    let hi = here.min(rem);
    let lo = rem.saturating_sub(cap_after);
    for v in lo..=hi {
        mult[row * n + col] = v as u8;
        budget[col] -= v as u8;
        let aborted = rec_cells(n, d, max_entry, row, col + 1, rem - v, mult, budget, visit);
        budget[col] += v as u8;
        mult[row * n + col] = 0;
        if aborted {
            return true;
        }
    }
    false
}

/// Exact configuration-model probability (d!)^{2n} / ((nd)! * prod mult!).
pub fn pi_bc(g: &BipMultiGraph) -> Rat {
    let n = g.n();
    let d = g.d();
    let mut numer = BigInt::one();
    let df = factorial(d as u64);
    for _ in 0..2 * n {
        numer *= &df;
    }
    let mut denom = factorial((n * d) as u64);
    for &m in g.mult() {
        if m > 1 {
            denom *= factorial(m as u64);
        }
    }
    Rat::new(numer, denom)
}

pub fn factorial(k: u64) -> BigInt {
    let mut acc = BigInt::one();
    for v in 2..=k {
        acc *= v;
    }
    acc
}

/// Exact mass of the simple graphs under the configuration model. All simple
/// graphs carry the same mass, so this is count * (d!)^{2n}/(nd)!.
pub fn simple_mass(n: usize, d: usize) -> Result<Rat, SpaceError> {
    let count = count_simple(n, d)?;
    let mut numer = BigInt::from(count);
    let df = factorial(d as u64);
    for _ in 0..2 * n {
        numer *= &df;
    }
    Ok(Rat::new(numer, factorial((n * d) as u64)))
}

/// The paper-scale default for the category-depth parameter, clamped to at
/// least 1 so the multiedge machinery is non-vacuous at enumerable sizes.
pub fn default_m(n: usize) -> u32 {
    let ll = (n as f64).ln().ln();
    if ll.is_finite() && ll >= 1.0 {
        (ll.floor() as u32).max(1)
    } else {
        1
    }
}

/// Category of a multigraph: Cat(k) when it has exactly k <= m pairwise
/// non-incident multiplicity-2 edges and no multiplicity >= 3.
pub fn categorize(g: &BipMultiGraph, m: u32) -> CategoryLabel {
    if g.mult().iter().any(|&v| v >= 3) {
        return CategoryLabel::Unstructured;
    }
    let doubles = g.double_edges();
    let k = doubles.len() as u32;
    if k > m {
        return CategoryLabel::Unstructured;
    }
    for (a, &(i1, j1)) in doubles.iter().enumerate() {
        for &(i2, j2) in &doubles[a + 1..] {
            if i1 == i2 || j1 == j2 {
                return CategoryLabel::Unstructured;
            }
        }
    }
    CategoryLabel::Cat(k)
}

/// The circulant simple graph: row i has ones at columns i, i+1, ..., i+d-1
/// (mod n). Contains the full diagonal.
pub fn circulant(n: usize, d: usize) -> BipMultiGraph {
    let mut mult = vec![0u8; n * n];
    for i in 0..n {
        for s in 0..d {
            mult[i * n + (i + s) % n] = 1;
        }
    }
    BipMultiGraph::new(n, d, mult).expect("circulant is d-regular")
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn simple_counts_small() {
        assert_eq!(enumerate_simple(4, 2, DEFAULT_CAP).unwrap().len(), 90);
        assert_eq!(enumerate_simple(5, 2, DEFAULT_CAP).unwrap().len(), 2040);
    }

    #[test]
    fn rejects_infeasible_degree() {
        assert!(enumerate_simple(3, 2, DEFAULT_CAP).is_err());
    }

    #[test]
    fn cap_triggers() {
        assert!(matches!(
            enumerate_simple(5, 2, 100),
            Err(SpaceError::SpaceTooLarge(_, 100))
        ));
    }

    #[test]
    fn multi_superset_of_simple() {
        let multi = enumerate_multi(4, 2, DEFAULT_CAP).unwrap();
        let simple = enumerate_simple(4, 2, DEFAULT_CAP).unwrap();
        assert!(multi.len() > simple.len());
        let keys: std::collections::HashSet<_> = multi.iter().map(|g| g.key_u64()).collect();
        assert_eq!(keys.len(), multi.len(), "enumeration is duplicate-free");
        for g in &simple {
            assert!(keys.contains(&g.key_u64()));
        }
        // A single multiplicity-2 entry instance is present.
        assert!(multi.iter().any(|g| g.mult().iter().any(|&v| v == 2)));
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let simple = enumerate_simple(4, 2, DEFAULT_CAP).unwrap();
        for w in simple.windows(2) {
            assert!(w[0].mult() < w[1].mult());
        }
    }

    #[test]
    fn pi_bc_sums_to_one() {
        let multi = enumerate_multi(4, 2, DEFAULT_CAP).unwrap();
        let total: Rat = multi.iter().map(pi_bc).sum();
        assert!(num_traits::One::is_one(&total));
    }

    #[test]
    fn pi_bc_double_edge_halves_mass() {
        let multi = enumerate_multi(4, 2, DEFAULT_CAP).unwrap();
        let simple_mass_one = pi_bc(multi.iter().find(|g| g.is_simple()).unwrap());
        let one_double = multi
            .iter()
            .find(|g| g.double_edges().len() == 1 && g.mult().iter().all(|&v| v <= 2))
            .unwrap();
        assert_eq!(pi_bc(one_double) * Rat::from_integer(2.into()), simple_mass_one);
    }

    #[test]
    fn simple_mass_matches_summation() {
        let multi = enumerate_multi(4, 2, DEFAULT_CAP).unwrap();
        let by_sum: Rat = multi.iter().filter(|g| g.is_simple()).map(pi_bc).sum();
        assert_eq!(simple_mass(4, 2).unwrap(), by_sum);
        let v = simple_mass(4, 2).unwrap().to_f64().unwrap();
        assert!(v > 0.0 && v <= 1.0);
    }

    #[test]
    fn categorize_cases() {
        let multi = enumerate_multi(4, 2, DEFAULT_CAP).unwrap();
        for g in &multi {
            let label = categorize(g, 2);
            if g.is_simple() {
                assert_eq!(label, CategoryLabel::Cat(0));
            } else {
                assert_ne!(label, CategoryLabel::Cat(0));
            }
        }
        // Two incident doubles (sharing a row) are unstructured.
        let incident = multi
            .iter()
            .find(|g| {
                let d2 = g.double_edges();
                d2.len() == 2 && (d2[0].0 == d2[1].0 || d2[0].1 == d2[1].1)
            });
        if let Some(g) = incident {
            assert_eq!(categorize(g, 2), CategoryLabel::Unstructured);
        }
    }

    #[test]
    fn switching_involution() {
        let g = circulant(4, 2);
        for (s, g2) in g.neighbors_switch(false) {
            let back = g2.apply_switching(&s.reverse());
            assert_eq!(back, g);
        }
    }

    #[test]
    fn simple_mode_neighbors_stay_simple() {
        let g = circulant(5, 2);
        let nb = g.neighbors_switch(true);
        assert!(!nb.is_empty());
        for (_, g2) in &nb {
            assert!(g2.is_simple());
        }
    }

    #[test]
    fn circulant_is_enumerated() {
        let simple = enumerate_simple(4, 2, DEFAULT_CAP).unwrap();
        let c = circulant(4, 2);
        assert!(simple.iter().any(|g| g == &c));
    }

    #[test]
    fn default_m_clamps_to_one() {
        assert_eq!(default_m(4), 1);
        assert_eq!(default_m(7), 1);
        assert_eq!(default_m(16), 1);
    }
}
