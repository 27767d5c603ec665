//! Finite reversible Markov generators: construction with exact invariant
//! checking, entropy, Dirichlet forms, MLSI ratios, regularity constants,
//! graph distances and exact total-variation mixing times.

use crate::scalar::{rat_to_f64, Scalar};
use crate::Rat;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("detailed balance fails on edge ({0},{1})")]
    NotReversible(usize, usize),
    #[error("state graph is not connected")]
    NotIrreducible,
    #[error("invalid stationary measure: {0}")]
    BadMeasure(String),
    #[error("invalid rate matrix: {0}")]
    BadRates(String),
    #[error("dimension mismatch: expected {0}, got {1}")]
    DimensionMismatch(usize, usize),
    #[error("state function must be strictly positive and finite")]
    NonPositiveFunction,
    #[error("TV curve does not cross epsilon within the time grid")]
    GridTooCoarse,
    #[error("serialization: {0}")]
    Serialization(String),
}

/// A reversible Markov generator together with its stationary measure.
///
/// Off-diagonal rates are kept sparse; the diagonal is implied (negated row
/// sum). All invariants — detailed balance, support symmetry, irreducibility —
/// are validated exactly at construction.
pub struct FiniteChain {
    state_ids: Vec<String>,
    pi: Vec<Rat>,
    adj: Vec<Vec<(u32, Rat)>>,
    pi_f: Vec<f64>,
    adj_f: Vec<Vec<(u32, f64)>>,
    distances: OnceLock<DistanceMatrix>,
}

impl std::fmt::Debug for FiniteChain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiniteChain")
            .field("n", &self.n())
            .field("edges", &self.edge_count())
            .finish()
    }
}

/// All-pairs shortest-path distances on the chain's adjacency graph.
#[derive(Debug)]
pub struct DistanceMatrix {
    n: usize,
    dist: Vec<u32>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.dist[i * self.n + j]
    }
    pub fn diameter(&self) -> u32 {
        self.dist.iter().copied().max().unwrap_or(0)
    }
}

/// A strictly positive function on the state space.
#[derive(Clone, Debug)]
pub struct StateFunction<F: Scalar> {
    values: Vec<F>,
}

impl<F: Scalar> StateFunction<F> {
    pub fn new(values: Vec<F>) -> Result<Self, ChainError> {
        if values.is_empty() || values.iter().any(|v| !(*v > F::zero()) || !v.is_finite()) {
            return Err(ChainError::NonPositiveFunction);
        }
        Ok(Self { values })
    }

    pub fn constant(n: usize, c: F) -> Result<Self, ChainError> {
        Self::new(vec![c; n])
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|v| *v == self.values[0])
    }

    pub fn log(&self) -> Vec<F> {
        self.values.iter().map(|v| v.ln()).collect()
    }
}

impl FiniteChain {
    pub fn n(&self) -> usize {
        self.state_ids.len()
    }

    pub fn state_ids(&self) -> &[String] {
        &self.state_ids
    }

    pub fn pi(&self) -> &[Rat] {
        &self.pi
    }

    pub fn pi_f(&self) -> &[f64] {
        &self.pi_f
    }

    /// Sparse off-diagonal rates of row `i`, sorted by neighbor index.
    pub fn row(&self, i: usize) -> &[(u32, Rat)] {
        &self.adj[i]
    }

    pub fn row_f(&self, i: usize) -> &[(u32, f64)] {
        &self.adj_f[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> Option<&Rat> {
        let j = j as u32;
        self.adj[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .ok()
            .map(|p| &self.adj[i][p].1)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|r| r.len()).sum::<usize>() / 2
    }
}

/// Validates and builds a reversible generator.
///
/// `rates` lists off-diagonal entries `(i, j, q(i,j))`; duplicates are
/// rejected. Detailed balance, support symmetry and connectivity are checked
/// exactly.
pub fn build_chain(
    state_ids: Vec<String>,
    pi: Vec<Rat>,
    rates: Vec<(usize, usize, Rat)>,
) -> Result<FiniteChain, ChainError> {
    let n = state_ids.len();
    if n == 0 {
        return Err(ChainError::BadMeasure("empty state space".into()));
    }
    if pi.len() != n {
        return Err(ChainError::DimensionMismatch(n, pi.len()));
    }
    if pi.iter().any(|p| !p.is_positive()) {
        return Err(ChainError::BadMeasure("pi must be strictly positive".into()));
    }
    let total: Rat = pi.iter().sum();
    if !total.is_one() {
        return Err(ChainError::BadMeasure(format!("pi sums to {total}, not 1")));
    }

    let mut adj: Vec<Vec<(u32, Rat)>> = vec![Vec::new(); n];
    for (i, j, q) in rates {
        if i >= n || j >= n {
            return Err(ChainError::BadRates(format!("index ({i},{j}) out of range")));
        }
        if i == j {
            return Err(ChainError::BadRates("diagonal entries are implied, not given".into()));
        }
        if q.is_negative() {
            return Err(ChainError::BadRates(format!("negative rate at ({i},{j})")));
        }
        if q.is_zero() {
            continue;
        }
        adj[i].push((j as u32, q));
    }
    for row in adj.iter_mut() {
        row.sort_unstable_by_key(|&(j, _)| j);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ChainError::BadRates("duplicate off-diagonal entry".into()));
        }
    }

    // Support symmetry + exact detailed balance.
    for i in 0..n {
        for &(j, ref q) in &adj[i] {
            let j = j as usize;
            let back = adj[j]
                .binary_search_by_key(&(i as u32), |&(k, _)| k)
                .ok()
                .map(|p| &adj[j][p].1);
            match back {
                None => return Err(ChainError::NotReversible(i, j)),
                Some(qb) => {
                    if &self_mul(&pi[i], q) != &self_mul(&pi[j], qb) {
                        return Err(ChainError::NotReversible(i, j));
                    }
                }
            }
        }
    }

    // Connectivity by BFS.
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[0] = true;
    queue.push_back(0usize);
    let mut count = 1usize;
    while let Some(i) = queue.pop_front() {
        for &(j, _) in &adj[i] {
            let j = j as usize;
            if !seen[j] {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    if count != n {
        return Err(ChainError::NotIrreducible);
    }

    let pi_f: Vec<f64> = pi.iter().map(rat_to_f64).collect();
    let adj_f: Vec<Vec<(u32, f64)>> = adj
        .iter()
        .map(|row| row.iter().map(|(j, q)| (*j, rat_to_f64(q))).collect())
        .collect();

    Ok(FiniteChain {
        state_ids,
        pi,
        adj,
        pi_f,
        adj_f,
        distances: OnceLock::new(),
    })
}

fn self_mul(a: &Rat, b: &Rat) -> Rat {
    a * b
}

/// Relative entropy Ent_pi(f) = E[f log f] - E[f] log E[f].
pub fn entropy<F: Scalar>(chain: &FiniteChain, f: &StateFunction<F>) -> Result<F, ChainError> {
    check_dim(chain, f.len())?;
    let ef = expectation(chain, f.values());
    let log_ef = ef.ln();
    let mut ent = F::zero();
    for (i, v) in f.values().iter().enumerate() {
        ent = ent + F::from_f64(chain.pi_f[i]).unwrap() * *v * (v.ln() - log_ef);
    }
    Ok(ent)
}

/// E_pi[g] for a plain vector.
pub fn expectation<F: Scalar>(chain: &FiniteChain, g: &[F]) -> F {
    g.iter()
        .zip(&chain.pi_f)
        .map(|(v, p)| *v * F::from_f64(*p).unwrap())
        .sum()
}

/// Dirichlet form (1/2) sum_{i,j} pi(i) q(i,j) (f(i)-f(j)) (g(i)-g(j)).
pub fn dirichlet<F: Scalar>(chain: &FiniteChain, f: &[F], g: &[F]) -> Result<F, ChainError> {
    check_dim(chain, f.len())?;
    check_dim(chain, g.len())?;
    let mut acc = F::zero();
    for i in 0..chain.n() {
        let pi_i = F::from_f64(chain.pi_f[i]).unwrap();
        for &(j, q) in &chain.adj_f[i] {
            let j = j as usize;
            acc = acc + pi_i * F::from_f64(q).unwrap() * (f[i] - f[j]) * (g[i] - g[j]);
        }
    }
    Ok(acc / F::from_f64(2.0).unwrap())
}

/// The entropic Dirichlet form E(log f, f).
pub fn dirichlet_mlsi<F: Scalar>(chain: &FiniteChain, f: &StateFunction<F>) -> Result<F, ChainError> {
    dirichlet(chain, &f.log(), f.values())
}

/// Ent / E(log f, f); `None` for constant f (the 0/0 convention).
pub fn mlsi_ratio<F: Scalar>(chain: &FiniteChain, f: &StateFunction<F>) -> Result<Option<F>, ChainError> {
    check_dim(chain, f.len())?;
    if f.is_constant() {
        return Ok(None);
    }
    let e = dirichlet_mlsi(chain, f)?;
    if e <= F::zero() {
        return Ok(None);
    }
    Ok(Some(entropy(chain, f)? / e))
}

fn check_dim(chain: &FiniteChain, len: usize) -> Result<(), ChainError> {
    if len != chain.n() {
        Err(ChainError::DimensionMismatch(chain.n(), len))
    } else {
        Ok(())
    }
}

/// gamma / Upsilon constants of the regularization machinery.
#[derive(Clone, Debug)]
pub struct RegularityConstants {
    pub gamma: Rat,
    pub upsilon: Rat,
    pub max_degree: usize,
    pub min_rate: Rat,
}

impl RegularityConstants {
    pub fn gamma_f(&self) -> f64 {
        rat_to_f64(&self.gamma)
    }
    pub fn upsilon_f(&self) -> f64 {
        rat_to_f64(&self.upsilon)
    }
}

/// gamma = max pi / min pi and Upsilon = 16 gamma^2 maxdeg / min rate.
pub fn regularity_constants(chain: &FiniteChain) -> RegularityConstants {
    let max_pi = chain.pi.iter().max().unwrap().clone();
    let min_pi = chain.pi.iter().min().unwrap().clone();
    let gamma = max_pi / min_pi;
    let max_degree = (0..chain.n()).map(|i| chain.degree(i)).max().unwrap_or(0);
    let min_rate = chain
        .adj
        .iter()
        .flat_map(|row| row.iter().map(|(_, q)| q))
        .min()
        .cloned()
        .unwrap_or_else(Rat::one);
    let sixteen = Rat::from_integer(16.into());
    let deg = Rat::from_integer((max_degree as i64).into());
    let upsilon = sixteen * &gamma * &gamma * deg / &min_rate;
    RegularityConstants {
        gamma,
        upsilon,
        max_degree,
        min_rate,
    }
}

/// All-pairs BFS distances, computed once and cached on the chain.
pub fn graph_distances(chain: &FiniteChain) -> &DistanceMatrix {
    chain.distances.get_or_init(|| {
        let n = chain.n();
        let mut dist = vec![u32::MAX; n * n];
        let mut queue = std::collections::VecDeque::new();
        for s in 0..n {
            let row = &mut dist[s * n..(s + 1) * n];
            row[s] = 0;
            queue.clear();
            queue.push_back(s);
            while let Some(i) = queue.pop_front() {
                let di = row[i];
                for &(j, _) in &chain.adj[i] {
                    let j = j as usize;
                    if row[j] == u32::MAX {
                        row[j] = di + 1;
                        queue.push_back(j);
                    }
                }
            }
        }
        DistanceMatrix { n, dist }
    })
}

/// Outcome of an exact TV mixing-time computation.
#[derive(Clone, Debug)]
pub struct MixingOutcome {
    /// Smallest grid time where the worst-start TV distance is <= epsilon.
    pub t_mix: f64,
    /// (t, max-over-starts TV) along the grid.
    pub curve: Vec<(f64, f64)>,
    /// Right-hand side of the MLSI mixing bound, when an alpha was supplied:
    /// alpha * (log log 1/pi_min + log 1/(2 eps^2)).
    pub bound_rhs: Option<f64>,
}

/// Exact worst-start TV distance to stationarity along a time grid.
///
/// The semigroup e^{tQ} is evaluated by uniformization: P = I + Q/Lambda with
/// Lambda = max_i |q(i,i)|, and e^{tQ} = sum_k Poisson(t Lambda)(k) P^k,
/// truncated when the Poisson tail mass drops below 1e-12.
pub fn tv_mixing_time(
    chain: &FiniteChain,
    epsilon: f64,
    time_grid: &[f64],
    alpha_for_bound: Option<f64>,
) -> Result<MixingOutcome, ChainError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ChainError::BadMeasure(format!("epsilon {epsilon} outside (0,1)")));
    }
    let n = chain.n();
    let mut grid: Vec<f64> = time_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    if grid.is_empty() || grid[0] < 0.0 {
        return Err(ChainError::BadMeasure("time grid must be nonnegative".into()));
    }

    let lambda = (0..n)
        .map(|i| chain.adj_f[i].iter().map(|&(_, q)| q).sum::<f64>())
        .fold(0.0_f64, f64::max);

    // Dense row-stochastic kernel P = I + Q/Lambda (identity when Lambda = 0).
    let p_mat: Vec<f64> = {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            let mut off = 0.0;
            for &(j, q) in &chain.adj_f[i] {
                let v = if lambda > 0.0 { q / lambda } else { 0.0 };
                p[i * n + j as usize] = v;
                off += v;
            }
            p[i * n + i] = 1.0 - off;
        }
        p
    };

    // m starts as e^{t_prev Q} applied to the identity; advance by deltas.
    let mut m: Vec<f64> = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    let mut t_prev = 0.0;
    let mut curve = Vec::with_capacity(grid.len());
    let mut t_mix = None;

    for &t in &grid {
        let delta = t - t_prev;
        if delta > 0.0 && lambda > 0.0 {
            advance_uniformized(&mut m, &p_mat, n, delta * lambda);
        }
        t_prev = t;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row = &m[i * n..(i + 1) * n];
            let tv = 0.5
                * row
                    .iter()
                    .zip(&chain.pi_f)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>();
            worst = worst.max(tv);
        }
        curve.push((t, worst));
        if t_mix.is_none() && worst <= epsilon {
            t_mix = Some(t);
        }
    }

    let t_mix = t_mix.ok_or(ChainError::GridTooCoarse)?;
    let bound_rhs = alpha_for_bound.map(|alpha| {
        let pi_min = chain.pi_f.iter().cloned().fold(f64::INFINITY, f64::min);
        alpha * ((1.0 / pi_min).ln().ln() + (1.0 / (2.0 * epsilon * epsilon)).ln())
    });
    Ok(MixingOutcome { t_mix, curve, bound_rhs })
}

/// Poisson weights of mean `mu`, truncated when the tail mass is < 1e-12.
pub fn poisson_weights(mu: f64) -> Vec<f64> {
    if mu == 0.0 {
        return vec![1.0];
    }
    // Log-domain recurrence is robust for large means.
    let mut weights = Vec::new();
    let mut lw = -mu;
    let mut cum = 0.0;
    let mut k = 0usize;
    loop {
        let w = lw.exp();
        weights.push(w);
        cum += w;
        if cum >= 1.0 - 1e-12 && k as f64 > mu {
            break;
        }
        k += 1;
        lw += mu.ln() - (k as f64).ln();
        if k > 100_000 {
            break;
        }
    }
    weights
}

/// In place: m <- e^{(mu/Lambda) Q} m, i.e. sum_k Poisson(mu)(k) P^k m.
fn advance_uniformized(m: &mut Vec<f64>, p_mat: &[f64], n: usize, mu: f64) {
    let weights = poisson_weights(mu);
    let mut acc = vec![0.0; n * n];
    let mut cur = m.clone();
    for (k, &w) in weights.iter().enumerate() {
        if k > 0 {
            cur = mat_mul(&cur, p_mat, n);
        }
        if w > 0.0 {
            for (a, c) in acc.iter_mut().zip(&cur) {
                *a += w * c;
            }
        }
    }
    *m = acc;
}

/// Row-major n x n matrix product a * b.
pub fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let arow = &a[i * n..(i + 1) * n];
        let orow = &mut out[i * n..(i + 1) * n];
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// Best MLSI ratio found over a fixed, versioned candidate ensemble.
///
/// The ensemble (v1) interleaves: single-state indicator bumps, random subset
/// indicators with varying amplitude, exponentials of the chain's second
/// eigenvector, and coordinate-ascent refinements of the best candidate so
/// far. Deterministic under `seed`, monotone nondecreasing in `budget`.
pub fn estimate_mlsi(chain: &FiniteChain, budget: usize, seed: u64) -> f64 {
    estimate_mlsi_seeded(chain, budget, seed, &[])
}

/// Same ensemble, with caller-supplied functions tried first.
pub fn estimate_mlsi_seeded(
    chain: &FiniteChain,
    budget: usize,
    seed: u64,
    extra: &[StateFunction<f64>],
) -> f64 {
    let n = chain.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u2 = second_eigvec(chain);
    let mut best: f64 = 0.0;
    let mut best_f: Option<Vec<f64>> = None;

    let consider = |vals: Vec<f64>, best: &mut f64, best_f: &mut Option<Vec<f64>>| {
        if let Ok(f) = StateFunction::new(vals) {
            if let Ok(Some(r)) = mlsi_ratio(chain, &f) {
                if r > *best {
                    *best = r;
                    *best_f = Some(f.values().to_vec());
                }
            }
        }
    };

    for (idx, f) in extra.iter().enumerate() {
        if idx >= budget {
            return best;
        }
        consider(f.values().to_vec(), &mut best, &mut best_f);
    }

    let amplitudes = [0.25, 1.0, 4.0];
    let exponents = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    for idx in extra.len()..budget {
        match idx % 4 {
            0 => {
                let k = idx / 4 % n;
                let mut v = vec![1.0; n];
                v[k] = 2.0;
                consider(v, &mut best, &mut best_f);
            }
            1 => {
                let amp = amplitudes[(idx / 4) % amplitudes.len()];
                let v: Vec<f64> = (0..n)
                    .map(|_| if rng.gen::<bool>() { 1.0 + amp } else { 1.0 })
                    .collect();
                consider(v, &mut best, &mut best_f);
            }
            2 => {
                let s = exponents[(idx / 4) % exponents.len()];
                let v: Vec<f64> = u2.iter().map(|&u| (s * u).exp()).collect();
                consider(v, &mut best, &mut best_f);
            }
            _ => {
                if let Some(cur) = best_f.clone() {
                    let mut v = cur;
                    for k in 0..n {
                        for scale in [0.5, 2.0] {
                            let old = v[k];
                            v[k] = old * scale;
                            let improved = StateFunction::new(v.clone())
                                .ok()
                                .and_then(|f| mlsi_ratio(chain, &f).ok().flatten())
                                .map(|r| r > best)
                                .unwrap_or(false);
                            if !improved {
                                v[k] = old;
                            }
                        }
                    }
                    consider(v, &mut best, &mut best_f);
                }
            }
        }
    }
    best
}

/// Second eigenvector of P = I + Q/Lambda by deflated power iteration
/// (normalized to max |entry| = 1); a parity vector for very large chains.
fn second_eigvec(chain: &FiniteChain) -> Vec<f64> {
    let n = chain.n();
    if n > 3000 {
        return (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    }
    let lambda = (0..n)
        .map(|i| chain.adj_f[i].iter().map(|&(_, q)| q).sum::<f64>())
        .fold(0.0_f64, f64::max);
    if lambda == 0.0 {
        return vec![1.0; n];
    }
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
    for _ in 0..200 {
        // Deflate the constant direction in L2(pi).
        let mean: f64 = v.iter().zip(&chain.pi_f).map(|(x, p)| x * p).sum();
        for x in v.iter_mut() {
            *x -= mean;
        }
        // v <- P v.
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut off = 0.0;
            let mut acc = 0.0;
            for &(j, q) in &chain.adj_f[i] {
                acc += q / lambda * v[j as usize];
                off += q / lambda;
            }
            next[i] = acc + (1.0 - off) * v[i];
        }
        let norm = next.iter().map(|x| x.abs()).fold(0.0_f64, f64::max);
        if norm < 1e-300 {
            return vec![1.0; n];
        }
        v = next.into_iter().map(|x| x / norm).collect();
    }
    v
}

// ---------------------------------------------------------------------------
// Serialization (JSON: {states, pi as "num/den" strings, rates [[i,j,"num/den"]]})
// ---------------------------------------------------------------------------

#[derive(serde::Serialize, serde::Deserialize)]
struct ChainJson {
    states: Vec<String>,
    pi: Vec<String>,
    rates: Vec<(usize, usize, String)>,
}

pub fn rat_to_string(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn rat_from_string(s: &str) -> Result<Rat, ChainError> {
    let parse = |t: &str| {
        t.trim()
            .parse::<num_bigint::BigInt>()
            .map_err(|e| ChainError::Serialization(format!("bad integer '{t}': {e}")))
    };
    match s.split_once('/') {
        Some((a, b)) => {
            let den = parse(b)?;
            if den.is_zero() {
                return Err(ChainError::Serialization("zero denominator".into()));
            }
            Ok(Rat::new(parse(a)?, den))
        }
        None => Ok(Rat::from_integer(parse(s)?)),
    }
}

pub fn chain_to_json(chain: &FiniteChain) -> String {
    let mut rates = Vec::new();
    for i in 0..chain.n() {
        for &(j, ref q) in chain.row(i) {
            rates.push((i, j as usize, rat_to_string(q)));
        }
    }
    let doc = ChainJson {
        states: chain.state_ids.clone(),
        pi: chain.pi.iter().map(rat_to_string).collect(),
        rates,
    };
    serde_json::to_string_pretty(&doc).expect("chain serializes")
}

pub fn chain_from_json(text: &str) -> Result<FiniteChain, ChainError> {
    let doc: ChainJson =
        serde_json::from_str(text).map_err(|e| ChainError::Serialization(e.to_string()))?;
    let pi = doc
        .pi
        .iter()
        .map(|s| rat_from_string(s))
        .collect::<Result<Vec<_>, _>>()?;
    let rates = doc
        .rates
        .into_iter()
        .map(|(i, j, s)| Ok((i, j, rat_from_string(&s)?)))
        .collect::<Result<Vec<_>, ChainError>>()?;
    build_chain(doc.states, pi, rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;

    fn two_state() -> FiniteChain {
        build_chain(
            vec!["a".into(), "b".into()],
            vec![rat(1, 2), rat(1, 2)],
            vec![(0, 1, rat(1, 1)), (1, 0, rat(1, 1))],
        )
        .unwrap()
    }

    #[test]
    fn builds_symmetric_two_state() {
        let c = two_state();
        assert_eq!(c.n(), 2);
        assert_eq!(c.edge_count(), 1);
    }

    #[test]
    fn rejects_unbalanced_measure() {
        let err = build_chain(
            vec!["a".into(), "b".into()],
            vec![rat(1, 3), rat(2, 3)],
            vec![(0, 1, rat(1, 1)), (1, 0, rat(1, 1))],
        )
        .unwrap_err();
        assert!(matches!(err, ChainError::NotReversible(_, _)));
    }

    #[test]
    fn rejects_disconnected() {
        let err = build_chain(
            vec!["a".into(), "b".into(), "c".into()],
            vec![rat(1, 3), rat(1, 3), rat(1, 3)],
            vec![(0, 1, rat(1, 1)), (1, 0, rat(1, 1))],
        )
        .unwrap_err();
        assert!(matches!(err, ChainError::NotIrreducible));
    }

    #[test]
    fn entropy_of_constants_is_zero() {
        let c = two_state();
        for v in [1.0, 0.5, 7.25] {
            let f = StateFunction::constant(2, v).unwrap();
            assert!(entropy(&c, &f).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn dirichlet_two_state_hand_value() {
        // pi = (1/2, 1/2), rate 1, f = (1, e), g = log f = (0, 1):
        // (1/2) * [ (1/2)(1-e)(0-1) + (1/2)(e-1)(1-0) ] = (e-1)/2.
        let c = two_state();
        let e = std::f64::consts::E;
        let val = dirichlet(&c, &[1.0, e], &[0.0, 1.0]).unwrap();
        assert!((val - (e - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_symmetric_and_nonnegative() {
        let c = two_state();
        let f = [1.0, 3.0];
        let g = [0.2, -1.0];
        let a = dirichlet(&c, &f, &g).unwrap();
        let b = dirichlet(&c, &g, &f).unwrap();
        assert_eq!(a, b);
        let sf = StateFunction::new(f.to_vec()).unwrap();
        assert!(dirichlet_mlsi(&c, &sf).unwrap() >= 0.0);
    }

    #[test]
    fn mlsi_ratio_constant_is_none() {
        let c = two_state();
        let f = StateFunction::constant(2, 3.0).unwrap();
        assert!(mlsi_ratio(&c, &f).unwrap().is_none());
    }

    #[test]
    fn estimate_dominates_simple_candidate() {
        let c = two_state();
        let f = StateFunction::new(vec![1.0, 2.0]).unwrap();
        let r = mlsi_ratio(&c, &f).unwrap().unwrap();
        assert!(estimate_mlsi(&c, 64, 7) >= r);
    }

    #[test]
    fn estimate_monotone_in_budget() {
        let c = two_state();
        let lo = estimate_mlsi(&c, 8, 11);
        let hi = estimate_mlsi(&c, 64, 11);
        assert!(lo <= hi);
    }

    #[test]
    fn regularity_constants_two_state() {
        let c = two_state();
        let rc = regularity_constants(&c);
        assert!(rc.gamma.is_one());
        assert_eq!(rc.upsilon, rat(16, 1));
        assert_eq!(rc.max_degree, 1);
    }

    #[test]
    fn distances_trivial_cases() {
        let c = two_state();
        let d = graph_distances(&c);
        assert_eq!(d.get(0, 0), 0);
        assert_eq!(d.get(0, 1), 1);
    }

    #[test]
    fn single_state_chain_mixes_instantly() {
        let c = build_chain(vec!["only".into()], vec![rat(1, 1)], vec![]).unwrap();
        let out = tv_mixing_time(&c, 0.9, &[0.0, 1.0], None).unwrap();
        assert_eq!(out.t_mix, 0.0);
    }

    #[test]
    fn tv_curve_starts_at_worst_and_decreases() {
        let c = two_state();
        let grid: Vec<f64> = (0..40).map(|k| k as f64 * 0.25).collect();
        let out = tv_mixing_time(&c, 0.05, &grid, Some(1.0)).unwrap();
        assert!((out.curve[0].1 - 0.5).abs() < 1e-12); // max_x (1 - pi(x))
        for w in out.curve.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-12);
        }
        assert!(out.bound_rhs.unwrap() > 0.0);
    }

    #[test]
    fn json_round_trip() {
        let c = two_state();
        let text = chain_to_json(&c);
        let back = chain_from_json(&text).unwrap();
        assert_eq!(back.n(), 2);
        assert_eq!(back.pi(), c.pi());
        assert_eq!(back.rate(0, 1), c.rate(0, 1));
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        for mu in [0.1, 1.0, 10.0, 300.0] {
            let w = poisson_weights(mu);
            let s: f64 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-11, "mu={mu} sum={s}");
        }
    }
}
