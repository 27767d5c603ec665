//! The switch chain on simple bipartite d-regular graphs (Q_u), the
//! configuration-model multigraph chain (Q_c), the MLSI lower-bound witness,
//! and seeded simulation with the diagonal distinguishing statistic.

use crate::chain::{build_chain, dirichlet_mlsi, entropy, expectation, FiniteChain, StateFunction};
use crate::graph_space::{
    buf_key_u64, circulant, enumerate_multi, enumerate_simple, pi_bc, BipMultiGraph, SpaceError,
};
use crate::{rat, ChainError, Rat};
use num_bigint::BigInt;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SwitchError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("start graph invalid: {0}")]
    InvalidStart(String),
}

/// Off-diagonal switching rate common to Q_u and Q_c: (nd(nd-1)/2)^{-1}.
pub fn base_rate(n: usize, d: usize) -> Rat {
    rat(2, (n * d * (n * d - 1)) as i64)
}

/// Index over an enumerated space keyed by the compact base-(d+1) key.
pub struct SpaceIndex {
    pub graphs: Vec<BipMultiGraph>,
    pub index: HashMap<u64, u32>,
}

impl SpaceIndex {
    pub fn new(graphs: Vec<BipMultiGraph>) -> Self {
        let index = graphs
            .iter()
            .enumerate()
            .map(|(i, g)| (g.key_u64(), i as u32))
            .collect();
        Self { graphs, index }
    }

    pub fn get(&self, g: &BipMultiGraph) -> Option<u32> {
        self.index.get(&g.key_u64()).copied()
    }
}

/// The uniform switch chain Q_u on simple graphs.
pub fn build_qu(n: usize, d: usize, cap: u64) -> Result<FiniteChain, SwitchError> {
    let space = SpaceIndex::new(enumerate_simple(n, d, cap)?);
    let count = space.graphs.len() as i64;
    let pi = vec![rat(1, count); space.graphs.len()];
    let rate = base_rate(n, d);
    let mut rates = Vec::new();
    for (i, g) in space.graphs.iter().enumerate() {
        for (_, g2) in g.neighbors_switch(true) {
            let j = space.get(&g2).expect("switch neighbors stay in the space");
            rates.push((i, j as usize, rate.clone()));
        }
    }
    let ids = space.graphs.iter().map(|g| g.key_string()).collect();
    Ok(build_chain(ids, pi, rates)?)
}

/// The configuration-model chain Q_c on multigraphs, with stationary
/// measure pi_BC and multiplicity-weighted switching rates.
pub fn build_qc(n: usize, d: usize, cap: u64) -> Result<FiniteChain, SwitchError> {
    let space = SpaceIndex::new(enumerate_multi(n, d, cap)?);
    let pi: Vec<Rat> = space.graphs.iter().map(pi_bc).collect();
    let rate = base_rate(n, d);
    let mut rates = Vec::new();
    for (i, g) in space.graphs.iter().enumerate() {
        for (s, g2) in g.neighbors_switch(false) {
            let j = space.get(&g2).expect("switchings stay in the multigraph space");
            let m = g.get(s.i as usize, s.j as usize) as i64
                * g.get(s.i2 as usize, s.j2 as usize) as i64;
            rates.push((i, j as usize, &rate * rat(m, 1)));
        }
    }
    let ids = space.graphs.iter().map(|g| g.key_string()).collect();
    Ok(build_chain(ids, pi, rates)?)
}

// ---------------------------------------------------------------------------
// Streaming exactness checks (for spaces too big to hold a rational chain)
// ---------------------------------------------------------------------------

/// Exact streaming invariants of Q_u: neighbor relation symmetric (which,
/// with the uniform measure and constant rate, is detailed balance) and the
/// state graph connected.
pub struct QuExactness {
    pub states: usize,
    pub edges: usize,
    pub symmetric: bool,
    pub connected: bool,
}

pub fn check_qu_exact(n: usize, d: usize, cap: u64) -> Result<QuExactness, SwitchError> {
    let space = SpaceIndex::new(enumerate_simple(n, d, cap)?);
    let m = space.graphs.len();
    let mut adj: Vec<Vec<u32>> = Vec::with_capacity(m);
    let mut buf = Vec::new();
    for g in &space.graphs {
        let mut row = Vec::new();
        // Walk switchings via the in-place buffer to avoid allocating graphs.
        let nn = g.n();
        for i in 0..nn {
            for i2 in (i + 1)..nn {
                for j in 0..nn {
                    if g.get(i, j) == 0 {
                        continue;
                    }
                    for j2 in 0..nn {
                        if j2 == j || g.get(i2, j2) == 0 || g.get(i, j2) >= 1 || g.get(i2, j) >= 1 {
                            continue;
                        }
                        let s = crate::graph_space::Switching {
                            i: i as u8,
                            i2: i2 as u8,
                            j: j as u8,
                            j2: j2 as u8,
                        };
                        g.apply_switching_into(&s, &mut buf);
                        row.push(space.index[&buf_key_u64(&buf, d)]);
                    }
                }
            }
        }
        row.sort_unstable();
        adj.push(row);
    }
    // Symmetry: (i -> j) iff (j -> i), with equal multiplicity (which is 1).
    let mut symmetric = true;
    'outer: for (i, row) in adj.iter().enumerate() {
        if row.windows(2).any(|w| w[0] == w[1]) {
            symmetric = false; // duplicate neighbor would break rate constancy
            break;
        }
        for &j in row {
            if adj[j as usize].binary_search(&(i as u32)).is_err() {
                symmetric = false;
                break 'outer;
            }
        }
    }
    // Connectivity.
    let mut seen = vec![false; m];
    let mut queue = std::collections::VecDeque::new();
    seen[0] = true;
    queue.push_back(0u32);
    let mut reached = 1usize;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i as usize] {
            if !seen[j as usize] {
                seen[j as usize] = true;
                reached += 1;
                queue.push_back(j);
            }
        }
    }
    Ok(QuExactness {
        states: m,
        edges: adj.iter().map(|r| r.len()).sum::<usize>() / 2,
        symmetric,
        connected: reached == m,
    })
}

/// Exact streaming detailed-balance check of Q_c plus pi_BC normalization.
/// Per edge, pi_BC(G1) Q_c(G1,G2) = pi_BC(G2) Q_c(G2,G1) reduces to an
/// identity in the four changed multiplicities, verified in exact integers.
pub struct QcExactness {
    pub states: usize,
    pub directed_edges: usize,
    pub balance_violations: usize,
    pub pi_sums_to_one: bool,
}

pub fn check_qc_exact(n: usize, d: usize, cap: u64) -> Result<QcExactness, SwitchError> {
    let graphs = enumerate_multi(n, d, cap)?;
    let total: Rat = graphs.iter().map(pi_bc).sum();
    let fact = |k: u8| -> u128 { (1..=k as u128).product::<u128>().max(1) };
    let mut edges = 0usize;
    let mut violations = 0usize;
    for g in &graphs {
        g.for_each_switching(false, |s, _| {
            edges += 1;
            let a = g.get(s.i as usize, s.j as usize);
            let b = g.get(s.i2 as usize, s.j2 as usize);
            let c = g.get(s.i as usize, s.j2 as usize);
            let e = g.get(s.i2 as usize, s.j as usize);
            // pi ~ 1/prod(mult!) on the four changed cells; rates carry the
            // multiplicity products. Cross-multiplied balance condition:
            let lhs = a as u128 * b as u128 * fact(c + 1) * fact(e + 1) * fact(a - 1) * fact(b - 1);
            let rhs = (c as u128 + 1) * (e as u128 + 1) * fact(a) * fact(b) * fact(c) * fact(e);
            if lhs != rhs {
                violations += 1;
            }
        });
    }
    Ok(QcExactness {
        states: graphs.len(),
        directed_edges: edges,
        balance_violations: violations,
        pi_sums_to_one: total.is_one(),
    })
}

// ---------------------------------------------------------------------------
// MLSI lower-bound witness
// ---------------------------------------------------------------------------

/// The proof's test function on an enumerated simple space: 2 where the
/// graph contains edge (0,0), 1 elsewhere.
pub fn witness_function(graphs: &[BipMultiGraph]) -> StateFunction<f64> {
    StateFunction::new(
        graphs
            .iter()
            .map(|g| if g.get(0, 0) >= 1 { 2.0 } else { 1.0 })
            .collect(),
    )
    .expect("witness values are positive")
}

/// Closed-form and (optionally) exact-mode evaluation of the lower-bound
/// witness.
#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub n: usize,
    pub d: usize,
    /// Closed forms from the proof display.
    pub ef_closed: f64,
    pub ent_closed: f64,
    /// Proof's Dirichlet upper bound 2 log 2 / n^2.
    pub dirichlet_bound: f64,
    /// Exact Dirichlet value by direct pair counting (streamed).
    pub dirichlet_exact: f64,
    /// Chain-built values, present in exact mode.
    pub ef_exact: Option<f64>,
    pub ent_exact: Option<f64>,
    pub dirichlet_chain: Option<f64>,
    /// Fraction of graphs containing edge (0,0), exact; equals d/n.
    pub edge_fraction: Rat,
    pub ratio: f64,
    pub ratio_per_nd: f64,
}

/// Closed-form expressions of the proof.
pub fn witness_closed_forms(n: usize, d: usize) -> (f64, f64) {
    let (nf, df) = (n as f64, d as f64);
    let ef = (nf + df) / nf;
    let ent = (nf - df) / nf * (nf / (nf + df)).ln() + 2.0 * df / nf * (2.0 * nf / (nf + df)).ln();
    (ef, ent)
}

/// Streams the simple space, counting graphs with edge (0,0) and, for graphs
/// without it, the switchings that would create it. Returns
/// (total, with_edge, creating_pairs).
fn witness_counts(n: usize, d: usize) -> Result<(u128, u128, u128), SwitchError> {
    let mut total = 0u128;
    let mut with_edge = 0u128;
    let mut creating = 0u128;
    crate::graph_space::for_each_simple(n, d, &mut |mult: &[u8]| {
        total += 1;
        if mult[0] >= 1 {
            with_edge += 1;
        } else {
            // Count pairs (j, i2): edge (0,j), edge (i2,0), mult(i2,j) = 0.
            for j in 1..n {
                if mult[j] == 0 {
                    continue;
                }
                for i2 in 1..n {
                    if mult[i2 * n] >= 1 && mult[i2 * n + j] == 0 {
                        creating += 1;
                    }
                }
            }
        }
        true
    })?;
    Ok((total, with_edge, creating))
}

/// Evaluates the witness. In exact mode (space within `cap`) also computes
/// the chain-built entropy/Dirichlet for cross-checking against the closed
/// forms.
pub fn mlsi_lower_witness(n: usize, d: usize, exact_cap: u64) -> Result<WitnessReport, SwitchError> {
    let (ef_closed, ent_closed) = witness_closed_forms(n, d);
    let (total, with_edge, creating) = witness_counts(n, d)?;
    let edge_fraction = Rat::new(BigInt::from(with_edge), BigInt::from(total));
    let nd = (n * d) as f64;
    let dirichlet_exact =
        2.0 * 2.0_f64.ln() / (nd * (nd - 1.0)) * (creating as f64) / (total as f64);
    let dirichlet_bound = 2.0 * 2.0_f64.ln() / ((n * n) as f64);

    let (ef_exact, ent_exact, dirichlet_chain) = if total <= exact_cap as u128 {
        let chain = build_qu(n, d, exact_cap)?;
        let graphs = enumerate_simple(n, d, exact_cap)?;
        let f = witness_function(&graphs);
        (
            Some(expectation(&chain, f.values())),
            Some(entropy(&chain, &f)?),
            Some(dirichlet_mlsi(&chain, &f)?),
        )
    } else {
        (None, None, None)
    };

    let ratio = ent_closed / dirichlet_exact;
    Ok(WitnessReport {
        n,
        d,
        ef_closed,
        ent_closed,
        dirichlet_bound,
        dirichlet_exact,
        ef_exact,
        ent_exact,
        dirichlet_chain,
        edge_fraction,
        ratio,
        ratio_per_nd: ratio / nd,
    })
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Summary of one simulated trajectory.
#[derive(Clone, Debug)]
pub struct TrajectorySummary {
    /// (step, number of diagonal edges) at each requested checkpoint.
    pub diagonal_counts: Vec<(u64, u32)>,
    /// Accepted switchings / total steps.
    pub accepted: u64,
    pub steps: u64,
    /// Continuous time per discrete step under the uniformized embedding
    /// (the total attempt rate of Q_u is exactly 1, so this is 1).
    pub time_per_step: f64,
}

/// Mutable simulation state: edge slots for O(1) pair sampling plus the
/// multiplicity matrix for O(1) validity checks.
struct SimState {
    n: usize,
    mult: Vec<u8>,
    slots: Vec<(u8, u8)>,
}

impl SimState {
    fn new(g0: &BipMultiGraph) -> Self {
        let n = g0.n();
        let mut slots = Vec::with_capacity(n * g0.d());
        for i in 0..n {
            for j in 0..n {
                for _ in 0..g0.get(i, j) {
                    slots.push((i as u8, j as u8));
                }
            }
        }
        SimState { n, mult: g0.mult().to_vec(), slots }
    }

    /// One uniform pair attempt; returns whether the switching was applied.
    fn step(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let m = self.slots.len();
        let a = rng.gen_range(0..m);
        let b = {
            let x = rng.gen_range(0..m - 1);
            if x >= a {
                x + 1
            } else {
                x
            }
        };
        let (i, j) = self.slots[a];
        let (i2, j2) = self.slots[b];
        if i == i2 || j == j2 {
            return false;
        }
        let (iu, ju, i2u, j2u) = (i as usize, j as usize, i2 as usize, j2 as usize);
        if self.mult[iu * self.n + j2u] >= 1 || self.mult[i2u * self.n + ju] >= 1 {
            return false;
        }
        self.mult[iu * self.n + ju] -= 1;
        self.mult[i2u * self.n + j2u] -= 1;
        self.mult[iu * self.n + j2u] += 1;
        self.mult[i2u * self.n + ju] += 1;
        self.slots[a] = (i, j2);
        self.slots[b] = (i2, j);
        true
    }

    fn diagonal_count(&self) -> u32 {
        (0..self.n).map(|i| (self.mult[i * self.n + i] >= 1) as u32).sum()
    }
}

/// Simulates the embedded discrete switch chain from `g0`, reporting the
/// diagonal statistic at the requested checkpoints. Stream `traj` of the
/// seeded RNG keeps parallel trajectories reproducible.
pub fn simulate(
    g0: &BipMultiGraph,
    steps: u64,
    seed: u64,
    traj: u64,
    checkpoints: &[u64],
) -> Result<TrajectorySummary, SwitchError> {
    if !g0.is_simple() {
        return Err(SwitchError::InvalidStart("start graph must be simple".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(traj);
    let mut state = SimState::new(g0);
    let mut cps: Vec<u64> = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    let mut out = Vec::with_capacity(cps.len());
    let mut cp_iter = cps.iter().peekable();
    let mut accepted = 0u64;
    for t in 0..=steps {
        while cp_iter.peek() == Some(&&t) {
            out.push((t, state.diagonal_count()));
            cp_iter.next();
        }
        if t < steps && state.step(&mut rng) {
            accepted += 1;
        }
    }
    Ok(TrajectorySummary {
        diagonal_counts: out,
        accepted,
        steps,
        time_per_step: 1.0,
    })
}

/// Mean/variance trace of the diagonal statistic D_T over many trajectories.
#[derive(Clone, Debug)]
pub struct StatPoint {
    pub t: u64,
    pub mean: f64,
    pub var: f64,
    /// One-sided 99% lower confidence bound on mean(D_T)/n against the
    /// survival bound (1 - 2/(nd))^T.
    pub survival_bound: f64,
    pub survival_ok: bool,
    /// Whether the statistic still separates from the stationary mean d at
    /// 99% confidence.
    pub separated: bool,
}

#[derive(Clone, Debug)]
pub struct StatReport {
    pub n: usize,
    pub d: usize,
    pub runs: usize,
    pub points: Vec<StatPoint>,
    /// Stationary mean of D under the uniform measure (exact when the space
    /// is enumerable, else the asymptotic value d).
    pub stationary_mean: f64,
}

/// Runs `runs` seeded trajectories from the circulant start and summarizes
/// D_T along the grid.
pub fn distinguishing_statistic_report(
    n: usize,
    d: usize,
    t_grid: &[u64],
    runs: usize,
    seed: u64,
) -> Result<StatReport, SwitchError> {
    let g0 = circulant(n, d);
    let max_t = t_grid.iter().copied().max().unwrap_or(0);
    let mut samples: Vec<Vec<u32>> = vec![Vec::with_capacity(runs); t_grid.len()];
    let mut sorted_grid: Vec<u64> = t_grid.to_vec();
    sorted_grid.sort_unstable();
    sorted_grid.dedup();
    for r in 0..runs {
        let traj = simulate(&g0, max_t, seed, r as u64, &sorted_grid)?;
        for (k, &(_, count)) in traj.diagonal_counts.iter().enumerate() {
            samples[k].push(count);
        }
    }
    let stationary_mean = exact_stationary_diag_mean(n, d).unwrap_or(d as f64);
    let z99 = 2.576;
    let points = sorted_grid
        .iter()
        .zip(&samples)
        .map(|(&t, xs)| {
            let m = xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
            let var = xs
                .iter()
                .map(|&x| (x as f64 - m).powi(2))
                .sum::<f64>()
                / (xs.len().saturating_sub(1).max(1)) as f64;
            let se = (var / xs.len() as f64).sqrt();
            let bound = (1.0 - 2.0 / (n * d) as f64).powi(t as i32);
            StatPoint {
                t,
                mean: m,
                var,
                survival_bound: bound,
                survival_ok: m / n as f64 + z99 * se / n as f64 >= bound,
                separated: m - stationary_mean > z99 * se,
            }
        })
        .collect();
    Ok(StatReport { n, d, runs, points, stationary_mean })
}

/// Exact E_pi_u[D] for enumerable spaces.
pub fn exact_stationary_diag_mean(n: usize, d: usize) -> Option<f64> {
    if n > 6 {
        return None;
    }
    let graphs = enumerate_simple(n, d, 1_000_000).ok()?;
    let total: u64 = graphs
        .iter()
        .map(|g| (0..n).filter(|&i| g.get(i, i) >= 1).count() as u64)
        .sum();
    Some(total as f64 / graphs.len() as f64)
}

/// Empirical mixing-trend report: for each n, the first checkpoint where the
/// mean diagonal excess has dropped to a quarter of its initial value, fitted
/// against a * n log n.
#[derive(Clone, Debug)]
pub struct TrendReport {
    pub points: Vec<(usize, f64)>,
    pub a: f64,
    pub residuals: Vec<f64>,
}

pub fn mixing_trend(ns: &[usize], d: usize, runs: usize, seed: u64) -> Result<TrendReport, SwitchError> {
    let mut points = Vec::new();
    for &n in ns {
        let max_t = (40.0 * (n as f64) * (n as f64).ln()) as u64;
        let step = (max_t / 80).max(1);
        let grid: Vec<u64> = (0..=80).map(|k| k * step).collect();
        let rep = distinguishing_statistic_report(n, d, &grid, runs, seed)?;
        let target = rep.stationary_mean + 0.25 * (n as f64 - rep.stationary_mean);
        let t_hat = rep
            .points
            .iter()
            .find(|p| p.mean <= target)
            .map(|p| p.t as f64)
            .unwrap_or(max_t as f64);
        points.push((n, t_hat));
    }
    // Least squares through the origin against x = n log n.
    let num: f64 = points.iter().map(|&(n, t)| t * (n as f64) * (n as f64).ln()).sum();
    let den: f64 = points
        .iter()
        .map(|&(n, _)| ((n as f64) * (n as f64).ln()).powi(2))
        .sum();
    let a = num / den;
    let residuals = points
        .iter()
        .map(|&(n, t)| t - a * (n as f64) * (n as f64).ln())
        .collect();
    Ok(TrendReport { points, a, residuals })
}
