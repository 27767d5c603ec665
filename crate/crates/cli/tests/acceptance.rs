//! Acceptance gate: eleven numbered criteria, one summary line each.
//!
//! Each test prints `criterion N: PASS/FAIL/REPORTED — detail` (visible with
//! `--nocapture`; always visible on failure) and asserts the PASS parts.
//! Tolerances are pinned here; calibrated gates come from the frozen
//! constants in `mlsi-core/data/derived_constants.json`.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mlsi_core::aux_chain::{aux_exactness, build_aux_chain, build_flow, congestion_lemma_check, sn_census, AuxExactness};
use mlsi_core::chain::{dirichlet_mlsi, regularity_constants, tv_mixing_time};
use mlsi_core::constants::{frozen, DERIVE_SEED};
use mlsi_core::flows::{congestion_a, identity_flow, telescope_check, telescope_envelope, validate_flow};
use mlsi_core::graph_space::{enumerate_simple, simple_mass};
use mlsi_core::oracles::{count_line_sum_matrices, tv_curve_oracle};
use mlsi_core::regularize::{
    check_dirichlet_contraction, check_entropy_preservation, regularize, seeded_positive_functions,
};
use mlsi_core::scalar::rat_to_f64;
use mlsi_core::switch_chain::{
    build_qu, check_qc_exact, check_qu_exact, distinguishing_statistic_report, mixing_trend,
    mlsi_lower_witness,
};

const CAP: u64 = 1_000_000;
const SEED: u64 = DERIVE_SEED;

fn aux_suite() -> &'static [AuxExactness; 3] {
    static SUITE: OnceLock<[AuxExactness; 3]> = OnceLock::new();
    SUITE.get_or_init(|| {
        [4, 5, 6].map(|n| aux_exactness(n, 2, 1.0, CAP).expect("exactness computes"))
    })
}

#[test]
fn criterion_01_exactness_suite() {
    let start = Instant::now();
    let mut detail = String::new();
    for n in [4usize, 5, 6] {
        let qu = check_qu_exact(n, 2, CAP).unwrap();
        assert!(qu.symmetric && qu.connected, "Q_u structure at n={n}");
        let qc = check_qc_exact(n, 2, CAP).unwrap();
        assert_eq!(qc.balance_violations, 0, "Q_c detailed balance at n={n}");
        assert!(qc.pi_sums_to_one, "pi_BC sums to one at n={n}");
        detail.push_str(&format!("({n},2): {} simple / {} multi; ", qu.states, qc.states));
    }
    for ex in aux_suite() {
        assert_eq!(ex.beta_norm_violations, 0, "beta normalization at n={}", ex.n);
        assert_eq!(ex.conservation_mismatches, 0, "flow conservation at n={}", ex.n);
        assert!(ex.symmetry_ok && ex.row_mass_ok, "generator structure at n={}", ex.n);
    }
    // Full rational residual check against the materialized chain where the
    // flow fits comfortably in memory.
    for n in [4usize, 5] {
        let aux = build_aux_chain(n, 2, Some(1), CAP).unwrap();
        let qu = build_qu(n, 2, CAP).unwrap();
        let fl = build_flow(n, 2, Some(1), CAP).unwrap();
        let res = validate_flow(&fl.flow, &qu, &aux.chain).unwrap();
        assert!(res.all_zero, "rational flow residuals at n={n}");
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 300.0, "exactness suite took {secs:.1}s, budget is 300s");
    println!("criterion 1: PASS — zero residuals at (4,2),(5,2),(6,2) in {secs:.1}s; {detail}");
}

#[test]
fn criterion_02_enumeration_counts() {
    let c4 = enumerate_simple(4, 2, CAP).unwrap().len() as u64;
    let c5 = enumerate_simple(5, 2, CAP).unwrap().len() as u64;
    assert_eq!(c4, 90);
    assert_eq!(c5, 2040);
    assert_eq!(count_line_sum_matrices(4, 2, 1), 90);
    assert_eq!(count_line_sum_matrices(5, 2, 1), 2040);
    println!("criterion 2: PASS — simple-space sizes 90 (n=4) and 2040 (n=5) match the counting oracle");
}

#[test]
fn criterion_03_witness_band() {
    let cal = frozen();
    let (lo, hi) = cal.witness_band;
    let mut ratios = Vec::new();
    for n in [4usize, 5, 6, 7] {
        // Exact (chain-built) mode engages at n <= 6; n = 7 streams counts.
        let w = mlsi_lower_witness(n, 2, CAP).unwrap();
        if n <= 6 {
            let ef = w.ef_exact.expect("exact mode");
            let ent = w.ent_exact.expect("exact mode");
            let dch = w.dirichlet_chain.expect("exact mode");
            assert!((ef - w.ef_closed).abs() <= 1e-12, "E[f] closed form at n={n}");
            assert!((ent - w.ent_closed).abs() <= 1e-12, "Ent closed form at n={n}");
            assert!((dch - w.dirichlet_exact).abs() <= 1e-12, "Dirichlet closed form at n={n}");
        }
        assert!(
            w.ratio_per_nd >= lo && w.ratio_per_nd <= hi,
            "witness ratio/(nd) {} outside frozen band [{lo},{hi}] at n={n}",
            w.ratio_per_nd
        );
        ratios.push(w.ratio_per_nd);
    }
    println!("criterion 3: PASS — closed forms match to 1e-12 (n=4..6); ratio/(nd) = {ratios:?} within [{lo:.4},{hi:.4}]");
}

#[test]
fn criterion_04_simple_mass_trend() {
    let target = (-0.5f64).exp();
    let ratios: Vec<f64> = (4..=7)
        .map(|n| rat_to_f64(&simple_mass(n, 2).unwrap()) / target)
        .collect();
    // Monotone trend toward 1 (distance to 1 non-increasing).
    for w in ratios.windows(2) {
        assert!(
            (w[1] - 1.0).abs() <= (w[0] - 1.0).abs() + 1e-12,
            "trend toward 1 broken: {ratios:?}"
        );
    }
    let last = *ratios.last().unwrap();
    if (0.25..=4.0).contains(&last) {
        println!("criterion 4: PASS — mass/e^(-1/2) = {ratios:?}, monotone toward 1, within factor 4 at n=7");
        assert!((0.5 / 4.0..=2.0 * 4.0).contains(&last));
    } else {
        println!("criterion 4: REPORTED — mass/e^(-1/2) = {ratios:?}, outside factor 4 at n=7");
    }
}

#[test]
fn criterion_05_s_neighborhood_census() {
    let mut parts = Vec::new();
    for k in [1u32, 2] {
        let c = sn_census(6, 2, k, CAP).unwrap();
        assert!(c.sources > 0, "Cat({k}) nonempty at (6,2)");
        assert!(c.reverse_ok, "reverse bound fails at k={k}: max {} > {}", c.max_reverse, c.reverse_bound);
        parts.push(format!(
            "k={k}: sizes [{},{}] vs bracket [{},{}] ({}), reverse {} <= {}",
            c.min_size,
            c.max_size,
            c.bracket_lo,
            c.bracket_hi,
            if c.all_within_bracket { "within" } else { "outside" },
            c.max_reverse,
            c.reverse_bound
        ));
    }
    println!(
        "criterion 5: PASS (reverse bound) / REPORTED (bracket) — {}",
        parts.join("; ")
    );
}

#[test]
fn criterion_06_endpoint_map_suite() {
    let mut fallback = Vec::new();
    for ex in aux_suite() {
        assert_eq!(
            ex.psi_violations, 0,
            "matched endpoint map violates bijection/involution/adjacency at n={}",
            ex.n
        );
        fallback.push((ex.n, ex.perfect_pairs, ex.fallback_pairs));
    }
    println!(
        "criterion 6: PASS — zero violations on matched pairs at n=4..6; (n, matched, product-form fallback) = {fallback:?}"
    );
}

#[test]
fn criterion_07_telescoping() {
    let cal = frozen();
    let c = cal.telescope_c;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let rs = [2.0, std::f64::consts::E, 10.0];
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    while checked < 100_000 {
        let r = rs[rng.gen_range(0..rs.len())];
        let t = rng.gen_range(1..=12usize);
        let mut seq = vec![rng.gen_range(0.1..10.0f64)];
        for _ in 0..t {
            let prev = *seq.last().unwrap();
            let factor = r.powf(rng.gen_range(-1.0..=1.0f64));
            seq.push(prev * factor);
        }
        let Ok(out) = telescope_check(&seq, r) else { continue };
        if out.rhs_sum <= 0.0 {
            continue;
        }
        let normalized = (out.lhs / out.rhs_sum) / (1.0 + ((t as f64) - 1.0).powi(2) * r.ln());
        worst = worst.max(normalized);
        assert!(
            out.lhs <= telescope_envelope(c, t, r) * out.rhs_sum + 1e-12,
            "telescoping envelope violated: T={t} r={r} normalized {normalized} > C={c}"
        );
        checked += 1;
    }
    println!("criterion 7: PASS — {checked} sequences, worst normalized factor {worst:.6} <= frozen C {c:.6}");
}

#[test]
fn criterion_08_regularization_lemmas() {
    let cal = frozen();
    let chain = build_qu(4, 2, CAP).unwrap();
    let ensemble = seeded_positive_functions(chain.n(), 10_000, SEED);
    let mut cmax = 0.0f64;
    let mut pmin = f64::MAX;
    for f in &ensemble {
        if let Some(r) = check_dirichlet_contraction(&chain, f).unwrap().ratio {
            assert!(r <= cal.dirichlet_contraction_bound, "contraction ratio {r} above frozen bound");
            cmax = cmax.max(r);
        }
        if let Some(r) = check_entropy_preservation(&chain, f).unwrap().ratio {
            assert!(r >= cal.entropy_preservation_floor, "preservation ratio {r} below frozen floor");
            pmin = pmin.min(r);
        }
    }
    // Identity case: a function that is already Upsilon-regular is a fixed
    // point of regularization, so both lemma ratios are exactly 1.
    let ups = regularity_constants(&chain).upsilon_f();
    let f_reg = regularize(&chain, &ensemble[0], ups).unwrap().f_reg;
    let again = regularize(&chain, &f_reg, ups).unwrap().f_reg;
    assert_eq!(f_reg.values(), again.values(), "regularization must be idempotent");
    let cid = check_dirichlet_contraction(&chain, &f_reg).unwrap();
    let pid = check_entropy_preservation(&chain, &f_reg).unwrap();
    assert_eq!(cid.lhs, cid.rhs, "identity case: Dirichlet values must be equal");
    assert_eq!(pid.lhs, pid.rhs, "identity case: entropies must be equal");
    println!(
        "criterion 8: PASS — 10000 functions: contraction max {cmax:.6} <= {:.6}, preservation min {pmin:.6} >= {:.6}; identity cases exact",
        cal.dirichlet_contraction_bound, cal.entropy_preservation_floor
    );
}

#[test]
fn criterion_09_comparison_pipeline() {
    let cal = frozen();
    let qu = build_qu(4, 2, CAP).unwrap();
    // Identity flow: every edge carries itself, so the congestion is 1.
    let idf = identity_flow(&qu);
    let a_id = congestion_a(&idf, &qu, 2.0);
    assert!((a_id - 1.0).abs() <= 1e-12, "identity-flow congestion {a_id} != 1");

    let aux = build_aux_chain(4, 2, Some(1), CAP).unwrap();
    let fl = build_flow(4, 2, Some(1), CAP).unwrap();
    let a = congestion_a(&fl.flow, &qu, 2.0);
    assert!(a.is_finite() && a > 0.0);
    let bound_factor = 2.0 * cal.telescope_c * a;
    assert!(bound_factor.is_finite());

    // Per-function comparison: the auxiliary Dirichlet form is controlled by
    // the switch-chain Dirichlet form through the flow congestion.
    let ensemble = seeded_positive_functions(qu.n(), 500, SEED);
    let mut worst: f64 = 0.0;
    for f in &ensemble {
        let e_aux: f64 = dirichlet_mlsi(&aux.chain, f).unwrap();
        let e_qu: f64 = dirichlet_mlsi(&qu, f).unwrap();
        if e_qu > 0.0 {
            worst = worst.max(e_aux / e_qu);
            assert!(
                e_aux <= bound_factor * e_qu * (1.0 + 1e-9),
                "comparison inequality fails: ratio {} > 2CA = {bound_factor}",
                e_aux / e_qu
            );
        }
    }

    let cong = congestion_lemma_check(4, 2, Some(1), 1.0, CAP).unwrap();
    assert!(cong.perfect_bound_ok, "perfect-pair component ratio exceeds its bound");
    assert!(cong.perfect_max_ratio <= 4.0);
    println!(
        "criterion 9: PASS — identity A = 1; finite bound 2CA = {bound_factor:.4} (worst ensemble ratio {worst:.4}); perfect component {:.4} <= 4",
        cong.perfect_max_ratio
    );
}

#[test]
fn criterion_10_mixing() {
    // Exact TV mixing at (4,2) against the dense spectral oracle.
    let qu = build_qu(4, 2, CAP).unwrap();
    let grid: Vec<f64> = (0..=800).map(|k| k as f64 * 0.125).collect();
    let mix = tv_mixing_time(&qu, 0.25, &grid, None).unwrap();
    let oracle = tv_curve_oracle(&qu, &grid);
    let sup_diff = mix
        .curve
        .iter()
        .zip(&oracle)
        .map(|(&(_, a), &b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    assert!(sup_diff <= 1e-8, "TV curve disagrees with the oracle by {sup_diff}");

    // Simulated mixing-time proxy trend against a * n log n.
    let trend = mixing_trend(&[8, 12, 16, 20], 2, 200, SEED).unwrap();
    assert!(trend.a.is_finite() && trend.a > 0.0);

    // Survival inequality for the diagonal statistic at n = 20, T <= 100.
    let t_grid: Vec<u64> = (0..=10).map(|k| k * 10).collect();
    let rep = distinguishing_statistic_report(20, 2, &t_grid, 10_000, SEED).unwrap();
    let violations = rep.points.iter().filter(|p| !p.survival_ok).count();
    assert_eq!(violations, 0, "survival bound violated at {violations} grid points");

    println!(
        "criterion 10: PASS — exact t_mix(1/4) = {} (oracle sup diff {sup_diff:.2e}); trend fit a = {:.3} with residuals {:?}; survival bound holds at n=20 over {} points",
        mix.t_mix, trend.a, trend.residuals.iter().map(|r| (r * 10.0).round() / 10.0).collect::<Vec<_>>(), rep.points.len()
    );
}

#[test]
fn criterion_11_reproducibility() {
    let dir = std::env::temp_dir().join(format!("mlsi-accept-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let path = dir.join(format!("verify-{run}.json"));
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_mlsi"))
            .args([
                "verify-all", "--n", "4", "--d", "2", "--m", "1", "--seed", "7", "--out",
            ])
            .arg(&path)
            .status()
            .expect("binary runs");
        assert!(status.success(), "verify-all exited with {status}");
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1], "verify-all reports differ between identical runs");
    let _ = std::fs::remove_dir_all(&dir);
    println!(
        "criterion 11: PASS — verify-all twice with seed 7 produced byte-identical reports ({} bytes)",
        outputs[0].len()
    );
}
