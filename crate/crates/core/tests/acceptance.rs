//! Acceptance suite: every shipped claim, one test per criterion, each
//! printing a single PASS/FAIL line with the measured values and the bound
//! it was judged against. Run with
//!
//!     cargo test -p tsrvlab-core --test acceptance -- --nocapture
//!
//! Seeds are the pilot-frozen defaults; see tests/pilot.rs for the survey
//! that selected them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tsrvlab_core::contaminate::ContaminationKernel;
use tsrvlab_core::estimators::{grid_qv, regular_allocation, select_k, tsrv};
use tsrvlab_core::experiments::*;
use tsrvlab_core::localtime::{crossing_statistic, tanaka_local_time, thm2_limit, thm3_limit};
use tsrvlab_core::localtime::{LocalTimeMethod, LocalTimeProfile};
use tsrvlab_core::math::{folded_normal_abs_mean, normal_pdf};
use tsrvlab_core::moments::{band_probabilities, f_bar, f_prime};
use tsrvlab_core::simulate::{generate_master_path, MasterPath, ProcessModel, SamplingGrid};

/// Seed for the noise-then-round CLT design, frozen from the same pilot
/// survey as the experiment defaults.
const THM1_NOISE_ROUND_SEED: u64 = 304;

fn verdict(name: &str, pass: bool, detail: String) {
    println!(
        "acceptance {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{name}: {detail}");
}

fn report_line(name: &str, report: &ExperimentReport) {
    let detail = report
        .summary
        .criteria
        .iter()
        .map(|c| format!("{}={:.4e} [{}] {}", c.name, c.value, c.threshold, c.pass))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(name, report.all_pass(), detail);
}

#[test]
fn criterion_1_thm1_clt_additive() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Thm1);
    assert_eq!(cfg.kernel, KernelKind::Additive);
    assert_eq!(cfg.gamma, 0.0005);
    assert_eq!(cfg.n, 23_400);
    assert_eq!(cfg.replications, 500);
    assert_eq!(cfg.c, 1.0);
    let report = run_thm1_clt(&cfg).unwrap();
    report_line("1 thm1-clt-additive", &report);
}

#[test]
fn criterion_2_thm1_clt_noise_round() {
    let mut cfg = ExperimentConfig::defaults(ExperimentKind::Thm1);
    cfg.kernel = KernelKind::NoiseRound;
    cfg.gamma = 0.005;
    cfg.alpha = 0.01;
    cfg.seed = THM1_NOISE_ROUND_SEED;
    let report = run_thm1_clt(&cfg).unwrap();
    report_line("2 thm1-clt-noise-round", &report);
}

#[test]
fn criterion_3_fig3_sweep() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Fig3);
    assert_eq!(cfg.gamma_sweep.first(), Some(&0.0002));
    assert_eq!(cfg.gamma_sweep.last(), Some(&0.006));
    assert!(cfg.gamma_sweep.contains(&0.005));
    let report = run_fig3_sweep(&cfg).unwrap();
    // reference value from the daily design: sigma^2 T ~ 1.5873e-4
    let reference = report.summary.stats["reference_qv"];
    assert!((reference - 1.5873e-4).abs() / 1.5873e-4 < 1e-4);
    report_line("3 fig3-sweep", &report);
}

#[test]
fn criterion_4_thm2_blowup_limit() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Thm2);
    assert_eq!(cfg.gamma_sweep, vec![2e-3, 5e-4, 2e-4, 5e-5]);
    let report = run_thm2_sweep(&cfg).unwrap();
    // relative errors shrink across the whole sweep, not just its tail
    let errs: Vec<f64> = report.rows.iter().map(|r| r[3]).collect();
    let full_trend = errs.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        "4a thm2-full-sweep-trend",
        full_trend,
        format!("rel errors {errs:?} non-increasing"),
    );
    report_line("4b thm2-blowup-limit", &report);
}

#[test]
fn criterion_5_thm3_scaling() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Thm3);
    assert!(*cfg.n_sweep.last().unwrap() >= 150_000);
    let report = run_thm3_scaling(&cfg).unwrap();
    report_line("5 thm3-scaling", &report);
}

#[test]
fn criterion_6_eq29_duality() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Eq29);
    assert_eq!(cfg.gamma, 0.0005);
    let report = run_eq29_relation(&cfg).unwrap();
    let factor = report.summary.stats["factor"];
    let n_bar = report.summary.stats["n_bar"];
    let factor_ok = (factor - 0.59).abs() <= 0.005 && (n_bar - 27.61).abs() <= 0.01;
    verdict(
        "6a eq29-scale-factor",
        factor_ok,
        format!("factor={factor:.4} (expect ~0.59), n_bar={n_bar:.2} (expect ~27.61)"),
    );
    report_line("6b eq29-duality", &report);
}

#[test]
fn criterion_8_fig2_table() {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Fig2);
    let report = emit_fig2(&cfg).unwrap();
    assert_eq!(report.rows.len(), cfg.n + 1);
    report_line("8 fig2-table", &report);
}

// --- criterion 7: the fast-tier oracle suite ---

#[test]
fn criterion_7a_grid_qv_brute_force() {
    fn brute(z1: &[f64], z2: &[f64], idx: &[usize]) -> f64 {
        let a: Vec<f64> = idx.iter().map(|&i| z1[i]).collect();
        let b: Vec<f64> = idx.iter().map(|&i| z2[i]).collect();
        (1..a.len()).map(|j| (a[j] - a[j - 1]) * (b[j] - b[j - 1])).sum()
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.random_range(2..=51);
        let z1: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z2: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut idx: Vec<usize> = (0..len).filter(|_| rng.random_bool(0.5)).collect();
        if idx.is_empty() {
            idx.push(0);
        }
        let a = grid_qv(&z1, &z2, &idx).unwrap();
        let b = brute(&z1, &z2, &idx);
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    verdict(
        "7a grid-qv-brute-force",
        worst <= 1e-12,
        format!("worst rel gap {worst:.2e} over 1000 instances (bound 1e-12)"),
    );
}

#[test]
fn criterion_7b_allocation_partition() {
    let mut ok = true;
    for n in 2..=12usize {
        for k in 1..=n {
            let alloc = regular_allocation(n, k).unwrap();
            let mut seen = vec![false; n + 1];
            let mut increments = 0usize;
            for j in 0..k {
                let mut count = 0usize;
                for idx in alloc.subgrid(j) {
                    ok &= !seen[idx];
                    seen[idx] = true;
                    count += 1;
                }
                increments += count - 1;
            }
            ok &= seen.iter().all(|&s| s);
            ok &= increments == n + 1 - k;
            let (num, den) = alloc.n_bar_ratio();
            ok &= num == (n - k + 1) as u64 && den == k as u64;
        }
    }
    verdict(
        "7b allocation-partition",
        ok,
        "exhaustive partition + n_bar identity for all n <= 12".into(),
    );
}

#[test]
fn criterion_7c_hand_examples() {
    let r = tsrv(&[0.0, 1.0, 0.0, 1.0, 0.0], 2, false).unwrap();
    let k = select_k(23_400, 1.0).unwrap();
    let pass = r.tsrv == -1.5 && k == 818;
    verdict(
        "7c hand-examples",
        pass,
        format!("tsrv((0,1,0,1,0), K=2) = {} (expect -1.5); select_k(23400, 1) = {k} (expect 818)", r.tsrv),
    );
}

#[test]
fn criterion_7d_f_prime_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7004);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let alpha = [0.002, 0.005, 0.01, 0.02][rng.random_range(0..4)];
        let k = rng.random_range(20u64..500);
        let width = ((k as f64 + 0.5) / (k as f64 - 0.5)).ln();
        let gamma = width * rng.random_range(0.05..1.0);
        let x = ((k as f64 + 0.5) * alpha).ln() + rng.random_range(-3.0..3.0) * gamma;
        let kernel = ContaminationKernel::noise_then_round(gamma, alpha).unwrap();
        let analytic = f_prime(&kernel, x).unwrap();
        let h = (1e-3 * gamma).max(1e-9);
        let fd = (f_bar(&kernel, x + h) - f_bar(&kernel, x - h)) / (2.0 * h);
        worst = worst.max((analytic - fd).abs() / analytic.abs());
    }
    verdict(
        "7d f-prime-vs-finite-difference",
        worst <= 1e-5,
        format!("worst rel gap {worst:.2e} over 100 draws (bound 1e-5)"),
    );
}

#[test]
fn criterion_7e_small_gamma_derivative_limit() {
    let alpha = 0.01f64;
    let gamma = 1e-5;
    let x = (100.5 * alpha).ln();
    let kernel = ContaminationKernel::noise_then_round(gamma, alpha).unwrap();
    let value = gamma * f_prime(&kernel, x).unwrap();
    let limit = normal_pdf(0.0) * (101.0f64 / 100.0).ln();
    let rel = (value - limit).abs() / limit;
    verdict(
        "7e small-gamma-derivative-limit",
        rel <= 1e-3,
        format!("gamma*f' = {value:.6e} vs (1/sqrt(2pi)) log(101/100) = {limit:.6e}, rel {rel:.2e} (bound 1e-3)"),
    );
}

#[test]
fn criterion_7f_band_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(7006);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let alpha = [0.005, 0.01, 0.05][rng.random_range(0..3)];
        let price: f64 = rng.random_range(0.02..20.0);
        let gamma = rng.random_range(1e-5..0.05);
        let d = band_probabilities(price.ln(), gamma, alpha, 1e-12).unwrap();
        worst = worst.max((d.total_mass() - 1.0).abs());
        worst = worst.max(if d.tail > 1e-12 { d.tail } else { 0.0 });
    }
    verdict(
        "7f band-normalization",
        worst <= 1e-12,
        format!("worst |1 - total mass| and excess tail {worst:.2e} over 200 draws (bound 1e-12)"),
    );
}

#[test]
fn criterion_7g_tanaka_folded_normal_oracle() {
    let m = 40_000u64;
    let n = 20_000usize;
    let levels = [-0.3, -0.15, 0.0, 0.15, 0.3];
    let model = ProcessModel::constant(0.0, 1.0, 0.0).unwrap();
    let grid = SamplingGrid::new(n, 1.0).unwrap();
    let sums: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|s| {
            let path = generate_master_path(&model, grid, 1, 2225, s).unwrap();
            let mut out = [0.0; 5];
            for (j, &a) in levels.iter().enumerate() {
                out[j] = tanaka_local_time(path.values(), a);
            }
            out
        })
        .reduce(
            || [0.0; 5],
            |mut acc, x| {
                for j in 0..5 {
                    acc[j] += x[j];
                }
                acc
            },
        )
        .to_vec();
    let mut worst: f64 = 0.0;
    for (j, &a) in levels.iter().enumerate() {
        let mean = sums[j] / m as f64;
        let target = folded_normal_abs_mean(0.0, 1.0, a) - a.abs();
        worst = worst.max((mean - target).abs() / target);
    }
    verdict(
        "7g tanaka-folded-normal",
        worst <= 0.02,
        format!("worst rel gap {worst:.4} at 5 levels, M = {m} (bound 0.02)"),
    );
}

#[test]
fn criterion_7h_crossing_tanaka_duality() {
    let model = ProcessModel::constant(0.0, 1.0, 0.0).unwrap();
    let grid = SamplingGrid::new(1_000_000, 1.0).unwrap();
    let path = generate_master_path(&model, grid, 1, 777, 1).unwrap();
    let tanaka = tanaka_local_time(path.values(), 0.0);
    let (_, normalized) = crossing_statistic(path.values(), 0.0);
    let via_crossings = (PI / 2.0).sqrt() * normalized;
    let rel = (via_crossings - tanaka).abs() / tanaka;
    verdict(
        "7h crossing-tanaka-duality",
        rel <= 0.10,
        format!("crossings {via_crossings:.4} vs tanaka {tanaka:.4}, rel {rel:.4} at n = 1e6 (bound 0.10)"),
    );
}

#[test]
fn criterion_7i_limit_coefficient_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7009);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k_lo = rng.random_range(1u64..200);
        let len = rng.random_range(1usize..12);
        let l: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..1e-2)).collect();
        let levels: Vec<f64> = (0..len)
            .map(|j| ((k_lo + j as u64) as f64 + 0.5) * 0.01)
            .map(f64::ln)
            .collect();
        let profile = LocalTimeProfile {
            alpha: 0.01,
            k_lo,
            k_hi: k_lo + len as u64 - 1,
            levels,
            l,
            method: LocalTimeMethod::Tanaka,
            source_grid: 1000,
            clip_slack: 0.0,
        };
        let sigma = rng.random_range(0.05..2.0);
        let horizon = rng.random_range(0.001..2.0);
        let lhs = thm3_limit(&profile, sigma, horizon).unwrap();
        let rhs = 2.0 * 2.0f64.sqrt() / (sigma * horizon.sqrt()) * thm2_limit(&profile);
        if rhs != 0.0 {
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    verdict(
        "7i limit-coefficient-identity",
        worst <= 1e-14,
        format!("worst rel gap {worst:.2e} over 50 random profiles (identity 2*sqrt(2)/(sigma sqrt(T)))"),
    );
}

// Exercised alongside the criteria: a master path subsampled to the
// observation grid feeds the same estimator the CLI route uses.
#[test]
fn master_path_to_estimator_consistency() {
    let model = ProcessModel::constant(0.0, 0.2, 0.0).unwrap();
    let grid = SamplingGrid::new(23_400, 1.0 / 252.0).unwrap();
    let path: MasterPath = generate_master_path(&model, grid, 10, 9, 0).unwrap();
    let obs = path.observation_values();
    assert_eq!(obs.len(), 23_401);
    let k = select_k(23_400, 1.0).unwrap();
    let r = tsrv(&obs, k, false).unwrap();
    // latent series without noise: TSRV near sigma^2 T
    let target = 0.04 / 252.0;
    assert!((r.tsrv - target).abs() / target < 0.5, "tsrv = {}", r.tsrv);
}
