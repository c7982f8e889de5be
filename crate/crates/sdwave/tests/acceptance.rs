//! Acceptance suite: one test per shipped claim about the solver.
//!
//! Each test prints a single `ACCEPTANCE <n> PASS: ...` line with the
//! measured quantities (visible with `--nocapture`); the tolerance bands
//! are pinned in the assertions themselves.  Criteria cover deterministic
//! convergence orders, the discrete energy ledger, Monte-Carlo convergence
//! rates under two noise kernels, the exact second-moment law of a single
//! mode, the noise sampling infrastructure, covariance-sum diagnostics,
//! and pathwise time regularity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sdwave::config::parse_config;
use sdwave::experiment::{
    energy_audit, run_regularity_study, run_spatial_convergence, run_temporal_convergence,
    InitialData, RegularityStudy, SpatialStudy, TemporalStudy,
};
use sdwave::fem::{assemble_mass, assemble_stiffness, CoefVec, Mesh1D};
use sdwave::linalg::gen_sym_eig;
use sdwave::noise::{
    build_q_spec, coarsen_increments, hs_norm_partial, sample_mode_increments, QKind,
};
use sdwave::rng::{derive_seed, CounterRng};
use sdwave::runner::run_command;
use sdwave::scheme::{modal_exact_covariance, run_deterministic, FemState, Nonlinearity, SchemeConfig};

const PI: f64 = std::f64::consts::PI;

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    x.is_finite() && lo <= x && x <= hi
}

/// Smooth single-mode data, five dyadic meshes, tiny time step: both
/// solution components converge with order two in the mesh width.
#[test]
fn criterion_1_deterministic_spatial_order_two() {
    let report = run_spatial_convergence(&SpatialStudy {
        alpha: 1.0,
        t_final: 1.0,
        k: 1.0 / 4096.0,
        level_cells: vec![4, 8, 16, 32, 64],
        ref_cells: 128, // unused in exact-solution mode
        nonlinearity: Nonlinearity::Zero,
        noise: None,
        initial: InitialData::SineMode { mode: 1, amp_u: 1.0, amp_v: 0.0 },
        mc_samples: 1,
        seed: 42,
    })
    .unwrap();
    let (ru, rv) = (report.rate_u.global, report.rate_v.global);
    assert!(in_band(ru, 1.75, 2.25), "displacement spatial rate {ru} outside [1.75, 2.25]");
    assert!(in_band(rv, 1.75, 2.25), "velocity spatial rate {rv} outside [1.75, 2.25]");
    println!("ACCEPTANCE 1 PASS: deterministic spatial rates u = {ru:.3}, v = {rv:.3} (band [1.75, 2.25])");
}

/// Same data on a fine mesh with a ladder of time steps: the
/// displacement converges with order one in the step size.
#[test]
fn criterion_2_deterministic_temporal_order_one() {
    let report = run_temporal_convergence(&TemporalStudy {
        alpha: 1.0,
        t_final: 1.0,
        cells: 128,
        level_k: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
        ref_k: 1.0 / 4096.0, // unused in exact-solution mode
        nonlinearity: Nonlinearity::Zero,
        noise: None,
        initial: InitialData::SineMode { mode: 1, amp_u: 1.0, amp_v: 0.0 },
        mc_samples: 1,
        seed: 42,
    })
    .unwrap();
    let ru = report.rate_u.global;
    assert!(in_band(ru, 0.75, 1.25), "displacement temporal rate {ru} outside [0.75, 1.25]");
    println!("ACCEPTANCE 2 PASS: deterministic temporal rate u = {ru:.3} (band [0.75, 1.25])");
}

/// The unforced scheme never creates discrete energy: across random
/// initial states every step's energy ledger closes with nonnegative
/// slack, up to rounding relative to the initial energy.
#[test]
fn criterion_3_energy_dissipation_ledger() {
    let mesh = Mesh1D::new(32).unwrap();
    let cfg = SchemeConfig::new(mesh, 1.0, 0.02, 1.0, Nonlinearity::Zero).unwrap();
    let decomp = gen_sym_eig(&assemble_stiffness(&mesh), &assemble_mass(&mesh)).unwrap();
    let n = mesh.n_interior();
    let mut worst = f64::INFINITY;
    for m in 0..100u64 {
        let mut rng = CounterRng::new(derive_seed(42, m), 0);
        let initial = FemState {
            u: CoefVec::new((0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()),
            v: CoefVec::new((0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()),
            t: 0.0,
        };
        let traj = run_deterministic(&initial, &cfg).unwrap();
        let rows = energy_audit(&traj, 1.0, &decomp).unwrap();
        let e0 = rows[0].energy;
        assert!(e0 > 0.0);
        for row in &rows[1..] {
            let ratio = row.slack / e0;
            worst = worst.min(ratio);
            assert!(
                ratio >= -1e-10,
                "state {m}, step {}: slack/E0 = {ratio:.3e} < -1e-10",
                row.step
            );
        }
    }
    println!("ACCEPTANCE 3 PASS: 100 states x 50 steps, min slack/E0 = {worst:.3e} (bound -1e-10)");
}

fn stochastic_spatial_rates(kind: QKind) -> (f64, f64) {
    // The shared step must be far below the relaxation time of the finest
    // resolved modes (k * alpha * lambda_j << 1 near the level cutoffs):
    // a coarser step damps exactly the high-mode velocity content that
    // carries the spatial error, and the measured velocity slope then
    // reflects the time discretization instead of the mesh.
    let report = run_spatial_convergence(&SpatialStudy {
        alpha: 1.0,
        t_final: 1.0,
        k: 1.0 / 16384.0,
        level_cells: vec![2, 4, 8, 16, 32],
        ref_cells: 128,
        nonlinearity: Nonlinearity::Sine,
        noise: Some(build_q_spec(kind, 256).unwrap()),
        initial: InitialData::Zero,
        mc_samples: 100,
        seed: 42,
    })
    .unwrap();
    (report.rate_u.global, report.rate_v.global)
}

/// Monte-Carlo spatial rates against a fine-mesh reference driven by the
/// same noise paths: roughly 3/2 and 1/2 for space-time white noise,
/// roughly 2 and 1 under the smoother trace-class kernel.
#[test]
fn criterion_4_stochastic_spatial_rates() {
    let (wu, wv) = stochastic_spatial_rates(QKind::White);
    assert!(in_band(wu, 1.3, 1.7), "white-noise spatial rate u = {wu} outside [1.3, 1.7]");
    assert!(in_band(wv, 0.35, 0.85), "white-noise spatial rate v = {wv} outside [0.35, 0.85]");
    let (fu, fv) = stochastic_spatial_rates(QKind::Fractional { r: 0.5005 });
    assert!(in_band(fu, 1.7, 2.3), "trace-class spatial rate u = {fu} outside [1.7, 2.3]");
    assert!(in_band(fv, 0.75, 1.25), "trace-class spatial rate v = {fv} outside [0.75, 1.25]");
    println!(
        "ACCEPTANCE 4 PASS: stochastic spatial rates white (u {wu:.3}, v {wv:.3}), trace-class (u {fu:.3}, v {fv:.3})"
    );
}

fn stochastic_temporal_rates(kind: QKind) -> (f64, f64) {
    let report = run_temporal_convergence(&TemporalStudy {
        alpha: 1.0,
        t_final: 1.0,
        cells: 128,
        level_k: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
        ref_k: 1.0 / 4096.0,
        nonlinearity: Nonlinearity::Sine,
        noise: Some(build_q_spec(kind, 256).unwrap()),
        initial: InitialData::Zero,
        mc_samples: 100,
        seed: 42,
    })
    .unwrap();
    (report.rate_u.global, report.rate_v.global)
}

/// Monte-Carlo temporal rates against a small-step reference sharing
/// block-summed increments: roughly 3/4 and 1/4 for white noise, roughly
/// 1 and 1/2 under the trace-class kernel.
#[test]
fn criterion_5_stochastic_temporal_rates() {
    let (wu, wv) = stochastic_temporal_rates(QKind::White);
    assert!(in_band(wu, 0.55, 0.95), "white-noise temporal rate u = {wu} outside [0.55, 0.95]");
    assert!(in_band(wv, 0.1, 0.45), "white-noise temporal rate v = {wv} outside [0.1, 0.45]");
    let (fu, fv) = stochastic_temporal_rates(QKind::Fractional { r: 0.5005 });
    assert!(in_band(fu, 0.75, 1.2), "trace-class temporal rate u = {fu} outside [0.75, 1.2]");
    assert!(in_band(fv, 0.35, 0.65), "trace-class temporal rate v = {fv} outside [0.35, 0.65]");
    println!(
        "ACCEPTANCE 5 PASS: stochastic temporal rates white (u {wu:.3}, v {wv:.3}), trace-class (u {fu:.3}, v {fv:.3})"
    );
}

/// The closed-form single-mode covariance matches a brute-force
/// Euler-Maruyama simulation of the same linear SDE within Monte-Carlo
/// error (independent RNG stack, 100k paths).
#[test]
fn criterion_6_modal_covariance_against_brute_force() {
    let lambda = PI * PI;
    let (alpha, t, q) = (1.0, 1.0, 1.0);
    let exact = modal_exact_covariance(lambda, alpha, t, q).unwrap();

    let n_paths = 100_000usize;
    let k = 1e-4;
    let n_steps = (t / k).round() as usize;
    let sqrt_k = k.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_819);
    let (mut s_aa, mut s_bb, mut s_ab) = (0.0f64, 0.0, 0.0);
    let (mut q_aa, mut q_bb, mut q_ab) = (0.0f64, 0.0, 0.0);
    for _ in 0..n_paths {
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..n_steps {
            let xi: f64 = rng.sample(StandardNormal);
            let (a0, b0) = (a, b);
            a = a0 + k * b0;
            b = b0 - k * lambda * (a0 + alpha * b0) + sqrt_k * xi;
        }
        let (aa, bb, ab) = (a * a, b * b, a * b);
        s_aa += aa;
        s_bb += bb;
        s_ab += ab;
        q_aa += aa * aa;
        q_bb += bb * bb;
        q_ab += ab * ab;
    }
    let n = n_paths as f64;
    let check = |name: &str, sum: f64, sumsq: f64, exact_val: f64| -> f64 {
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0);
        let se = (var / n).sqrt();
        let dev = (mean - exact_val).abs();
        assert!(
            dev <= 3.0 * se,
            "{name}: |{mean:.6e} - {exact_val:.6e}| = {dev:.2e} > 3 SE = {:.2e}",
            3.0 * se
        );
        dev / se
    };
    let za = check("Var[a]", s_aa, q_aa, exact[0][0]);
    let zb = check("Var[b]", s_bb, q_bb, exact[1][1]);
    let zc = check("Cov[a,b]", s_ab, q_ab, exact[0][1]);
    println!(
        "ACCEPTANCE 6 PASS: modal covariance vs 100k-path simulation, deviations {za:.2}, {zc:.2}, {zb:.2} SE (limit 3)"
    );
}

/// Noise sampling infrastructure: block sums coarsen exactly, per-mode
/// increment variances match their kernel weights statistically, and a
/// fixed seed reproduces command output byte for byte.
#[test]
fn criterion_7_noise_infrastructure() {
    // Coarsening is exact block summation and composes.
    let q = build_q_spec(QKind::Fractional { r: 0.5005 }, 6).unwrap();
    let fine = sample_mode_increments(&q, 64, 1.0 / 64.0, 7).unwrap();
    let two_then_four = coarsen_increments(&coarsen_increments(&fine, 2).unwrap(), 4).unwrap();
    let by_eight = coarsen_increments(&fine, 8).unwrap();
    let mut max_dev: f64 = 0.0;
    for step in 0..by_eight.n_steps() {
        for j in 0..by_eight.n_modes() {
            let manual: f64 = (0..8).map(|i| fine.entry(8 * step + i, j)).sum();
            max_dev = max_dev.max((by_eight.entry(step, j) - manual).abs());
            max_dev = max_dev.max((two_then_four.entry(step, j) - by_eight.entry(step, j)).abs());
        }
    }
    assert!(max_dev <= 1e-12, "coarsening deviates from block sums by {max_dev:.2e}");

    // Per-mode variance of the increments is q_j * k within 3 standard
    // errors of a variance estimate over 25k draws per mode (100k total).
    let mut worst_z: f64 = 0.0;
    for kind in [QKind::White, QKind::Fractional { r: 0.5005 }] {
        let q = build_q_spec(kind, 4).unwrap();
        let k = 0.01;
        let n_steps = 25_000;
        let inc = sample_mode_increments(&q, n_steps, k, 99).unwrap();
        for j in 0..4 {
            let target = q.mode_weights()[j] * k;
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for step in 0..n_steps {
                let x = inc.entry(step, j);
                sum += x;
                sumsq += x * x;
            }
            let n = n_steps as f64;
            let mean = sum / n;
            let var = (sumsq - n * mean * mean) / (n - 1.0);
            let se = target * (2.0 / (n - 1.0)).sqrt();
            let z = (var - target).abs() / se;
            worst_z = worst_z.max(z);
            assert!(z <= 3.0, "mode {j} variance {var:.4e} vs {target:.4e}: {z:.2} SE");
        }
    }

    // Identical configuration => byte-identical result files.
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &std::path::Path| {
        let text = format!(
            "command = spatial\nnoise = white\nn_modes = 8\nmc_samples = 3\n\
             h_levels = 1/2 1/4\nh_ref = 1/8\nk_ref = 1/16\nseed = 11\n\
             output_path = {}\n",
            dir.display()
        );
        run_command(&parse_config(&text).unwrap()).unwrap()
    };
    let sa = run(&tmp.path().join("a"));
    let sb = run(&tmp.path().join("b"));
    assert_eq!(sa.files.len(), sb.files.len());
    for (fa, fb) in sa.files.iter().zip(&sb.files) {
        assert_eq!(
            std::fs::read(fa).unwrap(),
            std::fs::read(fb).unwrap(),
            "{} differs between reruns",
            fa.file_name().unwrap().to_string_lossy()
        );
    }
    println!(
        "ACCEPTANCE 7 PASS: coarsening exact to {max_dev:.1e}, variances within {worst_z:.2} SE, reruns byte-identical"
    );
}

/// Covariance partial sums: the white-noise displacement series
/// converges to its closed-form limit, while the series that controls
/// the velocity diverges as more modes are added.
#[test]
fn criterion_8_covariance_sum_diagnostics() {
    // gamma = 0: sum_j (j pi)^{-2} -> 1/6, so the root approaches 1/sqrt(6).
    let limit = 1.0 / 6.0f64.sqrt();
    let q = build_q_spec(QKind::White, 10_000).unwrap();
    let partial = hs_norm_partial(&q, 0.0);
    let rel = (partial - limit).abs() / limit;
    assert!(rel < 0.01, "partial sum {partial:.8} vs limit {limit:.8}: rel dev {rel:.2e}");

    // gamma = 1 with unit weights: the partial sum is sqrt(J) exactly and
    // grows without bound through the decade checkpoints.
    let mut prev = 0.0;
    for j in [100usize, 1_000, 10_000] {
        let q = build_q_spec(QKind::White, j).unwrap();
        let s = hs_norm_partial(&q, 1.0);
        assert!((s - (j as f64).sqrt()).abs() < 1e-9);
        assert!(s > 3.0 * prev, "no divergence: {s} after {prev}");
        prev = s;
    }
    println!(
        "ACCEPTANCE 8 PASS: white partial sum {partial:.6} vs 1/sqrt(6) = {limit:.6} (rel {rel:.1e}); velocity series grows to {prev:.1}"
    );
}

/// Pathwise time regularity under the trace-class kernel: RMS increments
/// of the displacement scale like lag^1 and of the velocity like
/// lag^(1/2) across dyadic lags.  The lag window (4k up to a quarter of
/// the horizon) must sit where the scaling is resolved: the shortest lag
/// still has many modes evolving coherently (mode index ~ 1/sqrt(lag)
/// below the truncation) while the longest is not yet saturated by fully
/// decorrelated modes — hence the short horizon and fine step.  The
/// velocity estimate runs slightly below 1/2 by construction: its
/// increment variance carries the near-divergent weight sum of this
/// kernel as a logarithmic factor in the lag, which no resolution
/// removes.
#[test]
fn criterion_9_path_regularity_exponents() {
    let report = run_regularity_study(&RegularityStudy {
        alpha: 1.0,
        t_final: 1.0 / 16.0,
        k: 1.0 / 16384.0,
        cells: 64,
        q: build_q_spec(QKind::Fractional { r: 0.5005 }, 64).unwrap(),
        mc_samples: 200,
        seed: 42,
    })
    .unwrap();
    let (eu, ev) = (report.exponent_u, report.exponent_v);
    assert!(in_band(eu, 0.85, 1.15), "displacement exponent {eu} outside [0.85, 1.15]");
    assert!(in_band(ev, 0.35, 0.65), "velocity exponent {ev} outside [0.35, 0.65]");
    println!("ACCEPTANCE 9 PASS: path regularity exponents u = {eu:.3} (band [0.85, 1.15]), v = {ev:.3} (band [0.35, 0.65])");
}
