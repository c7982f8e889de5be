//! Command execution: map a validated configuration onto the study
//! machinery, write the result files, and enforce the pass/fail checks.
//!
//! Output is deterministic for a fixed (configuration, seed): files carry
//! no timestamps, floats are always written with 17 significant digits,
//! and sample aggregation is order-stable regardless of thread count.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::experiment::{
    energy_audit, run_regularity_study, run_spatial_convergence, run_temporal_convergence,
    ConvergenceReport, InitialData, RateFit, RegularityStudy, SpatialStudy, TemporalStudy,
};
use crate::fem::{assemble_mass, assemble_stiffness, CoefVec, Mesh1D};
use crate::linalg::gen_sym_eig;
use crate::noise::{build_q_spec, hs_norm_partial, sample_mode_increments, write_increments, QKind, QSpec};
use crate::rng::{derive_seed, CounterRng};
use crate::scheme::{run_deterministic, FemState, Nonlinearity, SchemeConfig};

/// What a run produced: the files written and human-readable result lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn cells_of(h: f64) -> usize {
    (1.0 / h).round() as usize
}

fn noise_echo(noise: Option<QKind>) -> String {
    match noise {
        None => "none".into(),
        Some(QKind::White) => "white".into(),
        Some(QKind::Fractional { r }) => format!("fractional {r}"),
    }
}

/// Configuration echo written alongside every result.  The output
/// location itself is deliberately not echoed, so runs into different
/// directories stay byte-identical.
fn meta_text(cfg: &RunConfig, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    s.push_str(&format!("tool = sdwave {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("command = {}\n", cfg.command));
    s.push_str(&format!("alpha = {}\n", cfg.alpha));
    s.push_str(&format!("T = {}\n", cfg.t_final));
    s.push_str(&format!("noise = {}\n", noise_echo(cfg.noise)));
    if let Some(g) = cfg.gamma_label {
        s.push_str(&format!("gamma_label = {g}\n"));
    }
    s.push_str(&format!("n_modes = {}\n", cfg.n_modes));
    s.push_str(&format!("mc_samples = {}\n", cfg.mc_samples));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    if !cfg.h_levels.is_empty() {
        let labels: Vec<String> = cfg.h_levels.iter().map(|h| format!("1/{}", cells_of(*h))).collect();
        s.push_str(&format!("h_levels = {}\n", labels.join(" ")));
    }
    if !cfg.k_levels.is_empty() {
        let labels: Vec<String> = cfg.k_levels.iter().map(|k| format!("1/{}", cells_of(*k))).collect();
        s.push_str(&format!("k_levels = {}\n", labels.join(" ")));
    }
    if let Some(h) = cfg.h_ref {
        s.push_str(&format!("h_ref = 1/{}\n", cells_of(h)));
    }
    if let Some(k) = cfg.k_ref {
        s.push_str(&format!("k_ref = {k}\n"));
    }
    s.push_str(&format!(
        "nonlinearity = {}\n",
        match cfg.nonlinearity {
            Nonlinearity::Zero => "zero",
            Nonlinearity::Sine => "sine",
        }
    ));
    for (key, value) in extra {
        s.push_str(&format!("{key} = {value}\n"));
    }
    s
}

fn errors_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("level_index,h,k,err_u,err_v,se_u,se_v\n");
    for (i, l) in report.levels.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{},{},{},{}\n",
            fmt(l.h),
            fmt(l.k),
            fmt(l.err_u),
            fmt(l.err_v),
            fmt(l.se_u),
            fmt(l.se_v)
        ));
    }
    s
}

fn rates_csv(sections: &[(&str, &RateFit)]) -> String {
    let mut s = String::from("quantity,scope,slope\n");
    for (name, fit) in sections {
        s.push_str(&format!("{name},global,{}\n", fmt(fit.global)));
        for (i, p) in fit.pairwise.iter().enumerate() {
            s.push_str(&format!("{name},pair_{i},{}\n", fmt(*p)));
        }
    }
    s
}

fn rate_line(name: &str, fit: &RateFit) -> String {
    let pairs: Vec<String> = fit.pairwise.iter().map(|p| format!("{p:.3}")).collect();
    format!("{name} rate: global {:.4}, pairwise [{}]", fit.global, pairs.join(", "))
}

fn write_out(dir: &Path, name: &str, content: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content)?;
    files.push(path);
    Ok(())
}

fn dump_first_sample(
    q: &QSpec,
    n_steps: usize,
    k: f64,
    seed: u64,
    dir: &Path,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let inc = sample_mode_increments(q, n_steps, k, derive_seed(seed, 0))?;
    let path = dir.join("increments.bin");
    let file = fs::File::create(&path)?;
    write_increments(&inc, std::io::BufWriter::new(file))?;
    files.push(path);
    Ok(())
}

/// Execute a configuration: run the requested study, write its files
/// under the configured output directory, and fail (after writing) if a
/// built-in check does not hold.
pub fn run_command(cfg: &RunConfig) -> Result<RunSummary> {
    let dir = PathBuf::from(&cfg.output_path);
    fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut lines = Vec::new();

    match cfg.command {
        Command::Spatial | Command::Temporal | Command::Deterministic => {
            let report = convergence_report(cfg)?;
            write_out(&dir, "errors.csv", &errors_csv(&report), &mut files)?;
            write_out(
                &dir,
                "rates.csv",
                &rates_csv(&[("displacement", &report.rate_u), ("velocity", &report.rate_v)]),
                &mut files,
            )?;
            let meta = meta_text(cfg, &[("description", report.description.clone())]);
            write_out(&dir, "meta.txt", &meta, &mut files)?;
            lines.push(report.description.clone());
            lines.push(rate_line("displacement", &report.rate_u));
            lines.push(rate_line("velocity", &report.rate_v));
            if cfg.dump_increments {
                if let (Some(kind), Some(k)) = (cfg.noise, cfg.k_ref) {
                    let q = build_q_spec(kind, cfg.n_modes)?;
                    let n_steps = (cfg.t_final / k).round() as usize;
                    dump_first_sample(&q, n_steps, k, cfg.seed, &dir, &mut files)?;
                }
            }
        }
        Command::Energy => {
            let (csv, min_ratio, n_steps) = energy_ledger(cfg)?;
            write_out(&dir, "energy.csv", &csv, &mut files)?;
            let meta = meta_text(cfg, &[("steps_per_state", n_steps.to_string())]);
            write_out(&dir, "meta.txt", &meta, &mut files)?;
            lines.push(format!(
                "energy ledger: {} states, {} steps each, min slack / E0 = {:.3e} (bound -1e-10)",
                cfg.mc_samples, n_steps, min_ratio
            ));
            if min_ratio < -1e-10 {
                return Err(Error::CheckFailed(format!(
                    "energy ledger violated: min slack / E0 = {min_ratio:.3e} < -1e-10"
                )));
            }
            lines.push("energy dissipation check: ok".into());
        }
        Command::Regularity => {
            let kind = cfg.noise.expect("validated: regularity has noise");
            let study = RegularityStudy {
                alpha: cfg.alpha,
                t_final: cfg.t_final,
                k: cfg.k_ref.expect("validated: regularity has k_ref"),
                cells: cells_of(cfg.h_ref.expect("validated: regularity has h_ref")),
                q: build_q_spec(kind, cfg.n_modes)?,
                mc_samples: cfg.mc_samples,
                seed: cfg.seed,
            };
            let report = run_regularity_study(&study)?;
            let mut csv = String::from("lag,rms_u,rms_v\n");
            for i in 0..report.lag_times.len() {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    fmt(report.lag_times[i]),
                    fmt(report.rms_u[i]),
                    fmt(report.rms_v[i])
                ));
            }
            write_out(&dir, "regularity.csv", &csv, &mut files)?;
            let holder_u = RateFit { global: report.exponent_u, pairwise: vec![] };
            let holder_v = RateFit { global: report.exponent_v, pairwise: vec![] };
            let mut rates = String::from("quantity,scope,slope\n");
            rates.push_str(&format!("displacement,holder,{}\n", fmt(holder_u.global)));
            rates.push_str(&format!("velocity,holder,{}\n", fmt(holder_v.global)));
            write_out(&dir, "rates.csv", &rates, &mut files)?;
            let meta = meta_text(cfg, &[("description", report.description.clone())]);
            write_out(&dir, "meta.txt", &meta, &mut files)?;
            lines.push(report.description.clone());
            lines.push(format!(
                "Hölder exponents: displacement {:.4}, velocity {:.4}",
                report.exponent_u, report.exponent_v
            ));
            if cfg.dump_increments {
                let q = build_q_spec(kind, cfg.n_modes)?;
                let k = cfg.k_ref.expect("validated");
                let n_steps = (cfg.t_final / k).round() as usize;
                dump_first_sample(&q, n_steps, k, cfg.seed, &dir, &mut files)?;
            }
        }
        Command::HsCheck => {
            let kind = cfg.noise.expect("validated: hs-check has noise");
            let gamma = cfg.gamma_label.expect("validated: hs-check has gamma_label");
            let mut checkpoints: Vec<usize> = Vec::new();
            let mut j = 1usize;
            while j < cfg.n_modes {
                checkpoints.push(j);
                j = j.saturating_mul(10);
            }
            checkpoints.push(cfg.n_modes);
            let mut csv = String::from("n_modes,partial_sum\n");
            for &j in &checkpoints {
                let q = build_q_spec(kind, j)?;
                let partial = hs_norm_partial(&q, gamma);
                csv.push_str(&format!("{j},{}\n", fmt(partial)));
                lines.push(format!("J = {j}: partial sum {partial:.12}"));
            }
            write_out(&dir, "hs.csv", &csv, &mut files)?;
            let meta = meta_text(cfg, &[]);
            write_out(&dir, "meta.txt", &meta, &mut files)?;
        }
    }
    Ok(RunSummary { files, lines })
}

fn convergence_report(cfg: &RunConfig) -> Result<ConvergenceReport> {
    let noise = match cfg.noise {
        Some(kind) => Some(build_q_spec(kind, cfg.n_modes)?),
        None => None,
    };
    match cfg.command {
        Command::Spatial => run_spatial_convergence(&SpatialStudy {
            alpha: cfg.alpha,
            t_final: cfg.t_final,
            k: cfg.k_ref.expect("validated: spatial has k_ref"),
            level_cells: cfg.h_levels.iter().map(|&h| cells_of(h)).collect(),
            ref_cells: cells_of(cfg.h_ref.expect("validated: spatial has h_ref")),
            nonlinearity: cfg.nonlinearity,
            noise,
            initial: InitialData::Zero,
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
        }),
        Command::Temporal => run_temporal_convergence(&TemporalStudy {
            alpha: cfg.alpha,
            t_final: cfg.t_final,
            cells: cells_of(cfg.h_ref.expect("validated: temporal has h_ref")),
            level_k: cfg.k_levels.clone(),
            ref_k: cfg.k_ref.expect("validated: temporal has k_ref"),
            nonlinearity: cfg.nonlinearity,
            noise,
            initial: InitialData::Zero,
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
        }),
        Command::Deterministic => {
            // Single-mode data against the exact modal solution: one run
            // per level, no sampling.
            let initial = InitialData::SineMode { mode: 1, amp_u: 1.0, amp_v: 0.0 };
            if !cfg.h_levels.is_empty() {
                let level_cells: Vec<usize> = cfg.h_levels.iter().map(|&h| cells_of(h)).collect();
                let finest = *level_cells.last().expect("validated: ladder nonempty");
                run_spatial_convergence(&SpatialStudy {
                    alpha: cfg.alpha,
                    t_final: cfg.t_final,
                    k: cfg.k_ref.expect("validated: deterministic h ladder has k_ref"),
                    level_cells,
                    ref_cells: cfg.h_ref.map(cells_of).unwrap_or(2 * finest),
                    nonlinearity: Nonlinearity::Zero,
                    noise: None,
                    initial,
                    mc_samples: 1,
                    seed: cfg.seed,
                })
            } else {
                let smallest = *cfg.k_levels.last().expect("validated: ladder nonempty");
                run_temporal_convergence(&TemporalStudy {
                    alpha: cfg.alpha,
                    t_final: cfg.t_final,
                    cells: cells_of(cfg.h_ref.expect("validated: deterministic k ladder has h_ref")),
                    level_k: cfg.k_levels.clone(),
                    ref_k: cfg.k_ref.unwrap_or(smallest / 4.0),
                    nonlinearity: Nonlinearity::Zero,
                    noise: None,
                    initial,
                    mc_samples: 1,
                    seed: cfg.seed,
                })
            }
        }
        _ => unreachable!("convergence_report is called for study commands only"),
    }
}

/// Random-state energy sweep: per-state ledgers concatenated into one CSV
/// plus the worst slack relative to the initial energy.
fn energy_ledger(cfg: &RunConfig) -> Result<(String, f64, usize)> {
    let mesh = Mesh1D::new(cells_of(cfg.h_ref.expect("validated: energy has h_ref")))?;
    let k = cfg.k_ref.expect("validated: energy has k_ref");
    let scheme = SchemeConfig::new(mesh, cfg.alpha, k, cfg.t_final, Nonlinearity::Zero)?;
    let decomp = gen_sym_eig(&assemble_stiffness(&mesh), &assemble_mass(&mesh))?;
    let n = mesh.n_interior();
    let mut csv = String::from("state_index,step,t,energy,dissipation,slack\n");
    let mut min_ratio = f64::INFINITY;
    for m in 0..cfg.mc_samples {
        let mut rng = CounterRng::new(derive_seed(cfg.seed, m as u64), 0);
        let initial = FemState {
            u: CoefVec::new((0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()),
            v: CoefVec::new((0..n).map(|_| rng.uniform_in(-1.0, 1.0)).collect()),
            t: 0.0,
        };
        let traj = run_deterministic(&initial, &scheme)?;
        let rows = energy_audit(&traj, cfg.alpha, &decomp)?;
        let e0 = rows[0].energy;
        for row in &rows {
            csv.push_str(&format!(
                "{m},{},{},{},{},{}\n",
                row.step,
                fmt(row.t),
                fmt(row.energy),
                fmt(row.dissipation),
                fmt(row.slack)
            ));
            if row.step > 0 && e0 > 0.0 {
                min_ratio = min_ratio.min(row.slack / e0);
            }
        }
    }
    Ok((csv, min_ratio, scheme.n_steps()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::noise::read_increments;

    fn small_spatial_cfg(out: &Path) -> RunConfig {
        let text = format!(
            "command = spatial\nnoise = white\nn_modes = 8\nmc_samples = 3\n\
             h_levels = 1/2 1/4\nh_ref = 1/8\nk_ref = 1/16\nseed = 5\n\
             output_path = {}\n",
            out.display()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn spatial_run_writes_the_documented_files() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_spatial_cfg(&tmp.path().join("a"));
        let summary = run_command(&cfg).unwrap();
        let names: Vec<String> = summary
            .files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["errors.csv", "rates.csv", "meta.txt"]);
        let errors = fs::read_to_string(&summary.files[0]).unwrap();
        let lines: Vec<&str> = errors.lines().collect();
        assert_eq!(lines[0], "level_index,h,k,err_u,err_v,se_u,se_v");
        assert_eq!(lines.len(), 3, "two levels plus header");
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 7);
        }
        let rates = fs::read_to_string(&summary.files[1]).unwrap();
        assert!(rates.starts_with("quantity,scope,slope\n"));
        assert!(rates.contains("displacement,global,"));
        assert!(rates.contains("velocity,pair_0,"));
        assert!(!summary.lines.is_empty());
    }

    #[test]
    fn identical_configurations_give_byte_identical_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg_a = small_spatial_cfg(&tmp.path().join("a"));
        let cfg_b = small_spatial_cfg(&tmp.path().join("b"));
        let sa = run_command(&cfg_a).unwrap();
        let sb = run_command(&cfg_b).unwrap();
        for (fa, fb) in sa.files.iter().zip(&sb.files) {
            let ba = fs::read(fa).unwrap();
            let bb = fs::read(fb).unwrap();
            assert_eq!(ba, bb, "{fa:?} and {fb:?} differ");
        }
    }

    #[test]
    fn energy_run_passes_and_writes_a_full_ledger() {
        let tmp = tempfile::tempdir().unwrap();
        let text = format!(
            "command = energy\nmc_samples = 5\nh_ref = 1/8\nk_ref = 0.05\n\
             output_path = {}\n",
            tmp.path().join("e").display()
        );
        let cfg = parse_config(&text).unwrap();
        let summary = run_command(&cfg).unwrap();
        let csv = fs::read_to_string(&summary.files[0]).unwrap();
        // 5 states x (20 steps + initial row) + header.
        assert_eq!(csv.lines().count(), 1 + 5 * 21);
        assert!(summary.lines.iter().any(|l| l.contains("ok")));
    }

    #[test]
    fn hs_run_emits_decade_checkpoints() {
        let tmp = tempfile::tempdir().unwrap();
        let text = format!(
            "command = hs-check\nnoise = white\ngamma_label = 1\nn_modes = 400\n\
             output_path = {}\n",
            tmp.path().join("h").display()
        );
        let cfg = parse_config(&text).unwrap();
        let summary = run_command(&cfg).unwrap();
        let csv = fs::read_to_string(&summary.files[0]).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        let js: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
        assert_eq!(js, vec!["1", "10", "100", "400"]);
        // At gamma = 1 and unit weights the partial sum is exactly sqrt(J).
        let last: f64 = rows[3].split(',').nth(1).unwrap().parse().unwrap();
        assert!((last - 20.0).abs() < 1e-12);
    }

    #[test]
    fn increment_dump_replays_the_first_sample() {
        let tmp = tempfile::tempdir().unwrap();
        let text = format!(
            "command = regularity\nnoise = white\nn_modes = 4\nmc_samples = 2\n\
             T = 1\nh_ref = 1/4\nk_ref = 1/128\ndump_increments = true\n\
             output_path = {}\n",
            tmp.path().join("r").display()
        );
        let cfg = parse_config(&text).unwrap();
        let summary = run_command(&cfg).unwrap();
        let dump = summary
            .files
            .iter()
            .find(|p| p.file_name().unwrap() == "increments.bin")
            .expect("dump requested");
        let inc = read_increments(fs::File::open(dump).unwrap()).unwrap();
        assert_eq!(inc.n_steps(), 128);
        assert_eq!(inc.n_modes(), 4);
        assert_eq!(inc.seed(), derive_seed(cfg.seed, 0));
    }

    #[test]
    fn unwritable_output_location_fails_cleanly() {
        let tmp = tempfile::tempdir().unwrap();
        let blocker = tmp.path().join("taken");
        fs::write(&blocker, b"file, not dir").unwrap();
        let cfg = small_spatial_cfg(&blocker.join("sub"));
        assert!(matches!(run_command(&cfg), Err(Error::Io(_))));
    }
}
