//! Line-oriented `key = value` run configuration.
//!
//! The format is deliberately minimal: one assignment per line, `#` starts
//! a comment, unknown or repeated keys are errors, and every command
//! validates exactly the keys it uses.  Fractions may be written as
//! `1/1024`, lists as whitespace- or comma-separated values.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::noise::QKind;
use crate::scheme::Nonlinearity;

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Stochastic spatial convergence (mesh ladder, shared fine step).
    Spatial,
    /// Stochastic temporal convergence (step ladder, coupled paths).
    Temporal,
    /// Deterministic convergence against the exact modal solution.
    Deterministic,
    /// Per-step energy ledger of the unforced scheme.
    Energy,
    /// Temporal Hölder exponents of the linear stochastic solution.
    Regularity,
    /// Partial sums of the squared Hilbert-Schmidt norm of A^((gamma-1)/2) Q^(1/2).
    HsCheck,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Spatial => "spatial",
            Command::Temporal => "temporal",
            Command::Deterministic => "deterministic",
            Command::Energy => "energy",
            Command::Regularity => "regularity",
            Command::HsCheck => "hs-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully validated run configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub alpha: f64,
    pub t_final: f64,
    pub noise: Option<QKind>,
    /// Regularity label gamma; the exponent used by `hs-check` and echoed
    /// into the metadata otherwise.
    pub gamma_label: Option<f64>,
    pub n_modes: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Mesh widths of the spatial ladder (empty when unused).
    pub h_levels: Vec<f64>,
    /// Time steps of the temporal ladder (empty when unused).
    pub k_levels: Vec<f64>,
    /// Reference mesh width; for temporal/energy/regularity runs this is
    /// the (fixed) working mesh.
    pub h_ref: Option<f64>,
    /// Reference time step; for spatial/energy/regularity runs this is
    /// the (fixed) working step.
    pub k_ref: Option<f64>,
    pub nonlinearity: Nonlinearity,
    pub output_path: String,
    /// Dump the increments of the first sample in the binary exchange format.
    pub dump_increments: bool,
}

const KNOWN_KEYS: &[&str] = &[
    "command",
    "alpha",
    "T",
    "noise",
    "gamma_label",
    "n_modes",
    "mc_samples",
    "seed",
    "h_levels",
    "k_levels",
    "h_ref",
    "k_ref",
    "nonlinearity",
    "output_path",
    "dump_increments",
];

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parse a positive real, written as a decimal or as a fraction `a/b`.
fn parse_number(raw: &str, line: usize) -> Result<f64> {
    let v = if let Some((num, den)) = raw.split_once('/') {
        let n: f64 = num
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("cannot read '{num}' as a number")))?;
        let d: f64 = den
            .trim()
            .parse()
            .map_err(|_| parse_err(line, format!("cannot read '{den}' as a number")))?;
        n / d
    } else {
        raw.parse()
            .map_err(|_| parse_err(line, format!("cannot read '{raw}' as a number")))?
    };
    if !v.is_finite() {
        return Err(parse_err(line, format!("value '{raw}' is not finite")));
    }
    Ok(v)
}

fn parse_list(raw: &str, line: usize) -> Result<Vec<f64>> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(s, line))
        .collect()
}

/// The reciprocal of a dyadic step 1/2^m; errors otherwise.
fn dyadic_reciprocal(value: f64, what: &str) -> Result<u64> {
    if !(value.is_finite() && value > 0.0 && value <= 1.0) {
        return Err(Error::Config(format!(
            "{what} must lie in (0, 1], got {value}"
        )));
    }
    let recip = 1.0 / value;
    let n = recip.round();
    if (recip - n).abs() > 1e-9 * recip || n < 1.0 {
        return Err(Error::Config(format!(
            "{what} must be a reciprocal power of two, got {value}"
        )));
    }
    let n = n as u64;
    if !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "{what} must be a reciprocal power of two, got 1/{n}"
        )));
    }
    Ok(n)
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut command: Option<Command> = None;
    let mut alpha: Option<f64> = None;
    let mut t_final: Option<f64> = None;
    let mut noise: Option<QKind> = None;
    let mut gamma_label: Option<f64> = None;
    let mut n_modes: Option<usize> = None;
    let mut mc_samples: Option<usize> = None;
    let mut seed: Option<u64> = None;
    let mut h_levels: Option<Vec<f64>> = None;
    let mut k_levels: Option<Vec<f64>> = None;
    let mut h_ref: Option<f64> = None;
    let mut k_ref: Option<f64> = None;
    let mut nonlinearity: Option<Nonlinearity> = None;
    let mut output_path: Option<String> = None;
    let mut dump_increments: Option<bool> = None;
    let mut seen: HashSet<String> = HashSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(parse_err(line_no, format!("unknown key '{key}'")));
        }
        if !seen.insert(key.to_string()) {
            return Err(parse_err(line_no, format!("key '{key}' appears twice")));
        }
        if value.is_empty() {
            return Err(parse_err(line_no, format!("key '{key}' has no value")));
        }
        match key {
            "command" => {
                command = Some(match value {
                    "spatial" => Command::Spatial,
                    "temporal" => Command::Temporal,
                    "deterministic" => Command::Deterministic,
                    "energy" => Command::Energy,
                    "regularity" => Command::Regularity,
                    "hs-check" => Command::HsCheck,
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!(
                                "unknown command '{other}' (expected spatial, temporal, \
                                 deterministic, energy, regularity, or hs-check)"
                            ),
                        ))
                    }
                });
            }
            "alpha" => alpha = Some(parse_number(value, line_no)?),
            "T" => t_final = Some(parse_number(value, line_no)?),
            "noise" => {
                let mut parts = value.split_whitespace();
                let kind = parts.next().unwrap_or("");
                noise = Some(match kind {
                    "white" => {
                        if parts.next().is_some() {
                            return Err(parse_err(line_no, "white noise takes no parameter"));
                        }
                        QKind::White
                    }
                    "fractional" => {
                        let r = parts.next().ok_or_else(|| {
                            parse_err(line_no, "fractional noise needs an exponent, e.g. 'fractional 0.5005'")
                        })?;
                        if parts.next().is_some() {
                            return Err(parse_err(line_no, "fractional noise takes one parameter"));
                        }
                        QKind::Fractional { r: parse_number(r, line_no)? }
                    }
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!("unknown noise '{other}' (expected 'white' or 'fractional r')"),
                        ))
                    }
                });
            }
            "gamma_label" => gamma_label = Some(parse_number(value, line_no)?),
            "n_modes" => {
                n_modes = Some(value.parse().map_err(|_| {
                    parse_err(line_no, format!("cannot read '{value}' as a mode count"))
                })?)
            }
            "mc_samples" => {
                mc_samples = Some(value.parse().map_err(|_| {
                    parse_err(line_no, format!("cannot read '{value}' as a sample count"))
                })?)
            }
            "seed" => {
                seed = Some(value.parse().map_err(|_| {
                    parse_err(line_no, format!("cannot read '{value}' as a seed"))
                })?)
            }
            "h_levels" => h_levels = Some(parse_list(value, line_no)?),
            "k_levels" => k_levels = Some(parse_list(value, line_no)?),
            "h_ref" => h_ref = Some(parse_number(value, line_no)?),
            "k_ref" => k_ref = Some(parse_number(value, line_no)?),
            "nonlinearity" => {
                nonlinearity = Some(match value {
                    "zero" => Nonlinearity::Zero,
                    "sine" => Nonlinearity::Sine,
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!("unknown nonlinearity '{other}' (expected 'zero' or 'sine')"),
                        ))
                    }
                });
            }
            "output_path" => output_path = Some(value.to_string()),
            "dump_increments" => {
                dump_increments = Some(match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(parse_err(
                            line_no,
                            format!("cannot read '{other}' as true/false"),
                        ))
                    }
                });
            }
            _ => unreachable!("key membership checked above"),
        }
    }

    let command = command.ok_or_else(|| Error::Config("missing 'command = ...' line".into()))?;

    // Command-dependent defaults: the ladders and resolutions of the
    // shipped benchmark configurations.
    let (def_h_levels, def_k_levels): (Vec<f64>, Vec<f64>) = match command {
        Command::Spatial => (
            vec![1.0 / 2.0, 1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
            vec![],
        ),
        Command::Temporal => (
            vec![],
            vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
        ),
        _ => (vec![], vec![]),
    };
    let h_levels = h_levels.unwrap_or(def_h_levels);
    let k_levels = k_levels.unwrap_or(def_k_levels);
    let h_ref = h_ref.or(match command {
        Command::Spatial | Command::Temporal => Some(1.0 / 128.0),
        Command::Energy => Some(1.0 / 32.0),
        Command::Regularity => Some(1.0 / 64.0),
        Command::Deterministic if !k_levels.is_empty() => Some(1.0 / 128.0),
        _ => None,
    });
    // The spatial benchmark shares one step across every mesh level; it
    // must be small enough that time discretization does not damp the
    // high-mode velocity content whose mesh error is being measured.  The
    // regularity benchmark likewise needs lags short against the mode
    // relaxation times, hence its fine step and short horizon.
    let k_ref = k_ref.or(match command {
        Command::Spatial => Some(1.0 / 16384.0),
        Command::Temporal => Some(1.0 / 4096.0),
        Command::Energy => Some(0.02),
        Command::Regularity => Some(1.0 / 16384.0),
        Command::Deterministic if !h_levels.is_empty() => Some(1.0 / 4096.0),
        _ => None,
    });
    let nonlinearity = nonlinearity.unwrap_or(match command {
        Command::Spatial | Command::Temporal => Nonlinearity::Sine,
        _ => Nonlinearity::Zero,
    });

    let cfg = RunConfig {
        command,
        alpha: alpha.unwrap_or(1.0),
        t_final: t_final.unwrap_or(match command {
            Command::Regularity => 1.0 / 16.0,
            _ => 1.0,
        }),
        noise,
        gamma_label,
        n_modes: n_modes.unwrap_or(match command {
            Command::Regularity => 64,
            _ => 256,
        }),
        mc_samples: mc_samples.unwrap_or(match command {
            Command::Regularity => 200,
            _ => 100,
        }),
        seed: seed.unwrap_or(42),
        h_levels,
        k_levels,
        h_ref,
        k_ref,
        nonlinearity,
        output_path: output_path.unwrap_or_else(|| "out".into()),
        dump_increments: dump_increments.unwrap_or(false),
    };
    validate(&cfg, &seen)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig, seen: &HashSet<String>) -> Result<()> {
    if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {}", cfg.alpha)));
    }
    if !(cfg.t_final.is_finite() && cfg.t_final > 0.0) {
        return Err(Error::Config(format!("T must be positive, got {}", cfg.t_final)));
    }
    if cfg.mc_samples == 0 {
        return Err(Error::Config("mc_samples must be at least 1".into()));
    }
    if cfg.n_modes == 0 {
        return Err(Error::Config("n_modes must be at least 1".into()));
    }
    if let Some(QKind::Fractional { r }) = cfg.noise {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::Config(format!(
                "fractional noise exponent must be nonnegative, got {r}"
            )));
        }
    }
    if let Some(g) = cfg.gamma_label {
        if !g.is_finite() {
            return Err(Error::Config(format!("gamma_label must be finite, got {g}")));
        }
    }

    // Keys a command actually consumes; everything else is rejected by
    // name so configurations cannot silently carry dead settings.
    let universal = ["command", "alpha", "T", "seed", "output_path", "gamma_label", "mc_samples"];
    let allowed: &[&str] = match cfg.command {
        Command::Spatial => &["noise", "n_modes", "h_levels", "h_ref", "k_ref", "nonlinearity", "dump_increments"],
        Command::Temporal => &["noise", "n_modes", "k_levels", "k_ref", "h_ref", "nonlinearity", "dump_increments"],
        Command::Deterministic => &["h_levels", "k_levels", "h_ref", "k_ref", "nonlinearity"],
        Command::Energy => &["h_ref", "k_ref", "nonlinearity"],
        Command::Regularity => &["noise", "n_modes", "h_ref", "k_ref", "nonlinearity", "dump_increments"],
        Command::HsCheck => &["noise", "n_modes"],
    };
    for key in seen {
        if !universal.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "key '{key}' is not used by command '{}'",
                cfg.command
            )));
        }
    }

    let needs_noise = matches!(
        cfg.command,
        Command::Spatial | Command::Temporal | Command::Regularity | Command::HsCheck
    );
    if needs_noise && cfg.noise.is_none() {
        return Err(Error::Config(format!(
            "command '{}' needs a 'noise = ...' line",
            cfg.command
        )));
    }

    let check_ladder = |levels: &[f64], what: &str| -> Result<()> {
        let mut prev: Option<u64> = None;
        for &v in levels {
            let n = dyadic_reciprocal(v, what)?;
            if let Some(p) = prev {
                if n <= p {
                    return Err(Error::Config(format!(
                        "{what} must be strictly decreasing, got 1/{p} then 1/{n}"
                    )));
                }
            }
            prev = Some(n);
        }
        Ok(())
    };

    match cfg.command {
        Command::Spatial => {
            if cfg.h_levels.is_empty() {
                return Err(Error::Config("spatial study needs a nonempty h_levels ladder".into()));
            }
            check_ladder(&cfg.h_levels, "h_levels entry")?;
            let href = cfg.h_ref.expect("defaulted for spatial");
            let n_ref = dyadic_reciprocal(href, "h_ref")?;
            let n_last = dyadic_reciprocal(*cfg.h_levels.last().expect("nonempty"), "h_levels entry")?;
            if n_ref <= n_last {
                return Err(Error::Config(format!(
                    "reference mesh h_ref = 1/{n_ref} must be strictly finer than the finest level 1/{n_last}"
                )));
            }
            let k = cfg.k_ref.expect("defaulted for spatial");
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Config(format!("k_ref must be positive, got {k}")));
            }
        }
        Command::Temporal => {
            if cfg.k_levels.is_empty() {
                return Err(Error::Config("temporal study needs a nonempty k_levels ladder".into()));
            }
            check_ladder(&cfg.k_levels, "k_levels entry")?;
            let kref = cfg.k_ref.expect("defaulted for temporal");
            dyadic_reciprocal(kref, "k_ref")?;
            for &k in &cfg.k_levels {
                let ratio = k / kref;
                if (ratio - ratio.round()).abs() > 1e-9 || ratio < 2.0 {
                    return Err(Error::Config(format!(
                        "k_ref = {kref} must divide every level step at least twice, got level {k}"
                    )));
                }
            }
            dyadic_reciprocal(cfg.h_ref.expect("defaulted for temporal"), "h_ref")?;
        }
        Command::Deterministic => {
            match (cfg.h_levels.is_empty(), cfg.k_levels.is_empty()) {
                (false, false) => {
                    return Err(Error::Config(
                        "deterministic study takes exactly one ladder: h_levels or k_levels, not both"
                            .into(),
                    ))
                }
                (true, true) => {
                    return Err(Error::Config(
                        "deterministic study needs an explicit h_levels or k_levels ladder".into(),
                    ))
                }
                _ => {}
            }
            check_ladder(&cfg.h_levels, "h_levels entry")?;
            check_ladder(&cfg.k_levels, "k_levels entry")?;
            if !cfg.h_levels.is_empty() {
                let k = cfg.k_ref.expect("defaulted for deterministic h ladder");
                if !(k.is_finite() && k > 0.0) {
                    return Err(Error::Config(format!("k_ref must be positive, got {k}")));
                }
                if let Some(href) = cfg.h_ref {
                    let n_ref = dyadic_reciprocal(href, "h_ref")?;
                    let n_last =
                        dyadic_reciprocal(*cfg.h_levels.last().expect("nonempty"), "h_levels entry")?;
                    if n_ref <= n_last {
                        return Err(Error::Config(format!(
                            "reference mesh h_ref = 1/{n_ref} must be strictly finer than the finest level 1/{n_last}"
                        )));
                    }
                }
            } else {
                dyadic_reciprocal(cfg.h_ref.expect("defaulted for deterministic k ladder"), "h_ref")?;
            }
            if cfg.nonlinearity != Nonlinearity::Zero {
                return Err(Error::Config(
                    "deterministic study compares against the exact linear solution; nonlinearity must be zero"
                        .into(),
                ));
            }
        }
        Command::Energy => {
            dyadic_reciprocal(cfg.h_ref.expect("defaulted for energy"), "h_ref")?;
            let k = cfg.k_ref.expect("defaulted for energy");
            if !(k.is_finite() && k > 0.0) {
                return Err(Error::Config(format!("k_ref must be positive, got {k}")));
            }
            if cfg.nonlinearity != Nonlinearity::Zero {
                return Err(Error::Config(
                    "the energy ledger is defined for the unforced linear scheme; nonlinearity must be zero"
                        .into(),
                ));
            }
        }
        Command::Regularity => {
            dyadic_reciprocal(cfg.h_ref.expect("defaulted for regularity"), "h_ref")?;
            dyadic_reciprocal(cfg.k_ref.expect("defaulted for regularity"), "k_ref")?;
            if cfg.nonlinearity != Nonlinearity::Zero {
                return Err(Error::Config(
                    "the Hölder study runs the linear problem; nonlinearity must be zero".into(),
                ));
            }
        }
        Command::HsCheck => {
            if cfg.gamma_label.is_none() {
                return Err(Error::Config(
                    "hs-check needs 'gamma_label = ...' (the exponent of the partial sums)".into(),
                ));
            }
        }
    }
    Ok(())
}

impl RunConfig {
    /// Apply command-line overrides on top of a parsed configuration.
    pub fn apply_overrides(
        &mut self,
        seed: Option<u64>,
        samples: Option<usize>,
        out_dir: Option<&str>,
    ) -> Result<()> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(m) = samples {
            if m == 0 {
                return Err(Error::Config("mc_samples must be at least 1".into()));
            }
            self.mc_samples = m;
        }
        if let Some(dir) = out_dir {
            if dir.is_empty() {
                return Err(Error::Config("output directory must not be empty".into()));
            }
            self.output_path = dir.to_string();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spatial_config_gets_all_defaults() {
        let cfg = parse_config("command = spatial\nnoise = white\n").unwrap();
        assert_eq!(cfg.command, Command::Spatial);
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.t_final, 1.0);
        assert_eq!(cfg.noise, Some(QKind::White));
        assert_eq!(cfg.n_modes, 256);
        assert_eq!(cfg.mc_samples, 100);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.h_levels, vec![0.5, 0.25, 0.125, 0.0625, 0.03125]);
        assert_eq!(cfg.h_ref, Some(1.0 / 128.0));
        assert_eq!(cfg.k_ref, Some(1.0 / 16384.0));
        assert!(cfg.k_levels.is_empty());
        assert_eq!(cfg.nonlinearity, Nonlinearity::Sine);
        assert_eq!(cfg.output_path, "out");
        assert!(!cfg.dump_increments);
    }

    #[test]
    fn minimal_regularity_config_gets_the_benchmark_protocol() {
        let cfg = parse_config("command = regularity\nnoise = fractional 0.5005\n").unwrap();
        assert_eq!(cfg.t_final, 1.0 / 16.0);
        assert_eq!(cfg.h_ref, Some(1.0 / 64.0));
        assert_eq!(cfg.k_ref, Some(1.0 / 16384.0));
        assert_eq!(cfg.n_modes, 64);
        assert_eq!(cfg.mc_samples, 200);
    }

    #[test]
    fn comments_fractions_and_commas_parse() {
        let text = "\
# benchmark ladder
command = temporal
noise = fractional 0.5005   # trace-class kernel
k_levels = 1/8, 1/16, 1/32
k_ref = 1/256
h_ref = 1/64
seed = 7
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.command, Command::Temporal);
        assert_eq!(cfg.noise, Some(QKind::Fractional { r: 0.5005 }));
        assert_eq!(cfg.k_levels, vec![0.125, 0.0625, 0.03125]);
        assert_eq!(cfg.k_ref, Some(1.0 / 256.0));
        assert_eq!(cfg.h_ref, Some(1.0 / 64.0));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_named() {
        let err = parse_config("command = spatial\nnoise = white\nfoo = 1\n").unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("foo"), "message should name the key: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let err = parse_config("command = spatial\ncommand = energy\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn zero_samples_are_rejected() {
        let err = parse_config("command = spatial\nnoise = white\nmc_samples = 0\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("mc_samples"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn stochastic_commands_require_noise() {
        let err = parse_config("command = spatial\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = parse_config("command = hs-check\ngamma_label = 0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn non_dyadic_ladders_are_rejected() {
        let err = parse_config(
            "command = spatial\nnoise = white\nh_levels = 1/2 1/3\n",
        )
        .unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("power of two"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn reference_must_be_finer_than_the_ladder() {
        let err = parse_config(
            "command = spatial\nnoise = white\nh_levels = 1/2 1/4\nh_ref = 1/4\n",
        )
        .unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("finer"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn temporal_reference_must_divide_each_level() {
        let err = parse_config(
            "command = temporal\nnoise = white\nk_levels = 1/8 1/16\nk_ref = 1/16\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn deterministic_needs_exactly_one_ladder() {
        assert!(matches!(
            parse_config("command = deterministic\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            parse_config("command = deterministic\nh_levels = 1/4 1/8\nk_levels = 1/8 1/16\n"),
            Err(Error::Config(_))
        ));
        let cfg = parse_config("command = deterministic\nh_levels = 1/4 1/8 1/16\n").unwrap();
        assert_eq!(cfg.k_ref, Some(1.0 / 4096.0));
        assert_eq!(cfg.nonlinearity, Nonlinearity::Zero);
        let cfg = parse_config("command = deterministic\nk_levels = 1/8 1/16\n").unwrap();
        assert_eq!(cfg.h_ref, Some(1.0 / 128.0));
    }

    #[test]
    fn deterministic_rejects_the_nonlinear_problem_and_noise() {
        assert!(matches!(
            parse_config("command = deterministic\nh_levels = 1/4 1/8\nnonlinearity = sine\n"),
            Err(Error::Config(_))
        ));
        let err = parse_config("command = deterministic\nh_levels = 1/4 1/8\nnoise = white\n")
            .unwrap_err();
        match err {
            Error::Config(msg) => {
                assert!(msg.contains("noise") && msg.contains("deterministic"), "{msg}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn keys_foreign_to_a_command_are_rejected_by_name() {
        let err = parse_config("command = energy\nn_modes = 64\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("n_modes") && msg.contains("energy"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn hs_check_requires_gamma() {
        let err = parse_config("command = hs-check\nnoise = white\n").unwrap_err();
        match err {
            Error::Config(msg) => assert!(msg.contains("gamma_label"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let cfg = parse_config("command = hs-check\nnoise = white\ngamma_label = 0\n").unwrap();
        assert_eq!(cfg.gamma_label, Some(0.0));
    }

    #[test]
    fn malformed_lines_report_their_line_number() {
        let err = parse_config("command = spatial\nnoise white\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_config("command = spatial\nnoise = white\nalpha = abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn overrides_replace_seed_samples_and_output() {
        let mut cfg = parse_config("command = spatial\nnoise = white\n").unwrap();
        cfg.apply_overrides(Some(9), Some(12), Some("elsewhere")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mc_samples, 12);
        assert_eq!(cfg.output_path, "elsewhere");
        assert!(cfg.apply_overrides(None, Some(0), None).is_err());
    }

    #[test]
    fn shipped_benchmark_configs_parse_to_the_documented_studies() {
        let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
        let table1 = std::fs::read_to_string(format!("{root}/table1_white.cfg")).unwrap();
        let cfg = parse_config(&table1).unwrap();
        assert_eq!(cfg.command, Command::Spatial);
        assert_eq!(cfg.noise, Some(QKind::White));
        assert_eq!(cfg.h_levels, vec![0.5, 0.25, 0.125, 0.0625, 0.03125]);
        assert_eq!(cfg.h_ref, Some(1.0 / 128.0));
        assert_eq!(cfg.k_ref, Some(1.0 / 16384.0));
        assert_eq!(cfg.n_modes, 256);
        assert_eq!(cfg.mc_samples, 100);
        assert_eq!(cfg.nonlinearity, Nonlinearity::Sine);

        let table2 = std::fs::read_to_string(format!("{root}/table2_trace.cfg")).unwrap();
        let cfg = parse_config(&table2).unwrap();
        assert_eq!(cfg.command, Command::Temporal);
        assert_eq!(cfg.noise, Some(QKind::Fractional { r: 0.5005 }));
        assert_eq!(cfg.k_levels, vec![0.125, 0.0625, 0.03125, 0.015625, 0.0078125]);
        assert_eq!(cfg.k_ref, Some(1.0 / 4096.0));
        assert_eq!(cfg.h_ref, Some(1.0 / 128.0));

        for name in [
            "table1_trace.cfg",
            "table2_white.cfg",
            "deterministic_spatial.cfg",
            "deterministic_temporal.cfg",
            "energy.cfg",
            "regularity.cfg",
            "hs_white.cfg",
        ] {
            let text = std::fs::read_to_string(format!("{root}/{name}")).unwrap();
            parse_config(&text).unwrap_or_else(|e| panic!("{name} should parse: {e}"));
        }
    }
}
