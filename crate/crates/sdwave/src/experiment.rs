//! Monte-Carlo error measurement and convergence studies.
//!
//! The studies here produce the numbers behind the error tables and rate
//! plots: root-mean-square terminal errors over coupled sample paths,
//! log-log rate fits, the per-step energy ledger of the implicit scheme,
//! and a temporal Hölder-exponent estimator.
//!
//! Path coupling is the organizing principle: within one Monte-Carlo
//! sample every discretization level consumes the same underlying noise
//! path — spatial levels share one increment table outright, temporal
//! levels consume exact block sums of one fine path — so that measured
//! differences reflect discretization error, not noise resampling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{discrete_fractional_norm, discrete_l2_norm, CoefVec, Mesh1D};
use crate::linalg::{SpectralDecomp, SymTridiagonal};
use crate::noise::{coarsen_increments, sample_mode_increments, QKind, QSpec, SineLoadTable};
use crate::rng::derive_seed;
use crate::scheme::{
    run_deterministic, run_stochastic, spectral_exact_linear, FemState, ModalState, Nonlinearity,
    SchemeConfig,
};

/// Which half of the state a measurement refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Displacement,
    Velocity,
}

/// Initial data for a study, realizable on any mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    Zero,
    /// u0 = amp_u * sqrt(2) sin(mode pi x), v0 = amp_v * sqrt(2) sin(mode pi x).
    SineMode { mode: usize, amp_u: f64, amp_v: f64 },
}

impl InitialData {
    /// Coefficients of the data on a concrete mesh (sine data enters
    /// through its L^2 projection, computed from the closed-form load).
    pub fn realize(&self, mesh: &Mesh1D) -> Result<FemState> {
        match *self {
            InitialData::Zero => Ok(FemState::zero(mesh)),
            InitialData::SineMode { mode, amp_u, amp_v } => {
                if mode == 0 {
                    return Err(Error::Config("sine initial data needs mode >= 1".into()));
                }
                if !(amp_u.is_finite() && amp_v.is_finite()) {
                    return Err(Error::Config(format!(
                        "initial amplitudes must be finite, got ({amp_u}, {amp_v})"
                    )));
                }
                let mass = crate::fem::assemble_mass(mesh);
                let b = crate::fem::sine_mode_load(mesh, mode);
                let coefs = crate::linalg::solve_sym_tridiag(&mass, &b)?;
                let u: Vec<f64> = coefs.iter().map(|c| amp_u * c).collect();
                let v: Vec<f64> = coefs.iter().map(|c| amp_v * c).collect();
                Ok(FemState { u: CoefVec::new(u), v: CoefVec::new(v), t: 0.0 })
            }
        }
    }
}

/// RMS errors at one discretization level, with jackknife standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelErrors {
    pub h: f64,
    pub k: f64,
    pub err_u: f64,
    pub err_v: f64,
    pub se_u: f64,
    pub se_v: f64,
}

/// Least-squares rate fit over a level ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Slope of the log-log regression over all levels.
    pub global: f64,
    /// Slopes between consecutive levels.
    pub pairwise: Vec<f64>,
}

/// Full result of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelErrors>,
    pub rate_u: RateFit,
    pub rate_v: RateFit,
    pub n_samples: usize,
    pub seed: u64,
    /// Human-readable echo of the study parameters.
    pub description: String,
}

/// RMS error over paired terminal states with jackknife standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub err_u: f64,
    pub err_v: f64,
    pub se_u: f64,
    pub se_v: f64,
    pub n_samples: usize,
}

fn jackknife_rms(sq: &[f64]) -> (f64, f64) {
    let m = sq.len() as f64;
    let total: f64 = sq.iter().sum();
    let rms = (total / m).max(0.0).sqrt();
    if sq.len() < 2 {
        return (rms, 0.0);
    }
    let loo: Vec<f64> = sq.iter().map(|x| ((total - x) / (m - 1.0)).max(0.0).sqrt()).collect();
    let mean_loo: f64 = loo.iter().sum::<f64>() / m;
    let var: f64 = loo.iter().map(|t| (t - mean_loo) * (t - mean_loo)).sum::<f64>();
    (rms, ((m - 1.0) / m * var).sqrt())
}

/// Root-mean-square discrete L^2 error over paired terminal states
/// (approximation, reference), separately for displacement and velocity:
/// sqrt((1/M) sum_m ||u_m - u_m^ref||_M^2).  The standard errors are
/// leave-one-out jackknife estimates (0 for a single sample).
pub fn mc_rms_error(pairs: &[(FemState, FemState)], mass: &SymTridiagonal) -> Result<ErrorStats> {
    if pairs.is_empty() {
        return Err(Error::Config("error measurement needs at least one sample pair".into()));
    }
    let mut sq_u = Vec::with_capacity(pairs.len());
    let mut sq_v = Vec::with_capacity(pairs.len());
    for (approx, reference) in pairs {
        let du = CoefVec::new(
            approx
                .u
                .values
                .iter()
                .zip(&reference.u.values)
                .map(|(a, b)| a - b)
                .collect(),
        );
        let dv = CoefVec::new(
            approx
                .v
                .values
                .iter()
                .zip(&reference.v.values)
                .map(|(a, b)| a - b)
                .collect(),
        );
        if approx.u.len() != reference.u.len() || approx.v.len() != reference.v.len() {
            return Err(Error::ShapeMismatch(format!(
                "sample pairs state lengths ({:?}, {:?})",
                (approx.u.len(), approx.v.len()),
                (reference.u.len(), reference.v.len())
            )));
        }
        let eu = discrete_l2_norm(&du, mass)?;
        let ev = discrete_l2_norm(&dv, mass)?;
        sq_u.push(eu * eu);
        sq_v.push(ev * ev);
    }
    let (err_u, se_u) = jackknife_rms(&sq_u);
    let (err_v, se_v) = jackknife_rms(&sq_v);
    Ok(ErrorStats { err_u, err_v, se_u, se_v, n_samples: pairs.len() })
}

/// Log-log rate fit: pairwise slopes log(e_i/e_{i+1}) / log(s_i/s_{i+1})
/// and a global least-squares slope of log(error) against log(step).
pub fn estimate_rates(errors: &[f64], steps: &[f64]) -> Result<RateFit> {
    if errors.len() != steps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} errors against {} step sizes",
            errors.len(),
            steps.len()
        )));
    }
    if errors.len() < 2 {
        return Err(Error::Config("rate estimation needs at least two levels".into()));
    }
    for (i, &s) in steps.iter().enumerate() {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Config(format!("step sizes must be positive, got {s}")));
        }
        if i + 1 < steps.len() && steps[i + 1] >= s {
            return Err(Error::Config(format!(
                "step sizes must be strictly decreasing, got {s} then {}",
                steps[i + 1]
            )));
        }
    }
    for &e in errors {
        if !(e.is_finite() && e > 0.0) {
            return Err(Error::DegenerateData(format!(
                "rate estimation needs strictly positive errors, got {e}"
            )));
        }
    }
    let x: Vec<f64> = steps.iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let ybar = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xbar) * (a - xbar)).sum();
    let global = sxy / sxx;
    let pairwise: Vec<f64> = (0..errors.len() - 1)
        .map(|i| (errors[i] / errors[i + 1]).ln() / (steps[i] / steps[i + 1]).ln())
        .collect();
    Ok(RateFit { global, pairwise })
}

/// Nodal restriction of a coefficient vector on a nested finer mesh to a
/// coarse mesh: coarse interior node i coincides with fine interior node
/// i * (fine cells / coarse cells).
pub fn nodal_restriction(fine: &Mesh1D, coefs: &CoefVec, coarse: &Mesh1D) -> Result<CoefVec> {
    if coefs.len() != fine.n_interior() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vector of length {} on a mesh with {} interior nodes",
            coefs.len(),
            fine.n_interior()
        )));
    }
    if fine.n_cells() % coarse.n_cells() != 0 {
        return Err(Error::UnsupportedInput(format!(
            "mesh with {} cells is not a refinement of {} cells",
            fine.n_cells(),
            coarse.n_cells()
        )));
    }
    let ratio = fine.n_cells() / coarse.n_cells();
    Ok(CoefVec::new(
        (1..coarse.n_cells())
            .map(|i| coefs.values[i * ratio - 1])
            .collect(),
    ))
}

/// Nodal prolongation of a coefficient vector to a nested finer mesh: the
/// piecewise-linear function on the coarse mesh is evaluated at the fine
/// interior nodes.  Because the coarse space is a subspace of the fine
/// one, the prolonged vector represents exactly the same function.
pub fn nodal_prolongation(coarse: &Mesh1D, coefs: &CoefVec, fine: &Mesh1D) -> Result<CoefVec> {
    if coefs.len() != coarse.n_interior() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vector of length {} on a mesh with {} interior nodes",
            coefs.len(),
            coarse.n_interior()
        )));
    }
    if fine.n_cells() % coarse.n_cells() != 0 {
        return Err(Error::UnsupportedInput(format!(
            "mesh with {} cells is not a refinement of {} cells",
            fine.n_cells(),
            coarse.n_cells()
        )));
    }
    let ratio = fine.n_cells() / coarse.n_cells();
    let nc = coarse.n_cells();
    Ok(CoefVec::new(
        (1..fine.n_cells())
            .map(|i| {
                let cell = i / ratio;
                let t = (i % ratio) as f64 / ratio as f64;
                let left = if cell == 0 { 0.0 } else { coefs.values[cell - 1] };
                let right = if cell + 1 == nc { 0.0 } else { coefs.values[cell] };
                left * (1.0 - t) + right * t
            })
            .collect(),
    ))
}

/// L^2(0,1) distance between the piecewise-linear function with the given
/// coefficients and a smooth reference, by composite 3-point Gauss
/// quadrature.
pub fn l2_error_vs_function<F: Fn(f64) -> f64>(mesh: &Mesh1D, coefs: &CoefVec, f: F) -> Result<f64> {
    if coefs.len() != mesh.n_interior() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vector of length {} on a mesh with {} interior nodes",
            coefs.len(),
            mesh.n_interior()
        )));
    }
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let n = mesh.n_cells();
    let h = mesh.h();
    let mut acc = 0.0;
    for cell in 0..n {
        let left = if cell == 0 { 0.0 } else { coefs.values[cell - 1] };
        let right = if cell + 1 == n { 0.0 } else { coefs.values[cell] };
        let a = cell as f64 * h;
        for g in 0..3 {
            let t = 0.5 * (1.0 + NODES[g]);
            let x = a + t * h;
            let w = 0.5 * h * WEIGHTS[g];
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::NonFinite(format!("reference value {fx} at x = {x}")));
            }
            let d = left * (1.0 - t) + right * t - fx;
            acc += w * d * d;
        }
    }
    Ok(acc.max(0.0).sqrt())
}

/// Spatial convergence study: a ladder of meshes integrated with one
/// shared fine time step, compared at the final time against a reference
/// on a finer nested mesh (with noise) or against the exact single-mode
/// solution (without noise).
#[derive(Debug, Clone)]
pub struct SpatialStudy {
    pub alpha: f64,
    pub t_final: f64,
    /// Time step shared by every level and the reference run.
    pub k: f64,
    /// Cells per tested level, strictly increasing, each dividing `ref_cells`.
    pub level_cells: Vec<usize>,
    pub ref_cells: usize,
    pub nonlinearity: Nonlinearity,
    /// `None` runs the deterministic problem against the modal oracle.
    pub noise: Option<QSpec>,
    pub initial: InitialData,
    pub mc_samples: usize,
    pub seed: u64,
}

/// Temporal convergence study: one mesh integrated with a ladder of time
/// steps, compared against a reference run at a dyadically finer step
/// consuming the same Brownian path (with noise) or against the exact
/// single-mode solution (without noise).
#[derive(Debug, Clone)]
pub struct TemporalStudy {
    pub alpha: f64,
    pub t_final: f64,
    pub cells: usize,
    /// Tested steps, strictly decreasing, each an integer multiple of `ref_k`.
    pub level_k: Vec<f64>,
    pub ref_k: f64,
    pub nonlinearity: Nonlinearity,
    pub noise: Option<QSpec>,
    pub initial: InitialData,
    pub mc_samples: usize,
    pub seed: u64,
}

fn noise_label(noise: Option<&QSpec>) -> String {
    match noise {
        None => "none".into(),
        Some(q) => match q.kind() {
            QKind::White => format!("white, {} modes", q.n_modes()),
            QKind::Fractional { r } => format!("fractional r={r}, {} modes", q.n_modes()),
        },
    }
}

/// Exact solution of the deterministic linear problem with single-mode
/// initial data, as nodal functions of x at time t.
fn single_mode_oracle(
    initial: &InitialData,
    alpha: f64,
    t: f64,
) -> Result<(impl Fn(f64) -> f64, impl Fn(f64) -> f64)> {
    let (mode, amp_u, amp_v) = match *initial {
        InitialData::SineMode { mode, amp_u, amp_v } => (mode, amp_u, amp_v),
        InitialData::Zero => (1, 0.0, 0.0),
    };
    let lambda = (mode as f64 * std::f64::consts::PI).powi(2);
    let state = spectral_exact_linear(
        &[lambda],
        alpha,
        t,
        &ModalState::new(vec![amp_u], vec![amp_v])?,
    )?;
    let (a, b) = (state.a[0], state.b[0]);
    let freq = mode as f64 * std::f64::consts::PI;
    let sqrt2 = std::f64::consts::SQRT_2;
    Ok((
        move |x: f64| a * sqrt2 * (freq * x).sin(),
        move |x: f64| b * sqrt2 * (freq * x).sin(),
    ))
}

/// Run the spatial study.  With noise, every sample draws one increment
/// table at the shared time grid and feeds it to the reference and to
/// every level, coupling the paths exactly; each level's terminal state
/// is prolonged to the reference mesh (exact for nested piecewise-linear
/// spaces) and differenced there, so the reported error is the L^2(0,1)
/// distance between the two finite element functions.  Without noise the
/// (linear) problem is solved once per level and compared against the
/// exact modal solution in L^2(0,1).
pub fn run_spatial_convergence(study: &SpatialStudy) -> Result<ConvergenceReport> {
    if study.level_cells.is_empty() {
        return Err(Error::Config("spatial study needs at least one level".into()));
    }
    for (i, &c) in study.level_cells.iter().enumerate() {
        if i + 1 < study.level_cells.len() && study.level_cells[i + 1] <= c {
            return Err(Error::Config("level meshes must be strictly refining".into()));
        }
        if study.ref_cells % c != 0 || study.ref_cells <= c {
            return Err(Error::Config(format!(
                "reference mesh ({} cells) must be a strict refinement of every level ({c} cells)",
                study.ref_cells
            )));
        }
    }
    let description = format!(
        "spatial convergence: alpha={}, T={}, k={}, levels={:?} cells, reference={} cells, \
         nonlinearity={:?}, noise={}, samples={}, seed={}",
        study.alpha,
        study.t_final,
        study.k,
        study.level_cells,
        study.ref_cells,
        study.nonlinearity,
        noise_label(study.noise.as_ref()),
        study.mc_samples,
        study.seed
    );

    let level_meshes: Vec<Mesh1D> = study
        .level_cells
        .iter()
        .map(|&c| Mesh1D::new(c))
        .collect::<Result<_>>()?;
    let level_cfgs: Vec<SchemeConfig> = level_meshes
        .iter()
        .map(|m| SchemeConfig::new(*m, study.alpha, study.k, study.t_final, study.nonlinearity))
        .collect::<Result<_>>()?;
    let level_initials: Vec<FemState> = level_meshes
        .iter()
        .map(|m| study.initial.realize(m))
        .collect::<Result<_>>()?;

    let q = match &study.noise {
        Some(q) => q,
        None => {
            // Deterministic mode: one run per level against the exact
            // modal solution of the linear problem.
            if study.nonlinearity != Nonlinearity::Zero {
                return Err(Error::Config(
                    "a study without noise needs the linear problem (no exact reference otherwise)"
                        .into(),
                ));
            }
            let (u_exact, v_exact) = single_mode_oracle(&study.initial, study.alpha, study.t_final)?;
            let mut levels = Vec::with_capacity(level_meshes.len());
            for (i, mesh) in level_meshes.iter().enumerate() {
                let traj = run_deterministic(&level_initials[i], &level_cfgs[i])?;
                let last = traj.last().expect("trajectory never empty");
                levels.push(LevelErrors {
                    h: mesh.h(),
                    k: study.k,
                    err_u: l2_error_vs_function(mesh, &last.u, &u_exact)?,
                    err_v: l2_error_vs_function(mesh, &last.v, &v_exact)?,
                    se_u: 0.0,
                    se_v: 0.0,
                });
            }
            let rate_u = estimate_rates(
                &levels.iter().map(|l| l.err_u).collect::<Vec<_>>(),
                &levels.iter().map(|l| l.h).collect::<Vec<_>>(),
            )?;
            let rate_v = estimate_rates(
                &levels.iter().map(|l| l.err_v).collect::<Vec<_>>(),
                &levels.iter().map(|l| l.h).collect::<Vec<_>>(),
            )?;
            return Ok(ConvergenceReport {
                levels,
                rate_u,
                rate_v,
                n_samples: 1,
                seed: study.seed,
                description,
            });
        }
    };

    if study.mc_samples == 0 {
        return Err(Error::Config("a stochastic study needs at least one sample".into()));
    }
    let ref_mesh = Mesh1D::new(study.ref_cells)?;
    let ref_cfg = SchemeConfig::new(ref_mesh, study.alpha, study.k, study.t_final, study.nonlinearity)?;
    let ref_initial = study.initial.realize(&ref_mesh)?;
    let ref_table = SineLoadTable::build(&ref_mesh, q.n_modes());
    let level_tables: Vec<SineLoadTable> = level_meshes
        .iter()
        .map(|m| SineLoadTable::build(m, q.n_modes()))
        .collect();
    let n_steps = ref_cfg.n_steps();

    // One entry per sample: the terminal pair (level run prolonged to the
    // reference mesh, reference run) for every level.  Differencing on the
    // reference mesh makes the measured error the L^2(0,1) distance between
    // the two finite element functions; sampling the reference at coarse
    // nodes instead would discard its between-node content, which for rough
    // noise-driven fields decays more slowly than the nodal error and is
    // the part that carries the predicted order.
    let per_sample: Vec<Vec<(FemState, FemState)>> = (0..study.mc_samples)
        .into_par_iter()
        .map(|m| -> Result<Vec<(FemState, FemState)>> {
            let inc = sample_mode_increments(q, n_steps, study.k, derive_seed(study.seed, m as u64))?;
            let ref_traj = run_stochastic(&ref_initial, &inc, &ref_table, &ref_cfg)?;
            let ref_last = ref_traj.last().expect("trajectory never empty");
            let mut pairs = Vec::with_capacity(level_meshes.len());
            for (i, mesh) in level_meshes.iter().enumerate() {
                let traj = run_stochastic(&level_initials[i], &inc, &level_tables[i], &level_cfgs[i])?;
                let last = traj.last().expect("trajectory never empty");
                let prolonged = FemState {
                    u: nodal_prolongation(mesh, &last.u, &ref_mesh)?,
                    v: nodal_prolongation(mesh, &last.v, &ref_mesh)?,
                    t: last.t,
                };
                pairs.push((prolonged, ref_last.clone()));
            }
            Ok(pairs)
        })
        .collect::<Result<_>>()?;

    let ref_mass = crate::fem::assemble_mass(&ref_mesh);
    let mut levels = Vec::with_capacity(level_meshes.len());
    for (i, mesh) in level_meshes.iter().enumerate() {
        let pairs: Vec<(FemState, FemState)> = per_sample.iter().map(|s| s[i].clone()).collect();
        let stats = mc_rms_error(&pairs, &ref_mass)?;
        levels.push(LevelErrors {
            h: mesh.h(),
            k: study.k,
            err_u: stats.err_u,
            err_v: stats.err_v,
            se_u: stats.se_u,
            se_v: stats.se_v,
        });
    }
    let rate_u = estimate_rates(
        &levels.iter().map(|l| l.err_u).collect::<Vec<_>>(),
        &levels.iter().map(|l| l.h).collect::<Vec<_>>(),
    )?;
    let rate_v = estimate_rates(
        &levels.iter().map(|l| l.err_v).collect::<Vec<_>>(),
        &levels.iter().map(|l| l.h).collect::<Vec<_>>(),
    )?;
    Ok(ConvergenceReport {
        levels,
        rate_u,
        rate_v,
        n_samples: study.mc_samples,
        seed: study.seed,
        description,
    })
}

/// Run the temporal study.  With noise, each sample draws one path at the
/// reference step; every level consumes exact block sums of that same
/// path, and terminal states are compared directly on the shared mesh.
/// Without noise the levels are compared against the exact modal solution.
pub fn run_temporal_convergence(study: &TemporalStudy) -> Result<ConvergenceReport> {
    if study.level_k.is_empty() {
        return Err(Error::Config("temporal study needs at least one level".into()));
    }
    for (i, &k) in study.level_k.iter().enumerate() {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("step sizes must be positive, got {k}")));
        }
        if i + 1 < study.level_k.len() && study.level_k[i + 1] >= k {
            return Err(Error::Config("level steps must be strictly decreasing".into()));
        }
        let ratio = k / study.ref_k;
        if study.noise.is_some() && ((ratio - ratio.round()).abs() > 1e-9 || ratio < 2.0) {
            return Err(Error::Config(format!(
                "level step {k} must be an integer multiple (>= 2) of the reference step {}",
                study.ref_k
            )));
        }
    }
    let description = format!(
        "temporal convergence: alpha={}, T={}, mesh={} cells, steps={:?}, reference step={}, \
         nonlinearity={:?}, noise={}, samples={}, seed={}",
        study.alpha,
        study.t_final,
        study.cells,
        study.level_k,
        study.ref_k,
        study.nonlinearity,
        noise_label(study.noise.as_ref()),
        study.mc_samples,
        study.seed
    );

    let mesh = Mesh1D::new(study.cells)?;
    let mass = crate::fem::assemble_mass(&mesh);
    let level_cfgs: Vec<SchemeConfig> = study
        .level_k
        .iter()
        .map(|&k| SchemeConfig::new(mesh, study.alpha, k, study.t_final, study.nonlinearity))
        .collect::<Result<_>>()?;
    let initial = study.initial.realize(&mesh)?;

    let q = match &study.noise {
        Some(q) => q,
        None => {
            if study.nonlinearity != Nonlinearity::Zero {
                return Err(Error::Config(
                    "a study without noise needs the linear problem (no exact reference otherwise)"
                        .into(),
                ));
            }
            let (u_exact, v_exact) = single_mode_oracle(&study.initial, study.alpha, study.t_final)?;
            let mut levels = Vec::with_capacity(level_cfgs.len());
            for cfg in &level_cfgs {
                let traj = run_deterministic(&initial, cfg)?;
                let last = traj.last().expect("trajectory never empty");
                levels.push(LevelErrors {
                    h: mesh.h(),
                    k: cfg.k(),
                    err_u: l2_error_vs_function(&mesh, &last.u, &u_exact)?,
                    err_v: l2_error_vs_function(&mesh, &last.v, &v_exact)?,
                    se_u: 0.0,
                    se_v: 0.0,
                });
            }
            let rate_u = estimate_rates(
                &levels.iter().map(|l| l.err_u).collect::<Vec<_>>(),
                &levels.iter().map(|l| l.k).collect::<Vec<_>>(),
            )?;
            let rate_v = estimate_rates(
                &levels.iter().map(|l| l.err_v).collect::<Vec<_>>(),
                &levels.iter().map(|l| l.k).collect::<Vec<_>>(),
            )?;
            return Ok(ConvergenceReport {
                levels,
                rate_u,
                rate_v,
                n_samples: 1,
                seed: study.seed,
                description,
            });
        }
    };

    if study.mc_samples == 0 {
        return Err(Error::Config("a stochastic study needs at least one sample".into()));
    }
    let ref_cfg = SchemeConfig::new(mesh, study.alpha, study.ref_k, study.t_final, study.nonlinearity)?;
    let table = SineLoadTable::build(&mesh, q.n_modes());
    let factors: Vec<usize> = study
        .level_k
        .iter()
        .map(|&k| (k / study.ref_k).round() as usize)
        .collect();

    let per_sample: Vec<Vec<(FemState, FemState)>> = (0..study.mc_samples)
        .into_par_iter()
        .map(|m| -> Result<Vec<(FemState, FemState)>> {
            let fine = sample_mode_increments(
                q,
                ref_cfg.n_steps(),
                study.ref_k,
                derive_seed(study.seed, m as u64),
            )?;
            let ref_traj = run_stochastic(&initial, &fine, &table, &ref_cfg)?;
            let ref_last = ref_traj.last().expect("trajectory never empty").clone();
            let mut pairs = Vec::with_capacity(level_cfgs.len());
            for (i, cfg) in level_cfgs.iter().enumerate() {
                let coarse = coarsen_increments(&fine, factors[i])?;
                let traj = run_stochastic(&initial, &coarse, &table, cfg)?;
                pairs.push((traj.last().expect("trajectory never empty").clone(), ref_last.clone()));
            }
            Ok(pairs)
        })
        .collect::<Result<_>>()?;

    let mut levels = Vec::with_capacity(level_cfgs.len());
    for (i, cfg) in level_cfgs.iter().enumerate() {
        let pairs: Vec<(FemState, FemState)> = per_sample.iter().map(|s| s[i].clone()).collect();
        let stats = mc_rms_error(&pairs, &mass)?;
        levels.push(LevelErrors {
            h: mesh.h(),
            k: cfg.k(),
            err_u: stats.err_u,
            err_v: stats.err_v,
            se_u: stats.se_u,
            se_v: stats.se_v,
        });
    }
    let rate_u = estimate_rates(
        &levels.iter().map(|l| l.err_u).collect::<Vec<_>>(),
        &levels.iter().map(|l| l.k).collect::<Vec<_>>(),
    )?;
    let rate_v = estimate_rates(
        &levels.iter().map(|l| l.err_v).collect::<Vec<_>>(),
        &levels.iter().map(|l| l.k).collect::<Vec<_>>(),
    )?;
    Ok(ConvergenceReport {
        levels,
        rate_u,
        rate_v,
        n_samples: study.mc_samples,
        seed: study.seed,
        description,
    })
}

/// One row of the discrete energy ledger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    /// E^n = ||U^n||_M^2 + ||V^n||_{-1}^2 (the velocity measured in the
    /// inverse-operator norm).
    pub energy: f64,
    /// 2 alpha k ||V^n||_M^2, the damping paid over step n (0 at step 0).
    pub dissipation: f64,
    /// E^{n-1} - E^n - dissipation^n; nonnegative up to rounding for the
    /// unforced linear scheme.
    pub slack: f64,
}

/// Per-step energy ledger of a deterministic linear trajectory.  The
/// implicit scheme dissipates: each step satisfies
/// E^{n-1} - E^n >= 2 alpha k ||V^n||_M^2, so every slack entry is
/// nonnegative up to rounding.
pub fn energy_audit(
    traj: &[FemState],
    alpha: f64,
    decomp: &SpectralDecomp,
) -> Result<Vec<EnergyRow>> {
    if traj.is_empty() {
        return Err(Error::Config("energy audit needs a nonempty trajectory".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!("damping must be positive, got {alpha}")));
    }
    let mass = decomp.mass();
    let energy_of = |state: &FemState| -> Result<f64> {
        let eu = discrete_l2_norm(&state.u, mass)?;
        let ev = discrete_fractional_norm(&state.v, -1.0, decomp)?;
        Ok(eu * eu + ev * ev)
    };
    let mut rows = Vec::with_capacity(traj.len());
    let mut prev_energy = energy_of(&traj[0])?;
    rows.push(EnergyRow { step: 0, t: traj[0].t, energy: prev_energy, dissipation: 0.0, slack: 0.0 });
    for (n, state) in traj.iter().enumerate().skip(1) {
        let k = state.t - traj[n - 1].t;
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!(
                "trajectory times must be strictly increasing, got {} then {}",
                traj[n - 1].t,
                state.t
            )));
        }
        let energy = energy_of(state)?;
        let vnorm = discrete_l2_norm(&state.v, mass)?;
        let dissipation = 2.0 * alpha * k * vnorm * vnorm;
        rows.push(EnergyRow {
            step: n,
            t: state.t,
            energy,
            dissipation,
            slack: prev_energy - energy - dissipation,
        });
        prev_energy = energy;
    }
    Ok(rows)
}

/// Streaming estimator of temporal Hölder exponents from trajectories on
/// a shared time grid: accumulates mean squared increments at dyadic lags
/// spanning [4k, T/4] and fits log RMS increment against log lag.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderAccumulator {
    n_steps: usize,
    k: f64,
    lag_steps: Vec<usize>,
    sum_u: Vec<f64>,
    sum_v: Vec<f64>,
    count: Vec<u64>,
    n_trajectories: usize,
}

impl HolderAccumulator {
    /// Lags are 4, 8, 16, ... steps up to a quarter of the trajectory;
    /// at least two lags (hence at least 64 steps) are required.
    pub fn new(n_steps: usize, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {k}")));
        }
        if n_steps < 64 {
            return Err(Error::Config(format!(
                "Hölder estimation needs at least 64 steps, got {n_steps}"
            )));
        }
        let mut lag_steps = Vec::new();
        let mut lag = 4;
        while lag * 4 <= n_steps {
            lag_steps.push(lag);
            lag *= 2;
        }
        let n_lags = lag_steps.len();
        Ok(HolderAccumulator {
            n_steps,
            k,
            lag_steps,
            sum_u: vec![0.0; n_lags],
            sum_v: vec![0.0; n_lags],
            count: vec![0; n_lags],
            n_trajectories: 0,
        })
    }

    pub fn lag_times(&self) -> Vec<f64> {
        self.lag_steps.iter().map(|&l| l as f64 * self.k).collect()
    }

    pub fn n_trajectories(&self) -> usize {
        self.n_trajectories
    }

    /// Add every increment ||x(t + lag) - x(t)||_M^2 of one trajectory.
    pub fn add_trajectory(&mut self, traj: &[FemState], mass: &SymTridiagonal) -> Result<()> {
        if traj.len() != self.n_steps + 1 {
            return Err(Error::ShapeMismatch(format!(
                "trajectory with {} states on a grid expecting {}",
                traj.len(),
                self.n_steps + 1
            )));
        }
        for (li, &lag) in self.lag_steps.iter().enumerate() {
            for t0 in 0..=(self.n_steps - lag) {
                let (a, b) = (&traj[t0], &traj[t0 + lag]);
                let du = CoefVec::new(
                    a.u.values.iter().zip(&b.u.values).map(|(x, y)| y - x).collect(),
                );
                let dv = CoefVec::new(
                    a.v.values.iter().zip(&b.v.values).map(|(x, y)| y - x).collect(),
                );
                let nu = discrete_l2_norm(&du, mass)?;
                let nv = discrete_l2_norm(&dv, mass)?;
                self.sum_u[li] += nu * nu;
                self.sum_v[li] += nv * nv;
                self.count[li] += 1;
            }
        }
        self.n_trajectories += 1;
        Ok(())
    }

    /// Fold another accumulator over the same grid into this one.
    pub fn merge(&mut self, other: &HolderAccumulator) -> Result<()> {
        if self.n_steps != other.n_steps || self.k != other.k {
            return Err(Error::ShapeMismatch(
                "cannot merge Hölder accumulators over different time grids".into(),
            ));
        }
        for i in 0..self.sum_u.len() {
            self.sum_u[i] += other.sum_u[i];
            self.sum_v[i] += other.sum_v[i];
            self.count[i] += other.count[i];
        }
        self.n_trajectories += other.n_trajectories;
        Ok(())
    }

    /// Root-mean-square increment per lag.
    pub fn rms_increments(&self, component: Component) -> Result<Vec<f64>> {
        let sums = match component {
            Component::Displacement => &self.sum_u,
            Component::Velocity => &self.sum_v,
        };
        sums.iter()
            .zip(&self.count)
            .map(|(&s, &c)| {
                if c == 0 {
                    Err(Error::DegenerateData("no trajectories accumulated".into()))
                } else {
                    Ok((s / c as f64).sqrt())
                }
            })
            .collect()
    }

    /// Fitted exponent: least-squares slope of log RMS increment against
    /// log lag.
    pub fn exponent(&self, component: Component) -> Result<f64> {
        let rms = self.rms_increments(component)?;
        for &r in &rms {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::DegenerateData(
                    "zero or non-finite increments; the trajectory has no measurable variation"
                        .into(),
                ));
            }
        }
        let x: Vec<f64> = self.lag_times().iter().map(|t| t.ln()).collect();
        let y: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
        let n = x.len() as f64;
        let xbar = x.iter().sum::<f64>() / n;
        let ybar = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xbar) * (b - ybar)).sum();
        let sxx: f64 = x.iter().map(|a| (a - xbar) * (a - xbar)).sum();
        Ok(sxy / sxx)
    }
}

/// Hölder exponent of a single trajectory (grid inferred from its times).
pub fn holder_estimate(
    traj: &[FemState],
    mass: &SymTridiagonal,
    component: Component,
) -> Result<f64> {
    if traj.len() < 2 {
        return Err(Error::Config("Hölder estimation needs at least two states".into()));
    }
    let k = traj[1].t - traj[0].t;
    let mut acc = HolderAccumulator::new(traj.len() - 1, k)?;
    acc.add_trajectory(traj, mass)?;
    acc.exponent(component)
}

/// Temporal-regularity study: Monte-Carlo trajectories of the linear
/// stochastic problem feeding one Hölder accumulator per component.
#[derive(Debug, Clone)]
pub struct RegularityStudy {
    pub alpha: f64,
    pub t_final: f64,
    pub k: f64,
    pub cells: usize,
    pub q: QSpec,
    pub mc_samples: usize,
    pub seed: u64,
}

/// Result of a regularity study: fitted exponents plus the structure
/// function (RMS increment per lag) they were fitted from.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub exponent_u: f64,
    pub exponent_v: f64,
    pub lag_times: Vec<f64>,
    pub rms_u: Vec<f64>,
    pub rms_v: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub description: String,
}

pub fn run_regularity_study(study: &RegularityStudy) -> Result<RegularityReport> {
    if study.mc_samples == 0 {
        return Err(Error::Config("a regularity study needs at least one sample".into()));
    }
    let mesh = Mesh1D::new(study.cells)?;
    let mass = crate::fem::assemble_mass(&mesh);
    let cfg = SchemeConfig::new(mesh, study.alpha, study.k, study.t_final, Nonlinearity::Zero)?;
    let table = SineLoadTable::build(&mesh, study.q.n_modes());
    let initial = FemState::zero(&mesh);

    let partials: Vec<HolderAccumulator> = (0..study.mc_samples)
        .into_par_iter()
        .map(|m| -> Result<HolderAccumulator> {
            let inc = sample_mode_increments(
                &study.q,
                cfg.n_steps(),
                study.k,
                derive_seed(study.seed, m as u64),
            )?;
            let traj = run_stochastic(&initial, &inc, &table, &cfg)?;
            let mut acc = HolderAccumulator::new(cfg.n_steps(), study.k)?;
            acc.add_trajectory(&traj, &mass)?;
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut acc = HolderAccumulator::new(cfg.n_steps(), study.k)?;
    for p in &partials {
        acc.merge(p)?;
    }
    Ok(RegularityReport {
        exponent_u: acc.exponent(Component::Displacement)?,
        exponent_v: acc.exponent(Component::Velocity)?,
        lag_times: acc.lag_times(),
        rms_u: acc.rms_increments(Component::Displacement)?,
        rms_v: acc.rms_increments(Component::Velocity)?,
        n_samples: study.mc_samples,
        seed: study.seed,
        description: format!(
            "temporal regularity: alpha={}, T={}, k={}, mesh={} cells, noise={}, samples={}, seed={}",
            study.alpha,
            study.t_final,
            study.k,
            study.cells,
            noise_label(Some(&study.q)),
            study.mc_samples,
            study.seed
        ),
    })
}
