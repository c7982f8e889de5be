//! Time discretization and the exact linear reference solution.
//!
//! The second-order problem is run in first-order form: displacement
//! coefficients U and velocity coefficients V on one mesh.  A linear
//! implicit Euler step treats the (stiff) damped wave part implicitly and
//! the nonlinearity plus noise explicitly:
//!
//! ```text
//! M V^n + k S U^n + alpha k S V^n = M V^{n-1} + k f(U^{n-1}) + w^n,
//! U^n = U^{n-1} + k V^n.
//! ```
//!
//! Eliminating U^n gives one symmetric positive definite tridiagonal solve
//! per step with the fixed matrix M + (alpha k + k^2) S, whose LDL^T
//! factorization is cached in [`SchemeConfig`].  `f` is the raw load of
//! the nonlinearity at the previous displacement and `w^n` the raw load of
//! the noise increment; both get the implied mass inverse through the
//! system solve, never explicitly.
//!
//! For the linear problem each sine mode evolves independently as a 2x2
//! ODE system, whose exponential and exact Gaussian covariance are
//! implemented here as the reference ("oracle") solution for convergence
//! measurements.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, CoefVec, Mesh1D};
use crate::linalg::{SymTridiagonal, TridiagFactor};
use crate::noise::{increments_to_load, ModeIncrements, SineLoadTable};

/// Reaction term F(u) in the drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// Linear problem, F = 0.
    Zero,
    /// F(u) = -sin(u), the globally Lipschitz benchmark nonlinearity.
    Sine,
}

/// Displacement/velocity coefficients at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FemState {
    pub u: CoefVec,
    pub v: CoefVec,
    pub t: f64,
}

impl FemState {
    pub fn zero(mesh: &Mesh1D) -> Self {
        FemState { u: CoefVec::zeros(mesh), v: CoefVec::zeros(mesh), t: 0.0 }
    }
}

/// Fixed data of one discretization: mesh, matrices, step size, damping,
/// nonlinearity, and the cached factorization of the per-step system.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    alpha: f64,
    k: f64,
    t_final: f64,
    n_steps: usize,
    mesh: Mesh1D,
    mass: SymTridiagonal,
    stiffness: SymTridiagonal,
    nonlinearity: Nonlinearity,
    system: TridiagFactor,
}

impl SchemeConfig {
    pub fn new(mesh: Mesh1D, alpha: f64, k: f64, t_final: f64, nonlinearity: Nonlinearity) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!("damping must be positive, got {alpha}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("step size must be positive, got {k}")));
        }
        if !(t_final.is_finite() && t_final >= k) {
            return Err(Error::Config(format!(
                "final time {t_final} must be at least one step {k}"
            )));
        }
        let n_steps = (t_final / k).round();
        if (n_steps * k - t_final).abs() > 1e-9 || n_steps < 1.0 {
            return Err(Error::Config(format!(
                "final time {t_final} is not an integer number of steps of size {k}"
            )));
        }
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh);
        let combined = SymTridiagonal::linear_combination(1.0, &mass, alpha * k + k * k, &stiffness)?;
        let system = TridiagFactor::new(&combined)?;
        Ok(SchemeConfig {
            alpha,
            k,
            t_final,
            n_steps: n_steps as usize,
            mesh,
            mass,
            stiffness,
            nonlinearity,
            system,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn mass(&self) -> &SymTridiagonal {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymTridiagonal {
        &self.stiffness
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }
}

/// Raw load vector of F(u) = -sin(u_h): b_i = -int sin(u_h(x)) phi_i(x) dx,
/// by the composite 3-point Gauss rule.  Bounded by h per entry since
/// |sin| <= 1 and each hat integrates to h.
pub fn sine_nonlinearity_load(u: &CoefVec, mesh: &Mesh1D) -> Result<Vec<f64>> {
    if u.len() != mesh.n_interior() {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vector of length {} on mesh with {} interior nodes",
            u.len(),
            mesh.n_interior()
        )));
    }
    const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
    const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let n = mesh.n_cells();
    let h = mesh.h();
    let mut b = vec![0.0; mesh.n_interior()];
    for cell in 0..n {
        let left = if cell == 0 { 0.0 } else { u.values[cell - 1] };
        let right = if cell + 1 == n { 0.0 } else { u.values[cell] };
        for g in 0..3 {
            let t = 0.5 * (1.0 + NODES[g]);
            let w = 0.5 * h * WEIGHTS[g];
            let uval = left * (1.0 - t) + right * t;
            let fval = -uval.sin();
            if cell >= 1 {
                b[cell - 1] += w * fval * (1.0 - t);
            }
            if cell + 1 <= n - 1 {
                b[cell] += w * fval * t;
            }
        }
    }
    Ok(b)
}

/// Shared implicit Euler update; `noise_load` is the raw load of the
/// Brownian increment over this step, absent for deterministic stepping.
fn advance(state: &FemState, noise_load: Option<&[f64]>, cfg: &SchemeConfig) -> Result<FemState> {
    let n = cfg.mesh.n_interior();
    if state.u.len() != n || state.v.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "state has lengths ({}, {}) but mesh has {} interior nodes",
            state.u.len(),
            state.v.len(),
            n
        )));
    }
    if let Some(w) = noise_load {
        if w.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "noise load of length {} on mesh with {n} interior nodes",
                w.len()
            )));
        }
    }
    let k = cfg.k;
    let mut rhs = cfg.mass.matvec(&state.v.values);
    let su = cfg.stiffness.matvec(&state.u.values);
    for i in 0..n {
        rhs[i] -= k * su[i];
    }
    if cfg.nonlinearity == Nonlinearity::Sine {
        let f = sine_nonlinearity_load(&state.u, &cfg.mesh)?;
        for i in 0..n {
            rhs[i] += k * f[i];
        }
    }
    if let Some(w) = noise_load {
        for i in 0..n {
            rhs[i] += w[i];
        }
    }
    let v_new = cfg.system.solve(&rhs);
    let u_new: Vec<f64> = state
        .u
        .values
        .iter()
        .zip(&v_new)
        .map(|(u, v)| u + k * v)
        .collect();
    Ok(FemState {
        u: CoefVec::new(u_new),
        v: CoefVec::new(v_new),
        t: state.t + k,
    })
}

/// One implicit Euler step of the unforced linear problem.
pub fn deterministic_step(state: &FemState, cfg: &SchemeConfig) -> Result<FemState> {
    if cfg.nonlinearity != Nonlinearity::Zero {
        return Err(Error::Config(
            "deterministic stepping is defined for the linear problem only".into(),
        ));
    }
    advance(state, None, cfg)
}

/// One implicit Euler step with an explicit nonlinearity load and a raw
/// noise load.  With an all-zero noise load and a linear configuration
/// this reproduces [`deterministic_step`] bit for bit.
pub fn stochastic_step(state: &FemState, noise_load: &[f64], cfg: &SchemeConfig) -> Result<FemState> {
    advance(state, Some(noise_load), cfg)
}

/// Run the unforced linear problem from `initial`; returns the trajectory
/// including the initial state (n_steps + 1 entries).
pub fn run_deterministic(initial: &FemState, cfg: &SchemeConfig) -> Result<Vec<FemState>> {
    if cfg.nonlinearity != Nonlinearity::Zero {
        return Err(Error::Config(
            "deterministic run is defined for the linear problem only".into(),
        ));
    }
    let mut traj = Vec::with_capacity(cfg.n_steps + 1);
    traj.push(initial.clone());
    for _ in 0..cfg.n_steps {
        let next = advance(traj.last().expect("trajectory never empty"), None, cfg)?;
        traj.push(next);
    }
    Ok(traj)
}

/// Run the forced problem consuming one increment row per step.  The
/// table's step size and horizon must match the configuration.
pub fn run_stochastic(
    initial: &FemState,
    inc: &ModeIncrements,
    table: &SineLoadTable,
    cfg: &SchemeConfig,
) -> Result<Vec<FemState>> {
    if table.n_interior() != cfg.mesh.n_interior() {
        return Err(Error::ShapeMismatch(format!(
            "load table built for {} interior nodes, mesh has {}",
            table.n_interior(),
            cfg.mesh.n_interior()
        )));
    }
    if inc.n_modes() != table.n_modes() {
        return Err(Error::ShapeMismatch(format!(
            "increment table has {} modes, load table {}",
            inc.n_modes(),
            table.n_modes()
        )));
    }
    if (inc.k() - cfg.k).abs() > 1e-12 * cfg.k {
        return Err(Error::Config(format!(
            "increment step {} does not match scheme step {}",
            inc.k(),
            cfg.k
        )));
    }
    if (inc.n_steps() as f64 * inc.k() - cfg.t_final).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "increments cover {} but the scheme runs to {}",
            inc.n_steps() as f64 * inc.k(),
            cfg.t_final
        )));
    }
    let mut traj = Vec::with_capacity(inc.n_steps() + 1);
    traj.push(initial.clone());
    for n in 0..inc.n_steps() {
        let w = increments_to_load(inc.row(n), table)?;
        let next = stochastic_step(traj.last().expect("trajectory never empty"), &w, cfg)?;
        traj.push(next);
    }
    Ok(traj)
}

/// Modal amplitudes (a_j, b_j) of displacement and velocity in the sine
/// basis — the state of the decoupled 2x2 systems the linear equation
/// splits into.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ModalState {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "modal state with {} displacement and {} velocity amplitudes",
                a.len(),
                b.len()
            )));
        }
        Ok(ModalState { a, b })
    }

    pub fn n_modes(&self) -> usize {
        self.a.len()
    }
}

/// Scalar weights (phi0, phi1) with exp(t A) = phi0 I + phi1 A for the
/// companion matrix A = [[0, 1], [-lambda, -alpha lambda]].
///
/// The characteristic roots solve r^2 + alpha lambda r + lambda = 0; the
/// three algebraic branches (real pair, complex pair, double root) are
/// selected by the discriminant with a relative switch band of 1e-8 around
/// the degenerate case, inside which the confluent limit formula is used.
/// For stiff modes the extreme root is taken from the stable sum
/// -(p + sqrt(disc))/2 and its partner through the product of roots, which
/// avoids the cancellation in -p + sqrt(disc).
fn semigroup_weights(lambda: f64, alpha: f64, t: f64) -> (f64, f64) {
    let p = alpha * lambda;
    let disc = p * p - 4.0 * lambda;
    let scale = p * p + 4.0 * lambda;
    if disc.abs() < 1e-8 * scale {
        let r = -0.5 * p;
        let e = (r * t).exp();
        (e * (1.0 - r * t), t * e)
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        let rm = -0.5 * (p + sq);
        let rp = lambda / rm;
        let ep = (rp * t).exp();
        let em = (rm * t).exp();
        let phi1 = (ep - em) / (rp - rm);
        (ep - rp * phi1, phi1)
    } else {
        let omega = 0.5 * (-disc).sqrt();
        let mu = -0.5 * p;
        let e = (mu * t).exp();
        let (s, c) = (omega * t).sin_cos();
        let phi1 = e * s / omega;
        (e * c - mu * phi1, phi1)
    }
}

/// Exact solution of the unforced linear modal systems at time t:
/// each mode j evolves by the exponential of [[0,1],[-l_j,-alpha l_j]].
pub fn spectral_exact_linear(
    mode_eigvals: &[f64],
    alpha: f64,
    t: f64,
    initial: &ModalState,
) -> Result<ModalState> {
    if mode_eigvals.len() != initial.n_modes() {
        return Err(Error::ShapeMismatch(format!(
            "{} eigenvalues for a modal state with {} modes",
            mode_eigvals.len(),
            initial.n_modes()
        )));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time {t} must be nonnegative")));
    }
    let mut a = Vec::with_capacity(initial.n_modes());
    let mut b = Vec::with_capacity(initial.n_modes());
    for (j, &lambda) in mode_eigvals.iter().enumerate() {
        let (phi0, phi1) = semigroup_weights(lambda, alpha, t);
        let (a0, b0) = (initial.a[j], initial.b[j]);
        a.push(phi0 * a0 + phi1 * b0);
        b.push(phi0 * b0 + phi1 * (-lambda * a0 - alpha * lambda * b0));
    }
    ModalState::new(a, b)
}

/// Exact covariance of one mode of the stochastic convolution at time t:
///
/// ```text
/// Cov = q int_0^t g(s) g(s)^T ds,   g(s) = exp(s A) (0, 1)^T,
/// ```
///
/// evaluated by adaptive Simpson quadrature to absolute tolerance 1e-10.
/// Entry [0][0] is the displacement variance, [1][1] the velocity
/// variance.
pub fn modal_exact_covariance(lambda: f64, alpha: f64, t: f64, q_weight: f64) -> Result<[[f64; 2]; 2]> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time {t} must be nonnegative")));
    }
    if !(q_weight.is_finite() && q_weight >= 0.0) {
        return Err(Error::Domain(format!("mode weight {q_weight} must be nonnegative")));
    }
    let f = |s: f64| -> [f64; 3] {
        let (phi0, phi1) = semigroup_weights(lambda, alpha, s);
        let g1 = phi1;
        let g2 = phi0 - alpha * lambda * phi1;
        [g1 * g1, g1 * g2, g2 * g2]
    };
    let integral = adaptive_simpson(&f, 0.0, t, 1e-10);
    Ok([
        [q_weight * integral[0], q_weight * integral[1]],
        [q_weight * integral[1], q_weight * integral[2]],
    ])
}

fn simpson_rule(fa: &[f64; 3], fm: &[f64; 3], fb: &[f64; 3], len: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = len / 6.0 * (fa[i] + 4.0 * fm[i] + fb[i]);
    }
    out
}

fn adaptive_simpson(f: &impl Fn(f64) -> [f64; 3], a: f64, b: f64, tol: f64) -> [f64; 3] {
    if b <= a {
        return [0.0; 3];
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson_rule(&fa, &fm, &fb, b - a);
    adaptive_simpson_rec(f, a, b, &fa, &fm, &fb, &whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec(
    f: &impl Fn(f64) -> [f64; 3],
    a: f64,
    b: f64,
    fa: &[f64; 3],
    fm: &[f64; 3],
    fb: &[f64; 3],
    whole: &[f64; 3],
    tol: f64,
    depth: u32,
) -> [f64; 3] {
    let m = 0.5 * (a + b);
    let fl = f(0.5 * (a + m));
    let fr = f(0.5 * (m + b));
    let left = simpson_rule(fa, &fl, fm, m - a);
    let right = simpson_rule(fm, &fr, fb, b - m);
    let mut err = 0.0f64;
    let mut refined = [0.0; 3];
    for i in 0..3 {
        refined[i] = left[i] + right[i];
        err = err.max((refined[i] - whole[i]).abs() / 15.0);
    }
    if depth == 0 || err <= tol {
        for i in 0..3 {
            // Richardson correction: Simpson's leading error term.
            refined[i] += (refined[i] - whole[i]) / 15.0;
        }
        return refined;
    }
    let a_part = adaptive_simpson_rec(f, a, m, fa, &fl, fm, &left, 0.5 * tol, depth - 1);
    let b_part = adaptive_simpson_rec(f, m, b, fm, &fr, fb, &right, 0.5 * tol, depth - 1);
    [a_part[0] + b_part[0], a_part[1] + b_part[1], a_part[2] + b_part[2]]
}

/// Write a trajectory as CSV with columns t, node_index, u, v — one row
/// per interior node per stored time level, floats at 17 significant
/// digits so the dump round-trips exactly.
pub fn write_trajectory_csv<W: Write>(traj: &[FemState], mut out: W) -> Result<()> {
    writeln!(out, "t,node_index,u,v")?;
    for state in traj {
        for i in 0..state.u.len() {
            writeln!(
                out,
                "{:.16e},{},{:.16e},{:.16e}",
                state.t,
                i + 1,
                state.u.values[i],
                state.v.values[i]
            )?;
        }
    }
    Ok(())
}
