//! Q-Wiener increments through a truncated sine (Karhunen-Loeve) expansion.
//!
//! The driving noise is expanded in the Dirichlet eigenbasis
//! e_j(x) = sqrt(2) sin(j pi x) with Laplacian eigenvalues (j pi)^2.  Mode j
//! carries weight q_j: 1 for space-time white noise, lambda_j^{-r} for the
//! smoother covariance A^{-r}.  An increment table holds
//! sqrt(q_j) * (beta_j(t_n) - beta_j(t_{n-1})), sampled with the
//! counter-based generator keyed by (seed, mode, step), so a table is a
//! pure function of (q, n_steps, k, seed) — independent of evaluation
//! order and of whatever mesh later consumes it.  Coarser tables for
//! coupled time-refinement studies are exact row sums of a fine table,
//! which keeps every resolution on the same Brownian path.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fem::{sine_mode_load, Mesh1D};
use crate::rng::standard_normal;

/// Covariance choice for the driving noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QKind {
    /// Space-time white noise: q_j = 1.
    White,
    /// q_j = lambda_j^{-r} (fractional power of the Dirichlet Laplacian).
    Fractional { r: f64 },
}

/// Per-mode weights and eigenvalues of the truncated expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    kind: QKind,
    mode_weights: Vec<f64>,
    mode_eigvals: Vec<f64>,
}

/// Build the per-mode data for `n_modes` retained modes.
pub fn build_q_spec(kind: QKind, n_modes: usize) -> Result<QSpec> {
    if n_modes == 0 {
        return Err(Error::Config("noise expansion needs at least one mode".into()));
    }
    if let QKind::Fractional { r } = kind {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::Config(format!(
                "fractional covariance exponent must satisfy r >= 0, got {r}"
            )));
        }
    }
    let mode_eigvals: Vec<f64> = (1..=n_modes)
        .map(|j| {
            let om = j as f64 * std::f64::consts::PI;
            om * om
        })
        .collect();
    let mode_weights = match kind {
        QKind::White => vec![1.0; n_modes],
        QKind::Fractional { r } => mode_eigvals.iter().map(|l| l.powf(-r)).collect(),
    };
    Ok(QSpec { kind, mode_weights, mode_eigvals })
}

impl QSpec {
    pub fn kind(&self) -> QKind {
        self.kind
    }

    pub fn n_modes(&self) -> usize {
        self.mode_weights.len()
    }

    pub fn mode_weights(&self) -> &[f64] {
        &self.mode_weights
    }

    pub fn mode_eigvals(&self) -> &[f64] {
        &self.mode_eigvals
    }
}

/// Partial Hilbert-Schmidt norm of A^{(gamma-1)/2} Q^{1/2} over the
/// retained modes: sqrt(sum_j lambda_j^{gamma-1} q_j).  Finite limits as
/// the truncation grows are exactly the regularity condition the solution
/// theory runs on; gamma is expected in [-1, 1].
pub fn hs_norm_partial(q: &QSpec, gamma: f64) -> f64 {
    q.mode_eigvals
        .iter()
        .zip(&q.mode_weights)
        .map(|(&l, &w)| l.powf(gamma - 1.0) * w)
        .sum::<f64>()
        .sqrt()
}

/// Table of weighted Brownian increments, row n = time step n, column j = mode j.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeIncrements {
    n_steps: usize,
    n_modes: usize,
    k: f64,
    seed: u64,
    /// Row-major: data[n * n_modes + j].
    data: Vec<f64>,
}

impl ModeIncrements {
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.n_modes..(n + 1) * self.n_modes]
    }

    pub fn entry(&self, n: usize, j: usize) -> f64 {
        self.data[n * self.n_modes + j]
    }
}

/// Sample the full increment table: entry (n, j) = sqrt(q_j) sqrt(k) xi
/// with xi = N(0,1) drawn at counter key (seed, mode j+1, step n).
pub fn sample_mode_increments(q: &QSpec, n_steps: usize, k: f64, seed: u64) -> Result<ModeIncrements> {
    if n_steps == 0 {
        return Err(Error::Config("increment table needs at least one step".into()));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Config(format!("step size must be positive, got {k}")));
    }
    let n_modes = q.n_modes();
    let sqrt_k = k.sqrt();
    let scales: Vec<f64> = q.mode_weights.iter().map(|w| w.sqrt() * sqrt_k).collect();
    let mut data = vec![0.0; n_steps * n_modes];
    for n in 0..n_steps {
        let row = &mut data[n * n_modes..(n + 1) * n_modes];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = scales[j] * standard_normal(seed, (j + 1) as u64, n as u64);
        }
    }
    Ok(ModeIncrements { n_steps, n_modes, k, seed, data })
}

/// Sum consecutive rows into a coarser table: `factor` fine steps per
/// coarse step.  Because Brownian increments over adjacent intervals add
/// exactly, the coarse table stays on the same path as the fine one.
pub fn coarsen_increments(fine: &ModeIncrements, factor: usize) -> Result<ModeIncrements> {
    if factor == 0 {
        return Err(Error::Config("coarsening factor must be at least 1".into()));
    }
    if fine.n_steps % factor != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} steps cannot be grouped in blocks of {factor}",
            fine.n_steps
        )));
    }
    let n_steps = fine.n_steps / factor;
    let n_modes = fine.n_modes;
    let mut data = vec![0.0; n_steps * n_modes];
    for coarse in 0..n_steps {
        let out = &mut data[coarse * n_modes..(coarse + 1) * n_modes];
        for sub in 0..factor {
            let row = fine.row(coarse * factor + sub);
            for (o, r) in out.iter_mut().zip(row) {
                *o += r;
            }
        }
    }
    Ok(ModeIncrements {
        n_steps,
        n_modes,
        k: fine.k * factor as f64,
        seed: fine.seed,
        data,
    })
}

/// Precomputed loads of each sine mode against each interior hat:
/// entries[i][j] = int_0^1 sqrt(2) sin((j+1) pi x) phi_{i+1}(x) dx.
#[derive(Debug, Clone)]
pub struct SineLoadTable {
    n_interior: usize,
    n_modes: usize,
    /// Row-major: entries[i * n_modes + j].
    entries: Vec<f64>,
}

impl SineLoadTable {
    pub fn build(mesh: &Mesh1D, n_modes: usize) -> Self {
        let n_interior = mesh.n_interior();
        let mut entries = vec![0.0; n_interior * n_modes];
        for j in 0..n_modes {
            let col = sine_mode_load(mesh, j + 1);
            for i in 0..n_interior {
                entries[i * n_modes + j] = col[i];
            }
        }
        SineLoadTable { n_interior, n_modes, entries }
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_modes + j]
    }
}

/// Raw load vector of one noise increment: b_i = sum_j G_ij inc_j, the
/// integral of the increment's sine expansion against each hat.  The mass
/// inverse is applied by the time stepper, not here.
pub fn increments_to_load(increment_row: &[f64], table: &SineLoadTable) -> Result<Vec<f64>> {
    if increment_row.len() != table.n_modes {
        return Err(Error::ShapeMismatch(format!(
            "increment row has {} modes, table {}",
            increment_row.len(),
            table.n_modes
        )));
    }
    let mut b = vec![0.0; table.n_interior];
    for i in 0..table.n_interior {
        let row = &table.entries[i * table.n_modes..(i + 1) * table.n_modes];
        b[i] = row.iter().zip(increment_row).map(|(g, w)| g * w).sum();
    }
    Ok(b)
}

// Binary increment-table format: little-endian throughout.
//   8 bytes  magic "SDWNOISE"
//   4 bytes  format version (u32) = 1
//   4 bytes  mode count J (u32)
//   8 bytes  step count (u64)
//   8 bytes  step size k (f64)
//   8 bytes  seed (u64)
//   then n_steps * J doubles, row-major.
const INCREMENT_MAGIC: &[u8; 8] = b"SDWNOISE";
const INCREMENT_VERSION: u32 = 1;

/// Serialize an increment table.
pub fn write_increments<W: Write>(inc: &ModeIncrements, mut w: W) -> Result<()> {
    w.write_all(INCREMENT_MAGIC)?;
    w.write_all(&INCREMENT_VERSION.to_le_bytes())?;
    w.write_all(&(inc.n_modes as u32).to_le_bytes())?;
    w.write_all(&(inc.n_steps as u64).to_le_bytes())?;
    w.write_all(&inc.k.to_le_bytes())?;
    w.write_all(&inc.seed.to_le_bytes())?;
    for v in &inc.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Restore a table written by [`write_increments`], bit-for-bit.
pub fn read_increments<R: Read>(mut r: R) -> Result<ModeIncrements> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != INCREMENT_MAGIC {
        return Err(Error::IncrementFile("bad magic bytes".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != INCREMENT_VERSION {
        return Err(Error::IncrementFile(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b4)?;
    let n_modes = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let n_steps = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let k = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let seed = u64::from_le_bytes(b8);
    if n_modes == 0 || n_steps == 0 || !(k.is_finite() && k > 0.0) {
        return Err(Error::IncrementFile(format!(
            "inconsistent header: J = {n_modes}, steps = {n_steps}, k = {k}"
        )));
    }
    let mut data = vec![0.0; n_steps * n_modes];
    for v in data.iter_mut() {
        r.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok(ModeIncrements { n_steps, n_modes, k, seed, data })
}
