//! Piecewise-linear finite elements on a uniform grid over (0,1) with
//! homogeneous Dirichlet boundary conditions.
//!
//! Functions are represented by their coefficients on the interior hat
//! basis phi_1..phi_{N-1} (N = number of cells, h = 1/N), so a mesh with N
//! cells carries N-1 degrees of freedom.  The stiffness matrix discretizes
//! the Dirichlet Laplacian through the pencil S v = lambda M v; the
//! consistent mass matrix is kept un-lumped because the L^2 inner product
//! it induces is the norm every error and energy statistic below is
//! measured in.

use crate::error::{Error, Result};
use crate::linalg::{solve_sym_tridiag, SpectralDecomp, SymTridiagonal};

/// Uniform mesh on (0,1) with at least two cells (at least one interior node).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh1D {
    n_cells: usize,
}

impl Mesh1D {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 cells for an interior node, got {n_cells}"
            )));
        }
        Ok(Mesh1D { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    /// Coordinate of global node i (0 and n_cells are the boundary).
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }
}

/// Coefficients on the interior hat basis of one mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefVec {
    pub values: Vec<f64>,
}

impl CoefVec {
    pub fn new(values: Vec<f64>) -> Self {
        CoefVec { values }
    }

    pub fn zeros(mesh: &Mesh1D) -> Self {
        CoefVec { values: vec![0.0; mesh.n_interior()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_mesh(&self, mesh: &Mesh1D) -> Result<()> {
        if self.len() != mesh.n_interior() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient vector of length {} does not fit mesh with {} interior nodes",
                self.len(),
                mesh.n_interior()
            )));
        }
        Ok(())
    }
}

/// Stiffness matrix: S_ii = 2/h, S_{i,i+1} = -1/h.
pub fn assemble_stiffness(mesh: &Mesh1D) -> SymTridiagonal {
    let n = mesh.n_interior();
    let h = mesh.h();
    SymTridiagonal::new(vec![2.0 / h; n], vec![-1.0 / h; n.saturating_sub(1)])
        .expect("stiffness shape is consistent by construction")
}

/// Consistent mass matrix: M_ii = 2h/3, M_{i,i+1} = h/6.
pub fn assemble_mass(mesh: &Mesh1D) -> SymTridiagonal {
    let n = mesh.n_interior();
    let h = mesh.h();
    SymTridiagonal::new(vec![2.0 * h / 3.0; n], vec![h / 6.0; n.saturating_sub(1)])
        .expect("mass shape is consistent by construction")
}

// Composite 3-point Gauss-Legendre rule per cell: exact through degree 5,
// which integrates (piecewise linear) x (hat) products exactly and leaves
// only the smooth-integrand quadrature error for general data.
const GAUSS3_NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Load vector b_i = int f(x) phi_i(x) dx by composite 3-point Gauss.
pub fn assemble_load<F: Fn(f64) -> f64>(mesh: &Mesh1D, f: F) -> Result<Vec<f64>> {
    let n = mesh.n_cells();
    let h = mesh.h();
    let mut b = vec![0.0; mesh.n_interior()];
    for cell in 0..n {
        let a = cell as f64 * h;
        let mid = a + 0.5 * h;
        for g in 0..3 {
            let x = mid + 0.5 * h * GAUSS3_NODES[g];
            let w = 0.5 * h * GAUSS3_WEIGHTS[g];
            let fx = f(x);
            if !fx.is_finite() {
                return Err(Error::NonFinite(format!("integrand value {fx} at x = {x}")));
            }
            // Left node of this cell is global node `cell`, right is `cell+1`.
            if cell >= 1 {
                b[cell - 1] += w * fx * (a + h - x) / h;
            }
            if cell + 1 <= n - 1 {
                b[cell] += w * fx * (x - a) / h;
            }
        }
    }
    Ok(b)
}

/// Load vector of the j-th Dirichlet sine mode, b_i = int sqrt(2) sin(j pi x) phi_i(x) dx,
/// in closed form: integrating the hat against sin twice by parts collapses to a
/// second difference of sines, giving 2 sqrt(2) sin(j pi x_i) (1 - cos(j pi h)) / ((j pi)^2 h).
pub fn sine_mode_load(mesh: &Mesh1D, mode: usize) -> Vec<f64> {
    let h = mesh.h();
    let om = mode as f64 * std::f64::consts::PI;
    let factor = 2.0 * std::f64::consts::SQRT_2 * (1.0 - (om * h).cos()) / (om * om * h);
    (1..mesh.n_cells())
        .map(|i| factor * (om * mesh.node(i)).sin())
        .collect()
}

/// L^2(0,1) projection onto the mesh: solve M c = (f, phi_i).
pub fn l2_project<F: Fn(f64) -> f64>(f: F, mesh: &Mesh1D) -> Result<CoefVec> {
    let b = assemble_load(mesh, f)?;
    let m = assemble_mass(mesh);
    Ok(CoefVec::new(solve_sym_tridiag(&m, &b)?))
}

/// Input to [`ritz_project`].  The Ritz (elliptic) projection tests the
/// gradient of the input against hat gradients, so plain point values are
/// not enough: the caller must supply a derivative or a piecewise-linear
/// function whose weak derivative is known.
pub enum RitzSource<'a> {
    /// Analytic input given by its derivative f'.
    Derivative(&'a dyn Fn(f64) -> f64),
    /// Piecewise-linear function on a nested finer mesh (same mesh allowed).
    FemFunction { mesh: &'a Mesh1D, coefs: &'a CoefVec },
    /// Point values only.  Always rejected; present so that callers holding
    /// just values get the canonical "unsupported input" error.
    ValuesOnly(&'a dyn Fn(f64) -> f64),
}

/// Ritz projection onto the mesh: solve S c = (f', phi_i').
pub fn ritz_project(source: RitzSource<'_>, mesh: &Mesh1D) -> Result<CoefVec> {
    let n = mesh.n_cells();
    let h = mesh.h();
    let b = match source {
        RitzSource::Derivative(df) => {
            // phi_i' is -1/h left of node i... more precisely +1/h on the
            // cell ending at i and -1/h on the cell starting at i, so each
            // cell integral of f' feeds its two end nodes with opposite sign.
            let mut b = vec![0.0; mesh.n_interior()];
            for cell in 0..n {
                let a = cell as f64 * h;
                let mid = a + 0.5 * h;
                let mut cell_int = 0.0;
                for g in 0..3 {
                    let x = mid + 0.5 * h * GAUSS3_NODES[g];
                    let w = 0.5 * h * GAUSS3_WEIGHTS[g];
                    let dfx = df(x);
                    if !dfx.is_finite() {
                        return Err(Error::NonFinite(format!("derivative value {dfx} at x = {x}")));
                    }
                    cell_int += w * dfx;
                }
                if cell + 1 <= n - 1 {
                    b[cell] += cell_int / h;
                }
                if cell >= 1 {
                    b[cell - 1] -= cell_int / h;
                }
            }
            b
        }
        RitzSource::FemFunction { mesh: fine, coefs } => {
            coefs.check_mesh(fine)?;
            if fine.n_cells() % n != 0 {
                return Err(Error::UnsupportedInput(format!(
                    "source mesh with {} cells is not a refinement of {} cells",
                    fine.n_cells(),
                    n
                )));
            }
            // For piecewise-linear f, int f' phi_i' collapses to a second
            // difference of the nodal values at the coarse nodes.
            let ratio = fine.n_cells() / n;
            let value_at = |coarse_node: usize| -> f64 {
                let fine_node = coarse_node * ratio;
                if fine_node == 0 || fine_node == fine.n_cells() {
                    0.0
                } else {
                    coefs.values[fine_node - 1]
                }
            };
            (1..n)
                .map(|i| (2.0 * value_at(i) - value_at(i - 1) - value_at(i + 1)) / h)
                .collect()
        }
        RitzSource::ValuesOnly(_) => {
            return Err(Error::UnsupportedInput(
                "Ritz projection needs a derivative (or a piecewise-linear source); point values alone are not enough".into(),
            ));
        }
    };
    let s = assemble_stiffness(mesh);
    Ok(CoefVec::new(solve_sym_tridiag(&s, &b)?))
}

/// Discrete L^2 norm sqrt(v^T M v) — equals the L^2(0,1) norm of the
/// piecewise-linear function with coefficients v.
pub fn discrete_l2_norm(v: &CoefVec, mass: &SymTridiagonal) -> Result<f64> {
    if v.len() != mass.dim() {
        return Err(Error::ShapeMismatch(format!(
            "vector length {} vs mass dimension {}",
            v.len(),
            mass.dim()
        )));
    }
    Ok(mass.quadratic_form(&v.values).max(0.0).sqrt())
}

/// Fractional-power norm || A_h^{s/2} v || = sqrt(sum_j lambda_j^s c_j^2)
/// where c_j are the coefficients of v in the M-orthonormal eigenbasis of
/// the (stiffness, mass) pencil.  The exponent is clamped to [-2, 2], the
/// range the discrete operator resolves meaningfully.
pub fn discrete_fractional_norm(v: &CoefVec, s: f64, decomp: &SpectralDecomp) -> Result<f64> {
    if v.len() != decomp.dim() {
        return Err(Error::ShapeMismatch(format!(
            "vector length {} vs decomposition dimension {}",
            v.len(),
            decomp.dim()
        )));
    }
    let s = s.clamp(-2.0, 2.0);
    let coefs = decomp.modal_coefficients(&v.values);
    let total: f64 = coefs
        .iter()
        .zip(decomp.eigvals())
        .map(|(c, &l)| l.powf(s) * c * c)
        .sum();
    Ok(total.max(0.0).sqrt())
}

/// Evaluate the piecewise-linear function at x in [0,1].
pub fn eval_fem_function(mesh: &Mesh1D, coefs: &CoefVec, x: f64) -> Result<f64> {
    coefs.check_mesh(mesh)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [0,1]")));
    }
    let n = mesh.n_cells();
    let h = mesh.h();
    let cell = ((x / h) as usize).min(n - 1);
    let a = cell as f64 * h;
    let left = if cell == 0 { 0.0 } else { coefs.values[cell - 1] };
    let right = if cell + 1 == n { 0.0 } else { coefs.values[cell] };
    let t = (x - a) / h;
    Ok(left * (1.0 - t) + right * t)
}
