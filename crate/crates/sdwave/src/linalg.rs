//! Direct solvers and a generalized symmetric eigensolver.
//!
//! Everything this crate assembles is a symmetric tridiagonal matrix of
//! dimension at most a few hundred, so simple deterministic algorithms are
//! the right tool: LDL^T elimination for linear systems, Gaussian
//! elimination with partial pivoting as a dense fallback/oracle, and a
//! cyclic Jacobi iteration (after a Cholesky reduction of the mass matrix)
//! for the stiffness/mass eigenvalue problem.  No pivot-order or threading
//! nondeterminism enters any result.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix stored as its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    /// `off` holds the sub/super-diagonal and must be one entry shorter
    /// than `diag`; a 1x1 matrix has an empty `off`.
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::ShapeMismatch("tridiagonal matrix needs dim >= 1".into()));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::ShapeMismatch(format!(
                "off-diagonal length {} does not match dimension {}",
                off.len(),
                diag.len()
            )));
        }
        Ok(SymTridiagonal { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n, "matvec dimension mismatch");
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// x^T A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(ay.iter()).map(|(a, b)| a * b).sum()
    }

    /// x^T A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// a*A + b*B entrywise; shapes must agree.
    pub fn linear_combination(a: f64, ma: &SymTridiagonal, b: f64, mb: &SymTridiagonal) -> Result<Self> {
        if ma.dim() != mb.dim() {
            return Err(Error::ShapeMismatch(format!(
                "cannot combine tridiagonal matrices of dims {} and {}",
                ma.dim(),
                mb.dim()
            )));
        }
        let diag = ma.diag.iter().zip(&mb.diag).map(|(x, y)| a * x + b * y).collect();
        let off = ma.off.iter().zip(&mb.off).map(|(x, y)| a * x + b * y).collect();
        SymTridiagonal::new(diag, off)
    }

    /// Row-major dense copy (test oracles, small dimensions only).
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = self.diag[i];
            if i + 1 < n {
                a[i * n + i + 1] = self.off[i];
                a[(i + 1) * n + i] = self.off[i];
            }
        }
        a
    }

    pub fn frobenius_norm(&self) -> f64 {
        let d: f64 = self.diag.iter().map(|x| x * x).sum();
        let o: f64 = self.off.iter().map(|x| x * x).sum();
        (d + 2.0 * o).sqrt()
    }
}

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone)]
pub struct DenseSym {
    dim: usize,
    entries: Vec<f64>,
}

impl DenseSym {
    /// Validates the symmetry invariant (relative tolerance 1e-14).
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!(
                "dense matrix of dim {dim} needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let scale = entries.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for i in 0..dim {
            for j in 0..i {
                let a = entries[i * dim + j];
                let b = entries[j * dim + i];
                if (a - b).abs() > 1e-14 * scale {
                    return Err(Error::ShapeMismatch(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(DenseSym { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Solve A x = b for symmetric positive definite tridiagonal A by LDL^T
/// elimination (the symmetric form of the Thomas algorithm).
///
/// A zero or negative pivot means the matrix is not positive definite and
/// is reported as such rather than patched over.
pub fn solve_sym_tridiag(m: &SymTridiagonal, b: &[f64]) -> Result<Vec<f64>> {
    Ok(TridiagFactor::new(m)?.solve(b))
}

/// Cached LDL^T factorization of a symmetric positive definite tridiagonal
/// matrix, for repeated solves against the same operator.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl TridiagFactor {
    pub fn new(m: &SymTridiagonal) -> Result<Self> {
        let n = m.dim();
        let mut d = vec![0.0; n];
        let mut l = vec![0.0; n.saturating_sub(1)];
        d[0] = m.diag[0];
        if d[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("pivot 0 is {}", d[0])));
        }
        for i in 0..n - 1 {
            l[i] = m.off[i] / d[i];
            d[i + 1] = m.diag[i + 1] - l[i] * m.off[i];
            if d[i + 1] <= 0.0 {
                return Err(Error::NotPositiveDefinite(format!(
                    "pivot {} is {}",
                    i + 1,
                    d[i + 1]
                )));
            }
        }
        Ok(TridiagFactor { d, l })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs dimension mismatch");
        let mut x = b.to_vec();
        // Forward: L y = b.
        for i in 1..n {
            x[i] -= self.l[i - 1] * x[i - 1];
        }
        // Diagonal: D z = y.
        for i in 0..n {
            x[i] /= self.d[i];
        }
        // Backward: L^T x = z.
        for i in (0..n - 1).rev() {
            x[i] -= self.l[i] * x[i + 1];
        }
        x
    }
}

/// Solve A x = b for dense symmetric A by Gaussian elimination with
/// partial pivoting.  Used as the reference path for the tridiagonal
/// solver and for small projection systems in tests.
pub fn solve_dense(a: &DenseSym, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "rhs length {} does not match dimension {n}",
            b.len()
        )));
    }
    let mut m = a.entries().to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for col in 0..n {
        // Partial pivot: largest magnitude in the column at or below `col`.
        let mut piv = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[piv * n + col].abs() {
                piv = row;
            }
        }
        if m[piv * n + col].abs() < 1e-13 * scale {
            return Err(Error::SingularMatrix(format!(
                "pivot {} below tolerance during elimination",
                m[piv * n + col]
            )));
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            x.swap(col, piv);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            if f == 0.0 {
                continue;
            }
            m[row * n + col] = 0.0;
            for j in col + 1..n {
                m[row * n + j] -= f * m[col * n + j];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for j in row + 1..n {
            s -= m[row * n + j] * x[j];
        }
        x[row] = s / m[row * n + row];
    }
    Ok(x)
}

/// Eigenpairs of the pencil S v = lambda M v with M-orthonormal
/// eigenvectors, eigenvalues ascending.
///
/// The mass matrix is kept alongside the pairs because every consumer
/// (modal coefficients, fractional norms) needs the same M to form
/// coefficients v_j^T M x.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    eigvals: Vec<f64>,
    /// eigvecs[j] is the j-th eigenvector.
    eigvecs: Vec<Vec<f64>>,
    mass: SymTridiagonal,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvec(&self, j: usize) -> &[f64] {
        &self.eigvecs[j]
    }

    pub fn mass(&self) -> &SymTridiagonal {
        &self.mass
    }

    /// Coefficients c_j = v_j^T M x of x in the M-orthonormal eigenbasis.
    pub fn modal_coefficients(&self, x: &[f64]) -> Vec<f64> {
        let mx = self.mass.matvec(x);
        self.eigvecs
            .iter()
            .map(|v| v.iter().zip(mx.iter()).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Solve the generalized symmetric eigenproblem S v = lambda M v.
///
/// M is reduced by its (bidiagonal) Cholesky factor L, the standard
/// symmetric problem C = L^-1 S L^-T is diagonalized by cyclic Jacobi
/// rotations, and eigenvectors are mapped back through L^-T, which makes
/// them M-orthonormal by construction.
pub fn gen_sym_eig(s: &SymTridiagonal, m: &SymTridiagonal) -> Result<SpectralDecomp> {
    let n = s.dim();
    if m.dim() != n {
        return Err(Error::ShapeMismatch(format!(
            "pencil dims differ: {} vs {}",
            n,
            m.dim()
        )));
    }
    // Cholesky M = L L^T with L lower bidiagonal: ld = diag(L), lo = subdiag(L).
    let mut ld = vec![0.0; n];
    let mut lo = vec![0.0; n.saturating_sub(1)];
    if m.diag[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite("mass matrix pivot 0".into()));
    }
    ld[0] = m.diag[0].sqrt();
    for i in 0..n - 1 {
        lo[i] = m.off[i] / ld[i];
        let t = m.diag[i + 1] - lo[i] * lo[i];
        if t <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("mass matrix pivot {}", i + 1)));
        }
        ld[i + 1] = t.sqrt();
    }

    let fwd = |b: &mut [f64]| {
        // L y = b
        b[0] /= ld[0];
        for i in 1..n {
            b[i] = (b[i] - lo[i - 1] * b[i - 1]) / ld[i];
        }
    };
    let bwd = |b: &mut [f64]| {
        // L^T y = b
        b[n - 1] /= ld[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - lo[i] * b[i + 1]) / ld[i];
        }
    };

    // C = L^-1 S L^-T, built column by column.
    let mut c = vec![0.0; n * n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        bwd(&mut col);
        let mut w = s.matvec(&col);
        fwd(&mut w);
        for i in 0..n {
            c[i * n + j] = w[i];
        }
    }
    // Symmetrize to remove the roundoff skew the two triangular solves leave.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (c[i * n + j] + c[j * n + i]);
            c[i * n + j] = avg;
            c[j * n + i] = avg;
        }
    }

    let (mut vals, vecs) = jacobi_eig(c, n);

    // Map eigenvectors back: v = L^-T y.  y orthonormal => v M-orthonormal.
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for (j, val) in vals.drain(..).enumerate() {
        let mut v = vecs[j].clone();
        bwd(&mut v);
        pairs.push((val, v));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("eigenvalue comparison"));

    // Deterministic sign: largest-magnitude component is positive.
    for (_, v) in pairs.iter_mut() {
        let mut idx = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[idx].abs() {
                idx = i;
            }
        }
        if v[idx] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }

    let eigvals = pairs.iter().map(|p| p.0).collect();
    let eigvecs = pairs.into_iter().map(|p| p.1).collect();
    Ok(SpectralDecomp { eigvals, eigvecs, mass: m.clone() })
}

/// Cyclic Jacobi diagonalization of a dense symmetric matrix (row-major).
/// Returns eigenvalues and eigenvectors (vecs[j] is the j-th vector).
fn jacobi_eig(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n == 1 {
        return (vec![a[0]], vec![vec![1.0]]);
    }
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * frob;
    for _sweep in 0..60 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i * n + j] * a[i * n + j];
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q of A.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                // Accumulate the rotation into V (columns are eigenvectors).
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let vecs: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    (vals, vecs)
}
