//! Dense symmetric-matrix kernels.
//!
//! Dimensions here are small (the particle dimension `d`, typically well
//! under 32), so everything goes through a full symmetric eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// Relative tolerance (scaled by the trace) under which a slightly negative
/// eigenvalue is still treated as round-off of a PSD matrix.
pub const NEAR_PSD_TOL: f64 = 1e-10;

/// Slack applied when comparing the two sides of a matrix inequality:
/// `lhs <= rhs + CHECK_SLACK * (1 + rhs)`.
pub const CHECK_SLACK: f64 = 1e-12;

/// A square matrix whose entries are bit-exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixNorms {
    pub frobenius: f64,
    pub spectral: f64,
    pub schatten: f64,
}

/// Both sides of an inequality `lhs <= rhs` and whether it held.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(lhs: f64, rhs: f64) -> Self {
        let pass = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + CHECK_SLACK * (1.0 + rhs);
        Self { lhs, rhs, pass }
    }

    /// `rhs - lhs`; negative when the inequality failed.
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ) / 2`. An already symmetric input is
    /// returned unchanged bit for bit.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(invalid(format!(
                "matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix has non-finite entries"));
        }
        Ok(Self::symmetrize(m))
    }

    fn symmetrize(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(invalid("matrix rows must all have length equal to the row count"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.0[(i, j)]).collect()).collect()
    }

    /// Symmetric eigendecomposition, eigenvalues ascending.
    pub fn eigen(&self) -> Eigen {
        let n = self.dim();
        if n == 0 {
            return Eigen { values: Vec::new(), vectors: DMatrix::zeros(0, 0) };
        }
        let eig = SymmetricEigen::new(self.0.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(n, n, |i, c| eig.eigenvectors[(i, order[c])]);
        Eigen { values, vectors }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().values.first().copied().unwrap_or(0.0)
    }

    /// Applies `g` to the spectrum: `V diag(g(λ)) Vᵀ`, re-symmetrized.
    fn map_spectrum(eig: &Eigen, g: impl Fn(f64) -> f64) -> Self {
        let n = eig.values.len();
        let mut scaled = eig.vectors.clone();
        for (c, &lam) in eig.values.iter().enumerate() {
            let s = g(lam);
            for r in 0..n {
                scaled[(r, c)] *= s;
            }
        }
        Self::symmetrize(&scaled * eig.vectors.transpose())
    }
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Principal square root of a (near-)PSD matrix.
///
/// Eigenvalues down to `-NEAR_PSD_TOL * trace` are clamped to zero before
/// taking roots; anything more negative is rejected.
pub fn spd_sqrt(c: &SymMatrix) -> Result<SymMatrix> {
    let eig = c.eigen();
    check_near_psd(c, &eig)?;
    Ok(SymMatrix::map_spectrum(&eig, |l| l.max(0.0).sqrt()))
}

fn check_near_psd(c: &SymMatrix, eig: &Eigen) -> Result<()> {
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -NEAR_PSD_TOL * c.trace() {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues are clamped.
/// A PSD input comes back unchanged.
pub fn psd_project(c: &SymMatrix) -> SymMatrix {
    let eig = c.eigen();
    if eig.values.iter().all(|&l| l >= 0.0) {
        return c.clone();
    }
    SymMatrix::map_spectrum(&eig, |l| l.max(0.0))
}

/// Frobenius, spectral and Schatten-`p` norms. For a symmetric matrix the
/// singular values are the absolute eigenvalues.
pub fn matrix_norms(c: &SymMatrix, p: u32) -> Result<MatrixNorms> {
    if p == 0 {
        return Err(invalid("Schatten exponent must be positive"));
    }
    let sv: Vec<f64> = c.eigen().values.iter().map(|l| l.abs()).collect();
    let spectral = sv.iter().copied().fold(0.0, f64::max);
    let schatten = sv.iter().map(|s| s.powi(p as i32)).sum::<f64>().powf(1.0 / p as f64);
    Ok(MatrixNorms { frobenius: c.frobenius(), spectral, schatten })
}

fn spectral_norm(c: &SymMatrix) -> f64 {
    c.eigen().values.iter().fold(0.0, |acc, l| acc.max(l.abs()))
}

fn difference(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != b.dim() {
        return Err(invalid(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    SymMatrix::new(&a.0 - &b.0)
}

/// Square-root perturbation bound
/// `‖√A − √B‖₂ ≤ 2 √‖B⁻¹‖₂ · ‖A − B‖₂` for near-PSD `A` and SPD `B`.
pub fn sqrt_perturbation_check(a: &SymMatrix, b: &SymMatrix) -> Result<CheckReport> {
    let diff = difference(a, b)?;
    let b_min = b.min_eigenvalue();
    if b_min <= 0.0 {
        return Err(invalid(format!(
            "B must be positive definite (minimum eigenvalue {b_min:e})"
        )));
    }
    let root_diff = difference(&spd_sqrt(a)?, &spd_sqrt(b)?)?;
    let lhs = spectral_norm(&root_diff);
    let rhs = 2.0 * (1.0 / b_min).sqrt() * spectral_norm(&diff);
    Ok(CheckReport::new(lhs, rhs))
}

/// Powers–Størmer inequality `‖√A − √B‖_F ≤ |[A − B]|₁^{1/2}` for PSD `A`, `B`.
pub fn powers_stormer_check(a: &SymMatrix, b: &SymMatrix) -> Result<CheckReport> {
    let diff = difference(a, b)?;
    let root_diff = difference(&spd_sqrt(a)?, &spd_sqrt(b)?)?;
    let lhs = root_diff.frobenius();
    let trace_norm: f64 = diff.eigen().values.iter().map(|l| l.abs()).sum();
    Ok(CheckReport::new(lhs, trace_norm.sqrt()))
}
