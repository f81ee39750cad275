//! Covariance matrices of Gaussian states and the handful of symplectic
//! operations the pipeline needs.
//!
//! Quadratures are ordered `(x1, p1, x2, p2, ...)` with `x = (a + a†)/√2`,
//! so the vacuum has variance 1/2 in every quadrature.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance on `|V - Vᵀ|` accepted as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue of `V + iΩ/2` still accepted as physical.
pub const PHYSICALITY_TOL: f64 = 1e-9;
/// Arguments of [`entropy_f`] in `[1 - ENTROPY_CLAMP, 1)` are snapped to 1.
pub const ENTROPY_CLAMP: f64 = 1e-9;

/// Real symmetric `2n × 2n` covariance matrix of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    data: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::Structural(format!(
                "covariance matrix must be square, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.nrows() == 0 || !data.nrows().is_multiple_of(2) {
            return Err(Error::Structural(format!(
                "covariance matrix dimension must be even and positive, got {}",
                data.nrows()
            )));
        }
        Ok(Self { data })
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::Structural(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                values.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, values))
    }

    /// `n`-mode vacuum, `I/2`.
    pub fn vacuum(n_modes: usize) -> Self {
        Self::thermal(n_modes, 0.0)
    }

    /// `n` independent thermal modes with occupation `nbar`, `(nbar + 1/2) I`.
    pub fn thermal(n_modes: usize, nbar: f64) -> Self {
        let dim = 2 * n_modes.max(1);
        Self {
            data: DMatrix::from_diagonal_element(dim, dim, nbar + 0.5),
        }
    }

    /// Two-mode matrix `[[V1, V3], [V3ᵀ, V2]]`.
    pub fn from_blocks(v1: &Matrix2<f64>, v2: &Matrix2<f64>, v3: &Matrix2<f64>) -> Self {
        let mut data = DMatrix::zeros(4, 4);
        data.view_mut((0, 0), (2, 2)).copy_from(v1);
        data.view_mut((2, 2), (2, 2)).copy_from(v2);
        data.view_mut((0, 2), (2, 2)).copy_from(v3);
        data.view_mut((2, 0), (2, 2)).copy_from(&v3.transpose());
        Self { data }
    }

    /// Block-diagonal combination of independent subsystems, `self ⊕ other`.
    pub fn direct_sum(&self, other: &CovarianceMatrix) -> Self {
        let (a, b) = (self.dim(), other.dim());
        let mut data = DMatrix::zeros(a + b, a + b);
        data.view_mut((0, 0), (a, a)).copy_from(&self.data);
        data.view_mut((a, a), (b, b)).copy_from(&other.data);
        Self { data }
    }

    pub fn n_modes(&self) -> usize {
        self.data.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[(row, col)]
    }

    /// 2×2 block between modes `i` and `j` (zero-based).
    pub fn mode_block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.data.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    /// Reduced state of the listed modes, in the listed order.
    pub fn submatrix(&self, modes: &[usize]) -> Result<Self> {
        if let Some(&bad) = modes.iter().find(|&&m| m >= self.n_modes()) {
            return Err(Error::Structural(format!(
                "mode index {bad} out of range for {} modes",
                self.n_modes()
            )));
        }
        let idx = quadrature_indices(modes);
        let data = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.data[(idx[r], idx[c])]);
        Self::from_matrix(data)
    }

    /// `(V + Vᵀ)/2`.
    pub fn symmetrized(&self) -> Self {
        Self {
            data: (&self.data + self.data.transpose()) * 0.5,
        }
    }

    /// Largest `|V_ij - V_ji|` relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.data.amax().max(f64::MIN_POSITIVE);
        (&self.data - self.data.transpose()).amax() / scale
    }

    pub fn max_abs_diff(&self, other: &CovarianceMatrix) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.data - &other.data).amax()
    }
}

fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
}

/// Block-diagonal symplectic form with blocks `[[0, 1], [-1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    pub symmetric: bool,
    pub physical: bool,
    /// Smallest eigenvalue of the Hermitian matrix `V + (i/2)Ω`.
    pub min_eigenvalue: f64,
    pub relative_asymmetry: f64,
}

impl PhysicalityReport {
    pub fn is_valid(&self) -> bool {
        self.symmetric && self.physical
    }
}

/// Checks symmetry and the uncertainty relation `V + (i/2)Ω ≥ 0`.
pub fn validate(cm: &CovarianceMatrix) -> PhysicalityReport {
    let relative_asymmetry = cm.relative_asymmetry();
    let min_eigenvalue = uncertainty_min_eigenvalue(cm);
    PhysicalityReport {
        symmetric: relative_asymmetry <= SYMMETRY_TOL,
        physical: min_eigenvalue >= -PHYSICALITY_TOL,
        min_eigenvalue,
        relative_asymmetry,
    }
}

/// Returns the matrix unchanged if it passes [`validate`], otherwise a
/// [`Error::NonPhysical`] naming `context`.
pub fn ensure_physical(cm: CovarianceMatrix, context: &str) -> Result<CovarianceMatrix> {
    let report = validate(&cm);
    if report.is_valid() {
        Ok(cm)
    } else {
        Err(Error::NonPhysical(format!(
            "{context}: min eigenvalue of V + iΩ/2 = {:e}, relative asymmetry = {:e}",
            report.min_eigenvalue, report.relative_asymmetry
        )))
    }
}

// The Hermitian matrix X + iY (X symmetric, Y antisymmetric) has the same
// spectrum, doubled, as the real symmetric matrix [[X, -Y], [Y, X]].
fn uncertainty_min_eigenvalue(cm: &CovarianceMatrix) -> f64 {
    let v = cm.symmetrized().data;
    let half_omega = symplectic_form(cm.n_modes()) * 0.5;
    let d = cm.dim();
    let mut real = DMatrix::zeros(2 * d, 2 * d);
    real.view_mut((0, 0), (d, d)).copy_from(&v);
    real.view_mut((d, d), (d, d)).copy_from(&v);
    real.view_mut((0, d), (d, d)).copy_from(&(-&half_omega));
    real.view_mut((d, 0), (d, d)).copy_from(&half_omega);
    SymmetricEigen::new(real).eigenvalues.min()
}

/// Symplectic spectrum, ascending. The vacuum has every value equal to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticSpectrum {
    pub values: Vec<f64>,
}

impl SymplecticSpectrum {
    pub fn least(&self) -> f64 {
        self.values[0]
    }
}

/// Moduli of the eigenvalues of `iΩV`, which come in `±ν` pairs.
pub fn symplectic_eigenvalues(cm: &CovarianceMatrix) -> Result<SymplecticSpectrum> {
    let report = validate(cm);
    if !report.physical {
        return Err(Error::Domain(format!(
            "symplectic spectrum requested for a non-physical matrix (min eigenvalue {:e})",
            report.min_eigenvalue
        )));
    }
    let v = cm.symmetrized().data;
    let omega_v = symplectic_form(cm.n_modes()) * v;
    let mut moduli: Vec<f64> = omega_v
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    moduli.sort_by(f64::total_cmp);
    let values = moduli
        .chunks(2)
        .map(|pair| 0.5 * (pair[0] + pair[1]))
        .collect();
    Ok(SymplecticSpectrum { values })
}

/// Entropy function of a thermal mode in terms of its scaled symplectic
/// eigenvalue `x = 2ν` (vacuum at `x = 1`), in bits.
pub fn entropy_f(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 1.0 - ENTROPY_CLAMP {
        return Err(Error::Domain(format!("entropy_f requires x >= 1, got {x}")));
    }
    if x <= 1.0 {
        return Ok(0.0);
    }
    let plus = 0.5 * (x + 1.0);
    let minus = 0.5 * (x - 1.0);
    Ok(plus * plus.log2() - minus * minus.log2())
}

/// Reorders modes: mode `k` of the result is mode `order[k]` of the input.
pub fn permute_modes(cm: &CovarianceMatrix, order: &[usize]) -> Result<CovarianceMatrix> {
    let n = cm.n_modes();
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::Structural(format!(
            "permutation has {} entries for {n} modes",
            order.len()
        )));
    }
    for &m in order {
        if m >= n || std::mem::replace(&mut seen[m], true) {
            return Err(Error::Structural(format!(
                "{order:?} is not a permutation of 0..{n}"
            )));
        }
    }
    cm.submatrix(order)
}

/// Splits a two-mode matrix into `(V1, V2, V3)` with `V = [[V1, V3], [V3ᵀ, V2]]`.
pub fn extract_blocks(cm: &CovarianceMatrix) -> Result<(Matrix2<f64>, Matrix2<f64>, Matrix2<f64>)> {
    if cm.n_modes() != 2 {
        return Err(Error::Structural(format!(
            "block extraction needs 2 modes, got {}",
            cm.n_modes()
        )));
    }
    Ok((
        cm.mode_block(0, 0),
        cm.mode_block(1, 1),
        cm.mode_block(0, 1),
    ))
}
