//! Dense regularized least squares.
//!
//! A [`RidgeSystem`] holds `A = λI + Σ vᵢvᵢᵀ`, the moment vector `b = Σ vᵢyᵢ`
//! and the lower Cholesky factor of `A`. Every solve, bonus and log-determinant
//! goes through the factor; no explicit inverse is ever formed.
//!
//! [`DualRidge`] is the kernel-side counterpart: it factors `K + λI` for the
//! `N×N` Gram matrix of the same vectors, which is how high-dimensional
//! covariances are handled when the primal system would be too large.

use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub(crate) fn check_reg(reg: f64) -> Result<()> {
    if reg > 0.0 && reg.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveRegularization(reg))
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Stacks `vectors` as the rows of an `N×dim` design matrix.
pub fn design_matrix<V: AsRef<[f64]>>(dim: usize, vectors: &[V]) -> Result<DMatrix<f64>> {
    let mut design = DMatrix::zeros(vectors.len(), dim);
    for (i, v) in vectors.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        check_finite(v, "ridge vectors")?;
        for (j, &x) in v.iter().enumerate() {
            design[(i, j)] = x;
        }
    }
    Ok(design)
}

/// `[⟨vᵢ, vⱼ⟩]ᵢⱼ`.
pub fn gram_matrix<V: AsRef<[f64]>>(dim: usize, vectors: &[V]) -> Result<DMatrix<f64>> {
    let design = design_matrix(dim, vectors)?;
    let mut gram = &design * design.transpose();
    gram.fill_upper_triangle_with_lower_triangle();
    Ok(gram)
}

#[derive(Debug, Clone)]
pub struct RidgeSystem {
    reg: f64,
    samples: usize,
    gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    moment: DVector<f64>,
}

impl RidgeSystem {
    /// The system with no samples: `A = λI`, `b = 0`.
    pub fn empty(dim: usize, reg: f64) -> Result<Self> {
        check_reg(reg)?;
        let gram = DMatrix::identity(dim, dim) * reg;
        Self::from_parts(reg, 0, gram, DVector::zeros(dim))
    }

    pub fn from_samples<V: AsRef<[f64]>>(
        dim: usize,
        vectors: &[V],
        targets: &[f64],
        reg: f64,
    ) -> Result<Self> {
        check_reg(reg)?;
        if vectors.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: vectors.len(),
                found: targets.len(),
            });
        }
        check_finite(targets, "ridge targets")?;
        let design = design_matrix(dim, vectors)?;
        let mut gram = design.tr_mul(&design);
        gram.fill_upper_triangle_with_lower_triangle();
        for i in 0..dim {
            gram[(i, i)] += reg;
        }
        let moment = design.tr_mul(&DVector::from_column_slice(targets));
        Self::from_parts(reg, vectors.len(), gram, moment)
    }

    fn from_parts(
        reg: f64,
        samples: usize,
        gram: DMatrix<f64>,
        moment: DVector<f64>,
    ) -> Result<Self> {
        let factor = Cholesky::new(gram.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            reg,
            samples,
            gram,
            factor,
            moment,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn moment(&self) -> &[f64] {
        self.moment.as_slice()
    }

    pub fn lower_factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `A⁻¹ rhs` by forward and back substitution.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim(), "rhs length");
        self.factor
            .solve(&DVector::from_column_slice(rhs))
            .as_slice()
            .to_vec()
    }

    /// The ridge minimizer `A⁻¹ b`.
    pub fn solution(&self) -> Vec<f64> {
        self.solve(self.moment.as_slice())
    }

    /// `qᵀ A⁻¹ q`, computed as `‖L⁻¹q‖²` with one triangular solve.
    pub fn quadratic_form(&self, query: &[f64]) -> f64 {
        assert_eq!(query.len(), self.dim(), "query length");
        let z = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&DVector::from_column_slice(query))
            .expect("cholesky pivots are bounded below by sqrt(reg)");
        z.norm_squared()
    }

    /// Elliptical bonus `√(qᵀA⁻¹q)`; lies in `[0, ‖q‖/√λ]`.
    pub fn bonus(&self, query: &[f64]) -> f64 {
        libm::sqrt(self.quadratic_form(query).max(0.0))
    }

    /// `log det(A/λ) = log det(I + λ⁻¹ Σ vvᵀ)`.
    pub fn log_det_ratio(&self) -> f64 {
        let l = self.factor.l_dirty();
        let log_det: f64 = (0..self.dim()).map(|i| 2.0 * libm::log(l[(i, i)])).sum();
        log_det - self.dim() as f64 * libm::log(self.reg)
    }

    pub fn min_pivot(&self) -> f64 {
        let l = self.factor.l_dirty();
        (0..self.dim()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min)
    }

    /// `‖LLᵀ − A‖_F / ‖A‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let l = self.factor.l();
        let diff = &l * l.transpose() - &self.gram;
        diff.norm() / self.gram.norm()
    }
}

/// Fits `argmin_x Σᵢ(⟨vᵢ,x⟩ − yᵢ)² + λ‖x‖²`.
pub fn ridge_fit<V: AsRef<[f64]>>(
    dim: usize,
    vectors: &[V],
    targets: &[f64],
    reg: f64,
) -> Result<(RidgeSystem, Vec<f64>)> {
    let system = RidgeSystem::from_samples(dim, vectors, targets, reg)?;
    let solution = system.solution();
    Ok((system, solution))
}

pub fn ridge_objective<V: AsRef<[f64]>>(vectors: &[V], targets: &[f64], reg: f64, x: &[f64]) -> f64 {
    let residual: f64 = vectors
        .iter()
        .zip(targets)
        .map(|(v, y)| {
            let e = dot(v.as_ref(), x) - y;
            e * e
        })
        .sum();
    residual + reg * dot(x, x)
}

/// Factorization of `K + λI` for an `N×N` Gram matrix `K`.
#[derive(Debug, Clone)]
pub struct DualRidge {
    reg: f64,
    factor: Cholesky<f64, Dyn>,
}

impl DualRidge {
    pub fn new(gram: &DMatrix<f64>, reg: f64) -> Result<Self> {
        check_reg(reg)?;
        if gram.nrows() != gram.ncols() {
            return Err(Error::DimensionMismatch {
                expected: gram.nrows(),
                found: gram.ncols(),
            });
        }
        let mut shifted = gram.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] += reg;
        }
        let factor = Cholesky::new(shifted).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { reg, factor })
    }

    pub fn len(&self) -> usize {
        self.factor.l_dirty().nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(K + λI)⁻¹ y`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor
            .solve(&DVector::from_column_slice(rhs))
            .as_slice()
            .to_vec()
    }

    /// `λ⁻¹[k(x,x) − k_N(x)ᵀ(K_N + λI)⁻¹k_N(x)]`, the kernel form of `qᵀA⁻¹q`.
    pub fn quadratic_form(&self, self_kernel: f64, cross: &[f64]) -> f64 {
        assert_eq!(cross.len(), self.len(), "cross-kernel length");
        let z = self
            .factor
            .l_dirty()
            .solve_lower_triangular(&DVector::from_column_slice(cross))
            .expect("cholesky pivots are bounded below by sqrt(reg)");
        (self_kernel - z.norm_squared()) / self.reg
    }

    pub fn bonus(&self, self_kernel: f64, cross: &[f64]) -> f64 {
        libm::sqrt(self.quadratic_form(self_kernel, cross).max(0.0))
    }

    /// `log det(I + K/λ)`.
    pub fn log_det_ratio(&self) -> f64 {
        let l = self.factor.l_dirty();
        let n = self.len();
        let log_det: f64 = (0..n).map(|i| 2.0 * libm::log(l[(i, i)])).sum();
        log_det - n as f64 * libm::log(self.reg)
    }
}

pub const PSD_TOLERANCE: f64 = 1e-10;

/// `log det(I + K/λ)` for a Gram matrix, rejecting matrices with an
/// eigenvalue below `-1e-10`.
pub fn gram_log_det(gram: &DMatrix<f64>, reg: f64) -> Result<f64> {
    check_reg(reg)?;
    if gram.nrows() > 0 && lambda_min(gram) < -PSD_TOLERANCE {
        return Err(Error::NotPositiveSemidefinite);
    }
    Ok(DualRidge::new(gram, reg)?.log_det_ratio())
}

/// Smallest eigenvalue of a symmetric matrix (lower triangle is read).
pub fn lambda_min(matrix: &DMatrix<f64>) -> f64 {
    if matrix.nrows() == 0 {
        return f64::NAN;
    }
    matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Both sides of the kernel identity
/// `qᵀ(λI + Σvvᵀ)⁻¹q = λ⁻¹[⟨q,q⟩ − kᵀ(K + λI)⁻¹k]` with `k = [⟨vᵢ,q⟩]ᵢ`.
pub fn kernel_bonus_identity_check<V: AsRef<[f64]>>(
    dim: usize,
    vectors: &[V],
    reg: f64,
    query: &[f64],
) -> Result<(f64, f64)> {
    if query.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: query.len(),
        });
    }
    let targets = alloc::vec![0.0; vectors.len()];
    let primal = RidgeSystem::from_samples(dim, vectors, &targets, reg)?;
    let lhs = primal.quadratic_form(query);

    let gram = gram_matrix(dim, vectors)?;
    let cross: Vec<f64> = vectors.iter().map(|v| dot(v.as_ref(), query)).collect();
    let rhs = DualRidge::new(&gram, reg)?.quadratic_form(dot(query, query), &cross);
    Ok((lhs, rhs))
}
