//! Exact draws from `N(Λ⁻¹r, Λ⁻¹)` for the coefficient conditional.
//!
//! Two algorithms target the same law:
//! * **Cholesky** factors the `D×D` precision directly (cheap when `D` is small
//!   relative to `n`).
//! * **Woodbury** draws an auxiliary Gaussian and solves an `n×n` system,
//!   never forming the `D×D` precision (cheap when `D ≫ n`).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const JITTER_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];

/// Which algorithm draws the coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MvnPath {
    /// Cholesky when `D/n < 2`, Woodbury otherwise.
    #[default]
    Auto,
    Cholesky,
    Woodbury,
}

impl MvnPath {
    pub fn resolve(self, n: usize, d: usize) -> MvnPath {
        match self {
            MvnPath::Auto if (d as f64) < 2.0 * n as f64 => MvnPath::Cholesky,
            MvnPath::Auto => MvnPath::Woodbury,
            p => p,
        }
    }
}

/// Cholesky factor with the jitter ladder applied to the diagonal
/// (multiples of the mean diagonal) when the plain factorization fails.
fn factor_with_jitter(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalError(
            "non-finite entry in precision matrix".into(),
        ));
    }
    if let Some(c) = Cholesky::new(a.clone()) {
        return Ok(c);
    }
    let mean_diag = a.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    for rung in JITTER_LADDER {
        let mut jittered = a.clone();
        for i in 0..a.nrows() {
            jittered[(i, i)] += rung * mean_diag;
        }
        if let Some(c) = Cholesky::new(jittered) {
            return Ok(c);
        }
    }
    Err(Error::SingularPrecision)
}

fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Draw from `N(Λ⁻¹ rhs, Λ⁻¹)` given a dense symmetric positive definite `Λ`.
pub fn sample_precision_cholesky<R: Rng + ?Sized>(
    rhs: &DVector<f64>,
    precision: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let d = rhs.len();
    if precision.shape() != (d, d) {
        return Err(Error::ShapeError(format!(
            "precision {:?} for rhs of length {d}",
            precision.shape()
        )));
    }
    let chol = factor_with_jitter(precision)?;
    let l = chol.l_dirty();
    // Λ = LLᵀ: solve L v = rhs, then Lᵀ x = v + ε gives mean Λ⁻¹rhs and covariance Λ⁻¹.
    let mut v = l
        .solve_lower_triangular(rhs)
        .ok_or(Error::SingularPrecision)?;
    v += standard_normals(d, rng);
    l.tr_solve_lower_triangular(&v)
        .ok_or(Error::SingularPrecision)
}

/// The coefficient conditional of a Gaussian linear model with a diagonal
/// Gaussian prior:
///
/// `Λ = ZᵀZ/σ² + diag(1/d_j)`, `rhs = Zᵀr/σ²`,
///
/// where `r` is the intercept-adjusted response and `d_j` the prior variance
/// of coefficient `j`.
#[derive(Debug, Clone, Copy)]
pub struct RegressionConditional<'a> {
    pub z: &'a DMatrix<f64>,
    /// `ZᵀZ`, precomputed once per chain.
    pub ztz: &'a DMatrix<f64>,
    pub response: &'a DVector<f64>,
    pub sigma_sq: f64,
    pub prior_var: &'a [f64],
}

impl RegressionConditional<'_> {
    fn check(&self) -> Result<()> {
        let (n, d) = self.z.shape();
        if self.response.len() != n || self.prior_var.len() != d || self.ztz.shape() != (d, d) {
            return Err(Error::ShapeError(format!(
                "Z is {n}x{d}, response {}, prior variances {}, ZᵀZ {:?}",
                self.response.len(),
                self.prior_var.len(),
                self.ztz.shape()
            )));
        }
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(Error::InvalidVariance(self.sigma_sq));
        }
        if self.prior_var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::NumericalError("non-positive prior variance".into()));
        }
        Ok(())
    }

    pub fn precision(&self) -> DMatrix<f64> {
        let mut p = self.ztz / self.sigma_sq;
        for (j, v) in self.prior_var.iter().enumerate() {
            p[(j, j)] += 1.0 / v;
        }
        p
    }

    pub fn rhs(&self) -> DVector<f64> {
        self.z.tr_mul(self.response) / self.sigma_sq
    }

    fn draw_cholesky<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        sample_precision_cholesky(&self.rhs(), &self.precision(), rng)
    }

    /// With `Φ = Z/σ`, `α = r/σ`, `Δ = diag(d)`: draw `u ~ N(0, Δ)`,
    /// `δ ~ N(0, I_n)`, solve `(ΦΔΦᵀ + I) w = α − (Φu + δ)` and return
    /// `u + ΔΦᵀw`.
    fn draw_woodbury<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let (n, d) = self.z.shape();
        let sigma = self.sigma_sq.sqrt();
        let phi = self.z / sigma;
        let delta = DVector::from_column_slice(self.prior_var);
        let u = standard_normals(d, rng).component_mul(&delta.map(f64::sqrt));
        let noise = standard_normals(n, rng);
        let v = &phi * &u + noise;
        // ΦΔΦᵀ + I
        let phi_delta = DMatrix::from_fn(n, d, |i, j| phi[(i, j)] * delta[j]);
        let mut m = &phi_delta * phi.transpose();
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        let chol = factor_with_jitter(&m)?;
        let alpha = self.response / sigma;
        let w = chol.solve(&(alpha - v));
        Ok(u + phi_delta.tr_mul(&w))
    }
}

/// Draw the coefficient vector, choosing the algorithm from `path`.
pub fn draw_mvn_precision<R: Rng + ?Sized>(
    cond: &RegressionConditional<'_>,
    path: MvnPath,
    rng: &mut R,
) -> Result<DVector<f64>> {
    cond.check()?;
    let (n, d) = cond.z.shape();
    let beta = match path.resolve(n, d) {
        MvnPath::Woodbury => cond.draw_woodbury(rng)?,
        _ => cond.draw_cholesky(rng)?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NumericalError("non-finite coefficient draw".into()));
    }
    Ok(beta)
}
