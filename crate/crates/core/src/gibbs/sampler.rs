use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mvn::{draw_mvn_precision, MvnPath, RegressionConditional};
use super::variates::{sample_inverse_gamma, sample_inverse_gaussian};
use crate::error::{Error, Result};
use crate::rng::{domain, SeedTree};

/// Lower bound on `σ_ε²` and `τ²` draws. A perfectly fitting response drives
/// the variance chain toward zero geometrically; the floor keeps the precision
/// matrix finite.
const VARIANCE_FLOOR: f64 = 1e-100;
/// Floor on `β_j²` inside the local-scale conditional.
const BETA_SQ_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prior {
    Ridge,
    #[default]
    Lasso,
}

/// Chain length, retention and sampler switches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub prior: Prior,
    #[serde(default)]
    pub mvn_path: MvnPath,
    /// Hold `σ_ε²` at this value instead of sampling it.
    #[serde(default)]
    pub fixed_sigma_eps_sq: Option<f64>,
    /// Hold `τ²` at this value instead of sampling it.
    #[serde(default)]
    pub fixed_tau_sq: Option<f64>,
    /// Lasso only: when false, `λ_j²` stays pinned at 1.
    #[serde(default = "yes")]
    pub update_local_scales: bool,
}

fn yes() -> bool {
    true
}

impl Default for GibbsConfig {
    /// 2000 iterations, 1000 burn-in, thinning 5: 200 retained draws.
    fn default() -> Self {
        Self {
            n_samples: 2000,
            burn_in: 1000,
            thin: 5,
            seed: 0,
            prior: Prior::Lasso,
            mvn_path: MvnPath::Auto,
            fixed_sigma_eps_sq: None,
            fixed_tau_sq: None,
            update_local_scales: true,
        }
    }
}

impl GibbsConfig {
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.n_samples <= self.burn_in {
            0
        } else {
            (self.n_samples - self.burn_in) / self.thin
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.n_samples <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "n_samples ({}) must exceed burn_in ({})",
                self.n_samples, self.burn_in
            )));
        }
        if self.retained() == 0 {
            return Err(Error::InvalidConfig(
                "configuration retains no draws".into(),
            ));
        }
        for (name, v) in [
            ("sigma_eps_sq", self.fixed_sigma_eps_sq),
            ("tau_sq", self.fixed_tau_sq),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "fixed {name} must be positive, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Retained posterior draws, one entry (or row) per retained iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub beta0: Vec<f64>,
    pub beta: DMatrix<f64>,
    pub sigma_eps_sq: Vec<f64>,
    pub lambda_sq: DMatrix<f64>,
    pub tau_sq: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.beta0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta0.is_empty()
    }

    pub fn n_coefficients(&self) -> usize {
        self.beta.ncols()
    }

    /// Posterior mean of each coefficient.
    pub fn beta_mean(&self) -> DVector<f64> {
        DVector::from_fn(self.beta.ncols(), |j, _| self.beta.column(j).mean())
    }

    /// Reorders draws by `perm` (`perm[i]` is the source index of draw `i`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let rows =
            |m: &DMatrix<f64>| DMatrix::from_fn(perm.len(), m.ncols(), |i, j| m[(perm[i], j)]);
        let pick = |v: &[f64]| perm.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Self {
            beta0: pick(&self.beta0),
            beta: rows(&self.beta),
            sigma_eps_sq: pick(&self.sigma_eps_sq),
            lambda_sq: rows(&self.lambda_sq),
            tau_sq: pick(&self.tau_sq),
            xi: pick(&self.xi),
        }
    }

    /// One row per draw: `beta0, beta_1..beta_D, sigma_eps_sq, tau_sq, xi, lambda_sq_1..lambda_sq_D`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let d = self.n_coefficients();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["beta0".to_string()];
        header.extend((1..=d).map(|j| format!("beta_{j}")));
        header.extend(["sigma_eps_sq", "tau_sq", "xi"].map(String::from));
        header.extend((1..=d).map(|j| format!("lambda_sq_{j}")));
        w.write_record(&header)?;
        for s in 0..self.len() {
            let mut rec = vec![self.beta0[s].to_string()];
            rec.extend(self.beta.row(s).iter().map(|v| v.to_string()));
            rec.push(self.sigma_eps_sq[s].to_string());
            rec.push(self.tau_sq[s].to_string());
            rec.push(self.xi[s].to_string());
            rec.extend(self.lambda_sq.row(s).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `n·log(1/(√(2π)σ)) − ‖y − β₀1 − Zβ‖² / (2σ²)`.
pub fn gaussian_log_likelihood(
    y: &[f64],
    z: &DMatrix<f64>,
    beta0: f64,
    beta: &[f64],
    sigma_eps_sq: f64,
) -> Result<f64> {
    if sigma_eps_sq.is_nan() || sigma_eps_sq <= 0.0 {
        return Err(Error::InvalidVariance(sigma_eps_sq));
    }
    if z.nrows() != y.len() || z.ncols() != beta.len() {
        return Err(Error::ShapeError(format!(
            "y has {} entries, Z is {:?}, beta has {}",
            y.len(),
            z.shape(),
            beta.len()
        )));
    }
    let fitted = z * DVector::from_column_slice(beta);
    let rss: f64 = y
        .iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| (yi - beta0 - fi).powi(2))
        .sum();
    let n = y.len() as f64;
    Ok(-n * 0.5 * (2.0 * PI * sigma_eps_sq).ln() - rss / (2.0 * sigma_eps_sq))
}

/// Bayesian ridge: `λ_j² ≡ 1`.
pub fn gibbs_ridge(y: &[f64], z: &DMatrix<f64>, cfg: &GibbsConfig) -> Result<PosteriorDraws> {
    run_chain(y, z, cfg, Prior::Ridge)
}

/// Bayesian lasso: exponential mixing on the local scales `λ_j²`.
pub fn gibbs_lasso(y: &[f64], z: &DMatrix<f64>, cfg: &GibbsConfig) -> Result<PosteriorDraws> {
    run_chain(y, z, cfg, Prior::Lasso)
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericalError(format!(
            "{name} draw {v} is not a positive finite number"
        )))
    }
}

fn sample_normal<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    let e: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * e
}

/// Runs one chain under `prior`. Iteration `s` updates, in order:
/// `β₀ | β⁽ˢ⁻¹⁾`, `β | β₀⁽ˢ⁾`, `σ_ε²`, `λ_j²` (lasso), `τ²`, `ξ`.
pub fn run_chain(
    y: &[f64],
    z: &DMatrix<f64>,
    cfg: &GibbsConfig,
    prior: Prior,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let (n, d) = z.shape();
    if y.len() != n {
        return Err(Error::ShapeError(format!(
            "y has {} entries but Z has {n} rows",
            y.len()
        )));
    }
    if n < 2 || d < 1 {
        return Err(Error::InsufficientData(format!(
            "need n >= 2 and D >= 1, got n={n}, D={d}"
        )));
    }
    if y.iter().chain(z.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalError(
            "non-finite response or predictor".into(),
        ));
    }

    let mut rng = SeedTree::new(cfg.seed).stream(&[domain::GIBBS]);
    let y_vec = DVector::from_column_slice(y);
    let ztz = z.tr_mul(z);
    let nf = n as f64;
    let df = d as f64;
    let update_lambda = prior == Prior::Lasso && cfg.update_local_scales;

    let y_mean = y_vec.mean();
    let y_var = y_vec.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let mut beta = DVector::<f64>::zeros(d);
    let mut sigma_sq = cfg
        .fixed_sigma_eps_sq
        .unwrap_or(if y_var > 0.0 { y_var } else { 1.0 });
    let mut tau_sq = cfg.fixed_tau_sq.unwrap_or(1.0);
    let mut xi = 1.0;
    let mut lambda_sq = vec![1.0; d];

    let keep = cfg.retained();
    let mut out = PosteriorDraws {
        beta0: Vec::with_capacity(keep),
        beta: DMatrix::zeros(keep, d),
        sigma_eps_sq: Vec::with_capacity(keep),
        lambda_sq: DMatrix::zeros(keep, d),
        tau_sq: Vec::with_capacity(keep),
        xi: Vec::with_capacity(keep),
    };

    let mut prior_var = vec![0.0; d];
    for s in 1..=cfg.n_samples {
        // β₀ | rest ~ N(mean(y − Zβ), σ²/n)
        let fitted = z * &beta;
        let resid_mean = (&y_vec - &fitted).mean();
        let beta0 = sample_normal(resid_mean, sigma_sq / nf, &mut rng);

        // β | rest ~ N(Λ⁻¹ Zᵀ(y − β₀1)/σ², Λ⁻¹)
        for (v, l) in prior_var.iter_mut().zip(&lambda_sq) {
            *v = sigma_sq * tau_sq * l;
        }
        let response = y_vec.add_scalar(-beta0);
        let cond = RegressionConditional {
            z,
            ztz: &ztz,
            response: &response,
            sigma_sq,
            prior_var: &prior_var,
        };
        beta = draw_mvn_precision(&cond, cfg.mvn_path, &mut rng)?;

        // σ² | rest ~ IG((n + D)/2, ½(RSS + Σ β_j²/(τ²λ_j²)))
        let rss = (&response - z * &beta).norm_squared();
        let penalty: f64 = beta
            .iter()
            .zip(&lambda_sq)
            .map(|(b, l)| b * b / (tau_sq * l))
            .sum();
        sigma_sq = match cfg.fixed_sigma_eps_sq {
            Some(v) => v,
            None => positive(
                "sigma_eps_sq",
                sample_inverse_gamma((nf + df) / 2.0, 0.5 * (rss + penalty), &mut rng)?
                    .max(VARIANCE_FLOOR),
            )?,
        };

        // 1/λ_j² | rest ~ IGauss(√(2τ²σ²/β_j²), 2)
        if update_lambda {
            for (l, b) in lambda_sq.iter_mut().zip(beta.iter()) {
                let mu = (2.0 * tau_sq * sigma_sq / (b * b).max(BETA_SQ_FLOOR)).sqrt();
                let inv = sample_inverse_gaussian(mu.min(f64::MAX), 2.0, &mut rng)?;
                *l = positive("lambda_sq", 1.0 / inv)?;
            }
        }

        // τ² | rest ~ IG((D + 1)/2, 1/ξ + Σ β_j²/λ_j² / (2σ²))
        let shrunk: f64 = beta.iter().zip(&lambda_sq).map(|(b, l)| b * b / l).sum();
        tau_sq = match cfg.fixed_tau_sq {
            Some(v) => v,
            None => positive(
                "tau_sq",
                sample_inverse_gamma(
                    (df + 1.0) / 2.0,
                    1.0 / xi + shrunk / (2.0 * sigma_sq),
                    &mut rng,
                )?
                .max(VARIANCE_FLOOR),
            )?,
        };

        // ξ | τ² ~ IG(1, 1 + 1/τ²)
        xi = positive(
            "xi",
            sample_inverse_gamma(1.0, 1.0 + 1.0 / tau_sq, &mut rng)?,
        )?;

        if s > cfg.burn_in && (s - cfg.burn_in).is_multiple_of(cfg.thin) {
            let row = out.beta0.len();
            out.beta0.push(beta0);
            out.beta.row_mut(row).copy_from(&beta.transpose());
            out.sigma_eps_sq.push(sigma_sq);
            for (j, l) in lambda_sq.iter().enumerate() {
                out.lambda_sq[(row, j)] = *l;
            }
            out.tau_sq.push(tau_sq);
            out.xi.push(xi);
        }
    }
    debug_assert_eq!(out.len(), keep);
    Ok(out)
}
