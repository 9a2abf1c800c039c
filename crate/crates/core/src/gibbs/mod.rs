//! Gibbs samplers for Bayesian ridge and lasso regression with Gaussian errors.

mod mvn;
mod sampler;
mod variates;

pub use mvn::{draw_mvn_precision, sample_precision_cholesky, MvnPath, RegressionConditional};
pub use sampler::{
    gaussian_log_likelihood, gibbs_lasso, gibbs_ridge, run_chain, GibbsConfig, PosteriorDraws,
    Prior,
};
pub use variates::{sample_inverse_gamma, sample_inverse_gaussian};
