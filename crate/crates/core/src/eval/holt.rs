//! Holt's linear trend (double exponential smoothing).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoltState {
    pub level: f64,
    pub trend: f64,
    pub alpha: f64,
    pub gamma: f64,
}

impl HoltState {
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        (1..=h)
            .map(|q| self.level + q as f64 * self.trend)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoltFit {
    pub state: HoltState,
    /// In-sample one-step-ahead sum of squared errors.
    pub sse: f64,
}

/// Runs the recursion from `S₁ = y₁`, `T₁ = y₂ − y₁`; returns the final state and one-step SSE.
fn run(train: &[f64], alpha: f64, gamma: f64) -> (f64, f64, f64) {
    let mut level = train[0];
    let mut trend = train[1] - train[0];
    let mut sse = 0.0;
    for &y in &train[1..] {
        let pred = level + trend;
        sse += (y - pred).powi(2);
        let new_level = alpha * y + (1.0 - alpha) * pred;
        trend = gamma * (new_level - level) + (1.0 - gamma) * trend;
        level = new_level;
    }
    (level, trend, sse)
}

/// Grid search over `α, γ ∈ {0.01, 0.02, …, 1.00}` minimizing the one-step
/// in-sample SSE; ties keep the smallest `(α, γ)`.
pub fn holt_fit(train: &[f64]) -> Result<HoltFit> {
    if train.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "Holt needs at least 3 observations, got {}",
            train.len()
        )));
    }
    if train.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalError("non-finite training value".into()));
    }
    let mut best: Option<HoltFit> = None;
    for a in 1..=100 {
        let alpha = a as f64 / 100.0;
        for g in 1..=100 {
            let gamma = g as f64 / 100.0;
            let (level, trend, sse) = run(train, alpha, gamma);
            if best.is_none_or(|b| sse < b.sse) {
                best = Some(HoltFit {
                    state: HoltState {
                        level,
                        trend,
                        alpha,
                        gamma,
                    },
                    sse,
                });
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Fit on `train` and forecast `h` steps.
pub fn holt_fit_forecast(train: &[f64], h: usize) -> Result<Vec<f64>> {
    Ok(holt_fit(train)?.state.forecast(h))
}
