//! SμEIR epidemic simulation and noisy benchmark ensembles.
//!
//! ```text
//! dS/dt = −β(I + E)S/N
//! dE/dt =  β(I + E)S/N − σE
//! dI/dt =  μσE − γI
//! dR/dt =  γI
//! ```
//!
//! `N` is the initial total population. Only a fraction `μ` of exposed
//! individuals is ever counted as infectious, so the total leaks at rate
//! `(1 − μ)σE`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{domain, SeedTree};
use crate::series::{left_moving_average, TimeSeries};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SueirParams {
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub mu: f64,
    pub s0: f64,
    pub e0: f64,
    pub i0: f64,
    pub r0: f64,
    pub t_end: f64,
    pub dt_out: f64,
    /// Fixed RK4 step in days.
    pub internal_step: f64,
}

impl Default for SueirParams {
    fn default() -> Self {
        Self {
            beta: 3.0 / 14.0,
            sigma: 0.25,
            gamma: 1.0 / 14.0,
            mu: 0.75,
            s0: 1e6,
            e0: 0.0,
            i0: 1.0,
            r0: 0.0,
            t_end: 180.0,
            dt_out: 1.0,
            internal_step: 0.05,
        }
    }
}

impl SueirParams {
    pub fn population(&self) -> f64 {
        self.s0 + self.e0 + self.i0 + self.r0
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.beta, self.sigma, self.gamma];
        if rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidConfig("SμEIR rates must be positive".into()));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "discovery rate mu must lie in (0, 1], got {}",
                self.mu
            )));
        }
        let comps = [self.s0, self.e0, self.i0, self.r0];
        if comps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) || self.population() <= 0.0 {
            return Err(Error::InvalidConfig(
                "compartments must be non-negative with positive total".into(),
            ));
        }
        if !(self.t_end > 0.0 && self.dt_out > 0.0 && self.internal_step > 0.0)
            || self.dt_out > self.t_end
        {
            return Err(Error::InvalidConfig(
                "need 0 < dt_out <= t_end and a positive internal step".into(),
            ));
        }
        Ok(())
    }

    /// `[dS, dE, dI, dR]` at state `x`.
    pub fn derivative(&self, x: &[f64; 4]) -> [f64; 4] {
        let [s, e, i, _] = *x;
        let n = self.population();
        let infection = self.beta * (i + e) * s / n;
        [
            -infection,
            infection - self.sigma * e,
            self.mu * self.sigma * e - self.gamma * i,
            self.gamma * i,
        ]
    }
}

/// Compartment trajectories sampled at the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SueirRun {
    pub times: Vec<f64>,
    /// `[S, E, I, R]` per output time.
    pub states: Vec<[f64; 4]>,
    pub population: f64,
}

impl SueirRun {
    fn compartment(&self, idx: usize, name: &str) -> Result<TimeSeries> {
        TimeSeries::new(
            self.times.clone(),
            self.states.iter().map(|x| x[idx]).collect(),
            name,
        )
    }

    /// `(S, E, I, R)` as separate series.
    pub fn series(&self) -> Result<[TimeSeries; 4]> {
        Ok([
            self.compartment(0, "S")?,
            self.compartment(1, "E")?,
            self.compartment(2, "I")?,
            self.compartment(3, "R")?,
        ])
    }

    /// `I(t) / N`.
    pub fn infectious_proportion(&self) -> Result<TimeSeries> {
        TimeSeries::new(
            self.times.clone(),
            self.states.iter().map(|x| x[2] / self.population).collect(),
            "infectious_proportion",
        )
    }
}

fn rk4_step(p: &SueirParams, x: &[f64; 4], h: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], k: &[f64; 4], c: f64| std::array::from_fn(|i| a[i] + c * k[i]);
    let k1 = p.derivative(x);
    let k2 = p.derivative(&add(x, &k1, h / 2.0));
    let k3 = p.derivative(&add(x, &k2, h / 2.0));
    let k4 = p.derivative(&add(x, &k3, h));
    std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Classical fixed-step RK4. Each output interval is split into equal
/// substeps no longer than `internal_step`.
pub fn integrate_sueir(p: &SueirParams) -> Result<SueirRun> {
    p.validate()?;
    let n_out = (p.t_end / p.dt_out + 1e-9).floor() as usize;
    let substeps = (p.dt_out / p.internal_step - 1e-9).ceil().max(1.0) as usize;
    let h = p.dt_out / substeps as f64;

    let mut x = [p.s0, p.e0, p.i0, p.r0];
    let mut times = Vec::with_capacity(n_out + 1);
    let mut states = Vec::with_capacity(n_out + 1);
    times.push(0.0);
    states.push(x);
    for k in 1..=n_out {
        for _ in 0..substeps {
            x = rk4_step(p, &x, h);
            for v in x.iter_mut() {
                if *v < 0.0 {
                    if *v < -1e-9 {
                        return Err(Error::IntegrationError(format!(
                            "compartment went negative ({v}) before t = {}",
                            k as f64 * p.dt_out
                        )));
                    }
                    *v = 0.0;
                }
            }
        }
        times.push(k as f64 * p.dt_out);
        states.push(x);
    }
    Ok(SueirRun {
        times,
        states,
        population: p.population(),
    })
}

/// Whether `ζ` is redrawn at every time point or once per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    #[default]
    PerPoint,
    PerTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise level as a fraction of the series' peak magnitude.
    pub sigma_zeta: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: NoiseMode,
}

/// `I_noisy(t) = I(t) + ζ_t · max_s |I(s)|` with `ζ ~ N(0, σ_ζ²)`.
pub fn add_noise(series: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries> {
    if !(spec.sigma_zeta >= 0.0 && spec.sigma_zeta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise level must be >= 0, got {}",
            spec.sigma_zeta
        )));
    }
    if spec.sigma_zeta == 0.0 {
        return Ok(series.clone());
    }
    let peak = series.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut rng = SeedTree::new(spec.seed).stream(&[domain::OBSERVATION_NOISE]);
    let mut zeta = || -> f64 {
        let e: f64 = StandardNormal.sample(&mut rng);
        spec.sigma_zeta * e
    };
    let values = match spec.mode {
        NoiseMode::PerPoint => series.values().iter().map(|v| v + zeta() * peak).collect(),
        NoiseMode::PerTrajectory => {
            let z = zeta();
            series.values().iter().map(|v| v + z * peak).collect()
        }
    };
    series.with_values(values)
}

/// 7-point trailing mean, with partial windows over the first six points.
pub fn smooth_7day(series: &TimeSeries) -> Result<TimeSeries> {
    let window = 7.min(series.len());
    series.with_values(left_moving_average(series.values(), window)?)
}

/// One member of a simulated ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub index: usize,
    pub noise_seed: u64,
    pub series: TimeSeries,
}

/// Noise seed of trajectory `index` under `base_seed`.
pub fn trajectory_seed(base_seed: u64, index: usize) -> u64 {
    SeedTree::new(base_seed)
        .descend(&[domain::ENSEMBLE, index as u64])
        .seed()
}

/// One clean trajectory, `count` independent noise draws, each smoothed.
pub fn generate_ensemble(
    params: &SueirParams,
    noise: &NoiseSpec,
    count: usize,
    exec: Execution,
) -> Result<Vec<Trajectory>> {
    if count == 0 {
        return Err(Error::InvalidConfig(
            "ensemble size must be at least 1".into(),
        ));
    }
    let clean = integrate_sueir(params)?.infectious_proportion()?;
    exec.try_map_indexed(count, |index| {
        let noise_seed = trajectory_seed(noise.seed, index);
        let noisy = add_noise(
            &clean,
            &NoiseSpec {
                seed: noise_seed,
                ..*noise
            },
        )?;
        let mut series = smooth_7day(&noisy)?;
        series = TimeSeries::new(
            series.times().to_vec(),
            series.values().to_vec(),
            format!("trajectory_{index:03}"),
        )?;
        Ok(Trajectory {
            index,
            noise_seed,
            series,
        })
    })
}
