//! Simulated benchmark series with exact one-step conditional densities.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 200;
pub const DEFAULT_NONLINEAR_MEAN_SD: f64 = 0.5;
pub const JUMP_PROBABILITY: f64 = 0.05;

/// Lags the true densities depend on.
pub const REQUIRED_LAGS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    /// `Y_t = 0.2 Y_{t-1} + 0.3 Y_{t-2} + 0.35 Y_{t-3} + ε_t`, `ε_t ~ N(0, 1)`.
    Ar,
    /// `Y_t = 0.1 Y_{t-1} + 0.4 Y_{t-2} + 0.4 Y_{t-3} + 0.01 − 0.3 Z_t + 0.05 (1 + Z_t) ε_t`
    /// with `Z_t ~ Bernoulli(0.05)` and Gaussian `ε_t`.
    ArmaJump,
    /// As [`ScenarioName::ArmaJump`] with `ε_t ~ t_3` (not variance-normalized).
    ArmaJumpT,
    /// `Y_t = sin²(π Y_{t-3}) + ε_t`, `ε_t ~ N(0, σ²)`.
    NonlinearMean,
    /// `Y_t ~ N(0, σ_t²)` with `σ_t = 0.1` if `|Y_{t-3}| > 0.5`, else 1.
    NonlinearVariance,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 5] = [
        ScenarioName::Ar,
        ScenarioName::ArmaJump,
        ScenarioName::ArmaJumpT,
        ScenarioName::NonlinearMean,
        ScenarioName::NonlinearVariance,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Ar => "ar",
            ScenarioName::ArmaJump => "arma_jump",
            ScenarioName::ArmaJumpT => "arma_jump_t",
            ScenarioName::NonlinearMean => "nonlinear_mean",
            ScenarioName::NonlinearVariance => "nonlinear_variance",
        }
    }

    pub fn has_jumps(self) -> bool {
        matches!(self, ScenarioName::ArmaJump | ScenarioName::ArmaJumpT)
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        match key.as_str() {
            "ar" => Ok(ScenarioName::Ar),
            "arma_jump" => Ok(ScenarioName::ArmaJump),
            "arma_jump_t" => Ok(ScenarioName::ArmaJumpT),
            "nonlinear_mean" => Ok(ScenarioName::NonlinearMean),
            "nonlinear_variance" => Ok(ScenarioName::NonlinearVariance),
            "jump_diffusion" => Err(Error::OutOfScope(s.to_string())),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub n: usize,
    pub seed: u64,
    pub burn_in: usize,
    /// Noise standard deviation of the nonlinear-mean scenario.
    pub noise_sd: f64,
}

/// A generated path; `jumps` is recorded for the jump scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub y: Vec<f64>,
    pub jumps: Option<Vec<bool>>,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName, n: usize, seed: u64) -> Self {
        Self { name, n, seed, burn_in: DEFAULT_BURN_IN, noise_sd: DEFAULT_NONLINEAR_MEAN_SD }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::InvalidParameter(format!("scenario length must be >= 100, got {}", self.n)));
        }
        if self.burn_in < 100 {
            return Err(Error::InvalidParameter(format!("burn-in must be >= 100, got {}", self.burn_in)));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sd must be > 0, got {}", self.noise_sd)));
        }
        Ok(())
    }

    /// Runs `burn_in + n` steps from a zero state and drops the burn-in.
    pub fn generate(&self) -> Result<Simulation> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let total = self.burn_in + self.n;
        let mut y = vec![0.0f64; total + REQUIRED_LAGS];
        let mut jumps = Vec::with_capacity(if self.name.has_jumps() { total } else { 0 });
        let t3 = StudentT::new(3.0).expect("valid degrees of freedom");
        for t in REQUIRED_LAGS..total + REQUIRED_LAGS {
            let (l1, l2, l3) = (y[t - 1], y[t - 2], y[t - 3]);
            y[t] = match self.name {
                ScenarioName::Ar => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    0.2 * l1 + 0.3 * l2 + 0.35 * l3 + e
                }
                ScenarioName::ArmaJump | ScenarioName::ArmaJumpT => {
                    let jump = rng.random::<f64>() < JUMP_PROBABILITY;
                    let e: f64 = if self.name == ScenarioName::ArmaJump {
                        StandardNormal.sample(&mut rng)
                    } else {
                        t3.sample(&mut rng)
                    };
                    jumps.push(jump);
                    let z = if jump { 1.0 } else { 0.0 };
                    0.1 * l1 + 0.4 * l2 + 0.4 * l3 + 0.01 - 0.3 * z + 0.05 * (1.0 + z) * e
                }
                ScenarioName::NonlinearMean => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    (PI * l3).sin().powi(2) + self.noise_sd * e
                }
                ScenarioName::NonlinearVariance => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    nonlinear_variance_sd(l3) * e
                }
            };
        }
        let keep = REQUIRED_LAGS + self.burn_in;
        let jumps = self.name.has_jumps().then(|| jumps[self.burn_in..].to_vec());
        Ok(Simulation { y: y[keep..].to_vec(), jumps })
    }

    /// One-step density of `y` given `lags = (y_{t-1}, y_{t-2}, y_{t-3}, …)`.
    pub fn true_density(&self, lags: &[f64], y: f64) -> Result<f64> {
        true_density(self.name, self.noise_sd, lags, y)
    }
}

fn nonlinear_variance_sd(lag3: f64) -> f64 {
    if lag3.abs() > 0.5 {
        0.1
    } else {
        1.0
    }
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let r = (x - mean) / sd;
    (-0.5 * r * r).exp() / (sd * (2.0 * PI).sqrt())
}

/// Student t with three degrees of freedom, location and scale.
fn t3_pdf(x: f64, loc: f64, scale: f64) -> f64 {
    let r = (x - loc) / scale;
    2.0 / (PI * 3f64.sqrt()) * (1.0 + r * r / 3.0).powi(-2) / scale
}

/// Exact one-step conditional density for a scenario.
pub fn true_density(name: ScenarioName, noise_sd: f64, lags: &[f64], y: f64) -> Result<f64> {
    if lags.len() < REQUIRED_LAGS {
        return Err(Error::InsufficientData(format!("true density needs {REQUIRED_LAGS} lags, got {}", lags.len())));
    }
    let (l1, l2, l3) = (lags[0], lags[1], lags[2]);
    let p = JUMP_PROBABILITY;
    Ok(match name {
        ScenarioName::Ar => normal_pdf(y, 0.2 * l1 + 0.3 * l2 + 0.35 * l3, 1.0),
        ScenarioName::ArmaJump => {
            let m = 0.1 * l1 + 0.4 * l2 + 0.4 * l3;
            (1.0 - p) * normal_pdf(y, m + 0.01, 0.05) + p * normal_pdf(y, m - 0.29, 0.10)
        }
        ScenarioName::ArmaJumpT => {
            let m = 0.1 * l1 + 0.4 * l2 + 0.4 * l3;
            (1.0 - p) * t3_pdf(y, m + 0.01, 0.05) + p * t3_pdf(y, m - 0.29, 0.10)
        }
        ScenarioName::NonlinearMean => normal_pdf(y, (PI * l3).sin().powi(2), noise_sd),
        ScenarioName::NonlinearVariance => normal_pdf(y, 0.0, nonlinear_variance_sd(l3)),
    })
}
