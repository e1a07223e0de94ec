//! Scenario configuration: a single JSON document describing the channel
//! model, targets, solver options, and balancing parameters.

use anyhow::{bail, Context, Result};
use misoqos_core::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use misoqos_core::channel::{build_ensemble, ChannelEnsemble, ChannelModel};
use misoqos_core::numerics::{CMat, SeededRng};
use misoqos_core::power_min::{QosTargets, SolverOptions};

/// Channel means: explicit complex entries or draws from a seeded Gaussian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSpec {
    /// `K` rows of `N` `[re, im]` pairs.
    Means(Vec<Vec<[f64; 2]>>),
    /// Means drawn once per scenario as unit circular Gaussians.
    Random { seed: u64 },
}

/// Error covariance: a common scaled identity or explicit matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCovSpec {
    IdentityScale(f64),
    /// `K` matrices of `N x N` `[re, im]` entries, row-major.
    Matrices(Vec<Vec<Vec<[f64; 2]>>>),
}

/// QoS targets: per-user rates (bits per channel use) or MMSE ceilings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    Rates(Vec<f64>),
    Mmse(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub power_cap: f64,
    pub init_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            power_cap: d.power_cap.unwrap_or(1e6),
            init_seed: d.init_seed,
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            power_cap: Some(self.power_cap),
            init_seed: self.init_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalanceConfig {
    /// Total power budget in dB.
    pub ptx_db: f64,
    #[serde(default)]
    pub sigma_low: Option<f64>,
    #[serde(default)]
    pub sigma_high: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub noise_vars: Vec<f64>,
    pub channel: ChannelSpec,
    pub error_cov: ErrorCovSpec,
    pub targets: TargetSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub balance: Option<BalanceConfig>,
    /// Master seed for the realization ensemble; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
}

/// Stream tag for drawing random channel means.
const MEANS_STREAM_TAG: u64 = u64::MAX - 0x4EA5;

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.m == 0 {
            bail!("k, n, and m must all be at least 1");
        }
        if self.noise_vars.len() != self.k {
            bail!(
                "noise_vars has {} entries for k = {}",
                self.noise_vars.len(),
                self.k
            );
        }
        if let ChannelSpec::Means(rows) = &self.channel {
            if rows.len() != self.k || rows.iter().any(|r| r.len() != self.n) {
                bail!("channel means must be k rows of n complex entries");
            }
        }
        if let ErrorCovSpec::Matrices(ms) = &self.error_cov {
            if ms.len() != self.k
                || ms
                    .iter()
                    .any(|m| m.len() != self.n || m.iter().any(|row| row.len() != self.n))
            {
                bail!("error covariance must be k matrices of n x n entries");
            }
        }
        let list = match &self.targets {
            TargetSpec::Rates(r) => r,
            TargetSpec::Mmse(e) => e,
        };
        if list.len() != self.k {
            bail!("targets list has {} entries for k = {}", list.len(), self.k);
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ChannelModel> {
        let means: Vec<Vec<Complex64>> = match &self.channel {
            ChannelSpec::Means(rows) => rows
                .iter()
                .map(|r| r.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .collect(),
            ChannelSpec::Random { seed } => {
                let base = SeededRng::new(*seed, 0).substream(MEANS_STREAM_TAG);
                (0..self.k)
                    .map(|k| {
                        let mut rng = base.substream(k as u64);
                        (0..self.n).map(|_| rng.next_complex_normal()).collect()
                    })
                    .collect()
            }
        };
        let covs: Vec<CMat> = match &self.error_cov {
            ErrorCovSpec::IdentityScale(s) => {
                if *s < 0.0 {
                    bail!("identity_scale must be non-negative");
                }
                let mut c = CMat::identity(self.n);
                c.scale(*s);
                vec![c; self.k]
            }
            ErrorCovSpec::Matrices(ms) => ms
                .iter()
                .map(|m| {
                    CMat::from_fn(self.n, self.n, |i, j| {
                        let [re, im] = m[i][j];
                        Complex64::new(re, im)
                    })
                })
                .collect(),
        };
        ChannelModel::new(means, covs, self.noise_vars.clone()).map_err(Into::into)
    }

    pub fn build_ensemble(&self, seed_override: Option<u64>) -> Result<ChannelEnsemble> {
        let model = self.build_model()?;
        let seed = seed_override.unwrap_or(self.seed);
        build_ensemble(model, self.m, &SeededRng::new(seed, 0)).map_err(Into::into)
    }

    pub fn qos_targets(&self) -> Result<QosTargets> {
        match &self.targets {
            TargetSpec::Rates(r) => QosTargets::from_rates(r).map_err(Into::into),
            TargetSpec::Mmse(e) => QosTargets::from_mmse(e).map_err(Into::into),
        }
    }

    /// Stable digest of the canonical JSON form (object keys sorted).
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        crate::record::sha256_hex(value.to_string().as_bytes())
    }
}
