use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theorems::NoiseFamily;

pub const MAX_OUTCOMES: usize = 12;
pub const MAX_POLICIES: usize = 16;
pub const MAX_ENVS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Thm1,
    Thm2,
    Goldilocks,
    Lemmas,
    Protocols,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Thm1 => "thm1",
            Family::Thm2 => "thm2",
            Family::Goldilocks => "goldilocks",
            Family::Lemmas => "lemmas",
            Family::Protocols => "protocols",
        }
    }
}

/// How environment rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    /// Uniform on the simplex.
    Simplex,
    /// Uniform on a random two-outcome face.
    Sparse,
    /// One-hot rows.
    Deterministic,
    /// Each environment picks one of the above.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sizes {
    pub n_outcomes: usize,
    pub n_policies: usize,
    pub n_envs: usize,
    pub grid: Vec<f64>,
    pub cells: usize,
    pub env_kind: EnvKind,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            n_outcomes: 4,
            n_policies: 4,
            n_envs: 2,
            grid: vec![0.0, 1.0],
            cells: 2,
            env_kind: EnvKind::Mixed,
        }
    }
}

/// Which proxies accompany each generated prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSpec {
    pub identity: bool,
    pub quantizer_bits: Vec<u32>,
    /// Random independent-noise channels per instance.
    pub noise: usize,
    /// Random channels with arbitrary codewords per instance.
    pub garbled: usize,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        ChannelSpec {
            identity: true,
            quantizer_bits: vec![0, 1, 2, 3],
            noise: 2,
            garbled: 1,
        }
    }
}

/// Choice of the target value `V†` handed to the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum VDaggerRule {
    Absolute {
        value: f64,
    },
    /// Midpoint of `[V̄ + σ̄/2, V₀]`, or its left end when that is empty.
    Midpoint,
    EqualToVHat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoldilocksSettings {
    pub k_bits: f64,
    /// Required `V₀ − (V̄ + σ̄/2)`.
    pub gap: f64,
    pub max_attempts: usize,
    pub eta_grid: Vec<f64>,
    pub families: Vec<NoiseFamily>,
}

impl Default for GoldilocksSettings {
    fn default() -> Self {
        GoldilocksSettings {
            k_bits: 1.0,
            gap: 0.05,
            max_attempts: 100_000,
            eta_grid: crate::theorems::default_eta_grid(),
            families: vec![
                NoiseFamily::Erasure { odds: 2 },
                NoiseFamily::Erasure { odds: 3 },
                NoiseFamily::AdditiveUniform,
            ],
        }
    }
}

/// `n` pressures spaced evenly in `log λ` over `[lo, hi]`.
pub fn log_lambda_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 {
        return Err(Error::ConfigError(format!(
            "bad pressure range [{lo}, {hi}] with {n} points"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub family: Family,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub channels: ChannelSpec,
    #[serde(default = "default_rule")]
    pub v_dagger: VDaggerRule,
    /// Pressures in natural units.
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub goldilocks: GoldilocksSettings,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_rule() -> VDaggerRule {
    VDaggerRule::EqualToVHat
}

fn default_lambdas() -> Vec<f64> {
    log_lambda_grid(1e-2, 1e4, 25).expect("static range")
}

impl ExperimentConfig {
    pub fn new(family: Family, seed: u64, trials: usize) -> Self {
        let mut sizes = Sizes::default();
        if family == Family::Thm2 {
            sizes.n_outcomes = 6;
            sizes.cells = 3;
        }
        ExperimentConfig {
            seed,
            family,
            sizes,
            channels: ChannelSpec::default(),
            v_dagger: default_rule(),
            lambdas: default_lambdas(),
            goldilocks: GoldilocksSettings::default(),
            trials,
            out_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sizes;
        let bad = |msg: String| Err(Error::ConfigError(msg));
        if self.trials == 0 {
            return bad("trial count must be at least 1".into());
        }
        if s.n_outcomes == 0 || s.n_outcomes > MAX_OUTCOMES {
            return bad(format!("n_outcomes {} outside 1..={MAX_OUTCOMES}", s.n_outcomes));
        }
        if s.n_policies == 0 || s.n_policies > MAX_POLICIES {
            return bad(format!("n_policies {} outside 1..={MAX_POLICIES}", s.n_policies));
        }
        if s.n_envs == 0 || s.n_envs > MAX_ENVS {
            return bad(format!("n_envs {} outside 1..={MAX_ENVS}", s.n_envs));
        }
        if s.cells == 0 || s.cells > s.n_outcomes {
            return bad(format!("cells {} outside 1..={}", s.cells, s.n_outcomes));
        }
        if s.grid.is_empty() || s.grid.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return bad("grid must be a nonempty subset of [-1, 1]".into());
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("pressures must be nonnegative reals".into());
        }
        if let VDaggerRule::Absolute { value } = self.v_dagger {
            if !(0.0..=1.0).contains(&value) {
                return bad(format!("V† = {value} outside [0, 1]"));
            }
        }
        let g = &self.goldilocks;
        if !(g.k_bits >= 0.0) || g.max_attempts == 0 || g.families.is_empty() || g.eta_grid.is_empty() {
            return bad("goldilocks settings need K ≥ 0, attempts, families and an η grid".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_takes_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"seed": 3, "family": "thm1", "trials": 5}"#).unwrap();
        assert_eq!(c.sizes, Sizes::default());
        assert_eq!(c.v_dagger, VDaggerRule::EqualToVHat);
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rules_parse() {
        let r: VDaggerRule = serde_json::from_str(r#"{"rule": "absolute", "value": 0.8}"#).unwrap();
        assert_eq!(r, VDaggerRule::Absolute { value: 0.8 });
        let r: VDaggerRule = serde_json::from_str(r#"{"rule": "equal-to-v-hat"}"#).unwrap();
        assert_eq!(r, VDaggerRule::EqualToVHat);
    }

    #[test]
    fn validation_rejects_bad_sizes() {
        let mut c = ExperimentConfig::new(Family::Thm1, 0, 1);
        c.trials = 0;
        assert!(matches!(c.validate(), Err(Error::ConfigError(_))));
        let mut c = ExperimentConfig::new(Family::Thm1, 0, 1);
        c.sizes.cells = 9;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Family::Thm1, 0, 1);
        c.sizes.grid = vec![2.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn lambda_grid_is_geometric() {
        let g = log_lambda_grid(1e-2, 1e2, 5).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2] - 1.0).abs() < 1e-12 && (g[4] - 100.0).abs() < 1e-9);
        assert!(log_lambda_grid(0.0, 1.0, 3).is_err());
    }
}
