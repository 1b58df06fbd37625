//! Run configuration files.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pbiharm_core::discrete::DescentConfig;
use pbiharm_core::spectrum::VerifyConfig;
use pbiharm_core::{ContinuationConfig, ProblemSpec, ShootConfig, WeightSpec};
use serde::{Deserialize, Serialize};

pub const ENV_NEWTON_TOL: &str = "PBIHARM_NEWTON_TOL";
pub const ENV_STEP_COUNT: &str = "PBIHARM_STEP_COUNT";

/// One TOML document per run. Exactly one of `p` and `p_grid` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub p: Option<f64>,
    pub p_grid: Option<Vec<f64>>,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub weight: WeightSpec,
    /// Grid for the `p = 2` oracle.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub shoot: ShootConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub descent: DescentConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// `lambda` samples for `mu-curve`; 20 points on `[0, 2 lambda_1]` when
    /// absent.
    pub mu_lambdas: Option<Vec<f64>>,
    /// Largest relative change of `lambda` between adjacent `p_grid` points.
    #[serde(default = "default_jump_threshold")]
    pub jump_threshold: f64,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn default_k_max() -> usize {
    5
}

fn default_jump_threshold() -> f64 {
    pbiharm_core::spectrum::JUMP_THRESHOLD
}

fn default_n() -> usize {
    199
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.p, &self.p_grid) {
            (Some(_), Some(_)) => bail!("set exactly one of `p` and `p_grid`, not both"),
            (None, None) => bail!("one of `p` and `p_grid` is required"),
            (None, Some(g)) if g.is_empty() => bail!("`p_grid` is empty"),
            _ => {}
        }
        if self.k_max == 0 {
            bail!("`k_max` must be at least 1");
        }
        self.weight.validate()?;
        self.shoot.validate()?;
        let tols = [
            ("shoot.newton_tol", self.shoot.newton_tol),
            ("verify.residual_tol", self.verify.residual_tol),
            ("verify.zero_tol", self.verify.zero_tol),
            ("verify.partition_tol", self.verify.partition_tol),
            ("verify.simplicity_tol", self.verify.simplicity_tol),
            ("verify.duality_tol", self.verify.duality_tol),
            ("jump_threshold", self.jump_threshold),
        ];
        for (name, v) in tols {
            if !(v > 0.0) {
                bail!("`{name}` must be positive");
            }
        }
        Ok(())
    }

    /// Applies the environment overrides and `--seed`.
    pub fn apply_overrides(&mut self, seed: Option<u64>) -> Result<()> {
        if let Ok(v) = std::env::var(ENV_NEWTON_TOL) {
            self.shoot.newton_tol = v.parse().with_context(|| format!("{ENV_NEWTON_TOL}={v}"))?;
        }
        if let Ok(v) = std::env::var(ENV_STEP_COUNT) {
            self.shoot.step_count = v.parse().with_context(|| format!("{ENV_STEP_COUNT}={v}"))?;
        }
        if let Some(s) = seed.or(self.seed) {
            self.seed = Some(s);
            self.verify.seed = s;
        }
        self.validate()
    }

    /// Problem at exponent `p`.
    pub fn problem(&self, p: f64) -> ProblemSpec {
        ProblemSpec {
            p,
            weight: self.weight.clone(),
            shoot: self.shoot,
            continuation: self.continuation,
            oracle_n: self.n,
            descent: self.descent,
            verify: self.verify,
        }
    }

    pub fn single_p(&self, command: &str) -> Result<f64> {
        match self.p {
            Some(p) => Ok(p),
            None => bail!("`{command}` needs `p`, not `p_grid`"),
        }
    }

    pub fn grid(&self, command: &str) -> Result<&[f64]> {
        match &self.p_grid {
            Some(g) => Ok(g),
            None => bail!("`{command}` needs `p_grid`, not `p`"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn minimal_config() {
        let cfg = parse("p = 2.5\n[weight]\nkind = \"cosine\"\nf = 1\n").unwrap();
        assert_eq!(cfg.k_max, 5);
        assert_eq!(cfg.n, 199);
        assert_eq!(cfg.weight, WeightSpec::cosine(1));
        assert_eq!(cfg.problem(2.5).oracle_n, 199);
    }

    #[test]
    fn exactly_one_exponent() {
        let w = "[weight]\nkind = \"constant\"\nc = 1.0\n";
        assert!(parse(&format!("p = 2.0\np_grid = [2.0]\n{w}")).is_err());
        assert!(parse(w).is_err());
        assert!(parse(&format!("p_grid = []\n{w}")).is_err());
        assert!(parse(&format!("p_grid = [1.5, 2.0]\n{w}")).is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(parse("p = 2.0\n[weight]\nkind = \"constant\"\nc = -1.0\n").is_err());
        assert!(parse("p = 2.0\nk_max = 0\n[weight]\nkind = \"constant\"\nc = 1.0\n").is_err());
        assert!(parse("p = 2.0\n[weight]\nkind = \"constant\"\nc = 1.0\n[shoot]\nnewton_tol = 0.0\n").is_err());
        assert!(parse("p = 2.0\nbogus = 1\n[weight]\nkind = \"constant\"\nc = 1.0\n").is_err());
    }
}
