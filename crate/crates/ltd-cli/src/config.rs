//! Plain-text `key=value` run configuration.
//!
//! Recognized keys: `lambda1..lambda6`, `rho` (sets all six proximal
//! weights), `b`, `p`, `nu`, `max_iter`, `rel_tol`, `seed`,
//! `rank_reduction`, `fusion_mode` (`single`/`nested`), `dataset_profile`
//! (`abu`/`mvtec`/`custom`) and `normalize_input`. Lines starting with `#`
//! are comments; unknown keys are errors. With the `abu` profile
//! `lambda6 = lambda3 / 10`, with `mvtec` `lambda6 = lambda3 / 100`;
//! setting `lambda6` explicitly requires `dataset_profile=custom`.

use std::path::Path;

use ltd_core::fusion::FusionMode;
use ltd_core::solver::LtdParams;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DatasetProfile {
    #[default]
    Abu,
    Mvtec,
    Custom,
}

/// Parsed configuration: solver parameters plus the dataset profile.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: LtdParams,
    pub profile: DatasetProfile,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            params: LtdParams::default(),
            profile: DatasetProfile::Abu,
        };
        cfg.apply_profile();
        cfg
    }
}

impl RunConfig {
    fn apply_profile(&mut self) {
        match self.profile {
            DatasetProfile::Abu => self.params.lambda6 = self.params.lambda3 / 10.0,
            DatasetProfile::Mvtec => self.params.lambda6 = self.params.lambda3 / 100.0,
            DatasetProfile::Custom => {}
        }
    }

    /// Parse configuration text, starting from the defaults.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut params = LtdParams::default();
        let mut profile = DatasetProfile::Abu;
        let mut lambda6_explicit = false;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                CliError::Config(format!("line {}: bad {what} value {value:?}", lineno + 1))
            };
            let as_f64 = || value.parse::<f64>().map_err(|_| bad(key));
            let as_usize = || value.parse::<usize>().map_err(|_| bad(key));
            let as_bool = || match value {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(bad(key)),
            };
            match key {
                "lambda1" => params.lambda1 = as_f64()?,
                "lambda2" => params.lambda2 = as_f64()?,
                "lambda3" => params.lambda3 = as_f64()?,
                "lambda4" => params.lambda4 = as_f64()?,
                "lambda5" => params.lambda5 = as_f64()?,
                "lambda6" => {
                    params.lambda6 = as_f64()?;
                    lambda6_explicit = true;
                }
                "rho" => {
                    let rho = as_f64()?;
                    params = params.with_rho(rho);
                }
                "b" => params.b = as_usize()?,
                "p" => params.p = as_f64()?,
                "nu" => params.nu = as_f64()?,
                "max_iter" => params.max_iter = as_usize()?,
                "rel_tol" => params.rel_tol = as_f64()?,
                "seed" => params.seed = value.parse::<u64>().map_err(|_| bad(key))?,
                "rank_reduction" => params.rank_reduction = as_bool()?,
                "normalize_input" => params.normalize_input = as_bool()?,
                "fusion_mode" => {
                    params.fusion_mode = match value {
                        "single" => FusionMode::Single,
                        "nested" => FusionMode::Nested,
                        _ => return Err(bad(key)),
                    }
                }
                "dataset_profile" => {
                    profile = match value {
                        "abu" => DatasetProfile::Abu,
                        "mvtec" => DatasetProfile::Mvtec,
                        "custom" => DatasetProfile::Custom,
                        _ => return Err(bad(key)),
                    }
                }
                other => {
                    return Err(CliError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }

        if lambda6_explicit && profile != DatasetProfile::Custom {
            return Err(CliError::Config(
                "lambda6 can only be set with dataset_profile=custom".into(),
            ));
        }
        let mut cfg = RunConfig { params, profile };
        cfg.apply_profile();
        cfg.params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_abu_profile() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.params.lambda6, cfg.params.lambda3 / 10.0);
    }

    #[test]
    fn parses_comments_and_values() {
        let cfg = RunConfig::parse(
            "# run setup\nlambda3 = 0.5 # strong data term\nb=3\nseed=7\nfusion_mode=nested\nrank_reduction=false\n",
        )
        .unwrap();
        assert_eq!(cfg.params.lambda3, 0.5);
        assert_eq!(cfg.params.lambda6, 0.05);
        assert_eq!(cfg.params.b, 3);
        assert_eq!(cfg.params.seed, 7);
        assert_eq!(cfg.params.fusion_mode, FusionMode::Nested);
        assert!(!cfg.params.rank_reduction);
    }

    #[test]
    fn mvtec_profile_divides_by_100() {
        let cfg = RunConfig::parse("dataset_profile=mvtec\nlambda3=1.0\n").unwrap();
        assert_eq!(cfg.params.lambda6, 0.01);
    }

    #[test]
    fn custom_profile_takes_lambda6() {
        let cfg = RunConfig::parse("dataset_profile=custom\nlambda6=0.42\n").unwrap();
        assert_eq!(cfg.params.lambda6, 0.42);
    }

    #[test]
    fn lambda6_with_standard_profile_is_rejected() {
        assert!(matches!(
            RunConfig::parse("lambda6=0.4\n"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn unknown_key_is_rejected() {
        assert!(matches!(
            RunConfig::parse("lambda7=1\n"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("p=1.5\n").is_err());
        assert!(RunConfig::parse("rho=-1\n").is_err());
        assert!(RunConfig::parse("b=zero\n").is_err());
        assert!(RunConfig::parse("rank_reduction=maybe\n").is_err());
    }

    #[test]
    fn rho_sets_all_six() {
        let cfg = RunConfig::parse("rho=0.25\n").unwrap();
        assert!(cfg.params.rhos().iter().all(|&r| r == 0.25));
    }
}
