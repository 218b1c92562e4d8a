//! Layered run settings: built-in defaults, then an optional `key=value`
//! config file, then `--set key=value` flags. Later layers win.

use std::fs;
use std::path::Path;

use idiorec_core::ais::AisParams;
use idiorec_core::config::{parse_kv, ConfigError};
use idiorec_core::profile::SizeBasis;
use idiorec_core::similarity::{MatchFn, Matcher, Measure, Normalization, SimilarityParams};

use crate::error::CliError;

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub measure: Measure,
    pub sim: SimilarityParams,
    pub ais: AisParams,
}

impl Settings {
    /// Routes one key to whichever parameter block owns it.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if self.sim.apply_kv(key, value)? || self.ais.apply_kv(key, value)? {
            return Ok(());
        }
        match key {
            "measure" => {
                self.measure = match value {
                    "tree" => Measure::Tree,
                    "pearson" => Measure::Pearson,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "tree or pearson",
                        })
                    }
                };
                Ok(())
            }
            _ => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    pub fn load(config: Option<&Path>, overrides: &[String]) -> Result<Settings, CliError> {
        let mut settings = Settings::default();
        if let Some(path) = config {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            for (key, value) in parse_kv(&text)? {
                settings.apply_kv(&key, &value)?;
            }
        }
        for item in overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--set expects key=value, got {item:?}"))
            })?;
            settings.apply_kv(key.trim(), value.trim())?;
        }
        settings.sim.validate()?;
        settings.ais.validate()?;
        Ok(settings)
    }

    pub fn matcher(&self) -> Matcher {
        Matcher::new(self.measure, self.sim.clone())
    }

    /// One-line dump of every effective parameter, for report headers.
    pub fn snapshot(&self) -> String {
        let measure = match self.measure {
            Measure::Tree => "tree",
            Measure::Pearson => "pearson",
        };
        let s = &self.sim;
        let a = &self.ais;
        let match_fn = match s.match_fn {
            MatchFn::Linear => "linear",
            MatchFn::Quadratic => "quadratic",
        };
        let normalization = match s.normalization {
            Normalization::PairCount => "pair-count",
            Normalization::VoteSum => "vote-sum",
        };
        let size_basis = match s.size_basis {
            SizeBasis::Categories => "categories",
            SizeBasis::Bookmarks => "bookmarks",
        };
        format!(
            "measure={measure} match_fn={match_fn} ml_cutoff={} disparity_a={} \
             normalization={normalization} \
             disparity_enabled={} size_basis={size_basis} pearson_disparity={} \
             k0={} k1={} k2={} k3={} c={} dt={} y={} pool_size={} init_concentration={} \
             concentration_max={} death_threshold={} stabilization_window={} max_iterations={} \
             stability_epsilon={} renormalize={}",
            s.ml_cutoff,
            s.disparity_a,
            s.disparity_enabled,
            s.pearson_disparity,
            a.k0,
            a.k1,
            a.k2,
            a.k3,
            a.c,
            a.dt,
            a.antigen_concentration,
            a.pool_size,
            a.init_concentration,
            a.concentration_max,
            a.death_threshold,
            a.stabilization_window,
            a.max_iterations,
            a.stability_epsilon
                .map_or_else(|| "none".to_string(), |eps| eps.to_string()),
            a.renormalize,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use idiorec_core::similarity::MatchFn;

    #[test]
    fn overrides_beat_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "k1 = 0.3\nmatch_fn = linear\nmeasure = pearson\n").unwrap();
        let s = Settings::load(Some(&path), &["k1=0.05".to_string()]).unwrap();
        assert_eq!(s.ais.k1, 0.05);
        assert_eq!(s.sim.match_fn, MatchFn::Linear);
        assert_eq!(s.measure, Measure::Pearson);
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let err = Settings::load(None, &["bogus=1".to_string()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn invalid_value_is_usage_error() {
        let err = Settings::load(None, &["dt=-1".to_string()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let err = Settings::load(None, &["measure=euclid".to_string()]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
