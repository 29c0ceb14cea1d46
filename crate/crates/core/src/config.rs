//! Engine configuration: genus, the constants `c` and `p`, the level bound
//! and the sampling seed.
//!
//! `ENGINE_CONFIG` holds either inline JSON or a path to a JSON file; keys
//! that are absent keep their defaults, and command-line flags override both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arith::{gcd, is_prime};
use crate::error::{Error, Result};

pub const ENV_VAR: &str = "ENGINE_CONFIG";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub genus: usize,
    pub c: u64,
    pub p: u64,
    /// Largest level any operation may create.
    pub level_bound: u64,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { genus: 1, c: 2, p: 5, level_bound: 1024, seed: 0x5eed }
    }
}

impl EngineConfig {
    pub fn cp(&self) -> u64 {
        self.c * self.p
    }

    pub fn validate(&self) -> Result<()> {
        if self.genus == 0 || self.genus > 2 {
            return Err(Error::Malformed(format!("genus {} (supported: 1, 2)", self.genus)));
        }
        if !is_prime(self.p) {
            return Err(Error::Malformed(format!("p = {} is not prime", self.p)));
        }
        if self.c == 0 {
            return Err(Error::Malformed("c must be positive".into()));
        }
        if self.level_bound < 3 {
            return Err(Error::Malformed(format!("level bound {} is below 3", self.level_bound)));
        }
        Ok(())
    }

    /// `N ≥ 3` and prime to `cp`.
    pub fn is_admissible_level(&self, n: u64) -> bool {
        n >= 3 && gcd(n, self.cp()) == 1
    }

    pub fn check_level(&self, n: u64) -> Result<()> {
        if !self.is_admissible_level(n) {
            return Err(Error::Inadmissible(format!("level {n} (cp = {})", self.cp())));
        }
        if n > self.level_bound {
            return Err(Error::LevelBound { level: n, bound: self.level_bound });
        }
        Ok(())
    }

    /// The smallest admissible multiple of `n`.
    pub fn admissible_multiple(&self, n: u64) -> Result<u64> {
        if gcd(n, self.cp()) != 1 {
            return Err(Error::Inadmissible(format!("level {n} (cp = {})", self.cp())));
        }
        let mut t = 1;
        while !self.is_admissible_level(n * t) {
            t += 1;
        }
        self.check_level(n * t)?;
        Ok(n * t)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: EngineConfig =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("engine config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults overlaid with `ENGINE_CONFIG`, if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(ENV_VAR) {
            Ok(v) if !v.trim().is_empty() => Self::from_source(&v),
            _ => Ok(Self::default()),
        }
    }

    fn from_source(v: &str) -> Result<Self> {
        if v.trim_start().starts_with('{') {
            return Self::from_json(v);
        }
        let text = std::fs::read_to_string(Path::new(v))
            .map_err(|e| Error::Malformed(format!("{ENV_VAR}={v}: {e}")))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overlay() {
        let d = EngineConfig::default();
        assert_eq!(d.cp(), 10);
        assert!(d.is_admissible_level(21) && !d.is_admissible_level(15) && !d.is_admissible_level(1));
        let c = EngineConfig::from_json(r#"{"level_bound": 100}"#).unwrap();
        assert_eq!(c.level_bound, 100);
        assert_eq!(c.p, 5);
        assert!(EngineConfig::from_json(r#"{"p": 6}"#).is_err());
        assert!(EngineConfig::from_json(r#"{"q": 6}"#).is_err());
        assert_eq!(d.admissible_multiple(1).unwrap(), 3);
        assert_eq!(d.admissible_multiple(7).unwrap(), 7);
        assert_eq!(c.check_level(189), Err(Error::LevelBound { level: 189, bound: 100 }));
    }
}
