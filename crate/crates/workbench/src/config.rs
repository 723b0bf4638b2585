//! Optional `key = value` settings file. Command-line flags win over it; the
//! engine path also honours [`ENGINE_ENV`], which sits between the two.

use movesense_core::engine::ENGINE_ENV;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub engine: Option<PathBuf>,
    pub depth: Option<u32>,
    pub skill: Option<u32>,
    pub elo: Option<u32>,
    pub engine_pool: Option<usize>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub dimension: Option<usize>,
    pub threshold: Option<f64>,
    pub iterations: Option<usize>,
    pub annotators: Option<Vec<String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: impl AsRef<Path>) -> anyhow::Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// Engine path from the flag, then the environment, then the file.
    pub fn engine_path(&self, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| std::env::var_os(ENGINE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .or_else(|| self.engine.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_keys() {
        let c = Config::parse("seed = 7\nengine = \"/opt/sf\"\ndepth = 12\nannotators = [\"a\", \"b\"]\n").unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.depth, Some(12));
        assert_eq!(c.annotators.as_deref(), Some(&["a".to_string(), "b".to_string()][..]));
        assert_eq!(c.engine_path(Some("/bin/x".into())), Some(PathBuf::from("/bin/x")));
        assert!(Config::parse("colour = 1").is_err());
    }
}
