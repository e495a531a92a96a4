//! Flat `key = value` configuration files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "XSRL_SEED";

/// Parsed `key = value` file. Keys are normalized to use `_`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlatConfig {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::input(format!("config line {}: expected `key = value`", i + 1)))?;
            let key = normalize(key);
            if key.is_empty() {
                return Err(CliError::input(format!("config line {}: empty key", i + 1)));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::input(format!("config line {}: duplicate key {key:?}", i + 1)));
            }
        }
        Ok(FlatConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        FlatConfig::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::input(format!("config key {key:?}: invalid value {v:?}"))),
        }
    }
}

/// Flag if given, else the config value, else `default`.
pub fn resolve<T: FromStr>(flag: Option<T>, config: &FlatConfig, key: &str, default: T) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(config.get(key)?.unwrap_or(default)),
    }
}

/// Seed precedence: flag, config file, environment variable, 42.
pub fn resolve_seed(flag: Option<u64>, config: &FlatConfig, env: Option<&str>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(seed) = config.get("seed")? {
        return Ok(seed);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("{SEED_ENV}: invalid seed {v:?}"))),
        None => Ok(DEFAULT_SEED),
    }
}

/// Inputs and outputs of one end-to-end run, read from a flat config file.
///
/// Required keys: `parallel`, `source`, `translations`, `dev`, `out_dir`.
/// Optional: `tagged` (POS-fitting corpus, defaults to `translations`),
/// `seed`, and any training or projection option by its flag name.
/// Relative paths are taken from the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineManifest {
    pub parallel: PathBuf,
    pub source: PathBuf,
    pub translations: PathBuf,
    pub tagged: PathBuf,
    pub dev: PathBuf,
    pub out_dir: PathBuf,
    pub overrides: FlatConfig,
    pub seed: u64,
}

impl PipelineManifest {
    pub fn load(path: &Path, seed_flag: Option<u64>) -> Result<Self, CliError> {
        let config = FlatConfig::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let path_of = |key: &str| -> Result<PathBuf, CliError> {
            let value = config
                .raw(key)
                .ok_or_else(|| CliError::input(format!("manifest {}: missing key {key:?}", path.display())))?;
            Ok(base.join(value))
        };
        let existing = |key: &str| -> Result<PathBuf, CliError> {
            let p = path_of(key)?;
            if !p.exists() {
                return Err(CliError::input(format!("manifest key {key:?}: {} does not exist", p.display())));
            }
            Ok(p)
        };
        let translations = existing("translations")?;
        let tagged = match config.raw("tagged") {
            Some(_) => existing("tagged")?,
            None => translations.clone(),
        };
        let env = std::env::var(SEED_ENV).ok();
        Ok(PipelineManifest {
            parallel: existing("parallel")?,
            source: existing("source")?,
            translations,
            tagged,
            dev: existing("dev")?,
            out_dir: path_of("out_dir")?,
            seed: resolve_seed(seed_flag, &config, env.as_deref())?,
            overrides: config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_files() {
        let c = FlatConfig::parse("# comment\nhidden = 64\nbatch-size=10\n\nvariant = basic\n").unwrap();
        assert_eq!(c.get::<usize>("hidden").unwrap(), Some(64));
        assert_eq!(c.get::<usize>("batch_size").unwrap(), Some(10));
        assert_eq!(c.raw("variant"), Some("basic"));
        assert_eq!(c.get::<usize>("epochs").unwrap(), None);
        assert!(c.get::<usize>("variant").is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(FlatConfig::parse("hidden 64").is_err());
        assert!(FlatConfig::parse("a = 1\na = 2").is_err());
        assert!(FlatConfig::parse(" = 2").is_err());
    }

    #[test]
    fn flags_override_config() {
        let c = FlatConfig::parse("epochs = 5").unwrap();
        assert_eq!(resolve(Some(7), &c, "epochs", 80).unwrap(), 7);
        assert_eq!(resolve(None, &c, "epochs", 80).unwrap(), 5);
        assert_eq!(resolve(None, &FlatConfig::default(), "epochs", 80).unwrap(), 80);
    }

    #[test]
    fn seed_precedence() {
        let c = FlatConfig::parse("seed = 3").unwrap();
        let empty = FlatConfig::default();
        assert_eq!(resolve_seed(Some(1), &c, Some("2")).unwrap(), 1);
        assert_eq!(resolve_seed(None, &c, Some("2")).unwrap(), 3);
        assert_eq!(resolve_seed(None, &empty, Some("2")).unwrap(), 2);
        assert_eq!(resolve_seed(None, &empty, None).unwrap(), 42);
        assert!(resolve_seed(None, &empty, Some("x")).is_err());
    }
}
