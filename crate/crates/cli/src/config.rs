//! Flat `key=value` config files, merged under command-line flags.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "KCORE_LAB_SEED";

pub const KNOWN_KEYS: &[&str] = &[
    "k", "lambda", "gamma", "model", "n", "reps", "seed", "grid", "delta", "tolerance", "bootstrap", "threads",
    "output", "critical",
];

#[derive(Debug, Default, Clone)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected key=value", i + 1);
            };
            let key = key.trim().to_ascii_lowercase().replace('-', "_");
            let key = if key == "replicates" { "reps".to_string() } else { key };
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("config line {}: unknown key {key:?}", i + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Value of `key` parsed as `T`, if present.
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key {key}: cannot parse {v:?}: {e}")),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag, then config file, then fallback.
pub fn resolve<T: std::str::FromStr>(flag: Option<T>, file: &FileConfig, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

/// Flag, then config file, then the environment, then 1.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64> {
    if let Some(s) = resolve(flag, file, "seed")? {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v:?} is not a u64")),
        Err(_) => Ok(1),
    }
}

/// `a:step:b` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad grid number {p:?}")))
            .collect::<Result<_>>()?;
        let (a, step, b) = (nums[0], nums[1], nums[2]);
        if !(step > 0.0) || b < a {
            bail!("grid {spec:?}: need step > 0 and end >= start");
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        (0..=count).map(|i| kcore_lab::io::round_sig(a + i as f64 * step, 12)).collect()
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad grid number {p:?}")))
            .collect::<Result<Vec<_>>>()?
    };
    if grid.is_empty() {
        bail!("empty grid");
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0.1:0.1:0.5").unwrap(), vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(parse_grid("0.1,0.3").unwrap(), vec![0.1, 0.3]);
        assert!(parse_grid("0.5:0.1:0.1").is_err());
    }

    #[test]
    fn file_parsing() {
        let c = FileConfig::parse("# c\nk = 3\nreplicates=10\n").unwrap();
        assert_eq!(c.get::<usize>("k").unwrap(), Some(3));
        assert_eq!(c.get::<usize>("reps").unwrap(), Some(10));
        assert_eq!(resolve(Some(4usize), &c, "k").unwrap(), Some(4));
        assert!(FileConfig::parse("bogus=1").is_err());
        assert!(FileConfig::parse("k").is_err());
    }
}
