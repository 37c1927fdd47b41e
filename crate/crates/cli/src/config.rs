//! `key = value` configuration files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Keys a configuration file may set. Dashes and underscores are equivalent.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "out",
    "threads",
    "problem",
    "y",
    "t",
    "temperature",
    "bias",
    "mse",
    "sigma2",
    "n",
    "m",
    "burn_in",
    "thinning",
    "proposal",
    "q",
    "beta0",
    "replicates",
    "regime",
    "temperatures",
    "lengths",
    "tolerance",
    "fast",
    "slow",
    "bins",
    "u",
    "ys",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// The flag value if given, else the config value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key {key}: cannot parse {raw:?}: {e}"))),
        }
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }
}

/// Comma-separated list, e.g. `1,9,16`.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|tok| tok.trim().parse::<T>().map_err(|e| format!("{tok:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(List)
    }
}
