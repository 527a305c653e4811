//! `key = value` config files and flag/file/default resolution.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Keys accepted in a config file besides the training ones.
const OTHER_KEYS: &[&str] = &[
    "corpus",
    "vocab",
    "checkpoint",
    "out",
    "valid",
    "loss-log",
    "generations",
    "preset",
    "seed-text",
    "sentences",
    "beam-width",
    "max-decode-len",
    "length-norm-alpha",
    "min-count",
    "max-sentence-len",
    "test-fraction",
    "tokenizer",
    "vocab-size",
    "epsilon",
    "tolerance",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::parse(&text).with_context(|| format!("in config {}", p.display()))
            }
        }
    }

    /// Blank lines and `#` comments are ignored; `_` in keys reads as `-`.
    pub fn parse(text: &str) -> Result<Self> {
        let probe = lyricseq::training::TrainConfig::default();
        let train_keys: Vec<&str> = probe.entries().into_iter().map(|(k, _)| k).collect();
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let key = k.trim().trim_start_matches("--").replace('_', "-");
            if !train_keys.contains(&key.as_str()) && !OTHER_KEYS.contains(&key.as_str()) {
                bail!("line {}: unknown key `{key}`", i + 1);
            }
            entries.insert(key, v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Flag value, else config-file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }

    pub fn pick_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| v.parse().map_err(|_| anyhow!("config: bad value for {key}: {v:?}")))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.pick_opt(flag, key)?
            .ok_or_else(|| anyhow!("--{key} is required (on the command line or in --config)"))
    }
}
