//! Run configuration: typed values resolved from command-line flags, an
//! optional flat `key=value` file and built-in defaults, in that order of
//! precedence. Every resolved value is recorded so the run can be echoed.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Parses `key=value` lines. Blank lines and lines starting with `#` are
/// ignored; keys may use `-` or `_`.
pub fn parse_config(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| anyhow!("{origin}:{}: expected key=value, found '{line}'", i + 1))?;
        let key = normalize(k);
        if key.is_empty() {
            bail!("{origin}:{}: empty key", i + 1);
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("{origin}:{}: duplicate key '{key}'", i + 1);
        }
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

pub struct Resolver {
    file: BTreeMap<String, String>,
    origin: String,
    used: Vec<String>,
    echo: BTreeMap<String, String>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let (file, origin) = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let origin = path.display().to_string();
                (parse_config(&text, &origin)?, origin)
            }
            None => (BTreeMap::new(), String::new()),
        };
        Ok(Self { file, origin, used: Vec::new(), echo: BTreeMap::new() })
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.file.get(key).filter(|t| !t.is_empty()) {
            Some(text) => {
                text.parse().map(Some).map_err(|e| anyhow!("{}: invalid value '{text}' for {key}: {e}", self.origin))
            }
            None => Ok(None),
        }
    }

    /// Flag, then file, then `default`.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        self.used.push(key.to_string());
        let v = match flag {
            Some(v) => v,
            None => self.file_value(key)?.unwrap_or(default),
        };
        self.echo.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Like [`get`](Self::get) without a default. Unset values are echoed
    /// empty, and an empty value in a file counts as unset.
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        self.used.push(key.to_string());
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        self.echo.insert(key.to_string(), v.as_ref().map(ToString::to_string).unwrap_or_default());
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: Display,
    {
        self.optional(key, flag)?.ok_or_else(|| {
            anyhow!("missing required setting '{}' (flag --{} or config key)", key, key.replace('_', "-"))
        })
    }

    /// Fails on config keys that no setting of this command consumed.
    pub fn finish(self, command: &str) -> Result<RunConfig> {
        let unknown: Vec<&String> = self.file.keys().filter(|k| !self.used.contains(k)).collect();
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            bail!("{}: unknown key(s) for '{command}': {}", self.origin, names.join(", "));
        }
        Ok(RunConfig { command: command.to_string(), values: self.echo })
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

impl RunConfig {
    /// The echo written next to a run's outputs; it is itself a valid config
    /// file for the same command.
    pub fn render(&self) -> String {
        let mut s = format!("# grridge {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k}={v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_file_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nseed = 7\nmax-iters=3\n\n").unwrap();
        let mut r = Resolver::new(Some(&path)).unwrap();
        assert_eq!(r.get("seed", Some(9u64), 0).unwrap(), 9);
        assert_eq!(r.get("max_iters", None, 10usize).unwrap(), 3);
        assert_eq!(r.get("folds", None, "10".to_string()).unwrap(), "10");
        let cfg = r.finish("fit").unwrap();
        assert_eq!(cfg.render().lines().skip(1).collect::<Vec<_>>(), ["folds=10", "max_iters=3", "seed=9"]);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(parse_config("novalue\n", "x").unwrap_err().to_string().contains("x:1"));
        assert!(parse_config("a=1\na=2\n", "x").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "bogus=1\n").unwrap();
        let r = Resolver::new(Some(&path)).unwrap();
        assert!(r.finish("fit").unwrap_err().to_string().contains("bogus"));
    }

    #[test]
    fn bad_value_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "seed=abc\n").unwrap();
        let mut r = Resolver::new(Some(&path)).unwrap();
        assert!(r.get("seed", None, 0u64).unwrap_err().to_string().contains("seed"));
    }
}
