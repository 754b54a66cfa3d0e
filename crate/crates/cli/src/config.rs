//! Layered option resolution: command line, then config file, then default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Cli,
    Config,
    Default,
}

#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub value: String,
    pub source: Source,
}

#[derive(Debug, Default)]
pub struct Layers {
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, Resolved>,
}

fn toml_to_string(v: &toml::Value) -> Result<String, CliError> {
    Ok(match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        toml::Value::Array(items) => items.iter().map(toml_to_string).collect::<Result<Vec<_>, _>>()?.join(","),
        other => return Err(CliError::Usage(format!("unsupported config value {other}"))),
    })
}

impl Layers {
    /// Reads flat `key = value` pairs. Keys use the long flag names; dashes
    /// and underscores are interchangeable.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let table: toml::Table =
            text.parse().map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let mut file = BTreeMap::new();
        for (k, v) in &table {
            file.insert(k.replace('_', "-"), toml_to_string(v)?);
        }
        Ok(Self { file, resolved: BTreeMap::new() })
    }

    fn record(&mut self, key: &str, value: String, source: Source) {
        self.resolved.insert(key.to_string(), Resolved { value, source });
    }

    fn from_file<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.file.remove(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key {key} = {raw:?}: {e}"))),
        }
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.from_file(key)?;
        let (value, source) = match (cli, from_file) {
            (Some(v), _) => (v, Source::Cli),
            (None, Some(v)) => (v, Source::Config),
            (None, None) => (default, Source::Default),
        };
        self.record(key, value.to_string(), source);
        Ok(value)
    }

    /// Like [`Layers::get`] for options without a default.
    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let from_file = self.from_file(key)?;
        let resolved = match (cli, from_file) {
            (Some(v), _) => Some((v, Source::Cli)),
            (None, Some(v)) => Some((v, Source::Config)),
            (None, None) => None,
        };
        Ok(resolved.map(|(v, source)| {
            self.record(key, v.to_string(), source);
            v
        }))
    }

    pub fn require<T: FromStr + Display>(&mut self, key: &str, cli: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get_opt(key, cli)?.ok_or_else(|| CliError::Usage(format!("--{key} is required")))
    }

    /// A boolean switch: set on the command line, or `true` in the file.
    pub fn switch(&mut self, key: &str, cli: bool) -> Result<bool, CliError> {
        let v = self.get(key, cli.then_some(true), false)?;
        Ok(v)
    }

    /// Fails on config keys no option consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        if let Some(k) = self.file.keys().next() {
            return Err(CliError::Usage(format!("unknown config key {k:?}")));
        }
        Ok(())
    }

    pub fn resolved(&self) -> &BTreeMap<String, Resolved> {
        &self.resolved
    }
}
