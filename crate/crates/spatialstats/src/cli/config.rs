//! Flat key-value pipeline configuration: `key = value` lines with `#`
//! comments. Unknown keys are rejected after a command has consumed
//! everything it understands.

use std::collections::BTreeMap;

use super::CliError;

#[derive(Debug)]
pub struct ConfigMap {
    pairs: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut pairs = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Validation(format!("line {}: empty key", lineno + 1)));
            }
            if pairs.insert(key.clone(), value).is_some() {
                return Err(CliError::Validation(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { pairs })
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.pairs.remove(key)
    }

    pub fn take_required(&mut self, key: &str) -> Result<String, CliError> {
        self.take(key)
            .ok_or_else(|| CliError::Validation(format!("missing required key `{key}`")))
    }

    pub fn take_f64(&mut self, key: &str) -> Result<f64, CliError> {
        parse_f64(key, &self.take_required(key)?)
    }

    pub fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.take(key) {
            Some(v) => parse_f64(key, &v),
            None => Ok(default),
        }
    }

    pub fn take_usize(&mut self, key: &str) -> Result<usize, CliError> {
        let raw = self.take_required(key)?;
        raw.parse()
            .map_err(|_| CliError::Validation(format!("key `{key}`: bad integer `{raw}`")))
    }

    pub fn take_usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.take(key) {
            Some(raw) => raw
                .parse()
                .map_err(|_| CliError::Validation(format!("key `{key}`: bad integer `{raw}`"))),
            None => Ok(default),
        }
    }

    pub fn take_u64(&mut self, key: &str) -> Option<Result<u64, CliError>> {
        self.take(key).map(|raw| {
            raw.parse()
                .map_err(|_| CliError::Validation(format!("key `{key}`: bad integer `{raw}`")))
        })
    }

    /// Whitespace-separated list of floats.
    pub fn take_f64_list(&mut self, key: &str, want: usize) -> Result<Vec<f64>, CliError> {
        let raw = self.take_required(key)?;
        let vals: Result<Vec<f64>, CliError> =
            raw.split_whitespace().map(|t| parse_f64(key, t)).collect();
        let vals = vals?;
        if vals.len() != want {
            return Err(CliError::Validation(format!(
                "key `{key}`: expected {want} numbers, got {}",
                vals.len()
            )));
        }
        Ok(vals)
    }

    pub fn take_usize_list(&mut self, key: &str, want: usize) -> Result<Vec<usize>, CliError> {
        let raw = self.take_required(key)?;
        let vals: Result<Vec<usize>, CliError> = raw
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| CliError::Validation(format!("key `{key}`: bad integer `{t}`")))
            })
            .collect();
        let vals = vals?;
        if vals.len() != want {
            return Err(CliError::Validation(format!(
                "key `{key}`: expected {want} integers, got {}",
                vals.len()
            )));
        }
        Ok(vals)
    }

    /// Errors on any key the command did not consume.
    pub fn finish(self) -> Result<(), CliError> {
        if let Some(key) = self.pairs.keys().next() {
            return Err(CliError::Validation(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.parse()
        .map_err(|_| CliError::Validation(format!("key `{key}`: bad number `{raw}`")))
}
