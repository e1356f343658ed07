//! Flat `key = value` experiment configs.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use svsmooth_core::ensembles::{ScalarDistribution, ShiftMatrix};

/// One problem with a config, tied to the key that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

/// Keys and raw string values, sorted by key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses either the flat format or a JSON object. A JSON object with a
    /// `config` member (as written to `<command>.meta.json`) uses that member.
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_flat(text)
        }
    }

    pub fn parse_flat(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let mut entries = BTreeMap::new();
        let mut diags = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                diags.push(Diagnostic::new(format!("line {}", i + 1), "expected `key = value`"));
                continue;
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                diags.push(Diagnostic::new(format!("line {}", i + 1), "empty key"));
                continue;
            }
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                diags.push(Diagnostic::new(key, "duplicate key"));
            }
        }
        if diags.is_empty() { Ok(Self { entries }) } else { Err(diags) }
    }

    pub fn parse_json(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| vec![Diagnostic::new("json", e.to_string())])?;
        let obj = match value.get("config") {
            Some(inner) => inner,
            None => &value,
        };
        let obj = obj
            .as_object()
            .ok_or_else(|| vec![Diagnostic::new("json", "expected an object of keys")])?;
        let mut entries = BTreeMap::new();
        let mut diags = Vec::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                _ => {
                    diags.push(Diagnostic::new(k.clone(), "values must be strings, numbers or booleans"));
                    continue;
                }
            };
            entries.insert(k.clone(), s);
        }
        if diags.is_empty() { Ok(Self { entries }) } else { Err(diags) }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    /// Flat-format rendering, one `key = value` per line.
    pub fn to_flat(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Typed access to a [`RawConfig`] that records every key read and every
/// parse failure.
pub struct Reader<'a> {
    raw: &'a RawConfig,
    used: RefCell<BTreeSet<String>>,
    diags: RefCell<Vec<Diagnostic>>,
}

impl<'a> Reader<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Self { raw, used: RefCell::default(), diags: RefCell::default() }
    }

    pub fn error(&self, key: &str, message: impl Into<String>) {
        self.diags.borrow_mut().push(Diagnostic::new(key, message));
    }

    pub fn has(&self, key: &str) -> bool {
        self.used.borrow_mut().insert(key.to_string());
        self.raw.get(key).is_some()
    }

    fn raw_value(&self, key: &str) -> Option<&'a str> {
        self.used.borrow_mut().insert(key.to_string());
        self.raw.get(key)
    }

    fn parse_with<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        let v = self.raw_value(key)?;
        match f(v) {
            Ok(x) => Some(x),
            Err(e) => {
                self.error(key, e);
                None
            }
        }
    }

    /// Parsed value, with a diagnostic when missing or malformed.
    pub fn required<T: FromStr>(&self, key: &str) -> Option<T> {
        if self.raw.get(key).is_none() {
            self.used.borrow_mut().insert(key.to_string());
            self.error(key, "missing required key");
            return None;
        }
        self.optional(key)
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Option<T> {
        self.parse_with(key, |v| v.parse::<T>().map_err(|_| format!("cannot parse `{v}`")))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Option<T> {
        if self.raw.get(key).is_none() {
            self.used.borrow_mut().insert(key.to_string());
            return Some(default);
        }
        self.optional(key)
    }

    /// Comma-separated list of reals.
    pub fn reals(&self, key: &str) -> Option<Vec<f64>> {
        if self.raw.get(key).is_none() {
            self.used.borrow_mut().insert(key.to_string());
            self.error(key, "missing required key");
            return None;
        }
        self.parse_with(key, parse_reals)
    }

    pub fn reals_or(&self, key: &str, default: Vec<f64>) -> Option<Vec<f64>> {
        if self.raw.get(key).is_none() {
            self.used.borrow_mut().insert(key.to_string());
            return Some(default);
        }
        self.parse_with(key, parse_reals)
    }

    pub fn distribution(&self, key: &str, default: ScalarDistribution) -> Option<ScalarDistribution> {
        if self.raw.get(key).is_none() {
            self.used.borrow_mut().insert(key.to_string());
            return Some(default);
        }
        self.parse_with(key, |v| v.parse::<ScalarDistribution>().map_err(|e| e.to_string()))
    }

    pub fn shift(&self, key: &str, n: usize) -> Option<ShiftMatrix> {
        if self.raw.get(key).is_none() {
            self.used.borrow_mut().insert(key.to_string());
            return Some(ShiftMatrix::zero(n));
        }
        let shift = self.parse_with(key, |v| parse_shift(v, n))?;
        if shift.n() != n {
            self.error(key, format!("shift has size {}, but n = {n}", shift.n()));
            return None;
        }
        Some(shift)
    }

    /// Diagnostics so far plus one per key never read.
    pub fn finish(self) -> Vec<Diagnostic> {
        let used = self.used.into_inner();
        let mut diags = self.diags.into_inner();
        for key in self.raw.entries.keys() {
            if !used.contains(key) {
                diags.push(Diagnostic::new(key.clone(), "unknown key for this command"));
            }
        }
        diags
    }
}

pub fn parse_reals(v: &str) -> Result<Vec<f64>, String> {
    let out: Result<Vec<f64>, String> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("cannot parse `{s}` as a real")))
        .collect();
    let out = out?;
    if out.is_empty() {
        return Err("empty list".into());
    }
    if out.iter().any(|x| !x.is_finite()) {
        return Err("values must be finite".into());
    }
    Ok(out)
}

/// `zero`, `identity`, `scaled:<c>` or `diag:<v>[x<count>],...`, for example
/// `diag:1e6x50,0x50`.
pub fn parse_shift(v: &str, n: usize) -> Result<ShiftMatrix, String> {
    let v = v.trim();
    match v {
        "zero" => return Ok(ShiftMatrix::zero(n)),
        "identity" => return Ok(ShiftMatrix::identity(n)),
        _ => {}
    }
    if let Some(c) = v.strip_prefix("scaled:") {
        let c: f64 = c.trim().parse().map_err(|_| format!("cannot parse scale `{c}`"))?;
        return Ok(ShiftMatrix::Diagonal(vec![c; n]));
    }
    let body = v
        .strip_prefix("diag:")
        .ok_or_else(|| format!("unknown shift `{v}` (expected zero, identity, scaled:c or diag:...)"))?;
    let mut d = Vec::new();
    for part in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (value, count) = match part.rsplit_once('x') {
            Some((a, b)) => (a, b.parse::<usize>().map_err(|_| format!("bad repeat count in `{part}`"))?),
            None => (part, 1),
        };
        let value: f64 = value.parse().map_err(|_| format!("cannot parse `{value}`"))?;
        if !value.is_finite() {
            return Err("shift entries must be finite".into());
        }
        d.extend(std::iter::repeat_n(value, count));
    }
    Ok(ShiftMatrix::Diagonal(d))
}
