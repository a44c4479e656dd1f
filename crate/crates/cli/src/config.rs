//! Run configuration: a flat sectioned `key = value` format.
//!
//! ```text
//! # comment
//! [params]
//! d = 1
//! T_h = 1
//! [model]
//! family = "expr"
//! f = "x*(1 - x/10)"
//! ```
//!
//! Strings are double-quoted (`\"` and `\\` escape); everything else is a
//! bare word. Unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use biocontrol_core::expr::parse;
use biocontrol_core::model::{ImpulseParams, ResponseFn, ResponseModel, DEFAULT_X_MAX};
use biocontrol_core::stability::PeriodRatio;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key {section}.{key}")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: duplicate key {section}.{key}")]
    Duplicate { line: usize, section: String, key: String },
    #[error("missing key {section}.{key}")]
    Missing { section: &'static str, key: &'static str },
    #[error("line {line}: {section}.{key}: {message}")]
    Invalid { line: usize, section: String, key: String, message: String },
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("model", &["family", "a", "b", "c", "K", "tau", "gamma", "f", "g", "h", "x_max"]),
    ("params", &["d", "alpha_x", "alpha_y", "T_h", "T_r", "mu"]),
    ("sim", &["x0", "y0", "t_end", "dt", "extinction_threshold", "extinction_hold", "sample_stride"]),
    ("sweep", &["ratios", "k_max"]),
    ("output", &["path", "json", "samples"]),
];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    quoted: bool,
    line: usize,
}

/// Parsed but untyped configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
}

fn unquote(raw: &str, line: usize) -> Result<(String, &str), ConfigError> {
    let mut out = String::new();
    let mut chars = raw.char_indices().skip(1);
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => return Ok((out, &raw[i + 1..])),
            '\\' => match chars.next() {
                Some((_, e @ ('"' | '\\'))) => out.push(e),
                _ => {
                    return Err(ConfigError::Syntax { line, message: "bad escape in string".into() })
                }
            },
            c => out.push(c),
        }
    }
    Err(ConfigError::Syntax { line, message: "unterminated string".into() })
}

fn strip_comment(s: &str) -> &str {
    s.split_once('#').map_or(s, |(head, _)| head).trim()
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = RawConfig::default();
        let mut section: Option<(&'static str, &'static [&'static str])> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('[') {
                let Some((name, tail)) = rest.split_once(']') else {
                    return Err(ConfigError::Syntax { line, message: "expected ']'".into() });
                };
                if !strip_comment(tail).is_empty() {
                    return Err(ConfigError::Syntax { line, message: "text after section header".into() });
                }
                let name = name.trim();
                section = Some(
                    *SECTIONS.iter().find(|(s, _)| *s == name).ok_or_else(|| {
                        ConfigError::UnknownSection { line, section: name.to_string() }
                    })?,
                );
                continue;
            }
            let Some((key, rest)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: "expected 'key = value'".into() });
            };
            let Some((section_name, keys)) = section else {
                return Err(ConfigError::Syntax { line, message: "key outside of a section".into() });
            };
            let key = key.trim();
            if !keys.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: section_name.to_string(),
                    key: key.to_string(),
                });
            }
            let rest = rest.trim_start();
            let (value, quoted) = if rest.starts_with('"') {
                let (value, tail) = unquote(rest, line)?;
                if !strip_comment(tail).is_empty() {
                    return Err(ConfigError::Syntax { line, message: "text after string value".into() });
                }
                (value, true)
            } else {
                let value = strip_comment(rest);
                if value.is_empty() {
                    return Err(ConfigError::Syntax { line, message: format!("empty value for {key}") });
                }
                (value.to_string(), false)
            };
            let slot = (section_name.to_string(), key.to_string());
            if config.entries.contains_key(&slot) {
                return Err(ConfigError::Duplicate {
                    line,
                    section: section_name.to_string(),
                    key: key.to_string(),
                });
            }
            config.entries.insert(slot, Entry { value, quoted, line });
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        Self::parse(&text)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(section.to_string(), key.to_string()))
    }

    pub fn contains(&self, section: &str, key: &str) -> bool {
        self.entry(section, key).is_some()
    }

    fn invalid(entry: &Entry, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: entry.line,
            section: section.to_string(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn opt_f64(&self, section: &'static str, key: &'static str) -> Result<Option<f64>, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        match entry.value.parse::<f64>() {
            Ok(v) if v.is_finite() && !entry.quoted => Ok(Some(v)),
            _ => Err(Self::invalid(entry, section, key, format!("expected a number, got {:?}", entry.value))),
        }
    }

    pub fn f64(&self, section: &'static str, key: &'static str) -> Result<f64, ConfigError> {
        self.opt_f64(section, key)?.ok_or(ConfigError::Missing { section, key })
    }

    pub fn opt_usize(&self, section: &'static str, key: &'static str) -> Result<Option<usize>, ConfigError> {
        let Some(entry) = self.entry(section, key) else {
            return Ok(None);
        };
        entry
            .value
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Self::invalid(entry, section, key, format!("expected a count, got {:?}", entry.value)))
    }

    pub fn opt_str(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.entry(section, key).map_or(0, |e| e.line)
    }
}

/// What a subcommand needs from `[params]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamNeeds {
    /// Every key.
    Full,
    /// `T_r` defaults to `T_h` and `mu` to 0.
    Schedule,
}

pub fn impulse_params(raw: &RawConfig, needs: ParamNeeds) -> Result<ImpulseParams, ConfigError> {
    let d = raw.f64("params", "d")?;
    let alpha_x = raw.f64("params", "alpha_x")?;
    let alpha_y = raw.f64("params", "alpha_y")?;
    let t_h = raw.f64("params", "T_h")?;
    let (t_r, mu) = match needs {
        ParamNeeds::Full => (raw.f64("params", "T_r")?, raw.f64("params", "mu")?),
        ParamNeeds::Schedule => {
            (raw.opt_f64("params", "T_r")?.unwrap_or(t_h), raw.opt_f64("params", "mu")?.unwrap_or(0.0))
        }
    };
    ImpulseParams::new(d, alpha_x, alpha_y, t_h, t_r, mu).map_err(|e| ConfigError::Invalid {
        line: raw.line_of("params", "d"),
        section: "params".into(),
        key: "*".into(),
        message: e.to_string(),
    })
}

fn expression(raw: &RawConfig, key: &'static str) -> Result<ResponseFn, ConfigError> {
    let entry = raw.entry("model", key).ok_or(ConfigError::Missing { section: "model", key })?;
    parse(&entry.value)
        .map(ResponseFn::from)
        .map_err(|e| RawConfig::invalid(entry, "model", key, e.to_string()))
}

const FAMILY_KEYS: &[(&str, &[&str])] = &[
    ("lotka_volterra", &["a", "b", "c"]),
    ("logistic_holling", &["a", "K", "c", "tau", "gamma"]),
    ("expr", &["f", "g", "h"]),
];

pub fn response_model(raw: &RawConfig) -> Result<ResponseModel, ConfigError> {
    let family = raw.opt_str("model", "family").ok_or(ConfigError::Missing { section: "model", key: "family" })?;
    let Some((_, allowed)) = FAMILY_KEYS.iter().find(|(name, _)| *name == family) else {
        let entry = raw.entry("model", "family").expect("present");
        return Err(RawConfig::invalid(
            entry,
            "model",
            "family",
            format!("unknown family {family:?} (expected lotka_volterra, logistic_holling or expr)"),
        ));
    };
    for (section, key) in raw.entries.keys() {
        if section == "model" && key != "family" && key != "x_max" && !allowed.contains(&key.as_str()) {
            let entry = raw.entry(section, key).expect("present");
            return Err(RawConfig::invalid(entry, section, key, format!("not a parameter of {family}")));
        }
    }
    let model = match family {
        "lotka_volterra" => ResponseModel::lotka_volterra(
            raw.f64("model", "a")?,
            raw.f64("model", "b")?,
            raw.f64("model", "c")?,
        ),
        "logistic_holling" => ResponseModel::logistic_holling(
            raw.f64("model", "a")?,
            raw.f64("model", "K")?,
            raw.f64("model", "c")?,
            raw.f64("model", "tau")?,
            raw.f64("model", "gamma")?,
        ),
        _ => ResponseModel::new(expression(raw, "f")?, expression(raw, "g")?, expression(raw, "h")?),
    };
    let x_max = raw.opt_f64("model", "x_max")?.unwrap_or(DEFAULT_X_MAX);
    if !(x_max > 0.0) {
        let entry = raw.entry("model", "x_max").expect("present");
        return Err(RawConfig::invalid(entry, "model", "x_max", "must be > 0"));
    }
    Ok(model.with_x_max(x_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimSettings {
    pub x0: f64,
    pub y0: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub extinction: Option<(f64, f64)>,
    pub sample_stride: usize,
}

pub fn sim_settings(raw: &RawConfig) -> Result<SimSettings, ConfigError> {
    let threshold = raw.opt_f64("sim", "extinction_threshold")?;
    let hold = raw.opt_f64("sim", "extinction_hold")?;
    let extinction = match (threshold, hold) {
        (Some(t), h) => Some((t, h.unwrap_or(0.0))),
        (None, Some(_)) => {
            return Err(ConfigError::Missing { section: "sim", key: "extinction_threshold" })
        }
        (None, None) => None,
    };
    Ok(SimSettings {
        x0: raw.f64("sim", "x0")?,
        y0: raw.f64("sim", "y0")?,
        t_end: raw.f64("sim", "t_end")?,
        dt: raw.opt_f64("sim", "dt")?,
        extinction,
        sample_stride: raw.opt_usize("sim", "sample_stride")?.unwrap_or(1),
    })
}

fn parse_ratio(token: &str) -> Option<f64> {
    match token.split_once('/') {
        Some((n, d)) => Some(n.trim().parse::<f64>().ok()? / d.trim().parse::<f64>().ok()?),
        None => token.parse().ok(),
    }
}

/// `[sweep] ratios` as a list like `"1/3, 1/2, 1, 2"`, or if absent
/// `1/k_max, ..., 1/2, 1, 2, ..., k_max` (default `k_max = 5`).
pub fn sweep_ratios(raw: &RawConfig) -> Result<Vec<PeriodRatio>, ConfigError> {
    if let Some(entry) = raw.entry("sweep", "ratios") {
        return entry
            .value
            .split(',')
            .map(|tok| {
                parse_ratio(tok.trim())
                    .and_then(|v| PeriodRatio::from_value(v).ok())
                    .ok_or_else(|| {
                        RawConfig::invalid(
                            entry,
                            "sweep",
                            "ratios",
                            format!("{:?} is not an integer or 1/integer", tok.trim()),
                        )
                    })
            })
            .collect();
    }
    let k_max = raw.opt_usize("sweep", "k_max")?.unwrap_or(5);
    if k_max == 0 || k_max > u32::MAX as usize {
        let entry = raw.entry("sweep", "k_max").expect("present");
        return Err(RawConfig::invalid(entry, "sweep", "k_max", "must be >= 1"));
    }
    let k_max = k_max as u32;
    let mut ratios: Vec<PeriodRatio> = (2..=k_max).rev().map(PeriodRatio::Fraction).collect();
    ratios.extend((1..=k_max).map(PeriodRatio::Multiple));
    Ok(ratios)
}
