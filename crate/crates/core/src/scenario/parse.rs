//! Flat `key = value` text with `[section]` headers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub(crate) const SECTIONS: [&str; 7] = [
    "scenario",
    "plant",
    "model",
    "controller",
    "trajectory",
    "run",
    "output",
];

/// Keys are removed as they are read; whatever remains is reported as
/// unknown by [`RawConfig::finish`].
#[derive(Debug)]
pub(crate) struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

fn field(section: &str, key: &str) -> String {
    format!("{section}.{key}")
}

impl RawConfig {
    pub(crate) fn parse(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes).map_err(|e| {
            let line = bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            Error::Parse {
                line,
                msg: "config is not valid UTF-8".into(),
            }
        })?;
        let mut entries = BTreeMap::new();
        let mut sections = std::collections::BTreeSet::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unterminated section header `{body}`"),
                    });
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "unknown section `[{name}]` (expected one of {})",
                            SECTIONS.join(", ")
                        ),
                    });
                }
                if !sections.insert(name.to_string()) {
                    return Err(Error::Parse {
                        line,
                        msg: format!("section `[{name}]` appears twice"),
                    });
                }
                current = Some(name.to_string());
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected `key = value`, found `{body}`"),
                });
            };
            let Some(section) = &current else {
                return Err(Error::Parse {
                    line,
                    msg: "key outside of any section".into(),
                });
            };
            let key = k.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Parse {
                    line,
                    msg: format!("invalid key `{key}`"),
                });
            }
            let name = field(section, key);
            if entries
                .insert(name.clone(), (line, v.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config {
                    line,
                    field: name,
                    msg: "duplicate key".into(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub(crate) fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries.remove(&field(section, key))
    }

    pub(crate) fn err(section: &str, key: &str, line: usize, msg: impl Into<String>) -> Error {
        Error::Config {
            line,
            field: field(section, key),
            msg: msg.into(),
        }
    }

    pub(crate) fn string(&mut self, section: &str, key: &str) -> Result<(usize, String)> {
        self.take(section, key)
            .ok_or_else(|| Error::MissingField(field(section, key)))
    }

    fn number(section: &str, key: &str, line: usize, raw: &str) -> Result<f64> {
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Self::err(
                section,
                key,
                line,
                format!("`{raw}` is not a finite number"),
            )),
        }
    }

    pub(crate) fn opt_f64(&mut self, section: &str, key: &str) -> Result<Option<(usize, f64)>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, raw)) => Ok(Some((line, Self::number(section, key, line, &raw)?))),
        }
    }

    pub(crate) fn f64(&mut self, section: &str, key: &str) -> Result<(usize, f64)> {
        self.opt_f64(section, key)?
            .ok_or_else(|| Error::MissingField(field(section, key)))
    }

    /// Any finite value; `default` when absent.
    pub(crate) fn real_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(section, key)?.map_or(default, |v| v.1))
    }

    pub(crate) fn positive(&mut self, section: &str, key: &str) -> Result<f64> {
        let (line, v) = self.f64(section, key)?;
        check_positive(section, key, line, v)
    }

    pub(crate) fn positive_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.opt_f64(section, key)? {
            None => Ok(default),
            Some((line, v)) => check_positive(section, key, line, v),
        }
    }

    pub(crate) fn nonneg_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.opt_f64(section, key)? {
            None => Ok(default),
            Some((_, v)) if v >= 0.0 => Ok(v),
            Some((line, v)) => Err(Self::err(
                section,
                key,
                line,
                format!("must be >= 0, got {v}"),
            )),
        }
    }

    pub(crate) fn integer(&mut self, section: &str, key: &str) -> Result<(usize, usize)> {
        let (line, raw) = self.string(section, key)?;
        raw.parse::<usize>().map(|v| (line, v)).map_err(|_| {
            Self::err(
                section,
                key,
                line,
                format!("`{raw}` is not a non-negative integer"),
            )
        })
    }

    pub(crate) fn list(&mut self, section: &str, key: &str) -> Result<(usize, Vec<f64>)> {
        let (line, raw) = self.string(section, key)?;
        let vals = raw
            .split(',')
            .map(|p| Self::number(section, key, line, p.trim()))
            .collect::<Result<Vec<_>>>()?;
        Ok((line, vals))
    }

    /// Fails on the first key nobody asked for.
    pub(crate) fn finish(self) -> Result<()> {
        if let Some((name, (line, _))) = self.entries.into_iter().min_by_key(|e| e.1 .0) {
            return Err(Error::Config {
                line,
                field: name,
                msg: "unknown key".into(),
            });
        }
        Ok(())
    }
}

fn check_positive(section: &str, key: &str, line: usize, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(RawConfig::err(
            section,
            key,
            line,
            format!("must be > 0, got {v}"),
        ))
    }
}
