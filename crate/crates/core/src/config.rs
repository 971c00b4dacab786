//! Line-based `key = value` text format shared by configs and ensemble blocks.
//!
//! ```text
//! # comment
//! [ensemble]
//! distribution = complex-gaussian(0, 0, 1)
//! [run]
//! degrees = 64, 128
//! ```
//!
//! Keys are scoped by the most recent `[section]` header. Repeated keys are
//! kept in order (sector lists use this).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{section}.{key}`")]
    Missing { section: String, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parsed key–value document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDocument {
    pub entries: Vec<Entry>,
}

impl KvDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut section = String::new();
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("unterminated section header `{body}`"),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, found `{body}`"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            entries.push(Entry {
                section: section.clone(),
                key: key.to_string(),
                value: v.trim().to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries
            .iter()
            .rev()
            .find(|e| e.section == section && e.key == key)
    }

    pub fn get_all<'a>(&'a self, section: &'a str, key: &'a str) -> impl Iterator<Item = &'a Entry> {
        self.entries
            .iter()
            .filter(move |e| e.section == section && e.key == key)
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(section, key).ok_or_else(|| ConfigError::Missing {
            section: section.into(),
            key: key.into(),
        })
    }

    /// Parses an optional value with `FromStr`, attributing failures to the line.
    pub fn parse_opt<T>(&self, section: &str, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| ConfigError::Value {
                line: e.line,
                key: e.key.clone(),
                message: err.to_string(),
            }),
        }
    }

    pub fn parse_req<T>(&self, section: &str, key: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.require(section, key)?;
        Ok(self.parse_opt(section, key)?.expect("checked"))
    }
}

/// Splits `name(a, b, c)` into its name and trimmed arguments. A bare `name`
/// yields no arguments. Nested parentheses are kept intact inside an argument.
pub fn parse_call(text: &str) -> Result<(String, Vec<String>), String> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        if text.is_empty() {
            return Err("empty expression".into());
        }
        return Ok((text.to_string(), Vec::new()));
    };
    if !text.ends_with(')') {
        return Err(format!("unbalanced parentheses in `{text}`"));
    }
    let name = text[..open].trim().to_string();
    let inner = &text[open + 1..text.len() - 1];
    let mut args = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in inner.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(format!("unbalanced parentheses in `{text}`"));
                }
                cur.push(ch);
            }
            ',' if depth == 0 => {
                args.push(cur.trim().to_string());
                cur.clear();
            }
            _ => cur.push(ch),
        }
    }
    if depth != 0 {
        return Err(format!("unbalanced parentheses in `{text}`"));
    }
    if !cur.trim().is_empty() || !args.is_empty() {
        args.push(cur.trim().to_string());
    }
    Ok((name, args))
}

/// Parses a real number, accepting `pi`, `-pi`, `pi/2`, `2pi`-style shorthands.
pub fn parse_real(text: &str) -> Result<f64, String> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b.trim()),
        None => (false, t),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        parse_real(num)? / parse_real(den)?
    } else if let Some(mult) = body.strip_suffix("pi") {
        let m = mult.trim().trim_end_matches('*');
        if m.is_empty() {
            std::f64::consts::PI
        } else {
            parse_real(m)? * std::f64::consts::PI
        }
    } else {
        return Err(format!("not a number: `{text}`"));
    };
    Ok(if neg { -value } else { value })
}

/// Expects exactly `n` numeric arguments.
pub fn real_args(name: &str, args: &[String], n: usize) -> Result<Vec<f64>, String> {
    if args.len() != n {
        return Err(format!("`{name}` takes {n} argument(s), got {}", args.len()));
    }
    args.iter().map(|a| parse_real(a)).collect()
}

/// Comma separated list of values.
pub fn parse_list<T>(text: &str) -> Result<Vec<T>, String>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_line_numbers() {
        let doc = KvDocument::parse("# c\n[run]\ntrials = 3\n\n[domain]\nsector = strip(-1, 0)\nsector = strip(0,1)\n").unwrap();
        assert_eq!(doc.require("run", "trials").unwrap().line, 3);
        assert_eq!(doc.get_all("domain", "sector").count(), 2);
        let err = KvDocument::parse("[run]\ntrials 3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 2,
                message: "expected `key = value`, found `trials 3`".into()
            }
        );
    }

    #[test]
    fn call_syntax() {
        assert_eq!(parse_call("rademacher").unwrap(), ("rademacher".into(), vec![]));
        let (n, a) = parse_call("shared(complex-gaussian(0, 0, 1))").unwrap();
        assert_eq!(n, "shared");
        assert_eq!(a, vec!["complex-gaussian(0, 0, 1)".to_string()]);
        assert!(parse_call("strip(1,2").is_err());
    }

    #[test]
    fn reals_with_pi() {
        assert_eq!(parse_real("pi/2").unwrap(), std::f64::consts::FRAC_PI_2);
        assert_eq!(parse_real("-pi").unwrap(), -std::f64::consts::PI);
        assert_eq!(parse_real("2pi").unwrap(), 2.0 * std::f64::consts::PI);
        assert_eq!(parse_real("0.25").unwrap(), 0.25);
        assert!(parse_real("abc").is_err());
    }
}
