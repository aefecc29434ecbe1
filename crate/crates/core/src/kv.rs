//! Minimal sectioned `key = value` text format shared by the road registry
//! and synthetic road spec files.
//!
//! ```text
//! # comment
//! [Section Name]
//! key = value
//! ```
//!
//! Values are raw trimmed strings; typing happens in the consumer.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct KvError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Fetches a required key, reporting the section header line when absent.
    pub fn require(&self, key: &str) -> Result<&Entry, KvError> {
        self.get(key).ok_or_else(|| KvError {
            line: self.line,
            message: format!("[{}] is missing `{key}`", self.name),
        })
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, KvError> {
        let entry = self.require(key)?;
        entry.value.parse().map_err(|_| KvError {
            line: entry.line,
            message: format!("`{key}` has invalid value `{}`", entry.value),
        })
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, KvError> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.parse(key),
        }
    }

    /// Rejects keys outside `known`, so typos do not silently fall back to defaults.
    pub fn check_keys(&self, known: &[&str]) -> Result<(), KvError> {
        match self.entries.iter().find(|e| !known.contains(&e.key.as_str())) {
            Some(e) => Err(KvError {
                line: e.line,
                message: format!("unknown key `{}` in [{}]", e.key, self.name),
            }),
            None => Ok(()),
        }
    }
}

pub fn parse_document(text: &str) -> Result<Vec<Section>, KvError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| KvError {
                line,
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(KvError {
                    line,
                    message: "empty section name".into(),
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| KvError {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(KvError {
                line,
                message: "empty key".into(),
            });
        }
        let section = sections.last_mut().ok_or_else(|| KvError {
            line,
            message: "entry before any [section] header".into(),
        })?;
        if section.get(key).is_some() {
            return Err(KvError {
                line,
                message: format!("duplicate key `{key}` in [{}]", section.name),
            });
        }
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(sections)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let doc = "# header\n[a]\nx = 1 # trailing\n\n[b c]\ny=two\n";
        let s = parse_document(doc).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "a");
        assert_eq!(s[0].get("x").unwrap().value, "1");
        assert_eq!(s[1].name, "b c");
        assert_eq!(s[1].get("y").unwrap().line, 6);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(parse_document("x = 1").unwrap_err().line, 1);
        assert_eq!(parse_document("[a]\nnope").unwrap_err().line, 2);
        assert_eq!(parse_document("[a]\nx=1\nx=2").unwrap_err().line, 3);
        assert_eq!(parse_document("[a").unwrap_err().line, 1);
    }
}
