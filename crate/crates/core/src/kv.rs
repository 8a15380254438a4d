//! Line-oriented `key = value` files.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `text` into entries. `#` starts a comment; blank lines are skipped.
pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        out.push(Entry {
            line: i + 1,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| Error::Parse {
        line,
        message: format!("{key}: cannot parse {value:?}: {e}"),
    })
}

/// Comma- or whitespace-separated list.
pub(crate) fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(line, key, t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_entries_and_comments() {
        let text = "# header\nfamily = reset_cliff\n\n S=20 # trailing\nrho = 0.5, 0.5\n";
        let entries = parse(text).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[0].key, "family");
        assert_eq!(entries[1].value, "20");
        assert_eq!(entries[1].line, 4);
        let rho: Vec<f64> = parse_list(5, "rho", &entries[2].value).unwrap();
        assert_eq!(rho, vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_missing_equals() {
        let err = parse("family reset_cliff").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
