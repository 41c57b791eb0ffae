//! Line-oriented numeric tables with `#` comments.
//!
//! Comment lines may carry `key=value` tokens (whitespace separated); other
//! comment text is ignored. Data fields are separated by commas, or by
//! whitespace when a line has no comma. A single column-name row is allowed
//! before the first data row.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    /// Header key → (line number, value).
    pub header: BTreeMap<String, (usize, String)>,
    /// (line number, fields) per data row; line numbers start at 1.
    pub rows: Vec<(usize, Vec<f64>)>,
}

impl Table {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.get(key).map(|(_, v)| v.as_str())
    }

    /// Header value parsed as a number.
    pub fn number(&self, path: &Path, key: &str) -> Result<Option<f64>> {
        match self.header.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| CliError::parse(path, Some(*line), format!("{key}={v} is not a finite number"))),
        }
    }

    /// Every row must have exactly one of `allowed` field counts, and all
    /// rows the same count.
    pub fn uniform_width(&self, path: &Path, allowed: &[usize]) -> Result<usize> {
        let Some((first_line, first)) = self.rows.first() else {
            return Ok(allowed[0]);
        };
        let width = first.len();
        if !allowed.contains(&width) {
            return Err(CliError::parse(
                path,
                Some(*first_line),
                format!("expected {} columns, found {width}", join_counts(allowed)),
            ));
        }
        for (line, row) in &self.rows {
            if row.len() != width {
                return Err(CliError::parse(
                    path,
                    Some(*line),
                    format!("ragged row: {} columns, expected {width}", row.len()),
                ));
            }
        }
        Ok(width)
    }
}

fn join_counts(allowed: &[usize]) -> String {
    let v: Vec<String> = allowed.iter().map(|n| n.to_string()).collect();
    v.join(" or ")
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

pub fn parse_table(path: &Path, text: &str) -> Result<Table> {
    let mut table = Table::default();
    let mut names_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some((k, v)) = token.split_once('=') {
                    if k.is_empty() {
                        continue;
                    }
                    if table.header.insert(k.to_string(), (line_no, v.to_string())).is_some() {
                        return Err(CliError::parse(
                            path,
                            Some(line_no),
                            format!("duplicate header key {k}"),
                        ));
                    }
                }
            }
            continue;
        }
        let fields = split_fields(line);
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(CliError::parse(
                        path,
                        Some(line_no),
                        format!("column {} is not finite", bad + 1),
                    ));
                }
                table.rows.push((line_no, values));
            }
            Err(_) if !names_seen && table.rows.is_empty() && fields.iter().all(|f| f.parse::<f64>().is_err()) => {
                names_seen = true;
            }
            Err(_) => {
                let bad = fields.iter().find(|f| f.parse::<f64>().is_err()).copied().unwrap_or("");
                return Err(CliError::parse(path, Some(line_no), format!("'{bad}' is not a number")));
            }
        }
    }
    Ok(table)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let t = parse_table(Path::new("t"), "# a=1 b=x free text\nenergy,counts\n1.0, 5\n\n2 7\n").unwrap();
        assert_eq!(t.get("a"), Some("1"));
        assert_eq!(t.get("b"), Some("x"));
        assert_eq!(t.rows, vec![(3, vec![1.0, 5.0]), (5, vec![2.0, 7.0])]);
    }

    #[test]
    fn bad_field_reports_line() {
        let e = parse_table(Path::new("t"), "1,2\n3,abc\n").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: Some(2), .. }), "{e}");
    }

    #[test]
    fn ragged_rows() {
        let t = parse_table(Path::new("t"), "1,2\n3,4,5\n").unwrap();
        let e = t.uniform_width(Path::new("t"), &[2, 3]).unwrap_err();
        assert!(matches!(e, CliError::Parse { line: Some(2), .. }));
    }

    #[test]
    fn duplicate_header_key() {
        assert!(parse_table(Path::new("t"), "# a=1\n# a=2\n").is_err());
    }
}
