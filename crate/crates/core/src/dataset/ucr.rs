//! UCR-archive style text files: one series per line, class label first,
//! fields separated by tabs or commas. Empty and `NaN` fields are missing
//! values and are dropped.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct UcrRecord {
    pub line: usize,
    pub class_label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UcrFile {
    pub records: Vec<UcrRecord>,
    /// 1-based line numbers of series with fewer than two valid values.
    pub rejected_lines: Vec<usize>,
}

pub fn parse_ucr_file(path: &Path) -> Result<UcrFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ucr_str(&text, path)
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("nan") || field == "?"
}

/// Parses file contents; `path` only labels errors.
pub fn parse_ucr_str(text: &str, path: &Path) -> Result<UcrFile> {
    let mut out = UcrFile::default();
    let mut field_count: Option<(usize, usize)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
        match field_count {
            None => field_count = Some((fields.len(), line_no)),
            Some((n, first)) if n != fields.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("{} fields, but line {first} has {n}", fields.len()),
                })
            }
            Some(_) => {}
        }
        let label = fields[0];
        if is_missing(label) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "missing class label".into(),
            });
        }
        let mut values = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            if is_missing(f) {
                continue;
            }
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("not a number: {f:?}"),
            })?;
            if v.is_finite() {
                values.push(v);
            }
        }
        if values.len() < 2 {
            out.rejected_lines.push(line_no);
            continue;
        }
        out.records.push(UcrRecord {
            line: line_no,
            class_label: normalize_label(label),
            values,
        });
    }
    Ok(out)
}

/// Numeric labels such as `1.0000000e+00` and `1` name the same class.
fn normalize_label(label: &str) -> String {
    match label.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => label.to_string(),
    }
}

/// Tab-separated text readable by [`parse_ucr_str`].
pub fn serialize_ucr(records: &[UcrRecord]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&r.class_label);
        for v in &r.values {
            s.push('\t');
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    s
}
