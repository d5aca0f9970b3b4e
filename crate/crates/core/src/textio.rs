//! Shared helpers for the line-oriented plain-text dump formats.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Iterates over non-empty, non-comment lines as `(line_number, tokens)`.
pub(crate) fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

pub(crate) fn expect_header<'a>(
    recs: &mut impl Iterator<Item = (usize, Vec<&'a str>)>,
    magic: &str,
    version: &str,
) -> Result<()> {
    match recs.next() {
        Some((_, toks)) if toks == [magic, version] => Ok(()),
        Some((line, toks)) => Err(Error::parse(line, format!("expected header `{magic} {version}`, found `{}`", toks.join(" ")))),
        None => Err(Error::parse(0, "empty input")),
    }
}

pub(crate) fn f64_at(toks: &[&str], i: usize, line: usize) -> Result<f64> {
    let tok = toks.get(i).ok_or_else(|| Error::parse(line, format!("missing field {i}")))?;
    let v: f64 = tok.parse().map_err(|_| Error::parse(line, format!("bad number `{tok}`")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::parse(line, format!("non-finite number `{tok}`")))
    }
}

pub(crate) fn usize_at(toks: &[&str], i: usize, line: usize) -> Result<usize> {
    let tok = toks.get(i).ok_or_else(|| Error::parse(line, format!("missing field {i}")))?;
    tok.parse().map_err(|_| Error::parse(line, format!("bad index `{tok}`")))
}

pub(crate) fn arity(toks: &[&str], n: usize, line: usize) -> Result<()> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(Error::parse(line, format!("`{}` record needs {} fields, found {}", toks[0], n - 1, toks.len() - 1)))
    }
}

/// Appends a record of space-separated values. `f64` values use the
/// shortest representation that round-trips exactly.
pub(crate) fn push_record(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(key);
    for v in values {
        let _ = write!(out, " {v:?}");
    }
    out.push('\n');
}
