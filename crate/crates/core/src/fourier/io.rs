//! Plain-text tabular dumps of Fourier series.
//!
//! A document looks like
//!
//! ```text
//! # kamlind <kind>
//! # <key>: <value>
//! ## series <label> dim=<d> kmax=<K> rows=<r> cols=<c>
//! <k_1> ... <k_d> <re_00> <im_00> <re_01> <im_01> ...
//! ```
//!
//! with one data line per mode (flat-index order, every `|k_i| <= K`) and one
//! `re im` pair per matrix entry in row-major order. Numbers use `.`
//! as decimal separator and 17 significant digits, so dumps are
//! byte-reproducible and round-trip exactly.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::FourierSeries;
use crate::error::{KamError, Result};

/// Format a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_c64(z: Complex64) -> String {
    format!("{} {}", fmt_f64(z.re), fmt_f64(z.im))
}

/// A header plus labelled series blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TabularDoc {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub blocks: Vec<(String, FourierSeries)>,
}

impl TabularDoc {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn with_block(mut self, label: &str, series: FourierSeries) -> Self {
        self.blocks.push((label.to_string(), series));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn block(&self, label: &str) -> Option<&FourierSeries> {
        self.blocks.iter().find(|(l, _)| l == label).map(|(_, s)| s)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# kamlind {}", self.kind);
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        for (label, s) in &self.blocks {
            write_block(&mut out, label, s);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let (_, first) = lines.next().ok_or(KamError::Parse {
            line: 1,
            message: "empty document".into(),
        })?;
        let kind = first
            .strip_prefix("# kamlind ")
            .ok_or(KamError::Parse {
                line: 1,
                message: "missing '# kamlind <kind>' header".into(),
            })?
            .trim()
            .to_string();
        let mut doc = TabularDoc::new(&kind);
        while let Some((no, line)) = lines.next() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("## series ") {
                let (label, series) = parse_block(no + 1, rest, &mut lines)?;
                doc.blocks.push((label, series));
            } else if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once(':').ok_or(KamError::Parse {
                    line: no + 1,
                    message: "metadata line must read '# key: value'".into(),
                })?;
                doc.meta.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(KamError::Parse {
                    line: no + 1,
                    message: format!("unexpected line '{line}'"),
                });
            }
        }
        Ok(doc)
    }
}

fn write_block(out: &mut String, label: &str, s: &FourierSeries) {
    let _ = writeln!(
        out,
        "## series {label} dim={} kmax={} rows={} cols={}",
        s.dim(),
        s.kmax(),
        s.rows(),
        s.cols()
    );
    let nm = s.n_modes();
    let entries = s.rows() * s.cols();
    for i in 0..nm {
        let k = s.mode(i);
        let mut line = k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        for e in 0..entries {
            line.push(' ');
            line.push_str(&fmt_c64(s.coeffs()[e * nm + i]));
        }
        let _ = writeln!(out, "{line}");
    }
}

fn parse_block<'a>(
    line_no: usize,
    header: &str,
    lines: &mut std::iter::Peekable<impl Iterator<Item = (usize, &'a str)>>,
) -> Result<(String, FourierSeries)> {
    let err = |line: usize, message: String| KamError::Parse { line, message };
    let mut parts = header.split_whitespace();
    let label = parts
        .next()
        .ok_or_else(|| err(line_no, "series block without label".into()))?
        .to_string();
    let (mut dim, mut kmax, mut rows, mut cols) = (None, None, None, None);
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| err(line_no, format!("bad field '{p}'")))?;
        let v: usize = v.parse().map_err(|_| err(line_no, format!("bad integer in '{p}'")))?;
        match k {
            "dim" => dim = Some(v),
            "kmax" => kmax = Some(v),
            "rows" => rows = Some(v),
            "cols" => cols = Some(v),
            other => return Err(err(line_no, format!("unknown field '{other}'"))),
        }
    }
    let missing = |n: &str| err(line_no, format!("missing field '{n}'"));
    let (dim, kmax, rows, cols) = (
        dim.ok_or_else(|| missing("dim"))?,
        kmax.ok_or_else(|| missing("kmax"))?,
        rows.ok_or_else(|| missing("rows"))?,
        cols.ok_or_else(|| missing("cols"))?,
    );
    if dim == 0 || rows == 0 || cols == 0 {
        return Err(err(line_no, "dim, rows and cols must be positive".into()));
    }
    let mut s = FourierSeries::zeros(dim, kmax, rows, cols);
    let nm = s.n_modes();
    let entries = rows * cols;
    for _ in 0..nm {
        let (no, line) = lines
            .next()
            .ok_or_else(|| err(line_no, format!("block '{label}' truncated")))?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != dim + 2 * entries {
            return Err(err(
                no + 1,
                format!("expected {} columns, found {}", dim + 2 * entries, fields.len()),
            ));
        }
        let k: Vec<i64> = fields[..dim]
            .iter()
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(no + 1, "bad mode index".into()))?;
        let idx = s
            .mode_index(&k)
            .ok_or_else(|| err(no + 1, format!("mode {k:?} outside cutoff")))?;
        for e in 0..entries {
            let re: f64 = fields[dim + 2 * e]
                .parse()
                .map_err(|_| err(no + 1, "bad real part".into()))?;
            let im: f64 = fields[dim + 2 * e + 1]
                .parse()
                .map_err(|_| err(no + 1, "bad imaginary part".into()))?;
            s.coeffs_mut()[e * nm + idx] = Complex64::new(re, im);
        }
    }
    Ok((label, s))
}

/// Parse a `re im` pair written by [`fmt_c64`].
pub fn parse_c64(text: &str) -> Option<Complex64> {
    let mut it = text.split_whitespace();
    let re = it.next()?.parse().ok()?;
    let im = it.next()?.parse().ok()?;
    Some(Complex64::new(re, im))
}
