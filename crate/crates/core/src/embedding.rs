//! Final word vectors and their plain-text export format.
//!
//! The text format is a `count dim` header line followed by one
//! `word v1 ... vd` line per word, values at 6 significant digits.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util;

const WHAT: &str = "embedding file";

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    /// `data` is row-major, one row of length `dim` per word.
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("embedding dimension must be > 0".into()));
        }
        if data.len() != words.len() * dim {
            return Err(Error::DimensionMismatch(data.len(), words.len() * dim));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "non-finite value in vector for {:?}",
                words[k / dim]
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (id, w) in words.iter().enumerate() {
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::InvalidParam(format!("invalid word {w:?}")));
            }
            if index.insert(w.clone(), id as u32).is_some() {
                return Err(Error::InvalidParam(format!("duplicate word {w:?}")));
            }
        }
        Ok(EmbeddingTable {
            words,
            index,
            dim,
            data,
        })
    }

    pub fn from_rows<S: Into<String>>(rows: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.1.len());
        let mut words = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (w, v) in rows {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(v.len(), dim));
            }
            words.push(w.into());
            data.extend(v);
        }
        Self::new(words, dim, data)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let start = id as usize * self.dim;
        &self.data[start..start + self.dim]
    }

    pub fn vector(&self, word: &str) -> Option<&[f64]> {
        self.id(word).map(|id| self.row(id))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Multiplies every vector by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.words.clone(),
            self.dim,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{} {}", self.words.len(), self.dim)?;
        let mut line = String::new();
        for (id, word) in self.words.iter().enumerate() {
            line.clear();
            line.push_str(word);
            for v in self.row(id as u32) {
                line.push(' ');
                line.push_str(&format_sig6(*v));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R, source: &Path) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(line) => line?,
            None => return Err(Error::format(WHAT, "empty file")),
        };
        let (count, dim) = parse_header(&header)
            .ok_or_else(|| Error::format(WHAT, format!("missing `count dim` header, found {header:?}")))?;
        let mut words = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let parse_err = |msg: String| Error::Parse {
                path: source.to_path_buf(),
                line: n + 2,
                msg,
            };
            let mut fields = line.split(' ');
            let word = fields.next().filter(|w| !w.is_empty());
            let Some(word) = word else {
                return Err(parse_err("empty line".into()));
            };
            let start = data.len();
            for f in fields {
                let v: f64 = f.parse().map_err(|_| parse_err(format!("bad value {f:?}")))?;
                data.push(v);
            }
            if data.len() - start != dim {
                return Err(parse_err(format!(
                    "expected {dim} values, found {}",
                    data.len() - start
                )));
            }
            words.push(word.to_string());
        }
        if words.len() != count {
            return Err(Error::format(
                WHAT,
                format!("header declares {count} words, found {}", words.len()),
            ));
        }
        Self::new(words, dim, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io_util::write_atomic(path, |w| self.write_text(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_text(io_util::open_buffered(path)?, path)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split(' ');
    let count = it.next()?.parse().ok()?;
    let dim: usize = it.next()?.parse().ok()?;
    if it.next().is_some() || dim == 0 {
        return None;
    }
    Some((count, dim))
}

/// Shortest `%g`-style rendering with 6 significant digits.
pub fn format_sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    } else {
        let fixed = format!("{:.*}", (5 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
