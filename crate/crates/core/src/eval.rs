//! Intrinsic evaluation: word similarity (Spearman ρ with a Fisher z test)
//! and proportional analogies solved by vector offset (3CosAdd).

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;

use statrs::function::erf::erfc;

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::io_util;

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((uv / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(gold: &[f64], pred: &[f64]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(Error::DimensionMismatch(gold.len(), pred.len()));
    }
    if gold.len() < 2 {
        return Err(Error::Degenerate("spearman needs at least 2 pairs".into()));
    }
    if gold.iter().chain(pred).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite score".into()));
    }
    pearson(&average_ranks(gold), &average_ranks(pred))
        .ok_or_else(|| Error::Degenerate("a ranking has zero variance".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Significance {
    pub z: f64,
    /// Two-sided normal tail probability.
    pub p: f64,
}

/// `z = atanh(ρ)·√(n−3)` and its two-sided p-value.
pub fn fisher_significance(rho: f64, n: usize) -> Result<Significance> {
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::Domain(format!("|rho| must be < 1, got {rho}")));
    }
    if n < 4 {
        return Err(Error::Domain(format!("need n >= 4, got {n}")));
    }
    // atanh is odd, but the libm version is not exactly so in floating point.
    let z = rho.signum() * rho.abs().atanh() * ((n - 3) as f64).sqrt();
    let p = erfc(z.abs() / std::f64::consts::SQRT_2);
    Ok(Significance { z, p })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub gold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityDataset {
    pub name: String,
    pub pairs: Vec<SimilarityPair>,
}

impl SimilarityDataset {
    pub fn new(name: impl Into<String>, pairs: Vec<SimilarityPair>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &pairs {
            if !p.gold.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "non-finite rating for ({}, {})",
                    p.word1, p.word2
                )));
            }
            if !seen.insert((p.word1.as_str(), p.word2.as_str())) {
                return Err(Error::InvalidParam(format!(
                    "duplicate pair ({}, {})",
                    p.word1, p.word2
                )));
            }
        }
        Ok(SimilarityDataset {
            name: name.into(),
            pairs,
        })
    }

    /// `word1<TAB>word2<TAB>score` lines; `#` comments and blank lines ignored.
    pub fn read_from<R: BufRead>(reader: R, name: &str, source: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| Error::Parse {
                path: source.to_path_buf(),
                line: n + 1,
                msg,
            };
            let fields: Vec<&str> = trimmed.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let gold: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad score {:?}", fields[2])))?;
            pairs.push(SimilarityPair {
                word1: fields[0].trim().to_lowercase(),
                word2: fields[1].trim().to_lowercase(),
                gold,
            });
        }
        Self::new(name, pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(io_util::open_buffered(path)?, &dataset_name(path), path)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogySection {
    pub label: String,
    pub questions: Vec<[String; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyDataset {
    pub name: String,
    pub sections: Vec<AnalogySection>,
}

impl AnalogyDataset {
    pub fn new(name: impl Into<String>, sections: Vec<AnalogySection>) -> Result<Self> {
        let mut labels = HashSet::new();
        for s in &sections {
            if !labels.insert(s.label.as_str()) {
                return Err(Error::InvalidParam(format!("duplicate section {:?}", s.label)));
            }
            if s.questions.iter().flatten().any(|w| w.is_empty()) {
                return Err(Error::InvalidParam(format!("empty word in section {:?}", s.label)));
            }
        }
        Ok(AnalogyDataset {
            name: name.into(),
            sections,
        })
    }

    /// Google format: `: section` headers followed by `a b c d` lines.
    /// Questions before the first header go to a section named `default`.
    pub fn read_from<R: BufRead>(reader: R, name: &str, source: &Path) -> Result<Self> {
        let mut sections: Vec<AnalogySection> = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(label) = trimmed.strip_prefix(':') {
                sections.push(AnalogySection {
                    label: label.trim().to_string(),
                    questions: Vec::new(),
                });
                continue;
            }
            let words: Vec<String> = trimmed.split_whitespace().map(str::to_lowercase).collect();
            let question: [String; 4] = words.try_into().map_err(|w: Vec<String>| Error::Parse {
                path: source.to_path_buf(),
                line: n + 1,
                msg: format!("expected 4 words, found {}", w.len()),
            })?;
            if sections.is_empty() {
                sections.push(AnalogySection {
                    label: "default".into(),
                    questions: Vec::new(),
                });
            }
            sections.last_mut().expect("section exists").questions.push(question);
        }
        Self::new(name, sections)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(io_util::open_buffered(path)?, &dataset_name(path), path)
    }

    pub fn len(&self) -> usize {
        self.sections.iter().map(|s| s.questions.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Spearman,
    Accuracy,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Spearman => "spearman",
            Metric::Accuracy => "accuracy",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub metric: Metric,
    pub value: f64,
    pub n_scored: usize,
    pub n_total: usize,
    pub significance: Option<Significance>,
}

pub const REPORT_HEADER: &str = "dataset\tmetric\tvalue\tn_scored\tn_total\tz\tp";

impl EvalReport {
    pub fn coverage(&self) -> f64 {
        if self.n_total == 0 {
            0.0
        } else {
            self.n_scored as f64 / self.n_total as f64
        }
    }

    pub fn tsv_line(&self) -> String {
        let (z, p) = match self.significance {
            Some(s) => (s.z.to_string(), s.p.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.dataset, self.metric, self.value, self.n_scored, self.n_total, z, p
        )
    }
}

/// Cosine similarity vs. gold ratings; pairs with an unknown word are skipped.
pub fn eval_similarity(emb: &EmbeddingTable, ds: &SimilarityDataset) -> Result<EvalReport> {
    if ds.pairs.is_empty() {
        return Err(Error::InvalidParam(format!("dataset {} is empty", ds.name)));
    }
    let mut gold = Vec::with_capacity(ds.pairs.len());
    let mut pred = Vec::with_capacity(ds.pairs.len());
    for p in &ds.pairs {
        let (Some(u), Some(v)) = (emb.vector(&p.word1.to_lowercase()), emb.vector(&p.word2.to_lowercase())) else {
            continue;
        };
        gold.push(p.gold);
        pred.push(cosine(u, v)?);
    }
    if gold.len() < 2 {
        return Err(Error::InsufficientCoverage {
            dataset: ds.name.clone(),
            scored: gold.len(),
            total: ds.pairs.len(),
        });
    }
    let rho = spearman(&gold, &pred)?;
    Ok(EvalReport {
        dataset: ds.name.clone(),
        metric: Metric::Spearman,
        value: rho,
        n_scored: gold.len(),
        n_total: ds.pairs.len(),
        significance: fisher_significance(rho, gold.len()).ok(),
    })
}

/// 3CosAdd over unit-normalized rows, computed once per table.
pub struct AnalogySolver<'a> {
    emb: &'a EmbeddingTable,
    unit: Vec<f64>,
    usable: Vec<bool>,
}

impl<'a> AnalogySolver<'a> {
    pub fn new(emb: &'a EmbeddingTable) -> Self {
        let d = emb.dim();
        let mut unit = Vec::with_capacity(emb.data().len());
        let mut usable = Vec::with_capacity(emb.len());
        for id in 0..emb.len() as u32 {
            let row = emb.row(id);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            usable.push(norm > 0.0);
            if norm > 0.0 {
                unit.extend(row.iter().map(|v| v / norm));
            } else {
                unit.extend(std::iter::repeat_n(0.0, d));
            }
        }
        AnalogySolver { emb, unit, usable }
    }

    /// Id of the word maximizing `cos(v_w, v_b − v_a + v_c)`, excluding the
    /// query words; ties go to the lowest id. `None` if a query word is unknown.
    pub fn solve_id(&self, a: &str, b: &str, c: &str) -> Option<u32> {
        let (ia, ib, ic) = (self.emb.id(a)?, self.emb.id(b)?, self.emb.id(c)?);
        let (va, vb, vc) = (self.emb.row(ia), self.emb.row(ib), self.emb.row(ic));
        let target: Vec<f64> = (0..self.emb.dim()).map(|k| vb[k] - va[k] + vc[k]).collect();
        let tnorm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = self.emb.dim();
        let mut best: Option<(u32, f64)> = None;
        for id in 0..self.emb.len() as u32 {
            if id == ia || id == ib || id == ic || !self.usable[id as usize] {
                continue;
            }
            let row = &self.unit[id as usize * d..(id as usize + 1) * d];
            let dot: f64 = row.iter().zip(&target).map(|(x, y)| x * y).sum();
            let score = if tnorm > 0.0 { dot / tnorm } else { 0.0 };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((id, score));
            }
        }
        best.map(|(id, _)| id)
    }

    pub fn solve(&self, a: &str, b: &str, c: &str) -> Option<&'a str> {
        self.solve_id(a, b, c).map(|id| self.emb.words()[id as usize].as_str())
    }
}

pub fn solve_analogy(emb: &EmbeddingTable, a: &str, b: &str, c: &str) -> Option<String> {
    AnalogySolver::new(emb).solve(a, b, c).map(str::to_string)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalogyReport {
    /// Sections with at least one scored question.
    pub sections: Vec<EvalReport>,
    /// Sections where every question had an unknown word.
    pub unscored_sections: Vec<String>,
    pub total: EvalReport,
}

impl AnalogyReport {
    pub fn reports(&self) -> impl Iterator<Item = &EvalReport> {
        self.sections.iter().chain(std::iter::once(&self.total))
    }
}

pub fn eval_analogy(emb: &EmbeddingTable, ds: &AnalogyDataset) -> Result<AnalogyReport> {
    if ds.is_empty() {
        return Err(Error::InvalidParam(format!("dataset {} is empty", ds.name)));
    }
    let solver = AnalogySolver::new(emb);
    let mut sections = Vec::new();
    let mut unscored_sections = Vec::new();
    let (mut correct_all, mut scored_all) = (0usize, 0usize);
    for section in &ds.sections {
        let (mut correct, mut scored) = (0usize, 0usize);
        for [a, b, c, d] in &section.questions {
            if emb.id(d).is_none() {
                continue;
            }
            let Some(pred) = solver.solve(a, b, c) else {
                continue;
            };
            scored += 1;
            if pred == d {
                correct += 1;
            }
        }
        correct_all += correct;
        scored_all += scored;
        if scored == 0 {
            unscored_sections.push(section.label.clone());
            continue;
        }
        sections.push(EvalReport {
            dataset: format!("{}/{}", ds.name, section.label),
            metric: Metric::Accuracy,
            value: correct as f64 / scored as f64,
            n_scored: scored,
            n_total: section.questions.len(),
            significance: None,
        });
    }
    if scored_all == 0 {
        return Err(Error::InsufficientCoverage {
            dataset: ds.name.clone(),
            scored: 0,
            total: ds.len(),
        });
    }
    Ok(AnalogyReport {
        sections,
        unscored_sections,
        total: EvalReport {
            dataset: ds.name.clone(),
            metric: Metric::Accuracy,
            value: correct_all as f64 / scored_all as f64,
            n_scored: scored_all,
            n_total: ds.len(),
            significance: None,
        },
    })
}
