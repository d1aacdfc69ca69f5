//! Semantic relations as directed pairs over vocabulary ids.
//!
//! Relation files are UTF-8 TSV, one `relation<TAB>head<TAB>tail` per line.

use std::collections::HashSet;
use std::io::BufRead;
use std::path::Path;

use log::warn;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::io_util;

/// Directed relation `R(i, j)` restricted to a vocabulary.
#[derive(Clone, Debug)]
pub struct RelationSet {
    name: String,
    vocab_size: usize,
    pairs: Vec<(u32, u32)>,
    lookup: HashSet<(u32, u32)>,
    out_edges: Vec<Vec<u32>>,
    in_edges: Vec<Vec<u32>>,
}

impl PartialEq for RelationSet {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.vocab_size == other.vocab_size && self.pairs == other.pairs
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadStats {
    /// Lines whose label matched the filter.
    pub matched: usize,
    /// Matching lines dropped because a word is out of vocabulary.
    pub skipped: usize,
    /// Matching lines that repeated an already loaded pair.
    pub duplicates: usize,
}

impl RelationSet {
    pub fn empty(name: impl Into<String>, vocab_size: usize) -> Self {
        Self::from_pairs(name, vocab_size, Vec::new()).expect("empty relation set is valid")
    }

    /// Deduplicates `pairs` and builds the adjacency views.
    pub fn from_pairs(name: impl Into<String>, vocab_size: usize, mut pairs: Vec<(u32, u32)>) -> Result<Self> {
        if let Some(&(i, j)) = pairs
            .iter()
            .find(|&&(i, j)| i as usize >= vocab_size || j as usize >= vocab_size)
        {
            return Err(Error::InvalidParam(format!(
                "relation pair ({i}, {j}) outside vocabulary of size {vocab_size}"
            )));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut out_edges = vec![Vec::new(); vocab_size];
        let mut in_edges = vec![Vec::new(); vocab_size];
        for &(i, j) in &pairs {
            out_edges[i as usize].push(j);
            in_edges[j as usize].push(i);
        }
        for row in &mut in_edges {
            row.sort_unstable();
        }
        Ok(RelationSet {
            name: name.into(),
            vocab_size,
            lookup: pairs.iter().copied().collect(),
            pairs,
            out_edges,
            in_edges,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Pairs sorted by `(i, j)`.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, i: u32, j: u32) -> bool {
        self.lookup.contains(&(i, j))
    }

    /// `R(i, j)` as 0 or 1.
    pub fn indicator(&self, i: u32, j: u32) -> u8 {
        u8::from(self.contains(i, j))
    }

    pub fn out_edges(&self, i: u32) -> &[u32] {
        &self.out_edges[i as usize]
    }

    pub fn in_edges(&self, j: u32) -> &[u32] {
        &self.in_edges[j as usize]
    }

    /// Closure under pair reversal.
    pub fn symmetrize(&self) -> RelationSet {
        let pairs = self.pairs.iter().flat_map(|&(i, j)| [(i, j), (j, i)]).collect();
        Self::from_pairs(self.name.clone(), self.vocab_size, pairs).expect("reversed pairs stay in range")
    }

    pub fn is_symmetric(&self) -> bool {
        self.pairs.iter().all(|&(i, j)| self.contains(j, i))
    }

    /// Parses relation TSV, keeping lines labelled `relation` whose words
    /// are both in `vocab`.
    pub fn read_from<R: BufRead>(
        reader: R,
        source: &Path,
        relation: &str,
        vocab: &Vocabulary,
    ) -> Result<(Self, LoadStats)> {
        let mut stats = LoadStats::default();
        let mut pairs = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: n + 1,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            if fields[0].trim() != relation {
                continue;
            }
            stats.matched += 1;
            let head = vocab.id(&fields[1].trim().to_lowercase());
            let tail = vocab.id(&fields[2].trim().to_lowercase());
            match (head, tail) {
                (Some(i), Some(j)) => {
                    if seen.insert((i, j)) {
                        pairs.push((i, j));
                    } else {
                        stats.duplicates += 1;
                    }
                }
                _ => stats.skipped += 1,
            }
        }
        let set = Self::from_pairs(relation, vocab.len(), pairs)?;
        if set.is_empty() {
            warn!(
                "{}: no `{relation}` pairs survived ({} matched, {} out of vocabulary)",
                source.display(),
                stats.matched,
                stats.skipped
            );
        }
        Ok((set, stats))
    }
}

pub fn load_relations(path: &Path, relation: &str, vocab: &Vocabulary) -> Result<(RelationSet, LoadStats)> {
    RelationSet::read_from(io_util::open_buffered(path)?, path, relation, vocab)
}

pub fn relation_indicator(rel: &RelationSet, i: u32, j: u32) -> u8 {
    rel.indicator(i, j)
}

pub fn symmetrize(rel: &RelationSet) -> RelationSet {
    rel.symmetrize()
}
