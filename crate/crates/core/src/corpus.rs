//! Vocabulary construction and distance-weighted co-occurrence counting.
//!
//! Each line of the corpus is one sentence; context windows never cross a
//! line boundary. A context word at distance `l` tokens contributes `1/l` to
//! the count. Out-of-vocabulary tokens still occupy a position.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::thread;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::io_util::{self, at_eof, read_full};

pub const DEFAULT_MIN_COUNT: u64 = 20;
pub const DEFAULT_WINDOW: usize = 10;
/// Largest window whose weights `1/l` can be accumulated exactly as integers
/// in units of `1/lcm(1..=window)`.
pub const MAX_WINDOW: usize = 22;

pub const COOC_MAGIC: [u8; 4] = *b"LXCO";
pub const COOC_VERSION: u32 = 1;
const COOC_HEADER_LEN: usize = 4 + 4 + 8 + 8;
const COOC_RECORD_LEN: usize = 4 + 4 + 8;

/// Lowercases and splits on Unicode whitespace.
pub fn tokenize_line(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_lowercase).collect()
}

/// Frozen word ↔ id map. Ids are dense and assigned by descending
/// frequency, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
}

impl Vocabulary {
    /// Counts every token in `lines` and keeps those seen at least `min_count` times.
    pub fn build<I, S>(lines: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count < 1 {
            return Err(Error::InvalidParam("min_count must be >= 1".into()));
        }
        let mut freq: HashMap<String, u64> = HashMap::new();
        for line in lines {
            for tok in line.as_ref().split_whitespace() {
                *freq.entry(tok.to_lowercase()).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<(String, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        if kept.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_ordered(kept, min_count)
    }

    /// Builds a vocabulary from `(word, count)` pairs already in id order.
    pub fn from_ordered(entries: Vec<(String, u64)>, min_count: u64) -> Result<Self> {
        if entries.len() > u32::MAX as usize {
            return Err(Error::InvalidParam("vocabulary exceeds u32 ids".into()));
        }
        let mut words = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        for (id, (word, count)) in entries.into_iter().enumerate() {
            if word.is_empty() || word.chars().any(char::is_whitespace) {
                return Err(Error::InvalidParam(format!("invalid vocabulary word {word:?}")));
            }
            if index.insert(word.clone(), id as u32).is_some() {
                return Err(Error::InvalidParam(format!("duplicate vocabulary word {word:?}")));
            }
            words.push(word);
            counts.push(count);
        }
        Ok(Vocabulary {
            words,
            counts,
            index,
            min_count,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: u32) -> &str {
        &self.words[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// One `word count` line per entry, in id order.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        for (word, count) in self.words.iter().zip(&self.counts) {
            writeln!(w, "{word} {count}")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R, source: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let parse_err = |msg: &str| Error::Parse {
                path: source.to_path_buf(),
                line: n + 1,
                msg: msg.to_string(),
            };
            let mut fields = line.split(' ');
            let (Some(word), Some(count), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err("expected `word count`"));
            };
            let count: u64 = count.parse().map_err(|_| parse_err("count is not an integer"))?;
            entries.push((word.to_string(), count));
        }
        if entries.is_empty() {
            return Err(Error::format("vocabulary file", "no entries"));
        }
        let min_count = entries.iter().map(|e| e.1).min().unwrap_or(1).max(1);
        Self::from_ordered(entries, min_count)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io_util::write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(io_util::open_buffered(path)?, path)
    }
}

pub fn build_vocab<I, S>(lines: I, min_count: u64) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    Vocabulary::build(lines, min_count)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoocEntry {
    pub i: u32,
    pub j: u32,
    pub x: f64,
}

/// Sparse co-occurrence matrix, entries sorted by `(i, j)`.
#[derive(Clone, Debug)]
pub struct CoocMatrix {
    entries: Vec<CoocEntry>,
    vocab_size: usize,
    window: Option<usize>,
}

// Window is provenance only; it is not part of the on-disk format.
impl PartialEq for CoocMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.vocab_size == other.vocab_size
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.i == b.i && a.j == b.j && a.x.to_bits() == b.x.to_bits())
    }
}

impl CoocMatrix {
    /// Validates and sorts arbitrary entries. Rejects duplicates, ids out of
    /// range and non-positive or non-finite counts.
    pub fn from_entries(vocab_size: usize, mut entries: Vec<CoocEntry>) -> Result<Self> {
        for e in &entries {
            if e.i as usize >= vocab_size || e.j as usize >= vocab_size {
                return Err(Error::format(
                    "co-occurrence matrix",
                    format!("entry ({}, {}) outside vocabulary of size {vocab_size}", e.i, e.j),
                ));
            }
            if !(e.x.is_finite() && e.x > 0.0) {
                return Err(Error::format(
                    "co-occurrence matrix",
                    format!("entry ({}, {}) has non-positive count {}", e.i, e.j, e.x),
                ));
            }
        }
        entries.sort_by_key(|e| (e.i, e.j));
        if let Some(w) = entries.windows(2).find(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::format(
                "co-occurrence matrix",
                format!("duplicate entry ({}, {})", w[0].i, w[0].j),
            ));
        }
        Ok(CoocMatrix {
            entries,
            vocab_size,
            window: None,
        })
    }

    pub fn entries(&self) -> &[CoocEntry] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Window used to build the matrix; `None` when loaded from disk.
    pub fn window(&self) -> Option<usize> {
        self.window
    }

    pub fn get(&self, i: u32, j: u32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&(i, j), |e| (e.i, e.j))
            .ok()
            .map(|k| self.entries[k].x)
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.x).sum()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&COOC_MAGIC)?;
        w.write_u32::<LittleEndian>(COOC_VERSION)?;
        w.write_u64::<LittleEndian>(self.vocab_size as u64)?;
        w.write_u64::<LittleEndian>(self.entries.len() as u64)?;
        for e in &self.entries {
            w.write_u32::<LittleEndian>(e.i)?;
            w.write_u32::<LittleEndian>(e.j)?;
            w.write_f64::<LittleEndian>(e.x)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self> {
        const WHAT: &str = "co-occurrence file";
        let mut header = [0u8; COOC_HEADER_LEN];
        if read_full(reader, &mut header)? < COOC_HEADER_LEN {
            return Err(Error::format(WHAT, "truncated header"));
        }
        let mut h = &header[..];
        let mut magic = [0u8; 4];
        h.read_exact(&mut magic)?;
        if magic != COOC_MAGIC {
            return Err(Error::BadMagic {
                what: WHAT,
                found: magic,
            });
        }
        let version = h.read_u32::<LittleEndian>()?;
        if version != COOC_VERSION {
            return Err(Error::VersionMismatch {
                what: WHAT,
                expected: COOC_VERSION,
                found: version,
            });
        }
        let vocab_size = h.read_u64::<LittleEndian>()? as usize;
        let nnz = h.read_u64::<LittleEndian>()?;

        let mut entries = Vec::with_capacity(nnz.min(1 << 24) as usize);
        let mut rec = [0u8; COOC_RECORD_LEN];
        for index in 0..nnz {
            if read_full(reader, &mut rec)? < COOC_RECORD_LEN {
                return Err(Error::TruncatedRecord {
                    what: WHAT,
                    index,
                    expected: nnz,
                });
            }
            let mut r = &rec[..];
            entries.push(CoocEntry {
                i: r.read_u32::<LittleEndian>()?,
                j: r.read_u32::<LittleEndian>()?,
                x: r.read_f64::<LittleEndian>()?,
            });
        }
        if !at_eof(reader)? {
            return Err(Error::format(WHAT, format!("trailing bytes after {nnz} records")));
        }
        Self::from_entries(vocab_size, entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io_util::write_atomic(path, |w| self.write_to(w))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut io_util::open_buffered(path)?)
    }
}

pub fn save_cooc(matrix: &CoocMatrix, path: &Path) -> Result<()> {
    matrix.save(path)
}

pub fn load_cooc(path: &Path) -> Result<CoocMatrix> {
    CoocMatrix::load(path)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer weight of distance `l` in units of `1/lcm(1..=window)`.
struct DistanceUnits {
    denom: u64,
    units: Vec<u64>,
}

impl DistanceUnits {
    fn new(window: usize) -> Result<Self> {
        if window == 0 || window > MAX_WINDOW {
            return Err(Error::InvalidParam(format!(
                "window must be in 1..={MAX_WINDOW}, got {window}"
            )));
        }
        let denom = (1..=window as u64).fold(1, |acc, l| acc / gcd(acc, l) * l);
        let units = (0..=window as u64).map(|l| denom.checked_div(l).unwrap_or(0)).collect();
        Ok(DistanceUnits { denom, units })
    }
}

fn pack(i: u32, j: u32) -> u64 {
    ((i as u64) << 32) | j as u64
}

fn count_shard<S: AsRef<str>>(
    lines: &[S],
    vocab: &Vocabulary,
    window: usize,
    weights: &DistanceUnits,
) -> HashMap<u64, u64> {
    let mut acc: HashMap<u64, u64> = HashMap::new();
    let mut ids: Vec<Option<u32>> = Vec::new();
    for line in lines {
        ids.clear();
        ids.extend(line.as_ref().split_whitespace().map(|t| vocab.id(&t.to_lowercase())));
        for (p, target) in ids.iter().enumerate() {
            let Some(target) = *target else { continue };
            // Only look right; each pair is credited in both directions.
            for (q, context) in ids.iter().enumerate().skip(p + 1).take(window) {
                let Some(context) = *context else { continue };
                let w = weights.units[q - p];
                *acc.entry(pack(target, context)).or_insert(0) += w;
                *acc.entry(pack(context, target)).or_insert(0) += w;
            }
        }
    }
    acc
}

fn finish(acc: HashMap<u64, u64>, vocab: &Vocabulary, window: usize, denom: u64) -> CoocMatrix {
    let mut entries: Vec<CoocEntry> = acc
        .into_iter()
        .map(|(key, units)| CoocEntry {
            i: (key >> 32) as u32,
            j: key as u32,
            x: units as f64 / denom as f64,
        })
        .collect();
    entries.sort_by_key(|e| (e.i, e.j));
    CoocMatrix {
        entries,
        vocab_size: vocab.len(),
        window: Some(window),
    }
}

/// Single-threaded co-occurrence counting.
pub fn build_cooccurrence<I, S>(lines: I, vocab: &Vocabulary, window: usize) -> Result<CoocMatrix>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let weights = DistanceUnits::new(window)?;
    let lines: Vec<S> = lines.into_iter().collect();
    let acc = count_shard(&lines, vocab, window, &weights);
    Ok(finish(acc, vocab, window, weights.denom))
}

/// Counts disjoint shards of `lines` on `threads` workers and merges them.
/// The result is identical to [`build_cooccurrence`] for any thread count.
pub fn build_cooccurrence_parallel<S>(
    lines: &[S],
    vocab: &Vocabulary,
    window: usize,
    threads: usize,
) -> Result<CoocMatrix>
where
    S: AsRef<str> + Sync,
{
    if threads == 0 {
        return Err(Error::InvalidParam("threads must be >= 1".into()));
    }
    let weights = DistanceUnits::new(window)?;
    if threads == 1 || lines.len() < 2 {
        let acc = count_shard(lines, vocab, window, &weights);
        return Ok(finish(acc, vocab, window, weights.denom));
    }
    let shard_len = lines.len().div_ceil(threads);
    let shards: Vec<HashMap<u64, u64>> = thread::scope(|s| {
        let handles: Vec<_> = lines
            .chunks(shard_len)
            .map(|chunk| {
                let weights = &weights;
                s.spawn(move || count_shard(chunk, vocab, window, weights))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("co-occurrence worker panicked"))
            .collect()
    });
    let mut merged: HashMap<u64, u64> = HashMap::new();
    for shard in shards {
        for (k, v) in shard {
            *merged.entry(k).or_insert(0) += v;
        }
    }
    Ok(finish(merged, vocab, window, weights.denom))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_of(words: &[&str]) -> Vocabulary {
        Vocabulary::from_ordered(words.iter().map(|w| (w.to_string(), 1)).collect(), 1).unwrap()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize_line("I like both cats and dogs"),
            vec!["i", "like", "both", "cats", "and", "dogs"]
        );
        assert!(tokenize_line("").is_empty());
        assert_eq!(tokenize_line("Cats  DOGS"), vec!["cats", "dogs"]);
        assert_eq!(tokenize_line(" \tA\u{2003}b \n"), vec!["a", "b"]);
    }

    #[test]
    fn vocab_threshold_and_ties() {
        let v = build_vocab(["a a a b"], 2).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.count(0), 3);
        assert_eq!(v.id("b"), None);

        let v = build_vocab(["a b a b"], 1).unwrap();
        assert_eq!(v.id("a"), Some(0));
        assert_eq!(v.id("b"), Some(1));

        let v = build_vocab(["c b b a a a", "C"], 1).unwrap();
        assert_eq!(v.words(), ["a", "b", "c"]);
        assert_eq!(v.count(2), 2);
    }

    #[test]
    fn vocab_errors() {
        assert!(matches!(
            build_vocab(["a b c"], 2),
            Err(Error::EmptyVocabulary { min_count: 2 })
        ));
        assert!(matches!(build_vocab(["a"], 0), Err(Error::InvalidParam(_))));
        assert_eq!(DEFAULT_MIN_COUNT, 20);
    }

    #[test]
    fn vocab_file_round_trip() {
        let v = build_vocab(["x y y z z z", "w"], 1).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "z 3\ny 2\nw 1\nx 1\n");
        let back = Vocabulary::read_from(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back.words(), v.words());
        assert_eq!(back.count(0), 3);

        let err = Vocabulary::read_from(&b"a 1\nb\n"[..], Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn cooc_three_tokens() {
        let v = vocab_of(&["a", "b", "c"]);
        let m = build_cooccurrence(["a b c"], &v, 10).unwrap();
        assert_eq!(m.nnz(), 6);
        assert_eq!(m.get(0, 1), Some(1.0));
        assert_eq!(m.get(1, 0), Some(1.0));
        assert_eq!(m.get(0, 2), Some(0.5));
        assert_eq!(m.get(2, 0), Some(0.5));
        assert_eq!(m.get(1, 2), Some(1.0));
        assert_eq!(m.get(2, 1), Some(1.0));
        assert_eq!(m.get(0, 0), None);
    }

    #[test]
    fn cooc_repeated_word_and_single_token() {
        let v = vocab_of(&["a"]);
        let m = build_cooccurrence(["a a"], &v, 10).unwrap();
        assert_eq!(m.get(0, 0), Some(2.0));
        assert_eq!(m.nnz(), 1);

        let m = build_cooccurrence(["a", "a"], &v, 10).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn oov_tokens_occupy_positions() {
        let v = vocab_of(&["a", "b"]);
        let m = build_cooccurrence(["a zzz b"], &v, 10).unwrap();
        assert_eq!(m.get(0, 1), Some(0.5));
        let m = build_cooccurrence(["a zzz b"], &v, 1).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn window_bounds() {
        let v = vocab_of(&["a"]);
        assert!(build_cooccurrence(["a"], &v, 0).is_err());
        assert!(build_cooccurrence(["a"], &v, MAX_WINDOW + 1).is_err());
        assert!(build_cooccurrence(["a"], &v, MAX_WINDOW).is_ok());
    }

    #[test]
    fn binary_round_trip_and_corruption() {
        let v = vocab_of(&["a", "b", "c"]);
        let m = build_cooccurrence(["a b", "b c c"], &v, 10).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"LXCO");
        assert_eq!(buf.len(), COOC_HEADER_LEN + m.nnz() * COOC_RECORD_LEN);
        let back = CoocMatrix::read_from(&mut &buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.window(), None);

        let cut = &buf[..buf.len() - 3];
        assert!(matches!(
            CoocMatrix::read_from(&mut &cut[..]),
            Err(Error::TruncatedRecord { .. })
        ));

        let mut bad_version = buf.clone();
        bad_version[4] = 9;
        assert!(matches!(
            CoocMatrix::read_from(&mut &bad_version[..]),
            Err(Error::VersionMismatch { found: 9, .. })
        ));

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(CoocMatrix::read_from(&mut &trailing[..]).is_err());
    }

    #[test]
    fn empty_matrix_is_header_only() {
        let m = CoocMatrix::from_entries(5, Vec::new()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), COOC_HEADER_LEN);
        let back = CoocMatrix::read_from(&mut &buf[..]).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.vocab_size(), 5);
    }

    #[test]
    fn from_entries_rejects_bad_input() {
        let e = |i, j, x| CoocEntry { i, j, x };
        assert!(CoocMatrix::from_entries(2, vec![e(0, 2, 1.0)]).is_err());
        assert!(CoocMatrix::from_entries(2, vec![e(0, 1, 0.0)]).is_err());
        assert!(CoocMatrix::from_entries(2, vec![e(0, 1, 1.0), e(0, 1, 2.0)]).is_err());
        let m = CoocMatrix::from_entries(2, vec![e(1, 0, 1.0), e(0, 1, 2.0)]).unwrap();
        assert_eq!(m.entries()[0], e(0, 1, 2.0));
    }

    #[test]
    fn parallel_matches_serial() {
        let lines: Vec<String> = (0..50)
            .map(|k| format!("a b c {} a c b b a", if k % 3 == 0 { "x" } else { "c" }))
            .collect();
        let v = build_vocab(&lines, 1).unwrap();
        let serial = build_cooccurrence(&lines, &v, 10).unwrap();
        for threads in [1, 2, 3, 7, 64] {
            assert_eq!(build_cooccurrence_parallel(&lines, &v, 10, threads).unwrap(), serial);
        }
    }
}
