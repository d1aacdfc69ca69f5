//! Synthetic corpora and reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub const TOPICS: [[&str; 8]; 4] = [
    ["cat", "dog", "pet", "fur", "paw", "tail", "bark", "purr"],
    ["car", "road", "wheel", "drive", "fuel", "engine", "brake", "lane"],
    ["king", "queen", "crown", "throne", "royal", "palace", "prince", "reign"],
    ["rain", "cloud", "storm", "wind", "snow", "sun", "sky", "weather"],
];

pub const FUNCTION_WORDS: [&str; 6] = ["the", "a", "of", "and", "in", "to"];

/// Topic-structured toy corpus of roughly `n_tokens` tokens: each line
/// draws mostly from one topic, salted with function words.
pub fn toy_corpus(n_tokens: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    let mut total = 0;
    while total < n_tokens {
        let topic = &TOPICS[rng.random_range(0..TOPICS.len())];
        let len = rng.random_range(8..=16);
        let words: Vec<&str> = (0..len)
            .map(|_| {
                if rng.random_bool(0.3) {
                    FUNCTION_WORDS[rng.random_range(0..FUNCTION_WORDS.len())]
                } else {
                    topic[rng.random_range(0..topic.len())]
                }
            })
            .collect();
        total += len;
        lines.push(words.join(" "));
    }
    lines
}

/// Synonym-style pairs within each topic, as relation file text.
pub fn toy_relations() -> String {
    let mut out = String::new();
    for topic in &TOPICS {
        for k in (0..topic.len()).step_by(2) {
            out.push_str(&format!("synonym\t{}\t{}\n", topic[k], topic[k + 1]));
        }
    }
    out.push_str("hypernym\tcat\tpet\n");
    out
}

/// Zipf-distributed corpus over `n_types` synthetic word types.
pub fn zipf_corpus(n_tokens: usize, n_types: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=n_types).map(|r| 1.0 / r as f64).collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    let mut lines = Vec::new();
    let mut total = 0;
    while total < n_tokens {
        let len = rng.random_range(10..=30).min(n_tokens - total);
        let line: Vec<String> = (0..len).map(|_| format!("w{}", dist.sample(&mut rng))).collect();
        total += len;
        lines.push(line.join(" "));
    }
    lines
}

/// Exact rational `num/den` in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frac {
    pub num: u128,
    pub den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Frac {
    pub fn new(num: u128, den: u128) -> Self {
        let g = gcd(num, den).max(1);
        Frac {
            num: num / g,
            den: den / g,
        }
    }

    pub fn add(self, o: Frac) -> Frac {
        Frac::new(self.num * o.den + o.num * self.den, self.den * o.den)
    }

    /// Nearest f64 for values whose numerator and denominator fit in 53 bits.
    pub fn to_f64(self) -> f64 {
        assert!(
            self.num < (1 << 53) && self.den < (1 << 53),
            "oracle fraction too large"
        );
        self.num as f64 / self.den as f64
    }
}

/// Brute-force distance-weighted co-occurrence: every ordered pair of
/// in-vocabulary tokens `l ≤ window` apart on the same line adds `1/l`.
pub fn brute_force_cooc(
    lines: &[String],
    id: impl Fn(&str) -> Option<u32>,
    window: usize,
) -> BTreeMap<(u32, u32), Frac> {
    let mut acc: BTreeMap<(u32, u32), Frac> = BTreeMap::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        for p in 0..toks.len() {
            for q in 0..toks.len() {
                let l = p.abs_diff(q);
                if l == 0 || l > window {
                    continue;
                }
                if let (Some(i), Some(j)) = (id(toks[p]), id(toks[q])) {
                    let e = acc.entry((i, j)).or_insert(Frac { num: 0, den: 1 });
                    *e = e.add(Frac::new(1, l as u128));
                }
            }
        }
    }
    acc
}
