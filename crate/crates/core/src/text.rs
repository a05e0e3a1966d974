//! Tokenization, tf-idf vectors and inverted-index candidate pairs.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::model::Record;
use crate::parallel::Exec;

const BUNDLED_STOP_WORDS: &str = include_str!("../data/stopwords.txt");

/// Bundled English stop words, including `http`.
pub fn default_stop_words() -> HashSet<String> {
    parse_stop_words(BUNDLED_STOP_WORDS)
}

/// One term per line, UTF-8. Blank lines are ignored.
pub fn parse_stop_words(src: &str) -> HashSet<String> {
    src.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Lowercased alphanumeric runs, in order, with stop words and out-of-range
/// lengths (in characters) removed. Repeated terms are kept.
pub fn tokenize(text: &str, stop_words: &HashSet<String>, min_len: usize, max_len: usize) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(|t| {
            let n = t.chars().count();
            n >= min_len && n <= max_len && !stop_words.contains(t)
        })
        .collect()
}

/// Fills `tokens` on every record.
pub fn tokenize_corpus(records: &mut [Record], stop_words: &HashSet<String>, min_len: usize, max_len: usize) {
    for r in records {
        r.tokens = tokenize(&r.text, stop_words, min_len, max_len);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TermEntry {
    pub id: u32,
    /// Number of records containing the term.
    pub doc_freq: u32,
}

/// Term dictionary with document frequencies.
///
/// Term ids follow lexicographic term order, so they do not depend on the
/// order of records.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    terms: HashMap<String, TermEntry>,
    by_id: Vec<String>,
    n_docs: usize,
}

impl Vocabulary {
    /// Builds from already-tokenized records.
    pub fn build(records: &[Record]) -> Self {
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for r in records {
            let distinct: HashSet<&str> = r.tokens.iter().map(String::as_str).collect();
            for t in distinct {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        let mut terms = HashMap::with_capacity(df.len());
        let mut by_id = Vec::with_capacity(df.len());
        for (i, (t, f)) in df.into_iter().enumerate() {
            terms.insert(t.to_string(), TermEntry { id: i as u32, doc_freq: f });
            by_id.push(t.to_string());
        }
        Self {
            terms,
            by_id,
            n_docs: records.len(),
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&TermEntry> {
        self.terms.get(term)
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.terms.get(term).map(|e| e.id)
    }

    pub fn term(&self, id: u32) -> &str {
        &self.by_id[id as usize]
    }

    pub fn doc_freq(&self, id: u32) -> u32 {
        self.terms[&self.by_id[id as usize]].doc_freq
    }

    /// `ln(N / df)`; zero for unknown terms.
    pub fn idf(&self, term: &str) -> f64 {
        match self.terms.get(term) {
            Some(e) if e.doc_freq > 0 => (self.n_docs as f64 / e.doc_freq as f64).ln(),
            _ => 0.0,
        }
    }

    /// Raw term counts times idf. Unknown terms are skipped.
    pub fn vectorize(&self, tokens: &[String]) -> TfIdfVector {
        let mut tf: BTreeMap<u32, u32> = BTreeMap::new();
        for t in tokens {
            if let Some(e) = self.terms.get(t) {
                *tf.entry(e.id).or_insert(0) += 1;
            }
        }
        let weights = tf
            .into_iter()
            .map(|(id, c)| {
                let df = self.doc_freq(id) as f64;
                (id, c as f64 * (self.n_docs as f64 / df).ln())
            })
            .filter(|&(_, w)| w > 0.0)
            .collect();
        TfIdfVector::new(weights)
    }

    /// Sorted distinct term ids of a token list.
    pub fn term_set(&self, tokens: &[String]) -> Vec<u32> {
        let mut ids: Vec<u32> = tokens.iter().filter_map(|t| self.id(t)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Sparse tf-idf vector sorted by term id, with its L2 norm cached.
#[derive(Clone, Debug, PartialEq)]
pub struct TfIdfVector {
    weights: Vec<(u32, f64)>,
    norm: f64,
}

impl TfIdfVector {
    fn new(weights: Vec<(u32, f64)>) -> Self {
        let norm = weights.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        Self { weights, norm }
    }

    pub fn weights(&self) -> &[(u32, f64)] {
        &self.weights
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Cosine of the angle between two vectors; 0 if either is empty.
    pub fn cosine(&self, other: &TfIdfVector) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        let (a, b) = (&self.weights, &other.weights);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        (dot / (self.norm * other.norm)).clamp(0.0, 1.0)
    }
}

/// tf-idf cosine similarity of two tokenized records.
pub fn tfidf_cosine(a: &Record, b: &Record, vocab: &Vocabulary) -> f64 {
    vocab.vectorize(&a.tokens).cosine(&vocab.vectorize(&b.tokens))
}

/// Per-record vectors and term sets for a whole corpus.
#[derive(Clone, Debug)]
pub struct TextIndex {
    pub vocab: Vocabulary,
    pub vectors: Vec<TfIdfVector>,
    pub term_sets: Vec<Vec<u32>>,
}

impl TextIndex {
    pub fn build(records: &[Record]) -> Self {
        let vocab = Vocabulary::build(records);
        let vectors = records.iter().map(|r| vocab.vectorize(&r.tokens)).collect();
        let term_sets = records.iter().map(|r| vocab.term_set(&r.tokens)).collect();
        Self {
            vocab,
            vectors,
            term_sets,
        }
    }

    pub fn cosine(&self, i: usize, j: usize) -> f64 {
        self.vectors[i].cosine(&self.vectors[j])
    }
}

/// Postings lists over a subset of terms.
#[derive(Clone, Debug)]
pub struct InvertedIndex {
    postings: Vec<Vec<u32>>,
    /// Per record, its valid term ids (sorted).
    valid_sets: Vec<Vec<u32>>,
}

impl InvertedIndex {
    /// `valid` has one flag per vocabulary term id.
    pub fn build(term_sets: &[Vec<u32>], valid: &[bool]) -> Self {
        let mut postings = vec![Vec::new(); valid.len()];
        let mut valid_sets = Vec::with_capacity(term_sets.len());
        for (r, set) in term_sets.iter().enumerate() {
            let vs: Vec<u32> = set.iter().copied().filter(|&t| valid[t as usize]).collect();
            for &t in &vs {
                postings[t as usize].push(r as u32);
            }
            valid_sets.push(vs);
        }
        Self {
            postings,
            valid_sets,
        }
    }

    pub fn postings(&self, term: u32) -> &[u32] {
        &self.postings[term as usize]
    }

    pub fn valid_terms_of(&self, record: usize) -> &[u32] {
        &self.valid_sets[record]
    }

    /// Partners `j > i` sharing at least one valid term with record `i`, ascending.
    pub fn partners(&self, i: usize) -> Vec<u32> {
        let mut out: Vec<u32> = self.valid_sets[i]
            .iter()
            .flat_map(|&t| {
                let p = &self.postings[t as usize];
                // postings are ascending record indices
                let start = p.partition_point(|&j| j as usize <= i);
                p[start..].iter().copied()
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every unordered pair sharing a valid term, each once, in `(i, j)` order with `i < j`.
    pub fn pairs(&self, exec: Exec) -> Vec<(usize, usize)> {
        exec.flat_map_range(self.valid_sets.len(), |i| {
            self.partners(i)
                .into_iter()
                .map(|j| (i, j as usize))
                .collect()
        })
    }
}

/// Candidate pairs for tokenized records restricted to `valid_terms`.
pub fn candidate_pairs(records: &[Record], valid_terms: &HashSet<String>) -> Vec<(usize, usize)> {
    let vocab = Vocabulary::build(records);
    let term_sets: Vec<Vec<u32>> = records.iter().map(|r| vocab.term_set(&r.tokens)).collect();
    let valid: Vec<bool> = (0..vocab.len() as u32)
        .map(|id| valid_terms.contains(vocab.term(id)))
        .collect();
    InvertedIndex::build(&term_sets, &valid).pairs(Exec::default())
}
