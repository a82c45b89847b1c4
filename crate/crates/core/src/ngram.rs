//! Unigram fertility and interpolated Kneser-Ney trigram models.
//!
//! Every training sequence is padded as `<s> <s> w1 .. wn </s>`; each padded
//! position from the third on is one prediction event `(u, v, w)`. The
//! fertility unigram counts distinct predecessors of `w` over those events.
//! Probabilities are computed in double precision; unseen tokens only
//! receive the uniform floor `lambda / (|V| + new types)`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const DEFAULT_DELTA: f64 = 0.9;
pub const DEFAULT_UNIFORM_WEIGHT: f64 = 1e-3;

const FORMAT: &str = "specter-ngram";
const VERSION: u32 = 1;
const START_ID: u32 = 0;
const END_ID: u32 = 1;
/// Id used for tokens outside the vocabulary; never present in any table.
const OOV: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::ModelFormat(format!("duplicate vocabulary entry {t:?}")));
            }
        }
        if tokens.len() < 2 || tokens[0] != START || tokens[1] != END {
            return Err(Error::ModelFormat("vocabulary must start with <s> </s>".into()));
        }
        Ok(Self { tokens, index })
    }

    fn build(corpus: &[TokenSequence]) -> Self {
        let mut tokens = vec![START.to_string(), END.to_string()];
        let mut index: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        for seq in corpus {
            for tok in &seq.tokens {
                if !index.contains_key(tok) {
                    index.insert(tok.clone(), tokens.len() as u32);
                    tokens.push(tok.clone());
                }
            }
        }
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Prediction events `(u, v, w)` of every padded training sequence.
fn events<'a>(
    vocab: &'a Vocabulary,
    corpus: &'a [TokenSequence],
) -> impl Iterator<Item = [u32; 3]> + 'a {
    corpus.iter().flat_map(move |seq| {
        let mut ids = vec![START_ID, START_ID];
        ids.extend(seq.tokens.iter().map(|t| vocab.id(t).expect("token in vocab")));
        ids.push(END_ID);
        (2..ids.len())
            .map(|i| [ids[i - 2], ids[i - 1], ids[i]])
            .collect::<Vec<_>>()
    })
}

fn check_uniform_weight(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "uniform weight must lie in (0, 1), got {lambda}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnigramFertilityModel {
    vocab: Vocabulary,
    continuation: Vec<u64>,
    total_bigram_types: u64,
    uniform_weight: f64,
}

impl UnigramFertilityModel {
    pub fn train(corpus: &[TokenSequence], uniform_weight: f64) -> Result<Self> {
        check_uniform_weight(uniform_weight)?;
        let total_tokens: usize = corpus.iter().map(TokenSequence::len).sum();
        if corpus.is_empty() || total_tokens < 2 {
            return Err(Error::EmptyCorpus);
        }
        let vocab = Vocabulary::build(corpus);
        let bigrams: HashSet<(u32, u32)> = events(&vocab, corpus).map(|[_, v, w]| (v, w)).collect();
        Ok(Self::from_bigram_types(vocab, &bigrams, uniform_weight))
    }

    fn from_bigram_types(
        vocab: Vocabulary,
        bigrams: &HashSet<(u32, u32)>,
        uniform_weight: f64,
    ) -> Self {
        let mut continuation = vec![0u64; vocab.len()];
        for &(_, w) in bigrams {
            continuation[w as usize] += 1;
        }
        Self {
            vocab,
            continuation,
            total_bigram_types: bigrams.len() as u64,
            uniform_weight,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn uniform_weight(&self) -> f64 {
        self.uniform_weight
    }

    pub fn total_bigram_types(&self) -> u64 {
        self.total_bigram_types
    }

    pub fn continuation_count(&self, token: &str) -> u64 {
        self.vocab
            .id(token)
            .map_or(0, |id| self.continuation[id as usize])
    }

    fn prob_id(&self, w: u32, extra_types: usize) -> f64 {
        let count = if w == OOV {
            0
        } else {
            self.continuation[w as usize]
        };
        (1.0 - self.uniform_weight) * (count as f64 / self.total_bigram_types as f64)
            + self.uniform_weight / ((self.vocab.len() + extra_types) as f64)
    }

    /// `P(w)` with `extra_types` out-of-vocabulary types appended to the
    /// uniform floor. Unknown tokens get the floor alone.
    pub fn prob(&self, token: &str, extra_types: usize) -> f64 {
        self.prob_id(self.vocab.id(token).unwrap_or(OOV), extra_types)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ContextStats {
    total: u64,
    types: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KneserNeyTrigram {
    unigram: UnigramFertilityModel,
    delta: f64,
    trigrams: HashMap<[u32; 3], u64>,
    trigram_ctx: HashMap<[u32; 2], ContextStats>,
    /// Number of distinct left neighbours `u` for each bigram `(v, w)`.
    bigram_cont: HashMap<[u32; 2], u64>,
    bigram_ctx: HashMap<u32, ContextStats>,
}

impl KneserNeyTrigram {
    pub fn train(corpus: &[TokenSequence], delta: f64, uniform_weight: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in (0, 1), got {delta}"
            )));
        }
        check_uniform_weight(uniform_weight)?;
        let total_tokens: usize = corpus.iter().map(TokenSequence::len).sum();
        if corpus.is_empty() || total_tokens < 2 {
            return Err(Error::EmptyCorpus);
        }
        let vocab = Vocabulary::build(corpus);
        let mut trigrams: HashMap<[u32; 3], u64> = HashMap::new();
        for ev in events(&vocab, corpus) {
            *trigrams.entry(ev).or_default() += 1;
        }
        Self::from_counts(vocab, trigrams, delta, uniform_weight)
    }

    fn from_counts(
        vocab: Vocabulary,
        trigrams: HashMap<[u32; 3], u64>,
        delta: f64,
        uniform_weight: f64,
    ) -> Result<Self> {
        let mut trigram_ctx: HashMap<[u32; 2], ContextStats> = HashMap::new();
        let mut bigram_cont: HashMap<[u32; 2], u64> = HashMap::new();
        for (&[u, v, w], &c) in &trigrams {
            if c == 0 {
                return Err(Error::ModelFormat("zero trigram count".into()));
            }
            let ctx = trigram_ctx.entry([u, v]).or_insert(ContextStats { total: 0, types: 0 });
            ctx.total += c;
            ctx.types += 1;
            *bigram_cont.entry([v, w]).or_default() += 1;
        }
        let mut bigram_ctx: HashMap<u32, ContextStats> = HashMap::new();
        for (&[v, _], &n) in &bigram_cont {
            let ctx = bigram_ctx.entry(v).or_insert(ContextStats { total: 0, types: 0 });
            ctx.total += n;
            ctx.types += 1;
        }
        let bigram_types: HashSet<(u32, u32)> = bigram_cont.keys().map(|&[v, w]| (v, w)).collect();
        let unigram = UnigramFertilityModel::from_bigram_types(vocab, &bigram_types, uniform_weight);
        Ok(Self {
            unigram,
            delta,
            trigrams,
            trigram_ctx,
            bigram_cont,
            bigram_ctx,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.unigram.vocab
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn unigram(&self) -> &UnigramFertilityModel {
        &self.unigram
    }

    fn bigram_prob_id(&self, v: u32, w: u32, extra_types: usize) -> f64 {
        let lower = self.unigram.prob_id(w, extra_types);
        match self.bigram_ctx.get(&v) {
            None => lower,
            Some(ctx) => {
                let c = self.bigram_cont.get(&[v, w]).copied().unwrap_or(0);
                let total = ctx.total as f64;
                (c as f64 - self.delta).max(0.0) / total
                    + (self.delta * ctx.types as f64 / total) * lower
            }
        }
    }

    fn prob_id(&self, u: u32, v: u32, w: u32, extra_types: usize) -> f64 {
        let lower = self.bigram_prob_id(v, w, extra_types);
        match self.trigram_ctx.get(&[u, v]) {
            None => lower,
            Some(ctx) => {
                let c = self.trigrams.get(&[u, v, w]).copied().unwrap_or(0);
                let total = ctx.total as f64;
                (c as f64 - self.delta).max(0.0) / total
                    + (self.delta * ctx.types as f64 / total) * lower
            }
        }
    }

    fn id(&self, token: &str) -> u32 {
        self.vocab().id(token).unwrap_or(OOV)
    }

    /// `P(w | u, v)` with the same out-of-vocabulary convention as the
    /// unigram.
    pub fn prob(&self, u: &str, v: &str, w: &str, extra_types: usize) -> f64 {
        self.prob_id(self.id(u), self.id(v), self.id(w), extra_types)
    }

    /// Backoff-only bigram estimate `P_bo(w | v)`.
    pub fn bigram_prob(&self, v: &str, w: &str, extra_types: usize) -> f64 {
        self.bigram_prob_id(self.id(v), self.id(w), extra_types)
    }

    /// Weight the trigram level hands to the backoff distribution in
    /// context `(u, v)`, or 1 for an unseen context.
    pub fn backoff_weight(&self, u: &str, v: &str) -> f64 {
        match self.trigram_ctx.get(&[self.id(u), self.id(v)]) {
            None => 1.0,
            Some(ctx) => self.delta * ctx.types as f64 / ctx.total as f64,
        }
    }

    pub fn trigram_count(&self, u: &str, v: &str, w: &str) -> u64 {
        self.trigrams
            .get(&[self.id(u), self.id(v), self.id(w)])
            .copied()
            .unwrap_or(0)
    }

    /// Observed trigram contexts, sorted.
    pub fn contexts(&self) -> Vec<(String, String)> {
        let mut ids: Vec<[u32; 2]> = self.trigram_ctx.keys().copied().collect();
        ids.sort_unstable();
        ids.into_iter()
            .map(|[u, v]| (self.vocab().token(u).to_string(), self.vocab().token(v).to_string()))
            .collect()
    }

    pub fn sampler(&self) -> Sampler<'_> {
        Sampler::new(self)
    }
}

/// Draws tokens from a trained trigram model by walking the interpolation
/// levels: keep the discounted observed mass at one level, otherwise fall
/// through to the next.
pub struct Sampler<'a> {
    model: &'a KneserNeyTrigram,
    trigram_next: HashMap<[u32; 2], Vec<(u32, u64)>>,
    bigram_next: HashMap<u32, Vec<(u32, u64)>>,
    continuation_cdf: Vec<u64>,
}

impl<'a> Sampler<'a> {
    fn new(model: &'a KneserNeyTrigram) -> Self {
        let mut trigram_next: HashMap<[u32; 2], Vec<(u32, u64)>> = HashMap::new();
        for (&[u, v, w], &c) in &model.trigrams {
            trigram_next.entry([u, v]).or_default().push((w, c));
        }
        let mut bigram_next: HashMap<u32, Vec<(u32, u64)>> = HashMap::new();
        for (&[v, w], &c) in &model.bigram_cont {
            bigram_next.entry(v).or_default().push((w, c));
        }
        for list in trigram_next.values_mut().chain(bigram_next.values_mut()) {
            list.sort_unstable();
        }
        let mut acc = 0;
        let continuation_cdf = model
            .unigram
            .continuation
            .iter()
            .map(|&c| {
                acc += c;
                acc
            })
            .collect();
        Self {
            model,
            trigram_next,
            bigram_next,
            continuation_cdf,
        }
    }

    fn pick(list: &[(u32, u64)], delta: f64, total: u64, rng: &mut impl Rng) -> Option<u32> {
        let mut r = rng.gen::<f64>() * total as f64;
        for &(w, c) in list {
            let mass = c as f64 - delta;
            if r < mass {
                return Some(w);
            }
            r -= mass;
        }
        None
    }

    fn next_id(&self, u: u32, v: u32, rng: &mut impl Rng) -> u32 {
        let m = self.model;
        if let (Some(list), Some(ctx)) = (self.trigram_next.get(&[u, v]), m.trigram_ctx.get(&[u, v])) {
            if let Some(w) = Self::pick(list, m.delta, ctx.total, rng) {
                return w;
            }
        }
        if let (Some(list), Some(ctx)) = (self.bigram_next.get(&v), m.bigram_ctx.get(&v)) {
            if let Some(w) = Self::pick(list, m.delta, ctx.total, rng) {
                return w;
            }
        }
        let vocab_len = m.vocab().len() as u32;
        loop {
            let w = if rng.gen::<f64>() < m.unigram.uniform_weight {
                rng.gen_range(0..vocab_len)
            } else {
                let total = *self.continuation_cdf.last().expect("non-empty vocab");
                let r = rng.gen_range(0..total);
                self.continuation_cdf.partition_point(|&c| c <= r) as u32
            };
            if w != START_ID {
                return w;
            }
        }
    }

    /// Samples one sequence (without sentinels) of at most `max_len` tokens,
    /// stopping early when the end sentinel is drawn.
    pub fn sample_sequence(&self, max_len: usize, rng: &mut impl Rng) -> Vec<String> {
        let (mut u, mut v) = (START_ID, START_ID);
        let mut out = Vec::new();
        while out.len() < max_len {
            let w = self.next_id(u, v, rng);
            if w == END_ID {
                break;
            }
            out.push(self.model.vocab().token(w).to_string());
            u = v;
            v = w;
        }
        out
    }
}

/// Either trained model, as loaded from or written to a model file.
#[derive(Clone, Debug, PartialEq)]
pub enum NgramModel {
    Unigram(UnigramFertilityModel),
    Trigram(KneserNeyTrigram),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    order: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    uniform_weight: f64,
    vocab: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    continuation: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trigrams: Option<Vec<[u64; 4]>>,
}

impl NgramModel {
    pub fn train(
        order: u8,
        corpus: &[TokenSequence],
        delta: f64,
        uniform_weight: f64,
    ) -> Result<Self> {
        match order {
            1 => Ok(Self::Unigram(UnigramFertilityModel::train(corpus, uniform_weight)?)),
            3 => Ok(Self::Trigram(KneserNeyTrigram::train(corpus, delta, uniform_weight)?)),
            other => Err(Error::InvalidParameter(format!("unsupported order {other}"))),
        }
    }

    pub fn order(&self) -> u8 {
        match self {
            Self::Unigram(_) => 1,
            Self::Trigram(_) => 3,
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        match self {
            Self::Unigram(m) => m.vocab(),
            Self::Trigram(m) => m.vocab(),
        }
    }

    /// Per-token probabilities of `ts`, each conditioned on its left context
    /// (padded with two start sentinels).
    pub fn score(&self, ts: &TokenSequence) -> Vec<f64> {
        let vocab = self.vocab();
        let ids: Vec<u32> = ts.tokens.iter().map(|t| vocab.id(t).unwrap_or(OOV)).collect();
        let extra = ts
            .tokens
            .iter()
            .filter(|t| vocab.id(t).is_none())
            .collect::<HashSet<_>>()
            .len();
        match self {
            Self::Unigram(m) => ids.iter().map(|&w| m.prob_id(w, extra)).collect(),
            Self::Trigram(m) => {
                let (mut u, mut v) = (START_ID, START_ID);
                ids.iter()
                    .map(|&w| {
                        let p = m.prob_id(u, v, w, extra);
                        u = v;
                        v = w;
                        p
                    })
                    .collect()
            }
        }
    }

    fn to_file(&self) -> ModelFile {
        match self {
            Self::Unigram(m) => ModelFile {
                format: FORMAT.into(),
                version: VERSION,
                order: 1,
                delta: None,
                uniform_weight: m.uniform_weight,
                vocab: m.vocab.tokens.clone(),
                continuation: Some(m.continuation.clone()),
                trigrams: None,
            },
            Self::Trigram(m) => {
                let mut rows: Vec<[u64; 4]> = m
                    .trigrams
                    .iter()
                    .map(|(&[u, v, w], &c)| [u as u64, v as u64, w as u64, c])
                    .collect();
                rows.sort_unstable();
                ModelFile {
                    format: FORMAT.into(),
                    version: VERSION,
                    order: 3,
                    delta: Some(m.delta),
                    uniform_weight: m.unigram.uniform_weight,
                    vocab: m.vocab().tokens.clone(),
                    continuation: None,
                    trigrams: Some(rows),
                }
            }
        }
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model format {} v{}",
                file.format, file.version
            )));
        }
        check_uniform_weight(file.uniform_weight)?;
        let vocab = Vocabulary::from_tokens(file.vocab)?;
        match file.order {
            1 => {
                let continuation = file
                    .continuation
                    .ok_or_else(|| Error::ModelFormat("missing continuation counts".into()))?;
                if continuation.len() != vocab.len() {
                    return Err(Error::ModelFormat("continuation length mismatch".into()));
                }
                let total_bigram_types = continuation.iter().sum();
                if total_bigram_types == 0 {
                    return Err(Error::EmptyCorpus);
                }
                Ok(Self::Unigram(UnigramFertilityModel {
                    vocab,
                    continuation,
                    total_bigram_types,
                    uniform_weight: file.uniform_weight,
                }))
            }
            3 => {
                let delta = file
                    .delta
                    .ok_or_else(|| Error::ModelFormat("missing discount".into()))?;
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::InvalidParameter(format!("discount {delta}")));
                }
                let rows = file
                    .trigrams
                    .ok_or_else(|| Error::ModelFormat("missing trigram counts".into()))?;
                let n = vocab.len() as u64;
                let mut trigrams = HashMap::with_capacity(rows.len());
                for [u, v, w, c] in rows {
                    if u >= n || v >= n || w >= n {
                        return Err(Error::ModelFormat("trigram id out of range".into()));
                    }
                    trigrams.insert([u as u32, v as u32, w as u32], c);
                }
                Ok(Self::Trigram(KneserNeyTrigram::from_counts(
                    vocab,
                    trigrams,
                    delta,
                    file.uniform_weight,
                )?))
            }
            other => Err(Error::ModelFormat(format!("unsupported order {other}"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// SHA-256 of the serialized model, used to pin models in artifacts.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_json()?.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(lines: &[&str]) -> Vec<TokenSequence> {
        lines.iter().map(|l| tokenize(l)).collect()
    }

    #[test]
    fn fertility_counts_by_hand() {
        let m = UnigramFertilityModel::train(&corpus(&["a b", "c b"]), 1e-3).unwrap();
        assert_eq!(m.continuation_count("b"), 2);
        assert_eq!(m.continuation_count("a"), 1);
        assert_eq!(m.continuation_count("c"), 1);
        // (b, </s>) is the only bigram type ending in </s>
        assert_eq!(m.continuation_count(END), 1);
        assert_eq!(m.continuation_count(START), 0);
        assert_eq!(m.total_bigram_types(), 5);
    }

    #[test]
    fn fertility_normalizes_and_floors() {
        let m = UnigramFertilityModel::train(&corpus(&["a b a c", "c b d"]), 1e-3).unwrap();
        let sum: f64 = m.vocab().tokens().iter().map(|t| m.prob(t, 0)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let v = m.vocab().len();
        assert_eq!(m.prob("zebra", 1), 1e-3 / (v + 1) as f64);
        assert!(m.prob(START, 0) > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let c = corpus(&["a b c"]);
        assert!(KneserNeyTrigram::train(&c, 1.0, 1e-3).is_err());
        assert!(KneserNeyTrigram::train(&c, 0.0, 1e-3).is_err());
        assert!(UnigramFertilityModel::train(&corpus(&["a"]), 1e-3).is_err());
        assert!(UnigramFertilityModel::train(&[], 1e-3).is_err());
    }

    #[test]
    fn trigram_normalizes_every_context() {
        let m = KneserNeyTrigram::train(
            &corpus(&["a b c a b", "b c a a", "c c b a b c"]),
            0.9,
            1e-3,
        )
        .unwrap();
        let vocab = m.vocab().tokens().to_vec();
        for u in &vocab {
            for v in &vocab {
                let s: f64 = vocab.iter().map(|w| m.prob(u, v, w, 0)).sum();
                assert!((s - 1.0).abs() < 1e-9, "context ({u},{v}) sums to {s}");
            }
        }
    }

    #[test]
    fn unseen_context_falls_back_to_unigram() {
        let m = KneserNeyTrigram::train(&corpus(&["a b c"]), 0.9, 1e-3).unwrap();
        for w in ["a", "b", "c", "zzz"] {
            assert_eq!(m.prob("x", "y", w, 0), m.unigram().prob(w, 0));
        }
    }

    #[test]
    fn score_aligns_and_uses_left_context() {
        let c = corpus(&["a b c", "a b d", "b c a"]);
        let tri = NgramModel::train(3, &c, 0.9, 1e-3).unwrap();
        let uni = NgramModel::train(1, &c, 0.9, 1e-3).unwrap();
        let ts = tokenize("a b c a b q d");
        let ps = tri.score(&ts);
        assert_eq!(ps.len(), 7);
        assert!(ps.iter().all(|&p| p > 0.0 && p <= 1.0));
        let NgramModel::Trigram(m) = &tri else { unreachable!() };
        assert_eq!(ps[0], m.prob(START, START, "a", 1));
        assert_eq!(ps[2], m.prob("a", "b", "c", 1));
        let NgramModel::Unigram(u) = &uni else { unreachable!() };
        let us = uni.score(&ts);
        assert_eq!(us[0], us[3]);
        assert_eq!(us[5], u.prob("q", 1));
        assert!(tri.score(&tokenize("")).is_empty());
    }

    #[test]
    fn serialization_is_lossless() {
        let c = corpus(&["the cat sat on the mat .", "the dog sat ."]);
        for order in [1, 3] {
            let m = NgramModel::train(order, &c, 0.9, 1e-3).unwrap();
            let back = NgramModel::from_json(&m.to_json().unwrap()).unwrap();
            let ts = tokenize("the cat sat on a dog");
            let a: Vec<u64> = m.score(&ts).iter().map(|p| p.to_bits()).collect();
            let b: Vec<u64> = back.score(&ts).iter().map(|p| p.to_bits()).collect();
            assert_eq!(a, b);
            assert_eq!(m.fingerprint().unwrap(), back.fingerprint().unwrap());
        }
    }

    #[test]
    fn sampler_is_seeded() {
        let c = corpus(&["a b c d", "b c d a", "c d a b"]);
        let m = KneserNeyTrigram::train(&c, 0.9, 1e-3).unwrap();
        let s = m.sampler();
        let a = s.sample_sequence(50, &mut ChaCha8Rng::seed_from_u64(3));
        let b = s.sample_sequence(50, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        assert!(a.iter().all(|t| t != START && t != END));
    }
}
