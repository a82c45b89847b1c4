//! A self-contained benchmark: real paragraphs against text sampled from a
//! trigram model trained on a disjoint half of the same corpus.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{join_tokens, tokenize, Dataset, Document, Label, Split, TokenSequence};
use crate::error::{Error, Result};
use crate::ngram::{NgramModel, DEFAULT_DELTA, DEFAULT_UNIFORM_WEIGHT};
use crate::providers::{ProviderId, ProviderSet};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    /// Documents per split, split evenly between the two classes.
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Domain tags assigned round-robin within each class.
    pub domains: Vec<String>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            train: 400,
            val: 100,
            test: 200,
            min_tokens: 250,
            max_tokens: 350,
            domains: vec!["synthetic".into()],
            seed: 0,
        }
    }
}

pub struct SyntheticBenchmark {
    pub dataset: Dataset,
    /// Trained on half A; also the sampling model for the ai documents.
    pub trigram: Arc<NgramModel>,
    pub unigram: Arc<NgramModel>,
}

impl SyntheticBenchmark {
    pub fn providers(&self) -> Result<ProviderSet> {
        ProviderSet::new()
            .with_ngram(ProviderId::Unigram, self.unigram.clone())?
            .with_ngram(ProviderId::Trigram, self.trigram.clone())
    }
}

/// Blank-line separated blocks, trimmed, empty blocks dropped.
pub fn corpus_paragraphs(text: &str) -> Vec<&str> {
    text.split("\n\n").map(str::trim).filter(|p| !p.is_empty()).collect()
}

/// Trains the fertility unigram and the Kneser-Ney trigram on paragraphs,
/// one padded sequence per paragraph.
pub fn train_pair(paragraphs: &[&str]) -> Result<(NgramModel, NgramModel)> {
    let seqs: Vec<TokenSequence> = paragraphs.iter().map(|p| tokenize(p)).collect();
    Ok((
        NgramModel::train(1, &seqs, DEFAULT_DELTA, DEFAULT_UNIFORM_WEIGHT)?,
        NgramModel::train(3, &seqs, DEFAULT_DELTA, DEFAULT_UNIFORM_WEIGHT)?,
    ))
}

/// Concatenates blocks with blank lines until `target` tokens are covered,
/// then cuts to exactly that prefix.
fn assemble(mut next: impl FnMut() -> Option<String>, target: usize) -> Option<String> {
    let mut text = String::new();
    let mut tokens = 0;
    while tokens < target {
        let block = next()?;
        if block.trim().is_empty() {
            continue;
        }
        if !text.is_empty() {
            text.push_str("\n\n");
        }
        tokens += tokenize(&block).len();
        text.push_str(&block);
    }
    Some(tokenize(&text).prefix_text(&text, target).to_string())
}

pub fn build_synthetic(corpus_text: &str, config: &SyntheticConfig) -> Result<SyntheticBenchmark> {
    if config.min_tokens == 0 || config.min_tokens > config.max_tokens {
        return Err(Error::InvalidParameter("bad document length range".into()));
    }
    if config.domains.is_empty() {
        return Err(Error::InvalidParameter("at least one domain tag is needed".into()));
    }
    let sizes = [config.train, config.val, config.test];
    if sizes.iter().any(|s| s % 2 != 0 || *s == 0) {
        return Err(Error::InvalidSplit("split sizes must be even and positive".into()));
    }
    let paragraphs = corpus_paragraphs(corpus_text);
    let half_a: Vec<&str> = paragraphs.iter().step_by(2).copied().collect();
    let half_b: Vec<&str> = paragraphs.iter().skip(1).step_by(2).copied().collect();
    if half_a.is_empty() || half_b.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (unigram, trigram) = train_pair(&half_a)?;
    let per_class = sizes.iter().sum::<usize>() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut human = Vec::with_capacity(per_class);
    let mut b_iter = half_b.iter();
    for i in 0..per_class {
        let target = rng.gen_range(config.min_tokens..=config.max_tokens);
        let text = assemble(|| b_iter.next().map(|s| s.to_string()), target).ok_or_else(|| {
            Error::InvalidParameter(format!("corpus half B ran out after {i} human documents"))
        })?;
        human.push(text);
    }

    let NgramModel::Trigram(kn) = &trigram else {
        unreachable!("order 3 trains a trigram");
    };
    let sampler = kn.sampler();
    let mut ai = Vec::with_capacity(per_class);
    for _ in 0..per_class {
        let target = rng.gen_range(config.min_tokens..=config.max_tokens);
        let text = assemble(|| Some(join_tokens(&sampler.sample_sequence(2 * config.max_tokens, &mut rng))), target)
            .expect("sampling never runs dry");
        ai.push(text);
    }

    let mut documents = Vec::with_capacity(2 * per_class);
    let mut splits = std::collections::BTreeMap::new();
    for (prefix, label, texts) in [("h", Label::Human, human), ("a", Label::Ai, ai)] {
        let mut order: Vec<usize> = (0..texts.len()).collect();
        order.shuffle(&mut rng);
        let mut assignment = vec![Split::Test; texts.len()];
        for (rank, &i) in order.iter().enumerate() {
            assignment[i] = if rank < config.train / 2 {
                Split::Train
            } else if rank < (config.train + config.val) / 2 {
                Split::Val
            } else {
                Split::Test
            };
        }
        for (i, text) in texts.into_iter().enumerate() {
            let id = format!("{prefix}{i:04}");
            let domain = &config.domains[i % config.domains.len()];
            splits.insert(id.clone(), assignment[i]);
            let mut doc = Document::new(id, text, label).with_domain(domain.clone());
            doc.source = "synthetic".into();
            documents.push(doc);
        }
    }
    let mut dataset = Dataset::new(documents)?;
    dataset.splits = splits;
    Ok(SyntheticBenchmark {
        dataset,
        trigram: Arc::new(trigram),
        unigram: Arc::new(unigram),
    })
}
