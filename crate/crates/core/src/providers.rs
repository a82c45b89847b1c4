//! Probability providers: local n-gram models and remote completion
//! endpoints that echo prompt log-probabilities, behind one interface.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{tokenize, Document, TokenSequence};
use crate::error::{Error, Result};
use crate::ngram::NgramModel;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProviderId {
    Unigram,
    Trigram,
    Neural(String),
}

impl ProviderId {
    pub fn neural(alias: impl Into<String>) -> Self {
        Self::Neural(alias.into())
    }

    pub fn is_neural(&self) -> bool {
        matches!(self, Self::Neural(_))
    }

    /// Short name used inside feature strings: `unigram`, `trigram` or the
    /// neural alias.
    pub fn short_name(&self) -> &str {
        match self {
            Self::Unigram => "unigram",
            Self::Trigram => "trigram",
            Self::Neural(a) => a,
        }
    }

    pub fn from_short_name(name: &str) -> Option<Self> {
        match name {
            "unigram" => Some(Self::Unigram),
            "trigram" => Some(Self::Trigram),
            "" => None,
            a if a.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.') => {
                Some(Self::Neural(a.to_string()))
            }
            _ => None,
        }
    }
}

impl fmt::Display for ProviderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unigram => f.write_str("unigram"),
            Self::Trigram => f.write_str("trigram"),
            Self::Neural(a) => write!(f, "neural:{a}"),
        }
    }
}

impl FromStr for ProviderId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unigram" => Ok(Self::Unigram),
            "trigram" => Ok(Self::Trigram),
            _ => match s.strip_prefix("neural:") {
                Some(alias) if !alias.is_empty() => ProviderId::from_short_name(alias)
                    .filter(ProviderId::is_neural)
                    .ok_or_else(|| Error::UnknownProvider(s.to_string())),
                _ => Err(Error::UnknownProvider(s.to_string())),
            },
        }
    }
}

impl Serialize for ProviderId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ProviderId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_provider_list(s: &str) -> Result<Vec<ProviderId>> {
    let list: Vec<ProviderId> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    check_unique(&list)?;
    Ok(list)
}

pub fn check_unique(list: &[ProviderId]) -> Result<()> {
    for (i, p) in list.iter().enumerate() {
        if list[..i].contains(p) {
            return Err(Error::Config(format!("provider {p} listed twice")));
        }
    }
    Ok(())
}

/// Providers ordered strongest first. Lists are written weakest first, so
/// neural providers come in reverse listed order, then the trigram, then
/// the unigram.
pub fn by_strength(list: &[ProviderId]) -> Vec<ProviderId> {
    let mut out: Vec<ProviderId> = list.iter().rev().filter(|p| p.is_neural()).cloned().collect();
    for p in [ProviderId::Trigram, ProviderId::Unigram] {
        if list.contains(&p) {
            out.push(p);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub provider: ProviderId,
    pub doc_id: String,
    pub probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `exp(-(1/n) * sum(ln p))`.
pub fn perplexity(pv: &ProbabilityVector) -> Result<f64> {
    perplexity_of(&pv.probs)
}

pub fn perplexity_of(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyVector);
    }
    let sum: f64 = probs.iter().map(|p| p.ln()).sum();
    Ok((-sum / probs.len() as f64).exp())
}

/// Decimal rendering with 17 significant digits; parses back to the same bits.
pub fn encode_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn decode_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::BadResponse(format!("bad decimal {s:?}")))
}

/// Tokens and natural-log probabilities as returned by one provider.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenLogprobs {
    pub tokens: Vec<String>,
    pub logprobs: Vec<f64>,
}

impl TokenLogprobs {
    pub fn probs(&self) -> Vec<f64> {
        self.logprobs
            .iter()
            .map(|lp| lp.exp().clamp(f64::MIN_POSITIVE, 1.0))
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    provider: String,
    text_sha256: String,
    tokens: Vec<String>,
    logprobs: Vec<String>,
}

/// Content-addressed store of provider outputs: one JSON file per
/// (provider, document text).
#[derive(Clone, Debug)]
pub struct ProbabilityCache {
    root: PathBuf,
}

pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ProbabilityCache {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, provider: &ProviderId, text: &str) -> PathBuf {
        let dir = provider.to_string().replace(':', "_");
        self.root.join(dir).join(format!("{}.json", text_hash(text)))
    }

    pub fn get(&self, provider: &ProviderId, text: &str) -> Result<Option<TokenLogprobs>> {
        let path = self.path_for(provider, text);
        let raw = match fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let rec: CacheRecord = serde_json::from_str(&raw)?;
        if rec.tokens.len() != rec.logprobs.len() {
            return Err(Error::BadResponse(format!("corrupt cache record {}", path.display())));
        }
        let logprobs = rec
            .logprobs
            .iter()
            .map(|s| decode_f64(s))
            .collect::<Result<_>>()?;
        Ok(Some(TokenLogprobs {
            tokens: rec.tokens,
            logprobs,
        }))
    }

    /// Atomic write: the record lands under a temporary name and is renamed
    /// into place, so concurrent readers never see partial files.
    pub fn put(&self, provider: &ProviderId, text: &str, value: &TokenLogprobs) -> Result<PathBuf> {
        let path = self.path_for(provider, text);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let rec = CacheRecord {
            provider: provider.to_string(),
            text_sha256: text_hash(text),
            tokens: value.tokens.clone(),
            logprobs: value.logprobs.iter().map(|&x| encode_f64(x)).collect(),
        };
        let tmp = tempfile::NamedTempFile::new_in(dir)?;
        fs::write(tmp.path(), serde_json::to_vec(&rec)?)?;
        tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
        Ok(path)
    }
}

/// Where a neural provider's log-probabilities come from.
pub trait LogprobSource: Send + Sync {
    fn fetch(&self, text: &str) -> Result<TokenLogprobs>;
}

/// Token bucket holding one token, refilled at `rate` per second.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn per_second(rate: f64) -> Self {
        let interval = if rate > 0.0 && rate.is_finite() {
            Duration::from_secs_f64(1.0 / rate)
        } else {
            Duration::ZERO
        };
        Self {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn acquire(&self) {
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

#[derive(Clone, Debug)]
pub struct Endpoint {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
}

#[derive(Clone, Debug)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
        }
    }
}

/// Client for completion endpoints that can echo the prompt with
/// per-token log-probabilities (`max_tokens: 0, echo: true, logprobs: 0`).
pub struct CompletionsClient {
    endpoint: Endpoint,
    retry: RetryPolicy,
    limiter: RateLimiter,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    logprobs: EchoLogprobs,
}

#[derive(Deserialize)]
struct EchoLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
}

enum Attempt {
    Done(TokenLogprobs),
    Transient(String),
}

impl CompletionsClient {
    pub fn new(endpoint: Endpoint, retry: RetryPolicy, requests_per_second: f64) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(120))
            .build();
        Self {
            endpoint,
            retry,
            limiter: RateLimiter::per_second(requests_per_second),
            agent,
        }
    }

    fn attempt(&self, text: &str) -> Result<Attempt> {
        self.limiter.acquire();
        let url = format!("{}/completions", self.endpoint.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(key) = &self.endpoint.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({
            "model": self.endpoint.model,
            "prompt": text,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
        });
        match req.send_json(body) {
            Ok(resp) => {
                let parsed: CompletionResponse = resp
                    .into_json()
                    .map_err(|e| Error::BadResponse(e.to_string()))?;
                let choice = parsed
                    .choices
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::BadResponse("no choices".into()))?;
                Ok(Attempt::Done(resolve_first_token(
                    choice.logprobs.tokens,
                    choice.logprobs.token_logprobs,
                )?))
            }
            Err(ureq::Error::Status(status, resp)) if (400..500).contains(&status) && status != 429 => {
                let body: String = resp.into_string().unwrap_or_default().chars().take(200).collect();
                Err(Error::Permanent { status, body })
            }
            Err(ureq::Error::Status(status, _)) => Ok(Attempt::Transient(format!("status {status}"))),
            Err(e) => Ok(Attempt::Transient(e.to_string())),
        }
    }
}

impl LogprobSource for CompletionsClient {
    fn fetch(&self, text: &str) -> Result<TokenLogprobs> {
        let mut last = String::new();
        for attempt in 0..self.retry.max_attempts {
            match self.attempt(text)? {
                Attempt::Done(v) => return Ok(v),
                Attempt::Transient(msg) => {
                    log::warn!(
                        "{} attempt {}/{} failed: {msg}",
                        self.endpoint.model,
                        attempt + 1,
                        self.retry.max_attempts
                    );
                    last = msg;
                    if attempt + 1 < self.retry.max_attempts {
                        std::thread::sleep(self.retry.base_delay * 2u32.pow(attempt as u32));
                    }
                }
            }
        }
        Err(Error::TransientExhausted {
            attempts: self.retry.max_attempts,
            last,
        })
    }
}

/// Fills log-probabilities the provider did not return (the first token)
/// with the median log-probability of the remaining tokens.
pub fn resolve_first_token(tokens: Vec<String>, logprobs: Vec<Option<f64>>) -> Result<TokenLogprobs> {
    if tokens.len() != logprobs.len() {
        return Err(Error::BadResponse(format!(
            "{} tokens but {} log-probabilities",
            tokens.len(),
            logprobs.len()
        )));
    }
    let mut known: Vec<f64> = logprobs.iter().flatten().copied().collect();
    if known.iter().any(|x| !x.is_finite()) {
        return Err(Error::BadResponse("non-finite log-probability".into()));
    }
    known.sort_by(f64::total_cmp);
    let fill = match known.len() {
        0 => 0.0,
        n if n % 2 == 1 => known[n / 2],
        n => (known[n / 2 - 1] + known[n / 2]) / 2.0,
    };
    Ok(TokenLogprobs {
        tokens,
        logprobs: logprobs.into_iter().map(|x| x.unwrap_or(fill)).collect(),
    })
}

/// One document scored by every configured provider, aligned to the
/// canonical tokenization.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    pub tokens: TokenSequence,
    pub vectors: BTreeMap<ProviderId, ProbabilityVector>,
}

impl Scored {
    pub fn probs(&self, provider: &ProviderId) -> Result<&[f64]> {
        self.vectors
            .get(provider)
            .map(|v| v.probs.as_slice())
            .ok_or_else(|| Error::MissingProvider(provider.to_string()))
    }
}

/// The configured providers of one detector.
pub struct ProviderSet {
    order: Vec<ProviderId>,
    ngrams: HashMap<ProviderId, Arc<NgramModel>>,
    neural: HashMap<ProviderId, Box<dyn LogprobSource>>,
    model_paths: HashMap<ProviderId, String>,
    fingerprints: HashMap<ProviderId, OnceLock<String>>,
    cache: Option<ProbabilityCache>,
}

/// Pins one provider of a trained detector; n-gram providers carry the
/// model fingerprint and, when known, the file it was loaded from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub id: ProviderId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

impl fmt::Debug for ProviderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderSet")
            .field("order", &self.order)
            .field("cache", &self.cache)
            .finish()
    }
}

impl ProviderSet {
    pub fn new() -> Self {
        Self {
            order: Vec::new(),
            ngrams: HashMap::new(),
            neural: HashMap::new(),
            model_paths: HashMap::new(),
            fingerprints: HashMap::new(),
            cache: None,
        }
    }

    pub fn with_ngram(mut self, id: ProviderId, model: Arc<NgramModel>) -> Result<Self> {
        let expected = match id {
            ProviderId::Unigram => 1,
            ProviderId::Trigram => 3,
            ProviderId::Neural(_) => return Err(Error::UnknownProvider(id.to_string())),
        };
        if model.order() != expected {
            return Err(Error::Config(format!(
                "provider {id} needs an order-{expected} model, got order {}",
                model.order()
            )));
        }
        self.push(id.clone())?;
        self.fingerprints.insert(id.clone(), OnceLock::new());
        self.ngrams.insert(id, model);
        Ok(self)
    }

    pub fn with_neural(mut self, id: ProviderId, source: Box<dyn LogprobSource>) -> Result<Self> {
        if !id.is_neural() {
            return Err(Error::UnknownProvider(id.to_string()));
        }
        self.push(id.clone())?;
        self.neural.insert(id, source);
        Ok(self)
    }

    /// Registers a neural provider that can only be served from the cache.
    pub fn with_cached_only(mut self, id: ProviderId) -> Result<Self> {
        if !id.is_neural() {
            return Err(Error::UnknownProvider(id.to_string()));
        }
        self.push(id)?;
        Ok(self)
    }

    pub fn with_cache(mut self, cache: ProbabilityCache) -> Self {
        self.cache = Some(cache);
        self
    }

    fn push(&mut self, id: ProviderId) -> Result<()> {
        if self.order.contains(&id) {
            return Err(Error::Config(format!("provider {id} configured twice")));
        }
        self.order.push(id);
        Ok(())
    }

    /// Records where an n-gram provider's model was loaded from.
    pub fn with_model_path(mut self, id: &ProviderId, path: impl Into<String>) -> Self {
        self.model_paths.insert(id.clone(), path.into());
        self
    }

    pub fn ids(&self) -> &[ProviderId] {
        &self.order
    }

    pub fn specs(&self) -> Result<Vec<ProviderSpec>> {
        self.order
            .iter()
            .map(|id| {
                Ok(ProviderSpec {
                    id: id.clone(),
                    model_path: self.model_paths.get(id).cloned(),
                    fingerprint: match (self.ngrams.get(id), self.fingerprints.get(id)) {
                        (Some(m), Some(cell)) => Some(cell.get_or_init(|| m.fingerprint().unwrap_or_default()).clone()),
                        _ => None,
                    },
                })
            })
            .collect()
    }

    pub fn cache(&self) -> Option<&ProbabilityCache> {
        self.cache.as_ref()
    }

    fn neural_logprobs(&self, id: &ProviderId, text: &str) -> Result<TokenLogprobs> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(id, text)? {
                return Ok(hit);
            }
        }
        let source = self.neural.get(id).ok_or_else(|| Error::Unreachable {
            provider: id.to_string(),
            message: "no endpoint configured and no cached record".into(),
        })?;
        let fetched = source.fetch(text)?;
        if let Some(cache) = &self.cache {
            cache.put(id, text, &fetched)?;
        }
        Ok(fetched)
    }

    /// Scores a text under every provider. The first neural provider's
    /// tokenization is canonical when one is configured; otherwise the
    /// reference tokenizer's.
    pub fn score_text(&self, doc_id: &str, text: &str) -> Result<Scored> {
        let neural_ids: Vec<&ProviderId> = self.order.iter().filter(|p| p.is_neural()).collect();
        let mut vectors = BTreeMap::new();
        let tokens = match neural_ids.split_first() {
            None => tokenize(text),
            Some((first, rest)) => {
                let canon = self.neural_logprobs(first, text)?;
                let tokens = TokenSequence::from_pieces(text, &canon.tokens)?;
                vectors.insert((*first).clone(), self.vector(first, doc_id, &canon));
                for id in rest {
                    let other = self.neural_logprobs(id, text)?;
                    if let Some(index) = first_mismatch(&canon.tokens, &other.tokens) {
                        return Err(Error::Misaligned {
                            provider: id.to_string(),
                            index,
                        });
                    }
                    vectors.insert((*id).clone(), self.vector(id, doc_id, &other));
                }
                tokens
            }
        };
        for (id, model) in &self.ngrams {
            vectors.insert(
                id.clone(),
                ProbabilityVector {
                    provider: id.clone(),
                    doc_id: doc_id.to_string(),
                    probs: model.score(&tokens),
                },
            );
        }
        Ok(Scored { tokens, vectors })
    }

    fn vector(&self, id: &ProviderId, doc_id: &str, lp: &TokenLogprobs) -> ProbabilityVector {
        ProbabilityVector {
            provider: id.clone(),
            doc_id: doc_id.to_string(),
            probs: lp.probs(),
        }
    }

    pub fn score_all(&self, doc: &Document) -> Result<Scored> {
        self.score_text(&doc.id, &doc.text)
    }

    pub fn score_document(&self, provider: &ProviderId, doc: &Document) -> Result<ProbabilityVector> {
        let mut scored = self.score_all(doc)?;
        scored
            .vectors
            .remove(provider)
            .ok_or_else(|| Error::MissingProvider(provider.to_string()))
    }

    /// Writes one cache record per provider for `doc`, including the local
    /// n-gram providers (stored as natural logs).
    pub fn record(&self, doc: &Document) -> Result<Vec<PathBuf>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Config("no cache directory configured".into()))?;
        let scored = self.score_all(doc)?;
        let mut paths = Vec::new();
        for (id, pv) in &scored.vectors {
            if id.is_neural() {
                paths.push(cache.path_for(id, &doc.text));
                continue;
            }
            let value = TokenLogprobs {
                tokens: scored.tokens.tokens.clone(),
                logprobs: pv.probs.iter().map(|p| p.ln()).collect(),
            };
            paths.push(cache.put(id, &doc.text, &value)?);
        }
        Ok(paths)
    }
}

impl Default for ProviderSet {
    fn default() -> Self {
        Self::new()
    }
}

fn first_mismatch(a: &[String], b: &[String]) -> Option<usize> {
    a.iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .or_else(|| (a.len() != b.len()).then(|| a.len().min(b.len())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    #[test]
    fn provider_names_round_trip() {
        for s in ["unigram", "trigram", "neural:davinci"] {
            assert_eq!(s.parse::<ProviderId>().unwrap().to_string(), s);
        }
        assert!("neural:".parse::<ProviderId>().is_err());
        assert!("bigram".parse::<ProviderId>().is_err());
        assert!(parse_provider_list("unigram,unigram").is_err());
        let order = by_strength(&parse_provider_list("unigram,neural:ada,trigram,neural:davinci").unwrap());
        assert_eq!(
            order.iter().map(ToString::to_string).collect::<Vec<_>>(),
            ["neural:davinci", "neural:ada", "trigram", "unigram"]
        );
    }

    #[test]
    fn perplexity_examples() {
        assert_eq!(perplexity_of(&[0.5; 7]).unwrap(), 2.0);
        assert_eq!(perplexity_of(&[1.0, 1.0]).unwrap(), 1.0);
        // exp(-(ln .1 + ln .2 + ln .4)/3) = (0.008)^(-1/3) = 5
        let p = perplexity_of(&[0.1, 0.2, 0.4]).unwrap();
        assert!((p - 5.0).abs() < 1e-12);
        assert!(matches!(perplexity_of(&[]), Err(Error::EmptyVector)));
    }

    #[test]
    fn decimal_encoding_is_exact() {
        for x in [-2.0, -1e-300, -123.456789012345678, std::f64::consts::LN_2, -0.0] {
            assert_eq!(decode_f64(&encode_f64(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn first_token_gets_median() {
        let r = resolve_first_token(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![None, Some(-1.0), Some(-3.0), Some(-2.0)],
        )
        .unwrap();
        assert_eq!(r.logprobs, vec![-2.0, -1.0, -3.0, -2.0]);
        let r = resolve_first_token(vec!["a".into(), "b".into()], vec![None, Some(-2.0)]).unwrap();
        assert_eq!(r.probs(), vec![(-2.0f64).exp(), (-2.0f64).exp()]);
    }

    struct Fixed(TokenLogprobs);
    impl LogprobSource for Fixed {
        fn fetch(&self, _: &str) -> Result<TokenLogprobs> {
            Ok(self.0.clone())
        }
    }

    fn fixed(tokens: &[&str]) -> Box<dyn LogprobSource> {
        Box::new(Fixed(TokenLogprobs {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            logprobs: vec![-1.0; tokens.len()],
        }))
    }

    #[test]
    fn misaligned_neural_provider_reports_index() {
        let set = ProviderSet::new()
            .with_neural(ProviderId::neural("a"), fixed(&["x", " y", " z", " w", " v"]))
            .unwrap()
            .with_neural(ProviderId::neural("b"), fixed(&["x", " y", " z", " w", " v", " u"]))
            .unwrap();
        let doc = Document::new("d", "x y z w v", Label::Ai);
        match set.score_all(&doc) {
            Err(Error::Misaligned { provider, index }) => {
                assert_eq!(provider, "neural:b");
                assert_eq!(index, 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uncached_offline_provider_is_unreachable() {
        let set = ProviderSet::new()
            .with_cached_only(ProviderId::neural("a"))
            .unwrap();
        let doc = Document::new("d", "x y", Label::Ai);
        assert!(matches!(set.score_all(&doc), Err(Error::Unreachable { .. })));
    }

    #[test]
    fn ngram_providers_follow_neural_tokenization() {
        let corpus = vec![tokenize("x y z"), tokenize("y z x")];
        let uni = Arc::new(NgramModel::train(1, &corpus, 0.9, 1e-3).unwrap());
        let set = ProviderSet::new()
            .with_neural(ProviderId::neural("a"), fixed(&["x", " y", " z"]))
            .unwrap()
            .with_ngram(ProviderId::Unigram, uni.clone())
            .unwrap();
        let doc = Document::new("d", "x y z", Label::Ai);
        let scored = set.score_all(&doc).unwrap();
        assert_eq!(scored.tokens.tokens, ["x", " y", " z"]);
        let u = scored.probs(&ProviderId::Unigram).unwrap();
        assert_eq!(u.len(), 3);
        // " y" is not in the n-gram vocabulary; two such types are new
        let NgramModel::Unigram(m) = uni.as_ref() else { unreachable!() };
        assert_eq!(u[1], m.prob(" y", 2));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ProbabilityCache::new(dir.path()).unwrap();
        let id = ProviderId::neural("m");
        let v = TokenLogprobs {
            tokens: vec!["a".into(), "b".into()],
            logprobs: vec![-0.1234567890123456789, -7.25],
        };
        assert!(cache.get(&id, "a b").unwrap().is_none());
        cache.put(&id, "a b", &v).unwrap();
        assert_eq!(cache.get(&id, "a b").unwrap().unwrap(), v);
    }
}
