//! Feature selection, the logistic classifier and the detector artifact.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Document, Label, Split};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use crate::error::{Error, Result};
use crate::eval::f1_score;
use crate::features::{enumerate_features, handcrafted_for, FeatureBank, FeatureExpr, HandcraftedFeatures, HandcraftedRoles};
pub use crate::providers::ProviderSpec;
use crate::providers::{by_strength, ProviderId, ProviderSet, Scored};
use crate::{into_par_iter, par_iter};

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_MAX_K: usize = 10;
pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const STD_FLOOR: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

const ARTIFACT_FORMAT: &str = "specter-detector";
const ARTIFACT_VERSION: u32 = 1;

/// Serde adapters writing floats as 17-significant-digit decimal strings.
mod dec {
    use crate::providers::{decode_f64, encode_f64};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_f64(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decode_f64(&s).map_err(serde::de::Error::custom)
    }

    pub mod vec {
        use super::*;
        use serde::ser::SerializeSeq;

        pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for x in xs {
                seq.serialize_element(&encode_f64(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<String>::deserialize(d)?
                .iter()
                .map(|s| decode_f64(s).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

/// Rows are documents; labels are 0 (human) and 1 (ai).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn has_nan(&self) -> bool {
        self.rows.iter().flatten().any(|x| !x.is_finite())
    }
}

pub fn label_bit(label: Label) -> u8 {
    u8::from(label == Label::Ai)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    #[serde(with = "dec::vec")]
    pub mean: Vec<f64>,
    #[serde(with = "dec::vec")]
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in rows {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in rows {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    #[serde(with = "dec::vec")]
    pub weights: Vec<f64>,
    #[serde(with = "dec")]
    pub bias: f64,
    #[serde(with = "dec")]
    pub c: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(-m))` without overflow.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn signed(y: u8) -> f64 {
    if y == 1 {
        1.0
    } else {
        -1.0
    }
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

impl LogisticModel {
    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(&self.weights, row) + self.bias
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}

/// `0.5 * |w|^2 + C * sum(ln(1 + exp(-y (w.x + b))))`, labels mapped to ±1.
pub fn objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[u8], c: f64) -> f64 {
    let reg = 0.5 * dot(w, w);
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| log1p_exp_neg(signed(yi) * (dot(w, xi) + b)))
        .sum();
    reg + c * loss
}

/// Gradient of [`objective`] with respect to `(w, b)`.
pub fn gradient(w: &[f64], b: f64, x: &[Vec<f64>], y: &[u8], c: f64) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let s = signed(yi);
        let coef = -c * s * sigmoid(-s * (dot(w, xi) + b));
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += coef * v;
        }
        gb += coef;
    }
    (gw, gb)
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major, n x n).
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    true
}

/// L2-regularized logistic regression (unpenalized bias) by damped Newton
/// iterations until the gradient's max-norm is at most 1e-6.
pub fn train_logreg(x: &[Vec<f64>], y: &[u8], c: f64) -> Result<LogisticModel> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if !(y.contains(&0) && y.contains(&1)) {
        return Err(Error::SingleClass);
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite training input".into()));
    }
    let d = x[0].len();
    let n = d + 1;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut f = objective(&w, b, x, y, c);

    for _ in 0..200 {
        let (gw, gb) = gradient(&w, b, x, y, c);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax <= GRADIENT_TOLERANCE {
            break;
        }
        let mut h = vec![0.0; n * n];
        for i in 0..d {
            h[i * n + i] = 1.0;
        }
        for xi in x {
            let p = sigmoid(dot(&w, xi) + b);
            let s = c * p * (1.0 - p);
            for i in 0..d {
                let si = s * xi[i];
                for j in 0..=i {
                    h[i * n + j] += si * xi[j];
                }
                h[d * n + i] += si;
            }
            h[d * n + d] += s;
        }
        for i in 0..n {
            for j in 0..i {
                h[j * n + i] = h[i * n + j];
            }
        }
        let mut g: Vec<f64> = gw.iter().copied().chain(std::iter::once(gb)).collect();
        let mut step: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut damping = 0.0;
        loop {
            let mut a = h.clone();
            for i in 0..n {
                a[i * n + i] += damping;
            }
            let mut rhs = step.clone();
            if cholesky_solve(&mut a, &mut rhs, n) {
                step = rhs;
                break;
            }
            damping = if damping == 0.0 { 1e-10 } else { damping * 10.0 };
            if damping > 1e6 {
                // fall back to steepest descent
                step = g.iter().map(|v| -v).collect();
                break;
            }
        }
        let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let w_new: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let b_new = b + t * step[d];
            let f_new = objective(&w_new, b_new, x, y, c);
            if f_new <= f + 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                f = f_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No decrease representable in double precision.
            g.clear();
            break;
        }
    }
    Ok(LogisticModel { weights: w, bias: b, c })
}

/// Candidate feature values for one split, plus the handcrafted block.
#[derive(Clone, Debug, Default)]
pub struct CandidateValues {
    pub rows: Vec<Vec<f64>>,
    pub handcrafted: Vec<[f64; 7]>,
    pub labels: Vec<u8>,
}

impl CandidateValues {
    fn design(&self, columns: &[usize], with_handcrafted: bool) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let mut out: Vec<f64> = columns.iter().map(|&c| row[c]).collect();
                if with_handcrafted {
                    out.extend_from_slice(&self.handcrafted[r]);
                }
                out
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionOptions {
    pub max_k: usize,
    pub epsilon: f64,
    pub c: f64,
    pub handcrafted: bool,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            max_k: DEFAULT_MAX_K,
            epsilon: DEFAULT_EPSILON,
            c: DEFAULT_C,
            handcrafted: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Indices into the candidate list, in selection order.
    pub indices: Vec<usize>,
    pub features: Vec<FeatureExpr>,
    /// Validation F1 after each accepted step.
    pub val_f1: Vec<f64>,
}

/// Validation F1 of a model trained on the given columns.
fn column_set_f1(
    columns: &[usize],
    train: &CandidateValues,
    val: &CandidateValues,
    opts: &SelectionOptions,
) -> Result<f64> {
    let xtr = train.design(columns, opts.handcrafted);
    let scaler = Scaler::fit(&xtr);
    let ztr: Vec<Vec<f64>> = xtr.iter().map(|r| scaler.transform(r)).collect();
    let model = train_logreg(&ztr, &train.labels, opts.c)?;
    let preds: Vec<u8> = val
        .design(columns, opts.handcrafted)
        .iter()
        .map(|r| u8::from(model.probability(&scaler.transform(r)) >= DEFAULT_THRESHOLD))
        .collect();
    Ok(f1_score(&preds, &val.labels))
}

/// Greedy forward selection on validation F1. A step is accepted when it
/// improves on the previous step (0 before the first) by at least
/// `epsilon`; equal scores go to the smaller canonical string.
pub fn forward_select(
    candidates: &[FeatureExpr],
    train: &CandidateValues,
    val: &CandidateValues,
    opts: &SelectionOptions,
) -> Result<Selection> {
    let mut selection = Selection {
        indices: Vec::new(),
        features: Vec::new(),
        val_f1: Vec::new(),
    };
    if opts.max_k == 0 {
        return Ok(selection);
    }
    if candidates.is_empty() {
        return Err(Error::NoFeatures);
    }
    if !(train.labels.contains(&0) && train.labels.contains(&1)) {
        return Err(Error::SingleClass);
    }
    let finite = |rows: &[Vec<f64>], c: usize| rows.iter().all(|r| r[c].is_finite());
    let mut pool: Vec<usize> = (0..candidates.len())
        .filter(|&c| finite(&train.rows, c) && finite(&val.rows, c))
        .collect();
    if pool.is_empty() {
        return Err(Error::AllCandidatesNan);
    }
    let names: Vec<String> = candidates.iter().map(ToString::to_string).collect();
    pool.sort_by(|&a, &b| names[a].cmp(&names[b]));

    let mut current = 0.0;
    while selection.indices.len() < opts.max_k && !pool.is_empty() {
        let scores: Vec<Result<f64>> = par_iter!(pool)
            .map(|&cand| {
                let mut cols = selection.indices.clone();
                cols.push(cand);
                column_set_f1(&cols, train, val, opts)
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (pos, score) in scores.into_iter().enumerate() {
            let score = score?;
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((pos, score));
            }
        }
        let (pos, score) = best.expect("non-empty pool");
        if score - current < opts.epsilon {
            break;
        }
        let chosen = pool.remove(pos);
        log::debug!("selected {} (val F1 {score:.4})", names[chosen]);
        selection.indices.push(chosen);
        selection.features.push(candidates[chosen].clone());
        selection.val_f1.push(score);
        current = score;
    }
    Ok(selection)
}

/// How structured features are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SelectionStrategy {
    Forward,
    /// `k` candidates drawn uniformly without replacement.
    Random { k: usize },
    /// No structured features at all.
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub providers: Vec<ProviderId>,
    pub depth: usize,
    pub max_k: usize,
    pub epsilon: f64,
    pub c: f64,
    pub handcrafted: bool,
    pub roles: Option<HandcraftedRoles>,
    pub threshold: f64,
    pub strategy: SelectionStrategy,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            providers: vec![ProviderId::Unigram, ProviderId::Trigram],
            depth: DEFAULT_DEPTH,
            max_k: DEFAULT_MAX_K,
            epsilon: DEFAULT_EPSILON,
            c: DEFAULT_C,
            handcrafted: true,
            roles: None,
            threshold: DEFAULT_THRESHOLD,
            strategy: SelectionStrategy::Forward,
            seed: 0,
        }
    }
}

impl DetectorConfig {
    pub fn roles(&self) -> Result<HandcraftedRoles> {
        match &self.roles {
            Some(r) => Ok(r.clone()),
            None => HandcraftedRoles::default_for(&self.providers),
        }
    }
}

/// A document's provider vectors with everything classification needs.
#[derive(Clone, Debug)]
pub struct ScoredDoc {
    pub scored: Scored,
    pub word_lengths: Vec<usize>,
    pub label: Label,
}

pub fn score_documents(providers: &ProviderSet, docs: &[&Document]) -> Result<Vec<ScoredDoc>> {
    par_iter!(docs)
        .map(|doc| {
            let scored = providers.score_all(doc)?;
            if scored.tokens.is_empty() {
                return Err(Error::EmptyDocument);
            }
            let word_lengths = scored.tokens.word_token_lengths(&doc.text);
            Ok(ScoredDoc {
                scored,
                word_lengths,
                label: doc.label,
            })
        })
        .collect()
}

fn candidate_values(
    bank: &FeatureBank,
    docs: &[ScoredDoc],
    roles: Option<&HandcraftedRoles>,
) -> Result<CandidateValues> {
    let rows: Vec<Result<(Vec<f64>, [f64; 7])>> = par_iter!(docs)
        .map(|d| {
            let row = bank.evaluate(&d.scored)?;
            let hc = match roles {
                Some(r) => handcrafted_for(r, &d.scored, &d.word_lengths)?.to_array(),
                None => [0.0; 7],
            };
            Ok((row, hc))
        })
        .collect();
    let mut out = CandidateValues::default();
    for (r, d) in rows.into_iter().zip(docs) {
        let (row, hc) = r?;
        out.rows.push(row);
        out.handcrafted.push(hc);
        out.labels.push(label_bit(d.label));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorArtifact {
    pub format: String,
    pub version: u32,
    pub providers: Vec<ProviderSpec>,
    pub features: Vec<FeatureExpr>,
    pub handcrafted: Option<HandcraftedRoles>,
    pub scaler: Scaler,
    pub model: LogisticModel,
    #[serde(with = "dec")]
    pub threshold: f64,
    #[serde(with = "dec::vec")]
    pub selection_val_f1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub score: f64,
    pub label: Label,
    pub features: BTreeMap<String, f64>,
}

impl DetectorArtifact {
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = self.features.iter().map(ToString::to_string).collect();
        if self.handcrafted.is_some() {
            cols.extend(HandcraftedFeatures::NAMES.iter().map(|s| s.to_string()));
        }
        cols
    }

    pub fn provider_ids(&self) -> Vec<ProviderId> {
        self.providers.iter().map(|p| p.id.clone()).collect()
    }

    /// Raw (unscaled) feature values of one scored document.
    pub fn feature_row(&self, doc: &ScoredDoc) -> Result<Vec<f64>> {
        let mut row = Vec::with_capacity(self.scaler.mean.len());
        for e in &self.features {
            row.push(crate::features::evaluate_feature(e, &doc.scored)?);
        }
        if let Some(roles) = &self.handcrafted {
            row.extend(handcrafted_for(roles, &doc.scored, &doc.word_lengths)?.to_array());
        }
        Ok(row)
    }

    pub fn classify_scored(&self, doc: &ScoredDoc) -> Result<Classification> {
        if doc.scored.tokens.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let raw = self.feature_row(doc)?;
        // Non-finite values are imputed with the training mean.
        let filled: Vec<f64> = raw
            .iter()
            .zip(&self.scaler.mean)
            .map(|(&x, &m)| if x.is_finite() { x } else { m })
            .collect();
        let score = self.model.probability(&self.scaler.transform(&filled));
        let label = if score >= self.threshold {
            Label::Ai
        } else {
            Label::Human
        };
        Ok(Classification {
            score,
            label,
            features: self.columns().into_iter().zip(raw).collect(),
        })
    }

    pub fn classify(&self, providers: &ProviderSet, doc: &Document) -> Result<Classification> {
        self.check_providers(providers)?;
        let mut scored = score_documents(providers, &[doc])?;
        self.classify_scored(&scored.remove(0))
    }

    /// Fails unless every pinned provider is available with the same model.
    pub fn check_providers(&self, providers: &ProviderSet) -> Result<()> {
        let available = providers.specs()?;
        for spec in &self.providers {
            let found = available
                .iter()
                .find(|p| p.id == spec.id)
                .ok_or_else(|| Error::MissingProvider(spec.id.to_string()))?;
            if spec.fingerprint.is_some() && spec.fingerprint != found.fingerprint {
                return Err(Error::Artifact(format!(
                    "provider {} was trained with a different model",
                    spec.id
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(s)?;
        if a.format != ARTIFACT_FORMAT || a.version != ARTIFACT_VERSION {
            return Err(Error::Artifact(format!("unsupported artifact {} v{}", a.format, a.version)));
        }
        let width = a.columns().len();
        if a.scaler.mean.len() != width || a.scaler.std.len() != width || a.model.weights.len() != width {
            return Err(Error::Artifact("column count mismatch".into()));
        }
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Scores the train and validation splits, searches features, and trains
/// the final classifier on the training split.
pub fn fit_detector(dataset: &Dataset, providers: &ProviderSet, config: &DetectorConfig) -> Result<DetectorArtifact> {
    let train: Vec<&Document> = dataset.in_split(Split::Train).filter(|d| d.label.is_labeled()).collect();
    let val: Vec<&Document> = dataset.in_split(Split::Val).filter(|d| d.label.is_labeled()).collect();
    fit_on(&train, &val, providers, config)
}

pub fn fit_on(
    train: &[&Document],
    val: &[&Document],
    providers: &ProviderSet,
    config: &DetectorConfig,
) -> Result<DetectorArtifact> {
    let train_docs = score_documents(providers, train)?;
    let val_docs = score_documents(providers, val)?;
    fit_scored(&train_docs, &val_docs, providers, config)
}

/// Same as [`fit_on`] with documents already scored.
pub fn fit_scored(
    train_docs: &[ScoredDoc],
    val_docs: &[ScoredDoc],
    providers: &ProviderSet,
    config: &DetectorConfig,
) -> Result<DetectorArtifact> {
    for p in &config.providers {
        if !providers.ids().contains(p) {
            return Err(Error::MissingProvider(p.to_string()));
        }
    }
    let has_both = |docs: &[ScoredDoc]| {
        docs.iter().any(|d| d.label == Label::Ai) && docs.iter().any(|d| d.label == Label::Human)
    };
    if !has_both(train_docs) || !has_both(val_docs) {
        return Err(Error::SingleClass);
    }
    let roles = if config.handcrafted {
        Some(config.roles()?)
    } else {
        None
    };
    let wants_search = match config.strategy {
        SelectionStrategy::Forward => config.max_k > 0,
        SelectionStrategy::Random { k } => k > 0,
        SelectionStrategy::None => false,
    };
    if !wants_search && roles.is_none() {
        return Err(Error::NoFeatures);
    }

    let (features, val_f1) = if wants_search {
        let candidates = enumerate_features(&config.providers, config.depth)?;
        match config.strategy {
            SelectionStrategy::Forward => {
                let bank = FeatureBank::new(candidates.clone());
                let tr = candidate_values(&bank, train_docs, roles.as_ref())?;
                let va = candidate_values(&bank, val_docs, roles.as_ref())?;
                let opts = SelectionOptions {
                    max_k: config.max_k,
                    epsilon: config.epsilon,
                    c: config.c,
                    handcrafted: roles.is_some(),
                };
                let sel = forward_select(&candidates, &tr, &va, &opts)?;
                (sel.features, sel.val_f1)
            }
            SelectionStrategy::Random { k } => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                let k = k.min(candidates.len());
                let mut idx = sample(&mut rng, candidates.len(), k).into_vec();
                idx.sort_unstable();
                (idx.into_iter().map(|i| candidates[i].clone()).collect(), Vec::new())
            }
            SelectionStrategy::None => unreachable!(),
        }
    } else {
        (Vec::new(), Vec::new())
    };
    if features.is_empty() && roles.is_none() {
        return Err(Error::NoFeatures);
    }

    let mut artifact = DetectorArtifact {
        format: ARTIFACT_FORMAT.into(),
        version: ARTIFACT_VERSION,
        providers: providers
            .specs()?
            .into_iter()
            .filter(|s| config.providers.contains(&s.id))
            .collect(),
        features,
        handcrafted: roles,
        scaler: Scaler {
            mean: Vec::new(),
            std: Vec::new(),
        },
        model: LogisticModel {
            weights: Vec::new(),
            bias: 0.0,
            c: config.c,
        },
        threshold: config.threshold,
        selection_val_f1: val_f1,
    };
    let matrix = artifact_matrix(&artifact, train_docs)?;
    let scaler = Scaler::fit(&matrix.rows);
    let z: Vec<Vec<f64>> = matrix.rows.iter().map(|r| scaler.transform(r)).collect();
    artifact.model = train_logreg(&z, &matrix.labels, config.c)?;
    artifact.scaler = scaler;
    Ok(artifact)
}

/// Feature matrix of `docs` under the artifact's columns. Non-finite
/// entries are an error here since the matrix feeds training.
pub fn artifact_matrix(artifact: &DetectorArtifact, docs: &[ScoredDoc]) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = into_par_iter!(0..docs.len())
        .map(|i| artifact.feature_row(&docs[i]))
        .collect::<Result<_>>()?;
    let m = FeatureMatrix {
        columns: artifact.columns(),
        rows,
        labels: docs.iter().map(|d| label_bit(d.label)).collect(),
    };
    if m.has_nan() {
        return Err(Error::AllCandidatesNan);
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ablation {
    pub name: String,
    pub config: DetectorConfig,
}

/// The ablation grid around `base`: handcrafted only, search depths 1-4,
/// provider subsets without the strongest / without any neural provider,
/// no handcrafted features, and seeded random features.
pub fn ablation_variants(base: &DetectorConfig) -> Vec<Ablation> {
    let mut out = Vec::new();
    let mut push = |name: &str, config: DetectorConfig| {
        out.push(Ablation {
            name: name.to_string(),
            config,
        })
    };
    push(
        "handcrafted_only",
        DetectorConfig {
            strategy: SelectionStrategy::None,
            handcrafted: true,
            ..base.clone()
        },
    );
    for depth in 1..=4 {
        push(&format!("depth_{depth}"), DetectorConfig { depth, ..base.clone() });
    }
    let neural: Vec<ProviderId> = by_strength(&base.providers)
        .into_iter()
        .filter(ProviderId::is_neural)
        .collect();
    if let Some(strongest) = neural.first() {
        let providers: Vec<ProviderId> = base.providers.iter().filter(|p| *p != strongest).cloned().collect();
        if !providers.is_empty() {
            push(
                "drop_strongest_neural",
                DetectorConfig {
                    providers,
                    roles: None,
                    ..base.clone()
                },
            );
        }
        let providers: Vec<ProviderId> = base.providers.iter().filter(|p| !p.is_neural()).cloned().collect();
        if !providers.is_empty() {
            push(
                "drop_all_neural",
                DetectorConfig {
                    providers,
                    roles: None,
                    ..base.clone()
                },
            );
        }
    }
    push(
        "no_handcrafted",
        DetectorConfig {
            handcrafted: false,
            ..base.clone()
        },
    );
    push(
        "random_features",
        DetectorConfig {
            strategy: SelectionStrategy::Random { k: base.max_k },
            ..base.clone()
        },
    );
    out
}
