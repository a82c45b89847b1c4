//! Structured feature space over probability vectors.
//!
//! A feature starts from one provider's vector, folds it left to right with
//! binary vector functions against other providers' vectors, and reduces the
//! result with a scalar function:
//!
//! ```text
//! var(unigram_probs > ada_probs - davinci_probs)
//!   = var(sub(gt(unigram, ada), davinci))
//! ```

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::providers::{by_strength, ProbabilityVector, ProviderId, Scored};

/// Denominators closer to zero than this are clamped to it (sign kept).
pub const DIV_EPSILON: f64 = 1e-10;
/// Window size of `avg_top25` and of the handcrafted rank windows.
pub const TOP_K: usize = 25;
/// Surprisal in bits above which a token counts as an outlier.
pub const OUTLIER_BITS: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VectorFn {
    Add,
    Sub,
    Mul,
    Div,
    Gt,
    Lt,
}

impl VectorFn {
    pub const ALL: [VectorFn; 6] = [
        VectorFn::Add,
        VectorFn::Sub,
        VectorFn::Mul,
        VectorFn::Div,
        VectorFn::Gt,
        VectorFn::Lt,
    ];

    pub fn symbol(self) -> char {
        match self {
            VectorFn::Add => '+',
            VectorFn::Sub => '-',
            VectorFn::Mul => '*',
            VectorFn::Div => '/',
            VectorFn::Gt => '>',
            VectorFn::Lt => '<',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.symbol() == c)
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, VectorFn::Add | VectorFn::Mul)
    }

    #[inline]
    pub fn apply_scalar(self, a: f64, b: f64) -> f64 {
        match self {
            VectorFn::Add => a + b,
            VectorFn::Sub => a - b,
            VectorFn::Mul => a * b,
            VectorFn::Div => a / clamp_denominator(b),
            VectorFn::Gt => f64::from(u8::from(a > b)),
            VectorFn::Lt => f64::from(u8::from(a < b)),
        }
    }
}

#[inline]
fn clamp_denominator(x: f64) -> f64 {
    if x.abs() >= DIV_EPSILON || x.is_nan() {
        x
    } else if x < 0.0 {
        -DIV_EPSILON
    } else {
        DIV_EPSILON
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarFn {
    Max,
    Min,
    Avg,
    AvgTop25,
    Len,
    L2,
    Var,
}

impl ScalarFn {
    pub const ALL: [ScalarFn; 7] = [
        ScalarFn::Max,
        ScalarFn::Min,
        ScalarFn::Avg,
        ScalarFn::AvgTop25,
        ScalarFn::Len,
        ScalarFn::L2,
        ScalarFn::Var,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScalarFn::Max => "max",
            ScalarFn::Min => "min",
            ScalarFn::Avg => "avg",
            ScalarFn::AvgTop25 => "avg_top25",
            ScalarFn::Len => "len",
            ScalarFn::L2 => "l2",
            ScalarFn::Var => "var",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

pub fn apply_vector_fn(f: VectorFn, p1: &[f64], p2: &[f64]) -> Result<Vec<f64>> {
    if p1.len() != p2.len() {
        return Err(Error::LengthMismatch(p1.len(), p2.len()));
    }
    if p1.is_empty() {
        return Err(Error::EmptyVector);
    }
    Ok(p1.iter().zip(p2).map(|(&a, &b)| f.apply_scalar(a, b)).collect())
}

fn mean(p: &[f64]) -> f64 {
    p.iter().sum::<f64>() / p.len() as f64
}

pub fn apply_scalar_fn(f: ScalarFn, p: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::EmptyVector);
    }
    Ok(match f {
        ScalarFn::Max => p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ScalarFn::Min => p.iter().copied().fold(f64::INFINITY, f64::min),
        ScalarFn::Avg => mean(p),
        ScalarFn::AvgTop25 => {
            if p.len() <= TOP_K {
                mean(p)
            } else {
                let mut sorted = p.to_vec();
                sorted.select_nth_unstable_by(TOP_K - 1, f64::total_cmp);
                let lowest = &mut sorted[..TOP_K];
                lowest.sort_unstable_by(f64::total_cmp);
                mean(lowest)
            }
        }
        ScalarFn::Len => p.len() as f64,
        ScalarFn::L2 => p.iter().map(|x| x * x).sum::<f64>().sqrt(),
        ScalarFn::Var => {
            let mu = mean(p);
            p.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / p.len() as f64
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FeatureExpr {
    pub base: ProviderId,
    pub steps: Vec<(VectorFn, ProviderId)>,
    pub scalar: ScalarFn,
}

impl FeatureExpr {
    pub fn new(base: ProviderId, steps: Vec<(VectorFn, ProviderId)>, scalar: ScalarFn) -> Self {
        Self { base, steps, scalar }
    }

    pub fn depth(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn providers(&self) -> impl Iterator<Item = &ProviderId> {
        std::iter::once(&self.base).chain(self.steps.iter().map(|(_, p)| p))
    }

    /// Folds the vector steps over `vectors`.
    pub fn chain(&self, vectors: &impl VectorLookup) -> Result<Vec<f64>> {
        let base = vectors.lookup(&self.base)?;
        if base.is_empty() {
            return Err(Error::EmptyVector);
        }
        let mut acc = base.to_vec();
        for (f, operand) in &self.steps {
            let rhs = vectors.lookup(operand)?;
            if rhs.len() != acc.len() {
                return Err(Error::LengthMismatch(acc.len(), rhs.len()));
            }
            for (a, &b) in acc.iter_mut().zip(rhs) {
                *a = f.apply_scalar(*a, b);
            }
        }
        Ok(acc)
    }
}

impl fmt::Display for FeatureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}_probs", self.scalar.name(), self.base.short_name())?;
        for (vf, p) in &self.steps {
            write!(f, " {} {}_probs", vf.symbol(), p.short_name())?;
        }
        f.write_str(")")
    }
}

impl PartialOrd for FeatureExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FeatureExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}

impl Serialize for FeatureExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureExpr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_feature(&s).map_err(serde::de::Error::custom)
    }
}

impl FromStr for FeatureExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_feature(s)
    }
}

pub fn format_feature(e: &FeatureExpr) -> String {
    e.to_string()
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            chars: src.chars().enumerate().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.chars.get(self.pos).map_or(self.chars.len(), |&(c, _)| c)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> (usize, String) {
        self.skip_ws();
        let col = self.column();
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' {
                s.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        (col, s)
    }

    fn error<T>(&self, column: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            column,
            message: message.into(),
        })
    }

    fn provider(&mut self) -> Result<ProviderId> {
        let (col, name) = self.ident();
        if name.is_empty() {
            return self.error(col, "expected a provider vector");
        }
        name.strip_suffix("_probs")
            .and_then(ProviderId::from_short_name)
            .map_or_else(|| self.error(col, format!("unknown provider {name:?}")), Ok)
    }
}

/// Parses `scalar(base_probs op operand_probs ...)`. Operators apply
/// strictly left to right. Error columns are 0-based character offsets.
pub fn parse_feature(s: &str) -> Result<FeatureExpr> {
    let mut cur = Cursor::new(s);
    let (col, name) = cur.ident();
    let scalar = match ScalarFn::from_name(&name) {
        Some(f) => f,
        None => return cur.error(col, format!("unknown scalar function {name:?}")),
    };
    cur.skip_ws();
    if cur.peek() != Some('(') {
        return cur.error(cur.column(), "expected '('");
    }
    cur.pos += 1;
    let base = cur.provider()?;
    let mut steps = Vec::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            Some(')') => {
                cur.pos += 1;
                break;
            }
            Some(c) => match VectorFn::from_symbol(c) {
                Some(f) => {
                    cur.pos += 1;
                    steps.push((f, cur.provider()?));
                }
                None => return cur.error(cur.column(), format!("unknown operator {c:?}")),
            },
            None => return cur.error(cur.column(), "expected ')'"),
        }
    }
    cur.skip_ws();
    if cur.peek().is_some() {
        return cur.error(cur.column(), "trailing input");
    }
    Ok(FeatureExpr { base, steps, scalar })
}

/// Source of per-provider probability vectors.
pub trait VectorLookup {
    fn lookup(&self, id: &ProviderId) -> Result<&[f64]>;
}

impl VectorLookup for Scored {
    fn lookup(&self, id: &ProviderId) -> Result<&[f64]> {
        self.probs(id)
    }
}

impl VectorLookup for BTreeMap<ProviderId, ProbabilityVector> {
    fn lookup(&self, id: &ProviderId) -> Result<&[f64]> {
        self.get(id)
            .map(|v| v.probs.as_slice())
            .ok_or_else(|| Error::MissingProvider(id.to_string()))
    }
}

impl VectorLookup for HashMap<ProviderId, Vec<f64>> {
    fn lookup(&self, id: &ProviderId) -> Result<&[f64]> {
        self.get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingProvider(id.to_string()))
    }
}

impl VectorLookup for BTreeMap<ProviderId, Vec<f64>> {
    fn lookup(&self, id: &ProviderId) -> Result<&[f64]> {
        self.get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingProvider(id.to_string()))
    }
}

/// Value of `e` on one document; non-finite results come back as NaN.
pub fn evaluate_feature(e: &FeatureExpr, vectors: &impl VectorLookup) -> Result<f64> {
    let v = apply_scalar_fn(e.scalar, &e.chain(vectors)?)?;
    Ok(if v.is_finite() { v } else { f64::NAN })
}

/// Enumerates every feature up to `max_depth` (vectors combined, counting
/// the base). Providers are ranked strongest first. Each step takes the
/// previous operand (the base on the first step) and a different operand:
/// division may use any other provider, while the remaining functions only
/// take an operand ranked stronger than the previous one, so each
/// unordered pair is visited once. The result is sorted by canonical string.
pub fn enumerate_features(providers: &[ProviderId], max_depth: usize) -> Result<Vec<FeatureExpr>> {
    if max_depth < 1 {
        return Err(Error::InvalidDepth(max_depth));
    }
    if providers.is_empty() {
        return Err(Error::Config("no providers to enumerate".into()));
    }
    crate::providers::check_unique(providers)?;
    let ranked = by_strength(providers);
    let mut out = Vec::new();
    for base in 0..ranked.len() {
        let mut steps = Vec::new();
        expand(&ranked, base, base, &mut steps, max_depth, &mut out);
    }
    let mut keyed: Vec<(String, FeatureExpr)> = out.into_iter().map(|e| (e.to_string(), e)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    Ok(keyed.into_iter().map(|(_, e)| e).collect())
}

fn expand(
    ranked: &[ProviderId],
    base: usize,
    prev: usize,
    steps: &mut Vec<(VectorFn, usize)>,
    max_depth: usize,
    out: &mut Vec<FeatureExpr>,
) {
    for scalar in ScalarFn::ALL {
        out.push(FeatureExpr {
            base: ranked[base].clone(),
            steps: steps.iter().map(|&(f, j)| (f, ranked[j].clone())).collect(),
            scalar,
        });
    }
    if steps.len() + 1 >= max_depth {
        return;
    }
    for f in VectorFn::ALL {
        for operand in 0..ranked.len() {
            let allowed = if f == VectorFn::Div {
                operand != prev
            } else {
                operand < prev
            };
            if allowed {
                steps.push((f, operand));
                expand(ranked, base, operand, steps, max_depth, out);
                steps.pop();
            }
        }
    }
}

/// Candidate features grouped by their shared vector chain, so each chain
/// is folded once per document.
#[derive(Clone, Debug)]
pub struct FeatureBank {
    features: Vec<FeatureExpr>,
    chains: Vec<(usize, Vec<(ScalarFn, usize)>)>,
}

impl FeatureBank {
    pub fn new(features: Vec<FeatureExpr>) -> Self {
        let mut by_chain: BTreeMap<(ProviderId, Vec<(VectorFn, ProviderId)>), (usize, Vec<(ScalarFn, usize)>)> =
            BTreeMap::new();
        for (i, e) in features.iter().enumerate() {
            by_chain
                .entry((e.base.clone(), e.steps.clone()))
                .or_insert_with(|| (i, Vec::new()))
                .1
                .push((e.scalar, i));
        }
        Self {
            features,
            chains: by_chain.into_values().collect(),
        }
    }

    pub fn features(&self) -> &[FeatureExpr] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// All feature values for one document, in feature order.
    pub fn evaluate(&self, vectors: &impl VectorLookup) -> Result<Vec<f64>> {
        let mut row = vec![f64::NAN; self.features.len()];
        for (repr, members) in &self.chains {
            let chained = self.features[*repr].chain(vectors)?;
            for &(scalar, i) in members {
                let v = apply_scalar_fn(scalar, &chained)?;
                row[i] = if v.is_finite() { v } else { f64::NAN };
            }
        }
        Ok(row)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandcraftedFeatures {
    pub outlier_count: f64,
    pub avg_top25_largest: f64,
    pub avg_rank25_50_largest: f64,
    pub strong_minus_weak_top25: f64,
    pub strong_minus_weak_25_50: f64,
    pub avg_len_25_longest_words: f64,
    pub avg_len_25_50_longest_words: f64,
}

impl HandcraftedFeatures {
    pub const NAMES: [&'static str; 7] = [
        "hc:outlier_count",
        "hc:avg_top25_largest",
        "hc:avg_rank25_50_largest",
        "hc:strong_minus_weak_top25",
        "hc:strong_minus_weak_25_50",
        "hc:avg_len_25_longest_words",
        "hc:avg_len_25_50_longest_words",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.outlier_count,
            self.avg_top25_largest,
            self.avg_rank25_50_largest,
            self.strong_minus_weak_top25,
            self.strong_minus_weak_25_50,
            self.avg_len_25_longest_words,
            self.avg_len_25_50_longest_words,
        ]
    }
}

/// Which providers play the strong and weak roles of the handcrafted
/// difference features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandcraftedRoles {
    pub strong: ProviderId,
    pub weak: ProviderId,
}

impl HandcraftedRoles {
    /// Strongest provider and the next one down (itself if alone).
    pub fn default_for(providers: &[ProviderId]) -> Result<Self> {
        let ranked = by_strength(providers);
        let strong = ranked.first().cloned().ok_or(Error::NoFeatures)?;
        let weak = ranked.get(1).cloned().unwrap_or_else(|| strong.clone());
        Ok(Self { strong, weak })
    }
}

/// Mean of the entries ranked `from..to` in descending order (0-based,
/// truncated to the vector); 0 when the window is empty.
fn window_of_largest(values: &[f64], from: usize, to: usize) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let end = to.min(sorted.len());
    if from >= end {
        return 0.0;
    }
    mean(&sorted[from..end])
}

pub fn handcrafted(strong: &[f64], weak: &[f64], word_lengths: &[usize]) -> Result<HandcraftedFeatures> {
    if strong.is_empty() {
        return Err(Error::EmptyVector);
    }
    if strong.len() != weak.len() {
        return Err(Error::LengthMismatch(strong.len(), weak.len()));
    }
    let diff: Vec<f64> = strong.iter().zip(weak).map(|(d, a)| d - a).collect();
    let lengths: Vec<f64> = word_lengths.iter().map(|&l| l as f64).collect();
    Ok(HandcraftedFeatures {
        outlier_count: strong.iter().filter(|p| -p.log2() > OUTLIER_BITS).count() as f64,
        avg_top25_largest: window_of_largest(strong, 0, TOP_K),
        avg_rank25_50_largest: window_of_largest(strong, TOP_K, 2 * TOP_K),
        strong_minus_weak_top25: window_of_largest(&diff, 0, TOP_K),
        strong_minus_weak_25_50: window_of_largest(&diff, TOP_K, 2 * TOP_K),
        avg_len_25_longest_words: window_of_largest(&lengths, 0, TOP_K),
        avg_len_25_50_longest_words: window_of_largest(&lengths, TOP_K, 2 * TOP_K),
    })
}

pub fn handcrafted_for(
    roles: &HandcraftedRoles,
    vectors: &impl VectorLookup,
    word_lengths: &[usize],
) -> Result<HandcraftedFeatures> {
    handcrafted(vectors.lookup(&roles.strong)?, vectors.lookup(&roles.weak)?, word_lengths)
}
