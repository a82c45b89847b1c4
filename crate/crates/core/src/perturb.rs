//! Seeded text perturbations and robustness sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Document, Label};
use crate::detector::{score_documents, DetectorArtifact};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use crate::error::{Error, Result};
use crate::eval::compute_metrics;
use crate::par_iter;
use crate::providers::ProviderSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    CharInsert,
    CharDelete,
    CharSwap,
    SpaceEdit,
    CaseFlip,
    WordSwap,
    SynonymReplace,
    SentenceSwap,
    ParagraphSwap,
    ExternalTransform,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 10] = [
        PerturbationKind::CharInsert,
        PerturbationKind::CharDelete,
        PerturbationKind::CharSwap,
        PerturbationKind::SpaceEdit,
        PerturbationKind::CaseFlip,
        PerturbationKind::WordSwap,
        PerturbationKind::SynonymReplace,
        PerturbationKind::SentenceSwap,
        PerturbationKind::ParagraphSwap,
        PerturbationKind::ExternalTransform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::CharInsert => "char_insert",
            PerturbationKind::CharDelete => "char_delete",
            PerturbationKind::CharSwap => "char_swap",
            PerturbationKind::SpaceEdit => "space_edit",
            PerturbationKind::CaseFlip => "case_flip",
            PerturbationKind::WordSwap => "word_swap",
            PerturbationKind::SynonymReplace => "synonym_replace",
            PerturbationKind::SentenceSwap => "sentence_swap",
            PerturbationKind::ParagraphSwap => "paragraph_swap",
            PerturbationKind::ExternalTransform => "external_transform",
        }
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Perturbation(format!("unknown perturbation kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub count: usize,
    pub seed: u64,
}

/// Lowercase word to its synonyms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<String>>,
}

impl SynonymLexicon {
    /// One entry per line, `word: synonym, synonym`; `#` starts a comment.
    pub fn parse(content: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in content.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (word, rest) = line
                .split_once(':')
                .ok_or_else(|| Error::Perturbation(format!("lexicon line {}: expected `word: synonyms`", i + 1)))?;
            let word = word.trim().to_lowercase();
            let syns = entries.entry(word.clone()).or_default();
            for s in rest.split(',') {
                let s = s.trim().to_lowercase();
                if !s.is_empty() && s != word && !syns.contains(&s) {
                    syns.push(s);
                }
            }
        }
        entries.retain(|_, v| !v.is_empty());
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn synonyms(&self, word: &str) -> Option<&[String]> {
        self.entries.get(&word.to_lowercase()).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Resources some perturbation kinds need.
#[derive(Clone, Copy, Debug, Default)]
pub struct PerturbContext<'a> {
    pub lexicon: Option<&'a SynonymLexicon>,
    /// Shell command mapping stdin to stdout.
    pub command: Option<&'a str>,
}

/// Text split into alternating units and separators:
/// `prefix, unit0, sep0, unit1, sep1, ..., unitN, sepN`.
struct Segmented {
    prefix: String,
    units: Vec<(String, String)>,
}

impl Segmented {
    fn join(&self) -> String {
        let mut s = self.prefix.clone();
        for (u, sep) in &self.units {
            s.push_str(u);
            s.push_str(sep);
        }
        s
    }

    /// Swaps unit `i` with unit `i + 1` for each site, in ascending order.
    fn swap_adjacent(&mut self, sites: &[usize]) {
        for &i in sites {
            let (a, b) = (self.units[i].0.clone(), self.units[i + 1].0.clone());
            self.units[i].0 = b;
            self.units[i + 1].0 = a;
        }
    }

    fn from_cuts(text: &str, cuts: &[(usize, usize)]) -> Self {
        // `cuts` are (start, end) byte ranges of separators, in order.
        let lead = text.len() - text.trim_start().len();
        let mut units = Vec::new();
        let mut pos = lead;
        for &(s, e) in cuts {
            if s <= pos {
                continue;
            }
            units.push((text[pos..s].to_string(), text[s..e].to_string()));
            pos = e;
        }
        if pos < text.len() {
            let rest = &text[pos..];
            let body = rest.trim_end();
            units.push((body.to_string(), rest[body.len()..].to_string()));
        }
        Self {
            prefix: text[..lead].to_string(),
            units,
        }
    }
}

fn whitespace_runs(text: &str) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, text.len()));
    }
    runs
}

fn words(text: &str) -> Segmented {
    Segmented::from_cuts(text, &whitespace_runs(text))
}

/// Sentences end after `.`, `!` or `?` followed by whitespace and then an
/// uppercase letter (or the end of the text).
pub fn sentences(text: &str) -> Vec<String> {
    sentence_segments(text).units.into_iter().map(|(u, _)| u).collect()
}

fn sentence_segments(text: &str) -> Segmented {
    let cuts: Vec<(usize, usize)> = whitespace_runs(text)
        .into_iter()
        .filter(|&(s, e)| {
            let before = text[..s].chars().next_back();
            let after = text[e..].chars().next();
            matches!(before, Some('.' | '!' | '?')) && after.map_or(true, char::is_uppercase)
        })
        .collect();
    Segmented::from_cuts(text, &cuts)
}

/// Paragraphs are separated by whitespace containing a blank line.
pub fn paragraphs(text: &str) -> Vec<String> {
    paragraph_segments(text).units.into_iter().map(|(u, _)| u).collect()
}

fn paragraph_segments(text: &str) -> Segmented {
    let cuts: Vec<(usize, usize)> = whitespace_runs(text)
        .into_iter()
        .filter(|&(s, e)| text[s..e].matches('\n').count() >= 2)
        .collect();
    Segmented::from_cuts(text, &cuts)
}

/// Number of eligible sites of `kind` in `text`.
pub fn site_count(kind: PerturbationKind, text: &str, lexicon: Option<&SynonymLexicon>) -> usize {
    let chars = text.chars().count();
    match kind {
        PerturbationKind::CharInsert => chars + 1,
        PerturbationKind::CharDelete => text.chars().filter(|c| !c.is_whitespace()).count(),
        PerturbationKind::CharSwap => chars.saturating_sub(1),
        PerturbationKind::SpaceEdit => tokenize(text).len().saturating_sub(1),
        PerturbationKind::CaseFlip => text.chars().filter(|c| c.is_alphabetic()).count(),
        PerturbationKind::WordSwap => words(text).units.len().saturating_sub(1),
        PerturbationKind::SynonymReplace => synonym_sites(text, lexicon).len(),
        PerturbationKind::SentenceSwap => sentence_segments(text).units.len().saturating_sub(1),
        PerturbationKind::ParagraphSwap => paragraph_segments(text).units.len().saturating_sub(1),
        PerturbationKind::ExternalTransform => usize::MAX,
    }
}

fn synonym_sites(text: &str, lexicon: Option<&SynonymLexicon>) -> Vec<(usize, usize)> {
    let Some(lex) = lexicon else {
        return Vec::new();
    };
    let ts = tokenize(text);
    ts.spans
        .iter()
        .filter(|&&(s, e)| {
            let w = &text[s..e];
            w.chars().all(char::is_alphabetic) && lex.synonyms(w).is_some()
        })
        .copied()
        .collect()
}

fn match_case(original: &str, replacement: &str) -> String {
    let mut chars = original.chars();
    let first_upper = chars.next().is_some_and(char::is_uppercase);
    let all_upper = original.chars().count() > 1 && original.chars().all(char::is_uppercase);
    if all_upper {
        replacement.to_uppercase()
    } else if first_upper {
        let mut r = replacement.chars();
        r.next()
            .map(|c| c.to_uppercase().chain(r).collect())
            .unwrap_or_default()
    } else {
        replacement.to_string()
    }
}

fn run_external(command: &str, text: &str, seed: u64) -> Result<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .env("SPECTER_SEED", seed.to_string())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let input = text.to_string();
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let out = child.wait_with_output()?;
    // A command that ignores its input may close the pipe early.
    let _ = writer.join();
    if !out.status.success() {
        return Err(Error::Perturbation(format!(
            "external transform exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    String::from_utf8(out.stdout).map_err(|e| Error::Perturbation(format!("external transform output: {e}")))
}

/// Applies `p.count` edits at distinct, uniformly drawn sites (all sites
/// when fewer are available). The same inputs always give the same text.
pub fn perturb(text: &str, p: &Perturbation, ctx: &PerturbContext<'_>) -> Result<String> {
    if p.count == 0 {
        return Ok(text.to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    if p.kind == PerturbationKind::ExternalTransform {
        let command = ctx
            .command
            .ok_or_else(|| Error::Perturbation("external_transform needs a command".into()))?;
        let mut out = text.to_string();
        for pass in 0..p.count {
            out = run_external(command, &out, p.seed.wrapping_add(pass as u64))?;
        }
        return Ok(out);
    }
    if p.kind == PerturbationKind::SynonymReplace && ctx.lexicon.is_none() {
        return Err(Error::Perturbation("synonym_replace needs a lexicon".into()));
    }
    let available = site_count(p.kind, text, ctx.lexicon);
    let mut sites = sample(&mut rng, available, p.count.min(available)).into_vec();
    sites.sort_unstable();
    apply_at_sites(text, p.kind, &sites, &mut rng, ctx)
}

/// Applies one edit of `kind` at each of the given sorted, distinct site
/// indices; `rng` supplies inserted characters and synonym choices.
pub fn apply_at_sites(
    text: &str,
    kind: PerturbationKind,
    sites: &[usize],
    rng: &mut impl Rng,
    ctx: &PerturbContext<'_>,
) -> Result<String> {
    let available = site_count(kind, text, ctx.lexicon);
    if let Some(&bad) = sites.iter().find(|&&s| s >= available) {
        return Err(Error::Perturbation(format!("{kind}: site {bad} out of range ({available} sites)")));
    }
    let mut chars: Vec<char> = text.chars().collect();
    let out = match kind {
        PerturbationKind::CharInsert => {
            let letters: Vec<char> = sites.iter().map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            for (&s, &c) in sites.iter().zip(&letters).rev() {
                chars.insert(s, c);
            }
            chars.into_iter().collect()
        }
        PerturbationKind::CharDelete => {
            let eligible: Vec<usize> = (0..chars.len()).filter(|&i| !chars[i].is_whitespace()).collect();
            for &s in sites.iter().rev() {
                chars.remove(eligible[s]);
            }
            chars.into_iter().collect()
        }
        PerturbationKind::CharSwap => {
            for &s in sites {
                chars.swap(s, s + 1);
            }
            chars.into_iter().collect()
        }
        PerturbationKind::CaseFlip => {
            let eligible: Vec<usize> = (0..chars.len()).filter(|&i| chars[i].is_alphabetic()).collect();
            let mut out = String::with_capacity(text.len());
            let flip: std::collections::HashSet<usize> = sites.iter().map(|&s| eligible[s]).collect();
            for (i, c) in chars.iter().enumerate() {
                if !flip.contains(&i) {
                    out.push(*c);
                } else if c.is_uppercase() {
                    out.extend(c.to_lowercase());
                } else {
                    out.extend(c.to_uppercase());
                }
            }
            out
        }
        PerturbationKind::SpaceEdit => {
            let ts = tokenize(text);
            let mut out = text.to_string();
            let choices: Vec<(bool, char)> = sites
                .iter()
                .map(|_| (rng.gen_bool(0.5), if rng.gen_bool(0.5) { ' ' } else { '\n' }))
                .collect();
            for (&s, &(delete, ch)) in sites.iter().zip(&choices).rev() {
                let at = ts.spans[s].1;
                let next = text[at..].chars().next();
                if delete && next.is_some_and(char::is_whitespace) {
                    let len = next.map_or(0, char::len_utf8);
                    out.replace_range(at..at + len, "");
                } else {
                    out.insert(at, ch);
                }
            }
            out
        }
        PerturbationKind::WordSwap => {
            let mut seg = words(text);
            seg.swap_adjacent(sites);
            seg.join()
        }
        PerturbationKind::SentenceSwap => {
            let mut seg = sentence_segments(text);
            seg.swap_adjacent(sites);
            seg.join()
        }
        PerturbationKind::ParagraphSwap => {
            let mut seg = paragraph_segments(text);
            seg.swap_adjacent(sites);
            seg.join()
        }
        PerturbationKind::SynonymReplace => {
            let lex = ctx
                .lexicon
                .ok_or_else(|| Error::Perturbation("synonym_replace needs a lexicon".into()))?;
            let spans = synonym_sites(text, Some(lex));
            let picks: Vec<(usize, String)> = sites
                .iter()
                .map(|&s| {
                    let (a, b) = spans[s];
                    let word = &text[a..b];
                    let syns = lex.synonyms(word).unwrap_or_default();
                    (s, match_case(word, &syns[rng.gen_range(0..syns.len())]))
                })
                .collect();
            let mut out = text.to_string();
            for (s, rep) in picks.into_iter().rev() {
                let (a, b) = spans[s];
                out.replace_range(a..b, &rep);
            }
            out
        }
        PerturbationKind::ExternalTransform => {
            return Err(Error::Perturbation("external_transform has no sites".into()));
        }
    };
    Ok(out)
}

/// One point of a robustness curve. `metric` is recall when every document
/// is ai-labeled and F1 otherwise, averaged over seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub kind: PerturbationKind,
    pub count: usize,
    pub rate_per_100_tokens: f64,
    pub metric: f64,
    pub n: usize,
}

fn doc_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Perturbs every document at each count and seed, reclassifies it and
/// aggregates.
pub fn robustness_sweep(
    artifact: &DetectorArtifact,
    providers: &ProviderSet,
    docs: &[&Document],
    kind: PerturbationKind,
    counts: &[usize],
    seeds: &[u64],
    ctx: &PerturbContext<'_>,
) -> Result<Vec<CurvePoint>> {
    if docs.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("robustness sweep needs documents and seeds".into()));
    }
    artifact.check_providers(providers)?;
    let all_ai = docs.iter().all(|d| d.label == Label::Ai);
    let golds: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let lengths: Vec<usize> = docs.iter().map(|d| tokenize(&d.text).len().max(1)).collect();
    let mut curve = Vec::with_capacity(counts.len());
    for &count in counts {
        let mut total = 0.0;
        for &seed in seeds {
            let perturbed: Vec<Document> = par_iter!(docs)
                .enumerate()
                .map(|(i, d)| {
                    let p = Perturbation {
                        kind,
                        count,
                        seed: doc_seed(seed, i),
                    };
                    Ok(Document {
                        text: perturb(&d.text, &p, ctx)?,
                        ..(*d).clone()
                    })
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&Document> = perturbed.iter().collect();
            let scored = score_documents(providers, &refs)?;
            let preds = par_iter!(scored)
                .map(|d| artifact.classify_scored(d).map(|c| c.label))
                .collect::<Result<Vec<_>>>()?;
            let report = compute_metrics(&preds, &golds)?;
            total += if all_ai { report.recall } else { report.f1 };
        }
        let rate = lengths.iter().map(|&l| count as f64 * 100.0 / l as f64).sum::<f64>() / lengths.len() as f64;
        curve.push(CurvePoint {
            kind,
            count,
            rate_per_100_tokens: rate,
            metric: total / seeds.len() as f64,
            n: docs.len() * seeds.len(),
        });
    }
    Ok(curve)
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("kind,count,rate_per_100_tokens,metric,n\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{}\n",
            p.kind, p.count, p.rate_per_100_tokens, p.metric, p.n
        ));
    }
    out
}
