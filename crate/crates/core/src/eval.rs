//! Metrics, experiment plans, baselines and the length sweep.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{trim_document, Dataset, Document, Label, Split};
use crate::detector::{
    fit_scored, label_bit, score_documents, train_logreg, DetectorArtifact, DetectorConfig, LogisticModel, Scaler,
    ScoredDoc, DEFAULT_THRESHOLD,
};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use crate::error::{Error, Result};
use crate::par_iter;
use crate::providers::{by_strength, perplexity_of, ProviderId, ProviderSet};

/// The sweep lengths, in tokens.
pub const DEFAULT_LENGTHS: [usize; 7] = [10, 25, 50, 100, 250, 500, 1000];

/// Binary classification metrics with `ai` as the positive class. For a
/// precision-only evaluation (no positives in the gold labels) F1,
/// precision and recall are not reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub n: usize,
    pub precision_only: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricReport {
    fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            f1,
            precision,
            recall,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            tp,
            fp,
            fn_,
            tn,
            n: tp + fp + fn_ + tn,
            precision_only: false,
        }
    }
}

pub fn compute_metrics(preds: &[Label], golds: &[Label]) -> Result<MetricReport> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch(preds.len(), golds.len()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyVector);
    }
    let p: Vec<u8> = preds.iter().map(|&l| label_bit(l)).collect();
    let g: Vec<u8> = golds.iter().map(|&l| label_bit(l)).collect();
    Ok(counts(&p, &g))
}

fn counts(preds: &[u8], golds: &[u8]) -> MetricReport {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &g) in preds.iter().zip(golds) {
        match (p, g) {
            (1, 1) => tp += 1,
            (1, _) => fp += 1,
            (_, 1) => fn_ += 1,
            _ => tn += 1,
        }
    }
    MetricReport::from_counts(tp, fp, fn_, tn)
}

/// F1 over 0/1 labels (1 = ai), 0 when undefined.
pub fn f1_score(preds: &[u8], golds: &[u8]) -> f64 {
    counts(preds, golds).f1
}

/// Positions of the `target` highest scores, ties resolved toward the
/// lower index.
pub fn oracle_positives(scores: &[f64], target: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![false; scores.len()];
    for &i in order.iter().take(target) {
        out[i] = true;
    }
    out
}

/// A cutoff `t` such that the `target` highest scores are `>= t` and the
/// rest are below it; with ties at the cutoff use [`oracle_positives`].
pub fn oracle_threshold(scores: &[f64], target: usize) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    match target {
        0 => sorted.first().map_or(f64::INFINITY, |m| m.next_up()),
        k => sorted[k.min(sorted.len()) - 1],
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// A single-feature logistic model on document perplexity.
#[derive(Clone, Debug, PartialEq)]
pub struct PerplexityBaseline {
    pub provider: ProviderId,
    pub scaler: Scaler,
    pub model: LogisticModel,
}

impl PerplexityBaseline {
    pub fn fit(provider: ProviderId, train: &[ScoredDoc]) -> Result<Self> {
        let x: Vec<Vec<f64>> = train
            .iter()
            .map(|d| Ok(vec![perplexity_of(d.scored.probs(&provider)?)?]))
            .collect::<Result<_>>()?;
        let y: Vec<u8> = train.iter().map(|d| label_bit(d.label)).collect();
        let scaler = Scaler::fit(&x);
        let z: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
        let model = train_logreg(&z, &y, 1.0)?;
        Ok(Self { provider, scaler, model })
    }

    pub fn score(&self, doc: &ScoredDoc) -> Result<f64> {
        let ppl = perplexity_of(doc.scored.probs(&self.provider)?)?;
        Ok(self.model.probability(&self.scaler.transform(&[ppl])))
    }

    pub fn evaluate(&self, docs: &[ScoredDoc]) -> Result<MetricReport> {
        let preds = docs
            .iter()
            .map(|d| Ok(label_of(self.score(d)? >= DEFAULT_THRESHOLD)))
            .collect::<Result<Vec<_>>>()?;
        report_for(&preds, docs)
    }

    /// Thresholds the score stream so the predicted label counts match the
    /// gold counts exactly.
    pub fn evaluate_oracle(&self, docs: &[ScoredDoc]) -> Result<MetricReport> {
        let scores = docs.iter().map(|d| self.score(d)).collect::<Result<Vec<_>>>()?;
        let target = docs.iter().filter(|d| d.label == Label::Ai).count();
        let preds: Vec<Label> = oracle_positives(&scores, target).into_iter().map(label_of).collect();
        report_for(&preds, docs)
    }
}

fn label_of(ai: bool) -> Label {
    if ai {
        Label::Ai
    } else {
        Label::Human
    }
}

fn report_for(preds: &[Label], docs: &[ScoredDoc]) -> Result<MetricReport> {
    let golds: Vec<Label> = docs.iter().map(|d| d.label).collect();
    let mut r = compute_metrics(preds, &golds)?;
    r.precision_only = !golds.contains(&Label::Ai);
    Ok(r)
}

/// Classifies already-scored documents with a trained detector.
pub fn evaluate_detector(artifact: &DetectorArtifact, docs: &[ScoredDoc]) -> Result<MetricReport> {
    let preds = par_iter!(docs)
        .map(|d| artifact.classify_scored(d).map(|c| c.label))
        .collect::<Result<Vec<_>>>()?;
    report_for(&preds, docs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    InDomain,
    OutOfDomain,
    /// Evaluation on all-human text; only accuracy is meaningful.
    PrecisionOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Method {
    Detector {
        #[serde(default)]
        config: DetectorConfig,
    },
    Perplexity {
        /// Defaults to the strongest configured provider.
        #[serde(default)]
        provider: Option<ProviderId>,
        #[serde(default)]
        oracle: bool,
    },
    Artifact {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub condition: String,
    pub kind: PlanKind,
    pub train_domains: Vec<String>,
    pub eval_domains: Vec<String>,
    pub method: Method,
    #[serde(default)]
    pub trim: Option<usize>,
}

pub fn load_plans(path: &Path) -> Result<Vec<ExperimentPlan>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn check_tags(plan: &ExperimentPlan, dataset: &Dataset) -> Result<()> {
    let present: BTreeSet<&str> = dataset.documents.iter().map(|d| d.domain_tag.as_str()).collect();
    for tag in plan.train_domains.iter().chain(&plan.eval_domains) {
        if !present.contains(tag.as_str()) {
            return Err(Error::Plan(format!("domain tag {tag:?} not present in the dataset")));
        }
    }
    let train: BTreeSet<&String> = plan.train_domains.iter().collect();
    let eval: BTreeSet<&String> = plan.eval_domains.iter().collect();
    if eval.is_empty() {
        return Err(Error::Plan("no evaluation domains".into()));
    }
    match plan.kind {
        PlanKind::InDomain if train != eval => Err(Error::Plan(format!(
            "{}: in-domain plans need identical train and eval tags",
            plan.condition
        ))),
        PlanKind::OutOfDomain if !train.is_disjoint(&eval) => Err(Error::Plan(format!(
            "{}: tags not disjoint",
            plan.condition
        ))),
        _ => Ok(()),
    }
}

fn split_docs<'a>(dataset: &'a Dataset, tags: &'a [String], split: Split) -> Vec<&'a Document> {
    dataset
        .with_domains(tags)
        .filter(|d| d.label.is_labeled() && dataset.split_of(&d.id) == Some(split))
        .collect()
}

/// Fits (or loads) the plan's model on the training domains and evaluates
/// it on the test split of the evaluation domains.
pub fn run_experiment(plan: &ExperimentPlan, dataset: &Dataset, providers: &ProviderSet) -> Result<MetricReport> {
    check_tags(plan, dataset)?;
    let mut eval_docs: Vec<Document> = split_docs(dataset, &plan.eval_domains, Split::Test)
        .into_iter()
        .cloned()
        .collect();
    if eval_docs.is_empty() {
        return Err(Error::Plan(format!("{}: no test documents in the eval domains", plan.condition)));
    }
    if plan.kind == PlanKind::PrecisionOnly && eval_docs.iter().any(|d| d.label != Label::Human) {
        return Err(Error::Plan(format!(
            "{}: precision-only plans evaluate on human text only",
            plan.condition
        )));
    }
    if let Some(n) = plan.trim {
        eval_docs = eval_docs.iter().map(|d| trim_document(d, n)).collect();
    }
    let eval_refs: Vec<&Document> = eval_docs.iter().collect();
    let fit_scored_split = |split| score_documents(providers, &split_docs(dataset, &plan.train_domains, split));

    let report = match &plan.method {
        Method::Artifact { path } => {
            let artifact = DetectorArtifact::load(path)?;
            artifact.check_providers(providers)?;
            evaluate_detector(&artifact, &score_documents(providers, &eval_refs)?)?
        }
        Method::Detector { config } => {
            let artifact = fit_scored(&fit_scored_split(Split::Train)?, &fit_scored_split(Split::Val)?, providers, config)?;
            evaluate_detector(&artifact, &score_documents(providers, &eval_refs)?)?
        }
        Method::Perplexity { provider, oracle } => {
            let provider = match provider {
                Some(p) => p.clone(),
                None => by_strength(providers.ids())
                    .into_iter()
                    .next()
                    .ok_or_else(|| Error::Config("no providers configured".into()))?,
            };
            let baseline = PerplexityBaseline::fit(provider, &fit_scored_split(Split::Train)?)?;
            let scored = score_documents(providers, &eval_refs)?;
            if *oracle {
                baseline.evaluate_oracle(&scored)?
            } else {
                baseline.evaluate(&scored)?
            }
        }
    };
    log::info!("{}: F1 {:.4} on {} documents", plan.condition, report.f1, report.n);
    Ok(report)
}

/// Unweighted mean over conditions. Precision-only conditions contribute
/// to accuracy only.
pub fn macro_average(reports: &[MetricReport]) -> Option<MetricReport> {
    if reports.is_empty() {
        return None;
    }
    let scored: Vec<&MetricReport> = reports.iter().filter(|r| !r.precision_only).collect();
    let mean = |f: fn(&MetricReport) -> f64, rs: &[&MetricReport]| rs.iter().map(|r| f(r)).sum::<f64>() / rs.len() as f64;
    let all: Vec<&MetricReport> = reports.iter().collect();
    let sum = |f: fn(&MetricReport) -> usize| reports.iter().map(f).sum();
    Some(MetricReport {
        f1: if scored.is_empty() { f64::NAN } else { mean(|r| r.f1, &scored) },
        precision: if scored.is_empty() { f64::NAN } else { mean(|r| r.precision, &scored) },
        recall: if scored.is_empty() { f64::NAN } else { mean(|r| r.recall, &scored) },
        accuracy: mean(|r| r.accuracy, &all),
        tp: sum(|r| r.tp),
        fp: sum(|r| r.fp),
        fn_: sum(|r| r.fn_),
        tn: sum(|r| r.tn),
        n: sum(|r| r.n),
        precision_only: scored.is_empty(),
    })
}

struct Cell(f64, bool);

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.1 || self.0.is_nan() {
            f.write_str("NA")
        } else {
            write!(f, "{:.6}", self.0)
        }
    }
}

/// One CSV row per condition: `condition,f1,precision,recall,accuracy,n`.
pub fn report_csv(rows: &[(String, MetricReport)]) -> String {
    let mut out = String::from("condition,f1,precision,recall,accuracy,n\n");
    for (name, r) in rows {
        let na = r.precision_only;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            name,
            Cell(r.f1, na),
            Cell(r.precision, na),
            Cell(r.recall, na),
            Cell(r.accuracy, false),
            r.n
        ));
    }
    out
}

/// Runs each plan in order and appends a `macro_average` row when more
/// than one condition ran.
pub fn run_plans(plans: &[ExperimentPlan], dataset: &Dataset, providers: &ProviderSet) -> Result<Vec<(String, MetricReport)>> {
    let mut rows = Vec::new();
    for plan in plans {
        rows.push((plan.condition.clone(), run_experiment(plan, dataset, providers)?));
    }
    if rows.len() > 1 {
        let reports: Vec<MetricReport> = rows.iter().map(|(_, r)| r.clone()).collect();
        if let Some(avg) = macro_average(&reports) {
            rows.push(("macro_average".into(), avg));
        }
    }
    Ok(rows)
}

/// Trims every evaluation document to each length, rescores and reports.
pub fn length_sweep(
    artifact: &DetectorArtifact,
    providers: &ProviderSet,
    docs: &[&Document],
    lengths: &[usize],
) -> Result<Vec<(usize, MetricReport)>> {
    artifact.check_providers(providers)?;
    lengths
        .iter()
        .map(|&n| {
            let trimmed: Vec<Document> = docs.iter().map(|d| trim_document(d, n)).collect();
            let refs: Vec<&Document> = trimmed.iter().collect();
            let scored = score_documents(providers, &refs)?;
            Ok((n, evaluate_detector(artifact, &scored)?))
        })
        .collect()
}

/// Same as [`fit_scored`] on documents of a dataset's train and val splits,
/// returned together with the scored test split for evaluation.
pub fn fit_and_score_test(
    dataset: &Dataset,
    providers: &ProviderSet,
    config: &DetectorConfig,
) -> Result<(DetectorArtifact, Vec<ScoredDoc>)> {
    let pick = |s| -> Vec<&Document> { dataset.in_split(s).filter(|d| d.label.is_labeled()).collect() };
    let train = score_documents(providers, &pick(Split::Train))?;
    let val = score_documents(providers, &pick(Split::Val))?;
    let test = score_documents(providers, &pick(Split::Test))?;
    Ok((fit_scored(&train, &val, providers, config)?, test))
}
