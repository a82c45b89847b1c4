//! Entropy-rate curves and feature value dumps.

use std::io::Write;
use std::path::Path;

use crate::corpus::Label;
use crate::detector::ScoredDoc;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use crate::error::{Error, Result};
use crate::features::{FeatureBank, FeatureExpr};
use crate::into_par_iter;
use crate::providers::{decode_f64, encode_f64, ProbabilityVector, ProviderId};

/// Mean natural-log probability at each token position, over the
/// documents long enough to have that position.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropySeries {
    pub provider: ProviderId,
    pub class: Label,
    /// `mean_logprob[i]` is f(i + 1).
    pub mean_logprob: Vec<f64>,
    pub n_docs: Vec<usize>,
}

pub fn entropy_rate(vectors: &[ProbabilityVector], class: Label, max_positions: usize) -> Result<EntropySeries> {
    let first = vectors.first().ok_or(Error::EmptyVector)?;
    if let Some(other) = vectors.iter().find(|v| v.provider != first.provider) {
        return Err(Error::InvalidParameter(format!(
            "mixed providers {} and {}",
            first.provider, other.provider
        )));
    }
    let longest = vectors.iter().map(ProbabilityVector::len).max().unwrap_or(0);
    let m = max_positions.min(longest);
    let (mean_logprob, n_docs): (Vec<f64>, Vec<usize>) = into_par_iter!(0..m)
        .map(|i| {
            let mut sum = 0.0;
            let mut n = 0;
            for v in vectors {
                if let Some(p) = v.probs.get(i) {
                    sum += p.ln();
                    n += 1;
                }
            }
            (sum / n as f64, n)
        })
        .unzip();
    Ok(EntropySeries {
        provider: first.provider.clone(),
        class,
        mean_logprob,
        n_docs,
    })
}

/// Writes `position,provider,class,mean_logprob,n_docs` (positions from 1)
/// after a `# log_base: e` line.
pub fn emit_entropy_csv(series: &[EntropySeries], path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::EmptyVector);
    }
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# log_base: e")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["position", "provider", "class", "mean_logprob", "n_docs"])?;
    for s in series {
        for (i, (f, n)) in s.mean_logprob.iter().zip(&s.n_docs).enumerate() {
            w.write_record([
                (i + 1).to_string(),
                s.provider.to_string(),
                s.class.as_str().to_string(),
                encode_f64(*f),
                n.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_entropy_csv(path: &Path) -> Result<Vec<EntropySeries>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut out: Vec<EntropySeries> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| Error::Parse {
                column: i,
                message: format!("row {} is short", row + 1),
            })
        };
        let provider: ProviderId = field(1)?.parse()?;
        let class: Label = field(2)?.parse()?;
        let value = decode_f64(field(3)?)?;
        let n: usize = field(4)?.parse().map_err(|e| Error::Parse {
            column: 4,
            message: format!("{e}"),
        })?;
        match out.last_mut() {
            Some(s) if s.provider == provider && s.class == class => {
                s.mean_logprob.push(value);
                s.n_docs.push(n);
            }
            _ => out.push(EntropySeries {
                provider,
                class,
                mean_logprob: vec![value],
                n_docs: vec![n],
            }),
        }
    }
    Ok(out)
}

/// One row per document with the raw value of every feature.
pub fn feature_dump_csv(features: &[FeatureExpr], ids: &[String], docs: &[ScoredDoc]) -> Result<String> {
    let bank = FeatureBank::new(features.to_vec());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(bank.features().iter().map(ToString::to_string));
    w.write_record(&header)?;
    for (id, d) in ids.iter().zip(docs) {
        let mut rec = vec![id.clone(), d.label.as_str().to_string()];
        rec.extend(bank.evaluate(&d.scored)?.into_iter().map(encode_f64));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(probs: &[f64]) -> ProbabilityVector {
        ProbabilityVector {
            provider: ProviderId::Trigram,
            doc_id: String::new(),
            probs: probs.to_vec(),
        }
    }

    #[test]
    fn hand_computed_first_position() {
        let s = entropy_rate(&[pv(&[0.5]), pv(&[0.25, 0.1])], Label::Ai, 10).unwrap();
        assert!((s.mean_logprob[0] - (0.5f64.ln() + 0.25f64.ln()) / 2.0).abs() < 1e-15);
        assert!((s.mean_logprob[0] + 1.0397).abs() < 1e-4);
        assert_eq!(s.n_docs, [2, 1]);
        assert_eq!(s.mean_logprob.len(), 2);
    }

    #[test]
    fn flat_curve() {
        let s = entropy_rate(&[pv(&[0.3; 4]), pv(&[0.3; 2])], Label::Human, 3).unwrap();
        assert!(s.mean_logprob.iter().all(|&f| f == 0.3f64.ln()));
        assert_eq!(s.n_docs.len(), 3);
    }

    #[test]
    fn errors() {
        assert!(entropy_rate(&[], Label::Ai, 3).is_err());
        let mut other = pv(&[0.1]);
        other.provider = ProviderId::Unigram;
        assert!(entropy_rate(&[pv(&[0.1]), other], Label::Ai, 3).is_err());
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_entropy_csv(&[], &dir.path().join("e.csv")).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let a = entropy_rate(&[pv(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95])], Label::Ai, 10).unwrap();
        let mut b = a.clone();
        b.class = Label::Human;
        emit_entropy_csv(&[a.clone(), b.clone()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# log_base: e\nposition,provider,class,mean_logprob,n_docs\n"));
        assert_eq!(text.lines().count(), 22);
        assert_eq!(read_entropy_csv(&path).unwrap(), vec![a, b]);
    }
}
