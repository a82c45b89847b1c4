//! Documents, datasets, splitting and the reference tokenizer.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human,
    Ai,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Human => "human",
            Label::Ai => "ai",
            Label::Unlabeled => "unlabeled",
        }
    }

    pub fn is_labeled(self) -> bool {
        self != Label::Unlabeled
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Label::Human),
            "ai" => Ok(Label::Ai),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub label: Label,
    #[serde(default)]
    pub domain_tag: String,
    #[serde(default)]
    pub source: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            label,
            domain_tag: String::new(),
            source: String::new(),
        }
    }

    pub fn with_domain(mut self, tag: impl Into<String>) -> Self {
        self.domain_tag = tag.into();
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    DirOfTxt,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "dir_of_txt" | "dir" => Ok(DatasetFormat::DirOfTxt),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub splits: BTreeMap<String, Split>,
}

impl Dataset {
    /// Builds a dataset, rejecting empty and duplicate ids.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for doc in &documents {
            if doc.id.is_empty() {
                return Err(Error::InvalidParameter("empty document id".into()));
            }
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
        }
        Ok(Self {
            documents,
            splits: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.splits.get(id).copied()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &Document> {
        self.documents
            .iter()
            .filter(move |d| self.split_of(&d.id) == Some(split))
    }

    pub fn with_domains<'a>(&'a self, tags: &'a [String]) -> impl Iterator<Item = &'a Document> {
        self.documents
            .iter()
            .filter(move |d| tags.iter().any(|t| *t == d.domain_tag))
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for doc in &self.documents {
            let mut value = serde_json::to_value(doc)?;
            if let (Some(split), Some(obj)) = (self.split_of(&doc.id), value.as_object_mut()) {
                obj.insert("split".into(), serde_json::to_value(split)?);
            }
            out.push_str(&serde_json::to_string(&value)?);
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    text: String,
    label: String,
    domain_tag: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    split: Option<Split>,
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    match format {
        DatasetFormat::Jsonl => load_jsonl(path),
        DatasetFormat::DirOfTxt => load_dir(path),
    }
}

fn load_jsonl(path: &Path) -> Result<Dataset> {
    let content = fs::read_to_string(path)?;
    let mut docs = Vec::new();
    let mut splits = BTreeMap::new();
    let mut seen = HashSet::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        let label: Label = raw.label.parse()?;
        if raw.id.is_empty() {
            return Err(malformed("empty id".into()));
        }
        if label.is_labeled() && raw.text.is_empty() {
            return Err(malformed("empty text for a labeled document".into()));
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateId(raw.id));
        }
        if let Some(split) = raw.split {
            splits.insert(raw.id.clone(), split);
        }
        docs.push(Document {
            id: raw.id,
            text: raw.text,
            label,
            domain_tag: raw.domain_tag,
            source: raw.source,
        });
    }
    Ok(Dataset {
        documents: docs,
        splits,
    })
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

fn load_dir(root: &Path) -> Result<Dataset> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for label_dir in sorted_entries(root)? {
        if !label_dir.is_dir() {
            continue;
        }
        let name = label_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let label: Label = name.parse()?;
        for file in sorted_entries(&label_dir)? {
            if file.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let id = file
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::DuplicateId(id));
            }
            docs.push(Document {
                id,
                text: fs::read_to_string(&file)?,
                label,
                domain_tag: String::new(),
                source: file.display().to_string(),
            });
        }
    }
    Ok(Dataset {
        documents: docs,
        splits: BTreeMap::new(),
    })
}

/// Stratified, seeded train/val/test assignment of every labeled document.
pub fn split_dataset(mut d: Dataset, ratios: (f64, f64, f64), seed: u64) -> Result<Dataset> {
    let (tr, va, te) = ratios;
    if !(tr > 0.0 && va > 0.0 && te > 0.0) {
        return Err(Error::InvalidSplit("ratios must be positive".into()));
    }
    if ((tr + va + te) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidSplit(format!(
            "ratios sum to {} instead of 1",
            tr + va + te
        )));
    }
    let labeled = d.documents.iter().filter(|x| x.label.is_labeled()).count();
    if labeled < 3 {
        return Err(Error::InvalidSplit(format!(
            "need at least 3 labeled documents, found {labeled}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut splits = BTreeMap::new();
    for label in [Label::Human, Label::Ai] {
        let mut ids: Vec<&str> = d
            .documents
            .iter()
            .filter(|x| x.label == label)
            .map(|x| x.id.as_str())
            .collect();
        ids.shuffle(&mut rng);
        let n = ids.len();
        let n_train = ((n as f64) * tr).round() as usize;
        let n_val = (((n as f64) * va).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        for (i, id) in ids.into_iter().enumerate() {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            splits.insert(id.to_string(), split);
        }
    }
    d.splits = splits;
    Ok(d)
}

/// Tokens plus their byte spans in the source text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub spans: Vec<(usize, usize)>,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum CharClass {
    Letter,
    Digit,
    Space,
    Other,
}

fn class_of(c: char) -> CharClass {
    if c.is_whitespace() {
        CharClass::Space
    } else if c.is_alphabetic() {
        CharClass::Letter
    } else if c.is_numeric() {
        CharClass::Digit
    } else {
        CharClass::Other
    }
}

/// Reference tokenizer: maximal runs of letters or digits, every other
/// non-whitespace character on its own.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut spans = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        let class = class_of(c);
        let mut end = start + c.len_utf8();
        match class {
            CharClass::Space => continue,
            CharClass::Other => {}
            CharClass::Letter | CharClass::Digit => {
                while let Some(&(i, next)) = iter.peek() {
                    if class_of(next) != class {
                        break;
                    }
                    end = i + next.len_utf8();
                    iter.next();
                }
            }
        }
        tokens.push(text[start..end].to_string());
        spans.push((start, end));
    }
    TokenSequence { tokens, spans }
}

/// Joins tokens back into text: single spaces between tokens, except no
/// space before closing punctuation or after opening brackets.
pub fn join_tokens<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in tokens {
        let tok = tok.as_ref();
        if let Some(p) = prev {
            let glue_left = matches!(tok, "." | "," | ";" | ":" | "!" | "?" | ")" | "]" | "'");
            let glue_right = matches!(p, "(" | "[" | "'");
            if !(glue_left || glue_right) {
                out.push(' ');
            }
        }
        out.push_str(tok);
        prev = Some(tok);
    }
    out
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Aligns externally produced token strings (e.g. a neural provider's
    /// own tokenization) against the source text. Whitespace between pieces
    /// is skipped; a piece's own leading whitespace is optional.
    pub fn from_pieces(text: &str, pieces: &[String]) -> Result<Self> {
        let mut cursor = 0;
        let mut spans = Vec::with_capacity(pieces.len());
        for (i, piece) in pieces.iter().enumerate() {
            let rest = &text[cursor..];
            if rest.starts_with(piece.as_str()) {
                spans.push((cursor, cursor + piece.len()));
                cursor += piece.len();
                continue;
            }
            let skipped = rest.len() - rest.trim_start().len();
            let trimmed = piece.trim_start();
            let at = cursor + skipped;
            if text[at..].starts_with(trimmed) {
                spans.push((at, at + trimmed.len()));
                cursor = at + trimmed.len();
            } else {
                return Err(Error::BadResponse(format!(
                    "token {i} ({piece:?}) does not match the document text at byte {cursor}"
                )));
            }
        }
        Ok(Self {
            tokens: pieces.to_vec(),
            spans,
        })
    }

    /// Prefix of the source text covering the first `n` tokens.
    pub fn prefix_text<'a>(&self, source: &'a str, n: usize) -> &'a str {
        match n.min(self.len()) {
            0 => "",
            k => &source[..self.spans[k - 1].1],
        }
    }

    /// Number of tokens overlapping each whitespace-delimited word.
    pub fn word_token_lengths(&self, source: &str) -> Vec<usize> {
        let mut words = Vec::new();
        let mut start = None;
        for (i, c) in source.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    words.push((s, i));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((s, source.len()));
        }
        let mut lengths = Vec::with_capacity(words.len());
        let mut t = 0;
        for (ws, we) in words {
            while t < self.spans.len() && self.spans[t].1 <= ws {
                t += 1;
            }
            let mut k = t;
            let mut count = 0;
            while k < self.spans.len() && self.spans[k].0 < we {
                if self.spans[k].1 > ws {
                    count += 1;
                }
                k += 1;
            }
            if count > 0 {
                lengths.push(count);
            }
        }
        lengths
    }
}

pub fn trim(ts: &TokenSequence, n: usize) -> TokenSequence {
    let k = n.min(ts.len());
    TokenSequence {
        tokens: ts.tokens[..k].to_vec(),
        spans: ts.spans[..k].to_vec(),
    }
}

/// Copy of `doc` whose text is cut after its `n`-th reference token.
pub fn trim_document(doc: &Document, n: usize) -> Document {
    let ts = tokenize(&doc.text);
    Document {
        text: ts.prefix_text(&doc.text, n).to_string(),
        ..doc.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s).tokens
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("The cat sat."), ["The", "cat", "sat", "."]);
        assert!(toks("").is_empty());
        // "don" is a letter run, the apostrophe is a lone punctuation mark,
        // then another letter run, then whitespace is skipped.
        assert_eq!(toks("don't stop"), ["don", "'", "t", "stop"]);
        assert_eq!(toks("abc123 x"), ["abc", "123", "x"]);
    }

    #[test]
    fn spans_point_into_source() {
        let text = "  Héllo, wörld 42!";
        let ts = tokenize(text);
        for (tok, &(s, e)) in ts.tokens.iter().zip(&ts.spans) {
            assert_eq!(&text[s..e], tok);
        }
        assert_eq!(ts.tokens, ["Héllo", ",", "wörld", "42", "!"]);
    }

    #[test]
    fn trim_examples() {
        let ts = tokenize("a b c");
        assert_eq!(trim(&ts, 2).tokens, ["a", "b"]);
        assert_eq!(trim(&tokenize("a"), 10).tokens, ["a"]);
        assert_eq!(trim(&ts, 3), ts);
    }

    #[test]
    fn trim_document_cuts_after_token() {
        let doc = Document::new("d", "One two, three four.", Label::Ai);
        assert_eq!(trim_document(&doc, 3).text, "One two,");
        assert_eq!(trim_document(&doc, 100).text, doc.text);
    }

    #[test]
    fn from_pieces_handles_leading_spaces() {
        let text = "The cat  sat.";
        let pieces: Vec<String> = ["The", " cat", " sat", "."].iter().map(|s| s.to_string()).collect();
        let ts = TokenSequence::from_pieces(text, &pieces).unwrap();
        assert_eq!(ts.spans, vec![(0, 3), (3, 7), (9, 12), (12, 13)]);
        let bad: Vec<String> = vec!["The".into(), " dog".into()];
        assert!(TokenSequence::from_pieces(text, &bad).is_err());
    }

    #[test]
    fn word_lengths_in_tokens() {
        let text = "don't stop now.";
        let ts = tokenize(text);
        assert_eq!(ts.word_token_lengths(text), vec![3, 1, 2]);
    }

    #[test]
    fn jsonl_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        fs::write(
            &path,
            "{\"id\":\"1\",\"text\":\"hi there\",\"label\":\"human\",\"domain_tag\":\"news\",\"source\":\"x\"}\n\
             {\"id\":\"2\",\"text\":\"hello\",\"label\":\"ai\",\"domain_tag\":\"news\"}\n",
        )
        .unwrap();
        let d = load_dataset(&path, DatasetFormat::Jsonl).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.documents[0].label, Label::Human);
        assert_eq!(d.documents[1].label, Label::Ai);
        assert!(d.splits.is_empty());

        fs::write(&path, "").unwrap();
        assert_eq!(load_dataset(&path, DatasetFormat::Jsonl).unwrap().len(), 0);

        fs::write(
            &path,
            "{\"id\":\"1\",\"text\":\"a\",\"label\":\"human\",\"domain_tag\":\"\"}\nnot json\n",
        )
        .unwrap();
        match load_dataset(&path, DatasetFormat::Jsonl) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }

        fs::write(
            &path,
            "{\"id\":\"1\",\"text\":\"a\",\"label\":\"robot\",\"domain_tag\":\"\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Jsonl),
            Err(Error::UnknownLabel(l)) if l == "robot"
        ));

        fs::write(
            &path,
            "{\"id\":\"1\",\"text\":\"a\",\"label\":\"ai\",\"domain_tag\":\"\"}\n{\"id\":\"1\",\"text\":\"b\",\"label\":\"ai\",\"domain_tag\":\"\"}\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&path, DatasetFormat::Jsonl),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn dir_of_txt_duplicate_id() {
        let dir = tempfile::tempdir().unwrap();
        for label in ["human", "ai"] {
            fs::create_dir(dir.path().join(label)).unwrap();
            fs::write(dir.path().join(label).join("a.txt"), "text").unwrap();
        }
        match load_dataset(dir.path(), DatasetFormat::DirOfTxt) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }
        fs::rename(
            dir.path().join("ai").join("a.txt"),
            dir.path().join("ai").join("b.txt"),
        )
        .unwrap();
        let d = load_dataset(dir.path(), DatasetFormat::DirOfTxt).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.documents[0].id, "b");
        assert_eq!(d.documents[0].label, Label::Ai);
    }

    fn balanced(n: usize) -> Dataset {
        let docs = (0..n)
            .map(|i| {
                let label = if i % 2 == 0 { Label::Human } else { Label::Ai };
                Document::new(format!("d{i}"), "text", label)
            })
            .collect();
        Dataset::new(docs).unwrap()
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let d = split_dataset(balanced(100), (0.8, 0.1, 0.1), 7).unwrap();
        for (split, per_label) in [(Split::Train, 40), (Split::Val, 5), (Split::Test, 5)] {
            for label in [Label::Human, Label::Ai] {
                let n = d.in_split(split).filter(|x| x.label == label).count();
                assert_eq!(n, per_label);
            }
        }
        let again = split_dataset(balanced(100), (0.8, 0.1, 0.1), 7).unwrap();
        assert_eq!(d.splits, again.splits);
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(
            split_dataset(balanced(10), (0.5, 0.5, 0.1), 1),
            Err(Error::InvalidSplit(_))
        ));
        assert!(split_dataset(balanced(2), (0.8, 0.1, 0.1), 1).is_err());
    }

    proptest! {
        #[test]
        fn retokenizing_joined_tokens_is_stable(s in "[a-zA-Z0-9 .,;'!?()\\-]{0,80}") {
            let first = toks(&s);
            let joined = join_tokens(&first);
            prop_assert_eq!(toks(&joined), first);
        }

        #[test]
        fn spans_monotone_and_lossless(s in "\\PC{0,60}") {
            let ts = tokenize(&s);
            let mut last = 0;
            for (tok, &(a, b)) in ts.tokens.iter().zip(&ts.spans) {
                prop_assert!(a >= last && b > a);
                prop_assert!(s[last..a].chars().all(char::is_whitespace));
                prop_assert_eq!(&s[a..b], tok.as_str());
                last = b;
            }
            prop_assert!(s[last..].chars().all(char::is_whitespace));
        }

        #[test]
        fn trim_is_prefix(s in "[a-z .]{0,40}", n in 1usize..20) {
            let ts = tokenize(&s);
            let t = trim(&ts, n);
            prop_assert_eq!(&ts.tokens[..t.len()], &t.tokens[..]);
        }

        #[test]
        fn split_partitions(n in 3usize..60, seed in 0u64..1000) {
            let d = split_dataset(balanced(n), (0.6, 0.2, 0.2), seed).unwrap();
            prop_assert_eq!(d.splits.len(), n);
        }
    }
}
