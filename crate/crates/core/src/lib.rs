//! Detection of machine-generated text from the token probabilities that
//! weak language models assign to it.
//!
//! Documents are scored by a set of providers (n-gram models trained
//! locally, optionally remote neural models), the per-token probability
//! vectors are combined by a searched family of feature expressions, and a
//! logistic regression over the selected features makes the call.

pub mod error;
pub mod par;

pub mod corpus;
pub mod ngram;
pub mod providers;
pub mod features;
pub mod detector;
pub mod eval;
pub mod perturb;
pub mod analysis;
pub mod synthetic;
pub mod cli;

pub use corpus::{load_dataset, split_dataset, tokenize, Dataset, DatasetFormat, Document, Label, Split, TokenSequence};
pub use detector::{fit_detector, DetectorArtifact, DetectorConfig};
pub use error::{Error, Result};
pub use features::{enumerate_features, parse_feature, FeatureExpr};
pub use ngram::NgramModel;
pub use providers::{ProviderId, ProviderSet};
