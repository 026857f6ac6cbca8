//! Authorship analysis for mobile apps.
//!
//! The pipeline has two phases. Decoupling builds a package relation graph
//! from an [`AppBundle`](bundle::AppBundle), merges packages that must share an
//! author, and clusters the rest by modularity to find the primary module.
//! Identification extracts stylometric token sequences from that module,
//! selects key n-grams with TF-IDF, embeds them with a skip-gram model and
//! classifies the resulting fingerprint against known authors.

pub mod aggregation;
pub mod bundle;
pub mod classifiers;
pub mod clustering;
pub mod config;
pub mod embedding;
pub mod evaluation;
pub mod graph;
pub mod pipeline;
pub mod stylometry;

pub use aggregation::{aggregate, AggregationResult, MergeReason, MergedGroup};
pub use bundle::{
    parse_bundle, validate, write_bundle, AppBundle, BundleError, ClassRecord, ComponentDecl,
    ComponentKind, ManifestInfo, MethodRecord, PackageName, RelationKind, RelationRecord,
    ValidationReport, ViolationCode,
};
pub use clustering::{decouple, AuthorshipPartition, ClusterError, DecoupleConfig, WeightMode};
pub use graph::{build_graph, EdgeWeights, GraphError, PackageRelationGraph};
pub use classifiers::{
    load_model, save_model, Classifier, ClassifierError, ClassifierKind, ClassifierParams,
    ModelError, TrainedModel,
};
pub use embedding::{fingerprint, train_embedding, EmbeddingError, EmbeddingParams, EmbeddingTable, FingerprintVector};
pub use stylometry::{extract_profile, fit_all, Category, ProfileScope, StyleError, StyleProfile, TfidfParams, TfidfVocabulary};
pub use evaluation::{generate_corpus, obfuscate_bundle, CorpusConfig, EvalError, MetricsReport};
pub use pipeline::{evaluate, predict, train_model, EvaluateOptions, PipelineConfig, PipelineError};
