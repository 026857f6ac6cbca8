//! Stylometric token sequences and per-category TF-IDF n-gram vocabularies.
//!
//! Dex-level tokens (identifiers, API calls, instructions) come only from
//! classes in the primary module. Manifest- and library-level tokens are
//! app-wide because they describe the whole app.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bundle::{simple_class_name, AppBundle, ClassRecord};
use crate::clustering::AuthorshipPartition;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StyleError {
    #[error("the primary module contains no classes")]
    EmptyPrimaryModule,
    #[error("vocabulary is for category {expected}, not {found}")]
    CategoryMismatch { expected: Category, found: Category },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Identifiers,
    ApiCalls,
    Instructions,
    ComponentNames,
    UsesFeatures,
    LibraryNames,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Identifiers,
        Category::ApiCalls,
        Category::Instructions,
        Category::ComponentNames,
        Category::UsesFeatures,
        Category::LibraryNames,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Identifiers => "identifiers",
            Category::ApiCalls => "api_calls",
            Category::Instructions => "instructions",
            Category::ComponentNames => "component_names",
            Category::UsesFeatures => "uses_features",
            Category::LibraryNames => "library_names",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleProfile {
    pub identifiers: Vec<String>,
    pub api_calls: Vec<String>,
    pub instructions: Vec<String>,
    pub component_names: Vec<String>,
    pub uses_features: Vec<String>,
    pub library_names: Vec<String>,
}

impl StyleProfile {
    pub fn sequence(&self, category: Category) -> &[String] {
        match category {
            Category::Identifiers => &self.identifiers,
            Category::ApiCalls => &self.api_calls,
            Category::Instructions => &self.instructions,
            Category::ComponentNames => &self.component_names,
            Category::UsesFeatures => &self.uses_features,
            Category::LibraryNames => &self.library_names,
        }
    }

    pub fn sequences(&self) -> impl Iterator<Item = (Category, &[String])> + '_ {
        Category::ALL.into_iter().map(move |c| (c, self.sequence(c)))
    }
}

/// Which classes feed the dex-level features.
#[derive(Clone, Copy, Debug)]
pub enum ProfileScope<'a> {
    PrimaryModule(&'a AuthorshipPartition),
    WholeApp,
}

/// Splits an identifier on `.` and `$`, keeping camelCase words intact.
pub fn identifier_tokens(name: &str) -> impl Iterator<Item = &str> {
    name.split(['.', '$']).filter(|t| !t.is_empty())
}

fn push_tokens(out: &mut Vec<String>, tokens: impl IntoIterator<Item = impl AsRef<str>>) {
    for t in tokens {
        let t = t.as_ref();
        if !t.is_empty() && !t.chars().any(char::is_whitespace) {
            out.push(t.to_owned());
        }
    }
}

/// Extracts the stylometric profile of `bundle`.
///
/// Methods flagged as framework overrides, or whose name is listed in
/// `framework_overrides`, contribute no identifier tokens; their instructions
/// and API calls are still kept.
pub fn extract_profile(
    bundle: &AppBundle,
    scope: ProfileScope<'_>,
    framework_overrides: &[String],
) -> Result<StyleProfile, StyleError> {
    let in_scope = |class: &ClassRecord| match scope {
        ProfileScope::PrimaryModule(partition) => partition.is_primary_package(&class.package),
        ProfileScope::WholeApp => true,
    };
    let classes: Vec<&ClassRecord> = bundle.classes.iter().filter(|c| in_scope(c)).collect();
    if classes.is_empty() {
        return Err(StyleError::EmptyPrimaryModule);
    }
    let skip: BTreeSet<&str> = framework_overrides.iter().map(String::as_str).collect();

    let mut profile = StyleProfile::default();
    for class in classes {
        push_tokens(&mut profile.identifiers, identifier_tokens(simple_class_name(&class.name)));
        for field in &class.fields {
            push_tokens(&mut profile.identifiers, identifier_tokens(field));
        }
        for method in &class.methods {
            if !method.overrides_framework && !skip.contains(method.name.as_str()) {
                push_tokens(&mut profile.identifiers, identifier_tokens(&method.name));
            }
            push_tokens(&mut profile.api_calls, &method.api_calls);
            push_tokens(&mut profile.instructions, &method.instructions);
        }
    }
    for comp in &bundle.manifest.components {
        push_tokens(&mut profile.component_names, identifier_tokens(simple_class_name(&comp.name)));
    }
    push_tokens(&mut profile.uses_features, &bundle.manifest.uses_features);
    push_tokens(&mut profile.library_names, bundle.libraries.iter().map(|l| l.trim_end_matches('.')));
    Ok(profile)
}

/// A contiguous token window.
pub type NGram = Vec<String>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfidfParams {
    pub min_n: usize,
    pub max_n: usize,
    pub min_df: usize,
    pub max_features: usize,
}

impl Default for TfidfParams {
    fn default() -> Self {
        TfidfParams { min_n: 3, max_n: 5, min_df: 3, max_features: 50 }
    }
}

/// Selected n-grams of one category with their idf values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    pub category: Category,
    pub params: TfidfParams,
    pub documents: usize,
    /// Selected n-grams in rank order.
    pub selected: Vec<NGram>,
    pub idf: Vec<f64>,
    pub document_frequency: Vec<usize>,
}

impl TfidfVocabulary {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// Smoothed inverse document frequency, always positive.
pub fn smoothed_idf(documents: usize, df: usize) -> f64 {
    ((1.0 + documents as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Counts every window of length `min_n..=max_n`.
pub fn ngram_counts(tokens: &[String], min_n: usize, max_n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    for n in min_n..=max_n {
        if n == 0 || n > tokens.len() {
            continue;
        }
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Fits one category's vocabulary.
///
/// Candidates appearing in fewer than `min_df` documents are dropped; the
/// rest are ranked by total tf-idf mass over the corpus (raw count times
/// smoothed idf) and the top `max_features` kept, ties broken by n-gram order.
pub fn fit_tfidf<S: AsRef<[String]>>(
    category: Category,
    corpus: &[S],
    params: TfidfParams,
) -> TfidfVocabulary {
    let mut df: BTreeMap<&[String], usize> = BTreeMap::new();
    let mut total: BTreeMap<&[String], usize> = BTreeMap::new();
    for doc in corpus {
        for (gram, count) in ngram_counts(doc.as_ref(), params.min_n, params.max_n) {
            *df.entry(gram).or_insert(0) += 1;
            *total.entry(gram).or_insert(0) += count;
        }
    }
    let documents = corpus.len();
    let mut ranked: Vec<(&[String], f64, usize)> = df
        .into_iter()
        .filter(|&(_, d)| d >= params.min_df)
        .map(|(gram, d)| {
            let idf = smoothed_idf(documents, d);
            (gram, total[gram] as f64 * idf, d)
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(params.max_features);

    TfidfVocabulary {
        category,
        params,
        documents,
        idf: ranked.iter().map(|&(_, _, d)| smoothed_idf(documents, d)).collect(),
        document_frequency: ranked.iter().map(|&(_, _, d)| d).collect(),
        selected: ranked.into_iter().map(|(g, _, _)| g.to_vec()).collect(),
    }
}

/// Sparse tf-idf row: index into `vocab.selected` and weight.
pub type TfidfRow = Vec<(usize, f64)>;

/// Weights of the selected n-grams present in `tokens`.
pub fn transform_tokens(vocab: &TfidfVocabulary, tokens: &[String]) -> TfidfRow {
    let counts = ngram_counts(tokens, vocab.params.min_n, vocab.params.max_n);
    vocab
        .selected
        .iter()
        .enumerate()
        .filter_map(|(i, gram)| {
            counts.get(gram.as_slice()).map(|&c| (i, c as f64 * vocab.idf[i]))
        })
        .collect()
}

/// Tf-idf weights of `profile` in `category`, which must match the vocabulary.
pub fn transform_tfidf(
    vocab: &TfidfVocabulary,
    category: Category,
    profile: &StyleProfile,
) -> Result<TfidfRow, StyleError> {
    if vocab.category != category {
        return Err(StyleError::CategoryMismatch { expected: vocab.category, found: category });
    }
    Ok(transform_tokens(vocab, profile.sequence(category)))
}

/// One vocabulary per category, fitted on the same corpus of profiles.
pub fn fit_all(profiles: &[StyleProfile], params: TfidfParams) -> Vec<TfidfVocabulary> {
    Category::ALL
        .into_iter()
        .map(|c| {
            let docs: Vec<&[String]> = profiles.iter().map(|p| p.sequence(c)).collect();
            fit_tfidf(c, &docs, params)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{ComponentDecl, ComponentKind, ManifestInfo, MethodRecord, PackageName};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    fn method(name: &str) -> MethodRecord {
        MethodRecord {
            name: name.into(),
            instructions: vec!["invoke-virtual".into(), "return-void".into()],
            api_calls: vec!["android.app.Activity.setContentView".into()],
            overrides_framework: false,
        }
    }

    fn app() -> (AppBundle, AuthorshipPartition) {
        let p = PackageName::new("com.me").unwrap();
        let lib = PackageName::new("org.lib").unwrap();
        let bundle = AppBundle {
            schema_version: 1,
            app_id: "a".into(),
            author_label: None,
            packages: vec![p.clone(), lib.clone()],
            classes: vec![
                ClassRecord {
                    name: "com.me.Foo".into(),
                    package: p.clone(),
                    superclass: None,
                    fields: vec!["mCount".into()],
                    methods: vec![method("bar"), method("onCreate")],
                    is_component: Some(ComponentKind::Activity),
                },
                ClassRecord {
                    name: "org.lib.Helper".into(),
                    package: lib.clone(),
                    superclass: None,
                    fields: vec![],
                    methods: vec![method("libCall")],
                    is_component: None,
                },
            ],
            relations: vec![],
            manifest: ManifestInfo {
                main_activity: Some("com.me.Foo".into()),
                components: vec![ComponentDecl { kind: ComponentKind::Activity, name: "com.me.Foo".into() }],
                uses_features: vec!["camera".into()],
            },
            libraries: vec!["org.lib".into()],
        };
        let partition = AuthorshipPartition {
            module_of: [(p, 0), (lib, 1)].into_iter().collect(),
            primary_module: 0,
            primary_fallback: false,
        };
        (bundle, partition)
    }

    #[test]
    fn override_methods_are_not_identifiers() {
        let (b, part) = app();
        let overrides = crate::config::default_framework_overrides();
        let p = extract_profile(&b, ProfileScope::PrimaryModule(&part), &overrides).unwrap();
        assert_eq!(p.identifiers, toks("Foo mCount bar"));
        assert_eq!(p.uses_features, toks("camera"));
        assert_eq!(p.component_names, toks("Foo"));
        assert_eq!(p.library_names, toks("org.lib"));
        // onCreate still contributes its body.
        assert_eq!(p.instructions.len(), 4);
        assert!(!p.identifiers.iter().any(|t| t == "Helper" || t == "libCall"));
    }

    #[test]
    fn whole_app_scope_includes_library_classes() {
        let (b, _) = app();
        let p = extract_profile(&b, ProfileScope::WholeApp, &[]).unwrap();
        assert!(p.identifiers.iter().any(|t| t == "Helper"));
        assert!(p.identifiers.iter().any(|t| t == "onCreate"));
    }

    #[test]
    fn empty_primary_module_errors() {
        let (b, mut part) = app();
        part.primary_module = 7;
        assert_eq!(
            extract_profile(&b, ProfileScope::PrimaryModule(&part), &[]),
            Err(StyleError::EmptyPrimaryModule)
        );
    }

    #[test]
    fn identifier_splitting() {
        let t: Vec<&str> = identifier_tokens("Outer$InnerView").collect();
        assert_eq!(t, vec!["Outer", "InnerView"]);
    }

    #[test]
    fn two_documents_give_empty_vocabulary() {
        let corpus = vec![toks("a b c d"), toks("a b c d")];
        let v = fit_tfidf(Category::Instructions, &corpus, TfidfParams::default());
        assert!(v.is_empty());
    }

    #[test]
    fn identical_trigram_documents() {
        let corpus = vec![toks("x y z"); 5];
        let v = fit_tfidf(Category::Instructions, &corpus, TfidfParams::default());
        assert_eq!(v.selected, vec![toks("x y z")]);
        assert_eq!(v.document_frequency, vec![5]);
        assert!((v.idf[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transform_weights() {
        let vocab = TfidfVocabulary {
            category: Category::ApiCalls,
            params: TfidfParams::default(),
            documents: 10,
            selected: vec![toks("a b c"), toks("q r s")],
            idf: vec![1.5, 2.0],
            document_frequency: vec![4, 3],
        };
        let profile = StyleProfile { api_calls: toks("a b c a b c"), ..Default::default() };
        assert_eq!(transform_tfidf(&vocab, Category::ApiCalls, &profile).unwrap(), vec![(0, 3.0)]);
        let empty = StyleProfile::default();
        assert!(transform_tfidf(&vocab, Category::ApiCalls, &empty).unwrap().is_empty());
        assert!(matches!(
            transform_tfidf(&vocab, Category::Identifiers, &profile),
            Err(StyleError::CategoryMismatch { .. })
        ));
    }
}
