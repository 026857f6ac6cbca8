use std::collections::{BTreeMap, BTreeSet};

use authorscope::clustering::{decouple, AuthorshipPartition, DecoupleConfig};
use authorscope::config::default_framework_overrides;
use authorscope::evaluation::generator::{GroundTruth, Provenance};
use authorscope::evaluation::{decoupling_metrics, generate_corpus, CorpusConfig};
use authorscope::stylometry::{extract_profile, ProfileScope};
use authorscope::{AppBundle, PackageName};

fn corpus(modules: usize, apps: usize, seed: u64) -> (Vec<AppBundle>, GroundTruth) {
    let cfg = CorpusConfig {
        n_authors: apps,
        apps_per_author: 1,
        modules_per_app: (modules, modules),
        seed,
        ..Default::default()
    };
    let c = generate_corpus(&cfg);
    (c.apps, c.truth)
}

/// Primary packages according to the generator's class provenance.
fn true_primary_packages(bundle: &AppBundle, truth: &BTreeMap<String, Provenance>) -> BTreeSet<PackageName> {
    bundle
        .classes
        .iter()
        .filter(|c| truth.get(&c.name) == Some(&Provenance::Primary))
        .map(|c| c.package.clone())
        .collect()
}

fn recovered_primary_packages(partition: &AuthorshipPartition) -> BTreeSet<PackageName> {
    partition.primary_packages().into_iter().cloned().collect()
}

#[test]
fn three_module_app_recovers_generated_partition() {
    let (apps, truth) = corpus(3, 1, 42);
    let app = &apps[0];
    let partition = decouple(app, &DecoupleConfig::default()).unwrap();
    assert_eq!(recovered_primary_packages(&partition), true_primary_packages(app, truth.app(&app.app_id).unwrap()));
    let m = decoupling_metrics(&partition, app, truth.app(&app.app_id).unwrap());
    assert_eq!(m.accuracy, 1.0);
}

#[test]
fn most_three_module_apps_are_recovered_exactly() {
    let (apps, truth) = corpus(3, 40, 7);
    let exact = apps
        .iter()
        .filter(|app| {
            let partition = decouple(app, &DecoupleConfig::default()).unwrap();
            recovered_primary_packages(&partition) == true_primary_packages(app, truth.app(&app.app_id).unwrap())
        })
        .count();
    assert!(exact >= 32, "{exact} of 40 exact");
}

#[test]
fn primary_scope_tokens_all_have_primary_provenance() {
    let (apps, truth) = corpus(2, 10, 3);
    let overrides = default_framework_overrides();
    for app in &apps {
        let provenance = truth.app(&app.app_id).unwrap();
        let primary_pkgs = true_primary_packages(app, provenance);
        let module_of: BTreeMap<PackageName, usize> =
            app.packages.iter().map(|p| (p.clone(), usize::from(!primary_pkgs.contains(p)))).collect();
        let partition = AuthorshipPartition { module_of, primary_module: 0, primary_fallback: false };
        let scoped = extract_profile(app, ProfileScope::PrimaryModule(&partition), &overrides).unwrap();

        // Oracle: the same app with every library class deleted, taken whole.
        let mut stripped = app.clone();
        stripped.classes.retain(|c| provenance.get(&c.name) != Some(&Provenance::Library));
        let whole = extract_profile(&stripped, ProfileScope::WholeApp, &overrides).unwrap();
        assert_eq!(scoped.identifiers, whole.identifiers, "{}", app.app_id);
        assert_eq!(scoped.api_calls, whole.api_calls);
        assert_eq!(scoped.instructions, whole.instructions);

        let library_classes = provenance.values().filter(|p| **p == Provenance::Library).count();
        assert!(library_classes > 0, "{} has no library module", app.app_id);
    }
}
