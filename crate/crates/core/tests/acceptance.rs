//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use authorscope::classifiers::{ClassifierKind, FingerprintScope};
use authorscope::evaluation::{generate_corpus, CorpusConfig};
use authorscope::pipeline::{evaluate_decoupling, EvaluationReport};
use authorscope::{evaluate, AppBundle, EvaluateOptions, PipelineConfig};

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        println!("{} {name}: {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
        if !ok {
            self.failures += 1;
        }
    }

    fn check(&mut self, name: &str, result: common::Check) {
        match result {
            Ok(detail) => self.report(name, true, detail),
            Err(detail) => self.report(name, false, detail),
        }
    }
}

fn accuracy(reports: &[EvaluationReport], kind: ClassifierKind) -> f64 {
    reports.iter().find(|r| r.classifier == kind).map_or(0.0, |r| r.aggregate.accuracy)
}

fn summary(reports: &[EvaluationReport]) -> String {
    reports.iter().map(|r| format!("{}={:.3}", r.classifier.as_str(), r.aggregate.accuracy)).collect::<Vec<_>>().join(" ")
}

fn run(apps: &[AppBundle], scope: FingerprintScope, obfuscate_test: Option<u64>) -> (Vec<EvaluationReport>, Duration) {
    let config = PipelineConfig { scope, seed: 42, ..Default::default() };
    let options = EvaluateOptions { k: 10, kinds: ClassifierKind::ALL.to_vec(), obfuscate_test };
    let start = Instant::now();
    let reports = evaluate(apps.to_vec(), &options, &config).expect("evaluation failed");
    (reports, start.elapsed())
}

fn decoupling(suite: &mut Suite) {
    let cfg = CorpusConfig { n_authors: 50, apps_per_author: 1, modules_per_app: (3, 6), seed: 42, ..Default::default() };
    let corpus = generate_corpus(&cfg);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let summary = pool.install(|| evaluate_decoupling(&corpus.apps, &corpus.truth, &Default::default())).unwrap();
    let elapsed = start.elapsed();
    suite.report(
        "decoupling",
        summary.accuracy >= 0.95 && elapsed <= Duration::from_secs(60) && summary.per_app.len() == 50,
        format!(
            "{} apps, mean accuracy {:.4} (>= 0.95), precision {:.4}, recall {:.4}, {:.2?} single-threaded (<= 60 s)",
            summary.per_app.len(),
            summary.accuracy,
            summary.precision,
            summary.recall,
            elapsed
        ),
    );
}

fn identification(suite: &mut Suite) {
    let cfg = CorpusConfig {
        n_authors: 20,
        apps_per_author: 10,
        modules_per_app: (3, 6),
        library_pool: 10,
        seed: 42,
        ..Default::default()
    };
    let apps = generate_corpus(&cfg).apps;

    let (primary, elapsed) = run(&apps, FingerprintScope::PrimaryModule, None);
    let rf = accuracy(&primary, ClassifierKind::RandomForest);
    let accs: Vec<f64> = primary.iter().map(|r| r.aggregate.accuracy).collect();
    let spread = accs.iter().copied().fold(f64::NEG_INFINITY, f64::max) - accs.iter().copied().fold(f64::INFINITY, f64::min);
    suite.report(
        "identification",
        rf >= 0.90 && spread <= 0.05 && elapsed <= Duration::from_secs(600),
        format!(
            "20 authors x 10 apps, 10-fold: {} (random_forest >= 0.90), spread {:.3} (<= 0.05), {:.1?} (<= 10 min)",
            summary(&primary),
            spread,
            elapsed
        ),
    );

    let (whole, _) = run(&apps, FingerprintScope::WholeApp, None);
    let gain = rf - accuracy(&whole, ClassifierKind::RandomForest);
    suite.report(
        "primary-vs-whole-app",
        gain >= 0.02,
        format!("whole app: {}; random_forest gain {:+.3} (>= 0.02)", summary(&whole), gain),
    );

    let (obfuscated, _) = run(&apps, FingerprintScope::PrimaryModule, Some(7));
    let drop = rf - accuracy(&obfuscated, ClassifierKind::RandomForest);
    suite.report(
        "obfuscation",
        drop <= 0.10,
        format!("obfuscated test folds: {}; random_forest drop {:.3} (<= 0.10)", summary(&obfuscated), drop),
    );
}

fn main() -> ExitCode {
    let mut suite = Suite { failures: 0 };

    decoupling(&mut suite);
    identification(&mut suite);

    suite.check("oracle-aggregation", common::aggregation_oracle());
    suite.check("oracle-floyd", common::floyd_oracle());
    suite.check("oracle-louvain", common::louvain_oracle());
    suite.check("oracle-tfidf", common::tfidf_oracle());

    let sgns = common::sgns_gradient_error();
    suite.report("gradient-word2vec", sgns <= 1e-4, format!("max relative error {sgns:.2e} (<= 1e-4)"));
    let logreg = common::logreg_gradient_error();
    suite.report("gradient-logreg", logreg <= 1e-5, format!("max relative error {logreg:.2e} (<= 1e-5)"));
    let rows = common::probability_row_deviation();
    suite.report("logreg-probability-rows", rows <= 1e-9, format!("max |sum - 1| {rows:.2e} (<= 1e-9)"));

    let first = common::run_outputs(42);
    let second = common::run_outputs(42);
    let bytes: usize = first.iter().map(Vec::len).sum();
    suite.report(
        "determinism",
        first == second,
        format!("{} outputs, {bytes} bytes compared across two runs with seed 42", first.len()),
    );

    if suite.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", suite.failures);
        ExitCode::FAILURE
    }
}
