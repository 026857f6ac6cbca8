//! Renaming obfuscation in the style of ProGuard, with a crude shrinking pass.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{simple_class_name, AppBundle, MethodRecord, DEFAULT_FRAMEWORK_PREFIXES};
use crate::config::DEFAULT_FRAMEWORK_OVERRIDES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obfuscation {
    pub bundle: AppBundle,
    /// Fully qualified class name, before and after.
    pub class_map: BTreeMap<String, String>,
    /// Simple class, method and field names, before and after.
    pub identifier_map: BTreeMap<String, String>,
    pub dropped_methods: usize,
}

fn is_framework(name: &str) -> bool {
    DEFAULT_FRAMEWORK_PREFIXES.iter().any(|p| name.starts_with(p))
}

fn keeps_name(m: &MethodRecord) -> bool {
    m.overrides_framework || DEFAULT_FRAMEWORK_OVERRIDES.contains(&m.name.as_str())
}

fn short_name(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(1..=3);
    (0..len).map(|_| char::from(b'a' + rng.gen_range(0..26u8))).collect()
}

/// Renames app classes, methods and fields to random names of one to three
/// letters.
///
/// One injective map covers every identifier of the app, so a name used in
/// several places gets the same replacement everywhere. Framework classes,
/// framework overrides, API calls, instruction tokens, packages, relations,
/// features and library prefixes are left alone. Methods that make no API
/// call and override nothing are dropped.
pub fn obfuscate_bundle(bundle: &AppBundle, seed: u64) -> Obfuscation {
    let app_classes: Vec<usize> =
        (0..bundle.classes.len()).filter(|&i| !is_framework(&bundle.classes[i].name)).collect();

    let mut originals: BTreeSet<&str> = BTreeSet::new();
    for &i in &app_classes {
        let c = &bundle.classes[i];
        originals.insert(simple_class_name(&c.name));
        originals.extend(c.fields.iter().map(String::as_str));
        originals.extend(c.methods.iter().filter(|m| !keeps_name(m)).map(|m| m.name.as_str()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut identifier_map = BTreeMap::new();
    for name in originals {
        let new = loop {
            let candidate = short_name(&mut rng);
            if taken.insert(candidate.clone()) {
                break candidate;
            }
        };
        identifier_map.insert(name.to_owned(), new);
    }

    let mut class_map = BTreeMap::new();
    for &i in &app_classes {
        let c = &bundle.classes[i];
        let renamed = format!("{}.{}", c.package, identifier_map[simple_class_name(&c.name)]);
        class_map.insert(c.name.clone(), renamed);
    }
    let rename_class = |name: &str| class_map.get(name).cloned().unwrap_or_else(|| name.to_owned());

    let mut out = bundle.clone();
    let mut dropped_methods = 0;
    for &i in &app_classes {
        let c = &mut out.classes[i];
        c.name = rename_class(&c.name);
        c.superclass = c.superclass.as_deref().map(rename_class);
        for f in &mut c.fields {
            *f = identifier_map[f.as_str()].clone();
        }
        let before = c.methods.len();
        c.methods.retain(|m| keeps_name(m) || !m.api_calls.is_empty());
        dropped_methods += before - c.methods.len();
        for m in &mut c.methods {
            if !keeps_name(m) {
                m.name = identifier_map[m.name.as_str()].clone();
            }
        }
    }
    for c in &mut out.classes {
        if let Some(sup) = &c.superclass {
            c.superclass = Some(rename_class(sup));
        }
    }
    out.classes.sort_by(|a, b| a.name.cmp(&b.name));
    for comp in &mut out.manifest.components {
        comp.name = rename_class(&comp.name);
    }
    out.manifest.main_activity = out.manifest.main_activity.as_deref().map(rename_class);

    Obfuscation { bundle: out, class_map, identifier_map, dropped_methods }
}
