//! Synthetic labeled corpus with known module provenance.
//!
//! Every author gets a [`SyntheticAuthorStyle`]. An app is one primary
//! module written in that style plus a few modules copied verbatim from a
//! pool of third-party libraries shared by all authors. Primary and library
//! packages form a call cycle over the first half of the module, and every
//! remaining package is called from an earlier one. The primary module links
//! to its libraries through one or two single calls or inheritances.
//!
//! Knobs:
//! - `distinctiveness` in `[0, 1]`: probability that any stylistic choice
//!   (identifier morpheme, API idiom, instruction idiom, signature class) is
//!   drawn from the author's own pools rather than from pools shared by all.
//! - `library_affinity` in `[0, 1]`: probability that a library slot is
//!   filled from the author's preferred libraries rather than uniformly.
//! - `declared_library_rate` in `[0, 1]`: probability that an included
//!   library is listed in `libraries`, which lets aggregation merge it.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{
    AppBundle, ClassRecord, ComponentDecl, ComponentKind, ManifestInfo, MethodRecord, PackageName,
    RelationKind, RelationRecord, SCHEMA_VERSION,
};

pub const OPCODES: &[&str] = &[
    "const/4", "const/16", "const-string", "move", "move-result", "move-result-object",
    "move-object", "return", "return-void", "return-object", "if-eqz", "if-nez", "if-lt", "if-ge",
    "goto", "iget", "iget-object", "iput", "iput-object", "sget-object", "sput", "invoke-virtual",
    "invoke-direct", "invoke-static", "invoke-interface", "new-instance", "new-array",
    "check-cast", "add-int/lit8", "aget-object", "aput", "array-length", "throw", "monitor-enter",
];

pub const APIS: &[&str] = &[
    "android.app.Activity.setContentView", "android.app.Activity.findViewById",
    "android.app.Activity.startActivity", "android.app.Activity.finish",
    "android.app.Activity.getIntent", "android.app.Service.startForeground",
    "android.app.NotificationManager.notify", "android.app.AlertDialog$Builder.setTitle",
    "android.app.AlertDialog$Builder.show", "android.content.Context.getSharedPreferences",
    "android.content.Context.getSystemService", "android.content.Context.startService",
    "android.content.Context.registerReceiver", "android.content.Intent.putExtra",
    "android.content.Intent.getStringExtra", "android.content.SharedPreferences.getString",
    "android.content.SharedPreferences$Editor.putString",
    "android.content.SharedPreferences$Editor.apply", "android.content.ContentResolver.query",
    "android.database.Cursor.moveToNext", "android.database.Cursor.getString",
    "android.database.sqlite.SQLiteDatabase.insert", "android.database.sqlite.SQLiteDatabase.rawQuery",
    "android.graphics.BitmapFactory.decodeStream", "android.graphics.Canvas.drawBitmap",
    "android.graphics.Paint.setColor", "android.location.LocationManager.requestLocationUpdates",
    "android.media.MediaPlayer.start", "android.media.MediaPlayer.prepare",
    "android.net.ConnectivityManager.getActiveNetworkInfo", "android.net.Uri.parse",
    "android.os.Handler.post", "android.os.Handler.postDelayed", "android.os.Bundle.putString",
    "android.os.Bundle.getString", "android.os.AsyncTask.execute", "android.os.Looper.getMainLooper",
    "android.telephony.TelephonyManager.getDeviceId", "android.text.TextUtils.isEmpty",
    "android.util.Log.d", "android.util.Log.e", "android.util.Log.i", "android.view.View.setOnClickListener",
    "android.view.View.setVisibility", "android.view.LayoutInflater.inflate",
    "android.view.ViewGroup.addView", "android.widget.TextView.setText", "android.widget.Toast.makeText",
    "android.widget.Toast.show", "android.widget.ListView.setAdapter", "android.widget.Button.setEnabled",
    "android.widget.EditText.getText", "android.widget.ImageView.setImageBitmap",
    "java.lang.StringBuilder.append", "java.lang.StringBuilder.toString", "java.lang.Integer.parseInt",
    "java.lang.String.format", "java.lang.Thread.start", "java.util.ArrayList.add",
    "java.util.HashMap.put", "java.util.HashMap.get", "java.io.InputStream.read",
    "java.io.File.exists", "java.net.URL.openConnection", "org.json.JSONObject.getString",
    "org.json.JSONObject.put",
];

pub const FEATURES: &[&str] = &[
    "android.hardware.camera", "android.hardware.camera.autofocus", "android.hardware.camera.flash",
    "android.hardware.location", "android.hardware.location.gps", "android.hardware.location.network",
    "android.hardware.microphone", "android.hardware.telephony", "android.hardware.wifi",
    "android.hardware.bluetooth", "android.hardware.bluetooth_le", "android.hardware.nfc",
    "android.hardware.sensor.accelerometer", "android.hardware.sensor.compass",
    "android.hardware.sensor.gyroscope", "android.hardware.sensor.light",
    "android.hardware.sensor.proximity", "android.hardware.screen.portrait",
    "android.hardware.screen.landscape", "android.hardware.touchscreen",
    "android.hardware.touchscreen.multitouch", "android.hardware.usb.host",
    "android.hardware.faketouch", "android.software.home_screen",
];

const COMMON_WORDS: &[&str] = &[
    "Data", "Item", "User", "List", "View", "Base", "Info", "Manager", "Helper", "Util", "Config",
    "Task", "Event", "Holder", "Adapter", "Result", "Request", "Cache", "Store", "Model", "State",
    "Loader", "Handler", "Entry", "Record", "Value", "Option", "Message", "Action", "Context",
];

const COMMON_VERBS: &[&str] =
    &["get", "set", "load", "init", "update", "handle", "build", "create", "show", "check", "parse", "save"];

const SUBPACKAGES: &[&str] =
    &["ui", "data", "net", "util", "model", "service", "widget", "core", "db", "io", "view", "sync"];

const LIBRARY_TLDS: &[&str] = &["org", "io", "net", "de", "me", "uk", "fr", "ch"];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ru", "te", "va", "zo", "pe", "dri", "sa", "nu", "bo", "fi", "ga", "he",
    "jo", "qui", "we", "yo", "to", "ma", "ne", "pi", "ro", "su", "ti", "ve", "xa", "lu", "cor",
    "dan", "fen", "gil", "hov", "kes", "lim", "mor", "nax", "pul", "rim", "sev", "tam", "vor",
    "wix", "zen", "bri", "cla", "fro", "glo", "pra", "sti", "tre", "bla", "spo", "ku", "de",
];

/// Which part of an app a class belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Primary,
    Library,
}

/// Class-level provenance of every generated app, keyed by app id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub apps: BTreeMap<String, BTreeMap<String, Provenance>>,
}

impl GroundTruth {
    pub fn app(&self, app_id: &str) -> Option<&BTreeMap<String, Provenance>> {
        self.apps.get(app_id)
    }
}

/// How an author names manifest components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentPattern {
    /// `LumaActivity`
    MorphKind,
    /// `ActivityLuma`
    KindMorph,
    /// `LumaScreen`, `LumaWorker`, ...
    MorphRole,
}

impl ComponentPattern {
    fn name(self, morph: &str, kind: ComponentKind) -> String {
        let (long, role) = match kind {
            ComponentKind::Activity => ("Activity", "Screen"),
            ComponentKind::Service => ("Service", "Worker"),
            ComponentKind::Receiver => ("Receiver", "Listener"),
            ComponentKind::Provider => ("Provider", "Source"),
        };
        match self {
            ComponentPattern::MorphKind => format!("{morph}{long}"),
            ComponentPattern::KindMorph => format!("{long}{morph}"),
            ComponentPattern::MorphRole => format!("{morph}{role}"),
        }
    }
}

/// A class without a package, copied into apps as-is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub simple_name: String,
    pub fields: Vec<String>,
    pub methods: Vec<MethodRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAuthorStyle {
    pub label: String,
    pub handle: String,
    pub morphemes: Vec<String>,
    pub verbs: Vec<String>,
    pub field_prefix: String,
    /// API name and probability; probabilities sum to 1.
    pub api_preference: Vec<(String, f64)>,
    pub api_idioms: Vec<Vec<String>>,
    pub instruction_idioms: Vec<Vec<String>>,
    /// Indices into the library pool.
    pub library_preference: Vec<usize>,
    pub feature_preference: Vec<String>,
    pub component_pattern: ComponentPattern,
    pub components: Vec<(ComponentKind, String)>,
    pub signature_classes: Vec<ClassTemplate>,
    pub seed: u64,
}

/// A third-party library: fixed code under its own prefix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LibraryTemplate {
    pub prefix: String,
    pub packages: Vec<PackageName>,
    pub classes: Vec<ClassRecord>,
    pub relations: Vec<RelationRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub n_authors: usize,
    pub apps_per_author: usize,
    /// Inclusive range of modules per app, the primary module included.
    pub modules_per_app: (usize, usize),
    pub library_pool: usize,
    pub distinctiveness: f64,
    pub library_affinity: f64,
    pub declared_library_rate: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            n_authors: 5,
            apps_per_author: 4,
            modules_per_app: (1, 5),
            library_pool: 10,
            distinctiveness: 0.8,
            library_affinity: 0.3,
            declared_library_rate: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub styles: Vec<SyntheticAuthorStyle>,
    pub libraries: Vec<LibraryTemplate>,
    /// Sorted by app id.
    pub apps: Vec<AppBundle>,
    pub truth: GroundTruth,
}

struct Words {
    used: BTreeSet<String>,
}

impl Words {
    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let n = rng.gen_range(2..=3);
            let w: String = (0..n).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn fresh_capital(&mut self, rng: &mut ChaCha8Rng) -> String {
        capitalize(&self.fresh(rng))
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn lower_first(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pkg(s: &str) -> PackageName {
    PackageName::new(s).expect("generated package names are valid")
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Token source shared by authors and libraries.
struct Palette {
    morphemes: Vec<String>,
    verbs: Vec<String>,
    field_prefix: String,
    api_preference: Vec<(String, f64)>,
    api_idioms: Vec<Vec<String>>,
    instruction_idioms: Vec<Vec<String>>,
    distinctiveness: f64,
}

fn common_idioms() -> Vec<Vec<String>> {
    vec![
        strings(&["invoke-virtual", "move-result-object", "return-object"]),
        strings(&["const/4", "if-eqz", "return-void"]),
        strings(&["iget-object", "invoke-virtual", "return-void"]),
        strings(&["new-instance", "invoke-direct", "iput-object"]),
    ]
}

impl Palette {
    fn new(words: &mut Words, rng: &mut ChaCha8Rng, distinctiveness: f64) -> Self {
        let morphemes: Vec<String> = (0..10).map(|_| words.fresh_capital(rng)).collect();
        let mut verbs: Vec<String> = (0..3).map(|_| words.fresh(rng)).collect();
        verbs.extend(COMMON_VERBS.choose_multiple(rng, 3).map(|v| v.to_string()));
        let field_prefix = ["m", "_", "f", "my"].choose(rng).unwrap().to_string();

        let favored: Vec<&str> = APIS.choose_multiple(rng, 14).copied().collect();
        let raw: Vec<f64> = favored.iter().map(|_| rng.gen_range(0.2..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let api_preference: Vec<(String, f64)> =
            favored.iter().zip(&raw).map(|(a, w)| (a.to_string(), w / z)).collect();
        let api_idioms = (0..4)
            .map(|_| {
                let n = rng.gen_range(3..=4);
                (0..n).map(|_| favored.choose(rng).unwrap().to_string()).collect()
            })
            .collect();
        let instruction_idioms = (0..6)
            .map(|_| {
                let n = rng.gen_range(4..=6);
                (0..n).map(|_| OPCODES.choose(rng).unwrap().to_string()).collect()
            })
            .collect();
        Palette {
            morphemes,
            verbs,
            field_prefix,
            api_preference,
            api_idioms,
            instruction_idioms,
            distinctiveness,
        }
    }

    fn own(&self, rng: &mut ChaCha8Rng) -> bool {
        rng.gen_bool(self.distinctiveness.clamp(0.0, 1.0))
    }

    fn morpheme(&self, rng: &mut ChaCha8Rng) -> String {
        if self.own(rng) {
            self.morphemes.choose(rng).unwrap().clone()
        } else {
            COMMON_WORDS.choose(rng).unwrap().to_string()
        }
    }

    fn class_name(&self, rng: &mut ChaCha8Rng) -> String {
        format!("{}{}", self.morpheme(rng), self.morpheme(rng))
    }

    fn field(&self, rng: &mut ChaCha8Rng) -> String {
        let m = self.morpheme(rng);
        if self.field_prefix == "_" {
            format!("_{}", lower_first(&m))
        } else {
            format!("{}{}", self.field_prefix, m)
        }
    }

    fn method_name(&self, rng: &mut ChaCha8Rng) -> String {
        let verb = if self.own(rng) {
            self.verbs.choose(rng).unwrap().clone()
        } else {
            COMMON_VERBS.choose(rng).unwrap().to_string()
        };
        format!("{verb}{}", self.morpheme(rng))
    }

    fn api(&self, rng: &mut ChaCha8Rng) -> String {
        if self.own(rng) {
            let mut u: f64 = rng.gen();
            for (api, p) in &self.api_preference {
                if u < *p {
                    return api.clone();
                }
                u -= p;
            }
            self.api_preference.last().unwrap().0.clone()
        } else {
            APIS.choose(rng).unwrap().to_string()
        }
    }

    fn instructions(&self, rng: &mut ChaCha8Rng) -> Vec<String> {
        let common = common_idioms();
        let mut out = Vec::new();
        for _ in 0..2 {
            let idiom = if self.own(rng) {
                self.instruction_idioms.choose(rng).unwrap()
            } else {
                common.choose(rng).unwrap()
            };
            out.extend(idiom.iter().cloned());
            if rng.gen_bool(0.5) {
                out.push(OPCODES.choose(rng).unwrap().to_string());
            }
        }
        out
    }

    fn api_calls(&self, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut out = Vec::new();
        if self.own(rng) {
            out.extend(self.api_idioms.choose(rng).unwrap().iter().cloned());
        }
        for _ in 0..rng.gen_range(1..=2) {
            out.push(self.api(rng));
        }
        out
    }

    /// A method; roughly one in six is a helper without API calls.
    fn method(&self, rng: &mut ChaCha8Rng) -> MethodRecord {
        let helper = rng.gen_bool(1.0 / 6.0);
        MethodRecord {
            name: self.method_name(rng),
            instructions: self.instructions(rng),
            api_calls: if helper { vec![] } else { self.api_calls(rng) },
            overrides_framework: false,
        }
    }

    fn class_template(&self, rng: &mut ChaCha8Rng, methods: usize) -> ClassTemplate {
        ClassTemplate {
            simple_name: self.class_name(rng),
            fields: (0..rng.gen_range(1..=3)).map(|_| self.field(rng)).collect(),
            methods: (0..methods).map(|_| self.method(rng)).collect(),
        }
    }
}

fn framework_override(name: &str, palette: &Palette, rng: &mut ChaCha8Rng) -> MethodRecord {
    MethodRecord {
        name: name.into(),
        instructions: palette.instructions(rng),
        api_calls: palette.api_calls(rng),
        overrides_framework: true,
    }
}

fn instantiate(t: &ClassTemplate, package: &PackageName) -> ClassRecord {
    ClassRecord {
        name: format!("{}.{}", package, t.simple_name),
        package: package.clone(),
        superclass: None,
        fields: t.fields.clone(),
        methods: t.methods.clone(),
        is_component: None,
    }
}

/// A call cycle over the first half of `packages`; every other package hangs
/// off an earlier one through a single call edge.
fn module_relations(
    packages: &[PackageName],
    rng: &mut ChaCha8Rng,
    counts: std::ops::RangeInclusive<u64>,
) -> Vec<RelationRecord> {
    let mut rels = Vec::new();
    let core = packages.len().div_ceil(2).max(2).min(packages.len());
    if core >= 2 {
        for i in 0..core {
            rels.push(RelationRecord {
                from_pkg: packages[i].clone(),
                to_pkg: packages[(i + 1) % core].clone(),
                kind: RelationKind::Call,
                count: rng.gen_range(counts.clone()),
            });
        }
    }
    for i in core..packages.len() {
        rels.push(RelationRecord {
            from_pkg: packages[rng.gen_range(0..i)].clone(),
            to_pkg: packages[i].clone(),
            kind: RelationKind::Call,
            count: rng.gen_range(counts.clone()),
        });
    }
    rels
}

fn generate_library(words: &mut Words, rng: &mut ChaCha8Rng, used_prefixes: &BTreeSet<String>) -> LibraryTemplate {
    let prefix = loop {
        let p = format!("{}.{}.{}", LIBRARY_TLDS.choose(rng).unwrap(), words.fresh(rng), words.fresh(rng));
        if !used_prefixes.contains(&p) {
            break p;
        }
    };
    let palette = Palette::new(words, rng, 0.9);
    let n_subs = rng.gen_range(3..=5);
    let mut subs: Vec<&str> = SUBPACKAGES.choose_multiple(rng, n_subs).copied().collect();
    subs.sort_unstable();
    let mut packages = vec![pkg(&prefix)];
    packages.extend(subs.iter().map(|s| pkg(&format!("{prefix}.{s}"))));

    let mut classes = Vec::new();
    let mut names = BTreeSet::new();
    for i in 0..rng.gen_range(9..=14) {
        let p = &packages[i % packages.len()];
        let n_methods = rng.gen_range(3..=5);
        let t = palette.class_template(rng, n_methods);
        if names.insert(format!("{p}.{}", t.simple_name)) {
            classes.push(instantiate(&t, p));
        }
    }
    let relations = module_relations(&packages, rng, 3..=15);
    LibraryTemplate { prefix, packages, classes, relations }
}

fn generate_style(
    index: usize,
    words: &mut Words,
    rng: &mut ChaCha8Rng,
    config: &CorpusConfig,
    seed: u64,
) -> SyntheticAuthorStyle {
    let palette = Palette::new(words, rng, config.distinctiveness);
    let handle = words.fresh(rng);
    let component_pattern =
        *[ComponentPattern::MorphKind, ComponentPattern::KindMorph, ComponentPattern::MorphRole]
            .choose(rng)
            .unwrap();
    let kinds = [
        ComponentKind::Activity,
        ComponentKind::Activity,
        ComponentKind::Activity,
        ComponentKind::Service,
        ComponentKind::Receiver,
        ComponentKind::Provider,
    ];
    let components = kinds
        .iter()
        .map(|&k| (k, component_pattern.name(palette.morphemes.choose(rng).unwrap(), k)))
        .collect();
    let signature_classes = (0..5)
        .map(|_| {
            let n_methods = rng.gen_range(3..=4);
            let mut t = palette.class_template(rng, n_methods);
            // Signature code is the author's own: no shared pools.
            t.simple_name = format!(
                "{}{}",
                palette.morphemes.choose(rng).unwrap(),
                palette.morphemes.choose(rng).unwrap()
            );
            t
        })
        .collect();
    let mut library_preference: Vec<usize> = (0..config.library_pool).collect();
    library_preference.shuffle(rng);
    library_preference.truncate(3);
    let feature_preference = FEATURES.choose_multiple(rng, 5).map(|f| f.to_string()).collect();

    SyntheticAuthorStyle {
        label: format!("author{index:02}"),
        handle,
        morphemes: palette.morphemes,
        verbs: palette.verbs,
        field_prefix: palette.field_prefix,
        api_preference: palette.api_preference,
        api_idioms: palette.api_idioms,
        instruction_idioms: palette.instruction_idioms,
        library_preference,
        feature_preference,
        component_pattern,
        components,
        signature_classes,
        seed,
    }
}

fn palette_of(style: &SyntheticAuthorStyle, distinctiveness: f64) -> Palette {
    Palette {
        morphemes: style.morphemes.clone(),
        verbs: style.verbs.clone(),
        field_prefix: style.field_prefix.clone(),
        api_preference: style.api_preference.clone(),
        api_idioms: style.api_idioms.clone(),
        instruction_idioms: style.instruction_idioms.clone(),
        distinctiveness,
    }
}

fn component_superclass(kind: ComponentKind) -> &'static str {
    match kind {
        ComponentKind::Activity => "android.app.Activity",
        ComponentKind::Service => "android.app.Service",
        ComponentKind::Receiver => "android.content.BroadcastReceiver",
        ComponentKind::Provider => "android.content.ContentProvider",
    }
}

fn component_overrides(kind: ComponentKind) -> &'static [&'static str] {
    match kind {
        ComponentKind::Activity => &["onCreate", "onResume", "onPause"],
        ComponentKind::Service => &["onCreate", "onDestroy"],
        ComponentKind::Receiver => &["onReceive"],
        ComponentKind::Provider => &["onCreate", "query"],
    }
}

const FRAMEWORK_SUPPORT_PACKAGE: &str = "android.support.v4.app";

#[allow(clippy::too_many_arguments)]
fn generate_app(
    style: &SyntheticAuthorStyle,
    app_index: usize,
    libraries: &[LibraryTemplate],
    config: &CorpusConfig,
    words: &mut Words,
    rng: &mut ChaCha8Rng,
) -> (AppBundle, BTreeMap<String, Provenance>) {
    let palette = palette_of(style, config.distinctiveness);
    let app_word = words.fresh(rng);
    let root = format!("com.{}.{}", style.handle, app_word);
    let n_subs = rng.gen_range(3..=6);
    let mut subs: Vec<&str> = SUBPACKAGES.choose_multiple(rng, n_subs).copied().collect();
    subs.sort_unstable();
    let mut primary_pkgs = vec![pkg(&root)];
    primary_pkgs.extend(subs.iter().map(|s| pkg(&format!("{root}.{s}"))));
    // The leaf package (last) holds no components so it is only reachable
    // through clustering.
    let component_pkgs = &primary_pkgs[..primary_pkgs.len() - 1];

    let mut out = Collected::default();

    // Manifest components: the main activity plus a subset of the author's
    // habitual components, and one ad-hoc component.
    let mut decls: Vec<(ComponentKind, String)> = vec![style.components[0].clone()];
    for c in &style.components[1..] {
        if rng.gen_bool(0.6) {
            decls.push(c.clone());
        }
    }
    if rng.gen_bool(0.7) {
        let k = *[ComponentKind::Activity, ComponentKind::Service].choose(rng).unwrap();
        decls.push((k, style.component_pattern.name(&palette.morpheme(rng), k)));
    }
    let mut components = Vec::new();
    for (i, (kind, simple)) in decls.iter().enumerate() {
        let p = if i == 0 { &component_pkgs[0] } else { component_pkgs.choose(rng).unwrap() };
        let mut methods: Vec<MethodRecord> =
            component_overrides(*kind).iter().map(|m| framework_override(m, &palette, rng)).collect();
        methods.extend((0..rng.gen_range(1..=3)).map(|_| palette.method(rng)));
        let class = ClassRecord {
            name: format!("{p}.{simple}"),
            package: p.clone(),
            superclass: Some(component_superclass(*kind).into()),
            fields: (0..rng.gen_range(1..=2)).map(|_| palette.field(rng)).collect(),
            methods,
            is_component: Some(*kind),
        };
        let decl = ComponentDecl { kind: *kind, name: class.name.clone() };
        if out.push(class, Provenance::Primary) {
            components.push(decl);
        }
    }
    let main_activity = components[0].name.clone();

    for t in &style.signature_classes {
        if palette.own(rng) {
            out.push(instantiate(t, primary_pkgs.choose(rng).unwrap()), Provenance::Primary);
        }
    }
    for p in &primary_pkgs {
        for _ in 0..rng.gen_range(1..=2) {
            let n_methods = rng.gen_range(2..=4);
            let t = palette.class_template(rng, n_methods);
            out.push(instantiate(&t, p), Provenance::Primary);
        }
    }

    let mut relations = module_relations(&primary_pkgs, rng, 4..=20);
    if component_pkgs.len() >= 2 {
        relations.push(RelationRecord {
            from_pkg: component_pkgs[0].clone(),
            to_pkg: component_pkgs[1].clone(),
            kind: RelationKind::Icc,
            count: 1,
        });
    }

    // Framework support code: filtered out before clustering.
    let support = pkg(FRAMEWORK_SUPPORT_PACKAGE);
    out.push(
        ClassRecord {
            name: format!("{FRAMEWORK_SUPPORT_PACKAGE}.FragmentCompat"),
            package: support.clone(),
            superclass: None,
            fields: vec![],
            methods: vec![MethodRecord {
                name: "instantiate".into(),
                instructions: strings(&["invoke-static", "move-result-object", "return-object"]),
                api_calls: vec![],
                overrides_framework: false,
            }],
            is_component: None,
        },
        Provenance::Library,
    );
    relations.push(RelationRecord {
        from_pkg: component_pkgs[0].clone(),
        to_pkg: support.clone(),
        kind: RelationKind::Call,
        count: rng.gen_range(1..=4),
    });

    // Libraries.
    let (lo, hi) = config.modules_per_app;
    let n_libs = rng.gen_range(lo.max(1)..=hi.max(lo.max(1))) - 1;
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < n_libs.min(libraries.len()) {
        let preferred: Vec<usize> =
            style.library_preference.iter().copied().filter(|l| !chosen.contains(l)).collect();
        let pick = if !preferred.is_empty() && rng.gen_bool(config.library_affinity.clamp(0.0, 1.0)) {
            *preferred.choose(rng).unwrap()
        } else {
            let rest: Vec<usize> = (0..libraries.len()).filter(|l| !chosen.contains(l)).collect();
            *rest.choose(rng).unwrap()
        };
        chosen.push(pick);
    }
    chosen.sort_unstable();
    let mut declared = Vec::new();
    let mut packages: Vec<PackageName> = primary_pkgs.clone();
    packages.push(support);
    for &l in &chosen {
        let lib = &libraries[l];
        packages.extend(lib.packages.iter().cloned());
        for c in &lib.classes {
            out.push(c.clone(), Provenance::Library);
        }
        relations.extend(lib.relations.iter().cloned());
        // Sparse coupling: each cross-module package pair carries a single
        // reference, either a call or an inheritance.
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            let pair = (rng.gen_range(0..primary_pkgs.len()), rng.gen_range(0..lib.packages.len()));
            if !pairs.contains(&pair) {
                pairs.push(pair);
            }
        }
        let inherit = pairs.len() > 1 && rng.gen_bool(0.5);
        for (n, &(a, b)) in pairs.iter().enumerate() {
            if inherit && n == 0 {
                let bases: Vec<&ClassRecord> =
                    lib.classes.iter().filter(|c| c.package == lib.packages[b]).collect();
                let subs: Vec<usize> = (0..out.classes.len())
                    .filter(|&i| {
                        let c = &out.classes[i];
                        c.package == primary_pkgs[a]
                            && c.superclass.is_none()
                            && out.truth[&c.name] == Provenance::Primary
                    })
                    .collect();
                if let (Some(base), Some(&i)) = (bases.choose(rng), subs.choose(rng)) {
                    out.classes[i].superclass = Some(base.name.clone());
                    continue;
                }
            }
            relations.push(RelationRecord {
                from_pkg: primary_pkgs[a].clone(),
                to_pkg: lib.packages[b].clone(),
                kind: RelationKind::Call,
                count: 1,
            });
        }
        if rng.gen_bool(config.declared_library_rate.clamp(0.0, 1.0)) {
            declared.push(lib.prefix.clone());
        }
    }

    let mut uses_features: Vec<String> =
        style.feature_preference.iter().filter(|_| rng.gen_bool(0.7)).cloned().collect();
    for _ in 0..rng.gen_range(0..=2) {
        let at = rng.gen_range(0..=uses_features.len());
        uses_features.insert(at, FEATURES.choose(rng).unwrap().to_string());
    }

    let Collected { mut classes, truth, .. } = out;
    packages.sort();
    packages.dedup();
    classes.sort_by(|a, b| a.name.cmp(&b.name));
    relations.sort_by(|a, b| {
        (&a.from_pkg, &a.to_pkg, a.kind, a.count).cmp(&(&b.from_pkg, &b.to_pkg, b.kind, b.count))
    });
    let bundle = AppBundle {
        schema_version: SCHEMA_VERSION,
        app_id: format!("{}-app{:02}", style.label, app_index),
        author_label: Some(style.label.clone()),
        packages,
        classes,
        relations,
        manifest: ManifestInfo { main_activity: Some(main_activity), components, uses_features },
        libraries: declared,
    };
    (bundle, truth)
}

#[derive(Default)]
struct Collected {
    classes: Vec<ClassRecord>,
    names: BTreeSet<String>,
    truth: BTreeMap<String, Provenance>,
}

impl Collected {
    /// Adds `class` unless one with the same name exists.
    fn push(&mut self, class: ClassRecord, prov: Provenance) -> bool {
        if !self.names.insert(class.name.clone()) {
            return false;
        }
        self.truth.insert(class.name.clone(), prov);
        self.classes.push(class);
        true
    }
}

/// Generates a labeled corpus and its ground truth; fully determined by
/// `config`.
pub fn generate_corpus(config: &CorpusConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut words = Words { used: BTreeSet::new() };
    let mut prefixes = BTreeSet::new();
    let libraries: Vec<LibraryTemplate> = (0..config.library_pool)
        .map(|_| {
            let lib = generate_library(&mut words, &mut rng, &prefixes);
            prefixes.insert(lib.prefix.clone());
            lib
        })
        .collect();
    let styles: Vec<SyntheticAuthorStyle> = (0..config.n_authors)
        .map(|a| {
            let seed = rng.gen();
            let mut author_rng = ChaCha8Rng::seed_from_u64(seed);
            generate_style(a, &mut words, &mut author_rng, config, seed)
        })
        .collect();

    let mut apps = Vec::new();
    let mut truth = GroundTruth::default();
    for style in &styles {
        let mut app_rng = ChaCha8Rng::seed_from_u64(style.seed ^ 0x5eed);
        for i in 0..config.apps_per_author {
            let (bundle, t) = generate_app(style, i, &libraries, config, &mut words, &mut app_rng);
            truth.apps.insert(bundle.app_id.clone(), t);
            apps.push(bundle);
        }
    }
    apps.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    SyntheticCorpus { styles, libraries, apps, truth }
}
