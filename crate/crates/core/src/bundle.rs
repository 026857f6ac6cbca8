//! App bundle interchange format.
//!
//! One JSON document describes one app: its packages, classes, methods,
//! package-level relations, manifest facts and the known third-party library
//! roots. Every other stage of the pipeline consumes these types.
//!
//! Serialization is canonical: object keys are sorted and lists keep their
//! input order, so two writes of the same value are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The only schema version understood by this crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Package prefixes treated as platform code unless configured otherwise.
pub const DEFAULT_FRAMEWORK_PREFIXES: &[&str] =
    &["android.", "androidx.", "java.", "javax.", "kotlin.", "kotlinx."];

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("reference error: {0}")]
    Reference(String),
    #[error("invalid bundle: {0}")]
    Invalid(ValidationReport),
}

/// A dotted Java package name such as `com.example.app.ui`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PackageName(String);

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid package name `{0}`")]
pub struct InvalidPackageName(pub String);

impl PackageName {
    pub fn new(name: impl Into<String>) -> Result<Self, InvalidPackageName> {
        let name = name.into();
        let ok = !name.is_empty()
            && name.split('.').all(|s| !s.is_empty())
            && !name.chars().any(char::is_whitespace);
        if ok {
            Ok(PackageName(name))
        } else {
            Err(InvalidPackageName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.split('.')
    }

    pub fn depth(&self) -> usize {
        self.segments().count()
    }

    /// Segment-wise prefix test: `com.a` is a prefix of `com.a.b` but not of `com.ab`.
    pub fn has_segment_prefix(&self, prefix: &str) -> bool {
        let prefix = prefix.trim_end_matches('.');
        self.0 == prefix
            || (self.0.starts_with(prefix) && self.0.as_bytes().get(prefix.len()) == Some(&b'.'))
    }

    /// Number of leading segments shared with `other`.
    pub fn common_segments(&self, other: &PackageName) -> usize {
        self.segments()
            .zip(other.segments())
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// True when the name starts with any of the given framework prefixes.
    ///
    /// Prefixes ending in `.` match on a segment boundary, as does a bare
    /// prefix such as `android`.
    pub fn is_framework(&self, prefixes: &[String]) -> bool {
        prefixes.iter().any(|p| self.has_segment_prefix(p))
    }
}

impl TryFrom<String> for PackageName {
    type Error = InvalidPackageName;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        PackageName::new(value)
    }
}

impl From<PackageName> for String {
    fn from(value: PackageName) -> Self {
        value.0
    }
}

impl fmt::Display for PackageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for PackageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PackageName({})", self.0)
    }
}

/// Splits a fully qualified class name into its package part, if any.
pub fn package_of_class(class_name: &str) -> Option<&str> {
    class_name.rfind('.').map(|i| &class_name[..i])
}

/// The unqualified part of a class name (`Outer$Inner` for `a.b.Outer$Inner`).
pub fn simple_class_name(class_name: &str) -> &str {
    class_name.rfind('.').map_or(class_name, |i| &class_name[i + 1..])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComponentKind {
    Activity,
    Service,
    Receiver,
    Provider,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Activity => "activity",
            ComponentKind::Service => "service",
            ComponentKind::Receiver => "receiver",
            ComponentKind::Provider => "provider",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Call,
    Inherit,
    Icc,
}

impl RelationKind {
    pub const ALL: [RelationKind; 3] = [RelationKind::Call, RelationKind::Inherit, RelationKind::Icc];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodRecord {
    pub name: String,
    pub instructions: Vec<String>,
    pub api_calls: Vec<String>,
    pub overrides_framework: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassRecord {
    pub name: String,
    pub package: PackageName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superclass: Option<String>,
    pub fields: Vec<String>,
    pub methods: Vec<MethodRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub is_component: Option<ComponentKind>,
}

impl ClassRecord {
    pub fn method_count(&self) -> usize {
        self.methods.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationRecord {
    pub from_pkg: PackageName,
    pub to_pkg: PackageName,
    pub kind: RelationKind,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDecl {
    pub kind: ComponentKind,
    pub name: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub main_activity: Option<String>,
    pub components: Vec<ComponentDecl>,
    pub uses_features: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppBundle {
    pub schema_version: u32,
    pub app_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author_label: Option<String>,
    pub packages: Vec<PackageName>,
    pub classes: Vec<ClassRecord>,
    pub relations: Vec<RelationRecord>,
    pub manifest: ManifestInfo,
    pub libraries: Vec<String>,
}

impl AppBundle {
    pub fn class(&self, name: &str) -> Option<&ClassRecord> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Resolves the package holding `class_name`, preferring the declared class
    /// record and falling back to the name's dotted prefix when that package
    /// is declared.
    pub fn package_of(&self, class_name: &str) -> Option<&PackageName> {
        if let Some(class) = self.class(class_name) {
            return Some(&class.package);
        }
        let pkg = package_of_class(class_name)?;
        self.packages.iter().find(|p| p.as_str() == pkg)
    }
}

/// Stable violation codes reported by [`validate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    SchemaVersionUnsupported,
    AppIdEmpty,
    PackageDuplicate,
    ClassPackageUndeclared,
    ClassNamePackageMismatch,
    ClassDuplicate,
    MethodNameEmpty,
    TokenInvalid,
    RelationEndpointUndeclared,
    RelationCountNonpositive,
    ManifestMainUndeclared,
    ManifestComponentUndeclared,
    LibraryPrefixInvalid,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::SchemaVersionUnsupported => "SCHEMA_VERSION_UNSUPPORTED",
            ViolationCode::AppIdEmpty => "APP_ID_EMPTY",
            ViolationCode::PackageDuplicate => "PACKAGE_DUPLICATE",
            ViolationCode::ClassPackageUndeclared => "CLASS_PACKAGE_UNDECLARED",
            ViolationCode::ClassNamePackageMismatch => "CLASS_NAME_PACKAGE_MISMATCH",
            ViolationCode::ClassDuplicate => "CLASS_DUPLICATE",
            ViolationCode::MethodNameEmpty => "METHOD_NAME_EMPTY",
            ViolationCode::TokenInvalid => "TOKEN_INVALID",
            ViolationCode::RelationEndpointUndeclared => "RELATION_ENDPOINT_UNDECLARED",
            ViolationCode::RelationCountNonpositive => "RELATION_COUNT_NONPOSITIVE",
            ViolationCode::ManifestMainUndeclared => "MANIFEST_MAIN_UNDECLARED",
            ViolationCode::ManifestComponentUndeclared => "MANIFEST_COMPONENT_UNDECLARED",
            ViolationCode::LibraryPrefixInvalid => "LIBRARY_PREFIX_INVALID",
        }
    }

    /// Codes caused by a name that points at nothing declared in the bundle.
    pub fn is_reference(self) -> bool {
        matches!(
            self,
            ViolationCode::ClassPackageUndeclared
                | ViolationCode::RelationEndpointUndeclared
                | ViolationCode::ManifestComponentUndeclared
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> BTreeSet<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    pub fn contains(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, path: String, message: String) {
        self.violations.push(Violation { code, path, message });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} at {}: {}", v.code.as_str(), v.path, v.message)?;
        }
        Ok(())
    }
}

fn valid_token(t: &str) -> bool {
    !t.is_empty() && !t.chars().any(char::is_whitespace)
}

/// Lists every invariant violation; the report is empty iff the bundle is valid.
pub fn validate(bundle: &AppBundle) -> ValidationReport {
    let mut report = ValidationReport::default();

    if bundle.schema_version != SCHEMA_VERSION {
        report.push(
            ViolationCode::SchemaVersionUnsupported,
            "schema_version".into(),
            format!("expected {SCHEMA_VERSION}, found {}", bundle.schema_version),
        );
    }
    if bundle.app_id.trim().is_empty() {
        report.push(ViolationCode::AppIdEmpty, "app_id".into(), "app_id is empty".into());
    }

    let mut declared = BTreeSet::new();
    for (i, p) in bundle.packages.iter().enumerate() {
        if !declared.insert(p.as_str()) {
            report.push(
                ViolationCode::PackageDuplicate,
                format!("packages[{i}]"),
                format!("package `{p}` declared twice"),
            );
        }
    }

    let mut class_names = BTreeMap::new();
    for (ci, class) in bundle.classes.iter().enumerate() {
        let path = format!("classes[{ci}]");
        if class_names.insert(class.name.as_str(), ci).is_some() {
            report.push(
                ViolationCode::ClassDuplicate,
                format!("{path}.name"),
                format!("class `{}` declared twice", class.name),
            );
        }
        if !declared.contains(class.package.as_str()) {
            report.push(
                ViolationCode::ClassPackageUndeclared,
                format!("{path}.package"),
                format!("package `{}` is not declared", class.package),
            );
        }
        let simple_ok = package_of_class(&class.name) == Some(class.package.as_str())
            && !simple_class_name(&class.name).is_empty();
        if !simple_ok {
            report.push(
                ViolationCode::ClassNamePackageMismatch,
                format!("{path}.name"),
                format!("class `{}` is not in package `{}`", class.name, class.package),
            );
        }
        for (fi, field) in class.fields.iter().enumerate() {
            if !valid_token(field) {
                report.push(
                    ViolationCode::TokenInvalid,
                    format!("{path}.fields[{fi}]"),
                    format!("invalid field name `{field}`"),
                );
            }
        }
        if let Some(sup) = &class.superclass {
            if !valid_token(sup) {
                report.push(
                    ViolationCode::TokenInvalid,
                    format!("{path}.superclass"),
                    format!("invalid superclass `{sup}`"),
                );
            }
        }
        for (mi, method) in class.methods.iter().enumerate() {
            let mpath = format!("{path}.methods[{mi}]");
            if method.name.is_empty() {
                report.push(
                    ViolationCode::MethodNameEmpty,
                    format!("{mpath}.name"),
                    "method name is empty".into(),
                );
            } else if !valid_token(&method.name) {
                report.push(
                    ViolationCode::TokenInvalid,
                    format!("{mpath}.name"),
                    format!("invalid method name `{}`", method.name),
                );
            }
            let lists = [("instructions", &method.instructions), ("api_calls", &method.api_calls)];
            for (label, list) in lists {
                for (ti, tok) in list.iter().enumerate() {
                    if !valid_token(tok) {
                        report.push(
                            ViolationCode::TokenInvalid,
                            format!("{mpath}.{label}[{ti}]"),
                            format!("invalid token `{tok}`"),
                        );
                    }
                }
            }
        }
    }

    for (ri, rel) in bundle.relations.iter().enumerate() {
        let path = format!("relations[{ri}]");
        for (label, end) in [("from_pkg", &rel.from_pkg), ("to_pkg", &rel.to_pkg)] {
            if !declared.contains(end.as_str()) {
                report.push(
                    ViolationCode::RelationEndpointUndeclared,
                    format!("{path}.{label}"),
                    format!("package `{end}` is not declared"),
                );
            }
        }
        if rel.count == 0 {
            report.push(
                ViolationCode::RelationCountNonpositive,
                format!("{path}.count"),
                "relation count must be at least 1".into(),
            );
        }
    }

    let manifest = &bundle.manifest;
    for (i, comp) in manifest.components.iter().enumerate() {
        if !class_names.contains_key(comp.name.as_str()) {
            report.push(
                ViolationCode::ManifestComponentUndeclared,
                format!("manifest.components[{i}].name"),
                format!("component class `{}` is not declared", comp.name),
            );
        }
    }
    if let Some(main) = &manifest.main_activity {
        let listed = manifest
            .components
            .iter()
            .any(|c| c.kind == ComponentKind::Activity && &c.name == main);
        if !listed {
            report.push(
                ViolationCode::ManifestMainUndeclared,
                "manifest.main_activity".into(),
                format!("main activity `{main}` is not a declared activity component"),
            );
        }
    }
    for (i, feat) in manifest.uses_features.iter().enumerate() {
        if !valid_token(feat) {
            report.push(
                ViolationCode::TokenInvalid,
                format!("manifest.uses_features[{i}]"),
                format!("invalid feature `{feat}`"),
            );
        }
    }
    for (i, lib) in bundle.libraries.iter().enumerate() {
        if PackageName::new(lib.trim_end_matches('.')).is_err() {
            report.push(
                ViolationCode::LibraryPrefixInvalid,
                format!("libraries[{i}]"),
                format!("invalid library prefix `{lib}`"),
            );
        }
    }
    report
}

/// Parses and validates one bundle document.
pub fn parse_bundle(bytes: &[u8]) -> Result<AppBundle, BundleError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let bundle: AppBundle = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        BundleError::Schema { path, message: e.into_inner().to_string() }
    })?;
    de.end().map_err(|e| BundleError::Schema { path: ".".into(), message: e.to_string() })?;

    if bundle.schema_version != SCHEMA_VERSION {
        return Err(BundleError::Schema {
            path: "schema_version".into(),
            message: format!("unsupported schema version {}", bundle.schema_version),
        });
    }
    let report = validate(&bundle);
    if let Some(v) = report.violations.iter().find(|v| v.code.is_reference()) {
        return Err(BundleError::Reference(format!("{}: {}", v.path, v.message)));
    }
    if !report.is_empty() {
        return Err(BundleError::Invalid(report));
    }
    Ok(bundle)
}

/// Canonical serialization: sorted keys, lists in input order, trailing newline.
pub fn write_bundle(bundle: &AppBundle) -> String {
    // Round-tripping through `Value` sorts object keys (BTreeMap-backed maps).
    let value = serde_json::to_value(bundle).expect("bundle serializes");
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}
