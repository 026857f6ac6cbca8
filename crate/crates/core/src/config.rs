//! Plain-text list files: one entry per line, `#` starts a comment.

use std::io;
use std::path::Path;

use crate::bundle::DEFAULT_FRAMEWORK_PREFIXES;

/// Method names excluded from identifier features in addition to methods the
/// extractor flags as framework overrides.
pub const DEFAULT_FRAMEWORK_OVERRIDES: &[&str] = &[
    "onCreate",
    "onPause",
    "onResume",
    "onDestroy",
    "onStart",
    "onStop",
    "toString",
    "equals",
    "hashCode",
];

pub fn parse_list(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn read_list(path: &Path) -> io::Result<Vec<String>> {
    Ok(parse_list(&std::fs::read_to_string(path)?))
}

pub fn default_framework_prefixes() -> Vec<String> {
    DEFAULT_FRAMEWORK_PREFIXES.iter().map(|s| s.to_string()).collect()
}

pub fn default_framework_overrides() -> Vec<String> {
    DEFAULT_FRAMEWORK_OVERRIDES.iter().map(|s| s.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# libraries\ncom.squareup.okhttp3\n\n  io.reactivex  # rx\n#com.dead\n";
        assert_eq!(parse_list(text), vec!["com.squareup.okhttp3", "io.reactivex"]);
    }
}
