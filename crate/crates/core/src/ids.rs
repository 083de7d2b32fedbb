use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable key of a property: `<function>::<kind>[::<name>]`, or
/// `lemma::<name>` for lemmas.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropertyId(String);

impl PropertyId {
    pub fn relational(host: &str, property: &str) -> Self {
        PropertyId(format!("{host}::relational::{property}"))
    }

    /// The final assert of a wrapper, the one mirroring its property.
    pub fn wrapper_assert(wrapper: &str) -> Self {
        PropertyId(format!("{wrapper}::assert"))
    }

    pub fn assert(function: &str, tag: &str) -> Self {
        PropertyId(format!("{function}::assert::{tag}"))
    }

    pub fn bridge(function: &str) -> Self {
        PropertyId(format!("{function}::bridge"))
    }

    pub fn lemma(lemma: &str) -> Self {
        PropertyId(format!("lemma::{lemma}"))
    }

    pub fn ensures(function: &str, index: usize) -> Self {
        PropertyId(format!("{function}::ensures::{index}"))
    }

    pub fn invariant_init(function: &str, index: usize) -> Self {
        PropertyId(format!("{function}::invariant-init::{index}"))
    }

    pub fn invariant_preserve(function: &str, index: usize) -> Self {
        PropertyId(format!("{function}::invariant-preserve::{index}"))
    }

    pub fn requires_at_call(function: &str, index: usize) -> Self {
        PropertyId(format!("{function}::requires-at-call::{index}"))
    }

    pub fn division_guard(function: &str, index: usize) -> Self {
        PropertyId(format!("{function}::division-guard::{index}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The leading component: a function name, or `lemma`.
    pub fn owner(&self) -> &str {
        self.0.split("::").next().unwrap_or("")
    }

    pub fn is_lemma(&self) -> bool {
        self.owner() == "lemma"
    }

    /// File-name-safe rendering, used for emitted VC files.
    pub fn file_stem(&self) -> String {
        self.0.replace("::", ".")
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PropertyId {
    fn from(s: &str) -> Self {
        PropertyId(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats() {
        assert_eq!(PropertyId::relational("f1", "R1").as_str(), "f1::relational::R1");
        assert_eq!(PropertyId::wrapper_assert("relational_wrapper_1").as_str(), "relational_wrapper_1::assert");
        assert_eq!(PropertyId::bridge("f1").as_str(), "f1::bridge");
        assert_eq!(PropertyId::lemma("R1_lemma").as_str(), "lemma::R1_lemma");
        assert!(PropertyId::lemma("R1_lemma").is_lemma());
        assert_eq!(PropertyId::bridge("f1").owner(), "f1");
        assert_eq!(PropertyId::ensures("g", 1).file_stem(), "g.ensures.1");
    }
}
