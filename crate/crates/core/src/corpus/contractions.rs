//! Whole-token contraction expansion.

use std::collections::HashMap;
use std::path::Path;

use super::CorpusError;

/// Case-insensitive contraction → expansion map.
///
/// Dictionary values may list alternatives separated by `/`; the first
/// alternative is taken at load time so expansion stays deterministic.
#[derive(Debug, Clone)]
pub struct ContractionDictionary {
    entries: HashMap<String, String>,
}

impl ContractionDictionary {
    /// The dictionary shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json_str(include_str!("../../data/contractions.json"))
            .expect("builtin contraction dictionary is well-formed")
    }

    /// Parse a JSON object of `"contraction": "expansion"` pairs.
    pub fn from_json_str(json: &str) -> Result<Self, CorpusError> {
        let raw: HashMap<String, String> = serde_json::from_str(json)?;
        let mut entries = HashMap::with_capacity(raw.len());
        for (key, value) in raw {
            let key = key.trim().to_lowercase();
            if key.is_empty() {
                return Err(CorpusError::EmptyDictionaryKey);
            }
            let first = value.split('/').next().unwrap_or("").trim().to_owned();
            entries.insert(key, first);
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, token: &str) -> Option<&str> {
        self.entries.get(&token.to_lowercase()).map(String::as_str)
    }
}

/// Replace every whole whitespace-delimited token that matches a dictionary
/// key (case-insensitively) with its expansion. Everything else, including
/// the original whitespace, passes through unchanged.
pub fn expand_contractions(text: &str, dict: &ContractionDictionary) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let ws_end = rest
            .find(|c: char| !c.is_whitespace())
            .unwrap_or(rest.len());
        out.push_str(&rest[..ws_end]);
        rest = &rest[ws_end..];
        if rest.is_empty() {
            break;
        }
        let tok_end = rest
            .find(|c: char| c.is_whitespace())
            .unwrap_or(rest.len());
        let token = &rest[..tok_end];
        match dict.lookup(token) {
            Some(expansion) => out.push_str(expansion),
            None => out.push_str(token),
        }
        rest = &rest[tok_end..];
    }
    out
}
