use serde::{Deserialize, Serialize};

use crate::ingest::canonical_event_type;

/// The eight risk types the identification step is expected to surface.
pub const KEY_RISK_TYPES: [&str; 8] = [
    "Thunderstorm Wind",
    "Tornado",
    "Flash Flood",
    "Lightning",
    "Flood",
    "Hail",
    "Strong Wind",
    "Traffic Jam",
];

/// Default similarity columns.
pub const DEFAULT_RISK_COLUMNS: [&str; 4] = ["Thunderstorm Wind", "Tornado", "Flash Flood", "Traffic Jam"];

/// Catch-all for model-emitted types outside the vocabulary.
pub const OTHER: &str = "Other";

/// Ordered canonical risk types: the key types, then extra event types
/// seen in the data (sorted), then [`OTHER`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskVocabulary {
    types: Vec<String>,
}

impl Default for RiskVocabulary {
    fn default() -> Self {
        Self::new(std::iter::empty::<String>())
    }
}

impl RiskVocabulary {
    pub fn new<I, S>(extra: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut types: Vec<String> = KEY_RISK_TYPES.iter().map(|s| s.to_string()).collect();
        let mut more: Vec<String> = extra
            .into_iter()
            .map(|s| canonical_event_type(s.as_ref()))
            .filter(|s| !s.is_empty() && s != OTHER && !types.contains(s))
            .collect();
        more.sort();
        more.dedup();
        types.extend(more);
        types.push(OTHER.to_string());
        Self { types }
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn contains(&self, risk_type: &str) -> bool {
        self.types.iter().any(|t| t == risk_type)
    }

    /// Vocabulary name for a model-emitted risk type: title case, then a
    /// trailing plural ("Tornadoes", "Thunderstorm Winds") is dropped.
    /// `None` when nothing matches.
    pub fn lookup(&self, raw: &str) -> Option<&str> {
        let name = canonical_event_type(raw.trim().trim_matches(|c: char| c == '"' || c == '.'));
        let candidates = [
            Some(name.clone()),
            name.strip_suffix("es").map(str::to_string),
            name.strip_suffix('s').map(str::to_string),
        ];
        candidates
            .into_iter()
            .flatten()
            .find_map(|c| self.types.iter().find(|t| **t == c).map(String::as_str))
    }

    /// Like [`lookup`](Self::lookup) but maps unknown types to [`OTHER`].
    pub fn canonicalize(&self, raw: &str) -> String {
        match self.lookup(raw) {
            Some(t) => t.to_string(),
            None => {
                log::warn!("risk type {raw:?} is outside the vocabulary; counting it as {OTHER}");
                OTHER.to_string()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_keys_extras_other() {
        let v = RiskVocabulary::new(["WINTER STORM", "Hail", "Drought", "drought"]);
        let t = v.types();
        assert_eq!(&t[..8], KEY_RISK_TYPES.map(String::from).as_slice());
        assert_eq!(&t[8..], ["Drought", "Winter Storm", "Other"]);
    }

    #[test]
    fn canonicalizes_plurals_and_case() {
        let v = RiskVocabulary::default();
        assert_eq!(v.canonicalize("thunderstorm winds"), "Thunderstorm Wind");
        assert_eq!(v.canonicalize("Tornadoes"), "Tornado");
        assert_eq!(v.canonicalize("FLASH FLOODS"), "Flash Flood");
        assert_eq!(v.canonicalize("traffic jams"), "Traffic Jam");
        assert_eq!(v.canonicalize("Hail"), "Hail");
        assert_eq!(v.canonicalize("Alien invasion"), "Other");
        assert_eq!(v.canonicalize("other"), "Other");
    }
}
