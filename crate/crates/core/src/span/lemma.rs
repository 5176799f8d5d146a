//! Rule-table lemmatization.

/// Maps an inflected token to its dictionary form.
pub trait Lemmatizer {
    fn lemma(&self, token: &str, lang: &str) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct SuffixRule {
    pub suffix: &'static str,
    pub replacement: &'static str,
    /// Minimum characters that must remain before the suffix.
    pub min_stem: usize,
    /// Word endings that block the rule.
    pub unless: &'static [&'static str],
}

const fn rule(suffix: &'static str, replacement: &'static str, min_stem: usize) -> SuffixRule {
    SuffixRule {
        suffix,
        replacement,
        min_stem,
        unless: &[],
    }
}

const EN: &[SuffixRule] = &[
    rule("ies", "y", 2),
    rule("sses", "ss", 1),
    SuffixRule {
        suffix: "s",
        replacement: "",
        min_stem: 3,
        unless: &["ss", "us", "is"],
    },
];

// Feminine first-declension endings, in transliteration and in Cyrillic.
const RU: &[SuffixRule] = &[
    rule("e", "a", 3),
    rule("u", "a", 3),
    rule("y", "a", 3),
    rule("е", "а", 3),
    rule("у", "а", 3),
    rule("ы", "а", 3),
    rule("ой", "а", 3),
];

/// First matching suffix rule per language; identity for unknown languages.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleLemmatizer;

impl RuleLemmatizer {
    pub fn rules(lang: &str) -> &'static [SuffixRule] {
        match lang {
            "en" => EN,
            "ru" => RU,
            _ => &[],
        }
    }
}

impl Lemmatizer for RuleLemmatizer {
    fn lemma(&self, token: &str, lang: &str) -> String {
        let lower = token.to_lowercase();
        for r in Self::rules(lang) {
            let Some(stem) = lower.strip_suffix(r.suffix) else { continue };
            if stem.chars().count() < r.min_stem || r.unless.iter().any(|u| lower.ends_with(u)) {
                continue;
            }
            return format!("{stem}{}", r.replacement);
        }
        lower
    }
}

/// Lemma under the default rule tables.
pub fn lemmatize(token: &str, lang: &str) -> String {
    RuleLemmatizer.lemma(token, lang)
}
