//! Tokenization and surface normalization shared by every stage.

/// Lower-cases and splits on whitespace, trimming punctuation at token edges.
/// Internal apostrophes survive so possessives like `obama's` stay one token.
pub fn tokenize(text: &str) -> Vec<String> {
    surface_tokens(text).into_iter().map(|t| t.to_lowercase()).collect()
}

/// [`tokenize`] without case folding; copied strings keep the user's casing.
pub fn surface_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed =
                raw.trim_matches(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '#'));
            let trimmed = trimmed.trim_matches('\'');
            (!trimmed.is_empty()).then(|| trimmed.to_string())
        })
        .collect()
}

/// Case-folds and collapses runs of whitespace.
pub fn normalize(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits a qualified name (`Alarm.create`) at its first dot.
pub fn split_qualified(name: &str) -> (&str, &str) {
    match name.find('.') {
        Some(i) => (&name[..i], &name[i + 1..]),
        None => (name, ""),
    }
}

/// The part of a qualified name after the qualifier, or the whole name.
pub fn short_name(name: &str) -> &str {
    match name.find('.') {
        Some(i) => &name[i + 1..],
        None => name,
    }
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_strips_edge_punctuation() {
        assert_eq!(
            tokenize("How old is Barack Obama's wife?"),
            vec!["how", "old", "is", "barack", "obama's", "wife"]
        );
        assert_eq!(tokenize("  \"hi\" , there. "), vec!["hi", "there"]);
        assert!(tokenize("?!").is_empty());
    }

    #[test]
    fn qualified_names() {
        assert_eq!(split_qualified("Alarm.create"), ("Alarm", "create"));
        assert_eq!(short_name("Alarm.recurrence.dayOfWeek"), "recurrence.dayOfWeek");
        assert_eq!(short_name("Unsupported"), "Unsupported");
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
