//! Tweet text cleaning.
//!
//! Rules applied in order: strip HTML tags, strip URLs, drop `#`-prefixed
//! tokens, drop emoji, drop remaining non-alphanumeric characters except
//! spaces and apostrophes, lowercase, collapse whitespace, trim. The result
//! is a fixed point of the function.

use std::sync::LazyLock;

use regex::Regex;

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<]+?>").unwrap());
// `http` is consumed wherever it appears so no "http" substring can survive,
// even mid-token; `www` requires the following dot.
static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)http\S*|www\.\S+").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#\S+").unwrap());

const EMOJI_RANGES: [(u32, u32); 6] = [
    (0x1F600, 0x1F64F), // emoticons
    (0x1F300, 0x1F5FF), // symbols & pictographs
    (0x1F680, 0x1F6FF), // transport & map symbols
    (0x1F1E0, 0x1F1FF), // flags
    (0x2702, 0x27B0),
    (0x24C2, 0x1F251),
];

fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES.iter().any(|&(lo, hi)| cp >= lo && cp <= hi)
}

pub fn clean_text(text: &str) -> String {
    let text = HTML_TAG.replace_all(text, "");
    // emoji removal can splice the surrounding characters together, so it
    // must run before the URL and hashtag scans
    let text: String = text.chars().filter(|&c| !is_emoji(c)).collect();
    let text = URL.replace_all(&text, "");
    let text = HASHTAG.replace_all(&text, "");

    // Lowercase before filtering: some uppercase characters lower into the
    // emoji ranges or into a base letter plus a combining mark, and the
    // filter must see the final form for the function to be idempotent.
    // Every stripped character becomes a space so distant fragments are
    // never joined into new tokens.
    let mut kept = String::with_capacity(text.len());
    for lc in text.chars().flat_map(char::to_lowercase) {
        if !lc.is_whitespace() && !is_emoji(lc) && (lc.is_alphanumeric() || lc == '\'') {
            kept.push(lc);
        } else {
            kept.push(' ');
        }
    }
    kept.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_urls_and_hashtags() {
        assert_eq!(clean_text("Check https://t.co/abc #covid19 NOW"), "check now");
    }

    #[test]
    fn strips_html_tags() {
        assert_eq!(clean_text("<b>Stay Safe</b>"), "stay safe");
    }

    #[test]
    fn clean_input_is_fixed_point() {
        assert_eq!(clean_text("already clean text"), "already clean text");
    }

    #[test]
    fn strips_emoji_in_listed_ranges() {
        assert_eq!(clean_text("stay safe \u{1F637}\u{1F600} ok \u{2708}"), "stay safe ok");
    }

    #[test]
    fn keeps_apostrophes() {
        assert_eq!(clean_text("it's fine"), "it's fine");
    }

    #[test]
    fn bare_http_prefix_is_consumed() {
        assert_eq!(clean_text("see httpsomething here"), "see here");
        assert_eq!(clean_text("WWW.example.com and more"), "and more");
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC*") {
            let once = clean_text(&s);
            prop_assert_eq!(clean_text(&once), once);
        }

        #[test]
        fn no_hash_or_http_survives(s in "\\PC*") {
            let cleaned = clean_text(&s);
            prop_assert!(!cleaned.contains('#'));
            prop_assert!(!cleaned.contains("http"));
        }

        #[test]
        fn output_alphabet_is_restricted(s in "\\PC*") {
            let cleaned = clean_text(&s);
            for c in cleaned.chars() {
                prop_assert!(c.is_alphanumeric() || c == ' ' || c == '\'');
            }
            prop_assert!(!cleaned.contains("  "));
            prop_assert_eq!(cleaned.trim(), &cleaned);
        }
    }
}
