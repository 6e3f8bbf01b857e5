//! Tokenization shared by the lexical embedder and knowledge search.

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "am", "an", "and", "any", "are", "as", "at", "be",
    "been", "but", "by", "can", "could", "do", "does", "for", "from", "had", "has", "have", "how",
    "i", "if", "in", "into", "is", "it", "its", "just", "let", "lets", "may", "me", "my", "of",
    "on", "or", "our", "please", "so", "some", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "to", "too", "up", "us", "was", "we", "were", "what",
    "when", "which", "who", "will", "with", "would", "you", "your",
];

/// Lowercased alphanumeric words with stopwords removed and a light suffix
/// stemmer applied, so "transfers", "transferring" and "transfer" agree.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .map(|w| stem(&w))
        .collect()
}

fn stem(word: &str) -> String {
    let mut w = word.to_string();
    for suffix in ["ings", "ing", "ies", "ied", "ed", "s"] {
        let Some(root) = w.strip_suffix(suffix) else {
            continue;
        };
        if root.chars().count() < 3 || (suffix == "s" && (root.ends_with('s') || root.ends_with('u'))) {
            continue;
        }
        w = match suffix {
            "ies" | "ied" => format!("{root}y"),
            "ings" | "ing" | "ed" => undouble(root),
            _ => root.to_string(),
        };
        break;
    }
    // "change", "changes" and "changed" all end up as "chang"
    if w.len() > 3 && w.ends_with('e') && !w.ends_with("ee") {
        w.pop();
    }
    w
}

/// "transferr" -> "transfer", but "add" and "bill" stay.
fn undouble(root: &str) -> String {
    let bytes = root.as_bytes();
    let n = bytes.len();
    if n >= 5 && bytes[n - 1] == bytes[n - 2] && !b"aeioulsz".contains(&bytes[n - 1]) {
        root[..n - 1].to_string()
    } else {
        root.to_string()
    }
}

/// Collapses runs of whitespace into single spaces.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
