//! Tokenization shared by the query featurizer, the lexical ranker and
//! answer matching.

/// Lowercased alphanumeric runs. Everything else (punctuation, `.`, `_`,
/// arrows) separates tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Casefolded text with punctuation mapped to spaces and whitespace collapsed.
pub fn normalize(text: &str) -> String {
    tokens(text).join(" ")
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from", "has",
    "have", "how", "in", "is", "it", "its", "of", "on", "or", "s", "that", "the", "then", "this",
    "to", "was", "were", "what", "when", "where", "which", "who", "whom", "whose", "why", "with",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Crude suffix stripping so that `directed`, `director` and `directing`
/// collapse to one term. Only one suffix is removed.
pub fn stem(token: &str) -> &str {
    const SUFFIXES: &[&str] = &["ing", "ed", "er", "or", "es", "s"];
    if token.chars().count() <= 4 || !token.is_ascii() {
        return token;
    }
    for suffix in SUFFIXES {
        if let Some(base) = token.strip_suffix(suffix) {
            if base.len() >= 3 {
                return base;
            }
        }
    }
    token
}

/// Stemmed tokens with stopwords removed; the term space of the lexical ranker.
pub fn content_terms(text: &str) -> Vec<String> {
    tokens(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .map(|t| stem(&t).to_string())
        .collect()
}
