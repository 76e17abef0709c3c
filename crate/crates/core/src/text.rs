//! Tokenization, stopwords and a rule-based verb lemmatizer.

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "also", "am", "an", "and", "any", "are",
    "as", "at", "be", "been", "being", "between", "both", "but", "by", "can", "could", "did",
    "do", "does", "doing", "during", "each", "few", "for", "from", "further", "had", "has",
    "have", "having", "how", "i", "if", "in", "into", "is", "it", "its", "just", "like",
    "me", "more", "most", "my", "no", "nor", "not", "of", "on", "once", "only", "or",
    "other", "our", "out", "over", "own", "same", "should", "so", "some", "such", "than",
    "that", "the", "their", "them", "then", "there", "these", "they", "this", "those",
    "through", "to", "too", "under", "until", "up", "very", "was", "we", "were", "what",
    "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would", "you",
    "your", "um", "uh", "hey", "hi", "okay", "ok", "yeah", "please", "tell", "know", "say",
    "says", "wanna", "gonna", "kinda", "thing", "things", "stuff", "really", "actually",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Tokens of `text` that are not stopwords, in order.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(t))
        .collect()
}

const IRREGULAR_VERBS: &[(&str, &str)] = &[
    ("am", "be"),
    ("are", "be"),
    ("been", "be"),
    ("being", "be"),
    ("is", "be"),
    ("was", "be"),
    ("were", "be"),
    ("has", "have"),
    ("had", "have"),
    ("having", "have"),
    ("does", "do"),
    ("did", "do"),
    ("done", "do"),
    ("made", "make"),
    ("making", "make"),
    ("led", "lead"),
    ("drove", "drive"),
    ("driven", "drive"),
    ("grew", "grow"),
    ("grown", "grow"),
    ("gave", "give"),
    ("given", "give"),
    ("took", "take"),
    ("taken", "take"),
    ("ran", "run"),
    ("found", "find"),
    ("held", "hold"),
    ("broke", "break"),
    ("broken", "break"),
    ("went", "go"),
    ("gone", "go"),
    ("shown", "show"),
    ("seen", "see"),
    ("saw", "see"),
    ("began", "begin"),
    ("begun", "begin"),
    ("built", "build"),
    ("brought", "bring"),
    ("kept", "keep"),
    ("lost", "lose"),
    ("meant", "mean"),
    ("sent", "send"),
    ("spent", "spend"),
    ("thought", "think"),
    ("confining", "confine"),
    ("confined", "confine"),
    ("combining", "combine"),
    ("combined", "combine"),
    ("determining", "determine"),
    ("determined", "determine"),
    ("controlled", "control"),
    ("controlling", "control"),
    ("compelling", "compel"),
    ("dominated", "dominate"),
    ("dominating", "dominate"),
    ("ignited", "ignite"),
    ("igniting", "ignite"),
    ("generated", "generate"),
    ("generating", "generate"),
    ("operated", "operate"),
    ("operating", "operate"),
    ("created", "create"),
    ("creating", "create"),
    ("degraded", "degrade"),
    ("degrading", "degrade"),
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Number of vowel-consonant sequences, as in Porter's measure.
fn measure(stem: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for (i, &c) in stem.iter().enumerate() {
        let v = is_vowel(c) || (c == b'y' && i > 0 && !is_vowel(stem[i - 1]));
        if prev_vowel && !v {
            m += 1;
        }
        prev_vowel = v;
    }
    m
}

fn ends_cvc(stem: &[u8]) -> bool {
    let n = stem.len();
    n >= 3
        && !is_vowel(stem[n - 3])
        && is_vowel(stem[n - 2])
        && !is_vowel(stem[n - 1])
        && !matches!(stem[n - 1], b'w' | b'x' | b'y')
}

fn restore(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n <= 2 {
        return format!("{stem}e");
    }
    let last = b[n - 1];
    if last == b[n - 2] && !is_vowel(last) && !matches!(last, b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if is_vowel(b[n - 2]) && matches!(last, b's' | b'z' | b'c' | b'v') {
        return format!("{stem}e");
    }
    if ends_cvc(b) && measure(b) == 1 {
        return format!("{stem}e");
    }
    stem.to_string()
}

/// Lemma of an (English) verb form: strips -s/-es/-ed/-ing with consonant
/// undoubling and e-restoration, after consulting an exception table.
pub fn lemmatize(word: &str) -> String {
    let w = word.to_lowercase();
    if let Some(&(_, lemma)) = IRREGULAR_VERBS.iter().find(|(form, _)| *form == w) {
        return lemma.to_string();
    }
    if w.len() <= 3 || !w.is_ascii() {
        return w;
    }
    let has_vowel = |s: &str| s.bytes().any(is_vowel);
    if let Some(stem) = w.strip_suffix("ies") {
        if stem.len() > 1 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = w.strip_suffix("ied") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "ches", "shes", "xes", "zzes"] {
        if w.ends_with(suffix) {
            return w[..w.len() - 2].to_string();
        }
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if has_vowel(stem) {
            return restore(stem);
        }
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if has_vowel(stem) {
            return restore(stem);
        }
    }
    if w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") && !w.ends_with("is") {
        return w[..w.len() - 1].to_string();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizes_lowercase_alnum() {
        assert_eq!(
            tokenize("Deuterium-Tritium (DT) at 5 keV."),
            vec!["deuterium", "tritium", "dt", "at", "5", "kev"]
        );
    }

    #[test]
    fn lemmas_agree_across_inflections() {
        for w in ["fuse", "fuses", "fused", "fusing"] {
            assert_eq!(lemmatize(w), "fuse", "{w}");
        }
        for w in ["heat", "heats", "heated", "heating"] {
            assert_eq!(lemmatize(w), "heat", "{w}");
        }
        for w in ["confine", "confines", "confined", "confining"] {
            assert_eq!(lemmatize(w), "confine", "{w}");
        }
        for w in ["increase", "increases", "increased", "increasing"] {
            assert_eq!(lemmatize(w), "increase", "{w}");
        }
        assert_eq!(lemmatize("running"), "run");
        assert_eq!(lemmatize("studies"), "study");
        assert_eq!(lemmatize("was"), "be");
        assert_eq!(lemmatize("produces"), "produce");
        assert_eq!(lemmatize("producing"), "produce");
        assert_eq!(lemmatize("drives"), "drive");
        assert_eq!(lemmatize("driving"), "drive");
    }

    #[test]
    fn stopwords_filter() {
        assert_eq!(content_tokens("How do the tokamaks work?"), vec!["tokamaks", "work"]);
        assert!(content_tokens("what is the").is_empty());
    }
}
