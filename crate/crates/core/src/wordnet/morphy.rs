use super::WordNetDb;

/// Noun detachment rules, tried in this order.
const NOUN_RULES: [(&str, &str); 8] = [
    ("s", ""),
    ("ses", "s"),
    ("xes", "x"),
    ("zes", "z"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("men", "man"),
    ("ies", "y"),
];

impl WordNetDb {
    /// Candidate base lemmas for a (lowercase) noun form, in priority order:
    /// exception-list bases, the form itself, then suffix-rule results. Only
    /// lemmas present in the index are returned.
    pub fn morphy_noun(&self, word: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let push = |cand: String, out: &mut Vec<String>| {
            if self.has_lemma(&cand) && !out.contains(&cand) {
                out.push(cand);
            }
        };
        if word.is_empty() {
            return out;
        }
        if let Some(bases) = self.exception_bases(word) {
            for b in bases {
                push(b.clone(), &mut out);
            }
        }
        push(word.to_string(), &mut out);
        for (suffix, replacement) in NOUN_RULES {
            if let Some(stem) = word.strip_suffix(suffix) {
                if !stem.is_empty() || !replacement.is_empty() {
                    push(format!("{stem}{replacement}"), &mut out);
                }
            }
        }
        out
    }
}
