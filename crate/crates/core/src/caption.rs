//! Caption tokenization and noun-synset extraction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::stopwords::StopWords;
use crate::wordnet::{SynsetId, WordNetDb};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionRecord {
    #[serde(rename = "id")]
    pub sample_id: String,
    pub text: String,
}

impl CaptionRecord {
    pub fn new(sample_id: impl Into<String>, text: impl Into<String>) -> Self {
        CaptionRecord {
            sample_id: sample_id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedToken {
    /// Original token(s); a collocation keeps both words separated by a space.
    pub surface: String,
    /// Index of the (first) token in the caption.
    pub position: usize,
    pub lemma: Option<String>,
    pub is_noun: bool,
}

/// Splits on whitespace, trims non-alphanumeric characters from both ends
/// of each token and lowercases. Inner punctuation such as hyphens stays.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Lexicon-based noun tagger and synset mapper.
#[derive(Debug, Clone, Copy)]
pub struct Extractor<'a> {
    db: &'a WordNetDb,
    stopwords: &'a StopWords,
    bigrams: bool,
}

impl<'a> Extractor<'a> {
    pub fn new(db: &'a WordNetDb, stopwords: &'a StopWords) -> Self {
        Extractor {
            db,
            stopwords,
            bigrams: true,
        }
    }

    /// Disables two-word collocation matching.
    pub fn strict_unigram(mut self, strict: bool) -> Self {
        self.bigrams = !strict;
        self
    }

    pub fn db(&self) -> &'a WordNetDb {
        self.db
    }

    pub fn stopwords(&self) -> &'a StopWords {
        self.stopwords
    }

    fn noun_lemma(&self, form: &str) -> Option<String> {
        self.db.morphy_noun(form).into_iter().next()
    }

    /// Tokens that read as nouns. Adjacent non-stopword pairs whose
    /// underscore-joined form is a noun lemma are matched first, greedily
    /// from the left, and consume both tokens.
    pub fn extract_nouns(&self, tokens: &[String]) -> Vec<TaggedToken> {
        let mut nouns = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let word = &tokens[i];
            let is_stop = self.stopwords.contains(word);
            if self.bigrams && !is_stop {
                if let Some(next) = tokens.get(i + 1).filter(|n| !self.stopwords.contains(n.as_str())) {
                    if let Some(lemma) = self.noun_lemma(&format!("{word}_{next}")) {
                        nouns.push(TaggedToken {
                            surface: format!("{word} {next}"),
                            position: i,
                            lemma: Some(lemma),
                            is_noun: true,
                        });
                        i += 2;
                        continue;
                    }
                }
            }
            if !is_stop {
                if let Some(lemma) = self.noun_lemma(word) {
                    nouns.push(TaggedToken {
                        surface: word.clone(),
                        position: i,
                        lemma: Some(lemma),
                        is_noun: true,
                    });
                }
            }
            i += 1;
        }
        nouns
    }

    /// Most-frequent senses of the nouns in `tokens`, as a set.
    pub fn synsets_of_tokens(&self, tokens: &[String]) -> BTreeSet<SynsetId> {
        self.extract_nouns(tokens)
            .iter()
            .filter_map(|t| t.lemma.as_deref())
            .filter_map(|l| self.db.first_sense(l))
            .collect()
    }

    pub fn extract_synsets(&self, record: &CaptionRecord) -> BTreeSet<SynsetId> {
        self.extract_text(&record.text)
    }

    pub fn extract_text(&self, text: &str) -> BTreeSet<SynsetId> {
        self.synsets_of_tokens(&tokenize(text))
    }
}
