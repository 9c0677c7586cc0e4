//! In-memory WordNet noun taxonomy.
//!
//! The database is read once from the plain-text `index.noun`, `data.noun`
//! and `noun.exc` files and is immutable afterwards, so a `&WordNetDb` can be
//! shared freely across threads.

mod morphy;
mod parse;
mod similarity;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use similarity::{max_distance_for, similarity_from_distance, NearestClassIndex};

/// Part of speech. Only nouns are loaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pos {
    Noun,
}

impl Pos {
    pub fn tag(self) -> char {
        match self {
            Pos::Noun => 'n',
        }
    }
}

/// A noun synset identifier: the byte offset of the synset in `data.noun`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SynsetId(u32);

impl SynsetId {
    pub const fn new(offset: u32) -> Self {
        SynsetId(offset)
    }

    pub fn offset(self) -> u32 {
        self.0
    }

    pub fn pos(self) -> Pos {
        Pos::Noun
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}", self.0)
    }
}

impl FromStr for SynsetId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse::<u32>().map(SynsetId)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synset {
    pub id: SynsetId,
    /// Lowercase lemmas in database order; multi-word lemmas use underscores.
    pub lemmas: Vec<String>,
    /// Hypernym and instance-hypernym targets.
    pub hypernyms: Vec<SynsetId>,
    pub gloss: String,
}

impl Synset {
    /// The first lemma, used as the human-readable class name.
    pub fn canonical_lemma(&self) -> &str {
        &self.lemmas[0]
    }
}

#[derive(Debug)]
pub struct WordNetDb {
    /// Sorted by offset.
    synsets: Vec<Synset>,
    position: HashMap<SynsetId, u32>,
    /// Dense hypernym adjacency, parallel to `synsets`.
    parents: Vec<Vec<u32>>,
    lemma_index: HashMap<String, Vec<SynsetId>>,
    exceptions: HashMap<String, Vec<String>>,
    version: String,
}

impl WordNetDb {
    /// Loads the noun database from its three plain-text files.
    pub fn load(
        index_noun: impl AsRef<Path>,
        data_noun: impl AsRef<Path>,
        noun_exc: impl AsRef<Path>,
    ) -> Result<Self> {
        parse::load(index_noun.as_ref(), data_noun.as_ref(), noun_exc.as_ref())
    }

    /// Loads `index.noun`, `data.noun` and `noun.exc` from one directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Self::load(
            dir.join("index.noun"),
            dir.join("data.noun"),
            dir.join("noun.exc"),
        )
    }

    pub(crate) fn from_parts(
        mut synsets: Vec<Synset>,
        lemma_index: HashMap<String, Vec<SynsetId>>,
        exceptions: HashMap<String, Vec<String>>,
        version: String,
    ) -> Result<Self> {
        synsets.sort_by_key(|s| s.id);
        let position: HashMap<SynsetId, u32> = synsets
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id, i as u32))
            .collect();
        let mut parents = Vec::with_capacity(synsets.len());
        for s in &synsets {
            let mut row = Vec::with_capacity(s.hypernyms.len());
            for h in &s.hypernyms {
                let p = *position.get(h).ok_or(Error::UnknownSynset(*h))?;
                row.push(p);
            }
            parents.push(row);
        }
        let db = WordNetDb {
            synsets,
            position,
            parents,
            lemma_index,
            exceptions,
            version,
        };
        db.check_acyclic()?;
        Ok(db)
    }

    /// Release string read from the license header, or `"unknown"`.
    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn synset_count(&self) -> usize {
        self.synsets.len()
    }

    pub fn lemma_count(&self) -> usize {
        self.lemma_index.len()
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.iter()
    }

    pub fn synset(&self, id: SynsetId) -> Result<&Synset> {
        self.position(id).map(|p| &self.synsets[p as usize])
    }

    pub fn contains(&self, id: SynsetId) -> bool {
        self.position.contains_key(&id)
    }

    /// All `(lemma, senses)` entries of the lemma index, in arbitrary order.
    pub fn lemma_entries(&self) -> impl Iterator<Item = (&str, &[SynsetId])> {
        self.lemma_index
            .iter()
            .map(|(l, s)| (l.as_str(), s.as_slice()))
    }

    pub fn has_lemma(&self, lemma: &str) -> bool {
        self.lemma_index.contains_key(lemma)
    }

    pub fn exception_bases(&self, form: &str) -> Option<&[String]> {
        self.exceptions.get(form).map(Vec::as_slice)
    }

    /// Senses of `lemma` in index order, most frequent first. Lookup is
    /// case-insensitive and treats spaces as underscores.
    pub fn synsets_for(&self, lemma: &str) -> &[SynsetId] {
        let found = self.lemma_index.get(lemma).or_else(|| {
            let key = normalize_lemma(lemma);
            self.lemma_index.get(&key)
        });
        found.map(Vec::as_slice).unwrap_or(&[])
    }

    /// Most frequent sense of `lemma`.
    pub fn first_sense(&self, lemma: &str) -> Option<SynsetId> {
        self.synsets_for(lemma).first().copied()
    }

    fn position(&self, id: SynsetId) -> Result<u32> {
        self.position
            .get(&id)
            .copied()
            .ok_or(Error::UnknownSynset(id))
    }

    fn check_acyclic(&self) -> Result<()> {
        let order = self.topological_dense();
        if order.len() == self.synsets.len() {
            return Ok(());
        }
        let mut placed = vec![false; self.synsets.len()];
        for &u in &order {
            placed[u as usize] = true;
        }
        let stuck = placed.iter().position(|&p| !p).unwrap_or(0);
        Err(Error::Cycle(self.synsets[stuck].id))
    }

    /// Kahn's algorithm over the hypernym edges. Shorter than the synset
    /// count iff the graph has a cycle.
    fn topological_dense(&self) -> Vec<u32> {
        let n = self.synsets.len();
        let mut indegree = vec![0u32; n];
        let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (child, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                children[p as usize].push(child as u32);
                indegree[child] += 1;
            }
        }
        let mut queue: std::collections::VecDeque<u32> =
            (0..n as u32).filter(|&i| indegree[i as usize] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &c in &children[u as usize] {
                indegree[c as usize] -= 1;
                if indegree[c as usize] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    /// Topological order of all synsets, hypernyms before hyponyms.
    pub fn topological_order(&self) -> Vec<SynsetId> {
        self.topological_dense()
            .into_iter()
            .map(|u| self.synsets[u as usize].id)
            .collect()
    }
}

/// Lowercases and joins whitespace-separated words with underscores.
pub fn normalize_lemma(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

#[cfg(test)]
pub(crate) mod fixture {
    //! A hand-written miniature noun database in the WordNet text format.

    use std::fs;
    use std::path::Path;

    pub const INDEX: &str = "  1 license header line\n\
animal n 1 2 @ ~ 1 0 00000100  \n\
cat n 1 1 @ 1 0 00000400  \n\
dog n 2 2 @ ~ 2 1 00000300 00000700  \n\
entity n 1 1 ~ 1 0 00000010  \n\
hot_dog n 1 1 @ 1 0 00000700  \n\
man n 1 1 @ 1 0 00000500  \n\
mammal n 1 2 @ ~ 1 0 00000200  \n\
puppy n 1 1 @ 1 0 00000600  \n\
sausage n 1 1 @ 1 0 00000700  \n\
child n 1 1 @ 1 0 00000800  \n\
box n 1 1 @ 1 0 00000900  \n\
";

    pub const DATA: &str = "  1 This is a WordNet 3.0 Copyright style header line  \n\
00000010 03 n 01 entity 0 001 ~ 00000100 n 0000 | that which exists  \n\
00000100 03 n 01 animal 0 003 @ 00000010 n 0000 ~ 00000200 n 0000 ~ 00000900 n 0000 | a living organism  \n\
00000200 05 n 01 mammal 0 003 @ 00000100 n 0000 ~ 00000300 n 0000 ~ 00000400 n 0000 | a warm-blooded vertebrate  \n\
00000300 05 n 02 dog 0 Canis_familiaris 0 002 @ 00000200 n 0000 ~ 00000600 n 0000 | a member of the genus Canis; the domestic dog  \n\
00000400 05 n 01 cat 0 001 @ 00000200 n 0000 | feline mammal  \n\
00000500 18 n 01 man 0 001 @i 00000010 n 0000 | an adult male  \n\
00000600 05 n 01 puppy 0 001 @ 00000300 n 0000 | a young dog  \n\
00000700 13 n 03 hot_dog 0 dog 1 sausage 0 001 @ 00000010 n 0000 | a frankfurter served on a bun  \n\
00000800 18 n 01 child 0 001 @ 00000010 n 0000 | a young person  \n\
00000900 06 n 01 box 0 001 @ 00000100 n 0000 | a container  \n\
";

    pub const EXC: &str = "children child\nmen man\n";

    pub fn write(dir: &Path) {
        fs::write(dir.join("index.noun"), INDEX).unwrap();
        fs::write(dir.join("data.noun"), DATA).unwrap();
        fs::write(dir.join("noun.exc"), EXC).unwrap();
    }

    pub fn db() -> super::WordNetDb {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path());
        super::WordNetDb::load_dir(dir.path()).unwrap()
    }
}
