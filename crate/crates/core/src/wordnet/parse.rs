use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{Synset, SynsetId, WordNetDb};
use crate::error::{Error, Result};

pub(super) fn load(index_noun: &Path, data_noun: &Path, noun_exc: &Path) -> Result<WordNetDb> {
    let (rows, version) = read_data(data_noun)?;
    let known: HashSet<SynsetId> = rows.iter().map(|(s, _)| s.id).collect();

    for (s, lineno) in &rows {
        if s.hypernyms.contains(&s.id) {
            return Err(Error::Cycle(s.id));
        }
        if let Some(h) = s.hypernyms.iter().find(|h| !known.contains(h)) {
            return Err(Error::DanglingOffset {
                file: data_noun.display().to_string(),
                line: *lineno,
                offset: *h,
            });
        }
    }
    let synsets = rows.into_iter().map(|(s, _)| s).collect();

    let lemma_index = read_index(index_noun, &known)?;
    let exceptions = read_exceptions(noun_exc)?;
    WordNetDb::from_parts(synsets, lemma_index, exceptions, version)
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let owned = path.to_path_buf();
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, l)| (i + 1, l.map_err(|e| Error::io(&owned, e)))))
}

/// License header lines start with two spaces.
fn is_header(line: &str) -> bool {
    line.starts_with("  ")
}

fn header_version(line: &str) -> Option<String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    words
        .windows(3)
        .find(|w| w[0] == "WordNet" && w[2] == "Copyright")
        .map(|w| w[1].to_string())
}

fn read_data(path: &Path) -> Result<(Vec<(Synset, usize)>, String)> {
    let file = path.display().to_string();
    let mut synsets = Vec::new();
    let mut version = None;
    for (lineno, line) in lines(path)? {
        let line = line?;
        if is_header(&line) {
            if version.is_none() {
                version = header_version(&line);
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        synsets.push((parse_data_line(&line, &file, lineno)?, lineno));
    }
    if synsets.is_empty() {
        return Err(Error::EmptyDatabase { file });
    }
    let mut seen = HashSet::with_capacity(synsets.len());
    for (s, lineno) in &synsets {
        if !seen.insert(s.id) {
            return Err(Error::malformed(&file, *lineno, "synset_offset", format!("duplicate offset {}", s.id)));
        }
    }
    Ok((synsets, version.unwrap_or_else(|| "unknown".to_string())))
}

/// `synset_offset lex_filenum ss_type w_cnt word lex_id [word lex_id...] p_cnt [ptr...] | gloss`
fn parse_data_line(line: &str, file: &str, lineno: usize) -> Result<Synset> {
    let bad = |field: &'static str, msg: String| Error::malformed(file, lineno, field, msg);
    let (head, gloss) = match line.split_once(" | ") {
        Some((h, g)) => (h, g.trim_end()),
        None => (line.trim_end(), ""),
    };
    let mut fields = head.split_ascii_whitespace();
    let mut next = |field: &'static str| fields.next().ok_or_else(|| bad(field, "missing".into()));

    let offset = next("synset_offset")?;
    let id = parse_offset(offset).ok_or_else(|| bad("synset_offset", format!("{offset:?} is not an offset")))?;
    next("lex_filenum")?;
    let ss_type = next("ss_type")?;
    if ss_type != "n" {
        return Err(bad("ss_type", format!("expected noun, found {ss_type:?}")));
    }
    let w_cnt = next("w_cnt")?;
    let w_cnt = usize::from_str_radix(w_cnt, 16).map_err(|_| bad("w_cnt", format!("{w_cnt:?} is not hexadecimal")))?;
    if w_cnt == 0 {
        return Err(bad("w_cnt", "synset without lemmas".into()));
    }
    let mut lemmas = Vec::with_capacity(w_cnt);
    for _ in 0..w_cnt {
        let word = next("word")?;
        let lex_id = next("lex_id")?;
        u8::from_str_radix(lex_id, 16).map_err(|_| bad("lex_id", format!("{lex_id:?} is not hexadecimal")))?;
        lemmas.push(word.to_lowercase());
    }
    let p_cnt = next("p_cnt")?;
    let p_cnt: usize = p_cnt.parse().map_err(|_| bad("p_cnt", format!("{p_cnt:?} is not a count")))?;
    let mut hypernyms = Vec::new();
    for _ in 0..p_cnt {
        let symbol = next("pointer_symbol")?;
        let target = next("pointer_offset")?;
        let pos = next("pointer_pos")?;
        let st = next("pointer_source_target")?;
        if st.len() != 4 || u16::from_str_radix(st, 16).is_err() {
            return Err(bad("pointer_source_target", format!("{st:?} is not four hex digits")));
        }
        if (symbol == "@" || symbol == "@i") && pos == "n" {
            let t = parse_offset(target).ok_or_else(|| bad("pointer_offset", format!("{target:?} is not an offset")))?;
            if !hypernyms.contains(&t) {
                hypernyms.push(t);
            }
        }
    }
    Ok(Synset {
        id,
        lemmas,
        hypernyms,
        gloss: gloss.to_string(),
    })
}

fn parse_offset(s: &str) -> Option<SynsetId> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// `lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt synset_offset [synset_offset...]`
fn read_index(path: &Path, known: &HashSet<SynsetId>) -> Result<HashMap<String, Vec<SynsetId>>> {
    let file = path.display().to_string();
    let mut index: HashMap<String, Vec<SynsetId>> = HashMap::new();
    for (lineno, line) in lines(path)? {
        let line = line?;
        if is_header(&line) || line.trim().is_empty() {
            continue;
        }
        let bad = |field: &'static str, msg: String| Error::malformed(&file, lineno, field, msg);
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.len() < 6 {
            return Err(bad("line", format!("expected at least 6 fields, found {}", fields.len())));
        }
        if fields[1] != "n" {
            return Err(bad("pos", format!("expected noun, found {:?}", fields[1])));
        }
        let synset_cnt: usize = fields[2].parse().map_err(|_| bad("synset_cnt", format!("{:?}", fields[2])))?;
        let p_cnt: usize = fields[3].parse().map_err(|_| bad("p_cnt", format!("{:?}", fields[3])))?;
        let first = 4 + p_cnt + 2;
        if fields.len() != first + synset_cnt {
            return Err(bad(
                "synset_offset",
                format!("expected {synset_cnt} offsets, found {}", fields.len().saturating_sub(first)),
            ));
        }
        let mut senses = Vec::with_capacity(synset_cnt);
        for raw in &fields[first..] {
            let id = parse_offset(raw).ok_or_else(|| bad("synset_offset", format!("{raw:?} is not an offset")))?;
            if !known.contains(&id) {
                return Err(Error::DanglingOffset {
                    file: file.clone(),
                    line: lineno,
                    offset: id,
                });
            }
            if !senses.contains(&id) {
                senses.push(id);
            }
        }
        index.insert(fields[0].to_lowercase(), senses);
    }
    Ok(index)
}

/// `inflected_form base_form [base_form...]`
fn read_exceptions(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let file = path.display().to_string();
    let mut exceptions: HashMap<String, Vec<String>> = HashMap::new();
    for (lineno, line) in lines(path)? {
        let line = line?;
        let mut words = line.split_ascii_whitespace();
        let Some(form) = words.next() else { continue };
        let bases: Vec<String> = words.map(str::to_lowercase).collect();
        if bases.is_empty() {
            return Err(Error::malformed(&file, lineno, "base_form", format!("no base form for {form:?}")));
        }
        let entry = exceptions.entry(form.to_lowercase()).or_default();
        for b in bases {
            if !entry.contains(&b) {
                entry.push(b);
            }
        }
    }
    Ok(exceptions)
}
