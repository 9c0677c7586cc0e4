//! JSON-lines caption corpora, optionally gzip-compressed (`.gz`).

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

use crate::caption::CaptionRecord;
use crate::error::{Error, Result};

/// Opens a file for buffered reading, transparently decompressing `.gz`.
pub fn open_text(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let inner: Box<dyn Read + Send> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(MultiGzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(inner)))
}

/// Streaming reader over `{"id": ..., "text": ...}` lines. Blank lines are
/// skipped; parse errors carry the 1-based line number.
pub struct CaptionReader {
    path: PathBuf,
    lines: std::io::Lines<Box<dyn BufRead + Send>>,
    lineno: usize,
}

impl CaptionReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let lines = open_text(&path)?.lines();
        Ok(CaptionReader {
            path,
            lines,
            lineno: 0,
        })
    }

    /// Reads up to `n` records.
    pub fn next_chunk(&mut self, n: usize) -> Result<Vec<CaptionRecord>> {
        let mut chunk = Vec::with_capacity(n.min(1 << 16));
        for rec in self.by_ref().take(n) {
            chunk.push(rec?);
        }
        Ok(chunk)
    }
}

impl Iterator for CaptionReader {
    type Item = Result<CaptionRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.lineno += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_caption_line(&line).map_err(|msg| {
                Error::malformed(self.path.display().to_string(), self.lineno, "caption", msg)
            }));
        }
    }
}

pub fn parse_caption_line(line: &str) -> std::result::Result<CaptionRecord, String> {
    serde_json::from_str::<CaptionRecord>(line).map_err(|e| e.to_string())
}

pub fn read_captions(path: impl AsRef<Path>) -> Result<Vec<CaptionRecord>> {
    CaptionReader::open(path)?.collect()
}
