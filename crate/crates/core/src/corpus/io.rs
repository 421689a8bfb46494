use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{RatingsCorpus, RawObservation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Tsv,
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "tsv" => Ok(InputFormat::Tsv),
            other => Err(Error::Config(format!("unknown input format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub observations: Vec<RawObservation>,
    /// Non-blank lines that could not be parsed.
    pub malformed: usize,
    /// 1-based line numbers of the first few malformed lines.
    pub malformed_lines: Vec<usize>,
}

fn id_field(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_jsonl(line: &str) -> Option<RawObservation> {
    let v: Value = serde_json::from_str(line).ok()?;
    let rating = v.get("rating")?.as_f64()?;
    Some(RawObservation {
        user: id_field(v.get("user")?)?,
        item: id_field(v.get("item")?)?,
        rating,
        text: v.get("text")?.as_str()?.to_string(),
    })
}

fn parse_tsv(line: &str) -> Option<RawObservation> {
    let mut parts = line.splitn(4, '\t');
    let user = parts.next()?;
    let item = parts.next()?;
    let rating: f64 = parts.next()?.trim().parse().ok()?;
    let text = parts.next()?;
    if user.is_empty() || item.is_empty() {
        return None;
    }
    Some(RawObservation {
        user: user.to_string(),
        item: item.to_string(),
        rating,
        text: text.to_string(),
    })
}

/// Reads every parseable record in file order. Malformed lines are counted
/// and skipped; an unreadable file is an error.
pub fn load_observations(path: &Path, format: InputFormat) -> Result<Loaded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Loaded::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match format {
            InputFormat::Jsonl => parse_jsonl(line),
            InputFormat::Tsv => parse_tsv(line),
        };
        match parsed.filter(|o| o.rating.is_finite()) {
            Some(o) => out.observations.push(o),
            None => {
                out.malformed += 1;
                if out.malformed_lines.len() < 10 {
                    out.malformed_lines.push(lineno + 1);
                }
            }
        }
    }
    if out.malformed > 0 {
        log::warn!(
            "{}: skipped {} malformed line(s), first at {:?}",
            path.display(),
            out.malformed,
            out.malformed_lines
        );
    }
    Ok(out)
}

const CORPUS_FORMAT: &str = "paco-corpus";
const CORPUS_VERSION: u32 = 1;

#[derive(Serialize)]
struct CorpusFileOut<'a> {
    format: &'a str,
    version: u32,
    corpus: &'a RatingsCorpus,
}

#[derive(Deserialize)]
struct CorpusFileIn {
    format: String,
    version: u32,
    corpus: RatingsCorpus,
}

/// Writes a corpus cache. Reals round-trip exactly.
pub fn write_corpus(path: &Path, corpus: &RatingsCorpus) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(
        &mut w,
        &CorpusFileOut {
            format: CORPUS_FORMAT,
            version: CORPUS_VERSION,
            corpus,
        },
    )
    .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<RatingsCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed: CorpusFileIn = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if parsed.format != CORPUS_FORMAT {
        return Err(Error::Format(format!(
            "{}: not a corpus cache (format {:?})",
            path.display(),
            parsed.format
        )));
    }
    if parsed.version != CORPUS_VERSION {
        return Err(Error::Format(format!(
            "{}: corpus cache version {} unsupported (expected {CORPUS_VERSION})",
            path.display(),
            parsed.version
        )));
    }
    Ok(parsed.corpus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{vectorize, Vocabulary};

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn tsv_three_valid_rows() {
        let f = write("u1\ti1\t4\tgreat tea\nu2\ti1\t2\tbad\nu1\ti2\t5\tyes\tmore\n");
        let l = load_observations(f.path(), InputFormat::Tsv).unwrap();
        assert_eq!(l.observations.len(), 3);
        assert_eq!(l.malformed, 0);
        assert_eq!(l.observations[2].text, "yes\tmore");
    }

    #[test]
    fn malformed_line_is_skipped_and_counted() {
        let f = write("u1\ti1\t4\tgreat\nu2\ti1\tnot-a-number\tbad\nu3\ti3\t1\tok\n");
        let l = load_observations(f.path(), InputFormat::Tsv).unwrap();
        assert_eq!(l.observations.len(), 2);
        assert_eq!(l.malformed, 1);
        assert_eq!(l.malformed_lines, vec![2]);
    }

    #[test]
    fn empty_file_gives_nothing() {
        let f = write("");
        let l = load_observations(f.path(), InputFormat::Jsonl).unwrap();
        assert!(l.observations.is_empty());
    }

    #[test]
    fn jsonl_records() {
        let f = write(
            "{\"user\":\"a\",\"item\":7,\"rating\":3.5,\"text\":\"hi\"}\n{\"user\":\"a\"}\n",
        );
        let l = load_observations(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(l.observations.len(), 1);
        assert_eq!(l.observations[0].item, "7");
        assert_eq!(l.malformed, 1);
    }

    #[test]
    fn missing_file_is_an_error() {
        let r = load_observations(Path::new("/nonexistent/x.tsv"), InputFormat::Tsv);
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn cache_round_trip_is_exact() {
        let raw = vec![
            RawObservation {
                user: "u".into(),
                item: "i".into(),
                rating: 0.1 + 0.2,
                text: "tea tea".into(),
            },
            RawObservation {
                user: "v".into(),
                item: "i".into(),
                rating: 1.0 / 3.0,
                text: "".into(),
            },
        ];
        let c = vectorize(&raw, &Vocabulary::from_words(vec!["tea".into()])).unwrap();
        let (c, _, _) = crate::corpus::center_ratings(&c, &c).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_corpus(f.path(), &c).unwrap();
        assert_eq!(read_corpus(f.path()).unwrap(), c);
    }

    #[test]
    fn wrong_cache_version_rejected() {
        let f = write("{\"format\":\"paco-corpus\",\"version\":99,\"corpus\":null}");
        assert!(matches!(read_corpus(f.path()), Err(Error::Format(_))));
    }
}
