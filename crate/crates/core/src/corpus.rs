//! Reader for chunking corpora in the three-column CoNLL format:
//! `token POS chunk-tag` per line, blank lines between sentences.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::annotation::{Observation, SourcePool, SourceStructure};
use crate::error::{Error, Result};
use crate::structure::{Labeling, StructureFamily};

/// How to treat `I-X` that follows neither `B-X` nor `I-X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagPolicy {
    /// Rewrite it as `B-X` and record a warning.
    #[default]
    Repair,
    /// Fail with the offending line number.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    /// 1-based line number; 0 for whole-file warnings.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ChunkCorpus {
    pub pool: SourcePool,
    /// Chunk types in sorted order; type `j` is `types[j]`.
    pub types: Vec<String>,
    pub warnings: Vec<Warning>,
    pub tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag<'a> {
    B(&'a str),
    I(&'a str),
    O,
}

fn parse_tag(tag: &str) -> Option<Tag<'_>> {
    if tag == "O" {
        return Some(Tag::O);
    }
    let (prefix, ty) = tag.split_once('-')?;
    if ty.is_empty() {
        return None;
    }
    match prefix {
        "B" => Some(Tag::B(ty)),
        "I" => Some(Tag::I(ty)),
        _ => None,
    }
}

struct Row {
    line: usize,
    word: String,
    pos: String,
    tag: String,
}

pub fn ingest_conll_chunking(path: impl AsRef<Path>, policy: TagPolicy) -> Result<ChunkCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    read_conll_chunking(file, policy)
}

pub fn read_conll_chunking(reader: impl Read, policy: TagPolicy) -> Result<ChunkCorpus> {
    let mut sentences: Vec<Vec<Row>> = Vec::new();
    let mut current = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        if cols.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 columns (token, POS, chunk tag), found {}", cols.len()),
            });
        }
        let tag = cols[cols.len() - 1];
        if parse_tag(tag).is_none() {
            return Err(Error::Parse { line: line_no, message: format!("malformed chunk tag '{tag}'") });
        }
        current.push(Row { line: line_no, word: cols[0].to_string(), pos: cols[1].to_string(), tag: tag.to_string() });
    }
    if !current.is_empty() {
        sentences.push(current);
    }

    let mut warnings = Vec::new();
    if sentences.is_empty() {
        warnings.push(Warning { line: 0, message: "no sentences found".into() });
        return Ok(ChunkCorpus { pool: SourcePool::default(), types: Vec::new(), warnings, tokens: 0 });
    }

    let vocab: BTreeSet<&str> = sentences
        .iter()
        .flatten()
        .filter_map(|r| match parse_tag(&r.tag) {
            Some(Tag::B(t) | Tag::I(t)) => Some(t),
            _ => None,
        })
        .collect();
    if vocab.is_empty() {
        return Err(Error::input("corpus contains no chunk types (every tag is O)"));
    }
    let types: Vec<String> = vocab.iter().map(|s| s.to_string()).collect();
    let t = types.len();
    let type_index = |ty: &str| types.binary_search_by(|x| x.as_str().cmp(ty)).expect("type in vocabulary");

    let mut structures = Vec::with_capacity(sentences.len());
    let mut tokens = 0;
    for sentence in &sentences {
        let mut labels = Vec::with_capacity(sentence.len());
        let mut prev: Option<Tag> = None;
        for row in sentence {
            let tag = parse_tag(&row.tag).expect("validated above");
            let tag = match (tag, prev) {
                (Tag::I(x), Some(Tag::B(p) | Tag::I(p))) if p == x => tag,
                (Tag::I(x), _) => match policy {
                    TagPolicy::Repair => {
                        warnings.push(Warning {
                            line: row.line,
                            message: format!("I-{x} does not continue a {x} chunk; read as B-{x}"),
                        });
                        Tag::B(x)
                    }
                    TagPolicy::Reject => {
                        return Err(Error::Parse {
                            line: row.line,
                            message: format!("I-{x} follows neither B-{x} nor I-{x}"),
                        })
                    }
                },
                _ => tag,
            };
            labels.push(match tag {
                Tag::B(x) => type_index(x),
                Tag::I(x) => t + type_index(x),
                Tag::O => 2 * t,
            });
            prev = Some(tag);
        }
        tokens += sentence.len();
        structures.push(SourceStructure {
            family: StructureFamily::bio(sentence.len(), t)?,
            truth: Labeling(labels),
            observation: Observation::Tokens {
                words: sentence.iter().map(|r| r.word.clone()).collect(),
                tags: sentence.iter().map(|r| r.pos.clone()).collect(),
            },
        });
    }
    Ok(ChunkCorpus { pool: SourcePool::new(structures)?, types, warnings, tokens })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::is_valid;

    fn read(text: &str, policy: TagPolicy) -> Result<ChunkCorpus> {
        read_conll_chunking(text.as_bytes(), policy)
    }

    #[test]
    fn two_sentences() {
        let c = read("He PRP B-NP\nran VBD B-VP\n. . O\n\nThe DT B-NP\ndog NN I-NP\n", TagPolicy::Repair).unwrap();
        assert_eq!(c.pool.len(), 2);
        let dims: Vec<usize> = c.pool.structures().iter().map(|s| s.dim()).collect();
        assert_eq!(dims, vec![3, 2]);
        assert_eq!(c.types, vec!["NP", "VP"]);
        assert!(c.warnings.is_empty());
        assert_eq!(c.tokens, 5);
        // NP = 0, VP = 1; B_j = j, I_j = 2 + j, O = 4
        assert_eq!(c.pool.structures()[0].truth.0, vec![0, 1, 4]);
        assert_eq!(c.pool.structures()[1].truth.0, vec![0, 2]);
    }

    #[test]
    fn single_np_chunk() {
        let c = read("a DT B-NP\nb NN I-NP\nc . O\n", TagPolicy::Reject).unwrap();
        let s = &c.pool.structures()[0];
        assert_eq!(s.family, StructureFamily::bio(3, 1).unwrap());
        assert_eq!(s.truth.0, vec![0, 1, 2]);
        assert!(is_valid(&s.family, &s.truth).unwrap());
    }

    #[test]
    fn empty_file_warns() {
        let c = read("", TagPolicy::Repair).unwrap();
        assert!(c.pool.is_empty());
        assert_eq!(c.warnings.len(), 1);
        let c = read("\n\n  \n", TagPolicy::Repair).unwrap();
        assert!(c.pool.is_empty());
    }

    #[test]
    fn orphan_inside_is_repaired_or_rejected() {
        let text = "x NN B-NP\ny IN O\nz NN I-NP\nw VB I-VP\n";
        let c = read(text, TagPolicy::Repair).unwrap();
        assert_eq!(c.warnings.iter().map(|w| w.line).collect::<Vec<_>>(), vec![3, 4]);
        let s = &c.pool.structures()[0];
        assert!(is_valid(&s.family, &s.truth).unwrap());
        assert_eq!(s.truth.0, vec![0, 4, 0, 1]);

        match read(text, TagPolicy::Reject) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        match read("a DT B-NP\nb NN\n", TagPolicy::Repair) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match read("a DT B-NP\n\nb NN X-NP\n", TagPolicy::Repair) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(read("a DT O\n", TagPolicy::Repair).is_err());
    }
}
