//! Document and page data model plus corpus i/o.
//!
//! Documents and Wikipedia-style pages are exchanged as JSON lines, one
//! object per line. Ingestion lowercases mention surfaces, context tokens,
//! and anchor surfaces (entity identifiers are opaque and kept verbatim),
//! and truncates context windows to the configured size. All structures
//! are immutable after load.

pub mod synth;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Opaque entity identifier, e.g. `"Donald_Trump"`. Compared by byte equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub String);

impl EntityId {
    pub fn new(id: impl Into<String>) -> Self {
        EntityId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The page title form of the id: underscores become spaces.
    pub fn title(&self) -> String {
        self.0.replace('_', " ")
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A mention span: surface string plus tokenized context windows.
/// `gold` is carried for evaluation only; no training code path reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    pub left: Vec<String>,
    pub right: Vec<String>,
    #[serde(default)]
    pub gold: Option<EntityId>,
}

impl Mention {
    /// Mention tokens: the surface split on whitespace.
    pub fn surface_tokens(&self) -> impl Iterator<Item = &str> {
        self.surface.split_whitespace()
    }

    /// Left-then-right context tokens in source order.
    pub fn context_tokens(&self) -> impl Iterator<Item = &str> {
        self.left.iter().map(String::as_str).chain(self.right.iter().map(String::as_str))
    }
}

/// A document: an ordered sequence of mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub mentions: Vec<Mention>,
}

/// One anchor inside a page: a surface string linked to an entity.
/// `position` is the 0-based ordinal of the anchor among the page's anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub surface: String,
    pub entity: EntityId,
    pub position: usize,
}

/// A page describing one entity, with its ordered anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct WikiPage {
    pub page_entity: EntityId,
    pub anchors: Vec<Anchor>,
}

/// Supported corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    JsonLines,
}

fn lower(s: &str) -> String {
    s.to_lowercase()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMention {
    surface: String,
    left: Vec<String>,
    right: Vec<String>,
    #[serde(default)]
    gold: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    doc_id: String,
    mentions: Vec<RawMention>,
}

#[derive(Serialize)]
struct RawMentionOut<'a> {
    surface: &'a str,
    left: &'a [String],
    right: &'a [String],
    gold: Option<&'a str>,
}

#[derive(Serialize)]
struct RawDocumentOut<'a> {
    doc_id: &'a str,
    mentions: Vec<RawMentionOut<'a>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnchor {
    surface: String,
    entity: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPage {
    page_entity: String,
    anchors: Vec<RawAnchor>,
}

#[derive(Serialize)]
struct RawAnchorOut<'a> {
    surface: &'a str,
    entity: &'a str,
}

#[derive(Serialize)]
struct RawPageOut<'a> {
    page_entity: &'a str,
    anchors: Vec<RawAnchorOut<'a>>,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines())
}

/// Loads a document corpus. Context windows are truncated to at most
/// `window_size` tokens per side, keeping the tokens nearest the mention.
pub fn load_documents(path: &Path, format: CorpusFormat, window_size: usize) -> Result<Vec<Document>> {
    let CorpusFormat::JsonLines = format;
    let mut docs = Vec::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDocument = serde_json::from_str(&line)
            .map_err(|e| Error::schema(path, idx + 1, e.to_string()))?;
        let mut mentions = Vec::with_capacity(raw.mentions.len());
        for m in raw.mentions {
            let surface = lower(m.surface.trim());
            if surface.is_empty() {
                return Err(Error::schema(path, idx + 1, "mention surface is empty"));
            }
            let mut left: Vec<String> = m.left.iter().map(|t| lower(t)).collect();
            if left.len() > window_size {
                left.drain(..left.len() - window_size);
            }
            let mut right: Vec<String> = m.right.iter().map(|t| lower(t)).collect();
            right.truncate(window_size);
            mentions.push(Mention { surface, left, right, gold: m.gold.map(EntityId) });
        }
        docs.push(Document { doc_id: raw.doc_id, mentions });
    }
    Ok(docs)
}

/// Writes documents in the same JSON-lines schema `load_documents` reads.
pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        let out = RawDocumentOut {
            doc_id: &d.doc_id,
            mentions: d
                .mentions
                .iter()
                .map(|m| RawMentionOut {
                    surface: &m.surface,
                    left: &m.left,
                    right: &m.right,
                    gold: m.gold.as_ref().map(EntityId::as_str),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &out).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a page corpus. Anchor positions are the 0-based array indices.
pub fn load_wiki_corpus(path: &Path) -> Result<Vec<WikiPage>> {
    let mut pages = Vec::new();
    for (idx, line) in open_lines(path)?.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPage = serde_json::from_str(&line)
            .map_err(|e| Error::schema(path, idx + 1, e.to_string()))?;
        if raw.page_entity.is_empty() {
            return Err(Error::schema(path, idx + 1, "page_entity is empty"));
        }
        let anchors = raw
            .anchors
            .into_iter()
            .enumerate()
            .map(|(pos, a)| Anchor {
                surface: lower(a.surface.trim()),
                entity: EntityId(a.entity),
                position: pos,
            })
            .collect();
        pages.push(WikiPage { page_entity: EntityId(raw.page_entity), anchors });
    }
    Ok(pages)
}

/// Writes pages in the schema `load_wiki_corpus` reads.
pub fn write_wiki_corpus(path: &Path, pages: &[WikiPage]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pages {
        let out = RawPageOut {
            page_entity: p.page_entity.as_str(),
            anchors: p
                .anchors
                .iter()
                .map(|a| RawAnchorOut { surface: &a.surface, entity: a.entity.as_str() })
                .collect(),
        };
        serde_json::to_writer(&mut w, &out).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, lines.join("\n")).unwrap();
        p
    }

    #[test]
    fn loads_two_documents_with_three_mentions() {
        let dir = tempdir().unwrap();
        let m = r#"{"surface":"Trump","left":["Mr"],"right":["visited"],"gold":null}"#;
        let doc1 = format!(r#"{{"doc_id":"d1","mentions":[{m},{m},{m}]}}"#);
        let doc2 = format!(r#"{{"doc_id":"d2","mentions":[{m},{m},{m}]}}"#);
        let p = write_lines(dir.path(), "docs.jsonl", &[&doc1, &doc2]);
        let docs = load_documents(&p, CorpusFormat::JsonLines, 50).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].mentions.len(), 3);
        assert_eq!(docs[0].mentions[0].surface, "trump");
        assert_eq!(docs[1].doc_id, "d2");
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let dir = tempdir().unwrap();
        let p = write_lines(dir.path(), "docs.jsonl", &[]);
        assert!(load_documents(&p, CorpusFormat::JsonLines, 50).unwrap().is_empty());
        let p2 = write_lines(dir.path(), "pages.jsonl", &[]);
        assert!(load_wiki_corpus(&p2).unwrap().is_empty());
    }

    #[test]
    fn missing_surface_reports_line_number() {
        let dir = tempdir().unwrap();
        let p = write_lines(
            dir.path(),
            "docs.jsonl",
            &[r#"{"doc_id":"d1","mentions":[{"left":[],"right":[]}]}"#],
        );
        let err = load_documents(&p, CorpusFormat::JsonLines, 50).unwrap_err();
        match err {
            Error::Schema { line, ref message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("surface"), "message: {message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn anchor_positions_are_array_indices() {
        let dir = tempdir().unwrap();
        let p = write_lines(
            dir.path(),
            "pages.jsonl",
            &[r#"{"page_entity":"X","anchors":[{"surface":"a","entity":"A"},{"surface":"b","entity":"B"},{"surface":"c","entity":"C"}]}"#],
        );
        let pages = load_wiki_corpus(&p).unwrap();
        let pos: Vec<usize> = pages[0].anchors.iter().map(|a| a.position).collect();
        assert_eq!(pos, vec![0, 1, 2]);
    }

    #[test]
    fn zero_anchor_page_and_duplicate_surfaces() {
        let dir = tempdir().unwrap();
        let p = write_lines(
            dir.path(),
            "pages.jsonl",
            &[
                r#"{"page_entity":"Empty","anchors":[]}"#,
                r#"{"page_entity":"X","anchors":[{"surface":"may","entity":"A"},{"surface":"may","entity":"B"}]}"#,
            ],
        );
        let pages = load_wiki_corpus(&p).unwrap();
        assert!(pages[0].anchors.is_empty());
        assert_eq!(pages[1].anchors.len(), 2);
    }

    #[test]
    fn context_truncated_to_window_size() {
        let dir = tempdir().unwrap();
        let left: Vec<String> = (0..6).map(|i| format!("\"l{i}\"")).collect();
        let doc = format!(
            r#"{{"doc_id":"d","mentions":[{{"surface":"x","left":[{}],"right":["r0","r1","r2","r3","r4","r5"]}}]}}"#,
            left.join(",")
        );
        let p = write_lines(dir.path(), "docs.jsonl", &[&doc]);
        let docs = load_documents(&p, CorpusFormat::JsonLines, 4).unwrap();
        let m = &docs[0].mentions[0];
        // nearest-to-mention tokens survive: the last 4 on the left, first 4 on the right
        assert_eq!(m.left, vec!["l2", "l3", "l4", "l5"]);
        assert_eq!(m.right, vec!["r0", "r1", "r2", "r3"]);
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempdir().unwrap();
        let docs = vec![Document {
            doc_id: "d1".into(),
            mentions: vec![Mention {
                surface: "theresa may".into(),
                left: vec!["mrs".into()],
                right: vec!["said".into(), "that".into()],
                gold: Some(EntityId::new("Theresa_May")),
            }],
        }];
        let p = dir.path().join("out.jsonl");
        write_documents(&p, &docs).unwrap();
        let loaded = load_documents(&p, CorpusFormat::JsonLines, 50).unwrap();
        assert_eq!(loaded, docs);
    }
}
