//! Undirected entity link graph built from an annotated page corpus.
//!
//! An edge (u, v) exists iff some page satisfies one of two rules:
//!
//! 1. the page describes u and contains an anchor to v (any distance), or
//! 2. the page contains anchors to both u and v whose ordinal positions
//!    differ by at most `l` (strictly fewer than `l` anchors in between).
//!
//! Entities are interned to dense integer ids; the dictionary and the edge
//! set persist as two text files that reload to the identical graph.

use crate::corpus::{EntityId, WikiPage};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Graph construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    /// Max ordinal distance between two co-occurring anchors (rule 2).
    pub max_anchor_distance: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { max_anchor_distance: 100 }
    }
}

/// String ↔ dense-integer entity dictionary. Insertion order defines ids.
#[derive(Debug, Clone, Default)]
pub struct EntityDict {
    names: Vec<EntityId>,
    index: HashMap<EntityId, u32>,
}

impl EntityDict {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, e: &EntityId) -> u32 {
        if let Some(&id) = self.index.get(e) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(e.clone());
        self.index.insert(e.clone(), id);
        id
    }

    pub fn get(&self, e: &EntityId) -> Option<u32> {
        self.index.get(e).copied()
    }

    pub fn name(&self, id: u32) -> &EntityId {
        &self.names[id as usize]
    }

    pub fn contains(&self, e: &EntityId) -> bool {
        self.index.contains_key(e)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &EntityId> {
        self.names.iter()
    }

    /// One id string per line; the line number is the integer id.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for name in &self.names {
            writeln!(w, "{}", name.as_str()).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut dict = EntityDict::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::io(path, e))?;
            dict.intern(&EntityId::new(line));
        }
        Ok(dict)
    }
}

/// Symmetric, self-loop-free adjacency over interned entity ids.
#[derive(Debug, Clone)]
pub struct LinkGraph {
    pub dict: EntityDict,
    adjacency: Vec<HashSet<u32>>,
    num_edges: usize,
}

impl LinkGraph {
    fn with_dict(dict: EntityDict) -> Self {
        let n = dict.len();
        LinkGraph { dict, adjacency: vec![HashSet::new(); n], num_edges: 0 }
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn num_entities(&self) -> usize {
        self.dict.len()
    }

    fn add_edge_ids(&mut self, u: u32, v: u32) {
        if u == v {
            return;
        }
        if self.adjacency[u as usize].insert(v) {
            self.adjacency[v as usize].insert(u);
            self.num_edges += 1;
        }
    }

    /// Edge test on interned ids. Unknown ids and self-pairs are unlinked.
    pub fn is_linked_ids(&self, u: u32, v: u32) -> bool {
        if u == v {
            return false;
        }
        self.adjacency.get(u as usize).is_some_and(|s| s.contains(&v))
    }

    /// Edge test by entity id. Entities absent from the page corpus are
    /// treated as isolated vertices.
    pub fn is_linked(&self, u: &EntityId, v: &EntityId) -> bool {
        match (self.dict.get(u), self.dict.get(v)) {
            (Some(a), Some(b)) => self.is_linked_ids(a, b),
            _ => false,
        }
    }

    pub fn neighbors(&self, u: u32) -> impl Iterator<Item = u32> + '_ {
        self.adjacency[u as usize].iter().copied()
    }

    /// Sorted (u, v) pairs with u < v.
    pub fn edges_sorted(&self) -> Vec<(u32, u32)> {
        let mut edges = Vec::with_capacity(self.num_edges);
        for (u, nbrs) in self.adjacency.iter().enumerate() {
            let u = u as u32;
            for &v in nbrs {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    /// Persists the graph as `<stem>` entity dictionary + edge list.
    pub fn save(&self, dict_path: &Path, edges_path: &Path) -> Result<()> {
        self.dict.save(dict_path)?;
        let file = File::create(edges_path).map_err(|e| Error::io(edges_path, e))?;
        let mut w = BufWriter::new(file);
        for (u, v) in self.edges_sorted() {
            writeln!(w, "{u} {v}").map_err(|e| Error::io(edges_path, e))?;
        }
        w.flush().map_err(|e| Error::io(edges_path, e))
    }

    pub fn load(dict_path: &Path, edges_path: &Path) -> Result<Self> {
        let dict = EntityDict::load(dict_path)?;
        let mut graph = LinkGraph::with_dict(dict);
        let file = File::open(edges_path).map_err(|e| Error::io(edges_path, e))?;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(edges_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Result<u32> {
                s.and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::schema(edges_path, idx + 1, "expected two integer ids"))
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if u as usize >= graph.dict.len() || v as usize >= graph.dict.len() {
                return Err(Error::schema(edges_path, idx + 1, "entity id out of range"));
            }
            graph.add_edge_ids(u, v);
        }
        Ok(graph)
    }
}

/// Builds the link graph from a page corpus.
pub fn build_link_graph(pages: &[WikiPage], cfg: &GraphConfig) -> LinkGraph {
    let mut dict = EntityDict::new();
    for page in pages {
        dict.intern(&page.page_entity);
        for a in &page.anchors {
            dict.intern(&a.entity);
        }
    }
    let mut graph = LinkGraph::with_dict(dict);
    let l = cfg.max_anchor_distance;
    for page in pages {
        let page_id = graph.dict.get(&page.page_entity).expect("interned");
        let mut anchors: Vec<(usize, u32)> = page
            .anchors
            .iter()
            .map(|a| (a.position, graph.dict.get(&a.entity).expect("interned")))
            .collect();
        anchors.sort_unstable_by_key(|&(pos, _)| pos);
        for (i, &(pos, u)) in anchors.iter().enumerate() {
            // rule 1: the described entity links to every anchored entity
            graph.add_edge_ids(page_id, u);
            // rule 2: co-occurrence within l anchor positions
            for &(prev_pos, v) in anchors[..i].iter().rev() {
                if pos - prev_pos > l {
                    break;
                }
                graph.add_edge_ids(v, u);
            }
        }
    }
    graph
}
