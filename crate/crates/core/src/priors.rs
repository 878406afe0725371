//! Mention-level evidence that needs no training: anchor-frequency
//! statistics, embedding dot-product context scores, and an edit-distance
//! similarity between a mention surface and an entity title.

use crate::corpus::{EntityId, WikiPage};
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

/// Dense embedding lookup table keyed by string (word or entity id).
///
/// Unknown keys resolve to a shared zero vector; a counter tracks how often
/// that happens so callers can report coverage.
#[derive(Debug)]
pub struct EmbeddingTable<F> {
    dim: usize,
    rows: Vec<F>,
    index: HashMap<String, usize>,
    zero: Vec<F>,
    misses: AtomicU64,
}

impl<F: Scalar> EmbeddingTable<F> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            rows: Vec::new(),
            index: HashMap::new(),
            zero: vec![F::zero(); dim],
            misses: AtomicU64::new(0),
        }
    }

    pub fn insert(&mut self, key: &str, vector: &[F]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dim(format!(
                "embedding for {key:?} has {} components, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        match self.index.get(key) {
            Some(&row) => {
                self.rows[row * self.dim..(row + 1) * self.dim].copy_from_slice(vector);
            }
            None => {
                let row = self.index.len();
                self.index.insert(key.to_owned(), row);
                self.rows.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&[F]> {
        self.index.get(key).map(|&row| &self.rows[row * self.dim..(row + 1) * self.dim])
    }

    /// Like [`get`](Self::get) but total: unknown keys yield the zero vector
    /// and bump the miss counter.
    pub fn lookup(&self, key: &str) -> &[F] {
        match self.get(key) {
            Some(v) => v,
            None => {
                self.misses.fetch_add(1, Ordering::Relaxed);
                &self.zero
            }
        }
    }

    pub fn miss_count(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    /// Component-wise sum of the vectors for `tokens` (unknowns contribute
    /// nothing beyond a miss).
    pub fn sum_of<I>(&self, tokens: I) -> Vec<F>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut acc = vec![F::zero(); self.dim];
        for t in tokens {
            for (a, &x) in acc.iter_mut().zip(self.lookup(t.as_ref())) {
                *a += x;
            }
        }
        acc
    }

    /// Component-wise mean; all-zero when `tokens` is empty.
    pub fn mean_of<I>(&self, tokens: I) -> Vec<F>
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut acc = vec![F::zero(); self.dim];
        let mut count = 0usize;
        for t in tokens {
            for (a, &x) in acc.iter_mut().zip(self.lookup(t.as_ref())) {
                *a += x;
            }
            count += 1;
        }
        if count > 0 {
            let inv = F::one() / F::lit(count as f64);
            for a in &mut acc {
                *a *= inv;
            }
        }
        acc
    }

    /// Parses `key c1 c2 ... cd` lines, whitespace-separated. Every line
    /// must carry the same number of components.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut table: Option<EmbeddingTable<F>> = None;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts
                .next()
                .ok_or_else(|| Error::schema(path, idx + 1, "missing key"))?
                .to_owned();
            let mut vector = Vec::new();
            for part in parts {
                let value: f64 = part.parse().map_err(|_| {
                    Error::schema(path, idx + 1, format!("bad number {part:?}"))
                })?;
                vector.push(F::lit(value));
            }
            if vector.is_empty() {
                return Err(Error::schema(path, idx + 1, "no vector components"));
            }
            let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            if vector.len() != table.dim {
                return Err(Error::schema(
                    path,
                    idx + 1,
                    format!("expected {} components, found {}", table.dim, vector.len()),
                ));
            }
            table.insert(&key, &vector)?;
        }
        table.ok_or_else(|| Error::Invalid(format!("embedding file {} is empty", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut keys: Vec<(&String, &usize)> = self.index.iter().collect();
        keys.sort_unstable_by_key(|&(_, row)| *row);
        for (key, &row) in keys {
            write!(w, "{key}").map_err(|e| Error::io(path, e))?;
            for x in &self.rows[row * self.dim..(row + 1) * self.dim] {
                write!(w, " {x}").map_err(|e| Error::io(path, e))?;
            }
            writeln!(w).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Log of the unnormalized context score for one entity: the dot product of
/// its embedding with the summed context word embeddings. Softmaxing these
/// over a candidate list yields the distribution itself, but rankings and
/// differences only ever need the log values.
pub fn context_score_log<F: Scalar>(entity_vec: &[F], context_sum: &[F]) -> F {
    dot(entity_vec, context_sum)
}

/// How often each anchor surface points at each entity, aggregated over a
/// page corpus. Candidate lists come out sorted by count (descending, ties
/// broken by entity id) so downstream truncations are deterministic.
#[derive(Debug, Clone, Default)]
pub struct AnchorPrior {
    by_surface: HashMap<String, SurfaceStats>,
}

#[derive(Debug, Clone)]
struct SurfaceStats {
    total: u64,
    entities: Vec<(EntityId, u64)>,
}

impl AnchorPrior {
    pub fn build(pages: &[WikiPage]) -> Self {
        let mut counts: HashMap<String, HashMap<EntityId, u64>> = HashMap::new();
        for page in pages {
            for a in &page.anchors {
                *counts.entry(a.surface.clone()).or_default().entry(a.entity.clone()).or_insert(0) +=
                    1;
            }
        }
        let mut by_surface = HashMap::with_capacity(counts.len());
        for (surface, per_entity) in counts {
            let total = per_entity.values().sum();
            let mut entities: Vec<(EntityId, u64)> = per_entity.into_iter().collect();
            entities.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            by_surface.insert(surface, SurfaceStats { total, entities });
        }
        AnchorPrior { by_surface }
    }

    /// Fraction of this surface's anchors that point at `entity`; zero for
    /// unseen surfaces or pairings.
    pub fn prob(&self, surface: &str, entity: &EntityId) -> f64 {
        let Some(stats) = self.by_surface.get(surface) else { return 0.0 };
        stats
            .entities
            .iter()
            .find(|(e, _)| e == entity)
            .map_or(0.0, |&(_, c)| c as f64 / stats.total as f64)
    }

    /// Candidate entities for a surface with raw counts, most frequent
    /// first. Empty for surfaces never seen as anchors.
    pub fn candidates(&self, surface: &str) -> &[(EntityId, u64)] {
        self.by_surface.get(surface).map_or(&[], |s| &s.entities)
    }

    pub fn surface_total(&self, surface: &str) -> u64 {
        self.by_surface.get(surface).map_or(0, |s| s.total)
    }

    pub fn num_surfaces(&self) -> usize {
        self.by_surface.len()
    }

    /// Tab-separated `surface entity count` rows, surfaces sorted, entities
    /// in candidate order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut surfaces: Vec<&String> = self.by_surface.keys().collect();
        surfaces.sort_unstable();
        for surface in surfaces {
            for (entity, count) in &self.by_surface[surface].entities {
                writeln!(w, "{surface}\t{}\t{count}", entity.as_str())
                    .map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut counts: Vec<(String, EntityId, u64)> = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let bad = || Error::schema(path, idx + 1, "expected surface\\tentity\\tcount");
            let surface = parts.next().ok_or_else(bad)?;
            let entity = parts.next().ok_or_else(bad)?;
            let count: u64 = parts.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            counts.push((surface.to_owned(), EntityId::new(entity), count));
        }
        let mut by_surface: HashMap<String, SurfaceStats> = HashMap::new();
        for (surface, entity, count) in counts {
            let stats = by_surface
                .entry(surface)
                .or_insert_with(|| SurfaceStats { total: 0, entities: Vec::new() });
            stats.total += count;
            stats.entities.push((entity, count));
        }
        for stats in by_surface.values_mut() {
            stats.entities.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        Ok(AnchorPrior { by_surface })
    }
}

/// Classic edit distance (insert, delete, substitute; unit cost) over
/// Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit-distance similarity in [0, 1]: one minus the distance scaled by the
/// longer string's length. Comparison is literal (case included); callers
/// normalize beforehand if they want case folding.
pub fn title_similarity(a: &str, b: &str) -> f64 {
    let denom = a.chars().count().max(b.chars().count());
    if denom == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / denom as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Anchor;
    use approx::assert_relative_eq;

    #[test]
    fn levenshtein_textbook_cases() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("same", "same"), 0);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
    }

    #[test]
    fn title_similarity_scales_by_longer_string() {
        assert_relative_eq!(title_similarity("Donald Trump", "Trump"), 1.0 - 7.0 / 12.0);
        assert_relative_eq!(title_similarity("Trump", "Donald Trump"), 1.0 - 7.0 / 12.0);
        assert_relative_eq!(title_similarity("same", "same"), 1.0);
        assert_relative_eq!(title_similarity("", ""), 1.0);
        assert_relative_eq!(title_similarity("ab", "xy"), 0.0);
    }

    fn anchor(surface: &str, entity: &str, position: usize) -> Anchor {
        Anchor { surface: surface.into(), entity: EntityId::new(entity), position }
    }

    fn prior_fixture() -> AnchorPrior {
        let pages = vec![
            WikiPage {
                page_entity: EntityId::new("P1"),
                anchors: vec![
                    anchor("may", "Theresa_May", 0),
                    anchor("may", "Theresa_May", 1),
                    anchor("may", "May_(month)", 2),
                ],
            },
            WikiPage {
                page_entity: EntityId::new("P2"),
                anchors: vec![anchor("may", "Theresa_May", 0), anchor("uk", "United_Kingdom", 1)],
            },
        ];
        AnchorPrior::build(&pages)
    }

    #[test]
    fn prior_counts_and_probabilities() {
        let prior = prior_fixture();
        assert_relative_eq!(prior.prob("may", &EntityId::new("Theresa_May")), 0.75);
        assert_relative_eq!(prior.prob("may", &EntityId::new("May_(month)")), 0.25);
        assert_relative_eq!(prior.prob("uk", &EntityId::new("United_Kingdom")), 1.0);
        assert_relative_eq!(prior.prob("may", &EntityId::new("United_Kingdom")), 0.0);
        assert_relative_eq!(prior.prob("unseen", &EntityId::new("Theresa_May")), 0.0);
        let sum: f64 = prior
            .candidates("may")
            .iter()
            .map(|(e, _)| prior.prob("may", e))
            .sum();
        assert_relative_eq!(sum, 1.0);
    }

    #[test]
    fn prior_candidates_sorted_by_count_then_id() {
        let pages = vec![WikiPage {
            page_entity: EntityId::new("P"),
            anchors: vec![
                anchor("x", "B_ent", 0),
                anchor("x", "A_ent", 1),
                anchor("x", "C_ent", 2),
                anchor("x", "C_ent", 3),
            ],
        }];
        let prior = AnchorPrior::build(&pages);
        let order: Vec<&str> =
            prior.candidates("x").iter().map(|(e, _)| e.as_str()).collect();
        assert_eq!(order, ["C_ent", "A_ent", "B_ent"]);
        assert!(prior.candidates("unseen").is_empty());
    }

    #[test]
    fn prior_save_load_round_trip() {
        let prior = prior_fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prior.tsv");
        prior.save(&path).unwrap();
        let loaded = AnchorPrior::load(&path).unwrap();
        assert_eq!(loaded.num_surfaces(), prior.num_surfaces());
        for surface in ["may", "uk"] {
            assert_eq!(loaded.candidates(surface), prior.candidates(surface));
            assert_eq!(loaded.surface_total(surface), prior.surface_total(surface));
        }
    }

    #[test]
    fn embedding_load_and_miss_accounting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "alpha 1.0 2.0 3.0\nbeta -1 0 0.5\n").unwrap();
        let table: EmbeddingTable<f64> = EmbeddingTable::load(&path).unwrap();
        assert_eq!(table.dim(), 3);
        assert_eq!(table.len(), 2);
        assert_eq!(table.get("alpha").unwrap(), &[1.0, 2.0, 3.0]);
        assert!(table.get("gamma").is_none());
        assert_eq!(table.lookup("gamma"), &[0.0, 0.0, 0.0]);
        assert_eq!(table.lookup("beta"), &[-1.0, 0.0, 0.5]);
        assert_eq!(table.miss_count(), 1);
    }

    #[test]
    fn embedding_load_rejects_ragged_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "alpha 1.0 2.0\nbeta 3.0\n").unwrap();
        let err = EmbeddingTable::<f64>::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("emb.txt:2"), "unexpected error: {msg}");
    }

    #[test]
    fn embedding_sum_mean_and_context_score() {
        let mut table = EmbeddingTable::<f64>::new(2);
        table.insert("a", &[1.0, 0.0]).unwrap();
        table.insert("b", &[0.0, 2.0]).unwrap();
        let tokens = vec!["a".to_owned(), "b".to_owned(), "zz".to_owned()];
        assert_eq!(table.sum_of(&tokens), vec![1.0, 2.0]);
        assert_eq!(table.mean_of(&tokens), vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(table.mean_of(std::iter::empty::<&str>()), vec![0.0, 0.0]);
        let score = context_score_log(&[2.0, -1.0], &[1.0, 2.0]);
        assert_relative_eq!(score, 0.0);
    }

    #[test]
    fn embedding_save_load_round_trip() {
        let mut table = EmbeddingTable::<f32>::new(2);
        table.insert("first", &[0.25, -1.5]).unwrap();
        table.insert("second", &[3.0, 0.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        table.save(&path).unwrap();
        let loaded: EmbeddingTable<f32> = EmbeddingTable::load(&path).unwrap();
        assert_eq!(loaded.get("first").unwrap(), table.get("first").unwrap());
        assert_eq!(loaded.get("second").unwrap(), table.get("second").unwrap());
    }
}
