//! Deterministic synthetic corpus for development and benchmarks.
//!
//! The generated world has `num_entities` entities arranged into surface
//! groups of `ambiguity` members each; all members of a group share one
//! surface string, so every mention is genuinely ambiguous. Member `m` of
//! group `g` belongs to topic `(g + m) % topics`. Pages anchor the
//! same-topic members of every other group, with anchor counts skewed
//! toward low member indices so the most frequent reading of a surface is
//! often not the right one. Each document commits to one topic: its
//! mentions' annotated entities all come from that topic, and context
//! words mix entity-specific words, topic words, and noise.
//!
//! With `topics >= ambiguity` each group has at most one member per topic
//! and the link structure alone pins the answer. With `topics <
//! ambiguity` some groups have several members in the same topic; those
//! twins share all graph structure and can only be told apart by the
//! entity-specific context words.

use super::{Anchor, Document, EntityId, Mention, WikiPage};
use crate::error::{Error, Result};
use crate::priors::EmbeddingTable;
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const PAGES_FILE: &str = "pages.jsonl";
pub const TRAIN_FILE: &str = "docs.train.jsonl";
pub const DEV_FILE: &str = "docs.dev.jsonl";
pub const TEST_FILE: &str = "docs.test.jsonl";
pub const WORD_VECS_FILE: &str = "embeddings.words.txt";
pub const ENTITY_VECS_FILE: &str = "embeddings.entities.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Entities per surface group; every mention has this many candidates.
    pub ambiguity: usize,
    pub topics: usize,
    /// Must be a multiple of `ambiguity * topics`.
    pub num_entities: usize,
    pub embed_dim: usize,
    pub train_docs: usize,
    pub dev_docs: usize,
    pub test_docs: usize,
    pub mentions_per_doc: usize,
    pub context_words_per_side: usize,
    /// Distinct context words tied to each entity.
    pub entity_words: usize,
    /// Distinct context words tied to each topic.
    pub topic_words: usize,
    pub noise_words: usize,
    /// Weight of the entity-specific component against the topic direction
    /// in entity embeddings. Raising it weakens the topic signal the
    /// embeddings carry (and with it the pairwise-compatibility cue) while
    /// entity context words stay informative.
    pub entity_own_weight: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            ambiguity: 3,
            topics: 4,
            num_entities: 60,
            embed_dim: 16,
            train_docs: 160,
            dev_docs: 40,
            test_docs: 40,
            mentions_per_doc: 4,
            context_words_per_side: 8,
            entity_words: 4,
            topic_words: 6,
            noise_words: 40,
            entity_own_weight: 0.7,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.ambiguity < 2 {
            problems.push("ambiguity must be at least 2".to_string());
        }
        if self.topics < 2 {
            problems.push("topics must be at least 2".to_string());
        }
        let block = self.ambiguity * self.topics;
        if block == 0 || self.num_entities == 0 || self.num_entities % block != 0 {
            problems.push(format!(
                "num_entities {} must be a positive multiple of ambiguity * topics = {}",
                self.num_entities, block
            ));
        }
        if self.embed_dim < 2 {
            problems.push("embed_dim must be at least 2".to_string());
        }
        for (name, v) in [
            ("train_docs", self.train_docs),
            ("dev_docs", self.dev_docs),
            ("test_docs", self.test_docs),
            ("context_words_per_side", self.context_words_per_side),
            ("entity_words", self.entity_words),
            ("topic_words", self.topic_words),
            ("noise_words", self.noise_words),
        ] {
            if v == 0 {
                problems.push(format!("{name} must be positive"));
            }
        }
        if self.mentions_per_doc < 2 {
            problems.push("mentions_per_doc must be at least 2".to_string());
        }
        if !(self.entity_own_weight.is_finite() && self.entity_own_weight >= 0.0) {
            problems.push("entity_own_weight must be finite and nonnegative".to_string());
        }
        if problems.is_empty() && self.num_entities % block == 0 {
            // every topic needs enough groups with a member in it
            let groups = self.num_entities / self.ambiguity;
            for t in 0..self.topics {
                let pool = (0..groups)
                    .filter(|&g| (0..self.ambiguity).any(|m| (g + m) % self.topics == t))
                    .count();
                if pool < self.mentions_per_doc {
                    problems.push(format!(
                        "mentions_per_doc {} exceeds the {} groups that have a member in topic {}",
                        self.mentions_per_doc, pool, t
                    ));
                    break;
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    fn groups(&self) -> usize {
        self.num_entities / self.ambiguity
    }

    fn topic_of(&self, g: usize, m: usize) -> usize {
        (g + m) % self.topics
    }
}

/// The surface string shared by every member of a group.
pub fn group_surface(g: usize) -> String {
    format!("ent{g:03}")
}

/// The identifier of member `m` of group `g`.
pub fn member_entity(g: usize, m: usize) -> EntityId {
    EntityId::new(format!("ent{g:03}_{m}"))
}

/// Everything the generator produces, in memory.
#[derive(Debug)]
pub struct SyntheticBundle<F> {
    pub pages: Vec<WikiPage>,
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
    pub words: EmbeddingTable<F>,
    pub entities: EmbeddingTable<F>,
}

impl<F: Scalar> SyntheticBundle<F> {
    /// Writes the bundle under `dir` with the fixed file names this module
    /// exports.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        super::write_wiki_corpus(&dir.join(PAGES_FILE), &self.pages)?;
        super::write_documents(&dir.join(TRAIN_FILE), &self.train)?;
        super::write_documents(&dir.join(DEV_FILE), &self.dev)?;
        super::write_documents(&dir.join(TEST_FILE), &self.test)?;
        self.words.save(&dir.join(WORD_VECS_FILE))?;
        self.entities.save(&dir.join(ENTITY_VECS_FILE))?;
        Ok(())
    }
}

fn unit_vec(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `normalize(a + w * b)`
fn mix(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + w * y).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn to_scalar<F: Scalar>(v: &[f64]) -> Vec<F> {
    v.iter().map(|&x| F::lit(x)).collect()
}

/// How many times each anchor to member `m` is repeated; lower member
/// indices end up more frequent.
fn anchor_copies(ambiguity: usize, m: usize) -> usize {
    ambiguity - m
}

/// Builds the whole corpus deterministically from the spec's seed.
pub fn generate<F: Scalar>(spec: &SyntheticSpec) -> Result<SyntheticBundle<F>> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let groups = spec.groups();
    let a = spec.ambiguity;

    let topic_dirs: Vec<Vec<f64>> =
        (0..spec.topics).map(|_| unit_vec(&mut rng, spec.embed_dim)).collect();
    let entity_vec: Vec<Vec<Vec<f64>>> = (0..groups)
        .map(|g| {
            (0..a)
                .map(|m| {
                    let own = unit_vec(&mut rng, spec.embed_dim);
                    mix(&topic_dirs[spec.topic_of(g, m)], &own, spec.entity_own_weight)
                })
                .collect()
        })
        .collect();

    let mut entities = EmbeddingTable::<F>::new(spec.embed_dim);
    for g in 0..groups {
        for m in 0..a {
            entities.insert(member_entity(g, m).as_str(), &to_scalar(&entity_vec[g][m]))?;
        }
    }

    let mut words = EmbeddingTable::<F>::new(spec.embed_dim);
    for (t, dir) in topic_dirs.iter().enumerate() {
        for j in 0..spec.topic_words {
            let noise = unit_vec(&mut rng, spec.embed_dim);
            words.insert(&format!("t{t}w{j}"), &to_scalar(&mix(dir, &noise, 0.5)))?;
        }
    }
    for g in 0..groups {
        for m in 0..a {
            for j in 0..spec.entity_words {
                let noise = unit_vec(&mut rng, spec.embed_dim);
                words.insert(
                    &format!("{}w{j}", member_entity(g, m)),
                    &to_scalar(&mix(&entity_vec[g][m], &noise, 0.5)),
                )?;
            }
        }
    }
    for j in 0..spec.noise_words {
        let noise = unit_vec(&mut rng, spec.embed_dim);
        words.insert(&format!("nw{j}"), &to_scalar(&noise))?;
    }

    // one page per entity, anchoring every same-topic member of the other
    // groups; repeats skew the anchor counts by member index
    let mut pages = Vec::with_capacity(spec.num_entities);
    for g in 0..groups {
        for m in 0..a {
            let t = spec.topic_of(g, m);
            let mut anchors = Vec::new();
            for other in 0..groups {
                if other == g {
                    continue;
                }
                for mm in 0..a {
                    if spec.topic_of(other, mm) != t {
                        continue;
                    }
                    for _ in 0..anchor_copies(a, mm) {
                        anchors.push(Anchor {
                            surface: group_surface(other),
                            entity: member_entity(other, mm),
                            position: anchors.len(),
                        });
                    }
                }
            }
            pages.push(WikiPage { page_entity: member_entity(g, m), anchors });
        }
    }

    let total = spec.train_docs + spec.dev_docs + spec.test_docs;
    let mut splits: Vec<Vec<Document>> = vec![Vec::new(), Vec::new(), Vec::new()];
    for i in 0..total {
        let t = i % spec.topics;
        let pool: Vec<usize> = (0..groups)
            .filter(|&g| (0..a).any(|m| spec.topic_of(g, m) == t))
            .collect();
        let chosen: Vec<usize> =
            pool.choose_multiple(&mut rng, spec.mentions_per_doc).copied().collect();
        let mut mentions = Vec::with_capacity(chosen.len());
        for &g in &chosen {
            let eligible: Vec<usize> = (0..a).filter(|&m| spec.topic_of(g, m) == t).collect();
            let m = *eligible.choose(&mut rng).expect("pool groups have a member in topic");
            let gold = member_entity(g, m);
            let side = |rng: &mut ChaCha12Rng| -> Vec<String> {
                (0..spec.context_words_per_side)
                    .map(|_| {
                        let u: f64 = rng.gen();
                        if u < 0.35 {
                            format!("{gold}w{}", rng.gen_range(0..spec.entity_words))
                        } else if u < 0.70 {
                            format!("t{t}w{}", rng.gen_range(0..spec.topic_words))
                        } else {
                            format!("nw{}", rng.gen_range(0..spec.noise_words))
                        }
                    })
                    .collect()
            };
            let left = side(&mut rng);
            let right = side(&mut rng);
            mentions.push(Mention {
                surface: group_surface(g),
                left,
                right,
                gold: Some(gold),
            });
        }
        let (split, local) = if i < spec.train_docs {
            (0, i)
        } else if i < spec.train_docs + spec.dev_docs {
            (1, i - spec.train_docs)
        } else {
            (2, i - spec.train_docs - spec.dev_docs)
        };
        let name = ["train", "dev", "test"][split];
        splits[split].push(Document { doc_id: format!("{name}{local:05}"), mentions });
    }
    let mut it = splits.into_iter();
    Ok(SyntheticBundle {
        pages,
        train: it.next().unwrap(),
        dev: it.next().unwrap(),
        test: it.next().unwrap(),
        words,
        entities,
    })
}
