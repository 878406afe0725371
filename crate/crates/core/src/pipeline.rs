//! File-driven pipeline stages.
//!
//! Every stage reads its inputs from, and writes its outputs into, one
//! data directory with fixed file names, so stages can run separately,
//! restart cleanly, and reproduce byte-identical artifacts independent of
//! how many worker threads are used. Each stage also leaves a
//! `<stage>.meta.json` sidecar recording the configuration it ran with
//! and what it produced; sidecars carry no timestamps.

use crate::candidates::{annotate_document, load_weak_documents, write_weak_documents, WeakDocument};
use crate::config::PipelineConfig;
use crate::corpus::synth::{
    self, SyntheticBundle, SyntheticSpec, DEV_FILE, ENTITY_VECS_FILE, PAGES_FILE, TEST_FILE,
    TRAIN_FILE, WORD_VECS_FILE,
};
use crate::corpus::{load_documents, load_wiki_corpus, CorpusFormat, EntityId};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_outcomes, micro_f1, model_outcomes, prior_outcomes, recall_curve, run_ablations,
    AblationRow, CandidateRanking, F1Report,
};
use crate::linkgraph::{build_link_graph, EntityDict, LinkGraph};
use crate::model::forward::link_document;
use crate::model::train::{train, write_training_log};
use crate::model::{
    load_checkpoint, save_checkpoint, Checkpoint, Dims, EmbeddingSet, ModelVariant,
    CHECKPOINT_VERSION,
};
use crate::priors::{AnchorPrior, EmbeddingTable};
use crate::Real;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// Corpus splits handled by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Invalid(format!(
                "unknown split {other:?}, expected train, dev, or test"
            ))),
        }
    }
}

/// Fixed file layout inside a data directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Artifacts { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn pages(&self) -> PathBuf {
        self.root.join(PAGES_FILE)
    }

    pub fn docs(&self, split: Split) -> PathBuf {
        self.root.join(match split {
            Split::Train => TRAIN_FILE,
            Split::Dev => DEV_FILE,
            Split::Test => TEST_FILE,
        })
    }

    pub fn word_vecs(&self) -> PathBuf {
        self.root.join(WORD_VECS_FILE)
    }

    pub fn entity_vecs(&self) -> PathBuf {
        self.root.join(ENTITY_VECS_FILE)
    }

    pub fn graph_entities(&self) -> PathBuf {
        self.root.join("graph.entities.txt")
    }

    pub fn graph_edges(&self) -> PathBuf {
        self.root.join("graph.edges.txt")
    }

    pub fn prior(&self) -> PathBuf {
        self.root.join("prior.tsv")
    }

    pub fn weak(&self, split: Split) -> PathBuf {
        self.root.join(format!("weak.{}.jsonl", split.as_str()))
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.root.join("model.json")
    }

    pub fn train_log(&self) -> PathBuf {
        self.root.join("train_log.csv")
    }

    pub fn metrics(&self, split: Split) -> PathBuf {
        self.root.join(format!("metrics.{}.json", split.as_str()))
    }

    pub fn ablation(&self) -> PathBuf {
        self.root.join("ablation.json")
    }

    pub fn meta(&self, stage: &str) -> PathBuf {
        self.root.join(format!("{stage}.meta.json"))
    }

    fn require(&self, path: &Path, produced_by: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            log::error!("missing {} (produced by `{produced_by}`)", path.display());
            Err(Error::MissingArtifact(path.to_path_buf()))
        }
    }
}

#[derive(Serialize)]
struct Meta<'a, C: Serialize, S: Serialize> {
    stage: &'a str,
    config: C,
    summary: &'a S,
}

fn write_meta<C: Serialize, S: Serialize>(
    arts: &Artifacts,
    stage: &str,
    config: C,
    summary: &S,
) -> Result<()> {
    let path = arts.meta(stage);
    let meta = Meta { stage, config, summary };
    let mut text = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::Invalid(format!("meta serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSummary {
    pub entities: usize,
    pub pages: usize,
    pub words: usize,
    pub train_docs: usize,
    pub dev_docs: usize,
    pub test_docs: usize,
}

/// Generates a synthetic corpus into the data directory.
pub fn cmd_synth(arts: &Artifacts, spec: &SyntheticSpec) -> Result<SynthSummary> {
    let bundle: SyntheticBundle<Real> = synth::generate(spec)?;
    bundle.write_to(arts.root())?;
    let summary = SynthSummary {
        entities: bundle.entities.len(),
        pages: bundle.pages.len(),
        words: bundle.words.len(),
        train_docs: bundle.train.len(),
        dev_docs: bundle.dev.len(),
        test_docs: bundle.test.len(),
    };
    write_meta(arts, "synth", spec, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSummary {
    pub entities: usize,
    pub edges: usize,
    pub surfaces: usize,
}

/// Builds the entity link graph and the anchor prior from the page corpus.
pub fn cmd_build_graph(arts: &Artifacts, cfg: &PipelineConfig) -> Result<GraphSummary> {
    arts.require(&arts.pages(), "synth")?;
    let pages = load_wiki_corpus(&arts.pages())?;
    let graph = build_link_graph(&pages, &cfg.graph);
    let prior = AnchorPrior::build(&pages);
    graph.save(&arts.graph_entities(), &arts.graph_edges())?;
    prior.save(&arts.prior())?;
    let summary = GraphSummary {
        entities: graph.num_entities(),
        edges: graph.num_edges(),
        surfaces: prior.num_surfaces(),
    };
    write_meta(arts, "build-graph", &cfg.graph, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitCounts {
    pub documents: usize,
    pub mentions: usize,
    pub mentions_with_candidates: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotateSummary {
    pub train: SplitCounts,
    pub dev: SplitCounts,
    pub test: SplitCounts,
    /// Context tokens that had no word vector, across all splits.
    pub unknown_context_tokens: u64,
}

/// Produces weakly labeled candidate sets for all three splits. The
/// training split gets `positives_train` positives per mention, the dev
/// and test splits get `positives_eval`.
pub fn cmd_annotate(arts: &Artifacts, cfg: &PipelineConfig) -> Result<AnnotateSummary> {
    arts.require(&arts.word_vecs(), "synth")?;
    arts.require(&arts.entity_vecs(), "synth")?;
    arts.require(&arts.graph_entities(), "build-graph")?;
    arts.require(&arts.prior(), "build-graph")?;
    cfg.candidates.validate()?;

    let words: EmbeddingTable<Real> = EmbeddingTable::load(&arts.word_vecs())?;
    let entities: EmbeddingTable<Real> = EmbeddingTable::load(&arts.entity_vecs())?;
    let graph = LinkGraph::load(&arts.graph_entities(), &arts.graph_edges())?;
    let prior = AnchorPrior::load(&arts.prior())?;
    let misses_before = words.miss_count() + entities.miss_count();

    let mut counts = Vec::with_capacity(Split::ALL.len());
    for split in Split::ALL {
        arts.require(&arts.docs(split), "synth")?;
        let docs = load_documents(&arts.docs(split), CorpusFormat::JsonLines, cfg.corpus.window_size)?;
        let num_positives = match split {
            Split::Train => cfg.candidates.positives_train,
            _ => cfg.candidates.positives_eval,
        };
        let weak: Vec<WeakDocument<Real>> = docs
            .par_iter()
            .map(|d| annotate_document(d, &prior, &words, &entities, &graph, &cfg.candidates, num_positives))
            .collect();
        write_weak_documents(&arts.weak(split), &weak)?;
        counts.push(SplitCounts {
            documents: weak.len(),
            mentions: weak.iter().map(|d| d.mentions.len()).sum(),
            mentions_with_candidates: weak
                .iter()
                .flat_map(|d| d.mentions.iter())
                .filter(|m| !m.candidates.is_empty())
                .count(),
        });
    }
    let summary = AnnotateSummary {
        train: counts[0].clone(),
        dev: counts[1].clone(),
        test: counts[2].clone(),
        unknown_context_tokens: words.miss_count() + entities.miss_count() - misses_before,
    };
    write_meta(arts, "annotate", (&cfg.corpus, &cfg.candidates), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub variant: ModelVariant,
    pub seed: u64,
    pub best_dev_f1: f64,
    pub best_update: usize,
    pub total_updates: usize,
    pub evaluations: usize,
}

fn load_tables(arts: &Artifacts) -> Result<(EmbeddingTable<Real>, EmbeddingTable<Real>)> {
    arts.require(&arts.word_vecs(), "synth")?;
    arts.require(&arts.entity_vecs(), "synth")?;
    Ok((EmbeddingTable::load(&arts.word_vecs())?, EmbeddingTable::load(&arts.entity_vecs())?))
}

fn load_dict(arts: &Artifacts) -> Result<EntityDict> {
    arts.require(&arts.graph_entities(), "build-graph")?;
    EntityDict::load(&arts.graph_entities())
}

fn model_dims(cfg: &PipelineConfig, words: &EmbeddingTable<Real>, entities: &EmbeddingTable<Real>) -> Dims {
    Dims {
        word_dim: words.dim(),
        entity_dim: entities.dim(),
        attention_dim: cfg.model.attention_dim,
        f_hidden: cfg.model.f_hidden,
        local_top_k: cfg.model.local_top_k,
    }
}

/// Trains the disambiguation model on the annotated training split,
/// keeping the checkpoint that scored best on the dev split.
pub fn cmd_train(
    arts: &Artifacts,
    cfg: &PipelineConfig,
    variant_override: Option<ModelVariant>,
    seed_override: Option<u64>,
) -> Result<TrainSummary> {
    arts.require(&arts.weak(Split::Train), "annotate")?;
    arts.require(&arts.weak(Split::Dev), "annotate")?;
    let (words, entities) = load_tables(arts)?;
    let dict = load_dict(arts)?;
    let train_docs: Vec<WeakDocument<Real>> = load_weak_documents(&arts.weak(Split::Train))?;
    let dev_docs: Vec<WeakDocument<Real>> = load_weak_documents(&arts.weak(Split::Dev))?;

    let variant = variant_override.unwrap_or(cfg.model.variant);
    let mut train_cfg = cfg.train.clone();
    if let Some(seed) = seed_override {
        train_cfg.seed = seed;
    }
    let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &entities };
    let dims = model_dims(cfg, &words, &entities);
    let in_kb = |e: &EntityId| dict.contains(e);
    let outcome = train(
        &train_docs,
        &dev_docs,
        &emb,
        dims,
        cfg.model.lambda_c,
        variant,
        &train_cfg,
        &in_kb,
    )?;

    let config_echo = serde_json::to_value(cfg)
        .map_err(|e| Error::Invalid(format!("config echo serialization failed: {e}")))?;
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        seed: train_cfg.seed,
        variant,
        dropout: train_cfg.dropout,
        config_echo: Some(config_echo),
        params: outcome.params,
    };
    save_checkpoint(&arts.checkpoint(), &ckpt)?;
    write_training_log(&arts.train_log(), &outcome.log)?;

    let summary = TrainSummary {
        variant,
        seed: train_cfg.seed,
        best_dev_f1: outcome.best_dev_f1,
        best_update: outcome.best_update,
        total_updates: outcome.total_updates,
        evaluations: outcome.log.len(),
    };
    write_meta(arts, "train", (&cfg.model, &train_cfg), &summary)?;
    Ok(summary)
}

fn load_model(arts: &Artifacts) -> Result<Checkpoint<Real>> {
    arts.require(&arts.checkpoint(), "train")?;
    load_checkpoint(&arts.checkpoint())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSummary {
    pub documents: usize,
    pub mentions: usize,
    pub linked: usize,
}

#[derive(Serialize, Deserialize)]
struct LinkRowOut<'a> {
    doc_id: &'a str,
    links: Vec<LinkEntryOut<'a>>,
}

#[derive(Serialize, Deserialize)]
struct LinkEntryOut<'a> {
    surface: &'a str,
    entity: Option<&'a str>,
}

/// Links raw documents with the trained model: annotates them on the fly
/// using evaluation-time candidate sets, then picks one entity (or none)
/// per mention. Writes one JSON line per document.
pub fn cmd_link(
    arts: &Artifacts,
    cfg: &PipelineConfig,
    input: &Path,
    output: &Path,
) -> Result<LinkSummary> {
    if !input.exists() {
        log::error!("input file {} does not exist", input.display());
        return Err(Error::MissingArtifact(input.to_path_buf()));
    }
    arts.require(&arts.prior(), "build-graph")?;
    arts.require(&arts.graph_entities(), "build-graph")?;
    let (words, entities) = load_tables(arts)?;
    let graph = LinkGraph::load(&arts.graph_entities(), &arts.graph_edges())?;
    let prior = AnchorPrior::load(&arts.prior())?;
    let ckpt = load_model(arts)?;
    ckpt.params.validate(Some(&words), Some(&entities))?;

    let docs = load_documents(input, CorpusFormat::JsonLines, cfg.corpus.window_size)?;
    let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &entities };
    let linked: Vec<(String, Vec<(String, Option<EntityId>)>)> = docs
        .par_iter()
        .map(|doc| {
            let weak = annotate_document(
                doc,
                &prior,
                &words,
                &entities,
                &graph,
                &cfg.candidates,
                cfg.candidates.positives_eval,
            );
            let picks = link_document(&weak, &emb, &ckpt.params, ckpt.variant);
            let rows = weak
                .mentions
                .iter()
                .zip(picks)
                .map(|(m, pick)| (m.surface.clone(), pick))
                .collect();
            (doc.doc_id.clone(), rows)
        })
        .collect();

    let file = File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = BufWriter::new(file);
    let mut mentions = 0usize;
    let mut links = 0usize;
    for (doc_id, rows) in &linked {
        mentions += rows.len();
        links += rows.iter().filter(|(_, e)| e.is_some()).count();
        let out = LinkRowOut {
            doc_id,
            links: rows
                .iter()
                .map(|(surface, entity)| LinkEntryOut {
                    surface,
                    entity: entity.as_ref().map(EntityId::as_str),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &out).map_err(|e| Error::io(output, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(output, e))?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;

    Ok(LinkSummary { documents: linked.len(), mentions, linked: links })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub model: F1Report,
    /// Picking the best first-stage aggregate score, no trained model.
    pub aggregate_baseline: F1Report,
    /// Picking the most frequent candidate by anchor prior.
    pub prior_baseline: F1Report,
    /// Fraction of scorable mentions whose annotation survives in the top
    /// k candidates by aggregate score.
    pub recall_curve: Vec<(usize, f64)>,
    /// Recall at 1 when ranking candidates by prior alone.
    pub prior_recall_at_1: f64,
}

/// Scores the trained model and the untrained baselines on one split.
pub fn cmd_eval(arts: &Artifacts, cfg: &PipelineConfig, split: Split) -> Result<EvalReport> {
    let _ = cfg;
    arts.require(&arts.weak(split), "annotate")?;
    let (words, entities) = load_tables(arts)?;
    let dict = load_dict(arts)?;
    let ckpt = load_model(arts)?;
    ckpt.params.validate(Some(&words), Some(&entities))?;
    let docs: Vec<WeakDocument<Real>> = load_weak_documents(&arts.weak(split))?;
    let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &entities };
    let in_kb = |e: &EntityId| dict.contains(e);

    let report = EvalReport {
        split,
        model: micro_f1(&model_outcomes(&docs, &emb, &ckpt.params, ckpt.variant, &in_kb)),
        aggregate_baseline: micro_f1(&aggregate_outcomes(&docs, &in_kb)),
        prior_baseline: micro_f1(&prior_outcomes(&docs, &in_kb)),
        recall_curve: recall_curve(&docs, &[1, 2, 3, 5, 10], CandidateRanking::Aggregate, &in_kb),
        prior_recall_at_1: crate::eval::recall_at_k(&docs, 1, CandidateRanking::Prior, &in_kb),
    };
    let path = arts.metrics(split);
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Invalid(format!("report serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    write_meta(arts, &format!("eval-{}", split.as_str()), (), &report)?;
    Ok(report)
}

/// Trains every model variant across the given seeds and scores them on
/// the test split, writing `ablation.json`.
pub fn cmd_ablate(arts: &Artifacts, cfg: &PipelineConfig, seeds: &[u64]) -> Result<Vec<AblationRow>> {
    for split in Split::ALL {
        arts.require(&arts.weak(split), "annotate")?;
    }
    let (words, entities) = load_tables(arts)?;
    let dict = load_dict(arts)?;
    let train_docs: Vec<WeakDocument<Real>> = load_weak_documents(&arts.weak(Split::Train))?;
    let dev_docs: Vec<WeakDocument<Real>> = load_weak_documents(&arts.weak(Split::Dev))?;
    let test_docs: Vec<WeakDocument<Real>> = load_weak_documents(&arts.weak(Split::Test))?;
    let emb = EmbeddingSet { words: &words, attention_words: &words, entities: &entities };
    let dims = model_dims(cfg, &words, &entities);
    let in_kb = |e: &EntityId| dict.contains(e);

    let rows = run_ablations(
        &train_docs,
        &dev_docs,
        &test_docs,
        &emb,
        dims,
        cfg.model.lambda_c,
        &cfg.train,
        seeds,
        &in_kb,
    )?;
    let path = arts.ablation();
    let mut text = serde_json::to_string_pretty(&rows)
        .map_err(|e| Error::Invalid(format!("ablation serialization failed: {e}")))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    write_meta(arts, "ablate", (&cfg.model, &cfg.train, seeds), &rows)?;
    Ok(rows)
}

/// Reads back a links file written by [`cmd_link`].
pub fn load_links(path: &Path) -> Result<Vec<(String, Vec<(String, Option<EntityId>)>)>> {
    #[derive(Deserialize)]
    struct RowIn {
        doc_id: String,
        links: Vec<EntryIn>,
    }
    #[derive(Deserialize)]
    struct EntryIn {
        surface: String,
        entity: Option<String>,
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RowIn = serde_json::from_str(&line)
            .map_err(|e| Error::schema(path, idx + 1, e.to_string()))?;
        out.push((
            row.doc_id,
            row.links.into_iter().map(|e| (e.surface, e.entity.map(EntityId))).collect(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn small_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.synth = SyntheticSpec {
            train_docs: 24,
            dev_docs: 8,
            test_docs: 8,
            ..SyntheticSpec::default()
        };
        cfg.model.attention_dim = 8;
        cfg.model.f_hidden = 8;
        cfg.model.local_top_k = 6;
        cfg.train.eval_interval = 48;
        cfg.train.max_epochs = 6;
        cfg.train.learning_rate = 0.01;
        cfg
    }

    #[test]
    fn stages_run_end_to_end_and_are_deterministic() {
        let dir = tempdir().unwrap();
        let arts = Artifacts::new(dir.path());
        let cfg = small_cfg();

        let s = cmd_synth(&arts, &cfg.synth).unwrap();
        assert_eq!(s.entities, 60);
        assert_eq!(s.train_docs, 24);

        let g = cmd_build_graph(&arts, &cfg).unwrap();
        assert_eq!(g.entities, 60);
        assert!(g.edges > 0);
        assert_eq!(g.surfaces, 20);

        let a = cmd_annotate(&arts, &cfg).unwrap();
        assert_eq!(a.train.documents, 24);
        assert_eq!(a.train.mentions, 24 * 4);
        assert_eq!(a.train.mentions_with_candidates, 24 * 4);
        assert_eq!(a.unknown_context_tokens, 0);

        let t = cmd_train(&arts, &cfg, None, None).unwrap();
        assert!(t.total_updates > 0);
        assert!(t.best_dev_f1 > 0.0);

        let e = cmd_eval(&arts, &cfg, Split::Test).unwrap();
        assert!(e.model.f1 > 0.0);
        assert!(e.recall_curve.last().unwrap().1 >= e.recall_curve[0].1);

        // second annotate run produces byte-identical output
        let before = std::fs::read(arts.weak(Split::Train)).unwrap();
        cmd_annotate(&arts, &cfg).unwrap();
        let after = std::fs::read(arts.weak(Split::Train)).unwrap();
        assert_eq!(before, after);

        // link the test docs and read the file back
        let out = dir.path().join("links.jsonl");
        let l = cmd_link(&arts, &cfg, &arts.docs(Split::Test), &out).unwrap();
        assert_eq!(l.documents, 8);
        assert_eq!(l.mentions, 8 * 4);
        assert_eq!(l.linked, l.mentions);
        let rows = load_links(&out).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|(_, links)| links.len() == 4));

        // one-seed ablation writes a row per model plus the baseline
        let rows = cmd_ablate(&arts, &cfg, &[7]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(arts.ablation().exists());

        // meta sidecars exist and carry no timestamps by construction
        for stage in ["synth", "build-graph", "annotate", "train", "eval-test", "ablate"] {
            assert!(arts.meta(stage).exists(), "missing meta for {stage}");
        }
    }

    #[test]
    fn missing_artifacts_name_the_producing_stage() {
        let dir = tempdir().unwrap();
        let arts = Artifacts::new(dir.path());
        let cfg = small_cfg();
        match cmd_build_graph(&arts, &cfg) {
            Err(Error::MissingArtifact(p)) => assert!(p.ends_with(PAGES_FILE)),
            other => panic!("expected missing artifact, got {other:?}"),
        }
        match cmd_train(&arts, &cfg, None, None) {
            Err(Error::MissingArtifact(_)) => {}
            other => panic!("expected missing artifact, got {other:?}"),
        }
    }

    #[test]
    fn split_parses_and_rejects() {
        assert_eq!("train".parse::<Split>().unwrap(), Split::Train);
        assert_eq!("dev".parse::<Split>().unwrap(), Split::Dev);
        assert_eq!("test".parse::<Split>().unwrap(), Split::Test);
        assert!("eval".parse::<Split>().is_err());
    }
}
