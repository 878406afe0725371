//! The trainable disambiguation model.
//!
//! Each candidate entity is scored by a star-shaped factorization: a local
//! context score plus attention-weighted pairwise compatibilities with the
//! most compatible positive candidate of every other mention. A tiny
//! two-input network combines that score with the anchor-frequency prior,
//! and the generator's aggregate score is mixed in with a fixed weight.
//! Training minimizes a per-document multi-instance hinge loss with plain
//! stochastic gradient descent and hand-derived gradients.

pub mod forward;
pub mod grad;
pub mod train;

use crate::error::{Error, Result};
use crate::priors::EmbeddingTable;
use crate::scalar::Scalar;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// Layer sizes. `word_dim`/`entity_dim` must match the embedding tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub word_dim: usize,
    pub entity_dim: usize,
    /// Width of the mention representation used by the attention.
    pub attention_dim: usize,
    /// Hidden width of the score-combining network.
    pub f_hidden: usize,
    /// Context words kept by the local score's hard attention.
    pub local_top_k: usize,
}

impl Dims {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("word_dim", self.word_dim),
            ("entity_dim", self.entity_dim),
            ("attention_dim", self.attention_dim),
            ("f_hidden", self.f_hidden),
            ("local_top_k", self.local_top_k),
        ] {
            if v == 0 {
                return Err(Error::Dim(format!("model dimension {name} must be positive")));
            }
        }
        // the local score multiplies word and entity vectors componentwise,
        // so the two embedding spaces must have the same width
        if self.word_dim != self.entity_dim {
            return Err(Error::Dim(format!(
                "word_dim {} must equal entity_dim {}",
                self.word_dim, self.entity_dim
            )));
        }
        Ok(())
    }
}

/// Which score components are active. Used for ablation runs; everything
/// defaults to [`ModelVariant::Full`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    /// Local score + attention-weighted coherence.
    Full,
    /// Coherence only: the local score is dropped from the star sum.
    NoLocal,
    /// Attention replaced by uniform weights over the other mentions.
    NoAttention,
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelVariant::Full => "full",
            ModelVariant::NoLocal => "no-local",
            ModelVariant::NoAttention => "no-attention",
        })
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelVariant::Full),
            "no-local" => Ok(ModelVariant::NoLocal),
            "no-attention" => Ok(ModelVariant::NoAttention),
            other => Err(Error::Invalid(format!(
                "unknown model variant {other:?}, expected full, no-local, or no-attention"
            ))),
        }
    }
}

/// All trainable parameters plus the fixed mix weight.
///
/// Diagonal matrices are stored as their diagonals; dense matrices are
/// row-major flat vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<F> {
    pub dims: Dims,
    /// Mix weight on the generator score; fixed during training.
    pub lambda_c: F,
    /// Pairwise entity compatibility diagonal, length `entity_dim`.
    pub r_diag: Vec<F>,
    /// Attention bilinear diagonal, length `attention_dim`.
    pub a_diag: Vec<F>,
    /// Mention encoder weights, `attention_dim x 2*word_dim`.
    pub w_h: Vec<F>,
    pub b_h: Vec<F>,
    /// Local score combination diagonal, length `entity_dim`.
    pub b_diag: Vec<F>,
    /// Local score word-relevance diagonal, length `entity_dim`. Ones at
    /// initialization, so relevance starts as a plain dot product.
    pub c_diag: Vec<F>,
    /// Combiner hidden layer, `f_hidden x 2` (inputs: star score, prior).
    pub w1: Vec<F>,
    pub b1: Vec<F>,
    /// Combiner output weights, length `f_hidden`.
    pub w2: Vec<F>,
    pub b2: F,
}

/// Names of the trainable parameter groups, in a fixed order that the
/// initializer, the gradient container, and the finite-difference checks
/// all share.
pub const PARAM_GROUPS: [&str; 10] =
    ["r_diag", "a_diag", "w_h", "b_h", "b_diag", "c_diag", "w1", "b1", "w2", "b2"];

impl<F: Scalar> ModelParams<F> {
    /// Fresh parameters: diagonals at one, biases at zero, dense weights
    /// uniform in ±1/sqrt(fan-in). Identical seeds give identical values.
    pub fn init(dims: Dims, lambda_c: F, rng: &mut ChaCha12Rng) -> Self {
        let mut uniform = |n: usize, fan_in: usize| -> Vec<F> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| F::lit(rng.gen_range(-bound..bound))).collect()
        };
        let w_h = uniform(dims.attention_dim * 2 * dims.word_dim, 2 * dims.word_dim);
        let w1 = uniform(dims.f_hidden * 2, 2);
        let w2 = uniform(dims.f_hidden, dims.f_hidden);
        ModelParams {
            dims,
            lambda_c,
            r_diag: vec![F::one(); dims.entity_dim],
            a_diag: vec![F::one(); dims.attention_dim],
            w_h,
            b_h: vec![F::zero(); dims.attention_dim],
            b_diag: vec![F::one(); dims.entity_dim],
            c_diag: vec![F::one(); dims.entity_dim],
            w1,
            b1: vec![F::zero(); dims.f_hidden],
            w2,
            b2: F::zero(),
        }
    }

    /// Checks dimensions and finiteness, and that the embedding tables this
    /// model will score against have the expected widths.
    pub fn validate(&self, words: Option<&EmbeddingTable<F>>, entities: Option<&EmbeddingTable<F>>) -> Result<()> {
        self.dims.validate()?;
        let d = &self.dims;
        let expect = [
            ("r_diag", self.r_diag.len(), d.entity_dim),
            ("a_diag", self.a_diag.len(), d.attention_dim),
            ("w_h", self.w_h.len(), d.attention_dim * 2 * d.word_dim),
            ("b_h", self.b_h.len(), d.attention_dim),
            ("b_diag", self.b_diag.len(), d.entity_dim),
            ("c_diag", self.c_diag.len(), d.entity_dim),
            ("w1", self.w1.len(), d.f_hidden * 2),
            ("b1", self.b1.len(), d.f_hidden),
            ("w2", self.w2.len(), d.f_hidden),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Dim(format!("{name} has {got} values, expected {want}")));
            }
        }
        if !self.iter_values().all(|v| v.is_finite()) || !self.lambda_c.is_finite() {
            return Err(Error::Invalid("model parameters contain non-finite values".into()));
        }
        if let Some(words) = words {
            if words.dim() != d.word_dim {
                return Err(Error::Dim(format!(
                    "word embeddings have dimension {}, model expects {}",
                    words.dim(),
                    d.word_dim
                )));
            }
        }
        if let Some(entities) = entities {
            if entities.dim() != d.entity_dim {
                return Err(Error::Dim(format!(
                    "entity embeddings have dimension {}, model expects {}",
                    entities.dim(),
                    d.entity_dim
                )));
            }
        }
        Ok(())
    }

    /// Flat view of a trainable group by name.
    pub fn group(&self, name: &str) -> &[F] {
        match name {
            "r_diag" => &self.r_diag,
            "a_diag" => &self.a_diag,
            "w_h" => &self.w_h,
            "b_h" => &self.b_h,
            "b_diag" => &self.b_diag,
            "c_diag" => &self.c_diag,
            "w1" => &self.w1,
            "b1" => &self.b1,
            "w2" => &self.w2,
            "b2" => std::slice::from_ref(&self.b2),
            other => panic!("unknown parameter group {other:?}"),
        }
    }

    pub fn group_mut(&mut self, name: &str) -> &mut [F] {
        match name {
            "r_diag" => &mut self.r_diag,
            "a_diag" => &mut self.a_diag,
            "w_h" => &mut self.w_h,
            "b_h" => &mut self.b_h,
            "b_diag" => &mut self.b_diag,
            "c_diag" => &mut self.c_diag,
            "w1" => &mut self.w1,
            "b1" => &mut self.b1,
            "w2" => &mut self.w2,
            "b2" => std::slice::from_mut(&mut self.b2),
            other => panic!("unknown parameter group {other:?}"),
        }
    }

    fn iter_values(&self) -> impl Iterator<Item = F> + '_ {
        PARAM_GROUPS.iter().flat_map(|g| self.group(g).iter().copied())
    }

    /// `self -= rate * grads` over every trainable group.
    pub fn sgd_step(&mut self, rate: F, grads: &ModelGrads<F>) {
        for name in PARAM_GROUPS {
            let g = grads.group(name);
            let p = self.group_mut(name);
            for (pv, &gv) in p.iter_mut().zip(g) {
                *pv -= rate * gv;
            }
        }
    }
}

/// Gradient accumulator shaped exactly like the trainable part of
/// [`ModelParams`].
#[derive(Debug, Clone)]
pub struct ModelGrads<F> {
    pub r_diag: Vec<F>,
    pub a_diag: Vec<F>,
    pub w_h: Vec<F>,
    pub b_h: Vec<F>,
    pub b_diag: Vec<F>,
    pub c_diag: Vec<F>,
    pub w1: Vec<F>,
    pub b1: Vec<F>,
    pub w2: Vec<F>,
    pub b2: F,
}

impl<F: Scalar> ModelGrads<F> {
    pub fn zeros(dims: &Dims) -> Self {
        ModelGrads {
            r_diag: vec![F::zero(); dims.entity_dim],
            a_diag: vec![F::zero(); dims.attention_dim],
            w_h: vec![F::zero(); dims.attention_dim * 2 * dims.word_dim],
            b_h: vec![F::zero(); dims.attention_dim],
            b_diag: vec![F::zero(); dims.entity_dim],
            c_diag: vec![F::zero(); dims.entity_dim],
            w1: vec![F::zero(); dims.f_hidden * 2],
            b1: vec![F::zero(); dims.f_hidden],
            w2: vec![F::zero(); dims.f_hidden],
            b2: F::zero(),
        }
    }

    pub fn group(&self, name: &str) -> &[F] {
        match name {
            "r_diag" => &self.r_diag,
            "a_diag" => &self.a_diag,
            "w_h" => &self.w_h,
            "b_h" => &self.b_h,
            "b_diag" => &self.b_diag,
            "c_diag" => &self.c_diag,
            "w1" => &self.w1,
            "b1" => &self.b1,
            "w2" => &self.w2,
            "b2" => std::slice::from_ref(&self.b2),
            other => panic!("unknown parameter group {other:?}"),
        }
    }

    /// Resets every entry to zero, keeping the allocations.
    pub fn clear(&mut self) {
        for v in self
            .r_diag
            .iter_mut()
            .chain(&mut self.a_diag)
            .chain(&mut self.w_h)
            .chain(&mut self.b_h)
            .chain(&mut self.b_diag)
            .chain(&mut self.c_diag)
            .chain(&mut self.w1)
            .chain(&mut self.b1)
            .chain(&mut self.w2)
        {
            *v = F::zero();
        }
        self.b2 = F::zero();
    }
}

/// On-disk model container. Loading reproduces the parameters bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint<F> {
    pub format_version: u32,
    pub seed: u64,
    pub variant: ModelVariant,
    /// Dropout rate the model was trained with (inference ignores it).
    pub dropout: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_echo: Option<serde_json::Value>,
    pub params: ModelParams<F>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint<F: Scalar>(path: &Path, ckpt: &Checkpoint<F>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, ckpt)
        .map_err(|e| Error::Invalid(format!("cannot encode checkpoint: {e}")))?;
    use std::io::Write as _;
    writeln!(w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<Checkpoint<F>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint<F> = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::schema(path, 1, e.to_string()))?;
    if ckpt.format_version != CHECKPOINT_VERSION {
        return Err(Error::Invalid(format!(
            "checkpoint {} has format version {}, this build reads {}",
            path.display(),
            ckpt.format_version,
            CHECKPOINT_VERSION
        )));
    }
    ckpt.params.validate(None, None)?;
    Ok(ckpt)
}

/// The three embedding tables the model scores against. `attention_words`
/// feeds the mention encoder; `words` feeds the local score. They may be
/// the same table.
#[derive(Clone, Copy)]
pub struct EmbeddingSet<'a, F> {
    pub words: &'a EmbeddingTable<F>,
    pub attention_words: &'a EmbeddingTable<F>,
    pub entities: &'a EmbeddingTable<F>,
}
