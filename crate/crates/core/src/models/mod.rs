//! Link-prediction models: four base scorers and the literal fusion
//! variants built on them.
//!
//! A [`ModelState`] is a list of named parameter tables. The first two are
//! always the entity and relation embeddings; the rest depend on the
//! variant (see [`ModelKind::table_names`]).

pub mod checkpoint;
mod forward;
pub mod scoring;
mod snapshot;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::features::LiteralFeatureMatrix;
use crate::graph::{KnowledgeGraph, Triple};
use crate::rng::{self, Stream};

pub use forward::{bce_with_logits, Batch, Gradients, MarginBatch, OneToNBatch, PassOptions};
pub use snapshot::{Affine, Scorer, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "transe")]
    TransE,
    #[serde(rename = "distmult")]
    DistMult,
    #[serde(rename = "complex")]
    ComplEx,
    #[serde(rename = "tucker")]
    TuckER,
    #[serde(rename = "literale-distmult")]
    LiteralEDistMult,
    #[serde(rename = "literale-complex")]
    LiteralEComplEx,
    #[serde(rename = "kbln")]
    Kbln,
    #[serde(rename = "mtkgnn")]
    Mtkgnn,
    #[serde(rename = "transea")]
    TransEA,
}

/// How a model is trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossRegime {
    /// Sigmoid cross-entropy against all entities at once.
    OneToN,
    /// Margin ranking against sampled corruptions.
    Margin,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::TransE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::TuckER,
        ModelKind::LiteralEDistMult,
        ModelKind::LiteralEComplEx,
        ModelKind::Kbln,
        ModelKind::Mtkgnn,
        ModelKind::TransEA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::TuckER => "tucker",
            ModelKind::LiteralEDistMult => "literale-distmult",
            ModelKind::LiteralEComplEx => "literale-complex",
            ModelKind::Kbln => "kbln",
            ModelKind::Mtkgnn => "mtkgnn",
            ModelKind::TransEA => "transea",
        }
    }

    pub fn regime(self) -> LossRegime {
        match self {
            ModelKind::TransE | ModelKind::TransEA => LossRegime::Margin,
            _ => LossRegime::OneToN,
        }
    }

    pub fn is_complex(self) -> bool {
        matches!(self, ModelKind::ComplEx | ModelKind::LiteralEComplEx)
    }

    pub fn is_literale(self) -> bool {
        matches!(self, ModelKind::LiteralEDistMult | ModelKind::LiteralEComplEx)
    }

    /// Whether the model reads the literal feature matrix.
    pub fn uses_literals(self) -> bool {
        matches!(
            self,
            ModelKind::LiteralEDistMult
                | ModelKind::LiteralEComplEx
                | ModelKind::Kbln
                | ModelKind::Mtkgnn
                | ModelKind::TransEA
        )
    }

    pub fn table_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::TransE | ModelKind::DistMult | ModelKind::ComplEx => &["entity", "relation"],
            ModelKind::TuckER => &["entity", "relation", "core"],
            ModelKind::LiteralEDistMult | ModelKind::LiteralEComplEx => &[
                "entity",
                "relation",
                "gate_entity",
                "gate_literal",
                "gate_bias",
                "transform",
            ],
            ModelKind::Kbln => &["entity", "relation", "literal_weight", "rbf_center", "rbf_width"],
            ModelKind::Mtkgnn => &[
                "entity",
                "relation",
                "triple_hidden",
                "triple_hidden_bias",
                "triple_out",
                "triple_out_bias",
                "attr_embedding",
                "subject_attr_hidden",
                "subject_attr_hidden_bias",
                "subject_attr_out",
                "subject_attr_out_bias",
                "object_attr_hidden",
                "object_attr_hidden_bias",
                "object_attr_out",
                "object_attr_out_bias",
            ],
            ModelKind::TransEA => &["entity", "relation", "attr_weight", "attr_bias"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let known: Vec<_> = ModelKind::ALL.iter().map(|k| k.name()).collect();
                KgError::Config(format!("unknown model {s:?} (expected one of {})", known.join(", ")))
            })
    }
}

// Table positions shared by the forward pass and the tests.
pub(crate) const ENT: usize = 0;
pub(crate) const REL: usize = 1;
pub(crate) const CORE: usize = 2;
pub(crate) const GATE_E: usize = 2;
pub(crate) const GATE_L: usize = 3;
pub(crate) const GATE_B: usize = 4;
pub(crate) const TRANSFORM: usize = 5;
pub(crate) const KBLN_W: usize = 2;
pub(crate) const KBLN_C: usize = 3;
pub(crate) const KBLN_S: usize = 4;
pub(crate) const MT_W1: usize = 2;
pub(crate) const MT_B1: usize = 3;
pub(crate) const MT_W2: usize = 4;
pub(crate) const MT_B2: usize = 5;
pub(crate) const MT_ATTR: usize = 6;
/// First of the four subject attribute-net tables; the object net follows.
pub(crate) const MT_SUBJ: usize = 7;
pub(crate) const MT_OBJ: usize = 11;
pub(crate) const TEA_W: usize = 2;
pub(crate) const TEA_B: usize = 3;

pub const KBLN_MIN_WIDTH: f64 = 1e-3;
pub const MTKGNN_HIDDEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub num_entities: usize,
    pub num_relations: usize,
    pub num_attrs: usize,
    /// Embedding size; complex models store twice this many reals.
    pub dim: usize,
    /// TuckER relation embedding size.
    pub relation_dim: usize,
    /// MTKGNN hidden width.
    pub hidden: usize,
}

impl ModelDims {
    pub fn for_graph(g: &KnowledgeGraph, dim: usize) -> Self {
        ModelDims {
            num_entities: g.num_entities(),
            num_relations: g.num_relations(),
            num_attrs: g.num_attrs(),
            dim,
            relation_dim: dim,
            hidden: MTKGNN_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: &'static str,
    pub value: Array2<f64>,
    /// Fixed statistics (KBLN's RBF centers and widths) are stored but never
    /// updated.
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    kind: ModelKind,
    dims: ModelDims,
    params: Vec<Param>,
}

fn shapes(kind: ModelKind, d: &ModelDims) -> Vec<(usize, usize)> {
    let (ne, nr, na, h) = (d.num_entities, d.num_relations, d.num_attrs, d.hidden);
    let de = if kind.is_complex() { 2 * d.dim } else { d.dim };
    match kind {
        ModelKind::TransE | ModelKind::DistMult | ModelKind::ComplEx => vec![(ne, de), (nr, de)],
        ModelKind::TuckER => vec![(ne, de), (nr, d.relation_dim), (de, d.relation_dim * de)],
        ModelKind::LiteralEDistMult | ModelKind::LiteralEComplEx => vec![
            (ne, de),
            (nr, de),
            (de, de),
            (de, na),
            (1, de),
            (de, de + na),
        ],
        ModelKind::Kbln => vec![(ne, de), (nr, de), (nr, na), (nr, na), (nr, na)],
        ModelKind::Mtkgnn => vec![
            (ne, de),
            (nr, de),
            (h, 3 * de),
            (1, h),
            (1, h),
            (1, 1),
            (na, de),
            (h, 2 * de),
            (1, h),
            (1, h),
            (1, 1),
            (h, 2 * de),
            (1, h),
            (1, h),
            (1, 1),
        ],
        ModelKind::TransEA => vec![(ne, de), (nr, de), (na, de), (na, 1)],
    }
}

fn is_bias(name: &str) -> bool {
    name.ends_with("_bias")
}

impl ModelState {
    /// Embeddings ~ Normal(0, 0.05^2); fusion matrices Xavier-uniform;
    /// biases zero; TuckER's core Uniform(-1, 1). KBLN's RBF statistics are
    /// computed from the training split.
    pub fn init(
        kind: ModelKind,
        dims: ModelDims,
        g: &KnowledgeGraph,
        feats: &LiteralFeatureMatrix,
        seed: u64,
    ) -> Result<Self> {
        if dims.dim == 0 {
            return Err(KgError::Config("embedding dimension must be positive".into()));
        }
        if g.num_entities() != dims.num_entities || g.num_relations() != dims.num_relations {
            return Err(KgError::Config("model dimensions do not match the graph".into()));
        }
        if kind.uses_literals()
            && (feats.num_entities() != dims.num_entities || feats.num_attrs() != dims.num_attrs)
        {
            return Err(KgError::Config(format!(
                "feature matrix is {}x{} but the model expects {}x{}",
                feats.num_entities(),
                feats.num_attrs(),
                dims.num_entities,
                dims.num_attrs
            )));
        }
        let mut rng = rng::stream(seed, Stream::Init);
        let normal = Normal::new(0.0, 0.05).expect("valid normal");
        let names = kind.table_names();
        let mut params = Vec::with_capacity(names.len());
        for (i, (&name, (r, c))) in names.iter().zip(shapes(kind, &dims)).enumerate() {
            let value = if i == ENT || i == REL {
                Array2::from_shape_simple_fn((r, c), || normal.sample(&mut rng))
            } else if is_bias(name) || name.starts_with("rbf_") {
                Array2::zeros((r, c))
            } else if kind == ModelKind::TuckER {
                let u = Uniform::new(-1.0, 1.0).expect("valid range");
                Array2::from_shape_simple_fn((r, c), || u.sample(&mut rng))
            } else {
                let bound = (6.0 / (r + c).max(1) as f64).sqrt();
                let u = Uniform::new_inclusive(-bound, bound).expect("valid range");
                Array2::from_shape_simple_fn((r, c), || u.sample(&mut rng))
            };
            params.push(Param {
                name,
                value,
                trainable: !name.starts_with("rbf_"),
            });
        }
        let mut state = ModelState { kind, dims, params };
        if kind == ModelKind::Kbln {
            state.fit_rbf(g.train(), feats);
        }
        Ok(state)
    }

    pub(crate) fn from_parts(kind: ModelKind, dims: ModelDims, params: Vec<Param>) -> Result<Self> {
        let expect = shapes(kind, &dims);
        let names = kind.table_names();
        if params.len() != names.len() {
            return Err(KgError::Checkpoint(format!(
                "{kind} expects {} tables, found {}",
                names.len(),
                params.len()
            )));
        }
        for ((p, name), shape) in params.iter().zip(names).zip(expect) {
            if p.name != *name || p.value.dim() != shape {
                return Err(KgError::Checkpoint(format!(
                    "table {} has shape {:?}, expected {name} {:?}",
                    p.name,
                    p.value.dim(),
                    shape
                )));
            }
        }
        Ok(ModelState { kind, dims, params })
    }

    /// Mean and standard deviation (floored) of `x_s[a] - x_o[a]` over the
    /// training triples of each relation.
    fn fit_rbf(&mut self, train: &[Triple], feats: &LiteralFeatureMatrix) {
        let (nr, na) = (self.dims.num_relations, self.dims.num_attrs);
        let mut sum = Array2::<f64>::zeros((nr, na));
        let mut sq = Array2::<f64>::zeros((nr, na));
        let mut count = vec![0usize; nr];
        let x = feats.values();
        for t in train {
            count[t.predicate] += 1;
            for a in 0..na {
                let d = x[[t.subject, a]] - x[[t.object, a]];
                sum[[t.predicate, a]] += d;
                sq[[t.predicate, a]] += d * d;
            }
        }
        for p in 0..nr {
            for a in 0..na {
                let (c, s) = if count[p] == 0 {
                    (0.0, 1.0)
                } else {
                    let n = count[p] as f64;
                    let mean = sum[[p, a]] / n;
                    let var = (sq[[p, a]] / n - mean * mean).max(0.0);
                    (mean, var.sqrt().max(KBLN_MIN_WIDTH))
                };
                self.params[KBLN_C].value[[p, a]] = c;
                self.params[KBLN_S].value[[p, a]] = s;
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn table(&self, name: &str) -> Option<&Array2<f64>> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    pub fn table_mut(&mut self, name: &str) -> Option<&mut Array2<f64>> {
        self.params.iter_mut().find(|p| p.name == name).map(|p| &mut p.value)
    }

    /// Width of one entity row in reals.
    pub fn entity_width(&self) -> usize {
        self.params[ENT].value.ncols()
    }

    pub fn num_parameters(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    pub fn check_shapes(&self) -> Result<()> {
        Self::from_parts(self.kind, self.dims, self.params.clone()).map(|_| ())
    }
}
