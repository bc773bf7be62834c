//! Optimization: batching, 1-N targets and negative sampling, Adam, and
//! early stopping on validation MRR.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{KgError, Result};
use crate::eval;
use crate::features::LiteralFeatureMatrix;
use crate::filter::FilterIndex;
use crate::graph::{KnowledgeGraph, Triple};
use crate::models::{
    Batch, Gradients, LossRegime, MarginBatch, ModelDims, ModelKind, ModelState, OneToNBatch, PassOptions,
    Snapshot,
};
use crate::rng::{self, Rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub embedding_dim: usize,
    /// TuckER relation embedding size; the entity size when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relation_dim: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub input_dropout: f64,
    /// Dropout on the query vector of 1-N models.
    pub hidden_dropout: f64,
    pub label_smoothing: f64,
    pub margin: f64,
    /// Corruptions per positive for margin models.
    pub negatives: usize,
    pub alpha: f64,
    pub eval_every_epochs: usize,
    /// Consecutive validation checks without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embedding_dim: 200,
            relation_dim: None,
            epochs: 100,
            learning_rate: 0.001,
            batch_size: 128,
            input_dropout: 0.2,
            hidden_dropout: 0.0,
            label_smoothing: 0.1,
            margin: 1.0,
            negatives: 1,
            alpha: 0.1,
            eval_every_epochs: 3,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Published settings per model. `kga` selects the settings used on
    /// quantile-augmented datasets.
    pub fn preset(kind: ModelKind, kga: bool) -> Self {
        let base = TrainConfig::default();
        match kind {
            ModelKind::TransE | ModelKind::TransEA => TrainConfig {
                embedding_dim: 100,
                epochs: 500,
                input_dropout: 0.0,
                label_smoothing: 0.0,
                ..base
            },
            ModelKind::TuckER | ModelKind::DistMult if kga => TrainConfig {
                epochs: 500,
                learning_rate: 0.003,
                hidden_dropout: 0.3,
                label_smoothing: if kind == ModelKind::DistMult { 0.1 } else { 0.0 },
                ..base
            },
            ModelKind::TuckER => TrainConfig {
                epochs: 500,
                learning_rate: 0.003,
                hidden_dropout: 0.3,
                label_smoothing: 0.0,
                ..base
            },
            _ => base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(KgError::Config(m));
        if self.embedding_dim == 0 || self.relation_dim == Some(0) {
            return bad("embedding dimensions must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, p) in [("input_dropout", self.input_dropout), ("hidden_dropout", self.hidden_dropout)] {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1), got {p}"));
            }
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!("label_smoothing must be in [0, 1), got {}", self.label_smoothing));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin must be non-negative, got {}", self.margin));
        }
        if self.eval_every_epochs == 0 {
            return bad("eval_every_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| KgError::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dims(&self, g: &KnowledgeGraph) -> ModelDims {
        ModelDims {
            relation_dim: self.relation_dim.unwrap_or(self.embedding_dim),
            ..ModelDims::for_graph(g, self.embedding_dim)
        }
    }
}

/// SHA-256 over the model name and the canonical JSON of the config.
pub fn config_hash(kind: ModelKind, cfg: &TrainConfig) -> String {
    let json = serde_json::to_string(&(kind.name(), cfg)).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Label rows for `(subject, predicate)` queries: 1 for every known object,
/// then smoothed to `(1 - ls) * y + ls / |E|`.
pub fn one_to_n_targets(
    queries: &[(usize, usize)],
    known: &FilterIndex,
    num_entities: usize,
    label_smoothing: f64,
) -> OneToNBatch {
    let mut labels = Array2::from_elem((queries.len(), num_entities), label_smoothing / num_entities as f64);
    let on = 1.0 - label_smoothing + label_smoothing / num_entities as f64;
    let mut objects = Vec::with_capacity(queries.len());
    for (i, &(s, p)) in queries.iter().enumerate() {
        let objs = known.objects(s, p).to_vec();
        for &o in &objs {
            labels[[i, o]] = on;
        }
        objects.push(objs);
    }
    OneToNBatch {
        queries: queries.to_vec(),
        labels,
        objects,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSample {
    /// `n_neg` corruptions per positive, grouped by positive.
    pub triples: Vec<Triple>,
    /// Corruptions that were still known triples after one resample.
    pub flagged: usize,
}

/// Replaces the subject or the object (fair coin) with a different entity
/// drawn uniformly. A corruption that is a known triple is redrawn once and
/// then accepted and counted.
pub fn negative_sample(
    positives: &[Triple],
    known: &FilterIndex,
    num_entities: usize,
    n_neg: usize,
    rng: &mut Rng,
) -> Result<NegativeSample> {
    if n_neg > 0 && !positives.is_empty() && num_entities < 2 {
        return Err(KgError::Domain("negative sampling needs at least two entities".into()));
    }
    let draw = |t: &Triple, rng: &mut Rng| {
        let subject_side = rng.random::<bool>();
        let current = if subject_side { t.subject } else { t.object };
        let mut e = rng.random_range(0..num_entities - 1);
        if e >= current {
            e += 1;
        }
        if subject_side {
            Triple::new(e, t.predicate, t.object)
        } else {
            Triple::new(t.subject, t.predicate, e)
        }
    };
    let mut triples = Vec::with_capacity(positives.len() * n_neg);
    let mut flagged = 0;
    for t in positives {
        for _ in 0..n_neg {
            let mut c = draw(t, rng);
            if known.contains(&c) {
                c = draw(t, rng);
                flagged += known.contains(&c) as usize;
            }
            triples.push(c);
        }
    }
    Ok(NegativeSample { triples, flagged })
}

/// Adam with lazily updated rows: only rows marked in the gradient move.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(state: &ModelState, learning_rate: f64) -> Self {
        let zeros = || state.params().iter().map(|p| Array2::zeros(p.value.dim())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, state: &mut ModelState, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.eps);
        for (t, p) in state.params_mut().iter_mut().enumerate() {
            if !p.trainable {
                continue;
            }
            for (r, _) in grads.rows[t].iter().enumerate().filter(|(_, &touched)| touched) {
                let g = grads.tables[t].row(r);
                let mut m = self.m[t].row_mut(r);
                let mut v = self.v[t].row_mut(r);
                let mut w = p.value.row_mut(r);
                for k in 0..g.len() {
                    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                    w[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
                }
            }
        }
    }
}

/// Tracks validation checks and decides when to stop.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    /// Records a check; true when it is a new best (strictly greater MRR).
    pub fn observe(&mut self, epoch: usize, mrr: f64) -> bool {
        match self.best {
            Some((_, best)) if !(mrr > best) => {
                self.stale += 1;
                false
            }
            _ => {
                self.best = Some((epoch, mrr));
                self.stale = 0;
                true
            }
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub epoch: usize,
    pub mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub trace: Vec<ValidationCheck>,
    /// Epoch of the returned parameters (0 = initialization).
    pub best_epoch: usize,
    pub best_mrr: Option<f64>,
    pub epochs_run: usize,
    pub epoch_losses: Vec<f64>,
    pub flagged_negatives: usize,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    pub wall_time_secs: f64,
}

/// Filtered MRR on the validation split.
pub fn validation_mrr(
    state: &ModelState,
    g: &KnowledgeGraph,
    feats: &LiteralFeatureMatrix,
    filter: &FilterIndex,
    workers: usize,
) -> Result<f64> {
    let snap = Snapshot::new(state, feats);
    let ranks = eval::rank_triples(&snap, g.valid(), filter, workers);
    Ok(eval::metrics(&ranks)?.mrr)
}

/// Trains with validation MRR on the validation split as the stopping
/// signal. Without validation triples the final epoch is returned.
pub fn train(
    g: &KnowledgeGraph,
    feats: &LiteralFeatureMatrix,
    kind: ModelKind,
    cfg: &TrainConfig,
    workers: usize,
) -> Result<(ModelState, TrainReport)> {
    let filter = FilterIndex::new(g);
    let has_valid = !g.valid().is_empty();
    train_with(g, feats, kind, cfg, |state, _| {
        if has_valid {
            validation_mrr(state, g, feats, &filter, workers).map(Some)
        } else {
            Ok(None)
        }
    })
}

/// Training loop with a caller-supplied validation signal; `validate`
/// returning `None` disables early stopping.
pub fn train_with<V>(
    g: &KnowledgeGraph,
    feats: &LiteralFeatureMatrix,
    kind: ModelKind,
    cfg: &TrainConfig,
    mut validate: V,
) -> Result<(ModelState, TrainReport)>
where
    V: FnMut(&ModelState, usize) -> Result<Option<f64>>,
{
    cfg.validate()?;
    if g.train().is_empty() {
        return Err(KgError::Domain("the training split is empty".into()));
    }
    let started = Instant::now();
    let mut state = ModelState::init(kind, cfg.dims(g), g, feats, cfg.seed)?;
    let mut adam = Adam::new(&state, cfg.learning_rate);
    let known = FilterIndex::from_triples(g.train().iter().copied());
    let ne = g.num_entities();
    let mut shuffle = rng::stream(cfg.seed, Stream::Shuffle);
    let mut dropout = rng::stream(cfg.seed, Stream::Dropout);
    let mut negatives = rng::stream(cfg.seed, Stream::Negatives);

    let mut queries: Vec<(usize, usize)> = g.train().iter().map(|t| (t.subject, t.predicate)).collect();
    queries.sort_unstable();
    queries.dedup();
    let mut positives = g.train().to_vec();

    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_state = state.clone();
    let mut report = TrainReport {
        trace: Vec::new(),
        best_epoch: 0,
        best_mrr: None,
        epochs_run: 0,
        epoch_losses: Vec::new(),
        flagged_negatives: 0,
        checkpoint_path: None,
        wall_time_secs: 0.0,
    };
    let mut stopping_enabled = true;
    let width = state.entity_width();

    for epoch in 1..=cfg.epochs {
        let (mut total, mut count) = (0.0, 0usize);
        let batches: Vec<Batch> = match kind.regime() {
            LossRegime::OneToN => {
                queries.shuffle(&mut shuffle);
                queries
                    .chunks(cfg.batch_size)
                    .map(|q| Batch::OneToN(one_to_n_targets(q, &known, ne, cfg.label_smoothing)))
                    .collect()
            }
            LossRegime::Margin => {
                positives.shuffle(&mut shuffle);
                let mut out = Vec::new();
                for chunk in positives.chunks(cfg.batch_size) {
                    let neg = negative_sample(chunk, &known, ne, cfg.negatives.max(1), &mut negatives)?;
                    report.flagged_negatives += neg.flagged;
                    out.push(Batch::Margin(MarginBatch {
                        positives: chunk.to_vec(),
                        negatives: neg.triples,
                    }));
                }
                out
            }
        };
        for (bi, batch) in batches.iter().enumerate() {
            let one_to_n = kind.regime() == LossRegime::OneToN;
            let input = (one_to_n && cfg.input_dropout > 0.0)
                .then(|| dropout_mask(batch.len(), width, cfg.input_dropout, &mut dropout));
            let hidden = (one_to_n && kind != ModelKind::Mtkgnn && cfg.hidden_dropout > 0.0)
                .then(|| dropout_mask(batch.len(), width, cfg.hidden_dropout, &mut dropout));
            let opts = PassOptions {
                margin: cfg.margin,
                alpha: cfg.alpha,
                input_mask: input.as_ref(),
                hidden_mask: hidden.as_ref(),
            };
            let (loss, grads) = state.loss_and_grad(batch, feats, &opts).map_err(|e| match e {
                KgError::NonFinite { loss, detail, .. } => KgError::NonFinite {
                    loss,
                    epoch,
                    batch: bi,
                    detail,
                },
                other => other,
            })?;
            adam.step(&mut state, &grads);
            if !state.is_finite() {
                return Err(KgError::NonFinite {
                    loss,
                    epoch,
                    batch: bi,
                    detail: "parameters became non-finite after the update".into(),
                });
            }
            total += loss * batch.len() as f64;
            count += batch.len();
        }
        report.epoch_losses.push(total / count as f64);
        report.epochs_run = epoch;

        if epoch % cfg.eval_every_epochs == 0 && stopping_enabled {
            match validate(&state, epoch)? {
                Some(mrr) => {
                    report.trace.push(ValidationCheck { epoch, mrr });
                    if stopper.observe(epoch, mrr) {
                        best_state = state.clone();
                    }
                    if stopper.should_stop() {
                        break;
                    }
                }
                None => stopping_enabled = false,
            }
        }
    }

    match stopper.best() {
        Some((epoch, mrr)) if stopping_enabled => {
            report.best_epoch = epoch;
            report.best_mrr = Some(mrr);
            state = best_state;
        }
        _ => report.best_epoch = report.epochs_run,
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((state, report))
}

/// Inverted dropout: 0 with probability `p`, else `1 / (1 - p)`.
fn dropout_mask(rows: usize, cols: usize, p: f64, rng: &mut Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - p);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < p { 0.0 } else { keep })
}
