//! Filtered ranking metrics and the synthetic-task accuracy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datagen::SyntheticSpec;
use crate::error::{KgError, Result};
use crate::filter::FilterIndex;
use crate::graph::{KnowledgeGraph, Split, Triple};
use crate::models::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Subject,
    Object,
}

/// `1 + greater + ceil(ties / 2)`: the target sits in the middle of the
/// candidates it ties with, rounding half up.
pub fn realistic_rank(greater: usize, ties: usize) -> usize {
    1 + greater + ties.div_ceil(2)
}

/// Position of `scores[target]` among candidates, skipping every index in
/// `excluded` other than the target. NaN candidates count as greater; a NaN
/// target ranks behind every candidate.
pub fn rank_in_scores(scores: &[f64], target: usize, excluded: &[usize]) -> usize {
    let t = scores[target];
    let beats = |v: f64| t.is_nan() || v.is_nan() || v > t;
    let (mut greater, mut ties) = (0usize, 0usize);
    for (c, &v) in scores.iter().enumerate() {
        if c == target {
            continue;
        }
        if beats(v) {
            greater += 1;
        } else if v == t {
            ties += 1;
        }
    }
    let mut seen = Vec::with_capacity(excluded.len());
    for &c in excluded {
        if c == target || seen.contains(&c) {
            continue;
        }
        seen.push(c);
        let v = scores[c];
        if beats(v) {
            greater -= 1;
        } else if v == t {
            ties -= 1;
        }
    }
    realistic_rank(greater, ties)
}

/// Filtered rank of `triple` with the given side corrupted. `scores` is a
/// scratch buffer of length `|E|`.
pub fn filtered_rank<S: Scorer + ?Sized>(
    scorer: &S,
    triple: &Triple,
    side: Side,
    filter: &FilterIndex,
    scores: &mut [f64],
) -> usize {
    match side {
        Side::Object => {
            scorer.score_objects(triple.subject, triple.predicate, scores);
            rank_in_scores(scores, triple.object, filter.objects(triple.subject, triple.predicate))
        }
        Side::Subject => {
            scorer.score_subjects(triple.predicate, triple.object, scores);
            rank_in_scores(scores, triple.subject, filter.subjects(triple.predicate, triple.object))
        }
    }
}

/// `[subject-side, object-side]` ranks per evaluated triple, in input order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankList {
    pub ranks: Vec<[usize; 2]>,
}

impl RankList {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Both sides pooled, subject rank first.
    pub fn pooled(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranks.iter().flat_map(|r| r.iter().copied())
    }
}

/// Ranks every triple on both sides. Work is split over `workers` threads;
/// the result does not depend on the worker count.
pub fn rank_triples<S: Scorer + ?Sized>(
    scorer: &S,
    triples: &[Triple],
    filter: &FilterIndex,
    workers: usize,
) -> RankList {
    let ne = scorer.num_entities();
    let rank_chunk = |chunk: &[Triple]| -> Vec<[usize; 2]> {
        let mut buf = vec![0.0; ne];
        chunk
            .iter()
            .map(|t| {
                [
                    filtered_rank(scorer, t, Side::Subject, filter, &mut buf),
                    filtered_rank(scorer, t, Side::Object, filter, &mut buf),
                ]
            })
            .collect()
    };
    let workers = workers.max(1);
    if workers == 1 || triples.len() < 2 * workers {
        return RankList {
            ranks: rank_chunk(triples),
        };
    }
    let size = triples.len().div_ceil(workers);
    let ranks = std::thread::scope(|scope| {
        let handles: Vec<_> = triples
            .chunks(size)
            .map(|chunk| scope.spawn(move || rank_chunk(chunk)))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("ranking worker panicked"))
            .collect()
    });
    RankList { ranks }
}

/// Ranking metrics, plus the synthetic accuracy when available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mr: f64,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    pub n_test: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
}

pub fn metrics(ranks: &RankList) -> Result<EvalReport> {
    let pooled: Vec<usize> = ranks.pooled().collect();
    metrics_from_ranks(&pooled, ranks.len())
}

/// Metrics of a flat list of ranks; `n_test` is recorded as given.
pub fn metrics_from_ranks(ranks: &[usize], n_test: usize) -> Result<EvalReport> {
    if ranks.is_empty() {
        return Err(KgError::Domain("cannot compute metrics of an empty rank list".into()));
    }
    let n = ranks.len() as f64;
    let (mut sum, mut recip, mut h1, mut h3, mut h10) = (0.0, 0.0, 0usize, 0usize, 0usize);
    for &r in ranks {
        sum += r as f64;
        recip += 1.0 / r as f64;
        h1 += (r <= 1) as usize;
        h3 += (r <= 3) as usize;
        h10 += (r <= 10) as usize;
    }
    Ok(EvalReport {
        mr: sum / n,
        mrr: recip / n,
        hits_at_1: h1 as f64 / n,
        hits_at_3: h3 as f64 / n,
        hits_at_10: h10 as f64 / n,
        n_test,
        acc: None,
    })
}

/// Filtered ranking of `triples` against every known triple of `g`.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    g: &KnowledgeGraph,
    triples: &[Triple],
    workers: usize,
) -> Result<EvalReport> {
    let filter = FilterIndex::new(g);
    metrics(&rank_triples(scorer, triples, &filter, workers))
}

/// Which entities the synthetic accuracy is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccScope {
    /// Entities whose class triple is in the test split.
    #[default]
    TestSplit,
    /// Every entity with a class triple in any split.
    AllEntities,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAcc {
    pub acc: f64,
    pub true_high: usize,
    pub true_low: usize,
    pub n_high: usize,
    pub n_low: usize,
}

/// Accuracy from `(is_high, score_high, score_low)` per entity. Ties go to
/// the high class.
pub fn acc_from_scores(items: &[(bool, f64, f64)]) -> Result<SyntheticAcc> {
    if items.is_empty() {
        return Err(KgError::Domain("no synthetic entities to score".into()));
    }
    let (mut th, mut tl, mut nh, mut nl) = (0, 0, 0, 0);
    for &(high, sh, sl) in items {
        if high {
            nh += 1;
            th += (sh >= sl) as usize;
        } else {
            nl += 1;
            tl += (sl > sh) as usize;
        }
    }
    Ok(SyntheticAcc {
        acc: (th + tl) as f64 / (nh + nl) as f64,
        true_high: th,
        true_low: tl,
        n_high: nh,
        n_low: nl,
    })
}

/// Whether `g` carries the synthetic class vocabulary of `spec`.
pub fn has_synthetic(g: &KnowledgeGraph, spec: &SyntheticSpec) -> bool {
    g.entity_relations().get(&spec.rel_name).is_some()
        && g.entities().get(&spec.class_high).is_some()
        && g.entities().get(&spec.class_low).is_some()
}

/// Compares `score(e, class_rel, high)` with `score(e, class_rel, low)` for
/// every synthetic entity in scope; the true class is read from the class
/// triples of `g`.
pub fn synthetic_acc<S: Scorer + ?Sized>(
    scorer: &S,
    g: &KnowledgeGraph,
    spec: &SyntheticSpec,
    scope: AccScope,
) -> Result<SyntheticAcc> {
    let missing = |what: &str, name: &str| KgError::Domain(format!("synthetic {what} {name:?} not in the graph"));
    let rel = g.entity_relations().get(&spec.rel_name).ok_or_else(|| missing("relation", &spec.rel_name))?;
    let high = g.entities().get(&spec.class_high).ok_or_else(|| missing("class", &spec.class_high))?;
    let low = g.entities().get(&spec.class_low).ok_or_else(|| missing("class", &spec.class_low))?;
    let splits: &[Split] = match scope {
        AccScope::TestSplit => &[Split::Test],
        AccScope::AllEntities => &Split::ALL,
    };
    let mut class: BTreeMap<usize, bool> = BTreeMap::new();
    for &split in splits {
        for t in g.split(split).iter().filter(|t| t.predicate == rel) {
            if t.object == high || t.object == low {
                class.insert(t.subject, t.object == high);
            }
        }
    }
    let items: Vec<(bool, f64, f64)> = class
        .into_iter()
        .map(|(e, is_high)| (is_high, scorer.score(e, rel, high), scorer.score(e, rel, low)))
        .collect();
    acc_from_scores(&items)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd { mean: f64::NAN, std: f64::NAN };
        }
        if values.windows(2).all(|w| w[0] == w[1]) {
            // Exact for identical runs, where summation would round.
            return MeanStd { mean: values[0], std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub single_run: bool,
    pub mr: MeanStd,
    pub mrr: MeanStd,
    pub hits_at_1: MeanStd,
    pub hits_at_3: MeanStd,
    pub hits_at_10: MeanStd,
    /// Present when every run reports an accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acc: Option<MeanStd>,
}

pub fn aggregate_runs(reports: &[EvalReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(KgError::Domain("no reports to aggregate".into()));
    }
    let col = |f: fn(&EvalReport) -> f64| MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>());
    let accs: Option<Vec<f64>> = reports.iter().map(|r| r.acc).collect();
    Ok(Aggregate {
        runs: reports.len(),
        single_run: reports.len() == 1,
        mr: col(|r| r.mr),
        mrr: col(|r| r.mrr),
        hits_at_1: col(|r| r.hits_at_1),
        hits_at_3: col(|r| r.hits_at_3),
        hits_at_10: col(|r| r.hits_at_10),
        acc: accs.map(|a| MeanStd::of(&a)),
    })
}

pub const CSV_HEADER: &str = "model,dataset,variant,metric,mean,std";

/// One `model,dataset,variant,metric,mean,std` line per metric.
pub fn csv_rows(agg: &Aggregate, model: &str, dataset: &str, variant: &str) -> Vec<String> {
    let mut cols = vec![
        ("mr", agg.mr),
        ("mrr", agg.mrr),
        ("hits_at_1", agg.hits_at_1),
        ("hits_at_3", agg.hits_at_3),
        ("hits_at_10", agg.hits_at_10),
    ];
    if let Some(acc) = agg.acc {
        cols.push(("acc", acc));
    }
    let field = |s: &str| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.to_owned()
        }
    };
    cols.into_iter()
        .map(|(m, v)| format!("{},{},{},{m},{},{}", field(model), field(dataset), field(variant), v.mean, v.std))
        .collect()
}
