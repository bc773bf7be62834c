//! Dataset methodologies: semi-synthetic enrichment with a threshold task,
//! literal ablations (random, values-only, existence) and coverage-preserving
//! relational ablation.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::graph::{AttrTriple, KnowledgeGraph, RawGraph, Split, Triple};
use crate::rng::{self, Stream};

/// Which entities receive a synthetic literal and class triple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "relation", rename_all = "kebab-case")]
pub enum EntityFilter {
    #[default]
    All,
    /// Entities occurring as subject of this relation in any split.
    SubjectOf(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub entity_filter: EntityFilter,
    pub threshold: f64,
    pub attr_name: String,
    pub rel_name: String,
    pub class_high: String,
    pub class_low: String,
    pub split_fractions: (f64, f64, f64),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            entity_filter: EntityFilter::All,
            threshold: 0.5,
            attr_name: "syn:value".into(),
            rel_name: "syn:class".into(),
            class_high: "syn:high".into(),
            class_low: "syn:low".into(),
            split_fractions: (0.70, 0.15, 0.15),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.split_fractions;
        if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(KgError::Config(format!(
                "split fractions {:?} must be non-negative and sum to 1",
                self.split_fractions
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(KgError::Config(format!(
                "threshold {} must lie in (0, 1)",
                self.threshold
            )));
        }
        for name in [&self.attr_name, &self.rel_name, &self.class_high, &self.class_low] {
            if name.is_empty() || name.contains(['\t', '\n', '\r']) {
                return Err(KgError::Config(format!("invalid synthetic name {name:?}")));
            }
        }
        if self.class_high == self.class_low {
            return Err(KgError::Config("class_high and class_low must differ".into()));
        }
        Ok(())
    }
}

/// The synthetic target: strictly above the threshold is the high class.
pub fn is_high(value: f64, threshold: f64) -> bool {
    value > threshold
}

/// Replaces all literals with one Uniform[0,1) value per selected entity and
/// adds `(e, rel, high)` when the value exceeds the threshold, `(e, rel, low)`
/// otherwise. The class triples are shuffled and split over train/valid/test.
pub fn synth_enrich(g: &KnowledgeGraph, spec: &SyntheticSpec) -> Result<KnowledgeGraph> {
    spec.validate()?;
    if g.entities().get(&spec.class_high).is_some() || g.entities().get(&spec.class_low).is_some()
    {
        return Err(KgError::Config("synthetic class names collide with existing entities".into()));
    }
    if g.entity_relations().get(&spec.rel_name).is_some() {
        return Err(KgError::Config(format!(
            "synthetic relation {:?} already exists",
            spec.rel_name
        )));
    }

    let selected: Vec<usize> = match &spec.entity_filter {
        EntityFilter::All => (0..g.num_entities()).collect(),
        EntityFilter::SubjectOf(rel) => {
            let p = g.entity_relations().get(rel).ok_or_else(|| {
                KgError::Config(format!("entity filter relation {rel:?} not in the graph"))
            })?;
            let subjects: BTreeSet<usize> = g
                .relational()
                .filter(|t| t.predicate == p)
                .map(|t| t.subject)
                .collect();
            subjects.into_iter().collect()
        }
    };
    if selected.is_empty() {
        return Err(KgError::Config("entity filter selects no entities".into()));
    }

    let names = g.entities();
    let mut values = rng::stream(spec.seed, Stream::SyntheticValues);
    let mut raw = g.to_raw();
    raw.attributive.clear();
    let mut class_triples = Vec::with_capacity(selected.len());
    for &e in &selected {
        let v: f64 = values.random();
        let name = names.name(e).to_owned();
        let class = if is_high(v, spec.threshold) {
            &spec.class_high
        } else {
            &spec.class_low
        };
        class_triples.push((name.clone(), spec.rel_name.clone(), class.clone()));
        raw.attributive.push((name, spec.attr_name.clone(), v));
    }

    class_triples.shuffle(&mut rng::stream(spec.seed, Stream::SyntheticSplit));
    let n = class_triples.len();
    let n_train = (((n as f64) * spec.split_fractions.0).round() as usize).min(n);
    let n_valid = (((n as f64) * spec.split_fractions.1).round() as usize).min(n - n_train);
    let mut rest = class_triples.split_off(n_train);
    let test = rest.split_off(n_valid);
    raw.train.extend(class_triples);
    raw.valid.extend(rest);
    raw.test.extend(test);
    Ok(raw.build())
}

/// Literal ablation variants and the relational reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AblationKind {
    /// Complete |E| x |R_A| literal table of random values.
    RandomLiteral,
    /// Keep which (entity, attribute) pairs carry values; randomize values.
    RandomLiteralValuesOnly,
    /// One `(e, a, 1.0)` per pair that had any value.
    Existence,
    /// Drop a fraction `alpha` of training relational triples.
    RelationalReduce { alpha: f64, include_eval_splits: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    #[serde(flatten)]
    pub kind: AblationKind,
    pub seed: u64,
}

pub fn apply_ablation(g: &KnowledgeGraph, spec: &AblationSpec) -> Result<KnowledgeGraph> {
    match spec.kind {
        AblationKind::RandomLiteral => ablate_literals_random(g, spec.seed),
        AblationKind::RandomLiteralValuesOnly => Ok(ablate_literals_values_only(g, spec.seed)),
        AblationKind::Existence => Ok(ablate_literals_existence(g)),
        AblationKind::RelationalReduce {
            alpha,
            include_eval_splits: false,
        } => ablate_relational(g, alpha, spec.seed),
        AblationKind::RelationalReduce {
            alpha,
            include_eval_splits: true,
        } => ablate_relational_all_splits(g, alpha, spec.seed),
    }
}

pub fn ablate_literals_random(g: &KnowledgeGraph, seed: u64) -> Result<KnowledgeGraph> {
    if g.num_attrs() == 0 {
        return Err(KgError::Domain(
            "graph has no attributive relations to ablate".into(),
        ));
    }
    let mut rng = rng::stream(seed, Stream::RandomLiterals);
    let mut attributive = Vec::with_capacity(g.num_entities() * g.num_attrs());
    for subject in 0..g.num_entities() {
        for attr in 0..g.num_attrs() {
            attributive.push(AttrTriple {
                subject,
                attr,
                value: rng.random(),
            });
        }
    }
    Ok(g.with_triples(g.train().to_vec(), attributive))
}

pub fn ablate_literals_values_only(g: &KnowledgeGraph, seed: u64) -> KnowledgeGraph {
    let mut rng = rng::stream(seed, Stream::ValuesOnly);
    let attributive = g
        .attributive()
        .iter()
        .map(|a| AttrTriple {
            value: rng.random(),
            ..*a
        })
        .collect();
    g.with_triples(g.train().to_vec(), attributive)
}

pub fn ablate_literals_existence(g: &KnowledgeGraph) -> KnowledgeGraph {
    let pairs: BTreeSet<(usize, usize)> =
        g.attributive().iter().map(|a| (a.subject, a.attr)).collect();
    let attributive = pairs
        .into_iter()
        .map(|(subject, attr)| AttrTriple {
            subject,
            attr,
            value: 1.0,
        })
        .collect();
    g.with_triples(g.train().to_vec(), attributive)
}

/// `ceil((1 - alpha) * n)`, immune to representation error in `alpha`.
pub fn reduced_size(n: usize, alpha: f64) -> usize {
    let x = (1.0 - alpha) * n as f64;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Picks, with a seeded greedy pass, a set of triples that touches every
/// entity and every relation occurring in `triples`. Relations go first
/// since each covering triple also covers two entities; entity covers
/// prefer triples whose other endpoint is still uncovered.
fn protected_cover(triples: &[Triple], seed: u64) -> Vec<bool> {
    let max_e = triples.iter().map(|t| t.subject.max(t.object) + 1).max().unwrap_or(0);
    let max_r = triples.iter().map(|t| t.predicate + 1).max().unwrap_or(0);
    let mut by_entity = vec![Vec::new(); max_e];
    let mut by_relation = vec![Vec::new(); max_r];
    for (i, t) in triples.iter().enumerate() {
        by_entity[t.subject].push(i);
        if t.object != t.subject {
            by_entity[t.object].push(i);
        }
        by_relation[t.predicate].push(i);
    }

    let mut rng = rng::stream(seed, Stream::RelationalCover);
    let mut protected = vec![false; triples.len()];
    let mut ent_cov = vec![false; max_e];
    let mut rel_cov = vec![false; max_r];
    let mut protect = |i: usize, ent_cov: &mut [bool], rel_cov: &mut [bool]| {
        protected[i] = true;
        let t = triples[i];
        ent_cov[t.subject] = true;
        ent_cov[t.object] = true;
        rel_cov[t.predicate] = true;
    };

    for r in 0..max_r {
        if rel_cov[r] || by_relation[r].is_empty() {
            continue;
        }
        let fresh: Vec<usize> = by_relation[r]
            .iter()
            .copied()
            .filter(|&i| !ent_cov[triples[i].subject] && !ent_cov[triples[i].object])
            .collect();
        let pool = if fresh.is_empty() { &by_relation[r] } else { &fresh };
        let i = pool[rng.random_range(0..pool.len())];
        protect(i, &mut ent_cov, &mut rel_cov);
    }
    for e in 0..max_e {
        if ent_cov[e] || by_entity[e].is_empty() {
            continue;
        }
        let fresh: Vec<usize> = by_entity[e]
            .iter()
            .copied()
            .filter(|&i| {
                let t = triples[i];
                let other = if t.subject == e { t.object } else { t.subject };
                !ent_cov[other]
            })
            .collect();
        let pool = if fresh.is_empty() { &by_entity[e] } else { &fresh };
        let i = pool[rng.random_range(0..pool.len())];
        protect(i, &mut ent_cov, &mut rel_cov);
    }
    protected
}

/// Keeps `ceil((1 - alpha) * n)` of `triples`: the protected cover plus a
/// uniform sample of the rest. Returns a keep-mask in input order.
fn reduce(triples: &[Triple], alpha: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(KgError::Config(format!("alpha {alpha} must lie in [0, 1)")));
    }
    let target = reduced_size(triples.len(), alpha);
    let mut keep = protected_cover(triples, seed);
    let min_cover = keep.iter().filter(|k| **k).count();
    if target < min_cover {
        let max_alpha = 1.0 - min_cover as f64 / triples.len() as f64;
        return Err(KgError::Infeasible {
            alpha,
            target,
            min_cover,
            max_alpha,
        });
    }
    let mut free: Vec<usize> = (0..triples.len()).filter(|&i| !keep[i]).collect();
    free.shuffle(&mut rng::stream(seed, Stream::RelationalDrop));
    for &i in &free[..target - min_cover] {
        keep[i] = true;
    }
    Ok(keep)
}

/// Reduces the training split only; valid and test stay untouched.
pub fn ablate_relational(g: &KnowledgeGraph, alpha: f64, seed: u64) -> Result<KnowledgeGraph> {
    let keep = reduce(g.train(), alpha, seed)?;
    let train = g
        .train()
        .iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(t, _)| *t)
        .collect();
    Ok(g.with_triples(train, g.attributive().to_vec()))
}

/// Reduces the union of all splits; surviving triples return to their
/// original split.
pub fn ablate_relational_all_splits(
    g: &KnowledgeGraph,
    alpha: f64,
    seed: u64,
) -> Result<KnowledgeGraph> {
    let all: Vec<Triple> = g.relational().copied().collect();
    let keep = reduce(&all, alpha, seed)?;
    let mut raw = g.to_raw();
    let mut cursor = 0;
    for split in Split::ALL {
        let rows = raw.split_mut(split);
        let n = rows.len();
        let mut i = 0;
        rows.retain(|_| {
            let k = keep[cursor + i];
            i += 1;
            k
        });
        cursor += n;
    }
    raw.attributive = g.to_raw().attributive;
    Ok(RawGraph::build(raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_feature_matrix;
    use std::collections::HashSet;

    fn chain_graph() -> KnowledgeGraph {
        // a-b-c-d-e-f chain plus extras on two relations
        let mut train = Vec::new();
        let ents = ["a", "b", "c", "d", "e", "f"];
        for w in ents.windows(2) {
            train.push((w[0].to_string(), "p".to_string(), w[1].to_string()));
        }
        for (s, o) in [("a", "c"), ("a", "d"), ("b", "e"), ("c", "f"), ("f", "a")] {
            train.push((s.into(), "q".into(), o.into()));
        }
        RawGraph {
            train,
            valid: vec![("a".into(), "q".into(), "e".into())],
            test: vec![("b".into(), "p".into(), "d".into())],
            attributive: vec![
                ("a".into(), "h".into(), 3.2),
                ("a".into(), "h".into(), 4.1),
                ("b".into(), "w".into(), -1.0),
                ("c".into(), "h".into(), 0.0),
                ("c".into(), "w".into(), 9.0),
            ],
        }
        .build()
    }

    #[test]
    fn threshold_rule() {
        assert!(is_high(0.7, 0.5));
        assert!(!is_high(0.5, 0.5));
        assert!(!is_high(0.0, 0.5));
    }

    #[test]
    fn synthetic_classes_follow_values() {
        // Threshold decides with `>`: exactly-threshold goes low.
        let g = chain_graph();
        let mut spec = SyntheticSpec::default();
        for seed in 0..5 {
            spec.seed = seed;
            let s = synth_enrich(&g, &spec).unwrap();
            let rel = s.entity_relations().get(&spec.rel_name).unwrap();
            let high = s.entities().get(&spec.class_high).unwrap();
            for a in s.attributive() {
                let class = s.relational().find(|t| t.subject == a.subject && t.predicate == rel);
                let expect_high = a.value > 0.5;
                assert_eq!(class.unwrap().object == high, expect_high);
            }
        }
    }

    #[test]
    fn synthetic_counts_and_split_sizes() {
        let mut train = Vec::new();
        for i in 0..1000 {
            train.push((format!("e{i:04}"), "p".to_string(), format!("e{:04}", (i + 1) % 1000)));
        }
        let g = RawGraph {
            train,
            ..Default::default()
        }
        .build();
        let spec = SyntheticSpec::default();
        let s = synth_enrich(&g, &spec).unwrap();
        let rel = s.entity_relations().get(&spec.rel_name).unwrap();
        let count = |rows: &[Triple]| rows.iter().filter(|t| t.predicate == rel).count();
        assert_eq!(s.attributive().len(), 1000);
        assert_eq!(
            (count(s.train()), count(s.valid()), count(s.test())),
            (700, 150, 150)
        );
        assert_eq!(s.num_attrs(), 1);
        assert_eq!(s.num_entities(), 1002);
    }

    #[test]
    fn synthetic_partition_and_purity() {
        let g = chain_graph();
        let spec = SyntheticSpec {
            seed: 3,
            ..Default::default()
        };
        let s1 = synth_enrich(&g, &spec).unwrap();
        let s2 = synth_enrich(&g, &spec).unwrap();
        assert_eq!(s1, s2);
        let rel = s1.entity_relations().get(&spec.rel_name).unwrap();
        let mut classed: Vec<usize> = s1
            .relational()
            .filter(|t| t.predicate == rel)
            .map(|t| t.subject)
            .collect();
        classed.sort();
        let total = classed.len();
        classed.dedup();
        assert_eq!(total, classed.len(), "one class triple per entity");
        assert_eq!(total, g.num_entities());
        // Original eval triples survive as a prefix of each split.
        let orig = g.to_raw();
        let new = s1.to_raw();
        assert_eq!(&new.valid[..orig.valid.len()], orig.valid.as_slice());
        assert_eq!(&new.test[..orig.test.len()], orig.test.as_slice());
    }

    #[test]
    fn synthetic_filter_and_errors() {
        let g = chain_graph();
        let spec = SyntheticSpec {
            entity_filter: EntityFilter::SubjectOf("q".into()),
            ..Default::default()
        };
        let s = synth_enrich(&g, &spec).unwrap();
        // subjects of q: a, b, c, f
        assert_eq!(s.attributive().len(), 4);

        let bad = SyntheticSpec {
            entity_filter: EntityFilter::SubjectOf("nope".into()),
            ..Default::default()
        };
        assert!(matches!(synth_enrich(&g, &bad), Err(KgError::Config(_))));
        let bad = SyntheticSpec {
            split_fractions: (0.5, 0.2, 0.2),
            ..Default::default()
        };
        assert!(synth_enrich(&g, &bad).is_err());
        let bad = SyntheticSpec {
            threshold: 1.0,
            ..Default::default()
        };
        assert!(synth_enrich(&g, &bad).is_err());
    }

    #[test]
    fn random_literal_table_is_complete() {
        let g = chain_graph();
        let r = ablate_literals_random(&g, 9).unwrap();
        assert_eq!(r.attributive().len(), g.num_entities() * g.num_attrs());
        assert!(r.attributive().iter().all(|a| (0.0..1.0).contains(&a.value)));
        assert_eq!(r, ablate_literals_random(&g, 9).unwrap());
        assert!(build_feature_matrix(&r, 0).present().iter().all(|p| *p));
        assert_eq!(r.train(), g.train());

        let bare = RawGraph {
            train: vec![("a".into(), "p".into(), "b".into())],
            ..Default::default()
        }
        .build();
        assert!(ablate_literals_random(&bare, 0).is_err());
    }

    #[test]
    fn values_only_keeps_incidence() {
        let g = chain_graph();
        let r = ablate_literals_values_only(&g, 4);
        let pairs = |g: &KnowledgeGraph| -> Vec<(usize, usize)> {
            g.attributive().iter().map(|a| (a.subject, a.attr)).collect()
        };
        assert_eq!(pairs(&r), pairs(&g));
        assert_ne!(r.attributive(), g.attributive());
        assert_eq!(r, ablate_literals_values_only(&g, 4));
        let d = g.entities().get("d").unwrap();
        assert!(r.attributive().iter().all(|a| a.subject != d));
    }

    #[test]
    fn existence_flags() {
        let g = chain_graph();
        let r = ablate_literals_existence(&g);
        assert_eq!(r.attributive().len(), 4);
        assert!(r.attributive().iter().all(|a| a.value == 1.0));
        let a = g.entities().get("a").unwrap();
        assert_eq!(r.attributive().iter().filter(|t| t.subject == a).count(), 1);
    }

    #[test]
    fn relational_identity_at_zero() {
        let g = chain_graph();
        let r = ablate_relational(&g, 0.0, 1).unwrap();
        assert_eq!(r, g);
    }

    #[test]
    fn relational_coverage_and_size() {
        let g = chain_graph();
        let n = g.train().len();
        for k in 0..50 {
            let alpha = k as f64 / 100.0;
            match ablate_relational(&g, alpha, k) {
                Ok(r) => {
                    assert_eq!(r.train().len(), reduced_size(n, alpha));
                    let orig: HashSet<_> = g.train().iter().collect();
                    assert!(r.train().iter().all(|t| orig.contains(t)));
                    let ents: HashSet<usize> =
                        r.train().iter().flat_map(|t| [t.subject, t.object]).collect();
                    assert_eq!(ents.len(), 6);
                    let rels: HashSet<usize> = r.train().iter().map(|t| t.predicate).collect();
                    assert_eq!(rels.len(), 2);
                    assert_eq!(r.valid(), g.valid());
                    assert_eq!(r.test(), g.test());
                }
                Err(KgError::Infeasible { min_cover, .. }) => {
                    assert!(reduced_size(n, alpha) < min_cover)
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn relational_infeasible_names_limit() {
        let g = chain_graph();
        let err = ablate_relational(&g, 0.9, 0).unwrap_err();
        match &err {
            KgError::Infeasible { max_alpha, min_cover, .. } => {
                assert!(*min_cover >= 3);
                assert!(err.to_string().contains(&format!("{max_alpha:.6}")));
            }
            other => panic!("{other}"),
        }
        assert!(matches!(ablate_relational(&g, 1.0, 0), Err(KgError::Config(_))));
    }

    #[test]
    fn reduction_over_all_splits() {
        let g = chain_graph();
        let total = g.relational().count();
        let r = ablate_relational_all_splits(&g, 0.2, 5).unwrap();
        assert_eq!(r.relational().count(), reduced_size(total, 0.2));
    }

    #[test]
    fn reduced_size_is_exact_on_decimal_alphas() {
        assert_eq!(reduced_size(10, 0.3), 7);
        assert_eq!(reduced_size(10, 0.0), 10);
        assert_eq!(reduced_size(3, 0.5), 2);
    }
}
