//! Seeded random knowledge graphs with learnable structure, for tests and
//! desk-scale experiments.
//!
//! Entities fall into clusters; each relation links one source cluster to
//! one target cluster and prefers a few popular objects there. Every entity
//! occurs in the training split.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{KgError, Result};
use crate::graph::{KnowledgeGraph, NamedTriple, RawGraph};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub entities: usize,
    pub relations: usize,
    /// Target number of distinct relational triples over all splits.
    pub triples: usize,
    pub clusters: usize,
    /// Attributive relations; each entity has each with probability 0.7.
    pub attributes: usize,
    pub valid_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            entities: 2000,
            relations: 20,
            triples: 20_000,
            clusters: 10,
            attributes: 0,
            valid_fraction: 0.1,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

impl FixtureSpec {
    /// A small graph for quick tests.
    pub fn tiny(entities: usize, seed: u64) -> Self {
        FixtureSpec {
            entities,
            relations: 3,
            triples: entities * 4,
            clusters: 2,
            attributes: 2,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entities < 2 || self.relations == 0 || self.clusters == 0 || self.clusters > self.entities {
            return Err(KgError::Config(
                "a fixture needs at least two entities, one relation and 1..=|E| clusters".into(),
            ));
        }
        let (v, t) = (self.valid_fraction, self.test_fraction);
        if !(0.0..1.0).contains(&v) || !(0.0..1.0).contains(&t) || v + t >= 1.0 {
            return Err(KgError::Config("validation and test fractions must sum below 1".into()));
        }
        let capacity = self.entities * self.entities * self.relations;
        if self.triples > capacity / 2 {
            return Err(KgError::Config(format!(
                "{} triples is too dense for {} entities and {} relations",
                self.triples, self.entities, self.relations
            )));
        }
        Ok(())
    }
}

pub fn entity_name(i: usize) -> String {
    format!("ent{i:05}")
}

pub fn generate(spec: &FixtureSpec) -> Result<KnowledgeGraph> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, Stream::Fixture);
    let ne = spec.entities;
    let cluster: Vec<usize> = (0..ne).map(|e| e % spec.clusters).collect();
    let members: Vec<Vec<usize>> = (0..spec.clusters)
        .map(|c| (0..ne).filter(|&e| cluster[e] == c).collect())
        .collect();
    let routes: Vec<(usize, usize)> = (0..spec.relations)
        .map(|_| (rng.random_range(0..spec.clusters), rng.random_range(0..spec.clusters)))
        .collect();

    // Object choice is skewed towards low-index members of the target
    // cluster, which gives every relation a learnable popularity profile.
    let pick_object = |c: usize, rng: &mut rng::Rng| {
        let m = &members[c];
        let u: f64 = rng.random();
        m[((u * u) * m.len() as f64) as usize % m.len()]
    };

    let mut seen = HashSet::new();
    let mut cover = Vec::with_capacity(ne);
    for s in 0..ne {
        // One triple per entity as subject keeps every entity in training.
        let candidates: Vec<usize> = (0..spec.relations).filter(|&r| routes[r].0 == cluster[s]).collect();
        let r = if candidates.is_empty() {
            rng.random_range(0..spec.relations)
        } else {
            candidates[rng.random_range(0..candidates.len())]
        };
        let target = if routes[r].0 == cluster[s] { routes[r].1 } else { rng.random_range(0..spec.clusters) };
        let mut o = pick_object(target, &mut rng);
        if o == s {
            o = (s + 1) % ne;
        }
        if seen.insert((s, r, o)) {
            cover.push((s, r, o));
        }
    }
    for r in 0..spec.relations {
        if !cover.iter().any(|t| t.1 == r) {
            let s = rng.random_range(0..ne);
            let o = (s + 1 + rng.random_range(0..ne - 1)) % ne;
            if seen.insert((s, r, o)) {
                cover.push((s, r, o));
            }
        }
    }

    let mut rest = Vec::new();
    let mut attempts = 0usize;
    while cover.len() + rest.len() < spec.triples && attempts < spec.triples * 50 {
        attempts += 1;
        let r = rng.random_range(0..spec.relations);
        let (from, to) = routes[r];
        // A tenth of the triples ignore the cluster routes.
        let (s, o) = if rng.random::<f64>() < 0.1 {
            (rng.random_range(0..ne), rng.random_range(0..ne))
        } else {
            let m = &members[from];
            (m[rng.random_range(0..m.len())], pick_object(to, &mut rng))
        };
        if s != o && seen.insert((s, r, o)) {
            rest.push((s, r, o));
        }
    }
    rest.shuffle(&mut rng);

    let total = cover.len() + rest.len();
    let n_valid = ((total as f64) * spec.valid_fraction).round() as usize;
    let n_test = ((total as f64) * spec.test_fraction).round() as usize;
    let n_valid = n_valid.min(rest.len());
    let n_test = n_test.min(rest.len() - n_valid);

    let named = |&(s, r, o): &(usize, usize, usize)| -> NamedTriple {
        (entity_name(s), format!("rel{r:02}"), entity_name(o))
    };
    let mut raw = RawGraph::default();
    raw.valid = rest[..n_valid].iter().map(named).collect();
    raw.test = rest[n_valid..n_valid + n_test].iter().map(named).collect();
    raw.train = cover.iter().chain(&rest[n_valid + n_test..]).map(named).collect();

    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    for a in 0..spec.attributes {
        for e in 0..ne {
            if rng.random::<f64>() < 0.7 {
                let v = 10.0 * cluster[e] as f64 + (a + 1) as f64 * normal.sample(&mut rng);
                raw.attributive.push((entity_name(e), format!("attr{a:02}"), v));
            }
        }
    }
    Ok(raw.build())
}
