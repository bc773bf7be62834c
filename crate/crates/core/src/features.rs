//! Per-entity literal feature vectors: one column per attributive relation,
//! zero where the entity has no value.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng as _;

use crate::graph::KnowledgeGraph;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct LiteralFeatureMatrix {
    values: Array2<f64>,
    present: Array2<bool>,
}

impl LiteralFeatureMatrix {
    /// Wraps already-normalized values. Absent cells are forced to zero.
    pub fn from_parts(mut values: Array2<f64>, present: Array2<bool>) -> Self {
        assert_eq!(values.dim(), present.dim(), "values/mask shape mismatch");
        values.zip_mut_with(&present, |v, &p| {
            if !p {
                *v = 0.0;
            }
        });
        LiteralFeatureMatrix { values, present }
    }

    pub fn empty(num_entities: usize) -> Self {
        Self::from_parts(
            Array2::zeros((num_entities, 0)),
            Array2::from_elem((num_entities, 0), false),
        )
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn present(&self) -> &Array2<bool> {
        &self.present
    }

    pub fn num_entities(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_attrs(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, entity: usize) -> ndarray::ArrayView1<'_, f64> {
        self.values.row(entity)
    }
}

/// Picks one raw value per (entity, attribute) cell, uniformly among the
/// candidates, then min-max normalizes every column.
pub fn build_feature_matrix(g: &KnowledgeGraph, seed: u64) -> LiteralFeatureMatrix {
    let (ne, na) = (g.num_entities(), g.num_attrs());
    let mut candidates: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for a in g.attributive() {
        candidates.entry((a.subject, a.attr)).or_default().push(a.value);
    }
    let mut rng = rng::stream(seed, Stream::FeatureChoice);
    let mut raw = Array2::zeros((ne, na));
    let mut mask = Array2::from_elem((ne, na), false);
    for ((e, a), vals) in candidates {
        let v = match vals.len() {
            1 => vals[0],
            k => vals[rng.random_range(0..k)],
        };
        raw[[e, a]] = v;
        mask[[e, a]] = true;
    }
    normalize_features(raw, mask)
}

/// Per-attribute min-max scaling over present cells. Constant columns map
/// to 0.5; absent cells stay 0.
pub fn normalize_features(mut raw: Array2<f64>, mask: Array2<bool>) -> LiteralFeatureMatrix {
    assert_eq!(raw.dim(), mask.dim(), "values/mask shape mismatch");
    for (mut col, mcol) in raw.columns_mut().into_iter().zip(mask.columns()) {
        let present = col.iter().zip(mcol).filter(|(_, &m)| m).map(|(v, _)| *v);
        let (lo, hi) = present.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        for (v, &m) in col.iter_mut().zip(mcol) {
            *v = if !m {
                0.0
            } else if hi > lo {
                (*v - lo) / (hi - lo)
            } else {
                0.5
            };
        }
    }
    LiteralFeatureMatrix::from_parts(raw, mask)
}
