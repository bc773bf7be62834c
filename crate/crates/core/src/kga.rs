//! Literal-to-graph augmentation with a quantile hierarchy. Each attribute's
//! values are cut into `b`, `b^2`, ..., `b^d` equal-population bins; bins
//! become entities, chained left to right within a level and linked to
//! their parent bin one level up. An entity with value `v` is linked to the
//! finest bin containing `v`.

use std::fmt::Write as _;

use crate::error::{KgError, Result};
use crate::graph::{KnowledgeGraph, RawGraph};

pub const DEFAULT_BRANCHING: usize = 4;
pub const DEFAULT_DEPTH: usize = 3;

pub const REL_CHILD_OF: &str = "kga:child_of";
pub const REL_NEXT: &str = "kga:next";

pub fn has_relation(attr: &str) -> String {
    format!("kga:has:{attr}")
}

pub fn bin_entity(attr: &str, level: usize, bin: usize) -> String {
    format!("kga:bin:{attr}:{level}:{bin:06}")
}

/// True if the graph already carries augmentation relations.
pub fn is_augmented(g: &KnowledgeGraph) -> bool {
    g.entity_relations().get(REL_NEXT).is_some()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileHierarchy {
    pub attr: usize,
    pub attr_name: String,
    pub branching: usize,
    /// `levels[l]` holds the `b^(l+1) - 1` inner boundaries of level `l + 1`.
    pub levels: Vec<Vec<f64>>,
}

impl QuantileHierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn bins_at(&self, level: usize) -> usize {
        self.levels[level - 1].len() + 1
    }

    /// Bin index of `value` at `level` (1-based). Bins are `(B[k-1], B[k]]`,
    /// with the first bin also taking everything at or below `B[0]`; values
    /// outside the fitted range land in the first or last bin.
    pub fn bin(&self, value: f64, level: usize) -> usize {
        self.levels[level - 1].partition_point(|b| *b < value)
    }

    pub fn finest_bin(&self, value: f64) -> usize {
        self.bin(value, self.depth())
    }

    pub fn parent_of(&self, bin: usize) -> usize {
        bin / self.branching
    }
}

/// Fits boundaries by sorting: boundary `k` of a level with `m` bins is the
/// `ceil(k n / m)`-th smallest value, so bins over distinct values differ in
/// population by at most one.
pub fn fit_hierarchy(values: &[f64], branching: usize, depth: usize) -> Result<QuantileHierarchy> {
    if values.is_empty() {
        return Err(KgError::Domain("cannot fit a quantile hierarchy on no values".into()));
    }
    if branching < 2 || depth < 1 {
        return Err(KgError::Config(format!(
            "quantile hierarchy needs branching >= 2 and depth >= 1 (got {branching}, {depth})"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut levels = Vec::with_capacity(depth);
    let mut m = 1usize;
    for _ in 0..depth {
        m = m.checked_mul(branching).ok_or_else(|| {
            KgError::Config("quantile hierarchy too deep for the branching factor".into())
        })?;
        let bounds = (1..m).map(|k| sorted[(k * n).div_ceil(m) - 1]).collect();
        levels.push(bounds);
    }
    Ok(QuantileHierarchy {
        attr: 0,
        attr_name: String::new(),
        branching,
        levels,
    })
}

/// One hierarchy per attributive relation of `g`, fitted on its values.
pub fn fit_graph(g: &KnowledgeGraph, branching: usize, depth: usize) -> Result<Vec<QuantileHierarchy>> {
    let mut per_attr = vec![Vec::new(); g.num_attrs()];
    for a in g.attributive() {
        per_attr[a.attr].push(a.value);
    }
    per_attr
        .iter()
        .enumerate()
        .map(|(attr, values)| {
            let mut h = fit_hierarchy(values, branching, depth)?;
            h.attr = attr;
            h.attr_name = g.attr_relations().name(attr).to_owned();
            Ok(h)
        })
        .collect()
}

/// Moves every attributive triple into the relational training split as a
/// link to its finest bin and adds the bin chain and hierarchy triples.
pub fn augment(g: &KnowledgeGraph, hierarchies: &[QuantileHierarchy]) -> Result<KnowledgeGraph> {
    let hierarchy_for = |attr: &str| hierarchies.iter().find(|h| h.attr_name == attr);
    for name in g.attr_relations().names() {
        if hierarchy_for(name).is_none() {
            return Err(KgError::Domain(format!("no quantile hierarchy fitted for attribute {name:?}")));
        }
    }
    if g.attributive().is_empty() {
        return Ok(g.clone());
    }
    let mut reserved = vec![REL_CHILD_OF.to_owned(), REL_NEXT.to_owned()];
    reserved.extend(g.attr_relations().names().iter().map(|a| has_relation(a)));
    if let Some(clash) = reserved.iter().find(|r| g.entity_relations().get(r).is_some()) {
        return Err(KgError::Domain(format!("relation {clash:?} already exists; graph already augmented?")));
    }

    let mut raw: RawGraph = g.to_raw();
    let attributive = std::mem::take(&mut raw.attributive);
    for (s, a, v) in attributive {
        let h = hierarchy_for(&a).expect("checked above");
        let bin = bin_entity(&a, h.depth(), h.finest_bin(v));
        raw.train.push((s, has_relation(&a), bin));
    }
    for attr in g.attr_relations().names() {
        let h = hierarchy_for(attr).expect("checked above");
        for level in 1..=h.depth() {
            let bins = h.bins_at(level);
            for i in 0..bins.saturating_sub(1) {
                raw.train.push((
                    bin_entity(attr, level, i),
                    REL_NEXT.to_owned(),
                    bin_entity(attr, level, i + 1),
                ));
            }
            if level > 1 {
                for i in 0..bins {
                    raw.train.push((
                        bin_entity(attr, level, i),
                        REL_CHILD_OF.to_owned(),
                        bin_entity(attr, level - 1, h.parent_of(i)),
                    ));
                }
            }
        }
    }
    Ok(raw.build())
}

/// Text sidecar: one line per (attribute, level) with its boundaries.
pub fn dump_hierarchies(hierarchies: &[QuantileHierarchy]) -> String {
    let mut out = String::new();
    for h in hierarchies {
        for (l, bounds) in h.levels.iter().enumerate() {
            let _ = write!(out, "{}\t{}", h.attr_name, l + 1);
            for b in bounds {
                let _ = write!(out, "\t{b}");
            }
            out.push('\n');
        }
    }
    out
}
