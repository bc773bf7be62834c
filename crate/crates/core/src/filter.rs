use std::collections::{HashMap, HashSet};

use crate::graph::{KnowledgeGraph, Triple};

/// Every known relational triple (all splits), indexed for corruption
/// filtering on either side.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    known: HashSet<Triple>,
    objects: HashMap<(usize, usize), Vec<usize>>,
    subjects: HashMap<(usize, usize), Vec<usize>>,
}

impl FilterIndex {
    pub fn new(g: &KnowledgeGraph) -> Self {
        Self::from_triples(g.relational().copied())
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut idx = FilterIndex::default();
        for t in triples {
            if idx.known.insert(t) {
                idx.objects.entry((t.subject, t.predicate)).or_default().push(t.object);
                idx.subjects.entry((t.predicate, t.object)).or_default().push(t.subject);
            }
        }
        idx
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.known.contains(t)
    }

    /// Known objects `o` of `(subject, predicate, o)`.
    pub fn objects(&self, subject: usize, predicate: usize) -> &[usize] {
        self.objects.get(&(subject, predicate)).map_or(&[], Vec::as_slice)
    }

    /// Known subjects `s` of `(s, predicate, object)`.
    pub fn subjects(&self, predicate: usize, object: usize) -> &[usize] {
        self.subjects.get(&(predicate, object)).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.known.len()
    }

    pub fn is_empty(&self) -> bool {
        self.known.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RawGraph;

    #[test]
    fn membership_spans_all_splits() {
        let g = RawGraph {
            train: vec![("a".into(), "p".into(), "b".into())],
            valid: vec![],
            test: vec![("b".into(), "p".into(), "a".into())],
            attributive: vec![("c".into(), "h".into(), 1.0)],
        }
        .build();
        let e = |n: &str| g.entities().get(n).unwrap();
        let f = FilterIndex::new(&g);
        assert!(f.contains(&Triple::new(e("a"), 0, e("b"))));
        assert!(!f.contains(&Triple::new(e("a"), 0, e("c"))));
        assert!(f.contains(&Triple::new(e("b"), 0, e("a"))));
        assert_eq!(f.objects(e("a"), 0), &[e("b")]);
        assert_eq!(f.subjects(0, e("a")), &[e("b")]);
        assert!(f.objects(e("c"), 0).is_empty());
    }
}
