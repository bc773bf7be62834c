//! In-memory knowledge graph: relational triples split into train/valid/test,
//! training-side attributive (numerical literal) triples, and the three frozen
//! vocabularies.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{KgError, Result};

/// Sorted, frozen name table. Indices are positions in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort();
        names.dedup();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Vocab { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: usize,
    pub predicate: usize,
    pub object: usize,
}

impl Triple {
    pub const fn new(subject: usize, predicate: usize, object: usize) -> Self {
        Triple {
            subject,
            predicate,
            object,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttrTriple {
    pub subject: usize,
    pub attr: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

pub const LITERALS_FILE: &str = "literals.txt";

/// A relational triple by name.
pub type NamedTriple = (String, String, String);
/// An attributive triple by name.
pub type NamedAttr = (String, String, f64);

/// Name-level view of a graph. Transforms that add vocabulary build one of
/// these and call [`RawGraph::build`], which re-sorts every vocabulary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawGraph {
    pub train: Vec<NamedTriple>,
    pub valid: Vec<NamedTriple>,
    pub test: Vec<NamedTriple>,
    pub attributive: Vec<NamedAttr>,
}

impl RawGraph {
    pub fn split_mut(&mut self, split: Split) -> &mut Vec<NamedTriple> {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    /// Freezes vocabularies and indexes every triple. Duplicate triples
    /// within a split keep their first occurrence.
    pub fn build(self) -> KnowledgeGraph {
        let mut entities = HashSet::new();
        let mut relations = HashSet::new();
        let mut attrs = HashSet::new();
        for (s, p, o) in self.train.iter().chain(&self.valid).chain(&self.test) {
            entities.insert(s.as_str());
            entities.insert(o.as_str());
            relations.insert(p.as_str());
        }
        for (s, a, _) in &self.attributive {
            entities.insert(s.as_str());
            attrs.insert(a.as_str());
        }
        let entities = Vocab::from_names(entities);
        let entity_relations = Vocab::from_names(relations);
        let attr_relations = Vocab::from_names(attrs);

        let index = |rows: &[NamedTriple]| {
            let mut seen = HashSet::with_capacity(rows.len());
            rows.iter()
                .map(|(s, p, o)| {
                    Triple::new(
                        entities.index[s],
                        entity_relations.index[p],
                        entities.index[o],
                    )
                })
                .filter(|t| seen.insert(*t))
                .collect::<Vec<_>>()
        };
        let train = index(&self.train);
        let valid = index(&self.valid);
        let test = index(&self.test);
        let attributive = self
            .attributive
            .iter()
            .map(|(s, a, v)| AttrTriple {
                subject: entities.index[s],
                attr: attr_relations.index[a],
                value: *v,
            })
            .collect();

        KnowledgeGraph {
            entities,
            entity_relations,
            attr_relations,
            train,
            valid,
            test,
            attributive,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    pub(crate) entities: Vocab,
    pub(crate) entity_relations: Vocab,
    pub(crate) attr_relations: Vocab,
    pub(crate) train: Vec<Triple>,
    pub(crate) valid: Vec<Triple>,
    pub(crate) test: Vec<Triple>,
    pub(crate) attributive: Vec<AttrTriple>,
}

impl KnowledgeGraph {
    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn entity_relations(&self) -> &Vocab {
        &self.entity_relations
    }

    pub fn attr_relations(&self) -> &Vocab {
        &self.attr_relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.entity_relations.len()
    }

    pub fn num_attrs(&self) -> usize {
        self.attr_relations.len()
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Triple] {
        &self.train
    }

    pub fn valid(&self) -> &[Triple] {
        &self.valid
    }

    pub fn test(&self) -> &[Triple] {
        &self.test
    }

    pub fn attributive(&self) -> &[AttrTriple] {
        &self.attributive
    }

    pub fn relational(&self) -> impl Iterator<Item = &Triple> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn to_raw(&self) -> RawGraph {
        let named = |rows: &[Triple]| {
            rows.iter()
                .map(|t| {
                    (
                        self.entities.name(t.subject).to_owned(),
                        self.entity_relations.name(t.predicate).to_owned(),
                        self.entities.name(t.object).to_owned(),
                    )
                })
                .collect()
        };
        RawGraph {
            train: named(&self.train),
            valid: named(&self.valid),
            test: named(&self.test),
            attributive: self
                .attributive
                .iter()
                .map(|a| {
                    (
                        self.entities.name(a.subject).to_owned(),
                        self.attr_relations.name(a.attr).to_owned(),
                        a.value,
                    )
                })
                .collect(),
        }
    }

    /// Same vocabularies, different triples. Used by transforms that never
    /// introduce names.
    pub(crate) fn with_triples(
        &self,
        train: Vec<Triple>,
        attributive: Vec<AttrTriple>,
    ) -> KnowledgeGraph {
        KnowledgeGraph {
            entities: self.entities.clone(),
            entity_relations: self.entity_relations.clone(),
            attr_relations: self.attr_relations.clone(),
            train,
            valid: self.valid.clone(),
            test: self.test.clone(),
            attributive,
        }
    }

    /// Checks the index invariants. Graphs built through this crate always
    /// pass; this exists for graphs read from a cache.
    pub fn validate(&self) -> Result<()> {
        let (ne, nr, na) = (self.num_entities(), self.num_relations(), self.num_attrs());
        for split in Split::ALL {
            let mut seen = HashSet::new();
            for t in self.split(split) {
                if t.subject >= ne || t.object >= ne || t.predicate >= nr {
                    return Err(KgError::Domain(format!(
                        "{split:?} triple {t:?} out of range"
                    )));
                }
                if !seen.insert(*t) {
                    return Err(KgError::Domain(format!("duplicate {split:?} triple {t:?}")));
                }
            }
        }
        for a in &self.attributive {
            if a.subject >= ne || a.attr >= na {
                return Err(KgError::Domain(format!("attributive triple {a:?} out of range")));
            }
        }
        Ok(())
    }
}

/// What to do with valid/test rows naming an entity or relation that never
/// occurs in training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownPolicy {
    #[default]
    Reject,
    Drop,
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub unknown: UnknownPolicy,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadSummary {
    pub dropped_unknown: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub literals: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        DatasetPaths {
            train: dir.join(Split::Train.file_name()),
            valid: dir.join(Split::Valid.file_name()),
            test: dir.join(Split::Test.file_name()),
            literals: dir.join(LITERALS_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.train, &self.valid, &self.test, &self.literals]
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| KgError::io(path, e))
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| (n, l.split('\t').collect()))
}

fn parse_relational(path: &Path) -> Result<Vec<(usize, NamedTriple)>> {
    let text = read_text(path)?;
    rows(&text)
        .map(|(line, cols)| match cols.as_slice() {
            [s, p, o] => Ok((line, ((*s).to_owned(), (*p).to_owned(), (*o).to_owned()))),
            _ => Err(KgError::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            }),
        })
        .collect()
}

fn parse_attributive(path: &Path) -> Result<Vec<NamedAttr>> {
    let text = read_text(path)?;
    rows(&text)
        .map(|(line, cols)| match cols.as_slice() {
            [s, a, v] => {
                let value: f64 = v.trim().parse().map_err(|_| KgError::Parse {
                    path: path.to_owned(),
                    line,
                    message: format!("literal value {v:?} is not a real number"),
                })?;
                if !value.is_finite() {
                    return Err(KgError::Parse {
                        path: path.to_owned(),
                        line,
                        message: format!("literal value {v:?} is not finite"),
                    });
                }
                Ok(((*s).to_owned(), (*a).to_owned(), value))
            }
            _ => Err(KgError::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            }),
        })
        .collect()
}

/// Loads a dataset with the default policy (unknown eval entities rejected).
pub fn load_graph(paths: &DatasetPaths) -> Result<KnowledgeGraph> {
    load_graph_with(paths, &LoadOptions::default()).map(|(g, _)| g)
}

pub fn load_graph_with(
    paths: &DatasetPaths,
    opts: &LoadOptions,
) -> Result<(KnowledgeGraph, LoadSummary)> {
    let train = parse_relational(&paths.train)?;
    let valid = parse_relational(&paths.valid)?;
    let test = parse_relational(&paths.test)?;
    let attributive = parse_attributive(&paths.literals)?;

    let mut known_entities: HashSet<&str> = HashSet::new();
    let mut known_relations: HashSet<&str> = HashSet::new();
    for (_, (s, p, o)) in &train {
        known_entities.insert(s);
        known_entities.insert(o);
        known_relations.insert(p);
    }
    for (s, _, _) in &attributive {
        known_entities.insert(s);
    }

    let mut summary = LoadSummary::default();
    let mut screen = |path: &Path, rows: &[(usize, NamedTriple)]| -> Result<Vec<NamedTriple>> {
        let mut kept = Vec::with_capacity(rows.len());
        for (line, (s, p, o)) in rows {
            let unknown = [s, o]
                .into_iter()
                .find(|e| !known_entities.contains(e.as_str()))
                .map(|e| format!("entity {e:?}"))
                .or_else(|| {
                    (!known_relations.contains(p.as_str())).then(|| format!("relation {p:?}"))
                });
            match (unknown, opts.unknown) {
                (None, _) => kept.push((s.clone(), p.clone(), o.clone())),
                (Some(what), UnknownPolicy::Reject) => {
                    return Err(KgError::Parse {
                        path: path.to_owned(),
                        line: *line,
                        message: format!("{what} does not occur in the training data"),
                    })
                }
                (Some(_), UnknownPolicy::Drop) => summary.dropped_unknown += 1,
            }
        }
        Ok(kept)
    };
    let valid = screen(&paths.valid, &valid)?;
    let test = screen(&paths.test, &test)?;

    let raw = RawGraph {
        train: train.into_iter().map(|(_, t)| t).collect(),
        valid,
        test,
        attributive,
    };
    let total = raw.train.len() + raw.valid.len() + raw.test.len();
    let graph = raw.build();
    summary.duplicates = total - graph.relational().count();
    Ok((graph, summary))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| KgError::io(path, e))
}

/// Writes the four tab-separated files in list order.
pub fn save_graph(graph: &KnowledgeGraph, paths: &DatasetPaths) -> Result<()> {
    let raw = graph.to_raw();
    for (split, path) in [
        (Split::Train, &paths.train),
        (Split::Valid, &paths.valid),
        (Split::Test, &paths.test),
    ] {
        let rows = match split {
            Split::Train => &raw.train,
            Split::Valid => &raw.valid,
            Split::Test => &raw.test,
        };
        let mut out = String::new();
        for (s, p, o) in rows {
            let _ = writeln!(out, "{s}\t{p}\t{o}");
        }
        write_text(path, &out)?;
    }
    let mut out = String::new();
    for (s, a, v) in &raw.attributive {
        let _ = writeln!(out, "{s}\t{a}\t{v}");
    }
    write_text(&paths.literals, &out)
}

const CACHE_TAG: &str = "kglit-graph 1";

/// Line-based cache that stores vocabularies verbatim, so indices survive
/// without re-sorting.
pub fn write_cache(graph: &KnowledgeGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{CACHE_TAG}");
    for (name, vocab) in [
        ("entities", &graph.entities),
        ("entity_relations", &graph.entity_relations),
        ("attr_relations", &graph.attr_relations),
    ] {
        let _ = writeln!(out, "{name}\t{}", vocab.len());
        for n in vocab.names() {
            let _ = writeln!(out, "{n}");
        }
    }
    for split in Split::ALL {
        let rows = graph.split(split);
        let _ = writeln!(out, "{split:?}\t{}", rows.len());
        for t in rows {
            let _ = writeln!(out, "{}\t{}\t{}", t.subject, t.predicate, t.object);
        }
    }
    let _ = writeln!(out, "attributive\t{}", graph.attributive.len());
    for a in &graph.attributive {
        let _ = writeln!(out, "{}\t{}\t{}", a.subject, a.attr, a.value);
    }
    write_text(path, &out)
}

pub fn read_cache(path: &Path) -> Result<KnowledgeGraph> {
    let text = read_text(path)?;
    let bad = |line: usize, message: &str| KgError::Parse {
        path: path.to_owned(),
        line,
        message: message.to_owned(),
    };
    match text.lines().next() {
        Some(CACHE_TAG) => {}
        Some(_) => return Err(bad(1, "not a graph cache (bad version tag)")),
        None => return Err(bad(0, "empty cache file")),
    }

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).skip(1);
    let mut next_section = |expect: &str| -> Result<(usize, Vec<(usize, &str)>)> {
        let (n, l) = lines.next().ok_or_else(|| bad(0, "truncated cache"))?;
        let (name, count) = l.split_once('\t').ok_or_else(|| bad(n, "bad section header"))?;
        if name != expect {
            return Err(bad(n, &format!("expected section {expect}")));
        }
        let count: usize = count.parse().map_err(|_| bad(n, "bad section size"))?;
        let body: Vec<_> = lines.by_ref().take(count).collect();
        if body.len() != count {
            return Err(bad(n, "truncated section"));
        }
        Ok((n, body))
    };

    let mut vocab = |name: &str| -> Result<Vocab> {
        let (_, body) = next_section(name)?;
        let names: Vec<String> = body.iter().map(|(_, l)| (*l).to_owned()).collect();
        let v = Vocab::from_names(names.iter().cloned());
        if v.names() != names.as_slice() {
            return Err(bad(0, &format!("{name} vocabulary is not sorted and unique")));
        }
        Ok(v)
    };
    let entities = vocab("entities")?;
    let entity_relations = vocab("entity_relations")?;
    let attr_relations = vocab("attr_relations")?;

    let parse_usize = |n: usize, s: &str| s.parse::<usize>().map_err(|_| bad(n, "bad index"));
    let mut splits = Vec::new();
    for split in Split::ALL {
        let (_, body) = next_section(&format!("{split:?}"))?;
        let mut rows = Vec::with_capacity(body.len());
        for (n, l) in body {
            let cols: Vec<&str> = l.split('\t').collect();
            let [s, p, o] = cols.as_slice() else {
                return Err(bad(n, "expected 3 columns"));
            };
            rows.push(Triple::new(parse_usize(n, s)?, parse_usize(n, p)?, parse_usize(n, o)?));
        }
        splits.push(rows);
    }
    let (_, body) = next_section("attributive")?;
    let mut attributive = Vec::with_capacity(body.len());
    for (n, l) in body {
        let cols: Vec<&str> = l.split('\t').collect();
        let [s, a, v] = cols.as_slice() else {
            return Err(bad(n, "expected 3 columns"));
        };
        attributive.push(AttrTriple {
            subject: parse_usize(n, s)?,
            attr: parse_usize(n, a)?,
            value: v.parse().map_err(|_| bad(n, "bad literal value"))?,
        });
    }
    let test = splits.pop().unwrap_or_default();
    let valid = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    let graph = KnowledgeGraph {
        entities,
        entity_relations,
        attr_relations,
        train,
        valid,
        test,
        attributive,
    };
    graph.validate()?;
    Ok(graph)
}
