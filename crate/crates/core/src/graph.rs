//! Knowledge-graph data model and TSV ingestion.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense entity index, `0..|E|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

/// Dense relation index, `0..|R|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A directed `(head, relation, tail)` edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple {
            head,
            relation,
            tail,
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.head == self.tail
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head.0, self.relation.0, self.tail.0)
    }
}

/// Bijective label <-> dense index map, in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocab {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = u32::try_from(self.labels.len()).expect("vocabulary exceeds u32::MAX labels");
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: u32) -> Option<&str> {
        self.labels.get(i as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Counters collected while loading a graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub lines_read: usize,
    pub duplicates: usize,
    pub self_loops: usize,
}

/// Immutable, indexed triple store.
#[derive(Clone, Debug)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    by_relation: Vec<Vec<Triple>>,
    self_loops: usize,
}

impl KnowledgeGraph {
    fn empty(entities: Vocab, relations: Vocab) -> Self {
        let n_rel = relations.len();
        KnowledgeGraph {
            entities,
            relations,
            triples: Vec::new(),
            members: HashSet::new(),
            by_relation: vec![Vec::new(); n_rel],
            self_loops: 0,
        }
    }

    /// Inserts `t`; returns false if it was already present.
    fn insert(&mut self, t: Triple) -> bool {
        if !self.members.insert(t) {
            return false;
        }
        if t.is_self_loop() {
            self.self_loops += 1;
        }
        if self.by_relation.len() <= t.relation.index() {
            self.by_relation.resize(t.relation.index() + 1, Vec::new());
        }
        self.triples.push(t);
        self.by_relation[t.relation.index()].push(t);
        true
    }

    /// Builds a graph from labelled triples, deduplicating. Vocabularies are
    /// assigned in first-appearance order.
    pub fn from_labeled<'a, I>(triples: I) -> (Self, LoadStats)
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut g = KnowledgeGraph::empty(Vocab::new(), Vocab::new());
        let mut stats = LoadStats::default();
        for (h, r, t) in triples {
            stats.lines_read += 1;
            let h = EntityId(g.entities.intern(h));
            let r = RelationId(g.relations.intern(r));
            let t = EntityId(g.entities.intern(t));
            if !g.insert(Triple::new(h, r, t)) {
                stats.duplicates += 1;
            }
        }
        g.by_relation.resize(g.relations.len(), Vec::new());
        stats.self_loops = g.self_loops;
        (g, stats)
    }

    /// Same vocabularies, restricted to `triples` (deduplicated, order kept).
    pub fn with_triples(&self, triples: &[Triple]) -> Result<Self> {
        let mut g = KnowledgeGraph::empty(self.entities.clone(), self.relations.clone());
        for &t in triples {
            self.check_triple(t)?;
            g.insert(t);
        }
        Ok(g)
    }

    fn check_triple(&self, t: Triple) -> Result<()> {
        if t.relation.index() >= self.relations.len() {
            return Err(Error::UnknownRelation(format!("#{}", t.relation.0)));
        }
        for e in [t.head, t.tail] {
            if e.index() >= self.entities.len() {
                return Err(Error::UnknownEntity(format!("#{}", e.0)));
            }
        }
        Ok(())
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.members.contains(t)
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn self_loops(&self) -> usize {
        self.self_loops
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    /// Triples of relation `r`, in insertion order.
    pub fn by_relation(&self, r: RelationId) -> &[Triple] {
        self.by_relation
            .get(r.index())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn entity_id(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn relation_id(&self, label: &str) -> Option<RelationId> {
        self.relations.get(label).map(RelationId)
    }

    pub fn entity_label(&self, e: EntityId) -> &str {
        self.entities.label(e.0).unwrap_or("<unknown>")
    }

    pub fn relation_label(&self, r: RelationId) -> &str {
        self.relations.label(r.0).unwrap_or("<unknown>")
    }

    /// Resolves a labelled triple to ids, if every label is known.
    pub fn resolve(&self, h: &str, r: &str, t: &str) -> Option<Triple> {
        Some(Triple::new(
            self.entity_id(h)?,
            self.relation_id(r)?,
            self.entity_id(t)?,
        ))
    }
}

/// Reads a TSV edge list.
///
/// Lines starting with `#` and blank lines are skipped; trailing whitespace
/// is trimmed. Duplicate triples are dropped and counted.
pub fn load_graph(path: &Path) -> Result<(KnowledgeGraph, LoadStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_graph(BufReader::new(file), path)
}

pub fn read_graph<R: BufRead>(reader: R, path: &Path) -> Result<(KnowledgeGraph, LoadStats)> {
    let mut rows: Vec<(String, String, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let parse_err = |reason: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            reason,
        };
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        if fields.iter().any(|f| f.is_empty()) {
            return Err(parse_err("empty field".to_owned()));
        }
        rows.push((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned()));
    }
    if rows.is_empty() {
        return Err(Error::NoTriples(path.to_owned()));
    }
    let (g, stats) =
        KnowledgeGraph::from_labeled(rows.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())));
    if stats.duplicates > 0 {
        log::warn!("{}: dropped {} duplicate triple(s)", path.display(), stats.duplicates);
    }
    if stats.self_loops > 0 {
        log::warn!("{}: {} self-loop triple(s)", path.display(), stats.self_loops);
    }
    Ok((g, stats))
}

/// Dense renumbering of a subset of entities, in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EntityMap {
    local_to_global: Vec<EntityId>,
    global_to_local: HashMap<EntityId, EntityId>,
}

impl EntityMap {
    pub fn identity(n: usize) -> Self {
        let local_to_global: Vec<EntityId> = (0..n as u32).map(EntityId).collect();
        let global_to_local = local_to_global.iter().map(|&e| (e, e)).collect();
        EntityMap {
            local_to_global,
            global_to_local,
        }
    }

    /// Entities incident to `triples`, numbered by first appearance.
    pub fn from_triples(triples: &[Triple]) -> Self {
        let mut map = EntityMap::default();
        for t in triples {
            map.add(t.head);
            map.add(t.tail);
        }
        map
    }

    pub fn from_globals(globals: Vec<EntityId>) -> Result<Self> {
        let mut map = EntityMap::default();
        for e in globals {
            if map.global_to_local.contains_key(&e) {
                return Err(Error::Format {
                    what: "entity map".into(),
                    detail: format!("entity #{} listed twice", e.0),
                });
            }
            map.add(e);
        }
        Ok(map)
    }

    fn add(&mut self, e: EntityId) -> EntityId {
        if let Some(&l) = self.global_to_local.get(&e) {
            return l;
        }
        let l = EntityId(self.local_to_global.len() as u32);
        self.local_to_global.push(e);
        self.global_to_local.insert(e, l);
        l
    }

    pub fn len(&self) -> usize {
        self.local_to_global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_to_global.is_empty()
    }

    pub fn to_local(&self, global: EntityId) -> Option<EntityId> {
        self.global_to_local.get(&global).copied()
    }

    pub fn to_global(&self, local: EntityId) -> Option<EntityId> {
        self.local_to_global.get(local.index()).copied()
    }

    pub fn globals(&self) -> &[EntityId] {
        &self.local_to_global
    }

    /// Remaps both endpoints to local ids; `None` if either is unmapped.
    pub fn localize(&self, t: &Triple) -> Option<Triple> {
        Some(Triple::new(self.to_local(t.head)?, t.relation, self.to_local(t.tail)?))
    }
}

/// A single-relation graph with densely renumbered entities.
#[derive(Clone, Debug)]
pub struct LocalGraph {
    pub graph: KnowledgeGraph,
    /// Relation id in the parent graph. Locally it is always `RelationId(0)`.
    pub relation: RelationId,
    pub entity_map: EntityMap,
}

impl LocalGraph {
    /// Maps a local triple back to parent-graph ids.
    pub fn to_global(&self, t: &Triple) -> Option<Triple> {
        Some(Triple::new(
            self.entity_map.to_global(t.head)?,
            self.relation,
            self.entity_map.to_global(t.tail)?,
        ))
    }
}

/// Extracts relation `r` with local entity ids.
pub fn relation_subgraph(g: &KnowledgeGraph, r: RelationId) -> Result<LocalGraph> {
    let label = g
        .relations
        .label(r.0)
        .ok_or_else(|| Error::UnknownRelation(format!("#{}", r.0)))?;
    let source = g.by_relation(r);
    let entity_map = EntityMap::from_triples(source);

    let mut entities = Vocab::new();
    for &e in entity_map.globals() {
        entities.intern(g.entity_label(e));
    }
    let mut relations = Vocab::new();
    relations.intern(label);

    let mut local = KnowledgeGraph::empty(entities, relations);
    for t in source {
        let mut lt = entity_map.localize(t).expect("entity map covers source triples");
        lt.relation = RelationId(0);
        local.insert(lt);
    }
    Ok(LocalGraph {
        graph: local,
        relation: r,
        entity_map,
    })
}
