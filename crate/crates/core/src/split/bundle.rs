//! On-disk split bundle: `split.json` plus four TSV files per relation under
//! `relations/rNNNN/`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CorruptionStrategy, DataSplit, RelationSplit, SplitParams};
use crate::error::{Error, Result};
use crate::graph::{KnowledgeGraph, RelationId, Triple};

pub const SPLIT_MANIFEST: &str = "split.json";

const PARTS: [&str; 4] = ["train_pos", "train_neg", "test_pos", "test_neg"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub toolkit_version: String,
    pub seed: u64,
    pub test_fraction: f64,
    pub neg_ratio_train: f64,
    pub strategy: CorruptionStrategy,
    pub filtered: bool,
    pub min_test_threshold: usize,
    pub relations: Vec<RelationEntry>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEntry {
    pub index: u32,
    pub label: String,
    pub dir: String,
    pub train_pos: usize,
    pub train_neg: usize,
    pub test_pos: usize,
    pub test_neg: usize,
}

fn relation_dir(r: RelationId) -> String {
    format!("relations/r{:04}", r.0)
}

fn parts(rs: &RelationSplit) -> [&[Triple]; 4] {
    [&rs.train_pos, &rs.train_neg, &rs.test_pos, &rs.test_neg]
}

fn write_triples(path: &Path, g: &KnowledgeGraph, triples: &[Triple]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in triples {
        writeln!(
            w,
            "{}\t{}\t{}",
            g.entity_label(t.head),
            g.relation_label(t.relation),
            g.entity_label(t.tail)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the bundle under `dir`; returns the files written, relative to `dir`.
pub fn export_split(split: &DataSplit, g: &KnowledgeGraph, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut entries = Vec::with_capacity(split.relations.len());
    for rs in &split.relations {
        let rel_dir = relation_dir(rs.relation);
        let abs = dir.join(&rel_dir);
        fs::create_dir_all(&abs).map_err(|e| Error::io(&abs, e))?;
        for (name, triples) in PARTS.iter().zip(parts(rs)) {
            let rel_path = Path::new(&rel_dir).join(format!("{name}.tsv"));
            write_triples(&dir.join(&rel_path), g, triples)?;
            written.push(rel_path);
        }
        entries.push(RelationEntry {
            index: rs.relation.0,
            label: g.relation_label(rs.relation).to_owned(),
            dir: rel_dir,
            train_pos: rs.train_pos.len(),
            train_neg: rs.train_neg.len(),
            test_pos: rs.test_pos.len(),
            test_neg: rs.test_neg.len(),
        });
    }

    let p = &split.params;
    let manifest = SplitManifest {
        toolkit_version: crate::VERSION.to_owned(),
        seed: split.seed,
        test_fraction: p.test_fraction,
        neg_ratio_train: p.neg_ratio_train,
        strategy: p.strategy,
        filtered: p.filtered,
        min_test_threshold: p.min_test_threshold,
        relations: entries,
        warnings: split.warnings.clone(),
    };
    let path = dir.join(SPLIT_MANIFEST);
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    written.push(PathBuf::from(SPLIT_MANIFEST));
    Ok(written)
}

fn read_triples(path: &Path, g: &KnowledgeGraph) -> Result<Vec<Triple>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                reason: format!("expected 3 tab-separated fields, found {}", f.len()),
            });
        }
        let t = g.resolve(f[0], f[1], f[2]).ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            reason: "label not in graph vocabulary".to_owned(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// Reads a bundle written by [`export_split`], resolving labels against `g`.
pub fn import_split(dir: &Path, g: &KnowledgeGraph) -> Result<DataSplit> {
    let path = dir.join(SPLIT_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: SplitManifest = serde_json::from_str(&text)?;
    if manifest.relations.len() != g.n_relations() {
        return Err(Error::Format {
            what: "split bundle".into(),
            detail: format!(
                "{} relations in bundle, {} in graph",
                manifest.relations.len(),
                g.n_relations()
            ),
        });
    }

    let mut relations = Vec::with_capacity(manifest.relations.len());
    for entry in &manifest.relations {
        let r = g
            .relation_id(&entry.label)
            .ok_or_else(|| Error::UnknownRelation(entry.label.clone()))?;
        if r.0 != entry.index {
            return Err(Error::Format {
                what: "split bundle".into(),
                detail: format!("relation {:?} has index {} in graph", entry.label, r.0),
            });
        }
        let base = dir.join(&entry.dir);
        let [train_pos, train_neg, test_pos, test_neg] =
            PARTS.map(|name| read_triples(&base.join(format!("{name}.tsv")), g));
        relations.push(RelationSplit {
            relation: r,
            train_pos: train_pos?,
            train_neg: train_neg?,
            test_pos: test_pos?,
            test_neg: test_neg?,
        });
    }

    Ok(DataSplit {
        params: SplitParams {
            test_fraction: manifest.test_fraction,
            neg_ratio_train: manifest.neg_ratio_train,
            strategy: manifest.strategy,
            filtered: manifest.filtered,
            min_test_threshold: manifest.min_test_threshold,
        },
        seed: manifest.seed,
        relations,
        warnings: manifest.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::build_split;

    #[test]
    fn bundle_round_trip() {
        let rows: Vec<(String, String, String)> = (0..30)
            .map(|i| (format!("n{i}"), if i % 3 == 0 { "p" } else { "q" }.to_owned(), format!("n{}", (i * 7 + 1) % 30)))
            .collect();
        let (g, _) = KnowledgeGraph::from_labeled(
            rows.iter().map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str())),
        );
        let split = build_split(&g, &SplitParams::default(), 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = export_split(&split, &g, dir.path()).unwrap();
        assert_eq!(files.len(), 4 * g.n_relations() + 1);
        let back = import_split(dir.path(), &g).unwrap();
        assert_eq!(back, split);
    }
}
