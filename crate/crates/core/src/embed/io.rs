//! TSV export: one line per row, entity label followed by `dim` reals, plus a
//! `.json` sidecar holding the training configuration.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbeddingConfig, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::graph::{EntityId, EntityMap, Vocab};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub toolkit_version: String,
    pub dim: usize,
    pub rows: usize,
    pub config: EmbeddingConfig,
    pub final_loss: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

pub fn sidecar_path(tsv: &Path) -> PathBuf {
    tsv.with_extension("json")
}

/// Writes `path` and its sidecar; labels come from `entities`.
pub fn export_embeddings(space: &EmbeddingSpace, entities: &Vocab, path: &Path) -> Result<Vec<PathBuf>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (row, &e) in space.entity_map().globals().iter().enumerate() {
        let label = entities
            .label(e.0)
            .ok_or_else(|| Error::UnknownEntity(format!("#{}", e.0)))?;
        let mut line = String::from(label);
        for v in space.row(row) {
            line.push('\t');
            line.push_str(&format!("{v:?}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let sidecar = EmbeddingSidecar {
        toolkit_version: crate::VERSION.to_owned(),
        dim: space.dim(),
        rows: space.n_rows(),
        config: space.config().clone(),
        final_loss: space.epoch_losses().last().copied(),
        epoch_losses: space.epoch_losses().to_vec(),
    };
    let side = sidecar_path(path);
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    Ok(vec![path.to_owned(), side])
}

/// Reads a space written by [`export_embeddings`], resolving labels against
/// `entities`.
pub fn import_embeddings(path: &Path, entities: &Vocab) -> Result<EmbeddingSpace> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: EmbeddingSidecar = serde_json::from_str(&text)?;

    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ids = Vec::new();
    let mut vectors = Vec::with_capacity(sidecar.rows * sidecar.dim);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim_end().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_owned(),
            line: i + 1,
            reason,
        };
        let mut fields = line.trim_end().split('\t');
        let label = fields.next().unwrap_or_default();
        let id = entities
            .get(label)
            .ok_or_else(|| parse_err(format!("unknown entity {label:?}")))?;
        let before = vectors.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| parse_err(format!("bad number {f:?}")))?;
            vectors.push(v);
        }
        if vectors.len() - before != sidecar.dim {
            return Err(parse_err(format!(
                "expected {} values, found {}",
                sidecar.dim,
                vectors.len() - before
            )));
        }
        ids.push(EntityId(id));
    }
    if ids.len() != sidecar.rows {
        return Err(Error::Format {
            what: "embedding file".into(),
            detail: format!("sidecar says {} rows, file has {}", sidecar.rows, ids.len()),
        });
    }
    let mut space = EmbeddingSpace::from_rows(
        sidecar.dim,
        vectors,
        EntityMap::from_globals(ids)?,
        sidecar.config,
    )?;
    space.epoch_losses = sidecar.epoch_losses;
    Ok(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::train_on_stream;
    use crate::graph::KnowledgeGraph;

    #[test]
    fn round_trip_preserves_values() {
        let (g, _) = KnowledgeGraph::from_labeled([
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "s", "d"),
            ("x", "s", "a"),
        ]);
        let cfg = EmbeddingConfig {
            dim: 5,
            epochs: 10,
            ..EmbeddingConfig::default()
        };
        let space = train_on_stream(&g.triples()[1..], &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.tsv");
        let files = export_embeddings(&space, g.entities(), &path).unwrap();
        assert_eq!(files.len(), 2);
        let back = import_embeddings(&path, g.entities()).unwrap();
        assert_eq!(back.entity_map(), space.entity_map());
        for (a, b) in back.as_slice().iter().zip(space.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(back.config(), space.config());
        assert_eq!(back.epoch_losses(), space.epoch_losses());
    }
}
