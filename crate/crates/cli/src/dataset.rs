//! Assemble the in-memory training dataset from a manifest, an embedding
//! file, and per-structure graph construction (cached on disk).

use std::collections::BTreeMap;
use std::path::Path;

use aaip_core::basis::{BasisConfig, SphericalTable};
use aaip_core::graph::{build_structural_graph, read_embeddings, EmbeddingStore, StructuralGraph};
use aaip_core::model::{mean_pool, Dataset, PairData};
use aaip_core::structure::parse_pdb;

use crate::cache;
use crate::manifest::PairRecord;

/// Load and mean-pool the embedding for one entity id.
fn pooled(store: &EmbeddingStore, id: &str) -> Result<Vec<f64>, String> {
    let (rows, data) = store
        .get(id)
        .ok_or_else(|| format!("embedding file has no record for entity '{id}'"))?;
    Ok(mean_pool(rows, store.dim, data))
}

/// Build (or load from cache) the structural graph for one structure file.
pub fn load_graph(
    path: &Path,
    chains: &[String],
    basis: &BasisConfig,
    cache_dir: Option<&Path>,
) -> Result<StructuralGraph, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("cannot read structure {}: {e}", path.display()))?;
    let key = cache::cache_key(&bytes, chains, basis);
    if let Some(dir) = cache_dir {
        let entry = cache::cache_path(dir, &key);
        if let Ok(cached) = std::fs::read(&entry) {
            if let Ok(g) = cache::decode_graph(&cached) {
                return Ok(g);
            }
        }
    }
    let text = String::from_utf8_lossy(&bytes);
    let parsed = parse_pdb(&text, &path.display().to_string())
        .map_err(|e| format!("{}: {e:?}", path.display()))?;
    let structure = if chains.is_empty() {
        parsed.structure
    } else {
        let s = parsed.structure.select_chains(chains);
        if s.chains.is_empty() {
            return Err(format!("{}: none of the chains {:?} present", path.display(), chains));
        }
        s
    };
    let table = SphericalTable::new(basis);
    let g = build_structural_graph(&structure, basis, &table)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(dir) = cache_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("cache dir: {e}"))?;
        std::fs::write(cache::cache_path(dir, &key), cache::encode_graph(&g))
            .map_err(|e| format!("cache write: {e}"))?;
    }
    Ok(g)
}

pub fn load_embedding_store(path: &Path) -> Result<EmbeddingStore, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("cannot read embeddings {}: {e}", path.display()))?;
    read_embeddings(&bytes).map_err(|e| format!("embeddings {}: {e}", path.display()))
}

/// Assemble the dataset. Per-record failures are collected; the dataset
/// contains the records that loaded cleanly, in manifest order.
pub fn assemble(
    records: &[PairRecord],
    store: &EmbeddingStore,
    basis: &BasisConfig,
    cache_dir: Option<&Path>,
    need_structures: bool,
) -> (Option<Dataset>, Vec<(String, String)>) {
    let mut pairs = Vec::new();
    let mut errors: Vec<(String, String)> = Vec::new();
    let mut graph_memo: BTreeMap<String, Result<StructuralGraph, String>> = BTreeMap::new();
    for r in records {
        let mut build = || -> Result<PairData, String> {
            let heavy_pooled = pooled(store, &format!("{}:H", r.pair_id))?;
            let light_pooled = if r.ab_light_seq.is_empty() {
                None
            } else {
                Some(pooled(store, &format!("{}:L", r.pair_id))?)
            };
            let ag_pooled = pooled(store, &format!("{}:G", r.pair_id))?;
            let mut graph_for = |path: &Option<std::path::PathBuf>,
                                 chains: &[String]|
             -> Result<Option<StructuralGraph>, String> {
                let Some(p) = path else {
                    return Ok(None);
                };
                let memo_key = format!("{}|{}", p.display(), chains.join(";"));
                let entry = graph_memo
                    .entry(memo_key)
                    .or_insert_with(|| load_graph(p, chains, basis, cache_dir));
                entry.clone().map(Some)
            };
            let ab_graph = if need_structures { graph_for(&r.ab_structure_path, &r.ab_chains)? } else { None };
            let ag_graph = if need_structures { graph_for(&r.ag_structure_path, &r.ag_chains)? } else { None };
            Ok(PairData {
                pair_id: r.pair_id.clone(),
                heavy_pooled,
                light_pooled,
                ag_pooled,
                ab_graph,
                ag_graph,
                label: r.label,
            })
        };
        match build() {
            Ok(p) => pairs.push(p),
            Err(e) => errors.push((r.pair_id.clone(), e)),
        }
    }
    let ds = if pairs.is_empty() { None } else { Some(Dataset::new(pairs)) };
    (ds, errors)
}
