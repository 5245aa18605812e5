//! Per-protein structural radius graphs with encoded edge features, and the
//! dataset-level relation graph with cosine adjacency.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::{encode_rbf, encode_sbf, encode_tbf, BasisConfig, SphericalTable};
use crate::fmath;
use crate::geometry::{
    build_frames, residue_edge_geom, side_chain_torsions, torus_embed, backbone_edge_geom,
};
use crate::structure::{amino_acid_class, ProteinStructure};

/// Radius graph over residue anchors with three levels of encoded edge
/// features. Edges are directed and come in both orientations.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralGraph {
    pub n: usize,
    /// Amino-acid class per node, 0-19 canonical, 20 unknown.
    pub node_class: Vec<u8>,
    /// Torus embedding of the side-chain torsions, 8 values per node.
    pub side_chain_feat: Vec<[f64; 8]>,
    /// Directed (source, target) pairs, i != j.
    pub edges: Vec<(usize, usize)>,
    /// Residue level per edge: TBF(d, theta, phi) ++ SBF(d, tau).
    pub edge_feat_residue: Vec<Vec<f64>>,
    /// Backbone level per edge: SBF(d, alpha) ++ SBF(d, beta) ++ SBF(d, gamma).
    pub edge_feat_backbone: Vec<Vec<f64>>,
    /// Side-chain level per edge: RBF(d).
    pub edge_feat_sidechain: Vec<Vec<f64>>,
}

impl StructuralGraph {
    pub fn residue_feat_len(cfg: &BasisConfig) -> usize {
        cfg.tbf_len() + cfg.sbf_len()
    }
    pub fn backbone_feat_len(cfg: &BasisConfig) -> usize {
        3 * cfg.sbf_len()
    }
    pub fn sidechain_feat_len(cfg: &BasisConfig) -> usize {
        cfg.rbf_len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    /// No residue survived parsing.
    EmptyGraph,
    /// A zero vector where a direction is required.
    ZeroVector,
}

impl core::fmt::Display for GraphError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GraphError::EmptyGraph => write!(f, "structure has no residues"),
            GraphError::ZeroVector => write!(f, "zero-norm embedding vector"),
        }
    }
}

/// Build the radius graph on residue anchors with cutoff `cfg.cutoff` and
/// encode all three edge-feature levels.
pub fn build_structural_graph(
    structure: &ProteinStructure,
    cfg: &BasisConfig,
    table: &SphericalTable,
) -> Result<StructuralGraph, GraphError> {
    let n = structure.residue_count();
    if n == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let residues: Vec<_> = structure.residues().collect();
    let frames = build_frames(structure);

    let node_class = residues.iter().map(|r| amino_acid_class(&r.name)).collect();
    let side_chain_feat =
        residues.iter().map(|r| torus_embed(&side_chain_torsions(r))).collect();

    let mut edges = Vec::new();
    let mut edge_feat_residue = Vec::new();
    let mut edge_feat_backbone = Vec::new();
    let mut edge_feat_sidechain = Vec::new();

    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = (residues[j].anchor - residues[i].anchor).norm();
            if d > cfg.cutoff {
                continue;
            }
            let Ok(geom) = residue_edge_geom(&frames[i], residues[j].anchor, &frames[j]) else {
                continue; // coincident anchors: skip the edge
            };
            let bb = backbone_edge_geom(&frames[i], &frames[j]);

            let mut rf = encode_tbf(geom.d, geom.theta, geom.phi, cfg, table).expect("d <= cutoff");
            rf.extend(encode_sbf(geom.d, geom.tau, cfg, table).expect("d <= cutoff"));
            let mut bf = encode_sbf(geom.d, bb.alpha, cfg, table).expect("d <= cutoff");
            bf.extend(encode_sbf(geom.d, bb.beta, cfg, table).expect("d <= cutoff"));
            bf.extend(encode_sbf(geom.d, bb.gamma, cfg, table).expect("d <= cutoff"));
            let sf = encode_rbf(geom.d, cfg).expect("d <= cutoff");

            edges.push((i, j));
            edge_feat_residue.push(rf);
            edge_feat_backbone.push(bf);
            edge_feat_sidechain.push(sf);
        }
    }

    Ok(StructuralGraph {
        n,
        node_class,
        side_chain_feat,
        edges,
        edge_feat_residue,
        edge_feat_backbone,
        edge_feat_sidechain,
    })
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, GraphError> {
    assert_eq!(u.len(), v.len(), "cosine dimension mismatch");
    let nu = fmath::sqrt(u.iter().map(|x| x * x).sum::<f64>());
    let nv = fmath::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if nu == 0.0 || nv == 0.0 {
        return Err(GraphError::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Dataset-level graph over protein entities. `neighbors[i]` lists
/// (j, similarity) including the self-loop (i, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RelationGraph {
    pub node_ids: Vec<String>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub knn_k: usize,
}

impl RelationGraph {
    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    /// Sum of absolute values over the stored (sparsified) adjacency,
    /// counting each undirected entry once per stored direction.
    pub fn l1_norm(&self) -> f64 {
        self.neighbors.iter().flatten().map(|(_, w)| fmath::abs(*w)).sum()
    }

    /// Symmetric GCN propagation weights: w_ij = e_ij / sqrt(d_i d_j) with
    /// d_i = 1 + sum of neighbor similarities. Negative cosines can push a
    /// degree to zero or below, where the normalization is ill-posed, so
    /// degrees are floored at the self-loop weight 1. This also bounds
    /// every propagation weight to [-1, 1].
    pub fn normalized_weights(&self) -> Vec<Vec<(usize, f64)>> {
        let degree: Vec<f64> = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                let d = 1.0
                    + nbrs.iter().filter(|(j, _)| *j != i).map(|(_, w)| w).sum::<f64>();
                d.max(1.0)
            })
            .collect();
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                nbrs.iter()
                    .map(|&(j, w)| (j, w / fmath::sqrt(degree[i] * degree[j])))
                    .collect()
            })
            .collect()
    }
}

/// Build the relation graph: dense cosine similarities, sparsified per row
/// to the `knn_k` largest off-diagonal entries, symmetrized by union, with
/// unit self-loops.
pub fn build_relation_graph(
    entities: &[(String, Vec<f64>)],
    knn_k: usize,
) -> Result<RelationGraph, GraphError> {
    let n = entities.len();
    assert!(n >= 1, "relation graph needs at least one entity");
    let mut dense = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        dense[i][i] = 1.0;
        for j in (i + 1)..n {
            let c = cosine(&entities[i].1, &entities[j].1)?;
            dense[i][j] = c;
            dense[j][i] = c;
        }
    }

    // Rank rows by raw cosine value so the strongest positive
    // associations survive sparsification.
    let mut keep = vec![vec![false; n]; n];
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            dense[i][b].partial_cmp(&dense[i][a]).unwrap().then(a.cmp(&b))
        });
        for &j in order.iter().take(knn_k) {
            keep[i][j] = true;
        }
    }

    let neighbors = (0..n)
        .map(|i| {
            let mut nbrs = vec![(i, 1.0)];
            for j in 0..n {
                if j != i && (keep[i][j] || keep[j][i]) {
                    nbrs.push((j, dense[i][j]));
                }
            }
            nbrs.sort_by_key(|&(j, _)| j);
            nbrs
        })
        .collect();

    Ok(RelationGraph {
        node_ids: entities.iter().map(|(id, _)| id.clone()).collect(),
        neighbors,
        knn_k,
    })
}

/// Per-residue sequence-embedding matrices keyed by entity id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub dim: usize,
    entries: BTreeMap<String, (usize, Vec<f64>)>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> EmbeddingStore {
        EmbeddingStore { dim, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, id: &str, rows: usize, data: Vec<f64>) -> Result<(), EmbeddingError> {
        if data.len() != rows * self.dim {
            return Err(EmbeddingError::DimMismatch);
        }
        if self.entries.contains_key(id) {
            return Err(EmbeddingError::DuplicateId { id: id.into() });
        }
        self.entries.insert(id.into(), (rows, data));
        Ok(())
    }

    /// (row count, row-major data) for an entity.
    pub fn get(&self, id: &str) -> Option<(usize, &[f64])> {
        self.entries.get(id).map(|(r, d)| (*r, d.as_slice()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingError {
    BadMagic,
    VersionMismatch { found: u32 },
    TruncatedRecord,
    DuplicateId { id: String },
    DimMismatch,
}

impl core::fmt::Display for EmbeddingError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EmbeddingError::BadMagic => write!(f, "bad embedding file magic"),
            EmbeddingError::VersionMismatch { found } => {
                write!(f, "unsupported embedding file version {found}")
            }
            EmbeddingError::TruncatedRecord => write!(f, "truncated embedding record"),
            EmbeddingError::DuplicateId { id } => write!(f, "duplicate embedding id '{id}'"),
            EmbeddingError::DimMismatch => write!(f, "embedding dimension mismatch"),
        }
    }
}

const EMB_MAGIC: &[u8; 4] = b"PLMB";
const EMB_VERSION: u32 = 1;

/// Decode the `PLMB` little-endian embedding container.
pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingStore, EmbeddingError> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], EmbeddingError> {
        if *pos + n > bytes.len() {
            return Err(EmbeddingError::TruncatedRecord);
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    if take(&mut pos, 4)? != EMB_MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != EMB_VERSION {
        return Err(EmbeddingError::VersionMismatch { found: version });
    }
    let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
    let mut store: Option<EmbeddingStore> = None;
    for _ in 0..count {
        let id_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let id = core::str::from_utf8(take(&mut pos, id_len)?)
            .map_err(|_| EmbeddingError::TruncatedRecord)?
            .into();
        let rows = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows * dim {
            let v = f32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
            data.push(v as f64);
        }
        let store = store.get_or_insert_with(|| EmbeddingStore::new(dim));
        if dim != store.dim {
            return Err(EmbeddingError::DimMismatch);
        }
        let id: String = id;
        store.insert(&id, rows, data)?;
    }
    Ok(store.unwrap_or_else(|| EmbeddingStore::new(0)))
}

/// Encode a store in the canonical `PLMB` layout (ids in sorted order, so
/// write(read(f)) == f holds for canonically ordered files).
pub fn write_embeddings(store: &EmbeddingStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&EMB_VERSION.to_le_bytes());
    out.extend_from_slice(&(store.entries.len() as u32).to_le_bytes());
    for (id, (rows, data)) in &store.entries {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        out.extend_from_slice(&(*rows as u32).to_le_bytes());
        out.extend_from_slice(&(store.dim as u32).to_le_bytes());
        for v in data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{Atom, Residue};
    use crate::vec3::Vec3;
    use alloc::format;
    use alloc::string::ToString;
    use approx::assert_abs_diff_eq;

    fn toy_structure(anchors: &[[f64; 3]]) -> ProteinStructure {
        let residues = anchors
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let ca = Vec3::from(p);
                Residue {
                    index: i,
                    name: "ALA".to_string(),
                    atoms: alloc::vec![
                        Atom { name: "N".into(), position: ca + Vec3::new(1.0, 0.3, 0.0), element: "N".into() },
                        Atom { name: "CA".into(), position: ca, element: "C".into() },
                        Atom { name: "C".into(), position: ca + Vec3::new(0.0, 1.0, 0.4), element: "C".into() },
                    ],
                    anchor: ca,
                }
            })
            .collect();
        ProteinStructure { id: "toy".into(), chains: alloc::vec![("A".to_string(), residues)] }
    }

    #[test]
    fn radius_rule() {
        let cfg = BasisConfig::default();
        let table = SphericalTable::new(&cfg);
        let close = toy_structure(&[[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]);
        let g = build_structural_graph(&close, &cfg, &table).unwrap();
        let mut edges = g.edges.clone();
        edges.sort();
        assert_eq!(edges, alloc::vec![(0, 1), (1, 0)]);

        let far = toy_structure(&[[0.0, 0.0, 0.0], [11.0, 0.0, 0.0]]);
        let g = build_structural_graph(&far, &cfg, &table).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn edge_features_have_configured_lengths() {
        let cfg = BasisConfig::default();
        let table = SphericalTable::new(&cfg);
        let s = toy_structure(&[[0.0, 0.0, 0.0], [3.0, 1.0, 2.0], [5.0, 4.0, 1.0]]);
        let g = build_structural_graph(&s, &cfg, &table).unwrap();
        assert!(!g.edges.is_empty());
        for f in &g.edge_feat_residue {
            assert_eq!(f.len(), StructuralGraph::residue_feat_len(&cfg));
        }
        for f in &g.edge_feat_backbone {
            assert_eq!(f.len(), StructuralGraph::backbone_feat_len(&cfg));
        }
        for f in &g.edge_feat_sidechain {
            assert_eq!(f.len(), StructuralGraph::sidechain_feat_len(&cfg));
        }
    }

    #[test]
    fn edges_match_brute_force_on_random_structure() {
        let mut rng = crate::rng::SplitMix64::new(31);
        let anchors: Vec<[f64; 3]> = (0..20)
            .map(|_| [rng.uniform(0.0, 25.0), rng.uniform(0.0, 25.0), rng.uniform(0.0, 25.0)])
            .collect();
        let cfg = BasisConfig::default();
        let table = SphericalTable::new(&cfg);
        let s = toy_structure(&anchors);
        let g = build_structural_graph(&s, &cfg, &table).unwrap();
        let mut expect = Vec::new();
        for i in 0..anchors.len() {
            for j in 0..anchors.len() {
                if i != j {
                    let d = (Vec3::from(anchors[i]) - Vec3::from(anchors[j])).norm();
                    if d <= cfg.cutoff {
                        expect.push((i, j));
                    }
                }
            }
        }
        let mut got = g.edges.clone();
        got.sort();
        expect.sort();
        assert_eq!(got, expect);
    }

    #[test]
    fn cosine_cases() {
        assert_abs_diff_eq!(cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap(),
            0.7071067811865475,
            epsilon = 1e-10
        );
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err(), GraphError::ZeroVector);
    }

    #[test]
    fn relation_graph_single_and_orthogonal() {
        let g = build_relation_graph(&[("a".into(), alloc::vec![1.0, 0.0])], 4).unwrap();
        assert_eq!(g.neighbors, alloc::vec![alloc::vec![(0, 1.0)]]);

        let ents = alloc::vec![
            ("a".to_string(), alloc::vec![1.0, 0.0, 0.0]),
            ("b".to_string(), alloc::vec![0.0, 1.0, 0.0]),
            ("c".to_string(), alloc::vec![0.0, 0.0, 1.0]),
        ];
        let g = build_relation_graph(&ents, 2).unwrap();
        for (i, nbrs) in g.neighbors.iter().enumerate() {
            for &(j, w) in nbrs {
                if i == j {
                    assert_eq!(w, 1.0);
                } else {
                    assert_eq!(w, 0.0);
                }
            }
        }
    }

    #[test]
    fn full_knn_equals_dense_matrix() {
        let mut rng = crate::rng::SplitMix64::new(5);
        let ents: Vec<(String, Vec<f64>)> = (0..10)
            .map(|i| (format!("e{i}"), (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()))
            .collect();
        let g = build_relation_graph(&ents, 10).unwrap();
        for i in 0..10 {
            assert_eq!(g.neighbors[i].len(), 10);
            for &(j, w) in &g.neighbors[i] {
                let expect = if i == j { 1.0 } else { cosine(&ents[i].1, &ents[j].1).unwrap() };
                assert_abs_diff_eq!(w, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn adjacency_symmetric_with_unit_diagonal() {
        let mut rng = crate::rng::SplitMix64::new(6);
        let ents: Vec<(String, Vec<f64>)> = (0..8)
            .map(|i| (format!("e{i}"), (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect()))
            .collect();
        let g = build_relation_graph(&ents, 3).unwrap();
        for i in 0..8 {
            assert!(g.neighbors[i].iter().any(|&(j, w)| j == i && w == 1.0));
            for &(j, w) in &g.neighbors[i] {
                assert!((-1.0..=1.0).contains(&w));
                let back = g.neighbors[j].iter().find(|&&(k, _)| k == i).unwrap();
                assert_abs_diff_eq!(back.1, w, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn embedding_round_trip_and_errors() {
        let mut store = EmbeddingStore::new(3);
        store.insert("x", 2, alloc::vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let bytes = write_embeddings(&store);
        let read = read_embeddings(&bytes).unwrap();
        assert_eq!(read.get("x").unwrap().0, 2);
        assert_eq!(read.get("x").unwrap().1, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // Canonical format: write(read(f)) is byte-identical.
        assert_eq!(write_embeddings(&read), bytes);

        assert_eq!(read_embeddings(b"NOPE").unwrap_err(), EmbeddingError::BadMagic);
        assert_eq!(
            read_embeddings(&bytes[..bytes.len() - 2]).unwrap_err(),
            EmbeddingError::TruncatedRecord
        );
        assert_eq!(
            store.insert("x", 1, alloc::vec![0.0; 3]).unwrap_err(),
            EmbeddingError::DuplicateId { id: "x".into() }
        );
        assert_eq!(store.insert("y", 2, alloc::vec![0.0; 5]).unwrap_err(), EmbeddingError::DimMismatch);
    }

    #[test]
    fn mixed_dim_records_rejected() {
        // Hand-build a file with two records of different dims.
        let mut a = EmbeddingStore::new(2);
        a.insert("a", 1, alloc::vec![1.0, 2.0]).unwrap();
        let mut bytes = write_embeddings(&a);
        // Bump record count and append a dim-3 record.
        bytes[8] = 2;
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.push(b'b');
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for v in [1.0f32, 2.0, 3.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(read_embeddings(&bytes).unwrap_err(), EmbeddingError::DimMismatch);
    }
}
