//! On-disk structural-graph cache, keyed by a content hash of the
//! structure bytes, the selected chains, and the basis configuration, so
//! any input or cutoff change invalidates the entry.

use std::path::{Path, PathBuf};

use aaip_core::basis::BasisConfig;
use aaip_core::graph::StructuralGraph;
use sha2::{Digest, Sha256};

const MAGIC: &[u8; 4] = b"SGRF";
const VERSION: u32 = 1;

pub fn cache_key(structure_bytes: &[u8], chains: &[String], basis: &BasisConfig) -> String {
    let mut h = Sha256::new();
    h.update(structure_bytes);
    h.update([0u8]);
    for c in chains {
        h.update(c.as_bytes());
        h.update([b';']);
    }
    h.update(basis.cutoff.to_le_bytes());
    h.update((basis.num_radial as u32).to_le_bytes());
    h.update((basis.num_spherical as u32).to_le_bytes());
    h.update(basis.envelope_exponent.to_le_bytes());
    h.update([u8::from(basis.envelope_enabled)]);
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.sgrf"))
}

fn push_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn encode_graph(g: &StructuralGraph) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    push_u32(&mut out, g.n);
    out.extend_from_slice(&g.node_class);
    for row in &g.side_chain_feat {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    push_u32(&mut out, g.edges.len());
    let widths = [
        g.edge_feat_residue.first().map_or(0, Vec::len),
        g.edge_feat_backbone.first().map_or(0, Vec::len),
        g.edge_feat_sidechain.first().map_or(0, Vec::len),
    ];
    for w in widths {
        push_u32(&mut out, w);
    }
    for (k, &(i, j)) in g.edges.iter().enumerate() {
        push_u32(&mut out, i);
        push_u32(&mut out, j);
        for block in [&g.edge_feat_residue[k], &g.edge_feat_backbone[k], &g.edge_feat_sidechain[k]] {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_graph(bytes: &[u8]) -> Result<StructuralGraph, String> {
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], String> {
        if *pos + n > bytes.len() {
            return Err("truncated graph cache entry".into());
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let u32_at = |pos: &mut usize| -> Result<usize, String> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()) as usize)
    };
    let f64_at = |pos: &mut usize| -> Result<f64, String> {
        Ok(f64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };
    if take(&mut pos, 4)? != MAGIC {
        return Err("bad graph cache magic".into());
    }
    let version = u32_at(&mut pos)?;
    if version != VERSION as usize {
        return Err(format!("unsupported graph cache version {version}"));
    }
    let n = u32_at(&mut pos)?;
    let node_class = take(&mut pos, n)?.to_vec();
    let mut side_chain_feat = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = [0.0f64; 8];
        for slot in &mut row {
            *slot = f64_at(&mut pos)?;
        }
        side_chain_feat.push(row);
    }
    let n_edges = u32_at(&mut pos)?;
    let w_res = u32_at(&mut pos)?;
    let w_bb = u32_at(&mut pos)?;
    let w_sc = u32_at(&mut pos)?;
    let mut edges = Vec::with_capacity(n_edges);
    let mut edge_feat_residue = Vec::with_capacity(n_edges);
    let mut edge_feat_backbone = Vec::with_capacity(n_edges);
    let mut edge_feat_sidechain = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let i = u32_at(&mut pos)?;
        let j = u32_at(&mut pos)?;
        if i >= n || j >= n {
            return Err("graph cache edge endpoint out of range".into());
        }
        edges.push((i, j));
        let mut block = |w: usize| -> Result<Vec<f64>, String> {
            (0..w).map(|_| f64_at(&mut pos)).collect()
        };
        edge_feat_residue.push(block(w_res)?);
        edge_feat_backbone.push(block(w_bb)?);
        edge_feat_sidechain.push(block(w_sc)?);
    }
    if pos != bytes.len() {
        return Err("trailing bytes in graph cache entry".into());
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

#[cfg(test)]
mod tests {
    use super::*;
    use aaip_core::basis::SphericalTable;
    use aaip_core::graph::build_structural_graph;
    use aaip_core::structure::parse_pdb;

    fn atom_line(serial: usize, name: &str, res: &str, chain: char, seq: usize, x: f64, y: f64, z: f64) -> String {
        format!(
            "ATOM  {serial:>5} {name:<4}{res:>4} {chain}{seq:>4}    {x:8.3}{y:8.3}{z:8.3}  1.00  0.00           {}\n",
            &name[..1]
        )
    }

    fn toy_pdb() -> String {
        let mut s = String::new();
        for i in 0..3 {
            let x = 3.8 * i as f64;
            s += &atom_line(3 * i + 1, "N", "ALA", 'A', i + 1, x + 1.2, 0.3, 0.0);
            s += &atom_line(3 * i + 2, "CA", "ALA", 'A', i + 1, x, 0.0, 0.0);
            s += &atom_line(3 * i + 3, "C", "ALA", 'A', i + 1, x + 0.1, 1.0, 0.4);
        }
        s
    }

    #[test]
    fn round_trips_a_real_graph() {
        let cfg = BasisConfig::default();
        let table = SphericalTable::new(&cfg);
        let parsed = parse_pdb(&toy_pdb(), "toy").unwrap();
        let g = build_structural_graph(&parsed.structure, &cfg, &table).unwrap();
        let bytes = encode_graph(&g);
        let back = decode_graph(&bytes).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn decode_rejects_garbage() {
        assert!(decode_graph(b"NOPE").is_err());
        let cfg = BasisConfig::default();
        let table = SphericalTable::new(&cfg);
        let parsed = parse_pdb(&toy_pdb(), "toy").unwrap();
        let g = build_structural_graph(&parsed.structure, &cfg, &table).unwrap();
        let bytes = encode_graph(&g);
        assert!(decode_graph(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn key_changes_with_inputs() {
        let cfg = BasisConfig::default();
        let chains = vec!["A".to_string()];
        let k1 = cache_key(b"data", &chains, &cfg);
        let k2 = cache_key(b"data2", &chains, &cfg);
        let mut cfg2 = cfg.clone();
        cfg2.cutoff = 8.0;
        let k3 = cache_key(b"data", &chains, &cfg2);
        let k4 = cache_key(b"data", &["B".to_string()], &cfg);
        assert_ne!(k1, k2);
        assert_ne!(k1, k3);
        assert_ne!(k1, k4);
        assert_eq!(k1, cache_key(b"data", &chains, &cfg));
    }
}
