//! Network building blocks: edge-conditioned graph attention, sum readout,
//! and a GCN over the relation graph with center-and-scale normalization.

use alloc::format;
use alloc::rc::Rc;
use alloc::vec::Vec;

use crate::fmath;
use crate::graph::RelationGraph;
use crate::nn::{NodeId, Parameter, Tape, Tensor};
use crate::rng::SplitMix64;

/// Single-head graph attention with edge features.
///
/// For an edge carrying a message from node j into node i, the logit is
/// LeakyReLU(a_s . Th_s v_i + a_t . Th_t v_j + a_e . Th_e e_ij); the
/// coefficients are a softmax over each target's in-edges and the output is
/// sum_j alpha_ij Th_t v_j. Isolated nodes output the zero vector.
#[derive(Debug, Clone)]
pub struct GatBlock {
    pub theta_s: Parameter,
    pub theta_t: Parameter,
    pub theta_e: Parameter,
    pub a_s: Parameter,
    pub a_t: Parameter,
    pub a_e: Parameter,
    pub leaky_slope: f64,
}

impl GatBlock {
    pub fn new(
        prefix: &str,
        node_dim: usize,
        edge_dim: usize,
        out_dim: usize,
        rng: &mut SplitMix64,
    ) -> GatBlock {
        GatBlock {
            theta_s: Parameter::xavier(&format!("{prefix}.theta_s"), node_dim, out_dim, rng),
            theta_t: Parameter::xavier(&format!("{prefix}.theta_t"), node_dim, out_dim, rng),
            theta_e: Parameter::xavier(&format!("{prefix}.theta_e"), edge_dim, out_dim, rng),
            a_s: Parameter::xavier(&format!("{prefix}.a_s"), out_dim, 1, rng),
            a_t: Parameter::xavier(&format!("{prefix}.a_t"), out_dim, 1, rng),
            a_e: Parameter::xavier(&format!("{prefix}.a_e"), out_dim, 1, rng),
            leaky_slope: 0.2,
        }
    }

    pub fn params(&self) -> Vec<Parameter> {
        alloc::vec![
            self.theta_s.clone(),
            self.theta_t.clone(),
            self.theta_e.clone(),
            self.a_s.clone(),
            self.a_t.clone(),
            self.a_e.clone(),
        ]
    }
}

/// One attention pass. `edges` lists (source, target) message directions;
/// `edge_feats` is an E x edge_dim constant-or-node matrix aligned with it.
pub fn gat_forward(
    t: &Tape,
    block: &GatBlock,
    node_feats: NodeId,
    n: usize,
    edges: &[(usize, usize)],
    edge_feats: NodeId,
) -> NodeId {
    let out_dim = block.theta_t.value().cols;
    if edges.is_empty() {
        return t.constant(Tensor::zeros(n, out_dim));
    }
    let sources = Rc::new(edges.iter().map(|&(s, _)| s).collect::<Vec<_>>());
    let targets = Rc::new(edges.iter().map(|&(_, d)| d).collect::<Vec<_>>());

    let hs = t.matmul(node_feats, t.param(&block.theta_s));
    let ht = t.matmul(node_feats, t.param(&block.theta_t));
    let he = t.matmul(edge_feats, t.param(&block.theta_e));

    let tgt_s = t.gather_rows(hs, targets.clone());
    let src_t = t.gather_rows(ht, sources);

    let score_s = t.matmul(tgt_s, t.param(&block.a_s));
    let score_t = t.matmul(src_t, t.param(&block.a_t));
    let score_e = t.matmul(he, t.param(&block.a_e));
    let logits = t.leaky_relu(t.add(t.add(score_s, score_t), score_e), block.leaky_slope);

    let alpha = t.softmax_segmented(logits, targets.clone(), n);
    t.segment_weighted_sum(alpha, src_t, targets, n)
}

/// Graph readout: elementwise sum over nodes, n x d -> 1 x d.
pub fn readout(t: &Tape, node_feats: NodeId) -> NodeId {
    assert!(t.value(node_feats).rows >= 1, "readout of empty graph");
    t.sum_rows(node_feats)
}

/// GCN over the relation graph with per-layer linear maps and, between
/// layers, center-and-scale normalization, activation, then dropout.
#[derive(Debug, Clone)]
pub struct NormAdaptiveGcn {
    pub weights: Vec<Parameter>,
    pub s: f64,
    pub dropout: f64,
    pub leaky_slope: f64,
}

impl NormAdaptiveGcn {
    pub fn new(prefix: &str, dims: &[usize], s: f64, dropout: f64, rng: &mut SplitMix64) -> NormAdaptiveGcn {
        assert!(dims.len() >= 2, "need at least one layer");
        let weights = (0..dims.len() - 1)
            .map(|i| Parameter::xavier(&format!("{prefix}.layer{i}.weight"), dims[i], dims[i + 1], rng))
            .collect();
        NormAdaptiveGcn { weights, s, dropout, leaky_slope: 0.2 }
    }

    pub fn params(&self) -> Vec<Parameter> {
        self.weights.clone()
    }
}

pub fn gcn_forward(
    t: &Tape,
    net: &NormAdaptiveGcn,
    relation: &RelationGraph,
    node_embs: NodeId,
    rng: &mut SplitMix64,
    training: bool,
) -> NodeId {
    let adj = Rc::new(relation.normalized_weights());
    let mut h = node_embs;
    let last = net.weights.len() - 1;
    for (li, w) in net.weights.iter().enumerate() {
        h = t.matmul(t.sparse_matmul(adj.clone(), h), t.param(w));
        if li < last {
            h = t.scale_to_ms_norm(t.center_rows(h), net.s);
            h = t.leaky_relu(h, net.leaky_slope);
            h = t.dropout(h, net.dropout, rng, training);
        }
    }
    h
}

/// Center columns to zero mean, then rescale so the mean squared row norm
/// equals s^2. An all-zero centered matrix stays zero.
pub fn center_and_scale(h: &Tensor, s: f64) -> Tensor {
    let n = h.rows;
    assert!(n >= 1, "center_and_scale of empty matrix");
    let mut out = h.clone();
    for c in 0..h.cols {
        let mean: f64 = (0..n).map(|r| h.at(r, c)).sum::<f64>() / n as f64;
        for r in 0..n {
            *out.at_mut(r, c) -= mean;
        }
    }
    let q: f64 = out.data.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if q < 1e-24 {
        return Tensor::zeros(h.rows, h.cols);
    }
    let k = s / fmath::sqrt(q);
    out.map(|v| v * k)
}
