//! Full interaction predictor: structural attention branch, relation-graph
//! sequence branch, shared-MLP fusion, prediction head, losses, and the
//! training loop.

use alloc::format;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::basis::BasisConfig;
use crate::graph::{build_relation_graph, GraphError, RelationGraph, StructuralGraph};
use crate::layers::{gat_forward, gcn_forward, readout, GatBlock, NormAdaptiveGcn};
use crate::nn::{save_checkpoint, Adam, NodeId, Parameter, Tape, Tensor};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Affinity,
    Neutralization,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub task: Task,
    /// Learned amino-acid class embedding width.
    pub embed_dim: usize,
    pub hidden: usize,
    pub gat_layers: usize,
    pub gcn_layers: usize,
    pub dropout: f64,
    /// Center-and-scale target for the relation GCN.
    pub s: f64,
    /// Width of the pooled sequence embeddings fed to the model.
    pub seq_dim: usize,
    pub knn_k: usize,
    pub basis: BasisConfig,
    pub use_structure: bool,
    pub use_sequence: bool,
    pub use_smlp: bool,
    /// Tolerate missing structure files: the structural summary becomes a
    /// zero vector with its presence flag cleared.
    pub sequence_only: bool,
}

impl Default for ModelConfig {
    fn default() -> ModelConfig {
        ModelConfig {
            task: Task::Affinity,
            embed_dim: 64,
            hidden: 128,
            gat_layers: 2,
            gcn_layers: 2,
            dropout: 0.1,
            s: 1.0,
            seq_dim: 64,
            knn_k: 32,
            basis: BasisConfig::default(),
            use_structure: true,
            use_sequence: true,
            use_smlp: true,
            sequence_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for LossConfig {
    fn default() -> LossConfig {
        LossConfig { lambda: 5e-4, lambda1: 5e-4, lambda2: 5e-4 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    MissingModality { pair_id: String },
    LengthMismatch,
    EmptySplit,
    Graph(GraphError),
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::MissingModality { pair_id } => {
                write!(f, "pair '{pair_id}' lacks an input required in this mode")
            }
            ModelError::LengthMismatch => write!(f, "prediction/label length mismatch"),
            ModelError::EmptySplit => write!(f, "empty train or validation split"),
            ModelError::Graph(e) => write!(f, "{e}"),
        }
    }
}

impl From<GraphError> for ModelError {
    fn from(e: GraphError) -> ModelError {
        ModelError::Graph(e)
    }
}

/// One antibody-antigen pairing ready for the model: pooled per-chain
/// sequence embeddings plus optional precomputed structural graphs.
#[derive(Debug, Clone)]
pub struct PairData {
    pub pair_id: String,
    pub heavy_pooled: Vec<f64>,
    pub light_pooled: Option<Vec<f64>>,
    pub ag_pooled: Vec<f64>,
    pub ab_graph: Option<StructuralGraph>,
    pub ag_graph: Option<StructuralGraph>,
    pub label: f64,
}

/// Mean over rows of a row-major (rows x dim) embedding matrix.
pub fn mean_pool(rows: usize, dim: usize, data: &[f64]) -> Vec<f64> {
    assert_eq!(data.len(), rows * dim);
    assert!(rows >= 1);
    let mut out = vec![0.0; dim];
    for r in 0..rows {
        for c in 0..dim {
            out[c] += data[r * dim + c] / rows as f64;
        }
    }
    out
}

/// A full dataset with the flattened entity layout used by the relation
/// graphs: heavy and light chains are separate antibody-side entities,
/// antigens their own population.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pairs: Vec<PairData>,
    pub ab_ids: Vec<String>,
    pub ag_ids: Vec<String>,
    pub ab_pool: Tensor,
    pub ag_pool: Tensor,
    pub heavy_idx: Vec<usize>,
    pub light_idx: Vec<Option<usize>>,
}

impl Dataset {
    pub fn new(pairs: Vec<PairData>) -> Dataset {
        assert!(!pairs.is_empty(), "dataset must be nonempty");
        let dim = pairs[0].heavy_pooled.len();
        let mut ab_ids = Vec::new();
        let mut ab_rows: Vec<f64> = Vec::new();
        let mut ag_ids = Vec::new();
        let mut ag_rows: Vec<f64> = Vec::new();
        let mut heavy_idx = Vec::new();
        let mut light_idx = Vec::new();
        for p in &pairs {
            assert_eq!(p.heavy_pooled.len(), dim, "embedding width mismatch");
            assert_eq!(p.ag_pooled.len(), dim, "embedding width mismatch");
            heavy_idx.push(ab_ids.len());
            ab_ids.push(format!("{}:H", p.pair_id));
            ab_rows.extend_from_slice(&p.heavy_pooled);
            if let Some(l) = &p.light_pooled {
                assert_eq!(l.len(), dim, "embedding width mismatch");
                light_idx.push(Some(ab_ids.len()));
                ab_ids.push(format!("{}:L", p.pair_id));
                ab_rows.extend_from_slice(l);
            } else {
                light_idx.push(None);
            }
            ag_ids.push(format!("{}:G", p.pair_id));
            ag_rows.extend_from_slice(&p.ag_pooled);
        }
        let ab_pool = Tensor::from_rows(ab_ids.len(), dim, ab_rows);
        let ag_pool = Tensor::from_rows(ag_ids.len(), dim, ag_rows);
        Dataset { pairs, ab_ids, ag_ids, ab_pool, ag_pool, heavy_idx, light_idx }
    }

    pub fn labels(&self, idxs: &[usize]) -> Vec<f64> {
        idxs.iter().map(|&i| self.pairs[i].label).collect()
    }
}

pub struct InteractionModel {
    pub cfg: ModelConfig,
    pub class_embed: Parameter,
    pub residue_stack: Vec<GatBlock>,
    pub backbone_stack: Vec<GatBlock>,
    pub sidechain_stack: Vec<GatBlock>,
    pub seq_res_w: Parameter,
    pub seq_res_b: Parameter,
    pub seq_fc_w: Parameter,
    pub seq_fc_b: Parameter,
    pub ab_gcn: NormAdaptiveGcn,
    pub ag_gcn: NormAdaptiveGcn,
    pub smlp_w1: Parameter,
    pub smlp_b1: Parameter,
    pub smlp_w2: Parameter,
    pub smlp_b2: Parameter,
    pub head_w1: Parameter,
    pub head_b1: Parameter,
    pub head_w2: Parameter,
    pub head_b2: Parameter,
    /// Affinity label standardization captured at train time, stored as a
    /// 1x2 (mean, std) tensor so it rides along in checkpoints.
    pub label_scale: Parameter,
}

const NUM_CLASSES: usize = crate::structure::NUM_AMINO_ACID_CLASSES;

impl InteractionModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> InteractionModel {
        let mut rng = SplitMix64::new(seed);
        let h = cfg.hidden;
        let b = &cfg.basis;
        let mut stack = |prefix: &str, node_dim: usize, edge_dim: usize| -> Vec<GatBlock> {
            (0..cfg.gat_layers)
                .map(|i| {
                    let d_in = if i == 0 { node_dim } else { h };
                    GatBlock::new(&format!("{prefix}.{i}"), d_in, edge_dim, h, &mut rng)
                })
                .collect()
        };
        let residue_stack = stack("residue_gat", cfg.embed_dim, b.tbf_len() + b.sbf_len());
        let backbone_stack = stack("backbone_gat", cfg.embed_dim, 3 * b.sbf_len());
        let sidechain_stack = stack("sidechain_gat", cfg.embed_dim + 8, b.rbf_len());

        let gcn_dims: Vec<usize> = core::iter::repeat(h).take(cfg.gcn_layers + 1).collect();
        let ab_gcn = NormAdaptiveGcn::new("ab_gcn", &gcn_dims, cfg.s, cfg.dropout, &mut rng);
        let ag_gcn = NormAdaptiveGcn::new("ag_gcn", &gcn_dims, cfg.s, cfg.dropout, &mut rng);

        let fuse_in = 3 * h + 1;
        let head_in = 2 * if cfg.use_smlp { h } else { fuse_in };
        InteractionModel {
            class_embed: Parameter::xavier("class_embed", NUM_CLASSES, cfg.embed_dim, &mut rng),
            residue_stack,
            backbone_stack,
            sidechain_stack,
            seq_res_w: Parameter::xavier("seq_res.weight", cfg.seq_dim, cfg.seq_dim, &mut rng),
            seq_res_b: Parameter::zeros("seq_res.bias", 1, cfg.seq_dim),
            seq_fc_w: Parameter::xavier("seq_fc.weight", cfg.seq_dim, h, &mut rng),
            seq_fc_b: Parameter::zeros("seq_fc.bias", 1, h),
            ab_gcn,
            ag_gcn,
            smlp_w1: Parameter::xavier("smlp.0.weight", fuse_in, h, &mut rng),
            smlp_b1: Parameter::zeros("smlp.0.bias", 1, h),
            smlp_w2: Parameter::xavier("smlp.1.weight", h, h, &mut rng),
            smlp_b2: Parameter::zeros("smlp.1.bias", 1, h),
            head_w1: Parameter::xavier("head.0.weight", head_in, h, &mut rng),
            head_b1: Parameter::zeros("head.0.bias", 1, h),
            head_w2: Parameter::xavier("head.1.weight", h, 1, &mut rng),
            head_b2: Parameter::zeros("head.1.bias", 1, 1),
            label_scale: Parameter::new("label_scale", Tensor::row(vec![0.0, 1.0])),
            cfg,
        }
    }

    /// Every trainable parameter active in the configured mode, in a fixed
    /// order.
    pub fn params(&self) -> Vec<Parameter> {
        let mut out = Vec::new();
        if self.cfg.use_structure {
            out.push(self.class_embed.clone());
            for s in [&self.residue_stack, &self.backbone_stack, &self.sidechain_stack] {
                for b in s.iter() {
                    out.extend(b.params());
                }
            }
        }
        if self.cfg.use_sequence {
            out.push(self.seq_res_w.clone());
            out.push(self.seq_res_b.clone());
            out.push(self.seq_fc_w.clone());
            out.push(self.seq_fc_b.clone());
            out.extend(self.ab_gcn.params());
            out.extend(self.ag_gcn.params());
        }
        if self.cfg.use_smlp {
            out.push(self.smlp_w1.clone());
            out.push(self.smlp_b1.clone());
            out.push(self.smlp_w2.clone());
            out.push(self.smlp_b2.clone());
        }
        out.push(self.head_w1.clone());
        out.push(self.head_b1.clone());
        out.push(self.head_w2.clone());
        out.push(self.head_b2.clone());
        out
    }

    /// Active weight matrices (biases excluded) for the L2 penalty.
    pub fn weight_params(&self) -> Vec<Parameter> {
        self.params().into_iter().filter(|p| !p.name().ends_with(".bias")).collect()
    }

    /// Parameters persisted in checkpoints: all trainables plus the label
    /// standardization constants.
    pub fn checkpoint_params(&self) -> Vec<Parameter> {
        let mut out = self.params();
        out.push(self.label_scale.clone());
        out
    }

    pub fn set_label_scale(&mut self, mean: f64, std: f64) {
        self.label_scale.set_value(Tensor::row(vec![mean, std.max(1e-12)]));
    }

    pub fn label_scale_values(&self) -> (f64, f64) {
        let v = self.label_scale.value();
        (v.data[0], v.data[1])
    }

    /// Numeric (tape-free, eval-mode) sequence pipeline, used to rebuild
    /// the relation graphs from current weights.
    fn seq_embed_values(&self, pool: &Tensor) -> Tensor {
        let res = pool.matmul(&self.seq_res_w.value());
        let mut r = pool.clone();
        for i in 0..r.rows {
            for c in 0..r.cols {
                *r.at_mut(i, c) += res.at(i, c) + self.seq_res_b.value().at(0, c);
            }
        }
        let mut h = r.matmul(&self.seq_fc_w.value());
        for i in 0..h.rows {
            for c in 0..h.cols {
                *h.at_mut(i, c) += self.seq_fc_b.value().at(0, c);
            }
        }
        h
    }

    /// Rebuild both relation graphs from the current sequence-pipeline
    /// output (done once per epoch during training).
    pub fn build_relations(&self, ds: &Dataset) -> Result<(RelationGraph, RelationGraph), ModelError> {
        let hab = self.seq_embed_values(&ds.ab_pool);
        let hag = self.seq_embed_values(&ds.ag_pool);
        let rows = |ids: &[String], h: &Tensor| -> Vec<(String, Vec<f64>)> {
            ids.iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), (0..h.cols).map(|c| h.at(i, c)).collect()))
                .collect()
        };
        let ab = build_relation_graph(&rows(&ds.ab_ids, &hab), self.cfg.knn_k)?;
        let ag = build_relation_graph(&rows(&ds.ag_ids, &hag), self.cfg.knn_k)?;
        Ok((ab, ag))
    }

    fn run_stack(
        &self,
        t: &Tape,
        stack: &[GatBlock],
        input: NodeId,
        n: usize,
        edges: &[(usize, usize)],
        ef: NodeId,
    ) -> NodeId {
        let mut h = input;
        let last = stack.len() - 1;
        for (li, b) in stack.iter().enumerate() {
            h = gat_forward(t, b, h, n, edges, ef);
            if li < last {
                h = t.leaky_relu(h, 0.2);
            }
        }
        h
    }

    /// Structural summary vector for one protein: three-level attention
    /// stacks summed, sum-readout, plus a trailing presence flag.
    fn structural_g(
        &self,
        t: &Tape,
        graph: Option<&StructuralGraph>,
        pair_id: &str,
    ) -> Result<NodeId, ModelError> {
        let width = self.cfg.hidden + 1;
        if !self.cfg.use_structure {
            return Ok(t.constant(Tensor::zeros(1, width)));
        }
        let Some(g) = graph else {
            if self.cfg.sequence_only {
                return Ok(t.constant(Tensor::zeros(1, width)));
            }
            return Err(ModelError::MissingModality { pair_id: pair_id.into() });
        };
        let classes: Rc<Vec<usize>> = Rc::new(g.node_class.iter().map(|&c| c as usize).collect());
        let embed = t.param(&self.class_embed);
        let base = t.gather_rows(embed, classes);
        let flat = |feats: &Vec<Vec<f64>>, cols: usize| -> Tensor {
            let mut data = Vec::with_capacity(feats.len() * cols);
            for f in feats {
                data.extend_from_slice(f);
            }
            Tensor::from_rows(feats.len(), cols, data)
        };
        let b = &self.cfg.basis;
        let ef_res = t.constant(flat(&g.edge_feat_residue, b.tbf_len() + b.sbf_len()));
        let ef_bb = t.constant(flat(&g.edge_feat_backbone, 3 * b.sbf_len()));
        let ef_sc = t.constant(flat(&g.edge_feat_sidechain, b.rbf_len()));
        let mut sc_data = Vec::with_capacity(g.n * 8);
        for row in &g.side_chain_feat {
            sc_data.extend_from_slice(row);
        }
        let sc_nodes = t.concat_cols(&[base, t.constant(Tensor::from_rows(g.n, 8, sc_data))]);

        let r = self.run_stack(t, &self.residue_stack, base, g.n, &g.edges, ef_res);
        let bb = self.run_stack(t, &self.backbone_stack, base, g.n, &g.edges, ef_bb);
        let sc = self.run_stack(t, &self.sidechain_stack, sc_nodes, g.n, &g.edges, ef_sc);
        let summed = t.add(t.add(r, bb), sc);
        let pooled = readout(t, summed);
        Ok(t.concat_cols(&[pooled, t.constant(Tensor::from_rows(1, 1, vec![1.0]))]))
    }

    fn seq_embed_tape(&self, t: &Tape, pool: &Tensor, rng: &mut SplitMix64, training: bool) -> NodeId {
        let x = t.dropout(t.constant(pool.clone()), self.cfg.dropout, rng, training);
        let res = t.add_row(t.matmul(x, t.param(&self.seq_res_w)), t.param(&self.seq_res_b));
        let r = t.add(x, res);
        t.add_row(t.matmul(r, t.param(&self.seq_fc_w)), t.param(&self.seq_fc_b))
    }

    fn mlp2(
        &self,
        t: &Tape,
        x: NodeId,
        w1: &Parameter,
        b1: &Parameter,
        w2: &Parameter,
        b2: &Parameter,
    ) -> NodeId {
        let h = t.leaky_relu(t.add_row(t.matmul(x, t.param(w1)), t.param(b1)), 0.2);
        t.add_row(t.matmul(h, t.param(w2)), t.param(b2))
    }

    /// Raw head outputs for the listed pairs: standardized-label space for
    /// affinity, logits for neutralization. Returns an |idxs| x 1 node.
    pub fn forward_batch(
        &self,
        t: &Tape,
        ds: &Dataset,
        idxs: &[usize],
        relations: Option<&(RelationGraph, RelationGraph)>,
        rng: &mut SplitMix64,
        training: bool,
    ) -> Result<NodeId, ModelError> {
        assert!(!idxs.is_empty(), "empty batch");
        let h = self.cfg.hidden;
        let (hab, hag) = if self.cfg.use_sequence {
            let (rel_ab, rel_ag) = relations.expect("sequence mode needs relation graphs");
            let ab0 = self.seq_embed_tape(t, &ds.ab_pool, rng, training);
            let ag0 = self.seq_embed_tape(t, &ds.ag_pool, rng, training);
            (
                Some(gcn_forward(t, &self.ab_gcn, rel_ab, ab0, rng, training)),
                Some(gcn_forward(t, &self.ag_gcn, rel_ag, ag0, rng, training)),
            )
        } else {
            (None, None)
        };

        let mut preds = Vec::with_capacity(idxs.len());
        for &i in idxs {
            let pair = &ds.pairs[i];
            let g_b = self.structural_g(t, pair.ab_graph.as_ref(), &pair.pair_id)?;
            let g_g = self.structural_g(t, pair.ag_graph.as_ref(), &pair.pair_id)?;
            let (h_b, h_g) = match (hab, hag) {
                (Some(hab), Some(hag)) => {
                    let heavy = t.gather_rows(hab, Rc::new(vec![ds.heavy_idx[i]]));
                    let light = match ds.light_idx[i] {
                        Some(li) => t.gather_rows(hab, Rc::new(vec![li])),
                        None => t.constant(Tensor::zeros(1, h)),
                    };
                    let ag = t.gather_rows(hag, Rc::new(vec![i]));
                    (t.concat_cols(&[heavy, light]), t.concat_cols(&[ag, ag]))
                }
                _ => (
                    t.constant(Tensor::zeros(1, 2 * h)),
                    t.constant(Tensor::zeros(1, 2 * h)),
                ),
            };
            let z_b = t.concat_cols(&[g_b, h_b]);
            let z_g = t.concat_cols(&[g_g, h_g]);
            let (f_b, f_g) = if self.cfg.use_smlp {
                (
                    self.mlp2(t, z_b, &self.smlp_w1, &self.smlp_b1, &self.smlp_w2, &self.smlp_b2),
                    self.mlp2(t, z_g, &self.smlp_w1, &self.smlp_b1, &self.smlp_w2, &self.smlp_b2),
                )
            } else {
                (z_b, z_g)
            };
            let fused = t.concat_cols(&[f_b, f_g]);
            preds.push(self.mlp2(t, fused, &self.head_w1, &self.head_b1, &self.head_w2, &self.head_b2));
        }
        Ok(t.concat_rows(&preds))
    }

    /// Inference predictions in label units: de-standardized values for
    /// affinity, probabilities for neutralization.
    pub fn predict(&self, ds: &Dataset, idxs: &[usize]) -> Result<Vec<f64>, ModelError> {
        let relations =
            if self.cfg.use_sequence { Some(self.build_relations(ds)?) } else { None };
        let t = Tape::new();
        let mut rng = SplitMix64::new(0);
        let raw = self.forward_batch(&t, ds, idxs, relations.as_ref(), &mut rng, false)?;
        let out = match self.cfg.task {
            Task::Affinity => {
                let (mean, std) = self.label_scale_values();
                t.value(raw).data.iter().map(|v| v * std + mean).collect()
            }
            Task::Neutralization => t.value(t.sigmoid(raw)).data,
        };
        Ok(out)
    }
}

fn weight_penalty(t: &Tape, model: &InteractionModel, lambda: f64) -> NodeId {
    let mut total = t.constant(Tensor::scalar(0.0));
    if lambda == 0.0 {
        return total;
    }
    for w in model.weight_params() {
        total = t.add(total, t.scale(t.sum_squares(t.param(&w)), lambda));
    }
    total
}

fn adjacency_penalty(
    model: &InteractionModel,
    relations: Option<&(RelationGraph, RelationGraph)>,
    cfg: &LossConfig,
) -> f64 {
    match relations {
        Some((ab, ag)) if model.cfg.use_sequence => {
            cfg.lambda1 * ab.l1_norm() + cfg.lambda2 * ag.l1_norm()
        }
        _ => 0.0,
    }
}

/// Squared-error sum over the batch plus L1 adjacency penalties and the L2
/// weight penalty. `preds` live in standardized-label space, as do
/// `labels`.
pub fn loss_affinity(
    t: &Tape,
    preds: NodeId,
    labels: &[f64],
    model: &InteractionModel,
    relations: Option<&(RelationGraph, RelationGraph)>,
    cfg: &LossConfig,
) -> Result<NodeId, ModelError> {
    if t.value(preds).rows != labels.len() {
        return Err(ModelError::LengthMismatch);
    }
    let y = t.constant(Tensor::from_rows(labels.len(), 1, labels.to_vec()));
    let data = t.sum_squares(t.sub(preds, y));
    let adj = adjacency_penalty(model, relations, cfg);
    let with_adj = t.add(data, t.constant(Tensor::scalar(adj)));
    Ok(t.add(with_adj, weight_penalty(t, model, cfg.lambda)))
}

/// Bernoulli negative log-likelihood over the batch (probabilities clamped
/// to [1e-7, 1-1e-7]) plus the same penalties. `preds` are logits.
pub fn loss_neutralization(
    t: &Tape,
    preds: NodeId,
    labels: &[f64],
    model: &InteractionModel,
    relations: Option<&(RelationGraph, RelationGraph)>,
    cfg: &LossConfig,
) -> Result<NodeId, ModelError> {
    let n = labels.len();
    if t.value(preds).rows != n {
        return Err(ModelError::LengthMismatch);
    }
    assert!(labels.iter().all(|&y| y == 0.0 || y == 1.0), "labels must be 0/1");
    let p = t.clamp(t.sigmoid(preds), 1e-7, 1.0 - 1e-7);
    let y = t.constant(Tensor::from_rows(n, 1, labels.to_vec()));
    let one_minus_y =
        t.constant(Tensor::from_rows(n, 1, labels.iter().map(|&v| 1.0 - v).collect()));
    let ones = t.constant(Tensor::from_rows(n, 1, vec![1.0; n]));
    let ll_pos = t.mul(y, t.ln(p));
    let ll_neg = t.mul(one_minus_y, t.ln(t.sub(ones, p)));
    let nll = t.scale(t.sum_elems(t.add(ll_pos, ll_neg)), -1.0);
    let adj = adjacency_penalty(model, relations, cfg);
    let with_adj = t.add(nll, t.constant(Tensor::scalar(adj)));
    Ok(t.add(with_adj, weight_penalty(t, model, cfg.lambda)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val: f64,
    /// Checkpoint bytes of the best-validation parameters (already
    /// restored into the model on return).
    pub checkpoint: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub patience: usize,
    pub seed: u64,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lr: 5e-5,
            epochs: 200,
            batch: 32,
            patience: 5,
            seed: 0,
            loss: LossConfig::default(),
        }
    }
}

fn shuffle(idx: &mut [usize], rng: &mut SplitMix64) {
    for i in (1..idx.len()).rev() {
        let j = rng.next_below(i + 1);
        idx.swap(i, j);
    }
}

fn batch_loss(
    model: &InteractionModel,
    t: &Tape,
    ds: &Dataset,
    idxs: &[usize],
    labels: &[f64],
    relations: Option<&(RelationGraph, RelationGraph)>,
    cfg: &LossConfig,
    rng: &mut SplitMix64,
    training: bool,
) -> Result<NodeId, ModelError> {
    let preds = model.forward_batch(t, ds, idxs, relations, rng, training)?;
    match model.cfg.task {
        Task::Affinity => loss_affinity(t, preds, labels, model, relations, cfg),
        Task::Neutralization => loss_neutralization(t, preds, labels, model, relations, cfg),
    }
}

/// Mini-batch Adam training with per-epoch relation-graph rebuild and
/// early stopping on validation loss. Restores and returns the
/// best-validation checkpoint.
pub fn train(
    model: &mut InteractionModel,
    ds: &Dataset,
    train_idx: &[usize],
    val_idx: &[usize],
    tc: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(ModelError::EmptySplit);
    }
    if model.cfg.task == Task::Affinity {
        let ys = ds.labels(train_idx);
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / ys.len() as f64;
        model.set_label_scale(mean, crate::fmath::sqrt(var).max(1e-12));
    }
    let (mean, std) = model.label_scale_values();
    let scale_labels = |raw: Vec<f64>| -> Vec<f64> {
        match model.cfg.task {
            Task::Affinity => raw.into_iter().map(|y| (y - mean) / std).collect(),
            Task::Neutralization => raw,
        }
    };

    let params = model.params();
    let mut opt = Adam::new(params.clone(), tc.lr);
    let mut rng = SplitMix64::new(tc.seed);
    let mut order: Vec<usize> = train_idx.to_vec();
    let val_labels = scale_labels(ds.labels(val_idx));
    let no_penalty = LossConfig { lambda: 0.0, lambda1: 0.0, lambda2: 0.0 };

    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut best_bytes: Vec<u8> = save_checkpoint(&model.checkpoint_params());
    let mut stale = 0usize;

    for epoch in 0..tc.epochs {
        let relations =
            if model.cfg.use_sequence { Some(model.build_relations(ds)?) } else { None };
        shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(tc.batch.max(1)) {
            let labels = scale_labels(ds.labels(chunk));
            let t = Tape::new();
            let loss = batch_loss(
                model, &t, ds, chunk, &labels, relations.as_ref(), &tc.loss, &mut rng, true,
            )?;
            for p in &params {
                p.zero_grad();
            }
            t.backward(loss);
            opt.step();
            epoch_loss += t.value(loss).data[0];
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;

        // Validation: plain data loss, eval mode, no penalties.
        let t = Tape::new();
        let mut eval_rng = SplitMix64::new(0);
        let vloss = batch_loss(
            model, &t, ds, val_idx, &val_labels, relations.as_ref(), &no_penalty,
            &mut eval_rng, false,
        )?;
        let val_loss = t.value(vloss).data[0] / val_idx.len() as f64;
        history.push(EpochStats { epoch, train_loss, val_loss });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_bytes = save_checkpoint(&model.checkpoint_params());
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.patience {
                break;
            }
        }
    }

    crate::nn::restore_into(&model.checkpoint_params(), &best_bytes)
        .expect("own checkpoint restores");
    Ok(TrainReport { history, best_epoch, best_val, checkpoint: best_bytes })
}
