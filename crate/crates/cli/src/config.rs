//! Run configuration: a single JSON document with strict key checking.
//! Every CLI flag mirrors a config key and wins over the file value.

use std::path::{Path, PathBuf};

use aaip_core::basis::BasisConfig;
use aaip_core::model::{LossConfig, ModelConfig, Task, TrainConfig};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "d_task")]
    pub task: String,
    pub manifest: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    #[serde(default = "d_out")]
    pub out_dir: PathBuf,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch: usize,
    #[serde(default = "d_patience")]
    pub patience: usize,
    #[serde(default = "d_cutoff")]
    pub cutoff: f64,
    #[serde(default = "d_knn")]
    pub knn_k: usize,
    #[serde(default = "d_s")]
    pub s: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_lambda")]
    pub lambda1: f64,
    #[serde(default = "d_lambda")]
    pub lambda2: f64,
    #[serde(default = "d_hidden")]
    pub hidden: usize,
    #[serde(default = "d_layers")]
    pub layers: usize,
    #[serde(default = "d_embed")]
    pub embed_dim: usize,
    #[serde(default = "d_dropout")]
    pub dropout: f64,
    #[serde(default = "d_radial")]
    pub num_radial: usize,
    #[serde(default = "d_spherical")]
    pub num_spherical: usize,
    #[serde(default = "d_envelope")]
    pub envelope_exponent: usize,
    #[serde(default = "d_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sequence_only: bool,
    #[serde(default)]
    pub no_structure: bool,
    #[serde(default)]
    pub no_plm: bool,
    #[serde(default)]
    pub no_smlp: bool,
    #[serde(default = "d_jobs")]
    pub jobs: usize,
}

fn d_task() -> String { "affinity".into() }
fn d_out() -> PathBuf { PathBuf::from("out") }
fn d_lr() -> f64 { 5e-5 }
fn d_epochs() -> usize { 200 }
fn d_batch() -> usize { 32 }
fn d_patience() -> usize { 5 }
fn d_cutoff() -> f64 { 10.0 }
fn d_knn() -> usize { 32 }
fn d_s() -> f64 { 1.0 }
fn d_lambda() -> f64 { 5e-4 }
fn d_hidden() -> usize { 128 }
fn d_layers() -> usize { 2 }
fn d_embed() -> usize { 64 }
fn d_dropout() -> f64 { 0.1 }
fn d_radial() -> usize { 6 }
fn d_spherical() -> usize { 7 }
fn d_envelope() -> usize { 6 }
fn d_folds() -> usize { 10 }
fn d_jobs() -> usize { 1 }

impl Default for RunConfig {
    fn default() -> RunConfig {
        serde_json::from_str("{}").expect("defaults parse")
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }

    pub fn task(&self) -> Result<Task, String> {
        match self.task.as_str() {
            "affinity" => Ok(Task::Affinity),
            "neutralization" => Ok(Task::Neutralization),
            other => Err(format!("unknown task '{other}' (expected affinity or neutralization)")),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.task()?;
        let positives: [(&str, f64); 7] = [
            ("lr", self.lr),
            ("cutoff", self.cutoff),
            ("s", self.s),
            ("epochs", self.epochs as f64),
            ("batch", self.batch as f64),
            ("hidden", self.hidden as f64),
            ("folds", self.folds as f64),
        ];
        for (key, v) in positives {
            if !(v > 0.0) {
                return Err(format!("config key '{key}' must be positive"));
            }
        }
        for (key, v) in [("lambda", self.lambda), ("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if v < 0.0 {
                return Err(format!("config key '{key}' must be non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err("config key 'dropout' must be in [0, 1)".into());
        }
        Ok(())
    }

    pub fn basis(&self) -> BasisConfig {
        BasisConfig {
            cutoff: self.cutoff,
            num_radial: self.num_radial,
            num_spherical: self.num_spherical,
            envelope_exponent: self.envelope_exponent as u32,
            envelope_enabled: true,
        }
    }

    pub fn model_config(&self, task: Task, seq_dim: usize) -> ModelConfig {
        ModelConfig {
            task,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            gat_layers: self.layers,
            gcn_layers: self.layers,
            dropout: self.dropout,
            s: self.s,
            seq_dim,
            knn_k: self.knn_k,
            basis: self.basis(),
            use_structure: !self.no_structure,
            use_sequence: !self.no_plm,
            use_smlp: !self.no_smlp,
            sequence_only: self.sequence_only,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            epochs: self.epochs,
            batch: self.batch,
            patience: self.patience,
            seed: self.seed,
            loss: LossConfig { lambda: self.lambda, lambda1: self.lambda1, lambda2: self.lambda2 },
        }
    }
}
