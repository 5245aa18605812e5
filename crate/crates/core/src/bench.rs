//! Label thermodynamics, deterministic k-fold splitting, and the
//! regression/classification evaluation metrics.

use alloc::vec::Vec;

use crate::fmath;
use crate::rng::SplitMix64;

/// Gas constant in kcal/(mol*K).
pub const GAS_CONSTANT_KCAL: f64 = 1.9872e-3;
pub const DEFAULT_TEMPERATURE_K: f64 = 298.0;

#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    NonPositiveKd,
    TooFewRecords,
    LengthMismatch,
}

impl core::fmt::Display for BenchError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BenchError::NonPositiveKd => write!(f, "dissociation constant must be positive"),
            BenchError::TooFewRecords => write!(f, "need at least k records for k folds"),
            BenchError::LengthMismatch => write!(f, "prediction/label length mismatch"),
        }
    }
}

/// Binding free energy from a dissociation constant: R*T*ln(kd).
pub fn dg_from_kd(kd_molar: f64, temperature_k: f64) -> Result<f64, BenchError> {
    if !(kd_molar > 0.0) {
        return Err(BenchError::NonPositiveKd);
    }
    assert!(temperature_k > 0.0, "temperature must be positive");
    Ok(GAS_CONSTANT_KCAL * temperature_k * fmath::ln(kd_molar))
}

/// Mutant free energy from a mutational difference and the wild type.
pub fn dg_from_ddg(ddg: f64, dg_wild: f64) -> f64 {
    ddg + dg_wild
}

/// Seeded shuffle followed by a contiguous partition into k folds. Returns
/// (train, test) index lists per fold; fold sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>, BenchError> {
    assert!(k >= 2, "k must be at least 2");
    if n < k {
        return Err(BenchError::TooFewRecords);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(seed);
    for i in (1..n).rev() {
        let j = rng.next_below(i + 1);
        order.swap(i, j);
    }
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test: Vec<usize> = order[start..start + size].to_vec();
        let train: Vec<usize> =
            order[..start].iter().chain(&order[start + size..]).copied().collect();
        folds.push((train, test));
        start += size;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub pcc: f64,
    /// True when either side had zero variance and pcc was reported as 0.
    pub pcc_degenerate: bool,
}

pub fn regression_metrics(preds: &[f64], labels: &[f64]) -> Result<RegressionMetrics, BenchError> {
    if preds.len() != labels.len() || preds.is_empty() {
        return Err(BenchError::LengthMismatch);
    }
    let n = preds.len() as f64;
    let mae = preds.iter().zip(labels).map(|(p, y)| fmath::abs(p - y)).sum::<f64>() / n;
    let mp = preds.iter().sum::<f64>() / n;
    let my = labels.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vp = 0.0;
    let mut vy = 0.0;
    for (p, y) in preds.iter().zip(labels) {
        cov += (p - mp) * (y - my);
        vp += (p - mp) * (p - mp);
        vy += (y - my) * (y - my);
    }
    let (pcc, pcc_degenerate) =
        if vp == 0.0 || vy == 0.0 { (0.0, true) } else { (cov / fmath::sqrt(vp * vy), false) };
    Ok(RegressionMetrics { mae, pcc, pcc_degenerate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationMetrics {
    pub acc: f64,
    pub f1: f64,
    pub roc_auc: f64,
    /// True when only one class was present and roc_auc was reported as
    /// 0.5.
    pub auc_degenerate: bool,
    pub g_mean: f64,
    pub mcc: f64,
}

/// Standard thresholded classification metrics plus a rank-based ROC-AUC
/// with averaged ties. Zero-denominator conventions: f1 and mcc report 0,
/// single-class roc_auc reports 0.5 flagged.
pub fn classification_metrics(
    probs: &[f64],
    labels: &[f64],
    threshold: f64,
) -> Result<ClassificationMetrics, BenchError> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(BenchError::LengthMismatch);
    }
    assert!(labels.iter().all(|&y| y == 0.0 || y == 1.0), "labels must be 0/1");
    let mut tp = 0.0f64;
    let mut tn = 0.0f64;
    let mut fp = 0.0f64;
    let mut fn_ = 0.0f64;
    for (p, y) in probs.iter().zip(labels) {
        let pos = *p >= threshold;
        match (pos, *y == 1.0) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            (false, false) => tn += 1.0,
        }
    }
    let n = probs.len() as f64;
    let acc = (tp + tn) / n;
    let f1 = if 2.0 * tp + fp + fn_ == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
    let sens = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
    let spec = if tn + fp == 0.0 { 0.0 } else { tn / (tn + fp) };
    let g_mean = fmath::sqrt(sens * spec);
    let mcc_denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    let mcc = if mcc_denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / fmath::sqrt(mcc_denom)
    };

    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = labels.len() - n_pos;
    let (roc_auc, auc_degenerate) = if n_pos == 0 || n_neg == 0 {
        (0.5, true)
    } else {
        // Mann-Whitney rank statistic with averaged ties.
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap().then(a.cmp(&b)));
        let mut ranks = alloc::vec![0.0f64; probs.len()];
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && probs[order[j + 1]] == probs[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &idx in &order[i..=j] {
                ranks[idx] = avg;
            }
            i = j + 1;
        }
        let rank_sum_pos: f64 = labels
            .iter()
            .enumerate()
            .filter(|(_, &y)| y == 1.0)
            .map(|(i, _)| ranks[i])
            .sum();
        let np = n_pos as f64;
        let nn = n_neg as f64;
        ((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn), false)
    };

    Ok(ClassificationMetrics { acc, f1, roc_auc, auc_degenerate, g_mean, mcc })
}
