use alloc::boxed::Box;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::fmath;
use crate::rng::SplitMix64;

use super::tensor::{Parameter, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

type BackFn = Box<dyn Fn(&Tensor, &mut dyn FnMut(usize, Tensor))>;

enum Kind {
    Leaf(Option<Parameter>),
    Op { parents: Vec<NodeId>, back: BackFn },
}

struct Node {
    value: Tensor,
    kind: Kind,
}

/// Records a forward computation and replays it in reverse to accumulate
/// gradients into the referenced [`Parameter`]s.
///
/// A tape is confined to a single thread and a single training step; build
/// a fresh one per forward/backward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    fn push(&self, value: Tensor, kind: Kind) -> NodeId {
        value.assert_finite("tape op output");
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, kind });
        NodeId(nodes.len() - 1)
    }

    fn value_of(&self, id: NodeId) -> Tensor {
        self.nodes.borrow()[id.0].value.clone()
    }

    pub fn value(&self, id: NodeId) -> Tensor {
        self.value_of(id)
    }

    pub fn constant(&self, t: Tensor) -> NodeId {
        self.push(t, Kind::Leaf(None))
    }

    pub fn param(&self, p: &Parameter) -> NodeId {
        let v = p.value();
        self.push(v, Kind::Leaf(Some(p.clone())))
    }

    pub fn matmul(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value_of(a), self.value_of(b));
        let out = va.matmul(&vb);
        let back: BackFn = Box::new(move |g, emit| {
            emit(0, g.matmul(&vb.transpose()));
            emit(1, va.transpose().matmul(g));
        });
        self.push(out, Kind::Op { parents: vec![a, b], back })
    }

    pub fn add(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value_of(a), self.value_of(b));
        assert!(va.same_shape(&vb), "shape mismatch in add");
        let mut out = va;
        out.add_assign(&vb);
        let back: BackFn = Box::new(move |g, emit| {
            emit(0, g.clone());
            emit(1, g.clone());
        });
        self.push(out, Kind::Op { parents: vec![a, b], back })
    }

    pub fn sub(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value_of(a), self.value_of(b));
        assert!(va.same_shape(&vb), "shape mismatch in sub");
        let out = Tensor {
            rows: va.rows,
            cols: va.cols,
            data: va.data.iter().zip(&vb.data).map(|(x, y)| x - y).collect(),
        };
        let back: BackFn = Box::new(move |g, emit| {
            emit(0, g.clone());
            emit(1, g.map(|v| -v));
        });
        self.push(out, Kind::Op { parents: vec![a, b], back })
    }

    pub fn mul(&self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value_of(a), self.value_of(b));
        assert!(va.same_shape(&vb), "shape mismatch in mul");
        let out = Tensor {
            rows: va.rows,
            cols: va.cols,
            data: va.data.iter().zip(&vb.data).map(|(x, y)| x * y).collect(),
        };
        let back: BackFn = Box::new(move |g, emit| {
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g.data.iter().zip(&vb.data).map(|(gv, y)| gv * y).collect(),
            };
            let db = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g.data.iter().zip(&va.data).map(|(gv, x)| gv * x).collect(),
            };
            emit(0, da);
            emit(1, db);
        });
        self.push(out, Kind::Op { parents: vec![a, b], back })
    }

    pub fn scale(&self, a: NodeId, k: f64) -> NodeId {
        let out = self.value_of(a).map(|v| v * k);
        let back: BackFn = Box::new(move |g, emit| emit(0, g.map(|v| v * k)));
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Broadcast-add a 1 x d row (bias) to every row of an n x d matrix.
    pub fn add_row(&self, mat: NodeId, row: NodeId) -> NodeId {
        let (vm, vr) = (self.value_of(mat), self.value_of(row));
        assert_eq!(vr.rows, 1, "bias must be a row vector");
        assert_eq!(vm.cols, vr.cols, "shape mismatch in add_row");
        let mut out = vm;
        for r in 0..out.rows {
            for c in 0..out.cols {
                *out.at_mut(r, c) += vr.at(0, c);
            }
        }
        let back: BackFn = Box::new(move |g, emit| {
            emit(0, g.clone());
            let mut db = Tensor::zeros(1, g.cols);
            for r in 0..g.rows {
                for c in 0..g.cols {
                    *db.at_mut(0, c) += g.at(r, c);
                }
            }
            emit(1, db);
        });
        self.push(out, Kind::Op { parents: vec![mat, row], back })
    }

    /// Concatenate along columns; all inputs must share the row count.
    pub fn concat_cols(&self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty());
        let vals: Vec<Tensor> = ids.iter().map(|&i| self.value_of(i)).collect();
        let rows = vals[0].rows;
        assert!(vals.iter().all(|v| v.rows == rows), "row mismatch in concat");
        let widths: Vec<usize> = vals.iter().map(|v| v.cols).collect();
        let total: usize = widths.iter().sum();
        let mut out = Tensor::zeros(rows, total);
        let mut off = 0;
        for v in &vals {
            for r in 0..rows {
                for c in 0..v.cols {
                    *out.at_mut(r, off + c) = v.at(r, c);
                }
            }
            off += v.cols;
        }
        let back: BackFn = Box::new(move |g, emit| {
            let mut off = 0;
            for (slot, &w) in widths.iter().enumerate() {
                let mut part = Tensor::zeros(g.rows, w);
                for r in 0..g.rows {
                    for c in 0..w {
                        *part.at_mut(r, c) = g.at(r, off + c);
                    }
                }
                emit(slot, part);
                off += w;
            }
        });
        self.push(out, Kind::Op { parents: ids.to_vec(), back })
    }

    /// Stack matrices with equal column counts on top of each other.
    pub fn concat_rows(&self, ids: &[NodeId]) -> NodeId {
        assert!(!ids.is_empty());
        let vals: Vec<Tensor> = ids.iter().map(|&i| self.value_of(i)).collect();
        let cols = vals[0].cols;
        assert!(vals.iter().all(|v| v.cols == cols), "col mismatch in concat");
        let heights: Vec<usize> = vals.iter().map(|v| v.rows).collect();
        let total: usize = heights.iter().sum();
        let mut out = Tensor::zeros(total, cols);
        let mut off = 0;
        for v in &vals {
            for r in 0..v.rows {
                for c in 0..cols {
                    *out.at_mut(off + r, c) = v.at(r, c);
                }
            }
            off += v.rows;
        }
        let back: BackFn = Box::new(move |g, emit| {
            let mut off = 0;
            for (slot, &h) in heights.iter().enumerate() {
                let mut part = Tensor::zeros(h, g.cols);
                for r in 0..h {
                    for c in 0..g.cols {
                        *part.at_mut(r, c) = g.at(off + r, c);
                    }
                }
                emit(slot, part);
                off += h;
            }
        });
        self.push(out, Kind::Op { parents: ids.to_vec(), back })
    }

    /// Column-wise mean over rows: n x d -> 1 x d.
    pub fn mean_rows(&self, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        let n = va.rows;
        assert!(n > 0, "mean_rows of empty matrix");
        let mut out = Tensor::zeros(1, va.cols);
        for r in 0..n {
            for c in 0..va.cols {
                *out.at_mut(0, c) += va.at(r, c) / n as f64;
            }
        }
        let back: BackFn = Box::new(move |g, emit| {
            let mut da = Tensor::zeros(n, g.cols);
            for r in 0..n {
                for c in 0..g.cols {
                    *da.at_mut(r, c) = g.at(0, c) / n as f64;
                }
            }
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Column-wise sum over rows (graph readout): n x d -> 1 x d.
    pub fn sum_rows(&self, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        let n = va.rows;
        let mut out = Tensor::zeros(1, va.cols);
        for r in 0..n {
            for c in 0..va.cols {
                *out.at_mut(0, c) += va.at(r, c);
            }
        }
        let back: BackFn = Box::new(move |g, emit| {
            let mut da = Tensor::zeros(n, g.cols);
            for r in 0..n {
                for c in 0..g.cols {
                    *da.at_mut(r, c) = g.at(0, c);
                }
            }
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    pub fn leaky_relu(&self, a: NodeId, slope: f64) -> NodeId {
        let va = self.value_of(a);
        let out = va.map(|v| if v >= 0.0 { v } else { slope * v });
        let back: BackFn = Box::new(move |g, emit| {
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g
                    .data
                    .iter()
                    .zip(&va.data)
                    .map(|(gv, x)| if *x >= 0.0 { *gv } else { slope * gv })
                    .collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    pub fn sigmoid(&self, a: NodeId) -> NodeId {
        let out = self.value_of(a).map(|v| 1.0 / (1.0 + fmath::exp(-v)));
        let saved = out.clone();
        let back: BackFn = Box::new(move |g, emit| {
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g.data.iter().zip(&saved.data).map(|(gv, s)| gv * s * (1.0 - s)).collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    pub fn ln(&self, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        let out = va.map(fmath::ln);
        let back: BackFn = Box::new(move |g, emit| {
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g.data.iter().zip(&va.data).map(|(gv, x)| gv / x).collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Clamp to [lo, hi]; gradient passes only strictly inside the interval.
    pub fn clamp(&self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let va = self.value_of(a);
        let out = va.map(|v| v.clamp(lo, hi));
        let back: BackFn = Box::new(move |g, emit| {
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g
                    .data
                    .iter()
                    .zip(&va.data)
                    .map(|(gv, x)| if *x > lo && *x < hi { *gv } else { 0.0 })
                    .collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Inverted dropout: survivors scaled by 1/(1-p); identity in eval mode.
    pub fn dropout(&self, a: NodeId, p: f64, rng: &mut SplitMix64, training: bool) -> NodeId {
        assert!((0.0..1.0).contains(&p), "dropout rate must be in [0, 1)");
        let va = self.value_of(a);
        if !training || p == 0.0 {
            let back: BackFn = Box::new(move |g, emit| emit(0, g.clone()));
            return self.push(va, Kind::Op { parents: vec![a], back });
        }
        let keep = 1.0 - p;
        let mask: Vec<f64> = (0..va.len())
            .map(|_| if rng.next_f64() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let out = Tensor {
            rows: va.rows,
            cols: va.cols,
            data: va.data.iter().zip(&mask).map(|(x, m)| x * m).collect(),
        };
        let back: BackFn = Box::new(move |g, emit| {
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g.data.iter().zip(&mask).map(|(gv, m)| gv * m).collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Softmax of an E x 1 logit column, normalized within each segment.
    /// `segments[e]` assigns logit e to a segment; rows of the output sum
    /// to 1 per segment.
    pub fn softmax_segmented(&self, logits: NodeId, segments: Rc<Vec<usize>>, num_segments: usize) -> NodeId {
        let v = self.value_of(logits);
        assert_eq!(v.cols, 1, "segmented softmax expects a column");
        assert_eq!(v.rows, segments.len(), "segment ids must align with logits");
        let mut max = vec![f64::NEG_INFINITY; num_segments];
        for (e, &s) in segments.iter().enumerate() {
            max[s] = max[s].max(v.data[e]);
        }
        let mut denom = vec![0.0f64; num_segments];
        let mut expv = vec![0.0f64; v.rows];
        for (e, &s) in segments.iter().enumerate() {
            expv[e] = fmath::exp(v.data[e] - max[s]);
            denom[s] += expv[e];
        }
        let out_data: Vec<f64> = segments.iter().enumerate().map(|(e, &s)| expv[e] / denom[s]).collect();
        let out = Tensor { rows: v.rows, cols: 1, data: out_data };
        let alpha = out.clone();
        let segs = segments.clone();
        let back: BackFn = Box::new(move |g, emit| {
            // d logit_e = alpha_e (g_e - sum_{e' in seg} g_e' alpha_e')
            let mut seg_dot = vec![0.0f64; num_segments];
            for (e, &s) in segs.iter().enumerate() {
                seg_dot[s] += g.data[e] * alpha.data[e];
            }
            let da = Tensor {
                rows: g.rows,
                cols: 1,
                data: segs
                    .iter()
                    .enumerate()
                    .map(|(e, &s)| alpha.data[e] * (g.data[e] - seg_dot[s]))
                    .collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![logits], back })
    }

    /// Select rows by index: (n x d, k indices) -> k x d.
    pub fn gather_rows(&self, a: NodeId, idx: Rc<Vec<usize>>) -> NodeId {
        let va = self.value_of(a);
        let mut out = Tensor::zeros(idx.len(), va.cols);
        for (r, &i) in idx.iter().enumerate() {
            for c in 0..va.cols {
                *out.at_mut(r, c) = va.at(i, c);
            }
        }
        let n = va.rows;
        let idx2 = idx.clone();
        let back: BackFn = Box::new(move |g, emit| {
            let mut da = Tensor::zeros(n, g.cols);
            for (r, &i) in idx2.iter().enumerate() {
                for c in 0..g.cols {
                    *da.at_mut(i, c) += g.at(r, c);
                }
            }
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// out[t] = sum over edges e with targets[e] == t of weights[e] * rows[e].
    /// weights is E x 1, rows is E x d, output n_out x d.
    pub fn segment_weighted_sum(
        &self,
        weights: NodeId,
        rows: NodeId,
        targets: Rc<Vec<usize>>,
        n_out: usize,
    ) -> NodeId {
        let (vw, vr) = (self.value_of(weights), self.value_of(rows));
        assert_eq!(vw.cols, 1, "weights must be a column");
        assert_eq!(vw.rows, vr.rows, "weights/rows mismatch");
        assert_eq!(vw.rows, targets.len(), "targets mismatch");
        let mut out = Tensor::zeros(n_out, vr.cols);
        for (e, &t) in targets.iter().enumerate() {
            let w = vw.data[e];
            for c in 0..vr.cols {
                *out.at_mut(t, c) += w * vr.at(e, c);
            }
        }
        let tg = targets.clone();
        let back: BackFn = Box::new(move |g, emit| {
            let mut dw = Tensor::zeros(vw.rows, 1);
            let mut dr = Tensor::zeros(vr.rows, vr.cols);
            for (e, &t) in tg.iter().enumerate() {
                let mut dot = 0.0;
                for c in 0..vr.cols {
                    dot += g.at(t, c) * vr.at(e, c);
                    *dr.at_mut(e, c) = vw.data[e] * g.at(t, c);
                }
                dw.data[e] = dot;
            }
            emit(0, dw);
            emit(1, dr);
        });
        self.push(out, Kind::Op { parents: vec![weights, rows], back })
    }

    /// Sparse propagation: out_i = sum_j w_ij a_j, with `adj[i]` listing
    /// (j, w_ij). The adjacency is a constant.
    pub fn sparse_matmul(&self, adj: Rc<Vec<Vec<(usize, f64)>>>, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        assert_eq!(adj.len(), va.rows, "adjacency/feature mismatch");
        let mut out = Tensor::zeros(va.rows, va.cols);
        for (i, nbrs) in adj.iter().enumerate() {
            for &(j, w) in nbrs {
                for c in 0..va.cols {
                    *out.at_mut(i, c) += w * va.at(j, c);
                }
            }
        }
        let adj2 = adj.clone();
        let back: BackFn = Box::new(move |g, emit| {
            let mut da = Tensor::zeros(g.rows, g.cols);
            for (i, nbrs) in adj2.iter().enumerate() {
                for &(j, w) in nbrs {
                    for c in 0..g.cols {
                        *da.at_mut(j, c) += w * g.at(i, c);
                    }
                }
            }
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    pub fn sum_elems(&self, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        let out = Tensor::scalar(va.sum());
        let (r, c) = (va.rows, va.cols);
        let back: BackFn = Box::new(move |g, emit| {
            let gv = g.data[0];
            emit(0, Tensor { rows: r, cols: c, data: vec![gv; r * c] });
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    pub fn sum_squares(&self, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        let out = Tensor::scalar(va.data.iter().map(|v| v * v).sum());
        let back: BackFn = Box::new(move |g, emit| {
            let gv = g.data[0];
            emit(0, va.map(|v| 2.0 * v * gv));
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Subtract the column mean from every row.
    pub fn center_rows(&self, a: NodeId) -> NodeId {
        let va = self.value_of(a);
        let n = va.rows as f64;
        let mut mean = vec![0.0f64; va.cols];
        for r in 0..va.rows {
            for c in 0..va.cols {
                mean[c] += va.at(r, c) / n;
            }
        }
        let mut out = va.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                *out.at_mut(r, c) -= mean[c];
            }
        }
        let back: BackFn = Box::new(move |g, emit| {
            let n = g.rows as f64;
            let mut gmean = vec![0.0f64; g.cols];
            for r in 0..g.rows {
                for c in 0..g.cols {
                    gmean[c] += g.at(r, c) / n;
                }
            }
            let mut da = g.clone();
            for r in 0..da.rows {
                for c in 0..da.cols {
                    *da.at_mut(r, c) -= gmean[c];
                }
            }
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Rescale so the mean squared row norm equals s^2:
    /// Y = s X / sqrt(q), q = mean_i ||row_i||^2. All-zero input stays zero.
    pub fn scale_to_ms_norm(&self, a: NodeId, s: f64) -> NodeId {
        let va = self.value_of(a);
        let n = va.rows as f64;
        let q: f64 = va.data.iter().map(|v| v * v).sum::<f64>() / n;
        const GUARD: f64 = 1e-24;
        if q < GUARD {
            let out = Tensor::zeros(va.rows, va.cols);
            let back: BackFn = Box::new(move |g, emit| emit(0, Tensor::zeros(g.rows, g.cols)));
            return self.push(out, Kind::Op { parents: vec![a], back });
        }
        let inv = s / fmath::sqrt(q);
        let out = va.map(|v| v * inv);
        let back: BackFn = Box::new(move |g, emit| {
            // dX = s q^{-1/2} G - (s q^{-3/2} / n) (sum G.X) X
            let dot: f64 = g.data.iter().zip(&va.data).map(|(gv, x)| gv * x).sum();
            let coef = s / (q * fmath::sqrt(q)) / n * dot;
            let da = Tensor {
                rows: g.rows,
                cols: g.cols,
                data: g.data.iter().zip(&va.data).map(|(gv, x)| inv * gv - coef * x).collect(),
            };
            emit(0, da);
        });
        self.push(out, Kind::Op { parents: vec![a], back })
    }

    /// Accumulate d(loss)/d(param) into every reachable parameter's grad.
    /// Repeated calls accumulate. Panics if `loss` is not scalar.
    pub fn backward(&self, loss: NodeId) {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.0].value.len(), 1, "backward source must be scalar");
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &nodes[i].kind {
                Kind::Leaf(Some(p)) => p.accumulate_grad(&g),
                Kind::Leaf(None) => {}
                Kind::Op { parents, back } => {
                    let mut emit = |slot: usize, t: Tensor| {
                        let pid = parents[slot].0;
                        match &mut grads[pid] {
                            Some(acc) => acc.add_assign(&t),
                            slot_ref @ None => *slot_ref = Some(t),
                        }
                    };
                    back(&g, &mut emit);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn leaky_relu_values() {
        let t = Tape::new();
        let x = t.constant(Tensor::row(vec![-1.0, 3.0]));
        let y = t.value(t.leaky_relu(x, 0.2));
        assert_eq!(y.data, vec![-0.2, 3.0]);
    }

    #[test]
    fn segmented_softmax_equal_logits() {
        let t = Tape::new();
        let x = t.constant(Tensor::from_rows(3, 1, vec![0.0, 0.0, 0.0]));
        let y = t.value(t.softmax_segmented(x, Rc::new(vec![0, 0, 0]), 1));
        for v in y.data {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn segmented_softmax_rows_sum_to_one() {
        let t = Tape::new();
        let x = t.constant(Tensor::from_rows(5, 1, vec![1.0, -2.0, 0.5, 3.0, 0.1]));
        let segs = vec![0, 1, 0, 1, 1];
        let y = t.value(t.softmax_segmented(x, Rc::new(segs.clone()), 2));
        let mut sums = [0.0f64; 2];
        for (e, &s) in segs.iter().enumerate() {
            sums[s] += y.data[e];
        }
        for s in sums {
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn backward_accumulates_on_repeat() {
        let p = Parameter::new("w", Tensor::scalar(3.0));
        let t = Tape::new();
        let w = t.param(&p);
        let loss = t.sum_squares(w); // d/dw = 2w = 6
        t.backward(loss);
        assert_abs_diff_eq!(p.grad().data[0], 6.0, epsilon = 1e-12);
        t.backward(loss);
        assert_abs_diff_eq!(p.grad().data[0], 12.0, epsilon = 1e-12);
    }

    #[test]
    fn unused_parameter_gets_zero_grad() {
        let used = Parameter::new("a", Tensor::scalar(2.0));
        let unused = Parameter::new("b", Tensor::scalar(5.0));
        let t = Tape::new();
        let a = t.param(&used);
        let _b = t.param(&unused);
        let loss = t.sum_squares(a);
        t.backward(loss);
        assert_eq!(unused.grad().data[0], 0.0);
    }

    #[test]
    #[should_panic(expected = "scalar")]
    fn backward_rejects_non_scalar() {
        let t = Tape::new();
        let x = t.constant(Tensor::row(vec![1.0, 2.0]));
        t.backward(x);
    }

    #[test]
    fn dropout_eval_is_identity_and_preserves_expectation() {
        let t = Tape::new();
        let x = t.constant(Tensor::row(vec![2.0]));
        let mut rng = SplitMix64::new(1);
        let y = t.dropout(x, 0.4, &mut rng, false);
        assert_eq!(t.value(y).data, vec![2.0]);

        // Training mode preserves expectation within 1%.
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let tp = Tape::new();
            let x = tp.constant(Tensor::row(vec![1.0]));
            let y = tp.dropout(x, 0.4, &mut rng, true);
            acc += tp.value(y).data[0];
        }
        let mean = acc / trials as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn non_finite_trips_fault() {
        let t = Tape::new();
        let x = t.constant(Tensor::row(vec![0.0]));
        let _ = t.ln(x); // ln(0) = -inf
    }
}
