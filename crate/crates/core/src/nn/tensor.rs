use alloc::rc::Rc;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::fmath;
use crate::rng::SplitMix64;

/// Dense row-major float64 matrix. Vectors are 1 x d rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(data.len(), rows * cols, "tensor data length mismatch");
        Tensor { rows, cols, data }
    }

    pub fn row(data: Vec<f64>) -> Tensor {
        Tensor { rows: 1, cols: data.len(), data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, o: &Tensor) -> bool {
        self.rows == o.rows && self.cols == o.cols
    }

    pub fn assert_finite(&self, context: &str) {
        for v in &self.data {
            assert!(v.is_finite(), "non-finite value in {context}");
        }
    }

    pub fn add_assign(&mut self, o: &Tensor) {
        assert!(self.same_shape(o), "shape mismatch in add_assign");
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }

    pub fn matmul(&self, o: &Tensor) -> Tensor {
        assert_eq!(self.cols, o.rows, "shape mismatch in matmul: {}x{} * {}x{}",
            self.rows, self.cols, o.rows, o.cols);
        let mut out = Tensor::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = &o.data[k * o.cols..(k + 1) * o.cols];
                let dst = &mut out.data[i * o.cols..(i + 1) * o.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                *out.at_mut(c, r) = self.at(r, c);
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

#[derive(Debug)]
pub(crate) struct ParamData {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named trainable tensor with an accumulated gradient. Cloning shares the
/// underlying storage, which is how weight sharing (the shared MLP) works.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub(crate) inner: Rc<RefCell<ParamData>>,
}

impl Parameter {
    pub fn new(name: &str, value: Tensor) -> Parameter {
        let grad = Tensor::zeros(value.rows, value.cols);
        Parameter {
            inner: Rc::new(RefCell::new(ParamData { name: name.to_string(), value, grad })),
        }
    }

    /// Xavier-uniform initialized matrix, seeded.
    pub fn xavier(name: &str, rows: usize, cols: usize, rng: &mut SplitMix64) -> Parameter {
        let bound = fmath::sqrt(6.0 / (rows + cols) as f64);
        let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
        Parameter::new(name, Tensor::from_rows(rows, cols, data))
    }

    pub fn zeros(name: &str, rows: usize, cols: usize) -> Parameter {
        Parameter::new(name, Tensor::zeros(rows, cols))
    }

    pub fn name(&self) -> String {
        self.inner.borrow().name.clone()
    }

    pub fn value(&self) -> Tensor {
        self.inner.borrow().value.clone()
    }

    pub fn grad(&self) -> Tensor {
        self.inner.borrow().grad.clone()
    }

    pub fn set_value(&self, t: Tensor) {
        let mut d = self.inner.borrow_mut();
        assert!(d.value.same_shape(&t), "shape mismatch setting parameter {}", d.name);
        d.value = t;
    }

    pub fn zero_grad(&self) {
        let mut d = self.inner.borrow_mut();
        let (r, c) = (d.value.rows, d.value.cols);
        d.grad = Tensor::zeros(r, c);
    }

    pub fn accumulate_grad(&self, g: &Tensor) {
        self.inner.borrow_mut().grad.add_assign(g);
    }

    /// True when both handles share storage.
    pub fn shares_storage_with(&self, o: &Parameter) -> bool {
        Rc::ptr_eq(&self.inner, &o.inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_basic() {
        let a = Tensor::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::from_rows(2, 1, vec![1.0, 1.0]);
        assert_eq!(a.matmul(&b).data, vec![3.0, 7.0]);
    }

    #[test]
    fn shared_storage_clone() {
        let p = Parameter::new("w", Tensor::scalar(1.0));
        let q = p.clone();
        q.set_value(Tensor::scalar(5.0));
        assert_eq!(p.value().data[0], 5.0);
        assert!(p.shares_storage_with(&q));
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn matmul_shape_mismatch_panics() {
        let a = Tensor::zeros(2, 3);
        let b = Tensor::zeros(2, 3);
        let _ = a.matmul(&b);
    }
}
