use std::fmt;

use crate::error::{Error, Result};
use crate::numcore::Scalar;

/// Dense row-major matrix. Every value in the model (inputs, weights,
/// hidden states, attention) is one of these.
#[derive(Clone, PartialEq)]
pub struct Tensor2<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Tensor2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor2({}x{}) [", self.rows, self.cols)?;
        for r in 0..self.rows.min(6) {
            if r > 0 {
                write!(f, "; ")?;
            }
            let row = self.row(r);
            for (i, v) in row.iter().take(8).enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{v}")?;
            }
            if row.len() > 8 {
                write!(f, ", ..")?;
            }
        }
        if self.rows > 6 {
            write!(f, "; ..")?;
        }
        write!(f, "]")
    }
}

impl<T: Scalar> Tensor2<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Contract(format!(
                "tensor dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape("from_vec", (rows, cols), (data.len(), 1)));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != m {
                return Err(Error::shape("from_rows", (i, r.len()), (n, m)));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(n, m, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "tensor dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        let mut t = Self::zeros(rows, cols);
        t.data.iter_mut().for_each(|v| *v = value);
        t
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; tensors have positive dimensions.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(op, self.shape(), other.shape()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape("matmul", self.shape(), other.shape()));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![T::zero(); n * m];
        for i in 0..n {
            let out_row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: n,
            cols: m,
            data: out,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn tanh_elem(&self) -> Self {
        self.map(T::tanh)
    }

    pub fn sigmoid_elem(&self) -> Self {
        self.map(sigmoid)
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.data[r * self.cols + c]);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// 1×(rows·cols) view of the data in row-major order.
    pub fn flatten_row_major(&self) -> Self {
        Self {
            rows: 1,
            cols: self.data.len(),
            data: self.data.clone(),
        }
    }

    pub fn reshape(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.data.len() {
            return Err(Error::shape("reshape", self.shape(), (rows, cols)));
        }
        Self::from_vec(rows, cols, self.data.clone())
    }

    pub fn concat_cols(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape("concat_cols", self.shape(), other.shape()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// Stacks 1×n row vectors into a k×n matrix.
    pub fn stack_rows(rows: &[&Self]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Contract("stack_rows needs at least one row".into()))?;
        let cols = first.cols;
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.rows != 1 || r.cols != cols {
                return Err(Error::shape("stack_rows", (1, cols), r.shape()));
            }
            data.extend_from_slice(&r.data);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    /// Row `r` as a 1×cols tensor.
    pub fn row_tensor(&self, r: usize) -> Result<Self> {
        if r >= self.rows {
            return Err(Error::Contract(format!(
                "row {r} out of range for {}x{}",
                self.rows, self.cols
            )));
        }
        Self::from_vec(1, self.cols, self.row(r).to_vec())
    }

    /// Row-wise softmax with the row maximum subtracted first.
    pub fn softmax_rows(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            softmax_in_place(out.row_mut(r));
        }
        out
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn max(&self) -> T {
        self.data
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b))
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Converts element type, e.g. `f64` storage into an `f32` model.
    pub fn cast<U: Scalar>(&self) -> Tensor2<U> {
        Tensor2 {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor2 {
        Tensor2::from_rows(rows).unwrap()
    }

    #[test]
    fn identity_matmul() {
        let x = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(Tensor2::identity(2).matmul(&x).unwrap(), x);
    }

    #[test]
    fn row_times_column() {
        let a = t(&[&[1.0, 2.0]]);
        let b = t(&[&[3.0], &[4.0]]);
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor2::<f64>::zeros(2, 3);
        let b = Tensor2::<f64>::zeros(2, 3);
        let msg = a.matmul(&b).unwrap_err().to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
        match a.matmul(&b) {
            Err(Error::Shape { left, right, .. }) => {
                assert_eq!(left, (2, 3));
                assert_eq!(right, (2, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn softmax_symmetric_and_stable() {
        let s = t(&[&[0.0, 0.0], &[1000.0, 0.0]]).softmax_rows();
        assert_eq!(s.row(0), &[0.5, 0.5]);
        assert!((s.get(1, 0) - 1.0).abs() < 1e-12);
        assert!(s.get(1, 1) < 1e-300);
        assert!(s.is_finite());
    }

    #[test]
    fn softmax_matches_direct_formula() {
        let s = t(&[&[1.0, 2.0, 3.0]]).softmax_rows();
        let denom = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (i, x) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((s.get(0, i) - x.exp() / denom).abs() < 1e-15);
        }
    }

    #[test]
    fn elementwise_ops() {
        let z = Tensor2::<f64>::zeros(2, 3);
        assert_eq!(z.tanh_elem(), z);
        assert_eq!(z.sigmoid_elem(), Tensor2::filled(2, 3, 0.5));
        let x = t(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(x.transpose().transpose(), x);
        assert_eq!(x.transpose().row(0), &[1.0, 4.0]);
        assert_eq!(x.hadamard(&x).unwrap().row(1), &[16.0, 25.0, 36.0]);
        assert_eq!(x.add(&x).unwrap(), x.scale(2.0));
        assert!(x.add(&x.transpose()).is_err());
    }

    #[test]
    fn flatten_content_width() {
        let m = Tensor2::<f64>::zeros(10, 200);
        assert_eq!(m.flatten_row_major().shape(), (1, 2000));
    }

    #[test]
    fn concat_and_stack() {
        let a = t(&[&[1.0], &[2.0]]);
        let b = t(&[&[3.0, 4.0], &[5.0, 6.0]]);
        let c = a.concat_cols(&b).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let r0 = c.row_tensor(0).unwrap();
        let r1 = c.row_tensor(1).unwrap();
        assert_eq!(Tensor2::stack_rows(&[&r0, &r1]).unwrap(), c);
        assert!(a
            .concat_cols(&b.transpose().row_tensor(0).unwrap())
            .is_err());
    }

    #[test]
    fn rejects_zero_dimensions() {
        assert!(Tensor2::<f64>::from_vec(0, 3, vec![]).is_err());
        assert!(Tensor2::<f64>::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let a = Tensor2::<f32>::from_rows(&[[1.0f32, 2.0]]).unwrap();
        let b = Tensor2::<f32>::from_rows(&[[3.0f32], [4.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0f32]);
        let s = Tensor2::<f32>::from_rows(&[[100.0f32, 0.0]])
            .unwrap()
            .softmax_rows();
        assert!(s.is_finite());
    }
}
