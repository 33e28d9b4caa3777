//! Operators on a product of labelled legs.
//!
//! Row/column indices use row-major ordering of the legs in `labels`, so the last
//! leg varies fastest. Operations may change the leg order; callers always address
//! legs by label.

use crate::tensor::{ComplexMatrix, C64, ZERO};

#[derive(Clone, Debug)]
pub struct LegOperator {
    labels: Vec<usize>,
    dims: Vec<usize>,
    matrix: ComplexMatrix,
}

impl LegOperator {
    pub fn new(labels: Vec<usize>, dims: Vec<usize>, matrix: ComplexMatrix) -> Self {
        assert_eq!(labels.len(), dims.len(), "one dimension per label");
        let total: usize = dims.iter().product();
        assert_eq!(matrix.nrows(), total, "row count must match legs");
        assert_eq!(matrix.ncols(), total, "column count must match legs");
        Self {
            labels,
            dims,
            matrix,
        }
    }

    pub fn identity(labels: Vec<usize>, dims: Vec<usize>) -> Self {
        let total: usize = dims.iter().product();
        Self::new(labels, dims, ComplexMatrix::identity(total, total))
    }

    /// |0..0><0..0| on the given legs.
    pub fn zero_projector(labels: Vec<usize>, dims: Vec<usize>) -> Self {
        let total: usize = dims.iter().product();
        let mut m = ComplexMatrix::zeros(total, total);
        m[(0, 0)] = C64::new(1.0, 0.0);
        Self::new(labels, dims, m)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn total_dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn position(&self, label: usize) -> usize {
        self.labels
            .iter()
            .position(|&l| l == label)
            .unwrap_or_else(|| panic!("label {label} not present in {:?}", self.labels))
    }

    pub fn dim_of(&self, label: usize) -> usize {
        self.dims[self.position(label)]
    }

    pub fn has_label(&self, label: usize) -> bool {
        self.labels.contains(&label)
    }

    /// Flat-index map: entry `k` is the old flat index of new flat index `k`
    /// when legs are reordered to `order`.
    fn index_map(&self, order: &[usize]) -> Vec<usize> {
        let n = self.labels.len();
        let mut old_strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            old_strides[k] = old_strides[k + 1] * self.dims[k + 1];
        }
        let positions: Vec<usize> = order.iter().map(|&l| self.position(l)).collect();
        let new_dims: Vec<usize> = positions.iter().map(|&p| self.dims[p]).collect();
        let strides: Vec<usize> = positions.iter().map(|&p| old_strides[p]).collect();
        let total = self.total_dim();
        let mut map = Vec::with_capacity(total);
        let mut digits = vec![0usize; n];
        let mut flat_old = 0usize;
        for _ in 0..total {
            map.push(flat_old);
            for k in (0..n).rev() {
                digits[k] += 1;
                flat_old += strides[k];
                if digits[k] < new_dims[k] {
                    break;
                }
                flat_old -= strides[k] * digits[k];
                digits[k] = 0;
            }
        }
        map
    }

    pub fn reorder(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.labels.len(), "reorder needs every label");
        if order == self.labels.as_slice() {
            return self.clone();
        }
        let map = self.index_map(order);
        let total = self.total_dim();
        let old = &self.matrix;
        let matrix = ComplexMatrix::from_fn(total, total, |i, j| old[(map[i], map[j])]);
        let dims = order.iter().map(|&l| self.dim_of(l)).collect();
        Self::new(order.to_vec(), dims, matrix)
    }

    fn split_order(&self, tail: &[usize]) -> Vec<usize> {
        let mut order: Vec<usize> = self
            .labels
            .iter()
            .copied()
            .filter(|l| !tail.contains(l))
            .collect();
        order.extend_from_slice(tail);
        order
    }

    /// (G ⊗ 1) X with G acting on `targets` (in the given order).
    pub fn apply_left(&self, g: &ComplexMatrix, targets: &[usize]) -> Self {
        let arranged = self.reorder(&self.split_order(targets));
        arranged.left_tail(g, targets.len())
    }

    /// X (G ⊗ 1) with G acting on `targets`.
    pub fn apply_right(&self, g: &ComplexMatrix, targets: &[usize]) -> Self {
        let arranged = self.reorder(&self.split_order(targets));
        arranged.right_tail(g, targets.len())
    }

    /// G X G†.
    pub fn conjugate(&self, g: &ComplexMatrix, targets: &[usize]) -> Self {
        let arranged = self.reorder(&self.split_order(targets));
        let left = arranged.left_tail(g, targets.len());
        left.right_tail(&g.adjoint(), targets.len())
    }

    /// G† X G.
    pub fn pullback(&self, g: &ComplexMatrix, targets: &[usize]) -> Self {
        let arranged = self.reorder(&self.split_order(targets));
        let gd = g.adjoint();
        let left = arranged.left_tail(&gd, targets.len());
        left.right_tail(g, targets.len())
    }

    fn tail_dim(&self, count: usize) -> usize {
        self.dims[self.dims.len() - count..].iter().product()
    }

    fn left_tail(&self, g: &ComplexMatrix, count: usize) -> Self {
        let t = self.tail_dim(count);
        assert_eq!(g.ncols(), t, "gate does not match target legs");
        assert_eq!(g.nrows(), t, "gate must be square");
        let total = self.total_dim();
        let view = ComplexMatrix::from_column_slice(t, total * total / t, self.matrix.as_slice());
        let prod = g * view;
        let matrix = ComplexMatrix::from_column_slice(total, total, prod.as_slice());
        Self::new(self.labels.clone(), self.dims.clone(), matrix)
    }

    fn right_tail(&self, g: &ComplexMatrix, count: usize) -> Self {
        let t = self.tail_dim(count);
        assert_eq!(g.nrows(), t, "gate does not match target legs");
        let total = self.total_dim();
        let mut matrix = ComplexMatrix::zeros(total, total);
        for block in 0..total / t {
            let prod = self.matrix.columns(block * t, t) * g;
            matrix.columns_mut(block * t, t).copy_from(&prod);
        }
        Self::new(self.labels.clone(), self.dims.clone(), matrix)
    }

    pub fn trace_out(&self, traced: &[usize]) -> Self {
        if traced.is_empty() {
            return self.clone();
        }
        let arranged = self.reorder(&self.split_order(traced));
        let t = arranged.tail_dim(traced.len());
        let keep = arranged.total_dim() / t;
        let m = &arranged.matrix;
        let matrix = ComplexMatrix::from_fn(keep, keep, |a, b| {
            let mut acc = ZERO;
            for k in 0..t {
                acc += m[(a * t + k, b * t + k)];
            }
            acc
        });
        let n = arranged.labels.len() - traced.len();
        Self::new(
            arranged.labels[..n].to_vec(),
            arranged.dims[..n].to_vec(),
            matrix,
        )
    }

    /// Keep only the legs in `kept`, tracing out the rest; result is in `kept` order.
    pub fn reduce_to(&self, kept: &[usize]) -> Self {
        let traced: Vec<usize> = self
            .labels
            .iter()
            .copied()
            .filter(|l| !kept.contains(l))
            .collect();
        self.trace_out(&traced).reorder(kept)
    }

    /// X ⊗ |0..0><0..0| on new legs.
    pub fn extend_zero(&self, labels: &[usize], dims: &[usize]) -> Self {
        let extra: usize = dims.iter().product();
        let total = self.total_dim();
        let mut matrix = ComplexMatrix::zeros(total * extra, total * extra);
        for a in 0..total {
            for b in 0..total {
                matrix[(a * extra, b * extra)] = self.matrix[(a, b)];
            }
        }
        let mut all_labels = self.labels.clone();
        all_labels.extend_from_slice(labels);
        let mut all_dims = self.dims.clone();
        all_dims.extend_from_slice(dims);
        Self::new(all_labels, all_dims, matrix)
    }

    /// X ⊗ 1 on new legs.
    pub fn extend_identity(&self, labels: &[usize], dims: &[usize]) -> Self {
        self.tensor(&Self::identity(labels.to_vec(), dims.to_vec()))
    }

    pub fn tensor(&self, other: &LegOperator) -> Self {
        for l in &other.labels {
            assert!(!self.labels.contains(l), "label {l} already present");
        }
        let matrix = self.matrix.kronecker(&other.matrix);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self::new(labels, dims, matrix)
    }

    /// <0..0| X |0..0> on the given legs.
    pub fn project_zero(&self, projected: &[usize]) -> Self {
        let arranged = self.reorder(&self.split_order(projected));
        let p = arranged.tail_dim(projected.len());
        let keep = arranged.total_dim() / p;
        let m = &arranged.matrix;
        let matrix = ComplexMatrix::from_fn(keep, keep, |a, b| m[(a * p, b * p)]);
        let n = arranged.labels.len() - projected.len();
        Self::new(
            arranged.labels[..n].to_vec(),
            arranged.dims[..n].to_vec(),
            matrix,
        )
    }

    /// Rename labels pairwise (`from[k]` becomes `to[k]`).
    pub fn relabel(mut self, from: &[usize], to: &[usize]) -> Self {
        let old = self.labels.clone();
        for (k, l) in old.iter().enumerate() {
            if let Some(pos) = from.iter().position(|f| f == l) {
                self.labels[k] = to[pos];
            }
        }
        self
    }

    pub fn matrix_in_order(&self, order: &[usize]) -> ComplexMatrix {
        self.reorder(order).matrix
    }

    pub fn add_assign(&mut self, other: &LegOperator) {
        let aligned = other.reorder(&self.labels);
        self.matrix += aligned.matrix;
    }

    pub fn scale(mut self, factor: f64) -> Self {
        self.matrix *= C64::new(factor, 0.0);
        self
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diagonal().iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{haar_unitary, kron, max_abs, RngSeed};

    fn random_op(dim: usize, seed: u64) -> ComplexMatrix {
        let mut rng = RngSeed::new(seed).rng();
        let u = haar_unitary(dim, &mut rng).into_matrix();
        let v = haar_unitary(dim, &mut rng).into_matrix();
        u + v * C64::new(0.3, -0.2)
    }

    #[test]
    fn gate_application_matches_kronecker() {
        let x = random_op(12, 1);
        let g = random_op(3, 2);
        let op = LegOperator::new(vec![0, 1, 2], vec![2, 3, 2], x.clone());
        let full = kron(&kron(&ComplexMatrix::identity(2, 2), &g), &ComplexMatrix::identity(2, 2));
        let left = op.apply_left(&g, &[1]).matrix_in_order(&[0, 1, 2]);
        let right = op.apply_right(&g, &[1]).matrix_in_order(&[0, 1, 2]);
        assert!(max_abs(&(left - &full * &x)) < 1e-12);
        assert!(max_abs(&(right - &x * &full)) < 1e-12);
        let conj = op.conjugate(&g, &[1]).matrix_in_order(&[0, 1, 2]);
        assert!(max_abs(&(conj - &full * &x * full.adjoint())) < 1e-12);
    }

    #[test]
    fn two_leg_gate_in_reversed_order() {
        let x = random_op(8, 3);
        let g = random_op(4, 4);
        let op = LegOperator::new(vec![0, 1, 2], vec![2, 2, 2], x.clone());
        // G on legs (2, 0): build the full operator by permuting.
        let applied = op.apply_left(&g, &[2, 0]).matrix_in_order(&[0, 1, 2]);
        let mut full = ComplexMatrix::zeros(8, 8);
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for a2 in 0..2 {
                        for c2 in 0..2 {
                            let row = a2 * 4 + b * 2 + c2;
                            let col = a * 4 + b * 2 + c;
                            full[(row, col)] += g[(c2 * 2 + a2, c * 2 + a)];
                        }
                    }
                }
            }
        }
        assert!(max_abs(&(applied - &full * &x)) < 1e-12);
    }

    #[test]
    fn extend_then_project_roundtrip() {
        let x = random_op(6, 5);
        let op = LegOperator::new(vec![4, 7], vec![2, 3], x.clone());
        let ext = op.extend_zero(&[9], &[2]);
        let back = ext.project_zero(&[9]).matrix_in_order(&[4, 7]);
        assert!(max_abs(&(back - &x)) < 1e-14);
        let traced = ext.trace_out(&[9]).matrix_in_order(&[4, 7]);
        assert!(max_abs(&(traced - &x)) < 1e-14);
        let id = op.extend_identity(&[9], &[2]).trace_out(&[9]).matrix_in_order(&[4, 7]);
        assert!(max_abs(&(id - x * C64::new(2.0, 0.0))) < 1e-13);
    }
}
