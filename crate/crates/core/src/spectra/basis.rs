//! Doubled-site basis: right basis P'_± and left basis P_± per site, with
//! the plus component first. Channels become small real matrices acting on
//! basis coefficients.

use nalgebra::{DMatrix, DVector};

pub type RealMatrix = DMatrix<f64>;

pub fn nu_plus(chi: f64) -> f64 {
    chi * (chi + 1.0) / 2.0
}

pub fn nu_minus(chi: f64) -> f64 {
    chi * (chi - 1.0) / 2.0
}

/// Coefficients of the appended reference state |00><00|.
pub fn append_vector() -> RealMatrix {
    RealMatrix::from_column_slice(2, 1, &[1.0, 0.0])
}

/// Row that takes the trace of a site.
pub fn trace_row() -> RealMatrix {
    RealMatrix::from_row_slice(1, 2, &[1.0, 1.0])
}

/// Row that pairs a site with the swap operator.
pub fn swap_row() -> RealMatrix {
    RealMatrix::from_row_slice(1, 2, &[1.0, -1.0])
}

/// diag(ν+, ν-).
pub fn omega(chi: usize) -> RealMatrix {
    let c = chi as f64;
    RealMatrix::from_diagonal(&DVector::from_vec(vec![nu_plus(c), nu_minus(c)]))
}

/// Depolarization of one copy of a single site.
pub fn one_copy_matrix(chi: usize) -> RealMatrix {
    let c = chi as f64;
    omega(chi) * RealMatrix::from_element(2, 2, 1.0) / (c * c)
}

fn parity_is_even(sigma: usize, sites: usize) -> bool {
    (0..sites).filter(|k| (sigma >> k) & 1 == 1).count() % 2 == 0
}

/// Two-copy Haar average of a unitary acting jointly on sites of dimensions
/// `dims` (σ index bits: first site most significant, bit 1 = minus).
pub fn group_matrix(dims: &[usize]) -> RealMatrix {
    let k = dims.len();
    let size = 1usize << k;
    let total: f64 = dims.iter().map(|&d| d as f64).product();
    let (np, nm) = (nu_plus(total), nu_minus(total));
    let weight = |sigma: usize| -> f64 {
        (0..k)
            .map(|pos| {
                let bit = (sigma >> (k - 1 - pos)) & 1;
                let c = dims[pos] as f64;
                if bit == 0 {
                    nu_plus(c)
                } else {
                    nu_minus(c)
                }
            })
            .product()
    };
    RealMatrix::from_fn(size, size, |out, inp| {
        let even_out = parity_is_even(out, k);
        if even_out != parity_is_even(inp, k) {
            return 0.0;
        }
        let norm = if even_out { np } else { nm };
        if norm == 0.0 {
            0.0
        } else {
            weight(out) / norm
        }
    })
}

/// Two-site group matrix written as J S with J carrying the ν weights.
pub fn pair_factors(chi1: usize, chi2: usize) -> (RealMatrix, RealMatrix) {
    let (c1, c2) = (chi1 as f64, chi2 as f64);
    let (p1, m1, p2, m2) = (nu_plus(c1), nu_minus(c1), nu_plus(c2), nu_minus(c2));
    let joint = c1 * c2;
    let j = RealMatrix::from_row_slice(4, 2, &[p1 * p2, 0.0, 0.0, p1 * m2, 0.0, m1 * p2, m1 * m2, 0.0])
        * RealMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / nu_plus(joint), 1.0 / nu_minus(joint)]));
    let s = RealMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
    (j, s)
}

/// Three-site group matrix assembled from two-site factors: the last two sites
/// are fused into one site of dimension χ², averaged jointly with the first,
/// and split again.
pub fn triple_from_pairs(chi: usize) -> RealMatrix {
    let id2 = RealMatrix::identity(2, 2);
    let (j_inner, s_inner) = pair_factors(chi, chi);
    let (j_outer, s_outer) = pair_factors(chi, chi * chi);
    id2.kronecker(&j_inner) * (j_outer * s_outer) * id2.kronecker(&s_inner)
}

/// Linear map on basis coefficients of labelled doubled sites.
#[derive(Clone, Debug)]
pub struct BasisNetwork {
    labels: Vec<usize>,
    chis: Vec<usize>,
    input_labels: Vec<usize>,
    matrix: RealMatrix,
}

impl BasisNetwork {
    pub fn new(inputs: &[(usize, usize)]) -> Self {
        let labels: Vec<usize> = inputs.iter().map(|p| p.0).collect();
        let chis = inputs.iter().map(|p| p.1).collect();
        let size = 1usize << inputs.len();
        Self {
            input_labels: labels.clone(),
            labels,
            chis,
            matrix: RealMatrix::identity(size, size),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn input_labels(&self) -> &[usize] {
        &self.input_labels
    }

    pub fn chi_of(&self, label: usize) -> usize {
        let pos = self.position(label);
        self.chis[pos]
    }

    fn position(&self, label: usize) -> usize {
        self.labels
            .iter()
            .position(|&l| l == label)
            .unwrap_or_else(|| panic!("label {label} not in {:?}", self.labels))
    }

    /// Reorder current legs; `order` must list every current label.
    fn reorder_rows(&mut self, order: &[usize]) {
        let n = self.labels.len();
        assert_eq!(order.len(), n);
        if order == self.labels.as_slice() {
            return;
        }
        let positions: Vec<usize> = order.iter().map(|&l| self.position(l)).collect();
        let rows = self.matrix.nrows();
        let old = &self.matrix;
        let map: Vec<usize> = (0..rows)
            .map(|new_idx| {
                let mut old_idx = 0usize;
                for (k, &p) in positions.iter().enumerate() {
                    let bit = (new_idx >> (n - 1 - k)) & 1;
                    old_idx |= bit << (n - 1 - p);
                }
                old_idx
            })
            .collect();
        let matrix = RealMatrix::from_fn(rows, old.ncols(), |r, c| old[(map[r], c)]);
        self.chis = positions.iter().map(|&p| self.chis[p]).collect();
        self.labels = order.to_vec();
        self.matrix = matrix;
    }

    /// Apply `op` (2^out × 2^in) to the legs `inputs`, producing new legs `outputs`.
    pub fn apply(&mut self, op: &RealMatrix, inputs: &[usize], outputs: &[(usize, usize)]) {
        assert_eq!(op.ncols(), 1 << inputs.len(), "operator input size");
        assert_eq!(op.nrows(), 1 << outputs.len(), "operator output size");
        let mut order: Vec<usize> = self
            .labels
            .iter()
            .copied()
            .filter(|l| !inputs.contains(l))
            .collect();
        for (l, _) in outputs {
            assert!(!order.contains(l), "label {l} already present");
        }
        let rest_chis: Vec<usize> = order.iter().map(|&l| self.chi_of(l)).collect();
        order.extend_from_slice(inputs);
        self.reorder_rows(&order);
        let block_in = op.ncols();
        let block_out = op.nrows();
        let blocks = self.matrix.nrows() / block_in;
        let cols = self.matrix.ncols();
        let mut next = RealMatrix::zeros(blocks * block_out, cols);
        for b in 0..blocks {
            let prod = op * self.matrix.rows(b * block_in, block_in);
            next.rows_mut(b * block_out, block_out).copy_from(&prod);
        }
        let rest = order.len() - inputs.len();
        self.labels.truncate(rest);
        self.chis = rest_chis;
        for &(l, c) in outputs {
            self.labels.push(l);
            self.chis.push(c);
        }
        self.matrix = next;
    }

    /// Append a site in the reference state.
    pub fn append(&mut self, label: usize, chi: usize) {
        self.apply(&append_vector(), &[], &[(label, chi)]);
    }

    pub fn trace(&mut self, labels: &[usize]) {
        for &l in labels {
            self.apply(&trace_row(), &[l], &[]);
        }
    }

    /// Two-copy Haar average over a unitary acting on `labels` jointly.
    pub fn group(&mut self, labels: &[usize]) {
        let dims: Vec<usize> = labels.iter().map(|&l| self.chi_of(l)).collect();
        let g = group_matrix(&dims);
        let outs: Vec<(usize, usize)> = labels.iter().copied().zip(dims).collect();
        self.apply(&g, labels, &outs);
    }

    /// Haar average over a unitary acting on one copy of `labels` only.
    pub fn one_copy(&mut self, labels: &[usize]) {
        for &l in labels {
            let chi = self.chi_of(l);
            self.apply(&one_copy_matrix(chi), &[l], &[(l, chi)]);
        }
    }

    /// Current map with output legs in `order`.
    pub fn matrix(&mut self, order: &[usize]) -> RealMatrix {
        self.reorder_rows(order);
        self.matrix.clone()
    }
}
