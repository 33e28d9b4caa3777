//! Local Hamiltonian terms, Pauli helpers and dense chain Hamiltonians.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legs::LegOperator;
use crate::tensor::{
    hermiticity_defect, identity, ipow, kron, max_abs, trace, ComplexMatrix, RngSeed, C64, ONE,
    ZERO,
};

/// A Hermitian operator acting on `support` consecutive sites of dimension `site_dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    support: usize,
    site_dim: usize,
    matrix: ComplexMatrix,
}

impl LocalTerm {
    pub fn new(matrix: ComplexMatrix, support: usize, site_dim: usize) -> Result<Self> {
        if support == 0 || site_dim < 2 {
            return Err(Error::InvalidDimension(format!(
                "support {support}, site dimension {site_dim}"
            )));
        }
        let dim = ipow(site_dim, support);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{dim}x{dim}"),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let defect = hermiticity_defect(&matrix);
        if defect > 1e-10 * max_abs(&matrix).max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self {
            support,
            site_dim,
            matrix,
        })
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn site_dim(&self) -> usize {
        self.site_dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The same operator padded with identities on the right up to `support` sites.
    pub fn padded(&self, support: usize) -> Result<Self> {
        if support < self.support {
            return Err(Error::InvalidDimension(format!(
                "cannot shrink support {} to {support}",
                self.support
            )));
        }
        let pad = identity(ipow(self.site_dim, support - self.support));
        Ok(Self {
            support,
            site_dim: self.site_dim,
            matrix: kron(&self.matrix, &pad),
        })
    }

    fn legs(&self) -> LegOperator {
        LegOperator::new(
            (0..self.support).collect(),
            vec![self.site_dim; self.support],
            self.matrix.clone(),
        )
    }

    /// Partial trace over the first site.
    pub fn trace_first(&self) -> ComplexMatrix {
        self.legs().trace_out(&[0]).into_matrix()
    }

    /// Partial trace over the last site.
    pub fn trace_last(&self) -> ComplexMatrix {
        self.legs().trace_out(&[self.support - 1]).into_matrix()
    }

    /// The operator with the order of its sites reversed.
    pub fn reflected(&self) -> Self {
        let order: Vec<usize> = (0..self.support).rev().collect();
        Self {
            support: self.support,
            site_dim: self.site_dim,
            matrix: self.legs().matrix_in_order(&order),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            support: self.support,
            site_dim: self.site_dim,
            matrix: &self.matrix * C64::new(factor, 0.0),
        }
    }
}

pub fn pauli(symbol: char) -> Result<ComplexMatrix> {
    let i = C64::new(0.0, 1.0);
    let m = match symbol {
        'I' | '1' => identity(2),
        'X' => ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        'Y' => ComplexMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO]),
        'Z' => ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        other => return Err(Error::InvalidConfig(format!("unknown Pauli symbol '{other}'"))),
    };
    Ok(m)
}

/// Tensor product of single-qubit Paulis, e.g. "ZZI".
pub fn pauli_string(word: &str) -> Result<ComplexMatrix> {
    if word.is_empty() {
        return Err(Error::InvalidConfig("empty Pauli string".into()));
    }
    let mut out = identity(1);
    for c in word.chars() {
        out = kron(&out, &pauli(c)?);
    }
    Ok(out)
}

/// Weighted sum of equal-length Pauli strings.
pub fn pauli_sum(terms: &[(f64, String)]) -> Result<LocalTerm> {
    let support = terms
        .first()
        .map(|(_, w)| w.chars().count())
        .ok_or_else(|| Error::InvalidConfig("empty Pauli sum".into()))?;
    let mut acc = ComplexMatrix::zeros(1 << support, 1 << support);
    for (coef, word) in terms {
        if word.chars().count() != support {
            return Err(Error::InvalidConfig(format!(
                "Pauli string '{word}' has the wrong length"
            )));
        }
        acc += pauli_string(word)? * C64::new(*coef, 0.0);
    }
    LocalTerm::new(acc, support, 2)
}

/// Remove the trace of `h` and validate it as a local term. Two-site terms must
/// also satisfy Tr_1 h = Tr_2 h.
pub fn make_traceless(h: &ComplexMatrix, support: usize, site_dim: usize) -> Result<LocalTerm> {
    let term = LocalTerm::new(h.clone(), support, site_dim)?;
    let dim = term.dim();
    let shift = trace(h) / dim as f64;
    let traceless = h - identity(dim) * shift;
    let term = LocalTerm {
        support,
        site_dim,
        matrix: traceless,
    };
    if support == 2 {
        let gap = max_abs(&(term.trace_first() - term.trace_last()));
        if gap > 1e-10 * max_abs(&term.matrix).max(1.0) {
            return Err(Error::Constraint(format!(
                "partial traces over the two sites differ by {gap:.3e}"
            )));
        }
    }
    Ok(term)
}

/// Random traceless, reflection-symmetric Hermitian term.
pub fn random_traceless(support: usize, site_dim: usize, seed: RngSeed) -> Result<LocalTerm> {
    let dim = ipow(site_dim, support);
    let mut rng = seed.rng();
    let mut sample = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    };
    let a = ComplexMatrix::from_fn(dim, dim, |_, _| sample());
    let hermitian = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let base = LocalTerm::new(hermitian, support, site_dim)?;
    let symmetric = (&base.matrix + base.reflected().matrix) * C64::new(0.5, 0.0);
    make_traceless(&symmetric, support, site_dim)
}

/// Tr h² and Tr((Tr_1 h)²).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermMoments {
    pub tr_h2: f64,
    pub tr_reduced_sq: f64,
}

pub fn term_moments(h: &LocalTerm) -> TermMoments {
    let tr_h2 = trace(&(&h.matrix * &h.matrix)).re;
    let tr_reduced_sq = if h.support > 1 {
        let r = h.trace_first();
        trace(&(&r * &r)).re
    } else {
        0.0
    };
    TermMoments {
        tr_h2,
        tr_reduced_sq,
    }
}

/// Transverse-field Ising bond term -Z⊗Z - (g/2)(X⊗1 + 1⊗X).
pub fn tfim_bond(g: f64) -> LocalTerm {
    let words = [(-1.0, "ZZ"), (-g / 2.0, "XI"), (-g / 2.0, "IX")];
    let terms: Vec<(f64, String)> = words.iter().map(|(c, w)| (*c, w.to_string())).collect();
    pauli_sum(&terms).expect("valid Pauli words")
}

/// Three-site term whose translates sum to the periodic transverse-field Ising chain.
pub fn tfim_three_site(g: f64) -> LocalTerm {
    let words = [
        (-0.5, "ZZI"),
        (-0.5, "IZZ"),
        (-g / 3.0, "XII"),
        (-g / 3.0, "IXI"),
        (-g / 3.0, "IIX"),
    ];
    let terms: Vec<(f64, String)> = words.iter().map(|(c, w)| (*c, w.to_string())).collect();
    pauli_sum(&terms).expect("valid Pauli words")
}

/// Sum of local terms on a chain; sites are numbered from 0.
#[derive(Clone, Debug)]
pub struct ChainHamiltonian {
    pub sites: usize,
    pub site_dim: usize,
    pub periodic: bool,
    pub terms: Vec<(usize, LocalTerm)>,
}

impl ChainHamiltonian {
    /// One copy of `term` starting at every site where it fits (open chain).
    pub fn open_uniform(sites: usize, term: &LocalTerm) -> Self {
        let count = sites + 1 - term.support;
        Self {
            sites,
            site_dim: term.site_dim,
            periodic: false,
            terms: (0..count).map(|s| (s, term.clone())).collect(),
        }
    }

    /// One copy of `term` starting at every site (periodic chain).
    pub fn periodic_uniform(sites: usize, term: &LocalTerm) -> Self {
        Self {
            sites,
            site_dim: term.site_dim,
            periodic: true,
            terms: (0..sites).map(|s| (s, term.clone())).collect(),
        }
    }

    pub fn dense(&self) -> Result<ComplexMatrix> {
        let total = ipow(self.site_dim, self.sites);
        let mut h = ComplexMatrix::zeros(total, total);
        let order: Vec<usize> = (0..self.sites).collect();
        for (start, term) in &self.terms {
            let positions: Vec<usize> = (0..term.support)
                .map(|k| start + k)
                .map(|p| if self.periodic { p % self.sites } else { p })
                .collect();
            if positions.iter().any(|&p| p >= self.sites) {
                return Err(Error::OutOfRange(format!(
                    "term at {start} leaves a chain of {} sites",
                    self.sites
                )));
            }
            let rest: Vec<usize> = order
                .iter()
                .copied()
                .filter(|s| !positions.contains(s))
                .collect();
            let op = LegOperator::new(positions, vec![self.site_dim; term.support], term.matrix.clone())
                .extend_identity(&rest, &vec![self.site_dim; rest.len()]);
            h += op.matrix_in_order(&order);
        }
        Ok(h)
    }

    pub fn ground_energy(&self) -> Result<f64> {
        let h = self.dense()?;
        let eig = h.symmetric_eigen();
        Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    pub fn expectation(&self, psi: &nalgebra::DVector<C64>) -> Result<f64> {
        let h = self.dense()?;
        Ok((psi.adjoint() * h * psi)[(0, 0)].re)
    }
}
