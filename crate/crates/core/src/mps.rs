//! Left-isometric MPS built from Haar-random unitaries.
//!
//! Sites are numbered `1..=L` and bonds `0..=L`; site `j` maps its right bond
//! `m_j` into (left bond `m_{j-1}`) ⊗ (physical `d`). Every site tensor is
//! `A_j = U_j P_j` for a unitary `U_j` on C^{m_{j-1} d} and a fixed column
//! embedding `P_j` of the reference vector.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{term_moments, LocalTerm};
use crate::legs::LegOperator;
use crate::moments::mps_eta;
use crate::parallel::map_samples;
use crate::riemann::{euclidean_gradient, gradient_columns, gradient_norm_per_dim, project_tangent};
use crate::stats::{max_mean_z, summarize, VarianceReport};
use crate::tensor::{
    haar_unitary, identity, ipow, kron, trace, ComplexMatrix, RngSeed, UnitaryTensor, C64, ONE,
};

/// Bond-dimension profile m_j = min(d^j, d^{L-j}, m).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MpsShape {
    length: usize,
    phys_dim: usize,
    bond_dim: usize,
    bonds: Vec<usize>,
}

/// Smallest b with d^b >= m.
pub fn boundary_width(phys_dim: usize, bond_dim: usize) -> usize {
    let mut b = 0;
    let mut power = 1usize;
    while power < bond_dim {
        power *= phys_dim;
        b += 1;
    }
    b
}

impl MpsShape {
    pub fn new(length: usize, phys_dim: usize, bond_dim: usize) -> Result<Self> {
        if phys_dim < 2 || bond_dim < 1 {
            return Err(Error::InvalidDimension(format!(
                "physical dimension {phys_dim}, bond dimension {bond_dim}"
            )));
        }
        let b = boundary_width(phys_dim, bond_dim);
        if length < 2 * b + 2 {
            return Err(Error::InvalidDimension(format!(
                "chain of {length} sites is too short for bond dimension {bond_dim} (need {})",
                2 * b + 2
            )));
        }
        let cap = |k: usize| {
            let mut v = 1usize;
            for _ in 0..k {
                v = v.saturating_mul(phys_dim);
                if v >= bond_dim {
                    return bond_dim;
                }
            }
            v.min(bond_dim)
        };
        let bonds = (0..=length).map(|j| cap(j).min(cap(length - j))).collect();
        Ok(Self {
            length,
            phys_dim,
            bond_dim,
            bonds,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn phys_dim(&self) -> usize {
        self.phys_dim
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn bonds(&self) -> &[usize] {
        &self.bonds
    }

    pub fn bond(&self, j: usize) -> usize {
        self.bonds[j]
    }

    pub fn boundary_width(&self) -> usize {
        boundary_width(self.phys_dim, self.bond_dim)
    }

    /// Sites whose unitary is a bulk U(m d) tensor.
    pub fn is_bulk(&self, site: usize) -> bool {
        let b = self.boundary_width();
        site > b && site + b <= self.length
    }

    /// Dimension of the unitary at `site`.
    pub fn unitary_dim(&self, site: usize) -> usize {
        self.bonds[site - 1] * self.phys_dim
    }

    /// Columns of U_j that form the isometry A_j.
    pub fn embedding_columns(&self, site: usize) -> Vec<usize> {
        let dim = self.unitary_dim(site);
        let out = self.bonds[site];
        if dim.is_multiple_of(out) {
            let stride = dim / out;
            (0..out).map(|b| b * stride).collect()
        } else {
            (0..out).collect()
        }
    }

    pub fn embedding(&self, site: usize) -> ComplexMatrix {
        let cols = self.embedding_columns(site);
        let mut p = ComplexMatrix::zeros(self.unitary_dim(site), cols.len());
        for (k, &c) in cols.iter().enumerate() {
            p[(c, k)] = ONE;
        }
        p
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site == 0 || site > self.length {
            return Err(Error::OutOfRange(format!(
                "site {site} outside 1..={}",
                self.length
            )));
        }
        Ok(())
    }
}

/// A local term placed on sites `first_site ..= first_site + support - 1`.
#[derive(Clone, Debug)]
pub struct Placement {
    pub first_site: usize,
    pub term: LocalTerm,
}

/// One copy of `term` at every position of an open chain of `length` sites.
pub fn extensive_placements(length: usize, term: &LocalTerm) -> Vec<Placement> {
    (1..=length + 1 - term.support())
        .map(|first_site| Placement {
            first_site,
            term: term.clone(),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Mps {
    shape: MpsShape,
    unitaries: Vec<UnitaryTensor>,
}

impl Mps {
    pub fn random<R: Rng + ?Sized>(shape: MpsShape, rng: &mut R) -> Self {
        let unitaries = (1..=shape.length)
            .map(|site| haar_unitary(shape.unitary_dim(site), rng))
            .collect();
        Self { shape, unitaries }
    }

    pub fn random_seeded(length: usize, phys_dim: usize, bond_dim: usize, seed: RngSeed) -> Result<Self> {
        let shape = MpsShape::new(length, phys_dim, bond_dim)?;
        Ok(Self::random(shape, &mut seed.rng()))
    }

    pub fn from_unitaries(shape: MpsShape, unitaries: Vec<UnitaryTensor>) -> Result<Self> {
        if unitaries.len() != shape.length {
            return Err(Error::ShapeMismatch {
                expected: format!("{} unitaries", shape.length),
                found: format!("{}", unitaries.len()),
            });
        }
        for (k, u) in unitaries.iter().enumerate() {
            if u.dim() != shape.unitary_dim(k + 1) {
                return Err(Error::ShapeMismatch {
                    expected: format!("U({}) at site {}", shape.unitary_dim(k + 1), k + 1),
                    found: format!("U({})", u.dim()),
                });
            }
        }
        Ok(Self { shape, unitaries })
    }

    /// Copy with the tensor at `site` replaced by an arbitrary matrix (used for
    /// linear-response checks of gradients).
    #[cfg(test)]
    pub(crate) fn with_site_matrix(&self, site: usize, matrix: ComplexMatrix) -> Self {
        let mut out = self.clone();
        out.unitaries[site - 1] = UnitaryTensor::new_unchecked(matrix);
        out
    }

    pub fn shape(&self) -> &MpsShape {
        &self.shape
    }

    pub fn unitaries(&self) -> &[UnitaryTensor] {
        &self.unitaries
    }

    pub fn unitary(&self, site: usize) -> &UnitaryTensor {
        &self.unitaries[site - 1]
    }

    pub fn isometry(&self, site: usize) -> ComplexMatrix {
        let u = self.unitary(site).matrix();
        let cols = self.shape.embedding_columns(site);
        ComplexMatrix::from_fn(u.nrows(), cols.len(), |r, c| u[(r, cols[c])])
    }

    /// Amplitudes <s_1 .. s_L|Ψ> with s_1 most significant.
    pub fn state_vector(&self) -> DVector<C64> {
        let d = self.shape.phys_dim;
        let mut v = ComplexMatrix::from_element(1, 1, ONE);
        for site in 1..=self.shape.length {
            let a = self.isometry(site);
            let (left, right) = (self.shape.bond(site - 1), self.shape.bond(site));
            let mut next = ComplexMatrix::zeros(v.nrows() * d, right);
            for s in 0..d {
                let block = ComplexMatrix::from_fn(left, right, |al, be| a[(al * d + s, be)]);
                let prod = &v * block;
                for row in 0..v.nrows() {
                    for col in 0..right {
                        next[(row * d + s, col)] = prod[(row, col)];
                    }
                }
            }
            v = next;
        }
        DVector::from_column_slice(v.column(0).as_slice())
    }

    fn trace_physical(&self, op: ComplexMatrix, left: usize) -> ComplexMatrix {
        LegOperator::new(vec![0, 1], vec![left, self.shape.phys_dim], op)
            .trace_out(&[1])
            .into_matrix()
    }

    /// R_j = M_{j+1} ∘ … ∘ M_L(|0><0|) for j = 0..=L (index j).
    pub fn right_environments(&self) -> Vec<ComplexMatrix> {
        let l = self.shape.length;
        let mut envs = vec![ComplexMatrix::zeros(0, 0); l + 1];
        envs[l] = ComplexMatrix::from_element(1, 1, ONE);
        for site in (1..=l).rev() {
            let a = self.isometry(site);
            let full = &a * &envs[site] * a.adjoint();
            envs[site - 1] = self.trace_physical(full, self.shape.bond(site - 1));
        }
        envs
    }

    /// Map of sites `from..=to` from C^{m_to} into C^{m_{from-1}} ⊗ (C^d)^{⊗(to-from+1)}.
    fn combined_map(&self, from: usize, to: usize) -> ComplexMatrix {
        if from > to {
            return identity(self.shape.bond(from - 1));
        }
        let d = self.shape.phys_dim;
        let mut b = self.isometry(from);
        for site in from + 1..=to {
            b = kron(&b, &identity(d)) * self.isometry(site);
        }
        b
    }

    fn check_placement(&self, p: &Placement) -> Result<usize> {
        if p.term.site_dim() != self.shape.phys_dim {
            return Err(Error::ShapeMismatch {
                expected: format!("site dimension {}", self.shape.phys_dim),
                found: format!("{}", p.term.site_dim()),
            });
        }
        let last = p.first_site + p.term.support() - 1;
        if p.first_site == 0 || last > self.shape.length {
            return Err(Error::OutOfRange(format!(
                "term on sites {}..={last} in a chain of {}",
                p.first_site, self.shape.length
            )));
        }
        Ok(last)
    }

    pub fn expectation_local(&self, term: &LocalTerm, first_site: usize) -> Result<f64> {
        let placement = Placement {
            first_site,
            term: term.clone(),
        };
        let envs = self.right_environments();
        self.expectation_with(&placement, &envs)
    }

    fn expectation_with(&self, p: &Placement, envs: &[ComplexMatrix]) -> Result<f64> {
        let last = self.check_placement(p)?;
        let b = self.combined_map(p.first_site, last);
        let rho = &b * &envs[last] * b.adjoint();
        let lifted = kron(&identity(self.shape.bond(p.first_site - 1)), p.term.matrix());
        Ok(trace(&(lifted * rho)).re)
    }

    pub fn energy(&self, terms: &[Placement]) -> Result<f64> {
        let envs = self.right_environments();
        terms.iter().map(|p| self.expectation_with(p, &envs)).sum()
    }

    fn term_gradient(&self, p: &Placement, site: usize, envs: &[ComplexMatrix]) -> Result<Option<ComplexMatrix>> {
        let last = self.check_placement(p)?;
        let i = p.first_site;
        if site < i {
            return Ok(None);
        }
        let d = self.shape.phys_dim;
        let u = self.unitary(site).matrix();
        let embed = self.shape.embedding(site);
        let lifted_h = kron(&identity(self.shape.bond(i - 1)), p.term.matrix());
        if site > last {
            let b = self.combined_map(i, last);
            let mut left = b.adjoint() * lifted_h * &b;
            for n in last + 1..site {
                let a = self.isometry(n);
                left = a.adjoint() * kron(&left, &identity(d)) * a;
            }
            let y = kron(&left, &identity(d));
            let x = &embed * &envs[site] * embed.adjoint();
            return Ok(Some(euclidean_gradient(u, &x, &y, 1)?));
        }
        let after = last - site;
        let ancilla = ipow(d, after);
        let bl = kron(&self.combined_map(i, site - 1), &identity(d * ancilla));
        let y = bl.adjoint() * lifted_h * &bl;
        let br = self.combined_map(site + 1, last);
        let rho = &br * &envs[last] * br.adjoint();
        let pm = kron(&embed, &identity(ancilla));
        let x = &pm * rho * pm.adjoint();
        Ok(Some(euclidean_gradient(u, &x, &y, ancilla)?))
    }

    fn euclidean_with(&self, terms: &[Placement], site: usize, envs: &[ComplexMatrix]) -> Result<ComplexMatrix> {
        let dim = self.shape.unitary_dim(site);
        let mut total = ComplexMatrix::zeros(dim, dim);
        for p in terms {
            if let Some(g) = self.term_gradient(p, site, envs)? {
                total += g;
            }
        }
        Ok(total)
    }

    /// Euclidean gradient of the energy with respect to U_site, up to terms
    /// normal to the tangent space: terms entirely to the right of `site` only
    /// contribute 2 U X, which projects to zero, and are skipped.
    pub fn euclidean_gradient(&self, terms: &[Placement], site: usize) -> Result<ComplexMatrix> {
        self.shape.check_site(site)?;
        let envs = self.right_environments();
        self.euclidean_with(terms, site, &envs)
    }

    /// Riemannian gradient (d - U d† U)/2 with respect to U_site.
    pub fn riemannian_gradient(&self, terms: &[Placement], site: usize) -> Result<ComplexMatrix> {
        let d = self.euclidean_gradient(terms, site)?;
        Ok(project_tangent(self.unitary(site).matrix(), &d))
    }

    /// Per-term Riemannian gradients at `site` (terms with no dependence are skipped).
    pub fn term_gradients(&self, terms: &[Placement], site: usize) -> Result<Vec<ComplexMatrix>> {
        self.shape.check_site(site)?;
        let envs = self.right_environments();
        let u = self.unitary(site).matrix();
        let mut out = Vec::new();
        for p in terms {
            if let Some(d) = self.term_gradient(p, site, &envs)? {
                out.push(project_tangent(u, &d));
            }
        }
        Ok(out)
    }

    /// Energy and Euclidean gradients for every site.
    pub fn energy_and_gradients(&self, terms: &[Placement]) -> Result<(f64, Vec<ComplexMatrix>)> {
        let envs = self.right_environments();
        let energy = terms
            .iter()
            .map(|p| self.expectation_with(p, &envs))
            .sum::<Result<f64>>()?;
        let grads = (1..=self.shape.length)
            .map(|site| self.euclidean_with(terms, site, &envs))
            .collect::<Result<Vec<_>>>()?;
        Ok((energy, grads))
    }
}

/// Closed-form Haar-averaged gradient variances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VariancePrediction {
    /// Single global unitary on a space of dimension d^L.
    GlobalUnitary { length: usize, phys_dim: usize, tr_h2: f64 },
    /// Single-site term at site i, gradient at bulk site j (offset = j - i).
    SingleSite { bond_dim: usize, phys_dim: usize, offset: i64, tr_h2: f64 },
    /// Extensive sum of single-site terms, bulk gradient.
    SingleSiteExtensive { bond_dim: usize, phys_dim: usize, tr_h2: f64 },
    /// Nearest-neighbour term on sites (i, i+1), gradient at bulk site j.
    NearestNeighbour { bond_dim: usize, phys_dim: usize, offset: i64, tr_h2: f64, tr_reduced_sq: f64 },
    /// Extensive sum of nearest-neighbour terms, bulk gradient.
    NearestNeighbourExtensive { bond_dim: usize, phys_dim: usize, tr_h2: f64, tr_reduced_sq: f64 },
    /// Variance of the norm of the unnormalized bulk MPS.
    NormVariance { bond_dim: usize, phys_dim: usize },
}

pub fn predict_variance(p: &VariancePrediction) -> f64 {
    match *p {
        VariancePrediction::GlobalUnitary {
            length,
            phys_dim,
            tr_h2,
        } => crate::riemann::global_unitary_prediction(tr_h2, ipow(phys_dim, length)),
        VariancePrediction::SingleSite {
            bond_dim,
            phys_dim,
            offset,
            tr_h2,
        } => {
            if offset < 0 {
                return 0.0;
            }
            let (m, d) = (bond_dim as f64, phys_dim as f64);
            2.0 * tr_h2 / (d * (m * m * d + 1.0)) * mps_eta(bond_dim, phys_dim).powi(offset as i32)
        }
        VariancePrediction::SingleSiteExtensive {
            bond_dim,
            phys_dim,
            tr_h2,
        } => {
            let (m, d) = (bond_dim as f64, phys_dim as f64);
            2.0 * tr_h2 * (m * m * d * d - 1.0) / (d * (d - 1.0) * (m * m * d + 1.0).powi(2))
        }
        VariancePrediction::NearestNeighbour {
            bond_dim,
            phys_dim,
            offset,
            tr_h2,
            tr_reduced_sq,
        } => {
            if offset < 0 {
                return 0.0;
            }
            let (m, d) = (bond_dim as f64, phys_dim as f64);
            let prefactor = (m * m * d - 1.0) / (d * d * (m * m * d + 1.0) * (m * m * d * d - 1.0));
            if offset == 0 {
                let c = (d - 1.0) / d - (m * m - 1.0) / (m * m * d - 1.0);
                2.0 * (tr_h2 + c * tr_reduced_sq) * prefactor
            } else {
                let eta = mps_eta(bond_dim, phys_dim);
                2.0 * (tr_h2 + (d - 1.0) / d * tr_reduced_sq) * prefactor * eta.powi(offset as i32 - 1)
            }
        }
        VariancePrediction::NearestNeighbourExtensive {
            bond_dim,
            phys_dim,
            tr_h2,
            tr_reduced_sq,
        } => {
            let (diag, off) = nearest_neighbour_extensive_parts(bond_dim, phys_dim, tr_h2, tr_reduced_sq);
            diag + off
        }
        VariancePrediction::NormVariance { bond_dim, phys_dim } => {
            let (m, d) = (bond_dim as f64, phys_dim as f64);
            (m - 1.0) / (m * m * d + 1.0)
        }
    }
}

/// Diagonal (same-term) and off-diagonal (cross-term) parts of the extensive
/// nearest-neighbour gradient variance.
pub fn nearest_neighbour_extensive_parts(bond_dim: usize, phys_dim: usize, tr_h2: f64, tr_reduced_sq: f64) -> (f64, f64) {
    let (m, d) = (bond_dim as f64, phys_dim as f64);
    let a = m * m * d - 1.0;
    let b = m * m * d + 1.0;
    let c = m * m * d * d - 1.0;
    let base = tr_h2 + (d - 1.0) / d * tr_reduced_sq;
    let diag = 2.0 * a / (d * d * b * c)
        * ((c / ((d - 1.0) * b) + 1.0) * base - (m * m - 1.0) / a * tr_reduced_sq);
    let off = 4.0 * c / (d * d * d * (d - 1.0) * b * b) * tr_reduced_sq;
    (diag, off)
}

/// Which terms enter a Monte Carlo gradient-variance run.
#[derive(Clone, Debug)]
pub enum TermLayout {
    Single { first_site: usize },
    Extensive,
}

#[derive(Clone, Debug)]
pub struct MpsVarianceConfig {
    pub length: usize,
    pub phys_dim: usize,
    pub bond_dim: usize,
    pub term: LocalTerm,
    pub layout: TermLayout,
    pub samples: usize,
    pub seed: u64,
}

impl MpsVarianceConfig {
    pub fn placements(&self) -> Vec<Placement> {
        match self.layout {
            TermLayout::Single { first_site } => vec![Placement {
                first_site,
                term: self.term.clone(),
            }],
            TermLayout::Extensive => extensive_placements(self.length, &self.term),
        }
    }

    /// Closed-form prediction for a bulk gradient site, when one applies.
    pub fn prediction(&self, site: usize) -> Option<VariancePrediction> {
        let m = term_moments(&self.term);
        let (bond_dim, phys_dim) = (self.bond_dim, self.phys_dim);
        match (self.term.support(), &self.layout) {
            (1, TermLayout::Single { first_site }) => Some(VariancePrediction::SingleSite {
                bond_dim,
                phys_dim,
                offset: site as i64 - *first_site as i64,
                tr_h2: m.tr_h2,
            }),
            (1, TermLayout::Extensive) => Some(VariancePrediction::SingleSiteExtensive {
                bond_dim,
                phys_dim,
                tr_h2: m.tr_h2,
            }),
            (2, TermLayout::Single { first_site }) => Some(VariancePrediction::NearestNeighbour {
                bond_dim,
                phys_dim,
                offset: site as i64 - *first_site as i64,
                tr_h2: m.tr_h2,
                tr_reduced_sq: m.tr_reduced_sq,
            }),
            (2, TermLayout::Extensive) => Some(VariancePrediction::NearestNeighbourExtensive {
                bond_dim,
                phys_dim,
                tr_h2: m.tr_h2,
                tr_reduced_sq: m.tr_reduced_sq,
            }),
            _ => None,
        }
    }
}

/// Monte Carlo estimate of (1/N) Avg Tr(g† g) at each of `sites`, sharing samples.
/// Also records the diagonal part (sum over terms of per-term gradient norms).
pub fn mc_gradient_variance_sites(cfg: &MpsVarianceConfig, sites: &[usize]) -> Result<Vec<VarianceReport>> {
    let shape = MpsShape::new(cfg.length, cfg.phys_dim, cfg.bond_dim)?;
    if cfg.samples < 100 {
        return Err(Error::InsufficientSamples(format!("{} < 100", cfg.samples)));
    }
    for &s in sites {
        shape.check_site(s)?;
    }
    let terms = cfg.placements();
    for p in &terms {
        if p.term.site_dim() != cfg.phys_dim || p.first_site + p.term.support() - 1 > cfg.length || p.first_site == 0 {
            return Err(Error::OutOfRange(format!("term at site {}", p.first_site)));
        }
    }
    let per_sample: Vec<Result<Vec<(f64, f64, ComplexMatrix)>>> = map_samples(cfg.samples, |k| {
        let mut rng = RngSeed::for_sample(cfg.seed, k as u64).rng();
        let mps = Mps::random(shape.clone(), &mut rng);
        sites
            .iter()
            .map(|&site| {
                let parts = mps.term_gradients(&terms, site)?;
                let dim = shape.unitary_dim(site);
                let mut total = ComplexMatrix::zeros(dim, dim);
                let mut diag = 0.0;
                for g in &parts {
                    diag += gradient_norm_per_dim(g);
                    total += g;
                }
                Ok((gradient_norm_per_dim(&total), diag, total))
            })
            .collect()
    });
    let per_sample: Vec<Vec<(f64, f64, ComplexMatrix)>> = per_sample.into_iter().collect::<Result<_>>()?;
    let mut reports = Vec::with_capacity(sites.len());
    for (idx, &site) in sites.iter().enumerate() {
        let values: Vec<f64> = per_sample.iter().map(|s| s[idx].0).collect();
        let diag: Vec<f64> = per_sample.iter().map(|s| s[idx].1).collect();
        let stats = summarize(&values)?;
        let diag_stats = summarize(&diag)?;
        let prediction = if shape.is_bulk(site) {
            cfg.prediction(site).map(|p| predict_variance(&p))
        } else {
            None
        };
        let mut report = VarianceReport::from_stats("grad_var", stats, prediction, cfg.seed);
        report.gradient_mean_max_z = Some(max_mean_z(&gradient_columns(
            per_sample.iter().map(|s| &s[idx].2),
        ))?);
        report.extras.insert("site".into(), site as f64);
        report.extras.insert("diagonal".into(), diag_stats.mean);
        report.extras.insert("diagonal_stderr".into(), diag_stats.stderr);
        if let (2, TermLayout::Extensive, true) = (cfg.term.support(), &cfg.layout, shape.is_bulk(site)) {
            let m = term_moments(&cfg.term);
            let (d_pred, o_pred) = nearest_neighbour_extensive_parts(cfg.bond_dim, cfg.phys_dim, m.tr_h2, m.tr_reduced_sq);
            report.extras.insert("diagonal_prediction".into(), d_pred);
            report.extras.insert("offdiagonal_prediction".into(), o_pred);
        }
        reports.push(report);
    }
    Ok(reports)
}

pub fn mc_gradient_variance(cfg: &MpsVarianceConfig, site: usize) -> Result<VarianceReport> {
    Ok(mc_gradient_variance_sites(cfg, &[site])?.remove(0))
}

/// Norm of the unnormalized MPS √m Σ <0|A_1 … A_L|0> with all tensors drawn as
/// bulk tensors U(1_m ⊗ |0>).
pub fn unnormalized_norm<R: Rng + ?Sized>(length: usize, phys_dim: usize, bond_dim: usize, rng: &mut R) -> f64 {
    let (m, d) = (bond_dim, phys_dim);
    let mut env = ComplexMatrix::zeros(m, m);
    env[(0, 0)] = ONE;
    let cols: Vec<usize> = (0..m).map(|b| b * d).collect();
    let mut tensors: Vec<ComplexMatrix> = (0..length)
        .map(|_| {
            let u = haar_unitary(m * d, rng).into_matrix();
            ComplexMatrix::from_fn(m * d, m, |r, c| u[(r, cols[c])])
        })
        .collect();
    while let Some(a) = tensors.pop() {
        let full = &a * &env * a.adjoint();
        env = LegOperator::new(vec![0, 1], vec![m, d], full)
            .trace_out(&[1])
            .into_matrix();
    }
    env[(0, 0)].re * m as f64
}

/// Mean and variance of the unnormalized MPS norm.
pub fn norm_statistics(length: usize, phys_dim: usize, bond_dim: usize, samples: usize, seed: u64) -> Result<VarianceReport> {
    if phys_dim < 2 || bond_dim < 1 || length < 1 {
        return Err(Error::InvalidDimension(format!(
            "L={length} d={phys_dim} m={bond_dim}"
        )));
    }
    if samples < 100 {
        return Err(Error::InsufficientSamples(format!("{samples} < 100")));
    }
    let norms = map_samples(samples, |k| {
        let mut rng = RngSeed::for_sample(seed, k as u64).rng();
        unnormalized_norm(length, phys_dim, bond_dim, &mut rng)
    });
    let mean_stats = summarize(&norms)?;
    let centered: Vec<f64> = norms.iter().map(|x| (x - mean_stats.mean).powi(2)).collect();
    let mut var_stats = summarize(&centered)?;
    var_stats.mean = mean_stats.variance;
    let prediction = predict_variance(&VariancePrediction::NormVariance {
        bond_dim,
        phys_dim,
    });
    let mut report = VarianceReport::from_stats("norm_var", var_stats, Some(prediction), seed);
    report.extras.insert("norm_mean".into(), mean_stats.mean);
    report.extras.insert("norm_mean_stderr".into(), mean_stats.stderr);
    Ok(report)
}

/// Squared overlap helper used by tests and the FFI layer.
pub fn state_norm(psi: &DVector<C64>) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}
