//! Diagonal (i = j) contributions to the layer-averaged disentangler gradient
//! variance of binary 1D MERA.

use nalgebra::DVector;

use super::basis::{omega, swap_row, trace_row, RealMatrix};
use super::channels::{binary_average, binary_tilde_channel, check_chi, Flavor, Mover, Omitted};
use super::eigen::{eigenpairs, Eigenpair};
use crate::error::{Error, Result};
use crate::hamiltonian::LocalTerm;
use crate::tensor::ipow;

/// Two-site map |Swap - 1/χ²⟩⟩⟨⟨Swap - 1/χ²| in the basis.
pub fn q_matrix(chi: usize) -> RealMatrix {
    let c2 = (chi * chi) as f64;
    let col = swap_row().transpose().kronecker(&swap_row().transpose())
        - trace_row().transpose().kronecker(&trace_row().transpose()) / c2;
    omega(chi).kronecker(&omega(chi)) * &col * col.transpose()
}

/// ⟨⟨h⊗h|P'_σ⟩⟩ for all σ: Tr(P_σ h⊗h)/ν_σ with the copies of each site paired.
pub fn hh_coefficients(h: &LocalTerm) -> Result<DVector<f64>> {
    let k = h.support();
    let chi = h.site_dim();
    let nu = |minus: bool| {
        let c = chi as f64;
        if minus {
            c * (c - 1.0) / 2.0
        } else {
            c * (c + 1.0) / 2.0
        }
    };
    // Tr(P_σ h⊗h) = 2^-k Σ_A Π_{s∈A} σ_s Tr[(Tr_{Ā} h)²]
    let op = crate::legs::LegOperator::new((0..k).collect(), vec![chi; k], h.matrix().clone());
    let mut subset_terms = vec![0.0; 1 << k];
    for (mask, term) in subset_terms.iter_mut().enumerate() {
        let kept: Vec<usize> = (0..k).filter(|s| (mask >> (k - 1 - s)) & 1 == 1).collect();
        let reduced = op.reduce_to(&kept).into_matrix();
        *term = if kept.is_empty() {
            reduced[(0, 0)].re.powi(2)
        } else {
            (&reduced * &reduced).trace().re
        };
    }
    let mut out = DVector::zeros(1 << k);
    for sigma in 0..1usize << k {
        let mut acc = 0.0;
        for (mask, term) in subset_terms.iter().enumerate() {
            let sign_bits = (sigma & mask).count_ones();
            let sign = if sign_bits % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term;
        }
        let weight: f64 = (0..k)
            .map(|s| nu((sigma >> (k - 1 - s)) & 1 == 1))
            .product();
        out[sigma] = acc / ipow(2, k) as f64 / weight;
    }
    Ok(out)
}

fn check_term(h: &LocalTerm, chi: usize) -> Result<()> {
    if h.support() != 3 || h.site_dim() != chi {
        return Err(Error::ShapeMismatch {
            expected: format!("3-site term with site dimension {chi}"),
            found: format!("{}-site term with site dimension {}", h.support(), h.site_dim()),
        });
    }
    Ok(())
}

/// Insert Q on the legs at `positions` (consecutive) of an n-site basis map.
fn with_q(chi: usize, m: &RealMatrix, legs: usize, first: usize) -> RealMatrix {
    let left = RealMatrix::identity(1 << first, 1 << first);
    let right_count = legs - first - 2;
    let right = RealMatrix::identity(1 << right_count, 1 << right_count);
    left.kronecker(&q_matrix(chi)).kronecker(&right) * m
}

/// ℓ₂, r₂ and r₁ of the averaged binary channel with ⟨⟨ℓ₁|r₁⟩⟩ = 1, ℓ₁ = t^{⊗3}.
pub struct BinaryEigenvectors {
    pub eta: f64,
    pub r1: DVector<f64>,
    pub l2: DVector<f64>,
    pub r2: DVector<f64>,
}

pub fn binary_eigenvectors(chi: usize) -> Result<BinaryEigenvectors> {
    let e = binary_average(chi, Flavor::Mera)?;
    let pairs: Vec<Eigenpair> = eigenpairs(&e, 2)?;
    let ones = DVector::from_element(8, 1.0);
    let scale = pairs[0].left.dot(&ones) / 8.0;
    let r1 = &pairs[0].right * scale;
    Ok(BinaryEigenvectors {
        eta: pairs[1].value,
        r1,
        l2: pairs[1].left.clone(),
        r2: pairs[1].right.clone(),
    })
}

/// Leading (2η)^{τ-1} term of the diagonal contributions, using the steady
/// state for the layers above and two reflection-related terms.
pub fn binary_diag_avg_leading_term(chi: usize, tau: usize, h: &LocalTerm) -> Result<f64> {
    check_chi(chi)?;
    check_term(h, chi)?;
    if tau == 0 {
        return Err(Error::OutOfRange("layer index starts at 1".into()));
    }
    let ev = binary_eigenvectors(chi)?;
    let hh = hh_coefficients(h)?;
    let (el, _) = binary_tilde_channel(chi, Mover::Left, Omitted::Second)?;
    let (er, _) = binary_tilde_channel(chi, Mover::Right, Omitted::Second)?;
    let l2_ext = ev.l2.kronecker(&DVector::from_element(2, 1.0));
    let left_term = l2_ext.dot(&(with_q(chi, &el, 4, 2) * &ev.r1));
    let right_term = ev.l2.dot(&(with_q(chi, &er, 3, 1) * &ev.r1));
    let c4 = ipow(chi, 4) as f64;
    Ok(4.0 * hh.dot(&ev.r2) / (c4 - 1.0)
        * (2.0 * ev.eta).powi(tau as i32 - 1)
        * (left_term + right_term))
}

/// Layer-τ diagonal contributions for a network with `layers` layers and a
/// product top state, summed exactly over the four blocks of the causal
/// support and averaged over the disentanglers of the layer.
pub fn binary_diag_avg_exact(chi: usize, tau: usize, layers: usize, h: &LocalTerm) -> Result<f64> {
    check_chi(chi)?;
    check_term(h, chi)?;
    if tau == 0 || tau > layers {
        return Err(Error::OutOfRange(format!("layer {tau} of {layers}")));
    }
    let e = binary_average(chi, Flavor::Mera)?;
    let mut y = RealMatrix::from_row_slice(1, 8, hh_coefficients(h)?.as_slice());
    for _ in 1..tau {
        y = &y * &e;
    }
    y *= ipow(2, tau - 1) as f64;
    let mut x = DVector::zeros(8);
    x[0] = 1.0;
    for _ in tau..layers {
        x = &e * x;
    }
    let c4 = ipow(chi, 4) as f64;
    let mut total = 0.0;
    for (mover, omitted) in [
        (Mover::Left, Omitted::Second),
        (Mover::Right, Omitted::Second),
        (Mover::Left, Omitted::First),
        (Mover::Right, Omitted::First),
    ] {
        let (m, legs) = binary_tilde_channel(chi, mover, omitted)?;
        let q_first = match omitted {
            Omitted::First => legs.iter().position(|&l| l == 1).unwrap(),
            _ => legs.iter().position(|&l| l == 3).unwrap(),
        };
        let window: &[usize] = match mover {
            Mover::Right => &[2, 3, 4],
            _ => &[1, 2, 3],
        };
        let yrow = expand_row(&y, window, &legs);
        let value = (yrow * with_q(chi, &m, legs.len(), q_first) * &x)[(0, 0)];
        total += value;
    }
    Ok(2.0 / (c4 - 1.0) * total)
}

/// Extend a row vector on `window` legs by t on the remaining `legs`.
fn expand_row(y: &RealMatrix, window: &[usize], legs: &[usize]) -> RealMatrix {
    let n = legs.len();
    let k = window.len();
    RealMatrix::from_fn(1, 1 << n, |_, idx| {
        let mut sub = 0usize;
        let mut j = 0;
        for (p, l) in legs.iter().enumerate() {
            if window.contains(l) {
                let bit = (idx >> (n - 1 - p)) & 1;
                sub |= bit << (k - 1 - j);
                j += 1;
            }
        }
        y[(0, sub)]
    })
}

/// Maximum entrywise deviation of the numeric ℓ₁, r₁, ℓ₂, r₂ from their
/// first-order 1/χ expansions. The ℓ₂/r₂ scale is fixed by a least-squares
/// fit of r₂ to its expansion.
pub fn binary_eigvec_expansion_check(chi: usize) -> Result<EigvecDeviation> {
    check_chi(chi)?;
    let ev = binary_eigenvectors(chi)?;
    let c = chi as f64;
    let r1_exp = DVector::from_vec(vec![
        1.0 + 3.0 / c,
        1.0 + 1.0 / c,
        1.0 + 1.0 / c,
        1.0 - 1.0 / c,
        1.0 + 1.0 / c,
        1.0 - 1.0 / c,
        1.0 - 1.0 / c,
        1.0 - 3.0 / c,
    ]) / 8.0;
    let l2_exp = DVector::from_vec(vec![
        3.0 - 8.0 / c,
        1.0 - 4.0 / c,
        -1.0,
        -1.0,
        1.0 - 4.0 / c,
        -1.0,
        -1.0,
        -1.0,
    ]) / 4.0;
    let r2_exp = DVector::from_vec(vec![
        1.0 + 4.0 / c,
        -2.0 / c,
        -1.0,
        2.0 / c,
        -2.0 / c,
        -1.0 + 4.0 / c,
        2.0 / c,
        1.0 - 8.0 / c,
    ]);
    let alpha = ev.r2.dot(&r2_exp) / ev.r2.dot(&ev.r2);
    let r2 = &ev.r2 * alpha;
    let l2 = &ev.l2 / alpha;
    let e = binary_average(chi, Flavor::Mera)?;
    let l1 = e.transpose() * DVector::from_element(8, 1.0);
    Ok(EigvecDeviation {
        l1: (l1 - DVector::from_element(8, 1.0)).amax(),
        r1: (&ev.r1 - r1_exp).amax(),
        l2: (l2 - l2_exp).amax(),
        r2: (r2 - r2_exp).amax(),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct EigvecDeviation {
    pub l1: f64,
    pub r1: f64,
    pub l2: f64,
    pub r2: f64,
}

impl EigvecDeviation {
    pub fn max(&self) -> f64 {
        self.l1.max(self.r1).max(self.l2).max(self.r2)
    }
}
