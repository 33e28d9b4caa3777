//! Spectra of small nonsymmetric real matrices with many exact zero
//! eigenvalues.

use nalgebra::DVector;
use num_complex::Complex64;

use super::basis::RealMatrix;
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-13;
/// Eigenvalues closer than this are treated as one degenerate group.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// All eigenvalues, sorted by decreasing modulus (then decreasing real part).
///
/// Rank deficiency is removed first: for M = U Σ Vᵀ truncated to rank r, the
/// nonzero spectrum of M equals that of Σ Vᵀ U, and the remaining n - r
/// eigenvalues are exactly zero.
pub fn eigenvalues(m: &RealMatrix) -> Vec<Complex64> {
    let mut out = deflated(m);
    out.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
    });
    out
}

fn deflated(m: &RealMatrix) -> Vec<Complex64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let rank = idx
        .iter()
        .take_while(|&&k| svd.singular_values[k] > RANK_TOL * smax)
        .count();
    if rank == n {
        return m
            .clone()
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect();
    }
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let left = RealMatrix::from_fn(n, rank, |r, c| u[(r, idx[c])]);
    let right = RealMatrix::from_fn(rank, n, |r, c| svd.singular_values[idx[r]] * vt[(idx[r], c)]);
    let mut vals = deflated(&(right * left));
    vals.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), n - rank));
    vals
}

/// Real eigenvalues with their biorthonormal left and right eigenvectors.
#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub value: f64,
    pub left: DVector<f64>,
    pub right: DVector<f64>,
}

fn null_space(a: &RealMatrix, count: usize) -> Result<RealMatrix> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&x, &y| svd.singular_values[x].partial_cmp(&svd.singular_values[y]).unwrap());
    let scale = svd.singular_values.max().max(1.0);
    if idx.len() < count || svd.singular_values[idx[count - 1]] > 1e-6 * scale {
        return Err(Error::Constraint(format!(
            "eigenspace of dimension {count} not found (smallest singular values {:?})",
            idx.iter().take(count).map(|&k| svd.singular_values[k]).collect::<Vec<_>>()
        )));
    }
    Ok(RealMatrix::from_fn(n, count, |r, c| vt[(idx[c], r)]))
}

/// The `count` leading eigenvalues (by modulus) with eigenvectors normalized
/// so that ⟨⟨ℓ_i|r_j⟩⟩ = δ_ij. Fails on complex or defective eigenvalues.
pub fn eigenpairs(m: &RealMatrix, count: usize) -> Result<Vec<Eigenpair>> {
    let n = m.nrows();
    let vals = eigenvalues(m);
    if count > n {
        return Err(Error::OutOfRange(format!("{count} eigenpairs of a {n}x{n} matrix")));
    }
    let mut pairs = Vec::with_capacity(count);
    let mut k = 0;
    while k < count {
        let lead = vals[k];
        if lead.im.abs() > DEGENERACY_TOL {
            return Err(Error::Constraint(format!("complex eigenvalue {lead}")));
        }
        let group: Vec<f64> = vals[k..]
            .iter()
            .take_while(|v| (**v - lead).norm() < DEGENERACY_TOL)
            .map(|v| v.re)
            .collect();
        let mult = group.len();
        let value = group.iter().sum::<f64>() / mult as f64;
        let shifted = m - RealMatrix::identity(n, n) * value;
        let right = null_space(&shifted, mult)?;
        let left = null_space(&shifted.transpose(), mult)?;
        let overlap = left.transpose() * &right;
        let inv = overlap.clone().try_inverse().ok_or_else(|| {
            Error::Constraint(format!("defective eigenvalue {value}"))
        })?;
        let right = right * inv;
        let check = (left.transpose() * &right - RealMatrix::identity(mult, mult)).abs().max();
        if check > 1e-8 {
            return Err(Error::Constraint(format!("biorthogonalization failed ({check:e})")));
        }
        for c in 0..mult {
            pairs.push(Eigenpair {
                value,
                left: left.column(c).into_owned(),
                right: right.column(c).into_owned(),
            });
        }
        k += mult;
    }
    pairs.truncate(count);
    Ok(pairs)
}

/// Leading eigenvalues as real numbers; fails if any has an imaginary part.
pub fn real_spectrum(m: &RealMatrix) -> Result<Vec<f64>> {
    eigenvalues(m)
        .into_iter()
        .map(|v| {
            if v.im.abs() > DEGENERACY_TOL {
                Err(Error::Constraint(format!("complex eigenvalue {v}")))
            } else {
                Ok(v.re)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_deficient_spectrum() {
        // Similarity transform of diag(1, 0.5, 0, 0).
        let d = RealMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5, 0.0, 0.0]));
        let p = RealMatrix::from_row_slice(4, 4, &[
            1.0, 2.0, 0.0, 1.0, 0.0, 1.0, 3.0, 0.0, 1.0, 0.0, 1.0, 2.0, 0.0, 1.0, 0.0, 1.0,
        ]);
        let m = &p * d * p.clone().try_inverse().unwrap();
        let vals = real_spectrum(&m).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 0.5).abs() < 1e-12);
        assert_eq!(vals[2], 0.0);
        assert_eq!(vals[3], 0.0);
        let pairs = eigenpairs(&m, 2).unwrap();
        for pair in &pairs {
            assert!((&m * &pair.right - &pair.right * pair.value).norm() < 1e-10);
            assert!((m.transpose() * &pair.left - &pair.left * pair.value).norm() < 1e-10);
            assert!((pair.left.dot(&pair.right) - 1.0).abs() < 1e-10);
        }
        assert!(pairs[0].left.dot(&pairs[1].right).abs() < 1e-10);
    }

    #[test]
    fn degenerate_pairs_are_biorthonormal() {
        let m = RealMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0]);
        assert!(eigenpairs(&m, 3).is_err());
        let sym = RealMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, 1.0]));
        let pairs = eigenpairs(&sym, 3).unwrap();
        assert_eq!(pairs.len(), 3);
        assert!((pairs[1].value - 0.5).abs() < 1e-15);
    }
}
