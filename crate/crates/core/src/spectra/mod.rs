//! Doubled layer-transition channels in the symmetric/antisymmetric projector
//! basis, their spectra, and closed-form predictions.

pub mod basis;
pub mod channels;
pub mod dense;
pub mod diag;
pub mod eigen;

use serde::Serialize;

pub use basis::{group_matrix, BasisNetwork, RealMatrix};
pub use channels::{
    average_channel, binary_average, binary_channel, binary_offdiag_channel, binary_tilde_channel,
    nonary_average, nonary_channel, ternary_average, ternary_channel, trace_preservation_defect,
    Family, Flavor, Mover, Omitted, NONARY_OFFSETS,
};
pub use diag::{
    binary_diag_avg_exact, binary_diag_avg_leading_term, binary_eigvec_expansion_check,
    hh_coefficients, q_matrix,
};
pub use eigen::{eigenpairs, eigenvalues, real_spectrum, Eigenpair};

use crate::error::Result;

fn sq(x: f64) -> f64 {
    x * x
}

/// Second-largest eigenvalue of the averaged binary MERA channel.
pub fn eta_binary(chi: usize) -> f64 {
    let c = chi as f64;
    c * c * (1.0 + c).powi(4) / (2.0 * (1.0 + c * c).powi(4))
}

/// Nonzero eigenvalue of the shifted-cone binary channel besides 1.
pub fn eta_binary_shifted(chi: usize) -> f64 {
    let c = chi as f64;
    c * c * sq(1.0 + c) / (1.0 + c * c).powi(3)
}

fn ternary_root(c: f64) -> f64 {
    (1.0 + 4.0 * c.powi(2) + 54.0 * c.powi(4) + 4.0 * c.powi(6) + c.powi(8)).sqrt()
}

/// Second-largest eigenvalue of the averaged ternary MERA channel.
pub fn eta_ternary(chi: usize) -> f64 {
    let c = chi as f64;
    let p = 1.0 + c * c + c.powi(4);
    c * c * (1.0 + 8.0 * c * c + c.powi(4) + ternary_root(c)) / (6.0 * p * p)
}

/// Series for the second-largest eigenvalue of the averaged nonary MERA channel.
pub fn eta_nonary_series(chi: usize) -> f64 {
    let c = chi as f64;
    1.0 / (9.0 * c.powi(8)) + 7.0 / (9.0 * c.powi(10)) - 16.0 / (9.0 * c.powi(12))
}

/// Nonzero spectrum predicted for a channel, sorted as returned by the solver.
pub fn predicted_spectrum(family: Family, flavor: Flavor, mover: Option<Mover>, chi: usize) -> Option<Vec<f64>> {
    let c = chi as f64;
    let c2 = c * c;
    let p = 1.0 + c2 + c2 * c2;
    let spectrum = match (family, flavor, mover) {
        (Family::Binary1d, Flavor::Mera, Some(Mover::Left | Mover::Right)) => vec![
            1.0,
            c2 * sq(1.0 + c) / (1.0 + c2).powi(3),
            c.powi(3) * sq(1.0 + c) / (1.0 + c2).powi(4),
            c.powi(3) / (1.0 + c2).powi(3),
        ],
        (Family::Binary1d, Flavor::Mera, None) => vec![
            1.0,
            eta_binary(chi),
            c2 * sq(1.0 + c) / (2.0 * (1.0 + c2).powi(3)),
            c.powi(3) / (1.0 + c2).powi(3),
        ],
        (Family::Binary1d, Flavor::Ttns, None) => {
            let eta = c / (1.0 + c2);
            let small = c2 / (2.0 * sq(1.0 + c2));
            vec![1.0, eta, eta / 2.0, eta / 2.0, small, small]
        }
        (Family::Ternary1d, Flavor::Mera, Some(Mover::Left | Mover::Right)) => vec![
            1.0,
            c2 / p,
            c2 * c2 / (sq(1.0 - c + c2) * (1.0 + c2) * (1.0 + c + c2)),
            c2 * c2 / ((1.0 - c + c2) * (1.0 + c2) * sq(1.0 + c + c2)),
        ],
        (Family::Ternary1d, Flavor::Mera, Some(Mover::Center)) => vec![1.0, 3.0 * c2 * c2 / (p * p)],
        (Family::Ternary1d, Flavor::Mera, None) => vec![
            1.0,
            eta_ternary(chi),
            c2 / (3.0 * p),
            c2 * (1.0 + 8.0 * c2 + c2 * c2 - ternary_root(c)) / (6.0 * p * p),
        ],
        (Family::Ternary1d, Flavor::Ttns, None) => {
            let eta = c2 / p;
            vec![1.0, eta, eta / 3.0, c2 * c2 / (3.0 * p * p)]
        }
        (Family::Nonary2d, Flavor::Ttns, None) => {
            let eta = c.powi(8) / (1.0 + c2 * (1.0 + c2) * (1.0 + c2 * c2) * (1.0 + c.powi(8)));
            vec![1.0, eta, eta / 3.0, eta / 3.0, eta / 9.0]
        }
        _ => return None,
    };
    Some(spectrum)
}

/// Channel matrix for a family/flavor and either one mover or the average.
pub fn channel_matrix(family: Family, flavor: Flavor, mover: Option<Mover>, chi: usize) -> Result<RealMatrix> {
    match (family, mover) {
        (_, None) => average_channel(family, flavor, chi),
        (Family::Binary1d, Some(m)) => binary_channel(chi, flavor, m),
        (Family::Ternary1d, Some(m)) => ternary_channel(chi, flavor, m),
        (Family::Nonary2d, Some(_)) => Err(crate::error::Error::Constraint(
            "nonary channels are addressed by window offset".into(),
        )),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
    pub prediction: Option<f64>,
}

/// Real spectrum of a channel paired with the closed-form prediction where one
/// exists (nonzero eigenvalues only in the prediction list).
pub fn spectrum_report(family: Family, flavor: Flavor, mover: Option<Mover>, chi: usize) -> Result<Vec<SpectrumRow>> {
    let m = channel_matrix(family, flavor, mover, chi)?;
    let vals = real_spectrum(&m)?;
    let predicted = predicted_spectrum(family, flavor, mover, chi);
    Ok(vals
        .into_iter()
        .enumerate()
        .map(|(k, v)| SpectrumRow {
            index: k + 1,
            eigenvalue: v,
            prediction: predicted.as_ref().map(|p| p.get(k).copied().unwrap_or(0.0)),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{pauli_string, LocalTerm};

    fn assert_spectrum(m: &RealMatrix, expected: &[f64], tol: f64) {
        let vals = real_spectrum(m).unwrap();
        for (k, e) in expected.iter().enumerate() {
            assert!((vals[k] - e).abs() < tol, "index {k}: {} vs {e} (all {vals:?})", vals[k]);
        }
        for v in &vals[expected.len()..] {
            assert!(v.abs() < 1e-12, "extra eigenvalue {v} in {vals:?}");
        }
    }

    #[test]
    fn binary_goldens_at_chi_two() {
        assert_spectrum(&binary_channel(2, Flavor::Mera, Mover::Right).unwrap(), &[1.0, 0.288, 0.1152, 0.064], 1e-9);
        assert_spectrum(&binary_channel(2, Flavor::Mera, Mover::Left).unwrap(), &[1.0, 0.288, 0.1152, 0.064], 1e-9);
        assert_spectrum(&binary_average(2, Flavor::Mera).unwrap(), &[1.0, 0.2592, 0.144, 0.064], 1e-9);
        assert_spectrum(&binary_offdiag_channel(2).unwrap(), &[1.0, 0.288], 1e-9);
        assert!((eta_binary(2) - 324.0 / 1250.0).abs() < 1e-15);
    }

    #[test]
    fn ternary_goldens_at_chi_two() {
        let mover = [1.0, 4.0 / 21.0, 16.0 / 315.0, 16.0 / 735.0];
        assert_spectrum(&ternary_channel(2, Flavor::Mera, Mover::Right).unwrap(), &mover, 1e-9);
        assert_spectrum(&ternary_channel(2, Flavor::Mera, Mover::Left).unwrap(), &mover, 1e-9);
        assert_spectrum(&ternary_channel(2, Flavor::Mera, Mover::Center).unwrap(), &[1.0, 48.0 / 441.0], 1e-9);
        let average = ternary_average(2, Flavor::Mera).unwrap();
        assert_spectrum(&average, &predicted_spectrum(Family::Ternary1d, Flavor::Mera, None, 2).unwrap(), 1e-9);
        assert_spectrum(&average, &[1.0, 0.130496, 0.063492, 0.017652], 1e-6);
    }

    #[test]
    fn ttns_goldens_at_chi_two() {
        assert_spectrum(&binary_average(2, Flavor::Ttns).unwrap(), &[1.0, 0.4, 0.2, 0.2, 0.08, 0.08], 1e-9);
        assert_spectrum(
            &ternary_average(2, Flavor::Ttns).unwrap(),
            &[1.0, 4.0 / 21.0, 4.0 / 63.0, 16.0 / 1323.0],
            1e-9,
        );
    }

    #[test]
    fn closed_forms_hold_on_a_grid() {
        for chi in 2..=6 {
            for (family, flavor, mover) in [
                (Family::Binary1d, Flavor::Mera, Some(Mover::Right)),
                (Family::Binary1d, Flavor::Mera, None),
                (Family::Binary1d, Flavor::Ttns, None),
                (Family::Ternary1d, Flavor::Mera, Some(Mover::Left)),
                (Family::Ternary1d, Flavor::Mera, Some(Mover::Center)),
                (Family::Ternary1d, Flavor::Mera, None),
                (Family::Ternary1d, Flavor::Ttns, None),
            ] {
                let m = channel_matrix(family, flavor, mover, chi).unwrap();
                let expected = predicted_spectrum(family, flavor, mover, chi).unwrap();
                assert_spectrum(&m, &expected, 1e-9);
            }
        }
    }

    #[test]
    fn nonary_ttns_and_mera() {
        let ttns = predicted_spectrum(Family::Nonary2d, Flavor::Ttns, None, 2).unwrap();
        assert!((ttns[1] - 256.0 / 87381.0).abs() < 1e-15);
        let vals = real_spectrum(&nonary_average(2, Flavor::Ttns).unwrap()).unwrap();
        for (k, e) in ttns.iter().enumerate() {
            assert!((vals[k] - e).abs() < 1e-12, "{vals:?}");
        }
        let vals = real_spectrum(&nonary_average(8, Flavor::Mera).unwrap()).unwrap();
        let series = eta_nonary_series(8);
        assert!((vals[1] / series - 1.0).abs() < 0.02, "{} vs {series}", vals[1]);
        for chi in [2, 4, 8] {
            let vals = real_spectrum(&nonary_average(chi, Flavor::Mera).unwrap()).unwrap();
            assert!((vals[2] - vals[3]).abs() <= 1e-6 * vals[2], "chi {chi}: {vals:?}");
        }
    }

    #[test]
    fn contraction_and_branching_bound() {
        for chi in 2..=8 {
            for family in [Family::Binary1d, Family::Ternary1d, Family::Nonary2d] {
                if family == Family::Nonary2d && chi > 4 {
                    continue;
                }
                let vals = eigenvalues(&average_channel(family, Flavor::Mera, chi).unwrap());
                assert!((vals[0].re - 1.0).abs() < 1e-10);
                assert!(vals[1].norm() < 1.0 - 1e-6);
                assert!(family.branching() as f64 * vals[1].norm() < 1.0);
            }
            assert!(eta_binary_shifted(chi) < 2.0 * eta_binary(chi));
        }
    }

    #[test]
    fn basis_matches_dense_moments() {
        for flavor in [Flavor::Mera, Flavor::Ttns] {
            for mover in [Mover::Left, Mover::Right] {
                let a = binary_channel(2, flavor, mover).unwrap();
                let b = dense::dense_binary_channel(2, flavor, mover).unwrap();
                assert!((a - b).abs().max() < 1e-10, "binary {flavor:?} {mover:?}");
            }
            for mover in [Mover::Left, Mover::Center, Mover::Right] {
                let a = ternary_channel(2, flavor, mover).unwrap();
                let b = dense::dense_ternary_channel(2, flavor, mover).unwrap();
                assert!((a - b).abs().max() < 1e-10, "ternary {flavor:?} {mover:?}");
            }
        }
        let a = binary_offdiag_channel(2).unwrap();
        let b = dense::dense_offdiag_channel(2).unwrap();
        assert!((a - b).abs().max() < 1e-10);
        let g = group_matrix(&[2, 2]);
        assert!((g - dense::dense_group_matrix(2, 2).unwrap()).abs().max() < 1e-12);
    }

    #[test]
    fn eigenvector_expansions_converge() {
        let d32 = binary_eigvec_expansion_check(32).unwrap();
        let d64 = binary_eigvec_expansion_check(64).unwrap();
        assert!(d32.l1 < 1e-12);
        assert!(d32.r1 <= 5.0 / (32.0 * 32.0), "{d32:?}");
        let ratio = d64.max() / d32.max();
        assert!((ratio - 0.25).abs() < 0.3 * 0.25, "ratio {ratio}");
    }

    #[test]
    fn diag_leading_term_structure() {
        let h = LocalTerm::new(pauli_string("ZZZ").unwrap(), 3, 2).unwrap();
        let v2 = binary_diag_avg_leading_term(2, 2, &h).unwrap();
        let v3 = binary_diag_avg_leading_term(2, 3, &h).unwrap();
        assert!((v3 / v2 - 2.0 * eta_binary(2)).abs() < 1e-12);
        let h3 = h.scaled(3.0);
        let scaled = binary_diag_avg_leading_term(2, 2, &h3).unwrap();
        assert!((scaled / v2 - 9.0).abs() < 1e-10);
        // Deep in a tall network the exact sum approaches the leading term.
        let exact = binary_diag_avg_exact(2, 12, 40, &h).unwrap();
        let lead = binary_diag_avg_leading_term(2, 12, &h).unwrap();
        assert!((exact / lead - 1.0).abs() < 0.02, "exact {exact} lead {lead}");
    }

    #[test]
    fn diag_bracket_large_chi() {
        // Bracket of the leading term against its 1/χ expansion.
        for chi in [64usize, 128] {
            let ev = diag::binary_eigenvectors(chi).unwrap();
            let (el, _) = binary_tilde_channel(chi, Mover::Left, Omitted::Second).unwrap();
            let (er, _) = binary_tilde_channel(chi, Mover::Right, Omitted::Second).unwrap();
            let c = chi as f64;
            let q4 = RealMatrix::identity(4, 4).kronecker(&q_matrix(chi));
            let q3 = RealMatrix::identity(2, 2).kronecker(&q_matrix(chi));
            // r₂ scale as in the expansion: fit to its leading entry pattern.
            let alpha = 1.0 / ev.r2[0] * (1.0 + 4.0 / c);
            let l2 = &ev.l2 / alpha;
            let l2_ext = l2.kronecker(&nalgebra::DVector::from_element(2, 1.0));
            let left = l2_ext.dot(&(q4 * el * &ev.r1));
            let right = l2.dot(&(q3 * er * &ev.r1));
            let expected_left = 0.25 - 0.25 / c;
            let expected_right = c / 4.0 + 0.125 - 21.0 / (8.0 * c);
            assert!((left - expected_left).abs() < 20.0 / (c * c), "chi {chi}: left {left} vs {expected_left}");
            assert!((right - expected_right).abs() < 20.0 / (c * c) * c, "chi {chi}: right {right} vs {expected_right}");
        }
    }
}
