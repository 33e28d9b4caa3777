//! Riemannian gradients on the unitary group and their Haar-averaged variances.
//!
//! An energy of the form E(U) = Tr(X (U† ⊗ 1_M) Y (U ⊗ 1_M)) has Euclidean
//! gradient d = 2 Tr_M(Y (U ⊗ 1) X) and Riemannian gradient (d - U d† U) / 2.
//! The variance of a gradient g at a U(N) tensor is (1/N) Tr(g† g).

use crate::error::{Error, Result};
use crate::legs::LegOperator;
use crate::stats::{max_mean_z, summarize, VarianceReport};
use crate::tensor::{
    frobenius_sq, haar_unitary, identity, kron, trace, ComplexMatrix, RngSeed, C64,
};

/// Projection of an ambient matrix onto the tangent space at `u`.
pub fn project_tangent(u: &ComplexMatrix, d: &ComplexMatrix) -> ComplexMatrix {
    (d - u * d.adjoint() * u) * C64::new(0.5, 0.0)
}

fn check_env(op: &ComplexMatrix, n: usize, m: usize, name: &str) -> Result<()> {
    if op.nrows() != n * m || op.ncols() != n * m {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} {name}", n * m),
            found: format!("{}x{}", op.nrows(), op.ncols()),
        });
    }
    Ok(())
}

/// d = 2 Tr_M(Y (U ⊗ 1_M) X) for environments on C^N ⊗ C^M.
pub fn euclidean_gradient(
    u: &ComplexMatrix,
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    m: usize,
) -> Result<ComplexMatrix> {
    let n = u.nrows();
    check_env(x, n, m, "X")?;
    check_env(y, n, m, "Y")?;
    let lifted = kron(u, &identity(m));
    let full = y * lifted * x;
    let reduced = LegOperator::new(vec![0, 1], vec![n, m], full).trace_out(&[1]);
    Ok(reduced.into_matrix() * C64::new(2.0, 0.0))
}

pub fn riemannian_gradient(
    u: &ComplexMatrix,
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    m: usize,
) -> Result<ComplexMatrix> {
    Ok(project_tangent(u, &euclidean_gradient(u, x, y, m)?))
}

/// (1/N) Tr(g† g) for a gradient at a U(N) tensor.
pub fn gradient_norm_per_dim(g: &ComplexMatrix) -> f64 {
    frobenius_sq(g) / g.nrows() as f64
}

fn centered_square(a: &ComplexMatrix) -> f64 {
    let n = a.nrows() as f64;
    let tr = trace(a).re;
    trace(&(a * a)).re - tr * tr / n
}

/// Haar-averaged gradient variance for M = 1:
/// 2/(N²-1) Tr((X - Tr X/N)²) Tr((Y - Tr Y/N)²).
pub fn predicted_variance_product(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<f64> {
    let n = x.nrows();
    check_env(y, n, 1, "Y")?;
    if n < 2 {
        return Err(Error::InvalidDimension("N must be at least 2".into()));
    }
    let nf = n as f64;
    Ok(2.0 / (nf * nf - 1.0) * centered_square(x) * centered_square(y))
}

/// Haar-averaged gradient variance for environments on C^N ⊗ C^M.
pub fn predicted_variance_with_ancilla(
    x: &ComplexMatrix,
    y: &ComplexMatrix,
    n: usize,
    m: usize,
) -> Result<f64> {
    check_env(x, n, m, "X")?;
    check_env(y, n, m, "Y")?;
    if n < 2 {
        return Err(Error::InvalidDimension("N must be at least 2".into()));
    }
    // <i1 i2|Z|j1 j2> = sum_{a,b} <i1 a|X|j1 b> <i2 b|Y|j2 a>
    let mut z = ComplexMatrix::zeros(n * n, n * n);
    for i1 in 0..n {
        for j1 in 0..n {
            for i2 in 0..n {
                for j2 in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for a in 0..m {
                        for b in 0..m {
                            acc += x[(i1 * m + a, j1 * m + b)] * y[(i2 * m + b, j2 * m + a)];
                        }
                    }
                    z[(i1 * n + i2, j1 * n + j2)] = acc;
                }
            }
        }
    }
    let nf = n as f64;
    let zl = LegOperator::new(vec![0, 1], vec![n, n], z.clone());
    let first = zl.trace_out(&[0]).into_matrix();
    let second = zl.trace_out(&[1]).into_matrix();
    let tr_z = trace(&z).re;
    let bracket = trace(&(&z * &z)).re
        - (trace(&(&first * &first)).re + trace(&(&second * &second)).re) / nf
        + tr_z * tr_z / (nf * nf);
    Ok(2.0 / (nf * nf - 1.0) * bracket)
}

/// Closed form for a state U|0> with U Haar on the full space of dimension `dim`.
pub fn global_unitary_prediction(tr_h2: f64, dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * tr_h2 / (n * (n + 1.0))
}

/// Monte Carlo variance of the gradient with respect to a single global unitary
/// preparing U|0>, for a Hermitian `h` on the full space.
pub fn global_unitary_variance(h: &ComplexMatrix, samples: usize, seed: u64) -> Result<VarianceReport> {
    let n = h.nrows();
    if samples < 2 {
        return Err(Error::InsufficientSamples(format!("{samples} samples")));
    }
    let mut x = ComplexMatrix::zeros(n, n);
    x[(0, 0)] = C64::new(1.0, 0.0);
    let results: Vec<(f64, ComplexMatrix)> = crate::parallel::map_samples(samples, |k| {
        let mut rng = RngSeed::for_sample(seed, k as u64).rng();
        let u = haar_unitary(n, &mut rng).into_matrix();
        let d = h * &u * &x * C64::new(2.0, 0.0);
        let g = project_tangent(&u, &d);
        (gradient_norm_per_dim(&g), g)
    });
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    let stats = summarize(&values)?;
    let tr_h2 = trace(&(h * h)).re;
    let mut report = VarianceReport::from_stats(
        "grad_var",
        stats,
        Some(global_unitary_prediction(tr_h2, n)),
        seed,
    );
    report.gradient_mean_max_z = Some(max_mean_z(&gradient_columns(
        results.iter().map(|r| &r.1),
    ))?);
    Ok(report)
}

/// Real and imaginary parts of every entry, one column per component.
pub(crate) fn gradient_columns<'a>(grads: impl Iterator<Item = &'a ComplexMatrix>) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for g in grads {
        if columns.is_empty() {
            columns = vec![Vec::new(); 2 * g.len()];
        }
        for (k, z) in g.iter().enumerate() {
            columns[2 * k].push(z.re);
            columns[2 * k + 1].push(z.im);
        }
    }
    columns
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::pauli_string;
    use crate::tensor::{hermiticity_defect, max_abs};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn tangent_vectors_are_u_times_skew() {
        let mut rng = RngSeed::new(5).rng();
        let u = haar_unitary(4, &mut rng).into_matrix();
        let d = random_hermitian(4, &mut rng) + random_hermitian(4, &mut rng) * C64::new(0.0, 1.0);
        let g = project_tangent(&u, &d);
        let skew = u.adjoint() * &g;
        assert!(max_abs(&(&skew + skew.adjoint())) < 1e-12);
        let again = project_tangent(&u, &g);
        assert!(max_abs(&(again - &g)) < 1e-12);
    }

    #[test]
    fn euclidean_gradient_matches_finite_difference() {
        let mut rng = RngSeed::new(9).rng();
        let (n, m) = (3, 2);
        let u = haar_unitary(n, &mut rng).into_matrix();
        let x = random_hermitian(n * m, &mut rng);
        let y = random_hermitian(n * m, &mut rng);
        let energy = |v: &ComplexMatrix| {
            let lifted = kron(v, &identity(m));
            trace(&(&x * lifted.adjoint() * &y * &lifted)).re
        };
        let d = euclidean_gradient(&u, &x, &y, m).unwrap();
        let w = random_hermitian(n, &mut rng) * C64::new(0.3, 0.7);
        let h = 1e-6;
        let fd = (energy(&(&u + &w * C64::new(h, 0.0))) - energy(&(&u - &w * C64::new(h, 0.0)))) / (2.0 * h);
        let analytic: f64 = d.iter().zip(w.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        assert!((fd - analytic).abs() < 1e-6, "fd {fd} analytic {analytic}");
    }

    #[test]
    fn ancilla_formula_reduces_to_product_formula() {
        let mut rng = RngSeed::new(2).rng();
        let x = random_hermitian(3, &mut rng);
        let y = random_hermitian(3, &mut rng);
        let a = predicted_variance_product(&x, &y).unwrap();
        let b = predicted_variance_with_ancilla(&x, &y, 3, 1).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn identity_environment_gives_zero_gradient() {
        let mut rng = RngSeed::new(4).rng();
        let u = haar_unitary(4, &mut rng).into_matrix();
        let x = random_hermitian(8, &mut rng);
        let g = riemannian_gradient(&u, &x, &identity(8), 2).unwrap();
        assert!(max_abs(&g) < 1e-12);
        assert!(hermiticity_defect(&x) < 1e-12);
    }

    #[test]
    fn global_prediction_two_qubits() {
        let h = pauli_string("ZZ").unwrap();
        assert!((global_unitary_prediction(trace(&(&h * &h)).re, 4) - 0.4).abs() < 1e-15);
    }
}
