//! First and second Haar moments and the doubled channels built from them.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::legs::LegOperator;
use crate::parallel::map_samples;
use crate::stats::{default_batches, student_t_two_sided_tail};
use crate::tensor::{haar_unitary, identity, ipow, kron, swap_operator, trace, ComplexMatrix, RngSeed, C64, ONE};

/// Symmetric and antisymmetric projectors on C^n ⊗ C^n.
#[derive(Clone, Debug)]
pub struct ProjectorPair {
    pub dim: usize,
    pub plus: ComplexMatrix,
    pub minus: ComplexMatrix,
    pub nu_plus: f64,
    pub nu_minus: f64,
}

impl ProjectorPair {
    pub fn new(dim: usize) -> Self {
        let id = identity(dim * dim);
        let swap = swap_operator(dim);
        let half = C64::new(0.5, 0.0);
        let n = dim as f64;
        Self {
            dim,
            plus: (&id + &swap) * half,
            minus: (&id - &swap) * half,
            nu_plus: n * (n + 1.0) / 2.0,
            nu_minus: n * (n - 1.0) / 2.0,
        }
    }

    /// P+ / ν+.
    pub fn plus_normalized(&self) -> ComplexMatrix {
        &self.plus * C64::new(1.0 / self.nu_plus, 0.0)
    }

    /// P- / ν- (zero when n = 1).
    pub fn minus_normalized(&self) -> ComplexMatrix {
        if self.nu_minus == 0.0 {
            ComplexMatrix::zeros(self.dim * self.dim, self.dim * self.dim)
        } else {
            &self.minus * C64::new(1.0 / self.nu_minus, 0.0)
        }
    }
}

fn square_dim(r: &ComplexMatrix) -> Result<usize> {
    if !r.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square operator".into(),
            found: format!("{}x{}", r.nrows(), r.ncols()),
        });
    }
    Ok(r.nrows())
}

/// Haar average of U R U†: the identity times Tr R / n.
pub fn depolarize(r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = square_dim(r)?;
    Ok(identity(n) * (trace(r) / n as f64))
}

/// Haar average of (U ⊗ U) R (U ⊗ U)† for R on C^n ⊗ C^n.
pub fn doubled_depolarize(r: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    let dim = square_dim(r)?;
    if dim != n * n {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", n * n),
            found: format!("{dim}x{dim}"),
        });
    }
    let p = ProjectorPair::new(n);
    let plus_weight = trace(&(&p.plus * r));
    let minus_weight = trace(&(&p.minus * r));
    Ok(p.plus_normalized() * plus_weight + p.minus_normalized() * minus_weight)
}

/// Doubled transfer channel of a Haar-random MPS tensor: append |0_d 0_d>,
/// average over U(n d) acting on both copies, trace the physical legs.
pub fn doubled_mps_channel(r: &ComplexMatrix, n: usize, d: usize) -> Result<ComplexMatrix> {
    let dim = square_dim(r)?;
    if dim != n * n {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", n * n),
            found: format!("{dim}x{dim}"),
        });
    }
    // legs: bond copy 1, bond copy 2, physical copy 1, physical copy 2
    let op = LegOperator::new(vec![0, 1], vec![n, n], r.clone()).extend_zero(&[2, 3], &[d, d]);
    let grouped = op.matrix_in_order(&[0, 2, 1, 3]);
    let averaged = doubled_depolarize(&grouped, n * d)?;
    let out = LegOperator::new(vec![0, 2, 1, 3], vec![n, d, n, d], averaged);
    Ok(out.reduce_to(&[0, 1]).into_matrix())
}

/// Matrix of the doubled MPS channel in the (P'+, P'-) basis.
pub fn doubled_mps_matrix(n: usize, d: usize) -> Matrix2<f64> {
    let (nf, df) = (n as f64, d as f64);
    let left = Matrix2::new(nf + 1.0, 0.0, 0.0, nf - 1.0) * 0.5;
    let mid = Matrix2::new(df + 1.0, df - 1.0, df - 1.0, df + 1.0);
    let minus_col = if n > 1 { 1.0 / (nf * df - 1.0) } else { 0.0 };
    let right = Matrix2::new(1.0 / (nf * df + 1.0), 0.0, 0.0, minus_col);
    left * mid * right
}

/// Second eigenvalue of the doubled MPS channel.
pub fn mps_eta(n: usize, d: usize) -> f64 {
    let (nf, df) = (n as f64, d as f64);
    (1.0 - 1.0 / (nf * nf)) / (df - 1.0 / (nf * nf * df))
}

/// Eigenvalues with biorthonormal left/right eigenoperators.
#[derive(Clone, Debug)]
pub struct DoubledSpectrum {
    pub eigenvalues: [f64; 2],
    pub left: [ComplexMatrix; 2],
    pub right: [ComplexMatrix; 2],
}

pub fn doubled_mps_spectral(n: usize, d: usize) -> DoubledSpectrum {
    let p = ProjectorPair::new(n);
    let (nf, df) = (n as f64, d as f64);
    let norm = 2.0 * (nf * nf * df + 1.0);
    let cp = (nf * df + 1.0) * (nf + 1.0);
    let cm = (nf * df - 1.0) * (nf - 1.0);
    let real = |x: f64| C64::new(x, 0.0);
    let l1 = identity(n * n);
    let r1 = p.plus_normalized() * real(cp / norm) + p.minus_normalized() * real(cm / norm);
    let l2 = &p.plus * real(cm / norm) - &p.minus * real(cp / norm);
    let r2 = p.plus_normalized() - p.minus_normalized();
    DoubledSpectrum {
        eigenvalues: [1.0, mps_eta(n, d)],
        left: [l1, l2],
        right: [r1, r2],
    }
}

fn leg_permutation(n: usize, perm: &[usize]) -> ComplexMatrix {
    // |i_0 .. i_k> -> |i_perm^{-1}>: output leg perm[a] carries input leg a
    let legs = perm.len();
    let total = ipow(n, legs);
    let mut op = ComplexMatrix::zeros(total, total);
    let mut digits = vec![0usize; legs];
    for col in 0..total {
        let mut rest = col;
        for a in (0..legs).rev() {
            digits[a] = rest % n;
            rest /= n;
        }
        let mut row = 0;
        let mut out = vec![0usize; legs];
        for a in 0..legs {
            out[perm[a]] = digits[a];
        }
        for v in out {
            row = row * n + v;
        }
        op[(row, col)] = ONE;
    }
    op
}

/// Haar average of U ⊗ U† on C^n ⊗ C^n.
pub fn haar_first_moment(n: usize) -> ComplexMatrix {
    swap_operator(n) * C64::new(1.0 / n as f64, 0.0)
}

/// Haar average of U ⊗ U ⊗ U† ⊗ U† on (C^n)^{⊗4}, for n >= 2.
pub fn haar_second_moment(n: usize) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("second moment needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    let swap = |a: usize, b: usize| {
        let mut perm = vec![0, 1, 2, 3];
        perm.swap(a, b);
        leg_permutation(n, &perm)
    };
    let total = ipow(n, 4);
    let first = identity(total) - swap(2, 3) * C64::new(1.0 / nf, 0.0);
    let second = swap(0, 2) * swap(1, 3) + swap(0, 3) * swap(1, 2);
    Ok(first * second * C64::new(1.0 / (nf * nf - 1.0), 0.0))
}

/// Entrywise comparison of a Monte Carlo moment estimate with its closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentComparison {
    /// Real and imaginary parts are counted separately.
    pub entries: usize,
    pub max_z: f64,
    pub max_abs_deviation: f64,
    pub beyond_four_stderr: usize,
    /// Expected number of |z| > 4 among `entries` independent entries with
    /// t-distributed batch-means statistics.
    pub expected_beyond_four: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HaarMomentCheck {
    pub dim: usize,
    pub samples: usize,
    pub batches: usize,
    pub first: MomentComparison,
    pub second: MomentComparison,
}

fn compare(batch_sums: &[ComplexMatrix], per_batch: usize, exact: &ComplexMatrix) -> MomentComparison {
    let b = batch_sums.len() as f64;
    let means: Vec<ComplexMatrix> = batch_sums.iter().map(|m| m / C64::new(per_batch as f64, 0.0)).collect();
    let mut mean = ComplexMatrix::zeros(exact.nrows(), exact.ncols());
    for m in &means {
        mean += m;
    }
    mean /= C64::new(b, 0.0);
    let mut out = MomentComparison {
        entries: 2 * exact.len(),
        max_z: 0.0,
        max_abs_deviation: 0.0,
        beyond_four_stderr: 0,
        expected_beyond_four: 2.0 * exact.len() as f64 * student_t_two_sided_tail(4.0, batch_sums.len() - 1),
    };
    for idx in 0..exact.len() {
        let parts: [fn(C64) -> f64; 2] = [|z| z.re, |z| z.im];
        for part in parts {
            let center = part(mean[idx]);
            let spread = means.iter().map(|m| (part(m[idx]) - center).powi(2)).sum::<f64>() / (b - 1.0);
            let stderr = (spread / b).sqrt();
            let dev = (center - part(exact[idx])).abs();
            let z = if stderr > 0.0 {
                dev / stderr
            } else if dev < 1e-14 {
                0.0
            } else {
                f64::INFINITY
            };
            out.max_abs_deviation = out.max_abs_deviation.max(dev);
            out.max_z = out.max_z.max(z);
            if z > 4.0 {
                out.beyond_four_stderr += 1;
            }
        }
    }
    out
}

/// Monte Carlo averages of U ⊗ U† and U ⊗ U ⊗ U† ⊗ U† against the closed forms.
pub fn haar_moment_check(n: usize, samples: usize, seed: u64) -> Result<HaarMomentCheck> {
    if samples < 100 {
        return Err(Error::InsufficientSamples(format!("{samples} < 100")));
    }
    let exact_second = haar_second_moment(n)?;
    let batches = default_batches(samples);
    let per_batch = samples / batches;
    let sums = map_samples(batches, |batch| {
        let mut first = ComplexMatrix::zeros(n * n, n * n);
        let mut second = ComplexMatrix::zeros(ipow(n, 4), ipow(n, 4));
        for k in batch * per_batch..(batch + 1) * per_batch {
            let u = haar_unitary(n, &mut RngSeed::for_sample(seed, k as u64).rng()).into_matrix();
            let ud = u.adjoint();
            first += kron(&u, &ud);
            let uu = kron(&u, &u);
            second += kron(&uu, &uu.adjoint());
        }
        (first, second)
    });
    let (firsts, seconds): (Vec<_>, Vec<_>) = sums.into_iter().unzip();
    Ok(HaarMomentCheck {
        dim: n,
        samples,
        batches,
        first: compare(&firsts, per_batch, &haar_first_moment(n)),
        second: compare(&seconds, per_batch, &exact_second),
    })
}
