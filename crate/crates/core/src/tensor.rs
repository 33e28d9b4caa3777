//! Dense complex matrices, Haar-random unitaries and leg bookkeeping.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legs::LegOperator;

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

/// Default absolute tolerance for exact identities.
pub const TOLERANCE: f64 = 1e-12;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Seed for a counter-based random stream: every Monte Carlo sample gets its own
/// ChaCha stream derived from the master seed, so results do not depend on how
/// samples are distributed across worker threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub master: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(master: u64) -> Self {
        Self { master, stream: 0 }
    }

    pub fn for_sample(master: u64, sample: u64) -> Self {
        Self {
            master,
            stream: mix64(master, sample),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix64(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// A square matrix known to be unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryTensor(ComplexMatrix);

impl UnitaryTensor {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                found: format!("{}x{}", matrix.nrows(), matrix.ncols()),
            });
        }
        let defect = unitarity_defect(&matrix);
        if defect > 1e-10 {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self(matrix))
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix) -> Self {
        Self(matrix)
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        self.0.adjoint()
    }
}

/// Largest entry of |U†U - 1|.
pub fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    let n = u.ncols();
    let gram = u.adjoint() * u - ComplexMatrix::identity(n, n);
    max_abs(&gram)
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &ComplexMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Draw a Haar-random unitary of size `n` (Ginibre matrix, QR, phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> UnitaryTensor {
    assert!(n >= 1, "unitary dimension must be positive");
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = ComplexMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for col in 0..n {
        let diag = r[(col, col)];
        let norm = diag.norm();
        let phase = if norm > 0.0 { diag / norm } else { ONE };
        for row in 0..n {
            q[(row, col)] *= phase;
        }
    }
    UnitaryTensor(q)
}

pub fn haar_unitary_seeded(n: usize, seed: RngSeed) -> UnitaryTensor {
    haar_unitary(n, &mut seed.rng())
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Projector |index><index| on C^n.
pub fn basis_projector(n: usize, index: usize) -> ComplexMatrix {
    let mut p = ComplexMatrix::zeros(n, n);
    p[(index, index)] = ONE;
    p
}

/// Swap operator on C^n ⊗ C^n.
pub fn swap_operator(n: usize) -> ComplexMatrix {
    let mut s = ComplexMatrix::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            s[(b * n + a, a * n + b)] = ONE;
        }
    }
    s
}

fn check_legs(op: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    let total: usize = dims.iter().product();
    if op.nrows() != total || op.ncols() != total {
        return Err(Error::ShapeMismatch {
            expected: format!("{total}x{total} for legs {dims:?}"),
            found: format!("{}x{}", op.nrows(), op.ncols()),
        });
    }
    Ok(())
}

/// Trace out the legs listed in `traced` (leg positions, not labels).
pub fn partial_trace(op: &ComplexMatrix, dims: &[usize], traced: &[usize]) -> Result<ComplexMatrix> {
    check_legs(op, dims)?;
    for &leg in traced {
        if leg >= dims.len() {
            return Err(Error::OutOfRange(format!("leg {leg} of {}", dims.len())));
        }
    }
    let labels: Vec<usize> = (0..dims.len()).collect();
    let lo = LegOperator::new(labels, dims.to_vec(), op.clone());
    Ok(lo.trace_out(traced).into_matrix())
}

/// Reorder the legs so that new leg `k` is old leg `order[k]`.
pub fn permute_legs(op: &ComplexMatrix, dims: &[usize], order: &[usize]) -> Result<ComplexMatrix> {
    check_legs(op, dims)?;
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidDimension(format!("{order:?} is not a permutation")));
    }
    let labels: Vec<usize> = (0..dims.len()).collect();
    let lo = LegOperator::new(labels, dims.to_vec(), op.clone());
    Ok(lo.reorder(order).into_matrix())
}

/// Re(Tr(A† B)).
pub fn real_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn frobenius_sq(a: &ComplexMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace(a: &ComplexMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// Integer power helper that panics on overflow instead of wrapping.
pub fn ipow(base: usize, exp: usize) -> usize {
    base.checked_pow(exp as u32).expect("dimension overflow")
}
