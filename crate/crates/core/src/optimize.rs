//! Riemannian optimization over products of unitary groups: QR retraction,
//! backtracking gradient descent and L-BFGS with transport by projection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::LocalTerm;
use crate::mera::MeraNetwork;
use crate::mps::{Mps, MpsShape, Placement};
use crate::riemann::project_tangent;
use crate::tensor::{max_abs, real_inner, ComplexMatrix, UnitaryTensor, C64, ONE};

/// A tangent direction W at a unitary U, i.e. U†W is skew-Hermitian.
#[derive(Clone, Debug)]
pub struct TangentVector {
    base: UnitaryTensor,
    direction: ComplexMatrix,
}

impl TangentVector {
    /// Project an ambient matrix onto the tangent space at `base`.
    pub fn project(base: &UnitaryTensor, ambient: &ComplexMatrix) -> Result<Self> {
        if ambient.shape() != base.matrix().shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", base.dim()),
                found: format!("{}x{}", ambient.nrows(), ambient.ncols()),
            });
        }
        Ok(Self {
            base: base.clone(),
            direction: project_tangent(base.matrix(), ambient),
        })
    }

    /// Wrap a direction that is already tangent (to 1e-10).
    pub fn new(base: UnitaryTensor, direction: ComplexMatrix) -> Result<Self> {
        let defect = tangent_defect(base.matrix(), &direction);
        if defect > 1e-10 {
            return Err(Error::Constraint(format!("direction is not tangent (defect {defect:.3e})")));
        }
        Ok(Self { base, direction })
    }

    pub fn base(&self) -> &UnitaryTensor {
        &self.base
    }

    pub fn direction(&self) -> &ComplexMatrix {
        &self.direction
    }

    pub fn retract(&self, step: f64) -> UnitaryTensor {
        retract(self.base.matrix(), &self.direction, step)
    }
}

/// Largest entry of |U†W + (U†W)†|.
pub fn tangent_defect(u: &ComplexMatrix, w: &ComplexMatrix) -> f64 {
    let a = u.adjoint() * w;
    max_abs(&(&a + a.adjoint()))
}

/// Q factor of U + step·W with the phases fixed so that R has a positive diagonal.
pub fn retract(u: &ComplexMatrix, w: &ComplexMatrix, step: f64) -> UnitaryTensor {
    if step == 0.0 {
        return UnitaryTensor::new_unchecked(u.clone());
    }
    let moved = u + w * C64::new(step, 0.0);
    let n = moved.ncols();
    let qr = moved.qr();
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
    UnitaryTensor::new_unchecked(q)
}

/// Energy with Euclidean gradients d_k = 2 ∂E/∂Ū_k at a point of U(N_1)×…×U(N_n).
pub trait Objective {
    fn evaluate(&self, point: &[UnitaryTensor]) -> Result<(f64, Vec<ComplexMatrix>)>;
}

pub struct MpsObjective {
    shape: MpsShape,
    terms: Vec<Placement>,
}

impl MpsObjective {
    pub fn new(shape: MpsShape, terms: Vec<Placement>) -> Self {
        Self { shape, terms }
    }
}

impl Objective for MpsObjective {
    fn evaluate(&self, point: &[UnitaryTensor]) -> Result<(f64, Vec<ComplexMatrix>)> {
        let mps = Mps::from_unitaries(self.shape.clone(), point.to_vec())?;
        mps.energy_and_gradients(&self.terms)
    }
}

/// Σ_i h_i over every site of a periodic MERA/TTNS.
pub struct MeraObjective {
    template: MeraNetwork,
    term: LocalTerm,
}

impl MeraObjective {
    pub fn new(template: MeraNetwork, term: LocalTerm) -> Self {
        Self { template, term }
    }
}

impl Objective for MeraObjective {
    fn evaluate(&self, point: &[UnitaryTensor]) -> Result<(f64, Vec<ComplexMatrix>)> {
        let mut net = self.template.clone();
        net.set_unitaries(point.to_vec())?;
        net.energy_and_gradients(&self.term)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gd,
    Lbfgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub method: Method,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub memory: usize,
    pub armijo: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs,
            max_iterations: 500,
            gradient_tol: 1e-8,
            memory: 10,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub energy: f64,
    pub gradient_norm: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizerTrace {
    /// Entry 0 is the starting point (step 0); every later entry is an accepted step.
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
    /// Line searches that failed and were retried along the steepest-descent direction.
    pub line_search_resets: usize,
}

impl OptimizerTrace {
    pub fn initial_energy(&self) -> f64 {
        self.iterations[0].energy
    }

    pub fn final_energy(&self) -> f64 {
        self.iterations.last().unwrap().energy
    }

    /// Fraction of accepted steps that strictly lowered the energy.
    pub fn decreasing_fraction(&self) -> f64 {
        let steps = self.iterations.len() - 1;
        if steps == 0 {
            return 1.0;
        }
        let down = self.iterations.windows(2).filter(|w| w[1].energy < w[0].energy).count();
        down as f64 / steps as f64
    }
}

type Tangent = Vec<ComplexMatrix>;

fn inner(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| real_inner(x, y)).sum()
}

fn scaled(a: &[ComplexMatrix], factor: f64) -> Tangent {
    a.iter().map(|x| x * C64::new(factor, 0.0)).collect()
}

fn axpy(y: &mut [ComplexMatrix], factor: f64, x: &[ComplexMatrix]) {
    for (yk, xk) in y.iter_mut().zip(x) {
        *yk += xk * C64::new(factor, 0.0);
    }
}

fn project_all(point: &[UnitaryTensor], v: &[ComplexMatrix]) -> Tangent {
    point.iter().zip(v).map(|(u, x)| project_tangent(u.matrix(), x)).collect()
}

fn retract_all(point: &[UnitaryTensor], direction: &[ComplexMatrix], step: f64) -> Vec<UnitaryTensor> {
    point
        .iter()
        .zip(direction)
        .map(|(u, w)| retract(u.matrix(), w, step))
        .collect()
}

/// L-BFGS two-loop recursion: approximately -H⁻¹ g from stored (s, y) pairs, oldest first.
fn two_loop(grad: &[ComplexMatrix], pairs: &[(Tangent, Tangent, f64)]) -> Tangent {
    let mut q: Tangent = grad.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * inner(s, &q);
        axpy(&mut q, -a, y);
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.last() {
        let gamma = inner(s, y) / inner(y, y);
        q = scaled(&q, gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * inner(y, &q);
        axpy(&mut q, a - b, s);
    }
    scaled(&q, -1.0)
}

/// Minimize `objective` starting from `start`; returns the final point and the trace.
pub fn minimize<O: Objective + ?Sized>(
    objective: &O,
    start: Vec<UnitaryTensor>,
    cfg: &OptimizerConfig,
) -> Result<(Vec<UnitaryTensor>, OptimizerTrace)> {
    if !(cfg.shrink > 0.0 && cfg.shrink < 1.0) || cfg.initial_step <= 0.0 || cfg.armijo <= 0.0 {
        return Err(Error::InvalidConfig("line search needs 0 < shrink < 1 and positive steps".into()));
    }
    let mut point = start;
    let (mut energy, euclid) = objective.evaluate(&point)?;
    let mut grad = project_all(&point, &euclid);
    let mut gnorm = inner(&grad, &grad).sqrt();
    let mut iterations = vec![IterationRecord {
        energy,
        gradient_norm: gnorm,
        step: 0.0,
    }];
    let mut pairs: Vec<(Tangent, Tangent, f64)> = Vec::new();
    let mut step_guess = cfg.initial_step;
    let mut resets = 0;
    let mut termination = Termination::MaxIterations;
    for _ in 0..cfg.max_iterations {
        if gnorm < cfg.gradient_tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let mut direction = match cfg.method {
            Method::Gd => scaled(&grad, -1.0),
            Method::Lbfgs => two_loop(&grad, &pairs),
        };
        let mut slope = inner(&grad, &direction);
        if slope >= 0.0 {
            pairs.clear();
            direction = scaled(&grad, -1.0);
            slope = -gnorm * gnorm;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let mut step = match cfg.method {
                Method::Lbfgs if attempt == 0 && !pairs.is_empty() => 1.0,
                _ => step_guess,
            };
            for _ in 0..cfg.max_backtracks {
                let trial = retract_all(&point, &direction, step);
                let (e, d) = objective.evaluate(&trial)?;
                if e <= energy + cfg.armijo * step * slope {
                    accepted = Some((trial, e, d, step));
                    break;
                }
                step *= cfg.shrink;
            }
            if accepted.is_some() || pairs.is_empty() {
                break;
            }
            resets += 1;
            pairs.clear();
            direction = scaled(&grad, -1.0);
            slope = -gnorm * gnorm;
        }
        let Some((trial, e, d, step)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let new_grad = project_all(&trial, &d);
        if cfg.method == Method::Lbfgs {
            let s = project_all(&trial, &scaled(&direction, step));
            let old = project_all(&trial, &grad);
            let mut y = new_grad.clone();
            axpy(&mut y, -1.0, &old);
            pairs = pairs
                .into_iter()
                .map(|(ps, py, rho)| (project_all(&trial, &ps), project_all(&trial, &py), rho))
                .collect();
            let sy = inner(&s, &y);
            if sy > 1e-14 * inner(&s, &s).sqrt() * inner(&y, &y).sqrt() && sy > 0.0 {
                pairs.push((s, y, 1.0 / sy));
                if pairs.len() > cfg.memory {
                    pairs.remove(0);
                }
            }
        }
        step_guess = (step / cfg.shrink).min(cfg.initial_step.max(step));
        point = trial;
        energy = e;
        grad = new_grad;
        gnorm = inner(&grad, &grad).sqrt();
        iterations.push(IterationRecord {
            energy,
            gradient_norm: gnorm,
            step,
        });
    }
    if termination == Termination::MaxIterations && gnorm < cfg.gradient_tol {
        termination = Termination::GradientTolerance;
    }
    Ok((
        point,
        OptimizerTrace {
            iterations,
            termination,
            line_search_resets: resets,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{tfim_bond, tfim_three_site, ChainHamiltonian};
    use crate::mera::MeraShape;
    use crate::mps::extensive_placements;
    use crate::spectra::{Family, Flavor};
    use crate::tensor::{haar_unitary_seeded, unitarity_defect, RngSeed};
    use proptest::prelude::*;

    fn random_tangent(u: &ComplexMatrix, seed: u64) -> ComplexMatrix {
        let a = haar_unitary_seeded(u.nrows(), RngSeed::new(seed)).into_matrix();
        let b = haar_unitary_seeded(u.nrows(), RngSeed::new(seed + 7)).into_matrix();
        project_tangent(u, &(a + b * C64::new(0.0, 0.3)))
    }

    #[test]
    fn tangent_projection_examples() {
        let u = haar_unitary_seeded(4, RngSeed::new(1));
        let w = random_tangent(u.matrix(), 2);
        let tv = TangentVector::project(&u, &w).unwrap();
        assert!(max_abs(&(tv.direction() - &w)) < 1e-12);
        let h = {
            let a = haar_unitary_seeded(4, RngSeed::new(3)).into_matrix();
            &a + a.adjoint()
        };
        let normal = TangentVector::project(&u, &(u.matrix() * h)).unwrap();
        assert!(max_abs(normal.direction()) < 1e-12);
        assert!(TangentVector::new(u.clone(), u.matrix().clone()).is_err());
        assert!(TangentVector::project(&u, &ComplexMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn retraction_properties() {
        let u = haar_unitary_seeded(6, RngSeed::new(4));
        let w = random_tangent(u.matrix(), 5);
        assert_eq!(retract(u.matrix(), &w, 0.0).matrix(), u.matrix());
        assert!(unitarity_defect(retract(u.matrix(), &w, 0.3).matrix()) < 1e-12);
        let err = |eps: f64| {
            let r = retract(u.matrix(), &w, eps).into_matrix();
            (r - (u.matrix() + &w * C64::new(eps, 0.0))).norm()
        };
        let ratio = err(2e-3) / err(1e-3);
        assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
    }

    #[test]
    fn zero_hamiltonian_stops_at_once() {
        let shape = MpsShape::new(6, 2, 2).unwrap();
        let zero = LocalTerm::new(ComplexMatrix::zeros(4, 4), 2, 2).unwrap();
        let objective = MpsObjective::new(shape.clone(), extensive_placements(6, &zero));
        let start = Mps::random_seeded(6, 2, 2, RngSeed::new(1)).unwrap().unitaries().to_vec();
        let (_, trace) = minimize(&objective, start, &OptimizerConfig::default()).unwrap();
        assert_eq!(trace.termination, Termination::GradientTolerance);
        assert_eq!(trace.iterations.len(), 1);
        assert_eq!(trace.final_energy(), 0.0);
    }

    #[test]
    fn gradient_descent_lowers_mps_energy() {
        let shape = MpsShape::new(6, 2, 2).unwrap();
        let objective = MpsObjective::new(shape, extensive_placements(6, &tfim_bond(1.0)));
        let start = Mps::random_seeded(6, 2, 2, RngSeed::new(2)).unwrap().unitaries().to_vec();
        let cfg = OptimizerConfig {
            method: Method::Gd,
            max_iterations: 40,
            ..Default::default()
        };
        let (_, trace) = minimize(&objective, start, &cfg).unwrap();
        assert!(trace.iterations.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!(trace.final_energy() < trace.initial_energy() - 0.5);
    }

    #[test]
    fn lbfgs_finds_small_ising_ground_state() {
        let l = 6;
        let h = tfim_bond(1.0);
        let exact = ChainHamiltonian::open_uniform(l, &h).ground_energy().unwrap();
        let shape = MpsShape::new(l, 2, 4).unwrap();
        let objective = MpsObjective::new(shape, extensive_placements(l, &h));
        let start = Mps::random_seeded(l, 2, 4, RngSeed::new(3)).unwrap().unitaries().to_vec();
        let (point, trace) = minimize(&objective, start, &OptimizerConfig::default()).unwrap();
        assert!(((trace.final_energy() - exact) / exact).abs() < 1e-3, "{} {exact}", trace.final_energy());
        assert!(point.iter().all(|u| unitarity_defect(u.matrix()) < 1e-10));
    }

    #[test]
    fn mera_objective_decreases() {
        let shape = MeraShape::new(Family::Binary1d, Flavor::Mera, 2, 1, 3).unwrap();
        let net = MeraNetwork::random_seeded(shape, RngSeed::new(6));
        let objective = MeraObjective::new(net.clone(), tfim_three_site(1.0));
        let cfg = OptimizerConfig {
            max_iterations: 30,
            ..Default::default()
        };
        let (_, trace) = minimize(&objective, net.unitaries(), &cfg).unwrap();
        assert!(trace.iterations.windows(2).all(|w| w[1].energy <= w[0].energy));
        assert!(trace.final_energy() < trace.initial_energy());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn projection_preserves_inner_products(seed in 0u64..10_000, n in 2usize..6) {
            let u = haar_unitary_seeded(n, RngSeed::new(seed));
            let d = haar_unitary_seeded(n, RngSeed::new(seed + 1)).into_matrix() * C64::new(0.7, -0.2);
            let w = random_tangent(u.matrix(), seed + 2);
            let g = TangentVector::project(&u, &d).unwrap();
            prop_assert!(tangent_defect(u.matrix(), g.direction()) < 1e-12);
            prop_assert!((real_inner(g.direction(), &w) - real_inner(&d, &w)).abs() < 1e-12);
            let again = TangentVector::project(&u, g.direction()).unwrap();
            prop_assert!(max_abs(&(again.direction() - g.direction())) < 1e-12);
        }
    }
}
