//! Brute-force doubled-operator evaluation of layer-transition channels from
//! the Haar moment formulas, projected onto the projector basis. Used to
//! validate the basis constructions at small χ.

use super::basis::RealMatrix;
use super::channels::{check_chi, Flavor, Mover};
use crate::error::{Error, Result};
use crate::legs::LegOperator;
use crate::moments::ProjectorPair;
use crate::tensor::{kron, ComplexMatrix, C64};

/// Largest number of doubled sites held at once.
const MAX_SITES: usize = 5;

#[derive(Clone, Debug)]
enum Step {
    Append(usize),
    Group(Vec<usize>),
    OneCopy(Vec<usize>, usize),
}

impl Step {
    fn sites(&self) -> Vec<usize> {
        match self {
            Step::Append(s) => vec![*s],
            Step::Group(v) | Step::OneCopy(v, _) => v.clone(),
        }
    }
}

fn leg(site: usize, copy: usize) -> usize {
    2 * site + copy
}

fn site_projector(chi: usize, minus: bool, normalized: bool) -> ComplexMatrix {
    let p = ProjectorPair::new(chi);
    match (minus, normalized) {
        (false, false) => p.plus,
        (true, false) => p.minus,
        (false, true) => p.plus_normalized(),
        (true, true) => p.minus_normalized(),
    }
}

/// ⊗_k P_{σ_k} (or P'_{σ_k}) with legs ordered (site₁ copy₀, site₁ copy₁, ...).
fn product_projector(chi: usize, sigma: usize, sites: usize, normalized: bool) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1, 1);
    for k in 0..sites {
        let minus = (sigma >> (sites - 1 - k)) & 1 == 1;
        out = kron(&out, &site_projector(chi, minus, normalized));
    }
    out
}

fn site_legs(sites: &[usize]) -> Vec<usize> {
    sites.iter().flat_map(|&s| [leg(s, 0), leg(s, 1)]).collect()
}

struct Doubled {
    chi: usize,
    op: LegOperator,
}

impl Doubled {
    fn sites(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.op.labels().iter().map(|l| l / 2).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    fn append(&mut self, site: usize) {
        self.op = self
            .op
            .extend_zero(&[leg(site, 0), leg(site, 1)], &[self.chi, self.chi]);
    }

    fn group(&mut self, sites: &[usize]) {
        let mut targets: Vec<usize> = sites.iter().map(|&s| leg(s, 0)).collect();
        targets.extend(sites.iter().map(|&s| leg(s, 1)));
        let mut order: Vec<usize> = self
            .op
            .labels()
            .iter()
            .copied()
            .filter(|l| !targets.contains(l))
            .collect();
        let rest_dims: Vec<usize> = order.iter().map(|&l| self.op.dim_of(l)).collect();
        order.extend_from_slice(&targets);
        let r = self.op.matrix_in_order(&order);
        let dim = self.chi.pow(sites.len() as u32);
        let block = dim * dim;
        let rest = r.nrows() / block;
        // Tr_g R and Tr_g (Swap R) on the remaining legs.
        let mut plain = ComplexMatrix::zeros(rest, rest);
        let mut swapped = ComplexMatrix::zeros(rest, rest);
        for a in 0..rest {
            for b in 0..rest {
                let mut p = C64::new(0.0, 0.0);
                let mut q = C64::new(0.0, 0.0);
                for x in 0..dim {
                    for y in 0..dim {
                        p += r[(a * block + x * dim + y, b * block + x * dim + y)];
                        q += r[(a * block + x * dim + y, b * block + y * dim + x)];
                    }
                }
                plain[(a, b)] = p;
                swapped[(a, b)] = q;
            }
        }
        let half = C64::new(0.5, 0.0);
        let pair = ProjectorPair::new(dim);
        let matrix = kron(&((&plain + &swapped) * half), &pair.plus_normalized())
            + kron(&((&plain - &swapped) * half), &pair.minus_normalized());
        let mut dims = rest_dims;
        dims.extend(std::iter::repeat_n(self.chi, targets.len()));
        self.op = LegOperator::new(order, dims, matrix);
    }

    fn one_copy(&mut self, sites: &[usize], copy: usize) {
        let legs: Vec<usize> = sites.iter().map(|&s| leg(s, copy)).collect();
        let dims = vec![self.chi; legs.len()];
        let dim = self.chi.pow(legs.len() as u32) as f64;
        self.op = self
            .op
            .trace_out(&legs)
            .extend_identity(&legs, &dims)
            .scale(1.0 / dim);
    }

    fn trace_site(&mut self, site: usize) {
        self.op = self.op.trace_out(&[leg(site, 0), leg(site, 1)]);
    }

    fn coefficients(&self, outputs: &[usize]) -> Vec<f64> {
        let order = site_legs(outputs);
        let m = self.op.matrix_in_order(&order);
        (0..1usize << outputs.len())
            .map(|sigma| {
                let p = product_projector(self.chi, sigma, outputs.len(), false);
                p.component_mul(&m.transpose()).sum().re
            })
            .collect()
    }
}

/// Run `steps` on every right-basis input and record left-basis coefficients
/// of the outputs. Sites that are neither outputs nor used later are traced
/// as early as possible.
fn dense_channel(chi: usize, inputs: &[usize], steps: &[Step], outputs: &[usize]) -> Result<RealMatrix> {
    let n_in = inputs.len();
    let mut m = RealMatrix::zeros(1 << outputs.len(), 1 << n_in);
    for sigma in 0..1usize << n_in {
        let labels = site_legs(inputs);
        let dims = vec![chi; labels.len()];
        let mut state = Doubled {
            chi,
            op: LegOperator::new(labels, dims, product_projector(chi, sigma, n_in, true)),
        };
        for (k, step) in steps.iter().enumerate() {
            match step {
                Step::Append(s) => state.append(*s),
                Step::Group(v) => state.group(v),
                Step::OneCopy(v, c) => state.one_copy(v, *c),
            }
            if state.sites().len() > MAX_SITES {
                return Err(Error::Constraint(format!(
                    "dense evaluation exceeds {MAX_SITES} doubled sites"
                )));
            }
            let later: Vec<usize> = steps[k + 1..].iter().flat_map(|s| s.sites()).collect();
            for s in state.sites() {
                if !outputs.contains(&s) && !later.contains(&s) {
                    state.trace_site(s);
                }
            }
        }
        for (row, v) in state.coefficients(outputs).into_iter().enumerate() {
            m[(row, sigma)] = v;
        }
    }
    Ok(m)
}

pub fn dense_binary_channel(chi: usize, flavor: Flavor, mover: Mover) -> Result<RealMatrix> {
    check_chi(chi)?;
    let mut steps = vec![
        Step::Append(1),
        Step::Group(vec![0, 1]),
        Step::Append(3),
        Step::Group(vec![2, 3]),
        Step::Append(5),
        Step::Group(vec![4, 5]),
    ];
    if flavor == Flavor::Mera {
        steps.push(Step::Group(vec![1, 2]));
        steps.push(Step::Group(vec![3, 4]));
    }
    let outputs = match mover {
        Mover::Right => [2, 3, 4],
        Mover::Left => [1, 2, 3],
        Mover::Center => return Err(Error::Constraint("binary cones have no center mover".into())),
    };
    dense_channel(chi, &[0, 2, 4], &steps, &outputs)
}

pub fn dense_ternary_channel(chi: usize, flavor: Flavor, mover: Mover) -> Result<RealMatrix> {
    check_chi(chi)?;
    let mut steps = vec![
        Step::Append(1),
        Step::Append(2),
        Step::Group(vec![0, 1, 2]),
        Step::Append(4),
        Step::Append(5),
        Step::Group(vec![3, 4, 5]),
    ];
    if flavor == Flavor::Mera {
        steps.push(Step::Group(vec![2, 3]));
    }
    let outputs = match mover {
        Mover::Left => [1, 2],
        Mover::Center => [2, 3],
        Mover::Right => [3, 4],
    };
    dense_channel(chi, &[0, 3], &steps, &outputs)
}

pub fn dense_offdiag_channel(chi: usize) -> Result<RealMatrix> {
    check_chi(chi)?;
    let steps = vec![
        Step::Append(1),
        Step::OneCopy(vec![0, 1], 1),
        Step::Append(7),
        Step::OneCopy(vec![6, 7], 0),
        Step::Append(3),
        Step::Group(vec![2, 3]),
        Step::OneCopy(vec![1, 2], 1),
        Step::Append(5),
        Step::Group(vec![4, 5]),
        Step::OneCopy(vec![5, 6], 0),
        Step::Group(vec![3, 4]),
    ];
    dense_channel(chi, &[0, 2, 4, 6], &steps, &[2, 3, 4, 5])
}

/// Dense two-site group average projected onto the basis.
pub fn dense_group_matrix(chi1: usize, chi2: usize) -> Result<RealMatrix> {
    if chi1 != chi2 {
        return Err(Error::InvalidDimension("dense check uses equal site dimensions".into()));
    }
    dense_channel(chi1, &[0, 1], &[Step::Group(vec![0, 1])], &[0, 1])
}

