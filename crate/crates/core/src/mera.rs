//! Binary and ternary 1D MERA and TTNS built from Haar-random unitaries:
//! causal cones, layer transitions, local expectation values, gradients and
//! Monte Carlo gradient variances.
//!
//! Layer τ (1..=T) maps the `sites(τ)` sites of layer τ to the `sites(τ-1)`
//! sites below it; layer 0 is the physical lattice of length b^T'. The top
//! layer is the product state |0..0>. Binary isometry W_{τ,k} = V_{τ,k}(1⊗|0>)
//! sends coarse site k to fine sites (2k-1, 2k) and disentangler U_{τ,k} acts
//! on fine sites (2k, 2k+1). Ternary V_{τ,k} sends k to (3k-1, 3k, 3k+1) and
//! U_{τ,k} acts on (3k+1, 3k+2). All site indices are periodic.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{ChainHamiltonian, LocalTerm};
use crate::legs::LegOperator;
use crate::parallel::map_samples;
use crate::riemann::{euclidean_gradient, gradient_norm_per_dim, project_tangent};
use crate::spectra::{binary_diag_avg_exact, binary_diag_avg_leading_term, predicted_spectrum, Family, Flavor, Mover};
use crate::stats::{max_mean_z, summarize, VarianceReport};
use crate::tensor::{haar_unitary, ipow, ComplexMatrix, RngSeed, UnitaryTensor, C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Disentangler,
    Isometry,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TensorId {
    pub kind: TensorKind,
    pub layer: usize,
    pub index: usize,
}

impl TensorId {
    pub fn disentangler(layer: usize, index: usize) -> Self {
        Self {
            kind: TensorKind::Disentangler,
            layer,
            index,
        }
    }

    pub fn isometry(layer: usize, index: usize) -> Self {
        Self {
            kind: TensorKind::Isometry,
            layer,
            index,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeraShape {
    family: Family,
    flavor: Flavor,
    chi: usize,
    layers: usize,
    lattice_exp: usize,
}

impl MeraShape {
    pub fn new(family: Family, flavor: Flavor, chi: usize, layers: usize, lattice_exp: usize) -> Result<Self> {
        let margin = match family {
            Family::Binary1d => 2,
            Family::Ternary1d => 1,
            Family::Nonary2d => {
                return Err(Error::Constraint("only 1D networks can be contracted".into()));
            }
        };
        if chi < 2 {
            return Err(Error::InvalidDimension(format!("bond dimension {chi} < 2")));
        }
        if layers == 0 {
            return Err(Error::Constraint("need at least one layer".into()));
        }
        if lattice_exp < layers + margin {
            return Err(Error::Constraint(format!(
                "lattice exponent {lattice_exp} < {layers} layers + {margin}: top windows would overlap"
            )));
        }
        if family.branching().checked_pow(lattice_exp as u32).is_none_or(|n| n > 1 << 20) {
            return Err(Error::Constraint(format!("lattice exponent {lattice_exp} is too large")));
        }
        Ok(Self {
            family,
            flavor,
            chi,
            layers,
            lattice_exp,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn chi(&self) -> usize {
        self.chi
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn lattice_exp(&self) -> usize {
        self.lattice_exp
    }

    pub fn branching(&self) -> usize {
        self.family.branching()
    }

    /// Number of sites at `layer` (layer 0 is the physical lattice).
    pub fn sites(&self, layer: usize) -> usize {
        ipow(self.branching(), self.lattice_exp - layer)
    }

    pub fn length(&self) -> usize {
        self.sites(0)
    }

    /// Width of the causal-cone window, which is also the support of local terms.
    pub fn window(&self) -> usize {
        match self.family {
            Family::Binary1d => 3,
            _ => 2,
        }
    }

    pub fn unitary_dim(&self, kind: TensorKind) -> usize {
        match (self.family, kind) {
            (Family::Ternary1d, TensorKind::Isometry) => ipow(self.chi, 3),
            _ => ipow(self.chi, 2),
        }
    }

    pub fn has_disentanglers(&self) -> bool {
        self.flavor == Flavor::Mera
    }

    /// All tensors, layer by layer, isometries before disentanglers.
    pub fn tensor_ids(&self) -> Vec<TensorId> {
        let mut ids = Vec::new();
        for layer in 1..=self.layers {
            let n = self.sites(layer);
            ids.extend((0..n).map(|k| TensorId::isometry(layer, k)));
            if self.has_disentanglers() {
                ids.extend((0..n).map(|k| TensorId::disentangler(layer, k)));
            }
        }
        ids
    }

    fn flat_index(&self, id: TensorId) -> usize {
        let per_layer = |l: usize| self.sites(l) * if self.has_disentanglers() { 2 } else { 1 };
        let before: usize = (1..id.layer).map(per_layer).sum();
        let within = match id.kind {
            TensorKind::Isometry => 0,
            TensorKind::Disentangler => self.sites(id.layer),
        };
        before + within + id.index
    }

    pub fn check_tensor(&self, id: TensorId) -> Result<()> {
        if id.layer == 0 || id.layer > self.layers {
            return Err(Error::OutOfRange(format!("layer {} of {}", id.layer, self.layers)));
        }
        if id.index >= self.sites(id.layer) {
            return Err(Error::OutOfRange(format!(
                "tensor {} of {} in layer {}",
                id.index,
                self.sites(id.layer),
                id.layer
            )));
        }
        if id.kind == TensorKind::Disentangler && !self.has_disentanglers() {
            return Err(Error::OutOfRange("tree networks have no disentanglers".into()));
        }
        Ok(())
    }

    pub fn causal_cone(&self, site: usize) -> Result<CausalCone> {
        if site >= self.length() {
            return Err(Error::OutOfRange(format!("site {site} of {}", self.length())));
        }
        let b = self.branching();
        let mut positions = vec![site];
        let mut movers = Vec::with_capacity(self.layers);
        for _ in 0..self.layers {
            let fine = *positions.last().unwrap();
            movers.push(mover_of(self.family, fine));
            positions.push(fine / b);
        }
        Ok(CausalCone {
            start: site,
            positions,
            movers,
        })
    }

    /// Physical sites whose causal cone contains the tensor.
    pub fn causal_support(&self, id: TensorId) -> Result<Vec<usize>> {
        self.check_tensor(id)?;
        let n = self.sites(id.layer);
        let back: &[usize] = match (self.family, id.kind) {
            (Family::Binary1d, TensorKind::Disentangler) => &[0, 1],
            (Family::Binary1d, TensorKind::Isometry) => &[0, 1, 2],
            (_, TensorKind::Disentangler) => &[0],
            (_, TensorKind::Isometry) => &[0, 1],
        };
        let positions: BTreeSet<usize> = back.iter().map(|&j| (id.index + n - j) % n).collect();
        let block = ipow(self.branching(), id.layer);
        Ok((0..self.length())
            .filter(|i| positions.contains(&(i / block)))
            .collect())
    }

    /// Tensors touched by the causal cone of `site`, in contraction order.
    pub fn cone_tensors(&self, site: usize) -> Result<Vec<TensorId>> {
        let cone = self.causal_cone(site)?;
        let mut ids = Vec::new();
        for layer in (1..=self.layers).rev() {
            for op in self.layer_ops(layer, cone.positions[layer - 1]) {
                if let Op::Gate { id, .. } = op {
                    ids.push(id);
                }
            }
        }
        Ok(ids)
    }

    /// Operations of layer `layer` for the cone window starting at fine
    /// position `fine` of layer `layer - 1`. Window legs are labelled 0..w on
    /// both sides.
    fn layer_ops(&self, layer: usize, fine: usize) -> Vec<Op> {
        let plan = plan_for(self.family, self.flavor, mover_of(self.family, fine));
        let s = fine / self.branching();
        let n = self.sites(layer);
        let inputs: Vec<usize> = (0..self.window()).collect();
        let mut last_use = [None; 6];
        for (idx, slot) in plan.slots.iter().enumerate() {
            for &leg in slot.legs {
                last_use[leg] = Some(idx);
            }
        }
        let mut ops = Vec::new();
        let mut present: Vec<usize> = inputs.clone();
        for &l in &inputs {
            if last_use[l].is_none() && !plan.kept.contains(&l) {
                ops.push(Op::Trace(l));
            }
        }
        for (idx, slot) in plan.slots.iter().enumerate() {
            for &leg in slot.legs {
                if !present.contains(&leg) {
                    ops.push(Op::Extend(leg));
                    present.push(leg);
                }
            }
            ops.push(Op::Gate {
                id: TensorId {
                    kind: slot.kind,
                    layer,
                    index: (s + slot.offset) % n,
                },
                legs: slot.legs.to_vec(),
            });
            for &leg in slot.legs {
                if !plan.kept.contains(&leg) && last_use[leg] == Some(idx) {
                    ops.push(Op::Trace(leg));
                }
            }
        }
        ops.push(Op::Relabel {
            from: plan.kept.to_vec(),
            to: inputs,
        });
        ops
    }
}

fn mover_of(family: Family, fine: usize) -> Mover {
    match (family, fine % family.branching()) {
        (Family::Binary1d, 0) => Mover::Left,
        (Family::Binary1d, _) => Mover::Right,
        (_, 0) => Mover::Left,
        (_, 1) => Mover::Center,
        _ => Mover::Right,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CausalCone {
    pub start: usize,
    /// Window start at layers 0..=T.
    pub positions: Vec<usize>,
    /// Transition used by layers 1..=T.
    pub movers: Vec<Mover>,
}

#[derive(Clone, Debug)]
enum Op {
    Extend(usize),
    Gate { id: TensorId, legs: Vec<usize> },
    Trace(usize),
    Relabel { from: Vec<usize>, to: Vec<usize> },
}

struct Slot {
    kind: TensorKind,
    offset: usize,
    legs: &'static [usize],
}

struct Plan {
    slots: Vec<Slot>,
    kept: &'static [usize],
}

const fn slot(kind: TensorKind, offset: usize, legs: &'static [usize]) -> Slot {
    Slot { kind, offset, legs }
}

// Local legs. Binary: c1 c2 c3 = 0 1 2 (the coarse window), a1 a2 a3 = 3 4 5.
// Ternary: c1 c2 = 0 1, a1 b1 = 2 3, a2 b2 = 4 5.
fn plan_for(family: Family, flavor: Flavor, mover: Mover) -> Plan {
    use TensorKind::{Disentangler as U, Isometry as V};
    let mera = flavor == Flavor::Mera;
    match family {
        Family::Binary1d => {
            let mut slots = vec![slot(V, 0, &[0, 3]), slot(V, 1, &[1, 4])];
            if mera {
                slots.push(slot(U, 0, &[3, 1]));
            }
            slots.push(slot(V, 2, &[2, 5]));
            if mera {
                slots.push(slot(U, 1, &[4, 2]));
            }
            let kept: &'static [usize] = match mover {
                Mover::Right => &[1, 4, 2],
                _ => &[3, 1, 4],
            };
            Plan { slots, kept }
        }
        _ => {
            let mut slots = vec![slot(V, 0, &[0, 2, 3]), slot(V, 1, &[1, 4, 5])];
            if mera {
                slots.push(slot(U, 0, &[3, 1]));
            }
            let kept: &'static [usize] = match mover {
                Mover::Left => &[2, 3],
                Mover::Center => &[3, 1],
                Mover::Right => &[1, 4],
            };
            Plan { slots, kept }
        }
    }
}

#[derive(Clone, Debug)]
struct LayerTensors {
    isometries: Vec<UnitaryTensor>,
    disentanglers: Vec<UnitaryTensor>,
}

#[derive(Clone, Debug)]
pub struct MeraNetwork {
    shape: MeraShape,
    layers: Vec<LayerTensors>,
}

impl MeraNetwork {
    /// Haar-random network; per layer the isometries are drawn before the
    /// disentanglers.
    pub fn random<R: Rng + ?Sized>(shape: MeraShape, rng: &mut R) -> Self {
        let layers = (1..=shape.layers)
            .map(|layer| {
                let n = shape.sites(layer);
                let isometries = (0..n)
                    .map(|_| haar_unitary(shape.unitary_dim(TensorKind::Isometry), rng))
                    .collect();
                let disentanglers = if shape.has_disentanglers() {
                    (0..n)
                        .map(|_| haar_unitary(shape.unitary_dim(TensorKind::Disentangler), rng))
                        .collect()
                } else {
                    Vec::new()
                };
                LayerTensors {
                    isometries,
                    disentanglers,
                }
            })
            .collect();
        Self { shape, layers }
    }

    pub fn random_seeded(shape: MeraShape, seed: RngSeed) -> Self {
        Self::random(shape, &mut seed.rng())
    }

    /// Network with every tensor equal to the identity.
    pub fn identity(shape: MeraShape) -> Self {
        let layers = (1..=shape.layers)
            .map(|layer| {
                let n = shape.sites(layer);
                let iso = UnitaryTensor::identity(shape.unitary_dim(TensorKind::Isometry));
                let dis = UnitaryTensor::identity(shape.unitary_dim(TensorKind::Disentangler));
                LayerTensors {
                    isometries: vec![iso; n],
                    disentanglers: if shape.has_disentanglers() { vec![dis; n] } else { Vec::new() },
                }
            })
            .collect();
        Self { shape, layers }
    }

    pub fn shape(&self) -> &MeraShape {
        &self.shape
    }

    pub fn tensor(&self, id: TensorId) -> Result<&UnitaryTensor> {
        self.shape.check_tensor(id)?;
        Ok(self.tensor_unchecked(id))
    }

    fn tensor_unchecked(&self, id: TensorId) -> &UnitaryTensor {
        let layer = &self.layers[id.layer - 1];
        match id.kind {
            TensorKind::Isometry => &layer.isometries[id.index],
            TensorKind::Disentangler => &layer.disentanglers[id.index],
        }
    }

    pub fn set_tensor(&mut self, id: TensorId, u: UnitaryTensor) -> Result<()> {
        self.shape.check_tensor(id)?;
        let expected = self.shape.unitary_dim(id.kind);
        if u.dim() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("U({expected})"),
                found: format!("U({})", u.dim()),
            });
        }
        self.set_unchecked(id, u);
        Ok(())
    }

    fn set_unchecked(&mut self, id: TensorId, u: UnitaryTensor) {
        let layer = &mut self.layers[id.layer - 1];
        match id.kind {
            TensorKind::Isometry => layer.isometries[id.index] = u,
            TensorKind::Disentangler => layer.disentanglers[id.index] = u,
        }
    }

    /// All tensors in [`MeraShape::tensor_ids`] order.
    pub fn unitaries(&self) -> Vec<UnitaryTensor> {
        self.shape
            .tensor_ids()
            .into_iter()
            .map(|id| self.tensor_unchecked(id).clone())
            .collect()
    }

    pub fn set_unitaries(&mut self, unitaries: Vec<UnitaryTensor>) -> Result<()> {
        let ids = self.shape.tensor_ids();
        if ids.len() != unitaries.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} tensors", ids.len()),
                found: format!("{}", unitaries.len()),
            });
        }
        for (id, u) in ids.into_iter().zip(unitaries) {
            self.set_tensor(id, u)?;
        }
        Ok(())
    }

    pub fn with_identity_disentanglers(&self) -> Self {
        let mut out = self.clone();
        let dim = self.shape.unitary_dim(TensorKind::Disentangler);
        for layer in &mut out.layers {
            for u in &mut layer.disentanglers {
                *u = UnitaryTensor::identity(dim);
            }
        }
        out
    }

    /// The tree network with the same isometries.
    pub fn as_ttns(&self) -> Self {
        let mut shape = self.shape;
        shape.flavor = Flavor::Ttns;
        let layers = self
            .layers
            .iter()
            .map(|l| LayerTensors {
                isometries: l.isometries.clone(),
                disentanglers: Vec::new(),
            })
            .collect();
        Self { shape, layers }
    }

    fn top_state(&self) -> LegOperator {
        let w = self.shape.window();
        LegOperator::zero_projector((0..w).collect(), vec![self.shape.chi; w])
    }

    fn apply_op(&self, rho: &LegOperator, op: &Op) -> LegOperator {
        let chi = self.shape.chi;
        match op {
            Op::Extend(l) => rho.extend_zero(&[*l], &[chi]),
            Op::Gate { id, legs } => rho.conjugate(self.tensor_unchecked(*id).matrix(), legs),
            Op::Trace(l) => rho.trace_out(&[*l]),
            Op::Relabel { from, to } => rho.clone().relabel(from, to),
        }
    }

    /// Layer-transition map of layer `layer` for the window starting at fine
    /// position `fine`: a density operator on window legs 0..w is mapped to one
    /// on window legs 0..w of the layer below.
    pub fn layer_transition(&self, layer: usize, fine: usize, rho: &LegOperator) -> Result<LegOperator> {
        if layer == 0 || layer > self.shape.layers || fine >= self.shape.sites(layer - 1) {
            return Err(Error::OutOfRange(format!("window {fine} at layer {layer}")));
        }
        let w = self.shape.window();
        let labels: Vec<usize> = (0..w).collect();
        if !rho.labels().iter().all(|l| labels.contains(l)) || rho.labels().len() != w {
            return Err(Error::ShapeMismatch {
                expected: format!("window legs {labels:?}"),
                found: format!("{:?}", rho.labels()),
            });
        }
        let mut out = rho.clone();
        for op in self.shape.layer_ops(layer, fine) {
            out = self.apply_op(&out, &op);
        }
        Ok(out.reorder(&labels))
    }

    /// Reduced density operator of the window starting at physical `site`.
    pub fn reduced_state(&self, site: usize) -> Result<LegOperator> {
        let cone = self.shape.causal_cone(site)?;
        let mut rho = self.top_state();
        for layer in (1..=self.shape.layers).rev() {
            rho = self.layer_transition(layer, cone.positions[layer - 1], &rho)?;
        }
        Ok(rho)
    }

    fn check_term(&self, h: &LocalTerm) -> Result<()> {
        if h.support() != self.shape.window() || h.site_dim() != self.shape.chi {
            return Err(Error::ShapeMismatch {
                expected: format!("{}-site term with site dimension {}", self.shape.window(), self.shape.chi),
                found: format!("{}-site term with site dimension {}", h.support(), h.site_dim()),
            });
        }
        Ok(())
    }

    /// <Ψ|h_i|Ψ> with h acting on sites i, i+1(, i+2).
    pub fn expectation_local(&self, h: &LocalTerm, site: usize) -> Result<f64> {
        self.check_term(h)?;
        let rho = self.reduced_state(site)?;
        Ok(trace_product(rho.matrix(), h.matrix()))
    }

    /// Σ_i <Ψ|h_i|Ψ> over every site of the periodic lattice.
    pub fn energy(&self, h: &LocalTerm) -> Result<f64> {
        (0..self.shape.length()).map(|i| self.expectation_local(h, i)).sum()
    }

    /// Contract the cone of `site` down, then carry h back up through layers
    /// `1..=top`, handing the Euclidean gradient of every wanted gate to `sink`.
    /// Returns <Ψ|h_i|Ψ>.
    fn sweep<W, S>(&self, h: &LocalTerm, site: usize, top: usize, wanted: W, mut sink: S) -> Result<f64>
    where
        W: Fn(TensorId) -> bool,
        S: FnMut(TensorId, ComplexMatrix) -> Result<()>,
    {
        let shape = &self.shape;
        let chi = shape.chi;
        let cone = shape.causal_cone(site)?;
        let mut rho = self.top_state();
        let mut stored: Vec<Vec<(Op, LegOperator)>> = vec![Vec::new(); top];
        for layer in (1..=shape.layers).rev() {
            let ops = shape.layer_ops(layer, cone.positions[layer - 1]);
            for op in ops {
                let next = self.apply_op(&rho, &op);
                if layer <= top {
                    stored[layer - 1].push((op, rho));
                }
                rho = next;
            }
        }
        let w = shape.window();
        let inputs: Vec<usize> = (0..w).collect();
        let energy = trace_product(&rho.matrix_in_order(&inputs), h.matrix());
        let mut y = LegOperator::new(inputs, vec![chi; w], h.matrix().clone());
        for layer_ops in &stored {
            for (op, x) in layer_ops.iter().rev() {
                y = match op {
                    Op::Relabel { from, to } => y.relabel(to, from),
                    Op::Trace(_) => y,
                    Op::Extend(l) => {
                        if y.has_label(*l) {
                            y.project_zero(&[*l])
                        } else {
                            y
                        }
                    }
                    Op::Gate { id, legs } => {
                        let missing: Vec<usize> = legs.iter().copied().filter(|l| !y.has_label(*l)).collect();
                        let y = y.extend_identity(&missing, &vec![chi; missing.len()]);
                        let u = self.tensor_unchecked(*id).matrix();
                        if wanted(*id) {
                            let mut order = legs.clone();
                            order.extend(y.labels().iter().copied().filter(|l| !legs.contains(l)));
                            let rest = ipow(chi, order.len() - legs.len());
                            let xm = x.reduce_to(&order).into_matrix();
                            let ym = y.matrix_in_order(&order);
                            sink(*id, euclidean_gradient(u, &xm, &ym, rest)?)?;
                        }
                        y.pullback(u, legs)
                    }
                };
            }
        }
        Ok(energy)
    }

    /// Euclidean gradient d = 2 ∂E/∂Ū of E = Σ_i <Ψ|h_i|Ψ> with respect to one
    /// tensor, up to terms normal to the tangent space: sites outside the causal
    /// support only contribute 2 h_i-weighted multiples of U X and are skipped.
    pub fn euclidean_gradient(&self, h: &LocalTerm, id: TensorId) -> Result<ComplexMatrix> {
        self.check_term(h)?;
        let dim = self.shape.unitary_dim(id.kind);
        let mut total = ComplexMatrix::zeros(dim, dim);
        for i in self.shape.causal_support(id)? {
            self.sweep(h, i, id.layer, |t| t == id, |_, d| {
                total += d;
                Ok(())
            })?;
        }
        Ok(total)
    }

    pub fn riemannian_gradient(&self, h: &LocalTerm, id: TensorId) -> Result<ComplexMatrix> {
        let d = self.euclidean_gradient(h, id)?;
        Ok(project_tangent(self.tensor_unchecked(id).matrix(), &d))
    }

    /// Per-term Riemannian gradients g_{k,i} for every site i of the causal support.
    pub fn term_gradients(&self, h: &LocalTerm, id: TensorId) -> Result<Vec<(usize, ComplexMatrix)>> {
        self.check_term(h)?;
        let u = self.tensor(id)?.matrix().clone();
        let mut out = Vec::new();
        for i in self.shape.causal_support(id)? {
            self.sweep(h, i, id.layer, |t| t == id, |_, d| {
                out.push((i, project_tangent(&u, &d)));
                Ok(())
            })?;
        }
        Ok(out)
    }

    /// Energy and Euclidean gradients of every tensor in [`MeraShape::tensor_ids`] order.
    pub fn energy_and_gradients(&self, h: &LocalTerm) -> Result<(f64, Vec<ComplexMatrix>)> {
        self.check_term(h)?;
        let shape = self.shape;
        let mut grads: Vec<ComplexMatrix> = shape
            .tensor_ids()
            .iter()
            .map(|id| {
                let n = shape.unitary_dim(id.kind);
                ComplexMatrix::zeros(n, n)
            })
            .collect();
        let mut energy = 0.0;
        for i in 0..shape.length() {
            energy += self.sweep(h, i, shape.layers, |_| true, |id, d| {
                grads[shape.flat_index(id)] += d;
                Ok(())
            })?;
        }
        Ok((energy, grads))
    }

    /// Amplitudes of the physical state, site 0 most significant.
    pub fn state_vector(&self) -> DVector<C64> {
        self.state_vector_replacing(None)
    }

    /// Amplitudes with one tensor replaced by an arbitrary matrix (linear
    /// response checks of gradients).
    pub fn state_vector_replacing(&self, replaced: Option<(TensorId, &ComplexMatrix)>) -> DVector<C64> {
        let shape = &self.shape;
        let chi = shape.chi;
        let b = shape.branching();
        let pick = |id: TensorId| -> &ComplexMatrix {
            match replaced {
                Some((r, m)) if r == id => m,
                _ => self.tensor_unchecked(id).matrix(),
            }
        };
        let top = shape.sites(shape.layers);
        let mut psi = DVector::from_element(ipow(chi, top), ZERO);
        psi[0] = C64::new(1.0, 0.0);
        for layer in (1..=shape.layers).rev() {
            let coarse = shape.sites(layer);
            let fine = shape.sites(layer - 1);
            psi = embed_coarse(&psi, coarse, fine, chi, |k| (b * k + fine - 1) % fine);
            for k in 0..coarse {
                let sites: Vec<usize> = (0..b).map(|j| (b * k + fine - 1 + j) % fine).collect();
                apply_gate(&mut psi, fine, chi, pick(TensorId::isometry(layer, k)), &sites);
            }
            if shape.has_disentanglers() {
                for k in 0..coarse {
                    let first = b * k + b - 2;
                    let sites = [first % fine, (first + 1) % fine];
                    apply_gate(&mut psi, fine, chi, pick(TensorId::disentangler(layer, k)), &sites);
                }
            }
        }
        psi
    }

    /// Periodic chain Hamiltonian Σ_i h_i on the physical lattice.
    pub fn hamiltonian(&self, h: &LocalTerm) -> ChainHamiltonian {
        ChainHamiltonian::periodic_uniform(self.shape.length(), h)
    }
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.transpose().iter())
        .map(|(x, y)| x * y)
        .sum::<C64>()
        .re
}

/// Place coarse site k at fine position `target(k)`, all other fine sites in |0>.
fn embed_coarse<F: Fn(usize) -> usize>(psi: &DVector<C64>, coarse: usize, fine: usize, dim: usize, target: F) -> DVector<C64> {
    let strides: Vec<usize> = (0..coarse).map(|k| ipow(dim, fine - 1 - target(k))).collect();
    let mut out = DVector::from_element(ipow(dim, fine), ZERO);
    for (idx, amp) in psi.iter().enumerate() {
        let mut rem = idx;
        let mut flat = 0;
        for k in (0..coarse).rev() {
            flat += (rem % dim) * strides[k];
            rem /= dim;
        }
        out[flat] = *amp;
    }
    out
}

fn apply_gate(psi: &mut DVector<C64>, sites: usize, dim: usize, gate: &ComplexMatrix, targets: &[usize]) {
    let strides: Vec<usize> = targets.iter().map(|&t| ipow(dim, sites - 1 - t)).collect();
    let sub = ipow(dim, targets.len());
    let offsets: Vec<usize> = (0..sub)
        .map(|j| {
            let mut rem = j;
            let mut off = 0;
            for q in (0..targets.len()).rev() {
                off += (rem % dim) * strides[q];
                rem /= dim;
            }
            off
        })
        .collect();
    let mut local = DVector::from_element(sub, ZERO);
    for base in 0..psi.len() {
        if strides.iter().any(|&s| (base / s) % dim != 0) {
            continue;
        }
        for (j, off) in offsets.iter().enumerate() {
            local[j] = psi[base + off];
        }
        let out = gate * &local;
        for (j, off) in offsets.iter().enumerate() {
            psi[base + off] = out[j];
        }
    }
}

/// Monte Carlo setup for gradient variances of one tensor kind.
#[derive(Clone, Debug)]
pub struct MeraVarianceConfig {
    pub shape: MeraShape,
    pub term: LocalTerm,
    pub kind: TensorKind,
    /// Layers whose gradients are measured.
    pub measured: Vec<usize>,
    /// A single tensor index per layer, or the spatial average over the layer.
    pub tensor: Option<usize>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MeraVarianceResult {
    /// One report per measured layer: estimate of (1/N) Avg Tr(g†g).
    pub layers: Vec<VarianceReport>,
    /// Ratios Var(τ+1)/Var(τ) for consecutive measured layers, with the
    /// predicted b·η as prediction.
    pub ratios: Vec<VarianceReport>,
}

struct LayerSample {
    total: f64,
    diagonal: f64,
    per_tensor: Vec<f64>,
    probe: Vec<f64>,
}

/// Second-largest eigenvalue of the averaged doubled channel, times the branching ratio.
pub fn predicted_layer_ratio(family: Family, flavor: Flavor, chi: usize) -> Option<f64> {
    predicted_spectrum(family, flavor, None, chi)
        .and_then(|s| s.get(1).copied())
        .map(|eta| eta * family.branching() as f64)
}

pub fn mc_gradient_variance(cfg: &MeraVarianceConfig) -> Result<MeraVarianceResult> {
    let shape = cfg.shape;
    if cfg.samples < 100 {
        return Err(Error::InsufficientSamples(format!("{} < 100", cfg.samples)));
    }
    if cfg.measured.is_empty() {
        return Err(Error::InvalidConfig("no layers to measure".into()));
    }
    for &layer in &cfg.measured {
        let index = cfg.tensor.unwrap_or(0);
        shape.check_tensor(TensorId {
            kind: cfg.kind,
            layer,
            index,
        })?;
    }
    if cfg.term.support() != shape.window() || cfg.term.site_dim() != shape.chi {
        return Err(Error::ShapeMismatch {
            expected: format!("{}-site term with site dimension {}", shape.window(), shape.chi),
            found: format!("{}-site term with site dimension {}", cfg.term.support(), cfg.term.site_dim()),
        });
    }
    let top = *cfg.measured.iter().max().unwrap();
    let selected = |layer: usize| -> Vec<usize> {
        match cfg.tensor {
            Some(k) => vec![k],
            None => (0..shape.sites(layer)).collect(),
        }
    };
    let sites: Vec<usize> = match cfg.tensor {
        None => (0..shape.length()).collect(),
        Some(k) => {
            let mut all = BTreeSet::new();
            for &layer in &cfg.measured {
                all.extend(shape.causal_support(TensorId {
                    kind: cfg.kind,
                    layer,
                    index: k,
                })?);
            }
            all.into_iter().collect()
        }
    };
    let probe_index = cfg.tensor.unwrap_or(0);
    let wanted = |id: TensorId| {
        id.kind == cfg.kind && cfg.measured.contains(&id.layer) && cfg.tensor.is_none_or(|k| k == id.index)
    };
    let dim = shape.unitary_dim(cfg.kind);
    let per_sample: Vec<Result<Vec<LayerSample>>> = map_samples(cfg.samples, |s| {
        let net = MeraNetwork::random(shape, &mut RngSeed::for_sample(cfg.seed, s as u64).rng());
        let mut totals: Vec<Vec<ComplexMatrix>> = (0..=top)
            .map(|l| {
                let n = if l == 0 { 0 } else { shape.sites(l) };
                vec![ComplexMatrix::zeros(dim, dim); n]
            })
            .collect();
        let mut diag: Vec<Vec<f64>> = totals.iter().map(|v| vec![0.0; v.len()]).collect();
        for &i in &sites {
            net.sweep(&cfg.term, i, top, wanted, |id, d| {
                let g = project_tangent(net.tensor_unchecked(id).matrix(), &d);
                diag[id.layer][id.index] += gradient_norm_per_dim(&g);
                totals[id.layer][id.index] += g;
                Ok(())
            })?;
        }
        Ok(cfg
            .measured
            .iter()
            .map(|&layer| {
                let ks = selected(layer);
                let per_tensor: Vec<f64> = ks.iter().map(|&k| gradient_norm_per_dim(&totals[layer][k])).collect();
                let count = ks.len() as f64;
                let probe = totals[layer][probe_index]
                    .iter()
                    .flat_map(|z| [z.re, z.im])
                    .collect();
                LayerSample {
                    total: per_tensor.iter().sum::<f64>() / count,
                    diagonal: ks.iter().map(|&k| diag[layer][k]).sum::<f64>() / count,
                    per_tensor,
                    probe,
                }
            })
            .collect())
    });
    let per_sample: Vec<Vec<LayerSample>> = per_sample.into_iter().collect::<Result<_>>()?;
    let mut layers = Vec::new();
    for (idx, &layer) in cfg.measured.iter().enumerate() {
        let totals: Vec<f64> = per_sample.iter().map(|s| s[idx].total).collect();
        let diagonal: Vec<f64> = per_sample.iter().map(|s| s[idx].diagonal).collect();
        let mut report = VarianceReport::from_stats("grad_var", summarize(&totals)?, None, cfg.seed);
        let diag_stats = summarize(&diagonal)?;
        let count = per_sample[0][idx].per_tensor.len();
        let tensor_means: Vec<f64> = (0..count)
            .map(|k| per_sample.iter().map(|s| s[idx].per_tensor[k]).sum::<f64>() / cfg.samples as f64)
            .collect();
        let probe_len = per_sample[0][idx].probe.len();
        let columns: Vec<Vec<f64>> = (0..probe_len)
            .map(|c| per_sample.iter().map(|s| s[idx].probe[c]).collect())
            .collect();
        report.gradient_mean_max_z = Some(max_mean_z(&columns)?);
        report.extras.insert("layer".into(), layer as f64);
        report.extras.insert("diagonal".into(), diag_stats.mean);
        report.extras.insert("diagonal_stderr".into(), diag_stats.stderr);
        report.extras.insert(
            "max_tensor_variance".into(),
            tensor_means.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        );
        report.extras.insert(
            "min_tensor_variance".into(),
            tensor_means.iter().cloned().fold(f64::INFINITY, f64::min),
        );
        let diag_applies = shape.family == Family::Binary1d
            && shape.flavor == Flavor::Mera
            && cfg.kind == TensorKind::Disentangler
            && cfg.tensor.is_none();
        if diag_applies {
            report.extras.insert(
                "diagonal_leading".into(),
                binary_diag_avg_leading_term(shape.chi, layer, &cfg.term)?,
            );
            report.extras.insert(
                "diagonal_exact".into(),
                binary_diag_avg_exact(shape.chi, layer, shape.layers, &cfg.term)?,
            );
        }
        layers.push(report);
    }
    let mut ratios = Vec::new();
    let prediction = predicted_layer_ratio(shape.family, shape.flavor, shape.chi);
    for idx in 1..cfg.measured.len() {
        let (lower, upper) = (cfg.measured[idx - 1], cfg.measured[idx]);
        if upper != lower + 1 {
            continue;
        }
        let a: Vec<f64> = per_sample.iter().map(|s| s[idx].total).collect();
        let b: Vec<f64> = per_sample.iter().map(|s| s[idx - 1].total).collect();
        let (mean_a, mean_b) = (layers[idx].estimate, layers[idx - 1].estimate);
        let ratio = mean_a / mean_b;
        let linearized: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - ratio * y) / mean_b).collect();
        let lin = summarize(&linearized)?;
        let mut report = VarianceReport::from_stats("layer_ratio", lin, prediction, cfg.seed);
        report.estimate = ratio;
        report.extras.insert("layer".into(), upper as f64);
        report.extras.insert("lower_layer".into(), lower as f64);
        ratios.push(report);
    }
    Ok(MeraVarianceResult { layers, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{pauli_string, random_traceless};
    use crate::tensor::{haar_unitary_seeded, max_abs, unitarity_defect};
    use proptest::prelude::*;

    fn binary(t: usize, tp: usize) -> MeraShape {
        MeraShape::new(Family::Binary1d, Flavor::Mera, 2, t, tp).unwrap()
    }

    fn ternary(t: usize, tp: usize) -> MeraShape {
        MeraShape::new(Family::Ternary1d, Flavor::Mera, 2, t, tp).unwrap()
    }

    fn term(word: &str) -> LocalTerm {
        LocalTerm::new(pauli_string(word).unwrap(), word.len(), 2).unwrap()
    }

    #[test]
    fn cone_examples() {
        let c = binary(3, 6).causal_cone(5).unwrap();
        assert_eq!(c.positions, vec![5, 2, 1, 0]);
        assert_eq!(c.movers, vec![Mover::Right, Mover::Left, Mover::Right]);
        let c = ternary(3, 4).causal_cone(10).unwrap();
        assert_eq!(c.positions, vec![10, 3, 1, 0]);
        assert_eq!(c.movers, vec![Mover::Center, Mover::Left, Mover::Center]);
        assert!(binary(3, 5).causal_cone(0).unwrap().positions.iter().all(|&p| p == 0));
        assert!(binary(3, 5).causal_cone(32).is_err());
    }

    #[test]
    fn margins_are_enforced() {
        assert!(MeraShape::new(Family::Binary1d, Flavor::Mera, 2, 3, 4).is_err());
        assert!(MeraShape::new(Family::Ternary1d, Flavor::Mera, 2, 2, 2).is_err());
        assert!(MeraShape::new(Family::Ternary1d, Flavor::Mera, 2, 2, 3).is_ok());
        assert!(MeraShape::new(Family::Nonary2d, Flavor::Mera, 2, 1, 3).is_err());
    }

    #[test]
    fn support_examples() {
        let shape = binary(3, 5);
        assert_eq!(shape.causal_support(TensorId::disentangler(1, 3)).unwrap().len(), 4);
        let s = shape.causal_support(TensorId::disentangler(3, 1)).unwrap();
        assert_eq!(s, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn support_is_dual_to_cones() {
        for shape in [
            binary(3, 5),
            MeraShape::new(Family::Binary1d, Flavor::Ttns, 2, 2, 5).unwrap(),
            ternary(2, 3),
        ] {
            let cones: Vec<Vec<TensorId>> = (0..shape.length()).map(|i| shape.cone_tensors(i).unwrap()).collect();
            for id in shape.tensor_ids() {
                let support = shape.causal_support(id).unwrap();
                for (i, cone) in cones.iter().enumerate() {
                    assert_eq!(support.contains(&i), cone.contains(&id), "{id:?} site {i}");
                }
            }
        }
    }

    #[test]
    fn nearby_cones_converge() {
        let shape = MeraShape::new(Family::Binary1d, Flavor::Mera, 2, 2, 6).unwrap();
        let n = shape.length();
        for i in 0..n {
            for dist in 1..=3 {
                let j = (i + dist) % n;
                let (ci, cj) = (shape.causal_cone(i).unwrap(), shape.causal_cone(j).unwrap());
                let m = shape.sites(2);
                let gap = (ci.positions[2] + m - cj.positions[2]) % m;
                assert!(gap <= 1 || gap == m - 1, "{i} {j}");
            }
        }
    }

    fn apply_hamiltonian(net: &MeraNetwork, h: &LocalTerm, psi: &DVector<C64>) -> DVector<C64> {
        let l = net.shape().length();
        let mut out = DVector::from_element(psi.len(), ZERO);
        for i in 0..l {
            let mut part = psi.clone();
            let sites: Vec<usize> = (0..h.support()).map(|k| (i + k) % l).collect();
            apply_gate(&mut part, l, h.site_dim(), h.matrix(), &sites);
            out += part;
        }
        out
    }

    fn dense_energy(net: &MeraNetwork, h: &LocalTerm) -> f64 {
        let psi = net.state_vector();
        psi.dotc(&apply_hamiltonian(net, h, &psi)).re
    }

    /// Riemannian gradient from d_ab = 2 <Φ_ab|H|Ψ>, Φ_ab having E_ab in place of the tensor.
    fn dense_gradient(net: &MeraNetwork, h: &LocalTerm, id: TensorId) -> ComplexMatrix {
        let psi = net.state_vector();
        let hpsi = apply_hamiltonian(net, h, &psi);
        let n = net.shape().unitary_dim(id.kind);
        let d = ComplexMatrix::from_fn(n, n, |a, b| {
            let mut e = ComplexMatrix::zeros(n, n);
            e[(a, b)] = C64::new(1.0, 0.0);
            let phi = net.state_vector_replacing(Some((id, &e)));
            phi.dotc(&hpsi) * C64::new(2.0, 0.0)
        });
        project_tangent(net.tensor(id).unwrap().matrix(), &d)
    }

    #[test]
    fn matches_dense_oracle() {
        for (shape, word) in [(binary(1, 3), "ZXY"), (ternary(1, 2), "XZ")] {
            let net = MeraNetwork::random_seeded(shape, RngSeed::new(5));
            let psi = net.state_vector();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
            let h = term(word);
            let cone: f64 = net.energy(&h).unwrap();
            assert!((cone - dense_energy(&net, &h)).abs() < 1e-10, "{cone}");
            let h = random_traceless(shape.window(), 2, RngSeed::new(9)).unwrap();
            assert!((net.energy(&h).unwrap() - dense_energy(&net, &h)).abs() < 1e-10);
            for id in [
                TensorId::disentangler(1, 1),
                TensorId::isometry(1, 0),
                TensorId::isometry(1, shape.sites(1) - 1),
            ] {
                let fast = net.riemannian_gradient(&h, id).unwrap();
                let slow = dense_gradient(&net, &h, id);
                assert!(max_abs(&(fast - slow)) < 1e-8, "{id:?}");
            }
        }
    }

    #[test]
    fn two_layer_gradients_match_dense_oracle() {
        let shape = binary(2, 4);
        let net = MeraNetwork::random_seeded(shape, RngSeed::new(2));
        let h = random_traceless(3, 2, RngSeed::new(3)).unwrap();
        let (energy, grads) = net.energy_and_gradients(&h).unwrap();
        assert!((energy - dense_energy(&net, &h)).abs() < 1e-10);
        for id in [TensorId::disentangler(2, 2), TensorId::isometry(2, 1), TensorId::disentangler(1, 5)] {
            let u = net.tensor(id).unwrap().matrix();
            let fast = project_tangent(u, &grads[shape.flat_index(id)]);
            assert!(max_abs(&(fast - dense_gradient(&net, &h, id))) < 1e-8, "{id:?}");
        }
    }

    #[test]
    fn product_limit() {
        let shape = binary(2, 4);
        let net = MeraNetwork::identity(shape);
        let h = random_traceless(3, 2, RngSeed::new(4)).unwrap();
        let expected = h.matrix()[(0, 0)].re;
        for i in [0, 5, 15] {
            assert!((net.expectation_local(&h, i).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_tensors_do_not_matter() {
        let shape = binary(2, 5);
        let mut net = MeraNetwork::random_seeded(shape, RngSeed::new(8));
        let h = term("ZZX");
        let before = net.expectation_local(&h, 3).unwrap();
        let cone = shape.cone_tensors(3).unwrap();
        let outside = shape.tensor_ids().into_iter().find(|id| !cone.contains(id)).unwrap();
        let dim = shape.unitary_dim(outside.kind);
        net.set_tensor(outside, haar_unitary_seeded(dim, RngSeed::new(99))).unwrap();
        assert!((net.expectation_local(&h, 3).unwrap() - before).abs() < 1e-12);
    }

    #[test]
    fn ttns_is_mera_without_disentanglers() {
        for shape in [binary(2, 4), ternary(2, 3)] {
            let net = MeraNetwork::random_seeded(shape, RngSeed::new(21));
            let h = random_traceless(shape.window(), 2, RngSeed::new(1)).unwrap();
            let a = net.with_identity_disentanglers().energy(&h).unwrap();
            let b = net.as_ttns().energy(&h).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn terms_outside_support_do_not_contribute() {
        let shape = binary(2, 5);
        let net = MeraNetwork::random_seeded(shape, RngSeed::new(3));
        let h = term("XYZ");
        let id = TensorId::disentangler(2, 3);
        let support = shape.causal_support(id).unwrap();
        let outside = (0..shape.length()).find(|i| !support.contains(i)).unwrap();
        let mut hits = 0;
        net.sweep(&h, outside, 2, |t| t == id, |_, _| {
            hits += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(hits, 0);
        assert_eq!(net.term_gradients(&h, id).unwrap().len(), support.len());
    }

    #[test]
    fn finite_difference_direction() {
        let shape = binary(1, 3);
        let net = MeraNetwork::random_seeded(shape, RngSeed::new(17));
        let h = random_traceless(3, 2, RngSeed::new(18)).unwrap();
        let id = TensorId::isometry(1, 2);
        let u = net.tensor(id).unwrap().matrix().clone();
        let g = net.riemannian_gradient(&h, id).unwrap();
        let skew = haar_unitary_seeded(4, RngSeed::new(19)).into_matrix();
        let a = (&skew - skew.adjoint()) * C64::new(0.5, 0.0);
        let eps = 1e-5;
        let energy_at = |t: f64| {
            let v = (&a * C64::new(t, 0.0)).exp();
            let mut moved = net.clone();
            moved.set_tensor(id, UnitaryTensor::new(&u * v).unwrap()).unwrap();
            moved.energy(&h).unwrap()
        };
        let numeric = (energy_at(eps) - energy_at(-eps)) / (2.0 * eps);
        let analytic = (g.adjoint() * &u * &a).trace().re;
        assert!((numeric - analytic).abs() < 1e-6 * analytic.abs().max(1.0), "{numeric} {analytic}");
    }

    #[test]
    fn transitions_preserve_trace_and_positivity() {
        for shape in [binary(2, 4), ternary(2, 3)] {
            let net = MeraNetwork::random_seeded(shape, RngSeed::new(31));
            let w = shape.window();
            let dim = ipow(2, w);
            let a = haar_unitary_seeded(dim, RngSeed::new(32)).into_matrix();
            let weights = ComplexMatrix::from_diagonal(&DVector::from_fn(dim, |k, _| C64::new((k + 1) as f64, 0.0)));
            let rho = &a * weights * a.adjoint();
            let rho = &rho / rho.trace();
            let input = LegOperator::new((0..w).collect(), vec![2; w], rho);
            for fine in 0..shape.sites(1) {
                let out = net.layer_transition(2, fine, &input).unwrap();
                assert!((out.trace().re - 1.0).abs() < 1e-12);
                let eig = out.matrix().clone().symmetric_eigen();
                assert!(eig.eigenvalues.iter().all(|&e| e > -1e-12));
            }
        }
    }

    #[test]
    fn unitaries_round_trip() {
        let shape = ternary(1, 2);
        let mut net = MeraNetwork::random_seeded(shape, RngSeed::new(1));
        let us = net.unitaries();
        assert_eq!(us.len(), shape.tensor_ids().len());
        for u in &us {
            assert!(unitarity_defect(u.matrix()) < 1e-12);
        }
        let other = MeraNetwork::random_seeded(shape, RngSeed::new(2));
        net.set_unitaries(other.unitaries()).unwrap();
        let h = term("ZZ");
        assert_eq!(net.energy(&h).unwrap(), other.energy(&h).unwrap());
    }

    #[test]
    fn small_monte_carlo_runs() {
        let cfg = MeraVarianceConfig {
            shape: binary(2, 4),
            term: term("ZZZ"),
            kind: TensorKind::Disentangler,
            measured: vec![1, 2],
            tensor: None,
            samples: 100,
            seed: 4,
        };
        let res = mc_gradient_variance(&cfg).unwrap();
        assert_eq!(res.layers.len(), 2);
        assert_eq!(res.ratios.len(), 1);
        assert!(res.layers.iter().all(|r| r.estimate > 0.0));
        assert!((res.ratios[0].prediction.unwrap() - 0.5184).abs() < 1e-12);
        let again = mc_gradient_variance(&cfg).unwrap();
        assert_eq!(res.layers[1].estimate, again.layers[1].estimate);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn states_are_normalized(seed in 0u64..10_000, site in 0usize..16) {
            let shape = binary(2, 4);
            let net = MeraNetwork::random_seeded(shape, RngSeed::new(seed));
            let rho = net.reduced_state(site).unwrap();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        }

        #[test]
        fn gradients_are_tangent(seed in 0u64..10_000, k in 0usize..4) {
            let shape = binary(2, 4);
            let net = MeraNetwork::random_seeded(shape, RngSeed::new(seed));
            let h = random_traceless(3, 2, RngSeed::new(seed + 1)).unwrap();
            for id in [TensorId::disentangler(2, k), TensorId::isometry(2, k)] {
                let g = net.riemannian_gradient(&h, id).unwrap();
                let u = net.tensor(id).unwrap().matrix();
                let a = u.adjoint() * g;
                prop_assert!(max_abs(&(&a + a.adjoint())) < 1e-10);
            }
        }
    }
}
