//! Doubled layer-transition channels of 1D binary/ternary MERA and TTNS and of
//! the nonary 2D MERA, as matrices on projector-basis coefficients.

use serde::{Deserialize, Serialize};

use super::basis::{group_matrix, BasisNetwork, RealMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Binary1d,
    Ternary1d,
    Nonary2d,
}

impl Family {
    pub fn branching(self) -> usize {
        match self {
            Family::Binary1d => 2,
            Family::Ternary1d => 3,
            Family::Nonary2d => 9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Mera,
    Ttns,
}

/// Which of the causal-cone windows a layer transition produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mover {
    Left,
    Center,
    Right,
}

pub(crate) fn check_chi(chi: usize) -> Result<()> {
    if chi < 2 {
        return Err(Error::InvalidDimension(format!("bond dimension {chi} < 2")));
    }
    Ok(())
}

// Binary labels: c1 a1 c2 a2 c3 a3.
const C1: usize = 0;
const A1: usize = 1;
const C2: usize = 2;
const A2: usize = 3;
const C3: usize = 4;
const A3: usize = 5;

/// Which disentangler of the binary window is left out of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Omitted {
    None,
    First,
    Second,
}

fn binary_network(chi: usize, flavor: Flavor, omitted: Omitted) -> BasisNetwork {
    let mut net = BasisNetwork::new(&[(C1, chi), (C2, chi), (C3, chi)]);
    for a in [A1, A2, A3] {
        net.append(a, chi);
    }
    net.group(&[C1, A1]);
    net.group(&[C2, A2]);
    net.group(&[C3, A3]);
    if flavor == Flavor::Mera {
        if omitted != Omitted::First {
            net.group(&[A1, C2]);
        }
        if omitted != Omitted::Second {
            net.group(&[A2, C3]);
        }
    }
    net
}

/// Labels kept by a binary mover (after tracing the rest).
fn binary_window(mover: Mover) -> [usize; 3] {
    match mover {
        Mover::Right => [C2, A2, C3],
        _ => [A1, C2, A2],
    }
}

/// 8×8 binary layer transition.
pub fn binary_channel(chi: usize, flavor: Flavor, mover: Mover) -> Result<RealMatrix> {
    check_chi(chi)?;
    if mover == Mover::Center {
        return Err(Error::Constraint("binary cones have no center mover".into()));
    }
    let mut net = binary_network(chi, flavor, Omitted::None);
    let keep = binary_window(mover);
    let drop: Vec<usize> = [C1, A1, C2, A2, C3, A3]
        .into_iter()
        .filter(|l| !keep.contains(l))
        .collect();
    net.trace(&drop);
    Ok(net.matrix(&keep))
}

/// Binary transition with one disentangler removed. The output legs are the
/// mover window plus any legs of the removed disentangler outside it, in site
/// order; they are returned alongside the matrix.
pub fn binary_tilde_channel(chi: usize, mover: Mover, omitted: Omitted) -> Result<(RealMatrix, Vec<usize>)> {
    check_chi(chi)?;
    let mut net = binary_network(chi, Flavor::Mera, omitted);
    let mut keep: Vec<usize> = binary_window(mover).to_vec();
    let extra: &[usize] = match omitted {
        Omitted::None => &[],
        Omitted::First => &[A1, C2],
        Omitted::Second => &[A2, C3],
    };
    for &l in extra {
        if !keep.contains(&l) {
            keep.push(l);
        }
    }
    keep.sort_unstable();
    let drop: Vec<usize> = [C1, A1, C2, A2, C3, A3]
        .into_iter()
        .filter(|l| !keep.contains(l))
        .collect();
    net.trace(&drop);
    let m = net.matrix(&keep);
    Ok((m, keep))
}

pub fn binary_average(chi: usize, flavor: Flavor) -> Result<RealMatrix> {
    Ok((binary_channel(chi, flavor, Mover::Left)? + binary_channel(chi, flavor, Mover::Right)?) * 0.5)
}

/// 16×16 channel for two cones whose windows are shifted by one site, mapping
/// (c₋₁, a₋₁, c₀, a₀) pairs between layers.
pub fn binary_offdiag_channel(chi: usize) -> Result<RealMatrix> {
    check_chi(chi)?;
    let (cm2, am2, cm1, am1, c0, a0, cp1, ap1) = (0, 1, 2, 3, 4, 5, 6, 7);
    let mut net = BasisNetwork::new(&[(cm2, chi), (cm1, chi), (c0, chi), (cp1, chi)]);
    for a in [am2, am1, a0, ap1] {
        net.append(a, chi);
    }
    net.one_copy(&[cm2, am2]);
    net.group(&[cm1, am1]);
    net.group(&[c0, a0]);
    net.one_copy(&[cp1, ap1]);
    net.one_copy(&[am2, cm1]);
    net.group(&[am1, c0]);
    net.one_copy(&[a0, cp1]);
    net.trace(&[cm2, am2, cp1, ap1]);
    Ok(net.matrix(&[cm1, am1, c0, a0]))
}

// Ternary labels: c1 a1 b1 c2 a2 b2.
const TC1: usize = 0;
const TA1: usize = 1;
const TB1: usize = 2;
const TC2: usize = 3;
const TA2: usize = 4;
const TB2: usize = 5;

/// 4×4 ternary layer transition.
pub fn ternary_channel(chi: usize, flavor: Flavor, mover: Mover) -> Result<RealMatrix> {
    check_chi(chi)?;
    let mut net = BasisNetwork::new(&[(TC1, chi), (TC2, chi)]);
    for a in [TA1, TB1, TA2, TB2] {
        net.append(a, chi);
    }
    net.group(&[TC1, TA1, TB1]);
    net.group(&[TC2, TA2, TB2]);
    if flavor == Flavor::Mera {
        net.group(&[TB1, TC2]);
    }
    let keep = match mover {
        Mover::Left => [TA1, TB1],
        Mover::Center => [TB1, TC2],
        Mover::Right => [TC2, TA2],
    };
    let drop: Vec<usize> = [TC1, TA1, TB1, TC2, TA2, TB2]
        .into_iter()
        .filter(|l| !keep.contains(l))
        .collect();
    net.trace(&drop);
    Ok(net.matrix(&keep))
}

pub fn ternary_average(chi: usize, flavor: Flavor) -> Result<RealMatrix> {
    let mut sum = ternary_channel(chi, flavor, Mover::Left)?;
    sum += ternary_channel(chi, flavor, Mover::Center)?;
    sum += ternary_channel(chi, flavor, Mover::Right)?;
    Ok(sum / 3.0)
}

/// Single-site doubled MPS-like channel with physical dimension `d` fused into
/// one site: append, average jointly, trace.
pub fn fused_site_channel(chi: usize, d: usize) -> RealMatrix {
    let mut net = BasisNetwork::new(&[(0, chi)]);
    net.append(1, d);
    net.group(&[0, 1]);
    net.trace(&[1]);
    net.matrix(&[0])
}

// Nonary geometry: a 6×6 patch made of four 3×3 blocks; site (row, col) has
// label 6 row + col. Block centers hold the coarse-grained sites.
const GRID: usize = 6;

fn site(row: usize, col: usize) -> usize {
    row * GRID + col
}

fn block_sites(block: usize) -> Vec<usize> {
    let (br, bc) = (3 * (block / 2), 3 * (block % 2));
    (0..3)
        .flat_map(|r| (0..3).map(move |c| site(br + r, bc + c)))
        .collect()
}

fn block_center(block: usize) -> usize {
    site(3 * (block / 2) + 1, 3 * (block % 2) + 1)
}

fn nonary_disentanglers() -> Vec<Vec<usize>> {
    vec![
        vec![site(2, 2), site(2, 3), site(3, 2), site(3, 3)],
        vec![site(1, 2), site(1, 3)],
        vec![site(4, 2), site(4, 3)],
        vec![site(2, 1), site(3, 1)],
        vec![site(2, 4), site(3, 4)],
    ]
}

/// Nine 2×2 window offsets (row, col) inside the patch, row-major.
pub const NONARY_OFFSETS: [(usize, usize); 9] = [
    (1, 1),
    (1, 2),
    (1, 3),
    (2, 1),
    (2, 2),
    (2, 3),
    (3, 1),
    (3, 2),
    (3, 3),
];

fn nonary_window(offset: (usize, usize)) -> [usize; 4] {
    let (r, c) = offset;
    [site(r, c), site(r, c + 1), site(r + 1, c), site(r + 1, c + 1)]
}

/// Isometry block map from a coarse site to the subset `kept` of its nine
/// fine sites (the others traced). Entry [σ_kept, σ_center].
fn block_map(chi: usize, kept_positions: &[usize]) -> RealMatrix {
    let g = group_matrix(&[chi; 9]);
    let k = kept_positions.len();
    let mut out = RealMatrix::zeros(1 << k, 2);
    for (col, input) in [0usize, 1 << 8].into_iter().enumerate() {
        for sigma in 0..(1usize << 9) {
            let mut reduced = 0usize;
            for (j, &p) in kept_positions.iter().enumerate() {
                let bit = (sigma >> (8 - p)) & 1;
                reduced |= bit << (k - 1 - j);
            }
            out[(reduced, col)] += g[(sigma, input)];
        }
    }
    out
}

/// 16×16 nonary transition for the 2×2 window at `offset`, mapping the four
/// coarse sites (row-major) to the four window sites (row-major).
pub fn nonary_channel(chi: usize, flavor: Flavor, offset: (usize, usize)) -> Result<RealMatrix> {
    check_chi(chi)?;
    if !NONARY_OFFSETS.contains(&offset) {
        return Err(Error::OutOfRange(format!("window offset {offset:?}")));
    }
    let window = nonary_window(offset);
    let disentanglers: Vec<Vec<usize>> = match flavor {
        Flavor::Ttns => Vec::new(),
        Flavor::Mera => nonary_disentanglers()
            .into_iter()
            .filter(|d| d.iter().any(|s| window.contains(s)))
            .collect(),
    };
    let mut kept: Vec<usize> = window.to_vec();
    for d in &disentanglers {
        kept.extend(d.iter().copied());
    }
    kept.sort_unstable();
    kept.dedup();
    let centers: Vec<(usize, usize)> = (0..4).map(|b| (block_center(b), chi)).collect();
    let mut net = BasisNetwork::new(&centers);
    for block in 0..4 {
        let sites = block_sites(block);
        let positions: Vec<usize> = (0..9).filter(|&p| kept.contains(&sites[p])).collect();
        let outs: Vec<(usize, usize)> = positions.iter().map(|&p| (sites[p], chi)).collect();
        // Center label is reused as an output label, so rename the input first.
        let tmp = 1000 + block;
        net.apply(&RealMatrix::identity(2, 2), &[block_center(block)], &[(tmp, chi)]);
        net.apply(&block_map(chi, &positions), &[tmp], &outs);
    }
    for d in &disentanglers {
        net.group(d);
    }
    let drop: Vec<usize> = kept.iter().copied().filter(|s| !window.contains(s)).collect();
    net.trace(&drop);
    Ok(net.matrix(&window))
}

pub fn nonary_average(chi: usize, flavor: Flavor) -> Result<RealMatrix> {
    let mut sum = RealMatrix::zeros(16, 16);
    for offset in NONARY_OFFSETS {
        sum += nonary_channel(chi, flavor, offset)?;
    }
    Ok(sum / 9.0)
}

/// Spatially averaged layer transition of a family and flavor.
pub fn average_channel(family: Family, flavor: Flavor, chi: usize) -> Result<RealMatrix> {
    match family {
        Family::Binary1d => binary_average(chi, flavor),
        Family::Ternary1d => ternary_average(chi, flavor),
        Family::Nonary2d => nonary_average(chi, flavor),
    }
}

/// Row vector t^{⊗n}.
pub fn trace_rows(sites: usize) -> RealMatrix {
    RealMatrix::from_element(1, 1 << sites, 1.0)
}

/// max |t^{⊗out} M - t^{⊗in}|.
pub fn trace_preservation_defect(m: &RealMatrix) -> f64 {
    let out = m.nrows().trailing_zeros() as usize;
    let inp = m.ncols().trailing_zeros() as usize;
    (trace_rows(out) * m - trace_rows(inp)).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_channels_preserve_trace() {
        for chi in [2, 3] {
            for flavor in [Flavor::Mera, Flavor::Ttns] {
                for mover in [Mover::Left, Mover::Right] {
                    assert!(trace_preservation_defect(&binary_channel(chi, flavor, mover).unwrap()) < 1e-12);
                }
                for mover in [Mover::Left, Mover::Center, Mover::Right] {
                    assert!(trace_preservation_defect(&ternary_channel(chi, flavor, mover).unwrap()) < 1e-12);
                }
                for offset in NONARY_OFFSETS {
                    assert!(trace_preservation_defect(&nonary_channel(chi, flavor, offset).unwrap()) < 1e-12);
                }
            }
            assert!(trace_preservation_defect(&binary_offdiag_channel(chi).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn binary_movers_are_mirror_images() {
        // Reversing the site order maps the right mover onto the left mover.
        let chi = 3;
        let right = binary_channel(chi, Flavor::Mera, Mover::Right).unwrap();
        let left = binary_channel(chi, Flavor::Mera, Mover::Left).unwrap();
        let reverse = |i: usize| ((i & 1) << 2) | (i & 2) | ((i >> 2) & 1);
        for r in 0..8 {
            for c in 0..8 {
                assert!((left[(r, c)] - right[(reverse(r), reverse(c))]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn nonary_offsets_related_by_reflection() {
        // Left-right reflection: (r, c) -> (r, 4 - c), swapping columns of the
        // 2×2 coarse and window layouts.
        let swap_cols = |i: usize| ((i & 0b1010) >> 1) | ((i & 0b0101) << 1);
        let swap_rows = |i: usize| ((i & 0b1100) >> 2) | ((i & 0b0011) << 2);
        for flavor in [Flavor::Mera, Flavor::Ttns] {
            for (r, c) in NONARY_OFFSETS {
                let m = nonary_channel(2, flavor, (r, c)).unwrap();
                let mirrored = nonary_channel(2, flavor, (r, 4 - c)).unwrap();
                let flipped = nonary_channel(2, flavor, (4 - r, c)).unwrap();
                for i in 0..16 {
                    for j in 0..16 {
                        assert!((m[(i, j)] - mirrored[(swap_cols(i), swap_cols(j))]).abs() < 1e-13);
                        assert!((m[(i, j)] - flipped[(swap_rows(i), swap_rows(j))]).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn ternary_ttns_center_factorizes() {
        for chi in [2, 3] {
            let center = ternary_channel(chi, Flavor::Ttns, Mover::Center).unwrap();
            let single = fused_site_channel(chi, chi * chi);
            assert!((center - single.kronecker(&single)).abs().max() < 1e-13);
        }
    }
}
