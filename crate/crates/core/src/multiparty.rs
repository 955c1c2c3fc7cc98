//! Generalized sandwich forms on `n` parties: products of gates, each
//! controlled in the computational basis of `n − 1` parties and acting on the
//! remaining one.

use crate::error::{Result, SynthError};
use crate::gateir::{apply_circuit, Circuit, ControlledGate, GateRecord, PartySpace, UnitaryMatrix, KIND_CONTROLLED};
use crate::matcore::{is_identity, max_abs_diff, require_unitary, CMat};
use crate::sandwich::{sandwich_layers, Layer, Side, INPUT_UNITARY_TOL, STRIP_EPS};

/// A gate controlled by `controls` (ascending) acting on party `target`.
/// Branches are indexed in mixed radix over `controls`.
#[derive(Debug, Clone)]
pub struct PartyGate {
    pub controls: Vec<usize>,
    pub target: usize,
    pub branches: Vec<CMat>,
}

impl PartyGate {
    pub fn to_gate(&self) -> GateRecord {
        GateRecord::Controlled(ControlledGate {
            controls: self.controls.clone(),
            targets: vec![self.target],
            branches: self.branches.clone(),
        })
    }

    fn is_identity(&self, eps: f64) -> bool {
        self.branches.iter().all(|b| is_identity(b, eps))
    }
}

#[derive(Debug, Clone)]
pub struct MultipartiteSandwichResult {
    pub circuit: Circuit,
    pub bound: usize,
    /// Gate count before identity gates were stripped.
    pub raw_count: usize,
    /// Controlling sets of the unstripped schedule, in product order.
    pub patterns: Vec<Vec<usize>>,
}

/// `2·∏_{j<n}(2d_j − 2) − 1`, the last party excluded.
pub fn multiparty_bound(dims: &[usize]) -> usize {
    let n = dims.len();
    if n < 2 {
        return 1;
    }
    2 * dims[..n - 1].iter().map(|&d| 2 * d - 2).product::<usize>() - 1
}

/// `4(d_A d_B − 1)(2d_A + 2d_C − 5) − 4d_A + 5`.
pub fn four_party_bound(dims: &[usize; 4]) -> usize {
    let [da, db, dc, _] = *dims;
    4 * (da * db - 1) * (2 * da + 2 * dc - 5) + 5 - 4 * da
}

/// Merges a family of gates (one per outer control value) that share a
/// controlling set into a single gate additionally controlled by `outer`.
fn merge_family(outer: &[usize], family: &[PartyGate], dims: &[usize]) -> PartyGate {
    let proto = &family[0];
    let mut controls: Vec<usize> = outer.iter().chain(&proto.controls).copied().collect();
    controls.sort_unstable();
    let total: usize = controls.iter().map(|&p| dims[p]).product();
    let mut branches = Vec::with_capacity(total);
    let mut digits = vec![0usize; dims.len()];
    for idx in 0..total {
        let mut r = idx;
        for &p in controls.iter().rev() {
            digits[p] = r % dims[p];
            r /= dims[p];
        }
        let oi = outer.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
        let ii = proto.controls.iter().fold(0, |acc, &p| acc * dims[p] + digits[p]);
        branches.push(family[oi].branches[ii].clone());
    }
    PartyGate { controls, target: proto.target, branches }
}

/// Expands one bipartite layer on the cut `left | right` into gates on the
/// parties, using `split_left` / `split_right` to decompose the branches.
fn expand_layer(
    layer: &Layer,
    left: &[usize],
    right: &[usize],
    dims: &[usize],
    split_left: &dyn Fn(&CMat) -> Result<Vec<PartyGate>>,
    split_right: &dyn Fn(&CMat) -> Result<Vec<PartyGate>>,
) -> Result<Vec<PartyGate>> {
    let (outer, split) = match layer.side {
        Side::A => (left, split_right),
        Side::B => (right, split_left),
    };
    let subs: Vec<Vec<PartyGate>> = layer.branches.iter().map(split).collect::<Result<_>>()?;
    let len = subs[0].len();
    if subs.iter().any(|s| s.len() != len) {
        return Err(SynthError::Infeasible("branch schedules have different lengths".into()));
    }
    (0..len)
        .map(|t| {
            let family: Vec<PartyGate> = subs.iter().map(|s| s[t].clone()).collect();
            if family.iter().any(|g| g.controls != family[0].controls || g.target != family[0].target) {
                return Err(SynthError::Infeasible("branch schedules use different controlling sets".into()));
            }
            Ok(merge_family(outer, &family, dims))
        })
        .collect()
}

fn single_party(u: &CMat, party: usize) -> Result<Vec<PartyGate>> {
    Ok(vec![PartyGate { controls: vec![], target: party, branches: vec![u.clone()] }])
}

/// Gates on parties `first..first+len` of `dims`, cutting the first party
/// from the rest at every level.
fn first_cut_rec(u: &CMat, dims: &[usize], first: usize, len: usize) -> Result<Vec<PartyGate>> {
    if len == 1 {
        return single_party(u, first);
    }
    let d1 = dims[first];
    let rest: usize = dims[first + 1..first + len].iter().product();
    let layers = sandwich_layers(u, d1, rest)?;
    let left = [first];
    let right: Vec<usize> = (first + 1..first + len).collect();
    let split_left = |m: &CMat| single_party(m, first);
    let split_right = |m: &CMat| first_cut_rec(m, dims, first + 1, len - 1);
    let mut out = Vec::new();
    for l in &layers {
        out.extend(expand_layer(l, &left, &right, dims, &split_left, &split_right)?);
    }
    Ok(out)
}

fn finish(u: &UnitaryMatrix, gates: Vec<PartyGate>, bound: usize) -> Result<MultipartiteSandwichResult> {
    let raw_count = gates.len();
    let patterns = gates.iter().map(|g| g.controls.clone()).collect();
    if raw_count > bound {
        return Err(SynthError::Infeasible(format!("{raw_count} gates exceed the bound {bound}")));
    }
    let kept: Vec<GateRecord> = gates.iter().filter(|g| !g.is_identity(STRIP_EPS)).map(|g| g.to_gate()).collect();
    let circuit = Circuit::from_gates(PartySpace::from_dims(&u.dims)?, kept).with_bound(KIND_CONTROLLED, bound);
    let got = apply_circuit(&circuit)?;
    let err = max_abs_diff(&got, &u.matrix);
    let tol = 1e-8 * (u.total() as f64).sqrt();
    if err > tol {
        return Err(SynthError::Infeasible(format!("reconstruction error {err:.3e} exceeds {tol:.3e}")));
    }
    Ok(MultipartiteSandwichResult { circuit, bound, raw_count, patterns })
}

/// Generalized sandwich form with at most [`multiparty_bound`] gates.
pub fn decompose_multiparty(u: &UnitaryMatrix) -> Result<MultipartiteSandwichResult> {
    let n = u.dims.len();
    if n < 2 {
        return Err(SynthError::dim("need at least two parties"));
    }
    require_unitary(&u.matrix, INPUT_UNITARY_TOL)?;
    let gates = first_cut_rec(&u.matrix, &u.dims, 0, n)?;
    finish(u, gates, multiparty_bound(&u.dims))
}

/// Four-party form cutting `AB | CD` first, then `C | D` and `A | B`.
pub fn decompose_4party(u: &UnitaryMatrix) -> Result<MultipartiteSandwichResult> {
    let dims: [usize; 4] = u
        .dims
        .clone()
        .try_into()
        .map_err(|_| SynthError::dim(format!("expected four parties, got {}", u.dims.len())))?;
    require_unitary(&u.matrix, INPUT_UNITARY_TOL)?;
    let [da, db, dc, dd] = dims;
    let layers = sandwich_layers(&u.matrix, da * db, dc * dd)?;
    let pair = |m: &CMat, p: usize| -> Result<Vec<PartyGate>> {
        let inner = sandwich_layers(m, dims[p], dims[p + 1])?;
        let mut out = Vec::new();
        for l in &inner {
            let s0 = |x: &CMat| single_party(x, p);
            let s1 = |x: &CMat| single_party(x, p + 1);
            out.extend(expand_layer(l, &[p], &[p + 1], &dims, &s0, &s1)?);
        }
        Ok(out)
    };
    let split_ab = |m: &CMat| pair(m, 0);
    let split_cd = |m: &CMat| pair(m, 2);
    let mut gates = Vec::new();
    for l in &layers {
        gates.extend(expand_layer(l, &[0, 1], &[2, 3], &dims, &split_ab, &split_cd)?);
    }
    finish(u, gates, four_party_bound(&dims))
}
