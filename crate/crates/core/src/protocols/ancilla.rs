//! Ancilla-assisted circuits: two-term controlled gates from two CNOTs, the
//! permutation protocol with a backup flag qubit, the XOR-factorization
//! protocol, and the state-transfer circuit.

use crate::error::{Result, SynthError};
use crate::gateir::{
    basis_action, Circuit, CnotGate, ControlledGate, GateRecord, LocalGate, PartySpace, UnitaryMatrix, KIND_CONTROLLED,
};
use crate::matcore::{c, direct_sum, identity, kron, max_abs_diff, perm_matrix, require_unitary, zeros, CMat};
use crate::permdecomp::ComplexPermutation;

use super::ppr::{pp_expansion, BipartiteMap, PartialPermExpansion, PpTerm};
use super::rank::{xor_rank, BinaryMatrix, Factor};

const BRANCH_EQ: f64 = 1e-12;

fn pauli_x() -> CMat {
    perm_matrix(&[1, 0])
}

fn cnot(control: usize, target: usize) -> GateRecord {
    GateRecord::Cnot(CnotGate { control, control_levels: [0, 1], target, target_levels: [0, 1] })
}

/// Rewrites a controlled gate with at most two distinct branches as
/// `V · CNOT · W · CNOT · V`, where `V` marks the second branch on `anc_ctrl`
/// and `W` applies the branch selected by `anc_tgt`. Both ancillas start and
/// end in `|0>`.
pub fn expand_two_term(g: &ControlledGate, anc_ctrl: usize, anc_tgt: usize) -> Result<Vec<GateRecord>> {
    let v1 = &g.branches[0];
    let v2 = g.branches.iter().find(|b| max_abs_diff(b, v1) > BRANCH_EQ).unwrap_or(v1);
    let x = pauli_x();
    let i2 = identity(2);
    let mut blocks = Vec::with_capacity(g.branches.len());
    for b in &g.branches {
        if max_abs_diff(b, v1) <= BRANCH_EQ {
            blocks.push(i2.clone());
        } else if max_abs_diff(b, v2) <= BRANCH_EQ {
            blocks.push(x.clone());
        } else {
            return Err(SynthError::pre("gate has more than two distinct branches"));
        }
    }
    let mut mark_wires = g.controls.clone();
    mark_wires.push(anc_ctrl);
    let mark = GateRecord::Local(LocalGate { wires: mark_wires, matrix: direct_sum(&blocks) });
    let mut sel_wires = vec![anc_tgt];
    sel_wires.extend(&g.targets);
    let select = GateRecord::Local(LocalGate { wires: sel_wires, matrix: direct_sum(&[v1.clone(), v2.clone()]) });
    Ok(vec![mark.clone(), cnot(anc_ctrl, anc_tgt), select, cnot(anc_ctrl, anc_tgt), mark])
}

fn check_projector(p: &CMat) -> Result<()> {
    if !p.is_square() {
        return Err(SynthError::dim("projector must be square"));
    }
    let n = p.nrows();
    let herm = max_abs_diff(p, &p.adjoint());
    let idem = max_abs_diff(&(p * p), p);
    if herm > 1e-10 || idem > 1e-10 {
        return Err(SynthError::pre("P1 is not an orthogonal projector"));
    }
    let tr = p.trace().re;
    if tr < 0.5 || tr > n as f64 - 0.5 {
        return Err(SynthError::pre("both projectors P1 and P2 = I - P1 must be nonzero"));
    }
    Ok(())
}

/// `P1 ⊗ V1 + (I − P1) ⊗ V2`.
pub fn two_term_unitary(p1: &CMat, v1: &CMat, v2: &CMat) -> CMat {
    let p2 = identity(p1.nrows()) - p1;
    kron(p1, v1) + kron(&p2, v2)
}

/// Two-CNOT circuit for `P1 ⊗ V1 + P2 ⊗ V2` on parties A, B with ancilla
/// qubits `a` (at A) and `b` (at B).
pub fn emit_two_term_cnot(p1: &CMat, v1: &CMat, v2: &CMat) -> Result<Circuit> {
    check_projector(p1)?;
    if v1.shape() != v2.shape() || !v1.is_square() {
        return Err(SynthError::dim("V1 and V2 must be square of equal size"));
    }
    require_unitary(v1, 1e-9)?;
    require_unitary(v2, 1e-9)?;
    let (da, db) = (p1.nrows(), v1.nrows());
    let mut space = PartySpace::bipartite(da, db);
    let a = space.add_ancilla("a", "A", 2, 0)?;
    let b = space.add_ancilla("b", "B", 2, 0)?;
    let p2 = identity(da) - p1;
    let mark =
        GateRecord::Local(LocalGate { wires: vec![0, a], matrix: kron(p1, &identity(2)) + kron(&p2, &pauli_x()) });
    let select = GateRecord::Local(LocalGate { wires: vec![b, 1], matrix: direct_sum(&[v1.clone(), v2.clone()]) });
    let gates = vec![mark.clone(), cnot(a, b), select, cnot(a, b), mark];
    Ok(Circuit::from_gates(space, gates).with_bound("nonlocal_cnots", 2))
}

/// Controlled permutation: `branches[t]` permutes the target tuple when the
/// controls are in tuple `t`.
#[derive(Debug, Clone)]
struct PermStep {
    controls: Vec<usize>,
    targets: Vec<usize>,
    branches: Vec<Vec<usize>>,
    a_controlled: bool,
}

impl PermStep {
    fn distinct(&self) -> Vec<&Vec<usize>> {
        let mut d: Vec<&Vec<usize>> = Vec::new();
        for b in &self.branches {
            if !d.contains(&b) {
                d.push(b);
            }
        }
        d
    }

    fn is_identity(&self) -> bool {
        self.branches.iter().all(|b| b.iter().enumerate().all(|(i, &x)| i == x))
    }
}

fn identity_perm(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Result of the permutation protocol.
#[derive(Debug, Clone)]
pub struct PermProtocol {
    pub expansion: PartialPermExpansion,
    /// Two-term controlled permutations and local gates, with the flag qubit
    /// `c` when `backup` is set.
    pub compact: Circuit,
    /// The same with each two-term gate replaced by two CNOTs and ancillas.
    pub expanded: Circuit,
    /// Whether the flag qubit was needed (some term is not in place).
    pub backup: bool,
    pub two_term_gates: usize,
}

fn direct_steps(terms: &[PpTerm], da: usize, db: usize) -> Vec<PermStep> {
    let mut steps = Vec::new();
    for t in terms {
        let (rows, cols) = (t.rows_in(), t.cols_in());
        let mut bbar = identity_perm(db);
        for &(o, i) in &t.b {
            bbar[i] = o;
        }
        let mut abar = identity_perm(da);
        for &(o, i) in &t.a {
            abar[i] = o;
        }
        let a_branches = (0..da).map(|a| if rows.contains(&a) { bbar.clone() } else { identity_perm(db) }).collect();
        steps.push(PermStep { controls: vec![0], targets: vec![1], branches: a_branches, a_controlled: true });
        let b_branches = (0..db).map(|b| if cols.contains(&b) { abar.clone() } else { identity_perm(da) }).collect();
        steps.push(PermStep { controls: vec![1], targets: vec![0], branches: b_branches, a_controlled: false });
    }
    steps
}

fn backup_steps(terms: &[PpTerm], da: usize, db: usize, cw: usize) -> Vec<PermStep> {
    let mut steps = Vec::new();
    let move_cols = |t: &PpTerm, rows: &std::collections::BTreeSet<usize>| {
        let mut sigma = identity_perm(db * 2);
        for &(bo, bi) in &t.b {
            sigma[bi * 2] = bo * 2 + 1;
            sigma[bo * 2 + 1] = bi * 2;
        }
        let branches = (0..da).map(|a| if rows.contains(&a) { sigma.clone() } else { identity_perm(db * 2) }).collect();
        PermStep { controls: vec![0], targets: vec![1, cw], branches, a_controlled: true }
    };
    for t in terms {
        let (r_in, r_out, c_out) = (t.rows_in(), t.rows_out(), t.cols_out());
        steps.push(move_cols(t, &r_in));
        let mut pi = identity_perm(da);
        for &(o, i) in &t.a {
            pi[i] = o;
        }
        for (from, to) in r_out.difference(&r_in).zip(r_in.difference(&r_out)) {
            pi[*from] = *to;
        }
        let branches = (0..db * 2)
            .map(|k| if k % 2 == 1 && c_out.contains(&(k / 2)) { pi.clone() } else { identity_perm(da) })
            .collect();
        steps.push(PermStep { controls: vec![1, cw], targets: vec![0], branches, a_controlled: false });
        let leftover: std::collections::BTreeSet<usize> = r_in.difference(&r_out).copied().collect();
        if !leftover.is_empty() {
            steps.push(move_cols(t, &leftover));
        }
    }
    // Every finished entry carries c = 1; fold the closing X_c into the last
    // A-controlled step, conjugating the later steps.
    let flip = |k: usize| k ^ 1;
    let last_a = steps.iter().rposition(|s| s.a_controlled).expect("each term starts with an A-controlled step");
    for s in steps.iter_mut().skip(last_a + 1) {
        s.branches = (0..db * 2).map(|k| s.branches[flip(k)].clone()).collect();
    }
    for br in steps[last_a].branches.iter_mut() {
        *br = br.iter().map(|&x| flip(x)).collect();
    }
    steps
}

/// Permutation protocol driven by a partial-permutation expansion. In-place
/// expansions use at most two controlled permutations per term; otherwise
/// a flag qubit `c` at B keeps a backup copy of displaced entries and each
/// term costs at most three gates.
pub fn emit_lemma7_protocol(u: &ComplexPermutation, expansion: &PartialPermExpansion) -> Result<PermProtocol> {
    let map = BipartiteMap::from_permutation(u)?;
    if expansion.da != map.da || expansion.db != map.db || !expansion.reproduces(&map) {
        return Err(SynthError::pre("expansion does not reproduce the permutation"));
    }
    let (da, db) = (map.da, map.db);
    let backup = !expansion.terms.iter().all(|t| t.is_in_place());
    let mut space = PartySpace::bipartite(da, db);
    let cw = if backup { Some(space.add_ancilla("c", "B", 2, 0)?) } else { None };
    let steps = match cw {
        Some(cw) => backup_steps(&expansion.terms, da, db, cw),
        None => direct_steps(&expansion.terms, da, db),
    };
    let compact_space = space.clone();
    let a_anc = space.add_ancilla("a", "A", 2, 0)?;
    let b_anc = space.add_ancilla("b", "B", 2, 0)?;
    let mut compact = Vec::new();
    let mut expanded = Vec::new();
    let mut two_term = 0;
    // `steps` is in application order; circuits list the last-applied first.
    for s in steps.iter().rev() {
        if s.is_identity() {
            continue;
        }
        let distinct = s.distinct();
        if distinct.len() == 1 {
            let g = GateRecord::Local(LocalGate { wires: s.targets.clone(), matrix: perm_matrix(distinct[0]) });
            compact.push(g.clone());
            expanded.push(g);
            continue;
        }
        debug_assert_eq!(distinct.len(), 2);
        two_term += 1;
        let cg = ControlledGate {
            controls: s.controls.clone(),
            targets: s.targets.clone(),
            branches: s.branches.iter().map(|b| perm_matrix(b)).collect(),
        };
        let (ac, at) = if s.a_controlled { (a_anc, b_anc) } else { (b_anc, a_anc) };
        expanded.extend(expand_two_term(&cg, ac, at)?);
        compact.push(GateRecord::Controlled(cg));
    }
    let q = expansion.q();
    let mut compact = Circuit::from_gates(compact_space, compact).with_bound(KIND_CONTROLLED, 3 * q);
    compact.metrics.ebits = Some(two_term);
    let mut expanded = Circuit::from_gates(space, expanded).with_bound("nonlocal_cnots", 6 * q);
    expanded.metrics.ebits = Some(two_term);
    for circ in [&compact, &expanded] {
        check_exact(circ, &map)?;
    }
    Ok(PermProtocol { expansion: expansion.clone(), compact, expanded, backup, two_term_gates: two_term })
}

/// Expands `u` with [`pp_expansion`] and runs the protocol.
pub fn lemma7_auto(u: &ComplexPermutation) -> Result<PermProtocol> {
    let e = pp_expansion(u)?;
    emit_lemma7_protocol(u, &e)
}

/// Exact check on basis states with all ancillas at their initial levels.
fn check_exact(circ: &Circuit, map: &BipartiteMap) -> Result<()> {
    let action = basis_action(circ)?.ok_or_else(|| SynthError::Infeasible("protocol gate is not monomial".into()))?;
    let n_anc = circ.space.ancilla_total();
    let anc_dims: Vec<usize> = circ.space.ancillas.iter().map(|a| a.dim).collect();
    let anc_idx = circ.space.ancillas.iter().zip(&anc_dims).fold(0, |acc, (a, d)| acc * d + a.init);
    for (col, target) in map.map.iter().enumerate() {
        let (hit, ph) = action[col * n_anc + anc_idx];
        let want = target.map(|t| t * n_anc + anc_idx);
        if Some(hit) != want || ph != c(1.0, 0.0) {
            return Err(SynthError::Infeasible(format!("protocol circuit disagrees on basis state {col}")));
        }
    }
    Ok(())
}

/// Recovers the pair-swap pattern of a permutation of the form
/// `Σ_i P_i ⊗ (I − C_i) + X_i ⊗ C_i`.
pub fn example1_blocks_from_permutation(p: &ComplexPermutation) -> Result<Vec<Vec<bool>>> {
    if p.dims.len() != 2 || !p.dims[0].is_multiple_of(2) || !p.is_plain() {
        return Err(SynthError::pre("expected a plain bipartite permutation with even d_A"));
    }
    let (da, db) = (p.dims[0], p.dims[1]);
    let mut blocks = vec![vec![false; db]; da / 2];
    for (i, blk) in blocks.iter_mut().enumerate() {
        for (k, slot) in blk.iter_mut().enumerate() {
            let (lo, hi) = ((2 * i) * db + k, (2 * i + 1) * db + k);
            match (p.targets[lo], p.targets[hi]) {
                (x, y) if x == lo && y == hi => {}
                (x, y) if x == hi && y == lo => *slot = true,
                _ => return Err(SynthError::pre("permutation is not a B-controlled pair swap")),
            }
        }
    }
    Ok(blocks)
}

#[derive(Debug, Clone)]
pub struct XorProtocol {
    pub t: BinaryMatrix,
    pub factors: Vec<Factor>,
    pub compact: Circuit,
    pub expanded: Circuit,
}

/// One B-controlled pair-swap gate per term of a GF(2) factorization of `T`;
/// the gates commute and their product is the pair-swap permutation of `T`.
pub fn emit_xor_protocol(t: &BinaryMatrix) -> Result<XorProtocol> {
    if t.rows == 0 || t.cols == 0 {
        return Err(SynthError::dim("T must be nonempty"));
    }
    let (da, db) = (2 * t.rows, t.cols);
    let factors = xor_rank(t).certificate;
    let compact_space = PartySpace::bipartite(da, db);
    let mut space = compact_space.clone();
    let a_anc = space.add_ancilla("a", "A", 2, 0)?;
    let b_anc = space.add_ancilla("b", "B", 2, 0)?;
    let mut compact = Vec::new();
    let mut expanded = Vec::new();
    for f in &factors {
        let mut swap = identity_perm(da);
        for i in (0..t.rows).filter(|&i| f.u[i]) {
            swap.swap(2 * i, 2 * i + 1);
        }
        let branches = (0..db).map(|b| if f.v[b] { perm_matrix(&swap) } else { identity(da) }).collect();
        let cg = ControlledGate { controls: vec![1], targets: vec![0], branches };
        expanded.extend(expand_two_term(&cg, b_anc, a_anc)?);
        compact.push(GateRecord::Controlled(cg));
    }
    let k = factors.len();
    let mut compact = Circuit::from_gates(compact_space, compact).with_bound(KIND_CONTROLLED, k);
    compact.metrics.ebits = Some(k);
    let mut expanded = Circuit::from_gates(space, expanded).with_bound("nonlocal_cnots", 2 * k);
    expanded.metrics.ebits = Some(k);
    let blocks: Vec<Vec<bool>> = (0..t.rows).map(|i| t.row(i)).collect();
    let target = ComplexPermutation::from_matrix(&crate::generators::example1_unitary(&blocks), vec![da, db])?;
    let map = BipartiteMap::from_permutation(&target)?;
    for circ in [&compact, &expanded] {
        check_exact(circ, &map)?;
    }
    Ok(XorProtocol { t: t.clone(), factors, compact, expanded })
}

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - (n.max(1) - 1).leading_zeros()) as usize
}

/// Embeds `u` on `da × db` into `ea × eb ≥ da × db`, identity on the
/// complement.
fn pad_unitary(u: &CMat, da: usize, db: usize, ea: usize, eb: usize) -> CMat {
    let n = ea * eb;
    let mut m = zeros(n, n);
    let inside = |i: usize| i / eb < da && i % eb < db;
    let logical = |i: usize| (i / eb) * db + i % eb;
    for i in 0..n {
        if !inside(i) {
            m[(i, i)] = c(1.0, 0.0);
            continue;
        }
        for j in (0..n).filter(|&j| inside(j)) {
            m[(i, j)] = u[(logical(i), logical(j))];
        }
    }
    m
}

/// Moves the smaller party, qubit by qubit, to the other site, applies `U`
/// there as one local gate and moves it back: `4⌈log₂ min(d_A, d_B)⌉` CNOTs.
pub fn emit_transfer_protocol(u: &UnitaryMatrix) -> Result<Circuit> {
    if u.dims.len() != 2 {
        return Err(SynthError::dim("transfer needs a bipartite unitary"));
    }
    require_unitary(&u.matrix, 1e-9)?;
    let (da, db) = (u.dims[0], u.dims[1]);
    let a_small = da <= db;
    let m = ceil_log2(da.min(db));
    let (small, big) = if a_small { ("A", "B") } else { ("B", "A") };
    let mut parties: Vec<(String, usize, String)> =
        (0..m).map(|k| (format!("{small}{k}"), 2, small.to_string())).collect();
    let big_party = (big.to_string(), if a_small { db } else { da }, big.to_string());
    if a_small {
        parties.push(big_party);
    } else {
        parties.insert(0, big_party);
    }
    let names: Vec<(&str, usize)> = parties.iter().map(|p| (p.0.as_str(), p.1)).collect();
    let mut space = PartySpace::new(&names)?;
    for (i, p) in parties.iter().enumerate() {
        space = space.with_site(i, &p.2);
    }
    let qubit_wires: Vec<usize> = if a_small { (0..m).collect() } else { (1..=m).collect() };
    let big_wire = if a_small { m } else { 0 };
    let mut anc = Vec::with_capacity(m);
    for k in 0..m {
        anc.push(space.add_ancilla(&format!("t{k}"), big, 2, 0)?);
    }
    let e = 1usize << m;
    let (mut local_wires, padded) = if a_small {
        (anc.clone(), pad_unitary(&u.matrix, da, db, e.max(1), db))
    } else {
        (vec![big_wire], pad_unitary(&u.matrix, da, db, da, e.max(1)))
    };
    if a_small {
        local_wires.push(big_wire);
    } else {
        local_wires.extend(&anc);
    }
    let mut applied = Vec::new();
    for k in 0..m {
        applied.push(cnot(qubit_wires[k], anc[k]));
        applied.push(cnot(anc[k], qubit_wires[k]));
    }
    applied.push(GateRecord::Local(LocalGate { wires: local_wires, matrix: padded }));
    for k in (0..m).rev() {
        applied.push(cnot(anc[k], qubit_wires[k]));
        applied.push(cnot(qubit_wires[k], anc[k]));
    }
    applied.reverse();
    let mut circ = Circuit::from_gates(space, applied).with_bound("nonlocal_cnots", 4 * m);
    circ.embedding = Some(if a_small { vec![(0..m).collect(), vec![m]] } else { vec![vec![0], (1..=m).collect()] });
    Ok(circ)
}
