//! Compilation of controlled and sandwich forms into two-level standard gates
//! (Schmidt rank ≤ 2 on a `2 × 2` subspace) interspersed with local gates.

use crate::error::{Result, SynthError};
use crate::gateir::{
    apply_circuit, Circuit, ControlledGate, GateRecord, LocalGate, PartySpace, TwoLevelGate, UnitaryMatrix,
    KIND_TWO_LEVEL,
};
use crate::matcore::{c, diag, is_identity, max_abs_diff, perm_matrix, unitary_eigen, CMat, C64};
use crate::permdecomp::{decompose_perm3, ComplexPermutation};
use crate::sandwich::{decompose_sandwich, off_block_max};

/// Entries closer than this to the identity are treated as trivial.
pub const SKIP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetFormula {
    General,
    ControlledA,
    ComplexPerm,
    PermCnot,
}

impl BudgetFormula {
    pub fn id(self) -> &'static str {
        match self {
            BudgetFormula::General => "general",
            BudgetFormula::ControlledA => "controlledA",
            BudgetFormula::ComplexPerm => "complexPerm",
            BudgetFormula::PermCnot => "permCNOT",
        }
    }

    pub fn evaluate(self, da: usize, db: usize) -> usize {
        let (a1, b1) = (da.saturating_sub(1), db.saturating_sub(1));
        match self {
            BudgetFormula::General => 2 * a1 * a1 * (db / 2) + (2 * da).saturating_sub(3) * b1 * (da / 2),
            BudgetFormula::ControlledA => a1 * (db / 2),
            BudgetFormula::ComplexPerm => 2 * a1 * (db / 2) + b1 * (da / 2),
            BudgetFormula::PermCnot => 3 * a1 * b1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardGateBudget {
    pub formula: BudgetFormula,
    pub bound: usize,
}

impl StandardGateBudget {
    pub fn new(formula: BudgetFormula, da: usize, db: usize) -> Self {
        StandardGateBudget { formula, bound: formula.evaluate(da, db) }
    }
}

#[derive(Debug, Clone)]
pub struct StandardResult {
    pub circuit: Circuit,
    pub budget: StandardGateBudget,
}

impl StandardResult {
    pub fn standard_count(&self) -> usize {
        self.circuit.metrics.count(KIND_TWO_LEVEL)
    }
}

fn local(wire: usize, m: CMat) -> GateRecord {
    GateRecord::Local(LocalGate { wires: vec![wire], matrix: m })
}

/// Multiplies adjacent local gates on the same wire and drops identities.
fn merge_locals(gates: Vec<GateRecord>) -> Vec<GateRecord> {
    let mut out: Vec<GateRecord> = Vec::with_capacity(gates.len());
    for g in gates {
        if let (Some(GateRecord::Local(prev)), GateRecord::Local(cur)) = (out.last_mut(), &g) {
            if prev.wires == cur.wires {
                prev.matrix = &prev.matrix * &cur.matrix;
                continue;
            }
        }
        out.push(g);
    }
    out.retain(|g| !matches!(g, GateRecord::Local(l) if is_identity(&l.matrix, SKIP_EPS)));
    out
}

/// Standard gates and locals for `Σ_k |k><k|_ctrl ⊗ branches[k]` with the
/// control on wire `ctrl` (dimension `branches.len()`) and the target on
/// wire `tgt`. Uses at most `(d_c − 1)⌊d_t/2⌋` standard gates.
fn compile_branches(ctrl: usize, tgt: usize, branches: &[CMat]) -> Result<Vec<GateRecord>> {
    let dc = branches.len();
    let dt = branches[0].nrows();
    let last = &branches[dc - 1];
    let mut gates = Vec::new();
    let mut ctrl_phase = vec![c(1.0, 0.0); dc];
    let mut blocks = Vec::new();
    for (k, bk) in branches[..dc - 1].iter().enumerate() {
        let w = bk * last.adjoint();
        if is_identity(&w, SKIP_EPS) {
            continue;
        }
        let (q, lam) = unitary_eigen(&w)?;
        let norm = lam[dt - 1];
        ctrl_phase[k] = norm;
        let x: Vec<C64> = lam.iter().map(|&l| l / norm).collect();
        blocks.push(local(tgt, q.clone()));
        for r in 0..dt / 2 {
            let (x0, x1) = (x[2 * r], x[2 * r + 1]);
            if (x0 - c(1.0, 0.0)).norm() <= SKIP_EPS && (x1 - c(1.0, 0.0)).norm() <= SKIP_EPS {
                continue;
            }
            let one = c(1.0, 0.0);
            blocks.push(GateRecord::TwoLevel(TwoLevelGate {
                wires: [ctrl, tgt],
                levels: [[k, dc - 1], [2 * r, 2 * r + 1]],
                matrix: diag(&[x0, x1, one, one]),
            }));
        }
        blocks.push(local(tgt, q.adjoint()));
    }
    gates.push(local(ctrl, diag(&ctrl_phase)));
    gates.extend(blocks);
    gates.push(local(tgt, last.clone()));
    Ok(merge_locals(gates))
}

fn controlled_gate_to_standard(g: &ControlledGate) -> Result<Vec<GateRecord>> {
    if g.controls.len() != 1 || g.targets.len() != 1 {
        return Err(SynthError::pre("standard-gate compilation needs a single control and a single target"));
    }
    compile_branches(g.controls[0], g.targets[0], &g.branches)
}

fn check(u: &CMat, circuit: &Circuit, tol: f64) -> Result<()> {
    let err = max_abs_diff(&apply_circuit(circuit)?, u);
    if err > tol {
        return Err(SynthError::Infeasible(format!("standard-gate reconstruction error {err:.3e} exceeds {tol:.1e}")));
    }
    Ok(())
}

fn bipartite(u: &UnitaryMatrix) -> Result<(usize, usize)> {
    match u.dims.as_slice() {
        [da, db] => Ok((*da, *db)),
        d => Err(SynthError::dim(format!("expected a bipartite unitary, got dims {d:?}"))),
    }
}

/// Compiles a unitary controlled in A's computational basis.
pub fn compile_controlled_to_standard(u: &UnitaryMatrix) -> Result<StandardResult> {
    let (da, db) = bipartite(u)?;
    if off_block_max(&u.matrix, &vec![db; da]) > 1e-9 {
        return Err(SynthError::pre("unitary is not controlled in the computational basis of A"));
    }
    let branches: Vec<CMat> = (0..da).map(|k| u.matrix.view((k * db, k * db), (db, db)).into_owned()).collect();
    let gates = compile_branches(0, 1, &branches)?;
    let budget = StandardGateBudget::new(BudgetFormula::ControlledA, da, db);
    let circuit = Circuit::from_gates(PartySpace::bipartite(da, db), gates).with_bound(KIND_TWO_LEVEL, budget.bound);
    check(&u.matrix, &circuit, 1e-8)?;
    Ok(StandardResult { circuit, budget })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StdMode {
    General,
    ComplexPerm,
}

pub fn compile_to_standard(u: &UnitaryMatrix, mode: StdMode) -> Result<StandardResult> {
    let (da, db) = bipartite(u)?;
    let (controlled, formula) = match mode {
        StdMode::General => (decompose_sandwich(u)?.circuit.gates, BudgetFormula::General),
        StdMode::ComplexPerm => {
            let p = ComplexPermutation::from_matrix(&u.matrix, vec![da, db])
                .map_err(|_| SynthError::pre("complexPerm mode needs a complex permutation"))?;
            (decompose_perm3(&p)?.gates(), BudgetFormula::ComplexPerm)
        }
    };
    let mut gates = Vec::new();
    for g in &controlled {
        match g {
            GateRecord::Controlled(cg) => gates.extend(controlled_gate_to_standard(cg)?),
            other => gates.push(other.clone()),
        }
    }
    let budget = StandardGateBudget::new(formula, da, db);
    let circuit = Circuit::from_gates(PartySpace::bipartite(da, db), merge_locals(gates))
        .with_bound(KIND_TWO_LEVEL, budget.bound);
    check(&u.matrix, &circuit, 1e-8)?;
    Ok(StandardResult { circuit, budget })
}

/// Picks the complex-permutation route when the input is one.
pub fn compile_to_standard_auto(u: &UnitaryMatrix) -> Result<StandardResult> {
    let (da, db) = bipartite(u)?;
    if ComplexPermutation::from_matrix(&u.matrix, vec![da, db]).is_ok() {
        let perm = compile_to_standard(u, StdMode::ComplexPerm)?;
        let general = compile_to_standard(u, StdMode::General)?;
        return Ok(if general.standard_count() < perm.standard_count() { general } else { perm });
    }
    compile_to_standard(u, StdMode::General)
}

/// Transpositions `(x, y)` whose product, leftmost outermost, equals `p`.
/// Cycles are taken by smallest element, `(c₁…c_m) = (c₁c₂)(c₂c₃)…`.
pub fn transpositions(p: &[usize]) -> Vec<(usize, usize)> {
    let mut seen = vec![false; p.len()];
    let mut out = Vec::new();
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut cyc = vec![start];
        seen[start] = true;
        let mut x = p[start];
        while x != start {
            seen[x] = true;
            cyc.push(x);
            x = p[x];
        }
        out.extend(cyc.windows(2).map(|w| (w[0], w[1])));
    }
    out
}

fn transposition_matrix(d: usize, x: usize, y: usize) -> CMat {
    let mut t: Vec<usize> = (0..d).collect();
    t.swap(x, y);
    perm_matrix(&t)
}

fn cnot_part() -> CMat {
    perm_matrix(&[0, 1, 3, 2])
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

/// One controlled-permutation stage (control on `ctrl`) as a local
/// normalization by branch 0 followed by controlled transpositions.
fn perm_stage(ctrl: usize, tgt: usize, branches: &[Vec<usize>], dc: usize) -> (Vec<GateRecord>, usize) {
    let dt = branches[0].len();
    let p0_inv = invert(&branches[0]);
    let mut gates = Vec::new();
    for (j, pj) in branches.iter().enumerate().skip(1) {
        let q: Vec<usize> = p0_inv.iter().map(|&i| pj[i]).collect();
        for (s, t) in transpositions(&q) {
            gates.push(GateRecord::TwoLevel(TwoLevelGate {
                wires: [ctrl, tgt],
                levels: [[0, j], [s.min(t), s.max(t)]],
                matrix: cnot_part(),
            }));
        }
    }
    debug_assert!(dc == branches.len());
    let locals = transpositions(&branches[0]);
    let n_local = locals.len();
    gates.extend(locals.into_iter().map(|(s, t)| local(tgt, transposition_matrix(dt, s, t))));
    (gates, n_local)
}

#[derive(Debug, Clone)]
pub struct CnotTypeResult {
    pub circuit: Circuit,
    pub cnot_bound: usize,
    /// `3 d_A d_B − d_A − d_B − 1`, counting local transpositions as well.
    pub combined_bound: usize,
    pub local_transpositions: usize,
}

impl CnotTypeResult {
    pub fn standard_count(&self) -> usize {
        self.circuit.metrics.count(KIND_TWO_LEVEL)
    }
}

/// Permutation unitary as CNOT-type standard gates and local transpositions.
pub fn compile_perm_to_cnot_type(u: &UnitaryMatrix) -> Result<CnotTypeResult> {
    let (da, db) = bipartite(u)?;
    let p = ComplexPermutation::from_matrix(&u.matrix, vec![da, db])
        .map_err(|_| SynthError::pre("input is not a permutation unitary"))?;
    if !p.is_plain() {
        return Err(SynthError::pre("permutation has nontrivial phases"));
    }
    let r = decompose_perm3(&p)?;
    let mut gates = Vec::new();
    let mut n_local = 0;
    for (ctrl, tgt, br, dc) in [(0, 1, &r.g1, da), (1, 0, &r.g2, db), (0, 1, &r.g3, da)] {
        let (g, l) = perm_stage(ctrl, tgt, br, dc);
        gates.extend(g);
        n_local += l;
    }
    let cnot_bound = BudgetFormula::PermCnot.evaluate(da, db);
    let circuit = Circuit::from_gates(PartySpace::bipartite(da, db), gates).with_bound(KIND_TWO_LEVEL, cnot_bound);
    let got = apply_circuit(&circuit)?;
    if got != u.matrix {
        return Err(SynthError::Infeasible("CNOT-type compilation is not exact".into()));
    }
    Ok(CnotTypeResult { circuit, cnot_bound, combined_bound: 3 * da * db - da - db - 1, local_transpositions: n_local })
}
