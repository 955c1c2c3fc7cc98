//! Decompositions of (complex) permutation unitaries.
//!
//! A permutation `p` is stored as its image table: `P|i> = |p[i]>`. Composing
//! tables follows the matrix product, so `P·Q` is the table `i ↦ p[q[i]]`.

use crate::error::{Result, SynthError};
use crate::gateir::{Circuit, ControlledGate, GateRecord, PartySpace, KIND_CONTROLLED};
use crate::matcore::{c, zeros, CMat, C64};

/// Unitary with exactly one unit-modulus entry per row and column:
/// `U|i> = phases[i] |targets[i]>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPermutation {
    pub dims: Vec<usize>,
    pub targets: Vec<usize>,
    pub phases: Vec<C64>,
}

/// Entries within this distance of 0 or of the unit circle are snapped.
pub const SNAP_TOL: f64 = 1e-12;

impl ComplexPermutation {
    pub fn plain(dims: Vec<usize>, targets: Vec<usize>) -> Result<Self> {
        let n = targets.len();
        let p = ComplexPermutation { dims, targets, phases: vec![c(1.0, 0.0); n] };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phases(dims: Vec<usize>, targets: Vec<usize>, phases: Vec<C64>) -> Result<Self> {
        let p = ComplexPermutation { dims, targets, phases };
        p.validate()?;
        Ok(p)
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        ComplexPermutation { dims, targets: (0..n).collect(), phases: vec![c(1.0, 0.0); n] }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n: usize = self.dims.iter().product();
        if self.targets.len() != n || self.phases.len() != n {
            return Err(SynthError::dim(format!(
                "permutation of length {} does not match dims {:?}",
                self.targets.len(),
                self.dims
            )));
        }
        let mut seen = vec![false; n];
        for &t in &self.targets {
            if t >= n || seen[t] {
                return Err(SynthError::pre("targets are not a bijection"));
            }
            seen[t] = true;
        }
        if self.phases.iter().any(|p| (p.norm() - 1.0).abs() > SNAP_TOL) {
            return Err(SynthError::pre("phases must have unit modulus"));
        }
        Ok(())
    }

    pub fn is_plain(&self) -> bool {
        self.phases.iter().all(|&p| p == c(1.0, 0.0))
    }

    /// Reads a complex permutation from a dense matrix, snapping entries
    /// within [`SNAP_TOL`] of 0 or of modulus 1.
    pub fn from_matrix(m: &CMat, dims: Vec<usize>) -> Result<Self> {
        let n = m.nrows();
        if !m.is_square() || dims.iter().product::<usize>() != n {
            return Err(SynthError::dim(format!("matrix shape {:?} does not match dims {dims:?}", m.shape())));
        }
        let mut targets = vec![0; n];
        let mut phases = vec![c(1.0, 0.0); n];
        for j in 0..n {
            let mut found = None;
            for i in 0..n {
                let v = m[(i, j)];
                if v.norm() <= SNAP_TOL {
                    continue;
                }
                if (v.norm() - 1.0).abs() > SNAP_TOL || found.is_some() {
                    return Err(SynthError::pre(format!("column {j} is not a complex permutation column")));
                }
                found = Some((i, v));
            }
            let (i, v) = found.ok_or_else(|| SynthError::pre(format!("column {j} is zero")))?;
            targets[j] = i;
            let snapped = if (v - c(1.0, 0.0)).norm() <= SNAP_TOL { c(1.0, 0.0) } else { v / v.norm() };
            phases[j] = snapped;
        }
        ComplexPermutation::with_phases(dims, targets, phases)
    }

    pub fn matrix(&self) -> CMat {
        let n = self.len();
        let mut m = zeros(n, n);
        for (j, (&t, &p)) in self.targets.iter().zip(&self.phases).enumerate() {
            m[(t, j)] = p;
        }
        m
    }

    /// `self · other`.
    pub fn compose(&self, other: &ComplexPermutation) -> ComplexPermutation {
        let targets = other.targets.iter().map(|&t| self.targets[t]).collect();
        let phases = other.targets.iter().zip(&other.phases).map(|(&t, &p)| self.phases[t] * p).collect();
        ComplexPermutation { dims: other.dims.clone(), targets, phases }
    }
}

/// `true` at `(j, k)` when block `(j, k)` (rows of A-level `j`, columns of
/// A-level `k`) contains a nonzero entry.
pub type BlockPattern = Vec<Vec<bool>>;

pub fn block_pattern(p: &ComplexPermutation) -> Result<BlockPattern> {
    if p.dims.len() != 2 {
        return Err(SynthError::dim("block pattern needs a bipartite permutation"));
    }
    let (da, db) = (p.dims[0], p.dims[1]);
    let mut pat = vec![vec![false; da]; da];
    for (i, &t) in p.targets.iter().enumerate() {
        pat[t / db][i / db] = true;
    }
    Ok(pat)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdrResult {
    /// `columns[j]` is the representative chosen for row `j`.
    Sdr(Vec<usize>),
    /// Rows whose neighbourhood is smaller than the set, and the columns
    /// outside that neighbourhood; `rows.len() + cols.len() > d`.
    AbsolutelySingular { rows: Vec<usize>, cols: Vec<usize> },
}

fn try_augment(p: &BlockPattern, row: usize, banned: &[bool], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for k in 0..p.len() {
        if !p[row][k] || banned[k] || seen[k] {
            continue;
        }
        seen[k] = true;
        let free = match owner[k] {
            None => true,
            Some(r) => try_augment(p, r, banned, owner, seen),
        };
        if free {
            owner[k] = Some(row);
            return true;
        }
    }
    false
}

/// Maximum matching of `rows` into unbanned columns; returns the first row
/// that cannot be matched together with the columns visited while trying.
fn match_rows(p: &BlockPattern, rows: &[usize], banned: &[bool]) -> std::result::Result<(), (usize, Vec<bool>)> {
    let n = p.len();
    let mut owner = vec![None; n];
    for &r in rows {
        let mut seen = vec![false; n];
        if !try_augment(p, r, banned, &mut owner, &mut seen) {
            return Err((r, seen));
        }
    }
    Ok(())
}

/// Lexicographically smallest system of distinct representatives, or a
/// Hall-violating witness.
pub fn find_sdr(p: &BlockPattern) -> SdrResult {
    let n = p.len();
    assert!(p.iter().all(|r| r.len() == n), "pattern must be square");
    let all: Vec<usize> = (0..n).collect();
    if let Err((_, seen)) = match_rows(p, &all, &vec![false; n]) {
        // Rows reachable by alternating paths from the failed row all map
        // into the visited columns, which are one fewer than the rows.
        let visited_cols: Vec<usize> = (0..n).filter(|&k| seen[k]).collect();
        let mut rows: Vec<usize> = (0..n).filter(|&j| (0..n).all(|k| !p[j][k] || seen[k])).collect();
        rows.sort_unstable();
        let cols: Vec<usize> = (0..n).filter(|k| !visited_cols.contains(k)).collect();
        return SdrResult::AbsolutelySingular { rows, cols };
    }
    let mut banned = vec![false; n];
    let mut choice = Vec::with_capacity(n);
    for j in 0..n {
        let rest: Vec<usize> = (j + 1..n).collect();
        let k = (0..n)
            .find(|&k| {
                if !p[j][k] || banned[k] {
                    return false;
                }
                banned[k] = true;
                let ok = match_rows(p, &rest, &banned).is_ok();
                banned[k] = false;
                ok
            })
            .expect("a perfect matching exists");
        banned[k] = true;
        choice.push(k);
    }
    SdrResult::Sdr(choice)
}

fn transposition(n: usize, x: usize, y: usize) -> Vec<usize> {
    let mut t: Vec<usize> = (0..n).collect();
    t.swap(x, y);
    t
}

fn compose_tables(p: &[usize], q: &[usize]) -> Vec<usize> {
    q.iter().map(|&i| p[i]).collect()
}

/// Three controlled-permutation gates `G1 · G2 · G3` (A, B, A controlled).
/// The phases of the input are carried by `G3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perm3 {
    pub da: usize,
    pub db: usize,
    /// Per A-level, a permutation of B-levels.
    pub g1: Vec<Vec<usize>>,
    /// Per B-level, a permutation of A-levels.
    pub g2: Vec<Vec<usize>>,
    pub g3: Vec<Vec<usize>>,
    /// Phase of input column `a·d_B + b`, applied by `G3`.
    pub phases: Vec<C64>,
}

impl Perm3 {
    fn g3_branch(&self, a: usize) -> ComplexPermutation {
        let ph = (0..self.db).map(|b| self.phases[a * self.db + b]).collect();
        ComplexPermutation { dims: vec![self.db], targets: self.g3[a].clone(), phases: ph }
    }

    fn plain_branch(t: &[usize]) -> ComplexPermutation {
        ComplexPermutation { dims: vec![t.len()], targets: t.to_vec(), phases: vec![c(1.0, 0.0); t.len()] }
    }

    /// The three gates as complex-permutation branch lists.
    pub fn branch_perms(&self) -> [Vec<ComplexPermutation>; 3] {
        [
            self.g1.iter().map(|t| Self::plain_branch(t)).collect(),
            self.g2.iter().map(|t| Self::plain_branch(t)).collect(),
            (0..self.da).map(|a| self.g3_branch(a)).collect(),
        ]
    }

    pub fn gates(&self) -> Vec<GateRecord> {
        let [g1, g2, g3] = self.branch_perms();
        let mk = |controls: usize, targets: usize, br: Vec<ComplexPermutation>| {
            GateRecord::Controlled(ControlledGate {
                controls: vec![controls],
                targets: vec![targets],
                branches: br.iter().map(|p| p.matrix()).collect(),
            })
        };
        vec![mk(0, 1, g1), mk(1, 0, g2), mk(0, 1, g3)]
    }

    pub fn circuit(&self) -> Circuit {
        Circuit::from_gates(PartySpace::bipartite(self.da, self.db), self.gates()).with_bound(KIND_CONTROLLED, 3)
    }

    /// Exact product of the three gates.
    pub fn compose(&self) -> ComplexPermutation {
        let (da, db) = (self.da, self.db);
        let n = da * db;
        let mut targets = vec![0; n];
        let mut phases = vec![c(1.0, 0.0); n];
        for i in 0..n {
            let (a, b) = (i / db, i % db);
            let b1 = self.g3[a][b];
            let a2 = self.g2[b1][a];
            let b3 = self.g1[a2][b1];
            targets[i] = a2 * db + b3;
            phases[i] = self.phases[i];
        }
        ComplexPermutation { dims: vec![da, db], targets, phases }
    }
}

/// 3-sandwich of controlled complex permutations for a bipartite complex
/// permutation. B-levels are peeled in ascending order.
pub fn decompose_perm3(u: &ComplexPermutation) -> Result<Perm3> {
    u.validate()?;
    if u.dims.len() != 2 {
        return Err(SynthError::dim(format!("expected a bipartite permutation, got dims {:?}", u.dims)));
    }
    let (da, db) = (u.dims[0], u.dims[1]);
    let mut pi = u.targets.clone();
    let ident_b: Vec<usize> = (0..db).collect();
    let mut g1 = vec![ident_b.clone(); da];
    let mut g3 = vec![ident_b.clone(); da];
    let mut g2 = vec![(0..da).collect::<Vec<usize>>(); db];
    let mut active = vec![true; db];
    for s0 in 0..db {
        let mut pat = vec![vec![false; da]; da];
        for k in 0..da {
            for b in (0..db).filter(|&b| active[b]) {
                pat[pi[k * db + b] / db][k] = true;
            }
        }
        let sdr = match find_sdr(&pat) {
            SdrResult::Sdr(s) => s,
            SdrResult::AbsolutelySingular { .. } => unreachable!("permutation block patterns are regular"),
        };
        let mut v = vec![ident_b.clone(); da];
        let mut w = vec![ident_b.clone(); da];
        let mut x = vec![0; da];
        for (j, &kj) in sdr.iter().enumerate() {
            let (b_out, b_in) = (0..db)
                .filter(|&b| active[b])
                .filter(|&b_in| pi[kj * db + b_in] / db == j)
                .map(|b_in| (pi[kj * db + b_in] % db, b_in))
                .min()
                .expect("selected block is nonzero");
            v[j] = transposition(db, b_out, s0);
            w[kj] = transposition(db, b_in, s0);
            x[kj] = j;
        }
        let mut next = pi.clone();
        for k in 0..da {
            for b in (0..db).filter(|&b| active[b]) {
                let t = pi[k * db + w[k][b]];
                let (a2, b2) = (t / db, t % db);
                next[k * db + b] = a2 * db + v[a2][b2];
            }
        }
        for a in 0..da {
            g1[a] = compose_tables(&g1[a], &v[a]);
            g3[a] = compose_tables(&w[a], &g3[a]);
        }
        g2[s0] = x;
        active[s0] = false;
        pi = next;
    }
    let res = Perm3 { da, db, g1, g2, g3, phases: u.phases.clone() };
    if res.compose() != *u {
        return Err(SynthError::Infeasible("permutation sandwich does not reproduce the input".into()));
    }
    Ok(res)
}

/// A stage table: rows `[in_A, in_B, out_A, out_B]`.
pub type StageTable = Vec<[usize; 4]>;

/// Three classical controlled-permutation stages, listed in application order
/// (the stage acting first comes first). Stages 1 and 3 rewrite the B value
/// given A; stage 2 rewrites the A value given B.
pub fn decompose_perm3_classical(table: &[[usize; 4]], da: usize, db: usize) -> Result<[StageTable; 3]> {
    let n = da * db;
    if table.len() != n {
        return Err(SynthError::pre(format!("table has {} rows, expected {n}", table.len())));
    }
    let mut targets = vec![usize::MAX; n];
    for row in table {
        let [ia, ib, oa, ob] = *row;
        if ia >= da || ib >= db || oa >= da || ob >= db {
            return Err(SynthError::pre(format!("table row {row:?} out of range")));
        }
        if targets[ia * db + ib] != usize::MAX {
            return Err(SynthError::pre(format!("input ({ia}, {ib}) listed twice")));
        }
        targets[ia * db + ib] = oa * db + ob;
    }
    let p =
        ComplexPermutation::plain(vec![da, db], targets).map_err(|_| SynthError::pre("table is not a bijection"))?;
    let r = decompose_perm3(&p)?;
    let a_stage =
        |g: &Vec<Vec<usize>>| -> StageTable { (0..n).map(|i| [i / db, i % db, i / db, g[i / db][i % db]]).collect() };
    let b_stage: StageTable = (0..n).map(|i| [i / db, i % db, r.g2[i % db][i / db], i % db]).collect();
    Ok([a_stage(&r.g3), b_stage, a_stage(&r.g1)])
}

/// Applies stage tables in order.
pub fn compose_stages(stages: &[StageTable], da: usize, db: usize) -> Vec<usize> {
    let n = da * db;
    let mut state: Vec<usize> = (0..n).collect();
    for st in stages {
        let mut map = vec![0; n];
        for row in st {
            map[row[0] * db + row[1]] = row[2] * db + row[3];
        }
        state = state.iter().map(|&s| map[s]).collect();
    }
    state
}

/// A gate on several parties controlled by `controls` and acting on the
/// single party `target` with a complex permutation per control tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct PermGate {
    pub controls: Vec<usize>,
    pub target: usize,
    pub branches: Vec<ComplexPermutation>,
}

impl PermGate {
    pub fn to_gate(&self) -> GateRecord {
        GateRecord::Controlled(ControlledGate {
            controls: self.controls.clone(),
            targets: vec![self.target],
            branches: self.branches.iter().map(|b| b.matrix()).collect(),
        })
    }
}

fn mixed_index(digits: &[usize], dims: &[usize], parties: &[usize]) -> usize {
    parties.iter().fold(0, |acc, &p| acc * dims[p] + digits[p])
}

fn digits_of(mut i: usize, dims: &[usize]) -> Vec<usize> {
    let mut d = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        d[k] = i % dims[k];
        i /= dims[k];
    }
    d
}

/// Exact product of permutation gates on `dims`.
pub fn compose_perm_gates(gates: &[PermGate], dims: &[usize]) -> ComplexPermutation {
    let n: usize = dims.iter().product();
    let mut targets = vec![0; n];
    let mut phases = vec![c(1.0, 0.0); n];
    for i in 0..n {
        let mut d = digits_of(i, dims);
        let mut ph = c(1.0, 0.0);
        for g in gates.iter().rev() {
            let br = &g.branches[mixed_index(&d, dims, &g.controls)];
            let x = d[g.target];
            ph *= br.phases[x];
            d[g.target] = br.targets[x];
        }
        targets[i] = mixed_index(&d, dims, &(0..dims.len()).collect::<Vec<_>>());
        phases[i] = ph;
    }
    ComplexPermutation { dims: dims.to_vec(), targets, phases }
}

/// At most `2n − 1` controlled complex permutations, each controlled by
/// `n − 1` parties, for a permutation on `n ≥ 2` parties.
pub fn decompose_multiparty_perm(u: &ComplexPermutation) -> Result<Vec<PermGate>> {
    u.validate()?;
    let n = u.dims.len();
    if n < 2 {
        return Err(SynthError::dim("need at least two parties"));
    }
    let gates = multiparty_perm_rec(u)?;
    if compose_perm_gates(&gates, &u.dims) != *u {
        return Err(SynthError::Infeasible("multiparty permutation form does not reproduce the input".into()));
    }
    Ok(gates)
}

fn multiparty_perm_rec(u: &ComplexPermutation) -> Result<Vec<PermGate>> {
    let n = u.dims.len();
    let last = n - 1;
    let head: Vec<usize> = u.dims[..last].to_vec();
    let dh: usize = head.iter().product();
    let dl = u.dims[last];
    let cut = ComplexPermutation { dims: vec![dh, dl], targets: u.targets.clone(), phases: u.phases.clone() };
    let r = decompose_perm3(&cut)?;
    let [g1, g2, g3] = r.branch_perms();
    let head_parties: Vec<usize> = (0..last).collect();
    let outer = |branches: Vec<ComplexPermutation>| PermGate { controls: head_parties.clone(), target: last, branches };
    let middle: Vec<PermGate> = if n == 2 {
        vec![PermGate { controls: vec![1], target: 0, branches: g2 }]
    } else {
        let per_branch: Vec<Vec<PermGate>> = g2
            .into_iter()
            .map(|p| multiparty_perm_rec(&ComplexPermutation { dims: head.clone(), ..p }))
            .collect::<Result<_>>()?;
        let len = per_branch[0].len();
        (0..len)
            .map(|k| {
                let proto = &per_branch[0][k];
                let mut controls = proto.controls.clone();
                controls.push(last);
                let nb = proto.branches.len();
                let mut branches = Vec::with_capacity(nb * dl);
                for t in 0..nb {
                    for sub in &per_branch {
                        debug_assert_eq!(sub[k].controls, proto.controls);
                        branches.push(sub[k].branches[t].clone());
                    }
                }
                PermGate { controls, target: proto.target, branches }
            })
            .collect()
    };
    let mut out = vec![outer(g1)];
    out.extend(middle);
    out.push(outer(g3));
    Ok(out)
}

pub fn perm_gates_circuit(gates: &[PermGate], dims: &[usize]) -> Result<Circuit> {
    let space = PartySpace::from_dims(dims)?;
    let bound = 2 * dims.len() - 1;
    Ok(Circuit::from_gates(space, gates.iter().map(|g| g.to_gate()).collect()).with_bound(KIND_CONTROLLED, bound))
}
