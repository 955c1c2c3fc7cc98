//! Circuit intermediate representation, dense simulator and verifier.
//!
//! A circuit acts on a [`PartySpace`]: an ordered list of parties followed by
//! ancillas. Gates address these subsystems by *wire* index (parties first,
//! then ancillas). The full space uses mixed radix with wire 0 most
//! significant.
//!
//! The gate list `[U_1, ..., U_k]` denotes the product `U_1 U_2 ... U_k`:
//! the last gate in the list is applied first.

use std::collections::BTreeMap;

use crate::error::{Result, SynthError};
use crate::matcore::{c, identity, max_abs_diff, require_unitary, zeros, CMat, Tolerance, C64};
use crate::schmidt::schmidt_rank;

/// Tolerance used when checking that embedded gate matrices are unitary.
pub const GATE_UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Party {
    pub name: String,
    pub dim: usize,
    /// Parties sharing a site are local to each other.
    pub site: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ancilla {
    pub name: String,
    pub host: String,
    pub dim: usize,
    pub init: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartySpace {
    pub parties: Vec<Party>,
    pub ancillas: Vec<Ancilla>,
}

impl PartySpace {
    /// One party per entry, each at its own site.
    pub fn new(parties: &[(&str, usize)]) -> Result<Self> {
        let ps = parties.iter().map(|(n, d)| Party { name: n.to_string(), dim: *d, site: n.to_string() }).collect();
        let s = PartySpace { parties: ps, ancillas: vec![] };
        s.validate()?;
        Ok(s)
    }

    pub fn bipartite(da: usize, db: usize) -> Self {
        PartySpace::new(&[("A", da), ("B", db)]).expect("positive dimensions")
    }

    /// Parties named `P0, P1, ...`, each at its own site.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        let names: Vec<String> = (0..dims.len()).map(|i| format!("P{i}")).collect();
        let pairs: Vec<(&str, usize)> = names.iter().map(|n| n.as_str()).zip(dims.iter().copied()).collect();
        PartySpace::new(&pairs)
    }

    pub fn with_site(mut self, party: usize, site: &str) -> Self {
        self.parties[party].site = site.to_string();
        self
    }

    pub fn add_ancilla(&mut self, name: &str, host: &str, dim: usize, init: usize) -> Result<usize> {
        self.ancillas.push(Ancilla { name: name.into(), host: host.into(), dim, init });
        self.validate()?;
        Ok(self.parties.len() + self.ancillas.len() - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.parties.is_empty() {
            return Err(SynthError::dim("party space needs at least one party"));
        }
        let mut names = std::collections::BTreeSet::new();
        for p in &self.parties {
            if p.dim == 0 {
                return Err(SynthError::dim(format!("party {} has dimension 0", p.name)));
            }
            if !names.insert(p.name.clone()) {
                return Err(SynthError::dim(format!("duplicate subsystem name {}", p.name)));
            }
        }
        for a in &self.ancillas {
            if a.dim == 0 || a.init >= a.dim {
                return Err(SynthError::dim(format!("ancilla {} has invalid dimension/initial state", a.name)));
            }
            if !self.parties.iter().any(|p| p.name == a.host) {
                return Err(SynthError::dim(format!("ancilla {} hosted by unknown party {}", a.name, a.host)));
            }
            if !names.insert(a.name.clone()) {
                return Err(SynthError::dim(format!("duplicate subsystem name {}", a.name)));
            }
        }
        Ok(())
    }

    pub fn n_wires(&self) -> usize {
        self.parties.len() + self.ancillas.len()
    }

    pub fn wire_dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).chain(self.ancillas.iter().map(|a| a.dim)).collect()
    }

    pub fn party_dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }

    pub fn party_total(&self) -> usize {
        self.parties.iter().map(|p| p.dim).product()
    }

    pub fn ancilla_total(&self) -> usize {
        self.ancillas.iter().map(|a| a.dim).product()
    }

    pub fn total_dim(&self) -> usize {
        self.party_total() * self.ancilla_total()
    }

    pub fn wire_index(&self, name: &str) -> Option<usize> {
        self.parties
            .iter()
            .position(|p| p.name == name)
            .or_else(|| self.ancillas.iter().position(|a| a.name == name).map(|i| i + self.parties.len()))
    }

    pub fn is_ancilla(&self, wire: usize) -> bool {
        wire >= self.parties.len()
    }

    pub fn wire_site(&self, wire: usize) -> &str {
        if wire < self.parties.len() {
            &self.parties[wire].site
        } else {
            let host = &self.ancillas[wire - self.parties.len()].host;
            let p = self.parties.iter().find(|p| &p.name == host).expect("validated host");
            &p.site
        }
    }
}

/// Gate controlled in the computational basis of `controls`, applying
/// `branches[t]` on `targets` when the controls are in basis tuple `t`
/// (mixed radix over `controls`, first control most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledGate {
    pub controls: Vec<usize>,
    pub targets: Vec<usize>,
    pub branches: Vec<CMat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalGate {
    pub wires: Vec<usize>,
    pub matrix: CMat,
}

/// Identity outside `span{levels[0]} ⊗ span{levels[1]}`; on that 2×2 space acts
/// as `matrix`, indexed `i*2 + j` for `(levels[0][i], levels[1][j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelGate {
    pub wires: [usize; 2],
    pub levels: [[usize; 2]; 2],
    pub matrix: CMat,
}

/// Swaps target levels `target_levels` when the control wire is in
/// `control_levels[1]`; identity otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CnotGate {
    pub control: usize,
    pub control_levels: [usize; 2],
    pub target: usize,
    pub target_levels: [usize; 2],
}

/// Explicit matrix on `wires`; the first `split` wires form one side of the
/// declared bipartition.
#[derive(Debug, Clone, PartialEq)]
pub struct GenericGate {
    pub wires: Vec<usize>,
    pub split: usize,
    pub matrix: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateRecord {
    Controlled(ControlledGate),
    Local(LocalGate),
    TwoLevel(TwoLevelGate),
    Cnot(CnotGate),
    Generic(GenericGate),
}

pub const KIND_CONTROLLED: &str = "ControlledComputational";
pub const KIND_LOCAL: &str = "Local";
pub const KIND_TWO_LEVEL: &str = "TwoLevelStandard";
pub const KIND_CNOT: &str = "CNOT";
pub const KIND_GENERIC: &str = "GenericBipartite";

fn mixed_radix(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

fn from_mixed_radix(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
}

impl GateRecord {
    pub fn kind(&self) -> &'static str {
        match self {
            GateRecord::Controlled(_) => KIND_CONTROLLED,
            GateRecord::Local(_) => KIND_LOCAL,
            GateRecord::TwoLevel(_) => KIND_TWO_LEVEL,
            GateRecord::Cnot(_) => KIND_CNOT,
            GateRecord::Generic(_) => KIND_GENERIC,
        }
    }

    pub fn wires(&self) -> Vec<usize> {
        match self {
            GateRecord::Controlled(g) => g.controls.iter().chain(g.targets.iter()).copied().collect(),
            GateRecord::Local(g) => g.wires.clone(),
            GateRecord::TwoLevel(g) => g.wires.to_vec(),
            GateRecord::Cnot(g) => vec![g.control, g.target],
            GateRecord::Generic(g) => g.wires.clone(),
        }
    }

    /// The gate as a matrix on `self.wires()` (mixed radix in that order).
    pub fn wire_matrix(&self, dims: &[usize]) -> Result<CMat> {
        let wires = self.wires();
        let mut seen = std::collections::BTreeSet::new();
        for &w in &wires {
            if w >= dims.len() {
                return Err(SynthError::dim(format!("wire {w} out of range")));
            }
            if !seen.insert(w) {
                return Err(SynthError::dim(format!("wire {w} used twice")));
            }
        }
        let sub: Vec<usize> = wires.iter().map(|&w| dims[w]).collect();
        let n: usize = sub.iter().product();
        let m = match self {
            GateRecord::Controlled(g) => {
                let nc: usize = g.controls.iter().map(|&w| dims[w]).product();
                let nt: usize = g.targets.iter().map(|&w| dims[w]).product();
                if g.branches.len() != nc {
                    return Err(SynthError::dim(format!("expected {nc} branches, found {}", g.branches.len())));
                }
                let mut m = zeros(n, n);
                for (k, b) in g.branches.iter().enumerate() {
                    if b.shape() != (nt, nt) {
                        return Err(SynthError::dim(format!(
                            "branch {k} has shape {:?}, expected {nt}x{nt}",
                            b.shape()
                        )));
                    }
                    m.view_mut((k * nt, k * nt), (nt, nt)).copy_from(b);
                }
                m
            }
            GateRecord::Local(g) => g.matrix.clone(),
            GateRecord::Generic(g) => g.matrix.clone(),
            GateRecord::TwoLevel(g) => {
                let (d0, d1) = (sub[0], sub[1]);
                for (k, lv) in g.levels.iter().enumerate() {
                    let d = if k == 0 { d0 } else { d1 };
                    if lv[0] == lv[1] || lv[0] >= d || lv[1] >= d {
                        return Err(SynthError::dim(format!("invalid level pair {lv:?} for dimension {d}")));
                    }
                }
                if g.matrix.shape() != (4, 4) {
                    return Err(SynthError::dim("two-level gate needs a 4x4 matrix"));
                }
                let mut m = identity(n);
                let idx = |i: usize, j: usize| g.levels[0][i] * d1 + g.levels[1][j];
                for r in 0..4 {
                    for s in 0..4 {
                        m[(idx(r / 2, r % 2), idx(s / 2, s % 2))] = g.matrix[(r, s)];
                    }
                }
                m
            }
            GateRecord::Cnot(g) => {
                let (dc, dt) = (sub[0], sub[1]);
                let [c0, c1] = g.control_levels;
                let [t0, t1] = g.target_levels;
                if c0 == c1 || t0 == t1 || c0.max(c1) >= dc || t0.max(t1) >= dt {
                    return Err(SynthError::dim("invalid CNOT level pairs"));
                }
                let mut m = identity(n);
                let (a, b) = (c1 * dt + t0, c1 * dt + t1);
                m[(a, a)] = c(0.0, 0.0);
                m[(b, b)] = c(0.0, 0.0);
                m[(a, b)] = c(1.0, 0.0);
                m[(b, a)] = c(1.0, 0.0);
                m
            }
        };
        if m.shape() != (n, n) {
            return Err(SynthError::dim(format!("matrix shape {:?} does not match wire dimension {n}", m.shape())));
        }
        if let GateRecord::Generic(g) = self {
            if g.split > g.wires.len() {
                return Err(SynthError::dim("generic gate split exceeds wire count"));
            }
        }
        Ok(m)
    }

    /// The gate embedded into the full space with the given wire dimensions.
    pub fn full_matrix(&self, dims: &[usize]) -> Result<CMat> {
        let m = self.wire_matrix(dims)?;
        Ok(embed(&self.wires(), &m, dims))
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        let m = self.wire_matrix(dims)?;
        require_unitary(&m, GATE_UNITARY_TOL)?;
        if let GateRecord::TwoLevel(g) = self {
            let r = schmidt_rank(&g.matrix, 2, 2)?;
            if r > 2 {
                return Err(SynthError::pre(format!("two-level gate has Schmidt rank {r} > 2")));
            }
        }
        if let GateRecord::Local(g) = self {
            if g.wires.is_empty() {
                return Err(SynthError::dim("local gate acts on no wire"));
            }
        }
        Ok(())
    }

    /// True when the gate's nontrivial part is the identity within `eps`.
    pub fn is_identity(&self, dims: &[usize], eps: f64) -> bool {
        match self.wire_matrix(dims) {
            Ok(m) => max_abs_diff(&m, &identity(m.nrows())) <= eps,
            Err(_) => false,
        }
    }
}

/// Embeds a matrix acting on `wires` into the full space.
pub fn embed(wires: &[usize], m: &CMat, dims: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let sub: Vec<usize> = wires.iter().map(|&w| dims[w]).collect();
    let n: usize = sub.iter().product();
    let offsets: Vec<usize> =
        (0..n).map(|s| mixed_radix(s, &sub).iter().zip(wires).map(|(&d, &w)| d * strides[w]).sum()).collect();
    let mut out = zeros(total, total);
    for col in 0..total {
        let digits: Vec<usize> = wires.iter().map(|&w| (col / strides[w]) % dims[w]).collect();
        let s_col = from_mixed_radix(&digits, &sub);
        let base = col - offsets[s_col];
        for r in 0..n {
            let v = m[(r, s_col)];
            if v.re != 0.0 || v.im != 0.0 {
                out[(base + offsets[r], col)] = v;
            }
        }
    }
    out
}

/// Declared bound on one of the circuit metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bound {
    /// One of the metric names accepted by [`Metrics::value`].
    pub metric: String,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metrics {
    pub counts: BTreeMap<String, usize>,
    /// CNOT gates whose control and target sit at different sites.
    pub nonlocal_cnots: usize,
    /// Gates touching more than one site.
    pub nonlocal_gates: usize,
    /// Declared entanglement cost, if the construction states one.
    pub ebits: Option<usize>,
    pub bound: Option<Bound>,
}

impl Metrics {
    pub fn count(&self, kind: &str) -> usize {
        self.counts.get(kind).copied().unwrap_or(0)
    }

    /// Looks up a metric by name: a gate kind, `nonlocal_cnots`,
    /// `nonlocal_gates`, `ebits` or `total`.
    pub fn value(&self, metric: &str) -> Option<usize> {
        match metric {
            "nonlocal_cnots" => Some(self.nonlocal_cnots),
            "nonlocal_gates" => Some(self.nonlocal_gates),
            "ebits" => self.ebits,
            "total" => Some(self.counts.values().sum()),
            k => Some(self.count(k)),
        }
    }

    pub fn bound_satisfied(&self) -> Option<bool> {
        let b = self.bound.as_ref()?;
        Some(self.value(&b.metric)? <= b.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    pub space: PartySpace,
    pub gates: Vec<GateRecord>,
    pub metrics: Metrics,
    /// For each party of the source unitary, the circuit parties that encode it
    /// (mixed radix). `None` means party `j` of the source is party `j` here.
    pub embedding: Option<Vec<Vec<usize>>>,
}

impl Circuit {
    pub fn new(space: PartySpace) -> Self {
        Circuit { space, gates: vec![], metrics: Metrics::default(), embedding: None }
    }

    pub fn from_gates(space: PartySpace, gates: Vec<GateRecord>) -> Self {
        let mut c = Circuit { space, gates, metrics: Metrics::default(), embedding: None };
        c.recompute_metrics();
        c
    }

    pub fn push(&mut self, g: GateRecord) {
        self.gates.push(g);
        self.recompute_metrics();
    }

    pub fn computed_metrics(&self) -> Metrics {
        let mut m = Metrics { ebits: self.metrics.ebits, bound: self.metrics.bound.clone(), ..Default::default() };
        for g in &self.gates {
            *m.counts.entry(g.kind().to_string()).or_insert(0) += 1;
            let wires = g.wires();
            let site0 = wires.first().map(|&w| self.space.wire_site(w).to_string());
            let nonlocal = wires.iter().any(|&w| Some(self.space.wire_site(w).to_string()) != site0);
            if nonlocal {
                m.nonlocal_gates += 1;
                if matches!(g, GateRecord::Cnot(_)) {
                    m.nonlocal_cnots += 1;
                }
            }
        }
        m
    }

    pub fn recompute_metrics(&mut self) {
        self.metrics = self.computed_metrics();
    }

    pub fn metrics_consistent(&self) -> bool {
        self.computed_metrics() == self.metrics
    }

    pub fn with_bound(mut self, metric: &str, value: usize) -> Self {
        self.metrics.bound = Some(Bound { metric: metric.into(), value });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        let dims = self.space.wire_dims();
        for (i, g) in self.gates.iter().enumerate() {
            g.validate(&dims).map_err(|e| SynthError::Ir { index: i, msg: e.to_string() })?;
        }
        Ok(())
    }

    /// Concatenation: the product of `self` followed by `other`.
    pub fn concat(&self, other: &Circuit) -> Result<Circuit> {
        if self.space != other.space {
            return Err(SynthError::dim("cannot concatenate circuits on different spaces"));
        }
        let gates = self.gates.iter().chain(other.gates.iter()).cloned().collect();
        Ok(Circuit::from_gates(self.space.clone(), gates))
    }

    /// Drops gates that equal the identity within `eps`.
    pub fn strip_identities(&mut self, eps: f64) {
        let dims = self.space.wire_dims();
        self.gates.retain(|g| !g.is_identity(&dims, eps));
        self.recompute_metrics();
    }
}

/// Ordered product of all gate matrices embedded in the full space.
pub fn apply_circuit(c: &Circuit) -> Result<CMat> {
    let dims = c.space.wire_dims();
    let total = c.space.total_dim();
    let mut acc = identity(total);
    for (i, g) in c.gates.iter().enumerate() {
        let m = g.wire_matrix(&dims).map_err(|e| SynthError::Ir { index: i, msg: e.to_string() })?;
        acc *= embed(&g.wires(), &m, &dims);
    }
    Ok(acc)
}

fn column_table(m: &CMat, offset: usize, out: &mut Vec<(usize, C64)>) -> bool {
    for s in 0..m.ncols() {
        let mut hit = None;
        for r in 0..m.nrows() {
            let v = m[(r, s)];
            if v != c(0.0, 0.0) {
                if hit.is_some() {
                    return false;
                }
                hit = Some((offset + r, v));
            }
        }
        match hit {
            Some(h) => out.push(h),
            None => return false,
        }
    }
    true
}

/// Per input index on the gate's wires, the single nonzero entry of that
/// column; `None` if some column has zero or several nonzeros.
fn monomial_table(g: &GateRecord, dims: &[usize]) -> Result<Option<Vec<(usize, C64)>>> {
    let mut table = Vec::new();
    if let GateRecord::Controlled(cg) = g {
        let nc: usize = cg.controls.iter().map(|&w| dims.get(w).copied().unwrap_or(0)).product();
        let nt: usize = cg.targets.iter().map(|&w| dims.get(w).copied().unwrap_or(0)).product();
        let wires = g.wires();
        let distinct: std::collections::BTreeSet<usize> = wires.iter().copied().collect();
        if distinct.len() != wires.len()
            || nc == 0
            || nt == 0
            || cg.branches.len() != nc
            || cg.branches.iter().any(|b| b.shape() != (nt, nt))
        {
            // Let the dense path report the precise error.
            g.wire_matrix(dims)?;
        }
        for (k, b) in cg.branches.iter().enumerate() {
            if !column_table(b, k * nt, &mut table) {
                return Ok(None);
            }
        }
        return Ok(Some(table));
    }
    let m = g.wire_matrix(dims)?;
    Ok(column_table(&m, 0, &mut table).then_some(table))
}

/// Action of a circuit on basis states when every gate maps basis states to
/// phased basis states: entry `i` is `(j, φ)` with `C|i> = φ|j>`. Returns
/// `None` as soon as a gate has a column with more than one nonzero entry.
pub fn basis_action(circuit: &Circuit) -> Result<Option<Vec<(usize, C64)>>> {
    let dims = circuit.space.wire_dims();
    let total = circuit.space.total_dim();
    let mut strides = vec![1usize; dims.len()];
    for w in (0..dims.len().saturating_sub(1)).rev() {
        strides[w] = strides[w + 1] * dims[w + 1];
    }
    let mut state: Vec<(usize, C64)> = (0..total).map(|i| (i, c(1.0, 0.0))).collect();
    for (gi, g) in circuit.gates.iter().enumerate().rev() {
        let Some(table) = monomial_table(g, &dims).map_err(|e| SynthError::Ir { index: gi, msg: e.to_string() })?
        else {
            return Ok(None);
        };
        let wires = g.wires();
        let sub: Vec<usize> = wires.iter().map(|&w| dims[w]).collect();
        // Offset of each local index within the full index.
        let mut offset = vec![0usize; table.len()];
        for (local, off) in offset.iter_mut().enumerate() {
            let mut rem = local;
            for t in (0..wires.len()).rev() {
                *off += rem % sub[t] * strides[wires[t]];
                rem /= sub[t];
            }
        }
        for entry in state.iter_mut() {
            let (j, ph) = *entry;
            let local = wires.iter().zip(&sub).fold(0, |acc, (&w, &d)| acc * d + j / strides[w] % d);
            let (r, v) = table[local];
            *entry = (j - offset[local] + offset[r], ph * v);
        }
    }
    Ok(Some(state))
}

/// Dense unitary with declared party dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    pub dims: Vec<usize>,
    pub matrix: CMat,
}

impl UnitaryMatrix {
    pub fn new(dims: Vec<usize>, matrix: CMat) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || dims.contains(&0) {
            return Err(SynthError::dim("dimensions must be positive"));
        }
        if matrix.shape() != (n, n) {
            return Err(SynthError::dim(format!("matrix shape {:?} does not match dims {dims:?}", matrix.shape())));
        }
        Ok(UnitaryMatrix { dims, matrix })
    }

    pub fn bipartite(da: usize, db: usize, matrix: CMat) -> Result<Self> {
        UnitaryMatrix::new(vec![da, db], matrix)
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateClass {
    pub controlled_from_a: bool,
    pub controlled_from_b: bool,
    pub schmidt_rank: usize,
}

#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub max_error: f64,
    pub max_leakage: f64,
    pub ancilla_restored: bool,
    pub gate_counts: BTreeMap<String, usize>,
    /// Classification across the cut (party 0 | rest); `None` for gates that
    /// touch ancillas, circuits with an embedding, and spaces above 256.
    pub classes: Vec<Option<GateClass>>,
    pub passed: bool,
}

/// Decides controlled-ness of an operator on a `da × db` split.
pub fn classify_matrix(m: &CMat, da: usize, db: usize) -> Result<GateClass> {
    let mut off_a = 0.0f64;
    let mut off_b = 0.0f64;
    for r in 0..da * db {
        for s in 0..da * db {
            let v = m[(r, s)].norm();
            if r / db != s / db {
                off_a = off_a.max(v);
            }
            if r % db != s % db {
                off_b = off_b.max(v);
            }
        }
    }
    let rank = schmidt_rank(m, da, db)?;
    Ok(GateClass { controlled_from_a: off_a <= 1e-9, controlled_from_b: off_b <= 1e-9, schmidt_rank: rank })
}

/// Classifies a gate across the cut between the first `split` parties and the rest.
pub fn classify_gate(g: &GateRecord, space: &PartySpace, split: usize) -> Result<GateClass> {
    if g.wires().iter().any(|&w| space.is_ancilla(w)) {
        return Err(SynthError::pre("classification is defined on party wires only"));
    }
    if split == 0 || split >= space.parties.len() {
        return Err(SynthError::dim("split must leave parties on both sides"));
    }
    let dims = space.party_dims();
    let m = g.full_matrix(&dims)?;
    let da: usize = dims[..split].iter().product();
    let db: usize = dims[split..].iter().product();
    classify_matrix(&m, da, db)
}

fn embedded_indices(u: &UnitaryMatrix, c: &Circuit) -> Result<Vec<usize>> {
    let space = &c.space;
    let groups: Vec<Vec<usize>> = match &c.embedding {
        Some(g) => g.clone(),
        None => (0..space.parties.len()).map(|j| vec![j]).collect(),
    };
    if groups.len() != u.dims.len() {
        return Err(SynthError::dim("circuit embedding does not match the unitary's party count"));
    }
    let pdims = space.party_dims();
    let mut used = vec![false; pdims.len()];
    for (j, grp) in groups.iter().enumerate() {
        let cap: usize = grp.iter().map(|&p| pdims.get(p).copied().unwrap_or(0)).product();
        if cap < u.dims[j] || (c.embedding.is_none() && cap != u.dims[j]) {
            return Err(SynthError::dim(format!(
                "party {j}: dimension {} does not fit circuit dimension {cap}",
                u.dims[j]
            )));
        }
        for &p in grp {
            if used[p] {
                return Err(SynthError::dim("embedding uses a circuit party twice"));
            }
            used[p] = true;
        }
    }
    if used.iter().any(|&x| !x) {
        return Err(SynthError::dim("embedding leaves a circuit party unassigned"));
    }
    let anc_dims: Vec<usize> = space.ancillas.iter().map(|a| a.dim).collect();
    let anc_init: Vec<usize> = space.ancillas.iter().map(|a| a.init).collect();
    let anc_index = from_mixed_radix(&anc_init, &anc_dims);
    let n_anc = space.ancilla_total();
    let mut out = Vec::with_capacity(u.total());
    for i in 0..u.total() {
        let logical = mixed_radix(i, &u.dims);
        let mut digits = vec![0usize; pdims.len()];
        for (j, grp) in groups.iter().enumerate() {
            let gd: Vec<usize> = grp.iter().map(|&p| pdims[p]).collect();
            let sub = mixed_radix(logical[j], &gd);
            for (k, &p) in grp.iter().enumerate() {
                digits[p] = sub[k];
            }
        }
        out.push(from_mixed_radix(&digits, &pdims) * n_anc + anc_index);
    }
    Ok(out)
}

/// Compares `U` against the circuit on the ancilla-initialized (and embedded)
/// subspace. Failures are reported, not raised; only malformed inputs error.
pub fn verify_decomposition(u: &UnitaryMatrix, c: &Circuit, tol: Tolerance) -> Result<VerificationReport> {
    let idx = embedded_indices(u, c)?;
    let (max_error, max_leakage) = match basis_action(c)? {
        Some(action) => monomial_errors(u, &idx, &action, c.space.total_dim()),
        None => dense_errors(u, &idx, &apply_circuit(c)?),
    };
    let ancilla_restored = max_leakage <= tol.eps;
    let plain = c.embedding.is_none() && c.space.parties.len() >= 2 && c.space.total_dim() <= 256;
    let classes = c.gates.iter().map(|g| if plain { classify_gate(g, &c.space, 1).ok() } else { None }).collect();
    Ok(VerificationReport {
        max_error,
        max_leakage,
        ancilla_restored,
        gate_counts: c.computed_metrics().counts,
        classes,
        passed: max_error <= tol.eps && ancilla_restored,
    })
}

fn monomial_errors(u: &UnitaryMatrix, idx: &[usize], action: &[(usize, C64)], total: usize) -> (f64, f64) {
    let mut logical = vec![usize::MAX; total];
    for (r, &fr) in idx.iter().enumerate() {
        logical[fr] = r;
    }
    let mut max_error = 0.0f64;
    let mut max_leakage = 0.0f64;
    for (s, &fs) in idx.iter().enumerate() {
        let (j, ph) = action[fs];
        let hit = logical[j];
        if hit == usize::MAX {
            max_leakage = max_leakage.max(ph.norm());
        }
        for r in 0..u.total() {
            let got = if r == hit { ph } else { c(0.0, 0.0) };
            max_error = max_error.max((u.matrix[(r, s)] - got).norm());
        }
    }
    (max_error, max_leakage)
}

fn dense_errors(u: &UnitaryMatrix, idx: &[usize], full: &CMat) -> (f64, f64) {
    let mut max_error = 0.0f64;
    for (r, &fr) in idx.iter().enumerate() {
        for (s, &fs) in idx.iter().enumerate() {
            max_error = max_error.max((u.matrix[(r, s)] - full[(fr, fs)]).norm());
        }
    }
    let mut inside = vec![false; full.nrows()];
    for &i in idx {
        inside[i] = true;
    }
    let mut max_leakage = 0.0f64;
    for &fs in idx {
        let leak: f64 = (0..full.nrows()).filter(|&r| !inside[r]).map(|r| full[(r, fs)].norm_sqr()).sum();
        max_leakage = max_leakage.max(leak.sqrt());
    }
    (max_error, max_leakage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cnot_matrix, haar_unitary, swap_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn std_cnot() -> GateRecord {
        GateRecord::Cnot(CnotGate { control: 0, control_levels: [0, 1], target: 1, target_levels: [0, 1] })
    }

    #[test]
    fn empty_circuit_is_identity() {
        let c = Circuit::new(PartySpace::bipartite(2, 2));
        assert!(max_abs_diff(&apply_circuit(&c).unwrap(), &identity(4)) == 0.0);
    }

    #[test]
    fn single_cnot_matches_matrix() {
        let c = Circuit::from_gates(PartySpace::bipartite(2, 2), vec![std_cnot()]);
        assert_eq!(apply_circuit(&c).unwrap(), cnot_matrix());
        let u = UnitaryMatrix::bipartite(2, 2, cnot_matrix()).unwrap();
        let rep = verify_decomposition(&u, &c, Tolerance::new(1e-12)).unwrap();
        assert_eq!(rep.max_error, 0.0);
        assert_eq!(rep.gate_counts.get(KIND_CNOT), Some(&1));
        assert_eq!(c.metrics.nonlocal_cnots, 1);
    }

    #[test]
    fn basis_action_tracks_phases() {
        let ph =
            GateRecord::Local(LocalGate { wires: vec![1], matrix: crate::matcore::diag(&[c(1.0, 0.0), c(0.0, 1.0)]) });
        let c1 = Circuit::from_gates(PartySpace::bipartite(2, 2), vec![ph, std_cnot()]);
        let act = basis_action(&c1).unwrap().unwrap();
        // |10> -> CNOT -> |11> -> phase i on B=1.
        assert_eq!(act[2], (3, c(0.0, 1.0)));
        assert_eq!(act[0], (0, c(1.0, 0.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = GateRecord::Local(LocalGate { wires: vec![0], matrix: haar_unitary(2, &mut rng) });
        assert!(basis_action(&Circuit::from_gates(PartySpace::bipartite(2, 2), vec![h])).unwrap().is_none());
    }

    #[test]
    fn swap_from_three_cnots() {
        let rev = GateRecord::Cnot(CnotGate { control: 1, control_levels: [0, 1], target: 0, target_levels: [0, 1] });
        let c = Circuit::from_gates(PartySpace::bipartite(2, 2), vec![std_cnot(), rev, std_cnot()]);
        let u = UnitaryMatrix::bipartite(2, 2, swap_matrix(2)).unwrap();
        let rep = verify_decomposition(&u, &c, Tolerance::new(1e-12)).unwrap();
        assert!(rep.max_error <= 1e-12 && rep.passed);
    }

    #[test]
    fn classification_examples() {
        let space = PartySpace::bipartite(2, 2);
        let k = classify_gate(&std_cnot(), &space, 1).unwrap();
        assert!(k.controlled_from_a && !k.controlled_from_b && k.schmidt_rank == 2);
        let sw = GateRecord::Generic(GenericGate { wires: vec![0, 1], split: 1, matrix: swap_matrix(2) });
        let k = classify_gate(&sw, &space, 1).unwrap();
        assert!(!k.controlled_from_a && !k.controlled_from_b && k.schmidt_rank == 4);
        let d = crate::matcore::diag(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.6, 0.8)]);
        let dg = GateRecord::Generic(GenericGate { wires: vec![0, 1], split: 1, matrix: d });
        let k = classify_gate(&dg, &space, 1).unwrap();
        assert!(k.controlled_from_a && k.controlled_from_b);
    }

    #[test]
    fn concatenation_is_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let space = PartySpace::new(&[("A", 2), ("B", 3)]).unwrap();
        let g1 = GateRecord::Local(LocalGate { wires: vec![1], matrix: haar_unitary(3, &mut rng) });
        let g2 = GateRecord::Generic(GenericGate { wires: vec![0, 1], split: 1, matrix: haar_unitary(6, &mut rng) });
        let a = Circuit::from_gates(space.clone(), vec![g1]);
        let b = Circuit::from_gates(space, vec![g2]);
        let ab = a.concat(&b).unwrap();
        let prod = apply_circuit(&a).unwrap() * apply_circuit(&b).unwrap();
        assert!(max_abs_diff(&apply_circuit(&ab).unwrap(), &prod) <= 1e-10);
        assert!(ab.metrics_consistent());
    }

    #[test]
    fn embedding_respects_wire_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let space = PartySpace::new(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
        let v = haar_unitary(4, &mut rng);
        let g = GateRecord::Local(LocalGate { wires: vec![2, 0], matrix: v.clone() });
        let full = g.full_matrix(&space.wire_dims()).unwrap();
        // Reference: build V on (A, C) then permute to wire order (A, B, C).
        let mut expect = zeros(12, 12);
        for a in 0..2 {
            for b in 0..3 {
                for cc in 0..2 {
                    for a2 in 0..2 {
                        for c2 in 0..2 {
                            let row = (a2 * 3 + b) * 2 + c2;
                            let col = (a * 3 + b) * 2 + cc;
                            expect[(row, col)] = v[(c2 * 2 + a2, cc * 2 + a)];
                        }
                    }
                }
            }
        }
        assert!(max_abs_diff(&full, &expect) == 0.0);
    }

    #[test]
    fn ancilla_projection_and_leakage() {
        let mut space = PartySpace::bipartite(2, 2);
        space.add_ancilla("a", "A", 2, 0).unwrap();
        let flip = GateRecord::Local(LocalGate { wires: vec![2], matrix: crate::generators::pauli_x() });
        let c1 = Circuit::from_gates(space.clone(), vec![flip.clone()]);
        let u = UnitaryMatrix::bipartite(2, 2, identity(4)).unwrap();
        let rep = verify_decomposition(&u, &c1, Tolerance::default()).unwrap();
        assert!(!rep.ancilla_restored && !rep.passed);
        let c2 = Circuit::from_gates(space, vec![flip.clone(), flip]);
        let rep = verify_decomposition(&u, &c2, Tolerance::default()).unwrap();
        assert!(rep.ancilla_restored && rep.passed);
    }

    #[test]
    fn bad_gate_reports_index() {
        let space = PartySpace::bipartite(2, 2);
        let g = GateRecord::Local(LocalGate { wires: vec![0], matrix: identity(3) });
        let c = Circuit::from_gates(space, vec![std_cnot(), g]);
        match apply_circuit(&c) {
            Err(SynthError::Ir { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
