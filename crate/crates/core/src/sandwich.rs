//! Bipartite sandwich decompositions.
//!
//! A *sandwich* is a product of computational-basis controlled gates whose
//! controlling party alternates `A, B, A, ...`, starting and ending with `A`.
//! [`decompose_sandwich`] produces at most `g(d_A) = 2^(⌈log₂ d_A⌉+1) − 1`
//! such gates for any `d_A × d_B` unitary.

use crate::error::{Result, SynthError};
use crate::gateir::{
    Circuit, ControlledGate, GateRecord, GenericGate, LocalGate, PartySpace, UnitaryMatrix, KIND_CONTROLLED,
};
use crate::matcore::{
    c, complete_isometry, compress_rows, direct_sum, identity, is_identity, max_abs, max_abs_diff,
    orthogonal_columns_to_diagonal, polar_unitary, require_unitary, svd_diagonalize, unitary_eigen, CMat, C64,
    ZERO_THRESHOLD,
};
use crate::schmidt::operator_schmidt;

/// Unitarity tolerance for inputs.
pub const INPUT_UNITARY_TOL: f64 = 1e-9;
/// Gates within this distance of the identity are removed by stripping.
pub const STRIP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

/// One controlled gate on `d_A × d_B`. For `Side::A` there are `d_A` branches
/// of size `d_B`; for `Side::B`, `d_B` branches of size `d_A`.
#[derive(Debug, Clone)]
pub struct Layer {
    pub side: Side,
    pub branches: Vec<CMat>,
}

impl Layer {
    pub fn identity(side: Side, da: usize, db: usize) -> Layer {
        let (nb, size) = match side {
            Side::A => (da, db),
            Side::B => (db, da),
        };
        Layer { side, branches: vec![identity(size); nb] }
    }

    pub fn is_identity(&self, eps: f64) -> bool {
        self.branches.iter().all(|b| is_identity(b, eps))
    }

    pub fn matrix(&self) -> CMat {
        match self.side {
            Side::A => direct_sum(&self.branches),
            Side::B => crate::generators::controlled_b(&self.branches),
        }
    }

    /// Branchwise product `self · other`; both must share a side.
    pub fn compose(&self, other: &Layer) -> Layer {
        assert_eq!(self.side, other.side);
        Layer { side: self.side, branches: self.branches.iter().zip(&other.branches).map(|(x, y)| x * y).collect() }
    }

    /// The layer as a gate on wires `0` (A) and `1` (B).
    pub fn to_gate(&self) -> GateRecord {
        let (controls, targets) = match self.side {
            Side::A => (vec![0], vec![1]),
            Side::B => (vec![1], vec![0]),
        };
        GateRecord::Controlled(ControlledGate { controls, targets, branches: self.branches.clone() })
    }
}

pub fn layers_product(layers: &[Layer], n: usize) -> CMat {
    layers.iter().fold(identity(n), |acc, l| acc * l.matrix())
}

#[derive(Debug, Clone)]
pub struct SandwichResult {
    pub circuit: Circuit,
    pub bound: usize,
}

impl SandwichResult {
    pub fn controlled_count(&self) -> usize {
        self.circuit.metrics.count(KIND_CONTROLLED)
    }
}

/// `g(d) = 2^(⌈log₂ d⌉+1) − 1`.
pub fn sandwich_bound(d: usize) -> usize {
    assert!(d >= 1);
    let mut p = 1usize;
    while p < d {
        p *= 2;
    }
    2 * p - 1
}

fn bipartite_dims(u: &UnitaryMatrix) -> Result<(usize, usize)> {
    if u.dims.len() != 2 {
        return Err(SynthError::dim(format!("expected a bipartite unitary, got dims {:?}", u.dims)));
    }
    require_unitary(&u.matrix, INPUT_UNITARY_TOL)?;
    Ok((u.dims[0], u.dims[1]))
}

fn block(u: &CMat, i: usize, j: usize, n: usize) -> CMat {
    u.view((i * n, j * n), (n, n)).into_owned()
}

/// Exchanges the roles of the two parties: the result acts on `d_B × d_A`.
pub fn swap_parties(u: &CMat, da: usize, db: usize) -> CMat {
    CMat::from_fn(da * db, da * db, |r, s| {
        let (b, a) = (r / da, r % da);
        let (b2, a2) = (s / da, s % da);
        u[(a * db + b, a2 * db + b2)]
    })
}

fn layers_circuit(layers: &[Layer], da: usize, db: usize, bound: usize) -> Circuit {
    let gates = layers.iter().map(|l| l.to_gate()).collect();
    Circuit::from_gates(PartySpace::bipartite(da, db), gates).with_bound(KIND_CONTROLLED, bound)
}

fn check_reconstruction(u: &CMat, got: &CMat, what: &str) -> Result<()> {
    let err = max_abs_diff(u, got);
    let tol = 1e-8 * (u.nrows() as f64).sqrt();
    if err > tol {
        return Err(SynthError::Infeasible(format!("{what}: reconstruction error {err:.3e} exceeds {tol:.3e}")));
    }
    Ok(())
}

/// Three layers `A, B, A` for a `2 × d` unitary.
pub(crate) fn two_by_d_layers(u: &CMat, db: usize) -> Result<Vec<Layer>> {
    let u00 = block(u, 0, 0, db);
    let u01 = block(u, 0, 1, db);
    let u10 = block(u, 1, 0, db);
    let u11 = block(u, 1, 1, db);
    if max_abs(&u01) <= STRIP_EPS && max_abs(&u10) <= STRIP_EPS {
        return Ok(vec![
            Layer { side: Side::A, branches: vec![polar_unitary(&u00), polar_unitary(&u11)] },
            Layer::identity(Side::B, 2, db),
            Layer::identity(Side::A, 2, db),
        ]);
    }
    let (e, _d, f) = svd_diagonalize(&u00)?;
    let (ed, fd) = (e.adjoint(), f.adjoint());
    let p00 = &ed * &u00 * &fd;
    let p01 = &ed * &u01 * &fd;
    let p10 = &ed * &u10 * &fd;
    let p11 = &ed * &u11 * &fd;
    let v = orthogonal_columns_to_diagonal(&p10)?;
    let w = orthogonal_columns_to_diagonal(&p01.adjoint())?.adjoint();
    let s10 = &v * &p10;
    let s01 = &p01 * &w;
    let g = &v * &p11 * &w;

    let zset: Vec<usize> = (0..db).filter(|&j| s10[(j, j)].norm() < ZERO_THRESHOLD).collect();
    let mut qhat = identity(db);
    if !zset.is_empty() {
        let k = zset.len();
        let gz = CMat::from_fn(k, k, |i, j| g[(zset[i], zset[j])]);
        let (q, _) = unitary_eigen(&polar_unitary(&gz))?;
        for (i, &zi) in zset.iter().enumerate() {
            for (j, &zj) in zset.iter().enumerate() {
                qhat[(zi, zj)] = q[(i, j)];
            }
        }
    }
    let qd = qhat.adjoint();
    let t00 = &qd * &p00 * &qhat;
    let t01 = &qd * &s01 * &qhat;
    let t10 = &qd * &s10 * &qhat;
    let t11 = &qd * &g * &qhat;
    let middle: Vec<CMat> = (0..db)
        .map(|b| polar_unitary(&CMat::from_row_slice(2, 2, &[t00[(b, b)], t01[(b, b)], t10[(b, b)], t11[(b, b)]])))
        .collect();
    let first = Layer { side: Side::A, branches: vec![&e * &qhat, &e * v.adjoint() * &qhat] };
    let last = Layer { side: Side::A, branches: vec![&qd * &f, &qd * w.adjoint() * &f] };
    Ok(vec![first, Layer { side: Side::B, branches: middle }, last])
}

/// 3-sandwich form `A, B, A` of a `2 × d_B` unitary. Identity gates are kept.
pub fn decompose_2xd_sandwich(u: &UnitaryMatrix) -> Result<SandwichResult> {
    let (da, db) = bipartite_dims(u)?;
    if da != 2 {
        return Err(SynthError::dim(format!("the 2 x d form needs d_A = 2, got {da}")));
    }
    let layers = two_by_d_layers(&u.matrix, db)?;
    check_reconstruction(&u.matrix, &layers_product(&layers, 2 * db), "2 x d sandwich")?;
    Ok(SandwichResult { circuit: layers_circuit(&layers, 2, db, 3), bound: 3 })
}

/// Controlled form of a Schmidt-rank-2 operator whose controlling party has
/// dimension 2: `U = (L ⊗ I) (Σ_j |j><j| ⊗ U_j) (R ⊗ I)` with the roles of
/// the parties exchanged for `Side::B`.
#[derive(Debug, Clone)]
pub struct Rank2Controlled {
    pub side: Side,
    pub local_left: CMat,
    pub branches: Vec<CMat>,
    pub local_right: CMat,
}

impl Rank2Controlled {
    pub fn gates(&self) -> Vec<GateRecord> {
        let w = match self.side {
            Side::A => 0,
            Side::B => 1,
        };
        vec![
            GateRecord::Local(LocalGate { wires: vec![w], matrix: self.local_left.clone() }),
            Layer { side: self.side, branches: self.branches.clone() }.to_gate(),
            GateRecord::Local(LocalGate { wires: vec![w], matrix: self.local_right.clone() }),
        ]
    }
}

fn det2(m: &CMat) -> C64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Core of the rank-2 conversion with the controlling party first (dimension 2).
fn rank2_core(u: &CMat, db: usize) -> Result<(CMat, Vec<CMat>, CMat)> {
    let sd = operator_schmidt(u, 2, db, 1e-9)?;
    if sd.rank != 2 {
        return Err(SynthError::pre(format!("operator has Schmidt rank {}, expected 2", sd.rank)));
    }
    let a1 = &sd.terms[0].0 * c(sd.coefficients[0], 0.0);
    let a2 = &sd.terms[1].0 * c(sd.coefficients[1], 0.0);
    let (b1, b2) = (&sd.terms[0].1, &sd.terms[1].1);
    // det(αA1 + βA2) = qa α² + qb αβ + qc β²
    let qa = det2(&a1);
    let qc = det2(&a2);
    let qb = a1[(0, 0)] * a2[(1, 1)] + a1[(1, 1)] * a2[(0, 0)] - a1[(0, 1)] * a2[(1, 0)] - a1[(1, 0)] * a2[(0, 1)];
    let scale = (a1.norm_squared() + a2.norm_squared()).max(1e-300);
    let small = |z: C64| z.norm() <= 1e-12 * scale;
    // Roots as (α, β) pairs.
    let roots: [(C64, C64); 2] = if small(qa) && small(qc) {
        if small(qb) {
            return Err(SynthError::DegenerateRankTwo);
        }
        [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(1.0, 0.0))]
    } else {
        // Solve p x² + q x + r = 0 for the ratio with the larger leading coefficient.
        let flip = qc.norm() > qa.norm();
        let (p, q, r) = if flip { (qc, qb, qa) } else { (qa, qb, qc) };
        let disc = q * q - p * r * c(4.0, 0.0);
        if disc.norm() <= 1e-10 * (q.norm_sqr() + (p * r).norm() * 4.0) {
            return Err(SynthError::DegenerateRankTwo);
        }
        let sq = disc.sqrt();
        let s = if (q.conj() * sq).re >= 0.0 { q + sq } else { q - sq };
        let qq = s * c(-0.5, 0.0);
        let x1 = qq / p;
        let x2 = r / qq;
        if flip {
            [(c(1.0, 0.0), x1), (c(1.0, 0.0), x2)]
        } else {
            [(x1, c(1.0, 0.0)), (x2, c(1.0, 0.0))]
        }
    };
    let m = CMat::from_row_slice(2, 2, &[roots[0].0, roots[0].1, roots[1].0, roots[1].1]);
    let n = m.clone().try_inverse().ok_or(SynthError::DegenerateRankTwo)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut branches = Vec::new();
    for j in 0..2 {
        let rj = &a1 * roots[j].0 + &a2 * roots[j].1;
        let (e, s, f) = svd_diagonalize(&rj)?;
        if s[0] <= ZERO_THRESHOLD || s[1] > 1e-8 * s[0] {
            return Err(SynthError::DegenerateRankTwo);
        }
        xs.push(e.column(0).into_owned());
        ys.push(f.row(0).adjoint());
        let bj = b1 * n[(0, j)] + b2 * n[(1, j)];
        branches.push(polar_unitary(&(bj * c(s[0], 0.0))));
    }
    // Order the roots so that the first local column leans on |0>.
    if xs[1][0].norm() > xs[0][0].norm() + 1e-12 {
        xs.swap(0, 1);
        ys.swap(0, 1);
        branches.swap(0, 1);
    }
    let left = polar_unitary(&CMat::from_columns(&xs));
    let right = polar_unitary(&CMat::from_columns(&ys).adjoint());
    let rebuilt = crate::matcore::kron(&left, &identity(db))
        * direct_sum(&branches)
        * crate::matcore::kron(&right, &identity(db));
    check_reconstruction(u, &rebuilt, "rank-2 controlled form")?;
    Ok((left, branches, right))
}

/// Converts a Schmidt-rank-2 unitary into `local · controlled · local`,
/// controlled from `side`, which must have dimension 2.
pub fn rank2_to_controlled(u: &UnitaryMatrix, side: Side) -> Result<Rank2Controlled> {
    let (da, db) = bipartite_dims(u)?;
    let (mat, dc, dt) = match side {
        Side::A => (u.matrix.clone(), da, db),
        Side::B => (swap_parties(&u.matrix, da, db), db, da),
    };
    if dc != 2 {
        return Err(SynthError::pre(format!("controlling party must have dimension 2, got {dc}")));
    }
    let (local_left, branches, local_right) = rank2_core(&mat, dt)?;
    Ok(Rank2Controlled { side, local_left, branches, local_right })
}

/// Diagonal phases `(L, R)` with `L·u·R = [[c, s], [s, −c]]`, `c, s ≥ 0`.
fn real_reflection_phases(u: &CMat) -> ([C64; 2], [C64; 2]) {
    let ph = |z: C64| if z.norm() > ZERO_THRESHOLD { z.conj() / z.norm() } else { c(1.0, 0.0) };
    let r0 = c(1.0, 0.0);
    let l0 = if u[(0, 0)].norm() > ZERO_THRESHOLD { ph(u[(0, 0)]) } else { c(1.0, 0.0) };
    if u[(0, 1)].norm() <= ZERO_THRESHOLD {
        let l1 = -ph(u[(1, 1)]);
        return ([l0, l1], [r0, c(1.0, 0.0)]);
    }
    let r1 = ph(l0 * u[(0, 1)]);
    let l1 = ph(u[(1, 0)]);
    ([l0, l1], [r0, r1])
}

/// Three A-controlled gates for a `2 × d_B` unitary, with the rank-2 middle
/// factor's local unitaries on A recorded as `Local` gates.
pub fn decompose_2xd_aform(u: &UnitaryMatrix) -> Result<SandwichResult> {
    let (da, db) = bipartite_dims(u)?;
    if da != 2 {
        return Err(SynthError::dim(format!("the 2 x d form needs d_A = 2, got {da}")));
    }
    let layers = two_by_d_layers(&u.matrix, db)?;
    let mut first = layers[0].clone();
    let mut last = layers[2].clone();
    let middle = &layers[1];
    let diagonal = middle.branches.iter().all(|m| m[(0, 1)].norm() <= STRIP_EPS && m[(1, 0)].norm() <= STRIP_EPS);
    if diagonal {
        // A diagonal middle gate is also A-controlled; fold it into the first gate.
        for a in 0..2 {
            let d = crate::matcore::diag(&middle.branches.iter().map(|m| m[(a, a)]).collect::<Vec<_>>());
            first.branches[a] = &first.branches[a] * d;
        }
        let gates = vec![first.to_gate(), Layer::identity(Side::A, 2, db).to_gate(), last.to_gate()];
        let circuit = Circuit::from_gates(PartySpace::bipartite(2, db), gates).with_bound(KIND_CONTROLLED, 3);
        check_reconstruction(&u.matrix, &crate::gateir::apply_circuit(&circuit)?, "2 x d A-form")?;
        return Ok(SandwichResult { circuit, bound: 3 });
    }
    let mut lph = vec![[c(1.0, 0.0); 2]; db];
    let mut rph = vec![[c(1.0, 0.0); 2]; db];
    let mut reduced: Vec<CMat> = Vec::with_capacity(db);
    for b in 0..db {
        let (l, r) = real_reflection_phases(&middle.branches[b]);
        let lm = crate::matcore::diag(&l);
        let rm = crate::matcore::diag(&r);
        reduced.push(&lm * &middle.branches[b] * &rm);
        lph[b] = l;
        rph[b] = r;
    }
    // Absorb L† on the right of the first gate and R† on the left of the last.
    for a in 0..2 {
        let ld = crate::matcore::diag(&(0..db).map(|b| lph[b][a].conj()).collect::<Vec<_>>());
        let rd = crate::matcore::diag(&(0..db).map(|b| rph[b][a].conj()).collect::<Vec<_>>());
        first.branches[a] = &first.branches[a] * ld;
        last.branches[a] = rd * &last.branches[a];
    }
    let mid_layer = Layer { side: Side::B, branches: reduced };
    let mid = mid_layer.matrix();
    let same = mid_layer.branches.iter().all(|m| max_abs_diff(m, &mid_layer.branches[0]) <= STRIP_EPS);
    let (left, ctrl, right) = if same {
        (mid_layer.branches[0].clone(), Layer::identity(Side::A, 2, db), identity(2))
    } else {
        let (l, br, r) = rank2_core(&mid, db)?;
        (l, Layer { side: Side::A, branches: br }, r)
    };
    let mut gates = vec![first.to_gate()];
    if !is_identity(&left, STRIP_EPS) {
        gates.push(GateRecord::Local(LocalGate { wires: vec![0], matrix: left }));
    }
    gates.push(ctrl.to_gate());
    if !is_identity(&right, STRIP_EPS) {
        gates.push(GateRecord::Local(LocalGate { wires: vec![0], matrix: right }));
    }
    gates.push(last.to_gate());
    let circuit = Circuit::from_gates(PartySpace::bipartite(2, db), gates).with_bound(KIND_CONTROLLED, 3);
    let got = crate::gateir::apply_circuit(&circuit)?;
    check_reconstruction(&u.matrix, &got, "2 x d A-form")?;
    Ok(SandwichResult { circuit, bound: 3 })
}

fn pad_layers(layers: &mut Vec<Layer>, target: usize, da: usize, db: usize) {
    while layers.len() < target {
        let side = layers.last().map(|l| l.side.other()).unwrap_or(Side::A);
        layers.push(Layer::identity(side, da, db));
    }
}

fn merge_layers(mut top: Vec<Layer>, mut bottom: Vec<Layer>, (da1, da2, db): (usize, usize, usize)) -> Vec<Layer> {
    let len = top.len().max(bottom.len());
    pad_layers(&mut top, len, da1, db);
    pad_layers(&mut bottom, len, da2, db);
    top.into_iter()
        .zip(bottom)
        .map(|(t, b)| {
            debug_assert_eq!(t.side, b.side);
            let branches = match t.side {
                Side::A => t.branches.into_iter().chain(b.branches).collect(),
                Side::B => {
                    t.branches.iter().zip(&b.branches).map(|(x, y)| direct_sum(&[x.clone(), y.clone()])).collect()
                }
            };
            Layer { side: t.side, branches }
        })
        .collect()
}

fn recursive_layers(u: &CMat, da: usize, db: usize) -> Result<Vec<Layer>> {
    let y = da / 2;
    let yd = y * db;
    let n = da * db;
    let ctx = |e: SynthError| match e {
        SynthError::Infeasible(m) => SynthError::Infeasible(format!("node d_A = {da}, d_B = {db}: {m}")),
        other => other,
    };
    let top_right = u.view((0, yd), (yd, n - yd)).into_owned();
    let vp = compress_rows(&top_right, yd).map_err(ctx)?;
    let v = direct_sum(&[identity(yd), vp]);
    let uv = u * &v;
    let top = uv.view((0, 0), (yd, 2 * yd)).into_owned();
    let wp = complete_isometry(&top).map_err(ctx)?;
    let w = direct_sum(&[wp.clone(), identity(n - 2 * yd)]);
    let x = &uv * &w;
    let inner = two_by_d_layers(&wp.adjoint(), yd).map_err(ctx)?;
    let (cl, tl, dl) = (&inner[0], &inner[1], &inner[2]);
    let rest = identity(n - 2 * yd);
    let c_tilde = direct_sum(&[cl.branches[0].clone(), cl.branches[1].clone(), rest.clone()]);
    let d_tilde = direct_sum(&[dl.branches[0].clone(), dl.branches[1].clone(), rest]);
    let left = x * c_tilde;
    let right = d_tilde * v.adjoint();

    let sub = |m: &CMat, lo: usize, size: usize| polar_unitary(&m.view((lo, lo), (size, size)).into_owned());
    let l_top = sandwich_layers(&sub(&left, 0, yd), y, db)?;
    let l_bot = sandwich_layers(&sub(&left, yd, n - yd), da - y, db)?;
    let r_top = sandwich_layers(&sub(&right, 0, yd), y, db)?;
    let r_bot = sandwich_layers(&sub(&right, yd, n - yd), da - y, db)?;

    let mut t_branches = Vec::with_capacity(db);
    for b in 0..db {
        let mut m = identity(da);
        for a in 0..y {
            let t = &tl.branches[a * db + b];
            m[(a, a)] = t[(0, 0)];
            m[(a, a + y)] = t[(0, 1)];
            m[(a + y, a)] = t[(1, 0)];
            m[(a + y, a + y)] = t[(1, 1)];
        }
        t_branches.push(m);
    }
    let mut out = merge_layers(l_top, l_bot, (y, da - y, db));
    out.push(Layer { side: Side::B, branches: t_branches });
    out.extend(merge_layers(r_top, r_bot, (y, da - y, db)));
    Ok(out)
}

/// Raw alternating layers, padded with identities to exactly `g(d_A)`.
pub(crate) fn sandwich_layers(u: &CMat, da: usize, db: usize) -> Result<Vec<Layer>> {
    let mut layers = if da == 1 {
        vec![Layer { side: Side::A, branches: vec![u.clone()] }]
    } else if db == 1 {
        vec![
            Layer::identity(Side::A, da, 1),
            Layer { side: Side::B, branches: vec![u.clone()] },
            Layer::identity(Side::A, da, 1),
        ]
    } else if da == 2 {
        two_by_d_layers(u, db)?
    } else {
        recursive_layers(u, da, db)?
    };
    pad_layers(&mut layers, sandwich_bound(da), da, db);
    Ok(layers)
}

/// Removes interior identity layers, merging the two neighbours that become
/// adjacent. The first and last layers are kept so the sequence still starts
/// and ends on the same side.
pub fn strip_layers(mut layers: Vec<Layer>, eps: f64) -> Vec<Layer> {
    let mut k = 1;
    while k + 1 < layers.len() {
        if layers[k].is_identity(eps) {
            let merged = layers[k - 1].compose(&layers[k + 1]);
            layers.splice(k - 1..k + 2, [merged]);
            k = k.saturating_sub(1).max(1);
        } else {
            k += 1;
        }
    }
    layers
}

/// Alternating sandwich form with at most `g(d_A)` controlled gates.
pub fn decompose_sandwich(u: &UnitaryMatrix) -> Result<SandwichResult> {
    let (da, db) = bipartite_dims(u)?;
    let raw = sandwich_layers(&u.matrix, da, db)?;
    let layers = strip_layers(raw, STRIP_EPS);
    check_reconstruction(&u.matrix, &layers_product(&layers, da * db), "sandwich")?;
    let bound = sandwich_bound(da);
    Ok(SandwichResult { circuit: layers_circuit(&layers, da, db, bound), bound })
}

/// `U = X · W† · V†`: block-controlled factors from the A, B and A sides.
#[derive(Debug, Clone)]
pub struct Bcu3 {
    /// `I_{y·d_B} ⊕ X'`.
    pub x: CMat,
    /// `(W')† ⊕ I`, supported on A-levels below `2y`.
    pub w_dag: CMat,
    /// `I_{y·d_B} ⊕ (V')†`.
    pub v_dag: CMat,
    /// Size of the first A block.
    pub y: usize,
    pub circuit: Circuit,
}

/// Largest entry of `m` outside the diagonal blocks of sizes `sizes`.
pub fn off_block_max(m: &CMat, sizes: &[usize]) -> f64 {
    let mut owner = Vec::with_capacity(m.nrows());
    for (k, &s) in sizes.iter().enumerate() {
        owner.extend(std::iter::repeat_n(k, s));
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if owner[i] != owner[j] {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

impl Bcu3 {
    /// Checks the block structure of each factor; returns the worst violation.
    pub fn block_defect(&self, db: usize) -> f64 {
        let n = self.x.nrows();
        let yd = self.y * db;
        let x_top = max_abs_diff(&self.x.view((0, 0), (yd, yd)).into_owned(), &identity(yd));
        let x_off = off_block_max(&self.x, &[yd, n - yd]);
        let v_top = max_abs_diff(&self.v_dag.view((0, 0), (yd, yd)).into_owned(), &identity(yd));
        let v_off = off_block_max(&self.v_dag, &[yd, n - yd]);
        let w_off = off_block_max(&self.w_dag, &[2 * yd, n - 2 * yd]);
        let w_rest = max_abs_diff(
            &self.w_dag.view((2 * yd, 2 * yd), (n - 2 * yd, n - 2 * yd)).into_owned(),
            &identity(n - 2 * yd),
        );
        [x_top, x_off, v_top, v_off, w_off, w_rest].into_iter().fold(0.0, f64::max)
    }
}

/// Factorization into three block-controlled unitaries (A, B, A sides).
pub fn decompose_bcu3(u: &UnitaryMatrix) -> Result<Bcu3> {
    let (da, db) = bipartite_dims(u)?;
    if da < 2 {
        return Err(SynthError::dim("the block-controlled factorization needs d_A >= 2"));
    }
    let y = da / 2;
    let yd = y * db;
    let n = da * db;
    let top_right = u.matrix.view((0, yd), (yd, n - yd)).into_owned();
    let vp = compress_rows(&top_right, yd)?;
    let v = direct_sum(&[identity(yd), vp]);
    let uv = &u.matrix * &v;
    let wp = complete_isometry(&uv.view((0, 0), (yd, 2 * yd)).into_owned())?;
    let w = direct_sum(&[wp, identity(n - 2 * yd)]);
    let mut x = &uv * &w;
    // Snap the exact-identity block; the residual is at rounding level.
    x.view_mut((0, 0), (yd, yd)).copy_from(&identity(yd));
    x.view_mut((0, yd), (yd, n - yd)).fill(c(0.0, 0.0));
    x.view_mut((yd, 0), (n - yd, yd)).fill(c(0.0, 0.0));
    let w_dag = w.adjoint();
    let v_dag = v.adjoint();
    check_reconstruction(&u.matrix, &(&x * &w_dag * &v_dag), "block-controlled factorization")?;
    let gates = [&x, &w_dag, &v_dag]
        .iter()
        .map(|m| GateRecord::Generic(GenericGate { wires: vec![0, 1], split: 1, matrix: (*m).clone() }))
        .collect();
    let circuit = Circuit::from_gates(PartySpace::bipartite(da, db), gates);
    Ok(Bcu3 { x, w_dag, v_dag, y, circuit })
}
