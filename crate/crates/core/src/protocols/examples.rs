//! Worked instances: the pair-swap family controlled by diagonal 0/1
//! blocks, and a three-party unitary with full Schmidt rank built from
//! six controlled gates.

use std::fmt::Write as _;

use crate::error::{Result, SynthError};
use crate::gateir::{embed, Circuit, ControlledGate, GateRecord, LocalGate, PartySpace, UnitaryMatrix};
use crate::generators::{example1_unitary, swap_matrix};
use crate::matcore::{c, require_unitary, CMat};
use crate::permdecomp::{decompose_perm3, ComplexPermutation};
use crate::schmidt::{schmidt_rank, schmidt_rank_cut};

use super::ppr::{pp_expansion_map, BipartiteMap, PartialPermExpansion, PpTerm};
use super::rank::{binary_rank, nonneg_rank, real_rank, xor_rank, BinaryMatrix, RankOptions, RankReport};

#[derive(Debug, Clone)]
pub struct Example1Report {
    pub da: usize,
    pub db: usize,
    pub unitary: CMat,
    /// Block-diagonal part (A-level preserved).
    pub u_diag: CMat,
    /// Off-diagonal part.
    pub u_od: CMat,
    pub t: BinaryMatrix,
    pub sch_u: usize,
    pub sch_od: usize,
    pub rank: usize,
    pub xor: RankReport,
    pub binary: RankReport,
    pub nonneg: RankReport,
    /// Distinct-block expansion of `U_od`.
    pub grouping_q: usize,
    /// Expansion of `U_od` built from the binary-rank certificate.
    pub from_binary: PartialPermExpansion,
}

impl Example1Report {
    pub fn ppr_upper(&self) -> usize {
        self.grouping_q.min(self.from_binary.q())
    }

    pub fn rank_bounds_schmidt(&self) -> bool {
        self.rank >= self.sch_od
    }

    pub fn binary_matches_ppr(&self) -> bool {
        self.binary.value() == Some(self.ppr_upper())
    }

    pub fn schmidt_gap_ok(&self) -> bool {
        self.sch_od.abs_diff(self.sch_u) <= 1
    }

    pub fn relations_hold(&self) -> bool {
        self.rank_bounds_schmidt() && self.binary_matches_ppr() && self.schmidt_gap_ok()
    }

    pub fn table(&self) -> String {
        let fmt = |r: &RankReport| match r.value() {
            Some(v) => v.to_string(),
            None => format!("[{}, {}]", r.lower, r.upper),
        };
        let mut s = String::new();
        let rows = [
            ("rank(T)", self.rank.to_string()),
            ("xor(T)", fmt(&self.xor)),
            ("nonneg(T)", fmt(&self.nonneg)),
            ("binary(T)", fmt(&self.binary)),
            ("Sch(U)", self.sch_u.to_string()),
            ("Sch(U_od)", self.sch_od.to_string()),
            ("ppr upper(U_od)", self.ppr_upper().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<16} {v}");
        }
        let _ = writeln!(s, "{:<16} {}", "relations", if self.relations_hold() { "hold" } else { "VIOLATED" });
        s
    }
}

/// Analyzes `Σ_i P_i ⊗ (I − C_i) + X_i ⊗ C_i` for diagonal 0/1 blocks `C_i`.
pub fn analyze_example1(blocks: &[Vec<bool>]) -> Result<Example1Report> {
    let m = blocks.len();
    let db = blocks.first().map(|b| b.len()).unwrap_or(0);
    if m == 0 || db == 0 || blocks.iter().any(|b| b.len() != db) {
        return Err(SynthError::dim("blocks must be a nonempty list of equal-length diagonals"));
    }
    let da = 2 * m;
    let u = example1_unitary(blocks);
    let mut u_diag = u.clone();
    let mut u_od = u.clone();
    for i in 0..da * db {
        for j in 0..da * db {
            if i / db == j / db {
                u_od[(i, j)] = c(0.0, 0.0);
            } else {
                u_diag[(i, j)] = c(0.0, 0.0);
            }
        }
    }
    let t = BinaryMatrix::new(m, db, blocks.concat())?;
    let opts = RankOptions::default();
    let binary = binary_rank(&t, opts);
    let od_map = BipartiteMap::from_matrix(&u_od, da, db)?;
    let grouping_q = pp_expansion_map(&od_map)?.q();
    let terms = binary
        .certificate
        .iter()
        .map(|f| PpTerm {
            a: (0..m).filter(|&i| f.u[i]).flat_map(|i| [(2 * i + 1, 2 * i), (2 * i, 2 * i + 1)]).collect(),
            b: (0..db).filter(|&k| f.v[k]).map(|k| (k, k)).collect(),
        })
        .map(|mut t| {
            t.a.sort_by_key(|p| p.1);
            t
        })
        .collect();
    let sch_od = schmidt_rank(&u_od, da, db)?;
    let from_binary = PartialPermExpansion {
        da,
        db,
        terms,
        schmidt_rank: sch_od,
        bound_components: [
            da * da,
            db * db,
            da * sch_od,
            db * sch_od,
            1usize.checked_shl(sch_od as u32).unwrap_or(usize::MAX),
        ],
    };
    if !from_binary.reproduces(&od_map) {
        return Err(SynthError::Infeasible("binary certificate does not expand the off-diagonal part".into()));
    }
    Ok(Example1Report {
        da,
        db,
        sch_u: schmidt_rank(&u, da, db)?,
        sch_od,
        rank: real_rank(&t),
        xor: xor_rank(&t),
        nonneg: nonneg_rank(&t, opts),
        binary,
        grouping_q,
        from_binary,
        unitary: u,
        u_diag,
        u_od,
        t,
    })
}

#[derive(Debug, Clone)]
pub struct SwapSandwich {
    pub d: usize,
    /// `V_CB ⊗ I_D` on parties `[C, D, B]`.
    pub unitary: UnitaryMatrix,
    /// `SWAP_DB · V_CD · SWAP_DB` with each swap as three controlled gates;
    /// C and D share a site.
    pub circuit: Circuit,
}

/// Builds `V_CB ⊗ I_D` from six controlled permutations and one gate local
/// to the C, D site. Across the `CD | B` cut its Schmidt rank is that of
/// `V`, up to `d²`.
pub fn swap_sandwich(v: &CMat, d: usize) -> Result<SwapSandwich> {
    if v.shape() != (d * d, d * d) {
        return Err(SynthError::dim(format!("V must be {0}x{0}", d * d)));
    }
    require_unitary(v, 1e-9)?;
    let dims = vec![d, d, d];
    let space = PartySpace::new(&[("C", d), ("D", d), ("B", d)])?.with_site(0, "CD").with_site(1, "CD");
    let swap = decompose_perm3(&ComplexPermutation::from_matrix(&swap_matrix(d), vec![d, d])?)?;
    let remap = |g: GateRecord| match g {
        GateRecord::Controlled(cg) => GateRecord::Controlled(ControlledGate {
            controls: cg.controls.iter().map(|w| w + 1).collect(),
            targets: cg.targets.iter().map(|w| w + 1).collect(),
            branches: cg.branches,
        }),
        other => other,
    };
    let swaps: Vec<GateRecord> = swap.gates().into_iter().map(remap).collect();
    let mut gates = swaps.clone();
    gates.push(GateRecord::Local(LocalGate { wires: vec![0, 1], matrix: v.clone() }));
    gates.extend(swaps);
    let unitary = UnitaryMatrix::new(dims.clone(), embed(&[0, 2], v, &dims))?;
    Ok(SwapSandwich { d, unitary, circuit: Circuit::from_gates(space, gates) })
}

impl SwapSandwich {
    pub fn schmidt_rank_cd_b(&self) -> Result<usize> {
        schmidt_rank_cut(&self.unitary.matrix, &self.unitary.dims, 2)
    }
}
