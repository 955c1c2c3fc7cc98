//! Expansions of bipartite (partial) permutations as sums of tensor
//! products of partial permutations.

use std::collections::BTreeSet;

use crate::error::{Result, SynthError};
use crate::matcore::{c, zeros, CMat};
use crate::permdecomp::ComplexPermutation;
use crate::schmidt::schmidt_rank;

/// A bipartite partial permutation: `map[a·d_B + b]` is the row hit by that
/// column, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteMap {
    pub da: usize,
    pub db: usize,
    pub map: Vec<Option<usize>>,
}

impl BipartiteMap {
    pub fn new(da: usize, db: usize, map: Vec<Option<usize>>) -> Result<Self> {
        let n = da * db;
        if map.len() != n {
            return Err(SynthError::dim(format!("map of length {} for dims {da}x{db}", map.len())));
        }
        let mut seen = vec![false; n];
        for &r in map.iter().flatten() {
            if r >= n || seen[r] {
                return Err(SynthError::pre("not a partial permutation"));
            }
            seen[r] = true;
        }
        Ok(BipartiteMap { da, db, map })
    }

    pub fn from_permutation(p: &ComplexPermutation) -> Result<Self> {
        if p.dims.len() != 2 {
            return Err(SynthError::dim(format!("expected a bipartite permutation, got dims {:?}", p.dims)));
        }
        if !p.is_plain() {
            return Err(SynthError::pre("expansion needs a permutation without phases"));
        }
        BipartiteMap::new(p.dims[0], p.dims[1], p.targets.iter().map(|&t| Some(t)).collect())
    }

    /// Reads a 0/1 matrix with at most one 1 per row and column.
    pub fn from_matrix(m: &CMat, da: usize, db: usize) -> Result<Self> {
        let n = da * db;
        if m.shape() != (n, n) {
            return Err(SynthError::dim(format!("matrix shape {:?} does not match {da}x{db}", m.shape())));
        }
        let mut map = vec![None; n];
        for (j, slot) in map.iter_mut().enumerate() {
            for i in 0..n {
                let v = m[(i, j)];
                if v.norm() <= 1e-12 {
                    continue;
                }
                if (v - c(1.0, 0.0)).norm() > 1e-12 || slot.is_some() {
                    return Err(SynthError::pre(format!("column {j} is not a 0/1 partial permutation column")));
                }
                *slot = Some(i);
            }
        }
        BipartiteMap::new(da, db, map)
    }

    pub fn matrix(&self) -> CMat {
        let n = self.da * self.db;
        let mut m = zeros(n, n);
        for (j, r) in self.map.iter().enumerate() {
            if let Some(r) = r {
                m[(*r, j)] = c(1.0, 0.0);
            }
        }
        m
    }

    pub fn is_total(&self) -> bool {
        self.map.iter().all(|r| r.is_some())
    }
}

/// `A ⊗ B` with `A = Σ |out⟩⟨in|` over `a`, likewise for `B`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PpTerm {
    /// `(out, in)` pairs, sorted by `in`.
    pub a: Vec<(usize, usize)>,
    pub b: Vec<(usize, usize)>,
}

fn ins(v: &[(usize, usize)]) -> BTreeSet<usize> {
    v.iter().map(|p| p.1).collect()
}

fn outs(v: &[(usize, usize)]) -> BTreeSet<usize> {
    v.iter().map(|p| p.0).collect()
}

fn map_of(v: &[(usize, usize)], x: usize) -> Option<usize> {
    v.iter().find(|p| p.1 == x).map(|p| p.0)
}

impl PpTerm {
    pub fn rows_in(&self) -> BTreeSet<usize> {
        ins(&self.a)
    }

    pub fn rows_out(&self) -> BTreeSet<usize> {
        outs(&self.a)
    }

    pub fn cols_in(&self) -> BTreeSet<usize> {
        ins(&self.b)
    }

    pub fn cols_out(&self) -> BTreeSet<usize> {
        outs(&self.b)
    }

    pub fn map_a(&self, a: usize) -> Option<usize> {
        map_of(&self.a, a)
    }

    pub fn map_b(&self, b: usize) -> Option<usize> {
        map_of(&self.b, b)
    }

    /// Input and output supports coincide on both sides.
    pub fn is_in_place(&self) -> bool {
        self.rows_in() == self.rows_out() && self.cols_in() == self.cols_out()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialPermExpansion {
    pub da: usize,
    pub db: usize,
    pub terms: Vec<PpTerm>,
    pub schmidt_rank: usize,
    /// `d_A², d_B², d_A·r, d_B·r, 2^r` (the last saturating).
    pub bound_components: [usize; 5],
}

impl PartialPermExpansion {
    pub fn q(&self) -> usize {
        self.terms.len()
    }

    pub fn bound(&self) -> usize {
        *self.bound_components.iter().min().expect("five components")
    }

    /// `Σ_j A_j ⊗ B_j` as a column map; `Err` when two terms hit one entry.
    pub fn reconstruct(&self) -> Result<BipartiteMap> {
        let n = self.da * self.db;
        let mut map = vec![None; n];
        for t in &self.terms {
            for &(ao, ai) in &t.a {
                for &(bo, bi) in &t.b {
                    let slot = &mut map[ai * self.db + bi];
                    if slot.is_some() {
                        return Err(SynthError::pre("expansion terms overlap"));
                    }
                    *slot = Some(ao * self.db + bo);
                }
            }
        }
        BipartiteMap::new(self.da, self.db, map)
    }

    pub fn reproduces(&self, u: &BipartiteMap) -> bool {
        self.reconstruct().map(|m| &m == u).unwrap_or(false)
    }
}

fn is_partial_perm(v: &[(usize, usize)]) -> bool {
    let o = outs(v);
    let i = ins(v);
    o.len() == v.len() && i.len() == v.len()
}

/// Groups equal nonzero blocks. With `a_side = true` the blocks are the
/// `d_B × d_B` blocks indexed by A-entries, otherwise the `d_A × d_A`
/// blocks indexed by B-entries.
fn group_blocks(u: &BipartiteMap, a_side: bool) -> Vec<PpTerm> {
    let (da, db) = (u.da, u.db);
    let (outer, inner) = if a_side { (da, db) } else { (db, da) };
    let mut keys: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
    for o_out in 0..outer {
        for o_in in 0..outer {
            let mut block = Vec::new();
            for i_in in 0..inner {
                let col = if a_side { o_in * db + i_in } else { i_in * db + o_in };
                if let Some(r) = u.map[col] {
                    let (ra, rb) = (r / db, r % db);
                    let (r_outer, r_inner) = if a_side { (ra, rb) } else { (rb, ra) };
                    if r_outer == o_out {
                        block.push((r_inner, i_in));
                    }
                }
            }
            if block.is_empty() {
                continue;
            }
            match keys.iter().position(|k| *k == block) {
                Some(i) => members[i].push((o_out, o_in)),
                None => {
                    keys.push(block);
                    members.push(vec![(o_out, o_in)]);
                }
            }
        }
    }
    keys.into_iter()
        .zip(members)
        .map(|(block, mut m)| {
            m.sort_by_key(|p| p.1);
            if a_side {
                PpTerm { a: m, b: block }
            } else {
                PpTerm { a: block, b: m }
            }
        })
        .collect()
}

/// Distinct-block expansion of a bipartite partial permutation, taking the
/// smaller of the A-indexed and B-indexed groupings.
pub fn pp_expansion_map(u: &BipartiteMap) -> Result<PartialPermExpansion> {
    let a_terms = group_blocks(u, true);
    let b_terms = group_blocks(u, false);
    let terms = if b_terms.len() < a_terms.len() { b_terms } else { a_terms };
    for t in &terms {
        if !is_partial_perm(&t.a) || !is_partial_perm(&t.b) {
            return Err(SynthError::Infeasible("block grouping produced a non-partial-permutation term".into()));
        }
    }
    let r = schmidt_rank(&u.matrix(), u.da, u.db)?;
    let pow = if r >= usize::BITS as usize { usize::MAX } else { 1usize << r };
    let exp = PartialPermExpansion {
        da: u.da,
        db: u.db,
        terms,
        schmidt_rank: r,
        bound_components: [u.da * u.da, u.db * u.db, u.da * r, u.db * r, pow],
    };
    if !exp.reproduces(u) {
        return Err(SynthError::Infeasible("expansion does not reproduce its source".into()));
    }
    Ok(exp)
}

pub fn pp_expansion(u: &ComplexPermutation) -> Result<PartialPermExpansion> {
    pp_expansion_map(&BipartiteMap::from_permutation(u)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{example2_unitary, random_permutation, swap_matrix};
    use crate::matcore::{kron, perm_matrix};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn perm_of(m: &CMat, da: usize, db: usize) -> ComplexPermutation {
        ComplexPermutation::from_matrix(m, vec![da, db]).unwrap()
    }

    #[test]
    fn product_permutation_is_one_term() {
        let m = kron(&perm_matrix(&[2, 0, 1]), &perm_matrix(&[1, 0]));
        let e = pp_expansion(&perm_of(&m, 3, 2)).unwrap();
        assert_eq!(e.q(), 1);
        assert_eq!(e.schmidt_rank, 1);
    }

    #[test]
    fn swap2_has_four_terms() {
        let e = pp_expansion(&perm_of(&swap_matrix(2), 2, 2)).unwrap();
        assert_eq!(e.q(), 4);
        assert_eq!(e.bound_components, [4, 4, 8, 8, 16]);
        assert_eq!(e.bound(), 4);
    }

    #[test]
    fn example2_off_diagonal_has_three_terms() {
        let u = example2_unitary();
        let mut od = u.clone();
        for a in 0..6 {
            for x in 0..3 {
                for y in 0..3 {
                    od[(a * 3 + x, a * 3 + y)] = c(0.0, 0.0);
                }
            }
        }
        let e = pp_expansion_map(&BipartiteMap::from_matrix(&od, 6, 3).unwrap()).unwrap();
        assert_eq!(e.q(), 3);
        assert_eq!(e.schmidt_rank, 3);
        // Full U: each column level has its own A-side permutation.
        let full = pp_expansion(&perm_of(&u, 6, 3)).unwrap();
        assert_eq!(full.q(), 3);
        assert!(full.terms.iter().all(|t| t.is_in_place()));
    }

    #[test]
    fn rejects_phases_and_overlap() {
        let mut p = ComplexPermutation::identity(vec![2, 2]);
        p.phases[1] = c(-1.0, 0.0);
        assert!(pp_expansion(&p).is_err());
        assert!(BipartiteMap::new(2, 2, vec![Some(0), Some(0), None, None]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn expansion_within_bounds(seed in any::<u64>(), da in 2usize..6, db in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = ComplexPermutation::plain(vec![da, db], random_permutation(da * db, &mut rng)).unwrap();
            let e = pp_expansion(&p).unwrap();
            prop_assert!(e.q() <= e.bound());
            prop_assert!(e.reproduces(&BipartiteMap::from_permutation(&p).unwrap()));
        }
    }
}
