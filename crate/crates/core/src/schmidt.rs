//! Operator-Schmidt decomposition by realignment.
//!
//! The realigned matrix `R` of an operator `U` on `d_A × d_B` has entries
//! `R[a·d_A + a', b·d_B + b'] = U[a·d_B + b, a'·d_B + b']`, so that
//! `U = Σ_j s_j A_j ⊗ B_j` corresponds to `R = Σ_j s_j vec(A_j) vec(B_j)ᵀ`.
//!
//! For example, on two qubits the CNOT matrix realigns to a 4×4 matrix with
//! nonzero rows `(0,0)` and `(1,1)`, holding `vec(I)` and `vec(X)`, so its
//! Schmidt rank is 2.

use crate::error::{Result, SynthError};
use crate::matcore::{c, kron, svd, zeros, CMat};

/// Default singular-value threshold, relative to the largest singular value.
pub const SCHMIDT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    pub rank: usize,
    /// Positive, nonincreasing.
    pub coefficients: Vec<f64>,
    /// `(A_j, B_j)`, each orthonormal under the trace inner product.
    pub terms: Vec<(CMat, CMat)>,
}

impl SchmidtDecomposition {
    pub fn reconstruct(&self) -> CMat {
        let (da, db) = match self.terms.first() {
            Some((a, b)) => (a.nrows(), b.nrows()),
            None => return zeros(0, 0),
        };
        let mut m = zeros(da * db, da * db);
        for (s, (a, b)) in self.coefficients.iter().zip(&self.terms) {
            m += kron(a, b) * c(*s, 0.0);
        }
        m
    }
}

pub fn realign(u: &CMat, da: usize, db: usize) -> Result<CMat> {
    let n = da * db;
    if u.shape() != (n, n) {
        return Err(SynthError::dim(format!("operator is {}x{}, expected {n}x{n}", u.nrows(), u.ncols())));
    }
    let mut r = zeros(da * da, db * db);
    for a in 0..da {
        for a2 in 0..da {
            for b in 0..db {
                for b2 in 0..db {
                    r[(a * da + a2, b * db + b2)] = u[(a * db + b, a2 * db + b2)];
                }
            }
        }
    }
    Ok(r)
}

pub fn operator_schmidt(u: &CMat, da: usize, db: usize, svtol: f64) -> Result<SchmidtDecomposition> {
    if da == 0 || db == 0 {
        return Err(SynthError::dim("dimensions must be positive"));
    }
    let r = realign(u, da, db)?;
    let (left, sv, right) = svd(&r);
    let smax = sv.first().copied().unwrap_or(0.0);
    let mut coefficients = Vec::new();
    let mut terms = Vec::new();
    for (k, &s) in sv.iter().enumerate() {
        if smax == 0.0 || s <= svtol * smax {
            break;
        }
        let a = CMat::from_fn(da, da, |i, j| left[(i * da + j, k)]);
        let b = CMat::from_fn(db, db, |i, j| right[(i * db + j, k)].conj());
        coefficients.push(s);
        terms.push((a, b));
    }
    Ok(SchmidtDecomposition { rank: coefficients.len(), coefficients, terms })
}

/// Rank only: counts singular values of the realigned matrix above
/// [`SCHMIDT_TOL`] relative to the largest, without forming the terms.
pub fn schmidt_rank(u: &CMat, da: usize, db: usize) -> Result<usize> {
    if da == 0 || db == 0 {
        return Err(SynthError::dim("dimensions must be positive"));
    }
    let sv = realign(u, da, db)?.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > SCHMIDT_TOL * smax).count())
}

/// Schmidt rank across the cut between the first `k` parties and the rest.
pub fn schmidt_rank_cut(u: &CMat, dims: &[usize], k: usize) -> Result<usize> {
    if k == 0 || k >= dims.len() {
        return Err(SynthError::dim(format!("cut {k} must leave parties on both sides of {dims:?}")));
    }
    let da: usize = dims[..k].iter().product();
    let db: usize = dims[k..].iter().product();
    schmidt_rank(u, da, db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{cnot_matrix, haar_unitary, random_controlled_a, swap_matrix};
    use crate::matcore::{identity, max_abs_diff};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn realignment_of_cnot() {
        let r = realign(&cnot_matrix(), 2, 2).unwrap();
        // Row (0,0) holds vec(I); row (1,1) holds vec(X).
        let expect = [[1.0, 0.0, 0.0, 1.0], [0.0; 4], [0.0; 4], [0.0, 1.0, 1.0, 0.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(r[(i, j)], c(v, 0.0));
            }
        }
    }

    #[test]
    fn basic_ranks() {
        assert_eq!(schmidt_rank(&identity(6), 2, 3).unwrap(), 1);
        assert_eq!(schmidt_rank(&cnot_matrix(), 2, 2).unwrap(), 2);
        assert_eq!(schmidt_rank(&swap_matrix(2), 2, 2).unwrap(), 4);
        assert_eq!(schmidt_rank(&swap_matrix(3), 3, 3).unwrap(), 9);
        assert!(schmidt_rank(&identity(5), 2, 3).is_err());
    }

    #[test]
    fn decomposition_is_orthonormal_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = haar_unitary(6, &mut rng);
        let d = operator_schmidt(&u, 3, 2, SCHMIDT_TOL).unwrap();
        assert_eq!(d.rank, 4);
        assert!(max_abs_diff(&d.reconstruct(), &u) <= 1e-8);
        for i in 0..d.rank {
            for j in 0..d.rank {
                let ga = (d.terms[i].0.adjoint() * &d.terms[j].0).trace();
                let gb = (d.terms[i].1.adjoint() * &d.terms[j].1).trace();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((ga - c(e, 0.0)).norm() < 1e-10);
                assert!((gb - c(e, 0.0)).norm() < 1e-10);
            }
        }
        assert!(d.coefficients.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn multiparty_cut() {
        let u = kron(&swap_matrix(2), &identity(2));
        assert_eq!(schmidt_rank_cut(&u, &[2, 2, 2], 1).unwrap(), 4);
        assert_eq!(schmidt_rank_cut(&u, &[2, 2, 2], 2).unwrap(), 1);
    }

    #[test]
    fn rank_agrees_with_full_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for (da, db) in [(2, 3), (3, 3), (4, 2)] {
            let u = haar_unitary(da * db, &mut rng);
            let ctrl = random_controlled_a(da, db, &mut rng);
            let perm = crate::matcore::perm_matrix(&crate::generators::random_permutation(da * db, &mut rng));
            for m in [u, ctrl, perm] {
                assert_eq!(schmidt_rank(&m, da, db).unwrap(), operator_schmidt(&m, da, db, SCHMIDT_TOL).unwrap().rank);
            }
        }
        assert_eq!(schmidt_rank(&zeros(4, 4), 2, 2).unwrap(), 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn controlled_gates_have_rank_at_most_control_dim(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_controlled_a(da, db, &mut rng);
            prop_assert!(schmidt_rank(&g, da, db).unwrap() <= da);
        }

        #[test]
        fn swap_times_controlled_has_full_rank(seed in any::<u64>(), d in 2usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_controlled_a(d, d, &mut rng);
            prop_assert_eq!(schmidt_rank(&(swap_matrix(d) * g), d, d).unwrap(), d * d);
        }

        #[test]
        fn rank_is_invariant_under_local_unitaries(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_controlled_a(3, 2, &mut rng);
            let r0 = schmidt_rank(&u, 3, 2).unwrap();
            let l = kron(&haar_unitary(3, &mut rng), &haar_unitary(2, &mut rng));
            let r = kron(&haar_unitary(3, &mut rng), &haar_unitary(2, &mut rng));
            prop_assert_eq!(schmidt_rank(&(l * u * r), 3, 2).unwrap(), r0);
        }
    }
}
