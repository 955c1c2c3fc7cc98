//! Seeded instance generators and named example operators.
//!
//! `haar_unitary` draws an `n × n` matrix of independent complex Gaussians
//! (real and imaginary parts `N(0, 1/2)`, sampled row-major from a
//! `ChaCha8Rng`), takes its QR factorization and multiplies column `j` of `Q`
//! by the phase of `R[j, j]`.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::matcore::{c, direct_sum, identity, kron, perm_matrix, zeros, CMat, C64};

pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        entries.push(c(re * s, im * s));
    }
    let g = CMat::from_row_slice(n, n, &entries);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn random_phases<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n).map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))).collect()
}

/// `Σ_j |j><j| ⊗ U_j` with Haar-random branches.
pub fn random_controlled_a<R: Rng + ?Sized>(da: usize, db: usize, rng: &mut R) -> CMat {
    let blocks: Vec<CMat> = (0..da).map(|_| haar_unitary(db, rng)).collect();
    direct_sum(&blocks)
}

/// `Σ_k U_k ⊗ |k><k|` with Haar-random branches.
pub fn random_controlled_b<R: Rng + ?Sized>(da: usize, db: usize, rng: &mut R) -> CMat {
    let branches: Vec<CMat> = (0..db).map(|_| haar_unitary(da, rng)).collect();
    controlled_b(&branches)
}

/// `Σ_k U_k ⊗ |k><k|` for the given `d_A × d_A` branches.
pub fn controlled_b(branches: &[CMat]) -> CMat {
    let db = branches.len();
    let da = branches.first().map(|b| b.nrows()).unwrap_or(0);
    let mut m = zeros(da * db, da * db);
    for (k, u) in branches.iter().enumerate() {
        for i in 0..da {
            for j in 0..da {
                m[(i * db + k, j * db + k)] = u[(i, j)];
            }
        }
    }
    m
}

pub fn swap_matrix(d: usize) -> CMat {
    let perm: Vec<usize> = (0..d * d).map(|i| (i % d) * d + i / d).collect();
    perm_matrix(&perm)
}

pub fn cnot_matrix() -> CMat {
    perm_matrix(&[0, 1, 3, 2])
}

pub fn pauli_x() -> CMat {
    perm_matrix(&[1, 0])
}

pub fn pauli_z() -> CMat {
    crate::matcore::diag(&[c(1.0, 0.0), c(-1.0, 0.0)])
}

/// The permutation `Σ_i (P_i) ⊗ (I − C_i) + (X_i) ⊗ C_i` on `2M × d_B`, where
/// `P_i` projects onto A-levels `{2i, 2i+1}`, `X_i` swaps them, and `C_i` is the
/// diagonal 0/1 matrix `diag(blocks[i])`.
pub fn example1_unitary(blocks: &[Vec<bool>]) -> CMat {
    let m = blocks.len();
    let db = blocks.first().map(|b| b.len()).unwrap_or(0);
    let da = 2 * m;
    let mut perm: Vec<usize> = (0..da * db).collect();
    for (i, ci) in blocks.iter().enumerate() {
        for (k, &on) in ci.iter().enumerate() {
            if on {
                perm[(2 * i) * db + k] = (2 * i + 1) * db + k;
                perm[(2 * i + 1) * db + k] = (2 * i) * db + k;
            }
        }
    }
    perm_matrix(&perm)
}

/// The diagonal blocks of the 6 × 3 instance whose `T` matrix is
/// `[[1,1,0],[1,0,1],[0,1,1]]`.
pub fn example2_blocks() -> Vec<Vec<bool>> {
    vec![vec![true, true, false], vec![true, false, true], vec![false, true, true]]
}

pub fn example2_unitary() -> CMat {
    example1_unitary(&example2_blocks())
}

/// The two B-controlled factors `(V, W)` with `U = V·W` for the 6 × 3 instance.
pub fn example2_factors() -> (CMat, CMat) {
    let x = pauli_x();
    let i2 = identity(2);
    let i6 = identity(6);
    let d = |v: [f64; 3]| crate::matcore::diag(&[c(v[0], 0.0), c(v[1], 0.0), c(v[2], 0.0)]);
    let v =
        kron(&direct_sum(&[x.clone(), x.clone(), i2.clone()]), &d([1.0, 1.0, 0.0])) + kron(&i6, &d([0.0, 0.0, 1.0]));
    let w = kron(&direct_sum(&[i2, x.clone(), x]), &d([0.0, 1.0, 1.0])) + kron(&i6, &d([1.0, 0.0, 0.0]));
    (v, w)
}
