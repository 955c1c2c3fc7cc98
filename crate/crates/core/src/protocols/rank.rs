//! Ranks of binary matrices: real rank, XOR (GF(2)) rank, binary rank as an
//! exact partition into all-ones rectangles, and nonnegative-rank intervals.

use std::time::{Duration, Instant};

use crate::error::{Result, SynthError};
use crate::matcore::{c, svd, CMat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub bits: Vec<bool>,
}

impl BinaryMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(SynthError::dim(format!("{} bits for a {rows}x{cols} matrix", bits.len())));
        }
        Ok(BinaryMatrix { rows, cols, bits })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix { rows, cols, bits: vec![false; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut bits = Vec::with_capacity(r * cols);
        for row in rows {
            if row.len() != cols {
                return Err(SynthError::dim("ragged rows"));
            }
            for &x in row {
                match x {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    _ => return Err(SynthError::pre(format!("entry {x} is not binary"))),
                }
            }
        }
        BinaryMatrix::new(r, cols, bits)
    }

    /// Parses a row-major string of `0`/`1` characters.
    pub fn from_bit_string(rows: usize, cols: usize, s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(SynthError::pre(format!("bit string contains {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        BinaryMatrix::new(rows, cols, bits)
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> Vec<bool> {
        self.bits[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn transpose(&self) -> BinaryMatrix {
        let mut t = BinaryMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| c(if self.get(i, j) { 1.0 } else { 0.0 }, 0.0))
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankKind {
    Rank,
    Xor,
    Binary,
    Nonneg,
}

impl RankKind {
    pub fn name(self) -> &'static str {
        match self {
            RankKind::Rank => "rank",
            RankKind::Xor => "xor",
            RankKind::Binary => "binary",
            RankKind::Nonneg => "nonneg",
        }
    }
}

impl std::str::FromStr for RankKind {
    type Err = SynthError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(RankKind::Rank),
            "xor" => Ok(RankKind::Xor),
            "binary" => Ok(RankKind::Binary),
            "nonneg" => Ok(RankKind::Nonneg),
            other => Err(SynthError::pre(format!("unknown rank kind {other:?}"))),
        }
    }
}

/// Rank-1 binary term `u vᵀ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub u: Vec<bool>,
    pub v: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankReport {
    pub kind: RankKind,
    pub lower: usize,
    pub upper: usize,
    /// Terms attaining `upper`: XOR-summed for `Xor`, summed otherwise.
    /// Empty for `Rank`.
    pub certificate: Vec<Factor>,
    /// Row indices of a GF(2) basis, for `Xor`.
    pub pivots: Vec<usize>,
}

impl RankReport {
    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn value(&self) -> Option<usize> {
        self.is_exact().then_some(self.upper)
    }

    /// Re-sums the certificate and compares it with `t`.
    pub fn verify_certificate(&self, t: &BinaryMatrix) -> bool {
        if self.kind == RankKind::Rank {
            return true;
        }
        if self.certificate.len() != self.upper {
            return false;
        }
        let mut acc = vec![0u32; t.rows * t.cols];
        for f in &self.certificate {
            if f.u.len() != t.rows || f.v.len() != t.cols {
                return false;
            }
            for i in (0..t.rows).filter(|&i| f.u[i]) {
                for j in (0..t.cols).filter(|&j| f.v[j]) {
                    acc[i * t.cols + j] += 1;
                }
            }
        }
        acc.iter().zip(&t.bits).all(|(&s, &b)| {
            let v = if self.kind == RankKind::Xor { s % 2 } else { s };
            v == b as u32
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RankOptions {
    /// Wall-clock budget for the exact binary-rank search.
    pub time_budget: Duration,
    /// Exact search runs only when `min(rows, cols)` is at most this.
    pub exact_cutoff: usize,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions { time_budget: Duration::from_secs(10), exact_cutoff: 12 }
    }
}

/// Numerical rank over the reals, singular values above `1e-9·σ_max`.
pub fn real_rank(t: &BinaryMatrix) -> usize {
    if t.count_ones() == 0 {
        return 0;
    }
    let (_, s, _) = svd(&t.to_cmat());
    let smax = s[0];
    s.iter().filter(|&&x| x > 1e-9 * smax).count()
}

/// GF(2) rank with a factorization into rank-1 terms built on a greedy
/// basis of original rows.
pub fn xor_rank(t: &BinaryMatrix) -> RankReport {
    struct Reduced {
        pivot: usize,
        vec: Vec<bool>,
        combo: Vec<bool>,
    }
    let max_basis = t.rows.min(t.cols);
    let mut reduced: Vec<Reduced> = Vec::new();
    let mut pivots = Vec::new();
    let mut coeffs: Vec<Vec<bool>> = Vec::with_capacity(t.rows);
    for i in 0..t.rows {
        let mut v = t.row(i);
        let mut combo = vec![false; max_basis];
        for r in &reduced {
            if v[r.pivot] {
                for (x, &y) in v.iter_mut().zip(&r.vec) {
                    *x ^= y;
                }
                for (x, &y) in combo.iter_mut().zip(&r.combo) {
                    *x ^= y;
                }
            }
        }
        match v.iter().position(|&b| b) {
            Some(p) => {
                let k = pivots.len();
                pivots.push(i);
                let mut own = vec![false; max_basis];
                own[k] = true;
                // The reduced vector is row i XOR the rows in `combo`.
                let mut rc = combo.clone();
                rc[k] ^= true;
                reduced.push(Reduced { pivot: p, vec: v, combo: rc });
                coeffs.push(own);
            }
            None => coeffs.push(combo),
        }
    }
    let rank = pivots.len();
    let certificate =
        (0..rank).map(|k| Factor { u: coeffs.iter().map(|c| c[k]).collect(), v: t.row(pivots[k]) }).collect();
    RankReport { kind: RankKind::Xor, lower: rank, upper: rank, certificate, pivots }
}

fn distinct_nonzero_rows(t: &BinaryMatrix) -> Vec<Vec<bool>> {
    let mut out: Vec<Vec<bool>> = Vec::new();
    for i in 0..t.rows {
        let r = t.row(i);
        if r.iter().any(|&b| b) && !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

/// One term per distinct nonzero row.
fn row_grouping(t: &BinaryMatrix) -> Vec<Factor> {
    distinct_nonzero_rows(t)
        .into_iter()
        .map(|v| Factor { u: (0..t.rows).map(|i| t.row(i) == v).collect(), v })
        .collect()
}

fn transpose_factors(fs: Vec<Factor>) -> Vec<Factor> {
    fs.into_iter().map(|f| Factor { u: f.v, v: f.u }).collect()
}

struct Search {
    rows: Vec<u64>,
    k: usize,
    patterns: Vec<u64>,
    deadline: Instant,
    nodes: u64,
    timed_out: bool,
}

impl Search {
    fn run(&mut self, row: usize, rem: u64) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(4096) && Instant::now() > self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            return false;
        }
        if rem == 0 {
            return match self.rows.get(row + 1) {
                Some(&next) => self.run(row + 1, next),
                None => true,
            };
        }
        let low = rem & rem.wrapping_neg();
        for idx in 0..self.patterns.len() {
            let p = self.patterns[idx];
            if p & low != 0 && p & !rem == 0 && self.run(row, rem ^ p) {
                return true;
            }
        }
        if self.patterns.len() < self.k {
            let rest = rem ^ low;
            let mut sub = rest;
            loop {
                let p = sub | low;
                if !self.patterns.contains(&p) {
                    self.patterns.push(p);
                    if self.run(row, rem ^ p) {
                        return true;
                    }
                    self.patterns.pop();
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        false
    }
}

/// Splits each row into chosen patterns (exact disjoint union).
fn split_row(row: u64, patterns: &[u64]) -> Option<Vec<usize>> {
    if row == 0 {
        return Some(vec![]);
    }
    let low = row & row.wrapping_neg();
    for (i, &p) in patterns.iter().enumerate() {
        if p & low != 0 && p & !row == 0 {
            if let Some(mut rest) = split_row(row ^ p, patterns) {
                rest.push(i);
                return Some(rest);
            }
        }
    }
    None
}

/// Minimum number of disjoint all-ones rectangles summing to `t`.
pub fn binary_rank(t: &BinaryMatrix, opts: RankOptions) -> RankReport {
    let (work, transposed) = if t.cols <= t.rows { (t.clone(), false) } else { (t.transpose(), true) };
    let by_rows = row_grouping(t);
    let by_cols = transpose_factors(row_grouping(&t.transpose()));
    let mut best = if by_cols.len() < by_rows.len() { by_cols } else { by_rows };
    let upper = best.len();
    let lower = real_rank(t).max(xor_rank(t).upper);
    let report = |lower: usize, cert: Vec<Factor>| RankReport {
        kind: RankKind::Binary,
        lower,
        upper: cert.len(),
        certificate: cert,
        pivots: vec![],
    };
    if lower >= upper || work.cols > opts.exact_cutoff.min(64) {
        return report(lower.min(upper), best);
    }
    let mut rows: Vec<u64> = distinct_nonzero_rows(&work)
        .iter()
        .map(|r| r.iter().enumerate().fold(0u64, |m, (j, &b)| if b { m | 1 << j } else { m }))
        .collect();
    rows.sort_by_key(|r| std::cmp::Reverse(r.count_ones()));
    let deadline = Instant::now() + opts.time_budget;
    let mut proven = lower;
    for k in lower..upper {
        let mut s = Search { rows: rows.clone(), k, patterns: vec![], deadline, nodes: 0, timed_out: false };
        let found = s.run(0, rows[0]);
        if s.timed_out {
            return report(proven, best);
        }
        if found {
            let pats = s.patterns;
            let mut fs: Vec<Factor> = pats
                .iter()
                .map(|&p| Factor { u: vec![false; work.rows], v: (0..work.cols).map(|j| p >> j & 1 == 1).collect() })
                .collect();
            for i in 0..work.rows {
                let m = work.row(i).iter().enumerate().fold(0u64, |m, (j, &b)| if b { m | 1 << j } else { m });
                for pi in split_row(m, &pats).expect("every row splits into the found patterns") {
                    fs[pi].u[i] = true;
                }
            }
            best = if transposed { transpose_factors(fs) } else { fs };
            return report(k, best);
        }
        proven = k + 1;
    }
    report(proven, best)
}

/// Nonnegative rank of a binary matrix as `[real rank, binary-rank upper]`.
pub fn nonneg_rank(t: &BinaryMatrix, opts: RankOptions) -> RankReport {
    let b = binary_rank(t, opts);
    let lower = real_rank(t);
    RankReport { kind: RankKind::Nonneg, lower, upper: b.upper, certificate: b.certificate, pivots: vec![] }
}

/// Nonnegative rank interval of a real nonnegative matrix: the real rank and
/// the smaller of its nonzero row and column counts (trivial factorizations).
pub fn nonneg_rank_real(m: &[Vec<f64>]) -> Result<(usize, usize)> {
    let rows = m.len();
    let cols = m.first().map(|r| r.len()).unwrap_or(0);
    if m.iter().any(|r| r.len() != cols) {
        return Err(SynthError::dim("ragged rows"));
    }
    if m.iter().flatten().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(SynthError::pre("entries must be finite and nonnegative"));
    }
    let cm = CMat::from_fn(rows, cols, |i, j| c(m[i][j], 0.0));
    let (_, s, _) = svd(&cm);
    let smax = s.first().copied().unwrap_or(0.0);
    let lower = if smax == 0.0 { 0 } else { s.iter().filter(|&&x| x > 1e-9 * smax).count() };
    let nz_rows = m.iter().filter(|r| r.iter().any(|&x| x > 0.0)).count();
    let nz_cols = (0..cols).filter(|&j| m.iter().any(|r| r[j] > 0.0)).count();
    Ok((lower, nz_rows.min(nz_cols)))
}

pub fn rank_toolkit_with(t: &BinaryMatrix, kind: RankKind, opts: RankOptions) -> RankReport {
    match kind {
        RankKind::Rank => {
            let r = real_rank(t);
            RankReport { kind, lower: r, upper: r, certificate: vec![], pivots: vec![] }
        }
        RankKind::Xor => xor_rank(t),
        RankKind::Binary => binary_rank(t, opts),
        RankKind::Nonneg => nonneg_rank(t, opts),
    }
}

pub fn rank_toolkit(t: &BinaryMatrix, kind: RankKind) -> RankReport {
    rank_toolkit_with(t, kind, RankOptions::default())
}


#[cfg(test)]
mod tests {
    use super::oracles::*;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t_example() -> BinaryMatrix {
        BinaryMatrix::from_rows(&[vec![1, 1, 0], vec![1, 0, 1], vec![0, 1, 1]]).unwrap()
    }

    #[test]
    fn example_ranks() {
        let t = t_example();
        assert_eq!(rank_toolkit(&t, RankKind::Rank).value(), Some(3));
        let x = rank_toolkit(&t, RankKind::Xor);
        assert_eq!(x.value(), Some(2));
        assert!(x.verify_certificate(&t));
        let b = rank_toolkit(&t, RankKind::Binary);
        assert_eq!(b.value(), Some(3));
        assert_eq!(binary_rank_brute(&t), 3);
        assert!(b.verify_certificate(&t));
        assert_eq!(rank_toolkit(&t, RankKind::Nonneg).value(), Some(3));
    }

    #[test]
    fn all_ones_and_zero() {
        let t = BinaryMatrix::new(4, 4, vec![true; 16]).unwrap();
        for k in [RankKind::Rank, RankKind::Xor, RankKind::Binary, RankKind::Nonneg] {
            assert_eq!(rank_toolkit(&t, k).value(), Some(1));
        }
        let z = BinaryMatrix::zeros(3, 2);
        for k in [RankKind::Rank, RankKind::Xor, RankKind::Binary, RankKind::Nonneg] {
            assert_eq!(rank_toolkit(&z, k).value(), Some(0));
        }
    }

    #[test]
    fn binary_below_distinct_rows() {
        // Rows 100, 010, 110: two patterns suffice.
        let t = BinaryMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![1, 1, 0]]).unwrap();
        let b = rank_toolkit(&t, RankKind::Binary);
        assert_eq!(b.value(), Some(2));
        assert!(b.verify_certificate(&t));
    }

    #[test]
    fn xor_matches_exhaustive_oracle_3x3() {
        let dist = xor_distances(3, 3);
        for m in 0u32..512 {
            let bits: Vec<bool> = (0..9).map(|k| m >> k & 1 == 1).collect();
            let t = BinaryMatrix::new(3, 3, bits).unwrap();
            assert_eq!(xor_rank(&t).upper, dist[m as usize] as usize);
        }
    }

    #[test]
    fn binary_matches_brute_force_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..60 {
            let (r, c) = (rng.random_range(1..5), rng.random_range(1..5));
            let t = BinaryMatrix::new(r, c, (0..r * c).map(|_| rng.random_bool(0.5)).collect()).unwrap();
            let b = binary_rank(&t, RankOptions::default());
            assert_eq!(b.value(), Some(binary_rank_brute(&t)), "{t:?}");
            assert!(b.verify_certificate(&t));
        }
    }

    #[test]
    fn interval_when_over_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = BinaryMatrix::new(6, 6, (0..36).map(|_| rng.random_bool(0.5)).collect()).unwrap();
        let opts = RankOptions { exact_cutoff: 3, ..Default::default() };
        let b = binary_rank(&t, opts);
        assert!(b.lower <= b.upper);
        assert!(b.verify_certificate(&t));
    }

    #[test]
    fn real_nonneg_interval() {
        let (lo, hi) = nonneg_rank_real(&[vec![1.0, 0.5], vec![2.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!((lo, hi), (1, 2));
        assert!(nonneg_rank_real(&[vec![-1.0]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rank_order(r in 1usize..8, c in 1usize..8, bits in proptest::collection::vec(any::<bool>(), 64)) {
            let t = BinaryMatrix::new(r, c, bits[..r * c].to_vec()).unwrap();
            let rank = real_rank(&t);
            let x = xor_rank(&t);
            let b = binary_rank(&t, RankOptions::default());
            let n = nonneg_rank(&t, RankOptions::default());
            prop_assert!(rank <= n.lower && n.lower <= n.upper && n.upper <= b.upper);
            prop_assert!(x.upper <= b.upper && x.upper <= b.lower.max(x.upper));
            prop_assert!(x.verify_certificate(&t) && b.verify_certificate(&t));
        }
    }
}
