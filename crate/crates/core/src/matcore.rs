//! Dense complex linear algebra used by every decomposition.
//!
//! Rank and nullity decisions use [`ZERO_THRESHOLD`]; reconstruction checks
//! use [`VERIFY_TOL`]. Completion bases are built by Gram–Schmidt over the
//! standard basis in increasing index order, so outputs are reproducible.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
pub use num_complex::Complex64 as C64;

use crate::error::{Result, SynthError};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Threshold below which a norm or singular value counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-10;
/// Default max-entry tolerance for reconstruction checks.
pub const VERIFY_TOL: f64 = 1e-8;

/// Absolute entrywise tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub eps: f64,
}

impl Tolerance {
    pub fn new(eps: f64) -> Self {
        assert!(eps >= 0.0, "tolerance must be nonnegative");
        Tolerance { eps }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { eps: 1e-9 }
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, cols: usize) -> CMat {
    CMat::zeros(r, cols)
}

/// Builds a matrix from row-major real entries.
pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| c(data[i * cols + j], 0.0))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Block-diagonal direct sum.
pub fn direct_sum(blocks: &[CMat]) -> CMat {
    let r: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(r, cols);
    let (mut i0, mut j0) = (0, 0);
    for b in blocks {
        out.view_mut((i0, j0), b.shape()).copy_from(b);
        i0 += b.nrows();
        j0 += b.ncols();
    }
    out
}

pub fn is_identity(m: &CMat, eps: f64) -> bool {
    m.is_square() && max_abs_diff(m, &identity(m.nrows())) <= eps
}

/// Max-entry deviation of `M M†` and `M† M` from the identity.
pub fn unitarity_defect(m: &CMat) -> Result<f64> {
    if !m.is_square() {
        return Err(SynthError::dim(format!("expected square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let n = m.nrows();
    let id = identity(n);
    let a = max_abs_diff(&(m * m.adjoint()), &id);
    let b = max_abs_diff(&(m.adjoint() * m), &id);
    Ok(a.max(b))
}

pub fn is_unitary(m: &CMat, tol: Tolerance) -> Result<bool> {
    Ok(all_finite(m) && unitarity_defect(m)? <= tol.eps)
}

pub fn require_unitary(m: &CMat, eps: f64) -> Result<()> {
    let d = unitarity_defect(m)?;
    if !all_finite(m) || d > eps {
        return Err(SynthError::NotUnitary(d));
    }
    Ok(())
}

/// Thin singular value decomposition `M = U·diag(s)·V†` by one-sided Jacobi
/// rotations. `U` is `m × r`, `V` is `n × r` with `r = min(m, n)`, both with
/// orthonormal columns; `s` is sorted nonincreasing. Columns of `U` belonging
/// to zero singular values come from the deterministic basis completion.
pub fn svd(m: &CMat) -> (CMat, Vec<f64>, CMat) {
    let (rows, cols) = m.shape();
    if rows < cols {
        let (u, s, v) = svd(&m.adjoint());
        return (v, s, u);
    }
    let n = cols;
    let mut a = m.clone();
    let mut v = identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g < 1e-300 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for mat in [&mut a, &mut v] {
                    for i in 0..mat.nrows() {
                        let xp = mat[(i, p)];
                        let xq = mat[(i, q)] * phase.conj();
                        mat[(i, p)] = xp * cs - xq * sn;
                        mat[(i, q)] = xp * sn + xq * cs;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));
    let smax = order.first().map(|&i| norms[i]).unwrap_or(0.0);
    let mut ucols: Vec<CVec> = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut vcols = Vec::with_capacity(n);
    for &j in &order {
        s.push(norms[j]);
        vcols.push(v.column(j).into_owned());
        if norms[j] > 1e-300 && norms[j] > 1e-14 * smax {
            ucols.push(a.column(j) / c(norms[j], 0.0));
        }
    }
    let nonzero = ucols.len();
    let mut ortho: Vec<CVec> = Vec::with_capacity(n);
    for mut col in ucols {
        orthogonalize(&mut col, &ortho);
        let nv = col.norm();
        ortho.push(col / c(nv, 0.0));
    }
    let extra = complete_basis(&ortho, rows);
    ortho.extend(extra.into_iter().take(n - nonzero));
    (CMat::from_columns(&ortho), s, CMat::from_columns(&vcols))
}

/// Singular-value diagonalization `M = E·diag(D)·F` with `D` sorted nonincreasing.
pub fn svd_diagonalize(m: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    if !m.is_square() {
        return Err(SynthError::dim("svd_diagonalize needs a square matrix"));
    }
    if m.nrows() == 0 {
        return Ok((zeros(0, 0), vec![], zeros(0, 0)));
    }
    let (u, s, v) = svd(m);
    Ok((u, s, v.adjoint()))
}

/// Nearest unitary in Frobenius norm (polar factor).
pub fn polar_unitary(m: &CMat) -> CMat {
    let (u, _, v) = svd(m);
    u * v.adjoint()
}

fn orthogonalize(v: &mut CVec, basis: &[CVec]) {
    // Two passes of modified Gram–Schmidt keep the residual orthogonal to
    // working precision.
    for _ in 0..2 {
        for b in basis {
            let p = b.dotc(v);
            v.axpy(-p, b, C64::new(1.0, 0.0));
        }
    }
}

/// Extends an orthonormal set to `n` vectors using standard basis vectors in
/// increasing index order. Returns only the new vectors.
pub fn complete_basis(basis: &[CVec], n: usize) -> Vec<CVec> {
    let mut all: Vec<CVec> = basis.to_vec();
    let mut added = Vec::new();
    for i in 0..n {
        if all.len() >= n {
            break;
        }
        let mut v = CVec::zeros(n);
        v[i] = c(1.0, 0.0);
        orthogonalize(&mut v, &all);
        let nv = v.norm();
        if nv < ZERO_THRESHOLD {
            continue;
        }
        v /= c(nv, 0.0);
        all.push(v.clone());
        added.push(v);
    }
    added
}

/// Returns unitary `V` such that `V·M` is diagonal with nonnegative entries.
///
/// Requires the columns of `M` to be pairwise orthogonal. Rows of `V` for
/// zero columns are filled by the deterministic completion.
pub fn orthogonal_columns_to_diagonal(m: &CMat) -> Result<CMat> {
    if !m.is_square() {
        return Err(SynthError::dim("orthogonal_columns_to_diagonal needs a square matrix"));
    }
    let n = m.nrows();
    let gram = m.adjoint() * m;
    let scale = gram.diagonal().iter().fold(1.0f64, |a, z| a.max(z.re));
    for i in 0..n {
        for j in 0..n {
            if i != j && gram[(i, j)].norm() > 1e-8 * scale {
                return Err(SynthError::pre(format!(
                    "columns {i} and {j} are not orthogonal (|<ci,cj>| = {:.3e})",
                    gram[(i, j)].norm()
                )));
            }
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| m.column(j).norm()).collect();
    let mut nonzero: Vec<usize> = (0..n).filter(|&j| norms[j] > ZERO_THRESHOLD).collect();
    nonzero.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut rows: Vec<Option<CVec>> = vec![None; n];
    let mut basis: Vec<CVec> = Vec::new();
    for &j in &nonzero {
        let mut v: CVec = m.column(j).into_owned();
        orthogonalize(&mut v, &basis);
        let nv = v.norm();
        if nv < ZERO_THRESHOLD {
            return Err(SynthError::pre(format!("column {j} is dependent on earlier columns")));
        }
        v /= c(nv, 0.0);
        basis.push(v.clone());
        rows[j] = Some(v);
    }
    let mut extra = complete_basis(&basis, n).into_iter();
    for slot in rows.iter_mut() {
        if slot.is_none() {
            *slot = Some(extra.next().expect("completion supplies every zero column"));
        }
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i].as_ref().unwrap()[j].conj()))
}

/// Returns unitary `V` (m×m) such that `B·V` vanishes outside its first `t` columns.
pub fn compress_rows(b: &CMat, t: usize) -> Result<CMat> {
    let (k, m) = b.shape();
    if t > m {
        return Err(SynthError::dim(format!("target {t} exceeds column count {m}")));
    }
    let mut basis: Vec<CVec> = Vec::new();
    if k > 0 && m > 0 {
        // Left singular vectors of B† span the row space of B.
        let (u, s, _) = svd(&b.adjoint());
        let smax = s.first().copied().unwrap_or(0.0);
        let keep_all = k <= t;
        for (i, &sv) in s.iter().enumerate() {
            if keep_all || sv > ZERO_THRESHOLD * smax.max(1.0) {
                basis.push(u.column(i).into_owned());
            }
        }
    }
    if basis.len() > t {
        return Err(SynthError::Infeasible(format!("row space has rank {} > target {t}", basis.len())));
    }
    let rest = complete_basis(&basis, m);
    let cols: Vec<CVec> = basis.into_iter().chain(rest).collect();
    Ok(CMat::from_columns(&cols))
}

/// Returns unitary `W` with `B·W = [I_k | 0]` for `B` with orthonormal rows.
pub fn complete_isometry(b: &CMat) -> Result<CMat> {
    let (k, m) = b.shape();
    if k > m {
        return Err(SynthError::dim(format!("{k} rows cannot be orthonormal in dimension {m}")));
    }
    let dev = max_abs_diff(&(b * b.adjoint()), &identity(k));
    if dev > VERIFY_TOL {
        return Err(SynthError::pre(format!("rows are not orthonormal (deviation {dev:.3e})")));
    }
    let first: Vec<CVec> = (0..k).map(|i| b.row(i).adjoint()).collect();
    let rest = complete_basis(&first, m);
    let cols: Vec<CVec> = first.into_iter().chain(rest).collect();
    Ok(CMat::from_columns(&cols))
}

fn phase_angle(z: C64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + 2.0 * std::f64::consts::PI
    } else {
        a
    }
}

const HERMITIAN_MIX: [f64; 4] =
    [0.618_033_988_749_894_8, -1.324_717_957_244_746, 2.414_213_562_373_095, 0.377_964_473_009_227_2];

fn eig_refine(u: &CMat, basis: CMat, depth: usize, out: &mut Vec<(CVec, C64)>) {
    let k = basis.ncols();
    let g = basis.adjoint() * u * &basis;
    if k == 1 {
        out.push((basis.column(0).into_owned(), g[(0, 0)]));
        return;
    }
    let mean = g.trace() / c(k as f64, 0.0);
    if max_abs_diff(&g, &(identity(k) * mean)) <= 1e-13 {
        for j in 0..k {
            out.push((basis.column(j).into_owned(), g[(j, j)]));
        }
        return;
    }
    if depth >= HERMITIAN_MIX.len() {
        match Schur::try_new(g.clone(), 1e-15, 10_000) {
            Some(schur) => {
                let (q, t) = schur.unpack();
                let qb = &basis * q;
                for j in 0..k {
                    out.push((qb.column(j).into_owned(), t[(j, j)]));
                }
            }
            None => {
                for j in 0..k {
                    out.push((basis.column(j).into_owned(), g[(j, j)]));
                }
            }
        }
        return;
    }
    let alpha = HERMITIAN_MIX[depth];
    let gd = g.adjoint();
    let h = (&g + &gd) * c(0.5, 0.0) + (&g - &gd) * c(0.0, -0.5 * alpha);
    let h = (&h + h.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap().then(a.cmp(&b)));
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] < 1e-7 {
            end += 1;
        }
        let cols: Vec<CVec> = order[start..end].iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect();
        let sub = &basis * CMat::from_columns(&cols);
        if end - start == 1 {
            let v = sub.column(0).into_owned();
            let lam = v.dotc(&(u * &v));
            out.push((v, lam));
        } else {
            eig_refine(u, sub, depth + 1, out);
        }
        start = end;
    }
}

/// Eigendecomposition `U = Q·diag(λ)·Q†` of a unitary (or normal) matrix.
///
/// Eigenvalues are ordered by phase angle in `[0, 2π)`; ties keep the order
/// in which the eigenvectors were found.
pub fn unitary_eigen(u: &CMat) -> Result<(CMat, Vec<C64>)> {
    if !u.is_square() {
        return Err(SynthError::dim("unitary_eigen needs a square matrix"));
    }
    let n = u.nrows();
    if n == 0 {
        return Ok((zeros(0, 0), vec![]));
    }
    let mut pairs = Vec::with_capacity(n);
    eig_refine(u, identity(n), 0, &mut pairs);
    let mut idx: Vec<usize> = (0..n).collect();
    let angles: Vec<f64> = pairs
        .iter()
        .map(|(_, l)| {
            let a = phase_angle(*l);
            // Fold angles within rounding of 2π back to 0 so that 1 sorts first.
            if 2.0 * std::f64::consts::PI - a < 1e-12 {
                0.0
            } else {
                a
            }
        })
        .collect();
    idx.sort_by(|&a, &b| angles[a].partial_cmp(&angles[b]).unwrap().then(a.cmp(&b)));
    let cols: Vec<CVec> = idx.iter().map(|&i| pairs[i].0.clone()).collect();
    let q = CMat::from_columns(&cols);
    let lam = idx.iter().map(|&i| pairs[i].1).collect();
    Ok((q, lam))
}

/// Diagonal matrix from a slice of complex values.
pub fn diag(values: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(values))
}

/// Permutation matrix with `P|i> = |perm[i]>`.
pub fn perm_matrix(perm: &[usize]) -> CMat {
    let n = perm.len();
    let mut m = zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        m[(p, i)] = c(1.0, 0.0);
    }
    m
}
