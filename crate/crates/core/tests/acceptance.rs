//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctrlsynth::gateir::{
    classify_gate, verify_decomposition, Circuit, GateRecord, UnitaryMatrix, KIND_CNOT, KIND_CONTROLLED,
};
use ctrlsynth::generators::{
    cnot_matrix, example2_factors, example2_unitary, haar_unitary, random_controlled_a, random_permutation,
    random_phases, swap_matrix,
};
use ctrlsynth::matcore::{c, identity, kron, max_abs_diff, perm_matrix, CMat, Tolerance};
use ctrlsynth::multiparty::{decompose_4party, decompose_multiparty};
use ctrlsynth::permdecomp::{compose_perm_gates, decompose_multiparty_perm, decompose_perm3, ComplexPermutation};
use ctrlsynth::protocols::{
    binary_rank, emit_transfer_protocol, emit_two_term_cnot, emit_xor_protocol, lemma7_auto, nonneg_rank, real_rank,
    swap_sandwich, xor_rank, BinaryMatrix, RankOptions,
};
use ctrlsynth::sandwich::{
    decompose_2xd_aform, decompose_2xd_sandwich, decompose_bcu3, decompose_sandwich, off_block_max,
};
use ctrlsynth::schmidt::schmidt_rank;
use ctrlsynth::stdgates::{
    compile_controlled_to_standard, compile_perm_to_cnot_type, compile_to_standard, BudgetFormula, StdMode,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn um(dims: &[usize], m: CMat) -> UnitaryMatrix {
    UnitaryMatrix::new(dims.to_vec(), m).unwrap()
}

fn perm(dims: &[usize], targets: Vec<usize>) -> ComplexPermutation {
    ComplexPermutation::plain(dims.to_vec(), targets).unwrap()
}

fn verified(u: &UnitaryMatrix, circ: &Circuit, tol: f64) -> Result<f64, String> {
    let rep = verify_decomposition(u, circ, Tolerance::new(tol)).map_err(|e| e.to_string())?;
    ensure!(rep.passed, "max_error {:.3e} leakage {:.3e} above {tol:e}", rep.max_error, rep.max_leakage);
    ensure!(rep.ancilla_restored, "ancillas not restored");
    Ok(rep.max_error)
}

/// Even gates A-controlled, odd gates B-controlled.
fn alternates(circ: &Circuit) -> bool {
    circ.gates.iter().enumerate().all(|(k, g)| {
        let cls = classify_gate(g, &circ.space, 1).unwrap();
        if k % 2 == 0 {
            cls.controlled_from_a
        } else {
            cls.controlled_from_b
        }
    })
}

fn ceil_pow2(d: usize) -> usize {
    let mut p = 1;
    while p < d {
        p *= 2;
    }
    p
}

fn sandwich_bound() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut max_gates = HashMap::new();
    for da in 2..=6 {
        let bound = 2 * ceil_pow2(da) - 1;
        for db in 2..=6 {
            for _ in 0..100 {
                let u = um(&[da, db], haar_unitary(da * db, &mut rng));
                let r = decompose_sandwich(&u).map_err(|e| format!("({da},{db}): {e}"))?;
                let n = r.circuit.gates.len();
                ensure!(n <= bound, "({da},{db}): {n} gates > {bound}");
                ensure!(n % 2 == 1 && alternates(&r.circuit), "({da},{db}): gates do not alternate A/B");
                worst = worst.max(verified(&u, &r.circuit, 1e-8)?);
                let e = max_gates.entry(da).or_insert(0);
                *e = (*e).max(n);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    let counts: Vec<_> = (2..=6).map(|d| max_gates[&d]).collect();
    Ok(format!("max gates per dA=2..6 {counts:?}, max_error {worst:.1e}, {secs:.1} s"))
}

fn two_by_d() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for db in 2..=8 {
        for _ in 0..10 {
            let u = um(&[2, db], haar_unitary(2 * db, &mut rng));
            let s = decompose_2xd_sandwich(&u).map_err(|e| e.to_string())?;
            ensure!(s.circuit.gates.len() == 3 && alternates(&s.circuit), "db={db}: sandwich not A,B,A");
            worst = worst.max(verified(&u, &s.circuit, 1e-8)?);
            let a = decompose_2xd_aform(&u).map_err(|e| e.to_string())?;
            let ctrl: Vec<&GateRecord> = a.circuit.gates.iter().filter(|g| g.kind() == KIND_CONTROLLED).collect();
            ensure!(ctrl.len() == 3, "db={db}: A-form has {} controlled gates", ctrl.len());
            for g in ctrl {
                ensure!(
                    classify_gate(g, &a.circuit.space, 1).unwrap().controlled_from_a,
                    "db={db}: A-form gate not A-controlled"
                );
            }
            worst = worst.max(verified(&u, &a.circuit, 1e-8)?);
        }
    }
    Ok(format!("dB=2..8, 10 seeds each, max_error {worst:.1e}"))
}

fn bcu3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for da in 2..=6 {
        for db in 1..=4 {
            for _ in 0..5 {
                let u = um(&[da, db], haar_unitary(da * db, &mut rng));
                let f = decompose_bcu3(&u).map_err(|e| e.to_string())?;
                let n = da * db;
                let yd = f.y * db;
                // X and V† act on A-levels >= y only; W† only on A-levels < 2y.
                let x_ok = off_block_max(&f.x, &[yd, n - yd]) <= 1e-9
                    && max_abs_diff(&f.x.view((0, 0), (yd, yd)).into_owned(), &identity(yd)) <= 1e-9;
                let v_ok = off_block_max(&f.v_dag, &[yd, n - yd]) <= 1e-9
                    && max_abs_diff(&f.v_dag.view((0, 0), (yd, yd)).into_owned(), &identity(yd)) <= 1e-9;
                let rest = n - 2 * yd;
                let w_ok = off_block_max(&f.w_dag, &[2 * yd, rest]) <= 1e-9
                    && max_abs_diff(&f.w_dag.view((2 * yd, 2 * yd), (rest, rest)).into_owned(), &identity(rest))
                        <= 1e-9;
                ensure!(x_ok && v_ok && w_ok, "({da},{db}): block pattern violated");
                let err = max_abs_diff(&(&f.x * &f.w_dag * &f.v_dag), &u.matrix);
                ensure!(err <= 1e-8, "({da},{db}): product error {err:.3e}");
                worst = worst.max(err);
                verified(&u, &f.circuit, 1e-8)?;
            }
        }
    }
    let sw = um(&[2, 2], swap_matrix(2));
    let f = decompose_bcu3(&sw).map_err(|e| e.to_string())?;
    let err = max_abs_diff(&(&f.x * &f.w_dag * &f.v_dag), &sw.matrix);
    ensure!(err <= 1e-12, "SWAP2 error {err:.3e}");
    Ok(format!("max product error {worst:.1e}, SWAP2 {err:.1e}"))
}

fn is_perm(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&x| x < p.len() && !std::mem::replace(&mut seen[x], true))
}

fn perm3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for k in 0..500 {
        let (da, db) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let p = perm(&[da, db], random_permutation(da * db, &mut rng));
        let r = decompose_perm3(&p).map_err(|e| format!("#{k}: {e}"))?;
        ensure!(r.compose() == p, "#{k} ({da},{db}): composition differs");
        let all = r.g1.iter().chain(&r.g2).chain(&r.g3);
        ensure!(all.clone().all(|b| is_perm(b)), "#{k}: branch is not a permutation");
        let circ = r.circuit();
        let act = ctrlsynth::gateir::basis_action(&circ).map_err(|e| e.to_string())?.ok_or("not monomial")?;
        let exact = act.iter().enumerate().all(|(i, &(t, ph))| t == p.targets[i] && ph == c(1.0, 0.0));
        ensure!(exact, "#{k}: circuit basis action differs");
    }
    for d in [2, 3] {
        let sw = perm(&[d, d], (0..d * d).map(|i| (i % d) * d + i / d).collect());
        let n = decompose_perm3(&sw).map_err(|e| e.to_string())?.circuit().gates.len();
        ensure!(n == 3, "SWAP{d}: {n} gates");
    }
    Ok("500 permutations exact, SWAP2/SWAP3 3 gates".into())
}

fn multiparty() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0f64;
    let mut max3 = 0;
    for _ in 0..20 {
        let u = um(&[2, 2, 2], haar_unitary(8, &mut rng));
        let r = decompose_multiparty(&u).map_err(|e| e.to_string())?;
        let n = r.circuit.metrics.count(KIND_CONTROLLED);
        ensure!(n <= 7 && r.circuit.gates.len() <= 7, "3 qubits: {n} gates");
        max3 = max3.max(n);
        worst = worst.max(verified(&u, &r.circuit, 1e-8)?);
    }
    let mut max4 = 0;
    for _ in 0..5 {
        let u = um(&[2, 2, 2, 2], haar_unitary(16, &mut rng));
        let r = decompose_4party(&u).map_err(|e| e.to_string())?;
        let n = r.circuit.gates.len();
        ensure!(n <= 33, "4 qubits: {n} gates");
        max4 = max4.max(n);
        worst = worst.max(verified(&u, &r.circuit, 1e-8)?);
    }
    let mut max_perm = 0;
    for _ in 0..50 {
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(2..=3)).collect();
        let n: usize = dims.iter().product();
        let p = perm(&dims, random_permutation(n, &mut rng));
        let gates = decompose_multiparty_perm(&p).map_err(|e| e.to_string())?;
        ensure!(gates.len() <= 5, "{dims:?}: {} permutation gates", gates.len());
        ensure!(compose_perm_gates(&gates, &dims) == p, "{dims:?}: permutation gates not exact");
        max_perm = max_perm.max(gates.len());
    }
    Ok(format!("3 qubits <= {max3}, 4 qubits <= {max4}, 3-party permutations <= {max_perm}, max_error {worst:.1e}"))
}

fn standard_gates() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for da in 2..=5 {
        for db in 2..=5 {
            let n = da * db;
            let u = um(&[da, db], haar_unitary(n, &mut rng));
            let r = compile_to_standard(&u, StdMode::General).map_err(|e| e.to_string())?;
            let budget = BudgetFormula::General.evaluate(da, db);
            ensure!(r.standard_count() <= budget, "general ({da},{db}): {} > {budget}", r.standard_count());
            verified(&u, &r.circuit, 1e-8)?;
            if (da, db) == (2, 2) {
                ensure!(r.standard_count() <= 3, "two-qubit: {} standard gates", r.standard_count());
            }

            let u = um(&[da, db], random_controlled_a(da, db, &mut rng));
            let r = compile_controlled_to_standard(&u).map_err(|e| e.to_string())?;
            let budget = BudgetFormula::ControlledA.evaluate(da, db);
            ensure!(r.standard_count() <= budget, "controlled ({da},{db}): {} > {budget}", r.standard_count());
            verified(&u, &r.circuit, 1e-8)?;

            let cp = ComplexPermutation::with_phases(
                vec![da, db],
                random_permutation(n, &mut rng),
                random_phases(n, &mut rng),
            )
            .unwrap();
            let u = um(&[da, db], cp.matrix());
            let r = compile_to_standard(&u, StdMode::ComplexPerm).map_err(|e| e.to_string())?;
            let budget = BudgetFormula::ComplexPerm.evaluate(da, db);
            ensure!(r.standard_count() <= budget, "complex perm ({da},{db}): {} > {budget}", r.standard_count());
            verified(&u, &r.circuit, 1e-8)?;

            let p = random_permutation(n, &mut rng);
            let u = um(&[da, db], perm_matrix(&p));
            let r = compile_perm_to_cnot_type(&u).map_err(|e| e.to_string())?;
            let budget = 3 * (da - 1) * (db - 1);
            ensure!(r.standard_count() <= budget, "perm-CNOT ({da},{db}): {} > {budget}", r.standard_count());
            if (da, db) == (4, 4) {
                let act =
                    ctrlsynth::gateir::basis_action(&r.circuit).map_err(|e| e.to_string())?.ok_or("not monomial")?;
                ensure!(
                    act.iter().enumerate().all(|(i, &(t, ph))| t == p[i] && ph == c(1.0, 0.0)),
                    "4x4 perm-CNOT not exact"
                );
            } else {
                verified(&u, &r.circuit, 1e-8)?;
            }
        }
    }
    Ok("all four budgets met for dims 2..5, 4x4 perm-CNOT exact".into())
}

fn random_projector(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    let q = haar_unitary(n, rng);
    let k = rng.random_range(1..n);
    let cols = q.columns(0, k).into_owned();
    &cols * cols.adjoint()
}

fn two_term() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut worst = 0.0f64;
    for da in 2..=4 {
        for db in 1..=4 {
            for _ in 0..5 {
                let p1 = random_projector(da, &mut rng);
                let (v1, v2) = (haar_unitary(db, &mut rng), haar_unitary(db, &mut rng));
                let circ = emit_two_term_cnot(&p1, &v1, &v2).map_err(|e| e.to_string())?;
                let m = &circ.metrics;
                ensure!(m.count(KIND_CNOT) == 2 && m.nonlocal_cnots == 2, "({da},{db}): {} CNOTs", m.count(KIND_CNOT));
                let u = um(&[da, db], kron(&p1, &v1) + kron(&(identity(da) - &p1), &v2));
                worst = worst.max(verified(&u, &circ, 1e-10)?);
            }
        }
    }
    Ok(format!("exactly 2 CNOTs, ancillas restored, max_error {worst:.1e}"))
}

fn partial_perm_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut max_q = 0;
    for k in 0..200 {
        let (da, db) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let p = perm(&[da, db], random_permutation(da * db, &mut rng));
        let r = lemma7_auto(&p).map_err(|e| format!("#{k} ({da},{db}): {e}"))?;
        let q = r.expansion.q();
        // Realigned 0/1 matrix: column (a, b) -> row (a_out, b_out) puts a 1 at
        // (a_out·dA + a, b_out·dB + b).
        let mut realigned = BinaryMatrix::zeros(da * da, db * db);
        for (i, &t) in p.targets.iter().enumerate() {
            realigned.set((t / db) * da + i / db, (t % db) * db + i % db, true);
        }
        let sch = real_rank_oracle(&realigned);
        let cap = [da * da, db * db, da * sch, db * sch, 1usize.checked_shl(sch as u32).unwrap_or(usize::MAX)];
        let cap = *cap.iter().min().unwrap();
        ensure!(q <= cap, "#{k} ({da},{db}): q = {q} > {cap}");
        let m = &r.expanded.metrics;
        ensure!(m.nonlocal_cnots <= 6 * q, "#{k}: {} CNOTs > 6q = {}", m.nonlocal_cnots, 6 * q);
        ensure!(m.ebits.unwrap_or(usize::MAX) <= 3 * q, "#{k}: ebits {:?} > 3q", m.ebits);
        let u = um(&[da, db], perm_matrix(&p.targets));
        let err = verified(&u, &r.expanded, 1e-12)?;
        ensure!(err == 0.0, "#{k}: circuit not exact ({err:e})");
        max_q = max_q.max(q);
    }
    Ok(format!("200 permutations exact, max q {max_q}"))
}

/// Fewest disjoint all-ones rectangles covering `t` exactly, by exhaustive search.
fn binary_rank_oracle(t: &[Vec<u8>]) -> usize {
    fn fill(cells: &mut [Vec<u8>], inside: &dyn Fn(usize, usize) -> bool, v: u8) {
        for (i, row) in cells.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                if inside(i, j) {
                    *x = v;
                }
            }
        }
    }
    fn go(cells: &mut Vec<Vec<u8>>, used: usize, best: &mut usize) {
        if used >= *best {
            return;
        }
        let first = cells.iter().enumerate().find_map(|(i, r)| r.iter().position(|&x| x == 1).map(|j| (i, j)));
        let Some((i0, j0)) = first else {
            *best = used;
            return;
        };
        let (r, cn) = (cells.len(), cells[0].len());
        for rmask in 1u32..(1 << r) {
            if rmask & (1 << i0) == 0 {
                continue;
            }
            for cmask in 1u32..(1 << cn) {
                if cmask & (1 << j0) == 0 {
                    continue;
                }
                let inside = |i: usize, j: usize| rmask >> i & 1 == 1 && cmask >> j & 1 == 1;
                if (0..r).all(|i| (0..cn).all(|j| !inside(i, j) || cells[i][j] == 1)) {
                    fill(cells, &inside, 0);
                    go(cells, used + 1, best);
                    fill(cells, &inside, 1);
                }
            }
        }
    }
    let mut cells = t.to_vec();
    let mut best = usize::MAX;
    go(&mut cells, 0, &mut best);
    best
}

fn example2() -> Outcome {
    let u = example2_unitary();
    let (v, w) = example2_factors();
    ensure!(&v * &w == u, "U != V W");
    let t_rows = vec![vec![1u8, 1, 0], vec![1, 0, 1], vec![0, 1, 1]];
    let t = BinaryMatrix::from_rows(&t_rows).unwrap();
    let xp = emit_xor_protocol(&t).map_err(|e| e.to_string())?;
    let ux = um(&[6, 3], u.clone());
    verified(&ux, &xp.expanded, 1e-12)?;
    ensure!(xp.expanded.metrics.nonlocal_cnots == 4, "xor protocol: {} CNOTs", xp.expanded.metrics.nonlocal_cnots);
    let targets: Vec<usize> = (0..18).map(|i| (0..18).find(|&r| u[(r, i)] == c(1.0, 0.0)).unwrap()).collect();
    let l7 = lemma7_auto(&perm(&[6, 3], targets)).map_err(|e| e.to_string())?;
    verified(&ux, &l7.expanded, 1e-12)?;
    ensure!(
        l7.expanded.metrics.nonlocal_cnots == 6,
        "permutation protocol: {} CNOTs",
        l7.expanded.metrics.nonlocal_cnots
    );
    let rank = real_rank(&t);
    let xor = xor_rank(&t).value();
    let bin = binary_rank(&t, RankOptions::default()).value();
    let oracle = binary_rank_oracle(&t_rows);
    ensure!(
        rank == 3 && xor == Some(2) && bin == Some(3) && oracle == 3,
        "ranks {rank} {xor:?} {bin:?} oracle {oracle}"
    );
    Ok("U = VW, xor protocol 4 CNOTs, permutation protocol 6 CNOTs, rank 3 / xor 2 / binary 3".into())
}

fn schmidt() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    for d in [2, 3] {
        for _ in 0..50 {
            let g = random_controlled_a(d, d, &mut rng);
            let s = schmidt_rank(&(swap_matrix(d) * g), d, d).unwrap();
            ensure!(s == d * d, "d={d}: Sch(SWAP C) = {s}");
        }
    }
    ensure!(schmidt_rank(&cnot_matrix(), 2, 2).unwrap() == 2, "Sch(CNOT) != 2");
    for d in [2, 3] {
        let s = swap_sandwich(&haar_unitary(d * d, &mut rng), d).map_err(|e| e.to_string())?;
        let sch = s.schmidt_rank_cd_b().unwrap();
        ensure!(sch == d * d, "d={d}: sandwich instance Sch = {sch}");
        let n = s.circuit.metrics.count(KIND_CONTROLLED);
        ensure!(n <= 6, "d={d}: {n} controlled gates");
        verified(&s.unitary, &s.circuit, 1e-8)?;
    }
    Ok("SWAP C full rank for d=2,3, Sch(CNOT)=2, 6-gate instance Sch=d^2".into())
}

fn transfer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let mut worst = 0.0f64;
    for (da, db) in [(4, 4), (3, 5)] {
        let u = um(&[da, db], haar_unitary(da * db, &mut rng));
        let circ = emit_transfer_protocol(&u).map_err(|e| e.to_string())?;
        let n = circ.metrics.nonlocal_cnots;
        ensure!(n == 8, "({da},{db}): {n} CNOTs");
        worst = worst.max(verified(&u, &circ, 1e-8)?);
    }
    Ok(format!("(4,4) and (3,5) use 8 CNOTs, max_error {worst:.1e}"))
}

/// Real rank by Gaussian elimination with partial pivoting.
fn real_rank_oracle(t: &BinaryMatrix) -> usize {
    let mut m: Vec<Vec<f64>> =
        (0..t.rows).map(|i| (0..t.cols).map(|j| if t.get(i, j) { 1.0 } else { 0.0 }).collect()).collect();
    let mut rank = 0;
    for col in 0..t.cols {
        let Some(p) = (rank..t.rows).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())) else { break };
        if m[p][col].abs() < 1e-9 {
            continue;
        }
        m.swap(rank, p);
        let (top, below) = m.split_at_mut(rank + 1);
        let pivot = &top[rank];
        for row in below {
            let f = row[col] / pivot[col];
            for (x, &y) in row[col..].iter_mut().zip(&pivot[col..]) {
                *x -= f * y;
            }
        }
        rank += 1;
    }
    rank
}

/// Fewest rank-1 terms XOR-summing to each `r × c` matrix, by breadth-first
/// search from zero.
fn xor_distances(r: usize, cn: usize) -> Vec<u8> {
    let cells = r * cn;
    let mut gens = Vec::new();
    for u in 1u32..(1 << r) {
        for v in 1u32..(1 << cn) {
            let mut m = 0u32;
            for i in 0..r {
                if u >> i & 1 == 1 {
                    m |= v << (i * cn);
                }
            }
            gens.push(m);
        }
    }
    let mut dist = vec![u8::MAX; 1 << cells];
    dist[0] = 0;
    let mut frontier = vec![0u32];
    let mut level = 0u8;
    while !frontier.is_empty() {
        level += 1;
        let mut next = Vec::new();
        for &s in &frontier {
            for &g in &gens {
                let t = (s ^ g) as usize;
                if dist[t] == u8::MAX {
                    dist[t] = level;
                    next.push(t as u32);
                }
            }
        }
        frontier = next;
    }
    dist
}

fn ranks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(112);
    let opts = RankOptions::default();
    for k in 0..1000 {
        let (r, cn) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let density = rng.random_range(0.2..0.8);
        let bits = (0..r * cn).map(|_| rng.random_bool(density)).collect();
        let t = BinaryMatrix::new(r, cn, bits).unwrap();
        let rank = real_rank(&t);
        ensure!(rank == real_rank_oracle(&t), "#{k}: real rank disagrees with elimination");
        let xor = xor_rank(&t);
        let bin = binary_rank(&t, opts);
        let nn = nonneg_rank(&t, opts);
        ensure!(xor.verify_certificate(&t) && bin.verify_certificate(&t), "#{k}: certificate does not sum to T");
        let (Some(x), Some(b)) = (xor.value(), bin.value()) else {
            return Err(format!("#{k}: xor or binary rank not exact"));
        };
        ensure!(
            rank <= nn.lower && nn.upper <= b && x <= b,
            "#{k}: rank {rank} nonneg [{},{}] binary {b} xor {x}",
            nn.lower,
            nn.upper
        );
    }
    let mut checked = 0;
    for r in 1..=4 {
        for cn in 1..=4 {
            let dist = xor_distances(r, cn);
            for (mask, &d) in dist.iter().enumerate() {
                let bits = (0..r * cn).map(|i| mask >> i & 1 == 1).collect();
                let t = BinaryMatrix::new(r, cn, bits).unwrap();
                let x = xor_rank(&t).value().unwrap();
                ensure!(x == d as usize, "{r}x{cn} mask {mask:#x}: xor {x}, minimum {d}");
                checked += 1;
            }
        }
    }
    Ok(format!("1000 random matrices ordered, xor exact on all {checked} matrices up to 4x4"))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("sandwich gate bound", sandwich_bound),
        ("2 x d three-gate forms", two_by_d),
        ("block-controlled factorization", bcu3),
        ("permutation 3-sandwich", perm3),
        ("multipartite bounds", multiparty),
        ("standard-gate budgets", standard_gates),
        ("two-term controlled gate, 2 CNOTs", two_term),
        ("partial-permutation protocol", partial_perm_protocol),
        ("6 x 3 permutation end to end", example2),
        ("Schmidt ranks", schmidt),
        ("transfer protocol", transfer),
        ("binary-matrix rank order", ranks),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
