//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 verification failure,
//! 3 infeasible input or violated precondition.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::codec::{
    decode_binary, encode_circuit, load_circuit, load_matrix_file, parse_json, rank_report_to_value, read_text,
    save_circuit, save_matrix_file, table_from_value, table_to_value, to_json_string, write_atomic, MatrixFile,
    MatrixKind, TableFile,
};
use crate::error::SynthError;
use crate::gateir::{verify_decomposition, Circuit, UnitaryMatrix};
use crate::generators::{example1_unitary, example2_unitary, haar_unitary, random_permutation, swap_matrix};
use crate::matcore::{perm_matrix, Tolerance, VERIFY_TOL};
use crate::multiparty::{decompose_4party, decompose_multiparty};
use crate::permdecomp::{decompose_multiparty_perm, decompose_perm3, decompose_perm3_classical, perm_gates_circuit};
use crate::protocols::{
    emit_transfer_protocol, emit_xor_protocol, example1_blocks_from_permutation, lemma7_auto, nonneg_rank_real,
    rank_toolkit_with, swap_sandwich, BinaryMatrix, RankKind, RankOptions,
};
use crate::sandwich::{decompose_2xd_aform, decompose_bcu3, decompose_sandwich};
use crate::schmidt::{operator_schmidt, SCHMIDT_TOL};
use crate::stdgates::{compile_perm_to_cnot_type, compile_to_standard_auto};

/// Environment variable read when `--seed` is absent.
pub const SEED_ENV: &str = "SANDWICH_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "ctrlsynth",
    version,
    about = "Controlled-gate decompositions of bipartite and multipartite unitaries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an input matrix.
    Gen(GenArgs),
    /// Decompose a matrix into a circuit and verify it.
    Decompose(DecomposeArgs),
    /// Check a circuit against a matrix.
    Verify(VerifyArgs),
    /// Operator-Schmidt rank across a cut.
    Schmidt(SchmidtArgs),
    /// Rank measures of a binary or nonnegative matrix.
    Rank(RankArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    Haar,
    Perm,
    Swap,
    Example1,
    Example2,
    #[value(name = "sec6-swap-sandwich")]
    SwapSandwich,
}

#[derive(clap::Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    /// Party dimensions.
    #[arg(long, num_args = 1..)]
    dims: Vec<usize>,
    /// 64-bit seed; defaults to $SANDWICH_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Diagonal blocks for example1, e.g. `110,101,011`.
    #[arg(long)]
    blocks: Option<String>,
    /// Also write the six-controlled-gate circuit (sec6-swap-sandwich).
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Method {
    Sandwich,
    Aform,
    Bcu3,
    Perm3,
    Multi,
    Party4,
    Std,
    StdCnot,
    Lemma7,
    XorProtocol,
    Transfer,
}

#[derive(clap::Args, Debug)]
struct DecomposeArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = VERIFY_TOL)]
    tol: f64,
    #[arg(long)]
    no_verify: bool,
    /// Ancilla protocols: write the two-term controlled gates instead of
    /// their CNOT expansion.
    #[arg(long)]
    compact: bool,
    /// perm3 only: read a classical table and write three stage tables.
    #[arg(long)]
    classical: bool,
}

#[derive(clap::Args, Debug)]
struct VerifyArgs {
    #[arg(short, long)]
    unitary: PathBuf,
    #[arg(short, long)]
    circuit: PathBuf,
    #[arg(long, default_value_t = VERIFY_TOL)]
    tol: f64,
}

#[derive(clap::Args, Debug)]
struct SchmidtArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Number of leading parties on the first side.
    #[arg(long, default_value_t = 1)]
    cut: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RankArg {
    Rank,
    Xor,
    Binary,
    Nonneg,
}

#[derive(clap::Args, Debug)]
struct RankArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    kind: RankArg,
    /// Seconds allowed for the exact binary-rank search.
    #[arg(long, default_value_t = 10.0)]
    time_budget: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Verification(String),
    Input(SynthError),
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        Failure::Input(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

/// Runs one command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let res = match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Decompose(a) => decompose(a, out),
        Command::Verify(a) => verify(a, out),
        Command::Schmidt(a) => schmidt(a, out),
        Command::Rank(a) => rank(a, out),
    };
    match res {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
        Err(Failure::Verification(msg)) => {
            let _ = writeln!(err, "verification failed: {msg}");
            2
        }
        Err(Failure::Input(e)) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                SynthError::Io(_) | SynthError::Parse { .. } => 1,
                _ => 3,
            }
        }
    }
}

fn seed(arg: Option<u64>) -> std::result::Result<u64, Failure> {
    if let Some(s) = arg {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            v.trim().parse().map_err(|_| Failure::Usage(format!("{SEED_ENV} must be a 64-bit integer, got {v:?}")))
        }
        Err(_) => Ok(0),
    }
}

fn parse_blocks(s: &str) -> std::result::Result<Vec<Vec<bool>>, Failure> {
    s.split(',')
        .map(|blk| {
            blk.trim()
                .chars()
                .map(|ch| match ch {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Failure::Usage(format!("block {blk:?} must contain only 0 and 1"))),
                })
                .collect()
        })
        .collect()
}

fn dims_or(dims: &[usize], default: &[usize]) -> Vec<usize> {
    if dims.is_empty() {
        default.to_vec()
    } else {
        dims.to_vec()
    }
}

fn gen(a: GenArgs, out: &mut dyn Write) -> CliResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed(a.seed)?);
    let file = match a.kind {
        GenKind::Haar => {
            let dims = dims_or(&a.dims, &[2, 2]);
            let n = dims.iter().product();
            MatrixFile::new(dims, haar_unitary(n, &mut rng), MatrixKind::Unitary)?
        }
        GenKind::Perm => {
            let dims = dims_or(&a.dims, &[2, 2]);
            let n = dims.iter().product();
            MatrixFile::new(dims, perm_matrix(&random_permutation(n, &mut rng)), MatrixKind::Permutation)?
        }
        GenKind::Swap => {
            let dims = dims_or(&a.dims, &[2, 2]);
            let d = dims[0];
            if dims.len() > 2 || dims.iter().any(|&x| x != d) {
                return Err(Failure::Usage("swap takes --dims d or --dims d d".into()));
            }
            MatrixFile::new(vec![d, d], swap_matrix(d), MatrixKind::Permutation)?
        }
        GenKind::Example1 => {
            let spec = a.blocks.as_deref().ok_or_else(|| Failure::Usage("example1 needs --blocks".into()))?;
            let blocks = parse_blocks(spec)?;
            let db = blocks[0].len();
            if db == 0 || blocks.iter().any(|b| b.len() != db) {
                return Err(Failure::Usage("all blocks need the same nonzero length".into()));
            }
            MatrixFile::new(vec![2 * blocks.len(), db], example1_unitary(&blocks), MatrixKind::Permutation)?
        }
        GenKind::Example2 => MatrixFile::new(vec![6, 3], example2_unitary(), MatrixKind::Permutation)?,
        GenKind::SwapSandwich => {
            let d = dims_or(&a.dims, &[2])[0];
            let s = swap_sandwich(&haar_unitary(d * d, &mut rng), d)?;
            if let Some(p) = &a.circuit {
                save_circuit(p, &s.circuit)?;
            }
            let _ = writeln!(out, "schmidt_rank_CD|B: {}", s.schmidt_rank_cd_b()?);
            MatrixFile::new(s.unitary.dims, s.unitary.matrix, MatrixKind::Unitary)?
        }
    };
    save_matrix_file(&a.output, &file)?;
    let _ = writeln!(out, "wrote {} ({}, dims {:?})", a.output.display(), file.kind.name(), file.dims);
    Ok(())
}

fn require_bipartite(u: &UnitaryMatrix) -> CliResult {
    if u.dims.len() != 2 {
        return Err(SynthError::Dimension(format!("method needs a bipartite input, got dims {:?}", u.dims)).into());
    }
    Ok(())
}

fn build_circuit(method: Method, file: &MatrixFile, compact: bool) -> std::result::Result<Circuit, Failure> {
    let u = file.unitary()?;
    let pick = |compact_c: Circuit, expanded: Circuit| if compact { compact_c } else { expanded };
    Ok(match method {
        Method::Sandwich => decompose_sandwich(&u)?.circuit,
        Method::Aform => decompose_2xd_aform(&u)?.circuit,
        Method::Bcu3 => decompose_bcu3(&u)?.circuit,
        Method::Perm3 => {
            let p = file.permutation()?;
            if p.dims.len() == 2 {
                decompose_perm3(&p)?.circuit()
            } else {
                perm_gates_circuit(&decompose_multiparty_perm(&p)?, &p.dims)?
            }
        }
        Method::Multi => decompose_multiparty(&u)?.circuit,
        Method::Party4 => decompose_4party(&u)?.circuit,
        Method::Std => {
            require_bipartite(&u)?;
            compile_to_standard_auto(&u)?.circuit
        }
        Method::StdCnot => compile_perm_to_cnot_type(&u)?.circuit,
        Method::Lemma7 => {
            require_bipartite(&u)?;
            let r = lemma7_auto(&file.permutation()?)?;
            pick(r.compact, r.expanded)
        }
        Method::XorProtocol => {
            let blocks = example1_blocks_from_permutation(&file.permutation()?)?;
            let t = BinaryMatrix::new(blocks.len(), blocks[0].len(), blocks.concat())?;
            let r = emit_xor_protocol(&t)?;
            pick(r.compact, r.expanded)
        }
        Method::Transfer => emit_transfer_protocol(&u)?,
    })
}

fn decompose_classical(a: &DecomposeArgs, out: &mut dyn Write) -> CliResult {
    if a.method != Method::Perm3 {
        return Err(Failure::Usage("--classical applies to --method perm3 only".into()));
    }
    let table = table_from_value(&parse_json(&read_text(&a.input)?)?)?;
    let [da, db] = table.dims;
    let stages = decompose_perm3_classical(&table.rows, da, db)?;
    let value = json!({
        "order": "application",
        "stages": stages.iter().map(|s| table_to_value(&TableFile { dims: table.dims, rows: s.clone() })).collect::<Vec<_>>(),
    });
    write_atomic(&a.output, &to_json_string(&value))?;
    let _ = writeln!(out, "wrote 3 stage tables to {}", a.output.display());
    Ok(())
}

fn report_circuit(c: &Circuit, out: &mut dyn Write) {
    let m = &c.metrics;
    for (k, v) in &m.counts {
        let _ = writeln!(out, "count {k}: {v}");
    }
    let _ = writeln!(out, "nonlocal_cnots: {}", m.nonlocal_cnots);
    let _ = writeln!(out, "nonlocal_gates: {}", m.nonlocal_gates);
    if let Some(e) = m.ebits {
        let _ = writeln!(out, "ebits: {e}");
    }
    if let Some(b) = &m.bound {
        let ok = m.bound_satisfied().unwrap_or(false);
        let _ = writeln!(out, "bound {} <= {}: {}", b.metric, b.value, if ok { "ok" } else { "VIOLATED" });
    }
}

/// Verifies and reports; `Err` when the error or leakage exceeds `tol` or a
/// declared bound is violated.
fn check(u: &UnitaryMatrix, c: &Circuit, tol: f64, out: &mut dyn Write) -> CliResult {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Failure::Usage("--tol must be positive".into()));
    }
    let rep = verify_decomposition(u, c, Tolerance::new(tol))?;
    let _ = writeln!(out, "max_error: {:.3e}", rep.max_error);
    let _ = writeln!(out, "max_leakage: {:.3e}", rep.max_leakage.max(0.0));
    let _ = writeln!(out, "ancilla_restored: {}", rep.ancilla_restored);
    report_circuit(c, out);
    if !rep.passed {
        return Err(Failure::Verification(format!(
            "max_error {:.3e} (leakage {:.3e}) exceeds {tol:e}",
            rep.max_error, rep.max_leakage
        )));
    }
    if c.metrics.bound_satisfied() == Some(false) {
        return Err(Failure::Verification("declared bound violated".into()));
    }
    let _ = writeln!(out, "passed: true");
    Ok(())
}

fn decompose(a: DecomposeArgs, out: &mut dyn Write) -> CliResult {
    if a.classical {
        return decompose_classical(&a, out);
    }
    let file = load_matrix_file(&a.input)?;
    let circuit = build_circuit(a.method, &file, a.compact)?;
    if !a.no_verify {
        check(&file.unitary()?, &circuit, a.tol, out)?;
    } else {
        report_circuit(&circuit, out);
    }
    write_atomic(&a.output, &encode_circuit(&circuit)?)?;
    let _ = writeln!(out, "wrote {}", a.output.display());
    Ok(())
}

fn verify(a: VerifyArgs, out: &mut dyn Write) -> CliResult {
    let file = load_matrix_file(&a.unitary)?;
    let circuit = load_circuit(&a.circuit)?;
    circuit.validate()?;
    check(&file.unitary()?, &circuit, a.tol, out)
}

fn schmidt(a: SchmidtArgs, out: &mut dyn Write) -> CliResult {
    let u = load_matrix_file(&a.input)?.unitary()?;
    if a.cut == 0 || a.cut >= u.dims.len() {
        return Err(
            SynthError::Dimension(format!("cut {} must leave parties on both sides of {:?}", a.cut, u.dims)).into()
        );
    }
    let da: usize = u.dims[..a.cut].iter().product();
    let db: usize = u.dims[a.cut..].iter().product();
    let s = operator_schmidt(&u.matrix, da, db, SCHMIDT_TOL)?;
    let _ = writeln!(out, "cut: {:?} | {:?}", &u.dims[..a.cut], &u.dims[a.cut..]);
    let _ = writeln!(out, "schmidt_rank: {}", s.rank);
    let coeffs: Vec<String> = s.coefficients.iter().map(|x| format!("{x:.6e}")).collect();
    let _ = writeln!(out, "coefficients: [{}]", coeffs.join(", "));
    Ok(())
}

enum RankInput {
    Binary(BinaryMatrix),
    Real(Vec<Vec<f64>>),
}

/// A binary-matrix file, a matrix file of kind `binary`, or
/// `{"values": [[...], ...]}` with nonnegative reals.
fn load_rank_input(path: &Path) -> std::result::Result<RankInput, Failure> {
    let text = read_text(path)?;
    let v = parse_json(&text)?;
    if v.get("bits").is_some() {
        return Ok(RankInput::Binary(decode_binary(&text)?));
    }
    if let Some(vals) = v.get("values") {
        let rows: Vec<Vec<f64>> = serde_json::from_value(vals.clone())
            .map_err(|e| SynthError::Precondition(format!("invalid file: values: {e}")))?;
        return Ok(RankInput::Real(rows));
    }
    Ok(RankInput::Binary(MatrixFile::from_value(&v)?.binary()?))
}

fn rank(a: RankArgs, out: &mut dyn Write) -> CliResult {
    let kind = match a.kind {
        RankArg::Rank => RankKind::Rank,
        RankArg::Xor => RankKind::Xor,
        RankArg::Binary => RankKind::Binary,
        RankArg::Nonneg => RankKind::Nonneg,
    };
    if !a.time_budget.is_finite() || a.time_budget < 0.0 {
        return Err(Failure::Usage("--time-budget must be a nonnegative number of seconds".into()));
    }
    let opts = RankOptions { time_budget: std::time::Duration::from_secs_f64(a.time_budget), ..Default::default() };
    let value = match load_rank_input(&a.input)? {
        RankInput::Binary(t) => {
            let r = rank_toolkit_with(&t, kind, opts);
            if !r.verify_certificate(&t) {
                return Err(Failure::Verification("rank certificate does not sum to the input".into()));
            }
            rank_report_to_value(&r)
        }
        RankInput::Real(m) => {
            let (lower, upper) = nonneg_rank_real(&m)?;
            match kind {
                RankKind::Rank => json!({ "kind": "rank", "lower": lower, "upper": lower, "exact": true }),
                RankKind::Nonneg => {
                    json!({ "kind": "nonneg", "lower": lower, "upper": upper, "exact": lower == upper })
                }
                _ => return Err(SynthError::pre("xor and binary ranks need a 0/1 matrix").into()),
            }
        }
    };
    let text = to_json_string(&value);
    if let Some(p) = &a.output {
        write_atomic(p, &text)?;
    }
    let _ = write!(out, "{text}");
    Ok(())
}
