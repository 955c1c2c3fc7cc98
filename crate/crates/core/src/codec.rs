//! JSON file formats for matrices, circuits, binary matrices and
//! permutation tables.
//!
//! Output is deterministic: object keys are sorted, floats are written with
//! 17 significant digits (`{:.16e}`), and encode → decode → encode is
//! byte-identical. Complex entries are `[re, im]` pairs; matrices are lists
//! of rows.
//!
//! A circuit's `gates` list is the operator product `G0 · G1 · … · Gk`: the
//! last gate in the list acts first on a state.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Map, Value};

use crate::error::{Result, SynthError};
use crate::gateir::{
    Ancilla, Bound, Circuit, CnotGate, ControlledGate, GateRecord, GenericGate, LocalGate, Party, PartySpace,
    TwoLevelGate, UnitaryMatrix, KIND_CNOT, KIND_CONTROLLED, KIND_GENERIC, KIND_LOCAL, KIND_TWO_LEVEL,
};
use crate::matcore::{c, require_unitary, CMat};
use crate::permdecomp::ComplexPermutation;
use crate::protocols::{BinaryMatrix, RankReport};

/// Value of the `order` field in circuit files.
pub const GATE_ORDER: &str = "product-last-acts-first";

struct SciFloat;

impl Formatter for SciFloat {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes with sorted keys and 17-significant-digit floats.
pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFloat);
    v.serialize(&mut ser).expect("in-memory JSON serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Parses JSON, reporting syntax errors with a byte offset.
pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        let line = e.line().max(1);
        let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
        SynthError::Parse { offset: line_start + e.column().saturating_sub(1), msg: e.to_string() }
    })
}

/// Writes through a temporary file in the target directory and renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| SynthError::Io(e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn schema(msg: impl Into<String>) -> SynthError {
    SynthError::Precondition(format!("invalid file: {}", msg.into()))
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| schema(format!("missing field {key:?}")))
}

fn as_usize(v: &Value, what: &str) -> Result<usize> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| schema(format!("{what} must be a nonnegative integer")))
}

fn as_usize_list(v: &Value, what: &str) -> Result<Vec<usize>> {
    v.as_array().ok_or_else(|| schema(format!("{what} must be an array")))?.iter().map(|x| as_usize(x, what)).collect()
}

fn as_str<'a>(v: &'a Value, what: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| schema(format!("{what} must be a string")))
}

fn num(x: f64) -> Result<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| SynthError::pre("cannot encode a non-finite number"))
}

pub fn matrix_to_value(m: &CMat) -> Result<Value> {
    let rows = (0..m.nrows())
        .map(|i| {
            let row = (0..m.ncols())
                .map(|j| Ok(Value::Array(vec![num(m[(i, j)].re)?, num(m[(i, j)].im)?])))
                .collect::<Result<Vec<_>>>()?;
            Ok(Value::Array(row))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Value::Array(rows))
}

pub fn matrix_from_value(v: &Value) -> Result<CMat> {
    let rows = v.as_array().ok_or_else(|| schema("matrix must be an array of rows"))?;
    let ncols = rows.first().and_then(|r| r.as_array()).map(|r| r.len()).unwrap_or(0);
    let mut data = Vec::with_capacity(rows.len() * ncols);
    for row in rows {
        let row = row.as_array().ok_or_else(|| schema("matrix row must be an array"))?;
        if row.len() != ncols {
            return Err(schema("matrix rows have different lengths"));
        }
        for e in row {
            let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| schema("complex entry must be [re, im]"))?;
            let re = pair[0].as_f64().ok_or_else(|| schema("real part must be a number"))?;
            let im = pair[1].as_f64().ok_or_else(|| schema("imaginary part must be a number"))?;
            data.push(c(re, im));
        }
    }
    Ok(CMat::from_row_slice(rows.len(), ncols, &data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Unitary,
    Permutation,
    ComplexPermutation,
    Binary,
}

impl MatrixKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::Unitary => "unitary",
            MatrixKind::Permutation => "permutation",
            MatrixKind::ComplexPermutation => "complexPermutation",
            MatrixKind::Binary => "binary",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unitary" => Ok(MatrixKind::Unitary),
            "permutation" => Ok(MatrixKind::Permutation),
            "complexPermutation" => Ok(MatrixKind::ComplexPermutation),
            "binary" => Ok(MatrixKind::Binary),
            other => Err(schema(format!("unknown matrix kind {other:?}"))),
        }
    }
}

/// Matrix with party dimensions and a kind tag. For `Binary`, `dims` is
/// `[rows, cols]`; otherwise the matrix is square of size `∏ dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub dims: Vec<usize>,
    pub matrix: CMat,
    pub kind: MatrixKind,
}

fn snap01(x: f64) -> Option<f64> {
    if x.abs() <= 1e-12 {
        Some(0.0)
    } else if (x - 1.0).abs() <= 1e-12 {
        Some(1.0)
    } else {
        None
    }
}

impl MatrixFile {
    /// Checks the shape and the declared kind; permutation and binary entries
    /// within `1e-12` of 0 or 1 are snapped.
    pub fn new(dims: Vec<usize>, matrix: CMat, kind: MatrixKind) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(SynthError::dim("dims must be a nonempty list of positive integers"));
        }
        let shape = if kind == MatrixKind::Binary {
            if dims.len() != 2 {
                return Err(SynthError::dim("binary matrices take dims [rows, cols]"));
            }
            (dims[0], dims[1])
        } else {
            let n = dims.iter().product();
            (n, n)
        };
        if matrix.shape() != shape {
            return Err(SynthError::dim(format!("matrix shape {:?} does not match dims {dims:?}", matrix.shape())));
        }
        let mut matrix = matrix;
        match kind {
            MatrixKind::Unitary => require_unitary(&matrix, 1e-9)?,
            MatrixKind::ComplexPermutation => {
                ComplexPermutation::from_matrix(&matrix, dims.clone())?;
            }
            MatrixKind::Permutation | MatrixKind::Binary => {
                for v in matrix.iter_mut() {
                    let re = snap01(v.re).filter(|_| v.im.abs() <= 1e-12);
                    *v = c(re.ok_or_else(|| SynthError::pre(format!("entry {v} is not 0 or 1")))?, 0.0);
                }
                if kind == MatrixKind::Permutation {
                    ComplexPermutation::from_matrix(&matrix, dims.clone())?;
                }
            }
        }
        Ok(MatrixFile { dims, matrix, kind })
    }

    pub fn to_value(&self) -> Result<Value> {
        Ok(json!({ "dims": self.dims, "kind": self.kind.name(), "matrix": matrix_to_value(&self.matrix)? }))
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let dims = as_usize_list(field(v, "dims")?, "dims")?;
        let kind = MatrixKind::parse(as_str(field(v, "kind")?, "kind")?)?;
        let matrix = matrix_from_value(field(v, "matrix")?)?;
        MatrixFile::new(dims, matrix, kind)
    }

    pub fn unitary(&self) -> Result<UnitaryMatrix> {
        if self.kind == MatrixKind::Binary {
            return Err(SynthError::pre("a binary matrix is not an operator"));
        }
        UnitaryMatrix::new(self.dims.clone(), self.matrix.clone())
    }

    pub fn permutation(&self) -> Result<ComplexPermutation> {
        ComplexPermutation::from_matrix(&self.matrix, self.dims.clone())
    }

    pub fn binary(&self) -> Result<BinaryMatrix> {
        if self.kind != MatrixKind::Binary {
            return Err(SynthError::pre(format!("expected a binary matrix, found kind {}", self.kind.name())));
        }
        BinaryMatrix::new(self.dims[0], self.dims[1], self.matrix.iter().map(|v| v.re == 1.0).collect())
    }
}

pub fn encode_matrix_file(m: &MatrixFile) -> Result<String> {
    Ok(to_json_string(&m.to_value()?))
}

pub fn decode_matrix_file(text: &str) -> Result<MatrixFile> {
    MatrixFile::from_value(&parse_json(text)?)
}

pub fn load_matrix_file(path: &Path) -> Result<MatrixFile> {
    decode_matrix_file(&read_text(path)?)
}

pub fn save_matrix_file(path: &Path, m: &MatrixFile) -> Result<()> {
    write_atomic(path, &encode_matrix_file(m)?)
}

fn gate_to_value(g: &GateRecord) -> Result<Value> {
    Ok(match g {
        GateRecord::Controlled(x) => json!({
            "kind": KIND_CONTROLLED,
            "controls": x.controls,
            "targets": x.targets,
            "branches": x.branches.iter().map(matrix_to_value).collect::<Result<Vec<_>>>()?,
        }),
        GateRecord::Local(x) => json!({ "kind": KIND_LOCAL, "wires": x.wires, "matrix": matrix_to_value(&x.matrix)? }),
        GateRecord::TwoLevel(x) => json!({
            "kind": KIND_TWO_LEVEL,
            "wires": x.wires,
            "levels": x.levels,
            "matrix": matrix_to_value(&x.matrix)?,
        }),
        GateRecord::Cnot(x) => json!({
            "kind": KIND_CNOT,
            "control": x.control,
            "control_levels": x.control_levels,
            "target": x.target,
            "target_levels": x.target_levels,
        }),
        GateRecord::Generic(x) => json!({
            "kind": KIND_GENERIC,
            "wires": x.wires,
            "split": x.split,
            "matrix": matrix_to_value(&x.matrix)?,
        }),
    })
}

fn pair(v: &Value, what: &str) -> Result<[usize; 2]> {
    let l = as_usize_list(v, what)?;
    l.try_into().map_err(|_| schema(format!("{what} must have two entries")))
}

fn gate_from_value(v: &Value) -> Result<GateRecord> {
    let kind = as_str(field(v, "kind")?, "kind")?;
    Ok(match kind {
        KIND_CONTROLLED => GateRecord::Controlled(ControlledGate {
            controls: as_usize_list(field(v, "controls")?, "controls")?,
            targets: as_usize_list(field(v, "targets")?, "targets")?,
            branches: field(v, "branches")?
                .as_array()
                .ok_or_else(|| schema("branches must be an array"))?
                .iter()
                .map(matrix_from_value)
                .collect::<Result<_>>()?,
        }),
        KIND_LOCAL => GateRecord::Local(LocalGate {
            wires: as_usize_list(field(v, "wires")?, "wires")?,
            matrix: matrix_from_value(field(v, "matrix")?)?,
        }),
        KIND_TWO_LEVEL => {
            let levels = field(v, "levels")?
                .as_array()
                .filter(|l| l.len() == 2)
                .ok_or_else(|| schema("levels must be two pairs"))?;
            GateRecord::TwoLevel(TwoLevelGate {
                wires: pair(field(v, "wires")?, "wires")?,
                levels: [pair(&levels[0], "levels")?, pair(&levels[1], "levels")?],
                matrix: matrix_from_value(field(v, "matrix")?)?,
            })
        }
        KIND_CNOT => GateRecord::Cnot(CnotGate {
            control: as_usize(field(v, "control")?, "control")?,
            control_levels: pair(field(v, "control_levels")?, "control_levels")?,
            target: as_usize(field(v, "target")?, "target")?,
            target_levels: pair(field(v, "target_levels")?, "target_levels")?,
        }),
        KIND_GENERIC => GateRecord::Generic(GenericGate {
            wires: as_usize_list(field(v, "wires")?, "wires")?,
            split: as_usize(field(v, "split")?, "split")?,
            matrix: matrix_from_value(field(v, "matrix")?)?,
        }),
        other => return Err(schema(format!("unknown gate kind {other:?}"))),
    })
}

pub fn circuit_to_value(cir: &Circuit) -> Result<Value> {
    let parties: Vec<Value> =
        cir.space.parties.iter().map(|p| json!({ "name": p.name, "dim": p.dim, "site": p.site })).collect();
    let ancillas: Vec<Value> = cir
        .space
        .ancillas
        .iter()
        .map(|a| json!({ "name": a.name, "host": a.host, "dim": a.dim, "init": a.init }))
        .collect();
    let m = &cir.metrics;
    let bound = m.bound.as_ref().map(|b| json!({ "metric": b.metric, "value": b.value }));
    Ok(json!({
        "order": GATE_ORDER,
        "space": { "parties": parties, "ancillas": ancillas },
        "gates": cir.gates.iter().map(gate_to_value).collect::<Result<Vec<_>>>()?,
        "metrics": {
            "counts": m.counts,
            "nonlocal_cnots": m.nonlocal_cnots,
            "nonlocal_gates": m.nonlocal_gates,
            "ebits": m.ebits,
            "bound": bound,
            "bound_satisfied": m.bound_satisfied(),
        },
        "embedding": cir.embedding,
    }))
}

/// Decodes a circuit; the stored gate counts must match the gates.
pub fn circuit_from_value(v: &Value) -> Result<Circuit> {
    if let Some(order) = v.get("order") {
        if order.as_str() != Some(GATE_ORDER) {
            return Err(schema(format!("unsupported gate order {order}")));
        }
    }
    let space_v = field(v, "space")?;
    let parties = field(space_v, "parties")?
        .as_array()
        .ok_or_else(|| schema("parties must be an array"))?
        .iter()
        .map(|p| {
            let name = as_str(field(p, "name")?, "party name")?.to_string();
            let site = match p.get("site") {
                Some(s) => as_str(s, "site")?.to_string(),
                None => name.clone(),
            };
            Ok(Party { dim: as_usize(field(p, "dim")?, "party dim")?, name, site })
        })
        .collect::<Result<Vec<_>>>()?;
    let ancillas = match space_v.get("ancillas") {
        None => vec![],
        Some(a) => a
            .as_array()
            .ok_or_else(|| schema("ancillas must be an array"))?
            .iter()
            .map(|a| {
                Ok(Ancilla {
                    name: as_str(field(a, "name")?, "ancilla name")?.to_string(),
                    host: as_str(field(a, "host")?, "ancilla host")?.to_string(),
                    dim: as_usize(field(a, "dim")?, "ancilla dim")?,
                    init: as_usize(field(a, "init")?, "ancilla init")?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let space = PartySpace { parties, ancillas };
    space.validate()?;
    let gates = field(v, "gates")?
        .as_array()
        .ok_or_else(|| schema("gates must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, g)| gate_from_value(g).map_err(|e| SynthError::Ir { index: i, msg: e.to_string() }))
        .collect::<Result<Vec<_>>>()?;
    let mut cir = Circuit::from_gates(space, gates);
    if let Some(emb) = v.get("embedding").filter(|e| !e.is_null()) {
        let groups = emb.as_array().ok_or_else(|| schema("embedding must be an array"))?;
        cir.embedding = Some(groups.iter().map(|g| as_usize_list(g, "embedding group")).collect::<Result<_>>()?);
    }
    if let Some(m) = v.get("metrics") {
        if let Some(e) = m.get("ebits").filter(|e| !e.is_null()) {
            cir.metrics.ebits = Some(as_usize(e, "ebits")?);
        }
        if let Some(b) = m.get("bound").filter(|b| !b.is_null()) {
            cir.metrics.bound = Some(Bound {
                metric: as_str(field(b, "metric")?, "bound metric")?.to_string(),
                value: as_usize(field(b, "value")?, "bound value")?,
            });
        }
        if let Some(counts) = m.get("counts") {
            let stored: Map<String, Value> =
                counts.as_object().cloned().ok_or_else(|| schema("counts must be an object"))?;
            let computed = &cir.metrics.counts;
            let same = stored.len() == computed.len()
                && stored.iter().all(|(k, v)| v.as_u64().map(|x| x as usize) == computed.get(k).copied());
            if !same {
                return Err(schema("stored gate counts do not match the gates"));
            }
        }
    }
    Ok(cir)
}

pub fn encode_circuit(cir: &Circuit) -> Result<String> {
    Ok(to_json_string(&circuit_to_value(cir)?))
}

pub fn decode_circuit(text: &str) -> Result<Circuit> {
    circuit_from_value(&parse_json(text)?)
}

pub fn load_circuit(path: &Path) -> Result<Circuit> {
    decode_circuit(&read_text(path)?)
}

pub fn save_circuit(path: &Path, cir: &Circuit) -> Result<()> {
    write_atomic(path, &encode_circuit(cir)?)
}

pub fn binary_to_value(t: &BinaryMatrix) -> Value {
    json!({ "rows": t.rows, "cols": t.cols, "bits": t.bit_string() })
}

pub fn binary_from_value(v: &Value) -> Result<BinaryMatrix> {
    let rows = as_usize(field(v, "rows")?, "rows")?;
    let cols = as_usize(field(v, "cols")?, "cols")?;
    BinaryMatrix::from_bit_string(rows, cols, as_str(field(v, "bits")?, "bits")?)
}

pub fn encode_binary(t: &BinaryMatrix) -> String {
    to_json_string(&binary_to_value(t))
}

pub fn decode_binary(text: &str) -> Result<BinaryMatrix> {
    binary_from_value(&parse_json(text)?)
}

pub fn rank_report_to_value(r: &RankReport) -> Value {
    let bits = |v: &[bool]| v.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
    json!({
        "kind": r.kind.name(),
        "lower": r.lower,
        "upper": r.upper,
        "exact": r.is_exact(),
        "certificate": r.certificate.iter().map(|f| json!({ "u": bits(&f.u), "v": bits(&f.v) })).collect::<Vec<_>>(),
        "pivots": r.pivots,
    })
}

/// Classical permutation table: rows `[in_A, in_B, out_A, out_B]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableFile {
    pub dims: [usize; 2],
    pub rows: Vec<[usize; 4]>,
}

pub fn table_to_value(t: &TableFile) -> Value {
    json!({ "dims": t.dims, "rows": t.rows })
}

/// Accepts `{"dims", "rows"}` or a bare array of rows (dims inferred).
pub fn table_from_value(v: &Value) -> Result<TableFile> {
    let (rows_v, dims) = match v {
        Value::Array(_) => (v, None),
        _ => (field(v, "rows")?, Some(pair(field(v, "dims")?, "dims")?)),
    };
    let rows: Vec<[usize; 4]> = rows_v
        .as_array()
        .ok_or_else(|| schema("rows must be an array"))?
        .iter()
        .map(|r| as_usize_list(r, "table row")?.try_into().map_err(|_| schema("table rows have four entries")))
        .collect::<Result<_>>()?;
    let dims = match dims {
        Some(d) => d,
        None => {
            let da = rows.iter().map(|r| r[0].max(r[2]) + 1).max().unwrap_or(0);
            let db = rows.iter().map(|r| r[1].max(r[3]) + 1).max().unwrap_or(0);
            [da, db]
        }
    };
    Ok(TableFile { dims, rows })
}

pub fn encode_table(t: &TableFile) -> String {
    to_json_string(&table_to_value(t))
}

pub fn decode_table(text: &str) -> Result<TableFile> {
    table_from_value(&parse_json(text)?)
}
