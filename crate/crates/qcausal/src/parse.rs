//! File formats: model files, measurement-plan files, observation tables and
//! channel files, all TOML documents. Parsing goes through `toml` + serde so
//! syntax errors carry line/column positions; writing is done by hand so
//! every floating-point number is emitted with 17 significant digits, which
//! round-trips `f64` bit-exactly.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::Deserialize;

use crate::diagram::{parse_consumer, parse_producer, Diagram, Model};
use crate::error::{Error, Result};
use crate::identify::{IdentifyDiagnostics, InterventionalChannel};
use crate::instruments::{
    Basis, MeasurementPlan, ObservationTable, PlanChoice, TRIVIAL_CHOICE,
};
use crate::theory::{ProcessValue, SystemType, TheoryTag};

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn toml_error(text: &str, err: toml::de::Error) -> Error {
    let (line, col) = match err.span() {
        Some(span) => {
            let upto = &text[..span.start.min(text.len())];
            let line = upto.matches('\n').count() + 1;
            let col = upto.chars().rev().take_while(|&c| c != '\n').count() + 1;
            (line, col)
        }
        None => (0, 0),
    };
    Error::SyntaxError { line, col, msg: err.message().to_string() }
}

fn parse_theory(s: &str) -> Result<TheoryTag> {
    match s {
        "classical" => Ok(TheoryTag::Classical),
        "quantum" => Ok(TheoryTag::Quantum),
        other => Err(Error::SyntaxError {
            line: 0,
            col: 0,
            msg: format!("theory must be `classical` or `quantum`, got `{other}`"),
        }),
    }
}

fn value_as_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Integer(i) => Some(*i as f64),
        toml::Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn value_as_complex(v: &toml::Value) -> Option<Complex64> {
    let arr = v.as_array()?;
    if arr.len() != 2 {
        return None;
    }
    Some(Complex64::new(value_as_f64(&arr[0])?, value_as_f64(&arr[1])?))
}

// ---------------------------------------------------------------------------
// model files

#[derive(Deserialize)]
struct RawModel {
    theory: String,
    #[serde(default)]
    systems: BTreeMap<String, i64>,
    #[serde(default)]
    boxes: Vec<RawBox>,
    #[serde(default)]
    loci: Vec<RawLocus>,
    #[serde(default)]
    wires: Vec<RawWire>,
}

#[derive(Deserialize)]
struct RawBox {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    kind: String,
    data: toml::Value,
}

#[derive(Deserialize)]
struct RawLocus {
    name: String,
    system: String,
}

#[derive(Deserialize)]
struct RawWire {
    from: String,
    to: String,
}

fn classical_matrix(name: &str, data: &toml::Value, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let bad = |reason: String| Error::InvalidBoxData { name: name.into(), reason };
    let outer = data.as_array().ok_or_else(|| bad("matrix data must be an array of rows".into()))?;
    if outer.len() != rows {
        return Err(bad(format!("expected {rows} rows, got {}", outer.len())));
    }
    let mut m = Array2::zeros((rows, cols));
    for (r, row) in outer.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| bad(format!("row {r} is not an array")))?;
        if row.len() != cols {
            return Err(bad(format!("row {r} has {} entries, expected {cols}", row.len())));
        }
        for (c, v) in row.iter().enumerate() {
            m[[r, c]] =
                value_as_f64(v).ok_or_else(|| bad(format!("entry ({r},{c}) is not a number")))?;
        }
    }
    Ok(m)
}

fn kraus_list(name: &str, data: &toml::Value, rows: usize, cols: usize) -> Result<Vec<Array2<Complex64>>> {
    let bad = |reason: String| Error::InvalidBoxData { name: name.into(), reason };
    let ops = data
        .as_array()
        .ok_or_else(|| bad("kraus data must be an array of operators".into()))?;
    let mut out = Vec::with_capacity(ops.len());
    for (k, op) in ops.iter().enumerate() {
        let op = op.as_array().ok_or_else(|| bad(format!("operator {k} is not an array")))?;
        if op.len() != rows {
            return Err(bad(format!("operator {k} has {} rows, expected {rows}", op.len())));
        }
        let mut m = Array2::zeros((rows, cols));
        for (r, row) in op.iter().enumerate() {
            let row =
                row.as_array().ok_or_else(|| bad(format!("operator {k} row {r} is not an array")))?;
            if row.len() != cols {
                return Err(bad(format!(
                    "operator {k} row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for (c, v) in row.iter().enumerate() {
                m[[r, c]] = value_as_complex(v).ok_or_else(|| {
                    bad(format!("operator {k} entry ({r},{c}) must be [re, im]"))
                })?;
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Parses and fully validates a model file.
pub fn parse_model(text: &str) -> Result<Model> {
    let raw: RawModel = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let theory = parse_theory(&raw.theory)?;

    let mut builder = Diagram::builder();
    for (name, dim) in &raw.systems {
        if *dim < 1 {
            return Err(Error::UnknownSystem { name: format!("{name} (dimension {dim})") });
        }
        builder = builder.system(name, *dim as usize);
    }
    for b in &raw.boxes {
        let ins: Vec<&str> = b.inputs.iter().map(String::as_str).collect();
        let outs: Vec<&str> = b.outputs.iter().map(String::as_str).collect();
        builder = builder.add_box(&b.name, &ins, &outs);
    }
    for l in &raw.loci {
        builder = builder.add_locus(&l.name, &l.system);
    }
    for w in &raw.wires {
        builder = builder.wire(parse_producer(&w.from)?, parse_consumer(&w.to)?);
    }
    let diagram = builder.build()?;

    let mut interpretation = BTreeMap::new();
    for b in &raw.boxes {
        let decl = diagram.box_decl(&b.name)?;
        let hil = |types: &[SystemType]| types.iter().map(|t| t.dim()).product::<usize>();
        let pv = match (b.kind.as_str(), theory) {
            ("matrix", TheoryTag::Classical) => {
                let m = classical_matrix(&b.name, &b.data, hil(&decl.outputs), hil(&decl.inputs))?;
                ProcessValue::classical(decl.inputs.clone(), decl.outputs.clone(), m).map_err(
                    |e| match e {
                        Error::InvalidBoxData { reason, .. } => {
                            Error::InvalidBoxData { name: b.name.clone(), reason }
                        }
                        e => e,
                    },
                )?
            }
            ("kraus", TheoryTag::Quantum) => {
                let ks = kraus_list(&b.name, &b.data, hil(&decl.outputs), hil(&decl.inputs))?;
                ProcessValue::from_kraus(decl.inputs.clone(), decl.outputs.clone(), &ks).map_err(
                    |e| match e {
                        Error::InvalidBoxData { reason, .. } => {
                            Error::InvalidBoxData { name: b.name.clone(), reason }
                        }
                        e => e,
                    },
                )?
            }
            (kind, theory) => {
                return Err(Error::InvalidBoxData {
                    name: b.name.clone(),
                    reason: format!("kind `{kind}` is not valid in the {theory} theory"),
                })
            }
        };
        interpretation.insert(b.name.clone(), pv);
    }
    Model::new(diagram, theory, interpretation)
}

/// Everything needed to write a model file; the payload keeps the boundary
/// form (stochastic matrix or Kraus operators) the file format uses.
pub struct ModelSpec {
    pub theory: TheoryTag,
    pub systems: Vec<(String, usize)>,
    pub boxes: Vec<BoxSpec>,
    pub loci: Vec<(String, String)>,
    pub wires: Vec<(String, String)>,
}

pub struct BoxSpec {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub payload: BoxPayload,
}

pub enum BoxPayload {
    Matrix(Array2<f64>),
    Kraus(Vec<Array2<Complex64>>),
}

pub fn write_model_toml(spec: &ModelSpec) -> String {
    let mut s = String::new();
    s.push_str(&format!("theory = \"{}\"\n\n[systems]\n", spec.theory));
    for (name, dim) in &spec.systems {
        s.push_str(&format!("{name} = {dim}\n"));
    }
    for b in &spec.boxes {
        s.push_str(&format!("\n[[boxes]]\nname = \"{}\"\n", b.name));
        let list = |v: &[String]| {
            v.iter().map(|x| format!("\"{x}\"")).collect::<Vec<_>>().join(", ")
        };
        s.push_str(&format!("inputs = [{}]\n", list(&b.inputs)));
        s.push_str(&format!("outputs = [{}]\n", list(&b.outputs)));
        match &b.payload {
            BoxPayload::Matrix(m) => {
                s.push_str("kind = \"matrix\"\ndata = [\n");
                for r in 0..m.nrows() {
                    let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[[r, c]])).collect();
                    s.push_str(&format!("  [{}],\n", row.join(", ")));
                }
                s.push_str("]\n");
            }
            BoxPayload::Kraus(ops) => {
                s.push_str("kind = \"kraus\"\ndata = [\n");
                for op in ops {
                    s.push_str("  [\n");
                    for r in 0..op.nrows() {
                        let row: Vec<String> = (0..op.ncols())
                            .map(|c| {
                                format!("[{}, {}]", fmt_f64(op[[r, c]].re), fmt_f64(op[[r, c]].im))
                            })
                            .collect();
                        s.push_str(&format!("    [{}],\n", row.join(", ")));
                    }
                    s.push_str("  ],\n");
                }
                s.push_str("]\n");
            }
        }
    }
    for (name, system) in &spec.loci {
        s.push_str(&format!("\n[[loci]]\nname = \"{name}\"\nsystem = \"{system}\"\n"));
    }
    s.push('\n');
    for (from, to) in &spec.wires {
        s.push_str(&format!("[[wires]]\nfrom = \"{from}\"\nto = \"{to}\"\n"));
    }
    s
}

// ---------------------------------------------------------------------------
// plan files

#[derive(Deserialize)]
struct RawPlanFile {
    #[serde(default)]
    plan: Vec<RawPlanEntry>,
    #[serde(default)]
    bases: Vec<RawBasisDef>,
}

#[derive(Deserialize)]
struct RawPlanEntry {
    locus: String,
    choices: Vec<String>,
}

#[derive(Deserialize)]
struct RawBasisDef {
    locus: String,
    id: String,
    vectors: Vec<Vec<[f64; 2]>>,
}

fn basis_from_vectors(id: &str, system: &SystemType, vectors: &[Vec<[f64; 2]>]) -> Result<Basis> {
    let vs: Vec<Array1<Complex64>> = vectors
        .iter()
        .map(|v| Array1::from_iter(v.iter().map(|[re, im]| Complex64::new(*re, *im))))
        .collect();
    Basis::quantum(id, system.clone(), vs)
}

fn resolve_choice(
    theory: TheoryTag,
    locus: &str,
    system: &SystemType,
    id: &str,
    customs: &[RawBasisDef],
) -> Result<PlanChoice> {
    if id == TRIVIAL_CHOICE {
        return Ok(PlanChoice::Trivial);
    }
    if let Some(def) = customs.iter().find(|b| b.locus == locus && b.id == id) {
        if theory != TheoryTag::Quantum {
            return Err(Error::BadPlan {
                context: format!("explicit basis `{id}` requires the quantum theory"),
            });
        }
        return Ok(PlanChoice::Basis(basis_from_vectors(id, system, &def.vectors)?));
    }
    crate::instruments::standard_bases(theory, system)
        .into_iter()
        .find(|b| b.id() == id)
        .map(PlanChoice::Basis)
        .ok_or_else(|| Error::BadPlan {
            context: format!("unknown basis `{id}` for locus `{locus}`"),
        })
}

/// Parses a plan file against a model's loci; every locus must be assigned.
pub fn parse_plan(text: &str, m: &Model) -> Result<MeasurementPlan> {
    let raw: RawPlanFile = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let theory = m.theory();
    let mut loci = Vec::new();
    let mut choices = Vec::new();
    for l in m.diagram().loci() {
        let entry = raw
            .plan
            .iter()
            .find(|e| e.locus == l.name)
            .ok_or_else(|| Error::BadPlan { context: format!("locus `{}` not assigned", l.name) })?;
        let mut cs = Vec::new();
        for id in &entry.choices {
            cs.push(resolve_choice(theory, &l.name, &l.system, id, &raw.bases)?);
        }
        if cs.is_empty() {
            return Err(Error::BadPlan {
                context: format!("locus `{}` has an empty choice list", l.name),
            });
        }
        loci.push((l.name.clone(), l.system.clone()));
        choices.push(cs);
    }
    Ok(MeasurementPlan { loci, choices })
}

// ---------------------------------------------------------------------------
// observation tables

#[derive(Deserialize)]
struct RawTable {
    theory: String,
    loci: Vec<RawTableLocus>,
    #[serde(default)]
    bases: Vec<RawBasisDef>,
    #[serde(default)]
    rows: Vec<RawRow>,
}

#[derive(Deserialize)]
struct RawTableLocus {
    name: String,
    system: String,
    dim: usize,
    choices: Vec<String>,
}

#[derive(Deserialize)]
struct RawRow {
    choices: Vec<String>,
    outcomes: Vec<usize>,
    p: f64,
}

pub fn table_to_toml(t: &ObservationTable) -> String {
    let mut s = String::new();
    s.push_str(&format!("theory = \"{}\"\n", t.theory));
    for (li, (name, sys)) in t.plan.loci.iter().enumerate() {
        s.push_str(&format!(
            "\n[[loci]]\nname = \"{name}\"\nsystem = \"{}\"\ndim = {}\n",
            sys.name(),
            sys.dim()
        ));
        let ids: Vec<String> =
            t.plan.choices[li].iter().map(|c| format!("\"{}\"", c.id())).collect();
        s.push_str(&format!("choices = [{}]\n", ids.join(", ")));
    }
    if t.theory == TheoryTag::Quantum {
        for (li, (name, _)) in t.plan.loci.iter().enumerate() {
            for c in &t.plan.choices[li] {
                if let PlanChoice::Basis(b) = c {
                    let vectors = b.vectors().expect("quantum basis has vectors");
                    s.push_str(&format!("\n[[bases]]\nlocus = \"{name}\"\nid = \"{}\"\n", b.id()));
                    s.push_str("vectors = [\n");
                    for v in vectors {
                        let comps: Vec<String> = v
                            .iter()
                            .map(|z| format!("[{}, {}]", fmt_f64(z.re), fmt_f64(z.im)))
                            .collect();
                        s.push_str(&format!("  [{}],\n", comps.join(", ")));
                    }
                    s.push_str("]\n");
                }
            }
        }
    }
    s.push('\n');
    for ((choices, outcomes), p) in t.entries() {
        let cs: Vec<String> = choices.iter().map(|c| format!("\"{c}\"")).collect();
        let os: Vec<String> = outcomes.iter().map(|o| o.to_string()).collect();
        s.push_str(&format!(
            "[[rows]]\nchoices = [{}]\noutcomes = [{}]\np = {}\n",
            cs.join(", "),
            os.join(", "),
            fmt_f64(*p)
        ));
    }
    s
}

pub fn table_from_toml(text: &str) -> Result<ObservationTable> {
    let raw: RawTable = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    let theory = parse_theory(&raw.theory)?;
    let mut loci = Vec::new();
    let mut choices = Vec::new();
    for l in &raw.loci {
        let sys = SystemType::new(&l.system, l.dim);
        let mut cs = Vec::new();
        for id in &l.choices {
            cs.push(resolve_choice_for_table(theory, &l.name, &sys, id, &raw.bases)?);
        }
        loci.push((l.name.clone(), sys));
        choices.push(cs);
    }
    let plan = MeasurementPlan { loci, choices };
    let mut entries = BTreeMap::new();
    for r in &raw.rows {
        if r.choices.len() != plan.loci.len() || r.outcomes.len() != plan.loci.len() {
            return Err(Error::BadPlan {
                context: "row arity does not match the locus count".into(),
            });
        }
        entries.insert((r.choices.clone(), r.outcomes.clone()), r.p);
    }
    ObservationTable::from_parts(theory, plan, entries)
}

fn resolve_choice_for_table(
    theory: TheoryTag,
    locus: &str,
    system: &SystemType,
    id: &str,
    customs: &[RawBasisDef],
) -> Result<PlanChoice> {
    if id == TRIVIAL_CHOICE {
        return Ok(PlanChoice::Trivial);
    }
    match theory {
        TheoryTag::Classical => {
            if id == "std" {
                Ok(PlanChoice::Basis(Basis::classical_standard(system.clone())))
            } else {
                Err(Error::BadPlan { context: format!("unknown classical basis `{id}`") })
            }
        }
        TheoryTag::Quantum => {
            let def = customs.iter().find(|b| b.locus == locus && b.id == id).ok_or_else(|| {
                Error::BadPlan {
                    context: format!("table lists choice `{id}` at `{locus}` without vectors"),
                }
            })?;
            Ok(PlanChoice::Basis(basis_from_vectors(id, system, &def.vectors)?))
        }
    }
}

// ---------------------------------------------------------------------------
// channel files

#[derive(Deserialize)]
struct RawChannel {
    kind: String,
    theory: String,
    source: String,
    target: String,
    in_systems: Vec<(String, usize)>,
    out_systems: Vec<(String, usize)>,
    rows: Vec<Vec<[f64; 2]>>,
}

pub fn channel_to_toml(ch: &InterventionalChannel, diag: Option<&IdentifyDiagnostics>) -> String {
    let pv = &ch.channel;
    let mut s = String::new();
    s.push_str("kind = \"interventional-channel\"\n");
    s.push_str(&format!("theory = \"{}\"\n", pv.theory()));
    s.push_str(&format!("source = \"{}\"\ntarget = \"{}\"\n", ch.source, ch.target));
    let sys_list = |types: &[SystemType]| {
        types
            .iter()
            .map(|t| format!("[\"{}\", {}]", t.name(), t.dim()))
            .collect::<Vec<_>>()
            .join(", ")
    };
    s.push_str(&format!("in_systems = [{}]\n", sys_list(pv.in_type())));
    s.push_str(&format!("out_systems = [{}]\n", sys_list(pv.out_type())));
    s.push_str("rows = [\n");
    let m = pv.mat();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|c| format!("[{}, {}]", fmt_f64(m[[r, c]].re), fmt_f64(m[[r, c]].im)))
            .collect();
        s.push_str(&format!("  [{}],\n", row.join(", ")));
    }
    s.push_str("]\n");
    if let Some(d) = diag {
        s.push_str("\n[diagnostics]\n");
        s.push_str(&format!("min_divisor = {}\n", fmt_f64(d.min_divisor)));
        for (locus, cond) in &d.frame_conditions {
            s.push_str(&format!("condition_{locus} = {}\n", fmt_f64(*cond)));
        }
        for (locus, bases) in &d.frame_bases {
            let ids: Vec<String> = bases.iter().map(|b| format!("\"{b}\"")).collect();
            s.push_str(&format!("frames_{locus} = [{}]\n", ids.join(", ")));
        }
    }
    s
}

pub fn channel_from_toml(text: &str) -> Result<InterventionalChannel> {
    let raw: RawChannel = toml::from_str(text).map_err(|e| toml_error(text, e))?;
    if raw.kind != "interventional-channel" {
        return Err(Error::SyntaxError {
            line: 0,
            col: 0,
            msg: format!("expected kind `interventional-channel`, got `{}`", raw.kind),
        });
    }
    let theory = parse_theory(&raw.theory)?;
    let ins: Vec<SystemType> =
        raw.in_systems.iter().map(|(n, d)| SystemType::new(n, *d)).collect();
    let outs: Vec<SystemType> =
        raw.out_systems.iter().map(|(n, d)| SystemType::new(n, *d)).collect();
    let rows = raw.rows.len();
    let cols = raw.rows.first().map_or(0, Vec::len);
    if raw.rows.iter().any(|r| r.len() != cols) {
        return Err(Error::ShapeMismatch { context: "ragged channel matrix".into() });
    }
    let mut mat = Array2::zeros((rows, cols));
    for (r, row) in raw.rows.iter().enumerate() {
        for (c, [re, im]) in row.iter().enumerate() {
            mat[[r, c]] = Complex64::new(*re, *im);
        }
    }
    let pv = ProcessValue::from_rep_matrix(theory, ins, outs, mat)?;
    Ok(InterventionalChannel { source: raw.source, target: raw.target, channel: pv })
}
