//! Observation and intervention machinery: projective instruments, the
//! observation outcomes obtainable at intervention loci, informationally
//! complete frames with their dual families, joint observational statistics
//! and tomographic reconstruction from generalized matrix elements.

use std::collections::BTreeMap;

use itertools::Itertools;
use ndarray::{Array1, Array2, Dimension};
use num_complex::Complex64;

use crate::contract::{as_comb, observe_joint};
use crate::diagram::Model;
use crate::error::{Error, Result};
use crate::linalg;
use crate::theory::{identity, rep_dim_of, ProcessValue, SystemType, TheoryTag};
use crate::tol;

/// Reserved choice id for the identity (totally uninformative) measurement.
pub const TRIVIAL_CHOICE: &str = "trivial";

/// An orthonormal measurement basis on one system. `vectors` is `None` for
/// the classical standard basis (the only classical basis admitted).
#[derive(Clone, Debug)]
pub struct Basis {
    id: String,
    system: SystemType,
    vectors: Option<Vec<Array1<Complex64>>>,
}

impl Basis {
    pub fn classical_standard(system: SystemType) -> Basis {
        Basis { id: "std".into(), system, vectors: None }
    }

    /// A quantum basis from explicit orthonormal vectors.
    pub fn quantum(id: impl Into<String>, system: SystemType, vectors: Vec<Array1<Complex64>>) -> Result<Basis> {
        let id = id.into();
        let d = system.dim();
        if vectors.len() != d || vectors.iter().any(|v| v.len() != d) {
            return Err(Error::BadPlan {
                context: format!("basis `{id}` must have {d} vectors of length {d}"),
            });
        }
        for (i, vi) in vectors.iter().enumerate() {
            for (j, vj) in vectors.iter().enumerate() {
                let ip: Complex64 = vi.iter().zip(vj.iter()).map(|(a, b)| a.conj() * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (ip - expect).norm() > 1e-9 {
                    return Err(Error::BadPlan {
                        context: format!("basis `{id}` is not orthonormal (<{i}|{j}> = {ip})"),
                    });
                }
            }
        }
        Ok(Basis { id, system, vectors: Some(vectors) })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn system(&self) -> &SystemType {
        &self.system
    }

    pub fn outcome_count(&self) -> usize {
        self.system.dim()
    }

    pub fn vectors(&self) -> Option<&[Array1<Complex64>]> {
        self.vectors.as_deref()
    }

    /// Rank-1 projector of outcome `k` (quantum bases only).
    pub fn projector(&self, k: usize) -> Result<Array2<Complex64>> {
        let vs = self.vectors.as_ref().ok_or(Error::WrongTheory { expected: "quantum" })?;
        let v = &vs[k];
        let d = v.len();
        Ok(Array2::from_shape_fn((d, d), |(r, c)| v[r] * v[c].conj()))
    }

    /// The non-deterministic instrument whose outcome `k` applies the
    /// outcome-`k` effect and re-prepares the matching state.
    pub fn instrument(&self, theory: TheoryTag) -> Result<ProjectiveInstrument> {
        let d = self.system.dim();
        let mut outcomes = Vec::with_capacity(d);
        match (&self.vectors, theory) {
            (None, TheoryTag::Classical) => {
                for k in 0..d {
                    let mut m = Array2::zeros((d, d));
                    m[[k, k]] = 1.0;
                    outcomes.push(ProcessValue::classical(
                        vec![self.system.clone()],
                        vec![self.system.clone()],
                        m,
                    )?);
                }
            }
            (Some(_), TheoryTag::Quantum) => {
                for k in 0..d {
                    let p = self.projector(k)?;
                    let state = quantum_state_from_operator(&self.system, &p);
                    let effect = quantum_effect_from_operator(&self.system, &p);
                    outcomes.push(state.compose_seq(&effect)?);
                }
            }
            _ => {
                return Err(Error::BadPlan {
                    context: format!("basis `{}` does not belong to the {} theory", self.id, theory),
                })
            }
        }
        Ok(ProjectiveInstrument {
            system: self.system.clone(),
            basis_id: self.id.clone(),
            outcomes,
        })
    }
}

/// A projective instrument: one outcome map per basis element, summing to
/// the causal measure-and-forget channel.
#[derive(Clone, Debug)]
pub struct ProjectiveInstrument {
    pub system: SystemType,
    pub basis_id: String,
    pub outcomes: Vec<ProcessValue>,
}

/// A causal state whose density operator is `p` (assumed positive,
/// trace-normalized by the caller where needed).
pub(crate) fn quantum_state_from_operator(system: &SystemType, p: &Array2<Complex64>) -> ProcessValue {
    let d = system.dim();
    let mut col = Array2::zeros((d * d, 1));
    for c in 0..d {
        for r in 0..d {
            col[[c * d + r, 0]] = p[[r, c]];
        }
    }
    ProcessValue::from_rep_matrix(TheoryTag::Quantum, vec![], vec![system.clone()], col)
        .expect("shape by construction")
}

/// The effect `X -> tr(pX)`.
pub(crate) fn quantum_effect_from_operator(system: &SystemType, p: &Array2<Complex64>) -> ProcessValue {
    let d = system.dim();
    let mut row = Array2::zeros((1, d * d));
    for c in 0..d {
        for r in 0..d {
            row[[0, c * d + r]] = p[[c, r]];
        }
    }
    ProcessValue::from_rep_matrix(TheoryTag::Quantum, vec![system.clone()], vec![], row)
        .expect("shape by construction")
}

/// The deterministic basis family used for auto plans and standard frames:
/// the standard basis plus, for every index pair i < j and phase 0 or π/2,
/// the basis containing (|i> ± e^{iφ}|j>)/√2 together with the remaining
/// standard vectors. For qubits these are the three Pauli bases.
pub fn standard_bases(theory: TheoryTag, system: &SystemType) -> Vec<Basis> {
    match theory {
        TheoryTag::Classical => vec![Basis::classical_standard(system.clone())],
        TheoryTag::Quantum => {
            let d = system.dim();
            let e = |k: usize| {
                Array1::from_shape_fn(d, |i| {
                    if i == k {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
            };
            let mut out = Vec::new();
            let std_vectors: Vec<Array1<Complex64>> = (0..d).map(e).collect();
            out.push(Basis::quantum("std", system.clone(), std_vectors).unwrap());
            let inv_rt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            for i in 0..d {
                for j in (i + 1)..d {
                    for (tag, phase) in [("r", Complex64::new(1.0, 0.0)), ("i", Complex64::new(0.0, 1.0))] {
                        let plus = (e(i) + e(j).mapv(|v| v * phase)).mapv(|v| v * inv_rt2);
                        let minus = (e(i) - e(j).mapv(|v| v * phase)).mapv(|v| v * inv_rt2);
                        let mut vectors = vec![plus, minus];
                        for k in 0..d {
                            if k != i && k != j {
                                vectors.push(e(k));
                            }
                        }
                        out.push(
                            Basis::quantum(format!("sup{i}{j}{tag}"), system.clone(), vectors)
                                .unwrap(),
                        );
                    }
                }
            }
            out
        }
    }
}

/// Where a frame element came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FrameLabel {
    Outcome { basis: String, outcome: usize },
    Product(Vec<FrameLabel>),
}

impl std::fmt::Display for FrameLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrameLabel::Outcome { basis, outcome } => write!(f, "{basis}:{outcome}"),
            FrameLabel::Product(parts) => {
                let s: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "{}", s.join("⊗"))
            }
        }
    }
}

/// An informationally complete family of states and effects on a port list,
/// with its dual families precomputed via pseudoinversion.
#[derive(Clone, Debug)]
pub struct Frame {
    theory: TheoryTag,
    ports: Vec<SystemType>,
    states: Vec<ProcessValue>,
    effects: Vec<ProcessValue>,
    labels: Vec<FrameLabel>,
    state_matrix: Array2<Complex64>,
    effect_matrix: Array2<Complex64>,
    dual_states: Array2<Complex64>,
    dual_effects: Array2<Complex64>,
    gram_rank: usize,
    cond_states: f64,
    cond_effects: f64,
}

impl Frame {
    fn assemble(
        theory: TheoryTag,
        ports: Vec<SystemType>,
        states: Vec<ProcessValue>,
        effects: Vec<ProcessValue>,
        labels: Vec<FrameLabel>,
    ) -> Result<Frame> {
        let rep = rep_dim_of(theory, &ports);
        let n = states.len();
        let mut state_matrix = Array2::zeros((rep, n));
        let mut effect_matrix = Array2::zeros((n, rep));
        for (k, s) in states.iter().enumerate() {
            state_matrix.column_mut(k).assign(&s.mat().column(0));
        }
        for (k, e) in effects.iter().enumerate() {
            effect_matrix.row_mut(k).assign(&e.mat().row(0));
        }
        let rank = linalg::rank(&state_matrix, tol::FRAME_RANK_REL);
        if rank < rep {
            return Err(Error::RankDeficientFrame {
                context: format!("{n} states span rank {rank} of {rep}"),
            });
        }
        let erank = linalg::rank(&effect_matrix, tol::FRAME_RANK_REL);
        if erank < rep {
            return Err(Error::RankDeficientFrame {
                context: format!("{n} effects span rank {erank} of {rep}"),
            });
        }
        let sv_s = linalg::singular_values(&state_matrix);
        let sv_e = linalg::singular_values(&effect_matrix);
        let cond = |sv: &[f64], rank: usize| sv[0] / sv[rank - 1];
        let dual_states = linalg::pinv(&state_matrix, tol::FRAME_RANK_REL)?;
        let dual_effects = linalg::pinv(&effect_matrix, tol::FRAME_RANK_REL)?;
        Ok(Frame {
            theory,
            ports,
            states,
            effects,
            labels,
            cond_states: cond(&sv_s, rank),
            cond_effects: cond(&sv_e, erank),
            gram_rank: rank,
            state_matrix,
            effect_matrix,
            dual_states,
            dual_effects,
        })
    }

    /// Builds a single-port frame from measurement bases, deduplicating
    /// repeated projectors; each element records the (basis, outcome) pair
    /// that realizes it in an observation table.
    pub fn from_bases(theory: TheoryTag, system: &SystemType, bases: &[Basis]) -> Result<Frame> {
        let mut states: Vec<ProcessValue> = Vec::new();
        let mut effects = Vec::new();
        let mut labels = Vec::new();
        for b in bases {
            if b.system() != system {
                return Err(Error::TypeMismatch {
                    context: format!("basis `{}` is for system {}, frame is on {}", b.id, b.system, system),
                });
            }
            for k in 0..b.outcome_count() {
                let (state, effect) = match theory {
                    TheoryTag::Classical => {
                        let d = system.dim();
                        let mut col = Array2::zeros((d, 1));
                        col[[k, 0]] = 1.0;
                        let mut row = Array2::zeros((1, d));
                        row[[0, k]] = 1.0;
                        (
                            ProcessValue::classical(vec![], vec![system.clone()], col)?,
                            ProcessValue::classical(vec![system.clone()], vec![], row)?,
                        )
                    }
                    TheoryTag::Quantum => {
                        let p = b.projector(k)?;
                        (
                            quantum_state_from_operator(system, &p),
                            quantum_effect_from_operator(system, &p),
                        )
                    }
                };
                let duplicate = states
                    .iter()
                    .any(|s| linalg::max_abs_diff(s.mat(), state.mat()) <= 1e-9);
                if !duplicate {
                    states.push(state);
                    effects.push(effect);
                    labels.push(FrameLabel::Outcome { basis: b.id.clone(), outcome: k });
                }
            }
        }
        Frame::assemble(theory, vec![system.clone()], states, effects, labels)
    }

    /// Tensor-product frame; elements are products in row-major label order
    /// (this frame's index major).
    pub fn product(&self, other: &Frame) -> Result<Frame> {
        if self.theory != other.theory {
            return Err(Error::TheoryMismatch);
        }
        let mut ports = self.ports.clone();
        ports.extend_from_slice(&other.ports);
        let mut states = Vec::new();
        let mut effects = Vec::new();
        let mut labels = Vec::new();
        for (sa, (ea, la)) in self.states.iter().zip(self.effects.iter().zip(self.labels.iter())) {
            for (sb, (eb, lb)) in
                other.states.iter().zip(other.effects.iter().zip(other.labels.iter()))
            {
                states.push(sa.tensor(sb)?);
                effects.push(ea.tensor(eb)?);
                labels.push(FrameLabel::Product(vec![la.clone(), lb.clone()]));
            }
        }
        Frame::assemble(self.theory, ports, states, effects, labels)
    }

    pub fn theory(&self) -> TheoryTag {
        self.theory
    }

    pub fn ports(&self) -> &[SystemType] {
        &self.ports
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ProcessValue] {
        &self.states
    }

    pub fn effects(&self) -> &[ProcessValue] {
        &self.effects
    }

    pub fn labels(&self) -> &[FrameLabel] {
        &self.labels
    }

    /// The (basis, outcome) pair realizing element `idx` of a single-port
    /// frame in observation tables.
    pub fn outcome_label(&self, idx: usize) -> Result<(&str, usize)> {
        match &self.labels[idx] {
            FrameLabel::Outcome { basis, outcome } => Ok((basis, *outcome)),
            FrameLabel::Product(_) => Err(Error::ShapeMismatch {
                context: "product frame elements have no single observation outcome".into(),
            }),
        }
    }

    /// Rank of the frame Gram matrix (equals the state-matrix rank).
    pub fn gram_rank(&self) -> usize {
        self.gram_rank
    }

    /// Ratio of extreme nonzero singular values of the state family.
    pub fn condition_number(&self) -> f64 {
        self.cond_states
    }

    pub fn effect_condition_number(&self) -> f64 {
        self.cond_effects
    }

    /// Dual-state matrix (pinv of the stacked states), rows indexed by frame
    /// element.
    pub fn dual_states(&self) -> &Array2<Complex64> {
        &self.dual_states
    }

    pub fn dual_effects(&self) -> &Array2<Complex64> {
        &self.dual_effects
    }
}

/// The default informationally complete frame on a system: point
/// distributions classically, the deduplicated projectors of
/// [`standard_bases`] quantumly.
pub fn standard_frame(theory: TheoryTag, system: &SystemType) -> Result<Frame> {
    Frame::from_bases(theory, system, &standard_bases(theory, system))
}

/// Generalized matrix elements grid[i][j] = effect_j ∘ f ∘ state_i, always
/// real for the processes of either theory.
pub fn matrix_elements(f: &ProcessValue, in_frame: &Frame, out_frame: &Frame) -> Result<Array2<f64>> {
    if f.theory() != in_frame.theory || f.theory() != out_frame.theory {
        return Err(Error::TheoryMismatch);
    }
    if f.in_type() != in_frame.ports || f.out_type() != out_frame.ports {
        return Err(Error::TypeMismatch {
            context: format!(
                "process ports do not match frames ({} states on input, {} effects on output)",
                in_frame.len(),
                out_frame.len()
            ),
        });
    }
    let m = out_frame.effect_matrix.dot(f.mat()).dot(&in_frame.state_matrix);
    let mut grid = Array2::zeros((in_frame.len(), out_frame.len()));
    for i in 0..in_frame.len() {
        for j in 0..out_frame.len() {
            let v = m[[j, i]];
            if v.im.abs() > tol::SCALAR_IMAG {
                return Err(Error::NonRealScalar { imag: v.im });
            }
            grid[[i, j]] = v.re;
        }
    }
    Ok(grid)
}

/// The unique linear map with the given generalized matrix elements,
/// computed through the frames' dual families.
pub fn reconstruct(grid: &Array2<f64>, in_frame: &Frame, out_frame: &Frame) -> Result<ProcessValue> {
    if in_frame.theory != out_frame.theory {
        return Err(Error::TheoryMismatch);
    }
    if grid.dim() != (in_frame.len(), out_frame.len()) {
        return Err(Error::ShapeMismatch {
            context: format!(
                "grid is {}x{}, frames give {}x{}",
                grid.nrows(),
                grid.ncols(),
                in_frame.len(),
                out_frame.len()
            ),
        });
    }
    let gt = grid.t().mapv(|v| Complex64::new(v, 0.0));
    let mat = out_frame.dual_effects.dot(&gt).dot(&in_frame.dual_states);
    ProcessValue::from_rep_matrix(
        in_frame.theory,
        in_frame.ports.clone(),
        out_frame.ports.clone(),
        mat,
    )
}

/// One measurement-basis choice at a locus.
#[derive(Clone, Debug)]
pub enum PlanChoice {
    Trivial,
    Basis(Basis),
}

impl PlanChoice {
    pub fn id(&self) -> &str {
        match self {
            PlanChoice::Trivial => TRIVIAL_CHOICE,
            PlanChoice::Basis(b) => b.id(),
        }
    }
}

/// Per-locus lists of basis choices; an observation run measures every
/// combination.
#[derive(Clone, Debug)]
pub struct MeasurementPlan {
    pub loci: Vec<(String, SystemType)>,
    pub choices: Vec<Vec<PlanChoice>>,
}

impl MeasurementPlan {
    /// The full family: trivial plus every standard basis, at every locus.
    pub fn auto(m: &Model) -> MeasurementPlan {
        let loci: Vec<(String, SystemType)> =
            m.diagram().loci().iter().map(|l| (l.name.clone(), l.system.clone())).collect();
        Self::auto_for(m.theory(), &loci)
    }

    pub fn auto_for(theory: TheoryTag, loci: &[(String, SystemType)]) -> MeasurementPlan {
        let choices = loci
            .iter()
            .map(|(_, sys)| {
                let mut c = vec![PlanChoice::Trivial];
                c.extend(standard_bases(theory, sys).into_iter().map(PlanChoice::Basis));
                c
            })
            .collect();
        MeasurementPlan { loci: loci.to_vec(), choices }
    }

    pub fn locus_index(&self, name: &str) -> Result<usize> {
        self.loci
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownLocus { name: name.into() })
    }

    pub fn choice(&self, locus_idx: usize, id: &str) -> Result<&PlanChoice> {
        self.choices[locus_idx].iter().find(|c| c.id() == id).ok_or_else(|| Error::BadPlan {
            context: format!("locus `{}` has no choice `{id}`", self.loci[locus_idx].0),
        })
    }

    fn validate_against(&self, m: &Model) -> Result<()> {
        let loci = m.diagram().loci();
        if loci.len() != self.loci.len()
            || loci
                .iter()
                .zip(self.loci.iter())
                .any(|(l, (n, s))| &l.name != n || &l.system != s)
        {
            return Err(Error::BadPlan {
                context: "plan loci do not match the model's loci".into(),
            });
        }
        for (li, choices) in self.choices.iter().enumerate() {
            for c in choices {
                if let PlanChoice::Basis(b) = c {
                    if b.system() != &self.loci[li].1 {
                        return Err(Error::BadPlan {
                            context: format!(
                                "basis `{}` at locus `{}` is on the wrong system",
                                b.id(),
                                self.loci[li].0
                            ),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Joint probabilities of observation outcomes at all loci, indexed by the
/// per-locus basis choice and outcome tuple.
#[derive(Clone, Debug)]
pub struct ObservationTable {
    pub theory: TheoryTag,
    pub plan: MeasurementPlan,
    entries: BTreeMap<(Vec<String>, Vec<usize>), f64>,
}

impl ObservationTable {
    pub(crate) fn from_parts(
        theory: TheoryTag,
        plan: MeasurementPlan,
        entries: BTreeMap<(Vec<String>, Vec<usize>), f64>,
    ) -> Result<ObservationTable> {
        let n = plan.loci.len();
        if entries.keys().any(|(c, o)| c.len() != n || o.len() != n) {
            return Err(Error::BadPlan {
                context: "table row arity does not match the locus count".into(),
            });
        }
        Ok(ObservationTable { theory, plan, entries })
    }

    pub fn get(&self, choices: &[&str], outcomes: &[usize]) -> Option<f64> {
        let key = (
            choices.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            outcomes.to_vec(),
        );
        self.entries.get(&key).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Vec<String>, Vec<usize>), &f64)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Measures every basis-choice combination of `plan` on the model by exact
/// contraction. Entries are probabilities; each choice combination sums to
/// one over its outcomes.
///
/// All combinations are read off a single contraction: the outcome maps of
/// every choice at a locus are concatenated along that locus's outcome
/// axis, and the joint tensor is multilinear in the per-locus outcome maps.
pub fn observe(m: &Model, plan: &MeasurementPlan) -> Result<ObservationTable> {
    plan.validate_against(m)?;
    let theory = m.theory();

    // concatenated outcome maps per locus, with each choice's offset
    let mut stacked: Vec<Vec<ProcessValue>> = Vec::with_capacity(plan.loci.len());
    let mut offsets: Vec<Vec<(String, usize, usize)>> = Vec::with_capacity(plan.loci.len());
    for (li, choices) in plan.choices.iter().enumerate() {
        let mut maps = Vec::new();
        let mut offs = Vec::new();
        for choice in choices {
            let outcome_maps = match choice {
                PlanChoice::Trivial => vec![identity(theory, &[plan.loci[li].1.clone()])],
                PlanChoice::Basis(b) => b.instrument(theory)?.outcomes,
            };
            offs.push((choice.id().to_string(), maps.len(), outcome_maps.len()));
            maps.extend(outcome_maps);
        }
        stacked.push(maps);
        offsets.push(offs);
    }
    let joint = observe_joint(m, stacked)?;

    let mut entries = BTreeMap::new();
    let per_locus_choices: Vec<Vec<usize>> =
        offsets.iter().map(|offs| (0..offs.len()).collect()).collect();
    for combo in per_locus_choices.iter().map(|v| v.iter().copied()).multi_cartesian_product() {
        let ids: Vec<String> =
            combo.iter().enumerate().map(|(li, &ci)| offsets[li][ci].0.clone()).collect();
        let ranges: Vec<(usize, usize)> =
            combo.iter().enumerate().map(|(li, &ci)| (offsets[li][ci].1, offsets[li][ci].2)).collect();
        let outcome_lists: Vec<Vec<usize>> =
            ranges.iter().map(|(_, n)| (0..*n).collect()).collect();
        for outcomes in outcome_lists.iter().map(|v| v.iter().copied()).multi_cartesian_product() {
            let idx: Vec<usize> = outcomes
                .iter()
                .enumerate()
                .map(|(li, &o)| ranges[li].0 + o)
                .collect();
            entries.insert((ids.clone(), outcomes.clone()), joint[ndarray::IxDyn(&idx)]);
        }
    }
    Ok(ObservationTable { theory: m.theory(), plan: plan.clone(), entries })
}

/// Outcome of the finite positivity certificate: the minimal pairing of the
/// model against products of frame states and effects at its loci, with the
/// achieving pair. Exact for the classical theory; for the quantum theory
/// positivity on the frame cone plus the margin is a sufficient surrogate
/// and is reported as such.
#[derive(Clone, Debug)]
pub struct PositivityReport {
    pub positive: bool,
    pub min_value: f64,
    pub witness_states: Vec<String>,
    pub witness_effects: Vec<String>,
}

/// Checks strict positivity of the model paired with all products of frame
/// states on leave wires and frame effects on arrive wires.
pub fn is_positive_model(m: &Model, frames: &BTreeMap<String, Frame>) -> Result<PositivityReport> {
    let d = m.diagram();
    let theory = m.theory();
    let names: Vec<&str> = d.loci().iter().map(|l| l.name.as_str()).collect();
    let comb = as_comb(m, &names)?;
    let per_locus: Vec<&Frame> = d
        .loci()
        .iter()
        .map(|l| frames.get(&l.name).ok_or(Error::MissingFrame { locus: l.name.clone() }))
        .collect::<Result<_>>()?;
    let n_loci = per_locus.len();

    // pair the comb against all frame products one locus axis at a time:
    // arrive axes against effects, leave axes against states
    let mut dims: Vec<usize> = d.loci().iter().map(|l| l.system.rep_dim(theory)).collect();
    dims.extend(d.loci().iter().map(|l| l.system.rep_dim(theory)));
    let mut tensor = ndarray::ArrayD::from_shape_vec(
        ndarray::IxDyn(&dims),
        comb.mat().iter().copied().collect(),
    )
    .expect("comb shape");
    let fold_first_axis = |t: ndarray::ArrayD<Complex64>, mat: &Array2<Complex64>| {
        let d0 = t.shape()[0];
        let rest: usize = t.shape()[1..].iter().product();
        let mut rest_dims: Vec<usize> = t.shape()[1..].to_vec();
        let flat: Vec<Complex64> = t.iter().copied().collect();
        let m2 = Array2::from_shape_vec((d0, rest), flat).expect("contiguous");
        let prod = mat.dot(&m2); // (n, rest)
        let n = prod.nrows();
        let moved = prod.t().as_standard_layout().into_owned(); // (rest, n)
        rest_dims.push(n);
        ndarray::ArrayD::from_shape_vec(
            ndarray::IxDyn(&rest_dims),
            moved.iter().copied().collect(),
        )
        .expect("shape")
    };
    for f in &per_locus {
        // arrive axis against the effect family
        tensor = fold_first_axis(tensor, &f.effect_matrix);
    }
    for f in &per_locus {
        // leave axis against the state family
        let st = f.state_matrix.t().to_owned();
        tensor = fold_first_axis(tensor, &st);
    }
    // axis order is now effects per locus, then states per locus
    let mut min_value = f64::INFINITY;
    let mut min_idx: Vec<usize> = vec![0; 2 * n_loci];
    for (idx, v) in tensor.indexed_iter() {
        if v.im.abs() > tol::SCALAR_IMAG {
            return Err(Error::NonRealScalar { imag: v.im });
        }
        if v.re < min_value {
            min_value = v.re;
            min_idx = idx.slice().to_vec();
        }
    }
    let witness_effects: Vec<String> = (0..n_loci)
        .map(|li| per_locus[li].labels()[min_idx[li]].to_string())
        .collect();
    let witness_states: Vec<String> = (0..n_loci)
        .map(|li| per_locus[li].labels()[min_idx[n_loci + li]].to_string())
        .collect();

    Ok(PositivityReport {
        positive: min_value > tol::POSITIVITY_MARGIN,
        min_value,
        witness_states,
        witness_effects,
    })
}

/// One standard frame per locus.
pub fn standard_frames(m: &Model) -> Result<BTreeMap<String, Frame>> {
    let mut out = BTreeMap::new();
    for l in m.diagram().loci() {
        out.insert(l.name.clone(), standard_frame(m.theory(), &l.system)?);
    }
    Ok(out)
}

/// Frames built from the non-trivial bases of a plan, so that every frame
/// element is realizable as an observation outcome of the matching table.
pub fn frames_from_plan(theory: TheoryTag, plan: &MeasurementPlan) -> Result<BTreeMap<String, Frame>> {
    let mut out = BTreeMap::new();
    for (li, (name, sys)) in plan.loci.iter().enumerate() {
        let bases: Vec<Basis> = plan.choices[li]
            .iter()
            .filter_map(|c| match c {
                PlanChoice::Trivial => None,
                PlanChoice::Basis(b) => Some(b.clone()),
            })
            .collect();
        out.insert(name.clone(), Frame::from_bases(theory, sys, &bases)?);
    }
    Ok(out)
}
