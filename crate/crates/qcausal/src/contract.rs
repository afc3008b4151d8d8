//! Deterministic tensor-network evaluation of interpreted diagrams.
//!
//! Every box, locus filling, boundary state/effect and discard becomes a
//! dense tensor with one axis per adjacent wire; shared wires are contracted
//! away. The contraction schedule is a pure function of the diagram (node
//! construction order: boxes, loci, discards, boundary), so results are
//! bit-stable across runs; a reverse schedule exists purely so tests can
//! check that the result does not depend on the order.

use std::collections::BTreeMap;

use ndarray::{ArrayD, Array2, IxDyn};
use num_complex::Complex64;

use crate::diagram::{Consumer, LocusFilling, Model, Producer};
use crate::error::{Error, Result};
use crate::theory::{discard, identity, ProcessValue, SystemType};
use crate::tol;

/// How a locus participates in one evaluation.
#[derive(Clone, Debug)]
pub(crate) enum LocusTreatment {
    /// Plug a local process into the hole.
    Fill(ProcessValue),
    /// Keep the hole open: its leave wire becomes an input port of the
    /// result and its arrive wire an output port.
    Hole,
    /// Feed a state into the leave wire and expose the arrive wire as an
    /// output port.
    FeedExpose(ProcessValue),
    /// Replace the hole by an outcome-indexed instrument; the outcome index
    /// becomes an open classical axis of the joint result.
    Instrument(Vec<ProcessValue>),
}

/// Treatment of one global output port.
#[derive(Clone, Debug)]
pub enum BoundaryEffect {
    Effect(ProcessValue),
    Discard,
}

/// States for all open global inputs and effects for all open global
/// outputs. An empty boundary leaves the global ports open.
#[derive(Clone, Debug, Default)]
pub struct Boundary {
    pub input_states: Vec<ProcessValue>,
    pub output_effects: Vec<BoundaryEffect>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub(crate) enum Schedule {
    Forward,
    // exercised by the order-invariance tests
    #[cfg_attr(not(test), allow(dead_code))]
    Reverse,
}

#[derive(Clone)]
struct Tens {
    t: ArrayD<Complex64>,
    axes: Vec<usize>,
}

fn pv_tensor(pv: &ProcessValue, out_wires: &[usize], in_wires: &[usize]) -> Tens {
    let theory = pv.theory();
    let mut dims: Vec<usize> = pv.out_type().iter().map(|t| t.rep_dim(theory)).collect();
    dims.extend(pv.in_type().iter().map(|t| t.rep_dim(theory)));
    let data: Vec<Complex64> = pv.mat().iter().copied().collect();
    let t = ArrayD::from_shape_vec(IxDyn(&dims), data).expect("shape consistent by construction");
    let mut axes = out_wires.to_vec();
    axes.extend_from_slice(in_wires);
    debug_assert_eq!(axes.len(), t.ndim());
    Tens { t, axes }
}

fn to_matrix(t: &ArrayD<Complex64>, rows: usize, cols: usize) -> Array2<Complex64> {
    let std = t.as_standard_layout();
    let v: Vec<Complex64> = std.iter().copied().collect();
    Array2::from_shape_vec((rows, cols), v).expect("element count preserved")
}

fn contract_pair(a: Tens, b: Tens) -> Tens {
    let common: Vec<usize> = a.axes.iter().copied().filter(|w| b.axes.contains(w)).collect();
    let free_a: Vec<usize> = a.axes.iter().copied().filter(|w| !common.contains(w)).collect();
    let free_b: Vec<usize> = b.axes.iter().copied().filter(|w| !common.contains(w)).collect();

    let pos = |axes: &[usize], w: usize| axes.iter().position(|&x| x == w).unwrap();
    let perm_a: Vec<usize> =
        free_a.iter().chain(common.iter()).map(|&w| pos(&a.axes, w)).collect();
    let perm_b: Vec<usize> =
        common.iter().chain(free_b.iter()).map(|&w| pos(&b.axes, w)).collect();

    let at = a.t.permuted_axes(IxDyn(&perm_a));
    let bt = b.t.permuted_axes(IxDyn(&perm_b));

    let dim_of = |t: &ArrayD<Complex64>, lo: usize, hi: usize| -> usize {
        t.shape()[lo..hi].iter().product()
    };
    let fa = dim_of(&at, 0, free_a.len());
    let k = dim_of(&at, free_a.len(), at.ndim());
    let fb = dim_of(&bt, common.len(), bt.ndim());

    let mut free_dims: Vec<usize> = at.shape()[..free_a.len()].to_vec();
    free_dims.extend_from_slice(&bt.shape()[common.len()..]);

    let am = to_matrix(&at, fa, k);
    let bm = to_matrix(&bt, k, fb);
    let prod = am.dot(&bm);
    let t = ArrayD::from_shape_vec(IxDyn(&free_dims), prod.into_iter().collect())
        .expect("free dims consistent");
    let mut axes = free_a;
    axes.extend(free_b);
    Tens { t, axes }
}

/// Identifies each open axis of a contracted network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum AxisRole {
    HoleLeave(usize),
    HoleArrive(usize),
    ExposedArrive(usize),
    GlobalIn(usize),
    GlobalOut(usize),
    Outcome(usize),
}

pub(crate) struct Contraction {
    pub tensor: ArrayD<Complex64>,
    /// Axis roles in the tensor's axis order.
    pub roles: Vec<AxisRole>,
}

/// Core evaluation: lowers the interpreted diagram plus locus treatments and
/// boundary into a tensor network and contracts it.
pub(crate) fn contract_model(
    m: &Model,
    treatments: &[LocusTreatment],
    boundary: Option<&Boundary>,
    schedule: Schedule,
) -> Result<Contraction> {
    let d = m.diagram();
    let theory = m.theory();
    assert_eq!(treatments.len(), d.loci().len());

    // wire ids: diagram wires first, then fresh ids for outcome axes
    let mut next_wire = d.wires().len();
    let mut box_out: BTreeMap<(String, usize), usize> = BTreeMap::new();
    let mut box_in: BTreeMap<(String, usize), usize> = BTreeMap::new();
    let mut locus_leave: BTreeMap<String, usize> = BTreeMap::new();
    let mut locus_arrive: BTreeMap<String, usize> = BTreeMap::new();
    let mut global_in: BTreeMap<usize, usize> = BTreeMap::new();
    let mut global_out: BTreeMap<usize, usize> = BTreeMap::new();
    let mut discard_wires: Vec<usize> = Vec::new();
    let mut wire_types: BTreeMap<usize, SystemType> = BTreeMap::new();

    for (wid, w) in d.wires().iter().enumerate() {
        wire_types.insert(wid, d.wire_type(w)?);
        match &w.from {
            Producer::BoxOut { name, port } => {
                box_out.insert((name.clone(), *port), wid);
            }
            Producer::LocusLeave { name } => {
                locus_leave.insert(name.clone(), wid);
            }
            Producer::GlobalIn { index } => {
                global_in.insert(*index, wid);
            }
        }
        match &w.to {
            Consumer::BoxIn { name, port } => {
                box_in.insert((name.clone(), *port), wid);
            }
            Consumer::LocusArrive { name } => {
                locus_arrive.insert(name.clone(), wid);
            }
            Consumer::GlobalOut { index } => {
                global_out.insert(*index, wid);
            }
            Consumer::Discard => discard_wires.push(wid),
        }
    }

    let mut nodes: Vec<Tens> = Vec::new();
    let mut open: Vec<(usize, AxisRole)> = Vec::new();

    for name in d.box_names() {
        let pv = m.interpretation(name)?;
        let outs: Vec<usize> =
            (0..pv.out_type().len()).map(|p| box_out[&(name.clone(), p)]).collect();
        let ins: Vec<usize> =
            (0..pv.in_type().len()).map(|p| box_in[&(name.clone(), p)]).collect();
        nodes.push(pv_tensor(pv, &outs, &ins));
    }

    for (li, locus) in d.loci().iter().enumerate() {
        let leave = locus_leave[&locus.name];
        let arrive = locus_arrive[&locus.name];
        let expect = [locus.system.clone()];
        match &treatments[li] {
            LocusTreatment::Fill(pv) => {
                if pv.theory() != theory {
                    return Err(Error::TheoryMismatch);
                }
                if pv.in_type() != expect.as_slice() || pv.out_type() != expect.as_slice() {
                    return Err(Error::TypeMismatch {
                        context: format!(
                            "filling for locus `{}` must be {} -> {}",
                            locus.name, locus.system, locus.system
                        ),
                    });
                }
                nodes.push(pv_tensor(pv, &[leave], &[arrive]));
            }
            LocusTreatment::Hole => {
                open.push((leave, AxisRole::HoleLeave(li)));
                open.push((arrive, AxisRole::HoleArrive(li)));
            }
            LocusTreatment::FeedExpose(state) => {
                if state.theory() != theory || state.out_type() != expect.as_slice()
                    || !state.in_type().is_empty()
                {
                    return Err(Error::TypeMismatch {
                        context: format!("probe state for locus `{}` has wrong type", locus.name),
                    });
                }
                nodes.push(pv_tensor(state, &[leave], &[]));
                open.push((arrive, AxisRole::ExposedArrive(li)));
            }
            LocusTreatment::Instrument(outcomes) => {
                let rep = locus.system.rep_dim(theory);
                let n = outcomes.len();
                let mut data = Vec::with_capacity(n * rep * rep);
                for o in outcomes {
                    if o.in_type() != expect.as_slice() || o.out_type() != expect.as_slice() || o.theory() != theory {
                        return Err(Error::TypeMismatch {
                            context: format!("outcome map at locus `{}` has wrong type", locus.name),
                        });
                    }
                    data.extend(o.mat().iter().copied());
                }
                let t = ArrayD::from_shape_vec(IxDyn(&[n, rep, rep]), data).unwrap();
                let outcome_wire = next_wire;
                next_wire += 1;
                nodes.push(Tens { t, axes: vec![outcome_wire, leave, arrive] });
                open.push((outcome_wire, AxisRole::Outcome(li)));
            }
        }
    }

    for wid in discard_wires {
        let ty = wire_types[&wid].clone();
        nodes.push(pv_tensor(&discard(theory, &[ty]), &[], &[wid]));
    }

    match boundary {
        Some(b) => {
            if b.input_states.len() != d.n_global_in() || b.output_effects.len() != d.n_global_out()
            {
                return Err(Error::TypeMismatch {
                    context: "boundary does not cover all open global ports".into(),
                });
            }
            for (idx, state) in b.input_states.iter().enumerate() {
                let wid = global_in[&idx];
                if state.out_type() != [wire_types[&wid].clone()].as_slice() || !state.in_type().is_empty() {
                    return Err(Error::TypeMismatch {
                        context: format!("boundary state for input {idx} has wrong type"),
                    });
                }
                nodes.push(pv_tensor(state, &[wid], &[]));
            }
            for (idx, be) in b.output_effects.iter().enumerate() {
                let wid = global_out[&idx];
                let ty = wire_types[&wid].clone();
                match be {
                    BoundaryEffect::Discard => {
                        nodes.push(pv_tensor(&discard(theory, &[ty]), &[], &[wid]))
                    }
                    BoundaryEffect::Effect(e) => {
                        if e.in_type() != [ty.clone()].as_slice() || !e.out_type().is_empty() {
                            return Err(Error::TypeMismatch {
                                context: format!("boundary effect for output {idx} has wrong type"),
                            });
                        }
                        nodes.push(pv_tensor(e, &[], &[wid]));
                    }
                }
            }
        }
        None => {
            for (&idx, &wid) in &global_in {
                open.push((wid, AxisRole::GlobalIn(idx)));
            }
            for (&idx, &wid) in &global_out {
                open.push((wid, AxisRole::GlobalOut(idx)));
            }
        }
    }

    // contraction order is mathematically irrelevant; node construction
    // order (boxes, loci, discards, boundary) keeps it a pure function of
    // the diagram, and the reverse schedule exists for invariance tests
    let order: Vec<usize> = (0..nodes.len()).collect();
    let sequence: Vec<usize> = match schedule {
        Schedule::Forward => order,
        Schedule::Reverse => order.into_iter().rev().collect(),
    };

    let mut acc: Option<Tens> = None;
    for ni in sequence {
        let node = nodes[ni].clone();
        acc = Some(match acc {
            None => node,
            Some(a) => contract_pair(a, node),
        });
    }
    let result = acc.unwrap_or(Tens {
        t: ArrayD::from_elem(IxDyn(&[]), Complex64::new(1.0, 0.0)),
        axes: vec![],
    });

    // all remaining axes must be exactly the declared open wires
    if result.axes.len() != open.len() {
        return Err(Error::ShapeMismatch {
            context: format!(
                "contraction left {} open axes, expected {}",
                result.axes.len(),
                open.len()
            ),
        });
    }
    let perm: Vec<usize> = open
        .iter()
        .map(|(wid, _)| {
            result
                .axes
                .iter()
                .position(|w| w == wid)
                .expect("open wire must survive contraction")
        })
        .collect();
    let tensor = if perm.is_empty() {
        result.t
    } else {
        result.t.permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned()
    };
    Ok(Contraction { tensor, roles: open.into_iter().map(|(_, r)| r).collect() })
}

/// Orders treatments by locus and assembles a first-order process from a
/// contraction whose open axes are hole/exposed ports and global ports.
fn assemble_process(m: &Model, c: Contraction) -> Result<ProcessValue> {
    let d = m.diagram();
    let theory = m.theory();
    // desired port order: inputs = hole leaves (locus order) then global
    // inputs; outputs = hole arrives, then exposed arrives (locus order),
    // then global outputs
    let mut in_axes: Vec<(usize, SystemType)> = Vec::new();
    let mut out_axes: Vec<(usize, SystemType)> = Vec::new();
    let locus_sys = |li: usize| d.loci()[li].system.clone();
    for (pos, role) in c.roles.iter().enumerate() {
        match role {
            AxisRole::HoleLeave(li) => in_axes.push((pos, locus_sys(*li))),
            AxisRole::GlobalIn(_) => in_axes.push((
                pos,
                // type read from tensor shape is ambiguous; global inputs are
                // rare and typed by their consumer wire
                global_port_type(m, role)?,
            )),
            AxisRole::HoleArrive(li) | AxisRole::ExposedArrive(li) => {
                out_axes.push((pos, locus_sys(*li)))
            }
            AxisRole::GlobalOut(_) => out_axes.push((pos, global_port_type(m, role)?)),
            AxisRole::Outcome(_) => {
                return Err(Error::ShapeMismatch {
                    context: "outcome axes cannot form a process".into(),
                })
            }
        }
    }
    // stable sort: roles were pushed in locus order already; holes before
    // exposed, then globals — reorder outputs so hole arrives come first
    let mut out_sorted = out_axes.clone();
    out_sorted.sort_by_key(|(pos, _)| {
        match &c.roles[*pos] {
            AxisRole::HoleArrive(li) => (0usize, *li),
            AxisRole::ExposedArrive(li) => (1, *li),
            AxisRole::GlobalOut(i) => (2, *i),
            _ => unreachable!(),
        }
    });
    let mut in_sorted = in_axes.clone();
    in_sorted.sort_by_key(|(pos, _)| match &c.roles[*pos] {
        AxisRole::HoleLeave(li) => (0usize, *li),
        AxisRole::GlobalIn(i) => (1, *i),
        _ => unreachable!(),
    });

    let perm: Vec<usize> = out_sorted
        .iter()
        .map(|(p, _)| *p)
        .chain(in_sorted.iter().map(|(p, _)| *p))
        .collect();
    let out_types: Vec<SystemType> = out_sorted.into_iter().map(|(_, t)| t).collect();
    let in_types: Vec<SystemType> = in_sorted.into_iter().map(|(_, t)| t).collect();

    let tensor = if perm.is_empty() {
        c.tensor
    } else {
        c.tensor.permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned()
    };
    let rows: usize = out_types.iter().map(|t| t.rep_dim(theory)).product();
    let cols: usize = in_types.iter().map(|t| t.rep_dim(theory)).product();
    let mat = to_matrix(&tensor, rows, cols);
    ProcessValue::from_rep_matrix(theory, in_types, out_types, mat)
}

fn global_port_type(m: &Model, role: &AxisRole) -> Result<SystemType> {
    let d = m.diagram();
    for w in d.wires() {
        match (role, &w.from, &w.to) {
            (AxisRole::GlobalIn(i), Producer::GlobalIn { index }, _) if index == i => {
                return d.wire_type(w)
            }
            (AxisRole::GlobalOut(i), _, Consumer::GlobalOut { index }) if index == i => {
                return d.wire_type(w)
            }
            _ => {}
        }
    }
    Err(Error::ShapeMismatch { context: "global port not found".into() })
}

fn treatments_from_filling(m: &Model, fill: &LocusFilling) -> Result<Vec<LocusTreatment>> {
    m.diagram()
        .loci()
        .iter()
        .map(|l| {
            fill.get(&l.name)
                .cloned()
                .map(LocusTreatment::Fill)
                .ok_or_else(|| Error::UnknownLocus { name: format!("{} (no filling)", l.name) })
        })
        .collect()
}

/// Contracts with explicit per-locus treatments, assembling a first-order
/// process over the open hole/exposed/global ports.
pub(crate) fn contract_to_process(m: &Model, treatments: &[LocusTreatment]) -> Result<ProcessValue> {
    let c = contract_model(m, treatments, None, Schedule::Forward)?;
    assemble_process(m, c)
}

/// Functorial evaluation: fills every locus and contracts. With a boundary,
/// all global ports are closed and the result is typically a scalar; without
/// one, open global ports become the ports of the result.
pub fn evaluate(m: &Model, fill: &LocusFilling, boundary: Option<&Boundary>) -> Result<ProcessValue> {
    evaluate_with_schedule(m, fill, boundary, Schedule::Forward)
}

pub(crate) fn evaluate_with_schedule(
    m: &Model,
    fill: &LocusFilling,
    boundary: Option<&Boundary>,
    schedule: Schedule,
) -> Result<ProcessValue> {
    let treatments = treatments_from_filling(m, fill)?;
    let c = contract_model(m, &treatments, boundary, schedule)?;
    assemble_process(m, c)
}

/// First-order representation of the comb obtained by filling every locus
/// outside `keep` with the identity. Port order: inputs are the kept loci's
/// leave wires in locus order followed by open global inputs; outputs are
/// the kept loci's arrive wires in locus order followed by open global
/// outputs. Plugging processes into the kept holes recovers evaluation.
pub fn as_comb(m: &Model, keep: &[&str]) -> Result<ProcessValue> {
    let d = m.diagram();
    for k in keep {
        d.locus(k)?;
    }
    let treatments: Vec<LocusTreatment> = d
        .loci()
        .iter()
        .map(|l| {
            if keep.contains(&l.name.as_str()) {
                LocusTreatment::Hole
            } else {
                LocusTreatment::Fill(identity(m.theory(), std::slice::from_ref(&l.system)))
            }
        })
        .collect();
    let c = contract_model(m, &treatments, None, Schedule::Forward)?;
    assemble_process(m, c)
}

/// Plugs `fillings` into the first `fillings.len()` hole port pairs of a
/// comb produced by [`as_comb`] (or an interventional channel), contracting
/// hole arrive outputs against filling inputs and filling outputs against
/// hole leave inputs.
pub fn plug_comb(comb: &ProcessValue, fillings: &[ProcessValue]) -> Result<ProcessValue> {
    let k = fillings.len();
    if comb.in_type().len() < k || comb.out_type().len() < k {
        return Err(Error::ShapeMismatch {
            context: format!("comb has too few ports for {k} fillings"),
        });
    }
    let theory = comb.theory();
    for (i, f) in fillings.iter().enumerate() {
        if f.theory() != theory {
            return Err(Error::TheoryMismatch);
        }
        if f.in_type() != [comb.out_type()[i].clone()].as_slice()
            || f.out_type() != [comb.in_type()[i].clone()].as_slice()
        {
            return Err(Error::TypeMismatch {
                context: format!("filling {i} does not match the comb's hole type"),
            });
        }
    }
    // tensor network: comb plus one node per filling
    let mut wire = 0usize;
    let mut comb_axes = Vec::new();
    let mut fill_nodes: Vec<Tens> = Vec::new();
    let mut open_axes: Vec<usize> = Vec::new();
    let mut arrive_wires = Vec::new();
    let mut leave_wires = Vec::new();
    for i in 0..comb.out_type().len() {
        let w = wire;
        wire += 1;
        comb_axes.push(w);
        if i < k {
            arrive_wires.push(w);
        } else {
            open_axes.push(w);
        }
    }
    let mut open_in: Vec<usize> = Vec::new();
    for i in 0..comb.in_type().len() {
        let w = wire;
        wire += 1;
        comb_axes.push(w);
        if i < k {
            leave_wires.push(w);
        } else {
            open_in.push(w);
        }
    }
    let theory_dims = |types: &[SystemType]| -> Vec<usize> {
        types.iter().map(|t| t.rep_dim(theory)).collect::<Vec<_>>()
    };
    let mut dims = theory_dims(comb.out_type());
    dims.extend(theory_dims(comb.in_type()));
    let comb_node = Tens {
        t: ArrayD::from_shape_vec(IxDyn(&dims), comb.mat().iter().copied().collect()).unwrap(),
        axes: comb_axes,
    };
    for (i, f) in fillings.iter().enumerate() {
        fill_nodes.push(pv_tensor(f, &[leave_wires[i]], &[arrive_wires[i]]));
    }
    let mut acc = comb_node;
    for node in fill_nodes {
        acc = contract_pair(acc, node);
    }
    let perm: Vec<usize> = open_axes
        .iter()
        .chain(open_in.iter())
        .map(|w| acc.axes.iter().position(|x| x == w).unwrap())
        .collect();
    let tensor = if perm.is_empty() {
        acc.t
    } else {
        acc.t.permuted_axes(IxDyn(&perm)).as_standard_layout().into_owned()
    };
    let out_types: Vec<SystemType> = comb.out_type()[k..].to_vec();
    let in_types: Vec<SystemType> = comb.in_type()[k..].to_vec();
    let rows: usize = out_types.iter().map(|t| t.rep_dim(theory)).product();
    let cols: usize = in_types.iter().map(|t| t.rep_dim(theory)).product();
    let mat = to_matrix(&tensor, rows, cols);
    ProcessValue::from_rep_matrix(theory, in_types, out_types, mat)
}

/// Joint outcome probabilities for outcome-indexed instruments at every
/// locus: the returned tensor has one axis per locus, in locus order.
pub(crate) fn observe_joint(
    m: &Model,
    instruments: Vec<Vec<ProcessValue>>,
) -> Result<ArrayD<f64>> {
    let treatments: Vec<LocusTreatment> =
        instruments.into_iter().map(LocusTreatment::Instrument).collect();
    if m.diagram().n_global_in() != 0 || m.diagram().n_global_out() != 0 {
        return Err(Error::TypeMismatch {
            context: "observation requires a model with no open global ports".into(),
        });
    }
    let c = contract_model(m, &treatments, None, Schedule::Forward)?;
    // axes already in locus order by construction
    let mut probs = ArrayD::zeros(c.tensor.raw_dim());
    for (p, v) in probs.iter_mut().zip(c.tensor.iter()) {
        if v.im.abs() > tol::SCALAR_IMAG {
            return Err(Error::NonRealScalar { imag: v.im });
        }
        *p = v.re;
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::tests::chain_four_loci;
    use crate::random::{random_causal_process, random_positive_model, ShapeKind};
    use crate::theory::{uniform_state, TheoryTag};
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Quantum interpretation of the four-locus chain: prepare |0>, fan out
    /// with a fresh-ancilla controlled flip, rotate one branch.
    pub(crate) fn chain_four_loci_model() -> Model {
        let d = chain_four_loci();
        let q = d.signature().systems["Q"].clone();
        let ket0 = {
            let mut k = Array2::zeros((2, 1));
            k[[0, 0]] = c(1.0, 0.0);
            ProcessValue::from_kraus(vec![], vec![q.clone()], &[k]).unwrap()
        };
        let fanout = {
            let k = array![
                [c(1.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), c(1.0, 0.0)]
            ];
            ProcessValue::from_kraus(vec![q.clone()], vec![q.clone(), q.clone()], &[k]).unwrap()
        };
        let hadamard = {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let k = array![[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]];
            ProcessValue::from_kraus(vec![q.clone()], vec![q.clone()], &[k]).unwrap()
        };
        let mut interp = BTreeMap::new();
        interp.insert("s".into(), ket0);
        interp.insert("f".into(), fanout);
        interp.insert("g".into(), hadamard);
        Model::new(d, TheoryTag::Quantum, interp).unwrap()
    }

    #[test]
    fn identity_filling_of_closed_models_evaluates_to_one() {
        let quantum = chain_four_loci_model();
        let v = evaluate(&quantum, &quantum.identity_filling(), None).unwrap();
        assert!((v.scalar().unwrap() - 1.0).abs() < 1e-12);
        for theory in [TheoryTag::Classical, TheoryTag::Quantum] {
            let gen = random_positive_model(ShapeKind::FrontDoor, theory, 2, 3).unwrap();
            let v = evaluate(&gen.model, &gen.model.identity_filling(), None).unwrap();
            assert!((v.scalar().unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn global_causality_holds_for_random_causal_fillings() {
        let mut models = vec![chain_four_loci_model()];
        for theory in [TheoryTag::Classical, TheoryTag::Quantum] {
            models.push(random_positive_model(ShapeKind::FrontDoor, theory, 2, 19).unwrap().model);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for m in &models {
            for _ in 0..5 {
                let mut fill = crate::diagram::LocusFilling::default();
                for l in m.diagram().loci() {
                    fill = fill.with(
                        &l.name,
                        random_causal_process(
                            m.theory(),
                            std::slice::from_ref(&l.system),
                            std::slice::from_ref(&l.system),
                            &mut rng,
                        ),
                    );
                }
                let v = evaluate(m, &fill, None).unwrap();
                assert!((v.scalar().unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn contraction_schedule_does_not_change_the_result() {
        for theory in [TheoryTag::Classical, TheoryTag::Quantum] {
            let gen = random_positive_model(ShapeKind::SingleIntervention, theory, 2, 8).unwrap();
            let m = &gen.model;
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut fill = crate::diagram::LocusFilling::default();
            for l in m.diagram().loci() {
                fill = fill.with(
                    &l.name,
                    random_causal_process(theory, std::slice::from_ref(&l.system), std::slice::from_ref(&l.system), &mut rng),
                );
            }
            let forward = evaluate_with_schedule(m, &fill, None, Schedule::Forward).unwrap();
            let reverse = evaluate_with_schedule(m, &fill, None, Schedule::Reverse).unwrap();
            assert!(forward.max_diff(&reverse).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn plugging_holes_reproduces_direct_evaluation() {
        for theory in [TheoryTag::Classical, TheoryTag::Quantum] {
            let gen = random_positive_model(ShapeKind::FrontDoor, theory, 2, 12).unwrap();
            let m = &gen.model;
            let comb = as_comb(m, &["X", "Z"]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            for _ in 0..20 {
                let fx = random_causal_process(
                    theory,
                    &[m.diagram().locus("X").unwrap().system.clone()],
                    &[m.diagram().locus("X").unwrap().system.clone()],
                    &mut rng,
                );
                let fz = random_causal_process(
                    theory,
                    &[m.diagram().locus("Z").unwrap().system.clone()],
                    &[m.diagram().locus("Z").unwrap().system.clone()],
                    &mut rng,
                );
                let plugged = plug_comb(&comb, &[fx.clone(), fz.clone()]).unwrap();
                let fill = m
                    .identity_filling()
                    .with("X", fx)
                    .with("Z", fz);
                let direct = evaluate(m, &fill, None).unwrap();
                assert!(plugged.max_diff(&direct).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn single_hole_comb_round_trips_through_yanking() {
        // one box, one locus: the comb's plug-in must reproduce evaluation
        let d = crate::diagram::Diagram::builder()
            .system("B", 3)
            .add_box("p", &[], &["B"])
            .add_locus("X", "B")
            .wire_refs("p.out[0]", "X.arrive")
            .wire_refs("X.leave", "discard")
            .build()
            .unwrap();
        let b3 = d.signature().systems["B"].clone();
        let mut interp = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        interp.insert(
            "p".into(),
            random_causal_process(TheoryTag::Classical, &[], std::slice::from_ref(&b3), &mut rng),
        );
        let m = Model::new(d, TheoryTag::Classical, interp).unwrap();
        let comb = as_comb(&m, &["X"]).unwrap();
        for _ in 0..5 {
            let f = random_causal_process(TheoryTag::Classical, std::slice::from_ref(&b3), std::slice::from_ref(&b3), &mut rng);
            let plugged = plug_comb(&comb, std::slice::from_ref(&f)).unwrap();
            let direct = evaluate(&m, &m.identity_filling().with("X", f), None).unwrap();
            assert!((plugged.scalar().unwrap() - direct.scalar().unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn non_descendants_cannot_influence_the_target_state() {
        // X4 is not a descendant of X3: the state arriving at X4 must not
        // depend on the filling at X3, for any fixed fillings elsewhere
        let m = chain_four_loci_model();
        let q = m.diagram().loci()[0].system.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let f1 = random_causal_process(TheoryTag::Quantum, std::slice::from_ref(&q), std::slice::from_ref(&q), &mut rng);
        let f2 = random_causal_process(TheoryTag::Quantum, std::slice::from_ref(&q), std::slice::from_ref(&q), &mut rng);
        let state_at_x4 = |f3: ProcessValue| {
            let treatments = vec![
                LocusTreatment::Fill(f1.clone()),
                LocusTreatment::Fill(f2.clone()),
                LocusTreatment::Fill(f3),
                LocusTreatment::FeedExpose(uniform_state(TheoryTag::Quantum, &q)),
            ];
            contract_to_process(&m, &treatments).unwrap()
        };
        let base =
            state_at_x4(random_causal_process(TheoryTag::Quantum, std::slice::from_ref(&q), std::slice::from_ref(&q), &mut rng));
        for _ in 0..10 {
            let f3 = random_causal_process(TheoryTag::Quantum, std::slice::from_ref(&q), std::slice::from_ref(&q), &mut rng);
            assert!(state_at_x4(f3).max_diff(&base).unwrap() <= 1e-10);
        }
        assert!(!m.diagram().is_descendant("X3", "X4").unwrap());
    }

    #[test]
    fn boundary_states_and_effects_close_open_global_ports() {
        let d = crate::diagram::Diagram::builder()
            .system("B", 2)
            .add_box("f", &["B"], &["B"])
            .add_locus("X", "B")
            .wire_refs("input[0]", "f.in[0]")
            .wire_refs("f.out[0]", "X.arrive")
            .wire_refs("X.leave", "output[0]")
            .build()
            .unwrap();
        let b = d.signature().systems["B"].clone();
        let fmat = ProcessValue::classical(
            vec![b.clone()],
            vec![b.clone()],
            ndarray::arr2(&[[0.9, 0.3], [0.1, 0.7]]),
        )
        .unwrap();
        let mut interp = BTreeMap::new();
        interp.insert("f".into(), fmat.clone());
        let m = Model::new(d, TheoryTag::Classical, interp).unwrap();
        let fill = m.identity_filling();

        // open evaluation returns the process itself
        let open = evaluate(&m, &fill, None).unwrap();
        assert!(open.max_diff(&fmat).unwrap() < 1e-15);

        // boundary state and effect close it to the expected scalar
        let state =
            ProcessValue::classical(vec![], vec![b.clone()], ndarray::arr2(&[[0.25], [0.75]]))
                .unwrap();
        let effect =
            ProcessValue::classical(vec![b.clone()], vec![], ndarray::arr2(&[[1.0, 0.0]])).unwrap();
        let boundary = Boundary {
            input_states: vec![state.clone()],
            output_effects: vec![BoundaryEffect::Effect(effect.clone())],
        };
        let closed = evaluate(&m, &fill, Some(&boundary)).unwrap();
        let expected = effect.compose_seq(&fmat).unwrap().compose_seq(&state).unwrap();
        assert!((closed.scalar().unwrap() - expected.scalar().unwrap()).abs() < 1e-15);

        // discarding the output instead gives 1 by causality
        let boundary = Boundary {
            input_states: vec![state],
            output_effects: vec![BoundaryEffect::Discard],
        };
        let one = evaluate(&m, &fill, Some(&boundary)).unwrap();
        assert!((one.scalar().unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn evaluate_requires_every_locus_filled() {
        let gen = random_positive_model(ShapeKind::FrontDoor, TheoryTag::Classical, 2, 1).unwrap();
        let m = &gen.model;
        let partial = crate::diagram::LocusFilling::default();
        assert!(evaluate(m, &partial, None).is_err());
    }

    #[test]
    fn front_door_comb_ports_follow_locus_order() {
        let gen = random_positive_model(ShapeKind::FrontDoor, TheoryTag::Classical, 2, 0).unwrap();
        let comb = as_comb(&gen.model, &["X", "Y"]).unwrap();
        assert_eq!(comb.in_type().len(), 2);
        assert_eq!(comb.out_type().len(), 2);
        assert_eq!(comb.in_type()[0].name(), "SX");
        assert_eq!(comb.in_type()[1].name(), "SY");
    }
}
