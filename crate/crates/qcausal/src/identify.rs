//! Interventional channels and their identification from observational
//! statistics.
//!
//! The ground-truth channel is computed by contraction with full access to
//! the model. The identification algorithms see none of that: they consume
//! an observation table (joint projective-measurement statistics), the
//! locus roles of a recognized diagram shape and the frames realized by the
//! table's bases, and recover the same channel by mediator tomography and
//! scalar division — the divisions are well defined exactly because positive
//! models make every required probability strictly positive.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;

use crate::contract::{contract_to_process, plug_comb, LocusTreatment};
use crate::diagram::{Consumer, Diagram, Model, Producer};
use crate::error::{Error, Result};
use crate::instruments::{reconstruct, Frame, ObservationTable, TRIVIAL_CHOICE};
use crate::theory::{discard, identity, uniform_state, ProcessValue, TheoryTag};
use crate::tol;

/// A first-order comb representing the map from fillings at the source
/// locus to states on the target locus's arrive wire: input port `[S]` is
/// the source's leave wire, output ports `[S, T]` are the source's arrive
/// wire and the target's arrive wire.
#[derive(Clone, Debug)]
pub struct InterventionalChannel {
    pub source: String,
    pub target: String,
    pub channel: ProcessValue,
}

impl InterventionalChannel {
    /// State delivered to the target when a local process is plugged into
    /// the source hole.
    pub fn apply(&self, filling: &ProcessValue) -> Result<ProcessValue> {
        plug_comb(&self.channel, std::slice::from_ref(filling))
    }

    /// State delivered to the target when the source output is forcibly set
    /// to `state` (the incoming system is discarded).
    pub fn do_state(&self, state: &ProcessValue) -> Result<ProcessValue> {
        let src_sys = self.channel.in_type()[0].clone();
        let filling = state.compose_seq(&discard(self.channel.theory(), &[src_sys]))?;
        self.apply(&filling)
    }
}

/// Largest entrywise difference of two channels' first-order
/// representations. Not a diamond norm; a cheap, convention-fixed metric.
pub fn channel_distance(a: &InterventionalChannel, b: &InterventionalChannel) -> Result<f64> {
    if a.channel.in_type() != b.channel.in_type() || a.channel.out_type() != b.channel.out_type() {
        return Err(Error::ShapeMismatch {
            context: "channels have different port types".into(),
        });
    }
    a.channel.max_diff(&b.channel)
}

/// The model's true interventional channel from `src` to `tgt`: every other
/// locus is filled with the identity, the target's leave wire is fed the
/// uniform/maximally mixed state (legitimate because the target must not
/// reach the source), and all remaining outputs are discarded inside the
/// model.
pub fn ground_truth_channel(m: &Model, src: &str, tgt: &str) -> Result<InterventionalChannel> {
    let probe = uniform_state(m.theory(), &m.diagram().locus(tgt)?.system);
    ground_truth_channel_with_probe(m, src, tgt, &probe)
}

pub(crate) fn ground_truth_channel_with_probe(
    m: &Model,
    src: &str,
    tgt: &str,
    probe: &ProcessValue,
) -> Result<InterventionalChannel> {
    let d = m.diagram();
    let si = d.locus_index(src)?;
    let ti = d.locus_index(tgt)?;
    if si == ti {
        return Err(Error::IdenticalLoci { name: src.into() });
    }
    let forward = d.is_descendant(src, tgt)?;
    let backward = d.is_descendant(tgt, src)?;
    if backward {
        return Err(Error::DescendancyViolation {
            src: src.into(),
            tgt: tgt.into(),
            forward,
            backward,
        });
    }
    let treatments: Vec<LocusTreatment> = d
        .loci()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if i == si {
                LocusTreatment::Hole
            } else if i == ti {
                LocusTreatment::FeedExpose(probe.clone())
            } else {
                LocusTreatment::Fill(identity(m.theory(), std::slice::from_ref(&l.system)))
            }
        })
        .collect();
    let channel = contract_to_process(m, &treatments)?;
    Ok(InterventionalChannel { source: src.into(), target: tgt.into(), channel })
}

// ---------------------------------------------------------------------------
// diagram shapes

/// Wiring of the confounded mediation pattern: a bipartite latent state `u`
/// whose right branch feeds the cause box `x` into locus X, a mediator box
/// `z` from X's leave wire into locus Z, and an effect box `y` consuming
/// u's left branch together with Z's leave wire into locus Y.
pub const FRONT_DOOR_WIRES: &[(&str, &str)] = &[
    ("u.out[0]", "y.in[0]"),
    ("u.out[1]", "x.in[0]"),
    ("x.out[0]", "X.arrive"),
    ("X.leave", "z.in[0]"),
    ("z.out[0]", "Z.arrive"),
    ("Z.leave", "y.in[1]"),
    ("y.out[0]", "Y.arrive"),
    ("Y.leave", "discard"),
];

/// Wiring of the mediated single-intervention pattern: `c1` emits a latent
/// branch (to `c3`) and the system arriving at locus X; `c2` maps X's leave
/// wire to locus A; the mediator `g` maps A's leave wire to locus B; `c3`
/// consumes the latent branch and B's leave wire into locus C.
pub const SINGLE_INTERVENTION_WIRES: &[(&str, &str)] = &[
    ("c1.out[0]", "c3.in[0]"),
    ("c1.out[1]", "X.arrive"),
    ("X.leave", "c2.in[0]"),
    ("c2.out[0]", "A.arrive"),
    ("A.leave", "g.in[0]"),
    ("g.out[0]", "B.arrive"),
    ("B.leave", "c3.in[1]"),
    ("C.leave", "discard"),
    ("c3.out[0]", "C.arrive"),
];

/// Wiring of the non-identifiability witness: a bipartite state `u`, a
/// fixed state `zst` observed at locus Z whose output is discarded by `x`,
/// and an effect box `y` reading either branch.
pub const CONFOUNDED_PAIR_WIRES: &[(&str, &str)] = &[
    ("zst.out[0]", "Z.arrive"),
    ("Z.leave", "x.in[0]"),
    ("u.out[1]", "x.in[1]"),
    ("x.out[0]", "X.arrive"),
    ("X.leave", "y.in[1]"),
    ("u.out[0]", "y.in[0]"),
    ("y.out[0]", "Y.arrive"),
    ("Y.leave", "discard"),
];

fn diagram_from_wires(
    systems: &[(&str, usize)],
    boxes: &[(&str, &[&str], &[&str])],
    loci: &[(&str, &str)],
    wires: &[(&str, &str)],
) -> Diagram {
    let mut b = Diagram::builder();
    for (name, dim) in systems {
        b = b.system(name, *dim);
    }
    for (name, ins, outs) in boxes {
        b = b.add_box(name, ins, outs);
    }
    for (name, sys) in loci {
        b = b.add_locus(name, sys);
    }
    for (from, to) in wires {
        b = b.wire_refs(from, to);
    }
    b.build().expect("fixed pattern is valid")
}

/// The front-door diagram with the given dimensions for the two latent
/// branches and the three locus systems.
pub fn front_door_diagram(d_u0: usize, d_u1: usize, d_x: usize, d_z: usize, d_y: usize) -> Diagram {
    diagram_from_wires(
        &[("U0", d_u0), ("U1", d_u1), ("SX", d_x), ("SZ", d_z), ("SY", d_y)],
        &[
            ("u", &[], &["U0", "U1"]),
            ("x", &["U1"], &["SX"]),
            ("z", &["SX"], &["SZ"]),
            ("y", &["U0", "SZ"], &["SY"]),
        ],
        &[("X", "SX"), ("Z", "SZ"), ("Y", "SY")],
        FRONT_DOOR_WIRES,
    )
}

/// The mediated single-intervention diagram.
pub fn single_intervention_diagram(
    d_l: usize,
    d_x: usize,
    d_a: usize,
    d_b: usize,
    d_c: usize,
) -> Diagram {
    diagram_from_wires(
        &[("L", d_l), ("SX", d_x), ("SA", d_a), ("SB", d_b), ("SC", d_c)],
        &[
            ("c1", &[], &["L", "SX"]),
            ("c2", &["SX"], &["SA"]),
            ("g", &["SA"], &["SB"]),
            ("c3", &["L", "SB"], &["SC"]),
        ],
        &[("X", "SX"), ("A", "SA"), ("B", "SB"), ("C", "SC")],
        SINGLE_INTERVENTION_WIRES,
    )
}

/// The all-qubit diagram of the non-identifiability witness.
pub fn confounded_pair_diagram() -> Diagram {
    diagram_from_wires(
        &[("Q", 2)],
        &[
            ("u", &[], &["Q", "Q"]),
            ("zst", &[], &["Q"]),
            ("x", &["Q", "Q"], &["Q"]),
            ("y", &["Q", "Q"], &["Q"]),
        ],
        &[("X", "Q"), ("Z", "Q"), ("Y", "Q")],
        CONFOUNDED_PAIR_WIRES,
    )
}

/// Role assignment of a diagram onto the front-door pattern.
#[derive(Clone, Debug)]
pub struct FrontDoorShape {
    pub x_locus: String,
    pub z_locus: String,
    pub y_locus: String,
    /// Box roles when the shape was matched structurally against a diagram
    /// (confounder, cause, mediator, effect); absent when roles were
    /// asserted directly for a tables-only run.
    pub boxes: Option<(String, String, String, String)>,
}

impl FrontDoorShape {
    /// Asserts locus roles without a diagram; used when identification runs
    /// from serialized tables alone and the structural hypothesis is the
    /// caller's responsibility.
    pub fn from_locus_roles(x: &str, z: &str, y: &str) -> Self {
        FrontDoorShape {
            x_locus: x.into(),
            z_locus: z.into(),
            y_locus: y.into(),
            boxes: None,
        }
    }

    /// Structural match against the pattern, up to permutation of `u`'s
    /// outputs and `y`'s inputs.
    pub fn match_diagram(d: &Diagram) -> Result<Self> {
        let fail = |msg: String| Error::ShapeMismatch { context: format!("front-door: {msg}") };
        if d.loci().len() != 3 {
            return Err(fail(format!("expected 3 loci, got {}", d.loci().len())));
        }
        if d.n_global_in() != 0 || d.n_global_out() != 0 {
            return Err(fail("global ports are not part of the pattern".into()));
        }
        let mut confounder = None;
        let mut mids = Vec::new();
        let mut effect = None;
        for name in d.box_names() {
            let decl = d.box_decl(name)?;
            match (decl.inputs.len(), decl.outputs.len()) {
                (0, 2) => confounder = confounder.xor(Some(name.clone())),
                (1, 1) => mids.push(name.clone()),
                (2, 1) => effect = effect.xor(Some(name.clone())),
                (i, o) => return Err(fail(format!("box `{name}` has arity {i}->{o}"))),
            }
        }
        let (confounder, effect) = match (confounder, effect, mids.len()) {
            (Some(u), Some(y), 2) => (u, y),
            _ => return Err(fail("need one state box, two 1->1 boxes and one 2->1 box".into())),
        };
        for uport in 0..2usize {
            let shape = Self::try_assignment(d, &confounder, &mids, &effect, uport);
            if shape.is_ok() {
                return shape;
            }
        }
        Err(fail("wiring does not match the pattern".into()))
    }

    fn try_assignment(
        d: &Diagram,
        confounder: &str,
        mids: &[String],
        effect: &str,
        uport: usize,
    ) -> Result<Self> {
        let fail = || Error::ShapeMismatch { context: "front-door wiring".into() };
        let out_of = |name: &str, port: usize| Producer::BoxOut { name: name.into(), port };
        // u's chosen branch goes straight to the effect box
        let w = d.wire_from(&out_of(confounder, uport)).ok_or_else(fail)?;
        let y_latent_port = match &w.to {
            Consumer::BoxIn { name, port } if name == effect => *port,
            _ => return Err(fail()),
        };
        // the other branch feeds the cause box
        let w = d.wire_from(&out_of(confounder, 1 - uport)).ok_or_else(fail)?;
        let cause = match &w.to {
            Consumer::BoxIn { name, port: 0 } if mids.contains(name) => name.clone(),
            _ => return Err(fail()),
        };
        let mediator = mids.iter().find(|m| **m != cause).ok_or_else(fail)?.clone();
        // cause -> X
        let w = d.wire_from(&out_of(&cause, 0)).ok_or_else(fail)?;
        let x_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        // X.leave -> mediator -> Z
        let w = d.wire_from(&Producer::LocusLeave { name: x_locus.clone() }).ok_or_else(fail)?;
        match &w.to {
            Consumer::BoxIn { name, port: 0 } if *name == mediator => {}
            _ => return Err(fail()),
        }
        let w = d.wire_from(&out_of(&mediator, 0)).ok_or_else(fail)?;
        let z_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        // Z.leave -> y's other input
        let w = d.wire_from(&Producer::LocusLeave { name: z_locus.clone() }).ok_or_else(fail)?;
        match &w.to {
            Consumer::BoxIn { name, port } if name == effect && *port == 1 - y_latent_port => {}
            _ => return Err(fail()),
        }
        // y -> Y, Y.leave discarded
        let w = d.wire_from(&out_of(effect, 0)).ok_or_else(fail)?;
        let y_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        let w = d.wire_from(&Producer::LocusLeave { name: y_locus.clone() }).ok_or_else(fail)?;
        if w.to != Consumer::Discard {
            return Err(fail());
        }
        Ok(FrontDoorShape {
            x_locus,
            z_locus,
            y_locus,
            boxes: Some((confounder.into(), cause, mediator, effect.into())),
        })
    }
}

/// Role assignment of a diagram onto the mediated single-intervention
/// pattern.
#[derive(Clone, Debug)]
pub struct SingleInterventionShape {
    pub x_locus: String,
    pub a_locus: String,
    pub b_locus: String,
    pub c_locus: String,
    /// (head, pre-mediator, mediator, tail) box roles when matched
    /// structurally.
    pub boxes: Option<(String, String, String, String)>,
}

impl SingleInterventionShape {
    pub fn from_locus_roles(x: &str, a: &str, b: &str, c: &str) -> Self {
        SingleInterventionShape {
            x_locus: x.into(),
            a_locus: a.into(),
            b_locus: b.into(),
            c_locus: c.into(),
            boxes: None,
        }
    }

    /// Structural match, up to permutation of the head's outputs and the
    /// tail's inputs.
    pub fn match_diagram(d: &Diagram) -> Result<Self> {
        let fail =
            |msg: String| Error::ShapeMismatch { context: format!("single-intervention: {msg}") };
        if d.loci().len() != 4 {
            return Err(fail(format!("expected 4 loci, got {}", d.loci().len())));
        }
        if d.n_global_in() != 0 || d.n_global_out() != 0 {
            return Err(fail("global ports are not part of the pattern".into()));
        }
        let mut head = None;
        let mut mids = Vec::new();
        let mut tail = None;
        for name in d.box_names() {
            let decl = d.box_decl(name)?;
            match (decl.inputs.len(), decl.outputs.len()) {
                (0, 2) => head = head.xor(Some(name.clone())),
                (1, 1) => mids.push(name.clone()),
                (2, 1) => tail = tail.xor(Some(name.clone())),
                (i, o) => return Err(fail(format!("box `{name}` has arity {i}->{o}"))),
            }
        }
        let (head, tail) = match (head, tail, mids.len()) {
            (Some(h), Some(t), 2) => (h, t),
            _ => return Err(fail("need one state box, two 1->1 boxes and one 2->1 box".into())),
        };
        for hport in 0..2usize {
            if let Ok(shape) = Self::try_assignment(d, &head, &mids, &tail, hport) {
                return Ok(shape);
            }
        }
        Err(fail("wiring does not match the pattern".into()))
    }

    fn try_assignment(
        d: &Diagram,
        head: &str,
        mids: &[String],
        tail: &str,
        hport: usize,
    ) -> Result<Self> {
        let fail = || Error::ShapeMismatch { context: "single-intervention wiring".into() };
        let out_of = |name: &str, port: usize| Producer::BoxOut { name: name.into(), port };
        // head's chosen branch is the latent wire into the tail
        let w = d.wire_from(&out_of(head, hport)).ok_or_else(fail)?;
        let tail_latent_port = match &w.to {
            Consumer::BoxIn { name, port } if name == tail => *port,
            _ => return Err(fail()),
        };
        // the other branch arrives at X
        let w = d.wire_from(&out_of(head, 1 - hport)).ok_or_else(fail)?;
        let x_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        // X.leave -> pre-mediator -> A
        let w = d.wire_from(&Producer::LocusLeave { name: x_locus.clone() }).ok_or_else(fail)?;
        let pre = match &w.to {
            Consumer::BoxIn { name, port: 0 } if mids.contains(name) => name.clone(),
            _ => return Err(fail()),
        };
        let mediator = mids.iter().find(|m| **m != pre).ok_or_else(fail)?.clone();
        let w = d.wire_from(&out_of(&pre, 0)).ok_or_else(fail)?;
        let a_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        // A.leave -> mediator -> B
        let w = d.wire_from(&Producer::LocusLeave { name: a_locus.clone() }).ok_or_else(fail)?;
        match &w.to {
            Consumer::BoxIn { name, port: 0 } if *name == mediator => {}
            _ => return Err(fail()),
        }
        let w = d.wire_from(&out_of(&mediator, 0)).ok_or_else(fail)?;
        let b_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        // B.leave -> tail's other input
        let w = d.wire_from(&Producer::LocusLeave { name: b_locus.clone() }).ok_or_else(fail)?;
        match &w.to {
            Consumer::BoxIn { name, port } if name == tail && *port == 1 - tail_latent_port => {}
            _ => return Err(fail()),
        }
        // tail -> C, C.leave discarded
        let w = d.wire_from(&out_of(tail, 0)).ok_or_else(fail)?;
        let c_locus = match &w.to {
            Consumer::LocusArrive { name } => name.clone(),
            _ => return Err(fail()),
        };
        let w = d.wire_from(&Producer::LocusLeave { name: c_locus.clone() }).ok_or_else(fail)?;
        if w.to != Consumer::Discard {
            return Err(fail());
        }
        Ok(SingleInterventionShape {
            x_locus,
            a_locus,
            b_locus,
            c_locus,
            boxes: Some((head.into(), pre, mediator, tail.into())),
        })
    }
}

// ---------------------------------------------------------------------------
// identification

/// Numerical context of an identification run, serialized alongside the
/// channel.
#[derive(Clone, Debug, Default)]
pub struct IdentifyDiagnostics {
    /// Smallest scalar divided by; positive models keep this well away from
    /// the floor.
    pub min_divisor: f64,
    /// Frame condition numbers per locus role.
    pub frame_conditions: BTreeMap<String, f64>,
    /// Basis ids realizing each locus's frame elements.
    pub frame_bases: BTreeMap<String, Vec<String>>,
}

/// An identified channel plus its diagnostics.
#[derive(Clone, Debug)]
pub struct Identified {
    pub channel: InterventionalChannel,
    pub diagnostics: IdentifyDiagnostics,
}

struct TableView<'a> {
    table: &'a ObservationTable,
}

impl<'a> TableView<'a> {
    fn prob(&self, assignments: &[(usize, (&str, usize))]) -> Result<f64> {
        let n = self.table.plan.loci.len();
        let mut choices: Vec<&str> = vec![TRIVIAL_CHOICE; n];
        let mut outcomes = vec![0usize; n];
        for (li, (basis, out)) in assignments {
            choices[*li] = basis;
            outcomes[*li] = *out;
        }
        self.table.get(&choices, &outcomes).ok_or_else(|| Error::MissingTable {
            context: format!("choices {choices:?}, outcomes {outcomes:?}"),
        })
    }
}

fn guard_divisor(value: f64, context: &str, min_seen: &mut f64) -> Result<f64> {
    if value <= tol::DIVISOR_FLOOR {
        return Err(Error::ZeroDivisor { context: context.into(), value });
    }
    *min_seen = min_seen.min(value);
    Ok(value)
}

fn frame_basis_ids(frame: &Frame) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for label in frame.labels() {
        if let crate::instruments::FrameLabel::Outcome { basis, .. } = label {
            if !out.contains(basis) {
                out.push(basis.clone());
            }
        }
    }
    out
}

fn locus_frame<'a>(
    frames: &'a BTreeMap<String, Frame>,
    table: &ObservationTable,
    locus: &str,
) -> Result<(usize, &'a Frame)> {
    let li = table.plan.locus_index(locus)?;
    let frame = frames.get(locus).ok_or_else(|| Error::MissingFrame { locus: locus.into() })?;
    if frame.theory() != table.theory {
        return Err(Error::TheoryMismatch);
    }
    if frame.ports() != std::slice::from_ref(&table.plan.loci[li].1) {
        return Err(Error::TypeMismatch {
            context: format!("frame for locus `{locus}` is on the wrong system"),
        });
    }
    Ok((li, frame))
}

/// Front-door identification. Step 1 tomographs the mediator from the
/// source/mediator statistics with the sink left unmeasured; step 2 divides
/// the three-locus statistics by the mediator's elements to obtain the
/// outer comb; step 3 composes the two at the mediator ports, leaving the
/// source input and output.
pub fn identify_front_door(
    table: &ObservationTable,
    shape: &FrontDoorShape,
    frames: &BTreeMap<String, Frame>,
) -> Result<Identified> {
    let (ix, fx) = locus_frame(frames, table, &shape.x_locus)?;
    let (iz, fz) = locus_frame(frames, table, &shape.z_locus)?;
    let (iy, fy) = locus_frame(frames, table, &shape.y_locus)?;
    let view = TableView { table };
    let mut min_div = f64::INFINITY;

    // step 1: mediator elements (k|z|i) = p(i,k) / p(i)
    let mut grid_z = Array2::zeros((fx.len(), fz.len()));
    for i in 0..fx.len() {
        let (bi, oi) = fx.outcome_label(i)?;
        let pi = guard_divisor(
            view.prob(&[(ix, (bi, oi))])?,
            "normalizing by the source marginal",
            &mut min_div,
        )?;
        for k in 0..fz.len() {
            let (bk, ok) = fz.outcome_label(k)?;
            let pik = view.prob(&[(ix, (bi, oi)), (iz, (bk, ok))])?;
            grid_z[[i, k]] = pik / pi;
        }
    }
    let z_hat = reconstruct(&grid_z, fx, fz)?;

    // step 2: outer-comb elements (i,m|comb|k) = p(i,k,m) / (k|z|i)
    let fxy = fx.product(fy)?;
    let mut grid_comb = Array2::zeros((fz.len(), fx.len() * fy.len()));
    for i in 0..fx.len() {
        let (bi, oi) = fx.outcome_label(i)?;
        for k in 0..fz.len() {
            let (bk, ok) = fz.outcome_label(k)?;
            let div =
                guard_divisor(grid_z[[i, k]], "adjusting for the mediator", &mut min_div)?;
            for mj in 0..fy.len() {
                let (bm, om) = fy.outcome_label(mj)?;
                let p3 = view.prob(&[(ix, (bi, oi)), (iz, (bk, ok)), (iy, (bm, om))])?;
                grid_comb[[k, i * fy.len() + mj]] = p3 / div;
            }
        }
    }
    let comb = reconstruct(&grid_comb, fz, &fxy)?;

    // step 3: compose at the mediator ports
    let channel = comb.compose_seq(&z_hat)?;
    let mut frame_conditions = BTreeMap::new();
    let mut frame_bases = BTreeMap::new();
    for (locus, frame) in [(&shape.x_locus, fx), (&shape.z_locus, fz), (&shape.y_locus, fy)] {
        frame_conditions.insert(locus.clone(), frame.condition_number());
        frame_bases.insert(locus.clone(), frame_basis_ids(frame));
    }
    Ok(Identified {
        channel: InterventionalChannel {
            source: shape.x_locus.clone(),
            target: shape.y_locus.clone(),
            channel,
        },
        diagnostics: IdentifyDiagnostics { min_divisor: min_div, frame_conditions, frame_bases },
    })
}

/// Mediated single-intervention identification. The mediator `g` and the
/// pre-mediator (X to A) are tomographed from pairwise statistics; the
/// residual comb from B's leave wire to the X-arrive and C outputs is
/// obtained by adjusting for the mediated X-to-B elements; composing the
/// three at the A and B ports leaves the X input and output.
pub fn identify_single_intervention(
    table: &ObservationTable,
    shape: &SingleInterventionShape,
    frames: &BTreeMap<String, Frame>,
) -> Result<Identified> {
    let (ix, fx) = locus_frame(frames, table, &shape.x_locus)?;
    let (ia, fa) = locus_frame(frames, table, &shape.a_locus)?;
    let (ib, fb) = locus_frame(frames, table, &shape.b_locus)?;
    let (ic, fc) = locus_frame(frames, table, &shape.c_locus)?;
    let view = TableView { table };
    let mut min_div = f64::INFINITY;

    // mediator elements (b|g|a) = p(a,b) / p(a)
    let mut grid_g = Array2::zeros((fa.len(), fb.len()));
    for a in 0..fa.len() {
        let (ba, oa) = fa.outcome_label(a)?;
        let pa = guard_divisor(
            view.prob(&[(ia, (ba, oa))])?,
            "normalizing by the pre-mediator marginal",
            &mut min_div,
        )?;
        for b in 0..fb.len() {
            let (bb, ob) = fb.outcome_label(b)?;
            grid_g[[a, b]] = view.prob(&[(ia, (ba, oa)), (ib, (bb, ob))])? / pa;
        }
    }
    let g_hat = reconstruct(&grid_g, fa, fb)?;

    // pre-mediator elements (a|c2|x) = p(x,a) / p(x)
    let mut px = vec![0.0; fx.len()];
    let mut grid_pre = Array2::zeros((fx.len(), fa.len()));
    for x in 0..fx.len() {
        let (bx, ox) = fx.outcome_label(x)?;
        px[x] = guard_divisor(
            view.prob(&[(ix, (bx, ox))])?,
            "normalizing by the source marginal",
            &mut min_div,
        )?;
        for a in 0..fa.len() {
            let (ba, oa) = fa.outcome_label(a)?;
            grid_pre[[x, a]] = view.prob(&[(ix, (bx, ox)), (ia, (ba, oa))])? / px[x];
        }
    }
    let pre_hat = reconstruct(&grid_pre, fx, fa)?;

    // residual comb elements (x,c|w|b) = p(x,b,c) / (b|g∘c2|x), where the
    // mediated elements (b|g∘c2|x) = p(x,b) / p(x) come from the same table
    let fxc = fx.product(fc)?;
    let mut grid_w = Array2::zeros((fb.len(), fx.len() * fc.len()));
    for x in 0..fx.len() {
        let (bx, ox) = fx.outcome_label(x)?;
        for b in 0..fb.len() {
            let (bb, ob) = fb.outcome_label(b)?;
            let mediated = guard_divisor(
                view.prob(&[(ix, (bx, ox)), (ib, (bb, ob))])? / px[x],
                "adjusting for the mediated source-to-B elements",
                &mut min_div,
            )?;
            for c in 0..fc.len() {
                let (bc, oc) = fc.outcome_label(c)?;
                let p3 = view.prob(&[(ix, (bx, ox)), (ib, (bb, ob)), (ic, (bc, oc))])?;
                grid_w[[b, x * fc.len() + c]] = p3 / mediated;
            }
        }
    }
    let w_hat = reconstruct(&grid_w, fb, &fxc)?;

    // compose at the A and B ports, leaving the X input and output
    let channel = w_hat.compose_seq(&g_hat)?.compose_seq(&pre_hat)?;
    let mut frame_conditions = BTreeMap::new();
    let mut frame_bases = BTreeMap::new();
    for (locus, frame) in [
        (&shape.x_locus, fx),
        (&shape.a_locus, fa),
        (&shape.b_locus, fb),
        (&shape.c_locus, fc),
    ] {
        frame_conditions.insert(locus.clone(), frame.condition_number());
        frame_bases.insert(locus.clone(), frame_basis_ids(frame));
    }
    Ok(Identified {
        channel: InterventionalChannel {
            source: shape.x_locus.clone(),
            target: shape.c_locus.clone(),
            channel,
        },
        diagnostics: IdentifyDiagnostics { min_divisor: min_div, frame_conditions, frame_bases },
    })
}

// ---------------------------------------------------------------------------
// non-identifiability witness

fn pauli() -> [Array2<Complex64>; 4] {
    let c = Complex64::new;
    [
        ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        ndarray::array![[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        ndarray::array![[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    ]
}

/// Kraus operators of the depolarizing channel with parameter `lambda`
/// followed by nothing (it already includes the dephasing composition made
/// by the caller).
fn depolarizing_kraus(lambda: f64) -> Vec<Array2<Complex64>> {
    let [i, x, y, z] = pauli();
    let a = Complex64::new((1.0 - 3.0 * lambda / 4.0).sqrt(), 0.0);
    let b = Complex64::new((lambda / 4.0).sqrt(), 0.0);
    vec![i.mapv(|v| v * a), x.mapv(|v| v * b), y.mapv(|v| v * b), z.mapv(|v| v * b)]
}

fn dephasing_kraus() -> Vec<Array2<Complex64>> {
    let c = Complex64::new;
    vec![
        ndarray::array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]],
        ndarray::array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
    ]
}

fn bra(k: usize) -> Array2<Complex64> {
    let mut m = Array2::zeros((1, 2));
    m[[0, k]] = Complex64::new(1.0, 0.0);
    m
}

/// Two models on [`confounded_pair_diagram`] with identical projective
/// observation statistics at the loci but different interventional channels
/// from X to Y: both share the maximally entangled `u`, a full-support
/// state at Z and a pass-through `x`; the first model's `y` measures and
/// depolarizes the latent branch and discards the X branch, the second does
/// the reverse.
pub fn build_counterexample_pair(lambda: f64) -> Result<(Model, Model)> {
    if !(lambda > 0.0 && lambda <= 1.0) || lambda.is_nan() {
        return Err(Error::BadLambda { value: lambda });
    }
    counterexample_pair_unchecked(lambda)
}

pub(crate) fn counterexample_pair_unchecked(lambda: f64) -> Result<(Model, Model)> {
    let (doc1, doc2) = counterexample_pair_docs(lambda);
    Ok((crate::parse::parse_model(&doc1)?, crate::parse::parse_model(&doc2)?))
}

/// The two models as model-file documents (shared by the shipped files and
/// the in-code constructor).
pub fn counterexample_pair_docs(lambda: f64) -> (String, String) {
    use crate::parse::{write_model_toml, BoxPayload, BoxSpec, ModelSpec};

    let bell = {
        let mut col: Array2<Complex64> = Array2::zeros((4, 1));
        col[[0, 0]] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        col[[3, 0]] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        vec![col]
    };
    let z_state = {
        let mut k0: Array2<Complex64> = Array2::zeros((2, 1));
        k0[[0, 0]] = Complex64::new(0.6f64.sqrt(), 0.0);
        let mut k1: Array2<Complex64> = Array2::zeros((2, 1));
        k1[[1, 0]] = Complex64::new(0.4f64.sqrt(), 0.0);
        vec![k0, k1]
    };
    let pass_right: Vec<Array2<Complex64>> =
        (0..2).map(|k| ndarray::linalg::kron(&bra(k), &Array2::eye(2))).collect();
    let measure_then_noise: Vec<Array2<Complex64>> = depolarizing_kraus(lambda)
        .iter()
        .flat_map(|f| dephasing_kraus().iter().map(|e| f.dot(e)).collect::<Vec<_>>())
        .collect();
    let y_left: Vec<Array2<Complex64>> = measure_then_noise
        .iter()
        .flat_map(|fe| (0..2).map(|k| ndarray::linalg::kron(fe, &bra(k))).collect::<Vec<_>>())
        .collect();
    let y_right: Vec<Array2<Complex64>> = measure_then_noise
        .iter()
        .flat_map(|fe| (0..2).map(|k| ndarray::linalg::kron(&bra(k), fe)).collect::<Vec<_>>())
        .collect();

    let spec_for = |y_ops: Vec<Array2<Complex64>>| ModelSpec {
        theory: TheoryTag::Quantum,
        systems: vec![("Q".into(), 2)],
        boxes: vec![
            BoxSpec {
                name: "u".into(),
                inputs: vec![],
                outputs: vec!["Q".into(), "Q".into()],
                payload: BoxPayload::Kraus(bell.clone()),
            },
            BoxSpec {
                name: "zst".into(),
                inputs: vec![],
                outputs: vec!["Q".into()],
                payload: BoxPayload::Kraus(z_state.clone()),
            },
            BoxSpec {
                name: "x".into(),
                inputs: vec!["Q".into(), "Q".into()],
                outputs: vec!["Q".into()],
                payload: BoxPayload::Kraus(pass_right.clone()),
            },
            BoxSpec {
                name: "y".into(),
                inputs: vec!["Q".into(), "Q".into()],
                outputs: vec!["Q".into()],
                payload: BoxPayload::Kraus(y_ops),
            },
        ],
        loci: vec![("X".into(), "Q".into()), ("Z".into(), "Q".into()), ("Y".into(), "Q".into())],
        wires: CONFOUNDED_PAIR_WIRES.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
    };
    (write_model_toml(&spec_for(y_left)), write_model_toml(&spec_for(y_right)))
}
