//! Circuits with holes: typed acyclic string diagrams whose intervention
//! loci are input/output pairs that local processes can be plugged into.
//!
//! A diagram owns a signature (system types and box declarations), an
//! ordered list of loci and a wiring. Validation enforces that every port is
//! connected exactly once with matching types and that joining every locus's
//! arrive port to its leave port leaves the graph acyclic — the closure
//! condition that makes the holes fillable. A model attaches a concrete
//! causal interpretation to every box.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::theory::{identity, ProcessValue, SystemType, TheoryTag};
use crate::tol;

/// Declared input/output port types of a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxDecl {
    pub inputs: Vec<SystemType>,
    pub outputs: Vec<SystemType>,
}

/// The free symmetric monoidal signature a diagram is drawn in: its system
/// types and one declaration per box name.
#[derive(Clone, Debug, Default)]
pub struct Signature {
    pub systems: BTreeMap<String, SystemType>,
    pub boxes: BTreeMap<String, BoxDecl>,
}

/// An intervention locus: a hole whose arriving and leaving wire carry the
/// same system type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Locus {
    pub name: String,
    pub system: SystemType,
}

/// Producing end of a wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Producer {
    BoxOut { name: String, port: usize },
    LocusLeave { name: String },
    GlobalIn { index: usize },
}

/// Consuming end of a wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Consumer {
    BoxIn { name: String, port: usize },
    LocusArrive { name: String },
    GlobalOut { index: usize },
    Discard,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Wire {
    pub from: Producer,
    pub to: Consumer,
}

/// A validated circuit with holes.
#[derive(Clone, Debug)]
pub struct Diagram {
    signature: Signature,
    boxes: Vec<String>,
    loci: Vec<Locus>,
    wires: Vec<Wire>,
    n_global_in: usize,
    n_global_out: usize,
}

/// Graph node used for reachability and acyclicity: boxes and loci both pass
/// flow from their inputs to their outputs.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Site {
    Box(usize),
    Locus(usize),
}

impl Diagram {
    pub fn builder() -> DiagramBuilder {
        DiagramBuilder::default()
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn box_names(&self) -> &[String] {
        &self.boxes
    }

    pub fn box_decl(&self, name: &str) -> Result<&BoxDecl> {
        self.signature.boxes.get(name).ok_or_else(|| Error::UnknownBox { name: name.into() })
    }

    pub fn loci(&self) -> &[Locus] {
        &self.loci
    }

    pub fn locus(&self, name: &str) -> Result<&Locus> {
        self.loci
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLocus { name: name.into() })
    }

    pub fn locus_index(&self, name: &str) -> Result<usize> {
        self.loci
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLocus { name: name.into() })
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn n_global_in(&self) -> usize {
        self.n_global_in
    }

    pub fn n_global_out(&self) -> usize {
        self.n_global_out
    }

    /// The system type carried by a wire, read off its producing end.
    pub fn wire_type(&self, wire: &Wire) -> Result<SystemType> {
        match &wire.from {
            Producer::BoxOut { name, port } => {
                let decl = self.box_decl(name)?;
                Ok(decl.outputs[*port].clone())
            }
            Producer::LocusLeave { name } => Ok(self.locus(name)?.system.clone()),
            Producer::GlobalIn { .. } => {
                // validated at build time: global inputs type-checked against
                // their consumer
                match &wire.to {
                    Consumer::BoxIn { name, port } => Ok(self.box_decl(name)?.inputs[*port].clone()),
                    Consumer::LocusArrive { name } => Ok(self.locus(name)?.system.clone()),
                    _ => Err(Error::TypeMismatch {
                        context: "global input wired to an untyped consumer".into(),
                    }),
                }
            }
        }
    }

    fn producer_site(&self, p: &Producer) -> Option<Site> {
        match p {
            Producer::BoxOut { name, .. } => {
                self.boxes.iter().position(|b| b == name).map(Site::Box)
            }
            Producer::LocusLeave { name } => {
                self.loci.iter().position(|l| &l.name == name).map(Site::Locus)
            }
            Producer::GlobalIn { .. } => None,
        }
    }

    fn consumer_site(&self, c: &Consumer) -> Option<Site> {
        match c {
            Consumer::BoxIn { name, .. } => {
                self.boxes.iter().position(|b| b == name).map(Site::Box)
            }
            Consumer::LocusArrive { name } => {
                self.loci.iter().position(|l| &l.name == name).map(Site::Locus)
            }
            Consumer::GlobalOut { .. } | Consumer::Discard => None,
        }
    }

    /// The wire leaving a producer port, if any.
    pub fn wire_from(&self, p: &Producer) -> Option<&Wire> {
        self.wires.iter().find(|w| &w.from == p)
    }

    /// The wire entering a consumer port, if any.
    pub fn wire_to(&self, c: &Consumer) -> Option<&Wire> {
        self.wires.iter().find(|w| &w.to == c)
    }

    /// True iff `tgt` is a descendant of `src`: with every other locus's
    /// arrive port joined to its leave port, a directed path runs from
    /// `src`'s leave port to `tgt`'s arrive port. Interventions at `src` can
    /// then influence events at `tgt`.
    pub fn is_descendant(&self, src: &str, tgt: &str) -> Result<bool> {
        let src_idx = self.locus_index(src)?;
        let tgt_idx = self.locus_index(tgt)?;
        if src_idx == tgt_idx {
            return Err(Error::IdenticalLoci { name: src.into() });
        }
        let mut queue: Vec<Site> = Vec::new();
        let mut seen = vec![false; self.boxes.len() + self.loci.len()];
        let site_id = |s: Site| match s {
            Site::Box(i) => i,
            Site::Locus(i) => self.boxes.len() + i,
        };
        // seed with everything directly fed by src's leave wire
        for w in &self.wires {
            if matches!(&w.from, Producer::LocusLeave { name } if name == src) {
                if matches!(&w.to, Consumer::LocusArrive { name } if name == tgt) {
                    return Ok(true);
                }
                if let Some(site) = self.consumer_site(&w.to) {
                    // entering tgt or src directly does not continue the path
                    let passes = match site {
                        Site::Locus(i) => i != src_idx && i != tgt_idx,
                        Site::Box(_) => true,
                    };
                    if passes && !seen[site_id(site)] {
                        seen[site_id(site)] = true;
                        queue.push(site);
                    }
                }
            }
        }
        while let Some(site) = queue.pop() {
            for w in &self.wires {
                if self.producer_site(&w.from) != Some(site) {
                    continue;
                }
                if matches!(&w.to, Consumer::LocusArrive { name } if name == tgt) {
                    return Ok(true);
                }
                if let Some(next) = self.consumer_site(&w.to) {
                    let passes = match next {
                        Site::Locus(i) => i != src_idx && i != tgt_idx,
                        Site::Box(_) => true,
                    };
                    if passes && !seen[site_id(next)] {
                        seen[site_id(next)] = true;
                        queue.push(next);
                    }
                }
            }
        }
        Ok(false)
    }

    /// Closure condition: joining every locus must leave the graph acyclic.
    fn check_closure(&self) -> Result<()> {
        let n = self.boxes.len() + self.loci.len();
        let site_id = |s: Site| match s {
            Site::Box(i) => i,
            Site::Locus(i) => self.boxes.len() + i,
        };
        let mut indeg = vec![0usize; n];
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for w in &self.wires {
            if let (Some(a), Some(b)) = (self.producer_site(&w.from), self.consumer_site(&w.to)) {
                edges.push((site_id(a), site_id(b)));
                indeg[site_id(b)] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut removed = 0usize;
        while let Some(i) = ready.pop() {
            removed += 1;
            for &(a, b) in &edges {
                if a == i {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        ready.push(b);
                    }
                }
            }
        }
        if removed != n {
            let stuck: Vec<String> = (0..n)
                .filter(|&i| indeg[i] > 0)
                .map(|i| {
                    if i < self.boxes.len() {
                        format!("box {}", self.boxes[i])
                    } else {
                        format!("locus {}", self.loci[i - self.boxes.len()].name)
                    }
                })
                .collect();
            return Err(Error::CycleDetected { context: stuck.join(", ") });
        }
        Ok(())
    }
}

/// Incremental construction of a [`Diagram`]; `build` runs full validation.
#[derive(Default)]
pub struct DiagramBuilder {
    systems: BTreeMap<String, SystemType>,
    boxes: Vec<(String, BoxDecl)>,
    loci: Vec<Locus>,
    wires: Vec<Wire>,
}

impl DiagramBuilder {
    pub fn system(mut self, name: &str, dim: usize) -> Self {
        self.systems.insert(name.into(), SystemType::new(name, dim));
        self
    }

    pub fn add_box(mut self, name: &str, inputs: &[&str], outputs: &[&str]) -> Self {
        // unknown system names become `?name` placeholders, rejected in build()
        let resolve = |systems: &BTreeMap<String, SystemType>, names: &[&str]| {
            names
                .iter()
                .map(|n| {
                    systems.get(*n).cloned().unwrap_or_else(|| SystemType::new(format!("?{n}"), 1))
                })
                .collect::<Vec<_>>()
        };
        let inputs = resolve(&self.systems, inputs);
        let outputs = resolve(&self.systems, outputs);
        self.boxes.push((name.into(), BoxDecl { inputs, outputs }));
        self
    }

    pub fn add_locus(mut self, name: &str, system: &str) -> Self {
        let sys = self
            .systems
            .get(system)
            .cloned()
            .unwrap_or_else(|| SystemType::new(format!("?{system}"), 1));
        self.loci.push(Locus { name: name.into(), system: sys });
        self
    }

    pub fn wire(mut self, from: Producer, to: Consumer) -> Self {
        self.wires.push(Wire { from, to });
        self
    }

    /// Convenience wiring in the textual reference syntax, e.g.
    /// `"u.out[0]" -> "y.in[1]"`, `"X.leave" -> "z.in[0]"`, `"y.out[0]" ->
    /// "Y.arrive"`, `"Y.leave" -> "discard"`.
    pub fn wire_refs(self, from: &str, to: &str) -> Self {
        let p = parse_producer(from).expect("bad producer reference");
        let c = parse_consumer(to).expect("bad consumer reference");
        self.wire(p, c)
    }

    pub fn build(self) -> Result<Diagram> {
        let mut signature = Signature { systems: self.systems, boxes: BTreeMap::new() };
        let mut box_order = Vec::new();
        for (name, decl) in self.boxes {
            for t in decl.inputs.iter().chain(decl.outputs.iter()) {
                if !signature.systems.contains_key(t.name()) {
                    return Err(Error::UnknownSystem {
                        name: t.name().trim_start_matches('?').into(),
                    });
                }
            }
            if signature.boxes.insert(name.clone(), decl).is_some() {
                return Err(Error::PortArityMismatch {
                    context: format!("box `{name}` declared twice"),
                });
            }
            box_order.push(name);
        }
        for l in &self.loci {
            if l.system.name().starts_with('?') {
                return Err(Error::UnknownSystem {
                    name: l.system.name().trim_start_matches('?').into(),
                });
            }
            if box_order.contains(&l.name) {
                return Err(Error::PortArityMismatch {
                    context: format!("name `{}` used for both a box and a locus", l.name),
                });
            }
        }
        {
            let mut names: Vec<&str> = self.loci.iter().map(|l| l.name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            if names.len() != self.loci.len() {
                return Err(Error::PortArityMismatch { context: "duplicate locus name".into() });
            }
        }

        let n_global_in = self
            .wires
            .iter()
            .filter(|w| matches!(w.from, Producer::GlobalIn { .. }))
            .count();
        let n_global_out = self
            .wires
            .iter()
            .filter(|w| matches!(w.to, Consumer::GlobalOut { .. }))
            .count();

        let d = Diagram {
            signature,
            boxes: box_order,
            loci: self.loci,
            wires: self.wires,
            n_global_in,
            n_global_out,
        };
        d.validate_connectivity()?;
        d.check_closure()?;
        Ok(d)
    }
}

impl Diagram {
    fn validate_connectivity(&self) -> Result<()> {
        // every referenced endpoint must exist, with ports in range
        let mut produced: BTreeMap<String, usize> = BTreeMap::new();
        let mut consumed: BTreeMap<String, usize> = BTreeMap::new();
        let record = |map: &mut BTreeMap<String, usize>, key: String| {
            *map.entry(key).or_insert(0) += 1;
        };
        for w in &self.wires {
            match &w.from {
                Producer::BoxOut { name, port } => {
                    let decl = self.box_decl(name)?;
                    if *port >= decl.outputs.len() {
                        return Err(Error::PortArityMismatch {
                            context: format!("box `{name}` has no output {port}"),
                        });
                    }
                    record(&mut produced, format!("{name}.out[{port}]"));
                }
                Producer::LocusLeave { name } => {
                    self.locus(name)?;
                    record(&mut produced, format!("{name}.leave"));
                }
                Producer::GlobalIn { index } => {
                    record(&mut produced, format!("input[{index}]"));
                }
            }
            match &w.to {
                Consumer::BoxIn { name, port } => {
                    let decl = self.box_decl(name)?;
                    if *port >= decl.inputs.len() {
                        return Err(Error::PortArityMismatch {
                            context: format!("box `{name}` has no input {port}"),
                        });
                    }
                    record(&mut consumed, format!("{name}.in[{port}]"));
                }
                Consumer::LocusArrive { name } => {
                    self.locus(name)?;
                    record(&mut consumed, format!("{name}.arrive"));
                }
                Consumer::GlobalOut { index } => {
                    record(&mut consumed, format!("output[{index}]"));
                }
                Consumer::Discard => {}
            }
        }
        // exactly-once coverage of every declared port
        for name in &self.boxes {
            let decl = &self.signature.boxes[name];
            for port in 0..decl.outputs.len() {
                match produced.get(&format!("{name}.out[{port}]")) {
                    Some(1) => {}
                    Some(n) => {
                        return Err(Error::PortArityMismatch {
                            context: format!("{name}.out[{port}] connected {n} times"),
                        })
                    }
                    None => {
                        return Err(Error::PortArityMismatch {
                            context: format!("{name}.out[{port}] not connected"),
                        })
                    }
                }
            }
            for port in 0..decl.inputs.len() {
                match consumed.get(&format!("{name}.in[{port}]")) {
                    Some(1) => {}
                    Some(n) => {
                        return Err(Error::PortArityMismatch {
                            context: format!("{name}.in[{port}] connected {n} times"),
                        })
                    }
                    None => {
                        return Err(Error::PortArityMismatch {
                            context: format!("{name}.in[{port}] not connected"),
                        })
                    }
                }
            }
        }
        for l in &self.loci {
            for (map, port) in [(&produced, "leave"), (&consumed, "arrive")] {
                match map.get(&format!("{}.{}", l.name, port)) {
                    Some(1) => {}
                    Some(n) => {
                        return Err(Error::PortArityMismatch {
                            context: format!("{}.{} connected {n} times", l.name, port),
                        })
                    }
                    None => {
                        return Err(Error::PortArityMismatch {
                            context: format!("{}.{} not connected", l.name, port),
                        })
                    }
                }
            }
        }
        // global port indices must be 0..n, each used once
        for i in 0..self.n_global_in {
            if produced.get(&format!("input[{i}]")) != Some(&1) {
                return Err(Error::PortArityMismatch {
                    context: format!("global input {i} missing or duplicated"),
                });
            }
        }
        for i in 0..self.n_global_out {
            if consumed.get(&format!("output[{i}]")) != Some(&1) {
                return Err(Error::PortArityMismatch {
                    context: format!("global output {i} missing or duplicated"),
                });
            }
        }
        // wire endpoints must carry equal types
        for w in &self.wires {
            let from_ty = match &w.from {
                Producer::BoxOut { name, port } => Some(self.box_decl(name)?.outputs[*port].clone()),
                Producer::LocusLeave { name } => Some(self.locus(name)?.system.clone()),
                Producer::GlobalIn { .. } => None,
            };
            let to_ty = match &w.to {
                Consumer::BoxIn { name, port } => Some(self.box_decl(name)?.inputs[*port].clone()),
                Consumer::LocusArrive { name } => Some(self.locus(name)?.system.clone()),
                Consumer::GlobalOut { .. } | Consumer::Discard => None,
            };
            if let (Some(a), Some(b)) = (&from_ty, &to_ty) {
                if a != b {
                    return Err(Error::TypeMismatch {
                        context: format!("wire {:?} -> {:?} carries {} vs {}", w.from, w.to, a, b),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Parses `name.out[k]`, `name.leave` or `input[k]`.
pub fn parse_producer(s: &str) -> Result<Producer> {
    let bad = || Error::SyntaxError {
        line: 0,
        col: 0,
        msg: format!("bad producer reference `{s}`"),
    };
    if let Some(rest) = s.strip_prefix("input[") {
        let idx = rest.strip_suffix(']').ok_or_else(bad)?;
        return Ok(Producer::GlobalIn { index: idx.parse().map_err(|_| bad())? });
    }
    let (name, port) = s.split_once('.').ok_or_else(bad)?;
    if port == "leave" {
        return Ok(Producer::LocusLeave { name: name.into() });
    }
    if let Some(rest) = port.strip_prefix("out[") {
        let idx = rest.strip_suffix(']').ok_or_else(bad)?;
        return Ok(Producer::BoxOut { name: name.into(), port: idx.parse().map_err(|_| bad())? });
    }
    Err(bad())
}

/// Parses `name.in[k]`, `name.arrive`, `output[k]` or `discard`.
pub fn parse_consumer(s: &str) -> Result<Consumer> {
    let bad = || Error::SyntaxError {
        line: 0,
        col: 0,
        msg: format!("bad consumer reference `{s}`"),
    };
    if s == "discard" {
        return Ok(Consumer::Discard);
    }
    if let Some(rest) = s.strip_prefix("output[") {
        let idx = rest.strip_suffix(']').ok_or_else(bad)?;
        return Ok(Consumer::GlobalOut { index: idx.parse().map_err(|_| bad())? });
    }
    let (name, port) = s.split_once('.').ok_or_else(bad)?;
    if port == "arrive" {
        return Ok(Consumer::LocusArrive { name: name.into() });
    }
    if let Some(rest) = port.strip_prefix("in[") {
        let idx = rest.strip_suffix(']').ok_or_else(bad)?;
        return Ok(Consumer::BoxIn { name: name.into(), port: idx.parse().map_err(|_| bad())? });
    }
    Err(bad())
}

/// A diagram together with a causal interpretation of every box.
#[derive(Clone, Debug)]
pub struct Model {
    diagram: Diagram,
    theory: TheoryTag,
    interpretation: BTreeMap<String, ProcessValue>,
}

impl Model {
    /// Validates port types, dimensions, causality of every box and (for the
    /// quantum theory) complete positivity.
    pub fn new(
        diagram: Diagram,
        theory: TheoryTag,
        interpretation: BTreeMap<String, ProcessValue>,
    ) -> Result<Self> {
        for name in diagram.box_names() {
            let decl = diagram.box_decl(name)?;
            let pv = interpretation
                .get(name)
                .ok_or_else(|| Error::UnknownBox { name: format!("{name} (no interpretation)") })?;
            if pv.theory() != theory {
                return Err(Error::TheoryMismatch);
            }
            if pv.in_type() != decl.inputs.as_slice() || pv.out_type() != decl.outputs.as_slice() {
                return Err(Error::TypeMismatch {
                    context: format!("interpretation of `{name}` does not match its declaration"),
                });
            }
            if !pv.is_causal(tol::EQ) {
                return Err(Error::NonCausalBox {
                    name: name.clone(),
                    deviation: pv.causality_deviation(),
                });
            }
            if theory == TheoryTag::Quantum && !pv.is_cp(tol::CP_EIG)? {
                return Err(Error::InvalidBoxData {
                    name: name.clone(),
                    reason: "interpretation is not completely positive".into(),
                });
            }
        }
        for extra in interpretation.keys() {
            if !diagram.box_names().contains(extra) {
                return Err(Error::UnknownBox { name: extra.clone() });
            }
        }
        Ok(Model { diagram, theory, interpretation })
    }

    pub fn diagram(&self) -> &Diagram {
        &self.diagram
    }

    pub fn theory(&self) -> TheoryTag {
        self.theory
    }

    pub fn interpretation(&self, name: &str) -> Result<&ProcessValue> {
        self.interpretation
            .get(name)
            .ok_or_else(|| Error::UnknownBox { name: name.into() })
    }

    /// The all-identity (trivial intervention) filling.
    pub fn identity_filling(&self) -> LocusFilling {
        let mut fill = BTreeMap::new();
        for l in self.diagram.loci() {
            fill.insert(l.name.clone(), identity(self.theory, std::slice::from_ref(&l.system)));
        }
        LocusFilling(fill)
    }
}

/// Local processes assigned to loci; filling types must match locus types.
#[derive(Clone, Debug, Default)]
pub struct LocusFilling(pub BTreeMap<String, ProcessValue>);

impl LocusFilling {
    pub fn with(mut self, locus: &str, pv: ProcessValue) -> Self {
        self.0.insert(locus.into(), pv);
        self
    }

    pub fn get(&self, locus: &str) -> Option<&ProcessValue> {
        self.0.get(locus)
    }
}
