//! Classical and quantum interventional causal scenarios as circuits with
//! holes.
//!
//! The crate models causal scenarios as typed string-diagram circuits whose
//! wires carry finite classical or quantum systems and whose intervention
//! loci are holes that local processes can be plugged into. On top of the
//! diagram semantics it provides the restricted observational regime
//! (projective-measurement statistics at the loci), informationally complete
//! frames with tomographic reconstruction, ground-truth interventional
//! channels computed by tensor contraction, identification algorithms for
//! the front-door and mediated single-intervention scenarios that consume
//! observational tables only, and a pair of models witnessing that
//! identification is impossible in general.

pub mod error;
mod linalg;
pub mod contract;
pub mod identify;
pub mod instruments;
pub mod parse;
pub mod random;
pub mod diagram;
pub mod theory;

/// Default numeric tolerances. Double precision at the shipped dimensions
/// (2-3 per wire) keeps exact quantities well inside these bounds.
pub mod tol {
    /// Equality and causality checks (absolute, max norm).
    pub const EQ: f64 = 1e-9;
    /// Eigenvalue floor for the complete-positivity test.
    pub const CP_EIG: f64 = 1e-9;
    /// Largest imaginary part tolerated when extracting a real scalar.
    pub const SCALAR_IMAG: f64 = 1e-9;
    /// Relative singular-value cutoff for frame pseudoinverses.
    pub const FRAME_RANK_REL: f64 = 1e-10;
    /// Smallest scalar the identification algorithms will divide by.
    pub const DIVISOR_FLOOR: f64 = 1e-12;
    /// Margin above zero required by the positivity certificate.
    pub const POSITIVITY_MARGIN: f64 = 1e-12;
}

pub use contract::{as_comb, evaluate, plug_comb, Boundary, BoundaryEffect};
pub use diagram::{
    BoxDecl, Consumer, Diagram, DiagramBuilder, Locus, LocusFilling, Model, Producer, Signature,
    Wire,
};
pub use error::{Error, Result};
pub use identify::{
    build_counterexample_pair, channel_distance, confounded_pair_diagram,
    counterexample_pair_docs, front_door_diagram, ground_truth_channel, identify_front_door,
    identify_single_intervention, single_intervention_diagram, FrontDoorShape, Identified,
    IdentifyDiagnostics, InterventionalChannel, SingleInterventionShape,
};
pub use instruments::{
    frames_from_plan, is_positive_model, matrix_elements, observe, reconstruct, standard_bases,
    standard_frame, standard_frames, Basis, Frame, FrameLabel, MeasurementPlan, ObservationTable,
    PlanChoice, PositivityReport, ProjectiveInstrument, TRIVIAL_CHOICE,
};
pub use random::{random_causal_process, random_positive_model, GeneratedModel, ShapeKind};
pub use theory::{
    cap, cup, discard, identity, rep_dim_of, uniform_state, ProcessValue, SystemType, TheoryTag,
};
