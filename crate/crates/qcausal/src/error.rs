//! Crate-wide error type. Every failure carries enough context to be
//! reported by the CLI with a stable machine-readable category.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot combine processes from different theories")]
    TheoryMismatch,

    #[error("port type mismatch: {context}")]
    TypeMismatch { context: String },

    #[error("operation requires the {expected} theory")]
    WrongTheory { expected: &'static str },

    #[error("scalar has non-negligible imaginary part {imag:.3e}")]
    NonRealScalar { imag: f64 },

    #[error("syntax error at line {line}, column {col}: {msg}")]
    SyntaxError { line: usize, col: usize, msg: String },

    #[error("unknown system type `{name}`")]
    UnknownSystem { name: String },

    #[error("unknown box `{name}`")]
    UnknownBox { name: String },

    #[error("unknown locus `{name}`")]
    UnknownLocus { name: String },

    #[error("locus `{name}` compared against itself")]
    IdenticalLoci { name: String },

    #[error("port connection error: {context}")]
    PortArityMismatch { context: String },

    #[error("joining the loci introduces a directed cycle: {context}")]
    CycleDetected { context: String },

    #[error("box `{name}` is not causal (deviation {deviation:.3e})")]
    NonCausalBox { name: String, deviation: f64 },

    #[error("invalid data for box `{name}`: {reason}")]
    InvalidBoxData { name: String, reason: String },

    #[error("frame is rank deficient: {context}")]
    RankDeficientFrame { context: String },

    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },

    #[error("observation table is missing a required entry: {context}")]
    MissingTable { context: String },

    #[error("no frame supplied for locus `{locus}`")]
    MissingFrame { locus: String },

    #[error("divisor {value:.3e} below positivity floor while {context}")]
    ZeroDivisor { context: String, value: f64 },

    #[error(
        "interventional channel from `{src}` to `{tgt}` is ill-posed: \
         is_descendant({src} -> {tgt}) = {forward}, is_descendant({tgt} -> {src}) = {backward}; \
         the target must not reach the source"
    )]
    DescendancyViolation {
        src: String,
        tgt: String,
        forward: bool,
        backward: bool,
    },

    #[error("lambda must lie in (0, 1], got {value}")]
    BadLambda { value: f64 },

    #[error("invalid measurement plan: {context}")]
    BadPlan { context: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable category token used in CLI diagnostics and exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::TheoryMismatch => "TheoryMismatch",
            Error::TypeMismatch { .. } => "TypeMismatch",
            Error::WrongTheory { .. } => "WrongTheory",
            Error::NonRealScalar { .. } => "NonRealScalar",
            Error::SyntaxError { .. } => "SyntaxError",
            Error::UnknownSystem { .. } => "UnknownSystem",
            Error::UnknownBox { .. } => "UnknownBox",
            Error::UnknownLocus { .. } => "UnknownLocus",
            Error::IdenticalLoci { .. } => "IdenticalLoci",
            Error::PortArityMismatch { .. } => "PortArityMismatch",
            Error::CycleDetected { .. } => "CycleDetected",
            Error::NonCausalBox { .. } => "NonCausalBox",
            Error::InvalidBoxData { .. } => "InvalidBoxData",
            Error::RankDeficientFrame { .. } => "RankDeficientFrame",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::MissingTable { .. } => "MissingTable",
            Error::MissingFrame { .. } => "MissingFrame",
            Error::ZeroDivisor { .. } => "ZeroDivisor",
            Error::DescendancyViolation { .. } => "DescendancyViolation",
            Error::BadLambda { .. } => "BadLambda",
            Error::BadPlan { .. } => "BadPlan",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
