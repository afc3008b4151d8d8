//! Seeded generation of random positive models of the two identifiable
//! shapes. Every box is a convex mixture of a generic causal process with a
//! discard-then-uniform channel at weight 0.1, which forces full support and
//! hence positivity of the whole model.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diagram::Model;
use crate::error::Result;
use crate::identify::{FRONT_DOOR_WIRES, SINGLE_INTERVENTION_WIRES};
use crate::parse::{parse_model, write_model_toml, BoxPayload, BoxSpec, ModelSpec};
use crate::theory::{ProcessValue, SystemType, TheoryTag};

/// Mixing weight toward the discard-then-uniform channel.
pub const POSITIVITY_MIX: f64 = 0.1;

/// The two shipped identifiable patterns.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    FrontDoor,
    SingleIntervention,
}

impl ShapeKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "front-door" => Some(ShapeKind::FrontDoor),
            "single-intervention" => Some(ShapeKind::SingleIntervention),
            _ => None,
        }
    }
}

fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<Complex64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Kraus operators of a Haar-ish random trace-preserving channel obtained
/// from a random Stinespring isometry with environment dimension
/// `d_in * d_out`.
pub fn random_kraus_channel(d_in: usize, d_out: usize, rng: &mut impl Rng) -> Vec<Array2<Complex64>> {
    let d_env = d_in * d_out;
    let g = crate::linalg::to_na(&ginibre(d_out * d_env, d_in, rng));
    let q = g.qr().q();
    (0..d_env)
        .map(|e| Array2::from_shape_fn((d_out, d_in), |(o, i)| q[(o * d_env + e, i)]))
        .collect()
}

/// Mixes `kraus` with the discard-then-uniform channel at weight `mix`.
pub fn mixed_kraus(
    kraus: &[Array2<Complex64>],
    d_in: usize,
    d_out: usize,
    mix: f64,
) -> Vec<Array2<Complex64>> {
    let a = Complex64::new((1.0 - mix).sqrt(), 0.0);
    let b = (mix / d_out as f64).sqrt();
    let mut out: Vec<Array2<Complex64>> = kraus.iter().map(|k| k.mapv(|v| v * a)).collect();
    for i in 0..d_out {
        for j in 0..d_in {
            let mut m = Array2::zeros((d_out, d_in));
            m[[i, j]] = Complex64::new(b, 0.0);
            out.push(m);
        }
    }
    out
}

/// A random column-stochastic matrix with exponential column weights.
pub fn random_stochastic(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let mut m = Array2::zeros((rows, cols));
    for c in 0..cols {
        let mut total = 0.0;
        for r in 0..rows {
            let u: f64 = rng.gen_range(1e-12..1.0);
            let w = -u.ln();
            m[[r, c]] = w;
            total += w;
        }
        for r in 0..rows {
            m[[r, c]] /= total;
        }
    }
    m
}

fn mixed_stochastic(m: &Array2<f64>, mix: f64) -> Array2<f64> {
    let rows = m.nrows();
    m.mapv(|v| (1.0 - mix) * v) + Array2::from_elem(m.dim(), mix / rows as f64)
}

/// A generic causal process for tests and probe fillings (no positivity
/// mixing applied).
pub fn random_causal_process(
    theory: TheoryTag,
    ins: &[SystemType],
    outs: &[SystemType],
    rng: &mut impl Rng,
) -> ProcessValue {
    let d_in: usize = ins.iter().map(SystemType::dim).product();
    let d_out: usize = outs.iter().map(SystemType::dim).product();
    match theory {
        TheoryTag::Classical => {
            ProcessValue::classical(ins.to_vec(), outs.to_vec(), random_stochastic(d_out, d_in, rng))
                .expect("stochastic matrices are valid")
        }
        TheoryTag::Quantum => {
            let ks = random_kraus_channel(d_in, d_out, rng);
            ProcessValue::from_kraus(ins.to_vec(), outs.to_vec(), &ks)
                .expect("Stinespring Kraus families are valid")
        }
    }
}

/// A model together with the exact file contents it was parsed from.
pub struct GeneratedModel {
    pub model: Model,
    pub doc: String,
}

fn random_box_payload(
    theory: TheoryTag,
    d_in: usize,
    d_out: usize,
    rng: &mut impl Rng,
) -> BoxPayload {
    match theory {
        TheoryTag::Classical => {
            BoxPayload::Matrix(mixed_stochastic(&random_stochastic(d_out, d_in, rng), POSITIVITY_MIX))
        }
        TheoryTag::Quantum => BoxPayload::Kraus(mixed_kraus(
            &random_kraus_channel(d_in, d_out, rng),
            d_in,
            d_out,
            POSITIVITY_MIX,
        )),
    }
}

/// A seeded random positive model of the requested shape with every locus
/// system of dimension `dim`; the document round-trips bit-exactly through
/// the model-file parser.
pub fn random_positive_model(
    shape: ShapeKind,
    theory: TheoryTag,
    dim: usize,
    seed: u64,
) -> Result<GeneratedModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dim;
    let spec = match shape {
        ShapeKind::FrontDoor => ModelSpec {
            theory,
            systems: ["U0", "U1", "SX", "SZ", "SY"].iter().map(|s| (s.to_string(), d)).collect(),
            boxes: vec![
                BoxSpec {
                    name: "u".into(),
                    inputs: vec![],
                    outputs: vec!["U0".into(), "U1".into()],
                    payload: random_box_payload(theory, 1, d * d, &mut rng),
                },
                BoxSpec {
                    name: "x".into(),
                    inputs: vec!["U1".into()],
                    outputs: vec!["SX".into()],
                    payload: random_box_payload(theory, d, d, &mut rng),
                },
                BoxSpec {
                    name: "z".into(),
                    inputs: vec!["SX".into()],
                    outputs: vec!["SZ".into()],
                    payload: random_box_payload(theory, d, d, &mut rng),
                },
                BoxSpec {
                    name: "y".into(),
                    inputs: vec!["U0".into(), "SZ".into()],
                    outputs: vec!["SY".into()],
                    payload: random_box_payload(theory, d * d, d, &mut rng),
                },
            ],
            loci: vec![
                ("X".into(), "SX".into()),
                ("Z".into(), "SZ".into()),
                ("Y".into(), "SY".into()),
            ],
            wires: FRONT_DOOR_WIRES.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        },
        ShapeKind::SingleIntervention => ModelSpec {
            theory,
            systems: ["L", "SX", "SA", "SB", "SC"].iter().map(|s| (s.to_string(), d)).collect(),
            boxes: vec![
                BoxSpec {
                    name: "c1".into(),
                    inputs: vec![],
                    outputs: vec!["L".into(), "SX".into()],
                    payload: random_box_payload(theory, 1, d * d, &mut rng),
                },
                BoxSpec {
                    name: "c2".into(),
                    inputs: vec!["SX".into()],
                    outputs: vec!["SA".into()],
                    payload: random_box_payload(theory, d, d, &mut rng),
                },
                BoxSpec {
                    name: "g".into(),
                    inputs: vec!["SA".into()],
                    outputs: vec!["SB".into()],
                    payload: random_box_payload(theory, d, d, &mut rng),
                },
                BoxSpec {
                    name: "c3".into(),
                    inputs: vec!["L".into(), "SB".into()],
                    outputs: vec!["SC".into()],
                    payload: random_box_payload(theory, d * d, d, &mut rng),
                },
            ],
            loci: vec![
                ("X".into(), "SX".into()),
                ("A".into(), "SA".into()),
                ("B".into(), "SB".into()),
                ("C".into(), "SC".into()),
            ],
            wires: SINGLE_INTERVENTION_WIRES
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        },
    };
    let doc = write_model_toml(&spec);
    let model = parse_model(&doc)?;
    Ok(GeneratedModel { model, doc })
}

