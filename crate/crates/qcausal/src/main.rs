//! Command-line front end: validate models, generate observation tables,
//! run identification, compute ground-truth channels, compare channels and
//! demonstrate the non-identifiability counterexample.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qcausal::error::{Error, Result};
use qcausal::identify::{
    build_counterexample_pair, channel_distance, ground_truth_channel, identify_front_door,
    identify_single_intervention, FrontDoorShape, Identified, SingleInterventionShape,
};
use qcausal::instruments::{
    frames_from_plan, is_positive_model, observe, standard_frames, MeasurementPlan,
    ObservationTable,
};
use qcausal::parse::{
    channel_from_toml, channel_to_toml, parse_model, parse_plan, table_from_toml, table_to_toml,
};
use qcausal::random::{random_positive_model, ShapeKind};
use qcausal::theory::TheoryTag;
use qcausal::Model;

#[derive(Parser)]
#[command(
    name = "qcausal",
    about = "Classical and quantum interventional causal scenarios as circuits with holes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ShapeArg {
    #[value(name = "front-door")]
    FrontDoor,
    #[value(name = "single-intervention")]
    SingleIntervention,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TheoryArg {
    Classical,
    Quantum,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a model file, check every invariant and report positivity.
    Validate { model: PathBuf },

    /// Measure every basis-choice combination of a plan and write the table.
    Observe {
        model: PathBuf,
        /// Plan file, or `auto` for trivial plus all standard bases per locus.
        #[arg(long, default_value = "auto")]
        plan: String,
        #[arg(long)]
        out: PathBuf,
    },

    /// Identify the interventional channel of a recognized shape from
    /// observational statistics. The input may be a model file (tables are
    /// generated internally, then only the tables are consumed) or a table
    /// file written by `observe`.
    Identify {
        input: PathBuf,
        #[arg(long, value_enum)]
        shape: ShapeArg,
        /// Locus role assignment for table inputs, e.g. `X=X,Z=Z,Y=Y`
        /// (front-door) or `X=X,A=A,B=B,C=C`; defaults to the table's locus
        /// order.
        #[arg(long)]
        roles: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },

    /// Compute the model's true interventional channel by contraction.
    GroundTruth {
        model: PathBuf,
        #[arg(long)]
        src: String,
        #[arg(long)]
        tgt: String,
        #[arg(long)]
        out: PathBuf,
    },

    /// Print the max-entry distance between two channel files.
    Compare { a: PathBuf, b: PathBuf },

    /// Build the counterexample pair, print the observational residual over
    /// the full plan family and the interventional gap.
    DemoCounterexample {
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Also write the two model files into this directory.
        #[arg(long)]
        emit_models: Option<PathBuf>,
    },

    /// Generate a seeded random positive model of a recognized shape.
    #[command(hide = true)]
    GenRandomModel {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long, value_enum)]
        theory: TheoryArg,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn load_model(path: &PathBuf) -> Result<Model> {
    parse_model(&read(path)?)
}

fn run_validate(path: &PathBuf) -> Result<()> {
    let m = load_model(path)?;
    println!("theory: {}", m.theory());
    println!("systems:");
    for (name, sys) in &m.diagram().signature().systems {
        println!("  {name}: dimension {}", sys.dim());
    }
    println!("boxes:");
    for name in m.diagram().box_names() {
        let pv = m.interpretation(name)?;
        println!(
            "  {name}: {} input port(s), {} output port(s), causality deviation {:.3e}",
            pv.in_type().len(),
            pv.out_type().len(),
            pv.causality_deviation()
        );
    }
    println!("loci:");
    for l in m.diagram().loci() {
        println!("  {}: {}", l.name, l.system);
    }
    println!("closure: acyclic after joining every locus");
    let frames = standard_frames(&m)?;
    let report = is_positive_model(&m, &frames)?;
    println!(
        "positivity: {} (minimal frame pairing {:.6e})",
        if report.positive { "positive" } else { "NOT positive" },
        report.min_value
    );
    if !report.positive {
        println!(
            "  witness states: {:?}\n  witness effects: {:?}",
            report.witness_states, report.witness_effects
        );
    }
    Ok(())
}

fn run_observe(model: &PathBuf, plan: &str, out: &PathBuf) -> Result<()> {
    let m = load_model(model)?;
    let plan = if plan == "auto" {
        MeasurementPlan::auto(&m)
    } else {
        parse_plan(&read(&PathBuf::from(plan))?, &m)?
    };
    let frames = standard_frames(&m)?;
    let report = is_positive_model(&m, &frames)?;
    if !report.positive {
        eprintln!(
            "warning: model is not positive (minimal pairing {:.3e}); downstream \
             identification may divide by zero",
            report.min_value
        );
    }
    let table = observe(&m, &plan)?;
    fs::write(out, table_to_toml(&table))?;
    println!("wrote {} rows to {}", table.len(), out.display());
    Ok(())
}

fn parse_roles(spec: &str) -> Result<std::collections::BTreeMap<String, String>> {
    let mut map = std::collections::BTreeMap::new();
    for part in spec.split(',') {
        let (role, locus) = part.split_once('=').ok_or_else(|| Error::BadPlan {
            context: format!("role assignment `{part}` must be ROLE=locus"),
        })?;
        map.insert(role.trim().to_uppercase(), locus.trim().to_string());
    }
    Ok(map)
}

fn role_or_default(
    roles: &std::collections::BTreeMap<String, String>,
    key: &str,
    table: &ObservationTable,
    index: usize,
) -> Result<String> {
    if let Some(name) = roles.get(key) {
        return Ok(name.clone());
    }
    table
        .plan
        .loci
        .get(index)
        .map(|(n, _)| n.clone())
        .ok_or_else(|| Error::BadPlan { context: format!("no locus for role {key}") })
}

fn run_identify(
    input: &PathBuf,
    shape: ShapeArg,
    roles: &Option<String>,
    out: &PathBuf,
) -> Result<()> {
    let text = read(input)?;
    // model files declare boxes; table files declare rows
    let is_model = text.contains("[[boxes]]");
    let (table, structural): (ObservationTable, Option<Model>) = if is_model {
        let m = parse_model(&text)?;
        let plan = MeasurementPlan::auto(&m);
        (observe(&m, &plan)?, Some(m))
    } else {
        (table_from_toml(&text)?, None)
    };
    // from here on, identification sees only the table
    let frames = frames_from_plan(table.theory, &table.plan)?;
    let roles = match roles {
        Some(spec) => parse_roles(spec)?,
        None => Default::default(),
    };
    let identified: Identified = match shape {
        ShapeArg::FrontDoor => {
            let shape = match &structural {
                Some(m) => FrontDoorShape::match_diagram(m.diagram())?,
                None => FrontDoorShape::from_locus_roles(
                    &role_or_default(&roles, "X", &table, 0)?,
                    &role_or_default(&roles, "Z", &table, 1)?,
                    &role_or_default(&roles, "Y", &table, 2)?,
                ),
            };
            identify_front_door(&table, &shape, &frames)?
        }
        ShapeArg::SingleIntervention => {
            let shape = match &structural {
                Some(m) => SingleInterventionShape::match_diagram(m.diagram())?,
                None => SingleInterventionShape::from_locus_roles(
                    &role_or_default(&roles, "X", &table, 0)?,
                    &role_or_default(&roles, "A", &table, 1)?,
                    &role_or_default(&roles, "B", &table, 2)?,
                    &role_or_default(&roles, "C", &table, 3)?,
                ),
            };
            identify_single_intervention(&table, &shape, &frames)?
        }
    };
    fs::write(out, channel_to_toml(&identified.channel, Some(&identified.diagnostics)))?;
    println!(
        "identified channel {} -> {} (min divisor {:.6e}) written to {}",
        identified.channel.source,
        identified.channel.target,
        identified.diagnostics.min_divisor,
        out.display()
    );
    Ok(())
}

fn run_ground_truth(model: &PathBuf, src: &str, tgt: &str, out: &PathBuf) -> Result<()> {
    let m = load_model(model)?;
    let channel = ground_truth_channel(&m, src, tgt)?;
    fs::write(out, channel_to_toml(&channel, None))?;
    println!("ground-truth channel {src} -> {tgt} written to {}", out.display());
    Ok(())
}

fn run_compare(a: &PathBuf, b: &PathBuf) -> Result<()> {
    let ca = channel_from_toml(&read(a)?)?;
    let cb = channel_from_toml(&read(b)?)?;
    let d = channel_distance(&ca, &cb)?;
    println!("{d:.17e}");
    Ok(())
}

fn run_demo(lambda: f64, emit_models: &Option<PathBuf>) -> Result<()> {
    let (m1, m2) = build_counterexample_pair(lambda)?;
    if let Some(dir) = emit_models {
        fs::create_dir_all(dir)?;
        let (doc1, doc2) = qcausal::identify::counterexample_pair_docs(lambda);
        fs::write(dir.join("counterexample_1.toml"), doc1)?;
        fs::write(dir.join("counterexample_2.toml"), doc2)?;
        println!("model files written to {}", dir.display());
    }
    let plan = MeasurementPlan::auto(&m1);
    let t1 = observe(&m1, &plan)?;
    let t2 = observe(&m2, &plan)?;
    let mut residual = 0.0f64;
    let mut rows = 0usize;
    for ((k1, p1), (k2, p2)) in t1.entries().zip(t2.entries()) {
        debug_assert_eq!(k1, k2);
        residual = residual.max((p1 - p2).abs());
        rows += 1;
    }
    let g1 = ground_truth_channel(&m1, "X", "Y")?;
    let g2 = ground_truth_channel(&m2, "X", "Y")?;
    let gap = channel_distance(&g1, &g2)?;
    println!("lambda: {lambda}");
    println!("observational residual: {residual:.3e} (max over {rows} plan/outcome entries)");
    println!("interventional gap:     {gap:.3e} (max channel-entry difference)");
    if residual <= 1e-12 && gap >= 0.2 {
        println!(
            "the two models are observationally indistinguishable yet interventionally distinct"
        );
    }
    Ok(())
}

fn run_gen(shape: ShapeArg, theory: TheoryArg, dim: usize, seed: u64, out: &PathBuf) -> Result<()> {
    let shape = match shape {
        ShapeArg::FrontDoor => ShapeKind::FrontDoor,
        ShapeArg::SingleIntervention => ShapeKind::SingleIntervention,
    };
    let theory = match theory {
        TheoryArg::Classical => TheoryTag::Classical,
        TheoryArg::Quantum => TheoryTag::Quantum,
    };
    let generated = random_positive_model(shape, theory, dim, seed)?;
    fs::write(out, &generated.doc)?;
    println!("wrote seeded random positive model (seed {seed}) to {}", out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { model } => run_validate(model),
        Command::Observe { model, plan, out } => run_observe(model, plan, out),
        Command::Identify { input, shape, roles, out } => run_identify(input, *shape, roles, out),
        Command::GroundTruth { model, src, tgt, out } => run_ground_truth(model, src, tgt, out),
        Command::Compare { a, b } => run_compare(a, b),
        Command::DemoCounterexample { lambda, emit_models } => run_demo(*lambda, emit_models),
        Command::GenRandomModel { shape, theory, dim, seed, out } => {
            run_gen(*shape, *theory, *dim, *seed, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::FAILURE
        }
    }
}
