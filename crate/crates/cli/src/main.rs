use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use layerlex::basis_file::parse_basis;
use layerlex::bits::Bits;
use layerlex::bitspace::Mask;
use layerlex::boolalg::ZhegalkinPoly;
use layerlex::config::RunConfig;
use layerlex::io::{ConditioningClass, RegionMap};
use layerlex::oracle;
use layerlex::packer::{KeyKind, PackProblem};
use layerlex::profile::{Gender, OptionProfile};
use layerlex::sim::{parse_controls, parse_frames, run};
use layerlex::classes::ClassId;
use layerlex::Error;

const ENV_PREFIX: &str = "LAYERLEX_";

#[derive(Parser)]
#[command(name = "layerlex", version, about = "Layered bit-stack recognizer and class memory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a signal file through the engine and write a JSONL trace.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        control: Option<PathBuf>,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Extra key=value settings applied after the config file.
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// List the option profiles with the config lines selecting them.
    EnumerateProfiles {
        /// Also vary gender (32 lines).
        #[arg(long)]
        gender: bool,
    },
    /// Brute-force reference outputs.
    Oracle {
        #[command(subcommand)]
        kind: OracleKind,
    },
}

#[derive(Subcommand)]
enum OracleKind {
    /// Greedy placements of one mask on a layer.
    MaskScan {
        #[arg(long)]
        layer: String,
        #[arg(long)]
        mask: String,
    },
    /// Truth table of a polynomial.
    TruthTable {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        vars: usize,
    },
    /// All reader sets that pack the given binary forms.
    Packing {
        /// Comma-separated forms.
        #[arg(long)]
        reprs: String,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Run a conditioning class from a basis file as a tabulated automaton.
    Dfa {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        class: String,
        /// Comma-separated input frames.
        #[arg(long)]
        frames: String,
        #[arg(long, default_value_t = 0)]
        horizon: usize,
        #[arg(long, default_value = "external")]
        direction: String,
    },
    /// Windowed hormone totals for `tick:applied:dropped` events.
    Hormones {
        #[arg(long)]
        events: String,
        #[arg(long, default_value_t = 32)]
        window: u64,
    },
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn config_from(path: Option<&Path>, set: &[String], seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        cfg.apply_text(&read(p)?)?;
        if let Some(b) = &cfg.basis {
            if b.is_relative() {
                cfg.basis = Some(p.parent().unwrap_or(Path::new(".")).join(b));
            }
        }
    }
    cfg.apply_env(ENV_PREFIX, |k| std::env::var(k).ok())?;
    for s in set {
        cfg.apply_text(s)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bits_list(s: &str) -> anyhow::Result<Vec<Bits>> {
    s.split(',').filter(|x| !x.is_empty()).map(|x| x.trim().parse::<Bits>().map_err(anyhow::Error::from)).collect()
}

fn simulate(
    config: Option<PathBuf>,
    input: PathBuf,
    control: Option<PathBuf>,
    trace: PathBuf,
    seed: Option<u64>,
    set: Vec<String>,
) -> anyhow::Result<()> {
    let cfg = config_from(config.as_deref(), &set, seed)?;
    let basis_path = cfg.basis.clone().ok_or_else(|| Error::Config("no basis file configured".into()))?;
    let basis = read(&basis_path)?;
    let frames = parse_frames(&read(&input)?, cfg.length).with_context(|| format!("in {}", input.display()))?;
    let controls = match &control {
        Some(p) => parse_controls(&read(p)?).with_context(|| format!("in {}", p.display()))?,
        None => BTreeMap::new(),
    };
    let file = fs::File::create(&trace).with_context(|| format!("creating {}", trace.display()))?;
    let mut out = BufWriter::new(file);
    let summary = run(cfg, &basis, &frames, &controls, &mut out)?;
    out.flush()?;
    eprintln!(
        "{} ticks, {} responses, {} dropped, {} patches",
        summary.ticks, summary.responses, summary.dropped, summary.patches
    );
    Ok(())
}

fn enumerate(gender: bool) {
    let genders: &[Gender] = if gender { &[Gender::Male, Gender::Female] } else { &[Gender::Male] };
    let mut out = std::io::stdout().lock();
    for g in genders {
        for p in OptionProfile::all(*g) {
            let name = if gender { format!("{}-{}", p.name(), p.gender) } else { p.name() };
            // A closed pipe just ends the listing.
            if writeln!(out, "{name} {}", p.config_fragment(gender)).is_err() {
                return;
            }
        }
    }
}

fn run_oracle(kind: OracleKind) -> anyhow::Result<()> {
    match kind {
        OracleKind::MaskScan { layer, mask } => {
            let layer: Bits = layer.parse()?;
            let mask: Mask = mask.parse()?;
            println!("{}", serde_json::to_string(&oracle::mask_scan(&layer, &mask)?)?);
        }
        OracleKind::TruthTable { poly, vars } => {
            let p: ZhegalkinPoly = poly.parse()?;
            println!("{}", oracle::truth_table(&p, vars)?);
        }
        OracleKind::Packing { reprs, set } => {
            let cfg = config_from(None, &set, None)?;
            let forms = bits_list(&reprs)?;
            let problem = PackProblem::new(ClassId(0), forms.clone(), forms)?;
            let found = oracle::exhaustive_packing(
                &problem,
                cfg.profile.spontaneous(),
                KeyKind::from(cfg.profile.context),
                cfg.decision.budget,
            )?;
            for c in found {
                let readers: Vec<String> = c.readers.iter().map(|r| r.to_string()).collect();
                let writers: Vec<String> = c.writers.iter().map(|(p, w)| format!("{p}:{w}")).collect();
                println!("{}", serde_json::json!({ "readers": readers, "writers": writers, "template": c.template }));
            }
        }
        OracleKind::Dfa { basis, class, frames, horizon, direction } => {
            let bf = parse_basis(&read(&basis)?, RunConfig::default().derived_budget)?;
            let idx = bf.basis.index_of(&class).ok_or_else(|| anyhow!("no class named {class}"))?;
            let sc = bf.basis.get(idx).unwrap().clone();
            let map = RegionMap::new(RunConfig::default().length)?;
            let region = match direction.as_str() {
                "internal" => map.internal,
                "external" => map.output,
                other => return Err(Error::Config(format!("unknown direction {other}")).into()),
            };
            let width = sc.span().checked_sub(region.len()).ok_or_else(|| anyhow!("mask shorter than its region"))?;
            let cc = ConditioningClass::new(ClassId(idx as u32), sc, width, region)?;
            let out = oracle::dfa_simulate(&cc, &bits_list(&frames)?, horizon)?;
            println!("{}", serde_json::to_string(&out)?);
        }
        OracleKind::Hormones { events, window } => {
            let parsed = events
                .split(',')
                .filter(|e| !e.is_empty())
                .map(|e| {
                    let v: Vec<&str> = e.split(':').collect();
                    match v.as_slice() {
                        [t, a, d] => Ok((t.parse()?, a.parse()?, d.parse()?)),
                        _ => Err(anyhow!("event `{e}` is not tick:applied:dropped")),
                    }
                })
                .collect::<anyhow::Result<Vec<(u64, usize, usize)>>>()?;
            for (h, s) in oracle::hormone_replay(&parsed, window, 1.0, 1.0)? {
                println!("{h} {s}");
            }
        }
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate { config, input, control, trace, seed, set } => simulate(config, input, control, trace, seed, set),
        Command::EnumerateProfiles { gender } => {
            enumerate(gender);
            Ok(())
        }
        Command::Oracle { kind } => run_oracle(kind),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
