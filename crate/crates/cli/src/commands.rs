//! Subcommands and their artifact writers.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use qsrt_core::adiabatic::{fit_scaling, scan_gap, stepwise_gap_scan, AdiabaticPath, GapScan};
use qsrt_core::engine::{
    leakage_bound, leakage_bound_first_order, run_multistep, seeded_rng, success_bound, transcript,
    write_transcript, Chain, MultistepConfig, MultistepOutcome, SweepOrder,
};
use qsrt_core::models::{
    build_factoring, default_factoring_qubits, factors_from_order, order_from_manifold, Level, MarkedSetFamily,
    ProblemInstance, ProblemKind,
};
use qsrt_core::spectral::DEFAULT_DENSE_CAP;
use serde_json::{json, Value};

use crate::config::{load_instance, CommandName, EngineSettings, ExperimentConfig, ScanCase};
use crate::format::{sig6, sig6_list};
use crate::{invalid, reproduce, Artifacts, CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "qsrt", version, about = "Resonant-transition ground-state preparation experiments")]
pub struct Cli {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Artifact directory (default: current directory).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Artifact name suffix used instead of the Unix timestamp.
    #[arg(long, global = true)]
    pub tag: Option<String>,
    /// Seed for stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Minimum spectral gap along an interpolation path.
    GapScan(GapScanArgs),
    /// Multistep run on a problem instance document.
    QsrtRun(RunArgs),
    /// Multistep run on an unstructured search instance.
    SearchDemo(SearchArgs),
    /// Multistep run on the minimum-finding table.
    MinfindDemo(MinfindArgs),
    /// Order finding on `a^k mod Z` and the factors it yields.
    FactorDemo(FactorArgs),
    /// Leakage and success bounds for one step.
    ErrorBound(BoundArgs),
    /// Log-log power-law fit of the first two CSV columns.
    ScalingFit(FitArgs),
    /// Recomputes the reference gap, bound and scaling values and tabulates them.
    ReproducePaper(ReproduceArgs),
}

impl Command {
    pub fn name(&self) -> CommandName {
        match self {
            Command::GapScan(_) => CommandName::GapScan,
            Command::QsrtRun(_) => CommandName::QsrtRun,
            Command::SearchDemo(_) => CommandName::SearchDemo,
            Command::MinfindDemo(_) => CommandName::MinfindDemo,
            Command::FactorDemo(_) => CommandName::FactorDemo,
            Command::ErrorBound(_) => CommandName::ErrorBound,
            Command::ScalingFit(_) => CommandName::ScalingFit,
            Command::ReproducePaper(_) => CommandName::ReproducePaper,
        }
    }

    fn defaults(name: CommandName) -> Self {
        match name {
            CommandName::GapScan => Command::GapScan(Default::default()),
            CommandName::QsrtRun => Command::QsrtRun(Default::default()),
            CommandName::SearchDemo => Command::SearchDemo(Default::default()),
            CommandName::MinfindDemo => Command::MinfindDemo(Default::default()),
            CommandName::FactorDemo => Command::FactorDemo(Default::default()),
            CommandName::ErrorBound => Command::ErrorBound(Default::default()),
            CommandName::ScalingFit => Command::ScalingFit(Default::default()),
            CommandName::ReproducePaper => Command::ReproducePaper(Default::default()),
        }
    }
}

fn parse_sweep(s: &str) -> Result<SweepOrder, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| format!("unknown sweep order {s:?}"))
}

#[derive(Debug, Clone, Default, Args)]
pub struct EngineArgs {
    /// Probe coupling c.
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Assumed overlap d̂0 between consecutive ground states.
    #[arg(long)]
    pub overlap_estimate: Option<f64>,
    /// Frequencies per step window.
    #[arg(long)]
    pub window_points: Option<usize>,
    #[arg(long)]
    pub max_iters_per_frequency: Option<usize>,
    /// Readout budget per step.
    #[arg(long)]
    pub max_step_iters: Option<u64>,
    /// Refine each step energy to this accuracy.
    #[arg(long)]
    pub target_accuracy: Option<f64>,
    /// `ascending` or `center-out`.
    #[arg(long, value_parser = parse_sweep)]
    pub sweep: Option<SweepOrder>,
    #[arg(long)]
    pub dense_cap: Option<usize>,
    /// Also write the eigendecomposition of every chain member.
    #[arg(long)]
    pub dump_eigen: bool,
}

impl EngineArgs {
    fn merged(&self, file: &EngineSettings) -> EngineSettings {
        EngineSettings {
            coupling: self.coupling.or(file.coupling),
            overlap_estimate: self.overlap_estimate.or(file.overlap_estimate),
            window_points: self.window_points.or(file.window_points),
            max_iters_per_frequency: self.max_iters_per_frequency.or(file.max_iters_per_frequency),
            max_step_iters: self.max_step_iters.or(file.max_step_iters),
            target_accuracy: self.target_accuracy.or(file.target_accuracy),
            sweep: self.sweep.or(file.sweep),
            dense_cap: self.dense_cap.or(file.dense_cap),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GapScanArgs {
    #[arg(long, value_enum)]
    pub case: Option<ScanCase>,
    /// Qubit count for cases a, b and c (default 10).
    #[arg(long)]
    pub n: Option<u32>,
    /// Comma-separated fractions for the stepwise case.
    #[arg(long, value_delimiter = ',')]
    pub f: Option<Vec<f64>>,
    /// Level-size ratio for the stepwise case (default 0.1).
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Uniform grid size before refinement (default 2001, stepwise 20001).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Problem instance document; implies `--case instance`.
    #[arg(long)]
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Problem instance document (else the config `problem`).
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SearchArgs {
    /// Qubit count (default 10).
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of marked items (default 1).
    #[arg(long)]
    pub marked: Option<u64>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MinfindArgs {
    /// Qubit count (default 6).
    #[arg(long)]
    pub n: Option<u32>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FactorArgs {
    /// Modulus Z.
    #[arg(long)]
    pub z: Option<u64>,
    /// Base a, coprime to Z.
    #[arg(long)]
    pub a: Option<u64>,
    /// Register qubits (default: smallest n with 2^n ≥ 4Z).
    #[arg(long)]
    pub n: Option<u32>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub gap_prev: Option<f64>,
    #[arg(long)]
    pub gap_curr: Option<f64>,
    /// Ground-state overlap d0.
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub coupling: Option<f64>,
    /// Largest leakage amplitude a_max (default: from this step's bound).
    #[arg(long)]
    pub a_max: Option<f64>,
    /// Number of steps m for the success bound.
    #[arg(long)]
    pub steps: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// CSV whose first two numeric columns are x and y.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ReproduceArgs {
    /// Largest dense matrix built for cross-checks (default 8192).
    #[arg(long)]
    pub dense_cap: Option<usize>,
}

/// Text for standard output plus the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Context {
    config: ExperimentConfig,
    output: PathBuf,
    tag: String,
    seed: Option<u64>,
}

impl Context {
    fn artifacts(&self, name: CommandName) -> CliResult<Artifacts> {
        Artifacts::new(&self.output, name.as_str(), &self.tag)
    }

    fn seed(&self, name: CommandName) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::ConfigInvalid(format!("{} is stochastic and needs a seed", name.as_str())))
    }
}

pub fn run(cli: Cli) -> CliResult<Report> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let command = match (cli.command, config.command) {
        (Some(cmd), Some(named)) if cmd.name() != named => {
            return Err(CliError::ConfigInvalid(format!(
                "config names {} but {} was invoked",
                named.as_str(),
                cmd.name().as_str()
            )))
        }
        (Some(cmd), _) => cmd,
        (None, Some(named)) => Command::defaults(named),
        (None, None) => return Err(CliError::ConfigInvalid("no command given".into())),
    };
    let tag = match cli.tag.or_else(|| config.tag.clone()) {
        Some(tag) => tag,
        None => SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs().to_string())
            .unwrap_or_else(|_| "0".into()),
    };
    let ctx = Context {
        output: cli.output.or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from(".")),
        seed: cli.seed.or(config.seed),
        tag,
        config,
    };
    if command.name().is_stochastic() {
        ctx.seed(command.name())?;
    }
    match command {
        Command::GapScan(args) => gap_scan(&ctx, &args),
        Command::QsrtRun(args) => {
            let problem = match &args.instance {
                Some(path) => load_instance(path)?,
                None => {
                    let p = ctx.config.problem.clone().ok_or_else(|| {
                        CliError::ConfigInvalid("qsrt-run needs --instance or a config problem".into())
                    })?;
                    p.validate().map_err(invalid)?;
                    p
                }
            };
            run_problem(&ctx, CommandName::QsrtRun, &problem, &args.engine)
        }
        Command::SearchDemo(args) => {
            let demo = &ctx.config.demo;
            let n = args.n.or(demo.n).unwrap_or(10);
            let marked = args.marked.or(demo.marked).unwrap_or(1);
            let problem = ProblemInstance::search(n, marked).map_err(invalid)?;
            run_problem(&ctx, CommandName::SearchDemo, &problem, &args.engine)
        }
        Command::MinfindDemo(args) => {
            let n = args.n.or(ctx.config.demo.n).unwrap_or(6);
            let problem = ProblemInstance::minfind(n).map_err(invalid)?;
            run_problem(&ctx, CommandName::MinfindDemo, &problem, &args.engine)
        }
        Command::FactorDemo(args) => factor_demo(&ctx, &args),
        Command::ErrorBound(args) => error_bound(&ctx, &args),
        Command::ScalingFit(args) => scaling_fit(&ctx, &args),
        Command::ReproducePaper(args) => {
            let cap = args
                .dense_cap
                .or(ctx.config.engine.dense_cap)
                .unwrap_or(DEFAULT_DENSE_CAP);
            let table = reproduce::run_suite(cap);
            let artifacts = ctx.artifacts(CommandName::ReproducePaper)?;
            let files = vec![
                artifacts.write(".csv", &reproduce::to_csv(&table))?,
                artifacts.write_json(&reproduce::to_json(&table))?,
            ];
            Ok(Report {
                summary: reproduce::render(&table),
                files,
            })
        }
    }
}

fn gap_scan(ctx: &Context, args: &GapScanArgs) -> CliResult<Report> {
    let file = &ctx.config.scan;
    let instance_path = args.instance.clone();
    let case = match args.case.or(file.case) {
        Some(case) => case,
        None if instance_path.is_some() || ctx.config.problem.is_some() => ScanCase::Instance,
        None => return Err(CliError::ConfigInvalid("gap-scan needs --case or an instance".into())),
    };
    let artifacts = ctx.artifacts(CommandName::GapScan)?;
    if case == ScanCase::Stepwise {
        let fractions = args.f.clone().or_else(|| file.f.clone()).unwrap_or(reproduce::STEPWISE_FRACTIONS.to_vec());
        let ratio = args.ratio.or(file.ratio).unwrap_or(0.1);
        let grid = args.grid_points.or(file.grid_points).unwrap_or(20_001);
        return stepwise(&artifacts, &fractions, ratio, grid);
    }
    let grid = args.grid_points.or(file.grid_points).unwrap_or(2001);
    if grid < 3 {
        return Err(CliError::ConfigInvalid("grid-points must be at least 3".into()));
    }
    let problem = match case {
        ScanCase::Instance => match instance_path {
            Some(path) => load_instance(&path)?,
            None => {
                let p = ctx
                    .config
                    .problem
                    .clone()
                    .ok_or_else(|| CliError::ConfigInvalid("case instance needs --instance".into()))?;
                p.validate().map_err(invalid)?;
                p
            }
        },
        other => {
            let n = args.n.or(file.n).unwrap_or(10);
            match other {
                ScanCase::A => ProblemInstance::search(n, 1),
                ScanCase::B => ProblemInstance::minfind(n),
                _ => ProblemInstance::plateau(n),
            }
            .map_err(invalid)?
        }
    };
    let path = AdiabaticPath::reduced(problem.initial_model()?, problem.problem_model()?)?;
    let scan = scan_gap(&path, grid)?;
    let mut files = vec![artifacts.write(".csv", &scan.to_csv())?];
    let mut summary = json!({
        "case": case.as_str(),
        "n": problem.n,
        "minGap": scan.min_gap,
        "sStar": scan.s_star,
        "gridPoints": grid,
    });
    if case == ScanCase::Instance {
        summary["kind"] = serde_json::to_value(problem.kind).expect("kind serializes");
    }
    files.push(artifacts.write_json(&summary)?);
    Ok(Report {
        summary: scan_line(&scan),
        files,
    })
}

fn scan_line(scan: &GapScan) -> String {
    format!("minGap={} sStar={}", sig6(scan.min_gap), sig6(scan.s_star))
}

fn stepwise(artifacts: &Artifacts, fractions: &[f64], ratio: f64, grid: usize) -> CliResult<Report> {
    if fractions.is_empty() {
        return Err(CliError::ConfigInvalid("stepwise scan needs at least one f".into()));
    }
    if grid < 3 {
        return Err(CliError::ConfigInvalid("grid-points must be at least 3".into()));
    }
    if fractions.len() == 1 {
        let f = fractions[0];
        let scan = stepwise_gap_scan(f, ratio, grid).map_err(invalid)?;
        let files = vec![
            artifacts.write(".csv", &scan.to_csv())?,
            artifacts.write_json(&json!({
                "case": "stepwise",
                "f": f,
                "ratio": ratio,
                "minGap": scan.min_gap,
                "sStar": scan.s_star,
                "gridPoints": grid,
            }))?,
        ];
        return Ok(Report {
            summary: scan_line(&scan),
            files,
        });
    }
    let scans = fractions
        .iter()
        .map(|&f| stepwise_gap_scan(f, ratio, grid).map_err(invalid))
        .collect::<CliResult<Vec<_>>>()?;
    let mut csv = String::from("f,minGap,sStar\n");
    for (f, scan) in fractions.iter().zip(&scans) {
        writeln!(csv, "{f:.6e},{:.6e},{:.6e}", scan.min_gap, scan.s_star).expect("string write");
    }
    let rows: Vec<Value> = fractions
        .iter()
        .zip(&scans)
        .map(|(&f, s)| json!({"case": "stepwise", "f": f, "minGap": s.min_gap, "sStar": s.s_star, "gridPoints": grid}))
        .collect();
    let files = vec![
        artifacts.write(".csv", &csv)?,
        artifacts.write_json(&json!({"ratio": ratio, "scans": rows}))?,
    ];
    let gaps: Vec<f64> = scans.iter().map(|s| s.min_gap).collect();
    let stars: Vec<f64> = scans.iter().map(|s| s.s_star).collect();
    Ok(Report {
        summary: format!("minGap={} sStar={}", sig6_list(&gaps), sig6_list(&stars)),
        files,
    })
}

/// `M_j = {k : h_k < u_{L−j}}` over the sorted distinct values `u`, so the
/// last level is the ground manifold.
pub fn threshold_family(problem: &ProblemInstance) -> CliResult<MarkedSetFamily> {
    let mut levels: Vec<Level> = problem.levels.clone();
    levels.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut merged: Vec<Level> = Vec::new();
    for level in levels {
        match merged.last_mut() {
            Some(last) if last.value == level.value => last.degeneracy += level.degeneracy,
            _ => merged.push(level),
        }
    }
    if merged.len() < 2 {
        return Err(CliError::ConfigInvalid("instance has a single level; nothing to prepare".into()));
    }
    let below: Vec<u64> = merged
        .iter()
        .scan(0, |acc, l| {
            let before = *acc;
            *acc += l.degeneracy;
            Some(before)
        })
        .collect();
    let sizes = (1..merged.len()).rev().map(|i| below[i]).collect();
    MarkedSetFamily::prefix(problem.size, sizes).map_err(invalid)
}

struct Prepared {
    family: MarkedSetFamily,
    overlap: f64,
    /// Fixed default coupling; `None` derives one from the chain gaps.
    coupling: Option<f64>,
}

fn prepare(problem: &ProblemInstance) -> CliResult<Prepared> {
    match problem.kind {
        ProblemKind::Factoring => {
            let (z, a) = match (problem.params.modulus, problem.params.base) {
                (Some(z), Some(a)) => (z, a),
                _ => return Err(CliError::ConfigInvalid("factoring instance needs params Z and a".into())),
            };
            let inst = build_factoring(z, a, problem.n).map_err(invalid)?;
            if inst.family.is_empty() {
                return Err(CliError::ConfigInvalid("every state is already a ground state".into()));
            }
            Ok(Prepared {
                family: inst.family,
                overlap: 0.5f64.sqrt(),
                coupling: None,
            })
        }
        ProblemKind::Search | ProblemKind::Plateau => {
            let family = threshold_family(problem)?;
            let overlap = (family.sizes()[0] as f64 / problem.size as f64).sqrt();
            Ok(Prepared {
                family,
                overlap,
                coupling: Some(1e-2),
            })
        }
        _ => Ok(Prepared {
            family: threshold_family(problem)?,
            overlap: 0.5f64.sqrt(),
            coupling: None,
        }),
    }
}

fn multistep_config(chain: &Chain, engine: &EngineSettings, fixed: Option<f64>) -> CliResult<MultistepConfig> {
    let defaults = MultistepConfig::default();
    let coupling = match engine.coupling.or(fixed) {
        Some(c) => c,
        None => chain.suggested_coupling(0.1)?.min(defaults.coupling),
    };
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(CliError::ConfigInvalid(format!("coupling must be positive, got {coupling}")));
    }
    let window_points = engine.window_points.unwrap_or(defaults.window_points);
    if window_points < 2 {
        return Err(CliError::ConfigInvalid("window-points must be at least 2".into()));
    }
    if engine.target_accuracy.is_some_and(|e| e.is_nan() || e <= 0.0) {
        return Err(CliError::ConfigInvalid("target-accuracy must be positive".into()));
    }
    Ok(MultistepConfig {
        coupling,
        window_points,
        max_iters_per_frequency: engine.max_iters_per_frequency,
        max_step_iters: engine.max_step_iters.unwrap_or(defaults.max_step_iters),
        target_accuracy: engine.target_accuracy,
        sweep: engine.sweep.unwrap_or(defaults.sweep),
        dense_cap: engine.dense_cap.unwrap_or(defaults.dense_cap),
    })
}

struct ChainRun {
    outcome: MultistepOutcome,
    fidelity: f64,
    summary: Value,
    files: Vec<PathBuf>,
}

fn run_problem(ctx: &Context, name: CommandName, problem: &ProblemInstance, args: &EngineArgs) -> CliResult<Report> {
    let prepared = prepare(problem)?;
    let artifacts = ctx.artifacts(name)?;
    let run = run_chain(ctx, name, &artifacts, problem, &prepared, args)?;
    let mut files = run.files;
    files.push(artifacts.write_json(&run.summary)?);
    Ok(Report {
        summary: format!(
            "E0={} iterations={} fidelity={}",
            sig6(*run.outcome.energy_trace.last().expect("nonempty chain")),
            run.outcome.total_iterations,
            sig6(run.fidelity)
        ),
        files,
    })
}

fn run_chain(
    ctx: &Context,
    name: CommandName,
    artifacts: &Artifacts,
    problem: &ProblemInstance,
    prepared: &Prepared,
    args: &EngineArgs,
) -> CliResult<ChainRun> {
    let engine = args.merged(&ctx.config.engine);
    let overlap = engine.overlap_estimate.unwrap_or(prepared.overlap);
    if !(overlap > 0.0 && overlap <= 1.0) {
        return Err(CliError::ConfigInvalid(format!("overlap estimate must lie in (0, 1], got {overlap}")));
    }
    let chain = Chain::from_family(&prepared.family, overlap)?;
    let cfg = multistep_config(&chain, &engine, prepared.coupling)?;
    let seed = ctx.seed(name)?;
    let mut rng = seeded_rng(seed);
    let outcome = run_multistep(&chain, &cfg, &mut rng)?;

    let target = chain.hamiltonians.last().expect("nonempty chain").eigh()?.ground_state();
    let fidelity = outcome.final_state.fidelity(&target)?;
    let gaps = chain.gaps()?;
    let overlaps = chain.overlaps()?;

    let mut csv = String::from("step,E0,p0,iterations,boundA2C2\n");
    for (i, report) in outcome.steps.iter().enumerate() {
        let bound = leakage_bound(gaps[i], gaps[i + 1], overlaps[i], chain.steps[i].alpha, cfg.coupling)
            .map(|b| format!("{b:.6e}"))
            .unwrap_or_else(|_| "NA".into());
        writeln!(
            csv,
            "{},{:.6e},{:.6e},{},{bound}",
            i + 1,
            report.energy,
            report.outcome.decay_probability,
            report.outcome.iteration_count
        )
        .expect("string write");
    }
    let mut files = vec![artifacts.write(".csv", &csv)?];

    let mut lines = Vec::new();
    write_transcript(&transcript(&outcome.steps), &mut lines).expect("in-memory write");
    let transcript_path = artifacts.write(".jsonl", std::str::from_utf8(&lines).expect("JSON is UTF-8"))?;
    files.push(transcript_path.clone());

    if args.dump_eigen {
        let mut dump = String::from("member,index,eigenvalue,component,re,im\n");
        for (j, h) in chain.hamiltonians.iter().enumerate() {
            let d = h.eigh()?;
            for k in 0..d.dim() {
                for (i, z) in d.eigenvector(k).amplitudes().iter().enumerate() {
                    writeln!(dump, "{j},{k},{:.15e},{i},{:.15e},{:.15e}", d.eigenvalues()[k], z.re, z.im)
                        .expect("string write");
                }
            }
        }
        files.push(artifacts.write("-eigen.csv", &dump)?);
    }

    let summary = json!({
        "command": name.as_str(),
        "kind": problem.kind,
        "n": problem.n,
        "N": problem.size,
        "seed": seed,
        "coupling": cfg.coupling,
        "overlapEstimate": overlap,
        "windowPoints": cfg.window_points,
        "levelSizes": prepared.family.sizes(),
        "steps": chain.len(),
        "energies": outcome.energy_trace,
        "totalIterations": outcome.total_iterations,
        "refinementSamples": outcome.refinement_samples,
        "fidelity": fidelity,
        "transcript": transcript_path.file_name().map(|f| f.to_string_lossy().into_owned()),
    });
    Ok(ChainRun {
        outcome,
        fidelity,
        summary,
        files,
    })
}

fn factor_demo(ctx: &Context, args: &FactorArgs) -> CliResult<Report> {
    let file = &ctx.config.factor;
    let z = args
        .z
        .or(file.modulus)
        .ok_or_else(|| CliError::ConfigInvalid("factor-demo needs --z".into()))?;
    let a = args
        .a
        .or(file.base)
        .ok_or_else(|| CliError::ConfigInvalid("factor-demo needs --a".into()))?;
    let n = match args.n.or(file.n) {
        Some(n) => n,
        None if z >= 2 => default_factoring_qubits(z),
        None => 1,
    };
    let inst = build_factoring(z, a, n).map_err(invalid)?;
    let nesting = match inst.family.verify() {
        Ok(()) => "ok".to_string(),
        Err(e) => e.name().to_string(),
    };
    let ratios = inst.ratios();
    let artifacts = ctx.artifacts(CommandName::FactorDemo)?;
    let universe = inst.table.len();

    let (manifold, weight, run) = if inst.family.is_empty() {
        ((0..universe).collect::<Vec<_>>(), 1.0, None)
    } else {
        let problem = ProblemInstance::factoring(&inst)?;
        let prepared = Prepared {
            family: inst.family.clone(),
            overlap: 0.5f64.sqrt(),
            coupling: None,
        };
        let run = run_chain(ctx, CommandName::FactorDemo, &artifacts, &problem, &prepared, &args.engine)?;
        // spread class amplitudes evenly over their members
        let partition = inst.family.partition();
        let probs = run.outcome.final_state.probabilities();
        let m = inst.family.len();
        let class_of = |k: u64| (1..=m).rev().find(|&j| inst.family.contains(j, k)).map_or(m, |j| m - j);
        let per_state: Vec<f64> = (0..universe)
            .map(|k| {
                let c = class_of(k);
                probs[c] / partition[c] as f64
            })
            .collect();
        let peak = per_state.iter().copied().fold(0.0, f64::max);
        let manifold: Vec<u64> = (0..universe).filter(|&k| per_state[k as usize] >= peak / 2.0).collect();
        let weight = manifold.iter().map(|&k| per_state[k as usize]).sum();
        (manifold, weight, Some(run))
    };
    let order = order_from_manifold(&manifold);
    let factors = order.and_then(|r| factors_from_order(z, a, r));

    let mut summary = match &run {
        Some(r) => r.summary.clone(),
        None => json!({"command": "factor-demo", "N": universe}),
    };
    summary["Z"] = json!(z);
    summary["a"] = json!(a);
    summary["n"] = json!(n);
    summary["divisions"] = json!(inst.divisions);
    summary["nesting"] = json!(nesting);
    summary["ratios"] = json!(ratios);
    summary["groundManifold"] = json!(manifold);
    summary["groundWeight"] = json!(weight);
    summary["order"] = json!(order);
    summary["factors"] = json!(factors.map(|(p, q)| [p, q]));
    let mut files = run.map(|r| r.files).unwrap_or_default();
    files.push(artifacts.write_json(&summary)?);

    let shown: Vec<String> = manifold.iter().map(u64::to_string).collect();
    let manifold_text = if manifold.len() > 16 {
        format!("{} states", manifold.len())
    } else {
        format!("[{}]", shown.join(","))
    };
    Ok(Report {
        summary: format!(
            "groundManifold={manifold_text} r={} factors={} nesting={nesting} ratios={}",
            order.map_or("none".into(), |r| r.to_string()),
            factors.map_or("none".into(), |(p, q)| format!("{p},{q}")),
            if ratios.is_empty() { "none".into() } else { sig6_list(&ratios) }
        ),
        files,
    })
}

fn error_bound(ctx: &Context, args: &BoundArgs) -> CliResult<Report> {
    let file = &ctx.config.bound;
    let need = |flag: Option<f64>, from_file: Option<f64>, what: &str| {
        flag.or(from_file)
            .ok_or_else(|| CliError::ConfigInvalid(format!("error-bound needs --{what}")))
    };
    let gap_prev = need(args.gap_prev, file.gap_prev, "gap-prev")?;
    let gap_curr = need(args.gap_curr, file.gap_curr, "gap-curr")?;
    let overlap = need(args.overlap, file.overlap, "overlap")?;
    let alpha = need(args.alpha, file.alpha, "alpha")?;
    let coupling = need(args.coupling, file.coupling, "coupling")?;
    let bound = leakage_bound(gap_prev, gap_curr, overlap, alpha, coupling)?;
    let first_order = leakage_bound_first_order(gap_prev, gap_curr, overlap, alpha, coupling)?;
    let a_max = args.a_max.or(file.a_max).unwrap_or(bound.sqrt() / coupling);
    let steps = args.steps.or(file.steps);
    let success = steps.map(|m| success_bound(a_max, coupling, m)).transpose()?;

    let mut line = format!("boundA2C2={} firstOrder={}", sig6(bound), sig6(first_order));
    if let Some(p) = success {
        write!(line, " successBound={}", sig6(p)).expect("string write");
    }
    let artifacts = ctx.artifacts(CommandName::ErrorBound)?;
    let files = vec![artifacts.write_json(&json!({
        "gapPrev": gap_prev,
        "gapCurr": gap_curr,
        "overlap": overlap,
        "alpha": alpha,
        "coupling": coupling,
        "boundA2C2": bound,
        "firstOrder": first_order,
        "aMax": a_max,
        "steps": steps,
        "successBound": success,
    }))?];
    Ok(Report { summary: line, files })
}

/// First two numeric columns of every row that parses; headers are skipped.
pub fn read_xy(text: &str) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for line in text.lines() {
        let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
        if let (Some(Ok(x)), Some(Ok(y))) = (cols.next(), cols.next()) {
            xs.push(x);
            ys.push(y);
        }
    }
    (xs, ys)
}

fn scaling_fit(ctx: &Context, args: &FitArgs) -> CliResult<Report> {
    let path = args
        .input
        .clone()
        .or_else(|| ctx.config.fit.input.clone())
        .ok_or_else(|| CliError::ConfigInvalid("scaling-fit needs --input".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::ConfigInvalid(format!("reading {}: {e}", path.display())))?;
    let (xs, ys) = read_xy(&text);
    let fit = fit_scaling(&xs, &ys)?;
    let artifacts = ctx.artifacts(CommandName::ScalingFit)?;
    let files = vec![artifacts.write_json(&json!({
        "input": path.display().to_string(),
        "points": xs.len(),
        "exponent": fit.exponent,
        "intercept": fit.intercept,
        "rSquared": fit.r_squared,
    }))?];
    Ok(Report {
        summary: format!(
            "exponent={} intercept={} r2={}",
            sig6(fit.exponent),
            sig6(fit.intercept),
            sig6(fit.r_squared)
        ),
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_family_matches_minfind_levels() {
        let problem = ProblemInstance::minfind(10).unwrap();
        let family = threshold_family(&problem).unwrap();
        let want: Vec<u64> = (1..10).map(|j| (1u64 << (10 - j)) - 1).collect();
        assert_eq!(family.sizes(), &want[..]);
        let search = threshold_family(&ProblemInstance::search(6, 3).unwrap()).unwrap();
        assert_eq!(search.sizes(), &[3]);
    }

    #[test]
    fn csv_columns_skip_headers() {
        let (x, y) = read_xy("f,minGap,sStar\n1e-2,3.0e-4,0.5\n\n2e-2,1.2e-3,0.5\n");
        assert_eq!(x, vec![1e-2, 2e-2]);
        assert_eq!(y, vec![3.0e-4, 1.2e-3]);
    }
}
