use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mgpo::bench::{check_bounds, emit_report, run_sweep, BoundSpec, GameSource, SweepEntry, SweepPlan, DEFAULT_GRID};
use mgpo::framework::{run, write_trace_csv, Algorithm, Cadence, EtaSpec, RunConfig};
use mgpo::game::{make_random_game, make_two_layer_example, ne_gap, MarkovGame, MarkovPolicy};
use mgpo::general_sum::{cce_gap, cce_gap_markov, run_general_sum_oftrl, write_cce_trace_csv, CertifiedPolicy, GeneralSumConfig};
use mgpo::schedule::Schedule;

/// Policy optimization dynamics for tabular Markov games.
#[derive(Debug, Parser)]
#[command(name = "mgpo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a game file (and, for the two-layer example, its initial policies).
    MakeGame(MakeGameArgs),
    /// Run one algorithm and print the final equilibrium gap.
    Solve(SolveArgs),
    /// Run an algorithm x T grid and write summary, fit and bound reports.
    Sweep(SweepArgs),
    /// Evaluate the equilibrium gap of stored policies.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GameKind {
    TwoLayer,
    Random,
}

#[derive(Debug, Args)]
struct RandomShape {
    /// Horizon of random games.
    #[arg(long, default_value_t = 3)]
    horizon: usize,
    /// Number of states of random games.
    #[arg(long, default_value_t = 4)]
    states: usize,
    /// Comma-separated action counts, one per player.
    #[arg(long, value_delimiter = ',', default_value = "2,2")]
    actions: Vec<usize>,
    /// Give every player its own reward table instead of a zero-sum table.
    #[arg(long)]
    general_sum: bool,
}

#[derive(Debug, Args)]
struct MakeGameArgs {
    #[arg(long, value_enum)]
    kind: GameKind,
    /// Seed for random games.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    shape: RandomShape,
    /// Output game file.
    #[arg(long)]
    out: PathBuf,
    /// Output file for the two-layer initial policies (default: `<out>.init.json`).
    #[arg(long)]
    init_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Alpha,
    Eager,
}

#[derive(Debug, Args)]
struct SolveArgs {
    /// Game file, or `two-layer` / `random` for a built-in game.
    #[arg(long)]
    game: String,
    /// Seed for `--game random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alg: Algorithm,
    #[arg(long, value_enum)]
    schedule: Option<ScheduleArg>,
    /// Step size: a number, `c*T^p`, `T^p`, or one of nashv, gda, mod-oftrl, oftrl56, cce.
    #[arg(long)]
    eta: Option<EtaSpec>,
    #[arg(long)]
    iters: usize,
    /// Trace CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record the trace every n steps instead of geometrically.
    #[arg(long)]
    every: Option<usize>,
    /// Track value errors and check the error recursion.
    #[arg(long)]
    diagnostics: bool,
    /// Start from the initial policies and use them as the regularization base point.
    #[arg(long)]
    kl_base: bool,
    /// Initial policy-pair file (the two-layer game provides its own).
    #[arg(long)]
    init: Option<PathBuf>,
    /// Run the V-table form (ftrl and gda only).
    #[arg(long)]
    v_form: bool,
    /// Output file for the final policies (JSON lines for general-sum games).
    #[arg(long)]
    policy_out: Option<PathBuf>,
    /// Leave elapsed time out of the trace.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    shape: RandomShape,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Game file, or `two-layer` / `random` for a built-in game.
    #[arg(long, default_value = "two-layer")]
    game: String,
    /// Seed for `--game random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated algorithms, each optionally `alg=eta`.
    #[arg(long, value_delimiter = ',')]
    algs: Vec<String>,
    /// Comma-separated, strictly increasing iteration counts.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<usize>,
    #[arg(long, default_value = "sweep-out")]
    out_dir: PathBuf,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Exit with status 1 when any closed-form bound is violated.
    #[arg(long)]
    check_bounds: bool,
    /// Start from uniform policies even when the game prescribes others.
    #[arg(long)]
    uniform_init: bool,
    /// Leave wall-clock seconds out of summary.csv.
    #[arg(long)]
    no_timing: bool,
    #[command(flatten)]
    shape: RandomShape,
}

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
enum Metric {
    Negap,
    Ccegap,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Game file, or `two-layer` / `random` for a built-in game.
    #[arg(long)]
    game: String,
    /// Seed for `--game random`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Policy files; a file may hold several policies. `.jsonl` files are certified policies.
    #[arg(long = "policy", required = true)]
    policies: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "negap")]
    metric: Metric,
    #[command(flatten)]
    shape: RandomShape,
}

/// Bad combination of otherwise well-formed arguments.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn load_game(spec: &str, seed: u64, shape: &RandomShape) -> Result<(MarkovGame, Option<(MarkovPolicy, MarkovPolicy)>)> {
    match spec {
        "two-layer" => {
            let (g, mu, nu) = make_two_layer_example();
            Ok((g, Some((mu, nu))))
        }
        "random" => Ok((random_game(seed, shape)?, None)),
        path => Ok((MarkovGame::load(path)?, None)),
    }
}

fn random_game(seed: u64, shape: &RandomShape) -> Result<MarkovGame> {
    if !shape.general_sum && shape.actions.len() != 2 {
        return Err(usage("zero-sum games need exactly two action counts; add --general-sum for more players"));
    }
    Ok(make_random_game(seed, shape.horizon, shape.states, &shape.actions, !shape.general_sum)?)
}

fn default_init_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "game".into());
    out.with_file_name(format!("{stem}.init.json"))
}

fn cmd_make_game(args: MakeGameArgs) -> Result<()> {
    match args.kind {
        GameKind::TwoLayer => {
            let (game, mu, nu) = make_two_layer_example();
            game.save(&args.out)?;
            let init = args.init_out.unwrap_or_else(|| default_init_path(&args.out));
            MarkovPolicy::save_many(&[mu, nu], &init)?;
            println!("{}", args.out.display());
            println!("{}", init.display());
        }
        GameKind::Random => {
            if args.init_out.is_some() {
                return Err(usage("--init-out applies to --kind two-layer only"));
            }
            random_game(args.seed, &args.shape)?.save(&args.out)?;
            println!("{}", args.out.display());
        }
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn load_pair(path: &Path) -> Result<(MarkovPolicy, MarkovPolicy)> {
    let mut pols = MarkovPolicy::load_many(path)?;
    if pols.len() != 2 {
        bail!("{} holds {} policies; expected one per player", path.display(), pols.len());
    }
    pols.sort_by_key(|p| p.player);
    let nu = pols.pop().unwrap();
    let mu = pols.pop().unwrap();
    Ok((mu, nu))
}

fn cadence(every: Option<usize>) -> Result<Cadence> {
    match every {
        Some(0) => Err(usage("--every must be positive")),
        Some(n) => Ok(Cadence::Every(n)),
        None => Ok(Cadence::default()),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    if args.iters == 0 {
        return Err(usage("--iters must be positive"));
    }
    let (game, builtin_init) = load_game(&args.game, args.seed, &args.shape)?;
    if !game.is_zero_sum() {
        return solve_general_sum(&game, &args);
    }
    let mut config = RunConfig::new(args.alg, game.horizon(), args.iters);
    if let Some(s) = args.schedule {
        config.schedule = match s {
            ScheduleArg::Alpha => Schedule::alpha(game.horizon())?,
            ScheduleArg::Eager => Schedule::Eager,
        };
        if let Some(forced) = args.alg.forced_schedule(game.horizon()) {
            if forced != config.schedule {
                return Err(usage(format!("{} runs with the {} schedule", args.alg, forced.name())));
            }
        }
    }
    if let Some(eta) = args.eta {
        config.eta = eta;
    }
    config.cadence = cadence(args.every)?;
    config.seed = args.seed;
    config.diagnostics = args.diagnostics;
    config.v_form = args.v_form;
    if args.v_form && !matches!(args.alg, Algorithm::Ftrl | Algorithm::Gda) {
        return Err(usage("--v-form applies to ftrl and gda"));
    }
    if args.kl_base {
        let init = match &args.init {
            Some(path) => load_pair(path)?,
            None => builtin_init.ok_or_else(|| usage("--kl-base needs --init for this game"))?,
        };
        config.init = Some(init);
        config.kl_base_point = true;
    } else if args.init.is_some() {
        return Err(usage("--init is only used together with --kl-base"));
    }
    let mut out = run(&game, &config)?;
    if args.no_timing {
        out.trace.iter_mut().for_each(|r| r.elapsed_s = 0.0);
    }
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        write_trace_csv(&mut w, &out.trace, game.horizon()).and_then(|_| w.flush())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.policy_out {
        MarkovPolicy::save_many(&[out.avg_mu.clone(), out.avg_nu.clone()], path)?;
    }
    if let Some(rec) = out.recursion {
        eprintln!("recursion checks: {} ({} violations)", rec.checks, rec.violations);
    }
    println!("{:.16e}", out.final_gap());
    Ok(())
}

fn solve_general_sum(game: &MarkovGame, args: &SolveArgs) -> Result<()> {
    if args.alg != Algorithm::Oftrl {
        return Err(usage(format!("general-sum games run with --alg oftrl, not {}", args.alg)));
    }
    if args.schedule.is_some_and(|s| !matches!(s, ScheduleArg::Alpha)) {
        return Err(usage("general-sum oftrl uses the alpha schedule"));
    }
    if args.kl_base || args.init.is_some() || args.v_form {
        return Err(usage("--kl-base, --init and --v-form apply to zero-sum games"));
    }
    let mut config = GeneralSumConfig::new(args.iters);
    if let Some(eta) = args.eta {
        config.eta = eta;
    }
    config.cadence = cadence(args.every)?;
    config.diagnostics = args.diagnostics;
    let mut out = run_general_sum_oftrl(game, &config)?;
    if args.no_timing {
        out.trace.iter_mut().for_each(|r| r.elapsed_s = 0.0);
    }
    if let Some(path) = &args.trace {
        let mut w = create(path)?;
        write_cce_trace_csv(&mut w, &out.trace).and_then(|_| w.flush())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let Some(path) = &args.policy_out {
        out.policy.save_jsonl(path)?;
    }
    if let Some(r) = out.max_identity_residual {
        eprintln!("value identity residual: {r:e}");
    }
    println!("{:.16e}", out.trace.last().map_or(f64::NAN, |r| r.cce_gap));
    Ok(())
}

fn parse_entry(text: &str) -> Result<SweepEntry> {
    let (alg, eta) = match text.split_once('=') {
        Some((a, e)) => (a, Some(e)),
        None => (text, None),
    };
    let algorithm: Algorithm = alg.parse().map_err(|e: mgpo::Error| usage(e.to_string()))?;
    let eta = match eta {
        Some(e) => e.parse().map_err(|e: mgpo::Error| usage(e.to_string()))?,
        None => algorithm.default_eta(),
    };
    Ok(SweepEntry::new(algorithm, eta))
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let source = match args.game.as_str() {
        "two-layer" => GameSource::TwoLayer,
        "random" => {
            if args.shape.general_sum || args.shape.actions.len() != 2 {
                return Err(usage("sweeps run on two-player zero-sum games"));
            }
            GameSource::Random {
                seed: args.seed,
                horizon: args.shape.horizon,
                states: args.shape.states,
                actions: (args.shape.actions[0], args.shape.actions[1]),
            }
        }
        path => {
            if !Path::new(path).exists() {
                bail!("game file {path} does not exist");
            }
            GameSource::File(path.into())
        }
    };
    let entries = if args.algs.is_empty() {
        Algorithm::ALL.iter().map(|&a| SweepEntry::with_default_eta(a)).collect()
    } else {
        args.algs.iter().map(|s| parse_entry(s)).collect::<Result<Vec<_>>>()?
    };
    let grid = if args.grid.is_empty() { DEFAULT_GRID.to_vec() } else { args.grid };
    let mut plan = SweepPlan::new(source, entries, grid);
    plan.threads = args.threads;
    plan.use_init = !args.uniform_init;
    plan.record_timing = !args.no_timing;
    plan.validate().map_err(|e| usage(e.to_string()))?;
    let report = run_sweep(&plan)?;
    let bounds = check_bounds(&report, &BoundSpec::standard());
    emit_report(&report, &bounds, &args.out_dir)?;
    for fit in &report.fits {
        match fit.exponent() {
            Some(e) => println!("{}: exponent {e:.4}", fit.label),
            None if fit.is_exact() => println!("{}: exact", fit.label),
            None => println!("{}: no fit", fit.label),
        }
    }
    let failures = report.cells.iter().filter(|c| c.gap.is_err()).count();
    if failures > 0 {
        eprintln!("{failures} run(s) failed; see {}", args.out_dir.join("summary.csv").display());
    }
    let violated = bounds.iter().filter(|b| !b.pass).count();
    if args.check_bounds {
        println!("bound checks: {} passed, {violated} failed", bounds.len() - violated);
    }
    Ok(!(args.check_bounds && violated > 0))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (game, _) = load_game(&args.game, args.seed, &args.shape)?;
    let value = match args.metric {
        Metric::Negap => {
            if !game.is_zero_sum() {
                return Err(usage("negap needs a zero-sum game; use --metric ccegap"));
            }
            let mut pols = Vec::new();
            for p in &args.policies {
                pols.extend(MarkovPolicy::load_many(p)?);
            }
            if pols.len() != 2 {
                bail!("negap needs two policies, got {}", pols.len());
            }
            pols.sort_by_key(|p| p.player);
            ne_gap(&game, &pols[0], &pols[1])?
        }
        Metric::Ccegap => {
            if game.is_zero_sum() {
                return Err(usage("ccegap needs a general-sum game; use --metric negap"));
            }
            let certified = args.policies.len() == 1 && args.policies[0].extension().is_some_and(|e| e == "jsonl");
            if certified {
                let policy = CertifiedPolicy::load_jsonl(&args.policies[0], Schedule::alpha(game.horizon())?)?;
                cce_gap(&game, &policy)?
            } else {
                let mut pols = Vec::new();
                for p in &args.policies {
                    pols.extend(MarkovPolicy::load_many(p)?);
                }
                pols.sort_by_key(|p| p.player);
                cce_gap_markov(&game, &pols)?
            }
        }
    };
    println!("{value:.16e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::MakeGame(a) => cmd_make_game(a).map(|_| true),
        Command::Solve(a) => cmd_solve(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
