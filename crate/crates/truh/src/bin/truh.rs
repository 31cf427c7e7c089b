//! Thin command-line front end: run the calibrated test on CSV data,
//! estimate dimension constants, run simulation experiments, run the
//! reference tests, and sweep the fold-change parameter.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use truh::calibrate::{BootstrapConfig, MixingMode};
use truh::constants::{closed_form_constants, estimate_constants_mc, ConstantsMode};
use truh::data::{load_csv, SampleMatrix};
use truh::result::save_result_json;
use truh::rng::RngStream;
use truh::simlab::{self, Method, Overrides};
use truh::TruhError;

#[derive(Parser)]
#[command(name = "truh", version, about = "Nearest-neighbor two-sample testing under subpopulation heterogeneity")]
struct Cli {
    /// Size of the worker thread pool (default: all cores). Results are
    /// identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the calibrated test on baseline/case CSV files
    Test(TestArgs),
    /// Estimate or print the dimension constants table
    Constants(ConstantsArgs),
    /// Run a named simulation experiment and report rejection rates
    Experiment(ExperimentArgs),
    /// Run a reference test (edge count or energy) on CSV files
    Baseline(BaselineArgs),
    /// Rejection rates over a list of fold-change values
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MixingArg {
    Corners,
    Dirichlet,
}

#[derive(Args)]
struct TestArgs {
    /// Baseline sample CSV (rows = observations)
    #[arg(long)]
    uninfected: PathBuf,
    /// Case sample CSV
    #[arg(long)]
    infected: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    tau_fc: f64,
    /// Bootstrap replicates per mixing draw
    #[arg(long, default_value_t = 200)]
    b2: usize,
    /// Mixing draws in dirichlet mode (corners mode uses one per subgroup)
    #[arg(long, default_value_t = 100)]
    b1: usize,
    #[arg(long, value_enum, default_value_t = MixingArg::Corners)]
    mixing: MixingArg,
    /// Dirichlet concentration parameter
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Skip subgroup estimation and use this class count
    #[arg(long)]
    k: Option<usize>,
    /// Apply tau_fc to the observed statistic as well as the null replicates;
    /// pass false to threshold only the null calibration
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    tau_on_observed: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the result JSON here ("-" for stdout)
    #[arg(long)]
    out: Option<String>,
    /// Treat the first CSV row as data even if it parses as text
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct ConstantsArgs {
    /// Single dimension
    #[arg(long, conflicts_with = "dims")]
    dim: Option<usize>,
    /// Inclusive dimension range, e.g. 1..6
    #[arg(long)]
    dims: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    points: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value = "cube")]
    mode: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Also print the table as JSON lines
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Scenario name (e.g. Exp1-I, Exp2-II, Table1-CaseB)
    #[arg(long)]
    name: String,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau_fc: Option<f64>,
    #[arg(long)]
    b2: Option<usize>,
    #[arg(long, value_enum)]
    mixing: Option<MixingArg>,
    #[arg(long, default_value_t = 0.1)]
    beta: f64,
    /// Apply tau_fc to the observed statistic too (false matches the
    /// published sweep tables)
    #[arg(long, action = clap::ArgAction::Set)]
    tau_on_observed: Option<bool>,
    /// Comma-separated subset of truh,edgecount-asymptotic,edgecount-permutation,energy
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    n_perm: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report JSON here ("-" for stdout)
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct BaselineArgs {
    /// One of edgecount-asymptotic, edgecount-permutation, energy
    #[arg(long)]
    method: String,
    #[arg(long)]
    uninfected: PathBuf,
    #[arg(long)]
    infected: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 199)]
    n_perm: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_header: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Comma-separated fold-change values, e.g. 1,1.2,1.4
    #[arg(long, default_value = "1,1.2,1.4")]
    taus: String,
}

fn effective_seed(seed: Option<u64>) -> u64 {
    let s = seed.unwrap_or_else(rand::random);
    println!("seed: {s}");
    s
}

/// Exit-code classes: 1 = usage, 2 = data, 3 = internal.
fn exit_code_for(err: &TruhError) -> u8 {
    match err {
        TruhError::Io(_)
        | TruhError::Parse { .. }
        | TruhError::EmptyInput
        | TruhError::DimensionMismatch { .. }
        | TruhError::InsufficientBaseline { .. } => 2,
        TruhError::InvalidAlpha { .. }
        | TruhError::InvalidTau(_)
        | TruhError::InvalidL(_)
        | TruhError::InvalidSpec(_)
        | TruhError::UnknownScenario(_)
        | TruhError::KTooLarge { .. }
        | TruhError::IndexOutOfRange { .. } => 1,
        _ => 3,
    }
}

fn load_sample(path: &PathBuf, no_header: bool) -> truh::Result<SampleMatrix> {
    if no_header {
        return load_csv(path, false);
    }
    // sniff: if the first line parses as numbers it is data
    let text = std::fs::read_to_string(path)?;
    let has_header = text
        .lines()
        .next()
        .map(|l| l.split(',').any(|c| c.trim().parse::<f64>().is_err()))
        .unwrap_or(false);
    truh::data::parse_csv(&text, has_header)
}

fn mixing_mode(arg: MixingArg, beta: f64) -> MixingMode {
    match arg {
        MixingArg::Corners => MixingMode::Corners,
        MixingArg::Dirichlet => MixingMode::Dirichlet { beta },
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: &str) -> truh::Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    if out == "-" {
        println!("{json}");
    } else {
        std::fs::write(out, json)?;
    }
    Ok(())
}

fn cmd_test(args: &TestArgs) -> truh::Result<()> {
    let baseline = load_sample(&args.uninfected, args.no_header)?;
    let cases = load_sample(&args.infected, args.no_header)?;
    let config = BootstrapConfig {
        alpha: args.alpha,
        tau_fc: args.tau_fc,
        b1: args.b1,
        b2: args.b2,
        mixing_mode: mixing_mode(args.mixing, args.beta),
        k_override: args.k,
        seed: effective_seed(args.seed),
        tau_on_observed: args.tau_on_observed,
    };
    let result = truh::truh_test(&baseline, &cases, &config)?;
    println!(
        "statistic {:.6}  cutoff {:.6}  p_value {:.4}  k_hat {}  (m={}, n={}, d={})",
        result.statistic, result.cutoff, result.p_value, result.k_hat, result.m, result.n, result.d
    );
    if result.reject {
        println!("REJECT (remodeling)");
    } else {
        println!("FAIL TO REJECT (preferential infection / no change)");
    }
    if let Some(out) = &args.out {
        if out == "-" {
            println!("{}", serde_json::to_string_pretty(&result)?);
        } else {
            save_result_json(&result, out)?;
        }
    }
    Ok(())
}

fn parse_dims(args: &ConstantsArgs) -> truh::Result<Vec<usize>> {
    if let Some(d) = args.dim {
        if d == 0 {
            return Err(TruhError::InvalidSpec("--dim must be >= 1".into()));
        }
        return Ok(vec![d]);
    }
    let spec = args.dims.as_deref().unwrap_or("1..6");
    let parts: Vec<&str> = spec.split("..").collect();
    let bad = || TruhError::InvalidSpec(format!("cannot parse dimension range '{spec}'"));
    match parts.as_slice() {
        [a, b] => {
            let lo: usize = a.parse().map_err(|_| bad())?;
            let hi: usize = b.parse().map_err(|_| bad())?;
            if lo == 0 || hi < lo {
                return Err(bad());
            }
            Ok((lo..=hi).collect())
        }
        [a] => {
            let d: usize = a.parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(vec![d])
        }
        _ => Err(bad()),
    }
}

fn cmd_constants(args: &ConstantsArgs) -> truh::Result<()> {
    let dims = parse_dims(args)?;
    let mode = match args.mode.as_str() {
        "cube" => Some(ConstantsMode::CubeMC),
        "torus" => Some(ConstantsMode::TorusMC),
        "closed" => None,
        other => {
            return Err(TruhError::InvalidSpec(format!(
                "unknown mode '{other}' (expected cube, torus, or closed)"
            )))
        }
    };
    let seed = effective_seed(args.seed);
    println!(
        "{:>3} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "d", "zeta1", "zeta2", "delta_d", "se_zeta1", "se_zeta2"
    );
    for d in dims {
        let c = match mode {
            None => closed_form_constants(d),
            Some(mc) => {
                let rng = RngStream::new(seed, &[d as u64]);
                estimate_constants_mc(d, args.points, args.reps, mc, &rng)?
            }
        };
        if c.mode == ConstantsMode::ClosedForm {
            println!(
                "{:>3} {:>10.4} {:>10} {:>10} {:>10} {:>10}",
                c.d, c.zeta1, "n/a", "n/a", "n/a", "n/a"
            );
        } else {
            println!(
                "{:>3} {:>10.4} {:>10.4} {:>10.4} {:>10.5} {:>10.5}",
                c.d, c.zeta1, c.zeta2, c.delta_d, c.se_zeta1, c.se_zeta2
            );
        }
        if args.json {
            println!(
                "{}",
                serde_json::json!({
                    "d": c.d, "zeta1": c.zeta1, "zeta2": c.zeta2, "delta_d": c.delta_d,
                    "se_zeta1": c.se_zeta1, "se_zeta2": c.se_zeta2,
                })
            );
        }
    }
    Ok(())
}

fn parse_methods(spec: &str) -> truh::Result<Vec<Method>> {
    spec.split(',')
        .map(|tok| match tok.trim() {
            "truh" => Ok(Method::Truh),
            "edgecount-asymptotic" => Ok(Method::EdgecountAsymptotic),
            "edgecount-permutation" => Ok(Method::EdgecountPermutation),
            "energy" => Ok(Method::Energy),
            other => Err(TruhError::InvalidSpec(format!("unknown method '{other}'"))),
        })
        .collect()
}

fn experiment_overrides(args: &ExperimentArgs) -> truh::Result<Overrides> {
    Ok(Overrides {
        m: args.m,
        n: args.n,
        d: args.d,
        reps: args.reps,
        alpha: args.alpha,
        tau_fc: args.tau_fc,
        b2: args.b2,
        mixing_mode: args.mixing.map(|m| mixing_mode(m, args.beta)),
        tau_on_observed: args.tau_on_observed,
        methods: args.methods.as_deref().map(parse_methods).transpose()?,
        n_perm: args.n_perm,
        seed: Some(effective_seed(args.seed)),
    })
}

fn cmd_experiment(args: &ExperimentArgs) -> truh::Result<()> {
    let overrides = experiment_overrides(args)?;
    let report = simlab::run_experiment(&args.name, &overrides)?;
    print!("{}", report.text_table());
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    Ok(())
}

fn cmd_baseline(args: &BaselineArgs) -> truh::Result<()> {
    let method = match args.method.as_str() {
        "edgecount-asymptotic" => Method::EdgecountAsymptotic,
        "edgecount-permutation" => Method::EdgecountPermutation,
        "energy" => Method::Energy,
        other => {
            return Err(TruhError::InvalidSpec(format!(
                "unknown baseline method '{other}'"
            )))
        }
    };
    let baseline = load_sample(&args.uninfected, args.no_header)?;
    let cases = load_sample(&args.infected, args.no_header)?;
    let seed = effective_seed(args.seed);
    let result =
        simlab::run_baseline_method(method, &baseline, &cases, args.alpha, args.n_perm, seed)?;
    println!(
        "method {:?}  statistic {:.6}  p_value {:.4}  reject {}",
        result.method, result.statistic, result.p_value, result.reject
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> truh::Result<()> {
    let taus: Vec<f64> = args
        .taus
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| TruhError::InvalidSpec(format!("cannot parse tau '{t}'")))
        })
        .collect::<truh::Result<_>>()?;
    let overrides = experiment_overrides(&args.experiment)?;
    let reports = simlab::run_tau_sweep(&args.experiment.name, &overrides, &taus)?;
    for report in &reports {
        print!("{}", report.text_table());
    }
    if let Some(out) = &args.experiment.out {
        write_json(&reports, out)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version are successful exits; everything else is usage
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: could not size thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let result = match &cli.command {
        Cmd::Test(a) => cmd_test(a),
        Cmd::Constants(a) => cmd_constants(a),
        Cmd::Experiment(a) => cmd_experiment(a),
        Cmd::Baseline(a) => cmd_baseline(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
