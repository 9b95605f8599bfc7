//! The `barter` command line.
//!
//! Exit codes: 0 success, 1 parse or validation error, 2 fairness floors
//! infeasible, 3 instance too large for the oracle, 4 verification failed.

use crate::io::{instance_to_json, oracle_to_json, parse_instance, AllocationDocument, IoError};
use crate::lp::{build_lp, solve_lp_with, LpError, LpPoint};
use crate::model::{BarterInstance, TransferWeight};
use crate::oracle::{
    brute_force_with, gap_family, gkps_worst_case, partition_to_bsv, random_instance,
    BruteForceOptions, OracleError, RandomSpec, RandomWeights, DEFAULT_EDGE_LIMIT,
};
use crate::rounding::{round_solution, to_json_lines, Algorithm, RoundingOptions, SeededBranches};
use crate::vbm::build_vbm;
use crate::verify::{verify, Status, TrialConfig, VerifyConfig, VerifyError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAIRNESS: i32 = 2;
pub const EXIT_TOO_LARGE: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "barter",
    version,
    about = "Clear barter exchanges with balanced net values"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the LP and round it to an integral exchange.
    Solve(SolveArgs),
    /// Run seeded trials and check the rounding guarantees.
    Verify(VerifyArgs),
    /// Exhaustively find the best exactly balanced exchange.
    Oracle(OracleArgs),
    /// Print a generated instance.
    Gen {
        #[command(subcommand)]
        family: Family,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WeightsMode {
    /// Keep the weights written in the instance.
    Instance,
    ItemValue,
    Unit,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PointArg {
    Basic,
    Centroid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    BarterDr,
    Gkps,
}

#[derive(Args, Debug)]
struct Pipeline {
    /// Instance file, or `-` for standard input.
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "instance")]
    weights: WeightsMode,
    #[arg(long, value_enum, default_value = "on")]
    fairness: Switch,
    #[arg(long = "lp-point", value_enum, default_value = "centroid")]
    lp_point: PointArg,
    #[arg(long, value_enum, default_value = "barter-dr")]
    algorithm: AlgorithmArg,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    pipeline: Pipeline,
    /// Write one JSON line per rounding iteration to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    pipeline: Pipeline,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long = "subset-seed", default_value_t = 0)]
    subset_seed: u64,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    instance: PathBuf,
    /// Largest search space accepted, as a power of two.
    #[arg(long = "edge-limit", default_value_t = DEFAULT_EDGE_LIMIT)]
    edge_limit: u32,
}

#[derive(Subcommand, Debug)]
enum Family {
    /// Two-agent instance encoding an equal-sum partition question.
    Partition {
        /// Comma-separated positive integers.
        #[arg(long, value_delimiter = ',', required = true)]
        set: Vec<u64>,
    },
    /// Two agents swapping items worth 1 and 1/n.
    Gap {
        #[arg(long)]
        n: u32,
    },
    /// Two agents, four items worth 10, 10, 20, 20.
    Worstcase,
    Random(RandomArgs),
}

#[derive(Args, Debug)]
struct RandomArgs {
    #[arg(long, default_value_t = 3)]
    agents: usize,
    #[arg(long, default_value_t = 4)]
    items: usize,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long = "min-value", default_value_t = 1)]
    min_value: u32,
    #[arg(long = "max-value", default_value_t = 5)]
    max_value: u32,
    #[arg(long = "min-cap", default_value_t = 1)]
    min_cap: u32,
    #[arg(long = "max-cap", default_value_t = 1)]
    max_cap: u32,
    #[arg(long, value_enum, default_value = "item-value")]
    weights: RandomWeightsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RandomWeightsArg {
    ItemValue,
    Unit,
    Explicit,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Failure {
            code,
            message: message.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::new(EXIT_INPUT, e)
    }
}

impl From<LpError> for Failure {
    fn from(e: LpError) -> Self {
        match e {
            LpError::InfeasibleWithFairness => Failure::new(EXIT_FAIRNESS, e),
            LpError::Defect(_) => Failure::new(EXIT_INPUT, e),
        }
    }
}

impl From<VerifyError> for Failure {
    fn from(e: VerifyError) -> Self {
        match e {
            VerifyError::Lp(lp) => lp.into(),
            other => Failure::new(EXIT_INPUT, other),
        }
    }
}

fn read_instance(path: &PathBuf, stdin: &mut dyn Read) -> Result<BarterInstance, Failure> {
    let mut text = String::new();
    if path.as_os_str() == "-" {
        stdin
            .read_to_string(&mut text)
            .map_err(|e| Failure::new(EXIT_INPUT, format!("standard input: {e}")))?;
    } else {
        text = std::fs::read_to_string(path)
            .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    }
    Ok(parse_instance(&text)?)
}

impl Pipeline {
    fn instance(&self, stdin: &mut dyn Read) -> Result<BarterInstance, Failure> {
        let mut inst = read_instance(&self.instance, stdin)?;
        match self.weights {
            WeightsMode::Instance => {}
            WeightsMode::ItemValue => inst.weights = TransferWeight::ItemValue,
            WeightsMode::Unit => inst.weights = TransferWeight::Unit,
        }
        if self.fairness == Switch::Off {
            inst.fairness.clear();
        }
        Ok(inst)
    }

    fn point(&self) -> LpPoint {
        match self.lp_point {
            PointArg::Basic => LpPoint::Basic,
            PointArg::Centroid => LpPoint::Centroid,
        }
    }

    fn algorithm(&self) -> Algorithm {
        match self.algorithm {
            AlgorithmArg::BarterDr => Algorithm::BarterDr,
            AlgorithmArg::Gkps => Algorithm::Gkps,
        }
    }
}

fn solve(args: &SolveArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<(), Failure> {
    let p = &args.pipeline;
    let inst = p.instance(stdin)?;
    let graph = build_vbm(&inst).map_err(IoError::from)?;
    let lp = solve_lp_with(&build_lp(&graph, &inst.fairness), p.point())?;
    let outcome = round_solution(
        &graph,
        &lp.x,
        p.algorithm(),
        &mut SeededBranches::new(p.seed),
        RoundingOptions {
            record_trace: args.trace.is_some(),
        },
    )
    .map_err(|e| Failure::new(EXIT_INPUT, format!("rounding failed: {e}")))?;
    if let Some(path) = &args.trace {
        std::fs::write(path, to_json_lines(&outcome.trace))
            .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    }
    let doc = AllocationDocument::new(&inst, &outcome.allocation, p.seed, &lp.objective)?;
    write_out(out, &doc.to_json())
}

fn run_verify(args: &VerifyArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<(), Failure> {
    let p = &args.pipeline;
    let inst = p.instance(stdin)?;
    let config = VerifyConfig {
        trials: args.trials,
        seed: p.seed,
        subset_seed: args.subset_seed,
        trial: TrialConfig {
            algorithm: p.algorithm(),
            lp_point: p.point(),
            parallel: !args.sequential,
        },
        ..VerifyConfig::default()
    };
    let report = verify(&inst, &config)?;
    let text = if args.json {
        report.to_json() + "\n"
    } else {
        report.to_table()
    };
    write_out(out, &text)?;
    if report.overall == Status::Pass {
        Ok(())
    } else {
        Err(Failure::new(EXIT_VERIFY_FAILED, "verification failed"))
    }
}

fn oracle(args: &OracleArgs, stdin: &mut dyn Read, out: &mut dyn Write) -> Result<(), Failure> {
    let inst = read_instance(&args.instance, stdin)?;
    let options = BruteForceOptions {
        edge_limit: args.edge_limit,
        ..Default::default()
    };
    let result = brute_force_with(&inst, options).map_err(|e| match e {
        OracleError::TooLarge { .. } => Failure::new(EXIT_TOO_LARGE, e),
        other => Failure::new(EXIT_INPUT, other),
    })?;
    write_out(out, &oracle_to_json(&result))
}

fn generate(family: &Family, out: &mut dyn Write) -> Result<(), Failure> {
    let inst = match family {
        Family::Partition { set } => {
            partition_to_bsv(set).map_err(|e| Failure::new(EXIT_INPUT, e))?
        }
        Family::Gap { n } => {
            if *n == 0 {
                return Err(Failure::new(EXIT_INPUT, "--n must be at least 1"));
            }
            gap_family(*n)
        }
        Family::Worstcase => gkps_worst_case(),
        Family::Random(r) => {
            let spec = RandomSpec {
                agents: r.agents,
                items: r.items,
                density: r.density,
                values: (r.min_value, r.max_value),
                caps: (r.min_cap, r.max_cap),
                weights: match r.weights {
                    RandomWeightsArg::ItemValue => RandomWeights::ItemValue,
                    RandomWeightsArg::Unit => RandomWeights::Unit,
                    RandomWeightsArg::Explicit => RandomWeights::Explicit,
                },
            };
            random_instance(&spec, r.seed).map_err(|e| Failure::new(EXIT_INPUT, e))?
        }
    };
    write_out(out, &instance_to_json(&inst))
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes())
        .map_err(|e| Failure::new(EXIT_INPUT, format!("writing output: {e}")))
}

/// Runs one invocation against the given streams and returns its exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => solve(a, stdin, out),
        Command::Verify(a) => run_verify(a, stdin, out),
        Command::Oracle(a) => oracle(a, stdin, out),
        Command::Gen { family } => generate(family, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
