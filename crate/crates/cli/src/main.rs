//! `stx`: command-line front end over the JSON formats of `stx-core`.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "stx", version, about = "Exact analysis of finite stochastic transducers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Seed for randomized fixtures.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Caps the worker threads used inside library operations.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Lifts the size guards on alphabets, latents, nodes and horizon.
    #[arg(long, global = true)]
    pub unsafe_large: bool,
    /// Zero-test tolerance in bits.
    #[arg(long, global = true, env = "STX_TOL", default_value_t = stx_core::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Checks a transducer, network or joint file and reports violations.
    Validate(ValidateArgs),
    /// Composes two transducers.
    Compose(ComposeArgs),
    /// Flattens a network into one joint transducer.
    Flatten(NetArgs),
    /// Output sequence distribution for one input sequence.
    Eval(EvalArgs),
    /// Joint process of a network at a finite horizon.
    Joint(JointArgs),
    /// Joint of an environment and agent in closed loop.
    Feedback(FeedbackArgs),
    /// Information measures on a joint.
    Measure(MeasureArgs),
    /// Causal decomposition of a joint into modules.
    Decompose(DecomposeArgs),
    /// Interface-preserving reduction of a joint or network.
    Coarsegrain(CoarseArgs),
    /// Causal-state reconstruction of a network's interface.
    Epsilon(EpsilonArgs),
    /// Runs the seeded acceptance checks.
    Selftest(SelftestArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
pub struct ValidateArgs {
    #[arg(long)]
    pub transducer: Option<String>,
    #[arg(long)]
    pub net: Option<String>,
    #[arg(long)]
    pub joint: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ComposeMode {
    /// Lockstep pair, output `(Y, Z)`.
    Pair,
    /// Second reads only the first's output.
    Series,
    /// Second reads only the shared input.
    Parallel,
    /// First ignores its input.
    Convergent,
    /// Serial product with the middle output summed out.
    Serial,
    /// First emits its state, second reads `(X, R)`.
    Cascade,
}

#[derive(Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub first: String,
    #[arg(long)]
    pub second: String,
    #[arg(long, value_enum, default_value = "pair")]
    pub mode: ComposeMode,
}

#[derive(Args)]
pub struct NetArgs {
    /// Network JSON, or a single transducer JSON.
    #[arg(long)]
    pub net: String,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub net: String,
    /// Input sequence, e.g. `0110`; space separated for multi-character symbols.
    #[arg(long, required_unless_present = "horizon")]
    pub input: Option<String>,
    /// Horizon for networks without external inputs.
    #[arg(long, conflicts_with = "input")]
    pub horizon: Option<usize>,
}

#[derive(Args)]
pub struct JointArgs {
    #[arg(long)]
    pub net: String,
    #[arg(long, default_value_t = stx_core::process::DEFAULT_HORIZON)]
    pub horizon: usize,
    /// Include the latent process of every node.
    #[arg(long)]
    pub latents: bool,
}

#[derive(Args)]
pub struct FeedbackArgs {
    #[arg(long)]
    pub env: String,
    /// Agent JSON: `{"transducer": ..., "initial": [[..]]}`.
    #[arg(long)]
    pub agent: String,
    #[arg(long, default_value_t = 3)]
    pub horizon: usize,
    /// Build the joint from the two interfaces instead of simulating the loop.
    #[arg(long)]
    pub via_interfaces: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MeasureKind {
    Acausality,
    Intransducibility,
    Nonanticipation,
    Cmi,
}

#[derive(Args)]
pub struct MeasureArgs {
    #[arg(long, value_enum)]
    pub kind: MeasureKind,
    #[arg(long)]
    pub joint: String,
    #[arg(long = "in", value_delimiter = ',')]
    pub input: Vec<String>,
    #[arg(long = "out", value_delimiter = ',')]
    pub output: Vec<String>,
    #[arg(long = "latent", value_delimiter = ',')]
    pub latent: Vec<String>,
    /// Slices `ID[:START..END]` for `I[A; B | C]`.
    #[arg(long, value_delimiter = ',')]
    pub a: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub c: Vec<String>,
    /// Truncate the joint to this horizon first.
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DecomposeMode {
    Acausality,
    Intransducibility,
}

#[derive(Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub joint: String,
    #[arg(long, value_enum, default_value = "acausality")]
    pub mode: DecomposeMode,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Restrict to these observables (default: all).
    #[arg(long, value_delimiter = ',')]
    pub observables: Vec<String>,
}

#[derive(Args)]
pub struct CoarseArgs {
    #[arg(long, required_unless_present = "net")]
    pub joint: Option<String>,
    /// Keep observables `0..b` (top simplification).
    #[arg(long, requires = "joint", conflicts_with = "condition_on")]
    pub keep: Option<String>,
    /// Condition on observables `0..a` (bottom simplification).
    #[arg(long, requires = "joint")]
    pub condition_on: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Network to prune a node cluster from.
    #[arg(long, conflicts_with = "joint", requires = "remove")]
    pub net: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub remove: Vec<String>,
}

#[derive(Args)]
pub struct EpsilonArgs {
    #[arg(long)]
    pub net: String,
    #[arg(long, default_value_t = 2)]
    pub h_past: usize,
    #[arg(long, default_value_t = 2)]
    pub h_future: usize,
}

#[derive(Args)]
pub struct SelftestArgs {
    /// Criterion ids to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Validate(a) => commands::validate(&cli.global, a),
        Command::Compose(a) => commands::compose(&cli.global, a),
        Command::Flatten(a) => commands::flatten(&cli.global, a),
        Command::Eval(a) => commands::eval(&cli.global, a),
        Command::Joint(a) => commands::joint(&cli.global, a),
        Command::Feedback(a) => commands::feedback(&cli.global, a),
        Command::Measure(a) => commands::measure(&cli.global, a),
        Command::Decompose(a) => commands::decompose(&cli.global, a),
        Command::Coarsegrain(a) => commands::coarsegrain(&cli.global, a),
        Command::Epsilon(a) => commands::epsilon(&cli.global, a),
        Command::Selftest(a) => commands::selftest(&cli.global, a),
    };
    match result {
        Ok(out) => {
            println!("{}", out.json);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(io::exit_code(&e))
        }
    }
}
