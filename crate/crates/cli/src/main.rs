use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parabolic_cli::{run, Command, Options};
use parabolic_core::series::Mode;

/// Invariants, blow-ups and parabolic curves of germs tangent to the identity.
#[derive(Parser)]
#[command(name = "parabolic", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Order, pure order, characteristic directions and regularity.
    Analyze(Common),
    /// Residual index along a direction.
    Index(Common),
    /// Case of the decision tree and the curve count.
    Classify(Common),
    /// Linear chain of blow-ups and its certificate.
    Chain(Common),
    /// Hard-case normal form and shift ladder.
    Normalize(Common),
    /// Parabolic curves on every petal component, with CSV side files.
    Curve(Common),
    /// As `curve`, plus the empirical estimate checks.
    Validate(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Float,
}

#[derive(Args)]
struct Common {
    /// File with `f1 = ...; f2 = ...` (`-` reads stdin).
    input: Option<PathBuf>,
    /// Germ text given inline instead of a file.
    #[arg(short = 'e', long = "expr", conflicts_with = "input")]
    expr: Option<String>,
    /// Blow-up center `[a:b]`.
    #[arg(long)]
    direction: Option<String>,
    /// Number of linear chain steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Treat the components as series truncated at this degree.
    #[arg(long)]
    trunc: Option<u32>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: ModeArg,
    /// Initial petal size.
    #[arg(long)]
    delta: Option<f64>,
    /// Grid nodes per petal coordinate.
    #[arg(long)]
    grid: Option<usize>,
    /// Laurent depth of the shift ladder.
    #[arg(long)]
    depth: Option<i64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Directory for CSV side files.
    #[arg(long, env = "PARABOLIC_OUT")]
    out: Option<PathBuf>,
    /// The input is already written in an adapted chart.
    #[arg(long)]
    adapted: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, c) = match cli.command {
        Cmd::Analyze(c) => (Command::Analyze, c),
        Cmd::Index(c) => (Command::Index, c),
        Cmd::Classify(c) => (Command::Classify, c),
        Cmd::Chain(c) => (Command::Chain, c),
        Cmd::Normalize(c) => (Command::Normalize, c),
        Cmd::Curve(c) => (Command::Curve, c),
        Cmd::Validate(c) => (Command::Validate, c),
    };
    let text = match (&c.expr, &c.input) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) if p.as_os_str() == "-" => {
            let mut s = String::new();
            if let Err(e) = std::io::stdin().read_to_string(&mut s) {
                eprintln!("parabolic: stdin: {e}");
                return ExitCode::from(1);
            }
            s
        }
        (None, Some(p)) => match std::fs::read_to_string(p) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("parabolic: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        },
        (None, None) => {
            eprintln!("parabolic: give an input file or --expr");
            return ExitCode::from(1);
        }
    };
    let opts = Options {
        command,
        direction: c.direction,
        steps: c.steps,
        trunc: c.trunc,
        mode: match c.mode {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Float => Mode::Float,
        },
        delta: c.delta,
        grid: c.grid,
        depth: c.depth,
        seed: c.seed,
        out: c.out,
        adapted: c.adapted,
    };
    let out = run(&text, &opts);
    print!("{}", out.report.render());
    ExitCode::from(out.code as u8)
}
