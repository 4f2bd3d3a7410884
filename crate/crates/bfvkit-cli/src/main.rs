use std::path::PathBuf;
use std::process::ExitCode;

use bfvkit_cli::report::emit;
use bfvkit_cli::{execute, Invocation, Overrides, Suite, Target};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Verify graded algebra, BFV and lattice-gravity identities.
#[derive(Parser, Debug)]
#[command(name = "bfvkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact checks.
    Verify {
        what: Exact,
        #[command(flatten)]
        opts: Opts,
    },
    /// Convergence studies on the periodic lattice.
    Lattice {
        what: Study,
        #[command(flatten)]
        opts: Opts,
    },
    /// Every suite the model configures.
    Report {
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Exact {
    Algebra,
    Bfv,
    Toy,
    Formal,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Study {
    Brackets,
    Q0defect,
    Anchor,
    Curvature,
}

#[derive(Args, Debug)]
struct Opts {
    /// Model file (TOML).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Grid sizes, e.g. 8,16,32.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed finite-difference step instead of the sweep.
    #[arg(long)]
    fd_step: Option<f64>,
    /// Odd parameters for the ghost expansion.
    #[arg(long)]
    k: Option<usize>,
    /// Directory for summary.json, transcript.txt, CSV tables and traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON summary instead of the transcript.
    #[arg(long)]
    json: bool,
    /// Run only these checks (repeatable).
    #[arg(long)]
    check: Vec<String>,
    /// Record wall-clock time per check (makes reports non-reproducible).
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (target, command, opts) = match cli.command {
        Command::Verify { what, opts } => {
            let s = match what {
                Exact::Algebra => Suite::Algebra,
                Exact::Bfv => Suite::Bfv,
                Exact::Toy => Suite::Toy,
                Exact::Formal => Suite::Formal,
            };
            (Target::Suites(vec![s]), format!("verify {}", s.name()), opts)
        }
        Command::Lattice { what, opts } => {
            let s = match what {
                Study::Brackets => Suite::Brackets,
                Study::Q0defect => Suite::Q0Defect,
                Study::Anchor => Suite::Anchor,
                Study::Curvature => Suite::Curvature,
            };
            (Target::Suites(vec![s]), format!("lattice {}", s.name()), opts)
        }
        Command::Report { opts } => (Target::Report, "report".to_string(), opts),
    };
    let inv = Invocation {
        command,
        model: opts.model,
        overrides: Overrides {
            n: opts.n,
            seed: opts.seed,
            fd_step: opts.fd_step,
            k: opts.k,
            checks: opts.check,
            timing: opts.timing,
        },
    };
    let (summary, outcome) = match execute(&target, &inv) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(dir) = &opts.out {
        if let Err(e) = emit(dir, &summary, &outcome) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    if opts.json {
        print!("{}", summary.json());
    } else {
        print!("{}", summary.transcript());
    }
    if summary.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
