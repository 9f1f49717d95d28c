use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use deltabgp::cli::{cmd_bench, cmd_run, BenchOptions, CliError, RunOptions};
use deltabgp::model::Strictness;
use deltabgp::session::Mode;

#[derive(Parser)]
#[command(
    name = "deltabgp",
    version,
    about = "Continuous basic-graph-pattern evaluation over streaming graph updates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query over an update stream, emitting one delta line per
    /// answer entering (+) or leaving (-) the result set
    Run {
        /// Query file: tab-separated triple patterns, optional OUTPUT line
        #[arg(long)]
        query: PathBuf,
        /// Update stream file, or `-` for standard input
        #[arg(long, default_value = "-")]
        stream: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        /// Fail on duplicate inserts and phantom deletes (default)
        #[arg(long)]
        strict: bool,
        /// Treat duplicate inserts and phantom deletes as no-ops
        #[arg(long, conflicts_with = "strict")]
        lenient: bool,
        /// Append the consolidated answer set after the stream ends
        #[arg(long)]
        consolidated: bool,
    },
    /// Run the selected evaluator and the oracle side by side, assert their
    /// deltas agree, and report throughput
    Bench {
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        #[arg(long)]
        strict: bool,
        #[arg(long, conflicts_with = "strict")]
        lenient: bool,
        /// Number of timed passes over the stream
        #[arg(long, default_value_t = 1)]
        repeat: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Auto,
    Ground,
    Star,
    Loosely,
    General,
    Oracle,
}

impl From<ModeArg> for Mode {
    fn from(arg: ModeArg) -> Mode {
        match arg {
            ModeArg::Auto => Mode::Auto,
            ModeArg::Ground => Mode::Ground,
            ModeArg::Star => Mode::Star,
            ModeArg::Loosely => Mode::Loosely,
            ModeArg::General => Mode::General,
            ModeArg::Oracle => Mode::Oracle,
        }
    }
}

fn strictness(lenient: bool) -> Strictness {
    if lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    }
}

fn main() {
    let cli = Cli::parse();
    let stdout = io::stdout().lock();
    let mut out = BufWriter::new(stdout);
    let result: Result<(), CliError> = match cli.command {
        Command::Run {
            query,
            stream,
            mode,
            strict: _,
            lenient,
            consolidated,
        } => {
            let opts = RunOptions {
                query_path: query,
                stream_path: (stream != "-").then(|| PathBuf::from(stream)),
                mode: mode.into(),
                strictness: strictness(lenient),
                consolidated,
            };
            cmd_run(&opts, &mut out)
        }
        Command::Bench {
            query,
            stream,
            mode,
            strict: _,
            lenient,
            repeat,
        } => {
            let opts = BenchOptions {
                query_path: query,
                stream_path: stream,
                mode: mode.into(),
                strictness: strictness(lenient),
                repeat,
            };
            cmd_bench(&opts, &mut out)
        }
    };
    if let Err(e) = result.and_then(|()| out.flush().map_err(CliError::from)) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
