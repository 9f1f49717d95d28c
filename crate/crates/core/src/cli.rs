//! Command implementations behind the `deltabgp` binary.
//!
//! `run` evaluates one query over an update stream, writing one delta line
//! per emitted answer in stream order; `bench` runs the selected evaluator
//! and the oracle side by side, asserts per-update delta equality, and
//! reports throughput and peak cached-state sizes.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::io::{
    answer_line, delta_line, parse_query, parse_stream, parse_update_line, ParseError,
    ParseErrorKind,
};
use crate::model::{Answer, Sign, Strictness};
use crate::session::{open_session, Mode, Session, SessionError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Session(#[from] SessionError),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: io::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bench: evaluator and oracle deltas diverge at t={time}")]
    BenchMismatch { time: u64 },
}

impl CliError {
    /// Exit codes: 2 parse error, 3 class mismatch, 4 assumption violation,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Session(SessionError::ClassMismatch(_)) => 3,
            CliError::Session(SessionError::Assumption(_)) => 4,
            CliError::Session(SessionError::OutOfOrderTimestamp { .. }) => 2,
            _ => 1,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::File {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub query_path: PathBuf,
    /// `None` reads the stream from standard input.
    pub stream_path: Option<PathBuf>,
    pub mode: Mode,
    pub strictness: Strictness,
    /// Append the consolidated answer set after the stream ends.
    pub consolidated: bool,
}

/// Streams delta lines for one query. Updates are processed line by line, so
/// output order equals input update order and the command works as a filter
/// on standard input.
pub fn cmd_run(opts: &RunOptions, out: &mut impl Write) -> Result<(), CliError> {
    let query = parse_query(&read_file(&opts.query_path)?)?;
    let mut session = open_session(query, opts.mode, opts.strictness)?;
    match &opts.stream_path {
        Some(path) => {
            let file = fs::File::open(path).map_err(|source| CliError::File {
                path: path.clone(),
                source,
            })?;
            run_stream(BufReader::new(file), &mut session, out)?;
        }
        None => run_stream(io::stdin().lock(), &mut session, out)?,
    }
    if opts.consolidated {
        writeln!(out, "== ANSWERS ==")?;
        for a in session.consolidated() {
            writeln!(out, "{}", answer_line(a))?;
        }
    }
    Ok(())
}

fn run_stream(
    reader: impl BufRead,
    session: &mut Session,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let mut last_time: Option<u64> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let u = parse_update_line(&line, i + 1)?;
        if last_time.is_some_and(|last| u.time <= last) {
            return Err(ParseError {
                line: i + 1,
                kind: ParseErrorKind::NonMonotonicTime,
            }
            .into());
        }
        last_time = Some(u.time);
        for d in session.feed(&u)? {
            writeln!(out, "{}", delta_line(&d))?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub query_path: PathBuf,
    pub stream_path: PathBuf,
    pub mode: Mode,
    pub strictness: Strictness,
    /// Timed passes over the stream; the correctness pass is separate.
    pub repeat: u32,
}

/// Checks the selected evaluator against the oracle update by update, then
/// times evaluator-only passes. Prints `MATCH` plus a tab-separated summary,
/// or `MISMATCH` and fails.
pub fn cmd_bench(opts: &BenchOptions, out: &mut impl Write) -> Result<(), CliError> {
    let query = parse_query(&read_file(&opts.query_path)?)?;
    let updates = parse_stream(&read_file(&opts.stream_path)?)?;

    let mut session = open_session(query.clone(), opts.mode, opts.strictness)?;
    let mut oracle = open_session(query.clone(), Mode::Oracle, opts.strictness)?;
    let oracle_start = Instant::now();
    for u in &updates {
        let got = session.feed(u)?;
        let expected = oracle.feed(u)?;
        if signed_set(&got) != signed_set(&expected) {
            writeln!(out, "MISMATCH\t{}", u.time)?;
            return Err(CliError::BenchMismatch { time: u.time });
        }
    }
    let oracle_elapsed = oracle_start.elapsed();
    writeln!(out, "MATCH")?;

    let peak_state = session.stats().peak_dynamic_state + session.fixed_state_size();
    let oracle_peak = oracle.stats().peak_dynamic_state;
    let repeats = opts.repeat.max(1);
    let mut elapsed = Duration::ZERO;
    for _ in 0..repeats {
        let mut timed = open_session(query.clone(), opts.mode, opts.strictness)?;
        let start = Instant::now();
        for u in &updates {
            timed.feed(u)?;
        }
        elapsed += start.elapsed();
    }
    let rate = |n: usize, d: Duration| n as f64 / d.as_secs_f64().max(1e-9);
    writeln!(
        out,
        "updates\t{}\trepeats\t{}\tmode\t{}\tupdates_per_sec\t{:.1}\tpeak_state\t{}\toracle_updates_per_sec\t{:.1}\toracle_peak_state\t{}",
        updates.len(),
        repeats,
        opts.mode,
        rate(updates.len() * repeats as usize, elapsed),
        peak_state,
        rate(updates.len(), oracle_elapsed),
        oracle_peak,
    )?;
    Ok(())
}

/// Sign-tagged answer set for order-insensitive delta comparison. The
/// evaluators never emit duplicates, so set comparison is exact.
fn signed_set(deltas: &[crate::model::DeltaAnswer]) -> BTreeSet<(bool, &Answer)> {
    deltas
        .iter()
        .map(|d| (d.sign == Sign::Positive, &d.answer))
        .collect()
}
