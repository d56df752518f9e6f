mod commands;
mod config;
mod error;
mod rundir;

use clap::Parser;
use commands::{combine_exit, memory_guard, run, Command, Outcome};
use config::{parse_sweep, RunConfig};
use error::{CliError, EXIT_USAGE};
use rundir::{f, write_csv, write_json, RunDir};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

const THREADS_ENV: &str = "BOSONLAB_THREADS";

/// Exact diagonalization and bound checks for interacting bosons.
///
/// Exit codes: 0 all checks pass, 1 a bound is violated, 2 only hypothesis
/// failures, 3 usage or configuration error.
#[derive(Parser, Debug)]
#[command(name = "bosonlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (also read from BOSONLAB_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Suite checks to run; repeatable. `all` runs every check.
    #[arg(long)]
    check: Vec<String>,
    /// Site for the tail command; overrides tail.site.
    #[arg(long)]
    site: Option<usize>,
    /// Parameter sweep: `key=a:b:n` or `key=v1,v2,...`, e.g. `model.j=0.1:0.5:5`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: Command,
    versions: BTreeMap<&'static str, &'static str>,
    config: &'a RunConfig,
    exit_code: i32,
    error: Option<String>,
    #[serde(flatten)]
    outcome: &'a Outcome,
    timings: &'a BTreeMap<String, f64>,
}

fn versions() -> BTreeMap<&'static str, &'static str> {
    // library and driver share the workspace version
    BTreeMap::from([("bosonlab", env!("CARGO_PKG_VERSION"))])
}

/// Runs one command into `dir`, always leaving a manifest behind.
fn run_once(cmd: Command, cfg: &RunConfig, dir: &Path) -> Result<(i32, Outcome), CliError> {
    let mut out = Outcome::default();
    let res = memory_guard(cmd, cfg).and_then(|_| run(cmd, cfg, dir, &mut out));
    let (code, error) = match &res {
        Ok(()) => (out.exit_code(), None),
        Err(e) => (combine_exit([e.exit_code(), out.exit_code()]), Some(e.to_string())),
    };
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let timings = out.timings.clone();
    let manifest = RunManifest { command: cmd, versions: versions(), config: cfg, exit_code: code, error, outcome: &out, timings: &timings };
    write_json(&dir.join("manifest.json"), &manifest)?;
    if let Err(e) = res {
        eprintln!("error: {e}");
    }
    Ok((code, out))
}

fn run_sweep(cmd: Command, cfg: &RunConfig, run: &RunDir, key: &str, values: &[String]) -> Result<i32, CliError> {
    let mut results = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let dir = run.subdir(&format!("sweep_{i:03}"))?;
        let (code, out) = match cfg.with_override(key, v) {
            Ok(c) => run_once(cmd, &c, &dir)?,
            Err(e) => {
                eprintln!("error: {e}");
                (e.exit_code(), Outcome::default())
            }
        };
        results.push((v.clone(), code, out.metrics));
    }
    let keys: BTreeSet<String> = results.iter().flat_map(|r| r.2.keys().cloned()).collect();
    let mut header = vec!["index", key, "exit_code"];
    header.extend(keys.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(i, (v, c, m))| {
            let mut r = vec![i.to_string(), v.clone(), c.to_string()];
            r.extend(keys.iter().map(|k| m.get(k).map(|&x| f(x)).unwrap_or_default()));
            r
        })
        .collect();
    write_csv(&run.path().join("sweep.csv"), &header, &rows)?;
    Ok(combine_exit(results.iter().map(|r| r.1)))
}

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => Some(s.parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV}={s} is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn real_main(cli: Cli) -> Result<i32, CliError> {
    configure_threads(cli.threads)?;
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.solver.seed = s;
    }
    if let Some(s) = cli.site {
        cfg.tail.site = s;
    }
    if !cli.check.is_empty() {
        cfg.suite.checks = cli.check.clone();
    }
    cfg.validate()?;
    let sweep = cli.sweep.as_deref().map(parse_sweep).transpose()?;
    let run = RunDir::open(&cli.out)?;
    match sweep {
        Some((key, values)) => run_sweep(cli.command, &cfg, &run, &key, &values),
        None => Ok(run_once(cli.command, &cfg, run.path())?.0),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            std::process::exit(code);
        }
    };
    let code = match real_main(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
