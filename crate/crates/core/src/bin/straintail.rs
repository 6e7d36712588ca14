use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use straintail::asymptotics::{approximate_tail, ApproxOptions};
use straintail::config::RunConfig;
use straintail::kernel::{check_assumptions, AssumptionReport, SpectralMoments};
use straintail::rare_event::{compare, write_compare_csv, CompareOptions, LocateOptions, Simulation};
use straintail::solver::solution_closed_form;
use straintail::{Error, Result};

#[derive(Parser)]
#[command(name = "straintail", version, about = "Strain tail probabilities for a random elliptic equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Asymptotic approximation of P(max |v'| > b).
    Approx(Common),
    /// Monte Carlo estimate at `b`.
    Simulate(Common),
    /// Monte Carlo against the approximation over `b_list`.
    Compare(Common),
    /// Histogram of the strain arg-max given exceedance.
    Locate(Common),
    /// Spectral moments and assumption checks for the kernel.
    KernelInfo(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
struct KernelInfo<'a> {
    family: &'a str,
    length_scale: f64,
    moments: SpectralMoments,
    fd_delta: f64,
    fd_a: f64,
    assumptions_passed: bool,
    report: AssumptionReport,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::Numerical(format!("write failed: {e}"));
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
        }
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(io),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn only_json(format: Option<Format>, cmd: &str) -> Result<()> {
    match format {
        Some(Format::Csv) => Err(Error::InvalidInput(format!("{cmd} supports only --format json"))),
        _ => Ok(()),
    }
}

fn csv_string(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    write(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Approx(c) | Command::Simulate(c) | Command::Compare(c) | Command::Locate(c) | Command::KernelInfo(c)) =
        &cli.command;
    let cfg = RunConfig::from_path(&c.config)?;
    let out = c.out.as_deref();
    let approx_opts = ApproxOptions { homo_literal_theorem: cfg.homo_literal_theorem };

    match &cli.command {
        Command::Approx(_) => {
            only_json(c.format, "approx")?;
            let reports = cfg
                .thresholds()?
                .into_iter()
                .map(|b| approximate_tail(b, &cfg.spec, approx_opts))
                .collect::<Result<Vec<_>>>()?;
            if cfg.b_list.is_some() {
                emit(out, &json(&reports))
            } else {
                emit(out, &format!("{}\n", reports[0].to_json()))
            }
        }
        Command::Simulate(_) => {
            only_json(c.format, "simulate")?;
            let b = cfg.threshold()?;
            let sim = Simulation::new(&cfg.spec, cfg.grid_n)?;
            let est = sim.estimate_with(cfg.method, b, cfg.n, cfg.seed, cfg.zeta)?;
            if cfg.dump_paths {
                dump_paths(&cfg, &sim, est.zeta)?;
            }
            emit(out, &json(&est))
        }
        Command::Compare(_) => {
            let rows = compare(
                &cfg.spec,
                &cfg.thresholds()?,
                cfg.n,
                cfg.grid_n,
                cfg.seed,
                CompareOptions { method: Some(cfg.method), approx: approx_opts },
            )?;
            match c.format.unwrap_or(Format::Csv) {
                Format::Csv => emit(out, &csv_string(|buf| write_compare_csv(&rows, buf))),
                Format::Json => emit(out, &json(&rows)),
            }
        }
        Command::Locate(_) => {
            let opts = LocateOptions { rho: cfg.rho, bins: cfg.bins, method: cfg.method, zeta: cfg.zeta };
            let hist = Simulation::new(&cfg.spec, cfg.grid_n)?.locate(cfg.threshold()?, cfg.n, cfg.seed, &opts)?;
            match c.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    emit(out, &csv_string(|buf| hist.write_csv(buf)))?;
                    eprintln!("{}", hist.to_json());
                    Ok(())
                }
                Format::Json => emit(out, &format!("{}\n", hist.to_json())),
            }
        }
        Command::KernelInfo(_) => {
            only_json(c.format, "kernel-info")?;
            let kernel = &cfg.spec.kernel;
            let lags: Vec<f64> = (1..=512).map(|i| cfg.spec.length * i as f64 / 512.0).collect();
            let report = check_assumptions(kernel, &lags)?;
            let (fd_delta, fd_a) = kernel.fd_spectral_moments();
            let info = KernelInfo {
                family: kernel.family_name(),
                length_scale: kernel.length_scale(),
                moments: kernel.raw_moments(),
                fd_delta,
                fd_a,
                assumptions_passed: report.all_passed(),
                report,
            };
            emit(out, &json(&info))
        }
    }
}

fn dump_paths(cfg: &RunConfig, sim: &Simulation, zeta: Option<f64>) -> Result<()> {
    let io =
        |e: std::io::Error| Error::InvalidInput(format!("cannot write path dump to {}: {e}", cfg.dump_dir.display()));
    fs::create_dir_all(&cfg.dump_dir).map_err(io)?;
    for i in 0..cfg.dump_count.min(cfg.n) as u64 {
        let path = sim.replay(cfg.seed, i, zeta)?;
        path.write_csv(fs::File::create(cfg.dump_dir.join(format!("path_{i}.csv"))).map_err(io)?).map_err(io)?;
        let sol = solution_closed_form(&cfg.spec, &path)?;
        sol.write_csv(fs::File::create(cfg.dump_dir.join(format!("solution_{i}.csv"))).map_err(io)?).map_err(io)?;
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("STRAINTAIL_THREADS") else { return Ok(()) };
    let threads: usize =
        v.trim().parse().map_err(|_| Error::InvalidInput(format!("STRAINTAIL_THREADS must be a count, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("straintail: {e}");
            ExitCode::from(if e.is_input() {
                2
            } else if e.is_assumption() {
                3
            } else {
                4
            })
        }
    }
}
