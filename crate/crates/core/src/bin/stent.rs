use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stationary_entanglement::boundary::{find_transition, loss_study, sweep, universality_study};
use stationary_entanglement::config::Config;
use stationary_entanglement::covariance::{build_covariance, TemporalModeBasis};
use stationary_entanglement::entanglement::{ppt_verdict, PptTolerances};
use stationary_entanglement::montecarlo::{simulate_covariance, SimulationSettings};
use stationary_entanglement::output::{spectra_table, write_records, write_spectra, Format, Record};
use stationary_entanglement::{Error, Result};

#[derive(Parser)]
#[command(name = "stent", version, about = "Stationary oscillator–light entanglement")]
struct Cli {
    /// Configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Worker threads for sweeps and studies.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the time-domain simulation cross-check (`verdict` only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Decide a single configuration.
    Verdict {
        /// Also write the covariance matrix as text.
        #[arg(long)]
        covariance: Option<PathBuf>,
    },
    /// Locate the transition along one sensing-noise ray.
    Transition,
    /// Verdicts on the sweep.omega_F × sweep.omega_S grid.
    Sweep,
    /// Transition for every sweep.omega_q.
    Universality,
    /// Transition for every sweep.eta × sweep.omega_q.
    Loss,
    /// SQL-referred noise spectra on the sweep frequency grid.
    Spectra,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stent: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("threads: {e}")))?;
    }
    let config = match &cli.config {
        Some(path) => Config::from_file(path).map_err(|e| match e {
            Error::Io(io) => Error::Config {
                line: 0,
                message: format!("{}: {io}", path.display()),
            },
            other => other,
        })?,
        None => Config::default(),
    };
    let format = match cli.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Records => Format::Records,
    };
    let mut out: Box<dyn Write> = match &cli.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };

    match &cli.command {
        Command::Verdict { covariance } => {
            let p = config.plant()?;
            let noise = config.noise()?;
            let s = config.input()?.resolve(&p)?;
            let basis = match config.tau()? {
                Some(t) => TemporalModeBasis::new(config.modes()?, t)?,
                None => TemporalModeBasis::auto(config.modes()?, &p, &noise)?,
            };
            let cov = build_covariance(&p, &noise, &s, &basis, &config.engine()?)?;
            let v = ppt_verdict(&cov, &PptTolerances::default())?;
            if let Some(path) = covariance {
                std::fs::write(path, cov.to_text())?;
            }
            if let Some(seed) = cli.seed {
                let settings = SimulationSettings {
                    seed,
                    ..SimulationSettings::default()
                };
                let sample = simulate_covariance(&p, &noise, &s, &basis, &settings)?;
                eprintln!(
                    "time-domain check: max |ΔV|/SE = {:.3} over {} trajectories",
                    sample.max_z(&cov.v),
                    sample.trajectories
                );
            }
            write_records(&mut out, &[Record::from_verdict("verdict-0", &p, &s, &noise, &basis, &v)], format)?;
        }
        Command::Transition => {
            let spec = config.sweep_spec()?;
            let b = find_transition(&spec)?;
            eprintln!(
                "transition at {:.6} after {} bisection steps; verified: {}{}",
                b.value,
                b.iterations,
                b.verified,
                b.doubling_shift()
                    .map_or(String::new(), |d| format!("; doubled-N shift {:.3e}", d))
            );
            write_records(&mut out, &[Record::from_boundary("transition-0", &spec.plant, &b)], format)?;
        }
        Command::Sweep => {
            let settings = config.sweep_settings()?;
            let ofs = config.sweep_list("sweep.omega_F")?;
            let oss = config.sweep_list("sweep.omega_S")?;
            let input = settings.input.resolve(&settings.plant).ok();
            let points = sweep(&ofs, &oss, &settings);
            let records: Vec<Record> = points
                .iter()
                .map(|pt| Record::from_sweep(format!("sweep-{}-{}", pt.index.0, pt.index.1), &settings.plant, input, pt))
                .collect();
            write_records(&mut out, &records, format)?;
        }
        Command::Universality => {
            let spec = config.sweep_spec()?;
            let oqs = config.sweep_list("sweep.omega_q")?;
            let u = universality_study(&oqs, &spec)?;
            eprintln!("relative boundary spread {:.4e}", u.spread);
            let records: Vec<Record> = u
                .points
                .iter()
                .enumerate()
                .map(|(i, b)| Record::from_boundary(format!("universality-{i}"), &spec.plant, b))
                .collect();
            write_records(&mut out, &records, format)?;
        }
        Command::Loss => {
            let spec = config.sweep_spec()?;
            let etas = config.sweep_list("sweep.eta")?;
            let oqs = config.sweep_list("sweep.omega_q")?;
            let mut records = Vec::new();
            for (i, (eta, u)) in loss_study(&etas, &oqs, &spec)?.into_iter().enumerate() {
                eprintln!("eta {eta}: relative boundary spread {:.4e}", u.spread);
                let plant = spec.plant.with_eta(eta)?;
                for (j, b) in u.points.iter().enumerate() {
                    records.push(Record::from_boundary(format!("loss-{i}-{j}"), &plant, b));
                }
            }
            write_records(&mut out, &records, format)?;
        }
        Command::Spectra => {
            let p = config.plant()?;
            let noise = config.noise()?;
            let s = config.input()?.resolve(&p)?;
            let (lo, hi, n) = config.spectra_grid()?;
            let grid = stationary_entanglement::boundary::log_grid(lo, hi, n);
            let rows = spectra_table(&p, &noise, &s, &grid)?;
            write_spectra(&mut out, s.kind(), &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}
