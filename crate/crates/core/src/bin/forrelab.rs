//! Command-line front end: instance generation, Forrelation reports, and
//! the seeded experiment suite. Exit code 0 means every checked bound
//! passed, 1 means a bound failed, 2 means the invocation or configuration
//! was invalid.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use forrelab::harness::{run_experiment, run_suite, ExperimentConfig, ExperimentReport};
use forrelab::instances::{
    check_strong, parse_instance, sample_strong, serialize_instance, spectral_forrelation,
    StrongParams,
};
use forrelab::rng::{labels, stream_rng};

#[derive(Parser)]
#[command(
    name = "forrelab",
    about = "Desk-scale numerical laboratory for spectral Forrelation",
    after_help = "The environment variable FORRELAB_ENUM_CAP overrides the \
                  Fock-sector enumeration cap (default 200000)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// Human-readable lines.
    Text,
    /// Machine-readable JSON record.
    Record,
}

#[derive(Args)]
struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<std::path::PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a strong (S, U) instance and print its record.
    Gen {
        /// Bit width of the oracle inputs.
        #[arg(long)]
        n: u32,
        /// Multiset size.
        #[arg(long)]
        ell: usize,
        /// Strong-distribution strength.
        #[arg(long, default_value_t = 0.1)]
        kappa: f64,
        /// Stream seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Spectral Forrelation and optimal witness of an instance file.
    Forrelation {
        /// Instance record produced by `gen`.
        file: std::path::PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Strong yes-instance certification of an instance file.
    VerifyStrong {
        /// Instance record produced by `gen`.
        file: std::path::PathBuf,
        /// Largest Delta size examined.
        #[arg(long, default_value_t = 2)]
        v: usize,
        /// Subset budget before switching to sampling.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// Stream seed for subset sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Run one experiment (E1-E9).
    Verify {
        /// Experiment identifier.
        id: String,
        /// Stream seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        v: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        /// Total query count T.
        #[arg(long = "T")]
        big_t: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        /// Outer condensate radius R.
        #[arg(long = "R")]
        big_r: Option<usize>,
        #[arg(long)]
        o: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Run all experiments at their desk-scale defaults.
    Suite {
        /// Stream seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
}

fn emit(output: &Output, text: String, record: String) -> Result<(), String> {
    let body = match output.format {
        Format::Text => text,
        Format::Record => record,
    };
    match &output.out {
        Some(path) => fs::write(path, body).map_err(|e| format!("writing {path:?}: {e}")),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn report_exit(reports: &[ExperimentReport]) -> ExitCode {
    if reports.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Gen { n, ell, kappa, seed, output } => {
            let inst = sample_strong(&StrongParams { n, ell, kappa, seed })
                .map_err(|e| e.to_string())?;
            let record = serialize_instance(&inst);
            let text = format!(
                "n={} ell={} kappa={} seed={} |U|={}\n{record}",
                n,
                ell,
                kappa,
                seed,
                inst.u().len()
            );
            emit(&output, text, record)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Forrelation { file, output } => {
            let body = fs::read_to_string(&file).map_err(|e| format!("reading {file:?}: {e}"))?;
            let inst = parse_instance(&body).map_err(|e| e.to_string())?;
            let (alpha, witness) = spectral_forrelation(&inst).map_err(|e| e.to_string())?;
            let record = serde_json::json!({ "alpha": alpha, "witness": witness }).to_string();
            let support: Vec<String> = witness
                .iter()
                .enumerate()
                .filter(|(_, a)| a.abs() > 1e-12)
                .map(|(x, a)| format!("{x}:{a:.6}"))
                .collect();
            let text = format!("alpha={alpha:.9}\nwitness: {}", support.join(" "));
            emit(&output, text, record)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyStrong { file, v, budget, seed, output } => {
            let body = fs::read_to_string(&file).map_err(|e| format!("reading {file:?}: {e}"))?;
            let inst = parse_instance(&body).map_err(|e| e.to_string())?;
            let mut rng = stream_rng(seed, labels::DELTA);
            let report = check_strong(&inst, v, budget, &mut rng).map_err(|e| e.to_string())?;
            let record = serde_json::to_string(&report).map_err(|e| e.to_string())?;
            let text = format!(
                "alpha={:.9} completeness={:.9} soundness_worst={:.9} ({} Deltas, v={})\n\
                 t1={:.6} t2={:.6} rho={:.6} vacuous={}",
                report.alpha,
                report.completeness,
                report.soundness_worst,
                report.deltas_tested,
                report.v,
                report.t1,
                report.t2,
                report.rho,
                report.vacuous_regime
            );
            emit(&output, text, record)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            id,
            seed,
            n,
            ell,
            kappa,
            v,
            t,
            big_t,
            r,
            big_r,
            o,
            d,
            trials,
            output,
        } => {
            let mut cfg = ExperimentConfig::defaults(&id, seed).map_err(|e| e.to_string())?;
            macro_rules! apply {
                ($($field:ident),*) => { $( if let Some(x) = $field { cfg.$field = x; } )* };
            }
            apply!(n, ell, kappa, v, t, big_t, r, big_r, o, d, trials);
            let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
            let record = serde_json::to_string(&report).map_err(|e| e.to_string())?;
            let text = report.text();
            emit(&output, text, record)?;
            Ok(report_exit(std::slice::from_ref(&report)))
        }
        Command::Suite { seed, output } => {
            let reports = run_suite(seed).map_err(|e| e.to_string())?;
            let record = serde_json::to_string(&reports).map_err(|e| e.to_string())?;
            let text: String = reports.iter().map(|r| r.text()).collect();
            emit(&output, text, record)?;
            Ok(report_exit(&reports))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
