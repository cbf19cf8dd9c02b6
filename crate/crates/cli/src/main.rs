use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qmzi_core::fock::{CutoffPolicy, Sign, DEFAULT_MAX_CUTOFF};
use qmzi_core::oracle::{GridConfig, GOLDEN_DRIFT_TOL};
use qmzi_core::sweep::{self, CommandKind, OutputFormat, SweepAxis, SweepRequest};
use qmzi_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;

/// Phase sensitivity sweeps for a Mach-Zehnder interferometer fed with
/// photon-subtracted squeezed vacuum.
#[derive(Parser, Debug)]
#[command(name = "qmzi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// QCR bound of subtracted pairs against the SMSV pair, with HL/SQL references.
    Qcr(PairSweep),
    /// QCR bound of one subtracted channel combined with an SMSV.
    QcrOneSided(OneSidedSweep),
    /// Gain of subtracted pairs over the one-sided and SMSV inputs, in dB.
    Gain(PairSweep),
    /// Intensity-difference detection sensitivity over phase or squeezing.
    Intensity(IntensitySweep),
    /// Photon statistics and leading amplitudes of heralded states (JSON).
    StateInfo(StateInfo),
    /// Cross-check the closed forms against the Fock-space oracle.
    Verify(Verify),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Args, Debug)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct SAxis {
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    s_db_start: f64,
    #[arg(long, default_value_t = 30.0, allow_negative_numbers = true)]
    s_db_stop: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    s_db_step: f64,
}

impl SAxis {
    fn axis(&self) -> SweepAxis {
        SweepAxis::s_db(self.s_db_start, self.s_db_stop, self.s_db_step)
    }
}

#[derive(Args, Debug)]
struct PairSweep {
    #[command(flatten)]
    axis: SAxis,
    /// Comma-separated beam-splitter transmittances.
    #[arg(long, default_value = "0.8,0.9,0.95")]
    t: String,
    /// Subtraction pairs as "n1,n2;n1,n2;...".
    #[arg(long, default_value = "2,2;4,4;10,10;4,1;8,3;10,6")]
    pairs: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct OneSidedSweep {
    #[command(flatten)]
    axis: SAxis,
    #[arg(long, default_value = "0.8,0.9,0.95")]
    t: String,
    /// Comma-separated subtraction counts of the heralded channel.
    #[arg(long, default_value = "2,4,8,10")]
    n_list: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct IntensitySweep {
    #[command(flatten)]
    axis: SAxis,
    /// Sweep the phase instead of the squeezing.
    #[arg(long)]
    phase_sweep: bool,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    phase_start: f64,
    #[arg(long, default_value_t = PI, allow_negative_numbers = true)]
    phase_stop: f64,
    #[arg(long, default_value_t = PI / 100.0, allow_negative_numbers = true)]
    phase_step: f64,
    /// Phase held fixed during a squeezing sweep.
    #[arg(long, default_value_t = FRAC_PI_2, allow_negative_numbers = true)]
    phase: f64,
    /// Squeezing (dB) held fixed during a phase sweep.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    s_db: f64,
    #[arg(long, default_value = "0.8,0.9,0.95")]
    t: String,
    #[arg(long, default_value = "4,1;8,3;10,6;10,0")]
    pairs: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct StateInfo {
    #[arg(long, allow_negative_numbers = true)]
    s_db: f64,
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    t: f64,
    #[arg(long, default_value = "0,1,2,3,4")]
    n_list: String,
    /// Use the squeezing phase opposite to the default.
    #[arg(long)]
    minus: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_CUTOFF)]
    max_cutoff: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Verify {
    /// Largest subtraction count on the grid.
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    /// Largest ancilla outcome checked for completeness.
    #[arg(long, default_value_t = 6)]
    max_outcome: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_CUTOFF)]
    max_cutoff: usize,
    /// Squeezing amplitudes (not dB), comma-separated.
    #[arg(long)]
    s_list: Option<String>,
    /// Comma-separated transmittances.
    #[arg(long)]
    t: Option<String>,
    /// Write the golden file (same as --golden-write).
    #[arg(long)]
    golden: Option<PathBuf>,
    #[arg(long)]
    golden_write: Option<PathBuf>,
    #[arg(long)]
    golden_compare: Option<PathBuf>,
    #[arg(long, default_value_t = GOLDEN_DRIFT_TOL)]
    golden_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(Error),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(Error::from)?;
            stdout.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn run_table(req: SweepRequest, output: &Output) -> Result<(), Failure> {
    let table = sweep::run_sweep(&req)?;
    emit(&table.render(output.format.into())?, output.out.as_ref())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Qcr(a) => {
            let mut req = SweepRequest::new(CommandKind::Qcr, a.axis.axis());
            req.transmittances = sweep::parse_list(&a.t, "transmittance")?;
            req.pairs = sweep::parse_pairs(&a.pairs)?;
            run_table(req, &a.output)
        }
        Command::Gain(a) => {
            let mut req = SweepRequest::new(CommandKind::Gain, a.axis.axis());
            req.transmittances = sweep::parse_list(&a.t, "transmittance")?;
            req.pairs = sweep::parse_pairs(&a.pairs)?;
            run_table(req, &a.output)
        }
        Command::QcrOneSided(a) => {
            let mut req = SweepRequest::new(CommandKind::QcrOneSided, a.axis.axis());
            req.transmittances = sweep::parse_list(&a.t, "transmittance")?;
            req.n_list = sweep::parse_list(&a.n_list, "n")?;
            run_table(req, &a.output)
        }
        Command::Intensity(a) => {
            let axis = if a.phase_sweep {
                SweepAxis::phase(a.phase_start, a.phase_stop, a.phase_step)
            } else {
                a.axis.axis()
            };
            let mut req = SweepRequest::new(CommandKind::Intensity, axis);
            req.transmittances = sweep::parse_list(&a.t, "transmittance")?;
            req.pairs = sweep::parse_pairs(&a.pairs)?;
            req.phase = a.phase;
            req.s_db = a.s_db;
            run_table(req, &a.output)
        }
        Command::StateInfo(a) => {
            let policy = CutoffPolicy {
                max_cutoff: a.max_cutoff,
                ..CutoffPolicy::default()
            };
            let n_list: Vec<usize> = sweep::parse_list(&a.n_list, "n")?;
            let sign = if a.minus { Sign::Minus } else { Sign::Plus };
            let value = sweep::cmd_state_info(a.s_db, a.t, &n_list, sign, &policy)?;
            emit(&sweep::to_pretty_json(&value)?, a.out.as_ref())
        }
        Command::Verify(a) => {
            let mut grid = GridConfig {
                max_n: a.max_n,
                max_outcome: a.max_outcome,
                ..GridConfig::default()
            };
            grid.policy.max_cutoff = a.max_cutoff;
            if let Some(s) = &a.s_list {
                grid.squeezing = sweep::parse_list(s, "squeezing")?;
            }
            if let Some(t) = &a.t {
                grid.transmittances = sweep::parse_list(t, "transmittance")?;
            }
            let write = a.golden_write.as_deref().or(a.golden.as_deref());
            let outcome =
                sweep::cmd_verify(&grid, write, a.golden_compare.as_deref(), a.golden_tol)?;
            emit(&outcome.report, a.out.as_ref())?;
            if outcome.passed {
                Ok(())
            } else {
                Err(Failure::Verification)
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("qmzi: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verification) => {
            eprintln!("qmzi: verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
