use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use superres::montecarlo::McConfig;
use superres::SceneParams;
use superres_cli::figures::{figure, preset};
use superres_cli::grid::{cfi_sweep, qfi_sweep, ratio_map};
use superres_cli::reports::{default_oracle_panel, mc_validate, oracle_check, parse_points, to_json, Corruption, OracleSettings};
use superres_cli::sweep::{parse_fixed, Axis, Output, Overrides, SweepSpec};
use superres_cli::table::{emit, Table};
use superres_cli::{init_threads, CliResult};

#[derive(Parser)]
#[command(name = "superres", version, about = "Fisher-information limits for resolving two thermal point sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantum Fisher information over a parameter grid (CSV)
    QfiSweep(SweepArgs),
    /// Mode-sorting classical Fisher bound over a parameter grid (CSV)
    CfiSweep(SweepArgs),
    /// Ratio of the mode-sorting bound to the QFI (CSV)
    RatioMap(SweepArgs),
    /// Compare the closed-form QFI against the Fock-space oracle (JSON)
    OracleCheck(OracleArgs),
    /// Sample photocounts and test the analytic moments (JSON)
    McValidate(McArgs),
    /// Regenerate the data of a figure preset: 1a, 1b, 1c, 1d or 2 (CSV)
    Figure {
        name: String,
        #[command(flatten)]
        sweep: SweepArgs,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep description (JSON); flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Axis as param=log|linear:min:max:points or param=v1,v2,...
    #[arg(long = "axis")]
    axes: Vec<String>,
    /// Fixed parameter as param=value
    #[arg(long = "fix")]
    fixed: Vec<String>,
    /// Comma-separated outputs: qfi-closed, qfi-solver, asymptotics, normalized, cfi, ratio
    #[arg(long, value_delimiter = ',')]
    outputs: Option<Vec<String>>,
    /// Number of Hermite-Gaussian modes
    #[arg(long)]
    q_modes: Option<usize>,
    /// Output file (stdout if absent)
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl SweepArgs {
    fn resolve(&self, base: Option<SweepSpec>) -> CliResult<SweepSpec> {
        let base = match (&self.config, base) {
            (Some(path), _) => SweepSpec::from_json(&fs::read_to_string(path)?)?,
            (None, Some(b)) => b,
            (None, None) => SweepSpec::default(),
        };
        let outputs = match &self.outputs {
            Some(names) => Some(names.iter().map(|n| Output::parse(n)).collect::<CliResult<Vec<_>>>()?),
            None => None,
        };
        let o = Overrides {
            axes: self.axes.iter().map(|a| Axis::parse(a)).collect::<CliResult<_>>()?,
            fixed: self.fixed.iter().map(|f| parse_fixed(f)).collect::<CliResult<_>>()?,
            outputs,
            q_modes: self.q_modes,
            output: self.output.clone(),
        };
        Ok(base.apply(o))
    }
}

#[derive(Args)]
struct OracleArgs {
    /// JSON array of {s, eta_n_s, n_n[, sigma, eta]}; default is the built-in six-point panel
    #[arg(long)]
    points: Option<PathBuf>,
    /// Per-mode Fock dimension; 0 picks the smallest one meeting --tail-bound
    #[arg(long, default_value_t = 30)]
    cutoff: usize,
    #[arg(long, default_value_t = 1e-4)]
    fd_step: f64,
    /// Largest thermal probability mass allowed beyond the cutoff
    #[arg(long, default_value_t = 1e-7)]
    tail_bound: f64,
    /// Largest accepted relative disagreement
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 2.0)]
    s: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    #[arg(long, default_value_t = 0.5)]
    eta_n_s: f64,
    #[arg(long, default_value_t = 0.05)]
    n_n: f64,
    #[arg(long, default_value_t = 0.0)]
    dark: f64,
    #[arg(long, default_value_t = 8)]
    modes: usize,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Scale analytic C[q][q2] by factor before scoring (q,q2,factor)
    #[arg(long, hide = true)]
    corrupt_c: Option<String>,
}

fn write_table(t: &Table, spec: &SweepSpec) -> CliResult<()> {
    emit(&t.to_csv(), spec.output.as_deref())
}

fn run(cli: Cli) -> CliResult<bool> {
    init_threads()?;
    match cli.command {
        Command::QfiSweep(a) => {
            let spec = a.resolve(None)?;
            write_table(&qfi_sweep(&spec)?, &spec)?;
        }
        Command::CfiSweep(a) => {
            let spec = a.resolve(None)?;
            write_table(&cfi_sweep(&spec)?, &spec)?;
        }
        Command::RatioMap(a) => {
            let spec = a.resolve(None)?;
            write_table(&ratio_map(&spec)?, &spec)?;
        }
        Command::Figure { name, sweep } => {
            let spec = sweep.resolve(Some(preset(&name)?))?;
            write_table(&figure(&name, &spec)?, &spec)?;
        }
        Command::OracleCheck(a) => {
            let points = match &a.points {
                Some(path) => parse_points(&fs::read_to_string(path)?)?,
                None => default_oracle_panel(),
            };
            let settings = OracleSettings {
                cutoff: (a.cutoff > 0).then_some(a.cutoff),
                fd_step: a.fd_step,
                tail_bound: a.tail_bound,
                tolerance: a.tolerance,
            };
            let report = oracle_check(&points, settings);
            emit(&to_json(&report)?, a.output.as_deref())?;
            return Ok(report.pass);
        }
        Command::McValidate(a) => {
            let p = SceneParams::from_signal(a.s, a.sigma, a.eta, a.eta_n_s, a.n_n).with_dark(a.dark);
            let cfg = McConfig::new(p, a.modes, a.samples, a.seed)?;
            let corruption = a.corrupt_c.as_deref().map(Corruption::parse).transpose()?;
            let report = mc_validate(&cfg, corruption)?;
            emit(&to_json(&report)?, a.output.as_deref())?;
            return Ok(report.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; --help and --version are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("superres: validation failed; see report");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("superres: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
