use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polarcap::instances::RatingsDataset;
use polarcap::{Algorithm, Formulation};
use polarcap_cli::inputs::open;
use polarcap_cli::{
    cmd_audit, cmd_ingest, cmd_lowerbound, cmd_optimal, cmd_optimal_sweep, cmd_simulate, cmd_utility, argmax_groups,
    parse_bits, parse_seeds, read_labels, read_log, unit_grid, utility_table, CliError, CliResult, InstanceSource,
    MeansFile, SimulateRequest, SweepSpec, Table, UserSelection,
};

#[derive(Parser)]
#[command(name = "polarcap", version, about = "Polarization-capped recommendation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal profile for one parameter setting, or a sweep over gamma/eta grids.
    Optimal(OptimalArgs),
    /// Regret trajectories of a learner averaged over seeds.
    Simulate(SimulateArgs),
    /// End-of-horizon tax charged on an exposure log.
    Audit(AuditArgs),
    /// Per-user genre means from a ratings dump.
    Ingest(IngestArgs),
    /// Utility of taxed optima relative to the untaxed optimum.
    Utility(UtilityArgs),
    /// Means of a lower-bound instance.
    Lowerbound(LowerboundArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Args)]
struct Output {
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulationArg {
    Naive,
    Form1,
    Form2,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    NUcb,
    RobustUcb,
    PenaltyUcb,
}

#[derive(Args)]
struct OptimalArgs {
    #[arg(long)]
    means: PathBuf,
    #[arg(long, value_enum, default_value = "form1")]
    formulation: FormulationArg,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Radius of the naive formulation.
    #[arg(long, default_value_t = 0.0)]
    delta_naive: f64,
    /// Keep only these arm columns.
    #[arg(long, value_delimiter = ',')]
    arms: Option<Vec<String>>,
    /// Emit one row per grid point instead of a profile.
    #[arg(long)]
    sweep: bool,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    gamma_points: usize,
    /// Eta grid for form2 sweeps (defaults to --eta).
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
    /// `user_id,group` file for per-group averages.
    #[arg(long, conflicts_with = "group_by")]
    labels: Option<PathBuf>,
    /// Group users by their highest-rated arm among these.
    #[arg(long, value_delimiter = ',')]
    group_by: Option<Vec<String>>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, required_unless_present_any = ["lowerbound_bits", "lowerbound_karm"])]
    means: Option<PathBuf>,
    /// Two-arm lower-bound instance, e.g. `0110`.
    #[arg(long, conflicts_with_all = ["means", "lowerbound_karm"])]
    lowerbound_bits: Option<String>,
    /// k-arm lower-bound instance `N,K` or `N,K,SPECIAL`.
    #[arg(long, value_delimiter = ',', conflicts_with = "means")]
    lowerbound_karm: Option<Vec<usize>>,
}

impl InstanceArgs {
    fn source(&self) -> CliResult<InstanceSource> {
        if let Some(bits) = &self.lowerbound_bits {
            return Ok(InstanceSource::TwoArm(parse_bits(bits)?));
        }
        if let Some(v) = &self.lowerbound_karm {
            return karm(v);
        }
        let path = self.means.as_ref().ok_or_else(|| CliError::Usage("an instance is required".into()))?;
        Ok(InstanceSource::Means(MeansFile::load(path)?))
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum)]
    algorithm: AlgorithmArg,
    #[arg(short = 'T', long)]
    horizon: usize,
    /// Comma list or `count@base`.
    #[arg(long, default_value = "1@0")]
    seeds: String,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// Confidence parameter (default 1/(nT)).
    #[arg(long)]
    delta: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AuditArgs {
    /// CSV `t,user,arm`, 0-based.
    #[arg(long)]
    log: PathBuf,
    #[arg(short = 'n', long)]
    n: usize,
    #[arg(short = 'k', long)]
    k: usize,
    #[arg(short = 'T', long)]
    horizon: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    eta: f64,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct IngestArgs {
    /// CSV `user_id,item_id,rating,timestamp`.
    #[arg(long)]
    ratings: PathBuf,
    /// CSV `item_id,genres` with `|`-separated genres.
    #[arg(long)]
    genres: PathBuf,
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    users: Option<Vec<u64>>,
    /// Sample `--count` users with this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 58, requires = "seed")]
    count: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct UtilityArgs {
    #[arg(long)]
    means: PathBuf,
    #[arg(long, value_delimiter = ',')]
    arms: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 6)]
    gamma_points: usize,
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 50)]
    eta_points: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LowerboundArgs {
    /// Two-arm instance, one bit per user.
    #[arg(long, required_unless_present = "karm", conflicts_with = "karm")]
    bits: Option<String>,
    /// k-arm instance `N,K` or `N,K,SPECIAL`.
    #[arg(long, value_delimiter = ',')]
    karm: Option<Vec<usize>>,
    #[arg(short = 'T', long)]
    horizon: usize,
    #[command(flatten)]
    output: Output,
}

/// `N,K` or `N,K,SPECIAL`.
fn karm(v: &[usize]) -> CliResult<InstanceSource> {
    match *v {
        [n, k] => Ok(InstanceSource::KArm { n, k, special: None }),
        [n, k, j] => Ok(InstanceSource::KArm { n, k, special: Some(j) }),
        _ => Err(CliError::Usage("k-arm instance takes N,K or N,K,SPECIAL".into())),
    }
}

fn load_means(path: &PathBuf, arms: &Option<Vec<String>>) -> CliResult<MeansFile> {
    let file = MeansFile::load(path)?;
    match arms {
        Some(names) => file.select(names),
        None => Ok(file),
    }
}

fn execute(command: Command) -> CliResult<(Table, Output)> {
    Ok(match command {
        Command::Optimal(a) => {
            let file = load_means(&a.means, &a.arms)?;
            let formulation = match a.formulation {
                FormulationArg::Naive => Formulation::Naive,
                FormulationArg::Form1 => Formulation::Form1,
                FormulationArg::Form2 => Formulation::Form2,
            };
            if a.sweep {
                let labels = match (&a.labels, &a.group_by) {
                    (Some(path), _) => Some(read_labels(open(path)?, &file.users)?),
                    (None, Some(arms)) => Some(argmax_groups(&file, arms)?),
                    (None, None) => None,
                };
                let gammas = a.gammas.unwrap_or_else(|| unit_grid(a.gamma_points));
                let etas = a.etas.unwrap_or_else(|| vec![a.eta]);
                let spec = SweepSpec::new(gammas, etas, labels)?;
                (cmd_optimal_sweep(&file, formulation, &spec)?.table(), a.output)
            } else {
                (cmd_optimal(&file, formulation, a.gamma, a.eta, a.delta_naive)?.1, a.output)
            }
        }
        Command::Simulate(a) => {
            let algorithm = match a.algorithm {
                AlgorithmArg::NUcb => Algorithm::NUcb,
                AlgorithmArg::RobustUcb => Algorithm::RobustUcb,
                AlgorithmArg::PenaltyUcb => Algorithm::PenaltyUcb,
            };
            let req = SimulateRequest { algorithm, horizon: a.horizon, gamma: a.gamma, eta: a.eta, delta: a.delta };
            let seeds = parse_seeds(&a.seeds)?;
            (cmd_simulate(&a.instance.source()?, &req, &seeds)?.1, a.output)
        }
        Command::Audit(a) => {
            let log = read_log(open(&a.log)?)?;
            (cmd_audit(&log, a.n, a.k, a.horizon, a.gamma, a.eta)?.table(), a.output)
        }
        Command::Ingest(a) => {
            let dataset = RatingsDataset::from_readers(open(&a.ratings)?, open(&a.genres)?)?;
            let selection = match (a.users, a.seed) {
                (Some(ids), _) => UserSelection::Ids(ids),
                (None, Some(seed)) => UserSelection::Sample { count: a.count, seed },
                (None, None) => UserSelection::All,
            };
            (cmd_ingest(&dataset, &selection)?.1, a.output)
        }
        Command::Utility(a) => {
            let file = load_means(&a.means, &a.arms)?;
            let gammas = a.gammas.unwrap_or_else(|| unit_grid(a.gamma_points));
            let etas = a.etas.unwrap_or_else(|| unit_grid(a.eta_points));
            let spec = SweepSpec::new(gammas, etas, None)?;
            (utility_table(&cmd_utility(&file, &spec)?), a.output)
        }
        Command::Lowerbound(a) => {
            let source = match (&a.bits, &a.karm) {
                (Some(bits), _) => InstanceSource::TwoArm(parse_bits(bits)?),
                (None, Some(v)) => karm(v)?,
                (None, None) => return Err(CliError::Usage("give --bits or --karm".into())),
            };
            (cmd_lowerbound(&source, a.horizon)?, a.output)
        }
    })
}

fn write(table: &Table, output: &Output) -> CliResult<()> {
    let Format::Csv = output.format;
    let text = table.render();
    match &output.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("stdout", e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command).and_then(|(table, output)| write(&table, &output)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polarcap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
