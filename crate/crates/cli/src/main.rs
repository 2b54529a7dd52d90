use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use quadcool::kinetics::{self, PhononDistribution};
use quadcool::rates::{self, SystemParams};
use quadcool::stats;
use quadcool_cli::config::{parse_config, ConfigError};
use quadcool_cli::output::{self, format_number};
use quadcool_cli::sweep::run_sweep;

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_FAILED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "quadcool",
    about = "Phonon cooling kinetics of a quadratically coupled optomechanical cavity",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a detuning sweep from a config file and emit CSV.
    Sweep(SweepArgs),
    /// Dump the scattering-rate matrix at one parameter point.
    Rates(RatesArgs),
    /// Analytic weak-coupling quantities and limiting distributions.
    Analytic(AnalyticArgs),
    /// Recompute observables from a distribution file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the `key = value` sweep configuration.
    #[arg(long)]
    config: String,
    /// Output CSV path; overrides `output_path` from the config. Without
    /// either, CSV goes to stdout.
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    g: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long, allow_hyphen_values = true)]
    delta: f64,
    #[arg(long)]
    omega_drive: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma_m: f64,
    #[arg(long, default_value_t = 0.0)]
    n_th: f64,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Number of phonon states in the dumped matrix.
    #[arg(long, default_value_t = 30)]
    n_states: usize,
    /// Starting intermediate-state cutoff; 0 picks one per transition.
    #[arg(long, default_value_t = 0)]
    l_max: usize,
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Emit the pure two-phonon distribution with this odd-sector weight
    /// instead of the scalar table.
    #[arg(long)]
    gamma_weight: Option<f64>,
    /// States in the emitted distribution.
    #[arg(long, default_value_t = 30)]
    n_states: usize,
    #[arg(long)]
    output: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    /// CSV file with `n,p` rows (header optional).
    #[arg(long)]
    input: String,
    #[arg(long)]
    output: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Sweep(args) => run_sweep_command(args),
        Command::Rates(args) => run_rates_command(args),
        Command::Analytic(args) => run_analytic_command(args),
        Command::Stats(args) => run_stats_command(args),
    }
}

fn emit_or_fail(content: &str, path: Option<&str>) -> ExitCode {
    match output::emit(content, path) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let target = path.unwrap_or("<stdout>");
            eprintln!("error: failed to write {target}: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn run_sweep_command(args: SweepArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.config) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read config {}: {e}", args.config);
            return ExitCode::from(EXIT_IO);
        }
    };
    let config = match parse_config(&text) {
        Ok(config) => config,
        Err(e @ ConfigError::Parse { .. }) | Err(e @ ConfigError::Validation(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if config.params.weak_drive_warning() {
        eprintln!(
            "warning: omega_drive/kappa = {:.3} exceeds 0.5; the rate theory is second order in the drive",
            config.params.omega_drive / config.params.kappa
        );
    }

    let records = run_sweep(&config);
    let all_failed = records.iter().all(|r| {
        r.converged_rate != Some(true) && r.converged_master != Some(true)
    });
    let csv = output::render_sweep_csv(&records);
    let path = args.output.as_deref().or(config.output_path.as_deref());
    let wrote = emit_or_fail(&csv, path);
    if wrote != ExitCode::SUCCESS {
        return wrote;
    }
    if all_failed {
        eprintln!("error: no sweep point converged with any requested solver");
        return ExitCode::from(EXIT_ALL_FAILED);
    }
    ExitCode::SUCCESS
}

fn build_params(args: &ParamArgs) -> Result<SystemParams, ExitCode> {
    SystemParams::new(
        args.g,
        args.kappa,
        args.delta,
        args.omega_drive,
        args.gamma_m,
        args.n_th,
    )
    .map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run_rates_command(args: RatesArgs) -> ExitCode {
    let params = match build_params(&args.params) {
        Ok(p) => p,
        Err(code) => return code,
    };
    if args.n_states < 2 {
        eprintln!("error: n_states must be at least 2");
        return ExitCode::from(EXIT_CONFIG);
    }
    let matrix = match rates::rate_matrix(&params, args.n_states, args.l_max) {
        Ok(matrix) => matrix,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ALL_FAILED);
        }
    };
    let mut csv = String::from("n,m,rate\n");
    for n in 0..args.n_states {
        for m in 0..args.n_states {
            if m == n {
                continue;
            }
            csv.push_str(&format!("{n},{m},{}\n", format_number(matrix.rate(n, m))));
        }
    }
    emit_or_fail(&csv, args.output.as_deref())
}

fn run_analytic_command(args: AnalyticArgs) -> ExitCode {
    let params = match build_params(&args.params) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let (down, up) = rates::weak_coupling_rates(&params);

    let csv = if let Some(gamma_weight) = args.gamma_weight {
        if down == 0.0 {
            eprintln!("error: two-phonon branching ratio undefined without drive");
            return ExitCode::from(EXIT_CONFIG);
        }
        let ratio = up / down;
        let dist = match kinetics::two_phonon_distribution(ratio, gamma_weight, args.n_states) {
            Ok(dist) => dist,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        let mut csv = String::from("n,p\n");
        for (n, p) in dist.probs().iter().enumerate() {
            csv.push_str(&format!("{n},{}\n", format_number(*p)));
        }
        csv
    } else {
        let (p0, p1, nbar) = kinetics::strong_absorption_limit(params.n_th);
        let ratio = if down > 0.0 {
            format_number(up / down)
        } else {
            String::new()
        };
        let mut csv = String::from("quantity,value\n");
        csv.push_str(&format!("gamma_down,{}\n", format_number(down)));
        csv.push_str(&format!("gamma_up,{}\n", format_number(up)));
        csv.push_str(&format!("branching_ratio_r,{ratio}\n"));
        csv.push_str(&format!("p0_strong_absorption,{}\n", format_number(p0)));
        csv.push_str(&format!("p1_strong_absorption,{}\n", format_number(p1)));
        csv.push_str(&format!("nbar_strong_absorption,{}\n", format_number(nbar)));
        csv
    };
    emit_or_fail(&csv, args.output.as_deref())
}

fn run_stats_command(args: StatsArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.input) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.input);
            return ExitCode::from(EXIT_IO);
        }
    };
    let mut weights: Vec<(usize, f64)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("n,") {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(n_str), Some(p_str)) = (fields.next(), fields.next()) else {
            eprintln!("error: line {}: expected `n,p`", idx + 1);
            return ExitCode::from(EXIT_CONFIG);
        };
        let (Ok(n), Ok(p)) = (n_str.trim().parse::<usize>(), p_str.trim().parse::<f64>())
        else {
            eprintln!("error: line {}: expected `n,p` numbers", idx + 1);
            return ExitCode::from(EXIT_CONFIG);
        };
        weights.push((n, p));
    }
    if weights.is_empty() {
        eprintln!("error: no distribution rows in {}", args.input);
        return ExitCode::from(EXIT_CONFIG);
    }
    let size = weights.iter().map(|&(n, _)| n).max().expect("nonempty") + 1;
    let mut probs = vec![0.0f64; size];
    for (n, p) in weights {
        probs[n] = p;
    }
    let dist = match PhononDistribution::new(probs) {
        Ok(dist) => dist,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let summary = stats::MechStats::from_distribution(&dist);
    let mut csv = String::from("nbar,mandel_q,fluct_f\n");
    csv.push_str(&format_number(summary.nbar));
    csv.push(',');
    csv.push_str(&summary.mandel_q.map(format_number).unwrap_or_default());
    csv.push(',');
    csv.push_str(&summary.fluct_f.map(format_number).unwrap_or_default());
    csv.push('\n');
    emit_or_fail(&csv, args.output.as_deref())
}
