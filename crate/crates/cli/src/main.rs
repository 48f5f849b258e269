use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use palqo_core::experiment::{load_metrics, run_experiment, Experiment, Method, Metrics};
use palqo_core::pauli::{build_heisenberg, build_tfim, build_xxz, exact_ground_energy, parse_hamiltonian_file};
use palqo_core::vqe::{shot_cost, ShotModel};
use palqo_core::{Error, Hamiltonian};

/// Environment variable prefixed to relative `output_dir` entries.
const OUTPUT_ROOT_ENV: &str = "PALQO_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "palqo", version, about = "VQE with PINN-accelerated parameter trajectories")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the exact ground energy of a Hamiltonian file or builder
    /// expression such as `tfim:4,1,0.5`, `heisenberg:4,1,1,1,0` or `xxz:4,1,0.5,1`.
    Exact { hamiltonian: String },
    /// Run plain gradient-descent VQE from a TOML config.
    Vqe { config: PathBuf },
    /// Run PALQO (and the vanilla baseline) from a TOML config.
    Palqo { config: PathBuf },
    /// Run the DMD baseline (and vanilla) from a TOML config.
    Dmd { config: PathBuf },
    /// Shots for `iters` parameter-shift gradient steps: iters * ceil(2 p M / eps^2).
    Shots {
        p: usize,
        m: usize,
        epsilon: f64,
        iters: u64,
    },
    /// Tabulate speedup and final energy error across metrics files.
    Compare {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    NotConverged(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged(_) => Failure::NotConverged(e.to_string()),
            Error::Io(_) | Error::Checkpoint(_) => Failure::Other(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

fn parse_builder(spec: &str) -> Result<Hamiltonian, Failure> {
    let (name, args) = spec
        .split_once(':')
        .ok_or_else(|| Failure::Validation(format!("`{spec}` is neither a file nor a builder expression")))?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Validation(format!("bad numbers in `{spec}`")))?;
    let arity = |k: usize| {
        if nums.len() == k && nums[0] >= 0.0 && nums[0].fract() == 0.0 {
            Ok(nums[0] as usize)
        } else {
            Err(Failure::Validation(format!("`{name}` takes {k} values: n first")))
        }
    };
    let h = match name {
        "tfim" => build_tfim(arity(3)?, nums[1], nums[2]),
        "heisenberg" => build_heisenberg(arity(5)?, nums[1], nums[2], nums[3], nums[4]),
        "xxz" => build_xxz(arity(4)?, nums[1], nums[2], nums[3]),
        other => return Err(Failure::Validation(format!("unknown builder `{other}`"))),
    };
    Ok(h?)
}

fn exact(arg: &str) -> Result<(), Failure> {
    let path = Path::new(arg);
    let h = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Other(format!("{arg}: {e}")))?;
        parse_hamiltonian_file(&text)?
    } else {
        parse_builder(arg)?
    };
    println!("{}", exact_ground_energy(&h)?);
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("undefined".into(), |x| format!("{x:.3}"))
}

fn print_metrics(m: &Metrics) {
    println!("reference energy {}  accuracy {:e}", m.reference_energy, m.accuracy);
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>10}", "seed", "vanilla dE", "vanilla it", "method dE", "method it", "speedup");
    for s in &m.seeds {
        let it = |v: Option<u64>| v.map_or("-".into(), |x| x.to_string());
        let (mde, mit) = s
            .method
            .as_ref()
            .map_or(("-".into(), "-".into()), |r| (format!("{:.3e}", r.delta_e), it(r.iterations_to_accuracy)));
        println!(
            "{:>6} {:>12.3e} {:>12} {:>12} {:>12} {:>10}",
            s.seed,
            s.baseline.delta_e,
            it(s.baseline.iterations_to_accuracy),
            mde,
            mit,
            fmt_opt(s.speedup)
        );
    }
    if m.method != Method::Vanilla {
        println!(
            "speedup median {} min {} max {} ({} of {} seeds defined)",
            fmt_opt(m.speedup.median),
            fmt_opt(m.speedup.min),
            fmt_opt(m.speedup.max),
            m.speedup.defined,
            m.seeds.len()
        );
    }
}

fn experiment(config: &Path, method: Method) -> Result<(), Failure> {
    let mut exp = Experiment::load(config)?;
    exp.config.method = method;
    let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
    let out = exp.config.output_path(root.as_deref());
    let report = run_experiment(&exp, &out)?;
    print_metrics(&report.metrics);
    println!("artifacts written to {}", out.display());
    let unconverged: Vec<u64> = report
        .metrics
        .seeds
        .iter()
        .filter(|s| !s.method.as_ref().unwrap_or(&s.baseline).converged)
        .map(|s| s.seed)
        .collect();
    if unconverged.is_empty() {
        Ok(())
    } else {
        Err(Failure::NotConverged(format!("{method} did not converge for seeds {unconverged:?}")))
    }
}

fn shots(p: usize, m: usize, epsilon: f64, iters: u64) -> Result<(), Failure> {
    let model = ShotModel::new(m, epsilon, p)?;
    println!("{}", shot_cost(&model, iters));
    Ok(())
}

fn compare(paths: &[PathBuf]) -> Result<(), Failure> {
    println!("{:<40} {:>8} {:>10} {:>10} {:>10} {:>12}", "metrics", "method", "median a", "min a", "max a", "median dE");
    for p in paths {
        let m = load_metrics(p)?;
        let mut de: Vec<f64> = m
            .seeds
            .iter()
            .map(|s| s.method.as_ref().unwrap_or(&s.baseline).delta_e)
            .collect();
        de.sort_by(f64::total_cmp);
        let med = if de.is_empty() { f64::NAN } else { de[de.len() / 2] };
        println!(
            "{:<40} {:>8} {:>10} {:>10} {:>10} {:>12.3e}",
            p.display(),
            m.method.as_str(),
            fmt_opt(m.speedup.median),
            fmt_opt(m.speedup.min),
            fmt_opt(m.speedup.max),
            med
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Exact { hamiltonian } => exact(hamiltonian),
        Cmd::Vqe { config } => experiment(config, Method::Vanilla),
        Cmd::Palqo { config } => experiment(config, Method::Palqo),
        Cmd::Dmd { config } => experiment(config, Method::Dmd),
        Cmd::Shots { p, m, epsilon, iters } => shots(*p, *m, *epsilon, *iters),
        Cmd::Compare { metrics } => compare(metrics),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
