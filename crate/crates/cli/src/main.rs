mod commands;
mod config;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;

/// Noisy variational-algorithm laboratory: density-matrix simulation,
/// zero-noise extrapolation, and surrogate-driven optimization.
#[derive(Parser, Debug)]
#[command(name = "vqalab", version, about)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. A config file (flat `key = value`
/// lines) is applied first; explicit flags override it.
#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Path to a key=value config file applied before flags
    #[arg(long, global = true)]
    config: Option<String>,
    /// Output directory for all artifacts
    #[arg(long, global = true)]
    out: Option<String>,
    /// Master seed for the whole experiment
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Problem family: maxcut3reg | sk | tfim | molecular
    #[arg(long, global = true)]
    problem: Option<String>,
    /// Qubit count
    #[arg(long, global = true)]
    n: Option<String>,
    /// Ansatz depth (layers)
    #[arg(long, global = true)]
    p_layers: Option<String>,
    /// Seed for instance generation (graph / couplings)
    #[arg(long, global = true)]
    instance_seed: Option<String>,
    /// Hamiltonian file (molecular problem)
    #[arg(long, global = true)]
    hamiltonian: Option<String>,
    /// Ansatz template file (molecular problem)
    #[arg(long, global = true)]
    template: Option<String>,
    /// Optimizer mode: noisy | zne | pidn
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Mitigated warm-up steps before the surrogate takes over
    #[arg(long, global = true)]
    t_init: Option<String>,
    /// Gradient-descent step size
    #[arg(long, global = true)]
    eta: Option<String>,
    /// Total optimization steps
    #[arg(long, global = true)]
    max_steps: Option<String>,
    /// Execution budget (circuit runs); unset means unlimited
    #[arg(long, global = true)]
    budget: Option<String>,
    /// Shot budget per expectation: "exact" or a shot count
    #[arg(long, global = true)]
    shots: Option<String>,
    /// Shot budget for ZNE evaluations (defaults to --shots)
    #[arg(long, global = true)]
    zne_shots: Option<String>,
    /// Noise channel: depolarizing | dephasing
    #[arg(long, global = true)]
    noise_kind: Option<String>,
    /// Per-gate noise strength
    #[arg(long, global = true)]
    noise_strength: Option<String>,
    /// Comma-separated odd folding factors, e.g. 1,3,5
    #[arg(long, global = true)]
    lambdas: Option<String>,
    /// Extrapolation model: linear | quadratic | exponential
    #[arg(long, global = true)]
    fit: Option<String>,
    /// Physics-loss weight for surrogate training
    #[arg(long, global = true)]
    beta: Option<String>,
    /// Surrogate training epochs
    #[arg(long, global = true)]
    epochs: Option<String>,
    /// Surrogate hidden-layer width
    #[arg(long, global = true)]
    hidden: Option<String>,
    /// Surrogate rollout update: gradient | head
    #[arg(long, global = true)]
    step_mode: Option<String>,
    /// Landscape grid resolution per axis
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Gaussian smoothing width in grid cells
    #[arg(long, global = true)]
    sigma: Option<String>,
    /// Low-frequency cutoff radius in FFT bins
    #[arg(long, global = true)]
    radius: Option<String>,
    /// Two parameter indices to scan, e.g. 0,1
    #[arg(long, global = true)]
    axes: Option<String>,
    /// Sweep study: rlf | tracking | energy
    #[arg(long, global = true)]
    study: Option<String>,
    /// Comma-separated noise strengths for sweeps
    #[arg(long, global = true)]
    levels: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one optimization (noisy, zne or pidn) and record its trace
    Run,
    /// Scan a 2-D cost landscape under each estimator and report metrics
    Landscape,
    /// Sweep noise strength and measure one quantity per level
    Sweep,
    /// Compare surrogate training with and without the physics loss
    Ablate,
    /// Generate and save a problem instance file
    Gen,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, &String)> {
        let mut v = Vec::new();
        macro_rules! push {
            ($field:ident, $key:expr) => {
                if let Some(val) = &self.$field {
                    v.push(($key, val));
                }
            };
        }
        push!(out, "out");
        push!(seed, "seed");
        push!(problem, "problem");
        push!(n, "n");
        push!(p_layers, "p-layers");
        push!(instance_seed, "instance-seed");
        push!(hamiltonian, "hamiltonian");
        push!(template, "template");
        push!(mode, "mode");
        push!(t_init, "t-init");
        push!(eta, "eta");
        push!(max_steps, "max-steps");
        push!(budget, "budget");
        push!(shots, "shots");
        push!(zne_shots, "zne-shots");
        push!(noise_kind, "noise-kind");
        push!(noise_strength, "noise-strength");
        push!(lambdas, "lambdas");
        push!(fit, "fit");
        push!(beta, "beta");
        push!(epochs, "epochs");
        push!(hidden, "hidden");
        push!(step_mode, "step-mode");
        push!(grid, "grid");
        push!(sigma, "sigma");
        push!(radius, "radius");
        push!(axes, "axes");
        push!(study, "study");
        push!(levels, "levels");
        v
    }
}

fn resolve_config(common: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(std::path::Path::new(path))
            .map_err(|e| e.to_string())?;
    }
    for (key, value) in common.overrides() {
        cfg.set(key, value).map_err(|e| e.to_string())?;
    }
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    let cfg = match resolve_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    let result = match cli.command {
        Command::Run => commands::cmd_run(&cfg),
        Command::Landscape => commands::cmd_landscape(&cfg),
        Command::Sweep => commands::cmd_sweep(&cfg),
        Command::Ablate => commands::cmd_ablate(&cfg),
        Command::Gen => commands::cmd_gen(&cfg),
    };
    match result {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
