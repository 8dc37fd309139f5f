use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtdiff_core::activation::{verify_stochastic_moments, ActivationModel};
use mtdiff_scenarios::config::{load_config, Mode, Scenario, ScenarioConfig};
use mtdiff_scenarios::output::{emit_csv, sig9};
use mtdiff_scenarios::presets::{preset, preset_names};
use mtdiff_scenarios::runner::{run_scenario, ResultBundle, ScenarioError};
use mtdiff_scenarios::spectrum::build_spectrum_model;

#[derive(Parser)]
#[command(name = "mtdiff", version, about = "Multitask diffusion LMS over asynchronous networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo learning curves for a configuration file.
    Simulate(FileArgs),
    /// Closed-form mean and mean-square analysis for a configuration file.
    Analyze(FileArgs),
    /// Runs a bundled preset (`mtdiff scenario list` prints the names).
    Scenario {
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Checks the stochasticity of the activation moments of a configuration.
    MomentsCheck {
        #[arg(long)]
        config: PathBuf,
        /// Tolerance on the row and column sums.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Args)]
struct FileArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the regularization strengths of the configuration.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value = "out")]
    output_dir: PathBuf,
    /// Compute theoretical curves (default from the configuration).
    #[arg(long, overrides_with = "no_theory")]
    theory: bool,
    #[arg(long, overrides_with = "theory")]
    no_theory: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        let run = &mut cfg.run;
        if let Some(v) = self.runs {
            run.runs = v.max(1);
        }
        if let Some(v) = self.horizon {
            run.horizon = v;
            run.steady_window = run.steady_window.clamp(1, v.max(1));
        }
        if let Some(v) = self.seed {
            run.seed = v;
        }
        if let Some(v) = self.eta {
            run.etas = vec![v];
        }
        if self.theory && run.mode == Mode::Simulate {
            run.mode = Mode::Both;
        }
        if self.no_theory && run.mode != Mode::Simulate {
            run.mode = Mode::Simulate;
        }
    }
}

fn report(bundle: &ResultBundle) {
    let window = bundle.run.steady_window;
    for case in &bundle.cases {
        let s = &case.stability;
        let sim = case.simulated_steady_state(window).map(|v| sig9(10.0 * v.log10()));
        let theory = case.steady_state.map(|v| sig9(10.0 * v.log10()));
        println!(
            "{} {}: rho_B={} rho_F={} msd_sim_steady_db={} zeta_star_db={}",
            bundle.name,
            case.label,
            sig9(s.rho_b),
            sig9(s.rho_f),
            sim.unwrap_or_else(|| "nan".into()),
            theory.unwrap_or_else(|| "nan".into()),
        );
        if let Some(bias) = &case.bias {
            println!("  mean bias norm = {}", sig9(bias.norm()));
        }
        if s.rho_b >= 1.0 || s.rho_f >= 1.0 {
            eprintln!("warning: {} {} is not stable", bundle.name, case.label);
        }
    }
}

fn execute(mut cfg: ScenarioConfig, overrides: &Overrides) -> Result<(), ScenarioError> {
    overrides.apply(&mut cfg);
    let bundle = run_scenario(&cfg)?;
    report(&bundle);
    for path in emit_csv(&bundle, &overrides.output_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn moments_check(path: &PathBuf, tol: f64) -> Result<bool, ScenarioError> {
    let cfg = load_config(path)?;
    let ms = match &cfg.scenario {
        Scenario::Regression(s) => s.build()?.2.moments(),
        Scenario::Spectrum(s) => build_spectrum_model(s)?.2.moments(),
    };
    let report = verify_stochastic_moments(&ms);
    println!("{report:#?}");
    let ok = report.passes(tol);
    println!("{}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run(cli: Cli) -> Result<ExitCode, ScenarioError> {
    match cli.command {
        Command::Simulate(args) => {
            let mut cfg = load_config(&args.config)?;
            cfg.run.mode = Mode::Simulate;
            execute(cfg, &args.overrides)?;
        }
        Command::Analyze(args) => {
            let mut cfg = load_config(&args.config)?;
            cfg.run.mode = Mode::Theory;
            execute(cfg, &args.overrides)?;
        }
        Command::Scenario { name, overrides } => {
            if name == "list" {
                for n in preset_names() {
                    println!("{n}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let cfg = preset(&name).ok_or_else(|| ScenarioError::UnknownPreset(name.clone(), preset_names().join(", ")))??;
            execute(cfg, &overrides)?;
        }
        Command::MomentsCheck { config, tol } => {
            if !moments_check(&config, tol)? {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
