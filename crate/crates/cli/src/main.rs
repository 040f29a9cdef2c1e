use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::f64::consts::TAU;
use std::process::ExitCode;
use tdbem::singular::{exponent_curve, exponent_elastic, write_exponent_curve_csv, BoundaryCondition, ExponentProblem};
use tdbem::solver::write_coefficients_csv;
use tdbem_cli::config::{parse_config, ExperimentConfig};
use tdbem_cli::experiment::{
    emit_plot_data, format_report, run_experiment, ExperimentOutput, PlotKind,
};
use tdbem_cli::presets::{load_preset, PRESETS};

#[derive(Parser)]
#[command(name = "tdbem", version, about = "Time-domain Galerkin BEM for 2D elastodynamics")]
struct Cli {
    /// Worker threads for assembly (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the quadrature tolerance of the config.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one level (the finest unless `--level` is given).
    Solve {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Run the whole refinement ladder and report energies and rates.
    Ladder {
        #[command(flatten)]
        source: Source,
    },
    /// Corner exponents over a sweep of opening angles.
    Exponents {
        #[arg(long, default_value_t = 5.0 / 3.0)]
        kstar: f64,
        #[arg(long, default_value_t = 199)]
        count: usize,
        /// Interior angles (radians); both the exterior and interior exponents are printed.
        #[arg(long, value_delimiter = ',')]
        angles: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Built-in configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's configuration text.
    Show { name: String },
}

enum Failure {
    Config(String),
    Numerical(String),
    Other(String),
}

impl Failure {
    fn from_core(e: tdbem::Error) -> Failure {
        use tdbem::Error::*;
        match e {
            Accuracy { .. } | Conditioning(_) | RootSearch(_) => Failure::Numerical(e.to_string()),
            Domain(_) | Geometry(_) | Space(_) | Parse(_) => Failure::Config(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Other(e.to_string())
}

fn load(source: &Source) -> Result<ExperimentConfig, Failure> {
    let mut config = match (&source.config, &source.preset) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => load_preset(name)
            .ok_or_else(|| Failure::Config(format!("unknown preset {name:?}")))?
            .map_err(|e| Failure::Config(format!("preset {name}: {e}")))?,
        _ => return Err(Failure::Config("give either --config or --preset".into())),
    };
    if let Some(tol) = source.tol {
        if !(tol > 0.0) {
            return Err(Failure::Config(format!("--tol must be positive (got {tol})")));
        }
        config.tol = tol;
    }
    Ok(config)
}

fn write_all(output: &ExperimentOutput, dir: &Path) -> Result<(), Failure> {
    for kind in [PlotKind::EnergyLadder, PlotKind::TipSweep, PlotKind::History, PlotKind::Traces] {
        let path = emit_plot_data(output, kind, dir).map_err(io)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(sol) = &output.finest {
        write_coefficients_csv(sol, &dir.join("coefficients.csv")).map_err(Failure::from_core)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Presets { action: PresetAction::List } => {
            for (name, text) in PRESETS {
                let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                println!("{name:24} {about}");
            }
        }
        Command::Presets {
            action: PresetAction::Show { name },
        } => {
            let text = PRESETS
                .iter()
                .find(|p| p.0 == name)
                .ok_or_else(|| Failure::Config(format!("unknown preset {name:?}")))?;
            print!("{}", text.1);
        }
        Command::Ladder { source } => {
            let config = load(&source)?;
            let result = run_experiment(&config, |row| {
                eprintln!("level {} dof {} dt {:.4e} energy {:.6e}", row.level, row.dof, row.dt, row.energy)
            });
            match result {
                Ok(output) => {
                    print!("{}", format_report(&output.report));
                    write_all(&output, &source.out)?;
                }
                Err(e) => {
                    let partial = ExperimentOutput {
                        report: e.partial.clone(),
                        history: Vec::new(),
                        tip_sweep: Vec::new(),
                        traces: Vec::new(),
                        finest: None,
                    };
                    emit_plot_data(&partial, PlotKind::EnergyLadder, &source.out).map_err(io)?;
                    print!("{}", format_report(&e.partial));
                    let level = e.level;
                    return Err(match Failure::from_core(e.source) {
                        Failure::Numerical(m) => Failure::Numerical(format!("level {level}: {m}")),
                        Failure::Config(m) => Failure::Config(format!("level {level}: {m}")),
                        Failure::Other(m) => Failure::Other(format!("level {level}: {m}")),
                    });
                }
            }
        }
        Command::Solve { source, level } => {
            let mut config = load(&source)?;
            let idx = level.unwrap_or(config.levels.len() - 1);
            if idx >= config.levels.len() {
                return Err(Failure::Config(format!(
                    "level {idx} out of range (config has {})",
                    config.levels.len()
                )));
            }
            config.levels = vec![config.levels[idx].clone()];
            let output = run_experiment(&config, |_| {}).map_err(|e| Failure::from_core(e.source))?;
            let row = &output.report.rows[0];
            let cond = output.finest.as_ref().map_or(f64::NAN, |s| s.condition);
            println!("dof {} energy {:.10e} condition {cond:.3e}", row.dof, row.energy);
            if !output.tip_sweep.is_empty() {
                println!("{} tip samples within r < {}", output.tip_sweep.len(), config.tip_radius);
            }
            write_all(&output, &source.out)?;
        }
        Command::Exponents {
            kstar,
            count,
            angles,
            out,
        } => {
            for w in angles {
                let solve = |angle: f64| {
                    match ExponentProblem::new(angle, BoundaryCondition::Dirichlet, kstar).and_then(|p| exponent_elastic(&p)) {
                        Err(tdbem::Error::RootSearch(_)) => Ok(f64::NAN),
                        r => r.map_err(Failure::from_core),
                    }
                };
                println!("interior {w:.8} exterior nu {:.6} interior nu {:.6}", solve(TAU - w)?, solve(w)?);
            }
            let rows = exponent_curve(kstar, count).map_err(Failure::from_core)?;
            std::fs::create_dir_all(&out).map_err(io)?;
            let path = out.join("exponent_curve.csv");
            write_exponent_curve_csv(&rows, &path).map_err(Failure::from_core)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::FAILURE
        }
    }
}
