use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use resgrad::annulus::FluxProfile;
use resgrad::diffnet::load_checkpoint;
use resgrad::fdref::{grid_study, solve_reference, write_wall_slice, FdGrid, Inlet, SolverOptions};
use resgrad::harness::{
    audit, paired_sign_test, read_rows, report, run, sweep, write_aggregate, Arm, RunConfig, RunSummary, Stage,
    SummaryRow, SweepAxes,
};

#[derive(Parser)]
#[command(name = "resgrad", version, about = "Residual-gradient regularized PINN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run config; defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Stage whose defaults to start from when no config file is given.
    #[arg(long, value_parser = parse_stage)]
    stage: Option<Stage>,
    /// Override a config key, e.g. `--set optimizer.lr_init=1e-3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shortcut for `--set arm=...`.
    #[arg(long)]
    arm: Option<String>,
    /// Shortcut for setting every seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Shortcut for `--set epochs=...`.
    #[arg(long)]
    epochs: Option<u64>,
    /// Shortcut for `--set output.dir=...`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let base = match (&self.config, self.stage) {
            (Some(path), _) => {
                RunConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?
            }
            (None, Some(Stage::Stage2)) => RunConfig::stage2_default(),
            (None, _) => RunConfig::stage1_default(),
        };
        let mut ov = Vec::new();
        if let (Some(_), Some(stage)) = (&self.config, self.stage) {
            ov.push(format!("stage=\"{}\"", stage.as_str()));
        }
        if let Some(arm) = &self.arm {
            ov.push(format!("arm=\"{arm}\""));
        }
        if let Some(s) = self.seed {
            for k in ["init", "cloud", "validation", "audit"] {
                ov.push(format!("seeds.{k}={s}"));
            }
        }
        if let Some(e) = self.epochs {
            ov.push(format!("epochs={e}"));
        }
        if let Some(d) = &self.output_dir {
            ov.push(format!("output.dir={:?}", d.display().to_string()));
        }
        ov.extend(self.overrides.iter().cloned());
        Ok(base.with_overrides(&ov)?)
    }
}

fn parse_stage(s: &str) -> Result<Stage, String> {
    match s {
        "stage1" | "1" => Ok(Stage::Stage1),
        "stage2" | "2" => Ok(Stage::Stage2),
        _ => Err(format!("unknown stage `{s}`")),
    }
}

fn parse_grid(s: &str) -> Result<FdGrid, String> {
    let parts: Vec<usize> = s
        .split(['x', ','])
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad grid `{s}`: {e}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok(FdGrid::new(a, b, c)),
        _ => Err(format!("grid `{s}` must be N_S x N_THETA x N_Z")),
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    /// Use a constant flux instead of the config's profile.
    #[arg(long)]
    constant_flux: Option<f64>,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, max_iter: self.max_iter }
    }

    fn flux(&self, cfg: &RunConfig) -> FluxProfile {
        self.constant_flux.map_or(cfg.stage2.flux, |q| FluxProfile::Constant { q })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write its JSON summary, CSV row and checkpoint.
    Run(ConfigArgs),
    /// Run the Cartesian product of arms, seeds and weights and aggregate.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated arms.
        #[arg(long, value_delimiter = ',', required = true)]
        arms: Vec<String>,
        /// Comma-separated seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        /// Comma-separated aux weights.
        #[arg(long, value_delimiter = ',')]
        weights: Vec<f64>,
    },
    /// Solve the finite-difference reference problem and write the outer-wall slice.
    FdrefSolve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Grid as N_S x N_THETA x N_Z.
        #[arg(long, value_parser = parse_grid, default_value = "33x128x161")]
        grid: FdGrid,
        #[command(flatten)]
        solver: SolverArgs,
        /// Output wall-slice file.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve on a sequence of nested grids and report changes between neighbours.
    FdrefGridstudy {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Grids as N_S x N_THETA x N_Z, coarse to fine; at least two.
        #[arg(long = "grid", value_parser = parse_grid, required = true, num_args = 1..)]
        grids: Vec<FdGrid>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Audit a saved checkpoint under a config.
    Audit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Aggregate and rank run summaries (JSON) or CSV row files.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Write the aggregate table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact two-sided paired sign test.
    SignTest {
        #[arg(long)]
        wins: u64,
        #[arg(long)]
        n: u64,
    },
}

fn read_inputs(paths: &[PathBuf]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for p in paths {
        let is_json = p.extension().is_some_and(|e| e == "json");
        if is_json {
            rows.push(RunSummary::read(p).with_context(|| format!("reading {}", p.display()))?.metrics);
        } else {
            rows.extend(read_rows(p).with_context(|| format!("reading {}", p.display()))?);
        }
    }
    Ok(rows)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let (summary, files) = run(&cfg)?;
            println!("{}", display(&files.json));
            if summary.failed() {
                eprintln!(
                    "run failed: {}",
                    summary.failure.as_deref().unwrap_or("unknown failure")
                );
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep { cfg, arms, seeds, weights } => {
            let template = cfg.load()?;
            let arms = arms.iter().map(|a| Arm::parse(a)).collect::<Result<Vec<_>, _>>()?;
            let res = sweep(&template, &SweepAxes { arms, seeds, weights })?;
            println!("{}", display(&res.rows_csv));
            println!("{}", display(&res.aggregate_csv));
            let failed = res.summaries.iter().filter(|s| s.failed()).count();
            if failed > 0 {
                eprintln!("{failed} of {} runs failed", res.summaries.len());
                return Ok(ExitCode::from(1));
            }
        }
        Command::FdrefSolve { cfg, grid, solver, out } => {
            let cfg = cfg.load()?;
            let flux = solver.flux(&cfg);
            let sol = solve_reference(&cfg.stage2.geometry, &flux, grid, Inlet::Uniform(1.0), solver.options())?;
            write_wall_slice(&out, &sol.wall_slice())?;
            print_json(&serde_json::json!({
                "grid": sol.grid,
                "iterations": sol.report.iterations,
                "relative_residual": sol.report.residual,
                "wall_slice": display(&out),
            }))?;
        }
        Command::FdrefGridstudy { cfg, grids, solver } => {
            let cfg = cfg.load()?;
            let flux = solver.flux(&cfg);
            let changes = grid_study(&cfg.stage2.geometry, &flux, &grids, Inlet::Uniform(1.0), solver.options())?;
            print_json(&changes)?;
        }
        Command::Audit { cfg, checkpoint } => {
            let cfg = cfg.load()?;
            let net = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            print_json(&audit(&cfg, &net)?)?;
        }
        Command::Report { inputs, out } => {
            let rows = read_inputs(&inputs)?;
            if rows.is_empty() {
                bail!("no summaries found in the inputs");
            }
            let rep = report(&rows)?;
            if let Some(out) = out {
                write_aggregate(&out, &rep.aggregate)?;
            }
            print_json(&rep)?;
        }
        Command::SignTest { wins, n } => {
            let p = paired_sign_test(wins, n)?;
            println!("{p}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
