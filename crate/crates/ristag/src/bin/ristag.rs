use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use ristag::commands::{analyze, optimize, simulate};
use ristag::config::{ScenarioConfig, Sweep};
use ristag::csv::Table;
use ristag::figures;

#[derive(Parser)]
#[command(
    name = "ristag",
    version,
    about = "RIS-assisted bistatic backscatter analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form metrics per sweep point.
    Analyze(RunArgs),
    /// Monte-Carlo metrics beside the closed forms.
    Simulate(RunArgs),
    /// Multi-tag phase optimization of one channel draw.
    Optimize(RunArgs),
    /// Reproduce a reference figure from its preset.
    Figure {
        /// Figure number (3, 4, 6, 7, 8, 9, 10, 11 or 12).
        id: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the preset scenario instead of running it.
        #[arg(long)]
        print_config: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep axis as `var:lo:hi:steps`.
    #[arg(long)]
    sweep: Option<Sweep>,
}

impl RunArgs {
    fn scenario(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                ScenarioConfig::from_json(&text)
                    .with_context(|| format!("parsing {}", p.display()))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.sweep {
            cfg.sweep = Some(s);
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn emit(table: &Table, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, table.render()).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().lock().write_all(table.render().as_bytes())?),
    }
}

/// `out.csv` -> `out.<part>.csv`.
fn sibling(path: &Path, part: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map_or_else(|| "csv".to_string(), |e| e.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{part}.{ext}"))
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Analyze(a) => {
            let cfg = a.scenario()?;
            emit(&analyze(&cfg)?, cfg.output.as_deref().map(Path::new))
        }
        Command::Simulate(a) => {
            let cfg = a.scenario()?;
            emit(&simulate(&cfg)?, cfg.output.as_deref().map(Path::new))
        }
        Command::Optimize(a) => {
            let cfg = a.scenario()?;
            let out = optimize(&cfg)?;
            if out.relaxed {
                eprintln!("warning: no activation-feasible start; constraints dropped");
            }
            match cfg.output.as_deref().map(Path::new) {
                Some(p) => {
                    emit(&out.trace, Some(p))?;
                    emit(&out.theta, Some(&sibling(p, "theta")))?;
                    emit(&out.tags, Some(&sibling(p, "tags")))
                }
                None => {
                    emit(&out.trace, None)?;
                    emit(&out.tags, None)
                }
            }
        }
        Command::Figure {
            id,
            seed,
            trials,
            out,
            print_config,
        } => {
            if !figures::FIGURES.contains(&id) {
                bail!(
                    "no preset for figure {id}; available: {:?}",
                    figures::FIGURES
                );
            }
            if print_config {
                let cfg = figures::preset(id)?;
                println!("{}", cfg.to_json());
                eprintln!("{}", figures::caption(&cfg));
                return Ok(());
            }
            emit(&figures::run(id, seed, trials)?, out.as_deref())
        }
    }
}
