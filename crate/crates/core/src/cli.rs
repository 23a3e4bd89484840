//! Command-line surface.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::io::{export_from_checkpoint, load_checkpoint, load_config, run_training};
use crate::loss::{GramOperator, DENSE_LIMIT};
use crate::verify;

#[derive(Debug, Parser)]
#[command(
    name = "advdiff-pinn",
    version,
    about = "Space-time neural advection-diffusion solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network and write history, checkpoint and snapshots.
    Train {
        config: PathBuf,
        /// Replace an existing run in the output directory.
        #[arg(long)]
        overwrite: bool,
        /// Do not print history records while training.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Run the operator and gradient self-checks.
    Verify,
    /// Print the dense Gram matrix of the configured lattice.
    GramDump { config: PathBuf },
    /// Write snapshots of a saved network on the configured lattice.
    Export {
        checkpoint: PathBuf,
        config: PathBuf,
        /// Target directory; defaults to `<output_dir>/snapshots`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn execute(cli: Cli, out: &mut impl Write) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            overwrite,
            quiet,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.overwrite |= overwrite;
            let mut write_err = None;
            let report = run_training(&cfg, |r| {
                if quiet || write_err.is_some() {
                    return;
                }
                let h1 = r
                    .h1_error
                    .map(|e| format!(" h1_error {e:.4e}"))
                    .unwrap_or_default();
                if let Err(e) = writeln!(out, "iter {:>6} loss {:.6e}{h1}", r.iteration, r.loss) {
                    write_err = Some(e);
                }
            })?;
            if let Some(e) = write_err {
                return Err(stdout_err(e));
            }
            writeln!(
                out,
                "wrote {} history records and {} snapshots to {}",
                report.history.len(),
                report.snapshots.len(),
                report.dir.display()
            )
            .map_err(stdout_err)
        }
        Command::Verify => {
            let checks = verify::run_all()?;
            write!(out, "{}", verify::format_table(&checks)).map_err(stdout_err)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(Error::Config(format!(
                    "{failed} verification check(s) failed"
                )));
            }
            Ok(())
        }
        Command::GramDump { config } => {
            let cfg = load_config(&config)?;
            let grid = cfg.grid()?;
            if grid.len() > DENSE_LIMIT {
                return Err(Error::Config(format!(
                    "gram-dump needs at most {DENSE_LIMIT} lattice points, config has {}",
                    grid.len()
                )));
            }
            let dense = GramOperator::new(&grid).to_dense()?;
            writeln!(
                out,
                "# {n}x{n} Gram matrix, 1/(hx*hy*ht) = {}",
                1.0 / grid.cell_volume(),
                n = grid.len()
            )
            .map_err(stdout_err)?;
            for row in dense.row_iter() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", line.join(" ")).map_err(stdout_err)?;
            }
            Ok(())
        }
        Command::Export {
            checkpoint,
            config,
            out: dir,
        } => {
            let cfg = load_config(&config)?;
            let mlp = load_checkpoint(&checkpoint)?;
            let dir = dir.unwrap_or_else(|| cfg.output_dir.join(crate::io::SNAPSHOT_DIR));
            let files = export_from_checkpoint(&mlp, &cfg, &dir)?;
            writeln!(out, "wrote {} snapshots to {}", files.len(), dir.display())
                .map_err(stdout_err)
        }
    }
}
