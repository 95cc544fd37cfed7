//! Experiment runner for `pavlov-core`: a rayon trial executor, run
//! configuration (flags or TOML), CSV/JSON result files and the `pavlov`
//! command-line entry point.

pub mod config;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::time::Instant;

pub use config::{parse_config, Cli, Command, Experiment, Format, Invocation, RunConfig};
pub use error::{LabError, LabResult};
pub use exec::RayonExecutor;
pub use experiments::{run_experiment, Outcome};
pub use output::{Cell, Table};

/// Execute an invocation and write its result file (stdout without `output`).
/// Runtime and notes go to stderr so result files stay byte-identical.
pub fn run(inv: &Invocation) -> LabResult<Outcome> {
    let exec = RayonExecutor::new(inv.threads)
        .map_err(|e| LabError::usage(format!("thread pool: {e}")))?;
    let cfg = &inv.config;
    let start = Instant::now();
    let outcome = run_experiment(cfg, &exec)?;
    match &cfg.output {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| LabError::io(format!("creating {}", path.display()), e))?;
            let mut w = BufWriter::new(file);
            output::write_table(&outcome.table, cfg, &mut w)?;
            w.flush()
                .map_err(|e| LabError::io(format!("writing {}", path.display()), e))?;
        }
        None => output::write_table(&outcome.table, cfg, io::stdout().lock())?,
    }
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    eprintln!(
        "{} finished in {:.3} s on {} thread(s)",
        cfg.experiment.command(),
        start.elapsed().as_secs_f64(),
        exec.threads()
    );
    Ok(outcome)
}
