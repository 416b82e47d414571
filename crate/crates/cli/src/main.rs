//! `rfim`: batch experiments on random field Ising models.
//!
//! Every subcommand prints one JSON document with an embedded run manifest;
//! `rfim replay` re-executes a manifest and reproduces the output byte for
//! byte. Diagnostics go to standard error.
//!
//! Exit codes: 0 success, 1 input error, 2 rejected by `check`, 3 no mixing
//! guarantee for `glauber`.

mod commands;
mod manifest;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::Job;

#[derive(Debug, Parser)]
#[command(name = "rfim", version, about = "Random field Ising model: exact, approximate and sampled quantities")]
struct Cli {
    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true, env = "RFIM_THREADS")]
    threads: Option<usize>,
    /// Write the output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    #[command(flatten)]
    Job(Job),
    /// Re-run the command recorded in an output file.
    Replay {
        output: PathBuf,
        /// Exit 1 unless the new output equals the file byte for byte.
        #[arg(long)]
        verify: bool,
    },
}

fn render(job: &Job) -> Result<(String, u8)> {
    let (mut value, code) = job.run()?;
    let manifest = job.manifest()?;
    value
        .as_object_mut()
        .context("command output is not a JSON object")?
        .insert("manifest".into(), serde_json::to_value(manifest)?);
    Ok((serde_json::to_string_pretty(&value)? + "\n", code))
}

fn replay(output: &PathBuf, verify: bool) -> Result<(String, u8)> {
    let text = std::fs::read_to_string(output).with_context(|| format!("reading {}", output.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", output.display()))?;
    let manifest: manifest::RunManifest = serde_json::from_value(
        doc.get("manifest")
            .cloned()
            .with_context(|| format!("{} has no manifest", output.display()))?,
    )?;
    manifest.verify_inputs()?;
    let job = Job::from_manifest(&manifest)?;
    let (fresh, code) = render(&job)?;
    if verify && fresh != text {
        bail!("replay of {} differs from the recorded output", output.display());
    }
    Ok((fresh, code))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("rfim: cannot start {t} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Job(job) => render(job),
        Command::Replay { output, verify } => replay(output, *verify),
    };
    let (text, code) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("rfim: {e:#}");
            return ExitCode::from(1);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("rfim: {e:#}");
        return ExitCode::from(1);
    }
    ExitCode::from(code)
}
