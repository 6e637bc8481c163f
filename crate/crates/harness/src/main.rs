use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use flexdr_harness::config::RunConfig;
use flexdr_harness::gen::{generate, parse_params, write_matrix, GenKind};
use flexdr_harness::{compare, exit_code, run_with_threads, scaling_study, subdomain_sweep, write_artifacts, THREADS_ENV};

#[derive(Parser)]
#[command(name = "flexdr", version, about = "Block-sparse (F)GMRES(-DR) solver runs and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads.
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Directory for the CSV history and JSON summary.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run several configurations on the same problem and tabulate them.
    Compare {
        #[arg(long, num_args = 1.., required = true)]
        configs: Vec<PathBuf>,
        #[arg(long, env = THREADS_ENV)]
        threads: Option<usize>,
        /// Repeat the first configuration for these subdomain counts.
        #[arg(long, value_delimiter = ',')]
        sweep: Option<Vec<usize>>,
        /// Emit JSON instead of a text table.
        #[arg(long)]
        json: bool,
    },
    /// Strong-scaling study over thread counts.
    Scale {
        #[arg(long)]
        config: PathBuf,
        /// Ascending thread counts; defaults to the configuration's list.
        #[arg(long, value_delimiter = ',')]
        threads: Option<Vec<usize>>,
    },
    /// Write a generated matrix to a .mtx or .bsr file.
    Gen {
        #[arg(long)]
        kind: String,
        /// Generator parameters as key=value.
        #[arg(long, num_args = 0..)]
        params: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match threads {
        Some(n) => Ok(rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(f)),
        None => Ok(f()),
    }
}

fn main_inner(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve {
            config,
            threads,
            out,
            print_config,
        } => {
            let cfg = RunConfig::from_path(&config)?;
            if print_config {
                print!("{}", cfg.dump());
                return Ok(0);
            }
            let outcome = run_with_threads(&cfg, threads)?;
            if let Some(dir) = out.or_else(|| cfg.output.dir.clone()) {
                for path in write_artifacts(&outcome, &dir, &cfg.output.name)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            println!("{}", serde_json::to_string_pretty(&outcome.summary())?);
            Ok(outcome.exit_code())
        }
        Command::Compare {
            configs,
            threads,
            sweep,
            json,
        } => {
            let cfgs = configs
                .iter()
                .map(|p| RunConfig::from_path(p))
                .collect::<Result<Vec<_>, _>>()?;
            if let Some(ps) = sweep {
                let table = with_threads(threads, || subdomain_sweep(&cfgs[0], &ps))??;
                if json {
                    println!("{}", serde_json::to_string_pretty(&table)?);
                } else {
                    print!("{table}");
                }
                let all = table.rows.iter().all(|r| r.status.is_converged());
                return Ok(if all { 0 } else { 2 });
            }
            let table = with_threads(threads, || compare(&cfgs))??;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{table}");
            }
            Ok(table.rows.iter().map(|r| exit_code(r.status)).max().unwrap_or(0))
        }
        Command::Scale { config, threads } => {
            let cfg = RunConfig::from_path(&config)?;
            let counts = threads.unwrap_or_else(|| cfg.scaling.threads.clone());
            let table = scaling_study(&cfg, &counts)?;
            print!("{table}");
            Ok(0)
        }
        Command::Gen { kind, params, out } => {
            let kind: GenKind = kind.parse()?;
            let inst = generate(kind, &parse_params(&params)?)?;
            let path = write_matrix(&inst, &out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "wrote {} ({} block rows, block size {}, {} blocks)",
                path.display(),
                inst.matrix.n_block_rows(),
                inst.matrix.block_size(),
                inst.matrix.nnz_blocks()
            );
            Ok(0)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match main_inner(cli) {
        Ok(code) => code as u8,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run_cli(std::env::args_os()))
}

#[cfg(test)]
#[path = "main_tests.rs"]
mod tests;
