use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levy_sync::csvio;
use levy_sync::drift::registry_text;
use levy_sync::runner;
use levy_sync::skorohod::skorohod_bounded;
use levy_sync::Error;

#[derive(Parser)]
#[command(
    name = "levy-sync",
    version,
    about = "Synchronization of coupled dissipative systems under Lévy noise",
    arg_required_else_help = true
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores). Results do
    /// not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// List drifts, noise families and presets.
    Registry,
    /// Bounded Skorohod distance between two path CSVs on [-m, m].
    Metric {
        path1: PathBuf,
        path2: PathBuf,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Write the witness time change as CSV (`-` for stdout).
        #[arg(long)]
        witness: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Registry => {
            print!("{}", registry_text());
            Ok(())
        }
        Command::Run { config } => {
            let out = runner::run_file(&config)?;
            println!("wrote {} files to {}", out.files.len() + 1, out.dir.display());
            Ok(())
        }
        Command::Metric {
            path1,
            path2,
            m,
            tol,
            witness,
        } => {
            let x = csvio::read_path_file(&path1)?;
            let y = csvio::read_path_file(&path2)?;
            let r = skorohod_bounded(&x, &y, m, tol)?;
            println!("value = {}", r.value);
            println!("certified_gap = {}", r.certified_gap);
            match witness {
                Some(p) if p.as_os_str() == "-" => csvio::write_time_change(&r.witness, std::io::stdout())?,
                Some(p) => csvio::write_time_change(&r.witness, std::fs::File::create(p)?)?,
                None => {}
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
