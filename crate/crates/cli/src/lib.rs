//! Command-line front end: configuration, subcommands and CSV output.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, CliResult, Console};
use config::{Origin, Pairs, RunConfig};

const CONFIG_HELP: &str = "\
Configuration is a flat file of `key = value` lines (`#` starts a comment).
Keys: pointer (ground | coherent | squeezed | coherent_squeezed | thermal |
fock_mixture), alpha_re, alpha_im, r, phi_sq, z, weights (comma separated),
kappa, kerr (true/false), dim, tau_max, tau_points, theta_points, phi_points,
tau, theta, phi (single point for `condition`), seed, output, threads.
Every key can also be given as a flag of the same name; flags win over the
file. `threads` falls back to OPTOWEAK_THREADS, then 1.

Exit status: 0 on success, 1 for configuration or usage errors, 2 for
numerical failures (truncation, convergence, empty scans).";

#[derive(Debug, Parser)]
#[command(name = "optoweak", version, about = "Post-selected weak amplification with an optomechanical pointer", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Operator-algebra and oracle-equivalence self-tests.
    Check,
    /// Unconditioned mean position of the pointer over τ.
    Trajectory(RunArgs),
    /// Condition on a single post-selection at a single τ.
    Condition(RunArgs),
    /// Scan τ, θ and φ for the largest conditioned displacement.
    Scan(RunArgs),
    /// τ scans at the exact dark port with and without the Kerr phase.
    Kerr(RunArgs),
    /// Analytic amplification cap of the pointer.
    Limits(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pointer: Option<String>,
    #[arg(long = "alpha_re", allow_hyphen_values = true)]
    alpha_re: Option<String>,
    #[arg(long = "alpha_im", allow_hyphen_values = true)]
    alpha_im: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long = "phi_sq", allow_hyphen_values = true)]
    phi_sq: Option<String>,
    #[arg(long)]
    z: Option<String>,
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    #[arg(long)]
    kerr: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long = "tau_max")]
    tau_max: Option<String>,
    #[arg(long = "tau_points")]
    tau_points: Option<String>,
    #[arg(long = "theta_points")]
    theta_points: Option<String>,
    #[arg(long = "phi_points")]
    phi_points: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl RunArgs {
    fn flags(&self) -> [(&'static str, &Option<String>); 20] {
        [
            ("pointer", &self.pointer),
            ("alpha_re", &self.alpha_re),
            ("alpha_im", &self.alpha_im),
            ("r", &self.r),
            ("phi_sq", &self.phi_sq),
            ("z", &self.z),
            ("weights", &self.weights),
            ("kappa", &self.kappa),
            ("kerr", &self.kerr),
            ("dim", &self.dim),
            ("tau_max", &self.tau_max),
            ("tau_points", &self.tau_points),
            ("theta_points", &self.theta_points),
            ("phi_points", &self.phi_points),
            ("tau", &self.tau),
            ("theta", &self.theta),
            ("phi", &self.phi),
            ("seed", &self.seed),
            ("output", &self.output),
            ("threads", &self.threads),
        ]
    }

    fn resolve(&self) -> CliResult<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                Pairs::parse(&text)?
            }
            None => Pairs::default(),
        };
        for (key, value) in self.flags() {
            if let Some(v) = value {
                pairs.set(key, v, Origin::CommandLine)?;
            }
        }
        Ok(pairs.build()?)
    }
}

fn dispatch(command: Command, io: &mut Console) -> CliResult<()> {
    match command {
        Command::Check => commands::check(io),
        Command::Trajectory(a) => commands::trajectory(&a.resolve()?, io),
        Command::Condition(a) => commands::condition_point(&a.resolve()?, io),
        Command::Scan(a) => commands::scan(&a.resolve()?, io),
        Command::Kerr(a) => commands::kerr(&a.resolve()?, io),
        Command::Limits(a) => commands::limits(&a.resolve()?, io),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let mut io = Console { out, err };
    match dispatch(cli.command, &mut io) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            e.exit_code()
        }
    }
}
