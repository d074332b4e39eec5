//! `ctel`: run either teleportation protocol, verify them, or host one party
//! of a networked session.

mod run;

use std::fs;
use std::io::Write;
use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctel_core::epistemic_state::PreparationMode;
use ctel_core::transport::{serve_party, PartyEndpoints};
use ctel_core::verification::{run_suite, Suite, VerifyConfig, VerifyError};
use ctel_core::Party;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "ctel", version, about = "Classical and quantum teleportation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run trials of one protocol and stream one JSON record per trial.
    Run {
        #[command(subcommand)]
        protocol: RunProtocol,
    },
    /// Run a verification suite and write report.json and report.md.
    Verify(VerifyArgs),
    /// Host one party over TCP until the session is torn down.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
pub enum RunProtocol {
    /// Teleport the coin state |x> with one bit per trial.
    Classical {
        /// Probability of Heads in Charlie's state.
        #[arg(long, value_parser = parse_probability)]
        x: f64,
        #[arg(long, value_enum, default_value_t = Mode::Direct)]
        mode: Mode,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Teleport a qubit with two bits per trial.
    Quantum {
        /// `random` for a fresh Haar-random state per trial, or four reals
        /// `re(a),im(a),re(b),im(b)` for a|0> + b|1>.
        #[arg(long, default_value = "random", allow_hyphen_values = true)]
        state: String,
        #[command(flatten)]
        common: RunArgs,
    },
}

#[derive(Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, env = "CTEL_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Width of the reported confidence interval in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub z: f64,
    #[arg(long, value_enum, default_value_t = Transport::Inprocess)]
    pub transport: Transport,
    #[command(flatten)]
    pub endpoints: EndpointArgs,
    /// Write the per-trial log here instead of stdout. The summary then goes
    /// to stdout.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Skip the per-trial log.
    #[arg(long, conflicts_with = "log")]
    pub no_log: bool,
}

#[derive(Args)]
pub struct EndpointArgs {
    #[arg(long, env = "CTEL_ALICE", default_value = "127.0.0.1:7401")]
    pub alice: String,
    #[arg(long, env = "CTEL_BOB", default_value = "127.0.0.1:7402")]
    pub bob: String,
    #[arg(long, env = "CTEL_CHARLIE", default_value = "127.0.0.1:7403")]
    pub charlie: String,
}

impl EndpointArgs {
    pub fn to_endpoints(&self) -> PartyEndpoints {
        PartyEndpoints {
            alice: self.alice.clone(),
            bob: self.bob.clone(),
            charlie: self.charlie.clone(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Direct,
    Ensemble,
}

impl From<Mode> for PreparationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Direct => PreparationMode::Direct,
            Mode::Ensemble => PreparationMode::Ensemble,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transport {
    Inprocess,
    Tcp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Role {
    Alice,
    Bob,
    Charlie,
}

impl From<Role> for Party {
    fn from(r: Role) -> Self {
        match r {
            Role::Alice => Party::Alice,
            Role::Bob => Party::Bob,
            Role::Charlie => Party::Charlie,
        }
    }
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    suite: Suite,
    #[arg(long, env = "CTEL_SEED", default_value_t = 42)]
    seed: u64,
    /// Worker threads. Reports are identical for any value.
    #[arg(long, env = "CTEL_JOBS", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: u16,
    /// Classical trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, value_enum, default_value_t = Mode::Direct)]
    mode: Mode,
    /// Directory for report.json and report.md.
    #[arg(long, default_value = "ctel-report")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum)]
    role: Role,
    /// Address to bind. Defaults to the role's standard port.
    #[arg(long, env = "CTEL_LISTEN")]
    listen: Option<String>,
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(format!("{x} is not a probability in [0, 1]"))
    }
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: ctel_core::verification::UnknownSuite| e.to_string())
}

fn verify(args: VerifyArgs) -> anyhow::Result<u8> {
    let mut cfg = VerifyConfig {
        seed: args.seed,
        jobs: usize::from(args.jobs),
        mode: args.mode.into(),
        ..VerifyConfig::default()
    };
    if let Some(t) = args.trials {
        cfg.trials_per_point = t;
    }
    let report = match run_suite(args.suite, &cfg) {
        Ok(r) => r,
        Err(VerifyError::Precondition(msg)) => {
            eprintln!("error: {msg}");
            return Ok(EXIT_USAGE);
        }
        Err(e) => return Err(e.into()),
    };
    fs::create_dir_all(&args.out)?;
    let json = args.out.join("report.json");
    let md = args.out.join("report.md");
    fs::write(&json, report.to_json())?;
    fs::write(&md, report.to_markdown())?;

    let verdict = |p: bool| if p { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    if let Some(c) = &report.correctness {
        writeln!(out, "correctness: {}", verdict(c.pass))?;
    }
    if let Some(f) = &report.features {
        let passed = f.entries.iter().filter(|e| e.pass).count();
        writeln!(out, "features: {} ({passed}/{} entries)", verdict(f.pass), f.entries.len())?;
    }
    if let Some(t) = &report.transport {
        writeln!(out, "transport: {}", verdict(t.pass))?;
    }
    writeln!(out, "overall: {}", verdict(report.pass))?;
    writeln!(out, "wrote {} and {}", json.display(), md.display())?;
    Ok(if report.pass { EXIT_OK } else { EXIT_FAILURE })
}

fn serve(args: ServeArgs) -> anyhow::Result<u8> {
    let role = Party::from(args.role);
    let addr = args.listen.unwrap_or_else(|| {
        let port = match role {
            Party::Alice => 7401,
            Party::Bob => 7402,
            Party::Charlie => 7403,
        };
        format!("127.0.0.1:{port}")
    });
    let listener = TcpListener::bind(&addr)?;
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{role} listening on {}", listener.local_addr()?)?;
        out.flush()?;
    }
    let summary = serve_party(role, listener)?;
    println!(
        "{role} finished session {} ({:?}) after {} messages",
        summary.session_id, summary.protocol, summary.messages
    );
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let result = match cli.command {
        Command::Run { protocol } => run::run(protocol),
        Command::Verify(args) => verify(args),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
