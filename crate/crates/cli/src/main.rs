use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpir_cli::*;
use qpir_core::adversary::AdversaryName;
use qpir_core::bounds::Coherence;
use qpir_core::privacy::PrivacyMode;
use qpir_core::protocols::ProtocolKind;

#[derive(Parser)]
#[command(name = "qpir-lab", version, about = "Two-party QPIR simulation and analysis experiments")]
struct Cli {
    /// Report format on stdout.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Directory receiving `<command>.json` and `<command>.csv`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized fixtures.
    #[arg(long, global = true, default_value_t = 0x5eed)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Target {
    #[arg(long, default_value = "kerenidis")]
    protocol: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Append the uncompute-and-return rounds.
    #[arg(long)]
    cleanup: bool,
}

impl Target {
    fn kind(&self) -> qpir_core::Result<ProtocolKind> {
        self.protocol.parse()
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decode probability for every database and index.
    Correctness(Target),
    /// Message counts against the closed forms.
    Communication(Target),
    /// Pairwise server-view distances and the privacy-error bounds.
    Privacy {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "anchored")]
        mode: String,
        #[arg(long, default_value = "honest")]
        adversary: String,
        /// Privacy error the protocol is held to.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    Attack {
        #[command(subcommand)]
        attack: Attack,
    },
    Bounds(BoundsArgs),
    Suite {
        #[command(subcommand)]
        which: Suite,
    },
}

#[derive(Subcommand)]
enum Attack {
    /// Server running on a purified database.
    Purify(Target),
    /// Client measure-and-rewind database extraction.
    Reconstruct {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value = "coherent-reference")]
        coherence: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Nayak,
    Reconstruction,
    ChainRule,
    Theorem32,
}

#[derive(Args)]
struct BoundsArgs {
    kind: Option<BoundKind>,
    #[arg(long)]
    nayak: bool,
    #[arg(long)]
    reconstruction: bool,
    #[arg(long = "chain-rule")]
    chain_rule: bool,
    #[arg(long)]
    theorem32: bool,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value = "kerenidis")]
    protocol: String,
    #[arg(long, default_value = "coherent-reference")]
    coherence: String,
    /// Rotation angles of the γ-family.
    #[arg(long, value_delimiter = ',')]
    thetas: Option<Vec<f64>>,
    /// Use the recovery that restores the ancilla instead of discarding it.
    #[arg(long)]
    proper: bool,
}

#[derive(Subcommand)]
enum Suite {
    All,
}

fn run(cli: &Cli) -> qpir_core::Result<(String, Vec<Row>)> {
    Ok(match &cli.command {
        Command::Correctness(t) => ("correctness".into(), correctness(t.kind()?, t.n, t.cleanup, cli.seed)?),
        Command::Communication(t) => ("communication".into(), communication(t.kind()?, t.n, t.cleanup)?),
        Command::Privacy {
            target,
            mode,
            adversary,
            eps,
        } => {
            let mode: PrivacyMode = mode.parse()?;
            let adversary: AdversaryName = adversary.parse()?;
            (
                "privacy".into(),
                privacy(target.kind()?, target.n, target.cleanup, mode, adversary, *eps)?,
            )
        }
        Command::Attack { attack } => match attack {
            Attack::Purify(t) => ("attack-purify".into(), attack_purify(t.kind()?, t.n, t.cleanup)?),
            Attack::Reconstruct { target, coherence } => {
                let c: Coherence = coherence.parse()?;
                (
                    "attack-reconstruct".into(),
                    attack_reconstruct(target.kind()?, target.n, target.cleanup, c)?,
                )
            }
        },
        Command::Bounds(b) => {
            let flags = [
                (b.nayak, BoundKind::Nayak),
                (b.reconstruction, BoundKind::Reconstruction),
                (b.chain_rule, BoundKind::ChainRule),
                (b.theorem32, BoundKind::Theorem32),
            ];
            let mut chosen: Vec<BoundKind> = flags.iter().filter(|(on, _)| *on).map(|(_, k)| *k).collect();
            chosen.extend(b.kind);
            let kind = match chosen.as_slice() {
                [k] => *k,
                _ => {
                    return Err(qpir_core::QpirError::InvalidArgument(
                        "choose exactly one of nayak, reconstruction, chain-rule, theorem32".into(),
                    ))
                }
            };
            match kind {
                BoundKind::Nayak => ("bounds-nayak".into(), bounds_nayak(b.delta, b.eps, b.n as f64)),
                BoundKind::Reconstruction => ("bounds-reconstruction".into(), bounds_reconstruction(b.delta, b.eps, b.n)),
                BoundKind::ChainRule => {
                    let c: Coherence = b.coherence.parse()?;
                    ("bounds-chain-rule".into(), bounds_chain_rule(b.protocol.parse()?, b.n, false, c)?)
                }
                BoundKind::Theorem32 => {
                    let thetas = b.thetas.clone().unwrap_or_else(|| DEFAULT_THETAS.to_vec());
                    ("bounds-theorem32".into(), bounds_theorem(b.n, &thetas, !b.proper)?)
                }
            }
        }
        Command::Suite { which: Suite::All } => ("suite-all".into(), suite_all(cli.seed)?),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format: Format = match cli.format.parse() {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (stem, rows) = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match render(&rows, format) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if let Some(dir) = &cli.out {
        if let Err(e) = write_reports(&rows, dir, &stem) {
            eprintln!("error: writing reports to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed", rows.len());
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
