//! `mpcmp`: run secure comparison protocols, audits and replays.
//!
//! Every command prints one JSON record on stdout.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mpcmp_core::audit::{self, ComplexityParams, ViewAuditParams, ViewProtocol};
use mpcmp_core::field::{is_prime, MERSENNE_61};
use mpcmp_core::runtime::{replay, run_session, InMemoryTransport, TcpTransport, Transport};
use mpcmp_core::{Outcome, ProtocolConfig, ProtocolSpec, SessionOptions};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mpcmp", version, about = "Information-theoretic secure comparison over Shamir shares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Is the first input greater than the second?
    Compare(Run),
    Max(Run),
    Min(Run),
    Median {
        #[command(flatten)]
        run: Run,
        /// Break ties by input position.
        #[arg(long)]
        tie_safe: bool,
        /// Open the median's position instead of its value.
        #[arg(long)]
        reveal_index: bool,
    },
    Rank {
        #[command(flatten)]
        run: Run,
        /// Number of strictly greater inputs; 0 is the maximum.
        #[arg(long)]
        rank_t: usize,
        #[arg(long)]
        tie_safe: bool,
    },
    /// Highest bid and the position of its bidder.
    Auction(Run),
    /// Largest group minimum, e.g. --groups "3,7;5,6".
    Minimax {
        #[command(flatten)]
        run: Run,
        #[arg(long)]
        groups: String,
    },
    /// Squared distances to the median, opened to one party.
    Outliers {
        #[command(flatten)]
        run: Run,
        #[arg(long)]
        server: usize,
    },
    #[command(subcommand)]
    Audit(AuditCommand),
    /// Re-execute a transcript and diff it.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },
}

#[derive(Subcommand)]
enum AuditCommand {
    /// Exact Shamir secrecy by enumeration.
    Shares {
        #[arg(long, default_value_t = 11)]
        q: u64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
    },
    /// Monte-Carlo view distance for two input pairs.
    Views {
        #[arg(long, value_enum, default_value_t = ViewKind::Compare)]
        protocol: ViewKind,
        #[arg(long, default_value_t = 37)]
        q: u64,
        #[arg(long, default_value_t = 3)]
        bits: u32,
        /// Comma-separated party numbers.
        #[arg(long, default_value = "3")]
        coalition: String,
        #[arg(long, default_value = "5,2")]
        first: String,
        #[arg(long, default_value = "6,1")]
        second: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, env = "MPCMP_SEED")]
        seed: Option<u64>,
    },
    /// Measured invocations against the bounds.
    Complexity {
        #[arg(long)]
        q: Option<u64>,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
        /// Input widths, e.g. "3,4,5".
        #[arg(long, default_value = "3,4,5,6,7,8")]
        bits: String,
        /// Input counts for the max circuit.
        #[arg(long, default_value = "2,3,4,5,6,7,8")]
        inputs: String,
        /// Also print a table on stderr.
        #[arg(long)]
        table: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewKind {
    Compare,
    Sci,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum TransportArg {
    Mem,
    Tcp,
}

#[derive(Args)]
struct Run {
    /// Comma-separated secrets; input k belongs to party (k mod N) + 1.
    #[arg(long, default_value = "")]
    inputs: String,
    #[arg(long)]
    bits: Option<u32>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, value_enum)]
    transport: Option<TransportArg>,
    /// TCP listeners bind base+1..base+N; OS-assigned ports when absent.
    #[arg(long)]
    base_port: Option<u16>,
    #[arg(long, env = "MPCMP_SEED")]
    seed: Option<u64>,
    /// Write the session transcript here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// JSON file with any of n, t, q, bits, alphas, seed, transport, base_port.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Human-readable summary on stderr.
    #[arg(long)]
    summary: bool,
}

#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: Option<usize>,
    t: Option<usize>,
    #[serde(default, deserialize_with = "number_or_string")]
    q: Option<u64>,
    bits: Option<u32>,
    alphas: Option<Vec<Value>>,
    seed: Option<u64>,
    transport: Option<TransportArg>,
    base_port: Option<u16>,
}

fn number_or_string<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    use serde::de::Error;
    match Option::<Value>::deserialize(d)? {
        None => Ok(None),
        Some(v) => parse_u64(&v).map(Some).map_err(D::Error::custom),
    }
}

fn parse_u64(v: &Value) -> Result<u64, String> {
    match v {
        Value::Number(n) => n.as_u64().ok_or_else(|| format!("{n} is not a nonnegative integer")),
        Value::String(s) => s.parse().map_err(|_| format!("{s:?} is not a nonnegative integer")),
        other => Err(format!("{other} is not a nonnegative integer")),
    }
}

use serde::Deserialize as _;

struct Resolved {
    cfg: ProtocolConfig,
    transport: TransportArg,
    base_port: Option<u16>,
    seed_source: &'static str,
}

fn parse_list(s: &str, what: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<u64>().with_context(|| format!("{what}: {x:?} is not a nonnegative integer")))
        .collect()
}

fn parse_groups(s: &str) -> Result<Vec<Vec<u64>>> {
    let groups: Vec<Vec<u64>> = s.split(';').map(|g| parse_list(g, "groups")).collect::<Result<_>>()?;
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        bail!("groups: every group needs at least one input (got {s:?})");
    }
    Ok(groups)
}

fn resolve(run: &Run) -> Result<Resolved> {
    let file = match &run.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str::<ConfigFile>(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => ConfigFile::default(),
    };
    let n = run.n.or(file.n).unwrap_or(3);
    let t = run.t.or(file.t).unwrap_or(1);
    let q = run.q.or(file.q).unwrap_or(MERSENNE_61);
    let bits = run.bits.or(file.bits).unwrap_or(16);
    let (seed, seed_source) = match (run.seed, file.seed) {
        (Some(s), _) => (s, "flag_or_env"),
        (None, Some(s)) => (s, "config"),
        (None, None) => (rand::random::<u64>(), "entropy"),
    };

    if n < 2 * t + 1 {
        bail!("N = {n} and T = {t} violate N >= 2T+1 (multiplication needs N > 2T)");
    }
    if !is_prime(q) {
        bail!("q = {q} is not prime");
    }
    if bits == 0 || bits + 2 >= 64 || (1u64 << (bits + 2)) >= q {
        bail!("field too small: need 2^(L+2) < q, got L = {bits}, q = {q}");
    }
    let mut cfg = ProtocolConfig::new(n, t, q, bits, seed)?;
    if let Some(alphas) = file.alphas {
        let alphas = alphas.iter().map(parse_u64).collect::<Result<Vec<_>, _>>().map_err(anyhow::Error::msg)?;
        cfg = cfg.with_alphas(alphas)?;
    }
    Ok(Resolved {
        cfg,
        transport: run.transport.or(file.transport).unwrap_or(TransportArg::Mem),
        base_port: run.base_port.or(file.base_port),
        seed_source,
    })
}

fn check_range(values: &[u64], bits: u32) -> Result<()> {
    for &v in values {
        if v >> bits != 0 {
            bail!("input {v} out of range: inputs must be < 2^L = {} (L = {bits})", 1u64 << bits);
        }
    }
    Ok(())
}

fn summary(o: &Outcome) -> String {
    match o {
        Outcome::Comparison { verdict, .. } => verdict.to_string(),
        Outcome::Bit { value } | Outcome::Value { value } => value.to_string(),
        Outcome::Index { index } => format!("index={index}"),
        Outcome::Winner { value, index } => format!("winner={index} bid={value}"),
        Outcome::Distances { values } => values.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        Outcome::Nothing => "-".into(),
    }
}

fn run_protocol(command: &str, run: &Run, spec: ProtocolSpec, output_party: Option<usize>) -> Result<Value> {
    let r = resolve(run)?;
    let cfg = &r.cfg;
    match &spec {
        ProtocolSpec::Maximin { groups } => check_range(&groups.concat(), cfg.bits)?,
        ProtocolSpec::Compare { inputs }
        | ProtocolSpec::Max { inputs }
        | ProtocolSpec::Min { inputs }
        | ProtocolSpec::Auction { inputs }
        | ProtocolSpec::Median { inputs, .. }
        | ProtocolSpec::Rank { inputs, .. }
        | ProtocolSpec::Outliers { inputs, .. } => {
            if inputs.is_empty() {
                bail!("--inputs is required");
            }
            check_range(inputs, cfg.bits)?
        }
        _ => {}
    }
    let transport: Box<dyn Transport> = match r.transport {
        TransportArg::Mem => Box::new(InMemoryTransport::new(cfg.n)),
        TransportArg::Tcp => Box::new(TcpTransport::connect(cfg.n, r.base_port).context("starting TCP transport")?),
    };
    let result = run_session(&spec, cfg, transport, SessionOptions::default())?;
    if let Some(path) = &run.transcript {
        result.transcript.write_to(path)?;
    }
    let outcome = match output_party {
        Some(p) => result.outputs[p - 1].clone(),
        None => result.public_output().clone(),
    };
    let inv = &result.transcript.invocations;
    let text = summary(&outcome);
    if run.summary {
        eprintln!(
            "{command}: {text} ({} invocations, {} rounds, {} messages, seed {})",
            inv.core(),
            result.transcript.rounds,
            result.transcript.messages.len(),
            cfg.seed
        );
    }
    Ok(json!({
        "command": command,
        "summary": text,
        "result": outcome,
        "n": cfg.n,
        "t": cfg.t,
        "q": cfg.field.modulus().to_string(),
        "bits": cfg.bits,
        "seed": cfg.seed,
        "seed_source": r.seed_source,
        "transport": match r.transport { TransportArg::Mem => "mem", TransportArg::Tcp => "tcp" },
        "invocations": {
            "core": inv.core(),
            "verification": inv.mask_verification(),
            "total": inv.total(),
            "by_step": inv.by_step(),
        },
        "rounds": result.transcript.rounds,
        "messages": result.transcript.messages.len(),
        "mask_retries": result.transcript.mask_retries,
        "transcript": run.transcript.as_ref().map(|p| p.display().to_string()),
    }))
}

fn pair(s: &str, what: &str) -> Result<(u64, u64)> {
    match parse_list(s, what)?[..] {
        [a, b] => Ok((a, b)),
        _ => bail!("{what}: expected two comma-separated values, got {s:?}"),
    }
}

fn audit(cmd: AuditCommand) -> Result<Value> {
    Ok(match cmd {
        AuditCommand::Shares { q, n, t } => {
            let r = audit::share_secrecy_audit(q, n, t)?;
            json!({ "command": "audit shares", "report": r, "pass": r.pass })
        }
        AuditCommand::Views {
            protocol,
            q,
            bits,
            coalition,
            first,
            second,
            samples,
            seed,
        } => {
            let coalition: Vec<usize> = parse_list(&coalition, "coalition")?.into_iter().map(|p| p as usize).collect();
            let protocol = match protocol {
                ViewKind::Compare => ViewProtocol::Compare,
                ViewKind::Sci => ViewProtocol::Sci,
            };
            let mut p = ViewAuditParams::new(protocol, q, bits, coalition, pair(&first, "first")?, pair(&second, "second")?);
            p.samples = samples;
            p.seed = seed.unwrap_or_else(rand::random);
            let r = audit::view_indistinguishability_audit(&p)?;
            json!({ "command": "audit views", "pass": r.pass, "report": r })
        }
        AuditCommand::Complexity {
            q,
            n,
            t,
            bits,
            inputs,
            table,
        } => {
            let params = ComplexityParams {
                q: q.unwrap_or(MERSENNE_61),
                n,
                t,
                bits: parse_list(&bits, "bits")?.into_iter().map(|b| b as u32).collect(),
                inputs: parse_list(&inputs, "inputs")?.into_iter().map(|k| k as usize).collect(),
                ..ComplexityParams::default()
            };
            let r = audit::complexity_report(&params)?;
            if table {
                eprint!("{}", r.table());
            }
            json!({ "command": "audit complexity", "pass": r.pass, "report": r })
        }
    })
}

fn dispatch(cli: Cli) -> Result<(Value, bool)> {
    let ok = |v: Value| Ok((v, true));
    match cli.command {
        Command::Compare(run) => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            if inputs.len() != 2 {
                bail!("compare takes exactly two inputs, got {}", inputs.len());
            }
            ok(run_protocol("compare", &run, ProtocolSpec::Compare { inputs }, None)?)
        }
        Command::Max(run) => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            ok(run_protocol("max", &run, ProtocolSpec::Max { inputs }, None)?)
        }
        Command::Min(run) => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            ok(run_protocol("min", &run, ProtocolSpec::Min { inputs }, None)?)
        }
        Command::Auction(run) => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            ok(run_protocol("auction", &run, ProtocolSpec::Auction { inputs }, None)?)
        }
        Command::Median {
            run,
            tie_safe,
            reveal_index,
        } => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            let spec = ProtocolSpec::Median {
                inputs,
                tie_safe,
                reveal_index,
            };
            ok(run_protocol("median", &run, spec, None)?)
        }
        Command::Rank { run, rank_t, tie_safe } => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            if rank_t >= inputs.len().max(1) {
                bail!("--rank-t {rank_t} out of range: need 0 <= t < {} inputs", inputs.len());
            }
            let spec = ProtocolSpec::Rank {
                inputs,
                t: rank_t,
                tie_safe,
            };
            ok(run_protocol("rank", &run, spec, None)?)
        }
        Command::Minimax { run, groups } => {
            let groups = parse_groups(&groups)?;
            ok(run_protocol("minimax", &run, ProtocolSpec::Maximin { groups }, None)?)
        }
        Command::Outliers { run, server } => {
            let inputs = parse_list(&run.inputs, "inputs")?;
            let n = resolve(&run)?.cfg.n;
            if server == 0 || server > n {
                bail!("--server {server} is not a party (parties are 1..={n})");
            }
            ok(run_protocol("outliers", &run, ProtocolSpec::Outliers { inputs, server }, Some(server))?)
        }
        Command::Audit(cmd) => {
            let v = audit(cmd)?;
            let pass = v["pass"].as_bool().unwrap_or(false);
            Ok((v, pass))
        }
        Command::Replay { transcript } => {
            let report = replay(&transcript).with_context(|| format!("replaying {}", transcript.display()))?;
            let identical = report.identical;
            Ok((
                json!({
                    "command": "replay",
                    "verdict": report.verdict(),
                    "lines_compared": report.lines_compared,
                    "first_divergence": report.first_divergence,
                    "outputs": report.outputs,
                }),
                identical,
            ))
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok((record, success)) => {
            println!("{record}");
            if success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
