//! CLI for the spatial stego-packet protocol. Every command is a client of
//! the HTTP service: point it at a running one with `--server`, or let it
//! self-host an in-process instance on a loopback port.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use clap::{Parser, Subcommand};

use spatial_client::{
    codes, Client, ClientError, DecodeRequest, EncodeRequest, InspectRequest, KeygenRequest,
    SimulateRequest,
};
use spatial_core::session::parse_session_text;

// Exit codes: 0 success, 2 MAC failure, 3 structural/format failure,
// 4 capacity/config failure, 1 anything else.
const EXIT_MAC: u8 = 2;
const EXIT_STRUCTURAL: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser)]
#[command(name = "spatial", about = "Hide framed message packets inside gene-like carrier sequences", version)]
struct Cli {
    /// Service to talk to; by default an in-process instance is started.
    #[arg(long, global = true)]
    server: Option<String>,

    /// Seed for tear plans and embedding filler; random when omitted.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Session file (shared secret) used by encode/decode/simulate/inspect.
    #[arg(long, global = true)]
    session: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a session file with a fresh MAC key and default parameters.
    Keygen {
        /// Where to write the session file.
        #[arg(long)]
        out: PathBuf,
        /// Number of packets N the message is torn into.
        #[arg(long)]
        n_packets: usize,
        /// Total message size in bits (8 x plaintext bytes).
        #[arg(long)]
        total_bits: usize,
        /// FASTA file with 2-3 carrier sequences.
        #[arg(long)]
        carriers: PathBuf,
    },
    /// Encode a plaintext file into one envelope file per packet.
    Encode {
        /// File holding the exact message bytes.
        #[arg(long)]
        plaintext: PathBuf,
        /// Directory for the `<seq_bits>.spkt` envelope files.
        #[arg(long)]
        out_dir: PathBuf,
        /// Tear plan such as `(23,(8,(9,32)))`; random when omitted.
        #[arg(long)]
        plan: Option<String>,
    },
    /// Decode envelope files (any order) back to the plaintext.
    Decode {
        /// Envelope files; exactly N of them.
        #[arg(required = true)]
        envelopes: Vec<PathBuf>,
        /// Write the plaintext here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run encode -> simulated channels -> decode and report the outcome.
    Simulate {
        #[arg(long)]
        plaintext: PathBuf,
        /// Channels config: `[channel]` stanzas of key=value lines.
        #[arg(long)]
        channels: PathBuf,
        /// Additionally push surviving packets through real local sockets.
        #[arg(long)]
        loopback: bool,
    },
    /// Dissect one envelope: detected template, framing fields, MAC status.
    Inspect {
        envelope: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.exit)
        }
    }
}

struct Failure {
    error: anyhow::Error,
    exit: u8,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let exit = match error.downcast_ref::<ClientError>().and_then(ClientError::code) {
            Some(codes::MAC_FAILURE) => EXIT_MAC,
            Some(codes::STRUCTURAL) => EXIT_STRUCTURAL,
            Some(codes::CAPACITY) | Some(codes::CONFIG) => EXIT_CONFIG,
            _ => 1,
        };
        Failure { error, exit }
    }
}

async fn run(cli: Cli) -> Result<(), Failure> {
    let client = match &cli.server {
        Some(url) => Client::new(url.clone()),
        None => self_host().await.map_err(Failure::from)?,
    };
    let seed = cli.seed.unwrap_or_else(rand::random);

    match &cli.command {
        Command::Keygen {
            out,
            n_packets,
            total_bits,
            carriers,
        } => keygen(&client, out, *n_packets, *total_bits, carriers).await,
        Command::Encode {
            plaintext,
            out_dir,
            plan,
        } => encode(&client, &cli, seed, plaintext, out_dir, plan.as_deref()).await,
        Command::Decode { envelopes, out } => decode(&client, &cli, envelopes, out.as_deref()).await,
        Command::Simulate {
            plaintext,
            channels,
            loopback,
        } => simulate(&client, &cli, seed, plaintext, channels, *loopback).await,
        Command::Inspect { envelope } => inspect(&client, &cli, envelope).await,
    }
}

/// Start an in-process service on an ephemeral loopback port.
async fn self_host() -> Result<Client> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
        .await
        .context("binding loopback port for the embedded service")?;
    let addr = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, spatial_service::create_app()).await {
            eprintln!("embedded service failed: {}", e);
        }
    });
    Ok(Client::new(format!("http://{}", addr)))
}

/// Load the session file plus the carriers FASTA it points at (a relative
/// path is resolved against the session file's directory).
fn load_session_material(cli: &Cli) -> Result<(String, String)> {
    let path = cli
        .session
        .as_ref()
        .ok_or_else(|| anyhow!("--session is required for this command"))?;
    let session_file = std::fs::read_to_string(path)
        .with_context(|| format!("reading session file {}", path.display()))?;
    let parsed = parse_session_text(&session_file)
        .map_err(|e| anyhow!("session file {}: {}", path.display(), e))?;
    let carriers_path = resolve_relative(path, &parsed.carriers_path);
    let carriers_fasta = std::fs::read_to_string(&carriers_path)
        .with_context(|| format!("reading carriers {}", carriers_path.display()))?;
    Ok((session_file, carriers_fasta))
}

fn resolve_relative(session_path: &Path, carriers: &str) -> PathBuf {
    let raw = PathBuf::from(carriers);
    if raw.is_absolute() {
        raw
    } else {
        session_path.parent().unwrap_or(Path::new(".")).join(raw)
    }
}

async fn keygen(
    client: &Client,
    out: &Path,
    n_packets: usize,
    total_bits: usize,
    carriers: &Path,
) -> Result<(), Failure> {
    let carriers_fasta = std::fs::read_to_string(carriers)
        .with_context(|| format!("reading carriers {}", carriers.display()))
        .map_err(Failure::from)?;
    // Record the path relative to where the session file will live.
    let recorded = pathdiff(carriers, out.parent().unwrap_or(Path::new(".")));
    let response = client
        .keygen(&KeygenRequest {
            n_packets,
            total_message_bits: total_bits,
            carriers_path: recorded,
            carriers_fasta,
        })
        .await
        .map_err(|e| Failure::from(anyhow::Error::new(e)))?;
    std::fs::write(out, response.session_file)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(Failure::from)?;
    println!("wrote session file {}", out.display());
    Ok(())
}

/// Best-effort relative path from the session directory to the carriers.
fn pathdiff(carriers: &Path, session_dir: &Path) -> String {
    match (carriers.canonicalize(), session_dir.canonicalize()) {
        (Ok(c), Ok(d)) => match c.strip_prefix(&d) {
            Ok(rel) => rel.display().to_string(),
            Err(_) => c.display().to_string(),
        },
        _ => carriers.display().to_string(),
    }
}

async fn encode(
    client: &Client,
    cli: &Cli,
    seed: u64,
    plaintext: &Path,
    out_dir: &Path,
    plan: Option<&str>,
) -> Result<(), Failure> {
    let (session_file, carriers_fasta) = load_session_material(cli).map_err(Failure::from)?;
    let message = std::fs::read(plaintext)
        .with_context(|| format!("reading plaintext {}", plaintext.display()))
        .map_err(Failure::from)?;

    let response = client
        .encode(&EncodeRequest {
            session_file,
            carriers_fasta,
            plaintext_b64: BASE64.encode(&message),
            seed,
            plan: plan.map(String::from),
        })
        .await
        .map_err(|e| Failure::from(anyhow::Error::new(e)))?;

    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::from)?;

    println!("seed: {}", seed);
    println!("plan: {}", response.plan);
    println!("capacity:");
    for (k, carrier) in response.report.carriers.iter().enumerate() {
        println!(
            "  [{}] {}: {} nt, {} variable positions",
            k, carrier.name, carrier.length, carrier.variable_positions
        );
    }
    println!("packets:");
    for packet in &response.report.packets {
        println!(
            "  {} -> {} (template {}): stream {} nt / capacity {}",
            packet.seq_bits,
            packet.template_name,
            packet.template_index,
            packet.stream_len,
            packet.capacity
        );
    }
    for envelope in &response.envelopes {
        let path = out_dir.join(format!("{}.spkt", envelope.seq_bits));
        std::fs::write(&path, &envelope.wire)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::from)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

async fn decode(
    client: &Client,
    cli: &Cli,
    envelopes: &[PathBuf],
    out: Option<&Path>,
) -> Result<(), Failure> {
    let (session_file, carriers_fasta) = load_session_material(cli).map_err(Failure::from)?;

    let mut wires = Vec::with_capacity(envelopes.len());
    let mut seq_to_file: HashMap<String, &Path> = HashMap::new();
    for path in envelopes {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading envelope {}", path.display()))
            .map_err(Failure::from)?;
        if let Some(seq_line) = text.lines().nth(1) {
            seq_to_file.entry(seq_line.to_string()).or_insert(path);
        }
        wires.push(text);
    }

    let response = client
        .decode(&DecodeRequest {
            session_file,
            carriers_fasta,
            envelopes: wires,
        })
        .await;

    let response = match response {
        Ok(r) => r,
        Err(e) => {
            // Name the offending file alongside the packet number.
            if let ClientError::Api(api) = &e {
                if api.code == codes::MAC_FAILURE {
                    if let Some(file) = api.seq_bits.as_ref().and_then(|s| seq_to_file.get(s)) {
                        eprintln!("offending file: {}", file.display());
                    }
                }
            }
            return Err(Failure::from(anyhow::Error::new(e)));
        }
    };

    let plaintext = BASE64
        .decode(&response.plaintext_b64)
        .context("service returned invalid base64")
        .map_err(Failure::from)?;
    match out {
        Some(path) => {
            std::fs::write(path, &plaintext)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(Failure::from)?;
            println!("wrote {} bytes to {}", plaintext.len(), path.display());
        }
        None => {
            std::io::stdout()
                .write_all(&plaintext)
                .context("writing plaintext")
                .map_err(Failure::from)?;
        }
    }
    Ok(())
}

async fn simulate(
    client: &Client,
    cli: &Cli,
    seed: u64,
    plaintext: &Path,
    channels: &Path,
    loopback: bool,
) -> Result<(), Failure> {
    let (session_file, carriers_fasta) = load_session_material(cli).map_err(Failure::from)?;
    let message = std::fs::read(plaintext)
        .with_context(|| format!("reading plaintext {}", plaintext.display()))
        .map_err(Failure::from)?;
    let channels_config = std::fs::read_to_string(channels)
        .with_context(|| format!("reading channels config {}", channels.display()))
        .map_err(Failure::from)?;

    let response = client
        .simulate(&SimulateRequest {
            session_file,
            carriers_fasta,
            plaintext_b64: BASE64.encode(&message),
            channels_config,
            seed,
            loopback,
        })
        .await
        .map_err(|e| Failure::from(anyhow::Error::new(e)))?;

    println!("seed: {}", seed);
    println!("events:");
    for line in &response.events {
        println!("  {}", line);
    }
    if !response.rejected.is_empty() {
        println!("rejected packets (bad MAC): {}", response.rejected.join(", "));
    }
    println!(
        "arrivals: {} ({} kept after dedup)",
        response.arrivals, response.kept
    );

    if response.success {
        let plaintext = BASE64
            .decode(response.plaintext_b64.unwrap_or_default())
            .context("service returned invalid base64")
            .map_err(Failure::from)?;
        println!("decoded: {}", String::from_utf8_lossy(&plaintext));
        Ok(())
    } else {
        let failure = response.failure.unwrap_or_else(|| "delivery failed".into());
        let exit = if response.rejected.is_empty() {
            EXIT_STRUCTURAL
        } else {
            EXIT_MAC
        };
        Err(Failure {
            error: anyhow!("simulation did not decode: {}", failure),
            exit,
        })
    }
}

async fn inspect(client: &Client, cli: &Cli, envelope: &Path) -> Result<(), Failure> {
    let (session_file, carriers_fasta) = load_session_material(cli).map_err(Failure::from)?;
    let text = std::fs::read_to_string(envelope)
        .with_context(|| format!("reading envelope {}", envelope.display()))
        .map_err(Failure::from)?;

    let report = client
        .inspect(&InspectRequest {
            session_file,
            carriers_fasta,
            envelope: text,
        })
        .await
        .map_err(|e| Failure::from(anyhow::Error::new(e)))?;

    println!("packet:   {}", report.seq_bits);
    println!(
        "path:     {}",
        report
            .path
            .iter()
            .map(u8::to_string)
            .collect::<Vec<_>>()
            .join(".")
    );
    println!(
        "template: {} (index {})",
        report.template_name, report.template_index
    );
    println!("header:   {} (size {})", report.header, report.size);
    println!("payload:  {} ({} nt)", report.payload, report.payload.len());
    println!("trailer:  {}", report.trailer);
    println!("filler:   {} nt", report.filler.len());
    println!("MAC:      {}", if report.mac_ok { "OK" } else { "FAIL" });
    Ok(())
}
