use std::io::{self, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use pita_core::telemetry::ScrubConfig;
use pita_gateway::commands::{self, Format, PatchArgs, ReportArgs, ScanArgs, EXIT_INPUT};
use pita_gateway::server::{bind_loopback, serve};
use pita_gateway::{Service, ServiceConfig};

#[derive(Parser)]
#[command(name = "pita", version, about = "Detect dark patterns in saved pages and patch them with reversible UI enhancements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the dark patterns found in HTML files or directories of them.
    Scan {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Only look for this site's patterns (default: every site).
        #[arg(long)]
        site: Option<String>,
        #[arg(long, env = "PITA_CATALOG")]
        catalog: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Apply one enhancement, or every saved selection, to a page.
    Patch {
        file: PathBuf,
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long)]
        enhancement: Option<String>,
        /// Profile file to take selections from when no pattern is given.
        #[arg(long, env = "PITA_PROFILE")]
        profile: Option<PathBuf>,
        #[arg(long)]
        site: Option<String>,
        #[arg(long, env = "PITA_CATALOG")]
        catalog: Option<PathBuf>,
        /// Where to write the patched page (default: standard output).
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the patch receipts as JSON.
        #[arg(long, value_name = "PATH")]
        emit_receipt: Option<PathBuf>,
    },
    /// Summarize a directory of JSONL usage logs.
    Report {
        log_dir: PathBuf,
        #[arg(long)]
        days: Option<usize>,
        /// First day of the matrix, as YYYY-MM-DD.
        #[arg(long)]
        start: Option<NaiveDate>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Run the JSON message service on a loopback port.
    Serve {
        #[arg(long, default_value_t = 7411)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
        #[arg(long, env = "PITA_CATALOG")]
        catalog: Option<PathBuf>,
        #[arg(long, env = "PITA_PROFILE")]
        profile: Option<PathBuf>,
        #[arg(long)]
        log_dir: Option<PathBuf>,
        /// Record telemetry for messages that do not say otherwise.
        #[arg(long)]
        consent: bool,
        /// Extra word to redact from logs; may be repeated.
        #[arg(long = "redact-name", value_name = "NAME")]
        redact_names: Vec<String>,
    },
}

fn run(cli: Cli) -> io::Result<u8> {
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    match cli.command {
        Command::Scan { paths, site, catalog, format } => {
            commands::scan(&ScanArgs { paths, site, catalog, format }, &mut out, &mut err)
        }
        Command::Patch { file, pattern, enhancement, profile, site, catalog, out: dest, emit_receipt } => {
            let args = PatchArgs { file, pattern, enhancement, profile, site, catalog, out: dest, emit_receipt };
            commands::patch(&args, &mut out, &mut err)
        }
        Command::Report { log_dir, days, start, format } => {
            commands::report(&ReportArgs { log_dir, days, start, format }, &mut out, &mut err)
        }
        Command::Serve { port, bind, catalog, profile, log_dir, consent, redact_names } => {
            let catalog = match commands::resolve_catalog(catalog.as_deref()) {
                Ok(c) => c,
                Err(m) => {
                    writeln!(err, "pita serve: {m}")?;
                    return Ok(EXIT_INPUT);
                }
            };
            let config = ServiceConfig {
                catalog,
                profile_path: profile,
                log_dir,
                consent,
                scrub: ScrubConfig { names: redact_names },
            };
            drop((out, err));
            serve_forever(SocketAddr::new(bind, port), Service::new(config))
        }
    }
}

fn serve_forever(addr: SocketAddr, service: Service) -> io::Result<u8> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = match bind_loopback(addr).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("pita serve: {e}");
                return Ok(EXIT_INPUT);
            }
        };
        println!("listening on http://{}/v1/message", listener.local_addr()?);
        io::stdout().flush()?;
        serve(listener, std::sync::Arc::new(service), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(0)
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pita: {e}");
            ExitCode::from(1)
        }
    }
}
