//! The `compshare` command-line tool.

mod commands;
mod config;
mod format;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use compshare_core::store::StoreError;
use compshare_net::{ErrorClass, NetError};

pub use config::Config;

#[derive(Debug, Parser)]
#[command(name = "compshare", version, about = "Share tool compositions with your contacts")]
pub struct Cli {
    /// Store directory.
    #[arg(long, global = true, env = "COMPSHARE_HOME")]
    pub home: Option<PathBuf>,
    /// Relay address, overriding the saved one.
    #[arg(long, global = true, env = "COMPSHARE_RELAY")]
    pub relay: Option<String>,
    /// Print canonical JSON documents instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Log in to the relay once and save the credentials.
    Connect {
        #[arg(long)]
        user: String,
        #[arg(long)]
        token: String,
    },
    /// Show contacts with presence and sharing status.
    Contacts,
    /// List a contact's shared compositions.
    Comps { user: String },
    /// Save a composition's screenshot and print its annotated regions.
    Preview {
        user: String,
        composition: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Normalized point to hit-test, as x,y.
        #[arg(long = "at", value_parser = parse_point)]
        at: Vec<(f64, f64)>,
    },
    /// Show what installing a composition would change.
    Plan {
        user: String,
        composition: String,
        #[command(flatten)]
        pick: Pick,
    },
    /// Install a composition's features and optionally copy its layout.
    Install {
        user: String,
        composition: String,
        #[command(flatten)]
        pick: Pick,
        /// Replace older installed versions.
        #[arg(long)]
        force: bool,
    },
    /// Turn sharing on or off.
    Share { state: OnOff },
    /// Send a message, or wait for incoming ones.
    Chat {
        #[arg(required_unless_present = "listen")]
        user: Option<String>,
        #[arg(required_unless_present = "listen")]
        text: Option<String>,
        #[arg(long, conflicts_with_all = ["user", "text"])]
        listen: bool,
        /// Stop after this many messages.
        #[arg(long, requires = "listen")]
        count: Option<usize>,
    },
    /// Manage your own compositions.
    #[command(subcommand)]
    Compose(ComposeCommand),
    /// Manage the local feature catalog.
    #[command(subcommand)]
    Catalog(CatalogCommand),
    /// Run a relay server.
    Relay {
        #[arg(long, default_value = "0.0.0.0:7474")]
        listen: String,
        /// Lines of `user token`.
        #[arg(long)]
        users: PathBuf,
        /// Lines of `user contact...`.
        #[arg(long)]
        rosters: Option<PathBuf>,
    },
    /// Serve the local web API.
    Daemon {
        #[arg(long, default_value_t = compshare_daemon::DEFAULT_PORT)]
        port: u16,
    },
}

#[derive(Debug, clap::Args)]
pub struct Pick {
    /// Only these features (comma separated); all of them by default.
    #[arg(long, value_delimiter = ',')]
    pub select: Vec<String>,
    /// Also copy the composition into the workspace.
    #[arg(long)]
    pub with_composition: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Subcommand)]
pub enum ComposeCommand {
    /// Record installed features, a screenshot and placements as a composition.
    Capture {
        name: String,
        #[arg(long, value_delimiter = ',', required = true)]
        features: Vec<String>,
        #[arg(long)]
        screenshot: PathBuf,
        /// PART=FEATURE@x,y,w,h with normalized coordinates.
        #[arg(long = "place")]
        place: Vec<String>,
        /// Seconds since the epoch; now by default.
        #[arg(long)]
        created_at: Option<i64>,
    },
    /// List compositions in the workspace.
    List,
    /// Make a composition the active layout.
    Activate { composition: String },
}

#[derive(Debug, Subcommand)]
pub enum CatalogCommand {
    /// Add features from a JSON document of `{"entries": [{"feature", "payload"}]}`.
    Import {
        file: PathBuf,
        /// Also mark the imported features as installed.
        #[arg(long)]
        installed: bool,
    },
    /// List every catalog entry.
    List,
    /// Search by category and text.
    Search {
        text: Option<String>,
        #[arg(long)]
        category: Option<String>,
    },
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|_| format!("bad x in {s:?}"))?;
    let y: f64 = y.trim().parse().map_err(|_| format!("bad y in {s:?}"))?;
    Ok((x, y))
}

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NETWORK: u8 = 2;
pub const EXIT_CONFLICT: u8 = 3;
pub const EXIT_CORRUPT: u8 = 4;

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<NetError> for Failure {
    fn from(e: NetError) -> Self {
        let code = match e.class() {
            ErrorClass::Usage | ErrorClass::NotFound => EXIT_USAGE,
            ErrorClass::Network => EXIT_NETWORK,
            ErrorClass::Conflict => EXIT_CONFLICT,
            ErrorClass::Corrupt => EXIT_CORRUPT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        NetError::from(e).into()
    }
}

impl From<compshare_core::model::ModelError> for Failure {
    fn from(e: compshare_core::model::ModelError) -> Self {
        Self::usage(e.to_string())
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_env("COMPSHARE_LOG").unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .try_init();
    let rt = match tokio::runtime::Builder::new_current_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NETWORK;
        }
    };
    match rt.block_on(commands::execute(cli)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
