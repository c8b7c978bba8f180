use std::path::PathBuf;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Parser)]
#[command(
    name = "spotstore",
    version,
    about = "Inspect, carve and compare Spotlight Store-V2 metadata stores",
    after_help = "Exit status: 0 success, 1 usage error, 2 input could not be parsed, \
                  3 output produced but with warnings."
)]
pub struct Cli {
    /// Output format. Defaults to table on a terminal and json otherwise.
    #[arg(long, short = 'f', global = true, env = "SPOTSTORE_FORMAT", value_enum)]
    pub format: Option<Format>,

    /// More diagnostics on stderr (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarise header, map and pages of a store.
    Inspect { store: PathBuf },

    /// List every record on the subtype-9 pages.
    Records {
        store: PathBuf,
        /// Include extracted strings and identifier candidates.
        #[arg(long)]
        fields: bool,
    },

    /// Dump the attribute-name table (subtype 17). CSV unless told otherwise.
    Attrs { store: PathBuf },

    /// Dump the UTI table (subtype 33). CSV unless told otherwise.
    Utis { store: PathBuf },

    /// Find keywords inside record bodies.
    Search {
        store: PathBuf,
        #[arg(short = 'k', long = "keyword", required = true)]
        keywords: Vec<String>,
    },

    /// Scan a raw image (or `-` for stdin) for store pages.
    Carve {
        image: PathBuf,
        #[arg(long, default_value_t = 512)]
        sector: usize,
        #[arg(long, default_value_t = 16384)]
        page_size: usize,
        /// Test every byte offset, not just sector boundaries.
        #[arg(long)]
        byte_granular: bool,
        /// Write each carved page to DIR/page_<offset>.bin.
        #[arg(long, value_name = "DIR")]
        dump_dir: Option<PathBuf>,
        /// Validation threads (default: one per CPU).
        #[arg(long)]
        workers: Option<usize>,
        /// Bytes read per scan chunk.
        #[arg(long, default_value_t = 8 << 20, hide = true)]
        chunk_size: usize,
    },

    /// Record-level difference between two stores (A then B).
    Diff {
        a: PathBuf,
        b: PathBuf,
        /// Match records on extracted CNIDs instead of body digests (heuristic).
        #[arg(long)]
        by_cnid: bool,
    },

    /// Name-by-name verdict: live record, carved only, or not found.
    Persist {
        store: PathBuf,
        /// Unallocated-space image to carve.
        #[arg(long)]
        image: PathBuf,
        #[arg(short = 'k', long = "keyword", required = true)]
        names: Vec<String>,
    },

    /// Build a synthetic store from a JSON spec.
    Gen {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },

    /// Replay events against a spec and write `.store.db`, `store.db`,
    /// `unallocated.bin` and `manifest.json` into a directory.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(short, long, value_name = "DIR")]
        output: PathBuf,
        /// Events `store.db` lags behind `.store.db`.
        #[arg(long, default_value_t = 0)]
        lag: usize,
        /// Seed for the unallocated-space filler (defaults to the store-spec seed).
        #[arg(long)]
        filler_seed: Option<u64>,
    },
}
