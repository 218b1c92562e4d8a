use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use idiorec_cli::commands::{
    cmd_build_index, cmd_evaluate, cmd_ingest, cmd_recommend, cmd_similarity, cmd_stats,
    cmd_synth, BookmarkFormat, GlobalOpts,
};
use idiorec_cli::config::Settings;
use idiorec_cli::eval::EvalParams;
use idiorec_cli::synth::SynthSpec;
use idiorec_core::ontology::OntologyFormat;
use idiorec_core::profile::{LookupMode, ProfileEncoding};

#[derive(Parser)]
#[command(
    name = "idiorec",
    version,
    about = "Bookmark recommendations from an immune-network neighbourhood over a web-directory tree"
)]
struct Cli {
    /// Parameter file with key=value lines; flags set via --set win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override a single parameter, e.g. --set k1=0.2 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Seed for everything random in this invocation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Machine-readable output: a `# key=value` summary line, then CSV.
    #[arg(long, global = true)]
    csv: bool,

    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OntologyFormatArg {
    Tsv,
    Rdf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BookmarkFormatArg {
    Opera,
    Text,
    Netscape,
}

#[derive(Clone, Copy, ValueEnum)]
enum LookupArg {
    Truncation,
    Prefix,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    Tree,
    Integer,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory ontology and write the binary-searchable index.
    BuildIndex {
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Input format; sniffed from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<OntologyFormatArg>,
    },
    /// Turn a bookmark export into a category-vote profile.
    Ingest {
        bookmarks: PathBuf,
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        #[arg(long)]
        user: String,
        /// Output path; defaults to ./<user>.profile.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Export format; sniffed from extension and content when omitted.
        #[arg(long, value_enum)]
        format: Option<BookmarkFormatArg>,
        #[arg(long, value_enum, default_value = "truncation")]
        lookup: LookupArg,
        #[arg(long, value_enum, default_value = "tree")]
        encoding: EncodingArg,
        /// URLs to drop before counting votes, one per line.
        #[arg(long, value_name = "FILE")]
        stop_list: Option<PathBuf>,
    },
    /// Score two profile files against each other.
    Similarity {
        a: PathBuf,
        b: PathBuf,
        /// Needed for integer-encoded profiles.
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
    },
    /// Run the immune network against a profile database and print top-N.
    Recommend {
        profile: PathBuf,
        #[arg(long, value_name = "DIR")]
        db: PathBuf,
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        #[arg(long = "top", alias = "top-n", default_value_t = 10)]
        top: usize,
        /// Write a per-iteration concentration trace CSV here.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
    },
    /// Holdout evaluation of recommendation quality over a profile database.
    Evaluate {
        #[arg(long, value_name = "DIR")]
        db: PathBuf,
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        /// Fraction of each profile to hide, in (0, 1).
        #[arg(long, default_value_t = 0.3)]
        holdout: f64,
        #[arg(long = "top", alias = "top-n", default_value_t = 10)]
        top: usize,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
    /// Generate a seeded synthetic corpus (index plus profile database).
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        #[arg(long, default_value_t = 10)]
        users: usize,
        /// Categories drawn per user.
        #[arg(long = "cats", default_value_t = 8)]
        categories: usize,
        #[arg(long, default_value_t = 1)]
        vote_min: u32,
        #[arg(long, default_value_t = 5)]
        vote_max: u32,
        /// Depth of leaf categories counted from the root.
        #[arg(long, default_value_t = 5)]
        depth: usize,
        #[arg(long, default_value_t = 3)]
        branching: usize,
        /// Per-entry probability of drawing from outside the cluster core.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Core pool size per cluster; default is twice --cats.
        #[arg(long)]
        core: Option<usize>,
    },
    /// Describe an index or profile file.
    Stats {
        path: PathBuf,
        #[arg(long, value_name = "FILE")]
        index: Option<PathBuf>,
    },
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };

    let settings = match Settings::load(cli.config.as_deref(), &cli.set) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let g = GlobalOpts {
        csv: cli.csv,
        verbose: cli.verbose,
        seed: cli.seed,
    };

    let stdout = io::stdout();
    let mut w = stdout.lock();
    let result = match cli.command {
        Command::BuildIndex { input, out, format } => {
            let format = format.map(|f| match f {
                OntologyFormatArg::Tsv => OntologyFormat::Tsv,
                OntologyFormatArg::Rdf => OntologyFormat::RdfSubset,
            });
            cmd_build_index(&input, format, &out, &g, &mut w)
        }
        Command::Ingest {
            bookmarks,
            index,
            user,
            out,
            format,
            lookup,
            encoding,
            stop_list,
        } => {
            let format = format.map(|f| match f {
                BookmarkFormatArg::Opera => BookmarkFormat::Opera,
                BookmarkFormatArg::Text => BookmarkFormat::Text,
                BookmarkFormatArg::Netscape => BookmarkFormat::Netscape,
            });
            let lookup = match lookup {
                LookupArg::Truncation => LookupMode::Truncation,
                LookupArg::Prefix => LookupMode::Prefix,
            };
            let encoding = match encoding {
                EncodingArg::Tree => ProfileEncoding::Tree,
                EncodingArg::Integer => ProfileEncoding::Integer,
            };
            cmd_ingest(
                &bookmarks,
                format,
                &index,
                &user,
                out.as_deref(),
                lookup,
                encoding,
                stop_list.as_deref(),
                &g,
                &mut w,
            )
        }
        Command::Similarity { a, b, index } => {
            cmd_similarity(&a, &b, index.as_deref(), &settings, &g, &mut w)
        }
        Command::Recommend {
            profile,
            db,
            index,
            top,
            trace,
        } => cmd_recommend(
            &profile,
            &db,
            &index,
            top,
            trace.as_deref(),
            &settings,
            &g,
            &mut w,
        ),
        Command::Evaluate {
            db,
            index,
            holdout,
            top,
            seeds,
        } => {
            let params = EvalParams {
                holdout,
                top_n: top,
                seeds,
                base_seed: cli.seed,
            };
            cmd_evaluate(&db, &index, &params, &settings, &g, &mut w)
        }
        Command::Synth {
            out,
            clusters,
            users,
            categories,
            vote_min,
            vote_max,
            depth,
            branching,
            noise,
            core,
        } => {
            let spec = SynthSpec {
                clusters,
                users_per_cluster: users,
                categories_per_user: categories,
                vote_min,
                vote_max,
                depth,
                branching,
                noise,
                core_per_cluster: core,
                seed: cli.seed,
            };
            cmd_synth(&spec, &out, &g, &mut w)
        }
        Command::Stats { path, index } => cmd_stats(&path, index.as_deref(), &g, &mut w),
    };

    match result {
        Ok(()) => {
            let _ = w.flush();
            0
        }
        Err(idiorec_cli::error::CliError::Pipe) => 0,
        Err(e) => {
            let _ = w.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
