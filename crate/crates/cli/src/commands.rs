//! The seven subcommands. Each takes parsed arguments plus the layered
//! settings and writes its report to the supplied writer, which keeps the
//! commands callable from tests without spawning processes.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use idiorec_core::ais;
use idiorec_core::ingest::{
    clean, parse_netscape_html, parse_opera_adr, parse_plaintext, ParsedBookmarks, StopList,
};
use idiorec_core::ontology::{parse_ontology, OntologyFormat, OntologyIndex, INDEX_HEADER};
use idiorec_core::profile::{
    build_profile, parse_profile, parse_profile_standalone, serialize_profile, LookupMode,
    ProfileEncoding, ProfileError, WebProfile, PROFILE_HEADER,
};
use idiorec_core::similarity::{
    linear_match, pearson_flat, quadratic_match, similarity_tree, MatchFn, Measure,
};

use crate::config::Settings;
use crate::error::CliError;
use crate::eval::{evaluate, EvalParams};
use crate::synth::{generate, SynthSpec};

#[derive(Debug, Clone, Default)]
pub struct GlobalOpts {
    pub csv: bool,
    pub verbose: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BookmarkFormat {
    Opera,
    Text,
    Netscape,
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

fn load_index(path: &Path) -> Result<OntologyIndex, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open index {}: {e}", path.display())))?;
    Ok(OntologyIndex::load(BufReader::new(file))?.index)
}

fn sniff_ontology_format(path: &Path, explicit: Option<OntologyFormat>) -> OntologyFormat {
    if let Some(f) = explicit {
        return f;
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("rdf") | Some("xml") => OntologyFormat::RdfSubset,
        _ => OntologyFormat::Tsv,
    }
}

fn sniff_bookmark_format(path: &Path, text: &str, explicit: Option<BookmarkFormat>) -> BookmarkFormat {
    if let Some(f) = explicit {
        return f;
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("adr") => return BookmarkFormat::Opera,
        Some("html") | Some("htm") => return BookmarkFormat::Netscape,
        _ => {}
    }
    let head = &text[..text.len().min(256)];
    if head.starts_with("Opera Hotlist") || head.contains("#URL") {
        BookmarkFormat::Opera
    } else if head.to_ascii_lowercase().contains("<!doctype netscape") {
        BookmarkFormat::Netscape
    } else {
        BookmarkFormat::Text
    }
}

// --------------------------------------------------------------- build-index

pub fn cmd_build_index(
    input: &Path,
    format: Option<OntologyFormat>,
    out: &Path,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let format = sniff_ontology_format(input, format);
    let file = File::open(input)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.display())))?;
    let parsed = parse_ontology(BufReader::new(file), format)?;
    let index = &parsed.index;

    let out_file = File::create(out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))?;
    let mut buf = BufWriter::new(out_file);
    index.save(&mut buf)?;
    buf.flush()?;

    let hist = index.level_histogram();
    if g.csv {
        writeln!(
            w,
            "# command=build-index categories={} urls={} topics={} skipped={}",
            index.category_count(),
            index.url_count(),
            parsed.stats.topic_records,
            parsed.stats.skipped
        )?;
        writeln!(w, "level,count")?;
        for (i, count) in hist.iter().enumerate() {
            writeln!(w, "{},{}", i + 1, count)?;
        }
    } else {
        writeln!(
            w,
            "indexed {} categories, {} urls from {}",
            index.category_count(),
            index.url_count(),
            input.display()
        )?;
        if parsed.stats.skipped > 0 {
            writeln!(w, "skipped {} malformed records", parsed.stats.skipped)?;
        }
        let cells: Vec<String> = hist.iter().map(|c| c.to_string()).collect();
        writeln!(w, "level histogram: {}", cells.join(" "))?;
        writeln!(w, "wrote {}", out.display())?;
    }
    Ok(())
}

// -------------------------------------------------------------------- ingest

#[allow(clippy::too_many_arguments)]
pub fn cmd_ingest(
    bookmarks: &Path,
    format: Option<BookmarkFormat>,
    index_path: &Path,
    user: &str,
    out: Option<&Path>,
    lookup: LookupMode,
    encoding: ProfileEncoding,
    stop_list: Option<&Path>,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let index = load_index(index_path)?;
    let text = read_file(bookmarks)?;
    let format = sniff_bookmark_format(bookmarks, &text, format);
    let parsed: ParsedBookmarks = match format {
        BookmarkFormat::Opera => parse_opera_adr(&text),
        BookmarkFormat::Text => parse_plaintext(&text),
        BookmarkFormat::Netscape => parse_netscape_html(&text),
    };
    let stop = match stop_list {
        Some(path) => StopList::parse(&read_file(path)?),
        None => StopList::default(),
    };
    let cleaned = clean(&parsed.bookmarks, &stop);
    let (profile, coverage) = build_profile(user, &cleaned, &index, lookup);

    let out_path: PathBuf = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(format!("{user}.profile")));
    fs::write(&out_path, serialize_profile(&profile, encoding))
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out_path.display())))?;

    let total = cleaned.urls.len();
    if g.csv {
        writeln!(
            w,
            "# command=ingest user={user} total={} mapped={} unmapped={} mapped_fraction={:.6} entries={}",
            total,
            profile.mapped,
            profile.unmapped,
            coverage.mapped_fraction,
            profile.entries.len()
        )?;
        writeln!(w, "depth,count")?;
        for (d, count) in coverage.by_truncation_depth.iter().enumerate() {
            writeln!(w, "{d},{count}")?;
        }
    } else {
        writeln!(
            w,
            "parsed {} bookmarks ({} discarded) from {}",
            parsed.bookmarks.len(),
            parsed.discarded,
            bookmarks.display()
        )?;
        writeln!(
            w,
            "cleaned: {} unique urls ({} duplicates, {} discarded)",
            total, cleaned.duplicates_removed, cleaned.discarded
        )?;
        writeln!(
            w,
            "mapped {}/{} urls ({:.1}%) into {} categories",
            profile.mapped,
            total,
            coverage.mapped_fraction * 100.0,
            profile.entries.len()
        )?;
        for (d, count) in coverage.by_truncation_depth.iter().enumerate() {
            if *count > 0 {
                writeln!(w, "  truncation depth {d}: {count}")?;
            }
        }
        writeln!(w, "wrote {}", out_path.display())?;
    }
    if profile.entries.is_empty() {
        writeln!(w, "warning: no bookmarks mapped, profile is empty")?;
    }
    Ok(())
}

// ---------------------------------------------------------------- similarity

fn load_profile(path: &Path, index: Option<&OntologyIndex>) -> Result<WebProfile, CliError> {
    let text = read_file(path)?;
    match index {
        Some(idx) => Ok(parse_profile(&text, idx)?),
        None => match parse_profile_standalone(&text) {
            Ok(p) => Ok(p),
            Err(ProfileError::NeedsIndex) => Err(CliError::Data(format!(
                "{} is integer-encoded; pass --index to resolve catids",
                path.display()
            ))),
            Err(e) => Err(e.into()),
        },
    }
}

pub fn cmd_similarity(
    a: &Path,
    b: &Path,
    index_path: Option<&Path>,
    settings: &Settings,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let index = index_path.map(load_index).transpose()?;
    let p = load_profile(a, index.as_ref())?;
    let q = load_profile(b, index.as_ref())?;

    match settings.measure {
        Measure::Pearson => {
            let (r, common) = pearson_flat(&p, &q);
            if g.csv {
                writeln!(
                    w,
                    "# command=similarity measure=pearson value={r:.6} common={common}"
                )?;
            } else {
                writeln!(w, "pearson {r:.6} over {common} common categories")?;
            }
        }
        Measure::Tree => {
            let score = similarity_tree(&p, &q, &settings.sim);
            let pairs = pair_table(&p, &q, &settings.sim.match_fn, settings.sim.ml_cutoff);
            if g.csv {
                writeln!(
                    w,
                    "# command=similarity measure=tree value={:.6} raw_core={:.6} disparity={:.6} degenerate={} size_p={} size_q={}",
                    score.value,
                    score.raw_core,
                    score.disparity,
                    score.degenerate,
                    p.entries.len(),
                    q.entries.len()
                )?;
                writeln!(w, "addr_a,addr_b,level,edge_distance,match,contribution")?;
                for row in &pairs {
                    writeln!(
                        w,
                        "{},{},{},{},{:.6},{:.6}",
                        row.0, row.1, row.2, row.3, row.4, row.5
                    )?;
                }
            } else {
                writeln!(
                    w,
                    "similarity {:.6} (raw core {:.6}, disparity {:.6})",
                    score.value, score.raw_core, score.disparity
                )?;
                writeln!(
                    w,
                    "profiles: {} ({} categories) vs {} ({} categories)",
                    p.user_id,
                    p.entries.len(),
                    q.user_id,
                    q.entries.len()
                )?;
                let shown = pairs.len().min(20);
                for row in &pairs[..shown] {
                    writeln!(
                        w,
                        "  {} x {}  l={} ed={} match={:.4} contribution={:.4}",
                        row.0, row.1, row.2, row.3, row.4, row.5
                    )?;
                }
                if pairs.len() > shown {
                    writeln!(w, "  ... and {} more pairs", pairs.len() - shown)?;
                }
            }
        }
    }
    Ok(())
}

/// Contributing pairs (shared root) with their level, edge distance, match
/// value and vote-weighted contribution.
type PairRow = (String, String, usize, usize, f64, f64);

fn pair_table(p: &WebProfile, q: &WebProfile, match_fn: &MatchFn, ml: u32) -> Vec<PairRow> {
    let mut rows = Vec::new();
    for ea in &p.entries {
        for eb in &q.entries {
            let Some(level) = ea.address.matching_level(&eb.address) else {
                continue;
            };
            let ed = ea.address.edge_distance(&eb.address).unwrap();
            let m = match match_fn {
                MatchFn::Linear => linear_match(level as u32, ml),
                MatchFn::Quadratic => quadratic_match(level as u32),
            };
            let contribution = m / ed as f64 * f64::from(ea.votes + eb.votes);
            rows.push((
                ea.address.to_string(),
                eb.address.to_string(),
                level,
                ed,
                m,
                contribution,
            ));
        }
    }
    rows
}

// ----------------------------------------------------------------- recommend

fn load_profile_db(dir: &Path, index: &OntologyIndex) -> Result<Vec<WebProfile>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("profile"))
        .collect();
    paths.sort();
    let mut profiles = Vec::with_capacity(paths.len());
    for path in &paths {
        profiles.push(load_profile(path, Some(index))?);
    }
    Ok(profiles)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_recommend(
    profile_path: &Path,
    db_dir: &Path,
    index_path: &Path,
    top_n: usize,
    trace: Option<&Path>,
    settings: &Settings,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    if top_n == 0 {
        return Err(CliError::Usage("top-n must be positive".into()));
    }
    let index = load_index(index_path)?;
    let target = load_profile(profile_path, Some(&index))?;
    let mut candidates: Vec<WebProfile> = load_profile_db(db_dir, &index)?
        .into_iter()
        .filter(|p| p.user_id != target.user_id)
        .collect();
    if candidates.len() < settings.ais.pool_size {
        return Err(CliError::Data(format!(
            "db has {} candidate profiles but the pool needs {}",
            candidates.len(),
            settings.ais.pool_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    candidates.shuffle(&mut rng);

    let matcher = settings.matcher();
    let mut trace_rows: Vec<(usize, String, f64)> = Vec::new();
    let state = ais::run_with_observer(target, candidates, &settings.ais, &matcher, |s| {
        if trace.is_some() {
            for ab in &s.pool {
                trace_rows.push((
                    s.iterations_run,
                    ab.profile.user_id.clone(),
                    ab.concentration,
                ));
            }
        }
    })?;
    if let Some(path) = trace {
        let mut f = BufWriter::new(File::create(path).map_err(|e| {
            CliError::Data(format!("cannot create {}: {e}", path.display()))
        })?);
        writeln!(f, "iteration,antibody,concentration")?;
        for (it, user, conc) in &trace_rows {
            writeln!(f, "{it},{user},{conc:.6}")?;
        }
        f.flush()?;
    }

    let termination = state
        .termination
        .map(|t| t.to_string())
        .unwrap_or_default();
    let rec = state.recommend(top_n, &index)?;

    if g.csv {
        writeln!(
            w,
            "# command=recommend user={} termination={} iterations={} pool={}",
            state.antigen.user_id,
            termination,
            state.iterations_run,
            state.pool.len()
        )?;
        writeln!(w, "rank,catid,address,score,predicted_votes,support,title")?;
        for (i, item) in rec.items.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{:.6},{:.6},{},{}",
                i + 1,
                item.catid,
                item.address,
                item.score,
                item.predicted_votes,
                item.support,
                item.title.replace(',', " ")
            )?;
        }
    } else {
        writeln!(
            w,
            "pool of {} settled after {} iterations ({})",
            state.pool.len(),
            state.iterations_run,
            termination
        )?;
        writeln!(w, "top {} for {}:", rec.items.len(), state.antigen.user_id)?;
        for (i, item) in rec.items.iter().enumerate() {
            writeln!(
                w,
                "{:3}. {}  {}  score {:.3} (predicted votes {:.2}, support {})",
                i + 1,
                item.address,
                item.title,
                item.score,
                item.predicted_votes,
                item.support
            )?;
            if g.verbose {
                if !item.urls.is_empty() {
                    writeln!(w, "     urls: {}", item.urls.join(" "))?;
                }
                writeln!(w, "     from: {}", item.contributors.join(" "))?;
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ evaluate

pub fn cmd_evaluate(
    db_dir: &Path,
    index_path: &Path,
    params: &EvalParams,
    settings: &Settings,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let index = load_index(index_path)?;
    let profiles = load_profile_db(db_dir, &index)?;
    let report = evaluate(&profiles, &index, settings, params)?;

    if g.csv {
        writeln!(
            w,
            "# command=evaluate users={} skipped={} seeds={} holdout={:.6} top_n={} mean_precision={:.6} mean_baseline={:.6} degenerate={}",
            report.users_evaluated,
            report.skipped_users,
            report.seeds.len(),
            params.holdout,
            params.top_n,
            report.mean_precision,
            report.mean_baseline,
            report.degenerate
        )?;
        writeln!(w, "# {}", report.snapshot)?;
        writeln!(
            w,
            "seed,user,hidden,hits,precision,baseline_hits,baseline_precision,termination"
        )?;
        for r in &report.rows {
            writeln!(
                w,
                "{},{},{},{},{:.6},{},{:.6},{}",
                r.seed,
                r.user_id,
                r.hidden,
                r.hits,
                r.precision,
                r.baseline_hits,
                r.baseline_precision,
                r.termination
            )?;
        }
    } else {
        writeln!(
            w,
            "evaluated {} users over {} seeds (holdout {:.2}, top {})",
            report.users_evaluated,
            report.seeds.len(),
            params.holdout,
            params.top_n
        )?;
        if report.skipped_users > 0 {
            writeln!(w, "skipped {} profiles with fewer than 2 categories", report.skipped_users)?;
        }
        writeln!(
            w,
            "mean precision@{}: {:.4}   random baseline: {:.4}",
            params.top_n, report.mean_precision, report.mean_baseline
        )?;
        for &seed in &report.seeds {
            let rows: Vec<_> = report.rows.iter().filter(|r| r.seed == seed).collect();
            let n = rows.len().max(1) as f64;
            let p = rows.iter().map(|r| r.precision).sum::<f64>() / n;
            let b = rows.iter().map(|r| r.baseline_precision).sum::<f64>() / n;
            writeln!(w, "  seed {seed}: precision {p:.4}  baseline {b:.4}")?;
        }
    }
    if report.degenerate {
        writeln!(
            w,
            "warning: all profiles are identical, the neighbourhood carries no signal"
        )?;
    }
    Ok(())
}

// --------------------------------------------------------------------- synth

pub fn cmd_synth(
    spec: &SynthSpec,
    out_dir: &Path,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let corpus = generate(spec)?;
    let profiles_dir = out_dir.join("profiles");
    fs::create_dir_all(&profiles_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", profiles_dir.display())))?;

    let index_path = out_dir.join("index.idx");
    let mut buf = BufWriter::new(File::create(&index_path).map_err(|e| {
        CliError::Data(format!("cannot create {}: {e}", index_path.display()))
    })?);
    corpus.index.save(&mut buf)?;
    buf.flush()?;

    for p in &corpus.profiles {
        let path = profiles_dir.join(format!("{}.profile", p.user_id));
        fs::write(&path, serialize_profile(p, ProfileEncoding::Tree))
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }

    if g.csv {
        writeln!(
            w,
            "# command=synth categories={} urls={} profiles={} seed={}",
            corpus.index.category_count(),
            corpus.index.url_count(),
            corpus.profiles.len(),
            spec.seed
        )?;
        writeln!(w, "user,entries,votes")?;
        for p in &corpus.profiles {
            writeln!(w, "{},{},{}", p.user_id, p.entries.len(), p.vote_sum())?;
        }
    } else {
        writeln!(
            w,
            "wrote index ({} categories, {} urls) and {} profiles to {}",
            corpus.index.category_count(),
            corpus.index.url_count(),
            corpus.profiles.len(),
            out_dir.display()
        )?;
    }
    Ok(())
}

// --------------------------------------------------------------------- stats

pub fn cmd_stats(
    path: &Path,
    index_path: Option<&Path>,
    g: &GlobalOpts,
    w: &mut impl Write,
) -> Result<(), CliError> {
    let text = read_file(path)?;
    if text.starts_with(INDEX_HEADER) {
        let parsed = OntologyIndex::load(BufReader::new(text.as_bytes()))?;
        let index = parsed.index;
        let hist = index.level_histogram();
        if g.csv {
            writeln!(
                w,
                "# command=stats kind=index categories={} urls={}",
                index.category_count(),
                index.url_count()
            )?;
            writeln!(w, "level,count")?;
            for (i, count) in hist.iter().enumerate() {
                writeln!(w, "{},{}", i + 1, count)?;
            }
        } else {
            writeln!(
                w,
                "index: {} categories, {} urls",
                index.category_count(),
                index.url_count()
            )?;
            let cells: Vec<String> = hist.iter().map(|c| c.to_string()).collect();
            writeln!(w, "level histogram: {}", cells.join(" "))?;
        }
        Ok(())
    } else if text.starts_with(PROFILE_HEADER) {
        let index = index_path.map(load_index).transpose()?;
        let profile = match index.as_ref() {
            Some(idx) => parse_profile(&text, idx)?,
            None => match parse_profile_standalone(&text) {
                Ok(p) => p,
                Err(ProfileError::NeedsIndex) => {
                    return Err(CliError::Data(format!(
                        "{} is integer-encoded; pass --index to resolve catids",
                        path.display()
                    )))
                }
                Err(e) => return Err(e.into()),
            },
        };
        let mut depth_hist = [0usize; 16];
        for e in &profile.entries {
            depth_hist[e.address.depth() - 1] += 1;
        }
        if g.csv {
            writeln!(
                w,
                "# command=stats kind=profile user={} entries={} votes={} effective_size={}",
                profile.user_id,
                profile.entries.len(),
                profile.vote_sum(),
                profile.effective_size()
            )?;
            writeln!(w, "depth,count")?;
            for (i, count) in depth_hist.iter().enumerate() {
                writeln!(w, "{},{}", i + 1, count)?;
            }
        } else {
            writeln!(
                w,
                "profile {}: {} categories, {} votes, effective size {}",
                profile.user_id,
                profile.entries.len(),
                profile.vote_sum(),
                profile.effective_size()
            )?;
            let cells: Vec<String> = depth_hist.iter().map(|c| c.to_string()).collect();
            writeln!(w, "depth histogram: {}", cells.join(" "))?;
        }
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{} is neither an index nor a profile file",
            path.display()
        )))
    }
}
