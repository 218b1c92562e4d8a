//! Holdout evaluation: hide part of each user's profile, run the immune
//! network on the rest, and measure how many hidden categories come back in
//! the top-N recommendations, against a uniform-random baseline drawn from
//! the same candidate categories.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use idiorec_core::ais;
use idiorec_core::ontology::OntologyIndex;
use idiorec_core::profile::WebProfile;
use idiorec_core::CategoryId;

use crate::config::Settings;
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct EvalParams {
    /// Fraction of each user's categories to hide, in (0, 1).
    pub holdout: f64,
    pub top_n: usize,
    /// Number of consecutive seeds to run, starting at base_seed.
    pub seeds: u64,
    pub base_seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            holdout: 0.3,
            top_n: 10,
            seeds: 5,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub seed: u64,
    pub user_id: String,
    pub hidden: usize,
    pub hits: usize,
    pub precision: f64,
    pub baseline_hits: usize,
    pub baseline_precision: f64,
    pub termination: String,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    /// One row per (seed, eligible user), sorted by seed then user id.
    pub rows: Vec<EvalRow>,
    pub users_evaluated: usize,
    pub skipped_users: usize,
    pub mean_precision: f64,
    pub mean_baseline: f64,
    /// True when every profile carries identical entries, which makes the
    /// neighbourhood meaningless.
    pub degenerate: bool,
    pub seeds: Vec<u64>,
    pub snapshot: String,
}

fn task_rng(seed: u64, user_index: usize) -> ChaCha8Rng {
    // distinct stream per (seed, user) pair
    ChaCha8Rng::seed_from_u64(seed ^ (user_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn evaluate(
    profiles: &[WebProfile],
    index: &OntologyIndex,
    settings: &Settings,
    params: &EvalParams,
) -> Result<EvalReport, CliError> {
    if !(params.holdout > 0.0 && params.holdout < 1.0) {
        return Err(CliError::Usage(format!(
            "holdout fraction {} outside (0, 1)",
            params.holdout
        )));
    }
    if params.top_n == 0 {
        return Err(CliError::Usage("top-n must be positive".into()));
    }
    if params.seeds == 0 {
        return Err(CliError::Usage("need at least one seed".into()));
    }
    if profiles.len() < 3 {
        return Err(CliError::Data(format!(
            "evaluation needs at least 3 profiles, got {}",
            profiles.len()
        )));
    }

    let degenerate = profiles.windows(2).all(|w| w[0].entries == w[1].entries);
    let eligible: Vec<usize> = (0..profiles.len())
        .filter(|&u| profiles[u].entries.len() >= 2)
        .collect();
    let skipped_users = profiles.len() - eligible.len();
    if eligible.is_empty() {
        return Err(CliError::Data(
            "no profile has the two categories needed for a holdout split".into(),
        ));
    }

    let seeds: Vec<u64> = (0..params.seeds).map(|s| params.base_seed + s).collect();
    let tasks: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| eligible.iter().map(move |&u| (s, u)))
        .collect();

    let mut rows: Vec<EvalRow> = tasks
        .par_iter()
        .map(|&(seed, u)| run_task(profiles, index, settings, params, seed, u))
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| (a.seed, &a.user_id).cmp(&(b.seed, &b.user_id)));

    let n = rows.len() as f64;
    let mean_precision = rows.iter().map(|r| r.precision).sum::<f64>() / n;
    let mean_baseline = rows.iter().map(|r| r.baseline_precision).sum::<f64>() / n;

    Ok(EvalReport {
        rows,
        users_evaluated: eligible.len(),
        skipped_users,
        mean_precision,
        mean_baseline,
        degenerate,
        seeds,
        snapshot: settings.snapshot(),
    })
}

/// Splits a profile into a visible antigen and the hidden category set.
/// The hidden count is clamped to [1, n-1] so both sides stay non-empty.
pub(crate) fn split_holdout(
    target: &WebProfile,
    holdout: f64,
    rng: &mut ChaCha8Rng,
) -> (WebProfile, BTreeSet<CategoryId>) {
    let n = target.entries.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let k = ((holdout * n as f64).round() as usize).clamp(1, n - 1);
    let hidden_idx: BTreeSet<usize> = order[..k].iter().copied().collect();
    let hidden: BTreeSet<CategoryId> = hidden_idx
        .iter()
        .map(|&i| target.entries[i].catid)
        .collect();
    let visible: Vec<_> = target
        .entries
        .iter()
        .enumerate()
        .filter(|(i, _)| !hidden_idx.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    let mapped: usize = visible.iter().map(|e| e.votes as usize).sum();
    let antigen = WebProfile {
        user_id: target.user_id.clone(),
        entries: visible,
        total_bookmarks: mapped,
        mapped,
        unmapped: 0,
    };
    (antigen, hidden)
}

fn run_task(
    profiles: &[WebProfile],
    index: &OntologyIndex,
    settings: &Settings,
    params: &EvalParams,
    seed: u64,
    u: usize,
) -> Result<EvalRow, CliError> {
    let target = &profiles[u];
    let mut rng = task_rng(seed, u);
    let (antigen, hidden) = split_holdout(target, params.holdout, &mut rng);

    let mut candidates: Vec<WebProfile> = profiles
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != u)
        .map(|(_, p)| p.clone())
        .collect();
    candidates.shuffle(&mut rng);

    // the baseline draws from everything the candidates could recommend
    let mut pool: Vec<CategoryId> = candidates
        .iter()
        .flat_map(|c| c.entries.iter().map(|e| e.catid))
        .filter(|c| antigen.vote_for(*c).is_none())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let matcher = settings.matcher();
    let state = ais::run(antigen, candidates, &settings.ais, &matcher)?;
    let rec = state.recommend(params.top_n, index)?;
    let hits = rec
        .items
        .iter()
        .filter(|item| hidden.contains(&item.catid))
        .count();

    pool.shuffle(&mut rng);
    pool.truncate(params.top_n);
    let baseline_hits = pool.iter().filter(|c| hidden.contains(c)).count();

    Ok(EvalRow {
        seed,
        user_id: target.user_id.clone(),
        hidden: hidden.len(),
        hits,
        precision: hits as f64 / params.top_n as f64,
        baseline_hits,
        baseline_precision: baseline_hits as f64 / params.top_n as f64,
        termination: state
            .termination
            .map(|t| t.to_string())
            .unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn corpus() -> (Vec<WebProfile>, OntologyIndex) {
        let spec = SynthSpec {
            users_per_cluster: 6,
            ..SynthSpec::default()
        };
        let c = generate(&spec).unwrap();
        (c.profiles, c.index)
    }

    #[test]
    fn report_is_reproducible() {
        let (profiles, index) = corpus();
        let settings = Settings::default();
        let params = EvalParams {
            seeds: 2,
            ..EvalParams::default()
        };
        let a = evaluate(&profiles, &index, &settings, &params).unwrap();
        let b = evaluate(&profiles, &index, &settings, &params).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 2 * 12);
        assert!(!a.degenerate);
        assert!(a.mean_precision >= 0.0 && a.mean_precision <= 1.0);
        assert!(a.mean_baseline >= 0.0 && a.mean_baseline <= 1.0);
    }

    #[test]
    fn holdout_extremes_are_usage_errors() {
        let (profiles, index) = corpus();
        let settings = Settings::default();
        for h in [0.0, 1.0, 1.5] {
            let err = evaluate(
                &profiles,
                &index,
                &settings,
                &EvalParams {
                    holdout: h,
                    ..EvalParams::default()
                },
            )
            .unwrap_err();
            assert_eq!(err.exit_code(), 1);
        }
    }

    #[test]
    fn hidden_categories_never_reach_the_antigen() {
        let (profiles, _) = corpus();
        for holdout in [0.1, 0.3, 0.5, 0.99] {
            for (u, target) in profiles.iter().enumerate() {
                let mut rng = task_rng(7, u);
                let (antigen, hidden) = split_holdout(target, holdout, &mut rng);
                assert!(!hidden.is_empty());
                assert!(!antigen.entries.is_empty());
                for e in &antigen.entries {
                    assert!(!hidden.contains(&e.catid));
                }
                // the split partitions the original profile exactly
                assert_eq!(antigen.entries.len() + hidden.len(), target.entries.len());
                for e in &target.entries {
                    let visible = antigen.vote_for(e.catid) == Some(e.votes);
                    assert!(visible != hidden.contains(&e.catid));
                }
            }
        }
    }

    #[test]
    fn tiny_db_is_a_data_error() {
        let (profiles, index) = corpus();
        let err = evaluate(
            &profiles[..2],
            &index,
            &Settings::default(),
            &EvalParams::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
