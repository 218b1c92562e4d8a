//! Idiotypic immune-network neighbourhood selection.
//!
//! The target user is the antigen; database users enter an antibody pool
//! whose concentrations evolve under a discretized Farmer-style equation:
//!
//! ```text
//! x_i <- clamp(x_i + dt * (c*[k0*sum_j m_ji*x_j - k1*sum_j m_ij*x_j + k2*m_i*y] - k3*x_i),
//!              0, concentration_max)
//! ```
//!
//! where m_i is antibody i's match with the antigen, m_ij the pairwise match
//! between pool members (both from the configured similarity measure), and y
//! the antigen concentration. Stimulation (k2) rewards antigen matches,
//! suppression (k1) punishes antibodies that resemble each other, which is
//! what pushes the final pool toward diversity. Antibodies falling below the
//! death threshold leave the pool and fresh candidates take their place
//! until the pool stops changing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::config::{parse_bool, parse_f64, parse_usize, ConfigError};
use crate::ontology::{CategoryId, OntologyIndex, TreeAddress};
use crate::profile::WebProfile;
use crate::similarity::Matcher;

#[derive(Debug, Error)]
pub enum AisError {
    #[error("no candidate profiles supplied")]
    NoCandidates,
    #[error("antigen user {0:?} appears in the candidate list")]
    AntigenInCandidates(String),
    #[error("candidate queue is empty")]
    QueueEmpty,
    #[error("antibody pool is already at capacity")]
    PoolFull,
    #[error("top-n must be positive")]
    InvalidTopN,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisParams {
    /// Antibody-antibody recognition reward. Zero by default: the system
    /// does not reward recognizing other antibodies.
    pub k0: f64,
    /// Antibody-antibody suppression.
    pub k1: f64,
    /// Antigen stimulation.
    pub k2: f64,
    /// Death rate.
    pub k3: f64,
    /// Overall rate scale applied to the bracketed interaction terms.
    pub c: f64,
    /// Euler integration step. Must be small enough that the k-terms stay
    /// stable; with the defaults the update is well behaved.
    pub dt: f64,
    pub pool_size: usize,
    /// Antigen concentration y.
    pub antigen_concentration: f64,
    pub init_concentration: f64,
    pub concentration_max: f64,
    /// Concentration below which an antibody is removed from the pool.
    pub death_threshold: f64,
    /// Consecutive unchanged iterations required for stability.
    pub stabilization_window: usize,
    /// Hard stop for the run loop.
    pub max_iterations: usize,
    /// Optional value-based stability criterion: when set, an iteration only
    /// counts toward the stable streak if no concentration moved more than
    /// this epsilon (on top of unchanged membership).
    pub stability_epsilon: Option<f64>,
    /// Rescale total concentration back to its pre-step sum each iteration.
    /// Off by default; the k3 death term plus the clamp already bound the
    /// system.
    pub renormalize: bool,
}

impl Default for AisParams {
    fn default() -> Self {
        AisParams {
            k0: 0.0,
            k1: 0.1,
            k2: 1.0,
            k3: 0.1,
            c: 1.0,
            dt: 0.1,
            pool_size: 10,
            antigen_concentration: 1.0,
            init_concentration: 10.0,
            concentration_max: 100.0,
            death_threshold: 0.5,
            stabilization_window: 10,
            max_iterations: 1000,
            stability_epsilon: None,
            renormalize: false,
        }
    }
}

impl AisParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dt <= 0.0 {
            return Err(ConfigError::Invalid(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.pool_size < 2 {
            return Err(ConfigError::Invalid(format!(
                "pool_size must be at least 2, got {}",
                self.pool_size
            )));
        }
        if self.stabilization_window < 1 {
            return Err(ConfigError::Invalid("stabilization_window must be at least 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(ConfigError::Invalid("max_iterations must be at least 1".into()));
        }
        if self.concentration_max <= 0.0 || self.init_concentration <= 0.0 {
            return Err(ConfigError::Invalid(
                "init_concentration and concentration_max must be positive".into(),
            ));
        }
        if self.init_concentration > self.concentration_max {
            return Err(ConfigError::Invalid(
                "init_concentration exceeds concentration_max".into(),
            ));
        }
        if self.death_threshold < 0.0 {
            return Err(ConfigError::Invalid("death_threshold must be non-negative".into()));
        }
        Ok(())
    }

    /// Applies one config key; false when the key belongs elsewhere.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "k0" => self.k0 = parse_f64(key, value)?,
            "k1" => self.k1 = parse_f64(key, value)?,
            "k2" => self.k2 = parse_f64(key, value)?,
            "k3" => self.k3 = parse_f64(key, value)?,
            "c" => self.c = parse_f64(key, value)?,
            "dt" => self.dt = parse_f64(key, value)?,
            "pool_size" => self.pool_size = parse_usize(key, value)?,
            "y" => self.antigen_concentration = parse_f64(key, value)?,
            "init_concentration" => self.init_concentration = parse_f64(key, value)?,
            "concentration_max" => self.concentration_max = parse_f64(key, value)?,
            "death_threshold" => self.death_threshold = parse_f64(key, value)?,
            "stabilization_window" => self.stabilization_window = parse_usize(key, value)?,
            "max_iterations" => self.max_iterations = parse_usize(key, value)?,
            "stability_epsilon" => {
                self.stability_epsilon = match value {
                    "none" | "off" => None,
                    _ => Some(parse_f64(key, value)?),
                }
            }
            "renormalize" => self.renormalize = parse_bool(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// A database user inside the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Antibody {
    pub profile: WebProfile,
    pub concentration: f64,
    /// Match with the antigen (m_i), fixed at admission.
    pub antigen_match: f64,
    /// Iterations survived.
    pub age: usize,
}

/// Symmetric pairwise match matrix over the pool; the diagonal is unused
/// and stored as 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationMatrix {
    rows: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn new() -> CorrelationMatrix {
        CorrelationMatrix::default()
    }

    /// Builds a matrix from explicit rows; must be square and symmetric.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> CorrelationMatrix {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        for i in 0..n {
            for j in 0..i {
                assert!(
                    (rows[i][j] - rows[j][i]).abs() < 1e-12,
                    "matrix must be symmetric"
                );
            }
        }
        CorrelationMatrix { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.rows[i][j]
        }
    }

    /// Grows the matrix by one member whose matches against the existing
    /// members are given in order.
    fn add_member(&mut self, correlations: Vec<f64>) {
        assert_eq!(correlations.len(), self.rows.len());
        for (row, &value) in self.rows.iter_mut().zip(&correlations) {
            row.push(value);
        }
        let mut new_row = correlations;
        new_row.push(0.0);
        self.rows.push(new_row);
    }

    fn remove(&mut self, idx: usize) {
        self.rows.remove(idx);
        for row in &mut self.rows {
            row.remove(idx);
        }
    }

    /// Mean of the off-diagonal entries; `None` below two members.
    pub fn mean_pairwise(&self) -> Option<f64> {
        let n = self.rows.len();
        if n < 2 {
            return None;
        }
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..i {
                sum += self.rows[i][j];
            }
        }
        Some(sum / (n * (n - 1) / 2) as f64)
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Stabilized,
    /// Queue drained before the pool could be (re)filled to capacity.
    DataExhausted,
    MaxIterations,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Stabilized => "stabilized",
            Termination::DataExhausted => "data-exhausted",
            Termination::MaxIterations => "max-iterations",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AisState {
    pub antigen: WebProfile,
    pub pool: Vec<Antibody>,
    pub correlations: CorrelationMatrix,
    pub queue: VecDeque<WebProfile>,
    pub iterations_run: usize,
    pub stable_streak: usize,
    pub termination: Option<Termination>,
}

/// One simultaneous Euler update of the concentration vector. All reads use
/// the pre-step values, so the result is independent of element order.
pub fn euler_step(
    xs: &[f64],
    antigen_matches: &[f64],
    correlations: &CorrelationMatrix,
    params: &AisParams,
) -> Vec<f64> {
    let n = xs.len();
    assert_eq!(antigen_matches.len(), n);
    assert_eq!(correlations.len(), n);
    (0..n)
        .map(|i| {
            let mut neighbour = 0.0;
            for j in 0..n {
                if j != i {
                    neighbour += correlations.get(i, j) * xs[j];
                }
            }
            // m_ij = m_ji, so recognition (k0) and suppression (k1) share
            // the same neighbour sum.
            let bracket = params.k0 * neighbour - params.k1 * neighbour
                + params.k2 * antigen_matches[i] * params.antigen_concentration;
            let dx = params.c * bracket - params.k3 * xs[i];
            (xs[i] + params.dt * dx).clamp(0.0, params.concentration_max)
        })
        .collect()
}

/// Sets up a run: empty pool, all candidates queued in the given order.
pub fn init(
    antigen: WebProfile,
    candidates: Vec<WebProfile>,
    params: &AisParams,
    matcher: &Matcher,
) -> Result<AisState, AisError> {
    params.validate()?;
    matcher.params.validate()?;
    if candidates.is_empty() {
        return Err(AisError::NoCandidates);
    }
    if let Some(dup) = candidates.iter().find(|c| c.user_id == antigen.user_id) {
        return Err(AisError::AntigenInCandidates(dup.user_id.clone()));
    }
    Ok(AisState {
        antigen,
        pool: Vec::new(),
        correlations: CorrelationMatrix::new(),
        queue: candidates.into(),
        iterations_run: 0,
        stable_streak: 0,
        termination: None,
    })
}

impl AisState {
    fn admit(&mut self, profile: WebProfile, params: &AisParams, matcher: &Matcher) {
        let antigen_match = matcher.score(&profile, &self.antigen);
        let correlations: Vec<f64> = self
            .pool
            .iter()
            .map(|ab| matcher.score(&profile, &ab.profile))
            .collect();
        self.correlations.add_member(correlations);
        self.pool.push(Antibody {
            profile,
            concentration: params.init_concentration,
            antigen_match,
            age: 0,
        });
    }

    /// Moves the next queued candidate into the pool, computing its antigen
    /// match and its correlation row against current members.
    pub fn add_antibody(&mut self, params: &AisParams, matcher: &Matcher) -> Result<(), AisError> {
        if self.pool.len() >= params.pool_size {
            return Err(AisError::PoolFull);
        }
        let profile = self.queue.pop_front().ok_or(AisError::QueueEmpty)?;
        self.admit(profile, params, matcher);
        Ok(())
    }

    /// One dynamics step: simultaneous concentration update, then removal
    /// of antibodies under the death threshold, then refill from the queue.
    /// The stable streak counts iterations that leave pool membership (and,
    /// if configured, concentration values) unchanged.
    pub fn iterate(&mut self, params: &AisParams, matcher: &Matcher) {
        let xs: Vec<f64> = self.pool.iter().map(|a| a.concentration).collect();
        let matches: Vec<f64> = self.pool.iter().map(|a| a.antigen_match).collect();
        let mut new_xs = euler_step(&xs, &matches, &self.correlations, params);
        if params.renormalize {
            let before: f64 = xs.iter().sum();
            let after: f64 = new_xs.iter().sum();
            if after > 0.0 && before > 0.0 {
                let scale = before / after;
                for x in &mut new_xs {
                    *x = (*x * scale).clamp(0.0, params.concentration_max);
                }
            }
        }
        let mut max_delta: f64 = 0.0;
        for (ab, (&x0, &x1)) in self.pool.iter_mut().zip(xs.iter().zip(&new_xs)) {
            ab.concentration = x1;
            ab.age += 1;
            max_delta = max_delta.max((x1 - x0).abs());
        }

        let mut membership_changed = false;
        let mut i = 0;
        while i < self.pool.len() {
            if self.pool[i].concentration < params.death_threshold {
                self.pool.remove(i);
                self.correlations.remove(i);
                membership_changed = true;
            } else {
                i += 1;
            }
        }
        while self.pool.len() < params.pool_size {
            let Some(profile) = self.queue.pop_front() else { break };
            self.admit(profile, params, matcher);
            membership_changed = true;
        }

        let value_stable = params.stability_epsilon.is_none_or(|eps| max_delta <= eps);
        if !membership_changed && value_stable {
            self.stable_streak += 1;
        } else {
            self.stable_streak = 0;
        }
        self.iterations_run += 1;
    }

    /// Stability: pool membership unchanged for a full window of
    /// consecutive iterations.
    pub fn is_stable(&self, params: &AisParams) -> bool {
        self.stable_streak >= params.stabilization_window
    }

    pub fn pool_user_ids(&self) -> BTreeSet<String> {
        self.pool.iter().map(|a| a.profile.user_id.clone()).collect()
    }

    /// Weighted vote prediction for a category: Σ wᵢ·votesᵢ / Σ wᵢ with
    /// wᵢ = concentrationᵢ × antigen-matchᵢ over the antibodies holding the
    /// category. Returns the prediction and the supporter count; an all-zero
    /// weight sum degrades to the unweighted mean.
    pub fn predict_rating(&self, target: CategoryId) -> (f64, usize) {
        let mut weight_sum = 0.0;
        let mut weighted_votes = 0.0;
        let mut vote_sum = 0.0;
        let mut support = 0usize;
        for ab in &self.pool {
            if let Some(votes) = ab.profile.vote_for(target) {
                let w = ab.concentration * ab.antigen_match;
                weight_sum += w;
                weighted_votes += w * f64::from(votes);
                vote_sum += f64::from(votes);
                support += 1;
            }
        }
        if support == 0 {
            (0.0, 0)
        } else if weight_sum > 0.0 {
            (weighted_votes / weight_sum, support)
        } else {
            (vote_sum / support as f64, support)
        }
    }

    /// Ranks every category present in the pool but unseen by the antigen.
    /// The ranking score is the predicted vote times the supporter count, so
    /// categories backed by more of the neighbourhood rise. Ties break on
    /// catid. Representative URLs come from the index.
    pub fn recommend(&self, n: usize, index: &OntologyIndex) -> Result<Recommendation, AisError> {
        if n == 0 {
            return Err(AisError::InvalidTopN);
        }
        let mut candidates: BTreeMap<CategoryId, TreeAddress> = BTreeMap::new();
        for ab in &self.pool {
            for e in &ab.profile.entries {
                if !self.antigen.contains(e.catid) {
                    candidates.entry(e.catid).or_insert_with(|| e.address.clone());
                }
            }
        }
        let mut items: Vec<RecommendationItem> = candidates
            .into_iter()
            .map(|(catid, address)| {
                let (predicted_votes, support) = self.predict_rating(catid);
                let contributors: Vec<String> = self
                    .pool
                    .iter()
                    .filter(|ab| ab.profile.contains(catid))
                    .map(|ab| ab.profile.user_id.clone())
                    .collect();
                let urls: Vec<String> = index
                    .urls_in(catid)
                    .into_iter()
                    .map(str::to_string)
                    .collect();
                let title = index
                    .node(catid)
                    .map(|node| node.title.clone())
                    .unwrap_or_default();
                RecommendationItem {
                    catid,
                    address,
                    title,
                    score: predicted_votes * support as f64,
                    predicted_votes,
                    support,
                    contributors,
                    urls,
                }
            })
            .collect();
        items.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.catid.cmp(&b.catid)));
        items.truncate(n);
        Ok(Recommendation { items })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationItem {
    pub catid: CategoryId,
    pub address: TreeAddress,
    pub title: String,
    pub score: f64,
    pub predicted_votes: f64,
    pub support: usize,
    /// Pool members holding the category, in pool order.
    pub contributors: Vec<String>,
    /// Indexed URLs filed under the category.
    pub urls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Recommendation {
    pub items: Vec<RecommendationItem>,
}

/// Runs the complete loop: fill the pool from the queue, then iterate while
/// the network is unstable, stopping on stability, data exhaustion (queue
/// drained with the pool below capacity), or the iteration cap.
pub fn run(
    antigen: WebProfile,
    candidates: Vec<WebProfile>,
    params: &AisParams,
    matcher: &Matcher,
) -> Result<AisState, AisError> {
    run_with_observer(antigen, candidates, params, matcher, |_| {})
}

/// [`run`] with a callback invoked after every iteration, for tracing.
pub fn run_with_observer(
    antigen: WebProfile,
    candidates: Vec<WebProfile>,
    params: &AisParams,
    matcher: &Matcher,
    mut observer: impl FnMut(&AisState),
) -> Result<AisState, AisError> {
    let mut state = init(antigen, candidates, params, matcher)?;
    loop {
        while state.pool.len() < params.pool_size && !state.queue.is_empty() {
            let profile = state.queue.pop_front().unwrap();
            state.admit(profile, params, matcher);
        }
        if state.is_stable(params) {
            state.termination = Some(Termination::Stabilized);
            break;
        }
        if state.iterations_run >= params.max_iterations {
            state.termination = Some(Termination::MaxIterations);
            break;
        }
        if state.pool.len() < params.pool_size {
            state.termination = Some(Termination::DataExhausted);
            break;
        }
        state.iterate(params, matcher);
        observer(&state);
    }
    Ok(state)
}
