//! Profile similarity measures.
//!
//! The tree measure walks every pair of categories drawn from the two
//! profiles and scores each pair by tree proximity: the reciprocal of the
//! edge distance, times a matching function of the pair's common-prefix
//! depth, times the combined vote weight. The sum is normalized and then
//! corrected for size disparity between the profiles. A flat Pearson
//! correlation over shared categories is provided as the baseline the tree
//! measure is meant to improve on.

use std::cmp::Ordering;

use crate::config::{parse_bool, parse_f64, parse_usize, ConfigError};
use crate::ontology::TreeAddress;
use crate::profile::{SizeBasis, WebProfile};

/// Matching function applied to the common-prefix depth of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchFn {
    Linear,
    #[default]
    Quadratic,
}

/// Denominator of the raw similarity core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// n × m, the count of category pairs.
    PairCount,
    /// Combined vote mass of both profiles.
    #[default]
    VoteSum,
}

/// Which similarity measure a caller wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    #[default]
    Tree,
    Pearson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityParams {
    pub match_fn: MatchFn,
    /// Saturation level of the linear matching function.
    pub ml_cutoff: u32,
    /// Floor of the disparity correction.
    pub disparity_a: f64,
    pub normalization: Normalization,
    pub disparity_enabled: bool,
    /// What n and m count in the disparity factor.
    pub size_basis: SizeBasis,
    /// Apply the disparity correction to the Pearson baseline too.
    pub pearson_disparity: bool,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams {
            match_fn: MatchFn::Quadratic,
            ml_cutoff: 8,
            disparity_a: 0.6,
            normalization: Normalization::VoteSum,
            disparity_enabled: true,
            size_basis: SizeBasis::Categories,
            pearson_disparity: false,
        }
    }
}

impl SimilarityParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(2..=16).contains(&self.ml_cutoff) {
            return Err(ConfigError::Invalid(format!(
                "ml_cutoff must be in [2,16], got {}",
                self.ml_cutoff
            )));
        }
        if !(0.0..1.0).contains(&self.disparity_a) {
            return Err(ConfigError::Invalid(format!(
                "disparity_a must be in [0,1), got {}",
                self.disparity_a
            )));
        }
        Ok(())
    }

    /// Applies one config key. Returns false when the key is not a
    /// similarity parameter, so callers can try other parameter sets.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        match key {
            "match_fn" => {
                self.match_fn = match value {
                    "linear" => MatchFn::Linear,
                    "quadratic" => MatchFn::Quadratic,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "linear | quadratic",
                        })
                    }
                }
            }
            "ml_cutoff" => self.ml_cutoff = parse_usize(key, value)? as u32,
            "disparity_a" => self.disparity_a = parse_f64(key, value)?,
            "normalization" => {
                self.normalization = match value {
                    "pair-count" | "pair_count" => Normalization::PairCount,
                    "vote-sum" | "vote_sum" => Normalization::VoteSum,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "pair-count | vote-sum",
                        })
                    }
                }
            }
            "disparity_enabled" => self.disparity_enabled = parse_bool(key, value)?,
            "size_basis" => {
                self.size_basis = match value {
                    "categories" => SizeBasis::Categories,
                    "bookmarks" => SizeBasis::Bookmarks,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            expected: "categories | bookmarks",
                        })
                    }
                }
            }
            "pearson_disparity" => self.pearson_disparity = parse_bool(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Scored comparison of two profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityScore {
    /// Final similarity in [0,1].
    pub value: f64,
    /// Normalized double sum before clamping and disparity.
    pub raw_core: f64,
    /// Disparity correction that was (or would be) applied.
    pub disparity: f64,
    /// Set when at least one profile was empty and the score is 0 by fiat.
    pub degenerate: bool,
}

/// min(1, (L−1)/(ML−1)): zero at the root, saturating at the cutoff level.
pub fn linear_match(level: u32, ml_cutoff: u32) -> f64 {
    assert!(
        (1..=16).contains(&level),
        "matching level {level} outside [1,16]"
    );
    assert!(ml_cutoff >= 2, "ml_cutoff must be at least 2");
    let v = (level - 1) as f64 / (ml_cutoff - 1) as f64;
    v.min(1.0)
}

/// −(l² − 33l + 32)/240: zero at level 1, one at level 16, strictly
/// increasing in between. The polynomial is negative on (1,32), so the
/// negated form is the usable, non-negative one.
pub fn quadratic_match(level: u32) -> f64 {
    assert!(
        (1..=16).contains(&level),
        "matching level {level} outside [1,16]"
    );
    let l = level as f64;
    // written sum-first so level 1 yields +0.0 rather than -0.0
    (33.0 * l - l * l - 32.0) / 240.0
}

/// Size-disparity correction a + (1−a)·(n/m)·((n+m)/200) for n ≤ m, both
/// already capped at 100. Swaps its arguments if needed; a zero size pins
/// the factor to its floor a.
pub fn disparity_factor(n: usize, m: usize, a: f64) -> f64 {
    let (n, m) = if n <= m { (n, m) } else { (m, n) };
    if n == 0 || m == 0 {
        return a;
    }
    let n = n.min(100) as f64;
    let m = m.min(100) as f64;
    a + (1.0 - a) * (n / m) * ((n + m) / 200.0)
}

fn match_value(level: usize, params: &SimilarityParams) -> f64 {
    match params.match_fn {
        MatchFn::Linear => linear_match(level as u32, params.ml_cutoff),
        MatchFn::Quadratic => quadratic_match(level as u32),
    }
}

/// Contribution of one category pair: (1/ed) × match(l) × (vote_a+vote_b).
/// Pairs that only share the root contribute 0; addresses with different
/// roots (which cannot occur within one index) also yield 0.
pub fn pair_contribution(
    a: &TreeAddress,
    b: &TreeAddress,
    vote_a: u32,
    vote_b: u32,
    params: &SimilarityParams,
) -> f64 {
    let (Some(level), Some(ed)) = (a.matching_level(b), a.edge_distance(b)) else {
        return 0.0;
    };
    (1.0 / ed as f64) * match_value(level, params) * f64::from(vote_a + vote_b)
}

/// Orders profiles by entry content so the double sum always runs in one
/// canonical direction, making similarity_tree(p,q) == similarity_tree(q,p)
/// bit for bit.
fn entry_order(p: &WebProfile, q: &WebProfile) -> Ordering {
    let key = |e: &crate::profile::ProfileEntry| (e.address.clone(), e.votes);
    p.entries
        .iter()
        .map(key)
        .cmp(q.entries.iter().map(key))
}

/// Tree-structure similarity of two profiles.
pub fn similarity_tree(p: &WebProfile, q: &WebProfile, params: &SimilarityParams) -> SimilarityScore {
    let n = p.effective_size_with(params.size_basis);
    let m = q.effective_size_with(params.size_basis);
    let disparity = disparity_factor(n, m, params.disparity_a);
    if p.entries.is_empty() || q.entries.is_empty() {
        return SimilarityScore {
            value: 0.0,
            raw_core: 0.0,
            disparity,
            degenerate: true,
        };
    }
    let (first, second) = match entry_order(p, q) {
        Ordering::Greater => (q, p),
        _ => (p, q),
    };
    let mut numerator = 0.0;
    for a in &first.entries {
        for b in &second.entries {
            numerator += pair_contribution(&a.address, &b.address, a.votes, b.votes, params);
        }
    }
    let denominator = match params.normalization {
        Normalization::PairCount => (first.entries.len() * second.entries.len()) as f64,
        Normalization::VoteSum => (first.vote_sum() + second.vote_sum()) as f64,
    };
    let raw_core = numerator / denominator;
    debug_assert!(raw_core >= 0.0);
    let clamped = raw_core.min(1.0);
    let value = if params.disparity_enabled {
        clamped * disparity
    } else {
        clamped
    };
    SimilarityScore {
        value,
        raw_core,
        disparity,
        degenerate: false,
    }
}

/// Pearson correlation of vote vectors over the categories present in both
/// profiles, plus the size of that common set. Fewer than two common
/// categories, or a zero-variance vector, yields 0.
pub fn pearson_flat(p: &WebProfile, q: &WebProfile) -> (f64, usize) {
    let mut common: Vec<(f64, f64)> = Vec::new();
    // matched on address (the canonical identity), in address order
    for e in &p.entries {
        if let Some(v) = q.vote_for_address(&e.address) {
            common.push((f64::from(e.votes), f64::from(v)));
        }
    }
    let count = common.len();
    if count < 2 {
        return (0.0, count);
    }
    let n = count as f64;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in &common {
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    let var_x = n * sxx - sx * sx;
    let var_y = n * syy - sy * sy;
    if var_x <= 0.0 || var_y <= 0.0 {
        return (0.0, count);
    }
    let r = (n * sxy - sx * sy) / (var_x * var_y).sqrt();
    (r.clamp(-1.0, 1.0), count)
}

/// A measure plus its parameters, bundled so the AIS can score profile
/// pairs without caring which measure is configured. Scores are always in
/// [0,1]: negative Pearson correlations clamp to 0 since the immune-network
/// matrix expects non-negative match strengths.
#[derive(Debug, Clone, Default)]
pub struct Matcher {
    pub measure: Measure,
    pub params: SimilarityParams,
}

impl Matcher {
    pub fn new(measure: Measure, params: SimilarityParams) -> Matcher {
        Matcher { measure, params }
    }

    pub fn score(&self, p: &WebProfile, q: &WebProfile) -> f64 {
        match self.measure {
            Measure::Tree => similarity_tree(p, q, &self.params).value,
            Measure::Pearson => {
                let (r, _) = pearson_flat(p, q);
                let r = r.max(0.0);
                if self.params.pearson_disparity {
                    let n = p.effective_size_with(self.params.size_basis);
                    let m = q.effective_size_with(self.params.size_basis);
                    r * disparity_factor(n, m, self.params.disparity_a)
                } else {
                    r
                }
            }
        }
    }
}
