//! Seed-deterministic synthetic corpora for experiments and tests.
//!
//! Each cluster gets its own subtree under the root, so profiles from
//! different clusters share no category below the root and their tree
//! similarity is zero unless noise mixes them. Users draw their categories
//! from a per-cluster core pool, which controls how much two users of the
//! same cluster overlap.

use std::io::Cursor;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use idiorec_core::ontology::{parse_ontology, OntologyFormat, OntologyIndex, TreeAddress};
use idiorec_core::profile::{ProfileEntry, WebProfile};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub clusters: usize,
    pub users_per_cluster: usize,
    pub categories_per_user: usize,
    pub vote_min: u32,
    pub vote_max: u32,
    /// Depth of leaf addresses counted from the root (root=1, cluster
    /// roots=2, so depth 5 puts leaves three levels below a cluster root).
    pub depth: usize,
    pub branching: usize,
    /// Per-entry probability of swapping the drawn category for a random
    /// leaf anywhere in the tree.
    pub noise: f64,
    /// Size of the per-cluster core pool users draw from; defaults to twice
    /// categories_per_user (capped at the leaf count).
    pub core_per_cluster: Option<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            clusters: 2,
            users_per_cluster: 10,
            categories_per_user: 8,
            vote_min: 1,
            vote_max: 5,
            depth: 5,
            branching: 3,
            noise: 0.1,
            core_per_cluster: None,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn leaves_per_cluster(&self) -> usize {
        self.branching.pow(self.depth.saturating_sub(2) as u32)
    }

    fn core_size(&self) -> usize {
        self.core_per_cluster
            .unwrap_or(2 * self.categories_per_user)
            .min(self.leaves_per_cluster())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.clusters == 0 || self.users_per_cluster == 0 || self.categories_per_user == 0 {
            return bad("clusters, users and categories-per-user must be positive".into());
        }
        if self.vote_min == 0 || self.vote_min > self.vote_max {
            return bad(format!(
                "vote range {}..={} must satisfy 1 <= min <= max",
                self.vote_min, self.vote_max
            ));
        }
        if self.depth < 3 || self.depth > 16 {
            return bad(format!("depth {} outside 3..=16", self.depth));
        }
        if self.branching < 2 {
            return bad(format!("branching {} must be at least 2", self.branching));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        if self.core_size() < self.categories_per_user {
            return bad(format!(
                "core pool {} cannot cover {} categories per user (leaves per cluster: {})",
                self.core_size(),
                self.categories_per_user,
                self.leaves_per_cluster()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub index: OntologyIndex,
    pub profiles: Vec<WebProfile>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus, CliError> {
    spec.validate()?;

    // lay out the tree: per cluster a full branching^k expansion
    let mut cats: Vec<(String, String)> = vec![("1".to_string(), "Top".to_string())];
    let mut cluster_leaves: Vec<Vec<String>> = Vec::new();
    for k in 0..spec.clusters {
        let root = format!("1.{}", k + 1);
        cats.push((root.clone(), format!("Cluster {}", k + 1)));
        let mut frontier = vec![root];
        for _ in 3..=spec.depth {
            let mut next = Vec::with_capacity(frontier.len() * spec.branching);
            for parent in &frontier {
                for c in 1..=spec.branching {
                    let address = format!("{parent}.{c}");
                    cats.push((address.clone(), format!("Node {address}")));
                    next.push(address);
                }
            }
            frontier = next;
        }
        cluster_leaves.push(frontier);
    }

    let akey = |a: &str| -> Vec<u32> { a.split('.').map(|c| c.parse().unwrap()).collect() };
    cats.sort_by_key(|(a, _)| akey(a));

    let mut tsv = String::new();
    for (i, (address, title)) in cats.iter().enumerate() {
        tsv.push_str(&format!("C\t{}\t{}\t{}\n", i + 1, address, title));
    }
    for leaves in &cluster_leaves {
        for leaf in leaves {
            let catid = cats.iter().position(|(a, _)| a == leaf).unwrap() + 1;
            tsv.push_str(&format!(
                "U\thttp://n{}.example/\t{}\n",
                leaf.replace('.', "-"),
                catid
            ));
        }
    }
    let index = parse_ontology(Cursor::new(tsv), OntologyFormat::Tsv)
        .map_err(|e| CliError::Data(format!("generated ontology rejected: {e}")))?
        .index;

    let all_leaves: Vec<&String> = cluster_leaves.iter().flatten().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // per-cluster core pools
    let mut cores: Vec<Vec<&String>> = Vec::new();
    for leaves in &cluster_leaves {
        let mut pool: Vec<&String> = leaves.iter().collect();
        pool.shuffle(&mut rng);
        pool.truncate(spec.core_size());
        cores.push(pool);
    }

    let mut profiles = Vec::with_capacity(spec.clusters * spec.users_per_cluster);
    for (k, core) in cores.iter().enumerate() {
        for i in 0..spec.users_per_cluster {
            let user_id = format!("c{k:02}u{i:02}");
            let mut draw = core.clone();
            draw.shuffle(&mut rng);
            draw.truncate(spec.categories_per_user);
            let mut chosen: Vec<String> = draw.into_iter().cloned().collect();
            if spec.noise > 0.0 {
                for slot in 0..chosen.len() {
                    if rng.random::<f64>() < spec.noise {
                        for _ in 0..64 {
                            let pick = all_leaves[rng.random_range(0..all_leaves.len())];
                            if !chosen.contains(pick) {
                                chosen[slot] = pick.clone();
                                break;
                            }
                        }
                    }
                }
            }
            let mut entries: Vec<ProfileEntry> = chosen
                .into_iter()
                .map(|a| {
                    let address: TreeAddress = a.parse().unwrap();
                    let catid = index.catid_at(&address).unwrap();
                    ProfileEntry {
                        address,
                        catid,
                        votes: rng.random_range(spec.vote_min..=spec.vote_max),
                    }
                })
                .collect();
            entries.sort_by(|a, b| a.address.cmp(&b.address));
            let mapped: usize = entries.iter().map(|e| e.votes as usize).sum();
            profiles.push(WebProfile {
                user_id,
                entries,
                total_bookmarks: mapped,
                mapped,
                unmapped: 0,
            });
        }
    }

    Ok(SynthCorpus { index, profiles })
}
