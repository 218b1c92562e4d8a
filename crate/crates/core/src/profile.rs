//! Web profiles: a user expressed as category votes.
//!
//! A profile maps a cleaned bookmark list onto ontology categories. Each hit
//! adds one vote to the resolved category; the profile keeps both the tree
//! address and the catid of every category so it can be written in either
//! encoding (addresses preserve tree structure, catids are compact).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ingest::CleanBookmarkList;
use crate::ontology::{CategoryId, OntologyError, OntologyIndex, TreeAddress};

/// Header prefix of the profile file format.
pub const PROFILE_HEADER: &str = "IDIOREC-PROFILE v1";

/// Entry-count cap applied by [`WebProfile::effective_size`].
pub const SIZE_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("bad profile header, expected {PROFILE_HEADER:?} <encoding> <user-id>")]
    BadHeader,
    #[error("malformed profile entry {0:?}")]
    MalformedEntry(String),
    #[error("duplicate profile entry for category {0}")]
    DuplicateEntry(CategoryId),
    #[error("integer-encoded profile needs an ontology index to resolve catids")]
    NeedsIndex,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// How URLs are resolved to categories during profile building.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LookupMode {
    /// Reverse truncation at `/` boundaries (the default strategy).
    #[default]
    Truncation,
    /// Longest shared character prefix.
    Prefix,
}

/// On-disk encodings of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileEncoding {
    /// `address:votes;` per line, e.g. `1.13.12.1.5:5;`.
    #[default]
    Tree,
    /// `catid:votes;` per line, e.g. `22343:5;`.
    Integer,
}

impl ProfileEncoding {
    pub fn token(self) -> &'static str {
        match self {
            ProfileEncoding::Tree => "tree",
            ProfileEncoding::Integer => "integer",
        }
    }
}

impl fmt::Display for ProfileEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// What "profile size" means for the disparity correction: distinct
/// categories (the default reading) or total bookmark votes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SizeBasis {
    #[default]
    Categories,
    Bookmarks,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileEntry {
    pub address: TreeAddress,
    pub catid: CategoryId,
    pub votes: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WebProfile {
    pub user_id: String,
    /// Sorted by address; unique by catid.
    pub entries: Vec<ProfileEntry>,
    pub total_bookmarks: usize,
    pub mapped: usize,
    pub unmapped: usize,
}

/// How well a bookmark list mapped onto the ontology.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub mapped_fraction: f64,
    /// Hit counts by truncation depth; index 0 is exact matches. Prefix-mode
    /// hits all land at depth 0.
    pub by_truncation_depth: Vec<usize>,
}

impl WebProfile {
    pub fn empty(user_id: impl Into<String>) -> WebProfile {
        WebProfile {
            user_id: user_id.into(),
            entries: Vec::new(),
            total_bookmarks: 0,
            mapped: 0,
            unmapped: 0,
        }
    }

    pub fn vote_for(&self, catid: CategoryId) -> Option<u32> {
        self.entries
            .iter()
            .find(|e| e.catid == catid)
            .map(|e| e.votes)
    }

    /// Vote lookup by tree address. Addresses are the canonical category
    /// identity, so this works across profiles parsed without an index.
    pub fn vote_for_address(&self, address: &TreeAddress) -> Option<u32> {
        self.entries
            .binary_search_by(|e| e.address.cmp(address))
            .ok()
            .map(|i| self.entries[i].votes)
    }

    pub fn contains(&self, catid: CategoryId) -> bool {
        self.vote_for(catid).is_some()
    }

    pub fn vote_sum(&self) -> u64 {
        self.entries.iter().map(|e| u64::from(e.votes)).sum()
    }

    /// Profile size for the disparity correction, capped at 100.
    pub fn effective_size(&self) -> usize {
        self.entries.len().min(SIZE_CAP)
    }

    /// Like [`WebProfile::effective_size`] but with a selectable notion of
    /// size; `Bookmarks` counts votes instead of distinct categories.
    pub fn effective_size_with(&self, basis: SizeBasis) -> usize {
        let n = match basis {
            SizeBasis::Categories => self.entries.len(),
            SizeBasis::Bookmarks => usize::try_from(self.vote_sum()).unwrap_or(usize::MAX),
        };
        n.min(SIZE_CAP)
    }

    pub fn serialize(&self, encoding: ProfileEncoding) -> String {
        serialize_profile(self, encoding)
    }
}

/// Builds a profile from cleaned bookmarks, resolving each URL through the
/// index. Misses are counted, not fatal.
pub fn build_profile(
    user_id: impl Into<String>,
    urls: &CleanBookmarkList,
    index: &OntologyIndex,
    mode: LookupMode,
) -> (WebProfile, CoverageReport) {
    let mut votes: BTreeMap<CategoryId, u32> = BTreeMap::new();
    let mut by_depth: Vec<usize> = Vec::new();
    let mut unmapped = 0usize;
    for url in &urls.urls {
        let hit = match mode {
            LookupMode::Truncation => index.lookup_url(url),
            LookupMode::Prefix => index.lookup_url_prefix(url).map(|catid| {
                crate::ontology::UrlMatch {
                    catid,
                    truncation_depth: 0,
                }
            }),
        };
        match hit {
            Some(m) => {
                *votes.entry(m.catid).or_insert(0) += 1;
                if by_depth.len() <= m.truncation_depth {
                    by_depth.resize(m.truncation_depth + 1, 0);
                }
                by_depth[m.truncation_depth] += 1;
            }
            None => unmapped += 1,
        }
    }
    let mut entries: Vec<ProfileEntry> = votes
        .into_iter()
        .map(|(catid, votes)| ProfileEntry {
            address: index
                .address_of(catid)
                .expect("lookup returned an indexed category")
                .clone(),
            catid,
            votes,
        })
        .collect();
    entries.sort_by(|a, b| a.address.cmp(&b.address));
    let mapped: usize = entries.iter().map(|e| e.votes as usize).sum();
    let total = urls.urls.len();
    let profile = WebProfile {
        user_id: user_id.into(),
        entries,
        total_bookmarks: total,
        mapped,
        unmapped,
    };
    let report = CoverageReport {
        mapped_fraction: if total > 0 {
            mapped as f64 / total as f64
        } else {
            0.0
        },
        by_truncation_depth: by_depth,
    };
    (profile, report)
}

/// Writes a profile as text: a header line, then one `key:votes;` entry per
/// line in address order.
pub fn serialize_profile(p: &WebProfile, encoding: ProfileEncoding) -> String {
    let user = p.user_id.replace(['\n', '\r'], " ");
    let mut out = format!("{PROFILE_HEADER} {} {}\n", encoding.token(), user);
    for e in &p.entries {
        match encoding {
            ProfileEncoding::Tree => {
                out.push_str(&format!("{}:{};\n", e.address, e.votes));
            }
            ProfileEncoding::Integer => {
                out.push_str(&format!("{}:{};\n", e.catid, e.votes));
            }
        }
    }
    out
}

fn split_header(text: &str) -> Result<(ProfileEncoding, &str, std::str::Lines<'_>), ProfileError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(ProfileError::BadHeader)?.trim_end();
    let rest = header
        .strip_prefix(PROFILE_HEADER)
        .ok_or(ProfileError::BadHeader)?;
    let rest = rest.strip_prefix(' ').ok_or(ProfileError::BadHeader)?;
    let (encoding_token, user_id) = rest.split_once(' ').ok_or(ProfileError::BadHeader)?;
    let encoding = match encoding_token {
        "tree" => ProfileEncoding::Tree,
        "integer" => ProfileEncoding::Integer,
        _ => return Err(ProfileError::BadHeader),
    };
    let user_id = user_id.trim();
    if user_id.is_empty() {
        return Err(ProfileError::BadHeader);
    }
    Ok((encoding, user_id, lines))
}

/// Splits one body line into (key, votes); None for blanks and comments.
fn split_entry(line: &str) -> Result<Option<(&str, u32)>, ProfileError> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let body = line.strip_suffix(';').unwrap_or(line).trim();
    let (key, votes) = body
        .split_once(':')
        .ok_or_else(|| ProfileError::MalformedEntry(line.to_string()))?;
    let votes: u32 = votes
        .trim()
        .parse()
        .map_err(|_| ProfileError::MalformedEntry(line.to_string()))?;
    if votes == 0 {
        return Err(ProfileError::MalformedEntry(line.to_string()));
    }
    Ok(Some((key.trim(), votes)))
}

/// Reads a profile in either encoding. The index supplies the missing half
/// of each entry (address for integer files, catid for tree files).
///
/// A parsed profile reports every vote as a mapped bookmark: the unmapped
/// count is not stored in the file and reconstructs as zero.
pub fn parse_profile(text: &str, index: &OntologyIndex) -> Result<WebProfile, ProfileError> {
    let (encoding, user_id, lines) = split_header(text)?;
    let mut entries: Vec<ProfileEntry> = Vec::new();
    let mut seen: BTreeMap<CategoryId, ()> = BTreeMap::new();
    for line in lines {
        let Some((key, votes)) = split_entry(line)? else {
            continue;
        };
        let (address, catid) = match encoding {
            ProfileEncoding::Tree => {
                let address: TreeAddress = key
                    .parse()
                    .map_err(|_| ProfileError::MalformedEntry(line.to_string()))?;
                let catid = index
                    .catid_at(&address)
                    .ok_or_else(|| OntologyError::UnknownAddress(address.clone()))?;
                (address, catid)
            }
            ProfileEncoding::Integer => {
                let catid: CategoryId = key
                    .parse()
                    .map_err(|_| ProfileError::MalformedEntry(line.to_string()))?;
                let address = index
                    .address_of(catid)
                    .ok_or(OntologyError::UnknownCatid(catid))?
                    .clone();
                (address, catid)
            }
        };
        if seen.insert(catid, ()).is_some() {
            return Err(ProfileError::DuplicateEntry(catid));
        }
        entries.push(ProfileEntry {
            address,
            catid,
            votes,
        });
    }
    entries.sort_by(|a, b| a.address.cmp(&b.address));
    let mapped: usize = entries.iter().map(|e| e.votes as usize).sum();
    Ok(WebProfile {
        user_id: user_id.to_string(),
        entries,
        total_bookmarks: mapped,
        mapped,
        unmapped: 0,
    })
}

/// Reads a tree-encoded profile with no index at hand, e.g. to compare two
/// profile files directly. Catids cannot be recovered without an index, so
/// entries carry synthetic ids numbered in address order; integer-encoded
/// files are rejected.
pub fn parse_profile_standalone(text: &str) -> Result<WebProfile, ProfileError> {
    let (encoding, user_id, lines) = split_header(text)?;
    if encoding == ProfileEncoding::Integer {
        return Err(ProfileError::NeedsIndex);
    }
    let mut raw: Vec<(TreeAddress, u32)> = Vec::new();
    for line in lines {
        let Some((key, votes)) = split_entry(line)? else {
            continue;
        };
        let address: TreeAddress = key
            .parse()
            .map_err(|_| ProfileError::MalformedEntry(line.to_string()))?;
        if raw.iter().any(|(a, _)| *a == address) {
            return Err(ProfileError::MalformedEntry(line.to_string()));
        }
        raw.push((address, votes));
    }
    raw.sort_by(|a, b| a.0.cmp(&b.0));
    let entries: Vec<ProfileEntry> = raw
        .into_iter()
        .enumerate()
        .map(|(i, (address, votes))| ProfileEntry {
            address,
            catid: CategoryId(i as u32 + 1),
            votes,
        })
        .collect();
    let mapped: usize = entries.iter().map(|e| e.votes as usize).sum();
    Ok(WebProfile {
        user_id: user_id.to_string(),
        entries,
        total_bookmarks: mapped,
        mapped,
        unmapped: 0,
    })
}
