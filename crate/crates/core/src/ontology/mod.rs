//! Category tree and URL index for a DMOZ-style web directory.
//!
//! Categories are identified two ways at once: a numeric `catid` (stable,
//! opaque) and a [`TreeAddress`] giving the path from the root as child
//! ordinals, e.g. `1.13.12.1.5`. The address encodes tree position and is what
//! the structure-aware similarity measure works on; the catid is the compact
//! handle used in flat encodings and as a map key.
//!
//! The index also maps normalized URLs to categories and answers lookups for
//! URLs that are not indexed verbatim, either by truncating the query back to
//! `/` boundaries or by longest shared prefix.

mod parse;

pub use parse::{parse_ontology, OntologyFormat, ParseStats, ParsedOntology};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

/// Hard cap on tree depth. The directory dumps this crate targets never
/// exceed it, and the quadratic matching polynomial is calibrated for it.
pub const MAX_DEPTH: usize = 16;

/// Header line of the persisted index format.
pub const INDEX_HEADER: &str = "IDIOREC-INDEX v1";

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("failed to read ontology source: {0}")]
    Io(#[from] io::Error),
    #[error("empty URL")]
    EmptyUrl,
    #[error("no parsable host in URL {0:?}")]
    NoHost(String),
    #[error("invalid tree address {text:?}: {reason}")]
    BadAddress { text: String, reason: String },
    #[error("source contains no valid categories")]
    NoCategories,
    #[error("catid {0} maps to conflicting addresses {1} and {2}")]
    ConflictingCatid(CategoryId, TreeAddress, TreeAddress),
    #[error("ontology has multiple roots ({0} and {1}); a single root is required")]
    MultipleRoots(String, String),
    #[error("unknown category address {0}")]
    UnknownAddress(TreeAddress),
    #[error("unknown category id {0}")]
    UnknownCatid(CategoryId),
    #[error("bad index header, expected {INDEX_HEADER:?}")]
    BadHeader,
    #[error("addresses {0} and {1} do not share a root")]
    RootMismatch(TreeAddress, TreeAddress),
}

/// Numeric category identifier as assigned by the directory dump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CategoryId(pub u32);

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for CategoryId {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<u32>().map(CategoryId)
    }
}

/// Path from the tree root expressed as 1-based child ordinals.
///
/// Depth 1 is the root itself. Ordering is component-wise numeric (derived
/// from the underlying `Vec<u32>`), so `1.2` sorts before `1.10`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeAddress(Vec<u32>);

impl TreeAddress {
    pub fn new(components: Vec<u32>) -> Result<Self, OntologyError> {
        let text = || {
            components
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(".")
        };
        if components.is_empty() {
            return Err(OntologyError::BadAddress {
                text: String::new(),
                reason: "empty".into(),
            });
        }
        if components.len() > MAX_DEPTH {
            return Err(OntologyError::BadAddress {
                text: text(),
                reason: format!("deeper than {MAX_DEPTH}"),
            });
        }
        if components.iter().any(|&c| c == 0) {
            return Err(OntologyError::BadAddress {
                text: text(),
                reason: "zero component (ordinals are 1-based)".into(),
            });
        }
        Ok(TreeAddress(components))
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    /// Depth of the node this address names; the root has depth 1.
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn root(&self) -> u32 {
        self.0[0]
    }

    pub fn parent(&self) -> Option<TreeAddress> {
        if self.0.len() > 1 {
            Some(TreeAddress(self.0[..self.0.len() - 1].to_vec()))
        } else {
            None
        }
    }

    pub fn child(&self, ordinal: u32) -> Result<TreeAddress, OntologyError> {
        let mut v = self.0.clone();
        v.push(ordinal);
        TreeAddress::new(v)
    }

    pub fn is_prefix_of(&self, other: &TreeAddress) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Length of the common root-first component prefix. Zero when the roots
    /// already differ.
    pub fn common_prefix_len(&self, other: &TreeAddress) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// Matching level between two addresses sharing a root: the depth of
    /// their deepest common ancestor. `None` when the roots differ.
    pub fn matching_level(&self, other: &TreeAddress) -> Option<usize> {
        match self.common_prefix_len(other) {
            0 => None,
            l => Some(l),
        }
    }

    /// Edge count of the tree path between the two nodes, with one twist:
    /// the distance from a node to itself is 1, not 0, so the reciprocal
    /// weighting used by the similarity measure stays finite and identical
    /// categories get full weight.
    pub fn edge_distance(&self, other: &TreeAddress) -> Option<usize> {
        let l = self.matching_level(other)?;
        let d = self.0.len() + other.0.len() - 2 * l;
        Some(if d == 0 { 1 } else { d })
    }
}

impl fmt::Display for TreeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for c in &self.0 {
            if !first {
                f.write_str(".")?;
            }
            write!(f, "{c}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for TreeAddress {
    type Err = OntologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut components = Vec::new();
        for part in s.split('.') {
            let c: u32 = part.trim().parse().map_err(|_| OntologyError::BadAddress {
                text: s.to_string(),
                reason: format!("bad component {part:?}"),
            })?;
            components.push(c);
        }
        TreeAddress::new(components)
    }
}

/// One category of the directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryNode {
    pub catid: CategoryId,
    pub address: TreeAddress,
    pub title: String,
    pub child_count: usize,
    pub url_count: usize,
}

/// Result of a URL lookup: the category hit and how many path components had
/// to be cut off the query to reach it (0 for a verbatim hit).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UrlMatch {
    pub catid: CategoryId,
    pub truncation_depth: usize,
}

/// In-memory category tree plus URL index.
#[derive(Debug, Clone, PartialEq)]
pub struct OntologyIndex {
    nodes: BTreeMap<CategoryId, CategoryNode>,
    addresses: BTreeMap<TreeAddress, CategoryId>,
    urls: BTreeMap<String, CategoryId>,
    histogram: [usize; MAX_DEPTH],
}

impl OntologyIndex {
    pub(crate) fn from_parts(
        mut nodes: BTreeMap<CategoryId, CategoryNode>,
        urls: BTreeMap<String, CategoryId>,
    ) -> Self {
        let mut addresses = BTreeMap::new();
        let mut histogram = [0usize; MAX_DEPTH];
        for node in nodes.values() {
            addresses.insert(node.address.clone(), node.catid);
            histogram[node.address.depth() - 1] += 1;
        }
        let mut child_counts: BTreeMap<CategoryId, usize> = BTreeMap::new();
        for node in nodes.values() {
            if let Some(parent) = node.address.parent() {
                if let Some(&pid) = addresses.get(&parent) {
                    *child_counts.entry(pid).or_default() += 1;
                }
            }
        }
        let mut url_counts: BTreeMap<CategoryId, usize> = BTreeMap::new();
        for catid in urls.values() {
            *url_counts.entry(*catid).or_default() += 1;
        }
        for (catid, node) in nodes.iter_mut() {
            node.child_count = child_counts.get(catid).copied().unwrap_or(0);
            node.url_count = url_counts.get(catid).copied().unwrap_or(0);
        }
        OntologyIndex {
            nodes,
            addresses,
            urls,
            histogram,
        }
    }

    pub fn category_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn url_count(&self) -> usize {
        self.urls.len()
    }

    pub fn node(&self, catid: CategoryId) -> Option<&CategoryNode> {
        self.nodes.get(&catid)
    }

    pub fn node_at(&self, address: &TreeAddress) -> Option<&CategoryNode> {
        self.addresses.get(address).and_then(|c| self.nodes.get(c))
    }

    pub fn catid_at(&self, address: &TreeAddress) -> Option<CategoryId> {
        self.addresses.get(address).copied()
    }

    pub fn address_of(&self, catid: CategoryId) -> Option<&TreeAddress> {
        self.nodes.get(&catid).map(|n| &n.address)
    }

    /// All categories in address order.
    pub fn nodes_by_address(&self) -> impl Iterator<Item = &CategoryNode> {
        self.addresses.values().map(move |c| &self.nodes[c])
    }

    /// All indexed URLs in lexicographic order.
    pub fn urls_iter(&self) -> impl Iterator<Item = (&str, CategoryId)> {
        self.urls.iter().map(|(u, c)| (u.as_str(), *c))
    }

    /// Indexed URLs filed under one category, lexicographically sorted.
    pub fn urls_in(&self, catid: CategoryId) -> Vec<&str> {
        self.urls
            .iter()
            .filter(|(_, c)| **c == catid)
            .map(|(u, _)| u.as_str())
            .collect()
    }

    /// Category counts per depth, index 0 holding depth 1 (the root).
    pub fn level_histogram(&self) -> &[usize; MAX_DEPTH] {
        &self.histogram
    }

    /// Edge distance between two categories named by address. Both must be
    /// in the index.
    pub fn tree_distance(
        &self,
        a: &TreeAddress,
        b: &TreeAddress,
    ) -> Result<usize, OntologyError> {
        for addr in [a, b] {
            if !self.addresses.contains_key(addr) {
                return Err(OntologyError::UnknownAddress(addr.clone()));
            }
        }
        a.edge_distance(b)
            .ok_or_else(|| OntologyError::RootMismatch(a.clone(), b.clone()))
    }

    /// Looks up a normalized URL, falling back to successive truncation at
    /// `/` boundaries down to the host-only form. A URL whose host is not in
    /// the index at all comes back as `None`.
    pub fn lookup_url(&self, url: &str) -> Option<UrlMatch> {
        if let Some(&catid) = self.urls.get(url) {
            return Some(UrlMatch {
                catid,
                truncation_depth: 0,
            });
        }
        let host_slash = host_slash_index(url)?;
        let mut depth = 0;
        let mut end = url.len();
        loop {
            let pos = match url[..end].rfind('/') {
                Some(p) if p >= host_slash => p,
                _ => return None,
            };
            let candidate = &url[..=pos];
            if candidate.len() < url.len() {
                depth += 1;
                if let Some(&catid) = self.urls.get(candidate) {
                    return Some(UrlMatch {
                        catid,
                        truncation_depth: depth,
                    });
                }
            }
            if pos == host_slash {
                return None;
            }
            end = pos;
        }
    }

    /// Longest-shared-prefix lookup: finds the indexed URL sharing the
    /// longest character prefix with the query, requiring at least the full
    /// `scheme://host/` part to match. Ties go to the lexicographically
    /// smallest indexed URL.
    pub fn lookup_url_prefix(&self, url: &str) -> Option<CategoryId> {
        let host_slash = host_slash_index(url)?;
        let min_len = host_slash + 1;
        let mut best = 0usize;
        if let Some((key, _)) = self
            .urls
            .range::<str, _>((std::ops::Bound::Unbounded, std::ops::Bound::Included(url)))
            .next_back()
        {
            best = best.max(common_prefix_bytes(url, key));
        }
        if let Some((key, _)) = self
            .urls
            .range::<str, _>((std::ops::Bound::Excluded(url), std::ops::Bound::Unbounded))
            .next()
        {
            best = best.max(common_prefix_bytes(url, key));
        }
        if best < min_len {
            return None;
        }
        // Longest common prefix against a sorted set is always attained at a
        // direct neighbour, so `best` is the true maximum. The winner on ties
        // is the first key at or after the prefix itself.
        let mut cut = best;
        while !url.is_char_boundary(cut) {
            cut -= 1;
        }
        let prefix = &url[..cut];
        self.urls
            .range::<str, _>((
                std::ops::Bound::Included(prefix),
                std::ops::Bound::Unbounded,
            ))
            .next()
            .filter(|(key, _)| key.starts_with(prefix))
            .map(|(_, &catid)| catid)
    }

    /// Writes the index in its line-oriented persistent form.
    pub fn save<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{INDEX_HEADER}")?;
        writeln!(w, "# categories={} urls={}", self.nodes.len(), self.urls.len())?;
        for node in self.nodes_by_address() {
            let title = node.title.replace(['\n', '\r'], " ");
            writeln!(w, "C\t{}\t{}\t{}", node.catid, node.address, title)?;
        }
        for (url, catid) in &self.urls {
            writeln!(w, "U\t{url}\t{catid}")?;
        }
        Ok(())
    }

    /// Reads an index previously written by [`OntologyIndex::save`].
    pub fn load<R: BufRead>(mut r: R) -> Result<ParsedOntology, OntologyError> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        if header.trim_end() != INDEX_HEADER {
            return Err(OntologyError::BadHeader);
        }
        parse_ontology(r, OntologyFormat::Tsv)
    }
}

/// Index of the `/` that terminates `scheme://host` in a normalized URL.
fn host_slash_index(url: &str) -> Option<usize> {
    let scheme_end = url.find("://")?;
    let host_start = scheme_end + 3;
    url[host_start..].find('/').map(|i| host_start + i)
}

fn common_prefix_bytes(a: &str, b: &str) -> usize {
    a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count()
}

/// Canonicalizes a raw URL string for indexing and lookup.
///
/// Leading and trailing whitespace is trimmed, a missing scheme defaults to
/// `http://`, scheme and host are lowercased, the path keeps its case, and a
/// bare host gains a trailing `/`. Strings without a usable host are errors.
pub fn normalize_url(raw: &str) -> Result<String, OntologyError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(OntologyError::EmptyUrl);
    }
    let with_scheme = if has_scheme(trimmed) {
        trimmed.to_string()
    } else {
        format!("http://{trimmed}")
    };
    let parsed =
        url::Url::parse(&with_scheme).map_err(|_| OntologyError::NoHost(raw.to_string()))?;
    if parsed.host_str().is_none() {
        return Err(OntologyError::NoHost(raw.to_string()));
    }
    Ok(String::from(parsed))
}

fn has_scheme(s: &str) -> bool {
    match s.find("://") {
        Some(i) if i > 0 => {
            let scheme = &s[..i];
            scheme.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        }
        _ => false,
    }
}
