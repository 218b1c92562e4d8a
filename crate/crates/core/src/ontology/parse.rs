//! Ontology parsers: the canonical tsv form and the rdf-subset record shape
//! used by DMOZ content dumps.
//!
//! Both feed a common builder that enforces the index invariants: one root,
//! unique catids, addresses closed under ancestors, URLs attached to known
//! categories. Malformed records are counted and dropped rather than being
//! fatal; directory dumps are noisy.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use super::{normalize_url, CategoryId, CategoryNode, OntologyError, OntologyIndex, TreeAddress, MAX_DEPTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OntologyFormat {
    RdfSubset,
    Tsv,
}

/// Counters reported alongside a parsed index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParseStats {
    /// Categories in the final index (declared plus synthesized ancestors).
    pub categories: usize,
    /// URLs in the final index.
    pub urls: usize,
    /// Well-formed topic/category records seen in the source.
    pub topic_records: usize,
    /// Records dropped: malformed lines, duplicates, orphans, bad URLs.
    pub skipped: usize,
}

#[derive(Debug)]
pub struct ParsedOntology {
    pub index: OntologyIndex,
    pub stats: ParseStats,
}

pub fn parse_ontology<R: BufRead>(
    reader: R,
    format: OntologyFormat,
) -> Result<ParsedOntology, OntologyError> {
    match format {
        OntologyFormat::Tsv => parse_tsv(reader),
        OntologyFormat::RdfSubset => parse_rdf(reader),
    }
}

/// Accumulates raw category and URL records before invariant checking.
#[derive(Default)]
struct Builder {
    categories: Vec<(CategoryId, TreeAddress, String)>,
    urls: Vec<(String, CategoryId)>,
    topic_records: usize,
    skipped: usize,
}

impl Builder {
    fn build(self) -> Result<ParsedOntology, OntologyError> {
        let mut skipped = self.skipped;
        let mut by_catid: BTreeMap<CategoryId, (TreeAddress, String)> = BTreeMap::new();
        let mut taken_addresses: BTreeSet<TreeAddress> = BTreeSet::new();
        for (catid, address, title) in self.categories {
            match by_catid.get(&catid) {
                Some((existing, _)) if *existing == address => {
                    skipped += 1;
                    continue;
                }
                Some((existing, _)) => {
                    return Err(OntologyError::ConflictingCatid(
                        catid,
                        existing.clone(),
                        address,
                    ));
                }
                None => {}
            }
            if taken_addresses.contains(&address) {
                skipped += 1;
                continue;
            }
            taken_addresses.insert(address.clone());
            by_catid.insert(catid, (address, title));
        }
        if by_catid.is_empty() {
            return Err(OntologyError::NoCategories);
        }

        let mut roots = by_catid.values().map(|(a, _)| a.root());
        let first_root = roots.next().unwrap();
        if let Some(other) = roots.find(|&r| r != first_root) {
            return Err(OntologyError::MultipleRoots(
                first_root.to_string(),
                other.to_string(),
            ));
        }

        // Drop categories whose ancestor chain is not fully declared. A
        // missing ancestor orphans the whole subtree below it, and every
        // member of that subtree also has the missing address as a prefix,
        // so one pass against the declared set suffices.
        let mut nodes: BTreeMap<CategoryId, CategoryNode> = BTreeMap::new();
        for (catid, (address, title)) in &by_catid {
            let mut ancestors_ok = true;
            let mut cursor = address.parent();
            while let Some(prefix) = cursor {
                if !taken_addresses.contains(&prefix) {
                    ancestors_ok = false;
                    break;
                }
                cursor = prefix.parent();
            }
            if !ancestors_ok {
                skipped += 1;
                continue;
            }
            nodes.insert(
                *catid,
                CategoryNode {
                    catid: *catid,
                    address: address.clone(),
                    title: title.clone(),
                    child_count: 0,
                    url_count: 0,
                },
            );
        }

        let mut urls: BTreeMap<String, CategoryId> = BTreeMap::new();
        for (url, catid) in self.urls {
            if !nodes.contains_key(&catid) {
                skipped += 1;
                continue;
            }
            match urls.get(&url) {
                None => {
                    urls.insert(url, catid);
                }
                Some(&existing) if existing == catid => {}
                Some(_) => skipped += 1,
            }
        }

        let stats = ParseStats {
            categories: nodes.len(),
            urls: urls.len(),
            topic_records: self.topic_records,
            skipped,
        };
        Ok(ParsedOntology {
            index: OntologyIndex::from_parts(nodes, urls),
            stats,
        })
    }
}

fn parse_tsv<R: BufRead>(reader: R) -> Result<ParsedOntology, OntologyError> {
    let mut b = Builder::default();
    for line in reader.lines() {
        let line = line?;
        let line = line.trim_end_matches(['\n', '\r']);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(2, '\t');
        let kind = fields.next().unwrap_or("");
        let rest = fields.next().unwrap_or("");
        match kind {
            "C" => {
                let mut parts = rest.splitn(3, '\t');
                let catid = parts.next().and_then(|s| s.parse::<CategoryId>().ok());
                let address = parts.next().and_then(|s| s.parse::<TreeAddress>().ok());
                let title = parts.next().unwrap_or("").to_string();
                match (catid, address) {
                    (Some(c), Some(a)) => {
                        b.topic_records += 1;
                        b.categories.push((c, a, title));
                    }
                    _ => b.skipped += 1,
                }
            }
            "U" => {
                let mut parts = rest.splitn(2, '\t');
                let raw = parts.next().unwrap_or("");
                let catid = parts.next().and_then(|s| s.parse::<CategoryId>().ok());
                match (normalize_url(raw), catid) {
                    (Ok(u), Some(c)) => b.urls.push((u, c)),
                    _ => b.skipped += 1,
                }
            }
            _ => b.skipped += 1,
        }
    }
    b.build()
}

/// One declared `<Topic>` record after the line scan.
struct TopicRecord {
    path: String,
    catid: u32,
    title: Option<String>,
    narrows: Vec<String>,
    links: Vec<String>,
}

#[derive(Default)]
struct TopicDraft {
    path: String,
    catid: Option<u32>,
    title: Option<String>,
    narrows: Vec<String>,
    links: Vec<String>,
}

fn parse_rdf<R: BufRead>(reader: R) -> Result<ParsedOntology, OntologyError> {
    let mut topics: Vec<TopicRecord> = Vec::new();
    let mut skipped = 0usize;
    let mut current: Option<TopicDraft> = None;
    // Title/Description lines directly after an ExternalPage describe the
    // page, not the topic, and must not overwrite the topic title.
    let mut in_external_page = false;

    let flush = |draft: Option<TopicDraft>, topics: &mut Vec<TopicRecord>, skipped: &mut usize| {
        if let Some(d) = draft {
            match d.catid {
                Some(catid) => topics.push(TopicRecord {
                    path: d.path,
                    catid,
                    title: d.title,
                    narrows: d.narrows,
                    links: d.links,
                }),
                None => *skipped += 1,
            }
        }
    };

    for line in reader.lines() {
        let line = line?;
        let line = line.trim();
        if line.starts_with("<Topic") {
            flush(current.take(), &mut topics, &mut skipped);
            in_external_page = false;
            match tag_attr(line, "r:ID") {
                Some(path) if !path.is_empty() => {
                    current = Some(TopicDraft {
                        path,
                        ..TopicDraft::default()
                    })
                }
                _ => skipped += 1,
            }
        } else if line.starts_with("</Topic") {
            flush(current.take(), &mut topics, &mut skipped);
            in_external_page = false;
        } else if line.starts_with("<tag") {
            in_external_page = false;
            match (current.as_mut(), tag_attr(line, "catid").and_then(|v| v.parse::<u32>().ok())) {
                (Some(t), Some(c)) => t.catid = Some(c),
                _ => skipped += 1,
            }
        } else if line.starts_with("<catid") {
            in_external_page = false;
            match (current.as_mut(), element_text(line, "catid").and_then(|v| v.parse::<u32>().ok())) {
                (Some(t), Some(c)) => t.catid = Some(c),
                _ => skipped += 1,
            }
        } else if line.starts_with("<d:Title") {
            if !in_external_page {
                if let (Some(t), Some(text)) = (current.as_mut(), element_text(line, "d:Title")) {
                    t.title.get_or_insert(text);
                }
            }
        } else if line.starts_with("<narrow") {
            in_external_page = false;
            if let (Some(t), Some(res)) = (current.as_mut(), tag_attr(line, "r:resource")) {
                t.narrows.push(res);
            }
        } else if line.starts_with("<link") {
            in_external_page = false;
            match (current.as_mut(), tag_attr(line, "r:resource")) {
                (Some(t), Some(res)) => t.links.push(res),
                _ => skipped += 1,
            }
        } else if line.starts_with("<ExternalPage") {
            match (current.as_mut(), tag_attr(line, "about")) {
                (Some(t), Some(about)) => {
                    t.links.push(about);
                    in_external_page = true;
                }
                _ => skipped += 1,
            }
        }
        // d:Description bodies and anything unrecognised fall through.
    }
    flush(current.take(), &mut topics, &mut skipped);

    assemble_rdf(topics, skipped)
}

/// Working node of the path tree built from topic records.
struct PathNode {
    path: String,
    parent: Option<usize>,
    ordinal: u32,
    declared_catid: Option<u32>,
    title: Option<String>,
    child_ordinals: BTreeMap<String, u32>,
    next_ordinal: u32,
}

fn assemble_rdf(topics: Vec<TopicRecord>, mut skipped: usize) -> Result<ParsedOntology, OntologyError> {
    if topics.is_empty() {
        return Err(OntologyError::NoCategories);
    }
    let root_seg = topics[0].path.split('/').next().unwrap_or("").to_string();
    for t in &topics {
        let seg = t.path.split('/').next().unwrap_or("");
        if seg != root_seg {
            return Err(OntologyError::MultipleRoots(root_seg, seg.to_string()));
        }
    }

    let mut nodes: Vec<PathNode> = Vec::new();
    let mut by_path: BTreeMap<String, usize> = BTreeMap::new();
    let mut links: Vec<(String, usize)> = Vec::new();

    fn ensure_node(
        path: &str,
        nodes: &mut Vec<PathNode>,
        by_path: &mut BTreeMap<String, usize>,
    ) -> usize {
        if let Some(&idx) = by_path.get(path) {
            return idx;
        }
        let (parent, ordinal) = match path.rfind('/') {
            None => (None, 1),
            Some(cut) => {
                let parent_idx = ensure_node(&path[..cut], nodes, by_path);
                let seg = &path[cut + 1..];
                let p = &mut nodes[parent_idx];
                let ordinal = match p.child_ordinals.get(seg) {
                    Some(&o) => o,
                    None => {
                        let o = p.next_ordinal;
                        p.next_ordinal += 1;
                        p.child_ordinals.insert(seg.to_string(), o);
                        o
                    }
                };
                (Some(parent_idx), ordinal)
            }
        };
        nodes.push(PathNode {
            path: path.to_string(),
            parent,
            ordinal,
            declared_catid: None,
            title: None,
            child_ordinals: BTreeMap::new(),
            next_ordinal: 1,
        });
        by_path.insert(path.to_string(), nodes.len() - 1);
        nodes.len() - 1
    }

    for t in topics.iter() {
        let depth = t.path.split('/').count();
        if depth > MAX_DEPTH || t.path.split('/').any(|s| s.is_empty()) {
            skipped += 1;
            continue;
        }
        let idx = ensure_node(&t.path, &mut nodes, &mut by_path);
        match nodes[idx].declared_catid {
            None => nodes[idx].declared_catid = Some(t.catid),
            Some(existing) if existing == t.catid => {}
            Some(_) => {
                skipped += 1;
                continue;
            }
        }
        if let Some(title) = &t.title {
            nodes[idx].title.get_or_insert_with(|| title.clone());
        }
        // Narrow references reserve child ordinals in listing order; the
        // children themselves only become index nodes when declared.
        for narrow in &t.narrows {
            if let Some(seg) = narrow.strip_prefix(&format!("{}/", t.path)) {
                if !seg.is_empty() && !seg.contains('/') {
                    let n = &mut nodes[idx];
                    if !n.child_ordinals.contains_key(seg) {
                        let o = n.next_ordinal;
                        n.next_ordinal += 1;
                        n.child_ordinals.insert(seg.to_string(), o);
                    }
                }
            }
        }
        for link in &t.links {
            links.push((link.clone(), idx));
        }
    }

    let max_declared = nodes.iter().filter_map(|n| n.declared_catid).max().unwrap_or(0);
    let mut next_synth = max_declared.saturating_add(1);

    let mut addresses: Vec<Option<TreeAddress>> = vec![None; nodes.len()];
    fn address_of(
        idx: usize,
        nodes: &[PathNode],
        addresses: &mut Vec<Option<TreeAddress>>,
    ) -> TreeAddress {
        if let Some(a) = &addresses[idx] {
            return a.clone();
        }
        let addr = match nodes[idx].parent {
            None => TreeAddress::new(vec![1]).unwrap(),
            Some(p) => {
                let parent_addr = address_of(p, nodes, addresses);
                parent_addr.child(nodes[idx].ordinal).unwrap()
            }
        };
        addresses[idx] = Some(addr.clone());
        addr
    }

    let mut b = Builder {
        topic_records: topics.len(),
        skipped,
        ..Builder::default()
    };
    let mut catid_of: Vec<CategoryId> = Vec::with_capacity(nodes.len());
    for idx in 0..nodes.len() {
        let catid = match nodes[idx].declared_catid {
            Some(c) => CategoryId(c),
            None => {
                let c = CategoryId(next_synth);
                next_synth += 1;
                c
            }
        };
        catid_of.push(catid);
        let address = address_of(idx, &nodes, &mut addresses);
        let title = nodes[idx].title.clone().unwrap_or_else(|| {
            let seg = nodes[idx].path.rsplit('/').next().unwrap_or("");
            seg.replace('_', " ")
        });
        b.categories.push((catid, address, title));
    }
    for (url, idx) in links {
        match normalize_url(&url) {
            Ok(u) => b.urls.push((u, catid_of[idx])),
            Err(_) => b.skipped += 1,
        }
    }
    b.build()
}

/// Extracts `name="value"` (or single-quoted) from a tag line.
fn tag_attr(line: &str, name: &str) -> Option<String> {
    let pat = format!("{name}=");
    let start = line.find(&pat)? + pat.len();
    let rest = &line[start..];
    let quote = rest.chars().next()?;
    if quote != '"' && quote != '\'' {
        return None;
    }
    let inner = &rest[1..];
    let end = inner.find(quote)?;
    Some(inner[..end].to_string())
}

/// Extracts the text content of a single-line `<name>text</name>` element.
fn element_text(line: &str, name: &str) -> Option<String> {
    let open_end = line.find('>')?;
    let close = format!("</{name}>");
    let end = line.find(&close)?;
    if end <= open_end {
        return None;
    }
    Some(line[open_end + 1..end].to_string())
}
