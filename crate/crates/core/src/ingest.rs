//! Bookmark extraction from browser export files.
//!
//! Three source formats are understood: Opera's `.adr` hotlist, plain text
//! (one URL per line, optionally followed by a tab and a name), and the
//! Netscape bookmark HTML emitted by most browsers. Parsing keeps URLs
//! verbatim; [`clean`] is the step that normalizes, deduplicates and applies
//! a stop list, producing the list a profile is built from.

use std::collections::BTreeSet;

use crate::ontology::normalize_url;

/// A bookmark as it appeared in the export, URL untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawBookmark {
    pub name: Option<String>,
    pub url: String,
    /// Creation time as a unix timestamp, when the format carries one.
    pub created: Option<i64>,
    /// Last-visited time as a unix timestamp, when present.
    pub visited: Option<i64>,
}

impl RawBookmark {
    pub fn from_url(url: impl Into<String>) -> Self {
        RawBookmark {
            name: None,
            url: url.into(),
            created: None,
            visited: None,
        }
    }
}

/// Parser output: the bookmarks found plus a count of records that looked
/// like bookmarks but could not be used (e.g. an entry with no URL).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedBookmarks {
    pub bookmarks: Vec<RawBookmark>,
    pub discarded: usize,
}

/// Set of normalized URLs to drop during cleaning, typically the links a
/// browser ships preinstalled (which would make all users look alike).
#[derive(Debug, Clone, Default)]
pub struct StopList(BTreeSet<String>);

impl StopList {
    /// Reads one URL per line; blank lines and `#` comments are skipped.
    /// Entries that fail normalization are ignored.
    pub fn parse(text: &str) -> StopList {
        let mut set = BTreeSet::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Ok(u) = normalize_url(line) {
                set.insert(u);
            }
        }
        StopList(set)
    }

    pub fn contains(&self, normalized_url: &str) -> bool {
        self.0.contains(normalized_url)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Result of [`clean`]: normalized unique URLs in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CleanBookmarkList {
    pub urls: Vec<String>,
    pub duplicates_removed: usize,
    /// Unparsable URLs plus stop-list hits.
    pub discarded: usize,
}

impl CleanBookmarkList {
    pub fn from_urls(urls: Vec<String>) -> CleanBookmarkList {
        CleanBookmarkList {
            urls,
            duplicates_removed: 0,
            discarded: 0,
        }
    }
}

/// Parses an Opera hotlist (`.adr`). Records start at a `#URL` line and run
/// until the next `#`-prefixed record header. Folder records and the `-`
/// end-of-folder markers only carry structure and are dropped silently; a
/// `#URL` record without a `URL=` line counts as discarded.
pub fn parse_opera_adr(source: &str) -> ParsedBookmarks {
    let mut out = ParsedBookmarks::default();
    let mut current: Option<RawBookmark> = None;
    let flush = |cur: &mut Option<RawBookmark>, out: &mut ParsedBookmarks| {
        if let Some(bm) = cur.take() {
            if bm.url.is_empty() {
                out.discarded += 1;
            } else {
                out.bookmarks.push(bm);
            }
        }
    };
    for line in source.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            flush(&mut current, &mut out);
            if trimmed == "#URL" {
                current = Some(RawBookmark::from_url(""));
            }
            continue;
        }
        let Some(bm) = current.as_mut() else { continue };
        let Some((key, value)) = trimmed.split_once('=') else { continue };
        match key {
            "NAME" => bm.name = Some(value.to_string()),
            "URL" => bm.url = value.to_string(),
            "CREATED" => bm.created = value.parse().ok(),
            "VISITED" => bm.visited = value.parse().ok(),
            _ => {}
        }
    }
    flush(&mut current, &mut out);
    out
}

/// Parses plain text bookmarks: one URL per line, with an optional name
/// after a tab. Blank lines and `#` comments are skipped.
pub fn parse_plaintext(source: &str) -> ParsedBookmarks {
    let mut out = ParsedBookmarks::default();
    for line in source.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (url, name) = match line.split_once('\t') {
            Some((u, n)) => (u.trim(), Some(n.trim().to_string())),
            None => (line, None),
        };
        if url.is_empty() {
            out.discarded += 1;
            continue;
        }
        out.bookmarks.push(RawBookmark {
            name: name.filter(|n| !n.is_empty()),
            url: url.to_string(),
            created: None,
            visited: None,
        });
    }
    out
}

/// Parses Netscape bookmark HTML by scanning for `<A ...>text</A>` anchors.
/// Folder structure (`<H3>`, `<DL>` nesting) is ignored; an anchor without
/// an HREF counts as discarded.
pub fn parse_netscape_html(source: &str) -> ParsedBookmarks {
    let mut out = ParsedBookmarks::default();
    // ASCII-only lowercasing keeps byte offsets aligned with `source`.
    let lower: String = source.chars().map(|c| c.to_ascii_lowercase()).collect();
    let mut pos = 0;
    while let Some(rel) = lower[pos..].find("<a") {
        let start = pos + rel;
        let after = &lower[start + 2..];
        if !after.starts_with([' ', '\t', '\n', '\r', '>']) {
            pos = start + 2;
            continue;
        }
        let Some(tag_end_rel) = lower[start..].find('>') else { break };
        let tag_end = start + tag_end_rel;
        let tag = &source[start..tag_end];
        let inner_start = tag_end + 1;
        let Some(close_rel) = lower[inner_start..].find("</a") else { break };
        let inner = &source[inner_start..inner_start + close_rel];
        pos = inner_start + close_rel + 3;

        match html_attr(tag, &lower[start..tag_end], "href") {
            Some(href) if !href.trim().is_empty() => {
                let name = decode_entities(inner.trim());
                out.bookmarks.push(RawBookmark {
                    name: (!name.is_empty()).then_some(name),
                    url: decode_entities(href.trim()),
                    created: html_attr(tag, &lower[start..tag_end], "add_date")
                        .and_then(|v| v.parse().ok()),
                    visited: html_attr(tag, &lower[start..tag_end], "last_visit")
                        .and_then(|v| v.parse().ok()),
                });
            }
            _ => out.discarded += 1,
        }
    }
    out
}

/// Pulls a quoted attribute value out of a tag. `tag` and `tag_lower` are
/// the same slice in original and lowercased form; matching runs on the
/// lowercased text, extraction on the original so URL case is preserved.
fn html_attr(tag: &str, tag_lower: &str, name: &str) -> Option<String> {
    let pat = format!("{name}=");
    let mut search = 0;
    while let Some(rel) = tag_lower[search..].find(&pat) {
        let at = search + rel;
        // require a word boundary before the attribute name
        let boundary = at == 0
            || !tag_lower.as_bytes()[at - 1].is_ascii_alphanumeric()
                && tag_lower.as_bytes()[at - 1] != b'_';
        let val_start = at + pat.len();
        if !boundary {
            search = val_start;
            continue;
        }
        let rest = tag.get(val_start..)?;
        let mut chars = rest.chars();
        return match chars.next() {
            Some(q @ ('"' | '\'')) => {
                let inner = &rest[1..];
                inner.find(q).map(|end| inner[..end].to_string())
            }
            Some(_) => {
                let end = rest.find([' ', '\t', '\n', '\r']).unwrap_or(rest.len());
                Some(rest[..end].to_string())
            }
            None => None,
        };
    }
    None
}

fn decode_entities(s: &str) -> String {
    s.replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
}

/// Normalizes, deduplicates and (optionally) stop-list-filters raw
/// bookmarks. Order of first appearance is preserved.
pub fn clean(bookmarks: &[RawBookmark], stop: &StopList) -> CleanBookmarkList {
    let mut out = CleanBookmarkList::default();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for bm in bookmarks {
        match normalize_url(&bm.url) {
            Err(_) => out.discarded += 1,
            Ok(u) if stop.contains(&u) => out.discarded += 1,
            Ok(u) => {
                if seen.insert(u.clone()) {
                    out.urls.push(u);
                } else {
                    out.duplicates_removed += 1;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const OPERA_SAMPLE: &str = "\
Opera Hotlist version 2.0

#FOLDER
\tNAME=Trade
\tCREATED=1017158731

#URL
\tNAME=Open Directory Project
\tURL=http://dmoz.org/
\tCREATED=1017158736
\tVISITED=1023875733

#URL
\tNAME=DMOZ rdf dumps
\tURL=http://dmoz.org/rdf.html
\tCREATED=1017158736
\tVISITED=1023875733

-
";

    #[test]
    fn opera_records() {
        let parsed = parse_opera_adr(OPERA_SAMPLE);
        assert_eq!(parsed.bookmarks.len(), 2);
        assert_eq!(parsed.discarded, 0);
        let first = &parsed.bookmarks[0];
        assert_eq!(first.url, "http://dmoz.org/");
        assert_eq!(first.name.as_deref(), Some("Open Directory Project"));
        assert_eq!(first.created, Some(1017158736));
        assert_eq!(first.visited, Some(1023875733));
        assert_eq!(parsed.bookmarks[1].url, "http://dmoz.org/rdf.html");
    }

    #[test]
    fn opera_record_without_url_is_discarded() {
        let parsed = parse_opera_adr("#URL\n\tNAME=No link here\n\n#URL\n\tURL=http://a.test/\n");
        assert_eq!(parsed.bookmarks.len(), 1);
        assert_eq!(parsed.discarded, 1);
    }

    #[test]
    fn plaintext_lines() {
        let parsed = parse_plaintext("http://a.test/\n# comment\nwww.b.test/x\tSite B\n\n");
        assert_eq!(parsed.bookmarks.len(), 2);
        assert_eq!(parsed.bookmarks[1].url, "www.b.test/x");
        assert_eq!(parsed.bookmarks[1].name.as_deref(), Some("Site B"));
    }

    #[test]
    fn netscape_anchors() {
        let html = r#"<!DOCTYPE NETSCAPE-Bookmark-file-1>
<TITLE>Bookmarks</TITLE>
<DL><p>
  <DT><H3 ADD_DATE="1017158731">News</H3>
  <DL><p>
    <DT><A HREF="http://www.bbc.co.uk/" ADD_DATE="1017158736" LAST_VISIT="1023875733">BBC &amp; friends</A>
    <DT><A HREF="http://www.Guardian.co.uk/Sport">Guardian sport</A>
    <DT><A>broken anchor</A>
  </DL><p>
</DL>"#;
        let parsed = parse_netscape_html(html);
        assert_eq!(parsed.bookmarks.len(), 2);
        assert_eq!(parsed.discarded, 1);
        assert_eq!(parsed.bookmarks[0].url, "http://www.bbc.co.uk/");
        assert_eq!(parsed.bookmarks[0].name.as_deref(), Some("BBC & friends"));
        assert_eq!(parsed.bookmarks[0].created, Some(1017158736));
        assert_eq!(parsed.bookmarks[0].visited, Some(1023875733));
        // path case survives extraction
        assert_eq!(parsed.bookmarks[1].url, "http://www.Guardian.co.uk/Sport");
    }

    #[test]
    fn clean_normalizes_dedups_and_counts() {
        let bms = vec![
            RawBookmark::from_url("HTTP://DMOZ.ORG"),
            RawBookmark::from_url("http://dmoz.org/"),
            RawBookmark::from_url("dmoz.org"),
            RawBookmark::from_url("http://other.test/Page"),
            RawBookmark::from_url("ht!tp::"),
        ];
        let out = clean(&bms, &StopList::default());
        assert_eq!(out.urls, vec!["http://dmoz.org/", "http://other.test/Page"]);
        assert_eq!(out.duplicates_removed, 2);
        assert_eq!(out.discarded, 1);
        assert_eq!(
            out.urls.len() + out.duplicates_removed + out.discarded,
            bms.len()
        );
    }

    #[test]
    fn clean_applies_stop_list() {
        let stop = StopList::parse("# preinstalled\nhttp://vendor.test/start\n");
        assert_eq!(stop.len(), 1);
        let bms = vec![
            RawBookmark::from_url("vendor.test/start"),
            RawBookmark::from_url("http://keep.test/"),
        ];
        let out = clean(&bms, &stop);
        assert_eq!(out.urls, vec!["http://keep.test/"]);
        assert_eq!(out.discarded, 1);
    }

    #[test]
    fn clean_is_idempotent() {
        let bms = vec![
            RawBookmark::from_url("WWW.A.TEST/One"),
            RawBookmark::from_url("b.test"),
        ];
        let once = clean(&bms, &StopList::default());
        let again_input: Vec<RawBookmark> =
            once.urls.iter().map(RawBookmark::from_url).collect();
        let twice = clean(&again_input, &StopList::default());
        assert_eq!(once.urls, twice.urls);
        assert_eq!(twice.duplicates_removed, 0);
        assert_eq!(twice.discarded, 0);
    }
}
