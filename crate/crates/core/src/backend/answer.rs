//! Extracting structured answers from free-form response text.
//!
//! Responses from remote models ramble; these parsers look only at what can
//! be read off unambiguously and return `None` otherwise. Callers treat
//! `None` conservatively (abstain, or keep everything), so the parsers never
//! guess: a reply that merely *mentions* numbers inside prose is not a
//! kept-item list, and a reply with no standalone True/False has no verdict.

use std::collections::BTreeSet;

/// Finds the last standalone True/False in the text, case-insensitively,
/// ignoring surrounding punctuation or markdown emphasis ("**True**",
/// `"False."`). Returns `None` when neither word appears on its own.
pub fn parse_verdict(text: &str) -> Option<bool> {
    for word in text.split_whitespace().rev() {
        let bare = word.trim_matches(|c: char| !c.is_ascii_alphanumeric());
        if bare.eq_ignore_ascii_case("true") {
            return Some(true);
        }
        if bare.eq_ignore_ascii_case("false") {
            return Some(false);
        }
    }
    None
}

/// Parses a kept-item reply for a 1-based list of `item_count` items into
/// zero-based indices.
///
/// Accepted shapes: integers separated by commas and/or spaces ("1, 3, 14"),
/// optionally bracketed, optionally after a label ("Useful: 1, 3"); or the
/// word "none" for the empty set. The full text is tried first, then each
/// line from the end, so a reasoning preamble followed by a final answer line
/// still parses. Any out-of-range index makes the reply unusable (`None`) —
/// a garbled list must not silently prune.
pub fn parse_kept_items(text: &str, item_count: usize) -> Option<BTreeSet<usize>> {
    if let Some(kept) = parse_item_list(text, item_count) {
        return Some(kept);
    }
    for line in text.lines().rev() {
        if let Some(kept) = parse_item_list(line, item_count) {
            return Some(kept);
        }
    }
    None
}

/// One candidate segment: either "none" or nothing but integers and
/// separators. A trailing label before a colon is skipped.
fn parse_item_list(segment: &str, item_count: usize) -> Option<BTreeSet<usize>> {
    let segment = segment.rsplit(':').next().unwrap_or(segment);
    let tokens: Vec<&str> = segment
        .split(|c: char| c == ',' || c.is_whitespace())
        .map(|t| t.trim_matches(|c: char| !c.is_ascii_alphanumeric()))
        .filter(|t| !t.is_empty())
        .collect();
    if tokens.is_empty() {
        return None;
    }
    if tokens.len() == 1 && tokens[0].eq_ignore_ascii_case("none") {
        return Some(BTreeSet::new());
    }
    let mut kept = BTreeSet::new();
    for token in tokens {
        let number: usize = token.parse().ok()?;
        if number < 1 || number > item_count {
            return None;
        }
        kept.insert(number - 1);
    }
    Some(kept)
}
