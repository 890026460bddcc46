//! Ranking of stored category labels against a free-text term.
//!
//! Substring and stem hits always outrank fuzzy hits: they score in
//! `(0.5, 1]`, fuzzy matches in `(0, 0.5]`, and the fuzzy tier is only
//! consulted when the first tier finds nothing.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::normalize_term;

pub const MIN_TOKEN_CHARS: usize = 4;
pub const MIN_SIMILARITY: f64 = 0.6;
const MIN_STEM_CHARS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMatch {
    pub label: String,
    pub score: f64,
}

/// Alphanumeric runs of at least [`MIN_TOKEN_CHARS`] characters, lowercased.
pub fn term_tokens(term: &str) -> Vec<String> {
    normalize_term(term)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= MIN_TOKEN_CHARS)
        .map(String::from)
        .collect()
}

fn common_prefix(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

/// Length of the best substring or stem hit of `tokens` in `label`, if any.
fn substring_hit(tokens: &[String], label: &str) -> Option<usize> {
    let words: Vec<&str> = label.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    let mut best = None;
    for token in tokens {
        let tlen = token.chars().count();
        if label.contains(token.as_str()) {
            best = best.max(Some(tlen));
            continue;
        }
        for word in &words {
            let shared = common_prefix(token, word);
            let shorter = tlen.min(word.chars().count());
            // shared / shorter >= 0.6
            if shared >= MIN_STEM_CHARS && shared * 5 >= shorter * 3 {
                best = best.max(Some(shared));
            }
        }
    }
    best
}

/// Levenshtein distance over chars.
fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max_len` on normalized text; 1.0 for two empty strings.
pub fn normalized_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = normalize_term(a).chars().collect();
    let b: Vec<char> = normalize_term(b).chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(&a, &b) as f64 / longest as f64
}

fn fuzzy_hit(term: &str, tokens: &[String], label: &str) -> Option<f64> {
    let label_chars: Vec<char> = label.chars().collect();
    let mut candidates: Vec<&str> = alloc::vec![term];
    candidates.extend(tokens.iter().map(String::as_str));
    let mut best: Option<f64> = None;
    for cand in candidates {
        let c: Vec<char> = cand.chars().collect();
        let longest = c.len().max(label_chars.len());
        if longest == 0 {
            continue;
        }
        let dist = edit_distance(&c, &label_chars);
        // (longest - dist) / longest >= 0.6, kept in integers
        if (longest - dist) * 5 >= longest * 3 {
            let sim = (longest - dist) as f64 / longest as f64;
            best = Some(best.map_or(sim, |b| b.max(sim)));
        }
    }
    best
}

/// Rank `labels` against `term`. The result is a subset of `labels`
/// (deduplicated), sorted by score descending and then label ascending.
pub fn rank_labels<'a, I>(term: &str, labels: I) -> Vec<LabelMatch>
where
    I: IntoIterator<Item = &'a str>,
{
    let term_norm = normalize_term(term);
    let tokens = term_tokens(term);
    let mut uniq: Vec<&str> = labels.into_iter().collect();
    uniq.sort_unstable();
    uniq.dedup();

    let mut out: Vec<LabelMatch> = Vec::new();
    if !tokens.is_empty() {
        for label in &uniq {
            let lower = normalize_term(label);
            if let Some(hit) = substring_hit(&tokens, &lower) {
                let compact = lower.chars().filter(|c| !c.is_whitespace()).count().max(1);
                let ratio = (hit as f64 / compact as f64).min(1.0);
                out.push(LabelMatch {
                    label: String::from(*label),
                    score: 0.5 + 0.5 * ratio,
                });
            }
        }
    }
    if out.is_empty() && !term_norm.is_empty() {
        for label in &uniq {
            if let Some(sim) = fuzzy_hit(&term_norm, &tokens, &normalize_term(label)) {
                if sim > 0.0 {
                    out.push(LabelMatch {
                        label: String::from(*label),
                        score: 0.5 * sim,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.label.cmp(&b.label)));
    out
}
