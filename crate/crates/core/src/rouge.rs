//! Canonical tokenizer and ROUGE-1/2/L scores.
//!
//! Every token count in the toolkit (corpus statistics, ROUGE, the greedy
//! oracle) goes through [`Tokenizer`] so numbers are comparable across
//! commands.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

const DIGIT_WORDS: [(&str, &str); 21] = [
    ("zero", "0"),
    ("one", "1"),
    ("two", "2"),
    ("three", "3"),
    ("four", "4"),
    ("five", "5"),
    ("six", "6"),
    ("seven", "7"),
    ("eight", "8"),
    ("nine", "9"),
    ("ten", "10"),
    ("eleven", "11"),
    ("twelve", "12"),
    ("thirteen", "13"),
    ("fourteen", "14"),
    ("fifteen", "15"),
    ("sixteen", "16"),
    ("seventeen", "17"),
    ("eighteen", "18"),
    ("nineteen", "19"),
    ("twenty", "20"),
];

/// Fold a whole word spelled as a digit word into its digit form.
pub(crate) fn fold_digit_word(word: &str) -> Option<&'static str> {
    DIGIT_WORDS
        .iter()
        .find(|(w, _)| *w == word)
        .map(|(_, d)| *d)
}

/// Inverse of [`fold_digit_word`] for zero through twenty.
pub(crate) fn word_for_digits(digits: &str) -> Option<&'static str> {
    DIGIT_WORDS
        .iter()
        .find(|(_, d)| *d == digits)
        .map(|(w, _)| *w)
}

/// Deterministic whitespace tokenizer with per-token punctuation trimming.
///
/// Interior hyphens and colons survive ("4-star", "17:30"); leading and
/// trailing punctuation is stripped. Digit-word folding ("four" -> "4") is
/// off by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub fold_digit_words: bool,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            lowercase: true,
            strip_punctuation: true,
            fold_digit_words: false,
        }
    }
}

/// A token plus its char span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub text: String,
    /// Inclusive char index of the first kept char.
    pub start: usize,
    /// Exclusive char index past the last kept char.
    pub end: usize,
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokenize_spans(text)
            .into_iter()
            .map(|t| t.text)
            .collect()
    }

    /// Tokenize while tracking char offsets into `text`.
    pub fn tokenize_spans(&self, text: &str) -> Vec<SpannedToken> {
        let chars: Vec<char> = text.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() {
                j += 1;
            }
            let (mut s, mut e) = (i, j);
            if self.strip_punctuation {
                while s < e && !chars[s].is_alphanumeric() {
                    s += 1;
                }
                while e > s && !chars[e - 1].is_alphanumeric() {
                    e -= 1;
                }
            }
            if s < e {
                let mut token: String = chars[s..e].iter().collect();
                if self.lowercase {
                    token = token.to_lowercase();
                }
                if self.fold_digit_words {
                    if let Some(digits) = fold_digit_word(&token) {
                        token = digits.to_string();
                    }
                }
                tokens.push(SpannedToken {
                    text: token,
                    start: s,
                    end: e,
                });
            }
            i = j;
        }
        tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    R1,
    R2,
    RL,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub variant: RougeVariant,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// Empty-side conventions shared with the factual metric: both sides empty
/// scores 1.0, exactly one side empty scores 0.0.
fn prf(matches: usize, hyp_total: usize, ref_total: usize) -> (f64, f64, f64) {
    if hyp_total == 0 && ref_total == 0 {
        return (1.0, 1.0, 1.0);
    }
    if hyp_total == 0 || ref_total == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = matches as f64 / hyp_total as f64;
    let r = matches as f64 / ref_total as f64;
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// ROUGE-N with clipped (multiset-intersection) n-gram counts.
///
/// Token-level emptiness is checked before the n-gram counts, so an empty
/// hypothesis never scores against a non-empty reference even when the
/// reference is too short to hold an n-gram.
pub fn rouge_n(hyp: &[String], reference: &[String], n: usize) -> RougeScore {
    assert!(n == 1 || n == 2, "rouge_n supports n = 1 or 2");
    let variant = if n == 1 { RougeVariant::R1 } else { RougeVariant::R2 };
    if hyp.is_empty() || reference.is_empty() {
        let (precision, recall, f) = prf(0, hyp.len(), reference.len());
        return RougeScore {
            variant,
            precision,
            recall,
            f,
        };
    }
    let hyp_total = hyp.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);

    let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
    if reference.len() >= n {
        for gram in reference.windows(n) {
            *ref_counts.entry(gram).or_default() += 1;
        }
    }
    let mut matches = 0usize;
    if hyp.len() >= n {
        for gram in hyp.windows(n) {
            if let Some(count) = ref_counts.get_mut(gram) {
                if *count > 0 {
                    *count -= 1;
                    matches += 1;
                }
            }
        }
    }

    let (precision, recall, f) = prf(matches, hyp_total, ref_total);
    RougeScore {
        variant,
        precision,
        recall,
        f,
    }
}

/// ROUGE-L over the longest common subsequence, O(min(|hyp|, |ref|)) memory.
pub fn rouge_l(hyp: &[String], reference: &[String]) -> RougeScore {
    let lcs = lcs_length(hyp, reference);
    let (precision, recall, f) = prf(lcs, hyp.len(), reference.len());
    RougeScore {
        variant: RougeVariant::RL,
        precision,
        recall,
        f,
    }
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; short.len() + 1];
    let mut curr = vec![0usize; short.len() + 1];
    for item in long {
        for (j, other) in short.iter().enumerate() {
            curr[j + 1] = if item == other {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_lowercases_and_strips_punctuation() {
        let t = Tokenizer::default();
        assert_eq!(
            t.tokenize("The user books a Hotel."),
            toks(&["the", "user", "books", "a", "hotel"])
        );
    }

    #[test]
    fn tokenize_preserves_interior_hyphens_and_colons() {
        let t = Tokenizer::default();
        assert_eq!(t.tokenize("4-star"), toks(&["4-star"]));
        assert_eq!(t.tokenize("at 17:30,"), toks(&["at", "17:30"]));
    }

    #[test]
    fn tokenize_empty() {
        let t = Tokenizer::default();
        assert!(t.tokenize("").is_empty());
        assert!(t.tokenize("  ...  ").is_empty());
    }

    #[test]
    fn tokenize_spans_index_original_chars() {
        let t = Tokenizer::default();
        let spans = t.tokenize_spans("A cheap, 4-star hotel.");
        let text: Vec<char> = "A cheap, 4-star hotel.".chars().collect();
        for s in &spans {
            let surface: String = text[s.start..s.end].iter().collect();
            assert_eq!(surface.to_lowercase(), s.text);
        }
        assert_eq!(spans[1].text, "cheap");
        assert_eq!((spans[1].start, spans[1].end), (2, 7));
    }

    #[test]
    fn digit_word_folding_is_opt_in() {
        let with = Tokenizer {
            fold_digit_words: true,
            ..Tokenizer::default()
        };
        assert_eq!(with.tokenize("four stars"), toks(&["4", "stars"]));
        assert_eq!(
            Tokenizer::default().tokenize("four stars"),
            toks(&["four", "stars"])
        );
    }

    #[test]
    fn rouge_n_identity() {
        let t = toks(&["the", "cat", "sat"]);
        for n in [1, 2] {
            let s = rouge_n(&t, &t, n);
            assert_eq!((s.precision, s.recall, s.f), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn rouge_2_single_shared_bigram() {
        // bigrams {the cat, cat sat} vs {the cat, cat ran}: one match of two.
        let hyp = toks(&["the", "cat", "sat"]);
        let reference = toks(&["the", "cat", "ran"]);
        let s = rouge_n(&hyp, &reference, 2);
        assert_eq!((s.precision, s.recall, s.f), (0.5, 0.5, 0.5));
    }

    #[test]
    fn rouge_n_disjoint_is_zero() {
        let s = rouge_n(&toks(&["a", "b"]), &toks(&["c", "d"]), 1);
        assert_eq!((s.precision, s.recall, s.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge_n_clips_repeated_grams() {
        // "a" twice in hyp, once in ref: only one unigram credit.
        let s = rouge_n(&toks(&["a", "a"]), &toks(&["a", "b"]), 1);
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 0.5);
    }

    #[test]
    fn rouge_l_lcs_two_of_three() {
        let hyp = toks(&["the", "cat", "sat"]);
        let reference = toks(&["the", "cat", "ran"]);
        let s = rouge_l(&hyp, &reference);
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_side_conventions() {
        let empty: Vec<String> = Vec::new();
        let some = toks(&["a"]);
        assert_eq!(rouge_l(&empty, &empty).f, 1.0);
        assert_eq!(rouge_l(&empty, &some).f, 0.0);
        assert_eq!(rouge_l(&some, &empty).f, 0.0);
        assert_eq!(rouge_n(&empty, &empty, 1).f, 1.0);
        assert_eq!(rouge_n(&empty, &some, 2).f, 0.0);
    }

    #[test]
    fn lcs_handles_interleaving() {
        let a = toks(&["a", "b", "c", "d", "e"]);
        let b = toks(&["x", "a", "c", "e", "y"]);
        assert_eq!(lcs_length(&a, &b), 3);
    }
}
