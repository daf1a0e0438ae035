//! Corpus-level translation metrics on gloss sequences, all scaled to
//! `[0, 100]`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::corpus::{GlossSequence, ParallelCorpus};
use crate::error::{Error, Result};

pub const DEFAULT_ROUGE_BETA: f64 = 1.2;
pub const CHRF_ORDER: usize = 6;
pub const CHRF_BETA: f64 = 2.0;

fn check(hyps: &[GlossSequence], refs: &[GlossSequence]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(())
}

fn ngram_counts<T: Eq + Hash>(items: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if n > 0 {
        for w in items.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// (clipped matches, hypothesis n-grams, reference n-grams) for one order.
fn overlap<T: Eq + Hash>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (matches, hyp.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

/// Corpus BLEU with orders `1..=n`, uniform weights, clipped counts and the
/// brevity penalty. Any zero precision gives 0.
pub fn bleu_n(hyps: &[GlossSequence], refs: &[GlossSequence], n: usize) -> Result<f64> {
    check(hyps, refs)?;
    if n == 0 {
        return Err(Error::Config("BLEU order must be at least 1".into()));
    }
    let mut log_precision = 0.0;
    for order in 1..=n {
        let (mut matches, mut total) = (0, 0);
        for (h, r) in hyps.iter().zip(refs) {
            let (m, t, _) = overlap(h.tokens(), r.tokens(), order);
            matches += m;
            total += t;
        }
        if matches == 0 {
            return Ok(0.0);
        }
        log_precision += (matches as f64 / total as f64).ln() / n as f64;
    }
    let c: usize = hyps.iter().map(GlossSequence::len).sum();
    let r: usize = refs.iter().map(GlossSequence::len).sum();
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    Ok(100.0 * bp * log_precision.exp())
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// Sentence ROUGE-L F-score in `[0, 1]`: `(1+β²)PR / (R + β²P)` over the
/// longest common subsequence. Two empty sequences score 1.
pub fn rouge_l_sentence(hyp: &[String], reference: &[String], beta: f64) -> f64 {
    if hyp.is_empty() && reference.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Corpus mean of sentence ROUGE-L F-scores.
pub fn rouge(hyps: &[GlossSequence], refs: &[GlossSequence], beta: f64) -> Result<f64> {
    check(hyps, refs)?;
    let total: f64 = hyps
        .iter()
        .zip(refs)
        .map(|(h, r)| rouge_l_sentence(h.tokens(), r.tokens(), beta))
        .sum();
    Ok(100.0 * total / hyps.len() as f64)
}

fn chars(g: &GlossSequence) -> Vec<char> {
    g.tokens().iter().flat_map(|t| t.chars()).filter(|c| !c.is_whitespace()).collect()
}

/// Corpus chrF: character n-gram statistics (orders 1–6, whitespace
/// removed) are summed over the corpus; per-order precision and recall are
/// averaged over the orders that occur on either side and combined with
/// β = 2.
pub fn chrf(hyps: &[GlossSequence], refs: &[GlossSequence]) -> Result<f64> {
    check(hyps, refs)?;
    let mut stats = [(0usize, 0usize, 0usize); CHRF_ORDER];
    for (h, r) in hyps.iter().zip(refs) {
        let (hc, rc) = (chars(h), chars(r));
        for (n, s) in stats.iter_mut().enumerate() {
            let (m, th, tr) = overlap(&hc, &rc, n + 1);
            s.0 += m;
            s.1 += th;
            s.2 += tr;
        }
    }
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0);
    for &(m, th, tr) in &stats {
        if th == 0 && tr == 0 {
            continue;
        }
        orders += 1;
        if th > 0 {
            p_sum += m as f64 / th as f64;
        }
        if tr > 0 {
            r_sum += m as f64 / tr as f64;
        }
    }
    if orders == 0 {
        // Both sides are empty throughout.
        return Ok(100.0);
    }
    let (p, r) = (p_sum / orders as f64, r_sum / orders as f64);
    if p == 0.0 && r == 0.0 {
        return Ok(0.0);
    }
    let b2 = CHRF_BETA * CHRF_BETA;
    Ok(100.0 * (1.0 + b2) * p * r / (b2 * p + r))
}

/// Gloss frequencies over the gloss side of a training corpus.
pub fn gloss_counts(train: &ParallelCorpus) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for g in train.glosses() {
        for t in g.tokens() {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowFreqResult {
    pub threshold: usize,
    /// Samples whose reference has at least one gloss seen at most
    /// `threshold` times in training.
    pub amount: usize,
    /// Percentage of those samples whose hypothesis contains every such
    /// gloss; absent when `amount` is zero.
    pub accuracy: Option<f64>,
}

pub fn low_freq_accuracy(
    hyps: &[GlossSequence],
    refs: &[GlossSequence],
    train_counts: &HashMap<String, usize>,
    thresholds: &[usize],
) -> Result<Vec<LowFreqResult>> {
    check(hyps, refs)?;
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            let (mut amount, mut covered) = (0, 0);
            for (h, r) in hyps.iter().zip(refs) {
                let rare: HashSet<&String> = r
                    .tokens()
                    .iter()
                    .filter(|g| train_counts.get(*g).copied().unwrap_or(0) <= threshold)
                    .collect();
                if rare.is_empty() {
                    continue;
                }
                amount += 1;
                let produced: HashSet<&String> = h.tokens().iter().collect();
                if rare.iter().all(|g| produced.contains(g)) {
                    covered += 1;
                }
            }
            let accuracy = (amount > 0).then(|| 100.0 * covered as f64 / amount as f64);
            LowFreqResult { threshold, amount, accuracy }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rouge: f64,
    pub bleu: BTreeMap<usize, f64>,
    pub chrf: f64,
    pub low_freq: Vec<LowFreqResult>,
}

impl EvalReport {
    pub fn bleu4(&self) -> f64 {
        self.bleu.get(&4).copied().unwrap_or(0.0)
    }
}

pub fn evaluate(
    hyps: &[GlossSequence],
    refs: &[GlossSequence],
    train_counts: &HashMap<String, usize>,
    thresholds: &[usize],
) -> Result<EvalReport> {
    let mut bleu = BTreeMap::new();
    for n in 1..=4 {
        bleu.insert(n, bleu_n(hyps, refs, n)?);
    }
    Ok(EvalReport {
        rouge: rouge(hyps, refs, DEFAULT_ROUGE_BETA)?,
        bleu,
        chrf: chrf(hyps, refs)?,
        low_freq: low_freq_accuracy(hyps, refs, train_counts, thresholds)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::toks;

    fn g(line: &str) -> GlossSequence {
        GlossSequence::new(toks(line))
    }

    fn gs(lines: &[&str]) -> Vec<GlossSequence> {
        lines.iter().map(|l| g(l)).collect()
    }

    #[test]
    fn bleu_examples() {
        let refs = gs(&["a b c d", "x y z w v"]);
        for n in 1..=4 {
            assert_eq!(bleu_n(&refs, &refs, n).unwrap(), 100.0);
        }
        let b = bleu_n(&gs(&["a b c"]), &gs(&["a b c d"]), 1).unwrap();
        assert!((b - 100.0 * (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-9);
        assert!((b - 71.65).abs() < 0.01);
        assert_eq!(bleu_n(&gs(&["a b"]), &gs(&["c d"]), 1).unwrap(), 0.0);
        assert_eq!(bleu_n(&gs(&[""]), &gs(&["c d"]), 1).unwrap(), 0.0);
    }

    #[test]
    fn bleu_rejects_bad_input() {
        assert!(matches!(bleu_n(&[], &[], 4), Err(Error::EmptyCorpus)));
        assert!(bleu_n(&gs(&["a"]), &gs(&["a", "b"]), 1).is_err());
    }

    #[test]
    fn rouge_examples() {
        let r = rouge(&gs(&["a b c"]), &gs(&["a c"]), DEFAULT_ROUGE_BETA).unwrap();
        let (p, rc, b2) = (2.0 / 3.0, 1.0, 1.44);
        assert!((r - 100.0 * (1.0 + b2) * p * rc / (rc + b2 * p)).abs() < 1e-9);
        assert!((r - 82.99).abs() < 0.01);
        assert_eq!(rouge(&gs(&["a b"]), &gs(&["a b"]), 1.2).unwrap(), 100.0);
        assert_eq!(rouge(&gs(&["a b"]), &gs(&["c"]), 1.2).unwrap(), 0.0);
    }

    #[test]
    fn chrf_examples() {
        let refs = gs(&["HAUS REGEN", "NORD"]);
        assert!((chrf(&refs, &refs).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(chrf(&gs(&["abc"]), &gs(&["xyz"])).unwrap(), 0.0);
        let partial = chrf(&gs(&["ab"]), &gs(&["abc"])).unwrap();
        assert!(partial > 0.0 && partial < 100.0);
    }

    #[test]
    fn low_freq_formula() {
        let counts: HashMap<String, usize> =
            [("RARE", 1), ("OFTEN", 50), ("MID", 5)].iter().map(|&(k, v)| (k.to_string(), v)).collect();
        let refs = gs(&["RARE OFTEN", "RARE", "OFTEN RARE", "NEW", "OFTEN"]);
        let hyps = gs(&["RARE", "OFTEN", "OFTEN", "OLD", "OFTEN"]);
        let r = low_freq_accuracy(&hyps, &refs, &counts, &[3]).unwrap();
        assert_eq!(r[0].amount, 4);
        assert_eq!(r[0].accuracy, Some(25.0));
        let none = low_freq_accuracy(&gs(&["OFTEN"]), &gs(&["OFTEN"]), &counts, &[3]).unwrap();
        assert_eq!(none[0].accuracy, None);
        let nested = low_freq_accuracy(&gs(&["MID", "RARE"]), &gs(&["MID", "RARE"]), &counts, &[3, 15]).unwrap();
        assert_eq!((nested[0].amount, nested[1].amount), (1, 2));
    }

    #[test]
    fn report_serializes() {
        let refs = gs(&["A B C D"]);
        let report = evaluate(&refs, &refs, &HashMap::new(), &[3, 15]).unwrap();
        assert_eq!(report.bleu4(), 100.0);
        let json = serde_json::to_string(&report).unwrap();
        assert_eq!(serde_json::from_str::<EvalReport>(&json).unwrap(), report);
    }
}
