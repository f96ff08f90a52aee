use serde::Serialize;

use super::rouge::{rouge_l, rouge_n, tokenize, RougeScore};
use super::{ExplainError, Result};

/// Sentence indices picked by an extractive method, with the ROUGE-2 F1
/// reached after each inclusion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSelection {
    /// Selected sentence indices in document order.
    pub indices: Vec<usize>,
    /// (chosen index, ROUGE-2 F1 of the selection after adding it).
    pub gain_trace: Vec<(usize, f64)>,
}

impl OracleSelection {
    /// Concatenated tokens of the selected sentences, in document order.
    pub fn selected_tokens(&self, sentences: &[String]) -> Vec<String> {
        self.indices
            .iter()
            .flat_map(|&i| tokenize(&sentences[i]))
            .collect()
    }
}

/// Greedy oracle: repeatedly add the sentence that maximizes the ROUGE-2 F1
/// of the selection (concatenated in document order) against the
/// justification. Stops at `k` sentences, or earlier when no candidate
/// strictly improves the score — unless `force_k` is set, which keeps
/// adding the argmax until `k`. Ties resolve to the lowest index.
pub fn greedy_oracle(
    sentences: &[String],
    justification: &str,
    k: usize,
    force_k: bool,
) -> Result<OracleSelection> {
    if sentences.is_empty() {
        return Err(ExplainError::NoSentences);
    }
    if k == 0 {
        return Err(ExplainError::InvalidK);
    }
    let sentence_tokens: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s)).collect();
    let just_tokens = tokenize(justification);

    let mut selected: Vec<usize> = Vec::new();
    let mut gain_trace = Vec::new();
    let mut current = 0.0;
    while selected.len() < k.min(sentences.len()) {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..sentences.len() {
            if selected.contains(&i) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(i);
            trial.sort_unstable();
            let tokens: Vec<String> = trial
                .iter()
                .flat_map(|&j| sentence_tokens[j].iter().cloned())
                .collect();
            let score = rouge_n(&tokens, &just_tokens, 2).f1;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let (index, score) = best.expect("at least one unselected sentence remains");
        // The first pick always lands; later picks need strict improvement.
        if !selected.is_empty() && !force_k && score <= current {
            break;
        }
        selected.push(index);
        selected.sort_unstable();
        gain_trace.push((index, score));
        current = score;
    }
    Ok(OracleSelection {
        indices: selected,
        gain_trace,
    })
}

/// Lead-k baseline: the first `min(k, count)` sentences.
pub fn lead_k(sentences: &[String], k: usize) -> Result<OracleSelection> {
    if sentences.is_empty() {
        return Err(ExplainError::NoSentences);
    }
    if k == 0 {
        return Err(ExplainError::InvalidK);
    }
    let indices: Vec<usize> = (0..k.min(sentences.len())).collect();
    Ok(OracleSelection {
        gain_trace: Vec::new(),
        indices,
    })
}

/// Mean ROUGE-1/2/L over aligned (candidate, reference) text pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub rouge_1: RougeScore,
    pub rouge_2: RougeScore,
    pub rouge_l: RougeScore,
    pub instances: usize,
}

/// Evaluates predicted explanation texts against gold justifications,
/// matched by id. Every prediction id must have a gold counterpart.
pub fn evaluate_explanations(
    predictions: &[(String, String)],
    gold: &[(String, String)],
) -> Result<EvalSummary> {
    let gold_by_id: std::collections::BTreeMap<&str, &str> = gold
        .iter()
        .map(|(id, text)| (id.as_str(), text.as_str()))
        .collect();
    let mut sums = [RougeScore::ZERO; 3];
    let mut count = 0usize;
    for (id, text) in predictions {
        let reference = gold_by_id
            .get(id.as_str())
            .ok_or_else(|| ExplainError::IdMismatch(id.clone()))?;
        let cand = tokenize(text);
        let refr = tokenize(reference);
        let scores = [
            rouge_n(&cand, &refr, 1),
            rouge_n(&cand, &refr, 2),
            rouge_l(&cand, &refr),
        ];
        for (sum, s) in sums.iter_mut().zip(scores) {
            sum.precision += s.precision;
            sum.recall += s.recall;
            sum.f1 += s.f1;
        }
        count += 1;
    }
    if count == 0 {
        return Err(ExplainError::NoSentences);
    }
    let n = count as f64;
    for s in &mut sums {
        s.precision /= n;
        s.recall /= n;
        s.f1 /= n;
    }
    Ok(EvalSummary {
        rouge_1: sums[0],
        rouge_2: sums[1],
        rouge_l: sums[2],
        instances: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(texts: &[&str]) -> Vec<String> {
        texts.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn k_at_least_sentence_count_selects_all() {
        let docs = sentences(&["one fact here.", "two facts there.", "three more."]);
        let sel = greedy_oracle(&docs, "facts about one two three", 10, true).unwrap();
        assert_eq!(sel.indices, vec![0, 1, 2]);
    }

    #[test]
    fn verbatim_sentence_is_picked_first() {
        let just = "the mayor cut the budget in march";
        let docs = sentences(&[
            "unrelated filler sentence.",
            "The mayor cut the budget in March.",
            "another filler about weather.",
        ]);
        let sel = greedy_oracle(&docs, just, 4, false).unwrap();
        assert_eq!(sel.gain_trace[0].0, 1);
        let expected = rouge_n(&tokenize(docs[1].as_str()), &tokenize(just), 2).f1;
        assert!((sel.gain_trace[0].1 - expected).abs() < 1e-12);
        assert!((expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn every_step_matches_exhaustive_argmax_oracle() {
        // Documents of up to 8 sentences; verify each greedy step against an
        // independent scan over the remaining sentences.
        let corpus: Vec<(Vec<String>, &str)> = vec![
            (
                sentences(&[
                    "the program cost ten million dollars.",
                    "officials defended the overall plan.",
                    "the audit found cost overruns of ten million.",
                    "weather was mild in the capital.",
                    "a spokesperson promised an audit next year.",
                ]),
                "an audit found the program cost overruns of ten million dollars",
            ),
            (
                sentences(&[
                    "crime fell by five percent last year.",
                    "the senator claimed crime doubled.",
                    "statistics show crime fell five percent.",
                    "the debate continued for hours.",
                ]),
                "statistics show crime fell by five percent not doubled",
            ),
        ];
        for (docs, just) in corpus {
            let sel = greedy_oracle(&docs, just, 4, false).unwrap();
            let just_tokens = tokenize(just);
            let mut chosen: Vec<usize> = Vec::new();
            for &(index, score) in &sel.gain_trace {
                // Independent argmax scan.
                let mut best_score = f64::NEG_INFINITY;
                let mut best_index = usize::MAX;
                for i in 0..docs.len() {
                    if chosen.contains(&i) {
                        continue;
                    }
                    let mut trial = chosen.clone();
                    trial.push(i);
                    trial.sort_unstable();
                    let tokens: Vec<String> =
                        trial.iter().flat_map(|&j| tokenize(&docs[j])).collect();
                    let s = rouge_n(&tokens, &just_tokens, 2).f1;
                    if s > best_score {
                        best_score = s;
                        best_index = i;
                    }
                }
                assert_eq!(index, best_index);
                assert!((score - best_score).abs() < 1e-12);
                chosen.push(index);
                chosen.sort_unstable();
            }
        }
    }

    #[test]
    fn stops_without_positive_gain_unless_forced() {
        let docs = sentences(&[
            "exact match of the justification text.",
            "totally unrelated filler.",
            "more filler without relevance.",
        ]);
        let just = "exact match of the justification text";
        let free = greedy_oracle(&docs, just, 3, false).unwrap();
        assert_eq!(free.indices, vec![0]);
        let forced = greedy_oracle(&docs, just, 3, true).unwrap();
        assert_eq!(forced.indices.len(), 3);
    }

    #[test]
    fn selection_indices_are_unique_and_in_range() {
        let docs = sentences(&["a b c.", "b c d.", "c d e.", "d e f."]);
        let sel = greedy_oracle(&docs, "b c d e", 4, true).unwrap();
        let mut dedup = sel.indices.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), sel.indices.len());
        assert!(sel.indices.iter().all(|&i| i < docs.len()));
        assert_eq!(sel.gain_trace.len(), sel.indices.len());
    }

    #[test]
    fn empty_document_is_error() {
        assert_eq!(
            greedy_oracle(&[], "anything", 4, false),
            Err(ExplainError::NoSentences)
        );
        assert_eq!(lead_k(&[], 4), Err(ExplainError::NoSentences));
    }

    #[test]
    fn lead_k_truncates() {
        let docs = sentences(&["one.", "two.", "three.", "four.", "five."]);
        assert_eq!(lead_k(&docs, 4).unwrap().indices, vec![0, 1, 2, 3]);
        let short = sentences(&["one.", "two."]);
        assert_eq!(lead_k(&short, 4).unwrap().indices, vec![0, 1]);
    }

    #[test]
    fn perfect_predictions_average_to_one() {
        let gold = vec![
            ("a".to_string(), "first gold justification".to_string()),
            ("b".to_string(), "second gold text".to_string()),
        ];
        let summary = evaluate_explanations(&gold, &gold).unwrap();
        assert!((summary.rouge_1.f1 - 1.0).abs() < 1e-12);
        assert!((summary.rouge_2.f1 - 1.0).abs() < 1e-12);
        assert!((summary.rouge_l.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_instance_mean_is_its_score() {
        let pred = vec![("a".to_string(), "the cat sat".to_string())];
        let gold = vec![("a".to_string(), "the cat ran".to_string())];
        let summary = evaluate_explanations(&pred, &gold).unwrap();
        let direct = rouge_n(&tokenize("the cat sat"), &tokenize("the cat ran"), 2);
        assert!((summary.rouge_2.f1 - direct.f1).abs() < 1e-12);
    }

    #[test]
    fn unmatched_id_is_error() {
        let pred = vec![("missing".to_string(), "text".to_string())];
        let gold = vec![("a".to_string(), "text".to_string())];
        assert_eq!(
            evaluate_explanations(&pred, &gold),
            Err(ExplainError::IdMismatch("missing".into()))
        );
    }
}
