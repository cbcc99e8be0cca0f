use std::collections::BTreeMap;

/// Sparse L2-normalized TF-IDF vectors fit on a fixed document set.
///
/// Term frequency is the raw count; IDF is the smoothed
/// `ln((1 + N) / (1 + df)) + 1`. Tokens are whitespace-split and lowercased.
/// Candidate sets up to this size get exact pairwise similarity sums.
pub const EXACT_PAIRWISE_MAX: usize = 2_000;

#[derive(Debug, Clone)]
pub struct TfIdf {
    vectors: Vec<Vec<(usize, f64)>>,
    vocab_len: usize,
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

impl TfIdf {
    pub fn fit<S: AsRef<str>>(docs: &[S]) -> TfIdf {
        let tokenized: Vec<Vec<String>> = docs.iter().map(|d| tokenize(d.as_ref())).collect();

        // Sorted vocabulary so term ids and summation order are reproducible.
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for toks in &tokenized {
            let mut seen: Vec<&str> = toks.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let ids: BTreeMap<&str, usize> = df.keys().enumerate().map(|(i, t)| (*t, i)).collect();
        let n = docs.len() as f64;
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let vectors = tokenized
            .iter()
            .map(|toks| {
                let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
                for t in toks {
                    *counts.entry(ids[t.as_str()]).or_default() += 1.0;
                }
                let mut v: Vec<(usize, f64)> =
                    counts.into_iter().map(|(id, tf)| (id, tf * idf[id])).collect();
                let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for (_, x) in &mut v {
                        *x /= norm;
                    }
                }
                v
            })
            .collect();
        TfIdf {
            vectors,
            vocab_len: ids.len(),
        }
    }

    pub fn vector(&self, doc: usize) -> &[(usize, f64)] {
        &self.vectors[doc]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Cosine of two documents. Vectors are unit length, so this is their
    /// dot product, summed in term-id order (symmetric bit for bit).
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.vectors[a], &self.vectors[b]);
        let (mut i, mut j, mut dot) = (0, 0, 0.0);
        while i < x.len() && j < y.len() {
            match x[i].0.cmp(&y[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    dot += x[i].1 * y[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        dot
    }

    /// Mean cosine similarity of each document to every other document.
    ///
    /// Up to [`EXACT_PAIRWISE_MAX`] documents, each row's cosines are
    /// sorted before summing, so documents whose similarities are equal as
    /// multisets get bit-identical means and fall through to the tie-break.
    /// Beyond that the sum is taken as `v_i · (Σ_j v_j) − v_i · v_i`, linear
    /// in the number of documents.
    pub fn mean_cosine_to_others(&self) -> Vec<f64> {
        let n = self.vectors.len();
        if n < 2 {
            return vec![0.0; n];
        }
        let others = (n - 1) as f64;
        if n <= EXACT_PAIRWISE_MAX {
            let mut row = Vec::with_capacity(n - 1);
            return (0..n)
                .map(|i| {
                    row.clear();
                    row.extend((0..n).filter(|&j| j != i).map(|j| self.cosine(i, j)));
                    row.sort_by(f64::total_cmp);
                    (row.iter().sum::<f64>() / others).clamp(0.0, 1.0)
                })
                .collect();
        }
        let mut total = vec![0.0; self.vocab_len];
        for v in &self.vectors {
            for &(id, x) in v {
                total[id] += x;
            }
        }
        self.vectors
            .iter()
            .map(|v| {
                let with_all: f64 = v.iter().map(|&(id, x)| x * total[id]).sum();
                let with_self: f64 = v.iter().map(|&(_, x)| x * x).sum();
                ((with_all - with_self) / others).clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors_are_unit_length() {
        let m = TfIdf::fit(&["bag is used for carrying things", "bag is made of leather"]);
        for i in 0..m.len() {
            let norm: f64 = m.vector(i).iter().map(|(_, x)| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothed_idf_values() {
        // "a" appears in both docs: idf = ln(3/3) + 1 = 1; "b" in one: ln(3/2) + 1.
        let m = TfIdf::fit(&["a b", "a"]);
        let v = m.vector(0);
        let idf_b = (3.0f64 / 2.0).ln() + 1.0;
        let norm = (1.0 + idf_b * idf_b).sqrt();
        assert!((v[0].1 - 1.0 / norm).abs() < 1e-12);
        assert!((v[1].1 - idf_b / norm).abs() < 1e-12);
    }

    #[test]
    fn empty_documents_have_zero_similarity() {
        let m = TfIdf::fit(&["", "a b"]);
        assert_eq!(m.mean_cosine_to_others(), vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_documents_tie_exactly() {
        let m = TfIdf::fit(&["dagger is a weapon", "dagger is used for stabbing"]);
        let s = m.mean_cosine_to_others();
        assert_eq!(s[0], s[1]);
        let m = TfIdf::fit(&["x a", "x b", "x c", "y z"]);
        let s = m.mean_cosine_to_others();
        assert_eq!(s[0], s[1]);
        assert_eq!(s[1], s[2]);
    }

    #[test]
    fn cosine_is_symmetric() {
        let m = TfIdf::fit(&["a b c", "b c d", "c d e e"]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.cosine(i, j).to_bits(), m.cosine(j, i).to_bits());
            }
        }
    }

    #[test]
    fn linear_form_matches_pairwise() {
        let words = ["bag", "is", "used", "for", "carrying", "things", "a", "container", "made", "of", "cloth"];
        let docs: Vec<String> = (0..EXACT_PAIRWISE_MAX + 5)
            .map(|i| (0..4).map(|k| words[(i * 7 + k * (i % 5 + 1)) % words.len()]).collect::<Vec<_>>().join(" "))
            .collect();
        let m = TfIdf::fit(&docs);
        let linear = m.mean_cosine_to_others();
        let n = docs.len();
        for i in [0, 1, 17, n - 1] {
            let exact: f64 = (0..n).filter(|&j| j != i).map(|j| m.cosine(i, j)).sum::<f64>() / (n - 1) as f64;
            assert!((exact - linear[i]).abs() < 1e-12);
        }
    }
}
