//! Linear-chain CRF with explicit start and end transitions.
//!
//! Scores live in two row-major buffers: `emissions` (`n × k`) and
//! `transitions` (`(k+2) × (k+2)`, row = previous label, column = next label),
//! where index `k` is the start state and `k+1` the end state. A path
//! `y_1..y_n` scores
//! `T[start, y_1] + Σ_i o_i[y_i] + Σ_{i>1} T[y_{i-1}, y_i] + T[y_n, end]`.

/// Emission and transition scores for one sentence.
#[derive(Debug, Clone, Copy)]
pub struct CrfScores<'a> {
    pub emissions: &'a [f64],
    pub transitions: &'a [f64],
    pub labels: usize,
}

impl<'a> CrfScores<'a> {
    pub fn new(emissions: &'a [f64], transitions: &'a [f64], labels: usize) -> Self {
        assert!(labels > 0);
        assert_eq!(emissions.len() % labels, 0);
        assert_eq!(transitions.len(), (labels + 2) * (labels + 2));
        CrfScores {
            emissions,
            transitions,
            labels,
        }
    }

    pub fn len(&self) -> usize {
        self.emissions.len() / self.labels
    }

    pub fn is_empty(&self) -> bool {
        self.emissions.is_empty()
    }

    pub fn start(&self) -> usize {
        self.labels
    }

    pub fn end(&self) -> usize {
        self.labels + 1
    }

    #[inline]
    pub fn emission(&self, i: usize, y: usize) -> f64 {
        self.emissions[i * self.labels + y]
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * (self.labels + 2) + to]
    }

    pub fn path_score(&self, path: &[usize]) -> f64 {
        assert_eq!(path.len(), self.len());
        let mut score = 0.0;
        let mut prev = self.start();
        for (i, &y) in path.iter().enumerate() {
            score += self.transition(prev, y) + self.emission(i, y);
            prev = y;
        }
        score + self.transition(prev, self.end())
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Forward log-scores `alpha[i][y]` (flattened `n × k`).
fn forward(s: &CrfScores<'_>) -> Vec<f64> {
    let (n, k) = (s.len(), s.labels);
    let mut alpha = vec![0.0; n * k];
    for y in 0..k {
        alpha[y] = s.transition(s.start(), y) + s.emission(0, y);
    }
    for i in 1..n {
        for y in 0..k {
            let prev = &alpha[(i - 1) * k..i * k];
            alpha[i * k + y] = s.emission(i, y) + log_sum_exp((0..k).map(|p| prev[p] + s.transition(p, y)));
        }
    }
    alpha
}

/// Backward log-scores `beta[i][y]`: everything after position `i` given `y_i = y`.
fn backward(s: &CrfScores<'_>) -> Vec<f64> {
    let (n, k) = (s.len(), s.labels);
    let mut beta = vec![0.0; n * k];
    for y in 0..k {
        beta[(n - 1) * k + y] = s.transition(y, s.end());
    }
    for i in (0..n - 1).rev() {
        for y in 0..k {
            let next = &beta[(i + 1) * k..(i + 2) * k];
            beta[i * k + y] =
                log_sum_exp((0..k).map(|q| s.transition(y, q) + s.emission(i + 1, q) + next[q]));
        }
    }
    beta
}

/// Log partition function `log Z` by the forward algorithm.
pub fn log_partition(s: &CrfScores<'_>) -> f64 {
    assert!(!s.is_empty(), "empty sentence");
    let (n, k) = (s.len(), s.labels);
    let alpha = forward(s);
    log_sum_exp((0..k).map(|y| alpha[(n - 1) * k + y] + s.transition(y, s.end())))
}

/// Negative log-likelihood `log Z - score(gold)`.
pub fn neg_log_likelihood(s: &CrfScores<'_>, gold: &[usize]) -> f64 {
    log_partition(s) - s.path_score(gold)
}

/// Negative log-likelihood; adds `scale` times its gradient to the two buffers.
pub fn neg_log_likelihood_with_grad(
    s: &CrfScores<'_>,
    gold: &[usize],
    scale: f64,
    d_emissions: &mut [f64],
    d_transitions: &mut [f64],
) -> f64 {
    let (n, k) = (s.len(), s.labels);
    assert!(n > 0, "empty sentence");
    assert_eq!(gold.len(), n);
    assert_eq!(d_emissions.len(), s.emissions.len());
    assert_eq!(d_transitions.len(), s.transitions.len());
    let width = k + 2;

    let alpha = forward(s);
    let beta = backward(s);
    let log_z = log_sum_exp((0..k).map(|y| alpha[(n - 1) * k + y] + s.transition(y, s.end())));

    for i in 0..n {
        for y in 0..k {
            let marginal = (alpha[i * k + y] + beta[i * k + y] - log_z).exp();
            d_emissions[i * k + y] += scale * marginal;
        }
    }
    for y in 0..k {
        d_transitions[s.start() * width + y] += scale * (alpha[y] + beta[y] - log_z).exp();
        let last = (n - 1) * k + y;
        d_transitions[y * width + s.end()] += scale * (alpha[last] + beta[last] - log_z).exp();
    }
    for i in 0..n - 1 {
        for p in 0..k {
            for q in 0..k {
                let pair = alpha[i * k + p] + s.transition(p, q) + s.emission(i + 1, q) + beta[(i + 1) * k + q] - log_z;
                d_transitions[p * width + q] += scale * pair.exp();
            }
        }
    }

    let mut prev = s.start();
    for (i, &y) in gold.iter().enumerate() {
        d_emissions[i * k + y] -= scale;
        d_transitions[prev * width + y] -= scale;
        prev = y;
    }
    d_transitions[prev * width + s.end()] -= scale;

    log_z - s.path_score(gold)
}

/// Highest-scoring path; ties go to the lower label index.
pub fn viterbi(s: &CrfScores<'_>) -> Vec<usize> {
    let (n, k) = (s.len(), s.labels);
    assert!(n > 0, "empty sentence");
    let mut delta = vec![0.0; n * k];
    let mut back = vec![0usize; n * k];
    for y in 0..k {
        delta[y] = s.transition(s.start(), y) + s.emission(0, y);
    }
    for i in 1..n {
        for y in 0..k {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for p in 0..k {
                let score = delta[(i - 1) * k + p] + s.transition(p, y);
                if score > best_score {
                    best_score = score;
                    best = p;
                }
            }
            delta[i * k + y] = best_score + s.emission(i, y);
            back[i * k + y] = best;
        }
    }

    let mut last = 0;
    let mut best_score = f64::NEG_INFINITY;
    for y in 0..k {
        let score = delta[(n - 1) * k + y] + s.transition(y, s.end());
        if score > best_score {
            best_score = score;
            last = y;
        }
    }
    let mut path = vec![0; n];
    path[n - 1] = last;
    for i in (1..n).rev() {
        path[i - 1] = back[i * k + path[i]];
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_position_two_labels() {
        // Paths: label 0 scores 0.3 + 1.0 + 0.2, label 1 scores -0.5 + 2.0 + 0.1.
        let emissions = [1.0, 2.0];
        let mut t = [0.0; 16];
        t[2 * 4] = 0.3;
        t[2 * 4 + 1] = -0.5;
        t[3] = 0.2;
        t[4 + 3] = 0.1;
        let s = CrfScores::new(&emissions, &t, 2);
        let (a, b) = (1.5_f64, 1.6_f64);
        let expected_nll_0 = -(a - (a.exp() + b.exp()).ln());
        assert!((neg_log_likelihood(&s, &[0]) - expected_nll_0).abs() < 1e-12);
        assert_eq!(viterbi(&s), vec![1]);
    }

    #[test]
    fn uniform_scores_give_n_log_k() {
        let (n, k) = (4, 3);
        let emissions = vec![0.7; n * k];
        let t = vec![0.25; (k + 2) * (k + 2)];
        let s = CrfScores::new(&emissions, &t, k);
        let nll = neg_log_likelihood(&s, &[0, 2, 1, 1]);
        assert!((nll - n as f64 * (k as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn strong_emissions_decide_with_neutral_transitions() {
        let k = 3;
        let gold = [2, 0, 1, 1, 0];
        let mut emissions = vec![0.0; gold.len() * k];
        for (i, &y) in gold.iter().enumerate() {
            emissions[i * k + y] = 10.0;
        }
        let t = vec![0.0; (k + 2) * (k + 2)];
        assert_eq!(viterbi(&CrfScores::new(&emissions, &t, k)), gold);
    }

    #[test]
    fn gradient_of_single_label_is_zero() {
        let emissions = [0.4, -1.0, 2.0];
        let t = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
        let s = CrfScores::new(&emissions, &t, 1);
        let mut de = [0.0; 3];
        let mut dt = [0.0; 9];
        let nll = neg_log_likelihood_with_grad(&s, &[0, 0, 0], 1.0, &mut de, &mut dt);
        assert!(nll.abs() < 1e-12);
        assert!(de.iter().chain(&dt).all(|g| g.abs() < 1e-12));
    }
}
