//! Dynamic programs over a dense first-order chain: forward, backward,
//! posterior marginals and constrained Viterbi. Everything is in log space.

/// Log-space potentials of one sentence. `emission` is row-major `n x k`,
/// `transition` row-major `k x k` indexed `[from * k + to]`.
pub(crate) struct Potentials<'a> {
    pub n: usize,
    pub k: usize,
    pub emission: &'a [f64],
    pub transition: &'a [f64],
    pub begin: &'a [f64],
    pub end: &'a [f64],
}

/// Which tags may start, end, or follow each other.
pub(crate) struct Constraints {
    pub k: usize,
    pub start: Vec<bool>,
    pub end: Vec<bool>,
    pub allowed: Vec<bool>,
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Potentials<'_> {
    fn em(&self, t: usize, j: usize) -> f64 {
        self.emission[t * self.k + j]
    }

    fn tr(&self, i: usize, j: usize) -> f64 {
        self.transition[i * self.k + j]
    }

    /// Forward scores (`n x k`) and log Z.
    pub fn forward(&self) -> (Vec<f64>, f64) {
        let (n, k) = (self.n, self.k);
        let mut alpha = vec![0.0; n * k];
        for j in 0..k {
            alpha[j] = self.begin[j] + self.em(0, j);
        }
        for t in 1..n {
            let (done, rest) = alpha.split_at_mut(t * k);
            let prev = &done[(t - 1) * k..];
            for j in 0..k {
                rest[j] = self.em(t, j) + log_sum_exp((0..k).map(|i| prev[i] + self.tr(i, j)));
            }
        }
        let last = &alpha[(n - 1) * k..];
        let log_z = log_sum_exp((0..k).map(|j| last[j] + self.end[j]));
        (alpha, log_z)
    }

    /// Backward scores (`n x k`), excluding the emission at `t` itself.
    pub fn backward(&self) -> Vec<f64> {
        let (n, k) = (self.n, self.k);
        let mut beta = vec![0.0; n * k];
        beta[(n - 1) * k..].copy_from_slice(self.end);
        for t in (0..n - 1).rev() {
            let (head, tail) = beta.split_at_mut((t + 1) * k);
            let next = &tail[..k];
            for i in 0..k {
                head[t * k + i] = log_sum_exp((0..k).map(|j| self.tr(i, j) + self.em(t + 1, j) + next[j]));
            }
        }
        beta
    }

    pub fn log_partition(&self) -> f64 {
        self.forward().1
    }

    /// Node marginals (`n x k`), edge marginals (`(n-1) x k x k`) and log Z.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>, f64) {
        let (n, k) = (self.n, self.k);
        let (alpha, log_z) = self.forward();
        let beta = self.backward();
        let node: Vec<f64> = alpha.iter().zip(&beta).map(|(a, b)| (a + b - log_z).exp()).collect();
        let mut edge = vec![0.0; n.saturating_sub(1) * k * k];
        for t in 1..n {
            for i in 0..k {
                let a = alpha[(t - 1) * k + i];
                for j in 0..k {
                    edge[((t - 1) * k + i) * k + j] =
                        (a + self.tr(i, j) + self.em(t, j) + beta[t * k + j] - log_z).exp();
                }
            }
        }
        (node, edge, log_z)
    }

    /// Best path under `constraints`, with ties going to the lowest tag index
    /// at every step. Returns `None` when no path satisfies the constraints.
    pub fn viterbi(&self, constraints: Option<&Constraints>) -> Option<(Vec<usize>, f64)> {
        let (n, k) = (self.n, self.k);
        let ok_start = |j: usize| constraints.is_none_or(|c| c.start[j]);
        let ok_end = |j: usize| constraints.is_none_or(|c| c.end[j]);
        let ok = |i: usize, j: usize| constraints.is_none_or(|c| c.allowed[i * c.k + j]);

        let mut delta = vec![f64::NEG_INFINITY; n * k];
        let mut back = vec![usize::MAX; n * k];
        for j in 0..k {
            if ok_start(j) {
                delta[j] = self.begin[j] + self.em(0, j);
            }
        }
        for t in 1..n {
            for j in 0..k {
                let mut best = f64::NEG_INFINITY;
                let mut arg = usize::MAX;
                for i in 0..k {
                    let prev = delta[(t - 1) * k + i];
                    if prev == f64::NEG_INFINITY || !ok(i, j) {
                        continue;
                    }
                    let s = prev + self.tr(i, j);
                    if arg == usize::MAX || s > best {
                        best = s;
                        arg = i;
                    }
                }
                if arg != usize::MAX {
                    delta[t * k + j] = best + self.em(t, j);
                    back[t * k + j] = arg;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = usize::MAX;
        for j in 0..k {
            let d = delta[(n - 1) * k + j];
            if d == f64::NEG_INFINITY || !ok_end(j) {
                continue;
            }
            let s = d + self.end[j];
            if arg == usize::MAX || s > best {
                best = s;
                arg = j;
            }
        }
        if arg == usize::MAX {
            return None;
        }
        let mut path = vec![0; n];
        path[n - 1] = arg;
        for t in (1..n).rev() {
            path[t - 1] = back[t * k + path[t]];
        }
        Some((path, best))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_edges() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY; 2].into_iter()), f64::NEG_INFINITY);
        let v = log_sum_exp([1000.0, 1000.0].into_iter());
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn single_token_closed_form() {
        let (a, b) = (0.3, -1.2);
        let p = Potentials {
            n: 1,
            k: 2,
            emission: &[a, b],
            transition: &[0.0; 4],
            begin: &[0.0; 2],
            end: &[0.0; 2],
        };
        let expected = (a.exp() + b.exp()).ln();
        assert!((p.log_partition() - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_scores() {
        let (n, k) = (7, 3);
        let emission = vec![0.0; n * k];
        let p = Potentials {
            n,
            k,
            emission: &emission,
            transition: &[0.0; 9],
            begin: &[0.0; 3],
            end: &[0.0; 3],
        };
        assert!((p.log_partition() - n as f64 * (k as f64).ln()).abs() < 1e-12);
        let (path, score) = p.viterbi(None).unwrap();
        assert_eq!(path, vec![0; n]);
        assert_eq!(score, 0.0);
    }

    #[test]
    fn long_sentences_do_not_overflow() {
        let (n, k) = (150, 4);
        let emission: Vec<f64> = (0..n * k).map(|i| 40.0 + (i % 7) as f64).collect();
        let p = Potentials {
            n,
            k,
            emission: &emission,
            transition: &[5.0; 16],
            begin: &[0.0; 4],
            end: &[0.0; 4],
        };
        let (node, edge, log_z) = p.marginals();
        assert!(log_z.is_finite());
        for t in 0..n {
            let s: f64 = node[t * k..(t + 1) * k].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(edge.iter().all(|e| e.is_finite()));
    }
}
