//! Sampling statistics of random subsets: inclusion of a designated action,
//! the expected subset maximum, and the hitting time of the true maximizer
//! when exploited actions are remembered.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stochmax::{
    exact_argmax, sample_distinct, ActionMemory, CandidateSet, Recall, StochMaximizer,
    SubsetSampler,
};
use crate::{Error, Result};

/// Outcome of the inclusion-probability experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub hits: u64,
    pub empirical: f64,
    /// Exact inclusion probability `k/n`.
    pub expected: f64,
    /// Binomial standard deviation of the empirical frequency.
    pub sigma: f64,
    /// `empirical ≥ k/n − 3σ` and `|empirical − k/n| ≤ 3σ`.
    pub passed: bool,
}

/// Fraction of uniform `k`-subsets of `n` actions containing a fixed action.
pub fn lemma1_probability(n: usize, k: usize, trials: u64, seed: u64) -> Result<InclusionReport> {
    if k < 1 || k > n {
        return Err(Error::InvalidParams(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    if trials < 10_000 {
        return Err(Error::InvalidParams(format!(
            "need at least 10^4 trials, got {trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subset = Vec::with_capacity(k);
    let designated = n - 1;
    let mut hits = 0;
    for _ in 0..trials {
        subset.clear();
        sample_distinct(&mut rng, n, k, &mut subset);
        hits += u64::from(subset.contains(&designated));
    }
    let expected = k as f64 / n as f64;
    let empirical = hits as f64 / trials as f64;
    let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
    let passed = empirical >= expected - 3.0 * sigma && (empirical - expected).abs() <= 3.0 * sigma;
    Ok(InclusionReport {
        n,
        k,
        trials,
        hits,
        empirical,
        expected,
        sigma,
        passed,
    })
}

/// Monte-Carlo estimate of the expected maximum of `k` values uniform on `[q_star − b, q_star]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformMaxReport {
    pub k: usize,
    pub trials: u64,
    pub mean: f64,
    pub std: f64,
    /// `q_star − b/(k+1)`.
    pub expected: f64,
    /// `|mean − expected| ≤ 4·std/√trials`.
    pub passed: bool,
}

/// Each trial samples `k` of `n` actions whose values are i.i.d. uniform on
/// `[q_star − b, q_star]` and records the largest.
pub fn uniform_expected_max(
    n: usize,
    k: usize,
    q_star: f64,
    b: f64,
    trials: u64,
    seed: u64,
) -> Result<UniformMaxReport> {
    if !(b > 0.0) || k < 1 || k > n || trials < 2 {
        return Err(Error::InvalidParams(format!(
            "n={n}, k={k}, b={b}, trials={trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        let m = (0..k).map(|_| rng.random::<f64>()).fold(0.0, f64::max);
        let v = q_star - b + b * m;
        sum += v;
        sum_sq += v * v;
    }
    let t = trials as f64;
    let mean = sum / t;
    let std = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0).sqrt();
    let expected = q_star - b / (k as f64 + 1.0);
    Ok(UniformMaxReport {
        k,
        trials,
        mean,
        std,
        expected,
        passed: (mean - expected).abs() <= 4.0 * std / t.sqrt(),
    })
}

/// `w_j = C(j−1, k−1) / C(N, k)` for ranks `j = 1..N` in increasing value order:
/// the probability that the `j`-th smallest of `N` values is a uniform
/// `k`-subset's maximum.
pub fn subset_max_weights(n: usize, k: usize) -> Result<Vec<f64>> {
    if k < 1 || k > n {
        return Err(Error::InvalidParams(format!(
            "need 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    // ln C(n, k)
    let ln_total: f64 = (0..k).map(|i| ((n - i) as f64 / (k - i) as f64).ln()).sum();
    let mut w = vec![0.0; n];
    // w_k = 1/C(n,k), then w_{j+1} = w_j · j/(j−k+1)
    let mut ln_w = -ln_total;
    for j in k..=n {
        w[j - 1] = ln_w.exp();
        ln_w += (j as f64 / (j - k + 1) as f64).ln();
    }
    Ok(w)
}

/// Exact `E[max_{c∈C} v_c]` over uniform `k`-subsets `C` of fixed values.
pub fn expected_subset_max(values: &[f64], k: usize) -> Result<f64> {
    let w = subset_max_weights(values.len(), k)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted.iter().zip(&w).map(|(v, w)| v * w).sum())
}

/// Standard deviation of `Σ_j w_j U_(j)` over `N = weights.len()` i.i.d.
/// uniform values on an interval of width `b`, from
/// `Cov(U_(i), U_(j)) = b² i (N+1−j) / ((N+1)² (N+2))` for `i ≤ j`.
pub fn l_statistic_sd_uniform(weights: &[f64], b: f64) -> f64 {
    let n = weights.len() as f64;
    let mut var = 0.0;
    // prefix = Σ_{i<j} w_i · i
    let mut prefix = 0.0;
    for (idx, &wj) in weights.iter().enumerate() {
        let j = (idx + 1) as f64;
        var += wj * wj * j * (n + 1.0 - j) + 2.0 * wj * (n + 1.0 - j) * prefix;
        prefix += wj * j;
    }
    (b * b * var / ((n + 1.0).powi(2) * (n + 2.0)))
        .max(0.0)
        .sqrt()
}

/// Repeated memoryless stoch_max queries over fixed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedValuesReport {
    pub n: usize,
    pub k: usize,
    pub queries: u64,
    pub mean: f64,
    /// Standard error of `mean` over the queries.
    pub se: f64,
    /// Exact expectation given these values.
    pub conditional_expectation: f64,
}

pub fn fixed_values_memoryless(
    values: &[f64],
    k: usize,
    queries: u64,
    seed: u64,
) -> Result<FixedValuesReport> {
    if queries < 2 {
        return Err(Error::InvalidParams("need at least two queries".into()));
    }
    let conditional_expectation = expected_subset_max(values, k)?;
    let mut sampler = SubsetSampler::new(values.len(), k, seed)?;
    let mut set = CandidateSet::with_capacity(k);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..queries {
        set.clear();
        sampler.sample_into(&mut set);
        let v = set
            .iter()
            .map(|a| values[a.index()])
            .fold(f64::NEG_INFINITY, f64::max);
        sum += v;
        sum_sq += v * v;
    }
    let q = queries as f64;
    let mean = sum / q;
    let var = ((sum_sq - q * mean * mean) / (q - 1.0)).max(0.0);
    Ok(FixedValuesReport {
        n: values.len(),
        k,
        queries,
        mean,
        se: (var / q).sqrt(),
        conditional_expectation,
    })
}

/// Queries until `C = R ∪ M` first contains the maximizer, with per-state memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub horizon: u64,
    /// Hit time of each run (1-based), `None` if not hit within the horizon.
    pub hit_times: Vec<Option<u64>>,
    pub mean: f64,
    pub se: f64,
    /// Geometric mean hitting time `n/k`.
    pub bound: f64,
    /// Every run kept β = 0 from its hit to the horizon.
    pub stayed: bool,
}

impl HittingReport {
    pub fn all_hit(&self) -> bool {
        self.hit_times.iter().all(Option::is_some)
    }

    pub fn max_hit(&self) -> Option<u64> {
        self.hit_times
            .iter()
            .copied()
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .max()
    }
}

/// Each run queries `stoch_argmax` over fixed `values` for `horizon` steps,
/// recording every returned action as exploited. Run `r` uses stream `r` of `seed`.
pub fn hitting_time(
    values: &[f64],
    k: usize,
    runs: usize,
    horizon: u64,
    seed: u64,
) -> Result<HittingReport> {
    let n = values.len();
    if runs < 2 || horizon == 0 {
        return Err(Error::InvalidParams(format!(
            "runs={runs}, horizon={horizon}"
        )));
    }
    let (_, best) = exact_argmax(n, |a| values[a.index()]);
    let mut hit_times = Vec::with_capacity(runs);
    let mut stayed = true;
    for r in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut m = StochMaximizer::new(
            SubsetSampler::with_rng(n, k, rng)?,
            ActionMemory::per_state(2),
        );
        let mut hit = None;
        for q in 1..=horizon {
            let (a, v) = m.argmax(Recall::State(0), |a| values[a.index()]);
            m.record_exploited(0, a);
            match hit {
                None if v == best => hit = Some(q),
                Some(_) if v != best => stayed = false,
                _ => {}
            }
        }
        hit_times.push(hit);
    }
    let times: Vec<f64> = hit_times.iter().flatten().map(|&t| t as f64).collect();
    let c = times.len().max(1) as f64;
    let mean = times.iter().sum::<f64>() / c;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (c - 1.0).max(1.0);
    Ok(HittingReport {
        n,
        k,
        runs,
        horizon,
        hit_times,
        mean,
        se: (var / c).sqrt(),
        bound: n as f64 / k as f64,
        stayed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force expectation over every k-subset.
    fn enumerate_max(values: &[f64], k: usize) -> f64 {
        let mut total = 0.0;
        let mut count = 0.0;
        crate::analysis::for_each_combination(values.len(), k, |c| {
            total += c
                .iter()
                .map(|&i| values[i])
                .fold(f64::NEG_INFINITY, f64::max);
            count += 1.0;
        });
        total / count
    }

    #[test]
    fn full_subset_always_includes() {
        let r = lemma1_probability(16, 16, 10_000, 0).unwrap();
        assert_eq!(r.empirical, 1.0);
        assert!(r.passed);
        assert!(lemma1_probability(4, 5, 10_000, 0).is_err());
        assert!(lemma1_probability(4, 2, 10, 0).is_err());
    }

    #[test]
    fn inclusion_for_n1000_k10() {
        let r = lemma1_probability(1000, 10, 200_000, 3).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn uniform_max_examples() {
        let r = uniform_expected_max(5000, 10, 100.0, 100.0, 100_000, 1).unwrap();
        assert!((r.expected - 90.909_090_909).abs() < 1e-6);
        assert!(r.passed, "{r:?}");
        let one = uniform_expected_max(5000, 1, 100.0, 100.0, 100_000, 2).unwrap();
        assert_eq!(one.expected, 50.0);
        assert!(one.passed, "{one:?}");
    }

    #[test]
    fn weights_match_enumeration() {
        let values = [3.0, -1.0, 7.5, 2.0, 2.0, 9.0, 0.5];
        for k in 1..=values.len() {
            let w = subset_max_weights(values.len(), k).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let exact = expected_subset_max(&values, k).unwrap();
            assert!((exact - enumerate_max(&values, k)).abs() < 1e-12, "k={k}");
        }
    }

    /// The L-statistic mean over uniform values is `b·k/(k+1)` and its
    /// spread matches a direct simulation over value draws.
    #[test]
    fn l_statistic_moments() {
        let (n, k, b) = (60, 4, 10.0);
        let w = subset_max_weights(n, k).unwrap();
        let mean_rank: f64 = w.iter().enumerate().map(|(j, w)| w * (j + 1) as f64).sum();
        assert!((b * mean_rank / (n as f64 + 1.0) - b * k as f64 / (k as f64 + 1.0)).abs() < 1e-9);

        let sd = l_statistic_sd_uniform(&w, b);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| {
                let v: Vec<f64> = (0..n).map(|_| b * rng.random::<f64>()).collect();
                expected_subset_max(&v, k).unwrap()
            })
            .collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let emp =
            (draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!(
            (emp / sd - 1.0).abs() < 0.03,
            "empirical {emp}, analytic {sd}"
        );
    }

    #[test]
    fn memoryless_mean_matches_conditional_expectation() {
        let values: Vec<f64> = (0..200).map(|i| (i * 37 % 200) as f64).collect();
        let r = fixed_values_memoryless(&values, 8, 50_000, 4).unwrap();
        assert!(
            (r.mean - r.conditional_expectation).abs() < 4.0 * r.se,
            "{r:?}"
        );
    }

    #[test]
    fn hitting_time_is_geometric() {
        let values: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let r = hitting_time(&values, 6, 2000, 2000, 8).unwrap();
        assert!(r.all_hit() && r.stayed);
        // memory never holds the maximizer before the hit, so the wait is geometric with p = k/n
        assert!(
            (r.mean - r.bound).abs() < 4.0 * r.se,
            "{} vs {}",
            r.mean,
            r.bound
        );
    }
}
