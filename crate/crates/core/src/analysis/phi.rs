//! The randomized Bellman operator
//! `(Φq)(s,a) = r(s,a) + γ Σ_{s'} P(s'|s,a) E_{C~ℙ}[max_{b∈C} q(s',b)]`
//! and its fixed point `Q*`. Terminal successors contribute no value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stochmax::{sample_distinct, ActionId};
use crate::{Error, FiniteMdp, QValues, Result};

/// Largest action count for which uniform `k`-subsets are enumerated.
pub const MAX_ENUMERATION_ACTIONS: usize = 20;

/// Law `ℙ` of the candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetDistribution {
    /// Uniform over all `k`-subsets, enumerated exactly.
    UniformK(usize),
    /// Explicit `(subset, probability)` pairs.
    Explicit(Vec<(Vec<ActionId>, f64)>),
    /// Uniform `k`-subsets estimated from a fixed sample of `samples` subsets.
    MonteCarlo { k: usize, samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiOperatorSpec {
    mdp: FiniteMdp,
    gamma: f64,
    subsets: SubsetDistribution,
    /// Monte-Carlo subsets, drawn once so the operator is deterministic.
    drawn: Vec<Vec<usize>>,
}

impl PhiOperatorSpec {
    pub fn new(mdp: FiniteMdp, gamma: f64, subsets: SubsetDistribution) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParams(format!(
                "gamma {gamma} outside [0, 1]"
            )));
        }
        let n = mdp.n_actions();
        let mut drawn = Vec::new();
        match &subsets {
            SubsetDistribution::UniformK(k) => {
                if *k < 1 || *k > n {
                    return Err(Error::InvalidParams(format!("k={k} outside [1, {n}]")));
                }
                if n > MAX_ENUMERATION_ACTIONS {
                    return Err(Error::EnumerationTooLarge {
                        n,
                        k: *k,
                        limit: MAX_ENUMERATION_ACTIONS,
                    });
                }
            }
            SubsetDistribution::Explicit(pairs) => {
                let total: f64 = pairs.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 || pairs.iter().any(|(_, p)| !(*p >= 0.0)) {
                    return Err(Error::InvalidParams(format!(
                        "subset probabilities sum to {total}"
                    )));
                }
                for (c, _) in pairs {
                    if c.is_empty() {
                        return Err(Error::EmptyCandidates);
                    }
                    if let Some(a) = c.iter().find(|a| a.index() >= n) {
                        return Err(Error::IndexOutOfRange {
                            index: a.index(),
                            size: n,
                        });
                    }
                }
            }
            SubsetDistribution::MonteCarlo { k, samples, seed } => {
                if *k < 1 || *k > n || *samples < 2 {
                    return Err(Error::InvalidParams(format!("k={k}, samples={samples}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for _ in 0..*samples {
                    let mut c = Vec::with_capacity(*k);
                    sample_distinct(&mut rng, n, *k, &mut c);
                    drawn.push(c);
                }
            }
        }
        Ok(Self {
            mdp,
            gamma,
            subsets,
            drawn,
        })
    }

    pub fn mdp(&self) -> &FiniteMdp {
        &self.mdp
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn subsets(&self) -> &SubsetDistribution {
        &self.subsets
    }

    /// `E_C[max_{b∈C} row[b]]` and, for Monte Carlo, the standard error.
    fn expected_max(&self, row: &[f64]) -> (f64, f64) {
        let max_over = |c: &[usize]| c.iter().map(|&i| row[i]).fold(f64::NEG_INFINITY, f64::max);
        match &self.subsets {
            SubsetDistribution::UniformK(k) => {
                let mut total = 0.0;
                let mut count = 0u64;
                for_each_combination(row.len(), *k, |c| {
                    total += max_over(c);
                    count += 1;
                });
                (total / count as f64, 0.0)
            }
            SubsetDistribution::Explicit(pairs) => {
                let v = pairs
                    .iter()
                    .map(|(c, p)| {
                        p * c
                            .iter()
                            .map(|a| row[a.index()])
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .sum();
                (v, 0.0)
            }
            SubsetDistribution::MonteCarlo { .. } => {
                let m = self.drawn.len() as f64;
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for c in &self.drawn {
                    let v = max_over(c);
                    sum += v;
                    sum_sq += v * v;
                }
                let mean = sum / m;
                let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
                (mean, (var / m).sqrt())
            }
        }
    }

    fn next_values(&self, q: &QValues) -> (Vec<f64>, f64) {
        let mut se: f64 = 0.0;
        let m = (0..self.mdp.n_states())
            .map(|s| {
                if self.mdp.is_terminal(s) {
                    0.0
                } else {
                    let (v, e) = self.expected_max(q.row(s));
                    se = se.max(e);
                    v
                }
            })
            .collect();
        (m, se)
    }
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_combination<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_shape(spec: &PhiOperatorSpec, q: &QValues) -> Result<()> {
    let (ns, na) = (spec.mdp.n_states(), spec.mdp.n_actions());
    if q.n_states() != ns || q.n_actions() != na {
        return Err(Error::ShapeMismatch {
            expected: ns * na,
            got: q.n_states() * q.n_actions(),
        });
    }
    Ok(())
}

/// One application of `Φ`.
pub fn phi_apply(spec: &PhiOperatorSpec, q: &QValues) -> Result<QValues> {
    check_shape(spec, q)?;
    let (m, _) = spec.next_values(q);
    let mdp = &spec.mdp;
    Ok(QValues::from_fn(mdp.n_states(), mdp.n_actions(), |s, a| {
        let backup: f64 = mdp
            .transition_row(s, a)
            .iter()
            .zip(&m)
            .map(|(p, v)| p * v)
            .sum();
        mdp.reward(s, a) + spec.gamma * backup
    }))
}

/// Largest standard error of `Φq` entries; zero for exact distributions.
pub fn phi_standard_error(spec: &PhiOperatorSpec, q: &QValues) -> Result<f64> {
    check_shape(spec, q)?;
    Ok(spec.gamma * spec.next_values(q).1)
}

/// Iterates `Φ` from zero until `‖Q_{m+1} − Q_m‖∞ < tol·(1−γ)/γ`, which puts
/// the result within `tol` of the fixed point.
pub fn qstar_fixed_point(spec: &PhiOperatorSpec, tol: f64, max_iters: usize) -> Result<QValues> {
    if !(spec.gamma < 1.0) {
        return Err(Error::InvalidParams("fixed point needs gamma < 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance {tol}")));
    }
    let zero = QValues::zeros(spec.mdp.n_states(), spec.mdp.n_actions());
    if spec.gamma == 0.0 {
        return phi_apply(spec, &zero);
    }
    let threshold = tol * (1.0 - spec.gamma) / spec.gamma;
    let mut q = zero;
    let mut last_step = f64::INFINITY;
    for _ in 0..max_iters {
        let next = phi_apply(spec, &q)?;
        last_step = next.sup_distance(&q);
        q = next;
        if last_step < threshold {
            return Ok(q);
        }
    }
    Err(Error::NonConvergence {
        iters: max_iters,
        last_step,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub gamma: f64,
    pub trials: usize,
    /// Largest `‖Φq1 − Φq2‖∞ / ‖q1 − q2‖∞`.
    pub max_ratio: f64,
    /// Pairs with `‖Φq1 − Φq2‖∞ > γ‖q1 − q2‖∞ + 1e-9`.
    pub violations: usize,
    pub passed: bool,
}

/// Checks the `γ`-contraction on random pairs with entries uniform on `[−100, 100]`.
pub fn contraction_check(
    spec: &PhiOperatorSpec,
    trials: usize,
    seed: u64,
) -> Result<ContractionReport> {
    if trials < 100 {
        return Err(Error::InvalidParams(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    let (ns, na) = (spec.mdp.n_states(), spec.mdp.n_actions());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..trials {
        let q1 = QValues::from_fn(ns, na, |_, _| rng.random_range(-100.0..=100.0));
        let q2 = QValues::from_fn(ns, na, |_, _| rng.random_range(-100.0..=100.0));
        let d_in = q1.sup_distance(&q2);
        let d_out = phi_apply(spec, &q1)?.sup_distance(&phi_apply(spec, &q2)?);
        if d_out > spec.gamma * d_in + 1e-9 {
            violations += 1;
        }
        if d_in > 0.0 {
            max_ratio = max_ratio.max(d_out / d_in);
        }
    }
    Ok(ContractionReport {
        gamma: spec.gamma,
        trials,
        max_ratio,
        violations,
        passed: violations == 0,
    })
}
