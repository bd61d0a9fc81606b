//! Class-distribution protocols: exponential imbalance profiles for the
//! labeled set (with the gamma search and label top-up), reversed
//! imbalanced unlabeled sets, and the DARP protocol.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ceiling for the gamma search; configurations needing more are rejected.
const GAMMA_SEARCH_LIMIT: u64 = 1 << 40;

/// How the labeled and unlabeled class marginals are constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Protocol {
    /// Balanced labeled set of `labels` total, balanced unlabeled set.
    Matched { labels: usize },
    /// Imbalanced labeled set (`n0` head-class labels, `labels` total via
    /// gamma search), balanced unlabeled set.
    ImbalancedLabeled { n0: usize, labels: usize },
    /// Imbalanced labeled set plus a reversed imbalanced unlabeled set
    /// with head-to-tail ratio `gamma`.
    MismatchedBoth { n0: usize, labels: usize, gamma: f64 },
    /// Balanced labeled set, reversed imbalanced unlabeled set.
    BalancedLabeledImbalancedUnlabeled { labels: usize, gamma: f64 },
    /// DARP's protocol: exponential profiles on both sides with ratios
    /// `gamma_l` and `gamma_u`; `reversed` flips the unlabeled profile.
    Darp {
        n1: usize,
        m1: usize,
        gamma_l: f64,
        gamma_u: f64,
        reversed: bool,
    },
}

/// Full description of a dataset split: the protocol, the per-class
/// unlabeled base count and the class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub protocol: Protocol,
    /// Per-class unlabeled base count `M0` (ignored by the DARP protocol,
    /// which carries its own `m1`).
    pub m0: usize,
    pub n: usize,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Usage("dataset needs at least 2 classes".into()));
        }
        if self.m0 < 1 {
            return Err(Error::Usage("m0 must be at least 1".into()));
        }
        let gamma_ok = |g: f64| g.is_finite() && g >= 1.0;
        match &self.protocol {
            Protocol::Matched { labels } => {
                if *labels < 1 {
                    return Err(Error::Usage("labels must be at least 1".into()));
                }
            }
            Protocol::ImbalancedLabeled { n0, labels } => {
                if *n0 < 1 || *labels < 1 {
                    return Err(Error::Usage("n0 and labels must be at least 1".into()));
                }
                if n0 > labels {
                    return Err(Error::Usage(format!("n0 = {n0} exceeds labels = {labels}")));
                }
            }
            Protocol::MismatchedBoth { n0, labels, gamma } => {
                if *n0 < 1 || *labels < 1 {
                    return Err(Error::Usage("n0 and labels must be at least 1".into()));
                }
                if n0 > labels {
                    return Err(Error::Usage(format!("n0 = {n0} exceeds labels = {labels}")));
                }
                if !gamma_ok(*gamma) {
                    return Err(Error::Usage(format!("gamma must be >= 1, got {gamma}")));
                }
            }
            Protocol::BalancedLabeledImbalancedUnlabeled { labels, gamma } => {
                if *labels < 1 {
                    return Err(Error::Usage("labels must be at least 1".into()));
                }
                if !gamma_ok(*gamma) {
                    return Err(Error::Usage(format!("gamma must be >= 1, got {gamma}")));
                }
            }
            Protocol::Darp {
                n1,
                m1,
                gamma_l,
                gamma_u,
                ..
            } => {
                if *n1 < 1 || *m1 < 1 {
                    return Err(Error::Usage("n1 and m1 must be at least 1".into()));
                }
                if !gamma_ok(*gamma_l) || !gamma_ok(*gamma_u) {
                    return Err(Error::Usage("gamma_l and gamma_u must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Total labeled-set size fixed by the protocol, when there is one.
    pub fn fixed_labels(&self) -> Option<usize> {
        match &self.protocol {
            Protocol::Matched { labels }
            | Protocol::ImbalancedLabeled { labels, .. }
            | Protocol::MismatchedBoth { labels, .. }
            | Protocol::BalancedLabeledImbalancedUnlabeled { labels, .. } => Some(*labels),
            Protocol::Darp { .. } => None,
        }
    }
}

/// Per-class labeled and unlabeled example counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub labeled_per_class: Vec<usize>,
    pub unlabeled_per_class: Vec<usize>,
}

impl SplitCounts {
    pub fn total_labeled(&self) -> usize {
        self.labeled_per_class.iter().sum()
    }

    pub fn total_unlabeled(&self) -> usize {
        self.unlabeled_per_class.iter().sum()
    }
}

fn profile_counts(base: usize, gamma: f64, n: usize, floor_it: bool) -> Vec<usize> {
    (0..n)
        .map(|i| {
            let raw = base as f64 * gamma.powf(-(i as f64) / (n as f64 - 1.0));
            if floor_it {
                raw.floor() as usize
            } else {
                raw.round() as usize
            }
        })
        .collect()
}

fn floored_sum(n0: usize, gamma: u64, n: usize) -> (Vec<usize>, usize) {
    let counts = profile_counts(n0, gamma as f64, n, true);
    let sum = counts.iter().sum();
    (counts, sum)
}

/// Finds the smallest natural `gamma_x >= 1` whose floored exponential
/// profile sums to strictly less than `d_x`, returning the ratio and the
/// per-class counts before top-up.
pub fn gamma_search(d_x: usize, n0: usize, n: usize) -> Result<(u64, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Usage("gamma search needs at least 2 classes".into()));
    }
    if n0 == 0 || n0 > d_x {
        return Err(Error::Usage(format!(
            "gamma search needs 1 <= n0 <= d_x, got n0 = {n0}, d_x = {d_x}"
        )));
    }

    let feasible = |gamma: u64| floored_sum(n0, gamma, n).1 < d_x;

    // The floored sum is non-increasing in gamma, so scan small ratios
    // directly and fall back to doubling + binary search for the rest.
    for gamma in 1..=4096u64 {
        if feasible(gamma) {
            return Ok((gamma, floored_sum(n0, gamma, n).0));
        }
        // Once the tail has collapsed the sum stays at n0 forever.
        let (counts, sum) = floored_sum(n0, gamma, n);
        if counts[1..].iter().all(|&c| c == 0) && sum >= d_x {
            return Err(Error::Protocol(format!(
                "no feasible gamma_x: profile bottoms out at {sum} >= d_x = {d_x}"
            )));
        }
    }
    let mut hi = 8192u64;
    while !feasible(hi) {
        let (counts, sum) = floored_sum(n0, hi, n);
        if counts[1..].iter().all(|&c| c == 0) && sum >= d_x {
            return Err(Error::Protocol(format!(
                "no feasible gamma_x: profile bottoms out at {sum} >= d_x = {d_x}"
            )));
        }
        if hi > GAMMA_SEARCH_LIMIT {
            return Err(Error::Protocol(
                "gamma search exceeded its ratio ceiling".into(),
            ));
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // infeasible
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, floored_sum(n0, hi, n).0))
}

/// Adds the missing labels one per class, starting from the second class,
/// until the total reaches `d_x`. The first class keeps exactly its `N0`.
pub fn top_up(counts: &[usize], d_x: usize) -> Result<Vec<usize>> {
    let n = counts.len();
    let sum: usize = counts.iter().sum();
    if sum > d_x {
        return Err(Error::Usage(format!(
            "top_up requires sum <= d_x, got {sum} > {d_x}"
        )));
    }
    let residual = d_x - sum;
    if residual >= n {
        return Err(Error::Protocol(format!(
            "residual {residual} >= {n} classes; one round of top-up cannot close it"
        )));
    }
    let mut out = counts.to_vec();
    for item in out.iter_mut().take(residual + 1).skip(1) {
        *item += 1;
    }
    Ok(out)
}

/// Reversed exponential unlabeled profile: `M_i = round(M0 * gamma^{-(n-i)/(n-1)})`
/// for 1-based `i`; ascending in class index when `gamma > 1`.
pub fn unlabeled_counts_reversed(m0: usize, gamma: f64, n: usize) -> Vec<usize> {
    let mut counts = profile_counts(m0, gamma, n, false);
    counts.reverse();
    counts
}

/// DARP per-class counts for both splits.
pub fn darp_counts(
    n1: usize,
    m1: usize,
    gamma_l: f64,
    gamma_u: f64,
    n: usize,
    reversed: bool,
) -> SplitCounts {
    let labeled_per_class = profile_counts(n1, gamma_l, n, false);
    let unlabeled_per_class = if reversed {
        unlabeled_counts_reversed(m1, gamma_u, n)
    } else {
        profile_counts(m1, gamma_u, n, false)
    };
    SplitCounts {
        labeled_per_class,
        unlabeled_per_class,
    }
}

/// Splits `total` as evenly as possible, extra items going to the lowest
/// class indices.
pub fn even_split(total: usize, n: usize) -> Vec<usize> {
    let base = total / n;
    let rem = total % n;
    (0..n).map(|i| base + usize::from(i < rem)).collect()
}

/// Resolves a [`DatasetSpec`] into per-class counts.
pub fn split_counts(spec: &DatasetSpec) -> Result<SplitCounts> {
    spec.validate()?;
    let n = spec.n;
    match &spec.protocol {
        Protocol::Matched { labels } => Ok(SplitCounts {
            labeled_per_class: even_split(*labels, n),
            unlabeled_per_class: vec![spec.m0; n],
        }),
        Protocol::ImbalancedLabeled { n0, labels } => {
            let (_, raw) = gamma_search(*labels, *n0, n)?;
            Ok(SplitCounts {
                labeled_per_class: top_up(&raw, *labels)?,
                unlabeled_per_class: vec![spec.m0; n],
            })
        }
        Protocol::MismatchedBoth { n0, labels, gamma } => {
            let (_, raw) = gamma_search(*labels, *n0, n)?;
            Ok(SplitCounts {
                labeled_per_class: top_up(&raw, *labels)?,
                unlabeled_per_class: unlabeled_counts_reversed(spec.m0, *gamma, n),
            })
        }
        Protocol::BalancedLabeledImbalancedUnlabeled { labels, gamma } => Ok(SplitCounts {
            labeled_per_class: even_split(*labels, n),
            unlabeled_per_class: unlabeled_counts_reversed(spec.m0, *gamma, n),
        }),
        Protocol::Darp {
            n1,
            m1,
            gamma_l,
            gamma_u,
            reversed,
        } => Ok(darp_counts(*n1, *m1, *gamma_l, *gamma_u, n, *reversed)),
    }
}
