//! Probability distributions over full observed-state assignments, with
//! marginal and conditional queries and the CSV interchange format.

use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

/// Errors from the exact engines and distribution queries.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("state space needs {bits} enumeration bits, above the guard of {limit}; \
             raise the guard to run anyway")]
    SizeGuardExceeded { bits: u32, limit: u32 },
    #[error("conditioning event has probability {mass:e}, treated as zero")]
    ZeroConditioningEvent { mass: f64 },
    #[error("model contains a cycle; only the unrolled evaluation supports cycles")]
    CyclicModel,
    #[error("model failed validation: {0}")]
    InvalidModel(String),
    #[error("parent state not assigned for node index {0}")]
    UnassignedParent(usize),
}

/// Where a distribution's numbers came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistSource {
    /// Hidden-state enumeration of the Bayesian factorization.
    Exact,
    /// Edge-liveness enumeration with reachability.
    LiveEdge,
    /// Frequencies from sampled cascades.
    Empirical { samples: u64 },
}

/// Turns an assignment given as bits (index 0 = first observed node) into the
/// dense index used by [`ObservedDistribution`]. The first node is the most
/// significant bit, so ascending index order equals ascending bit-string order.
pub fn index_of_bits(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize)
}

/// Inverse of [`index_of_bits`] for an `n`-node assignment.
pub fn bits_of_index(idx: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (idx >> (n - 1 - i)) & 1 == 1).collect()
}

/// A probability map over all 2^n full assignments of the observed nodes.
///
/// Query methods count invocations so tests can assert query budgets.
#[derive(Debug)]
pub struct ObservedDistribution {
    n: usize,
    probs: Vec<f64>,
    source: DistSource,
    queries: AtomicU64,
}

impl Clone for ObservedDistribution {
    fn clone(&self) -> Self {
        ObservedDistribution {
            n: self.n,
            probs: self.probs.clone(),
            source: self.source,
            queries: AtomicU64::new(0),
        }
    }
}

impl ObservedDistribution {
    /// Wraps a dense probability vector of length 2^n.
    pub fn from_dense(n: usize, probs: Vec<f64>, source: DistSource) -> Self {
        assert_eq!(probs.len(), 1usize << n, "need one entry per assignment");
        ObservedDistribution { n, probs, source, queries: AtomicU64::new(0) }
    }

    /// Number of observed nodes.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Provenance tag.
    pub fn source(&self) -> DistSource {
        self.source
    }

    /// Probability of one full assignment by dense index.
    pub fn atom(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    /// The dense probability vector, index order per [`index_of_bits`].
    pub fn dense(&self) -> &[f64] {
        &self.probs
    }

    /// Total mass (compensated sum). Exact sources keep this within 1e-12 of 1.
    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.probs.iter().copied())
    }

    /// Number of marginal/conditional queries served so far.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// P(V_0 = bits[0], ..., V_{L-1} = bits[L-1]) for a prefix of length L.
    /// Prefix blocks are contiguous in the dense order, so this is one slice sum.
    pub fn prefix_marginal(&self, bits: &[bool]) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let l = bits.len();
        assert!(l <= self.n, "prefix longer than the node count");
        let width = self.n - l;
        let start = index_of_bits(bits) << width;
        kahan_sum(self.probs[start..start + (1 << width)].iter().copied())
    }

    /// Marginal probability of a partial assignment given as (node, state) pairs.
    pub fn marginal(&self, partial: &[(usize, bool)]) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        let mut mask = 0usize;
        let mut value = 0usize;
        for &(node, bit) in partial {
            assert!(node < self.n, "node index out of range");
            let pos = 1usize << (self.n - 1 - node);
            if mask & pos != 0 {
                let prev = value & pos != 0;
                if prev != bit {
                    return 0.0; // contradictory pattern has no mass
                }
                continue;
            }
            mask |= pos;
            if bit {
                value |= pos;
            }
        }
        let free: Vec<usize> = (0..self.n)
            .map(|i| 1usize << (self.n - 1 - i))
            .filter(|pos| mask & pos == 0)
            .collect();
        let mut sum = 0.0;
        let mut comp = 0.0;
        for combo in 0..(1usize << free.len()) {
            let mut idx = value;
            for (b, pos) in free.iter().enumerate() {
                if (combo >> b) & 1 == 1 {
                    idx |= pos;
                }
            }
            let y = self.probs[idx] - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    /// P(target | given) = marginal(target and given) / marginal(given).
    pub fn conditional(
        &self,
        target: &[(usize, bool)],
        given: &[(usize, bool)],
    ) -> Result<f64, EngineError> {
        let denom = self.marginal(given);
        if denom <= 1e-300 {
            return Err(EngineError::ZeroConditioningEvent { mass: denom });
        }
        let mut joint: Vec<(usize, bool)> = target.to_vec();
        joint.extend_from_slice(given);
        Ok(self.marginal(&joint) / denom)
    }

    /// Writes the CSV interchange format: header `assignment,probability`,
    /// rows in ascending bit-string order, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "assignment,probability")?;
        for idx in 0..self.probs.len() {
            let bits: String = bits_of_index(idx, self.n)
                .into_iter()
                .map(|b| if b { '1' } else { '0' })
                .collect();
            writeln!(w, "{bits},{}", fmt_probability(self.probs[idx]))?;
        }
        Ok(())
    }

    /// Largest absolute atom difference against another distribution.
    pub fn linf_gap(&self, other: &ObservedDistribution) -> f64 {
        assert_eq!(self.n, other.n, "distributions over different node counts");
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Formats a probability with 17 significant digits (lossless f64 round-trip).
pub fn fmt_probability(x: f64) -> String {
    format!("{x:.16e}")
}

/// Compensated (Kahan) summation in iteration order.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}
