//! Exact distribution computation by enumeration: hidden-state enumeration
//! of the Bayesian factorization, and live-edge enumeration with reachability
//! as an independent oracle.
//!
//! Both engines produce identical results for every thread count: the work is
//! split at fixed chunk boundaries and partial sums are folded in chunk order
//! with compensated summation.

use crate::dist::{kahan_sum, DistSource, EngineError, ObservedDistribution};
use crate::model::CausalIcModel;

/// Tuning knobs for the enumeration engines.
#[derive(Debug, Clone, Copy)]
pub struct EngineOptions {
    /// Maximum enumeration bits (|U|+|V| for the joint engine, |U|+|E| for
    /// live-edge) before refusing to run.
    pub size_guard: u32,
    /// Force the sequential path even when the `parallel` feature is on.
    pub sequential: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        // 2^24 evaluations is seconds-scale; beyond that callers should sample.
        EngineOptions { size_guard: 24, sequential: false }
    }
}

/// Probability that `node` activates given its parents' states.
/// Entries for non-parents may be `None`; parent entries must be assigned.
pub fn activation_probability(
    model: &CausalIcModel,
    node: usize,
    observed_states: &[Option<bool>],
    hidden_states: &[Option<bool>],
) -> Result<f64, EngineError> {
    let mut fail = 1.0;
    for &(a, b, p) in model.vv_edges() {
        if b != node {
            continue;
        }
        match observed_states.get(a).copied().flatten() {
            Some(true) => fail *= 1.0 - p,
            Some(false) => {}
            None => return Err(EngineError::UnassignedParent(a)),
        }
    }
    for &(u, b, q) in model.uv_edges() {
        if b != node {
            continue;
        }
        match hidden_states.get(u).copied().flatten() {
            Some(true) => fail *= 1.0 - q,
            Some(false) => {}
            None => return Err(EngineError::UnassignedParent(u)),
        }
    }
    Ok(1.0 - fail)
}

/// Exact observed joint distribution by enumeration over hidden states,
/// with default options.
pub fn exact_joint(model: &CausalIcModel) -> Result<ObservedDistribution, EngineError> {
    exact_joint_with(model, &EngineOptions::default())
}

/// Exact observed joint distribution with explicit options.
///
/// Hidden nodes with at most one outgoing edge are folded into per-node
/// source probabilities first, so a model with only private confounders
/// enumerates 2^n states rather than 2^(2n).
pub fn exact_joint_with(
    model: &CausalIcModel,
    opts: &EngineOptions,
) -> Result<ObservedDistribution, EngineError> {
    let report = model.validate();
    if !report.ok {
        return Err(EngineError::InvalidModel(report.to_string()));
    }
    if model.vv_edges().iter().any(|&(a, b, _)| a >= b) {
        return Err(EngineError::CyclicModel);
    }
    let n = model.n();
    let bits = (model.n_hidden() + n) as u32;
    if bits > opts.size_guard {
        return Err(EngineError::SizeGuardExceeded { bits, limit: opts.size_guard });
    }

    // Fold hidden nodes with out-degree <= 1 into per-node failure factors.
    let mut out_degree = vec![0usize; model.n_hidden()];
    for &(u, _, _) in model.uv_edges() {
        out_degree[u] += 1;
    }
    let mut src_fail = vec![1.0f64; n];
    let mut kept = Vec::new(); // indices of hidden nodes that stay enumerated
    for (u, &(_, _)) in model.hidden_nodes().iter().map(|(s, r)| (s, r)).enumerate() {
        let _ = u;
    }
    for (u, &deg) in out_degree.iter().enumerate() {
        if deg <= 1 {
            // An inactive or absent confounder contributes nothing; folding is exact.
            for &(h, b, q) in model.uv_edges() {
                if h == u {
                    src_fail[b] *= 1.0 - model.hidden_nodes()[u].1 * q;
                }
            }
        } else {
            kept.push(u);
        }
    }
    let kept_r: Vec<f64> = kept.iter().map(|&u| model.hidden_nodes()[u].1).collect();
    // For each node, q-edges from kept hidden nodes as (kept position, q).
    let mut kept_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(u, b, q) in model.uv_edges() {
        if let Some(pos) = kept.iter().position(|&k| k == u) {
            kept_edges[b].push((pos, q));
        }
    }
    let obs_parents = model.observed_parents();

    let entry = |v: usize| -> f64 {
        let active = |i: usize| (v >> (n - 1 - i)) & 1 == 1;
        let mut obs_fail = src_fail.clone();
        for i in 0..n {
            for &(j, p) in &obs_parents[i] {
                if active(j) {
                    obs_fail[i] *= 1.0 - p;
                }
            }
        }
        // Sum over kept-hidden configurations, ascending, compensated.
        kahan_sum((0..1usize << kept_r.len()).map(|h| {
            let mut w = 1.0;
            for (k, &r) in kept_r.iter().enumerate() {
                w *= if (h >> k) & 1 == 1 { r } else { 1.0 - r };
            }
            if w == 0.0 {
                return 0.0;
            }
            let mut prob = w;
            for i in 0..n {
                let mut fail = obs_fail[i];
                for &(k, q) in &kept_edges[i] {
                    if (h >> k) & 1 == 1 {
                        fail *= 1.0 - q;
                    }
                }
                prob *= if active(i) { 1.0 - fail } else { fail };
            }
            prob
        }))
    };

    let size = 1usize << n;
    let mut probs = vec![0.0f64; size];
    fill_indexed(&mut probs, opts, &entry);
    Ok(ObservedDistribution::from_dense(n, probs, DistSource::Exact))
}

/// Exact distribution by live-edge enumeration: every edge is independently
/// live with its probability, every hidden node active with probability r,
/// and the final active set is everything reachable from the seeds and the
/// active hidden nodes through live edges. Cycles are permitted.
pub fn live_edge_exact(
    model: &CausalIcModel,
    seeds: &[usize],
) -> Result<ObservedDistribution, EngineError> {
    live_edge_exact_with(model, seeds, &EngineOptions::default())
}

/// Live-edge enumeration with explicit options.
pub fn live_edge_exact_with(
    model: &CausalIcModel,
    seeds: &[usize],
    opts: &EngineOptions,
) -> Result<ObservedDistribution, EngineError> {
    let report = model.validate();
    if !report.ok {
        return Err(EngineError::InvalidModel(report.to_string()));
    }
    let n = model.n();
    let nh = model.n_hidden();
    let nvv = model.vv_edges().len();
    let nuv = model.uv_edges().len();
    let bits = (nh + nvv + nuv) as u32;
    if bits > opts.size_guard {
        return Err(EngineError::SizeGuardExceeded { bits, limit: opts.size_guard });
    }

    let vv: Vec<(usize, usize, f64)> = model.vv_edges().to_vec();
    let uv: Vec<(usize, usize, f64)> = model.uv_edges().to_vec();
    let hidden_r: Vec<f64> = model.hidden_nodes().iter().map(|(_, r)| *r).collect();

    // Outcome bit layout: [hidden][vv liveness][uv liveness], low bits first.
    let outcome_weight_and_final = |o: usize| -> (f64, usize) {
        let mut w = 1.0;
        for (k, &r) in hidden_r.iter().enumerate() {
            w *= if (o >> k) & 1 == 1 { r } else { 1.0 - r };
        }
        for (k, &(_, _, p)) in vv.iter().enumerate() {
            w *= if (o >> (nh + k)) & 1 == 1 { p } else { 1.0 - p };
        }
        for (k, &(_, _, q)) in uv.iter().enumerate() {
            w *= if (o >> (nh + nvv + k)) & 1 == 1 { q } else { 1.0 - q };
        }
        if w == 0.0 {
            return (0.0, 0);
        }
        // Reachability from seeds and hidden-activated entry points.
        let mut active = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for &s in seeds {
            if !active[s] {
                active[s] = true;
                stack.push(s);
            }
        }
        for (k, &(u, b, _)) in uv.iter().enumerate() {
            if (o >> k) & 1 == 1 && (o >> (nh + nvv + k)) & 1 == 1 && !active[b] {
                let _ = u;
                active[b] = true;
                stack.push(b);
            }
        }
        while let Some(a) = stack.pop() {
            for (k, &(from, to, _)) in vv.iter().enumerate() {
                if from == a && (o >> (nh + k)) & 1 == 1 && !active[to] {
                    active[to] = true;
                    stack.push(to);
                }
            }
        }
        let mut idx = 0usize;
        for i in 0..n {
            idx = (idx << 1) | active[i] as usize;
        }
        (w, idx)
    };

    let size = 1usize << n;
    let outcomes = 1usize << bits;
    let chunk = scatter_chunk_size(outcomes, n);
    let ranges: Vec<(usize, usize)> = (0..outcomes)
        .step_by(chunk)
        .map(|s| (s, (s + chunk).min(outcomes)))
        .collect();
    let accumulate = |&(lo, hi): &(usize, usize)| -> Vec<f64> {
        let mut acc = vec![0.0f64; size];
        let mut comp = vec![0.0f64; size];
        for o in lo..hi {
            let (w, idx) = outcome_weight_and_final(o);
            if w == 0.0 {
                continue;
            }
            let y = w - comp[idx];
            let t = acc[idx] + y;
            comp[idx] = (t - acc[idx]) - y;
            acc[idx] = t;
        }
        acc
    };

    let partials: Vec<Vec<f64>> = run_chunks(&ranges, opts, &accumulate);
    // Fold partial vectors in chunk order; boundaries are thread-count independent.
    let mut probs = vec![0.0f64; size];
    let mut comp = vec![0.0f64; size];
    for part in &partials {
        for (i, &x) in part.iter().enumerate() {
            let y = x - comp[i];
            let t = probs[i] + y;
            comp[i] = (t - probs[i]) - y;
            probs[i] = t;
        }
    }
    Ok(ObservedDistribution::from_dense(n, probs, DistSource::LiveEdge))
}

/// Hidden-bit uv-edge check needs the hidden node active AND the edge live;
/// the closure above indexes hidden activation by the edge's hidden node.
fn scatter_chunk_size(outcomes: usize, n: usize) -> usize {
    // Cap partial-vector memory: at most 256 chunks, at least 2^12 outcomes each.
    let min_chunk = 1usize << 12;
    let by_count = outcomes.div_ceil(256);
    by_count.max(min_chunk).max(if n > 14 { outcomes } else { 1 })
}

#[cfg(feature = "parallel")]
fn fill_indexed(out: &mut [f64], opts: &EngineOptions, entry: &(dyn Fn(usize) -> f64 + Sync)) {
    use rayon::prelude::*;
    if opts.sequential {
        for (v, slot) in out.iter_mut().enumerate() {
            *slot = entry(v);
        }
        return;
    }
    out.par_iter_mut().enumerate().for_each(|(v, slot)| {
        *slot = entry(v);
    });
}

#[cfg(not(feature = "parallel"))]
fn fill_indexed(out: &mut [f64], _opts: &EngineOptions, entry: &(dyn Fn(usize) -> f64 + Sync)) {
    for (v, slot) in out.iter_mut().enumerate() {
        *slot = entry(v);
    }
}

#[cfg(feature = "parallel")]
fn run_chunks(
    ranges: &[(usize, usize)],
    opts: &EngineOptions,
    work: &(dyn Fn(&(usize, usize)) -> Vec<f64> + Sync),
) -> Vec<Vec<f64>> {
    use rayon::prelude::*;
    if opts.sequential {
        return ranges.iter().map(work).collect();
    }
    ranges.par_iter().map(work).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_chunks(
    ranges: &[(usize, usize)],
    _opts: &EngineOptions,
    work: &(dyn Fn(&(usize, usize)) -> Vec<f64> + Sync),
) -> Vec<Vec<f64>> {
    ranges.iter().map(work).collect()
}
