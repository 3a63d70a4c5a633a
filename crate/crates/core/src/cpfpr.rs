//! Expected false-positive rate of prefix-filter designs, and design
//! selection from a sample of empty queries.
//!
//! A query's false-positive probability depends on three things: how many
//! prefixes the filter has to probe, the Bloom filter's point FPR, and how
//! close the query comes to the key set (`lcp(Q, K)`). Once `lcp(Q, K)`
//! reaches the Bloom prefix length, some probed prefix is shared with a key
//! and the query is a guaranteed false positive.
//!
//! [`Model`] gathers per-key prefix counts and per-query proximity once and
//! then prices any design at any budget. Proteus and single-filter designs
//! are priced through exponentially sized bins of probe counts; two-filter
//! designs are priced query by query.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bloom;
use crate::filters::{DesignPoint, Family, Split};
use crate::keyspace::{region_distance, EndpointAnalysis, Key, KeyError, Proximity, RangeQuery};
use crate::trie;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("the key set is empty")]
    EmptyKeySet,
    #[error("the sample holds no queries")]
    EmptySample,
    #[error("sample query {index} intersects the key set")]
    NotEmpty { index: usize },
    #[error("no design of this family fits in {budget} bits")]
    Infeasible { budget: u64 },
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// `counts[l] = |K_l|`, the number of distinct `l`-bit key prefixes, for
/// `l` in `0..=k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPrefixCounts {
    counts: Vec<u64>,
}

impl KeyPrefixCounts {
    /// One pass over adjacent LCPs of sorted keys; duplicates are fine.
    pub fn from_sorted_keys<K: Key>(keys: &[K]) -> Result<Self, ModelError> {
        let first = keys.first().ok_or(ModelError::EmptyKeySet)?;
        let width = first.width();
        let mut hist = vec![0u64; width as usize + 1];
        for w in keys.windows(2) {
            match w[0].cmp(&w[1]) {
                Ordering::Less => hist[w[0].lcp(&w[1]) as usize] += 1,
                Ordering::Equal => {}
                Ordering::Greater => {
                    return Err(ModelError::InvalidDesign("keys must be sorted".into()))
                }
            }
        }
        let mut counts = Vec::with_capacity(width as usize + 1);
        let mut acc = 1u64;
        for h in hist {
            counts.push(acc);
            acc += h;
        }
        Ok(KeyPrefixCounts { counts })
    }

    pub fn get(&self, len: u32) -> u64 {
        self.counts[len as usize]
    }

    pub fn width(&self) -> u32 {
        self.counts.len() as u32 - 1
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }
}

pub fn count_key_prefixes<K: Key>(keys: &[K]) -> Result<KeyPrefixCounts, ModelError> {
    KeyPrefixCounts::from_sorted_keys(keys)
}

/// Upper-bound estimate of a depth-`l1` trie over the keys (0 for no trie).
pub fn trie_mem(l1: u32, counts: &KeyPrefixCounts) -> u64 {
    trie::estimate_bits(l1, counts.as_slice())
}

/// An empty sample query and its proximity to the key set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryStats<K> {
    pub query: RangeQuery<K>,
    pub proximity: Proximity,
}

impl<K: Key> QueryStats<K> {
    /// `lcp(Q, K)`.
    pub fn lcp(&self) -> u32 {
        self.proximity.lcp
    }

    /// `|Q_l|`, saturating.
    pub fn prefix_count(&self, len: u32) -> u128 {
        region_distance(self.query.left(), self.query.right(), len).saturating_add(1)
    }

    /// End-region geometry for `l1 < l2` (`l1 == 0` is one region).
    pub fn endpoints(&self, l1: u32, l2: u32) -> EndpointAnalysis {
        EndpointAnalysis::compute(
            &self.query,
            l1,
            l2,
            self.proximity.first_present(l1),
            self.proximity.last_present(l1),
        )
    }

    /// Bloom probes a depth-`l1` trie forwards at length `l2`.
    pub fn regions_queried(&self, l1: u32, l2: u32) -> u128 {
        self.endpoints(l1, l2).regions_queried()
    }
}

/// Proximity of every sample query, in sample order. Queries are visited
/// in order of their left bound so the key cursor only moves forward.
pub fn query_stats<K: Key>(
    sorted_keys: &[K],
    sample: &[RangeQuery<K>],
) -> Result<Vec<QueryStats<K>>, ModelError> {
    let mut order: Vec<usize> = (0..sample.len()).collect();
    order.sort_by(|&a, &b| sample[a].left().cmp(sample[b].left()));
    let mut proximity = vec![None; sample.len()];
    let mut cursor = 0usize;
    for &i in &order {
        let q = &sample[i];
        while cursor < sorted_keys.len() && sorted_keys[cursor] < *q.left() {
            cursor += 1;
        }
        if cursor < sorted_keys.len() && sorted_keys[cursor] <= *q.right() {
            return Err(ModelError::NotEmpty { index: i });
        }
        let pred = cursor.checked_sub(1).map(|j| &sorted_keys[j]);
        proximity[i] = Some(Proximity::from_neighbors(q, pred, sorted_keys.get(cursor)));
    }
    Ok(sample
        .iter()
        .zip(proximity)
        .map(|(q, p)| QueryStats {
            query: q.clone(),
            proximity: p.expect("every query visited"),
        })
        .collect())
}

/// `1 - (1 - p)^n` without cancellation; 0 probes never collide.
pub fn any_collision(p: f64, n: f64) -> f64 {
    if n <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    -(n * (-p).ln_1p()).exp_m1()
}

/// `(1 - p)^n` for possibly huge `n`.
fn no_collision(p: f64, n: f64) -> f64 {
    1.0 - any_collision(p, n)
}

/// Bloom point FPR for `m` bits holding `n` prefixes.
pub fn bloom_fpr(m: u64, n: u64) -> f64 {
    bloom::plan(m, n.max(1)).map(|p| p.fpr).unwrap_or(1.0)
}

/// Single prefix filter at length `l`: 1 once `l <= lcp(Q, K)`, otherwise
/// the chance that one of the `|Q_l|` probes collides.
pub fn fpr_1pbf<K: Key>(qs: &QueryStats<K>, l: u32, p: f64) -> f64 {
    if l <= qs.lcp() {
        1.0
    } else {
        any_collision(p, qs.prefix_count(l) as f64)
    }
}

/// Trie of depth `l1` over a Bloom filter at `l2` (`l2 == 0`: trie only).
/// 0 when the trie rules the query out (`lcp < l1`), 1 when a probed
/// prefix is shared with a key (`l2 <= lcp`), otherwise the chance that one
/// of the forwarded probes collides.
pub fn fpr_proteus<K: Key>(qs: &QueryStats<K>, l1: u32, l2: u32, p: f64) -> f64 {
    let lcp = qs.lcp();
    if l1 > 0 && lcp < l1 {
        return 0.0;
    }
    if l2 == 0 || l2 <= lcp {
        return 1.0;
    }
    any_collision(p, qs.regions_queried(l1, l2) as f64)
}

/// How the two-filter formula combines its end-region and interior terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TwoFilterForm {
    /// The published additive form: `1 - p̄L - p̄R - Σ P(i)(1-p2)^(i·2^Δ)`,
    /// with `p̄L = p1^I2 · I0 · (1-p2)^|L|`, where `I2` marks a first prefix
    /// *absent* from the key set, except that a single region holding a
    /// key prefix takes `I2 = 1, I3 = 0`. Clamped to `[0, 1]`.
    #[default]
    Verbatim,
    /// Product of independent per-region negative probabilities.
    Independent,
}

/// Number of interior regions up to which the binomial sum is evaluated
/// term by term; larger counts use the binomial theorem.
const BINOMIAL_TERMS_LIMIT: u128 = 64;

/// `Σ_i C(n,i) p1^i (1-p1)^(n-i) q^i` with `q = (1-p2)^(2^Δ)`.
fn interior_negative(n: u128, p1: f64, q: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n > BINOMIAL_TERMS_LIMIT || p1 <= 0.0 || p1 >= 1.0 {
        // binomial theorem: (1 - p1 + p1 q)^n
        let base = 1.0 - p1 + p1 * q;
        return if base <= 0.0 {
            0.0
        } else {
            (n as f64 * base.ln()).exp()
        };
    }
    let n_f = n as f64;
    let (lp, lq) = (p1.ln(), (-p1).ln_1p());
    let log_fact = |x: f64| libm::lgamma(x + 1.0);
    let mut total = 0.0;
    for i in 0..=n as u64 {
        let i_f = i as f64;
        let log_pmf = log_fact(n_f) - log_fact(i_f) - log_fact(n_f - i_f) + i_f * lp + (n_f - i_f) * lq;
        let weight = if i == 0 { 1.0 } else { q.powf(i_f) };
        total += log_pmf.exp() * weight;
    }
    total
}

/// Two prefix Bloom filters at `l1 < l2` with point FPRs `p1`, `p2`.
pub fn fpr_2pbf<K: Key>(
    qs: &QueryStats<K>,
    l1: u32,
    l2: u32,
    p1: f64,
    p2: f64,
    form: TwoFilterForm,
) -> f64 {
    if l2 <= qs.lcp() {
        return 1.0;
    }
    let e = qs.endpoints(l1, l2);
    let q1 = qs.prefix_count(l1);
    let interior = q1 - e.i0 as u128 - e.i1 as u128;
    let span = l2 - l1;
    let per_region = if span >= 1024 {
        if p2 > 0.0 { 0.0 } else { 1.0 }
    } else {
        no_collision(p2, 2f64.powi(span as i32))
    };
    let sum = interior_negative(interior, p1, per_region);
    let (l_neg, r_neg) = (
        no_collision(p2, e.left_size as f64),
        no_collision(p2, e.right_size as f64),
    );
    match form {
        TwoFilterForm::Verbatim => {
            let (i2, i3) = if e.single_region && e.i2 {
                (true, false)
            } else {
                (!e.i2, !e.i3)
            };
            let ind = |b: bool| if b { 1.0 } else { 0.0 };
            let pl = p1.powf(ind(i2)) * ind(e.i0) * l_neg;
            let pr = p1.powf(ind(i3)) * ind(e.i1) * r_neg;
            (1.0 - pl - pr - sum).clamp(0.0, 1.0)
        }
        TwoFilterForm::Independent => {
            // a partial end region passes the first filter outright when it
            // holds a key prefix, otherwise with probability p1
            let end = |partial: bool, present: bool, neg: f64| match (partial, present) {
                (false, _) => 1.0,
                (true, true) => neg,
                (true, false) => (1.0 - p1) + p1 * neg,
            };
            let left = end(e.i0, e.i2, l_neg);
            let right = end(e.i1, e.i3, r_neg);
            (1.0 - left * right * sum).clamp(0.0, 1.0)
        }
    }
}

/// Probe counts of a sample under one trie/Bloom design, in exponentially
/// sized bins: slot `b >= 1` holds queries with `n` probes in
/// `[2^(b-1), 2^b)`; slot 0 holds queries the trie resolves outright.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryBins {
    /// Queries with `lcp < l1`.
    pub trie_resolved: u64,
    /// Queries with `l2 <= lcp`, which always collide.
    pub guaranteed: u64,
    /// `(count, sum of probe counts)` per slot.
    pub bins: Vec<(u64, f64)>,
    pub sample_size: u64,
}

impl QueryBins {
    /// `ceil(log2(n + 1))`.
    pub fn bin_index(n: u128) -> usize {
        (128 - n.leading_zeros()) as usize
    }

    /// Bins `stats` for a depth-`l1` trie (0 = none) and Bloom length `l2`.
    pub fn collect<K: Key>(stats: &[QueryStats<K>], l1: u32, l2: u32) -> Self {
        let width = stats.first().map_or(64, |s| s.query.width());
        let mut out = QueryBins {
            trie_resolved: 0,
            guaranteed: 0,
            bins: vec![(0, 0.0); width as usize + 2],
            sample_size: stats.len() as u64,
        };
        for qs in stats {
            let lcp = qs.lcp();
            if l1 > 0 && lcp < l1 {
                out.trie_resolved += 1;
                out.bins[0].0 += 1;
            } else if l2 <= lcp {
                out.guaranteed += 1;
            } else {
                let n = qs.regions_queried(l1, l2);
                let slot = &mut out.bins[Self::bin_index(n).min(width as usize + 1)];
                slot.0 += 1;
                slot.1 += n as f64;
            }
        }
        out
    }

    /// Mean FPR over the sample with Bloom point FPR `p`, summing bins in
    /// index order so the result is reproducible.
    pub fn mean_fpr(&self, p: f64) -> f64 {
        if self.sample_size == 0 {
            return 0.0;
        }
        let mut total = self.guaranteed as f64;
        for &(count, sum) in &self.bins[1..] {
            if count > 0 {
                total += count as f64 * any_collision(p, sum / count as f64);
            }
        }
        total / self.sample_size as f64
    }
}

pub fn bin_queries<K: Key>(stats: &[QueryStats<K>], l1: u32, l2: u32) -> QueryBins {
    QueryBins::collect(stats, l1, l2)
}

/// Which design wins when two have the same expected FPR.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieRule {
    /// `<=`: the later-enumerated design (deeper trie, longer prefix) wins.
    #[default]
    PreferLater,
    /// `<`: the first design found keeps the spot.
    PreferEarlier,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelOptions {
    pub tie: TieRule,
    /// Price trie/Bloom designs through bins (otherwise query by query).
    pub binned: bool,
    pub two_filter_form: TwoFilterForm,
    /// Thin Bloom prefix lengths to this many evenly spaced candidates when
    /// the key width is larger.
    pub bloom_len_candidates: Option<u32>,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            tie: TieRule::PreferLater,
            binned: true,
            two_filter_form: TwoFilterForm::Verbatim,
            bloom_len_candidates: None,
        }
    }
}

/// Outcome of a design search.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelVerdict {
    pub chosen: DesignPoint,
    pub expected_fpr: f64,
    /// Every priced design in enumeration order.
    pub per_design: Vec<(DesignPoint, f64)>,
}

/// Key-set and sample statistics, ready to price designs.
#[derive(Clone, Debug)]
pub struct Model<K> {
    counts: KeyPrefixCounts,
    stats: Vec<QueryStats<K>>,
}

impl<K: Key> Model<K> {
    pub fn new(sorted_keys: &[K], sample: &[RangeQuery<K>]) -> Result<Self, ModelError> {
        let counts = KeyPrefixCounts::from_sorted_keys(sorted_keys)?;
        if sample.is_empty() {
            return Err(ModelError::EmptySample);
        }
        let width = counts.width();
        if let Some(q) = sample.iter().find(|q| q.width() != width) {
            return Err(KeyError::WidthMismatch(width, q.width()).into());
        }
        Ok(Model {
            counts,
            stats: query_stats(sorted_keys, sample)?,
        })
    }

    pub fn counts(&self) -> &KeyPrefixCounts {
        &self.counts
    }

    pub fn stats(&self) -> &[QueryStats<K>] {
        &self.stats
    }

    pub fn width(&self) -> u32 {
        self.counts.width()
    }

    /// Expected FPR of `design` at `budget` bits.
    pub fn predict(&self, design: DesignPoint, budget: u64, opts: &ModelOptions) -> Result<f64, ModelError> {
        design
            .validate(self.width())
            .map_err(|e| ModelError::InvalidDesign(e.to_string()))?;
        match design {
            DesignPoint::Pbf1 { prefix_len } => Ok(self.trie_bloom_fpr(0, prefix_len, budget, opts)),
            DesignPoint::Proteus {
                trie_depth,
                bloom_len,
            } => {
                if trie_mem(trie_depth, &self.counts) > budget {
                    return Err(ModelError::Infeasible { budget });
                }
                Ok(self.trie_bloom_fpr(trie_depth, bloom_len, budget, opts))
            }
            DesignPoint::Pbf2 {
                short_len,
                long_len,
                split,
            } => Ok(self.two_filter_fpr(short_len, long_len, split, budget, opts.two_filter_form)),
        }
    }

    fn trie_bloom_fpr(&self, l1: u32, l2: u32, budget: u64, opts: &ModelOptions) -> f64 {
        let n = self.stats.len() as f64;
        if l2 == 0 {
            let resolved = self.stats.iter().filter(|s| s.lcp() < l1).count() as f64;
            return 1.0 - resolved / n;
        }
        let p = bloom_fpr(budget - trie_mem(l1, &self.counts), self.counts.get(l2));
        if opts.binned {
            QueryBins::collect(&self.stats, l1, l2).mean_fpr(p)
        } else {
            self.stats.iter().map(|s| fpr_proteus(s, l1, l2, p)).sum::<f64>() / n
        }
    }

    fn two_filter_fpr(&self, l1: u32, l2: u32, split: Split, budget: u64, form: TwoFilterForm) -> f64 {
        let (m1, m2) = split.allocate(budget);
        let p1 = bloom_fpr(m1, self.counts.get(l1));
        let p2 = bloom_fpr(m2, self.counts.get(l2));
        self.stats
            .iter()
            .map(|s| fpr_2pbf(s, l1, l2, p1, p2, form))
            .sum::<f64>()
            / self.stats.len() as f64
    }

    /// Bloom lengths above `l1` to consider.
    fn bloom_lengths(&self, l1: u32, opts: &ModelOptions) -> Vec<u32> {
        let k = self.width();
        match opts.bloom_len_candidates {
            Some(c) if c > 0 && k > c => {
                let mut v: Vec<u32> = (1..=c)
                    .map(|i| ((i as f64 * k as f64 / c as f64).round() as u32).clamp(1, k))
                    .filter(|&l| l > l1)
                    .collect();
                v.dedup();
                v
            }
            _ => (l1 + 1..=k).collect(),
        }
    }

    /// The family's design space in search order.
    pub fn designs(&self, family: Family, budget: u64, opts: &ModelOptions) -> Vec<DesignPoint> {
        let k = self.width();
        let mut out = Vec::new();
        match family {
            Family::Pbf1 => {
                for l in self.bloom_lengths(0, opts) {
                    out.push(DesignPoint::Pbf1 { prefix_len: l });
                }
            }
            Family::Proteus => {
                for l1 in 0..=k {
                    if trie_mem(l1, &self.counts) > budget {
                        break;
                    }
                    if l1 > 0 {
                        out.push(DesignPoint::Proteus {
                            trie_depth: l1,
                            bloom_len: 0,
                        });
                    }
                    for l2 in self.bloom_lengths(l1, opts) {
                        out.push(DesignPoint::Proteus {
                            trie_depth: l1,
                            bloom_len: l2,
                        });
                    }
                }
            }
            Family::Pbf2 => {
                for l1 in 1..k {
                    for l2 in self.bloom_lengths(l1, opts) {
                        for split in Split::ALL {
                            out.push(DesignPoint::Pbf2 {
                                short_len: l1,
                                long_len: l2,
                                split,
                            });
                        }
                    }
                }
            }
        }
        out
    }

    /// Prices every design of `family` at `budget` and picks the best.
    pub fn select(&self, family: Family, budget: u64, opts: &ModelOptions) -> Result<ModelVerdict, ModelError> {
        if budget == 0 {
            return Err(ModelError::Infeasible { budget });
        }
        let designs = self.designs(family, budget, opts);
        let per_design: Vec<(DesignPoint, f64)> = designs
            .par_iter()
            .map(|&d| {
                let fpr = self.predict(d, budget, opts).expect("enumerated designs are feasible");
                (d, fpr)
            })
            .collect();
        let mut best: Option<(DesignPoint, f64)> = None;
        for &(d, fpr) in &per_design {
            let better = match best {
                None => true,
                Some((_, b)) => match opts.tie {
                    TieRule::PreferLater => fpr <= b,
                    TieRule::PreferEarlier => fpr < b,
                },
            };
            if better {
                best = Some((d, fpr));
            }
        }
        let (chosen, expected_fpr) = best.ok_or(ModelError::Infeasible { budget })?;
        Ok(ModelVerdict {
            chosen,
            expected_fpr,
            per_design,
        })
    }
}

/// Builds a [`Model`] and searches `family` at `budget`.
pub fn select_design<K: Key>(
    sorted_keys: &[K],
    sample: &[RangeQuery<K>],
    budget: u64,
    family: Family,
    opts: &ModelOptions,
) -> Result<ModelVerdict, ModelError> {
    Model::new(sorted_keys, sample)?.select(family, budget, opts)
}

/// Probability that an `N`-query sample misestimates an FPR of at most
/// `p_max` by more than `delta`: `min(2e^(-2Nδ²), e^(-Nδ²/2p) + e^(-Nδ²/3p))`,
/// capped at 1.
pub fn chernoff_bound(n: u64, delta: f64, p_max: f64) -> f64 {
    let x = n as f64 * delta * delta;
    let hoeffding = 2.0 * (-2.0 * x).exp();
    let multiplicative = (-x / (2.0 * p_max)).exp() + (-x / (3.0 * p_max)).exp();
    hoeffding.min(multiplicative).min(1.0)
}

/// Failures before the first success of a `p`-coin, or `None` if it never
/// succeeds.
fn failures_before_success(rng: &mut ChaCha8Rng, p: f64) -> Option<f64> {
    if p <= 0.0 {
        return None;
    }
    if p >= 1.0 {
        return Some(0.0);
    }
    let u: f64 = 1.0 - rng.random::<f64>();
    Some((u.ln() / (-p).ln_1p()).floor())
}

/// Whether any of `n` independent `p`-coins comes up.
fn any_of(rng: &mut ChaCha8Rng, n: u128, p: f64) -> bool {
    n > 0 && failures_before_success(rng, p).is_some_and(|f| f < n as f64)
}

/// Monte Carlo estimate of a design's FPR on one query, treating every
/// probe of an absent prefix as an independent collision with the given
/// point FPR (`p.0` for single-Bloom designs; `(p1, p2)` for two filters).
/// Returns `(estimate, standard error)`.
pub fn mc_oracle<K: Key>(
    qs: &QueryStats<K>,
    design: DesignPoint,
    p: (f64, f64),
    trials: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prox = qs.proximity;
    let q = &qs.query;
    let mut positives = 0u64;
    match design {
        DesignPoint::Pbf1 { .. } | DesignPoint::Proteus { .. } => {
            let (l1, l2) = match design {
                DesignPoint::Pbf1 { prefix_len } => (0, prefix_len),
                _ => design.lengths(),
            };
            // regions the trie lets through, with their Bloom probe counts
            let mut passed: Vec<(bool, u128)> = Vec::new();
            let single = l1 == 0 || q.left().lcp(q.right()) >= l1;
            let q2 = |a: &K, b: &K| region_distance(a, b, l2).saturating_add(1);
            if single {
                if prox.first_present(l1) {
                    passed.push((prox.lcp >= l2 && l2 > 0, q2(q.left(), q.right())));
                }
            } else {
                if prox.first_present(l1) {
                    let end = q.left().fill_suffix(l1);
                    passed.push((prox.left_depth >= l2 && l2 > 0, q2(q.left(), &end)));
                }
                if prox.last_present(l1) {
                    let start = q.right().truncate(l1);
                    passed.push((prox.right_depth >= l2 && l2 > 0, q2(&start, q.right())));
                }
            }
            for _ in 0..trials {
                let hit = passed.iter().any(|&(shared, probes)| {
                    l2 == 0 || shared || any_of(&mut rng, probes, p.0)
                });
                positives += hit as u64;
            }
        }
        DesignPoint::Pbf2 {
            short_len: l1,
            long_len: l2,
            ..
        } => {
            let regions = region_distance(q.left(), q.right(), l1).saturating_add(1);
            let single = regions == 1;
            let first_end = q.left().fill_suffix(l1);
            let last_start = q.right().truncate(l1);
            let l_probes = region_distance(q.left(), if single { q.right() } else { &first_end }, l2).saturating_add(1);
            let r_probes = region_distance(&last_start, q.right(), l2).saturating_add(1);
            let full = 1u128.checked_shl(l2 - l1).unwrap_or(u128::MAX);
            let guaranteed = prox.lcp >= l2;
            for _ in 0..trials {
                if guaranteed {
                    positives += 1;
                    continue;
                }
                let mut hit = false;
                // first region
                let pass = prox.first_present(l1) || rng.random::<f64>() < p.0;
                if pass && any_of(&mut rng, l_probes, p.1) {
                    hit = true;
                }
                if !hit && regions > 2 {
                    // interior regions: walk the ones that pass the first
                    // filter, skipping the ones that do not
                    let interior = (regions - 2) as f64;
                    let mut pos = 0.0;
                    while let Some(skip) = failures_before_success(&mut rng, p.0) {
                        pos += skip;
                        if pos >= interior {
                            break;
                        }
                        if any_of(&mut rng, full, p.1) {
                            hit = true;
                            break;
                        }
                        pos += 1.0;
                    }
                }
                if !hit && !single {
                    let pass = prox.last_present(l1) || rng.random::<f64>() < p.0;
                    if pass && any_of(&mut rng, r_probes, p.1) {
                        hit = true;
                    }
                }
                positives += hit as u64;
            }
        }
    }
    let est = positives as f64 / trials as f64;
    (est, (est * (1.0 - est) / trials as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyspace::{IntKey, Key64};

    type K4 = IntKey<4>;

    fn k4(v: u64) -> K4 {
        K4::new(v).unwrap()
    }

    fn stats4(keys: &[u64], q: (u64, u64)) -> QueryStats<K4> {
        let keys: Vec<K4> = keys.iter().map(|&v| k4(v)).collect();
        let q = RangeQuery::new(k4(q.0), k4(q.1)).unwrap();
        query_stats(&keys, &[q]).unwrap().pop().unwrap()
    }

    #[test]
    fn prefix_counts_examples() {
        let c = count_key_prefixes(&[k4(0b0000), k4(0b0001), k4(0b1000)]).unwrap();
        assert_eq!(c.as_slice(), &[1, 2, 2, 2, 3]);
        let single = count_key_prefixes(&[k4(7)]).unwrap();
        assert_eq!(single.as_slice(), &[1; 5]);
        let all: Vec<K4> = (0..16).map(k4).collect();
        assert_eq!(count_key_prefixes(&all).unwrap().as_slice(), &[1, 2, 4, 8, 16]);
        assert_eq!(count_key_prefixes::<K4>(&[]), Err(ModelError::EmptyKeySet));
    }

    #[test]
    fn trie_mem_of_nothing_is_zero() {
        let c = count_key_prefixes(&[k4(3), k4(9)]).unwrap();
        assert_eq!(trie_mem(0, &c), 0);
        assert!(trie_mem(1, &c) > 0);
    }

    #[test]
    fn single_filter_examples() {
        // keys {0b1000}; query [1001, 1011] has lcp 3
        let qs = stats4(&[0b1000], (0b1001, 0b1011));
        assert_eq!(qs.lcp(), 3);
        assert_eq!(fpr_1pbf(&qs, 3, 0.01), 1.0);
        assert_eq!(fpr_1pbf(&qs, 4, 0.0), 0.0);
        // |Q_4| = 3 here; use a two-prefix query for the arithmetic case
        let qs = stats4(&[0b0000], (0b1100, 0b1101));
        assert_eq!(qs.prefix_count(4), 2);
        assert!((fpr_1pbf(&qs, 4, 0.5) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn trie_bloom_examples() {
        let qs = stats4(&[0b0000], (0b1100, 0b1101));
        assert_eq!(qs.lcp(), 0);
        assert_eq!(fpr_proteus(&qs, 2, 4, 0.3), 0.0);
        let qs = stats4(&[0b1000], (0b1001, 0b1011));
        assert_eq!(fpr_proteus(&qs, 1, 3, 0.3), 1.0);
        // l1 = 2 region 10 holds the key: probes 1001, 1010, 1011
        assert_eq!(qs.regions_queried(2, 4), 3);
        assert!((fpr_proteus(&qs, 2, 4, 0.1) - (1.0 - 0.9f64.powi(3))).abs() < 1e-12);
        assert_eq!(fpr_proteus(&qs, 0, 4, 0.1), fpr_1pbf(&qs, 4, 0.1));
    }

    #[test]
    fn two_filter_examples() {
        let qs = stats4(&[0b0000], (0b1100, 0b1111));
        assert_eq!(fpr_2pbf(&qs, 1, 3, 0.0, 0.0, TwoFilterForm::Verbatim), 0.0);
        assert_eq!(fpr_2pbf(&qs, 1, 3, 0.0, 0.0, TwoFilterForm::Independent), 0.0);
        let close = stats4(&[0b1000], (0b1001, 0b1011));
        assert_eq!(fpr_2pbf(&close, 1, 3, 0.2, 0.2, TwoFilterForm::Verbatim), 1.0);
    }

    #[test]
    fn binomial_sum_matches_closed_form() {
        for n in [1u128, 2, 7, 30, 64] {
            for (p1, q) in [(0.1, 0.5), (0.9, 0.01), (0.5, 0.999)] {
                let direct = interior_negative(n, p1, q);
                let closed: f64 = (1.0 - p1 + p1 * q).powf(n as f64);
                assert!((direct - closed).abs() < 1e-9, "n={n} p1={p1} q={q}");
            }
        }
        assert!(interior_negative(1 << 30, 1e-9, 0.5).is_finite());
    }

    #[test]
    fn bin_indices() {
        assert_eq!(QueryBins::bin_index(0), 0);
        assert_eq!(QueryBins::bin_index(1), 1);
        assert_eq!(QueryBins::bin_index(5), 3);
        assert_eq!(QueryBins::bin_index(7), 3);
        assert_eq!(QueryBins::bin_index(8), 4);
        let far = stats4(&[0b0000], (0b1100, 0b1101));
        let bins = bin_queries(&[far], 2, 4);
        assert_eq!(bins.trie_resolved, 1);
        assert_eq!(bins.mean_fpr(0.5), 0.0);
    }

    #[test]
    fn tiny_instance_selects_zero_fpr_trie() {
        let keys = [k4(0b1000)];
        let sample = [
            RangeQuery::new(k4(0b0000), k4(0b0011)).unwrap(),
            RangeQuery::new(k4(0b1100), k4(0b1111)).unwrap(),
        ];
        let v = select_design(&keys, &sample, 10_000, Family::Proteus, &ModelOptions::default()).unwrap();
        assert_eq!(v.expected_fpr, 0.0);
        match v.chosen {
            DesignPoint::Proteus { trie_depth, .. } => assert!(trie_depth >= 2),
            other => panic!("unexpected {other}"),
        }
        let strict = ModelOptions {
            tie: TieRule::PreferEarlier,
            ..ModelOptions::default()
        };
        let first = select_design(&keys, &sample, 10_000, Family::Proteus, &strict).unwrap();
        assert_eq!(first.expected_fpr, 0.0);
        assert!(first.per_design.iter().position(|d| d.0 == first.chosen)
            < v.per_design.iter().position(|d| d.0 == v.chosen));
    }

    #[test]
    fn sample_must_be_empty() {
        let keys = [k4(5)];
        let sample = [RangeQuery::new(k4(4), k4(6)).unwrap()];
        assert_eq!(
            Model::new(&keys, &sample).unwrap_err(),
            ModelError::NotEmpty { index: 0 }
        );
    }

    #[test]
    fn chernoff_examples() {
        let b = chernoff_bound(10_000, 0.01, 0.1);
        let direct = (2.0 * (-2.0f64).exp()).min((-0.5f64 / 0.1).exp() + (-1.0f64 / 0.3).exp());
        assert!((b - direct).abs() < 1e-15);
        assert_eq!(chernoff_bound(100, 0.0, 0.1), 1.0);
        assert!(chernoff_bound(100_000_000, 0.01, 0.1) < 1e-100);
    }

    #[test]
    fn oracle_extremes() {
        let keys: Vec<Key64> = vec![Key64::from_masked(1 << 40)];
        let q = RangeQuery::new(Key64::from_masked(5), Key64::from_masked(500)).unwrap();
        let qs = query_stats(&keys, &[q]).unwrap().pop().unwrap();
        let d = DesignPoint::Pbf1 { prefix_len: 60 };
        assert_eq!(mc_oracle(&qs, d, (0.0, 0.0), 10_000, 1).0, 0.0);
        assert_eq!(mc_oracle(&qs, d, (1.0, 0.0), 10_000, 1).0, 1.0);
    }
}
