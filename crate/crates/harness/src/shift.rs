//! LSM-lite: range-partitioned segments, one filter each, rebuilt from a
//! FIFO queue of recently executed empty queries.
//!
//! A "compaction" rebuilds one segment. Keys never change during a run, so
//! there is no most-recently-written segment to pick; compactions walk the
//! segments round-robin instead, and one full walk is a rebuild cycle.

use std::collections::{BTreeMap, VecDeque};

use protean::cpfpr::Model;
use protean::filters::{DesignPoint, Family, RangeFilter};
use protean::workloads::{gen_queries, LabeledQuery, QuerySpec};
use protean::{Key64, RangeQuery};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::{budget_bits, EvalConfig};
use crate::report::ReportRow;
use crate::HarnessError;

pub const DEFAULT_QUEUE_SIZE: usize = 20_000;
pub const DEFAULT_SAMPLE_EVERY: usize = 100;
pub const DEFAULT_SEGMENTS: usize = 16;

#[derive(Clone, Debug)]
pub struct Segment {
    /// Inclusive key-space bounds; segments tile the whole space.
    pub lo: Key64,
    pub hi: Key64,
    pub keys: Vec<Key64>,
    pub design: Option<DesignPoint>,
    filter: Option<RangeFilter<Key64>>,
}

/// Outcome of one query against the store.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StoreOutcome {
    pub positive: bool,
    pub trie_probes: u64,
    pub bloom_probes: u64,
}

#[derive(Clone, Debug)]
pub struct SegmentedStore {
    segments: Vec<Segment>,
    queue: VecDeque<RangeQuery<Key64>>,
    capacity: usize,
    sample_every: usize,
    empty_seen: u64,
    next_compaction: usize,
    family: Family,
    cfg: EvalConfig,
    rebuilds: u64,
}

impl SegmentedStore {
    /// Splits sorted distinct `keys` into `segments` runs of (nearly) equal
    /// size. Filters are built by [`SegmentedStore::rebuild_all`].
    pub fn new(
        keys: &[Key64],
        segments: usize,
        capacity: usize,
        sample_every: usize,
        family: Family,
        cfg: EvalConfig,
    ) -> Result<Self, HarnessError> {
        if segments == 0 || keys.len() < segments {
            return Err(HarnessError::Usage(format!(
                "cannot split {} keys into {segments} segments",
                keys.len()
            )));
        }
        if capacity == 0 || sample_every == 0 {
            return Err(HarnessError::Usage("queue size and sample interval must be positive".into()));
        }
        let n = keys.len();
        let starts: Vec<usize> = (0..segments).map(|i| i * n / segments).collect();
        let segs = (0..segments)
            .map(|i| {
                let end = starts.get(i + 1).copied().unwrap_or(n);
                let lo = if i == 0 { 0 } else { keys[starts[i]].value() };
                let hi = if i + 1 == segments {
                    u64::MAX
                } else {
                    keys[end].value() - 1
                };
                Segment {
                    lo: Key64::from_masked(lo),
                    hi: Key64::from_masked(hi),
                    keys: keys[starts[i]..end].to_vec(),
                    design: None,
                    filter: None,
                }
            })
            .collect();
        Ok(SegmentedStore {
            segments: segs,
            queue: VecDeque::with_capacity(capacity),
            capacity,
            sample_every,
            empty_seen: 0,
            next_compaction: 0,
            family,
            cfg,
            rebuilds: 0,
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn queue(&self) -> &VecDeque<RangeQuery<Key64>> {
        &self.queue
    }

    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    fn push(&mut self, q: RangeQuery<Key64>) {
        if self.queue.len() == self.capacity {
            self.queue.pop_front();
        }
        self.queue.push_back(q);
    }

    /// Fills the queue directly (a warm start), keeping the newest entries.
    pub fn seed_queue(&mut self, empty_queries: impl IntoIterator<Item = RangeQuery<Key64>>) {
        for q in empty_queries {
            self.push(q);
        }
    }

    /// Records an executed query; every `sample_every`-th empty one joins
    /// the queue.
    pub fn observe(&mut self, q: &RangeQuery<Key64>, empty: bool) {
        if !empty {
            return;
        }
        self.empty_seen += 1;
        if self.empty_seen.is_multiple_of(self.sample_every as u64) {
            self.push(q.clone());
        }
    }

    fn overlapping(&self, q: &RangeQuery<Key64>) -> std::ops::Range<usize> {
        let first = self.segments.partition_point(|s| s.hi < *q.left());
        let last = self.segments.partition_point(|s| s.lo <= *q.right());
        first..last
    }

    /// Rebuilds segment `i` from the queued queries that overlap it (clipped
    /// to its bounds). Without any, the old filter stays.
    pub fn rebuild(&mut self, i: usize) -> Result<(), HarnessError> {
        let seg = &self.segments[i];
        let sample: Vec<RangeQuery<Key64>> = self
            .queue
            .iter()
            .filter_map(|q| q.clip(&seg.lo, &seg.hi))
            .collect();
        if sample.is_empty() {
            if seg.filter.is_some() {
                return Ok(());
            }
            return Err(HarnessError::Usage(format!(
                "segment {i} has no queued queries to build its first filter from"
            )));
        }
        let budget = budget_bits(self.cfg.bpk, seg.keys.len());
        let verdict = Model::new(&seg.keys, &sample)?.select(self.family, budget, &self.cfg.opts)?;
        let filter = RangeFilter::build(&seg.keys, verdict.chosen, budget, self.cfg.seed ^ i as u64)?;
        let seg = &mut self.segments[i];
        seg.design = Some(verdict.chosen);
        seg.filter = Some(filter);
        self.rebuilds += 1;
        Ok(())
    }

    pub fn rebuild_all(&mut self) -> Result<(), HarnessError> {
        (0..self.segments.len()).try_for_each(|i| self.rebuild(i))
    }

    /// One compaction: rebuilds the next segment in turn.
    pub fn compact(&mut self) -> Result<(), HarnessError> {
        let i = self.next_compaction;
        self.next_compaction = (i + 1) % self.segments.len();
        self.rebuild(i)
    }

    /// Probes each overlapping segment with the clipped query until one
    /// answers positive.
    pub fn query(&self, q: &RangeQuery<Key64>) -> StoreOutcome {
        let mut out = StoreOutcome::default();
        for seg in &self.segments[self.overlapping(q)] {
            let clipped = q.clip(&seg.lo, &seg.hi).expect("overlapping segment");
            let filter = seg.filter.as_ref().expect("store built before querying");
            let r = filter.query(&clipped);
            out.trie_probes += r.trie_probes;
            out.bloom_probes += r.bloom_probes;
            if r.positive {
                out.positive = true;
                break;
            }
        }
        out
    }

    /// The design most segments currently use (ties go to the smallest).
    pub fn modal_design(&self) -> Option<DesignPoint> {
        let mut counts: BTreeMap<String, (usize, DesignPoint)> = BTreeMap::new();
        for d in self.segments.iter().filter_map(|s| s.design) {
            counts.entry(d.to_string()).or_insert((0, d)).0 += 1;
        }
        counts
            .into_values()
            .fold(None, |best: Option<(usize, DesignPoint)>, (c, d)| match best {
                Some((bc, _)) if bc >= c => best,
                _ => Some((c, d)),
            })
            .map(|(_, d)| d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftMode {
    /// The chance of drawing from the end distribution rises linearly from
    /// 0 in the first batch to 1 in the last.
    Gradual,
    /// Start distribution for the first half of the batches, end after.
    Extreme,
}

impl std::str::FromStr for ShiftMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gradual" => Ok(ShiftMode::Gradual),
            "extreme" => Ok(ShiftMode::Extreme),
            other => Err(format!("unknown shift mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShiftConfig {
    pub start: QuerySpec,
    pub end: QuerySpec,
    pub batches: usize,
    pub batch_size: usize,
    pub mode: ShiftMode,
    pub segments: usize,
    /// Queries between compactions; `None` disables rebuilds.
    pub rebuild_period: Option<usize>,
    pub queue_size: usize,
    pub sample_every: usize,
    pub family: Family,
    pub eval: EvalConfig,
}

impl ShiftConfig {
    /// Share of queries drawn from the end distribution in `batch`.
    pub fn transition_ratio(&self, batch: usize) -> f64 {
        match self.mode {
            ShiftMode::Gradual if self.batches <= 1 => 1.0,
            ShiftMode::Gradual => batch as f64 / (self.batches - 1) as f64,
            ShiftMode::Extreme => {
                if batch < self.switch_batch() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// First batch of the end distribution in extreme mode.
    pub fn switch_batch(&self) -> usize {
        self.batches / 2
    }

    /// Queries in one full round of compactions.
    pub fn cycle_queries(&self) -> Option<usize> {
        self.rebuild_period.map(|p| p * self.segments)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftBatch {
    pub batch: usize,
    pub ratio: f64,
    pub observed_fpr: f64,
    pub n_empty: u64,
    pub mean_trie_probes: f64,
    pub mean_bloom_probes: f64,
    pub rebuilds: u64,
    pub modal_design: Option<DesignPoint>,
}

impl ShiftBatch {
    pub fn to_row(&self, workload: &str, family: Family, bpk: f64) -> ReportRow {
        let id = format!("{workload}/batch{:03}/ratio{:.3}", self.batch, self.ratio);
        let mut row = match self.modal_design {
            Some(d) => ReportRow::for_design(&id, d, bpk),
            None => ReportRow::failed(&id, family, bpk, "ok".into()),
        };
        row.family = family.name().to_string();
        row.observed_fpr = Some(self.observed_fpr);
        row.mean_trie_probes = Some(self.mean_trie_probes);
        row.mean_bloom_probes = Some(self.mean_bloom_probes);
        row.n_eval = self.n_empty;
        row
    }
}

fn stream(spec: &QuerySpec, n: usize, n_sample: usize, keys: &[Key64]) -> Result<protean::workloads::Workload<Key64>, HarnessError> {
    let mut s = *spec;
    s.n_queries = n;
    s.n_sample = n_sample;
    Ok(gen_queries(&s, keys, &[])?)
}

/// Runs the shifting workload over a fresh store whose filters start from a
/// full queue of start-distribution queries.
pub fn run_shift(keys: &[Key64], cfg: &ShiftConfig) -> Result<Vec<ShiftBatch>, HarnessError> {
    let total = cfg.batches * cfg.batch_size;
    let start = stream(&cfg.start, total, cfg.queue_size, keys)?;
    let end = stream(&cfg.end, total, 0, keys)?;
    let mut store = SegmentedStore::new(
        keys,
        cfg.segments,
        cfg.queue_size,
        cfg.sample_every,
        cfg.family,
        cfg.eval,
    )?;
    store.seed_queue(start.sample);
    store.rebuild_all()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.eval.seed);
    rng.set_stream(7);
    let mut executed = 0usize;
    let mut out = Vec::with_capacity(cfg.batches);
    for batch in 0..cfg.batches {
        let ratio = cfg.transition_ratio(batch);
        let (mut fp, mut n_empty, mut trie, mut bloom) = (0u64, 0u64, 0u64, 0u64);
        for _ in 0..cfg.batch_size {
            let from_end = rng.random::<f64>() < ratio;
            let LabeledQuery { query, empty } = if from_end {
                &end.queries[executed]
            } else {
                &start.queries[executed]
            };
            let r = store.query(query);
            if *empty {
                n_empty += 1;
                fp += r.positive as u64;
                trie += r.trie_probes;
                bloom += r.bloom_probes;
            } else if !r.positive {
                return Err(HarnessError::FalseNegative {
                    query: format!("{query:?}"),
                    design: "segmented store".into(),
                });
            }
            store.observe(query, *empty);
            executed += 1;
            if let Some(period) = cfg.rebuild_period {
                if executed.is_multiple_of(period) {
                    store.compact()?;
                }
            }
        }
        let per = |x: u64| if n_empty == 0 { 0.0 } else { x as f64 / n_empty as f64 };
        out.push(ShiftBatch {
            batch,
            ratio,
            observed_fpr: per(fp),
            n_empty,
            mean_trie_probes: per(trie),
            mean_bloom_probes: per(bloom),
            rebuilds: store.rebuilds(),
            modal_design: store.modal_design(),
        });
    }
    Ok(out)
}

/// FPR of a store built for, and run on, the end distribution alone: the
/// last batch of a run whose start distribution is already the end one.
pub fn steady_state(keys: &[Key64], cfg: &ShiftConfig) -> Result<ShiftBatch, HarnessError> {
    let mut steady = cfg.clone();
    steady.start = cfg.end;
    steady.start.seed = cfg.end.seed ^ 0x5EED;
    steady.mode = ShiftMode::Gradual;
    let batches = run_shift(keys, &steady)?;
    Ok(batches.last().cloned().expect("at least one batch"))
}
