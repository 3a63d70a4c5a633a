//! Building chosen or swept designs and measuring them on labeled queries.

use std::time::Instant;

use protean::cpfpr::{Model, ModelError, ModelOptions};
use protean::filters::{DesignPoint, Family, FilterError, RangeFilter, Split};
use protean::workloads::{LabeledQuery, Workload};
use protean::{Key, RangeQuery};
use rayon::prelude::*;

use crate::report::{ReportRow, STATUS_INFEASIBLE};
use crate::HarnessError;

/// Keys, labeled evaluation queries and the empty-only sample the model
/// sees.
#[derive(Clone, Debug)]
pub struct Dataset<K> {
    pub id: String,
    pub keys: Vec<K>,
    pub queries: Vec<LabeledQuery<K>>,
    pub sample: Vec<RangeQuery<K>>,
}

impl<K: Key> Dataset<K> {
    pub fn new(id: impl Into<String>, keys: Vec<K>, workload: Workload<K>) -> Self {
        Dataset {
            id: id.into(),
            keys,
            queries: workload.queries,
            sample: workload.sample,
        }
    }

    pub fn n_empty(&self) -> usize {
        self.queries.iter().filter(|q| q.empty).count()
    }
}

/// Budget in bits for `bpk` bits per key over `n_keys` distinct keys.
pub fn budget_bits(bpk: f64, n_keys: usize) -> u64 {
    (bpk * n_keys as f64).round() as u64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalConfig {
    pub bpk: f64,
    pub opts: ModelOptions,
    pub seed: u64,
}

impl EvalConfig {
    pub fn new(bpk: f64, seed: u64) -> Self {
        EvalConfig {
            bpk,
            opts: ModelOptions::default(),
            seed,
        }
    }
}

/// Measurements of one filter over labeled queries. FPR and probe means
/// are over the empty queries only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub observed_fpr: f64,
    pub false_positives: u64,
    pub n_empty: u64,
    pub mean_trie_probes: f64,
    pub mean_bloom_probes: f64,
}

/// Runs every query through `filter`. A negative answer on a non-empty
/// query is an error, not a statistic.
pub fn evaluate<K: Key>(
    filter: &RangeFilter<K>,
    design: DesignPoint,
    queries: &[LabeledQuery<K>],
) -> Result<Evaluation, HarnessError> {
    let mut fp = 0u64;
    let mut n_empty = 0u64;
    let mut trie = 0u64;
    let mut bloom = 0u64;
    for lq in queries {
        let out = filter.query(&lq.query);
        if lq.empty {
            n_empty += 1;
            fp += out.positive as u64;
            trie += out.trie_probes;
            bloom += out.bloom_probes;
        } else if !out.positive {
            return Err(HarnessError::FalseNegative {
                query: format!("{:?}", lq.query),
                design: design.to_string(),
            });
        }
    }
    let per = |x: u64| if n_empty == 0 { 0.0 } else { x as f64 / n_empty as f64 };
    Ok(Evaluation {
        observed_fpr: per(fp),
        false_positives: fp,
        n_empty,
        mean_trie_probes: per(trie),
        mean_bloom_probes: per(bloom),
    })
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn fill(row: &mut ReportRow, ev: &Evaluation) {
    row.observed_fpr = Some(ev.observed_fpr);
    row.mean_trie_probes = Some(ev.mean_trie_probes);
    row.mean_bloom_probes = Some(ev.mean_bloom_probes);
    row.n_eval = ev.n_empty;
}

/// Selects a design of `family` from the sample, builds it and measures it.
/// An empty design space yields an `infeasible` row rather than an error.
pub fn eval_selected<K: Key>(
    ds: &Dataset<K>,
    family: Family,
    cfg: &EvalConfig,
) -> Result<ReportRow, HarnessError> {
    let budget = budget_bits(cfg.bpk, ds.keys.len());
    let t = Instant::now();
    let verdict = Model::new(&ds.keys, &ds.sample).and_then(|m| m.select(family, budget, &cfg.opts));
    let model_ms = ms_since(t);
    let verdict = match verdict {
        Ok(v) => v,
        Err(ModelError::Infeasible { .. }) => {
            return Ok(ReportRow::failed(&ds.id, family, cfg.bpk, STATUS_INFEASIBLE.into()))
        }
        Err(e) => return Err(e.into()),
    };
    let mut row = ReportRow::for_design(&ds.id, verdict.chosen, cfg.bpk);
    row.predicted_fpr = Some(verdict.expected_fpr);
    row.model_ms = Some(model_ms);
    let t = Instant::now();
    let filter = RangeFilter::build(&ds.keys, verdict.chosen, budget, cfg.seed)?;
    row.build_ms = Some(ms_since(t));
    fill(&mut row, &evaluate(&filter, verdict.chosen, &ds.queries)?);
    Ok(row)
}

/// Prices, builds and measures one design. Designs whose trie does not fit
/// give an `infeasible` row.
pub fn eval_design<K: Key>(
    ds: &Dataset<K>,
    model: &Model<K>,
    design: DesignPoint,
    cfg: &EvalConfig,
) -> Result<ReportRow, HarnessError> {
    let budget = budget_bits(cfg.bpk, ds.keys.len());
    let mut row = ReportRow::for_design(&ds.id, design, cfg.bpk);
    let t = Instant::now();
    match model.predict(design, budget, &cfg.opts) {
        Ok(p) => row.predicted_fpr = Some(p),
        Err(ModelError::Infeasible { .. }) => {
            row.status = STATUS_INFEASIBLE.into();
            return Ok(row);
        }
        Err(e) => return Err(e.into()),
    }
    row.model_ms = Some(ms_since(t));
    let t = Instant::now();
    let filter = match RangeFilter::build(&ds.keys, design, budget, cfg.seed) {
        Ok(f) => f,
        Err(FilterError::Infeasible { .. }) => {
            row.status = STATUS_INFEASIBLE.into();
            return Ok(row);
        }
        Err(e) => return Err(e.into()),
    };
    row.build_ms = Some(ms_since(t));
    fill(&mut row, &evaluate(&filter, design, &ds.queries)?);
    Ok(row)
}

/// Lengths `step, 2*step, ...` in `lo..=width`, always including `width`.
fn stepped(lo: u32, width: u32, step: u32) -> Vec<u32> {
    let step = step.max(1);
    let mut v: Vec<u32> = (1..=width).filter(|l| l % step == 0 && *l >= lo).collect();
    if v.last() != Some(&width) && width >= lo {
        v.push(width);
    }
    v
}

/// Every design of `family` for `width`-bit keys, thinned to multiples of
/// `step` (plus the full width). Feasibility is not checked here.
pub fn sweep_designs(family: Family, width: u32, step: u32) -> Vec<DesignPoint> {
    let mut out = Vec::new();
    match family {
        Family::Pbf1 => {
            for l in stepped(1, width, step) {
                out.push(DesignPoint::Pbf1 { prefix_len: l });
            }
        }
        Family::Proteus => {
            let depths = std::iter::once(0).chain(stepped(1, width, step));
            for l1 in depths {
                if l1 > 0 {
                    out.push(DesignPoint::Proteus {
                        trie_depth: l1,
                        bloom_len: 0,
                    });
                }
                for l2 in stepped(l1 + 1, width, step) {
                    out.push(DesignPoint::Proteus {
                        trie_depth: l1,
                        bloom_len: l2,
                    });
                }
            }
        }
        Family::Pbf2 => {
            for l1 in stepped(1, width - 1, step) {
                for l2 in stepped(l1 + 1, width, step) {
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

/// Evaluates `designs` in parallel; rows come back in input order.
pub fn sweep_with<K: Key>(
    ds: &Dataset<K>,
    designs: &[DesignPoint],
    cfg: &EvalConfig,
) -> Result<Vec<ReportRow>, HarnessError> {
    let model = Model::new(&ds.keys, &ds.sample)?;
    designs
        .par_iter()
        .map(|&d| eval_design(ds, &model, d, cfg))
        .collect()
}

/// The whole (thinned) design grid of `family`.
pub fn sweep<K: Key>(
    ds: &Dataset<K>,
    family: Family,
    cfg: &EvalConfig,
    step: u32,
) -> Result<Vec<ReportRow>, HarnessError> {
    let width = ds
        .keys
        .first()
        .ok_or_else(|| HarnessError::Usage("no keys".into()))?
        .width();
    sweep_with(ds, &sweep_designs(family, width, step), cfg)
}
