use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use protean::cpfpr::TwoFilterForm;
use protean::filters::Family;
use protean::workloads::{
    self, gen_keys, gen_queries, gen_string_keys, gen_string_queries, is_empty, load_sosd,
    load_string_corpus, read_queries, write_queries, write_sosd, BoundText, KeyDist, KeySpec,
    LabeledQuery, QueryKind, QuerySpec, StringKeySpec, Workload,
};
use protean::{ByteKey, Key, Key64, RangeQuery};
use protean_bench::eval::{eval_selected, sweep, Dataset, EvalConfig};
use protean_bench::report::{read_csv, write_csv, ReportRow};
use protean_bench::shift::{run_shift, ShiftConfig, ShiftMode};
use protean_bench::{plot, HarnessError};

/// Range filter benchmark runner.
#[derive(Parser)]
#[command(name = "protean-bench", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write key, query and sample files.
    Gen(GenArgs),
    /// Select a design from the sample, build it, and measure it.
    Eval(EvalArgs),
    /// Measure every design of a family.
    Sweep(SweepArgs),
    /// Shift the query distribution over a segmented store.
    Shift(ShiftArgs),
    /// Render a report CSV as text.
    Plot(PlotArgs),
}

#[derive(Args, Clone)]
struct KeyArgs {
    /// Key file: 8-byte count + u64 values, or hex lines with --string-bytes.
    #[arg(long, conflicts_with = "key_dist")]
    keys: Option<PathBuf>,
    /// Newline-delimited raw byte strings (string keys).
    #[arg(long, conflicts_with_all = ["keys", "key_dist"])]
    corpus: Option<PathBuf>,
    #[arg(long, value_parser = parse_dist)]
    key_dist: Option<KeyDist>,
    #[arg(long, default_value_t = 100_000)]
    n_keys: usize,
    /// Use byte-string keys of this many bytes.
    #[arg(long)]
    string_bytes: Option<usize>,
    /// Keep a random subset of this many keys from --keys (the rest of the
    /// file feeds real-query left bounds).
    #[arg(long, requires = "keys")]
    subsample: Option<usize>,
}

#[derive(Args, Clone)]
struct QueryArgs {
    /// Query file of `left,right` lines.
    #[arg(long, conflicts_with = "query_kind")]
    queries: Option<PathBuf>,
    /// Sample file of `left,right` lines (empty queries only).
    #[arg(long, requires = "queries")]
    sample: Option<PathBuf>,
    #[arg(long, default_value = "uniform")]
    query_kind: QueryKind,
    #[arg(long, default_value_t = 100_000)]
    n_queries: usize,
    /// Largest right - left (default 256; not allowed with point queries).
    #[arg(long)]
    rmax: Option<u64>,
    /// rmax of the uniform half of a split workload.
    #[arg(long)]
    uniform_rmax: Option<u64>,
    #[arg(long, default_value_t = workloads::DEFAULT_CORR_DEGREE)]
    corr_degree: u64,
    #[arg(long, default_value_t = 20_000)]
    sample_size: usize,
    /// Left-bound pool for real queries (same format as --keys).
    #[arg(long)]
    left_pool: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    keys: KeyArgs,
    #[command(flatten)]
    queries: QueryArgs,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for keys.bin|keys.hex, queries.csv, sample.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    keys: KeyArgs,
    #[command(flatten)]
    queries: QueryArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Bits per key; a comma list gives one row each.
    #[arg(long, default_value = "10", value_delimiter = ',')]
    bpk: Vec<f64>,
    #[arg(long, default_value = "proteus", value_delimiter = ',')]
    filter: Vec<Family>,
    /// Leave model/build times out so output is reproducible.
    #[arg(long)]
    no_timings: bool,
    /// Thin Bloom prefix lengths to this many candidates.
    #[arg(long)]
    candidates: Option<u32>,
    /// How two-filter designs are priced.
    #[arg(long, default_value = "verbatim", value_parser = parse_form)]
    two_filter_form: TwoFilterForm,
}

impl EvalArgs {
    fn config(&self, bpk: f64) -> EvalConfig {
        let mut cfg = EvalConfig::new(bpk, self.common.seed);
        cfg.opts.bloom_len_candidates = self.candidates;
        cfg.opts.two_filter_form = self.two_filter_form;
        cfg
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    eval: EvalArgs,
    /// Sweep lengths in multiples of this step (plus the full width).
    #[arg(long, default_value_t = 1)]
    step: u32,
}

#[derive(Args)]
struct ShiftArgs {
    #[command(flatten)]
    keys: KeyArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "uniform")]
    start_kind: QueryKind,
    #[arg(long, default_value = "correlated")]
    end_kind: QueryKind,
    #[arg(long, default_value_t = 256)]
    rmax: u64,
    #[arg(long, default_value_t = workloads::DEFAULT_CORR_DEGREE)]
    corr_degree: u64,
    #[arg(long, default_value_t = 20)]
    batches: usize,
    #[arg(long, default_value_t = 10_000)]
    batch_size: usize,
    #[arg(long, default_value = "gradual")]
    mode: ShiftMode,
    #[arg(long, default_value_t = protean_bench::shift::DEFAULT_SEGMENTS)]
    segments: usize,
    /// Queries between compactions; 0 disables rebuilds.
    #[arg(long, default_value_t = 1000)]
    rebuild_period: usize,
    #[arg(long, default_value_t = protean_bench::shift::DEFAULT_QUEUE_SIZE)]
    queue_size: usize,
    #[arg(long, default_value_t = protean_bench::shift::DEFAULT_SAMPLE_EVERY)]
    sample_every: usize,
    #[arg(long, default_value_t = 10.0)]
    bpk: f64,
    #[arg(long, default_value = "proteus")]
    filter: Family,
}

#[derive(Args)]
struct PlotArgs {
    /// Report CSV to render.
    input: PathBuf,
}

fn parse_dist(s: &str) -> Result<KeyDist, String> {
    match s {
        "uniform" => Ok(KeyDist::Uniform),
        "normal" => Ok(KeyDist::Normal),
        other => Err(format!("unknown key distribution `{other}`")),
    }
}

fn parse_form(s: &str) -> Result<TwoFilterForm, String> {
    match s {
        "verbatim" => Ok(TwoFilterForm::Verbatim),
        "independent" => Ok(TwoFilterForm::Independent),
        other => Err(format!("unknown two-filter form `{other}`")),
    }
}

fn query_spec(q: &QueryArgs, seed: u64) -> Result<QuerySpec> {
    let rmax = match (q.query_kind, q.rmax) {
        (QueryKind::Point, Some(_)) => bail!("--rmax cannot be combined with point queries"),
        (QueryKind::Point, None) => 0,
        (_, r) => r.unwrap_or(256),
    };
    let mut spec = QuerySpec::new(q.query_kind, rmax, seed);
    spec.n_queries = q.n_queries;
    spec.n_sample = q.sample_size;
    spec.uniform_rmax = q.uniform_rmax;
    spec.corr_degree = q.corr_degree;
    Ok(spec)
}

/// Integer keys plus the left-bound pool for real queries.
fn int_keys(k: &KeyArgs, q: &QueryArgs, seed: u64) -> Result<(Vec<Key64>, Vec<u64>)> {
    let mut pool = match &q.left_pool {
        Some(p) => load_sosd(p)?,
        None => Vec::new(),
    };
    let keys = match (&k.keys, k.key_dist) {
        (Some(path), _) => {
            let values = load_sosd(path)?;
            match k.subsample {
                Some(n) => {
                    let (keys, lefts) = workloads::subsample_real(&values, n, values.len() - n.min(values.len()), seed)?;
                    if pool.is_empty() {
                        pool = lefts;
                    }
                    keys
                }
                None => {
                    let mut v = values;
                    v.sort_unstable();
                    v.dedup();
                    v.into_iter().map(Key64::from_masked).collect()
                }
            }
        }
        (None, dist) => gen_keys(&KeySpec {
            dist: dist.unwrap_or(KeyDist::Uniform),
            n_keys: k.n_keys,
            seed,
        })?,
    };
    Ok((keys, pool))
}

fn read_hex_keys(path: &Path) -> Result<Vec<ByteKey>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut keys = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match ByteKey::from_hex(line.trim()) {
            Some(k) => keys.push(k),
            None => bail!("{}: line {}: not a hex key", path.display(), i + 1),
        }
    }
    keys.sort_unstable();
    keys.dedup();
    Ok(keys)
}

fn string_keys(k: &KeyArgs, bytes: usize, seed: u64) -> Result<Vec<ByteKey>> {
    Ok(match (&k.keys, &k.corpus) {
        (Some(path), _) => read_hex_keys(path)?,
        (None, Some(path)) => load_string_corpus(path, Some(bytes))?,
        (None, None) => gen_string_keys(&StringKeySpec {
            dist: k.key_dist.unwrap_or(KeyDist::Uniform),
            n_keys: k.n_keys,
            key_bytes: bytes,
            variable_len: false,
            seed,
        })?,
    })
}

/// Labels file queries and picks the sample: the sample file when given,
/// otherwise the first `sample_size` empty queries of the query file.
fn file_workload<K: BoundText>(q: &QueryArgs, keys: &[K]) -> Result<Workload<K>> {
    let path = q.queries.as_ref().expect("caller checked");
    let queries: Vec<LabeledQuery<K>> = read_queries::<K>(path)?
        .into_iter()
        .map(|query| {
            let empty = is_empty(&query, keys);
            LabeledQuery { query, empty }
        })
        .collect();
    let sample: Vec<RangeQuery<K>> = match &q.sample {
        Some(p) => read_queries::<K>(p)?,
        None => queries
            .iter()
            .filter(|lq| lq.empty)
            .take(q.sample_size)
            .map(|lq| lq.query.clone())
            .collect(),
    };
    if let Some(bad) = sample.iter().find(|s| !is_empty(s, keys)) {
        bail!("sample query {bad:?} is not empty");
    }
    Ok(Workload { queries, sample })
}

fn int_dataset(k: &KeyArgs, q: &QueryArgs, seed: u64) -> Result<Dataset<Key64>> {
    let (keys, pool) = int_keys(k, q, seed)?;
    let w = match &q.queries {
        Some(_) => file_workload(q, &keys)?,
        None => gen_queries(&query_spec(q, seed)?, &keys, &pool)?,
    };
    Ok(Dataset::new(dataset_id(k, q), keys, w))
}

fn string_dataset(k: &KeyArgs, q: &QueryArgs, bytes: usize, seed: u64) -> Result<Dataset<ByteKey>> {
    let keys = string_keys(k, bytes, seed)?;
    let w = match &q.queries {
        Some(_) => file_workload(q, &keys)?,
        None => gen_string_queries(&query_spec(q, seed)?, &keys)?,
    };
    Ok(Dataset::new(dataset_id(k, q), keys, w))
}

fn dataset_id(k: &KeyArgs, q: &QueryArgs) -> String {
    let keys = match (&k.keys, &k.corpus) {
        (Some(p), _) | (None, Some(p)) => p.file_name().map_or("keys".into(), |n| n.to_string_lossy().into_owned()),
        _ => format!("{:?}", k.key_dist.unwrap_or(KeyDist::Uniform)).to_lowercase(),
    };
    let queries = match &q.queries {
        Some(p) => p.file_name().map_or("queries".into(), |n| n.to_string_lossy().into_owned()),
        None => format!("{:?}", q.query_kind).to_lowercase(),
    };
    format!("{keys}-{queries}")
}

fn emit(rows: &[ReportRow], out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(file, rows)?;
        }
        None => write_csv(io::stdout().lock(), rows)?,
    }
    Ok(())
}

fn eval_rows<K: Key>(ds: &Dataset<K>, a: &EvalArgs) -> Result<Vec<ReportRow>, HarnessError> {
    let mut rows = Vec::new();
    for &family in &a.filter {
        for &bpk in &a.bpk {
            rows.push(eval_selected(ds, family, &a.config(bpk))?);
        }
    }
    Ok(rows)
}

fn sweep_rows<K: Key>(ds: &Dataset<K>, a: &SweepArgs) -> Result<Vec<ReportRow>, HarnessError> {
    let mut rows = Vec::new();
    for &family in &a.eval.filter {
        for &bpk in &a.eval.bpk {
            rows.extend(sweep(ds, family, &a.eval.config(bpk), a.step)?);
        }
    }
    Ok(rows)
}

fn finish(rows: Vec<ReportRow>, no_timings: bool, out: &Option<PathBuf>) -> Result<()> {
    let rows: Vec<ReportRow> = if no_timings {
        rows.into_iter().map(ReportRow::without_timings).collect()
    } else {
        rows
    };
    emit(&rows, out)
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let seed = a.common.seed;
    let rows = match a.keys.string_bytes {
        Some(b) => eval_rows(&string_dataset(&a.keys, &a.queries, b, seed)?, a)?,
        None => eval_rows(&int_dataset(&a.keys, &a.queries, seed)?, a)?,
    };
    finish(rows, a.no_timings, &a.common.out)
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let e = &a.eval;
    let seed = e.common.seed;
    let rows = match e.keys.string_bytes {
        Some(b) => sweep_rows(&string_dataset(&e.keys, &e.queries, b, seed)?, a)?,
        None => sweep_rows(&int_dataset(&e.keys, &e.queries, seed)?, a)?,
    };
    finish(rows, e.no_timings, &e.common.out)
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let seed = a.seed.unwrap_or(0);
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let queries = a.out_dir.join("queries.csv");
    let sample = a.out_dir.join("sample.csv");
    match a.keys.string_bytes {
        Some(b) => {
            let ds = string_dataset(&a.keys, &a.queries, b, seed)?;
            let path = a.out_dir.join("keys.hex");
            let mut text = String::new();
            for k in &ds.keys {
                text.push_str(&k.to_hex());
                text.push('\n');
            }
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            write_dataset_queries(&ds, &queries, &sample)?;
        }
        None => {
            let ds = int_dataset(&a.keys, &a.queries, seed)?;
            let values: Vec<u64> = ds.keys.iter().map(|k| k.value()).collect();
            write_sosd(&a.out_dir.join("keys.bin"), &values)?;
            write_dataset_queries(&ds, &queries, &sample)?;
        }
    }
    Ok(())
}

fn write_dataset_queries<K: BoundText>(ds: &Dataset<K>, queries: &Path, sample: &Path) -> Result<()> {
    let qs: Vec<RangeQuery<K>> = ds.queries.iter().map(|lq| lq.query.clone()).collect();
    write_queries(queries, &qs)?;
    write_queries(sample, &ds.sample)?;
    Ok(())
}

fn cmd_shift(a: &ShiftArgs) -> Result<()> {
    if a.keys.string_bytes.is_some() {
        bail!("shift runs on integer keys only");
    }
    let seed = a.common.seed;
    let no_queries = QueryArgs {
        queries: None,
        sample: None,
        query_kind: QueryKind::Uniform,
        n_queries: 0,
        rmax: None,
        uniform_rmax: None,
        corr_degree: a.corr_degree,
        sample_size: 0,
        left_pool: None,
    };
    let (keys, _) = int_keys(&a.keys, &no_queries, seed)?;
    let spec = |kind: QueryKind, s: u64| -> Result<QuerySpec> {
        if kind == QueryKind::Real {
            bail!("shift takes generated query kinds only");
        }
        let mut q = QuerySpec::new(kind, a.rmax, s);
        q.corr_degree = a.corr_degree;
        Ok(q)
    };
    let cfg = ShiftConfig {
        start: spec(a.start_kind, seed)?,
        end: spec(a.end_kind, seed ^ 0xE4D)?,
        batches: a.batches,
        batch_size: a.batch_size,
        mode: a.mode,
        segments: a.segments,
        rebuild_period: (a.rebuild_period > 0).then_some(a.rebuild_period),
        queue_size: a.queue_size,
        sample_every: a.sample_every,
        family: a.filter,
        eval: EvalConfig::new(a.bpk, seed),
    };
    let id = format!(
        "{:?}-to-{:?}-{:?}",
        a.start_kind, a.end_kind, a.mode
    )
    .to_lowercase();
    let rows: Vec<ReportRow> = run_shift(&keys, &cfg)?
        .iter()
        .map(|b| b.to_row(&id, a.filter, a.bpk))
        .collect();
    emit(&rows, &a.common.out)
}

fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let rows = read_csv(&a.input)?;
    io::stdout().lock().write_all(plot::render(&rows).as_bytes())?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Gen(a) => cmd_gen(&a),
        Cmd::Eval(a) => cmd_eval(&a),
        Cmd::Sweep(a) => cmd_sweep(&a),
        Cmd::Shift(a) => cmd_shift(&a),
        Cmd::Plot(a) => cmd_plot(&a),
    }
}
