//! Seeded key and query generators, dataset loaders, and query files.
//!
//! Every generator is a pure function of its spec. Keys, evaluation queries
//! and sample queries come from separate ChaCha8 streams of the same seed,
//! so the sample never overlaps the evaluation stream's randomness.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand_distr::{Distribution, Normal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::keyspace::{pad, ByteKey, Key, Key64, RangeQuery};

/// Default maximum distance from a key to a correlated query's left bound.
pub const DEFAULT_CORR_DEGREE: u64 = 1 << 10;

const KEY_STREAM: u64 = 0;
const EVAL_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;
const SUBSAMPLE_STREAM: u64 = 3;

/// Attempts per requested sample query before giving up on finding empty
/// ones.
const SAMPLE_ATTEMPTS_PER_QUERY: usize = 1000;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error("could not find {wanted} empty sample queries ({found} after {attempts} draws)")]
    SampleExhausted {
        wanted: usize,
        found: usize,
        attempts: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WorkloadError + '_ {
    move |source| WorkloadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KeyDist {
    Uniform,
    /// Mean `2^63`, standard deviation `0.01 * 2^64`.
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeySpec {
    pub dist: KeyDist,
    pub n_keys: usize,
    pub seed: u64,
}

/// A normal 64-bit value centred on `2^63`. An f64 cannot resolve the low
/// 11 bits near the mean, so those are drawn uniformly.
fn normal_u64(rng: &mut ChaCha8Rng) -> u64 {
    const MEAN: f64 = 9_223_372_036_854_775_808.0; // 2^63
    const SD: f64 = 0.01 * 18_446_744_073_709_551_616.0; // 0.01 * 2^64
    let x: f64 = Normal::new(MEAN, SD).expect("finite sd").sample(rng).round();
    let v = if x <= 0.0 {
        0
    } else if x >= 18_446_744_073_709_551_615.0 {
        u64::MAX
    } else {
        x as u64
    };
    let low: u64 = rng.random::<u64>() & 0x7FF;
    (v & !0x7FF) | low
}

fn draw_u64(rng: &mut ChaCha8Rng, dist: KeyDist) -> u64 {
    match dist {
        KeyDist::Uniform => rng.random(),
        KeyDist::Normal => normal_u64(rng),
    }
}

/// `n_keys` distinct keys, ascending. Duplicates are redrawn.
pub fn gen_keys(spec: &KeySpec) -> Result<Vec<Key64>, WorkloadError> {
    if spec.n_keys == 0 {
        return Err(WorkloadError::Invalid("need at least one key".into()));
    }
    let mut rng = rng_for(spec.seed, KEY_STREAM);
    let mut values: Vec<u64> = Vec::with_capacity(spec.n_keys);
    while values.len() < spec.n_keys {
        let missing = spec.n_keys - values.len();
        values.extend((0..missing).map(|_| draw_u64(&mut rng, spec.dist)));
        values.sort_unstable();
        values.dedup();
    }
    Ok(values.into_iter().map(Key64::from_masked).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryKind {
    /// Left bound uniform over the key space.
    Uniform,
    /// Left bound within `corr_degree` above a random key.
    Correlated,
    /// Fair coin between correlated and uniform.
    Split,
    /// Single-value queries at uniform positions.
    Point,
    /// Left bound drawn from a supplied pool of real values.
    Real,
}

impl std::str::FromStr for QueryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(QueryKind::Uniform),
            "correlated" => Ok(QueryKind::Correlated),
            "split" => Ok(QueryKind::Split),
            "point" => Ok(QueryKind::Point),
            "real" => Ok(QueryKind::Real),
            other => Err(format!("unknown query kind `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuerySpec {
    pub kind: QueryKind,
    pub n_queries: usize,
    pub n_sample: usize,
    /// Largest `right - left`; offsets are uniform in `[2, rmax]`. Ignored
    /// for point queries.
    pub rmax: u64,
    /// `rmax` for the uniform half of a split workload (defaults to `rmax`).
    pub uniform_rmax: Option<u64>,
    pub corr_degree: u64,
    pub seed: u64,
}

impl QuerySpec {
    pub fn new(kind: QueryKind, rmax: u64, seed: u64) -> Self {
        QuerySpec {
            kind,
            n_queries: 100_000,
            n_sample: 20_000,
            rmax: if kind == QueryKind::Point { 0 } else { rmax },
            uniform_rmax: None,
            corr_degree: DEFAULT_CORR_DEGREE,
            seed,
        }
    }

    fn validate(&self, pool: &[u64]) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::Invalid(m.into()));
        match self.kind {
            QueryKind::Point => {
                if self.rmax != 0 {
                    return bad("point queries take rmax = 0");
                }
            }
            _ => {
                if self.rmax < 2 || self.uniform_rmax.is_some_and(|r| r < 2) {
                    return bad("range queries need rmax >= 2");
                }
            }
        }
        if self.corr_degree == 0 {
            return bad("corr_degree must be at least 1");
        }
        if self.kind == QueryKind::Real && pool.is_empty() {
            return bad("real queries need a pool of left bounds");
        }
        Ok(())
    }
}

/// A query and whether it is truly empty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledQuery<K> {
    pub query: RangeQuery<K>,
    pub empty: bool,
}

/// Evaluation queries (labeled) and an empty-only sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Workload<K> {
    pub queries: Vec<LabeledQuery<K>>,
    pub sample: Vec<RangeQuery<K>>,
}

/// Whether no sorted key falls inside `q`.
pub fn is_empty<K: Key>(q: &RangeQuery<K>, sorted_keys: &[K]) -> bool {
    !q.intersects(sorted_keys)
}

/// Draws one query as `(left, right)` integers.
fn draw_query(rng: &mut ChaCha8Rng, spec: &QuerySpec, keys: &[u64], pool: &[u64]) -> (u64, u64) {
    let offset = |rng: &mut ChaCha8Rng, rmax: u64| {
        if rmax == 0 {
            0
        } else {
            rng.random_range(2..=rmax)
        }
    };
    let uniform = |rng: &mut ChaCha8Rng, rmax: u64| {
        let left = rng.random_range(0..=u64::MAX - rmax);
        (left, left + offset(rng, rmax))
    };
    let correlated = |rng: &mut ChaCha8Rng, rmax: u64| {
        let anchor = keys[rng.random_range(0..keys.len())];
        let left = anchor.saturating_add(rng.random_range(1..=spec.corr_degree));
        (left, left.saturating_add(offset(rng, rmax)))
    };
    match spec.kind {
        QueryKind::Uniform | QueryKind::Point => uniform(rng, spec.rmax),
        QueryKind::Correlated => correlated(rng, spec.rmax),
        QueryKind::Split => {
            if rng.random::<bool>() {
                correlated(rng, spec.rmax)
            } else {
                uniform(rng, spec.uniform_rmax.unwrap_or(spec.rmax))
            }
        }
        QueryKind::Real => {
            let left = pool[rng.random_range(0..pool.len())];
            (left, left.saturating_add(offset(rng, spec.rmax)))
        }
    }
}

/// Labeled evaluation queries plus `n_sample` empty sample queries from an
/// independent stream. `pool` supplies left bounds for [`QueryKind::Real`].
pub fn gen_queries(
    spec: &QuerySpec,
    sorted_keys: &[Key64],
    pool: &[u64],
) -> Result<Workload<Key64>, WorkloadError> {
    spec.validate(pool)?;
    if sorted_keys.is_empty() {
        return Err(WorkloadError::Invalid("need at least one key".into()));
    }
    let raw: Vec<u64> = sorted_keys.iter().map(|k| k.value()).collect();
    let make = |(l, r): (u64, u64)| {
        RangeQuery::new(Key64::from_masked(l), Key64::from_masked(r)).expect("left <= right")
    };

    let mut rng = rng_for(spec.seed, EVAL_STREAM);
    let queries = (0..spec.n_queries)
        .map(|_| {
            let query = make(draw_query(&mut rng, spec, &raw, pool));
            let empty = is_empty(&query, sorted_keys);
            LabeledQuery { query, empty }
        })
        .collect();

    let mut rng = rng_for(spec.seed, SAMPLE_STREAM);
    let mut sample = Vec::with_capacity(spec.n_sample);
    let max_attempts = spec.n_sample.saturating_mul(SAMPLE_ATTEMPTS_PER_QUERY).max(1000);
    let mut attempts = 0;
    while sample.len() < spec.n_sample {
        if attempts == max_attempts {
            return Err(WorkloadError::SampleExhausted {
                wanted: spec.n_sample,
                found: sample.len(),
                attempts,
            });
        }
        attempts += 1;
        let q = make(draw_query(&mut rng, spec, &raw, pool));
        if is_empty(&q, sorted_keys) {
            sample.push(q);
        }
    }
    Ok(Workload { queries, sample })
}

/// Reads a dataset: an 8-byte little-endian count, then that many 8-byte
/// little-endian values.
pub fn load_sosd(path: &Path) -> Result<Vec<u64>, WorkloadError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_sosd(&bytes).map_err(|msg| WorkloadError::Format {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn parse_sosd(bytes: &[u8]) -> Result<Vec<u64>, String> {
    let header: [u8; 8] = bytes
        .get(..8)
        .and_then(|h| h.try_into().ok())
        .ok_or("file shorter than its 8-byte count header")?;
    let count = u64::from_le_bytes(header);
    let payload = &bytes[8..];
    if !payload.len().is_multiple_of(8) {
        return Err(format!("payload of {} bytes is not whole 8-byte values", payload.len()));
    }
    if payload.len() as u64 / 8 != count {
        return Err(format!(
            "header says {count} values but the payload holds {}",
            payload.len() / 8
        ));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_sosd(path: &Path, values: &[u64]) -> Result<(), WorkloadError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

/// Splits a dataset into `n_keys` keys (sorted, unique) and `n_lefts` left
/// bounds, both sampled without replacement.
pub fn subsample_real(
    values: &[u64],
    n_keys: usize,
    n_lefts: usize,
    seed: u64,
) -> Result<(Vec<Key64>, Vec<u64>), WorkloadError> {
    if n_keys + n_lefts > values.len() || n_keys == 0 {
        return Err(WorkloadError::Invalid(format!(
            "cannot draw {n_keys} keys and {n_lefts} left bounds from {} values",
            values.len()
        )));
    }
    let mut rng = rng_for(seed, SUBSAMPLE_STREAM);
    let picks = index::sample(&mut rng, values.len(), n_keys + n_lefts).into_vec();
    let mut keys: Vec<u64> = picks[..n_keys].iter().map(|&i| values[i]).collect();
    keys.sort_unstable();
    keys.dedup();
    let lefts = picks[n_keys..].iter().map(|&i| values[i]).collect();
    Ok((keys.into_iter().map(Key64::from_masked).collect(), lefts))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StringKeySpec {
    pub dist: KeyDist,
    pub n_keys: usize,
    /// Padded key length in bytes.
    pub key_bytes: usize,
    /// Draw each raw length uniformly from `1..=key_bytes` before padding.
    pub variable_len: bool,
    pub seed: u64,
}

fn random_string(rng: &mut ChaCha8Rng, spec: &StringKeySpec) -> Vec<u8> {
    let len = if spec.variable_len {
        rng.random_range(1..=spec.key_bytes)
    } else {
        spec.key_bytes
    };
    let mut raw = vec![0u8; len];
    rng.fill(&mut raw[..]);
    if spec.dist == KeyDist::Normal {
        // the leading bytes carry a normal value centred on 0x80 00 .. 00
        let head = normal_u64(rng).to_be_bytes();
        let n = head.len().min(len);
        raw[..n].copy_from_slice(&head[..n]);
    }
    raw
}

/// `n_keys` distinct byte-string keys padded with trailing nulls to
/// `key_bytes`, ascending.
pub fn gen_string_keys(spec: &StringKeySpec) -> Result<Vec<ByteKey>, WorkloadError> {
    if spec.n_keys == 0 || spec.key_bytes == 0 {
        return Err(WorkloadError::Invalid("need at least one key of at least one byte".into()));
    }
    let mut rng = rng_for(spec.seed, KEY_STREAM);
    let mut keys: Vec<ByteKey> = Vec::with_capacity(spec.n_keys);
    while keys.len() < spec.n_keys {
        let missing = spec.n_keys - keys.len();
        for _ in 0..missing {
            let raw = random_string(&mut rng, spec);
            keys.push(pad(&raw, spec.key_bytes).expect("raw length within key length"));
        }
        keys.sort_unstable();
        keys.dedup();
    }
    Ok(keys)
}

/// String queries shaped like [`gen_queries`]: bounds are byte keys and
/// offsets are added to the key as a big-endian integer.
pub fn gen_string_queries(
    spec: &QuerySpec,
    sorted_keys: &[ByteKey],
) -> Result<Workload<ByteKey>, WorkloadError> {
    spec.validate(&[0])?;
    if spec.kind == QueryKind::Real {
        return Err(WorkloadError::Invalid("real string queries come from a query file".into()));
    }
    let width = sorted_keys
        .first()
        .ok_or_else(|| WorkloadError::Invalid("need at least one key".into()))?
        .len_bytes();
    let draw = |rng: &mut ChaCha8Rng| {
        let offset = |rng: &mut ChaCha8Rng, rmax: u64| {
            if rmax == 0 {
                0
            } else {
                rng.random_range(2..=rmax)
            }
        };
        let uniform = |rng: &mut ChaCha8Rng, rmax: u64| {
            let mut raw = vec![0u8; width];
            rng.fill(&mut raw[..]);
            let left = ByteKey::new(raw);
            let right = left.saturating_add(offset(rng, rmax));
            (left, right)
        };
        let correlated = |rng: &mut ChaCha8Rng, rmax: u64| {
            let anchor = &sorted_keys[rng.random_range(0..sorted_keys.len())];
            let left = anchor.saturating_add(rng.random_range(1..=spec.corr_degree));
            let right = left.saturating_add(offset(rng, rmax));
            (left, right)
        };
        match spec.kind {
            QueryKind::Uniform | QueryKind::Point => uniform(rng, spec.rmax),
            QueryKind::Correlated => correlated(rng, spec.rmax),
            QueryKind::Split => {
                if rng.random::<bool>() {
                    correlated(rng, spec.rmax)
                } else {
                    uniform(rng, spec.uniform_rmax.unwrap_or(spec.rmax))
                }
            }
            QueryKind::Real => unreachable!("rejected above"),
        }
    };
    let make = |(l, r): (ByteKey, ByteKey)| RangeQuery::new(l, r).expect("left <= right");
    let mut rng = rng_for(spec.seed, EVAL_STREAM);
    let queries = (0..spec.n_queries)
        .map(|_| {
            let query = make(draw(&mut rng));
            let empty = is_empty(&query, sorted_keys);
            LabeledQuery { query, empty }
        })
        .collect();
    let mut rng = rng_for(spec.seed, SAMPLE_STREAM);
    let mut sample = Vec::with_capacity(spec.n_sample);
    let max_attempts = spec.n_sample.saturating_mul(SAMPLE_ATTEMPTS_PER_QUERY).max(1000);
    let mut attempts = 0;
    while sample.len() < spec.n_sample {
        if attempts == max_attempts {
            return Err(WorkloadError::SampleExhausted {
                wanted: spec.n_sample,
                found: sample.len(),
                attempts,
            });
        }
        attempts += 1;
        let q = make(draw(&mut rng));
        if is_empty(&q, sorted_keys) {
            sample.push(q);
        }
    }
    Ok(Workload { queries, sample })
}

/// Re-expresses a 64-bit workload over byte keys of `8 + extra_bytes`
/// bytes: keys and left bounds gain trailing `0x00` bytes and right bounds
/// trailing `0xFF` bytes, so every query covers exactly the same keys and
/// sits at the same distance from them.
pub fn widen_workload(
    keys: &[Key64],
    workload: &Workload<Key64>,
    extra_bytes: usize,
) -> (Vec<ByteKey>, Workload<ByteKey>) {
    let low = |v: Key64| {
        let mut b = v.value().to_be_bytes().to_vec();
        b.resize(8 + extra_bytes, 0x00);
        ByteKey::new(b)
    };
    let high = |v: Key64| {
        let mut b = v.value().to_be_bytes().to_vec();
        b.resize(8 + extra_bytes, 0xFF);
        ByteKey::new(b)
    };
    let widen = |q: &RangeQuery<Key64>| {
        RangeQuery::new(low(*q.left()), high(*q.right())).expect("order preserved")
    };
    let out = Workload {
        queries: workload
            .queries
            .iter()
            .map(|lq| LabeledQuery {
                query: widen(&lq.query),
                empty: lq.empty,
            })
            .collect(),
        sample: workload.sample.iter().map(widen).collect(),
    };
    (keys.iter().map(|&k| low(k)).collect(), out)
}

/// Reads newline-delimited raw byte strings and pads them to the longest
/// (or to `key_bytes` when given). Returns sorted, distinct keys.
pub fn load_string_corpus(path: &Path, key_bytes: Option<usize>) -> Result<Vec<ByteKey>, WorkloadError> {
    let data = fs::read(path).map_err(io_err(path))?;
    let lines: Vec<&[u8]> = data
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .collect();
    let width = key_bytes.unwrap_or_else(|| lines.iter().map(|l| l.len()).max().unwrap_or(0));
    let mut keys = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        keys.push(pad(l, width).map_err(|e| WorkloadError::Format {
            path: path.to_path_buf(),
            msg: format!("line {}: {e}", i + 1),
        })?);
    }
    keys.sort_unstable();
    keys.dedup();
    Ok(keys)
}

/// Text form of a query bound: decimal for integers, hex for byte strings.
pub trait BoundText: Key {
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Option<Self>;
}

impl BoundText for Key64 {
    fn to_text(&self) -> String {
        self.value().to_string()
    }

    fn from_text(s: &str) -> Option<Self> {
        s.trim().parse::<u64>().ok().map(Key64::from_masked)
    }
}

impl BoundText for ByteKey {
    fn to_text(&self) -> String {
        self.to_hex()
    }

    fn from_text(s: &str) -> Option<Self> {
        ByteKey::from_hex(s.trim())
    }
}

/// Writes one `left,right` line per query.
pub fn write_queries<K: BoundText>(path: &Path, queries: &[RangeQuery<K>]) -> Result<(), WorkloadError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        for q in queries {
            writeln!(w, "{},{}", q.left().to_text(), q.right().to_text())?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

/// Reads `left,right` lines; blank lines and `#` comments are skipped.
/// Inverted bounds are an error rather than being swapped.
pub fn read_queries<K: BoundText>(path: &Path) -> Result<Vec<RangeQuery<K>>, WorkloadError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fmt_err = |msg: String| WorkloadError::Format {
            path: path.to_path_buf(),
            msg: format!("line {}: {msg}", i + 1),
        };
        let (l, r) = line
            .split_once(',')
            .ok_or_else(|| fmt_err("expected `left,right`".into()))?;
        let left = K::from_text(l).ok_or_else(|| fmt_err(format!("bad bound `{l}`")))?;
        let right = K::from_text(r).ok_or_else(|| fmt_err(format!("bad bound `{r}`")))?;
        out.push(RangeQuery::new(left, right).map_err(|e| fmt_err(e.to_string()))?);
    }
    Ok(out)
}
