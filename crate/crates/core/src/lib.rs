//! Self-designing range filters: prefix Bloom filters, a uniform-depth
//! trie hybrid, and the false-positive model that picks between them.

pub mod bloom;
pub mod cpfpr;
pub mod filters;
pub mod keyspace;
mod succinct;
pub mod trie;
pub mod workloads;

pub use cpfpr::{select_design, Model, ModelOptions, ModelVerdict};
pub use filters::{DesignPoint, Family, QueryOutcome, RangeFilter, Split};
pub use keyspace::{ByteKey, IntKey, Key, Key64, RangeQuery};
