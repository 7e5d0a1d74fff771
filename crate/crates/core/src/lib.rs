//! Profile-guided library-loading analysis for serverless Python functions.
//!
//! The pipeline reads sampled profiles in the `.pgoprof.jsonl` wire format
//! ([`profile`]), builds a calling context tree and per-library utilization
//! ([`cct`]), breaks initialization time down by package ([`init`]), flags
//! libraries that cost more to load than they are worth ([`detect`]), and
//! rewrites application sources to defer those imports ([`rewrite`]). The
//! [`adaptive`] controller decides when workload drift warrants a rerun.

pub mod adaptive;
pub mod cct;
pub mod detect;
pub mod exec;
pub mod init;
pub mod profile;
pub mod rewrite;
pub mod simulate;

pub use exec::Execution;
