//! Multi-user symmetric private information retrieval from X-secure,
//! MDS-coded storage, tolerating Byzantine and unresponsive servers.
//!
//! Each of M users privately picks one index; together the indices select
//! one file of a multi-indexed database. Storage is Lagrange-coded across
//! N servers so that any X of them learn nothing about the data, any T_m
//! of them learn nothing about user m's index, and the users learn nothing
//! beyond the selected file. Answers form a Reed-Solomon codeword, which
//! absorbs B corrupted and U missing replies.
//!
//! ```
//! use xtspir::{harness::run_demo, seed::Seed, params::Rate};
//!
//! let ex = run_demo(&Seed::from_u64(7)).unwrap();
//! assert_eq!(ex.transcript.metrics.r, Rate::new(1, 4));
//! ```

pub mod audit;
pub mod client;
pub mod error;
pub mod field;
pub mod harness;
pub mod linalg;
pub mod params;
pub mod poly;
pub mod retrieval;
pub mod rscode;
pub mod seed;
pub mod server;
pub mod stats;
pub mod storage;
pub mod transcript;

pub use error::{Error, Result};
pub use field::{Fe, Field};
pub use harness::{run_protocol, Protocol, RunOptions};
pub use params::{DerivedParams, PublicPoints, SystemParams};
pub use seed::Seed;
