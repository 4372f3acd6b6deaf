//! Statistical proofs of execution.
//!
//! A solver runs a task, records a hash of every computational state in a
//! Bloom filter and ships the filter with its output. A verifier checks the
//! filter for saturation, then recomputes a random fraction `delta` of the
//! states (or, against output tampering, the whole task with probability
//! `delta`) and looks them up.
//!
//! * [`bloom`]: the filter and its binary format.
//! * [`hashing`]: state hashes for integers, tolerant real arrays and embeddings.
//! * [`protocol`]: request/response envelopes and the generic verifier steps.
//! * [`primesum`]: the reference task with honest and dishonest solvers.
//! * [`plan`]: parsing and hashing of agentic plans.
//! * [`sim`]: the Monte Carlo detection harness.

pub mod bloom;
pub mod error;
pub mod hashing;
pub mod plan;
pub mod primes;
pub mod primesum;
pub mod protocol;
pub mod rng;
pub mod sim;

pub use error::{Result, SpexError};
