//! PrimeSum: sum the primes found at given 1-based positions of the prime
//! sequence. Each computed prime is one computational state.
//!
//! Besides the honest solver this module carries the dishonest variants the
//! harness needs, the sampling verifier for lazy solvers, the recompute
//! verifier for adversarial solvers, the full-recompute baseline, and a
//! staged (sequential) variant of the task.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bloom::{BloomFilter, FilterParams};
use crate::error::{Result, SpexError};
use crate::hashing::{hash_integer, hash_u64, StateHash};
use crate::primes::nth_prime;
use crate::protocol::{
    check_proof_sanity, recompute_gate, sample_indices, Evidence, FprSlack, Payload, Sanity, SolverProof,
    SolverRequest, SolverResponse, VerifierRequest, VerifierResponse,
};
use crate::rng::{seeded, SeedChain};

/// Honest solvers keep the filter's fill-implied FPR at or below this
/// fraction of the declared rate, so FPR estimation noise on the verifier
/// side does not reject honest proofs.
pub const PROOF_HEADROOM: f64 = 0.5;

/// Smallest capacity an honest proof filter is sized for.
pub const MIN_PROOF_CAPACITY: u64 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrimeSumInput {
    pub indices: Vec<u64>,
}

impl PrimeSumInput {
    pub fn new(indices: Vec<u64>) -> Result<Self> {
        let input = PrimeSumInput { indices };
        input.validate()?;
        Ok(input)
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.is_empty() {
            return Err(SpexError::param("PrimeSum input must contain at least one index"));
        }
        if self.indices.contains(&0) {
            return Err(SpexError::param("PrimeSum indices are 1-based; 0 is not allowed"));
        }
        Ok(())
    }

    pub fn to_payload(&self) -> Payload {
        Payload::from_value(&self.indices).expect("integer arrays always encode")
    }

    pub fn from_payload(payload: &Payload) -> Result<Self> {
        let indices: Vec<u64> = payload.decode()?;
        Ok(PrimeSumInput { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// The sum, carried as a bare JSON integer of arbitrary length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeSumOutput {
    pub sum: BigUint,
}

impl PrimeSumOutput {
    pub fn to_payload(&self) -> Payload {
        Payload::from_json_text(self.sum.to_string()).expect("decimal digits are valid JSON")
    }

    pub fn from_payload(payload: &Payload) -> Result<Self> {
        let text = payload.as_str().trim();
        if text.is_empty() || !text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(SpexError::format(format!(
                "PrimeSum output must be a non-negative integer, got {text}"
            )));
        }
        let sum = text
            .parse()
            .map_err(|e| SpexError::format(format!("bad PrimeSum output: {e}")))?;
        Ok(PrimeSumOutput { sum })
    }
}

/// What a lazy solver puts in the filter for states it skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoyPolicy {
    /// Insert hashes of fresh random values so the count still matches.
    RandomDecoys,
    /// Insert nothing; the count check catches this.
    Omit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverBehavior {
    Honest,
    Lazy { skip_fraction: f64, decoys: DecoyPolicy },
    Adversarial { output_delta: i64 },
}

impl SolverBehavior {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SolverBehavior::Honest => Ok(()),
            SolverBehavior::Lazy { skip_fraction, .. } => {
                if skip_fraction > 0.0 && skip_fraction <= 1.0 {
                    Ok(())
                } else {
                    Err(SpexError::param(format!(
                        "lazy skip fraction must lie in (0, 1], got {skip_fraction}"
                    )))
                }
            }
            SolverBehavior::Adversarial { output_delta } => {
                if output_delta != 0 {
                    Ok(())
                } else {
                    Err(SpexError::param("adversarial output delta must be nonzero"))
                }
            }
        }
    }

    pub fn is_honest(&self) -> bool {
        matches!(self, SolverBehavior::Honest)
    }

    /// `floor(q * n)` states skipped out of `n`.
    pub fn skipped(&self, n: usize) -> usize {
        match *self {
            SolverBehavior::Lazy { skip_fraction, .. } => ((skip_fraction * n as f64 + 1e-9).floor() as usize).min(n),
            _ => 0,
        }
    }
}

impl fmt::Display for SolverBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SolverBehavior::Honest => write!(f, "honest"),
            SolverBehavior::Lazy {
                skip_fraction,
                decoys: DecoyPolicy::RandomDecoys,
            } => {
                write!(f, "lazy:{skip_fraction}")
            }
            SolverBehavior::Lazy {
                skip_fraction,
                decoys: DecoyPolicy::Omit,
            } => {
                write!(f, "lazy:{skip_fraction}:omit")
            }
            SolverBehavior::Adversarial { output_delta } => write!(f, "adversarial:{output_delta:+}"),
        }
    }
}

/// `honest`, `lazy:<q>[:decoy|:omit]` or `adversarial:<delta>`.
impl FromStr for SolverBehavior {
    type Err = SpexError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let bad = || SpexError::param(format!("unrecognized solver behavior '{s}'"));
        let behavior = match (kind, args.as_slice()) {
            ("honest", []) => SolverBehavior::Honest,
            ("lazy", [q]) | ("lazy", [q, "decoy"]) => SolverBehavior::Lazy {
                skip_fraction: q.parse().map_err(|_| bad())?,
                decoys: DecoyPolicy::RandomDecoys,
            },
            ("lazy", [q, "omit"]) => SolverBehavior::Lazy {
                skip_fraction: q.parse().map_err(|_| bad())?,
                decoys: DecoyPolicy::Omit,
            },
            ("adversarial", [d]) => SolverBehavior::Adversarial {
                output_delta: d.trim_start_matches('+').parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        behavior.validate()?;
        Ok(behavior)
    }
}

impl Serialize for SolverBehavior {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SolverBehavior {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// The state hash recorded for a computed prime.
pub fn prime_state(prime: u64) -> StateHash {
    hash_u64(prime)
}

/// Builds the proof filter for `states`.
///
/// The filter starts sized for `states.len()` items (at least
/// [`MIN_PROOF_CAPACITY`]) at the declared rate and
/// doubles its capacity until the fill-implied FPR is within
/// [`PROOF_HEADROOM`] of that rate.
pub fn build_proof_filter(states: &[StateHash], declared_fpr: f64, seed: u64) -> Result<BloomFilter> {
    let mut capacity = (states.len() as u64).max(MIN_PROOF_CAPACITY);
    loop {
        let mut filter = BloomFilter::with_seed(FilterParams::new(capacity, declared_fpr)?, seed);
        for s in states {
            filter.insert(s.value());
        }
        if filter.fill_fpr() <= declared_fpr * PROOF_HEADROOM {
            return Ok(filter);
        }
        capacity = capacity.saturating_mul(2);
    }
}

fn sum_primes<I: IntoIterator<Item = u64>>(primes: I) -> BigUint {
    primes.into_iter().map(BigUint::from).sum()
}

/// Reference output: the plain sum, no proof.
pub fn honest_sum(input: &PrimeSumInput) -> Result<BigUint> {
    input.validate()?;
    Ok(sum_primes(
        input
            .indices
            .iter()
            .map(|&i| nth_prime(i))
            .collect::<Result<Vec<_>>>()?,
    ))
}

fn apply_delta(sum: BigUint, delta: i64) -> Result<BigUint> {
    let shifted = BigInt::from(sum) + BigInt::from(delta);
    shifted
        .to_biguint()
        .ok_or_else(|| SpexError::param("adversarial delta drives the sum below zero"))
}

fn decode_input(request: &SolverRequest) -> Result<PrimeSumInput> {
    let input = PrimeSumInput::from_payload(&request.solver_input).map_err(|e| SpexError::param(e.to_string()))?;
    input.validate()?;
    Ok(input)
}

/// Runs the solver under `behavior`.
///
/// Honest: sums every prime and inserts each one. Lazy: skips `floor(q n)`
/// random positions, leaving their primes out of both sum and filter, and
/// fills the gap with decoys unless the policy is [`DecoyPolicy::Omit`].
/// Adversarial: honest proof, output shifted by `output_delta`.
pub fn solve(request: &SolverRequest, behavior: SolverBehavior, rng_seed: u64) -> Result<SolverResponse> {
    request.validate()?;
    behavior.validate()?;
    let input = decode_input(request)?;
    let mut seeds = SeedChain::new(rng_seed);
    let filter_seed = seeds.next_seed();
    let skip_seed = seeds.next_seed();
    let mut decoy_rng = seeded(seeds.next_seed());

    let n = input.len();
    let mut skipped = vec![false; n];
    let skip_count = behavior.skipped(n);
    if skip_count > 0 {
        let mut rng = seeded(skip_seed);
        for pos in rand::seq::index::sample(&mut rng, n, skip_count) {
            skipped[pos] = true;
        }
    }

    let mut states = Vec::with_capacity(n);
    let mut computed = Vec::with_capacity(n);
    for (&index, &skip) in input.indices.iter().zip(&skipped) {
        if skip {
            if let SolverBehavior::Lazy {
                decoys: DecoyPolicy::RandomDecoys,
                ..
            } = behavior
            {
                states.push(hash_u64(decoy_rng.next_u64()));
            }
        } else {
            let p = nth_prime(index)?;
            computed.push(p);
            states.push(prime_state(p));
        }
    }

    let mut sum = sum_primes(computed);
    if let SolverBehavior::Adversarial { output_delta } = behavior {
        sum = apply_delta(sum, output_delta)?;
    }
    let filter = build_proof_filter(&states, request.false_positive_rate, filter_seed)?;
    Ok(SolverResponse {
        solver_output: PrimeSumOutput { sum }.to_payload(),
        solver_proof: SolverProof::from_filter(&filter),
    })
}

/// A verifier response plus the number of prime computations it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub response: VerifierResponse,
    pub states_recomputed: u64,
}

fn verifier_input(request: &VerifierRequest) -> Result<PrimeSumInput> {
    request.validate()?;
    let input = PrimeSumInput::from_payload(&request.solver_request.solver_input)?;
    input.validate().map_err(|e| SpexError::format(e.to_string()))?;
    Ok(input)
}

/// Sampling verifier against lazy solvers.
pub fn verify_lazy(request: &VerifierRequest, rng_seed: u64) -> Result<VerifierResponse> {
    verify_lazy_traced(request, &FprSlack::default(), rng_seed).map(|v| v.response)
}

/// Checks proof sanity, then recomputes `ceil(delta |I|)` sampled primes and
/// requires each one in the filter. Stops at the first miss.
pub fn verify_lazy_traced(request: &VerifierRequest, slack: &FprSlack, rng_seed: u64) -> Result<Verdict> {
    let input = verifier_input(request)?;
    let mut seeds = SeedChain::new(rng_seed);
    let probe_seed = seeds.next_seed();
    let sample_seed = seeds.next_seed();

    let filter = match check_proof_sanity(
        &request.solver_proof,
        request.solver_request.false_positive_rate,
        input.len() as u64,
        slack,
        probe_seed,
    )? {
        Sanity::Passed { filter, .. } => filter,
        Sanity::Failed(evidence) => {
            return Ok(Verdict {
                response: VerifierResponse::rejected(0, evidence),
                states_recomputed: 0,
            });
        }
    };

    let mut checked = 0u64;
    for pos in sample_indices(input.len(), request.verification_ratio, sample_seed)? {
        let p = nth_prime(input.indices[pos])?;
        checked += 1;
        let state = prime_state(p);
        if !filter.lookup(state.value()) {
            return Ok(Verdict {
                response: VerifierResponse::rejected(
                    checked,
                    Evidence::MissingState {
                        state: p.to_string(),
                        hash: state,
                    },
                ),
                states_recomputed: checked,
            });
        }
    }
    Ok(Verdict {
        response: VerifierResponse::verified(checked),
        states_recomputed: checked,
    })
}

/// Recompute verifier against adversarial solvers.
pub fn verify_adversarial(request: &VerifierRequest, rng_seed: u64) -> Result<VerifierResponse> {
    verify_adversarial_traced(request, rng_seed).map(|v| v.response)
}

/// With probability delta recomputes the whole sum and compares it with the
/// reported output. `countItems` is 1 on every path.
pub fn verify_adversarial_traced(request: &VerifierRequest, rng_seed: u64) -> Result<Verdict> {
    let input = verifier_input(request)?;
    let reported = PrimeSumOutput::from_payload(&request.solver_output)?;
    if !recompute_gate(request.verification_ratio, rng_seed)? {
        return Ok(Verdict {
            response: VerifierResponse::verified(1),
            states_recomputed: 0,
        });
    }
    compare_full(&input, &reported, 1)
}

fn compare_full(input: &PrimeSumInput, reported: &PrimeSumOutput, count_items: u64) -> Result<Verdict> {
    let recomputed = honest_sum(input)?;
    let response = if recomputed == reported.sum {
        VerifierResponse::verified(count_items)
    } else {
        VerifierResponse::rejected(
            count_items,
            Evidence::OutputMismatch {
                recomputed_output: recomputed.to_string(),
            },
        )
    };
    Ok(Verdict {
        response,
        states_recomputed: input.len() as u64,
    })
}

/// Baseline protocol: always recompute everything and compare outputs.
pub fn verify_baseline(request: &VerifierRequest) -> Result<Verdict> {
    let input = verifier_input(request)?;
    let reported = PrimeSumOutput::from_payload(&request.solver_output)?;
    compare_full(&input, &reported, input.len() as u64)
}

/// PrimeSum split into a chain of stages. Stage `j` holds the running sum
/// after its chunk of indices, so checking stage `j` means recomputing
/// every chunk up to and including `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StagedPrimeSum {
    stages: usize,
}

impl StagedPrimeSum {
    pub fn new(stages: usize) -> Result<Self> {
        if stages == 0 {
            return Err(SpexError::param("a staged task needs at least one stage"));
        }
        Ok(StagedPrimeSum { stages })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Exclusive end position of each stage's chunk; chunk sizes differ by at most one.
    pub fn boundaries(&self, n: usize) -> Result<Vec<usize>> {
        if n < self.stages {
            return Err(SpexError::param(format!(
                "{n} indices cannot fill {} stages",
                self.stages
            )));
        }
        Ok((1..=self.stages).map(|j| j * n / self.stages).collect())
    }

    fn stage_state(partial: &BigUint) -> StateHash {
        hash_integer(&BigInt::from(partial.clone()))
    }

    /// Running sums at each stage end.
    fn partial_sums(input: &PrimeSumInput, ends: &[usize], upto: usize) -> Result<Vec<BigUint>> {
        let mut out = Vec::with_capacity(upto);
        let mut acc = BigUint::default();
        let mut start = 0;
        for &end in &ends[..upto] {
            for &i in &input.indices[start..end] {
                acc += nth_prime(i)?;
            }
            out.push(acc.clone());
            start = end;
        }
        Ok(out)
    }

    /// Lazy solvers here skip the last `floor(q S)` stages outright.
    pub fn solve(&self, request: &SolverRequest, behavior: SolverBehavior, rng_seed: u64) -> Result<SolverResponse> {
        request.validate()?;
        behavior.validate()?;
        let input = decode_input(request)?;
        let ends = self.boundaries(input.len())?;
        let mut seeds = SeedChain::new(rng_seed);
        let filter_seed = seeds.next_seed();
        let mut decoy_rng = seeded(seeds.next_seed());

        let done = self.stages - behavior.skipped(self.stages);
        let partials = Self::partial_sums(&input, &ends, done)?;
        let mut states: Vec<StateHash> = partials.iter().map(Self::stage_state).collect();
        if let SolverBehavior::Lazy {
            decoys: DecoyPolicy::RandomDecoys,
            ..
        } = behavior
        {
            states.extend((done..self.stages).map(|_| hash_u64(decoy_rng.next_u64())));
        }
        let mut sum = partials.last().cloned().unwrap_or_default();
        if let SolverBehavior::Adversarial { output_delta } = behavior {
            sum = apply_delta(sum, output_delta)?;
        }
        let filter = build_proof_filter(&states, request.false_positive_rate, filter_seed)?;
        Ok(SolverResponse {
            solver_output: PrimeSumOutput { sum }.to_payload(),
            solver_proof: SolverProof::from_filter(&filter),
        })
    }

    /// Samples `ceil(delta S)` stages, recomputes the prefix up to the deepest
    /// one and checks the sampled stages in order. When the final stage is
    /// sampled the reported output is compared with it as well.
    pub fn verify(&self, request: &VerifierRequest, slack: &FprSlack, rng_seed: u64) -> Result<Verdict> {
        let input = verifier_input(request)?;
        let ends = self.boundaries(input.len())?;
        let mut seeds = SeedChain::new(rng_seed);
        let probe_seed = seeds.next_seed();
        let sample_seed = seeds.next_seed();

        let filter = match check_proof_sanity(
            &request.solver_proof,
            request.solver_request.false_positive_rate,
            self.stages as u64,
            slack,
            probe_seed,
        )? {
            Sanity::Passed { filter, .. } => filter,
            Sanity::Failed(evidence) => {
                return Ok(Verdict {
                    response: VerifierResponse::rejected(0, evidence),
                    states_recomputed: 0,
                });
            }
        };

        let mut sampled = sample_indices(self.stages, request.verification_ratio, sample_seed)?;
        sampled.sort_unstable();
        let Some(&deepest) = sampled.last() else {
            return Ok(Verdict {
                response: VerifierResponse::verified(0),
                states_recomputed: 0,
            });
        };
        let partials = Self::partial_sums(&input, &ends, deepest + 1)?;
        let work = ends[deepest] as u64;
        let mut checked = 0;
        for &stage in &sampled {
            checked += 1;
            let state = Self::stage_state(&partials[stage]);
            let evidence = if !filter.lookup(state.value()) {
                Some(Evidence::MissingState {
                    state: partials[stage].to_string(),
                    hash: state,
                })
            } else if stage + 1 == self.stages
                && PrimeSumOutput::from_payload(&request.solver_output)?.sum != partials[stage]
            {
                Some(Evidence::OutputMismatch {
                    recomputed_output: partials[stage].to_string(),
                })
            } else {
                None
            };
            if let Some(evidence) = evidence {
                return Ok(Verdict {
                    response: VerifierResponse::rejected(checked, evidence),
                    states_recomputed: work,
                });
            }
        }
        Ok(Verdict {
            response: VerifierResponse::verified(checked),
            states_recomputed: work,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(indices: Vec<u64>, fpr: f64) -> SolverRequest {
        SolverRequest::new(PrimeSumInput::new(indices).unwrap().to_payload(), fpr).unwrap()
    }

    fn sum_of(resp: &SolverResponse) -> BigUint {
        PrimeSumOutput::from_payload(&resp.solver_output).unwrap().sum
    }

    #[test]
    fn first_ten_primes_sum_to_129() {
        let req = request((1..=10).collect(), 0.01);
        let resp = solve(&req, SolverBehavior::Honest, 0).unwrap();
        assert_eq!(sum_of(&resp), BigUint::from(129u32));
        assert_eq!(resp.solver_output.as_str(), "129");
        assert_eq!(resp.solver_proof.count_items, 10);
        let filter = resp.solver_proof.filter().unwrap();
        for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29] {
            assert!(filter.lookup(prime_state(p).value()));
        }
    }

    #[test]
    fn single_index() {
        let resp = solve(&request(vec![1], 0.01), SolverBehavior::Honest, 0).unwrap();
        assert_eq!(sum_of(&resp), BigUint::from(2u32));
    }

    #[test]
    fn adversarial_shifts_output_only() {
        let req = request((1..=10).collect(), 0.01);
        let honest = solve(&req, SolverBehavior::Honest, 4).unwrap();
        let adv = solve(&req, SolverBehavior::Adversarial { output_delta: 1 }, 4).unwrap();
        assert_eq!(sum_of(&adv), BigUint::from(130u32));
        assert_eq!(adv.solver_proof, honest.solver_proof);
        let under = solve(
            &request(vec![1], 0.01),
            SolverBehavior::Adversarial { output_delta: -5 },
            0,
        );
        assert!(under.is_err());
    }

    #[test]
    fn lazy_keeps_count_with_decoys() {
        let req = request((1..=10).collect(), 0.01);
        let lazy = SolverBehavior::Lazy {
            skip_fraction: 0.5,
            decoys: DecoyPolicy::RandomDecoys,
        };
        let resp = solve(&req, lazy, 9).unwrap();
        assert_eq!(resp.solver_proof.count_items, 10);
        assert!(sum_of(&resp) < BigUint::from(129u32));
        let omit = SolverBehavior::Lazy {
            skip_fraction: 0.5,
            decoys: DecoyPolicy::Omit,
        };
        assert_eq!(solve(&req, omit, 9).unwrap().solver_proof.count_items, 5);
    }

    #[test]
    fn duplicates_are_counted_and_summed() {
        let resp = solve(&request(vec![2, 2, 2], 0.01), SolverBehavior::Honest, 0).unwrap();
        assert_eq!(sum_of(&resp), BigUint::from(9u32));
        assert_eq!(resp.solver_proof.count_items, 3);
    }

    #[test]
    fn malformed_input_is_parameter_error() {
        let bad = SolverRequest::new(Payload::from_json_text("{\"x\":1}").unwrap(), 0.01).unwrap();
        assert!(matches!(
            solve(&bad, SolverBehavior::Honest, 0),
            Err(SpexError::Parameter(_))
        ));
        let zero = SolverRequest::new(Payload::from_json_text("[0]").unwrap(), 0.01).unwrap();
        assert!(matches!(
            solve(&zero, SolverBehavior::Honest, 0),
            Err(SpexError::Parameter(_))
        ));
        let empty = SolverRequest::new(Payload::from_json_text("[]").unwrap(), 0.01).unwrap();
        assert!(solve(&empty, SolverBehavior::Honest, 0).is_err());
    }

    #[test]
    fn headroom_holds_for_tiny_inputs() {
        for n in 1..=20u64 {
            let resp = solve(&request((1..=n).collect(), 0.01), SolverBehavior::Honest, n).unwrap();
            let f = resp.solver_proof.filter().unwrap();
            assert!(f.fill_fpr() <= 0.005, "n={n} fill fpr {}", f.fill_fpr());
        }
    }

    #[test]
    fn behavior_strings() {
        for s in [
            "honest",
            "lazy:0.5",
            "lazy:0.25:omit",
            "adversarial:+1",
            "adversarial:-3",
        ] {
            let b: SolverBehavior = s.parse().unwrap();
            assert_eq!(b.to_string(), s);
        }
        assert_eq!(
            "lazy:0.5:decoy".parse::<SolverBehavior>().unwrap(),
            SolverBehavior::Lazy {
                skip_fraction: 0.5,
                decoys: DecoyPolicy::RandomDecoys
            }
        );
        for bad in [
            "",
            "lazy",
            "lazy:0",
            "lazy:1.5",
            "adversarial:0",
            "adversarial:x",
            "greedy",
        ] {
            assert!(bad.parse::<SolverBehavior>().is_err(), "{bad}");
        }
    }

    #[test]
    fn lazy_verifier_accepts_honest_full_check() {
        let req = request((1..=50).collect(), 0.01);
        let resp = solve(&req, SolverBehavior::Honest, 1).unwrap();
        let vreq = VerifierRequest::new(req, resp, 1.0).unwrap();
        assert_eq!(verify_lazy(&vreq, 2).unwrap(), VerifierResponse::verified(50));
    }

    #[test]
    fn lazy_verifier_names_missing_prime() {
        // proof omits 29 (the 10th prime); pad with a decoy to keep the count
        let req = request((1..=10).collect(), 1e-6);
        let mut states: Vec<StateHash> = (1..=9).map(|i| prime_state(nth_prime(i).unwrap())).collect();
        states.push(hash_u64(0xdead_beef));
        let filter = build_proof_filter(&states, 1e-6, 0).unwrap();
        let resp = SolverResponse {
            solver_output: PrimeSumOutput {
                sum: BigUint::from(129u32),
            }
            .to_payload(),
            solver_proof: SolverProof::from_filter(&filter),
        };
        let vreq = VerifierRequest::new(req, resp, 1.0).unwrap();
        let out = verify_lazy(&vreq, 5).unwrap();
        assert!(!out.is_verified);
        match out.evidence {
            Some(Evidence::MissingState { state, hash }) => {
                assert_eq!(state, "29");
                assert_eq!(hash, prime_state(29));
            }
            other => panic!("unexpected evidence {other:?}"),
        }
        assert!(out.count_items >= 1 && out.count_items <= 10);
    }

    #[test]
    fn lazy_verifier_count_mismatch_reports_zero() {
        let req = request((1..=10).collect(), 0.01);
        let omit = SolverBehavior::Lazy {
            skip_fraction: 0.3,
            decoys: DecoyPolicy::Omit,
        };
        let resp = solve(&req, omit, 1).unwrap();
        let out = verify_lazy(&VerifierRequest::new(req, resp, 0.5).unwrap(), 0).unwrap();
        assert_eq!(out.count_items, 0);
        assert_eq!(
            out.evidence,
            Some(Evidence::CountMismatch {
                expected: 10,
                declared: 7
            })
        );
    }

    #[test]
    fn adversarial_verifier() {
        let req = request((1..=10).collect(), 0.01);
        let adv = solve(&req, SolverBehavior::Adversarial { output_delta: 1 }, 0).unwrap();
        let caught = VerifierRequest::new(req.clone(), adv.clone(), 1.0).unwrap();
        let out = verify_adversarial(&caught, 3).unwrap();
        assert!(!out.is_verified);
        assert_eq!(out.count_items, 1);
        assert_eq!(
            out.evidence,
            Some(Evidence::OutputMismatch {
                recomputed_output: "129".into()
            })
        );
        let blind = VerifierRequest::new(req, adv, 0.0).unwrap();
        assert_eq!(verify_adversarial(&blind, 3).unwrap(), VerifierResponse::verified(1));
    }

    #[test]
    fn verifiers_reject_undecodable_payloads() {
        let req = request((1..=4).collect(), 0.01);
        let mut resp = solve(&req, SolverBehavior::Honest, 0).unwrap();
        resp.solver_output = Payload::from_json_text("\"many\"").unwrap();
        let vreq = VerifierRequest::new(req.clone(), resp, 1.0).unwrap();
        assert!(matches!(verify_adversarial(&vreq, 0), Err(SpexError::Format(_))));
        let mut vreq2 = vreq.clone();
        vreq2.solver_request.solver_input = Payload::from_json_text("[-1]").unwrap();
        assert!(matches!(verify_lazy(&vreq2, 0), Err(SpexError::Format(_))));
    }

    #[test]
    fn baseline_recomputes_everything() {
        let req = request((1..=10).collect(), 0.01);
        let honest = solve(&req, SolverBehavior::Honest, 0).unwrap();
        let v = verify_baseline(&VerifierRequest::new(req.clone(), honest, 1.0).unwrap()).unwrap();
        assert!(v.response.is_verified);
        assert_eq!(v.states_recomputed, 10);
        let adv = solve(&req, SolverBehavior::Adversarial { output_delta: 2 }, 0).unwrap();
        let v = verify_baseline(&VerifierRequest::new(req, adv, 1.0).unwrap()).unwrap();
        assert!(!v.response.is_verified);
    }

    #[test]
    fn staged_boundaries_and_honest_run() {
        let staged = StagedPrimeSum::new(4).unwrap();
        assert_eq!(staged.boundaries(10).unwrap(), vec![2, 5, 7, 10]);
        assert!(staged.boundaries(3).is_err());
        let req = request((1..=10).collect(), 0.01);
        let resp = staged.solve(&req, SolverBehavior::Honest, 0).unwrap();
        assert_eq!(sum_of(&resp), BigUint::from(129u32));
        assert_eq!(resp.solver_proof.count_items, 4);
        let vreq = VerifierRequest::new(req, resp, 1.0).unwrap();
        let v = staged.verify(&vreq, &FprSlack::default(), 0).unwrap();
        assert_eq!(v.response, VerifierResponse::verified(4));
        assert_eq!(v.states_recomputed, 10);
    }

    #[test]
    fn staged_catches_tail_skipping_and_output_tampering() {
        let staged = StagedPrimeSum::new(4).unwrap();
        let req = request((1..=12).collect(), 1e-6);
        let lazy = SolverBehavior::Lazy {
            skip_fraction: 0.25,
            decoys: DecoyPolicy::RandomDecoys,
        };
        let resp = staged.solve(&req, lazy, 0).unwrap();
        let v = staged
            .verify(
                &VerifierRequest::new(req.clone(), resp, 1.0).unwrap(),
                &FprSlack::default(),
                0,
            )
            .unwrap();
        assert!(
            matches!(v.response.evidence, Some(Evidence::MissingState { .. })),
            "{v:?}"
        );
        assert_eq!(v.response.count_items, 4);

        let adv = staged
            .solve(&req, SolverBehavior::Adversarial { output_delta: 7 }, 0)
            .unwrap();
        let v = staged
            .verify(&VerifierRequest::new(req, adv, 1.0).unwrap(), &FprSlack::default(), 0)
            .unwrap();
        assert!(matches!(v.response.evidence, Some(Evidence::OutputMismatch { .. })));
    }
}
