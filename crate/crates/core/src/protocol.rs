//! Request/response envelopes and the task-agnostic verifier steps.
//!
//! Task payloads are opaque JSON texts; the protocol never looks inside
//! them. Randomness is always passed in as a seed so every verdict can be
//! replayed.

use std::fmt;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::bloom::{BloomFilter, FprEstimate};
use crate::error::{Result, SpexError};
use crate::rng::seeded;

/// Probe count used by the default saturation check.
pub const DEFAULT_FPR_TRIALS: u64 = 10_000;

/// An opaque task payload, kept as the exact JSON text it was built from.
#[derive(Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Payload(Box<RawValue>);

impl Payload {
    pub fn from_json_text(text: impl Into<String>) -> Result<Self> {
        RawValue::from_string(text.into())
            .map(Payload)
            .map_err(|e| SpexError::format(format!("payload is not valid JSON: {e}")))
    }

    pub fn from_value<T: Serialize>(value: &T) -> Result<Self> {
        let text =
            serde_json::to_string(value).map_err(|e| SpexError::format(format!("cannot encode payload: {e}")))?;
        Self::from_json_text(text)
    }

    pub fn decode<'a, T: Deserialize<'a>>(&'a self) -> Result<T> {
        serde_json::from_str(self.0.get()).map_err(|e| SpexError::format(format!("cannot decode payload: {e}")))
    }

    pub fn as_str(&self) -> &str {
        self.0.get()
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Payload({})", self.0.get())
    }
}

impl PartialEq for Payload {
    fn eq(&self, other: &Self) -> bool {
        self.0.get() == other.0.get()
    }
}

fn check_probability(name: &str, p: f64, lo_open: bool, hi_open: bool) -> Result<()> {
    let lo_ok = if lo_open { p > 0.0 } else { p >= 0.0 };
    let hi_ok = if hi_open { p < 1.0 } else { p <= 1.0 };
    if lo_ok && hi_ok {
        Ok(())
    } else {
        Err(SpexError::param(format!("{name} out of range: {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverRequest {
    pub solver_input: Payload,
    pub false_positive_rate: f64,
}

impl SolverRequest {
    pub fn new(solver_input: Payload, false_positive_rate: f64) -> Result<Self> {
        let req = SolverRequest {
            solver_input,
            false_positive_rate,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("falsePositiveRate", self.false_positive_rate, true, true)
    }
}

mod base64_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&BASE64.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        BASE64.decode(text).map_err(serde::de::Error::custom)
    }
}

/// The proof: a serialized Bloom filter plus the number of insertions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverProof {
    #[serde(with = "base64_bytes")]
    pub bloom_filter: Vec<u8>,
    /// Logical states inserted, duplicates included. PrimeSum inserts one per index.
    pub count_items: u64,
}

impl SolverProof {
    pub fn from_filter(filter: &BloomFilter) -> Self {
        SolverProof {
            bloom_filter: filter.serialize(),
            count_items: filter.inserted_count(),
        }
    }

    pub fn filter(&self) -> Result<BloomFilter> {
        Ok(BloomFilter::deserialize(&self.bloom_filter)?.with_inserted_count(self.count_items))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverResponse {
    pub solver_output: Payload,
    pub solver_proof: SolverProof,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifierRequest {
    pub solver_request: SolverRequest,
    pub solver_output: Payload,
    pub solver_proof: SolverProof,
    pub verification_ratio: f64,
}

impl VerifierRequest {
    pub fn new(request: SolverRequest, response: SolverResponse, verification_ratio: f64) -> Result<Self> {
        let req = VerifierRequest {
            solver_request: request,
            solver_output: response.solver_output,
            solver_proof: response.solver_proof,
            verification_ratio,
        };
        req.validate()?;
        Ok(req)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver_request.validate()?;
        check_probability("verificationRatio", self.verification_ratio, false, false)
    }
}

/// Why a verification failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Evidence {
    /// The filter answers positively far more often than declared.
    #[serde(rename_all = "camelCase")]
    FprEstimate { estimate: f64, hits: u64, trials: u64 },
    /// `countItems` disagrees with the number of states the input implies.
    #[serde(rename_all = "camelCase")]
    CountMismatch { expected: u64, declared: u64 },
    /// A recomputed state is absent from the filter.
    #[serde(rename_all = "camelCase")]
    MissingState {
        state: String,
        hash: crate::hashing::StateHash,
    },
    /// Full recomputation produced a different output (kept as JSON text).
    #[serde(rename_all = "camelCase")]
    OutputMismatch { recomputed_output: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifierResponse {
    pub is_verified: bool,
    pub count_items: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

impl VerifierResponse {
    pub fn verified(count_items: u64) -> Self {
        VerifierResponse {
            is_verified: true,
            count_items,
            evidence: None,
        }
    }

    pub fn rejected(count_items: u64, evidence: Evidence) -> Self {
        VerifierResponse {
            is_verified: false,
            count_items,
            evidence: Some(evidence),
        }
    }
}

/// Tolerance subtracted from the FPR estimate before comparing it with the
/// declared rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FprSlack {
    pub trials: u64,
    /// Fixed slack; `None` means three binomial standard errors of the estimate.
    pub slack: Option<f64>,
}

impl Default for FprSlack {
    fn default() -> Self {
        FprSlack {
            trials: DEFAULT_FPR_TRIALS,
            slack: None,
        }
    }
}

impl FprSlack {
    pub fn three_sigma(trials: u64) -> Self {
        FprSlack { trials, slack: None }
    }

    pub fn fixed(slack: f64, trials: u64) -> Result<Self> {
        if slack.is_nan() || slack < 0.0 {
            return Err(SpexError::param(format!("slack must be non-negative, got {slack}")));
        }
        Ok(FprSlack {
            trials,
            slack: Some(slack),
        })
    }

    pub fn slack_for(&self, estimate: &FprEstimate) -> f64 {
        match self.slack {
            Some(s) => s,
            None => {
                let p = estimate.estimate;
                3.0 * (p * (1.0 - p) / estimate.trials as f64).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Sanity {
    Passed { filter: BloomFilter, estimate: FprEstimate },
    Failed(Evidence),
}

/// Rejects saturated filters and wrong insertion counts.
///
/// The FPR test runs first: `estimate - slack > declared_fpr` fails with the
/// estimate as evidence. A count mismatch fails next. Undecodable filter
/// bytes are a format error, not a failed verification.
pub fn check_proof_sanity(
    proof: &SolverProof,
    declared_fpr: f64,
    expected_count: u64,
    slack: &FprSlack,
    rng_seed: u64,
) -> Result<Sanity> {
    let filter = proof.filter()?;
    let estimate = filter.estimate_fpr(slack.trials, rng_seed)?;
    if estimate.estimate - slack.slack_for(&estimate) > declared_fpr {
        return Ok(Sanity::Failed(Evidence::FprEstimate {
            estimate: estimate.estimate,
            hits: estimate.hits,
            trials: estimate.trials,
        }));
    }
    if proof.count_items != expected_count {
        return Ok(Sanity::Failed(Evidence::CountMismatch {
            expected: expected_count,
            declared: proof.count_items,
        }));
    }
    Ok(Sanity::Passed { filter, estimate })
}

/// `ceil(delta * n)`, ignoring float noise such as `0.3 * 10 = 3.0000000000000004`.
pub fn sample_size(population: usize, delta: f64) -> usize {
    let exact = delta * population as f64;
    let rounded = exact.round();
    let k = if (exact - rounded).abs() < 1e-9 {
        rounded
    } else {
        exact.ceil()
    };
    (k as usize).min(population)
}

/// `ceil(delta * n)` distinct indices in `0..n`, uniformly at random.
pub fn sample_indices(population: usize, delta: f64, rng_seed: u64) -> Result<Vec<usize>> {
    check_probability("delta", delta, false, false)?;
    if population == 0 {
        return Err(SpexError::param("cannot sample from an empty population"));
    }
    let amount = sample_size(population, delta);
    let mut rng = seeded(rng_seed);
    Ok(rand::seq::index::sample(&mut rng, population, amount).into_vec())
}

/// True with probability `delta`: a uniform draw in `[0, 1)` below `delta`.
pub fn recompute_gate(delta: f64, rng_seed: u64) -> Result<bool> {
    check_probability("delta", delta, false, false)?;
    let u: f64 = seeded(rng_seed).random();
    Ok(u < delta)
}

/// The JSON file exchanged between solver and verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ProofEnvelope {
    pub solver_request: SolverRequest,
    pub solver_output: Payload,
    pub solver_proof: SolverProof,
}

impl ProofEnvelope {
    pub fn new(request: SolverRequest, response: SolverResponse) -> Self {
        ProofEnvelope {
            solver_request: request,
            solver_output: response.solver_output,
            solver_proof: response.solver_proof,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("envelope serialization is infallible")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: ProofEnvelope =
            serde_json::from_str(text).map_err(|e| SpexError::format(format!("malformed proof envelope: {e}")))?;
        env.solver_request
            .validate()
            .map_err(|e| SpexError::format(e.to_string()))?;
        Ok(env)
    }

    pub fn verifier_request(&self, verification_ratio: f64) -> Result<VerifierRequest> {
        let req = VerifierRequest {
            solver_request: self.solver_request.clone(),
            solver_output: self.solver_output.clone(),
            solver_proof: self.solver_proof.clone(),
            verification_ratio,
        };
        req.validate()?;
        Ok(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloom::FilterParams;

    fn honest_proof(n: u64) -> SolverProof {
        let mut f = BloomFilter::with_seed(FilterParams::new(n * 2, 0.01).unwrap(), 3);
        (0..n).for_each(|x| f.insert(x));
        SolverProof::from_filter(&f)
    }

    #[test]
    fn saturated_filter_fails_sanity() {
        let f = BloomFilter::saturated(1000, 7, 0).unwrap();
        let proof = SolverProof {
            bloom_filter: f.serialize(),
            count_items: 10,
        };
        match check_proof_sanity(&proof, 0.01, 10, &FprSlack::default(), 1).unwrap() {
            Sanity::Failed(Evidence::FprEstimate { estimate, .. }) => assert_eq!(estimate, 1.0),
            other => panic!("expected FPR failure, got {other:?}"),
        }
    }

    #[test]
    fn count_mismatch_fails_sanity() {
        let proof = honest_proof(100);
        let mut short = proof.clone();
        short.count_items = 99;
        match check_proof_sanity(&short, 0.01, 100, &FprSlack::default(), 1).unwrap() {
            Sanity::Failed(Evidence::CountMismatch { expected, declared }) => {
                assert_eq!((expected, declared), (100, 99))
            }
            other => panic!("expected count failure, got {other:?}"),
        }
        assert!(matches!(
            check_proof_sanity(&proof, 0.01, 100, &FprSlack::default(), 1).unwrap(),
            Sanity::Passed { .. }
        ));
    }

    #[test]
    fn garbage_proof_is_format_error() {
        let proof = SolverProof {
            bloom_filter: b"nope".to_vec(),
            count_items: 0,
        };
        assert!(matches!(
            check_proof_sanity(&proof, 0.01, 0, &FprSlack::default(), 1),
            Err(SpexError::Format(_))
        ));
    }

    #[test]
    fn slack_policies() {
        let est = FprEstimate {
            estimate: 0.01,
            trials: 10_000,
            hits: 100,
        };
        let s = FprSlack::default().slack_for(&est);
        assert!((s - 3.0 * (0.01f64 * 0.99 / 10_000.0).sqrt()).abs() < 1e-15);
        assert_eq!(FprSlack::fixed(0.2, 10).unwrap().slack_for(&est), 0.2);
        assert!(FprSlack::fixed(-0.1, 10).is_err());
        let full = FprEstimate {
            estimate: 1.0,
            trials: 10,
            hits: 10,
        };
        assert_eq!(FprSlack::default().slack_for(&full), 0.0);
    }

    #[test]
    fn sample_sizes() {
        assert_eq!(sample_indices(10, 0.5, 1).unwrap().len(), 5);
        let mut all = sample_indices(10, 1.0, 1).unwrap();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert_eq!(sample_indices(10, 0.01, 1).unwrap().len(), 1);
        assert_eq!(sample_indices(10, 0.0, 1).unwrap().len(), 0);
        assert_eq!(sample_indices(10, 0.3, 1).unwrap().len(), 3);
        assert_eq!(sample_indices(7, 0.5, 1).unwrap().len(), 4);
        assert!(sample_indices(0, 0.5, 1).is_err());
        assert!(sample_indices(10, 1.5, 1).is_err());
        assert_eq!(
            sample_indices(100, 0.4, 9).unwrap(),
            sample_indices(100, 0.4, 9).unwrap()
        );
    }

    #[test]
    fn gate_extremes() {
        assert!((0..1000).all(|s| !recompute_gate(0.0, s).unwrap()));
        assert!((0..1000).all(|s| recompute_gate(1.0, s).unwrap()));
        assert!(recompute_gate(-0.1, 0).is_err());
    }

    #[test]
    fn gate_rate() {
        let fired = (0..100_000u64).filter(|&s| recompute_gate(0.3, s).unwrap()).count();
        let rate = fired as f64 / 100_000.0;
        assert!((rate - 0.3).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn request_validation() {
        let input = Payload::from_json_text("[1,2]").unwrap();
        assert!(SolverRequest::new(input.clone(), 0.0).is_err());
        assert!(SolverRequest::new(input.clone(), 1.0).is_err());
        let req = SolverRequest::new(input.clone(), 0.01).unwrap();
        let resp = SolverResponse {
            solver_output: Payload::from_json_text("3").unwrap(),
            solver_proof: honest_proof(2),
        };
        assert!(VerifierRequest::new(req.clone(), resp.clone(), 1.1).is_err());
        assert!(VerifierRequest::new(req, resp, 0.0).is_ok());
    }

    #[test]
    fn envelope_json_field_names() {
        let req = SolverRequest::new(Payload::from_json_text("[1,2,3]").unwrap(), 0.01).unwrap();
        let resp = SolverResponse {
            solver_output: Payload::from_json_text("10").unwrap(),
            solver_proof: SolverProof {
                bloom_filter: vec![1, 2, 3],
                count_items: 3,
            },
        };
        let json = ProofEnvelope::new(req, resp).to_json();
        assert_eq!(
            json,
            r#"{"solverRequest":{"solverInput":[1,2,3],"falsePositiveRate":0.01},"solverOutput":10,"solverProof":{"bloomFilter":"AQID","countItems":3}}"#
        );
        let back = ProofEnvelope::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn envelope_rejects_malformed() {
        assert!(matches!(ProofEnvelope::from_json("{"), Err(SpexError::Format(_))));
        assert!(ProofEnvelope::from_json(r#"{"solverRequest":{}}"#).is_err());
        let bad_b64 = r#"{"solverRequest":{"solverInput":[1],"falsePositiveRate":0.01},"solverOutput":2,"solverProof":{"bloomFilter":"!!","countItems":1}}"#;
        assert!(ProofEnvelope::from_json(bad_b64).is_err());
        let bad_fpr = r#"{"solverRequest":{"solverInput":[1],"falsePositiveRate":2},"solverOutput":2,"solverProof":{"bloomFilter":"AA==","countItems":1}}"#;
        assert!(ProofEnvelope::from_json(bad_fpr).is_err());
    }

    #[test]
    fn verifier_response_json() {
        let ok = serde_json::to_string(&VerifierResponse::verified(5)).unwrap();
        let parsed: VerifierResponse = serde_json::from_str(&ok).unwrap();
        assert_eq!(parsed, VerifierResponse::verified(5));
        let mismatch = VerifierResponse::rejected(
            1,
            Evidence::OutputMismatch {
                recomputed_output: "129".into(),
            },
        );
        let text = serde_json::to_string(&mismatch).unwrap();
        assert_eq!(serde_json::from_str::<VerifierResponse>(&text).unwrap(), mismatch);
        assert_eq!(ok, r#"{"isVerified":true,"countItems":5}"#);
        let bad = VerifierResponse::rejected(
            0,
            Evidence::CountMismatch {
                expected: 3,
                declared: 2,
            },
        );
        assert_eq!(
            serde_json::to_string(&bad).unwrap(),
            r#"{"isVerified":false,"countItems":0,"evidence":{"kind":"countMismatch","expected":3,"declared":2}}"#
        );
    }
}
