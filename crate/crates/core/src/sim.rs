//! Monte Carlo harness: repeated solve/verify rounds across a grid of
//! confidence levels, compared with analytic detection probabilities.
//!
//! Verifier kinds map onto task shapes:
//!
//! * `lazy`: independent per-index states, sampled and looked up.
//! * `adversarial`: a single atomic state, fully recomputed with probability delta.
//! * `sequential`: a chain of stages; checking a stage recomputes its prefix.
//! * `baseline`: full recomputation every time.
//!
//! Work is counted in prime computations, so reports are deterministic.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Discrete, Hypergeometric};

use crate::error::{Result, SpexError};
use crate::primesum::{
    solve, verify_adversarial_traced, verify_baseline, verify_lazy_traced, DecoyPolicy, PrimeSumInput, SolverBehavior,
    StagedPrimeSum, Verdict,
};
use crate::protocol::{sample_size, Evidence, FprSlack, SolverRequest, VerifierRequest, DEFAULT_FPR_TRIALS};
use crate::rng::{seeded, SeedChain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Primesum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifierKind {
    Lazy,
    Adversarial,
    Sequential,
    Baseline,
}

fn default_stages() -> usize {
    4
}

fn default_fpr_trials() -> u64 {
    DEFAULT_FPR_TRIALS
}

fn default_max_index() -> u64 {
    10_000
}

fn default_task() -> Task {
    Task::Primesum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_task")]
    pub task: Task,
    pub verifier: VerifierKind,
    pub behavior: SolverBehavior,
    pub delta_grid: Vec<f64>,
    /// Number of indices per solver request.
    pub input_size: usize,
    /// Declared filter false positive rate.
    pub fpr: f64,
    pub trials: u64,
    pub master_seed: u64,
    /// Stage count for the sequential shape.
    #[serde(default = "default_stages")]
    pub stages: usize,
    /// Probes per saturation check.
    #[serde(default = "default_fpr_trials")]
    pub fpr_trials: u64,
    /// Indices are drawn without repetition from `1..=max_index`.
    #[serde(default = "default_max_index")]
    pub max_index: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| SpexError::format(format!("bad experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(SpexError::param("trials must be at least 1"));
        }
        if self.delta_grid.is_empty() {
            return Err(SpexError::param("delta grid is empty"));
        }
        if let Some(d) = self.delta_grid.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(SpexError::param(format!("delta {d} outside [0, 1]")));
        }
        if self.input_size == 0 {
            return Err(SpexError::param("input size must be at least 1"));
        }
        if (self.max_index as u128) < self.input_size as u128 {
            return Err(SpexError::param("max index smaller than input size"));
        }
        if !(self.fpr > 0.0 && self.fpr < 1.0) {
            return Err(SpexError::param(format!("fpr {} outside (0, 1)", self.fpr)));
        }
        if self.fpr_trials == 0 {
            return Err(SpexError::param("fpr trials must be at least 1"));
        }
        if self.verifier == VerifierKind::Sequential {
            StagedPrimeSum::new(self.stages)?.boundaries(self.input_size)?;
        }
        self.behavior.validate()
    }

    /// Analytic detection probability at `delta`.
    ///
    /// Filter false positives are modeled with the declared rate, which
    /// bounds the rate honest-style filters actually achieve.
    pub fn predicted_rate(&self, delta: f64) -> Result<f64> {
        let behavior = self.behavior;
        let (states, lookup_verifier) = match self.verifier {
            VerifierKind::Lazy => (self.input_size, true),
            VerifierKind::Sequential => (self.stages, true),
            VerifierKind::Adversarial | VerifierKind::Baseline => (self.input_size, false),
        };
        let skipped = behavior.skipped(states);
        let sampled = sample_size(states, delta);
        let dishonest_output = match behavior {
            SolverBehavior::Honest => false,
            SolverBehavior::Lazy { .. } => skipped > 0,
            SolverBehavior::Adversarial { .. } => true,
        };
        Ok(match (self.verifier, behavior) {
            (_, SolverBehavior::Honest) => 0.0,
            (
                _,
                SolverBehavior::Lazy {
                    decoys: DecoyPolicy::Omit,
                    ..
                },
            ) if lookup_verifier => {
                if skipped > 0 {
                    1.0
                } else {
                    0.0
                }
            }
            (_, SolverBehavior::Lazy { .. }) if lookup_verifier => {
                predicted_detection_lazy(states as u64, skipped as u64, sampled as u64, self.fpr)?
            }
            (VerifierKind::Lazy, SolverBehavior::Adversarial { .. }) => 0.0,
            // the final stage carries the output
            (VerifierKind::Sequential, SolverBehavior::Adversarial { .. }) => sampled as f64 / states as f64,
            (VerifierKind::Adversarial, _) => {
                if dishonest_output {
                    delta
                } else {
                    0.0
                }
            }
            (VerifierKind::Baseline, _) => {
                if dishonest_output {
                    1.0
                } else {
                    0.0
                }
            }
            _ => unreachable!("lookup verifiers handled above"),
        })
    }
}

/// Probability that sampling `sampled` of `n` states without repetition
/// hits at least one of `skipped` missing states that is not rescued by a
/// filter false positive:
/// `1 - sum_j P[Hypergeometric(n, skipped, sampled) = j] * fpr^j`.
pub fn predicted_detection_lazy(n: u64, skipped: u64, sampled: u64, fpr: f64) -> Result<f64> {
    if skipped > n || sampled > n {
        return Err(SpexError::param(format!(
            "skipped ({skipped}) and sampled ({sampled}) must not exceed n ({n})"
        )));
    }
    if !(0.0..=1.0).contains(&fpr) {
        return Err(SpexError::param(format!("fpr {fpr} outside [0, 1]")));
    }
    if skipped == 0 || sampled == 0 {
        return Ok(0.0);
    }
    let dist = Hypergeometric::new(n, skipped, sampled)
        .map_err(|e| SpexError::param(format!("hypergeometric parameters: {e}")))?;
    let lo = (sampled + skipped).saturating_sub(n);
    let hi = sampled.min(skipped);
    let escaped: f64 = (lo..=hi).map(|j| dist.pmf(j) * fpr.powi(j as i32)).sum();
    Ok((1.0 - escaped).clamp(0.0, 1.0))
}

/// Three binomial standard errors, `3 sqrt(p (1 - p) / trials)`.
pub fn three_sigma(p: f64, trials: u64) -> f64 {
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialOutcome {
    pub detected: bool,
    pub states_checked: u64,
    pub solver_states: u64,
    /// Evidence kind when the verifier rejected, e.g. `missingState`.
    pub evidence: Option<String>,
}

fn evidence_kind(e: &Evidence) -> &'static str {
    match e {
        Evidence::FprEstimate { .. } => "fprEstimate",
        Evidence::CountMismatch { .. } => "countMismatch",
        Evidence::MissingState { .. } => "missingState",
        Evidence::OutputMismatch { .. } => "outputMismatch",
    }
}

/// One solve/verify round at `delta`, fully determined by `trial_seed`.
pub fn run_trial(config: &ExperimentConfig, delta: f64, trial_seed: u64) -> Result<TrialOutcome> {
    let mut seeds = SeedChain::new(trial_seed);
    let input_seed = seeds.next_seed();
    let solve_seed = seeds.next_seed();
    let verify_seed = seeds.next_seed();

    let mut rng = seeded(input_seed);
    let indices = rand::seq::index::sample(&mut rng, config.max_index as usize, config.input_size)
        .into_iter()
        .map(|i| i as u64 + 1)
        .collect();
    let input = PrimeSumInput::new(indices)?;
    let request = SolverRequest::new(input.to_payload(), config.fpr)?;
    let slack = FprSlack::three_sigma(config.fpr_trials);

    let verdict: Verdict = match config.verifier {
        VerifierKind::Sequential => {
            let staged = StagedPrimeSum::new(config.stages)?;
            let response = staged.solve(&request, config.behavior, solve_seed)?;
            let vreq = VerifierRequest::new(request, response, delta)?;
            staged.verify(&vreq, &slack, verify_seed)?
        }
        kind => {
            let response = solve(&request, config.behavior, solve_seed)?;
            let vreq = VerifierRequest::new(request, response, delta)?;
            match kind {
                VerifierKind::Lazy => verify_lazy_traced(&vreq, &slack, verify_seed)?,
                VerifierKind::Adversarial => verify_adversarial_traced(&vreq, verify_seed)?,
                _ => verify_baseline(&vreq)?,
            }
        }
    };
    Ok(TrialOutcome {
        detected: !verdict.response.is_verified,
        states_checked: verdict.states_recomputed,
        solver_states: config.input_size as u64,
        evidence: verdict.response.evidence.as_ref().map(|e| evidence_kind(e).to_string()),
    })
}

/// Aggregates for one grid point. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub delta: f64,
    pub behavior: String,
    pub trials: u64,
    pub detected_rate: f64,
    pub predicted_rate: f64,
    pub work_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub verifier: VerifierKind,
    pub rows: Vec<DetectionRow>,
}

impl DetectionReport {
    pub fn row(&self, delta: f64) -> Option<&DetectionRow> {
        self.rows.iter().find(|r| (r.delta - delta).abs() < 1e-12)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            writer
                .serialize(row)
                .map_err(|e| SpexError::format(format!("csv encoding failed: {e}")))?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| SpexError::format(format!("csv encoding failed: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Runs `trials` rounds per grid point. Trial seeds come from one SplitMix64
/// chain over `master_seed`, consumed grid point by grid point.
pub fn run_experiment(config: &ExperimentConfig) -> Result<DetectionReport> {
    config.validate()?;
    let mut seeds = SeedChain::new(config.master_seed);
    let mut rows = Vec::with_capacity(config.delta_grid.len());
    for &delta in &config.delta_grid {
        let mut detected = 0u64;
        let mut work = 0.0;
        for _ in 0..config.trials {
            let outcome = run_trial(config, delta, seeds.next_seed())?;
            detected += u64::from(outcome.detected);
            work += outcome.states_checked as f64 / outcome.solver_states as f64;
        }
        rows.push(DetectionRow {
            delta,
            behavior: config.behavior.to_string(),
            trials: config.trials,
            detected_rate: detected as f64 / config.trials as f64,
            predicted_rate: config.predicted_rate(delta)?,
            work_ratio: work / config.trials as f64,
        });
    }
    Ok(DetectionReport {
        verifier: config.verifier,
        rows,
    })
}

/// Mean recomputed-to-computed state ratio at `delta`.
pub fn work_ratio(report: &DetectionReport, delta: f64) -> Result<f64> {
    report
        .row(delta)
        .map(|r| r.work_ratio)
        .ok_or_else(|| SpexError::param(format!("report has no row for delta {delta}")))
}
