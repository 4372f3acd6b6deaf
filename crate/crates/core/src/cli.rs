//! Command-line front end. Machine-readable output goes to stdout,
//! diagnostics to stderr. Exit codes: 0 success or verified, 1 verification
//! failed, 2 usage or format error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use serde::Serialize;
use serde_json::json;

use spex::bloom::BloomFilter;
use spex::hashing::{
    hash_array, hash_embedding_hyperplane, hash_embedding_vantage, hash_integer, HyperplaneSet, Metric, StateHash,
    Tolerance, VantageSet,
};
use spex::plan::{hash_plan, parse_plan, PlanHashMode};
use spex::primesum::{self, PrimeSumInput, SolverBehavior};
use spex::protocol::{FprSlack, ProofEnvelope, SolverRequest};
use spex::sim::{run_experiment, ExperimentConfig};
use spex::{Result, SpexError};

pub const EXIT_VERIFIED: u8 = 0;
pub const EXIT_REJECTED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "spex",
    version,
    about = "Bloom-filter proofs of execution and sampling verifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the PrimeSum solver and write a proof envelope.
    Solve {
        /// JSON array of 1-based prime indices.
        input: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        fpr: f64,
        /// honest | lazy:<q>[:omit] | adversarial:<delta>
        #[arg(long, default_value = "honest")]
        behavior: SolverBehavior,
        #[arg(long, env = "SPEX_SEED", default_value_t = 0)]
        seed: u64,
        /// Envelope destination; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Verify a proof envelope and print the verifier response.
    Verify {
        envelope: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_enum, default_value_t = VerifyMode::Lazy)]
        mode: VerifyMode,
        #[arg(long, env = "SPEX_SEED", default_value_t = 0)]
        seed: u64,
        /// Probes for the saturation check.
        #[arg(long, default_value_t = spex::protocol::DEFAULT_FPR_TRIALS)]
        fpr_trials: u64,
    },
    /// Hash integers, tolerant arrays, embeddings or plans.
    Hash {
        #[arg(long, value_enum)]
        mode: HashMode,
        /// Inline values (integers, reals or vector components).
        #[arg(allow_negative_numbers = true)]
        values: Vec<String>,
        /// JSON array (array/embedding modes) or plan text (plan mode).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// JSON array of vantage point vectors.
        #[arg(long)]
        vantage: Option<PathBuf>,
        #[arg(long, default_value = "euclidean")]
        metric: Metric,
        /// Use this many seeded random hyperplanes instead of vantage points.
        #[arg(long)]
        hyperplanes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        hyperplane_seed: u64,
        /// JSON array with one embedding per plan step (semantic plan hashing).
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Estimate the false positive rate of a proof's filter.
    EstimateFpr {
        /// Proof envelope JSON or a raw SPXB filter file.
        proof: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, env = "SPEX_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Run a detection experiment and write the CSV report.
    Simulate {
        config: PathBuf,
        /// Overrides the config's masterSeed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VerifyMode {
    Lazy,
    Adversarial,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HashMode {
    Integer,
    Array,
    Embedding,
    Plan,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SpexError::Parameter(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| SpexError::Format(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON output is infallible");
    emit(None, &text)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            input,
            fpr,
            behavior,
            seed,
            output,
        } => {
            let indices: Vec<u64> = read_json(&input)?;
            let input = PrimeSumInput::new(indices)?;
            let request = SolverRequest::new(input.to_payload(), fpr)?;
            let response = primesum::solve(&request, behavior, seed)?;
            let envelope = ProofEnvelope::new(request, response);
            emit(output.as_deref(), &envelope.to_json_pretty())?;
            Ok(ExitCode::from(EXIT_VERIFIED))
        }
        Command::Verify {
            envelope,
            delta,
            mode,
            seed,
            fpr_trials,
        } => {
            let env = ProofEnvelope::from_json(&read_text(&envelope)?)?;
            let request = env.verifier_request(delta)?;
            let response = match mode {
                VerifyMode::Lazy => {
                    primesum::verify_lazy_traced(&request, &FprSlack::three_sigma(fpr_trials), seed)?.response
                }
                VerifyMode::Adversarial => primesum::verify_adversarial(&request, seed)?,
            };
            emit_json(&response)?;
            Ok(ExitCode::from(if response.is_verified {
                EXIT_VERIFIED
            } else {
                EXIT_REJECTED
            }))
        }
        Command::Hash {
            mode,
            values,
            input,
            epsilon,
            vantage,
            metric,
            hyperplanes,
            hyperplane_seed,
            embeddings,
        } => {
            let value = match mode {
                HashMode::Integer => hash_integers(&values)?,
                HashMode::Array => {
                    let eps = epsilon.ok_or_else(|| SpexError::Parameter("--epsilon is required".into()))?;
                    let data = reals(&values, input.as_deref())?;
                    let tol = Tolerance::new(eps)?;
                    json!({
                        "mode": "array",
                        "epsilon": eps,
                        "digitPosition": tol.digit_position(),
                        "sets": hash_array(&data, &tol)?,
                    })
                }
                HashMode::Embedding => {
                    let query = reals(&values, input.as_deref())?;
                    let hashes = match (vantage, hyperplanes) {
                        (Some(path), None) => {
                            let points: Vec<Vec<f64>> = read_json(&path)?;
                            hash_embedding_vantage(&query, &VantageSet::new(points, metric)?)?
                        }
                        (None, Some(count)) => {
                            let planes = HyperplaneSet::generate(count, query.len(), hyperplane_seed)?;
                            hash_embedding_hyperplane(&query, &planes)?
                        }
                        _ => {
                            return Err(SpexError::Parameter(
                                "embedding mode needs exactly one of --vantage or --hyperplanes".into(),
                            ))
                        }
                    };
                    json!({ "mode": "embedding", "hashes": hashes })
                }
                HashMode::Plan => {
                    let path = input.ok_or_else(|| SpexError::Parameter("--input plan file is required".into()))?;
                    let steps = parse_plan(&read_text(&path)?)?;
                    let plan_hash = match (embeddings, vantage) {
                        (None, None) => hash_plan(&steps, PlanHashMode::Exact)?,
                        (Some(e), Some(v)) => {
                            let embeddings: Vec<Vec<f64>> = read_json(&e)?;
                            let vantage = VantageSet::new(read_json(&v)?, metric)?;
                            hash_plan(
                                &steps,
                                PlanHashMode::Semantic {
                                    embeddings: &embeddings,
                                    vantage: &vantage,
                                },
                            )?
                        }
                        _ => {
                            return Err(SpexError::Parameter(
                                "semantic plan hashing needs both --embeddings and --vantage".into(),
                            ))
                        }
                    };
                    serde_json::to_value(plan_hash).expect("plan hash encodes")
                }
            };
            emit_json(&value)?;
            Ok(ExitCode::from(EXIT_VERIFIED))
        }
        Command::EstimateFpr { proof, trials, seed } => {
            let bytes =
                fs::read(&proof).map_err(|e| SpexError::Parameter(format!("cannot read {}: {e}", proof.display())))?;
            let (filter, declared) = if bytes.starts_with(&spex::bloom::MAGIC) {
                (BloomFilter::deserialize(&bytes)?, None)
            } else {
                let text = String::from_utf8(bytes).map_err(|_| SpexError::Format("proof is not UTF-8".into()))?;
                let env = ProofEnvelope::from_json(&text)?;
                (env.solver_proof.filter()?, Some(env.solver_request.false_positive_rate))
            };
            let est = filter.estimate_fpr(trials, seed)?;
            emit_json(&json!({
                "estimate": est.estimate,
                "trials": est.trials,
                "hits": est.hits,
                "declaredFpr": declared,
            }))?;
            Ok(ExitCode::from(EXIT_VERIFIED))
        }
        Command::Simulate { config, seed, output } => {
            let mut cfg = ExperimentConfig::from_json(&read_text(&config)?)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let report = run_experiment(&cfg)?;
            emit(output.as_deref(), &report.to_csv()?)?;
            Ok(ExitCode::from(EXIT_VERIFIED))
        }
    }
}

fn hash_integers(values: &[String]) -> Result<serde_json::Value> {
    if values.is_empty() {
        return Err(SpexError::Parameter("no integers given".into()));
    }
    let hashes = values
        .iter()
        .map(|v| {
            v.parse::<BigInt>()
                .map(|x| hash_integer(&x))
                .map_err(|_| SpexError::Parameter(format!("'{v}' is not an integer")))
        })
        .collect::<Result<Vec<StateHash>>>()?;
    Ok(json!({ "mode": "integer", "hashes": hashes }))
}

fn reals(values: &[String], input: Option<&Path>) -> Result<Vec<f64>> {
    match (values.is_empty(), input) {
        (false, None) => values
            .iter()
            .map(|v| {
                v.parse()
                    .map_err(|_| SpexError::Parameter(format!("'{v}' is not a number")))
            })
            .collect(),
        (true, Some(path)) => read_json(path),
        _ => Err(SpexError::Parameter(
            "give values inline or via --input, not both".into(),
        )),
    }
}
