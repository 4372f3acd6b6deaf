//! Agentic plans: numbered lists of function calls such as
//!
//! ```text
//! 1. verify_conditions(wallet, conditions)
//! 2. execute_transaction(signed_tx)
//! ```
//!
//! Each line parses to a [`PlanStep`], renders to a whitespace-free
//! canonical call, and hashes either exactly (ordinal plus canonical text)
//! or semantically through a caller-supplied embedding.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpexError};
use crate::hashing::{hash_embedding_vantage, hash_u64, sha256_prefix_u64, StateHash, VantageSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanStep {
    pub ordinal: u64,
    pub function_name: String,
    /// Arguments with insignificant whitespace already removed.
    pub arguments: Vec<String>,
}

impl fmt::Display for PlanStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}. {}", self.ordinal, canonicalize_step(self))
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Drops whitespace that sits outside string literals.
fn strip_insignificant_ws(arg: &str) -> String {
    let mut out = String::with_capacity(arg.len());
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in arg.chars() {
        match quote {
            Some(q) => {
                out.push(c);
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if c == '"' || c == '\'' {
                    quote = Some(c);
                    out.push(c);
                } else if !c.is_whitespace() {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Splits the text after `(` into top-level arguments and returns the
/// remainder after the matching `)`.
fn split_args(text: &str) -> std::result::Result<(Vec<String>, &str), String> {
    let mut args = Vec::new();
    let mut stack: Vec<char> = Vec::new();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '(' | '[' | '{' => stack.push(c),
            ')' | ']' | '}' => {
                let open = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match stack.pop() {
                    Some(o) if o == open => {}
                    Some(o) => return Err(format!("'{c}' closes '{o}'")),
                    None if c == ')' => {
                        let last = text[start..i].trim();
                        if !last.is_empty() || !args.is_empty() {
                            args.push(last);
                        }
                        return finish_args(args, &text[i + 1..]);
                    }
                    None => return Err(format!("unmatched '{c}'")),
                }
            }
            ',' if stack.is_empty() => {
                args.push(text[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    if quote.is_some() {
        Err("unterminated string literal".into())
    } else {
        Err("unbalanced parenthesis".into())
    }
}

fn finish_args<'a>(args: Vec<&str>, rest: &'a str) -> std::result::Result<(Vec<String>, &'a str), String> {
    if args.iter().any(|a| a.is_empty()) {
        return Err("empty argument".into());
    }
    Ok((args.into_iter().map(strip_insignificant_ws).collect(), rest))
}

fn parse_line(line: &str) -> std::result::Result<PlanStep, String> {
    let line = line.trim();
    let digits_end = line.find(|c: char| !c.is_ascii_digit()).unwrap_or(line.len());
    if digits_end == 0 {
        return Err("expected a step number".into());
    }
    let ordinal: u64 = line[..digits_end]
        .parse()
        .map_err(|_| "step number out of range".to_string())?;
    let rest = line[digits_end..].trim_start();
    let rest = rest
        .strip_prefix('.')
        .ok_or_else(|| "expected '.' after the step number".to_string())?;
    let (name, rest) = rest
        .split_once('(')
        .ok_or_else(|| "expected a function call".to_string())?;
    let name = name.trim();
    if !is_ident(name) {
        return Err(format!("'{name}' is not a valid function name"));
    }
    let (arguments, rest) = split_args(rest)?;
    if !rest.trim().is_empty() {
        return Err(format!("unexpected text after call: '{}'", rest.trim()));
    }
    Ok(PlanStep {
        ordinal,
        function_name: name.to_string(),
        arguments,
    })
}

/// Parses one step per nonempty line. Ordinals must strictly increase.
pub fn parse_plan(text: &str) -> Result<Vec<PlanStep>> {
    let mut steps: Vec<PlanStep> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = lineno + 1;
        let step = parse_line(line).map_err(|message| SpexError::Parse { line: line_no, message })?;
        if let Some(prev) = steps.last() {
            if step.ordinal <= prev.ordinal {
                return Err(SpexError::Parse {
                    line: line_no,
                    message: format!("step {} does not follow step {}", step.ordinal, prev.ordinal),
                });
            }
        }
        steps.push(step);
    }
    Ok(steps)
}

/// `name(arg1,arg2,...)`; the ordinal is not part of it.
pub fn canonicalize_step(step: &PlanStep) -> String {
    format!("{}({})", step.function_name, step.arguments.join(","))
}

/// One `N. name(args)` line per step.
pub fn render_plan(steps: &[PlanStep]) -> String {
    steps.iter().map(|s| format!("{s}\n")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanHashKind {
    Exact,
    Semantic,
}

/// How to hash a plan.
#[derive(Debug, Clone, Copy)]
pub enum PlanHashMode<'a> {
    Exact,
    /// One embedding per step, ranked against the vantage points.
    Semantic {
        embeddings: &'a [Vec<f64>],
        vantage: &'a VantageSet,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanHash {
    pub mode: PlanHashKind,
    pub per_step: Vec<BTreeSet<StateHash>>,
}

/// Exact hash of a step: `ordinal (u64 LE) || canonical text` through
/// SHA-256, truncated to 64 bits, then through the integer hash.
pub fn exact_step_hash(step: &PlanStep) -> StateHash {
    let mut preimage = step.ordinal.to_le_bytes().to_vec();
    preimage.extend_from_slice(canonicalize_step(step).as_bytes());
    hash_u64(sha256_prefix_u64(&preimage))
}

pub fn hash_plan(steps: &[PlanStep], mode: PlanHashMode<'_>) -> Result<PlanHash> {
    if steps.is_empty() {
        return Err(SpexError::param("cannot hash an empty plan"));
    }
    match mode {
        PlanHashMode::Exact => Ok(PlanHash {
            mode: PlanHashKind::Exact,
            per_step: steps.iter().map(|s| BTreeSet::from([exact_step_hash(s)])).collect(),
        }),
        PlanHashMode::Semantic { embeddings, vantage } => {
            if embeddings.len() != steps.len() {
                return Err(SpexError::param(format!(
                    "semantic plan hashing needs one embedding per step: {} steps, {} embeddings",
                    steps.len(),
                    embeddings.len()
                )));
            }
            let per_step = embeddings
                .iter()
                .map(|e| hash_embedding_vantage(e, vantage))
                .collect::<Result<Vec<_>>>()?;
            Ok(PlanHash {
                mode: PlanHashKind::Semantic,
                per_step,
            })
        }
    }
}
