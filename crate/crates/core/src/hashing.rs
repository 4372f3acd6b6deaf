//! Hashing of computational states.
//!
//! Integers hash to the first eight bytes of SHA-256 over their low 64 bits.
//! Real arrays hash per element to the set of integers covered by a tolerance
//! interval, so nearby arrays always share hashes. Embeddings hash to the
//! pairwise ordering of their distances to a fixed reference set, so
//! semantically close embeddings produce overlapping hash sets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Result, SpexError};
use crate::rng::seeded;

/// Largest number of integers a single quantized interval may expand to.
pub const MAX_RANGE_LEN: i64 = 10_000;

/// Relative nudge applied before flooring scaled bounds, so that products
/// such as `0.29 * 100 = 28.999999999999996` land on the intended integer.
pub const QUANTIZE_NUDGE: f64 = 1e-9;

/// A 64-bit state hash. Serialized as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateHash(pub u64);

impl StateHash {
    pub fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for StateHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for StateHash {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.parse().map(StateHash)
    }
}

impl Serialize for StateHash {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StateHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Little-endian read of the first eight bytes of SHA-256 over `bytes`.
pub fn sha256_prefix_u64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Hashes `x mod 2^64`.
pub fn hash_u64(x: u64) -> StateHash {
    StateHash(sha256_prefix_u64(&x.to_le_bytes()))
}

pub fn hash_i64(x: i64) -> StateHash {
    hash_u64(x as u64)
}

/// Hashes an arbitrary-precision integer through its residue mod 2^64.
pub fn hash_integer(x: &BigInt) -> StateHash {
    hash_u64(low_u64(x))
}

/// `x mod 2^64` with the result in `[0, 2^64)`.
fn low_u64(x: &BigInt) -> u64 {
    let magnitude_low = x.magnitude().iter_u64_digits().next().unwrap_or(0);
    match x.sign() {
        Sign::Minus => magnitude_low.wrapping_neg(),
        _ => magnitude_low,
    }
}

/// Smallest integer `N` with `10^-N <= epsilon`, i.e. `ceil(-log10 epsilon)`.
pub fn digit_position(epsilon: f64) -> Result<i32> {
    if epsilon.is_nan() || epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(SpexError::param(format!(
            "tolerance must be positive and finite, got {epsilon}"
        )));
    }
    let mut n = (-epsilon.log10()).ceil() as i32;
    // log10 may be off by an ulp at exact powers of ten
    while 10f64.powi(-(n - 1)) <= epsilon {
        n -= 1;
    }
    while 10f64.powi(-n) > epsilon {
        n += 1;
    }
    Ok(n)
}

/// Element-wise tolerance for array hashing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    epsilon: f64,
    digit_position: i32,
}

impl Tolerance {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(Tolerance {
            epsilon,
            digit_position: digit_position(epsilon)?,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn digit_position(&self) -> i32 {
        self.digit_position
    }

    fn scale(&self) -> f64 {
        10f64.powi(self.digit_position)
    }
}

fn quantize(x: f64) -> f64 {
    (x + QUANTIZE_NUDGE * x.abs()).floor()
}

/// Quantized integer bounds `[Q0, Q1]` for one array element.
pub fn quantized_range(value: f64, tolerance: &Tolerance) -> Result<(i64, i64)> {
    if !value.is_finite() {
        return Err(SpexError::param(format!("array element {value} is not finite")));
    }
    let scale = tolerance.scale();
    let lo = quantize((value - tolerance.epsilon) * scale);
    let hi = quantize((value + tolerance.epsilon) * scale);
    let limit = 2f64.powi(63);
    if lo < -limit || hi >= limit {
        return Err(SpexError::param(format!(
            "element {value} overflows the quantized integer range"
        )));
    }
    let (lo, hi) = (lo as i64, hi as i64);
    if hi - lo + 1 > MAX_RANGE_LEN {
        return Err(SpexError::param(format!(
            "tolerance {} expands element {value} to {} integers (limit {MAX_RANGE_LEN})",
            tolerance.epsilon,
            hi - lo + 1
        )));
    }
    Ok((lo, hi))
}

/// One hash set per array element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementHashSets {
    pub sets: Vec<BTreeSet<StateHash>>,
}

impl ElementHashSets {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Every hash of every element, flattened.
    pub fn all_hashes(&self) -> impl Iterator<Item = StateHash> + '_ {
        self.sets.iter().flat_map(|s| s.iter().copied())
    }
}

pub fn hash_array(values: &[f64], tolerance: &Tolerance) -> Result<ElementHashSets> {
    if values.is_empty() {
        return Err(SpexError::param("cannot hash an empty array"));
    }
    let sets = values
        .iter()
        .map(|&v| {
            let (lo, hi) = quantized_range(v, tolerance)?;
            Ok((lo..=hi).map(hash_i64).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ElementHashSets { sets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    /// `1 - cos(a, b)`; a zero vector is at distance 1 from everything.
    Cosine,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Cosine => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let na = norm(a);
                let nb = norm(b);
                if na == 0.0 || nb == 0.0 {
                    1.0
                } else {
                    1.0 - dot / (na * nb)
                }
            }
        }
    }
}

impl FromStr for Metric {
    type Err = SpexError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(SpexError::param(format!("unknown metric '{other}'"))),
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_vectors(vectors: &[Vec<f64>], what: &str) -> Result<usize> {
    if vectors.len() < 2 {
        return Err(SpexError::param(format!(
            "need at least two {what}, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    if dim == 0 {
        return Err(SpexError::param(format!("{what} must have at least one dimension")));
    }
    for v in vectors {
        if v.len() != dim {
            return Err(SpexError::param(format!(
                "{what} have mixed dimensions {dim} and {}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SpexError::param(format!("{what} contain non-finite values")));
        }
    }
    Ok(dim)
}

/// Reference embeddings whose distance ranking encodes a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VantageSet {
    points: Vec<Vec<f64>>,
    metric: Metric,
}

impl VantageSet {
    pub fn new(points: Vec<Vec<f64>>, metric: Metric) -> Result<Self> {
        check_vectors(&points, "vantage points")?;
        Ok(VantageSet { points, metric })
    }

    /// `count` points with standard normal coordinates.
    pub fn random(count: usize, dim: usize, metric: Metric, seed: u64) -> Result<Self> {
        let mut rng = seeded(seed);
        let points = (0..count)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        Self::new(points, metric)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Unit normals of hyperplanes through the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneSet {
    normals: Vec<Vec<f64>>,
    generation_seed: u64,
}

impl HyperplaneSet {
    /// Accepts explicit normals; each must have unit length within 1e-9.
    pub fn new(normals: Vec<Vec<f64>>, generation_seed: u64) -> Result<Self> {
        check_vectors(&normals, "hyperplane normals")?;
        if let Some(n) = normals.iter().find(|n| (norm(n) - 1.0).abs() > 1e-9) {
            return Err(SpexError::param(format!(
                "hyperplane normal has length {}, expected 1",
                norm(n)
            )));
        }
        Ok(HyperplaneSet {
            normals,
            generation_seed,
        })
    }

    /// Draws `count` normals from a seeded standard normal and normalizes them.
    pub fn generate(count: usize, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(SpexError::param("hyperplanes need at least one dimension"));
        }
        let mut rng = seeded(seed);
        let mut normals = Vec::with_capacity(count);
        while normals.len() < count {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let len = norm(&v);
            if len > 1e-12 {
                normals.push(v.into_iter().map(|x| x / len).collect());
            }
        }
        Self::new(normals, seed)
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn generation_seed(&self) -> u64 {
        self.generation_seed
    }

    pub fn dim(&self) -> usize {
        self.normals[0].len()
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }
}

/// Encodes the pairwise order of `distances`: pair `(j, k)` with `j < k`
/// at lexicographic position `idx` contributes `hash(2 idx + [d_j < d_k])`.
pub fn pairwise_order_hashes(distances: &[f64]) -> BTreeSet<StateHash> {
    let mut out = BTreeSet::new();
    let mut idx: u64 = 0;
    for j in 0..distances.len() {
        for k in (j + 1)..distances.len() {
            let ind = u64::from(distances[j] < distances[k]);
            out.insert(hash_u64(2 * idx + ind));
            idx += 1;
        }
    }
    out
}

fn check_query(query: &[f64], dim: usize) -> Result<()> {
    if query.len() != dim {
        return Err(SpexError::param(format!(
            "query has dimension {}, reference set has {dim}",
            query.len()
        )));
    }
    if query.iter().any(|x| !x.is_finite()) {
        return Err(SpexError::param("query contains non-finite values"));
    }
    Ok(())
}

pub fn hash_embedding_vantage(query: &[f64], vantage: &VantageSet) -> Result<BTreeSet<StateHash>> {
    check_query(query, vantage.dim())?;
    let distances: Vec<f64> = vantage
        .points
        .iter()
        .map(|v| vantage.metric.distance(query, v))
        .collect();
    Ok(pairwise_order_hashes(&distances))
}

/// Same encoding as the vantage variant with `d_j = |n_j . query|`.
pub fn hash_embedding_hyperplane(query: &[f64], planes: &HyperplaneSet) -> Result<BTreeSet<StateHash>> {
    check_query(query, planes.dim())?;
    let distances: Vec<f64> = planes
        .normals
        .iter()
        .map(|n| n.iter().zip(query).map(|(a, b)| a * b).sum::<f64>().abs())
        .collect();
    Ok(pairwise_order_hashes(&distances))
}

/// `|X ∩ Y| / |X ∪ Y|`.
pub fn jaccard(x: &BTreeSet<StateHash>, y: &BTreeSet<StateHash>) -> Result<f64> {
    if x.is_empty() && y.is_empty() {
        return Err(SpexError::param("Jaccard index of two empty sets is undefined"));
    }
    let inter = x.intersection(y).count();
    let union = x.len() + y.len() - inter;
    Ok(inter as f64 / union as f64)
}
