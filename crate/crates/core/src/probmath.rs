//! Categorical and Dirichlet probability kernels.
//!
//! Everything is measured in nats. `0 · ln 0` is taken to be `0` wherever it
//! appears. Distributions are validated on construction against
//! [`NORMALIZATION_TOLERANCE`] and are never silently renormalized.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum allowed deviation of a probability vector's sum from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

/// `x · ln x` with the `0 · ln 0 = 0` convention.
#[inline]
pub fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `x · ln y` with `0 · ln y = 0` for any `y`, including `y = 0`.
#[inline]
pub fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn check_probability_vector(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::domain(format!("{what}: empty probability vector")));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::domain(format!(
                "{what}: entry {i} is {p}, expected a finite non-negative probability"
            )));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::domain(format!("{what}: entries sum to {sum}, expected 1")));
    }
    Ok(())
}

/// A categorical distribution over `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probability_vector(&probs, "categorical")?;
        Ok(Self { probs })
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len > 0, "uniform distribution needs at least one outcome");
        Self {
            probs: vec![1.0 / len as f64; len],
        }
    }

    pub fn delta(len: usize, index: usize) -> Self {
        assert!(index < len, "delta index {index} out of range {len}");
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Self { probs }
    }

    /// Normalizes non-negative weights with a positive total.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 || !total.is_finite() {
            return Err(Error::domain("weights must be non-negative with a positive finite sum"));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Categorical::new(probs)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.probs
    }
}

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::dim("matrix must have at least one row and one column"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::dim(format!(
                "row {i} has {} entries, expected {n_cols}",
                rows[i].len()
            )));
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, delta: f64) {
        self.data[r * self.cols + c] += delta;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column_sum(&self, c: usize) -> f64 {
        (0..self.rows).map(|r| self.get(r, c)).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// `self · v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Checks every column sums to 1 within [`NORMALIZATION_TOLERANCE`].
    pub fn check_column_stochastic(&self, what: &str) -> Result<()> {
        for c in 0..self.cols {
            for r in 0..self.rows {
                let v = self.get(r, c);
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::domain(format!(
                        "{what}: entry ({r}, {c}) is {v}, expected a non-negative probability"
                    )));
                }
            }
            let s = self.column_sum(c);
            if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
                return Err(Error::domain(format!("{what}: column {c} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }
}

impl Serialize for Matrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Joint distribution over `rows × cols` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    probs: Matrix,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl JointDistribution {
    pub fn new(probs: Matrix, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self> {
        if row_labels.len() != probs.rows() || col_labels.len() != probs.cols() {
            return Err(Error::dim("label counts must match the joint's shape"));
        }
        check_probability_vector(probs.data(), "joint distribution")?;
        Ok(Self {
            probs,
            row_labels,
            col_labels,
        })
    }

    /// Joint with index labels `"0".."n-1"`.
    pub fn from_matrix(probs: Matrix) -> Result<Self> {
        let rows = (0..probs.rows()).map(|i| i.to_string()).collect();
        let cols = (0..probs.cols()).map(|i| i.to_string()).collect();
        Self::new(probs, rows, cols)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_matrix(Matrix::from_rows(rows)?)
    }

    /// Product distribution `p(i) q(j)`.
    pub fn outer(p: &Categorical, q: &Categorical) -> Self {
        let mut m = Matrix::zeros(p.len(), q.len());
        for (i, a) in p.probs().iter().enumerate() {
            for (j, b) in q.probs().iter().enumerate() {
                m.set(i, j, a * b);
            }
        }
        let rows = (0..p.len()).map(|i| i.to_string()).collect();
        let cols = (0..q.len()).map(|i| i.to_string()).collect();
        Self {
            probs: m,
            row_labels: rows,
            col_labels: cols,
        }
    }

    pub fn probs(&self) -> &Matrix {
        &self.probs
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn row_marginal(&self) -> Categorical {
        let probs = (0..self.probs.rows()).map(|r| self.probs.row(r).iter().sum()).collect();
        Categorical { probs }
    }

    pub fn col_marginal(&self) -> Categorical {
        let probs = (0..self.probs.cols()).map(|c| self.probs.column_sum(c)).collect();
        Categorical { probs }
    }

    pub fn transpose(&self) -> Self {
        Self {
            probs: self.probs.transpose(),
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
        }
    }

    /// Row-major flattening into a single categorical.
    pub fn flatten(&self) -> Categorical {
        Categorical {
            probs: self.probs.data().to_vec(),
        }
    }
}

/// Shannon entropy of a probability slice.
pub fn entropy_of(probs: &[f64]) -> f64 {
    // max(0) clears the -0.0 a delta would otherwise produce
    (-probs.iter().map(|&p| xlnx(p)).sum::<f64>()).max(0.0)
}

pub fn entropy(d: &Categorical) -> f64 {
    entropy_of(d.probs())
}

/// `Σ p ln(p/q)` over raw slices.
pub fn kl_of(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dim(format!("kl: lengths {} and {}", p.len(), q.len())));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::domain(format!(
                    "kl: p[{i}] = {pi} but q[{i}] = 0 (not absolutely continuous)"
                )));
            }
            total += pi * (pi / qi).ln();
        }
    }
    Ok(total.max(0.0))
}

pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    kl_of(p.probs(), q.probs())
}

/// Mutual information between the row and column variables of `j`.
pub fn mutual_information(j: &JointDistribution) -> f64 {
    let rows = j.row_marginal();
    let cols = j.col_marginal();
    let m = j.probs();
    let mut total = 0.0;
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let p = m.get(r, c);
            if p > 0.0 {
                total += p * (p / (rows.probs()[r] * cols.probs()[c])).ln();
            }
        }
    }
    total.max(0.0)
}

/// `exp(gamma · v_i) / Σ exp(gamma · v_k)`, shifted by the maximum for stability.
pub fn softmax(values: &[f64], gamma: f64) -> Categorical {
    assert!(!values.is_empty(), "softmax of an empty vector");
    let scaled: Vec<f64> = values.iter().map(|v| gamma * v).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Categorical {
        probs: exps.into_iter().map(|e| e / total).collect(),
    }
}

/// Draws an index with probability `d.probs()[i]` by inverse CDF.
pub fn sample_categorical<R: Rng + ?Sized>(d: &Categorical, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in d.probs().iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    // rounding left u above the accumulated mass
    last_positive
}

/// Scales each column to sum to 1.
pub fn normalize_columns(m: &Matrix) -> Result<Matrix> {
    let mut out = m.clone();
    for c in 0..m.cols() {
        if (0..m.rows()).any(|r| m.get(r, c) < 0.0 || !m.get(r, c).is_finite()) {
            return Err(Error::domain(format!("column {c} has a negative or non-finite entry")));
        }
        let s = m.column_sum(c);
        if s <= 0.0 {
            return Err(Error::domain(format!("column {c} sums to zero")));
        }
        for r in 0..m.rows() {
            out.set(r, c, m.get(r, c) / s);
        }
    }
    Ok(out)
}
