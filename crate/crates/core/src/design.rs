//! Exploration designs and action covariances.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse_sqrt, sym_eigen, symmetrize};
use crate::rng::StreamRng;

const SUM_TOL: f64 = 1e-12;

/// Default Frank-Wolfe iteration cap for [`d_optimal_design`].
pub const DEFAULT_DESIGN_MAX_ITER: usize = 10_000;
/// Default optimality tolerance for [`d_optimal_design`].
pub const DEFAULT_DESIGN_TOL: f64 = 1e-6;

/// Probability weights over a finite action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteDistribution {
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Input("distribution over an empty set".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Input(format!("invalid probability {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SUM_TOL * weights.len().max(1) as f64 {
            return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Normalize nonnegative weights with a positive sum.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Input("weights must be nonnegative with a positive sum".into()));
        }
        Ok(Self { weights: weights.into_iter().map(|w| w / total).collect() })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("distribution over an empty set".into()));
        }
        Ok(Self { weights: vec![1.0 / n as f64; n] })
    }

    pub fn point_mass(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::Input(format!("index {index} out of range for {n} actions")));
        }
        let mut weights = vec![0.0; n];
        weights[index] = 1.0;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn sample(&self, rng: &mut StreamRng) -> usize {
        rng.sample_index(&self.weights)
    }

    /// CSV with header `action_index,weight`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "action_index,weight")?;
        for (i, w) in self.weights.iter().enumerate() {
            writeln!(out, "{i},{w:.16e}")?;
        }
        Ok(())
    }
}

/// Symmetric PSD matrix with its smallest eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance {
    pub matrix: DMatrix<f64>,
    pub min_eig: f64,
}

impl Covariance {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let matrix = symmetrize(&matrix);
        let min_eig = if matrix.nrows() == 0 { 0.0 } else { sym_eigen(&matrix).min_value() };
        Self { matrix, min_eig }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Result of [`d_optimal_design`].
#[derive(Debug, Clone)]
pub struct DOptimalDesign {
    pub distribution: DiscreteDistribution,
    /// `max_i phi_i^T Sigma^{-1} phi_i`; equals `m` at the optimum.
    pub max_variance: f64,
    pub iterations: usize,
}

/// Numerical rank of the feature set, relative to the largest singular value.
pub fn feature_rank(features: &[DVector<f64>]) -> usize {
    if features.is_empty() {
        return 0;
    }
    let m = features[0].len();
    let mut s = DMatrix::zeros(m, m);
    for f in features {
        s += f * f.transpose();
    }
    let eig = sym_eigen(&s);
    let top = eig.max_value();
    if top <= 0.0 {
        return 0;
    }
    eig.values.iter().filter(|&&v| v > 1e-10 * top).count()
}

/// Project features onto their span, returning coordinates in an orthonormal
/// basis of dimension `rank`.
pub fn project_to_span(features: &[DVector<f64>]) -> (Vec<DVector<f64>>, usize) {
    if features.is_empty() {
        return (Vec::new(), 0);
    }
    let m = features[0].len();
    let mut s = DMatrix::zeros(m, m);
    for f in features {
        s += f * f.transpose();
    }
    let eig = sym_eigen(&s);
    let top = eig.max_value().max(0.0);
    let rank = eig.values.iter().filter(|&&v| v > 1e-10 * top && v > 0.0).count();
    let basis = eig.vectors.columns(0, rank).into_owned();
    let projected = features.iter().map(|f| basis.transpose() * f).collect();
    (projected, rank)
}

/// D-optimal design: maximize `log det sum_i w_i phi_i phi_i^T` over the
/// simplex by Frank-Wolfe with away steps. Stops once every
/// `phi_i^T Sigma_w^{-1} phi_i <= m (1 + tol)`.
pub fn d_optimal_design(features: &[DVector<f64>], max_iter: usize, tol: f64) -> Result<DOptimalDesign> {
    let n = features.len();
    if n == 0 {
        return Err(Error::Input("design needs at least one feature vector".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tol must be positive, got {tol}")));
    }
    let m = features[0].len();
    if let Some(f) = features.iter().find(|f| f.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, got: f.len() });
    }
    let rank = feature_rank(features);
    if rank < m {
        return Err(Error::RankDeficient { rank, dim: m });
    }
    let mf = m as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    loop {
        let g = variances(features, &w)?;
        let (j, gj) = argmax(&g);
        if gj <= mf * (1.0 + tol) {
            return Ok(DOptimalDesign {
                distribution: DiscreteDistribution::from_unnormalized(w)?,
                max_variance: gj,
                iterations,
            });
        }
        if iterations >= max_iter {
            return Err(Error::ToleranceNotMet { gap: gj / mf - 1.0, tol, iterations });
        }
        iterations += 1;

        // away candidate: support point with the smallest variance
        let (k, gk) = g
            .iter()
            .enumerate()
            .filter(|(i, _)| w[*i] > 0.0)
            .map(|(i, &v)| (i, v))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });

        let toward = gj / mf - 1.0;
        let away = 1.0 - gk / mf;
        if toward >= away || k == usize::MAX || w[k] >= 1.0 {
            let alpha = (gj / mf - 1.0) / (gj - 1.0);
            for wi in w.iter_mut() {
                *wi *= 1.0 - alpha;
            }
            w[j] += alpha;
        } else {
            let max_step = w[k] / (1.0 - w[k]);
            let stationary = (gk / mf - 1.0) / (gk - 1.0);
            // stationary < 0 is the interior optimum along the away direction
            let tau = if stationary < 0.0 { (-stationary).min(max_step) } else { max_step };
            for wi in w.iter_mut() {
                *wi *= 1.0 + tau;
            }
            w[k] -= tau;
            if w[k] < 1e-15 {
                w[k] = 0.0;
            }
        }
    }
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
}

/// `phi_i^T Sigma_w^{-1} phi_i` for every `i`.
fn variances(features: &[DVector<f64>], w: &[f64]) -> Result<Vec<f64>> {
    let m = features[0].len();
    let mut sigma = DMatrix::zeros(m, m);
    for (f, &wi) in features.iter().zip(w) {
        if wi > 0.0 {
            sigma += f * f.transpose() * wi;
        }
    }
    let chol = nalgebra::Cholesky::new(symmetrize(&sigma)).ok_or(Error::IllConditioned {
        min_eig: sym_eigen(&sigma).min_value(),
        floor: 0.0,
    })?;
    Ok(features
        .iter()
        .map(|f| {
            let y = chol.solve(f);
            f.dot(&y)
        })
        .collect())
}

/// `(1 - gamma) q + gamma nu`.
pub fn mix_distributions(
    q: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    gamma: f64,
) -> Result<DiscreteDistribution> {
    if q.len() != nu.len() {
        return Err(Error::DimensionMismatch { expected: q.len(), got: nu.len() });
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Input(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    let weights = q
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(a, b)| (1.0 - gamma) * a + gamma * b)
        .collect();
    Ok(DiscreteDistribution { weights })
}

/// `sum_i p_i phi_i phi_i^T`.
pub fn action_covariance(p: &DiscreteDistribution, features: &[DVector<f64>]) -> Result<Covariance> {
    if p.len() != features.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: p.len() });
    }
    let m = features.first().map_or(0, |f| f.len());
    let mut sigma = DMatrix::zeros(m, m);
    for (f, &pi) in features.iter().zip(&p.weights) {
        if pi > 0.0 {
            sigma.ger(pi, f, f, 1.0);
        }
    }
    Ok(Covariance::from_matrix(sigma))
}

/// Average of `r` rank-one terms `phi_J phi_J^T` with `J ~ p`.
pub fn sample_covariance(
    p: &DiscreteDistribution,
    features: &[DVector<f64>],
    r: usize,
    rng: &mut StreamRng,
) -> Result<Covariance> {
    if r == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    if p.len() != features.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: p.len() });
    }
    let m = features.first().map_or(0, |f| f.len());
    let mut counts = vec![0usize; features.len()];
    for _ in 0..r {
        counts[p.sample(rng)] += 1;
    }
    let mut sigma = DMatrix::zeros(m, m);
    for (f, &c) in features.iter().zip(&counts) {
        if c > 0 {
            sigma.ger(c as f64 / r as f64, f, f, 1.0);
        }
    }
    Ok(Covariance::from_matrix(sigma))
}

/// Inverse of a covariance whose smallest eigenvalue clears `floor`.
pub fn invert_covariance(c: &Covariance, floor: f64) -> Result<DMatrix<f64>> {
    if !(floor > 0.0) {
        return Err(Error::Input(format!("floor must be positive, got {floor}")));
    }
    if c.min_eig < floor {
        return Err(Error::IllConditioned { min_eig: c.min_eig, floor });
    }
    let chol = nalgebra::Cholesky::new(c.matrix.clone())
        .ok_or(Error::IllConditioned { min_eig: c.min_eig, floor })?;
    Ok(symmetrize(&chol.inverse()))
}

/// Linear map `T` with `T Sigma_nu T^T = I/m`, plus the mapped features.
pub fn whiten(
    features: &[DVector<f64>],
    design: &DiscreteDistribution,
) -> Result<(DMatrix<f64>, Vec<DVector<f64>>)> {
    let cov = action_covariance(design, features)?;
    let m = cov.dim();
    if cov.min_eig <= 0.0 {
        return Err(Error::RankDeficient { rank: feature_rank(features), dim: m });
    }
    let t = inverse_sqrt(&(cov.matrix * m as f64));
    let mapped = features.iter().map(|f| &t * f).collect();
    Ok((t, mapped))
}

/// Euclidean norm of the design-weighted feature mean; zero for symmetric
/// action sets.
pub fn centering_offset(design: &DiscreteDistribution, features: &[DVector<f64>]) -> f64 {
    let m = features.first().map_or(0, |f| f.len());
    let mut mean = DVector::zeros(m);
    for (f, &w) in features.iter().zip(design.weights()) {
        mean += f * w;
    }
    mean.norm()
}
