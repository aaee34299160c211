//! Kernels, kernel losses and explicit feature maps.
//!
//! A loss is the RKHS inner product `<Phi(a), w>` between the feature of the
//! player's action `a` and the adversary's action `w`. For the linear,
//! quadratic and low-degree polynomial kernels `Phi` is an explicit finite
//! vector; the Gaussian kernel only admits rank-one adversaries
//! `w = Phi(y)`, whose losses are kernel evaluations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest polynomial degree with an explicit feature map.
pub const MAX_EXPLICIT_POLY_DEGREE: u32 = 3;

const BOUND_SLACK: f64 = 1e-12;

/// A point in `R^d` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Input("point must have at least one coordinate".into()));
        }
        if let Some(x) = coords.iter().find(|x| !x.is_finite()) {
            return Err(Error::Input(format!("non-finite coordinate {x}")));
        }
        Ok(Self(coords))
    }

    /// Build a point known to be valid (finite, nonempty).
    pub(crate) fn from_vec_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty() && coords.iter().all(|x| x.is_finite()));
        Self(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Whether the point lies in the closed unit ball, within `1e-12`.
    pub fn in_unit_ball(&self) -> bool {
        self.norm() <= 1.0 + BOUND_SLACK
    }
}

impl From<DVector<f64>> for Point {
    fn from(v: DVector<f64>) -> Self {
        Point::from_vec_unchecked(v.iter().copied().collect())
    }
}

/// Which kernel governs the losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    /// `K(x, y) = (x.y)^2 + x.y`, feature `(x x^T, x)`.
    Quadratic,
    /// `K(x, y) = exp(-||x - y||^2 / (2 sigma^2))`.
    Gaussian { sigma: f64 },
    /// `K(x, y) = (offset + x.y)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

impl KernelKind {
    pub fn name(&self) -> String {
        match self {
            KernelKind::Linear => "linear".into(),
            KernelKind::Quadratic => "quadratic".into(),
            KernelKind::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            KernelKind::Polynomial { degree, offset } => {
                format!("polynomial(degree={degree}, offset={offset})")
            }
        }
    }
}

/// A kernel together with its norm bound `G`: `sup_a sqrt(K(a, a)) <= G` and
/// every adversary action has Hilbert norm at most `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub norm_bound: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, norm_bound: f64) -> Result<Self> {
        if !(norm_bound.is_finite() && norm_bound > 0.0) {
            return Err(Error::Input(format!("norm bound must be positive, got {norm_bound}")));
        }
        match kind {
            KernelKind::Gaussian { sigma } if !(sigma.is_finite() && sigma > 0.0) => {
                return Err(Error::Input(format!("gaussian sigma must be positive, got {sigma}")));
            }
            KernelKind::Polynomial { degree, offset } => {
                if degree == 0 {
                    return Err(Error::Input("polynomial degree must be at least 1".into()));
                }
                if !(offset.is_finite() && offset >= 0.0) {
                    return Err(Error::Input(format!(
                        "polynomial offset must be nonnegative, got {offset}"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { kind, norm_bound })
    }

    pub fn linear(norm_bound: f64) -> Result<Self> {
        Self::new(KernelKind::Linear, norm_bound)
    }

    pub fn quadratic(norm_bound: f64) -> Result<Self> {
        Self::new(KernelKind::Quadratic, norm_bound)
    }

    pub fn gaussian(sigma: f64, norm_bound: f64) -> Result<Self> {
        Self::new(KernelKind::Gaussian { sigma }, norm_bound)
    }

    pub fn polynomial(degree: u32, offset: f64, norm_bound: f64) -> Result<Self> {
        Self::new(KernelKind::Polynomial { degree, offset }, norm_bound)
    }

    /// Check `sqrt(K(a, a)) <= G` over a finite action set.
    pub fn validate_actions(&self, actions: &[Point]) -> Result<()> {
        let Some(first) = actions.first() else {
            return Err(Error::Input("action set is empty".into()));
        };
        for (i, a) in actions.iter().enumerate() {
            if a.dim() != first.dim() {
                return Err(Error::DimensionMismatch { expected: first.dim(), got: a.dim() });
            }
            let norm = kernel_eval(self, a, a)?.max(0.0).sqrt();
            if norm > self.norm_bound * (1.0 + BOUND_SLACK) + BOUND_SLACK {
                return Err(Error::Input(format!(
                    "action {i} has feature norm {norm} above the declared bound {}",
                    self.norm_bound
                )));
            }
        }
        Ok(())
    }

    pub fn has_explicit_features(&self) -> bool {
        match self.kind {
            KernelKind::Linear | KernelKind::Quadratic => true,
            KernelKind::Polynomial { degree, .. } => degree <= MAX_EXPLICIT_POLY_DEGREE,
            KernelKind::Gaussian { .. } => false,
        }
    }

    /// Length of the explicit feature vector for inputs of dimension `d`.
    pub fn feature_dim(&self, d: usize) -> Result<usize> {
        match self.kind {
            KernelKind::Linear => Ok(d),
            KernelKind::Quadratic => Ok(d * d + d),
            KernelKind::Polynomial { degree, .. } if degree <= MAX_EXPLICIT_POLY_DEGREE => {
                Ok((0..=degree).map(|j| d.pow(j)).sum())
            }
            _ => Err(Error::UnsupportedFeatureMap(self.kind.name())),
        }
    }
}

/// Adversary action `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryAction {
    /// A vector in the explicit feature space.
    ExplicitVector { w: Vec<f64> },
    /// `w = Phi(y)`.
    RankOne { y: Point },
}

impl AdversaryAction {
    /// Explicit feature-space action, validated against the kernel and `G`.
    pub fn explicit(spec: &KernelSpec, input_dim: usize, w: Vec<f64>) -> Result<Self> {
        if !spec.has_explicit_features() {
            return Err(Error::InvalidCombination(format!(
                "explicit adversary vectors need a finite feature map; {} has none",
                spec.kind.name()
            )));
        }
        let dim = spec.feature_dim(input_dim)?;
        if w.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: w.len() });
        }
        let action = AdversaryAction::ExplicitVector { w };
        action.check_norm(spec)?;
        Ok(action)
    }

    /// Quadratic loss `a^T A a + b^T a` as a feature-space action.
    pub fn quadratic(spec: &KernelSpec, a: &DMatrix<f64>, b: &[f64]) -> Result<Self> {
        if spec.kind != KernelKind::Quadratic {
            return Err(Error::InvalidCombination(
                "(A, b) adversaries need the quadratic kernel".into(),
            ));
        }
        let d = b.len();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: a.nrows() });
        }
        let mut w = Vec::with_capacity(d * d + d);
        for i in 0..d {
            for j in 0..d {
                w.push(a[(i, j)]);
            }
        }
        w.extend_from_slice(b);
        Self::explicit(spec, d, w)
    }

    pub fn rank_one(spec: &KernelSpec, y: Point) -> Result<Self> {
        let action = AdversaryAction::RankOne { y };
        action.check_norm(spec)?;
        Ok(action)
    }

    /// Hilbert norm `||w||_H`.
    pub fn hilbert_norm(&self, spec: &KernelSpec) -> Result<f64> {
        match self {
            AdversaryAction::ExplicitVector { w } => {
                Ok(w.iter().map(|x| x * x).sum::<f64>().sqrt())
            }
            AdversaryAction::RankOne { y } => Ok(kernel_eval(spec, y, y)?.max(0.0).sqrt()),
        }
    }

    fn check_norm(&self, spec: &KernelSpec) -> Result<()> {
        let norm = self.hilbert_norm(spec)?;
        if norm > spec.norm_bound * (1.0 + BOUND_SLACK) + BOUND_SLACK {
            return Err(Error::Input(format!(
                "adversary action norm {norm} exceeds bound {}",
                spec.norm_bound
            )));
        }
        Ok(())
    }

    /// Feature-space representation, for kernels with explicit features.
    pub fn to_feature_vector(&self, spec: &KernelSpec) -> Result<DVector<f64>> {
        match self {
            AdversaryAction::ExplicitVector { w } => Ok(DVector::from_column_slice(w)),
            AdversaryAction::RankOne { y } => feature_map(spec, y),
        }
    }
}

/// `K(x, y)`.
pub fn kernel_eval(spec: &KernelSpec, x: &Point, y: &Point) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    Ok(kernel_eval_unchecked(&spec.kind, x.coords(), y.coords()))
}

pub(crate) fn kernel_eval_unchecked(kind: &KernelKind, x: &[f64], y: &[f64]) -> f64 {
    match *kind {
        KernelKind::Linear => dot(x, y),
        KernelKind::Quadratic => {
            let s = dot(x, y);
            s * s + s
        }
        KernelKind::Gaussian { sigma } => {
            // (x_i - y_i)^2 is symmetric in (x, y) bit for bit
            let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            (-sq / (2.0 * sigma * sigma)).exp()
        }
        KernelKind::Polynomial { degree, offset } => (offset + dot(x, y)).powi(degree as i32),
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `<Phi(a), w>_H`.
pub fn loss_eval(spec: &KernelSpec, a: &Point, w: &AdversaryAction) -> Result<f64> {
    match w {
        AdversaryAction::RankOne { y } => kernel_eval(spec, a, y),
        AdversaryAction::ExplicitVector { w } => {
            if !spec.has_explicit_features() {
                return Err(Error::InvalidCombination(format!(
                    "explicit adversary vector used with {}",
                    spec.kind.name()
                )));
            }
            let phi = feature_map(spec, a)?;
            if phi.len() != w.len() {
                return Err(Error::DimensionMismatch { expected: phi.len(), got: w.len() });
            }
            Ok(phi.iter().zip(w).map(|(p, q)| p * q).sum())
        }
    }
}

/// Explicit feature map.
///
/// Quadratic: row-major `x x^T` followed by `x`. Polynomial: blocks
/// `sqrt(C(k, j) c^(k-j)) x^{(tensor j)}` for `j = 0..=k`, each tensor
/// flattened row-major, so the plain dot product gives `(c + x.y)^k`.
pub fn feature_map(spec: &KernelSpec, x: &Point) -> Result<DVector<f64>> {
    let c = x.coords();
    let d = c.len();
    match spec.kind {
        KernelKind::Linear => Ok(DVector::from_column_slice(c)),
        KernelKind::Quadratic => {
            let mut out = Vec::with_capacity(d * d + d);
            for i in 0..d {
                for j in 0..d {
                    out.push(c[i] * c[j]);
                }
            }
            out.extend_from_slice(c);
            Ok(DVector::from_vec(out))
        }
        KernelKind::Polynomial { degree, offset } if degree <= MAX_EXPLICIT_POLY_DEGREE => {
            let mut out = Vec::with_capacity(spec.feature_dim(d)?);
            let mut tensor = vec![1.0];
            for j in 0..=degree {
                let coeff = (binomial(degree, j) * offset.powi((degree - j) as i32)).sqrt();
                out.extend(tensor.iter().map(|t| coeff * t));
                if j < degree {
                    tensor = tensor
                        .iter()
                        .flat_map(|t| c.iter().map(move |xi| t * xi))
                        .collect();
                }
            }
            Ok(DVector::from_vec(out))
        }
        _ => Err(Error::UnsupportedFeatureMap(spec.kind.name())),
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `scale * [K(x_i, x_j)]`.
pub fn gram_matrix(spec: &KernelSpec, points: &[Point], scale: f64) -> Result<DMatrix<f64>> {
    if points.is_empty() {
        return Err(Error::Input("gram matrix needs at least one point".into()));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Input(format!("gram scale must be positive, got {scale}")));
    }
    let d = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
    }
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = scale * kernel_eval_unchecked(&spec.kind, points[i].coords(), points[j].coords());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}
