//! Full-information algorithms: exponential weights, the online
//! conditional-gradient method, and an FTRL solver used to check it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{feature_map, loss_eval, AdversaryAction, KernelKind, KernelSpec, Point};
use crate::linalg::symmetrize;
use crate::quadprog::{trs_minimize, QuadraticObjective};
use crate::rng::StreamRng;
use crate::weights::WeightState;

const E_MINUS_2: f64 = std::f64::consts::E - 2.0;
/// Atoms lighter than this are dropped from a [`ConvexCombination`].
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Iteration cap of the FTRL solver.
pub const FTRL_MAX_ITER: usize = 100_000;

/// `eta = sqrt(log|A| / (e - 2)) / (G^2 sqrt(n))`.
pub fn full_info_eta(num_actions: usize, g: f64, n: usize) -> f64 {
    ((num_actions as f64).ln() / E_MINUS_2).sqrt() / (g * g * (n as f64).sqrt())
}

/// `sqrt((e - 2) log|A|) G^2 sqrt(n)`, the stated regret bound.
pub fn full_info_bound(num_actions: usize, g: f64, n: usize) -> f64 {
    (E_MINUS_2 * (num_actions as f64).ln()).sqrt() * g * g * (n as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct FullInfoRound {
    pub action_index: usize,
    pub loss: f64,
    /// Every action's loss this round.
    pub losses: Vec<f64>,
}

/// Sample from the current weights, observe the full loss vector, update.
pub fn full_info_round(
    state: &mut WeightState,
    eta: f64,
    kernel: &KernelSpec,
    actions: &[Point],
    w: &AdversaryAction,
    rng: &mut StreamRng,
) -> Result<FullInfoRound> {
    if state.len() != actions.len() {
        return Err(Error::DimensionMismatch { expected: actions.len(), got: state.len() });
    }
    let p = state.probabilities();
    let action_index = rng.sample_index(&p);
    let losses: Vec<f64> = actions.iter().map(|a| loss_eval(kernel, a, w)).collect::<Result<_>>()?;
    state.update(eta, &losses)?;
    Ok(FullInfoRound { action_index, loss: losses[action_index], losses })
}

/// Where the player may act.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Finite(Vec<Point>),
    UnitBall { dim: usize },
}

/// Global minimizer of `<gradient, Phi(a)>` over the action set.
pub fn linear_min_oracle(kernel: &KernelSpec, gradient: &DVector<f64>, action_set: &ActionSet) -> Result<Point> {
    match action_set {
        ActionSet::Finite(actions) => {
            let features: Vec<DVector<f64>> = actions.iter().map(|a| feature_map(kernel, a)).collect::<Result<_>>()?;
            Ok(actions[argmin_linear(&features, gradient)?].clone())
        }
        ActionSet::UnitBall { dim } => {
            let d = *dim;
            match kernel.kind {
                KernelKind::Linear => {
                    if gradient.len() != d {
                        return Err(Error::DimensionMismatch { expected: d, got: gradient.len() });
                    }
                    let norm = gradient.norm();
                    if norm == 0.0 {
                        Ok(Point::from(DVector::zeros(d)))
                    } else {
                        Ok(Point::from(-gradient / norm))
                    }
                }
                KernelKind::Quadratic => {
                    if gradient.len() != d * d + d {
                        return Err(Error::DimensionMismatch { expected: d * d + d, got: gradient.len() });
                    }
                    let b = DMatrix::from_row_slice(d, d, &gradient.as_slice()[..d * d]);
                    let lin = DVector::from_column_slice(&gradient.as_slice()[d * d..]);
                    let obj = QuadraticObjective::new(symmetrize(&b), lin)?;
                    Ok(trs_minimize(&obj, 1e-12)?.point)
                }
                _ => Err(Error::UnsupportedOracle(format!(
                    "unit-ball minimization for {} kernel",
                    kernel.kind.name()
                ))),
            }
        }
    }
}

/// Index of the smallest `<gradient, f>`, lowest index on ties.
pub fn argmin_linear(features: &[DVector<f64>], gradient: &DVector<f64>) -> Result<usize> {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, f) in features.iter().enumerate() {
        if f.len() != gradient.len() {
            return Err(Error::DimensionMismatch { expected: gradient.len(), got: f.len() });
        }
        let v = f.dot(gradient);
        if v < best.1 {
            best = (i, v);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::Input("empty action set".into()));
    }
    Ok(best.0)
}

/// A point of `conv(Phi(A))` stored as weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexCombination {
    atoms: Vec<Point>,
    /// Position in a finite action list, when the atom came from one.
    indices: Vec<Option<usize>>,
    features: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl ConvexCombination {
    pub fn single(atom: Point, feature: DVector<f64>, index: Option<usize>) -> Self {
        Self { atoms: vec![atom], indices: vec![index], features: vec![feature], weights: vec![1.0] }
    }

    /// Build from explicit atoms and weights; weights must form a distribution.
    pub fn from_parts(kernel: &KernelSpec, atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::Input("need one weight per atom".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Input("weights must be a probability vector".into()));
        }
        let features = atoms.iter().map(|a| feature_map(kernel, a)).collect::<Result<_>>()?;
        let indices = (0..atoms.len()).map(Some).collect();
        Ok(Self { atoms, indices, features, weights })
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn indices(&self) -> &[Option<usize>] {
        &self.indices
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// `E_{a ~ D}[Phi(a)]`.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.features[0].len());
        for (f, w) in self.features.iter().zip(&self.weights) {
            m.axpy(*w, f, 1.0);
        }
        m
    }

    pub fn sample(&self, rng: &mut StreamRng) -> usize {
        rng.sample_index(&self.weights)
    }

    /// `(1 - gamma) self + gamma atom`, merging a repeated atom and pruning
    /// weights below [`PRUNE_THRESHOLD`].
    pub fn mix_in(&mut self, gamma: f64, atom: Point, feature: DVector<f64>, index: Option<usize>) {
        for w in &mut self.weights {
            *w *= 1.0 - gamma;
        }
        let existing = self.atoms.iter().zip(&self.indices).position(|(a, i)| match (i, index) {
            (Some(i), Some(j)) => *i == j,
            _ => a == &atom,
        });
        match existing {
            Some(k) => self.weights[k] += gamma,
            None => {
                self.atoms.push(atom);
                self.indices.push(index);
                self.features.push(feature);
                self.weights.push(gamma);
            }
        }
        if self.weights.iter().any(|&w| w < PRUNE_THRESHOLD) {
            let keep: Vec<bool> = self.weights.iter().map(|&w| w >= PRUNE_THRESHOLD).collect();
            let mut k = 0;
            self.atoms.retain(|_| (keep[k], k += 1).0);
            k = 0;
            self.indices.retain(|_| (keep[k], k += 1).0);
            k = 0;
            self.features.retain(|_| (keep[k], k += 1).0);
            self.weights.retain(|&w| w >= PRUNE_THRESHOLD);
            let total: f64 = self.weights.iter().sum();
            for w in &mut self.weights {
                *w /= total;
            }
        }
    }
}

/// Conditional-gradient parameters; `gamma_t = min(1, 2/sqrt(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgConfig {
    pub eta: f64,
    pub n: usize,
}

impl CgConfig {
    /// `eta = 1 / (2 n^{3/4})`.
    pub fn from_theorem(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("horizon must be positive".into()));
        }
        Ok(Self { eta: 1.0 / (2.0 * (n as f64).powf(0.75)), n })
    }

    pub fn gamma(t: usize) -> f64 {
        (2.0 / (t as f64).sqrt()).min(1.0)
    }

    /// `8 G^2 n^{3/4}`.
    pub fn regret_bound(g: f64, n: usize) -> f64 {
        8.0 * g * g * (n as f64).powf(0.75)
    }
}

/// Running state of the conditional-gradient method.
#[derive(Debug, Clone)]
pub struct CgState {
    pub combination: ConvexCombination,
    /// `X_t`, maintained by the mixing recursion.
    pub mean: DVector<f64>,
    pub anchor: DVector<f64>,
    /// `sum_{s < t} w_s` in feature space.
    pub loss_sum: DVector<f64>,
    /// Index of the next round, starting at 1.
    pub t: usize,
    finite_features: Option<Vec<DVector<f64>>>,
}

impl CgState {
    /// `X_1 = Phi(a_1)` with `a_1` the first action of a finite set, or the
    /// origin for the unit ball.
    pub fn new(kernel: &KernelSpec, action_set: &ActionSet) -> Result<Self> {
        let (first, index, finite_features) = match action_set {
            ActionSet::Finite(actions) => {
                if actions.is_empty() {
                    return Err(Error::Input("empty action set".into()));
                }
                let feats: Vec<DVector<f64>> = actions.iter().map(|a| feature_map(kernel, a)).collect::<Result<_>>()?;
                (actions[0].clone(), Some(0), Some(feats))
            }
            ActionSet::UnitBall { dim } => (Point::from(DVector::zeros(*dim)), None, None),
        };
        let feature = feature_map(kernel, &first)?;
        Ok(Self {
            combination: ConvexCombination::single(first, feature.clone(), index),
            mean: feature.clone(),
            anchor: feature.clone(),
            loss_sum: DVector::zeros(feature.len()),
            t: 1,
            finite_features,
        })
    }

    /// `F_t(Y) = eta <sum_{s<t} w_s, Y> + ||Y - X_1||^2`.
    pub fn objective(&self, eta: f64, y: &DVector<f64>) -> f64 {
        eta * self.loss_sum.dot(y) + (y - &self.anchor).norm_squared()
    }
}

#[derive(Debug, Clone)]
pub struct CgRound {
    pub action: Point,
    pub action_index: Option<usize>,
    pub loss: f64,
    pub num_atoms: usize,
    /// `||E_D[Phi] - X_t||` before the update.
    pub mean_error: f64,
}

/// One conditional-gradient round; mutates `state`.
pub fn cg_round(
    state: &mut CgState,
    config: &CgConfig,
    kernel: &KernelSpec,
    action_set: &ActionSet,
    w: &AdversaryAction,
    rng: &mut StreamRng,
) -> Result<CgRound> {
    let t = state.t;
    let mean_error = (state.combination.mean() - &state.mean).norm();
    let k = state.combination.sample(rng);
    let action = state.combination.atoms()[k].clone();
    let action_index = state.combination.indices()[k];
    let loss = loss_eval(kernel, &action, w)?;

    let grad = &state.loss_sum * config.eta + (&state.mean - &state.anchor) * 2.0;
    let (v, v_index, v_feature) = match (&state.finite_features, action_set) {
        (Some(feats), ActionSet::Finite(actions)) => {
            let i = argmin_linear(feats, &grad)?;
            (actions[i].clone(), Some(i), feats[i].clone())
        }
        _ => {
            let v = linear_min_oracle(kernel, &grad, action_set)?;
            let f = feature_map(kernel, &v)?;
            (v, None, f)
        }
    };
    let gamma = CgConfig::gamma(t);
    state.mean = &state.mean * (1.0 - gamma) + &v_feature * gamma;
    state.combination.mix_in(gamma, v, v_feature, v_index);
    state.loss_sum += w.to_feature_vector(kernel)?;
    state.t += 1;
    Ok(CgRound { action, action_index, loss, num_atoms: state.combination.num_atoms(), mean_error })
}

/// Result of [`ftrl_solve`].
#[derive(Debug, Clone)]
pub struct FtrlSolution {
    pub weights: Vec<f64>,
    pub point: DVector<f64>,
    pub objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Minimize `<linear, X> + ||X - anchor||^2` over `X = sum_i lambda_i f_i`,
/// `lambda` in the simplex, by pairwise Frank-Wolfe with exact line search.
/// Stops when the Frank-Wolfe duality gap drops to `tol`.
pub fn ftrl_solve(
    features: &[DVector<f64>],
    linear: &DVector<f64>,
    anchor: Option<&DVector<f64>>,
    tol: f64,
    warm_start: Option<&[f64]>,
) -> Result<FtrlSolution> {
    let n = features.len();
    if n == 0 {
        return Err(Error::Input("no atoms".into()));
    }
    let dim = linear.len();
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: f.len() });
    }
    let zero = DVector::zeros(dim);
    let c = anchor.unwrap_or(&zero);
    let gram = DMatrix::from_fn(n, n, |i, j| features[i].dot(&features[j]));
    let s = DVector::from_fn(n, |i, _| features[i].dot(&(linear - c * 2.0)));

    let mut lambda = match warm_start {
        Some(w) if w.len() == n && w.iter().all(|x| *x >= 0.0) && w.iter().sum::<f64>() > 0.0 => {
            let total: f64 = w.iter().sum();
            DVector::from_iterator(n, w.iter().map(|x| x / total))
        }
        _ => {
            let mut l = DVector::zeros(n);
            l[0] = 1.0;
            l
        }
    };
    let mut g_lambda = &gram * &lambda;
    let mut iterations = 0;
    loop {
        if iterations % 1000 == 0 {
            g_lambda = &gram * &lambda;
        }
        let grad = &s + &g_lambda * 2.0;
        let (j, gj) = grad.iter().enumerate().fold((0, f64::INFINITY), |b, (i, &v)| if v < b.1 { (i, v) } else { b });
        let (k, gk) = grad
            .iter()
            .enumerate()
            .filter(|(i, _)| lambda[*i] > 0.0)
            .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let gap = lambda.dot(&grad) - gj;
        if gap <= tol {
            let point = features.iter().zip(lambda.iter()).fold(DVector::zeros(dim), |acc, (f, l)| acc + f * *l);
            let objective = linear.dot(&point) + (&point - c).norm_squared();
            return Ok(FtrlSolution { weights: lambda.iter().copied().collect(), point, objective, gap, iterations });
        }
        if iterations >= FTRL_MAX_ITER {
            return Err(Error::ToleranceNotMet { gap, tol, iterations });
        }
        iterations += 1;
        let curvature = gram[(j, j)] + gram[(k, k)] - 2.0 * gram[(j, k)];
        let step = if curvature > 0.0 { ((gk - gj) / (2.0 * curvature)).min(lambda[k]) } else { lambda[k] };
        lambda[j] += step;
        lambda[k] -= step;
        if lambda[k] < 1e-300 {
            lambda[k] = 0.0;
        }
        for i in 0..n {
            g_lambda[i] += step * (gram[(i, j)] - gram[(i, k)]);
        }
    }
}

/// `argmin_{X in conv(Phi(A))} eta <sum_s w_s, X> + ||X||^2`.
pub fn ftrl_oracle(
    history: &[AdversaryAction],
    eta: f64,
    kernel: &KernelSpec,
    actions: &[Point],
    tol: f64,
) -> Result<ConvexCombination> {
    if actions.is_empty() {
        return Err(Error::Input("empty action set".into()));
    }
    let features: Vec<DVector<f64>> = actions.iter().map(|a| feature_map(kernel, a)).collect::<Result<_>>()?;
    let mut sum = DVector::zeros(features[0].len());
    for w in history {
        sum += w.to_feature_vector(kernel)?;
    }
    let sol = ftrl_solve(&features, &(sum * eta), None, tol, None)?;
    ConvexCombination::from_parts(kernel, actions.to_vec(), sol.weights)
}
