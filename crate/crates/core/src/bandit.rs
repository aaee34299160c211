//! Exponential weights under bandit feedback.
//!
//! Each round plays `a_t ~ p_t = (1 - gamma) q_t + gamma nu`, observes the
//! scalar loss `<Phi(a_t), w_t>` under the true kernel, forms
//! `w_hat = loss * Sigma^{-1} Phi_m(a_t)` with `Sigma = E_{p_t}[Phi_m Phi_m^T]`
//! and updates `q` multiplicatively with the estimated losses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{
    action_covariance, d_optimal_design, feature_rank, invert_covariance, mix_distributions,
    project_to_span, whiten, DiscreteDistribution, DEFAULT_DESIGN_MAX_ITER,
};
use crate::error::{Error, Result};
use crate::kernel::{feature_map, loss_eval, AdversaryAction, KernelSpec, Point};
use crate::proxy::{effective_dimension, proxy_feature, EigendecayProfile, SampleBasis};
use crate::rng::StreamRng;
use crate::weights::WeightState;

const E_MINUS_2: f64 = std::f64::consts::E - 2.0;

/// Which parameter schedule produced a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `eta = sqrt(eps / (10 m))`, `eps = log|A| / (2n)`, for `G = 1`.
    Corollary,
    /// `eta` minimizing the general regret bound at given `eps` and `m`.
    General,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    pub eta: f64,
    pub gamma: f64,
    pub m: usize,
    pub eps: f64,
    pub n: usize,
    pub schedule: ScheduleKind,
}

impl BanditConfig {
    pub fn new(eta: f64, gamma: f64, m: usize, eps: f64, n: usize) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Input(format!("eta must be positive, got {eta}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Input(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        if m == 0 || n == 0 {
            return Err(Error::Input("m and n must be positive".into()));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::Input(format!("eps must be nonnegative, got {eps}")));
        }
        Ok(Self { eta, gamma, m, eps, n, schedule: ScheduleKind::Manual })
    }

    /// Expected regret bound at these parameters.
    pub fn regret_bound(&self, g: f64, num_actions: usize) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        let g2 = g * g;
        4.0 * self.gamma * g2 * n
            + E_MINUS_2 * g2 * g2 * self.eta * m * n
            + 2.0 * self.eps * n
            + 2.0 * self.eps * n / (g2 * self.eta)
            + (num_actions as f64).ln() / self.eta
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 1.0 {
        Err(Error::HorizonTooShort { gamma })
    } else {
        Ok(())
    }
}

/// Tuned schedule: `eps = log|A|/(2n)`, `m` from the decay profile,
/// `eta = sqrt(eps/(10m))`, `gamma = 4 eta G^4 m`.
///
/// These constants assume `G = 1`; for other `G` the general
/// schedule is applied at the same `eps` and `m`, and the result is tagged
/// [`ScheduleKind::General`].
pub fn configure_bandit(
    profile: &EigendecayProfile,
    n: usize,
    num_actions: usize,
    g: f64,
) -> Result<BanditConfig> {
    if n < 2 || num_actions < 2 {
        return Err(Error::Input(format!(
            "need n >= 2 and at least two actions, got n = {n}, |A| = {num_actions}"
        )));
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::Input(format!("G must be positive, got {g}")));
    }
    let eps = (num_actions as f64).ln() / (2.0 * n as f64);
    if eps > g * g {
        return Err(Error::Precondition(format!("eps = {eps} exceeds G^2 = {}", g * g)));
    }
    let m = effective_dimension(profile, eps)?;
    if (g - 1.0).abs() > 1e-12 {
        return general_schedule(eps, m, n, num_actions, g);
    }
    let eta = (eps / (10.0 * m as f64)).sqrt();
    let gamma = 4.0 * eta * m as f64;
    check_gamma(gamma)?;
    Ok(BanditConfig { eta, gamma, m, eps, n, schedule: ScheduleKind::Corollary })
}

/// Step size minimizing the general bound:
/// `eta = sqrt((log|A| + 2 eps n / G^2) / ((16 G^6 + (e-2) G^4) m n))`.
pub fn general_schedule(eps: f64, m: usize, n: usize, num_actions: usize, g: f64) -> Result<BanditConfig> {
    if n == 0 || m == 0 || num_actions == 0 {
        return Err(Error::Input("n, m and |A| must be positive".into()));
    }
    if !(eps >= 0.0) || eps > g * g {
        return Err(Error::Precondition(format!("need 0 <= eps <= G^2, got eps = {eps}")));
    }
    let (nf, mf) = (n as f64, m as f64);
    let g2 = g * g;
    let num = (num_actions as f64).ln() + 2.0 * eps * nf / g2;
    let den = (16.0 * g2 * g2 * g2 + E_MINUS_2 * g2 * g2) * mf * nf;
    let eta = (num / den).sqrt();
    if !(eta > 0.0) {
        return Err(Error::Precondition("step size is zero; need |A| >= 2 or eps > 0".into()));
    }
    let gamma = 4.0 * eta * g2 * g2 * mf;
    check_gamma(gamma)?;
    Ok(BanditConfig { eta, gamma, m, eps, n, schedule: ScheduleKind::General })
}

/// `observed_loss * sigma_inv * phi_a`.
pub fn estimate_adversary(sigma_inv: &DMatrix<f64>, phi_a: &DVector<f64>, observed_loss: f64) -> Result<DVector<f64>> {
    if sigma_inv.ncols() != phi_a.len() || !sigma_inv.is_square() {
        return Err(Error::DimensionMismatch { expected: sigma_inv.ncols(), got: phi_a.len() });
    }
    Ok(sigma_inv * phi_a * observed_loss)
}

/// Exact expectation `sum_a p(a) w_hat(a)` given every action's loss.
pub fn expected_estimate(
    p: &DiscreteDistribution,
    features: &[DVector<f64>],
    sigma_inv: &DMatrix<f64>,
    losses: &[f64],
) -> Result<DVector<f64>> {
    if p.len() != features.len() || losses.len() != features.len() {
        return Err(Error::DimensionMismatch { expected: features.len(), got: losses.len() });
    }
    let m = sigma_inv.nrows();
    let mut acc = DVector::zeros(m);
    for ((f, &pa), &l) in features.iter().zip(p.weights()).zip(losses) {
        acc += f * (pa * l);
    }
    Ok(sigma_inv * acc)
}

/// Where the finite-dimensional features come from.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    /// Exact feature map of a finite-dimensional kernel.
    Explicit(KernelSpec),
    /// Proxy features `Phi_m`.
    Proxy(SampleBasis),
}

impl FeatureSource {
    fn raw(&self, x: &Point) -> Result<DVector<f64>> {
        match self {
            FeatureSource::Explicit(k) => feature_map(k, x),
            FeatureSource::Proxy(b) => proxy_feature(b, x),
        }
    }
}

/// Precomputed, read-only data shared by all bandit runs on one action set:
/// features in whitened coordinates and the exploration design.
#[derive(Debug, Clone)]
pub struct BanditSetup {
    source: FeatureSource,
    /// Maps raw features to setup coordinates.
    transform: DMatrix<f64>,
    features: Vec<DVector<f64>>,
    exploration: DiscreteDistribution,
    /// Rank of the raw features; the working dimension.
    m: usize,
    raw_dim: usize,
    centering_offset: f64,
}

impl BanditSetup {
    /// Features from `source` at each action, projected onto their span,
    /// with a D-optimal exploration design, whitened so `Sigma_nu = I/m`.
    pub fn new(source: FeatureSource, actions: &[Point], design_tol: f64) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Input("empty action set".into()));
        }
        let raw: Vec<DVector<f64>> = actions.iter().map(|a| source.raw(a)).collect::<Result<_>>()?;
        let raw_dim = raw[0].len();
        let rank = feature_rank(&raw);
        if rank == 0 {
            return Err(Error::RankDeficient { rank: 0, dim: raw_dim });
        }
        let (projected, _) = project_to_span(&raw);
        let span = span_basis(&raw, rank);
        let design = d_optimal_design(&projected, DEFAULT_DESIGN_MAX_ITER, design_tol)?;
        let centering_offset = crate::design::centering_offset(&design.distribution, &projected);
        let (t, features) = whiten(&projected, &design.distribution)?;
        Ok(Self {
            source,
            transform: t * span.transpose(),
            features,
            exploration: design.distribution,
            m: rank,
            raw_dim,
            centering_offset,
        })
    }

    pub fn explicit(kernel: &KernelSpec, actions: &[Point], design_tol: f64) -> Result<Self> {
        Self::new(FeatureSource::Explicit(*kernel), actions, design_tol)
    }

    pub fn proxy(basis: SampleBasis, actions: &[Point], design_tol: f64) -> Result<Self> {
        Self::new(FeatureSource::Proxy(basis), actions, design_tol)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Dimension before projection onto the span.
    pub fn raw_dim(&self) -> usize {
        self.raw_dim
    }

    pub fn features(&self) -> &[DVector<f64>] {
        &self.features
    }

    pub fn exploration(&self) -> &DiscreteDistribution {
        &self.exploration
    }

    /// Norm of the design-weighted mean feature; the analysis assumes zero.
    pub fn centering_offset(&self) -> f64 {
        self.centering_offset
    }

    /// Feature of an arbitrary point in setup coordinates.
    pub fn feature_of(&self, x: &Point) -> Result<DVector<f64>> {
        Ok(&self.transform * self.source.raw(x)?)
    }

    /// Adversary action in setup coordinates, where one is defined.
    pub fn adversary_feature(&self, w: &AdversaryAction) -> Result<DVector<f64>> {
        match (w, &self.source) {
            (AdversaryAction::RankOne { y }, _) => self.feature_of(y),
            (AdversaryAction::ExplicitVector { w }, FeatureSource::Explicit(_)) => {
                if w.len() != self.transform.ncols() {
                    return Err(Error::DimensionMismatch { expected: self.transform.ncols(), got: w.len() });
                }
                // losses are <phi, w>, so w maps through the inverse transpose
                let inv = pseudo_inverse_transpose(&self.transform);
                Ok(inv * DVector::from_column_slice(w))
            }
            (AdversaryAction::ExplicitVector { .. }, FeatureSource::Proxy(_)) => Err(Error::InvalidCombination(
                "explicit adversary vectors have no proxy representation".into(),
            )),
        }
    }
}

fn span_basis(raw: &[DVector<f64>], rank: usize) -> DMatrix<f64> {
    let m = raw[0].len();
    let mut s = DMatrix::zeros(m, m);
    for f in raw {
        s += f * f.transpose();
    }
    crate::linalg::sym_eigen(&s).vectors.columns(0, rank).into_owned()
}

fn pseudo_inverse_transpose(t: &DMatrix<f64>) -> DMatrix<f64> {
    // t has full row rank: (t t^T)^{-1} t
    let tt = t * t.transpose();
    tt.try_inverse().expect("whitening transform has full row rank") * t
}

/// Per-round output.
#[derive(Debug, Clone)]
pub struct BanditRound {
    pub action_index: usize,
    pub loss: f64,
    pub estimate: DVector<f64>,
    pub min_eig: f64,
    pub est_norm: f64,
    /// `eta * max_a |<w_hat, Phi_m(a)>|`.
    pub max_scaled_estimate: f64,
    /// `||E[w_hat] - w_m||` when the adversary has a representation in
    /// setup coordinates and tracking is enabled.
    pub bias: Option<f64>,
}

/// Options for [`bandit_round`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundOptions {
    pub track_bias: bool,
}

/// One round of the bandit algorithm; mutates `state`.
#[allow(clippy::too_many_arguments)]
pub fn bandit_round(
    state: &mut WeightState,
    config: &BanditConfig,
    setup: &BanditSetup,
    kernel: &KernelSpec,
    actions: &[Point],
    w: &AdversaryAction,
    rng: &mut StreamRng,
    options: RoundOptions,
) -> Result<BanditRound> {
    if state.round() >= config.n {
        return Err(Error::Precondition(format!("horizon n = {} already reached", config.n)));
    }
    if state.len() != actions.len() || setup.features.len() != actions.len() {
        return Err(Error::DimensionMismatch { expected: actions.len(), got: state.len() });
    }
    if config.m != setup.m {
        return Err(Error::DimensionMismatch { expected: setup.m, got: config.m });
    }
    let q = state.distribution();
    let p = mix_distributions(&q, &setup.exploration, config.gamma)?;
    let action_index = p.sample(rng);
    let loss = loss_eval(kernel, &actions[action_index], w)?;

    let sigma = action_covariance(&p, &setup.features)?;
    let floor = config.gamma / config.m as f64 * 0.5;
    let sigma_inv = invert_covariance(&sigma, floor)?;
    let estimate = estimate_adversary(&sigma_inv, &setup.features[action_index], loss)?;

    let est_losses: Vec<f64> = setup.features.iter().map(|f| estimate.dot(f)).collect();
    let max_scaled_estimate = config.eta * est_losses.iter().fold(0.0f64, |acc, l| acc.max(l.abs()));

    let bias = if options.track_bias {
        match setup.adversary_feature(w) {
            Ok(target) => {
                let losses: Vec<f64> = actions.iter().map(|a| loss_eval(kernel, a, w)).collect::<Result<_>>()?;
                let mean = expected_estimate(&p, &setup.features, &sigma_inv, &losses)?;
                Some((mean - target).norm())
            }
            Err(_) => None,
        }
    } else {
        None
    };

    state.update(config.eta, &est_losses)?;
    Ok(BanditRound {
        action_index,
        loss,
        est_norm: estimate.norm(),
        estimate,
        min_eig: sigma.min_eig,
        max_scaled_estimate,
        bias,
    })
}
