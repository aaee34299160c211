//! Finite-dimensional proxy kernels from kernel PCA.
//!
//! Draw `p` points, form the scaled Gram matrix `K/p`, keep its top `m`
//! eigenvectors `omega_j` and map
//! `Phi_m(x)_j = sum_k omega_jk K(x_k, x) / sqrt(p mu_j)`.
//! Then `K_m(x, y) = Phi_m(x) . Phi_m(y)` is the kernel of the orthogonal
//! projection of `Phi` onto the top-`m` empirical covariance eigenspace.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, kernel_eval_unchecked, KernelSpec, Point};
use crate::linalg::sym_eigen;
use crate::rng::StreamRng;

/// Relative eigenvalue floor used when the caller passes none.
pub const DEFAULT_RELATIVE_EIG_FLOOR: f64 = 1e-10;

/// Source of i.i.d. sample points.
pub trait PointSampler {
    fn sample(&self, rng: &mut StreamRng) -> Point;
}

/// A weighted discrete measure over a finite point set.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn uniform(points: Vec<Point>) -> Result<Self> {
        let n = points.len();
        Self::weighted(points, vec![1.0; n])
    }

    pub fn weighted(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::Input("measure needs one weight per point".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::Input("measure weights must be nonnegative with positive sum".into()));
        }
        Ok(Self { points, weights })
    }
}

impl PointSampler for DiscreteMeasure {
    fn sample(&self, rng: &mut StreamRng) -> Point {
        self.points[rng.sample_index(&self.weights)].clone()
    }
}

impl<F: Fn(&mut StreamRng) -> Point> PointSampler for F {
    fn sample(&self, rng: &mut StreamRng) -> Point {
        self(rng)
    }
}

/// Data defining the proxy feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BasisDocument", into = "BasisDocument")]
pub struct SampleBasis {
    kernel: KernelSpec,
    points: Vec<Point>,
    /// `m x p`, rows are unit eigenvectors of the scaled Gram matrix.
    eig_coeffs: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    normalizers: DVector<f64>,
}

/// Outcome of [`build_proxy`].
#[derive(Debug, Clone)]
pub struct ProxyBuild {
    pub basis: SampleBasis,
    pub requested_m: usize,
    /// Set when fewer than `requested_m` eigenvalues cleared the floor.
    pub reduced: bool,
    /// Full descending spectrum of `K/p`.
    pub spectrum: DVector<f64>,
}

impl SampleBasis {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn eig_coeffs(&self) -> &DMatrix<f64> {
        &self.eig_coeffs
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn normalizers(&self) -> &DVector<f64> {
        &self.normalizers
    }

    pub fn m(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn p(&self) -> usize {
        self.points.len()
    }

    /// Keep only the leading `m` directions.
    pub fn truncate(&self, m: usize) -> SampleBasis {
        let m = m.min(self.m());
        SampleBasis {
            kernel: self.kernel,
            points: self.points.clone(),
            eig_coeffs: self.eig_coeffs.rows(0, m).into_owned(),
            eigenvalues: self.eigenvalues.rows(0, m).into_owned(),
            normalizers: self.normalizers.rows(0, m).into_owned(),
        }
    }

    fn validate(&self) -> Result<()> {
        let (m, p) = (self.eigenvalues.len(), self.points.len());
        if p == 0 {
            return Err(Error::Input("basis has no sample points".into()));
        }
        if self.eig_coeffs.nrows() != m || self.normalizers.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: self.eig_coeffs.nrows() });
        }
        if self.eig_coeffs.ncols() != p {
            return Err(Error::DimensionMismatch { expected: p, got: self.eig_coeffs.ncols() });
        }
        let d = self.points[0].dim();
        if let Some(x) = self.points.iter().find(|x| x.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
        }
        for j in 0..m {
            if !(self.eigenvalues[j] > 0.0) || (j > 0 && self.eigenvalues[j] > self.eigenvalues[j - 1])
            {
                return Err(Error::Input("eigenvalues must be positive and non-increasing".into()));
            }
            if !(self.normalizers[j] > 0.0) {
                return Err(Error::Input("normalizers must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct BasisDocument {
    kernel: KernelSpec,
    points: Vec<Point>,
    eig_coeffs: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    normalizers: Vec<f64>,
}

impl From<SampleBasis> for BasisDocument {
    fn from(b: SampleBasis) -> Self {
        let eig_coeffs = (0..b.eig_coeffs.nrows())
            .map(|j| b.eig_coeffs.row(j).iter().copied().collect())
            .collect();
        BasisDocument {
            kernel: b.kernel,
            points: b.points,
            eig_coeffs,
            eigenvalues: b.eigenvalues.iter().copied().collect(),
            normalizers: b.normalizers.iter().copied().collect(),
        }
    }
}

impl TryFrom<BasisDocument> for SampleBasis {
    type Error = Error;

    fn try_from(doc: BasisDocument) -> Result<Self> {
        let m = doc.eig_coeffs.len();
        let p = doc.points.len();
        if doc.eig_coeffs.iter().any(|row| row.len() != p) {
            return Err(Error::Input("eig_coeffs rows must have one entry per point".into()));
        }
        let flat: Vec<f64> = doc.eig_coeffs.into_iter().flatten().collect();
        let basis = SampleBasis {
            kernel: doc.kernel,
            points: doc.points,
            eig_coeffs: DMatrix::from_row_slice(m, p, &flat),
            eigenvalues: DVector::from_vec(doc.eigenvalues),
            normalizers: DVector::from_vec(doc.normalizers),
        };
        basis.validate()?;
        Ok(basis)
    }
}

/// Draw `p` points from `sampler` and build the proxy.
pub fn build_proxy(
    kernel: &KernelSpec,
    sampler: &dyn PointSampler,
    m: usize,
    p: usize,
    eig_floor: Option<f64>,
    rng: &mut StreamRng,
) -> Result<ProxyBuild> {
    if p < m {
        return Err(Error::Input(format!("need p >= m, got p = {p}, m = {m}")));
    }
    let points: Vec<Point> = (0..p).map(|_| sampler.sample(rng)).collect();
    build_proxy_from_points(kernel, points, m, eig_floor)
}

/// Build the proxy from an explicit sample.
///
/// `eig_floor` is absolute; `None` means `1e-10 * mu_1`. Directions at or
/// below the floor are dropped and `reduced` is set.
pub fn build_proxy_from_points(
    kernel: &KernelSpec,
    points: Vec<Point>,
    m: usize,
    eig_floor: Option<f64>,
) -> Result<ProxyBuild> {
    let p = points.len();
    if m == 0 {
        return Err(Error::Input("m must be at least 1".into()));
    }
    if p < m {
        return Err(Error::Input(format!("need p >= m, got p = {p}, m = {m}")));
    }
    let gram = gram_matrix(kernel, &points, 1.0 / p as f64)?;
    let eig = sym_eigen(&gram);
    let top = eig.max_value().max(0.0);
    let floor = match eig_floor {
        Some(f) if f.is_finite() && f >= 0.0 => f,
        Some(f) => return Err(Error::Input(format!("eig_floor must be nonnegative, got {f}"))),
        None => DEFAULT_RELATIVE_EIG_FLOOR * top,
    };
    let kept = (0..m).take_while(|&j| eig.values[j] > floor && eig.values[j] > 0.0).count();

    let mut eig_coeffs = DMatrix::zeros(kept, p);
    for j in 0..kept {
        eig_coeffs.set_row(j, &eig.vectors.column(j).transpose());
    }
    let eigenvalues = eig.values.rows(0, kept).into_owned();
    let normalizers = eigenvalues.map(|mu| (p as f64 * mu).sqrt());

    Ok(ProxyBuild {
        basis: SampleBasis { kernel: *kernel, points, eig_coeffs, eigenvalues, normalizers },
        requested_m: m,
        reduced: kept < m,
        spectrum: eig.values,
    })
}

/// `Phi_m(x)`.
pub fn proxy_feature(basis: &SampleBasis, x: &Point) -> Result<DVector<f64>> {
    let d = basis.points[0].dim();
    if x.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.dim() });
    }
    let kx = DVector::from_iterator(
        basis.p(),
        basis.points.iter().map(|xk| kernel_eval_unchecked(&basis.kernel.kind, xk.coords(), x.coords())),
    );
    let mut phi = &basis.eig_coeffs * kx;
    phi.component_div_assign(&basis.normalizers);
    Ok(phi)
}

/// `Phi_m` at every point.
pub fn proxy_features(basis: &SampleBasis, xs: &[Point]) -> Result<Vec<DVector<f64>>> {
    xs.iter().map(|x| proxy_feature(basis, x)).collect()
}

/// `max |K(x, y) - K_m(x, y)|` over all probe pairs.
pub fn approximation_sup_error(
    kernel: &KernelSpec,
    basis: &SampleBasis,
    probe_points: &[Point],
) -> Result<f64> {
    if probe_points.len() < 2 {
        return Err(Error::Input("need at least two probe points".into()));
    }
    let phis = proxy_features(basis, probe_points)?;
    let mut worst = 0.0f64;
    for i in 0..probe_points.len() {
        for j in i..probe_points.len() {
            let exact = kernel_eval_unchecked(&kernel.kind, probe_points[i].coords(), probe_points[j].coords());
            worst = worst.max((exact - phis[i].dot(&phis[j])).abs());
        }
    }
    Ok(worst)
}

/// Eigenvalue decay family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decay {
    /// `mu_j <= C j^{-beta}`.
    Polynomial { c: f64, beta: f64 },
    /// `mu_j <= C exp(-beta j)`.
    Exponential { c: f64, beta: f64 },
}

/// Eigenvalue decay together with the eigenfunction bound `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigendecayProfile {
    pub decay: Decay,
    pub eigfn_bound: f64,
}

impl EigendecayProfile {
    pub fn polynomial(c: f64, beta: f64, eigfn_bound: f64) -> Self {
        Self { decay: Decay::Polynomial { c, beta }, eigfn_bound }
    }

    pub fn exponential(c: f64, beta: f64, eigfn_bound: f64) -> Self {
        Self { decay: Decay::Exponential { c, beta }, eigfn_bound }
    }

    /// The polynomial regret rate needs `beta > 2`.
    pub fn weak_polynomial_decay(&self) -> bool {
        matches!(self.decay, Decay::Polynomial { beta, .. } if beta <= 2.0)
    }
}

/// Truncation level making the proxy an `eps/4`-approximation.
pub fn effective_dimension(profile: &EigendecayProfile, eps: f64) -> Result<usize> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Input(format!("eps must be positive, got {eps}")));
    }
    let b2 = profile.eigfn_bound * profile.eigfn_bound;
    if !(b2.is_finite() && b2 > 0.0) {
        return Err(Error::Input("eigenfunction bound must be positive".into()));
    }
    let raw = match profile.decay {
        Decay::Polynomial { c, beta } => {
            if !(beta > 1.0) {
                return Err(Error::Input(format!("polynomial decay needs beta > 1, got {beta}")));
            }
            check_positive(c, "C")?;
            (4.0 * c * b2 / ((beta - 1.0) * eps)).powf(1.0 / (beta - 1.0))
        }
        Decay::Exponential { c, beta } => {
            check_positive(c, "C")?;
            check_positive(beta, "beta")?;
            (4.0 * c * b2 / (beta * eps)).ln() / beta
        }
    };
    if raw.is_nan() || raw > 1e9 {
        return Err(Error::Input(format!("effective dimension {raw} is not representable")));
    }
    // absorb rounding so exact integers are not bumped up
    Ok(((raw - 1e-9).ceil()).max(1.0) as usize)
}

fn check_positive(x: f64, name: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("{name} must be positive, got {x}")))
    }
}

/// Which decay family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayFamily {
    Polynomial,
    Exponential,
}

/// Least-squares fit of `(C, beta)` to the top half of the spectrum above
/// `floor`. Returns the fitted decay with `C` raised so the bound dominates
/// every fitted eigenvalue.
pub fn fit_decay(spectrum: &[f64], family: DecayFamily, floor: f64) -> Result<Decay> {
    let usable: Vec<f64> = spectrum.iter().copied().take_while(|&mu| mu > floor && mu > 0.0).collect();
    let count = (usable.len() / 2).max(2);
    if usable.len() < 2 {
        return Err(Error::Input("need at least two eigenvalues above the floor to fit decay".into()));
    }
    let xs: Vec<f64> = (1..=count)
        .map(|j| match family {
            DecayFamily::Polynomial => (j as f64).ln(),
            DecayFamily::Exponential => j as f64,
        })
        .collect();
    let ys: Vec<f64> = usable[..count].iter().map(|mu| mu.ln()).collect();
    let n = count as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = -sxy / sxx;
    // smallest C with C f(j) >= mu_j on the fitted range
    let log_c = xs.iter().zip(&ys).map(|(x, y)| y + beta * x).fold(f64::NEG_INFINITY, f64::max);
    let c = log_c.exp();
    match family {
        DecayFamily::Polynomial => Ok(Decay::Polynomial { c, beta }),
        DecayFamily::Exponential => Ok(Decay::Exponential { c, beta }),
    }
}

/// `max_j max_x |Phi_m(x)_j / sqrt(mu_j)|` over probes.
pub fn estimate_eigfn_bound(basis: &SampleBasis, probes: &[Point]) -> Result<f64> {
    let mut best = 0.0f64;
    for x in probes {
        let phi = proxy_feature(basis, x)?;
        for j in 0..basis.m() {
            best = best.max((phi[j] / basis.eigenvalues[j].sqrt()).abs());
        }
    }
    Ok(best)
}

/// Fit the decay family to a built proxy and estimate `B` on `probes`.
pub fn fit_profile(build: &ProxyBuild, family: DecayFamily, probes: &[Point]) -> Result<EigendecayProfile> {
    let floor = DEFAULT_RELATIVE_EIG_FLOOR * build.spectrum[0].max(0.0);
    let decay = fit_decay(build.spectrum.as_slice(), family, floor)?;
    let eigfn_bound = estimate_eigfn_bound(&build.basis, probes)?;
    Ok(EigendecayProfile { decay, eigfn_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{feature_map, kernel_eval};

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn unit_interval(rng: &mut StreamRng) -> Point {
        pt(&[rng.uniform()])
    }

    fn random_ball(rng: &mut StreamRng, d: usize) -> Point {
        let dir = rng.unit_vector(d);
        let r = rng.uniform().powf(1.0 / d as f64);
        pt(&dir.iter().map(|x| x * r).collect::<Vec<_>>())
    }

    #[test]
    fn linear_proxy_is_exact() {
        let kernel = KernelSpec::linear(1.0).unwrap();
        let mut rng = StreamRng::new(1, "proxy");
        let sampler = |r: &mut StreamRng| random_ball(r, 3);
        let build = build_proxy(&kernel, &sampler, 3, 50, None, &mut rng).unwrap();
        assert!(!build.reduced);
        let probes: Vec<Point> = (0..100).map(|_| random_ball(&mut rng, 3)).collect();
        assert!(approximation_sup_error(&kernel, &build.basis, &probes).unwrap() <= 1e-8);
        for x in build.basis.points().iter().take(5) {
            let phi = proxy_feature(&build.basis, x).unwrap();
            assert!((phi.norm() - x.norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn single_repeated_point_hand_solution() {
        let kernel = KernelSpec::gaussian(0.8, 1.0).unwrap();
        let x0 = pt(&[0.3, 0.1]);
        let build = build_proxy_from_points(&kernel, vec![x0.clone(); 4], 1, None).unwrap();
        let y = pt(&[-0.2, 0.5]);
        let phi = proxy_feature(&build.basis, &y).unwrap();
        let expected = kernel_eval(&kernel, &x0, &y).unwrap() / kernel_eval(&kernel, &x0, &x0).unwrap().sqrt();
        assert_eq!(phi.len(), 1);
        // the eigenvector sign is arbitrary
        assert!((phi[0].abs() - expected.abs()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_reduce_m() {
        let kernel = KernelSpec::linear(1.0).unwrap();
        let build = build_proxy_from_points(&kernel, vec![pt(&[1.0, 0.0]); 3], 2, None).unwrap();
        assert!(build.reduced);
        assert_eq!(build.basis.m(), 1);
    }

    #[test]
    fn p_less_than_m_rejected() {
        let kernel = KernelSpec::linear(1.0).unwrap();
        assert!(build_proxy_from_points(&kernel, vec![pt(&[1.0])], 2, None).is_err());
    }

    #[test]
    fn basis_invariants_hold() {
        let kernel = KernelSpec::gaussian(0.5, 1.0).unwrap();
        let mut rng = StreamRng::new(2, "proxy");
        let build = build_proxy(&kernel, &unit_interval, 10, 100, None, &mut rng).unwrap();
        let b = &build.basis;
        for j in 0..b.m() {
            let rel = (b.normalizers()[j].powi(2) - b.p() as f64 * b.eigenvalues()[j]).abs()
                / (b.p() as f64 * b.eigenvalues()[j]);
            assert!(rel < 1e-8);
            assert!((b.eig_coeffs().row(j).norm() - 1.0).abs() < 1e-10);
            for k in 0..j {
                assert!(b.eig_coeffs().row(j).dot(&b.eig_coeffs().row(k)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn normalizer_matches_direct_norm() {
        // ||sum_k omega_jk Phi(x_k)||^2 evaluated through the explicit feature map
        let kernel = KernelSpec::quadratic(2f64.sqrt()).unwrap();
        let mut rng = StreamRng::new(3, "proxy");
        let points: Vec<Point> = (0..12).map(|_| random_ball(&mut rng, 2)).collect();
        let build = build_proxy_from_points(&kernel, points.clone(), 4, None).unwrap();
        let b = &build.basis;
        for j in 0..b.m() {
            let mut v = DVector::zeros(6);
            for (k, x) in points.iter().enumerate() {
                v += feature_map(&kernel, x).unwrap() * b.eig_coeffs()[(j, k)];
            }
            assert!((v.norm() - b.normalizers()[j]).abs() < 1e-8 * b.normalizers()[j]);
        }
    }

    #[test]
    fn projection_contracts_norm() {
        let kernel = KernelSpec::gaussian(0.5, 1.0).unwrap();
        let mut rng = StreamRng::new(4, "proxy");
        let build = build_proxy(&kernel, &unit_interval, 6, 80, None, &mut rng).unwrap();
        for _ in 0..1000 {
            let x = pt(&[rng.uniform() * 1.4 - 0.2]);
            let phi = proxy_feature(&build.basis, &x).unwrap();
            assert!(phi.norm_squared() <= kernel_eval(&kernel, &x, &x).unwrap() + 1e-8);
        }
    }

    #[test]
    fn sup_error_monotone_in_m() {
        let kernel = KernelSpec::gaussian(0.5, 1.0).unwrap();
        let mut rng = StreamRng::new(5, "proxy");
        let build = build_proxy(&kernel, &unit_interval, 10, 120, None, &mut rng).unwrap();
        let probes: Vec<Point> = build.basis.points()[..30].to_vec();
        let mut prev = f64::INFINITY;
        for m in 1..=10 {
            let err = approximation_sup_error(&kernel, &build.basis.truncate(m), &probes).unwrap();
            assert!(err <= prev + 1e-12, "m={m}: {err} > {prev}");
            prev = err;
        }
    }

    #[test]
    fn empty_basis_error_is_max_kernel_value() {
        let kernel = KernelSpec::gaussian(0.5, 1.0).unwrap();
        let build = build_proxy_from_points(&kernel, vec![pt(&[0.0]), pt(&[1.0])], 1, None).unwrap();
        let empty = build.basis.truncate(0);
        let probes = vec![pt(&[0.0]), pt(&[0.5])];
        assert_eq!(approximation_sup_error(&kernel, &empty, &probes).unwrap(), 1.0);
    }

    #[test]
    fn projection_idempotence() {
        let kernel = KernelSpec::gaussian(0.7, 1.0).unwrap();
        let mut rng = StreamRng::new(6, "proxy");
        let build = build_proxy(&kernel, &unit_interval, 5, 40, None, &mut rng).unwrap();
        let feats = proxy_features(&build.basis, build.basis.points()).unwrap();
        let feat_points: Vec<Point> = feats.iter().map(|f| Point::from(f.clone())).collect();
        let lin = KernelSpec::linear(10.0).unwrap();
        let again = build_proxy_from_points(&lin, feat_points.clone(), 5, None).unwrap();
        let probes = &feat_points[..10];
        for x in probes {
            for y in probes {
                let first = x.dot(y);
                let second = proxy_feature(&again.basis, x).unwrap().dot(&proxy_feature(&again.basis, y).unwrap());
                assert!((first - second).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let kernel = KernelSpec::gaussian(0.5, 1.0).unwrap();
        let mut rng = StreamRng::new(7, "proxy");
        let build = build_proxy(&kernel, &unit_interval, 4, 20, None, &mut rng).unwrap();
        let text = serde_json::to_string(&build.basis).unwrap();
        let back: SampleBasis = serde_json::from_str(&text).unwrap();
        assert_eq!(back, build.basis);
    }

    #[test]
    fn invalid_json_basis_rejected() {
        let text = r#"{"kernel":{"kind":{"kind":"linear"},"norm_bound":1.0},"points":[[1.0]],
            "eig_coeffs":[[1.0]],"eigenvalues":[-1.0],"normalizers":[1.0]}"#;
        assert!(serde_json::from_str::<SampleBasis>(text).is_err());
    }

    #[test]
    fn effective_dimension_examples() {
        let poly = EigendecayProfile::polynomial(1.0, 3.0, 1.0);
        assert_eq!(effective_dimension(&poly, 0.5).unwrap(), 2);
        let exp = EigendecayProfile::exponential(1.0, 1.0, 1.0);
        assert_eq!(effective_dimension(&exp, 4.0 / std::f64::consts::E).unwrap(), 1);
        assert_eq!(effective_dimension(&exp, 100.0).unwrap(), 1);
        assert_eq!(effective_dimension(&poly, 100.0).unwrap(), 1);
        assert!(effective_dimension(&EigendecayProfile::polynomial(1.0, 1.0, 1.0), 0.1).is_err());
        assert!(effective_dimension(&exp, 0.0).is_err());
        assert!(EigendecayProfile::polynomial(1.0, 1.5, 1.0).weak_polynomial_decay());
    }

    #[test]
    fn decay_fit_recovers_synthetic_exponential() {
        let spectrum: Vec<f64> = (1..=20).map(|j| 3.0 * (-0.7 * j as f64).exp()).collect();
        match fit_decay(&spectrum, DecayFamily::Exponential, 0.0).unwrap() {
            Decay::Exponential { c, beta } => {
                assert!((beta - 0.7).abs() < 1e-10);
                assert!((c - 3.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
        let poly: Vec<f64> = (1..=20).map(|j| 2.0 * (j as f64).powf(-2.5)).collect();
        match fit_decay(&poly, DecayFamily::Polynomial, 0.0).unwrap() {
            Decay::Polynomial { beta, .. } => assert!((beta - 2.5).abs() < 1e-10),
            other => panic!("unexpected {other:?}"),
        }
    }
}
