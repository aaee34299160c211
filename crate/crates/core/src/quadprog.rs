//! Quadratic losses over the unit ball: the trust-region minimizer and a
//! hit-and-run sampler for `q(a) ~ exp(a^T B a + b^T a)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::Point;
use crate::linalg::{asymmetry, sym_eigen, symmetrize, SymEigen};
use crate::rng::StreamRng;

/// Grid resolution for the one-dimensional slice along each chord.
pub const CHORD_GRID: usize = 256;
/// Burn-in per dimension when the caller passes none.
pub const BURN_IN_PER_DIM: usize = 1000;

const ZERO_EIG: f64 = 1e-10;
const HARD_CASE_TOL: f64 = 1e-10;
const SECULAR_MAX_ITER: usize = 200;

/// `a^T B a + b^T a` with `B` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    matrix: DMatrix<f64>,
    linear: DVector<f64>,
}

impl QuadraticObjective {
    pub fn new(matrix: DMatrix<f64>, linear: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != linear.len() {
            return Err(Error::DimensionMismatch { expected: linear.len(), got: matrix.nrows() });
        }
        if linear.is_empty() {
            return Err(Error::Input("objective must have dimension at least 1".into()));
        }
        if matrix.iter().chain(linear.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Input("objective entries must be finite".into()));
        }
        let scale = matrix.amax().max(1.0);
        if asymmetry(&matrix) > 1e-12 * scale {
            return Err(Error::Input("B must be symmetric".into()));
        }
        Ok(Self { matrix: symmetrize(&matrix), linear })
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn value(&self, a: &DVector<f64>) -> f64 {
        a.dot(&(&self.matrix * a)) + self.linear.dot(a)
    }
}

/// Global minimizer over the unit ball.
#[derive(Debug, Clone)]
pub struct TrsSolution {
    pub point: Point,
    pub value: f64,
    /// Lagrange multiplier `nu` in `2 B a + b = -2 nu a`.
    pub multiplier: f64,
    pub hard_case: bool,
}

/// Minimize `a^T B a + b^T a` over `||a|| <= 1`.
///
/// In the eigenbasis of `B` the stationary points are
/// `y_i(nu) = -g_i / (2 (lambda_i + nu))` with `g = V^T b`. The interior
/// solution applies when `B` is positive definite and `||y(0)|| <= 1`;
/// otherwise `nu > max(0, -lambda_min)` solves `||y(nu)|| = 1` by safeguarded
/// Newton on `1/||y|| - 1`. When `b` has no component on the bottom
/// eigenspace and `||y(-lambda_min)|| <= 1` the bottom eigenvector fills the
/// remaining norm.
pub fn trs_minimize(obj: &QuadraticObjective, tol: f64) -> Result<TrsSolution> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tol must be positive, got {tol}")));
    }
    let eig = sym_eigen(&obj.matrix);
    let g = eig.vectors.transpose() * &obj.linear;
    let d = obj.dim();
    let lambda = &eig.values;
    let lmin = eig.min_value();
    let scale = lambda.amax().max(1.0);

    let interior = |nu: f64| DVector::from_fn(d, |i, _| -g[i] / (2.0 * (lambda[i] + nu)));

    if lmin > 0.0 {
        let y = interior(0.0);
        if y.norm() <= 1.0 {
            return Ok(finish(obj, &eig, y, 0.0, false));
        }
    }

    let bottom: Vec<usize> = (0..d).filter(|&i| lambda[i] - lmin <= ZERO_EIG * scale).collect();
    let g_bottom = bottom.iter().map(|&i| g[i] * g[i]).sum::<f64>().sqrt();
    if lmin <= 0.0 && g_bottom <= HARD_CASE_TOL * (1.0 + obj.linear.norm()) {
        let mut y = DVector::zeros(d);
        for i in 0..d {
            if !bottom.contains(&i) {
                y[i] = -g[i] / (2.0 * (lambda[i] - lmin));
            }
        }
        let r = y.norm();
        if r <= 1.0 {
            let j = bottom[0];
            let sign = if g[j] > 0.0 { -1.0 } else { 1.0 };
            y[j] = sign * (1.0 - r * r).max(0.0).sqrt();
            return Ok(finish(obj, &eig, y, -lmin, true));
        }
    }

    let nu = solve_secular(&g, lambda, lmin);
    let mut y = interior(nu);
    // put the residual norm on the dominant coordinate when it carries most of the mass
    let (j, yj) = y.iter().enumerate().fold((0, 0.0f64), |b, (i, &v)| if v.abs() > b.1.abs() { (i, v) } else { b });
    if yj * yj >= 0.5 {
        let rest: f64 = y.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, v)| v * v).sum();
        y[j] = yj.signum() * (1.0 - rest).max(0.0).sqrt();
    } else {
        let n = y.norm();
        y /= n;
    }
    Ok(finish(obj, &eig, y, nu, false))
}

fn finish(obj: &QuadraticObjective, eig: &SymEigen, y: DVector<f64>, nu: f64, hard_case: bool) -> TrsSolution {
    let a = &eig.vectors * y;
    TrsSolution { value: obj.value(&a), point: Point::from(a), multiplier: nu, hard_case }
}

fn solve_secular(g: &DVector<f64>, lambda: &DVector<f64>, lmin: f64) -> f64 {
    let norm_sq = |nu: f64| -> f64 {
        g.iter()
            .zip(lambda.iter())
            .map(|(gi, li)| {
                let den = 2.0 * (li + nu);
                if den <= 0.0 {
                    if *gi == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    (gi / den).powi(2)
                }
            })
            .sum()
    };
    let mut lo = (-lmin).max(0.0);
    let mut hi = lo.max(g.norm() / 2.0 - lmin);
    if norm_sq(hi) > 1.0 {
        hi = lo + g.norm() / 2.0 + 1.0;
    }
    let mut nu = hi;
    for _ in 0..SECULAR_MAX_ITER {
        let s = norm_sq(nu);
        let psi = 1.0 / s.sqrt() - 1.0;
        if psi.abs() <= 1e-15 {
            break;
        }
        if psi < 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        let cube: f64 = g.iter().zip(lambda.iter()).map(|(gi, li)| gi * gi / (li + nu).powi(3)).sum();
        let dpsi = 0.25 * cube / s.powf(1.5);
        let mut next = nu - psi / dpsi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - nu).abs() <= 1e-16 * nu.abs().max(1.0) {
            nu = next;
            break;
        }
        nu = next;
    }
    nu
}

/// Optimality conditions at a candidate point.
#[derive(Debug, Clone)]
pub struct KktCertificate {
    pub on_boundary: bool,
    pub norm: f64,
    pub multiplier: f64,
    /// `||2 B a + b + 2 nu a||`.
    pub stationarity: f64,
    /// Smallest eigenvalue of `B + nu I`.
    pub shifted_min_eig: f64,
    pub holds: bool,
}

/// Check the global optimality conditions of the trust-region problem.
pub fn kkt_certificate(obj: &QuadraticObjective, a: &DVector<f64>, tol: f64) -> KktCertificate {
    let norm = a.norm();
    let grad = &obj.matrix * a * 2.0 + &obj.linear;
    let lmin = sym_eigen(&obj.matrix).min_value();
    if norm < 1.0 - tol {
        let stationarity = grad.norm();
        KktCertificate {
            on_boundary: false,
            norm,
            multiplier: 0.0,
            stationarity,
            shifted_min_eig: lmin,
            holds: stationarity <= tol && lmin >= -tol,
        }
    } else {
        let nu = -a.dot(&grad) / (2.0 * norm * norm);
        let stationarity = (&grad + a * (2.0 * nu)).norm();
        let shifted = lmin + nu;
        KktCertificate {
            on_boundary: true,
            norm,
            multiplier: nu,
            stationarity,
            shifted_min_eig: shifted,
            holds: (norm - 1.0).abs() <= tol && stationarity <= tol && nu >= -tol && shifted >= -tol,
        }
    }
}

/// A convex body with a density, as seen by hit-and-run.
pub trait ConvexTarget {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &DVector<f64>) -> f64;
    fn contains(&self, x: &DVector<f64>) -> bool;
    /// Parameter interval `[lo, hi]` with `x + t dir` feasible.
    fn chord(&self, x: &DVector<f64>, dir: &DVector<f64>) -> Option<(f64, f64)>;
}

/// Euclidean ball `||x - center|| <= radius`.
pub fn ball_chord(center: &DVector<f64>, radius: f64, x: &DVector<f64>, dir: &DVector<f64>) -> Option<(f64, f64)> {
    let e = x - center;
    let bd = dir.dot(&e);
    let disc = bd * bd - (e.norm_squared() - radius * radius);
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    Some((-bd - root, -bd + root))
}

/// Hit-and-run: uniform direction, then an approximate draw from the
/// density restricted to the chord (piecewise-linear on a 256-point grid).
pub fn hit_and_run(
    target: &dyn ConvexTarget,
    start: DVector<f64>,
    steps: usize,
    rng: &mut StreamRng,
) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(steps);
    let mut chain = Chain::new(target, start)?;
    for _ in 0..steps {
        out.push(chain.step(rng)?.clone());
    }
    Ok(out)
}

struct Chain<'a> {
    target: &'a dyn ConvexTarget,
    x: DVector<f64>,
    grid: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(target: &'a dyn ConvexTarget, start: DVector<f64>) -> Result<Self> {
        if start.len() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: start.len() });
        }
        if !target.contains(&start) {
            return Err(Error::DegenerateStart("start point is infeasible".into()));
        }
        Ok(Self { target, x: start, grid: vec![0.0; CHORD_GRID] })
    }

    fn step(&mut self, rng: &mut StreamRng) -> Result<&DVector<f64>> {
        let dir = DVector::from_vec(rng.unit_vector(self.target.dim()));
        let (lo, hi) = self
            .target
            .chord(&self.x, &dir)
            .ok_or_else(|| Error::DegenerateStart("no feasible chord through the current point".into()))?;
        if !(hi - lo > 1e-14) {
            return Err(Error::DegenerateStart(format!("chord has length {}", hi - lo)));
        }
        let h = (hi - lo) / (CHORD_GRID - 1) as f64;
        let mut top = f64::NEG_INFINITY;
        for k in 0..CHORD_GRID {
            let y = &self.x + &dir * (lo + k as f64 * h);
            self.grid[k] = self.target.log_density(&y);
            top = top.max(self.grid[k]);
        }
        for v in &mut self.grid {
            *v = (*v - top).exp();
        }
        let total: f64 = self.grid.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum();
        let mut r = rng.uniform() * total;
        let mut t = hi;
        for k in 0..CHORD_GRID - 1 {
            let (f0, f1) = (self.grid[k], self.grid[k + 1]);
            let mass = 0.5 * (f0 + f1) * h;
            if r < mass || k == CHORD_GRID - 2 {
                // invert f0 s + (f1 - f0) s^2 / (2h) = r on [0, h]
                let a2 = (f1 - f0) / (2.0 * h);
                let disc = (f0 * f0 + 4.0 * a2 * r).max(0.0);
                let denom = f0 + disc.sqrt();
                let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
                t = lo + k as f64 * h + s.clamp(0.0, h);
                break;
            }
            r -= mass;
        }
        self.x += dir * t;
        Ok(&self.x)
    }
}

/// The exponential-weights density for a quadratic loss in the shifted
/// eigen-coordinates `u_i = alpha_i + g_i / (2 lambda_i)` (or `u_i = alpha_i`
/// when `lambda_i` vanishes), `alpha = V^T a`. The body is the ball of radius
/// one around the shift.
#[derive(Debug, Clone)]
pub struct ShiftedBall {
    center: DVector<f64>,
    lambda: DVector<f64>,
    /// Linear coefficients on the zero-eigenvalue coordinates, zero elsewhere.
    linear: DVector<f64>,
}

impl ShiftedBall {
    fn new(lambda: &DVector<f64>, g: &DVector<f64>) -> Self {
        let d = lambda.len();
        let mut center = DVector::zeros(d);
        let mut quad = DVector::zeros(d);
        let mut linear = DVector::zeros(d);
        for i in 0..d {
            if lambda[i].abs() >= ZERO_EIG {
                center[i] = g[i] / (2.0 * lambda[i]);
                quad[i] = lambda[i];
            } else {
                linear[i] = g[i];
            }
        }
        Self { center, lambda: quad, linear }
    }
}

impl ConvexTarget for ShiftedBall {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn log_density(&self, u: &DVector<f64>) -> f64 {
        u.iter()
            .zip(self.lambda.iter().zip(self.linear.iter()))
            .map(|(ui, (li, gi))| li * ui * ui + gi * ui)
            .sum()
    }

    fn contains(&self, u: &DVector<f64>) -> bool {
        (u - &self.center).norm() <= 1.0 + 1e-12
    }

    fn chord(&self, u: &DVector<f64>, dir: &DVector<f64>) -> Option<(f64, f64)> {
        ball_chord(&self.center, 1.0, u, dir)
    }
}

/// Output of [`quad_ew_sample`].
#[derive(Debug, Clone)]
pub struct QuadSamples {
    pub samples: Vec<Point>,
    /// Lag-one autocorrelation of each coordinate along the chain.
    pub lag1_autocorr: Vec<f64>,
    pub burn_in: usize,
}

/// Approximate samples from `q(a) ~ exp(a^T B a + b^T a)` on the unit ball.
///
/// The chain runs in the shifted eigen-coordinates of [`ShiftedBall`],
/// starting at `a = 0`. Eigen-coordinates with no linear term are exact
/// symmetries of the target, so each emitted sample gets an independent
/// random sign on those coordinates.
pub fn quad_ew_sample(
    obj: &QuadraticObjective,
    count: usize,
    burn_in: Option<usize>,
    rng: &mut StreamRng,
) -> Result<QuadSamples> {
    if count == 0 {
        return Err(Error::Input("count must be at least 1".into()));
    }
    let d = obj.dim();
    let burn_in = burn_in.unwrap_or(BURN_IN_PER_DIM * d);
    let eig = sym_eigen(&obj.matrix);
    let g = eig.vectors.transpose() * &obj.linear;
    let target = ShiftedBall::new(&eig.values, &g);
    let symmetric: Vec<bool> = g.iter().map(|gi| gi.abs() <= 1e-15 * (1.0 + obj.linear.norm())).collect();

    let mut chain = Chain::new(&target, target.center.clone())?;
    for _ in 0..burn_in {
        chain.step(rng)?;
    }
    let mut raw = Vec::with_capacity(count);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let u = chain.step(rng)?;
        let alpha = u - &target.center;
        raw.push(&eig.vectors * &alpha);
        let flipped = DVector::from_fn(d, |i, _| if symmetric[i] { rng.rademacher() * alpha[i] } else { alpha[i] });
        samples.push(Point::from(&eig.vectors * flipped));
    }
    let lag1_autocorr = (0..d).map(|i| lag1(raw.iter().map(|a| a[i]))).collect();
    Ok(QuadSamples { samples, lag1_autocorr, burn_in })
}

fn lag1(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    if var == 0.0 {
        return 0.0;
    }
    xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / var
}

/// One sample per row, comma separated.
pub fn write_samples_csv<W: Write>(samples: &[Point], mut out: W) -> Result<()> {
    for s in samples {
        let row: Vec<String> = s.coords().iter().map(|x| format!("{x:.16e}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
