//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use kernel_bandits::bandit::{bandit_round, expected_estimate, RoundOptions};
use kernel_bandits::design::{
    action_covariance, d_optimal_design, invert_covariance, mix_distributions, DEFAULT_DESIGN_TOL,
};
use kernel_bandits::fullinfo::{cg_round, ftrl_solve, CgState};
use kernel_bandits::harness::{
    run_experiment, ActionsSpec, AdversarySpec, Algorithm, ExperimentConfig, ExperimentReport, Params, Seeds,
};
use kernel_bandits::kernel::{feature_map, gram_matrix, loss_eval};
use kernel_bandits::linalg::sym_eigen;
use kernel_bandits::proxy::{
    approximation_sup_error, build_proxy, effective_dimension, fit_profile, DecayFamily,
};
use kernel_bandits::quadprog::{kkt_certificate, quad_ew_sample, trs_minimize};
use kernel_bandits::{
    ActionSet, AdversaryAction, BanditSetup, CgConfig, DiscreteDistribution, KernelSpec, Point, QuadraticObjective,
    StreamRng, WeightState,
};

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(&str, f64, Check); 12] = [
        ("full-information exponential weights regret", 30.0, full_info_regret),
        ("conditional gradient regret", 60.0, cg_regret),
        ("conditional gradient iterate gap", 120.0, cg_iterate_gap),
        ("bandit exponential weights regret", 300.0, bandit_regret),
        ("estimator unbiasedness", 5.0, estimator_unbiased),
        ("mixed covariance eigenvalue floor", 10.0, eigenvalue_floor),
        ("proxy kernel approximation", 60.0, proxy_approximation),
        ("gram and covariance spectra agree", 5.0, spectrum_equivalence),
        ("trust-region oracle", 60.0, trust_region),
        ("quadratic exponential-weights sampler", 120.0, quadratic_sampler),
        ("exponential moment inequality", 1.0, exponential_moment),
        ("D-optimal design certificate", 30.0, design_certificate),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(d) if secs <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {limit} s budget")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!("{} {:>2} {name}: {detail} [{secs:.2} s]", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn require(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn report_line(r: &ExperimentReport) -> String {
    format!("mean regret {:.2} (se {:.2}) vs bound {:.2}", r.mean_regret, r.std_error, r.bound)
}

fn experiment(algo: Algorithm, actions: &str, dim: usize, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        algo,
        kernel: "linear".into(),
        norm_bound: Some(1.0),
        actions: ActionsSpec::Named(actions.into()),
        dim,
        adversary: AdversarySpec::IidUnit,
        n,
        seeds: Seeds::Count(20),
        adversary_seed: 2024,
        params: Params::default(),
    }
}

fn full_info_regret() -> Result<String, String> {
    let out = run_experiment(&experiment(Algorithm::FullinfoEw, "random:50", 5, 10_000)).map_err(|e| e.to_string())?;
    let r = &out.report;
    require(r.mean_regret <= r.bound, report_line(r))
}

fn cg_regret() -> Result<String, String> {
    let out = run_experiment(&experiment(Algorithm::Cg, "ball:64", 2, 4096)).map_err(|e| e.to_string())?;
    let r = &out.report;
    require(r.mean_regret <= r.bound, report_line(r))
}

fn cg_iterate_gap() -> Result<String, String> {
    let n = 512;
    let kernel = KernelSpec::linear(1.0).unwrap();
    let mut rng = StreamRng::new(2024, "criterion3");
    let dirs: Vec<Point> = (0..64)
        .map(|i| {
            let th = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            Point::new(vec![th.cos(), th.sin()]).unwrap()
        })
        .collect();
    let feats: Vec<DVector<f64>> = dirs.iter().map(|d| d.to_dvector()).collect();
    let set = ActionSet::Finite(dirs);
    let cfg = CgConfig::from_theorem(n).unwrap();
    let mut state = CgState::new(&kernel, &set).unwrap();
    let mut warm: Option<Vec<f64>> = None;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = 0;
    for t in 1..=n {
        let linear = &state.loss_sum * cfg.eta;
        let sol = ftrl_solve(&feats, &linear, Some(&state.anchor), 1e-8, warm.as_deref()).map_err(|e| e.to_string())?;
        let h = state.objective(cfg.eta, &state.mean) - sol.objective;
        let slack = h - 4.0 * CgConfig::gamma(t);
        if slack > worst {
            worst = slack;
            worst_t = t;
        }
        warm = Some(sol.weights);
        let w = AdversaryAction::explicit(&kernel, 2, rng.unit_vector(2)).unwrap();
        cg_round(&mut state, &cfg, &kernel, &set, &w, &mut rng).map_err(|e| e.to_string())?;
    }
    require(worst <= 1e-6, format!("max h_t - 4 gamma_t = {worst:.3e} at t = {worst_t}"))
}

fn bandit_regret() -> Result<String, String> {
    let out = run_experiment(&experiment(Algorithm::BanditEw, "random:20", 3, 20_000)).map_err(|e| e.to_string())?;
    let r = &out.report;
    let p = &r.params;
    require(
        r.mean_regret <= r.bound && p.m == Some(3),
        format!("{}; eta {:.3e}, gamma {:.3e}", report_line(r), p.eta, p.gamma.unwrap_or(f64::NAN)),
    )
}

fn random_points(rng: &mut StreamRng, count: usize, dim: usize) -> Vec<Point> {
    (0..count)
        .map(|_| {
            let r = rng.uniform().powf(1.0 / dim as f64);
            Point::new(rng.unit_vector(dim).into_iter().map(|x| x * r).collect()).unwrap()
        })
        .collect()
}

fn random_distribution(rng: &mut StreamRng, k: usize) -> DiscreteDistribution {
    let sharp = 1.0 + 5.0 * rng.uniform();
    DiscreteDistribution::from_unnormalized((0..k).map(|_| rng.uniform().powf(sharp) + 1e-12).collect()).unwrap()
}

fn estimator_unbiased() -> Result<String, String> {
    let mut rng = StreamRng::new(5, "criterion5");
    let cases = [(KernelSpec::linear(1.0).unwrap(), 3, 10), (KernelSpec::quadratic(2f64.sqrt()).unwrap(), 2, 12)];
    let mut worst = 0.0f64;
    for (kernel, d, k) in cases {
        let actions = random_points(&mut rng, k, d);
        let setup = BanditSetup::explicit(&kernel, &actions, DEFAULT_DESIGN_TOL).map_err(|e| e.to_string())?;
        let dim = kernel.feature_dim(d).unwrap();
        for _ in 0..50 {
            let q = random_distribution(&mut rng, k);
            let gamma = 0.01 + 0.99 * rng.uniform();
            let p = mix_distributions(&q, setup.exploration(), gamma).unwrap();
            let norm = kernel.norm_bound * rng.uniform();
            let w = AdversaryAction::explicit(&kernel, d, rng.unit_vector(dim).into_iter().map(|x| x * norm).collect())
                .unwrap();
            let losses: Vec<f64> = actions.iter().map(|a| loss_eval(&kernel, a, &w).unwrap()).collect();
            let sigma = action_covariance(&p, setup.features()).unwrap();
            let sigma_inv = invert_covariance(&sigma, gamma / setup.m() as f64 * 0.5).map_err(|e| e.to_string())?;
            let mean = expected_estimate(&p, setup.features(), &sigma_inv, &losses).unwrap();
            let target = setup.adversary_feature(&w).unwrap();
            worst = worst.max((mean - target).amax());
        }
    }
    require(worst <= 1e-8, format!("max deviation {worst:.3e} over 100 pairs"))
}

fn eigenvalue_floor() -> Result<String, String> {
    let mut rng = StreamRng::new(6, "criterion6");
    let kernel = KernelSpec::linear(1.0).unwrap();
    let mut worst = f64::INFINITY;
    for trial in 0..200 {
        let d = 2 + trial % 5;
        let k = d + 2 + (rng.uniform() * 10.0) as usize;
        let actions: Vec<Point> = (0..k).map(|_| Point::new(rng.unit_vector(d)).unwrap()).collect();
        let setup = BanditSetup::explicit(&kernel, &actions, DEFAULT_DESIGN_TOL).map_err(|e| e.to_string())?;
        let q = random_distribution(&mut rng, k);
        for gamma in [0.05, 0.2, 0.8] {
            let p = mix_distributions(&q, setup.exploration(), gamma).unwrap();
            let cov = action_covariance(&p, setup.features()).unwrap();
            let min_eig = cov.matrix.clone().symmetric_eigen().eigenvalues.min();
            worst = worst.min(min_eig / (gamma / setup.m() as f64));
        }
    }
    require(worst >= 0.95, format!("min over trials of min_eig / (gamma/m) = {worst:.4}"))
}

fn proxy_approximation() -> Result<String, String> {
    let kernel = KernelSpec::gaussian(0.5, 1.0).unwrap();
    let eps = 0.05;
    let probes: Vec<Point> = (0..50).map(|i| Point::new(vec![i as f64 / 49.0]).unwrap()).collect();
    let sampler = |rng: &mut StreamRng| Point::new(vec![rng.uniform()]).unwrap();
    let mut certified = 0;
    let mut ms = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..100 {
        let mut rng = StreamRng::new(seed, "criterion7");
        let build = build_proxy(&kernel, &sampler, 12, 400, None, &mut rng).map_err(|e| e.to_string())?;
        let profile = fit_profile(&build, DecayFamily::Exponential, &probes).map_err(|e| e.to_string())?;
        let m = effective_dimension(&profile, eps).map_err(|e| e.to_string())?;
        let basis = build.basis.truncate(m.min(build.basis.m()));
        let err = approximation_sup_error(&kernel, &basis, &probes).map_err(|e| e.to_string())?;
        worst = worst.max(err);
        ms.push(m);
        if err <= eps {
            certified += 1;
        }
    }
    ms.sort_unstable();
    require(
        certified >= 95,
        format!("{certified}/100 seeds certified; m in [{}, {}]; worst sup error {worst:.4}", ms[0], ms[99]),
    )
}

fn spectrum_equivalence() -> Result<String, String> {
    let mut rng = StreamRng::new(8, "criterion8");
    let kernels = [
        KernelSpec::linear(1.0).unwrap(),
        KernelSpec::quadratic(2f64.sqrt()).unwrap(),
        KernelSpec::polynomial(2, 1.0, 2.0).unwrap(),
        KernelSpec::polynomial(3, 0.5, 1.5f64.powf(1.5)).unwrap(),
    ];
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let kernel = kernels[trial % kernels.len()];
        let d = 1 + (rng.uniform() * 3.0) as usize;
        let p = 1 + (rng.uniform() * 20.0) as usize;
        let points = random_points(&mut rng, p, d);
        let gram = gram_matrix(&kernel, &points, 1.0 / p as f64).map_err(|e| e.to_string())?;
        let gram_vals = sym_eigen(&gram).values;
        let dim = kernel.feature_dim(d).unwrap();
        let mut cov = DMatrix::zeros(dim, dim);
        for x in &points {
            let f = feature_map(&kernel, x).unwrap();
            cov += &f * f.transpose() / p as f64;
        }
        let mut cov_vals: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        cov_vals.sort_by(|a, b| b.total_cmp(a));
        let len = p.max(dim);
        for i in 0..len {
            let a = if i < p { gram_vals[i] } else { 0.0 };
            let b = if i < dim { cov_vals[i] } else { 0.0 };
            worst = worst.max((a - b).abs());
        }
    }
    require(worst <= 1e-8, format!("max eigenvalue difference {worst:.3e} over 100 instances"))
}

fn random_symmetric(rng: &mut StreamRng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.normal() * scale);
    (&a + a.transpose()) * 0.5
}

fn trust_region() -> Result<String, String> {
    let mut rng = StreamRng::new(9, "criterion9");
    let mut failures = 0;
    let mut hard = 0;
    for i in 0..1000 {
        let d = 1 + (rng.uniform() * 6.0) as usize;
        let scale = 10f64.powf(2.0 * rng.uniform() - 1.0);
        let (b, lin) = if i < 100 {
            // hard case: linear term orthogonal to a negative bottom eigenspace
            let q = random_symmetric(&mut rng, d, 1.0).symmetric_eigen().eigenvectors;
            let mut lam: Vec<f64> = (0..d).map(|_| rng.normal() * scale).collect();
            lam[0] = lam.iter().copied().fold(0.0, f64::min) - 0.5 * scale;
            let mut g = DVector::from_fn(d, |_, _| rng.normal() * 0.1 * scale);
            g[0] = 0.0;
            let b = &q * DMatrix::from_diagonal(&DVector::from_vec(lam)) * q.transpose();
            (b, &q * g)
        } else {
            (random_symmetric(&mut rng, d, scale), DVector::from_fn(d, |_, _| rng.normal() * scale))
        };
        let obj = QuadraticObjective::new((&b + b.transpose()) * 0.5, lin).map_err(|e| e.to_string())?;
        let sol = trs_minimize(&obj, 1e-12).map_err(|e| e.to_string())?;
        if sol.hard_case {
            hard += 1;
        }
        if !kkt_certificate(&obj, &sol.point.to_dvector(), 1e-8).holds {
            failures += 1;
        }
    }

    let mut worst = 0.0f64;
    let (radii, angles) = (1000, 1000);
    for _ in 0..20 {
        let obj = QuadraticObjective::new(random_symmetric(&mut rng, 2, 1.0), DVector::from_fn(2, |_, _| rng.normal()))
            .unwrap();
        let sol = trs_minimize(&obj, 1e-12).map_err(|e| e.to_string())?;
        let mut grid_min = f64::INFINITY;
        for i in 0..radii {
            let r = i as f64 / (radii - 1) as f64;
            for j in 0..angles {
                let th = 2.0 * std::f64::consts::PI * j as f64 / angles as f64;
                grid_min = grid_min.min(obj.value(&DVector::from_vec(vec![r * th.cos(), r * th.sin()])));
            }
        }
        if sol.value > grid_min + 1e-12 {
            worst = f64::INFINITY;
        }
        worst = worst.max(grid_min - sol.value);
    }
    require(
        failures == 0 && worst <= 1e-3,
        format!("{failures} KKT failures in 1000 ({hard} hard case); max grid gap {worst:.2e} on 20 instances"),
    )
}

/// First moments, then the upper triangle of the second-moment matrix.
fn moments(samples: &[DVector<f64>]) -> Vec<f64> {
    let n = samples.len() as f64;
    let m1 = |i: usize| samples.iter().map(|s| s[i]).sum::<f64>() / n;
    let m2 = |i: usize, j: usize| samples.iter().map(|s| s[i] * s[j]).sum::<f64>() / n;
    vec![m1(0), m1(1), m2(0, 0), m2(0, 1), m2(1, 1)]
}

fn rejection_oracle(obj: &QuadraticObjective, count: usize, rng: &mut StreamRng) -> Vec<DVector<f64>> {
    let neg = QuadraticObjective::new(-obj.matrix(), -obj.linear()).unwrap();
    let top = -trs_minimize(&neg, 1e-12).unwrap().value;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = DVector::from_vec(vec![2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0]);
        if a.norm_squared() > 1.0 {
            continue;
        }
        if rng.uniform() < (obj.value(&a) - top).exp() {
            out.push(a);
        }
    }
    out
}

fn quadratic_sampler() -> Result<String, String> {
    let regimes = [
        (DMatrix::from_diagonal_element(2, 2, -10.0), DVector::zeros(2)),
        (DMatrix::zeros(2, 2), DVector::from_vec(vec![5.0, 0.0])),
        (DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, -2.0])), DVector::from_vec(vec![1.0, -1.0])),
    ];
    let mut rng = StreamRng::new(10, "criterion10");
    let mut details = Vec::new();
    let mut ok = true;
    for (idx, (b, lin)) in regimes.iter().enumerate() {
        let obj = QuadraticObjective::new(b.clone(), lin.clone()).unwrap();
        let oracle = moments(&rejection_oracle(&obj, 200_000, &mut rng));
        let draws = quad_ew_sample(&obj, 100_000, None, &mut rng).map_err(|e| e.to_string())?;
        let samples: Vec<DVector<f64>> = draws.samples.iter().map(|p| p.to_dvector()).collect();
        let got = moments(&samples);
        let mut worst = 0.0f64;
        for (g, o) in got.iter().zip(&oracle) {
            let (err, tol) = if o.abs() < 0.1 { ((g - o).abs(), 0.02) } else { ((g - o).abs() / o.abs(), 0.15) };
            worst = worst.max(err / tol);
        }
        ok &= worst <= 1.0;
        details.push(format!("regime {}: error/tolerance {worst:.2}", idx + 1));
    }
    require(ok, details.join(", "))
}

fn exponential_moment() -> Result<String, String> {
    let e2 = std::f64::consts::E - 2.0;
    let mut worst = f64::NEG_INFINITY;
    let mut check = |lambda: f64, xs: &[f64], p: &[f64]| {
        let ex: f64 = xs.iter().zip(p).map(|(x, q)| q * x).sum();
        let ex2: f64 = xs.iter().zip(p).map(|(x, q)| q * x * x).sum();
        let mgf: f64 = xs.iter().zip(p).map(|(x, q)| q * (-lambda * x).exp()).sum();
        worst = worst.max(mgf.ln() - (e2 * lambda * lambda * ex2 - lambda * ex));
        worst = worst.max(ex - (-mgf.ln() / lambda + e2 * lambda * ex2));
    };

    // losses estimated by the bandit algorithm, under its own weights
    let kernel = KernelSpec::linear(1.0).unwrap();
    let mut rng = StreamRng::new(11, "criterion11");
    let actions: Vec<Point> = (0..10).map(|_| Point::new(rng.unit_vector(3)).unwrap()).collect();
    let setup = BanditSetup::explicit(&kernel, &actions, DEFAULT_DESIGN_TOL).map_err(|e| e.to_string())?;
    let cfg = kernel_bandits::bandit::general_schedule(0.0, setup.m(), 50, actions.len(), 1.0).map_err(|e| e.to_string())?;
    let mut state = WeightState::uniform(actions.len()).unwrap();
    for _ in 0..50 {
        let q = state.probabilities();
        let w = AdversaryAction::explicit(&kernel, 3, rng.unit_vector(3)).unwrap();
        let round = bandit_round(&mut state, &cfg, &setup, &kernel, &actions, &w, &mut rng, RoundOptions::default())
            .map_err(|e| e.to_string())?;
        let est: Vec<f64> = setup.features().iter().map(|f| round.estimate.dot(f)).collect();
        if est.iter().any(|x| cfg.eta * x < -1.0) {
            return Err("estimated loss below -1/eta".into());
        }
        check(cfg.eta, &est, &q);
    }
    // synthetic distributions with an atom at the boundary lambda X = -1
    for _ in 0..50 {
        let k = 2 + (rng.uniform() * 7.0) as usize;
        let lambda = 0.01 + 5.0 * rng.uniform();
        let mut xs: Vec<f64> = (0..k).map(|_| (4.0 * rng.uniform() - 1.0) / lambda).collect();
        xs[0] = -1.0 / lambda;
        let p = random_distribution(&mut rng, k);
        check(lambda, &xs, p.weights());
    }
    require(worst <= 1e-12, format!("max violation {worst:.3e} over 100 distributions"))
}

fn design_certificate() -> Result<String, String> {
    let mut rng = StreamRng::new(12, "criterion12");
    let mut worst = 0.0f64;
    for trial in 0..50 {
        let m = 1 + trial % 8;
        let k = m + (rng.uniform() * 3.0 * m as f64) as usize + 1;
        let feats: Vec<DVector<f64>> = (0..k).map(|_| DVector::from_fn(m, |_, _| rng.normal())).collect();
        let design = d_optimal_design(&feats, 100_000, 1e-6).map_err(|e| e.to_string())?;
        let mut sigma = DMatrix::zeros(m, m);
        for (f, w) in feats.iter().zip(design.distribution.weights()) {
            sigma += f * f.transpose() * *w;
        }
        let inv = sigma.try_inverse().ok_or("singular design covariance")?;
        let top = feats.iter().map(|f| (f.transpose() * &inv * f)[0]).fold(0.0, f64::max);
        worst = worst.max(top / m as f64 - 1.0);
    }
    require(worst <= 1e-4, format!("max (max_i phi_i^T Sigma^-1 phi_i) / m - 1 = {worst:.2e}"))
}
