use lamafield::ecm::*;
use lamafield::fem::{assemble, build_mesh_1d, build_mesh_2d, FemDiscretization, Mesh, Rect, SolverPath};
use lamafield::matern::MaternParams;
use lamafield::noise::noise_load_logpdf;
use lamafield::rng::stream_rng;
use lamafield::sampler::{simulate_gaussian, simulate_laplace};
use lamafield::stats::median;
use lamafield::Error;
use lamafield_oracles::{log_bessel_k_integral, posterior_moments};

fn theta(sigma: f64, mu: f64, gamma_bar: f64, tau: f64) -> Theta<f64> {
    Theta { kappa: 1.0, sigma, mu, gamma_bar, tau }
}

fn bessel_arg(d: f64, sigma: f64, mu: f64) -> f64 {
    d * (2.0 * sigma * sigma + mu * mu).sqrt() / (sigma * sigma)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// (x, τa, σ, μ) grid with x spanning three decades above every branch switch.
fn grid() -> Vec<(f64, f64, f64, f64)> {
    let mut pts = Vec::new();
    let shapes = [0.3, 0.8, 1.5, 3.0, 7.0];
    let scales = [(0.5, 0.0), (1.0, 0.7), (2.0, -1.0), (1.0, 2.0)];
    for (i, &shape) in shapes.iter().enumerate() {
        for (j, &(sigma, mu)) in scales.iter().enumerate() {
            for k in 0..10 {
                let t = (k as f64 + 0.37 * ((i + j) % 3) as f64) / 10.0;
                pts.push((0.05 * 1000f64.powf(t), shape, sigma, mu));
            }
        }
    }
    pts
}

#[test]
fn expectations_match_quadrature() {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for (x, shape, sigma, mu) in grid() {
        let s = (2.0 * sigma * sigma + mu * mu).sqrt();
        let d = x * sigma * sigma / s;
        // γ̄a = 0.25 with a = 1; the residual is d.
        let th = theta(sigma, mu, 0.25, shape);
        let (e, einv, elog) = posterior_moments(d, shape, sigma, mu);
        let eg = expected_gamma(d + 0.25, 1.0, &th).unwrap();
        let ei = expected_inv_gamma(d + 0.25, 1.0, &th, 1e300).unwrap();
        let el = expected_log_gamma_with(d + 0.25, 1.0, &th, 1e-5, OrderDifference::Central).unwrap();
        worst.0 = worst.0.max(rel(eg, e));
        worst.1 = worst.1.max(rel(ei, einv));
        worst.2 = worst.2.max((el - elog).abs() / elog.abs().max(1.0));
    }
    assert!(worst.0 <= 1e-8 && worst.1 <= 1e-8 && worst.2 <= 1e-5, "{worst:?}");
}

#[test]
fn forward_difference_log_moment_is_first_order() {
    let th = theta(1.0, 0.5, 0.0, 1.3);
    let d = 0.7;
    let (_, _, oracle) = posterior_moments(d, 1.3, 1.0, 0.5);
    let e1 = expected_log_gamma(d, 1.0, &th, 2e-3).unwrap() - oracle;
    let e2 = expected_log_gamma(d, 1.0, &th, 1e-3).unwrap() - oracle;
    let ratio = e1 / e2;
    assert!((ratio - 2.0).abs() < 0.1, "error ratio {ratio}");
    let c = expected_log_gamma_with(d, 1.0, &th, 1e-3, OrderDifference::Central).unwrap() - oracle;
    assert!(c.abs() < e2.abs() / 100.0);
    assert!(matches!(expected_log_gamma(d, 1.0, &th, 0.0), Err(Error::Validation(_))));
}

fn small_x_switch(shape: f64) -> f64 {
    let p = shape - 0.5;
    let m = p.abs().min((p + 1.0).abs()).min(1.0);
    (0.01 * (shape + 1.0).sqrt()).min(2.0 * 1e-5f64.powf(1.0 / (2.0 * m)))
}

#[test]
fn gamma_moment_branches_are_continuous() {
    for &(shape, sigma, mu) in &[(0.2, 1.0, 0.0), (0.8, 0.6, 0.4), (1.2, 1.0, 1.0), (3.0, 2.0, -0.5)] {
        let th = theta(sigma, mu, 0.0, shape);
        let k = bessel_arg(1.0, sigma, mu);
        for xs in [small_x_switch(shape), 1e4] {
            let below = expected_gamma(xs * (1.0 - 1e-9) / k, 1.0, &th).unwrap();
            let above = expected_gamma(xs * (1.0 + 1e-9) / k, 1.0, &th).unwrap();
            assert!(rel(below, above) <= 1e-4, "shape {shape} x {xs}: {below} vs {above}");
        }
    }
}

#[test]
fn large_argument_branch() {
    let (shape, sigma, mu) = (2.0, 1.0, 0.5);
    let th = theta(sigma, mu, 0.0, shape);
    let s = (2.0f64 + 0.25).sqrt();
    let d = 1e6 / s;
    let p = shape - 0.5;
    let exact = d / s * (log_bessel_k_integral(p + 1.0, 1e6) - log_bessel_k_integral(p, 1e6)).exp();
    let ours = expected_gamma(d, 1.0, &th).unwrap();
    assert!(rel(ours, exact) <= 1e-5, "{ours} vs {exact}");
}

#[test]
fn inverse_moment_forms_agree() {
    for &(shape, sigma, mu) in &[(0.4, 1.0, 0.0), (1.7, 0.5, 0.8), (4.0, 1.5, -1.0)] {
        let th = theta(sigma, mu, 0.0, shape);
        for x in [0.011, 0.1, 1.0, 10.0, 300.0] {
            let d = x / bessel_arg(1.0, sigma, mu);
            let rec = expected_inv_gamma(d, 1.0, &th, 1e300).unwrap();
            let dir = expected_inv_gamma_direct(d, 1.0, &th).unwrap();
            assert!(rel(rec, dir) <= 1e-10, "shape {shape} x {x}: {rec} vs {dir}");
        }
    }
}

#[test]
fn truncation_clamps_and_pole_returns_the_bound() {
    let th = theta(1.0, 0.0, 0.5, 0.3);
    assert_eq!(expected_inv_gamma(0.5 + 1e-9, 1.0, &th, 5.0).unwrap(), 5.0);
    assert_eq!(expected_inv_gamma(0.5, 1.0, &th, 5.0).unwrap(), 5.0);
    let far = expected_inv_gamma(3.0, 1.0, &th, 5.0).unwrap();
    assert!(far < 5.0 && far == expected_inv_gamma(3.0, 1.0, &th, 1e300).unwrap());
    let ex = e_step(&[0.5 + 1e-9, 3.0], &[1.0, 1.0], &th, Some(5.0), 1e-5, OrderDifference::Central).unwrap();
    assert_eq!(ex.clamped, 1);
}

#[test]
fn moments_depend_on_the_residual_magnitude_only() {
    let th = theta(0.8, 1.3, -0.4, 1.1);
    let a = 0.7;
    let centre = th.gamma_bar * a;
    for r in [0.01, 0.3, 2.0, 15.0] {
        let (p, m) = (centre + r, centre - r);
        // ±r differ only by the rounding of centre ± r.
        assert!(rel(expected_gamma(p, a, &th).unwrap(), expected_gamma(m, a, &th).unwrap()) < 1e-13);
        assert!(
            rel(expected_inv_gamma(p, a, &th, 1e300).unwrap(), expected_inv_gamma(m, a, &th, 1e300).unwrap()) < 1e-13
        );
        let (lp, lm) = (expected_log_gamma(p, a, &th, 1e-5).unwrap(), expected_log_gamma(m, a, &th, 1e-5).unwrap());
        assert!((lp - lm).abs() < 1e-9);
    }
}

#[test]
fn e_step_matches_pointwise_functions() {
    let th = theta(0.9, 0.4, 0.2, 1.4);
    let a = [0.5, 1.0, 1.0, 0.5];
    let lambda = [0.9, -0.3, 0.25, 2.2];
    let ex = e_step(&lambda, &a, &th, None, 1e-5, OrderDifference::Forward).unwrap();
    let lp = th.laplace().unwrap();
    let mut ll = 0.0;
    for i in 0..4 {
        assert!(rel(ex.e_gamma[i], expected_gamma(lambda[i], a[i], &th).unwrap()) < 1e-13);
        assert!(rel(ex.e_inv_gamma[i], expected_inv_gamma(lambda[i], a[i], &th, 1e300).unwrap()) < 1e-13);
        assert!(rel(ex.e_log_gamma[i], expected_log_gamma(lambda[i], a[i], &th, 1e-5).unwrap()) < 1e-12);
        ll += noise_load_logpdf(lambda[i], a[i], &lp).unwrap();
    }
    assert!(rel(ex.noise_loglik, ll) < 1e-13);
}

fn instance(n: usize, seed: u64, th: &Theta<f64>) -> (FemDiscretization<f64>, Vec<f64>) {
    let fd = assemble(&build_mesh_1d(1.0, n, 1.0).unwrap()).unwrap();
    let mp = MaternParams::from_alpha(2.0, th.kappa, 1.0, 1).unwrap();
    let x = simulate_laplace(&mp, &th.laplace().unwrap(), &fd, &mut stream_rng(seed, 0)).unwrap().values;
    (fd, x)
}

#[test]
fn closed_form_updates_are_stationary() {
    for (seed, th) in [
        (1, Theta { kappa: 1.0, sigma: 1.0, mu: 0.5, gamma_bar: -0.4, tau: 1.5 }),
        (2, Theta { kappa: 0.3, sigma: 0.6, mu: -1.0, gamma_bar: 0.8, tau: 0.9 }),
        (3, Theta { kappa: 2.0, sigma: 1.3, mu: 0.0, gamma_bar: 0.0, tau: 3.0 }),
    ] {
        let (fd, x) = instance(150, seed, &th);
        let op = lamafield::fem::FieldOperator::new(&fd, th.kappa, 2.0, SolverPath::Auto).unwrap();
        let lambda = op.loads_from_field(&x).unwrap();
        let a = fd.lumped();
        let lj = op.log_jacobian().unwrap();
        let ex = e_step(&lambda, a, &th, None, 1e-5, OrderDifference::Central).unwrap();
        let (mu, gb, sigma) = update_location_scale(&lambda, a, &ex).unwrap();
        let at = Theta { mu, gamma_bar: gb, sigma, ..th };
        let q = q_function(&at, &lambda, a, &ex, lj).unwrap();
        let h = 1e-5;
        let fd_grad = |f: &dyn Fn(f64) -> Theta<f64>| {
            (q_function(&f(h), &lambda, a, &ex, lj).unwrap() - q_function(&f(-h), &lambda, a, &ex, lj).unwrap())
                / (2.0 * h)
        };
        let g_mu = fd_grad(&|e| Theta { mu: mu + e, ..at });
        let g_gb = fd_grad(&|e| Theta { gamma_bar: gb + e, ..at });
        let g_s = fd_grad(&|e| Theta { sigma: sigma + e, ..at });
        for g in [g_mu, g_gb, g_s] {
            assert!(g.abs() <= 1e-6 * q.abs(), "seed {seed}: gradient {g}, Q {q}");
        }
    }
}

#[test]
fn degenerate_location_scale_system() {
    // E Γ · E Γ⁻¹ = 1 at a single node makes the 2×2 system singular.
    let ex = Expectations {
        e_gamma: vec![2.0],
        e_inv_gamma: vec![0.5],
        e_log_gamma: vec![0.0],
        noise_loglik: 0.0,
        clamped: 0,
        centre_gap: f64::INFINITY,
    };
    assert!(matches!(update_location_scale(&[1.0], &[1.0], &ex), Err(Error::Numeric(_))));
    let th = theta(1.0, 0.2, 0.1, 1.0);
    let step = cm_step_noise(&th, &[1.0], &[1.0], &ex, (1e-3, 1e3), TauUpdate::Auto).unwrap();
    assert!(step.degenerate);
    assert_eq!((step.mu, step.gamma_bar, step.sigma), (0.2, 0.1, 1.0));
}

#[test]
fn tau_update_paths_agree() {
    for (i, shape_mean) in [-1.2, 0.1, 1.7].into_iter().enumerate() {
        let a = vec![0.8; 40];
        let elog: Vec<f64> = (0..40).map(|k| shape_mean + 0.3 * ((k * 7 + i) % 5) as f64 - 0.6).collect();
        let (tb, _) = update_tau(&a, &elog, (1e-4, 1e4), TauUpdate::Brent).unwrap();
        let (ti, _) = update_tau(&a, &elog, (1e-4, 1e4), TauUpdate::InverseDigamma).unwrap();
        assert!(rel(tb, ti) <= 1e-8, "{tb} vs {ti}");
        let q = |t: f64| q_tau(t, &a, &elog).unwrap();
        assert!(q(tb) >= q(tb * 1.001) && q(tb) >= q(tb * 0.999));
    }
    let uneven = [0.5, 1.0, 1.0];
    assert!(matches!(
        update_tau(&uneven, &[0.0; 3], (1e-3, 1e3), TauUpdate::InverseDigamma),
        Err(Error::Validation(_))
    ));
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

#[test]
fn q_kappa_matches_dense_transcription() {
    // Nodes 0, 0.5, 1.5: lumped masses (0.25, 0.75, 0.5), stiffness from 1/h.
    let fd = assemble(&build_mesh_1d_nodes()).unwrap();
    let a = [0.25, 0.75, 0.5];
    let g = [[2.0, -2.0, 0.0], [-2.0, 3.0, -1.0], [0.0, -1.0, 1.0]];
    let x = [0.3, -1.1, 0.8];
    let e_inv = [1.7, 0.4, 2.5];
    let th = Theta { kappa: 1.0, sigma: 0.7, mu: 0.35, gamma_bar: -0.2, tau: 1.0 };
    for alpha in [2.0, 4.0] {
        for kappa in [0.4, 1.3, 3.0] {
            let mut k = g;
            for i in 0..3 {
                k[i][i] += kappa * kappa * a[i];
            }
            let mut cinv_k = k;
            for (i, row) in cinv_k.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v /= a[i]);
            }
            // C̃K_α with K_α = (C̃⁻¹K)^{α/2}; Λ = C̃K_α X.
            let ck = if alpha == 2.0 { k } else { mat_mul(&k, &cinv_k) };
            let lambda: Vec<f64> = (0..3).map(|i| (0..3).map(|j| ck[i][j] * x[j]).sum()).collect();
            let mut quad = 0.0;
            for i in 0..3 {
                quad += lambda[i] * lambda[i] * e_inv[i]
                    - 2.0 * th.gamma_bar * lambda[i] * e_inv[i] * a[i]
                    - 2.0 * th.mu * lambda[i];
            }
            let dense = det3(&ck).ln() - quad / (2.0 * th.sigma * th.sigma);
            for path in [SolverPath::Auto, SolverPath::Spectral] {
                let ours = q_kappa(kappa, &x, &fd, alpha, &th, &e_inv, path).unwrap();
                assert!(rel(ours, dense) <= 1e-12, "alpha {alpha} kappa {kappa}: {ours} vs {dense}");
            }
        }
    }
}

fn build_mesh_1d_nodes() -> Mesh<f64> {
    lamafield::fem::build_mesh_1d_nodes(&[0.0, 0.5, 1.5]).unwrap()
}

#[test]
fn zero_field_pushes_kappa_to_the_upper_bound() {
    let fd = assemble(&build_mesh_1d(0.0, 30, 1.0).unwrap()).unwrap();
    let th = theta(1.0, 0.0, 0.0, 1.0);
    let step = cm_step_kappa(&[0.0; 30], &fd, 2.0, &th, &[1.0; 30], (0.01, 100.0), SolverPath::Auto).unwrap();
    assert!(step.at_bound && rel(step.kappa, 100.0) < 1e-12, "{step:?}");
}

#[test]
fn observed_loglik_is_invariant_to_node_order() {
    let base =
        lamafield::fem::build_mesh_2d(lamafield::fem::Rect { x0: 0.0, x1: 3.0, y0: 0.0, y1: 2.0 }, 5, 4).unwrap();
    let n = base.node_count();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let coords: Vec<f64> = perm.iter().flat_map(|&old| base.node(old).to_vec()).collect();
    let elements: Vec<usize> =
        (0..base.element_count()).flat_map(|e| base.element(e).iter().map(|&v| inv[v])).collect();
    let permuted = Mesh::new(2, coords, elements).unwrap();
    let (fa, fb) = (assemble(&base).unwrap(), assemble(&permuted).unwrap());
    let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() * 2.0).collect();
    let xp: Vec<f64> = perm.iter().map(|&old| x[old]).collect();
    let th = Theta { kappa: 0.8, sigma: 1.1, mu: 0.4, gamma_bar: -0.1, tau: 1.6 };
    let (la, lb) = (observed_loglik(&th, &x, &fa, 2.0).unwrap(), observed_loglik(&th, &xp, &fb, 2.0).unwrap());
    assert!(rel(la, lb) < 1e-12, "{la} vs {lb}");
}

fn exact_step_drops(fit: &EcmFit<f64>) -> f64 {
    fit.trace
        .windows(2)
        .filter(|w| w.iter().all(|r| r.clamped == 0 && r.loglik.is_finite()))
        .map(|w| w[0].loglik - w[1].loglik)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn likelihood_increases_along_exact_steps() {
    for (seed, th) in [
        (5, Theta { kappa: 1.0, sigma: 1.0, mu: 1.0, gamma_bar: -1.0, tau: 1.0 }),
        (6, Theta { kappa: 0.1, sigma: 0.5, mu: 0.5, gamma_bar: 0.0, tau: 1.0 }),
        (7, Theta { kappa: 1.0, sigma: 1.0, mu: 0.0, gamma_bar: 0.0, tau: 0.5 }),
    ] {
        let (fd, x) = instance(120, seed, &th);
        let cfg = EcmConfig { max_iters: 1500, ..EcmConfig::default() };
        let fit = ecm_fit(&x, &fd, 2.0, &cfg, &mut stream_rng(seed, 1)).unwrap();
        let drop = exact_step_drops(&fit);
        assert!(drop <= 1e-8, "seed {seed}: drop {drop}");
        assert!(fit.trace.iter().filter(|r| r.clamped == 0).count() > 10);
    }
}

#[test]
fn fit_is_deterministic() {
    let th = Theta { kappa: 1.0, sigma: 1.0, mu: 0.0, gamma_bar: 0.0, tau: 2.0 };
    let (fd, x) = instance(100, 8, &th);
    let cfg = EcmConfig { max_iters: 300, ..EcmConfig::default() };
    let a = ecm_fit(&x, &fd, 2.0, &cfg, &mut stream_rng(8, 1)).unwrap();
    let b = ecm_fit(&x, &fd, 2.0, &cfg, &mut stream_rng(8, 1)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trace.len(), a.iterations);
    assert!(a.trace[..cfg.init_steps].iter().all(|r| r.warm_start && r.theta.kappa == a.initial.kappa));
}

#[test]
fn frozen_truth_sweep_stays_near_truth() {
    let th = Theta { kappa: 1.0, sigma: 1.0, mu: 0.5, gamma_bar: -0.6, tau: 2.0 };
    let (fd, x) = instance(1000, 9, &th);
    let op = lamafield::fem::FieldOperator::new(&fd, 1.0, 2.0, SolverPath::Auto).unwrap();
    let lambda = op.loads_from_field(&x).unwrap();
    let ex = e_step(&lambda, fd.lumped(), &th, None, 1e-5, OrderDifference::Central).unwrap();
    let step = cm_step_noise(&th, &lambda, fd.lumped(), &ex, (1e-3, 1e3), TauUpdate::Auto).unwrap();
    let ks = cm_step_kappa(&x, &fd, 2.0, &th, &ex.e_inv_gamma, (0.01, 100.0), SolverPath::Auto).unwrap();
    assert!((step.sigma - 1.0).abs() < 0.15 && (step.tau - 2.0).abs() < 0.6, "{step:?}");
    assert!((step.mu - 0.5).abs() < 0.3 && (step.gamma_bar + 0.6).abs() < 0.5, "{step:?}");
    assert!((ks.kappa - 1.0).abs() < 0.1, "{ks:?}");
}

#[test]
fn case_a_estimates() {
    let th = Theta { kappa: 1.0, sigma: 1.0, mu: 0.0, gamma_bar: 0.0, tau: 2.0 };
    let mut kappas = Vec::new();
    let mut taus = Vec::new();
    for seed in 30..35 {
        let (fd, x) = instance(1000, seed, &th);
        let fit = ecm_fit(&x, &fd, 2.0, &EcmConfig::default(), &mut stream_rng(seed, 1)).unwrap();
        assert!(fit.loglik.is_finite());
        kappas.push(fit.theta.kappa);
        taus.push(fit.theta.tau);
    }
    let (k, t) = (median(&kappas), median(&taus));
    assert!(k > 0.95 && k < 1.06, "median kappa {k}: {kappas:?}");
    assert!(t > 1.63 && t < 3.02, "median tau {t}: {taus:?}");
}

#[test]
fn singular_stop_on_pole_prone_data() {
    let th = Theta { kappa: 1.0, sigma: 1.0, mu: 0.0, gamma_bar: 0.0, tau: 0.5 };
    let (fd, x) = instance(300, 11, &th);
    let cfg = EcmConfig::<f64>::default();
    let fit = ecm_fit(&x, &fd, 2.0, &cfg, &mut stream_rng(11, 1)).unwrap();
    if fit.status == FitStatus::Singular {
        let last = fit.trace.last().unwrap();
        assert!(last.trunc_bound.is_none() && last.centre_gap < cfg.singular_gap);
        assert_eq!(last.theta, fit.theta);
    }
    assert!(fit.theta.validate().is_ok());
}

#[test]
fn configuration_and_input_errors() {
    let fd = assemble(&build_mesh_1d(0.0, 20, 1.0).unwrap()).unwrap();
    let x = vec![0.1; 20];
    let bad = EcmConfig { trunc_growth: 0.5, ..EcmConfig::default() };
    assert!(matches!(ecm_fit(&x, &fd, 2.0, &bad, &mut stream_rng(0, 0)), Err(Error::Validation(_))));
    let bad = EcmConfig { kappa_bounds: Some((2.0, 1.0)), ..EcmConfig::default() };
    assert!(matches!(ecm_fit(&x, &fd, 2.0, &bad, &mut stream_rng(0, 0)), Err(Error::Validation(_))));
    let cfg = EcmConfig::default();
    assert!(matches!(ecm_fit(&x[..10], &fd, 2.0, &cfg, &mut stream_rng(0, 0)), Err(Error::Validation(_))));
    let th = theta(-1.0, 0.0, 0.0, 1.0);
    assert!(matches!(ecm_run(&x, &fd, 2.0, &cfg, th), Err(Error::Validation(_))));
    assert_eq!(cfg.trunc_bound(0), Some(1000.0));
    assert!(cfg.trunc_bound(2000).is_none());
}

#[test]
fn empirical_range_of_a_known_correlation() {
    // AR(1) autocorrelation ρ^k crosses 0.1 at k = ln 0.1 / ln ρ.
    let rho: f64 = 0.8;
    let mut rng = stream_rng(12, 0);
    let mut x = vec![0.0; 200_000];
    for i in 1..x.len() {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        x[i] = rho * x[i - 1] + z;
    }
    let r = empirical_range(&x, 1.0).unwrap();
    let expected = 0.1f64.ln() / rho.ln();
    assert!((r - expected).abs() < 0.3, "{r} vs {expected}");
    assert!(matches!(empirical_range(&[1.0, 1.0, 1.0], 1.0), Err(Error::Numeric(_))));
}

#[test]
fn empirical_range_on_a_planar_mesh() {
    // Matérn ν = 1 correlation κr·K_1(κr) crosses 0.1 at the root below.
    let kappa = 1.0;
    let corr = |r: f64| r * log_bessel_k_integral(1.0, r).exp();
    let (mut lo, mut hi) = (1.0, 6.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if corr(mid) > 0.1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let expected = lo / kappa;
    let mesh = build_mesh_2d(Rect { x0: 0.0, x1: 40.0, y0: 0.0, y1: 40.0 }, 81, 81).unwrap();
    let fd = assemble(&mesh).unwrap();
    let mp = MaternParams::from_alpha(2.0, kappa, 1.0, 2).unwrap();
    let seeds = 8;
    let mean = (0..seeds)
        .map(|s| {
            let x = simulate_gaussian(&mp, &fd, &mut stream_rng(40, s)).unwrap().values;
            empirical_range_mesh(&x, &mesh).unwrap()
        })
        .sum::<f64>()
        / seeds as f64;
    assert!((mean - expected).abs() < 0.15 * expected, "{mean} vs {expected}");
    let line = build_mesh_1d(0.0, 5, 0.5).unwrap();
    let y = [0.3, -1.0, 2.0, 0.1, -0.4];
    assert_eq!(empirical_range_mesh(&y, &line).unwrap(), empirical_range(&y, 0.5).unwrap());
    assert!(matches!(empirical_range_mesh(&[1.0; 6561], &mesh), Err(Error::Numeric(_))));
    assert!(matches!(empirical_range_mesh(&y, &mesh), Err(Error::Validation(_))));
}

#[test]
fn f32_expectations() {
    let th = Theta { kappa: 1.0f32, sigma: 1.0, mu: 0.5, gamma_bar: 0.0, tau: 1.5 };
    let e32 = expected_gamma(0.8f32, 1.0, &th).unwrap();
    let e64 = expected_gamma(0.8f64, 1.0, &theta(1.0, 0.5, 0.0, 1.5)).unwrap();
    assert!((e32 as f64 - e64).abs() < 1e-4 * e64);
}
