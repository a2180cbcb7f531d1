use lamafield::matern::*;
use lamafield::noise::LaplaceParams;
use lamafield_oracles::integrate;

fn mp(nu: f64, kappa: f64, phi2: f64, d: usize) -> MaternParams<f64> {
    MaternParams::new(nu, kappa, phi2, d).unwrap()
}

#[test]
fn covariance_at_origin() {
    let p = mp(0.5, 1.0, 1.0, 1);
    assert!((matern_cov(&[0.0], &p) - 0.5).abs() < 1e-14);
    // the analytic limit agrees with the h -> 0 limit of the Bessel form
    let q = mp(1.5, 2.0, 3.0, 2);
    let c0 = matern_cov(&[0.0, 0.0], &q);
    let near = matern_cov(&[1e-9, 0.0], &q);
    assert!((near / c0 - 1.0).abs() < 1e-8);
}

#[test]
fn covariance_isotropy_and_exponential_case() {
    let p = mp(1.3, 0.7, 2.0, 2);
    for &(x, y) in &[(0.3, -1.2), (2.0, 0.5), (-0.01, 0.02)] {
        assert_eq!(matern_cov(&[x, y], &p), matern_cov(&[-x, -y], &p));
    }
    let e = mp(0.5, 10.0, 1.0, 1);
    let ratio = matern_cov(&[0.2], &e) / matern_cov(&[0.0], &e);
    assert!((ratio - (-2f64).exp()).abs() < 1e-13);
}

#[test]
fn spectrum_basics() {
    let p = mp(0.8, 2.0, 1.5, 2);
    let s0 = matern_spectrum(&[0.0, 0.0], &p);
    let want = 1.5 / (2.0 * std::f64::consts::PI).powi(2) / 2f64.powf(2.0 * p.alpha());
    assert!((s0 - want).abs() < 1e-15 * want);
    let mut last = f64::INFINITY;
    for i in 0..50 {
        let s = matern_spectrum(&[0.1 * i as f64, 0.05 * i as f64], &p);
        assert!(s <= last);
        last = s;
    }
}

#[test]
fn spectrum_is_fourier_transform_of_covariance() {
    // κ = 5, ν = 1/2 on a fine grid; the DFT of the samples is the spectrum
    // aliased at the grid spacing, negligible below k = 4κ
    let p = mp(0.5, 5.0, 1.0, 1);
    let dx = 1e-3;
    let n = 10_000usize;
    let c: Vec<f64> = (0..n)
        .map(|j| {
            let h = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 } * dx;
            matern_cov(&[h], &p)
        })
        .collect();
    let len = n as f64 * dx;
    let two_pi = 2.0 * std::f64::consts::PI;
    for m in 1..=(20.0 * len / two_pi) as usize {
        let k = two_pi * m as f64 / len;
        let ft: f64 = c.iter().enumerate().map(|(j, &v)| v * (k * j as f64 * dx).cos()).sum::<f64>() * dx / two_pi;
        let s = matern_spectrum(&[k], &p);
        assert!((ft / s - 1.0).abs() < 1e-4, "k={k}: {ft} vs {s}");
    }
}

#[test]
fn green_kernel_is_rescaled_matern() {
    for &(alpha, d) in &[(2.0, 1usize), (3.5, 1), (3.0, 2)] {
        let nu_k = (alpha - d as f64) / 2.0;
        let c = mp(nu_k, 1.7, 1.0, d);
        let ratios: Vec<f64> = (1..=20)
            .map(|i| {
                let r = 0.15 * i as f64;
                green_kernel(r, alpha, 1.7, d).unwrap() / matern_cov_radial(r, &c)
            })
            .collect();
        for r in &ratios {
            assert!((r / ratios[0] - 1.0).abs() < 1e-12);
        }
    }
    let g = green_kernel(0.5, 2.0, 1.0, 1).unwrap();
    assert!((g - (-0.5f64).exp() / 2.0).abs() < 1e-15);
}

#[test]
fn green_kernel_squares_to_covariance() {
    for &alpha in &[2.0, 3.5] {
        let kappa = 1.0;
        let field = MaternParams::from_alpha(alpha, kappa, 1.0, 1).unwrap();
        let int: f64 = 2.0 * integrate(|r| green_kernel(r, alpha, kappa, 1).unwrap().powi(2), 0.0, 60.0, 1e-16, 1e-13);
        let c0 = matern_cov(&[0.0], &field);
        assert!((int / c0 - 1.0).abs() < 1e-10, "alpha={alpha}: {int} vs {c0}");
    }
}

#[test]
fn green_kernel_tail_and_pole() {
    let mut last = f64::INFINITY;
    for i in 1..60 {
        let g = green_kernel(i as f64, 2.5, 1.0, 1).unwrap();
        assert!(g < last && g > 0.0);
        last = g;
    }
    assert!(green_kernel(1e6, 2.5, 1.0, 1).unwrap() == 0.0);
    assert!(matches!(green_kernel(0.0, 1.0, 1.0, 1), Err(lamafield::Error::Pole(_))));
    assert!(matches!(green_kernel(0.0, 2.0, 1.0, 2), Err(lamafield::Error::Pole(_))));
    assert!(green_kernel(0.0, 2.5, 1.0, 2).is_ok());
    assert!(green_kernel(1.0, 0.5, 1.0, 1).is_err());
}

fn fig2() -> (LaplaceParams<f64>, MaternParams<f64>) {
    let lp: LaplaceParams<f64> = LaplaceParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
    let mp = MaternParams::from_alpha(2.0, 15.0, lp.implied_phi2(), 1).unwrap();
    (lp, mp)
}

#[test]
fn characteristic_function_identities() {
    let q = CfQuadrature::default();
    let (lp, m) = fig2();
    let z = marginal_cf(0.0, &lp, &m, &q).unwrap();
    assert_eq!((z.re, z.im), (1.0, 0.0));
    let cf = MarginalCf::new(&lp, &m, &q).unwrap();
    let (a, b) = (cf.eval(1.3), cf.eval(-1.3));
    assert!((a.conj() - b).norm() < 1e-15);
    let sym: LaplaceParams<f64> = LaplaceParams::new(0.0, 1.0, 0.0, 2.0).unwrap();
    let cs = MarginalCf::new(&sym, &m, &q).unwrap();
    for &u in &[0.5, 3.0, 40.0, 400.0] {
        assert_eq!(cs.eval(u).im, 0.0);
    }
}

#[test]
fn characteristic_function_singular_kernel() {
    // α = 1 in d = 1: the kernel has a log singularity at the origin
    let lp: LaplaceParams<f64> = LaplaceParams::new(0.5, 1.0, 0.0, 1.0).unwrap();
    let m = MaternParams::from_alpha(1.0, 2.0, lp.implied_phi2(), 1).unwrap();
    let cf = MarginalCf::new(&lp, &m, &CfQuadrature::default()).unwrap();
    let v = cf.variance();
    let want = matern_cov(&[0.0], &m);
    assert!((v / want - 1.0).abs() < 1e-6);
}

#[test]
fn two_dimensional_radial_reduction() {
    // log φ(u) by the radial rule against a direct Cartesian double integral
    let lp: LaplaceParams<f64> = LaplaceParams::new(0.7, 1.0, 0.3, 1.5).unwrap();
    let (alpha, kappa) = (3.0, 1.2);
    let m = MaternParams::from_alpha(alpha, kappa, lp.implied_phi2(), 2).unwrap();
    let cf = MarginalCf::new(&lp, &m, &CfQuadrature::default()).unwrap();
    let u = 2.0;
    let integrand = |x: f64, y: f64, imag: bool| -> f64 {
        let r = x.hypot(y);
        let g = green_kernel(r, alpha, kappa, 2).unwrap();
        let ug = u * g;
        let a = 1.0 + 0.5 * ug * ug;
        let b = lp.mu() * ug;
        if imag {
            lp.gamma() * ug + b.atan2(a)
        } else {
            -0.5 * (a * a + b * b).ln()
        }
    };
    let lim = 30.0 / kappa;
    let part = |imag: bool| -> f64 {
        4.0 * integrate(|x| integrate(|y| integrand(x, y, imag), 0.0, lim, 1e-14, 1e-11), 0.0, lim, 1e-13, 1e-10)
    };
    let (re, im) = (lp.tau() * part(false), lp.tau() * part(true));
    let z = cf.eval(u);
    assert!((z.norm().ln() - re).abs() < 1e-7 * re.abs(), "{} vs {re}", z.norm().ln());
    assert!((z.arg() - im).abs() < 1e-7 * im.abs(), "{} vs {im}", z.arg());
}

fn trapezoid(y: &[f64], dx: f64) -> f64 {
    dx * (y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]))
}

#[test]
fn density_symmetric_case() {
    let lp: LaplaceParams<f64> = LaplaceParams::new(0.0, 1.0, 0.0, 2.0).unwrap();
    let m = MaternParams::from_alpha(2.0, 1.0, lp.implied_phi2(), 1).unwrap();
    let dx = 0.01;
    let grid: Vec<f64> = (0..=800).map(|i| -4.0 + dx * i as f64).collect();
    let f = marginal_density(&grid, &lp, &m, &CfQuadrature::default(), &InversionConfig::default()).unwrap();
    assert!(f.iter().all(|&v| v >= 0.0));
    let peak = f.iter().cloned().fold(0.0, f64::max);
    for i in 0..f.len() {
        assert!((f[i] - f[f.len() - 1 - i]).abs() < 1e-9 * peak);
    }
    assert!((trapezoid(&f, dx) - 1.0).abs() < 1e-3);
}

#[test]
fn density_fig2_normalization_and_moments() {
    let (lp, m) = fig2();
    let q = CfQuadrature::default();
    let cf = MarginalCf::new(&lp, &m, &q).unwrap();
    let (mean, sd) = (cf.mean(), cf.variance().sqrt());
    let dx = sd / 40.0;
    let grid: Vec<f64> = (0..=4000).map(|i| mean - 30.0 * sd + dx * i as f64).collect();
    let f = marginal_density(&grid, &lp, &m, &q, &InversionConfig::default()).unwrap();
    let mass = trapezoid(&f, dx);
    assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
    let m1 = trapezoid(&grid.iter().zip(&f).map(|(x, p)| x * p).collect::<Vec<_>>(), dx) / mass;
    let var = trapezoid(&grid.iter().zip(&f).map(|(x, p)| (x - m1).powi(2) * p).collect::<Vec<_>>(), dx) / mass;
    let c0 = matern_cov(&[0.0], &m);
    assert!((var / c0 - 1.0).abs() < 1e-2, "var {var} vs {c0}");
    // moments from finite differences of the CF at zero
    let h = 1e-2 / sd;
    let (p, n) = (cf.eval(h), cf.eval(-h));
    let fd_mean = (p - n).im / (2.0 * h);
    let fd_second = -(p + n - num_complex::Complex::new(2.0, 0.0)).re / (h * h);
    let fd_var = fd_second - fd_mean * fd_mean;
    assert!((m1 / fd_mean - 1.0).abs() < 1e-3, "{m1} vs {fd_mean}");
    assert!((var / fd_var - 1.0).abs() < 1e-3, "{var} vs {fd_var}");
}

#[test]
fn density_rejects_bad_grids() {
    let (lp, m) = fig2();
    let q = CfQuadrature::default();
    let inv = InversionConfig::default();
    assert!(marginal_density(&[0.0], &lp, &m, &q, &inv).is_err());
    assert!(marginal_density(&[0.0, 0.1, 0.3], &lp, &m, &q, &inv).is_err());
    let tiny = InversionConfig { max_points: 1 << 10, ..inv };
    assert!(matches!(marginal_density(&[0.0, 0.01, 0.02], &lp, &m, &q, &tiny), Err(lamafield::Error::Numeric(_))));
}
