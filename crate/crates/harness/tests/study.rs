use lamafield::ecm::EcmConfig;
use lamafield::fem::{assemble, build_mesh_2d, Rect};
use lamafield_harness::study::Summary;
use lamafield_harness::{run_case, run_replicate, study_case, table1_cases, with_jobs, StudyCase, TABLE1};

fn quick(label: &str, replicates: usize) -> (StudyCase, EcmConfig<f64>) {
    let mut case = study_case(label, replicates).unwrap();
    case.n_obs = 150;
    let mut cfg = EcmConfig::default();
    cfg.max_iters = 40;
    cfg.init_steps = 10;
    (case, cfg)
}

#[test]
fn cases_are_the_twelve_rows() {
    let cases = table1_cases(7);
    assert_eq!(cases.len(), 12);
    let labels: String = cases.iter().map(|c| c.label).collect();
    assert_eq!(labels, "ABCDEFGHIJKL");
    for c in &cases {
        assert_eq!((c.n_obs, c.spacing, c.alpha, c.d, c.replicates), (1000, 1.0, 2.0, 1, 7));
    }
    let f = study_case("f", 1).unwrap();
    assert_eq!((f.theta_true.kappa, f.theta_true.tau, f.theta_true.mu, f.theta_true.gamma), (1.0, 0.5, 1.0, -1.0));
    let k = study_case("K", 1).unwrap();
    assert_eq!(k.theta_true.kappa, 0.1);
    assert!((k.theta_true.tau - 1.0 / 3.0).abs() < 1e-16);
    assert!(study_case("M", 1).is_err());
    assert!(study_case("AB", 1).is_err());
    for i in 0..6 {
        assert_eq!(TABLE1[i].1.kappa, 1.0);
        assert_eq!(TABLE1[i + 6].1.kappa, 0.1);
    }
    let fd = cases[0].discretization().unwrap();
    assert_eq!(fd.node_count(), 1000);
    assert_eq!(fd.mesh().node(0)[0], 1.0);
    assert_eq!(fd.mesh().node(999)[0], 1000.0);
}

#[test]
fn single_replicate_percentiles_equal_the_estimate() {
    let (case, cfg) = quick("B", 1);
    let r = run_case(&case, &cfg, 4).unwrap();
    let e = r.estimates()[0];
    let s = r.summary;
    for (p, v) in [(s.kappa, e.kappa), (s.tau, e.tau), (s.sigma, e.sigma), (s.mu, e.mu), (s.gamma, e.gamma)] {
        assert_eq!((p.p10, p.p50, p.p90), (v, v, v));
    }
    assert_eq!(e.gamma, e.gamma_bar / e.tau);
}

#[test]
fn replicates_depend_only_on_their_stream() {
    let (case3, cfg) = quick("D", 3);
    let (case5, _) = quick("D", 5);
    let r3 = run_case(&case3, &cfg, 21).unwrap();
    let r5 = run_case(&case5, &cfg, 21).unwrap();
    assert_eq!(r3.replicates[..], r5.replicates[..3]);
    let fd = case5.discretization().unwrap();
    assert_eq!(run_replicate(&case5, &fd, &cfg, 21, 4), r5.replicates[4]);
    let other = run_case(&case3, &cfg, 22).unwrap();
    assert_ne!(other.replicates[0], r3.replicates[0]);
}

#[test]
fn results_do_not_depend_on_the_pool_size() {
    let (case, cfg) = quick("H", 4);
    let a = with_jobs(1, || run_case(&case, &cfg, 9)).unwrap().unwrap();
    let b = with_jobs(3, || run_case(&case, &cfg, 9)).unwrap().unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn percentiles_are_ordered() {
    let (case, cfg) = quick("J", 6);
    let r = run_case(&case, &cfg, 2).unwrap();
    assert_eq!(r.failures, 0);
    let s = r.summary;
    for p in [s.kappa, s.tau, s.sigma, s.mu, s.gamma] {
        assert!(p.p10 <= p.p50 && p.p50 <= p.p90, "{p:?}");
    }
    assert_eq!(Summary::of(&r.estimates()), s);
}

#[test]
fn failures_are_recorded_not_fatal() {
    let (case, cfg) = quick("A", 1);
    let wrong = assemble(&build_mesh_2d(Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }, 4, 4).unwrap()).unwrap();
    let o = run_replicate(&case, &wrong, &cfg, 0, 0);
    assert!(o.estimate.is_none() && o.status.is_none());
    assert!(o.error.unwrap().contains("dimension"));
}

#[test]
fn invalid_inputs_are_rejected() {
    let (mut case, mut cfg) = quick("A", 0);
    assert!(run_case(&case, &cfg, 0).is_err());
    case.replicates = 1;
    cfg.rel_tol = -1.0;
    assert!(run_case(&case, &cfg, 0).is_err());
    cfg.rel_tol = 1e-7;
    case.theta_true.sigma = 0.0;
    assert!(run_case(&case, &cfg, 0).is_err());
    case.theta_true.sigma = 1.0;
    case.d = 2;
    assert!(run_case(&case, &cfg, 0).is_err());
}
