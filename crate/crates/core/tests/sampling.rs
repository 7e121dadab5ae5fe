use pstiming::analysis::ks_statistic;
use pstiming::distributions::CoincidencePdf;
use pstiming::montecarlo::{EmissionModel, Injection, SimulationConfig, Simulator, SourceConfig};
use pstiming::{PhysicalParams, Vec3};

fn point_source(n: u64, seed: u64) -> SimulationConfig {
    SimulationConfig {
        n_events: n,
        seed,
        source: SourceConfig::point(Vec3::ZERO),
        ..Default::default()
    }
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn dtau_is_laplace() {
    let gamma = PhysicalParams::default().gamma().unwrap();
    let recs = Simulator::new(point_source(1_000_000, 11)).unwrap().records().unwrap();
    let dtau: Vec<f64> = recs.iter().map(|r| r.dtau).collect();
    let law = CoincidencePdf::new(gamma, 0.0).unwrap();
    let d = ks_statistic(&dtau, |x| law.cdf(x));
    assert!(d < 0.002, "KS {d}");
}

#[test]
fn emission_delay_is_exponential() {
    let gamma = PhysicalParams::default().gamma().unwrap();
    let events = Simulator::new(point_source(200_000, 5)).unwrap().events().unwrap();
    let delays: Vec<f64> = events.iter().map(|e| e.delays[0]).collect();
    let d = ks_statistic(&delays, |x| 1.0 - (-gamma * x).exp());
    assert!(d < 0.005, "KS {d}");
    assert!(events.iter().all(|e| e.tau1 >= e.t0 && e.tau2 >= e.t0));
}

#[test]
fn jitter_adds_variance() {
    let gamma = PhysicalParams::default().gamma().unwrap();
    let sd = 10.0;
    let mut cfg = point_source(1_000_000, 3);
    cfg.detectors.jitter_sd_ps = sd;
    let dt: Vec<f64> = Simulator::new(cfg)
        .unwrap()
        .records()
        .unwrap()
        .iter()
        .map(|r| r.dt)
        .collect();
    let expected = 2.0 / (gamma * gamma) + 2.0 * sd * sd;
    assert!((variance(&dt) / expected - 1.0).abs() < 0.01);
}

#[test]
fn jitter_variance_with_common_draws() {
    // same seed with and without jitter: the difference is pure jitter
    let sd = 30.0;
    let plain = Simulator::new(point_source(200_000, 8)).unwrap().records().unwrap();
    let mut cfg = point_source(200_000, 8);
    cfg.detectors.jitter_sd_ps = sd;
    let jittered = Simulator::new(cfg).unwrap().records().unwrap();
    let diff: Vec<f64> = plain.iter().zip(&jittered).map(|(a, b)| b.dt - a.dt).collect();
    assert!((variance(&diff) / (2.0 * sd * sd) - 1.0).abs() < 0.05);
    assert!(plain.iter().zip(&jittered).all(|(a, b)| a.dtau == b.dtau));
}

#[test]
fn doppler_component_spread() {
    let sigma = PhysicalParams::default().sigma_doppler_kev;
    let events = Simulator::new(point_source(1_000_000, 21)).unwrap().events().unwrap();
    let target = sigma / 2f64.sqrt();
    for axis in 0..3 {
        let comp: Vec<f64> = events.iter().map(|e| <[f64; 3]>::from(e.pc)[axis]).collect();
        let sd = variance(&comp).sqrt();
        assert!((sd / target - 1.0).abs() < 0.01, "axis {axis}: {sd}");
    }
}

#[test]
fn pair_invariants_hold_per_event() {
    let events = Simulator::new(point_source(50_000, 2)).unwrap().events().unwrap();
    for e in &events {
        let p = &e.pair;
        assert!((p.center() - e.pc).norm() <= 1e-9 * e.pc.norm().max(1.0));
        assert_eq!(p.omega1, p.k1.norm());
        assert_eq!(p.omega2, p.k2.norm());
        assert!((e.khat.norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn output_independent_of_chunking_and_workers() {
    let base = point_source(40_000, 99);
    let reference = Simulator::new(base.clone()).unwrap().records().unwrap();
    for (chunk, workers) in [(1, 1), (7, 3), (1000, 2), (65_536, 0)] {
        let cfg = SimulationConfig {
            chunk_size: chunk,
            workers,
            ..base.clone()
        };
        let recs = Simulator::new(cfg).unwrap().records().unwrap();
        assert_eq!(recs.len(), reference.len());
        for (a, b) in recs.iter().zip(&reference) {
            assert_eq!(a.csv_row(), b.csv_row());
        }
    }
}

#[test]
fn different_seeds_differ() {
    let a = Simulator::new(point_source(100, 1)).unwrap().records().unwrap();
    let b = Simulator::new(point_source(100, 2)).unwrap().records().unwrap();
    assert!(a.iter().zip(&b).any(|(x, y)| x.dtau != y.dtau));
}

#[test]
fn narrow_acceptance_flags_events() {
    let mut cfg = point_source(20_000, 4);
    cfg.detectors.acceptance_half_angle_rad = Some(0.2);
    let recs = Simulator::new(cfg).unwrap().records().unwrap();
    let detected = recs.iter().filter(|r| r.detected).count() as f64 / recs.len() as f64;
    // both photons within 0.2 rad of the axis, either orientation
    let expected = 1.0 - 0.2f64.cos();
    assert!((detected / expected - 1.0).abs() < 0.1, "{detected} vs {expected}");
    for r in recs.iter().filter(|r| !r.detected) {
        assert!(r.t1.is_nan() && r.t2.is_nan() && r.dt.is_nan());
        assert!(r.csv_row().ends_with(",0"));
    }
}

#[test]
fn semiclassical_slab_spreads_dt_only_by_geometry() {
    let cfg = SimulationConfig {
        n_events: 20_000,
        model: EmissionModel::Semiclassical,
        ..Default::default()
    };
    let c = PhysicalParams::default().c_mm_per_ps;
    let recs = Simulator::new(cfg).unwrap().records().unwrap();
    // a 3 mm slab can shift dt by at most 2 * 1.5 mm / c plus a little for
    // transverse offsets
    assert!(recs.iter().all(|r| r.dtau == 0.0 && r.dt.abs() <= 3.0 / c + 1e-9));
}

#[test]
fn injection_times_fill_window() {
    let rate = 1e-3;
    let n = 100_000;
    let mut cfg = point_source(n, 6);
    cfg.source.injection = Injection::ConstantRate { rate_per_ps: rate };
    let events = Simulator::new(cfg.clone()).unwrap().events().unwrap();
    let window = n as f64 / rate;
    let t0: Vec<f64> = events.iter().map(|e| e.t0).collect();
    assert!(ks_statistic(&t0, |x| (x / window).clamp(0.0, 1.0)) < 0.01);

    cfg.source.injection = Injection::AtZero;
    let events = Simulator::new(cfg).unwrap().events().unwrap();
    assert!(events.iter().all(|e| e.t0 == 0.0));
}

#[test]
fn rejects_invalid_configs() {
    assert!(Simulator::new(point_source(0, 1)).is_err());
    let mut cfg = point_source(10, 1);
    cfg.detectors.d2_mm = cfg.detectors.d1_mm;
    assert!(Simulator::new(cfg).is_err());
    let mut cfg = point_source(10, 1);
    cfg.source.injection = Injection::ConstantRate { rate_per_ps: 0.0 };
    assert!(Simulator::new(cfg).is_err());
}
