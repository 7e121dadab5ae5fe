//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

use std::f64::consts::{LN_2, PI};
use std::time::Instant;

use pstiming::analysis::{fit, histogram, ks_statistic, log_linear_tail_fit, model_compare};
use pstiming::cli::verify_suite;
use pstiming::distributions::{CoincidencePdf, ModelKind};
use pstiming::montecarlo::{EmissionModel, SimulationConfig, Simulator, SourceConfig};
use pstiming::oracles::{self, I2Params, IntegralId};
use pstiming::units::{decay_rate, PhysicalParams};
use pstiming::Vec3;

const LIFETIME_RANGE_PS: (f64, f64) = (123.5, 125.5);
const SHAPE_KS_MAX: f64 = 0.0025;
const SHAPE_SCALE_REL: f64 = 0.02;
const SHAPE_FWHM_REL: f64 = 0.02;
const PAL_SLOPE_REL: f64 = 0.02;
const DOPPLER_SD_REL: f64 = 0.01;
const ACOLLINEARITY_REL: f64 = 0.10;
const I1_RATIO_ABS: f64 = 1e-9;
const I2_REL: f64 = 1e-2;
const I3_REL: f64 = 1e-9;
const NORM_REL: f64 = 1e-6;
const GEOMETRY_SHIFT_ABS_PS: f64 = 0.1;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn point_quantum(n: u64, seed: u64) -> SimulationConfig {
    SimulationConfig {
        n_events: n,
        seed,
        model: EmissionModel::Quantum,
        source: SourceConfig::point(Vec3::ZERO),
        ..Default::default()
    }
}

fn gamma() -> f64 {
    decay_rate(&PhysicalParams::default()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn lifetime() -> Outcome {
    let tau = 1.0 / gamma();
    let (lo, hi) = LIFETIME_RANGE_PS;
    outcome(
        (lo..=hi).contains(&tau),
        format!("1/Γ = {tau:.4} ps, required [{lo}, {hi}]"),
    )
}

fn spectrum_shape() -> Outcome {
    let g = gamma();
    let recs = Simulator::new(point_quantum(1_000_000, 2024))
        .unwrap()
        .records()
        .unwrap();
    let dtau: Vec<f64> = recs.iter().map(|r| r.dtau).collect();
    let law = CoincidencePdf::new(g, 0.0).unwrap();
    let ks = ks_statistic(&dtau, |x| law.cdf(x));
    let f = fit(ModelKind::DoubleExponential, &dtau).unwrap();
    let scale_err = rel(f.scale, 1.0 / g);
    let fwhm_err = rel(f.fwhm, 2.0 * LN_2 / g);
    outcome(
        ks < SHAPE_KS_MAX && scale_err < SHAPE_SCALE_REL && fwhm_err < SHAPE_FWHM_REL,
        format!(
            "KS {ks:.5} (< 0.0025); scale {:.2} ps vs {:.2} ({:.3}%, < 2%); FWHM {:.2} ps vs {:.2} ({:.3}%, < 2%)",
            f.scale,
            1.0 / g,
            100.0 * scale_err,
            f.fwhm,
            2.0 * LN_2 / g,
            100.0 * fwhm_err
        ),
    )
}

fn model_discrimination() -> Outcome {
    let recs = Simulator::new(point_quantum(100_000, 77)).unwrap().records().unwrap();
    let dtau: Vec<f64> = recs.iter().map(|r| r.dtau).collect();
    let ranked = model_compare(&dtau).unwrap();
    let order: Vec<ModelKind> = ranked.iter().map(|f| f.model).collect();
    let expected = [ModelKind::DoubleExponential, ModelKind::Lorentzian, ModelKind::Gaussian];
    let listing = ranked
        .iter()
        .map(|f| format!("{} {:.1}", f.model, f.log_likelihood))
        .collect::<Vec<_>>()
        .join(" > ");
    outcome(
        order == expected,
        format!("log-likelihood ranking {listing}; required double_exponential > lorentzian > gaussian"),
    )
}

fn semiclassical() -> Outcome {
    let cfg = SimulationConfig {
        model: EmissionModel::Semiclassical,
        ..point_quantum(1_000_000, 5)
    };
    let recs = Simulator::new(cfg).unwrap().records().unwrap();
    let zero = recs.iter().filter(|r| r.dtau == 0.0).count();
    outcome(
        zero == recs.len(),
        format!("{zero} of {} Δτ values exactly 0", recs.len()),
    )
}

fn pal_slope() -> Outcome {
    let g = gamma();
    let events = Simulator::new(point_quantum(1_000_000, 31)).unwrap().events().unwrap();
    let since_injection: Vec<f64> = events.iter().map(|e| e.tau1 - e.t0).collect();
    let s = histogram(&since_injection, 10.0, (0.0, 2000.0)).unwrap();
    let t = log_linear_tail_fit(&s, 100.0, 1000.0).unwrap();
    let err = rel(t.slope, -g);
    outcome(
        err < PAL_SLOPE_REL,
        format!(
            "slope {:.6e} /ps vs -Γ = {:.6e} ({:.3}%, < 2%)",
            t.slope,
            -g,
            100.0 * err
        ),
    )
}

fn doppler() -> Outcome {
    let p = PhysicalParams::default();
    let sigma = p.sigma_doppler_kev;
    let sim = Simulator::new(point_quantum(1_000_000, 13)).unwrap();
    let events = sim.events().unwrap();
    let target = sigma / 2f64.sqrt();
    let n = events.len() as f64;
    let sds: Vec<f64> = (0..3)
        .map(|axis| {
            let comp: Vec<f64> = events.iter().map(|e| <[f64; 3]>::from(e.pc)[axis]).collect();
            let mean = comp.iter().sum::<f64>() / n;
            (comp.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        })
        .collect();
    let sd_ok = sds.iter().all(|&s| rel(s, target) < DOPPLER_SD_REL);
    let acol: Vec<f64> = events.iter().map(|e| e.pair.acollinearity() * 1e3).collect();
    let mean_acol = acol.iter().sum::<f64>() / n;
    let rms_acol = (acol.iter().map(|a| a * a).sum::<f64>() / n).sqrt();
    let scale = sigma / p.m_e_kev * 1e3;
    let acol_err = rel(mean_acol, scale);
    outcome(
        sd_ok && acol_err < ACOLLINEARITY_REL,
        format!(
            "pc component sd [{:.4}, {:.4}, {:.4}] keV vs σ/√2 = {target:.4} (< 1%); mean acollinearity {mean_acol:.3} mrad vs σ/m = {scale:.3} ({:.1}%, < 10%); rms {rms_acol:.3} mrad",
            sds[0],
            sds[1],
            sds[2],
            100.0 * acol_err
        ),
    )
}

fn oracle_suite() -> Outcome {
    let (reports, failures) = verify_suite().unwrap();
    let i1: Vec<_> = reports.iter().filter(|r| r.id == IntegralId::I1).collect();
    let i1_ok = i1.iter().all(|r| {
        let c = r.params["cutoff"];
        (r.extra["ratio_to_full_pole"] - 2.0 / PI * c.atan()).abs() <= I1_RATIO_ABS
    }) && oracles::i1_trend_ok(&reports);
    let i3_ok = reports
        .iter()
        .filter(|r| r.id == IntegralId::I3)
        .all(|r| r.relative_error < I3_REL);
    let norm: Vec<_> = reports.iter().filter(|r| r.id == IntegralId::Norm).collect();
    let norm_ok = [0.5, 1.0, 5.0].iter().all(|&g| {
        norm.iter()
            .any(|r| r.params["gamma_dt"] == g && r.relative_error <= NORM_REL)
    });
    let i2 = oracles::verify_i2(&I2Params::dimensionless(100.0, 10.0, 6.0)).unwrap();
    let i2_ok = i2.params["e_over_gamma"] == 100.0 && i2.relative_error <= I2_REL;
    let worst = |id| {
        reports
            .iter()
            .filter(|r| r.id == id)
            .map(|r| r.relative_error)
            .fold(0.0f64, f64::max)
    };
    outcome(
        i1_ok && i2_ok && i3_ok && norm_ok && failures.is_empty(),
        format!(
            "I1 max err {:.1e} (trend {}); I2 err {:.2e} (<= 1e-2); I3 max err {:.1e} (< 1e-9); NORM max err {:.1e} (<= 1e-6)",
            worst(IntegralId::I1),
            if oracles::i1_trend_ok(&reports) { "ok" } else { "broken" },
            i2.relative_error,
            worst(IntegralId::I3),
            worst(IntegralId::Norm)
        ),
    )
}

fn determinism() -> Outcome {
    let csv_for = |workers: usize| {
        let cfg = SimulationConfig {
            workers,
            ..point_quantum(1_000_000, 4242)
        };
        let mut buf = Vec::new();
        Simulator::new(cfg).unwrap().write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    };
    let one = csv_for(1);
    let four = csv_for(4);
    let sorted = |s: &str| {
        let mut v: Vec<&str> = s.lines().skip(1).collect();
        v.sort_unstable();
        v.join("\n")
    };
    let same_sorted = sorted(&one) == sorted(&four);
    outcome(
        same_sorted,
        format!(
            "workers 1 vs 4, 10^6 records: sorted CSV identical = {same_sorted}, unsorted identical = {}",
            one == four
        ),
    )
}

fn geometry_shift() -> Outcome {
    let c = PhysicalParams::default().c_mm_per_ps;
    let base = SimulationConfig {
        n_events: 1_000_000,
        seed: 9,
        ..Default::default()
    };
    let mut moved = base.clone();
    moved.source.offset_mm = Vec3::new(0.0, 0.0, 1.0);
    let location = |cfg: SimulationConfig| {
        let dt: Vec<f64> = Simulator::new(cfg)
            .unwrap()
            .records()
            .unwrap()
            .iter()
            .map(|r| r.dt)
            .collect();
        fit(ModelKind::DoubleExponential, &dt).unwrap().location
    };
    let shift = location(moved) - location(base);
    let expected = -2.0 / c;
    outcome(
        (shift - expected).abs() < GEOMETRY_SHIFT_ABS_PS,
        format!("Δt location shift {shift:.4} ps vs -2/c = {expected:.4} ps (within 0.1 ps)"),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("lifetime from first principles", lifetime),
        ("coincidence spectrum shape", spectrum_shape),
        ("model discrimination", model_discrimination),
        ("semiclassical baseline", semiclassical),
        ("PAL slope", pal_slope),
        ("Doppler broadening", doppler),
        ("oracle suite", oracle_suite),
        ("determinism and parallel equivalence", determinism),
        ("geometry shift", geometry_shift),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {} [{verdict}] {name}: {} ({:.1} s)",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
