//! Seedable event generator for annihilation photon pairs and the detector
//! coincidences they produce.
//!
//! Every event draws from its own ChaCha8 stream: the key comes from the
//! master seed and the stream number is the event id. Output therefore
//! depends only on `(seed, config)`, never on chunking or worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::kinematics::{pair_from_direction, PhotonPair, Vec3};
use crate::units::PhysicalParams;
use crate::{Error, Result};

/// How emission times are assigned to the two photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionModel {
    /// Each photon's emission delay after injection is an independent
    /// exponential(Γ) draw; the difference is double exponential.
    #[default]
    Quantum,
    /// Both photons leave at one shared exponential(Γ) time.
    Semiclassical,
}

impl fmt::Display for EmissionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmissionModel::Quantum => "quantum",
            EmissionModel::Semiclassical => "semiclassical",
        })
    }
}

impl FromStr for EmissionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quantum" => Ok(EmissionModel::Quantum),
            "semiclassical" | "semi-classical" => Ok(EmissionModel::Semiclassical),
            other => Err(Error::Config(format!("unknown emission model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

/// When positrons enter the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Injection {
    /// Poisson injection at `rate_per_ps`. For a run of `n` events this is
    /// realized as `t0` uniform on `[0, n / rate)`, the conditional law of a
    /// Poisson process given its count.
    ConstantRate { rate_per_ps: f64 },
    /// Every positron injected at `t0 = 0`.
    AtZero,
}

impl Default for Injection {
    fn default() -> Self {
        // 1 MBq
        Injection::ConstantRate { rate_per_ps: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub slab_thickness_mm: f64,
    pub slab_normal: Axis,
    /// Full width of the square face of the slab.
    pub transverse_extent_mm: f64,
    /// Displacement of the slab center from the origin.
    pub offset_mm: Vec3,
    pub injection: Injection,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            slab_thickness_mm: 3.0,
            slab_normal: Axis::Z,
            transverse_extent_mm: 5.0,
            offset_mm: Vec3::ZERO,
            injection: Injection::default(),
        }
    }
}

impl SourceConfig {
    /// Zero-volume source at `offset`.
    pub fn point(offset: Vec3) -> Self {
        Self {
            slab_thickness_mm: 0.0,
            transverse_extent_mm: 0.0,
            offset_mm: offset,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")))
            }
        };
        nonneg("slab_thickness_mm", self.slab_thickness_mm)?;
        nonneg("transverse_extent_mm", self.transverse_extent_mm)?;
        if !self.offset_mm.is_finite() {
            return Err(Error::invalid("offset_mm", "must be finite"));
        }
        if let Injection::ConstantRate { rate_per_ps } = self.injection {
            if !(rate_per_ps.is_finite() && rate_per_ps > 0.0) {
                return Err(Error::invalid("rate_per_ps", format!("must be > 0, got {rate_per_ps}")));
            }
        }
        Ok(())
    }

    fn sample_point<R: Rng>(&self, rng: &mut R) -> Vec3 {
        // always three draws, so the stream layout does not depend on geometry
        let u: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        let along = (u[0] - 0.5) * self.slab_thickness_mm;
        let a = (u[1] - 0.5) * self.transverse_extent_mm;
        let b = (u[2] - 0.5) * self.transverse_extent_mm;
        let local = match self.slab_normal {
            Axis::X => Vec3::new(along, a, b),
            Axis::Y => Vec3::new(a, along, b),
            Axis::Z => Vec3::new(a, b, along),
        };
        self.offset_mm + local
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub d1_mm: Vec3,
    pub d2_mm: Vec3,
    /// Half-angle of each detector's acceptance cone as seen from the
    /// emission point. `None` means full hemisphere: every event is detected.
    pub acceptance_half_angle_rad: Option<f64>,
    /// Gaussian timing jitter per detector.
    pub jitter_sd_ps: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            d1_mm: Vec3::new(0.0, 0.0, 100.0),
            d2_mm: Vec3::new(0.0, 0.0, -100.0),
            acceptance_half_angle_rad: None,
            jitter_sd_ps: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d1_mm.is_finite() && self.d2_mm.is_finite()) {
            return Err(Error::invalid("detectors", "positions must be finite"));
        }
        if self.d1_mm == self.d2_mm {
            return Err(Error::invalid("detectors", "d1 and d2 must be distinct"));
        }
        if !(self.jitter_sd_ps.is_finite() && self.jitter_sd_ps >= 0.0) {
            return Err(Error::invalid(
                "jitter_sd_ps",
                format!("must be >= 0, got {}", self.jitter_sd_ps),
            ));
        }
        if let Some(a) = self.acceptance_half_angle_rad {
            if !(a > 0.0 && a <= std::f64::consts::PI) {
                return Err(Error::invalid(
                    "acceptance_half_angle_rad",
                    format!("must be in (0, π], got {a}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnihilationEvent {
    pub event_id: u64,
    pub t0: f64,
    pub source_point: Vec3,
    pub pc: Vec3,
    pub khat: Vec3,
    pub pair: PhotonPair,
    /// Emission time of the photon with wave vector `pair.k1`.
    pub tau1: f64,
    /// Emission time of the photon with wave vector `pair.k2`.
    pub tau2: f64,
    /// Emission delays `tau_j - t0`, kept separately so that differences do
    /// not lose precision against a large `t0`.
    pub delays: [f64; 2],
    /// Standard-normal deviates for the two detectors' timing jitter; drawn
    /// for every event so the stream layout is independent of `jitter_sd_ps`.
    pub jitter_draws: [f64; 2],
}

/// One event as seen by the two detectors. Index 1/2 refers to the
/// detector, not to the photon label in [`AnnihilationEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub event_id: u64,
    pub t0: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub t1: f64,
    pub t2: f64,
    pub dtau: f64,
    pub dt: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub acollinearity_mrad: f64,
    pub detected: bool,
}

pub const CSV_HEADER: &str =
    "event_id,t0_ps,tau1_ps,tau2_ps,t1_ps,t2_ps,dtau_ps,dt_ps,omega1_kev,omega2_kev,acol_mrad,detected";

impl CoincidenceRecord {
    /// One CSV row (no trailing newline) in [`CSV_HEADER`] order. Floats use
    /// Rust's shortest round-trip formatting, so rows are bit-reproducible.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.event_id,
            self.t0,
            self.tau1,
            self.tau2,
            self.t1,
            self.t2,
            self.dtau,
            self.dt,
            self.omega1,
            self.omega2,
            self.acollinearity_mrad,
            u8::from(self.detected)
        )
    }
}

/// Per-run constants resolved from the configs.
#[derive(Debug, Clone)]
pub struct EventSampler {
    gamma: f64,
    m: f64,
    component_sd: f64,
    c: f64,
    source: SourceConfig,
    model: EmissionModel,
    injection_window: f64,
    lifetime: Exp<f64>,
}

impl EventSampler {
    /// `n_events` sets the injection window for constant-rate sources.
    pub fn new(params: &PhysicalParams, source: &SourceConfig, model: EmissionModel, n_events: u64) -> Result<Self> {
        params.validate()?;
        source.validate()?;
        let gamma = params.gamma()?;
        let injection_window = match source.injection {
            Injection::ConstantRate { rate_per_ps } => n_events as f64 / rate_per_ps,
            Injection::AtZero => 0.0,
        };
        Ok(Self {
            gamma,
            m: params.m_e_kev,
            component_sd: crate::distributions::doppler_component_sd(params.sigma_doppler_kev),
            c: params.c_mm_per_ps,
            source: *source,
            model,
            injection_window,
            lifetime: Exp::new(gamma).map_err(|e| Error::invalid("gamma", e.to_string()))?,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Draws one event. Draw order: t0, source point (3), pc (3), khat,
    /// two emission delays, two jitter deviates.
    pub fn sample_event<R: Rng>(&self, event_id: u64, rng: &mut R) -> AnnihilationEvent {
        let t0 = rng.random::<f64>() * self.injection_window;
        let source_point = self.source.sample_point(rng);
        let mut normal = || -> f64 { StandardNormal.sample(rng) };
        let pc = Vec3::new(normal(), normal(), normal()) * self.component_sd;
        let dir: [f64; 3] = UnitSphere.sample(rng);
        // renormalize: the sampler's output is unit only to a few ulps
        let khat = Vec3::from_array(dir).normalized().unwrap_or(Vec3::Z);
        let pair = pair_from_direction(khat, pc, self.m).expect("unit direction and finite momentum");
        let e1 = self.lifetime.sample(rng);
        let e2 = self.lifetime.sample(rng);
        let delays = match self.model {
            EmissionModel::Quantum => [e1, e2],
            EmissionModel::Semiclassical => [e1, e1],
        };
        let jitter_draws = [StandardNormal.sample(rng), StandardNormal.sample(rng)];
        AnnihilationEvent {
            event_id,
            t0,
            source_point,
            pc,
            khat,
            pair,
            tau1: t0 + delays[0],
            tau2: t0 + delays[1],
            delays,
            jitter_draws,
        }
    }

    /// Assigns the photons to detectors and computes arrival times
    /// `t_j = tau_j + |d_j - source|/c + jitter_j`.
    pub fn detect(&self, ev: &AnnihilationEvent, det: &DetectorConfig) -> CoincidenceRecord {
        detect(ev, det, self.c)
    }
}

fn detect(ev: &AnnihilationEvent, det: &DetectorConfig, c: f64) -> CoincidenceRecord {
    let to1 = det.d1_mm - ev.source_point;
    let to2 = det.d2_mm - ev.source_point;
    let (k1, k2) = (ev.pair.k1, ev.pair.k2);

    // Some(false): photon 1 -> d1, Some(true): photon 1 -> d2
    let assignment = match det.acceptance_half_angle_rad {
        None => Some(k1.dot(det.d1_mm - det.d2_mm) < 0.0),
        Some(half) => {
            let sees = |k: Vec3, to: Vec3| k.angle_to(to) <= half;
            if sees(k1, to1) && sees(k2, to2) {
                Some(false)
            } else if sees(k1, to2) && sees(k2, to1) {
                Some(true)
            } else {
                None
            }
        }
    };

    let acollinearity_mrad = ev.pair.acollinearity() * 1e3;
    let Some(swapped) = assignment else {
        return CoincidenceRecord {
            event_id: ev.event_id,
            t0: ev.t0,
            tau1: ev.tau1,
            tau2: ev.tau2,
            t1: f64::NAN,
            t2: f64::NAN,
            dtau: ev.delays[0] - ev.delays[1],
            dt: f64::NAN,
            omega1: ev.pair.omega1,
            omega2: ev.pair.omega2,
            acollinearity_mrad,
            detected: false,
        };
    };
    let (tau1, tau2, delay1, delay2, omega1, omega2) = if swapped {
        (
            ev.tau2,
            ev.tau1,
            ev.delays[1],
            ev.delays[0],
            ev.pair.omega2,
            ev.pair.omega1,
        )
    } else {
        (
            ev.tau1,
            ev.tau2,
            ev.delays[0],
            ev.delays[1],
            ev.pair.omega1,
            ev.pair.omega2,
        )
    };
    let flight1 = to1.norm() / c + det.jitter_sd_ps * ev.jitter_draws[0];
    let flight2 = to2.norm() / c + det.jitter_sd_ps * ev.jitter_draws[1];
    CoincidenceRecord {
        event_id: ev.event_id,
        t0: ev.t0,
        tau1,
        tau2,
        t1: tau1 + flight1,
        t2: tau2 + flight2,
        dtau: delay1 - delay2,
        dt: (delay1 + flight1) - (delay2 + flight2),
        omega1,
        omega2,
        acollinearity_mrad,
        detected: true,
    }
}

/// Per-event random streams under one master seed.
#[derive(Debug, Clone)]
pub struct EventStreams {
    base: ChaCha8Rng,
}

impl EventStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream for `event_id`, positioned at its start.
    pub fn stream(&self, event_id: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(event_id);
        rng.set_word_pos(0);
        rng
    }
}

/// Everything a simulation run needs besides its output sink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_events: u64,
    pub seed: u64,
    /// Events per work unit. Affects scheduling only, never output.
    pub chunk_size: usize,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub model: EmissionModel,
    pub physics: PhysicalParams,
    pub source: SourceConfig,
    pub detectors: DetectorConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_events: 10_000,
            seed: 0,
            chunk_size: 16_384,
            workers: 0,
            model: EmissionModel::Quantum,
            physics: PhysicalParams::default(),
            source: SourceConfig::default(),
            detectors: DetectorConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_events == 0 {
            return Err(Error::invalid("n_events", "must be > 0"));
        }
        if self.chunk_size == 0 {
            return Err(Error::invalid("chunk_size", "must be > 0"));
        }
        self.physics.validate()?;
        self.source.validate()?;
        self.detectors.validate()?;
        Ok(())
    }
}

/// A validated, ready-to-run simulation.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: SimulationConfig,
    sampler: EventSampler,
    streams: EventStreams,
}

impl Simulator {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        config.validate()?;
        let sampler = EventSampler::new(&config.physics, &config.source, config.model, config.n_events)?;
        let streams = EventStreams::new(config.seed);
        Ok(Self {
            config,
            sampler,
            streams,
        })
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn sampler(&self) -> &EventSampler {
        &self.sampler
    }

    pub fn event(&self, event_id: u64) -> AnnihilationEvent {
        let mut rng = self.streams.stream(event_id);
        self.sampler.sample_event(event_id, &mut rng)
    }

    pub fn record(&self, event_id: u64) -> CoincidenceRecord {
        self.sampler.detect(&self.event(event_id), &self.config.detectors)
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    /// Generates all events in id order, computing `map` for each in
    /// parallel and handing results to `sink` sequentially.
    pub fn for_each_ordered<T, M, S>(&self, map: M, mut sink: S) -> Result<()>
    where
        T: Send,
        M: Fn(&Self, u64) -> T + Sync,
        S: FnMut(T) -> Result<()>,
    {
        let pool = self.pool()?;
        let n = self.config.n_events;
        let chunk = self.config.chunk_size as u64;
        let batch = chunk * pool.current_num_threads().max(1) as u64;
        let mut start = 0u64;
        while start < n {
            let end = (start + batch).min(n);
            let chunks: Vec<(u64, u64)> = (start..end)
                .step_by(chunk as usize)
                .map(|lo| (lo, (lo + chunk).min(end)))
                .collect();
            let results: Vec<Vec<T>> = pool.install(|| {
                chunks
                    .par_iter()
                    .map(|&(lo, hi)| (lo..hi).map(|id| map(self, id)).collect())
                    .collect()
            });
            for item in results.into_iter().flatten() {
                sink(item)?;
            }
            start = end;
        }
        Ok(())
    }

    pub fn records(&self) -> Result<Vec<CoincidenceRecord>> {
        let mut out = Vec::with_capacity(self.config.n_events as usize);
        self.for_each_ordered(
            |s, id| s.record(id),
            |r| {
                out.push(r);
                Ok(())
            },
        )?;
        Ok(out)
    }

    pub fn events(&self) -> Result<Vec<AnnihilationEvent>> {
        let mut out = Vec::with_capacity(self.config.n_events as usize);
        self.for_each_ordered(
            |s, id| s.event(id),
            |e| {
                out.push(e);
                Ok(())
            },
        )?;
        Ok(out)
    }

    /// Streams all records as CSV (header first) to `out`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<records>", e);
        writeln!(out, "{CSV_HEADER}").map_err(io)?;
        self.for_each_ordered(|s, id| s.record(id).csv_row(), |row| writeln!(out, "{row}").map_err(io))?;
        out.flush().map_err(io)
    }
}

/// Runs a configured simulation and returns its records in id order.
pub fn run(config: SimulationConfig) -> Result<Vec<CoincidenceRecord>> {
    Simulator::new(config)?.records()
}
