//! Histogramming, unbinned maximum-likelihood fits of the three comparison
//! shapes, Kolmogorov–Smirnov distances and model ranking.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::io::{Read, Write};
use std::path::Path;

use crate::distributions::{ModelKind, ModelShape};
use crate::{Error, Result};

/// Uniformly binned histogram of time differences (ps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSpectrum {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    pub total: u64,
}

/// Default histogram range, ps.
pub const DEFAULT_RANGE: (f64, f64) = (-1000.0, 1000.0);
/// Default bin width, ps.
pub const DEFAULT_BIN_WIDTH: f64 = 1.0;

impl TimingSpectrum {
    /// Empty spectrum covering `[lo, hi)`. The bin count is rounded up, so
    /// the last edge may sit slightly past `hi`.
    pub fn new(bin_width: f64, (lo, hi): (f64, f64)) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::invalid("bin_width", format!("must be > 0, got {bin_width}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(
                "range",
                format!("need finite lo < hi, got [{lo}, {hi})"),
            ));
        }
        let span = (hi - lo) / bin_width;
        // tolerate rounding in (hi - lo) / w for ranges that are exact multiples
        let nbins = (span * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self {
            lo,
            bin_width,
            counts: vec![0; nbins],
            underflow: 0,
            overflow: 0,
            total: 0,
        })
    }

    pub fn hi(&self) -> f64 {
        self.edge(self.counts.len())
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.lo + self.bin_width * i as f64
    }

    pub fn bin_edges(&self) -> Vec<f64> {
        (0..=self.counts.len()).map(|i| self.edge(i)).collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + self.bin_width * (i as f64 + 0.5)
    }

    pub fn fill(&mut self, x: f64) -> Result<()> {
        if x.is_nan() {
            return Err(Error::Domain("cannot histogram NaN".into()));
        }
        let pos = (x - self.lo) / self.bin_width;
        if pos < 0.0 {
            self.underflow += 1;
        } else if pos >= self.counts.len() as f64 {
            self.overflow += 1;
        } else {
            self.counts[pos as usize] += 1;
        }
        self.total += 1;
        Ok(())
    }

    /// Adds another spectrum with identical binning.
    pub fn merge(&mut self, other: &TimingSpectrum) -> Result<()> {
        if self.lo != other.lo || self.bin_width != other.bin_width || self.counts.len() != other.counts.len() {
            return Err(Error::invalid(
                "spectrum",
                "cannot merge spectra with different binning",
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        self.total += other.total;
        Ok(())
    }

    pub fn in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn peak_bin(&self) -> Option<usize> {
        let (i, &c) = self
            .counts
            .iter()
            .enumerate()
            .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))?;
        (c > 0).then_some(i)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<spectrum>", e);
        writeln!(out, "bin_lo_ps,bin_hi_ps,count").map_err(io)?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(out, "{},{},{}", self.edge(i), self.edge(i + 1), c).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads the format produced by [`TimingSpectrum::write_csv`]. Bins must
    /// be contiguous and of equal width.
    pub fn read_csv<R: Read>(input: R, path: &str) -> Result<Self> {
        let parse = |reason: String| Error::Parse {
            path: path.to_string(),
            reason,
        };
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| parse(e.to_string()))?;
            let field = |i: usize| -> Result<&str> { rec.get(i).ok_or_else(|| parse(format!("missing column {i}"))) };
            let lo: f64 = field(0)?.trim().parse().map_err(|e| parse(format!("{e}")))?;
            let hi: f64 = field(1)?.trim().parse().map_err(|e| parse(format!("{e}")))?;
            let c: u64 = field(2)?.trim().parse().map_err(|e| parse(format!("{e}")))?;
            rows.push((lo, hi, c));
        }
        let Some(&(lo, hi0, _)) = rows.first() else {
            return Err(parse("no bins".into()));
        };
        let width = hi0 - lo;
        for (i, &(a, b, _)) in rows.iter().enumerate() {
            let expect = lo + width * i as f64;
            if (a - expect).abs() > 1e-9 * width.max(1.0) || ((b - a) - width).abs() > 1e-9 * width.max(1.0) {
                return Err(parse(format!("bin {i} is not uniform and contiguous")));
            }
        }
        let counts: Vec<u64> = rows.iter().map(|r| r.2).collect();
        let total = counts.iter().sum();
        Ok(Self {
            lo,
            bin_width: width,
            counts,
            underflow: 0,
            overflow: 0,
            total,
        })
    }
}

/// Bins `samples` into `[range.0, range.1)`; values outside land in
/// underflow/overflow so that nothing is dropped.
pub fn histogram(samples: &[f64], bin_width: f64, range: (f64, f64)) -> Result<TimingSpectrum> {
    let mut s = TimingSpectrum::new(bin_width, range)?;
    for &x in samples {
        s.fill(x)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    #[serde(rename = "location_ps")]
    pub location: f64,
    #[serde(rename = "scale_ps")]
    pub scale: f64,
    #[serde(rename = "fwhm_ps")]
    pub fwhm: f64,
    #[serde(rename = "loglik")]
    pub log_likelihood: f64,
    #[serde(rename = "ks")]
    pub ks_statistic: f64,
    #[serde(rename = "n")]
    pub n_used: usize,
}

impl FitResult {
    pub fn shape(&self) -> ModelShape {
        ModelShape {
            kind: self.model,
            location: self.location,
            scale: self.scale,
        }
    }

    fn from_shape(shape: ModelShape, sorted: &[f64]) -> Self {
        let log_likelihood = sorted.iter().map(|&x| shape.ln_pdf(x)).sum();
        FitResult {
            model: shape.kind,
            location: shape.location,
            scale: shape.scale,
            fwhm: shape.fwhm(),
            log_likelihood,
            ks_statistic: ks_statistic_sorted(sorted, |x| shape.cdf(x)),
            n_used: sorted.len(),
        }
    }
}

pub const MIN_FIT_SAMPLES: usize = 10;

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::invalid(
            "samples",
            format!("need at least {MIN_FIT_SAMPLES}, got {}", samples.len()),
        ));
    }
    if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Domain(format!("non-finite sample {bad}")));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

/// Median of sorted data; the midpoint of the two central values for even n.
fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Closed-form Laplace maximum likelihood: location is the median, scale the
/// mean absolute deviation about it.
pub fn fit_double_exponential(samples: &[f64]) -> Result<FitResult> {
    let v = sorted_finite(samples)?;
    let location = median_sorted(&v);
    let scale = v.iter().map(|x| (x - location).abs()).sum::<f64>() / v.len() as f64;
    if !(scale > 0.0) {
        return Err(Error::Degenerate("all samples equal: zero scale".into()));
    }
    Ok(FitResult::from_shape(
        ModelShape {
            kind: ModelKind::DoubleExponential,
            location,
            scale,
        },
        &v,
    ))
}

/// Gaussian maximum likelihood (mean, population standard deviation).
pub fn fit_gaussian(samples: &[f64]) -> Result<FitResult> {
    let v = sorted_finite(samples)?;
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::Degenerate("all samples equal: zero variance".into()));
    }
    Ok(FitResult::from_shape(
        ModelShape {
            kind: ModelKind::Gaussian,
            location: mean,
            scale: var.sqrt(),
        },
        &v,
    ))
}

const LORENTZ_MAX_ITER: usize = 200;

/// Profile-likelihood half-width for a Lorentzian at fixed `location`.
///
/// The score equation `Σ γ²/(d²+γ²) = n/2` has a left side increasing in γ,
/// so the root is unique; it is found by Newton steps in `ln γ` kept inside
/// a bisection bracket.
fn lorentzian_width(sorted: &[f64], location: f64) -> Result<f64> {
    let d2: Vec<f64> = sorted.iter().map(|x| (x - location) * (x - location)).collect();
    let half_n = sorted.len() as f64 / 2.0;
    let zeros = d2.iter().filter(|&&d| d == 0.0).count() as f64;
    if zeros >= half_n {
        return Err(Error::Degenerate(format!(
            "{zeros} of {} samples sit at the location: zero width",
            sorted.len()
        )));
    }
    let (min_d2, max_d2) = d2
        .iter()
        .filter(|&&d| d > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));

    // h(u) = Σ 1 / (1 + d² e^{-2u}) - n/2, u = ln γ
    let h = |u: f64| -> (f64, f64) {
        let g2 = (2.0 * u).exp();
        let mut val = -half_n;
        let mut der = 0.0;
        for &d in &d2 {
            let q = d / g2;
            let t = 1.0 / (1.0 + q);
            val += t;
            der += 2.0 * q * t * t;
        }
        (val, der)
    };

    let mut lo = 0.5 * min_d2.ln() - 5.0;
    let mut hi = 0.5 * max_d2.ln() + 5.0;
    let mut u = 0.5 * (lo + hi);
    for _ in 0..LORENTZ_MAX_ITER {
        let (val, der) = h(u);
        if val == 0.0 {
            return Ok(u.exp());
        }
        if val < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let newton = u - val / der;
        let next = if der > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - u).abs() <= 1e-14 * u.abs().max(1.0) || hi - lo <= 1e-15 * u.abs().max(1.0) {
            return Ok(next.exp());
        }
        u = next;
    }
    Err(Error::FitNonConvergence {
        iterations: LORENTZ_MAX_ITER,
        diagnostics: format!("ln γ bracket [{lo}, {hi}], last ln γ = {u}, score = {}", h(u).0),
    })
}

/// Lorentzian fit with the location pinned to the sample median and the
/// half-width from the profile likelihood.
pub fn fit_lorentzian(samples: &[f64]) -> Result<FitResult> {
    let v = sorted_finite(samples)?;
    let location = median_sorted(&v);
    let scale = lorentzian_width(&v, location)?;
    Ok(FitResult::from_shape(
        ModelShape {
            kind: ModelKind::Lorentzian,
            location,
            scale,
        },
        &v,
    ))
}

/// Optional second pass after [`fit_lorentzian`]: alternates a
/// golden-section search for the location (within one half-width of the
/// current value) with the profile solve for the width.
pub fn fit_lorentzian_refined(samples: &[f64], passes: usize) -> Result<FitResult> {
    let v = sorted_finite(samples)?;
    let mut location = median_sorted(&v);
    let mut scale = lorentzian_width(&v, location)?;
    for _ in 0..passes {
        let loglik = |mu: f64| -> f64 {
            let shape = ModelShape {
                kind: ModelKind::Lorentzian,
                location: mu,
                scale,
            };
            v.iter().map(|&x| shape.ln_pdf(x)).sum()
        };
        location = golden_max(loglik, location - scale, location + scale, 1e-9 * scale, 200);
        scale = lorentzian_width(&v, location)?;
    }
    Ok(FitResult::from_shape(
        ModelShape {
            kind: ModelKind::Lorentzian,
            location,
            scale,
        },
        &v,
    ))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

pub fn fit(kind: ModelKind, samples: &[f64]) -> Result<FitResult> {
    match kind {
        ModelKind::DoubleExponential => fit_double_exponential(samples),
        ModelKind::Lorentzian => fit_lorentzian(samples),
        ModelKind::Gaussian => fit_gaussian(samples),
    }
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// `cdf`. Sorts a copy: O(n log n).
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    ks_statistic_sorted(&v, cdf)
}

/// As [`ks_statistic`] for data already sorted ascending.
pub fn ks_statistic_sorted<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        d.max(above).max(below)
    })
}

pub const MIN_COMPARE_SAMPLES: usize = 100;

/// Fits all three shapes and returns them ranked by log-likelihood,
/// best first.
pub fn model_compare(samples: &[f64]) -> Result<Vec<FitResult>> {
    if samples.len() < MIN_COMPARE_SAMPLES {
        return Err(Error::invalid(
            "samples",
            format!(
                "model comparison needs at least {MIN_COMPARE_SAMPLES}, got {}",
                samples.len()
            ),
        ));
    }
    let mut fits = ModelKind::ALL
        .iter()
        .map(|&k| fit(k, samples))
        .collect::<Result<Vec<_>>>()?;
    fits.sort_by(|a, b| {
        b.log_likelihood
            .partial_cmp(&a.log_likelihood)
            .unwrap_or(Ordering::Equal)
    });
    Ok(fits)
}

/// Result of a straight-line fit to log counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub bins_used: usize,
}

/// Weighted least squares of `ln(count)` against bin center over bins whose
/// centers lie in `[from, to]`. Weights are the counts (the inverse variance
/// of `ln N` under Poisson statistics); empty bins are skipped.
pub fn log_linear_tail_fit(spectrum: &TimingSpectrum, from: f64, to: f64) -> Result<TailFit> {
    let pts: Vec<(f64, f64, f64)> = spectrum
        .counts
        .iter()
        .enumerate()
        .filter(|&(i, &c)| c > 0 && (from..=to).contains(&spectrum.center(i)))
        .map(|(i, &c)| (spectrum.center(i), (c as f64).ln(), c as f64))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate(format!(
            "{} non-empty bins in [{from}, {to}]",
            pts.len()
        )));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(TailFit {
        slope,
        intercept: my - slope * mx,
        // weights are inverse variances, so Var(slope) = 1 / Sxx
        slope_std_error: (1.0 / sxx).sqrt(),
        bins_used: pts.len(),
    })
}

/// Double-exponential fit to a binned spectrum, for inputs without raw
/// samples. For each trial location the log counts are regressed on
/// `|x - location|` (count-weighted); the location minimizing the weighted
/// residual is found by golden section around the peak bin.
pub fn fit_binned_double_exponential(spectrum: &TimingSpectrum) -> Result<FitResult> {
    let peak = spectrum
        .peak_bin()
        .ok_or_else(|| Error::Degenerate("spectrum has no counts".into()))?;
    let pts: Vec<(f64, f64, f64)> = spectrum
        .counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(i, &c)| (spectrum.center(i), (c as f64).ln(), c as f64))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::invalid(
            "spectrum",
            format!("need at least {MIN_FIT_SAMPLES} non-empty bins"),
        ));
    }
    let regress = |mu: f64| -> (f64, f64, f64) {
        let sw: f64 = pts.iter().map(|p| p.2).sum();
        let mz = pts.iter().map(|p| p.2 * (p.0 - mu).abs()).sum::<f64>() / sw;
        let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
        let szz: f64 = pts.iter().map(|p| p.2 * ((p.0 - mu).abs() - mz).powi(2)).sum();
        let szy: f64 = pts.iter().map(|p| p.2 * ((p.0 - mu).abs() - mz) * (p.1 - my)).sum();
        let slope = szy / szz;
        let a = my - slope * mz;
        let ssr: f64 = pts
            .iter()
            .map(|p| p.2 * (p.1 - a - slope * (p.0 - mu).abs()).powi(2))
            .sum();
        (slope, a, ssr)
    };
    let center = spectrum.center(peak);
    let w = spectrum.bin_width;
    let location = golden_max(|mu| -regress(mu).2, center - 5.0 * w, center + 5.0 * w, 1e-9 * w, 200);
    let (slope, _, _) = regress(location);
    if !(slope < 0.0) {
        return Err(Error::Degenerate(format!(
            "log counts do not fall away from the peak (slope {slope})"
        )));
    }
    let shape = ModelShape::new(ModelKind::DoubleExponential, location, -1.0 / slope)?;

    // binned (multinomial) log-likelihood and KS over bin edges
    let n = spectrum.in_range();
    let mut loglik = 0.0;
    let mut cum = 0u64;
    let mut ks: f64 = 0.0;
    let norm = shape.cdf(spectrum.hi()) - shape.cdf(spectrum.lo);
    for (i, &c) in spectrum.counts.iter().enumerate() {
        let p = (shape.cdf(spectrum.edge(i + 1)) - shape.cdf(spectrum.edge(i))) / norm;
        if c > 0 {
            loglik += c as f64 * p.max(f64::MIN_POSITIVE).ln();
        }
        cum += c;
        let model = (shape.cdf(spectrum.edge(i + 1)) - shape.cdf(spectrum.lo)) / norm;
        ks = ks.max((cum as f64 / n as f64 - model).abs());
    }
    Ok(FitResult {
        model: ModelKind::DoubleExponential,
        location,
        scale: shape.scale,
        fwhm: shape.fwhm(),
        log_likelihood: loglik,
        ks_statistic: ks,
        n_used: n as usize,
    })
}

/// Loads one numeric column from a records CSV, skipping rows whose
/// `detected` column (if present) is 0.
pub fn load_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_column(file, column, &path.display().to_string())
}

pub fn read_column<R: Read>(input: R, column: &str, path: &str) -> Result<Vec<f64>> {
    let parse = |reason: String| Error::Parse {
        path: path.to_string(),
        reason,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| parse(e.to_string()))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| parse(format!("no column `{column}` in header")))?;
    let detected = headers.iter().position(|h| h == "detected");
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse(e.to_string()))?;
        if let Some(d) = detected {
            if rec.get(d).map(str::trim) == Some("0") {
                continue;
            }
        }
        let raw = rec
            .get(idx)
            .ok_or_else(|| parse(format!("row {} too short", line + 2)))?;
        let x: f64 = raw
            .trim()
            .parse()
            .map_err(|e| parse(format!("row {}: `{raw}`: {e}", line + 2)))?;
        out.push(x);
    }
    Ok(out)
}
