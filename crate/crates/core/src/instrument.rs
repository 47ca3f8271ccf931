//! Detector model: Gaussian timing jitter, TCSPC binning and shot noise.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, Poisson};

use crate::error::{require_non_negative, Error, Result};
use crate::math;
use crate::pulse::EmissionTrace;

/// Default combined timing jitter of detector and counting electronics.
pub const DEFAULT_IRF_SIGMA_NS: f64 = 0.45;
/// Default TCSPC bin width.
pub const DEFAULT_BIN_WIDTH_NS: f64 = 0.512;

/// Binned photon arrival times.
///
/// Bin centers are stored explicitly so a histogram read back from disk is
/// the one that was written.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TcspcHistogram {
    bin_width: f64,
    centers: Vec<f64>,
    counts: Vec<f64>,
}

impl TcspcHistogram {
    pub fn new(bin_width: f64, centers: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::InvalidParameter {
                name: "bin_width",
                value: bin_width,
                reason: "must be positive",
            });
        }
        if centers.len() != counts.len() {
            return Err(Error::InvalidParameter {
                name: "counts",
                value: counts.len() as f64,
                reason: "need one count per bin center",
            });
        }
        if centers.windows(2).any(|w| !(w[1] > w[0])) || centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "bin centers",
                value: f64::NAN,
                reason: "must be finite and strictly increasing",
            });
        }
        if counts.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "counts",
                value: f64::NAN,
                reason: "must be finite and non-negative",
            });
        }
        Ok(Self {
            bin_width,
            centers,
            counts,
        })
    }

    /// Contiguous bins starting at `origin`.
    pub fn uniform(origin: f64, bin_width: f64, counts: Vec<f64>) -> Result<Self> {
        let centers = (0..counts.len())
            .map(|k| origin + (k as f64 + 0.5) * bin_width)
            .collect();
        Self::new(bin_width, centers, counts)
    }

    /// Rebuilds a histogram from bin centers alone; the width is the
    /// smallest center spacing.
    pub fn from_centers(centers: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        let width = centers.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if !width.is_finite() {
            return Err(Error::InsufficientData {
                needed: 2,
                got: centers.len(),
            });
        }
        Self::new(width, centers, counts)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    /// Left edge of the first bin.
    pub fn origin(&self) -> f64 {
        self.centers.first().map_or(0.0, |c| c - 0.5 * self.bin_width)
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Bins whose center lies in `[from, to]`.
    pub fn window(&self, from: f64, to: f64) -> Self {
        let lo = self.centers.partition_point(|&c| c < from);
        let hi = self.centers.partition_point(|&c| c <= to);
        Self {
            bin_width: self.bin_width,
            centers: self.centers[lo..hi.max(lo)].to_vec(),
            counts: self.counts[lo..hi.max(lo)].to_vec(),
        }
    }
}

/// Convolves the emission rate with a normalized Gaussian of width `sigma`.
///
/// Inside each trace interval the emission is taken as uniform, so both the
/// output rates and the output interval counts are closed-form. The output
/// grid is the input grid, refined to steps of at most σ/2 and extended by
/// 8σ on either side.
pub fn convolve_irf(trace: &EmissionTrace, sigma_ns: f64) -> Result<EmissionTrace> {
    require_non_negative("sigma", sigma_ns)?;
    if sigma_ns == 0.0 {
        return Ok(trace.clone());
    }
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let times = trace.times();
    let counts = trace.counts();
    let reach = 8.0 * sigma_ns;

    // Output intervals no longer than σ/2, so downstream binning (which
    // spreads each interval uniformly) does not smear the blurred edges.
    let step = 0.5 * sigma_ns;
    let mut grid = Vec::with_capacity(times.len() + 80);
    let n_pad = math::ceil(reach / step) as usize;
    grid.extend((0..n_pad).rev().map(|k| times[0] - (k + 1) as f64 * step));
    grid.push(times[0]);
    for w in times.windows(2) {
        let pieces = math::ceil((w[1] - w[0]) / step).max(1.0) as usize;
        let h = (w[1] - w[0]) / pieces as f64;
        grid.extend((1..pieces).map(|k| w[0] + k as f64 * h));
        grid.push(w[1]);
    }
    let end = times[times.len() - 1];
    grid.extend((0..n_pad).map(|k| end + (k + 1) as f64 * step));

    let density: Vec<f64> = counts
        .iter()
        .zip(times.windows(2))
        .map(|(c, w)| c / (w[1] - w[0]))
        .collect();

    // Input intervals that can reach [t0, t1].
    let nearby = |t0: f64, t1: f64| {
        let lo = times.partition_point(|&t| t <= t0 - reach).saturating_sub(1);
        let hi = times.partition_point(|&t| t < t1 + reach).min(counts.len());
        lo..hi
    };
    let rate_at = |t: f64| {
        nearby(t, t)
            .map(|i| {
                let a = (t - times[i]) / sigma_ns;
                let b = (t - times[i + 1]) / sigma_ns;
                density[i] * (math::norm_cdf(a) - math::norm_cdf(b))
            })
            .sum::<f64>()
    };
    let photons_in = |t0: f64, t1: f64| {
        let f = math::norm_cdf_integral;
        nearby(t0, t1)
            .map(|i| {
                let (a, b) = (times[i], times[i + 1]);
                let s =
                    f((t1 - a) / sigma_ns) - f((t0 - a) / sigma_ns) - f((t1 - b) / sigma_ns) + f((t0 - b) / sigma_ns);
                density[i] * sigma_ns * s
            })
            .sum::<f64>()
    };

    let mut rates = Vec::with_capacity(grid.len());
    let mut out_counts = Vec::with_capacity(grid.len() - 1);
    for (k, &t) in grid.iter().enumerate() {
        rates.push(rate_at(t).max(0.0));
        if k > 0 {
            out_counts.push(photons_in(grid[k - 1], t).max(0.0));
        }
    }
    EmissionTrace::from_parts(grid, rates, out_counts, trace.markers().to_vec())
}

/// Binning and noise controls for [`sample_histogram`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HistogramSettings {
    pub bin_width_ns: f64,
    /// Bin edges sit at `origin_ns + k·bin_width_ns`.
    pub origin_ns: f64,
    /// Expected signal photons over the whole histogram.
    pub total_photons: f64,
    /// Expected background counts added to every bin.
    pub background_per_bin: f64,
    /// Return expected counts instead of Poisson draws.
    pub noiseless: bool,
    pub seed: u64,
}

impl Default for HistogramSettings {
    fn default() -> Self {
        Self {
            bin_width_ns: DEFAULT_BIN_WIDTH_NS,
            origin_ns: 0.0,
            total_photons: 1e6,
            background_per_bin: 0.0,
            noiseless: false,
            seed: 0,
        }
    }
}

/// Expected counts in every full bin inside the trace span, scaled so the
/// signal sums to `total_photons`.
pub fn expected_histogram(trace: &EmissionTrace, settings: &HistogramSettings) -> Result<TcspcHistogram> {
    let w = settings.bin_width_ns;
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter {
            name: "bin_width",
            value: w,
            reason: "must be positive",
        });
    }
    if !(settings.total_photons > 0.0) || !settings.total_photons.is_finite() {
        return Err(Error::InvalidParameter {
            name: "total_photons",
            value: settings.total_photons,
            reason: "must be positive",
        });
    }
    require_non_negative("background", settings.background_per_bin)?;
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let first = math::ceil((trace.start() - settings.origin_ns) / w - 1e-9) as i64;
    let last = math::floor((trace.end() - settings.origin_ns) / w + 1e-9) as i64;
    if last <= first {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let edge = |k: i64| (settings.origin_ns + k as f64 * w).clamp(trace.start(), trace.end());
    let raw = (first..last)
        .map(|k| trace.integral(edge(k), edge(k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::EmptyTrace);
    }
    let scale = settings.total_photons / sum;
    let centers = (first..last)
        .map(|k| settings.origin_ns + (k as f64 + 0.5) * w)
        .collect();
    let counts = raw.iter().map(|r| r * scale + settings.background_per_bin).collect();
    TcspcHistogram::new(w, centers, counts)
}

/// Bins the trace and draws independent Poisson counts per bin. The same
/// seed always yields the same histogram.
pub fn sample_histogram(trace: &EmissionTrace, settings: &HistogramSettings) -> Result<TcspcHistogram> {
    let expected = expected_histogram(trace, settings)?;
    if settings.noiseless {
        return Ok(expected);
    }
    Ok(TcspcHistogram {
        counts: poisson_counts(&expected.counts, settings.seed),
        ..expected
    })
}

/// Independent Poisson draws with the given means.
pub fn poisson_counts(expected: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    expected.iter().map(|&lambda| poisson(&mut rng, lambda)).collect()
}

pub(crate) fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> f64 {
    match Poisson::new(lambda) {
        Ok(d) => d.sample(rng),
        Err(_) => 0.0,
    }
}

/// Expected photons in `[start, start + width]`.
pub fn window_counts(trace: &EmissionTrace, start_ns: f64, width_ns: f64) -> Result<f64> {
    require_non_negative("width", width_ns)?;
    trace.integral(start_ns, start_ns + width_ns)
}
