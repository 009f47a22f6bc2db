//! Frequency-dependent path gains.
//!
//! Total loss of a path is spreading (Friis) plus molecular absorption
//! (Beer-Lambert over the whole path length) plus one reflectance term per
//! bounce. Multipath components combine incoherently as a power sum.

use std::io::{BufRead, BufReader, Read};

use crate::geometry::Scene;
use crate::raytracer::{trace_all, PathKind, PropagationPath, MAX_ORDER};
use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

/// Default window threshold above the band minimum, dB.
pub const DEFAULT_WINDOW_THRESHOLD_DB: f64 = 3.0;

/// Molecular absorption coefficient k(f) in 1/m, sampled on a strictly
/// increasing frequency grid and linearly interpolated between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionTable {
    samples: Vec<(f64, f64)>,
}

impl AbsorptionTable {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Validation("table has no samples".into()));
        }
        for (i, &(f, k)) in samples.iter().enumerate() {
            if !f.is_finite() || !k.is_finite() {
                return Err(Error::Validation(format!("sample {} is not finite", i + 1)));
            }
            if k < 0.0 {
                return Err(Error::Validation(format!(
                    "sample {}: negative coefficient {k} at {f:e} Hz",
                    i + 1
                )));
            }
            if i > 0 && f <= samples[i - 1].0 {
                return Err(Error::Validation(format!(
                    "sample {}: frequency {f:e} Hz does not increase",
                    i + 1
                )));
            }
        }
        Ok(Self { samples })
    }

    /// Constant coefficient `k` over `[f_min, f_max]`.
    pub fn flat(k: f64, f_min: f64, f_max: f64) -> Result<Self> {
        Self::new(vec![(f_min, k), (f_max, k)])
    }

    /// Parses `frequency_hz,k_per_m` records; `#` starts a comment line and
    /// blank lines are skipped. Frequencies must already be increasing.
    pub fn load(source: impl Read) -> Result<Self> {
        let mut samples = Vec::new();
        let mut lines_of_samples = Vec::new();
        for (idx, line) in BufReader::new(source).lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut cols = text.split(',').map(str::trim);
            let (Some(f), Some(k), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected two comma-separated columns, got {text:?}"),
                });
            };
            let parse = |s: &str, what: &str| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("invalid {what} {s:?}"),
                })
            };
            samples.push((parse(f, "frequency")?, parse(k, "coefficient")?));
            lines_of_samples.push(line_no);
        }
        Self::new(samples).map_err(|e| match e {
            // Point validation failures at the offending source line.
            Error::Validation(msg) => match sample_index(&msg) {
                Some(i) if i < lines_of_samples.len() => Error::Parse {
                    line: lines_of_samples[i],
                    message: msg,
                },
                _ => Error::Validation(msg),
            },
            other => other,
        })
    }

    /// A synthetic table for demonstrations and tests: a floor rising with
    /// frequency plus Lorentzian lines near 0.557, 0.752 and 0.988 THz.
    /// The values are illustrative, not measured water-vapour data.
    pub fn synthetic() -> Self {
        const LINES: [(f64, f64); 3] = [(557e9, 0.8), (752e9, 0.5), (988e9, 0.6)];
        const HALF_WIDTH_HZ: f64 = 3e9;
        let samples = (10..=2000)
            .map(|ghz| {
                let f = ghz as f64 * 1e9;
                let floor = 1e-4 + 2e-3 * (f / 1e12).powi(2);
                let lines: f64 = LINES
                    .iter()
                    .map(|&(f0, peak)| {
                        let x = (f - f0) / HALF_WIDTH_HZ;
                        peak / (1.0 + x * x)
                    })
                    .sum();
                (f, floor + lines)
            })
            .collect();
        Self::new(samples).expect("synthetic table is valid")
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    /// Sampled frequency range, Hz.
    pub fn range(&self) -> (f64, f64) {
        (self.samples[0].0, self.samples[self.samples.len() - 1].0)
    }

    pub fn contains(&self, f: f64) -> bool {
        let (lo, hi) = self.range();
        f >= lo && f <= hi
    }

    /// Coefficient at `f`, 1/m.
    pub fn coefficient(&self, f: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(f >= lo && f <= hi) {
            return Err(Error::FrequencyOutOfRange {
                frequency_hz: f,
                min_hz: lo,
                max_hz: hi,
            });
        }
        let i = self.samples.partition_point(|&(fs, _)| fs <= f);
        if i == self.samples.len() {
            return Ok(self.samples[i - 1].1);
        }
        let (f0, k0) = self.samples[i - 1];
        let (f1, k1) = self.samples[i];
        Ok(k0 + (k1 - k0) * (f - f0) / (f1 - f0))
    }
}

fn sample_index(msg: &str) -> Option<usize> {
    let rest = msg.strip_prefix("sample ")?;
    let n: usize = rest.split(|c: char| !c.is_ascii_digit()).next()?.parse().ok()?;
    n.checked_sub(1)
}

/// Friis spreading loss `20 log10(4 pi d f / c)`, dB.
pub fn spreading_loss_db(f: f64, d: f64) -> Result<f64> {
    if !(f > 0.0) || !(d > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spreading loss needs positive frequency and distance, got f={f}, d={d}"
        )));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * d * f / SPEED_OF_LIGHT).log10())
}

/// Beer-Lambert absorption `10 log10(e) k(f) d`, dB.
pub fn absorption_loss_db(f: f64, d: f64, table: &AbsorptionTable) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative distance {d}")));
    }
    Ok(10.0 * std::f64::consts::LOG10_E * table.coefficient(f)? * d)
}

/// Loss breakdown of one path at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGain {
    pub path: PropagationPath,
    pub frequency_hz: f64,
    pub spreading_loss_db: f64,
    pub absorption_loss_db: f64,
    /// Bounce or redirection loss.
    pub reflection_loss_db: f64,
    pub total_gain_db: f64,
}

impl PathGain {
    pub fn from_losses(
        path: PropagationPath,
        frequency_hz: f64,
        spreading_loss_db: f64,
        absorption_loss_db: f64,
        reflection_loss_db: f64,
    ) -> Self {
        Self {
            path,
            frequency_hz,
            spreading_loss_db,
            absorption_loss_db,
            reflection_loss_db,
            total_gain_db: -(spreading_loss_db + absorption_loss_db + reflection_loss_db),
        }
    }
}

/// Gain of a LOS or reflected path.
pub fn path_gain(
    path: &PropagationPath,
    f: f64,
    scene: &Scene,
    table: &AbsorptionTable,
) -> Result<PathGain> {
    if path.kind == PathKind::SurfaceAssisted {
        return Err(Error::InvalidArgument(
            "surface-assisted paths are priced by their tile set".into(),
        ));
    }
    let spreading = spreading_loss_db(f, path.length)?;
    let absorption = absorption_loss_db(f, path.length, table)?;
    let mut reflection = 0.0;
    for &id in &path.bounce_surfaces {
        let r = scene
            .reflectance(id)
            .ok_or_else(|| Error::Geometry(format!("path bounces on unknown surface {id}")))?;
        reflection += -10.0 * r.log10();
    }
    Ok(PathGain::from_losses(path.clone(), f, spreading, absorption, reflection))
}

/// Incoherent power sum of gains given in dB.
pub fn power_sum_db(gains_db: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut gains = gains_db.into_iter().peekable();
    gains.peek()?;
    // Factor out the strongest term so very weak links do not underflow.
    let gains: Vec<f64> = gains.collect();
    let max = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Some(max);
    }
    let sum: f64 = gains.iter().map(|g| 10f64.powf((g - max) / 10.0)).sum();
    Some(max + 10.0 * sum.log10())
}

/// Aggregate multipath gain, dB. An empty list means the link is in outage.
pub fn aggregate_gain_db(paths: &[PathGain]) -> Result<f64> {
    let Some(first) = paths.first() else {
        return Err(Error::NoPath);
    };
    if paths.iter().any(|p| p.frequency_hz != first.frequency_hz) {
        return Err(Error::InvalidArgument(
            "aggregated paths must share one frequency".into(),
        ));
    }
    power_sum_db(paths.iter().map(|p| p.total_gain_db)).ok_or(Error::NoPath)
}

/// Aggregate path loss of a fixed path set across `f_grid`; `None` marks
/// an outage sample.
pub fn spectrum_of_paths(
    paths: &[PropagationPath],
    f_grid: &[f64],
    scene: &Scene,
    table: &AbsorptionTable,
) -> Result<Vec<(f64, Option<f64>)>> {
    f_grid
        .iter()
        .map(|&f| {
            let gains = paths
                .iter()
                .map(|p| path_gain(p, f, scene, table))
                .collect::<Result<Vec<_>>>()?;
            let loss = match aggregate_gain_db(&gains) {
                Ok(g) => Some(-g),
                Err(Error::NoPath) => None,
                Err(e) => return Err(e),
            };
            Ok((f, loss))
        })
        .collect()
}

/// Path-loss spectrum between two points, LOS plus reflections up to order 2.
/// Geometry is traced once; only the losses depend on frequency.
pub fn path_loss_spectrum(
    scene: &Scene,
    tx: &Vec3,
    rx: &Vec3,
    f_grid: &[f64],
    table: &AbsorptionTable,
) -> Result<Vec<(f64, Option<f64>)>> {
    if let Some(&f) = f_grid.iter().find(|&&f| !table.contains(f)) {
        let (min_hz, max_hz) = table.range();
        return Err(Error::FrequencyOutOfRange {
            frequency_hz: f,
            min_hz,
            max_hz,
        });
    }
    let paths = trace_all(scene, tx, rx, MAX_ORDER)?;
    spectrum_of_paths(&paths, f_grid, scene, table)
}

/// `n` evenly spaced frequencies from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralWindow {
    pub f_lo: f64,
    pub f_hi: f64,
}

impl SpectralWindow {
    pub fn new(f_lo: f64, f_hi: f64) -> Result<Self> {
        if !(f_lo < f_hi) || !f_lo.is_finite() || !f_hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "window needs f_lo < f_hi, got [{f_lo:e}, {f_hi:e}]"
            )));
        }
        Ok(Self { f_lo, f_hi })
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_lo + self.f_hi)
    }

    pub fn bandwidth(&self) -> f64 {
        self.f_hi - self.f_lo
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_lo && f <= self.f_hi
    }
}

/// Removes the Friis `20 log10(f)` trend, referenced to the first sample,
/// so what remains is absorption structure plus a constant.
pub fn spreading_compensated(spectrum: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let Some(&(f0, _)) = spectrum.first() else {
        return Vec::new();
    };
    spectrum
        .iter()
        .map(|&(f, loss)| (f, loss - 20.0 * (f / f0).log10()))
        .collect()
}

/// Windows of the absorption structure: [`spectral_windows`] applied to the
/// spreading-compensated spectrum.
pub fn absorption_windows(spectrum: &[(f64, f64)], threshold_db: f64) -> Vec<SpectralWindow> {
    spectral_windows(&spreading_compensated(spectrum), threshold_db)
}

/// Extracts spectral windows from a loss spectrum sorted by frequency.
///
/// The spectrum is cut at its loss peaks into local bands; a peak that
/// rises no more than `threshold_db` above the higher of its two
/// neighbouring band minima is not significant and its bands are merged
/// (least prominent first). Inside each band, a window is a maximal run of
/// samples whose loss is within `threshold_db` of the band minimum. Window
/// edges sit halfway to the first excluded neighbour, or on the first and
/// last grid frequency.
pub fn spectral_windows(spectrum: &[(f64, f64)], threshold_db: f64) -> Vec<SpectralWindow> {
    let n = spectrum.len();
    if n < 2 {
        return Vec::new();
    }
    let loss: Vec<f64> = spectrum.iter().map(|s| s.1).collect();

    // Bands as inclusive index ranges; neighbours share their peak sample.
    let mut cuts = vec![0];
    cuts.extend(local_peaks(&loss));
    cuts.push(n - 1);
    let mut bands: Vec<(usize, usize)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let band_min = |b: &(usize, usize)| loss[b.0..=b.1].iter().copied().fold(f64::INFINITY, f64::min);

    loop {
        let weakest = bands
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let peak = loss[w[0].1];
                (i, peak - band_min(&w[0]).max(band_min(&w[1])))
            })
            .filter(|&(_, prominence)| prominence <= threshold_db)
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match weakest {
            Some((i, _)) => {
                let merged = (bands[i].0, bands[i + 1].1);
                bands.splice(i..=i + 1, [merged]);
            }
            None => break,
        }
    }

    let mut keep = vec![false; n];
    for b in &bands {
        let limit = band_min(b) + threshold_db;
        for (i, flag) in keep.iter_mut().enumerate().take(b.1 + 1).skip(b.0) {
            *flag |= loss[i] <= limit;
        }
    }

    let f = |i: usize| spectrum[i].0;
    let mut windows = Vec::new();
    let mut i = 0;
    while i < n {
        if !keep[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && keep[i + 1] {
            i += 1;
        }
        let lo = if start == 0 { f(0) } else { 0.5 * (f(start - 1) + f(start)) };
        let hi = if i == n - 1 { f(n - 1) } else { 0.5 * (f(i) + f(i + 1)) };
        if let Ok(w) = SpectralWindow::new(lo, hi) {
            windows.push(w);
        }
        i += 1;
    }
    windows
}

/// Interior local maxima; a plateau counts once, at its first sample.
fn local_peaks(loss: &[f64]) -> Vec<usize> {
    let n = loss.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if loss[i] > loss[i - 1] {
            let mut j = i;
            while j + 1 < n && loss[j + 1] == loss[i] {
                j += 1;
            }
            if j + 1 < n && loss[j + 1] < loss[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}
