//! Scenario runner: techniques, the (technique x frequency x Rx) grid,
//! reach and gain statistics, and report output.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{aggregate_gain_db, linear_grid, path_gain, spectral_windows, AbsorptionTable, PathGain};
use crate::devices::{capacity_bps, snr_db, ArrayConfig, LinkResult, RadioConfig};
use crate::geometry::{EndpointSet, HallwayLayout, Receiver, Scene, SceneDocument, SurfaceId};
use crate::raytracer::{trace_all, PathRecord, PropagationPath, MAX_ORDER};
use crate::surfaces::{
    assisted_paths, configure, TileConfiguration, TileKind, TileModel, TileSet, DEFAULT_TILE_PITCH_M,
};
use crate::{Error, Result};

/// Default carrier frequencies, Hz.
pub const DEFAULT_FREQUENCIES_HZ: [f64; 3] = [0.06e12, 0.3e12, 1.0e12];
pub const DEFAULT_SNR_THRESHOLD_DB: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Technique {
    Baseline,
    Ummimo,
    Reflectarray,
    Hypersurface,
    Joint,
}

/// Features a technique switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Components {
    pub um_mimo: bool,
    pub tiles: Option<TileKind>,
    pub adaptive_band: bool,
}

impl Technique {
    pub const ALL: [Technique; 5] = [
        Technique::Baseline,
        Technique::Ummimo,
        Technique::Reflectarray,
        Technique::Hypersurface,
        Technique::Joint,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Technique::Baseline => "BASELINE",
            Technique::Ummimo => "UMMIMO",
            Technique::Reflectarray => "REFLECTARRAY",
            Technique::Hypersurface => "HYPERSURFACE",
            Technique::Joint => "JOINT",
        }
    }

    pub fn components(self) -> Components {
        let (um_mimo, tiles, adaptive_band) = match self {
            Technique::Baseline => (false, None, false),
            Technique::Ummimo => (true, None, false),
            Technique::Reflectarray => (false, Some(TileKind::Reflectarray), false),
            Technique::Hypersurface => (false, Some(TileKind::Hypersurface), false),
            Technique::Joint => (true, Some(TileKind::Hypersurface), true),
        };
        Components {
            um_mimo,
            tiles,
            adaptive_band,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Technique::ALL
            .into_iter()
            .find(|t| t.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown technique {s:?}")))
    }
}

/// Radio settings shared by every grid point; the carrier comes from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSettings {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    /// Bandwidth as a fraction of the carrier.
    pub bandwidth_fraction: f64,
    /// Array used at both ends by UMMIMO and JOINT.
    pub array: ArrayConfig,
}

impl Default for RadioSettings {
    fn default() -> Self {
        Self {
            tx_power_dbm: RadioConfig::DEFAULT_TX_POWER_DBM,
            noise_psd_dbm_hz: RadioConfig::DEFAULT_NOISE_PSD_DBM_HZ,
            bandwidth_fraction: RadioConfig::DEFAULT_BANDWIDTH_FRACTION,
            array: ArrayConfig::um_mimo(),
        }
    }
}

impl RadioSettings {
    pub fn radio(&self, f: f64, um_mimo: bool) -> RadioConfig {
        let mut r = RadioConfig::default_at(f);
        r.tx_power_dbm = self.tx_power_dbm;
        r.noise_psd_dbm_hz = self.noise_psd_dbm_hz;
        r.bandwidth_hz = self.bandwidth_fraction * f;
        if um_mimo {
            r = r.with_arrays(self.array.clone(), self.array.clone());
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileSettings {
    /// Host surfaces; `None` uses the scene's designated hosts.
    pub hosts: Option<Vec<SurfaceId>>,
    pub pitch_m: f64,
    #[serde(flatten)]
    pub model: TileModel,
}

impl Default for TileSettings {
    fn default() -> Self {
        Self {
            hosts: None,
            pitch_m: DEFAULT_TILE_PITCH_M,
            model: TileModel::default(),
        }
    }
}

/// Distance-adaptive band selection used by JOINT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandSettings {
    /// Spectrum samples across the channel; forced odd so the carrier is one.
    pub grid_points: usize,
    pub threshold_db: f64,
}

impl Default for BandSettings {
    fn default() -> Self {
        Self {
            grid_points: 41,
            threshold_db: crate::channel::DEFAULT_WINDOW_THRESHOLD_DB,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub paths: Option<PathBuf>,
}

/// A fully loaded scenario.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene: Scene,
    pub endpoints: EndpointSet,
    pub tile_hosts: Vec<SurfaceId>,
    pub table: AbsorptionTable,
    pub frequencies_hz: Vec<f64>,
    pub techniques: Vec<Technique>,
    pub snr_threshold_db: f64,
    /// 0 disables reflections.
    pub max_order: usize,
    pub radio: RadioSettings,
    pub tiles: TileSettings,
    pub band: BandSettings,
    pub output: OutputPaths,
}

impl RunConfig {
    /// Default hallway, synthetic absorption, three carriers, all techniques.
    pub fn default_hallway() -> Result<Self> {
        let layout = HallwayLayout::default();
        let (scene, endpoints) = layout.build()?;
        Ok(Self {
            scene,
            endpoints,
            tile_hosts: layout.junction_wall_ids(),
            table: AbsorptionTable::synthetic(),
            frequencies_hz: DEFAULT_FREQUENCIES_HZ.to_vec(),
            techniques: Technique::ALL.to_vec(),
            snr_threshold_db: DEFAULT_SNR_THRESHOLD_DB,
            max_order: MAX_ORDER,
            radio: RadioSettings::default(),
            tiles: TileSettings::default(),
            band: BandSettings::default(),
            output: OutputPaths::default(),
        })
    }

    /// Reads a TOML scenario. Relative paths inside it resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| Error::from(e).at_path(path))?;
        file.resolve(path.parent().unwrap_or(Path::new("")))
    }

    pub fn tile_set(&self, kind: TileKind) -> Result<TileSet> {
        let hosts = self.tiles.hosts.as_deref().unwrap_or(&self.tile_hosts);
        TileSet::grid(kind, self.tiles.model, &self.scene, hosts, self.tiles.pitch_m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_order > MAX_ORDER {
            return Err(Error::Config(format!(
                "max_order {} exceeds {MAX_ORDER}",
                self.max_order
            )));
        }
        if !self.snr_threshold_db.is_finite() {
            return Err(Error::Config("SNR threshold must be finite".into()));
        }
        if !(self.radio.bandwidth_fraction > 0.0 && self.radio.bandwidth_fraction < 2.0) {
            return Err(Error::Config(format!(
                "bandwidth fraction {} must lie in (0, 2)",
                self.radio.bandwidth_fraction
            )));
        }
        if self.band.grid_points < 3 {
            return Err(Error::Config("band grid needs at least 3 points".into()));
        }
        let (min_hz, max_hz) = self.table.range();
        let adaptive = self.techniques.iter().any(|t| t.components().adaptive_band);
        for &f in &self.frequencies_hz {
            let half = if adaptive { 0.5 * self.radio.bandwidth_fraction * f } else { 0.0 };
            if !(f > 0.0) || !self.table.contains(f - half) || !self.table.contains(f + half) {
                return Err(Error::FrequencyOutOfRange {
                    frequency_hz: f,
                    min_hz,
                    max_hz,
                });
            }
            self.radio.radio(f, true).validate()?;
        }
        let mut ids: Vec<u32> = self.endpoints.rx.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("receiver id {} appears twice", w[0])));
        }
        Ok(())
    }
}

/// On-disk scenario layout.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub frequencies_hz: Option<Vec<f64>>,
    pub techniques: Option<Vec<Technique>>,
    pub snr_threshold_db: Option<f64>,
    pub max_order: Option<usize>,
    pub scene: SceneBlock,
    pub absorption: AbsorptionBlock,
    pub radio: RadioSettings,
    pub tiles: TileSettings,
    pub allocation: BandSettings,
    pub output: OutputPaths,
}

/// Either a scene document or the hallway builder's dimensions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneBlock {
    pub file: Option<PathBuf>,
    pub corridor_width_m: Option<f64>,
    pub arm_length_m: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorptionBlock {
    /// Comma-separated table; the built-in synthetic table when absent.
    pub file: Option<PathBuf>,
}

impl ScenarioFile {
    pub fn resolve(self, base: &Path) -> Result<RunConfig> {
        let mut cfg = RunConfig::default_hallway()?;
        if let Some(file) = &self.scene.file {
            if self.scene.corridor_width_m.is_some() || self.scene.arm_length_m.is_some() {
                return Err(Error::Config(
                    "scene.file cannot be combined with hallway dimensions".into(),
                ));
            }
            let (scene, endpoints, hosts) = load_scene(&base.join(file))?;
            cfg.scene = scene;
            cfg.endpoints = endpoints;
            cfg.tile_hosts = hosts;
        } else if self.scene.corridor_width_m.is_some() || self.scene.arm_length_m.is_some() {
            let mut layout = HallwayLayout::default();
            layout.corridor_width = self.scene.corridor_width_m.unwrap_or(layout.corridor_width);
            layout.arm_length = self.scene.arm_length_m.unwrap_or(layout.arm_length);
            let (scene, endpoints) = layout.build()?;
            cfg.scene = scene;
            cfg.endpoints = endpoints;
            cfg.tile_hosts = layout.junction_wall_ids();
        }
        if let Some(file) = &self.absorption.file {
            cfg.table = load_table(&base.join(file))?;
        }
        if let Some(f) = self.frequencies_hz {
            cfg.frequencies_hz = f;
        }
        if let Some(t) = self.techniques {
            cfg.techniques = t;
        }
        if let Some(t) = self.snr_threshold_db {
            cfg.snr_threshold_db = t;
        }
        if let Some(o) = self.max_order {
            cfg.max_order = o;
        }
        cfg.radio = self.radio;
        cfg.tiles = self.tiles;
        cfg.band = self.allocation;
        let rebase = |p: Option<PathBuf>| p.map(|p| base.join(p));
        cfg.output = OutputPaths {
            csv: rebase(self.output.csv),
            summary: rebase(self.output.summary),
            paths: rebase(self.output.paths),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Scene document with endpoints.
pub fn load_scene(path: &Path) -> Result<(Scene, EndpointSet, Vec<SurfaceId>)> {
    let inner = || -> Result<_> {
        let doc = SceneDocument::read(BufReader::new(File::open(path)?))?;
        let (scene, endpoints, hosts) = doc.into_scene()?;
        let endpoints = endpoints.ok_or_else(|| Error::Config("scene document has no endpoints".into()))?;
        Ok((scene, endpoints, hosts))
    };
    inner().map_err(|e| e.at_path(path))
}

pub fn load_table(path: &Path) -> Result<AbsorptionTable> {
    File::open(path)
        .map_err(Error::from)
        .and_then(AbsorptionTable::load)
        .map_err(|e| e.at_path(path))
}

/// Geometry of one receiver, traced once and shared by every grid point.
#[derive(Debug, Clone)]
struct Traced {
    paths: Vec<PropagationPath>,
    tiles: Vec<TileConfiguration>,
}

/// Results in grid order: technique, then frequency, then receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResults {
    pub techniques: Vec<Technique>,
    pub frequencies_hz: Vec<f64>,
    pub receivers: Vec<Receiver>,
    pub snr_threshold_db: f64,
    pub links: Vec<LinkResult>,
    /// Geometric paths per receiver, in receiver order.
    pub paths: Vec<(u32, Vec<PropagationPath>)>,
}

impl RunResults {
    pub fn get(&self, technique: Technique, f: f64, rx_id: u32) -> Option<&LinkResult> {
        self.links
            .iter()
            .find(|l| l.technique == technique && l.frequency_hz == f && l.rx_id == rx_id)
    }

    pub fn path_records(&self) -> Vec<PathRecord> {
        self.paths
            .iter()
            .flat_map(|(id, ps)| ps.iter().map(move |p| PathRecord::new(*id, p)))
            .collect()
    }
}

/// Evaluates every (technique, frequency, receiver) triple.
pub fn run(cfg: &RunConfig) -> Result<RunResults> {
    cfg.validate()?;
    let tiles = if cfg.techniques.iter().any(|t| t.components().tiles.is_some()) {
        Some(cfg.tile_set(TileKind::Hypersurface)?)
    } else {
        None
    };
    let tx = cfg.endpoints.tx;
    let traced: Vec<Traced> = cfg
        .endpoints
        .rx
        .par_iter()
        .map(|rx| {
            Ok(Traced {
                paths: trace_all(&cfg.scene, &tx, &rx.position, cfg.max_order)?,
                tiles: match &tiles {
                    Some(set) => configure(set, &cfg.scene, &tx, &rx.position)?,
                    None => Vec::new(),
                },
            })
        })
        .collect::<Result<_>>()?;

    let reflectarray = tiles.as_ref().map(|t| t.with_kind(TileKind::Reflectarray));
    let grid: Vec<(Technique, f64, usize)> = cfg
        .techniques
        .iter()
        .flat_map(|&t| {
            cfg.frequencies_hz
                .iter()
                .flat_map(move |&f| (0..cfg.endpoints.rx.len()).map(move |i| (t, f, i)))
        })
        .collect();
    let links = grid
        .par_iter()
        .map(|&(technique, f, i)| {
            let set = match technique.components().tiles {
                Some(TileKind::Hypersurface) => tiles.as_ref(),
                Some(TileKind::Reflectarray) => reflectarray.as_ref(),
                None => None,
            };
            evaluate(cfg, technique, f, &cfg.endpoints.rx[i], &traced[i], set)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunResults {
        techniques: cfg.techniques.clone(),
        frequencies_hz: cfg.frequencies_hz.clone(),
        receivers: cfg.endpoints.rx.clone(),
        snr_threshold_db: cfg.snr_threshold_db,
        links,
        paths: cfg
            .endpoints
            .rx
            .iter()
            .zip(traced)
            .map(|(r, t)| (r.id, t.paths))
            .collect(),
    })
}

fn gains_at(
    cfg: &RunConfig,
    f: f64,
    rx: &Receiver,
    traced: &Traced,
    tiles: Option<&TileSet>,
) -> Result<Vec<PathGain>> {
    let mut gains = traced
        .paths
        .iter()
        .map(|p| path_gain(p, f, &cfg.scene, &cfg.table))
        .collect::<Result<Vec<_>>>()?;
    if let Some(set) = tiles {
        gains.extend(assisted_paths(&traced.tiles, set, &cfg.endpoints.tx, &rx.position, f, &cfg.table)?);
    }
    Ok(gains)
}

fn evaluate(
    cfg: &RunConfig,
    technique: Technique,
    f: f64,
    rx: &Receiver,
    traced: &Traced,
    tiles: Option<&TileSet>,
) -> Result<LinkResult> {
    let parts = technique.components();
    let radio = cfg.radio.radio(f, parts.um_mimo);
    let gains = gains_at(cfg, f, rx, traced, tiles)?;
    let mut result = LinkResult {
        rx_id: rx.id,
        frequency_hz: f,
        technique,
        nominal_distance_m: rx.nominal_distance_m,
        los: rx.los,
        n_paths: gains.len(),
        aggregate_gain_db: None,
        snr_db: None,
        capacity_bps: None,
    };
    if gains.is_empty() {
        return Ok(result);
    }
    let (gain, radio) = if parts.adaptive_band {
        adaptive_band(cfg, f, rx, traced, tiles, &radio, aggregate_gain_db(&gains)?)?
    } else {
        (aggregate_gain_db(&gains)?, radio)
    };
    let snr = snr_db(&radio, gain)?;
    result.aggregate_gain_db = Some(gain);
    result.snr_db = Some(snr);
    result.capacity_bps = Some(capacity_bps(&radio, Some(snr))?);
    Ok(result)
}

/// Picks the operating band inside the channel from the link's own loss
/// spectrum. The carrier is kept when it lies in a spectral window;
/// otherwise the lowest-loss sample is used. Noise is counted over the
/// chosen window only. Returns the gain at the operating frequency and the
/// radio retuned to the window.
fn adaptive_band(
    cfg: &RunConfig,
    f: f64,
    rx: &Receiver,
    traced: &Traced,
    tiles: Option<&TileSet>,
    radio: &RadioConfig,
    gain_at_carrier: f64,
) -> Result<(f64, RadioConfig)> {
    let half = 0.5 * radio.bandwidth_hz;
    let n = cfg.band.grid_points | 1;
    let mut grid = linear_grid(f - half, f + half, n);
    grid[n / 2] = f;
    let mut spectrum = Vec::with_capacity(n);
    for &fi in &grid {
        let gain = if fi == f {
            gain_at_carrier
        } else {
            aggregate_gain_db(&gains_at(cfg, fi, rx, traced, tiles)?)?
        };
        spectrum.push((fi, -gain));
    }
    let windows = spectral_windows(&spectrum, cfg.band.threshold_db);
    let (f_op, loss) = match windows.iter().find(|w| w.contains(f)) {
        Some(_) => (f, -gain_at_carrier),
        None => spectrum
            .iter()
            .copied()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid"),
    };
    let window = windows
        .iter()
        .find(|w| w.contains(f_op))
        .ok_or_else(|| Error::InvalidArgument("operating frequency outside every window".into()))?;
    let mut tuned = radio.clone();
    // A window spanning the whole grid is the full channel.
    if window.f_lo > grid[0] || window.f_hi < grid[n - 1] {
        tuned.bandwidth_hz = window.bandwidth().min(radio.bandwidth_hz);
        tuned.center_frequency_hz = window.center();
    }
    Ok((-loss, tuned))
}

/// Receiver subsets reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Population {
    Los,
    Nlos,
}

impl Population {
    fn admits(self, r: &LinkResult) -> bool {
        r.los == (self == Population::Los)
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Population::Los => "LOS",
            Population::Nlos => "NLOS",
        })
    }
}

/// Distance at which SNR falls to the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reach {
    /// Threshold met at every receiver up to this distance.
    AtLeast(f64),
    /// Threshold missed at every receiver, the nearest being this far.
    Below(f64),
    Distance(f64),
}

impl fmt::Display for Reach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reach::AtLeast(d) => write!(f, ">= {d:.2} m"),
            Reach::Below(d) => write!(f, "< {d:.2} m"),
            Reach::Distance(d) => write!(f, "{d:.2} m"),
        }
    }
}

/// Largest distance whose SNR meets the threshold, interpolated linearly in
/// dB toward the next receiver. Outages count as infinitely low SNR.
pub fn distance_to_threshold(
    results: &RunResults,
    technique: Technique,
    f: f64,
    population: Population,
) -> Result<Reach> {
    let mut pts: Vec<(f64, f64)> = results
        .links
        .iter()
        .filter(|l| l.technique == technique && l.frequency_hz == f && population.admits(l))
        .map(|l| (l.nominal_distance_m, l.snr_db.unwrap_or(f64::NEG_INFINITY)))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{population} population for {technique} at {f:e} Hz has {} receiver(s); need 2",
            pts.len()
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let thr = results.snr_threshold_db;
    let Some(i) = pts.iter().rposition(|p| p.1 >= thr) else {
        return Ok(Reach::Below(pts[0].0));
    };
    if i == pts.len() - 1 {
        return Ok(Reach::AtLeast(pts[i].0));
    }
    let ((d0, s0), (d1, s1)) = (pts[i], pts[i + 1]);
    if s1 == f64::NEG_INFINITY {
        return Ok(Reach::Distance(d0));
    }
    Ok(Reach::Distance(d0 + (s0 - thr) / (s0 - s1) * (d1 - d0)))
}

/// SNR improvement of a technique over BASELINE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainStatistics {
    /// Mean over receivers in service under both; `None` if there are none.
    pub mean_db: Option<f64>,
    pub compared: usize,
    /// In service only with the technique.
    pub rescued: usize,
}

pub fn gain_statistics(
    results: &RunResults,
    technique: Technique,
    f: f64,
    population: Option<Population>,
) -> Result<GainStatistics> {
    if technique == Technique::Baseline {
        return Err(Error::InvalidArgument("gain statistics compare against BASELINE".into()));
    }
    let (mut sum, mut compared, mut rescued) = (0.0, 0, 0);
    for r in &results.receivers {
        let (Some(t), Some(b)) = (
            results.get(technique, f, r.id),
            results.get(Technique::Baseline, f, r.id),
        ) else {
            return Err(Error::InvalidArgument(format!(
                "run lacks {technique} or BASELINE results for rx {} at {f:e} Hz",
                r.id
            )));
        };
        if population.is_some_and(|p| !p.admits(t)) {
            continue;
        }
        match (t.snr_db, b.snr_db) {
            (Some(st), Some(sb)) => {
                sum += st - sb;
                compared += 1;
            }
            (Some(_), None) => rescued += 1,
            _ => {}
        }
    }
    Ok(GainStatistics {
        mean_db: (compared > 0).then(|| sum / compared as f64),
        compared,
        rescued,
    })
}

pub const CSV_HEADER: &str = "technique,frequency_hz,rx_id,nominal_distance_m,los_flag,n_paths,aggregate_gain_db,snr_db,capacity_bps,outage";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Summary,
}

pub fn emit(results: &RunResults, format: Format, out: impl Write) -> Result<()> {
    match format {
        Format::Csv => write_csv(results, out),
        Format::Summary => write_summary(results, out),
    }
}

/// One row per grid point; outage rows leave the numeric fields empty.
pub fn write_csv(results: &RunResults, mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let opt = |v: Option<f64>, prec: usize| v.map(|v| format!("{v:.prec$}")).unwrap_or_default();
    for l in &results.links {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            l.technique,
            l.frequency_hz,
            l.rx_id,
            l.nominal_distance_m,
            l.los,
            l.n_paths,
            opt(l.aggregate_gain_db, 9),
            opt(l.snr_db, 9),
            opt(l.capacity_bps, 3),
            l.in_outage(),
        )?;
    }
    Ok(())
}

/// Reach per population and gain over BASELINE, per technique and carrier.
pub fn write_summary(results: &RunResults, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "{:<13} {:>8} {:>13} {:>13} {:>11} {:>8}",
        "technique", "f_GHz", "LOS reach", "NLOS reach", "gain_dB", "rescued"
    )?;
    let has_baseline = results.techniques.contains(&Technique::Baseline);
    for &t in &results.techniques {
        for &f in &results.frequencies_hz {
            let reach = |p| match distance_to_threshold(results, t, f, p) {
                Ok(r) => r.to_string(),
                Err(_) => "n/a".to_string(),
            };
            let (gain, rescued) = match (t, has_baseline) {
                (Technique::Baseline, _) | (_, false) => ("-".to_string(), "-".to_string()),
                _ => {
                    let s = gain_statistics(results, t, f, None)?;
                    let mean = s.mean_db.map(|m| format!("{m:.2}")).unwrap_or_else(|| "n/a".into());
                    (mean, s.rescued.to_string())
                }
            };
            writeln!(
                out,
                "{:<13} {:>8.1} {:>13} {:>13} {:>11} {:>8}",
                t.tag(),
                f / 1e9,
                reach(Population::Los),
                reach(Population::Nlos),
                gain,
                rescued
            )?;
        }
    }
    writeln!(out, "threshold {} dB; gains averaged over receivers in service under both", results.snr_threshold_db)?;
    Ok(())
}
