//! Transceiver models: array gain, noise, SNR and capacity.
//!
//! Array gain is the ideal aperture gain `10 log10(N)` unless an explicit
//! figure is configured. Spatial multiplexing splits the aperture and the
//! transmit power evenly across streams.

use serde::{Deserialize, Serialize};

use crate::channel::{power_sum_db, PathGain, SpectralWindow};
use crate::experiment::Technique;
use crate::{Error, Result};

/// Operating mode of an antenna array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ArrayMode {
    Omni,
    Bf,
    Sm,
    Hybrid,
}

/// An `m x n` grid of subarrays, each holding `p x q` elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    #[serde(default = "one")]
    pub subarrays_m: u32,
    #[serde(default = "one")]
    pub subarrays_n: u32,
    #[serde(default = "one")]
    pub elements_p: u32,
    #[serde(default = "one")]
    pub elements_q: u32,
    pub mode: ArrayMode,
    /// Full-aperture gain override, dBi.
    #[serde(default)]
    pub explicit_gain_dbi: Option<f64>,
    #[serde(default = "one")]
    pub sm_streams: u32,
}

fn one() -> u32 {
    1
}

impl ArrayConfig {
    /// Single isotropic element.
    pub fn omni() -> Self {
        Self {
            subarrays_m: 1,
            subarrays_n: 1,
            elements_p: 1,
            elements_q: 1,
            mode: ArrayMode::Omni,
            explicit_gain_dbi: None,
            sm_streams: 1,
        }
    }

    /// 1024 elements as 4x4 subarrays of 8x8, beamforming at 30 dBi.
    pub fn um_mimo() -> Self {
        Self {
            subarrays_m: 4,
            subarrays_n: 4,
            elements_p: 8,
            elements_q: 8,
            mode: ArrayMode::Bf,
            explicit_gain_dbi: Some(30.0),
            sm_streams: 4,
        }
    }

    pub fn with_mode(mut self, mode: ArrayMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn total_elements(&self) -> u64 {
        [self.subarrays_m, self.subarrays_n, self.elements_p, self.elements_q]
            .iter()
            .map(|&c| u64::from(c))
            .product()
    }

    pub fn subarray_count(&self) -> u32 {
        self.subarrays_m.saturating_mul(self.subarrays_n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_elements() == 0 {
            return Err(Error::Config("array needs at least one element".into()));
        }
        if matches!(self.mode, ArrayMode::Sm | ArrayMode::Hybrid) && self.sm_streams == 0 {
            return Err(Error::Config(format!("{:?} mode needs sm_streams >= 1", self.mode)));
        }
        if self.sm_streams > self.subarray_count() {
            return Err(Error::Config(format!(
                "sm_streams {} exceeds the {} subarrays",
                self.sm_streams,
                self.subarray_count()
            )));
        }
        if let Some(g) = self.explicit_gain_dbi {
            if !g.is_finite() {
                return Err(Error::Config(format!("explicit gain {g} is not finite")));
            }
        }
        Ok(())
    }

    /// Gain with the whole aperture steered at one beam; 0 for OMNI.
    pub fn aperture_gain_dbi(&self) -> f64 {
        match self.mode {
            ArrayMode::Omni => 0.0,
            _ => self
                .explicit_gain_dbi
                .unwrap_or_else(|| 10.0 * (self.total_elements() as f64).log10()),
        }
    }

    /// Streams the configured mode transmits.
    pub fn streams(&self) -> u32 {
        match self.mode {
            ArrayMode::Omni | ArrayMode::Bf => 1,
            ArrayMode::Sm | ArrayMode::Hybrid => self.sm_streams,
        }
    }

    /// Largest stream count the hardware supports.
    fn max_streams(&self) -> u32 {
        match self.mode {
            ArrayMode::Omni => 1,
            _ => self.sm_streams.max(1),
        }
    }
}

/// Gain per stream, dBi. SM and HYBRID split the aperture evenly across
/// `sm_streams`; HYBRID is BF over each sub-aperture.
pub fn array_gain_dbi(cfg: &ArrayConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.aperture_gain_dbi() - split_db(cfg.streams()))
}

fn split_db(streams: u32) -> f64 {
    10.0 * f64::from(streams).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_array: ArrayConfig,
    pub rx_array: ArrayConfig,
}

impl RadioConfig {
    pub const DEFAULT_TX_POWER_DBM: f64 = 10.0;
    pub const DEFAULT_NOISE_PSD_DBM_HZ: f64 = -160.0;
    pub const DEFAULT_BANDWIDTH_FRACTION: f64 = 0.1;

    /// 10 dBm, -160 dBm/Hz, bandwidth 10% of the carrier, omni at both ends.
    pub fn default_at(center_frequency_hz: f64) -> Self {
        Self {
            tx_power_dbm: Self::DEFAULT_TX_POWER_DBM,
            noise_psd_dbm_hz: Self::DEFAULT_NOISE_PSD_DBM_HZ,
            center_frequency_hz,
            bandwidth_hz: Self::DEFAULT_BANDWIDTH_FRACTION * center_frequency_hz,
            tx_array: ArrayConfig::omni(),
            rx_array: ArrayConfig::omni(),
        }
    }

    pub fn with_arrays(mut self, tx: ArrayConfig, rx: ArrayConfig) -> Self {
        self.tx_array = tx;
        self.rx_array = rx;
        self
    }

    /// Same radio centered on `window` and occupying all of it.
    pub fn retuned(&self, window: &SpectralWindow) -> Self {
        Self {
            center_frequency_hz: window.center(),
            bandwidth_hz: window.bandwidth(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) || !self.bandwidth_hz.is_finite() {
            return Err(Error::Config(format!("bandwidth {} Hz must be positive", self.bandwidth_hz)));
        }
        if !(self.center_frequency_hz > 0.0) {
            return Err(Error::Config(format!(
                "center frequency {} Hz must be positive",
                self.center_frequency_hz
            )));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return Err(Error::Config("power and noise density must be finite".into()));
        }
        self.tx_array.validate()?;
        self.rx_array.validate()
    }

    /// Thermal noise over the bandwidth, dBm.
    pub fn noise_floor_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Streams both ends run in the configured modes.
    pub fn streams(&self) -> u32 {
        self.tx_array.streams().max(self.rx_array.streams())
    }
}

/// Itemized link budget, all terms in dB(m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    pub aggregate_gain_db: f64,
    pub noise_floor_dbm: f64,
}

impl LinkBudget {
    pub fn new(radio: &RadioConfig, aggregate_gain_db: f64) -> Result<Self> {
        radio.validate()?;
        Ok(Self {
            tx_power_dbm: radio.tx_power_dbm,
            tx_gain_dbi: array_gain_dbi(&radio.tx_array)?,
            rx_gain_dbi: array_gain_dbi(&radio.rx_array)?,
            aggregate_gain_db,
            noise_floor_dbm: radio.noise_floor_dbm(),
        })
    }

    pub fn received_power_dbm(&self) -> f64 {
        self.tx_power_dbm + self.tx_gain_dbi + self.rx_gain_dbi + self.aggregate_gain_db
    }

    pub fn snr_db(&self) -> f64 {
        self.received_power_dbm() - self.noise_floor_dbm
    }
}

/// SNR with the configured array gains applied to the aggregate gain.
pub fn snr_db(radio: &RadioConfig, aggregate_gain_db: f64) -> Result<f64> {
    Ok(LinkBudget::new(radio, aggregate_gain_db)?.snr_db())
}

/// Shannon rate `B log2(1 + snr)` of one stream.
pub fn shannon_bps(bandwidth_hz: f64, snr_db: f64) -> f64 {
    bandwidth_hz * (10f64.powf(snr_db / 10.0)).ln_1p() / std::f64::consts::LN_2
}

/// Capacity for an SNR from [`snr_db`]; `None` marks an outage.
///
/// SM and HYBRID links send `streams` parallel streams, each at the
/// per-stream gain already in `snr_db` and with the transmit power split
/// evenly among them.
pub fn capacity_bps(radio: &RadioConfig, snr_db: Option<f64>) -> Result<f64> {
    let snr = snr_db.ok_or(Error::NoPath)?;
    let streams = radio.streams();
    Ok(f64::from(streams) * shannon_bps(radio.bandwidth_hz, snr - split_db(streams)))
}

/// Sum of per-window capacities, each window its own link at full power.
/// Windows whose gain is `None` are in outage and contribute nothing.
pub fn multiband_capacity_bps(
    radio: &RadioConfig,
    bands: &[(SpectralWindow, Option<f64>)],
) -> Result<f64> {
    let mut total = 0.0;
    for (window, gain) in bands {
        let Some(gain) = gain else { continue };
        let band = radio.retuned(window);
        total += capacity_bps(&band, Some(snr_db(&band, *gain)?))?;
    }
    Ok(total)
}

/// One evaluated option of [`select_mode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCandidate {
    pub mode: ArrayMode,
    pub streams: u32,
    pub capacity_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSelection {
    pub mode: ArrayMode,
    pub streams: u32,
    pub capacity_bps: f64,
    pub candidates: Vec<ModeCandidate>,
}

/// Picks the capacity-maximizing array mode for a path set.
///
/// BF puts the full aperture gain on the strongest path only. SM with
/// `k = min(sm_streams, paths)` and HYBRID with `1 < s < k` map one stream
/// to each of the strongest paths, each stream using `1/s` of the aperture
/// and of the power. Ties go to fewer streams.
pub fn select_mode(radio: &RadioConfig, paths: &[PathGain]) -> Result<ModeSelection> {
    radio.validate()?;
    if paths.is_empty() {
        return Err(Error::NoPath);
    }
    let mut gains: Vec<f64> = paths.iter().map(|p| p.total_gain_db).collect();
    gains.sort_by(|a, b| b.total_cmp(a));
    let full_gain = radio.tx_array.aperture_gain_dbi() + radio.rx_array.aperture_gain_dbi();
    let noise = radio.noise_floor_dbm();

    let mut candidates = Vec::new();
    // Off-beam paths still arrive, at 0 dBi.
    let bf_gain = power_sum_db(
        std::iter::once(gains[0] + full_gain).chain(gains[1..].iter().copied()),
    )
    .expect("non-empty");
    candidates.push(ModeCandidate {
        mode: ArrayMode::Bf,
        streams: 1,
        capacity_bps: shannon_bps(radio.bandwidth_hz, radio.tx_power_dbm + bf_gain - noise),
    });

    let max_streams = radio.tx_array.max_streams().min(radio.rx_array.max_streams());
    let k = max_streams.min(u32::try_from(gains.len()).unwrap_or(u32::MAX));
    let multiplexed = |s: u32| -> f64 {
        // Each end loses the split once; power loses it once more.
        let per_stream = radio.tx_power_dbm + full_gain - 3.0 * split_db(s) - noise;
        gains[..s as usize]
            .iter()
            .map(|g| shannon_bps(radio.bandwidth_hz, per_stream + g))
            .sum()
    };
    candidates.push(ModeCandidate {
        mode: ArrayMode::Sm,
        streams: k,
        capacity_bps: multiplexed(k),
    });
    for s in 2..k {
        candidates.push(ModeCandidate {
            mode: ArrayMode::Hybrid,
            streams: s,
            capacity_bps: multiplexed(s),
        });
    }

    let best = *candidates
        .iter()
        .min_by(|a, b| {
            b.capacity_bps
                .total_cmp(&a.capacity_bps)
                .then(a.streams.cmp(&b.streams))
                .then(a.mode.cmp(&b.mode))
        })
        .expect("BF candidate always present");
    Ok(ModeSelection {
        mode: best.mode,
        streams: best.streams,
        capacity_bps: best.capacity_bps,
        candidates,
    })
}

/// Outcome of one (receiver, frequency, technique) evaluation. Outage
/// results carry no gain, SNR or capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkResult {
    pub rx_id: u32,
    pub frequency_hz: f64,
    pub technique: Technique,
    pub nominal_distance_m: f64,
    pub los: bool,
    pub n_paths: usize,
    pub aggregate_gain_db: Option<f64>,
    pub snr_db: Option<f64>,
    pub capacity_bps: Option<f64>,
}

impl LinkResult {
    pub fn in_outage(&self) -> bool {
        self.snr_db.is_none()
    }
}
