//! Distance-aware spectrum allocation.
//!
//! A spectral window is cut into equal sub-windows numbered outward from its
//! center. The longest links take the center sub-windows, where absorption
//! leaves the most usable bandwidth, and shorter links take the edges.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::{
    absorption_loss_db, absorption_windows, linear_grid, spreading_loss_db, AbsorptionTable,
    SpectralWindow,
};
use crate::devices::shannon_bps;
use crate::{Error, Result};

pub type LinkId = u32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubWindow {
    pub parent: SpectralWindow,
    /// 0 at the center for odd counts; `±1, ±2, ...` outward otherwise.
    pub index_from_center: i32,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl SubWindow {
    pub fn bandwidth(&self) -> f64 {
        self.f_hi - self.f_lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_lo + self.f_hi)
    }

    pub fn as_window(&self) -> SpectralWindow {
        SpectralWindow {
            f_lo: self.f_lo,
            f_hi: self.f_hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkDemand {
    pub link_id: LinkId,
    pub distance_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate_bps: Option<f64>,
}

impl LinkDemand {
    pub fn new(link_id: LinkId, distance_m: f64) -> Result<Self> {
        if !(distance_m > 0.0) || !distance_m.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "link {link_id}: distance {distance_m} m must be positive"
            )));
        }
        Ok(Self {
            link_id,
            distance_m,
            min_rate_bps: None,
        })
    }
}

/// Splits `window` into `n_sub` equal contiguous sub-windows, ordered by
/// frequency. Shared edges are bit-identical.
pub fn partition(window: &SpectralWindow, n_sub: usize) -> Result<Vec<SubWindow>> {
    if n_sub == 0 {
        return Err(Error::InvalidArgument("cannot partition into 0 sub-windows".into()));
    }
    let width = window.bandwidth();
    let edge = |i: usize| match i {
        0 => window.f_lo,
        i if i == n_sub => window.f_hi,
        i => window.f_lo + width * i as f64 / n_sub as f64,
    };
    let n = n_sub as i32;
    Ok((0..n_sub)
        .map(|i| {
            let i32_i = i as i32;
            let index_from_center = if n % 2 == 1 {
                i32_i - n / 2
            } else if i32_i < n / 2 {
                i32_i - n / 2
            } else {
                i32_i - n / 2 + 1
            };
            SubWindow {
                parent: *window,
                index_from_center,
                f_lo: edge(i),
                f_hi: edge(i + 1),
            }
        })
        .collect())
}

/// Assigns sub-windows to links.
pub trait Allocator {
    fn allocate(&self, subs: &[SubWindow], demands: &[LinkDemand]) -> Result<BTreeMap<LinkId, SubWindow>>;
}

/// Longest links first, center sub-windows first.
#[derive(Debug, Clone, Copy, Default)]
pub struct CenterOut;

impl Allocator for CenterOut {
    fn allocate(&self, subs: &[SubWindow], demands: &[LinkDemand]) -> Result<BTreeMap<LinkId, SubWindow>> {
        allocate_center_out(subs, demands)
    }
}

/// Demands sorted by distance descending (then link id) take sub-windows
/// sorted by `|index_from_center|` (then lower frequency).
pub fn allocate_center_out(subs: &[SubWindow], demands: &[LinkDemand]) -> Result<BTreeMap<LinkId, SubWindow>> {
    let mut order: Vec<&LinkDemand> = demands.iter().collect();
    order.sort_by(|a, b| {
        b.distance_m
            .total_cmp(&a.distance_m)
            .then(a.link_id.cmp(&b.link_id))
    });
    if let Some(dup) = order
        .windows(2)
        .find(|w| w[0].link_id == w[1].link_id)
        .map(|w| w[0].link_id)
    {
        return Err(Error::InvalidArgument(format!("link {dup} appears twice")));
    }
    if order.len() > subs.len() {
        let unassigned: Vec<LinkId> = order[subs.len()..].iter().map(|d| d.link_id).collect();
        return Err(Error::Capacity {
            unassigned_count: unassigned.len(),
            unassigned,
        });
    }
    let mut slots: Vec<&SubWindow> = subs.iter().collect();
    slots.sort_by(|a, b| {
        a.index_from_center
            .unsigned_abs()
            .cmp(&b.index_from_center.unsigned_abs())
            .then(a.f_lo.total_cmp(&b.f_lo))
    });
    Ok(order
        .iter()
        .zip(slots)
        .map(|(d, s)| (d.link_id, *s))
        .collect())
}

/// Every assigned link gets `total - 10 log10(n)` dBm.
pub fn equal_power_split<V>(total_power_dbm: f64, assignments: &BTreeMap<LinkId, V>) -> Result<BTreeMap<LinkId, f64>> {
    if assignments.is_empty() {
        return Err(Error::InvalidArgument("no links to share power between".into()));
    }
    let each = total_power_dbm - 10.0 * (assignments.len() as f64).log10();
    Ok(assignments.keys().map(|&id| (id, each)).collect())
}

/// Free-space LOS link model used to estimate per-link rates.
#[derive(Debug, Clone)]
pub struct RateModel<'a> {
    pub table: &'a AbsorptionTable,
    pub noise_psd_dbm_hz: f64,
    /// Sum of Tx and Rx antenna gains, dBi.
    pub antenna_gain_dbi: f64,
    /// When set, only the absorption windows inside each sub-window (at this
    /// threshold, dB) count as usable bandwidth.
    pub usable_threshold_db: Option<f64>,
    /// Samples per sub-window when extracting usable windows.
    pub grid_points: usize,
}

impl RateModel<'_> {
    fn loss_db(&self, f: f64, d: f64) -> Result<f64> {
        Ok(spreading_loss_db(f, d)? + absorption_loss_db(f, d, self.table)?)
    }

    /// Usable bands of `sub` for a link of length `d`.
    pub fn usable_bands(&self, sub: &SubWindow, d: f64) -> Result<Vec<SpectralWindow>> {
        let Some(threshold) = self.usable_threshold_db else {
            return Ok(vec![sub.as_window()]);
        };
        let spectrum = linear_grid(sub.f_lo, sub.f_hi, self.grid_points.max(2))
            .into_iter()
            .map(|f| Ok((f, self.loss_db(f, d)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(absorption_windows(&spectrum, threshold))
    }

    /// Rate with `power_dbm` spread evenly over the usable bands; each band
    /// is priced at its center frequency.
    pub fn achievable_rate_bps(&self, sub: &SubWindow, d: f64, power_dbm: f64) -> Result<f64> {
        let bands = self.usable_bands(sub, d)?;
        let usable: f64 = bands.iter().map(SpectralWindow::bandwidth).sum();
        let noise = self.noise_psd_dbm_hz + 10.0 * usable.log10();
        let mut rate = 0.0;
        for b in &bands {
            let snr = power_dbm + self.antenna_gain_dbi - self.loss_db(b.center(), d)? - noise;
            rate += shannon_bps(b.bandwidth(), snr);
        }
        Ok(rate)
    }
}

/// One row of the allocation report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationRow {
    pub link_id: LinkId,
    pub distance_m: f64,
    pub sub_f_lo_hz: f64,
    pub sub_f_hi_hz: f64,
    pub power_dbm: f64,
    pub achievable_rate_bps: f64,
}

/// Partitions, assigns, splits power, and prices every link. Rows follow
/// link id order.
pub fn allocation_report(
    window: &SpectralWindow,
    n_sub: usize,
    demands: &[LinkDemand],
    total_power_dbm: f64,
    allocator: &dyn Allocator,
    rates: &RateModel<'_>,
) -> Result<Vec<AllocationRow>> {
    let subs = partition(window, n_sub)?;
    let assigned = allocator.allocate(&subs, demands)?;
    let power = equal_power_split(total_power_dbm, &assigned)?;
    let distance: BTreeMap<LinkId, f64> = demands.iter().map(|d| (d.link_id, d.distance_m)).collect();
    assigned
        .iter()
        .map(|(&id, sub)| {
            let d = distance[&id];
            Ok(AllocationRow {
                link_id: id,
                distance_m: d,
                sub_f_lo_hz: sub.f_lo,
                sub_f_hi_hz: sub.f_hi,
                power_dbm: power[&id],
                achievable_rate_bps: rates.achievable_rate_bps(sub, d, power[&id])?,
            })
        })
        .collect()
}

pub fn write_allocation_csv(rows: &[AllocationRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "link_id,distance_m,sub_f_lo_hz,sub_f_hi_hz,power_dbm,achievable_rate_bps")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6e}",
            r.link_id, r.distance_m, r.sub_f_lo_hz, r.sub_f_hi_hz, r.power_dbm, r.achievable_rate_bps
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn thz_window() -> SpectralWindow {
        SpectralWindow::new(0.2e12, 0.3e12).unwrap()
    }

    fn demands(distances: &[f64]) -> Vec<LinkDemand> {
        distances
            .iter()
            .enumerate()
            .map(|(i, &d)| LinkDemand::new(i as LinkId, d).unwrap())
            .collect()
    }

    #[test]
    fn single_sub_window_is_the_window() {
        let subs = partition(&thz_window(), 1).unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!((subs[0].f_lo, subs[0].f_hi, subs[0].index_from_center), (0.2e12, 0.3e12, 0));
    }

    #[test]
    fn odd_partition_has_zero_center() {
        let subs = partition(&thz_window(), 3).unwrap();
        for s in &subs {
            assert!((s.bandwidth() - 100e9 / 3.0).abs() < 1.0);
        }
        assert_eq!(subs.iter().map(|s| s.index_from_center).collect::<Vec<_>>(), [-1, 0, 1]);
    }

    #[test]
    fn even_partition_skips_zero() {
        let subs = partition(&thz_window(), 4).unwrap();
        assert_eq!(subs.iter().map(|s| s.index_from_center).collect::<Vec<_>>(), [-2, -1, 1, 2]);
        assert!(matches!(partition(&thz_window(), 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn longest_link_takes_the_center() {
        let subs = partition(&thz_window(), 3).unwrap();
        let a = allocate_center_out(&subs, &demands(&[80.0, 40.0, 10.0])).unwrap();
        assert_eq!(a[&0].index_from_center, 0);
        assert_eq!(a[&1].index_from_center, -1);
        assert_eq!(a[&2].index_from_center, 1);
    }

    #[test]
    fn lone_demand_takes_the_center() {
        for n in [1, 2, 5, 8] {
            let subs = partition(&thz_window(), n).unwrap();
            let a = allocate_center_out(&subs, &demands(&[7.0])).unwrap();
            assert_eq!(a[&0].index_from_center.abs(), if n % 2 == 1 { 0 } else { 1 });
        }
    }

    #[test]
    fn equal_distances_break_ties_by_link_id() {
        let subs = partition(&thz_window(), 3).unwrap();
        let d = vec![
            LinkDemand::new(9, 50.0).unwrap(),
            LinkDemand::new(3, 50.0).unwrap(),
        ];
        let a = allocate_center_out(&subs, &d).unwrap();
        assert_eq!(a[&3].index_from_center, 0);
        assert_eq!(a[&9].index_from_center, -1);
    }

    #[test]
    fn too_many_demands_is_a_capacity_error() {
        let subs = partition(&thz_window(), 2).unwrap();
        match allocate_center_out(&subs, &demands(&[10.0, 20.0, 30.0, 40.0])) {
            Err(Error::Capacity { unassigned_count, unassigned }) => {
                assert_eq!(unassigned_count, 2);
                assert_eq!(unassigned, [1, 0]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_link_ids_are_rejected() {
        let subs = partition(&thz_window(), 3).unwrap();
        let d = vec![LinkDemand::new(1, 5.0).unwrap(), LinkDemand::new(1, 6.0).unwrap()];
        assert!(allocate_center_out(&subs, &d).is_err());
        assert!(LinkDemand::new(1, 0.0).is_err());
    }

    #[test]
    fn power_split_examples() {
        let subs = partition(&thz_window(), 10).unwrap();
        let two = allocate_center_out(&subs, &demands(&[1.0, 2.0])).unwrap();
        let p = equal_power_split(10.0, &two).unwrap();
        assert!(p.values().all(|&v| (v - 6.9897).abs() < 1e-4));
        let one = allocate_center_out(&subs, &demands(&[1.0])).unwrap();
        assert_eq!(equal_power_split(10.0, &one).unwrap()[&0], 10.0);
        let ten = allocate_center_out(&subs, &demands(&(1..=10).map(f64::from).collect::<Vec<_>>())).unwrap();
        assert!(equal_power_split(10.0, &ten).unwrap().values().all(|&v| v.abs() < 1e-12));
        assert!(equal_power_split(10.0, &BTreeMap::<LinkId, SubWindow>::new()).is_err());
    }

    #[test]
    fn usable_bandwidth_shrinks_with_distance_near_a_line() {
        let table = AbsorptionTable::synthetic();
        let rates = RateModel {
            table: &table,
            noise_psd_dbm_hz: -160.0,
            antenna_gain_dbi: 60.0,
            usable_threshold_db: Some(3.0),
            grid_points: 201,
        };
        let sub = partition(&SpectralWindow::new(540e9, 580e9).unwrap(), 1).unwrap()[0];
        let usable = |d: f64| -> f64 { rates.usable_bands(&sub, d).unwrap().iter().map(|w| w.bandwidth()).sum() };
        assert!(usable(100.0) < usable(1.0));
        let plain = RateModel { usable_threshold_db: None, ..rates.clone() };
        assert_eq!(plain.usable_bands(&sub, 100.0).unwrap(), vec![sub.as_window()]);
    }

    #[test]
    fn report_rows_and_csv() {
        let table = AbsorptionTable::synthetic();
        let rates = RateModel {
            table: &table,
            noise_psd_dbm_hz: -160.0,
            antenna_gain_dbi: 60.0,
            usable_threshold_db: None,
            grid_points: 41,
        };
        let rows = allocation_report(&thz_window(), 3, &demands(&[80.0, 40.0, 10.0]), 10.0, &CenterOut, &rates).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.achievable_rate_bps > 0.0));
        let mut buf = Vec::new();
        write_allocation_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("link_id,distance_m,sub_f_lo_hz,sub_f_hi_hz,power_dbm,achievable_rate_bps\n0,80,"));
    }

    proptest! {
        #[test]
        fn partition_tiles_the_parent(lo in 1e9..1e12f64, width in 1e6..5e11f64, n in 1usize..40) {
            let w = SpectralWindow::new(lo, lo + width).unwrap();
            let subs = partition(&w, n).unwrap();
            prop_assert_eq!(subs.len(), n);
            prop_assert_eq!(subs[0].f_lo, w.f_lo);
            prop_assert_eq!(subs[n - 1].f_hi, w.f_hi);
            for pair in subs.windows(2) {
                prop_assert_eq!(pair[0].f_hi, pair[1].f_lo);
            }
            let offset = |s: &SubWindow| (s.center() - w.center()).abs();
            for a in &subs {
                for b in &subs {
                    if a.index_from_center.abs() < b.index_from_center.abs() {
                        prop_assert!(offset(a) < offset(b));
                    }
                }
            }
        }

        #[test]
        fn allocation_is_deterministic_and_center_out(
            ds in prop::collection::vec(1.0..100.0f64, 1..12), extra in 0usize..6,
        ) {
            let subs = partition(&thz_window(), ds.len() + extra).unwrap();
            let d = demands(&ds);
            let a = allocate_center_out(&subs, &d).unwrap();
            prop_assert_eq!(&a, &allocate_center_out(&subs, &d).unwrap());
            for x in &d {
                for y in &d {
                    if x.distance_m > y.distance_m {
                        prop_assert!(a[&x.link_id].index_from_center.abs() <= a[&y.link_id].index_from_center.abs());
                    }
                }
            }
        }
    }
}
