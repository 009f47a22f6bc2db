//! Reflectarrays and HyperSurface tiles.
//!
//! A tile with a clear view of both endpoints is steered so that a specular
//! bounce about its normal carries the Tx ray onto the Rx. Each steered tile
//! adds one Tx -> tile -> Rx path. Reflectarrays lose efficiency above a
//! cutoff frequency; HyperSurfaces do not.

use serde::{Deserialize, Serialize};

use crate::channel::{absorption_loss_db, spreading_loss_db, AbsorptionTable, PathGain};
use crate::geometry::{is_occluded, Scene, SurfaceId, GRAZING_TOL};
use crate::raytracer::{PathKind, PropagationPath};
use crate::{Error, Result, Vec3};

pub const DEFAULT_TILE_PITCH_M: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TileKind {
    Reflectarray,
    Hypersurface,
}

/// How the spreading loss of a redirected path is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadingModel {
    /// Mirror-like: one Friis term over `d1 + d2`.
    #[default]
    Specular,
    /// Finite plate: the larger of the specular loss and the far-field
    /// term `20 log10(4 pi d1 d2 / A)`.
    Scatter,
}

/// Redirection parameters shared by every tile of a set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TileModel {
    /// Loss per redirection below the cutoff, dB.
    pub efficiency_db: f64,
    /// Reflectarray only.
    pub cutoff_frequency_hz: f64,
    /// Reflectarray only.
    pub rolloff_db_per_octave: f64,
    pub spreading: SpreadingModel,
}

impl Default for TileModel {
    fn default() -> Self {
        Self {
            efficiency_db: 3.0,
            cutoff_frequency_hz: 120e9,
            rolloff_db_per_octave: 6.0,
            spreading: SpreadingModel::Specular,
        }
    }
}

impl TileModel {
    fn validate(&self) -> Result<()> {
        if !(self.efficiency_db >= 0.0) || !self.efficiency_db.is_finite() {
            return Err(Error::Config(format!(
                "tile efficiency {} dB must be a non-negative loss",
                self.efficiency_db
            )));
        }
        if !(self.cutoff_frequency_hz > 0.0) {
            return Err(Error::Config(format!(
                "cutoff frequency {} Hz must be positive",
                self.cutoff_frequency_hz
            )));
        }
        if !(self.rolloff_db_per_octave >= 0.0) || !self.rolloff_db_per_octave.is_finite() {
            return Err(Error::Config(format!(
                "roll-off {} dB/octave must be non-negative",
                self.rolloff_db_per_octave
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub center: Vec3,
    pub area_m2: f64,
    pub host: SurfaceId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileSet {
    kind: TileKind,
    tiles: Vec<Tile>,
    model: TileModel,
}

impl TileSet {
    /// Checks that every tile sits on its host surface.
    pub fn new(kind: TileKind, tiles: Vec<Tile>, model: TileModel, scene: &Scene) -> Result<Self> {
        model.validate()?;
        for (i, t) in tiles.iter().enumerate() {
            let host = scene
                .surface(t.host)
                .ok_or_else(|| Error::Config(format!("tile {i}: unknown host surface {}", t.host)))?;
            if !host.contains_point(&t.center, GRAZING_TOL) {
                return Err(Error::Config(format!(
                    "tile {i}: center {:?} is not on host surface {}",
                    t.center.as_slice(),
                    t.host
                )));
            }
            if !(t.area_m2 > 0.0) {
                return Err(Error::Config(format!("tile {i}: area must be positive")));
            }
        }
        Ok(Self { kind, tiles, model })
    }

    /// Uniform grid at roughly `pitch` spacing over each host surface. Edges
    /// are divided into `max(1, round(len / pitch))` cells.
    pub fn grid(
        kind: TileKind,
        model: TileModel,
        scene: &Scene,
        hosts: &[SurfaceId],
        pitch: f64,
    ) -> Result<Self> {
        if !(pitch > 0.0) {
            return Err(Error::Config(format!("tile pitch {pitch} m must be positive")));
        }
        let mut tiles = Vec::new();
        for &id in hosts {
            let s = scene
                .surface(id)
                .ok_or_else(|| Error::Config(format!("unknown tile host surface {id}")))?;
            let nu = cells(s.edge_u().norm(), pitch);
            let nv = cells(s.edge_v().norm(), pitch);
            let (du, dv) = (s.edge_u() / nu as f64, s.edge_v() / nv as f64);
            for i in 0..nu {
                for j in 0..nv {
                    tiles.push(Tile {
                        center: s.corner() + (i as f64 + 0.5) * du + (j as f64 + 0.5) * dv,
                        area_m2: du.norm() * dv.norm(),
                        host: id,
                    });
                }
            }
        }
        Self::new(kind, tiles, model, scene)
    }

    /// Same tiles and model under a different kind.
    pub fn with_kind(&self, kind: TileKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn kind(&self) -> TileKind {
        self.kind
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn model(&self) -> &TileModel {
        &self.model
    }

    /// Loss of one redirection at `f`, dB.
    pub fn redirection_loss_db(&self, f: f64) -> f64 {
        let m = &self.model;
        match self.kind {
            TileKind::Reflectarray if f > m.cutoff_frequency_hz => {
                m.efficiency_db + m.rolloff_db_per_octave * (f / m.cutoff_frequency_hz).log2()
            }
            _ => m.efficiency_db,
        }
    }
}

fn cells(len: f64, pitch: f64) -> usize {
    ((len / pitch).round() as usize).max(1)
}

/// Orientation state of one tile for a given endpoint pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileConfiguration {
    pub tile_index: usize,
    pub normal: Vec3,
    pub active: bool,
}

/// Unit normal that reflects the ray from `tx` at `tile` onto `rx`: the
/// bisector of the directions toward `tx` and toward `rx`.
///
/// When the tile lies on the segment between the endpoints the bisector
/// vanishes; any normal perpendicular to the segment then passes the ray
/// straight through, and a fixed one is chosen.
pub fn solve_tile_normal(tx: &Vec3, tile: &Vec3, rx: &Vec3) -> Result<Vec3> {
    let (to_tx, to_rx) = (tx - tile, rx - tile);
    if to_tx.norm() == 0.0 || to_rx.norm() == 0.0 {
        return Err(Error::InvalidArgument("tile coincides with an endpoint".into()));
    }
    let (a, b) = (to_tx.normalize(), to_rx.normalize());
    let bisector = a + b;
    if bisector.norm() > 1e-12 {
        return Ok(bisector.normalize());
    }
    let axis = a
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(i, _)| i)
        .expect("three components");
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    Ok(a.cross(&e).normalize())
}

/// Steers every tile that sees both endpoints from the front of its host;
/// the rest stay inactive with the host normal. Returns one entry per tile.
pub fn configure(tileset: &TileSet, scene: &Scene, tx: &Vec3, rx: &Vec3) -> Result<Vec<TileConfiguration>> {
    tileset
        .tiles()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let host = scene
                .surface(t.host)
                .ok_or_else(|| Error::Config(format!("unknown tile host surface {}", t.host)))?;
            let (stx, srx) = (host.signed_distance(tx), host.signed_distance(rx));
            let same_side = (stx > GRAZING_TOL && srx > GRAZING_TOL) || (stx < -GRAZING_TOL && srx < -GRAZING_TOL);
            let visible = same_side
                && !is_occluded(tx, &t.center, scene, &[t.host])
                && !is_occluded(&t.center, rx, scene, &[t.host]);
            Ok(if visible {
                TileConfiguration {
                    tile_index: i,
                    normal: solve_tile_normal(tx, &t.center, rx)?,
                    active: true,
                }
            } else {
                TileConfiguration {
                    tile_index: i,
                    normal: host.normal(),
                    active: false,
                }
            })
        })
        .collect()
}

/// One SURFACE_ASSISTED path per active tile, priced at `f`.
pub fn assisted_paths(
    config: &[TileConfiguration],
    tileset: &TileSet,
    tx: &Vec3,
    rx: &Vec3,
    f: f64,
    table: &AbsorptionTable,
) -> Result<Vec<PathGain>> {
    let redirection = tileset.redirection_loss_db(f);
    let mut out = Vec::new();
    for c in config.iter().filter(|c| c.active) {
        let tile = tileset.tiles().get(c.tile_index).ok_or_else(|| {
            Error::InvalidArgument(format!("configuration names missing tile {}", c.tile_index))
        })?;
        let path = PropagationPath::new(PathKind::SurfaceAssisted, vec![*tx, tile.center, *rx], vec![tile.host]);
        let (d1, d2) = ((tile.center - tx).norm(), (rx - tile.center).norm());
        let mut spreading = spreading_loss_db(f, d1 + d2)?;
        if tileset.model.spreading == SpreadingModel::Scatter {
            let plate = 20.0 * (4.0 * std::f64::consts::PI * d1 * d2 / tile.area_m2).log10();
            spreading = spreading.max(plate);
        }
        let absorption = absorption_loss_db(f, d1 + d2, table)?;
        out.push(PathGain::from_losses(path, f, spreading, absorption, redirection));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{aggregate_gain_db, path_gain};
    use crate::geometry::HallwayLayout;
    use crate::geometry::{Material, Surface};
    use crate::raytracer::{specular_error_rad, trace_all, validate_path, MAX_ORDER};
    use proptest::prelude::*;

    /// Wall in the plane y = 0 spanning x in [-2, 2], z in [0, 3].
    fn wall_scene() -> Scene {
        let wall = Surface::new(0, Vec3::new(-2.0, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 3.0), 0)
            .unwrap();
        Scene::new(vec![wall], vec![Material::new(0, "wall", 0.75).unwrap()], 3.0).unwrap()
    }

    fn one_tile(kind: TileKind, model: TileModel) -> (Scene, TileSet) {
        let scene = wall_scene();
        let tiles = vec![Tile { center: Vec3::new(0.0, 0.0, 1.5), area_m2: 0.25, host: 0 }];
        let set = TileSet::new(kind, tiles, model, &scene).unwrap();
        (scene, set)
    }

    #[test]
    fn symmetric_triple_gives_axis_normal() {
        let n = solve_tile_normal(&Vec3::new(-1.0, 1.0, 0.0), &Vec3::zeros(), &Vec3::new(1.0, 1.0, 0.0)).unwrap();
        assert!((n - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn mirror_image_rx_gets_host_normal() {
        let scene = wall_scene();
        let host = &scene.surfaces()[0];
        let tx = Vec3::new(-1.0, 2.0, 1.0);
        let tile = Vec3::new(0.5, 0.0, 1.7);
        // Rx on the specular ray from tx through the tile.
        let image = crate::geometry::mirror_point(&tx, host);
        let rx = tile + 1.3 * (tile - image);
        let n = solve_tile_normal(&tx, &tile, &rx).unwrap();
        assert!(n.cross(&host.normal()).norm() < 1e-12);
    }

    #[test]
    fn degenerate_triples() {
        let tile = Vec3::zeros();
        let n = solve_tile_normal(&Vec3::new(-2.0, 0.0, 0.0), &tile, &Vec3::new(3.0, 0.0, 0.0)).unwrap();
        assert!((n.norm() - 1.0).abs() < 1e-12 && n.x.abs() < 1e-12);
        let n = solve_tile_normal(&Vec3::new(0.0, 1.0, 0.0), &tile, &Vec3::new(0.0, 4.0, 0.0)).unwrap();
        assert!((n - Vec3::y()).norm() < 1e-12);
        assert!(solve_tile_normal(&tile, &tile, &Vec3::x()).is_err());
    }

    #[test]
    fn hypersurface_loss_is_friis_over_total_distance_plus_efficiency() {
        let (_, set) = one_tile(TileKind::Hypersurface, TileModel::default());
        let table = AbsorptionTable::flat(0.0, 1e9, 2e12).unwrap();
        let tile = set.tiles()[0].center;
        // d1 = d2 = 10 m, mirror-symmetric about the tile normal.
        let (tx, rx) = (tile + 10.0 * Vec3::new(-0.6, 0.8, 0.0), tile + 10.0 * Vec3::new(0.6, 0.8, 0.0));
        let cfg = [TileConfiguration { tile_index: 0, normal: Vec3::y(), active: true }];
        let g = assisted_paths(&cfg, &set, &tx, &rx, 0.3e12, &table).unwrap();
        assert_eq!(g.len(), 1);
        let expected = spreading_loss_db(0.3e12, 20.0).unwrap() + 3.0;
        assert!((-g[0].total_gain_db - expected).abs() < 1e-9);
        assert_eq!(g[0].path.kind, PathKind::SurfaceAssisted);
    }

    #[test]
    fn reflectarray_rolls_off_one_octave_above_cutoff() {
        let (_, ra) = one_tile(TileKind::Reflectarray, TileModel::default());
        let hs = ra.with_kind(TileKind::Hypersurface);
        assert_eq!(ra.redirection_loss_db(240e9) - hs.redirection_loss_db(240e9), 6.0);
        assert_eq!(ra.redirection_loss_db(120e9), ra.redirection_loss_db(60e9));
        assert_eq!(ra.redirection_loss_db(120e9), hs.redirection_loss_db(120e9));
    }

    #[test]
    fn inactive_tiles_add_nothing() {
        let (_, set) = one_tile(TileKind::Hypersurface, TileModel::default());
        let table = AbsorptionTable::flat(0.0, 1e9, 2e12).unwrap();
        let cfg = [TileConfiguration { tile_index: 0, normal: Vec3::y(), active: false }];
        let g = assisted_paths(&cfg, &set, &Vec3::new(-1.0, 1.0, 1.0), &Vec3::new(1.0, 1.0, 1.0), 1e11, &table).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn scatter_model_never_beats_specular() {
        let model = TileModel { spreading: SpreadingModel::Scatter, ..TileModel::default() };
        let (_, scatter) = one_tile(TileKind::Hypersurface, model);
        let (_, specular) = one_tile(TileKind::Hypersurface, TileModel::default());
        let table = AbsorptionTable::flat(0.0, 1e9, 2e12).unwrap();
        let cfg = [TileConfiguration { tile_index: 0, normal: Vec3::y(), active: true }];
        for d in [0.5, 5.0, 50.0, 500.0] {
            let tx = Vec3::new(-d, d, 1.5);
            let rx = Vec3::new(d, d, 1.5);
            let a = assisted_paths(&cfg, &scatter, &tx, &rx, 1e11, &table).unwrap()[0].total_gain_db;
            let b = assisted_paths(&cfg, &specular, &tx, &rx, 1e11, &table).unwrap()[0].total_gain_db;
            assert!(a <= b);
        }
        // Far away the plate term dominates.
        let (tx, rx) = (Vec3::new(-500.0, 500.0, 1.5), Vec3::new(500.0, 500.0, 1.5));
        let a = assisted_paths(&cfg, &scatter, &tx, &rx, 1e11, &table).unwrap()[0].total_gain_db;
        let b = assisted_paths(&cfg, &specular, &tx, &rx, 1e11, &table).unwrap()[0].total_gain_db;
        assert!(a < b);
    }

    #[test]
    fn tiles_must_sit_on_their_host() {
        let scene = wall_scene();
        let off = vec![Tile { center: Vec3::new(0.0, 0.1, 1.0), area_m2: 0.25, host: 0 }];
        assert!(TileSet::new(TileKind::Hypersurface, off, TileModel::default(), &scene).is_err());
        let bad_model = TileModel { efficiency_db: -1.0, ..TileModel::default() };
        assert!(TileSet::new(TileKind::Hypersurface, vec![], bad_model, &scene).is_err());
    }

    #[test]
    fn grid_covers_each_host() {
        let scene = wall_scene();
        let set = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &[0], 0.5).unwrap();
        assert_eq!(set.tiles().len(), 8 * 6);
        let area: f64 = set.tiles().iter().map(|t| t.area_m2).sum();
        assert!((area - 12.0).abs() < 1e-9);
    }

    #[test]
    fn default_hallway_grid_has_108_tiles() {
        let layout = HallwayLayout::default();
        let (scene, _) = layout.build().unwrap();
        let set = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &layout.junction_wall_ids(), DEFAULT_TILE_PITCH_M)
            .unwrap();
        assert_eq!(set.tiles().len(), 108);
    }

    #[test]
    fn nlos_arm_receivers_get_active_tiles() {
        let layout = HallwayLayout::default();
        let (scene, ends) = layout.build().unwrap();
        let set = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &layout.junction_wall_ids(), DEFAULT_TILE_PITCH_M)
            .unwrap();
        for rx in ends.rx.iter().filter(|r| !r.los) {
            let cfg = configure(&set, &scene, &ends.tx, &rx.position).unwrap();
            assert_eq!(cfg.len(), set.tiles().len());
            let active: Vec<_> = cfg.iter().filter(|c| c.active).collect();
            assert!(!active.is_empty(), "rx {}", rx.id);
            for c in &active {
                let path = PropagationPath::new(
                    PathKind::SurfaceAssisted,
                    vec![ends.tx, set.tiles()[c.tile_index].center, rx.position],
                    vec![set.tiles()[c.tile_index].host],
                );
                assert!(validate_path(&path, &scene));
            }
        }
    }

    #[test]
    fn occluded_tiles_stay_inactive() {
        // A blocker between the endpoints and the tiled wall.
        let wall = Surface::new(0, Vec3::new(-2.0, 0.0, 0.0), Vec3::new(4.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 3.0), 0).unwrap();
        let blocker =
            Surface::new(1, Vec3::new(-5.0, 1.0, -1.0), Vec3::new(10.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 5.0), 0).unwrap();
        let scene = Scene::new(vec![wall, blocker], vec![Material::new(0, "wall", 0.75).unwrap()], 3.0).unwrap();
        let set = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &[0], 0.5).unwrap();
        let (tx, rx) = (Vec3::new(-1.0, 3.0, 1.5), Vec3::new(1.0, 3.0, 1.5));
        assert!(trace_all(&scene, &tx, &rx, 0).unwrap().len() == 1);
        let cfg = configure(&set, &scene, &tx, &rx).unwrap();
        assert!(cfg.iter().all(|c| !c.active && c.normal == scene.surfaces()[0].normal()));
    }

    #[test]
    fn tiles_behind_the_host_stay_inactive() {
        let scene = wall_scene();
        let set = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &[0], 0.5).unwrap();
        let cfg = configure(&set, &scene, &Vec3::new(-1.0, 2.0, 1.0), &Vec3::new(1.0, -2.0, 1.0)).unwrap();
        assert!(cfg.iter().all(|c| !c.active));
    }

    #[test]
    fn normals_respect_mirror_symmetry() {
        // The scene and tile grid are symmetric under x -> -x, which swaps tx and rx.
        let scene = wall_scene();
        let set = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &[0], 0.5).unwrap();
        let (tx, rx) = (Vec3::new(-1.2, 2.0, 1.1), Vec3::new(1.2, 2.0, 1.1));
        let cfg = configure(&set, &scene, &tx, &rx).unwrap();
        let flip = |v: &Vec3| Vec3::new(-v.x, v.y, v.z);
        for c in cfg.iter().filter(|c| c.active) {
            let center = set.tiles()[c.tile_index].center;
            let twin = cfg
                .iter()
                .find(|o| (set.tiles()[o.tile_index].center - flip(&center)).norm() < 1e-12)
                .expect("mirrored tile exists");
            assert!(twin.active);
            assert!((twin.normal - flip(&c.normal)).norm() < 1e-12);
        }
    }

    #[test]
    fn assisted_paths_only_add_gain_and_reflectarray_never_beats_hypersurface() {
        let layout = HallwayLayout::default();
        let (scene, ends) = layout.build().unwrap();
        let hs = TileSet::grid(TileKind::Hypersurface, TileModel::default(), &scene, &layout.junction_wall_ids(), DEFAULT_TILE_PITCH_M)
            .unwrap();
        let ra = hs.with_kind(TileKind::Reflectarray);
        let table = AbsorptionTable::synthetic();
        let rx = ends.rx.iter().find(|r| r.id == 4).unwrap().position;
        let base: Vec<_> = trace_all(&scene, &ends.tx, &rx, MAX_ORDER)
            .unwrap()
            .iter()
            .map(|p| path_gain(p, 300e9, &scene, &table).unwrap())
            .collect();
        let cfg = configure(&hs, &scene, &ends.tx, &rx).unwrap();
        let base_gain = aggregate_gain_db(&base).unwrap();
        for f in [60e9, 120e9, 300e9] {
            let with = |set: &TileSet| {
                let mut all: Vec<_> = base.iter().map(|g| path_gain(&g.path, f, &scene, &table).unwrap()).collect();
                all.extend(assisted_paths(&cfg, set, &ends.tx, &rx, f, &table).unwrap());
                aggregate_gain_db(&all).unwrap()
            };
            let (g_hs, g_ra) = (with(&hs), with(&ra));
            if f <= 120e9 {
                assert_eq!(g_hs, g_ra);
            } else {
                assert!(g_ra <= g_hs);
                assert!(g_hs >= base_gain);
            }
        }
        let off: Vec<_> = cfg.iter().map(|c| TileConfiguration { active: false, ..*c }).collect();
        assert!(assisted_paths(&off, &hs, &ends.tx, &rx, 300e9, &table).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn solved_normal_reflects_tx_onto_rx(
            tx in prop::array::uniform3(-10.0..10.0f64),
            tile in prop::array::uniform3(-10.0..10.0f64),
            rx in prop::array::uniform3(-10.0..10.0f64),
        ) {
            let (tx, tile, rx) = (Vec3::from(tx), Vec3::from(tile), Vec3::from(rx));
            prop_assume!((tx - tile).norm() > 1e-3 && (rx - tile).norm() > 1e-3);
            let n = solve_tile_normal(&tx, &tile, &rx).unwrap();
            prop_assert!((n.norm() - 1.0).abs() < 1e-12);
            prop_assert!(specular_error_rad(&(tile - tx), &(rx - tile), &n) < 1e-9);
        }
    }
}
