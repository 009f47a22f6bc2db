//! Rectangular-surface scenes, geometric predicates, and the E-shaped
//! hallway scenario.
//!
//! A [`Scene`] is a set of planar rectangles, each tagged with a
//! [`Material`] whose reflectance is a frequency-independent power ratio.
//! Every query here is a pure function of immutable data.

pub mod hallway;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

pub use hallway::{build_e_hallway, HallwayLayout};

pub type SurfaceId = u32;
pub type MaterialId = u32;

/// Tolerance for on-plane and inside-rectangle predicates, meters.
pub const GEOMETRY_TOL: f64 = 1e-9;
/// Intersections this close to a segment endpoint do not occlude, meters.
pub const GRAZING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub id: MaterialId,
    pub name: String,
    /// Power reflection coefficient in `[0, 1]`.
    pub reflectance: f64,
}

impl Material {
    pub fn new(id: MaterialId, name: impl Into<String>, reflectance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&reflectance) {
            return Err(Error::Geometry(format!(
                "material {id}: reflectance {reflectance} outside [0, 1]"
            )));
        }
        Ok(Self {
            id,
            name: name.into(),
            reflectance,
        })
    }
}

/// A planar rectangle spanned by two perpendicular edges from `corner`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SurfaceRecord", into = "SurfaceRecord")]
pub struct Surface {
    id: SurfaceId,
    corner: Vec3,
    edge_u: Vec3,
    edge_v: Vec3,
    normal: Vec3,
    material_id: MaterialId,
}

#[derive(Serialize, Deserialize)]
struct SurfaceRecord {
    id: SurfaceId,
    corner: Vec3,
    edge_u: Vec3,
    edge_v: Vec3,
    material_id: MaterialId,
}

impl TryFrom<SurfaceRecord> for Surface {
    type Error = Error;

    fn try_from(r: SurfaceRecord) -> Result<Self> {
        Surface::new(r.id, r.corner, r.edge_u, r.edge_v, r.material_id)
    }
}

impl From<Surface> for SurfaceRecord {
    fn from(s: Surface) -> Self {
        Self {
            id: s.id,
            corner: s.corner,
            edge_u: s.edge_u,
            edge_v: s.edge_v,
            material_id: s.material_id,
        }
    }
}

impl Surface {
    pub fn new(
        id: SurfaceId,
        corner: Vec3,
        edge_u: Vec3,
        edge_v: Vec3,
        material_id: MaterialId,
    ) -> Result<Self> {
        let (lu, lv) = (edge_u.norm(), edge_v.norm());
        if !(lu > 0.0 && lv > 0.0) || !lu.is_finite() || !lv.is_finite() {
            return Err(Error::Geometry(format!("surface {id}: degenerate edges")));
        }
        if edge_u.dot(&edge_v).abs() > GEOMETRY_TOL * lu * lv {
            return Err(Error::Geometry(format!(
                "surface {id}: edges are not perpendicular"
            )));
        }
        if !corner.iter().all(|c| c.is_finite()) {
            return Err(Error::Geometry(format!("surface {id}: non-finite corner")));
        }
        let normal = edge_u.cross(&edge_v).normalize();
        Ok(Self {
            id,
            corner,
            edge_u,
            edge_v,
            normal,
            material_id,
        })
    }

    pub fn id(&self) -> SurfaceId {
        self.id
    }

    pub fn corner(&self) -> Vec3 {
        self.corner
    }

    pub fn edge_u(&self) -> Vec3 {
        self.edge_u
    }

    pub fn edge_v(&self) -> Vec3 {
        self.edge_v
    }

    /// Unit normal, `edge_u × edge_v` normalized.
    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn material_id(&self) -> MaterialId {
        self.material_id
    }

    pub fn area(&self) -> f64 {
        self.edge_u.norm() * self.edge_v.norm()
    }

    pub fn center(&self) -> Vec3 {
        self.corner + 0.5 * (self.edge_u + self.edge_v)
    }

    /// Signed distance from the infinite supporting plane.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.corner).dot(&self.normal)
    }

    /// Whether `p` lies on the plane and within the rectangle, up to `tol` meters.
    pub fn contains_point(&self, p: &Vec3, tol: f64) -> bool {
        if self.signed_distance(p).abs() > tol {
            return false;
        }
        self.within_extents(p, tol)
    }

    // Extent test on the plane projection only.
    fn within_extents(&self, p: &Vec3, tol: f64) -> bool {
        let rel = p - self.corner;
        let (lu, lv) = (self.edge_u.norm(), self.edge_v.norm());
        let u = rel.dot(&self.edge_u) / lu;
        let v = rel.dot(&self.edge_v) / lv;
        u >= -tol && u <= lu + tol && v >= -tol && v <= lv + tol
    }

    /// Intersection of the open segment `(a, b)` with the supporting plane,
    /// as `(t, point)` with `0 < t < 1`. Parallel segments never intersect.
    pub(crate) fn plane_crossing(&self, a: &Vec3, b: &Vec3) -> Option<(f64, Vec3)> {
        let dir = b - a;
        let denom = dir.dot(&self.normal);
        if denom.abs() <= f64::EPSILON * dir.norm() {
            return None;
        }
        let t = (self.corner - a).dot(&self.normal) / denom;
        if t <= 0.0 || t >= 1.0 || !t.is_finite() {
            return None;
        }
        Some((t, a + t * dir))
    }
}

/// Reflects `p` across the infinite plane containing `s`.
pub fn mirror_point(p: &Vec3, s: &Surface) -> Vec3 {
    p - 2.0 * s.signed_distance(p) * s.normal()
}

/// Intersection of the open segment `(a, b)` with the bounded rectangle `s`.
pub fn segment_hits_surface(a: &Vec3, b: &Vec3, s: &Surface) -> Option<Vec3> {
    let (_, p) = s.plane_crossing(a, b)?;
    s.within_extents(&p, GEOMETRY_TOL).then_some(p)
}

/// True iff a surface outside `ignore` crosses the segment strictly between
/// `a` and `b`. Crossings within [`GRAZING_TOL`] of either endpoint are
/// ignored.
pub fn is_occluded(a: &Vec3, b: &Vec3, scene: &Scene, ignore: &[SurfaceId]) -> bool {
    // Canonical endpoint order keeps the predicate exactly symmetric.
    let (a, b) = if lex_less(b, a) { (b, a) } else { (a, b) };
    scene.surfaces().iter().any(|s| {
        if ignore.contains(&s.id()) {
            return false;
        }
        match segment_hits_surface(a, b, s) {
            Some(hit) => (hit - a).norm() > GRAZING_TOL && (hit - b).norm() > GRAZING_TOL,
            None => false,
        }
    })
}

fn lex_less(a: &Vec3, b: &Vec3) -> bool {
    a.iter()
        .zip(b.iter())
        .find(|(x, y)| x != y)
        .is_some_and(|(x, y)| x < y)
}

/// Immutable set of material-tagged rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    surfaces: Vec<Surface>,
    materials: Vec<Material>,
    height: f64,
    surface_index: BTreeMap<SurfaceId, usize>,
    material_index: BTreeMap<MaterialId, usize>,
}

impl Scene {
    pub fn new(surfaces: Vec<Surface>, materials: Vec<Material>, height: f64) -> Result<Self> {
        if !(height > 0.0) {
            return Err(Error::Geometry(format!("scene height {height} must be positive")));
        }
        let mut material_index = BTreeMap::new();
        for (i, m) in materials.iter().enumerate() {
            if !(0.0..=1.0).contains(&m.reflectance) {
                return Err(Error::Geometry(format!(
                    "material {}: reflectance {} outside [0, 1]",
                    m.id, m.reflectance
                )));
            }
            if material_index.insert(m.id, i).is_some() {
                return Err(Error::Geometry(format!("duplicate material id {}", m.id)));
            }
        }
        let mut surface_index = BTreeMap::new();
        for (i, s) in surfaces.iter().enumerate() {
            if !material_index.contains_key(&s.material_id()) {
                return Err(Error::Geometry(format!(
                    "surface {} references unknown material {}",
                    s.id(),
                    s.material_id()
                )));
            }
            if surface_index.insert(s.id(), i).is_some() {
                return Err(Error::Geometry(format!("duplicate surface id {}", s.id())));
            }
        }
        Ok(Self {
            surfaces,
            materials,
            height,
            surface_index,
            material_index,
        })
    }

    /// A scene with no surfaces (free space).
    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), f64::INFINITY).expect("empty scene is valid")
    }

    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn surface(&self, id: SurfaceId) -> Option<&Surface> {
        self.surface_index.get(&id).map(|&i| &self.surfaces[i])
    }

    pub fn material(&self, id: MaterialId) -> Option<&Material> {
        self.material_index.get(&id).map(|&i| &self.materials[i])
    }

    /// Reflectance of the material covering surface `id`.
    pub fn reflectance(&self, id: SurfaceId) -> Option<f64> {
        let s = self.surface(id)?;
        self.material(s.material_id()).map(|m| m.reflectance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub id: u32,
    pub position: Vec3,
    pub los: bool,
    pub nominal_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSet {
    pub tx: Vec3,
    pub rx: Vec<Receiver>,
}

/// On-disk scene layout: materials, surfaces, and optional endpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDocument {
    pub height_m: f64,
    pub materials: Vec<Material>,
    pub surfaces: Vec<Surface>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<EndpointSet>,
    /// Surfaces designated to host tiles, if any.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tile_hosts: Vec<SurfaceId>,
}

impl SceneDocument {
    pub fn from_scene(scene: &Scene, endpoints: Option<&EndpointSet>) -> Self {
        Self {
            height_m: scene.height(),
            materials: scene.materials().to_vec(),
            surfaces: scene.surfaces().to_vec(),
            endpoints: endpoints.cloned(),
            tile_hosts: Vec::new(),
        }
    }

    pub fn into_scene(self) -> Result<(Scene, Option<EndpointSet>, Vec<SurfaceId>)> {
        let scene = Scene::new(self.surfaces, self.materials, self.height_m)?;
        let hosts: BTreeSet<_> = self.tile_hosts.iter().copied().collect();
        if let Some(bad) = hosts.iter().find(|id| scene.surface(**id).is_none()) {
            return Err(Error::Geometry(format!("tile host {bad} is not a scene surface")));
        }
        Ok((scene, self.endpoints, self.tile_hosts))
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn write(&self, mut writer: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wall_x0() -> Surface {
        // Plane x = 0, y in [0, 10], z in [0, 3].
        Surface::new(
            0,
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 10.0, 0.0),
            Vec3::new(0.0, 0.0, 3.0),
            0,
        )
        .unwrap()
    }

    fn floor_z0() -> Surface {
        Surface::new(
            1,
            Vec3::new(-5.0, -5.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 10.0, 0.0),
            0,
        )
        .unwrap()
    }

    fn one_material() -> Vec<Material> {
        vec![Material::new(0, "concrete", 0.75).unwrap()]
    }

    #[test]
    fn rejects_bad_surfaces_and_materials() {
        let z = Vec3::zeros();
        assert!(Surface::new(0, z, Vec3::x(), Vec3::new(1.0, 1.0, 0.0), 0).is_err());
        assert!(Surface::new(0, z, Vec3::zeros(), Vec3::y(), 0).is_err());
        assert!(Material::new(0, "x", 1.2).is_err());
        assert!(Material::new(0, "x", -0.1).is_err());
        let s = Surface::new(0, z, Vec3::x(), Vec3::y(), 7).unwrap();
        assert!(Scene::new(vec![s], one_material(), 3.0).is_err());
    }

    #[test]
    fn normal_is_unit_and_perpendicular() {
        let s = wall_x0();
        assert!((s.normal().norm() - 1.0).abs() < 1e-12);
        assert_eq!(s.normal().dot(&s.edge_u()), 0.0);
        assert_eq!(s.area(), 30.0);
    }

    #[test]
    fn mirror_examples() {
        let p = mirror_point(&Vec3::new(5.0, 5.0, 2.95), &wall_x0());
        assert!((p - Vec3::new(-5.0, 5.0, 2.95)).norm() < 1e-12);
        let on_plane = Vec3::new(0.0, 3.0, 1.0);
        assert_eq!(mirror_point(&on_plane, &wall_x0()), on_plane);
        let p = mirror_point(&Vec3::new(1.0, 2.0, 3.0), &floor_z0());
        assert!((p - Vec3::new(1.0, 2.0, -3.0)).norm() < 1e-12);
    }

    #[test]
    fn segment_hits_center() {
        let s = wall_x0();
        let hit = segment_hits_surface(&Vec3::new(-1.0, 5.0, 1.5), &Vec3::new(1.0, 5.0, 1.5), &s);
        assert!((hit.unwrap() - s.center()).norm() < 1e-12);
    }

    #[test]
    fn segment_parallel_or_outside_misses() {
        let s = wall_x0();
        // Parallel, offset from the plane.
        assert!(segment_hits_surface(&Vec3::new(1.0, 1.0, 1.0), &Vec3::new(1.0, 9.0, 1.0), &s)
            .is_none());
        // Lying in the plane.
        assert!(segment_hits_surface(&Vec3::new(0.0, 1.0, 1.0), &Vec3::new(0.0, 9.0, 1.0), &s)
            .is_none());
        // Crosses the plane at y = 12, outside the rectangle.
        assert!(segment_hits_surface(&Vec3::new(-1.0, 12.0, 1.0), &Vec3::new(1.0, 12.0, 1.0), &s)
            .is_none());
        // Segment stops short of the plane.
        assert!(segment_hits_surface(&Vec3::new(-2.0, 5.0, 1.0), &Vec3::new(-1.0, 5.0, 1.0), &s)
            .is_none());
    }

    #[test]
    fn occlusion_basics() {
        let empty = Scene::empty();
        assert!(!is_occluded(&Vec3::zeros(), &Vec3::new(3.0, 4.0, 0.0), &empty, &[]));

        let scene = Scene::new(vec![wall_x0()], one_material(), 3.0).unwrap();
        let a = Vec3::new(-2.0, 5.0, 1.0);
        let b = Vec3::new(2.0, 5.0, 1.0);
        assert!(is_occluded(&a, &b, &scene, &[]));
        assert!(is_occluded(&b, &a, &scene, &[]));
        assert!(!is_occluded(&a, &b, &scene, &[0]));
        // Endpoint resting on the wall grazes it.
        assert!(!is_occluded(&a, &Vec3::new(0.0, 5.0, 1.0), &scene, &[]));
    }

    #[test]
    fn scene_document_round_trip() {
        let scene = Scene::new(vec![wall_x0(), floor_z0()], one_material(), 3.0).unwrap();
        let endpoints = EndpointSet {
            tx: Vec3::new(1.0, 2.0, 2.5),
            rx: vec![Receiver {
                id: 1,
                position: Vec3::new(3.0, 4.0, 1.5),
                los: true,
                nominal_distance_m: 10.0,
            }],
        };
        let mut buf = Vec::new();
        SceneDocument::from_scene(&scene, Some(&endpoints))
            .write(&mut buf)
            .unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"edge_u\""));
        assert!(text.contains("\"reflectance\": 0.75"));
        let (back, ep, _) = SceneDocument::read(buf.as_slice()).unwrap().into_scene().unwrap();
        assert_eq!(back, scene);
        assert_eq!(ep.unwrap(), endpoints);
    }

    #[test]
    fn scene_document_rejects_non_perpendicular_edges() {
        let doc = r#"{"height_m":3,"materials":[{"id":0,"name":"w","reflectance":0.5}],
            "surfaces":[{"id":0,"corner":[0,0,0],"edge_u":[1,0,0],"edge_v":[1,1,0],"material_id":0}]}"#;
        assert!(SceneDocument::read(doc.as_bytes()).is_err());
    }
}
