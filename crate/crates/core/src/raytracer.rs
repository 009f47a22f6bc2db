//! LOS and specular reflection paths by the image method.
//!
//! For each ordered tuple of surfaces the transmitter is mirrored
//! successively; bounce points are then recovered by tracing back from the
//! receiver toward each image. A candidate survives only if every bounce
//! point lies inside its rectangle and no segment is blocked.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    is_occluded, mirror_point, Scene, Surface, SurfaceId, GEOMETRY_TOL, GRAZING_TOL,
};
use crate::{Error, Result, Vec3};

/// Highest supported reflection order.
pub const MAX_ORDER: usize = 2;
/// Allowed deviation from the mirror law at a bounce, radians.
pub const SPECULAR_TOL_RAD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathKind {
    Los,
    Reflect1,
    Reflect2,
    /// Engineered redirection by a reflectarray or HyperSurface tile.
    SurfaceAssisted,
}

impl PathKind {
    fn expected_bounces(self) -> usize {
        match self {
            PathKind::Los => 0,
            PathKind::Reflect1 | PathKind::SurfaceAssisted => 1,
            PathKind::Reflect2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// Tx, bounce points in order, Rx.
    pub vertices: Vec<Vec3>,
    pub bounce_surfaces: Vec<SurfaceId>,
    pub length: f64,
}

impl PropagationPath {
    pub fn new(kind: PathKind, vertices: Vec<Vec3>, bounce_surfaces: Vec<SurfaceId>) -> Self {
        let length = polyline_length(&vertices);
        Self {
            kind,
            vertices,
            bounce_surfaces,
            length,
        }
    }

    pub fn order(&self) -> usize {
        self.bounce_surfaces.len()
    }

    /// The same path traversed Rx to Tx.
    pub fn reversed(&self) -> Self {
        let mut vertices = self.vertices.clone();
        vertices.reverse();
        let mut bounce_surfaces = self.bounce_surfaces.clone();
        bounce_surfaces.reverse();
        Self {
            kind: self.kind,
            vertices,
            bounce_surfaces,
            length: self.length,
        }
    }
}

pub(crate) fn polyline_length(vertices: &[Vec3]) -> f64 {
    vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Angle between the mirror image of `incoming` about `normal` and `outgoing`.
pub fn specular_error_rad(incoming: &Vec3, outgoing: &Vec3, normal: &Vec3) -> f64 {
    let d_in = incoming.normalize();
    let d_out = outgoing.normalize();
    let n = normal.normalize();
    let reflected = d_in - 2.0 * d_in.dot(&n) * n;
    reflected.cross(&d_out).norm().atan2(reflected.dot(&d_out))
}

/// The direct path, if nothing blocks it.
pub fn trace_los(scene: &Scene, tx: &Vec3, rx: &Vec3) -> Option<PropagationPath> {
    if is_occluded(tx, rx, scene, &[]) {
        return None;
    }
    Some(PropagationPath::new(PathKind::Los, vec![*tx, *rx], Vec::new()))
}

/// Every specular path of order 1..=`max_order`, sorted by (order, length).
pub fn trace_reflections(
    scene: &Scene,
    tx: &Vec3,
    rx: &Vec3,
    max_order: usize,
) -> Result<Vec<PropagationPath>> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(Error::InvalidArgument(format!(
            "reflection order {max_order} not in 1..={MAX_ORDER}"
        )));
    }
    let surfaces = scene.surfaces();
    let mut paths = Vec::new();
    for s1 in surfaces {
        if let Some(p) = reflect_via(scene, tx, rx, &[s1]) {
            paths.push(p);
        }
    }
    if max_order >= 2 {
        for s1 in surfaces {
            for s2 in surfaces {
                if s1.id() == s2.id() {
                    continue;
                }
                if let Some(p) = reflect_via(scene, tx, rx, &[s1, s2]) {
                    paths.push(p);
                }
            }
        }
    }
    sort_paths(&mut paths);
    Ok(paths)
}

/// LOS (when present) followed by reflections up to `max_order`.
/// `max_order = 0` yields the LOS path only.
pub fn trace_all(
    scene: &Scene,
    tx: &Vec3,
    rx: &Vec3,
    max_order: usize,
) -> Result<Vec<PropagationPath>> {
    let mut paths: Vec<_> = trace_los(scene, tx, rx).into_iter().collect();
    if max_order > 0 {
        paths.extend(trace_reflections(scene, tx, rx, max_order)?);
    }
    Ok(paths)
}

fn sort_paths(paths: &mut [PropagationPath]) {
    paths.sort_by(|a, b| {
        a.order()
            .cmp(&b.order())
            .then(a.length.total_cmp(&b.length))
            .then_with(|| a.bounce_surfaces.cmp(&b.bounce_surfaces))
    });
}

fn reflect_via(scene: &Scene, tx: &Vec3, rx: &Vec3, chain: &[&Surface]) -> Option<PropagationPath> {
    // Images of the Tx after each successive mirror.
    let mut images = Vec::with_capacity(chain.len());
    let mut source = *tx;
    for s in chain {
        if s.signed_distance(&source).abs() <= GEOMETRY_TOL {
            return None;
        }
        source = mirror_point(&source, s);
        images.push(source);
    }
    if chain
        .last()
        .is_some_and(|s| s.signed_distance(rx).abs() <= GEOMETRY_TOL)
    {
        return None;
    }

    // Back-trace from the Rx: the last bounce lies on the line from the
    // last image to the Rx, and so on toward the Tx.
    let mut bounces = vec![Vec3::zeros(); chain.len()];
    let mut target = *rx;
    for i in (0..chain.len()).rev() {
        let s = chain[i];
        let (_, hit) = s.plane_crossing(&images[i], &target)?;
        if !s.contains_point(&hit, GEOMETRY_TOL) {
            return None;
        }
        bounces[i] = hit;
        target = hit;
    }

    let mut vertices = Vec::with_capacity(chain.len() + 2);
    vertices.push(*tx);
    vertices.extend_from_slice(&bounces);
    vertices.push(*rx);
    let ids: Vec<SurfaceId> = chain.iter().map(|s| s.id()).collect();

    for (k, seg) in vertices.windows(2).enumerate() {
        if (seg[1] - seg[0]).norm() <= GRAZING_TOL {
            return None;
        }
        // Segment k ends on chain[k] and starts on chain[k - 1].
        let mut ignore = Vec::with_capacity(2);
        if k > 0 {
            ignore.push(ids[k - 1]);
        }
        if k < ids.len() {
            ignore.push(ids[k]);
        }
        if is_occluded(&seg[0], &seg[1], scene, &ignore) {
            return None;
        }
    }

    let kind = if chain.len() == 1 {
        PathKind::Reflect1
    } else {
        PathKind::Reflect2
    };
    Some(PropagationPath::new(kind, vertices, ids))
}

/// Checks every path invariant and that no segment is blocked.
///
/// Surface-assisted paths are redirected by a tile rather than mirrored by
/// their host, so only their geometry and visibility are checked.
pub fn validate_path(path: &PropagationPath, scene: &Scene) -> bool {
    let n_bounces = path.bounce_surfaces.len();
    if n_bounces != path.kind.expected_bounces() || path.vertices.len() != n_bounces + 2 {
        return false;
    }
    let recomputed = polyline_length(&path.vertices);
    if !(path.length > 0.0) || (recomputed - path.length).abs() > 1e-9 * path.length {
        return false;
    }
    for (i, &id) in path.bounce_surfaces.iter().enumerate() {
        let Some(s) = scene.surface(id) else {
            return false;
        };
        let prev = path.vertices[i];
        let hit = path.vertices[i + 1];
        let next = path.vertices[i + 2];
        if !s.contains_point(&hit, 1e-6) {
            return false;
        }
        // Both neighbours on the same side of the bounce plane.
        if s.signed_distance(&prev) * s.signed_distance(&next) <= 0.0 {
            return false;
        }
        if path.kind != PathKind::SurfaceAssisted
            && specular_error_rad(&(hit - prev), &(next - hit), &s.normal()) > SPECULAR_TOL_RAD
        {
            return false;
        }
    }
    path.vertices.windows(2).enumerate().all(|(k, seg)| {
        let mut ignore = Vec::new();
        if k > 0 {
            ignore.push(path.bounce_surfaces[k - 1]);
        }
        if k < n_bounces {
            ignore.push(path.bounce_surfaces[k]);
        }
        !is_occluded(&seg[0], &seg[1], scene, &ignore)
    })
}

/// One line of the path dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub rx_id: u32,
    pub kind: PathKind,
    pub order: usize,
    pub length_m: f64,
    pub vertices: Vec<Vec3>,
    pub surfaces: Vec<SurfaceId>,
}

impl PathRecord {
    pub fn new(rx_id: u32, path: &PropagationPath) -> Self {
        Self {
            rx_id,
            kind: path.kind,
            order: path.order(),
            length_m: path.length,
            vertices: path.vertices.clone(),
            surfaces: path.bounce_surfaces.clone(),
        }
    }
}

/// Writes one JSON object per line.
pub fn write_path_dump<'a>(
    mut out: impl Write,
    records: impl IntoIterator<Item = &'a PathRecord>,
) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_e_hallway, Material};

    fn material() -> Vec<Material> {
        vec![Material::new(0, "wall", 0.75).unwrap()]
    }

    /// Axis-aligned box room with the six faces as surfaces 0..6.
    fn shoebox(lx: f64, ly: f64, lz: f64) -> Scene {
        let z = Vec3::zeros();
        let (ex, ey, ez) = (Vec3::new(lx, 0.0, 0.0), Vec3::new(0.0, ly, 0.0), Vec3::new(0.0, 0.0, lz));
        let faces = vec![
            Surface::new(0, z, ey, ez, 0).unwrap(),
            Surface::new(1, ex, ey, ez, 0).unwrap(),
            Surface::new(2, z, ex, ez, 0).unwrap(),
            Surface::new(3, ey, ex, ez, 0).unwrap(),
            Surface::new(4, z, ex, ey, 0).unwrap(),
            Surface::new(5, ez, ex, ey, 0).unwrap(),
        ];
        Scene::new(faces, material(), lz).unwrap()
    }

    #[test]
    fn los_in_free_space() {
        let scene = Scene::empty();
        let tx = Vec3::new(1.0, 2.0, 3.0);
        let p = trace_los(&scene, &tx, &(tx + Vec3::x())).unwrap();
        assert_eq!(p.kind, PathKind::Los);
        assert!((p.length - 1.0).abs() < 1e-12);
    }

    #[test]
    fn los_in_hallway() {
        let (scene, ep) = build_e_hallway(3.0, 30.0).unwrap();
        let near = &ep.rx[0];
        let p = trace_los(&scene, &ep.tx, &near.position).unwrap();
        assert!((p.length - (100.0f64 + 1.45 * 1.45).sqrt()).abs() < 1e-9);
        assert!((p.length - 10.105).abs() < 1e-3);
        for r in ep.rx.iter().filter(|r| !r.los) {
            assert!(trace_los(&scene, &ep.tx, &r.position).is_none());
        }
    }

    #[test]
    fn single_wall_mirror_geometry() {
        // Large wall y = 0; endpoints 2 m in front of it, 6 m apart.
        let wall = Surface::new(
            0,
            Vec3::new(-1000.0, 0.0, -1000.0),
            Vec3::new(2000.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 2000.0),
            0,
        )
        .unwrap();
        let scene = Scene::new(vec![wall], material(), 3.0).unwrap();
        let tx = Vec3::new(-3.0, 2.0, 1.0);
        let rx = Vec3::new(3.0, 2.0, 1.0);
        let paths = trace_reflections(&scene, &tx, &rx, 2).unwrap();
        assert_eq!(paths.len(), 1);
        let p = &paths[0];
        assert_eq!(p.kind, PathKind::Reflect1);
        assert!((p.vertices[1] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((p.length - 2.0 * 13.0f64.sqrt()).abs() < 1e-12);
        assert!(validate_path(p, &scene));
    }

    #[test]
    fn shoebox_first_order_gives_six_images() {
        let scene = shoebox(5.0, 4.0, 3.0);
        let tx = Vec3::new(1.2, 1.1, 2.1);
        let rx = Vec3::new(3.7, 2.9, 1.3);
        let paths = trace_reflections(&scene, &tx, &rx, 1).unwrap();
        assert_eq!(paths.len(), 6);
        let mut ids: Vec<_> = paths.iter().map(|p| p.bounce_surfaces[0]).collect();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3, 4, 5]);
        assert!(paths.iter().all(|p| validate_path(p, &scene)));
        assert!(paths.windows(2).all(|w| w[0].length <= w[1].length));
    }

    #[test]
    fn shoebox_second_order_excludes_coplanar_repeats() {
        let scene = shoebox(5.0, 4.0, 3.0);
        let tx = Vec3::new(1.2, 1.1, 2.1);
        let rx = Vec3::new(3.7, 2.9, 1.3);
        let paths = trace_reflections(&scene, &tx, &rx, 2).unwrap();
        // Bounces between opposite faces always land inside the box.
        for pair in [[0, 1], [1, 0], [2, 3], [3, 2], [4, 5], [5, 4]] {
            assert!(paths.iter().any(|p| p.bounce_surfaces == pair), "{pair:?}");
        }
        for p in &paths {
            assert!(validate_path(p, &scene));
            if p.order() == 2 {
                assert_ne!(p.bounce_surfaces[0], p.bounce_surfaces[1]);
            }
        }
        let first_second: Vec<_> = paths.iter().map(|p| p.order()).collect();
        assert!(first_second.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_unsupported_orders() {
        let scene = shoebox(5.0, 4.0, 3.0);
        let (a, b) = (Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0));
        assert!(trace_reflections(&scene, &a, &b, 0).is_err());
        assert!(trace_reflections(&scene, &a, &b, 3).is_err());
    }

    #[test]
    fn validate_rejects_tampered_paths() {
        let scene = shoebox(5.0, 4.0, 3.0);
        let tx = Vec3::new(1.2, 1.1, 2.1);
        let rx = Vec3::new(3.7, 2.9, 1.3);
        let mut p = trace_reflections(&scene, &tx, &rx, 1).unwrap().remove(0);
        let s = scene.surface(p.bounce_surfaces[0]).unwrap();
        let tangent = s.edge_u().normalize();
        p.vertices[1] += 0.01 * tangent;
        p.length = polyline_length(&p.vertices);
        assert!(!validate_path(&p, &scene));

        // LOS through a wall.
        let wall_scene = Scene::new(
            vec![Surface::new(0, Vec3::new(0.0, -5.0, -5.0), Vec3::new(0.0, 10.0, 0.0), Vec3::new(0.0, 0.0, 10.0), 0).unwrap()],
            material(),
            3.0,
        )
        .unwrap();
        let through = PropagationPath::new(
            PathKind::Los,
            vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            Vec::new(),
        );
        assert!(!validate_path(&through, &wall_scene));

        // Kind and bounce count disagree.
        let mut wrong = trace_los(&scene, &tx, &rx).unwrap();
        wrong.kind = PathKind::Reflect1;
        assert!(!validate_path(&wrong, &scene));
    }

    #[test]
    fn hallway_paths_are_valid_and_reciprocal() {
        let (scene, ep) = build_e_hallway(3.0, 30.0).unwrap();
        for r in &ep.rx {
            let fwd = trace_all(&scene, &ep.tx, &r.position, 2).unwrap();
            let back = trace_all(&scene, &r.position, &ep.tx, 2).unwrap();
            assert!(fwd.iter().all(|p| validate_path(p, &scene)), "rx {}", r.id);
            assert_eq!(fwd.len(), back.len(), "rx {}", r.id);
            let mut a: Vec<_> = fwd.iter().map(|p| (p.bounce_surfaces.clone(), p.length)).collect();
            let mut b: Vec<_> = back
                .iter()
                .map(|p| (p.reversed().bounce_surfaces, p.length))
                .collect();
            a.sort_by(|x, y| x.0.cmp(&y.0));
            b.sort_by(|x, y| x.0.cmp(&y.0));
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() <= 1e-9 * x.1);
            }
        }
    }

    #[test]
    fn path_dump_is_one_json_object_per_line() {
        let scene = shoebox(5.0, 4.0, 3.0);
        let tx = Vec3::new(1.0, 1.0, 1.0);
        let rx = Vec3::new(4.0, 3.0, 2.0);
        let records: Vec<_> = trace_all(&scene, &tx, &rx, 1)
            .unwrap()
            .iter()
            .map(|p| PathRecord::new(9, p))
            .collect();
        let mut buf = Vec::new();
        write_path_dump(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with(r#"{"rx_id":9,"kind":"LOS","order":0"#));
        assert!(lines[1].contains(r#""kind":"REFLECT1""#));
        let back: PathRecord = serde_json::from_str(lines[3]).unwrap();
        assert_eq!(back, records[3]);
    }
}
