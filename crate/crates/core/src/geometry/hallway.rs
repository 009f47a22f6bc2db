//! The E-shaped hallway: one spine corridor along +x and three arms that
//! branch off toward -y.
//!
//! Only the Tx position, the receiver heights, the room height, the
//! reflectances, and the receiver distance sets are fixed by the scenario.
//! Wall coordinates are a reconstruction: arms sit at spine positions that
//! give route distances of {40, 50, 60} m (middle arm) and {80, 90, 100} m
//! (far arm), measured along the corridor centerlines from the Tx.

use super::{EndpointSet, Material, Receiver, Scene, Surface, SurfaceId};
use crate::{Error, Result, Vec3};

pub const HALLWAY_HEIGHT: f64 = 3.0;
pub const TX_POSITION: [f64; 3] = [5.0, 5.0, 2.95];
pub const RX_HEIGHT: f64 = 1.5;
pub const SPINE_LENGTH: f64 = 100.0;
/// Spine centerline, y coordinate.
const SPINE_Y: f64 = 5.0;
/// Centerline x of the arms hosting NLOS receivers.
const NLOS_ARMS_X: [f64; 2] = [35.0, 75.0];
const NLOS_DEPTHS: [f64; 3] = [10.0, 20.0, 30.0];

pub const WALL_MATERIAL: u32 = 0;
pub const FLOOR_MATERIAL: u32 = 1;
pub const CEILING_MATERIAL: u32 = 2;

/// Parameters of the E-shaped hallway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HallwayLayout {
    pub corridor_width: f64,
    pub arm_length: f64,
}

impl Default for HallwayLayout {
    fn default() -> Self {
        Self {
            corridor_width: 3.0,
            arm_length: 30.0,
        }
    }
}

/// Builds the hallway with the given corridor width and arm length.
pub fn build_e_hallway(corridor_width: f64, arm_length: f64) -> Result<(Scene, EndpointSet)> {
    HallwayLayout {
        corridor_width,
        arm_length,
    }
    .build()
}

#[derive(Debug, Clone, Copy)]
struct Box2 {
    x: (f64, f64),
    y: (f64, f64),
}

impl Box2 {
    fn contains(&self, x: f64, y: f64) -> bool {
        x > self.x.0 && x < self.x.1 && y > self.y.0 && y < self.y.1
    }
}

impl HallwayLayout {
    fn half(&self) -> f64 {
        self.corridor_width / 2.0
    }

    fn south_y(&self) -> f64 {
        SPINE_Y - self.half()
    }

    fn north_y(&self) -> f64 {
        SPINE_Y + self.half()
    }

    /// Arm centerlines: one at the spine start, then the two NLOS arms.
    fn arm_centers(&self) -> [f64; 3] {
        [self.half(), NLOS_ARMS_X[0], NLOS_ARMS_X[1]]
    }

    fn arm_box(&self, cx: f64) -> Box2 {
        Box2 {
            x: (cx - self.half(), cx + self.half()),
            y: (self.south_y() - self.arm_length, self.south_y()),
        }
    }

    fn spine_box(&self) -> Box2 {
        Box2 {
            x: (0.0, SPINE_LENGTH),
            y: (self.south_y(), self.north_y()),
        }
    }

    fn validate(&self) -> Result<()> {
        let (w, l) = (self.corridor_width, self.arm_length);
        if !(w > 0.0 && w.is_finite()) || !(l > 0.0 && l.is_finite()) {
            return Err(Error::Geometry(format!(
                "corridor width {w} and arm length {l} must be positive"
            )));
        }
        let arms = self.arm_centers();
        for pair in arms.windows(2) {
            if pair[0] + self.half() >= pair[1] - self.half() {
                return Err(Error::Geometry(format!(
                    "corridor width {w} makes arms at x={} and x={} overlap",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }

    /// Whether `p` lies strictly inside the enclosed volume.
    pub fn contains(&self, p: &Vec3) -> bool {
        if !(p.z > 0.0 && p.z < HALLWAY_HEIGHT) {
            return false;
        }
        self.spine_box().contains(p.x, p.y)
            || self
                .arm_centers()
                .iter()
                .any(|&cx| self.arm_box(cx).contains(p.x, p.y))
    }

    pub fn endpoints(&self) -> EndpointSet {
        let tx = Vec3::from(TX_POSITION);
        let mut rx = Vec::with_capacity(15);
        for k in 1..=9 {
            let d = 10.0 * k as f64;
            rx.push(Receiver {
                id: k,
                position: Vec3::new(tx.x + d, SPINE_Y, RX_HEIGHT),
                los: true,
                nominal_distance_m: d,
            });
        }
        let mut id = 10;
        for &cx in &NLOS_ARMS_X {
            let along_spine = cx - tx.x;
            for &depth in &NLOS_DEPTHS {
                rx.push(Receiver {
                    id,
                    position: Vec3::new(cx, SPINE_Y - depth, RX_HEIGHT),
                    los: false,
                    nominal_distance_m: along_spine + depth,
                });
                id += 1;
            }
        }
        EndpointSet { tx, rx }
    }

    /// Ids of the north-wall segments facing each arm opening, in the order
    /// the arms appear along the spine.
    pub fn junction_wall_ids(&self) -> Vec<SurfaceId> {
        // Fixed by the surface order in `build`.
        vec![2, 4, 6]
    }

    pub fn build(&self) -> Result<(Scene, EndpointSet)> {
        self.validate()?;
        let endpoints = self.endpoints();
        if !self.contains(&endpoints.tx) {
            return Err(Error::Geometry("Tx lies outside the hallway".into()));
        }
        for r in &endpoints.rx {
            if !self.contains(&r.position) {
                return Err(Error::Geometry(format!(
                    "Rx {} at {:?} lies outside the hallway",
                    r.id,
                    r.position.as_slice()
                )));
            }
            if !r.los && self.spine_box().contains(r.position.x, r.position.y) {
                return Err(Error::Geometry(format!(
                    "NLOS Rx {} falls inside the spine corridor",
                    r.id
                )));
            }
        }

        let h = HALLWAY_HEIGHT;
        let (w, half) = (self.corridor_width, self.half());
        let (south, north) = (self.south_y(), self.north_y());
        let arms = self.arm_centers();
        let mut b = Builder::default();

        b.horizontal(0.0, SPINE_LENGTH, south, north, 0.0, FLOOR_MATERIAL)?;
        b.horizontal(0.0, SPINE_LENGTH, south, north, h, CEILING_MATERIAL)?;

        // North wall, split so each arm opening faces its own segment
        // (ids 2, 4, 6 are the junction segments).
        let mut cuts = vec![0.0];
        for &cx in &arms {
            cuts.push((cx - half).max(0.0));
            cuts.push(cx + half);
        }
        cuts.push(SPINE_LENGTH);
        cuts.dedup();
        for pair in cuts.windows(2) {
            b.wall_along_x(pair[0], pair[1], north)?;
        }
        debug_assert_eq!(b.surfaces.len(), 8);

        // South wall between arm openings.
        let mut x = w;
        for &cx in &arms[1..] {
            b.wall_along_x(x, cx - half, south)?;
            x = cx + half;
        }
        b.wall_along_x(x, SPINE_LENGTH, south)?;

        b.wall_along_y(0.0, south, north)?;
        b.wall_along_y(SPINE_LENGTH, south, north)?;

        for &cx in &arms {
            let a = self.arm_box(cx);
            b.horizontal(a.x.0, a.x.1, a.y.0, a.y.1, 0.0, FLOOR_MATERIAL)?;
            b.horizontal(a.x.0, a.x.1, a.y.0, a.y.1, h, CEILING_MATERIAL)?;
            b.wall_along_y(a.x.0, a.y.0, a.y.1)?;
            b.wall_along_y(a.x.1, a.y.0, a.y.1)?;
            b.wall_along_x(a.x.0, a.x.1, a.y.0)?;
        }

        let materials = vec![
            Material::new(WALL_MATERIAL, "concrete_wall", 0.75)?,
            Material::new(FLOOR_MATERIAL, "floor", 0.5)?,
            Material::new(CEILING_MATERIAL, "ceiling", 0.8)?,
        ];
        let scene = Scene::new(b.surfaces, materials, h)?;
        Ok((scene, endpoints))
    }
}

#[derive(Default)]
struct Builder {
    surfaces: Vec<Surface>,
}

impl Builder {
    fn push(&mut self, corner: Vec3, u: Vec3, v: Vec3, material: u32) -> Result<()> {
        let id = self.surfaces.len() as SurfaceId;
        self.surfaces.push(Surface::new(id, corner, u, v, material)?);
        Ok(())
    }

    fn horizontal(&mut self, x0: f64, x1: f64, y0: f64, y1: f64, z: f64, m: u32) -> Result<()> {
        self.push(
            Vec3::new(x0, y0, z),
            Vec3::new(x1 - x0, 0.0, 0.0),
            Vec3::new(0.0, y1 - y0, 0.0),
            m,
        )
    }

    fn wall_along_x(&mut self, x0: f64, x1: f64, y: f64) -> Result<()> {
        self.push(
            Vec3::new(x0, y, 0.0),
            Vec3::new(x1 - x0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, HALLWAY_HEIGHT),
            WALL_MATERIAL,
        )
    }

    fn wall_along_y(&mut self, x: f64, y0: f64, y1: f64) -> Result<()> {
        self.push(
            Vec3::new(x, y0, 0.0),
            Vec3::new(0.0, y1 - y0, 0.0),
            Vec3::new(0.0, 0.0, HALLWAY_HEIGHT),
            WALL_MATERIAL,
        )
    }
}
