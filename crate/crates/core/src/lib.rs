//! Deterministic mm-wave/THz indoor propagation and link-budget simulation.
//!
//! The crate traces LOS and specular paths through a rectangular-surface
//! scene, converts them into frequency-dependent gains (spreading, molecular
//! absorption, reflection), and evaluates how far a link reaches under
//! distance-extension techniques: ultra-massive MIMO arrays, reflectarrays,
//! HyperSurface tiles, distance-adaptive spectrum allocation, and their joint
//! combination.
//!
//! Modules, bottom-up:
//!
//! - [`geometry`]: scenes, surfaces, materials, the E-shaped hallway builder.
//! - [`raytracer`]: LOS and image-method reflection paths up to order 2.
//! - [`channel`]: per-path losses, multipath aggregation, spectra, windows.
//! - [`devices`]: array gains, SNR, capacity, BF/SM/hybrid mode selection.
//! - [`surfaces`]: reflectarray and HyperSurface tile sets.
//! - [`allocation`]: sub-window partitioning and center-out assignment.
//! - [`experiment`]: scenario files, technique runner, statistics, reports.

pub mod allocation;
pub mod channel;
pub mod devices;
mod error;
pub mod experiment;
pub mod geometry;
pub mod raytracer;
pub mod surfaces;

pub use error::{Error, Result};

/// Cartesian position or direction in meters.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub use allocation::{LinkDemand, LinkId, SubWindow};
pub use channel::{AbsorptionTable, PathGain, SpectralWindow};
pub use devices::{ArrayConfig, ArrayMode, LinkBudget, LinkResult, RadioConfig};
pub use experiment::{RunConfig, RunResults, Technique};
pub use geometry::{EndpointSet, Material, Receiver, Scene, Surface, SurfaceId};
pub use raytracer::{PathKind, PropagationPath};
pub use surfaces::{TileConfiguration, TileKind, TileSet};
