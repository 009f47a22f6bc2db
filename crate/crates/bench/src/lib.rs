//! Fixtures shared by the criterion benches.

use thzreach_core::experiment::RunConfig;
use thzreach_core::geometry::{EndpointSet, HallwayLayout};
use thzreach_core::{Scene, Technique};

/// Default E hallway with its endpoints.
pub fn hallway() -> (Scene, EndpointSet) {
    HallwayLayout::default().build().expect("default layout is valid")
}

/// Default scenario restricted to `techniques`.
pub fn scenario(techniques: &[Technique]) -> RunConfig {
    let mut cfg = RunConfig::default_hallway().expect("default scenario is valid");
    cfg.techniques = techniques.to_vec();
    cfg
}
