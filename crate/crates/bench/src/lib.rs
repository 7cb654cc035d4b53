//! Shared fixtures for the criterion benchmarks.

use xagent_core::demo::{run_demonstrator, DemoConfig, Demonstration};
use xagent_core::{maps, TileMap, WorldState};

/// A bundled mission map and its recorded demonstration.
pub fn mission(name: &str) -> (TileMap, Demonstration) {
    let map = maps::bundled(name)
        .expect("bundled map name")
        .expect("bundled maps parse");
    let demo = run_demonstrator(&mut WorldState::new(map.clone()), map.path(), &DemoConfig::default(), name)
        .expect("bundled paths are drivable");
    (map, demo)
}
