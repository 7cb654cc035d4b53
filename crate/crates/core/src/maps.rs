//! Maps shipped with the crate.

use crate::world::{MapError, TileMap};

pub const MISSION1: &str = include_str!("../maps/mission1.map");
pub const MISSION2: &str = include_str!("../maps/mission2.map");
pub const MISSION3: &str = include_str!("../maps/mission3.map");

/// Names accepted by [`bundled`].
pub const NAMES: [&str; 3] = ["mission1", "mission2", "mission3"];

/// Source text of a bundled map, by name with or without the `.map` suffix.
pub fn bundled_text(name: &str) -> Option<&'static str> {
    match name.strip_suffix(".map").unwrap_or(name) {
        "mission1" => Some(MISSION1),
        "mission2" => Some(MISSION2),
        "mission3" => Some(MISSION3),
        _ => None,
    }
}

pub fn bundled(name: &str) -> Option<Result<TileMap, MapError>> {
    bundled_text(name).map(TileMap::parse)
}
