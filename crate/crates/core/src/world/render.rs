//! Fixed-heading column raycaster.
//!
//! The camera looks along +x with a 90° horizontal field of view. Each pixel
//! column casts one ray through the tile grid; the wall slice is textured by
//! the hit coordinate along the face, rows below the slice sample the floor
//! and rows above it show a plain ceiling.

use std::f64::consts::TAU;

use super::map::{TileKind, TileMap, REPETITIVE};
#[cfg(test)]
use super::map::TEXTURE_COUNT;
use super::Position;
use crate::vision::{FRAME_HEIGHT, FRAME_WIDTH};

/// Distance falloff coefficient: intensity is scaled by `1 / (1 + k d)`.
pub const SHADING: f64 = 0.15;
/// Fraction of the image darkened while standing inside a web.
pub const WEB_OCCLUSION: f64 = 0.4;
const WEB_DARKEN: f64 = 0.25;
const CEILING: f64 = 0.8;
const LAVA: f64 = 0.04;
const MAX_RAY_TILES: usize = 4096;

fn shade(d: f64) -> f64 {
    1.0 / (1.0 + SHADING * d)
}

fn frac(v: f64) -> f64 {
    v - v.floor()
}

// Cheap deterministic per-id parameters in [0, 1).
fn param(id: u8, k: u32) -> f64 {
    let mut h = u32::from(id).wrapping_mul(0x9E37_79B9) ^ k.wrapping_mul(0x85EB_CA6B);
    h ^= h >> 15;
    h = h.wrapping_mul(0x2C1B_3C6D);
    h ^= h >> 12;
    f64::from(h % 10_000) / 10_000.0
}

/// Wall intensity at coordinate `s` along the face (in world tiles) and
/// height `v` in `[0, 1]`. Ordinary walls vary slowly along the face so that
/// small moves give small image changes; `REPETITIVE` repeats every quarter
/// tile.
pub(crate) fn wall_texture(id: u8, s: f64, v: f64) -> f64 {
    if id == REPETITIVE {
        return 0.5 + 0.4 * (TAU * 4.0 * s).sin();
    }
    let base = 0.44 + 0.12 * param(id, 1);
    let tilt = 0.24 * (param(id, 3) - 0.5);
    let value = base
        + 0.18 * (TAU * (s / 4.3 + param(id, 2))).sin()
        + 0.04 * (TAU * (frac(s) + param(id, 4))).sin()
        + tilt * (v - 0.5);
    value.clamp(0.0, 1.0)
}

/// Floor intensity at world point `(x, y)` on a tile of the given kind.
pub(crate) fn floor_texture(tile: TileKind, x: f64, y: f64) -> f64 {
    let (u, v) = (frac(x), frac(y));
    match tile {
        TileKind::Floor(id) => {
            0.42 + 0.12 * (TAU * (x / 5.1 + y / 13.0)).sin()
                + 0.1 * (TAU * (y / 3.7 - x / 17.0)).cos()
                + 0.03 * (param(id, 5) - 0.5)
        }
        TileKind::Lava => LAVA,
        TileKind::Web => 0.62 + 0.1 * (TAU * u).cos() * (TAU * v).cos(),
        TileKind::Goal => {
            if ((2.0 * u).floor() as i64 + (2.0 * v).floor() as i64) % 2 == 0 {
                0.95
            } else {
                0.05
            }
        }
        // a wall is never sampled as floor
        TileKind::Wall(id) => wall_texture(id, x, v),
    }
}

/// Whether pixel `(x, y)` is covered by the web occlusion mask.
pub fn web_mask(x: usize, y: usize) -> bool {
    (7 * x + 3 * y) % 5 < 2
}

struct Hit {
    perp: f64,
    /// World coordinate of the hit point along the face.
    s: f64,
    texture: u8,
}

fn cast(map: &TileMap, pos: Position, dir_y: f64) -> Hit {
    let mut cell_x = pos.x.floor() as isize;
    let mut cell_y = pos.y.floor() as isize;
    let delta_x = 1.0;
    let delta_y = if dir_y == 0.0 { f64::INFINITY } else { (1.0 / dir_y).abs() };
    let mut side_x = (cell_x as f64 + 1.0 - pos.x) * delta_x;
    let (step_y, mut side_y) = if dir_y < 0.0 {
        (-1, (pos.y - cell_y as f64) * delta_y)
    } else {
        (1, (cell_y as f64 + 1.0 - pos.y) * delta_y)
    };
    for _ in 0..MAX_RAY_TILES {
        let x_side = side_x < side_y;
        if x_side {
            side_x += delta_x;
            cell_x += 1;
        } else {
            side_y += delta_y;
            cell_y += step_y;
        }
        if let TileKind::Wall(texture) = map.tile(cell_x, cell_y) {
            let (perp, s) = if x_side {
                let perp = side_x - delta_x;
                (perp, pos.y + perp * dir_y)
            } else {
                let perp = side_y - delta_y;
                (perp, pos.x + perp)
            };
            return Hit {
                perp: perp.max(1e-6),
                s,
                texture,
            };
        }
    }
    // maps are walled in, so this only triggers on malformed input
    Hit {
        perp: MAX_RAY_TILES as f64,
        s: 0.0,
        texture: 0,
    }
}

/// Noise-free view from `pos`, including the web mask when standing in a web.
pub fn render_clean(map: &TileMap, pos: Position) -> Vec<f64> {
    let (w, h) = (FRAME_WIDTH, FRAME_HEIGHT);
    let half = h as f64 / 2.0;
    let mut pixels = vec![0.0; w * h];
    for col in 0..w {
        let cam = 2.0 * (col as f64 + 0.5) / w as f64 - 1.0;
        let hit = cast(map, pos, cam);
        let half_line = half / hit.perp;
        let wall_shade = shade(hit.perp);
        for row in 0..h {
            let ry = row as f64 + 0.5;
            let off = ry - half;
            let value = if off.abs() < half_line {
                let v = (off + half_line) / (2.0 * half_line);
                wall_texture(hit.texture, hit.s, v) * wall_shade
            } else if off > 0.0 {
                let d = half / off;
                let fx = pos.x + d;
                let fy = pos.y + d * cam;
                let tile = map.tile(fx.floor() as isize, fy.floor() as isize);
                floor_texture(tile, fx, fy) * shade(d)
            } else {
                CEILING * shade(half / -off)
            };
            pixels[row * w + col] = value.clamp(0.0, 1.0);
        }
    }
    if map.tile_at(pos) == TileKind::Web {
        for row in 0..h {
            for col in 0..w {
                if web_mask(col, row) {
                    pixels[row * w + col] *= WEB_DARKEN;
                }
            }
        }
    }
    pixels
}
