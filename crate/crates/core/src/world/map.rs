//! Tile maps and the plain-text map format.
//!
//! ```text
//! width height s_max dt seed
//! ########
//! #S..R..#
//! #...LG.#
//! ########
//! wp 3.5 1.5
//! wp 5.5 2.5
//! ```
//!
//! Tile codes: `.` floor, `#` wall, `R` repetitive wall, `L` lava, `W` web,
//! `G` goal, `S` spawn (a floor tile). Optional `wp x y` lines after the grid
//! list the scripted demonstrator's path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use super::Position;

/// Number of entries in the built-in texture table.
pub const TEXTURE_COUNT: u8 = 24;
/// Texture whose stripes repeat with a period of a quarter tile.
pub const REPETITIVE: u8 = TEXTURE_COUNT;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid map: {0}")]
    Invalid(String),
    #[error("cannot read map {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileKind {
    Floor(u8),
    Wall(u8),
    Lava,
    Web,
    Goal,
}

impl TileKind {
    pub fn is_wall(self) -> bool {
        matches!(self, TileKind::Wall(_))
    }

    /// Whether an agent may stand on the tile.
    pub fn is_traversable(self) -> bool {
        !matches!(self, TileKind::Wall(_) | TileKind::Lava)
    }
}

/// World constants carried in the map header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    /// Top speed in tiles per second.
    pub s_max: f64,
    /// Control period in seconds.
    pub dt: f64,
    pub seed: u64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            s_max: 4.0,
            dt: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileMap {
    width: usize,
    height: usize,
    tiles: Vec<TileKind>,
    goal_cell: (usize, usize),
    spawn: Position,
    params: MapParams,
    path: Vec<Position>,
}

/// Per-cell texture choice. A linear lattice code keeps nearby cells on
/// different textures: along a row or column the id repeats only every
/// `TEXTURE_COUNT` cells.
fn texture_for(x: usize, y: usize, salt: u64) -> u8 {
    let (a, b) = if salt == 1 { (7, 5) } else { (5, 11) };
    ((a * x as u64 + b * y as u64 + salt) % u64::from(TEXTURE_COUNT)) as u8
}

impl TileMap {
    /// Builds a map from a character grid, validating the map invariants.
    pub fn from_grid(rows: &[&str], params: MapParams) -> Result<Self, MapError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width < 3 || height < 3 {
            return Err(MapError::Invalid(format!("map {width}x{height} too small")));
        }
        let mut tiles = Vec::with_capacity(width * height);
        let mut goal = None;
        let mut spawn = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(MapError::Parse {
                    line: y + 2,
                    msg: format!("expected {width} tiles, found {}", row.chars().count()),
                });
            }
            for (x, c) in row.chars().enumerate() {
                let tile = match c {
                    '.' => TileKind::Floor(texture_for(x, y, 1)),
                    '#' => TileKind::Wall(texture_for(x, y, 2)),
                    'R' => TileKind::Wall(REPETITIVE),
                    'L' => TileKind::Lava,
                    'W' => TileKind::Web,
                    'G' => {
                        if goal.replace((x, y)).is_some() {
                            return Err(MapError::Invalid("more than one goal".into()));
                        }
                        TileKind::Goal
                    }
                    'S' => {
                        if spawn.replace((x, y)).is_some() {
                            return Err(MapError::Invalid("more than one spawn".into()));
                        }
                        TileKind::Floor(texture_for(x, y, 1))
                    }
                    other => {
                        return Err(MapError::Parse {
                            line: y + 2,
                            msg: format!("unknown tile code {other:?}"),
                        })
                    }
                };
                let border = x == 0 || y == 0 || x + 1 == width || y + 1 == height;
                if border && !tile.is_wall() {
                    return Err(MapError::Invalid(format!(
                        "border tile ({x}, {y}) is not a wall"
                    )));
                }
                tiles.push(tile);
            }
        }
        let goal_cell = goal.ok_or_else(|| MapError::Invalid("no goal tile".into()))?;
        let (sx, sy) = spawn.ok_or_else(|| MapError::Invalid("no spawn tile".into()))?;
        Ok(Self {
            width,
            height,
            tiles,
            goal_cell,
            spawn: Position::new(sx as f64 + 0.5, sy as f64 + 0.5),
            params,
            path: Vec::new(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with(';'));
        let (hline, header) = lines.next().ok_or(MapError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(MapError::Parse {
                line: hline,
                msg: "header must be `width height s_max dt seed`".into(),
            });
        }
        let bad = |msg: &str| MapError::Parse {
            line: hline,
            msg: msg.to_string(),
        };
        let width: usize = fields[0].parse().map_err(|_| bad("bad width"))?;
        let height: usize = fields[1].parse().map_err(|_| bad("bad height"))?;
        let s_max: f64 = fields[2].parse().map_err(|_| bad("bad s_max"))?;
        let dt: f64 = fields[3].parse().map_err(|_| bad("bad dt"))?;
        let seed: u64 = fields[4].parse().map_err(|_| bad("bad seed"))?;
        if !(s_max > 0.0 && dt > 0.0) {
            return Err(bad("s_max and dt must be positive"));
        }

        let mut rows = Vec::with_capacity(height);
        for _ in 0..height {
            let (_, row) = lines.next().ok_or(MapError::Parse {
                line: hline + rows.len() + 1,
                msg: format!("expected {height} grid rows"),
            })?;
            rows.push(row);
        }
        let mut map = TileMap::from_grid(&rows, MapParams { s_max, dt, seed })?;
        if map.width != width {
            return Err(MapError::Invalid(format!(
                "header width {width} but rows have {} tiles",
                map.width
            )));
        }

        for (line, rest) in lines {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            match parts.as_slice() {
                ["wp", x, y] => {
                    let x: f64 = x.parse().map_err(|_| MapError::Parse {
                        line,
                        msg: "bad waypoint x".into(),
                    })?;
                    let y: f64 = y.parse().map_err(|_| MapError::Parse {
                        line,
                        msg: "bad waypoint y".into(),
                    })?;
                    map.path.push(Position::new(x, y));
                }
                _ => {
                    return Err(MapError::Parse {
                        line,
                        msg: format!("unexpected line {rest:?}"),
                    })
                }
            }
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        let text = fs::read_to_string(path).map_err(|source| MapError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn params(&self) -> MapParams {
        self.params
    }

    pub fn set_params(&mut self, params: MapParams) {
        self.params = params;
    }

    pub fn spawn(&self) -> Position {
        self.spawn
    }

    pub fn goal_cell(&self) -> (usize, usize) {
        self.goal_cell
    }

    pub fn goal_center(&self) -> Position {
        Position::new(self.goal_cell.0 as f64 + 0.5, self.goal_cell.1 as f64 + 0.5)
    }

    /// Scripted demonstrator path bundled with the map (may be empty).
    pub fn path(&self) -> &[Position] {
        &self.path
    }

    pub fn set_path(&mut self, path: Vec<Position>) {
        self.path = path;
    }

    /// Tile at integer cell coordinates; out-of-range cells read as walls.
    pub fn tile(&self, x: isize, y: isize) -> TileKind {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return TileKind::Wall(0);
        }
        self.tiles[y as usize * self.width + x as usize]
    }

    pub fn tile_at(&self, p: Position) -> TileKind {
        self.tile(p.x.floor() as isize, p.y.floor() as isize)
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x.is_finite()
            && p.y.is_finite()
            && p.x >= 0.0
            && p.y >= 0.0
            && p.x < self.width as f64
            && p.y < self.height as f64
    }

    pub fn cells(&self) -> impl Iterator<Item = ((usize, usize), TileKind)> + '_ {
        self.tiles
            .iter()
            .enumerate()
            .map(|(i, t)| ((i % self.width, i / self.width), *t))
    }

    /// Serializes back to the text format. Textures are positional, so a
    /// parse of the output reproduces this map.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = self.params;
        let _ = writeln!(out, "{} {} {} {} {}", self.width, self.height, p.s_max, p.dt, p.seed);
        let spawn_cell = (self.spawn.x.floor() as usize, self.spawn.y.floor() as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                let c = match self.tile(x as isize, y as isize) {
                    _ if (x, y) == spawn_cell => 'S',
                    TileKind::Floor(_) => '.',
                    TileKind::Wall(REPETITIVE) => 'R',
                    TileKind::Wall(_) => '#',
                    TileKind::Lava => 'L',
                    TileKind::Web => 'W',
                    TileKind::Goal => 'G',
                };
                out.push(c);
            }
            out.push('\n');
        }
        for wp in &self.path {
            let _ = writeln!(out, "wp {} {}", wp.x, wp.y);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "6 4 4.0 0.1 7\n######\n#S.RW#\n#.LG.#\n######\nwp 3.5 2.5\n";

    #[test]
    fn parses_header_grid_and_path() {
        let m = TileMap::parse(SMALL).unwrap();
        assert_eq!((m.width(), m.height()), (6, 4));
        assert_eq!(m.params().seed, 7);
        assert_eq!(m.spawn(), Position::new(1.5, 1.5));
        assert_eq!(m.goal_cell(), (3, 2));
        assert_eq!(m.tile(3, 1), TileKind::Wall(REPETITIVE));
        assert_eq!(m.tile(4, 1), TileKind::Web);
        assert_eq!(m.tile(2, 2), TileKind::Lava);
        assert_eq!(m.path(), &[Position::new(3.5, 2.5)]);
    }

    #[test]
    fn text_roundtrip() {
        let m = TileMap::parse(SMALL).unwrap();
        assert_eq!(TileMap::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_open_border() {
        let err = TileMap::parse("4 3 4 0.1 0\n####\n#SG.\n####\n").unwrap_err();
        assert!(matches!(err, MapError::Invalid(_)));
    }

    #[test]
    fn rejects_two_goals_and_missing_goal() {
        assert!(TileMap::parse("5 3 4 0.1 0\n#####\n#SGG#\n#####\n").is_err());
        assert!(TileMap::parse("5 3 4 0.1 0\n#####\n#S..#\n#####\n").is_err());
    }

    #[test]
    fn rejects_unknown_code_and_short_grid() {
        assert!(TileMap::parse("5 3 4 0.1 0\n#####\n#SXG#\n#####\n").is_err());
        assert!(TileMap::parse("5 3 4 0.1 0\n#####\n#S.G#\n").is_err());
    }

    #[test]
    fn textures_stay_inside_table() {
        for x in 0..50 {
            for y in 0..50 {
                assert!(texture_for(x, y, 1) < TEXTURE_COUNT);
            }
        }
    }
}
