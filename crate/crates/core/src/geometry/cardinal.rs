use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ensure_finite, GeometryError, Result, Vec3};

/// Relative tolerance under which a projection counts as zero in
/// [`classify_cardinal`].
pub const DEFAULT_CARDINAL_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cardinal {
    North,
    East,
    South,
    West,
}

impl Cardinal {
    /// The axis obtained by `cross(down, self)`.
    fn next(self) -> Cardinal {
        match self {
            Cardinal::South => Cardinal::West,
            Cardinal::West => Cardinal::North,
            Cardinal::North => Cardinal::East,
            Cardinal::East => Cardinal::South,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Cardinal::North => "North",
            Cardinal::East => "East",
            Cardinal::South => "South",
            Cardinal::West => "West",
        }
    }

    pub fn letter(&self) -> &'static str {
        &self.as_str()[..1]
    }
}

impl fmt::Display for Cardinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cardinal {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "north" | "n" => Ok(Cardinal::North),
            "east" | "e" => Ok(Cardinal::East),
            "south" | "s" => Ok(Cardinal::South),
            "west" | "w" => Ok(Cardinal::West),
            _ => Err(format!("unknown cardinal direction `{s}`")),
        }
    }
}

/// World-space unit vectors of the four cardinal directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardinalMap {
    pub north: Vec3,
    pub east: Vec3,
    pub south: Vec3,
    pub west: Vec3,
}

impl CardinalMap {
    pub fn get(&self, c: Cardinal) -> Vec3 {
        match c {
            Cardinal::North => self.north,
            Cardinal::East => self.east,
            Cardinal::South => self.south,
            Cardinal::West => self.west,
        }
    }

    fn set(&mut self, c: Cardinal, v: Vec3) {
        match c {
            Cardinal::North => self.north = v,
            Cardinal::East => self.east = v,
            Cardinal::South => self.south = v,
            Cardinal::West => self.west = v,
        }
    }
}

/// Completes the compass from one known axis and the down direction by
/// walking `S → W → N → E → S`, each step `next = cross(down, current)`.
///
/// A known axis that is not perpendicular to `down` is re-orthogonalized first.
pub fn derive_cardinal_axes(known: Cardinal, known_axis: &Vec3, down: &Vec3) -> Result<CardinalMap> {
    ensure_finite(known_axis, "cardinal axis")?;
    ensure_finite(down, "down vector")?;
    let down_norm = down.norm();
    let axis_norm = known_axis.norm();
    if down_norm == 0.0 || axis_norm == 0.0 {
        return Err(GeometryError::Degenerate("zero-length cardinal input".into()));
    }
    let y = down / down_norm;
    let horizontal = known_axis - y * known_axis.dot(&y);
    let h_norm = horizontal.norm();
    if h_norm <= 1e-9 * axis_norm {
        return Err(GeometryError::Degenerate(
            "cardinal axis is parallel to down".into(),
        ));
    }
    let mut map = CardinalMap {
        north: Vec3::zeros(),
        east: Vec3::zeros(),
        south: Vec3::zeros(),
        west: Vec3::zeros(),
    };
    let mut label = known;
    let mut axis = horizontal / h_norm;
    map.set(label, axis);
    for _ in 0..3 {
        let next = y.cross(&axis);
        axis = next / next.norm();
        label = label.next();
        map.set(label, axis);
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CardinalLabel {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
    Indeterminate,
}

impl CardinalLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CardinalLabel::N => "N",
            CardinalLabel::NE => "NE",
            CardinalLabel::E => "E",
            CardinalLabel::SE => "SE",
            CardinalLabel::S => "S",
            CardinalLabel::SW => "SW",
            CardinalLabel::W => "W",
            CardinalLabel::NW => "NW",
            CardinalLabel::Indeterminate => "indeterminate",
        }
    }

    pub fn long_name(&self) -> &'static str {
        match self {
            CardinalLabel::N => "north",
            CardinalLabel::NE => "north-east",
            CardinalLabel::E => "east",
            CardinalLabel::SE => "south-east",
            CardinalLabel::S => "south",
            CardinalLabel::SW => "south-west",
            CardinalLabel::W => "west",
            CardinalLabel::NW => "north-west",
            CardinalLabel::Indeterminate => "indeterminate",
        }
    }

    pub fn from_long_name(s: &str) -> Option<CardinalLabel> {
        let s = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        CardinalLabel::ALL
            .into_iter()
            .find(|l| l.long_name() == s || l.as_str().eq_ignore_ascii_case(&s))
    }

    pub const ALL: [CardinalLabel; 9] = [
        CardinalLabel::N,
        CardinalLabel::NE,
        CardinalLabel::E,
        CardinalLabel::SE,
        CardinalLabel::S,
        CardinalLabel::SW,
        CardinalLabel::W,
        CardinalLabel::NW,
        CardinalLabel::Indeterminate,
    ];
}

impl fmt::Display for CardinalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Quadrant of a displacement from the signs of its north and east
/// projections. A projection within `margin · |horizontal|` of zero collapses
/// to the pure axis label.
pub fn classify_cardinal(disp: &Vec3, map: &CardinalMap, margin: f64) -> CardinalLabel {
    let up = map.north.cross(&map.east);
    let up_norm = up.norm();
    let disp_norm = disp.norm();
    if up_norm == 0.0 || disp_norm == 0.0 || !disp_norm.is_finite() {
        return CardinalLabel::Indeterminate;
    }
    let up = up / up_norm;
    let horizontal = disp - up * disp.dot(&up);
    let h = horizontal.norm();
    if h <= 1e-9 * disp_norm {
        return CardinalLabel::Indeterminate;
    }
    let pn = disp.dot(&map.north);
    let pe = disp.dot(&map.east);
    let n = if pn.abs() <= margin * h { 0 } else if pn > 0.0 { 1 } else { -1 };
    let e = if pe.abs() <= margin * h { 0 } else if pe > 0.0 { 1 } else { -1 };
    match (n, e) {
        (1, 1) => CardinalLabel::NE,
        (1, -1) => CardinalLabel::NW,
        (-1, 1) => CardinalLabel::SE,
        (-1, -1) => CardinalLabel::SW,
        (1, 0) => CardinalLabel::N,
        (-1, 0) => CardinalLabel::S,
        (0, 1) => CardinalLabel::E,
        (0, -1) => CardinalLabel::W,
        _ => CardinalLabel::Indeterminate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enu() -> CardinalMap {
        derive_cardinal_axes(
            Cardinal::South,
            &Vec3::new(0.0, -1.0, 0.0),
            &Vec3::new(0.0, 0.0, -1.0),
        )
        .unwrap()
    }

    #[test]
    fn enu_from_south() {
        let m = enu();
        assert_eq!(m.west, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(m.north, Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(m.east, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(m.south, Vec3::new(0.0, -1.0, 0.0));
    }

    #[test]
    fn enu_from_north_matches() {
        let m = derive_cardinal_axes(
            Cardinal::North,
            &Vec3::new(0.0, 1.0, 0.0),
            &Vec3::new(0.0, 0.0, -1.0),
        )
        .unwrap();
        assert_eq!(m, enu());
    }

    #[test]
    fn parallel_axis_rejected() {
        let r = derive_cardinal_axes(
            Cardinal::South,
            &Vec3::new(0.0, 0.0, -1.0),
            &Vec3::new(0.0, 0.0, -1.0),
        );
        assert!(matches!(r, Err(GeometryError::Degenerate(_))));
    }

    #[test]
    fn tilted_axis_is_reorthogonalized() {
        let m = derive_cardinal_axes(
            Cardinal::North,
            &Vec3::new(0.0, 1.0, 0.5),
            &Vec3::new(0.0, 0.0, -1.0),
        )
        .unwrap();
        assert!((m.north - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn classify_basic() {
        let m = enu();
        let margin = DEFAULT_CARDINAL_MARGIN;
        assert_eq!(classify_cardinal(&Vec3::new(1.0, 0.0, 0.0), &m, margin), CardinalLabel::E);
        assert_eq!(classify_cardinal(&Vec3::new(1.0, 1.0, 0.0), &m, margin), CardinalLabel::NE);
        assert_eq!(classify_cardinal(&Vec3::new(-1.0, -2.0, 5.0), &m, margin), CardinalLabel::SW);
        assert_eq!(
            classify_cardinal(&Vec3::new(0.0, 0.0, 3.0), &m, margin),
            CardinalLabel::Indeterminate
        );
    }

    #[test]
    fn long_names_parse() {
        assert_eq!(CardinalLabel::from_long_name("north-east"), Some(CardinalLabel::NE));
        assert_eq!(CardinalLabel::from_long_name("South West"), Some(CardinalLabel::SW));
        assert_eq!(CardinalLabel::from_long_name("NW"), Some(CardinalLabel::NW));
        assert_eq!(CardinalLabel::from_long_name("up"), None);
    }
}
