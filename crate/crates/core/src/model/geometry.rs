use serde::{Deserialize, Serialize};

use super::ModelError;

/// Number of micro-units in one normalized coordinate unit.
pub const MICROS: u32 = 1_000_000;

/// A rectangle in normalized screenshot coordinates.
///
/// Coordinates are held as integer micro-units so that values survive the
/// canonical text encoding exactly. `w` and `h` are strictly positive and the
/// rectangle never leaves the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Rect {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
}

impl Rect {
    pub fn from_micros(x: u32, y: u32, w: u32, h: u32) -> Result<Self, ModelError> {
        let fits = |o: u32, len: u32| len > 0 && u64::from(o) + u64::from(len) <= u64::from(MICROS);
        if !fits(x, w) || !fits(y, h) {
            return Err(ModelError::InvalidRect { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Builds a rect from normalized coordinates, rounding each to the nearest micro-unit.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, ModelError> {
        let to_micros = |v: f64| -> Option<u32> {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return None;
            }
            Some((v * f64::from(MICROS)).round() as u32)
        };
        match (to_micros(x), to_micros(y), to_micros(w), to_micros(h)) {
            (Some(x), Some(y), Some(w), Some(h)) => Self::from_micros(x, y, w, h),
            _ => Err(ModelError::InvalidRect { x: 0, y: 0, w: 0, h: 0 }),
        }
    }

    pub fn x_micros(&self) -> u32 {
        self.x
    }
    pub fn y_micros(&self) -> u32 {
        self.y
    }
    pub fn w_micros(&self) -> u32 {
        self.w
    }
    pub fn h_micros(&self) -> u32 {
        self.h
    }

    pub fn x(&self) -> f64 {
        f64::from(self.x) / f64::from(MICROS)
    }
    pub fn y(&self) -> f64 {
        f64::from(self.y) / f64::from(MICROS)
    }
    pub fn w(&self) -> f64 {
        f64::from(self.w) / f64::from(MICROS)
    }
    pub fn h(&self) -> f64 {
        f64::from(self.h) / f64::from(MICROS)
    }

    /// Area in square micro-units; exact, so equal areas compare equal.
    pub fn area_micros(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Closed containment test for a normalized point.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let scale = f64::from(MICROS);
        let (px, py) = (px * scale, py * scale);
        px >= f64::from(self.x)
            && px <= f64::from(self.x) + f64::from(self.w)
            && py >= f64::from(self.y)
            && py <= f64::from(self.y) + f64::from(self.h)
    }
}

impl<'de> Deserialize<'de> for Rect {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            x: u32,
            y: u32,
            w: u32,
            h: u32,
        }
        let r = Raw::deserialize(d)?;
        Rect::from_micros(r.x, r.y, r.w, r.h).map_err(serde::de::Error::custom)
    }
}
