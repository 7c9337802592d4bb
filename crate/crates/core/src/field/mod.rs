//! Closed-form linear field model and the explicit linear operator.

mod analytic2d;
mod analytic3d;
mod operator;
#[cfg(test)]
pub(crate) mod quadrature_oracle;

use std::fmt;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use analytic2d::{field_2d_block, h_field_2d};
pub use analytic3d::{field_3d_block, h_field_3d, h_field_charged_polygon};
pub use operator::{assemble_linear_operator, gateaux_linear, AnalyticField, LinearOperator};

use crate::error::{Error, Result};

/// Evaluations closer than this to any charged facet are rejected.
pub const SINGULAR_DISTANCE: f64 = 1e-9;

/// Material region of a point or mesh element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    Air,
    /// Permanent-magnet block, 1-based index.
    Magnet(usize),
    Iron,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Air => write!(f, "air"),
            Region::Magnet(i) => write!(f, "magnet-{i}"),
            Region::Iron => write!(f, "iron"),
        }
    }
}

impl FromStr for Region {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "air" => Ok(Region::Air),
            "iron" => Ok(Region::Iron),
            _ => s
                .strip_prefix("magnet-")
                .and_then(|n| n.parse().ok())
                .filter(|i| (1..=16).contains(i))
                .map(Region::Magnet)
                .ok_or_else(|| Error::Mesh(format!("unknown region tag '{s}'"))),
        }
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An evaluation position. 2D models ignore `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldPoint {
    pub position: [f64; 3],
    #[serde(default = "air")]
    pub region: Region,
}

fn air() -> Region {
    Region::Air
}

impl FieldPoint {
    pub fn air(x: f64, y: f64, z: f64) -> Self {
        FieldPoint {
            position: [x, y, z],
            region: Region::Air,
        }
    }

    pub fn xy(&self) -> Vector2<f64> {
        Vector2::new(self.position[0], self.position[1])
    }

    pub fn xyz(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub(crate) fn region_error(&self, reason: impl Into<String>) -> Error {
        Error::Region {
            x: self.position[0],
            y: self.position[1],
            z: self.position[2],
            reason: reason.into(),
        }
    }

    pub(crate) fn require_air(&self) -> Result<()> {
        if self.region != Region::Air {
            return Err(self.region_error(format!("tagged {}", self.region)));
        }
        Ok(())
    }
}
