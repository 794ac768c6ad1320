//! Planar points and swarm configurations.

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vector2<f64>;

/// Quarter-turn (counter-clockwise) of a planar vector.
#[inline]
pub fn quarter_turn(v: Point) -> Point {
    Point::new(-v.y, v.x)
}

/// Positions of the `n` agents of a planar swarm.
///
/// Every coordinate is finite. The stacked form `[x_1, y_1, ..., x_n, y_n]`
/// is the state vector of the closed-loop system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SwarmConfig {
    positions: Vec<Point>,
}

impl SwarmConfig {
    pub fn new(positions: Vec<Point>) -> Result<Self> {
        if let Some(i) = positions
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::invalid(format!("agent {i} has a non-finite position")));
        }
        Ok(SwarmConfig { positions })
    }

    pub fn from_xy(points: &[(f64, f64)]) -> Result<Self> {
        Self::new(points.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Rebuilds a configuration from a stacked state vector of even length.
    pub fn from_stacked(state: &DVector<f64>) -> Result<Self> {
        if state.len() % 2 != 0 {
            return Err(Error::invalid("stacked state has odd length"));
        }
        Self::new(
            state
                .as_slice()
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect(),
        )
    }

    pub(crate) fn from_positions_unchecked(positions: Vec<Point>) -> Self {
        SwarmConfig { positions }
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn position(&self, i: usize) -> Point {
        self.positions[i]
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.n(),
            self.positions.iter().flat_map(|p| [p.x, p.y]),
        )
    }

    /// Arithmetic mean of the agent positions. Zero for an empty swarm.
    pub fn center(&self) -> Point {
        if self.positions.is_empty() {
            return Point::zeros();
        }
        let sum = self.positions.iter().fold(Point::zeros(), |acc, p| acc + p);
        sum / self.n() as f64
    }

    pub fn translated(&self, offset: Point) -> Self {
        SwarmConfig {
            positions: self.positions.iter().map(|p| p + offset).collect(),
        }
    }

    /// Rotation by `angle` radians about `pivot`.
    pub fn rotated(&self, angle: f64, pivot: Point) -> Self {
        let (s, c) = angle.sin_cos();
        SwarmConfig {
            positions: self
                .positions
                .iter()
                .map(|p| {
                    let d = p - pivot;
                    pivot + Point::new(c * d.x - s * d.y, s * d.x + c * d.y)
                })
                .collect(),
        }
    }

    pub fn scaled(&self, factor: f64, pivot: Point) -> Self {
        SwarmConfig {
            positions: self
                .positions
                .iter()
                .map(|p| pivot + (p - pivot) * factor)
                .collect(),
        }
    }

    /// Reorders agents so that agent `k` of the result is agent `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.n()];
        if perm.len() != self.n() {
            return Err(Error::invalid("permutation length does not match agent count"));
        }
        for &p in perm {
            if p >= self.n() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::invalid("not a permutation"));
            }
        }
        Ok(SwarmConfig {
            positions: perm.iter().map(|&p| self.positions[p]).collect(),
        })
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.positions[i] - self.positions[j]).norm()
    }
}

impl TryFrom<Vec<[f64; 2]>> for SwarmConfig {
    type Error = Error;

    fn try_from(value: Vec<[f64; 2]>) -> Result<Self> {
        SwarmConfig::new(value.into_iter().map(|[x, y]| Point::new(x, y)).collect())
    }
}

impl From<SwarmConfig> for Vec<[f64; 2]> {
    fn from(value: SwarmConfig) -> Self {
        value.positions.iter().map(|p| [p.x, p.y]).collect()
    }
}

/// Center of the swarm.
pub fn swarm_center(config: &SwarmConfig) -> Point {
    config.center()
}
