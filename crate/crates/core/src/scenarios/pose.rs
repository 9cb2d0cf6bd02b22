use serde::{Deserialize, Serialize};

/// Map any angle in degrees into (-180, 180].
pub fn normalize_deg(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Map any angle in degrees into [0, 360).
pub fn wrap_360(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Planar pose. `theta` is in degrees, counter-clockwise (left) positive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_deg(theta),
        }
    }

    /// The pose `distance` meters further along the current heading.
    pub fn advanced(self, distance: f64) -> Self {
        let (sin, cos) = self.theta.to_radians().sin_cos();
        Self {
            x: self.x + distance * cos,
            y: self.y + distance * sin,
            theta: self.theta,
        }
    }

    pub fn turned(self, degrees: f64) -> Self {
        Self::new(self.x, self.y, self.theta + degrees)
    }
}

/// Longest distance covered between two cancellation checkpoints.
pub const SEGMENT_M: f64 = 0.25;

/// Fractions of a motion at which checkpoints fall; the last one is 1.
pub fn segment_fractions(distance: f64) -> Vec<f64> {
    let n = (distance.abs() / SEGMENT_M).ceil().max(1.0) as usize;
    (1..=n).map(|k| k as f64 / n as f64).collect()
}
