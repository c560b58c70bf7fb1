//! Speeds, headings and maneuver classes from world-coordinate tracks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{SiteConfig, Track};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 5;
/// Net heading change, in degrees, still counted as going straight.
pub const STRAIGHT_TOLERANCE_DEG: f64 = 20.0;
/// Samples slower than this (m/s) carry no usable heading.
pub const MOVING_SPEED: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics {
    pub speed: Vec<f64>,
    /// Radians, counter-clockwise from +x.
    pub heading: Vec<f64>,
}

/// Differences positions across a symmetric window of `window` samples,
/// shrinking it to one side at the track ends.
pub fn kinematics(track: &Track, window: usize) -> Result<Kinematics> {
    if window < 2 {
        return Err(Error::domain("window", "needs at least two samples"));
    }
    let n = track.samples.len();
    if n < window + 1 {
        return Err(Error::Pipeline(format!(
            "track {} has {n} samples, kinematics needs at least {}",
            track.id,
            window + 1
        )));
    }
    let half = window / 2;
    let (speed, heading) = (0..n)
        .map(|i| {
            let lo = &track.samples[i.saturating_sub(half)];
            let hi = &track.samples[(i + half).min(n - 1)];
            let (dx, dy) = (hi.pos.x - lo.pos.x, hi.pos.y - lo.pos.y);
            (dx.hypot(dy) / (hi.t - lo.t), dy.atan2(dx))
        })
        .unzip();
    Ok(Kinematics { speed, heading })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnDirection {
    Clockwise,
    CounterClockwise,
}

impl TurnDirection {
    fn sign(self) -> f64 {
        match self {
            TurnDirection::Clockwise => -1.0,
            TurnDirection::CounterClockwise => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maneuver {
    RightTurning,
    StraightGoing,
    Other,
}

fn wrap(angle: f64) -> f64 {
    let a = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if a == -PI {
        PI
    } else {
        a
    }
}

/// Net heading change in radians over the moving samples, unwrapped.
pub fn net_heading_change(kin: &Kinematics) -> Option<f64> {
    let moving: Vec<f64> = kin
        .heading
        .iter()
        .zip(&kin.speed)
        .filter(|(_, &v)| v > MOVING_SPEED)
        .map(|(&h, _)| h)
        .collect();
    (moving.len() >= 2).then(|| moving.windows(2).map(|w| wrap(w[1] - w[0])).sum())
}

pub fn classify_maneuver(kin: &Kinematics, site: &SiteConfig) -> Maneuver {
    let Some(net) = net_heading_change(kin) else {
        return Maneuver::Other;
    };
    let net_deg = net.to_degrees();
    if net_deg * site.turn_direction.sign() >= site.turn_angle_threshold {
        Maneuver::RightTurning
    } else if net_deg.abs() <= STRAIGHT_TOLERANCE_DEG {
        Maneuver::StraightGoing
    } else {
        Maneuver::Other
    }
}
