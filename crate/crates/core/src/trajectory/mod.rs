//! From tracked trajectories to game observations.
//!
//! Image-space track points are rectified onto the ground plane, differenced
//! into speeds and headings, classified by maneuver, and finally paired into
//! interactions whose conflict-zone timing and starting geometry make them
//! valid games.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod extract;
pub mod geometry;
pub mod homography;
pub mod kinematics;
pub mod pet;

pub use extract::{
    extract_interactions, run_pipeline, ExtractionReport, InteractionPair, Label, Labels,
    RejectReason, Rejection, SkippedTrack,
};
pub use geometry::{Point, Polygon};
pub use homography::{fit_homography, Correspondence, Homography};
pub use kinematics::{classify_maneuver, kinematics, Kinematics, Maneuver, TurnDirection};
pub use pet::{compute_pet, occupancy, pet_between, Occupancy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoadUserClass {
    Vehicle,
    Ebike,
    Pedestrian,
}

/// One row of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub t: f64,
    pub track_id: String,
    pub class: RoadUserClass,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pos: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: String,
    pub class: RoadUserClass,
    /// Strictly increasing in time.
    pub samples: Vec<Sample>,
}

impl Track {
    pub fn start(&self) -> f64 {
        self.samples.first().map_or(f64::NAN, |s| s.t)
    }

    pub fn end(&self) -> f64 {
        self.samples.last().map_or(f64::NAN, |s| s.t)
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` holding `t`, and the
    /// fraction of the way through it.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let n = self.samples.len();
        if n == 0 || t < self.start() || t > self.end() {
            return None;
        }
        if n == 1 {
            return Some((0, 0.0));
        }
        let k = self
            .samples
            .partition_point(|s| s.t <= t)
            .saturating_sub(1)
            .min(n - 2);
        let (a, b) = (&self.samples[k], &self.samples[k + 1]);
        Some((k, (t - a.t) / (b.t - a.t)))
    }

    /// Linearly interpolated position.
    pub fn position_at(&self, t: f64) -> Option<Point> {
        let (k, u) = self.locate(t)?;
        let a = self.samples[k].pos;
        Some(match self.samples.get(k + 1) {
            Some(b) => a.lerp(&b.pos, u),
            None => a,
        })
    }

    /// Path length from the position at `t` to the first point of the path
    /// inside `zone`, and that point.
    pub fn distance_to_zone(&self, t: f64, zone: &Polygon) -> Option<(f64, Point)> {
        let (k, _) = self.locate(t)?;
        let start = self.position_at(t)?;
        if zone.contains(&start) {
            return Some((0.0, start));
        }
        let mut travelled = 0.0;
        let mut from = start;
        for next in &self.samples[k + 1..] {
            if let Some(&u) = zone.crossings(&from, &next.pos).first() {
                let entry = from.lerp(&next.pos, u);
                return Some((travelled + from.distance(&entry), entry));
            }
            travelled += from.distance(&next.pos);
            from = next.pos;
        }
        None
    }

    pub fn map_positions(&self, f: impl Fn(Point) -> Result<Point>) -> Result<Track> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    t: s.t,
                    pos: f(s.pos)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Track {
            id: self.id.clone(),
            class: self.class,
            samples,
        })
    }
}

/// Groups rows into tracks ordered by id, sorting each track by time.
pub fn group_tracks(points: Vec<TrackPoint>) -> Result<Vec<Track>> {
    let mut tracks: BTreeMap<String, Track> = BTreeMap::new();
    for p in points {
        if !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::Pipeline(format!(
                "track {} has a non-finite sample",
                p.track_id
            )));
        }
        let track = tracks.entry(p.track_id.clone()).or_insert_with(|| Track {
            id: p.track_id.clone(),
            class: p.class,
            samples: Vec::new(),
        });
        if track.class != p.class {
            return Err(Error::Pipeline(format!(
                "track {} changes class from {:?} to {:?}",
                p.track_id, track.class, p.class
            )));
        }
        track.samples.push(Sample {
            t: p.t,
            pos: Point::new(p.x, p.y),
        });
    }
    tracks
        .into_values()
        .map(|mut track| {
            track.samples.sort_by(|a, b| a.t.total_cmp(&b.t));
            if track.samples.windows(2).any(|w| w[0].t == w[1].t) {
                return Err(Error::Pipeline(format!(
                    "track {} has repeated timestamps",
                    track.id
                )));
            }
            Ok(track)
        })
        .collect()
}

/// Maps image-space tracks to world coordinates.
pub fn rectify(tracks: &[Track], h: &Homography) -> Result<Vec<Track>> {
    tracks
        .par_iter()
        .map(|t| t.map_positions(|p| h.apply(p)))
        .collect()
}

fn default_pet_threshold() -> f64 {
    6.0
}
fn default_min_start_distance() -> f64 {
    crate::game::MIN_DISTANCE
}
fn default_turn_angle() -> f64 {
    60.0
}
fn default_window() -> usize {
    kinematics::DEFAULT_WINDOW
}
fn default_turn_direction() -> TurnDirection {
    TurnDirection::Clockwise
}

/// Site geometry and thresholds. Polygons are in world metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteConfig {
    pub correspondences: Vec<Correspondence>,
    pub conflict_zone: Polygon,
    /// Right-turn lane area.
    pub influence_turn: Polygon,
    /// Curb or crosswalk area.
    pub influence_straight: Polygon,
    /// Nominal sampling rate of the tracks, Hz.
    pub frame_rate: f64,
    #[serde(default = "default_pet_threshold")]
    pub pet_threshold: f64,
    #[serde(default = "default_min_start_distance")]
    pub min_start_distance: f64,
    /// Degrees of net heading change marking a right turn.
    #[serde(default = "default_turn_angle")]
    pub turn_angle_threshold: f64,
    /// Differencing window for speeds, in samples.
    #[serde(default = "default_window")]
    pub speed_window: usize,
    /// Rotation sense of a right turn in the world frame.
    #[serde(default = "default_turn_direction")]
    pub turn_direction: TurnDirection,
}

impl SiteConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let site: SiteConfig = serde_json::from_str(&text)?;
        site.validate()?;
        Ok(site)
    }

    pub fn validate(&self) -> Result<()> {
        if self.correspondences.len() < 4 {
            return Err(Error::domain(
                "correspondences",
                "at least four are required",
            ));
        }
        self.conflict_zone.validate("conflict_zone")?;
        self.influence_turn.validate("influence_turn")?;
        self.influence_straight.validate("influence_straight")?;
        if !is_convex(&self.conflict_zone) {
            return Err(Error::domain("conflict_zone", "must be convex"));
        }
        let positive = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(field, format!("{v} must be positive")))
            }
        };
        positive("frame_rate", self.frame_rate)?;
        positive("pet_threshold", self.pet_threshold)?;
        positive("min_start_distance", self.min_start_distance)?;
        positive("turn_angle_threshold", self.turn_angle_threshold)?;
        if self.turn_angle_threshold <= kinematics::STRAIGHT_TOLERANCE_DEG {
            return Err(Error::domain(
                "turn_angle_threshold",
                "must exceed the straight-going tolerance of 20 degrees",
            ));
        }
        if self.speed_window < 2 {
            return Err(Error::domain("speed_window", "needs at least two samples"));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn example() -> Self {
        let unit = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        SiteConfig {
            correspondences: unit
                .iter()
                .map(|&p| Correspondence {
                    image: p.into(),
                    world: p.into(),
                })
                .collect(),
            conflict_zone: Polygon::rect(0.0, 0.0, 4.0, 4.0),
            influence_turn: Polygon::rect(-15.1, 0.0, 0.0, 4.0),
            influence_straight: Polygon::rect(0.0, -6.1, 4.0, 0.0),
            frame_rate: 8.0,
            pet_threshold: default_pet_threshold(),
            min_start_distance: default_min_start_distance(),
            turn_angle_threshold: default_turn_angle(),
            speed_window: default_window(),
            turn_direction: default_turn_direction(),
        }
    }
}

fn is_convex(poly: &Polygon) -> bool {
    let v = &poly.vertices;
    let n = v.len();
    let mut sign = 0.0;
    for i in 0..n {
        let c = geometry::cross(&v[i], &v[(i + 1) % n], &v[(i + 2) % n]);
        if c != 0.0 {
            if sign != 0.0 && c.signum() != sign {
                return false;
            }
            sign = c.signum();
        }
    }
    true
}
