//! Zone occupancy and post-encroachment time.

use serde::{Deserialize, Serialize};

use super::geometry::Polygon;
use super::Track;

/// First entry and last exit of a track through a zone, with boundary
/// crossings interpolated between samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub enter: f64,
    pub exit: f64,
}

impl Occupancy {
    pub fn overlaps(&self, other: &Occupancy) -> bool {
        self.enter <= other.exit && other.enter <= self.exit
    }
}

/// `None` when the track never touches the zone.
pub fn occupancy(track: &Track, zone: &Polygon) -> Option<Occupancy> {
    let mut times: Vec<f64> = track
        .samples
        .iter()
        .filter(|s| zone.contains(&s.pos))
        .map(|s| s.t)
        .collect();
    for w in track.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        times.extend(
            zone.crossings(&a.pos, &b.pos)
                .into_iter()
                .map(|u| a.t + u * (b.t - a.t)),
        );
    }
    let enter = times.iter().copied().reduce(f64::min)?;
    let exit = times.iter().copied().reduce(f64::max)?;
    Some(Occupancy { enter, exit })
}

/// Time from the first user leaving to the second arriving; zero when both
/// are in the zone together.
pub fn pet_between(a: &Occupancy, b: &Occupancy) -> f64 {
    if a.overlaps(b) {
        0.0
    } else if a.exit < b.enter {
        b.enter - a.exit
    } else {
        a.enter - b.exit
    }
}

/// `None` when either track never enters the zone.
pub fn compute_pet(a: &Track, b: &Track, zone: &Polygon) -> Option<f64> {
    Some(pet_between(&occupancy(a, zone)?, &occupancy(b, zone)?))
}
