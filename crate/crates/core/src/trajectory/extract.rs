use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kinematics::{classify_maneuver, kinematics, Kinematics, Maneuver};
use super::pet::{occupancy, pet_between};
use super::{fit_homography, group_tracks, rectify, RoadUserClass, SiteConfig, Track, TrackPoint};
use crate::error::{Error, Result, Side};
use crate::game::{GameKind, Observation};

/// Manually coded outcome of one interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub y_cross: bool,
    pub y_yield: bool,
    pub n_group: u32,
}

/// Keyed by pair id, `"<turning track>:<straight track>"`.
pub type Labels = BTreeMap<String, Label>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionPair {
    pub pair_id: String,
    pub kind: GameKind,
    pub straight_track: String,
    pub turning_track: String,
    pub game_start_t: f64,
    pub pet: f64,
    pub observation: Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum RejectReason {
    PetAboveThreshold { pet: f64 },
    NoGameStart,
    ExitedBeforeStart { side: &'static str },
    NeverReachesZone { side: &'static str },
    TooClose { side: &'static str, distance: f64 },
    InvalidObservation { message: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::PetAboveThreshold { pet } => write!(f, "PET {pet:.3} s above threshold"),
            RejectReason::NoGameStart => f.write_str("players never share their influence areas"),
            RejectReason::ExitedBeforeStart { side } => {
                write!(
                    f,
                    "{side} player left the conflict zone before the game started"
                )
            }
            RejectReason::NeverReachesZone { side } => {
                write!(
                    f,
                    "{side} player never reaches the conflict zone after the start"
                )
            }
            RejectReason::TooClose { side, distance } => {
                write!(
                    f,
                    "{side} player starts {distance:.3} m from the conflict zone"
                )
            }
            RejectReason::InvalidObservation { message } => f.write_str(message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub pair_id: String,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedTrack {
    pub track_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExtractionReport {
    pub pairs: Vec<InteractionPair>,
    pub rejections: Vec<Rejection>,
    /// Valid pairs without a label, excluded from `pairs`.
    pub unlabeled: Vec<String>,
    pub skipped_tracks: Vec<SkippedTrack>,
}

impl ExtractionReport {
    pub fn observations(&self) -> Vec<(GameKind, Observation)> {
        self.pairs
            .iter()
            .map(|p| (p.kind, p.observation.clone()))
            .collect()
    }
}

fn game_kind(turning: RoadUserClass, straight: RoadUserClass) -> Option<GameKind> {
    use RoadUserClass::*;
    match (turning, straight) {
        (Vehicle, Pedestrian) => Some(GameKind::VehiclePedestrian),
        (Vehicle, Ebike) => Some(GameKind::VehicleEbike),
        (Ebike, Pedestrian) => Some(GameKind::EbikePedestrian),
        _ => None,
    }
}

struct Classified<'a> {
    track: &'a Track,
    kin: Kinematics,
    maneuver: Maneuver,
}

impl Classified<'_> {
    fn speed_at(&self, t: f64) -> Option<f64> {
        let (k, u) = self.track.locate(t)?;
        let a = self.kin.speed[k];
        Some(match self.kin.speed.get(k + 1) {
            Some(b) => a + u * (b - a),
            None => a,
        })
    }
}

/// First shared sample instant with each player inside its influence area.
fn game_start(turning: &Track, straight: &Track, site: &SiteConfig) -> Option<f64> {
    let lo = turning.start().max(straight.start());
    let hi = turning.end().min(straight.end());
    let mut times: Vec<f64> = turning
        .samples
        .iter()
        .chain(&straight.samples)
        .map(|s| s.t)
        .filter(|t| (lo..=hi).contains(t))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times.into_iter().find(|&t| {
        let inside = |track: &Track, area: &super::Polygon| {
            track.position_at(t).is_some_and(|p| area.contains(&p))
        };
        inside(turning, &site.influence_turn) && inside(straight, &site.influence_straight)
    })
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Straight => "straight-going",
        Side::Turning => "right-turning",
    }
}

fn examine(
    turning: &Classified,
    straight: &Classified,
    site: &SiteConfig,
) -> Option<std::result::Result<(f64, f64, Observation), RejectReason>> {
    let zone = &site.conflict_zone;
    let occ_r = occupancy(turning.track, zone)?;
    let occ_s = occupancy(straight.track, zone)?;
    let pet = pet_between(&occ_r, &occ_s);
    Some((|| {
        if pet > site.pet_threshold {
            return Err(RejectReason::PetAboveThreshold { pet });
        }
        let t0 =
            game_start(turning.track, straight.track, site).ok_or(RejectReason::NoGameStart)?;
        for (side, occ) in [(Side::Straight, occ_s), (Side::Turning, occ_r)] {
            if occ.exit < t0 {
                return Err(RejectReason::ExitedBeforeStart {
                    side: side_name(side),
                });
            }
        }
        let measure = |side: Side, c: &Classified| {
            let (d, _) =
                c.track
                    .distance_to_zone(t0, zone)
                    .ok_or(RejectReason::NeverReachesZone {
                        side: side_name(side),
                    })?;
            if d < site.min_start_distance {
                return Err(RejectReason::TooClose {
                    side: side_name(side),
                    distance: d,
                });
            }
            let v = c.speed_at(t0).ok_or(RejectReason::NoGameStart)?;
            Ok((v, d))
        };
        let (v_s, d_s) = measure(Side::Straight, straight)?;
        let (v_r, d_r) = measure(Side::Turning, turning)?;
        let obs = Observation {
            v_s,
            v_r,
            d_s,
            d_r,
            n_group: 1,
            y_cross: false,
            y_yield: false,
            pet: Some(pet),
            id: None,
        };
        Ok((t0, pet, obs))
    })())
}

/// Pairs every right-turning track with every straight-going track of a
/// compatible class and keeps those forming a valid game.
///
/// Tracks must be in world coordinates. Output order follows track ids, so
/// identical inputs give identical reports.
pub fn extract_interactions(
    tracks: &[Track],
    site: &SiteConfig,
    labels: &Labels,
) -> Result<ExtractionReport> {
    site.validate()?;
    let mut sorted: Vec<&Track> = tracks.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if sorted.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::Pipeline("duplicate track ids".into()));
    }

    let classified: Vec<std::result::Result<Classified, SkippedTrack>> = sorted
        .par_iter()
        .map(|&track| match kinematics(track, site.speed_window) {
            Ok(kin) => {
                let maneuver = classify_maneuver(&kin, site);
                Ok(Classified {
                    track,
                    kin,
                    maneuver,
                })
            }
            Err(e) => Err(SkippedTrack {
                track_id: track.id.clone(),
                reason: e.to_string(),
            }),
        })
        .collect();

    let mut report = ExtractionReport::default();
    let mut usable = Vec::new();
    for c in classified {
        match c {
            Ok(c) => usable.push(c),
            Err(skip) => report.skipped_tracks.push(skip),
        }
    }
    let of = |m: Maneuver| usable.iter().filter(move |c| c.maneuver == m);

    for turning in of(Maneuver::RightTurning) {
        for straight in of(Maneuver::StraightGoing) {
            let Some(kind) = game_kind(turning.track.class, straight.track.class) else {
                continue;
            };
            let pair_id = format!("{}:{}", turning.track.id, straight.track.id);
            let outcome = match examine(turning, straight, site) {
                None => continue,
                Some(outcome) => outcome,
            };
            let (t0, pet, mut obs) = match outcome {
                Ok(found) => found,
                Err(reason) => {
                    report.rejections.push(Rejection { pair_id, reason });
                    continue;
                }
            };
            let Some(label) = labels.get(&pair_id) else {
                report.unlabeled.push(pair_id);
                continue;
            };
            obs.n_group = label.n_group;
            obs.y_cross = label.y_cross;
            obs.y_yield = label.y_yield;
            obs.id = Some(pair_id.clone());
            if let Err(e) = obs.validate() {
                report.rejections.push(Rejection {
                    pair_id,
                    reason: RejectReason::InvalidObservation {
                        message: e.to_string(),
                    },
                });
                continue;
            }
            report.pairs.push(InteractionPair {
                pair_id,
                kind,
                straight_track: straight.track.id.clone(),
                turning_track: turning.track.id.clone(),
                game_start_t: t0,
                pet,
                observation: obs,
            });
        }
    }
    Ok(report)
}

/// Calibrates, rectifies and extracts from image-space track points.
pub fn run_pipeline(
    points: Vec<TrackPoint>,
    site: &SiteConfig,
    labels: &Labels,
) -> Result<ExtractionReport> {
    site.validate()?;
    let h = fit_homography(&site.correspondences)?;
    let world = rectify(&group_tracks(points)?, &h)?;
    extract_interactions(&world, site, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Point, Sample};
    use std::f64::consts::FRAC_PI_2;

    const HZ: f64 = 8.0;

    fn sampled(id: &str, class: RoadUserClass, secs: f64, f: impl Fn(f64) -> Point) -> Track {
        let n = (secs * HZ) as usize;
        Track {
            id: id.into(),
            class,
            samples: (0..=n)
                .map(|k| {
                    let t = k as f64 / HZ;
                    Sample { t, pos: f(t) }
                })
                .collect(),
        }
    }

    /// 5 m/s east along y = 2 from x = -20, then a 5 m clockwise quarter
    /// turn at x = 6, then south.
    fn vehicle() -> Track {
        sampled("veh", RoadUserClass::Vehicle, 9.0, |t| {
            let s = 5.0 * t;
            let arc = 5.0 * FRAC_PI_2;
            if s <= 26.0 {
                Point::new(-20.0 + s, 2.0)
            } else if s <= 26.0 + arc {
                let phi = (s - 26.0) / 5.0;
                Point::new(6.0 + 5.0 * phi.sin(), -3.0 + 5.0 * phi.cos())
            } else {
                Point::new(11.0, -3.0 - (s - 26.0 - arc))
            }
        })
    }

    /// 1.25 m/s north along x = 2 from `y0`.
    fn pedestrian(y0: f64) -> Track {
        sampled("ped", RoadUserClass::Pedestrian, 16.0, |t| {
            Point::new(2.0, y0 + 1.25 * t)
        })
    }

    fn labels(id: &str) -> Labels {
        [(
            id.to_string(),
            Label {
                y_cross: false,
                y_yield: false,
                n_group: 2,
            },
        )]
        .into()
    }

    #[test]
    fn crossing_pair_measurements() {
        let site = SiteConfig::example();
        let report =
            extract_interactions(&[vehicle(), pedestrian(-9.125)], &site, &labels("veh:ped"))
                .unwrap();
        assert!(report.rejections.is_empty(), "{:?}", report.rejections);
        assert_eq!(report.pairs.len(), 1);
        let pair = &report.pairs[0];
        assert_eq!(pair.kind, GameKind::VehiclePedestrian);
        assert_eq!(pair.game_start_t, 2.5);
        assert!((pair.pet - 2.5).abs() < 1e-12);
        let o = &pair.observation;
        assert!((o.v_s - 1.25).abs() < 1e-12);
        assert!((o.v_r - 5.0).abs() < 1e-12);
        assert!((o.d_s - 6.0).abs() < 1e-12);
        assert!((o.d_r - 7.5).abs() < 1e-12);
        assert_eq!(o.n_group, 2);
        assert_eq!(o.id.as_deref(), Some("veh:ped"));
    }

    #[test]
    fn late_arrival_is_rejected_on_pet() {
        // enters the zone at 11.0 s, 6.2 s after the vehicle left
        let site = SiteConfig::example();
        let report =
            extract_interactions(&[vehicle(), pedestrian(-13.75)], &site, &labels("veh:ped"))
                .unwrap();
        assert!(report.pairs.is_empty());
        assert!(matches!(
            report.rejections[0].reason,
            RejectReason::PetAboveThreshold { pet } if (pet - 6.2).abs() < 1e-9
        ));
    }

    #[test]
    fn disjoint_paths_give_nothing() {
        let site = SiteConfig::example();
        let far = sampled("ped", RoadUserClass::Pedestrian, 16.0, |t| {
            Point::new(30.0, -9.0 + 1.25 * t)
        });
        let report = extract_interactions(&[vehicle(), far], &site, &labels("veh:ped")).unwrap();
        assert_eq!(report, ExtractionReport::default());
    }

    #[test]
    fn starting_inside_the_zone_is_too_close() {
        let mut site = SiteConfig::example();
        site.influence_straight = super::super::Polygon::rect(0.0, -6.1, 4.0, 2.0);
        let report =
            extract_interactions(&[vehicle(), pedestrian(0.5)], &site, &labels("veh:ped")).unwrap();
        assert!(report.pairs.is_empty());
        assert!(matches!(
            report.rejections[0].reason,
            RejectReason::TooClose { side: "straight-going", distance } if distance == 0.0
        ));
    }

    #[test]
    fn missing_label_is_reported() {
        let site = SiteConfig::example();
        let report =
            extract_interactions(&[vehicle(), pedestrian(-9.125)], &site, &Labels::new()).unwrap();
        assert!(report.pairs.is_empty());
        assert_eq!(report.unlabeled, vec!["veh:ped".to_string()]);
    }

    #[test]
    fn short_tracks_are_skipped() {
        let site = SiteConfig::example();
        let stub = sampled("stub", RoadUserClass::Ebike, 0.25, |t| Point::new(t, 0.0));
        let report = extract_interactions(&[vehicle(), stub], &site, &Labels::new()).unwrap();
        assert_eq!(report.skipped_tracks.len(), 1);
        assert_eq!(report.skipped_tracks[0].track_id, "stub");
    }

    #[test]
    fn pipeline_from_image_points_is_deterministic() {
        let site = SiteConfig::example();
        let rows: Vec<TrackPoint> = [vehicle(), pedestrian(-9.125)]
            .iter()
            .flat_map(|tr| {
                tr.samples.iter().map(|s| TrackPoint {
                    t: s.t,
                    track_id: tr.id.clone(),
                    class: tr.class,
                    x: s.pos.x,
                    y: s.pos.y,
                })
            })
            .rev()
            .collect();
        let a = run_pipeline(rows.clone(), &site, &labels("veh:ped")).unwrap();
        let b = run_pipeline(rows, &site, &labels("veh:ped")).unwrap();
        assert_eq!(a.pairs.len(), 1);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
