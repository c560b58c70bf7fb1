//! The two-player crossing game between a right-turning road user and a
//! straight-going one.
//!
//! The straight-going player chooses between crossing and staying, the
//! right-turning player between yielding and not yielding. Payoffs depend on
//! each player's approach rate (speed over distance to the conflict zone) and
//! the size of the straight-going group:
//!
//! | straight \ turning | Yield                    | NotYield                                  |
//! |--------------------|--------------------------|-------------------------------------------|
//! | Cross   (u_s)      | β₀·Vs/Ds                 | β₀·Vs/Ds + β₁·Vr/Dr + β₂·N                |
//! | Cross   (u_r)      | c₂                       | β₃·Vr/Dr + β₄·Vs/Ds                       |
//! | Stay    (u_s)      | c₁                       | c₁                                        |
//! | Stay    (u_r)      | c₂                       | β₃·Vr/Dr                                  |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{finite, probability, Error, Result};

/// Smallest admissible distance to the conflict zone at game start (m).
pub const MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StraightAction {
    Cross = 0,
    Stay = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RightTurnAction {
    Yield = 0,
    NotYield = 1,
}

impl StraightAction {
    pub const ALL: [StraightAction; 2] = [StraightAction::Cross, StraightAction::Stay];
}

impl RightTurnAction {
    pub const ALL: [RightTurnAction; 2] = [RightTurnAction::Yield, RightTurnAction::NotYield];
}

/// Which pair of road users is interacting (turning party first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GameKind {
    #[serde(rename = "vp")]
    VehiclePedestrian,
    #[serde(rename = "ve")]
    VehicleEbike,
    #[serde(rename = "ep")]
    EbikePedestrian,
}

impl GameKind {
    pub const ALL: [GameKind; 3] = [
        GameKind::VehiclePedestrian,
        GameKind::VehicleEbike,
        GameKind::EbikePedestrian,
    ];

    pub fn code(self) -> &'static str {
        match self {
            GameKind::VehiclePedestrian => "vp",
            GameKind::VehicleEbike => "ve",
            GameKind::EbikePedestrian => "ep",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            GameKind::VehiclePedestrian => "vehicle-pedestrian",
            GameKind::VehicleEbike => "vehicle-e-bike",
            GameKind::EbikePedestrian => "e-bike-pedestrian",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for GameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vp" | "vehicle-pedestrian" => Ok(GameKind::VehiclePedestrian),
            "ve" | "vehicle-ebike" | "vehicle-e-bike" => Ok(GameKind::VehicleEbike),
            "ep" | "ebike-pedestrian" | "e-bike-pedestrian" => Ok(GameKind::EbikePedestrian),
            other => Err(Error::domain(
                "game_kind",
                format!("unknown kind `{other}`"),
            )),
        }
    }
}

/// One interaction: covariates at game start plus both recorded decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Speed of the straight-going player (m/s).
    pub v_s: f64,
    /// Speed of the right-turning player (m/s).
    pub v_r: f64,
    /// Distance of the straight-going player to the conflict zone (m).
    pub d_s: f64,
    /// Distance of the right-turning player to the conflict zone (m).
    pub d_r: f64,
    /// Size of the straight-going group.
    pub n_group: u32,
    pub y_cross: bool,
    pub y_yield: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pet: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl Observation {
    /// Builds a validated observation with both decisions set to false.
    pub fn new(v_s: f64, v_r: f64, d_s: f64, d_r: f64, n_group: u32) -> Result<Self> {
        let obs = Observation {
            v_s,
            v_r,
            d_s,
            d_r,
            n_group,
            y_cross: false,
            y_yield: false,
            pet: None,
            id: None,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn with_decisions(mut self, y_cross: bool, y_yield: bool) -> Self {
        self.y_cross = y_cross;
        self.y_yield = y_yield;
        self
    }

    pub fn with_pet(mut self, pet: f64) -> Self {
        self.pet = Some(pet);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("v_s", self.v_s), ("v_r", self.v_r)] {
            if finite(field, v)? < 0.0 {
                return Err(Error::domain(field, format!("speed {v} is negative")));
            }
        }
        for (field, d) in [("d_s", self.d_s), ("d_r", self.d_r)] {
            if finite(field, d)? < MIN_DISTANCE {
                return Err(Error::domain(
                    field,
                    format!("distance {d} is below {MIN_DISTANCE} m"),
                ));
            }
        }
        if self.n_group < 1 {
            return Err(Error::domain("n_group", "group size must be at least 1"));
        }
        if let Some(pet) = self.pet {
            if finite("pet", pet)? < 0.0 {
                return Err(Error::domain("pet", format!("{pet} is negative")));
            }
        }
        Ok(())
    }

    /// Approach rate of the straight-going player, `v_s / d_s`.
    #[inline]
    pub fn straight_rate(&self) -> f64 {
        self.v_s / self.d_s
    }

    /// Approach rate of the right-turning player, `v_r / d_r`.
    #[inline]
    pub fn turning_rate(&self) -> f64 {
        self.v_r / self.d_r
    }

    #[inline]
    pub fn group(&self) -> f64 {
        f64::from(self.n_group)
    }
}

/// Structural payoff coefficients and the rationality scale λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffParams {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
}

/// Names of the structural coefficients in [`PayoffParams::theta`] order.
pub const THETA_NAMES: [&str; 7] = ["beta0", "beta1", "beta2", "beta3", "beta4", "c1", "c2"];

impl PayoffParams {
    pub fn zero() -> Self {
        Self::from_theta([0.0; 7], 0.0)
    }

    /// Builds parameters from `(β₀, β₁, β₂, β₃, β₄, c₁, c₂)` and λ.
    pub fn from_theta(theta: [f64; 7], lambda: f64) -> Self {
        let [beta0, beta1, beta2, beta3, beta4, c1, c2] = theta;
        PayoffParams {
            beta0,
            beta1,
            beta2,
            beta3,
            beta4,
            c1,
            c2,
            lambda,
        }
    }

    /// `(β₀, β₁, β₂, β₃, β₄, c₁, c₂)`.
    pub fn theta(&self) -> [f64; 7] {
        [
            self.beta0, self.beta1, self.beta2, self.beta3, self.beta4, self.c1, self.c2,
        ]
    }

    pub fn theta_norm(&self) -> f64 {
        self.theta().iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    /// Rescales to the identifying normalization `‖θ‖ = 1`, moving the scale
    /// into λ. Choice probabilities are unchanged. A zero θ is left as is.
    pub fn normalized(&self) -> Self {
        let norm = self.theta_norm();
        if norm == 0.0 {
            return *self;
        }
        Self::from_theta(self.theta().map(|t| t / norm), self.lambda * norm)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in THETA_NAMES.iter().zip(self.theta()) {
            finite(name, value)?;
        }
        if finite("lambda", self.lambda)? < 0.0 {
            return Err(Error::domain("lambda", "rationality must be non-negative"));
        }
        Ok(())
    }
}

/// Utilities of both players for each of the four pure strategy profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffMatrix {
    /// Straight-going player's utility, indexed `[straight][turning]`.
    pub u_s: [[f64; 2]; 2],
    /// Right-turning player's utility, indexed `[straight][turning]`.
    pub u_r: [[f64; 2]; 2],
}

impl PayoffMatrix {
    pub fn straight(&self, s: StraightAction, r: RightTurnAction) -> f64 {
        self.u_s[s as usize][r as usize]
    }

    pub fn turning(&self, s: StraightAction, r: RightTurnAction) -> f64 {
        self.u_r[s as usize][r as usize]
    }
}

pub fn payoff_matrix(obs: &Observation, params: &PayoffParams) -> Result<PayoffMatrix> {
    obs.validate()?;
    params.validate()?;
    let efficiency_s = params.beta0 * obs.straight_rate();
    let cross_not_yield =
        efficiency_s + params.beta1 * obs.turning_rate() + params.beta2 * obs.group();
    let efficiency_r = params.beta3 * obs.turning_rate();
    Ok(PayoffMatrix {
        u_s: [[efficiency_s, cross_not_yield], [params.c1, params.c1]],
        u_r: [
            [params.c2, efficiency_r + params.beta4 * obs.straight_rate()],
            [params.c2, efficiency_r],
        ],
    })
}

/// Expected utility of each pure strategy against the opponent's mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedUtilities {
    pub cross: f64,
    pub stay: f64,
    pub yielding: f64,
    pub not_yielding: f64,
}

/// Latent utility differences `EU_cross − EU_stay` and `EU_yield − EU_not_yield`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEu {
    pub straight: f64,
    pub turning: f64,
}

pub fn expected_utilities(
    obs: &Observation,
    params: &PayoffParams,
    p_cross: f64,
    p_yield: f64,
) -> Result<ExpectedUtilities> {
    probability("p_cross", p_cross)?;
    probability("p_yield", p_yield)?;
    obs.validate()?;
    params.validate()?;
    Ok(expected_utilities_unchecked(obs, params, p_cross, p_yield))
}

#[inline]
pub(crate) fn expected_utilities_unchecked(
    obs: &Observation,
    params: &PayoffParams,
    p_cross: f64,
    p_yield: f64,
) -> ExpectedUtilities {
    let not_yield = 1.0 - p_yield;
    ExpectedUtilities {
        cross: params.beta0 * obs.straight_rate()
            + not_yield * params.beta1 * obs.turning_rate()
            + not_yield * params.beta2 * obs.group(),
        stay: params.c1,
        yielding: params.c2,
        not_yielding: params.beta3 * obs.turning_rate()
            + p_cross * params.beta4 * obs.straight_rate(),
    }
}

pub fn delta_eu(
    obs: &Observation,
    params: &PayoffParams,
    p_cross: f64,
    p_yield: f64,
) -> Result<DeltaEu> {
    let eu = expected_utilities(obs, params, p_cross, p_yield)?;
    Ok(DeltaEu {
        straight: eu.cross - eu.stay,
        turning: eu.yielding - eu.not_yielding,
    })
}

#[inline]
pub(crate) fn delta_eu_unchecked(
    obs: &Observation,
    params: &PayoffParams,
    p_cross: f64,
    p_yield: f64,
) -> DeltaEu {
    let eu = expected_utilities_unchecked(obs, params, p_cross, p_yield);
    DeltaEu {
        straight: eu.cross - eu.stay,
        turning: eu.yielding - eu.not_yielding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn worked_obs(n_group: u32) -> Observation {
        Observation::new(2.0, 3.0, 4.0, 6.0, n_group).unwrap()
    }

    fn worked_params() -> PayoffParams {
        PayoffParams::from_theta([1.0, -1.0, 0.5, 1.0, -0.5, 0.0, 0.0], 1.0)
    }

    #[test]
    fn constants_survive_when_betas_are_zero() {
        let params = PayoffParams::from_theta([0.0, 0.0, 0.0, 0.0, 0.0, 0.7, 0.3], 1.0);
        let m = payoff_matrix(&worked_obs(3), &params).unwrap();
        for s in StraightAction::ALL {
            assert_eq!(m.turning(s, RightTurnAction::Yield), 0.3);
        }
        for r in RightTurnAction::ALL {
            assert_eq!(m.straight(StraightAction::Stay, r), 0.7);
        }
        assert_eq!(
            m.straight(StraightAction::Cross, RightTurnAction::Yield),
            0.0
        );
        assert_eq!(
            m.straight(StraightAction::Cross, RightTurnAction::NotYield),
            0.0
        );
        assert_eq!(
            m.turning(StraightAction::Cross, RightTurnAction::NotYield),
            0.0
        );
        assert_eq!(
            m.turning(StraightAction::Stay, RightTurnAction::NotYield),
            0.0
        );
    }

    #[test]
    fn worked_payoff_cells() {
        // hand-evaluated: 0.5 - 0.5 + 1.0 and 0.5 - 0.25
        let m = payoff_matrix(&worked_obs(2), &worked_params()).unwrap();
        assert!((m.straight(StraightAction::Cross, RightTurnAction::NotYield) - 1.0).abs() < 1e-15);
        assert!((m.turning(StraightAction::Cross, RightTurnAction::NotYield) - 0.25).abs() < 1e-15);
        assert!((m.turning(StraightAction::Stay, RightTurnAction::NotYield) - 0.5).abs() < 1e-15);
        assert!((m.straight(StraightAction::Cross, RightTurnAction::Yield) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn worked_delta_eu() {
        let d = delta_eu(&worked_obs(2), &worked_params(), 1.0, 0.0).unwrap();
        assert!((d.straight - 1.0).abs() < 1e-15);
        assert!((d.turning + 0.25).abs() < 1e-15);
    }

    #[test]
    fn delta_eu_trivial_cases() {
        let obs = worked_obs(1);
        let d = delta_eu(&obs, &PayoffParams::zero(), 0.3, 0.8).unwrap();
        assert_eq!((d.straight, d.turning), (0.0, 0.0));
        let only_c1 = PayoffParams::from_theta([0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0], 2.0);
        assert_eq!(delta_eu(&obs, &only_c1, 0.1, 0.9).unwrap().straight, -1.0);
    }

    #[test]
    fn opponent_certainty_limits() {
        let obs = worked_obs(2);
        let params = worked_params();
        let eu = expected_utilities(&obs, &params, 0.4, 1.0).unwrap();
        assert_eq!(eu.cross, params.beta0 * obs.straight_rate());
        let eu = expected_utilities(&obs, &params, 0.0, 0.4).unwrap();
        assert_eq!(eu.not_yielding, params.beta3 * obs.turning_rate());
    }

    #[test]
    fn rejects_bad_inputs() {
        let obs = worked_obs(1);
        let params = worked_params();
        assert!(matches!(
            expected_utilities(&obs, &params, 1.2, 0.5),
            Err(Error::Domain {
                field: "p_cross",
                ..
            })
        ));
        assert!(matches!(
            expected_utilities(&obs, &params, 0.5, -0.1),
            Err(Error::Domain {
                field: "p_yield",
                ..
            })
        ));
        assert!(matches!(
            Observation::new(1.0, 1.0, 0.05, 3.0, 1),
            Err(Error::Domain { field: "d_s", .. })
        ));
        assert!(matches!(
            Observation::new(1.0, f64::NAN, 1.0, 3.0, 1),
            Err(Error::Domain { field: "v_r", .. })
        ));
        assert!(matches!(
            Observation::new(1.0, 1.0, 1.0, 3.0, 0),
            Err(Error::Domain {
                field: "n_group",
                ..
            })
        ));
        let mut bad = params;
        bad.beta2 = f64::INFINITY;
        assert!(matches!(
            payoff_matrix(&obs, &bad),
            Err(Error::Domain { field: "beta2", .. })
        ));
        bad = params;
        bad.lambda = -1.0;
        assert!(matches!(
            payoff_matrix(&obs, &bad),
            Err(Error::Domain {
                field: "lambda",
                ..
            })
        ));
    }

    #[test]
    fn normalization_moves_scale_into_lambda() {
        let p = PayoffParams::from_theta([3.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0], 2.0).normalized();
        assert!((p.theta_norm() - 1.0).abs() < 1e-15);
        assert!((p.lambda - 10.0).abs() < 1e-12);
    }

    fn arb_obs() -> impl Strategy<Value = Observation> {
        (
            0.0..10.0f64,
            0.0..10.0f64,
            0.1..40.0f64,
            0.1..40.0f64,
            1u32..6,
        )
            .prop_map(|(vs, vr, ds, dr, n)| Observation::new(vs, vr, ds, dr, n).unwrap())
    }

    fn arb_params() -> impl Strategy<Value = PayoffParams> {
        (prop::array::uniform7(-5.0..5.0f64), 0.0..10.0f64)
            .prop_map(|(theta, lambda)| PayoffParams::from_theta(theta, lambda))
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn expectations_match_matrix(obs in arb_obs(), params in arb_params(), pc in 0.0..=1.0f64, py in 0.0..=1.0f64) {
            use RightTurnAction::*;
            use StraightAction::*;
            let m = payoff_matrix(&obs, &params).unwrap();
            let eu = expected_utilities(&obs, &params, pc, py).unwrap();
            prop_assert!(close(eu.cross, py * m.straight(Cross, Yield) + (1.0 - py) * m.straight(Cross, NotYield)));
            prop_assert!(close(eu.stay, py * m.straight(Stay, Yield) + (1.0 - py) * m.straight(Stay, NotYield)));
            prop_assert!(close(eu.yielding, pc * m.turning(Cross, Yield) + (1.0 - pc) * m.turning(Stay, Yield)));
            prop_assert!(close(eu.not_yielding, pc * m.turning(Cross, NotYield) + (1.0 - pc) * m.turning(Stay, NotYield)));
        }

        #[test]
        fn constants_ignore_mixtures(obs in arb_obs(), params in arb_params(), pc in 0.0..=1.0f64, py in 0.0..=1.0f64) {
            let eu = expected_utilities(&obs, &params, pc, py).unwrap();
            prop_assert_eq!(eu.stay, params.c1);
            prop_assert_eq!(eu.yielding, params.c2);
        }

        #[test]
        fn affine_in_opponent_probability(obs in arb_obs(), params in arb_params(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let mid = 0.5 * (a + b);
            let cross = |py: f64| expected_utilities(&obs, &params, 0.5, py).unwrap().cross;
            let not_yield = |pc: f64| expected_utilities(&obs, &params, pc, 0.5).unwrap().not_yielding;
            prop_assert!(close(cross(mid), 0.5 * (cross(a) + cross(b))));
            prop_assert!(close(not_yield(mid), 0.5 * (not_yield(a) + not_yield(b))));
        }

        #[test]
        fn only_rates_matter(obs in arb_obs(), params in arb_params(), pc in 0.0..=1.0f64, py in 0.0..=1.0f64) {
            let mut doubled = obs.clone();
            doubled.v_s *= 2.0;
            doubled.d_s *= 2.0;
            doubled.v_r *= 2.0;
            doubled.d_r *= 2.0;
            let a = payoff_matrix(&obs, &params).unwrap();
            let b = payoff_matrix(&doubled, &params).unwrap();
            for s in 0..2 {
                for r in 0..2 {
                    prop_assert!(close(a.u_s[s][r], b.u_s[s][r]));
                    prop_assert!(close(a.u_r[s][r], b.u_r[s][r]));
                }
            }
            let ea = expected_utilities(&obs, &params, pc, py).unwrap();
            let eb = expected_utilities(&doubled, &params, pc, py).unwrap();
            prop_assert!(close(ea.cross, eb.cross) && close(ea.not_yielding, eb.not_yielding));
        }
    }
}
