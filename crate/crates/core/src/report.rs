//! Conflict and confusion probabilities, descriptive statistics and
//! estimation reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::estimation::{BootstrapResult, EstimationConfig, EstimationResult};
use crate::game::{GameKind, Observation};
use crate::solver::QrePoint;

/// Two-sided 5% and 1% critical values of the standard normal.
pub const Z_5PCT: f64 = 1.959_963_984_540_054;
pub const Z_1PCT: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictConfusion {
    /// Straight player crosses while the turning player does not yield.
    pub p_conflict: f64,
    /// Straight player stays while the turning player yields.
    pub p_confusion: f64,
}

pub fn conflict_confusion(p: QrePoint) -> ConflictConfusion {
    ConflictConfusion {
        p_conflict: (1.0 - p.p_yield) * p.p_cross,
        p_confusion: p.p_yield * (1.0 - p.p_cross),
    }
}

pub fn stars(z: Option<f64>) -> &'static str {
    match z.map(f64::abs) {
        Some(a) if a >= Z_1PCT => "**",
        Some(a) if a >= Z_5PCT => "*",
        _ => "",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableStats {
    pub variable: String,
    /// Observations carrying this variable.
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindStats {
    pub kind: GameKind,
    pub n: usize,
    /// A single observation: standard deviations are reported as zero.
    pub degenerate: bool,
    pub variables: Vec<VariableStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub groups: Vec<KindStats>,
    /// Kinds without observations.
    pub omitted: Vec<GameKind>,
}

pub const STAT_VARIABLES: [&str; 8] = [
    "v_s", "v_r", "d_s", "d_r", "n_group", "y_cross", "y_yield", "pet",
];

fn column(obs: &Observation, k: usize) -> Option<f64> {
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    match k {
        0 => Some(obs.v_s),
        1 => Some(obs.v_r),
        2 => Some(obs.d_s),
        3 => Some(obs.d_r),
        4 => Some(f64::from(obs.n_group)),
        5 => Some(flag(obs.y_cross)),
        6 => Some(flag(obs.y_yield)),
        7 => obs.pet,
        _ => unreachable!(),
    }
}

/// Mean and (n − 1) standard deviation; the latter is 0 for one value.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Some((mean, (ss / (n - 1) as f64).sqrt()))
}

pub fn descriptive_stats(rows: &[(GameKind, Observation)]) -> DescriptiveStats {
    let mut groups = Vec::new();
    let mut omitted = Vec::new();
    for kind in GameKind::ALL {
        let obs: Vec<&Observation> = rows
            .iter()
            .filter(|(k, _)| *k == kind)
            .map(|(_, o)| o)
            .collect();
        if obs.is_empty() {
            log::warn!(
                "no {} observations; omitted from the statistics",
                kind.label()
            );
            omitted.push(kind);
            continue;
        }
        let variables = STAT_VARIABLES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let values: Vec<f64> = obs.iter().filter_map(|o| column(o, k)).collect();
                let ms = mean_std(&values);
                VariableStats {
                    variable: (*name).to_string(),
                    n: values.len(),
                    mean: ms.map(|m| m.0),
                    std: ms.map(|m| m.1),
                }
            })
            .collect();
        groups.push(KindStats {
            kind,
            n: obs.len(),
            degenerate: obs.len() == 1,
            variables,
        });
    }
    DescriptiveStats { groups, omitted }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

impl DescriptiveStats {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10}", "variable");
        for g in &self.groups {
            let _ = write!(out, "{:>22}", format!("{} (n={})", g.kind.code(), g.n));
        }
        out.push('\n');
        let _ = write!(out, "{:<10}", "");
        for _ in &self.groups {
            let _ = write!(out, "{:>11}{:>11}", "mean", "std");
        }
        out.push('\n');
        for (k, name) in STAT_VARIABLES.iter().enumerate() {
            let _ = write!(out, "{name:<10}");
            for g in &self.groups {
                let v = &g.variables[k];
                let _ = write!(out, "{:>11}{:>11}", cell(v.mean), cell(v.std));
            }
            out.push('\n');
        }
        for g in self.groups.iter().filter(|g| g.degenerate) {
            let _ = writeln!(
                out,
                "note: {} has a single observation; std reported as 0",
                g.kind.label()
            );
        }
        for kind in &self.omitted {
            let _ = writeln!(out, "note: no {} observations", kind.label());
        }
        out
    }
}

/// One coefficient line of the estimation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub block: String,
    pub variable: String,
    pub parameter: String,
    /// `λ·θ`, the scale-identified coefficient.
    pub coefficient: f64,
    /// Unit-norm structural value.
    pub normalized: f64,
    pub std_error: Option<f64>,
    pub z: Option<f64>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub requested: usize,
    pub replicates: usize,
    pub dropped: usize,
    pub degenerate: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub kind: Option<GameKind>,
    pub n_obs: usize,
    pub converged: bool,
    pub outer_rounds: usize,
    pub log_lik: f64,
    pub log_lik_straight: f64,
    pub log_lik_turning: f64,
    pub coefficients: Vec<CoefficientRow>,
    pub lambda: CoefficientRow,
    pub equilibrium: QrePoint,
    pub conflict_confusion: ConflictConfusion,
    pub bootstrap: Option<BootstrapSummary>,
}

/// Table order: `(block, variable, index into θ)`.
const LAYOUT: [(&str, &str, usize); 7] = [
    ("EUcross", "Vs/Ds", 0),
    ("EUcross", "Vr/Dr", 1),
    ("EUcross", "Ngroup", 2),
    ("EUcross", "Constant", 5),
    ("EUyield", "Vs/Ds", 4),
    ("EUyield", "Vr/Dr", 3),
    ("EUyield", "Constant", 6),
];

impl EstimationReport {
    pub fn new(
        kind: Option<GameKind>,
        fit: &EstimationResult,
        boot: Option<&BootstrapResult>,
        cfg: &EstimationConfig,
    ) -> Self {
        let theta = fit.params.theta();
        let coefficients = LAYOUT
            .iter()
            .map(|&(block, variable, k)| {
                let z = boot.and_then(|b| b.z_values.raw[k]);
                CoefficientRow {
                    block: block.into(),
                    variable: variable.into(),
                    parameter: crate::game::THETA_NAMES[k].into(),
                    coefficient: fit.raw_coefficients[k],
                    normalized: theta[k],
                    std_error: boot.map(|b| b.std_errors.raw[k]),
                    z,
                    stars: stars(z).into(),
                }
            })
            .collect();
        let lambda_z = boot.and_then(|b| b.z_values.lambda);
        let lambda = CoefficientRow {
            block: "Rationality".into(),
            variable: "lambda".into(),
            parameter: "lambda".into(),
            coefficient: fit.params.lambda,
            normalized: fit.params.lambda,
            std_error: boot.map(|b| b.std_errors.lambda),
            z: lambda_z,
            stars: stars(lambda_z).into(),
        };
        let equilibrium = fit.pooled();
        EstimationReport {
            kind,
            n_obs: fit.n_obs(),
            converged: fit.converged,
            outer_rounds: fit.trace.rounds,
            log_lik: fit.log_lik,
            log_lik_straight: fit.log_lik_s,
            log_lik_turning: fit.log_lik_r,
            coefficients,
            lambda,
            equilibrium,
            conflict_confusion: conflict_confusion(equilibrium),
            bootstrap: boot.map(|b| BootstrapSummary {
                requested: b.requested,
                replicates: b.replicates,
                dropped: b.dropped(),
                degenerate: b.degenerate,
                seed: cfg.seed,
            }),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(kind) = self.kind {
            let _ = writeln!(out, "{} game", kind.label());
        }
        let _ = writeln!(
            out,
            "{:<12}{:<10}{:>12}{:>12}{:>10}{:>10}",
            "block", "variable", "coef", "normalized", "se", "z"
        );
        let opt = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.3}"));
        let mut last_block = "";
        for row in self
            .coefficients
            .iter()
            .chain(std::iter::once(&self.lambda))
        {
            let block = if row.block == last_block {
                ""
            } else {
                &row.block
            };
            last_block = &row.block;
            let _ = writeln!(
                out,
                "{:<12}{:<10}{:>12}{:>12.3}{:>10}{:>10}",
                block,
                row.variable,
                format!("{:.3}{}", row.coefficient, row.stars),
                row.normalized,
                opt(row.std_error),
                opt(row.z),
            );
        }
        let _ = writeln!(
            out,
            "* significant at 5%; ** significant at 1% (bootstrap z)"
        );
        let _ = writeln!(
            out,
            "n = {}, log-likelihood = {:.4} (straight {:.4}, turning {:.4})",
            self.n_obs, self.log_lik, self.log_lik_straight, self.log_lik_turning
        );
        let _ = writeln!(
            out,
            "converged = {} after {} rounds",
            self.converged, self.outer_rounds
        );
        if let Some(b) = &self.bootstrap {
            let _ = writeln!(
                out,
                "bootstrap: {}/{} replicates (seed {}){}",
                b.replicates,
                b.requested,
                b.seed,
                if b.degenerate { ", degenerate" } else { "" }
            );
        }
        let _ = writeln!(
            out,
            "equilibrium: p_cross = {:.3}, p_yield = {:.3}",
            self.equilibrium.p_cross, self.equilibrium.p_yield
        );
        let _ = writeln!(
            out,
            "p_conflict = {:.3}, p_confusion = {:.3}",
            self.conflict_confusion.p_conflict, self.conflict_confusion.p_confusion
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn check(p_cross: f64, p_yield: f64, conflict: f64, confusion: f64) {
        let cc = conflict_confusion(QrePoint::new(p_cross, p_yield).unwrap());
        assert!((cc.p_conflict - conflict).abs() <= 5e-4, "{cc:?}");
        assert!((cc.p_confusion - confusion).abs() <= 5e-4, "{cc:?}");
    }

    #[test]
    fn published_equilibria() {
        check(0.832, 0.592, 0.339, 0.099);
        check(0.691, 0.395, 0.418, 0.122);
        check(0.506, 0.243, 0.383, 0.120);
    }

    #[test]
    fn exact_products() {
        let cc = conflict_confusion(QrePoint::new(0.832, 0.592).unwrap());
        assert!((cc.p_conflict - 0.339_456).abs() < 1e-12);
        assert!((cc.p_confusion - 0.099_456).abs() < 1e-12);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(None), "");
        assert_eq!(stars(Some(1.95)), "");
        assert_eq!(stars(Some(-1.96)), "*");
        assert_eq!(stars(Some(2.57)), "*");
        assert_eq!(stars(Some(2.58)), "**");
    }

    fn obs(v_s: f64) -> Observation {
        Observation::new(v_s, 3.0, 5.0, 10.0, 2)
            .unwrap()
            .with_decisions(true, false)
    }

    #[test]
    fn single_observation_is_degenerate() {
        let s = descriptive_stats(&[(GameKind::VehicleEbike, obs(4.0))]);
        assert_eq!(s.groups.len(), 1);
        assert!(s.groups[0].degenerate);
        assert_eq!(s.groups[0].variables[0].std, Some(0.0));
        assert_eq!(s.groups[0].variables[7].mean, None);
        assert_eq!(
            s.omitted,
            vec![GameKind::VehiclePedestrian, GameKind::EbikePedestrian]
        );
        assert!(s.to_text().contains("single observation"));
    }

    #[test]
    fn unbiased_std_and_constant_columns() {
        let rows: Vec<_> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&v| (GameKind::VehiclePedestrian, obs(v).with_pet(2.0)))
            .collect();
        let s = descriptive_stats(&rows);
        let g = &s.groups[0];
        assert_eq!(g.variables[0].mean, Some(2.5));
        assert!((g.variables[0].std.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(g.variables[1].std, Some(0.0));
        assert_eq!(g.variables[7].std, Some(0.0));
        let text = s.to_text();
        assert!(text.lines().nth(2).unwrap().starts_with("v_s"));
    }

    proptest! {
        #[test]
        fn conflict_and_confusion_are_exclusive_events(pc in 0.0..=1.0f64, py in 0.0..=1.0f64) {
            let cc = conflict_confusion(QrePoint::new(pc, py).unwrap());
            prop_assert!((0.0..=1.0).contains(&cc.p_conflict));
            prop_assert!((0.0..=1.0).contains(&cc.p_confusion));
            prop_assert!(cc.p_conflict + cc.p_confusion <= 1.0 + 1e-15);
        }
    }
}
