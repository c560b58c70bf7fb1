//! CSV file formats shared by the pipeline, generator and estimator.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameKind, Observation};
use crate::solver::{QrePoint, SolverTrace};
use crate::trajectory::{ExtractionReport, Label, Labels, TrackPoint};

/// An observation tagged with its game.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub kind: GameKind,
    pub observation: Observation,
}

fn flag<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(serde::de::Error::custom(format!(
            "expected 0 or 1, found {other:?}"
        ))),
    }
}

fn bit(b: bool) -> u8 {
    u8::from(b)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    #[serde(default)]
    id: String,
    game_kind: GameKind,
    v_s: f64,
    v_r: f64,
    d_s: f64,
    d_r: f64,
    n_group: u32,
    #[serde(deserialize_with = "flag")]
    y_cross: bool,
    #[serde(deserialize_with = "flag")]
    y_yield: bool,
    pet: Option<f64>,
}

#[derive(Serialize)]
struct DatasetOut<'a> {
    id: &'a str,
    game_kind: GameKind,
    v_s: f64,
    v_r: f64,
    d_s: f64,
    d_r: f64,
    n_group: u32,
    y_cross: u8,
    y_yield: u8,
    pet: Option<f64>,
}

fn schema(name: &str, line: u64, reason: impl std::fmt::Display) -> Error {
    Error::Schema {
        path: name.to_string(),
        line,
        reason: reason.to_string(),
    }
}

fn csv_error(name: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => schema(name, line, e),
    }
}

/// Deserializes every record, attaching `name` and the line to failures.
fn read_records<T, R>(reader: R, name: &str) -> Result<Vec<(u64, T)>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(name, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(name, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let value: T = rec
            .deserialize(Some(&headers))
            .map_err(|e| schema(name, line, e))?;
        out.push((line, value));
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| schema(&path.display().to_string(), 0, e))
}

pub fn read_dataset_from<R: Read>(reader: R, name: &str) -> Result<Vec<DatasetRow>> {
    read_records::<DatasetRecord, _>(reader, name)?
        .into_iter()
        .map(|(line, r)| {
            let mut observation = Observation::new(r.v_s, r.v_r, r.d_s, r.d_r, r.n_group)
                .map_err(|e| schema(name, line, e))?
                .with_decisions(r.y_cross, r.y_yield);
            if let Some(pet) = r.pet {
                observation = observation.with_pet(pet);
            }
            if !r.id.is_empty() {
                observation = observation.with_id(r.id);
            }
            observation.validate().map_err(|e| schema(name, line, e))?;
            Ok(DatasetRow {
                kind: r.game_kind,
                observation,
            })
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetRow>> {
    read_dataset_from(open(path)?, &path.display().to_string())
}

pub fn write_dataset_to<W: Write>(writer: W, rows: &[DatasetRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record([
            "id",
            "game_kind",
            "v_s",
            "v_r",
            "d_s",
            "d_r",
            "n_group",
            "y_cross",
            "y_yield",
            "pet",
        ])?;
    }
    for row in rows {
        let o = &row.observation;
        w.serialize(DatasetOut {
            id: o.id.as_deref().unwrap_or(""),
            game_kind: row.kind,
            v_s: o.v_s,
            v_r: o.v_r,
            d_s: o.d_s,
            d_r: o.d_r,
            n_group: o.n_group,
            y_cross: bit(o.y_cross),
            y_yield: bit(o.y_yield),
            pet: o.pet,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    write_dataset_to(File::create(path)?, rows)
}

#[derive(Serialize)]
struct TruthRow<'a> {
    id: &'a str,
    true_p_cross: f64,
    true_p_yield: f64,
}

/// `id,true_p_cross,true_p_yield`.
pub fn write_truth(path: &Path, truth: &[(String, QrePoint)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, p) in truth {
        w.serialize(TruthRow {
            id,
            true_p_cross: p.p_cross,
            true_p_yield: p.p_yield,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories_from<R: Read>(reader: R, name: &str) -> Result<Vec<TrackPoint>> {
    Ok(read_records::<TrackPoint, _>(reader, name)?
        .into_iter()
        .map(|(_, p)| p)
        .collect())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrackPoint>> {
    read_trajectories_from(open(path)?, &path.display().to_string())
}

#[derive(Deserialize)]
struct LabelRecord {
    pair_id: String,
    #[serde(deserialize_with = "flag")]
    y_cross: bool,
    #[serde(deserialize_with = "flag")]
    y_yield: bool,
    n_group: u32,
}

pub fn read_labels_from<R: Read>(reader: R, name: &str) -> Result<Labels> {
    let mut labels = Labels::new();
    for (line, r) in read_records::<LabelRecord, _>(reader, name)? {
        if r.n_group < 1 {
            return Err(schema(name, line, "n_group must be at least 1"));
        }
        let label = Label {
            y_cross: r.y_cross,
            y_yield: r.y_yield,
            n_group: r.n_group,
        };
        if labels.insert(r.pair_id.clone(), label).is_some() {
            return Err(schema(
                name,
                line,
                format!("duplicate pair id {}", r.pair_id),
            ));
        }
    }
    Ok(labels)
}

pub fn read_labels(path: &Path) -> Result<Labels> {
    read_labels_from(open(path)?, &path.display().to_string())
}

/// `round,mean_p_cross,mean_p_yield`, round 0 being the starting point.
pub fn write_trace_to<W: Write>(writer: W, trace: &SolverTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["round", "mean_p_cross", "mean_p_yield"])?;
    for (round, p) in trace.rows() {
        w.write_record([
            round.to_string(),
            p.p_cross.to_string(),
            p.p_yield.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    write_trace_to(File::create(path)?, trace)
}

/// `id,p_cross,p_yield` per observation.
pub fn write_fitted(path: &Path, rows: &[DatasetRow], fitted: &[QrePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "p_cross", "p_yield"])?;
    for (row, p) in rows.iter().zip(fitted) {
        w.write_record([
            row.observation.id.clone().unwrap_or_default(),
            p.p_cross.to_string(),
            p.p_yield.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `pair_id,status,reason`: rejected and unlabeled pairs, then skipped tracks.
pub fn write_rejections(path: &Path, report: &ExtractionReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pair_id", "status", "reason"])?;
    for r in &report.rejections {
        w.write_record([r.pair_id.as_str(), "rejected", &r.reason.to_string()])?;
    }
    for id in &report.unlabeled {
        w.write_record([id.as_str(), "unlabeled", "no entry in the labels file"])?;
    }
    for s in &report.skipped_tracks {
        w.write_record([s.track_id.as_str(), "skipped_track", s.reason.as_str()])?;
    }
    w.flush()?;
    Ok(())
}
