use std::path::Path;

use crate::error::{Error, Result};
use crate::optimizer::RunHistory;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub algo: String,
    pub env: String,
    pub seed: u64,
    pub b: usize,
    pub epoch: usize,
    pub step: usize,
    pub trajectories: usize,
    pub avg_return: f64,
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggRow {
    pub algo: String,
    pub env: String,
    pub b: usize,
    pub trajectories: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// Runs whose curve covers this grid point.
    pub n_seeds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub total_trajectories: usize,
    pub updates: usize,
    pub final_return: f64,
    /// Abort reason for truncated runs.
    pub truncated: Option<String>,
}

impl RunSummary {
    pub fn from_history(seed: u64, h: &RunHistory) -> Self {
        Self {
            seed,
            total_trajectories: h.total_trajectories,
            updates: h.records.len(),
            final_return: h.records.last().map_or(f64::NAN, |r| r.avg_return),
            truncated: h.aborted.as_ref().map(|a| a.reason.clone()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvReport {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggRow>,
    pub runs: Vec<RunSummary>,
}

impl CsvReport {
    pub fn truncated_runs(&self) -> usize {
        self.runs.iter().filter(|r| r.truncated.is_some()).count()
    }
}

/// Linear interpolation of a curve (sorted by x) at `x`, None outside it.
fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    let (first, last) = (curve.first()?, curve.last()?);
    if x < first.0 || x > last.0 {
        return None;
    }
    let i = curve.partition_point(|p| p.0 < x);
    let hi = curve[i];
    if hi.0 == x || i == 0 {
        return Some(hi.1);
    }
    let lo = curve[i - 1];
    Some(lo.1 + (hi.1 - lo.1) * (x - lo.0) / (hi.0 - lo.0))
}

/// Mean and population std of every (algo, env, B) group on a grid of
/// `budget / 100` trajectory steps.
pub fn aggregate(raw: &[RawRow], budget: usize) -> Vec<AggRow> {
    let mut groups: Vec<((String, String, usize), Vec<(u64, Vec<(f64, f64)>)>)> = Vec::new();
    for r in raw {
        let key = (r.algo.clone(), r.env.clone(), r.b);
        let gi = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new()));
                groups.len() - 1
            }
        };
        let curves = &mut groups[gi].1;
        let ci = match curves.iter().position(|(s, _)| *s == r.seed) {
            Some(i) => i,
            None => {
                curves.push((r.seed, Vec::new()));
                curves.len() - 1
            }
        };
        let curve = &mut curves[ci].1;
        curve.push((r.trajectories as f64, r.avg_return));
    }
    let step = (budget / 100).max(1);
    let mut out = Vec::new();
    for ((algo, env, b), curves) in groups {
        let mut x = step;
        while x <= budget {
            let values: Vec<f64> = curves.iter().filter_map(|(_, c)| interpolate(c, x as f64)).collect();
            if !values.is_empty() {
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                out.push(AggRow {
                    algo: algo.clone(),
                    env: env.clone(),
                    b,
                    trajectories: x,
                    mean_return: mean,
                    std_return: var.sqrt(),
                    n_seeds: values.len(),
                });
            }
            x += step;
        }
    }
    out
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

pub fn write_raw(rows: &[RawRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["algo", "env", "seed", "B", "epoch", "step", "trajectories", "avg_return", "update_norm"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.algo.clone(),
            r.env.clone(),
            r.seed.to_string(),
            r.b.to_string(),
            r.epoch.to_string(),
            r.step.to_string(),
            r.trajectories.to_string(),
            r.avg_return.to_string(),
            r.update_norm.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate(rows: &[AggRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["algo", "env", "B", "trajectories", "mean_return", "std_return", "n_seeds"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.algo.clone(),
            r.env.clone(),
            r.b.to_string(),
            r.trajectories.to_string(),
            r.mean_return.to_string(),
            r.std_return.to_string(),
            r.n_seeds.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs(rows: &[RunSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["seed", "total_trajectories", "updates", "final_return", "status"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            r.total_trajectories.to_string(),
            r.updates.to_string(),
            r.final_return.to_string(),
            r.truncated.as_ref().map_or("complete".to_string(), |why| format!("truncated: {why}")),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(report: &CsvReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_raw(&report.raw, &dir.join("raw.csv"))?;
    write_aggregate(&report.aggregate, &dir.join("aggregate.csv"))?;
    write_runs(&report.runs, &dir.join("runs.csv"))
}
