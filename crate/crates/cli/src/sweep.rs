//! Multi-seed runs over a grid of scheduler settings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sidelink_core::metrics::{Format, Variant};
use sidelink_core::{Policy, SimConfig, SimulationReport};

use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub base: SimConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub format: Format,
    /// Empty axes keep the base config's value.
    pub alphas: Vec<f64>,
    pub p_keeps: Vec<f64>,
    pub policies: Vec<Policy>,
}

impl RunSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        Ok(())
    }

    /// Every combination of axis values, in a fixed order.
    pub fn points(&self) -> Vec<AxisPoint> {
        let or_base = |v: &[f64], base: f64| if v.is_empty() { vec![base] } else { v.to_vec() };
        let alphas = or_base(&self.alphas, self.base.sps.alpha);
        let p_keeps = or_base(&self.p_keeps, self.base.sps.p_keep);
        let policies = if self.policies.is_empty() {
            vec![self.base.sps.policy]
        } else {
            self.policies.clone()
        };
        let mut out = Vec::new();
        for &policy in &policies {
            for &alpha in &alphas {
                for &p_keep in &p_keeps {
                    out.push(AxisPoint { alpha, p_keep, policy });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPoint {
    pub alpha: f64,
    pub p_keep: f64,
    pub policy: Policy,
}

impl AxisPoint {
    pub fn apply(&self, base: &SimConfig, seed: u64) -> SimConfig {
        let mut c = base.clone();
        c.sps.alpha = self.alpha;
        c.sps.p_keep = self.p_keep;
        c.sps.policy = self.policy;
        c.seed = seed;
        c
    }

    pub fn file_stem(&self, seed: u64) -> String {
        format!("alpha={}_pkeep={}_policy={}_seed={seed}", self.alpha, self.p_keep, self.policy)
    }
}

/// Mean and sample standard deviation of PRR across seeds for one axis
/// point and distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub alpha: f64,
    pub p_keep: f64,
    pub policy: Policy,
    pub distance_m: f64,
    pub seeds: usize,
    pub prr_disk_mean: Option<f64>,
    pub prr_disk_std: Option<f64>,
    pub prr_ring_mean: Option<f64>,
    pub prr_ring_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

pub fn summarize(point: AxisPoint, reports: &[&SimulationReport]) -> Vec<SummaryRow> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    first
        .config
        .awareness_distances_m
        .iter()
        .map(|&dx| {
            let collect = |variant| -> Vec<f64> {
                reports
                    .iter()
                    .filter_map(|r| r.table.row(dx, variant).and_then(|row| row.prr))
                    .collect()
            };
            let (dm, ds) = mean_std(&collect(Variant::Disk));
            let (rm, rs) = mean_std(&collect(Variant::Ring));
            SummaryRow {
                alpha: point.alpha,
                p_keep: point.p_keep,
                policy: point.policy,
                distance_m: dx,
                seeds: reports.len(),
                prr_disk_mean: dm,
                prr_disk_std: ds,
                prr_ring_mean: rm,
                prr_ring_std: rs,
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str = "alpha,p_keep,policy,distance_m,seeds,prr_disk_mean,prr_disk_std,prr_ring_mean,prr_ring_std";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    let pct = |v: Option<f64>| v.map(|x| format!("{:.4}", 100.0 * x)).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.p_keep,
            r.policy,
            r.distance_m,
            r.seeds,
            pct(r.prr_disk_mean),
            pct(r.prr_disk_std),
            pct(r.prr_ring_mean),
            pct(r.prr_ring_std)
        );
    }
    out
}

#[derive(Debug)]
pub struct RunFailure {
    pub point: AxisPoint,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct SweepOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
}

impl SweepOutcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

fn write_report(path: &Path, report: &SimulationReport, format: Format) -> Result<(), String> {
    let bytes = report.serialize(format).map_err(|e| e.to_string())?;
    write_atomic(path, &bytes).map_err(|e| format!("{}: {e}", path.display()))
}

/// Runs every (axis point, seed) pair in parallel, writes one report per
/// run and a merged summary. Failed runs are collected, not fatal.
pub fn run_sweep(spec: &RunSpec) -> Result<SweepOutcome, String> {
    spec.validate()?;
    let points = spec.points();
    let jobs: Vec<(usize, AxisPoint, u64)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| spec.seeds.iter().map(move |&s| (i, p, s)))
        .collect();
    let ext = spec.format.extension();
    let results: Vec<(usize, AxisPoint, u64, Result<(PathBuf, SimulationReport), String>)> = jobs
        .into_par_iter()
        .map(|(i, point, seed)| {
            let path = spec.output_dir.join(format!("{}.{ext}", point.file_stem(seed)));
            let outcome = sidelink_core::run(point.apply(&spec.base, seed))
                .map_err(|e| e.to_string())
                .and_then(|report| {
                    write_report(&path, &report, spec.format)?;
                    Ok((path, report))
                });
            (i, point, seed, outcome)
        })
        .collect();

    let mut outcome = SweepOutcome::default();
    let mut per_point: Vec<Vec<SimulationReport>> = vec![Vec::new(); points.len()];
    for (i, point, seed, r) in results {
        match r {
            Ok((path, report)) => {
                outcome.files.push(path);
                per_point[i].push(report);
            }
            Err(message) => outcome.failures.push(RunFailure { point, seed, message }),
        }
    }
    for (point, reports) in points.iter().zip(&per_point) {
        let refs: Vec<&SimulationReport> = reports.iter().collect();
        outcome.summary.extend(summarize(*point, &refs));
    }
    let summary_path = spec.output_dir.join(format!("summary.{ext}"));
    let bytes = match spec.format {
        Format::Csv => summary_csv(&outcome.summary).into_bytes(),
        Format::Json => serde_json::to_vec_pretty(&outcome.summary).map_err(|e| e.to_string())?,
    };
    write_atomic(&summary_path, &bytes).map_err(|e| format!("{}: {e}", summary_path.display()))?;
    outcome.files.push(summary_path);
    Ok(outcome)
}
