//! Parameter sweeps over `(k0 / tau1, tau2)`: the lock-in diagram, its lookup
//! procedure, and the pull-out comparison table.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{gardner_pull_out, omega_l_series, omega_l_series_as_printed, SeriesOrder};
use crate::error::{Error, Result};
use crate::model::LoopParams;
use crate::report::{format_num, format_opt, ser_rounded, ser_rounded_opt};
use crate::separatrix::{lock_in_frequency_with, TraceConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub ratio_values: Vec<f64>,
    pub tau2_values: Vec<f64>,
    pub tau1_fixed: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            ratio_values: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
            tau2_values: vec![0.05, 0.1, 0.2, 0.5],
            tau1_fixed: 1.0,
        }
    }
}

impl SweepGrid {
    pub fn new(ratio_values: Vec<f64>, tau2_values: Vec<f64>, tau1_fixed: f64) -> Result<Self> {
        let g = SweepGrid {
            ratio_values,
            tau2_values,
            tau1_fixed,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio_values.is_empty() || self.tau2_values.is_empty() {
            return Err(Error::param(
                "grid",
                "ratio and tau2 lists must be non-empty",
            ));
        }
        if !(self.tau1_fixed.is_finite() && self.tau1_fixed > 0.0) {
            return Err(Error::param("tau1", "must be positive"));
        }
        if self
            .ratio_values
            .iter()
            .any(|&r| !(r.is_finite() && r > 0.0))
        {
            return Err(Error::param("ratios", "values must be positive"));
        }
        // tau2 = 0 is kept for the conservative reference curve
        if self
            .tau2_values
            .iter()
            .any(|&t| !(t.is_finite() && t >= 0.0))
        {
            return Err(Error::param("tau2", "values must be non-negative"));
        }
        if self.ratio_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("ratios", "values must be strictly increasing"));
        }
        Ok(())
    }

    /// Cells in output order: grouped by `tau2` (as listed), ratios ascending.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.tau2_values
            .iter()
            .flat_map(|&t2| self.ratio_values.iter().map(move |&r| (r, t2)))
            .collect()
    }

    fn params(&self, ratio: f64, tau2: f64) -> Result<LoopParams> {
        LoopParams::new(ratio * self.tau1_fixed, self.tau1_fixed, tau2)
    }
}

/// Numeric lock-in and pull-out frequencies together with every series estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LockInReport {
    pub params: LoopParams,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_l_numeric: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_l_series1: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_l_series2: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_l_series1_as_printed: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_l_series2_as_printed: f64,
    #[serde(rename = "omega_po", serialize_with = "ser_rounded")]
    pub omega_po_numeric: f64,
    /// `None` when `tau2 = 0`.
    #[serde(serialize_with = "ser_rounded_opt")]
    pub omega_po_gardner: Option<f64>,
    /// `omega_l_numeric * tau1 / k0`.
    #[serde(serialize_with = "ser_rounded")]
    pub y_norm_consistent: f64,
    /// The numeric lock-in frequency in the alternative normalization `(k0/tau1) omega_l`,
    /// divided by `k0 / tau1`.
    #[serde(serialize_with = "ser_rounded")]
    pub y_norm_as_printed: f64,
}

pub fn lock_in_report(p: &LoopParams, cfg: &TraceConfig) -> Result<LockInReport> {
    let omega_l = lock_in_frequency_with(p, cfg)?;
    let ratio = p.ratio();
    let as_printed_numeric = ratio * omega_l;
    Ok(LockInReport {
        params: *p,
        omega_l_numeric: omega_l,
        omega_l_series1: omega_l_series(p, SeriesOrder::FIRST)?,
        omega_l_series2: omega_l_series(p, SeriesOrder::SECOND)?,
        omega_l_series1_as_printed: omega_l_series_as_printed(p, SeriesOrder::FIRST)?,
        omega_l_series2_as_printed: omega_l_series_as_printed(p, SeriesOrder::SECOND)?,
        omega_po_numeric: 2.0 * omega_l,
        omega_po_gardner: gardner_pull_out(p).ok(),
        y_norm_consistent: omega_l / ratio,
        y_norm_as_printed: as_printed_numeric / ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub tau2: f64,
    #[serde(flatten)]
    pub outcome: RowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RowOutcome {
    Ok(LockInReport),
    Failed { error: String },
}

impl SweepRow {
    pub fn report(&self) -> Option<&LockInReport> {
        match &self.outcome {
            RowOutcome::Ok(r) => Some(r),
            RowOutcome::Failed { .. } => None,
        }
    }
}

fn sort_rows<T>(rows: &mut [T], key: impl Fn(&T) -> (f64, f64), grid: &SweepGrid) {
    // tau2 in the order listed by the grid, then ratio ascending
    let rank = |t2: f64| {
        grid.tau2_values
            .iter()
            .position(|&v| v == t2)
            .unwrap_or(usize::MAX)
    };
    rows.sort_by(|a, b| {
        let (ra, ta) = key(a);
        let (rb, tb) = key(b);
        rank(ta).cmp(&rank(tb)).then(ra.total_cmp(&rb))
    });
}

/// One lock-in report per grid cell. Cells are computed in parallel; a failing
/// cell yields an error row instead of aborting the sweep.
pub fn sweep_lock_in(grid: &SweepGrid, cfg: &TraceConfig) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let mut rows: Vec<SweepRow> = grid
        .cells()
        .into_par_iter()
        .map(|(ratio, tau2)| {
            let outcome = grid
                .params(ratio, tau2)
                .and_then(|p| lock_in_report(&p, cfg))
                .map(RowOutcome::Ok)
                .unwrap_or_else(|e| RowOutcome::Failed {
                    error: e.to_string(),
                });
            SweepRow {
                ratio,
                tau2,
                outcome,
            }
        })
        .collect();
    sort_rows(&mut rows, |r| (r.ratio, r.tau2), grid);
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "ratio,tau2,omega_l_numeric,omega_l_series1,omega_l_series2,\
omega_po_numeric,omega_po_gardner,y_norm_consistent,y_norm_as_printed";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{},{}", format_num(row.ratio), format_num(row.tau2));
        match row.report() {
            Some(r) => {
                let _ = writeln!(
                    out,
                    ",{},{},{},{},{},{},{}",
                    format_num(r.omega_l_numeric),
                    format_num(r.omega_l_series1),
                    format_num(r.omega_l_series2),
                    format_num(r.omega_po_numeric),
                    format_opt(r.omega_po_gardner),
                    format_num(r.y_norm_consistent),
                    format_num(r.y_norm_as_printed),
                );
            }
            None => out.push_str(",,,,,,,\n"),
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepMetadata<'a> {
    pub tool_version: &'static str,
    pub grid: &'a SweepGrid,
    pub trace: TraceConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepDocument<'a, R: Serialize> {
    pub metadata: SweepMetadata<'a>,
    pub rows: &'a [R],
}

pub fn sweep_json<R: Serialize>(grid: &SweepGrid, cfg: &TraceConfig, rows: &[R]) -> String {
    let doc = SweepDocument {
        metadata: SweepMetadata {
            tool_version: env!("CARGO_PKG_VERSION"),
            grid,
            trace: *cfg,
        },
        rows,
    };
    serde_json::to_string_pretty(&doc).expect("sweep rows serialize")
}

/// Reads `omega_l` off the lock-in diagram: linear interpolation of
/// `omega_l tau1 / k0` at `X = k0 / tau1` on the `tau2` curve, times `X`.
pub fn lookup_lock_in(table: &[SweepRow], k0: f64, tau1: f64, tau2: f64) -> Result<f64> {
    LoopParams::new(k0, tau1, tau2)?;
    let x = k0 / tau1;
    let mut curve: Vec<(f64, f64)> = table
        .iter()
        .filter(|r| (r.tau2 - tau2).abs() <= 1e-12 * tau2.abs().max(1e-300))
        .filter_map(|r| r.report().map(|rep| (r.ratio, rep.y_norm_consistent)))
        .collect();
    if curve.is_empty() {
        return Err(Error::Lookup(format!("no curve for tau2 = {tau2}")));
    }
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = (curve[0].0, curve[curve.len() - 1].0);
    if !(lo..=hi).contains(&x) {
        return Err(Error::Lookup(format!(
            "k0/tau1 = {x} outside tabulated range [{lo}, {hi}]"
        )));
    }
    let i = curve.partition_point(|&(r, _)| r < x);
    let y = if curve[i].0 == x {
        curve[i].1
    } else {
        let (x0, y0) = curve[i - 1];
        let (x1, y1) = curve[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    Ok(y * x)
}

/// Pull-out estimates side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PullOutRow {
    pub ratio: f64,
    pub tau2: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_po_numeric: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_po_series1: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_po_series2: f64,
    #[serde(serialize_with = "ser_rounded_opt")]
    pub omega_po_gardner: Option<f64>,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_po_series1_as_printed: f64,
    #[serde(serialize_with = "ser_rounded")]
    pub omega_po_series2_as_printed: f64,
    /// `omega_po_numeric * tau1 / k0`.
    #[serde(serialize_with = "ser_rounded")]
    pub po_norm_consistent: f64,
}

pub fn compare_pull_out(grid: &SweepGrid, cfg: &TraceConfig) -> Result<Vec<PullOutRow>> {
    grid.validate()?;
    let mut rows = grid
        .cells()
        .into_par_iter()
        .map(|(ratio, tau2)| {
            let p = grid.params(ratio, tau2)?;
            let r = lock_in_report(&p, cfg)?;
            Ok(PullOutRow {
                ratio,
                tau2,
                omega_po_numeric: r.omega_po_numeric,
                omega_po_series1: 2.0 * r.omega_l_series1,
                omega_po_series2: 2.0 * r.omega_l_series2,
                omega_po_gardner: r.omega_po_gardner,
                omega_po_series1_as_printed: 2.0 * r.omega_l_series1_as_printed,
                omega_po_series2_as_printed: 2.0 * r.omega_l_series2_as_printed,
                po_norm_consistent: r.omega_po_numeric / ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows, |r| (r.ratio, r.tau2), grid);
    Ok(rows)
}

pub const COMPARE_CSV_HEADER: &str =
    "ratio,tau2,omega_po_numeric,omega_po_series1,omega_po_series2,\
omega_po_gardner,omega_po_series1_as_printed,omega_po_series2_as_printed,po_norm_consistent";

pub fn compare_csv(rows: &[PullOutRow]) -> String {
    let mut out = String::from(COMPARE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_num(r.ratio),
            format_num(r.tau2),
            format_num(r.omega_po_numeric),
            format_num(r.omega_po_series1),
            format_num(r.omega_po_series2),
            format_opt(r.omega_po_gardner),
            format_num(r.omega_po_series1_as_printed),
            format_num(r.omega_po_series2_as_printed),
            format_num(r.po_norm_consistent),
        );
    }
    out
}
