use anyhow::{bail, Context, Result};

use crate::table::{fmt_f64, Table};

/// Columns every trajectory CSV carries.
pub const REQUIRED: [&str; 6] = ["t_eVinv", "wSt", "xi_q", "xi_p", "xi_qq", "xi_pp"];

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnDiff {
    pub column: String,
    pub max_abs: f64,
    pub rms: f64,
    pub threshold: Option<f64>,
}

impl ColumnDiff {
    /// NaN differences never pass.
    pub fn passes(&self) -> bool {
        self.threshold.is_none_or(|t| self.max_abs <= t)
    }
}

/// Parses "t0:t1" in units of ω_S t; either end may be empty.
pub fn parse_window(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').context("window must look like t0:t1")?;
    let lo = if a.trim().is_empty() {
        f64::NEG_INFINITY
    } else {
        a.trim().parse()?
    };
    let hi = if b.trim().is_empty() {
        f64::INFINITY
    } else {
        b.trim().parse()?
    };
    if lo > hi {
        bail!("window start {lo} exceeds its end {hi}");
    }
    Ok((lo, hi))
}

/// Parses "col=val,col=val".
pub fn parse_thresholds(s: &str) -> Result<Vec<(String, f64)>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let (c, v) = p
                .split_once('=')
                .with_context(|| format!("threshold \"{p}\" must look like col=val"))?;
            Ok((c.trim().to_owned(), v.trim().parse::<f64>()?))
        })
        .collect()
}

/// Per-column max and RMS differences over the rows whose ω_S t lies in the
/// window. Columns present in only one file are skipped; the required
/// columns and the time rows must match.
pub fn compare(
    a: &Table,
    b: &Table,
    window: (f64, f64),
    thresholds: &[(String, f64)],
) -> Result<Vec<ColumnDiff>> {
    for name in REQUIRED {
        if a.column(name).is_none() || b.column(name).is_none() {
            bail!("schema mismatch: column {name} missing");
        }
    }
    for (name, _) in thresholds {
        if a.column(name).is_none() || b.column(name).is_none() {
            bail!("schema mismatch: threshold column {name} missing");
        }
    }
    let (ta, tb) = (a.column("wSt").unwrap(), b.column("wSt").unwrap());
    let rows: Vec<(&Vec<f64>, &Vec<f64>)> = a
        .rows
        .iter()
        .zip(&b.rows)
        .filter(|(r, _)| r[ta] >= window.0 && r[ta] <= window.1)
        .collect();
    if rows.is_empty() {
        bail!("no rows inside the window");
    }
    for (ra, rb) in &rows {
        if (ra[ta] - rb[tb]).abs() > 1e-9 * ra[ta].abs().max(1.0) {
            bail!(
                "schema mismatch: time grids differ (ω_S t = {} vs {})",
                ra[ta],
                rb[tb]
            );
        }
    }
    let mut out = Vec::new();
    for (ia, name) in a.header.iter().enumerate() {
        let Some(ib) = b.column(name) else { continue };
        // a NaN on one side only poisons the column; NaN on both sides counts as equal
        let diffs: Vec<f64> = rows
            .iter()
            .map(|(ra, rb)| {
                if ra[ia].is_nan() && rb[ib].is_nan() {
                    0.0
                } else {
                    (ra[ia] - rb[ib]).abs()
                }
            })
            .collect();
        let max_abs = if diffs.iter().any(|d| d.is_nan()) {
            f64::NAN
        } else {
            diffs.iter().copied().fold(0.0, f64::max)
        };
        let sum_sq: f64 = diffs.iter().map(|d| d * d).sum();
        out.push(ColumnDiff {
            column: name.clone(),
            max_abs,
            rms: (sum_sq / rows.len() as f64).sqrt(),
            threshold: thresholds.iter().find(|(c, _)| c == name).map(|&(_, v)| v),
        });
    }
    Ok(out)
}

/// CSV report: column, max_abs, rms, threshold, status.
pub fn write_report<W: std::io::Write>(diffs: &[ColumnDiff], mut w: W) -> Result<()> {
    writeln!(w, "column,max_abs,rms,threshold,status")?;
    for d in diffs {
        let (threshold, status) = match d.threshold {
            Some(t) => (fmt_f64(t), if d.passes() { "pass" } else { "fail" }),
            None => (String::new(), ""),
        };
        writeln!(
            w,
            "{},{},{},{threshold},{status}",
            d.column,
            fmt_f64(d.max_abs),
            fmt_f64(d.rms)
        )?;
    }
    Ok(())
}
