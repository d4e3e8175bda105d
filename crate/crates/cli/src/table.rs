use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use heom_core::observables::{grid_operators, Observation, RawMoments, ReducedDensity};
use heom_core::system::Grid;

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// An in-memory CSV: one header row and numeric rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|&x| fmt_f64(x)))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file =
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader =
            csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
        let mut table = Self::new(header);
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .with_context(|| {
                    format!("{} row {}: non-numeric field", path.display(), line + 1)
                })?;
            if row.len() != table.header.len() {
                bail!(
                    "{} row {}: {} fields for {} columns",
                    path.display(),
                    line + 1,
                    row.len(),
                    table.header.len()
                );
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

/// Trajectory CSV: times, normalised moments, norm, w_n, ⟨n⟩ and raw moments.
pub fn trajectory_table(points: &[Observation], omega_s: f64) -> Table {
    let n_weights = points.first().map_or(0, |p| p.weights.len());
    let mut header: Vec<String> = ["t_eVinv", "wSt", "xi_q", "xi_p", "xi_qq", "xi_pp", "norm"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..n_weights).map(|n| format!("w{n}")));
    header.extend(
        ["n_mean", "raw_norm", "raw_q", "raw_p", "raw_qq", "raw_pp"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut table = Table::new(header);
    for p in points {
        let mut row = vec![p.t, omega_s * p.t, p.xi_q, p.xi_p, p.xi_qq, p.xi_pp, p.norm];
        row.extend(&p.weights);
        row.extend([p.n_mean, p.raw.norm, p.raw.q, p.raw.p, p.raw.qq, p.raw.pp]);
        table.rows.push(row);
    }
    table
}

/// Moments of a reduced density on the grid, in the trajectory layout.
pub fn density_observation(t: f64, rho: &ReducedDensity, grid: &Grid) -> Observation {
    let [q, p, qq, pp] = grid_operators(grid);
    let raw = RawMoments {
        norm: rho.trace(),
        q: rho.expectation(&q).re,
        p: rho.expectation(&p).re,
        qq: rho.expectation(&qq).re,
        pp: rho.expectation(&pp).re,
    };
    let (mq, mp) = (raw.q / raw.norm, raw.p / raw.norm);
    Observation {
        t,
        xi_q: mq,
        xi_p: mp,
        xi_qq: raw.qq / raw.norm - mq * mq,
        xi_pp: raw.pp / raw.norm - mp * mp,
        norm: raw.norm,
        weights: Vec::new(),
        n_mean: f64::NAN,
        raw,
    }
}
