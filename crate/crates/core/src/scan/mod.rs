//! Grid scans over the shape triangle: region membership, ellipticity and
//! normal-form classification per point, resonance curves, CSV and SVG.
//!
//! Every point is evaluated independently and rows keep grid order, so the
//! output does not depend on the number of threads.

mod config;
mod grid;
mod record;
mod resonance;
mod svg;

use std::collections::BTreeMap;

use rayon::prelude::*;

pub use config::{GridSpec, ScanConfig, Window, DEFAULT_DX};
pub use grid::{grid_points, in_region, line_extent, GridPoint};
pub use record::{
    boundary_value, evaluate, format_nu, frequencies_at, write_csv, ModeData, PointOutcome, ScanKind, ScanRecord,
    Status, CSV_HEADER,
};
pub use resonance::{canonical, detect_resonances, ResonanceCurve, ResonanceReport};
pub use svg::write_svg;

use crate::error::{Error, Result};

/// Order-preserving map, serial for one thread and on a dedicated pool
/// otherwise.
pub(crate) fn par_map<T: Sync, U: Send>(threads: usize, items: &[T], f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[derive(Clone, Debug)]
pub struct ScanOutput {
    pub kind: ScanKind,
    pub grid: Vec<GridPoint>,
    pub outcomes: Vec<PointOutcome>,
}

impl ScanOutput {
    pub fn records(&self) -> Vec<ScanRecord> {
        self.outcomes.iter().map(|o| o.record.clone()).collect()
    }

    pub fn in_region(&self) -> usize {
        self.outcomes.iter().filter(|o| o.record.in_region).count()
    }

    pub fn elliptic(&self) -> usize {
        self.outcomes.iter().filter(|o| o.record.elliptic == Some(true)).count()
    }

    pub fn failures(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o.record.status, Status::Failed(_)))
            .count()
    }

    pub fn class_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for o in &self.outcomes {
            if let Some(c) = o.record.class {
                *m.entry(c.to_string()).or_insert(0) += 1;
            }
        }
        m
    }

    /// Plain-text summary: point counts, elliptic fraction, failure rate and
    /// classes.
    pub fn summary(&self) -> String {
        let n = self.in_region();
        let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let mut s = format!(
            "points {}\nin_region {}\nfailures {} ({:.4})\n",
            self.outcomes.len(),
            n,
            self.failures(),
            frac(self.failures())
        );
        if self.kind != ScanKind::Regions {
            s += &format!("elliptic {} ({:.4})\n", self.elliptic(), frac(self.elliptic()));
        }
        for (c, k) in self.class_counts() {
            s += &format!("class {c} {k}\n");
        }
        s
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_csv(&self.records(), out)
    }

    pub fn write_svg<W: std::io::Write>(&self, out: W) -> Result<()> {
        write_svg(&self.records(), self.kind, out)
    }
}

pub fn run_scan(cfg: &ScanConfig, kind: ScanKind) -> Result<ScanOutput> {
    cfg.validate()?;
    let grid = grid_points(cfg)?;
    let outcomes = par_map(cfg.threads, &grid, |p| evaluate(cfg, kind, p));
    Ok(ScanOutput { kind, grid, outcomes })
}

/// Classification scan followed by resonance detection on the same grid.
pub fn run_resonances(cfg: &ScanConfig) -> Result<(ScanOutput, ResonanceReport)> {
    let scan = run_scan(cfg, ScanKind::Classify)?;
    let report = detect_resonances(cfg, &scan.grid, &scan.outcomes);
    Ok((scan, report))
}

/// Writes the scan to the configured CSV and SVG paths, if any.
pub fn write_outputs(cfg: &ScanConfig, scan: &ScanOutput) -> Result<()> {
    let create = |p: &std::path::Path| {
        std::fs::File::create(p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    };
    if let Some(p) = &cfg.csv {
        scan.write_csv(create(p)?)?;
    }
    if let Some(p) = &cfg.svg {
        scan.write_svg(create(p)?)?;
    }
    Ok(())
}
