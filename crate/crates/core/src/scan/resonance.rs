use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::polyalg::{harmonic_order, omega_dot, Harmonic};

use super::config::ScanConfig;
use super::grid::GridPoint;
use super::record::{format_nu, frequencies_at, ModeData, PointOutcome};

/// Representative of `±ν`: the first nonzero entry is positive.
pub fn canonical(nu: &Harmonic) -> Harmonic {
    match nu.iter().find(|&&v| v != 0) {
        Some(&v) if v < 0 => nu.map(|c| -c),
        _ => *nu,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceCurve {
    pub nu: Harmonic,
    pub order: u32,
    /// Approximate zeros of `Ω·ν`, sorted.
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceReport {
    /// Distinct harmonics (up to sign) in the union of the spectra.
    pub union_size: usize,
    /// Harmonics whose `Ω·ν` vanishes or changes sign on the grid.
    pub curves: Vec<ResonanceCurve>,
}

impl ResonanceReport {
    pub fn count(&self) -> usize {
        self.curves.len()
    }

    pub fn count_by_order(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for c in &self.curves {
            *m.entry(c.order).or_insert(0) += 1;
        }
        m
    }

    /// One row per curve point: `nu,order,x,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["nu", "order", "x", "y"]).map_err(io)?;
        for c in &self.curves {
            for (x, y) in &c.points {
                w.write_record([format_nu(&c.nu), c.order.to_string(), format!("{x:.16e}"), format!("{y:.16e}")])
                    .map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug)]
enum Crossing {
    /// `Ω·ν` changes sign between two neighbours on the same line.
    Along(usize, usize),
    Across(usize, usize),
    /// The construction stopped on `ν` at this point.
    At(usize),
}

fn dot_sign(m: &ModeData, nu: &Harmonic) -> f64 {
    omega_dot(&m.big_omega, nu).signum()
}

/// Finds resonances from the frequencies on a scanned grid: harmonics of the
/// union spectrum whose `Ω·ν` vanishes at a grid point or changes sign
/// between neighbours with the same sign pattern `s`. Crossings along a line
/// are refined by bisection in `y`.
pub fn detect_resonances(cfg: &ScanConfig, grid: &[GridPoint], outcomes: &[PointOutcome]) -> ResonanceReport {
    let modes: Vec<Option<&ModeData>> = outcomes.iter().map(|o| o.modes.as_ref()).collect();
    let union: BTreeSet<Harmonic> = modes
        .iter()
        .flatten()
        .flat_map(|m| m.spectrum.iter().chain(m.hits.iter()))
        .filter(|nu| harmonic_order(nu) <= cfg.max_order)
        .map(canonical)
        .collect();
    let at: HashMap<(usize, usize), usize> = grid.iter().enumerate().map(|(i, p)| ((p.line, p.index), i)).collect();
    let mut pairs = Vec::new();
    for (i, p) in grid.iter().enumerate() {
        let Some(a) = modes[i] else { continue };
        for (key, along) in [((p.line, p.index + 1), true), ((p.line + 1, p.index), false)] {
            let Some(&j) = at.get(&key) else { continue };
            if modes[j].is_some_and(|b| b.signs == a.signs) {
                pairs.push((i, j, along));
            }
        }
    }
    let mut found: Vec<(Harmonic, Crossing)> = Vec::new();
    for nu in &union {
        for (i, m) in modes.iter().enumerate() {
            if m.is_some_and(|m| m.hits.iter().any(|h| canonical(h) == *nu)) {
                found.push((*nu, Crossing::At(i)));
            }
        }
        for &(i, j, along) in &pairs {
            let (a, b) = (modes[i].unwrap(), modes[j].unwrap());
            let (sa, sb) = (dot_sign(a, nu), dot_sign(b, nu));
            if sa * sb < 0.0 {
                found.push((*nu, if along { Crossing::Along(i, j) } else { Crossing::Across(i, j) }));
            }
        }
    }
    let located = super::par_map(cfg.threads, &found, |(nu, c)| locate(cfg, grid, &modes, nu, *c));
    let mut curves: BTreeMap<Harmonic, Vec<(f64, f64)>> = BTreeMap::new();
    for ((nu, _), p) in found.iter().zip(located) {
        curves.entry(*nu).or_default().push(p);
    }
    let mut curves: Vec<ResonanceCurve> = curves
        .into_iter()
        .map(|(nu, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            ResonanceCurve {
                nu,
                order: harmonic_order(&nu),
                points,
            }
        })
        .collect();
    curves.sort_by(|a, b| a.order.cmp(&b.order).then(a.nu.cmp(&b.nu)));
    ResonanceReport {
        union_size: union.len(),
        curves,
    }
}

fn locate(cfg: &ScanConfig, grid: &[GridPoint], modes: &[Option<&ModeData>], nu: &Harmonic, c: Crossing) -> (f64, f64) {
    match c {
        Crossing::At(i) => (grid[i].x, grid[i].y),
        Crossing::Across(i, j) => (0.5 * (grid[i].x + grid[j].x), 0.5 * (grid[i].y + grid[j].y)),
        Crossing::Along(i, j) => {
            let x = grid[i].x;
            let signs = modes[i].unwrap().signs;
            let (mut lo, mut hi) = (grid[i].y, grid[j].y);
            let s_lo = dot_sign(modes[i].unwrap(), nu);
            for _ in 0..cfg.refine_steps {
                let mid = 0.5 * (lo + hi);
                let Some(f) = frequencies_at(cfg, x, mid) else { break };
                if f.signs != signs {
                    break;
                }
                if omega_dot(&f.big_omega, nu).signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (x, 0.5 * (lo + hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_representative() {
        assert_eq!(canonical(&[0, -1, 2, 0]), [0, 1, -2, 0]);
        assert_eq!(canonical(&[1, -1, 0, 0]), [1, -1, 0, 0]);
        assert_eq!(canonical(&[0, 0, 0, 0]), [0, 0, 0, 0]);
    }
}
