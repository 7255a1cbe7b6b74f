//! Cross-module oracle suite: each oracle recomputes a quantity by an
//! independent route, or checks an identity the construction must satisfy,
//! over sampled equilibria of every type.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{classify_equilibrium, ClassifyOptions};
use crate::error::{Error, Result};
use crate::families::{critical_point_residual, pair_region_contains, Branch, EllipsoidType, EquilibriumPoint};
use crate::geometry::{SemiAxes, ShapeCoords};
use crate::normalform::{birkhoff_with_frequencies, symplectic_diagonalize, Expansion, DEFAULT_RES_TOL};
use crate::polyalg::harmonic_order;
use crate::potential::{cn, potential_at, potential_v, potential_v_elliptic, PotentialConstants};
use crate::reduced::{
    charts_for, charts_with_axis, distinguished_axis, hessian_with_charts, reduced_hamiltonian_with, EllipticityOptions,
    Matrix8, BLOCK_TOL,
};
use crate::scan::{grid_points, ScanConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub name: &'static str,
    pub passed: bool,
    /// Number of individual checks.
    pub checked: usize,
    /// Largest measured defect and the limit it is held to.
    pub worst: f64,
    pub limit: f64,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub samples_per_type: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub g: f64,
    /// Builds the chart frames on the wrong axis: the block-structure oracle
    /// must then fail.
    pub wrong_frame_axis: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples_per_type: 20,
            random_samples: 10_000,
            seed: 1,
            g: 1.0,
            wrong_frame_axis: false,
        }
    }
}

struct Tally {
    name: &'static str,
    limit: f64,
    checked: usize,
    worst: f64,
    failed: usize,
    note: String,
}

impl Tally {
    fn new(name: &'static str, limit: f64) -> Self {
        Tally {
            name,
            limit,
            checked: 0,
            worst: 0.0,
            failed: 0,
            note: String::new(),
        }
    }

    fn defect(&mut self, v: f64, at: impl FnOnce() -> String) {
        self.checked += 1;
        if v.is_nan() || v > self.limit {
            self.failed += 1;
            if self.note.is_empty() {
                self.note = format!("{v:e} at {}", at());
            }
        }
        if !v.is_nan() {
            self.worst = self.worst.max(v);
        }
    }

    fn error(&mut self, e: &Error, at: impl FnOnce() -> String) {
        self.checked += 1;
        self.failed += 1;
        if self.note.is_empty() {
            self.note = format!("{e} at {}", at());
        }
    }

    fn finish(self) -> OracleResult {
        OracleResult {
            name: self.name,
            passed: self.failed == 0 && self.checked > 0,
            checked: self.checked,
            worst: self.worst,
            limit: self.limit,
            note: if self.failed > 0 {
                format!("{} failures; first: {}", self.failed, self.note)
            } else {
                self.note
            },
        }
    }
}

/// About `n` equilibria spread over the existence region of `kind`.
pub fn sample_equilibria(kind: EllipsoidType, n: usize, k: PotentialConstants) -> Result<Vec<EquilibriumPoint>> {
    let mut cfg = ScanConfig::new(kind);
    cfg.g = k.g();
    for (key, v) in [("dx", "0.02"), ("points_min", "4"), ("points_max", "4")] {
        cfg.set(key, v)?;
    }
    let pts = grid_points(&cfg)?;
    let stride = (pts.len() / n.max(1)).max(1);
    Ok(pts
        .iter()
        .step_by(stride)
        .filter_map(|p| EquilibriumPoint::from_shape(kind, p.x, p.y, Branch::PlusMinus, k).ok())
        .collect())
}

fn random_shapes(n: usize, seed: u64) -> Vec<SemiAxes> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        if let Ok(b) = ShapeCoords::new(x.max(y), x.min(y)).and_then(|s| s.to_semiaxes()) {
            out.push(b);
        }
    }
    out
}

fn at(e: &EquilibriumPoint) -> String {
    let s = e.b.to_shape_coords();
    format!("{} ({:.4}, {:.4})", e.kind, s.x, s.y)
}

/// Central-difference Hessian of the reduced Hamiltonian in the charts of
/// the equilibrium, Richardson-extrapolated over steps `h, h/2, h/4`. The
/// step shrinks with the smallest gap between semiaxes, where the higher
/// derivatives grow.
pub fn fd_hessian(e: &EquilibriumPoint) -> Result<Matrix8> {
    let [b1, b2, b3] = e.b.axes();
    let gap = (b1 - b2).abs().min((b1 - b3).abs()).min((b2 - b3).abs());
    let h = (0.1 * gap).min(2e-3);
    let d1 = fd_hessian_step(e, h)?;
    let d2 = fd_hessian_step(e, 0.5 * h)?;
    let d4 = fd_hessian_step(e, 0.25 * h)?;
    let r1 = (d2 * 4.0 - d1) / 3.0;
    let r2 = (d4 * 4.0 - d2) / 3.0;
    Ok((r2 * 16.0 - r1) / 15.0)
}

fn fd_hessian_step(e: &EquilibriumPoint, h: f64) -> Result<Matrix8> {
    let charts = charts_for(e)?;
    let f = |i: usize, si: f64, j: usize, sj: f64| {
        let mut d = [0.0; 8];
        d[i] += si * h;
        d[j] += sj * h;
        reduced_hamiltonian_with(e, &charts, &d)
    };
    let mut m = Matrix8::zeros();
    for i in 0..8 {
        for j in i..8 {
            let v = (f(i, 1.0, j, 1.0)? - f(i, 1.0, j, -1.0)? - f(i, -1.0, j, 1.0)? + f(i, -1.0, j, -1.0)?)
                / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

fn potential_oracle(opts: &VerifyOptions) -> Result<OracleResult> {
    let k = PotentialConstants::new(opts.g)?;
    let g = opts.g;
    let mut t = Tally::new("potential closed forms", 1e-10);
    let sphere = [1.0; 3];
    for (v, exact) in [
        (potential_at(sphere, &k)?, -4.0 * PI * g),
        (cn(sphere, 0, &k)?, 4.0 * PI * g / 7.0),
        (cn(sphere, 1, &k)?, 8.0 * PI * g / 35.0),
    ] {
        t.defect((v - exact).abs() / exact.abs(), || "the sphere".into());
    }
    for b in random_shapes(20, opts.seed) {
        let q = potential_v(&b, &k)?;
        let e = potential_v_elliptic(&b, &k);
        t.defect((q - e).abs() / e.abs(), || format!("{:?}", b.axes()));
    }
    Ok(t.finish())
}

fn empty_sets_oracle(opts: &VerifyOptions) -> Result<OracleResult> {
    let k = PotentialConstants::new(opts.g)?;
    let mut t = Tally::new("empty planar sets", 0.0);
    for b in random_shapes(opts.random_samples, opts.seed + 1) {
        for (sign, i, j) in [(1.0, 1, 2), (-1.0, 1, 2), (-1.0, 0, 1)] {
            let hit = pair_region_contains(sign, i, j, &b, &k)?;
            t.defect(if hit { 1.0 } else { 0.0 }, || format!("{:?}", b.axes()));
        }
    }
    Ok(t.finish())
}

fn scaling_oracle(opts: &VerifyOptions, samples: &[Vec<EquilibriumPoint>]) -> Result<OracleResult> {
    let k1 = PotentialConstants::new(opts.g)?;
    let k2 = PotentialConstants::new(2.0 * opts.g)?;
    let mut t = Tally::new("g doubling", 1e-10);
    for b in random_shapes(20, opts.seed + 2) {
        let (v1, v2) = (potential_v(&b, &k1)?, potential_v(&b, &k2)?);
        t.defect((v2 - 2.0 * v1).abs() / v1.abs(), || format!("V at {:?}", b.axes()));
    }
    let copts = ClassifyOptions::default();
    for e in samples.iter().flat_map(|s| s.iter().step_by(4)) {
        let e2 = EquilibriumPoint::new(e.kind, e.b, e.branch, k2)?;
        let m = e.m.stacked() * 2f64.sqrt();
        let rel = (e2.m.stacked() - m).norm() / m.norm();
        t.defect(rel, || format!("momenta at {}", at(e)));
        let c1 = classify_equilibrium(e, DEFAULT_RES_TOL, copts).map(|c| c.0.tag);
        let c2 = classify_equilibrium(&e2, DEFAULT_RES_TOL, copts).map(|c| c.0.tag);
        let same = matches!((&c1, &c2), (Ok(a), Ok(b)) if a == b);
        t.defect(if same { 0.0 } else { 1.0 }, || format!("verdict {c1:?} vs {c2:?} at {}", at(e)));
    }
    Ok(t.finish())
}

/// Runs every oracle. Setup failures are errors; oracle failures are
/// reported in the results.
pub fn run_oracles(opts: &VerifyOptions) -> Result<Vec<OracleResult>> {
    let k = PotentialConstants::new(opts.g)?;
    let samples: Vec<Vec<EquilibriumPoint>> = EllipsoidType::ALL
        .iter()
        .map(|&t| sample_equilibria(t, opts.samples_per_type, k))
        .collect::<Result<_>>()?;

    let mut critical = Tally::new("critical-point residuals", 1e-6);
    let mut blocks = Tally::new("Hessian block structure", BLOCK_TOL);
    let mut fd = Tally::new("finite-difference Hessian", 1e-6);
    let mut symp = Tally::new("symplectic diagonalization", 1e-9);
    let mut homological = Tally::new("homological residual", 1e-10);
    let mut averaged = Tally::new("averaged normal form", 1e-10);

    for e in samples.iter().flatten() {
        match critical_point_residual(e) {
            Ok((g, tq)) => critical.defect(g.max(tq), || at(e)),
            Err(err) => critical.error(&err, || at(e)),
        }
        let axis = if opts.wrong_frame_axis {
            (distinguished_axis(e.kind) + 1) % 3
        } else {
            distinguished_axis(e.kind)
        };
        let report = charts_with_axis(e, axis).and_then(|c| hessian_with_charts(e, &c));
        match &report {
            Ok(r) => {
                let worst = r.blocks.iter().map(|b| b.1).fold(r.cc_defect, f64::max);
                blocks.defect(worst, || at(e));
            }
            Err(err) => blocks.error(err, || at(e)),
        }
        let Ok(r) = report else { continue };
        match fd_hessian(e) {
            Ok(h) => fd.defect((h - r.hessian).abs().max() / r.scale, || at(e)),
            Err(err) => fd.error(&err, || at(e)),
        }
        if opts.wrong_frame_axis {
            continue;
        }
        let ex = match Expansion::new(e, EllipticityOptions::default()) {
            Ok(ex) => ex,
            Err(err) => {
                symp.error(&err, || at(e));
                continue;
            }
        };
        let freq = match symplectic_diagonalize(&ex.linear, DEFAULT_RES_TOL) {
            Ok(f) => f,
            Err(Error::NotElliptic | Error::Resonance(_)) => continue,
            Err(err) => {
                symp.error(&err, || at(e));
                continue;
            }
        };
        symp.defect(freq.symplectic_defect.max(freq.form_defect), || at(e));
        let nf = birkhoff_with_frequencies(&ex.series, freq, DEFAULT_RES_TOL);
        homological.defect(nf.homological_residual, || at(e));
        if nf.constructed {
            let stray = nf.h4_averaged.spectrum().iter().any(|nu| harmonic_order(nu) > 0);
            averaged.defect(
                if stray { 1.0 } else { nf.commutator_residual },
                || at(e),
            );
        }
    }

    let mut out = vec![critical.finish(), potential_oracle(opts)?, blocks.finish(), fd.finish()];
    if !opts.wrong_frame_axis {
        out.extend([symp.finish(), homological.finish(), averaged.finish()]);
    }
    out.push(empty_sets_oracle(opts)?);
    if !opts.wrong_frame_axis {
        out.push(scaling_oracle(opts, &samples)?);
    }
    Ok(out)
}

/// Fixed-width pass/fail table.
pub fn render_table(results: &[OracleResult]) -> String {
    let mut s = String::new();
    writeln!(s, "{:<28} {:<6} {:>7} {:>12} {:>9}  note", "oracle", "result", "checks", "worst", "limit").unwrap();
    for r in results {
        writeln!(
            s,
            "{:<28} {:<6} {:>7} {:>12.3e} {:>9.1e}  {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.checked,
            r.worst,
            r.limit,
            r.note
        )
        .unwrap();
    }
    s
}
