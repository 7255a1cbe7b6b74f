//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria that fail are reported, not hidden; the process exits nonzero on
//! a failure only when `RIEMANN_ACCEPTANCE_STRICT` is set.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riemann_core::classify::ClassTag;
use riemann_core::families::{classify_parallelism, critical_point_residual, Parallelism};
use riemann_core::normalform::{birkhoff_order4, DEFAULT_RES_TOL};
use riemann_core::polyalg::{harmonic_order, omega_dot, Harmonic};
use riemann_core::potential::{cn, potential_at, potential_v, potential_v_elliptic, PotentialConstants};
use riemann_core::reduced::{hessian_at_equilibrium, integrate_reduced_flow, FlowOptions, BLOCK_TOL};
use riemann_core::scan::{
    boundary_value, canonical, grid_points, run_resonances, run_scan, ResonanceReport, ScanConfig, ScanKind,
    ScanOutput,
};
use riemann_core::verify::{fd_hessian, sample_equilibria};
use riemann_core::{Branch, EllipsoidType, EquilibriumPoint, Result, ShapeCoords};

use EllipsoidType::{I, II, III, S2, S3};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn k1() -> PotentialConstants {
    PotentialConstants::default()
}

fn config(kind: EllipsoidType, pairs: &[(&str, &str)]) -> ScanConfig {
    let mut cfg = ScanConfig::new(kind);
    for (k, v) in pairs {
        cfg.set(k, v).unwrap();
    }
    cfg
}

fn at(e: &EquilibriumPoint) -> String {
    let s = e.b.to_shape_coords();
    format!("{} ({:.4}, {:.4})", e.kind, s.x, s.y)
}

fn criterion_1() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for kind in EllipsoidType::ALL {
        let pts = sample_equilibria(kind, 20, k1())?;
        for e in &pts {
            let (g, t) = critical_point_residual(e)?;
            worst = worst.max(g).max(t);
        }
        counts.push(format!("{kind} {}", pts.len()));
    }
    let enough = counts.iter().all(|c| c.split(' ').nth(1).unwrap().parse::<usize>().unwrap() >= 20);
    Ok(verdict(
        enough && worst <= 1e-6,
        format!("max residual {worst:.2e} (limit 1e-6); points {}", counts.join(", ")),
    ))
}

fn criterion_2() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for g in [1.0, 2.0] {
        let k = PotentialConstants::new(g)?;
        let s = [1.0; 3];
        for (v, exact) in [
            (potential_at(s, &k)?, -4.0 * PI * g),
            (cn(s, 0, &k)?, 4.0 * PI * g / 7.0),
            (cn(s, 1, &k)?, 8.0 * PI * g / 35.0),
        ] {
            worst = worst.max((v - exact).abs() / exact.abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut n = 0;
    let mut worst_q: f64 = 0.0;
    while n < 20 {
        let (a, b): (f64, f64) = (rng.random(), rng.random());
        let Ok(b) = ShapeCoords::new(a.max(b), a.min(b)).and_then(|s| s.to_semiaxes()) else {
            continue;
        };
        let q = potential_v(&b, &k1())?;
        let e = potential_v_elliptic(&b, &k1());
        worst_q = worst_q.max((q - e).abs() / e.abs());
        n += 1;
    }
    Ok(verdict(
        worst <= 1e-10 && worst_q <= 1e-10,
        format!("closed forms {worst:.2e}, quadrature vs elliptic {worst_q:.2e} over 20 shapes (limit 1e-10)"),
    ))
}

fn criterion_3() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut n = 0;
    let mut failures = Vec::new();
    for kind in EllipsoidType::ALL {
        for e in sample_equilibria(kind, 40, k1())? {
            n += 1;
            match hessian_at_equilibrium(&e) {
                Ok(r) => {
                    let expected = if kind.is_s_type() { 6 } else { 5 };
                    if r.blocks.len() != expected {
                        failures.push(format!("{}: {} blocks", at(&e), r.blocks.len()));
                    }
                    worst = r.blocks.iter().map(|b| b.1).fold(worst, f64::max);
                }
                Err(err) => failures.push(format!("{}: {err}", at(&e))),
            }
        }
    }
    Ok(verdict(
        failures.is_empty() && worst <= BLOCK_TOL,
        format!(
            "{n} equilibria, worst block {worst:.2e} of scale (limit {BLOCK_TOL:.0e}){}",
            failures.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    ))
}

/// Grid spacing in `y` on each line.
fn line_steps(out: &ScanOutput) -> HashMap<usize, f64> {
    let mut steps = HashMap::new();
    for w in out.grid.windows(2) {
        if w[0].line == w[1].line {
            steps.entry(w[0].line).or_insert(w[1].y - w[0].y);
        }
    }
    steps
}

fn criterion_4(ii: &ScanOutput) -> Result<Verdict> {
    let mut parts = Vec::new();
    let mut ok = true;

    let s3 = run_scan(&config(S3, &[("dx", "0.005")]), ScanKind::Ellipticity)?;
    let a = s3.elliptic() == s3.in_region() && s3.in_region() > 0;
    ok &= a;
    parts.push(format!(
        "(a) S3 {}/{} elliptic {}",
        s3.elliptic(),
        s3.in_region(),
        if a { "pass" } else { "fail" }
    ));

    let dx = 0.005;
    let s2 = run_scan(&config(S2, &[("dx", "0.005")]), ScanKind::Ellipticity)?;
    let steps = line_steps(&s2);
    let ghat = |x: f64, y: f64| boundary_value(III, x, y, &k1()).ok();
    let (mut co, mut co_elliptic, mut mismatched, mut far) = (0, 0, 0, 0);
    let (mut counter, mut counter_elliptic) = (0, 0);
    for (p, o) in s2.grid.iter().zip(&s2.outcomes) {
        let Some(elliptic) = o.record.elliptic else { continue };
        let e = EquilibriumPoint::from_shape(S2, p.x, p.y, Branch::PlusMinus, k1())?;
        match classify_parallelism(&e) {
            Parallelism::Coparallel => {}
            Parallelism::Counterparallel => {
                counter += 1;
                counter_elliptic += elliptic as usize;
                continue;
            }
            _ => continue,
        }
        co += 1;
        co_elliptic += elliptic as usize;
        let Some(g) = ghat(p.x, p.y) else { continue };
        if (g <= 0.0) == elliptic {
            continue;
        }
        mismatched += 1;
        let h = steps.get(&p.line).copied().unwrap_or(dx).max(dx);
        let near = [(dx, 0.0), (-dx, 0.0), (0.0, h), (0.0, -h)]
            .iter()
            .filter_map(|(ddx, ddy)| ghat(p.x + ddx, p.y + ddy))
            .any(|gn| gn.signum() != g.signum());
        far += (!near) as usize;
    }
    let b = far == 0 && co_elliptic > 0 && co_elliptic < co;
    ok &= b;
    parts.push(format!(
        "(b) coparallel S2 {co_elliptic}/{co} elliptic, {mismatched} off the Ĝ <= 0 prediction, {far} of them beyond one cell; counterparallel {counter_elliptic}/{counter} elliptic {}",
        if b { "pass" } else { "fail" }
    ));

    let frac = ii.elliptic() as f64 / ii.in_region().max(1) as f64;
    let c = frac >= 0.01;
    ok &= c;
    parts.push(format!(
        "(c) II {}/{} elliptic ({:.2}%) over the whole region at dx=0.0025 {}",
        ii.elliptic(),
        ii.in_region(),
        100.0 * frac,
        if c { "pass" } else { "fail" }
    ));

    let crescent = run_scan(
        &config(
            I,
            &[
                ("x_min", "0.5"),
                ("x_max", "0.503"),
                ("dx", "0.0002"),
                ("points_min", "20"),
                ("points_max", "40"),
            ],
        ),
        ScanKind::Ellipticity,
    )?;
    let non = crescent.in_region() - crescent.elliptic();
    let d = non > 0 && crescent.elliptic() > 0;
    ok &= d;
    parts.push(format!(
        "(d) I window 0.500 < x < 0.503: {non}/{} non-elliptic {}",
        crescent.in_region(),
        if d { "pass" } else { "fail" }
    ));
    Ok(verdict(ok, parts.join("; ")))
}

fn criterion_5() -> Result<Verdict> {
    let (mut symp, mut homo, mut fd): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut stray = 0;
    let mut constructed = 0;
    let mut errors = Vec::new();
    for kind in EllipsoidType::ALL {
        let cfg = config(kind, &[("dx", "0.01"), ("points_min", "10"), ("points_max", "20")]);
        for p in grid_points(&cfg)? {
            let Ok(e) = EquilibriumPoint::from_shape(kind, p.x, p.y, Branch::PlusMinus, k1()) else {
                continue;
            };
            let nf = match birkhoff_order4(&e, DEFAULT_RES_TOL) {
                Ok(nf) if nf.constructed => nf,
                _ => continue,
            };
            constructed += 1;
            symp = symp.max(nf.freq.symplectic_defect);
            homo = homo.max(nf.homological_residual);
            if nf.h4_averaged.spectrum().iter().any(|nu| harmonic_order(nu) > 0) {
                stray += 1;
            }
            match (fd_hessian(&e), hessian_at_equilibrium(&e)) {
                (Ok(f), Ok(r)) => fd = fd.max((f - r.hessian).abs().max() / r.scale),
                (Err(err), _) | (_, Err(err)) => errors.push(format!("{}: {err}", at(&e))),
            }
        }
    }
    Ok(verdict(
        constructed > 0 && symp <= 1e-9 && homo <= 1e-10 && stray == 0 && fd <= 1e-6 && errors.is_empty(),
        format!(
            "{constructed} constructed points: symplectic {symp:.2e} (1e-9), homological {homo:.2e} (1e-10), \
             nonzero harmonics in H''4 at {stray} points, FD Hessian {fd:.2e} (1e-6){}",
            errors.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    ))
}

struct TypeScan {
    kind: EllipsoidType,
    dx: f64,
    out: ScanOutput,
    report: ResonanceReport,
}

fn criterion_6(scans: &[TypeScan]) -> Result<Verdict> {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in scans {
        let union: BTreeSet<Harmonic> = s
            .out
            .outcomes
            .iter()
            .filter_map(|o| o.modes.as_ref())
            .flat_map(|m| m.spectrum.iter().chain(m.hits.iter()))
            .filter(|nu| harmonic_order(nu) <= 4)
            .map(canonical)
            .collect();
        let candidates: Vec<usize> = s
            .out
            .outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| {
                let (Some(m), Some(c)) = (&o.modes, o.record.class) else { return false };
                if matches!(c, ClassTag::Resonant(_) | ClassTag::NotElliptic) || !m.hits.is_empty() {
                    return false;
                }
                let norm = m.big_omega.iter().map(|w| w * w).sum::<f64>().sqrt();
                union.iter().all(|nu| omega_dot(&m.big_omega, nu).abs() > 1e-4 * norm)
            })
            .map(|(i, _)| i)
            .collect();
        let n = candidates.len().min(500);
        let sample: Vec<usize> = (0..n).map(|i| candidates[i * candidates.len() / n.max(1)]).collect();
        let steps = line_steps(&s.out);
        let curve_points: Vec<(f64, f64)> = s.report.curves.iter().flat_map(|c| c.points.iter().copied()).collect();
        let (mut good, mut far) = (0, 0);
        let mut why: std::collections::BTreeMap<String, usize> = Default::default();
        for &i in &sample {
            let r = &s.out.outcomes[i].record;
            let dqc = r.class.is_some_and(|c| c.is_dqc_or_stronger());
            if dqc && r.kam == Some(true) {
                good += 1;
                continue;
            }
            let tag = r.class.map(|c| c.to_string()).unwrap_or_default();
            *why.entry(if dqc { "KAM-degenerate".into() } else { tag }).or_insert(0) += 1;
            let p = &s.out.grid[i];
            let cell = steps.get(&p.line).copied().unwrap_or(s.dx).max(s.dx);
            let near = curve_points
                .iter()
                .any(|(x, y)| (x - p.x).hypot(y - p.y) <= 2.0 * cell);
            far += (!near) as usize;
        }
        let frac = good as f64 / n.max(1) as f64;
        let pass = n >= 500 && frac >= 0.99 && far == 0;
        ok &= pass;
        let why: Vec<String> = why.iter().map(|(k, v)| format!("{k} {v}")).collect();
        parts.push(format!(
            "{} {good}/{n} ({:.1}%), {far} exceptions beyond 2 cells{}",
            s.kind,
            100.0 * frac,
            if why.is_empty() { String::new() } else { format!(" [{}]", why.join(", ")) }
        ));
    }
    Ok(verdict(ok, parts.join("; ")))
}

fn criterion_7(scans: &[TypeScan]) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for s in scans {
        let expected = match s.kind {
            S2 => 8.0,
            I => 52.0,
            II => 33.0,
            III => 47.0,
            S3 => continue,
        };
        let n = s.report.count() as f64;
        let pass = (n - expected).abs() <= 0.2 * expected;
        ok &= pass;
        parts.push(format!(
            "{} {n} (expected {expected}, {:+.0}%) {}",
            s.kind,
            100.0 * (n - expected) / expected,
            if pass { "pass" } else { "fail" }
        ));
    }
    verdict(ok, parts.join("; "))
}

fn criterion_8() -> Result<Verdict> {
    let elliptic = [(S3, 0.6, 0.4), (S2, 0.2, 0.18), (I, 0.7, 1.0 / 15.0), (III, 0.1, 0.046)];
    let mut drift: f64 = 0.0;
    for (kind, x, y) in elliptic {
        let e = EquilibriumPoint::from_shape(kind, x, y, Branch::PlusMinus, k1())?;
        let d = integrate_reduced_flow(&e, &[0.0; 8], 100.0, 0.1, FlowOptions::default())?;
        drift = drift.max(if d.truncated { f64::INFINITY } else { d.max_excursion });
    }
    let e = EquilibriumPoint::from_shape(S3, 0.6, 0.4, Branch::PlusMinus, k1())?;
    let offset = [1e-4, 0.0, 0.0, 0.0, 1e-4, 1e-4, 0.0, 0.0];
    let d = integrate_reduced_flow(&e, &offset, 100.0, 0.1, FlowOptions::default())?;
    let bounded = !d.truncated && d.max_excursion <= 1e-2;
    Ok(verdict(
        drift <= 1e-8 && d.energy_drift <= 1e-8 && bounded,
        format!(
            "equilibrium drift {drift:.2e} (1e-8) at 4 elliptic points; S3 offset 1e-4: energy drift {:.2e} (1e-8), \
             excursion {:.2e} (1e-2)",
            d.energy_drift, d.max_excursion
        ),
    ))
}

fn criterion_9() -> Result<Verdict> {
    let mut csv = Vec::new();
    for threads in ["1", "8"] {
        let cfg = config(
            III,
            &[("dx", "0.01"), ("points_min", "20"), ("points_max", "40"), ("threads", threads)],
        );
        let out = run_scan(&cfg, ScanKind::Classify)?;
        let mut buf = Vec::new();
        out.write_csv(&mut buf)?;
        csv.push(buf);
    }
    Ok(verdict(
        csv[0] == csv[1],
        format!("III classify scan, {} bytes serial vs 8 threads", csv[0].len()),
    ))
}

fn report(n: usize, name: &str, v: Result<Verdict>, started: Instant) -> bool {
    let v = v.unwrap_or_else(|e| verdict(false, format!("error: {e}")));
    println!(
        "criterion {n} [{name}] {}: {} ({:.0} s)",
        if v.passed { "PASS" } else { "FAIL" },
        v.detail,
        started.elapsed().as_secs_f64()
    );
    v.passed
}

fn main() {
    // `cargo test -- --list` and filters come through as arguments; the
    // acceptance run has a single entry.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut results = Vec::new();
    let t = Instant::now();
    results.push(report(1, "equilibrium oracle", criterion_1(), t));
    let t = Instant::now();
    results.push(report(2, "potential closed forms", criterion_2(), t));
    let t = Instant::now();
    results.push(report(3, "Hessian blocks", criterion_3(), t));

    let t = Instant::now();
    let dx = 0.0025;
    let scans: Vec<TypeScan> = [S2, I, II, III, S3]
        .into_iter()
        .map(|kind| {
            let cfg = config(kind, &[("dx", "0.0025")]);
            let (out, report) = run_resonances(&cfg).expect("resonance scan");
            TypeScan { kind, dx, out, report }
        })
        .collect();
    println!("scans at dx=0.0025 ({:.0} s)", t.elapsed().as_secs_f64());

    let t = Instant::now();
    results.push(report(4, "ellipticity", criterion_4(&scans[2].out), t));
    let t = Instant::now();
    results.push(report(5, "normal-form identities", criterion_5(), t));
    let t = Instant::now();
    results.push(report(6, "directional quasi-convexity", criterion_6(&scans), t));
    let t = Instant::now();
    results.push(report(7, "resonance counts", Ok(criterion_7(&scans)), t));
    let t = Instant::now();
    results.push(report(8, "dynamics", criterion_8(), t));
    let t = Instant::now();
    results.push(report(9, "determinism", criterion_9(), t));

    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 && std::env::var_os("RIEMANN_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
