use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use crate::classify::{classify_normal_form, ClassTag};
use crate::error::{Error, Result};
use crate::families::{functions, EllipsoidType, EquilibriumPoint};
use crate::geometry::ShapeCoords;
use crate::normalform::{birkhoff_with_frequencies, symplectic_diagonalize, Expansion, FrequencyData};
use crate::polyalg::{harmonic_order, omega_dot, Harmonic, MODES};
use crate::potential::PotentialConstants;
use crate::reduced::linearize_with;

use super::config::ScanConfig;
use super::grid::GridPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanKind {
    Regions,
    Ellipticity,
    Classify,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Ok,
    Outside,
    NearResonant,
    Failed(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Outside => f.write_str("outside"),
            Status::NearResonant => f.write_str("near-resonant"),
            Status::Failed(m) => write!(f, "failed: {m}"),
        }
    }
}

/// One CSV row. Columns, in order:
///
/// `x, y, line, index` grid position; `in_region`; `boundary` the function
/// whose sign defines the region (`G^S_-` for S2, `G^S_+` for S3,
/// `2x - y - 1` for I, `D` for II, `Ĝ` for III); `elliptic`; `max_real`
/// largest `|Re λ|/max(1,|λ|)`; `omega1..4` the frequencies, signed `Ω_j`
/// when a symplectic diagonalization exists and `|Im λ|` otherwise;
/// `class`; `kam`; `det_a`; `res_nu, res_order, res_value` the obstructing
/// resonance, or the harmonic of the spectra with the smallest
/// `|Ω·ν|/|Ω|` (signed value); `status`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRecord {
    pub x: f64,
    pub y: f64,
    pub line: usize,
    pub index: usize,
    pub in_region: bool,
    pub boundary: Option<f64>,
    pub elliptic: Option<bool>,
    pub max_real: Option<f64>,
    pub omega: Option<[f64; MODES]>,
    pub class: Option<ClassTag>,
    pub kam: Option<bool>,
    pub det_a: Option<f64>,
    pub resonance: Option<(Harmonic, u32, f64)>,
    pub status: Status,
}

pub const CSV_HEADER: [&str; 19] = [
    "x", "y", "line", "index", "in_region", "boundary", "elliptic", "max_real", "omega1", "omega2", "omega3",
    "omega4", "class", "kam", "det_a", "res_nu", "res_order", "res_value", "status",
];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl ScanRecord {
    fn blank(p: &GridPoint) -> Self {
        ScanRecord {
            x: p.x,
            y: p.y,
            line: p.line,
            index: p.index,
            in_region: false,
            boundary: None,
            elliptic: None,
            max_real: None,
            omega: None,
            class: None,
            kam: None,
            det_a: None,
            resonance: None,
            status: Status::Outside,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![
            float(self.x),
            float(self.y),
            self.line.to_string(),
            self.index.to_string(),
            self.in_region.to_string(),
            opt(self.boundary, float),
            opt(self.elliptic, |b| b.to_string()),
            opt(self.max_real, float),
        ];
        for j in 0..MODES {
            f.push(opt(self.omega, |w| float(w[j])));
        }
        f.push(opt(self.class, |c| c.to_string()));
        f.push(opt(self.kam, |b| b.to_string()));
        f.push(opt(self.det_a, float));
        let (nu, order, value) = match &self.resonance {
            Some((nu, order, value)) => (format_nu(nu), order.to_string(), float(*value)),
            None => Default::default(),
        };
        f.extend([nu, order, value, self.status.to_string()]);
        f
    }
}

/// `ν` as `n1 n2 n3 n4`.
pub fn format_nu(nu: &Harmonic) -> String {
    nu.iter().map(i32::to_string).collect::<Vec<_>>().join(" ")
}

/// Writes the header and one row per record, in the given order.
pub fn write_csv<W: Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record(r.fields()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Frequencies and spectra kept for resonance detection.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeData {
    pub signs: [i32; MODES],
    pub big_omega: [f64; MODES],
    /// `Sp H3 ∪ Sp H'_4 ∖ {0}`.
    pub spectrum: BTreeSet<Harmonic>,
    /// Harmonics on which the construction stopped.
    pub hits: Vec<Harmonic>,
}

#[derive(Clone, Debug)]
pub struct PointOutcome {
    pub record: ScanRecord,
    pub modes: Option<ModeData>,
}

/// The sign-defining function of the region at `(x, y)`.
pub fn boundary_value(kind: EllipsoidType, x: f64, y: f64, k: &PotentialConstants) -> Result<f64> {
    let [b1, b2, b3] = ShapeCoords::new(x, y)?.to_semiaxes()?.axes();
    match kind {
        EllipsoidType::S2 => functions::gs(-1.0, b1, b2, b3, k),
        EllipsoidType::S3 => functions::gs(1.0, b1, b3, b2, k),
        EllipsoidType::I => Ok(2.0 * x - y - 1.0),
        EllipsoidType::II => Ok(functions::dfun(b1, b3, b2)),
        EllipsoidType::III => functions::gtilde(b1, b2, b3, k),
    }
}

fn clean(e: &Error) -> String {
    e.to_string().replace(['\n', '\r'], " ")
}

/// Evaluates one grid point. Numerical failures end up in `status`.
pub fn evaluate(cfg: &ScanConfig, kind: ScanKind, p: &GridPoint) -> PointOutcome {
    let mut rec = ScanRecord::blank(p);
    let k = match cfg.constants() {
        Ok(k) => k,
        Err(e) => {
            rec.status = Status::Failed(clean(&e));
            return PointOutcome { record: rec, modes: None };
        }
    };
    let mut modes = None;
    if let Err(e) = fill(cfg, kind, p, &k, &mut rec, &mut modes) {
        rec.status = Status::Failed(clean(&e));
    }
    PointOutcome { record: rec, modes }
}

fn fill(
    cfg: &ScanConfig,
    kind: ScanKind,
    p: &GridPoint,
    k: &PotentialConstants,
    rec: &mut ScanRecord,
    modes: &mut Option<ModeData>,
) -> Result<()> {
    rec.in_region = super::grid::in_region(cfg.kind, p.x, p.y, k);
    rec.boundary = Some(boundary_value(cfg.kind, p.x, p.y, k)?);
    if !rec.in_region {
        return Ok(());
    }
    rec.status = Status::Ok;
    if kind == ScanKind::Regions {
        return Ok(());
    }
    let e = EquilibriumPoint::from_shape(cfg.kind, p.x, p.y, cfg.branch, *k)?;
    let lin = linearize_with(&e, cfg.ellipticity())?;
    rec.elliptic = Some(lin.elliptic);
    rec.max_real = Some(lin.max_real);
    let mut w = lin.frequencies();
    w.resize(MODES, 0.0);
    rec.omega = Some(std::array::from_fn(|j| w[j]));
    if kind == ScanKind::Ellipticity {
        return Ok(());
    }
    if !lin.elliptic {
        rec.class = Some(ClassTag::NotElliptic);
        return Ok(());
    }
    let freq = match symplectic_diagonalize(&lin, cfg.res_tol) {
        Ok(f) => f,
        Err(Error::Resonance(hit)) => {
            rec.class = Some(ClassTag::Resonant(hit.order));
            rec.resonance = Some((hit.nu, hit.order, hit.value));
            return Ok(());
        }
        Err(err) => return Err(err),
    };
    rec.omega = Some(freq.big_omega);
    let ex = Expansion::new(&e, cfg.ellipticity())?;
    let nf = birkhoff_with_frequencies(&ex.series, freq, cfg.res_tol);
    let class = classify_normal_form(&nf, cfg.classify_options());
    rec.class = Some(class.tag);
    let spectrum: BTreeSet<Harmonic> = nf
        .union_spectrum()
        .into_iter()
        .filter(|nu| harmonic_order(nu) <= cfg.max_order)
        .collect();
    let omega = nf.freq.big_omega;
    let norm = nf.freq.omega_norm();
    if nf.constructed {
        rec.kam = Some(class.kam_nondegenerate);
        rec.det_a = Some(class.det_a);
        rec.resonance = nearest(&omega, norm, &spectrum);
        if rec.resonance.is_some_and(|r| r.2.abs() <= cfg.near_res_tol) {
            rec.status = Status::NearResonant;
        }
    } else if let Some(hit) = nf.resonances_hit.first() {
        rec.resonance = Some((hit.nu, hit.order, hit.value / norm));
    }
    *modes = Some(ModeData {
        signs: nf.freq.signs,
        big_omega: omega,
        spectrum,
        hits: nf.resonances_hit.iter().map(|h| h.nu).collect(),
    });
    Ok(())
}

fn nearest(omega: &[f64; MODES], norm: f64, spectrum: &BTreeSet<Harmonic>) -> Option<(Harmonic, u32, f64)> {
    spectrum
        .iter()
        .map(|nu| (*nu, harmonic_order(nu), omega_dot(omega, nu) / norm))
        .min_by(|a, b| a.2.abs().total_cmp(&b.2.abs()).then(a.0.cmp(&b.0)))
}

/// Signed frequencies at a shape point, or `None` off the elliptic set or on
/// failure. Used to refine resonance crossings.
pub fn frequencies_at(cfg: &ScanConfig, x: f64, y: f64) -> Option<FrequencyData> {
    let k = cfg.constants().ok()?;
    let e = EquilibriumPoint::from_shape(cfg.kind, x, y, cfg.branch, k).ok()?;
    let lin = linearize_with(&e, cfg.ellipticity()).ok()?;
    symplectic_diagonalize(&lin, cfg.res_tol).ok()
}
