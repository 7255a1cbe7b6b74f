use nalgebra::{Matrix4, SMatrix};
use num_complex::Complex64;

use super::{charts_for, hamiltonian_series, EquilibriumCharts};
use crate::error::{Error, Result};
use crate::families::EquilibriumPoint;
use crate::polyalg::{Monomial, TruncatedSeries};

pub type Matrix8 = SMatrix<f64, 8, 8>;

/// Default ellipticity tolerance: `|Re λ| <= ELLIPTIC_TOL * max(1, |λ|)`.
pub const ELLIPTIC_TOL: f64 = 1e-7;

/// Relative size below which a Hessian block counts as zero.
pub const BLOCK_TOL: f64 = 1e-9;

const B: [usize; 2] = [0, 1];
const C: [usize; 2] = [2, 3];
const Q: [usize; 2] = [4, 5];
const P: [usize; 2] = [6, 7];

/// `J8 = diag[J4, J4]`, `J4 = [[0, I], [-I, 0]]`.
pub fn symplectic_matrix() -> Matrix8 {
    let mut j = Matrix8::zeros();
    for blk in [0, 4] {
        for i in 0..2 {
            j[(blk + i, blk + 2 + i)] = 1.0;
            j[(blk + 2 + i, blk + i)] = -1.0;
        }
    }
    j
}

#[derive(Clone, Debug)]
pub struct HessianReport {
    pub hessian: Matrix8,
    /// Largest absolute entry, the reference scale for the block checks.
    pub scale: f64,
    /// Relative size of each block that must vanish.
    pub blocks: Vec<(&'static str, f64)>,
    /// Relative mismatch between `H''_cc` and `K(b*)`.
    pub cc_defect: f64,
    /// Largest degree-one coefficient relative to the Hessian scale.
    pub gradient: f64,
}

pub(crate) fn hessian_from_series(s: &TruncatedSeries) -> Matrix8 {
    let mut h = Matrix8::zeros();
    for (m, c) in s.terms() {
        if m.degree() != 2 {
            continue;
        }
        let e = m.exponents();
        let idx: Vec<usize> = (0..8).flat_map(|i| std::iter::repeat_n(i, e[i] as usize)).collect();
        let (i, j) = (idx[0], idx[1]);
        if i == j {
            h[(i, i)] = 2.0 * c.re;
        } else {
            h[(i, j)] = c.re;
            h[(j, i)] = c.re;
        }
    }
    h
}

fn block_norm(h: &Matrix8, rows: [usize; 2], cols: [usize; 2]) -> f64 {
    let mut v: f64 = 0.0;
    for &i in &rows {
        for &j in &cols {
            v = v.max(h[(i, j)].abs());
        }
    }
    v
}

/// Analytic Hessian at the equilibrium with the block-structure checks.
pub fn hessian_at_equilibrium(e: &EquilibriumPoint) -> Result<HessianReport> {
    hessian_with_charts(e, &charts_for(e)?)
}

pub fn hessian_with_charts(e: &EquilibriumPoint, charts: &EquilibriumCharts) -> Result<HessianReport> {
    if charts.left.is_none() || charts.right.is_none() {
        return Err(Error::Irrotational);
    }
    let s = hamiltonian_series(e, charts, 2)?;
    hessian_report_from_series(e, &s)
}

/// Block checks on the quadratic part of an already expanded Hamiltonian.
pub(crate) fn hessian_report_from_series(e: &EquilibriumPoint, s: &TruncatedSeries) -> Result<HessianReport> {
    let hessian = hessian_from_series(s);
    let scale = hessian.abs().max();
    let gradient = (0..8)
        .map(|i| s.coeff(Monomial::var(i)).norm())
        .fold(0.0, f64::max)
        / scale;
    let mut blocks = vec![
        ("H_cb", block_norm(&hessian, C, B) / scale),
        ("H_cq", block_norm(&hessian, C, Q) / scale),
        ("H_cp", block_norm(&hessian, C, P) / scale),
        ("H_bp", block_norm(&hessian, B, P) / scale),
        ("H_qp", block_norm(&hessian, Q, P) / scale),
    ];
    if e.kind.is_s_type() {
        blocks.push(("H_bq", block_norm(&hessian, B, Q) / scale));
    }
    let k = super::mass_matrices(&e.b)?.k;
    let mut cc_defect: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            cc_defect = cc_defect.max((hessian[(2 + i, 2 + j)] - k[(i, j)]).abs());
        }
    }
    cc_defect /= scale;
    let report = HessianReport {
        hessian,
        scale,
        blocks,
        cc_defect,
        gradient,
    };
    if let Some(&(block, residual)) = report.blocks.iter().find(|b| b.1 > BLOCK_TOL) {
        return Err(Error::FrameConstruction { block, residual });
    }
    if report.cc_defect > BLOCK_TOL {
        return Err(Error::FrameConstruction {
            block: "H_cc - K",
            residual: report.cc_defect,
        });
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticityOptions {
    pub tol: f64,
}

impl Default for EllipticityOptions {
    fn default() -> Self {
        EllipticityOptions { tol: ELLIPTIC_TOL }
    }
}

#[derive(Clone, Debug)]
pub struct LinearizationReport {
    pub hessian: Matrix8,
    pub x: Matrix8,
    /// Sorted by imaginary part, then real part.
    pub eigenvalues: Vec<Complex64>,
    pub elliptic: bool,
    pub zero_modes: usize,
    /// Some `|Re λ|` lies within a factor ten of the tolerance.
    pub margin: bool,
    /// Largest `|Re λ| / max(1, |λ|)`.
    pub max_real: f64,
    /// Largest distance from an eigenvalue to the nearest of `-λ`, `conj λ`,
    /// relative to the spectral radius.
    pub symmetry_defect: f64,
    pub is_s_type: bool,
}

impl LinearizationReport {
    /// Frequencies `|Im λ|` of the eigenvalues with positive imaginary part,
    /// in descending order.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut w: Vec<f64> = self.eigenvalues.iter().filter(|l| l.im > 0.0).map(|l| l.im).collect();
        w.sort_by(|a, b| b.total_cmp(a));
        w
    }
}

/// Real Schur form, loosening the convergence threshold when the tight one
/// stalls.
pub(crate) fn schur_eigenvalues<D>(x: &nalgebra::OMatrix<f64, D, D>) -> Result<Vec<Complex64>>
where
    D: nalgebra::DimSub<nalgebra::U1>,
    nalgebra::DefaultAllocator: nalgebra::allocator::Allocator<D, nalgebra::DimDiff<D, nalgebra::U1>>
        + nalgebra::allocator::Allocator<nalgebra::DimDiff<D, nalgebra::U1>>
        + nalgebra::allocator::Allocator<D, D>
        + nalgebra::allocator::Allocator<D>,
{
    for eps in [1e-15, 1e-14, 1e-13] {
        if let Some(schur) = x.clone().try_schur(eps, 10_000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    // Balancing is a similarity, so the spectrum is unchanged.
    let mut balanced = x.clone();
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut balanced);
    for eps in [1e-15, 1e-13] {
        if let Some(schur) = balanced.clone().try_schur(eps, 100_000) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::Eigen("Schur decomposition did not converge".into()))
}

pub(crate) fn eigenvalues_of(x: &Matrix8) -> Result<Vec<Complex64>> {
    let mut ev = schur_eigenvalues(x)?;
    if ev.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(ev)
}

fn spectrum_symmetry_defect(ev: &[Complex64]) -> f64 {
    let radius = ev.iter().map(|l| l.norm()).fold(1e-300, f64::max);
    let nearest = |z: Complex64| ev.iter().map(|l| (l - z).norm()).fold(f64::INFINITY, f64::min);
    ev.iter()
        .map(|&l| nearest(-l).max(nearest(l.conj())))
        .fold(0.0, f64::max)
        / radius
}

pub(crate) fn report_from(hessian: Matrix8, opts: EllipticityOptions, is_s_type: bool) -> Result<LinearizationReport> {
    let x = symplectic_matrix() * hessian;
    let eigenvalues = if is_s_type {
        // The (b, c) and (q, p) blocks decouple exactly.
        let mut ev = Vec::with_capacity(8);
        for blk in [[0, 1, 2, 3], [4, 5, 6, 7]] {
            let sub = Matrix4::from_fn(|i, j| x[(blk[i], blk[j])]);
            ev.extend(schur_eigenvalues(&sub)?);
        }
        ev.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        ev
    } else {
        eigenvalues_of(&x)?
    };
    let scale = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let rel = |l: &Complex64| l.re.abs() / l.norm().max(1.0);
    let max_real = eigenvalues.iter().map(rel).fold(0.0, f64::max);
    let elliptic = max_real <= opts.tol;
    let margin = eigenvalues
        .iter()
        .map(rel)
        .any(|r| r >= opts.tol / 10.0 && r <= opts.tol * 10.0);
    let zero_modes = eigenvalues
        .iter()
        .filter(|l| l.norm() <= 1e-8 * scale.max(1.0))
        .count();
    Ok(LinearizationReport {
        symmetry_defect: spectrum_symmetry_defect(&eigenvalues),
        hessian,
        x,
        eigenvalues,
        elliptic,
        zero_modes,
        margin,
        max_real,
        is_s_type,
    })
}

pub fn linearize(e: &EquilibriumPoint) -> Result<LinearizationReport> {
    linearize_with(e, EllipticityOptions::default())
}

pub fn linearize_with(e: &EquilibriumPoint, opts: EllipticityOptions) -> Result<LinearizationReport> {
    let h = hessian_at_equilibrium(e)?;
    report_from(h.hessian, opts, e.kind.is_s_type())
}
