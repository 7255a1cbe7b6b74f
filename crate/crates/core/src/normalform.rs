//! Symplectic diagonalization of the quadratic part and the order-four
//! Birkhoff normal form.
//!
//! The diagonalizing coordinates are `Ξ = (B1, B2, C1, C2, B3, B4, C3, C4)`
//! with `ξ = T Ξ`; mode `j` is the pair `(B_j, C_j)`. After the substitution
//! `B = (iW + Z)/√2`, `C = -(W + iZ)/√2` the quadratic part becomes
//! `Σ iΩ_j W_j Z_j` and the series variables are `(W1..W4, Z1..Z4)`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::families::EquilibriumPoint;
use crate::polyalg::{harmonic_order, omega_dot, Harmonic, Monomial, TruncatedSeries, MODES, NVARS};
use crate::reduced::{
    charts_for, hamiltonian_series, hessian_report_from_series, report_from, symplectic_matrix,
    EllipticityOptions, EquilibriumCharts, HessianReport, LinearizationReport, Matrix8,
};

/// Default resonance threshold relative to `|Ω|`.
pub const DEFAULT_RES_TOL: f64 = 1e-6;

/// Smallest admissible `|Γ_j|` for a unit eigenvector.
pub const GAMMA_MIN: f64 = 1e-12;

/// Tolerance of the symplecticity and H2-form checks on `T`.
pub const DIAGONALIZATION_TOL: f64 = 1e-9;

/// Largest degree-one coefficient accepted at an equilibrium, relative to the
/// Hessian scale.
pub const GRADIENT_TOL: f64 = 1e-8;

/// Positions of `(B_j, C_j)` in `Ξ`.
pub const MODE_PAIRS: [(usize, usize); MODES] = [(0, 2), (1, 3), (4, 6), (5, 7)];

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceHit {
    pub nu: Harmonic,
    pub order: u32,
    /// `Ω·ν` (or the frequency difference for order-two checks).
    pub value: f64,
}

impl ResonanceHit {
    pub fn new(nu: Harmonic, value: f64) -> Self {
        ResonanceHit {
            order: harmonic_order(&nu),
            nu,
            value,
        }
    }
}

/// Whether the normalized eigenvectors are the columns or the rows of `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Columns,
    Rows,
}

#[derive(Clone, Debug)]
pub struct FrequencyData {
    /// Positive frequencies `ω_j` in mode order.
    pub omega: [f64; MODES],
    pub signs: [i32; MODES],
    /// `Ω_j = s_j ω_j`.
    pub big_omega: [f64; MODES],
    pub gamma: [f64; MODES],
    /// `ξ = T Ξ`.
    pub t: Matrix8,
    pub orientation: Orientation,
    /// `|Tᵀ J8 T - J8|_max`.
    pub symplectic_defect: f64,
    /// `|Tᵀ H T - diag(Ω)|_max / max ω`.
    pub form_defect: f64,
}

impl FrequencyData {
    pub fn omega_norm(&self) -> f64 {
        self.big_omega.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Rotates each pair `(u_j, v_j)` by `angles[j]`. This is the remaining
    /// gauge freedom of the eigenvectors and must not change the normal form.
    pub fn with_mode_rotations(&self, angles: [f64; MODES]) -> FrequencyData {
        let mut out = self.clone();
        for (j, &(pos, mom)) in MODE_PAIRS.iter().enumerate() {
            let (s, c) = angles[j].sin_cos();
            let u = self.t.column(pos).clone_owned();
            let v = self.t.column(mom).clone_owned();
            out.t.set_column(pos, &(u * c + v * s));
            out.t.set_column(mom, &(v * c - u * s));
        }
        out
    }
}


/// Unit null vector of `x - iω` from the smallest singular value.
fn eigenvector(x: &DMatrix<f64>, omega: f64) -> Result<Vec<Complex64>> {
    let n = x.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let d = if i == j { Complex64::new(0.0, omega) } else { Complex64::new(0.0, 0.0) };
        Complex64::new(x[(i, j)], 0.0) - d
    });
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Eigen("SVD without right vectors".into()))?;
    let k = svd.singular_values.argmin().0;
    let mut v = nalgebra::DVector::from_fn(n, |j, _| v_t[(k, j)].conj());
    // Two steps of inverse iteration tighten the vector well below the SVD's
    // accuracy when the block is badly scaled.
    let lu = m.lu();
    for _ in 0..2 {
        match lu.solve(&v) {
            Some(w) if w.iter().all(|z| z.is_finite()) && w.norm() > 0.0 => v = w.unscale(w.norm()),
            _ => break,
        }
    }
    let mut v: Vec<Complex64> = v.iter().copied().collect();
    let big = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let phase = v[big].conj() / v[big].norm();
    v.iter_mut().for_each(|z| *z *= phase);
    Ok(v)
}

/// Makes the mode pairs exactly `J8`-orthonormal, in mode order. The
/// eigenvectors already are up to roundoff; this removes the roundoff that
/// large columns amplify.
fn symplectic_gram_schmidt(cols: &mut Matrix8) {
    let j = symplectic_matrix();
    let form = |a: &nalgebra::SVector<f64, 8>, b: &nalgebra::SVector<f64, 8>| a.dot(&(j * b));
    for m in 0..MODES {
        let (pos, mom) = MODE_PAIRS[m];
        let mut u = cols.column(pos).into_owned();
        let mut v = cols.column(mom).into_owned();
        for &(kp, km) in &MODE_PAIRS[..m] {
            let (uk, vk) = (cols.column(kp).into_owned(), cols.column(km).into_owned());
            u = u - uk * form(&u, &vk) + vk * form(&u, &uk);
            v = v - uk * form(&v, &vk) + vk * form(&v, &uk);
        }
        let g = form(&u, &v);
        if g > 0.0 {
            let s = g.sqrt();
            cols.set_column(pos, &(u / s));
            cols.set_column(mom, &(v / s));
        }
    }
}

/// Symplectic defect and the defect of `TᵀHT` from the diagonal form. The
/// latter is relative to `max(ω_max, max |T|ᵀ|H||T|)`, the size of the terms
/// that cancel, so ill-conditioned Hessians near degenerate shapes are not
/// penalised for roundoff.
fn form_defects(t: &Matrix8, hessian: &Matrix8, big_omega: &[f64; MODES], omega_max: f64) -> (f64, f64) {
    let j = symplectic_matrix();
    let symp = (t.transpose() * j * t - j).abs().max();
    let mut expected = Matrix8::zeros();
    for (m, &(pos, mom)) in MODE_PAIRS.iter().enumerate() {
        expected[(pos, pos)] = big_omega[m];
        expected[(mom, mom)] = big_omega[m];
    }
    let ta = t.abs();
    let scale = omega_max.max((ta.transpose() * hessian.abs() * ta).max()).max(1e-300);
    let form = (t.transpose() * hessian * t - expected).abs().max() / scale;
    (symp, form)
}

/// Order-one and order-two resonance checks on the positive frequencies.
/// For S-types only the pairs inside each decoupled block are checked.
fn low_order_resonances(omega: &[f64; MODES], is_s_type: bool, tol: f64) -> Vec<ResonanceHit> {
    let mut hits = Vec::new();
    for (j, &w) in omega.iter().enumerate() {
        if w <= tol {
            let mut nu = [0; MODES];
            nu[j] = 1;
            hits.push(ResonanceHit::new(nu, w));
        }
    }
    let pairs: &[(usize, usize)] = if is_s_type {
        &[(0, 1), (2, 3)]
    } else {
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    };
    for &(j, k) in pairs {
        if (omega[j] - omega[k]).abs() <= tol {
            let mut nu = [0; MODES];
            nu[j] = 1;
            nu[k] = -1;
            hits.push(ResonanceHit::new(nu, omega[j] - omega[k]));
        }
    }
    hits
}

/// Symplectic diagonalization of the linearization.
///
/// `res_tol` is relative to `|ω|`. Fails with a resonance of order one or two
/// when frequencies vanish or coincide, since the eigenvectors are then not
/// determined.
pub fn symplectic_diagonalize(report: &LinearizationReport, res_tol: f64) -> Result<FrequencyData> {
    if !report.elliptic {
        return Err(Error::NotElliptic);
    }
    let blocks: Vec<Vec<usize>> = if report.is_s_type {
        vec![(0..4).collect(), (4..8).collect()]
    } else {
        vec![(0..8).collect()]
    };
    let mut modes: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(MODES);
    let mut omega = [0.0; MODES];
    let mut block_of = Vec::with_capacity(MODES);
    for (bi, idx) in blocks.iter().enumerate() {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| report.x[(idx[i], idx[j])]);
        let mut ev = crate::reduced::schur_eigenvalues(&sub)?;
        ev.sort_by(|a, b| b.im.total_cmp(&a.im));
        for l in &ev[..idx.len() / 2] {
            omega[block_of.len()] = l.im.max(0.0);
            block_of.push((bi, sub.clone()));
        }
    }
    let norm = omega.iter().map(|w| w * w).sum::<f64>().sqrt();
    let hits = low_order_resonances(&omega, report.is_s_type, res_tol * norm);
    if let Some(hit) = hits.into_iter().next() {
        return Err(Error::Resonance(hit));
    }
    for (m, (bi, sub)) in block_of.iter().enumerate() {
        let local = eigenvector(sub, omega[m])?;
        let mut x = vec![Complex64::new(0.0, 0.0); NVARS];
        for (k, &g) in blocks[*bi].iter().enumerate() {
            x[g] = local[k];
        }
        modes.push((omega[m], x));
    }

    let j8 = symplectic_matrix();
    let mut signs = [0; MODES];
    let mut gamma = [0.0; MODES];
    let mut cols = Matrix8::zeros();
    for (m, (_, x)) in modes.iter().enumerate() {
        let re = nalgebra::SVector::<f64, 8>::from_fn(|i, _| x[i].re);
        let im = nalgebra::SVector::<f64, 8>::from_fn(|i, _| x[i].im);
        let g = re.dot(&(j8 * im));
        if g.abs() < GAMMA_MIN {
            return Err(Error::DegenerateMode { mode: m + 1, gamma: g.abs() });
        }
        let (u, v) = if g > 0.0 { (re, im) } else { (im, re) };
        let scale = g.abs().sqrt();
        signs[m] = if g > 0.0 { 1 } else { -1 };
        gamma[m] = g;
        let (pos, mom) = MODE_PAIRS[m];
        cols.set_column(pos, &(u / scale));
        cols.set_column(mom, &(v / scale));
    }
    symplectic_gram_schmidt(&mut cols);
    // Replace the Schur eigenvalues by the diagonal of the transformed form,
    // which is accurate to second order in the eigenvector error.
    let d = cols.transpose() * report.hessian * cols;
    for (m, &(pos, mom)) in MODE_PAIRS.iter().enumerate() {
        omega[m] = (signs[m] as f64 * 0.5 * (d[(pos, pos)] + d[(mom, mom)])).max(0.0);
    }
    let big_omega: [f64; MODES] = std::array::from_fn(|m| signs[m] as f64 * omega[m]);
    let omega_max = omega.iter().copied().fold(0.0, f64::max);
    let mut best = None;
    for (orientation, t) in [(Orientation::Columns, cols), (Orientation::Rows, cols.transpose())] {
        let (symp, form) = form_defects(&t, &report.hessian, &big_omega, omega_max);
        if symp <= DIAGONALIZATION_TOL && form <= DIAGONALIZATION_TOL {
            best = Some((orientation, t, symp, form));
            break;
        }
    }
    let (orientation, t, symplectic_defect, form_defect) = best.ok_or_else(|| {
        let (symp, form) = form_defects(&cols, &report.hessian, &big_omega, omega_max);
        Error::Eigen(format!(
            "symplectic diagonalization failed: symplectic defect {symp:e}, form defect {form:e}"
        ))
    })?;
    Ok(FrequencyData {
        omega,
        signs,
        big_omega,
        gamma,
        t,
        orientation,
        symplectic_defect,
        form_defect,
    })
}

/// Taylor expansion of the reduced Hamiltonian at an equilibrium to degree
/// four, in the real offsets `ξ`, with the constant and the (vanishing)
/// linear part removed.
pub fn taylor_hamiltonian(e: &EquilibriumPoint) -> Result<TruncatedSeries> {
    let charts = charts_for(e)?;
    Ok(Expansion::with_charts(e, &charts, EllipticityOptions::default())?.series)
}

/// Everything computed from one degree-four expansion at an equilibrium.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub series: TruncatedSeries,
    pub hessian: HessianReport,
    pub linear: LinearizationReport,
}

impl Expansion {
    pub fn new(e: &EquilibriumPoint, opts: EllipticityOptions) -> Result<Self> {
        Self::with_charts(e, &charts_for(e)?, opts)
    }

    pub fn with_charts(e: &EquilibriumPoint, charts: &EquilibriumCharts, opts: EllipticityOptions) -> Result<Self> {
        if charts.left.is_none() || charts.right.is_none() {
            return Err(Error::Irrotational);
        }
        let full = hamiltonian_series(e, charts, 4)?;
        let hessian = hessian_report_from_series(e, &full)?;
        if hessian.gradient > GRADIENT_TOL {
            return Err(Error::Series(format!(
                "gradient {:e} does not vanish at the equilibrium",
                hessian.gradient
            )));
        }
        let series = full.sub(&full.truncated(1));
        let linear = report_from(hessian.hessian, opts, e.kind.is_s_type())?;
        Ok(Expansion { series, hessian, linear })
    }
}

/// The substitution `Ξ = Σ U` as rows: `Ξ_i = Σ_k sigma[i][k] U_k` with
/// `U = (W1..W4, Z1..Z4)`.
pub fn complexification_matrix() -> [[Complex64; NVARS]; NVARS] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = [[Complex64::new(0.0, 0.0); NVARS]; NVARS];
    for (j, &(pos, mom)) in MODE_PAIRS.iter().enumerate() {
        s[pos][j] = Complex64::new(0.0, r);
        s[pos][MODES + j] = Complex64::new(r, 0.0);
        s[mom][j] = Complex64::new(-r, 0.0);
        s[mom][MODES + j] = Complex64::new(0.0, -r);
    }
    s
}

/// Rewrites a series in `Ξ` as a series in `(W, Z)`.
pub fn complexify(series: &TruncatedSeries) -> TruncatedSeries {
    series.linear_substitution(&complexification_matrix())
}

/// `ξ = T Σ U` in one substitution.
fn to_complex_modes(series: &TruncatedSeries, t: &Matrix8) -> TruncatedSeries {
    let sigma = complexification_matrix();
    let rows: [[Complex64; NVARS]; NVARS] = std::array::from_fn(|i| {
        std::array::from_fn(|k| (0..NVARS).map(|l| sigma[l][k] * t[(i, l)]).sum())
    });
    series.linear_substitution(&rows)
}

/// `Σ_j iΩ_j W_j Z_j`.
pub fn diagonal_h2(big_omega: &[f64; MODES], max_degree: u32) -> TruncatedSeries {
    TruncatedSeries::from_terms(
        (0..MODES).map(|j| {
            (
                Monomial::var(j).times(Monomial::var(MODES + j)),
                Complex64::new(0.0, big_omega[j]),
            )
        }),
        max_degree,
    )
}

#[derive(Clone, Debug)]
pub struct NormalFormReport {
    pub freq: FrequencyData,
    /// `H''_4 = ½ I·A I` with `I_j = i W_j Z_j`; zero unless constructed.
    pub a: Matrix4<f64>,
    pub resonances_hit: Vec<ResonanceHit>,
    pub constructed: bool,
    pub spectrum_h3: BTreeSet<Harmonic>,
    /// Empty when the construction stopped at order three.
    pub spectrum_h4: BTreeSet<Harmonic>,
    pub h4_averaged: TruncatedSeries,
    /// `|{H2, χ1} - H3| / |H3|`.
    pub homological_residual: f64,
    /// `|{H2, H''_4}| / |H''_4|`.
    pub commutator_residual: f64,
    /// Distance of the complexified quadratic part from `Σ iΩ_j W_j Z_j`,
    /// relative to `|Ω|`.
    pub h2_defect: f64,
    /// Largest reality-condition violation of the complexified H3 and H4.
    pub hermitian_defect: f64,
    /// Largest imaginary part met while reading off `A`, relative to `|A|`.
    pub a_imag: f64,
}

impl NormalFormReport {
    /// Harmonics of `Sp H3 ∪ Sp H'_4 ∖ {0}`.
    pub fn union_spectrum(&self) -> BTreeSet<Harmonic> {
        self.spectrum_h3
            .iter()
            .chain(self.spectrum_h4.iter())
            .filter(|nu| harmonic_order(nu) > 0)
            .copied()
            .collect()
    }

    /// Deterministic text form: frequencies, signs, `A` and resonances.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let f = &self.freq;
        let row = |v: &[f64]| v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ");
        writeln!(out, "constructed {}", self.constructed).unwrap();
        writeln!(out, "omega {}", row(&f.omega)).unwrap();
        writeln!(
            out,
            "signs {}",
            f.signs.iter().map(i32::to_string).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        writeln!(out, "Omega {}", row(&f.big_omega)).unwrap();
        for i in 0..MODES {
            let r: Vec<f64> = (0..MODES).map(|j| self.a[(i, j)]).collect();
            writeln!(out, "A{} {}", i + 1, row(&r)).unwrap();
        }
        for hit in &self.resonances_hit {
            let nu: Vec<String> = hit.nu.iter().map(i32::to_string).collect();
            writeln!(out, "resonance {} order {} value {:.16e}", nu.join(" "), hit.order, hit.value).unwrap();
        }
        out
    }
}

fn relative(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Reads `A` off the averaged quartic part.
fn action_matrix(h4: &TruncatedSeries) -> (Matrix4<f64>, f64) {
    let mut a = Matrix4::zeros();
    let mut imag: f64 = 0.0;
    for i in 0..MODES {
        for j in i..MODES {
            let m = Monomial::var(i)
                .times(Monomial::var(j))
                .times(Monomial::var(MODES + i))
                .times(Monomial::var(MODES + j));
            let c = h4.coeff(m);
            let v = if i == j { -2.0 * c } else { -c };
            a[(i, j)] = v.re;
            a[(j, i)] = v.re;
            imag = imag.max(v.im.abs());
        }
    }
    let scale = a.abs().max();
    (a, relative(imag, scale))
}

/// Normal form from a real degree-four expansion and a diagonalization.
pub fn birkhoff_with_frequencies(series: &TruncatedSeries, freq: FrequencyData, res_tol: f64) -> NormalFormReport {
    let omega = freq.big_omega;
    let tol = res_tol * freq.omega_norm();
    let u = to_complex_modes(series, &freq.t);
    let h2 = u.homogeneous_part(2);
    let h3 = u.homogeneous_part(3);
    let h4 = u.homogeneous_part(4);
    let h2_exact = diagonal_h2(&omega, 4);
    let h2_defect = relative(h2.sub(&h2_exact).norm_inf(), freq.omega_norm());
    let hermitian_defect = h3.hermitian_defect().max(h4.hermitian_defect());
    let spectrum_h3 = h3.spectrum();
    let mut report = NormalFormReport {
        freq,
        a: Matrix4::zeros(),
        resonances_hit: Vec::new(),
        constructed: false,
        spectrum_h3,
        spectrum_h4: BTreeSet::new(),
        h4_averaged: TruncatedSeries::zero(4),
        homological_residual: 0.0,
        commutator_residual: 0.0,
        h2_defect,
        hermitian_defect,
        a_imag: 0.0,
    };
    let chi1 = match h3.homological_solve(&omega, tol) {
        Ok(chi) => chi,
        Err(hits) => {
            report.resonances_hit = hits;
            return report;
        }
    };
    report.homological_residual = relative(h2_exact.poisson_bracket(&chi1).sub(&h3).norm_inf(), h3.norm_inf());
    let h4p = chi1.poisson_bracket(&h3).scale(0.5).add(&h4);
    report.spectrum_h4 = h4p.spectrum();
    let mut hits: Vec<ResonanceHit> = report
        .spectrum_h4
        .iter()
        .filter(|nu| harmonic_order(nu) > 0)
        .filter_map(|nu| {
            let v = omega_dot(&omega, nu);
            (v.abs() <= tol).then(|| ResonanceHit::new(*nu, v))
        })
        .collect();
    if !hits.is_empty() {
        hits.sort_by_key(|a| a.nu);
        report.resonances_hit = hits;
        return report;
    }
    let h4pp = h4p.average();
    report.commutator_residual = relative(h2_exact.poisson_bracket(&h4pp).norm_inf(), h4pp.norm_inf());
    let (a, a_imag) = action_matrix(&h4pp);
    report.a = a;
    report.a_imag = a_imag;
    report.h4_averaged = h4pp;
    report.constructed = true;
    report
}

/// Full pipeline at an equilibrium: expansion, linearization, symplectic
/// diagonalization and the order-four normal form. Order-one and order-two
/// resonances and non-elliptic points are errors; order-three and order-four
/// resonances give a report with `constructed == false`.
pub fn birkhoff_order4(e: &EquilibriumPoint, res_tol: f64) -> Result<NormalFormReport> {
    let ex = Expansion::new(e, EllipticityOptions::default())?;
    let freq = symplectic_diagonalize(&ex.linear, res_tol)?;
    Ok(birkhoff_with_frequencies(&ex.series, freq, res_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Branch, EllipsoidType};
    use crate::potential::PotentialConstants;

    fn eq(t: EllipsoidType, x: f64, y: f64) -> EquilibriumPoint {
        EquilibriumPoint::from_shape(t, x, y, Branch::PlusMinus, PotentialConstants::default()).unwrap()
    }

    #[test]
    fn complexified_oscillator() {
        // ½ s ω (B² + C²) for one mode becomes iΩ W Z.
        let omega = [1.3, -0.7, 2.1, -0.4];
        let mut terms = Vec::new();
        for (j, &(pos, mom)) in MODE_PAIRS.iter().enumerate() {
            for idx in [pos, mom] {
                let m = Monomial::var(idx).times(Monomial::var(idx));
                terms.push((m, Complex64::new(0.5 * omega[j], 0.0)));
            }
        }
        let h2 = TruncatedSeries::from_terms(terms, 4);
        let u = complexify(&h2);
        assert!(u.sub(&diagonal_h2(&omega, 4)).norm_inf() < 1e-14);
    }

    #[test]
    fn complexification_preserves_bracket() {
        // {B_j, C_j} computed through (W, Z) must be the canonical ±1.
        let sigma = complexification_matrix();
        let lin = |i: usize| {
            TruncatedSeries::from_terms((0..NVARS).map(|k| (Monomial::var(k), sigma[i][k])), 4)
        };
        let (p, q) = MODE_PAIRS[2];
        let b = lin(p);
        let c = lin(q);
        let v = b.poisson_bracket(&c).constant_term();
        assert!((v.norm() - 1.0).abs() < 1e-14, "{v}");
        assert!(lin(p).poisson_bracket(&lin(MODE_PAIRS[0].1)).is_empty());
    }

    /// Anharmonic oscillator `½(q² + p²) + a q³ + b q⁴` in mode one plus
    /// three harmonic modes: the frequency shift `ω(I) = 1 + (3b - 15a²/2) I`
    /// is classical.
    #[test]
    fn anharmonic_oscillator_shift() {
        let (a, b) = (0.1, 0.05);
        let omega = [1.0, 0.731, 0.412, 0.2718];
        let sq = |i: usize| Monomial::var(i).times(Monomial::var(i));
        let mut terms = Vec::new();
        for (j, &(q, p)) in MODE_PAIRS.iter().enumerate() {
            terms.push((sq(q), Complex64::new(0.5 * omega[j], 0.0)));
            terms.push((sq(p), Complex64::new(0.5 * omega[j], 0.0)));
        }
        terms.push((sq(0).times(Monomial::var(0)), Complex64::new(a, 0.0)));
        terms.push((sq(0).times(sq(0)), Complex64::new(b, 0.0)));
        let series = TruncatedSeries::from_terms(terms, 4);
        let freq = FrequencyData {
            omega,
            signs: [1; 4],
            big_omega: omega,
            gamma: [1.0; 4],
            t: Matrix8::identity(),
            orientation: Orientation::Columns,
            symplectic_defect: 0.0,
            form_defect: 0.0,
        };
        let nf = birkhoff_with_frequencies(&series, freq, DEFAULT_RES_TOL);
        assert!(nf.constructed);
        let expected = 3.0 * b - 7.5 * a * a;
        assert!((nf.a[(0, 0)] - expected).abs() < 1e-13, "{}", nf.a);
        assert!(nf.a.iter().enumerate().all(|(k, v)| k == 0 || v.abs() < 1e-13));
    }

    /// Same oscillators through the diagonalization, with a negative mode:
    /// `ω(-½(q² + p²)) + a q³ + b q⁴` has `A = 3b + 15a²/(2ω)`.
    #[test]
    fn anharmonic_oscillators_through_diagonalization() {
        let coeffs = [(0.1, 0.05, 1.0), (0.07, -0.02, -1.0), (0.0, 0.0, 1.0), (0.0, 0.0, -1.0)];
        let omega = [1.0, 0.731, 0.412, 0.2718];
        let sq = |i: usize| Monomial::var(i).times(Monomial::var(i));
        let mut terms = Vec::new();
        let mut hessian = Matrix8::zeros();
        for (j, &(q, p)) in MODE_PAIRS.iter().enumerate() {
            let (a, b, s) = coeffs[j];
            for i in [q, p] {
                terms.push((sq(i), Complex64::new(0.5 * s * omega[j], 0.0)));
                hessian[(i, i)] = s * omega[j];
            }
            terms.push((sq(q).times(Monomial::var(q)), Complex64::new(a, 0.0)));
            terms.push((sq(q).times(sq(q)), Complex64::new(b, 0.0)));
        }
        let series = TruncatedSeries::from_terms(terms, 4);
        let report = report_from(hessian, EllipticityOptions::default(), false).unwrap();
        let freq = symplectic_diagonalize(&report, DEFAULT_RES_TOL).unwrap();
        assert_eq!(freq.signs, [1, -1, 1, -1]);
        let nf = birkhoff_with_frequencies(&series, freq, DEFAULT_RES_TOL);
        assert!(nf.constructed);
        let expected = [3.0 * 0.05 - 7.5 * 0.01, 3.0 * -0.02 + 7.5 * 0.0049 / 0.731];
        for j in 0..2 {
            assert!((nf.a[(j, j)] - expected[j]).abs() < 1e-12, "{}", nf.a);
        }
    }

    /// Two coupled modes, `0.1 q1² q2 + 0.05 q2³ + 0.02 q1² q2²`, against an
    /// independent averaging computation in action-angle variables.
    #[test]
    fn coupled_modes_against_action_angle_averaging() {
        let omega = [1.0, 0.731, 0.412, 0.2718];
        let v = Monomial::var;
        let mut terms = Vec::new();
        for (j, &(q, p)) in MODE_PAIRS.iter().enumerate() {
            terms.push((v(q).times(v(q)), Complex64::new(0.5 * omega[j], 0.0)));
            terms.push((v(p).times(v(p)), Complex64::new(0.5 * omega[j], 0.0)));
        }
        let (q1, q2) = (MODE_PAIRS[0].0, MODE_PAIRS[1].0);
        terms.push((v(q1).times(v(q1)).times(v(q2)), Complex64::new(0.1, 0.0)));
        terms.push((v(q2).times(v(q2)).times(v(q2)), Complex64::new(0.05, 0.0)));
        terms.push((v(q1).times(v(q1)).times(v(q2)).times(v(q2)), Complex64::new(0.02, 0.0)));
        let series = TruncatedSeries::from_terms(terms, 4);
        let mut hessian = Matrix8::zeros();
        for (j, &(q, p)) in MODE_PAIRS.iter().enumerate() {
            hessian[(q, q)] = omega[j];
            hessian[(p, p)] = omega[j];
        }
        let report = report_from(hessian, EllipticityOptions::default(), false).unwrap();
        let freq = symplectic_diagonalize(&report, DEFAULT_RES_TOL).unwrap();
        let nf = birkhoff_with_frequencies(&series, freq, DEFAULT_RES_TOL);
        let a11 = -2.0 * 31984585.0 / 5066764218.0;
        let a12 = -796847141.0 / 126669105450.0;
        let a22 = -150.0 / 5848.0;
        assert!((nf.a[(0, 0)] - a11).abs() < 1e-13, "{}", nf.a);
        assert!((nf.a[(0, 1)] - a12).abs() < 1e-13, "{}", nf.a);
        assert!((nf.a[(1, 1)] - a22).abs() < 1e-13, "{}", nf.a);
    }

    #[test]
    fn resonance_hit_order() {
        let h = ResonanceHit::new([2, -1, 0, 1], 0.0);
        assert_eq!(h.order, 4);
    }

    #[test]
    fn diagonalization_invariants() {
        for (t, x, y) in [
            (EllipsoidType::S3, 0.6, 0.4),
            (EllipsoidType::I, 0.8, 0.3),
            (EllipsoidType::III, 0.6, 0.15),
        ] {
            let e = eq(t, x, y);
            let ex = Expansion::new(&e, EllipticityOptions::default()).unwrap();
            if !ex.linear.elliptic {
                continue;
            }
            let f = symplectic_diagonalize(&ex.linear, DEFAULT_RES_TOL).unwrap();
            assert!(f.symplectic_defect <= 1e-9);
            assert!(f.form_defect <= 1e-9);
            let w = ex.linear.frequencies();
            let mut mine = f.omega.to_vec();
            mine.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in w.iter().zip(&mine) {
                assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            }
        }
    }

    #[test]
    fn s_type_transformation_is_block_diagonal() {
        let e = eq(EllipsoidType::S3, 0.6, 0.4);
        let ex = Expansion::new(&e, EllipticityOptions::default()).unwrap();
        let f = symplectic_diagonalize(&ex.linear, DEFAULT_RES_TOL).unwrap();
        for i in 0..4 {
            for j in 4..8 {
                assert_eq!(f.t[(i, j)], 0.0);
                assert_eq!(f.t[(j, i)], 0.0);
            }
        }
    }

    #[test]
    fn normal_form_identities_and_gauge() {
        let e = eq(EllipsoidType::S3, 0.6, 0.4);
        let ex = Expansion::new(&e, EllipticityOptions::default()).unwrap();
        let f = symplectic_diagonalize(&ex.linear, DEFAULT_RES_TOL).unwrap();
        let nf = birkhoff_with_frequencies(&ex.series, f.clone(), DEFAULT_RES_TOL);
        assert!(nf.constructed, "{:?}", nf.resonances_hit);
        assert!(nf.homological_residual <= 1e-10);
        assert!(nf.commutator_residual <= 1e-10);
        assert!(nf.h2_defect <= 1e-9);
        assert!(nf.hermitian_defect <= 1e-9);
        let sp = nf.h4_averaged.spectrum();
        assert!(sp.iter().all(|nu| *nu == [0; 4]));
        let rotated = birkhoff_with_frequencies(&ex.series, f.with_mode_rotations([0.3, -1.1, 2.0, 0.7]), DEFAULT_RES_TOL);
        let scale = nf.a.abs().max();
        assert!((rotated.a - nf.a).abs().max() <= 1e-8 * scale);
    }

    #[test]
    fn text_form_is_stable() {
        let e = eq(EllipsoidType::S3, 0.6, 0.4);
        let a = birkhoff_order4(&e, DEFAULT_RES_TOL).unwrap().to_text();
        let b = birkhoff_order4(&e, DEFAULT_RES_TOL).unwrap().to_text();
        assert_eq!(a, b);
        assert!(a.starts_with("constructed true\nomega "));
    }
}
