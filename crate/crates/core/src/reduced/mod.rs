//! The reduced Hamiltonian on `B × R^2 × S^2 × S^2` in Poincaré charts.
//!
//! Coordinates are ordered `ξ = (b1, b2, c1, c2, q1, q2, p1, p2)`: shape
//! offsets from the equilibrium, shape momenta, and one chart `(q, p)` on each
//! momentum sphere, `(q1, p1)` for `m_l` and `(q2, p2)` for `m_r`. Hamilton's
//! equations read `ξ' = J8 ∇H` with `J8 = diag[J4, J4]`, `J4 = [[0, I], [-I, 0]]`.

mod chart;
mod integrate;
mod linear;

pub use chart::{charts_for, charts_with_axis, distinguished_axis, EquilibriumCharts, PoincareChart};
pub use integrate::{integrate_reduced_flow, FlowDiagnostics, FlowOptions};
pub use linear::{
    hessian_at_equilibrium, hessian_with_charts, linearize, linearize_with, symplectic_matrix,
    EllipticityOptions, HessianReport, LinearizationReport, Matrix8, BLOCK_TOL, ELLIPTIC_TOL,
};
pub(crate) use linear::{hessian_report_from_series, report_from, schur_eigenvalues};

use nalgebra::{Matrix2, Matrix3, Matrix6, Vector3};
use crate::error::{Error, Result};
use crate::families::EquilibriumPoint;
use crate::geometry::{MomentumPair, SemiAxes};
use crate::polyalg::{Scalar, TruncatedSeries};
use crate::potential::{potential_at, potential_derivatives, PotentialConstants};

/// Pairs of semiaxes closer than this (in `|b_i^2 - b_j^2|`) are singular.
pub const SINGULAR_GAP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct MassMatrices {
    pub k: Matrix2<f64>,
    pub j1: Matrix3<f64>,
    pub j2: Matrix3<f64>,
    pub j: Matrix6<f64>,
}

/// Entries of `K`, `J1` and `J2` for any scalar type.
struct MassEntries<S> {
    k11: S,
    k12: S,
    k22: S,
    j1: [S; 3],
    j2: [S; 3],
}

fn mass_entries<S: Scalar>(b1: &S, b2: &S) -> Result<MassEntries<S>> {
    let b3 = b1.times(b2).inverse()?;
    let s1 = b1.square();
    let s2 = b2.square();
    let s3 = b3.square();
    let den = s2.times(&s3).plus(&s1.times(&s3)).plus(&s1.times(&s2)).inverse()?;
    let k11 = s1.times(&s2.plus(&s3)).times(&den);
    let k12 = b3.times(&den).scaled(-1.0);
    let k22 = s2.times(&s1.plus(&s3)).times(&den);
    // (i, j, k) with axis i paired with the difference of the other two.
    let pairs = [(&s2, &s3, b2, &b3), (&s1, &s3, b1, &b3), (&s1, &s2, b1, b2)];
    let mut j1 = Vec::with_capacity(3);
    let mut j2 = Vec::with_capacity(3);
    for (sa, sb, ba, bb) in pairs {
        let inv = sa.minus(sb).square().inverse()?;
        j1.push(sa.plus(sb).times(&inv));
        j2.push(ba.times(bb).scaled(2.0).times(&inv));
    }
    let to3 = |v: Vec<S>| -> [S; 3] { v.try_into().unwrap_or_else(|_| unreachable!()) };
    Ok(MassEntries {
        k11,
        k12,
        k22,
        j1: to3(j1),
        j2: to3(j2),
    })
}

fn check_gaps(a: [f64; 3]) -> Result<()> {
    let s = a.map(|v| v * v);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let gap = (s[i] - s[j]).abs();
        if gap < SINGULAR_GAP {
            return Err(Error::Singular { gap });
        }
    }
    Ok(())
}

pub fn mass_matrices(b: &SemiAxes) -> Result<MassMatrices> {
    mass_matrices_at(b.b1(), b.b2())
}

fn mass_matrices_at(b1: f64, b2: f64) -> Result<MassMatrices> {
    check_gaps([b1, b2, 1.0 / (b1 * b2)])?;
    let e = mass_entries(&b1, &b2)?;
    let k = Matrix2::new(e.k11, e.k12, e.k12, e.k22);
    let j1 = Matrix3::from_diagonal(&Vector3::from(e.j1));
    let j2 = Matrix3::from_diagonal(&Vector3::from(e.j2));
    let mut j = Matrix6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&j1);
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&j1);
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&j2);
    j.fixed_view_mut::<3, 3>(3, 0).copy_from(&j2);
    Ok(MassMatrices { k, j1, j2, j })
}

/// `H~(b, m) = m.J(b)m / 2 + V(b)`, the shape-momentum-free part of the
/// reduced Hamiltonian whose critical points are the equilibria.
pub fn hamiltonian_tilde(b: &SemiAxes, m: &MomentumPair, k: &PotentialConstants) -> Result<f64> {
    let mass = mass_matrices(b)?;
    let v = m.stacked();
    Ok(0.5 * v.dot(&(mass.j * v)) + potential_at(b.axes(), k)?)
}

/// `c.K c / 2 + M.J M / 2` for any scalar type; `m` holds `(m_l, m_r)`.
///
/// The `J` part is summed as `(m_l + m_r)^2 / (b_i - b_j)^2` plus
/// `(m_l - m_r)^2 / (b_i + b_j)^2`, which avoids the cancellation between the
/// `J1` and `J2` terms when two semiaxes are close.
fn kinetic<S: Scalar>(b1: &S, b2: &S, c: [&S; 2], m: &[S; 6]) -> Result<S> {
    let e = mass_entries(b1, b2)?;
    let b3 = b1.times(b2).inverse()?;
    let [c1, c2] = c;
    let mut t = e
        .k11
        .times(&c1.square())
        .plus(&e.k12.times(&c1.times(c2)).scaled(2.0))
        .plus(&e.k22.times(&c2.square()));
    let pairs = [(b2, &b3), (b1, &b3), (b1, b2)];
    for (a, (ba, bb)) in pairs.into_iter().enumerate() {
        let (ml, mr) = (&m[a], &m[a + 3]);
        let sum = ml.plus(mr).square().times(&ba.minus(bb).square().inverse()?);
        let diff = ml.minus(mr).square().times(&ba.plus(bb).square().inverse()?);
        t = t.plus(&sum.plus(&diff).scaled(0.5));
    }
    Ok(t.scaled(0.5))
}

/// Evaluates `H - V` at chart coordinates given as scalars of any type, where
/// `b*` is added to the shape offsets.
fn kinetic_in_charts<S: Scalar>(b_star: &SemiAxes, xi: &[S; 8], charts: &EquilibriumCharts) -> Result<S> {
    let b1 = xi[0].plus(&xi[0].constant_like(b_star.b1()));
    let b2 = xi[1].plus(&xi[1].constant_like(b_star.b2()));
    let zero = xi[0].constant_like(0.0);
    let left = match &charts.left {
        Some(ch) => ch.embed_generic(&xi[4], &xi[6])?,
        None => [zero.clone(), zero.clone(), zero.clone()],
    };
    let right = match &charts.right {
        Some(ch) => ch.embed_generic(&xi[5], &xi[7])?,
        None => [zero.clone(), zero.clone(), zero.clone()],
    };
    let [l0, l1, l2] = left;
    let [r0, r1, r2] = right;
    kinetic(&b1, &b2, [&xi[2], &xi[3]], &[l0, l1, l2, r0, r1, r2])
}

/// `H(b* + δb, c, q, p)` in the charts of an equilibrium.
pub fn reduced_hamiltonian(e: &EquilibriumPoint, xi: &[f64; 8]) -> Result<f64> {
    let charts = charts_for(e)?;
    reduced_hamiltonian_with(e, &charts, xi)
}

pub fn reduced_hamiltonian_with(e: &EquilibriumPoint, charts: &EquilibriumCharts, xi: &[f64; 8]) -> Result<f64> {
    for (q, p, ch) in [(xi[4], xi[6], &charts.left), (xi[5], xi[7], &charts.right)] {
        if let Some(ch) = ch {
            ch.check_domain(q, p)?;
        }
    }
    let b1 = e.b.b1() + xi[0];
    let b2 = e.b.b2() + xi[1];
    let a = [b1, b2, 1.0 / (b1 * b2)];
    check_gaps(a)?;
    Ok(kinetic_in_charts(&e.b, xi, charts)? + potential_at(a, &e.consts)?)
}

/// Taylor series of `H` about `ξ0` (relative to the equilibrium), in the
/// offsets `ξ - ξ0`, truncated at `max_degree <= 4`.
pub fn hamiltonian_series_at(
    e: &EquilibriumPoint,
    charts: &EquilibriumCharts,
    xi0: &[f64; 8],
    max_degree: u32,
) -> Result<TruncatedSeries> {
    let center = SemiAxes::with_margin(e.b.b1() + xi0[0], e.b.b2() + xi0[1], 0.0)?;
    check_gaps(center.axes())?;
    let vars: [TruncatedSeries; 8] =
        std::array::from_fn(|i| TruncatedSeries::var(i, max_degree).add_constant(xi0[i]));
    let kin = kinetic_in_charts(&e.b, &vars, charts)?;
    let jet = potential_derivatives(&center, max_degree, &e.consts)?;
    Ok(kin.add(&jet.to_series(0, 1, max_degree)))
}

pub fn hamiltonian_series(e: &EquilibriumPoint, charts: &EquilibriumCharts, max_degree: u32) -> Result<TruncatedSeries> {
    hamiltonian_series_at(e, charts, &[0.0; 8], max_degree)
}

/// Gradient of `H` at `ξ` from a degree-one expansion.
pub fn hamiltonian_gradient(e: &EquilibriumPoint, charts: &EquilibriumCharts, xi: &[f64; 8]) -> Result<[f64; 8]> {
    let s = hamiltonian_series_at(e, charts, xi, 1)?;
    Ok(std::array::from_fn(|i| {
        s.coeff(crate::polyalg::Monomial::var(i)).re
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Branch, EllipsoidType};
    use crate::geometry::ShapeCoords;
    use proptest::prelude::*;

    fn k1() -> PotentialConstants {
        PotentialConstants::default()
    }

    #[test]
    fn mass_matrix_properties() {
        let b = SemiAxes::new(1.7, 1.1).unwrap();
        let m = mass_matrices(&b).unwrap();
        assert!(m.k.determinant() > 0.0 && m.k[(0, 0)] > 0.0);
        for i in 0..3 {
            assert!(m.j1[(i, i)] > 0.0 && m.j2[(i, i)] > 0.0);
        }
        assert_eq!(m.j, m.j.transpose());
        let [b1, b2, b3] = b.axes();
        let den = b2 * b2 * b3 * b3 + b1 * b1 * b3 * b3 + b1 * b1 * b2 * b2;
        assert!((m.k[(0, 1)] + b3 / den).abs() < 1e-15);
        let expect = (b1 * b1 + b2 * b2) / (b1 * b1 - b2 * b2).powi(2);
        assert!((m.j1[(2, 2)] - expect).abs() < 1e-14 * expect);
    }

    #[test]
    fn coincident_axes_singular() {
        let b = SemiAxes::with_margin(1.2 + 1e-12, 1.2, 0.0).unwrap();
        assert!(matches!(mass_matrices(&b), Err(Error::Singular { .. })));
    }

    #[test]
    fn value_at_origin() {
        let e = EquilibriumPoint::from_shape(EllipsoidType::I, 0.8, 0.3, Branch::PlusMinus, k1()).unwrap();
        let h = reduced_hamiltonian(&e, &[0.0; 8]).unwrap();
        let t = hamiltonian_tilde(&e.b, &e.m, &e.consts).unwrap();
        assert!((h - t).abs() <= 1e-14 * t.abs());
    }

    #[test]
    fn six_dimensional_variant() {
        let e = EquilibriumPoint::from_shape(EllipsoidType::S3, 0.6, 0.4, Branch::PlusMinus, k1()).unwrap();
        let irr = e.with_momenta(MomentumPair::new(e.m.m_l, Vector3::zeros()));
        let xi = [0.01, -0.02, 0.1, 0.2, 0.05, 0.3, -0.04, 0.7];
        let h = reduced_hamiltonian(&irr, &xi).unwrap();
        let charts = charts_for(&irr).unwrap();
        assert!(charts.right.is_none());
        let m_l = charts.left.as_ref().unwrap().embed(xi[4], xi[6]).unwrap();
        let b = SemiAxes::with_margin(e.b.b1() + xi[0], e.b.b2() + xi[1], 0.0).unwrap();
        let mass = mass_matrices(&b).unwrap();
        let c = nalgebra::Vector2::new(xi[2], xi[3]);
        let expect = 0.5 * c.dot(&(mass.k * c))
            + 0.5 * m_l.dot(&(mass.j1 * m_l))
            + potential_at(b.axes(), &k1()).unwrap();
        assert!((h - expect).abs() <= 1e-13 * expect.abs());
    }

    #[test]
    fn gradient_vanishes_at_equilibria() {
        for (t, x, y) in [
            (EllipsoidType::S2, 0.55, 0.5),
            (EllipsoidType::S3, 0.6, 0.4),
            (EllipsoidType::I, 0.8, 0.3),
            (EllipsoidType::II, 0.3, 0.1),
            (EllipsoidType::III, 0.6, 0.15),
        ] {
            let e = EquilibriumPoint::from_shape(t, x, y, Branch::PlusMinus, k1()).unwrap();
            let charts = charts_for(&e).unwrap();
            let g = hamiltonian_gradient(&e, &charts, &[0.0; 8]).unwrap();
            let scale = reduced_hamiltonian(&e, &[0.0; 8]).unwrap().abs();
            assert!(g.iter().all(|v| v.abs() <= 1e-9 * scale), "{t}: {g:?}");
        }
    }

    #[test]
    fn series_matches_pointwise_value() {
        let e = EquilibriumPoint::from_shape(EllipsoidType::III, 0.6, 0.15, Branch::PlusMinus, k1()).unwrap();
        let charts = charts_for(&e).unwrap();
        let s = hamiltonian_series(&e, &charts, 4).unwrap();
        let xi = [1e-3, -2e-3, 3e-3, 1e-3, -2e-3, 2e-3, 1e-3, -1e-3];
        let exact = reduced_hamiltonian(&e, &xi).unwrap();
        let approx = s.eval_real(&xi).re;
        // Fifth-order remainder at |ξ| ~ 3e-3.
        assert!((exact - approx).abs() <= 1e-11 * exact.abs().max(1.0), "{exact} vs {approx}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn k_positive_definite(x in 0.02f64..0.98, t in 0.02f64..0.98) {
            if let Ok(b) = ShapeCoords::new(x, x * t).unwrap().to_semiaxes() {
                if let Ok(m) = mass_matrices(&b) {
                    prop_assert!(m.k[(0, 0)] > 0.0 && m.k.determinant() > 0.0);
                }
            }
        }
    }
}
