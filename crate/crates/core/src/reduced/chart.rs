use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::families::{EllipsoidType, EquilibriumPoint};
use crate::polyalg::Scalar;

/// Poincaré chart of the sphere of radius `rho` centred at `center`:
/// `m = R m~(q, p)` with
/// `m~ = (p s, -q s, rho - (q^2 + p^2)/2)`, `s = sqrt(rho - (q^2 + p^2)/4)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoincareChart {
    pub center: Vector3<f64>,
    pub rho: f64,
    /// Columns: the distinguished axis, `center/rho × axis`, `center/rho`.
    pub frame: Matrix3<f64>,
}

impl PoincareChart {
    /// Builds the chart whose first frame column is `axis` projected onto the
    /// plane orthogonal to `center`.
    pub fn new(center: Vector3<f64>, axis: Vector3<f64>) -> Result<Self> {
        let rho = center.norm();
        if rho == 0.0 {
            return Err(Error::Irrotational);
        }
        let f3 = center / rho;
        let proj = axis - f3 * f3.dot(&axis);
        if proj.norm() < 1e-8 * axis.norm() {
            return Err(Error::FrameConstruction {
                block: "frame",
                residual: proj.norm(),
            });
        }
        let f1 = proj.normalize();
        let f2 = f3.cross(&f1);
        Ok(PoincareChart {
            center,
            rho,
            frame: Matrix3::from_columns(&[f1, f2, f3]),
        })
    }

    /// Squared radius of the chart disk.
    pub fn limit(&self) -> f64 {
        2.0 * self.rho
    }

    pub fn check_domain(&self, q: f64, p: f64) -> Result<()> {
        if q * q + p * p < self.limit() {
            Ok(())
        } else {
            Err(Error::ChartDomain { q, p, limit: self.limit() })
        }
    }

    pub fn embed(&self, q: f64, p: f64) -> Result<Vector3<f64>> {
        self.check_domain(q, p)?;
        Ok(Vector3::from(self.embed_generic(&q, &p)?))
    }

    pub(crate) fn embed_generic<S: Scalar>(&self, q: &S, p: &S) -> Result<[S; 3]> {
        let r = q.square().plus(&p.square());
        let s = q.constant_like(self.rho).minus(&r.scaled(0.25)).root()?;
        let local = [
            p.times(&s),
            q.times(&s).scaled(-1.0),
            q.constant_like(self.rho).minus(&r.scaled(0.5)),
        ];
        Ok(std::array::from_fn(|i| {
            (0..3).fold(q.constant_like(0.0), |acc, j| {
                acc.plus(&local[j].scaled(self.frame[(i, j)]))
            })
        }))
    }
}

/// The charts of the two spheres; `None` for a vanishing momentum.
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumCharts {
    pub left: Option<PoincareChart>,
    pub right: Option<PoincareChart>,
}

/// Principal axis orthogonal to the plane of the momenta, shared by both
/// frames so that the Hessian has its minimal block structure.
pub fn distinguished_axis(kind: EllipsoidType) -> usize {
    match kind {
        EllipsoidType::S2 | EllipsoidType::S3 => 0,
        EllipsoidType::I | EllipsoidType::II => 1,
        EllipsoidType::III => 2,
    }
}

pub fn charts_for(e: &EquilibriumPoint) -> Result<EquilibriumCharts> {
    charts_with_axis(e, distinguished_axis(e.kind))
}

/// Charts with an arbitrary first frame axis. Anything other than the
/// distinguished axis breaks the Hessian block structure.
pub fn charts_with_axis(e: &EquilibriumPoint, axis: usize) -> Result<EquilibriumCharts> {
    let dir = Vector3::ith(axis, 1.0);
    let make = |m: Vector3<f64>| -> Result<Option<PoincareChart>> {
        if m.norm() == 0.0 {
            Ok(None)
        } else {
            PoincareChart::new(m, dir).map(Some)
        }
    };
    let charts = EquilibriumCharts {
        left: make(e.m.m_l)?,
        right: make(e.m.m_r)?,
    };
    if charts.left.is_none() && charts.right.is_none() {
        return Err(Error::Irrotational);
    }
    Ok(charts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chart() -> PoincareChart {
        PoincareChart::new(Vector3::new(0.3, 0.0, -1.2), Vector3::y()).unwrap()
    }

    #[test]
    fn center_and_frame() {
        let ch = chart();
        let m = ch.embed(0.0, 0.0).unwrap();
        assert!((m - ch.center).norm() < 1e-15);
        assert!((ch.frame.transpose() * ch.frame - Matrix3::identity()).norm() < 1e-15);
        assert!((ch.frame.determinant() - 1.0).abs() < 1e-15);
        assert!((ch.frame.column(2) - ch.center / ch.rho).norm() < 1e-15);
        assert!(ch.frame.column(0).dot(&ch.center).abs() < 1e-15);
    }

    #[test]
    fn outside_disk_rejected() {
        let ch = chart();
        let r = ch.limit().sqrt();
        assert!(matches!(ch.embed(r, 0.0), Err(Error::ChartDomain { .. })));
    }

    #[test]
    fn axis_along_momentum_fails() {
        let r = PoincareChart::new(Vector3::new(0.0, 0.0, 2.0), Vector3::z());
        assert!(matches!(r, Err(Error::FrameConstruction { .. })));
    }

    /// Pullback of `-m.(ω × ω')` to the chart, by finite differences: with
    /// `m_q = ∂m/∂q`, `m_p = ∂m/∂p`, tangent vectors `m_q = m × ω` and
    /// `m_p = m × ω'` give `-m.(ω × ω') = -(m_q × m_p).m / rho^2`, which must
    /// equal the coefficient of `dp ∧ dq` on `(∂q, ∂p)`, namely `-1`.
    fn pulled_back_form(ch: &PoincareChart, q: f64, p: f64) -> f64 {
        let h = 1e-6;
        let mq = (ch.embed(q + h, p).unwrap() - ch.embed(q - h, p).unwrap()) / (2.0 * h);
        let mp = (ch.embed(q, p + h).unwrap() - ch.embed(q, p - h).unwrap()) / (2.0 * h);
        let m = ch.embed(q, p).unwrap();
        -(mq.cross(&mp)).dot(&m) / (ch.rho * ch.rho)
    }

    #[test]
    fn symplectic_at_center() {
        assert!((pulled_back_form(&chart(), 0.0, 0.0) + 1.0).abs() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn norm_preserved(q in -1.0f64..1.0, p in -1.0f64..1.0) {
            let ch = chart();
            if q * q + p * p < ch.limit() {
                let m = ch.embed(q, p).unwrap();
                prop_assert!((m.norm() - ch.rho).abs() <= 1e-13 * ch.rho);
            }
        }

        #[test]
        fn symplectic_everywhere(q in -1.0f64..1.0, p in -1.0f64..1.0) {
            let ch = chart();
            if q * q + p * p < 0.9 * ch.limit() {
                prop_assert!((pulled_back_form(&ch, q, p) + 1.0).abs() < 1e-7);
            }
        }
    }
}
