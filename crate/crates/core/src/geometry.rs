//! Shape domain, shape coordinates and the Z4×Z2 symmetry group.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Default margin kept between scanned points and the singular boundaries.
pub const DOMAIN_MARGIN: f64 = 1e-10;

/// A point `(b1, b2)` of the shape domain. The third semiaxis is always
/// recomputed as `1 / (b1 b2)` so the volume constraint cannot drift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiAxes {
    b1: f64,
    b2: f64,
}

impl SemiAxes {
    pub fn new(b1: f64, b2: f64) -> Result<Self> {
        Self::with_margin(b1, b2, DOMAIN_MARGIN)
    }

    /// Requires `b1 - b2 > margin` and `b2 - b3 > margin`.
    pub fn with_margin(b1: f64, b2: f64, margin: f64) -> Result<Self> {
        let ok = b1.is_finite()
            && b2.is_finite()
            && b1 > 0.0
            && b2 > 0.0
            && b1 - b2 > margin
            && b2 - 1.0 / (b1 * b2) > margin;
        if ok {
            Ok(SemiAxes { b1, b2 })
        } else {
            Err(Error::OutsideDomain { b1, b2 })
        }
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn b2(&self) -> f64 {
        self.b2
    }

    pub fn b3(&self) -> f64 {
        1.0 / (self.b1 * self.b2)
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.b1, self.b2, self.b3()]
    }

    pub fn to_shape_coords(&self) -> ShapeCoords {
        ShapeCoords {
            x: self.b2 / self.b1,
            y: self.b3() / self.b1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeCoords {
    pub x: f64,
    pub y: f64,
}

impl ShapeCoords {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if 0.0 < y && y < x && x < 1.0 {
            Ok(ShapeCoords { x, y })
        } else {
            Err(Error::InvalidShapeCoords { x, y })
        }
    }

    /// `b1 = (x y)^(-1/3)`, `b2 = x b1`.
    pub fn to_semiaxes(&self) -> Result<SemiAxes> {
        let b1 = (self.x * self.y).powf(-1.0 / 3.0);
        SemiAxes::new(b1, self.x * b1)
    }
}

pub fn to_shape_coords(b: &SemiAxes) -> ShapeCoords {
    b.to_shape_coords()
}

pub fn from_shape_coords(s: &ShapeCoords) -> Result<SemiAxes> {
    s.to_semiaxes()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverMatrix {
    pub index: usize,
    pub matrix: Matrix3<f64>,
}

impl CoverMatrix {
    pub fn new(index: usize) -> Self {
        let diag = match index {
            0 => [1.0, 1.0, 1.0],
            1 => [1.0, -1.0, -1.0],
            2 => [-1.0, 1.0, -1.0],
            3 => [-1.0, -1.0, 1.0],
            _ => panic!("cover matrix index {index} not in 0..4"),
        };
        CoverMatrix {
            index,
            matrix: Matrix3::from_diagonal(&Vector3::from(diag)),
        }
    }

    pub fn all() -> [CoverMatrix; 4] {
        std::array::from_fn(CoverMatrix::new)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumPair {
    pub m_l: Vector3<f64>,
    pub m_r: Vector3<f64>,
}

impl MomentumPair {
    pub fn new(m_l: Vector3<f64>, m_r: Vector3<f64>) -> Self {
        MomentumPair { m_l, m_r }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn is_zero(&self) -> bool {
        self.m_l == Vector3::zeros() && self.m_r == Vector3::zeros()
    }

    /// `(m_l, m_r)` as one 6-vector.
    pub fn stacked(&self) -> nalgebra::Vector6<f64> {
        nalgebra::Vector6::new(
            self.m_l.x, self.m_l.y, self.m_l.z, self.m_r.x, self.m_r.y, self.m_r.z,
        )
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.m_r, self.m_l)
    }

    pub fn transformed(&self, r: &Matrix3<f64>, sign: f64) -> Self {
        Self::new(r * self.m_l * sign, r * self.m_r * sign)
    }

    fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.m_l - other.m_l)
            .abs()
            .max()
            .max((self.m_r - other.m_r).abs().max())
    }
}

/// Distinct images `±R_i m`. Exact duplicates are removed; the orbit of a
/// generic pair has eight points, four or two in the symmetric cases and one
/// for the zero pair.
pub fn z4z2_orbit(m: &MomentumPair) -> Vec<MomentumPair> {
    let mut orbit: Vec<MomentumPair> = Vec::with_capacity(8);
    for r in CoverMatrix::all() {
        for sign in [1.0, -1.0] {
            let image = m.transformed(&r.matrix, sign);
            // Adding 0.0 folds -0.0 into +0.0 so sign-only duplicates match.
            let image = MomentumPair::new(image.m_l.map(|v| v + 0.0), image.m_r.map(|v| v + 0.0));
            if !orbit.contains(&image) {
                orbit.push(image);
            }
        }
    }
    orbit
}

pub fn are_equivalent(m: &MomentumPair, n: &MomentumPair, tol: f64) -> bool {
    z4z2_orbit(m).iter().any(|k| k.max_abs_diff(n) <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(l: [f64; 3], r: [f64; 3]) -> MomentumPair {
        MomentumPair::new(Vector3::from(l), Vector3::from(r))
    }

    #[test]
    fn shape_coords_of_sample() {
        let s = SemiAxes::new(1.5, 1.0).unwrap().to_shape_coords();
        assert!((s.x - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.y - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_rejected() {
        assert!(SemiAxes::new(1.2, 1.2).is_err());
        let b1: f64 = 2.0;
        assert!(SemiAxes::new(b1, b1.powf(-0.5)).is_err());
        assert!(ShapeCoords::new(1.0, 0.5).is_err());
        assert!(ShapeCoords::new(0.5, 0.5).is_err());
    }

    #[test]
    fn round_trip_half_quarter() {
        let s = ShapeCoords::new(0.5, 0.25).unwrap();
        let b = s.to_semiaxes().unwrap();
        assert!((b.b1() - 8f64.cbrt()).abs() < 1e-14);
        let back = b.to_shape_coords();
        assert!((back.x - 0.5).abs() < 1e-14 && (back.y - 0.25).abs() < 1e-14);
        assert!((b.b1() * b.b2() * b.b3() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orbit_sizes() {
        assert_eq!(z4z2_orbit(&pair([0.0, 0.0, 1.0], [0.0, 0.0, 1.0])).len(), 2);
        assert_eq!(z4z2_orbit(&pair([1.0, 2.0, 3.0], [0.5, -1.0, 2.0])).len(), 8);
        assert_eq!(z4z2_orbit(&pair([1.0, 0.0, 1.0], [1.0, 0.0, -1.0])).len(), 4);
        assert_eq!(z4z2_orbit(&MomentumPair::zero()).len(), 1);
        assert_eq!(z4z2_orbit(&pair([1.0, 0.0, 1.0], [0.0, 0.0, 0.0])).len(), 4);
    }

    #[test]
    fn equivalence() {
        let m = pair([0.3, -1.0, 2.0], [0.1, 0.5, -0.7]);
        let neg = m.transformed(&Matrix3::identity(), -1.0);
        assert!(are_equivalent(&m, &neg, 0.0));
        let r2 = m.transformed(&CoverMatrix::new(2).matrix, 1.0);
        assert!(are_equivalent(&m, &r2, 0.0));
        let a = pair([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let b = pair([0.0, 1.0, 0.0], [0.0, 1.0, 0.0]);
        assert!(!are_equivalent(&a, &b, 1e-12));
    }

    #[test]
    fn cover_matrices_are_rotations() {
        for r in CoverMatrix::all() {
            assert!((r.matrix * r.matrix.transpose() - Matrix3::identity()).norm() == 0.0);
            assert_eq!(r.matrix.determinant(), 1.0);
        }
    }

    proptest! {
        #[test]
        fn orbit_closed(l in prop::array::uniform3(-2.0f64..2.0), r in prop::array::uniform3(-2.0f64..2.0)) {
            let m = pair(l, r);
            let orbit = z4z2_orbit(&m);
            prop_assert!([8, 4, 2].contains(&orbit.len()));
            for k in &orbit {
                for c in CoverMatrix::all() {
                    for s in [1.0, -1.0] {
                        prop_assert!(are_equivalent(&m, &k.transformed(&c.matrix, s), 1e-15));
                    }
                }
            }
        }

        #[test]
        fn shape_round_trip(x in 0.01f64..0.99, t in 0.01f64..0.99) {
            let y = x * t;
            if let Ok(b) = ShapeCoords::new(x, y).unwrap().to_semiaxes() {
                let s = b.to_shape_coords();
                prop_assert!((s.x - x).abs() <= 1e-13 * x);
                prop_assert!((s.y - y).abs() <= 1e-13 * y);
            }
        }
    }
}
