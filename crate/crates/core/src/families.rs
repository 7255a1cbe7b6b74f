//! The five families of Riemann ellipsoids: existence regions, momenta and
//! the critical-point oracle of the reduced Hamiltonian.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::geometry::{MomentumPair, SemiAxes, ShapeCoords};
use crate::potential::{cn, PotentialConstants};
use crate::reduced::hamiltonian_tilde;

/// Radicands in `[-RADICAND_CLIP, 0)` are boundary roundoff and clipped to 0.
pub const RADICAND_CLIP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EllipsoidType {
    S2,
    S3,
    I,
    II,
    III,
}

impl EllipsoidType {
    pub const ALL: [EllipsoidType; 5] = [
        EllipsoidType::S2,
        EllipsoidType::S3,
        EllipsoidType::I,
        EllipsoidType::II,
        EllipsoidType::III,
    ];

    pub fn is_s_type(self) -> bool {
        matches!(self, EllipsoidType::S2 | EllipsoidType::S3)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EllipsoidType::S2 => "S2",
            EllipsoidType::S3 => "S3",
            EllipsoidType::I => "I",
            EllipsoidType::II => "II",
            EllipsoidType::III => "III",
        }
    }
}

impl fmt::Display for EllipsoidType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EllipsoidType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EllipsoidType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown ellipsoid type `{s}` (S2, S3, I, II, III)")))
    }
}

/// Which of `(mu+, mu-)` and `(mu-, mu+)` is `(m_l, m_r)`. The two branches
/// are adjoint ellipsoids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    PlusMinus,
    MinusPlus,
}

impl Branch {
    pub fn swapped(self) -> Self {
        match self {
            Branch::PlusMinus => Branch::MinusPlus,
            Branch::MinusPlus => Branch::PlusMinus,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::PlusMinus => "plus-minus",
            Branch::MinusPlus => "minus-plus",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus-minus" | "pm" | "+-" => Ok(Branch::PlusMinus),
            "minus-plus" | "mp" | "-+" => Ok(Branch::MinusPlus),
            _ => Err(Error::Config(format!("unknown branch `{s}` (plus-minus, minus-plus)"))),
        }
    }
}

/// The scalar maps that define the regions and the momenta.
pub mod functions {
    use super::*;

    fn c12(x: f64, y: f64, z: f64, k: &PotentialConstants) -> Result<(f64, f64)> {
        Ok((cn([x, y, z], 1, k)?, cn([x, y, z], 2, k)?))
    }

    /// `G^S_±(x,y,z)`; `sign = +1` or `-1`.
    pub fn gs(sign: f64, x: f64, y: f64, z: f64, k: &PotentialConstants) -> Result<f64> {
        let (c1, c2) = c12(x, y, z, k)?;
        let (x2, y2, z2) = (x * x, y * y, z * z);
        let bracket = (x * y2 * z + sign * (x2 * y2 - x2 * z2 + y2 * z2)) * c1
            + (x * z + sign * y2) * c2;
        Ok((x - sign * z).powi(4) / (x * z) * bracket)
    }

    /// `Ĝ(x,y,z)`.
    pub fn gtilde(x: f64, y: f64, z: f64, k: &PotentialConstants) -> Result<f64> {
        let (c1, c2) = c12(x, y, z, k)?;
        let (x2, y2, z2) = (x * x, y * y, z * z);
        Ok(x2 * (y2 - z2) * c1 + (y2 - 4.0 * z2) * (z2 * c1 + c2))
    }

    /// `D(x,y,z)`.
    pub fn dfun(x: f64, y: f64, z: f64) -> f64 {
        let (x2, y2, z2) = (x * x, y * y, z * z);
        x2 * (y2 - z2) + z2 * (4.0 * z2 - y2)
    }

    /// `G^R_±(x,y,z)`.
    pub fn gr(sign: f64, x: f64, y: f64, z: f64, k: &PotentialConstants) -> Result<f64> {
        let d = dfun(x, y, z);
        if d == 0.0 {
            return Err(Error::Series(format!("D({x}, {y}, {z}) vanishes")));
        }
        let (x2, y2, z2) = (x * x, y * y, z * z);
        Ok((y - sign * z).powi(4) * (x2 - (y + sign * 2.0 * z).powi(2)) * (x2 - z2) / (x2 - y2)
            * gtilde(x, y, z, k)?
            / d)
    }

    /// `sqrt` with the boundary clip; `None` when the radicand is too negative.
    pub fn clipped_sqrt(v: f64) -> Option<f64> {
        if v >= 0.0 {
            Some(v.sqrt())
        } else if v >= -RADICAND_CLIP {
            Some(0.0)
        } else {
            None
        }
    }

    /// `N_±(x,y,z) = (sqrt(G+) ± sqrt(G-)) / 2` for a pair `(G+, G-)`.
    pub fn n_from(gp: f64, gm: f64, sign: f64) -> Option<f64> {
        Some(0.5 * (clipped_sqrt(gp)? + sign * clipped_sqrt(gm)?))
    }

    /// Zero-pressure curve function `D(b1,b3,b2) C_0 + 6 b2^2 C_1 + 3 C_2`.
    pub fn zero_pressure(b: &SemiAxes, k: &PotentialConstants) -> Result<f64> {
        let [b1, b2, b3] = b.axes();
        let a = [b1, b2, b3];
        Ok(dfun(b1, b3, b2) * cn(a, 0, k)? + 6.0 * b2 * b2 * cn(a, 1, k)? + 3.0 * cn(a, 2, k)?)
    }
}

use functions::{dfun, gr, gs, gtilde, n_from};

/// Membership in the existence region of `kind`.
pub fn region_contains(kind: EllipsoidType, b: &SemiAxes, k: &PotentialConstants) -> Result<bool> {
    let [b1, b2, b3] = b.axes();
    Ok(match kind {
        EllipsoidType::S2 => gs(-1.0, b1, b2, b3, k)? >= 0.0,
        EllipsoidType::S3 => gs(1.0, b1, b3, b2, k)? >= 0.0,
        EllipsoidType::I => b1 <= 2.0 * b2 - b3,
        EllipsoidType::II => b1 >= 2.0 * b2 + b3 && dfun(b1, b3, b2) < 0.0,
        EllipsoidType::III => b1 >= b2 + 2.0 * b3 && gtilde(b1, b2, b3, k)? > 0.0,
    })
}

/// The set of shapes admitting equilibria with both momenta along axis `j`
/// (`j` = 1 or 2, 0-based): `G^S_-(b1,bj,bk) >= 0` and `G^S_+(b1,bj,bk) >= 0`.
pub fn axis_region_contains(j: usize, b: &SemiAxes, k: &PotentialConstants) -> Result<bool> {
    assert!(j == 1 || j == 2, "axis must be 1 or 2");
    let a = b.axes();
    let kk = 3 - j;
    Ok(gs(-1.0, a[0], a[j], a[kk], k)? >= 0.0 && gs(1.0, a[0], a[j], a[kk], k)? >= 0.0)
}

/// The set of shapes admitting planar equilibria in the `(i, j)` plane,
/// `i < j` (0-based), for `sign = ±1`:
/// `b_j <= ±(b_i - 2b_k)`, `D(b_i,b_j,b_k) != 0`, `G^R_∓(b_i,b_j,b_k) > 0`
/// and `G^R_±(b_j,b_i,b_k) > 0`.
pub fn pair_region_contains(sign: f64, i: usize, j: usize, b: &SemiAxes, k: &PotentialConstants) -> Result<bool> {
    assert!(i < j && j < 3, "need i < j < 3");
    let a = b.axes();
    let kk = 3 - i - j;
    let (bi, bj, bk) = (a[i], a[j], a[kk]);
    if bj > sign * (bi - 2.0 * bk) || dfun(bi, bj, bk) == 0.0 {
        return Ok(false);
    }
    Ok(gr(-sign, bi, bj, bk, k)? > 0.0 && gr(sign, bj, bi, bk, k)? > 0.0)
}

fn domain_err(kind: EllipsoidType, b: &SemiAxes, reason: impl Into<String>) -> Error {
    Error::Domain {
        kind,
        b1: b.b1(),
        b2: b.b2(),
        reason: reason.into(),
    }
}

/// `(G+, G-)` pair for one momentum component.
type RadicandPair = (f64, f64);

fn s_pair(x: f64, y: f64, z: f64, k: &PotentialConstants) -> Result<RadicandPair> {
    Ok((gs(1.0, x, y, z, k)?, gs(-1.0, x, y, z, k)?))
}

fn r_pair(x: f64, y: f64, z: f64, k: &PotentialConstants) -> Result<RadicandPair> {
    Ok((gr(1.0, x, y, z, k)?, gr(-1.0, x, y, z, k)?))
}

/// The radicand pairs of the nonzero momentum components and the axes they
/// sit on. For II and III the second component takes the opposite sign.
fn component_radicands(
    kind: EllipsoidType,
    b: &SemiAxes,
    k: &PotentialConstants,
) -> Result<Vec<(usize, RadicandPair, f64)>> {
    let [b1, b2, b3] = b.axes();
    Ok(match kind {
        EllipsoidType::S2 => vec![(1, s_pair(b1, b2, b3, k)?, 1.0)],
        EllipsoidType::S3 => vec![(2, s_pair(b1, b3, b2, k)?, 1.0)],
        EllipsoidType::I => vec![
            (0, r_pair(b1, b3, b2, k)?, 1.0),
            (2, r_pair(b3, b1, b2, k)?, 1.0),
        ],
        EllipsoidType::II => vec![
            (0, r_pair(b1, b3, b2, k)?, 1.0),
            (2, r_pair(b3, b1, b2, k)?, -1.0),
        ],
        EllipsoidType::III => vec![
            (0, r_pair(b1, b2, b3, k)?, 1.0),
            (1, r_pair(b2, b1, b3, k)?, -1.0),
        ],
    })
}

/// `mu^+` and `mu^-` for a type, without checking the region.
fn mu_pair(kind: EllipsoidType, b: &SemiAxes, k: &PotentialConstants) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let mut plus = Vector3::zeros();
    let mut minus = Vector3::zeros();
    for (axis, (gp, gm), rel) in component_radicands(kind, b, k)? {
        let bad = || domain_err(kind, b, format!("negative radicand (G+ = {gp:e}, G- = {gm:e})"));
        plus[axis] = n_from(gp, gm, rel).ok_or_else(bad)?;
        minus[axis] = n_from(gp, gm, -rel).ok_or_else(bad)?;
    }
    Ok((plus, minus))
}

/// Table of momenta: `(m_l, m_r)` for the requested branch.
pub fn momenta(
    kind: EllipsoidType,
    b: &SemiAxes,
    branch: Branch,
    k: &PotentialConstants,
) -> Result<MomentumPair> {
    if !region_contains(kind, b, k)? {
        return Err(domain_err(kind, b, "outside the existence region"));
    }
    let (plus, minus) = mu_pair(kind, b, k)?;
    Ok(match branch {
        Branch::PlusMinus => MomentumPair::new(plus, minus),
        Branch::MinusPlus => MomentumPair::new(minus, plus),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumPoint {
    pub b: SemiAxes,
    pub kind: EllipsoidType,
    pub branch: Branch,
    pub m: MomentumPair,
    /// Shape velocity; identically zero at an equilibrium.
    pub c: [f64; 2],
    pub consts: PotentialConstants,
}

impl EquilibriumPoint {
    pub fn new(kind: EllipsoidType, b: SemiAxes, branch: Branch, consts: PotentialConstants) -> Result<Self> {
        let m = momenta(kind, &b, branch, &consts)?;
        Ok(EquilibriumPoint {
            b,
            kind,
            branch,
            m,
            c: [0.0; 2],
            consts,
        })
    }

    pub fn from_shape(
        kind: EllipsoidType,
        x: f64,
        y: f64,
        branch: Branch,
        consts: PotentialConstants,
    ) -> Result<Self> {
        let b = ShapeCoords::new(x, y)?.to_semiaxes()?;
        Self::new(kind, b, branch, consts)
    }

    /// The same shape with momenta replaced, e.g. by a Z4×Z2 image.
    pub fn with_momenta(&self, m: MomentumPair) -> Self {
        EquilibriumPoint { m, ..self.clone() }
    }

    /// The adjoint ellipsoid: `m_l` and `m_r` exchanged.
    pub fn adjoint(&self) -> Self {
        EquilibriumPoint {
            m: self.m.swapped(),
            branch: self.branch.swapped(),
            ..self.clone()
        }
    }

    pub fn is_irrotational(&self) -> bool {
        let scale = self.m.m_l.norm().max(self.m.m_r.norm());
        self.m.m_l.norm() <= 1e-12 * scale || self.m.m_r.norm() <= 1e-12 * scale
    }
}

/// Finite-difference step used by the critical-point oracle.
pub const CRITICAL_FD_STEP: f64 = 1e-5;

/// `(|grad_b H~|, |m x grad_m H~|)` at a constructed equilibrium, where
/// `H~(b, m) = m.J(b)m/2 + V(b)`. The first is a central difference, the
/// second exact.
pub fn critical_point_residual(e: &EquilibriumPoint) -> Result<(f64, f64)> {
    let h = CRITICAL_FD_STEP;
    let eval = |d1: f64, d2: f64| -> Result<f64> {
        let b = SemiAxes::with_margin(e.b.b1() + d1, e.b.b2() + d2, 0.0)?;
        hamiltonian_tilde(&b, &e.m, &e.consts)
    };
    let g1 = (eval(h, 0.0)? - eval(-h, 0.0)?) / (2.0 * h);
    let g2 = (eval(0.0, h)? - eval(0.0, -h)?) / (2.0 * h);
    let grad = g1.hypot(g2);
    let mass = crate::reduced::mass_matrices(&e.b)?;
    let jm = mass.j * e.m.stacked();
    let wl = Vector3::new(jm[0], jm[1], jm[2]);
    let wr = Vector3::new(jm[3], jm[4], jm[5]);
    let torque = (e.m.m_l.cross(&wl).norm_squared() + e.m.m_r.cross(&wr).norm_squared()).sqrt();
    Ok((grad, torque))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Coparallel,
    Counterparallel,
    Irrotational,
    Planar,
}

pub fn classify_parallelism(e: &EquilibriumPoint) -> Parallelism {
    if e.is_irrotational() {
        Parallelism::Irrotational
    } else if !e.kind.is_s_type() {
        Parallelism::Planar
    } else if e.m.m_l.dot(&e.m.m_r) > 0.0 {
        Parallelism::Coparallel
    } else {
        Parallelism::Counterparallel
    }
}
