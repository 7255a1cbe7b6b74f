//! Convexity taxonomy of the quartic normal form `½ I·A I` and KAM
//! nondegeneracy.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::families::EquilibriumPoint;
use crate::normalform::{birkhoff_order4, NormalFormReport};

/// Default number of sample angles on the asymptotic ellipse.
pub const DEFAULT_N_THETA: usize = 101;

/// Default tolerance, relative to the spectral norm of `A`.
pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

/// Entries of `I⁺(θ)` below this fraction of `|I⁺|` carry no sign.
pub const SIGN_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassTag {
    NotElliptic,
    /// Normal form obstructed by a resonance of the given order.
    Resonant(u32),
    Convex,
    QuasiConvex,
    DirectionallyQuasiConvex,
    Indeterminate,
}

impl ClassTag {
    pub fn is_dqc_or_stronger(self) -> bool {
        matches!(
            self,
            ClassTag::Convex | ClassTag::QuasiConvex | ClassTag::DirectionallyQuasiConvex
        )
    }
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassTag::NotElliptic => f.write_str("NotElliptic"),
            ClassTag::Resonant(k) => write!(f, "Resonant{k}"),
            ClassTag::Convex => f.write_str("Convex"),
            ClassTag::QuasiConvex => f.write_str("QuasiConvex"),
            ClassTag::DirectionallyQuasiConvex => f.write_str("DirectionallyQuasiConvex"),
            ClassTag::Indeterminate => f.write_str("Indeterminate"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityClass {
    pub tag: ClassTag,
    pub kam_nondegenerate: bool,
    /// `(α, β)` pairs for which Nekhoroshev estimates hold.
    pub nekhoroshev_exponents: Vec<(f64, f64)>,
    pub det_a: f64,
    /// Eigenvalues of the restriction `Ã`, when computed.
    pub restricted_eigenvalues: Option<[f64; 3]>,
    pub diagnostic: Option<String>,
}

impl StabilityClass {
    fn bare(tag: ClassTag) -> Self {
        StabilityClass {
            tag,
            kam_nondegenerate: false,
            nekhoroshev_exponents: Vec::new(),
            det_a: 0.0,
            restricted_eigenvalues: None,
            diagnostic: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    pub tol: f64,
    pub n_theta: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            tol: DEFAULT_CLASSIFY_TOL,
            n_theta: DEFAULT_N_THETA,
        }
    }
}

pub fn nekhoroshev_exponents(tag: ClassTag) -> Vec<(f64, f64)> {
    match tag {
        ClassTag::DirectionallyQuasiConvex => vec![(0.25, 0.25)],
        ClassTag::QuasiConvex | ClassTag::Convex => vec![(0.25, 0.25), (1.0, 1.0 / 16.0)],
        _ => Vec::new(),
    }
}

fn spectral_norm(a: &Matrix4<f64>) -> f64 {
    a.symmetric_eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `det A` by LU and as the product of eigenvalues.
pub fn determinants(a: &Matrix4<f64>) -> (f64, f64) {
    (a.lu().determinant(), a.symmetric_eigenvalues().iter().product())
}

/// `|det A| > tol |A|^4`.
pub fn kam_check_matrix(a: &Matrix4<f64>, tol: f64) -> bool {
    let norm = spectral_norm(a);
    norm > 0.0 && determinants(a).0.abs() > tol * norm.powi(4)
}

pub fn kam_check(nf: &NormalFormReport, tol: f64) -> bool {
    nf.constructed && kam_check_matrix(&nf.a, tol)
}

/// Orthogonal matrix whose first row is `Ω/|Ω|` (a reflection, or its
/// negative, chosen for stability).
pub fn omega_frame(omega: &Vector4<f64>) -> Matrix4<f64> {
    let n = omega / omega.norm();
    let e1 = Vector4::x();
    let (w, sign) = if n[0] <= 0.0 { (n - e1, 1.0) } else { (n + e1, -1.0) };
    let h = Matrix4::identity() - w * w.transpose() * (2.0 / w.norm_squared());
    h * sign
}

/// Unit vector on the asymptotic cone `α1 x1² = |α2| x2² + |α3| x3²`.
pub fn asymptotic_direction(alpha: &[f64; 3], theta: f64) -> Vector3<f64> {
    let (a1, a2, a3) = (alpha[0], alpha[1].abs(), alpha[2].abs());
    let (s, c) = theta.sin_cos();
    Vector3::new(
        (a2 / (a1 + a2) * c * c + a3 / (a1 + a3) * s * s).sqrt(),
        (a1 / (a1 + a2)).sqrt() * c,
        (a1 / (a1 + a3)).sqrt() * s,
    )
}

fn mixed_signs(v: &Vector4<f64>) -> bool {
    let thr = SIGN_THRESHOLD * v.norm();
    v.iter().any(|&x| x > thr) && v.iter().any(|&x| x < -thr)
}

/// Classifies the quadratic form `A` relative to the frequency vector `Ω`.
pub fn classify_matrix(a: &Matrix4<f64>, omega: &[f64; 4], opts: ClassifyOptions) -> StabilityClass {
    let norm = spectral_norm(a);
    let tol = opts.tol * norm;
    let mut class = StabilityClass::bare(ClassTag::Indeterminate);
    class.det_a = determinants(a).0;
    class.kam_nondegenerate = kam_check_matrix(a, opts.tol);
    let finish = |mut class: StabilityClass, tag: ClassTag| {
        class.tag = tag;
        class.nekhoroshev_exponents = nekhoroshev_exponents(tag);
        class
    };
    if norm == 0.0 {
        class.diagnostic = Some("A vanishes".into());
        return class;
    }
    let eig = a.symmetric_eigenvalues();
    if eig.iter().all(|&l| l > tol) || eig.iter().all(|&l| l < -tol) {
        return finish(class, ClassTag::Convex);
    }
    let r = omega_frame(&Vector4::from_column_slice(omega));
    let ra = r * a * r.transpose();
    let at = Matrix3::from_fn(|i, j| 0.5 * (ra[(i + 1, j + 1)] + ra[(j + 1, i + 1)]));
    let se = at.symmetric_eigen();
    let alpha: [f64; 3] = std::array::from_fn(|i| se.eigenvalues[i]);
    class.restricted_eigenvalues = Some(alpha);
    if alpha.iter().all(|&l| l > tol) || alpha.iter().all(|&l| l < -tol) {
        return finish(class, ClassTag::QuasiConvex);
    }
    if alpha.iter().any(|l| l.abs() <= tol) {
        class.diagnostic = Some(format!("restricted form is degenerate: {alpha:?}"));
        return class;
    }
    // Orient so that exactly one eigenvalue is positive and put it first.
    let positives = alpha.iter().filter(|&&l| l > 0.0).count();
    let flip = if positives == 1 { 1.0 } else { -1.0 };
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&i, &j| (flip * alpha[j]).total_cmp(&(flip * alpha[i])));
    let oriented: [f64; 3] = std::array::from_fn(|k| flip * alpha[order[k]]);
    let s = Matrix3::from_fn(|i, k| se.eigenvectors[(i, order[k])]);
    let rt = r.transpose();
    for k in 0..opts.n_theta {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / (opts.n_theta - 1).max(1) as f64;
        let y = s * asymptotic_direction(&oriented, theta);
        let i_plus = rt * Vector4::new(0.0, y[0], y[1], y[2]);
        if !mixed_signs(&i_plus) {
            class.diagnostic = Some(format!("directional test fails at theta = {theta:.6}"));
            return class;
        }
    }
    finish(class, ClassTag::DirectionallyQuasiConvex)
}

pub fn classify_normal_form(nf: &NormalFormReport, opts: ClassifyOptions) -> StabilityClass {
    if !nf.constructed {
        let order = nf.resonances_hit.iter().map(|h| h.order).min().unwrap_or(0);
        return StabilityClass::bare(ClassTag::Resonant(order));
    }
    classify_matrix(&nf.a, &nf.freq.big_omega, opts)
}

/// Full pipeline at an equilibrium. Non-elliptic points and low-order
/// resonances map to their tags; other numerical failures are errors.
pub fn classify_equilibrium(
    e: &EquilibriumPoint,
    res_tol: f64,
    opts: ClassifyOptions,
) -> Result<(StabilityClass, Option<NormalFormReport>)> {
    match birkhoff_order4(e, res_tol) {
        Ok(nf) => Ok((classify_normal_form(&nf, opts), Some(nf))),
        Err(Error::NotElliptic) => Ok((StabilityClass::bare(ClassTag::NotElliptic), None)),
        Err(Error::Resonance(hit)) => Ok((StabilityClass::bare(ClassTag::Resonant(hit.order)), None)),
        Err(err) => Err(err),
    }
}
