//! Self-gravitational potential of a homogeneous ellipsoid and its Taylor jet.
//!
//! Every quantity here is an instance of the index integral
//!
//! ```text
//! I(a; p, n) = 2 pi g ∫_0^∞ s^n Π_k (s + a_k^2)^(-p_k - 1/2) ds,
//! ```
//!
//! with `V = -I(a; 0, 0)` and `C_n = I(a; (1,1,1), n)`. Derivatives of `V` are
//! obtained by expanding each factor `(s + (a_k + δ)^2)^(-1/2)` in `δ`, which
//! only shifts the indices `p_k`, so no finite differences are involved.
//!
//! The overall energy scale is fixed by taking the mass and the moment
//! constant to be one; only `g` is exposed. All outputs are linear in `g`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::LazyLock;

use num_complex::Complex64;
use parking_lot::RwLock;

use crate::error::{Error, Result};
use crate::geometry::SemiAxes;
use crate::polyalg::TruncatedSeries;

const QUAD_REL_TOL: f64 = 1e-13;
const QUAD_ABS_TOL: f64 = 1e-300;
const MAX_INTERVALS: usize = 4000;
const CACHE_CAP: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialConstants {
    g: f64,
}

impl PotentialConstants {
    pub fn new(g: f64) -> Result<Self> {
        if g > 0.0 && g.is_finite() {
            Ok(PotentialConstants { g })
        } else {
            Err(Error::Config(format!("gravitational constant must be positive, got {g}")))
        }
    }

    pub fn g(&self) -> f64 {
        self.g
    }
}

impl Default for PotentialConstants {
    fn default() -> Self {
        PotentialConstants { g: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IntegralIndex {
    pub p: [u32; 3],
    pub n: u32,
}

impl IntegralIndex {
    pub fn new(p: [u32; 3], n: u32) -> Self {
        IntegralIndex { p, n }
    }

    fn converges(&self) -> bool {
        self.p.iter().sum::<u32>() >= self.n
    }
}

// Kronrod 15 nodes on [-1, 1] (non-negative half) and weights; the Gauss 7
// rule uses the odd-indexed nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature on a finite interval.
pub fn adaptive_quadrature<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    let (v, e) = gauss_kronrod(&f, lo, hi);
    let mut intervals = vec![(lo, hi, v, e)];
    let mut total = v;
    let mut error = e;
    while error > abs_tol.max(rel_tol * total.abs()) {
        if intervals.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature {
                achieved: error / total.abs().max(f64::MIN_POSITIVE),
                requested: rel_tol,
            });
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .map(|(i, _)| i)
            .expect("non-empty");
        let (a, b, v, e) = intervals.swap_remove(worst);
        let mid = 0.5 * (a + b);
        let (v1, e1) = gauss_kronrod(&f, a, mid);
        let (v2, e2) = gauss_kronrod(&f, mid, b);
        total += v1 + v2 - v;
        error += e1 + e2 - e;
        intervals.push((a, mid, v1, e1));
        intervals.push((mid, b, v2, e2));
    }
    // Re-sum to remove drift from the running updates.
    Ok(intervals.iter().map(|iv| iv.2).sum())
}

/// `∫_0^∞ s^n Π_k (s + a_k^2)^(-p_k - 1/2) ds` without the `2 pi g` factor.
///
/// With `c = min a_k^2`, `d_k = a_k^2 - c` and `u = (s + c)^(-1/2)` the
/// integral becomes
/// `2 ∫_0^{1/√c} (1 - c u^2)^n u^(2(Σp - n)) Π_k (1 + d_k u^2)^(-p_k - 1/2) du`,
/// whose integrand is smooth on the closed interval.
fn raw_integral(a: [f64; 3], idx: IntegralIndex) -> Result<f64> {
    let sq = a.map(|v| v * v);
    let c = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let d = sq.map(|v| v - c);
    let power = 2 * (idx.p.iter().sum::<u32>() - idx.n) as i32;
    let f = |u: f64| {
        let u2 = u * u;
        let mut v = 2.0 * (1.0 - c * u2).powi(idx.n as i32) * u.powi(power);
        for k in 0..3 {
            let w = 1.0 + d[k] * u2;
            v /= w.powi(idx.p[k] as i32) * w.sqrt();
        }
        v
    };
    adaptive_quadrature(f, 0.0, c.sqrt().recip(), QUAD_REL_TOL, QUAD_ABS_TOL)
}

type CacheKey = ([u64; 3], [u32; 3], u32);

static CACHE: LazyLock<RwLock<HashMap<CacheKey, f64>>> =
    LazyLock::new(|| RwLock::new(HashMap::new()));

/// The integrand is symmetric under simultaneous permutation of `(a_k, p_k)`,
/// so the cache key is sorted.
fn cache_key(a: [f64; 3], idx: IntegralIndex) -> CacheKey {
    let mut pairs: [(u64, u32); 3] = std::array::from_fn(|k| (a[k].to_bits(), idx.p[k]));
    pairs.sort_unstable();
    (pairs.map(|x| x.0), pairs.map(|x| x.1), idx.n)
}

fn cached_raw_integral(a: [f64; 3], idx: IntegralIndex) -> Result<f64> {
    let key = cache_key(a, idx);
    if let Some(&v) = CACHE.read().get(&key) {
        return Ok(v);
    }
    // Evaluate on the canonical ordering so the cached value does not depend
    // on which permutation populated it.
    let canonical_a = key.0.map(f64::from_bits);
    let v = raw_integral(canonical_a, IntegralIndex::new(key.1, idx.n))?;
    let mut cache = CACHE.write();
    if cache.len() >= CACHE_CAP {
        cache.clear();
    }
    cache.insert(key, v);
    Ok(v)
}

pub fn index_integral(a: [f64; 3], idx: IntegralIndex, k: &PotentialConstants) -> Result<f64> {
    assert!(a.iter().all(|&v| v > 0.0 && v.is_finite()), "semiaxes must be positive: {a:?}");
    assert!(idx.converges(), "divergent index integral {idx:?}");
    Ok(2.0 * PI * k.g * cached_raw_integral(a, idx)?)
}

/// `C_n(x, y, z)`, each factor raised to `-3/2`.
pub fn cn(a: [f64; 3], n: u32, k: &PotentialConstants) -> Result<f64> {
    assert!(n <= 2, "C_n is defined for n = 0, 1, 2");
    index_integral(a, IntegralIndex::new([1, 1, 1], n), k)
}

/// `V` at arbitrary positive semiaxes.
pub fn potential_at(a: [f64; 3], k: &PotentialConstants) -> Result<f64> {
    Ok(-index_integral(a, IntegralIndex::new([0, 0, 0], 0), k)?)
}

pub fn potential_v(b: &SemiAxes, k: &PotentialConstants) -> Result<f64> {
    potential_at(b.axes(), k)
}

/// Carlson's symmetric integral `R_F(x, y, z)` by the duplication theorem.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    let (mut x, mut y, mut z) = (x, y, z);
    loop {
        let mu = (x + y + z) / 3.0;
        let dx = 1.0 - x / mu;
        let dy = 1.0 - y / mu;
        let dz = 1.0 - z / mu;
        if dx.abs().max(dy.abs()).max(dz.abs()) < 1e-4 {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 - e2 / 10.0 + e3 / 14.0 + e2 * e2 / 24.0 - 3.0 * e2 * e3 / 44.0)
                / mu.sqrt();
        }
        let lambda = x.sqrt() * y.sqrt() + y.sqrt() * z.sqrt() + z.sqrt() * x.sqrt();
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
    }
}

/// Incomplete elliptic integral of the first kind `F(phi | k)`, `0 <= phi <= pi/2`.
pub fn elliptic_f(phi: f64, k: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    s * carlson_rf(c * c, 1.0 - k * k * s * s, 1.0)
}

/// Closed form `V = -4 pi g F(arccos(b3/b1) | k) / sqrt(b1^2 - b3^2)` with
/// `k^2 = (b1^2 - b2^2) / (b1^2 - b3^2)`.
pub fn potential_v_elliptic(b: &SemiAxes, k: &PotentialConstants) -> f64 {
    let [b1, b2, b3] = b.axes();
    let span = b1 * b1 - b3 * b3;
    let modulus = ((b1 * b1 - b2 * b2) / span).sqrt();
    -4.0 * PI * k.g * elliptic_f((b3 / b1).acos(), modulus) / span.sqrt()
}

/// Taylor jet of `V(b1 + δ1, b2 + δ2)` about a point of the shape domain.
#[derive(Clone, Debug)]
pub struct PotentialJet {
    pub center: SemiAxes,
    pub max_order: u32,
    /// `coeffs[i][j]` multiplies `δ1^i δ2^j`.
    pub coeffs: Vec<Vec<f64>>,
}

impl PotentialJet {
    pub fn value(&self) -> f64 {
        self.coeffs[0][0]
    }

    /// `∂^(i+j) V / ∂b1^i ∂b2^j`.
    pub fn derivative(&self, i: u32, j: u32) -> f64 {
        assert!(i + j <= self.max_order);
        self.coeffs[i as usize][j as usize] * factorial(i) * factorial(j)
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.derivative(1, 0), self.derivative(0, 1)]
    }

    /// The jet as a series in two variables, placed at positions `v1`, `v2`.
    pub fn to_series(&self, v1: usize, v2: usize, max_degree: u32) -> TruncatedSeries {
        let mut out = TruncatedSeries::zero(max_degree);
        let x1 = TruncatedSeries::var(v1, max_degree);
        let x2 = TruncatedSeries::var(v2, max_degree);
        for i in 0..=self.max_order.min(max_degree) {
            for j in 0..=(self.max_order.min(max_degree) - i) {
                let c = self.coeffs[i as usize][j as usize];
                if c != 0.0 {
                    out = out.add(&x1.pow(i).mul(&x2.pow(j)).scale(c));
                }
            }
        }
        out
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn binomial(top: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (top - i as f64) / (i + 1) as f64)
}

/// Coefficients of `δ^n` in `(s + (a + δ)^2)^(-1/2)` as a combination of
/// `(s + a^2)^(-1/2 - m)`: returns `(m, weight)` pairs.
fn shift_coefficients(a: f64, n: u32) -> Vec<(u32, f64)> {
    (n.div_ceil(2)..=n)
        .map(|m| {
            let w = binomial(-0.5, m) * binomial(m as f64, n - m) * (2.0 * a).powi((2 * m - n) as i32);
            (m, w)
        })
        .collect()
}

/// Taylor coefficients of `V` in the offsets of the three semiaxes, as a
/// degree-`max_order` series in variables 0, 1, 2.
fn axes_jet(a: [f64; 3], max_order: u32, k: &PotentialConstants) -> Result<TruncatedSeries> {
    let mut terms = Vec::new();
    for i in 0..=max_order {
        for j in 0..=(max_order - i) {
            for l in 0..=(max_order - i - j) {
                let mut c = 0.0;
                for &(m1, w1) in &shift_coefficients(a[0], i) {
                    for &(m2, w2) in &shift_coefficients(a[1], j) {
                        for &(m3, w3) in &shift_coefficients(a[2], l) {
                            let idx = IntegralIndex::new([m1, m2, m3], 0);
                            c -= w1 * w2 * w3 * index_integral(a, idx, k)?;
                        }
                    }
                }
                let m = crate::polyalg::Monomial::from_exponents(&[i, j, l, 0, 0, 0, 0, 0]);
                terms.push((m, Complex64::new(c, 0.0)));
            }
        }
    }
    Ok(TruncatedSeries::from_terms(terms, max_order))
}

/// Derivatives of `V` with respect to `(b1, b2)` up to `max_order <= 4`,
/// with `b3 = 1/(b1 b2)` followed through the chain rule.
pub fn potential_derivatives(
    b: &SemiAxes,
    max_order: u32,
    k: &PotentialConstants,
) -> Result<PotentialJet> {
    assert!(max_order <= 4, "derivatives are provided up to order four");
    let a = b.axes();
    let jet3 = axes_jet(a, max_order, k)?;
    let d = max_order;
    let db1 = TruncatedSeries::var(0, d);
    let db2 = TruncatedSeries::var(1, d);
    let inv1 = db1.add_constant(a[0]).recip_series()?;
    let inv2 = db2.add_constant(a[1]).recip_series()?;
    let db3 = inv1.mul(&inv2).add_constant(-a[2]);
    // Variables 0, 1 stay; variable 2 becomes the series db3.
    let mut composed = TruncatedSeries::zero(d);
    let mut powers = vec![TruncatedSeries::constant(1.0, d)];
    for n in 1..=d {
        let next = powers[n as usize - 1].mul(&db3);
        powers.push(next);
    }
    for (m, c) in jet3.terms() {
        let e = m.exponents();
        let term = db1
            .pow(e[0])
            .mul(&db2.pow(e[1]))
            .mul(&powers[e[2] as usize])
            .scale(c);
        composed = composed.add(&term);
    }
    let mut coeffs = vec![vec![0.0; d as usize + 1]; d as usize + 1];
    for (m, c) in composed.terms() {
        let e = m.exponents();
        coeffs[e[0] as usize][e[1] as usize] = c.re;
    }
    Ok(PotentialJet {
        center: *b,
        max_order: d,
        coeffs,
    })
}
