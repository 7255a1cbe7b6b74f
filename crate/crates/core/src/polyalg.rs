//! Sparse truncated power series in eight variables with complex coefficients.
//!
//! The same container serves two roles. In real Taylor expansions the eight
//! variables are the chart offsets `(b1, b2, c1, c2, q1, q2, p1, p2)`; after
//! complexification they are `(W1..W4, Z1..Z4)`, where `W` are coordinates
//! and `Z` the conjugate momenta. Harmonics, spectra, averages and the Poisson
//! bracket always use the second reading.
//!
//! Series are stored densely over the 495 monomials of degree at most four,
//! with precomputed product and derivative tables, since every series met in
//! the normal-form pipeline is nearly full.

use std::collections::BTreeSet;
use std::sync::LazyLock;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::normalform::ResonanceHit;

pub const NVARS: usize = 8;
pub const MODES: usize = 4;
pub const DEFAULT_MAX_DEGREE: u32 = 4;

/// Largest supported truncation degree.
pub const DEGREE_CAP: u32 = 4;

/// Harmonics below this fraction of the series norm do not enter the spectrum.
pub const SPECTRUM_REL_TOL: f64 = 1e-10;

const BITS: u32 = 4;
const NIBBLE: u32 = 0xF;

/// Integer frequency vector `nu = j - k` of a monomial `W^j Z^k`.
pub type Harmonic = [i32; MODES];

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Monomial(u32);

impl Monomial {
    pub const ONE: Monomial = Monomial(0);

    pub fn var(i: usize) -> Self {
        assert!(i < NVARS);
        Monomial(1 << (BITS * i as u32))
    }

    pub fn from_exponents(exps: &[u32; NVARS]) -> Self {
        let mut packed = 0u32;
        for (i, &e) in exps.iter().enumerate() {
            assert!(e <= NIBBLE, "exponent {e} does not fit in four bits");
            packed |= e << (BITS * i as u32);
        }
        Monomial(packed)
    }

    pub fn exponent(self, i: usize) -> u32 {
        (self.0 >> (BITS * i as u32)) & NIBBLE
    }

    pub fn exponents(self) -> [u32; NVARS] {
        std::array::from_fn(|i| self.exponent(i))
    }

    pub fn degree(self) -> u32 {
        let x = self.0;
        let pairs = (x & 0x0F0F_0F0F) + ((x >> 4) & 0x0F0F_0F0F);
        pairs.wrapping_mul(0x0101_0101) >> 24
    }

    /// Product of two monomials. Total degrees stay at most `DEGREE_CAP`,
    /// which rules out carries between nibbles.
    pub fn times(self, other: Monomial) -> Monomial {
        debug_assert!(self.degree() + other.degree() <= NIBBLE);
        Monomial(self.0 + other.0)
    }

    /// `d/dx_i` of the monomial as (multiplicity, remaining monomial).
    fn differentiate(self, i: usize) -> Option<(u32, Monomial)> {
        let e = self.exponent(i);
        (e > 0).then(|| (e, Monomial(self.0 - (1 << (BITS * i as u32)))))
    }

    /// `nu = j - k` for `W^j Z^k`.
    pub fn harmonic(self) -> Harmonic {
        std::array::from_fn(|l| self.exponent(l) as i32 - self.exponent(l + MODES) as i32)
    }

    /// Exchanges the exponents of `W_l` and `Z_l` for every mode.
    pub fn swap_conjugates(self) -> Monomial {
        let low = self.0 & 0xFFFF;
        let high = self.0 >> 16;
        Monomial((low << 16) | high)
    }
}

impl std::fmt::Debug for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.exponents())
    }
}

/// Order `|nu| = sum |nu_l|` of an integer vector.
pub fn harmonic_order(nu: &Harmonic) -> u32 {
    nu.iter().map(|v| v.unsigned_abs()).sum()
}

pub fn omega_dot(omega: &[f64; MODES], nu: &Harmonic) -> f64 {
    omega.iter().zip(nu).map(|(w, &n)| w * n as f64).sum()
}

/// Index tables for the dense layout: every monomial of degree at most
/// `DEGREE_CAP`, sorted by degree and then by packed exponents, so that the
/// monomials of degree `<= d` form a prefix.
struct Tables {
    monos: Vec<Monomial>,
    degree: Vec<u32>,
    harmonic: Vec<Harmonic>,
    /// `prefix[d]` = number of monomials of degree `<= d`.
    prefix: [usize; DEGREE_CAP as usize + 1],
    /// Base-5 code of the exponents to position.
    lookup: Vec<u16>,
    /// `product[i][j]` = position of `monos[i] * monos[j]` for
    /// `j < prefix[DEGREE_CAP - degree(i)]`.
    product: Vec<Vec<u16>>,
    /// `derivative[v][i]` = (exponent of variable `v`, position of the
    /// monomial divided by `x_v`).
    derivative: Vec<Vec<(u8, u16)>>,
    /// Position of the monomial with all `W_l` and `Z_l` exponents exchanged.
    swapped: Vec<u16>,
}

fn base5(m: Monomial) -> usize {
    (0..NVARS).fold(0, |acc, i| acc * 5 + m.exponent(i) as usize)
}

static TABLES: LazyLock<Tables> = LazyLock::new(|| {
    let mut monos = Vec::new();
    let mut stack = vec![(0usize, [0u32; NVARS], 0u32)];
    while let Some((var, exps, deg)) = stack.pop() {
        if var == NVARS {
            monos.push(Monomial::from_exponents(&exps));
            continue;
        }
        for e in 0..=(DEGREE_CAP - deg) {
            let mut next = exps;
            next[var] = e;
            stack.push((var + 1, next, deg + e));
        }
    }
    monos.sort_by_key(|m| (m.degree(), m.0));
    let degree: Vec<u32> = monos.iter().map(|m| m.degree()).collect();
    let harmonic = monos.iter().map(|m| m.harmonic()).collect();
    let mut prefix = [0; DEGREE_CAP as usize + 1];
    for (d, p) in prefix.iter_mut().enumerate() {
        *p = degree.iter().filter(|&&x| x as usize <= d).count();
    }
    let mut lookup = vec![u16::MAX; 5usize.pow(NVARS as u32)];
    for (i, &m) in monos.iter().enumerate() {
        lookup[base5(m)] = i as u16;
    }
    let pos = |m: Monomial| lookup[base5(m)];
    let product = monos
        .iter()
        .map(|&a| {
            let limit = prefix[(DEGREE_CAP - a.degree()) as usize];
            monos[..limit].iter().map(|&b| pos(a.times(b))).collect()
        })
        .collect();
    let derivative = (0..NVARS)
        .map(|v| {
            monos
                .iter()
                .map(|m| match m.differentiate(v) {
                    Some((e, rest)) => (e as u8, pos(rest)),
                    None => (0, 0),
                })
                .collect()
        })
        .collect();
    let swapped = monos.iter().map(|m| pos(m.swap_conjugates())).collect();
    Tables {
        monos,
        degree,
        harmonic,
        prefix,
        lookup,
        product,
        derivative,
        swapped,
    }
});

fn position(m: Monomial) -> usize {
    let t = &*TABLES;
    t.lookup[base5(m)] as usize
}

/// Truncated power series stored densely over all monomials of degree
/// `<= max_degree`; zero entries are simply absent terms.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    coeffs: Vec<Complex64>,
    max_degree: u32,
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

impl TruncatedSeries {
    pub fn zero(max_degree: u32) -> Self {
        assert!(max_degree <= DEGREE_CAP, "series degree is capped at {DEGREE_CAP}");
        TruncatedSeries {
            coeffs: vec![ZERO; TABLES.prefix[max_degree as usize]],
            max_degree,
        }
    }

    pub fn constant(c: impl Into<Complex64>, max_degree: u32) -> Self {
        Self::monomial(Monomial::ONE, c, max_degree)
    }

    pub fn var(i: usize, max_degree: u32) -> Self {
        Self::monomial(Monomial::var(i), 1.0, max_degree)
    }

    pub fn monomial(m: Monomial, c: impl Into<Complex64>, max_degree: u32) -> Self {
        let mut s = Self::zero(max_degree);
        if m.degree() <= max_degree {
            s.coeffs[position(m)] = c.into();
        }
        s
    }

    /// Builds a series from `(monomial, coefficient)` pairs, summing repeats
    /// and dropping monomials above `max_degree`.
    pub fn from_terms<I>(terms: I, max_degree: u32) -> Self
    where
        I: IntoIterator<Item = (Monomial, Complex64)>,
    {
        let mut s = Self::zero(max_degree);
        for (m, c) in terms {
            if m.degree() <= max_degree {
                s.coeffs[position(m)] += c;
            }
        }
        s
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.coeffs.iter().filter(|c| **c != ZERO).count()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Nonzero terms in canonical (degree, exponent) order.
    pub fn terms(&self) -> impl Iterator<Item = (Monomial, Complex64)> + '_ {
        let monos = &TABLES.monos;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(move |(i, &c)| (monos[i], c))
    }

    pub fn coeff(&self, m: Monomial) -> Complex64 {
        if m.degree() > self.max_degree {
            return ZERO;
        }
        self.coeffs[position(m)]
    }

    pub fn constant_term(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn with_max_degree(&self, max_degree: u32) -> Self {
        let mut s = Self::zero(max_degree);
        let n = s.coeffs.len().min(self.coeffs.len());
        s.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        s
    }

    fn filtered(&self, keep: impl Fn(usize) -> bool) -> Self {
        let mut s = self.clone();
        for (i, c) in s.coeffs.iter_mut().enumerate() {
            if !keep(i) {
                *c = ZERO;
            }
        }
        s
    }

    pub fn homogeneous_part(&self, degree: u32) -> Self {
        let t = &*TABLES;
        self.filtered(|i| t.degree[i] == degree)
    }

    /// Terms of degree `<= degree`, keeping the current `max_degree`.
    pub fn truncated(&self, degree: u32) -> Self {
        let t = &*TABLES;
        self.filtered(|i| t.degree[i] <= degree)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut s = self.with_max_degree(self.max_degree.min(other.max_degree));
        for (a, b) in s.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        s
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut s = self.with_max_degree(self.max_degree.min(other.max_degree));
        for (a, b) in s.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        s
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        let mut s = self.clone();
        s.coeffs.iter_mut().for_each(|v| *v *= c);
        s
    }

    pub fn add_constant(&self, c: impl Into<Complex64>) -> Self {
        let mut s = self.clone();
        s.coeffs[0] += c.into();
        s
    }

    pub fn mul(&self, other: &Self) -> Self {
        let t = &*TABLES;
        let max_degree = self.max_degree.min(other.max_degree);
        let mut out = Self::zero(max_degree);
        let n = out.coeffs.len();
        for (i, &a) in self.coeffs[..n.min(self.coeffs.len())].iter().enumerate() {
            if a == ZERO {
                continue;
            }
            let limit = t.prefix[(max_degree - t.degree[i]) as usize].min(other.coeffs.len());
            let row = &t.product[i];
            for (j, &b) in other.coeffs[..limit].iter().enumerate() {
                if b != ZERO {
                    out.coeffs[row[j] as usize] += a * b;
                }
            }
        }
        out
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::constant(1.0, self.max_degree);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn derivative(&self, var: usize) -> Self {
        let t = &*TABLES;
        let mut s = Self::zero(self.max_degree);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let (e, rest) = t.derivative[var][i];
            if e > 0 && c != ZERO {
                s.coeffs[rest as usize] = c * e as f64;
            }
        }
        s
    }

    /// Evaluates `sum_k coeffs[k] * (f - f0)^k`, i.e. composes a univariate
    /// Taylor expansion about the constant term `f0` with this series.
    fn compose_about_constant(&self, coeffs: &[Complex64]) -> Self {
        let g = self.add_constant(-self.constant_term());
        let mut out = Self::zero(self.max_degree);
        let mut power = Self::constant(1.0, self.max_degree);
        for (k, &ck) in coeffs.iter().enumerate() {
            if k > 0 {
                power = power.mul(&g);
            }
            if power.is_empty() {
                break;
            }
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += ck * p;
            }
        }
        out
    }

    /// Binomial-series square root. The constant term must be positive real.
    pub fn sqrt_series(&self) -> Result<Self> {
        let f0 = self.constant_term();
        if f0.im.abs() > 1e-14 * f0.norm() || f0.re <= 0.0 {
            return Err(Error::Series(format!(
                "square root needs a positive constant term, got {f0}"
            )));
        }
        let f0 = f0.re;
        let mut coeffs = Vec::with_capacity(self.max_degree as usize + 1);
        let mut binom = 1.0;
        for k in 0..=self.max_degree {
            if k > 0 {
                binom *= (0.5 - (k - 1) as f64) / k as f64;
            }
            coeffs.push(Complex64::new(binom * f0.powf(0.5 - k as f64), 0.0));
        }
        Ok(self.compose_about_constant(&coeffs))
    }

    pub fn recip_series(&self) -> Result<Self> {
        let f0 = self.constant_term();
        if f0.norm() == 0.0 {
            return Err(Error::Series("reciprocal of a series with zero constant term".into()));
        }
        let inv = f0.inv();
        let coeffs: Vec<Complex64> = (0..=self.max_degree)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                inv.powu(k + 1) * sign
            })
            .collect();
        Ok(self.compose_about_constant(&coeffs))
    }

    /// `{f, g} = sum_l df/dZ_l dg/dW_l - dg/dZ_l df/dW_l`.
    pub fn poisson_bracket(&self, other: &Self) -> Self {
        let max_degree = self.max_degree.min(other.max_degree);
        let mut out = Self::zero(max_degree);
        for l in 0..MODES {
            let fz = self.derivative(l + MODES);
            let gw = other.derivative(l);
            let gz = other.derivative(l + MODES);
            let fw = self.derivative(l);
            let plus = fz.mul(&gw);
            let minus = gz.mul(&fw);
            for ((o, a), b) in out.coeffs.iter_mut().zip(&plus.coeffs).zip(&minus.coeffs) {
                *o += a - b;
            }
        }
        out
    }

    pub fn harmonic(&self, nu: &Harmonic) -> Self {
        let t = &*TABLES;
        self.filtered(|i| &t.harmonic[i] == nu)
    }

    pub fn average(&self) -> Self {
        self.harmonic(&[0; MODES])
    }

    /// Harmonics whose largest coefficient exceeds `rel_tol * |f|_inf`.
    pub fn spectrum_with_tol(&self, rel_tol: f64) -> BTreeSet<Harmonic> {
        let t = &*TABLES;
        let cut = rel_tol * self.norm_inf();
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > cut)
            .map(|(i, _)| t.harmonic[i])
            .collect()
    }

    pub fn spectrum(&self) -> BTreeSet<Harmonic> {
        self.spectrum_with_tol(SPECTRUM_REL_TOL)
    }

    /// Solves `{H2, chi} = f - <f>_0` for `H2 = sum_j i Omega_j Z_j W_j`.
    ///
    /// Harmonics in the spectrum with `|Omega.nu| <= res_tol` are reported as
    /// resonances. Terms below the spectrum threshold are numerical noise; they
    /// are divided out when the divisor is safe and discarded otherwise.
    pub fn homological_solve(
        &self,
        omega: &[f64; MODES],
        res_tol: f64,
    ) -> std::result::Result<Self, Vec<ResonanceHit>> {
        let t = &*TABLES;
        let mut hits: Vec<ResonanceHit> = self
            .spectrum()
            .iter()
            .filter(|nu| harmonic_order(nu) > 0)
            .filter_map(|nu| {
                let value = omega_dot(omega, nu);
                (value.abs() <= res_tol).then(|| ResonanceHit::new(*nu, value))
            })
            .collect();
        if !hits.is_empty() {
            hits.sort_by_key(|a| a.nu);
            return Err(hits);
        }
        let mut chi = Self::zero(self.max_degree);
        for (i, &c) in self.coeffs.iter().enumerate() {
            let nu = &t.harmonic[i];
            if c == ZERO || harmonic_order(nu) == 0 {
                continue;
            }
            let value = omega_dot(omega, nu);
            if value.abs() > res_tol {
                chi.coeffs[i] = c / Complex64::new(0.0, value);
            }
        }
        Ok(chi)
    }

    pub fn eval(&self, point: &[Complex64; NVARS]) -> Complex64 {
        self.terms()
            .map(|(m, c)| {
                let e = m.exponents();
                (0..NVARS).fold(c, |acc, i| acc * point[i].powu(e[i]))
            })
            .sum()
    }

    pub fn eval_real(&self, point: &[f64; NVARS]) -> Complex64 {
        self.eval(&point.map(|x| Complex64::new(x, 0.0)))
    }

    /// Substitutes every variable by a linear form: `x_i -> sum_k rows[i][k] y_k`.
    pub fn linear_substitution(&self, rows: &[[Complex64; NVARS]; NVARS]) -> Self {
        let t = &*TABLES;
        let d = self.max_degree;
        let forms: Vec<Self> = rows
            .iter()
            .map(|row| {
                let mut f = Self::zero(d);
                for (k, &c) in row.iter().enumerate() {
                    if d >= 1 {
                        f.coeffs[position(Monomial::var(k))] = c;
                    }
                }
                f
            })
            .collect();
        // Images in table order: each monomial is a lower one times a variable.
        let n = self.coeffs.len();
        let mut images: Vec<Self> = Vec::with_capacity(n);
        let mut out = Self::zero(d);
        for i in 0..n {
            let image = if i == 0 {
                Self::constant(1.0, d)
            } else {
                let v = (0..NVARS).find(|&v| t.derivative[v][i].0 > 0).expect("non-constant");
                let rest = t.derivative[v][i].1 as usize;
                images[rest].mul(&forms[v])
            };
            let c = self.coeffs[i];
            if c != ZERO {
                for (o, x) in out.coeffs.iter_mut().zip(&image.coeffs) {
                    *o += c * x;
                }
            }
            images.push(image);
        }
        out
    }

    /// Largest violation of the reality condition `f_kj = i^(|j|+|k|) conj(f_jk)`
    /// relative to `|f|_inf`. Real functions of `(W, Z)` satisfy it exactly.
    pub fn hermitian_defect(&self) -> f64 {
        let t = &*TABLES;
        let norm = self.norm_inf();
        if norm == 0.0 {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for (i, &c) in self.coeffs.iter().enumerate() {
            let mirror = self.coeffs[t.swapped[i] as usize];
            let phase = Complex64::i().powu(t.degree[i]);
            worst = worst.max((mirror - phase * c.conj()).norm());
        }
        worst / norm
    }

    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Deterministic text form: one line per term, sorted by degree then
    /// exponents, coefficients with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<(u32, [u32; NVARS], Complex64)> = self
            .terms()
            .map(|(m, c)| (m.degree(), m.exponents(), c))
            .collect();
        rows.sort_by_key(|a| (a.0, a.1));
        let mut out = String::new();
        writeln!(out, "# max_degree {}", self.max_degree).unwrap();
        for (_, e, c) in rows {
            let exps: Vec<String> = e.iter().map(u32::to_string).collect();
            writeln!(out, "{} {:+.16e} {:+.16e}", exps.join(" "), c.re, c.im).unwrap();
        }
        out
    }
}

/// Minimal ring interface shared by plain numbers and truncated series, so the
/// Hamiltonian is written once and evaluated either pointwise or as a Taylor
/// expansion.
pub trait Scalar: Clone {
    fn constant_like(&self, c: f64) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn scaled(&self, c: f64) -> Self;
    fn inverse(&self) -> Result<Self>;
    fn root(&self) -> Result<Self>;

    fn square(&self) -> Self {
        self.times(self)
    }
}

impl Scalar for f64 {
    fn constant_like(&self, c: f64) -> Self {
        c
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn times(&self, other: &Self) -> Self {
        self * other
    }
    fn scaled(&self, c: f64) -> Self {
        self * c
    }
    fn inverse(&self) -> Result<Self> {
        if *self == 0.0 {
            return Err(Error::Series("division by zero".into()));
        }
        Ok(1.0 / self)
    }
    fn root(&self) -> Result<Self> {
        if *self < 0.0 {
            return Err(Error::Series(format!("square root of {self}")));
        }
        Ok(self.sqrt())
    }
}

impl Scalar for TruncatedSeries {
    fn constant_like(&self, c: f64) -> Self {
        TruncatedSeries::constant(c, self.max_degree)
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn minus(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn times(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scaled(&self, c: f64) -> Self {
        self.scale(c)
    }
    fn inverse(&self) -> Result<Self> {
        self.recip_series()
    }
    fn root(&self) -> Result<Self> {
        self.sqrt_series()
    }
}
