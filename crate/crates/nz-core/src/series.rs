//! Truncated formal power series in `hbar^(1/2)` and `N` contraction
//! variables, the per-tetrahedron asymptotic series, and the formal Gaussian
//! integration (Wick contraction) engine.
//!
//! Grading conventions: the `hbar` exponent is stored doubled (`h2`), so
//! half-integer powers stay integer keys; variable exponents are packed four
//! bits each into a `u64` (at most 16 variables, degree at most 15 — far
//! above the `6(n-1)` needed for the loop orders computed here).

use std::collections::{BTreeMap, HashMap};

use rug::ops::CompleteRound;
use rug::{Complex, Float, Rational};

use crate::cmat::{self, CMat};
use crate::flatten::Flattening;
use crate::gluesolve::ShapeAssignment;
use crate::mpnum::{bernoulli, neg_polylog};
use crate::nzio::NzDatum;
use crate::prec::{abs, Prec};
use crate::qmat;
use crate::{Error, Result};

pub const MAX_VARS: usize = 16;
pub const MAX_DEGREE: u32 = 15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeriesBounds {
    /// Doubled hbar order bound (inclusive).
    pub h2_max: u32,
    /// Total x-degree bound (inclusive).
    pub deg_max: u32,
}

impl SeriesBounds {
    /// Default truncation for the n-loop computation: hbar order `n-1`,
    /// x-degree `6(n-1)`.
    pub fn for_loops(n: usize) -> Self {
        SeriesBounds {
            h2_max: 2 * (n as u32 - 1),
            deg_max: 6 * (n as u32 - 1),
        }
    }
}

pub fn pack_exponents(exps: &[u8]) -> u64 {
    let mut key = 0u64;
    for (i, &e) in exps.iter().enumerate() {
        debug_assert!(e <= MAX_DEGREE as u8);
        key |= (e as u64) << (4 * i);
    }
    key
}

pub fn unpack_exponents(key: u64, nvars: usize) -> Vec<u8> {
    (0..nvars).map(|i| ((key >> (4 * i)) & 0xf) as u8).collect()
}

fn packed_degree(key: u64) -> u32 {
    let mut deg = 0u32;
    let mut k = key;
    while k != 0 {
        deg += (k & 0xf) as u32;
        k >>= 4;
    }
    deg
}

/// Sparse truncated series; keys are `(doubled hbar exponent, packed
/// variable exponents)`.
#[derive(Clone, Debug)]
pub struct TruncatedSeries {
    pub nvars: usize,
    pub bounds: SeriesBounds,
    pub prec: Prec,
    pub coeffs: BTreeMap<(u32, u64), Complex>,
}

impl TruncatedSeries {
    pub fn zero(nvars: usize, bounds: SeriesBounds, prec: Prec) -> Self {
        assert!(nvars <= MAX_VARS);
        assert!(bounds.deg_max <= MAX_DEGREE);
        TruncatedSeries {
            nvars,
            bounds,
            prec,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize, bounds: SeriesBounds, prec: Prec) -> Self {
        let mut s = Self::zero(nvars, bounds, prec);
        s.coeffs.insert((0, 0), prec.one());
        s
    }

    pub fn add_term(&mut self, h2: u32, exps: &[u8], coeff: Complex) {
        let key = pack_exponents(exps);
        self.add_term_packed(h2, key, coeff);
    }

    pub fn add_term_packed(&mut self, h2: u32, key: u64, coeff: Complex) {
        if h2 > self.bounds.h2_max || packed_degree(key) > self.bounds.deg_max {
            return;
        }
        let p = self.prec.bits();
        let slot = self
            .coeffs
            .entry((h2, key))
            .or_insert_with(|| Complex::with_val(p, (0, 0)));
        *slot += coeff;
    }

    pub fn mul(&self, rhs: &TruncatedSeries) -> TruncatedSeries {
        let p = self.prec.bits();
        let mut out = TruncatedSeries::zero(self.nvars, self.bounds, self.prec);
        for ((h2a, ka), va) in &self.coeffs {
            let dega = packed_degree(*ka);
            for ((h2b, kb), vb) in &rhs.coeffs {
                let h2 = h2a + h2b;
                if h2 > self.bounds.h2_max {
                    break; // rhs map is sorted by h2 first
                }
                if dega + packed_degree(*kb) > self.bounds.deg_max {
                    continue;
                }
                out.add_term_packed(h2, ka + kb, (va * vb).complete((p, p)));
            }
        }
        out
    }

    /// Exponential of a series with no constant term whose every term has
    /// `h2 >= 1` (true for all exponent series built here, so the expansion
    /// terminates after at most `h2_max` products).
    pub fn exp(&self) -> TruncatedSeries {
        debug_assert!(self.coeffs.keys().all(|(h2, _)| *h2 >= 1));
        let mut out = TruncatedSeries::one(self.nvars, self.bounds, self.prec);
        let mut term = TruncatedSeries::one(self.nvars, self.bounds, self.prec);
        let p = self.prec.bits();
        for j in 1..=(self.bounds.h2_max.max(1) as u64 + 1) {
            term = term.mul(self);
            if term.coeffs.is_empty() {
                break;
            }
            let inv_fact = Float::with_val(p, Float::factorial(j as u32)).recip();
            for (key, v) in &term.coeffs {
                out.add_term_packed(key.0, key.1, (v * &inv_fact).complete((p, p)));
            }
        }
        out
    }

    /// Drop terms with negligible coefficients (speeds up products).
    pub fn prune(&mut self, threshold: &Float) {
        self.coeffs.retain(|_, v| abs(v) > *threshold);
    }
}

/// Exponent terms of the per-tetrahedron series in one variable `x`:
/// the sum over `n, k` with `2n + k - 2 > 0` of
/// `hbar^(n + k/2 - 1) (-x)^k B_n / (n! k!) Li_(2-n-k)(1/z)`.
pub fn tetra_exponent_terms(
    z: &Complex,
    bounds: SeriesBounds,
    prec: Prec,
) -> Result<Vec<(u32, u32, Complex)>> {
    let p = prec.bits();
    let w = z.clone().recip();
    let mut out = Vec::new();
    let n_max = bounds.h2_max / 2 + 1;
    for n in 0..=n_max {
        let bn = bernoulli(n as usize);
        if bn == 0 {
            continue;
        }
        for k in 0..=bounds.deg_max {
            if 2 * n + k <= 2 {
                continue;
            }
            let h2 = 2 * n + k - 2;
            if h2 > bounds.h2_max {
                break;
            }
            let li = neg_polylog(2 - n as i64 - k as i64, &w, prec)?;
            let mut c = li * Float::with_val(p, bn.clone());
            c /= Float::with_val(p, Float::factorial(n));
            c /= Float::with_val(p, Float::factorial(k));
            if k % 2 == 1 {
                c = -c;
            }
            out.push((h2, k, c));
        }
    }
    Ok(out)
}

/// Per-tetrahedron series (the exponential of the exponent terms) embedded
/// at variable slot `var` of an `nvars`-variable series.
pub fn tetra_series(
    z: &Complex,
    var: usize,
    nvars: usize,
    bounds: SeriesBounds,
    prec: Prec,
) -> Result<TruncatedSeries> {
    let mut expo = TruncatedSeries::zero(nvars, bounds, prec);
    let mut exps = vec![0u8; nvars];
    for (h2, k, c) in tetra_exponent_terms(z, bounds, prec)? {
        exps[var] = k as u8;
        expo.add_term(h2, &exps, c);
    }
    Ok(expo.exp())
}

/// The Hessian of the Gaussian kernel, `H = -B^(-1) A + diag(z')`, and its
/// inverse (the propagator is `hbar H^(-1)`).
pub struct Propagator {
    pub h: CMat,
    pub hinv: CMat,
}

pub fn build_hessian(datum: &NzDatum, shapes: &ShapeAssignment, prec: Prec) -> Result<Propagator> {
    let p = prec.bits();
    let n = datum.n;
    let binv_a = rational_binv_a(datum)?;
    let mut h: CMat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut e = Complex::with_val(p, (0, 0));
                    e -= Float::with_val(p, &binv_a[i][j]);
                    e
                })
                .collect()
        })
        .collect();
    for i in 0..n {
        h[i][i] += &shapes.zp[i];
    }
    let asym = cmat::asymmetry(&h);
    if asym > prec.tol() {
        return Err(Error::SymplecticViolation(format!(
            "Hessian asymmetry {} (B^-1 A not symmetric?)",
            asym.to_f64()
        )));
    }
    let hinv = cmat::lu(&h).ok_or(Error::SingularHessian)?.inverse();
    Ok(Propagator { h, hinv })
}

fn rational_binv_a(datum: &NzDatum) -> Result<Vec<Vec<Rational>>> {
    let binv = qmat::inverse_rational(&datum.b).ok_or(Error::SingularHessian)?;
    let n = datum.n;
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| &binv[i][k] * Rational::from(datum.a[k][j]))
                        .sum()
                })
                .collect()
        })
        .collect())
}

/// Memoized Isserlis/Wick contraction engine over a fixed propagator.
pub struct WickEngine<'a> {
    hinv: &'a CMat,
    nvars: usize,
    prec: u32,
    memo: HashMap<u64, Complex>,
}

impl<'a> WickEngine<'a> {
    pub fn new(hinv: &'a CMat, nvars: usize, prec: Prec) -> Self {
        WickEngine {
            hinv,
            nvars,
            prec: prec.bits(),
            memo: HashMap::new(),
        }
    }

    /// `< x^kappa >` for the packed multi-index.
    pub fn pairing_packed(&mut self, key: u64) -> Complex {
        let p = self.prec;
        if key == 0 {
            return Complex::with_val(p, (1, 0));
        }
        if packed_degree(key) % 2 == 1 {
            return Complex::with_val(p, (0, 0));
        }
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        // pair the first remaining variable slot with every other slot
        let i = (0..self.nvars)
            .find(|&i| (key >> (4 * i)) & 0xf != 0)
            .expect("nonzero key");
        let km = key - (1u64 << (4 * i));
        let mut total = Complex::with_val(p, (0, 0));
        for j in 0..self.nvars {
            let mult = (km >> (4 * j)) & 0xf;
            if mult == 0 {
                continue;
            }
            let sub = self.pairing_packed(km - (1u64 << (4 * j)));
            let mut term = (&self.hinv[i][j] * &sub).complete((p, p));
            term *= mult as u32;
            total += term;
        }
        self.memo.insert(key, total.clone());
        total
    }

    pub fn pairing(&mut self, exps: &[u8]) -> Complex {
        self.pairing_packed(pack_exponents(exps))
    }
}

/// A series in `hbar` alone, indexed by doubled exponent.
#[derive(Clone, Debug)]
pub struct HbarSeries {
    pub prec: Prec,
    /// Coefficient of `hbar^(h2/2)` at index `h2`.
    pub coeffs: Vec<Complex>,
}

impl HbarSeries {
    /// Coefficient of the integer power `hbar^k`.
    pub fn at_order(&self, k: usize) -> &Complex {
        &self.coeffs[2 * k]
    }
}

/// Formal Gaussian expectation: replace every `x`-monomial by its Wick
/// contraction against `H^(-1)`. Checks that half-integer `hbar` powers
/// cancel (they must: odd powers come with odd monomials).
pub fn gaussian_expectation(
    series: &TruncatedSeries,
    propagator: &Propagator,
) -> Result<HbarSeries> {
    let p = series.prec.bits();
    let mut engine = WickEngine::new(&propagator.hinv, series.nvars, series.prec);
    let mut acc: Vec<Complex> = (0..=series.bounds.h2_max)
        .map(|_| Complex::with_val(p, (0, 0)))
        .collect();
    let mut scale = Float::with_val(p, 0);
    for ((h2, key), v) in &series.coeffs {
        let w = engine.pairing_packed(*key);
        let contrib = (v * &w).complete((p, p));
        let sz = abs(&contrib);
        if sz > scale {
            scale = sz;
        }
        acc[*h2 as usize] += contrib;
    }
    let tol = series.prec.tol() * scale.max(&Float::with_val(p, 1));
    for (h2, c) in acc.iter().enumerate() {
        if h2 % 2 == 1 && abs(c) > tol {
            return Err(Error::HalfIntegerSurvivor(format!(
                "hbar^({h2}/2) coefficient has magnitude {}",
                abs(c).to_f64()
            )));
        }
    }
    Ok(HbarSeries {
        prec: series.prec,
        coeffs: acc,
    })
}

/// The full integrand: `exp(-(hbar^(1/2)/2) x.B^(-1)eta + (hbar/8)
/// f.B^(-1)A f) * prod_i psi(x_i; z_i)`, truncated.
pub fn integrand_series(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    bounds: SeriesBounds,
    prec: Prec,
) -> Result<TruncatedSeries> {
    let p = prec.bits();
    let n = datum.n;
    let binv = qmat::inverse_rational(&datum.b).ok_or(Error::SingularHessian)?;
    let binv_eta: Vec<Rational> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| &binv[i][j] * Rational::from(datum.eta[j]))
                .sum()
        })
        .collect();
    let binv_a = rational_binv_a(datum)?;
    let f_binv_a_f: Rational = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| &binv_a[i][j] * Rational::from(flattening.f[i] * flattening.f[j]))
                .sum::<Rational>()
        })
        .sum();

    let mut prod = TruncatedSeries::one(n, bounds, prec);
    let tiny = {
        // coefficients below this cannot affect the retained orders
        let mut t = prec.tol();
        t >>= 64u32;
        t
    };
    for i in 0..n {
        let mut expo = TruncatedSeries::zero(n, bounds, prec);
        let mut exps = vec![0u8; n];
        for (h2, k, c) in tetra_exponent_terms(&shapes.z[i], bounds, prec)? {
            exps[i] = k as u8;
            expo.add_term(h2, &exps, c);
            exps[i] = 0;
        }
        // -(hbar^(1/2)/2) (B^-1 eta)_i x_i
        exps[i] = 1;
        let mut lin = Complex::with_val(p, (0, 0));
        lin -= Float::with_val(p, &binv_eta[i]) / 2u32;
        expo.add_term(1, &exps, lin);
        prod = prod.mul(&expo.exp());
        prod.prune(&tiny);
    }
    // scalar prefactor exp( (hbar/8) f^T B^-1 A f )
    let mut scalar = TruncatedSeries::zero(n, bounds, prec);
    let mut c = Complex::with_val(p, (0, 0));
    c += Float::with_val(p, &f_binv_a_f) / 8u32;
    scalar.add_term(2, &vec![0u8; n], c);
    Ok(prod.mul(&scalar.exp()))
}

/// `log` of an hbar series with unit constant term, returned as coefficients
/// of the integer powers `hbar^1 .. hbar^kmax`.
pub fn log_hbar_series(series: &HbarSeries, kmax: usize) -> Vec<Complex> {
    let p = series.prec.bits();
    // g[k] = coefficient of hbar^k, g[0] = 1
    let g: Vec<Complex> = (0..=kmax).map(|k| series.at_order(k).clone()).collect();
    let mut u: Vec<Complex> = g.clone();
    u[0] = Complex::with_val(p, (0, 0)); // u = g - 1
    let mut log: Vec<Complex> = (0..=kmax).map(|_| Complex::with_val(p, (0, 0))).collect();
    let mut pw = u.clone();
    for j in 1..=kmax {
        let sign = if j % 2 == 1 { 1i64 } else { -1 };
        let jf = Float::with_val(p, j as u32);
        for k in 0..=kmax {
            log[k] += (&pw[k] * sign).complete((p, p)) / &jf;
        }
        // pw <- pw * u (truncated convolution, no constant terms)
        if j < kmax {
            let mut next: Vec<Complex> = (0..=kmax).map(|_| Complex::with_val(p, (0, 0))).collect();
            for a in 1..=kmax {
                for b in 1..=kmax - a {
                    let t = (&pw[a] * &u[b]).complete((p, p));
                    next[a + b] += t;
                }
            }
            pw = next;
        }
    }
    log[1..].to_vec()
}
