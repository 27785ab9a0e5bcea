//! Special functions: Bernoulli numbers, negative polylogarithms as exact
//! rational functions, the principal dilogarithm, and the Bloch-Wigner
//! function.

use std::sync::Mutex;
use std::sync::OnceLock;

use rug::ops::CompleteRound;
use rug::{Complex, Float, Integer, Rational};

use crate::prec::{abs, Prec};
use crate::{Error, Result};

/// Bernoulli number `B_n` in the `B_1 = +1/2` convention.
///
/// Everything downstream (the quantum-dilogarithm expansion coefficients and
/// the vertex factors built from them) uses this sign convention.
pub fn bernoulli(n: usize) -> Rational {
    let b = bernoulli_minus(n);
    if n == 1 {
        -b
    } else {
        b
    }
}

/// `B_n` with `B_1 = -1/2` (the convention of the defining recurrence
/// `sum_k C(n+1,k) B_k = 0`).
pub fn bernoulli_minus(n: usize) -> Rational {
    static CACHE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(vec![Rational::from(1)]));
    let mut cache = cache.lock().unwrap();
    while cache.len() <= n {
        let m = cache.len();
        // B_m = -1/(m+1) * sum_{k<m} C(m+1, k) B_k
        let mut acc = Rational::new();
        for (k, b) in cache.iter().enumerate() {
            acc += b * Rational::from(Integer::from(m as u32 + 1).binomial(k as u32));
        }
        acc /= -Rational::from(m as i64 + 1);
        cache.push(acc);
    }
    cache[n].clone()
}

/// Numerator polynomial of `Li_{-k}(w) = P_k(w) / (1-w)^{k+1}` for `k >= 0`.
fn neg_polylog_poly(k: usize) -> Vec<Integer> {
    static CACHE: OnceLock<Mutex<Vec<Vec<Integer>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(vec![vec![Integer::new(), Integer::from(1)]]));
    let mut cache = cache.lock().unwrap();
    while cache.len() <= k {
        let p = cache.last().unwrap().clone();
        let j = cache.len(); // building P_j from P_{j-1}
                             // P_j = w * ((1-w) P'_{j-1} + j * P_{j-1})
        let deg = p.len() - 1;
        let mut q = vec![Integer::new(); deg + 2];
        for (d, c) in p.iter().enumerate() {
            if d > 0 {
                q[d - 1] += Integer::from(d as u32) * c; // P'
                q[d] -= Integer::from(d as u32) * c; // -w P'
            }
            q[d] += Integer::from(j as u32) * c; // j P
        }
        let mut shifted = vec![Integer::new()];
        shifted.extend(q);
        while shifted.len() > 1 && *shifted.last().unwrap() == 0 {
            shifted.pop();
        }
        cache.push(shifted);
    }
    cache[k].clone()
}

/// Polylogarithm `Li_m(w)` for integer `m <= 1`.
///
/// `Li_1(w) = -log(1-w)` on the principal branch; for `m <= 0` the value is
/// the rational function `P_{-m}(w)/(1-w)^{1-m}` with integer coefficients.
pub fn neg_polylog(m: i64, w: &Complex, prec: Prec) -> Result<Complex> {
    let p = prec.bits();
    let one_minus = (1i64 - w).complete((p, p));
    if m == 1 {
        return Ok(-one_minus.ln());
    }
    assert!(m <= 1, "neg_polylog requires m <= 1, got {m}");
    if abs(&one_minus) < prec.tol() {
        return Err(Error::PoleAtOne);
    }
    let k = (-m) as usize;
    let poly = neg_polylog_poly(k);
    // Horner
    let mut num = Complex::with_val(p, (0, 0));
    for c in poly.iter().rev() {
        num *= w;
        num += c;
    }
    let mut den = Complex::with_val(p, (1, 0));
    for _ in 0..=k {
        den *= &one_minus;
    }
    Ok(num / den)
}

/// Principal-branch dilogarithm `Li_2(w)` (branch cut on `[1, oo)`).
pub fn dilog(w: &Complex, prec: Prec) -> Complex {
    let work = prec.bits() + 64;
    let v = dilog_work(&Complex::with_val(work, w), work);
    Complex::with_val(prec.bits(), v)
}

fn dilog_work(w: &Complex, p: u32) -> Complex {
    let mag = abs(w);
    let pi = Float::with_val(p, rug::float::Constant::Pi);
    if mag <= 0.75 {
        return dilog_series(w, p);
    }
    let one_minus = (1i64 - w).complete((p, p));
    if abs(&one_minus) <= 0.75 {
        // Li2(w) = pi^2/6 - ln(w) ln(1-w) - Li2(1-w)
        let mut out = Complex::with_val(p, (&pi * &pi).complete(p) / 6u32);
        out -= w.ln_ref().complete((p, p)) * one_minus.clone().ln();
        out -= dilog_series(&one_minus, p);
        return out;
    }
    if mag >= 2.0 {
        // Li2(w) = -Li2(1/w) - pi^2/6 - ln(-w)^2/2
        let inv = w.clone().recip();
        let lnm = (-w).complete((p, p)).ln();
        let mut out = -dilog_work(&inv, p);
        out -= (&pi * &pi).complete(p) / 6u32;
        out -= (&lnm * &lnm).complete((p, p)) / 2u32;
        return out;
    }
    // annulus: Bernoulli series in u = -ln(1-w), |u| < 2*pi
    let u = -one_minus.ln();
    let mut term = u.clone(); // u^{k+1}/(k+1)! at k=0
    let mut acc = u.clone();
    let mut k = 0usize;
    let stop = Float::with_val(p, 1) >> (p + 16);
    loop {
        k += 1;
        term *= &u;
        term /= k as u32 + 1;
        let b = bernoulli_minus(k);
        if b != 0 {
            let contrib = (&term * &Complex::with_val(p, b)).complete((p, p));
            let sz = abs(&contrib);
            acc += contrib;
            if sz < abs(&acc) * &stop || sz < stop {
                break;
            }
        }
        assert!(
            k < 8 * p as usize,
            "dilog Bernoulli series failed to converge"
        );
    }
    acc
}

fn dilog_series(w: &Complex, p: u32) -> Complex {
    let mut acc = Complex::with_val(p, (0, 0));
    let mut pow = Complex::with_val(p, (1, 0));
    let stop = Float::with_val(p, 1) >> (p + 16);
    for k in 1..(16 * p as usize) {
        pow *= w;
        let term = (&pow / Float::with_val(p, (k * k) as u64)).complete((p, p));
        let sz = abs(&term);
        acc += term;
        if sz < stop {
            return acc;
        }
    }
    panic!("dilog series failed to converge");
}

/// Bloch-Wigner function `D(w) = Im(Li_2(w)) + arg(1-w) log|w|`.
pub fn bloch_wigner(w: &Complex, prec: Prec) -> Result<Float> {
    let p = prec.bits();
    let tol = prec.tol();
    let one_minus = (1i64 - w).complete((p, p));
    if abs(w) < tol || abs(&one_minus) < tol {
        return Err(Error::BranchPoint(format!("{w}")));
    }
    let li2 = dilog(w, prec);
    let arg = Float::with_val(p, one_minus.arg_ref());
    let logabs = abs(w).ln();
    Ok(Float::with_val(p, li2.imag()) + arg * logabs)
}
