//! The loop invariants: complex volume `S0`, 1-loop torsion `tau`, the
//! explicit 2-loop formula, the general `S_n` series engine, and the
//! move-invariance test harness.

use std::collections::BTreeMap;

use rug::ops::CompleteRound;
use rug::{Complex, Float};
use serde::Serialize;

use crate::cmat;
use crate::flatten::Flattening;
use crate::gluesolve::{certify_lift, LiftReport, ShapeAssignment};
use crate::moves::{apply_move, normalize_quad, Move, MoveCertificate};
use crate::mpnum::dilog;
use crate::nzio::NzDatum;
use crate::prec::{abs, Prec};
use crate::qmat;
use crate::series::{
    build_hessian, gaussian_expectation, integrand_series, log_hbar_series, HbarSeries,
    SeriesBounds,
};
use crate::{Error, Result};

/// Raw torsion value `(1/2) det(A D_z'' + B D_z^-1) z^f'' z''^-f` with the
/// sign as computed (no canonicalization).
pub fn one_loop_tau_raw(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    prec: Prec,
) -> Result<Complex> {
    let p = prec.bits();
    let n = datum.n;
    let mat: cmat::CMat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut e = (&shapes.zpp[j] * datum.a[i][j]).complete((p, p));
                    e += shapes.z[j].clone().recip() * datum.b[i][j];
                    e
                })
                .collect()
        })
        .collect();
    let det = cmat::det(&mat).ok_or(Error::ZeroTorsion)?;
    let mut mono = prec.one();
    for i in 0..n {
        mono *= int_power(&shapes.z[i], flattening.fpp[i], p);
        mono *= int_power(&shapes.zpp[i], -flattening.f[i], p);
    }
    let tau = det * mono / 2u32;
    if abs(&tau) < prec.tol() {
        return Err(Error::ZeroTorsion);
    }
    Ok(tau)
}

/// Torsion canonicalized to the sign representative with argument in
/// `[0, pi)`.
pub fn one_loop_tau(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    prec: Prec,
) -> Result<Complex> {
    Ok(canonical_sign(one_loop_tau_raw(
        datum, shapes, flattening, prec,
    )?))
}

/// Pick the representative of `{t, -t}` whose argument lies in `[0, pi)`.
pub fn canonical_sign(t: Complex) -> Complex {
    let im = t.imag();
    if im.is_sign_negative() && !im.is_zero() {
        return -t;
    }
    if im.is_zero() && t.real().is_sign_negative() {
        return -t;
    }
    t
}

fn int_power(z: &Complex, e: i64, p: u32) -> Complex {
    let mut base = if e < 0 {
        z.clone().recip()
    } else {
        Complex::with_val(p, z)
    };
    let mut e = e.unsigned_abs();
    let mut acc = Complex::with_val(p, (1, 0));
    while e > 0 {
        if e & 1 == 1 {
            acc *= &base;
        }
        base = (&base * &base).complete((p, p));
        e >>= 1;
    }
    acc
}

#[derive(Clone, Debug)]
pub struct ComplexVolume {
    /// `S0 = i(Vol + i CS)`: imaginary part is the hyperbolic volume,
    /// real part is defined modulo `pi^2/6`.
    pub s0: Complex,
    /// Real part reduced into `[0, pi^2/6)`.
    pub re_mod: Float,
    /// Lift certification; a nonzero lattice vector is surfaced, not fatal.
    pub lift: LiftReport,
}

/// Complex volume from the chosen logarithmic lifts:
/// `S0 = (1/2)(Z - i pi f).(Z'' + i pi f'') - sum_i Li_2(exp(-Z_i))`,
/// plus `-u v(u)` off the complete structure.
///
/// The overall sign is fixed so that `Im S0 = Vol` (the Bloch-Wigner sum)
/// and `Re S0 = -CS` modulo `pi^2/6`.
pub fn complex_volume(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    prec: Prec,
) -> Result<ComplexVolume> {
    let p = prec.bits();
    let n = datum.n;
    let lift = certify_lift(datum, shapes, prec)?;
    let ipi = prec.i_pi();
    let mut quad = Complex::with_val(p, (0, 0));
    for i in 0..n {
        let a = &shapes.big_z[i] - (&ipi * flattening.f[i]).complete((p, p));
        let b = &shapes.big_zpp[i] + (&ipi * flattening.fpp[i]).complete((p, p));
        quad += a * b;
    }
    let mut s0 = quad / 2u32;
    for i in 0..n {
        let w = (-shapes.big_z[i].clone()).exp();
        s0 -= dilog(&w, prec);
    }
    if abs(&shapes.u) > prec.tol() {
        let v = longitude_log(datum, shapes, prec)?;
        s0 -= (&shapes.u * &v).complete((p, p));
    }
    let pi2_6 = {
        let pi = prec.pi();
        (&pi * &pi).complete(p) / 6u32
    };
    let mut re_mod = Float::with_val(p, s0.real());
    let q = Float::with_val(p, &re_mod / &pi2_6).floor();
    re_mod -= q * &pi2_6;
    // collapse the representative at the top of the interval onto 0
    if (&pi2_6 - &re_mod).complete(p) < prec.tol() {
        re_mod = Float::with_val(p, 0);
    }
    Ok(ComplexVolume { s0, re_mod, lift })
}

/// Logarithmic longitude holonomy `v` with `l = -exp(v)`.
pub fn longitude_log(datum: &NzDatum, shapes: &ShapeAssignment, prec: Prec) -> Result<Complex> {
    let p = prec.bits();
    let lon = datum
        .longitude
        .as_ref()
        .ok_or_else(|| Error::SchemaError("longitude".into(), "longitude data required".into()))?;
    let mut twice_v = Complex::with_val(p, (0, 0));
    for j in 0..datum.n {
        twice_v += (&shapes.big_z[j] * lon.two_c[j]).complete((p, p));
        twice_v += (&shapes.big_zpp[j] * lon.two_d[j]).complete((p, p));
    }
    twice_v -= prec.i_pi() * lon.two_eta_lambda;
    Ok(twice_v / 2u32)
}

/// Explicit 2-loop formula: the six-diagram sum plus the vacuum term,
/// evaluated with the leading-order vertex factors. Independent of the
/// series engine; used as a cross-check of `n_loop(2)`.
pub fn two_loop_closed_form(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    prec: Prec,
) -> Result<Complex> {
    let p = prec.bits();
    let n = datum.n;
    let prop = build_hessian(datum, shapes, prec)?;
    let hinv = &prop.hinv;
    let binv = qmat::inverse_rational(&datum.b).ok_or(Error::SingularHessian)?;
    let binv_eta: Vec<Float> = (0..n)
        .map(|i| {
            let q: rug::Rational = (0..n)
                .map(|j| &binv[i][j] * rug::Rational::from(datum.eta[j]))
                .sum();
            Float::with_val(p, &q)
        })
        .collect();

    // leading-order vertex factors
    let mut g1 = Vec::with_capacity(n); // (z' - B^-1 eta)/2
    let mut g2 = Vec::with_capacity(n); // z z'^2 / 2
    let mut g3 = Vec::with_capacity(n); // -z z'^2   (coefficient of 1/hbar)
    let mut g4 = Vec::with_capacity(n); // -z(1+z) z'^3
    for i in 0..n {
        let z = &shapes.z[i];
        let zp = &shapes.zp[i];
        let zp2 = (zp * zp).complete((p, p));
        let zzp2 = (z * &zp2).complete((p, p));
        let mut v1 = zp.clone();
        v1 -= &binv_eta[i];
        g1.push(v1 / 2u32);
        g2.push((&zzp2 / 2u32).complete((p, p)));
        g3.push(-zzp2.clone());
        let mut v4 = (z + 1i64).complete((p, p));
        v4 *= z;
        v4 *= &zp2;
        v4 *= zp;
        g4.push(-v4);
    }

    let mut s = Complex::with_val(p, (0, 0));
    for i in 0..n {
        // (1/8) G4_i (H^-1_ii)^2  +  (1/2) G2_i H^-1_ii
        let hii = &hinv[i][i];
        let hii2 = (hii * hii).complete((p, p));
        s += (&g4[i] * &hii2).complete((p, p)) / 8u32;
        s += (&g2[i] * hii).complete((p, p)) / 2u32;
        for j in 0..n {
            let hij = &hinv[i][j];
            let hjj = &hinv[j][j];
            // (1/8) H_ii G3_i H_ij G3_j H_jj
            let mut t = (hii * &g3[i]).complete((p, p));
            t *= hij;
            t *= &g3[j];
            t *= hjj;
            s += t / 8u32;
            // (1/12) G3_i H_ij^3 G3_j
            let hij3 = (hij * hij).complete((p, p)) * hij;
            let mut t = (&g3[i] * &g3[j]).complete((p, p));
            t *= hij3;
            s += t / 12u32;
            // (1/2) G1_i H_ij G3_j H_jj
            let mut t = (&g1[i] * hij).complete((p, p));
            t *= &g3[j];
            t *= hjj;
            s += t / 2u32;
            // (1/2) G1_i H_ij G1_j
            let mut t = (&g1[i] * hij).complete((p, p));
            t *= &g1[j];
            s += t / 2u32;
        }
    }
    // vacuum: (1/8) f.B^-1 A f - (1/12) sum z'
    let binv_a_f: Vec<rug::Rational> = {
        let binv_a: Vec<Vec<rug::Rational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| &binv[i][k] * rug::Rational::from(datum.a[k][j]))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| &binv_a[i][j] * rug::Rational::from(flattening.f[j]))
                    .sum()
            })
            .collect()
    };
    let f_binv_a_f: rug::Rational = (0..n)
        .map(|i| &binv_a_f[i] * rug::Rational::from(flattening.f[i]))
        .sum();
    s += Float::with_val(p, &f_binv_a_f) / 8u32;
    let mut zp_sum = Complex::with_val(p, (0, 0));
    for i in 0..n {
        zp_sum += &shapes.zp[i];
    }
    s -= zp_sum / 12u32;
    Ok(s)
}

/// All loop coefficients `S_2 .. S_nmax` from the series engine, together
/// with the raw Gaussian expectation (the exponentiated series).
pub fn loop_series(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    nmax: usize,
    prec: Prec,
) -> Result<(Vec<Complex>, HbarSeries)> {
    loop_series_with_bounds(
        datum,
        shapes,
        flattening,
        nmax,
        SeriesBounds::for_loops(nmax),
        prec,
    )
}

/// Same as [`loop_series`] with explicit truncation bounds (used by the
/// truncation-sufficiency check).
pub fn loop_series_with_bounds(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    nmax: usize,
    bounds: SeriesBounds,
    prec: Prec,
) -> Result<(Vec<Complex>, HbarSeries)> {
    assert!(nmax >= 2);
    let prop = build_hessian(datum, shapes, prec)?;
    let integrand = integrand_series(datum, shapes, flattening, bounds, prec)?;
    let expectation = gaussian_expectation(&integrand, &prop)?;
    let log = log_hbar_series(&expectation, nmax - 1);
    Ok((log, expectation))
}

/// `S_n` for `n >= 2` (the coefficient of `hbar^(n-1)` in the log of the
/// formal Gaussian expectation).
pub fn n_loop(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    n: usize,
    prec: Prec,
) -> Result<Complex> {
    let (log, _) = loop_series(datum, shapes, flattening, n, prec)?;
    Ok(log[n - 2].clone())
}

/// Bundle of computed invariants.
#[derive(Clone, Debug)]
pub struct LoopInvariants {
    pub s0: Option<ComplexVolume>,
    /// Canonical sign representative (argument in `[0, pi)`).
    pub tau: Complex,
    /// `S_n` for `2 <= n <= nmax`.
    pub sn: BTreeMap<usize, Complex>,
    /// Normalized coefficients: `sn_tilde[n] = tau^(3n) *` (coefficient of
    /// `hbar^n` in the exponentiated series), for `1 <= n <= nmax-1`.
    pub sn_tilde: BTreeMap<usize, Complex>,
}

pub fn loop_invariants(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    nmax: usize,
    with_s0: bool,
    prec: Prec,
) -> Result<LoopInvariants> {
    let p = prec.bits();
    let tau = one_loop_tau(datum, shapes, flattening, prec)?;
    let s0 = if with_s0 {
        Some(complex_volume(datum, shapes, flattening, prec)?)
    } else {
        None
    };
    let mut sn = BTreeMap::new();
    let mut sn_tilde = BTreeMap::new();
    if nmax >= 2 {
        let (log, expectation) = loop_series(datum, shapes, flattening, nmax, prec)?;
        for n in 2..=nmax {
            sn.insert(n, log[n - 2].clone());
        }
        let tau3 = int_power(&tau, 3, p);
        let mut tau_pow = Complex::with_val(p, (1, 0));
        for n in 1..nmax {
            tau_pow = (&tau_pow * &tau3).complete((p, p));
            sn_tilde.insert(n, (expectation.at_order(n) * &tau_pow).complete((p, p)));
        }
    }
    Ok(LoopInvariants {
        s0,
        tau,
        sn,
        sn_tilde,
    })
}

// ---------------------------------------------------------------------------
// invariance harness
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct HarnessTolerances {
    /// Absolute tolerance on `tau^2`.
    pub tau_sq: f64,
    /// Absolute tolerance on `S_3` and on the `S_2` class residual.
    pub s3: f64,
    pub s2: f64,
}

impl Default for HarnessTolerances {
    fn default() -> Self {
        HarnessTolerances {
            tau_sq: 1e-25,
            s3: 1e-20,
            s2: 1e-20,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MoveCheck {
    pub label: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// |tau'^2 - tau^2|
    pub tau_sq_delta: f64,
    /// |Im(S2' - S2)|
    pub s2_delta_im: f64,
    /// nearest integer to 24 Re(S2' - S2)
    pub s2_offset: i64,
    /// |24 Re(S2' - S2) - s2_offset| / 24
    pub s2_offset_dev: f64,
    /// |S3' - S3|
    pub s3_delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<MoveCertificate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessReport {
    pub all_pass: bool,
    pub checks: Vec<MoveCheck>,
}

struct BaseInvariants {
    tau_sq: Complex,
    s2: Complex,
    s3: Complex,
}

fn invariants_for(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    prec: Prec,
) -> Result<BaseInvariants> {
    let p = prec.bits();
    // quad-normalize so det B != 0 for the series engine
    let (norm, _) = normalize_quad(datum, Some(shapes), Some(flattening), prec)?;
    let d = &norm.datum;
    let s = norm.shapes.as_ref().expect("shapes preserved");
    let f = norm.flattening.as_ref().expect("flattening preserved");
    let tau = one_loop_tau_raw(d, s, f, prec)?;
    let (log, _) = loop_series(d, s, f, 3, prec)?;
    Ok(BaseInvariants {
        tau_sq: (&tau * &tau).complete((p, p)),
        s2: log[0].clone(),
        s3: log[1].clone(),
    })
}

/// Apply each move and compare `tau^2` (exact invariance), `S_3` (exact),
/// and `S_2` (invariance of its mod-1/24 class).
pub fn invariance_harness(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    moves: &[Move],
    tol: &HarnessTolerances,
    prec: Prec,
) -> Result<HarnessReport> {
    let p = prec.bits();
    let base = invariants_for(datum, shapes, flattening, prec)?;
    let mut checks = Vec::new();
    for mv in moves {
        let label = format!("{mv:?}");
        let outcome = (|| -> Result<MoveCheck> {
            let out = apply_move(datum, Some(shapes), Some(flattening), mv, prec)?;
            let s = out
                .shapes
                .as_ref()
                .ok_or_else(|| Error::SchemaError("shapes".into(), "move dropped shapes".into()))?;
            let f = out.flattening.as_ref().ok_or_else(|| {
                Error::SchemaError("flattening".into(), "move dropped flattening".into())
            })?;
            let moved = invariants_for(&out.datum, s, f, prec)?;
            let tau_sq_delta = abs(&(&moved.tau_sq - &base.tau_sq).complete((p, p))).to_f64();
            let ds2 = (&moved.s2 - &base.s2).complete((p, p));
            let s2_delta_im = Float::with_val(p, ds2.imag()).to_f64().abs();
            let re24 = Float::with_val(p, ds2.real()) * 24u32;
            let s2_offset = re24.to_f64().round() as i64;
            let s2_offset_dev = ((re24 - s2_offset).abs() / 24u32).to_f64();
            let s3_delta = abs(&(&moved.s3 - &base.s3).complete((p, p))).to_f64();
            let pass = tau_sq_delta < tol.tau_sq
                && s2_delta_im < tol.s2
                && s2_offset_dev < tol.s2
                && s3_delta < tol.s3;
            Ok(MoveCheck {
                label: label.clone(),
                pass,
                error: None,
                tau_sq_delta,
                s2_delta_im,
                s2_offset,
                s2_offset_dev,
                s3_delta,
                certificate: Some(out.certificate),
            })
        })();
        checks.push(outcome.unwrap_or_else(|e| MoveCheck {
            label: format!("{mv:?}"),
            pass: false,
            error: Some(e.to_string()),
            tau_sq_delta: f64::NAN,
            s2_delta_im: f64::NAN,
            s2_offset: 0,
            s2_offset_dev: f64::NAN,
            s3_delta: f64::NAN,
            certificate: None,
        }));
    }
    Ok(HarnessReport {
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    })
}
