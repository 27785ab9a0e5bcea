//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::path::PathBuf;

use rug::ops::CompleteRound;
use rug::{Complex, Float};

use nz_core::flatten::{solve_flattening, Flattening};
use nz_core::gluesolve::{solve_shapes, NewtonMode, ShapeAssignment};
use nz_core::nzio::{load_datum, DatumFile, NzDatum};
use nz_core::prec::Prec;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn load_fixture(name: &str) -> (DatumFile, NzDatum) {
    let doc = load_datum(fixtures_dir().join(name)).expect("fixture loads");
    let datum = doc.datum().expect("fixture datum valid");
    (doc, datum)
}

pub fn shapes_from_doc(doc: &DatumFile, n: usize, prec: Prec) -> ShapeAssignment {
    let p = prec.bits();
    match &doc.shapes {
        Some(shapes) if shapes.len() == n => {
            let z = shapes
                .iter()
                .map(|s| {
                    Complex::with_val(p, (prec.parse(&s.re).unwrap(), prec.parse(&s.im).unwrap()))
                })
                .collect();
            ShapeAssignment::from_shapes(z, prec.zero(), prec)
        }
        _ => ShapeAssignment::default_guess(n, prec),
    }
}

/// Solve the complete structure (m = 1) for a fixture.
pub fn solve_complete(doc: &DatumFile, datum: &NzDatum, prec: Prec) -> ShapeAssignment {
    let guess = shapes_from_doc(doc, datum.n, prec);
    solve_shapes(datum, &prec.one(), &guess, NewtonMode::Logarithmic, prec)
        .expect("complete structure solves")
}

pub fn basic_flattening(datum: &NzDatum) -> Flattening {
    solve_flattening(datum, false).expect("flattening exists")
}

/// |a - b| below tolerance `t` (given as f64 for readability).
pub fn close(a: &Complex, b: &Complex, t: f64) -> bool {
    let p = a.prec().0;
    let d = (a - b).complete((p, p));
    Float::with_val(p, d.abs_ref()) < t
}

pub fn cabs(a: &Complex) -> Float {
    Float::with_val(a.prec().0, a.abs_ref())
}

/// Deterministic xorshift64* stream in [-1, 1).
pub struct Rng(pub u64);

impl Rng {
    pub fn next_unit(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

// --- figure-eight closed forms on the geometric component (test oracles) ---

/// Geometric A-polynomial `m^4 - (1 - m^2 - 2m^4 - m^6 + m^8) l + m^4 l^2`.
pub fn fig8_apoly(ell: &Complex, m: &Complex, p: u32) -> Complex {
    let m2 = (m * m).complete((p, p));
    let m4 = (&m2 * &m2).complete((p, p));
    let m6 = (&m4 * &m2).complete((p, p));
    let m8 = (&m4 * &m4).complete((p, p));
    let mut c1 = Complex::with_val(p, (1, 0));
    c1 -= &m2;
    c1 -= (&m4 * 2i64).complete((p, p));
    c1 -= &m6;
    c1 += &m8;
    let mut acc = m4.clone();
    acc -= c1 * ell;
    acc += &m4 * (ell * ell).complete((p, p));
    acc
}

/// Deformed figure-eight torsion
/// `(1 - m^2 - 2m^4 - m^6 + m^8 - 2 m^4 l) / (2 m^4 (m^2 - m^-2))`.
pub fn fig8_tau_formula(ell: &Complex, m: &Complex, p: u32) -> Complex {
    let m2 = (m * m).complete((p, p));
    let m4 = (&m2 * &m2).complete((p, p));
    let m6 = (&m4 * &m2).complete((p, p));
    let m8 = (&m4 * &m4).complete((p, p));
    let mut num = Complex::with_val(p, (1, 0));
    num -= &m2;
    num -= (&m4 * 2i64).complete((p, p));
    num -= &m6;
    num += &m8;
    num -= (&m4 * ell).complete((p, p)) * 2i64;
    let mut den = &m2 - m2.clone().recip();
    den *= &m4;
    den *= 2i64;
    num / den
}

/// `m^-6 - m^-4 - 2 m^-2 + c0 - 2 m^2 - m^4 + m^6` (c0 = 15 for the 2-loop
/// display, 5 for the 3-loop display).
pub fn fig8_bracket(m: &Complex, c0: i64, p: u32) -> Complex {
    let m2 = (m * m).complete((p, p));
    let m4 = (&m2 * &m2).complete((p, p));
    let m6 = (&m4 * &m2).complete((p, p));
    let mut acc = m6.clone().recip();
    acc -= m4.clone().recip();
    acc -= m2.clone().recip() * 2i64;
    acc += c0;
    acc -= (&m2 * 2i64).complete((p, p));
    acc -= &m4;
    acc += &m6;
    acc
}
