//! Newton solution of the (possibly deformed) gluing equations in
//! logarithmic variables, lift certification, and longitude eigenvalues.

use rug::ops::CompleteRound;
use rug::{Complex, Float};

use crate::cmat::{self, CMat};
use crate::nzio::NzDatum;
use crate::prec::{abs, cdist, Prec};
use crate::{Error, Result};

/// Distance threshold to the degenerate shape values {0, 1}.
pub const DEGENERACY_EPS: f64 = 1.52587890625e-5; // 2^-16

#[derive(Clone, Debug)]
pub struct ShapeAssignment {
    pub z: Vec<Complex>,
    pub zp: Vec<Complex>,
    pub zpp: Vec<Complex>,
    /// Chosen logarithmic lift of `z`.
    pub big_z: Vec<Complex>,
    /// Chosen logarithmic lift of `z''`.
    pub big_zpp: Vec<Complex>,
    /// Logarithmic meridian deformation `u = log m` (0 at the complete
    /// structure).
    pub u: Complex,
    /// Max norm of the logarithmic gluing residual at the last solve.
    pub residual: Float,
}

fn shape_triple(z: &Complex, p: u32) -> (Complex, Complex) {
    let zp = (1i64 - z).complete((p, p)).recip();
    let zpp = 1i64 - z.clone().recip();
    (zp, zpp)
}

impl ShapeAssignment {
    /// Build from shape values using principal-branch lifts.
    pub fn from_shapes(z: Vec<Complex>, u: Complex, prec: Prec) -> Self {
        let p = prec.bits();
        let mut zp = Vec::with_capacity(z.len());
        let mut zpp = Vec::with_capacity(z.len());
        let mut big_z = Vec::with_capacity(z.len());
        let mut big_zpp = Vec::with_capacity(z.len());
        for zi in &z {
            let (a, b) = shape_triple(zi, p);
            big_z.push(zi.ln_ref().complete((p, p)));
            big_zpp.push(b.ln_ref().complete((p, p)));
            zp.push(a);
            zpp.push(b);
        }
        ShapeAssignment {
            z,
            zp,
            zpp,
            big_z,
            big_zpp,
            u,
            residual: Float::with_val(p, rug::float::Special::Infinity),
        }
    }

    /// Rebuild the derived fields from the stored lifts.
    fn from_lifts(big_z: Vec<Complex>, u: Complex, residual: Float, p: u32) -> Self {
        let z: Vec<Complex> = big_z.iter().map(|w| w.clone().exp()).collect();
        let mut zp = Vec::with_capacity(z.len());
        let mut zpp = Vec::with_capacity(z.len());
        let mut big_zpp = Vec::with_capacity(z.len());
        for zi in &z {
            let (a, b) = shape_triple(zi, p);
            big_zpp.push(b.ln_ref().complete((p, p)));
            zp.push(a);
            zpp.push(b);
        }
        ShapeAssignment {
            z,
            zp,
            zpp,
            big_z,
            big_zpp,
            u,
            residual,
        }
    }

    /// Build from an explicit pair of lifts (used by moves, which transform
    /// lifts linearly and must not re-standardize them).
    pub fn from_lift_pair(big_z: Vec<Complex>, big_zpp: Vec<Complex>, u: Complex, p: u32) -> Self {
        let z: Vec<Complex> = big_z.iter().map(|w| w.clone().exp()).collect();
        let mut zp = Vec::with_capacity(z.len());
        let mut zpp = Vec::with_capacity(z.len());
        for zi in &z {
            let (a, b) = shape_triple(zi, p);
            zp.push(a);
            zpp.push(b);
        }
        ShapeAssignment {
            z,
            zp,
            zpp,
            big_z,
            big_zpp,
            u,
            residual: Float::with_val(p, rug::float::Special::Infinity),
        }
    }

    /// Default initial guess: every shape at `0.5 + 0.8i`.
    pub fn default_guess(n: usize, prec: Prec) -> Self {
        let p = prec.bits();
        let z = vec![Complex::with_val(p, (0.5, 0.8)); n];
        Self::from_shapes(z, prec.zero(), prec)
    }

    /// Tetrahedron relations, non-degeneracy, and lift consistency.
    pub fn check_invariants(&self, prec: Prec) -> Result<()> {
        let p = prec.bits();
        let tol = prec.tol();
        for (i, zi) in self.z.iter().enumerate() {
            let prod = (&self.zp[i] * &self.zpp[i]).complete((p, p)) * zi;
            if cdist(&prod, &prec.cplx(-1, 0)) > tol {
                return Err(Error::DegenerateShape(format!(
                    "z z' z'' != -1 at tetrahedron {}",
                    i + 1
                )));
            }
            let lag = (&self.zpp[i] + zi.clone().recip()) - 1i64;
            if abs(&lag) > tol {
                return Err(Error::DegenerateShape(format!(
                    "z'' + 1/z - 1 != 0 at tetrahedron {}",
                    i + 1
                )));
            }
            for w in [zi, &self.zp[i], &self.zpp[i]] {
                if abs(w) < DEGENERACY_EPS || abs(&(w - 1i64).complete((p, p))) < DEGENERACY_EPS {
                    return Err(Error::DegenerateShape(format!(
                        "shape at tetrahedron {} within {DEGENERACY_EPS} of {{0,1}}",
                        i + 1
                    )));
                }
            }
            if cdist(&self.big_z[i].clone().exp(), zi) > tol
                || cdist(&self.big_zpp[i].clone().exp(), &self.zpp[i]) > tol
            {
                return Err(Error::DegenerateShape(format!(
                    "lift does not exponentiate to the shape at tetrahedron {}",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NewtonMode {
    /// Solve `A Z + B Z'' = i pi eta + 2u e_m` exactly (lattice vector 0).
    #[default]
    Logarithmic,
    /// Freeze the `2 pi i` lattice offset of the initial point and keep it.
    Multiplicative,
}

fn log_residual(datum: &NzDatum, big_z: &[Complex], u: &Complex, p: u32) -> Vec<Complex> {
    let n = datum.n;
    let mrow = datum.meridian_row();
    let ipi = Prec(p).i_pi();
    (0..n)
        .map(|i| {
            let mut acc = Complex::with_val(p, (0, 0));
            for j in 0..n {
                let zpp = 1i64 - (-big_z[j].clone()).exp();
                acc += (&big_z[j] * datum.a[i][j]).complete((p, p));
                acc += zpp.ln() * datum.b[i][j];
            }
            acc -= (&ipi * datum.eta[i]).complete((p, p));
            if i == mrow {
                acc -= (u * 2i64).complete((p, p));
            }
            acc
        })
        .collect()
}

/// Solve the gluing equations `prod z^A z''^B = (-1)^eta m^(2 delta)` by
/// Newton iteration in the logarithmic lifts.
pub fn solve_shapes(
    datum: &NzDatum,
    m: &Complex,
    initial: &ShapeAssignment,
    mode: NewtonMode,
    prec: Prec,
) -> Result<ShapeAssignment> {
    let p = prec.bits();
    let n = datum.n;
    if abs(m).is_zero() {
        return Err(Error::DegenerateShape("m = 0".into()));
    }
    let u = m.ln_ref().complete((p, p));
    let mut big_z: Vec<Complex> = initial
        .big_z
        .iter()
        .map(|w| Complex::with_val(p, w))
        .collect();
    let two_pi = prec.pi() * 2u32;

    // lattice offset (in units of 2 pi i) fixed from the initial point
    let offset: Vec<i64> = match mode {
        NewtonMode::Logarithmic => vec![0; n],
        NewtonMode::Multiplicative => log_residual(datum, &big_z, &u, p)
            .iter()
            .map(|r| {
                let im = Float::with_val(p, r.imag());
                (im / &two_pi).to_f64().round() as i64
            })
            .collect(),
    };

    let tol = prec.tol();
    let mut last_norm = Float::with_val(p, rug::float::Special::Infinity);
    for iter in 0..64 {
        let mut f = log_residual(datum, &big_z, &u, p);
        for (fi, &k) in f.iter_mut().zip(&offset) {
            if k != 0 {
                let ipi2k =
                    Complex::with_val(p, (Float::with_val(p, 0), (&two_pi * k).complete(p)));
                *fi -= ipi2k;
            }
        }
        let norm = f
            .iter()
            .map(abs)
            .fold(Float::with_val(p, 0), |a, b| if b > a { b } else { a });
        if norm < tol {
            let shapes = ShapeAssignment::from_lifts(big_z, u, norm, p);
            shapes.check_invariants(prec)?;
            return Ok(shapes);
        }
        // Jacobian A - B diag(z')
        let jac: CMat = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let z = big_z[j].clone().exp();
                        let zp = (1i64 - &z).complete((p, p)).recip();
                        let mut e = Complex::with_val(p, (datum.a[i][j], 0));
                        e -= zp * datum.b[i][j];
                        e
                    })
                    .collect()
            })
            .collect();
        let lu = cmat::lu(&jac).ok_or(Error::SingularJacobian)?;
        let step = lu.solve(&f);
        // damped update: halve until the residual stops exploding
        let mut scale = Float::with_val(p, 1);
        let mut accepted = false;
        for _ in 0..8 {
            let cand: Vec<Complex> = big_z
                .iter()
                .zip(&step)
                .map(|(zc, s)| zc - (s * &scale).complete((p, p)))
                .collect();
            let mut fc = log_residual(datum, &cand, &u, p);
            for (fi, &k) in fc.iter_mut().zip(&offset) {
                if k != 0 {
                    let ipi2k =
                        Complex::with_val(p, (Float::with_val(p, 0), (&two_pi * k).complete(p)));
                    *fi -= ipi2k;
                }
            }
            let cn = fc
                .iter()
                .map(abs)
                .fold(Float::with_val(p, 0), |a, b| if b > a { b } else { a });
            if cn < norm || cn < tol {
                big_z = cand;
                accepted = true;
                break;
            }
            scale /= 2u32;
        }
        if !accepted {
            return Err(Error::NoConvergence(format!(
                "stalled at iteration {iter}, residual {last_norm}"
            )));
        }
        last_norm = norm;
        // cheap degeneracy guard during iteration
        for w in &big_z {
            let z = w.clone().exp();
            if abs(&z) < DEGENERACY_EPS || abs(&(&z - 1i64).complete((p, p))) < DEGENERACY_EPS {
                return Err(Error::DegenerateShape("iterate approached {0,1}".into()));
            }
        }
    }
    Err(Error::NoConvergence("iteration cap reached".into()))
}

/// Track a solution branch along a path of meridian eigenvalues, with
/// step-halving on Newton failure.
pub fn continue_in_m(
    datum: &NzDatum,
    start: &ShapeAssignment,
    path: &[Complex],
    prec: Prec,
) -> Result<Vec<ShapeAssignment>> {
    let p = prec.bits();
    let mut current = start.clone();
    let mut out = Vec::with_capacity(path.len());
    let mut m_cur = current.u.clone().exp();
    for target in path {
        current = continue_segment(datum, &current, &m_cur, target, prec, 0)?;
        m_cur = Complex::with_val(p, target);
        out.push(current.clone());
    }
    Ok(out)
}

fn continue_segment(
    datum: &NzDatum,
    from: &ShapeAssignment,
    m_from: &Complex,
    m_to: &Complex,
    prec: Prec,
    depth: usize,
) -> Result<ShapeAssignment> {
    match solve_shapes(datum, m_to, from, NewtonMode::Multiplicative, prec) {
        Ok(s) => Ok(s),
        Err(Error::DegenerateShape(e)) if depth >= 14 => Err(Error::DegenerateShape(e)),
        Err(_) if depth < 14 => {
            let p = prec.bits();
            let mid = ((m_from + m_to).complete((p, p))) / 2u32;
            let half = continue_segment(datum, from, m_from, &mid, prec, depth + 1)?;
            continue_segment(datum, &half, &mid, m_to, prec, depth + 1)
        }
        Err(_) => Err(Error::BranchJump(format!("{m_to}"))),
    }
}

#[derive(Clone, Debug)]
pub struct LiftReport {
    /// Integer lattice vector `r / (2 pi i)`.
    pub lattice: Vec<i64>,
    /// True when the lattice vector vanishes (standard lift).
    pub standard: bool,
    /// Max distance of `r / (2 pi i)` from the nearest integer vector.
    pub max_deviation: Float,
}

/// Check that `A Z + B Z'' - 2u e_m - i pi eta` lies in `2 pi i Z^N` for the
/// stored lifts and return the integer vector.
pub fn certify_lift(datum: &NzDatum, shapes: &ShapeAssignment, prec: Prec) -> Result<LiftReport> {
    let p = prec.bits();
    let n = datum.n;
    let mrow = datum.meridian_row();
    let ipi = prec.i_pi();
    let two_pi = prec.pi() * 2u32;
    let mut lattice = Vec::with_capacity(n);
    let mut max_dev = Float::with_val(p, 0);
    for i in 0..n {
        let mut acc = Complex::with_val(p, (0, 0));
        for j in 0..n {
            acc += (&shapes.big_z[j] * datum.a[i][j]).complete((p, p));
            acc += (&shapes.big_zpp[j] * datum.b[i][j]).complete((p, p));
        }
        acc -= (&ipi * datum.eta[i]).complete((p, p));
        if i == mrow {
            acc -= (&shapes.u * 2i64).complete((p, p));
        }
        // acc should be 2 pi i k
        let re_dev = Float::with_val(p, acc.real()).abs() / &two_pi;
        let ratio = Float::with_val(p, acc.imag()) / &two_pi;
        let k = ratio.to_f64().round();
        let dev = (ratio - k).abs().max(&re_dev);
        if dev > 0.0625 {
            return Err(Error::NonLatticeResidual(format!(
                "row {}: residual {} not near the 2 pi i lattice",
                i + 1,
                dev.to_f64()
            )));
        }
        if dev > max_dev {
            max_dev = dev;
        }
        lattice.push(k as i64);
    }
    Ok(LiftReport {
        standard: lattice.iter().all(|&k| k == 0),
        lattice,
        max_deviation: max_dev,
    })
}

/// Longitude eigenvalue with the knot-complement square-root convention
/// `l = -exp(v)`, `v = C.Z + D.Z'' - i pi eta_lambda`.
pub fn longitude_eigenvalue(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    prec: Prec,
) -> Result<Complex> {
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
    let v = twice_v / 2u32;
    Ok(-v.exp())
}
