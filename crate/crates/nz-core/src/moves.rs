//! The triangulation-move calculus on Neumann-Zagier data: quad rotations,
//! change of dropped edge, meridian path moves, quad normalization (making
//! `B` invertible), flattening swaps, and the 2-3 bipyramid move.
//!
//! Every move transforms the datum together with (optionally) a shape
//! assignment and a flattening, and emits a certificate recording the
//! before/after fingerprints and the predicted effect on the torsion sign.

use rug::ops::CompleteRound;
use rug::Complex;
use serde::{Deserialize, Serialize};

use crate::flatten::{alternate_flattening, solve_flattening, Flattening};
use crate::gluesolve::{ShapeAssignment, DEGENERACY_EPS};
use crate::nzio::{Longitude, NzDatum};
use crate::prec::{abs, Prec};
use crate::qmat;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationDirection {
    /// `(a, b) -> (-b, a - b)`, shapes `(z, z', z'') -> (z', z'', z)`.
    Fwd,
    /// `(a, b) -> (b - a, -a)`, shapes `(z, z', z'') -> (z'', z, z')`.
    Bwd,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Move {
    Rotate {
        tet: usize,
        direction: RotationDirection,
    },
    Edge {
        row: usize,
    },
    Meridian {
        row: usize,
        sign: i8,
    },
    #[serde(rename = "flattening-swap")]
    FlatteningSwap,
    #[serde(rename = "twothree")]
    TwoThree(TwoThreeSite),
}

/// Site description for the 2-3 move. Tetrahedron indices are 1-based and
/// given in the alignment the local model expects: for an expansion the two
/// tetrahedra glued along the relevant face, for a collapse the three
/// tetrahedra around the central bipyramid edge plus that edge's row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoThreeSite {
    pub direction: TwoThreeDirection,
    pub tets: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub central_edge_row: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoThreeDirection {
    Expand,
    Collapse,
}

#[derive(Clone, Debug, Serialize)]
pub struct MoveCertificate {
    pub kind: String,
    pub input_datum: String,
    pub output_datum: String,
    /// Predicted factor `tau_out / tau_in`, when the move pins it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_sign_factor: Option<i8>,
}

#[derive(Clone, Debug)]
pub struct MoveOutput {
    pub datum: NzDatum,
    pub shapes: Option<ShapeAssignment>,
    pub flattening: Option<Flattening>,
    pub certificate: MoveCertificate,
}

fn certificate(
    kind: String,
    input: &NzDatum,
    output: &NzDatum,
    tau_sign_factor: Option<i8>,
) -> MoveCertificate {
    MoveCertificate {
        kind,
        input_datum: input.fingerprint(),
        output_datum: output.fingerprint(),
        tau_sign_factor,
    }
}

/// Cyclically relabel the quad of tetrahedron `tet` (1-based).
pub fn rotate_quad(
    datum: &NzDatum,
    shapes: Option<&ShapeAssignment>,
    flattening: Option<&Flattening>,
    tet: usize,
    direction: RotationDirection,
    prec: Prec,
) -> Result<MoveOutput> {
    let n = datum.n;
    if !(1..=n).contains(&tet) {
        return Err(Error::SchemaError(
            "rotate.tet".into(),
            format!("must be in 1..={n}"),
        ));
    }
    let i = tet - 1;
    let mut out = datum.clone();
    for r in 0..n {
        let (a, b) = (datum.a[r][i], datum.b[r][i]);
        let (na, nb, de) = match direction {
            RotationDirection::Fwd => (-b, a - b, b),
            RotationDirection::Bwd => (b - a, -a, a),
        };
        out.a[r][i] = na;
        out.b[r][i] = nb;
        out.eta[r] -= de;
    }
    if let Some(lon) = &mut out.longitude {
        let (c, d) = (lon.two_c[i], lon.two_d[i]);
        let (nc, nd, de) = match direction {
            RotationDirection::Fwd => (-d, c - d, d),
            RotationDirection::Bwd => (d - c, -c, c),
        };
        lon.two_c[i] = nc;
        lon.two_d[i] = nd;
        lon.two_eta_lambda -= de;
    }
    out.validate()?;

    let shapes = shapes.map(|s| {
        let p = prec.bits();
        let ipi = prec.i_pi();
        let mut big_z = s.big_z.clone();
        let mut big_zpp = s.big_zpp.clone();
        let (zl, zppl) = (s.big_z[i].clone(), s.big_zpp[i].clone());
        let zpl = (&ipi - &zl).complete((p, p)) - &zppl; // lift of z' from Z+Z'+Z''=i pi
        match direction {
            RotationDirection::Fwd => {
                big_z[i] = zpl;
                big_zpp[i] = zl;
            }
            RotationDirection::Bwd => {
                big_z[i] = zppl;
                big_zpp[i] = zpl;
            }
        }
        ShapeAssignment::from_lift_pair(big_z, big_zpp, s.u.clone(), p)
    });

    let mut tau_sign = None;
    let flattening = flattening.map(|fl| {
        let mut f = fl.f.clone();
        let mut fp = fl.fp.clone();
        let mut fpp = fl.fpp.clone();
        match direction {
            RotationDirection::Fwd => {
                (f[i], fp[i], fpp[i]) = (fl.fp[i], fl.fpp[i], fl.f[i]);
                tau_sign = Some(if fl.f[i] % 2 == 0 { -1 } else { 1 });
            }
            RotationDirection::Bwd => {
                (f[i], fp[i], fpp[i]) = (fl.fpp[i], fl.f[i], fl.fp[i]);
                tau_sign = Some(if fl.fpp[i] % 2 == 0 { -1 } else { 1 });
            }
        }
        Flattening {
            f,
            fp,
            fpp,
            longitude_compatible: fl.longitude_compatible,
        }
    });

    let cert = certificate(
        format!("rotate tet {tet} {direction:?}"),
        datum,
        &out,
        tau_sign,
    );
    Ok(MoveOutput {
        datum: out,
        shapes,
        flattening,
        certificate: cert,
    })
}

/// Replace the redundant edge: left-multiply `(A, B, eta)` by the matrix
/// `P_(row, N)` whose `row`-th row is all `-1`. Requires `row != N`.
pub fn change_edge(datum: &NzDatum, row: usize) -> Result<MoveOutput> {
    let n = datum.n;
    if !(1..=n).contains(&row) || row == n {
        return Err(Error::SchemaError(
            "edge.row".into(),
            format!(
                "must be in 1..={} (the convention P_(N,N) = identity is excluded)",
                n - 1
            ),
        ));
    }
    let r = row - 1;
    let mut out = datum.clone();
    for j in 0..n {
        out.a[r][j] = -(0..n).map(|k| datum.a[k][j]).sum::<i64>();
        out.b[r][j] = -(0..n).map(|k| datum.b[k][j]).sum::<i64>();
    }
    out.eta[r] = -datum.eta.iter().sum::<i64>();
    out.validate()?;
    let cert = certificate(format!("edge change at row {row}"), datum, &out, Some(-1));
    Ok(MoveOutput {
        datum: out,
        shapes: None,
        flattening: None,
        certificate: cert,
    })
}

/// Meridian path move: left-multiply by `(I + sign E_(m,row))`, adding
/// `sign` times row `row` to the meridian row. Leaves the torsion exactly
/// unchanged.
pub fn meridian_move(datum: &NzDatum, row: usize, sign: i8) -> Result<MoveOutput> {
    let n = datum.n;
    let m = datum.meridian_row();
    if !(1..=n).contains(&row) || row - 1 == m {
        return Err(Error::SchemaError(
            "meridian.row".into(),
            "row must name an edge row, not the meridian row".into(),
        ));
    }
    if sign != 1 && sign != -1 {
        return Err(Error::SchemaError(
            "meridian.sign".into(),
            "must be +-1".into(),
        ));
    }
    let r = row - 1;
    let mut out = datum.clone();
    for j in 0..n {
        out.a[m][j] += sign as i64 * datum.a[r][j];
        out.b[m][j] += sign as i64 * datum.b[r][j];
    }
    out.eta[m] += sign as i64 * datum.eta[r];
    out.validate()?;
    let cert = certificate(
        format!("meridian move row {row} sign {sign:+}"),
        datum,
        &out,
        Some(1),
    );
    Ok(MoveOutput {
        datum: out,
        shapes: None,
        flattening: None,
        certificate: cert,
    })
}

/// Rotate quads until `det B != 0` (always possible). Returns the move
/// output plus the list of rotated tetrahedra (1-based).
pub fn normalize_quad(
    datum: &NzDatum,
    shapes: Option<&ShapeAssignment>,
    flattening: Option<&Flattening>,
    prec: Prec,
) -> Result<(MoveOutput, Vec<usize>)> {
    if qmat::det_rational(&datum.b) != 0 {
        let cert = certificate("normalize-quad (noop)".into(), datum, datum, Some(1));
        return Ok((
            MoveOutput {
                datum: datum.clone(),
                shapes: shapes.cloned(),
                flattening: flattening.cloned(),
                certificate: cert,
            },
            Vec::new(),
        ));
    }
    // greedy maximal independent column set of A
    let cols = qmat::transpose(&datum.a);
    let mut chosen: Vec<usize> = Vec::new();
    let mut stack: Vec<Vec<i64>> = Vec::new();
    for (i, c) in cols.iter().enumerate() {
        stack.push(c.clone());
        if qmat::rank(&stack) == stack.len() {
            chosen.push(i);
        } else {
            stack.pop();
        }
    }
    let mut datum_cur = datum.clone();
    let mut shapes_cur = shapes.cloned();
    let mut flat_cur = flattening.cloned();
    for &i in &chosen {
        let step = rotate_quad(
            &datum_cur,
            shapes_cur.as_ref(),
            flat_cur.as_ref(),
            i + 1,
            RotationDirection::Bwd,
            prec,
        )?;
        datum_cur = step.datum;
        shapes_cur = step.shapes;
        flat_cur = step.flattening;
    }
    assert!(
        qmat::det_rational(&datum_cur.b) != 0,
        "quad normalization failed to make B invertible"
    );
    let cert = certificate(
        format!(
            "normalize-quad rotating {:?}",
            chosen.iter().map(|i| i + 1).collect::<Vec<_>>()
        ),
        datum,
        &datum_cur,
        None,
    );
    Ok((
        MoveOutput {
            datum: datum_cur,
            shapes: shapes_cur,
            flattening: flat_cur,
            certificate: cert,
        },
        chosen.iter().map(|i| i + 1).collect(),
    ))
}

fn permutation_for(n: usize, front: &[usize]) -> Vec<usize> {
    let mut perm: Vec<usize> = front.iter().map(|t| t - 1).collect();
    for i in 0..n {
        if !perm.contains(&i) {
            perm.push(i);
        }
    }
    perm
}

fn permute_datum(datum: &NzDatum, perm: &[usize]) -> NzDatum {
    let n = datum.n;
    let pick = |m: &Vec<Vec<i64>>| -> Vec<Vec<i64>> {
        m.iter()
            .map(|row| perm.iter().map(|&j| row[j]).collect())
            .collect()
    };
    NzDatum {
        n,
        a: pick(&datum.a),
        b: pick(&datum.b),
        eta: datum.eta.clone(),
        dropped_edge: datum.dropped_edge,
        longitude: datum.longitude.as_ref().map(|l| Longitude {
            two_c: perm.iter().map(|&j| l.two_c[j]).collect(),
            two_d: perm.iter().map(|&j| l.two_d[j]).collect(),
            two_eta_lambda: l.two_eta_lambda,
        }),
    }
}

fn permute_shapes(s: &ShapeAssignment, perm: &[usize], p: u32) -> ShapeAssignment {
    ShapeAssignment::from_lift_pair(
        perm.iter().map(|&j| s.big_z[j].clone()).collect(),
        perm.iter().map(|&j| s.big_zpp[j].clone()).collect(),
        s.u.clone(),
        p,
    )
}

fn permute_flattening(f: &Flattening, perm: &[usize]) -> Flattening {
    Flattening {
        f: perm.iter().map(|&j| f.f[j]).collect(),
        fp: perm.iter().map(|&j| f.fp[j]).collect(),
        fpp: perm.iter().map(|&j| f.fpp[j]).collect(),
        longitude_compatible: f.longitude_compatible,
    }
}

fn check_nondegenerate(w: &Complex, what: &str, p: u32) -> Result<()> {
    if abs(w) < DEGENERACY_EPS || abs(&(w - 1i64).complete((p, p))) < DEGENERACY_EPS {
        return Err(Error::DegenerateMove(format!(
            "{what} = {w} is within {DEGENERACY_EPS} of {{0,1}}"
        )));
    }
    Ok(())
}

/// The 2-3 bipyramid move.
///
/// Expansion replaces the two site tetrahedra by three (the new central edge
/// becomes row 1); collapse is the inverse. Shapes are mapped through the
/// exponentiated bipyramid relations; the output flattening is re-solved
/// (expansion) or mapped through the discretized relations (collapse).
pub fn two_three_move(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    site: &TwoThreeSite,
    prec: Prec,
) -> Result<MoveOutput> {
    match site.direction {
        TwoThreeDirection::Expand => expand_two_three(datum, shapes, flattening, site, prec),
        TwoThreeDirection::Collapse => collapse_three_two(datum, shapes, flattening, site, prec),
    }
}

fn expand_two_three(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    site: &TwoThreeSite,
    prec: Prec,
) -> Result<MoveOutput> {
    let n = datum.n;
    let p = prec.bits();
    if site.tets.len() != 2 || site.tets.iter().any(|t| !(1..=n).contains(t)) {
        return Err(Error::QuadMismatch(
            "expand needs two distinct tetrahedra".into(),
        ));
    }
    if site.tets[0] == site.tets[1] {
        return Err(Error::QuadMismatch(
            "site tetrahedra must be distinct".into(),
        ));
    }
    let perm = permutation_for(n, &site.tets);
    let d0 = permute_datum(datum, &perm);
    let s0 = permute_shapes(shapes, &perm, p);
    let f0 = permute_flattening(flattening, &perm);

    let (x1, x2) = (s0.z[0].clone(), s0.z[1].clone());
    // w_1' = x1 x2, w_2' = (1 - 1/x2)/(1 - x1), w_3' = (1 - 1/x1)/(1 - x2)
    let w1p = (&x1 * &x2).complete((p, p));
    let w2p = (1i64 - x2.clone().recip()) / (1i64 - &x1).complete((p, p));
    let w3p = (1i64 - x1.clone().recip()) / (1i64 - &x2).complete((p, p));
    // w = 1 - 1/w'
    let ws: Vec<Complex> = [w1p, w2p, w3p]
        .into_iter()
        .map(|wp| 1i64 - wp.recip())
        .collect();
    for (k, w) in ws.iter().enumerate() {
        check_nondegenerate(w, &format!("w{}", k + 1), p)?;
    }
    check_nondegenerate(&x1, "x1", p)?;
    check_nondegenerate(&x2, "x2", p)?;

    let nn = n + 1;
    let mut a = vec![vec![0i64; nn]; nn];
    let mut b = vec![vec![0i64; nn]; nn];
    let mut eta = vec![0i64; nn];
    // central edge row
    for j in 0..3 {
        a[0][j] = -1;
        b[0][j] = -1;
    }
    eta[0] = -1;
    for r in 0..n {
        let (a1, a2) = (d0.a[r][0], d0.a[r][1]);
        let (b1, b2) = (d0.b[r][0], d0.b[r][1]);
        a[r + 1][0] = b1 + b2;
        a[r + 1][1] = a1;
        a[r + 1][2] = a2;
        b[r + 1][0] = 0;
        b[r + 1][1] = a2 + b1;
        b[r + 1][2] = a1 + b2;
        for j in 2..n {
            a[r + 1][j + 1] = d0.a[r][j];
            b[r + 1][j + 1] = d0.b[r][j];
        }
        eta[r + 1] = d0.eta[r];
    }
    let longitude = d0.longitude.as_ref().map(|l| {
        let (c1, c2) = (l.two_c[0], l.two_c[1]);
        let (dd1, dd2) = (l.two_d[0], l.two_d[1]);
        let mut two_c = vec![dd1 + dd2, c1, c2];
        let mut two_d = vec![0, c2 + dd1, c1 + dd2];
        two_c.extend_from_slice(&l.two_c[2..]);
        two_d.extend_from_slice(&l.two_d[2..]);
        Longitude {
            two_c,
            two_d,
            two_eta_lambda: l.two_eta_lambda,
        }
    });
    let out = NzDatum {
        n: nn,
        a,
        b,
        eta,
        dropped_edge: d0.dropped_edge + 1,
        longitude,
    };
    out.validate()?;

    let mut z_new = ws;
    z_new.extend(s0.z[2..].iter().cloned());
    let shapes_new = ShapeAssignment::from_shapes(z_new, s0.u.clone(), prec);
    verify_gluing(&out, &shapes_new, prec)?;

    let flat_new = solve_flattening(&out, f0.longitude_compatible && out.longitude.is_some())?;

    let cert = certificate(
        format!("2-3 expand at tets {:?}", site.tets),
        datum,
        &out,
        None,
    );
    Ok(MoveOutput {
        datum: out,
        shapes: Some(shapes_new),
        flattening: Some(flat_new),
        certificate: cert,
    })
}

fn collapse_three_two(
    datum: &NzDatum,
    shapes: &ShapeAssignment,
    flattening: &Flattening,
    site: &TwoThreeSite,
    prec: Prec,
) -> Result<MoveOutput> {
    let n = datum.n;
    let p = prec.bits();
    if site.tets.len() != 3 || site.tets.iter().any(|t| !(1..=n).contains(t)) {
        return Err(Error::QuadMismatch(
            "collapse needs three tetrahedra".into(),
        ));
    }
    let central = site
        .central_edge_row
        .ok_or_else(|| Error::QuadMismatch("collapse needs the central edge row".into()))?;
    if !(1..=n).contains(&central) {
        return Err(Error::QuadMismatch("central edge row out of range".into()));
    }
    if central == datum.dropped_edge {
        return Err(Error::QuadMismatch(
            "the dropped edge must not be the central bipyramid edge; apply an edge change first"
                .into(),
        ));
    }
    let perm = permutation_for(n, &site.tets);
    let d0 = permute_datum(datum, &perm);
    let s0 = permute_shapes(shapes, &perm, p);
    let f0 = permute_flattening(flattening, &perm);
    let c = central - 1;
    // central row must be three -1's in both A and B with eta = -1
    let central_ok = (0..3).all(|j| d0.a[c][j] == -1 && d0.b[c][j] == -1)
        && (3..n).all(|j| d0.a[c][j] == 0 && d0.b[c][j] == 0)
        && d0.eta[c] == -1;
    if !central_ok {
        return Err(Error::QuadMismatch(
            "central edge row does not match the bipyramid pattern".into(),
        ));
    }

    let nn = n - 1;
    let mut a = vec![vec![0i64; nn]; nn];
    let mut b = vec![vec![0i64; nn]; nn];
    let mut eta = vec![0i64; nn];
    let mut out_r = 0usize;
    for r in 0..n {
        if r == c {
            continue;
        }
        let a1 = d0.a[r][1];
        let a2 = d0.a[r][2];
        let b1 = d0.b[r][1] - a2;
        let b2 = d0.b[r][2] - a1;
        if d0.a[r][0] != b1 + b2 || d0.b[r][0] != 0 {
            return Err(Error::QuadMismatch(format!(
                "row {} is not of bipyramid form",
                r + 1
            )));
        }
        a[out_r][0] = a1;
        a[out_r][1] = a2;
        b[out_r][0] = b1;
        b[out_r][1] = b2;
        for j in 3..n {
            a[out_r][j - 1] = d0.a[r][j];
            b[out_r][j - 1] = d0.b[r][j];
        }
        eta[out_r] = d0.eta[r];
        out_r += 1;
    }
    let dropped_edge = if datum.dropped_edge > central {
        datum.dropped_edge - 1
    } else {
        datum.dropped_edge
    };
    let longitude = match d0.longitude.as_ref() {
        Some(l) => {
            let c1 = l.two_c[1];
            let c2 = l.two_c[2];
            let dd1 = l.two_d[1] - c2;
            let dd2 = l.two_d[2] - c1;
            if l.two_c[0] != dd1 + dd2 || l.two_d[0] != 0 {
                return Err(Error::QuadMismatch(
                    "longitude row is not of bipyramid form".into(),
                ));
            }
            let mut two_c = vec![c1, c2];
            let mut two_d = vec![dd1, dd2];
            two_c.extend_from_slice(&l.two_c[3..]);
            two_d.extend_from_slice(&l.two_d[3..]);
            Some(Longitude {
                two_c,
                two_d,
                two_eta_lambda: l.two_eta_lambda,
            })
        }
        None => None,
    };
    let out = NzDatum {
        n: nn,
        a,
        b,
        eta,
        dropped_edge,
        longitude,
    };
    out.validate()?;

    // x1 = (1 - 1/w2')/(1 - w3'), x2 = (1 - 1/w3')/(1 - w2')
    let w2p = s0.zp[1].clone();
    let w3p = s0.zp[2].clone();
    let prod = (&w2p * &w3p).complete((p, p));
    if abs(&(prod - 1i64)) < DEGENERACY_EPS {
        return Err(Error::DegenerateMove("w2' w3' = 1 at the site".into()));
    }
    let x1 = (1i64 - w2p.clone().recip()) / (1i64 - &w3p).complete((p, p));
    let x2 = (1i64 - w3p.clone().recip()) / (1i64 - &w2p).complete((p, p));
    check_nondegenerate(&x1, "x1", p)?;
    check_nondegenerate(&x2, "x2", p)?;
    let mut z_new = vec![x1, x2];
    z_new.extend(s0.z[3..].iter().cloned());
    let shapes_new = ShapeAssignment::from_shapes(z_new, s0.u.clone(), prec);
    verify_gluing(&out, &shapes_new, prec)?;

    // discretized longitudinal relations map the flattening
    let (d1, d1p, d1pp) = (f0.f[0], f0.fp[0], f0.fpp[0]);
    let (d2, d2p, d2pp) = (f0.f[1], f0.fp[1], f0.fpp[1]);
    let (d3, d3p, d3pp) = (f0.f[2], f0.fp[2], f0.fpp[2]);
    assert_eq!(
        d1p + d2p + d3p,
        2,
        "central discretized edge constraint must hold for a valid flattening"
    );
    let e1 = (d2 + d3pp, d3 + d1pp, d1 + d2pp);
    let e2 = (d2pp + d3, d1pp + d2, d3pp + d1);
    debug_assert_eq!(e1.0 + e1.1 + e1.2, 1);
    debug_assert_eq!(e2.0 + e2.1 + e2.2, 1);
    let mut f = vec![e1.0, e2.0];
    let mut fpp = vec![e1.2, e2.2];
    f.extend_from_slice(&f0.f[3..]);
    fpp.extend_from_slice(&f0.fpp[3..]);
    let flat_new =
        Flattening::from_pair(f, fpp, f0.longitude_compatible && out.longitude.is_some());
    if !flat_new.satisfies(&out) {
        return Err(Error::QuadMismatch(
            "mapped flattening does not satisfy the collapsed datum".into(),
        ));
    }

    let cert = certificate(
        format!("2-3 collapse at tets {:?} central row {central}", site.tets),
        datum,
        &out,
        None,
    );
    Ok(MoveOutput {
        datum: out,
        shapes: Some(shapes_new),
        flattening: Some(flat_new),
        certificate: cert,
    })
}

/// Multiplicative gluing residual check (used after shape-mapping moves).
fn verify_gluing(datum: &NzDatum, shapes: &ShapeAssignment, prec: Prec) -> Result<()> {
    let p = prec.bits();
    let mrow = datum.meridian_row();
    let m_sq = (&shapes.u * 2i64).complete((p, p)).exp();
    for i in 0..datum.n {
        let mut prod = prec.one();
        for j in 0..datum.n {
            prod *= power(&shapes.z[j], datum.a[i][j], p);
            prod *= power(&shapes.zpp[j], datum.b[i][j], p);
        }
        let mut rhs = prec.one();
        if datum.eta[i].rem_euclid(2) == 1 {
            rhs = -rhs;
        }
        if i == mrow {
            rhs *= &m_sq;
        }
        let dev = abs(&(prod - rhs));
        // the shape map is algebraically exact; allow a little rounding slack
        let slack = prec.tol() << 8u32;
        if dev > slack {
            return Err(Error::DegenerateMove(format!(
                "mapped shapes violate gluing row {}: residual {}",
                i + 1,
                dev.to_f64()
            )));
        }
    }
    Ok(())
}

fn power(z: &Complex, e: i64, p: u32) -> Complex {
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
        let sq = (&base * &base).complete((p, p));
        base = sq;
        e >>= 1;
    }
    acc
}

/// Apply a generic move description.
pub fn apply_move(
    datum: &NzDatum,
    shapes: Option<&ShapeAssignment>,
    flattening: Option<&Flattening>,
    mv: &Move,
    prec: Prec,
) -> Result<MoveOutput> {
    match mv {
        Move::Rotate { tet, direction } => {
            rotate_quad(datum, shapes, flattening, *tet, *direction, prec)
        }
        Move::Edge { row } => {
            let mut out = change_edge(datum, *row)?;
            out.shapes = shapes.cloned();
            out.flattening = flattening.cloned();
            Ok(out)
        }
        Move::Meridian { row, sign } => {
            let mut out = meridian_move(datum, *row, *sign)?;
            out.shapes = shapes.cloned();
            out.flattening = flattening.cloned();
            Ok(out)
        }
        Move::FlatteningSwap => {
            let fl = flattening.ok_or_else(|| {
                Error::SchemaError(
                    "flattening".into(),
                    "flattening swap needs a flattening".into(),
                )
            })?;
            let alt = alternate_flattening(datum, fl)?;
            // sign factor: (-1)^(f''.g - f.g'') for the two flattenings
            let dot: i64 = (0..datum.n)
                .map(|i| fl.fpp[i] * alt.f[i] - fl.f[i] * alt.fpp[i])
                .sum();
            let cert = MoveCertificate {
                kind: "flattening swap".into(),
                input_datum: datum.fingerprint(),
                output_datum: datum.fingerprint(),
                tau_sign_factor: Some(if dot.rem_euclid(2) == 0 { 1 } else { -1 }),
            };
            Ok(MoveOutput {
                datum: datum.clone(),
                shapes: shapes.cloned(),
                flattening: Some(alt),
                certificate: cert,
            })
        }
        Move::TwoThree(site) => {
            let s = shapes.ok_or_else(|| {
                Error::SchemaError("shapes".into(), "2-3 move needs shapes".into())
            })?;
            let fl = flattening.ok_or_else(|| {
                Error::SchemaError("flattening".into(), "2-3 move needs a flattening".into())
            })?;
            two_three_move(datum, s, fl, site, prec)
        }
    }
}
