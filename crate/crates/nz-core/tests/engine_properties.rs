#![allow(clippy::needless_range_loop)]
//! Cross-cutting engine properties: truncation sufficiency of the series
//! bounds, the Newton Jacobian against finite differences, continuation
//! along the deformed family against the closed-form shape functions, and
//! the determinant relation across the 2-3 move.

mod common;

use rug::ops::CompleteRound;
use rug::{Complex, Float};

use nz_core::cmat;
use nz_core::flatten::solve_flattening;
use nz_core::gluesolve::{continue_in_m, longitude_eigenvalue};
use nz_core::invariants::{loop_series, loop_series_with_bounds};
use nz_core::moves::{normalize_quad, two_three_move, TwoThreeDirection, TwoThreeSite};
use nz_core::prec::Prec;
use nz_core::series::SeriesBounds;

use common::*;

const P: Prec = Prec(256);

#[test]
fn truncation_bounds_are_sufficient() {
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let flat = basic_flattening(&fig8);
    let p = P.bits();

    // n = 2: doubling the x-degree bound must not change S2
    let (base2, _) = loop_series(&fig8, &shapes, &flat, 2, P).unwrap();
    let (wide2, _) = loop_series_with_bounds(
        &fig8,
        &shapes,
        &flat,
        2,
        SeriesBounds {
            h2_max: 2,
            deg_max: 12,
        },
        P,
    )
    .unwrap();
    let d2 = cabs(&(&base2[0] - &wide2[0]).complete((p, p)));
    assert!(d2 < P.tol(), "S2 shifted by {:.2e}", d2.to_f64());

    // n = 3: raising the bound beyond 6(n-1) must not change S3
    let (base3, _) = loop_series(&fig8, &shapes, &flat, 3, P).unwrap();
    let (wide3, _) = loop_series_with_bounds(
        &fig8,
        &shapes,
        &flat,
        3,
        SeriesBounds {
            h2_max: 4,
            deg_max: 15,
        },
        P,
    )
    .unwrap();
    let d3 = cabs(&(&base3[1] - &wide3[1]).complete((p, p)));
    assert!(d3 < P.tol(), "S3 shifted by {:.2e}", d3.to_f64());

    // and on the 10-tetrahedron fixture at n = 2
    let (doc9, k912) = load_fixture("k9_12.json");
    let shapes9 = solve_complete(&doc9, &k912, P);
    let flat9 = basic_flattening(&k912);
    let (norm, _) = normalize_quad(&k912, Some(&shapes9), Some(&flat9), P).unwrap();
    let (nd, ns, nf) = (
        &norm.datum,
        norm.shapes.as_ref().unwrap(),
        norm.flattening.as_ref().unwrap(),
    );
    let (b9, _) = loop_series(nd, ns, nf, 2, P).unwrap();
    let (w9, _) = loop_series_with_bounds(
        nd,
        ns,
        nf,
        2,
        SeriesBounds {
            h2_max: 2,
            deg_max: 12,
        },
        P,
    )
    .unwrap();
    let d9 = cabs(&(&b9[0] - &w9[0]).complete((p, p)));
    assert!(d9 < P.tol(), "9_12 S2 shifted by {:.2e}", d9.to_f64());
}

#[test]
fn newton_jacobian_matches_finite_differences() {
    // F_i(Z) = sum_j A_ij Z_j + B_ij log(1 - exp(-Z_j)); its Jacobian is
    // A - B diag(z') with z' = 1/(1-z)
    let (_, fig8) = load_fixture("fig8.json");
    let p = 320u32;
    let prec = Prec(p);
    let n = fig8.n;
    let z0 = [
        Complex::with_val(p, (0.41, 0.77)),
        Complex::with_val(p, (0.62, 0.93)),
    ];
    let f_of = |big_z: &[Complex]| -> Vec<Complex> {
        (0..n)
            .map(|i| {
                let mut acc = Complex::with_val(p, (0, 0));
                for j in 0..n {
                    let zpp = 1i64 - (-big_z[j].clone()).exp();
                    acc += (&big_z[j] * fig8.a[i][j]).complete((p, p));
                    acc += zpp.ln() * fig8.b[i][j];
                }
                acc
            })
            .collect()
    };
    let big_z: Vec<Complex> = z0.iter().map(|z| z.ln_ref().complete((p, p))).collect();
    let h = Float::with_val(p, 1e-30);
    for j in 0..n {
        let mut zp_ = big_z.clone();
        zp_[j] += &h;
        let mut zm = big_z.clone();
        zm[j] -= &h;
        let fp = f_of(&zp_);
        let fm = f_of(&zm);
        for i in 0..n {
            let fd = ((&fp[i] - &fm[i]).complete((p, p))) / (h.clone() * 2u32);
            let z = big_z[j].clone().exp();
            let zp = (1i64 - &z).complete((p, p)).recip();
            let mut expect = Complex::with_val(p, (fig8.a[i][j], 0));
            expect -= zp * fig8.b[i][j];
            assert!(
                close(&fd, &expect, 1e-55),
                "J[{i}][{j}] finite difference mismatch"
            );
        }
    }
    let _ = prec;
}

#[test]
fn continuation_matches_closed_form_shapes() {
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let p = P.bits();
    // m: 1 -> 1.1 in 10 steps
    let path: Vec<Complex> = (1..=10)
        .map(|k| Complex::with_val(p, (1.0 + 0.01 * k as f64, 0.0)))
        .collect();
    let states = continue_in_m(&fig8, &shapes, &path, P).unwrap();
    for (s, m) in states.iter().zip(&path) {
        let ell = longitude_eigenvalue(&fig8, s, P).unwrap();
        // z = -(m^2 - m^-2)/(1 + m^2 l), w = (m^2 + l)/(m^2 - m^-2)
        let m2 = (m * m).complete((p, p));
        let denom = 1i64 + (&m2 * &ell).complete((p, p));
        let m2m = &m2 - m2.clone().recip();
        let z_expect = -((&m2m / &denom).complete((p, p)));
        let w_expect = ((&m2 + &ell).complete((p, p))) / &m2m;
        assert!(close(&s.z[0], &z_expect, 1e-60), "z at m = {m}");
        assert!(close(&s.z[1], &w_expect, 1e-60), "w at m = {m}");
        // and the A-polynomial holds
        assert!(cabs(&fig8_apoly(&ell, m, p)) < 1e-60);
    }

    // a short loop in m (avoiding the branch point of the double cover at
    // m = 1, where the two sheets meet) returns to the starting shapes
    let mut loop_path: Vec<Complex> = vec![Complex::with_val(p, (1.07, 0.0))];
    loop_path.extend((1..=11).map(|k| {
        let t = 2.0 * std::f64::consts::PI * (k as f64) / 12.0;
        Complex::with_val(p, (1.05 + 0.02 * t.cos(), 0.02 * t.sin()))
    }));
    loop_path.push(Complex::with_val(p, (1.07, 0.0))); // exact return point
    loop_path.push(Complex::with_val(p, (1.0, 0.0)));
    let states = continue_in_m(&fig8, &shapes, &loop_path, P).unwrap();
    let mid = &states[states.len() - 2];
    assert!(
        close(&mid.z[0], &states[0].z[0], 1e-60),
        "loop around a regular point must close up on its sheet"
    );
    let last = states.last().unwrap();
    for (a, b) in last.z.iter().zip(&shapes.z) {
        assert!(close(a, b, 1e-60), "return to m = 1 recovers the start");
    }
}

#[test]
fn two_three_determinant_relation() {
    // det(A~ D_z''~ + B~ D_z~^-1) = -(1/w1) det(A D_z'' + B D_z^-1)
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let flat = basic_flattening(&fig8);
    let p = P.bits();
    let det_of = |datum: &nz_core::nzio::NzDatum, s: &nz_core::gluesolve::ShapeAssignment| {
        let n = datum.n;
        let m: Vec<Vec<Complex>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut e = (&s.zpp[j] * datum.a[i][j]).complete((p, p));
                        e += s.z[j].clone().recip() * datum.b[i][j];
                        e
                    })
                    .collect()
            })
            .collect();
        cmat::det(&m).unwrap()
    };
    let before = det_of(&fig8, &shapes);
    let site = TwoThreeSite {
        direction: TwoThreeDirection::Expand,
        tets: vec![1, 2],
        central_edge_row: None,
    };
    let big = two_three_move(&fig8, &shapes, &flat, &site, P).unwrap();
    let after = det_of(&big.datum, big.shapes.as_ref().unwrap());
    let w1 = &big.shapes.as_ref().unwrap().z[0];
    let expect = -((&before / w1).complete((p, p)));
    assert!(
        close(&after, &expect, 1e-70),
        "det relation across the 2-3 move"
    );
}

#[test]
fn meridian_move_leaves_tau_exactly_invariant() {
    // not just up to sign: det P = +1 and the monomial is untouched
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let flat = basic_flattening(&fig8);
    let p = P.bits();
    let before = nz_core::invariants::one_loop_tau_raw(&fig8, &shapes, &flat, P).unwrap();
    let out = nz_core::moves::meridian_move(&fig8, 1, 1).unwrap();
    let after = nz_core::invariants::one_loop_tau_raw(&out.datum, &shapes, &flat, P).unwrap();
    let dev = cabs(&(&before - &after).complete((p, p)));
    assert!(dev < P.tol(), "tau moved by {:.2e}", dev.to_f64());
}

#[test]
fn lift_recertifies_after_quad_rotation() {
    // the rotation transforms lifts linearly, so the rotated datum is still
    // exactly certified (lattice vector stays integral -- here zero)
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let flat = basic_flattening(&fig8);
    let out = nz_core::moves::rotate_quad(
        &fig8,
        Some(&shapes),
        Some(&flat),
        1,
        nz_core::moves::RotationDirection::Fwd,
        P,
    )
    .unwrap();
    let rep =
        nz_core::gluesolve::certify_lift(&out.datum, out.shapes.as_ref().unwrap(), P).unwrap();
    assert!(rep.standard, "lattice = {:?}", rep.lattice);
}

#[test]
fn longitude_eigenvalue_identities_on_the_deformed_branch() {
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let p = P.bits();
    let m = Complex::with_val(p, (1.08, 0.02));
    let states = continue_in_m(&fig8, &shapes, std::slice::from_ref(&m), P).unwrap();
    let s = &states[0];
    let ell = longitude_eigenvalue(&fig8, s, P).unwrap();
    // for this triangulation the halved longitude equation reads
    // z^-2 z''^-1 = l
    let mut lhs = s.z[0].clone().recip();
    lhs = (&lhs * &lhs).complete((p, p));
    lhs *= s.zpp[0].clone().recip();
    assert!(close(&lhs, &ell, 1e-60));
    // and the doubled (unhalved) product equals l^2 with the parity sign
    let lon = fig8.longitude.as_ref().unwrap();
    let mut prod = P.one();
    for j in 0..fig8.n {
        for _ in 0..lon.two_c[j].unsigned_abs() {
            if lon.two_c[j] < 0 {
                prod *= s.z[j].clone().recip();
            } else {
                prod *= &s.z[j];
            }
        }
        for _ in 0..lon.two_d[j].unsigned_abs() {
            if lon.two_d[j] < 0 {
                prod *= s.zpp[j].clone().recip();
            } else {
                prod *= &s.zpp[j];
            }
        }
    }
    let mut rhs = (&ell * &ell).complete((p, p));
    if lon.two_eta_lambda.rem_euclid(2) == 1 {
        rhs = -rhs;
    }
    assert!(close(&prod, &rhs, 1e-60), "squared longitude equation");
}

#[test]
fn flattening_independence_of_higher_loops() {
    // S_3 must be identical for different flattenings (S_2 may shift by 1/24)
    let (doc, fig8) = load_fixture("fig8.json");
    let shapes = solve_complete(&doc, &fig8, P);
    let p = P.bits();
    let f1 = solve_flattening(&fig8, false).unwrap();
    let f2 = nz_core::flatten::alternate_flattening(&fig8, &f1).unwrap();
    let (log1, _) = loop_series(&fig8, &shapes, &f1, 3, P).unwrap();
    let (log2, _) = loop_series(&fig8, &shapes, &f2, 3, P).unwrap();
    let ds3 = cabs(&(&log1[1] - &log2[1]).complete((p, p)));
    assert!(
        ds3 < P.tol(),
        "S3 flattening dependence {:.2e}",
        ds3.to_f64()
    );
    let ds2 = (&log1[0] - &log2[0]).complete((p, p));
    let re24 = Float::with_val(p, ds2.real()) * 24u32;
    let frac = (re24.clone() - re24.to_f64().round()).abs();
    assert!(frac < P.tol());
    assert!(Float::with_val(p, ds2.imag()).abs() < P.tol());
}
