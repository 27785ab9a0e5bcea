//! Exact integer and rational dense linear algebra.
//!
//! Matrices here are tiny (at most ~2N x 2N for N tetrahedra), so the
//! implementations favor clarity over asymptotics. Everything is exact:
//! integer rows are manipulated with `rug::Integer`, rank/inverse/determinant
//! questions are answered over `rug::Rational`. No floats.

use rug::{Integer, Rational};

pub type IMat = Vec<Vec<i64>>;
pub type ZMat = Vec<Vec<Integer>>;
pub type QMat = Vec<Vec<Rational>>;

pub fn to_big(m: &[Vec<i64>]) -> ZMat {
    m.iter()
        .map(|r| r.iter().map(|&x| Integer::from(x)).collect())
        .collect()
}

pub fn to_small(m: &[Vec<Integer>]) -> Option<IMat> {
    m.iter()
        .map(|r| r.iter().map(|x| x.to_i64()).collect::<Option<Vec<_>>>())
        .collect()
}

pub fn identity_big(n: usize) -> ZMat {
    (0..n)
        .map(|i| (0..n).map(|j| Integer::from((i == j) as i64)).collect())
        .collect()
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|r| r[j].clone()).collect())
        .collect()
}

pub fn mat_mul_big(a: &[Vec<Integer>], b: &[Vec<Integer>]) -> ZMat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| (0..k).map(|t| Integer::from(&a[i][t] * &b[t][j])).sum())
                .collect()
        })
        .collect()
}

pub fn mat_mul_i64(a: &[Vec<i64>], b: &[Vec<i64>]) -> IMat {
    to_small(&mat_mul_big(&to_big(a), &to_big(b))).expect("i64 overflow in matrix product")
}

/// Row-style Hermite normal form.
///
/// Returns `(H, U)` with `U` unimodular and `U * M = H`, where `H` is in row
/// echelon form with positive pivots and entries above each pivot reduced to
/// `[0, pivot)`.
pub fn hnf(m: &[Vec<Integer>]) -> (ZMat, ZMat) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut h: ZMat = m.to_vec();
    let mut u = identity_big(rows);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        loop {
            // pick the row (>= r) with the smallest nonzero |entry| in column c
            let mut piv: Option<usize> = None;
            for i in r..rows {
                if h[i][c] != 0 && piv.is_none_or(|p| h[i][c].clone().abs() < h[p][c].clone().abs())
                {
                    piv = Some(i);
                }
            }
            let Some(p) = piv else { break };
            h.swap(r, p);
            u.swap(r, p);
            let mut reduced = true;
            for i in r + 1..rows {
                if h[i][c] != 0 {
                    let q = Integer::from(&h[i][c] / &h[r][c]);
                    row_sub(&mut h, i, r, &q);
                    row_sub(&mut u, i, r, &q);
                    if h[i][c] != 0 {
                        reduced = false;
                    }
                }
            }
            if reduced {
                break;
            }
        }
        if h[r][c] == 0 {
            continue;
        }
        if h[r][c] < 0 {
            row_neg(&mut h, r);
            row_neg(&mut u, r);
        }
        for i in 0..r {
            let (q, _) = h[i][c].clone().div_rem_floor(h[r][c].clone());
            if q != 0 {
                row_sub(&mut h, i, r, &q);
                row_sub(&mut u, i, r, &q);
            }
        }
        r += 1;
    }
    (h, u)
}

fn row_sub(m: &mut ZMat, i: usize, j: usize, q: &Integer) {
    for c in 0..m[i].len() {
        let d = Integer::from(q * &m[j][c]);
        m[i][c] -= d;
    }
}

fn row_neg(m: &mut ZMat, i: usize) {
    for x in &mut m[i] {
        *x = -x.clone();
    }
}

/// Pivot column indices of a row-echelon H (one per nonzero row).
pub fn hnf_pivots(h: &[Vec<Integer>]) -> Vec<usize> {
    let mut pivots = Vec::new();
    for row in h {
        if let Some(c) = row.iter().position(|x| *x != 0) {
            pivots.push(c);
        }
    }
    pivots
}

pub fn det_big(m: &[Vec<Integer>]) -> Integer {
    let q = det_rational_raw(
        &m.iter()
            .map(|r| {
                r.iter()
                    .map(|x| Rational::from(x.clone()))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>(),
    );
    debug_assert!(q.is_integer());
    q.numer().clone()
}

pub fn det_rational(m: &[Vec<i64>]) -> Rational {
    det_rational_raw(
        &m.iter()
            .map(|r| r.iter().map(|&x| Rational::from(x)).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    )
}

fn det_rational_raw(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut a: QMat = m.to_vec();
    let mut det = Rational::from(1);
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| a[r][c] != 0) else {
            return Rational::new();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c].clone();
        let inv = a[c][c].clone();
        for r in c + 1..n {
            if a[r][c] != 0 {
                let f = Rational::from(&a[r][c] / &inv);
                for j in c..n {
                    let d = Rational::from(&f * &a[c][j]);
                    a[r][j] -= d;
                }
            }
        }
    }
    det
}

pub fn rank(m: &[Vec<i64>]) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let mut a: QMat = m
        .iter()
        .map(|r| r.iter().map(|&x| Rational::from(x)).collect())
        .collect();
    let cols = a[0].len();
    let mut rk = 0;
    for c in 0..cols {
        let Some(p) = (rk..rows).find(|&r| a[r][c] != 0) else {
            continue;
        };
        a.swap(p, rk);
        for r in 0..rows {
            if r != rk && a[r][c] != 0 {
                let f = Rational::from(&a[r][c] / &a[rk][c]);
                for j in 0..cols {
                    let d = Rational::from(&f * &a[rk][j]);
                    a[r][j] -= d;
                }
            }
        }
        rk += 1;
        if rk == rows {
            break;
        }
    }
    rk
}

/// Exact inverse over the rationals; `None` if singular.
pub fn inverse_rational(m: &[Vec<i64>]) -> Option<QMat> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|&x| Rational::from(x))
                .chain((0..n).map(|j| Rational::from((i == j) as i64)))
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| a[r][c] != 0)?;
        a.swap(p, c);
        let inv = a[c][c].clone();
        for x in &mut a[c] {
            *x /= inv.clone();
        }
        for r in 0..n {
            if r != c && a[r][c] != 0 {
                let f = a[r][c].clone();
                for j in 0..2 * n {
                    let d = Rational::from(&f * &a[c][j]);
                    a[r][j] -= d;
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn mat_vec_i64(m: &[Vec<i64>], v: &[i64]) -> Vec<i64> {
    m.iter()
        .map(|r| {
            r.iter()
                .zip(v)
                .map(|(&a, &b)| a.checked_mul(b).unwrap())
                .sum()
        })
        .collect()
}

/// Is `a * b^T` symmetric? (exact)
pub fn ab_transpose_symmetric(a: &[Vec<i64>], b: &[Vec<i64>]) -> bool {
    let abt = mat_mul_big(&to_big(a), &to_big(&transpose(b)));
    let n = abt.len();
    (0..n).all(|i| (0..n).all(|j| abt[i][j] == abt[j][i]))
}
