//! Dense complex linear algebra at working precision (LU with partial
//! pivoting). Matrix sizes are bounded by the tetrahedron count, so a plain
//! O(n^3) implementation is plenty.

use rug::ops::CompleteRound;
use rug::{Complex, Float};

use crate::prec::abs;

pub type CMat = Vec<Vec<Complex>>;

pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
    swaps: usize,
    prec: u32,
}

/// LU-factor `m`; returns `None` if a pivot is exactly representable zero.
pub fn lu(m: &CMat) -> Option<Lu> {
    let n = m.len();
    let prec = if n > 0 { m[0][0].prec().0 } else { 64 };
    let mut a = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for c in 0..n {
        let (p, mag) = (c..n)
            .map(|r| (r, abs(&a[r][c])))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if mag.is_zero() {
            return None;
        }
        if p != c {
            a.swap(p, c);
            perm.swap(p, c);
            swaps += 1;
        }
        let pivot = a[c][c].clone();
        for r in c + 1..n {
            let f = (&a[r][c] / &pivot).complete((prec, prec));
            for j in c + 1..n {
                let d = (&f * &a[c][j]).complete((prec, prec));
                a[r][j] -= d;
            }
            a[r][c] = f;
        }
    }
    Some(Lu {
        lu: a,
        perm,
        swaps,
        prec,
    })
}

impl Lu {
    pub fn det(&self) -> Complex {
        let n = self.lu.len();
        let mut d = Complex::with_val(self.prec, (1, 0));
        for i in 0..n {
            d *= &self.lu[i][i];
        }
        if self.swaps % 2 == 1 {
            d = -d;
        }
        d
    }

    pub fn solve(&self, b: &[Complex]) -> Vec<Complex> {
        let n = self.lu.len();
        let mut y: Vec<Complex> = self.perm.iter().map(|&i| b[i].clone()).collect();
        for r in 1..n {
            for c in 0..r {
                let d = (&self.lu[r][c] * &y[c]).complete((self.prec, self.prec));
                y[r] -= d;
            }
        }
        for r in (0..n).rev() {
            for c in r + 1..n {
                let d = (&self.lu[r][c] * &y[c]).complete((self.prec, self.prec));
                y[r] -= d;
            }
            y[r] /= &self.lu[r][r];
        }
        y
    }

    pub fn inverse(&self) -> CMat {
        let n = self.lu.len();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let e: Vec<Complex> = (0..n)
                .map(|i| Complex::with_val(self.prec, ((i == j) as i64, 0)))
                .collect();
            cols.push(self.solve(&e));
        }
        // cols[j] is the j-th column of the inverse
        (0..n)
            .map(|i| (0..n).map(|j| cols[j][i].clone()).collect())
            .collect()
    }
}

pub fn det(m: &CMat) -> Option<Complex> {
    lu(m).map(|f| f.det())
}

pub fn mat_vec(m: &CMat, v: &[Complex]) -> Vec<Complex> {
    let prec = m[0][0].prec().0;
    m.iter()
        .map(|row| {
            let mut acc = Complex::with_val(prec, (0, 0));
            for (a, b) in row.iter().zip(v) {
                acc += (a * b).complete((prec, prec));
            }
            acc
        })
        .collect()
}

/// Max |m[i][j] - m[j][i]| over all pairs.
pub fn asymmetry(m: &CMat) -> Float {
    let prec = m[0][0].prec().0;
    let mut worst = Float::with_val(prec, 0);
    for i in 0..m.len() {
        for j in 0..i {
            let d = abs(&(&m[i][j] - &m[j][i]).complete((prec, prec)));
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prec::Prec;

    #[test]
    fn solve_and_det_2x2() {
        let p = Prec(128);
        let m = vec![
            vec![p.cplx(2, 1), p.cplx(0, -1)],
            vec![p.cplx(1, 0), p.cplx(3, 2)],
        ];
        let f = lu(&m).unwrap();
        // det = (2+i)(3+2i) - (-i)(1) = 4 + 8i
        let d = f.det();
        assert!(crate::prec::cdist(&d, &p.cplx(4, 8)) < p.tol());
        let b = vec![p.cplx(1, 1), p.cplx(0, 2)];
        let x = f.solve(&b);
        let back = mat_vec(&m, &x);
        for (u, v) in back.iter().zip(&b) {
            assert!(crate::prec::cdist(u, v) < p.tol());
        }
        let inv = f.inverse();
        let prod = [
            mat_vec(&inv, &[m[0][0].clone(), m[1][0].clone()]),
            mat_vec(&inv, &[m[0][1].clone(), m[1][1].clone()]),
        ];
        assert!(crate::prec::cdist(&prod[0][0], &p.one()) < p.tol());
        assert!(crate::prec::cdist(&prod[1][1], &p.one()) < p.tol());
    }

    #[test]
    fn singular_matrix_detected() {
        let p = Prec(64);
        let m = vec![
            vec![p.cplx(1, 0), p.cplx(2, 0)],
            vec![p.cplx(2, 0), p.cplx(4, 0)],
        ];
        assert!(lu(&m).is_none());
    }
}
