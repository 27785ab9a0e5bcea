//! Combinatorial flattenings: integer solutions of `A f + B f'' = eta`
//! (optionally also `C.f + D.f'' = eta_lambda`), solved exactly via Hermite
//! normal form, with a deterministic minimum-norm representative.

use rug::Integer;

use crate::nzio::NzDatum;
use crate::qmat::{self, ZMat};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flattening {
    pub f: Vec<i64>,
    pub fp: Vec<i64>,
    pub fpp: Vec<i64>,
    pub longitude_compatible: bool,
}

impl Flattening {
    pub fn from_pair(f: Vec<i64>, fpp: Vec<i64>, longitude_compatible: bool) -> Self {
        let fp = f.iter().zip(&fpp).map(|(&a, &c)| 1 - a - c).collect();
        Flattening {
            f,
            fp,
            fpp,
            longitude_compatible,
        }
    }

    /// Exact check of the defining equations against a datum.
    pub fn satisfies(&self, datum: &NzDatum) -> bool {
        let n = datum.n;
        if self.f.len() != n || self.fpp.len() != n {
            return false;
        }
        if !(0..n).all(|i| self.f[i] + self.fp[i] + self.fpp[i] == 1) {
            return false;
        }
        let ok = (0..n).all(|i| {
            let s: i64 = (0..n)
                .map(|j| datum.a[i][j] * self.f[j] + datum.b[i][j] * self.fpp[j])
                .sum();
            s == datum.eta[i]
        });
        if !ok {
            return false;
        }
        if self.longitude_compatible {
            let Some(lon) = &datum.longitude else {
                return false;
            };
            let s: i64 = (0..n)
                .map(|j| lon.two_c[j] * self.f[j] + lon.two_d[j] * self.fpp[j])
                .sum();
            if s != lon.two_eta_lambda {
                return false;
            }
        }
        true
    }
}

/// The constraint system `M x = rhs` over the integers, where
/// `x = (f, f'')` and `M = (A B)` plus an optional doubled longitude row.
fn constraint_system(datum: &NzDatum, require_longitude: bool) -> Result<(ZMat, Vec<Integer>)> {
    let mut m: Vec<Vec<i64>> = datum
        .a
        .iter()
        .zip(&datum.b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    let mut rhs: Vec<i64> = datum.eta.clone();
    if require_longitude {
        let lon = datum.longitude.as_ref().ok_or_else(|| {
            Error::SchemaError("longitude".into(), "longitude data required".into())
        })?;
        m.push(lon.two_c.iter().chain(&lon.two_d).copied().collect());
        rhs.push(lon.two_eta_lambda);
    }
    Ok((
        qmat::to_big(&m),
        rhs.into_iter().map(Integer::from).collect(),
    ))
}

/// One integer solution plus a basis of the kernel lattice of `M x = rhs`.
pub fn solve_lattice(m: &ZMat, rhs: &[Integer]) -> Result<(Vec<Integer>, Vec<Vec<Integer>>)> {
    let cols = m[0].len();
    let mt = qmat::transpose(m);
    let (ht, u) = qmat::hnf(&mt); // U * M^T = H^T, so M * U^T = H (column form)
    let h = qmat::transpose(&ht);
    let ut = qmat::transpose(&u);
    // forward-substitute H y = rhs over the pivot columns
    let mut y = vec![Integer::new(); cols];
    let mut rem: Vec<Integer> = rhs.to_vec();
    let mut pivots = Vec::new();
    let mut col = 0usize;
    for row in 0..m.len() {
        while col < cols && h[row][col] == 0 {
            col += 1;
        }
        if col == cols {
            if rem[row..].iter().any(|r| *r != 0) {
                return Err(Error::NoIntegerSolution);
            }
            break;
        }
        let (q, r) = rem[row].clone().div_rem(h[row][col].clone());
        if r != 0 {
            return Err(Error::NoIntegerSolution);
        }
        for r2 in 0..m.len() {
            rem[r2] -= Integer::from(&q * &h[r2][col]);
        }
        y[col] = q;
        pivots.push(col);
        col += 1;
    }
    if rem.iter().any(|r| *r != 0) {
        return Err(Error::NoIntegerSolution);
    }
    let x: Vec<Integer> = (0..cols)
        .map(|i| (0..cols).map(|k| Integer::from(&ut[i][k] * &y[k])).sum())
        .collect();
    let kernel: Vec<Vec<Integer>> = (0..cols)
        .filter(|k| !pivots.contains(k))
        .map(|k| (0..cols).map(|i| ut[i][k].clone()).collect())
        .collect();
    Ok((x, kernel))
}

fn l1_norm(v: &[Integer]) -> Integer {
    v.iter().map(|x| x.clone().abs()).sum()
}

/// Deterministic representative: greedy descent over the kernel basis, then
/// an exhaustive +-1 coefficient box, ordered by (l1 norm, lexicographic).
fn reduce_min_norm(x: Vec<Integer>, kernel: &[Vec<Integer>]) -> Vec<Integer> {
    let better = |a: &[Integer], an: &Integer, b: &[Integer], bn: &Integer| -> bool {
        match an.cmp(bn) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => a < b,
        }
    };
    let mut best = x;
    let mut best_norm = l1_norm(&best);
    let mut improved = true;
    while improved {
        improved = false;
        for kv in kernel {
            for sign in [1i64, -1] {
                let cand: Vec<Integer> = best
                    .iter()
                    .zip(kv)
                    .map(|(a, b)| a.clone() + b.clone() * sign)
                    .collect();
                let cn = l1_norm(&cand);
                if better(&cand, &cn, &best, &best_norm) {
                    best = cand;
                    best_norm = cn;
                    improved = true;
                }
            }
        }
    }
    if !kernel.is_empty() && kernel.len() <= 12 {
        let k = kernel.len();
        let base = best.clone();
        let mut coeffs = vec![-1i64; k];
        loop {
            let cand: Vec<Integer> = (0..base.len())
                .map(|i| {
                    let mut v = base[i].clone();
                    for (c, kv) in coeffs.iter().zip(kernel) {
                        v += kv[i].clone() * *c;
                    }
                    v
                })
                .collect();
            let cn = l1_norm(&cand);
            if better(&cand, &cn, &best, &best_norm) {
                best = cand;
                best_norm = cn;
            }
            let mut i = 0;
            loop {
                if i == k {
                    return best;
                }
                coeffs[i] += 1;
                if coeffs[i] <= 1 {
                    break;
                }
                coeffs[i] = -1;
                i += 1;
            }
        }
    }
    best
}

/// Solve for a combinatorial flattening of the datum.
pub fn solve_flattening(datum: &NzDatum, require_longitude: bool) -> Result<Flattening> {
    let n = datum.n;
    let (m, rhs) = constraint_system(datum, require_longitude)?;
    let (x, kernel) = solve_lattice(&m, &rhs)?;
    let x = reduce_min_norm(x, &kernel);
    let small: Vec<i64> = x
        .iter()
        .map(|v| v.to_i64().expect("flattening entry overflowed i64"))
        .collect();
    let flat = Flattening::from_pair(small[..n].to_vec(), small[n..].to_vec(), require_longitude);
    debug_assert!(flat.satisfies(datum));
    Ok(flat)
}

/// Kernel lattice basis of the flattening system (used for flattening swaps).
pub fn flattening_kernel(datum: &NzDatum, require_longitude: bool) -> Result<Vec<Vec<i64>>> {
    let (m, rhs) = constraint_system(datum, require_longitude)?;
    debug_assert_eq!(m[0].len(), 2 * datum.n);
    let (_, kernel) = solve_lattice(&m, &rhs)?;
    Ok(kernel
        .into_iter()
        .map(|v| v.iter().map(|x| x.to_i64().unwrap()).collect())
        .collect())
}

/// A second valid flattening differing from `flat` by one kernel vector.
pub fn alternate_flattening(datum: &NzDatum, flat: &Flattening) -> Result<Flattening> {
    let kernel = flattening_kernel(datum, flat.longitude_compatible)?;
    let n = datum.n;
    let kv = kernel
        .iter()
        .find(|v| v.iter().any(|&x| x != 0))
        .ok_or(Error::NoIntegerSolution)?;
    let f: Vec<i64> = (0..n).map(|i| flat.f[i] + kv[i]).collect();
    let fpp: Vec<i64> = (0..n).map(|i| flat.fpp[i] + kv[n + i]).collect();
    let alt = Flattening::from_pair(f, fpp, flat.longitude_compatible);
    debug_assert!(alt.satisfies(datum));
    Ok(alt)
}
