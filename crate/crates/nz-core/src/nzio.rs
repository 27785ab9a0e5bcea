//! Parsing and validation of triangulation gluing data, the `nzdatum-v1`
//! JSON format, and derivation of the Neumann-Zagier datum.
//!
//! Gluing tables hold one row per edge of the triangulation (entries count
//! edge incidences, so they lie in {0,1,2} and every column sums to 2),
//! followed by a meridian row and, optionally, a longitude row. Dropping one
//! redundant edge row and substituting the meridian row yields the square
//! matrices `A = G - G'`, `B = G'' - G'` and the vector `eta`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::qmat::{self, IMat};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GluingTables {
    pub n: usize,
    pub g: IMat,
    pub gp: IMat,
    pub gpp: IMat,
}

impl GluingTables {
    pub fn has_longitude(&self) -> bool {
        self.g.len() == self.n + 2
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let rows = self.g.len();
        if rows != n + 1 && rows != n + 2 {
            return Err(Error::SchemaError(
                "gluing".into(),
                format!("expected {} or {} rows, got {rows}", n + 1, n + 2),
            ));
        }
        for (name, t) in [("g", &self.g), ("gp", &self.gp), ("gpp", &self.gpp)] {
            if t.len() != rows || t.iter().any(|r| r.len() != n) {
                return Err(Error::SchemaError(
                    format!("gluing.{name}"),
                    "ragged or mismatched table".into(),
                ));
            }
            for (i, r) in t.iter().take(n).enumerate() {
                if r.iter().any(|&e| !(0..=2).contains(&e)) {
                    return Err(Error::IncidenceViolation(format!(
                        "edge row {} of {name} has an entry outside {{0,1,2}}",
                        i + 1
                    )));
                }
            }
            for j in 0..n {
                let s: i64 = (0..n).map(|i| t[i][j]).sum();
                if s != 2 {
                    return Err(Error::IncidenceViolation(format!(
                        "column {} of {name} sums to {s}, expected 2",
                        j + 1
                    )));
                }
            }
        }
        let merid_zero =
            (0..n).all(|j| self.g[n][j] == 0 && self.gp[n][j] == 0 && self.gpp[n][j] == 0);
        if merid_zero {
            return Err(Error::SchemaError(
                "gluing".into(),
                "meridian row is zero".into(),
            ));
        }
        Ok(())
    }
}

/// Longitude data, stored doubled so that half-integers stay exact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Longitude {
    pub two_c: Vec<i64>,
    pub two_d: Vec<i64>,
    pub two_eta_lambda: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NzDatum {
    pub n: usize,
    pub a: IMat,
    pub b: IMat,
    pub eta: Vec<i64>,
    /// 1-based index of the edge whose row was replaced by the meridian.
    pub dropped_edge: usize,
    pub longitude: Option<Longitude>,
}

impl NzDatum {
    /// 0-based index of the meridian row (the slot of the dropped edge).
    pub fn meridian_row(&self) -> usize {
        self.dropped_edge - 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.a.len() != n || self.b.len() != n || self.eta.len() != n {
            return Err(Error::SchemaError("nz".into(), "dimension mismatch".into()));
        }
        if !(1..=n).contains(&self.dropped_edge) {
            return Err(Error::SchemaError(
                "nz.dropped_edge".into(),
                format!("must be in 1..={n}"),
            ));
        }
        if !qmat::ab_transpose_symmetric(&self.a, &self.b) {
            return Err(Error::SymplecticViolation("A B^T != B A^T".into()));
        }
        let ab: IMat = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
            .collect();
        let rk = qmat::rank(&ab);
        if rk != n {
            return Err(Error::SymplecticViolation(format!(
                "(A B) has rank {rk}, expected {n}"
            )));
        }
        let m = self.meridian_row();
        let mrow: Vec<i64> = self.a[m].iter().chain(&self.b[m]).copied().collect();
        if mrow.iter().all(|&x| x == 0) {
            return Err(Error::SchemaError(
                "nz".into(),
                "meridian row is zero".into(),
            ));
        }
        let g = mrow.iter().fold(0i64, |acc, &x| gcd(acc, x));
        if g != 1 {
            return Err(Error::SchemaError(
                "nz".into(),
                format!("meridian row is not primitive (gcd {g})"),
            ));
        }
        if let Some(lon) = &self.longitude {
            if lon.two_c.len() != n || lon.two_d.len() != n {
                return Err(Error::SchemaError(
                    "longitude".into(),
                    "dimension mismatch".into(),
                ));
            }
            // A_m . D - B_m . C = 1, i.e. doubled: A_m . 2D - B_m . 2C = 2
            let pair: i64 = (0..n)
                .map(|j| self.a[m][j] * lon.two_d[j] - self.b[m][j] * lon.two_c[j])
                .sum();
            if pair != 2 {
                return Err(Error::SymplecticViolation(format!(
                    "meridian-longitude pairing is {}, expected 1",
                    (pair as f64) / 2.0
                )));
            }
        }
        Ok(())
    }

    /// Stable fingerprint of the integer content (FNV-1a over a canonical
    /// byte encoding); used by move certificates.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: i64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.n as i64);
        eat(self.dropped_edge as i64);
        for row in self.a.iter().chain(&self.b) {
            row.iter().for_each(|&x| eat(x));
        }
        self.eta.iter().for_each(|&x| eat(x));
        if let Some(l) = &self.longitude {
            l.two_c.iter().chain(&l.two_d).for_each(|&x| eat(x));
            eat(l.two_eta_lambda);
        }
        format!("{h:016x}")
    }
}

/// Exact symplectic diagnostics for a datum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymplecticReport {
    /// Is `A B^T` symmetric?
    pub ab_t_symmetric: bool,
    /// Rank of the `N x 2N` block `(A B)`.
    pub rank_ab: usize,
    /// Exact determinant of `B`.
    pub det_b: rug::Rational,
    /// Symmetry of `B^{-1} A` (present only when `det B != 0`).
    pub b_inv_a_symmetric: Option<bool>,
}

impl SymplecticReport {
    pub fn ok(&self, n: usize) -> bool {
        self.ab_t_symmetric && self.rank_ab == n && self.b_inv_a_symmetric.unwrap_or(true)
    }
}

/// Report the symplectic structure of the datum over exact rationals.
pub fn check_symplectic(datum: &NzDatum) -> SymplecticReport {
    let n = datum.n;
    let ab: IMat = datum
        .a
        .iter()
        .zip(&datum.b)
        .map(|(ra, rb)| ra.iter().chain(rb).copied().collect())
        .collect();
    let det_b = qmat::det_rational(&datum.b);
    let b_inv_a_symmetric = if det_b != 0 {
        let binv = qmat::inverse_rational(&datum.b).expect("det != 0");
        let mut sym = true;
        'outer: for i in 0..n {
            for j in 0..i {
                let mut eij = rug::Rational::new();
                let mut eji = rug::Rational::new();
                for k in 0..n {
                    eij += &binv[i][k] * rug::Rational::from(datum.a[k][j]);
                    eji += &binv[j][k] * rug::Rational::from(datum.a[k][i]);
                }
                if eij != eji {
                    sym = false;
                    break 'outer;
                }
            }
        }
        Some(sym)
    } else {
        None
    };
    SymplecticReport {
        ab_t_symmetric: qmat::ab_transpose_symmetric(&datum.a, &datum.b),
        rank_ab: qmat::rank(&ab),
        det_b,
        b_inv_a_symmetric,
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Build the Neumann-Zagier datum from gluing tables, replacing the row of
/// `dropped_edge` (1-based) by the meridian row.
pub fn derive_nz(tables: &GluingTables, dropped_edge: usize) -> Result<NzDatum> {
    tables.validate()?;
    let n = tables.n;
    if !(1..=n).contains(&dropped_edge) {
        return Err(Error::SchemaError(
            "dropped_edge".into(),
            format!("must be in 1..={n}"),
        ));
    }
    let row_of = |i: usize| if i == dropped_edge - 1 { n } else { i };
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    for i in 0..n {
        let r = row_of(i);
        a.push((0..n).map(|j| tables.g[r][j] - tables.gp[r][j]).collect());
        b.push((0..n).map(|j| tables.gpp[r][j] - tables.gp[r][j]).collect());
        let gp_sum: i64 = tables.gp[r].iter().sum();
        eta.push(if r == n { -gp_sum } else { 2 - gp_sum });
    }
    let longitude = tables.has_longitude().then(|| {
        let r = n + 1;
        Longitude {
            two_c: (0..n).map(|j| tables.g[r][j] - tables.gp[r][j]).collect(),
            two_d: (0..n).map(|j| tables.gpp[r][j] - tables.gp[r][j]).collect(),
            two_eta_lambda: -tables.gp[r].iter().sum::<i64>(),
        }
    });
    let datum = NzDatum {
        n,
        a,
        b,
        eta,
        dropped_edge,
        longitude,
    };
    datum.validate()?;
    Ok(datum)
}

// ---------------------------------------------------------------------------
// nzdatum-v1 JSON schema
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct GluingJson {
    pub g: Vec<Vec<i128>>,
    pub gp: Vec<Vec<i128>>,
    pub gpp: Vec<Vec<i128>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NzJson {
    pub a: Vec<Vec<i128>>,
    pub b: Vec<Vec<i128>>,
    pub eta: Vec<i128>,
    pub dropped_edge: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LongitudeJson {
    pub two_c: Vec<i128>,
    pub two_d: Vec<i128>,
    pub two_eta_lambda: i128,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ShapeJson {
    pub re: String,
    pub im: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FlatteningJson {
    pub f: Vec<i64>,
    pub fpp: Vec<i64>,
}

/// One `nzdatum-v1` document. Either the gluing tables or the direct `nz`
/// block (or both) must be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatumFile {
    pub schema: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gluing: Option<GluingJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nz: Option<NzJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub longitude: Option<LongitudeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shapes: Option<Vec<ShapeJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flattening: Option<FlatteningJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

fn narrow(path: &str, m: &[Vec<i128>]) -> Result<IMat> {
    m.iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .enumerate()
                .map(|(j, &x)| {
                    i64::try_from(x)
                        .map_err(|_| Error::IntegerOverflow(format!("{path}[{i}][{j}]")))
                })
                .collect()
        })
        .collect()
}

fn narrow_vec(path: &str, v: &[i128]) -> Result<Vec<i64>> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| i64::try_from(x).map_err(|_| Error::IntegerOverflow(format!("{path}[{i}]"))))
        .collect()
}

fn widen(m: &IMat) -> Vec<Vec<i128>> {
    m.iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect()
}

impl DatumFile {
    pub fn gluing_tables(&self) -> Result<Option<GluingTables>> {
        let Some(g) = &self.gluing else {
            return Ok(None);
        };
        let t = GluingTables {
            n: self.n,
            g: narrow("gluing.g", &g.g)?,
            gp: narrow("gluing.gp", &g.gp)?,
            gpp: narrow("gluing.gpp", &g.gpp)?,
        };
        t.validate()?;
        Ok(Some(t))
    }

    /// Resolve the Neumann-Zagier datum: prefer an explicit `nz` block, else
    /// derive it from the gluing tables (dropping the last edge by default).
    pub fn datum(&self) -> Result<NzDatum> {
        if let Some(nz) = &self.nz {
            let longitude = match &self.longitude {
                Some(l) => Some(Longitude {
                    two_c: narrow_vec("longitude.two_c", &l.two_c)?,
                    two_d: narrow_vec("longitude.two_d", &l.two_d)?,
                    two_eta_lambda: i64::try_from(l.two_eta_lambda)
                        .map_err(|_| Error::IntegerOverflow("longitude.two_eta_lambda".into()))?,
                }),
                None => None,
            };
            let datum = NzDatum {
                n: self.n,
                a: narrow("nz.a", &nz.a)?,
                b: narrow("nz.b", &nz.b)?,
                eta: narrow_vec("nz.eta", &nz.eta)?,
                dropped_edge: nz.dropped_edge,
                longitude,
            };
            datum.validate()?;
            return Ok(datum);
        }
        match self.gluing_tables()? {
            Some(t) => derive_nz(&t, self.n),
            None => Err(Error::SchemaError(
                "nz|gluing".into(),
                "document carries neither gluing tables nor an nz block".into(),
            )),
        }
    }

    pub fn with_datum(mut self, d: &NzDatum) -> Self {
        self.nz = Some(NzJson {
            a: widen(&d.a),
            b: widen(&d.b),
            eta: d.eta.iter().map(|&x| x as i128).collect(),
            dropped_edge: d.dropped_edge,
        });
        self.longitude = d.longitude.as_ref().map(|l| LongitudeJson {
            two_c: l.two_c.iter().map(|&x| x as i128).collect(),
            two_d: l.two_d.iter().map(|&x| x as i128).collect(),
            two_eta_lambda: l.two_eta_lambda as i128,
        });
        self
    }
}

pub fn load_datum(path: impl AsRef<Path>) -> Result<DatumFile> {
    let text = std::fs::read_to_string(path)?;
    let doc: DatumFile = serde_json::from_str(&text)?;
    if doc.schema != "nzdatum-v1" {
        return Err(Error::SchemaError(
            "schema".into(),
            format!("unsupported schema `{}`", doc.schema),
        ));
    }
    Ok(doc)
}

pub fn save_datum(doc: &DatumFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, canonical_json(doc)?)?;
    Ok(())
}

/// Canonical serialized form (used for byte comparisons and file output).
pub fn canonical_json(doc: &DatumFile) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Figure-eight gluing tables: edge rows 2Z+Z''+2W+W'' and
    /// 2Z'+Z''+2W'+W'', meridian -Z'+W, longitude -2Z+2Z'.
    pub fn fig8_tables() -> GluingTables {
        GluingTables {
            n: 2,
            g: vec![vec![2, 2], vec![0, 0], vec![0, 1], vec![-2, 0]],
            gp: vec![vec![0, 0], vec![2, 2], vec![-1, 0], vec![2, 0]],
            gpp: vec![vec![1, 1], vec![1, 1], vec![0, 0], vec![0, 0]],
        }
    }

    #[test]
    fn fig8_derivation_matches_known_matrices() {
        let t = fig8_tables();
        let d = derive_nz(&t, 2).unwrap();
        assert_eq!(d.a, vec![vec![2, 2], vec![1, 1]]);
        assert_eq!(d.b, vec![vec![1, 1], vec![1, 0]]);
        assert_eq!(d.eta, vec![2, 1]);
        let lon = d.longitude.as_ref().unwrap();
        assert_eq!(lon.two_c, vec![-4, 0]);
        assert_eq!(lon.two_d, vec![-2, 0]);
        assert_eq!(lon.two_eta_lambda, -2);
    }

    #[test]
    fn any_dropped_edge_gives_valid_datum() {
        let t = fig8_tables();
        for e in 1..=2 {
            let d = derive_nz(&t, e).unwrap();
            d.validate().unwrap();
        }
    }

    #[test]
    fn incidence_violation_detected() {
        let mut t = fig8_tables();
        t.g[0][0] = 3; // breaks both the {0,1,2} range and the column sum
        assert!(matches!(
            derive_nz(&t, 2),
            Err(Error::IncidenceViolation(_))
        ));
    }

    #[test]
    fn zero_meridian_rejected() {
        let mut t = fig8_tables();
        t.g[2] = vec![0, 0];
        t.gp[2] = vec![0, 0];
        t.gpp[2] = vec![0, 0];
        assert!(matches!(derive_nz(&t, 2), Err(Error::SchemaError(..))));
    }

    #[test]
    fn symplectic_report_on_fig8() {
        let d = derive_nz(&fig8_tables(), 2).unwrap();
        let rep = check_symplectic(&d);
        assert!(rep.ab_t_symmetric);
        assert_eq!(rep.rank_ab, 2);
        assert_eq!(rep.det_b, -1);
        assert_eq!(rep.b_inv_a_symmetric, Some(true));
        assert!(rep.ok(2));

        // identity matrices are trivially symplectic
        let ident = NzDatum {
            n: 2,
            a: vec![vec![1, 0], vec![0, 1]],
            b: vec![vec![1, 0], vec![0, 1]],
            eta: vec![0, 0],
            dropped_edge: 2,
            longitude: None,
        };
        let rep = check_symplectic(&ident);
        assert!(rep.ab_t_symmetric && rep.rank_ab == 2);

        // negating one column of B breaks the structure
        let mut bad = d.clone();
        for row in &mut bad.b {
            row[0] = -row[0];
        }
        let rep = check_symplectic(&bad);
        assert!(!rep.ok(2));
    }

    #[test]
    fn corrupted_symplectic_detected() {
        let t = fig8_tables();
        let mut d = derive_nz(&t, 2).unwrap();
        for row in &mut d.b {
            row[0] = -row[0];
        }
        assert!(matches!(
            d.validate(),
            Err(Error::SymplecticViolation(_)) | Err(Error::SchemaError(..))
        ));
    }

    #[test]
    fn json_round_trip_is_identity() {
        let t = fig8_tables();
        let d = derive_nz(&t, 2).unwrap();
        let doc = DatumFile {
            schema: "nzdatum-v1".into(),
            n: 2,
            gluing: Some(GluingJson {
                g: widen(&t.g),
                gp: widen(&t.gp),
                gpp: widen(&t.gpp),
            }),
            nz: None,
            longitude: None,
            shapes: None,
            flattening: None,
            meta: None,
        }
        .with_datum(&d);
        let dir = std::env::temp_dir().join("nzio_roundtrip_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("a.json");
        let p2 = dir.join("b.json");
        save_datum(&doc, &p1).unwrap();
        let doc2 = load_datum(&p1).unwrap();
        save_datum(&doc2, &p2).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "canonicalized round trip must be byte-identical"
        );
        assert_eq!(doc2.datum().unwrap(), d);
    }

    #[test]
    fn oversized_integer_reported() {
        let mut doc = DatumFile {
            schema: "nzdatum-v1".into(),
            n: 2,
            gluing: None,
            nz: Some(NzJson {
                a: vec![vec![i128::from(i64::MAX) + 1, 2], vec![1, 1]],
                b: vec![vec![1, 1], vec![1, 0]],
                eta: vec![2, 1],
                dropped_edge: 2,
            }),
            longitude: None,
            shapes: None,
            flattening: None,
            meta: None,
        };
        assert!(matches!(doc.datum(), Err(Error::IntegerOverflow(_))));
        doc.nz.as_mut().unwrap().a[0][0] = 2;
        doc.datum().unwrap();
    }
}
