//! `nz-loops`: compute perturbative invariants of a cusped 3-manifold from a
//! Neumann-Zagier datum file and exercise the triangulation-move calculus.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rug::{Complex, Float};
use serde_json::{json, Map, Value};

use nz_core::flatten::{solve_flattening, Flattening};
use nz_core::gluesolve::{
    certify_lift, continue_in_m, longitude_eigenvalue, solve_shapes, NewtonMode, ShapeAssignment,
};
use nz_core::invariants::{
    complex_volume, invariance_harness, loop_invariants, two_loop_closed_form, HarnessTolerances,
};
use nz_core::moves::{apply_move, normalize_quad, Move};
use nz_core::nzio::{
    self, canonical_json, load_datum, save_datum, DatumFile, FlatteningJson, NzDatum, ShapeJson,
};
use nz_core::prec::{float_to_decimal, Prec};
use nz_core::qmat;
use nz_core::series::SeriesBounds;

#[derive(Parser)]
#[command(
    name = "nz-loops",
    version,
    about = "perturbative invariants from Neumann-Zagier data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Input nzdatum-v1 JSON document.
    #[arg(long, global = true)]
    datum: Option<PathBuf>,
    /// Working precision in bits (env: NZ_LOOPS_PRECISION).
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Output decimal digits.
    #[arg(long, global = true, default_value_t = 30)]
    digits: usize,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Meridian eigenvalue m (e.g. "1", "1.1", "0.9+0.1i").
    #[arg(long, global = true, default_value = "1")]
    m: String,
}

#[derive(Subcommand)]
enum Command {
    /// Parse gluing tables, derive and validate the NZ datum, emit the full
    /// document.
    Ingest {
        /// Edge row to drop (1-based); defaults to the last edge.
        #[arg(long)]
        dropped_edge: Option<usize>,
    },
    /// Solve the flattening equations and attach the result.
    Flatten {
        /// Also impose the longitude constraint.
        #[arg(long)]
        longitude: bool,
    },
    /// Rotate quads until det B is nonzero.
    #[command(name = "normalize-quad")]
    NormalizeQuad,
    /// Solve the (deformed) gluing equations by Newton iteration.
    Solve {
        /// Newton mode: "log" targets the standard lift, "mult" freezes the
        /// lattice offset of the initial guess.
        #[arg(long, default_value = "log")]
        newton: String,
    },
    /// Track the solution along a path of meridian eigenvalues.
    Continue {
        /// Comma-separated list of m values.
        #[arg(long = "m-path")]
        m_path: String,
    },
    /// Compute S0, tau, and the loop invariants S_n.
    Invariants {
        /// Highest loop order (2..=4).
        #[arg(long, default_value_t = 3)]
        loops: usize,
        /// Re-verify the truncation bounds by recomputing S_2 at doubled
        /// x-degree.
        #[arg(long)]
        verify_truncation: bool,
    },
    /// Run the move-invariance harness against a JSON move list.
    Check {
        #[arg(long)]
        moves: PathBuf,
    },
    /// Apply a single move and emit the transformed datum plus certificate.
    Move {
        /// One of rotate | edge | meridian | twothree | flattening-swap.
        #[arg(long)]
        kind: String,
        /// Tetrahedron index for rotations (1-based).
        #[arg(long)]
        tet: Option<usize>,
        /// Rotation direction (fwd | bwd) or 2-3 direction (expand | collapse).
        #[arg(long)]
        direction: Option<String>,
        /// Row index for edge changes and meridian moves (1-based).
        #[arg(long)]
        row: Option<usize>,
        /// Sign of the meridian move (+1 | -1).
        #[arg(long)]
        sign: Option<i8>,
        /// Comma-separated site tetrahedra for the 2-3 move.
        #[arg(long)]
        tets: Option<String>,
        /// Central edge row for the 3-to-2 direction.
        #[arg(long)]
        central_row: Option<usize>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let prec = validate_precision(&cli.common)?;
    match &cli.command {
        Command::Ingest { dropped_edge } => ingest(&cli.common, prec, *dropped_edge),
        Command::Flatten { longitude } => flatten(&cli.common, prec, *longitude),
        Command::NormalizeQuad => normalize(&cli.common, prec),
        Command::Solve { newton } => solve(&cli.common, prec, newton),
        Command::Continue { m_path } => continuation(&cli.common, prec, m_path),
        Command::Invariants {
            loops,
            verify_truncation,
        } => invariants(&cli.common, prec, *loops, *verify_truncation),
        Command::Check { moves } => check(&cli.common, prec, moves),
        Command::Move {
            kind,
            tet,
            direction,
            row,
            sign,
            tets,
            central_row,
        } => {
            let mv = build_move(
                kind,
                *tet,
                direction.as_deref(),
                *row,
                *sign,
                tets.as_deref(),
                *central_row,
            )?;
            do_move(&cli.common, prec, &mv)
        }
    }
}

fn resolve_precision(common: &Common) -> u32 {
    common
        .precision
        .or_else(|| {
            std::env::var("NZ_LOOPS_PRECISION")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(256)
}

fn validate_precision(common: &Common) -> Result<Prec> {
    let precision = resolve_precision(common);
    if precision < 64 {
        bail!(nz_core::Error::PrecisionTooLow(format!(
            "{precision} bits; at least 64 required"
        )));
    }
    let capacity = (precision as f64 * std::f64::consts::LOG10_2) as isize - 19;
    if (common.digits as isize) > capacity {
        bail!(nz_core::Error::PrecisionTooLow(format!(
            "{} bits provide ~{} reliable digits, {} requested; raise --precision",
            precision,
            capacity.max(0),
            common.digits
        )));
    }
    Ok(Prec(precision))
}

fn parse_complex(s: &str, prec: Prec) -> Result<Complex> {
    let t = s.trim().replace(' ', "");
    let p = prec.bits();
    let parse_f = |x: &str| -> Result<Float> {
        prec.parse(x)
            .ok_or_else(|| anyhow!("cannot parse `{x}` as a decimal number"))
    };
    if let Some(body) = t.strip_suffix('i') {
        // forms: "bi", "a+bi", "a-bi"
        for (k, c) in body.char_indices().rev() {
            if (c == '+' || c == '-') && k != 0 {
                let prev = body.as_bytes()[k - 1] as char;
                if prev == 'e' || prev == 'E' {
                    continue;
                }
                let re = parse_f(&body[..k])?;
                let im_str = &body[k..];
                let im = if im_str == "+" || im_str == "-" {
                    parse_f(&format!("{im_str}1"))?
                } else {
                    parse_f(im_str)?
                };
                return Ok(Complex::with_val(p, (re, im)));
            }
        }
        let im = if body.is_empty() {
            parse_f("1")?
        } else {
            parse_f(body)?
        };
        return Ok(Complex::with_val(p, (Float::with_val(p, 0), im)));
    }
    Ok(Complex::with_val(p, (parse_f(&t)?, Float::with_val(p, 0))))
}

fn load(common: &Common) -> Result<(DatumFile, NzDatum)> {
    let path = common
        .datum
        .as_ref()
        .ok_or_else(|| anyhow!("--datum <path> is required"))?;
    let doc = load_datum(path).with_context(|| format!("loading {}", path.display()))?;
    let datum = doc.datum()?;
    Ok((doc, datum))
}

fn initial_shapes(doc: &DatumFile, n: usize, prec: Prec) -> Result<ShapeAssignment> {
    let p = prec.bits();
    match &doc.shapes {
        Some(shapes) if shapes.len() == n => {
            let z: Result<Vec<Complex>> = shapes
                .iter()
                .map(|s| {
                    let re = prec
                        .parse(&s.re)
                        .ok_or_else(|| anyhow!("bad shape real part `{}`", s.re))?;
                    let im = prec
                        .parse(&s.im)
                        .ok_or_else(|| anyhow!("bad shape imaginary part `{}`", s.im))?;
                    Ok(Complex::with_val(p, (re, im)))
                })
                .collect();
            Ok(ShapeAssignment::from_shapes(z?, prec.zero(), prec))
        }
        _ => Ok(ShapeAssignment::default_guess(n, prec)),
    }
}

fn file_flattening(doc: &DatumFile, datum: &NzDatum) -> Option<Flattening> {
    let fj = doc.flattening.as_ref()?;
    let lon_ok = datum.longitude.is_some();
    let fl = Flattening::from_pair(fj.f.clone(), fj.fpp.clone(), lon_ok);
    if fl.satisfies(datum) {
        return Some(fl);
    }
    let fl = Flattening::from_pair(fj.f.clone(), fj.fpp.clone(), false);
    fl.satisfies(datum).then_some(fl)
}

fn cnum(z: &Complex, digits: usize) -> Value {
    json!({
        "re": float_to_decimal(&Float::with_val(z.prec().0, z.real()), digits),
        "im": float_to_decimal(&Float::with_val(z.prec().0, z.imag()), digits),
    })
}

fn emit(common: &Common, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match &common.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_doc(common: &Common, doc: &DatumFile) -> Result<()> {
    match &common.out {
        Some(path) => {
            save_datum(doc, path)?;
        }
        None => print!("{}", canonical_json(doc)?),
    }
    Ok(())
}

fn report_header(common: &Common) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("precision_bits".into(), json!(resolve_precision(common)));
    m.insert("digits".into(), json!(common.digits));
    m
}

fn ingest(common: &Common, _prec: Prec, dropped_edge: Option<usize>) -> Result<()> {
    let path = common
        .datum
        .as_ref()
        .ok_or_else(|| anyhow!("--datum <path> is required"))?;
    let doc = load_datum(path)?;
    let tables = doc
        .gluing_tables()?
        .ok_or_else(|| anyhow!("document has no gluing tables to ingest"))?;
    let datum = nzio::derive_nz(&tables, dropped_edge.unwrap_or(doc.n))?;
    let out = doc.with_datum(&datum);
    emit_doc(common, &out)
}

fn flatten(common: &Common, _prec: Prec, longitude: bool) -> Result<()> {
    let (doc, datum) = load(common)?;
    let fl = solve_flattening(&datum, longitude)?;
    let mut out = doc.with_datum(&datum);
    out.flattening = Some(FlatteningJson {
        f: fl.f.clone(),
        fpp: fl.fpp.clone(),
    });
    emit_doc(common, &out)
}

fn normalize(common: &Common, prec: Prec) -> Result<()> {
    let (doc, datum) = load(common)?;
    let shapes = doc
        .shapes
        .as_ref()
        .map(|_| initial_shapes(&doc, datum.n, prec))
        .transpose()?;
    let flattening = file_flattening(&doc, &datum);
    let (out, rotated) = normalize_quad(&datum, shapes.as_ref(), flattening.as_ref(), prec)?;
    let mut doc2 = doc.with_datum(&out.datum);
    if let Some(s) = &out.shapes {
        doc2.shapes = Some(shapes_json(s, common.digits));
    }
    if let Some(f) = &out.flattening {
        doc2.flattening = Some(FlatteningJson {
            f: f.f.clone(),
            fpp: f.fpp.clone(),
        });
    }
    doc2.meta = Some(json!({
        "normalize_quad": {
            "rotated_tets": rotated,
            "certificate": serde_json::to_value(&out.certificate)?,
        },
        "previous_meta": doc2.meta,
    }));
    emit_doc(common, &doc2)
}

fn shapes_json(s: &ShapeAssignment, digits: usize) -> Vec<ShapeJson> {
    s.z.iter()
        .map(|z| ShapeJson {
            re: float_to_decimal(&Float::with_val(z.prec().0, z.real()), digits),
            im: float_to_decimal(&Float::with_val(z.prec().0, z.imag()), digits),
        })
        .collect()
}

fn solve(common: &Common, prec: Prec, newton: &str) -> Result<()> {
    let (doc, datum) = load(common)?;
    let m = parse_complex(&common.m, prec)?;
    let mode = match newton {
        "log" => NewtonMode::Logarithmic,
        "mult" => NewtonMode::Multiplicative,
        other => bail!("unknown Newton mode `{other}` (expected log|mult)"),
    };
    let guess = initial_shapes(&doc, datum.n, prec)?;
    let sol = solve_shapes(&datum, &m, &guess, mode, prec)?;
    let lift = certify_lift(&datum, &sol, prec)?;
    let mut rep = report_header(common);
    rep.insert(
        "shapes".into(),
        Value::Array(sol.z.iter().map(|z| cnum(z, common.digits)).collect()),
    );
    rep.insert("residual".into(), json!(sol.residual.to_f64()));
    rep.insert("lift_lattice".into(), json!(lift.lattice));
    rep.insert("standard_lift".into(), json!(lift.standard));
    if datum.longitude.is_some() {
        let ell = longitude_eigenvalue(&datum, &sol, prec)?;
        rep.insert("longitude_eigenvalue".into(), cnum(&ell, common.digits));
    }
    emit(common, &Value::Object(rep))
}

fn continuation(common: &Common, prec: Prec, m_path: &str) -> Result<()> {
    let (doc, datum) = load(common)?;
    let path: Vec<Complex> = m_path
        .split(',')
        .map(|s| parse_complex(s, prec))
        .collect::<Result<_>>()?;
    if path.is_empty() {
        bail!("--m-path must list at least one m value");
    }
    let guess = initial_shapes(&doc, datum.n, prec)?;
    let m0 = parse_complex(&common.m, prec)?;
    let start = solve_shapes(&datum, &m0, &guess, NewtonMode::Logarithmic, prec)?;
    let states = continue_in_m(&datum, &start, &path, prec)?;
    let mut rep = report_header(common);
    let steps: Vec<Value> = states
        .iter()
        .zip(&path)
        .map(|(s, m)| {
            json!({
                "m": cnum(m, common.digits),
                "shapes": Value::Array(s.z.iter().map(|z| cnum(z, common.digits)).collect()),
            })
        })
        .collect();
    rep.insert("steps".into(), Value::Array(steps));
    emit(common, &Value::Object(rep))
}

fn invariants(common: &Common, prec: Prec, loops: usize, verify_truncation: bool) -> Result<()> {
    if !(2..=4).contains(&loops) {
        bail!("--loops must be 2, 3, or 4");
    }
    let (doc, datum) = load(common)?;
    let m = parse_complex(&common.m, prec)?;
    let deformed = {
        let one = prec.one();
        nz_core::prec::cdist(&m, &one) > prec.tol()
    };
    let guess = initial_shapes(&doc, datum.n, prec)?;
    let shapes = solve_shapes(&datum, &m, &guess, NewtonMode::Logarithmic, prec)?;
    // deformed torsion needs a longitude-compatible flattening
    let flattening = match file_flattening(&doc, &datum) {
        Some(f) if !deformed || f.longitude_compatible => f,
        _ => solve_flattening(&datum, deformed || datum.longitude.is_some())?,
    };
    if deformed && !flattening.longitude_compatible {
        bail!("deformed invariants require longitude data for a compatible flattening");
    }

    let mut rep = report_header(common);
    rep.insert("m".into(), cnum(&m, common.digits));

    // S0 on the original datum (uses the chosen lifts)
    let cv = complex_volume(&datum, &shapes, &flattening, prec)?;
    if !cv.lift.standard {
        eprintln!(
            "warning: non-standard lift (lattice vector {:?}); S0 reported with that lift",
            cv.lift.lattice
        );
    }
    rep.insert(
        "s0".into(),
        json!({
            "im": float_to_decimal(&Float::with_val(prec.bits(), cv.s0.imag()), common.digits),
            "re_mod_class": float_to_decimal(&cv.re_mod, common.digits),
            "lift_lattice": cv.lift.lattice,
            "standard_lift": cv.lift.standard,
        }),
    );

    // quad-normalize for the series engine when B is singular
    let (norm, rotated) = normalize_quad(&datum, Some(&shapes), Some(&flattening), prec)?;
    let nd = &norm.datum;
    let ns = norm.shapes.as_ref().unwrap();
    let nf = norm.flattening.as_ref().unwrap();
    if !rotated.is_empty() {
        rep.insert("normalized_quads".into(), json!(rotated));
    }
    let inv = loop_invariants(nd, ns, nf, loops, false, prec)?;
    rep.insert(
        "tau".into(),
        json!({
            "value": cnum(&inv.tau, common.digits),
            "sign_tag": "representative with argument in [0, pi)",
        }),
    );
    if datum.longitude.is_some() {
        let ell = longitude_eigenvalue(&datum, &shapes, prec)?;
        rep.insert("longitude_eigenvalue".into(), cnum(&ell, common.digits));
    }
    let s2c = two_loop_closed_form(nd, ns, nf, prec)?;
    rep.insert("s2_closed_form".into(), cnum(&s2c, common.digits));
    let mut sn = Map::new();
    for (n, v) in &inv.sn {
        sn.insert(n.to_string(), cnum(v, common.digits));
    }
    rep.insert("sn".into(), Value::Object(sn));
    let mut snt = Map::new();
    for (n, v) in &inv.sn_tilde {
        if n % 2 == 1 {
            let p = prec.bits();
            let neg = Complex::with_val(p, -v.clone());
            snt.insert(
                n.to_string(),
                json!({"value": cnum(v, common.digits), "other_sign": cnum(&neg, common.digits)}),
            );
        } else {
            snt.insert(n.to_string(), json!({ "value": cnum(v, common.digits) }));
        }
    }
    rep.insert("sn_tilde".into(), Value::Object(snt));

    if verify_truncation {
        let bounds = SeriesBounds {
            h2_max: 2,
            deg_max: 12,
        };
        let (log2, _) = nz_core::invariants::loop_series_with_bounds(nd, ns, nf, 2, bounds, prec)?;
        let base = inv.sn.get(&2).unwrap();
        let dev = nz_core::prec::cdist(&log2[0], base);
        rep.insert(
            "truncation_check".into(),
            json!({
                "s2_doubled_degree_delta": dev.to_f64(),
                "pass": dev < prec.tol(),
            }),
        );
    }
    emit(common, &Value::Object(rep))
}

fn check(common: &Common, prec: Prec, moves_path: &PathBuf) -> Result<()> {
    let (doc, datum) = load(common)?;
    let moves_text = std::fs::read_to_string(moves_path)?;
    let moves: Vec<Move> = serde_json::from_str(&moves_text)?;
    let m = parse_complex(&common.m, prec)?;
    let guess = initial_shapes(&doc, datum.n, prec)?;
    let shapes = solve_shapes(&datum, &m, &guess, NewtonMode::Logarithmic, prec)?;
    let flattening = match file_flattening(&doc, &datum) {
        Some(f) => f,
        None => solve_flattening(&datum, false)?,
    };
    let report = invariance_harness(
        &datum,
        &shapes,
        &flattening,
        &moves,
        &HarnessTolerances::default(),
        prec,
    )?;
    let mut rep = report_header(common);
    rep.insert("report".into(), serde_json::to_value(&report)?);
    for c in &report.checks {
        eprintln!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.label);
    }
    emit(common, &Value::Object(rep))
}

fn build_move(
    kind: &str,
    tet: Option<usize>,
    direction: Option<&str>,
    row: Option<usize>,
    sign: Option<i8>,
    tets: Option<&str>,
    central_row: Option<usize>,
) -> Result<Move> {
    use nz_core::moves::{RotationDirection, TwoThreeDirection, TwoThreeSite};
    Ok(match kind {
        "rotate" => Move::Rotate {
            tet: tet.ok_or_else(|| anyhow!("rotate needs --tet"))?,
            direction: match direction.unwrap_or("fwd") {
                "fwd" => RotationDirection::Fwd,
                "bwd" => RotationDirection::Bwd,
                other => bail!("unknown rotation direction `{other}`"),
            },
        },
        "edge" => Move::Edge {
            row: row.ok_or_else(|| anyhow!("edge needs --row"))?,
        },
        "meridian" => Move::Meridian {
            row: row.ok_or_else(|| anyhow!("meridian needs --row"))?,
            sign: sign.unwrap_or(1),
        },
        "flattening-swap" => Move::FlatteningSwap,
        "twothree" => {
            let tets: Vec<usize> = tets
                .ok_or_else(|| anyhow!("twothree needs --tets"))?
                .split(',')
                .map(|s| s.trim().parse().context("parsing --tets"))
                .collect::<Result<_>>()?;
            let dir = match direction.unwrap_or("expand") {
                "expand" => TwoThreeDirection::Expand,
                "collapse" => TwoThreeDirection::Collapse,
                other => bail!("unknown 2-3 direction `{other}`"),
            };
            Move::TwoThree(TwoThreeSite {
                direction: dir,
                tets,
                central_edge_row: central_row,
            })
        }
        other => bail!("unknown move kind `{other}`"),
    })
}

fn do_move(common: &Common, prec: Prec, mv: &Move) -> Result<()> {
    let (doc, datum) = load(common)?;
    let m = parse_complex(&common.m, prec)?;
    let needs_shapes = matches!(*mv, Move::TwoThree(_) | Move::Rotate { .. });
    let shapes = if needs_shapes {
        let guess = initial_shapes(&doc, datum.n, prec)?;
        Some(solve_shapes(
            &datum,
            &m,
            &guess,
            NewtonMode::Logarithmic,
            prec,
        )?)
    } else {
        None
    };
    let flattening = match file_flattening(&doc, &datum) {
        Some(f) => Some(f),
        None => Some(solve_flattening(&datum, false)?),
    };
    let out = apply_move(&datum, shapes.as_ref(), flattening.as_ref(), mv, prec)?;
    let mut doc2 = DatumFile {
        schema: "nzdatum-v1".into(),
        n: out.datum.n,
        gluing: None,
        nz: None,
        longitude: None,
        shapes: out.shapes.as_ref().map(|s| shapes_json(s, common.digits)),
        flattening: out.flattening.as_ref().map(|f| FlatteningJson {
            f: f.f.clone(),
            fpp: f.fpp.clone(),
        }),
        meta: Some(json!({
            "certificate": serde_json::to_value(&out.certificate)?,
            "previous_meta": doc.meta,
        })),
    }
    .with_datum(&out.datum);
    doc2.n = out.datum.n;
    emit_doc(common, &doc2)
}

// keep qmat linked for det checks in future subcommands
#[allow(dead_code)]
fn _det(d: &NzDatum) -> rug::Rational {
    qmat::det_rational(&d.b)
}
