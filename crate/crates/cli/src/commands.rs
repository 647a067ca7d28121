//! The subcommands. Each takes a validated config and a seed and returns
//! its findings; the caller wraps them in a [`crate::report::Report`].

use drconf::algebra::AlgebraConfig;
use drconf::coeffsys::{
    build_system, f4_closed_form, f4_from_solution, rho_of_solution, solve_system, vanishing_summary, SystemOptions,
};
use drconf::confsys::{
    assemble_f3_f4, block_residuals, cauchy_riemann_residual, n0_of, potential_from_f4, subsystem_residuals,
    S0FieldData, ScalarFn,
};
use drconf::probe::{
    classify_fields, default_sample_count, fit_hyperbolic_potential, probe_rigidity, strongest_conformal_field,
    AnsatzSpec, ProbeError, SampleBox,
};
use drconf::seeded_rng;
use drconf::space::DamekRicciSpace;
use drconf::spaceforms::{sample_points, verify_field, HalfSpace, SpaceFormField};
use drconf::tensor::{
    conformal_defect, curvature_at, einstein_check, s0_expected_tables, s0_lie_tables, CoordinateVectorField,
    Euclidean, Metric, S0_TABLE_NAMES,
};
use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use std::sync::Arc;

use crate::config::{
    CoeffsysConfig, ConfsysConfig, EinsteinConfig, FieldSpec, ProbeConfig, SpaceformConfig, TablesConfig, Target,
    VerifyAlgebraConfig,
};
use crate::report::{Checked, Fail};

/// Tolerance for the algebra operations themselves (nullspaces, alignment).
const STRUCTURE_TOL: f64 = 1e-10;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Builds the algebra and re-expresses it in an aligned basis.
fn aligned_space(cfg: &AlgebraConfig) -> Result<DamekRicciSpace, Fail> {
    let alg = cfg.build(STRUCTURE_TOL).map_err(Fail::check)?;
    let (aligned, _) = alg.aligned(None, STRUCTURE_TOL).map_err(Fail::check)?;
    Ok(DamekRicciSpace::new(aligned))
}

fn cube_points(dim: usize, half_width: f64, count: usize, seed: u64) -> Vec<DVector<f64>> {
    SampleBox::cube(dim, -half_width, half_width).sample(count, &mut seeded_rng(seed))
}

#[derive(Serialize)]
struct CheckLine {
    name: &'static str,
    residual: f64,
    passed: bool,
}

pub fn verify_algebra(cfg: &VerifyAlgebraConfig, seed: u64) -> Result<Checked, Fail> {
    let alg = cfg.algebra.build(cfg.tol.max(f64::MIN_POSITIVE)).map_err(Fail::check)?;
    let (k, m) = (alg.k(), alg.m());
    let tol = cfg.tol;
    let mut checks = Vec::new();
    let mut push = |name, residual: f64| {
        checks.push(CheckLine {
            name,
            residual,
            passed: residual <= tol,
        })
    };

    let skew = alg
        .j_maps()
        .iter()
        .map(|j| max_abs(&(j + j.transpose())))
        .fold(0.0, f64::max);
    push("skew", skew);

    let id = DMatrix::<f64>::identity(k, k);
    let mut clifford = 0.0_f64;
    for r in 0..m {
        for s in r..m {
            let mut anti = alg.j_map(r) * alg.j_map(s) + alg.j_map(s) * alg.j_map(r);
            if r == s {
                anti += &id * 2.0;
            }
            clifford = clifford.max(max_abs(&anti));
        }
    }
    push("clifford_relation", clifford);

    // <J_r V_i, V_j> = <Z_r, [V_i, V_j]>
    let unit = |i: usize| {
        let mut e = DVector::zeros(k);
        e[i] = 1.0;
        e
    };
    let mut bracket = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let b = alg.bracket_v(&unit(i), &unit(j)).map_err(Fail::check)?;
            for r in 0..m {
                bracket = bracket.max((alg.j_map(r)[(j, i)] - b[r]).abs());
            }
        }
    }
    push("bracket_duality", bracket);

    // J_Z² = -|Z|² Id on random center vectors.
    let mut rng = seeded_rng(seed);
    let mut square = 0.0_f64;
    for _ in 0..8 {
        let z = DVector::from_iterator(m, (0..m).map(|_| rng.random_range(-1.0..1.0)));
        let jz = alg.j_of(&z).map_err(Fail::check)?;
        square = square.max(max_abs(&(&jz * &jz + &id * z.norm_squared())));
    }
    push("j_square", square);

    let split = alg.kernel_ad(&unit(0), STRUCTURE_TOL).map_err(Fail::check)?;
    let mut split_res = if split.kernel.len() + split.image.len() == k {
        0.0
    } else {
        1.0
    };
    for a in &split.kernel {
        for b in &split.image {
            split_res = f64::max(split_res, a.dot(b).abs());
        }
    }
    push("ad_kernel_split", split_res);

    let (aligned, q) = alg.aligned(None, STRUCTURE_TOL).map_err(Fail::check)?;
    let orth = max_abs(&(q.transpose() * &q - &id));
    let align_res = if aligned.is_aligned(1e-12) { orth } else { f64::INFINITY };
    push("aligned_basis", align_res);

    let closure = DamekRicciSpace::new(aligned)
        .s0_subframe()
        .map(|_| 0.0)
        .unwrap_or(f64::INFINITY);
    push("s0_closure", closure);

    let failed = checks.iter().find(|c| !c.passed).map(|c| c.name.to_string());
    let result = json!({
        "k": k,
        "m": m,
        "dim": k + m + 1,
        "checks": checks,
        "ad_kernel_dim": split.kernel.len(),
        "j2_condition": alg.j2_condition(1e-8),
    });
    Ok(Checked::new(failed.is_none(), || failed.unwrap_or_default(), result))
}

#[derive(Serialize)]
struct ConstantLine {
    name: String,
    expected: f64,
    min: f64,
    max: f64,
    max_error: f64,
}

pub fn verify_tables(cfg: &TablesConfig, seed: u64) -> Result<Checked, Fail> {
    let space = aligned_space(&cfg.algebra)?;
    let s0 = space.s0_subframe().map_err(Fail::check)?;
    let points = cube_points(space.dim(), cfg.half_width, cfg.points, seed);
    let measured: Vec<[DMatrix<f64>; 4]> = points
        .par_iter()
        .map(|p| s0_lie_tables(&space, &s0, p, cfg.h))
        .collect::<Result<_, _>>()
        .map_err(Fail::check)?;
    let expected = s0_expected_tables();

    let mut constants = Vec::new();
    let mut tables = Vec::new();
    let mut worst = 0.0_f64;
    for (t, exp) in expected.iter().enumerate() {
        let mut err = DMatrix::zeros(4, 4);
        let mut lo = DMatrix::from_element(4, 4, f64::INFINITY);
        let mut hi = DMatrix::from_element(4, 4, f64::NEG_INFINITY);
        for tabs in &measured {
            for i in 0..16 {
                let v = tabs[t][i];
                err[i] = f64::max(err[i], (v - exp[i]).abs());
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        worst = worst.max(err.max());
        for a in 0..4 {
            for b in a..4 {
                if exp[(a, b)] != 0.0 || (t == 3 && a == b) {
                    constants.push(ConstantLine {
                        name: format!("L_{} g({},{})", S0_TABLE_NAMES[t], S0_TABLE_NAMES[a], S0_TABLE_NAMES[b]),
                        expected: exp[(a, b)],
                        min: lo[(a, b)],
                        max: hi[(a, b)],
                        max_error: err[(a, b)],
                    });
                }
            }
        }
        tables.push(json!({
            "field": S0_TABLE_NAMES[t],
            "expected": matrix_rows(exp),
            "max_error": matrix_rows(&err),
        }));
    }
    let passed = worst < cfg.tol;
    let result = json!({
        "points": points.len(),
        "max_error": worst,
        "constants": constants,
        "tables": tables,
    });
    Ok(Checked::new(passed, || "TableMismatch".into(), result))
}

pub fn check_einstein(cfg: &EinsteinConfig, seed: u64) -> Result<Checked, Fail> {
    let space = aligned_space(&cfg.algebra)?;
    let n = space.dim();
    let points = cube_points(n, cfg.half_width, cfg.points, seed);
    let report = einstein_check(&space, &points, cfg.h, cfg.h_outer).map_err(Fail::check)?;

    // Planes are drawn up front so the result does not depend on scheduling.
    let mut rng = seeded_rng(seed ^ 0x5eed_c0de);
    let planes: Vec<Vec<(DVector<f64>, DVector<f64>)>> = points
        .iter()
        .map(|_| {
            (0..cfg.planes)
                .map(|_| {
                    let mut draw = || DVector::from_iterator(n, (0..n).map(|_| rng.random_range(-1.0..1.0)));
                    (draw(), draw())
                })
                .collect()
        })
        .collect();
    let sectional: Vec<Vec<f64>> = points
        .par_iter()
        .zip(&planes)
        .map(|(p, ps)| {
            let curv = curvature_at(&space, p, cfg.h, cfg.h_outer)?;
            Ok(ps.iter().map(|(x, y)| curv.sectional(x, y)).collect())
        })
        .collect::<Result<_, drconf::tensor::TensorError>>()
        .map_err(Fail::check)?;
    let flat = sectional.iter().flatten().copied();
    let k_min = flat.clone().fold(f64::INFINITY, f64::min);
    let k_max = flat.fold(f64::NEG_INFINITY, f64::max);

    let passed = report.max_dev < cfg.tol && report.spread < cfg.tol && report.lambda < 0.0;
    let reason = || {
        if report.lambda >= 0.0 {
            "NonNegativeLambda".to_string()
        } else {
            "NotEinstein".to_string()
        }
    };
    let result = json!({
        "dim": n,
        "points": points.len(),
        "einstein": report,
        "sectional": { "planes": cfg.planes * points.len(), "min": k_min, "max": k_max },
    });
    Ok(Checked::new(passed, reason, result))
}

pub fn spaceform(cfg: &SpaceformConfig, seed: u64) -> Result<Checked, Fail> {
    let mut rng = seeded_rng(seed);
    let mut jobs: Vec<(SpaceFormField, Vec<DVector<f64>>)> = Vec::new();
    if let Some(f) = &cfg.field {
        let pts = sample_points(f.model(), f.dim(), cfg.points, &mut rng);
        jobs.push((f.clone(), pts));
    }
    if let Some(r) = cfg.draws() {
        for _ in 0..r.draws {
            let f = SpaceFormField::random(r.model, r.n, &mut rng);
            let pts = sample_points(r.model, r.n, cfg.points, &mut rng);
            jobs.push((f, pts));
        }
    }
    let checks: Vec<_> = jobs
        .par_iter()
        .map(|(f, pts)| verify_field(f, pts, cfg.h))
        .collect::<Result<_, _>>()
        .map_err(Fail::check)?;
    let worst_tf = checks.iter().map(|c| c.max_tracefree_norm).fold(0.0, f64::max);
    let worst_rho = checks.iter().map(|c| c.max_rho_error).fold(0.0, f64::max);
    let passed = worst_tf < cfg.tol && worst_rho < cfg.tol;
    let fields: Vec<Value> = jobs
        .iter()
        .zip(&checks)
        .map(|((f, _), c)| json!({ "field": f, "check": c }))
        .collect();
    let result = json!({
        "max_tracefree_norm": worst_tf,
        "max_rho_error": worst_rho,
        "fields": fields,
    });
    Ok(Checked::new(passed, || "NotConformal".into(), result))
}

fn build_field(space: &DamekRicciSpace, spec: &FieldSpec) -> Result<CoordinateVectorField, Fail> {
    let n = space.dim();
    match spec {
        FieldSpec::RightInvariant { index } | FieldSpec::Frame { index } if *index >= n => Err(Fail::Usage(format!(
            "field index {index} out of range for dimension {n}"
        ))),
        FieldSpec::RightInvariant { index } => {
            let (s, i) = (space.clone(), *index);
            Ok(CoordinateVectorField::new(n, move |p| s.right_invariant(i, p)))
        }
        FieldSpec::Frame { index } => {
            let (s, i) = (space.clone(), *index);
            Ok(CoordinateVectorField::new(n, move |p| match s.frame_at(p) {
                Ok(f) => f.column(i).into_owned(),
                Err(_) => DVector::from_element(n, f64::NAN),
            }))
        }
        FieldSpec::Affine { matrix, offset } => {
            if matrix.len() != n || matrix.iter().any(|r| r.len() != n) || offset.len() != n {
                return Err(Fail::Usage(format!(
                    "affine field must be {n}x{n} with a length-{n} offset"
                )));
            }
            let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
            Ok(CoordinateVectorField::affine(
                DMatrix::from_row_slice(n, n, &flat),
                DVector::from_vec(offset.clone()),
            ))
        }
    }
}

pub fn confsys_residuals(cfg: &ConfsysConfig, seed: u64) -> Result<Checked, Fail> {
    let space = aligned_space(&cfg.algebra)?;
    let points = cube_points(space.dim(), cfg.half_width, cfg.points, seed);
    let mut result = serde_json::Map::new();
    let mut passed = true;
    let mut reason = String::new();

    if let Some(spec) = cfg.field_spec() {
        let field = build_field(&space, &spec)?;
        let data = S0FieldData::from_field(&space, &field).map_err(Fail::check)?;
        let per_point: Vec<(f64, [f64; 3], [f64; 7])> = points
            .par_iter()
            .map(|p| -> Result<_, Fail> {
                let d = conformal_defect(&space, &field, p, cfg.h).map_err(Fail::check)?;
                let b = block_residuals(&space, &data, |_| d.rho, p, cfg.h).map_err(Fail::check)?;
                let s = subsystem_residuals(&space, &data, p, cfg.h).map_err(Fail::check)?;
                let block_max = |m: [[f64; 2]; 2]| m.iter().flatten().fold(0.0_f64, |a, x| a.max(x.abs()));
                Ok((
                    d.tracefree_norm,
                    [block_max(b.b11), block_max(b.b21), block_max(b.b22)],
                    s,
                ))
            })
            .collect::<Result<_, _>>()?;
        let mut tracefree = 0.0_f64;
        let mut blocks = [0.0_f64; 3];
        let mut sub = [0.0_f64; 7];
        for (tf, b, s) in &per_point {
            tracefree = tracefree.max(*tf);
            for i in 0..3 {
                blocks[i] = blocks[i].max(b[i]);
            }
            for i in 0..7 {
                sub[i] = sub[i].max(s[i].abs());
            }
        }
        let worst = blocks.iter().chain(&sub).fold(0.0_f64, |a, &x| a.max(x));
        if !(worst < cfg.tol) {
            passed = false;
            reason = "NonzeroResidual".into();
        }
        result.insert(
            "field".into(),
            json!({
                "spec": spec,
                "max_tracefree_norm": tracefree,
                "max_block_residual": { "b11": blocks[0], "b21": blocks[1], "b22": blocks[2] },
                "max_subsystem_residual": sub,
                "max_residual": worst,
            }),
        );
    }

    if let Some(exp) = &cfg.expansion {
        let n0_len = space.k() + space.m() - 1;
        exp.validate().map_err(|e| Fail::Usage(e.to_string()))?;
        exp.check_arity(n0_len).map_err(|e| Fail::Usage(e.to_string()))?;
        let f4: ScalarFn = {
            let (e, s) = (exp.clone(), space.clone());
            Arc::new(move |p| assemble_f3_f4(&e, &s, p).map_or(f64::NAN, |v| v.1))
        };
        let zero: ScalarFn = Arc::new(|_| 0.0);
        let data = S0FieldData::new(zero.clone(), zero.clone(), zero, f4);
        let mut cr = 0.0_f64;
        let mut rho = 0.0_f64;
        let mut closed = 0.0_f64;
        for p in &points {
            let z = p[space.z_index(0)];
            let w = p[space.a_index()].exp();
            let n0 = n0_of(&space, p);
            let (r1, r2) = cauchy_riemann_residual(
                |z, w, n0| exp.big_f(z, w, n0).0,
                |z, w, n0| exp.big_f(z, w, n0).1,
                z,
                w,
                &n0,
                cfg.h,
            )
            .map_err(Fail::check)?;
            cr = cr.max(r1.abs()).max(r2.abs());
            rho = rho.max(potential_from_f4(&data, p, cfg.h).abs());
            let f4 = f4_from_solution(exp, &space, p).map_err(Fail::check)?;
            closed = closed.max((f4 - f4_closed_form(exp, &space, p)).abs());
        }
        if !(cr < cfg.tol) {
            passed = false;
            if reason.is_empty() {
                reason = "CauchyRiemann".into();
            }
        }
        result.insert(
            "expansion".into(),
            json!({
                "max_cauchy_riemann_residual": cr,
                "max_abs_rho": rho,
                "max_f4_closed_form_error": closed,
            }),
        );
    }
    result.insert("points".into(), json!(points.len()));
    Ok(Checked::new(passed, || reason, Value::Object(result)))
}

pub fn coeffsys(cfg: &CoeffsysConfig, seed: u64) -> Result<Checked, Fail> {
    let space = aligned_space(&cfg.algebra)?;
    let options = |truncation| SystemOptions {
        truncation,
        degree: cfg.degree,
        mirrored_rows: cfg.mirrored_rows,
    };
    let sys = build_system(&space, options(cfg.truncation)).map_err(Fail::check)?;
    let sol = solve_system(&sys, cfg.solve_tol);
    let layout = &sys.layout;
    let summary = vanishing_summary(layout, &sol.basis);

    let mut dims = Vec::new();
    for t in cfg.stability_truncations() {
        let dim = if t == cfg.truncation {
            sol.dim()
        } else {
            let s = build_system(&space, options(t)).map_err(Fail::check)?;
            solve_system(&s, cfg.solve_tol).dim()
        };
        dims.push(json!({ "M": t, "dim": dim }));
    }
    let stable = dims.windows(2).all(|w| w[0]["dim"] == w[1]["dim"]);

    let expansions: Vec<_> = sol
        .basis
        .iter()
        .map(|u| layout.decode(u).map(|c| c.to_expansion(layout.n0_len)))
        .collect::<Result<_, _>>()
        .map_err(Fail::check)?;

    let mut surviving = Vec::new();
    let mut note = |name: String, v: f64| {
        if v > cfg.tol && !surviving.contains(&name) {
            surviving.push(name);
        }
    };
    for e in &expansions {
        for (m, p) in e.c1.iter().enumerate() {
            note(format!("C1^[{}]", m + 1), p.max_abs_coefficient());
        }
        for (m, p) in e.c2.iter().enumerate() {
            note(format!("C2^[{}]", m + 1), p.max_abs_coefficient());
        }
        note("C4".into(), e.c4.max_abs_coefficient());
        note("C5".into(), e.c5.as_ref().map_or(0.0, |p| p.max_abs_coefficient()));
    }
    surviving.sort();

    let points = cube_points(space.dim(), 1.0, cfg.points, seed);
    let mut f4_err = 0.0_f64;
    let mut rho = 0.0_f64;
    for e in &expansions {
        for p in &points {
            let f4 = f4_from_solution(e, &space, p).map_err(Fail::check)?;
            f4_err = f4_err.max((f4 - f4_closed_form(e, &space, p)).abs());
            rho = rho.max(rho_of_solution(e, &space, p, 1e-3).map_err(Fail::check)?.abs());
        }
    }

    let vanishes = summary.max_c4 < cfg.tol && summary.max_c2 < cfg.tol && summary.max_c1_high < cfg.tol;
    let checks = [
        ("nonempty", sol.dim() > 0),
        ("vanishing", vanishes),
        ("f4_closed_form", f4_err < cfg.f4_tol),
        ("rho_vanishes", rho < cfg.f4_tol),
        ("stable_dimension", stable),
    ];
    let failed = checks.iter().find(|c| !c.1).map(|c| c.0.to_string());
    let reported: Vec<_> = expansions.iter().map(|e| prune(e, cfg.prune)).collect();
    let result = json!({
        "rows": sys.matrix.nrows(),
        "columns": sys.matrix.ncols(),
        "threshold": sol.threshold,
        "dim": sol.dim(),
        "vanishing": summary,
        "surviving": surviving,
        "max_f4_closed_form_error": f4_err,
        "max_abs_rho": rho,
        "stability": dims,
        "checks": checks.iter().map(|(n, p)| json!({ "name": n, "passed": p })).collect::<Vec<_>>(),
        "solutions": reported,
    });
    Ok(Checked::new(failed.is_none(), || failed.unwrap_or_default(), result))
}

fn prune(e: &drconf::confsys::HarmonicExpansion, tol: f64) -> drconf::confsys::HarmonicExpansion {
    let mut out = e.clone();
    for p in out.c1.iter_mut().chain(out.c2.iter_mut()) {
        *p = p.pruned(tol);
    }
    out.c3 = out.c3.pruned(tol);
    out.c4 = out.c4.pruned(tol);
    out.c5 = out.c5.map(|p| p.pruned(tol));
    out
}

pub fn probe(cfg: &ProbeConfig, seed: u64) -> Result<Checked, Fail> {
    let (metric, ansatz, sample_box, space): (Box<dyn Metric>, AnsatzSpec, SampleBox, Option<DamekRicciSpace>) =
        match &cfg.target {
            Target::DamekRicci(alg) => {
                let space = aligned_space(alg)?;
                let n = space.dim();
                let ansatz = AnsatzSpec::damek_ricci(&space, cfg.degree, cfg.j_min, cfg.j_max);
                let b = SampleBox::cube(n, -cfg.half_width, cfg.half_width);
                (Box::new(space.clone()), ansatz, b, Some(space))
            }
            Target::HalfSpace(n) => (
                Box::new(HalfSpace(*n)),
                AnsatzSpec::polynomial(*n, cfg.degree),
                SampleBox::half_space(*n),
                None,
            ),
            Target::Euclidean(n) => (
                Box::new(Euclidean(*n)),
                AnsatzSpec::polynomial(*n, cfg.degree),
                SampleBox::cube(*n, -cfg.half_width, cfg.half_width),
                None,
            ),
        };
    let n = metric.dim();
    let basis_len = ansatz.basis(n).map_err(Fail::check)?.len();
    let samples = cfg
        .samples
        .unwrap_or_else(|| default_sample_count(n, basis_len, cfg.oversampling));

    let mut rng = seeded_rng(seed);
    let pts = sample_box.sample(samples, &mut rng);
    let validation = sample_box.sample(cfg.validation, &mut rng);
    let doubled = cfg.double_check.then(|| sample_box.sample(2 * samples, &mut rng));
    let mut run = probe_rigidity(
        metric.as_ref(),
        &ansatz,
        &pts,
        doubled.as_deref(),
        &validation,
        &cfg.tolerances,
    )
    .map_err(|e| match e {
        ProbeError::InvalidTolerance => Fail::Usage(e.to_string()),
        e => Fail::check(e),
    })?;

    let mut result = serde_json::Map::new();
    let check_points = &validation[..validation.len().min(20)];
    if let Some(space) = &space {
        classify_fields(space, &mut run, check_points);
        let mut worst = 0.0_f64;
        for i in 0..run.fields.len() {
            let field = run.field(i);
            let data = S0FieldData::from_field(space, &field).map_err(Fail::check)?;
            for p in check_points {
                let d = conformal_defect(space, &field, p, cfg.tolerances.h).map_err(Fail::check)?;
                let b = block_residuals(space, &data, |_| d.rho, p, cfg.tolerances.h).map_err(Fail::check)?;
                worst = worst.max(b.max_abs());
            }
        }
        result.insert("max_block_residual".into(), json!(worst));
    } else if let Some((_, rho)) =
        strongest_conformal_field(metric.as_ref(), &run, &validation, cfg.tolerances.h).map_err(Fail::check)?
    {
        if matches!(cfg.target, Target::HalfSpace(_)) {
            result.insert(
                "hyperbolic_fit".into(),
                to_value(&fit_hyperbolic_potential(&validation, &rho)),
            );
        }
        let peak = rho.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        result.insert("strongest_max_abs_rho".into(), json!(peak));
    }

    let expected = cfg.expected();
    let verdict = run.report.verdict;
    result.insert("expected".into(), to_value(&expected));
    result.insert("report".into(), to_value(&run.report));
    Ok(Checked::new(
        verdict == expected,
        || format!("Verdict:{}", to_value(&verdict).as_str().unwrap_or("")),
        Value::Object(result),
    ))
}
