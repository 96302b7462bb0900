//! Task execution: each task reads named objects, runs one construction or
//! verification, and fills a report record with verdicts and residuals.

use hvnm::algebra::{Automorphism, VnAlgebra};
use hvnm::corner::{corner_closure, riesz_representation, verify_corner};
use hvnm::cpmap::{
    dilation_uniqueness_check, is_completely_positive, stinespring_dilate, Dilation,
};
use hvnm::fusion::fuse;
use hvnm::hvnmod::{a2_inner_product, is_standard};
use hvnm::numlin::{hs_distance, hs_norm, lstsq};
use hvnm::scenarios::{
    build_auto_bimodule, build_inclusion_bimodule, classify_auto_bimodules,
    jones_vs_stinespring, AutoBimodule, AutoClassification, InclusionSpec,
};
use hvnm::{CMat, Error, OperatorSpace};

use crate::problem::{encode_matrix, InputError, Objects, TaskDecl};
use crate::report::TaskRecord;

/// A task that could not produce a verdict, sorted by exit status.
pub enum Failure {
    /// Bad file contents or references; exit status 2.
    Input(String),
    /// A mathematical hypothesis of the task turned out false; exit status 1.
    Negative(String),
    /// A broken library invariant; exit status 3.
    Internal(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Failure {
        Failure::Input(e.0)
    }
}

/// Errors raised while a task runs: internal failures keep their status,
/// shape and algebra mismatches are problems with the file, and everything
/// else means an asserted hypothesis failed its verification.
fn classify(err: Error) -> Failure {
    if err.is_internal() {
        return Failure::Internal(err.to_string());
    }
    match err {
        Error::ShapeMismatch { .. }
        | Error::InvalidTolerance(_)
        | Error::AlgebraMismatch(_) => Failure::Input(err.to_string()),
        other => Failure::Negative(other.to_string()),
    }
}

fn core<T>(result: hvnm::Result<T>) -> Result<T, Failure> {
    result.map_err(classify)
}

pub enum RunOutcome {
    Completed,
    /// A task aborted on a failed hypothesis; its record closes the report.
    Aborted,
}

pub fn run_tasks(
    decls: &[TaskDecl],
    objects: &mut Objects,
    report: &mut crate::report::Report,
    verbose: bool,
) -> Result<RunOutcome, Failure> {
    for (i, decl) in decls.iter().enumerate() {
        let mut rec = TaskRecord::new(i + 1, decl.kind(), decl.name().map(String::from));
        match run_one(decl, &mut rec, objects, verbose) {
            Ok(()) => report.push(rec),
            Err(Failure::Negative(message)) => {
                rec.verdict("completed", false);
                rec.note(message);
                report.push(rec);
                return Ok(RunOutcome::Aborted);
            }
            Err(failure) => return Err(failure),
        }
    }
    Ok(RunOutcome::Completed)
}

fn run_one(
    decl: &TaskDecl,
    rec: &mut TaskRecord,
    objects: &mut Objects,
    verbose: bool,
) -> Result<(), Failure> {
    match decl {
        TaskDecl::CheckCorner { name, vectors } => {
            check_corner(rec, objects, name.as_deref(), verbose, vectors)
        }
        TaskDecl::Closure { name, seed } => {
            closure(rec, objects, name.as_deref(), verbose, seed)
        }
        TaskDecl::Riesz {
            name,
            corner,
            values,
        } => riesz(rec, objects, name.as_deref(), verbose, corner, values),
        TaskDecl::Dilate { name, map, state } => {
            dilate(rec, objects, name.as_deref(), verbose, map, state.as_deref())
        }
        TaskDecl::Uniqueness {
            name,
            map,
            state_a,
            state_b,
        } => uniqueness(rec, objects, name.as_deref(), verbose, map, state_a, state_b),
        TaskDecl::Fuse {
            name,
            algebra,
            first,
            second,
        } => fuse_task(rec, objects, name.as_deref(), verbose, algebra, first, second),
        TaskDecl::DemoJones {
            name,
            a1,
            a2,
            state,
        } => demo_jones(rec, objects, name.as_deref(), verbose, a1, a2, state.as_deref()),
        TaskDecl::DemoAuto {
            name,
            algebra,
            automorphism,
        } => demo_auto(rec, objects, name.as_deref(), verbose, algebra, automorphism),
        TaskDecl::Classify {
            name,
            algebra,
            first,
            second,
        } => classify_task(rec, objects, name.as_deref(), verbose, algebra, first, second),
    }
}

fn emit(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    key: &str,
    matrix: &CMat,
) {
    if let Some(task_name) = name {
        objects.publish(task_name, key, matrix.clone());
    }
    if verbose {
        rec.outputs.insert(key.to_string(), encode_matrix(matrix));
    }
}

fn check_corner(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    vectors: &[String],
) -> Result<(), Failure> {
    let vecs = objects.matrices_named(vectors)?;
    let (maybe, report) = core(verify_corner(&vecs, objects.tol))?;
    rec.dimension("rows", vecs[0].nrows());
    rec.dimension("cols", vecs[0].ncols());
    rec.residual("triple_closure", report.worst_residual);
    rec.flag("non_degenerate", report.non_degenerate);
    match maybe {
        Some(corner) => {
            rec.verdict("corner", true);
            rec.dimension("corner_dim", corner.dim());
            emit(rec, objects, name, verbose, "p1", corner.p1());
            emit(rec, objects, name, verbose, "p2", corner.p2());
        }
        None => {
            rec.verdict("corner", false);
            if let Some(w) = &report.witness {
                rec.note(format!(
                    "x·z*·y escapes the span at triple ({}, {}, {}): residual {:.3e}",
                    w.i, w.j, w.k, w.residual
                ));
            }
        }
    }
    Ok(())
}

fn closure(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    seed: &[String],
) -> Result<(), Failure> {
    let seeds = objects.matrices_named(seed)?;
    let seed_span = core(OperatorSpace::span(&seeds, objects.tol))?;
    let corner = core(corner_closure(&seeds, objects.tol))?;
    let (check, report) = core(verify_corner(corner.basis(), objects.tol))?;
    rec.verdict("closed", check.is_some());
    rec.residual("triple_closure", report.worst_residual);
    rec.flag("non_degenerate", corner.is_non_degenerate());
    rec.dimension("rows", corner.p1().nrows());
    rec.dimension("cols", corner.p2().nrows());
    rec.dimension("seed_dim", seed_span.dim());
    rec.dimension("corner_dim", corner.dim());
    emit(rec, objects, name, verbose, "p1", corner.p1());
    emit(rec, objects, name, verbose, "p2", corner.p2());
    for (k, b) in corner.basis().iter().enumerate() {
        emit(rec, objects, name, verbose, &format!("basis{k}"), b);
    }
    Ok(())
}

fn riesz(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    corner_vectors: &[String],
    values: &[String],
) -> Result<(), Failure> {
    let vecs = objects.matrices_named(corner_vectors)?;
    let vals = objects.matrices_named(values)?;
    if vecs.len() != vals.len() {
        return Err(Failure::Input(format!(
            "riesz pairs {} corner vectors with {} values",
            vecs.len(),
            vals.len()
        )));
    }
    let (maybe, report) = core(verify_corner(&vecs, objects.tol))?;
    rec.residual("triple_closure", report.worst_residual);
    let Some(corner) = maybe else {
        rec.verdict("corner", false);
        if let Some(w) = &report.witness {
            rec.note(format!(
                "the declared vectors do not span a corner: triple ({}, {}, {}) residual {:.3e}",
                w.i, w.j, w.k, w.residual
            ));
        }
        return Ok(());
    };
    rec.verdict("corner", true);
    rec.dimension("corner_dim", corner.dim());

    // The functional is declared on the spanning vectors; transport it to
    // the corner's internal basis before solving.
    let basis_values = expand_linearly(&vecs, &vals, corner.basis(), objects.tol)
        .map_err(Failure::Internal)?;
    match riesz_representation(&corner, &basis_values) {
        Ok(y) => {
            rec.verdict("module_linear", true);
            let mut ok = true;
            let mut worst = 0.0f64;
            for (v, f) in vecs.iter().zip(&vals) {
                let predicted = y.adjoint() * v;
                let defect = hs_distance(f, &predicted);
                ok &= defect <= objects.tol.residual_for(hs_norm(f));
                worst = worst.max(defect);
            }
            rec.verdict("representation", ok);
            rec.residual("round_trip", worst);
            emit(rec, objects, name, verbose, "y", &y);
        }
        Err(Error::NotModuleLinear { i, j, defect }) => {
            rec.verdict("module_linear", false);
            rec.residual("module_linearity", defect);
            rec.note(format!(
                "the declared data is not right-module linear: basis pair ({i}, {j}) \
                 has defect {defect:.3e}"
            ));
        }
        Err(e) => return Err(classify(e)),
    }
    Ok(())
}

/// Coefficients of each target over the declared vectors, applied to the
/// declared data. The targets span the same space by construction, so a
/// residual here is an internal failure, not an input error.
fn expand_linearly(
    vectors: &[CMat],
    data: &[CMat],
    targets: &[CMat],
    tol: hvnm::Tolerance,
) -> Result<Vec<CMat>, String> {
    let len = vectors[0].len();
    let mut stacked = CMat::zeros(len, vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        stacked.set_column(i, &CMat::from_column_slice(len, 1, v.as_slice()).column(0));
    }
    let (rows, cols) = data[0].shape();
    let mut out = Vec::with_capacity(targets.len());
    for t in targets {
        let rhs = CMat::from_column_slice(len, 1, t.as_slice());
        let coeffs = lstsq(&stacked, &rhs, tol).map_err(|e| e.to_string())?;
        let residual = hs_distance(&(&stacked * &coeffs), &rhs);
        if residual > tol.residual_for(hs_norm(t)) {
            return Err(format!(
                "corner basis escapes the span of its own vectors: residual {residual:.3e}"
            ));
        }
        let mut image = CMat::zeros(rows, cols);
        for (i, d) in data.iter().enumerate() {
            image += d * coeffs[(i, 0)];
        }
        out.push(image);
    }
    Ok(out)
}

fn dilation_residuals(d: &Dilation) -> hvnm::Result<(f64, f64, bool)> {
    let tol = d.eta().tol();
    let mut worst = 0.0f64;
    let mut ok = true;
    for a in d.eta().source().basis() {
        let lhs = d.generator().adjoint() * d.pi1().apply(a)? * d.generator();
        let rhs = d.pi2().apply(&d.eta().apply(a)?)?;
        let defect = hs_distance(&lhs, &rhs);
        ok &= defect <= tol.residual_for(hs_norm(&rhs));
        worst = worst.max(defect);
    }
    let unit_image = d.pi2().apply(&d.eta().apply(d.eta().source().unit())?)?;
    let unit_defect = hs_distance(&(d.generator().adjoint() * d.generator()), &unit_image);
    ok &= unit_defect <= tol.residual_for(hs_norm(&unit_image));
    Ok((worst, unit_defect, ok))
}

fn dilate(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    map: &str,
    state: Option<&str>,
) -> Result<(), Failure> {
    let eta = objects.map(map)?.clone();
    let assessment = core(is_completely_positive(&eta))?;
    rec.verdict("completely_positive", assessment.cp);
    if let Some(w) = &assessment.witness {
        rec.residual("choi_min_eigenvalue", w.eigenvalue);
        rec.note(format!(
            "the Choi matrix of central block {} has eigenvalue {:.6}",
            w.block, w.eigenvalue
        ));
    }
    if !assessment.cp {
        return Ok(());
    }
    let phi = match state {
        Some(s) => Some(objects.state(s)?.clone()),
        None => None,
    };
    let dilation = core(stinespring_dilate(&eta, phi.as_ref()))?;
    let (identity_worst, unit_defect, ok) = core(dilation_residuals(&dilation))?;
    rec.verdict("dilation_identity", ok);
    rec.residual("dilation_identity", identity_worst);
    rec.residual("generator_unit", unit_defect);
    let standardness = core(is_standard(dilation.bimodule()))?;
    rec.verdict("standard", standardness.standard);
    rec.flag("non_degenerate", standardness.non_degenerate);
    rec.flag("unital", eta.is_unital());
    rec.dimension("source_dim", eta.source().dim());
    rec.dimension("target_dim", eta.target().dim());
    rec.dimension("h1_dim", dilation.h1_dim());
    rec.dimension("l2_dim", dilation.h2().carrier_dim());
    if eta.is_unital() {
        if dilation.h1_dim() == dilation.h2().carrier_dim() {
            rec.note("the generator is unitary");
        } else {
            rec.note("the generator is an isometry");
        }
    }
    emit(rec, objects, name, verbose, "generator", dilation.generator());
    Ok(())
}

fn uniqueness(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    map: &str,
    state_a: &str,
    state_b: &str,
) -> Result<(), Failure> {
    let eta = objects.map(map)?.clone();
    let sa = objects.state(state_a)?.clone();
    let sb = objects.state(state_b)?.clone();
    let d1 = core(stinespring_dilate(&eta, Some(&sa)))?;
    let d2 = core(stinespring_dilate(&eta, Some(&sb)))?;
    let (u1, u2) = core(dilation_uniqueness_check(&d1, &d2))?;
    let moved = &u1 * d1.generator() * u2.adjoint();
    let defect = hs_distance(&moved, d2.generator());
    rec.verdict(
        "equivalent",
        defect <= objects.tol.residual_for(hs_norm(d2.generator())),
    );
    rec.residual("transported_generator", defect);
    let eye1 = CMat::identity(u1.nrows(), u1.nrows());
    let eye2 = CMat::identity(u2.nrows(), u2.nrows());
    rec.residual(
        "unitarity",
        hs_distance(&(u1.adjoint() * &u1), &eye1).max(hs_distance(&(u2.adjoint() * &u2), &eye2)),
    );
    rec.dimension("h1_dim_a", d1.h1_dim());
    rec.dimension("h1_dim_b", d2.h1_dim());
    emit(rec, objects, name, verbose, "u1", &u1);
    emit(rec, objects, name, verbose, "u2", &u2);
    Ok(())
}

/// Worst defect of ⟨x₁⨀y₁, x₂⨀y₂⟩ = ⟨y₁, ⟨x₁,x₂⟩·y₂⟩ over generator
/// quadruples, with the middle inner product acting on the right module
/// through its left representation.
fn fusion_identity_residual(
    eb: &AutoBimodule,
    fb: &AutoBimodule,
    result: &hvnm::fusion::FusionResult,
    cap: usize,
) -> hvnm::Result<(bool, f64)> {
    let tol = eb.algebra().tol();
    let m = eb.algebra();
    let count = m.dim().min(cap);
    let mut xs = Vec::with_capacity(count);
    let mut ys = Vec::with_capacity(count);
    for b in m.basis().iter().take(count) {
        xs.push(eb.gns().left_rep().apply(b)? * eb.implementing_unitary());
        ys.push(fb.gns().left_rep().apply(b)? * fb.implementing_unitary());
    }
    let rho = fb
        .bimodule()
        .pi1()
        .ok_or_else(|| Error::AlgebraMismatch("the right module lost its left action".into()))?;
    let mut ok = true;
    let mut worst = 0.0f64;
    for x1 in &xs {
        for y1 in &ys {
            let z1 = result.fused_element(x1, y1)?;
            for x2 in &xs {
                for y2 in &ys {
                    let z2 = result.fused_element(x2, y2)?;
                    let lhs = result
                        .fused()
                        .a2_element(&a2_inner_product(result.fused(), &z1, &z2)?);
                    let mid = eb
                        .bimodule()
                        .a2_element(&a2_inner_product(eb.bimodule(), x1, x2)?);
                    let moved = rho.apply(&mid)? * y2;
                    let rhs = fb
                        .bimodule()
                        .a2_element(&a2_inner_product(fb.bimodule(), y1, &moved)?);
                    let defect = hs_distance(&lhs, &rhs);
                    ok &= defect <= tol.residual_for(hs_norm(&rhs));
                    worst = worst.max(defect);
                }
            }
        }
    }
    Ok((ok, worst))
}

fn fuse_task(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    algebra: &str,
    first: &str,
    second: &str,
) -> Result<(), Failure> {
    let m = objects.algebra(algebra)?.algebra.clone();
    let th = objects.auto(first)?.clone();
    let ph = objects.auto(second)?.clone();
    let eb = core(build_auto_bimodule(&m, &th))?;
    let fb = core(build_auto_bimodule(&m, &ph))?;
    let result = core(fuse(eb.bimodule(), fb.bimodule()))?;
    let (ok, worst) = core(fusion_identity_residual(&eb, &fb, &result, 3))?;
    rec.verdict("inner_product_identity", ok);
    rec.residual("inner_product_identity", worst);
    let standardness = core(is_standard(result.fused()))?;
    rec.verdict("standard", standardness.standard);
    rec.flag("non_degenerate", standardness.non_degenerate);
    if let Some(faithful) = result.left_action_faithful() {
        rec.flag("left_action_faithful", faithful);
    }
    rec.dimension("multiplicity", result.multiplicity());
    rec.dimension("fused_dim", result.fused().corner().dim());
    rec.note(format!("E_{first} ⊗ E_{second} computed over '{algebra}'"));
    emit(rec, objects, name, verbose, "isometry", result.isometry());
    emit(rec, objects, name, verbose, "q", result.q());
    emit(rec, objects, name, verbose, "compressor", result.compressor());
    Ok(())
}

fn demo_jones(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    a1: &str,
    a2: &str,
    state: Option<&str>,
) -> Result<(), Failure> {
    let big = objects.algebra(a1)?.algebra.clone();
    let small = objects.algebra(a2)?.algebra.clone();
    let phi2 = match state {
        Some(s) => objects.state(s)?.clone(),
        None => core(small.canonical_trace())?,
    };
    let spec = core(InclusionSpec::new(&big, &small, &phi2))?;
    let jones = core(build_inclusion_bimodule(&spec))?;

    let mut ok = true;
    let mut worst = 0.0f64;
    let e = jones.projection();
    let pi1 = jones.left_l2().left_rep();
    for a in big.basis() {
        let lhs = e * core(pi1.apply(a))? * e;
        let expected = core(spec.expectation().apply(a))?;
        let rhs = core(pi1.apply(&expected))? * e;
        let defect = hs_distance(&lhs, &rhs);
        ok &= defect <= objects.tol.residual_for(hs_norm(&rhs));
        worst = worst.max(defect);
    }
    rec.verdict("jones_identity", ok);
    rec.residual("jones_identity", worst);

    let (v1, v2) = core(jones_vs_stinespring(&spec))?;
    rec.verdict("matches_stinespring", true);
    let eye1 = CMat::identity(v1.nrows(), v1.nrows());
    let eye2 = CMat::identity(v2.nrows(), v2.nrows());
    rec.residual(
        "stinespring_iso_unitarity",
        hs_distance(&(v1.adjoint() * &v1), &eye1).max(hs_distance(&(v2.adjoint() * &v2), &eye2)),
    );
    rec.dimension("a1_dim", big.dim());
    rec.dimension("a2_dim", small.dim());
    rec.dimension("l2_a1", jones.left_l2().carrier_dim());
    rec.dimension("l2_a2", jones.right_l2().carrier_dim());
    rec.dimension("corner_dim", jones.bimodule().corner().dim());
    rec.note(format!(
        "the projection implements the expectation of '{a1}' onto '{a2}'"
    ));
    emit(rec, objects, name, verbose, "isometry", jones.isometry());
    emit(rec, objects, name, verbose, "projection", jones.projection());
    Ok(())
}

/// Map the fused module through the composition isomorphism and measure how
/// far the image sits from the module of the composed automorphism.
fn composition_residual(
    m: &VnAlgebra,
    th: &Automorphism,
    ph: &Automorphism,
    cls: &AutoClassification,
) -> hvnm::Result<(bool, f64, bool)> {
    let composed = th.compose(ph)?;
    let target = build_auto_bimodule(m, &composed)?;
    let (u1, u2) = &cls.composition_iso;
    let mut ok = true;
    let mut worst = 0.0f64;
    for b in cls.fusion.fused().corner().basis() {
        let moved = u1 * b * u2.adjoint();
        let membership = target.bimodule().corner().space().membership(&moved)?;
        ok &= membership.contained;
        worst = worst.max(membership.residual);
    }
    for b in target.bimodule().corner().basis() {
        let moved = u1.adjoint() * b * u2;
        let membership = cls.fusion.fused().corner().space().membership(&moved)?;
        ok &= membership.contained;
        worst = worst.max(membership.residual);
    }
    Ok((ok, worst, composed.is_identity()?))
}

fn demo_auto(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    algebra: &str,
    automorphism: &str,
) -> Result<(), Failure> {
    let m = objects.algebra(algebra)?.algebra.clone();
    let th = objects.auto(automorphism)?.clone();
    let cls = core(classify_auto_bimodules(&m, &th, &th))?;
    let standardness = core(is_standard(cls.first.bimodule()))?;
    rec.verdict("standard", standardness.standard);
    rec.flag("non_degenerate", standardness.non_degenerate);
    rec.verdict("self_isomorphic", cls.conjugate);
    let (ok, worst, composed_is_id) = core(composition_residual(&m, &th, &th, &cls))?;
    rec.verdict("fusion_matches_composition", ok);
    rec.residual("composition_iso", worst);
    rec.dimension("module_dim", cls.first.bimodule().corner().dim());
    rec.dimension("carrier_dim", cls.first.gns().carrier_dim());
    rec.dimension("multiplicity", cls.fusion.multiplicity());
    let target = if composed_is_id {
        "E_id".to_string()
    } else {
        format!("E_{automorphism}∘{automorphism}")
    };
    rec.note(format!(
        "E_{automorphism} ⊗ E_{automorphism} ≅ {target}: verified"
    ));
    emit(
        rec,
        objects,
        name,
        verbose,
        "unitary",
        cls.first.implementing_unitary(),
    );
    Ok(())
}

fn classify_task(
    rec: &mut TaskRecord,
    objects: &mut Objects,
    name: Option<&str>,
    verbose: bool,
    algebra: &str,
    first: &str,
    second: &str,
) -> Result<(), Failure> {
    let m = objects.algebra(algebra)?.algebra.clone();
    let th = objects.auto(first)?.clone();
    let ph = objects.auto(second)?.clone();
    let cls = core(classify_auto_bimodules(&m, &th, &ph))?;
    rec.verdict("isomorphic", cls.conjugate);
    rec.dimension("module_dim", cls.first.bimodule().corner().dim());
    rec.dimension("multiplicity", cls.fusion.multiplicity());
    if cls.conjugate {
        rec.note(format!(
            "E_{first} ≅ E_{second}: the automorphisms are inner conjugate"
        ));
        if let Some((w1, w2)) = &cls.module_map {
            let mut ok = true;
            let mut worst = 0.0f64;
            for b in cls.first.bimodule().corner().basis() {
                let moved = w1 * b * w2.adjoint();
                let membership =
                    core(cls.second.bimodule().corner().space().membership(&moved))?;
                ok &= membership.contained;
                worst = worst.max(membership.residual);
            }
            rec.verdict("module_map", ok);
            rec.residual("module_map", worst);
            emit(rec, objects, name, verbose, "w1", w1);
            emit(rec, objects, name, verbose, "w2", w2);
        }
        if let Some(u) = &cls.conjugacy_witness {
            emit(rec, objects, name, verbose, "witness", u);
        }
    } else {
        rec.note(format!(
            "E_{first} ≇ E_{second}: no unitary in the algebra conjugates one \
             automorphism into the other"
        ));
    }
    let (ok, worst, composed_is_id) = core(composition_residual(&m, &th, &ph, &cls))?;
    rec.verdict("fusion_matches_composition", ok);
    rec.residual("composition_iso", worst);
    let target = if composed_is_id {
        "E_id".to_string()
    } else {
        format!("E_{first}∘{second}")
    };
    rec.note(format!("E_{first} ⊗ E_{second} ≅ {target}: verified"));
    Ok(())
}
