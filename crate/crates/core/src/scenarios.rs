//! End-to-end constructions: the basic-construction bimodule of a unital
//! inclusion, its agreement with the Stinespring dilation of the
//! conditional expectation, and automorphism bimodules together with
//! their classification and fusion behaviour.

use crate::algebra::{
    conditional_expectation, Automorphism, ConditionalExpectation, State, VnAlgebra,
};
use crate::corner::verify_corner;
use crate::cpmap::{stinespring_dilate, CpMap};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionResult};
use crate::gns::{gns_construct, GnsSpace};
use crate::hvnmod::{inner_conjugacy, krpisom_check, HvnBimodule, KrpIsomOutcome};
use crate::numlin::{hs_distance, hs_norm, CMat, CVec, OperatorSpace};

/// A unital inclusion A₂ ⊆ A₁ carrying the trace-preserving conditional
/// expectation onto A₂ and the pair of states φ₂, φ₁ = φ₂∘ε.
#[derive(Clone, Debug)]
pub struct InclusionSpec {
    a1: VnAlgebra,
    a2: VnAlgebra,
    phi2: State,
    phi1: State,
    eps: ConditionalExpectation,
}

impl InclusionSpec {
    pub fn new(a1: &VnAlgebra, a2: &VnAlgebra, phi2: &State) -> Result<Self> {
        if !phi2.algebra().same_algebra_as(a2)? {
            return Err(Error::AlgebraMismatch(
                "state lives on a different algebra than the subalgebra".into(),
            ));
        }
        if !phi2.is_faithful() {
            return Err(Error::InvalidState {
                property: "faithfulness",
                defect: 0.0,
            });
        }
        let trace = a1.canonical_trace()?;
        let eps = conditional_expectation(a1, a2, &trace)?;
        let values = CVec::from_iterator(
            a1.dim(),
            a1.basis()
                .iter()
                .map(|b| eps.apply(b).map(|image| phi2.eval(&image)))
                .collect::<Result<Vec<_>>>()?,
        );
        let phi1 = State::on_basis(a1.clone(), values)?;
        if !phi1.is_faithful() {
            return Err(Error::InvalidState {
                property: "faithfulness of the induced state",
                defect: 0.0,
            });
        }
        Ok(InclusionSpec {
            a1: a1.clone(),
            a2: a2.clone(),
            phi2: phi2.clone(),
            phi1,
            eps,
        })
    }

    pub fn a1(&self) -> &VnAlgebra {
        &self.a1
    }

    pub fn a2(&self) -> &VnAlgebra {
        &self.a2
    }

    pub fn phi1(&self) -> &State {
        &self.phi1
    }

    pub fn phi2(&self) -> &State {
        &self.phi2
    }

    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.eps
    }

    /// The conditional expectation packaged as a unital positive map
    /// A₁ → A₂.
    pub fn expectation_as_cp(&self) -> Result<CpMap> {
        let images = self
            .a1
            .basis()
            .iter()
            .map(|b| self.eps.apply(b))
            .collect::<Result<Vec<_>>>()?;
        CpMap::new(self.a1.clone(), self.a2.clone(), images)
    }
}

/// The inclusion bimodule: the isometry identifying L²(A₂) inside L²(A₁),
/// the associated projection, and the module spanned by the left action
/// applied to the isometry.
#[derive(Clone, Debug)]
pub struct JonesConstruction {
    u: CMat,
    e: CMat,
    bimodule: HvnBimodule,
    left_l2: GnsSpace,
    right_l2: GnsSpace,
}

impl JonesConstruction {
    pub fn isometry(&self) -> &CMat {
        &self.u
    }

    pub fn projection(&self) -> &CMat {
        &self.e
    }

    pub fn bimodule(&self) -> &HvnBimodule {
        &self.bimodule
    }

    pub fn left_l2(&self) -> &GnsSpace {
        &self.left_l2
    }

    pub fn right_l2(&self) -> &GnsSpace {
        &self.right_l2
    }
}

pub fn build_inclusion_bimodule(spec: &InclusionSpec) -> Result<JonesConstruction> {
    let tol = spec.a1.tol();
    let gns1 = gns_construct(&spec.a1, &spec.phi1)?;
    let gns2 = gns_construct(&spec.a2, &spec.phi2)?;
    let (d1, d2) = (gns1.carrier_dim(), gns2.carrier_dim());

    // The inclusion map on square-integrable elements; isometric because
    // the big state restricts to the small one.
    let mut u = CMat::zeros(d1, d2);
    for k in 0..d2 {
        let mut ek = CVec::zeros(d2);
        ek[k] = crate::numlin::Complex::new(1.0, 0.0);
        let x = gns2.element_of(&ek);
        u.set_column(k, &gns1.vector_of(&x)?);
    }
    let iso_defect = hs_distance(&(u.adjoint() * &u), &CMat::identity(d2, d2));
    if iso_defect > tol.residual_for((d2 as f64).sqrt()) {
        return Err(Error::inconsistency("inclusion isometry", iso_defect));
    }
    let e = &u * u.adjoint();

    let pi1 = gns1.left_rep().clone();
    let pi2 = gns2.left_rep().clone();

    // The projection implements the expectation: e·π₁(a)·e = π₁(ε(a))·e.
    for b in spec.a1.basis() {
        let lhs = &e * pi1.apply(b)? * &e;
        let rhs = pi1.apply(&spec.eps.apply(b)?)? * &e;
        let defect = hs_distance(&lhs, &rhs);
        if defect > tol.residual_for(hs_norm(&rhs).max(1.0)) {
            return Err(Error::inconsistency(
                "projection implements the expectation",
                defect,
            ));
        }
    }

    let corner_vectors = spec
        .a1
        .basis()
        .iter()
        .map(|b| Ok(pi1.apply(b)? * &u))
        .collect::<Result<Vec<_>>>()?;
    let (corner, report) = verify_corner(&corner_vectors, tol)?;
    let corner = corner.ok_or_else(|| {
        Error::inconsistency("inclusion span is a corner", report.worst_residual)
    })?;

    // The left side algebra is spanned by π₁(A₁)·e·π₁(A₁).
    let mut products = Vec::with_capacity(spec.a1.dim() * spec.a1.dim());
    for a in spec.a1.basis() {
        let head = pi1.apply(a)? * &e;
        for b in spec.a1.basis() {
            products.push(&head * pi1.apply(b)?);
        }
    }
    let generated = OperatorSpace::span(&products, tol)?;
    if !generated.same_space_as(corner.left_algebra().space())? {
        return Err(Error::inconsistency(
            "left side algebra is generated by the projection",
            0.0,
        ));
    }

    let bimodule = HvnBimodule::new(corner, pi2, Some(pi1))?;
    Ok(JonesConstruction {
        u,
        e,
        bimodule,
        left_l2: gns1,
        right_l2: gns2,
    })
}

/// The inclusion bimodule is the Stinespring dilation of the conditional
/// expectation: match the generator families π₁(a)·V·π₂(b) and
/// π₁(a)·U·π₂(b) and return the implementing unitary pair.
pub fn jones_vs_stinespring(spec: &InclusionSpec) -> Result<(CMat, CMat)> {
    let eps_cp = spec.expectation_as_cp()?;
    let dilation = stinespring_dilate(&eps_cp, Some(&spec.phi2))?;
    let jones = build_inclusion_bimodule(spec)?;

    let mut gens_d = Vec::with_capacity(spec.a1.dim() * spec.a2.dim());
    let mut gens_j = Vec::with_capacity(spec.a1.dim() * spec.a2.dim());
    for a in spec.a1.basis() {
        let head_d = dilation.pi1().apply(a)? * dilation.generator();
        let head_j = jones.left_l2.left_rep().apply(a)? * jones.isometry();
        for b in spec.a2.basis() {
            gens_d.push(&head_d * dilation.pi2().apply(b)?);
            gens_j.push(&head_j * jones.right_l2.left_rep().apply(b)?);
        }
    }
    match krpisom_check(dilation.bimodule(), jones.bimodule(), &gens_d, &gens_j)? {
        KrpIsomOutcome::Isomorphic { u1, u2 } => Ok((u1, u2)),
        KrpIsomOutcome::GramMismatch { pair, defect } => Err(Error::inconsistency(
            format!("dilation and inclusion generators disagree at pair {pair:?}"),
            defect,
        )),
    }
}

/// The bimodule of a trace-preserving automorphism: the algebra span
/// shifted by the implementing unitary, with the left regular
/// representation on both sides.
#[derive(Clone, Debug)]
pub struct AutoBimodule {
    theta: Automorphism,
    gns: GnsSpace,
    u_theta: CMat,
    bimodule: HvnBimodule,
}

impl AutoBimodule {
    pub fn algebra(&self) -> &VnAlgebra {
        self.theta.algebra()
    }

    pub fn theta(&self) -> &Automorphism {
        &self.theta
    }

    pub fn gns(&self) -> &GnsSpace {
        &self.gns
    }

    pub fn implementing_unitary(&self) -> &CMat {
        &self.u_theta
    }

    pub fn bimodule(&self) -> &HvnBimodule {
        &self.bimodule
    }
}

pub fn build_auto_bimodule(m: &VnAlgebra, theta: &Automorphism) -> Result<AutoBimodule> {
    if !theta.algebra().same_algebra_as(m)? {
        return Err(Error::AlgebraMismatch(
            "automorphism acts on a different algebra".into(),
        ));
    }
    let tol = m.tol();
    let trace = m.canonical_trace()?;
    let gns = gns_construct(m, &trace)?;
    let u_theta = gns.implementing_unitary(theta)?;
    let vectors = m
        .basis()
        .iter()
        .map(|b| Ok(gns.left_rep().apply(b)? * &u_theta))
        .collect::<Result<Vec<_>>>()?;
    let (corner, report) = verify_corner(&vectors, tol)?;
    let corner = corner.ok_or_else(|| {
        Error::inconsistency("automorphism span is a corner", report.worst_residual)
    })?;
    if corner.dim() != m.dim() {
        return Err(Error::inconsistency(
            "automorphism module dimension",
            (corner.dim() as f64 - m.dim() as f64).abs(),
        ));
    }
    let rep = gns.left_rep().clone();
    let bimodule = HvnBimodule::new(corner, rep.clone(), Some(rep))?;
    Ok(AutoBimodule {
        theta: theta.clone(),
        gns,
        u_theta,
        bimodule,
    })
}

/// Verdict for a pair of automorphism bimodules: inner conjugacy decides
/// isomorphism, and fusing the two modules reproduces the module of the
/// composed automorphism.
#[derive(Clone, Debug)]
pub struct AutoClassification {
    pub first: AutoBimodule,
    pub second: AutoBimodule,
    /// The two automorphisms are inner conjugate, hence the modules are
    /// isomorphic.
    pub conjugate: bool,
    /// Unitary u with second = Ad(u) ∘ first, when conjugate.
    pub conjugacy_witness: Option<CMat>,
    /// Carrier unitaries (w₁, w₂) with x ↦ w₁·x·w₂* mapping the first
    /// module onto the second, when conjugate.
    pub module_map: Option<(CMat, CMat)>,
    /// Fusion of the two modules.
    pub fusion: FusionResult,
    /// Unitary pair carrying the fused module onto the module of the
    /// composed automorphism.
    pub composition_iso: (CMat, CMat),
}

pub fn classify_auto_bimodules(
    m: &VnAlgebra,
    theta: &Automorphism,
    phi: &Automorphism,
) -> Result<AutoClassification> {
    let tol = m.tol();
    let first = build_auto_bimodule(m, theta)?;
    let second = build_auto_bimodule(m, phi)?;
    let (conjugate, conjugacy_witness) = inner_conjugacy(m, theta, phi)?;

    // With second = Ad(u) ∘ first, the pair w₁ = id and w₂ = J·θ⁻¹(u)*·J
    // exchanges the two module spans.
    let module_map = match &conjugacy_witness {
        Some(u) => {
            let gns = first.gns();
            let moved = theta.inverse()?.apply(u)?;
            let w2 = gns
                .modular_conjugation()
                .sandwich(&gns.left_rep().apply(&moved)?.adjoint());
            let d = gns.carrier_dim();
            let w1 = CMat::identity(d, d);
            let unitary_defect =
                hs_distance(&(w2.adjoint() * &w2), &CMat::identity(d, d));
            if unitary_defect > tol.residual_for((d as f64).sqrt()) {
                return Err(Error::inconsistency(
                    "conjugacy module map is unitary",
                    unitary_defect,
                ));
            }
            let forward = first
                .bimodule()
                .corner()
                .space()
                .map_basis(|x| x * w2.adjoint());
            let backward = second.bimodule().corner().space().map_basis(|x| x * &w2);
            let worst = second
                .bimodule()
                .corner()
                .space()
                .worst_residual(forward.iter())?
                .unwrap_or(0.0)
                .max(
                    first
                        .bimodule()
                        .corner()
                        .space()
                        .worst_residual(backward.iter())?
                        .unwrap_or(0.0),
                );
            if worst > tol.residual_tol {
                return Err(Error::inconsistency(
                    "conjugacy module map exchanges the spans",
                    worst,
                ));
            }
            Some((w1, w2))
        }
        None => None,
    };

    // Fusion corresponds to composition: matched generators
    // π(mᵢ)u_θ ⨀ π(mⱼ)u_φ against π(mᵢ·θ(mⱼ))·u_θφ.
    let fusion = fuse(first.bimodule(), second.bimodule())?;
    let composed = theta.compose(phi)?;
    let target = build_auto_bimodule(m, &composed)?;
    let rep1 = first.gns().left_rep();
    let rep2 = second.gns().left_rep();
    let rep3 = target.gns().left_rep();
    let mut gens_fused = Vec::with_capacity(m.dim() * m.dim());
    let mut gens_target = Vec::with_capacity(m.dim() * m.dim());
    for mi in m.basis() {
        let x = rep1.apply(mi)? * first.implementing_unitary();
        for mj in m.basis() {
            let y = rep2.apply(mj)? * second.implementing_unitary();
            gens_fused.push(fusion.fused_element(&x, &y)?);
            let product = mi * theta.apply(mj)?;
            gens_target.push(rep3.apply(&product)? * target.implementing_unitary());
        }
    }
    let composition_iso =
        match krpisom_check(fusion.fused(), target.bimodule(), &gens_fused, &gens_target)? {
            KrpIsomOutcome::Isomorphic { u1, u2 } => (u1, u2),
            KrpIsomOutcome::GramMismatch { pair, defect } => {
                return Err(Error::inconsistency(
                    format!("fusion and composition generators disagree at pair {pair:?}"),
                    defect,
                ))
            }
        };

    Ok(AutoClassification {
        first,
        second,
        conjugate,
        conjugacy_witness,
        module_map,
        fusion,
        composition_iso,
    })
}
