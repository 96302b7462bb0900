//! Connes fusion of bimodules over a common middle algebra, built from a
//! finite ampliation: an intertwining isometry u embeds the right factor's
//! left carrier into H₂ ⊗ ℂʳ, the induced projection q cuts the ampliated
//! left carrier down, and the fused elements are the composites
//! (x ⊗ 1)·u·y compressed to the range of q.

use crate::error::{Error, Result};
use crate::gns::{representation_isometry, Representation};
use crate::hvnmod::{a2_inner_product, HvnBimodule};
use crate::numlin::{
    ampliate, eigh, hs_distance, hs_norm, lstsq, svd_checked, CMat, Tolerance,
};

/// Projection onto the joint ranges of a family of equal-shape matrices.
fn range_projection(rows: usize, mats: &[CMat], tol: Tolerance) -> Result<CMat> {
    if mats.is_empty() {
        return Ok(CMat::zeros(rows, rows));
    }
    let cols: usize = mats.iter().map(|m| m.ncols()).sum();
    let mut stacked = CMat::zeros(rows, cols);
    let mut at = 0;
    for m in mats {
        stacked.view_mut((0, at), (rows, m.ncols())).copy_from(m);
        at += m.ncols();
    }
    let svd = svd_checked(&stacked)?;
    let cutoff = tol.rank_tol * svd.smax();
    let mut q = CMat::zeros(rows, rows);
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] > cutoff {
            let col = svd.u.column(i);
            q += CMat::from_fn(rows, rows, |r, c| col[r] * col[c].conj());
        }
    }
    Ok(q)
}

fn check_projection(p: &CMat, tol: Tolerance) -> Result<()> {
    let defect =
        hs_distance(&(p * p), p).max(hs_distance(&p.adjoint(), p));
    if defect > tol.residual_for(hs_norm(p)) {
        return Err(Error::NotProjection { defect });
    }
    Ok(())
}

fn check_in_commutant(x: &CMat, images: &[CMat], tol: Tolerance) -> Result<()> {
    for im in images {
        let comm = x * im - im * x;
        let defect = hs_norm(&comm);
        if defect > tol.residual_for(hs_norm(im) * hs_norm(x).max(1.0)) {
            return Err(Error::NotInCommutant {
                with: "the representation",
                defect,
            });
        }
    }
    Ok(())
}

/// The projection induced on the left carrier by a projection p commuting
/// with the right action: q spans the ranges of x·p over the corner.
pub fn induced_projection(b: &HvnBimodule, p: &CMat) -> Result<CMat> {
    let tol = b.tol();
    check_projection(p, tol)?;
    check_in_commutant(p, b.pi2().images(), tol)?;
    let products: Vec<CMat> = b.corner().basis().iter().map(|x| x * p).collect();
    let q = range_projection(b.corner().dim1(), &products, tol)?;
    verify_induced(b.corner().basis(), b.pi1().map(|r| r.images()), &q, p, tol)?;
    Ok(q)
}

/// The three identities of the induced projection, plus commutation with
/// the left action when one is present.
fn verify_induced(
    basis: &[CMat],
    left_images: Option<&[CMat]>,
    q: &CMat,
    p: &CMat,
    tol: Tolerance,
) -> Result<()> {
    for y in basis {
        let yp = y * p;
        let qy = q * y;
        let qyp = q * &yp;
        let bound = tol.residual_for(hs_norm(y));
        let defect = hs_distance(&qyp, &qy).max(hs_distance(&qy, &yp));
        if defect > bound {
            return Err(Error::inconsistency(
                "induced projection absorbs the corner",
                defect,
            ));
        }
    }
    if let Some(images) = left_images {
        check_in_commutant(q, images, tol)
            .map_err(|_| Error::inconsistency("induced projection commutes with the left action", 0.0))?;
    }
    Ok(())
}

/// The partial isometry induced on the left carrier by a partial isometry
/// w commuting with the right action: w₁·x·(w*w) = x·w on the corner, with
/// initial and final projections induced from w*w and ww*.
pub fn induced_partial_isometry(b: &HvnBimodule, w: &CMat) -> Result<CMat> {
    let tol = b.tol();
    check_in_commutant(w, b.pi2().images(), tol)?;
    let p = w.adjoint() * w;
    let p_tilde = w * w.adjoint();
    check_projection(&p, tol).map_err(|_| Error::NotPartialIsometry {
        defect: hs_distance(&(&p * &p), &p),
    })?;
    let q = induced_projection(b, &p)?;
    let q_tilde = induced_projection(b, &p_tilde)?;

    let d1 = b.corner().dim1();
    let d2 = b.corner().dim2();
    let n = b.corner().dim();
    let mut v = CMat::zeros(d1, n * d2);
    let mut target = CMat::zeros(d1, n * d2);
    for (j, x) in b.corner().basis().iter().enumerate() {
        v.view_mut((0, j * d2), (d1, d2)).copy_from(&(x * &p));
        target.view_mut((0, j * d2), (d1, d2)).copy_from(&(x * w));
    }
    let w1 = lstsq(&v.adjoint(), &target.adjoint(), tol)?.adjoint() * &q;

    let defect = hs_distance(&(w1.adjoint() * &w1), &q)
        .max(hs_distance(&(&w1 * w1.adjoint()), &q_tilde));
    if defect > tol.residual_for(hs_norm(&q).max(1.0)) {
        return Err(Error::inconsistency(
            "induced partial isometry supports",
            defect,
        ));
    }
    for x in b.corner().basis() {
        let lhs = &w1 * x * &p;
        let rhs = x * w;
        let d = hs_distance(&lhs, &rhs);
        if d > tol.residual_for(hs_norm(&rhs).max(1.0)) {
            return Err(Error::inconsistency(
                "induced partial isometry defining relation",
                d,
            ));
        }
    }
    if let Some(rep) = b.pi1() {
        check_in_commutant(&w1, rep.images(), tol).map_err(|_| {
            Error::inconsistency("induced partial isometry commutes with the left action", 0.0)
        })?;
    }
    Ok(w1)
}

/// A completed fusion: the intertwining isometry, both cut-down
/// projections, the compression onto the new left carrier, and the fused
/// module itself.
#[derive(Clone, Debug)]
pub struct FusionResult {
    left: HvnBimodule,
    right: HvnBimodule,
    r: usize,
    u: CMat,
    p: CMat,
    q: CMat,
    compressor: CMat,
    fused: HvnBimodule,
    left_action_faithful: Option<bool>,
}

impl FusionResult {
    pub fn left(&self) -> &HvnBimodule {
        &self.left
    }

    pub fn right(&self) -> &HvnBimodule {
        &self.right
    }

    /// Ampliation multiplicity replacing the infinite tensor factor.
    pub fn multiplicity(&self) -> usize {
        self.r
    }

    pub fn isometry(&self) -> &CMat {
        &self.u
    }

    pub fn p(&self) -> &CMat {
        &self.p
    }

    pub fn q(&self) -> &CMat {
        &self.q
    }

    /// Isometry from the fused left carrier onto the range of q.
    pub fn compressor(&self) -> &CMat {
        &self.compressor
    }

    pub fn fused(&self) -> &HvnBimodule {
        &self.fused
    }

    /// Faithfulness of the compressed left action; None for module-only
    /// fusion.
    pub fn left_action_faithful(&self) -> Option<bool> {
        self.left_action_faithful
    }

    /// The fused element x ⨀ y on the compressed carrier.
    pub fn fused_element(&self, x: &CMat, y: &CMat) -> Result<CMat> {
        let tol = self.left.tol();
        let mx = self.left.corner().space().membership(x)?;
        if !mx.contained {
            return Err(Error::NotMember {
                residual: mx.residual,
                tol: tol.residual_for(hs_norm(x)),
            });
        }
        let my = self.right.corner().space().membership(y)?;
        if !my.contained {
            return Err(Error::NotMember {
                residual: my.residual,
                tol: tol.residual_for(hs_norm(y)),
            });
        }
        Ok(self.compressor.adjoint() * ampliate(x, self.r) * &self.u * y)
    }
}

/// Fuse an A₁–A₂ module with an A₂–A₃ bimodule over the shared middle
/// algebra. The intertwining isometry is produced internally with the
/// minimal ampliation.
pub fn fuse(ebim: &HvnBimodule, fbim: &HvnBimodule) -> Result<FusionResult> {
    let rho2 = fbim.pi1().ok_or_else(|| {
        Error::AlgebraMismatch("the right factor of a fusion must carry a left action".into())
    })?;
    if !ebim.a2().same_algebra_as(rho2.algebra())? {
        return Err(Error::AlgebraMismatch(
            "middle algebras of the fusion differ".into(),
        ));
    }
    let (u, r) = representation_isometry(rho2, ebim.pi2())?;
    fuse_with_isometry(ebim, fbim, &u, r)
}

/// The fusion construction for a caller-supplied intertwining isometry.
fn fuse_with_isometry(
    ebim: &HvnBimodule,
    fbim: &HvnBimodule,
    u: &CMat,
    r: usize,
) -> Result<FusionResult> {
    let tol = ebim.tol();
    let rho2 = fbim.pi1().expect("validated by callers");
    let d_h2 = ebim.corner().dim2();
    let d_k2 = fbim.corner().dim1();
    if u.shape() != (d_h2 * r, d_k2) {
        return Err(Error::shape(
            format!("{}x{}", d_h2 * r, d_k2),
            crate::numlin::shape_string(u),
        ));
    }
    check_isometry_contract(u, r, rho2, ebim.pi2(), tol)?;
    let p = u * u.adjoint();

    // Induced projection of the ampliated module.
    let amp_basis: Vec<CMat> = ebim
        .corner()
        .basis()
        .iter()
        .map(|x| ampliate(x, r))
        .collect();
    let products: Vec<CMat> = amp_basis.iter().map(|x| x * &p).collect();
    let d1r = ebim.corner().dim1() * r;
    let q = range_projection(d1r, &products, tol)?;
    let amp_left: Option<Vec<CMat>> = ebim
        .pi1()
        .map(|rep| rep.images().iter().map(|im| ampliate(im, r)).collect());
    verify_induced(&amp_basis, amp_left.as_deref(), &q, &p, tol)?;

    // Orthonormal basis of ran q as the compressed carrier.
    let (vals, vecs) = eigh(&q)?;
    let kept: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let s = kept.len();
    if s == 0 {
        return Err(Error::inconsistency(
            "induced projection of a fusion is nonzero",
            0.0,
        ));
    }
    let mut z = CMat::zeros(d1r, s);
    for (col, &i) in kept.iter().enumerate() {
        z.set_column(col, &vecs.column(i).into_owned());
    }

    // Fused corner elements (x ⊗ 1)·u·y compressed to ran q.
    let mut fused_basis = Vec::with_capacity(amp_basis.len() * fbim.corner().dim());
    for x in &amp_basis {
        let head = z.adjoint() * x * u;
        for y in fbim.corner().basis() {
            fused_basis.push(&head * y);
        }
    }
    let (corner, report) = crate::corner::verify_corner(&fused_basis, tol)?;
    let corner = corner.ok_or_else(|| {
        Error::inconsistency("fused span is a corner", report.worst_residual)
    })?;

    // Inner product identity on generator quadruples:
    // ⟨x₁⨀y₁, x₂⨀y₂⟩ = y₁*·ρ₂(⟨x₁,x₂⟩)·y₂.
    let e_basis = ebim.corner().basis();
    let f_basis = fbim.corner().basis();
    let fused_at = |i: usize, j: usize| &fused_basis[i * f_basis.len() + j];
    for (i1, x1) in e_basis.iter().enumerate() {
        for (i2, x2) in e_basis.iter().enumerate() {
            let mid = rho2.apply(&ebim.a2_element(&a2_inner_product(ebim, x1, x2)?))?;
            for (j1, y1) in f_basis.iter().enumerate() {
                for (j2, y2) in f_basis.iter().enumerate() {
                    let lhs = fused_at(i1, j1).adjoint() * fused_at(i2, j2);
                    let rhs = y1.adjoint() * &mid * y2;
                    let defect = hs_distance(&lhs, &rhs);
                    if defect > tol.residual_for(hs_norm(&rhs).max(1.0)) {
                        return Err(Error::inconsistency(
                            "fused inner product identity",
                            defect,
                        ));
                    }
                }
            }
        }
    }

    // Left action compressed by q, when the left factor is a bimodule.
    let fused_pi1 = match (ebim.pi1(), amp_left.as_ref()) {
        (Some(rep), Some(images)) => {
            let compressed: Vec<CMat> = images
                .iter()
                .map(|im| z.adjoint() * im * &z)
                .collect();
            Some(Representation::new(rep.algebra(), compressed)?)
        }
        _ => None,
    };
    let left_action_faithful = match &fused_pi1 {
        Some(rep) => Some(rep.is_faithful()?),
        None => None,
    };
    // A factor in the middle keeps cut-down representations faithful; a
    // failure there is a broken invariant rather than a property of the
    // input.
    if let (Some(false), Ok(blocks)) = (left_action_faithful, ebim.a2().blocks()) {
        if blocks.len() == 1 && ebim.pi1().map(|rep| rep.is_faithful()).transpose()? == Some(true)
        {
            return Err(Error::inconsistency(
                "factor fusion preserves left faithfulness",
                0.0,
            ));
        }
    }
    let fused = HvnBimodule::new(corner, fbim.pi2().clone(), fused_pi1)?;

    Ok(FusionResult {
        left: ebim.clone(),
        right: fbim.clone(),
        r,
        u: u.clone(),
        p,
        q,
        compressor: z,
        fused,
        left_action_faithful,
    })
}

fn check_isometry_contract(
    u: &CMat,
    r: usize,
    rho2: &Representation,
    pi2: &Representation,
    tol: Tolerance,
) -> Result<()> {
    let id = CMat::identity(u.ncols(), u.ncols());
    let defect = hs_distance(&(u.adjoint() * u), &id);
    if defect > tol.residual_for(hs_norm(&id)) {
        return Err(Error::NotPartialIsometry { defect });
    }
    for (a, img) in rho2.algebra().basis().iter().zip(rho2.images()) {
        let lhs = u * img;
        let rhs = ampliate(&pi2.apply(a)?, r) * u;
        let defect = hs_distance(&lhs, &rhs);
        if defect > tol.residual_for(hs_norm(&rhs).max(1.0)) {
            return Err(Error::NotRepresentation {
                kind: "isometry intertwines the right actions",
                defect,
            });
        }
    }
    Ok(())
}

/// Two fusions of one pair along different isometries, with the unitary
/// carrying one onto the other (identity on the shared right carrier).
#[derive(Clone, Debug)]
pub struct FusionComparison {
    /// Partial isometry on the ampliated left carrier with initial
    /// projection q_a and final projection q_b.
    pub w_full: CMat,
    /// The same map compressed to the two fused carriers; unitary.
    pub w: CMat,
    pub fused_a: FusionResult,
    pub fused_b: FusionResult,
}

/// Fusion does not depend on the choice of intertwining isometry: the
/// induced partial isometry of w = u_b·u_a* restricts to a unitary between
/// the two fused left carriers which, with the identity on the right
/// carrier, is an isomorphism of the fused modules.
pub fn fusion_u_independence(
    ebim: &HvnBimodule,
    fbim: &HvnBimodule,
    u_a: &CMat,
    u_b: &CMat,
) -> Result<FusionComparison> {
    let tol = ebim.tol();
    let d_h2 = ebim.corner().dim2();
    let slots = |u: &CMat| -> Result<usize> {
        if u.nrows() % d_h2 != 0 || u.nrows() == 0 {
            return Err(Error::shape(
                format!("multiple of {d_h2} rows"),
                format!("{} rows", u.nrows()),
            ));
        }
        Ok(u.nrows() / d_h2)
    };
    let r = slots(u_a)?.max(slots(u_b)?);
    let pad = |u: &CMat| -> CMat {
        let r_in = u.nrows() / d_h2;
        let mut out = CMat::zeros(d_h2 * r, u.ncols());
        for i in 0..d_h2 {
            for s in 0..r_in {
                for c in 0..u.ncols() {
                    out[(i * r + s, c)] = u[(i * r_in + s, c)];
                }
            }
        }
        out
    };
    let (ua, ub) = (pad(u_a), pad(u_b));
    let fused_a = fuse_with_isometry(ebim, fbim, &ua, r)?;
    let fused_b = fuse_with_isometry(ebim, fbim, &ub, r)?;

    // The comparison isometry on the ampliated carrier.
    let w = &ub * ua.adjoint();
    let amp_basis: Vec<CMat> = ebim
        .corner()
        .basis()
        .iter()
        .map(|x| ampliate(x, r))
        .collect();
    let amp_pi2: Vec<CMat> = ebim
        .pi2()
        .images()
        .iter()
        .map(|im| ampliate(im, r))
        .collect();
    check_in_commutant(&w, &amp_pi2, tol)?;
    let d1r = ebim.corner().dim1() * r;
    let n = amp_basis.len();
    let d2r = d_h2 * r;
    let mut v = CMat::zeros(d1r, n * d2r);
    let mut target = CMat::zeros(d1r, n * d2r);
    for (j, x) in amp_basis.iter().enumerate() {
        v.view_mut((0, j * d2r), (d1r, d2r))
            .copy_from(&(x * fused_a.p()));
        target
            .view_mut((0, j * d2r), (d1r, d2r))
            .copy_from(&(x * &w));
    }
    let w_full = lstsq(&v.adjoint(), &target.adjoint(), tol)?.adjoint() * fused_a.q();
    let support_defect = hs_distance(&(w_full.adjoint() * &w_full), fused_a.q())
        .max(hs_distance(&(&w_full * w_full.adjoint()), fused_b.q()));
    if support_defect > tol.residual_for(hs_norm(fused_a.q()).max(1.0)) {
        return Err(Error::inconsistency(
            "comparison isometry supports",
            support_defect,
        ));
    }

    let wc = fused_b.compressor().adjoint() * &w_full * fused_a.compressor();
    let sa = fused_a.compressor().ncols();
    let sb = fused_b.compressor().ncols();
    let unitary_defect = hs_distance(&(wc.adjoint() * &wc), &CMat::identity(sa, sa))
        .max(hs_distance(&(&wc * wc.adjoint()), &CMat::identity(sb, sb)));
    if unitary_defect > tol.residual_for((sa as f64).sqrt()) {
        return Err(Error::inconsistency(
            "compressed comparison is unitary",
            unitary_defect,
        ));
    }

    // (W, id) transports one fused module onto the other, respecting both
    // actions.
    for x in fused_a.fused().corner().basis() {
        let moved = &wc * x;
        let m = fused_b.fused().corner().space().membership(&moved)?;
        if !m.contained {
            return Err(Error::inconsistency(
                "comparison maps the fused corner forward",
                m.residual,
            ));
        }
    }
    for y in fused_b.fused().corner().basis() {
        let back = wc.adjoint() * y;
        let m = fused_a.fused().corner().space().membership(&back)?;
        if !m.contained {
            return Err(Error::inconsistency(
                "comparison maps the fused corner backward",
                m.residual,
            ));
        }
    }
    if let (Some(ra), Some(rb)) = (fused_a.fused().pi1(), fused_b.fused().pi1()) {
        for a in ra.algebra().basis() {
            let lhs = &wc * ra.apply(a)?;
            let rhs = rb.apply(a)? * &wc;
            let defect = hs_distance(&lhs, &rhs);
            if defect > tol.residual_for(hs_norm(&rhs).max(1.0)) {
                return Err(Error::inconsistency(
                    "comparison is left-linear",
                    defect,
                ));
            }
        }
    }

    Ok(FusionComparison {
        w_full,
        w: wc,
        fused_a,
        fused_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::VnAlgebra;
    use crate::hvnmod::{is_standard, krpisom_check, KrpIsomOutcome};
    use crate::numlin::{hermitian_function, Complex};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn identity_module_m2() -> HvnBimodule {
        let a = VnAlgebra::full(2, tol()).unwrap();
        let phi = a.canonical_trace().unwrap();
        HvnBimodule::identity(&a, &phi).unwrap()
    }

    /// The identity module with its carrier doubled: left multiplicity 4.
    fn doubled_module_m2() -> HvnBimodule {
        let b = identity_module_m2();
        let a = b.a2().clone();
        let images: Vec<CMat> = b.pi2().images().iter().map(|im| ampliate(im, 2)).collect();
        let rep = Representation::new(&a, images.clone()).unwrap();
        let (corner, _) = crate::corner::verify_corner(&images, tol()).unwrap();
        HvnBimodule::new(corner.unwrap(), rep.clone(), Some(rep)).unwrap()
    }

    fn random_commutant_projection(b: &HvnBimodule, seed: u64) -> CMat {
        let comm = VnAlgebra::from_closed_span(b.pi2().images(), tol())
            .unwrap()
            .commutant()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = comm.ambient_dim();
        let mut h = CMat::zeros(d, d);
        for x in comm.basis() {
            let re: f64 = rng.sample(StandardNormal);
            h += x * c(re, 0.0);
        }
        let h = &h + h.adjoint();
        // Spectral indicator cut inside the widest gap, so degenerate
        // multiplets are never split.
        let (vals, _) = eigh(&h).unwrap();
        let gap = (0..vals.len() - 1)
            .max_by(|&i, &j| {
                (vals[i + 1] - vals[i])
                    .partial_cmp(&(vals[j + 1] - vals[j]))
                    .unwrap()
            })
            .unwrap();
        let cut = 0.5 * (vals[gap] + vals[gap + 1]);
        hermitian_function(&h, |t| if t > cut { 1.0 } else { 0.0 }, tol()).unwrap()
    }

    #[test]
    fn induced_projection_extremes() {
        let b = identity_module_m2();
        let id = CMat::identity(4, 4);
        let q = induced_projection(&b, &id).unwrap();
        assert!(hs_distance(&q, b.corner().p1()) < 1e-9);

        let q = induced_projection(&b, &CMat::zeros(4, 4)).unwrap();
        assert!(hs_norm(&q) < 1e-10);
    }

    #[test]
    fn induced_projection_respects_lemma_identities() {
        let b = identity_module_m2();
        for seed in [3u64, 5, 7] {
            let p = random_commutant_projection(&b, seed);
            let q = induced_projection(&b, &p).unwrap();
            for y in b.corner().basis() {
                let yp = y * &p;
                assert!(hs_distance(&(&q * y), &yp) < 1e-8);
                assert!(hs_distance(&(&q * &yp), &yp) < 1e-8);
            }
        }
    }

    #[test]
    fn induced_projection_rejects_non_commutant() {
        let b = identity_module_m2();
        // A projection inside the left action itself does not commute with
        // the right action.
        let mut p = CMat::zeros(4, 4);
        p[(0, 0)] = c(1.0, 0.0);
        assert!(matches!(
            induced_projection(&b, &p),
            Err(Error::NotInCommutant { .. })
        ));
    }

    #[test]
    fn induced_partial_isometry_examples() {
        let b = identity_module_m2();
        let id = CMat::identity(4, 4);
        let w1 = induced_partial_isometry(&b, &id).unwrap();
        assert!(hs_distance(&w1, b.corner().p1()) < 1e-8);

        let w1 = induced_partial_isometry(&b, &CMat::zeros(4, 4)).unwrap();
        assert!(hs_norm(&w1) < 1e-9);

        // A unitary in the commutant induces a unitary intertwiner.
        let comm = VnAlgebra::from_closed_span(b.pi2().images(), tol())
            .unwrap()
            .commutant()
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut h = CMat::zeros(4, 4);
        for x in comm.basis() {
            let re: f64 = rng.sample(StandardNormal);
            h += x * c(re, 0.0);
        }
        let h = &h + h.adjoint();
        let w = crate::numlin::polar(&h, tol()).unwrap().u;
        let w1 = induced_partial_isometry(&b, &w).unwrap();
        assert!(hs_distance(&(w1.adjoint() * &w1), b.corner().p1()) < 1e-8);
        for x in b.corner().basis() {
            assert!(hs_distance(&(&w1 * x), &(x * &w)) < 1e-8);
        }
    }

    #[test]
    fn fusing_identity_modules_gives_the_identity_module() {
        let b = identity_module_m2();
        let result = fuse(&b, &b).unwrap();
        assert_eq!(result.multiplicity(), 1);
        assert_eq!(result.fused().corner().dim(), 4);
        assert!(is_standard(result.fused()).unwrap().standard);
        assert_eq!(result.left_action_faithful(), Some(true));

        // Matched generators x ⨀ 1 against x exhibit the isomorphism with
        // the identity module itself.
        let unit_of_f = b.pi2().apply(b.a2().unit()).unwrap();
        let gens_fused: Vec<CMat> = b
            .corner()
            .basis()
            .iter()
            .map(|x| result.fused_element(x, &unit_of_f).unwrap())
            .collect();
        let gens_plain: Vec<CMat> = b.corner().basis().to_vec();
        match krpisom_check(result.fused(), &b, &gens_fused, &gens_plain).unwrap() {
            KrpIsomOutcome::Isomorphic { .. } => {}
            KrpIsomOutcome::GramMismatch { pair, defect } => {
                panic!("unexpected Gram mismatch at {pair:?} with defect {defect:.3e}")
            }
        }
    }

    #[test]
    fn fusing_into_a_doubled_carrier_needs_multiplicity_two() {
        let e = identity_module_m2();
        let f = doubled_module_m2();
        let result = fuse(&e, &f).unwrap();
        assert_eq!(result.multiplicity(), 2);
        // The fused module keeps F's right side.
        assert_eq!(result.fused().corner().dim2(), 8);
        assert_eq!(result.fused().corner().dim(), 4);
        assert_eq!(result.left_action_faithful(), Some(true));
    }

    #[test]
    fn module_only_fusion_drops_the_left_action() {
        let e = identity_module_m2();
        let module_only = HvnBimodule::new(e.corner().clone(), e.pi2().clone(), None).unwrap();
        let f = identity_module_m2();
        let result = fuse(&module_only, &f).unwrap();
        assert!(result.fused().pi1().is_none());
        assert_eq!(result.left_action_faithful(), None);
        assert_eq!(result.fused().corner().dim(), 4);
    }

    #[test]
    fn same_isometry_comparison_is_the_induced_projection() {
        let e = identity_module_m2();
        let f = identity_module_m2();
        let (u, _) = representation_isometry(f.pi1().unwrap(), e.pi2()).unwrap();
        let cmp = fusion_u_independence(&e, &f, &u, &u).unwrap();
        assert!(hs_distance(&cmp.w_full, cmp.fused_a.q()) < 1e-8);
    }

    #[test]
    fn slot_permutation_comparison_is_the_compressed_permutation() {
        let e = identity_module_m2();
        let f = doubled_module_m2();
        let (u_a, r) = representation_isometry(f.pi1().unwrap(), e.pi2()).unwrap();
        assert_eq!(r, 2);
        // Swap the two ampliation slots.
        let mut perm = CMat::zeros(2, 2);
        perm[(0, 1)] = c(1.0, 0.0);
        perm[(1, 0)] = c(1.0, 0.0);
        let big_perm = CMat::identity(4, 4).kronecker(&perm);
        let u_b = &big_perm * &u_a;
        let cmp = fusion_u_independence(&e, &f, &u_a, &u_b).unwrap();
        let d1r = 8;
        let expected = cmp.fused_b.q() * CMat::identity(4, 4).kronecker(&perm) * cmp.fused_a.q();
        assert_eq!(expected.nrows(), d1r);
        assert!(hs_distance(&cmp.w_full, &expected) < 1e-8);
    }
}
