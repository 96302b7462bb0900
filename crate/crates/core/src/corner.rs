//! (1,2) corners: rectangular operator spaces closed under the ternary
//! product `x y* z`, together with their support projections and the two
//! algebras they generate on each side.
//!
//! A corner between ℂᵈ² and ℂᵈ¹ is a subspace E of d₁×d₂ matrices with
//! `E·E*·E ⊆ E`. Its left algebra [EE*] and right algebra [E*E] act as
//! compressions by the support projections p₁ and p₂.

use crate::algebra::VnAlgebra;
use crate::error::{Error, Result};
use crate::numlin::{
    hs_distance, hs_norm, lstsq, null_space, polar, shape_string, support_projection, vectorize,
    CMat, CVec, OperatorSpace, Tolerance,
};

/// The triple of basis indices at which the ternary-closure check failed,
/// with its membership residual.
#[derive(Clone, Copy, Debug)]
pub struct TripleWitness {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub residual: f64,
}

/// Outcome of a corner verification, kept even when the verdict is
/// negative.
#[derive(Clone, Debug)]
pub struct CornerReport {
    pub worst_residual: f64,
    pub p1: CMat,
    pub p2: CMat,
    pub non_degenerate: bool,
    pub witness: Option<TripleWitness>,
}

/// A verified (1,2) corner.
#[derive(Clone, Debug)]
pub struct Corner {
    space: OperatorSpace,
    p1: CMat,
    p2: CMat,
    m11: VnAlgebra,
    m22: VnAlgebra,
}

impl Corner {
    pub fn dim1(&self) -> usize {
        self.space.rows()
    }

    pub fn dim2(&self) -> usize {
        self.space.cols()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn space(&self) -> &OperatorSpace {
        &self.space
    }

    pub fn basis(&self) -> &[CMat] {
        self.space.basis()
    }

    pub fn tol(&self) -> Tolerance {
        self.space.tol()
    }

    pub fn p1(&self) -> &CMat {
        &self.p1
    }

    pub fn p2(&self) -> &CMat {
        &self.p2
    }

    /// The left algebra [EE*], acting on ℂᵈ¹ with unit p₁.
    pub fn left_algebra(&self) -> &VnAlgebra {
        &self.m11
    }

    /// The right algebra [E*E], acting on ℂᵈ² with unit p₂.
    pub fn right_algebra(&self) -> &VnAlgebra {
        &self.m22
    }

    pub fn contains(&self, x: &CMat) -> Result<bool> {
        self.space.contains(x)
    }

    /// Both support projections equal the ambient identities.
    pub fn is_non_degenerate(&self) -> bool {
        let tol = self.tol();
        let id1 = CMat::identity(self.dim1(), self.dim1());
        let id2 = CMat::identity(self.dim2(), self.dim2());
        hs_distance(&self.p1, &id1) <= tol.residual_for((self.dim1() as f64).sqrt())
            && hs_distance(&self.p2, &id2) <= tol.residual_for((self.dim2() as f64).sqrt())
    }

    /// The full corner of all d₁×d₂ matrices.
    pub fn full(dim1: usize, dim2: usize, tol: Tolerance) -> Result<Corner> {
        let mut units = Vec::with_capacity(dim1 * dim2);
        for i in 0..dim1 {
            for j in 0..dim2 {
                let mut m = CMat::zeros(dim1, dim2);
                m[(i, j)] = crate::numlin::Complex::new(1.0, 0.0);
                units.push(m);
            }
        }
        let (corner, report) = verify_corner(&units, tol)?;
        corner.ok_or_else(|| {
            Error::inconsistency("full corner verification", report.worst_residual)
        })
    }
}

/// Left and right support projections of a rectangular operator space:
/// projections onto the joint ranges of the basis and of its adjoints,
/// cross-checked against the spectral definition through `Σ x x*`.
pub fn support_projections(space: &OperatorSpace) -> Result<(CMat, CMat)> {
    let p1 = one_sided_support(space, false)?;
    let p2 = one_sided_support(space, true)?;
    Ok((p1, p2))
}

fn one_sided_support(space: &OperatorSpace, adjoint: bool) -> Result<CMat> {
    let tol = space.tol();
    let d = if adjoint { space.cols() } else { space.rows() };
    let w = if adjoint { space.rows() } else { space.cols() };
    let n = space.dim();
    if n == 0 {
        return Ok(CMat::zeros(d, d));
    }
    // Range route: span of all columns.
    let mut stacked = CMat::zeros(d, n * w);
    for (j, b) in space.basis().iter().enumerate() {
        let m = if adjoint { b.adjoint() } else { b.clone() };
        stacked.view_mut((0, j * w), (d, w)).copy_from(&m);
    }
    let svd = crate::numlin::svd_checked(&stacked)?;
    let cutoff = tol.rank_tol * svd.smax();
    let mut range_proj = CMat::zeros(d, d);
    for i in 0..svd.singular_values.len() {
        if svd.singular_values[i] > cutoff {
            let col = svd.u.column(i);
            range_proj += CMat::from_fn(d, d, |r, c| col[r] * col[c].conj());
        }
    }
    // Spectral route: support of Σ x x*.
    let mut sum = CMat::zeros(d, d);
    for b in space.basis() {
        let m = if adjoint { b.adjoint() } else { b.clone() };
        sum += &m * m.adjoint();
    }
    let spectral = support_projection(&sum, tol)?;
    let gap = hs_distance(&range_proj, &spectral);
    if gap > tol.residual_for(hs_norm(&spectral)) {
        return Err(Error::inconsistency("support projection cross-check", gap));
    }
    Ok(spectral)
}

/// Span the vectors and check the ternary closure `E·E*·E ⊆ E`. On success
/// the corner is assembled with its support projections and side algebras;
/// on failure the report carries the worst offending triple.
pub fn verify_corner(vectors: &[CMat], tol: Tolerance) -> Result<(Option<Corner>, CornerReport)> {
    let (rows, cols) = vectors
        .first()
        .map(|v| v.shape())
        .unwrap_or((0, 0));
    for v in vectors {
        if v.shape() != (rows, cols) {
            return Err(Error::shape(format!("{rows}x{cols}"), shape_string(v)));
        }
    }
    let space = OperatorSpace::span_with_shape(rows, cols, vectors, tol)?;
    assemble(space)
}

fn assemble(space: OperatorSpace) -> Result<(Option<Corner>, CornerReport)> {
    let tol = space.tol();
    let (p1, p2) = support_projections(&space)?;
    let n = space.dim();

    let mut worst = 0.0f64;
    let mut witness: Option<TripleWitness> = None;
    for i in 0..n {
        for j in 0..n {
            let left = &space.basis()[i] * space.basis()[j].adjoint();
            for k in 0..n {
                let triple = &left * &space.basis()[k];
                let m = space.membership(&triple)?;
                worst = worst.max(m.residual);
                if !m.contained {
                    let better = witness.map_or(true, |w| m.residual > w.residual);
                    if better {
                        witness = Some(TripleWitness {
                            i,
                            j,
                            k,
                            residual: m.residual,
                        });
                    }
                }
            }
        }
    }
    let non_degenerate = {
        let id1 = CMat::identity(space.rows(), space.rows());
        let id2 = CMat::identity(space.cols(), space.cols());
        hs_distance(&p1, &id1) <= tol.residual_for((space.rows() as f64).sqrt())
            && hs_distance(&p2, &id2) <= tol.residual_for((space.cols() as f64).sqrt())
    };
    if witness.is_some() {
        return Ok((
            None,
            CornerReport {
                worst_residual: worst,
                p1,
                p2,
                non_degenerate,
                witness,
            },
        ));
    }

    // Side algebras generated by pair products; these are closed once the
    // ternary condition holds.
    let mut left_products = Vec::with_capacity(n * n);
    let mut right_products = Vec::with_capacity(n * n);
    for a in space.basis() {
        for b in space.basis() {
            left_products.push(a * b.adjoint());
            right_products.push(a.adjoint() * b);
        }
    }
    let m11 = if n == 0 {
        VnAlgebra::zero_algebra(space.rows(), tol)
    } else {
        VnAlgebra::from_closed_span(&left_products, tol)?
    };
    let m22 = if n == 0 {
        VnAlgebra::zero_algebra(space.cols(), tol)
    } else {
        VnAlgebra::from_closed_span(&right_products, tol)?
    };
    if n > 0 {
        let left_gap = hs_distance(m11.unit(), &p1);
        let right_gap = hs_distance(m22.unit(), &p2);
        if left_gap > tol.residual_for(hs_norm(&p1)) || right_gap > tol.residual_for(hs_norm(&p2))
        {
            return Err(Error::inconsistency(
                "side algebra units match supports",
                left_gap.max(right_gap),
            ));
        }
        for b in space.basis() {
            let bound = tol.residual_for(hs_norm(b));
            if hs_distance(&(&p1 * b), b) > bound || hs_distance(&(b * &p2), b) > bound {
                return Err(Error::inconsistency(
                    "supports act as identities on the corner",
                    0.0,
                ));
            }
        }
    }
    let report = CornerReport {
        worst_residual: worst,
        p1: p1.clone(),
        p2: p2.clone(),
        non_degenerate,
        witness: None,
    };
    Ok((
        Some(Corner {
            space,
            p1,
            p2,
            m11,
            m22,
        }),
        report,
    ))
}

/// Smallest corner containing the seed: alternate spans with ternary
/// products until the dimension stabilizes.
pub fn corner_closure(seed: &[CMat], tol: Tolerance) -> Result<Corner> {
    let (rows, cols) = seed.first().map(|v| v.shape()).unwrap_or((0, 0));
    for v in seed {
        if v.shape() != (rows, cols) {
            return Err(Error::shape(format!("{rows}x{cols}"), shape_string(v)));
        }
    }
    let mut space = OperatorSpace::span_with_shape(rows, cols, seed, tol)?;
    for _ in 0..=rows * cols + 1 {
        let mut extra = Vec::new();
        for a in space.basis() {
            for b in space.basis() {
                let left = a * b.adjoint();
                for c in space.basis() {
                    extra.push(&left * c);
                }
            }
        }
        let bigger = space.extended(&extra)?;
        let stable = bigger.dim() == space.dim();
        space = bigger;
        if stable {
            let (corner, report) = assemble(space)?;
            return corner.ok_or_else(|| {
                Error::inconsistency("corner closure verification", report.worst_residual)
            });
        }
    }
    Err(Error::inconsistency("corner closure did not stabilize", 0.0))
}

/// Polar data of a corner element: the partial isometry stays in the
/// corner, the absolute values land in the side algebras.
#[derive(Clone, Debug)]
pub struct PolarMembership {
    pub u: CMat,
    pub absx: CMat,
    pub absxstar: CMat,
    pub residual_u: f64,
    pub residual_absx: f64,
    pub residual_absxstar: f64,
}

pub fn polar_membership(corner: &Corner, x: &CMat) -> Result<PolarMembership> {
    let tol = corner.tol();
    let m = corner.space.membership(x)?;
    if !m.contained {
        return Err(Error::NotMember {
            residual: m.residual,
            tol: tol.residual_for(hs_norm(x)),
        });
    }
    let p = polar(x, tol)?;
    let absxstar = &p.u * &p.abs * p.u.adjoint();
    let residual_u = corner.space.membership(&p.u)?.residual;
    let residual_absx = corner.m22.space().membership(&p.abs)?.residual;
    let residual_absxstar = corner.m11.space().membership(&absxstar)?.residual;
    Ok(PolarMembership {
        u: p.u,
        absx: p.abs,
        absxstar,
        residual_u,
        residual_absx,
        residual_absxstar,
    })
}

/// A right-submodule of a corner: a subspace with `E₁·E*·E ⊆ E₁`.
#[derive(Clone, Debug)]
pub struct Submodule {
    space: OperatorSpace,
}

impl Submodule {
    pub fn space(&self) -> &OperatorSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Validate and wrap a submodule; inputs are never silently closed.
pub fn submodule(corner: &Corner, vectors: &[CMat]) -> Result<Submodule> {
    let tol = corner.tol();
    for v in vectors {
        let m = corner.space.membership(v)?;
        if !m.contained {
            return Err(Error::NotMember {
                residual: m.residual,
                tol: tol.residual_for(hs_norm(v)),
            });
        }
    }
    let space =
        OperatorSpace::span_with_shape(corner.dim1(), corner.dim2(), vectors, tol)?;
    for (i, x) in space.basis().iter().enumerate() {
        for (j, y) in corner.basis().iter().enumerate() {
            let left = x * y.adjoint();
            for (k, z) in corner.basis().iter().enumerate() {
                let triple = &left * z;
                let m = space.membership(&triple)?;
                if !m.contained {
                    return Err(Error::NotSubmodule {
                        i,
                        j,
                        k,
                        residual: m.residual,
                    });
                }
            }
        }
    }
    Ok(Submodule { space })
}

/// Left support of the submodule and the complementary submodule
/// `(p₁−q₁)·E`; the two sum to E and are pointwise orthogonal in the
/// module inner product.
pub fn orthogonal_complement(
    corner: &Corner,
    sub: &Submodule,
) -> Result<(CMat, OperatorSpace)> {
    let tol = corner.tol();
    let d1 = corner.dim1();
    let mut sum = CMat::zeros(d1, d1);
    for x in sub.space.basis() {
        sum += x * x.adjoint();
    }
    let q1 = support_projection(&sum, tol)?;
    let residue = &corner.p1 - &q1;
    // Left multiplication by p₁−q₁ is an orthogonal projection on the
    // corner, so images of the unit-norm basis are either macroscopic or
    // pure rounding noise; drop the noise before spanning.
    let images: Vec<CMat> = corner
        .basis()
        .iter()
        .map(|x| &residue * x)
        .filter(|m| hs_norm(m) > tol.rank_tol)
        .collect();
    let perp = OperatorSpace::span_with_shape(d1, corner.dim2(), &images, tol)?;

    if sub.dim() + perp.dim() != corner.dim() {
        return Err(Error::inconsistency(
            "complement dimensions add up",
            (sub.dim() + perp.dim()) as f64 - corner.dim() as f64,
        ));
    }
    for y in sub.space.basis() {
        for x in perp.basis() {
            let cross = y.adjoint() * x;
            if hs_norm(&cross) > tol.residual_for(1.0) {
                return Err(Error::inconsistency(
                    "complement is module-orthogonal",
                    hs_norm(&cross),
                ));
            }
        }
    }
    // q₁ reproduces the submodule: q₁E = E₁.
    let q_images: Vec<CMat> = corner.basis().iter().map(|x| &q1 * x).collect();
    let q_space = OperatorSpace::span_with_shape(d1, corner.dim2(), &q_images, tol)?;
    if !q_space.same_space_as(&sub.space)? {
        return Err(Error::inconsistency("left support reproduces submodule", 0.0));
    }
    let qm = corner.m11.space().membership(&q1)?;
    if !qm.contained {
        return Err(Error::inconsistency(
            "left support lies in the left algebra",
            qm.residual,
        ));
    }
    Ok((q1, perp))
}

/// The double complement of a subset: the right-module span `[S·[E*E]]`.
pub fn double_perp(corner: &Corner, subset: &[CMat]) -> Result<OperatorSpace> {
    let tol = corner.tol();
    for v in subset {
        let m = corner.space.membership(v)?;
        if !m.contained {
            return Err(Error::NotMember {
                residual: m.residual,
                tol: tol.residual_for(hs_norm(v)),
            });
        }
    }
    let mut products = Vec::with_capacity(subset.len() * corner.m22.dim());
    for s in subset {
        for z in corner.m22.basis() {
            products.push(s * z);
        }
    }
    OperatorSpace::span_with_shape(corner.dim1(), corner.dim2(), &products, tol)
}

/// Solve `f(x) = y*·x` for the unique `y` in the corner, given the values
/// of a right-module-linear map on the corner's basis.
pub fn riesz_representation(corner: &Corner, values: &[CMat]) -> Result<CMat> {
    let tol = corner.tol();
    let n = corner.dim();
    let d2 = corner.dim2();
    if values.len() != n {
        return Err(Error::shape(
            format!("{n} values"),
            format!("{} values", values.len()),
        ));
    }
    for v in values {
        if v.shape() != (d2, d2) {
            return Err(Error::shape(format!("{d2}x{d2}"), shape_string(v)));
        }
    }
    let eval = |x: &CMat| -> Result<CMat> {
        let c = corner.space.coords(x)?;
        let mut out = CMat::zeros(d2, d2);
        for (v, w) in values.iter().zip(c.iter()) {
            out += v * *w;
        }
        Ok(out)
    };
    // Right-module linearity on basis pairs.
    for (i, x) in corner.basis().iter().enumerate() {
        for (j, z) in corner.m22.basis().iter().enumerate() {
            let lhs = eval(&(x * z))?;
            let rhs = eval(x)? * z;
            let defect = hs_distance(&lhs, &rhs);
            if defect > tol.residual_for(hs_norm(&rhs)) {
                return Err(Error::NotModuleLinear { i, j, defect });
            }
        }
    }
    // Stack the conjugate-linear system Σ_l w_l·(b_l* b_k) = f(b_k) with
    // w = conj(coords of y).
    let rows = n * d2 * d2;
    let mut system = CMat::zeros(rows, n);
    let mut rhs = CMat::zeros(rows, 1);
    for (k, bk) in corner.basis().iter().enumerate() {
        for (l, bl) in corner.basis().iter().enumerate() {
            let prod = bl.adjoint() * bk;
            system
                .view_mut((k * d2 * d2, l), (d2 * d2, 1))
                .copy_from(&vectorize(&prod));
        }
        rhs.view_mut((k * d2 * d2, 0), (d2 * d2, 1))
            .copy_from(&vectorize(values.get(k).expect("length checked")));
    }
    // Uniqueness: no nonzero y ∈ E annihilates every basis element.
    if !null_space(&system, tol)?.is_empty() {
        return Err(Error::inconsistency("riesz uniqueness", 0.0));
    }
    let w = lstsq(&system, &rhs, tol)?;
    let coords = CVec::from_iterator(n, w.column(0).iter().map(|z| z.conj()));
    let y = corner.space.from_coords(&coords);
    for (k, bk) in corner.basis().iter().enumerate() {
        let defect = hs_distance(&(y.adjoint() * bk), &values[k]);
        if defect > tol.residual_for(hs_norm(&values[k])) {
            return Err(Error::inconsistency("riesz reconstruction", defect));
        }
    }
    Ok(y)
}
