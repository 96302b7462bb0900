//! Hilbert von Neumann modules and bimodules: corners decorated with a
//! right representation identifying [E*E] with an abstract algebra A₂,
//! optionally a left representation of A₁ into [EE*].
//!
//! The right representation π₂ must be an isomorphism onto [E*E]; the
//! A₂-valued inner product is ⟨x,y⟩ = π₂⁻¹(x*y). Standard modules are the
//! ones whose right carrier looks like a GNS space, and for those the
//! generator-matched isomorphism test applies.

use crate::algebra::{Automorphism, State, VnAlgebra};
use crate::corner::{double_perp, Corner};
use crate::error::{Error, Result};
use crate::gns::{gns_construct, representation_isometry, Representation};
use crate::numlin::{
    hs_distance, hs_norm, lstsq, null_space, vectorize, CMat, CVec, Complex, Tolerance,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const WITNESS_SEED: u64 = 0x5eed_0004;
const RETRY_BUDGET: usize = 8;

/// A corner together with representations tying its side algebras to
/// abstract ones. Without a left representation this is a plain module.
#[derive(Clone, Debug)]
pub struct HvnBimodule {
    corner: Corner,
    pi1: Option<Representation>,
    pi2: Representation,
    pi2_coords: CMat,
}

impl HvnBimodule {
    /// Validate and assemble. `pi2` must map its algebra isomorphically
    /// onto the right algebra [E*E]; `pi1`, when present, must land in the
    /// left algebra [EE*], send the unit to p₁, and preserve the corner.
    pub fn new(corner: Corner, pi2: Representation, pi1: Option<Representation>) -> Result<Self> {
        let tol = corner.tol();
        if pi2.carrier_dim() != corner.dim2() {
            return Err(Error::shape(
                format!("carrier {}", corner.dim2()),
                format!("carrier {}", pi2.carrier_dim()),
            ));
        }
        let m22 = corner.right_algebra();
        if pi2.algebra().dim() != m22.dim() {
            return Err(Error::NotRepresentation {
                kind: "right representation bijectivity",
                defect: pi2.algebra().dim() as f64 - m22.dim() as f64,
            });
        }
        let n = m22.dim();
        let mut pi2_coords = CMat::zeros(n, n);
        for (j, im) in pi2.images().iter().enumerate() {
            let m = m22.space().membership(im)?;
            if !m.contained {
                return Err(Error::NotRepresentation {
                    kind: "right representation lands in [E*E]",
                    defect: m.residual,
                });
            }
            pi2_coords.set_column(j, &m22.space().coords(im)?);
        }
        if !null_space(&pi2_coords, tol)?.is_empty() {
            return Err(Error::NotRepresentation {
                kind: "right representation injectivity",
                defect: 0.0,
            });
        }
        if let Some(p1rep) = &pi1 {
            if p1rep.carrier_dim() != corner.dim1() {
                return Err(Error::shape(
                    format!("carrier {}", corner.dim1()),
                    format!("carrier {}", p1rep.carrier_dim()),
                ));
            }
            let m11 = corner.left_algebra();
            for im in p1rep.images() {
                let m = m11.space().membership(im)?;
                if !m.contained {
                    return Err(Error::NotRepresentation {
                        kind: "left representation lands in [EE*]",
                        defect: m.residual,
                    });
                }
            }
            let unit_img = p1rep.apply(p1rep.algebra().unit())?;
            let unital_gap = hs_distance(&unit_img, corner.p1());
            if unital_gap > tol.residual_for(hs_norm(corner.p1())) {
                return Err(Error::NotRepresentation {
                    kind: "left representation unital onto the support",
                    defect: unital_gap,
                });
            }
            for im in p1rep.images() {
                for x in corner.basis() {
                    let moved = im * x;
                    let m = corner.space().membership(&moved)?;
                    if !m.contained {
                        return Err(Error::NotRepresentation {
                            kind: "left action preserves the corner",
                            defect: m.residual,
                        });
                    }
                }
            }
        }
        Ok(HvnBimodule {
            corner,
            pi1,
            pi2,
            pi2_coords,
        })
    }

    /// The module over L²(A,φ) given by left multiplication, with both
    /// representations equal to the left regular one.
    pub fn identity(algebra: &VnAlgebra, phi: &State) -> Result<Self> {
        let gns = gns_construct(algebra, phi)?;
        let rep = gns.left_rep().clone();
        let (corner, report) = crate::corner::verify_corner(rep.images(), algebra.tol())?;
        let corner = corner.ok_or_else(|| {
            Error::inconsistency("left regular images form a corner", report.worst_residual)
        })?;
        HvnBimodule::new(corner, rep.clone(), Some(rep))
    }

    pub fn corner(&self) -> &Corner {
        &self.corner
    }

    pub fn pi1(&self) -> Option<&Representation> {
        self.pi1.as_ref()
    }

    pub fn pi2(&self) -> &Representation {
        &self.pi2
    }

    pub fn a1(&self) -> Option<&VnAlgebra> {
        self.pi1.as_ref().map(|p| p.algebra())
    }

    pub fn a2(&self) -> &VnAlgebra {
        self.pi2.algebra()
    }

    pub fn tol(&self) -> Tolerance {
        self.corner.tol()
    }

    /// Coordinates (in the A₂ basis) of the preimage of a right-algebra
    /// element under π₂.
    pub fn pi2_preimage(&self, y: &CMat) -> Result<CVec> {
        let tol = self.tol();
        let m22 = self.corner.right_algebra();
        let m = m22.space().membership(y)?;
        if !m.contained {
            return Err(Error::inconsistency(
                "corner integrity: product escapes [E*E]",
                m.residual,
            ));
        }
        let target = CMat::from_column_slice(m22.dim(), 1, m22.space().coords(y)?.as_slice());
        let sol = lstsq(&self.pi2_coords, &target, tol)?;
        Ok(CVec::from_column_slice(sol.column(0).as_slice()))
    }

    /// Materialize A₂ coordinates as an element of the abstract algebra.
    pub fn a2_element(&self, coords: &CVec) -> CMat {
        self.a2().space().from_coords(coords)
    }
}

/// The A₂-valued inner product ⟨x,y⟩ = π₂⁻¹(x*y), as coordinates in the
/// A₂ basis.
pub fn a2_inner_product(b: &HvnBimodule, x: &CMat, y: &CMat) -> Result<CVec> {
    let tol = b.tol();
    for v in [x, y] {
        let m = b.corner.space().membership(v)?;
        if !m.contained {
            return Err(Error::NotMember {
                residual: m.residual,
                tol: tol.residual_for(hs_norm(v)),
            });
        }
    }
    let prod = x.adjoint() * y;
    let coords = b.pi2_preimage(&prod)?;
    let back = b.pi2.apply(&b.a2_element(&coords))?;
    let defect = hs_distance(&back, &prod);
    if defect > tol.residual_for(hs_norm(&prod)) {
        return Err(Error::inconsistency("inner product round-trip", defect));
    }
    Ok(coords)
}

/// The rank-one module operator θ_{x,y} applied to z: returns x·y*·z.
pub fn rank_one_apply(b: &HvnBimodule, x: &CMat, y: &CMat, z: &CMat) -> Result<CMat> {
    let tol = b.tol();
    for v in [x, y, z] {
        let m = b.corner.space().membership(v)?;
        if !m.contained {
            return Err(Error::NotMember {
                residual: m.residual,
                tol: tol.residual_for(hs_norm(v)),
            });
        }
    }
    let out = x * y.adjoint() * z;
    let m = b.corner.space().membership(&out)?;
    if !m.contained {
        return Err(Error::inconsistency(
            "rank-one image stays in the corner",
            m.residual,
        ));
    }
    Ok(out)
}

/// Per-block comparison of the right representation's multiplicity against
/// the block dimension.
#[derive(Clone, Debug)]
pub struct BlockMultiplicity {
    pub block_dim: usize,
    pub multiplicity: usize,
}

/// Standardness verdict with its two ingredients spelled out.
#[derive(Clone, Debug)]
pub struct Standardness {
    pub standard: bool,
    pub non_degenerate: bool,
    pub blocks: Vec<BlockMultiplicity>,
}

/// A module is standard when the corner is non-degenerate and the right
/// carrier has GNS multiplicities: each block of A₂ acts with multiplicity
/// equal to its dimension.
pub fn is_standard(b: &HvnBimodule) -> Result<Standardness> {
    let non_degenerate = b.corner.is_non_degenerate();
    let mults = b.pi2.multiplicities()?;
    let blocks: Vec<BlockMultiplicity> = b
        .a2()
        .blocks()?
        .iter()
        .zip(mults)
        .map(|(blk, m)| BlockMultiplicity {
            block_dim: blk.block_dim,
            multiplicity: m,
        })
        .collect();
    let gns_shaped = blocks.iter().all(|bm| bm.multiplicity == bm.block_dim);
    Ok(Standardness {
        standard: non_degenerate && gns_shaped,
        non_degenerate,
        blocks,
    })
}

/// Outcome of the generator-matched isomorphism test.
#[derive(Clone, Debug)]
pub enum KrpIsomOutcome {
    /// Unitaries with E⁽²⁾ = U₁·E⁽¹⁾·U₂*, U₂ right-linear and U₁
    /// left-linear when both modules carry a left action.
    Isomorphic { u1: CMat, u2: CMat },
    /// The module inner products of the matched generators disagree; the
    /// worst pair and its defect are reported.
    GramMismatch { pair: (usize, usize), defect: f64 },
}

/// Decide isomorphism of two standard modules over the same algebras from
/// index-matched generating families: the modules are isomorphic exactly
/// when the A₂-valued Gram matrices of the generators agree.
pub fn krpisom_check(
    b1: &HvnBimodule,
    b2: &HvnBimodule,
    gens1: &[CMat],
    gens2: &[CMat],
) -> Result<KrpIsomOutcome> {
    let tol = b1.tol();
    if gens1.len() != gens2.len() {
        return Err(Error::shape(
            format!("{} generators", gens1.len()),
            format!("{} generators", gens2.len()),
        ));
    }
    if !b1.a2().same_algebra_as(b2.a2())? {
        return Err(Error::AlgebraMismatch(
            "right algebras differ between the modules".into(),
        ));
    }
    let both_left = match (b1.a1(), b2.a1()) {
        (Some(a), Some(b)) => {
            if !a.same_algebra_as(b)? {
                return Err(Error::AlgebraMismatch(
                    "left algebras differ between the modules".into(),
                ));
            }
            true
        }
        (None, None) => false,
        _ => {
            return Err(Error::AlgebraMismatch(
                "only one module carries a left action".into(),
            ))
        }
    };
    for (which, b, gens) in [("first", b1, gens1), ("second", b2, gens2)] {
        let generated = double_perp(b.corner(), gens)?;
        if !generated.same_space_as(b.corner().space())? {
            return Err(Error::NotGenerating {
                which,
                got: generated.dim(),
                expected: b.corner().dim(),
            });
        }
        if !is_standard(b)?.standard {
            return Err(Error::NotStandard { which });
        }
    }

    // Gram condition: matched generators must have identical A₂-valued
    // inner products.
    let mut worst = (0usize, 0usize, 0.0f64);
    for j in 0..gens1.len() {
        for k in 0..gens1.len() {
            let g1 = b1.a2_element(&a2_inner_product(b1, &gens1[j], &gens1[k])?);
            let g2 = b2.a2_element(&a2_inner_product(b2, &gens2[j], &gens2[k])?);
            let defect = hs_distance(&g1, &g2);
            if defect > worst.2 {
                worst = (j, k, defect);
            }
        }
    }
    let scale = gens1
        .iter()
        .map(hs_norm)
        .fold(1.0f64, f64::max)
        .powi(2);
    if worst.2 > tol.residual_for(scale) {
        return Ok(KrpIsomOutcome::GramMismatch {
            pair: (worst.0, worst.1),
            defect: worst.2,
        });
    }

    // Right unitary intertwining the two standard right carriers.
    let (u2, ampliation) = representation_isometry(b1.pi2(), b2.pi2())?;
    if ampliation != 1 || u2.nrows() != u2.ncols() {
        return Err(Error::inconsistency(
            "standard carriers admit a plain unitary",
            ampliation as f64,
        ));
    }

    // Left unitary forced by U₁(x_j ξ) = x_j' U₂ ξ on the dense span.
    let d2 = b1.corner().dim2();
    let m = gens1.len();
    let mut v = CMat::zeros(b1.corner().dim1(), m * d2);
    let mut w = CMat::zeros(b2.corner().dim1(), m * d2);
    for j in 0..m {
        v.view_mut((0, j * d2), (b1.corner().dim1(), d2))
            .copy_from(&gens1[j]);
        w.view_mut((0, j * d2), (b2.corner().dim1(), d2))
            .copy_from(&(&gens2[j] * &u2));
    }
    if b1.corner().dim1() != b2.corner().dim1() {
        return Err(Error::inconsistency(
            "matched Gram data forces equal left carriers",
            b1.corner().dim1() as f64 - b2.corner().dim1() as f64,
        ));
    }
    let u1 = lstsq(&v.adjoint(), &w.adjoint(), tol)?.adjoint();
    let d1 = b1.corner().dim1();
    let id1 = CMat::identity(d1, d1);
    let unitary_defect = hs_distance(&(u1.adjoint() * &u1), &id1)
        .max(hs_distance(&(&u1 * u1.adjoint()), &id1));
    if unitary_defect > tol.residual_for(hs_norm(&id1)) {
        return Err(Error::inconsistency(
            "induced left map is unitary",
            unitary_defect,
        ));
    }
    // Transported bases must exchange the corners.
    for x in b1.corner().basis() {
        let moved = &u1 * x * u2.adjoint();
        let m = b2.corner().space().membership(&moved)?;
        if !m.contained {
            return Err(Error::inconsistency(
                "transported corner lands in the target",
                m.residual,
            ));
        }
    }
    for y in b2.corner().basis() {
        let back = u1.adjoint() * y * &u2;
        let m = b1.corner().space().membership(&back)?;
        if !m.contained {
            return Err(Error::inconsistency(
                "transported corner covers the target",
                m.residual,
            ));
        }
    }
    if both_left {
        let (p1a, p1b) = (b1.pi1().expect("both"), b2.pi1().expect("both"));
        for a in p1a.algebra().basis() {
            let lhs = &u1 * p1a.apply(a)?;
            let rhs = p1b.apply(a)? * &u1;
            let defect = hs_distance(&lhs, &rhs);
            if defect > tol.residual_for(hs_norm(&rhs)) {
                return Err(Error::inconsistency("left linearity of U1", defect));
            }
        }
    }
    Ok(KrpIsomOutcome::Isomorphic { u1, u2 })
}

/// Decide whether φ∘θ⁻¹ is inner and, if so, produce a unitary witness u
/// with φ(x) = u·θ(x)·u* on the whole algebra.
pub fn inner_conjugacy(
    algebra: &VnAlgebra,
    theta: &Automorphism,
    phi: &Automorphism,
) -> Result<(bool, Option<CMat>)> {
    let tol = algebra.tol();
    if !theta.algebra().same_algebra_as(algebra)? || !phi.algebra().same_algebra_as(algebra)? {
        return Err(Error::AlgebraMismatch(
            "automorphisms act on a different algebra".into(),
        ));
    }
    let rho = phi.compose(&theta.inverse()?)?;
    let centrals = algebra.center_minimal_projections()?;
    for z in &centrals {
        let moved = rho.apply(z)?;
        if hs_distance(&moved, z) > tol.residual_for(hs_norm(z)) {
            return Ok((false, None));
        }
    }

    // Solve the intertwiner system u·θ(x) = φ(x)·u inside the algebra.
    let n = algebra.dim();
    let d = algebra.ambient_dim();
    let mut system = CMat::zeros(n * d * d, n);
    for (j, x) in algebra.basis().iter().enumerate() {
        let tx = theta.apply(x)?;
        let px = phi.apply(x)?;
        for (i, b) in algebra.basis().iter().enumerate() {
            let cell = b * &tx - &px * b;
            system
                .view_mut((j * d * d, i), (d * d, 1))
                .copy_from(&vectorize(&cell));
        }
    }
    let intertwiners = null_space(&system, tol)?;
    if intertwiners.is_empty() {
        return Err(Error::inconsistency(
            "inner conjugacy witness space is nonempty",
            0.0,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(WITNESS_SEED);
    'attempt: for _ in 0..RETRY_BUDGET {
        let mut coords = CVec::zeros(n);
        for t in &intertwiners {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            coords += t * Complex::new(re, im);
        }
        let t = algebra.space().from_coords(&coords);
        // Per-block unitary polar parts; a generic combination is
        // invertible on every block.
        let mut u = CMat::zeros(d, d);
        for z in &centrals {
            let tz = &t * z;
            let p = crate::numlin::polar(&tz, tol)?;
            let support_gap = hs_distance(&(p.u.adjoint() * &p.u), z);
            if support_gap > tol.residual_for(hs_norm(z)) {
                continue 'attempt;
            }
            u += p.u;
        }
        let um = algebra.space().membership(&u)?;
        let id_gap = hs_distance(&(u.adjoint() * &u), algebra.unit());
        if !um.contained || id_gap > tol.residual_for(hs_norm(algebra.unit())) {
            continue 'attempt;
        }
        for x in algebra.basis() {
            let lhs = phi.apply(x)?;
            let rhs = &u * theta.apply(x)? * u.adjoint();
            let defect = hs_distance(&lhs, &rhs);
            if defect > tol.residual_for(hs_norm(&lhs)) {
                return Err(Error::inconsistency("inner conjugacy witness", defect));
            }
        }
        return Ok((true, Some(u)));
    }
    Err(Error::RetryBudgetExhausted {
        attempts: RETRY_BUDGET,
        context: "generic intertwiner with full block supports".into(),
    })
}
