//! Completely positive maps between algebras, their central support, and
//! the Stinespring-type dilation to a singly generated standard bimodule.
//!
//! A map η: A₁ → A₂ is certified completely positive blockwise through its
//! Choi matrices. Its dilation lives on the quotient of A₁ ⊗ e_ηA₂ by the
//! null space of the Gram form φ(b₂*·η(b₁*a₁)·a₂), carries the left action
//! of A₁, and is generated by a single operator V with V*π₁(a)V = π₂(η(a)).

use std::sync::OnceLock;

use crate::algebra::{State, VnAlgebra};
use crate::corner::verify_corner;
use crate::error::{Error, Result};
use crate::gns::{gns_construct, GnsSpace, Representation};
use crate::hvnmod::{is_standard, krpisom_check, HvnBimodule, KrpIsomOutcome};
use crate::numlin::{
    eigh, hs_distance, hs_norm, psd_check, support_projection, CMat, Complex, Tolerance,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const POSITIVITY_SAMPLES: usize = 8;
const POSITIVITY_SEED: u64 = 0x5eed_0005;

/// A linear map between two algebras, stored through its images on the
/// source basis. Construction checks adjoint preservation and positivity
/// on sampled squares; complete positivity has its own certificate.
#[derive(Clone, Debug)]
pub struct CpMap {
    source: VnAlgebra,
    target: VnAlgebra,
    images: Vec<CMat>,
    unital: bool,
    e_eta: OnceLock<Result<CMat>>,
}

impl CpMap {
    pub fn new(source: VnAlgebra, target: VnAlgebra, images: Vec<CMat>) -> Result<CpMap> {
        let tol = source.tol();
        if images.len() != source.dim() {
            return Err(Error::shape(
                format!("{} images", source.dim()),
                format!("{} images", images.len()),
            ));
        }
        for im in &images {
            let m = target.space().membership(im)?;
            if !m.contained {
                return Err(Error::NotInAlgebra(format!(
                    "image escapes the target algebra, residual {:.3e}",
                    m.residual
                )));
            }
        }
        let map = CpMap {
            source,
            target,
            images,
            unital: false,
            e_eta: OnceLock::new(),
        };
        // η(a*) = η(a)* on the basis.
        for (i, b) in map.source.basis().iter().enumerate() {
            let lhs = map.apply(&b.adjoint())?;
            let rhs = map.images[i].adjoint();
            let defect = hs_distance(&lhs, &rhs);
            if defect > tol.residual_for(hs_norm(&rhs)) {
                return Err(Error::NotAdjointPreserving { defect });
            }
        }
        // Positivity on sampled squares.
        let mut rng = ChaCha8Rng::seed_from_u64(POSITIVITY_SEED);
        for _ in 0..POSITIVITY_SAMPLES {
            let mut a = CMat::zeros(map.source.ambient_dim(), map.source.ambient_dim());
            for b in map.source.basis() {
                let re: f64 = rand::Rng::sample(&mut rng, StandardNormal);
                let im: f64 = rand::Rng::sample(&mut rng, StandardNormal);
                a += b * Complex::new(re, im);
            }
            let square = map.apply(&(a.adjoint() * &a))?;
            if !psd_check(&square, tol)? {
                return Err(Error::NotPositive(
                    "η(a*a) has a negative eigenvalue on a sampled element".into(),
                ));
            }
        }
        let unital_gap = hs_distance(&map.apply(map.source.unit())?, map.target.unit());
        let unital = unital_gap <= tol.residual_for(hs_norm(map.target.unit()));
        Ok(CpMap { unital, ..map })
    }

    /// The identity map on an algebra.
    pub fn identity(algebra: &VnAlgebra) -> Result<CpMap> {
        CpMap::new(
            algebra.clone(),
            algebra.clone(),
            algebra.basis().to_vec(),
        )
    }

    /// Convenience constructor from a Kraus family: η(a) = Σ w_i*·a·w_i.
    /// The images must land in the target algebra.
    pub fn from_kraus(source: VnAlgebra, target: VnAlgebra, kraus: &[CMat]) -> Result<CpMap> {
        let d1 = source.ambient_dim();
        let d2 = target.ambient_dim();
        for w in kraus {
            if w.shape() != (d1, d2) {
                return Err(Error::shape(
                    format!("{d1}x{d2}"),
                    crate::numlin::shape_string(w),
                ));
            }
        }
        let images: Vec<CMat> = source
            .basis()
            .iter()
            .map(|b| {
                let mut out = CMat::zeros(d2, d2);
                for w in kraus {
                    out += w.adjoint() * b * w;
                }
                out
            })
            .collect();
        CpMap::new(source, target, images)
    }

    pub fn source(&self) -> &VnAlgebra {
        &self.source
    }

    pub fn target(&self) -> &VnAlgebra {
        &self.target
    }

    pub fn images(&self) -> &[CMat] {
        &self.images
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    pub fn tol(&self) -> Tolerance {
        self.source.tol()
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let c = self.source.space().coords(x)?;
        let d = self.target.ambient_dim();
        let mut out = CMat::zeros(d, d);
        for (im, w) in self.images.iter().zip(c.iter()) {
            out += im * *w;
        }
        Ok(out)
    }

    /// Two maps are the same when they share algebras and basis images.
    pub fn same_map_as(&self, other: &CpMap) -> Result<bool> {
        let tol = self.tol();
        if !self.source.same_algebra_as(&other.source)?
            || !self.target.same_algebra_as(&other.target)?
        {
            return Ok(false);
        }
        for b in self.source.basis() {
            let mine = self.apply(b)?;
            let theirs = other.apply(b)?;
            if hs_distance(&mine, &theirs) > tol.residual_for(hs_norm(&mine)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Cached central support of the map inside the target.
    pub fn central_support(&self) -> Result<CMat> {
        self.e_eta
            .get_or_init(|| central_support_of(self))
            .clone()
    }
}

/// A failed Choi-block positivity check: the block index within the
/// source's central decomposition and its most negative eigenvalue.
#[derive(Clone, Copy, Debug)]
pub struct ChoiWitness {
    pub block: usize,
    pub eigenvalue: f64,
}

/// Complete-positivity verdict.
#[derive(Clone, Debug)]
pub struct CpAssessment {
    pub cp: bool,
    pub witness: Option<ChoiWitness>,
}

/// Blockwise Choi criterion: for each central block of the source with
/// matrix units e_ij, the matrix Σ_ij E_ij ⊗ η(e_ij) must be PSD.
pub fn is_completely_positive(eta: &CpMap) -> Result<CpAssessment> {
    let tol = eta.tol();
    let d2 = eta.target.ambient_dim();
    let mut witness: Option<ChoiWitness> = None;
    for (k, blk) in eta.source.blocks()?.iter().enumerate() {
        let n = blk.block_dim;
        let mut choi = CMat::zeros(n * d2, n * d2);
        for i in 0..n {
            for j in 0..n {
                let img = eta.apply(blk.unit(i, j))?;
                choi.view_mut((i * d2, j * d2), (d2, d2)).copy_from(&img);
            }
        }
        let (vals, _) = eigh(&choi)?;
        let min = vals.first().copied().unwrap_or(0.0);
        let max = vals.last().copied().unwrap_or(0.0);
        if min < -tol.rank_tol * max.abs().max(1.0) {
            let worse = witness.map_or(true, |w| min < w.eigenvalue);
            if worse {
                witness = Some(ChoiWitness {
                    block: k,
                    eigenvalue: min,
                });
            }
        }
    }
    Ok(CpAssessment {
        cp: witness.is_none(),
        witness,
    })
}

/// Smallest central projection of the target absorbing the range of the
/// map: the sum of the minimal central projections meeting the support of
/// η(1).
pub fn central_support_e_eta(eta: &CpMap) -> Result<CMat> {
    eta.central_support()
}

fn central_support_of(eta: &CpMap) -> Result<CMat> {
    let tol = eta.tol();
    let s = eta.apply(eta.source.unit())?;
    if !psd_check(&s, tol)? {
        return Err(Error::NotPositive(
            "η(1) has a negative eigenvalue".into(),
        ));
    }
    let pr = support_projection(&s, tol)?;
    let d = eta.target.ambient_dim();
    let mut e = CMat::zeros(d, d);
    for z in eta.target.center_minimal_projections()? {
        if hs_norm(&(&z * &pr)) > tol.rank_tol {
            e += z;
        }
    }
    for (i, b) in eta.source.basis().iter().enumerate() {
        let img = eta.apply(b)?;
        let defect = hs_distance(&(&e * &img), &img);
        if defect > tol.residual_for(hs_norm(&img)) {
            return Err(Error::inconsistency(
                format!("central support absorbs image {i}"),
                defect,
            ));
        }
    }
    Ok(e)
}

/// A Stinespring-type dilation: the left representation of the source on
/// the quotient space H₁, the generator V, and the standard bimodule they
/// span.
#[derive(Clone, Debug)]
pub struct Dilation {
    eta: CpMap,
    phi: State,
    h2: GnsSpace,
    h1_dim: usize,
    pi1: Representation,
    v: CMat,
    bimodule: HvnBimodule,
}

impl Dilation {
    pub fn eta(&self) -> &CpMap {
        &self.eta
    }

    pub fn phi(&self) -> &State {
        &self.phi
    }

    /// GNS space of the cut-down target algebra.
    pub fn h2(&self) -> &GnsSpace {
        &self.h2
    }

    pub fn h1_dim(&self) -> usize {
        self.h1_dim
    }

    pub fn pi1(&self) -> &Representation {
        &self.pi1
    }

    pub fn pi2(&self) -> &Representation {
        self.h2.left_rep()
    }

    pub fn generator(&self) -> &CMat {
        &self.v
    }

    pub fn bimodule(&self) -> &HvnBimodule {
        &self.bimodule
    }

    /// The cut-down algebra e_η·A₂ the right side acts through.
    pub fn cut_target(&self) -> &VnAlgebra {
        self.h2.algebra()
    }
}

/// Promote validation failures on derived objects to internal errors:
/// after the input checks pass, any later failure is a broken invariant.
fn promote(context: &'static str) -> impl Fn(Error) -> Error {
    move |e| {
        if e.is_internal() {
            e
        } else {
            Error::inconsistency(format!("{context}: {e}"), 0.0)
        }
    }
}

/// Dilate a completely positive map to a standard bimodule with a single
/// generator. The state, when not supplied, defaults to the canonical
/// trace of the cut-down target.
pub fn stinespring_dilate(eta: &CpMap, phi: Option<&State>) -> Result<Dilation> {
    let tol = eta.tol();
    let assessment = is_completely_positive(eta)?;
    if !assessment.cp {
        let w = assessment.witness.expect("witness accompanies failure");
        return Err(Error::NotPositive(format!(
            "Choi block {} has eigenvalue {:.3e}",
            w.block, w.eigenvalue
        )));
    }
    let e = eta.central_support()?;
    if e.trace().re < 0.5 {
        return Err(Error::DegenerateDilation);
    }

    // Cut-down algebra e_η·A₂, reusing the target when e_η = 1.
    let cut = if hs_distance(&e, eta.target.unit()) <= tol.residual_for(hs_norm(eta.target.unit()))
    {
        eta.target.clone()
    } else {
        let cut_basis: Vec<CMat> = eta.target.basis().iter().map(|b| &e * b).collect();
        VnAlgebra::from_closed_span(&cut_basis, tol)?
    };
    let phi = match phi {
        Some(s) => {
            if !s.algebra().same_algebra_as(&cut)? {
                return Err(Error::AlgebraMismatch(
                    "state does not live on the cut-down target".into(),
                ));
            }
            s.clone()
        }
        None => cut.canonical_trace()?,
    };
    let h2 = gns_construct(&cut, &phi)?;

    // Gram form of the algebraic tensor product A₁ ⊗ e_ηA₂.
    let na = eta.source.dim();
    let nb = cut.dim();
    let alphas = eta.source.basis();
    let betas = cut.basis();
    let mut eta_products = vec![vec![CMat::zeros(0, 0); na]; na];
    for k in 0..na {
        for i in 0..na {
            eta_products[k][i] = eta.apply(&(alphas[k].adjoint() * &alphas[i]))?;
        }
    }
    let mut gram = CMat::zeros(na * nb, na * nb);
    for k in 0..na {
        for l in 0..nb {
            for i in 0..na {
                for j in 0..nb {
                    let x = betas[l].adjoint() * &eta_products[k][i] * &betas[j];
                    gram[(k * nb + l, i * nb + j)] = phi.eval(&x);
                }
            }
        }
    }
    let (vals, vecs) = eigh(&gram)?;
    let max = vals.last().copied().unwrap_or(0.0);
    if vals.first().copied().unwrap_or(0.0) < -tol.rank_tol * max.abs().max(1.0) {
        return Err(Error::inconsistency(
            "dilation Gram positivity",
            vals[0],
        ));
    }
    let kept: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i] > tol.rank_tol * max)
        .collect();
    let r = kept.len();
    if r == 0 {
        return Err(Error::inconsistency("dilation quotient is nonzero", 0.0));
    }
    // Quotient map Q and its right inverse: inner products of tensor
    // coordinates factor as (Qc)*(Qd).
    let mut q = CMat::zeros(r, na * nb);
    let mut qplus = CMat::zeros(na * nb, r);
    for (row, &i) in kept.iter().enumerate() {
        let lam = vals[i];
        let col = vecs.column(i);
        for t in 0..na * nb {
            q[(row, t)] = col[t].conj() * Complex::new(lam.sqrt(), 0.0);
            qplus[(t, row)] = col[t] * Complex::new(1.0 / lam.sqrt(), 0.0);
        }
    }

    // Left action on the first tensor factor, pushed through the quotient.
    let idb = CMat::identity(nb, nb);
    let mut pi1_images = Vec::with_capacity(na);
    for a in alphas {
        let mut mult = CMat::zeros(na, na);
        for (i, ai) in alphas.iter().enumerate() {
            mult.set_column(i, &eta.source.space().coords(&(a * ai))?);
        }
        pi1_images.push(&q * mult.kronecker(&idb) * &qplus);
    }
    let pi1 =
        Representation::new(&eta.source, pi1_images).map_err(promote("dilation left action"))?;

    // Generator: V(b̂) = 1 ⊗ b on carrier coordinates.
    let unit_coords = eta.source.space().coords(eta.source.unit())?;
    let embed = CMat::from_fn(na * nb, nb, |row, col| {
        if row % nb == col {
            unit_coords[row / nb]
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    let v = &q * embed * h2.from_carrier();

    // Defining identity and the norm of the generator.
    let pi2 = h2.left_rep();
    for a in alphas {
        let img = eta.apply(a)?;
        let m = cut.space().membership(&img)?;
        if !m.contained {
            return Err(Error::inconsistency(
                "images land in the cut-down target",
                m.residual,
            ));
        }
        let rhs = pi2.apply(&img).map_err(promote("dilation right image"))?;
        let lhs = v.adjoint() * pi1.apply(a).map_err(promote("dilation left image"))? * &v;
        let defect = hs_distance(&lhs, &rhs);
        if defect > tol.residual_for(hs_norm(&rhs)) {
            return Err(Error::inconsistency("dilation defining identity", defect));
        }
    }
    let vv = v.adjoint() * &v;
    let eta_unit = pi2
        .apply(&eta.apply(eta.source.unit())?)
        .map_err(promote("dilation unit image"))?;
    let defect = hs_distance(&vv, &eta_unit);
    if defect > tol.residual_for(hs_norm(&eta_unit)) {
        return Err(Error::inconsistency("V*V = π₂(η(1))", defect));
    }

    // The corner spanned by π₁(A₁)·V·π₂(e_ηA₂) and its bimodule.
    let mut span = Vec::with_capacity(na * nb);
    for a in alphas {
        let left = pi1.apply(a).map_err(promote("dilation left image"))?;
        for b in betas {
            let right = pi2.apply(b).map_err(promote("dilation right image"))?;
            span.push(&left * &v * right);
        }
    }
    let (corner, report) = verify_corner(&span, tol)?;
    let corner = corner.ok_or_else(|| {
        Error::inconsistency("dilation span is a corner", report.worst_residual)
    })?;
    let bimodule = HvnBimodule::new(corner, pi2.clone(), Some(pi1.clone()))
        .map_err(promote("dilation bimodule assembly"))?;
    let standard = is_standard(&bimodule)?;
    if !standard.standard {
        return Err(Error::inconsistency(
            "dilation bimodule is standard",
            if standard.non_degenerate { 1.0 } else { 0.0 },
        ));
    }

    Ok(Dilation {
        eta: eta.clone(),
        phi,
        h2,
        h1_dim: r,
        pi1,
        v,
        bimodule,
    })
}

/// Unitaries realizing the uniqueness of the dilation pair (E, V): the
/// generator-matched isomorphism of the bimodules, plus the transported
/// generator check Ṽ = U₁·V·U₂*.
pub fn dilation_uniqueness_check(d1: &Dilation, d2: &Dilation) -> Result<(CMat, CMat)> {
    let tol = d1.eta.tol();
    if !d1.eta.same_map_as(&d2.eta)? {
        return Err(Error::AlgebraMismatch(
            "dilations of different maps".into(),
        ));
    }
    // Matched generators π₁(a)·V·π₂(b) must share the coefficient
    // elements a, b across both dilations, so both families are indexed by
    // the first dilation's bases.
    let gens = |d: &Dilation| -> Result<Vec<CMat>> {
        let mut out = Vec::new();
        for a in d1.eta.source().basis() {
            let left = d.pi1.apply(a)?;
            for b in d1.cut_target().basis() {
                let right = d.pi2().apply(b)?;
                out.push(&left * &d.v * right);
            }
        }
        Ok(out)
    };
    let gens1 = gens(d1)?;
    let gens2 = gens(d2)?;
    match krpisom_check(d1.bimodule(), d2.bimodule(), &gens1, &gens2)? {
        KrpIsomOutcome::Isomorphic { u1, u2 } => {
            let moved = &u1 * &d1.v * u2.adjoint();
            let defect = hs_distance(&moved, &d2.v);
            if defect > tol.residual_for(hs_norm(&d2.v)) {
                return Err(Error::inconsistency("transported generator", defect));
            }
            Ok((u1, u2))
        }
        KrpIsomOutcome::GramMismatch { pair, defect } => Err(Error::inconsistency(
            format!("dilations of one map have matching Gram data at pair {pair:?}"),
            defect,
        )),
    }
}
