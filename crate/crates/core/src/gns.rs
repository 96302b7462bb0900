//! GNS construction, modular conjugation, implementing unitaries, and
//! intertwiner synthesis between representations.
//!
//! The carrier of `L²(A,φ)` is ℂᴺ with N = dim A; the coordinate map sends
//! an algebra element to its Gram-orthonormalized coordinates so that the
//! standard inner product of vectors equals `φ(x*y)`. Conjugate-linear maps
//! (the involution S and its antiunitary part J) are carried as matrices M
//! acting by `v ↦ M·conj(v)`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{Automorphism, State, VnAlgebra};
use crate::error::{Error, Result};
use crate::numlin::{
    eigh, hs_distance, hs_inner, hs_norm, polar, shape_string, CMat, CVec, Complex, Tolerance,
};

const ISOMETRY_SEED: u64 = 0x5eed_0003;
const RETRY_BUDGET: usize = 8;

/// A *-representation of an algebra, stored by the images of its
/// orthonormal basis on a carrier space.
#[derive(Clone, Debug)]
pub struct Representation {
    algebra: VnAlgebra,
    images: Vec<CMat>,
    carrier_dim: usize,
}

impl Representation {
    pub fn new(algebra: &VnAlgebra, images: Vec<CMat>) -> Result<Representation> {
        let tol = algebra.tol();
        let n = algebra.dim();
        if images.len() != n {
            return Err(Error::shape(
                format!("{n} images"),
                format!("{} images", images.len()),
            ));
        }
        let carrier_dim = if n == 0 { 0 } else { images[0].nrows() };
        for im in &images {
            if im.shape() != (carrier_dim, carrier_dim) {
                return Err(Error::shape(
                    format!("{carrier_dim}x{carrier_dim}"),
                    shape_string(im),
                ));
            }
        }
        let rep = Representation {
            algebra: algebra.clone(),
            images,
            carrier_dim,
        };
        for (i, b) in algebra.basis().iter().enumerate() {
            let adj = rep.apply(&b.adjoint())?;
            let defect = hs_distance(&adj, &rep.images[i].adjoint());
            if defect > tol.residual_for(hs_norm(&rep.images[i])) {
                return Err(Error::NotRepresentation {
                    kind: "adjoint preservation",
                    defect,
                });
            }
            for (j, c) in algebra.basis().iter().enumerate() {
                let prod = rep.apply(&(b * c))?;
                let direct = &rep.images[i] * &rep.images[j];
                let defect = hs_distance(&prod, &direct);
                if defect > tol.residual_for(hs_norm(&direct)) {
                    return Err(Error::NotRepresentation {
                        kind: "multiplicativity",
                        defect,
                    });
                }
            }
        }
        Ok(rep)
    }

    /// The ambient action of the algebra on ℂᵈ.
    pub fn ambient(algebra: &VnAlgebra) -> Result<Representation> {
        Representation::new(algebra, algebra.basis().to_vec())
    }

    pub fn algebra(&self) -> &VnAlgebra {
        &self.algebra
    }

    pub fn carrier_dim(&self) -> usize {
        self.carrier_dim
    }

    pub fn images(&self) -> &[CMat] {
        &self.images
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let c = self.algebra.space().coords(x)?;
        let mut out = CMat::zeros(self.carrier_dim, self.carrier_dim);
        for (im, w) in self.images.iter().zip(c.iter()) {
            out += im * *w;
        }
        Ok(out)
    }

    /// Multiplicity of each central block in this representation, read off
    /// as the rank of the image of the block's first diagonal unit.
    pub fn multiplicities(&self) -> Result<Vec<usize>> {
        let blocks = self.algebra.blocks()?;
        blocks
            .iter()
            .map(|blk| {
                let p = self.apply(blk.unit(0, 0))?;
                let t = p.trace().re;
                let m = t.round();
                if (t - m).abs() > 1e-6 {
                    return Err(Error::inconsistency(
                        "representation multiplicity count",
                        (t - m).abs(),
                    ));
                }
                Ok(m as usize)
            })
            .collect()
    }

    /// Faithful exactly when every central block acts with multiplicity ≥ 1.
    pub fn is_faithful(&self) -> Result<bool> {
        Ok(self.multiplicities()?.iter().all(|&m| m > 0))
    }

    /// Whether the algebra's unit acts as the identity of the carrier.
    pub fn is_nondegenerate(&self) -> Result<bool> {
        let u = self.apply(self.algebra.unit())?;
        let id = CMat::identity(self.carrier_dim, self.carrier_dim);
        let tol = self.algebra.tol();
        Ok(hs_distance(&u, &id) <= tol.residual_for((self.carrier_dim as f64).sqrt()))
    }
}

/// A conjugate-linear operator `v ↦ M·conj(v)` on ℂᴺ.
#[derive(Clone, Debug)]
pub struct ConjugateLinear {
    mat: CMat,
}

impl ConjugateLinear {
    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn apply(&self, v: &CVec) -> CVec {
        &self.mat * v.map(|z| z.conj())
    }

    /// The linear map `v ↦ self(a·self(v))` obtained by conjugating a linear
    /// operator with this conjugate-linear one.
    pub fn sandwich(&self, a: &CMat) -> CMat {
        &self.mat * a.map(|z| z.conj()) * self.mat.map(|z| z.conj())
    }
}

/// Realification of a conjugate-linear map `v ↦ M·conj(v)` as a real
/// 2N×2N matrix acting on stacked [real; imaginary] parts.
fn realify_antilinear(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(2 * n, 2 * n, |r, c| {
        let (i, j) = (r % n, c % n);
        let z = m[(i, j)];
        let v = match (r < n, c < n) {
            (true, true) => z.re,
            (true, false) => z.im,
            (false, true) => z.im,
            (false, false) => -z.re,
        };
        Complex::new(v, 0.0)
    })
}

/// Inverse of [`realify_antilinear`]; checks the block symmetry that
/// characterizes realified conjugate-linear maps.
fn antilinear_from_realified(r: &CMat, tol: Tolerance) -> Result<CMat> {
    let n2 = r.nrows();
    let n = n2 / 2;
    let norm = hs_norm(r);
    let mut defect = 0.0f64;
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = r[(i, j)];
            let b = r[(i + n, j)];
            defect = defect.max((r[(i, j + n)] - b).norm());
            defect = defect.max((r[(i + n, j + n)] + a).norm());
            defect = defect.max(a.im.abs()).max(b.im.abs());
            out[(i, j)] = Complex::new(a.re, b.re);
        }
    }
    if defect > tol.residual_for(norm) {
        return Err(Error::inconsistency(
            "antiunitary block symmetry",
            defect,
        ));
    }
    Ok(out)
}

/// The GNS space `L²(A,φ)` of a faithful state: coordinates, left regular
/// representation, cyclic vector and modular conjugation.
#[derive(Clone, Debug)]
pub struct GnsSpace {
    algebra: VnAlgebra,
    state: State,
    rep: Representation,
    to_carrier: CMat,
    from_carrier: CMat,
    cyclic: CVec,
    conjugation: ConjugateLinear,
}

pub fn gns_construct(algebra: &VnAlgebra, phi: &State) -> Result<GnsSpace> {
    let tol = algebra.tol();
    if !phi.algebra().same_algebra_as(algebra)? {
        return Err(Error::AlgebraMismatch(
            "state lives on a different algebra".into(),
        ));
    }
    let n = algebra.dim();
    if n == 0 {
        return Err(Error::AlgebraMismatch(
            "the zero algebra has no GNS space".into(),
        ));
    }
    let gram = CMat::from_fn(n, n, |i, j| {
        phi.eval(&(algebra.basis()[i].adjoint() * &algebra.basis()[j]))
    });
    let (vals, vecs) = eigh(&gram)?;
    let lmax = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let rank = vals.iter().filter(|&&v| v > tol.rank_tol * lmax).count();
    if rank < n {
        let null = algebra.space().from_coords(&CVec::from(vecs.column(0)));
        return Err(Error::NotFaithful {
            rank,
            dim: n,
            witness: format_matrix(&null),
        });
    }
    let sqrt = CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex::new(vals[i].sqrt(), 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    let inv_sqrt = CMat::from_fn(n, n, |i, j| {
        if i == j {
            Complex::new(1.0 / vals[i].sqrt(), 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    let to_carrier = &sqrt * vecs.adjoint();
    let from_carrier = &vecs * inv_sqrt;

    // Left regular representation in carrier coordinates.
    let images = algebra
        .basis()
        .iter()
        .map(|a| {
            let mut mult = CMat::zeros(n, n);
            for (j, b) in algebra.basis().iter().enumerate() {
                mult.set_column(j, &algebra.space().coords(&(a * b))?);
            }
            Ok(&to_carrier * mult * &from_carrier)
        })
        .collect::<Result<Vec<_>>>()?;
    let rep = Representation::new(algebra, images)?;
    let cyclic = &to_carrier * algebra.space().coords(algebra.unit())?;

    // S: â ↦ (a*)^, then J = antiunitary polar part of S.
    let adj_coords = CMat::from_fn(n, n, |i, j| {
        hs_inner(&algebra.basis()[i], &algebra.basis()[j].adjoint())
    });
    let s_mat = &to_carrier * adj_coords * from_carrier.map(|z| z.conj());
    let s_real = realify_antilinear(&s_mat);
    let pol = polar(&s_real, tol)?;
    let j_mat = antilinear_from_realified(&pol.u, tol)?;
    let conjugation = ConjugateLinear { mat: j_mat };

    let gns = GnsSpace {
        algebra: algebra.clone(),
        state: phi.clone(),
        rep,
        to_carrier,
        from_carrier,
        cyclic,
        conjugation,
    };
    gns.validate()?;
    Ok(gns)
}

impl GnsSpace {
    fn validate(&self) -> Result<()> {
        let tol = self.algebra.tol();
        let n = self.carrier_dim();
        // ‖â‖² = φ(a*a) and π(a)·1̂ = â on the basis.
        for b in self.algebra.basis() {
            let v = self.vector_of(b)?;
            let defect = (v.norm_squared()
                - self.state.eval(&(b.adjoint() * b)).re)
                .abs();
            if defect > tol.residual_for(1.0) {
                return Err(Error::inconsistency("GNS norm identity", defect));
            }
            let via_rep = self.rep.apply(b)? * &self.cyclic;
            if (&via_rep - &v).norm() > tol.residual_for(v.norm()) {
                return Err(Error::inconsistency(
                    "cyclic vector reproduces elements",
                    (&via_rep - &v).norm(),
                ));
            }
        }
        let j = &self.conjugation;
        let id = CMat::identity(n, n);
        // J is unitary as a real map and squares to the identity.
        let unitary_defect = hs_distance(&(j.matrix().adjoint() * j.matrix()), &id);
        let square_defect = hs_distance(&(j.matrix() * j.matrix().map(|z| z.conj())), &id);
        if unitary_defect > tol.residual_for(1.0) || square_defect > tol.residual_for(1.0) {
            return Err(Error::inconsistency(
                "modular conjugation involution",
                unitary_defect.max(square_defect),
            ));
        }
        // J π(a) J lands in the commutant of π(A).
        for a in self.algebra.basis() {
            let ja = j.sandwich(&self.rep.apply(a)?);
            for b in self.algebra.basis() {
                let pb = self.rep.apply(b)?;
                let comm = &ja * &pb - &pb * &ja;
                if hs_norm(&comm) > tol.residual_for(hs_norm(&pb)) {
                    return Err(Error::NotInCommutant {
                        with: "left representation",
                        defect: hs_norm(&comm),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn algebra(&self) -> &VnAlgebra {
        &self.algebra
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn carrier_dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn left_rep(&self) -> &Representation {
        &self.rep
    }

    /// Matrix taking algebra coordinates to carrier coordinates.
    pub fn to_carrier(&self) -> &CMat {
        &self.to_carrier
    }

    /// Matrix taking carrier coordinates back to algebra coordinates.
    pub fn from_carrier(&self) -> &CMat {
        &self.from_carrier
    }

    pub fn cyclic_vector(&self) -> &CVec {
        &self.cyclic
    }

    pub fn modular_conjugation(&self) -> &ConjugateLinear {
        &self.conjugation
    }

    /// Carrier vector â of an algebra element.
    pub fn vector_of(&self, x: &CMat) -> Result<CVec> {
        Ok(&self.to_carrier * self.algebra.space().coords(x)?)
    }

    /// Algebra element whose carrier vector is `v`.
    pub fn element_of(&self, v: &CVec) -> CMat {
        self.algebra.space().from_coords(&(&self.from_carrier * v))
    }

    /// Unitary on the carrier sending â to (θ(a))^ for a state-preserving
    /// automorphism. It intertwines the left representation with its
    /// θ-twist and commutes with the modular conjugation.
    pub fn implementing_unitary(&self, theta: &Automorphism) -> Result<CMat> {
        let tol = self.algebra.tol();
        if !theta.algebra().same_algebra_as(&self.algebra)? {
            return Err(Error::AlgebraMismatch(
                "automorphism acts on a different algebra".into(),
            ));
        }
        if !theta.preserves_state(&self.state)? {
            let defect = self
                .algebra
                .basis()
                .iter()
                .map(|b| {
                    theta
                        .apply(b)
                        .map(|t| (self.state.eval(&t) - self.state.eval(b)).norm())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            return Err(Error::NotInvariantState { defect });
        }
        let u = &self.to_carrier * theta.coordinate_matrix() * &self.from_carrier;
        let n = self.carrier_dim();
        let id = CMat::identity(n, n);
        let unit_defect = hs_distance(&(u.adjoint() * &u), &id);
        if unit_defect > tol.residual_for((n as f64).sqrt()) {
            return Err(Error::inconsistency(
                "implementing unitary is unitary",
                unit_defect,
            ));
        }
        for b in self.algebra.basis() {
            let lhs = &u * self.rep.apply(b)? * u.adjoint();
            let rhs = self.rep.apply(&theta.apply(b)?)?;
            let defect = hs_distance(&lhs, &rhs);
            if defect > tol.residual_for(hs_norm(&rhs)) {
                return Err(Error::inconsistency(
                    "implementing unitary intertwines",
                    defect,
                ));
            }
        }
        let j = self.conjugation.matrix();
        let commute_defect = hs_distance(&(&u * j), &(j * u.map(|z| z.conj())));
        if commute_defect > tol.residual_for(hs_norm(j)) {
            return Err(Error::inconsistency(
                "implementing unitary commutes with conjugation",
                commute_defect,
            ));
        }
        Ok(u)
    }
}

fn format_matrix(m: &CMat) -> String {
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols())
                .map(|j| format!("{:.3}{:+.3}i", m[(i, j)].re, m[(i, j)].im))
                .collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// An algebra-linear unitary `L²(A,φ) → L²(A,ψ)` intertwining the two left
/// regular representations.
pub fn standard_unitary(algebra: &VnAlgebra, phi: &State, psi: &State) -> Result<CMat> {
    let g1 = gns_construct(algebra, phi)?;
    let g2 = gns_construct(algebra, psi)?;
    let (u, r) = representation_isometry(g1.left_rep(), g2.left_rep())?;
    if r != 1 {
        return Err(Error::inconsistency(
            "standard spaces have equal multiplicities",
            r as f64,
        ));
    }
    Ok(u)
}

/// An algebra-linear isometry from the carrier of ρ into `carrier(π) ⊗ ℂʳ`,
/// with r as small as the blockwise multiplicity arithmetic allows.
///
/// Requires π faithful and ρ non-degenerate. The isometry is the polar part
/// of a generic element of the blockwise intertwiner space, retried with
/// fresh randomness if a draw is rank-deficient.
pub fn representation_isometry(
    rho: &Representation,
    pi: &Representation,
) -> Result<(CMat, usize)> {
    let algebra = rho.algebra();
    let tol = algebra.tol();
    if !pi.algebra().same_algebra_as(algebra)? {
        return Err(Error::AlgebraMismatch(
            "representations of different algebras".into(),
        ));
    }
    {
        let u = rho.apply(algebra.unit())?;
        let id = CMat::identity(rho.carrier_dim(), rho.carrier_dim());
        let defect = hs_distance(&u, &id);
        if defect > tol.residual_for((rho.carrier_dim() as f64).sqrt()) {
            return Err(Error::NotRepresentation {
                kind: "non-degeneracy",
                defect,
            });
        }
    }
    let blocks = algebra.blocks()?;
    let mult_rho = rho.multiplicities()?;
    let mult_pi = pi.multiplicities()?;
    for (k, &m) in mult_pi.iter().enumerate() {
        if m == 0 {
            return Err(Error::NotFaithfulRepresentation { block: k });
        }
    }
    let r = blocks
        .iter()
        .enumerate()
        .filter(|(k, _)| mult_rho[*k] > 0)
        .map(|(k, _)| mult_rho[k].div_ceil(mult_pi[k]))
        .max()
        .unwrap_or(1);

    // Canonical intertwiners T_{ab} per block: send the a-th multiplicity
    // copy in ρ onto the b-th copy in π along matching matrix units.
    let kr = rho.carrier_dim();
    let kp = pi.carrier_dim();
    let mut basis_ops: Vec<Vec<CMat>> = Vec::new();
    for (k, blk) in blocks.iter().enumerate() {
        if mult_rho[k] == 0 {
            basis_ops.push(Vec::new());
            continue;
        }
        let eta = range_basis(&rho.apply(blk.unit(0, 0))?, mult_rho[k], tol)?;
        let xi = range_basis(&pi.apply(blk.unit(0, 0))?, mult_pi[k], tol)?;
        let mut ops = Vec::with_capacity(mult_rho[k] * mult_pi[k]);
        for a in 0..mult_rho[k] {
            for b in 0..mult_pi[k] {
                let mut t = CMat::zeros(kp, kr);
                for i in 0..blk.block_dim {
                    let left = pi.apply(blk.unit(i, 0))? * xi.column(b);
                    let right = rho.apply(blk.unit(i, 0))? * eta.column(a);
                    t += &left * right.adjoint();
                }
                ops.push(t);
            }
        }
        basis_ops.push(ops);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(ISOMETRY_SEED);
    let id_r = CMat::identity(r, r);
    'attempt: for _ in 0..RETRY_BUDGET {
        // Generic combination, each block copy placed into random slots.
        let mut w = CMat::zeros(kp * r, kr);
        for ops in &basis_ops {
            for t in ops {
                for s in 0..r {
                    let coeff = Complex::new(
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    );
                    w += embed_slot(t, s, r) * coeff;
                }
            }
        }
        let p = polar(&w, tol)?;
        let u = p.u;
        let id = CMat::identity(kr, kr);
        if hs_distance(&(u.adjoint() * &u), &id) > tol.residual_for((kr as f64).sqrt()) {
            continue 'attempt;
        }
        for (i, b) in algebra.basis().iter().enumerate() {
            let amp = pi.images()[i].kronecker(&id_r);
            let defect = hs_distance(&(&u * rho.apply(b)?), &(amp * &u));
            if defect > tol.residual_for(hs_norm(&u)) {
                continue 'attempt;
            }
        }
        return Ok((u, r));
    }
    Err(Error::RetryBudgetExhausted {
        attempts: RETRY_BUDGET,
        context: "representation isometry".into(),
    })
}

/// Columns spanning the range of a projection of known rank.
fn range_basis(p: &CMat, rank: usize, _tol: Tolerance) -> Result<CMat> {
    let (vals, vecs) = eigh(p)?;
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    if cols.len() != rank {
        return Err(Error::inconsistency(
            "projection rank disagrees with multiplicity",
            cols.len() as f64 - rank as f64,
        ));
    }
    Ok(CMat::from_fn(p.nrows(), rank, |r, c| vecs[(r, cols[c])]))
}

/// Embed `t: ℂᵏ → ℂᵖ` into slot `s` of `ℂᵖ ⊗ ℂʳ` (slot index fast).
fn embed_slot(t: &CMat, s: usize, r: usize) -> CMat {
    let (p, k) = t.shape();
    let mut out = CMat::zeros(p * r, k);
    for i in 0..p {
        for j in 0..k {
            out[(i * r + s, j)] = t[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::conditional_expectation;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn unit_mat(d: usize, i: usize, j: usize) -> CMat {
        let mut m = CMat::zeros(d, d);
        m[(i, j)] = c(1.0, 0.0);
        m
    }

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn full2() -> VnAlgebra {
        VnAlgebra::full(2, tol()).unwrap()
    }

    fn diag2() -> VnAlgebra {
        VnAlgebra::closure(&[unit_mat(2, 0, 0), unit_mat(2, 1, 1)], tol()).unwrap()
    }

    fn random_element(a: &VnAlgebra, rng: &mut ChaCha8Rng) -> CMat {
        let mut x = CMat::zeros(a.ambient_dim(), a.ambient_dim());
        for b in a.basis() {
            x += b * c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        x
    }

    #[test]
    fn gns_dimensions_and_faithfulness() {
        let a = full2();
        let g = gns_construct(&a, &a.canonical_trace().unwrap()).unwrap();
        assert_eq!(g.carrier_dim(), 4);
        assert!(g.left_rep().is_faithful().unwrap());

        let d = diag2();
        let g = gns_construct(&d, &d.canonical_trace().unwrap()).unwrap();
        assert_eq!(g.carrier_dim(), 2);
    }

    #[test]
    fn gns_norm_identity_for_skew_state() {
        let a = full2();
        let rho = CMat::from_diagonal(&CVec::from_vec(vec![
            c(1.0 / 3.0, 0.0),
            c(2.0 / 3.0, 0.0),
        ]));
        let phi = State::from_density(a.clone(), &rho).unwrap();
        assert!(phi.is_faithful());
        assert!(!phi.is_tracial());
        let g = gns_construct(&a, &phi).unwrap();
        assert_eq!(g.carrier_dim(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let x = random_element(&a, &mut rng);
            let v = g.vector_of(&x).unwrap();
            let lhs = v.norm_squared();
            let rhs = phi.eval(&(x.adjoint() * &x)).re;
            assert!((lhs - rhs).abs() < 1e-9, "norm identity off by {}", lhs - rhs);
        }
    }

    #[test]
    fn gns_rejects_unfaithful_state() {
        let a = full2();
        let phi = State::from_density(a.clone(), &unit_mat(2, 0, 0)).unwrap();
        let err = gns_construct(&a, &phi).unwrap_err();
        assert!(matches!(err, Error::NotFaithful { rank: 2, dim: 4, .. }));
    }

    #[test]
    fn gns_cyclic_vector_generates_carrier() {
        let a = full2();
        let rho = CMat::from_diagonal(&CVec::from_vec(vec![c(0.25, 0.0), c(0.75, 0.0)]));
        let phi = State::from_density(a.clone(), &rho).unwrap();
        let g = gns_construct(&a, &phi).unwrap();
        let n = g.carrier_dim();
        let mut stacked = CMat::zeros(n, n);
        for (j, b) in a.basis().iter().enumerate() {
            stacked.set_column(j, &(g.left_rep().apply(b).unwrap() * g.cyclic_vector()));
        }
        let ns = crate::numlin::null_space(&stacked, tol()).unwrap();
        assert!(ns.is_empty());
    }

    #[test]
    fn modular_conjugation_is_adjoint_hat_in_tracial_case() {
        let a = full2();
        let g = gns_construct(&a, &a.canonical_trace().unwrap()).unwrap();
        let j = g.modular_conjugation();
        for b in a.basis() {
            let lhs = j.apply(&g.vector_of(b).unwrap());
            let rhs = g.vector_of(&b.adjoint()).unwrap();
            assert!((lhs - rhs).norm() < 1e-9);
        }
    }

    #[test]
    fn modular_conjugation_commutant_property_nontracial() {
        let a = full2();
        let rho = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0)]));
        let phi = State::from_density(a.clone(), &rho).unwrap();
        let g = gns_construct(&a, &phi).unwrap();
        let j = g.modular_conjugation();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let x = random_element(&a, &mut rng);
            let y = random_element(&a, &mut rng);
            let jx = j.sandwich(&g.left_rep().apply(&x).unwrap());
            let py = g.left_rep().apply(&y).unwrap();
            let comm = &jx * &py - &py * &jx;
            assert!(hs_norm(&comm) < 1e-8);
        }
    }

    #[test]
    fn implementing_unitary_of_identity_is_identity() {
        let a = full2();
        let g = gns_construct(&a, &a.canonical_trace().unwrap()).unwrap();
        let theta = Automorphism::identity(&a).unwrap();
        let u = g.implementing_unitary(&theta).unwrap();
        assert!(hs_distance(&u, &CMat::identity(4, 4)) < 1e-9);
    }

    #[test]
    fn implementing_unitary_of_inner_matches_standard_formula() {
        let a = full2();
        let g = gns_construct(&a, &a.canonical_trace().unwrap()).unwrap();
        let v = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let theta = Automorphism::inner(&a, &v).unwrap();
        let u = g.implementing_unitary(&theta).unwrap();
        let pv = g.left_rep().apply(&v).unwrap();
        let j = g.modular_conjugation().matrix();
        // π(v)·Jπ(v)J as a linear map.
        let formula = &pv * (j * pv.map(|z| z.conj()) * j.map(|z| z.conj()));
        assert!(hs_distance(&u, &formula) < 1e-8);
    }

    fn m2_plus_m2() -> (VnAlgebra, Automorphism) {
        let mut gens = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                gens.push(unit_mat(4, i, j));
                gens.push(unit_mat(4, i + 2, j + 2));
            }
        }
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        let swap = {
            let mut s = CMat::zeros(4, 4);
            for i in 0..2 {
                s[(i, i + 2)] = c(1.0, 0.0);
                s[(i + 2, i)] = c(1.0, 0.0);
            }
            s
        };
        let images = a.basis().iter().map(|b| &swap * b * swap.adjoint()).collect();
        let theta = Automorphism::new(&a, images).unwrap();
        (a, theta)
    }

    #[test]
    fn implementing_unitary_of_block_swap_squares_to_identity() {
        let (a, theta) = m2_plus_m2();
        let g = gns_construct(&a, &a.canonical_trace().unwrap()).unwrap();
        let u = g.implementing_unitary(&theta).unwrap();
        let n = g.carrier_dim();
        assert!(hs_distance(&(&u * &u), &CMat::identity(n, n)) < 1e-8);
        // Group law against an inner partner.
        let v = {
            let mut m = CMat::identity(4, 4);
            m[(0, 0)] = c(0.0, 1.0);
            m[(1, 1)] = c(0.0, -1.0);
            m
        };
        let psi = Automorphism::inner(&a, &v).unwrap();
        let u_psi = g.implementing_unitary(&psi).unwrap();
        let u_comp = g
            .implementing_unitary(&theta.compose(&psi).unwrap())
            .unwrap();
        assert!(hs_distance(&(&u * &u_psi), &u_comp) < 1e-8);
    }

    #[test]
    fn standard_unitaries_intertwine() {
        let a = full2();
        let tr = a.canonical_trace().unwrap();
        let u = standard_unitary(&a, &tr, &tr).unwrap();
        let g = gns_construct(&a, &tr).unwrap();
        for b in a.basis() {
            let pb = g.left_rep().apply(b).unwrap();
            assert!(hs_norm(&(&u * &pb - &pb * &u)) < 1e-8);
        }

        let rho = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0 / 3.0, 0.0), c(2.0 / 3.0, 0.0)]));
        let psi = State::from_density(a.clone(), &rho).unwrap();
        let u = standard_unitary(&a, &tr, &psi).unwrap();
        let g2 = gns_construct(&a, &psi).unwrap();
        let id = CMat::identity(4, 4);
        assert!(hs_distance(&(u.adjoint() * &u), &id) < 1e-8);
        for b in a.basis() {
            let lhs = &u * g.left_rep().apply(b).unwrap();
            let rhs = g2.left_rep().apply(b).unwrap() * &u;
            assert!(hs_distance(&lhs, &rhs) < 1e-8);
        }

        let d = diag2();
        let phi1 = State::from_density(
            d.clone(),
            &CMat::from_diagonal(&CVec::from_vec(vec![c(0.3, 0.0), c(0.7, 0.0)])),
        )
        .unwrap();
        let phi2 = State::from_density(
            d.clone(),
            &CMat::from_diagonal(&CVec::from_vec(vec![c(0.6, 0.0), c(0.4, 0.0)])),
        )
        .unwrap();
        let u = standard_unitary(&d, &phi1, &phi2).unwrap();
        let gd1 = gns_construct(&d, &phi1).unwrap();
        let gd2 = gns_construct(&d, &phi2).unwrap();
        for b in d.basis() {
            let lhs = &u * gd1.left_rep().apply(b).unwrap();
            let rhs = gd2.left_rep().apply(b).unwrap() * &u;
            assert!(hs_distance(&lhs, &rhs) < 1e-8);
        }
    }

    /// Representation acting block-diagonally with the given multiplicities
    /// on an algebra of the form M₂⊕M₁ inside 3×3 matrices.
    fn rep_with_mults(a: &VnAlgebra, m2: usize, m1: usize) -> Representation {
        let k = 2 * m2 + m1;
        let images: Vec<CMat> = a
            .basis()
            .iter()
            .map(|b| {
                let mut im = CMat::zeros(k, k);
                for copy in 0..m2 {
                    im.view_mut((2 * copy, 2 * copy), (2, 2))
                        .copy_from(&b.view((0, 0), (2, 2)));
                }
                for copy in 0..m1 {
                    im[(2 * m2 + copy, 2 * m2 + copy)] = b[(2, 2)];
                }
                im
            })
            .collect();
        Representation::new(a, images).unwrap()
    }

    #[test]
    fn representation_isometry_examples() {
        let a = full2();
        let pi = Representation::ambient(&a).unwrap();
        let (u, r) = representation_isometry(&pi, &pi).unwrap();
        assert_eq!(r, 1);
        let id = CMat::identity(2, 2);
        assert!(hs_distance(&(u.adjoint() * &u), &id) < 1e-8);

        // ρ = π ⊕ π doubles the multiplicity.
        let doubled: Vec<CMat> = a
            .basis()
            .iter()
            .map(|b| {
                let mut m = CMat::zeros(4, 4);
                m.view_mut((0, 0), (2, 2)).copy_from(b);
                m.view_mut((2, 2), (2, 2)).copy_from(b);
                m
            })
            .collect();
        let rho = Representation::new(&a, doubled).unwrap();
        let (u, r) = representation_isometry(&rho, &pi).unwrap();
        assert_eq!(r, 2);
        let id = CMat::identity(4, 4);
        assert!(hs_distance(&(u.adjoint() * &u), &id) < 1e-8);
    }

    #[test]
    fn representation_isometry_mixed_multiplicities() {
        let mut gens = vec![unit_mat(3, 2, 2)];
        for i in 0..2 {
            for j in 0..2 {
                gens.push(unit_mat(3, i, j));
            }
        }
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        let rho = rep_with_mults(&a, 3, 1);
        let pi = rep_with_mults(&a, 1, 2);
        let (u, r) = representation_isometry(&rho, &pi).unwrap();
        assert_eq!(r, 3);
        let kr = rho.carrier_dim();
        let id = CMat::identity(kr, kr);
        assert!(hs_distance(&(u.adjoint() * &u), &id) < 1e-8);
        let id_r = CMat::identity(r, r);
        for (i, b) in a.basis().iter().enumerate() {
            let amp = pi.images()[i].kronecker(&id_r);
            let defect = hs_distance(&(&u * rho.apply(b).unwrap()), &(amp * &u));
            assert!(defect < 1e-8);
        }
        // uu* commutes with the ampliated representation.
        let p = &u * u.adjoint();
        for im in pi.images() {
            let amp = im.kronecker(&id_r);
            assert!(hs_norm(&(&p * &amp - &amp * &p)) < 1e-8);
        }
    }

    #[test]
    fn representation_isometry_rejects_unfaithful_target() {
        let mut gens = vec![unit_mat(3, 2, 2)];
        for i in 0..2 {
            for j in 0..2 {
                gens.push(unit_mat(3, i, j));
            }
        }
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        let rho = rep_with_mults(&a, 1, 1);
        let pi = rep_with_mults(&a, 1, 0);
        let err = representation_isometry(&rho, &pi).unwrap_err();
        assert!(matches!(err, Error::NotFaithfulRepresentation { block: _ }));
    }

    #[test]
    fn conditional_expectation_composes_with_gns() {
        // Sanity across modules: ε maps into the subalgebra, so GNS vectors
        // of ε-images stay in the sub-carrier.
        let a = full2();
        let d = diag2();
        let phi = a.canonical_trace().unwrap();
        let eps = conditional_expectation(&a, &d, &phi).unwrap();
        let x = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(5.0, 2.0), c(0.0, 1.0), c(-2.0, 0.0)]);
        let e = eps.apply(&x).unwrap();
        assert!(d.contains(&e).unwrap());
    }
}
