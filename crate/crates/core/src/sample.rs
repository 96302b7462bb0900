//! Seeded generators for random-but-reproducible inputs: block algebras,
//! projections and corners inside them, faithful states, inner
//! automorphisms, and completely positive maps. Everything is driven by a
//! single [`Sampler`] so a seed pins down an entire scenario.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{conditional_expectation, Automorphism, State, VnAlgebra};
use crate::corner::{verify_corner, Corner};
use crate::cpmap::CpMap;
use crate::error::{Error, Result};
use crate::numlin::{
    eigh, hermitian_function, hs_inner, hs_norm, CMat, Complex, OperatorSpace, Tolerance,
};

/// Deterministic source of sample objects.
pub struct Sampler {
    rng: ChaCha8Rng,
    tol: Tolerance,
}

/// A random algebra together with two projections inside it and the
/// rectangular realization of the corner they cut out.
pub struct CornerSample {
    pub algebra: VnAlgebra,
    pub e1: CMat,
    pub e2: CMat,
    /// Isometry onto the range of `e1` (`w1·w1* = e1`).
    pub w1: CMat,
    pub w2: CMat,
    pub corner: Corner,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            tol: Tolerance::default(),
        }
    }

    pub fn tol(&self) -> Tolerance {
        self.tol
    }

    /// Matrix with independent complex entries in the centered unit box.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            Complex::new(
                self.rng.random::<f64>() - 0.5,
                self.rng.random::<f64>() - 0.5,
            )
        })
    }

    /// Haar-ish unitary: QR of a random matrix with the diagonal phases of
    /// the triangular factor absorbed into the orthogonal factor.
    pub fn unitary(&mut self, dim: usize) -> CMat {
        let qr = self.matrix(dim, dim).qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..dim {
            let d = r[(j, j)];
            let phase = if d.norm() > 0.0 {
                d / d.norm()
            } else {
                Complex::new(1.0, 0.0)
            };
            for i in 0..dim {
                q[(i, j)] *= phase;
            }
        }
        q
    }

    /// Random element of a spanned operator subspace.
    pub fn element_of(&mut self, space: &OperatorSpace) -> CMat {
        let mut out = CMat::zeros(space.rows(), space.cols());
        for b in space.basis() {
            out += b * Complex::new(
                self.rng.random::<f64>() - 0.5,
                self.rng.random::<f64>() - 0.5,
            );
        }
        out
    }

    /// Random Hermitian element of a *-closed subspace.
    pub fn hermitian_of(&mut self, space: &OperatorSpace) -> CMat {
        let g = self.element_of(space);
        (&g + g.adjoint()).scale(0.5)
    }

    /// Multi-matrix algebra on the full ambient space: a random partition
    /// into blocks with multiplicities, conjugated by a random unitary.
    pub fn block_algebra(&mut self, ambient: usize) -> Result<VnAlgebra> {
        assert!(ambient > 0, "ambient dimension must be positive");
        let mut gens = Vec::new();
        let mut offset = 0;
        while offset < ambient {
            let remaining = ambient - offset;
            let n = self.rng.random_range(1..=remaining.min(3));
            let m = self.rng.random_range(1..=remaining / n);
            for i in 0..n {
                for j in 0..n {
                    let mut g = CMat::zeros(ambient, ambient);
                    for s in 0..m {
                        g[(offset + i * m + s, offset + j * m + s)] = Complex::new(1.0, 0.0);
                    }
                    gens.push(g);
                }
            }
            offset += n * m;
        }
        let u = self.unitary(ambient);
        let conjugated: Vec<CMat> = gens.iter().map(|g| u.adjoint() * g * &u).collect();
        VnAlgebra::from_closed_span(&conjugated, self.tol)
    }

    /// Projection inside the algebra: the spectral projection of a random
    /// Hermitian element above its widest eigenvalue gap. Cutting anywhere
    /// else risks splitting a degenerate multiplet, which would push the
    /// result outside the algebra. Falls back to the unit when the spectrum
    /// has no usable gap.
    pub fn projection_in(&mut self, algebra: &VnAlgebra) -> Result<CMat> {
        let h = self.hermitian_of(algebra.space());
        let (values, _) = eigh(&h)?;
        let spread = values.last().copied().unwrap_or(0.0) - values.first().copied().unwrap_or(0.0);
        let mut cut = None;
        let mut widest = 1e-6 * spread.max(1.0);
        for w in values.windows(2) {
            if w[1] - w[0] > widest {
                widest = w[1] - w[0];
                cut = Some(0.5 * (w[0] + w[1]));
            }
        }
        let Some(cut) = cut else {
            return Ok(algebra.unit().clone());
        };
        hermitian_function(&h, |t| if t > cut { 1.0 } else { 0.0 }, self.tol)
    }

    /// Two projections in a random algebra and the corner between them,
    /// realized as rectangular matrices through range isometries of the
    /// projections. Resamples the projections when they land in disjoint
    /// central summands and the corner collapses to zero.
    pub fn corner_sample(&mut self, ambient: usize) -> Result<CornerSample> {
        let algebra = self.block_algebra(ambient)?;
        for _ in 0..16 {
            let e1 = self.projection_in(&algebra)?;
            let e2 = self.projection_in(&algebra)?;
            let w1 = range_isometry(&e1)?;
            let w2 = range_isometry(&e2)?;
            let vectors: Vec<CMat> = algebra
                .basis()
                .iter()
                .map(|b| w1.adjoint() * b * &w2)
                .collect();
            if vectors.iter().all(|v| hs_norm(v) <= self.tol.rank_tol) {
                continue;
            }
            let (corner, report) = verify_corner(&vectors, self.tol)?;
            let corner = corner.ok_or_else(|| {
                Error::inconsistency(
                    "projected corner of an algebra verifies",
                    report.worst_residual,
                )
            })?;
            return Ok(CornerSample {
                algebra,
                e1,
                e2,
                w1,
                w2,
                corner,
            });
        }
        Err(Error::RetryBudgetExhausted {
            attempts: 16,
            context: "nonzero corner between sampled projections".into(),
        })
    }

    /// Faithful state: density `(1 + g*g)/normalization` for a random
    /// algebra element `g`, bounded below by the unit on the support.
    pub fn faithful_state(&mut self, algebra: &VnAlgebra) -> Result<State> {
        let g = self.element_of(algebra.space());
        let raw = algebra.unit() + g.adjoint() * &g;
        let total = hs_inner(&raw, algebra.unit()).re;
        State::from_density(algebra.clone(), &raw.scale(1.0 / total))
    }

    /// Unitary inside the algebra: `exp(i·h)` of a random Hermitian element
    /// through spectral calculus.
    pub fn unitary_in(&mut self, algebra: &VnAlgebra) -> Result<CMat> {
        let h = self.hermitian_of(algebra.space());
        let cos = hermitian_function(&h, f64::cos, self.tol)?;
        let sin = hermitian_function(&h, f64::sin, self.tol)?;
        Ok(cos + sin * Complex::new(0.0, 1.0))
    }

    pub fn inner_automorphism(&mut self, algebra: &VnAlgebra) -> Result<Automorphism> {
        let u = self.unitary_in(algebra)?;
        Automorphism::inner(algebra, &u)
    }

    /// Completely positive map `a ↦ ε(Σ wᵢ*·a·wᵢ)`: a two-element Kraus
    /// compression into the target's ambient space followed by the
    /// trace-preserving conditional expectation onto the target algebra.
    /// Unital maps normalize the Kraus family so Σ wᵢ*wᵢ = 1; non-unital
    /// ones shrink it by a fixed factor afterwards.
    pub fn cp_map(
        &mut self,
        source: &VnAlgebra,
        target: &VnAlgebra,
        unital: bool,
    ) -> Result<CpMap> {
        let d1 = source.ambient_dim();
        let d2 = target.ambient_dim();
        let mut kraus = vec![self.matrix(d1, d2), self.matrix(d1, d2)];
        let mut sum = CMat::zeros(d2, d2);
        for w in &kraus {
            sum += w.adjoint() * w;
        }
        let whiten = hermitian_function(&sum, |t| 1.0 / t.sqrt(), self.tol)?;
        for w in &mut kraus {
            *w *= &whiten;
            if !unital {
                *w *= Complex::new(0.8, 0.0);
            }
        }
        let full = VnAlgebra::full(d2, self.tol)?;
        let trace = full.canonical_trace()?;
        let eps = conditional_expectation(&full, target, &trace)?;
        let images = source
            .basis()
            .iter()
            .map(|b| {
                let mut raw = CMat::zeros(d2, d2);
                for w in &kraus {
                    raw += w.adjoint() * b * w;
                }
                eps.apply(&raw)
            })
            .collect::<Result<Vec<_>>>()?;
        CpMap::new(source.clone(), target.clone(), images)
    }
}

/// Isometry whose range is the range of the projection: eigenvectors at
/// eigenvalue one, assembled column by column.
pub fn range_isometry(p: &CMat) -> Result<CMat> {
    let (values, vectors) = eigh(p)?;
    let kept: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.5).collect();
    let mut w = CMat::zeros(p.nrows(), kept.len());
    for (c, &i) in kept.iter().enumerate() {
        w.set_column(c, &vectors.column(i).into_owned());
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::hs_distance;

    #[test]
    fn sampled_objects_satisfy_their_contracts() {
        let mut s = Sampler::new(7);
        let u = s.unitary(4);
        assert!(hs_distance(&(u.adjoint() * &u), &CMat::identity(4, 4)) < 1e-12);

        let alg = s.block_algebra(5).unwrap();
        assert!(alg.is_unital_in_ambient());
        let p = s.projection_in(&alg).unwrap();
        assert!(hs_distance(&(&p * &p), &p) < 1e-10);
        assert!(alg.contains(&p).unwrap());

        let phi = s.faithful_state(&alg).unwrap();
        assert!(phi.is_faithful());

        let v = s.unitary_in(&alg).unwrap();
        assert!(alg.contains(&v).unwrap());
        let d = alg.ambient_dim();
        assert!(hs_distance(&(v.adjoint() * &v), &CMat::identity(d, d)) < 1e-10);
    }

    #[test]
    fn corner_samples_are_corners_of_the_algebra() {
        let mut s = Sampler::new(11);
        let cs = s.corner_sample(6).unwrap();
        assert!(cs.corner.dim() > 0);
        // The rectangular realization reproduces e1·b·e2.
        for b in cs.algebra.basis() {
            let rect = cs.w1.adjoint() * b * &cs.w2;
            let square = &cs.w1 * &rect * cs.w2.adjoint();
            let direct = &cs.e1 * b * &cs.e2;
            assert!(hs_distance(&square, &direct) < 1e-10);
        }
    }

    #[test]
    fn sampled_cp_maps_are_unital_when_asked() {
        let mut s = Sampler::new(13);
        let a1 = s.block_algebra(4).unwrap();
        let a2 = s.block_algebra(3).unwrap();
        let eta = s.cp_map(&a1, &a2, true).unwrap();
        assert!(eta.is_unital());
        let eta = s.cp_map(&a1, &a2, false).unwrap();
        assert!(!eta.is_unital());
    }
}
