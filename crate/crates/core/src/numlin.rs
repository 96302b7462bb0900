//! Dense complex linear-algebra substrate.
//!
//! Operator subspaces of rectangular matrices are carried as orthonormal
//! bases under the Hilbert–Schmidt inner product `⟨a,b⟩ = trace(a*b)`;
//! everything downstream (membership, projections, spectral calculus, polar
//! decomposition, positivity) treats these as exact-up-to-tolerance
//! primitives.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;
pub type CMat = DMatrix<Complex>;
pub type CVec = DVector<Complex>;

/// Numerical cutoffs used throughout.
///
/// `rank_tol` is a relative singular-value cutoff (relative to the largest
/// singular value of whatever system is being ranked); `residual_tol` bounds
/// membership and identity residuals, relative to `max(1, ‖x‖)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rank_tol: f64,
    pub residual_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_tol: 1e-9,
            residual_tol: 1e-8,
        }
    }
}

impl Tolerance {
    pub fn new(rank_tol: f64, residual_tol: f64) -> Result<Self> {
        if !(rank_tol > 0.0) || !(residual_tol > 0.0) {
            return Err(Error::InvalidTolerance(format!(
                "rank_tol {rank_tol} and residual_tol {residual_tol} must both be positive"
            )));
        }
        Ok(Tolerance {
            rank_tol,
            residual_tol,
        })
    }

    /// Derive both cutoffs from a single residual tolerance
    /// (`rank_tol = residual_tol / 10`).
    pub fn from_residual(residual_tol: f64) -> Result<Self> {
        Tolerance::new(residual_tol / 10.0, residual_tol)
    }

    /// Residual bound scaled for an object of the given norm.
    pub fn residual_for(&self, norm: f64) -> f64 {
        self.residual_tol * norm.max(1.0)
    }
}

pub fn hs_inner(a: &CMat, b: &CMat) -> Complex {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn hs_norm(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hs_distance(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn hermiticity_defect(h: &CMat) -> f64 {
    hs_distance(h, &h.adjoint())
}

pub(crate) fn shape_string(m: &CMat) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

fn check_same_shape(vectors: &[CMat]) -> Result<(usize, usize)> {
    let (rows, cols) = vectors[0].shape();
    for v in vectors.iter().skip(1) {
        if v.shape() != (rows, cols) {
            return Err(Error::shape(format!("{rows}x{cols}"), shape_string(v)));
        }
    }
    Ok((rows, cols))
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// The fast path is nalgebra's solver; its output is verified against the
/// input (reconstruction and unitarity of the eigenvector matrix) and a
/// Jacobi sweep takes over when the verification fails. nalgebra's complex
/// decompositions can silently return invalid factors on nearly degenerate
/// spectra, so an unverified result is not trustworthy.
pub fn eigh(h: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let sym = (h + h.adjoint()).scale(0.5);
    if let Some(se) = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, 10_000) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
        let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
        if eigen_factors_ok(&sym, &values, &vectors) {
            return Ok((values, vectors));
        }
    }
    jacobi_eigh(&sym)
}

fn eigen_factors_ok(sym: &CMat, values: &[f64], vectors: &CMat) -> bool {
    let n = sym.nrows();
    let gram = vectors.adjoint() * vectors;
    let gram_defect = hs_distance(&gram, &CMat::identity(n, n));
    if gram_defect > FACTOR_CHECK_TOL * (n as f64).sqrt().max(1.0) {
        return false;
    }
    let diag = CMat::from_diagonal(&CVec::from_iterator(
        n,
        values.iter().map(|&t| Complex::new(t, 0.0)),
    ));
    let recon = vectors * diag * vectors.adjoint();
    hs_distance(&recon, sym) <= FACTOR_CHECK_TOL * hs_norm(sym)
}

/// Cyclic two-sided Jacobi diagonalization of a Hermitian matrix. Slower
/// than the tridiagonalization route but unconditionally stable: every step
/// is an exact unitary similarity, so the factors cannot drift away from
/// the input the way a misconverged bidiagonal sweep can.
fn jacobi_eigh(sym: &CMat) -> Result<(Vec<f64>, CMat)> {
    let n = sym.nrows();
    let mut a = sym.clone();
    let mut v = CMat::identity(n, n);
    let fro = hs_norm(sym);
    if fro == 0.0 {
        return Ok((vec![0.0; n], v));
    }
    let thresh = f64::EPSILON * fro;
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let g = a[(p, q)].norm();
                if g <= thresh {
                    continue;
                }
                rotated = true;
                let phase = a[(p, q)] / g;
                let phc = phase.conj();
                let (c, s) = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, g);
                for k in 0..n {
                    let hp = a[(k, p)];
                    let hq = a[(k, q)];
                    a[(k, p)] = hp * c - hq * phc * s;
                    a[(k, q)] = hp * s + hq * phc * c;
                }
                for k in 0..n {
                    let hp = a[(p, k)];
                    let hq = a[(q, k)];
                    a[(p, k)] = hp * c - hq * phase * s;
                    a[(q, k)] = hp * s + hq * phase * c;
                }
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * c - vq * phc * s;
                    v[(k, q)] = vp * s + vq * phc * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::EigenFailure);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = CMat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Cosine and sine of the rotation angle that zeroes the off-diagonal of
/// the real symmetric 2×2 system `[[app, g], [g, aqq]]` with `g > 0`.
fn jacobi_rotation(app: f64, aqq: f64, g: f64) -> (f64, f64) {
    let tau = (aqq - app) / (2.0 * g);
    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t)
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Relative bound for accepting a factorization as valid. Legitimate
/// round-off sits around `n·eps ≈ 1e-14` relative; the failure mode being
/// screened out produces order-one defects.
const FACTOR_CHECK_TOL: f64 = 1e-12;

/// Thin singular value decomposition `m = u·diag(σ)·v_t` with verified
/// factors: `u` has orthonormal columns, `v_t` orthonormal rows, and the
/// singular values are sorted descending.
pub(crate) struct SvdParts {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v_t: CMat,
}

impl SvdParts {
    pub fn smax(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

/// SVD with the same trust policy as [`eigh`]: nalgebra first, verify the
/// result actually factors the input, fall back to one-sided Jacobi when it
/// does not.
pub(crate) fn svd_checked(m: &CMat) -> Result<SvdParts> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(SvdParts {
            u: CMat::zeros(rows, 0),
            singular_values: Vec::new(),
            v_t: CMat::zeros(0, cols),
        });
    }
    if let Some(svd) = SVD::try_new(m.clone(), true, true, f64::EPSILON, 10_000) {
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        let parts = SvdParts {
            u: CMat::from_fn(rows, k, |r, c| u[(r, order[c])]),
            singular_values: order.iter().map(|&i| svd.singular_values[i]).collect(),
            v_t: CMat::from_fn(k, cols, |r, c| v_t[(order[r], c)]),
        };
        if svd_factors_ok(m, &parts) {
            return Ok(parts);
        }
    }
    let parts = jacobi_svd(m)?;
    if !svd_factors_ok(m, &parts) {
        return Err(Error::EigenFailure);
    }
    Ok(parts)
}

fn svd_factors_ok(m: &CMat, parts: &SvdParts) -> bool {
    let k = parts.singular_values.len();
    let slack = FACTOR_CHECK_TOL * (k as f64).sqrt().max(1.0);
    let eye = CMat::identity(k, k);
    let gram_u = parts.u.adjoint() * &parts.u;
    let gram_v = &parts.v_t * parts.v_t.adjoint();
    if hs_distance(&gram_u, &eye) > slack || hs_distance(&gram_v, &eye) > slack {
        return false;
    }
    let sigma = CMat::from_diagonal(&CVec::from_iterator(
        k,
        parts.singular_values.iter().map(|&s| Complex::new(s, 0.0)),
    ));
    let recon = &parts.u * sigma * &parts.v_t;
    hs_distance(&recon, m) <= FACTOR_CHECK_TOL * hs_norm(m)
}

/// One-sided Jacobi SVD: unitary rotations orthogonalize the columns in
/// place, so the factorization is exact by construction up to round-off.
fn jacobi_svd(m: &CMat) -> Result<SvdParts> {
    let (rows, cols) = m.shape();
    if rows < cols {
        let parts = jacobi_svd(&m.adjoint())?;
        return Ok(SvdParts {
            u: parts.v_t.adjoint(),
            singular_values: parts.singular_values,
            v_t: parts.u.adjoint(),
        });
    }
    let mut a = m.clone();
    let mut v = CMat::identity(cols, cols);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..cols {
            for j in (i + 1)..cols {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex::new(0.0, 0.0);
                for k in 0..rows {
                    alpha += a[(k, i)].norm_sqr();
                    beta += a[(k, j)].norm_sqr();
                    gamma += a[(k, i)].conj() * a[(k, j)];
                }
                let g = gamma.norm();
                if g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let phc = phase.conj();
                let (c, s) = jacobi_rotation(alpha, beta, g);
                for k in 0..rows {
                    let ai = a[(k, i)];
                    let aj = a[(k, j)];
                    a[(k, i)] = ai * c - aj * phc * s;
                    a[(k, j)] = ai * s + aj * phc * c;
                }
                for k in 0..cols {
                    let vi = v[(k, i)];
                    let vj = v[(k, j)];
                    v[(k, i)] = vi * c - vj * phc * s;
                    v[(k, j)] = vi * s + vj * phc * c;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::EigenFailure);
    }
    let norms: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = CMat::zeros(rows, cols);
    let mut filled = 0;
    for (c, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            let col = a.column(src).into_owned().scale(1.0 / norms[src]);
            u.set_column(c, &col);
            filled = c + 1;
        }
    }
    complete_orthonormal(&mut u, filled);
    let singular_values: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let v_t = CMat::from_fn(cols, cols, |r, c| v[(c, order[r])].conj());
    Ok(SvdParts {
        u,
        singular_values,
        v_t,
    })
}

/// Fill columns `filled..` with an orthonormal completion of the leading
/// columns, drawn from standard basis vectors. Some standard vector always
/// clears the acceptance threshold while slots remain, because the squared
/// residuals of all of them sum to at least one.
fn complete_orthonormal(u: &mut CMat, filled: usize) {
    let (rows, cols) = u.shape();
    let mut have = filled;
    for t in 0..rows {
        if have == cols {
            break;
        }
        let mut cand = CVec::zeros(rows);
        cand[t] = Complex::new(1.0, 0.0);
        for _ in 0..2 {
            for c in 0..have {
                let overlap = u.column(c).dotc(&cand);
                cand -= u.column(c).into_owned() * overlap;
            }
        }
        let norm = cand.norm();
        if norm > 1e-3 {
            u.set_column(have, &cand.scale(1.0 / norm));
            have += 1;
        }
    }
    assert_eq!(have, cols, "orthonormal completion ran out of directions");
}

/// Column-major flattening of a matrix into a vector; the Hilbert–Schmidt
/// inner product becomes the standard inner product of these vectors.
pub(crate) fn vectorize(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub(crate) fn unvectorize(rows: usize, cols: usize, v: &CVec) -> CMat {
    CMat::from_column_slice(rows, cols, v.as_slice())
}

/// Membership verdict: `residual = ‖x − proj_S(x)‖`, contained iff
/// `residual ≤ residual_tol·max(1, ‖x‖)`.
#[derive(Clone, Copy, Debug)]
pub struct Membership {
    pub contained: bool,
    pub residual: f64,
}

/// A linear subspace of `rows×cols` complex matrices, stored as an
/// orthonormal basis under the Hilbert–Schmidt inner product.
#[derive(Clone, Debug)]
pub struct OperatorSpace {
    rows: usize,
    cols: usize,
    basis: Vec<CMat>,
    tol: Tolerance,
}

impl OperatorSpace {
    /// Orthonormal span of the given matrices. Dimension is the numerical
    /// rank of the stacked coefficient system at `rank_tol`; the singular
    /// directions above the cutoff become the basis.
    pub fn span(vectors: &[CMat], tol: Tolerance) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::shape("at least one vector", "empty list"));
        }
        let (rows, cols) = check_same_shape(vectors)?;
        Self::span_with_shape(rows, cols, vectors, tol)
    }

    /// Like [`OperatorSpace::span`], with the shape given explicitly so the
    /// empty list yields the zero space.
    pub fn span_with_shape(
        rows: usize,
        cols: usize,
        vectors: &[CMat],
        tol: Tolerance,
    ) -> Result<Self> {
        for v in vectors {
            if v.shape() != (rows, cols) {
                return Err(Error::shape(format!("{rows}x{cols}"), shape_string(v)));
            }
        }
        let len = rows * cols;
        if vectors.is_empty() || len == 0 {
            return Ok(Self::zero(rows, cols, tol));
        }
        let stacked = CMat::from_fn(len, vectors.len(), |l, j| vectors[j][(l % rows, l / rows)]);
        let svd = svd_checked(&stacked)?;
        let smax = svd.smax();
        if smax == 0.0 {
            return Ok(Self::zero(rows, cols, tol));
        }
        let cutoff = tol.rank_tol * smax;
        let basis = (0..svd.singular_values.len())
            .take_while(|&i| svd.singular_values[i] > cutoff)
            .map(|i| unvectorize(rows, cols, &CVec::from(svd.u.column(i))))
            .collect();
        Ok(OperatorSpace {
            rows,
            cols,
            basis,
            tol,
        })
    }

    pub fn zero(rows: usize, cols: usize, tol: Tolerance) -> Self {
        OperatorSpace {
            rows,
            cols,
            basis: Vec::new(),
            tol,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn tol(&self) -> Tolerance {
        self.tol
    }

    fn check_shape(&self, x: &CMat) -> Result<()> {
        if x.shape() != (self.rows, self.cols) {
            return Err(Error::shape(
                format!("{}x{}", self.rows, self.cols),
                shape_string(x),
            ));
        }
        Ok(())
    }

    /// Hilbert–Schmidt coordinates `⟨b_i, x⟩` of `x` against the basis.
    pub fn coords(&self, x: &CMat) -> Result<CVec> {
        self.check_shape(x)?;
        Ok(CVec::from_iterator(
            self.dim(),
            self.basis.iter().map(|b| hs_inner(b, x)),
        ))
    }

    pub fn from_coords(&self, c: &CVec) -> CMat {
        assert_eq!(c.len(), self.dim(), "coordinate length mismatch");
        let mut out = CMat::zeros(self.rows, self.cols);
        for (b, w) in self.basis.iter().zip(c.iter()) {
            out += b.scale(1.0) * *w;
        }
        out
    }

    /// Orthogonal projection of `x` onto the span.
    pub fn project(&self, x: &CMat) -> Result<CMat> {
        let c = self.coords(x)?;
        Ok(self.from_coords(&c))
    }

    pub fn membership(&self, x: &CMat) -> Result<Membership> {
        let p = self.project(x)?;
        let residual = hs_distance(x, &p);
        Ok(Membership {
            contained: residual <= self.tol.residual_for(hs_norm(x)),
            residual,
        })
    }

    pub fn contains(&self, x: &CMat) -> Result<bool> {
        Ok(self.membership(x)?.contained)
    }

    /// Largest membership residual over a family; `None` for an empty family.
    pub fn worst_residual<'a>(
        &self,
        xs: impl IntoIterator<Item = &'a CMat>,
    ) -> Result<Option<f64>> {
        let mut worst: Option<f64> = None;
        for x in xs {
            let m = self.membership(x)?;
            worst = Some(worst.map_or(m.residual, |w: f64| w.max(m.residual)));
        }
        Ok(worst)
    }

    /// Span of this space together with extra vectors.
    pub fn extended(&self, extra: &[CMat]) -> Result<Self> {
        let mut all = self.basis.clone();
        all.extend_from_slice(extra);
        Self::span_with_shape(self.rows, self.cols, &all, self.tol)
    }

    /// Equal as subspaces: same shape and dimension, mutual membership of
    /// bases.
    pub fn same_space_as(&self, other: &OperatorSpace) -> Result<bool> {
        if self.rows != other.rows || self.cols != other.cols || self.dim() != other.dim() {
            return Ok(false);
        }
        for b in &self.basis {
            if !other.contains(b)? {
                return Ok(false);
            }
        }
        for b in &other.basis {
            if !self.contains(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Map every basis element, returning the images (not re-spanned).
    pub fn map_basis(&self, f: impl Fn(&CMat) -> CMat) -> Vec<CMat> {
        self.basis.iter().map(f).collect()
    }
}

/// Spectral calculus: apply `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_function(h: &CMat, f: impl Fn(f64) -> f64, tol: Tolerance) -> Result<CMat> {
    let defect = hermiticity_defect(h);
    let bound = tol.residual_for(hs_norm(h));
    if defect > bound {
        return Err(Error::NotHermitian {
            defect,
            tol: bound,
        });
    }
    let (values, vectors) = eigh(h)?;
    let mapped = CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values.iter().map(|&t| Complex::new(f(t), 0.0)),
    ));
    Ok(&vectors * mapped * vectors.adjoint())
}

/// Spectral projection onto the part of the spectrum above
/// `rank_tol·max|λ|`; the support projection for PSD input.
pub fn support_projection(h: &CMat, tol: Tolerance) -> Result<CMat> {
    let (values, vectors) = eigh(h)?;
    let lmax = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let cutoff = tol.rank_tol * lmax;
    let mapped = CMat::from_diagonal(&CVec::from_iterator(
        values.len(),
        values
            .iter()
            .map(|&t| Complex::new(if t > cutoff { 1.0 } else { 0.0 }, 0.0)),
    ));
    Ok(&vectors * mapped * vectors.adjoint())
}

/// Polar decomposition `x = u·abs` with `abs = (x*x)^{1/2}` and `u` the
/// partial isometry with `u*u =` support projection of `abs`.
#[derive(Clone, Debug)]
pub struct Polar {
    pub u: CMat,
    pub abs: CMat,
}

pub fn polar(x: &CMat, tol: Tolerance) -> Result<Polar> {
    // Work on x directly: squaring into x*x would turn eigenvalue noise
    // into spurious singular values of order sqrt(eps) that pass the rank
    // cutoff and get amplified by the inversion.
    let svd = svd_checked(x)?;
    let cutoff = tol.rank_tol * svd.smax();
    let k = svd.singular_values.len();
    let kept = CMat::from_diagonal(&CVec::from_iterator(
        k,
        svd.singular_values
            .iter()
            .map(|&s| Complex::new(if s > cutoff { 1.0 } else { 0.0 }, 0.0)),
    ));
    let abs_diag = CMat::from_diagonal(&CVec::from_iterator(
        k,
        svd.singular_values
            .iter()
            .map(|&s| Complex::new(if s > cutoff { s } else { 0.0 }, 0.0)),
    ));
    let abs = svd.v_t.adjoint() * abs_diag * &svd.v_t;
    let u = &svd.u * kept * &svd.v_t;
    Ok(Polar { u, abs })
}

/// PSD test: minimum eigenvalue ≥ −rank_tol·max(1, max|λ|).
pub fn psd_check(h: &CMat, tol: Tolerance) -> Result<bool> {
    let defect = hermiticity_defect(h);
    let bound = tol.residual_for(hs_norm(h));
    if defect > bound {
        return Err(Error::NotHermitian {
            defect,
            tol: bound,
        });
    }
    let (values, _) = eigh(h)?;
    let lmax = values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let min = values.first().copied().unwrap_or(0.0);
    Ok(min >= -tol.rank_tol * lmax.max(1.0))
}

/// Orthonormal basis of the (right) null space of `a` at `rank_tol`.
/// Works on the rectangular matrix directly so that singular values keep
/// full precision; wide inputs are padded with zero rows first. The cutoff
/// is `rank_tol·max(σmax, 1)`: callers build these systems from
/// orthonormal families, so unit scale is the natural reference and an
/// all-noise system counts as zero.
pub fn null_space(a: &CMat, tol: Tolerance) -> Result<Vec<CVec>> {
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(Vec::new());
    }
    let work = if m < n {
        let mut padded = CMat::zeros(n, n);
        padded.view_mut((0, 0), (m, n)).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = svd_checked(&work)?;
    let cutoff = tol.rank_tol * svd.smax().max(1.0);
    Ok((0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= cutoff)
        .map(|i| CVec::from(svd.v_t.row(i).adjoint()))
        .collect())
}

/// Least-squares solve `a·x ≈ rhs` through the pseudo-inverse at `rank_tol`.
pub fn lstsq(a: &CMat, rhs: &CMat, tol: Tolerance) -> Result<CMat> {
    if a.nrows() != rhs.nrows() {
        return Err(Error::shape(
            format!("{} rows", a.nrows()),
            format!("{} rows", rhs.nrows()),
        ));
    }
    let svd = svd_checked(a)?;
    let cutoff = tol.rank_tol * svd.smax();
    let k = svd.singular_values.len();
    let inv = CMat::from_fn(k, k, |i, j| {
        if i == j && svd.singular_values[i] > cutoff {
            Complex::new(1.0 / svd.singular_values[i], 0.0)
        } else {
            Complex::new(0.0, 0.0)
        }
    });
    Ok(svd.v_t.adjoint() * inv * (svd.u.adjoint() * rhs))
}

/// `a ⊗ 1_r` with the ampliation slot as the fast index.
pub fn ampliate(a: &CMat, r: usize) -> CMat {
    a.kronecker(&CMat::identity(r, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn unit(rows: usize, cols: usize, r: usize, s: usize) -> CMat {
        let mut m = CMat::zeros(rows, cols);
        m[(r, s)] = c(1.0, 0.0);
        m
    }

    fn random_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMat {
        CMat::from_fn(rows, cols, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn span_collapses_duplicates() {
        let tol = Tolerance::default();
        let s = OperatorSpace::span(&[unit(2, 2, 0, 0), unit(2, 2, 0, 0)], tol).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn span_keeps_independent_units() {
        let tol = Tolerance::default();
        let e11 = unit(2, 2, 0, 0);
        let e12 = unit(2, 2, 0, 1);
        let s = OperatorSpace::span(&[e11.clone(), e12.clone()], tol).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.contains(&e11).unwrap());
        assert!(s.contains(&e12).unwrap());
        for (i, a) in s.basis().iter().enumerate() {
            for (j, b) in s.basis().iter().enumerate() {
                let g = hs_inner(a, b);
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn span_rank_matches_independent_oracle() {
        // 20 random 3×2 matrices drawn from a fixed rank-4 subspace. The
        // oracle ranks the 20×4 coefficient matrix that generated them,
        // independently of the span construction under test.
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dirs: Vec<CMat> = (0..4).map(|_| random_mat(3, 2, &mut rng)).collect();
        let coeffs = CMat::from_fn(20, 4, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let vectors: Vec<CMat> = (0..20)
            .map(|i| {
                let mut v = CMat::zeros(3, 2);
                for j in 0..4 {
                    v += dirs[j].scale(1.0) * coeffs[(i, j)];
                }
                v
            })
            .collect();
        let oracle = {
            let svd = SVD::new(coeffs.clone(), false, false);
            let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
            svd.singular_values
                .iter()
                .filter(|&&s| s > tol.rank_tol * smax)
                .count()
        };
        assert_eq!(oracle, 4);
        let s = OperatorSpace::span(&vectors, tol).unwrap();
        assert_eq!(s.dim(), oracle);
        for v in &vectors {
            let m = s.membership(v).unwrap();
            assert!(m.contained, "residual {}", m.residual);
        }
    }

    #[test]
    fn membership_exact_and_orthogonal() {
        let tol = Tolerance::default();
        let s = OperatorSpace::span(&[unit(2, 2, 0, 0)], tol).unwrap();
        let m = s.membership(&unit(2, 2, 0, 0)).unwrap();
        assert!(m.contained);
        assert!(m.residual < 1e-14);
        let m = s.membership(&unit(2, 2, 0, 1)).unwrap();
        assert!(!m.contained);
        assert!((m.residual - 1.0).abs() < 1e-14);
    }

    #[test]
    fn membership_residual_matches_construction() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b0 = random_mat(3, 3, &mut rng);
        let s = OperatorSpace::span(&[b0], tol).unwrap();
        // Orthogonal direction, normalized, scaled to 1e-3.
        let raw = random_mat(3, 3, &mut rng);
        let ortho = &raw - s.project(&raw).unwrap();
        let ortho = ortho.scale(1e-3 / hs_norm(&ortho));
        let x = s.basis()[0].scale(0.7) + ortho;
        let m = s.membership(&x).unwrap();
        assert!(!m.contained);
        assert!((m.residual - 1e-3).abs() < 1e-12);
    }

    #[test]
    fn hermitian_function_examples() {
        let tol = Tolerance::default();
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]));
        let p = hermitian_function(&h, |t| if t > 0.0 { 1.0 } else { 0.0 }, tol).unwrap();
        let expected = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(hs_distance(&p, &expected) < 1e-12);

        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(4.0, 0.0), c(1.0, 0.0)]));
        let r = hermitian_function(&h, f64::sqrt, tol).unwrap();
        let expected = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        assert!(hs_distance(&r, &expected) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_mat(4, 4, &mut rng);
        let h = (&g + g.adjoint()).scale(0.5);
        let sq = hermitian_function(&h, |t| t * t, tol).unwrap();
        assert!(hs_distance(&sq, &(&h * &h)) < 1e-10);
    }

    #[test]
    fn hermitian_function_rejects_nonhermitian() {
        let tol = Tolerance::default();
        let h = unit(2, 2, 0, 1);
        assert!(matches!(
            hermitian_function(&h, |t| t, tol),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn polar_examples() {
        let tol = Tolerance::default();
        let x = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]));
        let p = polar(&x, tol).unwrap();
        let u_expected = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]));
        assert!(hs_distance(&p.u, &u_expected) < 1e-12);
        assert!(hs_distance(&p.abs, &x) < 1e-12);

        let z = CMat::zeros(2, 3);
        let p = polar(&z, tol).unwrap();
        assert!(hs_norm(&p.u) < 1e-14);
        assert!(hs_norm(&p.abs) < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_mat(3, 2, &mut rng);
        let p = polar(&x, tol).unwrap();
        assert!(hs_distance(&(&p.u * &p.abs), &x) < 1e-10);
        // u*u equals the support projection of abs.
        let supp = support_projection(&p.abs, tol).unwrap();
        assert!(hs_distance(&(p.u.adjoint() * &p.u), &supp) < 1e-10);
    }

    #[test]
    fn psd_examples() {
        let tol = Tolerance::default();
        assert!(psd_check(&CMat::identity(3, 3), tol).unwrap());
        let h = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
        assert!(!psd_check(&h, tol).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let g = random_mat(4, 4, &mut rng);
            assert!(psd_check(&(g.adjoint() * &g), tol).unwrap());
        }
        // Spectral synthesis: one eigenvalue at −10·rank_tol must fail.
        let g = random_mat(3, 3, &mut rng);
        let (_, w) = eigh(&(&g + g.adjoint())).unwrap();
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(-10.0 * tol.rank_tol, 0.0),
        ]));
        let h = &w * d * w.adjoint();
        assert!(!psd_check(&h, tol).unwrap());
    }

    #[test]
    fn null_space_of_rank_deficient() {
        let tol = Tolerance::default();
        let mut a = CMat::zeros(3, 3);
        a[(0, 0)] = c(1.0, 0.0);
        a[(1, 1)] = c(1.0, 0.0);
        let ns = null_space(&a, tol).unwrap();
        assert_eq!(ns.len(), 1);
        assert!((ns[0][2].norm() - 1.0).abs() < 1e-12);
    }

    fn assert_valid_svd(m: &CMat, parts: &SvdParts) {
        assert!(svd_factors_ok(m, parts));
        for w in parts.singular_values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn jacobi_svd_factors_all_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (rows, cols) in [(5, 3), (3, 5), (4, 4), (1, 6)] {
            let m = random_mat(rows, cols, &mut rng);
            let parts = jacobi_svd(&m).unwrap();
            assert_valid_svd(&m, &parts);
        }
    }

    #[test]
    fn jacobi_svd_handles_rank_deficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = random_mat(5, 2, &mut rng);
        let b = random_mat(2, 4, &mut rng);
        let m = &a * &b;
        let parts = jacobi_svd(&m).unwrap();
        assert_valid_svd(&m, &parts);
        assert!(parts.singular_values[1] > 1e-8);
        assert!(parts.singular_values[2] < 1e-12);

        let z = CMat::zeros(3, 4);
        let parts = jacobi_svd(&z).unwrap();
        assert_valid_svd(&z, &parts);
        assert!(parts.singular_values.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn jacobi_eigh_matches_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let g = random_mat(6, 6, &mut rng);
        let h = (&g + g.adjoint()).scale(0.5);
        let (values, vectors) = jacobi_eigh(&h).unwrap();
        assert!(eigen_factors_ok(&h, &values, &vectors));
        for w in values.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn jacobi_eigh_resolves_degenerate_spectra() {
        // Eigenvalues (1, 1, 1, 4) hidden behind a random basis change; the
        // projector onto the triple eigenvalue must come back exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_mat(4, 4, &mut rng);
        let (_, w) = eigh(&(&g + g.adjoint())).unwrap();
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(4.0, 0.0),
        ]));
        let h = &w * d * w.adjoint();
        let (values, vectors) = jacobi_eigh(&h).unwrap();
        assert!(eigen_factors_ok(&h, &values, &vectors));
        for v in &values[..3] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((values[3] - 4.0).abs() < 1e-12);
        let mut proj = CMat::zeros(4, 4);
        for k in 0..3 {
            let col = vectors.column(k);
            proj += CMat::from_fn(4, 4, |r, s| col[r] * col[s].conj());
        }
        let top = w.column(3);
        let expected = CMat::identity(4, 4) - CMat::from_fn(4, 4, |r, s| top[r] * top[s].conj());
        assert!(hs_distance(&proj, &expected) < 1e-10);
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let tol = Tolerance::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_mat(6, 3, &mut rng);
        let x = random_mat(3, 2, &mut rng);
        let rhs = &a * &x;
        let sol = lstsq(&a, &rhs, tol).unwrap();
        assert!(hs_distance(&sol, &x) < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn polar_round_trip(rows in 1usize..=6, cols in 1usize..=6, seed in 0u64..1000) {
            let tol = Tolerance::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_mat(rows, cols, &mut rng);
            let p = polar(&x, tol).unwrap();
            let err = hs_distance(&(&p.u * &p.abs), &x);
            prop_assert!(err <= tol.residual_for(hs_norm(&x)));
            // Partial isometry property.
            let utu = p.u.adjoint() * &p.u;
            let err = hs_distance(&(&utu * &utu), &utu);
            prop_assert!(err <= 1e-8);
        }

        #[test]
        fn hermitian_identity_function_is_identity(n in 1usize..=6, seed in 0u64..1000) {
            let tol = Tolerance::default();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_mat(n, n, &mut rng);
            let h = (&g + g.adjoint()).scale(0.5);
            let r = hermitian_function(&h, |t| t, tol).unwrap();
            prop_assert!(hs_distance(&r, &h) <= tol.residual_for(hs_norm(&h)));
        }
    }
}
