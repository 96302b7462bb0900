//! Finite-dimensional von Neumann algebras as concrete operator spans.
//!
//! An algebra is a *-closed, product-closed subspace of d×d complex
//! matrices together with its unit, which is a projection but not
//! necessarily the ambient identity. The decomposition into full matrix
//! factors with multiplicities drives everything structural downstream:
//! canonical traces, multiplicity counts of representations, blockwise
//! positivity tests.

use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numlin::{
    eigh, hermiticity_defect, hs_distance, hs_inner, hs_norm, lstsq, null_space, shape_string,
    support_projection, vectorize, CMat, CVec, Complex, OperatorSpace, Tolerance,
};

const RETRY_BUDGET: usize = 8;
const CENTER_SEED: u64 = 0x5eed_0001;
const UNITS_SEED: u64 = 0x5eed_0002;

/// One full matrix factor: the compression of the algebra by `central` is
/// isomorphic to `block_dim×block_dim` matrices, each entry repeated
/// `multiplicity` times on the underlying space.
#[derive(Clone, Debug)]
pub struct WedderburnBlock {
    pub block_dim: usize,
    pub multiplicity: usize,
    /// The minimal central projection carrying the block.
    pub central: CMat,
    /// `matrix_units[i][j]` is the (i,j) unit as an ambient matrix.
    pub matrix_units: Vec<Vec<CMat>>,
}

impl WedderburnBlock {
    pub fn unit(&self, i: usize, j: usize) -> &CMat {
        &self.matrix_units[i][j]
    }
}

/// A von Neumann algebra inside the d×d complex matrices.
#[derive(Clone, Debug)]
pub struct VnAlgebra {
    space: OperatorSpace,
    unit: CMat,
    center: OnceLock<Result<Vec<CMat>>>,
    blocks: OnceLock<Result<Vec<WedderburnBlock>>>,
}

impl VnAlgebra {
    /// Smallest *-closed, product-closed span containing the generators.
    /// The unit is the support projection of `Σ b_i b_i*` over the closure's
    /// orthonormal basis. An empty generator list yields the zero algebra.
    pub fn closure(generators: &[CMat], tol: Tolerance) -> Result<VnAlgebra> {
        if generators.is_empty() {
            return Ok(VnAlgebra::zero_algebra(0, tol));
        }
        let d = generators[0].nrows();
        for g in generators {
            if g.shape() != (d, d) {
                return Err(Error::shape(format!("{d}x{d}"), shape_string(g)));
            }
        }
        let mut seed: Vec<CMat> = generators.to_vec();
        seed.extend(generators.iter().map(CMat::adjoint));
        let mut space = OperatorSpace::span_with_shape(d, d, &seed, tol)?;
        for _ in 0..=d * d + 1 {
            let mut extra: Vec<CMat> = space.map_basis(CMat::adjoint);
            for a in space.basis() {
                for b in space.basis() {
                    extra.push(a * b);
                }
            }
            let bigger = space.extended(&extra)?;
            let stable = bigger.dim() == space.dim();
            space = bigger;
            if stable {
                return VnAlgebra::from_space(space)
                    .map_err(|e| Error::inconsistency(format!("closure validation: {e}"), 0.0));
            }
        }
        Err(Error::inconsistency("closure iteration did not stabilize", 0.0))
    }

    /// Wrap an already *-closed, product-closed family, validating the
    /// closure properties and computing the unit.
    pub fn from_closed_span(vectors: &[CMat], tol: Tolerance) -> Result<VnAlgebra> {
        if vectors.is_empty() {
            return Ok(VnAlgebra::zero_algebra(0, tol));
        }
        let d = vectors[0].nrows();
        if vectors[0].ncols() != d {
            return Err(Error::shape("square", shape_string(&vectors[0])));
        }
        let space = OperatorSpace::span_with_shape(d, d, vectors, tol)?;
        VnAlgebra::from_space(space)
    }

    fn from_space(space: OperatorSpace) -> Result<VnAlgebra> {
        let tol = space.tol();
        let d = space.rows();
        let unit = if space.dim() == 0 {
            CMat::zeros(d, d)
        } else {
            let mut s = CMat::zeros(d, d);
            for b in space.basis() {
                s += b * b.adjoint();
            }
            support_projection(&s, tol)?
        };
        validate_closed(&space, &unit)?;
        Ok(VnAlgebra {
            space,
            unit,
            center: OnceLock::new(),
            blocks: OnceLock::new(),
        })
    }

    pub fn zero_algebra(ambient_dim: usize, tol: Tolerance) -> VnAlgebra {
        VnAlgebra {
            space: OperatorSpace::zero(ambient_dim, ambient_dim, tol),
            unit: CMat::zeros(ambient_dim, ambient_dim),
            center: OnceLock::new(),
            blocks: OnceLock::new(),
        }
    }

    /// All of M_d.
    pub fn full(ambient_dim: usize, tol: Tolerance) -> Result<VnAlgebra> {
        let d = ambient_dim;
        let mut units = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut m = CMat::zeros(d, d);
                m[(i, j)] = Complex::new(1.0, 0.0);
                units.push(m);
            }
        }
        VnAlgebra::from_closed_span(&units, tol)
    }

    pub fn ambient_dim(&self) -> usize {
        self.space.rows()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    pub fn space(&self) -> &OperatorSpace {
        &self.space
    }

    pub fn basis(&self) -> &[CMat] {
        self.space.basis()
    }

    pub fn unit(&self) -> &CMat {
        &self.unit
    }

    pub fn tol(&self) -> Tolerance {
        self.space.tol()
    }

    pub fn ambient_identity(&self) -> CMat {
        CMat::identity(self.ambient_dim(), self.ambient_dim())
    }

    /// Whether the algebra's unit is the ambient identity.
    pub fn is_unital_in_ambient(&self) -> bool {
        let d = self.ambient_dim();
        hs_distance(&self.unit, &CMat::identity(d, d)) <= self.tol().residual_for((d as f64).sqrt())
    }

    pub fn contains(&self, x: &CMat) -> Result<bool> {
        self.space.contains(x)
    }

    pub fn project(&self, x: &CMat) -> Result<CMat> {
        self.space.project(x)
    }

    pub fn same_algebra_as(&self, other: &VnAlgebra) -> Result<bool> {
        self.space.same_space_as(&other.space)
    }

    /// Relative commutant inside the full ambient matrix algebra:
    /// `{x : xb = bx for all b}`, with the ambient identity as unit.
    pub fn commutant(&self) -> Result<VnAlgebra> {
        let d = self.ambient_dim();
        if self.dim() == 0 {
            return VnAlgebra::full(d, self.tol());
        }
        let id = CMat::identity(d, d);
        let n = self.dim();
        let mut system = CMat::zeros(n * d * d, d * d);
        for (row, b) in self.basis().iter().enumerate() {
            let block = b.transpose().kronecker(&id) - id.kronecker(b);
            system.view_mut((row * d * d, 0), (d * d, d * d)).copy_from(&block);
        }
        let null = null_space(&system, self.tol())?;
        let mats: Vec<CMat> = null
            .iter()
            .map(|v| crate::numlin::unvectorize(d, d, v))
            .collect();
        let space = OperatorSpace::span_with_shape(d, d, &mats, self.tol())?;
        validate_closed(&space, &id)
            .map_err(|e| Error::inconsistency(format!("commutant closure: {e}"), 0.0))?;
        Ok(VnAlgebra {
            space,
            unit: id,
            center: OnceLock::new(),
            blocks: OnceLock::new(),
        })
    }

    /// The center as an operator space: elements of the algebra commuting
    /// with every basis element.
    pub fn center_space(&self) -> Result<OperatorSpace> {
        let d = self.ambient_dim();
        let n = self.dim();
        if n == 0 {
            return Ok(OperatorSpace::zero(d, d, self.tol()));
        }
        let id = CMat::identity(d, d);
        let stacked = {
            let mut s = CMat::zeros(d * d, n);
            for (j, b) in self.basis().iter().enumerate() {
                s.set_column(j, &vectorize(b));
            }
            s
        };
        let mut system = CMat::zeros(n * d * d, n);
        for (row, b) in self.basis().iter().enumerate() {
            let block = (b.transpose().kronecker(&id) - id.kronecker(b)) * &stacked;
            system.view_mut((row * d * d, 0), (d * d, n)).copy_from(&block);
        }
        let null = null_space(&system, self.tol())?;
        let mats: Vec<CMat> = null.iter().map(|c| self.space.from_coords(c)).collect();
        OperatorSpace::span_with_shape(d, d, &mats, self.tol())
    }

    /// Minimal projections of the center. They are pairwise orthogonal and
    /// sum to the unit; the list is empty exactly for the zero algebra.
    pub fn center_minimal_projections(&self) -> Result<Vec<CMat>> {
        self.center
            .get_or_init(|| self.compute_center_projections())
            .clone()
    }

    fn compute_center_projections(&self) -> Result<Vec<CMat>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let tol = self.tol();
        let z = self.center_space()?;
        let k = z.dim();
        if k == 0 {
            return Err(Error::inconsistency("center does not contain the unit", 0.0));
        }
        if k == 1 {
            return Ok(vec![self.unit.clone()]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(CENTER_SEED);
        'attempt: for _ in 0..RETRY_BUDGET {
            let h = random_hermitian_in(z.basis(), &mut rng);
            let (vals, vecs) = eigh(&h)?;
            let clusters = split_by_gap(&vals, 1e-4);
            let mut found = Vec::with_capacity(k);
            for cluster in &clusters {
                let proj = spectral_indicator(&vals, &vecs, cluster);
                // The kernel of a non-unital algebra shows up as a cluster
                // whose projection lies outside the algebra; skip it.
                if !self.space.contains(&proj)? {
                    continue;
                }
                if hs_distance(&(&proj * &proj), &proj) > tol.residual_for(hs_norm(&proj))
                    || hermiticity_defect(&proj) > tol.residual_for(hs_norm(&proj))
                {
                    continue 'attempt;
                }
                // Minimality: the compressed center is one-dimensional.
                let compressed: Vec<CMat> = z.basis().iter().map(|c| &proj * c).collect();
                let sub = OperatorSpace::span_with_shape(
                    proj.nrows(),
                    proj.ncols(),
                    &compressed,
                    tol,
                )?;
                if sub.dim() != 1 {
                    continue 'attempt;
                }
                found.push(proj);
            }
            if found.len() != k {
                continue 'attempt;
            }
            let mut sum = CMat::zeros(self.ambient_dim(), self.ambient_dim());
            for p in &found {
                sum += p;
            }
            if hs_distance(&sum, &self.unit) > tol.residual_for(hs_norm(&self.unit)) {
                continue 'attempt;
            }
            return Ok(found);
        }
        Err(Error::RetryBudgetExhausted {
            attempts: RETRY_BUDGET,
            context: "center minimal projections".into(),
        })
    }

    /// Full matrix-unit data for every central block.
    pub fn blocks(&self) -> Result<Vec<WedderburnBlock>> {
        self.blocks.get_or_init(|| self.compute_blocks()).clone()
    }

    fn compute_blocks(&self) -> Result<Vec<WedderburnBlock>> {
        if self.dim() == 0 {
            return Ok(Vec::new());
        }
        let centrals = self.center_minimal_projections()?;
        let mut rng = ChaCha8Rng::seed_from_u64(UNITS_SEED);
        centrals
            .iter()
            .map(|z| self.block_for(z, &mut rng))
            .collect()
    }

    fn block_for(&self, z: &CMat, rng: &mut ChaCha8Rng) -> Result<WedderburnBlock> {
        let tol = self.tol();
        let trace = z.trace().re;
        let r = trace.round() as usize;
        if r == 0 || (trace - r as f64).abs() > 1e-6 {
            return Err(Error::inconsistency(
                "central projection rank",
                (trace - r as f64).abs(),
            ));
        }
        // Isometry onto the range of z; compression by z becomes unital.
        let (vals, vecs) = eigh(z)?;
        let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
        if cols.len() != r {
            return Err(Error::inconsistency("central projection spectrum", 0.0));
        }
        let y = CMat::from_fn(z.nrows(), r, |row, c| vecs[(row, cols[c])]);
        let compressed: Vec<CMat> = self.basis().iter().map(|b| y.adjoint() * b * &y).collect();
        let span = OperatorSpace::span_with_shape(r, r, &compressed, tol)?;
        let n = (span.dim() as f64).sqrt().round() as usize;
        if n * n != span.dim() || r % n != 0 {
            return Err(Error::inconsistency(
                "block dimension reconciliation",
                span.dim() as f64,
            ));
        }
        let m = r / n;
        let units_compressed = if n == 1 {
            vec![vec![CMat::identity(r, r)]]
        } else {
            matrix_units_in(&span, n, m, rng)?
        };
        let matrix_units: Vec<Vec<CMat>> = units_compressed
            .iter()
            .map(|row| row.iter().map(|e| &y * e * y.adjoint()).collect())
            .collect();
        for row in &matrix_units {
            for e in row {
                let mem = self.space.membership(e)?;
                if !mem.contained {
                    return Err(Error::inconsistency("matrix unit membership", mem.residual));
                }
            }
        }
        Ok(WedderburnBlock {
            block_dim: n,
            multiplicity: m,
            central: z.clone(),
            matrix_units,
        })
    }

    /// The tracial state weighting each block by its matrix dimension:
    /// on a single full matrix algebra it is the normalized trace, and it is
    /// invariant under every automorphism.
    pub fn canonical_trace(&self) -> Result<State> {
        let blocks = self.blocks()?;
        if blocks.is_empty() {
            return Err(Error::AlgebraMismatch(
                "the zero algebra admits no state".into(),
            ));
        }
        let weight_total: f64 = blocks.iter().map(|b| (b.block_dim * b.block_dim) as f64).sum();
        let d = self.ambient_dim();
        let mut density = CMat::zeros(d, d);
        for b in &blocks {
            let w = b.block_dim as f64 / (weight_total * b.multiplicity as f64);
            density += b.central.scale(w);
        }
        State::from_density(self.clone(), &density)
    }
}

fn validate_closed(space: &OperatorSpace, unit: &CMat) -> Result<()> {
    let tol = space.tol();
    let n = space.dim();
    if n == 0 {
        return Ok(());
    }
    for b in space.basis() {
        let m = space.membership(&b.adjoint())?;
        if !m.contained {
            return Err(Error::NotClosed {
                operation: "adjoint",
                residual: m.residual,
            });
        }
    }
    // Product closure: all pairs up to 64 basis elements, a seeded sample of
    // 4096 pairs beyond that.
    let pairs: Vec<(usize, usize)> = if n <= 64 {
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        (0..4096)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect()
    };
    for (i, j) in pairs {
        let p = &space.basis()[i] * &space.basis()[j];
        let m = space.membership(&p)?;
        if !m.contained {
            return Err(Error::NotClosed {
                operation: "product",
                residual: m.residual,
            });
        }
    }
    let m = space.membership(unit)?;
    if !m.contained {
        return Err(Error::NotClosed {
            operation: "unit",
            residual: m.residual,
        });
    }
    for b in space.basis() {
        let bound = tol.residual_for(hs_norm(b));
        let left = hs_distance(&(unit * b), b);
        let right = hs_distance(&(b * unit), b);
        if left > bound || right > bound {
            return Err(Error::NotClosed {
                operation: "unit",
                residual: left.max(right),
            });
        }
    }
    Ok(())
}

/// Random Hermitian element of the real span of the given family and their
/// adjoints.
fn random_hermitian_in(basis: &[CMat], rng: &mut ChaCha8Rng) -> CMat {
    let (rows, cols) = (basis[0].nrows(), basis[0].ncols());
    let mut h = CMat::zeros(rows, cols);
    for b in basis {
        let t: f64 = rng.sample(StandardNormal);
        let s: f64 = rng.sample(StandardNormal);
        let re = (b + b.adjoint()).scale(0.5);
        let im = (b - b.adjoint()).scale(0.5) * Complex::new(0.0, -1.0);
        h += re.scale(t) + im.scale(s);
    }
    h
}

fn random_element_in(basis: &[CMat], rng: &mut ChaCha8Rng) -> CMat {
    let (rows, cols) = (basis[0].nrows(), basis[0].ncols());
    let mut x = CMat::zeros(rows, cols);
    for b in basis {
        let t: f64 = rng.sample(StandardNormal);
        let s: f64 = rng.sample(StandardNormal);
        x += b * Complex::new(t, s);
    }
    x
}

/// Partition sorted eigenvalues into clusters separated by gaps larger than
/// `rel_gap`·spread. Returns index groups in ascending order.
fn split_by_gap(sorted: &[f64], rel_gap: f64) -> Vec<Vec<usize>> {
    if sorted.is_empty() {
        return Vec::new();
    }
    let spread = sorted[sorted.len() - 1] - sorted[0];
    let mut groups = vec![vec![0]];
    for i in 1..sorted.len() {
        if spread > 0.0 && sorted[i] - sorted[i - 1] > rel_gap * spread {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("nonempty").push(i);
    }
    groups
}

/// Partition sorted eigenvalues into exactly `groups` consecutive runs of
/// equal length by cutting at the largest gaps. Returns None when the cut
/// does not produce equal sizes or the chosen gaps are not clearly separated
/// from the remaining ones.
fn split_into_equal_groups(sorted: &[f64], groups: usize, size: usize) -> Option<Vec<Vec<usize>>> {
    let r = sorted.len();
    if groups * size != r || groups == 0 {
        return None;
    }
    if groups == 1 {
        return Some(vec![(0..r).collect()]);
    }
    let spread = sorted[r - 1] - sorted[0];
    if !(spread > 0.0) {
        return None;
    }
    let mut gaps: Vec<(f64, usize)> = (1..r).map(|i| (sorted[i] - sorted[i - 1], i)).collect();
    gaps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let chosen = &gaps[..groups - 1];
    let min_chosen = chosen.last().expect("groups ≥ 2").0;
    let max_other = gaps.get(groups - 1).map_or(0.0, |g| g.0);
    if min_chosen < 1e-6 * spread || (max_other > 0.0 && min_chosen < 100.0 * max_other) {
        return None;
    }
    let mut cuts: Vec<usize> = chosen.iter().map(|&(_, i)| i).collect();
    cuts.sort_unstable();
    cuts.push(r);
    let mut out = Vec::with_capacity(groups);
    let mut start = 0;
    for cut in cuts {
        if cut - start != size {
            return None;
        }
        out.push((start..cut).collect());
        start = cut;
    }
    Some(out)
}

fn spectral_indicator(vals: &[f64], vecs: &CMat, cluster: &[usize]) -> CMat {
    let _ = vals;
    let n = vecs.nrows();
    let mut proj = CMat::zeros(n, n);
    for &i in cluster {
        let col = vecs.column(i);
        proj += CMat::from_fn(n, n, |r, c| col[r] * col[c].conj());
    }
    proj
}

/// Matrix units for a unital subalgebra of r×r matrices isomorphic to
/// n×n matrices with multiplicity m: spectrally split a generic Hermitian
/// element into n rank-m projections, then connect them by polar parts of
/// generic corners.
fn matrix_units_in(
    span: &OperatorSpace,
    n: usize,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<CMat>>> {
    let tol = span.tol();
    'attempt: for _ in 0..RETRY_BUDGET {
        let h = random_hermitian_in(span.basis(), rng);
        let (vals, vecs) = eigh(&h)?;
        let Some(groups) = split_into_equal_groups(&vals, n, m) else {
            continue 'attempt;
        };
        let diag: Vec<CMat> = groups
            .iter()
            .map(|g| spectral_indicator(&vals, &vecs, g))
            .collect();
        for f in &diag {
            if !span.contains(f)? {
                continue 'attempt;
            }
        }
        let generic = random_element_in(span.basis(), rng);
        let mut column = vec![diag[0].clone()];
        for f in diag.iter().skip(1) {
            let corner = f * &generic * &diag[0];
            let p = crate::numlin::polar(&corner, tol)?;
            let bound = tol.residual_for(hs_norm(&diag[0]));
            if hs_distance(&(p.u.adjoint() * &p.u), &diag[0]) > bound
                || hs_distance(&(&p.u * p.u.adjoint()), f) > bound
            {
                continue 'attempt;
            }
            column.push(p.u);
        }
        let units: Vec<Vec<CMat>> = (0..n)
            .map(|i| (0..n).map(|j| &column[i] * column[j].adjoint()).collect())
            .collect();
        if !unit_relations_hold(&units, span)? {
            continue 'attempt;
        }
        return Ok(units);
    }
    Err(Error::RetryBudgetExhausted {
        attempts: RETRY_BUDGET,
        context: "matrix units".into(),
    })
}

fn unit_relations_hold(units: &[Vec<CMat>], span: &OperatorSpace) -> Result<bool> {
    let tol = span.tol();
    let n = units.len();
    let r = units[0][0].nrows();
    let norm = hs_norm(&units[0][0]);
    let bound = tol.residual_for(norm);
    for i in 0..n {
        for j in 0..n {
            if hs_distance(&units[i][j].adjoint(), &units[j][i]) > bound {
                return Ok(false);
            }
            if !span.contains(&units[i][j])? {
                return Ok(false);
            }
            for k in 0..n {
                for l in 0..n {
                    let p = &units[i][j] * &units[k][l];
                    let target = if j == k {
                        units[i][l].clone()
                    } else {
                        CMat::zeros(r, r)
                    };
                    if hs_distance(&p, &target) > bound {
                        return Ok(false);
                    }
                }
            }
        }
    }
    let mut sum = CMat::zeros(r, r);
    for (i, row) in units.iter().enumerate() {
        sum += &row[i];
    }
    Ok(hs_distance(&sum, &CMat::identity(r, r)) <= tol.residual_for((r as f64).sqrt()))
}

/// A linear functional on an algebra, stored by its values on the
/// orthonormal basis together with the equivalent density so that
/// evaluation is a Hilbert–Schmidt pairing.
#[derive(Clone, Debug)]
pub struct State {
    algebra: VnAlgebra,
    values: CVec,
    density: CMat,
    faithful: bool,
    tracial_defect: f64,
    null_witness: Option<CVec>,
}

impl State {
    /// State with `φ(x) = trace(ρ·x)`; `ρ` is projected onto the algebra's
    /// span, which never changes the values on the algebra.
    pub fn from_density(algebra: VnAlgebra, rho: &CMat) -> Result<State> {
        let d = algebra.ambient_dim();
        if rho.shape() != (d, d) {
            return Err(Error::shape(format!("{d}x{d}"), shape_string(rho)));
        }
        let values = CVec::from_iterator(
            algebra.dim(),
            algebra.basis().iter().map(|b| (rho * b).trace()),
        );
        State::on_basis(algebra, values)
    }

    /// State from its values on the algebra's orthonormal basis.
    pub fn on_basis(algebra: VnAlgebra, values: CVec) -> Result<State> {
        if values.len() != algebra.dim() {
            return Err(Error::shape(
                format!("{} values", algebra.dim()),
                format!("{} values", values.len()),
            ));
        }
        let tol = algebra.tol();
        let d = algebra.ambient_dim();
        let mut density = CMat::zeros(d, d);
        for (b, v) in algebra.basis().iter().zip(values.iter()) {
            density += b * v.conj();
        }
        let defect = hermiticity_defect(&density);
        if defect > tol.residual_for(hs_norm(&density)) {
            return Err(Error::InvalidState {
                property: "hermitian density",
                defect,
            });
        }
        let on_unit = hs_inner(&density, algebra.unit());
        let norm_defect = (on_unit - Complex::new(1.0, 0.0)).norm();
        if norm_defect > tol.residual_tol {
            return Err(Error::InvalidState {
                property: "normalization",
                defect: norm_defect,
            });
        }
        let (evals, _) = eigh(&density)?;
        let lmax = evals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let min = evals.first().copied().unwrap_or(0.0);
        if min < -tol.rank_tol * lmax.max(1.0) {
            return Err(Error::InvalidState {
                property: "positivity",
                defect: -min,
            });
        }
        // Faithfulness through the Gram matrix of the basis.
        let n = algebra.dim();
        let gram = CMat::from_fn(n, n, |i, j| {
            let p = algebra.basis()[i].adjoint() * &algebra.basis()[j];
            hs_inner(&density, &p)
        });
        let (gvals, gvecs) = eigh(&gram)?;
        let gmax = gvals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let rank = gvals.iter().filter(|&&v| v > tol.rank_tol * gmax).count();
        let faithful = rank == n;
        let null_witness = if faithful {
            None
        } else {
            Some(CVec::from(gvecs.column(0)))
        };
        let mut tracial_defect = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let ab = &algebra.basis()[i] * &algebra.basis()[j];
                let ba = &algebra.basis()[j] * &algebra.basis()[i];
                let diff = (hs_inner(&density, &ab) - hs_inner(&density, &ba)).norm();
                tracial_defect = tracial_defect.max(diff);
            }
        }
        Ok(State {
            algebra,
            values,
            density,
            faithful,
            tracial_defect,
            null_witness,
        })
    }

    pub fn eval(&self, x: &CMat) -> Complex {
        hs_inner(&self.density, x)
    }

    pub fn algebra(&self) -> &VnAlgebra {
        &self.algebra
    }

    pub fn values(&self) -> &CVec {
        &self.values
    }

    pub fn density(&self) -> &CMat {
        &self.density
    }

    pub fn is_faithful(&self) -> bool {
        self.faithful
    }

    pub fn is_tracial(&self) -> bool {
        self.tracial_defect <= self.algebra.tol().residual_tol
    }

    pub fn tracial_defect(&self) -> f64 {
        self.tracial_defect
    }

    /// A nonzero algebra element `a` with `φ(a*a) ≈ 0`, present exactly when
    /// the state is not faithful.
    pub fn null_direction(&self) -> Option<CMat> {
        self.null_witness
            .as_ref()
            .map(|c| self.algebra.space().from_coords(c))
    }
}

/// The φ-preserving conditional expectation onto a unital subalgebra:
/// orthogonal projection with respect to `⟨a,b⟩ = φ(a*b)`.
#[derive(Clone, Debug)]
pub struct ConditionalExpectation {
    sub: VnAlgebra,
    gram: CMat,
    lefts: Vec<CMat>,
}

pub fn conditional_expectation(
    big: &VnAlgebra,
    sub: &VnAlgebra,
    phi: &State,
) -> Result<ConditionalExpectation> {
    let tol = big.tol();
    for b in sub.basis() {
        let m = big.space().membership(b)?;
        if !m.contained {
            return Err(Error::AlgebraMismatch(format!(
                "subalgebra basis element escapes the larger algebra (residual {:.3e})",
                m.residual
            )));
        }
    }
    if hs_distance(sub.unit(), big.unit()) > tol.residual_for(hs_norm(big.unit())) {
        return Err(Error::AlgebraMismatch("units differ".into()));
    }
    if !phi.algebra().same_algebra_as(big)? {
        return Err(Error::AlgebraMismatch(
            "state lives on a different algebra".into(),
        ));
    }
    if !phi.is_tracial() {
        return Err(Error::InvalidState {
            property: "traciality",
            defect: phi.tracial_defect(),
        });
    }
    let n = sub.dim();
    let gram = CMat::from_fn(n, n, |i, j| {
        phi.eval(&(sub.basis()[i].adjoint() * &sub.basis()[j]))
    });
    let lefts = sub
        .basis()
        .iter()
        .map(|b| b * phi.density())
        .collect();
    Ok(ConditionalExpectation {
        sub: sub.clone(),
        gram,
        lefts,
    })
}

impl ConditionalExpectation {
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let d = self.sub.ambient_dim();
        if x.shape() != (d, d) {
            return Err(Error::shape(format!("{d}x{d}"), shape_string(x)));
        }
        let rhs = CMat::from_fn(self.sub.dim(), 1, |i, _| hs_inner(&self.lefts[i], x));
        let coeff = lstsq(&self.gram, &rhs, self.sub.tol())?;
        let mut out = CMat::zeros(d, d);
        for (b, c) in self.sub.basis().iter().zip(coeff.column(0).iter()) {
            out += b * *c;
        }
        Ok(out)
    }

    pub fn sub(&self) -> &VnAlgebra {
        &self.sub
    }
}

/// A *-isomorphism of an algebra onto itself, stored by the images of the
/// orthonormal basis.
#[derive(Clone, Debug)]
pub struct Automorphism {
    algebra: VnAlgebra,
    images: Vec<CMat>,
    /// Coordinate matrix: column j holds the coordinates of images[j].
    coeff: CMat,
}

impl Automorphism {
    pub fn new(algebra: &VnAlgebra, images: Vec<CMat>) -> Result<Automorphism> {
        let tol = algebra.tol();
        let n = algebra.dim();
        if images.len() != n {
            return Err(Error::shape(
                format!("{n} images"),
                format!("{} images", images.len()),
            ));
        }
        for im in &images {
            let m = algebra.space().membership(im)?;
            if !m.contained {
                return Err(Error::NotAutomorphism {
                    kind: "image containment",
                    defect: m.residual,
                });
            }
        }
        let mut coeff = CMat::zeros(n, n);
        for (j, im) in images.iter().enumerate() {
            coeff.set_column(j, &algebra.space().coords(im)?);
        }
        // Bijectivity: the coordinate matrix has full rank.
        let (svals, _) = eigh(&(coeff.adjoint() * &coeff))?;
        let smax = svals.iter().fold(0.0f64, |a, &v| a.max(v.max(0.0).sqrt()));
        let smin = svals.first().map_or(0.0, |&v| v.max(0.0).sqrt());
        if smax == 0.0 || smin <= tol.rank_tol * smax {
            return Err(Error::NotAutomorphism {
                kind: "bijectivity",
                defect: smin,
            });
        }
        let auto = Automorphism {
            algebra: algebra.clone(),
            images,
            coeff,
        };
        for (i, b) in algebra.basis().iter().enumerate() {
            let adj = auto.apply(&b.adjoint())?;
            let defect = hs_distance(&adj, &auto.images[i].adjoint());
            if defect > tol.residual_for(hs_norm(b)) {
                return Err(Error::NotAutomorphism {
                    kind: "adjoint preservation",
                    defect,
                });
            }
            for (j, c) in algebra.basis().iter().enumerate() {
                let prod = auto.apply(&(b * c))?;
                let defect = hs_distance(&prod, &(&auto.images[i] * &auto.images[j]));
                if defect > tol.residual_for(hs_norm(&(b * c))) {
                    return Err(Error::NotAutomorphism {
                        kind: "multiplicativity",
                        defect,
                    });
                }
            }
        }
        Ok(auto)
    }

    /// The automorphism `x ↦ u x u*` for a unitary of the algebra.
    pub fn inner(algebra: &VnAlgebra, u: &CMat) -> Result<Automorphism> {
        let tol = algebra.tol();
        let m = algebra.space().membership(u)?;
        if !m.contained {
            return Err(Error::NotInAlgebra(format!(
                "conjugating unitary (residual {:.3e})",
                m.residual
            )));
        }
        let defect = hs_distance(&(u.adjoint() * u), algebra.unit());
        if defect > tol.residual_for(hs_norm(algebra.unit())) {
            return Err(Error::NotPartialIsometry { defect });
        }
        let images = algebra.basis().iter().map(|b| u * b * u.adjoint()).collect();
        Automorphism::new(algebra, images)
    }

    pub fn identity(algebra: &VnAlgebra) -> Result<Automorphism> {
        Automorphism::new(algebra, algebra.basis().to_vec())
    }

    pub fn algebra(&self) -> &VnAlgebra {
        &self.algebra
    }

    pub fn images(&self) -> &[CMat] {
        &self.images
    }

    /// Matrix of the map on algebra coordinates: column j holds the
    /// coordinates of the image of the j-th basis element.
    pub fn coordinate_matrix(&self) -> &CMat {
        &self.coeff
    }

    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        let c = self.algebra.space().coords(x)?;
        let d = self.algebra.ambient_dim();
        let mut out = CMat::zeros(d, d);
        for (im, w) in self.images.iter().zip(c.iter()) {
            out += im * *w;
        }
        Ok(out)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Automorphism) -> Result<Automorphism> {
        let images = other
            .images
            .iter()
            .map(|im| self.apply(im))
            .collect::<Result<Vec<_>>>()?;
        Automorphism::new(&self.algebra, images)
    }

    pub fn inverse(&self) -> Result<Automorphism> {
        let n = self.algebra.dim();
        let inv = lstsq(&self.coeff, &CMat::identity(n, n), self.algebra.tol())?;
        let images = (0..n)
            .map(|j| self.algebra.space().from_coords(&CVec::from(inv.column(j))))
            .collect();
        Automorphism::new(&self.algebra, images)
    }

    pub fn is_identity(&self) -> Result<bool> {
        let tol = self.algebra.tol();
        for (b, im) in self.algebra.basis().iter().zip(&self.images) {
            if hs_distance(b, im) > tol.residual_for(hs_norm(b)) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Whether a state is invariant: `φ∘θ = φ` on the basis.
    pub fn preserves_state(&self, phi: &State) -> Result<bool> {
        let tol = self.algebra.tol();
        for b in self.algebra.basis() {
            let diff = (phi.eval(&self.apply(b)?) - phi.eval(b)).norm();
            if diff > tol.residual_tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

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

    #[test]
    fn closure_of_single_offdiagonal_unit_is_everything() {
        let a = VnAlgebra::closure(&[unit_mat(2, 0, 1)], tol()).unwrap();
        assert_eq!(a.dim(), 4);
        assert!(hs_distance(a.unit(), &CMat::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn closure_of_projection_is_one_dimensional() {
        let a = VnAlgebra::closure(&[unit_mat(2, 0, 0)], tol()).unwrap();
        assert_eq!(a.dim(), 1);
        assert!(hs_distance(a.unit(), &unit_mat(2, 0, 0)) < 1e-10);
        assert!(!a.is_unital_in_ambient());
    }

    #[test]
    fn closure_of_nothing_is_zero_algebra() {
        let a = VnAlgebra::closure(&[], tol()).unwrap();
        assert_eq!(a.dim(), 0);
        assert!(a.center_minimal_projections().unwrap().is_empty());
    }

    #[test]
    fn closure_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let gens: Vec<CMat> = (0..2)
            .map(|_| {
                CMat::from_fn(3, 3, |_, _| {
                    c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        let again = VnAlgebra::closure(a.basis(), tol()).unwrap();
        assert_eq!(a.dim(), again.dim());
    }

    #[test]
    fn commutant_examples() {
        let full = VnAlgebra::full(2, tol()).unwrap();
        let scalars = full.commutant().unwrap();
        assert_eq!(scalars.dim(), 1);
        assert!(scalars.contains(&CMat::identity(2, 2)).unwrap());

        let back = scalars.commutant().unwrap();
        assert_eq!(back.dim(), 4);

        let diag = VnAlgebra::closure(
            &[unit_mat(3, 0, 0), unit_mat(3, 1, 1), unit_mat(3, 2, 2)],
            tol(),
        )
        .unwrap();
        let dc = diag.commutant().unwrap();
        assert_eq!(dc.dim(), 3);
        for i in 0..3 {
            assert!(dc.contains(&unit_mat(3, i, i)).unwrap());
        }
    }

    #[test]
    fn center_projections_of_full_and_diagonal() {
        let full = VnAlgebra::full(3, tol()).unwrap();
        let zs = full.center_minimal_projections().unwrap();
        assert_eq!(zs.len(), 1);
        assert!(hs_distance(&zs[0], &CMat::identity(3, 3)) < 1e-9);

        let diag = VnAlgebra::closure(&[unit_mat(2, 0, 0), unit_mat(2, 1, 1)], tol()).unwrap();
        let zs = diag.center_minimal_projections().unwrap();
        assert_eq!(zs.len(), 2);
        for z in &zs {
            let is_e11 = hs_distance(z, &unit_mat(2, 0, 0)) < 1e-9;
            let is_e22 = hs_distance(z, &unit_mat(2, 1, 1)) < 1e-9;
            assert!(is_e11 || is_e22);
        }
    }

    #[test]
    fn center_projections_of_two_blocks_have_correct_ranks() {
        // M2 ⊕ M3 inside the 5×5 matrices.
        let mut gens = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                gens.push(unit_mat(5, i, j));
            }
        }
        for i in 2..5 {
            for j in 2..5 {
                gens.push(unit_mat(5, i, j));
            }
        }
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        assert_eq!(a.dim(), 13);
        let zs = a.center_minimal_projections().unwrap();
        assert_eq!(zs.len(), 2);
        let mut ranks: Vec<usize> = zs.iter().map(|z| z.trace().re.round() as usize).collect();
        ranks.sort_unstable();
        assert_eq!(ranks, vec![2, 3]);
    }

    #[test]
    fn wedderburn_full_2x2() {
        let a = VnAlgebra::full(2, tol()).unwrap();
        let blocks = a.blocks().unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].block_dim, 2);
        assert_eq!(blocks[0].multiplicity, 1);
    }

    #[test]
    fn wedderburn_diagonal_2x2() {
        let a = VnAlgebra::closure(&[unit_mat(2, 0, 0), unit_mat(2, 1, 1)], tol()).unwrap();
        let blocks = a.blocks().unwrap();
        assert_eq!(blocks.len(), 2);
        assert!(blocks.iter().all(|b| b.block_dim == 1 && b.multiplicity == 1));
    }

    #[test]
    fn wedderburn_doubled_copy_has_multiplicity_two() {
        // {x ⊕ x : x ∈ M2} inside the 4×4 matrices.
        let mut gens = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let mut g = CMat::zeros(4, 4);
                g[(i, j)] = c(1.0, 0.0);
                g[(i + 2, j + 2)] = c(1.0, 0.0);
                gens.push(g);
            }
        }
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        assert_eq!(a.dim(), 4);
        let blocks = a.blocks().unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].block_dim, 2);
        assert_eq!(blocks[0].multiplicity, 2);
        // Rank reconciliation: Σ n_k·m_k = rank(unit).
        let rank: usize = blocks
            .iter()
            .map(|b| b.block_dim * b.multiplicity)
            .sum();
        assert_eq!(rank, a.unit().trace().re.round() as usize);
        // Unit relations, spot-checked through the stored family.
        let e = &blocks[0].matrix_units;
        assert!(hs_distance(&(&e[0][1] * &e[1][0]), &e[0][0]) < 1e-8);
        assert!(hs_distance(&e[0][1].adjoint(), &e[1][0]) < 1e-10);
    }

    #[test]
    fn canonical_trace_on_full_2x2_is_half_trace() {
        let a = VnAlgebra::full(2, tol()).unwrap();
        let phi = a.canonical_trace().unwrap();
        assert!(phi.is_faithful());
        assert!(phi.is_tracial());
        assert!((phi.eval(&unit_mat(2, 0, 0)) - c(0.5, 0.0)).norm() < 1e-10);
        assert!(phi.eval(&unit_mat(2, 0, 1)).norm() < 1e-10);
        assert!((phi.eval(&CMat::identity(2, 2)) - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn canonical_trace_on_diagonal_weights_evenly() {
        let a = VnAlgebra::closure(&[unit_mat(2, 0, 0), unit_mat(2, 1, 1)], tol()).unwrap();
        let phi = a.canonical_trace().unwrap();
        assert!((phi.eval(&unit_mat(2, 0, 0)) - c(0.5, 0.0)).norm() < 1e-10);
        assert!((phi.eval(&unit_mat(2, 1, 1)) - c(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn canonical_trace_survives_block_swap() {
        // M2 ⊕ M2 block-diagonally inside 4×4, with the swap automorphism.
        let mut gens = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                gens.push(unit_mat(4, i, j));
                gens.push(unit_mat(4, i + 2, j + 2));
            }
        }
        let a = VnAlgebra::closure(&gens, tol()).unwrap();
        assert_eq!(a.dim(), 8);
        let swap = {
            let mut s = CMat::zeros(4, 4);
            for i in 0..2 {
                s[(i, i + 2)] = c(1.0, 0.0);
                s[(i + 2, i)] = c(1.0, 0.0);
            }
            s
        };
        let images: Vec<CMat> = a.basis().iter().map(|b| &swap * b * swap.adjoint()).collect();
        let theta = Automorphism::new(&a, images).unwrap();
        let phi = a.canonical_trace().unwrap();
        assert!(theta.preserves_state(&phi).unwrap());
    }

    #[test]
    fn conditional_expectation_onto_diagonal() {
        let full = VnAlgebra::full(2, tol()).unwrap();
        let diag = VnAlgebra::closure(&[unit_mat(2, 0, 0), unit_mat(2, 1, 1)], tol()).unwrap();
        let phi = full.canonical_trace().unwrap();
        let eps = conditional_expectation(&full, &diag, &phi).unwrap();

        let x = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, -1.0), c(0.5, 3.0), c(4.0, 0.0)]);
        let ex = eps.apply(&x).unwrap();
        let expected =
            CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(4.0, 0.0)]));
        assert!(hs_distance(&ex, &expected) < 1e-10);

        // ε(1) = 1 and ε fixes the subalgebra.
        let one = eps.apply(&CMat::identity(2, 2)).unwrap();
        assert!(hs_distance(&one, &CMat::identity(2, 2)) < 1e-10);
        let fixed = eps.apply(&unit_mat(2, 1, 1)).unwrap();
        assert!(hs_distance(&fixed, &unit_mat(2, 1, 1)) < 1e-10);

        // Bimodule property over all basis triples.
        for a2 in diag.basis() {
            for x in full.basis() {
                for b2 in diag.basis() {
                    let lhs = eps.apply(&(a2 * x * b2)).unwrap();
                    let rhs = a2 * eps.apply(x).unwrap() * b2;
                    assert!(hs_distance(&lhs, &rhs) < 1e-8);
                }
            }
        }

        // φ∘ε = φ on a basis.
        for x in full.basis() {
            let diff = (phi.eval(&eps.apply(x).unwrap()) - phi.eval(x)).norm();
            assert!(diff < 1e-9);
        }
    }

    #[test]
    fn automorphism_rejects_non_multiplicative_map() {
        let a = VnAlgebra::full(2, tol()).unwrap();
        // Transpose is linear and *-preserving on the basis images but not
        // multiplicative as stated (it is an anti-automorphism).
        let images: Vec<CMat> = a.basis().iter().map(|b| b.transpose()).collect();
        let err = Automorphism::new(&a, images).unwrap_err();
        assert!(matches!(err, Error::NotAutomorphism { .. }));
    }

    #[test]
    fn automorphism_compose_and_inverse() {
        let a = VnAlgebra::full(2, tol()).unwrap();
        let u = CMat::from_row_slice(
            2,
            2,
            &[
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(-1.0, 0.0),
                c(0.0, 0.0),
            ],
        );
        let theta = Automorphism::inner(&a, &u).unwrap();
        let inv = theta.inverse().unwrap();
        let round = theta.compose(&inv).unwrap();
        assert!(round.is_identity().unwrap());
        assert!(!theta.is_identity().unwrap());
    }

    #[test]
    fn state_rejects_unnormalized_density() {
        let a = VnAlgebra::full(2, tol()).unwrap();
        let err = State::from_density(a, &CMat::identity(2, 2)).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidState {
                property: "normalization",
                ..
            }
        ));
    }

    #[test]
    fn state_detects_unfaithful_density() {
        let a = VnAlgebra::full(2, tol()).unwrap();
        let rho = unit_mat(2, 0, 0);
        let phi = State::from_density(a, &rho).unwrap();
        assert!(!phi.is_faithful());
        let dir = phi.null_direction().unwrap();
        assert!(hs_norm(&dir) > 0.5);
        // The witness really annihilates the form: φ(a*a) ≈ 0.
        assert!(phi.eval(&(dir.adjoint() * &dir)).norm() < 1e-9);
    }
}
