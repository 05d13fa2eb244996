//! Finite-dimensional C*-algebras as direct sums of full matrix blocks.
//!
//! An algebra `A = M_{n_1} ⊕ … ⊕ M_{n_k}` carries the faithful tracial state
//! `τ(a) = Σ_i w_i · Tr(a_i) / n_i`.
//!
//! # Canonical basis
//!
//! The canonical basis of `A` is the list of matrix units `E_rs`, row-major
//! inside each block, blocks in declaration order. Index `offset_i + r·n_i + s`
//! is the unit `E_rs` of block `i`. Functional coefficients, left/right
//! multiplication matrices and every serialized coefficient vector use this
//! order; it is a stable contract.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec, C64};
use crate::report::Check;
use crate::rng;

/// Relative eigenvalue clustering tolerance for spectral projections.
pub const SPECTRAL_CLUSTER_TOL: f64 = 1e-8;
/// Relative singular-value cutoff for commutant and centralizer solves.
pub const NULL_SPACE_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraSpec {
    block_dims: Vec<usize>,
    trace_weights: Vec<f64>,
    offsets: Vec<usize>,
}

impl AlgebraSpec {
    /// Blocks with the default weights `w_i = n_i / N`, i.e. the normalized
    /// trace of the block-diagonal embedding.
    pub fn new(block_dims: &[usize]) -> Result<Self> {
        let total: usize = block_dims.iter().sum();
        let weights: Vec<f64> = block_dims.iter().map(|&n| n as f64 / total.max(1) as f64).collect();
        Self::with_weights(block_dims, &weights)
    }

    pub fn with_weights(block_dims: &[usize], trace_weights: &[f64]) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidAlgebra("at least one block is required".into()));
        }
        if block_dims.contains(&0) {
            return Err(Error::InvalidAlgebra("block dimensions must be positive".into()));
        }
        if trace_weights.len() != block_dims.len() {
            return Err(Error::InvalidAlgebra(format!(
                "{} trace weights given for {} blocks",
                trace_weights.len(),
                block_dims.len()
            )));
        }
        if trace_weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidAlgebra("trace weights must be positive".into()));
        }
        let sum: f64 = trace_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAlgebra(format!("trace weights sum to {sum}, expected 1")));
        }
        let mut offsets = Vec::with_capacity(block_dims.len());
        let mut acc = 0;
        for &n in block_dims {
            offsets.push(acc);
            acc += n * n;
        }
        Ok(Self { block_dims: block_dims.to_vec(), trace_weights: trace_weights.to_vec(), offsets })
    }

    /// `M_n(ℂ)` with the normalized trace.
    pub fn full_matrix(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn trace_weights(&self) -> &[f64] {
        &self.trace_weights
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// `N = Σ n_i`, the size of the block-diagonal embedding.
    pub fn embedding_dim(&self) -> usize {
        self.block_dims.iter().sum()
    }

    /// `dim A = Σ n_i²`.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    pub fn basis_index(&self, block: usize, r: usize, s: usize) -> usize {
        self.offsets[block] + r * self.block_dims[block] + s
    }

    /// Inverse of [`basis_index`](Self::basis_index).
    pub fn basis_location(&self, idx: usize) -> (usize, usize, usize) {
        let block = self.offsets.partition_point(|&o| o <= idx) - 1;
        let n = self.block_dims[block];
        let local = idx - self.offsets[block];
        (block, local / n, local % n)
    }

    pub fn basis_element(&self, idx: usize) -> AlgebraElement {
        let (block, r, s) = self.basis_location(idx);
        let mut a = self.zero();
        a.blocks[block][(r, s)] = C64::new(1.0, 0.0);
        a
    }

    pub fn basis(&self) -> Vec<AlgebraElement> {
        (0..self.dim()).map(|i| self.basis_element(i)).collect()
    }

    /// `τ(E_rs^* E_rs) = w_i / n_i`; the canonical basis is τ-orthogonal.
    pub fn basis_tau_weight(&self, idx: usize) -> f64 {
        let (block, _, _) = self.basis_location(idx);
        self.trace_weights[block] / self.block_dims[block] as f64
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement { blocks: self.block_dims.iter().map(|&n| CMat::zeros(n, n)).collect() }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement { blocks: self.block_dims.iter().map(|&n| CMat::identity(n, n)).collect() }
    }

    pub fn check(&self, a: &AlgebraElement) -> Result<()> {
        let dims: Vec<usize> = a.blocks.iter().map(|b| b.nrows()).collect();
        let square = a.blocks.iter().all(|b| b.is_square());
        if !square || dims != self.block_dims {
            return Err(Error::ShapeMismatch {
                expected: format!("blocks {:?}", self.block_dims),
                found: format!("blocks {:?}", a.blocks.iter().map(|b| b.shape()).collect::<Vec<_>>()),
            });
        }
        Ok(())
    }

    pub fn from_blocks(&self, blocks: Vec<CMat>) -> Result<AlgebraElement> {
        let a = AlgebraElement { blocks };
        self.check(&a)?;
        Ok(a)
    }

    /// Canonical-basis coefficients of `a`.
    pub fn coefficients(&self, a: &AlgebraElement) -> CVec {
        let mut v = CVec::zeros(self.dim());
        for (i, block) in a.blocks.iter().enumerate() {
            let n = self.block_dims[i];
            for r in 0..n {
                for s in 0..n {
                    v[self.offsets[i] + r * n + s] = block[(r, s)];
                }
            }
        }
        v
    }

    pub fn from_coefficients(&self, v: &CVec) -> AlgebraElement {
        assert_eq!(v.len(), self.dim(), "coefficient vector length");
        let blocks = self
            .block_dims
            .iter()
            .enumerate()
            .map(|(i, &n)| CMat::from_fn(n, n, |r, s| v[self.offsets[i] + r * n + s]))
            .collect();
        AlgebraElement { blocks }
    }

    /// `τ(a) = Σ_i w_i Tr(a_i) / n_i`.
    pub fn trace_tau(&self, a: &AlgebraElement) -> Result<C64> {
        self.check(a)?;
        Ok(self.trace_unchecked(a))
    }

    pub(crate) fn trace_unchecked(&self, a: &AlgebraElement) -> C64 {
        a.blocks
            .iter()
            .zip(&self.trace_weights)
            .zip(&self.block_dims)
            .map(|((b, &w), &n)| b.trace() * (w / n as f64))
            .sum()
    }

    /// `τ(b* a)`.
    pub fn tau_inner(&self, a: &AlgebraElement, b: &AlgebraElement) -> C64 {
        self.trace_unchecked(&(&b.star() * a))
    }

    /// Matrix of `x ↦ a x` on canonical coefficients.
    pub fn left_mult_matrix(&self, a: &AlgebraElement) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (i, &n) in self.block_dims.iter().enumerate() {
            let off = self.offsets[i];
            let blk = &a.blocks[i];
            // (a X)[t, s] = Σ_r a[t, r] X[r, s]
            for t in 0..n {
                for r in 0..n {
                    let z = blk[(t, r)];
                    for s in 0..n {
                        m[(off + t * n + s, off + r * n + s)] = z;
                    }
                }
            }
        }
        m
    }

    /// Matrix of `x ↦ x a` on canonical coefficients.
    pub fn right_mult_matrix(&self, a: &AlgebraElement) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for (i, &n) in self.block_dims.iter().enumerate() {
            let off = self.offsets[i];
            let blk = &a.blocks[i];
            // (X a)[r, t] = Σ_s X[r, s] a[s, t]
            for r in 0..n {
                for t in 0..n {
                    for s in 0..n {
                        m[(off + r * n + t, off + r * n + s)] = blk[(s, t)];
                    }
                }
            }
        }
        m
    }

    /// `Θ^τ_a : b ↦ τ(ab)`.
    pub fn theta_tau(&self, a: &AlgebraElement) -> Result<Functional> {
        self.check(a)?;
        let mut coeffs = CVec::zeros(self.dim());
        for (i, &n) in self.block_dims.iter().enumerate() {
            let w = self.trace_weights[i] / n as f64;
            for r in 0..n {
                for s in 0..n {
                    // τ(a E_rs) = (w_i / n_i) a[s, r]
                    coeffs[self.offsets[i] + r * n + s] = a.blocks[i][(s, r)] * w;
                }
            }
        }
        Ok(Functional { coefficients: coeffs })
    }

    /// τ-orthonormal basis of `{b ∈ A : bg = gb for every generator g}`.
    pub fn commutant(&self, generators: &[AlgebraElement]) -> Result<Vec<AlgebraElement>> {
        for g in generators {
            self.check(g)?;
        }
        let d = self.dim();
        let mut system = CMat::zeros(d * generators.len(), d);
        for (k, g) in generators.iter().enumerate() {
            let comm = self.left_mult_matrix(g) - self.right_mult_matrix(g);
            system.view_mut((k * d, 0), (d, d)).copy_from(&comm);
        }
        Ok(self.tau_null_space(&system))
    }

    /// τ-orthonormal basis of the centralizer
    /// `A^φ = {a ∈ A : φ(ab) = φ(ba) for all b}`.
    pub fn centralizer(&self, phi: &Functional) -> Result<Vec<AlgebraElement>> {
        if phi.coefficients.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("functional of length {}", self.dim()),
                found: format!("length {}", phi.coefficients.len()),
            });
        }
        let d = self.dim();
        let f = &phi.coefficients;
        let mut system = CMat::zeros(d, d);
        for (i, &n) in self.block_dims.iter().enumerate() {
            let off = self.offsets[i];
            // Row k = E_{r' s'}, column j = E_{r s}:
            //   φ(E_rs E_r's') − φ(E_r's' E_rs) = δ_{s r'} φ(E_{r s'}) − δ_{s' r} φ(E_{r' s})
            for rp in 0..n {
                for sp in 0..n {
                    let k = off + rp * n + sp;
                    for r in 0..n {
                        for s in 0..n {
                            let j = off + r * n + s;
                            let mut z = C64::new(0.0, 0.0);
                            if s == rp {
                                z += f[off + r * n + sp];
                            }
                            if sp == r {
                                z -= f[off + rp * n + s];
                            }
                            system[(k, j)] = z;
                        }
                    }
                }
            }
        }
        Ok(self.tau_null_space(&system))
    }

    /// Null space of a linear system on canonical coefficients, returned as a
    /// τ-orthonormal list of elements.
    fn tau_null_space(&self, system: &CMat) -> Vec<AlgebraElement> {
        let d = self.dim();
        // Work in coordinates y = D^{1/2} α where D = diag(τ(b_j^* b_j)).
        let scale: Vec<f64> = (0..d).map(|j| self.basis_tau_weight(j).sqrt()).collect();
        let mut scaled = system.clone();
        for j in 0..d {
            let inv = 1.0 / scale[j];
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= inv;
            }
        }
        let ns = linalg::null_space(&scaled, NULL_SPACE_CUTOFF);
        self.unscale_columns(&ns, &scale)
    }

    fn unscale_columns(&self, y: &CMat, scale: &[f64]) -> Vec<AlgebraElement> {
        (0..y.ncols())
            .map(|k| {
                let v = CVec::from_iterator(self.dim(), (0..self.dim()).map(|j| y[(j, k)] / scale[j]));
                self.from_coefficients(&v)
            })
            .collect()
    }

    /// τ-orthonormal basis of the span of `elements`.
    pub fn tau_orthonormalize(&self, elements: &[AlgebraElement]) -> Result<Vec<AlgebraElement>> {
        let d = self.dim();
        let scale: Vec<f64> = (0..d).map(|j| self.basis_tau_weight(j).sqrt()).collect();
        let mut y = CMat::zeros(d, elements.len());
        for (k, e) in elements.iter().enumerate() {
            self.check(e)?;
            let c = self.coefficients(e);
            for j in 0..d {
                y[(j, k)] = c[j] * scale[j];
            }
        }
        let q = linalg::range_basis(&y, NULL_SPACE_CUTOFF);
        Ok(self.unscale_columns(&q, &scale))
    }

    /// Scaled coordinates `D^{1/2} α` of a τ-orthonormal list; the result has
    /// Euclidean-orthonormal columns.
    pub fn tau_frame(&self, basis: &[AlgebraElement]) -> CMat {
        let d = self.dim();
        let mut y = CMat::zeros(d, basis.len());
        for (k, e) in basis.iter().enumerate() {
            let c = self.coefficients(e);
            for j in 0..d {
                y[(j, k)] = c[j] * self.basis_tau_weight(j).sqrt();
            }
        }
        y
    }

    /// τ-orthogonal projection of `a` onto the span of a τ-orthonormal basis.
    pub fn project_onto(&self, basis: &[AlgebraElement], a: &AlgebraElement) -> AlgebraElement {
        let mut out = self.zero();
        for b in basis {
            out = &out + &b.scale(self.tau_inner(a, b));
        }
        out
    }

    /// C*-norm distance from `a` to the span of a τ-orthonormal basis.
    pub fn distance_to_span(&self, basis: &[AlgebraElement], a: &AlgebraElement) -> f64 {
        (a - &self.project_onto(basis, a)).norm()
    }

    /// Block-diagonal unitary with Haar-distributed blocks, deterministic in
    /// `(self, seed)`. See [`crate::rng`] for the generator.
    pub fn haar_unitary(&self, seed: u64) -> AlgebraElement {
        let mut rng = rng::stream(seed, rng::tags::HAAR, 0);
        self.random_unitary(&mut rng)
    }

    /// Haar unitary drawn from a caller-supplied generator: a Ginibre block is
    /// QR-factorized and each column of `Q` is multiplied by the phase of the
    /// matching diagonal entry of `R`.
    pub fn random_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let blocks = self.block_dims.iter().map(|&n| haar_block(rng, n)).collect();
        AlgebraElement { blocks }
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement { blocks: self.block_dims.iter().map(|&n| rng::ginibre(rng, n, n)).collect() }
    }

    pub fn random_self_adjoint<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let g = self.random_element(rng);
        (&g + &g.star()).scale(c64(0.5, 0.0))
    }

    /// Random density `d ≥ 0` with `τ(d) = 1`; `ranks[i]` caps the rank of
    /// block `i` (`None` draws a full-rank density).
    pub fn random_density<R: Rng + ?Sized>(&self, rng: &mut R, ranks: Option<&[usize]>) -> AlgebraElement {
        let blocks: Vec<CMat> = self
            .block_dims
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let k = ranks.map_or(n, |r| r[i].min(n));
                let g = rng::ginibre(rng, n, k);
                &g * g.adjoint()
            })
            .collect();
        let d = AlgebraElement { blocks };
        let t = self.trace_unchecked(&d).re;
        d.scale(c64(1.0 / t, 0.0))
    }
}

/// `Θ^τ` injectivity, `A^φ = {d}'` and coadjoint equivariance of `Θ^τ` for
/// a density `d`, on `samples` random pairs `(a, u)`.
pub fn structure_checks(spec: &AlgebraSpec, density: &AlgebraElement, samples: usize, seed: u64) -> Result<Vec<Check>> {
    let d = spec.dim();
    // Columns are the functional coefficients of Θ^τ_{b_j}.
    let mut theta = CMat::zeros(d, d);
    for j in 0..d {
        theta.set_column(j, &spec.theta_tau(&spec.basis_element(j))?.coefficients);
    }
    let gram = linalg::hermitian_eigen(&(theta.adjoint() * &theta));
    let top = gram.values.first().copied().unwrap_or(0.0);
    let bottom = gram.values.last().copied().unwrap_or(0.0);

    let phi = spec.theta_tau(density)?;
    let cent = spec.centralizer(&phi)?;
    let comm = spec.commutant(std::slice::from_ref(density))?;
    let sine = linalg::max_principal_sine(&spec.tau_frame(&cent), &spec.tau_frame(&comm));

    let mut equivariance = 0.0_f64;
    for i in 0..samples {
        let mut rng = rng::stream(seed, rng::tags::INPUTS, 60_000 + i as u32);
        let a = spec.random_element(&mut rng);
        let u = spec.random_unitary(&mut rng);
        let moved = spec.theta_tau(&(&(&u * &a) * &u.star()))?;
        let base = spec.theta_tau(&a)?;
        for j in 0..d {
            let b = spec.basis_element(j);
            let lhs = moved.evaluate(spec, &b);
            let rhs = base.evaluate(spec, &(&(&u.star() * &b) * &u));
            equivariance = equivariance.max((lhs - rhs).norm() / a.norm());
        }
    }
    Ok(vec![
        Check::at_least("theta_injective", if top > 0.0 { bottom / top } else { 0.0 }, 1e-12),
        Check::equals("centralizer_dim_matches_commutant", cent.len(), comm.len()),
        Check::at_most("centralizer_equals_commutant", sine, 1e-8),
        Check::at_most("coadjoint_equivariance", equivariance, 1e-11),
    ])
}

fn haar_block<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = rng::ginibre(rng, n, n);
    let qr = g.qr();
    let (q, r) = qr.unpack();
    let mut u = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<CMat>,
}

impl AlgebraElement {
    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMat {
        &self.blocks[i]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut CMat {
        &mut self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    /// Builds an element without a spec; shape is checked on use.
    pub fn from_blocks_unchecked(blocks: Vec<CMat>) -> Self {
        Self { blocks }
    }

    pub fn star(&self) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b.adjoint()).collect() }
    }

    pub fn scale(&self, z: C64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| b * z).collect() }
    }

    /// C*-norm: the largest singular value over all blocks.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().map(linalg::max_abs).fold(0.0, f64::max)
    }

    pub fn self_adjoint_residual(&self) -> f64 {
        (self - &self.star()).norm()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.self_adjoint_residual() <= tol
    }

    /// `max(‖uu* − 1‖, ‖u*u − 1‖)`.
    pub fn unitarity_residual(&self) -> f64 {
        self.blocks.iter().map(linalg::unitarity_residual).fold(0.0, f64::max)
    }

    pub fn ensure_unitary(&self, tol: f64) -> Result<()> {
        let residual = self.unitarity_residual();
        if residual <= tol {
            Ok(())
        } else {
            Err(Error::NotUnitary { residual })
        }
    }

    /// Block-diagonal embedding into `M_N(ℂ)`.
    pub fn embed(&self) -> CMat {
        let n: usize = self.blocks.iter().map(|b| b.nrows()).sum();
        let mut m = CMat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let k = b.nrows();
            m.view_mut((off, off), (k, k)).copy_from(b);
            off += k;
        }
        m
    }

    /// Inverse computed blockwise; `None` if some block is singular.
    pub fn inverse(&self) -> Option<Self> {
        let blocks: Option<Vec<CMat>> = self.blocks.iter().map(|b| b.clone().try_inverse()).collect();
        blocks.map(|blocks| Self { blocks })
    }

    /// Smallest singular value over all blocks.
    pub fn smallest_singular_value(&self) -> f64 {
        self.blocks.iter().map(linalg::smallest_singular_value).fold(f64::INFINITY, f64::min)
    }

    /// Exponential `exp(z·x)` of a self-adjoint `x`.
    pub fn exp_self_adjoint(&self, z: C64) -> Self {
        Self { blocks: self.blocks.iter().map(|b| linalg::hermitian_apply(b, |l| (z * l).exp())).collect() }
    }

    /// For self-adjoint `a` with `‖a‖ ≤ 1`, the unitary `a + i(1 − a²)^{1/2}`,
    /// whose real part `(u + u*)/2` is `a`.
    pub fn unitary_dilation(&self) -> Result<Self> {
        let residual = self.self_adjoint_residual();
        if residual > 1e-10 * self.norm().max(1.0) {
            return Err(Error::NotSelfAdjoint { residual });
        }
        if self.norm() > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!("norm {} exceeds 1", self.norm())));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| linalg::hermitian_apply(b, |l| c64(l, (1.0 - l * l).max(0.0).sqrt())))
            .collect();
        Ok(Self { blocks })
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl<'a> $tr<&'a AlgebraElement> for &'a AlgebraElement {
            type Output = AlgebraElement;
            fn $method(self, rhs: &'a AlgebraElement) -> AlgebraElement {
                assert_eq!(self.blocks.len(), rhs.blocks.len(), "block count mismatch");
                AlgebraElement {
                    blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $tr for AlgebraElement {
            type Output = AlgebraElement;
            fn $method(self, rhs: AlgebraElement) -> AlgebraElement {
                (&self).$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        AlgebraElement { blocks: self.blocks.iter().map(|b| -b).collect() }
    }
}

/// A linear functional, stored by its values `φ(b_j)` on the canonical basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Functional {
    pub coefficients: CVec,
}

impl Functional {
    pub fn evaluate(&self, spec: &AlgebraSpec, a: &AlgebraElement) -> C64 {
        let c = spec.coefficients(a);
        self.coefficients.iter().zip(c.iter()).map(|(f, x)| f * x).sum()
    }

    /// `max_j |φ(b_j^*) − conj(φ(b_j))|`.
    pub fn self_adjoint_residual(&self, spec: &AlgebraSpec) -> f64 {
        (0..spec.dim())
            .map(|j| {
                let (blk, r, s) = spec.basis_location(j);
                let adj = spec.basis_index(blk, s, r);
                (self.coefficients[adj] - self.coefficients[j].conj()).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, spec: &AlgebraSpec, tol: f64) -> bool {
        self.self_adjoint_residual(spec) <= tol
    }

    /// The element `d` with `φ = Θ^τ_d`.
    pub fn density(&self, spec: &AlgebraSpec) -> AlgebraElement {
        let mut d = spec.zero();
        for j in 0..spec.dim() {
            let (blk, r, s) = spec.basis_location(j);
            // φ(E_rs) = (w / n) d[s, r]
            d.blocks[blk][(s, r)] = self.coefficients[j] / spec.basis_tau_weight(j);
        }
        d
    }
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues, strictly decreasing.
    pub eigenvalues: Vec<f64>,
    /// Spectral projections matching `eigenvalues`.
    pub projections: Vec<AlgebraElement>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> AlgebraElement {
        let mut it = self.eigenvalues.iter().zip(&self.projections);
        let (l0, p0) = it.next().expect("nonempty decomposition");
        it.fold(p0.scale(c64(*l0, 0.0)), |acc, (l, p)| &acc + &p.scale(c64(*l, 0.0)))
    }
}

/// `a = Σ_j λ_j e_j` with `λ_1 > … > λ_m`. Eigenvalues closer than
/// `1e-8·‖a‖` are merged into one spectral projection.
pub fn spectral_decompose(a: &AlgebraElement) -> Result<SpectralDecomposition> {
    let norm = a.norm();
    let residual = a.self_adjoint_residual();
    if residual > 1e-10 * norm.max(1.0) {
        return Err(Error::NotSelfAdjoint { residual });
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    let eigs: Vec<linalg::HermitianEigen> = a.blocks.iter().map(linalg::hermitian_eigen).collect();
    for (blk, e) in eigs.iter().enumerate() {
        for (k, &l) in e.values.iter().enumerate() {
            pairs.push((l, blk, k));
        }
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let tol = SPECTRAL_CLUSTER_TOL * norm;
    let mut clusters: Vec<Vec<(f64, usize, usize)>> = Vec::new();
    for p in pairs {
        match clusters.last_mut() {
            Some(c) if c.last().expect("nonempty").0 - p.0 <= tol => c.push(p),
            _ => clusters.push(vec![p]),
        }
    }
    let dims: Vec<usize> = a.blocks.iter().map(|b| b.nrows()).collect();
    let mut eigenvalues = Vec::with_capacity(clusters.len());
    let mut projections = Vec::with_capacity(clusters.len());
    for c in clusters {
        let mean = c.iter().map(|p| p.0).sum::<f64>() / c.len() as f64;
        let mut proj = AlgebraElement { blocks: dims.iter().map(|&n| CMat::zeros(n, n)).collect() };
        for &(_, blk, k) in &c {
            let v = eigs[blk].vectors.column(k);
            proj.blocks[blk] += v * v.adjoint();
        }
        eigenvalues.push(mean);
        projections.push(proj);
    }
    Ok(SpectralDecomposition { eigenvalues, projections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&x| c64(x, 0.0))))
    }

    #[test]
    fn trace_of_identity_is_one() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        assert!((spec.trace_tau(&spec.identity()).unwrap() - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn trace_of_diag_2_4_is_3() {
        let spec = AlgebraSpec::full_matrix(2).unwrap();
        let a = spec.from_blocks(vec![diag(&[2.0, 4.0])]).unwrap();
        assert!((spec.trace_tau(&a).unwrap() - c64(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn trace_is_tracial() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let mut rng = stream(1, 0, 0);
        let a = spec.random_element(&mut rng);
        let b = spec.random_element(&mut rng);
        let lhs = spec.trace_tau(&(&a * &b)).unwrap();
        let rhs = spec.trace_tau(&(&b * &a)).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn trace_rejects_shape_mismatch() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let other = AlgebraSpec::new(&[2, 2]).unwrap();
        assert!(matches!(spec.trace_tau(&other.identity()), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn spec_validation() {
        assert!(AlgebraSpec::new(&[]).is_err());
        assert!(AlgebraSpec::new(&[2, 0]).is_err());
        assert!(AlgebraSpec::with_weights(&[2, 1], &[0.5, 0.6]).is_err());
        assert!(AlgebraSpec::with_weights(&[2, 1], &[0.3, 0.7]).is_ok());
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        assert_eq!(spec.dim(), 13);
        assert_eq!(spec.embedding_dim(), 5);
    }

    #[test]
    fn basis_roundtrip() {
        let spec = AlgebraSpec::new(&[3, 1, 2]).unwrap();
        for j in 0..spec.dim() {
            let (b, r, s) = spec.basis_location(j);
            assert_eq!(spec.basis_index(b, r, s), j);
        }
        assert_eq!(spec.basis_location(9), (1, 0, 0));
    }

    #[test]
    fn spectral_identity() {
        let spec = AlgebraSpec::new(&[2, 2]).unwrap();
        let sd = spectral_decompose(&spec.identity()).unwrap();
        assert_eq!(sd.eigenvalues.len(), 1);
        assert!((sd.eigenvalues[0] - 1.0).abs() < 1e-15);
        assert!((&sd.projections[0] - &spec.identity()).norm() < 1e-14);
    }

    #[test]
    fn spectral_diag_1_2() {
        let spec = AlgebraSpec::full_matrix(2).unwrap();
        let a = spec.from_blocks(vec![diag(&[1.0, 2.0])]).unwrap();
        let sd = spectral_decompose(&a).unwrap();
        assert_eq!(sd.eigenvalues.len(), 2);
        assert!((sd.eigenvalues[0] - 2.0).abs() < 1e-14 && (sd.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((sd.projections[0].block(0) - diag(&[0.0, 1.0])).norm() < 1e-14);
        assert!((sd.projections[1].block(0) - diag(&[1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn spectral_rejects_non_self_adjoint() {
        let spec = AlgebraSpec::full_matrix(2).unwrap();
        let mut a = spec.zero();
        a.block_mut(0)[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(spectral_decompose(&a), Err(Error::NotSelfAdjoint { .. })));
    }

    #[test]
    fn spectral_random_reconstructs() {
        let spec = AlgebraSpec::full_matrix(4).unwrap();
        let a = spec.random_self_adjoint(&mut stream(3, 0, 0));
        let sd = spectral_decompose(&a).unwrap();
        assert!((&sd.reconstruct() - &a).norm() < 1e-10);
        let sum = sd.projections.iter().fold(spec.zero(), |acc, p| &acc + p);
        assert!((&sum - &spec.identity()).norm() < 1e-10);
        for (i, p) in sd.projections.iter().enumerate() {
            for (j, q) in sd.projections.iter().enumerate() {
                let expect = if i == j { p.clone() } else { spec.zero() };
                assert!((&(p * q) - &expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn commutant_of_identity_is_everything() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        assert_eq!(spec.commutant(&[spec.identity()]).unwrap().len(), 13);
    }

    #[test]
    fn commutant_of_distinct_diagonal_is_diagonal() {
        let spec = AlgebraSpec::full_matrix(2).unwrap();
        let a = spec.from_blocks(vec![diag(&[1.0, 2.0])]).unwrap();
        let basis = spec.commutant(&[a]).unwrap();
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!(b.block(0)[(0, 1)].norm() < 1e-12 && b.block(0)[(1, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn commutant_dimension_follows_multiplicities() {
        // Eigenvalue multiplicities (2, 1) in M_3: dimension 2² + 1² = 5.
        let spec = AlgebraSpec::full_matrix(3).unwrap();
        let u = spec.haar_unitary(11);
        let d = spec.from_blocks(vec![diag(&[1.0, 1.0, 3.0])]).unwrap();
        let a = &(&u * &d) * &u.star();
        let basis = spec.commutant(std::slice::from_ref(&a)).unwrap();
        assert_eq!(basis.len(), 5);
        for b in &basis {
            assert!((&(&a * b) - &(b * &a)).norm() < 1e-10);
        }
    }

    #[test]
    fn commutant_basis_is_tau_orthonormal() {
        let spec = AlgebraSpec::new(&[2, 2]).unwrap();
        let d = spec.random_density(&mut stream(5, 0, 0), Some(&[1, 2]));
        let basis = spec.commutant(&[d]).unwrap();
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((spec.tau_inner(a, b) - c64(expect, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn centralizer_of_trace_is_everything() {
        let spec = AlgebraSpec::new(&[2, 3]).unwrap();
        let tau = spec.theta_tau(&spec.identity()).unwrap();
        assert_eq!(spec.centralizer(&tau).unwrap().len(), spec.dim());
    }

    #[test]
    fn centralizer_of_corner_state() {
        // φ(a) = a_11 on M_n: centralizer ≅ ℂ ⊕ M_{n−1}.
        for n in 2..=5 {
            let spec = AlgebraSpec::full_matrix(n).unwrap();
            let mut coeffs = CVec::zeros(spec.dim());
            coeffs[0] = c64(1.0, 0.0);
            let basis = spec.centralizer(&Functional { coefficients: coeffs }).unwrap();
            assert_eq!(basis.len(), 1 + (n - 1) * (n - 1));
        }
    }

    #[test]
    fn centralizer_matches_commutant_of_density() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let d = spec.random_density(&mut stream(9, 0, 0), None);
        let phi = spec.theta_tau(&d).unwrap();
        let c1 = spec.centralizer(&phi).unwrap();
        let c2 = spec.commutant(&[d]).unwrap();
        let s = linalg::max_principal_sine(&spec.tau_frame(&c1), &spec.tau_frame(&c2));
        assert!(s < 1e-9, "principal sine {s}");
    }

    #[test]
    fn theta_of_identity_is_tau() {
        let spec = AlgebraSpec::new(&[2, 1]).unwrap();
        let tau = spec.theta_tau(&spec.identity()).unwrap();
        let mut rng = stream(2, 0, 0);
        for _ in 0..5 {
            let b = spec.random_element(&mut rng);
            assert!((tau.evaluate(&spec, &b) - spec.trace_tau(&b).unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn theta_equivariance() {
        let spec = AlgebraSpec::full_matrix(3).unwrap();
        let mut rng = stream(4, 0, 0);
        let a = spec.random_element(&mut rng);
        let u = spec.random_unitary(&mut rng);
        let lhs = spec.theta_tau(&(&(&u * &a) * &u.star())).unwrap();
        let rhs = spec.theta_tau(&a).unwrap();
        let mut worst: f64 = 0.0;
        for b in spec.basis() {
            let moved = &(&u.star() * &b) * &u;
            worst = worst.max((lhs.evaluate(&spec, &b) - rhs.evaluate(&spec, &moved)).norm());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn structure_checks_pass_on_random_density() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let d = spec.random_density(&mut stream(11, 0, 0), None);
        for c in structure_checks(&spec, &d, 5, 1).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn functional_density_roundtrip() {
        let spec = AlgebraSpec::with_weights(&[2, 3], &[0.25, 0.75]).unwrap();
        let d = spec.random_element(&mut stream(6, 0, 0));
        let phi = spec.theta_tau(&d).unwrap();
        assert!((&phi.density(&spec) - &d).norm() < 1e-12);
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let spec = AlgebraSpec::new(&[4, 2]).unwrap();
        let u = spec.haar_unitary(123);
        assert!(u.unitarity_residual() < 1e-12);
        assert_eq!(u, spec.haar_unitary(123));
        assert_ne!(u, spec.haar_unitary(124));
    }

    #[test]
    fn haar_second_moment() {
        // E|u_11|² = 1/2 on U(2); |u_11|² is uniform on [0, 1], σ² = 1/12.
        let spec = AlgebraSpec::full_matrix(2).unwrap();
        let samples = 1000;
        let mean = (0..samples).map(|s| spec.haar_unitary(s).block(0)[(0, 0)].norm_sqr()).sum::<f64>() / samples as f64;
        let sigma = (1.0 / 12.0 / samples as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn unitary_dilation_recovers_real_part() {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let h = spec.random_self_adjoint(&mut stream(8, 0, 0));
        let a = h.scale(c64(1.0 / (h.norm() * 1.01), 0.0));
        let u = a.unitary_dilation().unwrap();
        assert!(u.unitarity_residual() < 1e-10);
        let re = (&u + &u.star()).scale(c64(0.5, 0.0));
        assert!((&re - &a).norm() < 1e-10);
    }

    #[test]
    fn mult_matrices_agree_with_products() {
        let spec = AlgebraSpec::new(&[2, 3]).unwrap();
        let mut rng = stream(10, 0, 0);
        let a = spec.random_element(&mut rng);
        let x = spec.random_element(&mut rng);
        let left = spec.left_mult_matrix(&a) * spec.coefficients(&x);
        let right = spec.right_mult_matrix(&a) * spec.coefficients(&x);
        assert!((left - spec.coefficients(&(&a * &x))).norm() < 1e-12);
        assert!((right - spec.coefficients(&(&x * &a))).norm() < 1e-12);
    }
}
