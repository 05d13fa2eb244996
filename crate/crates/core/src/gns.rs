//! GNS representations, compressions to subalgebras and conditional
//! expectations.
//!
//! The GNS space of a state `φ` is realized concretely as `ℂ^{dim H}`: the
//! Gram matrix `G_ij = φ(b_i^* b_j)` over the canonical basis is
//! diagonalized, eigenvectors with eigenvalue above `1e-10·λ_max` span the
//! quotient by the null space, and they are ordered by descending eigenvalue.

use rand::Rng;

use crate::algebra::{spectral_decompose, AlgebraElement, AlgebraSpec, Functional};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, CVec, C64};
use crate::par::{self, Execution};
use crate::report::Check;
use crate::rng;

/// Relative cutoff on Gram eigenvalues defining the GNS null space.
pub const GNS_RANK_TOL: f64 = 1e-10;
/// Tolerance for the subalgebra closure tests in [`sub_gns`].
pub const SUBALGEBRA_TOL: f64 = 1e-9;
/// Pass threshold for the conditional-expectation residuals.
pub const EXPECTATION_TOL: f64 = 1e-8;

/// A state `φ(b) = τ(d b)` given by its density `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    density: AlgebraElement,
    functional: Functional,
}

impl State {
    /// Validates `d = d*`, `d ≥ 0` (to `-1e-10`) and `τ(d) = 1` (to `1e-10`).
    pub fn new(spec: &AlgebraSpec, density: AlgebraElement) -> Result<Self> {
        spec.check(&density)?;
        let residual = density.self_adjoint_residual();
        if residual > 1e-10 * density.norm().max(1.0) {
            return Err(Error::InvalidState(format!("density is not self-adjoint ({residual:.3e})")));
        }
        let min_eig = density
            .blocks()
            .iter()
            .map(|b| linalg::hermitian_eigen(b).values.last().copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-10 {
            return Err(Error::InvalidState(format!("density has negative eigenvalue {min_eig:.3e}")));
        }
        let t = spec.trace_tau(&density)?;
        if (t - c64(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::InvalidState(format!("τ(d) = {t}, expected 1")));
        }
        let functional = spec.theta_tau(&density)?;
        Ok(Self { density, functional })
    }

    /// The trace `τ` itself (`d = 1`).
    pub fn tracial(spec: &AlgebraSpec) -> Self {
        Self::new(spec, spec.identity()).expect("identity is a density")
    }

    /// `φ(a) = a_11` on `M_n(ℂ)`, i.e. `d = n·p` with `p = E_11`.
    pub fn corner(n: usize) -> Result<(AlgebraSpec, Self)> {
        let spec = AlgebraSpec::full_matrix(n)?;
        let mut d = spec.zero();
        d.block_mut(0)[(0, 0)] = c64(n as f64, 0.0);
        let state = Self::new(&spec, d)?;
        Ok((spec, state))
    }

    /// Builds the state from a functional, which must be positive and unital.
    pub fn from_functional(spec: &AlgebraSpec, phi: &Functional) -> Result<Self> {
        Self::new(spec, phi.density(spec))
    }

    pub fn density(&self) -> &AlgebraElement {
        &self.density
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn evaluate(&self, spec: &AlgebraSpec, a: &AlgebraElement) -> C64 {
        self.functional.evaluate(spec, a)
    }

    /// Support projection of the density.
    pub fn support(&self) -> AlgebraElement {
        let sd = spectral_decompose(&self.density).expect("density is self-adjoint");
        let tol = 1e-8 * self.density.norm();
        let dims: Vec<usize> = self.density.blocks().iter().map(|b| b.nrows()).collect();
        let zero = AlgebraElement::from_blocks_unchecked(dims.iter().map(|&n| CMat::zeros(n, n)).collect());
        sd.eigenvalues
            .iter()
            .zip(&sd.projections)
            .filter(|(l, _)| **l > tol)
            .fold(zero, |acc, (_, p)| &acc + p)
    }
}

/// The GNS representation of `(A, φ)`.
#[derive(Clone, Debug)]
pub struct GnsData {
    spec: AlgebraSpec,
    state: State,
    gram_eigenvalues: Vec<f64>,
    /// `dim A × dim H`, orthonormal eigenvectors of the Gram matrix.
    basis_coeffs: CMat,
    /// `Λ^{1/2} V^†`: canonical coefficients to GNS coordinates.
    to_h: CMat,
    /// `V Λ^{-1/2}`: a right inverse of `to_h`.
    from_h: CMat,
    cyclic: CVec,
}

/// Gram matrix `G_ij = φ(b_i^* b_j)` over the canonical basis.
pub fn gns_gram(spec: &AlgebraSpec, phi: &Functional) -> CMat {
    let d = spec.dim();
    let mut g = CMat::zeros(d, d);
    for i in 0..d {
        let (bi, r, s) = spec.basis_location(i);
        for j in 0..d {
            let (bj, rp, sp) = spec.basis_location(j);
            // E_rs^* E_r's' = E_sr E_r's' = δ_{r r'} E_{s s'}
            if bi == bj && r == rp {
                g[(i, j)] = phi.coefficients[spec.basis_index(bi, s, sp)];
            }
        }
    }
    g
}

pub fn gns_build(spec: &AlgebraSpec, phi: &State) -> Result<GnsData> {
    spec.check(phi.density())?;
    let gram = gns_gram(spec, phi.functional());
    let eig = linalg::hermitian_eigen(&gram);
    let top = eig.values.first().copied().unwrap_or(0.0);
    if !(top > 0.0) {
        return Err(Error::InvalidState("Gram matrix vanishes".into()));
    }
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > GNS_RANK_TOL * top).collect();
    let dim_h = keep.len();
    let d = spec.dim();
    let mut basis_coeffs = CMat::zeros(d, dim_h);
    let mut values = Vec::with_capacity(dim_h);
    for (k, &i) in keep.iter().enumerate() {
        basis_coeffs.set_column(k, &eig.vectors.column(i));
        values.push(eig.values[i]);
    }
    let mut to_h = basis_coeffs.adjoint();
    let mut from_h = basis_coeffs.clone();
    for (k, &l) in values.iter().enumerate() {
        let s = l.sqrt();
        for j in 0..d {
            to_h[(k, j)] *= s;
            from_h[(j, k)] /= s;
        }
    }
    let cyclic = &to_h * spec.coefficients(&spec.identity());
    Ok(GnsData { spec: spec.clone(), state: phi.clone(), gram_eigenvalues: values, basis_coeffs, to_h, from_h, cyclic })
}

impl GnsData {
    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn dim_h(&self) -> usize {
        self.basis_coeffs.ncols()
    }

    pub fn gram_eigenvalues(&self) -> &[f64] {
        &self.gram_eigenvalues
    }

    pub fn basis_coeffs(&self) -> &CMat {
        &self.basis_coeffs
    }

    /// The image of `a` in `H`.
    pub fn image(&self, a: &AlgebraElement) -> CVec {
        &self.to_h * self.spec.coefficients(a)
    }

    /// `h_0`, the image of `1`.
    pub fn cyclic_vector(&self) -> &CVec {
        &self.cyclic
    }

    /// `ρ(a)`: left multiplication by `a`, pushed through the quotient.
    pub fn rho(&self, a: &AlgebraElement) -> CMat {
        &self.to_h * (self.spec.left_mult_matrix(a) * &self.from_h)
    }

    /// GNS inner product `⟨x, y⟩ = y^† x`.
    pub fn inner(x: &CVec, y: &CVec) -> C64 {
        y.dotc(x)
    }

    /// Residuals of the unital *-homomorphism and inner-product identities on
    /// `samples` random inputs.
    pub fn verify(&self, samples: usize, seed: u64, exec: Execution) -> Vec<Check> {
        let spec = &self.spec;
        let n = self.dim_h();
        let unital = linalg::op_norm(&(self.rho(&spec.identity()) - CMat::identity(n, n)));
        let rows = par::map_indexed(exec, samples, |i| {
            let mut rng = rng::stream(seed, rng::tags::INPUTS, i as u32);
            let a = spec.random_element(&mut rng);
            let b = spec.random_element(&mut rng);
            let ra = self.rho(&a);
            let rb = self.rho(&b);
            let mult = linalg::op_norm(&(self.rho(&(&a * &b)) - &ra * &rb));
            let star = linalg::op_norm(&(self.rho(&a.star()) - ra.adjoint()));
            let lhs = Self::inner(&self.image(&a), &self.image(&b));
            let rhs = self.state.evaluate(spec, &(&b.star() * &a));
            (mult, star, (lhs - rhs).norm())
        });
        let cyclic_rank = {
            let mut m = CMat::zeros(n, spec.dim());
            for j in 0..spec.dim() {
                m.set_column(j, &(self.rho(&spec.basis_element(j)) * &self.cyclic));
            }
            linalg::numerical_rank(&m, GNS_RANK_TOL.sqrt())
        };
        vec![
            Check::at_most("rho_unital", unital, 1e-10),
            Check::at_most("rho_multiplicative", par::max_of(rows.iter().map(|r| r.0)), 1e-10),
            Check::at_most("rho_star", par::max_of(rows.iter().map(|r| r.1)), 1e-10),
            Check::at_most("inner_product_reproduces_state", par::max_of(rows.iter().map(|r| r.2)), 1e-10),
            Check::equals("cyclic_vector_spans", cyclic_rank, n),
        ]
    }
}

/// The GNS space `H_φ` of `φ|_B`, realized inside `H`.
#[derive(Clone, Debug)]
pub struct SubGnsData {
    parent: GnsData,
    b_basis: Vec<AlgebraElement>,
    /// Isometry `H_φ → H` (`dim H × dim H_φ`).
    embed: CMat,
    projection: CMat,
}

/// Compresses the GNS data of `A` to a unital *-subalgebra `B` spanned by
/// `b_basis`.
pub fn sub_gns(gns: &GnsData, b_basis: &[AlgebraElement]) -> Result<SubGnsData> {
    let spec = gns.spec();
    let basis = spec.tau_orthonormalize(b_basis)?;
    check_subalgebra(spec, &basis)?;
    let mut images = CMat::zeros(gns.dim_h(), basis.len());
    for (k, b) in basis.iter().enumerate() {
        images.set_column(k, &gns.image(b));
    }
    // Singular values of the image matrix are square roots of Gram eigenvalues.
    let embed = linalg::range_basis(&images, GNS_RANK_TOL.sqrt());
    let projection = &embed * embed.adjoint();
    Ok(SubGnsData { parent: gns.clone(), b_basis: basis, embed, projection })
}

fn check_subalgebra(spec: &AlgebraSpec, basis: &[AlgebraElement]) -> Result<()> {
    let one = spec.identity();
    let dist = spec.distance_to_span(basis, &one);
    if dist > SUBALGEBRA_TOL {
        return Err(Error::NotSubalgebra(format!("unit is at distance {dist:.3e} from the span")));
    }
    for (i, a) in basis.iter().enumerate() {
        let dist = spec.distance_to_span(basis, &a.star());
        if dist > SUBALGEBRA_TOL * a.norm().max(1.0) {
            return Err(Error::NotSubalgebra(format!("adjoint of basis element {i} leaves the span ({dist:.3e})")));
        }
        for (j, b) in basis.iter().enumerate() {
            let p = a * b;
            let dist = spec.distance_to_span(basis, &p);
            if dist > SUBALGEBRA_TOL * p.norm().max(1.0) {
                return Err(Error::NotSubalgebra(format!("product of basis elements {i}, {j} leaves the span ({dist:.3e})")));
            }
        }
    }
    Ok(())
}

impl SubGnsData {
    pub fn parent(&self) -> &GnsData {
        &self.parent
    }

    pub fn spec(&self) -> &AlgebraSpec {
        self.parent.spec()
    }

    /// τ-orthonormal basis of `B`.
    pub fn b_basis(&self) -> &[AlgebraElement] {
        &self.b_basis
    }

    pub fn dim_h_phi(&self) -> usize {
        self.embed.ncols()
    }

    pub fn embed(&self) -> &CMat {
        &self.embed
    }

    /// Orthogonal projection of `H` onto `H_φ`.
    pub fn projection(&self) -> &CMat {
        &self.projection
    }

    /// `ρ_φ(b)` for `b ∈ B`: the compression `embed^† ρ(b) embed`.
    pub fn rho_phi(&self, b: &AlgebraElement) -> CMat {
        self.embed.adjoint() * self.parent.rho(b) * &self.embed
    }

    pub fn distance_to_b(&self, a: &AlgebraElement) -> f64 {
        self.spec().distance_to_span(&self.b_basis, a)
    }

    /// Random element of `U_B`: `exp(i h)` for a random self-adjoint `h ∈ B`.
    pub fn random_b_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let spec = self.spec();
        let mut h = spec.zero();
        for b in &self.b_basis {
            h = &h + &b.scale(rng::complex_normal(rng));
        }
        let h = (&h + &h.star()).scale(c64(0.5, 0.0));
        h.exp_self_adjoint(c64(0.0, 1.0))
    }

    /// Projection, diagram and homomorphism residuals.
    pub fn verify(&self, samples: usize, seed: u64, exec: Execution) -> Vec<Check> {
        let p = &self.projection;
        let idem = linalg::op_norm(&(p * p - p));
        let herm = linalg::op_norm(&(p - p.adjoint()));
        let diagram = par::max_of(par::map_indexed(exec, self.b_basis.len(), |k| {
            let b = &self.b_basis[k];
            let lhs = p * self.parent.rho(b) * &self.embed;
            let rhs = &self.embed * self.rho_phi(b);
            linalg::op_norm(&(lhs - rhs))
        }));
        let mult = par::max_of(par::map_indexed(exec, samples, |i| {
            let mut rng = rng::stream(seed, rng::tags::INPUTS, 10_000 + i as u32);
            let x = self.random_b_element(&mut rng);
            let y = self.random_b_element(&mut rng);
            linalg::op_norm(&(self.rho_phi(&(&x * &y)) - self.rho_phi(&x) * self.rho_phi(&y)))
        }));
        vec![
            Check::at_most("projection_idempotent", idem, 1e-12),
            Check::at_most("projection_self_adjoint", herm, 1e-12),
            Check::at_most("diagram_commutes", diagram, 1e-10),
            Check::at_most("rho_phi_multiplicative", mult, 1e-10),
        ]
    }

    pub fn random_b_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        let mut x = self.spec().zero();
        for b in &self.b_basis {
            x = &x + &b.scale(rng::complex_normal(rng));
        }
        x
    }
}

/// A conditional expectation `E : A → B`, as a matrix on canonical
/// coefficients.
#[derive(Clone, Debug)]
pub struct CondExpectation {
    pub matrix: CMat,
    pub range_basis: Vec<AlgebraElement>,
}

impl CondExpectation {
    /// User-supplied map; only verified, never assumed correct.
    pub fn from_matrix(spec: &AlgebraSpec, matrix: CMat, range_basis: Vec<AlgebraElement>) -> Result<Self> {
        if matrix.shape() != (spec.dim(), spec.dim()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}×{0}", spec.dim()),
                found: format!("{}×{}", matrix.nrows(), matrix.ncols()),
            });
        }
        Ok(Self { matrix, range_basis: spec.tau_orthonormalize(&range_basis)? })
    }

    /// Builds the matrix from the action of `f` on canonical basis elements.
    pub fn from_fn(spec: &AlgebraSpec, range_basis: Vec<AlgebraElement>, f: impl Fn(&AlgebraElement) -> AlgebraElement) -> Self {
        let d = spec.dim();
        let mut m = CMat::zeros(d, d);
        for k in 0..d {
            m.set_column(k, &spec.coefficients(&f(&spec.basis_element(k))));
        }
        Self { matrix: m, range_basis }
    }

    /// `E = id` onto `B = A`.
    pub fn identity(spec: &AlgebraSpec) -> Self {
        let d = spec.dim();
        Self { matrix: CMat::identity(d, d), range_basis: spec.tau_orthonormalize(&spec.basis()).expect("basis") }
    }

    /// `E(a) = φ(a)·1` onto `B = ℂ1`.
    pub fn scalar(spec: &AlgebraSpec, phi: &State) -> Self {
        let one = spec.identity();
        Self::from_fn(spec, vec![one.clone()], |a| one.scale(phi.evaluate(spec, a)))
    }

    pub fn apply(&self, spec: &AlgebraSpec, a: &AlgebraElement) -> AlgebraElement {
        spec.from_coefficients(&(&self.matrix * spec.coefficients(a)))
    }
}

/// The pinching `E(a) = Σ_j f_j a f_j` over the spectral projections of the
/// density (the kernel projection included). Its range is `{d}' = A^φ`.
pub fn centralizer_expectation(spec: &AlgebraSpec, phi: &State) -> Result<CondExpectation> {
    let sd = spectral_decompose(phi.density())?;
    let range = spec.commutant(std::slice::from_ref(phi.density()))?;
    let projections = sd.projections;
    Ok(CondExpectation::from_fn(spec, range, |a| {
        projections.iter().fold(spec.zero(), |acc, f| &acc + &(&(f * a) * f))
    }))
}

/// Maximal residuals of the conditional-expectation identities over sampled
/// inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationResiduals {
    pub self_adjoint: f64,
    /// Minimum eigenvalue of `E(a*a) − E(a)*E(a)` (should be ≥ 0).
    pub schwarz_min_eigenvalue: f64,
    pub bimodule: f64,
    pub state_compatibility: f64,
    pub idempotency: f64,
    pub unitality: f64,
    /// `max (‖E(a)‖ − ‖a‖) / ‖a‖`.
    pub norm_excess: f64,
    /// `max φ(E(a)*E(a)) − φ(a*a)`.
    pub gns_continuity: f64,
    pub range_distance: f64,
}

impl ExpectationResiduals {
    pub fn checks(&self, tol: f64) -> Vec<Check> {
        vec![
            Check::at_most("self_adjoint", self.self_adjoint, tol),
            Check::at_least("schwarz_min_eigenvalue", self.schwarz_min_eigenvalue, -tol),
            Check::at_most("bimodule", self.bimodule, tol),
            Check::at_most("state_compatibility", self.state_compatibility, tol),
            Check::at_most("idempotent", self.idempotency, tol),
            Check::at_most("unital", self.unitality, tol),
            Check::at_most("norm_one", self.norm_excess, tol),
            Check::at_most("gns_continuity", self.gns_continuity, tol),
            Check::at_most("range_in_b", self.range_distance, tol),
        ]
    }
}

pub fn verify_expectation(
    spec: &AlgebraSpec,
    e: &CondExpectation,
    phi: &State,
    samples: usize,
    seed: u64,
    exec: Execution,
) -> ExpectationResiduals {
    let apply = |a: &AlgebraElement| e.apply(spec, a);
    let one = spec.identity();
    let unitality = (&apply(&one) - &one).norm();
    let rows = par::map_indexed(exec, samples, |i| {
        let mut rng = rng::stream(seed, rng::tags::INPUTS, i as u32);
        let a = spec.random_element(&mut rng);
        let combo = |rng: &mut rng::UnitRng| {
            e.range_basis.iter().fold(spec.zero(), |acc, b| &acc + &b.scale(rng::complex_normal(rng)))
        };
        let b1 = combo(&mut rng);
        let b2 = combo(&mut rng);
        let ea = apply(&a);
        let self_adjoint = (&apply(&a.star()) - &ea.star()).norm();
        let gap = &apply(&(&a.star() * &a)) - &(&ea.star() * &ea);
        let schwarz = gap
            .blocks()
            .iter()
            .map(|b| linalg::hermitian_eigen(b).values.last().copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min);
        let bimodule = (&apply(&(&(&b1 * &a) * &b2)) - &(&(&b1 * &ea) * &b2)).norm();
        let compat = (phi.evaluate(spec, &ea) - phi.evaluate(spec, &a)).norm();
        let idem = (&apply(&ea) - &ea).norm();
        let norm_excess = (ea.norm() - a.norm()) / a.norm();
        let continuity = (phi.evaluate(spec, &(&ea.star() * &ea)) - phi.evaluate(spec, &(&a.star() * &a))).re;
        let range = spec.distance_to_span(&e.range_basis, &ea);
        [self_adjoint, schwarz, bimodule, compat, idem, norm_excess, continuity, range]
    });
    let col_max = |k: usize| par::max_of(rows.iter().map(|r| r[k]));
    ExpectationResiduals {
        self_adjoint: col_max(0),
        schwarz_min_eigenvalue: rows.iter().map(|r| r[1]).fold(f64::INFINITY, f64::min),
        bimodule: col_max(2),
        state_compatibility: col_max(3),
        idempotency: col_max(4),
        unitality,
        norm_excess: rows.iter().map(|r| r[5]).fold(f64::NEG_INFINITY, f64::max),
        gns_continuity: rows.iter().map(|r| r[6]).fold(f64::NEG_INFINITY, f64::max),
        range_distance: col_max(7),
    }
}

/// Dimension of the commutant of `ρ(A)` inside `B(H)`.
///
/// `ρ(A)` is generated as a *-algebra by the units `E_rr` and `E_{r,r+1}` of
/// each block, so it suffices to commute with their images. The null space of
/// `X ↦ ([ρ(g), X])_g` is read off the normal matrix `Σ_g K_g^† K_g`, whose
/// eigenvalues are squared singular values; the cutoff is `1e-10` relative.
pub fn representation_commutant_dim(gns: &GnsData) -> usize {
    let spec = gns.spec();
    let n = gns.dim_h();
    let mut gens = Vec::new();
    for (blk, &m) in spec.block_dims().iter().enumerate() {
        for r in 0..m {
            gens.push(spec.basis_element(spec.basis_index(blk, r, r)));
            if r + 1 < m {
                gens.push(spec.basis_element(spec.basis_index(blk, r, r + 1)));
            }
        }
    }
    let id = CMat::identity(n, n);
    let mut normal = CMat::zeros(n * n, n * n);
    for g in &gens {
        let rg = gns.rho(g);
        // Row-major vec: (ρX) ↦ ρ ⊗ I, (Xρ) ↦ I ⊗ ρ^T.
        let k = rg.kronecker(&id) - id.kronecker(&rg.transpose());
        normal += k.adjoint() * &k;
    }
    let eig = linalg::hermitian_eigen(&normal);
    let top = eig.values.first().copied().unwrap_or(0.0);
    eig.values.iter().filter(|&&l| l <= 1e-10 * top).count()
}

/// `φ` is pure iff its GNS representation is irreducible, i.e. the commutant
/// of `ρ(A)` is one-dimensional.
pub fn is_pure(spec: &AlgebraSpec, phi: &State) -> Result<bool> {
    let gns = gns_build(spec, phi)?;
    Ok(representation_commutant_dim(&gns) == 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purity {
    Pure,
    NotPure,
    /// Uniqueness of the extension could not be established.
    NotDetermined,
}

/// Purity of the extension `φ_0 ∘ E` of a state `φ_0` given on `B`.
///
/// Purity of the extension of a pure state on `B` is only concluded when the
/// extension is unique; that is decided here only in the case `B = A`, where
/// `E` is the identity and the extension is `φ_0` itself. Every other case is
/// reported as [`Purity::NotDetermined`].
pub fn extension_purity(spec: &AlgebraSpec, e: &CondExpectation, phi0: &State) -> Result<Purity> {
    if e.range_basis.len() != spec.dim() {
        return Ok(Purity::NotDetermined);
    }
    let coeffs = e.matrix.transpose() * &phi0.functional().coefficients;
    let extended = State::from_functional(spec, &Functional { coefficients: coeffs })?;
    Ok(if is_pure(spec, &extended)? { Purity::Pure } else { Purity::NotPure })
}
