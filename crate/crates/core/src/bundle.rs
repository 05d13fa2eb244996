//! The homogeneous bundle `U_A ×_{U_B} H_φ`, its reproducing kernel and the
//! realization of the GNS space as a space of sections.
//!
//! Points of the base `U_A/U_B` are carried by explicit representatives
//! `u ∈ U_A`; a fiber vector is a pair `(u, f)` with `f ∈ H_φ` in the frame of
//! `u`, and `(uv, f) ~ (u, ρ_φ(v) f)` for `v ∈ U_B`. Sections are only ever
//! represented on finite point sets, as spans `Θ = Σ c_j K(·, t_j) ξ_j`, and
//! the completed space is the quotient of coefficient vectors by the null
//! space of their Gram matrix.

use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::gns::SubGnsData;
use crate::linalg::{self, c64, CMat, CVec, C64};
use crate::par::{self, Execution};
use crate::report::Check;
use crate::rng;

/// Unitarity tolerance for representatives.
pub const UNITARY_TOL: f64 = 1e-10;
/// Tolerance of [`fiber_equal`].
pub const FIBER_TOL: f64 = 1e-9;
/// Relative Gram eigenvalue cutoff for the quotient norm and rank.
pub const GRAM_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct FiberVector {
    pub rep_unitary: AlgebraElement,
    pub fiber_coeffs: CVec,
}

impl FiberVector {
    pub fn new(rep_unitary: AlgebraElement, fiber_coeffs: CVec) -> Result<Self> {
        rep_unitary.ensure_unitary(UNITARY_TOL)?;
        Ok(Self { rep_unitary, fiber_coeffs })
    }
}

/// Residual of the equivalence `x ~ y`: `None` when `v = y.u^* x.u` is not in
/// `U_B`, otherwise `‖x.f − ρ_φ(v^{-1}) y.f‖`.
pub fn fiber_distance(sub: &SubGnsData, x: &FiberVector, y: &FiberVector) -> Option<f64> {
    if x.rep_unitary == y.rep_unitary {
        return Some((&x.fiber_coeffs - &y.fiber_coeffs).norm());
    }
    let v = &y.rep_unitary.star() * &x.rep_unitary;
    if sub.distance_to_b(&v) >= FIBER_TOL || v.unitarity_residual() >= FIBER_TOL {
        return None;
    }
    Some((&x.fiber_coeffs - sub.rho_phi(&v.star()) * &y.fiber_coeffs).norm())
}

pub fn fiber_equal(sub: &SubGnsData, x: &FiberVector, y: &FiberVector) -> bool {
    fiber_distance(sub, x, y).is_some_and(|d| d < FIBER_TOL)
}

/// `u' · [(u, f)] = [(u'u, f)]`.
pub fn group_act(uprime: &AlgebraElement, x: &FiberVector) -> Result<FiberVector> {
    uprime.ensure_unitary(UNITARY_TOL)?;
    Ok(FiberVector { rep_unitary: uprime * &x.rep_unitary, fiber_coeffs: x.fiber_coeffs.clone() })
}

/// Evaluation at the coset of `u`: `h ↦ embed^† ρ(u)^† h`, as a
/// `dim H_φ × dim H` matrix.
pub fn ev(sub: &SubGnsData, u: &AlgebraElement) -> CMat {
    sub.embed().adjoint() * sub.parent().rho(u).adjoint()
}

/// `ι(h)(u U_B)`, in the frame of `u`.
pub fn realization_iota(sub: &SubGnsData, h: &CVec, u: &AlgebraElement) -> Result<FiberVector> {
    u.ensure_unitary(UNITARY_TOL)?;
    if h.len() != sub.parent().dim_h() {
        return Err(Error::LengthMismatch(format!("vector has length {}, H has dimension {}", h.len(), sub.parent().dim_h())));
    }
    Ok(FiberVector { rep_unitary: u.clone(), fiber_coeffs: ev(sub, u) * h })
}

/// `K(u_1 U_B, u_2 U_B)` in the frames of `u_2` (source) and `u_1` (target).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelOperator {
    pub matrix: CMat,
}

pub fn kernel_eval(sub: &SubGnsData, u1: &AlgebraElement, u2: &AlgebraElement) -> Result<KernelOperator> {
    u1.ensure_unitary(UNITARY_TOL)?;
    u2.ensure_unitary(UNITARY_TOL)?;
    Ok(kernel_unchecked(sub, u1, u2))
}

fn kernel_unchecked(sub: &SubGnsData, u1: &AlgebraElement, u2: &AlgebraElement) -> KernelOperator {
    let e = sub.embed();
    KernelOperator { matrix: e.adjoint() * sub.parent().rho(&(&u1.star() * u2)) * e }
}

/// Kernel columns `K(·, t_j) ξ_j` and their Gram matrix.
#[derive(Clone, Debug)]
pub struct RkhsData {
    pub points: Vec<AlgebraElement>,
    pub vectors: Vec<CVec>,
    /// `G_lj = ⟨K(t_l, t_j) ξ_j, ξ_l⟩`.
    pub gram: CMat,
    pub min_eigenvalue: f64,
    pub gram_norm: f64,
    eig: linalg::HermitianEigen,
}

pub fn kernel_gram(sub: &SubGnsData, points: &[AlgebraElement], vectors: &[CVec], exec: Execution) -> Result<RkhsData> {
    if points.is_empty() || points.len() != vectors.len() {
        return Err(Error::LengthMismatch(format!("{} points and {} vectors", points.len(), vectors.len())));
    }
    for u in points {
        u.ensure_unitary(UNITARY_TOL)?;
    }
    let k = sub.dim_h_phi();
    if let Some(v) = vectors.iter().find(|v| v.len() != k) {
        return Err(Error::LengthMismatch(format!("fiber vector of length {}, fiber dimension {k}", v.len())));
    }
    let n = points.len();
    let rows = par::map_indexed(exec, n, |l| {
        (0..n)
            .map(|j| vectors[l].dotc(&(kernel_unchecked(sub, &points[l], &points[j]).matrix * &vectors[j])))
            .collect::<Vec<C64>>()
    });
    let gram = CMat::from_fn(n, n, |l, j| rows[l][j]);
    let eig = linalg::hermitian_eigen(&gram);
    let gram_norm = eig.values.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    let min_eigenvalue = eig.values.last().copied().unwrap_or(0.0);
    Ok(RkhsData { points: points.to_vec(), vectors: vectors.to_vec(), gram, min_eigenvalue, gram_norm, eig })
}

impl RkhsData {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(Θ_c | Θ_d) = d^† G c`.
    pub fn inner(&self, c: &CVec, d: &CVec) -> C64 {
        d.dotc(&(&self.gram * c))
    }

    /// Norm in the Gram quotient: eigen-directions below
    /// `1e-10 · ‖G‖` carry the zero section.
    pub fn norm(&self, c: &CVec) -> f64 {
        let cutoff = GRAM_CUTOFF * self.gram_norm;
        let mut sq = 0.0;
        for (i, &l) in self.eig.values.iter().enumerate() {
            if l > cutoff {
                sq += l * self.eig.vectors.column(i).dotc(c).norm_sqr();
            }
        }
        sq.sqrt()
    }

    /// Dimension of the span of the kernel columns.
    pub fn rank(&self) -> usize {
        let cutoff = GRAM_CUTOFF * self.gram_norm;
        self.eig.values.iter().filter(|&&l| l > cutoff).count()
    }

    /// `Θ_c(u U_B)` in the frame of `u`.
    pub fn evaluate(&self, sub: &SubGnsData, c: &CVec, u: &AlgebraElement) -> CVec {
        let mut out = CVec::zeros(sub.dim_h_phi());
        for (j, (t, xi)) in self.points.iter().zip(&self.vectors).enumerate() {
            out += kernel_unchecked(sub, u, t).matrix * xi * c[j];
        }
        out
    }
}

/// Dimension of the span of all `K(·, t_j) f` over the given points and a
/// basis `f` of the fiber.
pub fn rkhs_dimension(sub: &SubGnsData, points: &[AlgebraElement], exec: Execution) -> Result<usize> {
    let k = sub.dim_h_phi();
    let mut pts = Vec::with_capacity(points.len() * k);
    let mut vecs = Vec::with_capacity(points.len() * k);
    for u in points {
        for i in 0..k {
            pts.push(u.clone());
            let mut e = CVec::zeros(k);
            e[i] = c64(1.0, 0.0);
            vecs.push(e);
        }
    }
    Ok(kernel_gram(sub, &pts, &vecs, exec)?.rank())
}

/// Hermitian symmetry and ev-factorization residuals of the kernel over the
/// given pairs.
pub fn kernel_identities(sub: &SubGnsData, pairs: &[(AlgebraElement, AlgebraElement)], exec: Execution) -> (f64, f64) {
    let rows = par::map_indexed(exec, pairs.len(), |i| {
        let (s, t) = &pairs[i];
        let kst = kernel_unchecked(sub, s, t).matrix;
        let kts = kernel_unchecked(sub, t, s).matrix;
        let symmetry = linalg::max_abs(&(&kst - kts.adjoint()));
        let factor = linalg::op_norm(&(&kst - ev(sub, s) * ev(sub, t).adjoint()));
        (symmetry, factor)
    });
    (par::max_of(rows.iter().map(|r| r.0)), par::max_of(rows.iter().map(|r| r.1)))
}

/// Reproducing property and evaluation bound on `samples` random span
/// elements, each paired with a random fiber vector at a Haar point.
pub fn verify_reproducing(rkhs: &RkhsData, sub: &SubGnsData, samples: usize, seed: u64, exec: Execution) -> Vec<Check> {
    let spec = sub.spec();
    let n = rkhs.len();
    let k = sub.dim_h_phi();
    let rows = par::map_indexed(exec, samples, |i| {
        let mut rng = rng::stream(seed, rng::tags::VECTORS, i as u32);
        let c = CVec::from_fn(n, |_, _| rng::complex_normal(&mut rng));
        let t = spec.random_unitary(&mut rng);
        let xi = CVec::from_fn(k, |_, _| rng::complex_normal(&mut rng));
        // Left side through the Gram matrix of the augmented point set.
        let mut pts = rkhs.points.clone();
        pts.push(t.clone());
        let mut vecs = rkhs.vectors.clone();
        vecs.push(xi.clone());
        let aug = kernel_gram(sub, &pts, &vecs, Execution::Sequential).expect("consistent inputs");
        let mut c_aug = CVec::zeros(n + 1);
        c_aug.rows_mut(0, n).copy_from(&c);
        let mut e_last = CVec::zeros(n + 1);
        e_last[n] = c64(1.0, 0.0);
        let lhs = aug.inner(&c_aug, &e_last);
        // Right side by evaluating the section.
        let value = rkhs.evaluate(sub, &c, &t);
        let rhs = xi.dotc(&value);
        let scale = rkhs.norm(&c).max(1.0) * xi.norm().max(1.0);
        let kt = linalg::op_norm(&kernel_unchecked(sub, &t, &t).matrix);
        let slack = kt.sqrt() * rkhs.norm(&c) - value.norm();
        ((lhs - rhs).norm() / scale, slack / scale)
    });
    vec![
        Check::at_most("reproducing_property", par::max_of(rows.iter().map(|r| r.0)), 1e-9),
        Check::at_least("evaluation_bound_slack", rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min), -1e-10),
    ]
}

/// Samples for [`verify_realization`]: unitaries `u_i`, vectors `h_i ∈ H`.
#[derive(Clone, Debug)]
pub struct RealizationSamples {
    pub unitaries: Vec<AlgebraElement>,
    pub vectors: Vec<CVec>,
}

impl RealizationSamples {
    pub fn draw(sub: &SubGnsData, count: usize, seed: u64) -> Self {
        let spec = sub.spec();
        let n = sub.parent().dim_h();
        let mut unitaries = Vec::with_capacity(count);
        let mut vectors = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = rng::stream(seed, rng::tags::POINTS, i as u32);
            unitaries.push(spec.random_unitary(&mut rng));
            vectors.push(CVec::from_fn(n, |_, _| rng::complex_normal(&mut rng)));
        }
        Self { unitaries, vectors }
    }
}

/// Intertwining, isometry on `H_φ`, unitarity of the induced action and
/// kernel equivariance.
pub fn verify_realization(sub: &SubGnsData, samples: &RealizationSamples, seed: u64, exec: Execution) -> Result<Vec<Check>> {
    let m = samples.unitaries.len();
    if m == 0 || samples.vectors.len() != m {
        return Err(Error::LengthMismatch(format!("{m} unitaries and {} vectors", samples.vectors.len())));
    }
    let us = &samples.unitaries;
    let hs = &samples.vectors;
    let gns = sub.parent();
    let one = sub.spec().identity();

    // ι(ρ(v)h) at a U_B-shifted representative of u, against v · ι(h)(v^{-1}u).
    let intertwining = par::map_indexed(exec, m, |i| -> Result<f64> {
        let v = &us[i];
        let u = &us[(i + 1) % m];
        let h = &hs[i];
        let w = sub.random_b_unitary(&mut rng::stream(seed, rng::tags::INPUTS, 20_000 + i as u32));
        let x = realization_iota(sub, &(gns.rho(v) * h), &(u * &w))?;
        let y = group_act(v, &realization_iota(sub, h, &(&v.star() * u))?)?;
        Ok(fiber_distance(sub, &x, &y).unwrap_or(f64::INFINITY) / h.norm())
    });
    let intertwining = par::max_of(intertwining.into_iter().collect::<Result<Vec<_>>>()?);
    let trivial = {
        let x = realization_iota(sub, &hs[0], &us[0])?;
        let y = group_act(&one, &realization_iota(sub, &hs[0], &(&one.star() * &us[0]))?)?;
        fiber_distance(sub, &y, &x).unwrap_or(f64::INFINITY)
    };

    // ι(embed f) = K(·, 1) f, with norm ⟨K(1,1) f, f⟩^{1/2}.
    let k = sub.dim_h_phi();
    let iso = par::map_indexed(exec, m, |i| -> Result<(f64, f64)> {
        let mut rng = rng::stream(seed, rng::tags::VECTORS, 30_000 + i as u32);
        let f = CVec::from_fn(k, |_, _| rng::complex_normal(&mut rng));
        let f = f.unscale(f.norm());
        let rk = kernel_gram(sub, std::slice::from_ref(&one), std::slice::from_ref(&f), Execution::Sequential)?;
        let norm = rk.norm(&CVec::from_element(1, c64(1.0, 0.0)));
        let at_u = realization_iota(sub, &(sub.embed() * &f), &us[i])?;
        let kernel_col = kernel_unchecked(sub, &us[i], &one).matrix * &f;
        Ok(((norm - 1.0).abs(), (&at_u.fiber_coeffs - kernel_col).norm()))
    });
    let iso = iso.into_iter().collect::<Result<Vec<_>>>()?;

    // ‖u · Θ‖ = ‖Θ‖ for Θ spanned by kernel columns at the sample points.
    let base_vectors: Vec<CVec> = (0..m)
        .map(|i| {
            let mut rng = rng::stream(seed, rng::tags::VECTORS, 40_000 + i as u32);
            CVec::from_fn(k, |_, _| rng::complex_normal(&mut rng))
        })
        .collect();
    let theta = kernel_gram(sub, us, &base_vectors, exec)?;
    let unitarity = par::map_indexed(exec, m, |i| -> Result<f64> {
        let mut rng = rng::stream(seed, rng::tags::VECTORS, 50_000 + i as u32);
        let c = CVec::from_fn(m, |_, _| rng::complex_normal(&mut rng));
        let shifted: Vec<AlgebraElement> = us.iter().map(|t| &us[i] * t).collect();
        let moved = kernel_gram(sub, &shifted, &base_vectors, Execution::Sequential)?;
        let n0 = theta.norm(&c);
        Ok((moved.norm(&c) - n0).abs() / n0.max(1.0))
    });
    let unitarity = par::max_of(unitarity.into_iter().collect::<Result<Vec<_>>>()?);

    // K(u u_1, u_2) = K(u_1, u^* u_2) in the frames of the representatives.
    let equivariance = par::max_of(par::map_indexed(exec, m, |i| {
        let u = &us[i];
        let u1 = &us[(i + 1) % m];
        let u2 = &us[(i + 2) % m];
        let lhs = kernel_unchecked(sub, &(u * u1), u2).matrix;
        let rhs = kernel_unchecked(sub, u1, &(&u.star() * u2)).matrix;
        linalg::op_norm(&(lhs - rhs))
    }));

    Ok(vec![
        Check::at_most("intertwining", intertwining, 1e-9),
        Check::at_most("intertwining_identity", trivial, 0.0),
        Check::at_most("isometry_on_fiber", par::max_of(iso.iter().map(|r| r.0)), 1e-9),
        Check::at_most("iota_is_kernel_column", par::max_of(iso.iter().map(|r| r.1)), 1e-9),
        Check::at_most("action_unitary", unitarity, 1e-9),
        Check::at_most("kernel_equivariance", equivariance, 1e-9),
    ])
}

/// Smallest singular value of `h ↦ (ev_{u_j} h)_j`; positive iff `ι` is
/// injective on the sample.
pub fn iota_injectivity(sub: &SubGnsData, unitaries: &[AlgebraElement]) -> f64 {
    let k = sub.dim_h_phi();
    let n = sub.parent().dim_h();
    let mut stacked = CMat::zeros(unitaries.len() * k, n);
    for (j, u) in unitaries.iter().enumerate() {
        stacked.view_mut((j * k, 0), (k, n)).copy_from(&ev(sub, u));
    }
    linalg::smallest_singular_value(&stacked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::AlgebraSpec;
    use crate::gns::{gns_build, sub_gns, State};
    use crate::rng::stream;

    fn m3_faithful_centralizer() -> SubGnsData {
        let spec = AlgebraSpec::full_matrix(3).unwrap();
        let phi = State::new(&spec, spec.random_density(&mut stream(1, 0, 0), None)).unwrap();
        let gns = gns_build(&spec, &phi).unwrap();
        let b = spec.centralizer(phi.functional()).unwrap();
        sub_gns(&gns, &b).unwrap()
    }

    fn m3m2_scalars() -> SubGnsData {
        let spec = AlgebraSpec::new(&[3, 2]).unwrap();
        let phi = State::new(&spec, spec.random_density(&mut stream(2, 0, 0), None)).unwrap();
        let gns = gns_build(&spec, &phi).unwrap();
        sub_gns(&gns, &[spec.identity()]).unwrap()
    }

    fn corner(n: usize) -> SubGnsData {
        let (spec, phi) = State::corner(n).unwrap();
        let gns = gns_build(&spec, &phi).unwrap();
        let b = spec.centralizer(phi.functional()).unwrap();
        sub_gns(&gns, &b).unwrap()
    }

    #[test]
    fn fiber_relation() {
        let sub = m3_faithful_centralizer();
        let mut rng = stream(3, 0, 0);
        let u = sub.spec().random_unitary(&mut rng);
        let f = CVec::from_fn(sub.dim_h_phi(), |_, _| rng::complex_normal(&mut rng));
        let y = FiberVector::new(u.clone(), f.clone()).unwrap();
        assert!(fiber_equal(&sub, &y, &y));
        let v = sub.random_b_unitary(&mut rng);
        let x = FiberVector::new(&u * &v, sub.rho_phi(&v.star()) * &f).unwrap();
        assert!(fiber_equal(&sub, &x, &y));
        let doubled = FiberVector::new(u.clone(), &f * c64(2.0, 0.0)).unwrap();
        assert!(!fiber_equal(&sub, &y, &doubled));
        // A representative outside u U_B is a different point.
        let other = FiberVector::new(sub.spec().random_unitary(&mut rng), f).unwrap();
        assert!(!fiber_equal(&sub, &other, &y));
    }

    #[test]
    fn action_composes() {
        let sub = m3m2_scalars();
        let mut rng = stream(4, 0, 0);
        let spec = sub.spec();
        let x = FiberVector::new(spec.random_unitary(&mut rng), CVec::from_element(1, c64(0.3, -0.2))).unwrap();
        assert_eq!(group_act(&spec.identity(), &x).unwrap(), x);
        let u1 = spec.random_unitary(&mut rng);
        let u2 = spec.random_unitary(&mut rng);
        let lhs = group_act(&u2, &group_act(&u1, &x).unwrap()).unwrap();
        let rhs = group_act(&(&u2 * &u1), &x).unwrap();
        assert!(fiber_equal(&sub, &lhs, &rhs));
        assert_eq!(lhs.fiber_coeffs.norm(), x.fiber_coeffs.norm());
        assert!(group_act(&spec.identity().scale(c64(2.0, 0.0)), &x).is_err());
    }

    #[test]
    fn iota_at_identity_and_coset_independence() {
        let sub = m3_faithful_centralizer();
        let spec = sub.spec();
        let mut rng = stream(5, 0, 0);
        let f = CVec::from_fn(sub.dim_h_phi(), |_, _| rng::complex_normal(&mut rng));
        let at_one = realization_iota(&sub, &(sub.embed() * &f), &spec.identity()).unwrap();
        assert!((&at_one.fiber_coeffs - &f).norm() < 1e-12);
        let h = CVec::from_fn(sub.parent().dim_h(), |_, _| rng::complex_normal(&mut rng));
        let u = spec.random_unitary(&mut rng);
        let v = sub.random_b_unitary(&mut rng);
        let a = realization_iota(&sub, &h, &u).unwrap();
        let b = realization_iota(&sub, &h, &(&u * &v)).unwrap();
        assert!(fiber_equal(&sub, &a, &b));
    }

    #[test]
    fn corner_kernel_closed_form() {
        let n = 4;
        let sub = corner(n);
        let spec = sub.spec();
        let mut rng = stream(6, 0, 0);
        for _ in 0..20 {
            let u1 = spec.random_unitary(&mut rng);
            let u2 = spec.random_unitary(&mut rng);
            let k = kernel_eval(&sub, &u1, &u2).unwrap().matrix;
            let expected = (u1.block(0).adjoint() * u2.block(0))[(0, 0)];
            assert_eq!(k.shape(), (1, 1));
            assert!((k[(0, 0)] - expected).norm() < 1e-12);
        }
        let u = spec.random_unitary(&mut rng);
        let k = kernel_eval(&sub, &u, &u).unwrap().matrix;
        assert!((k - CMat::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn kernel_symmetry_and_factorization() {
        let sub = m3_faithful_centralizer();
        let spec = sub.spec();
        let mut rng = stream(7, 0, 0);
        let pairs: Vec<_> = (0..20).map(|_| (spec.random_unitary(&mut rng), spec.random_unitary(&mut rng))).collect();
        let (sym, fact) = kernel_identities(&sub, &pairs, Execution::Parallel);
        assert!(sym < 1e-12 && fact < 1e-11, "{sym} {fact}");
    }

    #[test]
    fn gram_edge_cases() {
        let sub = m3m2_scalars();
        let spec = sub.spec();
        let one = spec.identity();
        let xi = CVec::from_element(1, c64(1.0, 0.0));
        let g = kernel_gram(&sub, std::slice::from_ref(&one), std::slice::from_ref(&xi), Execution::Sequential).unwrap();
        assert!((g.gram[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
        let u = spec.haar_unitary(3);
        let g = kernel_gram(&sub, &[u.clone(), u], &[xi.clone(), -xi], Execution::Sequential).unwrap();
        assert!(g.norm(&CVec::from_element(2, c64(1.0, 0.0))) < 1e-7);
        assert_eq!(g.rank(), 1);
        assert!(kernel_gram(&sub, &[one], &[], Execution::Sequential).is_err());
    }

    #[test]
    fn gram_is_psd_and_parallel_matches_sequential() {
        let sub = m3_faithful_centralizer();
        let samples = RealizationSamples::draw(&sub, 20, 8);
        let k = sub.dim_h_phi();
        let vecs: Vec<CVec> = (0..20).map(|i| CVec::from_fn(k, |r, _| c64((i + r) as f64, 1.0))).collect();
        let par = kernel_gram(&sub, &samples.unitaries, &vecs, Execution::Parallel).unwrap();
        let seq = kernel_gram(&sub, &samples.unitaries, &vecs, Execution::Sequential).unwrap();
        assert_eq!(par.gram, seq.gram);
        assert!(par.min_eigenvalue >= -1e-8 * par.gram_norm);
    }

    #[test]
    fn reproducing_and_realization() {
        let sub = m3_faithful_centralizer();
        let samples = RealizationSamples::draw(&sub, 10, 9);
        let k = sub.dim_h_phi();
        let vecs: Vec<CVec> = (0..10).map(|i| CVec::from_fn(k, |r, _| c64(1.0, (i * r) as f64))).collect();
        let rk = kernel_gram(&sub, &samples.unitaries, &vecs, Execution::Parallel).unwrap();
        for c in verify_reproducing(&rk, &sub, 20, 1, Execution::Parallel) {
            assert!(c.passed, "{c:?}");
        }
        for c in verify_realization(&sub, &samples, 1, Execution::Parallel).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn corner_rkhs_dimension_and_injectivity() {
        for n in 2..=4 {
            let sub = corner(n);
            let pts = RealizationSamples::draw(&sub, 2 * n * n, 10).unitaries;
            assert_eq!(rkhs_dimension(&sub, &pts, Execution::Parallel).unwrap(), n);
            assert!(iota_injectivity(&sub, &pts[..2 * n]) > 1e-8);
        }
    }
}
