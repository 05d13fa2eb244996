//! Flags, the block-triangular group `P`, the factorization `g = uq` with `u`
//! unitary and `q ∈ P`, the extension `ρ̃` of `ρ_φ` to `P`, and a
//! finite-difference Cauchy–Riemann test for sections over `G/P`.

use rand::Rng;

use crate::algebra::{spectral_decompose, AlgebraElement, AlgebraSpec};
use crate::error::{Error, Result};
use crate::gns::SubGnsData;
use crate::linalg::{self, c64, CMat, CVec, C64};
use crate::par::{self, Execution};
use crate::rng;

/// Tolerance on the projection identities of a flag.
pub const FLAG_TOL: f64 = 1e-10;
/// Relative singular-value cutoff for left supports.
pub const SUPPORT_CUTOFF: f64 = 1e-10;
/// Relative tolerance of [`member_of_p`].
pub const PARABOLIC_TOL: f64 = 1e-9;
/// Inputs with `σ_min(g) ≤ 1e-10·‖g‖` are rejected as singular.
pub const SINGULAR_TOL: f64 = 1e-10;
/// Pairing margin below which a point is treated as outside the chart.
pub const CELL_MARGIN: f64 = 1e-8;

/// An ordered resolution of the identity `e_1 + ⋯ + e_n = 1` by mutually
/// orthogonal projections.
#[derive(Clone, Debug, PartialEq)]
pub struct Flag {
    projections: Vec<AlgebraElement>,
    cumulative: Vec<AlgebraElement>,
}

/// Order in which the spectral projections of a density enter a flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralOrder {
    /// Smallest eigenvalue first; the kernel projection, if any, is `e_1`.
    Ascending,
    Descending,
}

impl Flag {
    pub fn new(spec: &AlgebraSpec, projections: Vec<AlgebraElement>) -> Result<Self> {
        if projections.is_empty() {
            return Err(Error::InvalidFlag("no projections".into()));
        }
        let mut total = spec.zero();
        for (j, e) in projections.iter().enumerate() {
            spec.check(e)?;
            if e.self_adjoint_residual() > FLAG_TOL || (&(e * e) - e).norm() > FLAG_TOL {
                return Err(Error::InvalidFlag(format!("e_{} is not an orthogonal projection", j + 1)));
            }
            if e.norm() < 0.5 {
                return Err(Error::InvalidFlag(format!("e_{} is zero", j + 1)));
            }
            for (i, f) in projections.iter().enumerate().take(j) {
                if (f * e).norm() > FLAG_TOL {
                    return Err(Error::InvalidFlag(format!("e_{} e_{} is not zero", i + 1, j + 1)));
                }
            }
            total = &total + e;
        }
        if (&total - &spec.identity()).norm() > FLAG_TOL {
            return Err(Error::InvalidFlag("projections do not sum to 1".into()));
        }
        let mut cumulative = Vec::with_capacity(projections.len());
        let mut acc = spec.zero();
        for e in &projections {
            acc = &acc + e;
            cumulative.push(acc.clone());
        }
        Ok(Self { projections, cumulative })
    }

    /// Coordinate flag: step `j` takes the next `ranks[i][j]` standard basis
    /// vectors of block `i`. Shorter lists are padded with zero ranks.
    pub fn coordinate(spec: &AlgebraSpec, ranks: &[Vec<usize>]) -> Result<Self> {
        if ranks.len() != spec.num_blocks() {
            return Err(Error::InvalidFlag(format!("{} rank lists for {} blocks", ranks.len(), spec.num_blocks())));
        }
        let steps = ranks.iter().map(Vec::len).max().unwrap_or(0);
        for (i, (r, &n)) in ranks.iter().zip(spec.block_dims()).enumerate() {
            let sum: usize = r.iter().sum();
            if sum != n {
                return Err(Error::InvalidFlag(format!("ranks for block {i} sum to {sum}, block has size {n}")));
            }
        }
        let mut starts = vec![0usize; spec.num_blocks()];
        let mut projections = Vec::with_capacity(steps);
        for j in 0..steps {
            let mut e = spec.zero();
            for (i, r) in ranks.iter().enumerate() {
                let k = r.get(j).copied().unwrap_or(0);
                for t in starts[i]..starts[i] + k {
                    e.block_mut(i)[(t, t)] = c64(1.0, 0.0);
                }
                starts[i] += k;
            }
            projections.push(e);
        }
        Self::new(spec, projections)
    }

    /// Coordinate flag with the same step ranks in every block.
    pub fn uniform(spec: &AlgebraSpec, ranks: &[usize]) -> Result<Self> {
        Self::coordinate(spec, &vec![ranks.to_vec(); spec.num_blocks()])
    }

    /// Coordinate flag with rank-one steps in every block (the Borel case).
    pub fn complete(spec: &AlgebraSpec) -> Result<Self> {
        let ranks: Vec<Vec<usize>> = spec.block_dims().iter().map(|&n| vec![1; n]).collect();
        Self::coordinate(spec, &ranks)
    }

    /// Coordinate flag conjugated by `w`: `e_j ↦ w e_j w^*`.
    pub fn rotated(&self, spec: &AlgebraSpec, w: &AlgebraElement) -> Result<Self> {
        let projections = self.projections.iter().map(|e| &(w * e) * &w.star()).collect();
        Self::new(spec, projections)
    }

    /// Coordinate flag with the given ranks, rotated by a Haar unitary.
    pub fn random<R: Rng + ?Sized>(spec: &AlgebraSpec, ranks: &[Vec<usize>], rng: &mut R) -> Result<Self> {
        let w = spec.random_unitary(rng);
        Self::coordinate(spec, ranks)?.rotated(spec, &w)
    }

    /// Spectral projections of a self-adjoint element, ordered by eigenvalue.
    pub fn spectral(spec: &AlgebraSpec, a: &AlgebraElement, order: SpectralOrder) -> Result<Self> {
        spec.check(a)?;
        let mut projections = spectral_decompose(a)?.projections;
        if order == SpectralOrder::Ascending {
            projections.reverse();
        }
        Self::new(spec, projections)
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn projections(&self) -> &[AlgebraElement] {
        &self.projections
    }

    /// `p_j = e_1 + ⋯ + e_j`.
    pub fn cumulative(&self) -> &[AlgebraElement] {
        &self.cumulative
    }

    /// Rank of `e_j` in each block.
    pub fn ranks(&self, j: usize) -> Vec<usize> {
        self.projections[j].blocks().iter().map(|b| b.trace().re.round() as usize).collect()
    }

    /// `Σ_j e_j g e_j`.
    pub fn diagonal_part(&self, g: &AlgebraElement) -> AlgebraElement {
        let mut out = &(&self.projections[0] * g) * &self.projections[0];
        for e in &self.projections[1..] {
            out = &out + &(&(e * g) * e);
        }
        out
    }

    /// `max_{j<k} ‖e_k g e_j‖`.
    pub fn parabolic_residual(&self, g: &AlgebraElement) -> f64 {
        let mut worst = 0.0_f64;
        for (j, ej) in self.projections.iter().enumerate() {
            for ek in &self.projections[j + 1..] {
                worst = worst.max((&(ek * g) * ej).norm());
            }
        }
        worst
    }

    /// Random element of `P`: block-diagonal Ginibre times unipotent upper.
    pub fn random_parabolic<R: Rng + ?Sized>(&self, spec: &AlgebraSpec, rng: &mut R) -> AlgebraElement {
        let mut d = spec.zero();
        let mut n = spec.identity();
        for (j, ej) in self.projections.iter().enumerate() {
            let g = spec.random_element(rng);
            d = &d + &(&(ej * &g) * ej);
            for ek in &self.projections[j + 1..] {
                let g = spec.random_element(rng);
                n = &n + &(&(ej * &g) * ek);
            }
        }
        &d * &n
    }
}

/// Projection onto the range of `b`, blockwise.
pub fn left_support(b: &AlgebraElement) -> AlgebraElement {
    AlgebraElement::from_blocks_unchecked(
        b.blocks()
            .iter()
            .map(|blk| {
                let q = linalg::range_basis(blk, SUPPORT_CUTOFF);
                &q * q.adjoint()
            })
            .collect(),
    )
}

/// Orthonormal range basis of a projection block.
fn projection_range(p: &CMat) -> CMat {
    linalg::range_basis(p, 0.5)
}

#[derive(Clone, Debug)]
pub struct FactorizationResult {
    pub u: AlgebraElement,
    pub q: AlgebraElement,
    /// `v_j` with `v_j^* v_j = e_j`, `v_j v_j^* = r_j`.
    pub partial_isometries: Vec<AlgebraElement>,
    /// `r_j = l(g p_j) − l(g p_{j−1})`.
    pub supports: Vec<AlgebraElement>,
    /// Smallest singular value over the overlaps `C_j^† R_j` between the
    /// ranges of `e_j` and `r_j`. The canonical choice of `v_j` is smooth in
    /// `g` while this stays away from zero.
    pub cell_margin: f64,
}

/// `g = uq` with `u` unitary and `q ∈ P`.
///
/// `u = Σ v_j` maps the range of `e_j` onto that of `r_j`, so `u e_j u^* =
/// r_j` and `q = u^* g` keeps every `p_j` invariant. The partial isometry is
/// `v_j = R_j · polar(R_j^† C_j) · C_j^†` for orthonormal range bases `C_j` of
/// `e_j` and `R_j` of `r_j`; this does not depend on the choice of bases and
/// gives `v_j = e_j` whenever `r_j = e_j`, so `u = 1` for `g ∈ P`.
pub fn uq_factorize(g: &AlgebraElement, flag: &Flag) -> Result<FactorizationResult> {
    let dims: Vec<usize> = flag.projections[0].blocks().iter().map(|b| b.nrows()).collect();
    let gdims: Vec<usize> = g.blocks().iter().map(|b| b.nrows()).collect();
    if dims != gdims {
        return Err(Error::ShapeMismatch { expected: format!("{dims:?}"), found: format!("{gdims:?}") });
    }
    let norm = g.norm();
    let smallest = g.smallest_singular_value();
    if !(smallest > SINGULAR_TOL * norm) {
        return Err(Error::Singular { smallest, norm });
    }
    let steps = flag.len();
    let mut v_blocks: Vec<Vec<CMat>> = vec![Vec::with_capacity(dims.len()); steps];
    let mut r_blocks: Vec<Vec<CMat>> = vec![Vec::with_capacity(dims.len()); steps];
    let mut margin = f64::INFINITY;
    for (i, &n) in dims.iter().enumerate() {
        let gi = g.block(i);
        let gnorm = linalg::op_norm(gi);
        // Orthonormal basis of l(g p_{j-1}), grown one step at a time.
        let mut done = CMat::zeros(n, 0);
        for j in 0..steps {
            let c_basis = projection_range(flag.projections[j].block(i));
            let k = c_basis.ncols();
            // The range of r_j is that of g e_j with l(g p_{j-1}) projected out;
            // projecting twice keeps the bases orthogonal to working precision.
            let mut w = gi * &c_basis;
            for _ in 0..2 {
                w -= &done * (done.adjoint() * &w);
            }
            let found = if k == 0 { 0 } else { linalg::singular_values(&w).iter().filter(|&&s| s > SUPPORT_CUTOFF * gnorm).count() };
            if found != k {
                return Err(Error::RankMismatch { step: j + 1, expected: k, found });
            }
            let r_basis = linalg::dominant_range(&w, k);
            let r = &r_basis * r_basis.adjoint();
            done = CMat::from_fn(n, done.ncols() + k, |row, col| {
                if col < done.ncols() { done[(row, col)] } else { r_basis[(row, col - done.ncols())] }
            });
            let v = if c_basis.ncols() == 0 {
                CMat::zeros(n, n)
            } else {
                let overlap = c_basis.adjoint() * &r_basis;
                margin = margin.min(linalg::smallest_singular_value(&overlap));
                let polar = linalg::polar_unitary(&overlap);
                &r_basis * polar.adjoint() * c_basis.adjoint()
            };
            v_blocks[j].push(v);
            r_blocks[j].push(r);
        }
    }
    let partial_isometries: Vec<AlgebraElement> = v_blocks.into_iter().map(AlgebraElement::from_blocks_unchecked).collect();
    let supports: Vec<AlgebraElement> = r_blocks.into_iter().map(AlgebraElement::from_blocks_unchecked).collect();
    let mut u = partial_isometries[0].clone();
    for v in &partial_isometries[1..] {
        u = &u + v;
    }
    let q = &u.star() * g;
    Ok(FactorizationResult { u, q, partial_isometries, supports, cell_margin: margin })
}

impl FactorizationResult {
    /// `‖g − uq‖ / ‖g‖`.
    pub fn reconstruction_residual(&self, g: &AlgebraElement) -> f64 {
        (g - &(&self.u * &self.q)).norm() / g.norm()
    }
}

/// Agreement with Householder QR for the complete flag rotated by `w`
/// (`e_j = w E_jj w^*` in each block): `w^* u w` must equal the `Q` factor of
/// `w^* g w` up to a diagonal unitary. Returns the largest off-diagonal norm
/// and modulus defect of `(w^* u w)^* Q` over the blocks.
pub fn householder_residual(u: &AlgebraElement, g: &AlgebraElement, w: &AlgebraElement) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..g.blocks().len() {
        let wi = w.block(i);
        let gi = wi.adjoint() * g.block(i) * wi;
        let ui = wi.adjoint() * u.block(i) * wi;
        let q = gi.qr().q();
        let m = ui.adjoint() * q;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                worst = worst.max(if r == c { (z.norm() - 1.0).abs() } else { z.norm() });
            }
        }
    }
    worst
}

/// `g ∈ P`: invertible and block-upper-triangular for the flag.
pub fn member_of_p(g: &AlgebraElement, flag: &Flag) -> bool {
    let norm = g.norm();
    g.smallest_singular_value() > SINGULAR_TOL * norm && flag.parabolic_residual(g) <= PARABOLIC_TOL * norm
}

/// `ρ̃(g) = ρ_φ(Σ_j e_j g e_j)` for `g ∈ P`.
pub fn rho_tilde(sub: &SubGnsData, flag: &Flag, g: &AlgebraElement) -> Result<CMat> {
    let residual = flag.parabolic_residual(g);
    if residual > PARABOLIC_TOL * g.norm() {
        return Err(Error::NotInParabolic { residual });
    }
    Ok(sub.rho_phi(&flag.diagonal_part(g)))
}

/// `max ‖embed^† ρ(c) − ρ̃(c) embed^†‖` over random `c ∈ P`. The section
/// `gP ↦ [(g, P_{H_φ} ρ(g)^{-1} h)]` is well defined on `G/P` exactly when
/// this vanishes.
pub fn frame_compatibility_residual(sub: &SubGnsData, flag: &Flag, samples: usize, seed: u64) -> Result<f64> {
    let spec = sub.spec();
    let et = sub.embed().adjoint();
    let mut worst = 0.0_f64;
    for i in 0..samples {
        let mut rng = rng::stream(seed, rng::tags::FLAGS, 1_000 + i as u32);
        let c = flag.random_parabolic(spec, &mut rng);
        let lhs = &et * sub.parent().rho(&c);
        let rhs = rho_tilde(sub, flag, &c)? * &et;
        worst = worst.max(linalg::op_norm(&(lhs - rhs)) / c.norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolomorphyOptions {
    /// Finite-difference step of the reported residual.
    pub step: f64,
    /// Larger step at which the convergence order is estimated by halving.
    pub probe_step: f64,
    /// Replace the section by its complex conjugate (a control that must fail).
    pub conjugate: bool,
}

impl Default for HolomorphyOptions {
    fn default() -> Self {
        Self { step: 1e-5, probe_step: 1e-2, conjugate: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HolomorphyResult {
    /// Max over directions of `‖∂_z̄ f‖ / max(‖∂_z f‖, ‖∂_z̄ f‖)` at `step`.
    pub residual: f64,
    /// Smallest `log2(res(s) / res(s/2))` at `s = probe_step`; `None` when
    /// the residual vanishes at the probe steps.
    pub order: Option<f64>,
}

/// Off-diagonal-block Hermitian directions `c_k c_j^* + c_j c_k^*`, one per
/// block and pair `j < k` of flag steps that both meet the block.
pub fn chart_directions(spec: &AlgebraSpec, flag: &Flag) -> Vec<AlgebraElement> {
    let mut out = Vec::new();
    for (i, &n) in spec.block_dims().iter().enumerate() {
        let ranges: Vec<CMat> = flag.projections.iter().map(|e| projection_range(e.block(i))).collect();
        for j in 0..ranges.len() {
            for k in j + 1..ranges.len() {
                if ranges[j].ncols() == 0 || ranges[k].ncols() == 0 {
                    continue;
                }
                let cj = ranges[j].column(0);
                let ck = ranges[k].column(0);
                let x = ck * cj.adjoint() + cj * ck.adjoint();
                let mut blocks: Vec<CMat> = spec.block_dims().iter().map(|&m| CMat::zeros(m, m)).collect();
                debug_assert_eq!(x.nrows(), n);
                blocks[i] = x;
                out.push(AlgebraElement::from_blocks_unchecked(blocks));
            }
        }
    }
    out
}

/// The section `ι(h)` in the trivialization over `G/P` given by the
/// representative `g`: `ρ̃(q)^{-1} embed^† ρ(u)^† h` for `g = uq`.
pub fn section_in_frame(sub: &SubGnsData, flag: &Flag, h: &CVec, g: &AlgebraElement) -> Result<CVec> {
    let fact = uq_factorize(g, flag)?;
    if fact.cell_margin < CELL_MARGIN {
        return Err(Error::InvalidArgument(format!(
            "evaluation point left the chart (overlap margin {:.3e})",
            fact.cell_margin
        )));
    }
    let value = sub.embed().adjoint() * (sub.parent().rho(&fact.u).adjoint() * h);
    let rt = rho_tilde(sub, flag, &fact.q)?;
    rt.lu().solve(&value).ok_or(Error::Singular { smallest: 0.0, norm: 0.0 })
}

/// Cauchy–Riemann residual of `ι(h)` along the lines
/// `z ↦ chart_center · exp(z X)` through the chart center.
pub fn holomorphy_residual(
    sub: &SubGnsData,
    flag: &Flag,
    h: &CVec,
    chart_center: &AlgebraElement,
    opts: HolomorphyOptions,
    exec: Execution,
) -> Result<HolomorphyResult> {
    chart_center.ensure_unitary(1e-10)?;
    if !(1e-6..=1e-3).contains(&opts.step) {
        return Err(Error::InvalidArgument(format!("step {} outside [1e-6, 1e-3]", opts.step)));
    }
    if h.len() != sub.parent().dim_h() {
        return Err(Error::LengthMismatch(format!("vector has length {}, H has dimension {}", h.len(), sub.parent().dim_h())));
    }
    if h.norm() == 0.0 {
        return Ok(HolomorphyResult { residual: 0.0, order: None });
    }
    let directions = chart_directions(sub.spec(), flag);
    let per_direction = par::map_indexed(exec, directions.len(), |d| -> Result<(f64, Option<f64>)> {
        let x = &directions[d];
        let f = |z: C64| -> Result<CVec> {
            let g = chart_center * &x.exp_self_adjoint(z);
            let v = section_in_frame(sub, flag, h, &g)?;
            Ok(if opts.conjugate { v.conjugate() } else { v })
        };
        let scale = f(c64(0.0, 0.0))?.norm();
        let residual_at = |s: f64| -> Result<f64> {
            let dx = (f(c64(s, 0.0))? - f(c64(-s, 0.0))?).unscale(2.0 * s);
            let dy = (f(c64(0.0, s))? - f(c64(0.0, -s))?).unscale(2.0 * s);
            let i = c64(0.0, 1.0);
            let dzbar = (&dx + &dy * i).unscale(2.0).norm();
            let dz = (&dx - &dy * i).unscale(2.0).norm();
            let denom = dz.max(dzbar).max(1e-8 * scale);
            Ok(if denom == 0.0 { 0.0 } else { dzbar / denom })
        };
        let residual = residual_at(opts.step)?;
        let coarse = residual_at(opts.probe_step)?;
        let fine = residual_at(opts.probe_step / 2.0)?;
        let order = (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).log2());
        Ok((residual, order))
    });
    let per_direction = per_direction.into_iter().collect::<Result<Vec<_>>>()?;
    let residual = par::max_of(per_direction.iter().map(|r| r.0));
    let order = per_direction.iter().filter_map(|r| r.1).reduce(f64::min);
    Ok(HolomorphyResult { residual, order })
}
