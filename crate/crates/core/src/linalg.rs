//! Dense complex linear algebra: `nalgebra` storage, LAPACK for the
//! eigen- and singular value problems.
//!
//! Every routine that returns a basis normalizes column phases (largest-modulus
//! entry real and positive, ties to the lowest index) so that outputs are
//! reproducible bit-for-bit on a given platform.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Thin singular value decomposition `m = U diag(s) V^†` with `s`
/// descending.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × p`, `p = min(rows, cols)`.
    pub u: CMat,
    pub singular_values: Vec<f64>,
    /// `p × cols`.
    pub v_t: CMat,
}

fn lapack_failed(routine: &str, info: i32) -> ! {
    panic!("LAPACK {routine} failed with info = {info}")
}

fn gesvd(m: &CMat, vectors: bool) -> Svd {
    let (rows, cols) = m.shape();
    let p = rows.min(cols);
    let (r, c) = (rows as i32, cols as i32);
    let mut a = m.as_slice().to_vec();
    let mut s = vec![0.0; p];
    let job = if vectors { b'S' } else { b'N' };
    let (mut u, mut vt) = if vectors { (vec![C64::default(); rows * p], vec![C64::default(); p * cols]) } else { (vec![C64::default(); 1], vec![C64::default(); 1]) };
    let (ldu, ldvt) = if vectors { (r.max(1), (p as i32).max(1)) } else { (1, 1) };
    let mut rwork = vec![0.0; 5 * p.max(1)];
    let mut info = 0;
    let mut query = [C64::default()];
    // SAFETY: every buffer has the length LAPACK requires for these
    // dimensions; `a` is column-major with leading dimension `rows`.
    unsafe {
        lapack::zgesvd(job, job, r, c, &mut a, r.max(1), &mut s, &mut u, ldu, &mut vt, ldvt, &mut query, -1, &mut rwork, &mut info);
    }
    let lwork = (query[0].re as usize).max(1);
    let mut work = vec![C64::default(); lwork];
    unsafe {
        lapack::zgesvd(job, job, r, c, &mut a, r.max(1), &mut s, &mut u, ldu, &mut vt, ldvt, &mut work, lwork as i32, &mut rwork, &mut info);
    }
    if info != 0 {
        lapack_failed("zgesvd", info);
    }
    let (u, v_t) = if vectors { (CMat::from_vec(rows, p, u), CMat::from_vec(p, cols, vt)) } else { (CMat::zeros(rows, 0), CMat::zeros(0, cols)) };
    Svd { u, singular_values: s, v_t }
}

pub fn svd(m: &CMat) -> Svd {
    if m.is_empty() {
        let p = m.nrows().min(m.ncols());
        return Svd { u: CMat::zeros(m.nrows(), p), singular_values: vec![0.0; p], v_t: CMat::zeros(p, m.ncols()) };
    }
    gesvd(m, true)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    gesvd(m, false).singular_values
}

/// Unitary polar factor `U V^†` of a square matrix.
pub fn polar_unitary(m: &CMat) -> CMat {
    assert_eq!(m.nrows(), m.ncols(), "polar factor of a non-square matrix");
    let d = svd(m);
    d.u * d.v_t
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    let sv = singular_values(m);
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    sv.last().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn vec_norm(v: &CVec) -> f64 {
    v.norm()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen { values: Vec::new(), vectors: CMat::zeros(0, 0) };
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let mut a = sym.as_slice().to_vec();
    let mut w = vec![0.0; n];
    let mut rwork = vec![0.0; (3 * n).saturating_sub(2).max(1)];
    let mut info = 0;
    let mut query = [C64::default()];
    let ni = n as i32;
    // SAFETY: `a` is the column-major n×n input, `w` and `rwork` have the
    // documented lengths, `work` is sized by the workspace query.
    unsafe {
        lapack::zheev(b'V', b'U', ni, &mut a, ni, &mut w, &mut query, -1, &mut rwork, &mut info);
    }
    let lwork = (query[0].re as usize).max(1);
    let mut work = vec![C64::default(); lwork];
    unsafe {
        lapack::zheev(b'V', b'U', ni, &mut a, ni, &mut w, &mut work, lwork as i32, &mut rwork, &mut info);
    }
    if info != 0 {
        lapack_failed("zheev", info);
    }
    let eigenvectors = CMat::from_vec(n, n, a);
    let mut order: Vec<usize> = (0..n).collect();
    // Descending eigenvalue, ties by the index of the dominant coefficient.
    order.sort_by(|&a, &b| {
        w[b].total_cmp(&w[a]).then_with(|| dominant_index(&eigenvectors, a).cmp(&dominant_index(&eigenvectors, b)))
    });
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        values.push(w[j]);
        vectors.set_column(k, &eigenvectors.column(j));
    }
    fix_phases(&mut vectors);
    HermitianEigen { values, vectors }
}

fn dominant_index(m: &CMat, col: usize) -> usize {
    let mut best = 0;
    let mut best_val = -1.0;
    for i in 0..m.nrows() {
        let v = m[(i, col)].norm();
        if v > best_val * (1.0 + 1e-12) {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Rotates each column so its largest-modulus entry is real and positive.
pub fn fix_phases(m: &mut CMat) {
    for j in 0..m.ncols() {
        let i = dominant_index(m, j);
        let z = m[(i, j)];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            for r in 0..m.nrows() {
                m[(r, j)] *= phase;
            }
        }
    }
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_apply(m: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let eig = hermitian_eigen(m);
    let n = m.nrows();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let s = f(eig.values[j]);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * eig.vectors.adjoint()
}

/// Orthonormal basis (as columns) of the null space of `m`: the
/// complement of the right singular vectors with `σ > rel_cutoff · σ_max`.
pub fn null_space(m: &CMat, rel_cutoff: f64) -> CMat {
    let cols = m.ncols();
    if cols == 0 {
        return CMat::zeros(0, 0);
    }
    let rows = range_basis(&m.adjoint(), rel_cutoff);
    let complement = CMat::identity(cols, cols) - &rows * rows.adjoint();
    let eig = hermitian_eigen(&complement);
    let k = eig.values.iter().filter(|&&l| l > 0.5).count();
    canonicalize_basis(&eig.vectors.columns(0, k).into_owned())
}

/// Orthonormal basis of the column space of `m` with relative cutoff.
pub fn range_basis(m: &CMat, rel_cutoff: f64) -> CMat {
    if m.ncols() == 0 || m.nrows() == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    let d = svd(m);
    let top = d.singular_values.first().copied().unwrap_or(0.0);
    let k = d.singular_values.iter().filter(|&&s| top > 0.0 && s > rel_cutoff * top).count();
    canonicalize_basis(&d.u.columns(0, k).into_owned())
}

/// Orthonormal basis of the left singular vectors of the `k` largest
/// singular values, independent of the solver path.
pub fn dominant_range(m: &CMat, k: usize) -> CMat {
    let k = k.min(m.nrows().min(m.ncols()));
    if k == 0 {
        return CMat::zeros(m.nrows(), 0);
    }
    canonicalize_basis(&svd(m).u.columns(0, k).into_owned())
}

/// Numerical rank with a relative singular-value cutoff.
pub fn numerical_rank(m: &CMat, rel_cutoff: f64) -> usize {
    let sv = singular_values(m);
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_cutoff * top).count()
}

/// Re-expresses an orthonormal column basis through the eigenvectors of its
/// projector, so the result depends on the subspace rather than on the solver
/// path that produced the input columns.
pub fn canonicalize_basis(q: &CMat) -> CMat {
    let k = q.ncols();
    if k == 0 {
        return q.clone();
    }
    let proj = q * q.adjoint();
    let eig = hermitian_eigen(&proj);
    eig.vectors.columns(0, k).into_owned()
}

/// Largest sine of the principal angles between the spans of two
/// orthonormal column sets. Returns 1 when the dimensions differ.
pub fn max_principal_sine(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let resid_b = b - a * (a.adjoint() * b);
    let resid_a = a - b * (b.adjoint() * a);
    op_norm(&resid_b).max(op_norm(&resid_a))
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    unitarity_residual(m) <= tol
}

pub fn unitarity_residual(m: &CMat) -> f64 {
    let n = m.nrows();
    let id = CMat::identity(n, n);
    op_norm(&(m * m.adjoint() - &id)).max(op_norm(&(m.adjoint() * m - id)))
}
