//! Dense linear-algebra kernels: extremal singular values, matrix exponential,
//! spectra. Square matrices above [`DENSE_LIMIT`] switch from a full SVD to
//! LU-backed Golub-Kahan-Lanczos on the inverse.

use ndarray::{s, Array1, Array2, Axis, ShapeBuilder};
use ndarray_linalg::{
    Eigh, EigVals, EigValsh, Factorize, Inverse, JobSvd, LUFactorized, Norm, OperationNorm, Solve,
    SVDDC, UPLO,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

/// Largest dimension handled by a dense singular value decomposition.
pub const DENSE_LIMIT: usize = 512;
/// Relative Lanczos residual at which an extremal singular triplet is accepted.
pub const LANCZOS_TOL: f64 = 1e-10;
const LANCZOS_MAX_STEPS: usize = 160;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_to_complex(values: &Array1<f64>) -> CVector {
    values.mapv(|v| c(v, 0.0))
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, c(1.0, 0.0))
}

pub fn vector_norm(v: &CVector) -> f64 {
    v.norm_l2()
}

pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `diag(d) * a`.
pub fn scale_rows(d: &Array1<f64>, a: &CMatrix) -> CMatrix {
    let mut out = a.clone();
    for (mut row, &w) in out.axis_iter_mut(Axis(0)).zip(d.iter()) {
        row.mapv_inplace(|z| z * w);
    }
    out
}

/// `a * diag(d)`.
pub fn scale_cols(a: &CMatrix, d: &Array1<f64>) -> CMatrix {
    let mut out = a.clone();
    for (mut col, &w) in out.axis_iter_mut(Axis(1)).zip(d.iter()) {
        col.mapv_inplace(|z| z * w);
    }
    out
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + &adjoint(a)).mapv(|z| z * 0.5)
}

/// Largest entrywise modulus of `a - a^*`.
pub fn asymmetry(a: &CMatrix) -> f64 {
    let d = a - &adjoint(a);
    d.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn spectral_norm(a: &CMatrix) -> Result<f64> {
    largest_singular_value(a)
}

pub fn one_norm(a: &CMatrix) -> f64 {
    a.opnorm_one().unwrap_or(f64::INFINITY)
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// A singular value with its right singular vector, so `|A v| = value`.
#[derive(Debug, Clone)]
pub struct SingularPair {
    pub value: f64,
    pub vector: CVector,
}

/// Action of a linear map and its adjoint; the Lanczos kernel only needs these.
pub trait LinearMap {
    fn domain_dim(&self) -> usize;
    fn codomain_dim(&self) -> usize;
    fn apply(&self, x: &CVector) -> Result<CVector>;
    fn apply_adjoint(&self, y: &CVector) -> Result<CVector>;
}

struct DenseMap<'a>(&'a CMatrix);

impl LinearMap for DenseMap<'_> {
    fn domain_dim(&self) -> usize {
        self.0.ncols()
    }
    fn codomain_dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &CVector) -> Result<CVector> {
        Ok(self.0.dot(x))
    }
    fn apply_adjoint(&self, y: &CVector) -> Result<CVector> {
        Ok(self.0.t().dot(&y.mapv(|z| z.conj())).mapv(|z| z.conj()))
    }
}

/// Inverse of a square matrix through its LU factors.
pub struct InverseMap {
    lu: LUFactorized<ndarray::OwnedRepr<C64>>,
    dim: usize,
}

impl InverseMap {
    pub fn new(a: &CMatrix) -> Result<Self> {
        square(a)?;
        let lu = a
            .factorize()
            .map_err(|e| LabError::Numeric(format!("LU factorisation failed: {e}")))?;
        Ok(Self { lu, dim: a.nrows() })
    }

    pub fn solve(&self, b: &CVector) -> Result<CVector> {
        Ok(self.lu.solve(b)?)
    }

    pub fn solve_adjoint(&self, b: &CVector) -> Result<CVector> {
        Ok(self.lu.solve_h(b)?)
    }
}

impl LinearMap for InverseMap {
    fn domain_dim(&self) -> usize {
        self.dim
    }
    fn codomain_dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &CVector) -> Result<CVector> {
        self.solve(x)
    }
    fn apply_adjoint(&self, y: &CVector) -> Result<CVector> {
        self.solve_adjoint(y)
    }
}

fn square(a: &CMatrix) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(LabError::InvalidArgument(format!(
            "expected a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Deterministic, well-spread start vector; Lanczos needs no randomness here.
fn start_vector(n: usize) -> CVector {
    let mut v = Array1::from_shape_fn(n, |k| {
        let t = (k as f64 + 1.0) * 0.618_033_988_749_894_9;
        c((t * 12.9898).sin() + 0.5, (t * 78.233).cos())
    });
    let nrm = vector_norm(&v);
    v.mapv_inplace(|z| z / nrm);
    v
}

fn orthogonalise(w: &mut CVector, basis: &[CVector]) {
    // Two passes keep the basis orthogonal to working precision.
    for _ in 0..2 {
        for q in basis {
            let h = inner(q, w);
            w.scaled_add(-h, q);
        }
    }
}

/// Top singular triplet `(sigma, left, right)` of a map by Golub-Kahan-Lanczos
/// bidiagonalisation with full reorthogonalisation.
pub fn top_singular_triplet(map: &dyn LinearMap, tol: f64) -> Result<(f64, CVector, CVector)> {
    let n = map.domain_dim();
    let max_steps = LANCZOS_MAX_STEPS.min(n.min(map.codomain_dim()));
    let mut vs: Vec<CVector> = vec![start_vector(n)];
    let mut us: Vec<CVector> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    let mut p = map.apply(&vs[0])?;
    loop {
        let alpha = vector_norm(&p);
        if !alpha.is_finite() {
            return Err(LabError::Numeric("non-finite Lanczos iterate".into()));
        }
        let k = alphas.len();
        if alpha <= f64::MIN_POSITIVE {
            if k == 0 {
                return Ok((0.0, Array1::zeros(map.codomain_dim()), vs[0].clone()));
            }
            break;
        }
        p.mapv_inplace(|z| z / alpha);
        us.push(p);
        alphas.push(alpha);

        let mut w = map.apply_adjoint(&us[k])?;
        w.scaled_add(c(-alpha, 0.0), &vs[k]);
        orthogonalise(&mut w, &vs);
        let beta = vector_norm(&w);

        let (sigma, x, y) = bidiagonal_top(&alphas, &betas)?;
        let residual = beta * x[k].abs();
        let steps = alphas.len();
        if residual <= tol * sigma || beta <= 1e-14 * sigma || steps >= max_steps {
            if residual > 1e-6 * sigma && steps >= max_steps && steps < n.min(map.codomain_dim()) {
                return Err(LabError::Numeric(format!(
                    "Lanczos stalled after {steps} steps (relative residual {:e})",
                    residual / sigma
                )));
            }
            let left = combine(&us, &x);
            let right = combine(&vs[..steps], &y);
            return Ok((sigma, left, right));
        }
        betas.push(beta);
        w.mapv_inplace(|z| z / beta);
        vs.push(w);

        let mut next = map.apply(&vs[k + 1])?;
        next.scaled_add(c(-beta, 0.0), &us[k]);
        orthogonalise(&mut next, &us);
        p = next;
    }
    let (sigma, x, y) = bidiagonal_top(&alphas, &betas)?;
    let steps = alphas.len();
    Ok((sigma, combine(&us, &x), combine(&vs[..steps], &y)))
}

fn combine(basis: &[CVector], coeffs: &Array1<f64>) -> CVector {
    let mut out = Array1::zeros(basis[0].len());
    for (q, &w) in basis.iter().zip(coeffs.iter()) {
        out.scaled_add(c(w, 0.0), q);
    }
    out
}

/// Top singular triplet of the upper bidiagonal matrix with diagonal `alphas`
/// and superdiagonal `betas`; returns `(sigma, left, right)`.
fn bidiagonal_top(alphas: &[f64], betas: &[f64]) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let k = alphas.len();
    let mut b = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        b[(i, i)] = alphas[i];
        if i + 1 < k {
            b[(i, i + 1)] = betas[i];
        }
    }
    let (u, sv, vt) = b.svddc(JobSvd::All)?;
    let u = u.ok_or_else(|| LabError::Numeric("missing singular vectors".into()))?;
    let vt = vt.ok_or_else(|| LabError::Numeric("missing singular vectors".into()))?;
    Ok((sv[0], u.column(0).to_owned(), vt.row(0).to_owned()))
}

/// Smallest singular value and right singular vector. Rectangular inputs with
/// fewer rows than columns have a nontrivial kernel.
pub fn smallest_singular(a: &CMatrix) -> Result<SingularPair> {
    let (m, n) = a.dim();
    if n == 0 {
        return Err(LabError::InvalidArgument("empty matrix".into()));
    }
    if m == n && n > DENSE_LIMIT {
        let inverse = match InverseMap::new(a) {
            Ok(inv) => inv,
            Err(_) => return dense_smallest(a),
        };
        let (sigma, left, _) = top_singular_triplet(&inverse, LANCZOS_TOL)?;
        let nrm = vector_norm(&left);
        return Ok(SingularPair {
            value: if sigma > 0.0 { 1.0 / sigma } else { f64::INFINITY },
            vector: left.mapv(|z| z / nrm),
        });
    }
    dense_smallest(a)
}

fn dense_smallest(a: &CMatrix) -> Result<SingularPair> {
    let (m, n) = a.dim();
    let (_, sv, vt) = a.svddc(JobSvd::All)?;
    let vt = vt.ok_or_else(|| LabError::Numeric("missing singular vectors".into()))?;
    let value = if m < n { 0.0 } else { sv[n - 1] };
    Ok(SingularPair {
        value,
        vector: vt.row(n - 1).mapv(|z| z.conj()),
    })
}

pub fn smallest_singular_value(a: &CMatrix) -> Result<f64> {
    let (m, n) = a.dim();
    if m < n {
        return Ok(0.0);
    }
    if m == n && n > DENSE_LIMIT {
        return Ok(smallest_singular(a)?.value);
    }
    let (_, sv, _) = a.svddc(JobSvd::None)?;
    Ok(sv[n - 1])
}

pub fn largest_singular_value(a: &CMatrix) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    if a.nrows().min(a.ncols()) > DENSE_LIMIT {
        let (sigma, _, _) = top_singular_triplet(&DenseMap(a), LANCZOS_TOL)?;
        return Ok(sigma);
    }
    let (_, sv, _) = a.svddc(JobSvd::None)?;
    Ok(sv[0])
}

/// Seeded generator used for every randomised state.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit vector with independent uniform real and imaginary parts.
pub fn random_unit_vector(rng: &mut impl Rng, n: usize) -> CVector {
    let v: CVector = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let nrm = vector_norm(&v);
    v.mapv(|z| z / nrm)
}

/// Smallest singular pair and a norm scale of a square matrix. The scale is
/// the largest singular value up to [`DENSE_LIMIT`] and the upper bound
/// `(‖A‖₁ ‖A‖_∞)^{1/2}` above it.
pub fn singular_extremes(a: &CMatrix) -> Result<(SingularPair, f64)> {
    square(a)?;
    let n = a.nrows();
    if n > DENSE_LIMIT {
        let rows = a.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
        return Ok((smallest_singular(a)?, (one_norm(a) * rows).sqrt()));
    }
    let (_, sv, vt) = a.svddc(JobSvd::All)?;
    let vt = vt.ok_or_else(|| LabError::Numeric("missing singular vectors".into()))?;
    let smallest = SingularPair { value: sv[n - 1], vector: vt.row(n - 1).mapv(|z| z.conj()) };
    Ok((smallest, sv[0]))
}

/// `‖A^{-1}‖` together with a unit input `y` attaining it.
pub fn inverse_norm_of(map: &InverseMap) -> Result<(f64, CVector)> {
    let (sigma, _, right) = top_singular_triplet(map, LANCZOS_TOL)?;
    Ok((sigma, right))
}

pub fn hermitian_eigenvalues(h: &CMatrix) -> Result<Array1<f64>> {
    Ok(h.eigvalsh(UPLO::Lower)?)
}

/// Eigenpairs with eigenvectors as columns. The input is copied to column-major
/// order first: the row-major path of `eigh` returns conjugated vectors.
pub fn hermitian_eigen(h: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    let mut fortran = Array2::zeros(h.dim().f());
    fortran.assign(h);
    Ok(fortran.eigh(UPLO::Lower)?)
}

/// Positive semidefinite square root; negative rounding eigenvalues are clipped.
pub fn psd_sqrt(h: &CMatrix) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen(h)?;
    let roots = vals.mapv(|v| v.max(0.0).sqrt());
    Ok(scale_cols(&vecs, &roots).dot(&adjoint(&vecs)))
}

pub fn eigenvalues(a: &CMatrix) -> Result<CVector> {
    square(a)?;
    Ok(a.eigvals()?)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    square(a)?;
    Ok(a.inv()?)
}

/// Orthonormal basis of the numerical kernel: right singular vectors whose
/// singular value is at most `rel_tol * sigma_max`.
pub fn kernel_basis(a: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let n = a.ncols();
    let (_, sv, vt) = a.svddc(JobSvd::All)?;
    let vt = vt.ok_or_else(|| LabError::Numeric("missing singular vectors".into()))?;
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > rel_tol * top).count();
    let basis = vt.slice(s![rank..n, ..]).t().mapv(|z| z.conj());
    Ok(basis)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by degree-13 Padé with scaling and squaring.
pub fn expm(a: &CMatrix) -> Result<CMatrix> {
    square(a)?;
    let n = a.nrows();
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(LabError::Numeric("matrix exponential of a non-finite matrix".into()));
    }
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));
    let id = identity(n);
    let a2 = scaled.dot(&scaled);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = |k: usize| c(PADE13[k], 0.0);
    let lin = |x: &CMatrix, y: &CMatrix, z: &CMatrix, cx: C64, cy: C64, cz: C64| {
        x.mapv(|v| v * cx) + y.mapv(|v| v * cy) + z.mapv(|v| v * cz)
    };
    let u_inner = a6.dot(&lin(&a6, &a4, &a2, b(13), b(11), b(9)))
        + lin(&a6, &a4, &a2, b(7), b(5), b(3))
        + id.mapv(|v| v * b(1));
    let u = scaled.dot(&u_inner);
    let v = a6.dot(&lin(&a6, &a4, &a2, b(12), b(10), b(8)))
        + lin(&a6, &a4, &a2, b(6), b(4), b(2))
        + id.mapv(|v| v * b(0));
    let denominator = &v - &u;
    let numerator = &v + &u;
    let mut r = solve_matrix(&denominator, &numerator)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(r)
}

/// `A^{-1} B` column by column through one LU factorisation.
pub fn solve_matrix(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let lu = InverseMap::new(a)?;
    let mut out = Array2::zeros(b.dim());
    for (j, col) in b.axis_iter(Axis(1)).enumerate() {
        let x = lu.solve(&col.to_owned())?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize, shift: f64) -> CMatrix {
        Array2::from_shape_fn((n, n), |(i, j)| {
            let t = ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5;
            let u = ((i * 7 + j * 29) % 19) as f64 / 19.0 - 0.5;
            c(t + if i == j { shift } else { 0.0 }, u)
        })
    }

    #[test]
    fn lanczos_matches_dense_smallest_singular_value() {
        let a = test_matrix(60, 0.3);
        let dense = dense_smallest(&a).unwrap().value;
        let inv = InverseMap::new(&a).unwrap();
        let (sigma, _) = inverse_norm_of(&inv).unwrap();
        assert!((1.0 / sigma - dense).abs() <= 1e-9 * dense);
    }

    #[test]
    fn iterative_path_above_dense_limit() {
        let a = test_matrix(DENSE_LIMIT + 40, 1.5);
        let iterative = smallest_singular(&a).unwrap();
        let dense = dense_smallest(&a).unwrap();
        assert!((iterative.value - dense.value).abs() <= 1e-9 * dense.value);
        let residual = vector_norm(&a.dot(&iterative.vector));
        assert!((residual - iterative.value).abs() <= 1e-8 * dense.value.max(1e-12));
    }

    #[test]
    fn expm_of_rotation_generator() {
        let theta = 2.3;
        let a = Array2::from_shape_vec((2, 2), vec![c(0.0, 0.0), c(theta, 0.0), c(-theta, 0.0), c(0.0, 0.0)]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - c(theta.cos(), 0.0)).norm() < 1e-14);
        assert!((e[(0, 1)] - c(theta.sin(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal_and_nilpotent() {
        let mut a = Array2::zeros((3, 3));
        a[(0, 0)] = c(-40.0, 3.0);
        a[(1, 1)] = c(0.5, 0.0);
        a[(1, 2)] = c(7.0, 0.0);
        a[(2, 2)] = c(0.5, 0.0);
        let e = expm(&a).unwrap();
        let expect = c(-40.0, 3.0).exp();
        assert!((e[(0, 0)] - expect).norm() <= 1e-12 * expect.norm().max(1e-300));
        assert!((e[(1, 2)] - c(7.0 * 0.5f64.exp(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let a = test_matrix(12, 0.0);
        let h = adjoint(&a).dot(&a);
        let r = psd_sqrt(&h).unwrap();
        let back = r.dot(&r);
        assert!(frobenius(&(&back - &h)) <= 1e-11 * frobenius(&h));
    }
}
