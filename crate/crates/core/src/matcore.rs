//! Dense complex matrix kernel.
//!
//! Everything here works on `nalgebra::DMatrix<Complex<f64>>`. Hermitian
//! inputs are symmetrized before any eigensolve, eigenvalues come back in
//! ascending order, and singular values in descending order.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for constructive checks (commutation, idempotence of outputs).
pub const CHECK_TOL: f64 = 1e-9;
/// Tolerance used when symmetrizing nominally Hermitian data.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMatrix {
    CMatrix::zeros(rows, cols)
}

/// The matrix unit `e_ij` in `M_n`.
pub fn matrix_unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(n, n);
    m[(i, j)] = c(1.0);
    m
}

pub fn basis_vector(n: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[i] = c(1.0);
    v
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Relative Hermitian defect `max|A - A*| / max|A|` (0 for the zero matrix).
pub fn hermitian_defect(a: &CMatrix) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    max_abs(&(a - a.adjoint())) / scale
}

/// Eigendecomposition of the Hermitian part of `h`, eigenvalues ascending.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(h: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(h).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    eigvalsh(h).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(h: &CMatrix) -> f64 {
    eigvalsh(h).last().copied().unwrap_or(0.0)
}

/// Thin SVD `a = u diag(s) v*` with singular values in descending order.
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn svd(a: &CMatrix) -> Svd {
    let dec = a.clone().svd(true, true);
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let k = dec.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| dec.singular_values[y].total_cmp(&dec.singular_values[x]));
    let mut uu = zeros(u.nrows(), k);
    let mut vv = zeros(v_t.ncols(), k);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &v_t.row(src).adjoint());
        s.push(dec.singular_values[src]);
    }
    Svd { u: uu, s, v: vv }
}

pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Operator (spectral) norm.
pub fn op_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a).first().copied().unwrap_or(0.0)
}

pub fn trace_norm(a: &CMatrix) -> f64 {
    singular_values(a).iter().sum()
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(h: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = eigh(h);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for j in 0..n {
        let fj = c(f(vals[j]));
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

pub fn psd_sqrt(h: &CMatrix) -> CMatrix {
    hermitian_fn(h, |x| x.max(0.0).sqrt())
}

/// `h^{-1/2}` for positive definite `h`; errors when an eigenvalue is below `floor`.
pub fn psd_inv_sqrt(h: &CMatrix, floor: f64) -> Result<CMatrix> {
    let lo = min_eigenvalue(h);
    if lo <= floor {
        return Err(Error::DegenerateInput(format!(
            "matrix not positive definite (min eigenvalue {lo:e})"
        )));
    }
    Ok(hermitian_fn(h, |x| 1.0 / x.sqrt()))
}

/// Columns of `a` orthonormalized by thin SVD, keeping singular values above `tol`.
pub fn range_frame(a: &CMatrix, tol: f64) -> CMatrix {
    let d = svd(a);
    let keep = d.s.iter().take_while(|&&s| s > tol).count();
    d.u.columns(0, keep).into_owned()
}

/// Orthogonal projection onto a subspace, with its rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    matrix: CMatrix,
    rank: usize,
}

impl Projection {
    /// Validate `m` as a projection: `‖P²−P‖ ≤ tol`, `‖P−P*‖ ≤ tol`, trace near an integer.
    pub fn new(m: CMatrix, tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "projection",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let idem = op_norm(&(&m * &m - &m));
        let herm = op_norm(&(&m - m.adjoint()));
        let residual = idem.max(herm);
        if residual > tol {
            return Err(Error::NotProjection { residual });
        }
        let tr = m.trace().re;
        let rank = tr.round().max(0.0) as usize;
        if (tr - rank as f64).abs() > 1e-8_f64.max(tol) {
            return Err(Error::NotProjection {
                residual: (tr - rank as f64).abs(),
            });
        }
        Ok(Self {
            matrix: hermitian_part(&m),
            rank,
        })
    }

    /// Projection onto the column span of a frame with orthonormal columns.
    pub fn from_frame(frame: &CMatrix) -> Self {
        Self {
            matrix: hermitian_part(&(frame * frame.adjoint())),
            rank: frame.ncols(),
        }
    }

    /// Projection onto the span of the columns of `a` (not necessarily orthonormal).
    pub fn onto_span(a: &CMatrix, tol: f64) -> Self {
        Self::from_frame(&range_frame(a, tol))
    }

    pub fn from_vector(v: &CVector) -> Self {
        let u = v / c(v.norm());
        Self {
            matrix: &u * u.adjoint(),
            rank: 1,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            matrix: zeros(n, n),
            rank: 0,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: identity(n),
            rank: n,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn complement(&self) -> Self {
        Self {
            matrix: identity(self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
        }
    }

    /// Orthonormal basis of the range, as columns (top eigenvectors).
    pub fn frame(&self) -> CMatrix {
        let (_, vecs) = eigh(&self.matrix);
        let n = self.dim();
        vecs.columns(n - self.rank, self.rank).into_owned()
    }

    pub fn distance(&self, other: &Projection) -> f64 {
        op_norm(&(&self.matrix - &other.matrix))
    }
}

/// Isometry `w` with `ww* = p` closest to `v`: the polar part of `pv = w|pv|`.
pub fn polar_isometry(v: &CMatrix, p: &Projection) -> Result<CMatrix> {
    if v.nrows() != p.dim() {
        return Err(Error::DimensionMismatch {
            context: "polar_isometry",
            expected: p.dim(),
            found: v.nrows(),
        });
    }
    let n = v.ncols();
    let gram_defect = op_norm(&(v.adjoint() * v - identity(n)));
    if gram_defect > 1e-10 {
        return Err(Error::OutOfRange(format!(
            "v is not an isometry (‖v*v−1‖ = {gram_defect:e})"
        )));
    }
    if p.rank() != n {
        return Err(Error::DimensionMismatch {
            context: "polar_isometry rank",
            expected: n,
            found: p.rank(),
        });
    }
    let pv = p.matrix() * v;
    let d = svd(&pv);
    let smallest = d.s.last().copied().unwrap_or(0.0);
    if smallest < 1e-10 {
        return Err(Error::DegenerateInput(format!(
            "pv has singular value {smallest:e}; ‖vv*−p‖ < 1/2 is violated"
        )));
    }
    Ok(&d.u * d.v.adjoint())
}

/// Spectral projection of `h` for the eigenvalues in `[lo, hi]`.
///
/// Fails when an eigenvalue sits within `tol` of either end of the window.
pub fn spectral_projection(h: &CMatrix, lo: f64, hi: f64, tol: f64) -> Result<Projection> {
    let (vals, vecs) = eigh(h);
    for &lambda in &vals {
        for boundary in [lo, hi] {
            if (lambda - boundary).abs() <= tol {
                return Err(Error::AmbiguousCut {
                    eigenvalue: lambda,
                    boundary,
                    tol,
                });
            }
        }
    }
    let cols: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i] >= lo && vals[i] <= hi)
        .collect();
    let mut frame = zeros(h.nrows(), cols.len());
    for (dst, &src) in cols.iter().enumerate() {
        frame.set_column(dst, &vecs.column(src));
    }
    Ok(Projection::from_frame(&frame))
}

/// Midpoint of the largest gap of the (ascending) spectrum inside `[lo, hi]`.
pub fn largest_gap_cut(sorted_eigs: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let mut best: Option<(f64, f64)> = None;
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend_from_slice(sorted_eigs);
    edges.push(f64::INFINITY);
    for w in edges.windows(2) {
        let a = w[0].max(lo);
        let b = w[1].min(hi);
        if b > a && best.is_none_or(|(x, y)| b - a > y - x) {
            best = Some((a, b));
        }
    }
    best.map(|(a, b)| 0.5 * (a + b))
}

/// A unital *-algebra given by a spanning set, validated for closure.
pub struct StarAlgebra {
    basis: Vec<CMatrix>,
    dim: usize,
    /// `Some((n, m))` when the algebra is known to be `M_n ⊗ 1_m`.
    tensor_shape: Option<(usize, usize)>,
}

impl StarAlgebra {
    pub fn new(basis: Vec<CMatrix>, tol: f64) -> Result<Self> {
        let dim = basis.first().map(|b| b.nrows()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidAlgebra { residual: f64::INFINITY });
        }
        for b in &basis {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    context: "algebra basis",
                    expected: dim,
                    found: b.nrows().max(b.ncols()),
                });
            }
        }
        let basis: Vec<CMatrix> = basis
            .into_iter()
            .filter(|b| b.norm() > 0.0)
            .map(|b| {
                let s = b.norm();
                b / c(s)
            })
            .collect();
        let onb = orthonormalize(&basis);
        let residual_of = |x: &CMatrix| -> f64 {
            let mut r = x.clone();
            for q in &onb {
                let coef = q.dotc(&r);
                r -= q * coef;
            }
            r.norm() / x.norm().max(1.0)
        };
        let mut residual = residual_of(&identity(dim));
        for a in &basis {
            residual = residual.max(residual_of(&a.adjoint()));
            for b in &basis {
                residual = residual.max(residual_of(&(a * b)));
            }
        }
        if residual > tol {
            return Err(Error::InvalidAlgebra { residual });
        }
        Ok(Self {
            basis,
            dim,
            tensor_shape: None,
        })
    }

    /// `M_n ⊗ 1_m` on `C^n ⊗ C^m`, spanned by `e_ij ⊗ 1_m`; closure holds by construction.
    pub fn amplified_full(n: usize, m: usize) -> Self {
        Self {
            basis: amplified_matrix_units(n, m),
            dim: n * m,
            tensor_shape: Some((n, m)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &[CMatrix] {
        &self.basis
    }

    fn laplacian(&self, y: &CMatrix) -> CMatrix {
        let mut out = zeros(self.dim, self.dim);
        for b in &self.basis {
            let inner = commutator(b, y);
            out += commutator(&b.adjoint(), &inner);
        }
        out
    }

    /// Hilbert–Schmidt orthogonal projection of `t` onto the commutant.
    ///
    /// The commutant is the kernel of `L(y) = Σ [b*, [b, y]]`; the projection
    /// is `t − z` with `z` the minimum-norm solution of `L z = L t`, found by
    /// conjugate gradients started at zero.
    pub fn commutant_project(&self, t: &CMatrix) -> Result<CMatrix> {
        if t.nrows() != self.dim || t.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "commutant_project",
                expected: self.dim,
                found: t.nrows(),
            });
        }
        if let Some((n, m)) = self.tensor_shape {
            // commutant is 1_n ⊗ M_m; the orthogonal projection is 1_n ⊗ tr_1(t)/n
            let reduced = partial_trace_first(t, n, m) / c(n as f64);
            return Ok(kron(&identity(n), &reduced));
        }
        self.project_iterative(t)
    }

    /// Conjugate-gradient path, valid for any validated algebra.
    pub fn project_iterative(&self, t: &CMatrix) -> Result<CMatrix> {
        let mut y = t.clone();
        // two sweeps: the second removes what round-off left in the range of L
        for _ in 0..2 {
            let z = self.cg_range_component(&y);
            y -= z;
        }
        let scale = t.norm().max(1e-300);
        let defect = self
            .basis
            .iter()
            .map(|b| op_norm(&commutator(b, &y)))
            .fold(0.0, f64::max);
        if defect > CHECK_TOL * scale.max(1.0) {
            return Err(Error::SolverNonConvergence {
                iterations: self.dim * self.dim,
                lower: 0.0,
                upper: defect,
            });
        }
        Ok(y)
    }

    fn cg_range_component(&self, t: &CMatrix) -> CMatrix {
        let rhs = self.laplacian(t);
        let rhs_norm = rhs.norm();
        let mut z = zeros(self.dim, self.dim);
        if rhs_norm == 0.0 {
            return z;
        }
        let mut r = rhs.clone();
        let mut p = r.clone();
        let mut rr = r.norm_squared();
        let max_iter = self.dim * self.dim + 16;
        for _ in 0..max_iter {
            let lp = self.laplacian(&p);
            let denom = p.dotc(&lp).re;
            if denom <= 0.0 {
                break;
            }
            let alpha = c(rr / denom);
            z += &p * alpha;
            r -= &lp * alpha;
            let rr_new = r.norm_squared();
            if rr_new.sqrt() <= 1e-15 * rhs_norm {
                break;
            }
            p = &r + &p * c(rr_new / rr);
            rr = rr_new;
        }
        z
    }
}

/// Gram–Schmidt (twice) in the Hilbert–Schmidt inner product.
fn orthonormalize(set: &[CMatrix]) -> Vec<CMatrix> {
    let mut out: Vec<CMatrix> = Vec::new();
    for x in set {
        let mut r = x.clone();
        for _ in 0..2 {
            for q in &out {
                let coef = q.dotc(&r);
                r -= q * coef;
            }
        }
        let nr = r.norm();
        if nr > 1e-10 * x.norm().max(1e-300) {
            out.push(r / c(nr));
        }
    }
    out
}

/// One-shot commutant projection; validates the algebra each call.
pub fn commutant_project(algebra_basis: Vec<CMatrix>, t: &CMatrix) -> Result<CMatrix> {
    StarAlgebra::new(algebra_basis, CHECK_TOL)?.commutant_project(t)
}

/// Basis `{e_ij ⊗ 1_m}` of `M_n ⊗ 1_m` acting on `C^n ⊗ C^m`.
pub fn amplified_matrix_units(n: usize, m: usize) -> Vec<CMatrix> {
    let one = identity(m);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(kron(&matrix_unit(n, i, j), &one));
        }
    }
    out
}

/// Partial trace over the first tensor factor of `C^a ⊗ C^b`.
pub fn partial_trace_first(m: &CMatrix, a: usize, b: usize) -> CMatrix {
    let mut out = zeros(b, b);
    for i in 0..a {
        out += m.view((i * b, i * b), (b, b));
    }
    out
}

/// Fix the global phase of a vector so its first entry above `tol` is real positive.
pub fn canonical_phase(v: &CVector, tol: f64) -> CVector {
    for z in v.iter() {
        if z.norm() > tol {
            let phase = z.conj() / c(z.norm());
            return v * phase;
        }
    }
    v.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_unitary, random_hermitian, random_isometry, rng_from_seed};

    #[test]
    fn polar_identity_case() {
        let mut rng = rng_from_seed(7);
        let v = random_isometry(8, 3, &mut rng);
        let p = Projection::from_frame(&v);
        let w = polar_isometry(&v, &p).unwrap();
        assert!((&w - &v).norm() < 1e-12);
    }

    #[test]
    fn polar_bound_and_range() {
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let v = random_isometry(8, 4, &mut rng);
            let h = random_hermitian(8, &mut rng);
            let h = &h / c(op_norm(&h));
            let rot = hermitian_fn(&h, |_| 0.0); // placeholder to keep shape
            drop(rot);
            let (vals, vecs) = eigh(&h);
            let mut d = zeros(8, 8);
            for k in 0..8 {
                d[(k, k)] = C64::from_polar(1.0, 0.15 * vals[k]);
            }
            let u = &vecs * d * vecs.adjoint();
            let p = Projection::from_frame(&(&u * &v));
            let eps = op_norm(&(&v * v.adjoint() - p.matrix()));
            assert!(eps < 0.5);
            let w = polar_isometry(&v, &p).unwrap();
            assert!(op_norm(&(w.adjoint() * &w - identity(4))) < 1e-9);
            assert!(op_norm(&(&w * w.adjoint() - p.matrix())) < 1e-9);
            assert!(op_norm(&(&v - &w)) <= 2.0 * eps + 1e-12);
            // idempotent on own output
            let w2 = polar_isometry(&w, &p).unwrap();
            assert!(op_norm(&(&w2 - &w)) < 1e-12);
        }
    }

    #[test]
    fn polar_rank_deficient_errors() {
        let v = basis_vector(4, 0);
        let v = CMatrix::from_column_slice(4, 1, v.as_slice());
        let p = Projection::from_vector(&basis_vector(4, 1));
        assert!(matches!(
            polar_isometry(&v, &p),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn spectral_projection_diag() {
        let mut h = zeros(2, 2);
        h[(1, 1)] = c(1.0);
        let p = spectral_projection(&h, 0.5, 1.5, 1e-9).unwrap();
        assert_eq!(p.rank(), 1);
        assert!((p.matrix() - matrix_unit(2, 1, 1)).norm() < 1e-14);
    }

    #[test]
    fn spectral_projection_boundary_errors() {
        let mut h = zeros(2, 2);
        h[(1, 1)] = c(1.0);
        assert!(matches!(
            spectral_projection(&h, 0.5, 1.0, 1e-9),
            Err(Error::AmbiguousCut { .. })
        ));
    }

    #[test]
    fn spectral_projection_two_cluster_spectrum() {
        // sp(x) ⊂ [0, 12√δ] ∪ [1 − 12√δ, 1] for δ = 0.001
        let delta: f64 = 0.001;
        let w = 12.0 * delta.sqrt();
        let mut rng = rng_from_seed(3);
        let u = haar_unitary(6, &mut rng);
        let spec = [0.0, 0.5 * w, w, 1.0 - w, 1.0 - 0.3 * w, 1.0];
        let mut d = zeros(6, 6);
        for (k, s) in spec.iter().enumerate() {
            d[(k, k)] = c(*s);
        }
        let x = &u * d * u.adjoint();
        let p = spectral_projection(&x, 1.0 - w - 1e-6, 1.0 + 1e-6, 1e-9).unwrap();
        assert_eq!(p.rank(), 3);
        let dist = op_norm(&(p.matrix() - &x));
        assert!(dist <= w + 1e-12, "{dist} vs {w}");
        assert!((w - 0.3795).abs() < 1e-4);
    }

    #[test]
    fn spectral_projection_at_largest_gap_matches_sorted_eigenvectors() {
        let mut rng = rng_from_seed(5);
        let h = random_hermitian(6, &mut rng);
        let (vals, vecs) = eigh(&h);
        let cut = largest_gap_cut(&vals, vals[0], vals[5]).unwrap();
        let p = spectral_projection(&h, cut, vals[5] + 1.0, 1e-9).unwrap();
        let above: Vec<usize> = (0..6).filter(|&i| vals[i] > cut).collect();
        let mut oracle = zeros(6, 6);
        for &i in &above {
            let col = vecs.column(i);
            oracle += &col * col.adjoint();
        }
        assert!((p.matrix() - oracle).norm() < 1e-10);
        assert!(op_norm(&(p.matrix() * p.matrix() - p.matrix())) < 1e-10);
        assert!(op_norm(&commutator(p.matrix(), &h)) < 1e-10);
        let q = spectral_projection(&h, vals[0] - 1.0, cut, 1e-9).unwrap();
        assert!((p.matrix() + q.matrix() - identity(6)).norm() < 1e-10);
    }

    #[test]
    fn commutant_of_full_algebra_is_scalar() {
        let mut rng = rng_from_seed(1);
        let t = crate::random::ginibre(3, 3, &mut rng);
        let y = commutant_project(amplified_matrix_units(3, 1), &t).unwrap();
        let expect = identity(3) * (t.trace() / c(3.0));
        assert!((y - expect).norm() < 1e-12);
    }

    #[test]
    fn commutant_of_scalars_is_everything() {
        let mut rng = rng_from_seed(2);
        let t = crate::random::ginibre(4, 4, &mut rng);
        let y = commutant_project(vec![identity(4)], &t).unwrap();
        assert!((y - t).norm() < 1e-12);
    }

    #[test]
    fn commutant_of_tensor_factor_is_partial_trace() {
        let mut rng = rng_from_seed(4);
        let t = crate::random::ginibre(6, 6, &mut rng);
        let y = commutant_project(amplified_matrix_units(2, 3), &t).unwrap();
        let reduced = partial_trace_first(&t, 2, 3) / c(2.0);
        let expect = kron(&identity(2), &reduced);
        assert!((y - expect).norm() < 1e-11);
    }

    #[test]
    fn closed_form_tensor_commutant_matches_cg() {
        let mut rng = rng_from_seed(6);
        let t = crate::random::ginibre(8, 8, &mut rng);
        let fast = StarAlgebra::amplified_full(2, 4).commutant_project(&t).unwrap();
        let slow = StarAlgebra::new(amplified_matrix_units(2, 4), 1e-9)
            .unwrap()
            .project_iterative(&t)
            .unwrap();
        assert!((fast - slow).norm() < 1e-11);
    }

    #[test]
    fn non_closed_basis_is_rejected() {
        let basis = vec![identity(2), matrix_unit(2, 0, 1)];
        assert!(matches!(
            StarAlgebra::new(basis, 1e-9),
            Err(Error::InvalidAlgebra { .. })
        ));
    }

    #[test]
    fn projection_validation() {
        let mut rng = rng_from_seed(9);
        let v = random_isometry(5, 2, &mut rng);
        let p = Projection::new(&v * v.adjoint(), 1e-10).unwrap();
        assert_eq!(p.rank(), 2);
        assert!(Projection::new(identity(3) * c(0.5), 1e-10).is_err());
        let f = p.frame();
        assert!((Projection::from_frame(&f).matrix() - p.matrix()).norm() < 1e-12);
    }
}
