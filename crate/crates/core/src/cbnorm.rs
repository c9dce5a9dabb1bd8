//! Operator and completely bounded norms of linear maps.
//!
//! Lower bounds always come from an explicit witness `X` (with `‖X‖ = 1`)
//! whose image is evaluated directly. The cb-norm upper bound comes from a
//! feasible point of the dual semidefinite program, assembled in closed form
//! from the current primal iterate, so every reported upper bound is valid
//! no matter when the iteration stops.

use nalgebra::Cholesky;
use serde::Serialize;

use crate::cpmap::{LinearMap, MatLinMap};
use crate::error::{Error, Result};
use crate::matcore::{
    c, eigh, identity, kron, matrix_unit, max_abs, max_eigenvalue, op_norm, partial_trace_first,
    singular_values, svd, zeros, CMatrix, CVector,
};
use crate::par::map_indexed;
use crate::random::{derive_seed, ginibre, haar_unitary, random_unit_vector, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    /// `‖T(1)‖` for completely positive maps.
    CpUnit,
    /// Primal ascent with a dual semidefinite certificate.
    PrimalDual,
    /// Alternating ascent; upper bound taken from the cb norm.
    Ascent,
    /// Witness for the inverse norm; no finite upper bound.
    InverseWitness,
    /// Maximum over codomain blocks.
    Blockwise,
}

#[derive(Clone, Debug)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub method: NormMethod,
    /// Norm-one input achieving `lower`, at amplification level `level`.
    pub witness: CMatrix,
    pub level: usize,
}

impl NormEstimate {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NormOptions {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Relative primal-dual gap at which the cb iteration stops.
    pub cb_tol: f64,
    pub cb_max_iter: usize,
    /// Error out when the cb gap is still above `1e-6` after `cb_max_iter`.
    pub strict: bool,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iter: 300,
            seed: 0x5eed,
            cb_tol: 1e-9,
            cb_max_iter: 20_000,
            strict: true,
        }
    }
}

impl NormOptions {
    /// Lighter settings for batch trials; upper bounds stay certified.
    pub fn fast() -> Self {
        Self {
            restarts: 8,
            max_iter: 150,
            cb_tol: 1e-7,
            cb_max_iter: 400,
            strict: false,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const STREAM_NORM: u64 = 0x6e6f726d;
const STREAM_POSMIN: u64 = 0x706f736d;
const STREAM_INV: u64 = 0x696e7600;

fn polar_unitary(g: &CMatrix) -> CMatrix {
    let d = svd(g);
    &d.u * d.v.adjoint()
}

fn top_pair(y: &CMatrix) -> (f64, CVector, CVector) {
    let d = svd(y);
    (d.s[0], d.u.column(0).into_owned(), d.v.column(0).into_owned())
}

/// Alternating ascent for `max ‖T^{(m)}(X)‖` over `‖X‖ ≤ 1` from one start.
fn ascend<M: LinearMap + ?Sized>(t: &M, m: usize, start: CMatrix, max_iter: usize) -> (f64, CMatrix) {
    let mut x = start;
    let mut best = op_norm(&t.apply_amplified(&x, m));
    let mut best_x = x.clone();
    for _ in 0..max_iter {
        let y = t.apply_amplified(&x, m);
        let (s, a, b) = top_pair(&y);
        if s == 0.0 {
            break;
        }
        let g = t.apply_amplified_adjoint(&(&a * b.adjoint()), m);
        x = polar_unitary(&g);
        let value = op_norm(&t.apply_amplified(&x, m));
        if value > best {
            let improved = value - best;
            best = value;
            best_x = x.clone();
            if improved <= 1e-14 * value {
                break;
            }
        } else {
            break;
        }
    }
    (best, best_x)
}

fn ascent_starts(dim: usize, opts: &NormOptions) -> Vec<CMatrix> {
    let mut starts = vec![identity(dim)];
    let structured = if dim <= 4 { dim * dim } else { 2 * dim - 1 };
    for idx in 0..structured {
        let (i, j) = if dim <= 4 {
            (idx / dim, idx % dim)
        } else if idx < dim {
            (idx, 0)
        } else {
            (0, idx - dim + 1)
        };
        starts.push(matrix_unit(dim, i, j));
    }
    starts.truncate(opts.restarts.max(1));
    let random = opts.restarts.saturating_sub(starts.len());
    for r in 0..random {
        let mut rng = rng_from_seed(derive_seed(opts.seed, STREAM_NORM, r as u64));
        starts.push(haar_unitary(dim, &mut rng));
    }
    starts
}

/// Witnessed lower bound on `‖T^{(m)}‖`, with its witness.
pub fn amplified_norm_lower<M: LinearMap + ?Sized>(
    t: &M,
    m: usize,
    opts: &NormOptions,
) -> (f64, CMatrix) {
    let dim = m * t.dom_dim();
    let starts = ascent_starts(dim, opts);
    let runs = map_indexed(starts.len(), |i| ascend(t, m, starts[i].clone(), opts.max_iter));
    // first-found wins ties
    let mut best = (f64::NEG_INFINITY, identity(dim));
    for (v, x) in runs {
        if v > best.0 {
            best = (v, x);
        }
    }
    best
}

/// `‖T^{(m)}‖` lower bound as a [`NormEstimate`]; upper from `m`·cb bound is not attempted.
pub fn amplified_norm(t: &MatLinMap, m: usize, opts: &NormOptions) -> Result<NormEstimate> {
    let (lower, witness) = amplified_norm_lower(t, m, opts);
    let cb = cb_norm(t, opts)?;
    Ok(NormEstimate {
        lower,
        upper: cb.upper.max(lower),
        method: NormMethod::Ascent,
        witness,
        level: m,
    })
}

/// Single-start ascent for `‖T^{(m)}‖` from a chosen norm-one `start`.
pub fn norm_ascent_from<M: LinearMap + ?Sized>(
    t: &M,
    m: usize,
    start: CMatrix,
    max_iter: usize,
) -> (f64, CMatrix) {
    ascend(t, m, start, max_iter)
}

/// Operator norm of `T` as a map on `(M_n, ‖·‖)`.
pub fn map_norm(t: &MatLinMap, opts: &NormOptions) -> Result<NormEstimate> {
    let (lower, witness) = amplified_norm_lower(t, 1, opts);
    let cb = cb_norm(t, opts)?;
    Ok(NormEstimate {
        lower,
        upper: cb.upper.max(lower),
        method: NormMethod::Ascent,
        witness,
        level: 1,
    })
}

/// Witnessed lower bound on `‖T‖` for maps without a dense Choi matrix.
pub fn map_norm_lower<M: LinearMap + ?Sized>(t: &M, opts: &NormOptions) -> (f64, CMatrix) {
    amplified_norm_lower(t, 1, opts)
}

/// Completely bounded norm.
///
/// Block codomains take the maximum over blocks; CP maps return `‖T(1)‖`.
pub fn cb_norm(t: &MatLinMap, opts: &NormOptions) -> Result<NormEstimate> {
    if t.blocks().len() > 1 {
        let mut best: Option<NormEstimate> = None;
        for i in 0..t.blocks().len() {
            let est = cb_norm(&t.coordinate(i)?, opts)?;
            if best.as_ref().is_none_or(|b| est.upper > b.upper) {
                best = Some(est);
            }
        }
        let mut est = best.expect("at least one block");
        // witness was evaluated on a coordinate; it is also a witness for the sum
        est.lower = op_norm(&t.apply_amplified(&est.witness, est.level)).max(est.lower);
        est.method = NormMethod::Blockwise;
        return Ok(est);
    }
    let n = t.dom_dim();
    let scale = max_abs(t.choi());
    if scale == 0.0 {
        return Ok(NormEstimate {
            lower: 0.0,
            upper: 0.0,
            method: NormMethod::CpUnit,
            witness: identity(n),
            level: 1,
        });
    }
    if t.is_hermitian_preserving() && t.is_cp(1e-13 * scale).is_cp {
        let v = op_norm(&t.apply(&identity(n)));
        return Ok(NormEstimate {
            lower: v,
            upper: v,
            method: NormMethod::CpUnit,
            witness: identity(n),
            level: 1,
        });
    }
    primal_dual(t, opts)
}

fn one_kron(n: usize, b: &CMatrix) -> CMatrix {
    kron(&identity(n), b)
}

/// `Σ_i` of the diagonal `k×k` blocks.
fn ptr_in(m: &CMatrix, n: usize, k: usize) -> CMatrix {
    partial_trace_first(m, n, k)
}

/// Feasible dual value `sqrt(λmax(tr₁P)·λmax(tr₁ J*P⁻¹J))` built from the primal iterate.
fn dual_upper(j: &CMatrix, b0: &CMatrix, b1: &CMatrix, n: usize, k: usize) -> f64 {
    let jb1 = j * one_kron(n, b1);
    let mmat = one_kron(n, &b0.adjoint()) * &jb1;
    let d = svd(&mmat);
    let s0 = d.s[0];
    if s0 == 0.0 {
        return f64::INFINITY;
    }
    let keep: Vec<usize> = (0..d.s.len()).filter(|&i| d.s[i] > s0 * 1e-13).collect();
    let mut yk = zeros(mmat.ncols(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        yk.set_column(dst, &(d.v.column(src) * c(1.0 / d.s[src].sqrt())));
    }
    let l = jb1 * yk;
    let base = &l * l.adjoint();
    let pn = op_norm(&base).max(1e-300);
    let mut eps = 1e-11;
    for _ in 0..8 {
        let p = &base + identity(n * k) * c(eps * pn);
        if let Some(chol) = Cholesky::new(p.clone()) {
            if let Some(z) = chol.l().solve_lower_triangular(j) {
                let q = z.adjoint() * z;
                let a = max_eigenvalue(&ptr_in(&p, n, k));
                let b = max_eigenvalue(&ptr_in(&q, n, k));
                return (a * b).max(0.0).sqrt();
            }
        }
        eps *= 100.0;
    }
    f64::INFINITY
}

/// Witness `X ∈ M_k ⊗ M_n` from the polar factor `V` of `(1⊗B0*)J(1⊗B1)`.
fn primal_witness(v: &CMatrix, n: usize, k: usize) -> CMatrix {
    let mut x = zeros(n * k, n * k);
    for i in 0..n {
        for s in 0..k {
            for j in 0..n {
                for t in 0..k {
                    // V^T, reindexed from (i,s) to (s,i)
                    x[(s * n + i, t * n + j)] = v[(j * k + t, i * k + s)];
                }
            }
        }
    }
    x
}

fn primal_dual(t: &MatLinMap, opts: &NormOptions) -> Result<NormEstimate> {
    let (n, k) = (t.dom_dim(), t.cod_dim());
    let j = t.choi();
    let mut b0 = identity(k) * c(1.0 / (k as f64).sqrt());
    let mut b1 = b0.clone();
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut best_v = identity(n * k);
    let mut iterations = 0;
    for it in 0..opts.cb_max_iter.max(1) {
        iterations = it + 1;
        let mm = one_kron(n, &b0.adjoint()) * j * one_kron(n, &b1);
        let d = svd(&mm);
        let v = &d.v * d.u.adjoint();
        let value: f64 = d.s.iter().sum();
        if value > lo {
            lo = value;
            best_v = v.clone();
        }
        let c0 = ptr_in(&(j * one_kron(n, &b1) * &v), n, k);
        let c0n = c0.norm();
        if c0n > 0.0 {
            b0 = c0 / c(c0n);
        }
        let mm = one_kron(n, &b0.adjoint()) * j * one_kron(n, &b1);
        let d = svd(&mm);
        let v = &d.v * d.u.adjoint();
        let value: f64 = d.s.iter().sum();
        if value > lo {
            lo = value;
            best_v = v.clone();
        }
        let c1 = ptr_in(&(&v * one_kron(n, &b0.adjoint()) * j), n, k).adjoint();
        let c1n = c1.norm();
        if c1n > 0.0 {
            b1 = c1 / c(c1n);
        }
        if it % 10 == 0 || it + 1 == opts.cb_max_iter {
            hi = hi.min(dual_upper(j, &b0, &b1, n, k));
            if hi - lo < opts.cb_tol * hi.max(1.0) {
                break;
            }
        }
    }
    hi = hi.min(dual_upper(j, &b0, &b1, n, k));
    let mut witness = primal_witness(&best_v, n, k);
    let wn = op_norm(&witness);
    if wn > 0.0 {
        witness /= c(wn);
    }
    let mut lower = op_norm(&t.apply_amplified(&witness, k));
    if hi - lower > opts.cb_tol * hi.max(1.0) {
        // a few ascent steps from the primal witness can only help
        let (polished, px) = ascend(t, k, witness.clone(), 50);
        if polished > lower {
            lower = polished;
            witness = px;
        }
    }
    let upper = hi.max(lower);
    if opts.strict && upper - lower > 1e-6 * upper.max(1.0) {
        return Err(Error::SolverNonConvergence {
            iterations,
            lower,
            upper,
        });
    }
    Ok(NormEstimate {
        lower,
        upper,
        method: NormMethod::PrimalDual,
        witness,
        level: k,
    })
}

/// `X ⊕ 0` in `M_to ⊗ M_n` for `X ∈ M_from ⊗ M_n`; preserves the norm and every amplified image norm.
pub fn pad_level(x: &CMatrix, n: usize, to: usize) -> CMatrix {
    let mut out = zeros(to * n, to * n);
    let d = x.nrows().min(to * n);
    out.view_mut((0, 0), (d, d)).copy_from(&x.view((0, 0), (d, d)));
    out
}

/// Lower bounds on `‖T^{(m)}‖` for `m = k, …, k + extra`, `k` the codomain size.
///
/// Each level ascends from the previous witness padded by zeros, so the
/// sequence is non-decreasing; with the cb estimate it brackets Smith's lemma
/// `‖T^{(k)}‖ = ‖T‖_cb`.
pub fn smith_levels(
    t: &MatLinMap,
    extra: usize,
    opts: &NormOptions,
) -> Result<(NormEstimate, Vec<(usize, f64)>)> {
    let cb = cb_norm(t, opts)?;
    let (n, k) = (t.dom_dim(), t.cod_dim());
    // the cb witness may live at a higher level; truncating it is lossy, so
    // level k also gets a fresh multistart
    let (mut x_val, mut x) = amplified_norm_lower(t, k, opts);
    let (v, w) = ascend(t, k, pad_level(&cb.witness, n, k), opts.max_iter);
    if v > x_val {
        (x_val, x) = (v, w);
    }
    let mut out = Vec::with_capacity(extra + 1);
    out.push((k, x_val));
    for m in k + 1..=k + extra {
        let (v, w) = ascend(t, m, pad_level(&x, n, m), opts.max_iter);
        out.push((m, v));
        x = w;
    }
    Ok((cb, out))
}

/// Minimum of `‖T^{(m)}(vv*)‖` over unit `v ∈ C^m ⊗ C^n`, by multi-start descent.
#[derive(Clone, Debug)]
pub struct PositiveMin {
    pub value: f64,
    pub witness: CVector,
    pub level: usize,
    pub restarts: usize,
}

fn lambda_max_image<M: LinearMap + ?Sized>(t: &M, m: usize, v: &CVector) -> (f64, CVector) {
    let y = t.apply_amplified(&(v * v.adjoint()), m);
    let (vals, vecs) = eigh(&y);
    let last = vals.len() - 1;
    (vals[last], vecs.column(last).into_owned())
}

fn descend_positive<M: LinearMap + ?Sized>(
    t: &M,
    m: usize,
    start: CVector,
    max_iter: usize,
) -> (f64, CVector) {
    let mut v = start;
    let (mut f, mut w) = lambda_max_image(t, m, &v);
    let mut eta = 1.0;
    for _ in 0..max_iter {
        let g = t.apply_amplified_adjoint(&(&w * w.adjoint()), m);
        let gv = &g * &v;
        let rayleigh = v.dotc(&gv);
        let dir = &gv - &v * rayleigh;
        let dn = dir.norm();
        if dn <= 1e-14 * f.max(1e-300) {
            break;
        }
        let mut accepted = false;
        eta *= 2.0;
        for _ in 0..40 {
            let cand = &v - &dir * c(eta / dn);
            let cand = &cand / c(cand.norm());
            let (fc, wc) = lambda_max_image(t, m, &cand);
            if fc < f {
                let gain = f - fc;
                v = cand;
                f = fc;
                w = wc;
                accepted = gain > 1e-15 * f.max(1e-300);
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (f, v)
}

/// `min ‖T^{(m)}(q)‖` over rank-one projections `q` (an upper estimate of the true minimum).
pub fn positive_min<M: LinearMap + ?Sized>(t: &M, m: usize, opts: &NormOptions) -> PositiveMin {
    let dim = m * t.dom_dim();
    let mut starts: Vec<CVector> = (0..dim.min(opts.restarts / 2))
        .map(|i| crate::matcore::basis_vector(dim, i))
        .collect();
    let random = opts.restarts.max(1).saturating_sub(starts.len());
    for r in 0..random {
        let mut rng = rng_from_seed(derive_seed(opts.seed, STREAM_POSMIN, r as u64));
        starts.push(random_unit_vector(dim, &mut rng));
    }
    let runs = map_indexed(starts.len(), |i| {
        descend_positive(t, m, starts[i].clone(), opts.max_iter)
    });
    let mut best = (f64::INFINITY, starts[0].clone());
    for (f, v) in runs {
        if f < best.0 {
            best = (f, v);
        }
    }
    PositiveMin {
        value: best.0,
        witness: best.1,
        level: m,
        restarts: starts.len(),
    }
}

/// `(2c − 1)⁻¹`, an upper bound for `‖T⁻¹‖_cb` when `c > 1/2` bounds the positive minimum.
pub fn inverse_cb_upper(c_min: f64) -> Result<f64> {
    if !(c_min > 0.5) {
        return Err(Error::NoCertificate(format!(
            "positive minimum {c_min} does not exceed 1/2"
        )));
    }
    Ok(1.0 / (2.0 * c_min - 1.0))
}

/// Smallest singular value of the superoperator (zero when `k² < n²`).
pub fn injectivity_margin(t: &MatLinMap) -> f64 {
    let s = singular_values(t.superop());
    if t.cod_dim() < t.dom_dim() {
        return 0.0;
    }
    s.last().copied().unwrap_or(0.0)
}

fn schatten_grad(y: &CMatrix, p: f64) -> (f64, CMatrix) {
    let d = svd(y);
    let top = d.s[0];
    if top == 0.0 {
        return (0.0, zeros(y.nrows(), y.ncols()));
    }
    let rel: Vec<f64> = d.s.iter().map(|s| s / top).collect();
    let sum: f64 = rel.iter().map(|r| r.powf(p)).sum();
    let norm = top * sum.powf(1.0 / p);
    let mut us = d.u.clone();
    for (j, r) in rel.iter().enumerate() {
        let w = c(r.powf(p - 1.0) / sum.powf((p - 1.0) / p));
        for i in 0..us.nrows() {
            us[(i, j)] *= w;
        }
    }
    (norm, us * d.v.adjoint())
}

/// Local descent on `‖T^{(m)}(X)‖_p / ‖X‖_p` with continuation in `p`; tracks the true op-norm ratio.
fn descend_inverse(t: &MatLinMap, m: usize, start: CMatrix, max_iter: usize) -> (f64, CMatrix) {
    let ratio = |x: &CMatrix| op_norm(&t.apply_amplified(x, m)) / op_norm(x);
    let mut x = &start / c(op_norm(&start));
    let mut best = (ratio(&x), x.clone());
    let per_phase = (max_iter / 3).max(1);
    for p in [4.0, 16.0, 64.0] {
        let surrogate = |x: &CMatrix| -> (f64, CMatrix) {
            let (ny, gy) = schatten_grad(&t.apply_amplified(x, m), p);
            let (nx, gx) = schatten_grad(x, p);
            let g = t.apply_amplified_adjoint(&gy, m) * c(1.0 / nx) - gx * c(ny / (nx * nx));
            (ny / nx, g)
        };
        let (mut f, mut g) = surrogate(&x);
        let mut eta = 0.1;
        for _ in 0..per_phase {
            let gn = g.norm();
            if gn <= 1e-14 {
                break;
            }
            let mut moved = false;
            eta *= 2.0;
            for _ in 0..30 {
                let cand = &x - &g * c(eta / gn);
                let cand = &cand / c(op_norm(&cand));
                let (fc, gc) = surrogate(&cand);
                if fc < f {
                    moved = f - fc > 1e-15 * f;
                    x = cand;
                    f = fc;
                    g = gc;
                    let r = ratio(&x);
                    if r < best.0 {
                        best = (r, x.clone());
                    }
                    break;
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    best
}

/// Witnessed lower bound on `‖T⁻¹‖_cb` at amplification level `level` (default: the domain size).
pub fn inverse_cb_lower(
    t: &MatLinMap,
    level: Option<usize>,
    opts: &NormOptions,
) -> Result<NormEstimate> {
    let n = t.dom_dim();
    let margin = injectivity_margin(t);
    if margin <= 1e-10 {
        return Err(Error::DegenerateInput(format!(
            "map is numerically non-injective (smallest singular value {margin:e})"
        )));
    }
    let m = level.unwrap_or(n).max(1);
    let dim = m * n;
    let sv = svd(t.superop());
    let mut starts = Vec::new();
    let e11 = matrix_unit(m, 0, 0);
    let bottom = sv.s.len();
    for idx in (0..bottom).rev().take(4.min(bottom)) {
        let col = sv.v.column(idx);
        let x0 = CMatrix::from_column_slice(n, n, col.as_slice());
        starts.push(kron(&e11, &x0));
        if m > 1 {
            starts.push(kron(&identity(m), &x0));
        }
    }
    starts.truncate(opts.restarts.max(1));
    let random = opts.restarts.saturating_sub(starts.len());
    for r in 0..random {
        let mut rng = rng_from_seed(derive_seed(opts.seed, STREAM_INV, r as u64));
        starts.push(ginibre(dim, dim, &mut rng));
    }
    let runs = map_indexed(starts.len(), |i| {
        descend_inverse(t, m, starts[i].clone(), opts.max_iter)
    });
    let mut best = (f64::INFINITY, identity(dim));
    for (r, x) in runs {
        if r < best.0 {
            best = (r, x);
        }
    }
    let (ratio, mut witness) = best;
    witness /= c(op_norm(&witness));
    Ok(NormEstimate {
        lower: 1.0 / ratio,
        upper: f64::INFINITY,
        method: NormMethod::InverseWitness,
        witness,
        level: m,
    })
}

/// `max(lower − 1, floor)` from [`inverse_cb_lower`].
pub fn measured_delta(t: &MatLinMap, level: Option<usize>, opts: &NormOptions) -> Result<f64> {
    Ok((inverse_cb_lower(t, level, opts)?.lower - 1.0).max(1e-9))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_isometry;

    fn opts() -> NormOptions {
        NormOptions {
            restarts: 16,
            ..NormOptions::default()
        }
    }

    #[test]
    fn identity_and_scaling() {
        let id = MatLinMap::identity(3);
        let est = map_norm(&id, &opts()).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-12 && (est.upper - 1.0).abs() < 1e-12);
        let est = map_norm(&id.scale(2.0), &opts()).unwrap();
        assert!((est.lower - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transpose_cb_norm_is_dimension() {
        for n in 2..=3 {
            let t = MatLinMap::transpose_map(n);
            let est = cb_norm(&t, &opts()).unwrap();
            assert!((est.lower - n as f64).abs() < 1e-6, "{est:?}");
            assert!((est.upper - n as f64).abs() < 1e-6);
            let w = op_norm(&t.apply_amplified(&est.witness, est.level));
            assert!((w - est.lower).abs() < 1e-8);
            assert!((map_norm(&t, &opts()).unwrap().lower - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cp_cb_norm_is_norm_of_unit() {
        let mut rng = rng_from_seed(1);
        let t = MatLinMap::from_kraus(&[ginibre(3, 2, &mut rng), ginibre(3, 2, &mut rng)]).unwrap();
        let est = cb_norm(&t, &opts()).unwrap();
        let expect = op_norm(&t.apply(&identity(2)));
        assert!((est.upper - expect).abs() < 1e-12);
        assert_eq!(est.method, NormMethod::CpUnit);
    }

    #[test]
    fn random_map_gap_closes() {
        let mut rng = rng_from_seed(2);
        let t = MatLinMap::from_choi(2, 3, ginibre(6, 6, &mut rng)).unwrap();
        let est = cb_norm(&t, &opts()).unwrap();
        assert!(est.upper - est.lower < 1e-6 * est.upper.max(1.0));
        let w = op_norm(&t.apply_amplified(&est.witness, est.level));
        assert!((w - est.lower).abs() < 1e-8);
    }

    #[test]
    fn difference_of_cp_maps() {
        let mut rng = rng_from_seed(3);
        let v = random_isometry(5, 2, &mut rng);
        let noise = ginibre(5, 2, &mut rng) * c(0.01);
        let a = MatLinMap::from_kraus(std::slice::from_ref(&v)).unwrap();
        let b = MatLinMap::from_kraus(&[v, noise]).unwrap();
        let est = cb_norm(&b.sub(&a).unwrap(), &opts()).unwrap();
        assert!(est.upper - est.lower < 1e-6 * est.upper.max(1.0));
        assert!(est.upper > 0.0);
    }

    #[test]
    fn blocks_take_max() {
        let a = MatLinMap::transpose_map(2);
        let b = MatLinMap::identity(2).scale(1.5);
        let s = MatLinMap::direct_sum(&[a, b]).unwrap();
        let est = cb_norm(&s, &opts()).unwrap();
        assert!((est.upper - 2.0).abs() < 1e-6);
    }

    #[test]
    fn positive_min_identity_and_kernel() {
        let id = MatLinMap::identity(3);
        let pm = positive_min(&id, 2, &opts());
        assert!((pm.value - 1.0).abs() < 1e-12);
        // compression killing e_2: x ↦ P x P with P = diag(1,0)
        let p = CMatrix::from_fn(2, 2, |i, j| c(if i == j && i == 0 { 1.0 } else { 0.0 }));
        let t = MatLinMap::conjugation(&p);
        let pm = positive_min(&t, 1, &opts());
        assert!(pm.value < 1e-12);
        assert!(pm.witness[0].norm() < 1e-6);
    }

    #[test]
    fn inverse_upper_formula() {
        assert_eq!(inverse_cb_upper(1.0).unwrap(), 1.0);
        assert!((inverse_cb_upper(6.0 / 8.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((inverse_cb_upper(38.0 / 40.0).unwrap() - 10.0 / 9.0).abs() < 1e-12);
        let d: f64 = 0.01;
        let u = inverse_cb_upper(1.0 / (1.0 + d).powi(2)).unwrap();
        assert!(u <= 1.0 + 7.0 * d);
        assert!(inverse_cb_upper(0.5).is_err());
    }

    #[test]
    fn inverse_lower_simple_cases() {
        let id = MatLinMap::identity(2);
        let est = inverse_cb_lower(&id, None, &opts()).unwrap();
        assert!((est.lower - 1.0).abs() < 1e-9);
        let half = id.scale(0.5);
        let est = inverse_cb_lower(&half, None, &opts()).unwrap();
        assert!((est.lower - 2.0).abs() < 1e-9);
        let t = 0.1;
        let blend = id.scale(1.0 - t).add(&MatLinMap::depolarizing(2).scale(t)).unwrap();
        let lvl1 = inverse_cb_lower(&blend, Some(1), &opts()).unwrap();
        assert!((lvl1.lower - 1.0 / (1.0 - t)).abs() < 1e-6, "{}", lvl1.lower);
        // amplification can only make the inverse larger
        let est = inverse_cb_lower(&blend, None, &opts()).unwrap();
        assert!(est.lower >= lvl1.lower - 1e-9);
        let image = op_norm(&blend.apply_amplified(&est.witness, est.level));
        assert!((1.0 / image - est.lower).abs() < 1e-8);
        assert!(inverse_cb_lower(&MatLinMap::depolarizing(2), None, &opts()).is_err());
    }
}
