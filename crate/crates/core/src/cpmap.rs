//! Linear maps between matrix algebras.
//!
//! [`MatLinMap`] stores the Choi matrix `Σ e_ij ⊗ T(e_ij)` together with the
//! superoperator it induces on column-major vectorizations. Structured maps
//! too large for a dense Choi matrix implement [`LinearMap`] directly.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matcore::{
    c, eigh, identity, kron, matrix_unit, max_abs, op_norm, zeros, CMatrix, CVector, Projection,
    HERMITIAN_TOL,
};

/// Kraus operators with Choi eigenvalue below this are dropped.
pub const KRAUS_CUTOFF: f64 = 1e-12;

/// A linear map `M_n → M_k` that can be applied together with its
/// Hilbert–Schmidt adjoint.
pub trait LinearMap: Send + Sync {
    fn dom_dim(&self) -> usize;
    fn cod_dim(&self) -> usize;
    fn apply(&self, x: &CMatrix) -> CMatrix;
    fn apply_adjoint(&self, y: &CMatrix) -> CMatrix;

    /// Block sizes of the codomain (a single block unless the codomain is `⊕ M_{k_i}`).
    fn cod_blocks(&self) -> Vec<usize> {
        vec![self.cod_dim()]
    }

    /// `(id_m ⊗ T)(x)` for `x ∈ M_m ⊗ M_n`.
    fn apply_amplified(&self, x: &CMatrix, m: usize) -> CMatrix {
        blockwise(x, m, self.dom_dim(), self.cod_dim(), |b| self.apply(b))
    }

    /// `(id_m ⊗ T)†(y)` for `y ∈ M_m ⊗ M_k`.
    fn apply_amplified_adjoint(&self, y: &CMatrix, m: usize) -> CMatrix {
        blockwise(y, m, self.cod_dim(), self.dom_dim(), |b| self.apply_adjoint(b))
    }

    /// `T(x)·v`; overridden where forming the image is the expensive part.
    fn apply_to_vector(&self, x: &CMatrix, v: &CVector) -> CVector {
        self.apply(x) * v
    }

    /// `‖(id_m ⊗ T)(x)‖`.
    fn amplified_norm(&self, x: &CMatrix, m: usize) -> f64 {
        op_norm(&self.apply_amplified(x, m))
    }
}

fn blockwise(
    x: &CMatrix,
    m: usize,
    inner: usize,
    outer: usize,
    f: impl Fn(&CMatrix) -> CMatrix,
) -> CMatrix {
    assert_eq!(x.nrows(), m * inner, "amplified input has wrong size");
    let mut out = zeros(m * outer, m * outer);
    for s in 0..m {
        for t in 0..m {
            let blk = x.view((s * inner, t * inner), (inner, inner)).into_owned();
            if blk.iter().all(|z| *z == c(0.0)) {
                continue;
            }
            out.view_mut((s * outer, t * outer), (outer, outer))
                .copy_from(&f(&blk));
        }
    }
    out
}

impl<M: LinearMap + ?Sized> LinearMap for &M {
    fn dom_dim(&self) -> usize {
        (**self).dom_dim()
    }
    fn cod_dim(&self) -> usize {
        (**self).cod_dim()
    }
    fn apply(&self, x: &CMatrix) -> CMatrix {
        (**self).apply(x)
    }
    fn apply_adjoint(&self, y: &CMatrix) -> CMatrix {
        (**self).apply_adjoint(y)
    }
    fn cod_blocks(&self) -> Vec<usize> {
        (**self).cod_blocks()
    }
    fn apply_amplified(&self, x: &CMatrix, m: usize) -> CMatrix {
        (**self).apply_amplified(x, m)
    }
    fn apply_amplified_adjoint(&self, y: &CMatrix, m: usize) -> CMatrix {
        (**self).apply_amplified_adjoint(y, m)
    }
    fn apply_to_vector(&self, x: &CMatrix, v: &CVector) -> CVector {
        (**self).apply_to_vector(x, v)
    }
    fn amplified_norm(&self, x: &CMatrix, m: usize) -> f64 {
        (**self).amplified_norm(x, m)
    }
}

fn vec_col(x: &CMatrix) -> CVector {
    CVector::from_column_slice(x.as_slice())
}

fn unvec(v: &[crate::matcore::C64], rows: usize) -> CMatrix {
    CMatrix::from_column_slice(rows, rows, v)
}

/// Result of a complete-positivity test.
#[derive(Clone, Debug)]
pub struct CpCheck {
    pub is_cp: bool,
    pub min_eigenvalue: f64,
    /// Eigenvector of the Choi matrix for the smallest eigenvalue.
    pub witness: CVector,
}

/// A linear map `M_n → M_k` stored by its Choi matrix.
#[derive(Clone, Debug)]
pub struct MatLinMap {
    n: usize,
    k: usize,
    choi: CMatrix,
    superop: CMatrix,
    blocks: Vec<usize>,
    dom_blocks: Vec<usize>,
}

impl PartialEq for MatLinMap {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.k == other.k
            && self.blocks == other.blocks
            && self.dom_blocks == other.dom_blocks
            && self.choi == other.choi
    }
}

impl MatLinMap {
    pub fn from_choi(n: usize, k: usize, choi: CMatrix) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::OutOfRange("dimensions must be positive".into()));
        }
        if choi.nrows() != n * k || choi.ncols() != n * k {
            return Err(Error::DimensionMismatch {
                context: "choi matrix",
                expected: n * k,
                found: if choi.nrows() != n * k { choi.nrows() } else { choi.ncols() },
            });
        }
        let mut superop = zeros(k * k, n * n);
        for j in 0..n {
            for i in 0..n {
                let col = i + n * j;
                for b in 0..k {
                    for a in 0..k {
                        superop[(a + k * b, col)] = choi[(i * k + a, j * k + b)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            k,
            choi,
            superop,
            blocks: vec![k],
            dom_blocks: vec![n],
        })
    }

    fn from_superop(n: usize, k: usize, superop: CMatrix) -> Self {
        let mut choi = zeros(n * k, n * k);
        for j in 0..n {
            for i in 0..n {
                let col = i + n * j;
                for b in 0..k {
                    for a in 0..k {
                        choi[(i * k + a, j * k + b)] = superop[(a + k * b, col)];
                    }
                }
            }
        }
        Self {
            n,
            k,
            choi,
            superop,
            blocks: vec![k],
            dom_blocks: vec![n],
        }
    }

    /// Assemble from the images of the matrix units.
    pub fn from_fn(n: usize, k: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let mut superop = zeros(k * k, n * n);
        for j in 0..n {
            for i in 0..n {
                let y = f(&matrix_unit(n, i, j));
                assert_eq!(y.nrows(), k, "map image has wrong size");
                superop.set_column(i + n * j, &vec_col(&y));
            }
        }
        Self::from_superop(n, k, superop)
    }

    /// Tabulate any [`LinearMap`] as a dense Choi matrix.
    pub fn from_linear_map<M: LinearMap + ?Sized>(map: &M) -> Self {
        let mut out = Self::from_fn(map.dom_dim(), map.cod_dim(), |x| map.apply(x));
        out.blocks = map.cod_blocks();
        out
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |x| x.clone())
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self::from_superop(n, k, zeros(k * k, n * n))
    }

    pub fn transpose_map(n: usize) -> Self {
        Self::from_fn(n, n, |x| x.transpose())
    }

    /// `x ↦ tr(x)/n · 1_n`.
    pub fn depolarizing(n: usize) -> Self {
        Self::from_fn(n, n, |x| identity(n) * (x.trace() / c(n as f64)))
    }

    /// `x ↦ a x a*` for `a: k×n`.
    pub fn conjugation(a: &CMatrix) -> Self {
        Self::from_fn(a.ncols(), a.nrows(), |x| a * x * a.adjoint())
    }

    /// `x ↦ Σ K x K*`.
    pub fn from_kraus(ops: &[CMatrix]) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::DegenerateInput("empty Kraus list".into()))?;
        let (k, n) = (first.nrows(), first.ncols());
        for op in ops {
            if op.nrows() != k || op.ncols() != n {
                return Err(Error::DimensionMismatch {
                    context: "kraus operator",
                    expected: k,
                    found: op.nrows(),
                });
            }
        }
        let mut choi = zeros(n * k, n * k);
        for op in ops {
            let v = kraus_vector(op);
            choi += &v * v.adjoint();
        }
        Self::from_choi(n, k, choi)
    }

    pub fn dom_dim(&self) -> usize {
        self.n
    }

    pub fn cod_dim(&self) -> usize {
        self.k
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    /// Matrix of `vec(x) ↦ vec(T(x))` with column-major vectorization.
    pub fn superop(&self) -> &CMatrix {
        &self.superop
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn dom_blocks(&self) -> &[usize] {
        &self.dom_blocks
    }

    /// Tag the codomain as `⊕ M_{k_i}`; the Choi data must be block diagonal.
    pub fn with_blocks(mut self, blocks: Vec<usize>) -> Result<Self> {
        if blocks.iter().sum::<usize>() != self.k || blocks.contains(&0) {
            return Err(Error::DimensionMismatch {
                context: "codomain blocks",
                expected: self.k,
                found: blocks.iter().sum(),
            });
        }
        self.blocks = blocks;
        Ok(self)
    }

    /// Tag the domain as `⊕ M_{n_i}` (as a subalgebra of `M_n`).
    pub fn with_dom_blocks(mut self, blocks: Vec<usize>) -> Result<Self> {
        if blocks.iter().sum::<usize>() != self.n || blocks.contains(&0) {
            return Err(Error::DimensionMismatch {
                context: "domain blocks",
                expected: self.n,
                found: blocks.iter().sum(),
            });
        }
        self.dom_blocks = blocks;
        Ok(self)
    }

    pub fn apply(&self, x: &CMatrix) -> CMatrix {
        assert_eq!(x.nrows(), self.n, "input has wrong size");
        let v = &self.superop * vec_col(x);
        unvec(v.as_slice(), self.k)
    }

    pub fn apply_adjoint(&self, y: &CMatrix) -> CMatrix {
        assert_eq!(y.nrows(), self.k, "input has wrong size");
        let v = self.superop.adjoint() * vec_col(y);
        unvec(v.as_slice(), self.n)
    }

    /// Hilbert–Schmidt adjoint as a map `M_k → M_n`.
    pub fn adjoint(&self) -> MatLinMap {
        Self::from_superop(self.k, self.n, self.superop.adjoint())
    }

    /// `s ∘ t`.
    pub fn compose(s: &MatLinMap, t: &MatLinMap) -> Result<MatLinMap> {
        if s.n != t.k {
            return Err(Error::DimensionMismatch {
                context: "compose",
                expected: t.k,
                found: s.n,
            });
        }
        let mut out = Self::from_superop(t.n, s.k, &s.superop * &t.superop);
        out.blocks = s.blocks.clone();
        out.dom_blocks = t.dom_blocks.clone();
        Ok(out)
    }

    pub fn add(&self, other: &MatLinMap) -> Result<MatLinMap> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &MatLinMap) -> Result<MatLinMap> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &MatLinMap, sign: f64) -> Result<MatLinMap> {
        if self.n != other.n || self.k != other.k {
            return Err(Error::DimensionMismatch {
                context: "map sum",
                expected: self.n * self.k,
                found: other.n * other.k,
            });
        }
        let mut out = Self::from_superop(self.n, self.k, &self.superop + &other.superop * c(sign));
        if self.blocks == other.blocks {
            out.blocks = self.blocks.clone();
        }
        out.dom_blocks = self.dom_blocks.clone();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> MatLinMap {
        let mut out = Self::from_superop(self.n, self.k, &self.superop * c(s));
        out.blocks = self.blocks.clone();
        out.dom_blocks = self.dom_blocks.clone();
        out
    }

    /// Positivity of the Choi matrix. A non-Hermitian Choi matrix is never CP;
    /// the reported eigenvalue is then that of its Hermitian part.
    pub fn is_cp(&self, tol: f64) -> CpCheck {
        let (vals, vecs) = eigh(&self.choi);
        let min_eigenvalue = vals[0];
        CpCheck {
            is_cp: min_eigenvalue >= -tol && self.is_hermitian_preserving(),
            min_eigenvalue,
            witness: vecs.column(0).into_owned(),
        }
    }

    /// `is_cp` with a tolerance scaled to the size of the Choi matrix.
    pub fn require_cp(&self, tol: f64) -> Result<()> {
        let check = self.is_cp(tol);
        if check.is_cp {
            Ok(())
        } else {
            Err(Error::NotCompletelyPositive {
                min_eigenvalue: check.min_eigenvalue,
                witness: check.witness,
            })
        }
    }

    pub fn is_hermitian_preserving(&self) -> bool {
        crate::matcore::hermitian_defect(&self.choi) <= HERMITIAN_TOL.max(1e-10)
    }

    /// `id_{M_m} ⊗ T : M_m ⊗ M_n → M_m ⊗ M_k`.
    pub fn amplify(&self, m: usize) -> MatLinMap {
        let (n, k) = (self.n, self.k);
        let mut superop = zeros(m * m * k * k, m * m * n * n);
        let mk = m * k;
        let mn = m * n;
        for s in 0..m {
            for t in 0..m {
                for j in 0..n {
                    for i in 0..n {
                        let col = (s * n + i) + mn * (t * n + j);
                        let src = i + n * j;
                        for b in 0..k {
                            for a in 0..k {
                                let row = (s * k + a) + mk * (t * k + b);
                                superop[(row, col)] = self.superop[(a + k * b, src)];
                            }
                        }
                    }
                }
            }
        }
        Self::from_superop(mn, mk, superop)
    }

    /// `x ↦ 1_m ⊗ T(x)`.
    pub fn tensor_unit(&self, m: usize) -> MatLinMap {
        let one = identity(m);
        Self::from_fn(self.n, m * self.k, |x| kron(&one, &self.apply(x)))
    }

    /// Kraus operators from the Choi eigendecomposition, largest weight first.
    pub fn kraus(&self) -> Result<Vec<CMatrix>> {
        let scale = max_abs(&self.choi).max(1.0);
        let (vals, vecs) = eigh(&self.choi);
        if vals[0] < -1e-9 * scale {
            return Err(Error::NotCompletelyPositive {
                min_eigenvalue: vals[0],
                witness: vecs.column(0).into_owned(),
            });
        }
        let (n, k) = (self.n, self.k);
        let mut ops = Vec::new();
        for idx in (0..vals.len()).rev() {
            if vals[idx] < KRAUS_CUTOFF {
                break;
            }
            let w = vals[idx].sqrt();
            let col = vecs.column(idx);
            let op = CMatrix::from_fn(k, n, |a, i| col[i * k + a] * c(w));
            ops.push(op);
        }
        if ops.is_empty() {
            ops.push(zeros(k, n));
        }
        Ok(ops)
    }

    pub fn stinespring(&self) -> Result<StinespringForm> {
        let ops = self.kraus()?;
        Ok(StinespringForm::from_kraus(self.n, &ops))
    }

    /// `φ_p : x ↦ pφ(x)p`.
    pub fn compress(&self, p: &Projection) -> Result<MatLinMap> {
        self.check_cod_projection(p)?;
        let pm = p.matrix();
        let mut out = Self::from_fn(self.n, self.k, |x| pm * self.apply(x) * pm);
        out.dom_blocks = self.dom_blocks.clone();
        Ok(out)
    }

    /// `φ_{(1−p)} : x ↦ (1−p)φ(x)(1−p)`.
    pub fn corner_remainder(&self, p: &Projection) -> Result<MatLinMap> {
        self.compress(&p.complement())
    }

    fn check_cod_projection(&self, p: &Projection) -> Result<()> {
        if p.dim() != self.k {
            return Err(Error::DimensionMismatch {
                context: "codomain projection",
                expected: self.k,
                found: p.dim(),
            });
        }
        Projection::new(p.matrix().clone(), 1e-10).map(|_| ())
    }

    /// `x ↦ F* T(x) F` for a `k×r` matrix `F`; codomain `M_r`.
    pub fn cod_conjugate(&self, f: &CMatrix) -> MatLinMap {
        let mut out = Self::from_fn(self.n, f.ncols(), |x| f.adjoint() * self.apply(x) * f);
        out.dom_blocks = self.dom_blocks.clone();
        out
    }

    /// `x ↦ T(G x G*)` for an `n×r` matrix `G`; domain `M_r`.
    pub fn dom_conjugate(&self, g: &CMatrix) -> MatLinMap {
        let mut out = Self::from_fn(g.ncols(), self.k, |x| self.apply(&(g * x * g.adjoint())));
        out.blocks = self.blocks.clone();
        out
    }

    /// `ψ(x) = φ(x) + τ_n(x)(1 − φ(1))` with `τ_n` the normalized trace.
    pub fn unitalize(&self) -> Result<MatLinMap> {
        let one = self.apply(&identity(self.n));
        let top = crate::matcore::max_eigenvalue(&one);
        if top > 1.0 + 1e-9 {
            return Err(Error::NotContractive { eigenvalue: top });
        }
        let defect = identity(self.k) - &one;
        let n = self.n as f64;
        let mut out = Self::from_fn(self.n, self.k, |x| {
            self.apply(x) + &defect * (x.trace() / c(n))
        });
        out.blocks = self.blocks.clone();
        out.dom_blocks = self.dom_blocks.clone();
        Ok(out)
    }

    /// `x ↦ ⊕ T_i(x)` with block codomain.
    pub fn direct_sum(maps: &[MatLinMap]) -> Result<MatLinMap> {
        let first = maps
            .first()
            .ok_or_else(|| Error::DegenerateInput("empty direct sum".into()))?;
        let n = first.n;
        for m in maps {
            if m.n != n {
                return Err(Error::DimensionMismatch {
                    context: "direct_sum domain",
                    expected: n,
                    found: m.n,
                });
            }
        }
        let k: usize = maps.iter().map(|m| m.k).sum();
        let mut out = Self::from_fn(n, k, |x| {
            let mut y = zeros(k, k);
            let mut off = 0;
            for m in maps {
                y.view_mut((off, off), (m.k, m.k)).copy_from(&m.apply(x));
                off += m.k;
            }
            y
        });
        out.blocks = maps.iter().flat_map(|m| m.blocks.iter().copied()).collect();
        out.dom_blocks = first.dom_blocks.clone();
        Ok(out)
    }

    /// The `i`-th coordinate map `x ↦ T(x)_{(i)}` of a block codomain.
    pub fn coordinate(&self, i: usize) -> Result<MatLinMap> {
        let off: usize = self.blocks.iter().take(i).sum();
        let size = *self
            .blocks
            .get(i)
            .ok_or_else(|| Error::OutOfRange(format!("block {i} of {}", self.blocks.len())))?;
        let mut out = Self::from_fn(self.n, size, |x| {
            self.apply(x).view((off, off), (size, size)).into_owned()
        });
        out.dom_blocks = self.dom_blocks.clone();
        Ok(out)
    }

    /// Offset and size of each codomain block.
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.blocks
            .iter()
            .map(|&b| {
                let r = (off, b);
                off += b;
                r
            })
            .collect()
    }

    /// Restrict to the `i`-th domain block `M_{n_i} ↪ M_n`.
    pub fn dom_block(&self, i: usize) -> Result<MatLinMap> {
        let off: usize = self.dom_blocks.iter().take(i).sum();
        let size = *self
            .dom_blocks
            .get(i)
            .ok_or_else(|| Error::OutOfRange(format!("domain block {i}")))?;
        let g = CMatrix::from_fn(self.n, size, |r, s| c(if r == off + s { 1.0 } else { 0.0 }));
        Ok(self.dom_conjugate(&g))
    }
}

impl LinearMap for MatLinMap {
    fn dom_dim(&self) -> usize {
        self.n
    }
    fn cod_dim(&self) -> usize {
        self.k
    }
    fn apply(&self, x: &CMatrix) -> CMatrix {
        MatLinMap::apply(self, x)
    }
    fn apply_adjoint(&self, y: &CMatrix) -> CMatrix {
        MatLinMap::apply_adjoint(self, y)
    }
    fn cod_blocks(&self) -> Vec<usize> {
        self.blocks.clone()
    }
    fn apply_amplified(&self, x: &CMatrix, m: usize) -> CMatrix {
        amplified_via_superop(&self.superop, x, m, self.n, self.k)
    }
    fn apply_amplified_adjoint(&self, y: &CMatrix, m: usize) -> CMatrix {
        amplified_via_superop(&self.superop.adjoint(), y, m, self.k, self.n)
    }
}

/// Apply `id_m ⊗ S` in one product: stack `vec` of every block as a column.
fn amplified_via_superop(s: &CMatrix, x: &CMatrix, m: usize, inner: usize, outer: usize) -> CMatrix {
    assert_eq!(x.nrows(), m * inner, "amplified input has wrong size");
    let mut cols = zeros(inner * inner, m * m);
    for t in 0..m {
        for sidx in 0..m {
            let blk = x.view((sidx * inner, t * inner), (inner, inner));
            let mut col = cols.column_mut(sidx + m * t);
            for j in 0..inner {
                for i in 0..inner {
                    col[i + inner * j] = blk[(i, j)];
                }
            }
        }
    }
    let images = s * cols;
    let mut out = zeros(m * outer, m * outer);
    for t in 0..m {
        for sidx in 0..m {
            let col = images.column(sidx + m * t);
            for j in 0..outer {
                for i in 0..outer {
                    out[(sidx * outer + i, t * outer + j)] = col[i + outer * j];
                }
            }
        }
    }
    out
}

/// `|K⟩⟩ = Σ_i e_i ⊗ K e_i`.
fn kraus_vector(op: &CMatrix) -> CVector {
    let (k, n) = (op.nrows(), op.ncols());
    CVector::from_fn(n * k, |idx, _| op[(idx % k, idx / k)])
}

/// A map `T(x) = Σ_l A_l x B_l` kept in factored form.
///
/// Used where the dense Choi matrix would be too large to store.
#[derive(Clone, Debug)]
pub struct KrausMap {
    n: usize,
    k: usize,
    left: Vec<CMatrix>,
    right: Vec<CMatrix>,
    /// Same map with the codomain cut down to `L·n` dimensions by QR; norms
    /// agree at every level. Only kept when it is actually smaller.
    compressed: Option<Box<KrausMap>>,
}

impl KrausMap {
    /// `T(x) = Σ A_l x B_l`, `A_l: k×n`, `B_l: n×k`.
    pub fn new(left: Vec<CMatrix>, right: Vec<CMatrix>) -> Result<Self> {
        let first = left
            .first()
            .ok_or_else(|| Error::DegenerateInput("empty operator list".into()))?;
        let (k, n) = (first.nrows(), first.ncols());
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                context: "kraus pairs",
                expected: left.len(),
                found: right.len(),
            });
        }
        for (a, b) in left.iter().zip(&right) {
            if a.nrows() != k || a.ncols() != n || b.nrows() != n || b.ncols() != k {
                return Err(Error::DimensionMismatch {
                    context: "kraus operator shape",
                    expected: k * n,
                    found: a.nrows() * a.ncols(),
                });
            }
        }
        let compressed = (k > left.len() * n).then(|| Box::new(compress(n, k, &left, &right)));
        Ok(Self {
            n,
            k,
            left,
            right,
            compressed,
        })
    }

    /// Completely positive `x ↦ Σ K x K*`.
    pub fn cp(ops: Vec<CMatrix>) -> Result<Self> {
        let right = ops.iter().map(|k| k.adjoint()).collect();
        Self::new(ops, right)
    }

    pub fn to_matlin(&self) -> MatLinMap {
        MatLinMap::from_linear_map(self)
    }

    /// Whether every pair satisfies `B_l = A_l*`.
    pub fn is_manifestly_cp(&self) -> bool {
        self.left
            .iter()
            .zip(&self.right)
            .all(|(a, b)| max_abs(&(a.adjoint() - b)) == 0.0)
    }
}

/// `Σ A_l x B_l = Q_A (Σ R_l x S_l) Q_B*` with `[A_1 … A_L] = Q_A R`, `[B_1; …; B_L]* = Q_B S*`.
fn compress(n: usize, k: usize, left: &[CMatrix], right: &[CMatrix]) -> KrausMap {
    let wide = left.len() * n;
    let mut a = zeros(k, wide);
    let mut b = zeros(k, wide);
    for (l, (al, bl)) in left.iter().zip(right).enumerate() {
        a.view_mut((0, l * n), (k, n)).copy_from(al);
        b.view_mut((0, l * n), (k, n)).copy_from(&bl.adjoint());
    }
    let ra = a.qr().r();
    let sb = b.qr().r().adjoint();
    KrausMap {
        n,
        k: wide,
        left: (0..left.len()).map(|l| ra.columns(l * n, n).into_owned()).collect(),
        right: (0..left.len()).map(|l| sb.rows(l * n, n).into_owned()).collect(),
        compressed: None,
    }
}

impl LinearMap for KrausMap {
    fn dom_dim(&self) -> usize {
        self.n
    }
    fn cod_dim(&self) -> usize {
        self.k
    }
    fn apply(&self, x: &CMatrix) -> CMatrix {
        let mut out = zeros(self.k, self.k);
        for (a, b) in self.left.iter().zip(&self.right) {
            out += a * x * b;
        }
        out
    }
    fn apply_adjoint(&self, y: &CMatrix) -> CMatrix {
        let mut out = zeros(self.n, self.n);
        for (a, b) in self.left.iter().zip(&self.right) {
            out += a.adjoint() * y * b.adjoint();
        }
        out
    }
    fn apply_amplified(&self, x: &CMatrix, m: usize) -> CMatrix {
        let one = identity(m);
        let mut out = zeros(m * self.k, m * self.k);
        for (a, b) in self.left.iter().zip(&self.right) {
            out += kron(&one, a) * x * kron(&one, b);
        }
        out
    }
    fn apply_amplified_adjoint(&self, y: &CMatrix, m: usize) -> CMatrix {
        let one = identity(m);
        let mut out = zeros(m * self.n, m * self.n);
        for (a, b) in self.left.iter().zip(&self.right) {
            out += kron(&one, &a.adjoint()) * y * kron(&one, &b.adjoint());
        }
        out
    }
    fn apply_to_vector(&self, x: &CMatrix, v: &CVector) -> CVector {
        let mut out = CVector::zeros(self.k);
        for (a, b) in self.left.iter().zip(&self.right) {
            out += a * (x * (b * v));
        }
        out
    }
    fn amplified_norm(&self, x: &CMatrix, m: usize) -> f64 {
        match &self.compressed {
            Some(small) => small.amplified_norm(x, m),
            None => op_norm(&self.apply_amplified(x, m)),
        }
    }
}

/// `a − b` evaluated lazily.
pub struct Difference<A, B> {
    pub a: A,
    pub b: B,
}

impl<A: LinearMap, B: LinearMap> LinearMap for Difference<A, B> {
    fn dom_dim(&self) -> usize {
        self.a.dom_dim()
    }
    fn cod_dim(&self) -> usize {
        self.a.cod_dim()
    }
    fn apply(&self, x: &CMatrix) -> CMatrix {
        self.a.apply(x) - self.b.apply(x)
    }
    fn apply_adjoint(&self, y: &CMatrix) -> CMatrix {
        self.a.apply_adjoint(y) - self.b.apply_adjoint(y)
    }
    fn apply_amplified(&self, x: &CMatrix, m: usize) -> CMatrix {
        self.a.apply_amplified(x, m) - self.b.apply_amplified(x, m)
    }
    fn apply_amplified_adjoint(&self, y: &CMatrix, m: usize) -> CMatrix {
        self.a.apply_amplified_adjoint(y, m) - self.b.apply_amplified_adjoint(y, m)
    }
    fn apply_to_vector(&self, x: &CMatrix, v: &CVector) -> CVector {
        self.a.apply_to_vector(x, v) - self.b.apply_to_vector(x, v)
    }
}

/// `x ↦ V* (x ⊗ 1_m) V` with `V: C^k → C^n ⊗ C^m`.
#[derive(Clone, Debug)]
pub struct StinespringForm {
    pub n: usize,
    pub multiplicity: usize,
    /// `(n·m) × k`.
    pub v: CMatrix,
}

impl StinespringForm {
    /// From Kraus operators `K_l: k×n` of `x ↦ Σ K_l x K_l*`: `Vξ = Σ_l (K_l* ξ) ⊗ e_l`.
    pub fn from_kraus(n: usize, ops: &[CMatrix]) -> Self {
        let m = ops.len();
        let k = ops[0].nrows();
        let mut v = zeros(n * m, k);
        for (l, op) in ops.iter().enumerate() {
            let adj = op.adjoint();
            for i in 0..n {
                for col in 0..k {
                    v[(i * m + l, col)] = adj[(i, col)];
                }
            }
        }
        Self { n, multiplicity: m, v }
    }

    /// `σ(x) = x ⊗ 1_m`.
    pub fn sigma(&self, x: &CMatrix) -> CMatrix {
        kron(x, &identity(self.multiplicity))
    }

    pub fn reconstruct(&self, x: &CMatrix) -> CMatrix {
        self.v.adjoint() * self.sigma(x) * &self.v
    }

    /// Max over matrix units of `‖T(e_ij) − V*σ(e_ij)V‖`.
    pub fn residual(&self, t: &MatLinMap) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let e = matrix_unit(n, i, j);
                worst = worst.max(op_norm(&(t.apply(&e) - self.reconstruct(&e))));
            }
        }
        worst
    }
}

/// A complete order embedding with its splitting projection.
#[derive(Clone, Debug)]
pub struct EmbeddingCertificate<M = MatLinMap> {
    pub map: M,
    pub split_projection: Projection,
    /// Max multiplicativity / *-preservation / cross-term defect of `ψ_p`.
    pub hom_residual: f64,
    /// Max `|‖ψ^{(L)}(x)‖ − ‖x‖|` over sampled `x`.
    pub iso_residual: f64,
}

/// Options for building certificates.
#[derive(Clone, Copy, Debug)]
pub struct CertifyOptions {
    pub iso_samples: usize,
    /// Amplification level cap for the isometry check (the domain size is used when smaller).
    pub iso_level_cap: usize,
    pub hom_exhaustive_limit: usize,
    pub hom_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            iso_samples: 50,
            iso_level_cap: 4,
            hom_exhaustive_limit: 4096,
            hom_samples: 4096,
        }
    }
}

impl<M: LinearMap> EmbeddingCertificate<M> {
    pub fn certify<R: Rng + ?Sized>(
        map: M,
        split_projection: Projection,
        opts: &CertifyOptions,
        rng: &mut R,
    ) -> Result<Self> {
        if split_projection.dim() != map.cod_dim() {
            return Err(Error::DimensionMismatch {
                context: "split projection",
                expected: map.cod_dim(),
                found: split_projection.dim(),
            });
        }
        let hom_residual = hom_residual(&map, &split_projection, opts, rng);
        let level = map.dom_dim().min(opts.iso_level_cap).max(1);
        let iso_residual = iso_residual(&map, level, opts.iso_samples, rng);
        Ok(Self {
            map,
            split_projection,
            hom_residual,
            iso_residual,
        })
    }

    /// `ψ_p(x) = pψ(x)p`.
    pub fn hom_part(&self, x: &CMatrix) -> CMatrix {
        let p = self.split_projection.matrix();
        p * self.map.apply(x) * p
    }

    pub fn remainder_part(&self, x: &CMatrix) -> CMatrix {
        let q = self.split_projection.complement();
        q.matrix() * self.map.apply(x) * q.matrix()
    }
}

/// Multiplicativity defect of `ψ_p` on matrix-unit pairs plus the cross terms `pψ(x)(1−p)`.
pub fn hom_residual<M: LinearMap + ?Sized, R: Rng + ?Sized>(
    map: &M,
    p: &Projection,
    opts: &CertifyOptions,
    rng: &mut R,
) -> f64 {
    let n = map.dom_dim();
    let pm = p.matrix();
    let qm = identity(pm.nrows()) - pm;
    let units: Vec<CMatrix> = (0..n * n)
        .map(|idx| {
            let e = matrix_unit(n, idx / n, idx % n);
            pm * map.apply(&e) * pm
        })
        .collect();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let full = map.apply(&matrix_unit(n, i, j));
            worst = worst.max(op_norm(&(pm * &full * &qm)));
            worst = worst.max(op_norm(&(&qm * &full * pm)));
            worst = worst.max(op_norm(&(&units[i * n + j].adjoint() - &units[j * n + i])));
        }
    }
    let mut check = |a: (usize, usize), b: (usize, usize)| {
        let prod = &units[a.0 * n + a.1] * &units[b.0 * n + b.1];
        let target = if a.1 == b.0 {
            units[a.0 * n + b.1].clone()
        } else {
            zeros(pm.nrows(), pm.nrows())
        };
        worst = worst.max(op_norm(&(prod - target)));
    };
    if n.pow(4) <= opts.hom_exhaustive_limit {
        for a in 0..n * n {
            for b in 0..n * n {
                check((a / n, a % n), (b / n, b % n));
            }
        }
    } else {
        for _ in 0..opts.hom_samples {
            let a = (rng.random_range(0..n), rng.random_range(0..n));
            // bias half the samples toward composable pairs
            let b0 = if rng.random_bool(0.5) { a.1 } else { rng.random_range(0..n) };
            check(a, (b0, rng.random_range(0..n)));
        }
    }
    worst
}

/// Sampled complete-isometry defect at amplification level `level`.
pub fn iso_residual<M: LinearMap + ?Sized, R: Rng + ?Sized>(
    map: &M,
    level: usize,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let dim = level * map.dom_dim();
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = crate::random::random_unit_ball(dim, rng);
        worst = worst.max((map.amplified_norm(&x, level) - 1.0).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{basis_vector, min_eigenvalue};
    use crate::random::{ginibre, random_isometry, random_psd, rng_from_seed};

    fn random_map(n: usize, k: usize, seed: u64) -> MatLinMap {
        let mut rng = rng_from_seed(seed);
        MatLinMap::from_choi(n, k, ginibre(n * k, n * k, &mut rng)).unwrap()
    }

    #[test]
    fn identity_choi_is_max_entangled() {
        let id = MatLinMap::identity(2);
        let mut omega = CVector::zeros(4);
        omega[0] = c(1.0);
        omega[3] = c(1.0);
        assert!((id.choi() - &omega * omega.adjoint()).norm() < 1e-15);
        let mut rng = rng_from_seed(0);
        let x = ginibre(2, 2, &mut rng);
        assert!((id.apply(&x) - &x).norm() < 1e-15);
    }

    #[test]
    fn transpose_is_not_cp() {
        let t = MatLinMap::transpose_map(2);
        assert!((t.apply(&matrix_unit(2, 0, 1)) - matrix_unit(2, 1, 0)).norm() < 1e-15);
        let check = t.is_cp(1e-9);
        assert!(!check.is_cp);
        assert!((check.min_eigenvalue + 1.0).abs() < 1e-12);
        // witness is the antisymmetric vector (e_01 - e_10)/√2
        let w = &check.witness;
        assert!(w[0].norm() < 1e-12 && w[3].norm() < 1e-12);
        assert!((w[1] + w[2]).norm() < 1e-12);
    }

    #[test]
    fn choi_round_trip_and_compose() {
        let t = random_map(2, 3, 1);
        let back = MatLinMap::from_choi(2, 3, t.choi().clone()).unwrap();
        assert_eq!(back, t);
        let s = random_map(3, 2, 2);
        let st = MatLinMap::compose(&s, &t).unwrap();
        let mut rng = rng_from_seed(3);
        let x = ginibre(2, 2, &mut rng);
        assert!((st.apply(&x) - s.apply(&t.apply(&x))).norm() < 1e-10);
        assert!(MatLinMap::compose(&t, &t).is_err());
    }

    #[test]
    fn wrong_choi_size_rejected() {
        assert!(matches!(
            MatLinMap::from_choi(2, 2, zeros(3, 3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adjoint_is_hs_adjoint() {
        let t = random_map(2, 3, 4);
        let ta = t.adjoint();
        let mut rng = rng_from_seed(5);
        let x = ginibre(2, 2, &mut rng);
        let y = ginibre(3, 3, &mut rng);
        let lhs = t.apply(&x).dotc(&y);
        let rhs = x.dotc(&ta.apply(&y));
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn amplify_matches_blockwise_and_simple_tensors() {
        let t = random_map(2, 3, 6);
        let amp = t.amplify(2);
        let mut rng = rng_from_seed(7);
        let a = ginibre(2, 2, &mut rng);
        let b = ginibre(2, 2, &mut rng);
        let lhs = amp.apply(&kron(&a, &b));
        assert!((lhs - kron(&a, &t.apply(&b))).norm() < 1e-10);
        let x = ginibre(4, 4, &mut rng);
        assert!((amp.apply(&x) - t.apply_amplified(&x, 2)).norm() < 1e-10);
        let y = ginibre(6, 6, &mut rng);
        assert!((amp.apply_adjoint(&y) - t.apply_amplified_adjoint(&y, 2)).norm() < 1e-10);
        assert_eq!(MatLinMap::identity(2).amplify(3), MatLinMap::identity(6));
    }

    #[test]
    fn amplified_transpose_on_max_entangled() {
        let t = MatLinMap::transpose_map(2).amplify(2);
        let mut omega = CVector::zeros(4);
        omega[0] = c(1.0);
        omega[3] = c(1.0);
        let proj = &omega * omega.adjoint() * c(0.5);
        let lo = min_eigenvalue(&t.apply(&proj));
        assert!((lo + 0.5).abs() < 1e-12);
    }

    #[test]
    fn kraus_of_identity_and_depolarizing() {
        let ops = MatLinMap::identity(3).kraus().unwrap();
        assert_eq!(ops.len(), 1);
        let k = &ops[0];
        // unique up to phase
        let phase = k[(0, 0)];
        assert!((k * phase.conj() - identity(3)).norm() < 1e-12);
        let dep = MatLinMap::depolarizing(2);
        let ops = dep.kraus().unwrap();
        assert_eq!(ops.len(), 4);
        let rebuilt = MatLinMap::from_kraus(&ops).unwrap();
        assert!((rebuilt.choi() - dep.choi()).norm() < 1e-12);
    }

    #[test]
    fn stinespring_reconstructs_and_unital_is_isometry() {
        let mut rng = rng_from_seed(8);
        let v = random_isometry(5, 2, &mut rng);
        let kraus = vec![v.adjoint() * c(0.8_f64.sqrt()), v.adjoint() * c(0.2_f64.sqrt())];
        // x ↦ v* x v on M_5 → M_2 is unital
        let t = MatLinMap::from_kraus(&kraus).unwrap();
        let st = t.stinespring().unwrap();
        assert!(st.residual(&t) < 1e-10);
        assert!(op_norm(&(st.v.adjoint() * &st.v - identity(2))) < 1e-9);
    }

    #[test]
    fn stinespring_rejects_non_cp() {
        assert!(matches!(
            MatLinMap::transpose_map(2).stinespring(),
            Err(Error::NotCompletelyPositive { .. })
        ));
    }

    #[test]
    fn compress_and_remainder() {
        let mut rng = rng_from_seed(9);
        let t = MatLinMap::from_kraus(&[ginibre(4, 2, &mut rng)]).unwrap();
        let full = Projection::identity(4);
        assert!((t.compress(&full).unwrap().choi() - t.choi()).norm() < 1e-12);
        assert!(t.compress(&Projection::zero(4)).unwrap().choi().norm() < 1e-15);
        let p = Projection::from_frame(&random_isometry(4, 2, &mut rng));
        let tp = t.compress(&p).unwrap();
        assert!(tp.is_cp(1e-9).is_cp);
        let x = ginibre(2, 2, &mut rng);
        let pm = p.matrix();
        let qm = identity(4) - pm;
        let fx = t.apply(&x);
        let cross = pm * &fx * &qm + &qm * &fx * pm;
        let recon = tp.apply(&x) + t.corner_remainder(&p).unwrap().apply(&x) + cross;
        assert!((recon - fx).norm() < 1e-10);
    }

    #[test]
    fn unitalize_corner_compression() {
        // x ↦ e x e* with e: C^2 → C^4 the first two coordinates
        let e = CMatrix::from_fn(4, 2, |r, s| c(if r == s { 1.0 } else { 0.0 }));
        let phi = MatLinMap::conjugation(&e);
        let psi = phi.unitalize().unwrap();
        assert!((psi.apply(&identity(2)) - identity(4)).norm() < 1e-12);
        assert!(psi.is_cp(1e-9).is_cp);
        let mut rng = rng_from_seed(10);
        let x = ginibre(2, 2, &mut rng);
        let mut expect = &e * &x * e.adjoint();
        let tau = x.trace() / c(2.0);
        expect[(2, 2)] += tau;
        expect[(3, 3)] += tau;
        assert!((psi.apply(&x) - expect).norm() < 1e-12);
        let id = MatLinMap::identity(3);
        assert!((id.unitalize().unwrap().choi() - id.choi()).norm() < 1e-15);
        assert!(matches!(
            id.scale(1.5).unitalize(),
            Err(Error::NotContractive { .. })
        ));
    }

    #[test]
    fn direct_sum_coordinates() {
        let a = random_map(2, 2, 11);
        let b = MatLinMap::zero(2, 3);
        let s = MatLinMap::direct_sum(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(s.blocks(), &[2, 3]);
        assert_eq!(s.coordinate(0).unwrap(), a);
        assert!(s.coordinate(1).unwrap().choi().norm() == 0.0);
        let single = MatLinMap::direct_sum(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single, a);
    }

    #[test]
    fn kraus_map_matches_dense() {
        let mut rng = rng_from_seed(12);
        let left = vec![ginibre(3, 2, &mut rng), ginibre(3, 2, &mut rng)];
        let right = vec![ginibre(2, 3, &mut rng), ginibre(2, 3, &mut rng)];
        let km = KrausMap::new(left, right).unwrap();
        let dense = km.to_matlin();
        let x = ginibre(4, 4, &mut rng);
        assert!((km.apply_amplified(&x, 2) - dense.apply_amplified(&x, 2)).norm() < 1e-10);
        let y = ginibre(6, 6, &mut rng);
        assert!(
            (km.apply_amplified_adjoint(&y, 2) - dense.apply_amplified_adjoint(&y, 2)).norm()
                < 1e-10
        );
    }

    #[test]
    fn cp_maps_preserve_positivity_under_amplification() {
        let mut rng = rng_from_seed(13);
        let t = MatLinMap::from_kraus(&[ginibre(3, 2, &mut rng), ginibre(3, 2, &mut rng)]).unwrap();
        for m in 1..=3 {
            for _ in 0..10 {
                let x = random_psd(2 * m, &mut rng);
                assert!(min_eigenvalue(&t.apply_amplified(&x, m)) > -1e-8);
            }
        }
    }

    #[test]
    fn certificate_of_exact_embedding() {
        let mut rng = rng_from_seed(14);
        let u = random_isometry(6, 2, &mut rng);
        let phi = MatLinMap::conjugation(&u);
        let p = Projection::from_frame(&u);
        let cert = EmbeddingCertificate::certify(phi, p, &CertifyOptions::default(), &mut rng)
            .unwrap();
        assert!(cert.hom_residual < 1e-12);
        assert!(cert.iso_residual < 1e-10);
        let x = basis_vector(2, 0);
        drop(x);
    }

    #[test]
    fn kraus_compression_preserves_norms() {
        let mut rng = rng_from_seed(21);
        let ops: Vec<CMatrix> = (0..2).map(|_| ginibre(12, 2, &mut rng)).collect();
        let right: Vec<CMatrix> = (0..2).map(|_| ginibre(2, 12, &mut rng)).collect();
        let t = KrausMap::new(ops, right).unwrap();
        assert!(t.compressed.is_some());
        for m in 1..=2 {
            let x = ginibre(2 * m, 2 * m, &mut rng);
            let direct = op_norm(&t.apply_amplified(&x, m));
            assert!((t.amplified_norm(&x, m) - direct).abs() < 1e-10 * direct);
        }
        let x = ginibre(2, 2, &mut rng);
        let v = ginibre(12, 1, &mut rng).column(0).into_owned();
        assert!((t.apply_to_vector(&x, &v) - t.apply(&x) * &v).norm() < 1e-10);
    }
}
