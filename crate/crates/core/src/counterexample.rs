//! The dimension-dependence counterexample `φ(e_ij) = e_ij ⊗ p_i p_j` over a
//! family of corank-one projections, with certified inverse and separation bounds.
//!
//! Projections are stored through their rank-one complements `p_i = 1 − u_i u_i*`.
//! The codomain `M_r ⊗ M_n` is indexed `(i, a) ↦ i·n + a`.

use rand::Rng;
use serde::Serialize;

use crate::cbnorm::norm_ascent_from;
use crate::cpmap::{EmbeddingCertificate, KrausMap, LinearMap, MatLinMap};
use crate::error::{Error, Result};
use crate::matcore::{
    c, eigh, identity, matrix_unit, max_eigenvalue, min_eigenvalue, op_norm, zeros, CMatrix,
    CVector, Projection,
};
use crate::random::{
    derive_seed, random_isometry, random_unit_ball, random_unit_vector, rng_from_seed, ginibre,
};

/// Fresh samples used to estimate the covering radius of a family.
pub const COVERING_SAMPLES: usize = 10_000;

/// Corank-one projections in `M_n`, with an honest sampled covering radius.
#[derive(Clone, Debug)]
pub struct ProjectionFamily {
    pub n: usize,
    /// Unit vectors `u_i` with `p_i = 1 − u_i u_i*`.
    pub complements: Vec<CVector>,
    /// Max over fresh samples of the distance to the nearest member.
    pub covering_radius_estimate: f64,
    pub covering_samples: usize,
    pub target_radius: f64,
    pub seed: u64,
    pub budget: usize,
}

impl ProjectionFamily {
    pub fn from_complements(n: usize, complements: Vec<CVector>, seed: u64) -> Result<Self> {
        if complements.is_empty() {
            return Err(Error::DegenerateInput("empty projection family".into()));
        }
        for u in &complements {
            if u.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "family member",
                    expected: n,
                    found: u.len(),
                });
            }
            if (u.norm() - 1.0).abs() > 1e-8 {
                return Err(Error::OutOfRange(format!(
                    "complement vector has norm {}",
                    u.norm()
                )));
            }
        }
        let mut fam = Self {
            n,
            complements,
            covering_radius_estimate: f64::NAN,
            covering_samples: 0,
            target_radius: f64::NAN,
            seed,
            budget: 0,
        };
        fam.estimate_covering_radius(COVERING_SAMPLES, seed);
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.complements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complements.is_empty()
    }

    pub fn projection(&self, i: usize) -> CMatrix {
        let u = &self.complements[i];
        identity(self.n) - u * u.adjoint()
    }

    pub fn projections(&self) -> Vec<CMatrix> {
        (0..self.len()).map(|i| self.projection(i)).collect()
    }

    /// Nearest member to `1 − vv*` (unit `v`), ties to the lowest index.
    pub fn nearest(&self, v: &CVector) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, u) in self.complements.iter().enumerate() {
            let d = corank1_distance(u, v);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    pub fn estimate_covering_radius(&mut self, samples: usize, seed: u64) {
        let mut rng = rng_from_seed(derive_seed(seed, 0xc0fe, 0));
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            let v = random_unit_vector(self.n, &mut rng);
            worst = worst.max(self.nearest(&v).1);
        }
        self.covering_radius_estimate = worst;
        self.covering_samples = samples;
    }

    /// Whether the sampled covering radius reached the requested target.
    pub fn reached_target(&self) -> bool {
        self.covering_radius_estimate <= self.target_radius
    }
}

/// `‖(1 − uu*) − (1 − vv*)‖ = (1 − |⟨u, v⟩|²)^{1/2}` for unit vectors.
pub fn corank1_distance(u: &CVector, v: &CVector) -> f64 {
    (1.0 - u.dotc(v).norm_sqr()).max(0.0).sqrt()
}

/// Greedy-random family: keep sampled corank-one projections farther than
/// `target_radius` from every kept member, for `budget` samples.
pub fn projection_family(
    n: usize,
    target_radius: f64,
    seed: u64,
    budget: usize,
) -> Result<ProjectionFamily> {
    if n <= 4 {
        return Err(Error::OutOfRange(format!("family size n = {n} must exceed 4")));
    }
    let mut rng = rng_from_seed(derive_seed(seed, 0xfa, 0));
    let mut kept: Vec<CVector> = Vec::new();
    for _ in 0..budget.max(1) {
        let v = random_unit_vector(n, &mut rng);
        if kept.iter().all(|u| corank1_distance(u, &v) > target_radius) {
            kept.push(v);
        }
    }
    let mut fam = ProjectionFamily::from_complements(n, kept, seed)?;
    fam.target_radius = target_radius;
    fam.budget = budget;
    Ok(fam)
}

/// `size` independent corank-one projections, complements Haar-distributed.
pub fn random_family(n: usize, size: usize, seed: u64) -> Result<ProjectionFamily> {
    let mut rng = rng_from_seed(derive_seed(seed, 0xfb, 0));
    let kept = (0..size).map(|_| random_unit_vector(n, &mut rng)).collect();
    let mut fam = ProjectionFamily::from_complements(n, kept, seed)?;
    fam.budget = size;
    Ok(fam)
}

/// `x ↦ Σ x_ij e_ij ⊗ p_i p_j`, stored structurally.
#[derive(Clone, Debug)]
pub struct CounterexampleMap {
    n: usize,
    projections: Vec<CMatrix>,
}

impl CounterexampleMap {
    pub fn new(projections: Vec<CMatrix>) -> Result<Self> {
        let n = projections
            .first()
            .ok_or_else(|| Error::DegenerateInput("empty projection list".into()))?
            .nrows();
        Ok(Self { n, projections })
    }

    pub fn r(&self) -> usize {
        self.projections.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn projections(&self) -> &[CMatrix] {
        &self.projections
    }

    /// Dense form; only sensible for small `r·n`.
    pub fn to_matlin(&self) -> MatLinMap {
        MatLinMap::from_linear_map(self)
    }

    /// Smallest eigenvalue of the Choi matrix, via `Choi ≅ BB* ⊕ 0` with `B = [p_1; …; p_r]`.
    ///
    /// The nonzero spectrum of `BB*` is that of `B*B = Σ p_i* p_i`, and the Choi
    /// matrix of size `r²n` has rank at most `n`, so zero is always in the spectrum.
    pub fn choi_min_eigenvalue(&self) -> f64 {
        let mut gram = zeros(self.n, self.n);
        for p in &self.projections {
            gram += p.adjoint() * p;
        }
        min_eigenvalue(&gram).min(0.0)
    }

    /// `‖φ(1)² − φ(1)‖`, computed blockwise since `φ(1) = ⊕ p_i²`.
    pub fn unit_idempotence_defect(&self) -> f64 {
        self.projections
            .iter()
            .map(|p| {
                let sq = p * p;
                op_norm(&(&sq * &sq - &sq))
            })
            .fold(0.0, f64::max)
    }

    /// `‖φ^{(k)}(vv*)‖` for unit `v ∈ C^k ⊗ C^r`; depends only on `w_i = Σ_s |v_{s,i}|²`.
    pub fn rank1_image_norm(&self, v: &CVector) -> f64 {
        let r = self.r();
        let mut w = vec![0.0; r];
        for (idx, z) in v.iter().enumerate() {
            w[idx % r] += z.norm_sqr();
        }
        self.weighted_top(&w).0
    }

    /// `λ_max(Σ w_i p_i)` and its top eigenvector.
    fn weighted_top(&self, w: &[f64]) -> (f64, CVector) {
        let mut s = zeros(self.n, self.n);
        for (p, &wi) in self.projections.iter().zip(w) {
            s += p * c(wi);
        }
        let (vals, vecs) = eigh(&s);
        (vals[self.n - 1], vecs.column(self.n - 1).into_owned())
    }

    /// `min_w λ_max(Σ w_i p_i)` over the simplex by exponentiated subgradient descent.
    ///
    /// This is the positive minimum of every amplification at once; the returned
    /// value is an upper estimate of it (the weights are a witness).
    pub fn positive_min_descent(&self, iters: usize) -> (f64, Vec<f64>) {
        let r = self.r();
        let mut w = vec![1.0 / r as f64; r];
        let mut best = (f64::INFINITY, w.clone());
        for t in 0..iters {
            let (f, u) = self.weighted_top(&w);
            if f < best.0 {
                best = (f, w.clone());
            }
            let eta = 2.0 / ((t + 1) as f64).sqrt();
            let mut total = 0.0;
            for (wi, p) in w.iter_mut().zip(&self.projections) {
                let g = u.dotc(&(p * &u)).re;
                *wi *= (-eta * g).exp();
                total += *wi;
            }
            w.iter_mut().for_each(|wi| *wi /= total);
        }
        best
    }
}

impl LinearMap for CounterexampleMap {
    fn dom_dim(&self) -> usize {
        self.r()
    }
    fn cod_dim(&self) -> usize {
        self.r() * self.n
    }
    fn apply(&self, x: &CMatrix) -> CMatrix {
        let (r, n) = (self.r(), self.n);
        let mut out = zeros(r * n, r * n);
        for i in 0..r {
            for j in 0..r {
                let xij = x[(i, j)];
                if xij == c(0.0) {
                    continue;
                }
                let blk = &self.projections[i] * &self.projections[j] * xij;
                out.view_mut((i * n, j * n), (n, n)).copy_from(&blk);
            }
        }
        out
    }
    fn apply_adjoint(&self, y: &CMatrix) -> CMatrix {
        let (r, n) = (self.r(), self.n);
        CMatrix::from_fn(r, r, |i, j| {
            let pp = &self.projections[i] * &self.projections[j];
            let blk = y.view((i * n, j * n), (n, n));
            pp.iter().zip(blk.iter()).map(|(a, b)| a.conj() * b).sum()
        })
    }
}

/// The counterexample map together with its family and inverse bound.
#[derive(Clone, Debug)]
pub struct CounterexampleInstance {
    pub n: usize,
    pub r: usize,
    pub family: ProjectionFamily,
    pub map: CounterexampleMap,
    /// `n/(n−4)`.
    pub inverse_bound: f64,
    pub separation_records: Vec<SeparationRecord>,
}

pub fn build_counterexample(family: &ProjectionFamily) -> Result<CounterexampleInstance> {
    let n = family.n;
    if n <= 4 {
        return Err(Error::OutOfRange(format!("n = {n} must exceed 4")));
    }
    let map = CounterexampleMap::new(family.projections())?;
    Ok(CounterexampleInstance {
        n,
        r: family.len(),
        family: family.clone(),
        map,
        inverse_bound: n as f64 / (n as f64 - 4.0),
        separation_records: Vec::new(),
    })
}

/// Outcome of sampling `‖φ^{(k)}(p)‖` over rank-one projections `p`.
#[derive(Clone, Debug, Serialize)]
pub struct InverseBoundCheck {
    /// Smallest sampled value.
    pub worst_sampled: f64,
    /// Value located by descent over the weight simplex.
    pub descent_min: f64,
    pub samples: usize,
    /// `(n−2)/n`.
    pub paper_floor: f64,
    /// `1/(2c − 1)` with `c = (n−2)/n`, i.e. `n/(n−4)`.
    pub certified_inverse_upper: f64,
}

impl InverseBoundCheck {
    pub fn worst(&self) -> f64 {
        self.worst_sampled.min(self.descent_min)
    }
}

/// Sample rank-one projections at levels 1–3 and run the simplex descent.
pub fn verify_inverse_bound(
    instance: &CounterexampleInstance,
    trials: usize,
    seed: u64,
) -> InverseBoundCheck {
    let r = instance.r;
    let values = crate::par::map_indexed(trials, |t| {
        let mut rng = rng_from_seed(derive_seed(seed, 0x1b, t as u64));
        let k = 1 + t % 3;
        let v = random_unit_vector(k * r, &mut rng);
        instance.map.rank1_image_norm(&v)
    });
    let worst_sampled = values.into_iter().fold(f64::INFINITY, f64::min);
    let (descent_min, _) = instance.map.positive_min_descent(400);
    let n = instance.n as f64;
    let paper_floor = (n - 2.0) / n;
    InverseBoundCheck {
        worst_sampled,
        descent_min,
        samples: trials,
        paper_floor,
        certified_inverse_upper: 1.0 / (2.0 * paper_floor - 1.0),
    }
}

/// Exact complete order embedding `x ↦ UxU* + Σ W_l x W_l*` with the `W_l` ranging in `(UU*)^⊥`.
pub fn coe_from_isometry<R: Rng + ?Sized>(
    u: &CMatrix,
    remainder_ops: usize,
    remainder_scale: f64,
    rng: &mut R,
) -> Result<EmbeddingCertificate<KrausMap>> {
    let (big, r) = (u.nrows(), u.ncols());
    if big < 2 * r && remainder_ops > 0 {
        return Err(Error::DimensionMismatch {
            context: "coe codomain",
            expected: 2 * r,
            found: big,
        });
    }
    let p = Projection::from_frame(u);
    let mut ops = vec![u.clone()];
    if remainder_ops > 0 && remainder_scale > 0.0 {
        // (1 − UU*)G lies in the complement without forming a frame for it
        let raw: Vec<CMatrix> = (0..remainder_ops)
            .map(|_| {
                let g = ginibre(big, r, rng);
                &g - u * (u.adjoint() * &g)
            })
            .collect();
        let mut load = zeros(r, r);
        for w in &raw {
            load += w.adjoint() * w;
        }
        // ‖R(1)‖ = ‖Σ W W*‖ = ‖Σ W* W‖
        let s = (remainder_scale.min(1.0) / max_eigenvalue(&load)).sqrt();
        ops.extend(raw.into_iter().map(|w| w * c(s)));
    }
    let cross = ops[1..]
        .iter()
        .map(|w| op_norm(&(u.adjoint() * w)))
        .fold(0.0, f64::max);
    let iso_defect = op_norm(&(u.adjoint() * u - identity(r)));
    let map = KrausMap::cp(ops)?;
    let iso_residual = crate::cpmap::iso_residual(&map, 1, 10, rng);
    Ok(EmbeddingCertificate {
        map,
        split_projection: p,
        // Ad_U is multiplicative up to the isometry defect; cross terms vanish by construction
        hom_residual: iso_defect.max(cross),
        iso_residual,
    })
}

/// Seeded candidate embedding `M_r → M_r ⊗ M_n`.
pub fn random_coe(r: usize, n: usize, seed: u64) -> Result<EmbeddingCertificate<KrausMap>> {
    if r * n < 2 * r {
        return Err(Error::OutOfRange(format!("r·n = {} leaves no room", r * n)));
    }
    let mut rng = rng_from_seed(derive_seed(seed, 0xc0e, 0));
    let u = random_isometry(r * n, r, &mut rng);
    let scale = rng.random_range(0.25..1.0);
    coe_from_isometry(&u, 2, scale, &mut rng)
}

/// Per-candidate separation certificate.
#[derive(Clone, Debug, Serialize)]
pub struct SeparationRecord {
    /// Certified lower bound on `‖ψ − φ‖`.
    pub bound: f64,
    /// Member nearest to the constructed `q`.
    pub nearest: usize,
    /// `‖q − p_nearest‖`.
    pub nearest_distance: f64,
    /// `‖(ψ − φ)(e_{nearest,1}) ξ‖`.
    pub nearest_bound: f64,
    /// Index attaining `bound`.
    pub best_index: usize,
    /// The unit vector `ξ` the evaluations were taken against.
    #[serde(skip)]
    pub xi: CVector,
}

/// Above this codomain size, eigenvectors and norms go through randomized sketches.
const DENSE_LIMIT: usize = 256;

/// Top eigenvector of a PSD operator given by its action, by subspace iteration
/// on a block of `block` vectors; exact when the rank is at most `block`.
fn top_eigvec_sketched<R: Rng + ?Sized>(
    apply: impl Fn(&CVector) -> CVector,
    dim: usize,
    block: usize,
    iters: usize,
    rng: &mut R,
) -> CVector {
    let block = block.min(dim);
    let mut basis = ginibre(dim, block, rng);
    for _ in 0..=iters {
        let q = basis.qr().q();
        basis = zeros(dim, block);
        for j in 0..block {
            basis.set_column(j, &apply(&q.column(j).into_owned()));
        }
    }
    let q = basis.qr().q();
    let mut hq = zeros(dim, block);
    for j in 0..block {
        hq.set_column(j, &apply(&q.column(j).into_owned()));
    }
    let (_, vecs) = eigh(&(q.adjoint() * hq));
    let top = &q * vecs.column(block - 1);
    &top / c(top.norm())
}

/// `‖Q* a‖ ≤ ‖a‖` with `Q` an orthonormal basis of `a·[probes, Ω]`: never below
/// `‖a v‖` for a probe `v`, and exact when `rank a` fits in the sketch.
fn sketched_norm_lower<R: Rng + ?Sized>(
    a: &CMatrix,
    probes: &[CVector],
    extra: usize,
    rng: &mut R,
) -> f64 {
    let cols = probes.len() + extra;
    if cols >= a.nrows() {
        return op_norm(a);
    }
    let mut range = zeros(a.nrows(), cols);
    for (j, v) in probes.iter().enumerate() {
        range.set_column(j, &(a * v));
    }
    if extra > 0 {
        let omega = ginibre(a.ncols(), extra, rng);
        range.columns_mut(probes.len(), extra).copy_from(&(a * omega));
    }
    let b = range.qr().q().adjoint() * a;
    max_eigenvalue(&(&b * b.adjoint())).max(0.0).sqrt()
}

/// Lower bound on `‖ψ − φ‖` by evaluating at `e_{i1}` against the vector `ξ`
/// with `ψ_p(e_11)ξ = ξ`.
///
/// `ξ = e_1 ⊗ ξ_1 + η`; `q` is the corank-one projection killing `p_1ξ_1`, and
/// `‖φ(e_{i1})ξ‖ = ‖p_i p_1 ξ_1‖ ≤ ‖p_i − q‖`, so the nearest member gives at least
/// `1 − ‖q − p_i‖`. The returned bound is the best evaluation over all members.
pub fn separation_lower_bound<M: LinearMap>(
    instance: &CounterexampleInstance,
    psi: &EmbeddingCertificate<M>,
) -> Result<SeparationRecord> {
    let (r, n) = (instance.r, instance.n);
    if psi.map.dom_dim() != r || psi.map.cod_dim() != r * n {
        return Err(Error::DimensionMismatch {
            context: "separation candidate",
            expected: r * n,
            found: psi.map.cod_dim(),
        });
    }
    let pm = psi.split_projection.matrix();
    let e11 = matrix_unit(r, 0, 0);
    let xi = if r * n <= DENSE_LIMIT {
        let h = crate::matcore::hermitian_part(&(pm * psi.map.apply(&e11) * pm));
        let (_, vecs) = eigh(&h);
        vecs.column(r * n - 1).into_owned()
    } else {
        let mut rng = rng_from_seed(derive_seed(r as u64, n as u64, 0x5e9));
        top_eigvec_sketched(|w| pm * psi.map.apply_to_vector(&e11, &(pm * w)), r * n, 16, 4, &mut rng)
    };
    let xi1 = xi.rows(0, n).into_owned();
    let v = instance.map.projections()[0].clone() * &xi1;
    let (nearest, nearest_distance) = if v.norm() < 1e-14 {
        (0, 0.0)
    } else {
        instance.family.nearest(&(&v / c(v.norm())))
    };
    let evals: Vec<f64> = (0..r)
        .map(|i| {
            let e = matrix_unit(r, i, 0);
            (psi.map.apply_to_vector(&e, &xi) - instance.map.apply_to_vector(&e, &xi)).norm()
        })
        .collect();
    let (best_index, bound) = evals
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, b)| if b > acc.1 { (i, b) } else { acc });
    Ok(SeparationRecord {
        bound,
        nearest,
        nearest_distance,
        nearest_bound: evals[nearest],
        best_index,
        xi,
    })
}

/// Witnessed lower bound on `‖ψ − φ‖` by ascent started at `e_{i1}`.
///
/// Large codomains skip the ascent and bound `‖(ψ − φ)(e_{i1})‖` from below by a
/// sketch that contains `(ψ − φ)(e_{i1})ξ`, so the result still dominates the record.
pub fn separation_norm_lower<M: LinearMap>(
    instance: &CounterexampleInstance,
    psi: &EmbeddingCertificate<M>,
    record: &SeparationRecord,
    max_iter: usize,
) -> f64 {
    let diff = crate::cpmap::Difference {
        a: &psi.map,
        b: &instance.map,
    };
    let start = matrix_unit(instance.r, record.best_index, 0);
    if diff.cod_dim() <= DENSE_LIMIT {
        return norm_ascent_from(&diff, 1, start, max_iter).0;
    }
    let mut rng = rng_from_seed(derive_seed(record.best_index as u64, instance.n as u64, 0x5e9));
    let image = diff.apply(&start);
    sketched_norm_lower(&image, std::slice::from_ref(&record.xi), 2 * instance.n, &mut rng)
        .max(diff.apply_to_vector(&start, &record.xi).norm())
}

/// Sampled complete-contractivity check of the counterexample map on random `x`.
pub fn sampled_contraction_defect<R: Rng + ?Sized>(
    instance: &CounterexampleInstance,
    level: usize,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = random_unit_ball(level * instance.r, rng);
        worst = worst.max(op_norm(&instance.map.apply_amplified(&x, level)) - 1.0);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_map_matches_dense() {
        let fam = random_family(5, 3, 7).unwrap();
        let inst = build_counterexample(&fam).unwrap();
        let dense = inst.map.to_matlin();
        let check = dense.is_cp(1e-10);
        assert!(check.is_cp);
        assert!((check.min_eigenvalue - inst.map.choi_min_eigenvalue()).abs() < 1e-10);
        let mut rng = rng_from_seed(3);
        let x = ginibre(3, 3, &mut rng);
        let y = ginibre(15, 15, &mut rng);
        assert!((dense.apply(&x) - inst.map.apply(&x)).norm() < 1e-12);
        assert!((dense.apply_adjoint(&y) - inst.map.apply_adjoint(&y)).norm() < 1e-12);
        for k in 1..=2 {
            let v = random_unit_vector(3 * k, &mut rng);
            let direct = op_norm(&dense.apply_amplified(&(&v * v.adjoint()), k));
            assert!((direct - inst.map.rank1_image_norm(&v)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_is_projection_and_bound_formula() {
        let fam = random_family(8, 6, 1).unwrap();
        let inst = build_counterexample(&fam).unwrap();
        assert!(inst.map.unit_idempotence_defect() < 1e-12);
        assert!((inst.inverse_bound - 2.0).abs() < 1e-15);
        let chk = verify_inverse_bound(&inst, 100, 5);
        assert!(chk.worst() >= chk.paper_floor - 1e-8);
        assert!((chk.certified_inverse_upper - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_coordinate_vector_has_norm_one() {
        let fam = random_family(6, 4, 2).unwrap();
        let inst = build_counterexample(&fam).unwrap();
        let v = crate::matcore::basis_vector(4, 2);
        assert!((inst.map.rank1_image_norm(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn huge_radius_gives_single_member() {
        let fam = projection_family(5, 2.0, 3, 200).unwrap();
        assert_eq!(fam.len(), 1);
    }

    #[test]
    fn separation_is_an_evaluation() {
        let fam = projection_family(5, 0.9, 11, 300).unwrap();
        let inst = build_counterexample(&fam).unwrap();
        for s in 0..4 {
            let psi = random_coe(inst.r, 5, s).unwrap();
            assert!(psi.hom_residual < 1e-12);
            assert!(psi.iso_residual < 1e-10);
            let rec = separation_lower_bound(&inst, &psi).unwrap();
            assert!(rec.nearest_bound >= 1.0 - rec.nearest_distance - 1e-9);
            let lower = separation_norm_lower(&inst, &psi, &rec, 20);
            assert!(rec.bound <= lower + 1e-9);
        }
    }
}
