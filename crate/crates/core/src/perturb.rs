//! Perturbing almost complete order embeddings into exact ones.
//!
//! Each construction returns an [`EmbeddingCertificate`] for the map it
//! builds and a [`PerturbReport`] comparing the measured cb distance to the
//! published bound. The report's `passed` flag is `distance.upper ≤ bound + 1e-7`.

use serde::Serialize;

use crate::cbnorm::{cb_norm, inverse_cb_upper, positive_min, NormEstimate, NormOptions};
use crate::cpmap::{CertifyOptions, EmbeddingCertificate, LinearMap, MatLinMap};
use crate::error::{Error, Result};
use crate::matcore::{
    c, canonical_phase, eigh, identity, kron, matrix_unit, min_eigenvalue, op_norm,
    polar_isometry, psd_inv_sqrt, spectral_projection, zeros, CMatrix, CVector, Projection,
    StarAlgebra,
};
use crate::random::{derive_seed, random_unit_vector, rng_from_seed};

/// Slack allowed when comparing a measured distance to a published bound.
pub const BOUND_SLACK: f64 = 1e-7;

#[derive(Clone, Copy, Debug)]
pub struct PerturbOptions {
    /// Settings for the cb-distance measurement.
    pub norm: NormOptions,
    /// Settings for the positive-cone certificates.
    pub search: NormOptions,
    pub certify: CertifyOptions,
    /// Restarts for the vector-state ascent (coe_split, optimal_state).
    pub vector_restarts: usize,
    /// Iterations of the matrix multiplicative-weights solver in optimal_state.
    pub state_iterations: usize,
    pub seed: u64,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self {
            norm: NormOptions::default(),
            search: NormOptions {
                restarts: 16,
                ..NormOptions::default()
            },
            certify: CertifyOptions::default(),
            vector_restarts: 32,
            state_iterations: 400,
            seed: 0xc0e,
        }
    }
}

impl PerturbOptions {
    pub fn fast() -> Self {
        Self {
            norm: NormOptions::fast(),
            search: NormOptions {
                restarts: 6,
                max_iter: 100,
                ..NormOptions::fast()
            },
            certify: CertifyOptions {
                iso_samples: 50,
                iso_level_cap: 2,
                ..CertifyOptions::default()
            },
            vector_restarts: 8,
            state_iterations: 200,
            seed: 0xc0e,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.norm.seed = derive_seed(seed, 1, 0);
        self.search.seed = derive_seed(seed, 2, 0);
        self
    }
}

/// Outcome of one construction measured against its published bound.
#[derive(Clone, Debug, Serialize)]
pub struct PerturbReport {
    #[serde(skip)]
    pub input_map: MatLinMap,
    /// The `δ` the bound is evaluated at.
    pub delta: f64,
    /// Independently measured `δ`; equals `delta` unless a caller measured it.
    pub delta_measured: f64,
    pub distance_lower: f64,
    pub distance_upper: f64,
    pub paper_bound: f64,
    pub hom_residual: f64,
    pub iso_residual: f64,
    pub passed: bool,
}

impl PerturbReport {
    fn new<M: LinearMap>(
        input: &MatLinMap,
        delta: f64,
        distance: &NormEstimate,
        paper_bound: f64,
        cert: &EmbeddingCertificate<M>,
    ) -> Self {
        Self {
            input_map: input.clone(),
            delta,
            delta_measured: delta,
            distance_lower: distance.lower,
            distance_upper: distance.upper,
            paper_bound,
            hom_residual: cert.hom_residual,
            iso_residual: cert.iso_residual,
            passed: distance.upper <= paper_bound + BOUND_SLACK,
        }
    }
}

/// A constructed embedding, its certificate and the distance report.
#[derive(Clone, Debug)]
pub struct Perturbation {
    pub certificate: EmbeddingCertificate,
    pub report: PerturbReport,
    /// cb distance between input and output.
    pub distance: NormEstimate,
}

pub fn bound_samerange(delta: f64) -> f64 {
    57.0 * delta.sqrt()
}

pub fn bound_cutdown(delta: f64) -> f64 {
    68.0 * delta.powf(0.25)
}

pub fn bound_crux(delta: f64) -> f64 {
    136.0 * delta.powf(0.25)
}

pub fn bound_amplified(delta: f64) -> f64 {
    272.0 * delta.powf(0.25)
}

pub fn bound_rank1_recover(delta: f64) -> f64 {
    315.0 * delta.powf(0.125)
}

pub fn bound_rank1_perturb(delta: f64) -> f64 {
    1360.0 * delta.powf(1.0 / 32.0)
}

/// `δ′ = 819 δ^{1/4}`, the intermediate parameter of the rank-one theorem.
pub fn rank1_delta_prime(delta: f64) -> f64 {
    819.0 * delta.powf(0.25)
}

fn distance(a: &MatLinMap, b: &MatLinMap, opts: &NormOptions) -> Result<NormEstimate> {
    cb_norm(&a.sub(b)?, opts)
}

fn require_square(phi: &MatLinMap, context: &'static str) -> Result<()> {
    if phi.dom_dim() != phi.cod_dim() {
        return Err(Error::DimensionMismatch {
            context,
            expected: phi.dom_dim(),
            found: phi.cod_dim(),
        });
    }
    Ok(())
}

fn require_cpc(phi: &MatLinMap) -> Result<()> {
    phi.require_cp(1e-9)?;
    let top = crate::matcore::max_eigenvalue(&phi.apply(&identity(phi.dom_dim())));
    if top > 1.0 + 1e-9 {
        return Err(Error::NotContractive { eigenvalue: top });
    }
    Ok(())
}

/// `x ↦ w* (x ⊗ 1_m) w`.
fn conjugated_rep(n: usize, m: usize, w: &CMatrix) -> MatLinMap {
    let one = identity(m);
    MatLinMap::from_fn(n, w.ncols(), |x| w.adjoint() * kron(x, &one) * w)
}

/// A *-automorphism `π` of `M_n` close to the CPC map `φ: M_n → M_n`.
///
/// Pipeline: unitalize by `φ(1)^{-1/2}`, dilate, project `vv*` onto the
/// commutant of `σ(M_n)`, cut its spectrum below the top eigenvalue, take
/// the polar part `w` of the cut projection against `v`, and return
/// `π = w* σ(·) w`.
pub fn near_auto_to_auto(phi: &MatLinMap, delta: f64, opts: &PerturbOptions) -> Result<Perturbation> {
    require_square(phi, "near_auto_to_auto")?;
    if !(0.0..57f64.powf(-0.5)).contains(&delta) {
        return Err(Error::OutOfRange(format!("delta {delta} outside [0, 57^-1/2)")));
    }
    require_cpc(phi)?;
    let n = phi.dom_dim();
    let one = phi.apply(&identity(n));
    let unital = if op_norm(&(&one - identity(n))) > 1e-13 {
        let s = psd_inv_sqrt(&one, 1e-12)
            .map_err(|_| Error::HypothesisFailure("φ(1) is not invertible".into()))?;
        MatLinMap::from_fn(n, n, |x| &s * phi.apply(x) * &s)
    } else {
        phi.clone()
    };
    let st = unital.stinespring()?;
    let m = st.multiplicity;
    let vv = &st.v * st.v.adjoint();
    let x = StarAlgebra::amplified_full(n, m).commutant_project(&vv)?;
    let (vals, _) = eigh(&x);
    let dim = n * m;
    // descending: the top n eigenvalues form one copy of the top eigenvalue of tr_1(x)
    let top_n = vals[dim - n];
    let below = if dim > n { vals[dim - n - 1] } else { 0.0 };
    if top_n - below <= 2e-9 {
        return Err(Error::HypothesisFailure(format!(
            "no spectral gap below the top eigenvalue (gap {:e})",
            top_n - below
        )));
    }
    let cut = 0.5 * (top_n + below);
    let p = spectral_projection(&x, cut, vals[dim - 1] + 1.0, 1e-9)?;
    if p.rank() != n {
        return Err(Error::HypothesisFailure(format!(
            "spectral projection has rank {} instead of {n}",
            p.rank()
        )));
    }
    let w = polar_isometry(&st.v, &p)?;
    let pi = conjugated_rep(n, m, &w);
    let mut rng = rng_from_seed(derive_seed(opts.seed, 0x5a, 0));
    let cert = EmbeddingCertificate::certify(pi, Projection::identity(n), &opts.certify, &mut rng)?;
    let dist = distance(&cert.map, phi, &opts.norm)?;
    let report = PerturbReport::new(phi, delta, &dist, bound_samerange(delta), &cert);
    Ok(Perturbation {
        certificate: cert,
        report,
        distance: dist,
    })
}

/// Certified `‖(φ_p)^{-1}‖ − 1` for the corner `P*φ(·)P`, from the positive minimum at level 1.
pub fn corner_inverse_certificate(
    phi: &MatLinMap,
    p: &Projection,
    opts: &PerturbOptions,
) -> Result<f64> {
    let corner = phi.cod_conjugate(&p.frame());
    let pm = positive_min(&corner, 1, &opts.search);
    Ok(inverse_cb_upper(pm.value)? - 1.0)
}

/// Replace the compression `φ_p` by an exact *-homomorphism and keep the corner `φ_{(1−p)}`.
pub fn cutdown_embed(
    phi: &MatLinMap,
    p: &Projection,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<Perturbation> {
    let n = phi.dom_dim();
    if p.dim() != phi.cod_dim() || p.rank() != n {
        return Err(Error::DimensionMismatch {
            context: "cutdown projection rank",
            expected: n,
            found: p.rank(),
        });
    }
    require_cpc(phi)?;
    let certified = corner_inverse_certificate(phi, p, opts)?;
    if certified > delta + 1e-9 {
        return Err(Error::NoCertificate(format!(
            "corner inverse bound 1+{certified:e} exceeds 1+{delta:e}"
        )));
    }
    let frame = p.frame();
    let corner = phi.cod_conjugate(&frame);
    let auto = near_auto_to_auto(&corner, certified.max(0.0), opts)?;
    let pi = &auto.certificate.map;
    let q = p.complement();
    let qm = q.matrix();
    let psi = MatLinMap::from_fn(n, phi.cod_dim(), |x| {
        &frame * pi.apply(x) * frame.adjoint() + qm * phi.apply(x) * qm
    });
    let mut rng = rng_from_seed(derive_seed(opts.seed, 0xc7, 0));
    let cert = EmbeddingCertificate::certify(psi, p.clone(), &opts.certify, &mut rng)?;
    let dist = distance(&cert.map, phi, &opts.norm)?;
    let report = PerturbReport::new(phi, delta, &dist, bound_cutdown(delta), &cert);
    Ok(Perturbation {
        certificate: cert,
        report,
        distance: dist,
    })
}

/// Gram data of `{φ(e_{i1})ξ}` and its bottom eigenvalue.
#[derive(Clone, Debug)]
pub struct LambdaGram {
    pub xi: CVector,
    /// `gram[i][j] = ξ* φ(e_{1i}) φ(e_{j1}) ξ`.
    pub gram: CMatrix,
    /// Columns `φ(e_{i1})ξ`.
    pub images: CMatrix,
    pub min_eig: f64,
}

pub fn gram_min<M: LinearMap + ?Sized>(phi: &M, xi: &CVector) -> Result<LambdaGram> {
    if xi.len() != phi.cod_dim() {
        return Err(Error::DimensionMismatch {
            context: "gram_min vector",
            expected: phi.cod_dim(),
            found: xi.len(),
        });
    }
    if (xi.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::OutOfRange(format!("‖ξ‖ = {} is not 1", xi.norm())));
    }
    let n = phi.dom_dim();
    let mut images = zeros(phi.cod_dim(), n);
    let mut left = zeros(phi.cod_dim(), n);
    for i in 0..n {
        images.set_column(i, &(phi.apply(&matrix_unit(n, i, 0)) * xi));
        // φ(e_{1i})* ξ, so that gram = left* images
        left.set_column(i, &(phi.apply(&matrix_unit(n, 0, i)).adjoint() * xi));
    }
    let gram = left.adjoint() * &images;
    let min_eig = min_eigenvalue(&gram);
    Ok(LambdaGram {
        xi: xi.clone(),
        gram,
        images,
        min_eig,
    })
}

/// The crux construction: split off the span of `{φ(e_{i1})ξ}` and cut down to it.
pub fn crux_perturb(
    phi: &MatLinMap,
    xi: &CVector,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<Perturbation> {
    let lg = gram_min(phi, xi)?;
    let threshold = 1.0 / (1.0 + delta);
    if lg.min_eig < threshold - 1e-12 {
        return Err(Error::HypothesisFailure(format!(
            "Gram minimum {} below 1/(1+δ) = {threshold}",
            lg.min_eig
        )));
    }
    let delta_g = (1.0 / lg.min_eig - 1.0).max(0.0);
    let c_cert = 1.0 / (1.0 + delta_g).powi(2);
    let delta_cut = inverse_cb_upper(c_cert)
        .map_err(|_| {
            Error::HypothesisFailure(format!(
                "Gram minimum {} too small for a corner certificate",
                lg.min_eig
            ))
        })?
        - 1.0;
    let g_inv_sqrt = psd_inv_sqrt(&crate::matcore::hermitian_part(&lg.gram), 1e-12)?;
    let frame = &lg.images * g_inv_sqrt;
    let p = Projection::from_frame(&frame);
    let inner = cutdown_embed(phi, &p, delta_cut.max(1e-15), opts)?;
    let report = PerturbReport {
        delta,
        delta_measured: delta,
        paper_bound: bound_crux(delta),
        passed: inner.distance.upper <= bound_crux(delta) + BOUND_SLACK,
        ..inner.report
    };
    Ok(Perturbation { report, ..inner })
}

/// `M(ρ)_{ij} = tr(ρ φ(e_{1i}) φ(e_{j1}))` for every `ρ`, as a precomputed family.
struct StateForm {
    n: usize,
    /// `h[i*n + j] = φ(e_{1i}) φ(e_{j1})`.
    h: Vec<CMatrix>,
}

impl StateForm {
    fn new(phi: &MatLinMap) -> Self {
        let n = phi.dom_dim();
        let mut h = Vec::with_capacity(n * n);
        for i in 0..n {
            let a = phi.apply(&matrix_unit(n, 0, i));
            for j in 0..n {
                h.push(&a * phi.apply(&matrix_unit(n, j, 0)));
            }
        }
        Self { n, h }
    }

    fn m_of(&self, rho: &CMatrix) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, n, |i, j| (rho * &self.h[i * n + j]).trace())
    }

    /// `Φ(σ) = Σ σ_{ji} h_{ij}`, so that `tr(ρΦ(σ)) = tr(σ M(ρ))`.
    fn phi_of(&self, sigma: &CMatrix) -> CMatrix {
        let n = self.n;
        let dim = self.h[0].nrows();
        let mut out = zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                out += &self.h[i * n + j] * sigma[(j, i)];
            }
        }
        crate::matcore::hermitian_part(&out)
    }

    fn value(&self, rho: &CMatrix) -> f64 {
        min_eigenvalue(&crate::matcore::hermitian_part(&self.m_of(rho)))
    }
}

/// Best state found for `max_ρ λ_min(M(ρ))`, with a certified upper bound on the optimum.
#[derive(Clone, Debug)]
pub struct OptimalState {
    pub rho: CMatrix,
    pub value: f64,
    pub upper: f64,
}

fn exp_density(h: &CMatrix) -> CMatrix {
    let (vals, _) = eigh(h);
    let top = vals[vals.len() - 1];
    let e = crate::matcore::hermitian_fn(h, |x| (x - top).exp());
    let tr = e.trace();
    e / tr
}

/// Maximize the bottom eigenvalue of the Gram matrix of `{φ(e_{i1})ξ}` over unit `ξ` in the span of `basis`.
fn vector_ascent<M: LinearMap + ?Sized>(
    phi: &M,
    basis: &CMatrix,
    restarts: usize,
    seed: u64,
) -> (f64, CVector) {
    let n = phi.dom_dim();
    let d = basis.ncols();
    let ops: Vec<CMatrix> = (0..n)
        .map(|i| phi.apply(&matrix_unit(n, i, 0)) * basis)
        .collect();
    let value_of = |y: &CVector| -> (f64, CVector) {
        let mut a = zeros(phi.cod_dim(), n);
        for (i, op) in ops.iter().enumerate() {
            a.set_column(i, &(op * y));
        }
        let g = a.adjoint() * &a;
        let (vals, vecs) = eigh(&g);
        (vals[0], vecs.column(0).into_owned())
    };
    let mut best = (f64::NEG_INFINITY, CVector::zeros(d));
    for r in 0..restarts.max(1) {
        let mut y = if r < d.min(restarts / 2 + 1) {
            crate::matcore::basis_vector(d, r)
        } else {
            let mut rng = rng_from_seed(derive_seed(seed, 0x7ec, r as u64));
            random_unit_vector(d, &mut rng)
        };
        let (mut f, mut cvec) = value_of(&y);
        let mut eta = 0.5;
        for _ in 0..300 {
            // ascent direction of y ↦ ‖Σ c_i op_i y‖² for the current bottom eigenvector c
            let mut b = zeros(phi.cod_dim(), d);
            for (i, op) in ops.iter().enumerate() {
                b += op * cvec[i];
            }
            let bb = b.adjoint() * &b;
            let gy = &bb * &y;
            let dir = &gy - &y * y.dotc(&gy);
            let dn = dir.norm();
            if dn < 1e-15 {
                break;
            }
            let mut moved = false;
            eta *= 2.0;
            for _ in 0..30 {
                let cand = &y + &dir * c(eta / dn);
                let cand = &cand / c(cand.norm());
                let (fc, cc) = value_of(&cand);
                if fc > f {
                    moved = fc - f > 1e-15;
                    y = cand;
                    f = fc;
                    cvec = cc;
                    break;
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if f > best.0 {
            best = (f, y);
        }
    }
    let xi = basis * &best.1;
    let norm = xi.norm();
    (best.0, xi / c(norm))
}

/// Best vector state `ξξ*` for `max λ_min(M(ξξ*))`, found by multi-start sphere ascent.
pub fn best_vector_state(phi: &MatLinMap, opts: &PerturbOptions) -> (f64, CVector) {
    vector_ascent(phi, &identity(phi.cod_dim()), opts.vector_restarts, opts.seed)
}

/// `max_ρ λ_min(M(ρ))` over density matrices `ρ` on the codomain.
///
/// Candidates: the best vector state (ascent on the sphere) and the averaged
/// iterates of a matrix multiplicative-weights game between `ρ` and the
/// density `σ` on the domain. The upper bound is `λ_max(Φ(σ̄))`.
pub fn optimal_state(phi: &MatLinMap, opts: &PerturbOptions) -> Result<OptimalState> {
    let big_n = phi.cod_dim();
    let form = StateForm::new(phi);
    let n = form.n;
    let (vec_value, xi) = vector_ascent(phi, &identity(big_n), opts.vector_restarts, opts.seed);
    let vec_rho = &xi * xi.adjoint();

    let scale = form
        .h
        .iter()
        .map(op_norm)
        .fold(0.0_f64, f64::max)
        .max(1e-12);
    let iters = opts.state_iterations.max(1);
    let eta = (((big_n as f64).ln().max(1.0)) / iters as f64).sqrt() / scale;
    let mut cum_rho = zeros(big_n, big_n);
    let mut cum_sigma = zeros(n, n);
    let mut avg_rho = zeros(big_n, big_n);
    let mut avg_sigma = zeros(n, n);
    let mut rho = identity(big_n) / c(big_n as f64);
    let mut sigma = identity(n) / c(n as f64);
    for t in 0..iters {
        // optimistic step: predict with the current gradients, update with the predicted ones
        let g_rho = form.phi_of(&sigma);
        let g_sigma = crate::matcore::hermitian_part(&form.m_of(&rho));
        let rho_half = exp_density(&((&cum_rho + &g_rho) * c(eta)));
        let sigma_half = exp_density(&((&cum_sigma + &g_sigma) * c(-eta)));
        cum_rho += form.phi_of(&sigma_half);
        cum_sigma += crate::matcore::hermitian_part(&form.m_of(&rho_half));
        rho = exp_density(&(&cum_rho * c(eta)));
        sigma = exp_density(&(&cum_sigma * c(-eta)));
        let w = 1.0 / (t + 1) as f64;
        avg_rho = &avg_rho * c(1.0 - w) + &rho_half * c(w);
        avg_sigma = &avg_sigma * c(1.0 - w) + &sigma_half * c(w);
    }
    let mwu_value = form.value(&avg_rho);
    let upper_mwu = crate::matcore::max_eigenvalue(&form.phi_of(&avg_sigma));
    let upper_uniform = crate::matcore::max_eigenvalue(&form.phi_of(&(identity(n) / c(n as f64))));
    let upper = upper_mwu.min(upper_uniform).max(vec_value.max(mwu_value));
    let (rho, value) = if vec_value >= mwu_value {
        (vec_rho, vec_value)
    } else {
        (avg_rho, mwu_value)
    };
    Ok(OptimalState { rho, value, upper })
}

/// Result of the amplification theorem.
#[derive(Clone, Debug)]
pub struct AmplifiedPerturbation {
    pub k: usize,
    /// Normalized truncated value that selected `k`.
    pub truncated_value: f64,
    pub state: OptimalState,
    /// Certificate for a map `M_n → M_k ⊗ M_N` close to `1_k ⊗ φ`.
    pub perturbation: Perturbation,
}

/// Amplify `φ` to `1_k ⊗ φ` so a vector state sees all of `Λ_n^φ`, then apply the crux construction.
pub fn amplified_perturb(
    phi: &MatLinMap,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<AmplifiedPerturbation> {
    require_cpc(phi)?;
    let state = optimal_state(phi, opts)?;
    amplified_perturb_with_state(phi, delta, state, opts)
}

/// [`amplified_perturb`] with a precomputed [`optimal_state`].
pub fn amplified_perturb_with_state(
    phi: &MatLinMap,
    delta: f64,
    state: OptimalState,
    opts: &PerturbOptions,
) -> Result<AmplifiedPerturbation> {
    require_cpc(phi)?;
    let form = StateForm::new(phi);
    let big_n = phi.cod_dim();
    let (vals, vecs) = eigh(&state.rho);
    let threshold = 1.0 / (1.0 + 3.0 * delta);
    let mut chosen = None;
    let mut truncated = zeros(big_n, big_n);
    let mut weight = 0.0;
    for k in 1..=big_n {
        let idx = big_n - k;
        let mu = vals[idx].max(0.0);
        if mu <= 0.0 {
            break;
        }
        let col = vecs.column(idx);
        truncated += &col * col.adjoint() * c(mu);
        weight += mu;
        let value = form.value(&truncated) / weight;
        if value >= threshold - 1e-12 {
            chosen = Some((k, value));
            break;
        }
    }
    let (k, truncated_value) = chosen.ok_or_else(|| {
        Error::HypothesisFailure(format!(
            "optimal state value {} does not reach 1/(1+3δ) = {threshold}",
            state.value
        ))
    })?;
    let mut xi = CVector::zeros(k * big_n);
    for i in 0..k {
        let idx = big_n - 1 - i;
        let mu = vals[idx].max(0.0).sqrt();
        let col = vecs.column(idx);
        for a in 0..big_n {
            xi[i * big_n + a] = col[a] * c(mu);
        }
    }
    let norm = xi.norm();
    xi /= c(norm);
    let amplified = phi.tensor_unit(k);
    let inner = crux_perturb(&amplified, &xi, 3.0 * delta, opts)?;
    let bound = bound_amplified(delta);
    let report = PerturbReport {
        delta,
        delta_measured: delta,
        paper_bound: bound,
        passed: inner.distance.upper <= bound + BOUND_SLACK,
        ..inner.report
    };
    Ok(AmplifiedPerturbation {
        k,
        truncated_value,
        state,
        perturbation: Perturbation { report, ..inner },
    })
}

/// Recover the splitting projection of an exact complete order embedding.
pub fn coe_split<M: LinearMap + Clone>(
    psi: &M,
    opts: &PerturbOptions,
) -> Result<EmbeddingCertificate<M>> {
    let n = psi.dom_dim();
    let big_n = psi.cod_dim();
    let mut rng = rng_from_seed(derive_seed(opts.seed, 0x5e1, 0));
    let level = n.min(opts.certify.iso_level_cap).max(1);
    let iso = crate::cpmap::iso_residual(psi, level, opts.certify.iso_samples, &mut rng);
    if iso > 1e-8 {
        return Err(Error::HypothesisFailure(format!(
            "map is not completely isometric (sampled defect {iso:e})"
        )));
    }
    // ξ with ‖ψ(e_{i1})ξ‖ = 1 for all i lies in the kernel of Σ (1 − ψ(e_{1i})ψ(e_{i1}))
    let mut s = zeros(big_n, big_n);
    for i in 0..n {
        let a = psi.apply(&matrix_unit(n, i, 0));
        s += identity(big_n) - a.adjoint() * a;
    }
    let (vals, vecs) = eigh(&s);
    let kdim = vals.iter().take_while(|&&v| v < 1e-9).count();
    if kdim == 0 {
        return Err(Error::NoCertificate(
            "no vector is mapped isometrically; input is not an exact embedding".into(),
        ));
    }
    let basis = vecs.columns(0, kdim).into_owned();
    let (value, xi) = if kdim == 1 {
        let xi = basis.column(0).into_owned();
        let lg = gram_min(psi, &xi)?;
        (lg.min_eig, xi)
    } else {
        vector_ascent(psi, &basis, opts.vector_restarts, opts.seed)
    };
    if value < 1.0 - 1e-8 {
        return Err(Error::NoCertificate(format!(
            "best Gram minimum {value} is below 1; input is not an exact embedding"
        )));
    }
    let lg = gram_min(psi, &canonical_phase(&xi, 1e-12))?;
    let frame = &lg.images * psd_inv_sqrt(&crate::matcore::hermitian_part(&lg.gram), 1e-12)?;
    let p = Projection::from_frame(&frame);
    let cert = EmbeddingCertificate::certify(psi.clone(), p, &opts.certify, &mut rng)?;
    if cert.hom_residual > 1e-8 {
        return Err(Error::NoCertificate(format!(
            "split part is not multiplicative (residual {:e})",
            cert.hom_residual
        )));
    }
    Ok(cert)
}

/// UCP left inverse `T(x) = π⁻¹(P* x P)` of a certified embedding.
pub fn invert_embedding(cert: &EmbeddingCertificate) -> Result<MatLinMap> {
    if cert.hom_residual > 1e-8 {
        return Err(Error::NoCertificate(format!(
            "certificate residual {:e} exceeds 1e-8",
            cert.hom_residual
        )));
    }
    let n = cert.map.dom_dim();
    let frame = cert.split_projection.frame();
    if frame.ncols() != n {
        return Err(Error::DegenerateInput(format!(
            "splitting projection has rank {} instead of {n}",
            frame.ncols()
        )));
    }
    let pi = cert.map.cod_conjugate(&frame);
    let unit_defect = op_norm(&(pi.apply(&identity(n)) - identity(n)));
    if unit_defect > 1e-8 {
        return Err(Error::DegenerateInput(format!(
            "homomorphic part is not unital on its corner (defect {unit_defect:e})"
        )));
    }
    // an automorphism of M_n is Ad_u, whose inverse is its Hilbert–Schmidt adjoint
    let pi_inv = pi.adjoint();
    Ok(MatLinMap::from_fn(cert.map.cod_dim(), n, |x| {
        pi_inv.apply(&(frame.adjoint() * x * &frame))
    }))
}

/// UCP `T: M_N → M_n` with `‖id − Tφ‖_cb` small.
#[derive(Clone, Debug)]
pub struct ApproxInverse {
    pub map: MatLinMap,
    pub k: usize,
    pub residual: NormEstimate,
    pub paper_bound: f64,
    pub passed: bool,
    pub amplified: AmplifiedPerturbation,
}

pub fn approx_inverse(phi: &MatLinMap, delta: f64, opts: &PerturbOptions) -> Result<ApproxInverse> {
    let amplified = amplified_perturb(phi, delta, opts)?;
    approx_inverse_from(phi, delta, amplified, opts)
}

/// [`approx_inverse`] from an already computed amplified perturbation.
pub fn approx_inverse_from(
    phi: &MatLinMap,
    delta: f64,
    amplified: AmplifiedPerturbation,
    opts: &PerturbOptions,
) -> Result<ApproxInverse> {
    let k = amplified.k;
    let r = invert_embedding(&amplified.perturbation.certificate)?;
    let one = identity(k);
    let t = MatLinMap::from_fn(phi.cod_dim(), phi.dom_dim(), |x| r.apply(&kron(&one, x)));
    let composed = MatLinMap::compose(&t, phi)?;
    let residual = cb_norm(&MatLinMap::identity(phi.dom_dim()).sub(&composed)?, &opts.norm)?;
    let bound = bound_amplified(delta);
    Ok(ApproxInverse {
        map: t,
        k,
        passed: residual.upper <= bound + BOUND_SLACK,
        residual,
        paper_bound: bound,
        amplified,
    })
}

/// A rank-one projection in the domain whose image is close to a given rank-one projection.
#[derive(Clone, Debug)]
pub struct Rank1Recovery {
    /// Rank-one projection in the domain `M_n`.
    pub r: Projection,
    /// `T(p)/‖T(p)‖`.
    pub q: CMatrix,
    pub t_norm: f64,
    /// `‖φ(r) − p‖`.
    pub distance: f64,
    pub paper_bound: f64,
    pub passed: bool,
    /// Domain block the projection was found in.
    pub block: usize,
}

fn rank1_in_block(
    phi: &MatLinMap,
    p: &Projection,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<(CMatrix, f64, CVector)> {
    let inv = approx_inverse(phi, delta, opts)?;
    let tp = inv.map.apply(p.matrix());
    let t_norm = op_norm(&tp);
    let floor = 1.0 - 273.0 * delta.powf(0.25);
    if t_norm < floor || t_norm == 0.0 {
        return Err(Error::HypothesisFailure(format!(
            "‖T(p)‖ = {t_norm} is below 1 − 273δ^(1/4) = {floor}"
        )));
    }
    let q = tp / c(t_norm);
    let (_, vecs) = eigh(&q);
    let top = vecs.column(vecs.ncols() - 1).into_owned();
    Ok((q, t_norm, canonical_phase(&top, 1e-12)))
}

pub fn rank1_recover(
    phi: &MatLinMap,
    p: &Projection,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<Rank1Recovery> {
    if p.rank() != 1 || p.dim() != phi.cod_dim() {
        return Err(Error::DimensionMismatch {
            context: "rank1_recover projection",
            expected: 1,
            found: p.rank(),
        });
    }
    let n = phi.dom_dim();
    let blocks = phi.dom_blocks().to_vec();
    let bound = bound_rank1_recover(delta);
    let mut best: Option<Rank1Recovery> = None;
    let mut last_err = None;
    let mut off = 0;
    for (b, &size) in blocks.iter().enumerate() {
        let restricted = if blocks.len() == 1 {
            phi.clone()
        } else {
            phi.dom_block(b)?
        };
        match rank1_in_block(&restricted, p, delta, opts) {
            Ok((q_local, t_norm, v_local)) => {
                let mut v = CVector::zeros(n);
                v.rows_mut(off, size).copy_from(&v_local);
                let r = Projection::from_vector(&v);
                let dist = op_norm(&(phi.apply(r.matrix()) - p.matrix()));
                let mut q = zeros(n, n);
                q.view_mut((off, off), (size, size)).copy_from(&q_local);
                if best.as_ref().is_none_or(|cur| dist < cur.distance) {
                    best = Some(Rank1Recovery {
                        r,
                        q,
                        t_norm,
                        distance: dist,
                        paper_bound: bound,
                        passed: dist <= bound + BOUND_SLACK,
                        block: b,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
        off += size;
    }
    best.ok_or_else(|| last_err.expect("at least one block"))
}

/// Unitary diagonalizing `q`, columns by descending eigenvalue, phases canonical.
fn descending_eigenbasis(q: &CMatrix) -> CMatrix {
    let (_, vecs) = eigh(q);
    let n = q.nrows();
    let mut u = zeros(n, n);
    for j in 0..n {
        let col = canonical_phase(&vecs.column(n - 1 - j).into_owned(), 1e-12);
        u.set_column(j, &col);
    }
    u
}

/// Perturb `φ` to an exact embedding whose range contains the rank-one projection `p`.
pub fn rank1_perturb(
    phi: &MatLinMap,
    p: &Projection,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<(Rank1Recovery, Perturbation)> {
    let rec = rank1_recover(phi, p, delta, opts)?;
    let u = descending_eigenbasis(&rec.q);
    // in the rotated domain, r = e_11
    let rotated = phi.dom_conjugate(&u);
    let xi = p.frame().column(0).into_owned();
    let lg = gram_min(&rotated, &xi)?;
    let delta_crux = 12.0 * rank1_delta_prime(delta).sqrt();
    let delta_used = delta_crux.max(1.0 / lg.min_eig.max(1e-300) - 1.0);
    let inner = crux_perturb(&rotated, &xi, delta_used, opts)?;
    let rotated_psi = &inner.certificate.map;
    let psi = MatLinMap::from_fn(phi.dom_dim(), phi.cod_dim(), |x| {
        rotated_psi.apply(&(u.adjoint() * x * &u))
    });
    let mut rng = rng_from_seed(derive_seed(opts.seed, 0x41, 0));
    let cert = EmbeddingCertificate::certify(
        psi,
        inner.certificate.split_projection.clone(),
        &opts.certify,
        &mut rng,
    )?;
    let dist = distance(&cert.map, phi, &opts.norm)?;
    let report = PerturbReport::new(phi, delta, &dist, bound_rank1_perturb(delta), &cert);
    Ok((
        rec,
        Perturbation {
            certificate: cert,
            report,
            distance: dist,
        },
    ))
}

/// Leakage of `φ` on the `0 ⊕ B` summand into the corner of the split projection `q`.
#[derive(Clone, Debug, Serialize)]
pub struct LeakageReport {
    pub corner_norm: f64,
    pub commutator_max: f64,
    pub corner_bound: f64,
    pub commutator_bound: f64,
    pub passed: bool,
}

pub fn cutdown_leakage_check(
    phi: &MatLinMap,
    cert: &EmbeddingCertificate,
    q: &Projection,
    delta: f64,
    opts: &PerturbOptions,
) -> Result<LeakageReport> {
    if cert.hom_residual > 1e-8 {
        return Err(Error::NoCertificate(format!(
            "certificate residual {:e} exceeds 1e-8",
            cert.hom_residual
        )));
    }
    let blocks = phi.dom_blocks();
    let n = blocks[0];
    if cert.map.dom_dim() != n || q.dim() != phi.cod_dim() {
        return Err(Error::DimensionMismatch {
            context: "leakage check",
            expected: n,
            found: cert.map.dom_dim(),
        });
    }
    let total = phi.dom_dim();
    let rest = total - n;
    let qm = q.matrix();
    let corner_norm = if rest == 0 {
        0.0
    } else {
        let g = CMatrix::from_fn(total, rest, |r, s| c(if r == n + s { 1.0 } else { 0.0 }));
        let restricted = phi.dom_conjugate(&g);
        let corner = MatLinMap::from_fn(rest, phi.cod_dim(), |x| qm * restricted.apply(x) * qm);
        cb_norm(&corner, &opts.norm)?.upper
    };
    let mut rng = rng_from_seed(derive_seed(opts.seed, 0x1ea, 0));
    let mut commutator_max = 0.0_f64;
    let mut probes: Vec<CMatrix> = Vec::new();
    let mut off = 0;
    for &b in blocks {
        for i in 0..b {
            for j in 0..b {
                let mut e = zeros(total, total);
                e[(off + i, off + j)] = c(1.0);
                probes.push(e);
            }
        }
        off += b;
    }
    for _ in 0..50 {
        let mut x = zeros(total, total);
        let mut off = 0;
        for &b in blocks {
            let blk = crate::random::random_unit_ball(b, &mut rng);
            x.view_mut((off, off), (b, b)).copy_from(&blk);
            off += b;
        }
        probes.push(x);
    }
    for x in &probes {
        let y = phi.apply(x);
        commutator_max = commutator_max.max(op_norm(&crate::matcore::commutator(&y, qm)));
    }
    let corner_bound = 8.0 * delta;
    let commutator_bound = 8.0 * delta.sqrt();
    Ok(LeakageReport {
        corner_norm,
        commutator_max,
        corner_bound,
        commutator_bound,
        passed: corner_norm <= corner_bound + BOUND_SLACK
            && commutator_max <= commutator_bound + BOUND_SLACK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_unitary, random_isometry};

    fn opts() -> PerturbOptions {
        PerturbOptions::default()
    }

    #[test]
    fn bound_constants() {
        assert!((bound_samerange(1e-4) - 0.57).abs() < 1e-12);
        assert!((bound_cutdown(1e-4) - 6.8).abs() < 1e-12);
        assert!((bound_crux(1e-4) - 13.6).abs() < 1e-12);
        assert!((bound_amplified(1e-4) - 27.2).abs() < 1e-12);
        assert!((bound_rank1_recover(1e-8) - 31.5).abs() < 1e-9);
    }

    #[test]
    fn rank1_constant_chain_holds_for_tiny_delta() {
        let d: f64 = 1e-12;
        let lhs = 136.0 * (12.0 * rank1_delta_prime(d).sqrt()).sqrt();
        assert!(lhs <= bound_rank1_perturb(d));
    }

    #[test]
    fn automorphism_is_fixed() {
        let mut rng = rng_from_seed(1);
        let u = haar_unitary(3, &mut rng);
        let phi = MatLinMap::conjugation(&u);
        let out = near_auto_to_auto(&phi, 0.0, &opts()).unwrap();
        assert!(out.distance.upper < 1e-9);
        assert!(out.certificate.hom_residual < 1e-9);
        assert!(out.report.passed);
    }

    #[test]
    fn gram_of_identity() {
        let id = MatLinMap::identity(3);
        let lg = gram_min(&id, &crate::matcore::basis_vector(3, 0)).unwrap();
        assert!((lg.gram.clone() - identity(3)).norm() < 1e-15);
        assert!((lg.min_eig - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coe_split_of_corner_embedding() {
        let e = CMatrix::from_fn(5, 2, |r, s| c(if r == s { 1.0 } else { 0.0 }));
        let psi = MatLinMap::conjugation(&e);
        let cert = coe_split(&psi, &opts()).unwrap();
        assert!((cert.split_projection.matrix() - &e * e.adjoint()).norm() < 1e-10);
        let t = invert_embedding(&cert).unwrap();
        assert!((t.apply(&identity(5)) - identity(2)).norm() < 1e-10);
        let back = MatLinMap::compose(&t, &psi).unwrap();
        assert!((back.choi() - MatLinMap::identity(2).choi()).norm() < 1e-10);
    }

    #[test]
    fn crux_on_exact_embedding() {
        let mut rng = rng_from_seed(2);
        let v = random_isometry(6, 2, &mut rng);
        let phi = MatLinMap::conjugation(&v);
        let xi = v.column(0).into_owned();
        let out = crux_perturb(&phi, &xi, 1e-9, &opts()).unwrap();
        assert!(out.distance.upper < 1e-6, "{}", out.distance.upper);
        assert!(out.certificate.hom_residual < 1e-8);
    }
}
