//! Independent brute-force oracles for the closed-form routines.

use cpperturb::cpmap::MatLinMap;
use cpperturb::matcore::{
    amplified_matrix_units, c, commutant_project, identity, kron, op_norm, polar_isometry,
    CMatrix, CVector, Projection,
};
use cpperturb::perturb::gram_min;
use cpperturb::random::{
    haar_unitary, random_isometry, random_unit_vector, rng_from_seed, small_unitary,
    TrialRng,
};

pub struct OracleGap {
    pub exact: f64,
    pub oracle: f64,
}

impl OracleGap {
    pub fn gap(&self) -> f64 {
        (self.oracle - self.exact).abs()
    }
}

/// `x ↦ V*(x ⊗ 1_m)V` for a random isometry `V: C^k → C^n ⊗ C^m`.
pub fn random_ucp(n: usize, k: usize, m: usize, rng: &mut TrialRng) -> MatLinMap {
    let v = random_isometry(n * m, k, rng);
    let one = identity(m);
    MatLinMap::from_fn(n, k, |x| v.adjoint() * kron(x, &one) * &v)
}

fn quadratic(gram: &CMatrix, a: &CVector) -> f64 {
    (a.adjoint() * gram * a)[(0, 0)].re
}

/// Monte-Carlo minimization of `⟨G, λ⟩` over density matrices `λ`. The minimum
/// sits on pure states, so samples are unit vectors: a global phase followed by
/// local sampling around the incumbent with a shrinking radius.
pub fn gram_oracle(n: usize, samples: usize, seed: u64) -> OracleGap {
    let mut rng = rng_from_seed(seed);
    let phi = random_ucp(n, n * n, n + 1, &mut rng);
    let xi = random_unit_vector(n * n, &mut rng);
    let g = gram_min(&phi, &xi).expect("unit ξ");
    let gram = cpperturb::matcore::hermitian_part(&g.gram);

    let global = samples / 5;
    let mut best_vec = random_unit_vector(n, &mut rng);
    let mut best = quadratic(&gram, &best_vec);
    for _ in 1..global {
        let a = random_unit_vector(n, &mut rng);
        let q = quadratic(&gram, &a);
        if q < best {
            best = q;
            best_vec = a;
        }
    }
    let mut radius = 0.3;
    let local = samples - global;
    let stage = (local / 40).max(1);
    for s in 0..local {
        let step = random_unit_vector(n, &mut rng) * c(radius);
        let cand = &best_vec + step;
        let cand = &cand / c(cand.norm());
        let q = quadratic(&gram, &cand);
        if q < best {
            best = q;
            best_vec = cand;
        }
        if (s + 1) % stage == 0 {
            radius *= 0.7;
        }
    }
    OracleGap {
        exact: g.min_eig,
        oracle: best,
    }
}

/// `‖commutant_project(t) − mean_u σ(u) t σ(u)*‖` for `σ(u) = u ⊗ 1_m`, Haar `u`.
pub fn twirl_oracle(n: usize, m: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let t = cpperturb::random::ginibre(n * m, n * m, &mut rng);
    let t = &t / c(op_norm(&t));
    let exact = commutant_project(amplified_matrix_units(n, m), &t).expect("valid algebra");
    let one = identity(m);
    let mut acc = CMatrix::zeros(n * m, n * m);
    for _ in 0..samples {
        let s = kron(&haar_unitary(n, &mut rng), &one);
        acc += &s * &t * s.adjoint();
    }
    op_norm(&(acc / c(samples as f64) - exact))
}

/// Compares `‖v − w‖` for `w = polar_isometry(v, p)` against the best of `grid`
/// candidates `p V' u`, with `V'` a fixed frame of `range(p)` and `u` drawn from
/// Haar samples plus a refining local grid around the incumbent.
///
/// Returns `(polar distance, best grid distance)`.
pub fn polar_oracle(rows: usize, rank: usize, grid: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_from_seed(seed);
    let v = random_isometry(rows, rank, &mut rng);
    let tilt = small_unitary(rows, 0.1, &mut rng);
    let p = Projection::from_frame(&(&tilt * &v));
    let w = polar_isometry(&v, &p).expect("close range");
    let frame = p.frame();
    let dist = |u: &CMatrix| op_norm(&(&v - &frame * u));

    let global = grid / 4;
    let mut best_u = identity(rank);
    let mut best = dist(&best_u);
    for _ in 0..global {
        let u = haar_unitary(rank, &mut rng);
        let d = dist(&u);
        if d < best {
            best = d;
            best_u = u;
        }
    }
    let mut scale = 0.2;
    let stage = ((grid - global) / 60).max(1);
    for s in 0..grid - global {
        let u = &best_u * small_unitary(rank, scale, &mut rng);
        let d = dist(&u);
        if d < best {
            best = d;
            best_u = u;
        }
        if (s + 1) % stage == 0 {
            scale *= 0.75;
        }
    }
    (op_norm(&(&v - &w)), best)
}
